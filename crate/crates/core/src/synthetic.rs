//! Synthetic market generator: prices, a VIX-like volatility index and
//! per-asset headlines with a controllable vocabulary.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::allocation::task_rng;
use crate::corpus::HeadlineRecord;
use crate::error::{Error, Result};
use crate::market_data::{PriceTable, PriceValues, ReturnsPanel};

const COMMON_WORDS: &[&str] = &[
    "shares",
    "stock",
    "market",
    "investors",
    "report",
    "quarter",
    "earnings",
    "analyst",
    "outlook",
    "update",
    "revenue",
    "guidance",
    "trading",
    "price",
    "growth",
    "deal",
    "plan",
    "demand",
    "week",
    "rally",
];

const SECTOR_WORDS: &[&[&str]] = &[
    &[
        "cloud",
        "software",
        "chip",
        "data",
        "platform",
        "ai",
        "device",
        "semiconductor",
    ],
    &[
        "oil", "gas", "pipeline", "crude", "drilling", "refinery", "barrel", "output",
    ],
    &[
        "drug", "trial", "fda", "therapy", "vaccine", "patient", "biotech", "approval",
    ],
    &[
        "bank", "loan", "deposit", "credit", "rates", "lending", "capital", "mortgage",
    ],
    &[
        "retail", "store", "consumer", "brand", "sales", "holiday", "shopping", "apparel",
    ],
    &[
        "factory",
        "aerospace",
        "defense",
        "freight",
        "machinery",
        "orders",
        "rail",
        "contract",
    ],
];

const RISK_WORDS: &[&str] = &[
    "selloff",
    "fears",
    "volatility",
    "crash",
    "recession",
    "plunge",
    "downgrade",
];

const SPECIFIC_WORDS: &[&str] = &[
    "merger",
    "lawsuit",
    "dividend",
    "buyback",
    "launch",
    "partnership",
    "expansion",
    "layoffs",
    "acquisition",
    "upgrade",
    "patent",
    "supply",
    "pricing",
    "margin",
    "forecast",
    "leadership",
    "restructuring",
    "spinoff",
    "investment",
    "subscription",
    "factory",
    "export",
    "licence",
    "settlement",
];

/// Annualised drift of the common market factor.
const MARKET_DRIFT: f64 = 0.06;

/// Term used by an asset whose news vocabulary has collapsed.
pub const COLLAPSE_TERM: &str = "recall";

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticAsset {
    pub ticker: String,
    pub sector: usize,
    /// Annualised drift.
    pub drift: f64,
    /// Annualised idiosyncratic volatility.
    pub idio_vol: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub assets: Vec<SyntheticAsset>,
    pub seed: u64,
    /// Probability that an asset gets a headline on a trading day.
    pub headline_rate: f64,
    /// Asset whose headlines collapse to a single repeated term from the
    /// start of the span.
    pub collapse: Option<usize>,
}

impl SyntheticConfig {
    /// `n_sectors × per_sector` assets named `S<sector>A<asset>`.
    pub fn universe(start: NaiveDate, end: NaiveDate, n_sectors: usize, per_sector: usize, seed: u64) -> Self {
        let mut assets = Vec::new();
        for s in 0..n_sectors {
            for a in 0..per_sector {
                let k = (s * per_sector + a) as f64;
                assets.push(SyntheticAsset {
                    ticker: format!("S{s}A{a}"),
                    sector: s % SECTOR_WORDS.len(),
                    drift: 0.04 + 0.02 * ((k * 0.37).sin() + 1.0) * 3.0,
                    idio_vol: 0.12 + 0.08 * ((k * 0.61).cos() + 1.0),
                    beta: 0.7 + 0.3 * ((k * 1.3).sin() + 1.0),
                });
            }
        }
        Self {
            start,
            end,
            assets,
            seed,
            headline_rate: 0.3,
            collapse: None,
        }
    }

    /// The bundled eight-asset, two-sector dataset. Asset `TECH4` is the
    /// lowest-volatility name and its news collapses to a single term.
    pub fn bundled(seed: u64) -> Self {
        let spec: [(&str, usize, f64, f64, f64); 8] = [
            ("TECH1", 0, 0.18, 0.30, 1.2),
            ("TECH2", 0, 0.14, 0.26, 1.1),
            ("TECH3", 0, 0.11, 0.22, 1.0),
            ("TECH4", 0, 0.08, 0.06, 0.3),
            ("ENGY1", 1, 0.15, 0.32, 1.1),
            ("ENGY2", 1, 0.12, 0.24, 0.9),
            ("ENGY3", 1, 0.09, 0.20, 0.8),
            ("ENGY4", 1, 0.07, 0.18, 0.7),
        ];
        Self {
            start: NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2023, 12, 31).expect("valid date"),
            assets: spec
                .iter()
                .map(|(t, s, d, v, b)| SyntheticAsset {
                    ticker: t.to_string(),
                    sector: *s,
                    drift: *d,
                    idio_vol: *v,
                    beta: *b,
                })
                .collect(),
            seed,
            headline_rate: 0.35,
            collapse: Some(3),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMarket {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    /// `prices[t][i]`: adjusted close of asset `i` on `dates[t]`.
    pub prices: Vec<Vec<f64>>,
    pub vix: BTreeMap<NaiveDate, f64>,
    pub headlines: Vec<HeadlineRecord>,
}

fn trading_days(start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    let mut d = start;
    while d <= end {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

fn pick<'a, R: Rng>(rng: &mut R, words: &[&'a str]) -> &'a str {
    words[rng.gen_range(0..words.len())]
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticMarket> {
    if cfg.assets.is_empty() {
        return Err(Error::InvalidArgument("synthetic universe has no assets".into()));
    }
    if cfg.end <= cfg.start {
        return Err(Error::InvalidArgument("synthetic span is empty".into()));
    }
    let dates = trading_days(cfg.start, cfg.end);
    let n = cfg.assets.len();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let dt = 1.0 / 252.0;

    let mut market_rng = task_rng(cfg.seed, 0);
    let mut news_rng = task_rng(cfg.seed, 1);
    let n_sectors = cfg.assets.iter().map(|a| a.sector).max().unwrap_or(0) + 1;

    // Log-VIX follows a mean-reverting AR(1) around ln 18.
    let mut log_vix = 18f64.ln();
    let mut vix = BTreeMap::new();
    let mut prices = Vec::with_capacity(dates.len());
    let mut level = vec![100.0; n];
    let mut headlines = Vec::new();

    for (t, date) in dates.iter().enumerate() {
        log_vix = 18f64.ln() + 0.97 * (log_vix - 18f64.ln()) + 0.08 * normal.sample(&mut market_rng);
        let v = log_vix.exp().clamp(9.0, 80.0);
        vix.insert(*date, (v * 100.0).round() / 100.0);

        if t > 0 {
            let market_vol = v / 100.0;
            let market = (MARKET_DRIFT - 0.5 * market_vol * market_vol) * dt
                + market_vol * dt.sqrt() * normal.sample(&mut market_rng);
            let sector: Vec<f64> = (0..n_sectors)
                .map(|_| 0.10 * dt.sqrt() * normal.sample(&mut market_rng))
                .collect();
            for (i, a) in cfg.assets.iter().enumerate() {
                let idio = a.idio_vol * dt.sqrt() * normal.sample(&mut market_rng);
                let r = a.drift * dt + a.beta * market + sector[a.sector] + idio;
                level[i] *= r.exp();
            }
        }
        prices.push(level.iter().map(|p| (p * 1e4).round() / 1e4).collect());

        let stressed = v > 25.0;
        for (i, a) in cfg.assets.iter().enumerate() {
            if news_rng.gen::<f64>() >= cfg.headline_rate {
                continue;
            }
            let text = if cfg.collapse == Some(i) {
                format!("{t} {t} {t}", t = COLLAPSE_TERM)
            } else {
                let sector_words = SECTOR_WORDS[a.sector % SECTOR_WORDS.len()];
                let own = &SPECIFIC_WORDS[(i * 3) % SPECIFIC_WORDS.len()..][..3];
                let mut words = vec![
                    a.ticker.to_lowercase(),
                    pick(&mut news_rng, own).to_string(),
                    pick(&mut news_rng, sector_words).to_string(),
                    pick(&mut news_rng, sector_words).to_string(),
                    pick(&mut news_rng, COMMON_WORDS).to_string(),
                    pick(&mut news_rng, COMMON_WORDS).to_string(),
                ];
                if stressed && news_rng.gen::<f64>() < 0.6 {
                    words.push(pick(&mut news_rng, RISK_WORDS).to_string());
                }
                words.join(" ")
            };
            headlines.push(HeadlineRecord::new(a.ticker.clone(), *date, text));
        }
    }

    Ok(SyntheticMarket {
        dates,
        tickers: cfg.assets.iter().map(|a| a.ticker.clone()).collect(),
        prices,
        vix,
        headlines,
    })
}

impl SyntheticMarket {
    pub fn price_table(&self) -> PriceTable {
        let mut table = PriceTable::default();
        for (date, row) in self.dates.iter().zip(&self.prices) {
            for (ticker, p) in self.tickers.iter().zip(row) {
                table.insert(ticker.clone(), *date, *p);
            }
        }
        table
    }

    /// Simple-return panel over all tickers, conditioned on the VIX series.
    pub fn panel(&self) -> Result<ReturnsPanel> {
        self.price_table()
            .to_panel(Some(&self.tickers), None, PriceValues::AdjustedClose, Some(&self.vix))
    }

    /// Writes `prices.csv` (wide), `vix.csv` and `headlines.jsonl` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut prices = format!("date,{}\n", self.tickers.join(","));
        for (date, row) in self.dates.iter().zip(&self.prices) {
            let cells: Vec<String> = row.iter().map(|p| format!("{p:.4}")).collect();
            prices.push_str(&format!("{date},{}\n", cells.join(",")));
        }
        write_file(&dir.join("prices.csv"), prices.as_bytes())?;

        let mut vix = String::from("date,value\n");
        for (date, v) in &self.vix {
            vix.push_str(&format!("{date},{v:.2}\n"));
        }
        write_file(&dir.join("vix.csv"), vix.as_bytes())?;

        #[derive(Serialize)]
        struct Line<'a> {
            ticker: &'a str,
            date: String,
            title: &'a str,
        }
        let mut out = Vec::new();
        for h in &self.headlines {
            let line = Line {
                ticker: &h.asset_id,
                date: h.published_at.to_string(),
                title: &h.text,
            };
            serde_json::to_writer(&mut out, &line).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            out.push(b'\n');
        }
        write_file(&dir.join("headlines.jsonl"), &out)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
