//! Price and return ingestion, date alignment, covariance and empirical VaR.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::dates::{parse_day, DateInterval};
use crate::error::{Error, Result};

/// Minimum sample length for historical VaR.
pub const MIN_VAR_OBSERVATIONS: usize = 20;

/// Date-aligned simple returns, `T × n`, with an optional conditioning series.
///
/// Dates are strictly increasing and every cell is populated; rows with a gap
/// in any asset (or in the conditioning series) are dropped during alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    dates: Vec<NaiveDate>,
    assets: Vec<String>,
    returns: DMatrix<f64>,
    conditioning: Option<Vec<f64>>,
}

impl ReturnsPanel {
    pub fn new(
        dates: Vec<NaiveDate>,
        assets: Vec<String>,
        returns: DMatrix<f64>,
        conditioning: Option<Vec<f64>>,
    ) -> Result<Self> {
        if assets.is_empty() || dates.is_empty() {
            return Err(Error::InsufficientData(
                "panel needs at least one asset and one date".into(),
            ));
        }
        if returns.nrows() != dates.len() || returns.ncols() != assets.len() {
            return Err(Error::DimensionMismatch(format!(
                "returns are {}x{} for {} dates and {} assets",
                returns.nrows(),
                returns.ncols(),
                dates.len(),
                assets.len()
            )));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("panel dates must be strictly increasing".into()));
        }
        if let Some(c) = &conditioning {
            if c.len() != dates.len() {
                return Err(Error::DimensionMismatch(
                    "conditioning series length differs from dates".into(),
                ));
            }
        }
        if returns
            .iter()
            .chain(conditioning.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument("panel contains non-finite values".into()));
        }
        Ok(Self {
            dates,
            assets,
            returns,
            conditioning,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn conditioning(&self) -> Option<&[f64]> {
        self.conditioning.as_deref()
    }

    pub fn n_periods(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn column(&self, asset: usize) -> Vec<f64> {
        self.returns.column(asset).iter().copied().collect()
    }

    /// Restricts the panel to the named assets, in the given order.
    pub fn select_assets(&self, tickers: &[String]) -> Result<ReturnsPanel> {
        let cols = tickers
            .iter()
            .map(|t| {
                self.assets
                    .iter()
                    .position(|a| a == t)
                    .ok_or_else(|| Error::InsufficientData(format!("ticker {t} absent from the price panel")))
            })
            .collect::<Result<Vec<_>>>()?;
        let returns = DMatrix::from_fn(self.n_periods(), cols.len(), |r, c| self.returns[(r, cols[c])]);
        ReturnsPanel::new(self.dates.clone(), tickers.to_vec(), returns, self.conditioning.clone())
    }

    /// Per-period portfolio returns `X w`.
    pub fn portfolio_returns(&self, weights: &[f64]) -> Result<Vec<f64>> {
        if weights.len() != self.n_assets() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} assets",
                weights.len(),
                self.n_assets()
            )));
        }
        Ok(self
            .returns
            .row_iter()
            .map(|row| row.iter().zip(weights).map(|(r, w)| r * w).sum())
            .collect())
    }

    /// Sample mean per asset, multiplied by `periods_per_year`.
    pub fn annualized_means(&self, periods_per_year: f64) -> Vec<f64> {
        let t = self.n_periods() as f64;
        self.returns
            .column_iter()
            .map(|c| c.sum() / t * periods_per_year)
            .collect()
    }
}

/// Whether the value column of a prices file holds adjusted closes or returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PriceValues {
    #[default]
    AdjustedClose,
    Returns,
}

/// Raw per-ticker time series as read from a prices file.
#[derive(Debug, Clone, Default)]
pub struct PriceTable {
    series: BTreeMap<String, BTreeMap<NaiveDate, f64>>,
}

impl PriceTable {
    /// Reads a long-form (`date,ticker,<value>`) or wide-form
    /// (`date,<ticker1>,<ticker2>,...`) CSV; the layout is detected from the header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::parse(path, e))?;
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| Error::parse(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.len() < 2 || !header[0].eq_ignore_ascii_case("date") {
            return Err(Error::parse(path, "header must start with `date`"));
        }
        let long = header.len() == 3 && header[1].eq_ignore_ascii_case("ticker");
        let mut table = PriceTable::default();
        for (line, row) in reader.records().enumerate() {
            let row = row.map_err(|e| Error::parse(path, e))?;
            let line = line + 2;
            let date =
                parse_day(&row[0]).ok_or_else(|| Error::parse(path, format!("line {line}: bad date {:?}", &row[0])))?;
            let value = |raw: &str| -> Result<Option<f64>> {
                if raw.is_empty() || raw.eq_ignore_ascii_case("nan") || raw.eq_ignore_ascii_case("na") {
                    return Ok(None);
                }
                raw.parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::parse(path, format!("line {line}: bad number {raw:?}")))
            };
            if long {
                if let Some(v) = value(&row[2])? {
                    table.insert(row[1].to_string(), date, v);
                }
            } else {
                for (col, ticker) in header.iter().enumerate().skip(1) {
                    if let Some(v) = value(row.get(col).unwrap_or(""))? {
                        table.insert(ticker.clone(), date, v);
                    }
                }
            }
        }
        Ok(table)
    }

    pub fn insert(&mut self, ticker: String, date: NaiveDate, value: f64) {
        self.series.entry(ticker).or_default().insert(date, value);
    }

    pub fn tickers(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    pub fn contains(&self, ticker: &str) -> bool {
        self.series.contains_key(ticker)
    }

    /// Builds an aligned panel by inner-joining the selected tickers (all
    /// tickers when `assets` is `None`) over `range`.
    pub fn to_panel(
        &self,
        assets: Option<&[String]>,
        range: Option<&DateInterval>,
        values: PriceValues,
        conditioning: Option<&BTreeMap<NaiveDate, f64>>,
    ) -> Result<ReturnsPanel> {
        let tickers: Vec<String> = match assets {
            Some(a) => a.to_vec(),
            None => self.series.keys().cloned().collect(),
        };
        if tickers.is_empty() {
            return Err(Error::InsufficientData("no tickers selected".into()));
        }
        let columns = tickers
            .iter()
            .map(|t| {
                self.series
                    .get(t)
                    .ok_or_else(|| Error::InsufficientData(format!("ticker {t} absent from the price file")))
            })
            .collect::<Result<Vec<_>>>()?;

        let in_range = |d: &NaiveDate| range.is_none_or(|r| r.contains(*d));
        let common: BTreeSet<NaiveDate> = columns[0]
            .keys()
            .filter(|d| in_range(d) && columns[1..].iter().all(|c| c.contains_key(d)))
            .copied()
            .collect();
        let common: Vec<NaiveDate> = common.into_iter().collect();

        // (date, per-asset return) pairs before conditioning alignment
        let mut rows: Vec<(NaiveDate, Vec<f64>)> = match values {
            PriceValues::Returns => common
                .iter()
                .map(|d| (*d, columns.iter().map(|c| c[d]).collect()))
                .collect(),
            PriceValues::AdjustedClose => common
                .windows(2)
                .map(|pair| {
                    let r = columns.iter().map(|c| c[&pair[1]] / c[&pair[0]] - 1.0).collect();
                    (pair[1], r)
                })
                .collect(),
        };
        let cond = conditioning.map(|series| {
            rows.retain(|(d, _)| series.contains_key(d));
            rows.iter().map(|(d, _)| series[d]).collect::<Vec<f64>>()
        });
        if rows.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "{} aligned return rows (need at least 2)",
                rows.len()
            )));
        }
        let returns = DMatrix::from_fn(rows.len(), tickers.len(), |r, c| rows[r].1[c]);
        let dates = rows.into_iter().map(|(d, _)| d).collect();
        ReturnsPanel::new(dates, tickers, returns, cond)
    }
}

/// Reads a `date,value` CSV.
pub fn load_conditioning(path: &Path) -> Result<BTreeMap<NaiveDate, f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::parse(path, e))?;
    let mut out = BTreeMap::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::parse(path, e))?;
        if row.len() < 2 {
            return Err(Error::parse(path, format!("line {}: expected date,value", line + 2)));
        }
        let date = parse_day(&row[0]).ok_or_else(|| Error::parse(path, format!("line {}: bad date", line + 2)))?;
        if row[1].is_empty() {
            continue;
        }
        let v: f64 = row[1]
            .parse()
            .map_err(|_| Error::parse(path, format!("line {}: bad value {:?}", line + 2, &row[1])))?;
        out.insert(date, v);
    }
    Ok(out)
}

/// Loads and aligns a returns panel from a prices CSV and optional conditioning CSV.
pub fn load_panel(
    prices: &Path,
    assets: Option<&[String]>,
    range: Option<&DateInterval>,
    values: PriceValues,
    conditioning: Option<&Path>,
) -> Result<ReturnsPanel> {
    let table = PriceTable::from_csv(prices)?;
    let cond = conditioning.map(load_conditioning).transpose()?;
    table.to_panel(assets, range, values, cond.as_ref())
}

/// Symmetric sample covariance (denominator `T - 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix(DMatrix<f64>);

impl CovarianceMatrix {
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::DimensionMismatch("covariance must be square".into()));
        }
        let n = values.nrows();
        for i in 0..n {
            if values[(i, i)] < 0.0 {
                return Err(Error::InvalidArgument(
                    "covariance diagonal must be non-negative".into(),
                ));
            }
            for j in 0..i {
                if (values[(i, j)] - values[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidArgument("covariance must be symmetric".into()));
                }
            }
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn quadratic_form(&self, w: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for (i, wi) in w.iter().enumerate().take(n) {
            let row: f64 = w.iter().enumerate().take(n).map(|(j, wj)| self.0[(i, j)] * wj).sum();
            acc += wi * row;
        }
        acc
    }
}

pub fn covariance(panel: &ReturnsPanel) -> Result<CovarianceMatrix> {
    let t = panel.n_periods();
    if t < 2 {
        return Err(Error::InsufficientData(format!("covariance needs T >= 2, got {t}")));
    }
    let x = panel.returns();
    let n = x.ncols();
    let means: Vec<f64> = x.column_iter().map(|c| c.sum() / t as f64).collect();
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = 0.0;
            for r in 0..t {
                acc += (x[(r, i)] - means[i]) * (x[(r, j)] - means[j]);
            }
            let v = acc / (t - 1) as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(CovarianceMatrix(cov))
}

/// Empirical `alpha`-quantile with linear interpolation between order
/// statistics (position `(N - 1) * alpha`), negated so losses are positive.
pub fn historical_var(series: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "VaR level must lie in (0, 1), got {alpha}"
        )));
    }
    if series.len() < MIN_VAR_OBSERVATIONS {
        return Err(Error::InsufficientData(format!(
            "historical VaR needs at least {MIN_VAR_OBSERVATIONS} observations, got {}",
            series.len()
        )));
    }
    let mut buf = series.to_vec();
    let h = (buf.len() - 1) as f64 * alpha;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let (_, &mut lower, upper) = buf.select_nth_unstable_by(lo, f64::total_cmp);
    let q = if frac > 0.0 {
        let next = upper.iter().copied().fold(f64::INFINITY, f64::min);
        lower + frac * (next - lower)
    } else {
        lower
    };
    Ok(-q)
}

/// Rows of `panel` whose dates fall inside `window`.
pub fn slice(panel: &ReturnsPanel, window: &DateInterval) -> Result<ReturnsPanel> {
    let rows: Vec<usize> = panel
        .dates
        .iter()
        .enumerate()
        .filter(|(_, d)| window.contains(**d))
        .map(|(i, _)| i)
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyWindow(window.to_string()));
    }
    let returns = DMatrix::from_fn(rows.len(), panel.n_assets(), |r, c| panel.returns[(rows[r], c)]);
    let dates = rows.iter().map(|&r| panel.dates[r]).collect();
    let conditioning = panel
        .conditioning
        .as_ref()
        .map(|c| rows.iter().map(|&r| c[r]).collect());
    ReturnsPanel::new(dates, panel.assets.clone(), returns, conditioning)
}
