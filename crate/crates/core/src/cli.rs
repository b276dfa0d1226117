//! Command-line front end.
//!
//! Configuration is one JSON document; command-line flags override its
//! fields. Relative paths in the document resolve against its directory.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backtest::{
    generate_windows, lexical_scorer, run_optimization_experiment, run_relationship_experiment,
    run_robustness_experiment, DataSources, ExperimentKind, ExperimentReport, ExperimentSettings, PortfolioSpec,
    TnRank, WindowPlan,
};
use crate::corpus::{build_vocabulary, decayed_term_counts, load_headlines, term_counts, HeadlineRecord};
use crate::dates::{parse_day, DateInterval};
use crate::error::Error;
use crate::lexical::{combined_distribution, lexical_ratio, risk_sensitive_lr, RiskKeywordSet, Weights};
use crate::market_data::{load_conditioning, PriceTable, PriceValues};
use crate::report::{report_csv, statistic_svg, summary_csv, weights_csv};
use crate::risk_metrics::{
    PerformanceConfig, PerformanceSummary, DEFAULT_PERIODS_PER_YEAR, DEFAULT_RISK_FREE, DEFAULT_VAR_ALPHA,
};
use crate::synthetic::{generate, SyntheticConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

/// Seed of the bundled synthetic dataset.
pub const BUNDLED_SEED: u64 = 5;

/// Keywords boosted when `--gamma` is given without a configured list.
pub const DEFAULT_RISK_KEYWORDS: [&str; 10] = [
    "risk",
    "crash",
    "selloff",
    "recession",
    "volatility",
    "fears",
    "plunge",
    "downgrade",
    "lawsuit",
    "default",
];

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn data(err: impl fmt::Display) -> Self {
        Self {
            code: EXIT_DATA,
            message: err.to_string(),
        }
    }

    fn internal(err: impl fmt::Display) -> Self {
        Self {
            code: EXIT_INTERNAL,
            message: err.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn config_err(err: Error) -> CliError {
    CliError::config(err.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "lexfolio",
    version,
    about = "Lexical-ratio portfolio diversification experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
struct CommonFlags {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed for weight draws and optimiser starts.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// VaR tail probability.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Annual risk-free rate.
    #[arg(long, global = true)]
    rf: Option<f64>,
    /// Headline decay rate per day.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Boost factor for risk keywords.
    #[arg(long, global = true)]
    gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Relationship,
    Robustness,
    Optimize,
}

impl From<KindArg> for ExperimentKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Relationship => ExperimentKind::Relationship,
            KindArg::Robustness => ExperimentKind::Robustness,
            KindArg::Optimize => ExperimentKind::Optimize,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lexical ratio of one portfolio over a date range.
    Lr {
        #[command(flatten)]
        common: CommonFlags,
        /// Portfolio name from the configuration.
        #[arg(long)]
        portfolio: Option<String>,
        /// Comma-separated weights (default: equal weights).
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long)]
        start: Option<String>,
        #[arg(long)]
        end: Option<String>,
        /// Normalisation vocabulary size (default: realised vocabulary).
        #[arg(long)]
        vocab_size: Option<usize>,
    },
    /// Run one of the rolling-window experiments.
    Experiment {
        #[command(flatten)]
        common: CommonFlags,
        #[arg(long, value_enum)]
        kind: KindArg,
    },
    /// Parse every input and print diagnostics without writing outputs.
    Validate {
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Write a synthetic dataset and a matching configuration.
    Synth {
        #[command(flatten)]
        common: CommonFlags,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpanConfig {
    pub start: String,
    pub end: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RelationshipWindows {
    /// Train plus test length, stepped like the optimisation plan.
    #[default]
    Composite,
    /// The robustness window length and step.
    Short,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub train_days: u32,
    pub test_days: u32,
    pub step_days: u32,
    pub short_days: u32,
    pub short_step_days: u32,
    pub relationship: RelationshipWindows,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            train_days: 720,
            test_days: 180,
            step_days: 90,
            short_days: 180,
            short_step_days: 90,
            relationship: RelationshipWindows::Composite,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct LrConfig {
    pub portfolio: Option<String>,
    pub weights: Option<Vec<f64>>,
    pub start: Option<String>,
    pub end: Option<String>,
    pub vocab_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub prices: Option<PathBuf>,
    pub headlines: Option<PathBuf>,
    pub conditioning: Option<PathBuf>,
    pub price_values: PriceValuesConfig,
    pub portfolios: Vec<PortfolioSpec>,
    pub span: Option<SpanConfig>,
    pub windows: WindowConfig,
    pub alpha: f64,
    pub rf: f64,
    pub periods_per_year: u32,
    pub return_targets: Vec<f64>,
    pub dirichlet_alpha: f64,
    pub n_weights: usize,
    pub seed: u64,
    pub decay_lambda: Option<f64>,
    pub risk_keywords: Option<Vec<String>>,
    pub gamma: Option<f64>,
    pub redraw_per_window: bool,
    pub tn_rank: TnRank,
    pub maximize_dr_sd: bool,
    pub output_dir: PathBuf,
    pub lr: LrConfig,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PriceValuesConfig {
    #[default]
    AdjustedClose,
    Returns,
}

impl From<PriceValuesConfig> for PriceValues {
    fn from(v: PriceValuesConfig) -> Self {
        match v {
            PriceValuesConfig::AdjustedClose => PriceValues::AdjustedClose,
            PriceValuesConfig::Returns => PriceValues::Returns,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            prices: None,
            headlines: None,
            conditioning: None,
            price_values: PriceValuesConfig::default(),
            portfolios: Vec::new(),
            span: None,
            windows: WindowConfig::default(),
            alpha: DEFAULT_VAR_ALPHA,
            rf: DEFAULT_RISK_FREE,
            periods_per_year: DEFAULT_PERIODS_PER_YEAR,
            return_targets: crate::allocation::DEFAULT_RETURN_TARGETS.to_vec(),
            dirichlet_alpha: 1.0,
            n_weights: 1000,
            seed: 0,
            decay_lambda: None,
            risk_keywords: None,
            gamma: None,
            redraw_per_window: false,
            tn_rank: TnRank::Metric,
            maximize_dr_sd: false,
            output_dir: PathBuf::from("out"),
            lr: LrConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    /// Reads `path` and resolves relative data paths against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?;
        cfg.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(cfg)
    }

    fn apply(&mut self, flags: &CommonFlags) {
        if let Some(out) = &flags.out {
            self.output_dir = std::path::absolute(out).unwrap_or_else(|_| out.clone());
        }
        if let Some(v) = flags.seed {
            self.seed = v;
        }
        if let Some(v) = flags.alpha {
            self.alpha = v;
        }
        if let Some(v) = flags.rf {
            self.rf = v;
        }
        if let Some(v) = flags.lambda {
            self.decay_lambda = Some(v);
        }
        if let Some(v) = flags.gamma {
            self.gamma = Some(v);
        }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    fn out_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// SHA-256 of the effective configuration, paths as written.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        format!("{:x}", Sha256::digest(&json))
    }

    fn require(&self, field: &'static str, value: &Option<PathBuf>) -> CliResult<PathBuf> {
        match value {
            None => Err(CliError::config(format!("config field `{field}` is required"))),
            Some(p) if !self.resolve(p).exists() => Err(CliError::config(format!(
                "config field `{field}` points to a missing file: {}",
                self.resolve(p).display()
            ))),
            Some(p) => Ok(self.resolve(p)),
        }
    }

    fn check_parameters(&self) -> CliResult<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::config(format!(
                "`alpha` must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !self.rf.is_finite() {
            return Err(CliError::config("`rf` must be finite"));
        }
        if self.periods_per_year == 0 {
            return Err(CliError::config("`periods_per_year` must be positive"));
        }
        if self.n_weights < 3 {
            return Err(CliError::config("`n_weights` must be at least 3"));
        }
        if !(self.dirichlet_alpha > 0.0) {
            return Err(CliError::config("`dirichlet_alpha` must be positive"));
        }
        if let Some(l) = self.decay_lambda {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(CliError::config(format!(
                    "`decay_lambda` must be non-negative, got {l}"
                )));
            }
        }
        if self.return_targets.is_empty() || self.return_targets.iter().any(|t| !t.is_finite()) {
            return Err(CliError::config("`return_targets` must be a non-empty list of numbers"));
        }
        self.risk_set()?;
        for p in &self.portfolios {
            PortfolioSpec::new(p.name.clone(), p.tickers.clone()).map_err(config_err)?;
        }
        Ok(())
    }

    fn risk_set(&self) -> CliResult<Option<RiskKeywordSet>> {
        match (self.gamma, &self.risk_keywords) {
            (None, None) => Ok(None),
            (None, Some(_)) => Err(CliError::config("`risk_keywords` given without `gamma`")),
            (Some(g), words) => {
                let words: Vec<String> = match words {
                    Some(w) => w.clone(),
                    None => DEFAULT_RISK_KEYWORDS.iter().map(|s| s.to_string()).collect(),
                };
                RiskKeywordSet::new(words, g).map(Some).map_err(config_err)
            }
        }
    }

    fn settings(&self) -> CliResult<ExperimentSettings> {
        Ok(ExperimentSettings {
            n_weights: self.n_weights,
            dirichlet_alpha: self.dirichlet_alpha,
            seed: self.seed,
            var_alpha: self.alpha,
            performance: PerformanceConfig {
                risk_free: self.rf,
                periods_per_year: self.periods_per_year,
                downside_target: 0.0,
            },
            return_targets: self.return_targets.clone(),
            decay_lambda: self.decay_lambda,
            risk_keywords: self.risk_set()?,
            redraw_per_window: self.redraw_per_window,
            tn_rank: self.tn_rank,
            maximize_dr_sd: self.maximize_dr_sd,
        })
    }

    fn explicit_span(&self) -> CliResult<Option<DateInterval>> {
        let Some(span) = &self.span else { return Ok(None) };
        let start = config_date("span.start", &span.start)?;
        let end = config_date("span.end", &span.end)?;
        DateInterval::new(start, end).map(Some).map_err(config_err)
    }

    fn plan(&self, kind: ExperimentKind, span: DateInterval) -> WindowPlan {
        let w = &self.windows;
        let (len, step, test) = match (kind, w.relationship) {
            (ExperimentKind::Optimize, _) => (w.train_days, w.step_days, Some(w.test_days)),
            (ExperimentKind::Relationship, RelationshipWindows::Composite) => {
                (w.train_days + w.test_days, w.step_days, None)
            }
            _ => (w.short_days, w.short_step_days, None),
        };
        WindowPlan {
            span_start: span.start,
            span_end: span.end,
            window_len_days: len,
            step_days: step,
            test_len_days: test,
        }
    }
}

fn config_date(field: &str, raw: &str) -> CliResult<NaiveDate> {
    parse_day(raw).ok_or_else(|| CliError::config(format!("`{field}` is not a YYYY-MM-DD date: {raw:?}")))
}

fn load_config(flags: &CommonFlags) -> CliResult<RunConfig> {
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(flags);
    cfg.check_parameters()?;
    Ok(cfg)
}

fn all_tickers(cfg: &RunConfig) -> Vec<String> {
    let mut t: Vec<String> = cfg.portfolios.iter().flat_map(|p| p.tickers.clone()).collect();
    t.sort();
    t.dedup();
    t
}

struct Loaded {
    sources: DataSources,
    span: DateInterval,
}

fn load_sources(cfg: &RunConfig) -> CliResult<Loaded> {
    let prices = cfg.require("prices", &cfg.prices)?;
    let headlines_path = cfg.require("headlines", &cfg.headlines)?;
    let conditioning = match &cfg.conditioning {
        Some(_) => Some(cfg.require("conditioning", &cfg.conditioning)?),
        None => None,
    };
    if cfg.portfolios.is_empty() {
        return Err(CliError::config("config field `portfolios` is empty"));
    }
    let explicit = cfg.explicit_span()?;

    let table = PriceTable::from_csv(&prices).map_err(CliError::data)?;
    let cond = conditioning
        .as_deref()
        .map(load_conditioning)
        .transpose()
        .map_err(CliError::data)?;
    let tickers = all_tickers(cfg);
    let panel = table
        .to_panel(
            Some(&tickers),
            explicit.as_ref(),
            cfg.price_values.into(),
            cond.as_ref(),
        )
        .map_err(CliError::data)?;
    let headlines = load_headlines(&headlines_path).map_err(CliError::data)?;
    let span = match explicit {
        Some(s) => s,
        None => DateInterval::new(panel.dates()[0], *panel.dates().last().expect("non-empty panel"))
            .map_err(CliError::internal)?,
    };
    Ok(Loaded {
        sources: DataSources { panel, headlines },
        span,
    })
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(CliError::config("`--jobs` must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(CliError::internal)?;
    Ok(pool.install(f))
}

fn cmd_lr(
    flags: &CommonFlags,
    portfolio: Option<String>,
    weights: Option<Vec<f64>>,
    start: Option<String>,
    end: Option<String>,
    vocab_size: Option<usize>,
) -> CliResult<()> {
    let cfg = load_config(flags)?;
    cfg.require("prices", &cfg.prices)?;
    let headlines_path = cfg.require("headlines", &cfg.headlines)?;

    let name = portfolio.or(cfg.lr.portfolio.clone());
    let spec = match &name {
        Some(n) => cfg
            .portfolios
            .iter()
            .find(|p| &p.name == n)
            .ok_or_else(|| CliError::config(format!("portfolio {n:?} is not defined in `portfolios`")))?,
        None => cfg
            .portfolios
            .first()
            .ok_or_else(|| CliError::config("config field `portfolios` is empty"))?,
    };
    let weights = match weights.or(cfg.lr.weights.clone()) {
        Some(w) if w.len() != spec.tickers.len() => {
            return Err(CliError::config(format!(
                "{} weights given for {} tickers",
                w.len(),
                spec.tickers.len()
            )))
        }
        Some(w) => Weights::new(w).map_err(config_err)?,
        None => Weights::equal(spec.tickers.len()),
    };

    let headlines: Vec<HeadlineRecord> = load_headlines(&headlines_path)
        .map_err(CliError::data)?
        .into_iter()
        .filter(|h| spec.tickers.contains(&h.asset_id))
        .collect();
    let start = match start.or(cfg.lr.start.clone()) {
        Some(s) => config_date("lr.start", &s)?,
        None => headlines.iter().map(|h| h.published_at).min().ok_or_else(|| {
            CliError::data(Error::EmptyCorpus(format!(
                "{} for portfolio {}",
                headlines_path.display(),
                spec.name
            )))
        })?,
    };
    let end = match end.or(cfg.lr.end.clone()) {
        Some(s) => config_date("lr.end", &s)?,
        None => headlines.iter().map(|h| h.published_at).max().unwrap_or(start),
    };
    let range = DateInterval::new(start, end).map_err(config_err)?;

    let vocab = build_vocabulary(&headlines, &range).map_err(CliError::data)?;
    let counts = match cfg.decay_lambda {
        Some(l) => decayed_term_counts(&headlines, &spec.tickers, &vocab, &range, l, range.end),
        None => term_counts(&headlines, &spec.tickers, &vocab, &range),
    }
    .map_err(CliError::data)?;
    let m = vocab_size.or(cfg.lr.vocab_size).unwrap_or(vocab.len());
    let lr = match cfg.risk_set()? {
        Some(risk) => risk_sensitive_lr(&counts, &weights, &risk, m),
        None => lexical_ratio(&counts, &weights, m),
    }
    .map_err(CliError::data)?;
    let dist = combined_distribution(&counts, &weights).map_err(CliError::data)?;

    let out = cfg.out_dir();
    fs::create_dir_all(&out).map_err(|e| CliError::data(format!("cannot create {}: {e}", out.display())))?;
    let mut csv = String::from("term,probability\n");
    for (term, p) in vocab.terms().iter().zip(dist.probs()) {
        csv.push_str(&format!("{term},{p}\n"));
    }
    write(&out.join("lr_terms.csv"), &csv)?;
    println!("{lr:.6}");
    Ok(())
}

#[derive(Serialize)]
struct RunMetadata<'a> {
    kind: &'static str,
    seed: u64,
    config_sha256: String,
    span_start: String,
    span_end: String,
    windows: usize,
    portfolios: usize,
    failed_cells: usize,
    version: &'static str,
    config: &'a RunConfig,
}

fn run_kind(
    kind: ExperimentKind,
    cfg: &RunConfig,
    loaded: &Loaded,
    jobs: Option<usize>,
) -> CliResult<ExperimentReport> {
    let settings = cfg.settings()?;
    let plan = cfg.plan(kind, loaded.span);
    generate_windows(&plan).map_err(config_err)?;
    let portfolios = &cfg.portfolios;
    let sources = &loaded.sources;
    let result = with_pool(jobs, || match kind {
        ExperimentKind::Relationship => run_relationship_experiment(portfolios, sources, &plan, &settings),
        ExperimentKind::Robustness => run_robustness_experiment(portfolios, sources, &plan, &settings),
        ExperimentKind::Optimize => run_optimization_experiment(portfolios, sources, &plan, &settings),
    })?;
    result.map_err(CliError::data)
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn cmd_experiment(flags: &CommonFlags, kind: ExperimentKind) -> CliResult<usize> {
    let cfg = load_config(flags)?;
    let loaded = load_sources(&cfg)?;
    let report = run_kind(kind, &cfg, &loaded, flags.jobs)?;

    let out = &cfg.out_dir();
    fs::create_dir_all(out).map_err(|e| CliError::data(format!("cannot create {}: {e}", out.display())))?;
    let k = kind.as_str();
    write(&out.join(format!("report_{k}.csv")), &report_csv(&report))?;
    write(&out.join(format!("summary_{k}.csv")), &summary_csv(&report))?;
    if kind == ExperimentKind::Optimize {
        write(&out.join("weights_optimize.csv"), &weights_csv(&report))?;
        for p in &cfg.portfolios {
            for stat in PerformanceSummary::STATISTICS {
                let svg = statistic_svg(&report, &p.name, stat);
                write(&out.join(format!("plot_{}_{stat}.svg", file_stem(&p.name))), &svg)?;
            }
        }
    }
    let meta = RunMetadata {
        kind: k,
        seed: cfg.seed,
        config_sha256: cfg.digest(),
        span_start: report.metadata.span_start.to_string(),
        span_end: report.metadata.span_end.to_string(),
        windows: report.metadata.windows,
        portfolios: report.metadata.portfolios,
        failed_cells: report.failures(),
        version: env!("CARGO_PKG_VERSION"),
        config: &cfg,
    };
    let json = serde_json::to_string_pretty(&meta).map_err(CliError::internal)?;
    write(&out.join(format!("metadata_{k}.json")), &(json + "\n"))?;
    println!("wrote {k} report to {}", out.display());
    Ok(report.failures())
}

fn cmd_validate(flags: &CommonFlags) -> CliResult<usize> {
    let cfg = load_config(flags)?;
    let prices = cfg.require("prices", &cfg.prices)?;
    let headlines_path = cfg.require("headlines", &cfg.headlines)?;
    let conditioning = match &cfg.conditioning {
        Some(_) => Some(cfg.require("conditioning", &cfg.conditioning)?),
        None => None,
    };
    let mut warnings = 0;

    let table = PriceTable::from_csv(&prices).map_err(CliError::data)?;
    let tickers = all_tickers(&cfg);
    let mut priced = 0;
    for p in &cfg.portfolios {
        for t in &p.tickers {
            if !table.contains(t) {
                println!("warning: ticker {t} of portfolio {} is absent from the prices", p.name);
                warnings += 1;
            }
        }
    }
    for t in &tickers {
        priced += usize::from(table.contains(t));
    }
    println!("coverage: {priced}/{} tickers priced", tickers.len());

    if let Some(c) = &conditioning {
        let series = load_conditioning(c).map_err(CliError::data)?;
        println!("conditioning: {} observations", series.len());
    }

    let span = match cfg.explicit_span()? {
        Some(s) => s,
        None => {
            let present: Vec<String> = tickers.iter().filter(|t| table.contains(t)).cloned().collect();
            let panel = table
                .to_panel(Some(&present), None, cfg.price_values.into(), None)
                .map_err(CliError::data)?;
            DateInterval::new(panel.dates()[0], *panel.dates().last().expect("non-empty"))
                .map_err(CliError::internal)?
        }
    };
    println!("span: {span}");
    for kind in [
        ExperimentKind::Optimize,
        ExperimentKind::Relationship,
        ExperimentKind::Robustness,
    ] {
        let n = generate_windows(&cfg.plan(kind, span)).map(|w| w.len()).unwrap_or(0);
        if kind == ExperimentKind::Optimize {
            println!("windows: {n}");
        } else {
            println!("{} windows: {n}", kind.as_str());
        }
    }

    let headlines = load_headlines(&headlines_path).map_err(CliError::data)?;
    let vocab = build_vocabulary(&headlines, &span).map_err(CliError::data)?;
    println!("headlines: {}", headlines.len());
    println!("vocabulary: {} terms", vocab.len());
    for t in &tickers {
        if !headlines.iter().any(|h| &h.asset_id == t) {
            println!("warning: ticker {t} has no headlines");
            warnings += 1;
        }
    }
    let settings = cfg.settings()?;
    for p in &cfg.portfolios {
        if let Err(e) = lexical_scorer(&headlines, &p.tickers, &span, &settings) {
            println!("warning: portfolio {}: {e}", p.name);
            warnings += 1;
        }
    }
    Ok(warnings)
}

fn cmd_synth(flags: &CommonFlags) -> CliResult<()> {
    let out = flags
        .out
        .clone()
        .ok_or_else(|| CliError::config("`--out` is required for synth"))?;
    let seed = flags.seed.unwrap_or(BUNDLED_SEED);
    let syn = SyntheticConfig::bundled(seed);
    let market = generate(&syn).map_err(CliError::internal)?;
    market.write(&out).map_err(CliError::data)?;
    let tickers = |prefix: &str| -> Vec<String> {
        market
            .tickers
            .iter()
            .filter(|t| t.starts_with(prefix))
            .cloned()
            .collect()
    };
    let cfg = RunConfig {
        prices: Some(PathBuf::from("prices.csv")),
        headlines: Some(PathBuf::from("headlines.jsonl")),
        conditioning: Some(PathBuf::from("vix.csv")),
        portfolios: vec![
            PortfolioSpec::new("technology", tickers("TECH")).map_err(CliError::internal)?,
            PortfolioSpec::new("energy", tickers("ENGY")).map_err(CliError::internal)?,
            PortfolioSpec::new("mixed", market.tickers.clone()).map_err(CliError::internal)?,
        ],
        seed,
        ..RunConfig::default()
    };
    let json = serde_json::to_string_pretty(&cfg).map_err(CliError::internal)?;
    write(&out.join("config.json"), &(json + "\n"))?;
    println!("wrote synthetic dataset to {}", out.display());
    Ok(())
}

/// Parses `args` and runs the selected command, returning the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Lr {
            common,
            portfolio,
            weights,
            start,
            end,
            vocab_size,
        } => cmd_lr(&common, portfolio, weights, start, end, vocab_size),
        Command::Experiment { common, kind } => cmd_experiment(&common, kind.into()).map(|failures| {
            if failures > 0 {
                eprintln!("warning: {failures} report cells failed (see status column)");
            }
        }),
        Command::Validate { common } => cmd_validate(&common).map(|warnings| {
            println!("warnings: {warnings}");
        }),
        Command::Synth { common } => cmd_synth(&common),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
