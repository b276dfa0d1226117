//! Rolling-window experiment engines.
//!
//! Three protocols share the same plumbing: a [`WindowPlan`] is expanded into
//! consecutive windows, each (portfolio, window) pair is evaluated as an
//! independent task on the rayon pool, and the results are gathered into an
//! [`ExperimentReport`] whose rows are sorted before they leave this module.
//! Random draws come from per-task ChaCha streams, so reports do not depend
//! on the thread count.

use std::collections::BTreeSet;

use chrono::{Days, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{optimize_all_targets, task_rng, DirichletParams, Objective, DEFAULT_RETURN_TARGETS};
use crate::corpus::{build_vocabulary, decayed_term_counts, term_counts, HeadlineRecord};
use crate::dates::DateInterval;
use crate::dependence::{conditional_dependence_tn, ols_lr_regression, pearson, DependenceSample};
use crate::error::{Error, Result};
use crate::lexical::{LexicalScorer, RiskKeywordSet, Weights};
use crate::market_data::{covariance, slice, CovarianceMatrix, ReturnsPanel};
use crate::risk_metrics::{
    coefficient_of_variation, dr_sd, performance_summary, portfolio_volatility, DrVarEvaluator, MetricKind,
    PerformanceConfig, PerformanceSummary, DEFAULT_VAR_ALPHA,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub span_start: NaiveDate,
    pub span_end: NaiveDate,
    pub window_len_days: u32,
    pub step_days: u32,
    pub test_len_days: Option<u32>,
}

impl WindowPlan {
    fn total_len(&self) -> i64 {
        self.window_len_days as i64 + self.test_len_days.unwrap_or(0) as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub index: usize,
    pub train: DateInterval,
    pub test: Option<DateInterval>,
}

impl Window {
    /// The train interval extended through the test interval.
    pub fn full(&self) -> DateInterval {
        DateInterval {
            start: self.train.start,
            end: self.test.map_or(self.train.end, |t| t.end),
        }
    }
}

fn offset(d: NaiveDate, days: i64) -> NaiveDate {
    d + Days::new(days as u64)
}

pub fn generate_windows(plan: &WindowPlan) -> Result<Vec<Window>> {
    if plan.window_len_days == 0 || plan.step_days == 0 || plan.test_len_days == Some(0) {
        return Err(Error::NoWindows(
            "window length, test length and step must be positive".into(),
        ));
    }
    let span = (plan.span_end - plan.span_start).num_days() + 1;
    let total = plan.total_len();
    if span < total {
        return Err(Error::NoWindows(format!(
            "span of {span} days is shorter than one {total}-day window"
        )));
    }
    let count = ((span - total) / plan.step_days as i64 + 1) as usize;
    Ok((0..count)
        .map(|k| {
            let start = offset(plan.span_start, k as i64 * plan.step_days as i64);
            let train_end = offset(start, plan.window_len_days as i64 - 1);
            let test = plan.test_len_days.map(|len| DateInterval {
                start: offset(train_end, 1),
                end: offset(train_end, len as i64),
            });
            Window {
                index: k,
                train: DateInterval { start, end: train_end },
                test,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortfolioSpec {
    pub name: String,
    pub tickers: Vec<String>,
}

impl PortfolioSpec {
    pub fn new(name: impl Into<String>, tickers: Vec<String>) -> Result<Self> {
        let name = name.into();
        if tickers.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "portfolio {name} needs at least 2 tickers"
            )));
        }
        let unique: BTreeSet<&String> = tickers.iter().collect();
        if unique.len() != tickers.len() {
            return Err(Error::InvalidArgument(format!("portfolio {name} lists a ticker twice")));
        }
        Ok(Self { name, tickers })
    }
}

/// In-memory inputs shared by every experiment.
#[derive(Debug, Clone)]
pub struct DataSources {
    pub panel: ReturnsPanel,
    pub headlines: Vec<HeadlineRecord>,
}

/// Which variable of the T_n triple is ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TnRank {
    /// Rank the traditional metric, condition on the VIX proxy and LR.
    #[default]
    Metric,
    /// Rank LR, condition on the VIX proxy and the traditional metric.
    Lr,
}

#[derive(Debug, Clone)]
pub struct ExperimentSettings {
    pub n_weights: usize,
    pub dirichlet_alpha: f64,
    pub seed: u64,
    pub var_alpha: f64,
    pub performance: PerformanceConfig,
    pub return_targets: Vec<f64>,
    pub decay_lambda: Option<f64>,
    pub risk_keywords: Option<RiskKeywordSet>,
    pub redraw_per_window: bool,
    pub tn_rank: TnRank,
    pub maximize_dr_sd: bool,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            n_weights: 1000,
            dirichlet_alpha: 1.0,
            seed: 0,
            var_alpha: DEFAULT_VAR_ALPHA,
            performance: PerformanceConfig::default(),
            return_targets: DEFAULT_RETURN_TARGETS.to_vec(),
            decay_lambda: None,
            risk_keywords: None,
            redraw_per_window: false,
            tn_rank: TnRank::default(),
            maximize_dr_sd: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Relationship,
    Robustness,
    Optimize,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Relationship => "relationship",
            ExperimentKind::Robustness => "robustness",
            ExperimentKind::Optimize => "optimize",
        }
    }
}

/// One cell of a report. Exactly one of `value` and a non-"ok" `status` is set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub portfolio: String,
    pub window: Option<usize>,
    pub window_start: Option<NaiveDate>,
    pub window_end: Option<NaiveDate>,
    pub metric: String,
    pub statistic: String,
    pub value: Option<f64>,
    pub status: String,
}

impl ReportRow {
    pub fn is_ok(&self) -> bool {
        self.value.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightRecord {
    pub portfolio: String,
    pub window: usize,
    pub objective: String,
    pub target: f64,
    pub ticker: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub span_start: NaiveDate,
    pub span_end: NaiveDate,
    pub windows: usize,
    pub portfolios: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub metadata: ReportMetadata,
    pub rows: Vec<ReportRow>,
    /// Optimised weights per target (optimisation experiment only).
    pub weights: Vec<WeightRecord>,
}

impl ExperimentReport {
    fn new(metadata: ReportMetadata, mut rows: Vec<ReportRow>, mut weights: Vec<WeightRecord>) -> Self {
        rows.sort_by(|a, b| {
            (&a.portfolio, a.window, &a.metric, &a.statistic).cmp(&(&b.portfolio, b.window, &b.metric, &b.statistic))
        });
        weights.sort_by(|a, b| {
            (&a.portfolio, a.window, &a.objective)
                .cmp(&(&b.portfolio, b.window, &b.objective))
                .then(a.target.total_cmp(&b.target))
                .then(a.ticker.cmp(&b.ticker))
        });
        Self {
            metadata,
            rows,
            weights,
        }
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_ok()).count()
    }

    pub fn value(&self, portfolio: &str, window: Option<usize>, metric: &str, statistic: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.portfolio == portfolio && r.window == window && r.metric == metric && r.statistic == statistic)
            .and_then(|r| r.value)
    }
}

struct RowSink<'a> {
    portfolio: &'a str,
    window: Option<&'a Window>,
    rows: Vec<ReportRow>,
}

impl<'a> RowSink<'a> {
    fn new(portfolio: &'a str, window: Option<&'a Window>) -> Self {
        Self {
            portfolio,
            window,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, metric: &str, statistic: &str, value: Result<f64>) {
        let (value, status) = match value {
            Ok(v) if v.is_finite() => (Some(v), "ok".to_string()),
            Ok(v) => (None, format!("non-finite value {v}")),
            Err(e) => (None, e.to_string()),
        };
        let span = self.window.map(Window::full);
        self.rows.push(ReportRow {
            portfolio: self.portfolio.to_string(),
            window: self.window.map(|w| w.index),
            window_start: span.map(|s| s.start),
            window_end: span.map(|s| s.end),
            metric: metric.to_string(),
            statistic: statistic.to_string(),
            value,
            status,
        });
    }

    fn fail(&mut self, metric: &str, statistics: &[&str], err: &Error) {
        for s in statistics {
            self.push(metric, s, Err(clone_err(err)));
        }
    }
}

/// Errors are reported as text, so a lossy copy is enough.
fn clone_err(e: &Error) -> Error {
    Error::Reported(e.to_string())
}

/// Per-(portfolio, window) state needed to evaluate every metric.
struct WindowContext {
    panel: ReturnsPanel,
    cov: CovarianceMatrix,
    scorer: LexicalScorer,
    var_alpha: f64,
}

impl WindowContext {
    fn build(
        panel: &ReturnsPanel,
        headlines: &[HeadlineRecord],
        tickers: &[String],
        interval: &DateInterval,
        settings: &ExperimentSettings,
    ) -> Result<Self> {
        let panel = slice(panel, interval)?;
        let cov = covariance(&panel)?;
        let scorer = lexical_scorer(headlines, tickers, interval, settings)?;
        Ok(Self {
            panel,
            cov,
            scorer,
            var_alpha: settings.var_alpha,
        })
    }

    fn metric(&self, kind: MetricKind, w: &[f64], var: Option<&DrVarEvaluator>) -> Result<f64> {
        match kind {
            MetricKind::Lr => self.scorer.score(w),
            MetricKind::Volatility => portfolio_volatility(w, &self.cov),
            MetricKind::DrSd => dr_sd(w, &self.cov),
            MetricKind::DrVar => match var {
                Some(e) => e.eval(w),
                None => DrVarEvaluator::new(&self.panel, self.var_alpha)?.eval(w),
            },
        }
    }

    /// Metric values for every draw; fails if any draw fails.
    fn metric_series(&self, kind: MetricKind, draws: &[Weights]) -> Result<Vec<f64>> {
        let var = match kind {
            MetricKind::DrVar => Some(DrVarEvaluator::new(&self.panel, self.var_alpha)?),
            _ => None,
        };
        draws
            .iter()
            .map(|w| self.metric(kind, w.as_slice(), var.as_ref()))
            .collect()
    }
}

/// LR scorer over the portfolio's own headlines in `interval`, with the
/// vocabulary (and hence `m`) rebuilt for that interval.
pub fn lexical_scorer(
    headlines: &[HeadlineRecord],
    tickers: &[String],
    interval: &DateInterval,
    settings: &ExperimentSettings,
) -> Result<LexicalScorer> {
    let vocab = build_vocabulary(headlines, interval)?;
    let counts = match settings.decay_lambda {
        Some(lambda) => decayed_term_counts(headlines, tickers, &vocab, interval, lambda, interval.end)?,
        None => term_counts(headlines, tickers, &vocab, interval)?,
    };
    Ok(LexicalScorer::new(
        &counts,
        vocab.len(),
        settings.risk_keywords.as_ref(),
    ))
}

struct Prepared<'a> {
    spec: &'a PortfolioSpec,
    panel: ReturnsPanel,
    headlines: Vec<HeadlineRecord>,
}

fn prepare<'a>(portfolios: &'a [PortfolioSpec], sources: &DataSources) -> Result<Vec<Prepared<'a>>> {
    if portfolios.is_empty() {
        return Err(Error::InvalidArgument("no portfolios configured".into()));
    }
    portfolios
        .iter()
        .map(|spec| {
            let panel = sources.panel.select_assets(&spec.tickers)?;
            let headlines = sources
                .headlines
                .iter()
                .filter(|h| spec.tickers.contains(&h.asset_id))
                .cloned()
                .collect();
            Ok(Prepared { spec, panel, headlines })
        })
        .collect()
}

const DRAW_STREAM: u64 = 1 << 56;
const TARGET_STREAM: u64 = 2 << 56;

fn draws_for(
    settings: &ExperimentSettings,
    n_assets: usize,
    portfolio: usize,
    window: Option<usize>,
) -> Result<Vec<Weights>> {
    let params = DirichletParams::symmetric(n_assets, settings.dirichlet_alpha)?;
    let window_part = match (settings.redraw_per_window, window) {
        (true, Some(w)) => (w as u64 + 1) << 20,
        _ => 0,
    };
    let mut rng = task_rng(settings.seed, DRAW_STREAM | (portfolio as u64) << 32 | window_part);
    Ok((0..settings.n_weights).map(|_| params.sample(&mut rng)).collect())
}

fn metadata(kind: ExperimentKind, plan: &WindowPlan, windows: usize, portfolios: usize, seed: u64) -> ReportMetadata {
    ReportMetadata {
        kind,
        seed,
        span_start: plan.span_start,
        span_end: plan.span_end,
        windows,
        portfolios,
    }
}

pub const RELATIONSHIP_STATISTICS: [&str; 5] = ["pearson", "ols_beta0", "ols_beta1", "ols_p_value", "ols_r_squared"];

/// Equal-weight LR, metric values and mean conditioning level for one window.
struct EqualWeightPoint {
    lr: f64,
    metrics: [Result<f64>; 3],
    conditioning: Option<f64>,
}

pub fn run_relationship_experiment(
    portfolios: &[PortfolioSpec],
    sources: &DataSources,
    plan: &WindowPlan,
    settings: &ExperimentSettings,
) -> Result<ExperimentReport> {
    let windows = generate_windows(plan)?;
    let prepared = prepare(portfolios, sources)?;
    let tasks: Vec<(usize, &Window)> = (0..prepared.len())
        .flat_map(|p| windows.iter().map(move |w| (p, w)))
        .collect();

    let results: Vec<(usize, Vec<ReportRow>, Option<EqualWeightPoint>)> = tasks
        .par_iter()
        .map(|&(p, window)| {
            let prep = &prepared[p];
            let mut sink = RowSink::new(&prep.spec.name, Some(window));
            let interval = window.full();
            let ctx = match WindowContext::build(&prep.panel, &prep.headlines, &prep.spec.tickers, &interval, settings)
            {
                Ok(ctx) => ctx,
                Err(e) => {
                    for kind in MetricKind::TRADITIONAL {
                        sink.fail(kind.as_str(), &["pearson", "ols"], &e);
                    }
                    return (p, sink.rows, None);
                }
            };
            let draws = match draws_for(settings, prep.spec.tickers.len(), p, Some(window.index)) {
                Ok(d) => d,
                Err(e) => {
                    for kind in MetricKind::TRADITIONAL {
                        sink.fail(kind.as_str(), &["pearson", "ols"], &e);
                    }
                    return (p, sink.rows, None);
                }
            };
            let lr = ctx.metric_series(MetricKind::Lr, &draws);
            for kind in MetricKind::TRADITIONAL {
                let paired = lr
                    .as_ref()
                    .map_err(clone_err)
                    .and_then(|lr| ctx.metric_series(kind, &draws).map(|m| (lr, m)));
                match paired {
                    Ok((lr, m)) => {
                        sink.push(kind.as_str(), "pearson", pearson(lr, &m));
                        match ols_lr_regression(lr, &m) {
                            Ok(fit) => {
                                sink.push(kind.as_str(), "ols_beta0", Ok(fit.beta0));
                                sink.push(kind.as_str(), "ols_beta1", Ok(fit.beta1));
                                sink.push(kind.as_str(), "ols_p_value", Ok(fit.p_value_beta1));
                                sink.push(kind.as_str(), "ols_r_squared", Ok(fit.r_squared));
                            }
                            Err(e) => sink.fail(kind.as_str(), &["ols"], &e),
                        }
                    }
                    Err(e) => sink.fail(kind.as_str(), &["pearson", "ols"], &e),
                }
            }

            let eq = Weights::equal(prep.spec.tickers.len());
            let point = ctx.scorer.score(eq.as_slice()).ok().map(|lr| EqualWeightPoint {
                lr,
                metrics: MetricKind::TRADITIONAL.map(|k| ctx.metric(k, eq.as_slice(), None)),
                conditioning: ctx.panel.conditioning().map(|c| c.iter().sum::<f64>() / c.len() as f64),
            });
            (p, sink.rows, point)
        })
        .collect();

    let mut rows = Vec::new();
    let mut points: Vec<Vec<EqualWeightPoint>> = prepared.iter().map(|_| Vec::new()).collect();
    for (p, r, point) in results {
        rows.extend(r);
        if let Some(point) = point {
            points[p].push(point);
        }
    }

    for (p, prep) in prepared.iter().enumerate() {
        let mut sink = RowSink::new(&prep.spec.name, None);
        for (k, kind) in MetricKind::TRADITIONAL.iter().enumerate() {
            let mut z = Vec::new();
            let mut y = Vec::new();
            let mut x = Vec::new();
            for pt in &points[p] {
                if let (Ok(m), Some(c)) = (&pt.metrics[k], pt.conditioning) {
                    z.push(pt.lr);
                    y.push(*m);
                    x.push(c);
                }
            }
            let tn = if sources.panel.conditioning().is_none() {
                Err(Error::InsufficientData("no conditioning series loaded".into()))
            } else {
                let sample = match settings.tn_rank {
                    TnRank::Metric => DependenceSample::new(z, y, x),
                    TnRank::Lr => DependenceSample::new(y, z, x),
                };
                sample.and_then(|s| conditional_dependence_tn(&s))
            };
            match tn {
                Ok(t) => {
                    sink.push(kind.as_str(), "tn", Ok(t.value));
                    sink.push(kind.as_str(), "tn_raw", Ok(t.raw));
                }
                Err(e) => sink.fail(kind.as_str(), &["tn"], &e),
            }
        }
        rows.extend(sink.rows);
    }

    let meta = metadata(
        ExperimentKind::Relationship,
        plan,
        windows.len(),
        prepared.len(),
        settings.seed,
    );
    Ok(ExperimentReport::new(meta, rows, Vec::new()))
}

/// Mean over draws of the coefficient of variation across windows.
///
/// `per_window[w][d]` is the metric of draw `d` in window `w`. Draws whose
/// CV is undefined are skipped.
pub fn mean_cv(per_window: &[Vec<f64>]) -> Result<f64> {
    if per_window.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "CV across windows needs 2 windows, got {}",
            per_window.len()
        )));
    }
    let n_draws = per_window[0].len();
    if per_window.iter().any(|w| w.len() != n_draws) {
        return Err(Error::DimensionMismatch("windows hold different draw counts".into()));
    }
    let cvs: Vec<f64> = (0..n_draws)
        .filter_map(|d| {
            let series: Vec<f64> = per_window.iter().map(|w| w[d]).collect();
            coefficient_of_variation(&series).ok()
        })
        .collect();
    if cvs.is_empty() {
        return Err(Error::ZeroMean);
    }
    Ok(cvs.iter().sum::<f64>() / cvs.len() as f64)
}

pub fn run_robustness_experiment(
    portfolios: &[PortfolioSpec],
    sources: &DataSources,
    plan: &WindowPlan,
    settings: &ExperimentSettings,
) -> Result<ExperimentReport> {
    let windows = generate_windows(plan)?;
    let prepared = prepare(portfolios, sources)?;
    let tasks: Vec<(usize, &Window)> = (0..prepared.len())
        .flat_map(|p| windows.iter().map(move |w| (p, w)))
        .collect();
    let per_portfolio_draws = prepared
        .iter()
        .enumerate()
        .map(|(p, prep)| draws_for(settings, prep.spec.tickers.len(), p, None))
        .collect::<Result<Vec<_>>>()?;

    type Cell = Result<Vec<f64>>;
    let results: Vec<(usize, Vec<ReportRow>, [Cell; 4])> = tasks
        .par_iter()
        .map(|&(p, window)| {
            let prep = &prepared[p];
            let mut sink = RowSink::new(&prep.spec.name, Some(window));
            let draws = if settings.redraw_per_window {
                draws_for(settings, prep.spec.tickers.len(), p, Some(window.index))
            } else {
                Ok(per_portfolio_draws[p].clone())
            };
            let interval = window.full();
            let ctx = draws.and_then(|d| {
                WindowContext::build(&prep.panel, &prep.headlines, &prep.spec.tickers, &interval, settings)
                    .map(|c| (c, d))
            });
            let cells = MetricKind::ALL.map(|kind| {
                let values = ctx
                    .as_ref()
                    .map_err(clone_err)
                    .and_then(|(c, d)| c.metric_series(kind, d));
                sink.push(
                    kind.as_str(),
                    "mean_value",
                    values
                        .as_ref()
                        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
                        .map_err(clone_err),
                );
                values
            });
            (p, sink.rows, cells)
        })
        .collect();

    let mut rows = Vec::new();
    let mut per_metric: Vec<[Vec<Vec<f64>>; 4]> = prepared.iter().map(|_| Default::default()).collect();
    for (p, r, cells) in results {
        rows.extend(r);
        for (k, cell) in cells.into_iter().enumerate() {
            if let Ok(values) = cell {
                per_metric[p][k].push(values);
            }
        }
    }
    for (p, prep) in prepared.iter().enumerate() {
        let mut sink = RowSink::new(&prep.spec.name, None);
        for (k, kind) in MetricKind::ALL.iter().enumerate() {
            sink.push(kind.as_str(), "mean_cv", mean_cv(&per_metric[p][k]));
        }
        rows.extend(sink.rows);
    }

    let meta = metadata(
        ExperimentKind::Robustness,
        plan,
        windows.len(),
        prepared.len(),
        settings.seed,
    );
    Ok(ExperimentReport::new(meta, rows, Vec::new()))
}

/// Statistics emitted per optimisation cell, in addition to the performance summary.
pub const OPTIMIZATION_EXTRAS: [&str; 3] = ["train_lr", "feasible_targets", "converged_targets"];

struct OptimizationCell {
    summary: PerformanceSummary,
    train_lr: f64,
    feasible: usize,
    converged: usize,
    weights: Vec<(f64, Vec<f64>)>,
}

fn optimize_cell(
    ctx: &WindowContext,
    test: &ReturnsPanel,
    kind: MetricKind,
    settings: &ExperimentSettings,
    stream_base: u64,
) -> Result<OptimizationCell> {
    let ppy = settings.performance.periods_per_year as f64;
    let mu = ctx.panel.annualized_means(ppy);
    let evaluator;
    let objective = match kind {
        MetricKind::Lr => Objective::NegLexicalRatio(&ctx.scorer),
        MetricKind::Volatility => Objective::Volatility(&ctx.cov),
        MetricKind::DrSd => Objective::DrSd {
            cov: &ctx.cov,
            maximize: settings.maximize_dr_sd,
        },
        MetricKind::DrVar => {
            evaluator = DrVarEvaluator::new(&ctx.panel, settings.var_alpha)?;
            Objective::DrVar(&evaluator)
        }
    };
    let params = DirichletParams::symmetric(mu.len(), settings.dirichlet_alpha)?;
    let outcomes = optimize_all_targets(
        objective,
        &mu,
        &settings.return_targets,
        &params,
        settings.seed,
        stream_base,
    )?;

    let mut summaries = Vec::new();
    let mut lrs = Vec::new();
    let mut weights = Vec::new();
    let mut converged = 0;
    for (target, outcome) in outcomes.iter().filter_map(|o| match o {
        crate::allocation::TargetOutcome::Solved { target, outcome } => Some((*target, outcome)),
        _ => None,
    }) {
        let w = outcome.weights.as_slice();
        summaries.push(performance_summary(&test.portfolio_returns(w)?, &settings.performance)?);
        lrs.push(ctx.scorer.score(w)?);
        weights.push((target, w.to_vec()));
        converged += usize::from(outcome.converged);
    }
    Ok(OptimizationCell {
        summary: PerformanceSummary::mean(&summaries).ok_or(Error::AllInfeasible)?,
        train_lr: lrs.iter().sum::<f64>() / lrs.len() as f64,
        feasible: summaries.len(),
        converged,
        weights,
    })
}

pub fn run_optimization_experiment(
    portfolios: &[PortfolioSpec],
    sources: &DataSources,
    plan: &WindowPlan,
    settings: &ExperimentSettings,
) -> Result<ExperimentReport> {
    if plan.test_len_days.is_none() {
        return Err(Error::InvalidArgument(
            "optimisation needs a plan with a test period".into(),
        ));
    }
    if settings.return_targets.is_empty() {
        return Err(Error::InvalidArgument("no return targets".into()));
    }
    let windows = generate_windows(plan)?;
    let prepared = prepare(portfolios, sources)?;
    let tasks: Vec<(usize, &Window, usize)> = (0..prepared.len())
        .flat_map(|p| windows.iter().flat_map(move |w| (0..4).map(move |o| (p, w, o))))
        .collect();

    type CellResult = (usize, usize, usize, Result<OptimizationCell>);
    let results: Vec<CellResult> = tasks
        .par_iter()
        .map(|&(p, window, o)| {
            let prep = &prepared[p];
            let kind = MetricKind::ALL[o];
            let test_interval = window.test.expect("plan has a test period");
            let stream = TARGET_STREAM | (p as u64) << 32 | (window.index as u64) << 12 | (o as u64) << 6;
            let cell = WindowContext::build(
                &prep.panel,
                &prep.headlines,
                &prep.spec.tickers,
                &window.train,
                settings,
            )
            .and_then(|ctx| {
                let test = slice(&prep.panel, &test_interval)?;
                optimize_cell(&ctx, &test, kind, settings, stream)
            });
            (p, window.index, o, cell)
        })
        .collect();

    let mut rows = Vec::new();
    let mut weights = Vec::new();
    let mut per_cell: Vec<[Vec<[f64; 6]>; 4]> = prepared.iter().map(|_| Default::default()).collect();
    for (p, w, o, cell) in results {
        let prep = &prepared[p];
        let kind = MetricKind::ALL[o].as_str();
        let mut sink = RowSink::new(&prep.spec.name, Some(&windows[w]));
        match cell {
            Ok(cell) => {
                for (name, v) in PerformanceSummary::STATISTICS.iter().zip(cell.summary.values()) {
                    sink.push(kind, name, Ok(v));
                }
                sink.push(kind, "train_lr", Ok(cell.train_lr));
                sink.push(kind, "feasible_targets", Ok(cell.feasible as f64));
                sink.push(kind, "converged_targets", Ok(cell.converged as f64));
                let v = cell.summary.values();
                per_cell[p][o].push([v[0], v[1], v[2], v[3], v[4], cell.train_lr]);
                for (target, ws) in cell.weights {
                    for (ticker, weight) in prep.spec.tickers.iter().zip(ws) {
                        weights.push(WeightRecord {
                            portfolio: prep.spec.name.clone(),
                            window: w,
                            objective: kind.to_string(),
                            target,
                            ticker: ticker.clone(),
                            weight,
                        });
                    }
                }
            }
            Err(e) => sink.fail(kind, &["performance"], &e),
        }
        rows.extend(sink.rows);
    }

    for (p, prep) in prepared.iter().enumerate() {
        let mut sink = RowSink::new(&prep.spec.name, None);
        for (o, kind) in MetricKind::ALL.iter().enumerate() {
            let cells = &per_cell[p][o];
            let names = PerformanceSummary::STATISTICS.iter().copied().chain(["train_lr"]);
            for (s, name) in names.enumerate() {
                let value = if cells.is_empty() {
                    Err(Error::InsufficientData("no window produced a solution".into()))
                } else {
                    Ok(cells.iter().map(|c| c[s]).sum::<f64>() / cells.len() as f64)
                };
                sink.push(kind.as_str(), name, value);
            }
        }
        rows.extend(sink.rows);
    }

    let meta = metadata(
        ExperimentKind::Optimize,
        plan,
        windows.len(),
        prepared.len(),
        settings.seed,
    );
    Ok(ExperimentReport::new(meta, rows, weights))
}
