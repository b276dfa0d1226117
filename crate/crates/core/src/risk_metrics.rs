//! Return-based diversification and performance metrics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{historical_var, CovarianceMatrix, ReturnsPanel};

pub const DEFAULT_VAR_ALPHA: f64 = 0.05;
pub const DEFAULT_PERIODS_PER_YEAR: u32 = 252;
pub const DEFAULT_RISK_FREE: f64 = 0.024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "LR")]
    Lr,
    #[serde(rename = "VOLATILITY")]
    Volatility,
    #[serde(rename = "DR_SD")]
    DrSd,
    #[serde(rename = "DR_VAR")]
    DrVar,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Lr,
        MetricKind::Volatility,
        MetricKind::DrSd,
        MetricKind::DrVar,
    ];
    pub const TRADITIONAL: [MetricKind; 3] = [MetricKind::Volatility, MetricKind::DrSd, MetricKind::DrVar];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Lr => "LR",
            MetricKind::Volatility => "VOLATILITY",
            MetricKind::DrSd => "DR_SD",
            MetricKind::DrVar => "DR_VAR",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric {s:?}")))
    }
}

fn check_dims(w: &[f64], n: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::DimensionMismatch(format!("{} weights for {n} assets", w.len())));
    }
    Ok(())
}

/// `sqrt(wᵀ Σ w)`; tiny negative quadratic forms from rounding clamp to zero.
pub fn portfolio_volatility(w: &[f64], cov: &CovarianceMatrix) -> Result<f64> {
    check_dims(w, cov.dim())?;
    let q = cov.quadratic_form(w);
    if q < -1e-12 {
        return Err(Error::InvalidArgument(format!("negative portfolio variance {q}")));
    }
    Ok(q.max(0.0).sqrt())
}

/// Weighted average asset volatility over portfolio volatility.
pub fn dr_sd(w: &[f64], cov: &CovarianceMatrix) -> Result<f64> {
    check_dims(w, cov.dim())?;
    let vols = cov.values().diagonal();
    let weighted: f64 = w.iter().zip(vols.iter()).map(|(wi, v)| wi * v.max(0.0).sqrt()).sum();
    let vol = portfolio_volatility(w, cov)?;
    if vol <= 0.0 {
        return Err(Error::ZeroVolatility("DR_SD denominator"));
    }
    Ok(weighted / vol)
}

/// Portfolio VaR over the weighted sum of stand-alone VaRs.
pub fn dr_var(w: &[f64], panel: &ReturnsPanel, alpha: f64) -> Result<f64> {
    check_dims(w, panel.n_assets())?;
    let mut denom = 0.0;
    for (i, wi) in w.iter().enumerate() {
        if *wi != 0.0 {
            denom += wi * historical_var(&panel.column(i), alpha)?;
        }
    }
    let port = historical_var(&panel.portfolio_returns(w)?, alpha)?;
    if denom == 0.0 {
        return Err(Error::ZeroDenominator("DR_VaR"));
    }
    Ok(port / denom)
}

/// Precomputed stand-alone VaRs so repeated DR_VaR evaluations on one panel
/// only pay for the portfolio quantile.
#[derive(Debug, Clone)]
pub struct DrVarEvaluator<'a> {
    panel: &'a ReturnsPanel,
    asset_var: Vec<f64>,
    alpha: f64,
}

impl<'a> DrVarEvaluator<'a> {
    pub fn new(panel: &'a ReturnsPanel, alpha: f64) -> Result<Self> {
        let asset_var = (0..panel.n_assets())
            .map(|i| historical_var(&panel.column(i), alpha))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            panel,
            asset_var,
            alpha,
        })
    }

    pub fn eval(&self, w: &[f64]) -> Result<f64> {
        check_dims(w, self.panel.n_assets())?;
        let denom: f64 = w.iter().zip(&self.asset_var).map(|(a, b)| a * b).sum();
        let port = historical_var(&self.panel.portfolio_returns(w)?, self.alpha)?;
        if denom == 0.0 {
            return Err(Error::ZeroDenominator("DR_VaR"));
        }
        Ok(port / denom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceSummary {
    pub sharpe: f64,
    pub sortino: f64,
    pub annualized_return: f64,
    pub annualized_volatility: f64,
    pub downside_volatility: f64,
}

impl PerformanceSummary {
    pub const STATISTICS: [&'static str; 5] = [
        "sharpe",
        "sortino",
        "annualized_return",
        "annualized_volatility",
        "downside_volatility",
    ];

    pub fn values(&self) -> [f64; 5] {
        [
            self.sharpe,
            self.sortino,
            self.annualized_return,
            self.annualized_volatility,
            self.downside_volatility,
        ]
    }

    /// Component-wise mean.
    pub fn mean(items: &[PerformanceSummary]) -> Option<PerformanceSummary> {
        if items.is_empty() {
            return None;
        }
        let n = items.len() as f64;
        let avg = |f: fn(&PerformanceSummary) -> f64| items.iter().map(f).sum::<f64>() / n;
        Some(PerformanceSummary {
            sharpe: avg(|s| s.sharpe),
            sortino: avg(|s| s.sortino),
            annualized_return: avg(|s| s.annualized_return),
            annualized_volatility: avg(|s| s.annualized_volatility),
            downside_volatility: avg(|s| s.downside_volatility),
        })
    }
}

/// Annualisation and reference-rate settings for [`performance_summary`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerformanceConfig {
    pub risk_free: f64,
    pub periods_per_year: u32,
    /// Threshold below which returns count as downside (per period).
    pub downside_target: f64,
}

impl Default for PerformanceConfig {
    fn default() -> Self {
        Self {
            risk_free: DEFAULT_RISK_FREE,
            periods_per_year: DEFAULT_PERIODS_PER_YEAR,
            downside_target: 0.0,
        }
    }
}

pub fn performance_summary(returns: &[f64], cfg: &PerformanceConfig) -> Result<PerformanceSummary> {
    let n = returns.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "performance summary needs 2 returns, got {n}"
        )));
    }
    let p = cfg.periods_per_year as f64;
    let mean = returns.iter().sum::<f64>() / n as f64;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let downside_sq = returns
        .iter()
        .map(|r| (r - cfg.downside_target).min(0.0).powi(2))
        .sum::<f64>()
        / n as f64;

    let annualized_return = mean * p;
    let annualized_volatility = var.sqrt() * p.sqrt();
    let downside_volatility = downside_sq.sqrt() * p.sqrt();
    if annualized_volatility <= 0.0 {
        return Err(Error::ZeroVolatility("Sharpe ratio"));
    }
    if downside_volatility <= 0.0 {
        return Err(Error::ZeroVolatility("Sortino ratio"));
    }
    let excess = annualized_return - cfg.risk_free;
    Ok(PerformanceSummary {
        sharpe: excess / annualized_volatility,
        sortino: excess / downside_volatility,
        annualized_return,
        annualized_volatility,
        downside_volatility,
    })
}

/// Sample standard deviation (`N - 1`) over the sample mean.
pub fn coefficient_of_variation(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("CV needs 2 values, got {n}")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    if mean == 0.0 {
        return Err(Error::ZeroMean);
    }
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(var.sqrt() / mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use nalgebra::{dmatrix, DMatrix};

    fn cov(m: DMatrix<f64>) -> CovarianceMatrix {
        CovarianceMatrix::from_matrix(m).unwrap()
    }

    fn panel(cols: &[Vec<f64>]) -> ReturnsPanel {
        let t = cols[0].len();
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let dates = (0..t).map(|i| start + chrono::Days::new(i as u64)).collect();
        let m = DMatrix::from_fn(t, cols.len(), |r, c| cols[c][r]);
        ReturnsPanel::new(dates, (0..cols.len()).map(|i| format!("A{i}")).collect(), m, None).unwrap()
    }

    fn wiggle(t: usize, seed: f64) -> Vec<f64> {
        (0..t).map(|i| (i as f64 * 1.7 + seed).sin() * 0.02).collect()
    }

    #[test]
    fn volatility_examples() {
        assert!((portfolio_volatility(&[1.0], &cov(dmatrix![0.04])).unwrap() - 0.2).abs() < 1e-15);
        let s2 = 0.09;
        let c = cov(dmatrix![s2, 0.0; 0.0, s2]);
        let v = portfolio_volatility(&[0.5, 0.5], &c).unwrap();
        assert!((v - s2.sqrt() / 2f64.sqrt()).abs() < 1e-15);
        let c = cov(dmatrix![0.04, 0.01; 0.01, 0.09]);
        assert!((portfolio_volatility(&[1.0, 0.0], &c).unwrap() - 0.2).abs() < 1e-15);
        assert!(matches!(
            portfolio_volatility(&[1.0], &c),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn null_space_gives_zero_volatility() {
        let c = cov(dmatrix![1.0, 1.0; 1.0, 1.0]);
        assert_eq!(portfolio_volatility(&[0.5, -0.5], &c).unwrap(), 0.0);
        assert!(portfolio_volatility(&[0.5, 0.5], &c).unwrap() > 0.0);
    }

    #[test]
    fn dr_sd_examples() {
        assert_eq!(dr_sd(&[1.0], &cov(dmatrix![0.04])).unwrap(), 1.0);
        let c = cov(dmatrix![0.04, 0.0; 0.0, 0.04]);
        assert!((dr_sd(&[0.5, 0.5], &c).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        let c = cov(dmatrix![0.04, 0.04; 0.04, 0.04]);
        assert!((dr_sd(&[0.3, 0.7], &c).unwrap() - 1.0).abs() < 1e-10);
        let z = cov(dmatrix![0.0, 0.0; 0.0, 0.0]);
        assert!(matches!(dr_sd(&[0.5, 0.5], &z), Err(Error::ZeroVolatility(_))));
    }

    #[test]
    fn dr_var_examples() {
        let a = wiggle(60, 0.3);
        assert!((dr_var(&[1.0], &panel(std::slice::from_ref(&a)), 0.05).unwrap() - 1.0).abs() < 1e-15);
        let p = panel(&[a.clone(), a.clone()]);
        assert!((dr_var(&[0.3, 0.7], &p, 0.05).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        let hedge = panel(&[a.clone(), neg]);
        assert_eq!(dr_var(&[0.5, 0.5], &hedge, 0.05).unwrap(), 0.0);

        let mixed = panel(&[a, wiggle(60, 2.1)]);
        let direct = dr_var(&[0.4, 0.6], &mixed, 0.05).unwrap();
        let cached = DrVarEvaluator::new(&mixed, 0.05).unwrap().eval(&[0.4, 0.6]).unwrap();
        assert!((direct - cached).abs() < 1e-15);
    }

    fn alternating(mean: f64, sd: f64, n: usize) -> Vec<f64> {
        let a = sd * (((n - 1) as f64) / n as f64).sqrt();
        (0..n).map(|i| if i % 2 == 0 { mean + a } else { mean - a }).collect()
    }

    #[test]
    fn sharpe_by_construction() {
        let r = alternating(0.1 / 252.0, 0.2 / 252f64.sqrt(), 504);
        let s = performance_summary(&r, &PerformanceConfig::default()).unwrap();
        assert!((s.annualized_return - 0.1).abs() < 1e-12);
        assert!((s.annualized_volatility - 0.2).abs() < 1e-12);
        assert!((s.sharpe - 0.38).abs() < 1e-10);
    }

    #[test]
    fn no_downside_is_an_error() {
        let r = vec![0.01, 0.02, 0.0, 0.03];
        assert!(matches!(
            performance_summary(&r, &PerformanceConfig::default()),
            Err(Error::ZeroVolatility("Sortino ratio"))
        ));
        assert!(matches!(
            performance_summary(&[0.01; 5], &PerformanceConfig::default()),
            Err(Error::ZeroVolatility("Sharpe ratio"))
        ));
    }

    #[test]
    fn alternating_returns_summary() {
        let r: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
        let s = performance_summary(&r, &PerformanceConfig::default()).unwrap();
        // Independent evaluation of each formula on the fixture.
        let sd = (10.0 * 1e-4 / 9.0f64).sqrt();
        let ann_vol = sd * 252f64.sqrt();
        let down = (0.5e-4f64).sqrt() * 252f64.sqrt();
        assert_eq!(s.annualized_return, 0.0);
        assert!((s.annualized_volatility - ann_vol).abs() < 1e-14);
        assert!((s.downside_volatility - down).abs() < 1e-14);
        assert!((s.sharpe - (-0.024 / ann_vol)).abs() < 1e-13);
        assert!((s.sortino - (-0.024 / down)).abs() < 1e-13);
        assert!(s.sharpe < 0.0);
    }

    #[test]
    fn sharpe_zero_when_rf_matches_return() {
        let r = vec![0.01, -0.004, 0.007, -0.002, 0.003];
        let base = performance_summary(&r, &PerformanceConfig::default()).unwrap();
        let cfg = PerformanceConfig {
            risk_free: base.annualized_return,
            ..PerformanceConfig::default()
        };
        assert_eq!(performance_summary(&r, &cfg).unwrap().sharpe, 0.0);
    }

    #[test]
    fn cv_examples() {
        assert_eq!(coefficient_of_variation(&[3.0, 3.0, 3.0]).unwrap(), 0.0);
        assert!((coefficient_of_variation(&[1.0, 2.0, 3.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((coefficient_of_variation(&[2.0, 4.0, 6.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(coefficient_of_variation(&[-1.0, 1.0]), Err(Error::ZeroMean)));
    }

    #[test]
    fn metric_kind_round_trip() {
        for k in MetricKind::ALL {
            assert_eq!(k.as_str().parse::<MetricKind>().unwrap(), k);
        }
    }
}
