//! Conditional dependence coefficient, Pearson correlation and simple OLS.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Paired observations: `y` is ranked, `z` is the candidate explanatory
/// variable and `x` the conditioning variable.
#[derive(Debug, Clone, PartialEq)]
pub struct DependenceSample {
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
}

impl DependenceSample {
    pub fn new(z: Vec<f64>, y: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if z.len() != n || x.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "sample lengths differ: z={}, y={n}, x={}",
                z.len(),
                x.len()
            )));
        }
        if n < 3 {
            return Err(Error::InsufficientData(format!(
                "conditional dependence needs N >= 3, got {n}"
            )));
        }
        if z.iter().chain(&y).chain(&x).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "dependence sample contains non-finite values".into(),
            ));
        }
        Ok(Self { z, y, x })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalDependence {
    /// Value clamped to `[0, 1]` for reporting.
    pub value: f64,
    /// Unclamped statistic.
    pub raw: f64,
}

/// 1-based ranks, ties receiving the average of the positions they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

fn standardize(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd > 0.0 {
        v.iter().map(|x| (x - mean) / sd).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// Index of the nearest other point under `dist`, lowest index on ties.
fn nearest_neighbour(i: usize, n: usize, dist: impl Fn(usize) -> f64) -> usize {
    let mut best = usize::MAX;
    let mut best_d = f64::INFINITY;
    for j in (0..n).filter(|&j| j != i) {
        let d = dist(j);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Rank/nearest-neighbour statistic measuring how much `z` adds to the
/// prediction of `y` beyond `x`:
///
/// `T = Σ (min(R_i, R_M(i)) − min(R_i, R_N(i))) / Σ (R_i − min(R_i, R_N(i)))`
///
/// with `R` the ranks of `y`, `M(i)` the nearest neighbour of `i` in the
/// standardised `(x, z)` plane and `N(i)` the nearest neighbour in `x` alone.
pub fn conditional_dependence_tn(sample: &DependenceSample) -> Result<ConditionalDependence> {
    let n = sample.len();
    let ranks = average_ranks(&sample.y);
    let xs = standardize(&sample.x);
    let zs = standardize(&sample.z);

    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let m = nearest_neighbour(i, n, |j| (xs[j] - xs[i]).powi(2) + (zs[j] - zs[i]).powi(2));
        let nx = nearest_neighbour(i, n, |j| (xs[j] - xs[i]).abs());
        let r = ranks[i];
        num += r.min(ranks[m]) - r.min(ranks[nx]);
        den += r - r.min(ranks[nx]);
    }
    if den == 0.0 {
        return Err(Error::DegenerateDenominator);
    }
    let raw = num / den;
    Ok(ConditionalDependence {
        value: raw.clamp(0.0, 1.0),
        raw,
    })
}

fn check_pair(a: &[f64], b: &[f64], min_len: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "series lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < min_len {
        return Err(Error::InsufficientData(format!(
            "need at least {min_len} observations, got {}",
            a.len()
        )));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b, 2)?;
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ConstantSeries);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionResult {
    pub beta0: f64,
    pub beta1: f64,
    /// Two-sided t-test on the slope with `N - 2` degrees of freedom.
    pub p_value_beta1: f64,
    pub r_squared: f64,
}

impl RegressionResult {
    pub fn significant(&self, level: f64) -> bool {
        self.p_value_beta1 < level
    }
}

/// Least squares fit of `metric = beta0 + beta1 * lr + e`.
pub fn ols_lr_regression(lr: &[f64], metric: &[f64]) -> Result<RegressionResult> {
    check_pair(lr, metric, 3)?;
    let n = lr.len() as f64;
    let (mx, my) = (mean(lr), mean(metric));
    let sxx: f64 = lr.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::ConstantRegressor);
    }
    let sxy: f64 = lr.iter().zip(metric).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = metric.iter().map(|y| (y - my).powi(2)).sum();
    let beta1 = sxy / sxx;
    let beta0 = my - beta1 * mx;
    let sse: f64 = lr
        .iter()
        .zip(metric)
        .map(|(x, y)| (y - beta0 - beta1 * x).powi(2))
        .sum::<f64>();

    // Residual noise relative to the metric's own scale.
    let exact = sse <= 1e-24 * syy.max(f64::MIN_POSITIVE);
    let (p_value_beta1, r_squared) = if syy == 0.0 {
        (1.0, 0.0)
    } else if exact {
        (0.0, 1.0)
    } else {
        let df = n - 2.0;
        let se = (sse / df / sxx).sqrt();
        let t = beta1 / se;
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
        (p, (1.0 - sse / syy).clamp(0.0, 1.0))
    };
    Ok(RegressionResult {
        beta0,
        beta1,
        p_value_beta1,
        r_squared,
    })
}
