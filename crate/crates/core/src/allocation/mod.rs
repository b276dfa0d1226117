//! Portfolio weight generation and constrained optimisation.

mod dirichlet;
pub mod qp;
pub mod sqp;

pub use dirichlet::{sample_dirichlet, task_rng, DirichletParams};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::lexical::{LexicalScorer, Weights};
use crate::market_data::CovarianceMatrix;
use crate::risk_metrics::{dr_sd, portfolio_volatility, DrVarEvaluator, MetricKind};
use qp::{LinearConstraint, LinearConstraints};
use sqp::{minimize, SqpOptions};

pub const DEFAULT_RETURN_TARGETS: [f64; 4] = [0.07, 0.10, 0.13, 0.16];

const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Clone, Copy)]
pub enum Objective<'a> {
    /// Maximise LR by minimising its negative.
    NegLexicalRatio(&'a LexicalScorer),
    Volatility(&'a CovarianceMatrix),
    DrSd {
        cov: &'a CovarianceMatrix,
        maximize: bool,
    },
    DrVar(&'a DrVarEvaluator<'a>),
}

impl Objective<'_> {
    pub fn kind(&self) -> MetricKind {
        match self {
            Objective::NegLexicalRatio(_) => MetricKind::Lr,
            Objective::Volatility(_) => MetricKind::Volatility,
            Objective::DrSd { .. } => MetricKind::DrSd,
            Objective::DrVar(_) => MetricKind::DrVar,
        }
    }

    /// Value as minimised by the solver.
    pub fn eval(&self, w: &[f64]) -> Result<f64> {
        match self {
            Objective::NegLexicalRatio(s) => s.score(w).map(|v| -v),
            Objective::Volatility(cov) => portfolio_volatility(w, cov),
            Objective::DrSd { cov, maximize } => dr_sd(w, cov).map(|v| if *maximize { -v } else { v }),
            Objective::DrVar(e) => e.eval(w),
        }
    }

    fn fd_step(&self) -> f64 {
        match self {
            Objective::DrVar(_) => 1e-4,
            _ => 1e-6,
        }
    }
}

pub struct OptimizationProblem<'a> {
    pub objective: Objective<'a>,
    /// Annualised expected returns.
    pub mean_returns: Vec<f64>,
    pub return_target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationOutcome {
    pub weights: Weights,
    /// Value of the minimised function (negated LR for the LR objective).
    pub objective_value: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn constraints(mu: &[f64], target: f64) -> LinearConstraints {
    let n = mu.len();
    let mut inequalities: Vec<LinearConstraint> = (0..n)
        .map(|i| {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            LinearConstraint::new(e, 0.0)
        })
        .collect();
    inequalities.push(LinearConstraint::new(DVector::from_column_slice(mu), target));
    LinearConstraints {
        equalities: vec![LinearConstraint::new(DVector::from_element(n, 1.0), 1.0)],
        inequalities,
    }
}

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    for v in w.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Moves `w` toward the highest-mean vertex until the return target holds.
fn restore_feasibility(w: Vec<f64>, mu: &[f64], target: f64) -> Vec<f64> {
    let w = normalize(w);
    let ret = dot(&w, mu);
    if ret >= target {
        return w;
    }
    let (k, mu_k) = mu
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    let gap = mu_k - ret;
    let t = if gap > 0.0 {
        ((target - ret) / gap * (1.0 + 1e-9)).min(1.0)
    } else {
        1.0
    };
    let mut out: Vec<f64> = w.iter().map(|v| (1.0 - t) * v).collect();
    out[k] += t;
    out
}

pub fn check_feasible(mu: &[f64], target: f64) -> Result<()> {
    let best = mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if best < target {
        Err(Error::Infeasible { target, best })
    } else {
        Ok(())
    }
}

pub fn optimize(problem: &OptimizationProblem<'_>, initial: &Weights) -> Result<OptimizationOutcome> {
    let n = initial.len();
    if problem.mean_returns.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} mean returns for {} weights",
            problem.mean_returns.len(),
            n
        )));
    }
    if (initial.sum() - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidWeights("initial weights must sum to 1".into()));
    }
    check_feasible(&problem.mean_returns, problem.return_target)?;
    let objective = problem.objective;
    objective.eval(initial.as_slice())?;

    let start = restore_feasibility(
        initial.as_slice().to_vec(),
        &problem.mean_returns,
        problem.return_target,
    );
    let cons = constraints(&problem.mean_returns, problem.return_target);
    let opts = SqpOptions {
        fd_step: objective.fd_step(),
        ..SqpOptions::default()
    };
    let res = minimize(|w| objective.eval(w), &cons, start, &opts)?;
    let weights = Weights::on_simplex(normalize(res.x))?;
    let objective_value = objective.eval(weights.as_slice())?;
    Ok(OptimizationOutcome {
        weights,
        objective_value,
        converged: res.converged,
        iterations: res.iterations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetOutcome {
    Solved { target: f64, outcome: OptimizationOutcome },
    Infeasible { target: f64, best: f64 },
}

impl TargetOutcome {
    pub fn outcome(&self) -> Option<&OptimizationOutcome> {
        match self {
            TargetOutcome::Solved { outcome, .. } => Some(outcome),
            TargetOutcome::Infeasible { .. } => None,
        }
    }
}

/// Solves once per target, each from its own Dirichlet starting point drawn
/// from stream `stream_base + index`.
pub fn optimize_all_targets(
    objective: Objective<'_>,
    mean_returns: &[f64],
    targets: &[f64],
    initial: &DirichletParams,
    seed: u64,
    stream_base: u64,
) -> Result<Vec<TargetOutcome>> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("no return targets".into()));
    }
    let mut out = Vec::with_capacity(targets.len());
    for (i, &target) in targets.iter().enumerate() {
        let mut rng = task_rng(seed, stream_base + i as u64);
        let start = initial.sample(&mut rng);
        let problem = OptimizationProblem {
            objective,
            mean_returns: mean_returns.to_vec(),
            return_target: target,
        };
        match optimize(&problem, &start) {
            Ok(outcome) => out.push(TargetOutcome::Solved { target, outcome }),
            Err(Error::Infeasible { target, best }) => out.push(TargetOutcome::Infeasible { target, best }),
            Err(e) => return Err(e),
        }
    }
    if out.iter().all(|o| o.outcome().is_none()) {
        return Err(Error::AllInfeasible);
    }
    Ok(out)
}
