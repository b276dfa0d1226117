//! Sequential quadratic programming for smooth objectives under linear
//! constraints.
//!
//! Each iteration builds a quadratic model of the Lagrangian (damped BFGS
//! Hessian approximation) with the constraints linearised, solves it with the
//! active-set QP, and backtracks along the step on an ℓ1 merit function.
//! Gradients are central finite differences; perturbed points are clipped to
//! the non-negative orthant before evaluation.

use nalgebra::{DMatrix, DVector};

use super::qp::{solve_qp, LinearConstraints};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqpOptions {
    pub max_iter: usize,
    pub kkt_tol: f64,
    pub fd_step: f64,
    pub armijo: f64,
    pub min_step: f64,
}

impl Default for SqpOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            kkt_tol: 1e-8,
            fd_step: 1e-6,
            armijo: 1e-4,
            min_step: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqpResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub kkt_residual: f64,
}

fn clip(x: &mut [f64]) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Central differences, falling back to one-sided where one side cannot be
/// evaluated.
pub fn fd_gradient<F>(f: &F, x: &[f64], fx: f64, step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let up = x[i] + step;
        let down = (x[i] - step).max(0.0);
        probe[i] = up;
        let f_up = f(&probe).ok().filter(|v| v.is_finite());
        probe[i] = down;
        let f_down = f(&probe).ok().filter(|v| v.is_finite());
        probe[i] = x[i];
        grad[i] = match (f_up, f_down) {
            (Some(u), Some(d)) if up > down => (u - d) / (up - down),
            (Some(u), _) => (u - fx) / (up - x[i]),
            (None, Some(d)) if x[i] > down => (fx - d) / (x[i] - down),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "objective not differentiable along coordinate {i}"
                )))
            }
        };
    }
    Ok(grad)
}

struct Iterate {
    x: DVector<f64>,
    value: f64,
    grad: DVector<f64>,
}

/// Minimises `f` subject to `cons`, starting from a feasible `x0`.
pub fn minimize<F>(f: F, cons: &LinearConstraints, x0: Vec<f64>, opts: &SqpOptions) -> Result<SqpResult>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let n = x0.len();
    let eval = |x: &DVector<f64>| -> Result<f64> {
        let mut p: Vec<f64> = x.iter().copied().collect();
        clip(&mut p);
        let v = f(&p)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidArgument("objective returned a non-finite value".into()))
        }
    };
    let gradient = |x: &DVector<f64>, fx: f64| -> Result<DVector<f64>> {
        let mut p: Vec<f64> = x.iter().copied().collect();
        clip(&mut p);
        Ok(DVector::from_vec(fd_gradient(&f, &p, fx, opts.fd_step)?))
    };

    let x = DVector::from_vec(x0);
    let value = eval(&x)?;
    let grad = gradient(&x, value)?;
    let mut cur = Iterate { x, value, grad };
    let mut hess = DMatrix::<f64>::identity(n, n);
    let mut scaled = false;
    let mut penalty: f64 = 1.0;
    let mut kkt = f64::INFINITY;

    for iter in 0..opts.max_iter {
        let local = cons.shifted(&cur.x);
        let qp = solve_qp(
            &hess,
            &cur.grad,
            &local,
            DVector::zeros(n),
            50 * (n + cons.inequalities.len() + 1),
        )?;
        let step = qp.x;

        let mut stationarity = cur.grad.clone();
        for (c, l) in cons.equalities.iter().zip(&qp.eq_multipliers) {
            stationarity -= *l * &c.normal;
        }
        let mut complementarity: f64 = 0.0;
        for (c, l) in cons.inequalities.iter().zip(&qp.ineq_multipliers) {
            stationarity -= *l * &c.normal;
            complementarity = complementarity.max((l * c.residual(&cur.x)).abs());
        }
        kkt = stationarity.amax().max(complementarity).max(cons.violation(&cur.x));
        if kkt < opts.kkt_tol || step.amax() == 0.0 {
            return Ok(SqpResult {
                x: cur.x.iter().copied().collect(),
                value: cur.value,
                converged: true,
                iterations: iter,
                kkt_residual: kkt,
            });
        }

        let max_multiplier = qp
            .eq_multipliers
            .iter()
            .chain(&qp.ineq_multipliers)
            .fold(0.0f64, |m, l| m.max(l.abs()));
        penalty = penalty.max(1.1 * max_multiplier);
        let merit = |v: f64, x: &DVector<f64>| v + penalty * cons.violation(x);
        let phi0 = merit(cur.value, &cur.x);
        let slope = cur.grad.dot(&step) - penalty * cons.violation(&cur.x);

        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= opts.min_step {
            let trial = &cur.x + alpha * &step;
            if let Ok(v) = eval(&trial) {
                if merit(v, &trial) <= phi0 + opts.armijo * alpha * slope.min(0.0) {
                    accepted = Some((trial, v));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((x_new, v_new)) = accepted else {
            if hess != DMatrix::identity(n, n) {
                hess = DMatrix::identity(n, n);
                scaled = false;
                continue;
            }
            return Ok(SqpResult {
                x: cur.x.iter().copied().collect(),
                value: cur.value,
                converged: false,
                iterations: iter,
                kkt_residual: kkt,
            });
        };

        let g_new = gradient(&x_new, v_new)?;
        let s = &x_new - &cur.x;
        let y = &g_new - &cur.grad;
        let sy = s.dot(&y);
        if !scaled && sy > 0.0 {
            hess = DMatrix::identity(n, n) * (y.dot(&y) / sy);
            scaled = true;
        }
        damped_bfgs(&mut hess, &s, &y);
        cur = Iterate {
            x: x_new,
            value: v_new,
            grad: g_new,
        };
    }
    Ok(SqpResult {
        x: cur.x.iter().copied().collect(),
        value: cur.value,
        converged: false,
        iterations: opts.max_iter,
        kkt_residual: kkt,
    })
}

/// Powell-damped BFGS update; keeps `hess` positive definite.
fn damped_bfgs(hess: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let bs = &*hess * s;
    let sbs = s.dot(&bs);
    if !(sbs > 1e-300) {
        return;
    }
    let sy = s.dot(y);
    let theta = if sy >= 0.2 * sbs { 1.0 } else { 0.8 * sbs / (sbs - sy) };
    let r = theta * y + (1.0 - theta) * &bs;
    let sr = s.dot(&r);
    if !(sr > 1e-300) {
        return;
    }
    *hess -= &bs * bs.transpose() / sbs;
    *hess += &r * r.transpose() / sr;
    // Re-symmetrise against rounding drift.
    let sym = (&*hess + hess.transpose()) * 0.5;
    *hess = sym;
}
