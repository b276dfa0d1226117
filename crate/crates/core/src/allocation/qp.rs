//! Primal active-set solver for small convex quadratic programs
//!
//! ```text
//! minimise   ½ xᵀ H x + cᵀ x
//! subject to a_iᵀ x  = b_i   (equalities)
//!            a_jᵀ x ≥ b_j   (inequalities)
//! ```
//!
//! `H` must be symmetric positive definite and the starting point feasible.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const ACTIVE_TOL: f64 = 1e-12;
const STEP_TOL: f64 = 1e-14;
const MULTIPLIER_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub normal: DVector<f64>,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(normal: DVector<f64>, rhs: f64) -> Self {
        Self { normal, rhs }
    }

    /// `aᵀx - b`; non-negative when an inequality holds.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        self.normal.dot(x) - self.rhs
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearConstraints {
    pub equalities: Vec<LinearConstraint>,
    pub inequalities: Vec<LinearConstraint>,
}

impl LinearConstraints {
    /// ℓ1 constraint violation at `x`.
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        let eq: f64 = self.equalities.iter().map(|c| c.residual(x).abs()).sum();
        let ineq: f64 = self.inequalities.iter().map(|c| (-c.residual(x)).max(0.0)).sum();
        eq + ineq
    }

    /// Same constraints expressed for a step `d` taken from `x`.
    pub fn shifted(&self, x: &DVector<f64>) -> LinearConstraints {
        let shift = |c: &LinearConstraint| LinearConstraint::new(c.normal.clone(), c.rhs - c.normal.dot(x));
        LinearConstraints {
            equalities: self.equalities.iter().map(shift).collect(),
            inequalities: self.inequalities.iter().map(shift).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub eq_multipliers: Vec<f64>,
    /// Zero for inequalities outside the final working set.
    pub ineq_multipliers: Vec<f64>,
    pub iterations: usize,
    pub optimal: bool,
}

fn rank(rows: &[&DVector<f64>], n: usize) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c]);
    let sv = m.singular_values();
    let max = sv.max();
    sv.iter().filter(|s| **s > 1e-10 * max.max(1.0)).count()
}

struct EqpStep {
    step: DVector<f64>,
    /// Multipliers in working-set order (equalities first).
    multipliers: Vec<f64>,
}

fn solve_eqp(h: &DMatrix<f64>, grad: &DVector<f64>, rows: &[&DVector<f64>]) -> Option<EqpStep> {
    let n = h.nrows();
    let k = rows.len();
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(h);
    for (r, a) in rows.iter().enumerate() {
        for c in 0..n {
            kkt[(n + r, c)] = a[c];
            kkt[(c, n + r)] = a[c];
        }
    }
    let mut rhs = DVector::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(&(-grad));
    let sol = kkt.lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(EqpStep {
        step: sol.rows(0, n).into_owned(),
        multipliers: sol.rows(n, k).iter().map(|v| -v).collect(),
    })
}

pub fn solve_qp(
    h: &DMatrix<f64>,
    c: &DVector<f64>,
    cons: &LinearConstraints,
    x0: DVector<f64>,
    max_iter: usize,
) -> Result<QpSolution> {
    let n = h.nrows();
    if !h.is_square() || c.len() != n || x0.len() != n {
        return Err(Error::DimensionMismatch("QP dimensions disagree".into()));
    }
    let n_eq = cons.equalities.len();
    let mut x = x0;

    let mut working: Vec<usize> = Vec::new();
    {
        let mut rows: Vec<&DVector<f64>> = cons.equalities.iter().map(|c| &c.normal).collect();
        let mut current_rank = rank(&rows, n);
        for (j, con) in cons.inequalities.iter().enumerate() {
            if con.residual(&x).abs() <= ACTIVE_TOL {
                rows.push(&con.normal);
                let r = rank(&rows, n);
                if r > current_rank {
                    current_rank = r;
                    working.push(j);
                } else {
                    rows.pop();
                }
            }
        }
    }

    let mut last_multipliers = vec![0.0; n_eq + working.len()];
    for iter in 0..max_iter {
        let rows: Vec<&DVector<f64>> = cons
            .equalities
            .iter()
            .map(|c| &c.normal)
            .chain(working.iter().map(|&j| &cons.inequalities[j].normal))
            .collect();
        let grad = h * &x + c;
        let Some(eqp) = solve_eqp(h, &grad, &rows) else {
            return Err(Error::InvalidArgument("singular QP working-set system".into()));
        };
        last_multipliers = eqp.multipliers.clone();

        if eqp.step.amax() <= STEP_TOL * (1.0 + x.amax()) {
            let most_negative = working
                .iter()
                .enumerate()
                .map(|(pos, &j)| (pos, j, eqp.multipliers[n_eq + pos]))
                .min_by(|a, b| a.2.total_cmp(&b.2));
            match most_negative {
                Some((pos, _, lambda)) if lambda < -MULTIPLIER_TOL => {
                    working.remove(pos);
                    continue;
                }
                _ => {
                    return Ok(finish(x, cons, &working, &last_multipliers, iter + 1, true));
                }
            }
        }

        let mut alpha = 1.0;
        let mut blocking = None;
        for (j, con) in cons.inequalities.iter().enumerate() {
            if working.contains(&j) {
                continue;
            }
            let slope = con.normal.dot(&eqp.step);
            if slope < -1e-15 {
                let ratio = con.residual(&x).max(0.0) / -slope;
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(j);
                }
            }
        }
        x += alpha * &eqp.step;
        if let Some(j) = blocking {
            working.push(j);
        }
    }
    Ok(finish(x, cons, &working, &last_multipliers, max_iter, false))
}

fn finish(
    x: DVector<f64>,
    cons: &LinearConstraints,
    working: &[usize],
    multipliers: &[f64],
    iterations: usize,
    optimal: bool,
) -> QpSolution {
    let n_eq = cons.equalities.len();
    let mut ineq = vec![0.0; cons.inequalities.len()];
    for (pos, &j) in working.iter().enumerate() {
        if let Some(l) = multipliers.get(n_eq + pos) {
            ineq[j] = *l;
        }
    }
    QpSolution {
        x,
        eq_multipliers: multipliers.iter().take(n_eq).copied().collect(),
        ineq_multipliers: ineq,
        iterations,
        optimal,
    }
}
