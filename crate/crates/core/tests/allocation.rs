use nalgebra::DMatrix;

use lexfolio::allocation::{optimize, Objective, OptimizationProblem};
use lexfolio::lexical::Weights;
use lexfolio::market_data::CovarianceMatrix;

#[test]
fn maximised_dr_sd_matches_minimum_variance_when_vols_are_equal() {
    // Equal variances with unequal correlations.
    let cov = CovarianceMatrix::from_matrix(DMatrix::from_row_slice(
        3,
        3,
        &[0.04, 0.028, 0.008, 0.028, 0.04, 0.012, 0.008, 0.012, 0.04],
    ))
    .unwrap();
    let mu = vec![0.12, 0.10, 0.09];
    let start = Weights::on_simplex(vec![0.5, 0.3, 0.2]).unwrap();
    let solve = |objective| {
        optimize(
            &OptimizationProblem {
                objective,
                mean_returns: mu.clone(),
                return_target: 0.07,
            },
            &start,
        )
        .unwrap()
    };
    let vol = solve(Objective::Volatility(&cov));
    let max_dr = solve(Objective::DrSd {
        cov: &cov,
        maximize: true,
    });
    let min_dr = solve(Objective::DrSd {
        cov: &cov,
        maximize: false,
    });
    let gap = |a: &Weights, b: &Weights| {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    assert!(
        gap(&vol.weights, &max_dr.weights) < 1e-4,
        "{:?} vs {:?}",
        vol.weights,
        max_dr.weights
    );
    assert!(
        gap(&vol.weights, &min_dr.weights) > 0.1,
        "minimising DR_SD should concentrate"
    );
}
