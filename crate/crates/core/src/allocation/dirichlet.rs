use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::lexical::Weights;

#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams {
    alpha: Vec<f64>,
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidAlpha("need at least one concentration".into()));
        }
        if let Some(bad) = alpha.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidAlpha(format!(
                "concentrations must be positive, got {bad}"
            )));
        }
        Ok(Self { alpha })
    }

    /// Symmetric parameters `(a, a, ..., a)` of dimension `k`.
    pub fn symmetric(k: usize, a: f64) -> Result<Self> {
        Self::new(vec![a; k])
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// One draw from normalised independent `Gamma(alpha_i, 1)` variates.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Weights {
        if self.alpha.len() == 1 {
            return Weights::new(vec![1.0]).expect("unit weight");
        }
        loop {
            let draws: Vec<f64> = self
                .alpha
                .iter()
                .map(|&a| Gamma::new(a, 1.0).expect("validated shape").sample(rng))
                .collect();
            let total: f64 = draws.iter().sum();
            // All-zero draws are possible for tiny shapes; redraw.
            if total > 0.0 && total.is_finite() {
                return Weights::new(draws.into_iter().map(|g| g / total).collect()).expect("simplex point");
            }
        }
    }
}

/// Deterministic single draw for a given seed.
pub fn sample_dirichlet(params: &DirichletParams, seed: u64) -> Weights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    params.sample(&mut rng)
}

/// Independent RNG stream for task `stream` under a root seed.
pub fn task_rng(root_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_lie_on_the_simplex() {
        let p = DirichletParams::symmetric(6, 1.0).unwrap();
        for seed in 0..200 {
            let w = sample_dirichlet(&p, seed);
            assert!(w.as_slice().iter().all(|x| *x >= 0.0));
            assert!((w.sum() - 1.0).abs() < 1e-12);
        }
        let tiny = DirichletParams::symmetric(3, 1e-3).unwrap();
        assert!((sample_dirichlet(&tiny, 5).sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn high_concentration_is_near_uniform() {
        let p = DirichletParams::new(vec![1e6, 1e6]).unwrap();
        let w = sample_dirichlet(&p, 42);
        assert!(w.as_slice().iter().all(|x| (x - 0.5).abs() < 0.01));
    }

    #[test]
    fn one_dimensional_is_unit() {
        let p = DirichletParams::new(vec![2.5]).unwrap();
        assert_eq!(sample_dirichlet(&p, 1).as_slice(), &[1.0]);
    }

    #[test]
    fn invalid_alpha() {
        assert!(matches!(
            DirichletParams::new(vec![1.0, 0.0]),
            Err(Error::InvalidAlpha(_))
        ));
        assert!(DirichletParams::new(vec![]).is_err());
    }

    #[test]
    fn uniform_component_means() {
        let k = 4;
        let p = DirichletParams::symmetric(k, 1.0).unwrap();
        let mut rng = task_rng(9, 0);
        let mut sums = vec![0.0; k];
        let draws = 10_000;
        for _ in 0..draws {
            for (s, w) in sums.iter_mut().zip(p.sample(&mut rng).as_slice()) {
                *s += w;
            }
        }
        for s in sums {
            assert!((s / draws as f64 - 1.0 / k as f64).abs() < 0.02);
        }
    }

    #[test]
    fn seeded_draws_repeat_and_streams_differ() {
        let p = DirichletParams::symmetric(3, 1.0).unwrap();
        assert_eq!(sample_dirichlet(&p, 77), sample_dirichlet(&p, 77));
        let a = p.sample(&mut task_rng(1, 0));
        let b = p.sample(&mut task_rng(1, 1));
        assert_ne!(a, b);
    }
}
