//! Acceptance suite: one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use lexfolio::allocation::{optimize, Objective, OptimizationProblem};
use lexfolio::backtest::{
    generate_windows, run_relationship_experiment, DataSources, ExperimentSettings, PortfolioSpec, WindowPlan,
};
use lexfolio::corpus::TermCountMatrix;
use lexfolio::dependence::{conditional_dependence_tn, ols_lr_regression, pearson, DependenceSample};
use lexfolio::lexical::{lexical_ratio, shannon_entropy, LexicalScorer, Weights};
use lexfolio::market_data::CovarianceMatrix;
use lexfolio::risk_metrics::{coefficient_of_variation, dr_sd};
use lexfolio::synthetic::{generate, SyntheticConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn counts(rows: &[Vec<f64>]) -> TermCountMatrix {
    TermCountMatrix::from_rows(rows).unwrap()
}

fn weights(v: &[f64]) -> Weights {
    Weights::new(v.to_vec()).unwrap()
}

fn ac1_golden_values() -> Outcome {
    // Columns (t, e, n); assets T, EN, ENN, ENNN.
    let c = counts(&[
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 1.0],
        vec![0.0, 1.0, 2.0],
        vec![0.0, 1.0, 3.0],
    ]);
    let a = lexical_ratio(&c, &weights(&[0.4, 0.3, 0.2, 0.1]), 4).unwrap();
    let b = lexical_ratio(&c, &weights(&[0.0, 0.0, 0.0, 1.0]), 4).unwrap();
    let concentrated = counts(&[vec![3.0, 0.0], vec![5.0, 0.0]]);
    let z = lexical_ratio(&concentrated, &weights(&[0.5, 0.5]), 2).unwrap();
    check(
        (a - 0.743).abs() <= 0.001 && (b - 0.405).abs() <= 0.001 && z == 0.0,
        format!("LR(0.4,0.3,0.2,0.1)={a:.6}, LR(0,0,0,1)={b:.6}, concentrated={z}"),
    )
}

fn random_instance(rng: &mut ChaCha8Rng) -> (TermCountMatrix, Vec<f64>) {
    let n = rng.gen_range(1..=6);
    let k = rng.gen_range(2..=10);
    loop {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..k)
                    .map(|_| {
                        if rng.gen_bool(0.4) {
                            0.0
                        } else {
                            rng.gen_range(0..20) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let c = counts(&rows);
        if lexical_ratio(&c, &Weights::new(w.clone()).unwrap(), k).is_ok() {
            return (c, w);
        }
    }
}

fn ac2_scale_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (c, w) = random_instance(&mut rng);
        let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
        let m = c.n_terms();
        let base = lexical_ratio(&c, &weights(&w), m).unwrap();
        let scaled: Vec<f64> = w.iter().map(|x| x * scale).collect();
        let s = lexical_ratio(&c, &weights(&scaled), m).unwrap();
        worst = worst.max((base - s).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst < 1e-12 && secs < 1.0,
        format!("1000 instances, max |LR(cw)-LR(w)|={worst:.2e}, {secs:.3}s"),
    )
}

fn ac3_entropy_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures = Vec::new();

    // Maximality: a uniform combined distribution gives exactly 1.
    for _ in 0..500 {
        let k = rng.gen_range(2..=12);
        let n = rng.gen_range(1..=5);
        let per_term = rng.gen_range(1..=9) as f64;
        // Every asset mentions every term equally often.
        let c = counts(&vec![vec![per_term; k]; n]);
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let lr = lexical_ratio(&c, &weights(&w), k).unwrap();
        if lr != 1.0 {
            failures.push(format!("uniform LR {lr}"));
            break;
        }
    }
    for _ in 0..500 {
        let (c, w) = random_instance(&mut rng);
        let m = c.n_terms();
        let lr = lexical_ratio(&c, &weights(&w), m).unwrap();
        let probs: Vec<f64> = lexfolio::lexical::combined_distribution(&c, &weights(&w))
            .unwrap()
            .probs()
            .to_vec();
        let uniform = probs.iter().all(|p| (p - 1.0 / m as f64).abs() < 1e-15);
        if !uniform && lr >= 1.0 {
            failures.push(format!("non-uniform LR {lr}"));
            break;
        }
        if lr < 0.0 {
            failures.push(format!("negative LR {lr}"));
            break;
        }
    }

    // Column permutation symmetry.
    for _ in 0..500 {
        let (c, w) = random_instance(&mut rng);
        let m = c.n_terms();
        let mut perm: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let raw = c.counts();
        let rows: Vec<Vec<f64>> = (0..raw.nrows())
            .map(|r| perm.iter().map(|&j| raw[(r, j)]).collect())
            .collect();
        let a = lexical_ratio(&c, &weights(&w), m).unwrap();
        let b = lexical_ratio(&counts(&rows), &weights(&w), m).unwrap();
        if (a - b).abs() > 1e-12 {
            failures.push(format!("permutation changed LR by {:.2e}", (a - b).abs()));
            break;
        }
    }

    // Concavity of unnormalised entropy under mixing.
    for _ in 0..500 {
        let k = rng.gen_range(2..=10);
        let mut draw = || {
            let v: Vec<f64> = (0..k)
                .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen::<f64>() })
                .collect();
            let s: f64 = v.iter().sum();
            if s == 0.0 {
                let mut e = vec![0.0; k];
                e[0] = 1.0;
                e
            } else {
                v.iter().map(|x| x / s).collect()
            }
        };
        let p = draw();
        let q = draw();
        let lambda: f64 = rng.gen();
        let mix: Vec<f64> = p.iter().zip(&q).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        let lhs = shannon_entropy(&mix);
        let rhs = lambda * shannon_entropy(&p) + (1.0 - lambda) * shannon_entropy(&q);
        if lhs < rhs - 1e-12 {
            failures.push(format!("concavity violated: {lhs} < {rhs}"));
            break;
        }
    }

    check(
        failures.is_empty(),
        if failures.is_empty() {
            "maximality, non-negativity, symmetry, concavity: 500 instances each".into()
        } else {
            failures.join("; ")
        },
    )
}

fn ac4_dr_sd() -> Outcome {
    let one = CovarianceMatrix::from_matrix(DMatrix::from_element(1, 1, 0.04)).unwrap();
    let single = dr_sd(&[1.0], &one).unwrap();
    let unc = CovarianceMatrix::from_matrix(DMatrix::from_diagonal(&DVector::from_vec(vec![0.09, 0.09]))).unwrap();
    let two = dr_sd(&[0.5, 0.5], &unc).unwrap();
    let corr = CovarianceMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[0.04, 0.06, 0.06, 0.09])).unwrap();
    let perfect = dr_sd(&[0.3, 0.7], &corr).unwrap();
    check(
        (single - 1.0).abs() < 1e-15 && (two - 2f64.sqrt()).abs() < 1e-12 && (perfect - 1.0).abs() < 1e-10,
        format!("single={single}, uncorrelated pair={two:.15}, perfectly correlated={perfect:.12}"),
    )
}

fn ac5_optimizer_oracles() -> Outcome {
    let start = Instant::now();
    let (s1, s2, s3) = (0.09, 0.04, 0.01);
    let cov = CovarianceMatrix::from_matrix(DMatrix::from_diagonal(&DVector::from_vec(vec![s1, s2, s3]))).unwrap();
    let p = OptimizationProblem {
        objective: Objective::Volatility(&cov),
        mean_returns: vec![0.1, 0.1, 0.1],
        return_target: 0.07,
    };
    let out = optimize(&p, &Weights::on_simplex(vec![0.6, 0.3, 0.1]).unwrap()).unwrap();
    let inv = [1.0 / s1, 1.0 / s2, 1.0 / s3];
    let total: f64 = inv.iter().sum();
    let mv_err = out
        .weights
        .as_slice()
        .iter()
        .zip(inv)
        .map(|(w, i)| (w - i / total).abs())
        .fold(0.0, f64::max);

    // Disjoint vocabularies with unequal spread: asset 1 uses {a:3, b:1},
    // asset 2 uses {c:2}; the optimum is interior but not at 0.5.
    let c = counts(&[vec![3.0, 1.0, 0.0], vec![0.0, 0.0, 2.0]]);
    let scorer = LexicalScorer::new(&c, 3, None);
    let p = OptimizationProblem {
        objective: Objective::NegLexicalRatio(&scorer),
        mean_returns: vec![0.1, 0.1],
        return_target: 0.07,
    };
    let out_lr = optimize(&p, &Weights::on_simplex(vec![0.9, 0.1]).unwrap()).unwrap();
    let (mut best_w, mut best) = (0.0, f64::NEG_INFINITY);
    for i in 0..=10_000 {
        let w = i as f64 / 10_000.0;
        if let Ok(v) = scorer.score(&[w, 1.0 - w]) {
            if v > best {
                best = v;
                best_w = w;
            }
        }
    }
    let lr_err = (out_lr.weights.as_slice()[0] - best_w).abs();
    let secs = start.elapsed().as_secs_f64();
    check(
        mv_err < 1e-4 && lr_err < 1e-3 && secs < 10.0,
        format!(
            "min-variance max |dw|={mv_err:.2e}; LR maximiser w1={:.5} vs grid {best_w:.4} ({secs:.2}s)",
            out_lr.weights.as_slice()[0]
        ),
    )
}

fn ac6_conditional_dependence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut sample = |n: usize| -> Vec<f64> { (0..n).map(|_| normal.sample(&mut rng)).collect() };
    let x = sample(500);
    let z = sample(500);
    let dep = conditional_dependence_tn(&DependenceSample::new(z.clone(), z.clone(), x.clone()).unwrap()).unwrap();
    let y = sample(500);
    let ind = conditional_dependence_tn(&DependenceSample::new(z, y, x).unwrap()).unwrap();

    // Hand enumeration: x=(0,1,1.5), z=(0,10,0), y=(30,10,20).
    // Ranks R=(3,1,2); standardised (x, z) neighbours M=(3,3,2); x-only neighbours N=(2,3,2).
    // numerator   = [min(3,2)-min(3,1)] + [min(1,2)-min(1,2)] + [min(2,1)-min(2,1)] = 1 + 0 + 0 = 1
    // denominator = [3-min(3,1)] + [1-min(1,2)] + [2-min(2,1)] = 2 + 0 + 1 = 3
    let small = DependenceSample::new(vec![0.0, 10.0, 0.0], vec![30.0, 10.0, 20.0], vec![0.0, 1.0, 1.5]).unwrap();
    let hand = conditional_dependence_tn(&small).unwrap();
    check(
        dep.value >= 0.9 && ind.raw.abs() <= 0.15 && (hand.raw - 1.0 / 3.0).abs() < 1e-15,
        format!(
            "y=z: {:.4}; independent: {:.4}; 3-point: {:.6} (expected 1/3)",
            dep.value, ind.raw, hand.raw
        ),
    )
}

fn ac7_window_arithmetic() -> Outcome {
    let d = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap();
    let plan = WindowPlan {
        span_start: d("2018-01-01"),
        span_end: d("2024-06-30"),
        window_len_days: 720,
        step_days: 90,
        test_len_days: Some(180),
    };
    let n_windows = generate_windows(&plan).unwrap().len();

    let cfg = SyntheticConfig::universe(d("2017-12-01"), d("2024-07-15"), 19, 2, 11);
    let market = generate(&cfg).unwrap();
    let sources = DataSources {
        panel: market.panel().unwrap(),
        headlines: market.headlines.clone(),
    };
    let portfolios: Vec<PortfolioSpec> = (0..19)
        .map(|s| PortfolioSpec::new(format!("sector{s:02}"), vec![format!("S{s}A0"), format!("S{s}A1")]).unwrap())
        .collect();
    let composite = WindowPlan {
        window_len_days: 900,
        test_len_days: None,
        ..plan
    };
    let settings = ExperimentSettings {
        n_weights: 30,
        seed: 7,
        ..ExperimentSettings::default()
    };
    let report = run_relationship_experiment(&portfolios, &sources, &composite, &settings).unwrap();
    let regressions: BTreeMap<(String, usize, String), bool> = report
        .rows
        .iter()
        .filter(|r| r.statistic == "ols_beta1" || r.statistic == "ols")
        .map(|r| ((r.portfolio.clone(), r.window.unwrap(), r.metric.clone()), r.is_ok()))
        .collect();
    let ok = regressions.values().filter(|v| **v).count();
    check(
        n_windows == 17 && regressions.len() == 969,
        format!(
            "windows={n_windows}; regression rows={} ({ok} fitted)",
            regressions.len()
        ),
    )
}

fn run_all_experiments(config: &Path, out: &Path, jobs: &str) -> Result<(), String> {
    for kind in ["relationship", "robustness", "optimize"] {
        let status = Command::new(env!("CARGO_BIN_EXE_lexfolio"))
            .args(["experiment", "--kind", kind, "--config"])
            .arg(config)
            .arg("--out")
            .arg(out)
            .args(["--jobs", jobs])
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("{kind}: {}", String::from_utf8_lossy(&status.stderr)));
        }
    }
    Ok(())
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "csv" || e == "svg") {
            out.insert(PathBuf::from(path.file_name().unwrap()), fs::read(&path).unwrap());
        }
    }
    out
}

fn ac8_synthetic_end_to_end() -> Outcome {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synthetic/config.json");
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let start = Instant::now();
    run_all_experiments(&config, &a, "1")?;
    let secs = start.elapsed().as_secs_f64();
    run_all_experiments(&config, &b, "2")?;
    let first = read_dir_bytes(&a);
    let identical = first == read_dir_bytes(&b);

    // Directional check on every training window of portfolios holding the
    // collapsed-news asset.
    let report = fs::read_to_string(a.join("report_optimize.csv")).unwrap();
    let mut train_lr: BTreeMap<(String, String), BTreeMap<String, f64>> = BTreeMap::new();
    for line in report.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[5] == "train_lr" && !f[1].is_empty() && (f[0] == "technology" || f[0] == "mixed") {
            train_lr
                .entry((f[0].to_string(), f[1].to_string()))
                .or_default()
                .insert(f[4].to_string(), f[6].parse().unwrap());
        }
    }
    let cells = train_lr.len();
    let wins = train_lr
        .values()
        .filter(|m| matches!((m.get("LR"), m.get("VOLATILITY")), (Some(l), Some(v)) if l > v))
        .count();
    check(
        secs < 300.0 && identical && cells > 0 && wins == cells,
        format!(
            "3 experiments in {secs:.1}s, {} files byte-identical across runs: {identical}; LR > VOL on {wins}/{cells} training windows",
            first.len()
        ),
    )
}

fn ac9_statistical_plumbing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x: Vec<f64> = (0..200).map(|_| rng.gen_range(0.2..0.9)).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|v| 0.3 - 0.8 * v + 0.05 * rng.gen_range(-1.0..1.0))
        .collect();
    let fit = ols_lr_regression(&x, &y).unwrap();

    // Normal equations (XᵀX) b = Xᵀy solved directly.
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sy: f64 = y.iter().sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    let b = Matrix2::new(n, sx, sx, sxx).lu().solve(&Vector2::new(sy, sxy)).unwrap();
    let ne_err = (fit.beta0 - b[0]).abs().max((fit.beta1 - b[1]).abs());

    let r = pearson(&x, &y).unwrap();
    let sd = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };
    let identity_err = (fit.beta1 - r * sd(&y) / sd(&x)).abs();
    let cv = coefficient_of_variation(&[1.0, 2.0, 3.0]).unwrap();
    check(
        ne_err < 1e-9 && identity_err < 1e-9 && (cv - 0.5).abs() < 1e-15,
        format!("normal equations diff={ne_err:.2e}; beta1 vs r*sy/sx diff={identity_err:.2e}; CV(1,2,3)={cv}"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("AC1", "golden LR values", ac1_golden_values),
        ("AC2", "scale invariance", ac2_scale_invariance),
        ("AC3", "entropy property suite", ac3_entropy_properties),
        ("AC4", "DR_SD analytic checks", ac4_dr_sd),
        ("AC5", "optimizer oracle equivalence", ac5_optimizer_oracles),
        ("AC6", "T_n behavioural bounds", ac6_conditional_dependence),
        ("AC7", "window arithmetic and regression count", ac7_window_arithmetic),
        ("AC8", "synthetic end-to-end run", ac8_synthetic_end_to_end),
        ("AC9", "statistical plumbing", ac9_statistical_plumbing),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("{id} PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
