//! Browser bindings for three interactive views of the lexical ratio:
//! LR of pasted documents under chosen weights, a cloud of random
//! portfolios in (LR, volatility) space, and a two-asset weight sweep.

use chrono::NaiveDate;
use lexfolio::allocation::{task_rng, DirichletParams};
use lexfolio::corpus::{build_vocabulary, term_counts, HeadlineRecord, TermCountMatrix};
use lexfolio::dates::DateInterval;
use lexfolio::lexical::{combined_distribution, lexical_ratio, Weights};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn day() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date")
}

/// One document per asset; each line of a document counts as a headline.
fn count_matrix(docs: &[String]) -> lexfolio::Result<TermCountMatrix> {
    let assets: Vec<String> = (0..docs.len()).map(|i| format!("asset{}", i + 1)).collect();
    let records: Vec<HeadlineRecord> = docs
        .iter()
        .zip(&assets)
        .flat_map(|(doc, asset)| {
            doc.lines()
                .map(move |line| HeadlineRecord::new(asset.clone(), day(), line))
        })
        .collect();
    let range = DateInterval::new(day(), day())?;
    let vocab = build_vocabulary(&records, &range)?;
    term_counts(&records, &assets, &vocab, &range)
}

fn parse_docs(docs_json: &str) -> Result<Vec<String>, JsError> {
    let docs: Vec<String> = serde_json::from_str(docs_json)?;
    if docs.is_empty() {
        return Err(JsError::new("paste at least one document"));
    }
    Ok(docs)
}

fn effective_m(vocab_size: usize, counts: &TermCountMatrix) -> usize {
    if vocab_size == 0 {
        counts.n_terms()
    } else {
        vocab_size
    }
}

#[derive(Serialize)]
struct TermProb<'a> {
    term: &'a str,
    p: f64,
}

#[derive(Serialize)]
struct LrView<'a> {
    lr: f64,
    m: usize,
    terms: Vec<TermProb<'a>>,
}

/// LR and the combined term distribution. `docs_json` is a JSON array of
/// strings; `vocab_size = 0` normalises by the realised vocabulary.
#[wasm_bindgen]
pub fn lexical_view(docs_json: &str, weights: &[f64], vocab_size: usize) -> Result<String, JsError> {
    let docs = parse_docs(docs_json)?;
    if weights.len() != docs.len() {
        return Err(JsError::new("one weight per document is required"));
    }
    let counts = count_matrix(&docs)?;
    let w = Weights::new(weights.to_vec())?;
    let m = effective_m(vocab_size, &counts);
    let lr = lexical_ratio(&counts, &w, m)?;
    let dist = combined_distribution(&counts, &w)?;
    let mut terms: Vec<TermProb> = counts
        .vocabulary()
        .terms()
        .iter()
        .zip(dist.probs())
        .map(|(term, p)| TermProb { term, p: *p })
        .collect();
    terms.sort_by(|a, b| b.p.total_cmp(&a.p).then(a.term.cmp(b.term)));
    Ok(serde_json::to_string(&LrView { lr, m, terms })?)
}

/// `[lr, volatility]` pairs for `n` Dirichlet(1) portfolios, treating the
/// assets as uncorrelated with the given volatilities.
#[wasm_bindgen]
pub fn dirichlet_cloud(docs_json: &str, vols: &[f64], n: usize, seed: u64) -> Result<String, JsError> {
    let docs = parse_docs(docs_json)?;
    if vols.len() != docs.len() || vols.iter().any(|v| v.is_nan() || *v < 0.0) {
        return Err(JsError::new("one non-negative volatility per document is required"));
    }
    let counts = count_matrix(&docs)?;
    let m = counts.n_terms();
    let params = DirichletParams::symmetric(docs.len(), 1.0)?;
    let mut rng = task_rng(seed, 0);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let w = params.sample(&mut rng);
        let Ok(lr) = lexical_ratio(&counts, &w, m) else {
            continue;
        };
        let var: f64 = w.as_slice().iter().zip(vols).map(|(wi, s)| (wi * s).powi(2)).sum();
        points.push([lr, var.sqrt()]);
    }
    Ok(serde_json::to_string(&points)?)
}

/// `[w, lr]` along the segment from all-in on the first document to
/// all-in on the second.
#[wasm_bindgen]
pub fn two_asset_sweep(doc_a: &str, doc_b: &str, steps: usize, vocab_size: usize) -> Result<String, JsError> {
    let counts = count_matrix(&[doc_a.to_string(), doc_b.to_string()])?;
    let m = effective_m(vocab_size, &counts);
    let steps = steps.max(2);
    let mut points = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let w = k as f64 / steps as f64;
        let Ok(weights) = Weights::new(vec![w, 1.0 - w]) else {
            continue;
        };
        if let Ok(lr) = lexical_ratio(&counts, &weights, m) {
            points.push([w, lr]);
        }
    }
    Ok(serde_json::to_string(&points)?)
}
