//! The lexical ratio: normalised Shannon entropy of the weighted combination
//! of per-asset term counts.
//!
//! For weights `w` and counts `c[i][k]` the combined term distribution is
//! `p_k = Σ_i w_i c[i][k] / Σ_i Σ_j w_i c[i][j]` and
//! `LR = -(1 / ln m) Σ_k p_k ln p_k`, with `0 ln 0 = 0`. The normaliser `m` is
//! passed explicitly and is not tied to the number of realised terms.
//!
//! Natural logarithms are used throughout; the ratio does not depend on the
//! base. The additivity of entropy over independent documents has no
//! counterpart here because there is no joint-document construct.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::corpus::{decayed_term_counts, HeadlineRecord, TermCountMatrix, Vocabulary};
use crate::dates::DateInterval;
use crate::error::{Error, Result};

/// Non-negative portfolio weights with at least one positive entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("empty weight vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeights("weights must be finite and non-negative".into()));
        }
        if !weights.iter().any(|w| *w > 0.0) {
            return Err(Error::InvalidWeights("at least one weight must be positive".into()));
        }
        Ok(Self(weights))
    }

    /// Like [`Weights::new`] but additionally requires the entries to sum to 1.
    pub fn on_simplex(weights: Vec<f64>) -> Result<Self> {
        let w = Self::new(weights)?;
        let total = w.sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights(format!("weights sum to {total}, expected 1")));
        }
        Ok(w)
    }

    pub fn equal(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n.max(1)])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Weights {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermDistribution {
    probs: Vec<f64>,
    support_size: usize,
}

impl TermDistribution {
    fn from_masses(masses: &[f64]) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroMass);
        }
        let probs: Vec<f64> = masses.iter().map(|m| m / total).collect();
        let support_size = probs.iter().filter(|p| **p > 0.0).count();
        Ok(Self { probs, support_size })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn support_size(&self) -> usize {
        self.support_size
    }

    /// Unnormalised Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        shannon_entropy(&self.probs)
    }
}

/// `-Σ p ln p` over the positive entries of a probability vector.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    let positive = probs.iter().copied().filter(|p| *p > 0.0);
    let Some(first) = positive.clone().next() else {
        return 0.0;
    };
    // Equal masses have entropy ln(support) exactly.
    if positive.clone().all(|p| p == first) {
        return (positive.count() as f64).ln();
    }
    -positive.map(|p| p * p.ln()).sum::<f64>()
}

/// Terms whose influence is boosted by `gamma` in the risk-sensitive ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskKeywordSet {
    keywords: BTreeSet<String>,
    gamma: f64,
}

impl RiskKeywordSet {
    pub fn new<I, S>(keywords: I, gamma: f64) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(Error::InvalidGamma(gamma));
        }
        let keywords = keywords.into_iter().map(|k| k.as_ref().to_lowercase()).collect();
        Ok(Self { keywords, gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn keywords(&self) -> &BTreeSet<String> {
        &self.keywords
    }

    /// Per-column multipliers for `vocab`: gamma on keywords, 1 elsewhere.
    pub fn term_weights(&self, vocab: &Vocabulary) -> Vec<f64> {
        vocab
            .terms()
            .iter()
            .map(|t| if self.keywords.contains(t) { self.gamma } else { 1.0 })
            .collect()
    }
}

fn combined_masses(counts: &DMatrix<f64>, w: &[f64]) -> Result<Vec<f64>> {
    if w.len() != counts.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} assets",
            w.len(),
            counts.nrows()
        )));
    }
    let mut masses = vec![0.0; counts.ncols()];
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        for (k, mass) in masses.iter_mut().enumerate() {
            *mass += wi * counts[(i, k)];
        }
    }
    Ok(masses)
}

fn normalized(entropy: f64, support: usize, m: usize) -> Result<f64> {
    if m < 2 || support > m {
        return Err(Error::DegenerateVocab { m, support });
    }
    Ok((entropy / (m as f64).ln()).clamp(0.0, 1.0))
}

pub fn combined_distribution(counts: &TermCountMatrix, w: &Weights) -> Result<TermDistribution> {
    TermDistribution::from_masses(&combined_masses(counts.counts(), w.as_slice())?)
}

pub fn lexical_ratio(counts: &TermCountMatrix, w: &Weights, vocab_size_m: usize) -> Result<f64> {
    let dist = combined_distribution(counts, w)?;
    normalized(dist.entropy(), dist.support_size(), vocab_size_m)
}

/// Lexical ratio on decay-weighted counts; the normaliser is the vocabulary size.
#[allow(clippy::too_many_arguments)]
pub fn lexical_ratio_decayed(
    records: &[HeadlineRecord],
    assets: &[String],
    vocab: &Vocabulary,
    range: &DateInterval,
    lambda: f64,
    as_of: NaiveDate,
    w: &Weights,
) -> Result<f64> {
    let counts = decayed_term_counts(records, assets, vocab, range, lambda, as_of)?;
    lexical_ratio(&counts, w, vocab.len())
}

pub fn risk_sensitive_lr(
    counts: &TermCountMatrix,
    w: &Weights,
    risk: &RiskKeywordSet,
    vocab_size_m: usize,
) -> Result<f64> {
    let boosts = risk.term_weights(counts.vocabulary());
    let mut masses = combined_masses(counts.counts(), w.as_slice())?;
    for (mass, boost) in masses.iter_mut().zip(&boosts) {
        *mass *= boost;
    }
    let dist = TermDistribution::from_masses(&masses)?;
    normalized(dist.entropy(), dist.support_size(), vocab_size_m)
}

/// Reusable evaluator of the (optionally risk-boosted) lexical ratio for one
/// count matrix, used as an optimisation objective.
#[derive(Debug, Clone)]
pub struct LexicalScorer {
    counts: DMatrix<f64>,
    vocab_size: usize,
    boosts: Option<Vec<f64>>,
}

impl LexicalScorer {
    pub fn new(counts: &TermCountMatrix, vocab_size: usize, risk: Option<&RiskKeywordSet>) -> Self {
        Self {
            counts: counts.counts().clone(),
            vocab_size,
            boosts: risk.map(|r| r.term_weights(counts.vocabulary())),
        }
    }

    pub fn n_assets(&self) -> usize {
        self.counts.nrows()
    }

    /// Scores raw non-negative weights (no simplex requirement).
    pub fn score(&self, w: &[f64]) -> Result<f64> {
        let mut masses = combined_masses(&self.counts, w)?;
        if let Some(boosts) = &self.boosts {
            for (mass, boost) in masses.iter_mut().zip(boosts) {
                *mass *= boost;
            }
        }
        let dist = TermDistribution::from_masses(&masses)?;
        normalized(dist.entropy(), dist.support_size(), self.vocab_size)
    }
}
