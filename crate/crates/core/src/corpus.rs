//! Headline ingestion, tokenisation and term-count matrices.
//!
//! Each asset is treated as a document made of all its headlines inside a
//! date range. Counts are stored as `f64` so that decay-weighted counts share
//! the same matrix type.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::Deserialize;

use crate::dates::{parse_day, DateInterval};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HeadlineRecord {
    pub asset_id: String,
    pub published_at: NaiveDate,
    pub text: String,
}

impl HeadlineRecord {
    pub fn new(asset_id: impl Into<String>, published_at: NaiveDate, text: impl Into<String>) -> Self {
        Self {
            asset_id: asset_id.into(),
            published_at,
            text: text.into(),
        }
    }
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|frag| !frag.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary with the given column order.
    pub fn new<I, S>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let terms: Vec<String> = terms.into_iter().map(Into::into).collect();
        if terms.is_empty() {
            return Err(Error::InvalidArgument("vocabulary must hold at least one term".into()));
        }
        let mut index = HashMap::with_capacity(terms.len());
        for (pos, term) in terms.iter().enumerate() {
            if index.insert(term.clone(), pos).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate vocabulary term {term:?}")));
            }
        }
        Ok(Self { terms, index })
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn position(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }
}

/// Per-asset term occurrence counts over a shared vocabulary (`n × m`).
#[derive(Debug, Clone, PartialEq)]
pub struct TermCountMatrix {
    assets: Vec<String>,
    vocabulary: Vocabulary,
    counts: DMatrix<f64>,
}

impl TermCountMatrix {
    pub fn new(assets: Vec<String>, vocabulary: Vocabulary, counts: DMatrix<f64>) -> Result<Self> {
        if counts.nrows() != assets.len() || counts.ncols() != vocabulary.len() {
            return Err(Error::DimensionMismatch(format!(
                "counts are {}x{} but there are {} assets and {} terms",
                counts.nrows(),
                counts.ncols(),
                assets.len(),
                vocabulary.len()
            )));
        }
        if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidArgument(
                "term counts must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            assets,
            vocabulary,
            counts,
        })
    }

    /// Convenience constructor from row vectors; terms are named `t0`, `t1`, ...
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch(
                "rows must be non-empty and equally long".into(),
            ));
        }
        let vocabulary = Vocabulary::new((0..m).map(|k| format!("t{k}")))?;
        let assets = (0..n).map(|i| format!("a{i}")).collect();
        let counts = DMatrix::from_fn(n, m, |i, k| rows[i][k]);
        Self::new(assets, vocabulary, counts)
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn counts(&self) -> &DMatrix<f64> {
        &self.counts
    }

    pub fn n_assets(&self) -> usize {
        self.counts.nrows()
    }

    pub fn n_terms(&self) -> usize {
        self.counts.ncols()
    }
}

/// Sorted set of every token appearing in records published inside `range`.
pub fn build_vocabulary(records: &[HeadlineRecord], range: &DateInterval) -> Result<Vocabulary> {
    let mut seen_record = false;
    let mut terms = BTreeSet::new();
    for record in records.iter().filter(|r| range.contains(r.published_at)) {
        seen_record = true;
        terms.extend(tokenize(&record.text));
    }
    if !seen_record {
        return Err(Error::EmptyCorpus(range.to_string()));
    }
    if terms.is_empty() {
        return Err(Error::EmptyCorpus(format!("{range} (records contain no tokens)")));
    }
    Vocabulary::new(terms)
}

pub fn term_counts(
    records: &[HeadlineRecord],
    assets: &[String],
    vocab: &Vocabulary,
    range: &DateInterval,
) -> Result<TermCountMatrix> {
    accumulate(records, assets, vocab, range, |_| 1.0)
}

/// Term counts where each record contributes `exp(-lambda * age_days)`,
/// with the age measured from `as_of`.
pub fn decayed_term_counts(
    records: &[HeadlineRecord],
    assets: &[String],
    vocab: &Vocabulary,
    range: &DateInterval,
    lambda: f64,
    as_of: NaiveDate,
) -> Result<TermCountMatrix> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidDecay(lambda));
    }
    if as_of < range.end {
        return Err(Error::DecayReference {
            as_of: as_of.to_string(),
            end: range.end.to_string(),
        });
    }
    if lambda == 0.0 {
        return term_counts(records, assets, vocab, range);
    }
    accumulate(records, assets, vocab, range, |record| {
        let age = (as_of - record.published_at).num_days() as f64;
        (-lambda * age).exp()
    })
}

fn accumulate(
    records: &[HeadlineRecord],
    assets: &[String],
    vocab: &Vocabulary,
    range: &DateInterval,
    weight: impl Fn(&HeadlineRecord) -> f64,
) -> Result<TermCountMatrix> {
    if assets.is_empty() {
        return Err(Error::InvalidArgument("asset list is empty".into()));
    }
    let rows: HashMap<&str, usize> = assets.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
    let mut counts = DMatrix::zeros(assets.len(), vocab.len());
    for record in records.iter().filter(|r| range.contains(r.published_at)) {
        let Some(&row) = rows.get(record.asset_id.as_str()) else {
            continue;
        };
        let w = weight(record);
        for token in tokenize(&record.text) {
            if let Some(col) = vocab.position(&token) {
                counts[(row, col)] += w;
            }
        }
    }
    TermCountMatrix::new(assets.to_vec(), vocab.clone(), counts)
}

#[derive(Deserialize)]
struct RawHeadline {
    ticker: String,
    date: String,
    #[serde(default)]
    title: String,
}

impl RawHeadline {
    fn into_record(self, path: &Path, line: usize) -> Result<HeadlineRecord> {
        if self.ticker.trim().is_empty() {
            return Err(Error::parse(path, format!("line {line}: empty ticker")));
        }
        let published_at = parse_day(&self.date)
            .ok_or_else(|| Error::parse(path, format!("line {line}: bad date {:?}", self.date)))?;
        Ok(HeadlineRecord::new(self.ticker.trim(), published_at, self.title))
    }
}

/// Loads headlines from JSON-Lines (`ticker`, `date`, `title` keys) or, for
/// `.csv` files, a CSV with header `ticker,date,title`.
pub fn load_headlines(path: &Path) -> Result<Vec<HeadlineRecord>> {
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
        let mut out = Vec::new();
        for (i, row) in reader.deserialize::<RawHeadline>().enumerate() {
            let raw = row.map_err(|e| Error::parse(path, e))?;
            out.push(raw.into_record(path, i + 2)?);
        }
        return Ok(out);
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawHeadline =
            serde_json::from_str(line).map_err(|e| Error::parse(path, format!("line {}: {e}", i + 1)))?;
        out.push(raw.into_record(path, i + 1)?);
    }
    Ok(out)
}
