//! Document relevance scores against a ranked dictionary.
//!
//! Both scores share one accumulation routine so that the context score at
//! `alpha = 0` reproduces the unigram score bit-for-bit.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::cooc::{sentence_terms, CoocMatrix, Provenance};
use crate::corpus::{Corpus, Document, TermStats};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};

pub const DEFAULT_SLOPE: f64 = 0.7;

/// Floor applied to sub-unit context frequencies before taking the log.
const CONTEXT_ONLY_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoringMode {
    Unigram,
    Context,
    /// Context similarity alone: `tf(w,s)` dropped, alpha fixed at 1.
    ContextOnly,
}

impl ScoringMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoringMode::Unigram => "unigram",
            ScoringMode::Context => "context",
            ScoringMode::ContextOnly => "context-only",
        }
    }

    pub fn needs_matrix(self) -> bool {
        self != ScoringMode::Unigram
    }
}

impl fmt::Display for ScoringMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoringMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unigram" => Ok(ScoringMode::Unigram),
            "context" => Ok(ScoringMode::Context),
            "context-only" => Ok(ScoringMode::ContextOnly),
            other => Err(Error::param("mode", format!("unknown scoring mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringConfig {
    slope: f64,
    alpha: f64,
    mode: ScoringMode,
}

impl ScoringConfig {
    pub fn new(slope: f64, alpha: f64, mode: ScoringMode) -> Result<Self> {
        if !(0.0..=1.0).contains(&slope) {
            return Err(Error::param("slope", format!("{slope} is outside [0, 1]")));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::param("alpha", format!("{alpha} must be a finite value >= 0")));
        }
        let alpha = if mode == ScoringMode::ContextOnly { 1.0 } else { alpha };
        Ok(ScoringConfig { slope, alpha, mode })
    }

    pub fn unigram() -> Self {
        ScoringConfig {
            slope: DEFAULT_SLOPE,
            alpha: 0.0,
            mode: ScoringMode::Unigram,
        }
    }

    pub fn context(alpha: f64) -> Result<Self> {
        Self::new(DEFAULT_SLOPE, alpha, ScoringMode::Context)
    }

    pub fn context_only() -> Self {
        ScoringConfig {
            slope: DEFAULT_SLOPE,
            alpha: 1.0,
            mode: ScoringMode::ContextOnly,
        }
    }

    pub fn with_slope(self, slope: f64) -> Result<Self> {
        Self::new(slope, self.alpha, self.mode)
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mode(&self) -> ScoringMode {
        self.mode
    }
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self::unigram()
    }
}

/// Length statistics for one non-empty document.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DocNorm {
    pub unique_terms: usize,
    pub norm: f64,
    pub avgtf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectionNorms {
    pivot: f64,
    docs: Vec<Option<DocNorm>>,
}

impl CollectionNorms {
    /// Mean number of unique terms per document.
    pub fn pivot(&self) -> f64 {
        self.pivot
    }

    /// `None` for documents without tokens; they always score 0.
    pub fn get(&self, doc: usize) -> Option<&DocNorm> {
        self.docs[doc].as_ref()
    }

    /// Positions of documents with no tokens.
    pub fn flagged(&self) -> Vec<usize> {
        self.docs
            .iter()
            .enumerate()
            .filter_map(|(i, d)| d.is_none().then_some(i))
            .collect()
    }
}

/// Pivoted unique normalization: `1 / sqrt((1 - slope) * pivot + slope * |U_d|)`.
pub fn pivoted_norm(unique_terms: usize, pivot: f64, slope: f64) -> f64 {
    1.0 / ((1.0 - slope) * pivot + slope * unique_terms as f64).sqrt()
}

pub fn compute_norms(target: &Corpus, stats: &TermStats, config: &ScoringConfig) -> Result<CollectionNorms> {
    if target.is_empty() || stats.num_docs() != target.len() {
        return Err(Error::param("target", "statistics do not describe this corpus"));
    }
    let total_unique: usize = (0..stats.num_docs()).map(|d| stats.unique_terms(d)).sum();
    let pivot = total_unique as f64 / stats.num_docs() as f64;
    let docs = (0..stats.num_docs())
        .map(|d| {
            let unique = stats.unique_terms(d);
            if unique == 0 {
                log::warn!("document `{}` has no tokens and will score 0", target.documents()[d].id());
                return None;
            }
            Some(DocNorm {
                unique_terms: unique,
                norm: pivoted_norm(unique, pivot, config.slope),
                avgtf: stats.doc_tokens(d) as f64 / unique as f64,
            })
        })
        .collect();
    Ok(CollectionNorms { pivot, docs })
}

/// Sums `(1 + ln f) / (1 + ln avgtf) * boost * norm` over dictionary
/// positions in ascending order. Frequencies `<= 0` contribute nothing.
fn accumulate(dict: &Dictionary, freqs: &BTreeMap<usize, f64>, norm: &DocNorm, floor: bool) -> f64 {
    let length = 1.0 + norm.avgtf.ln();
    let mut score = 0.0;
    for (&pos, &f) in freqs {
        if f <= 0.0 {
            continue;
        }
        let f = if floor { f.max(CONTEXT_ONLY_FLOOR) } else { f };
        let weight = (1.0 + f.ln()) / length;
        if weight <= 0.0 {
            continue;
        }
        score += weight * dict.entries()[pos].boost * norm.norm;
    }
    score
}

fn unigram_frequencies(dict: &Dictionary, doc: &Document) -> BTreeMap<usize, f64> {
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for token in doc.tokens() {
        if let Some(pos) = dict.position(token) {
            *counts.entry(pos).or_default() += 1;
        }
    }
    counts.into_iter().map(|(p, c)| (p, c as f64)).collect()
}

/// Unigram dictionary score of a document.
pub fn score_dict(dict: &Dictionary, doc: &Document, norm: &DocNorm) -> Result<f64> {
    if dict.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    Ok(accumulate(dict, &unigram_frequencies(dict, doc), norm, false))
}

fn check_matrix(dict: &Dictionary, matrix: &CoocMatrix) -> Result<()> {
    if matrix.provenance() != Provenance::Filtered {
        return Err(Error::Provenance {
            expected: "filtered",
            found: matrix.provenance().as_str(),
        });
    }
    if matrix.dim() != dict.len() {
        return Err(Error::TermListMismatch);
    }
    Ok(())
}

/// `tfsim` for every dictionary term occurring in `doc`, keyed by position.
///
/// Each sentence containing `w` adds `tf(w,s) + alpha * cos(s, C'_w)`, where
/// `s` is the binary dictionary-term indicator of the sentence. A zero
/// vector gives cosine 0.
fn context_frequencies(
    dict: &Dictionary,
    doc: &Document,
    matrix: &CoocMatrix,
    config: &ScoringConfig,
) -> BTreeMap<usize, f64> {
    let with_tf = config.mode != ScoringMode::ContextOnly;
    let mut freqs: BTreeMap<usize, f64> = BTreeMap::new();
    for sentence in doc.sentences() {
        let present = sentence_terms(sentence, dict);
        if present.is_empty() {
            continue;
        }
        let sentence_norm = (present.len() as f64).sqrt();
        for &w in &present {
            let column_norm = matrix.row_norm(w);
            let cosine = if column_norm > 0.0 {
                let dot: f64 = present.iter().map(|&j| matrix.get(j, w)).sum();
                dot / (sentence_norm * column_norm)
            } else {
                0.0
            };
            let mut value = config.alpha * cosine;
            if with_tf {
                let term = &dict.entries()[w].term;
                value += sentence.iter().filter(|t| *t == term).count() as f64;
            }
            *freqs.entry(w).or_insert(0.0) += value;
        }
    }
    freqs
}

/// Context-sensitive term frequency of `term` in `doc`.
pub fn tfsim(term: &str, dict: &Dictionary, doc: &Document, matrix: &CoocMatrix, config: &ScoringConfig) -> Result<f64> {
    let pos = dict
        .position(term)
        .ok_or_else(|| Error::UnknownTerm(term.to_owned()))?;
    check_matrix(dict, matrix)?;
    Ok(context_frequencies(dict, doc, matrix, config)
        .get(&pos)
        .copied()
        .unwrap_or(0.0))
}

/// Unigram score with `tf(w,d)` replaced by `tfsim(w,d)`.
pub fn score_context(
    dict: &Dictionary,
    doc: &Document,
    matrix: &CoocMatrix,
    norm: &DocNorm,
    config: &ScoringConfig,
) -> Result<f64> {
    if dict.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    check_matrix(dict, matrix)?;
    let freqs = context_frequencies(dict, doc, matrix, config);
    Ok(accumulate(dict, &freqs, norm, config.mode == ScoringMode::ContextOnly))
}

/// Scores `doc` in the mode selected by `config`.
pub fn score_document(
    dict: &Dictionary,
    doc: &Document,
    matrix: Option<&CoocMatrix>,
    norm: &DocNorm,
    config: &ScoringConfig,
) -> Result<f64> {
    match config.mode {
        ScoringMode::Unigram => score_dict(dict, doc, norm),
        mode => {
            let matrix = matrix.ok_or(Error::MissingMatrix(mode.as_str()))?;
            score_context(dict, doc, matrix, norm, config)
        }
    }
}
