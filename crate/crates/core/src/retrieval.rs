//! Ranking a target collection against a (contextualized) dictionary.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::cooc::CoocMatrix;
use crate::corpus::{Corpus, TermStats};
use crate::dictionary::{Dictionary, DictionaryMethod};
use crate::error::{Error, Result};
use crate::scoring::{compute_norms, score_document, ScoringConfig, ScoringMode};
use crate::tsv;

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub doc_id: String,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    system_id: String,
    entries: Vec<RankedEntry>,
}

impl RankedList {
    /// Builds a list from `(doc_id, score)` pairs, sorting by score
    /// descending with doc id as tie-break.
    pub fn from_scores(system_id: impl Into<String>, mut scored: Vec<(String, f64)>) -> Result<Self> {
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let entries = scored
            .into_iter()
            .enumerate()
            .map(|(i, (doc_id, score))| RankedEntry {
                doc_id,
                score,
                rank: i + 1,
            })
            .collect();
        RankedList::from_entries(system_id, entries)
    }

    fn from_entries(system_id: impl Into<String>, entries: Vec<RankedEntry>) -> Result<Self> {
        let system_id = system_id.into();
        let mut seen = std::collections::HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            if e.rank != i + 1 {
                return Err(Error::param("ranked list", format!("rank {} out of sequence", e.rank)));
            }
            if i > 0 && e.score > entries[i - 1].score {
                return Err(Error::param("ranked list", "scores must be non-increasing"));
            }
            if !seen.insert(e.doc_id.as_str()) {
                return Err(Error::DuplicateId(e.doc_id.clone()));
            }
        }
        Ok(RankedList { system_id, entries })
    }

    pub fn system_id(&self) -> &str {
        &self.system_id
    }

    pub fn entries(&self) -> &[RankedEntry] {
        &self.entries
    }

    /// Number of ranked documents, `m_s`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.doc_id.as_str())
    }

    pub fn truncated(&self, k: usize) -> RankedList {
        RankedList {
            system_id: self.system_id.clone(),
            entries: self.entries.iter().take(k).cloned().collect(),
        }
    }

    pub fn with_system_id(mut self, system_id: impl Into<String>) -> Self {
        self.system_id = system_id.into();
        self
    }

    /// `# system_id=<id>` then `rank<TAB>doc_id<TAB>score`.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# system_id={}", self.system_id)?;
        for e in &self.entries {
            tsv::check_field(&e.doc_id)?;
            writeln!(w, "{}\t{}\t{}", e.rank, e.doc_id, e.score)?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        const WHAT: &str = "ranked list";
        let mut lines = tsv::Lines::new(reader, WHAT);
        let mut system_id = None;
        let mut entries = Vec::new();
        while let Some((n, rec)) = lines.next_record()? {
            if rec[0].starts_with('#') {
                if let Some(id) = tsv::header_value(&rec, "system_id") {
                    system_id = Some(id.to_owned());
                }
                continue;
            }
            if rec.len() != 3 {
                return Err(Error::format(WHAT, n, "expected rank, doc_id, score"));
            }
            entries.push(RankedEntry {
                rank: tsv::parse(WHAT, (n, rec[0].clone()))?,
                doc_id: rec[1].clone(),
                score: tsv::parse(WHAT, (n, rec[2].clone()))?,
            });
        }
        let system_id = system_id.ok_or_else(|| Error::format(WHAT, 1, "missing `# system_id=` header"))?;
        RankedList::from_entries(system_id, entries)
    }
}

/// System identifier `<dict>:<mode>:alpha=<value>`, e.g. `tm:context:alpha=14`.
pub fn system_id(method: DictionaryMethod, config: &ScoringConfig) -> String {
    format!("{}:{}:alpha={}", method.label(), config.mode(), config.alpha())
}

/// Scores every document of `target` and keeps the top `k` with positive
/// score. Documents without tokens score 0 and are therefore dropped.
pub fn rank_collection(
    target: &Corpus,
    dict: &Dictionary,
    matrix: Option<&CoocMatrix>,
    config: &ScoringConfig,
    k: usize,
) -> Result<RankedList> {
    if k == 0 {
        return Err(Error::param("k", "result list length must be at least 1"));
    }
    if dict.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    let matrix = match (config.mode(), matrix) {
        (ScoringMode::Unigram, _) => None,
        (mode, None) => return Err(Error::MissingMatrix(mode.as_str())),
        (_, Some(m)) => {
            if !m.terms().iter().map(String::as_str).eq(dict.terms()) {
                return Err(Error::TermListMismatch);
            }
            Some(m)
        }
    };
    let stats = TermStats::new(target);
    let norms = compute_norms(target, &stats, config)?;
    let scored = target
        .documents()
        .par_iter()
        .enumerate()
        .map(|(i, doc)| match norms.get(i) {
            None => Ok(None),
            Some(norm) => {
                let score = score_document(dict, doc, matrix, norm, config)?;
                Ok((score > 0.0).then(|| (doc.id().to_owned(), score)))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let list = RankedList::from_scores(system_id(dict.method(), config), scored.into_iter().flatten().collect())?;
    Ok(list.truncated(k))
}
