//! Ranked dictionaries of key terms and their retrieval boost factors.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::corpus::{Corpus, TermStats};
use crate::error::{Error, Result};
use crate::topics::TopicModelResult;
use crate::tsv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DictionaryMethod {
    TopicModel,
    Tfidf,
}

impl DictionaryMethod {
    /// Short label used in system ids and file names.
    pub fn label(self) -> &'static str {
        match self {
            DictionaryMethod::TopicModel => "tm",
            DictionaryMethod::Tfidf => "tfidf",
        }
    }
}

impl fmt::Display for DictionaryMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DictionaryMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tm" | "topic-model" => Ok(DictionaryMethod::TopicModel),
            "tfidf" => Ok(DictionaryMethod::Tfidf),
            other => Err(Error::param("method", format!("unknown dictionary method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DictEntry {
    pub term: String,
    pub weight: f64,
    pub rank: usize,
    pub boost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    entries: Vec<DictEntry>,
    index: HashMap<String, usize>,
    method: DictionaryMethod,
}

impl Dictionary {
    /// Builds a dictionary from `(term, weight)` pairs already in rank order.
    pub fn from_ranked(terms: Vec<(String, f64)>, method: DictionaryMethod) -> Result<Self> {
        let mut entries = Vec::with_capacity(terms.len());
        let mut index = HashMap::with_capacity(terms.len());
        for (pos, (term, weight)) in terms.into_iter().enumerate() {
            if let Some(prev) = entries.last().map(|e: &DictEntry| e.weight) {
                if weight > prev {
                    return Err(Error::param(
                        "dictionary",
                        format!("weight of `{term}` exceeds the weight of the previous rank"),
                    ));
                }
            }
            if index.insert(term.clone(), pos).is_some() {
                return Err(Error::param("dictionary", format!("duplicate term `{term}`")));
            }
            let rank = pos + 1;
            entries.push(DictEntry {
                term,
                weight,
                rank,
                boost: boost(rank)?,
            });
        }
        Ok(Dictionary {
            entries,
            index,
            method,
        })
    }

    pub fn entries(&self) -> &[DictEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn method(&self) -> DictionaryMethod {
        self.method
    }

    /// 0-based position of `term`, i.e. `rank - 1`.
    pub fn position(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn get(&self, term: &str) -> Option<&DictEntry> {
        self.position(term).map(|i| &self.entries[i])
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.term.as_str())
    }

    /// `rank<TAB>term<TAB>weight<TAB>boost`, preceded by a `# method=` line.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# method={} N={}", self.method, self.len())?;
        for e in &self.entries {
            tsv::check_field(&e.term)?;
            writeln!(w, "{}\t{}\t{}\t{}", e.rank, e.term, e.weight, e.boost)?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        const WHAT: &str = "dictionary";
        let mut lines = tsv::Lines::new(reader, WHAT);
        let mut method = None;
        let mut terms = Vec::new();
        while let Some((n, rec)) = lines.next_record()? {
            if rec[0].starts_with('#') {
                if let Some(m) = tsv::header_value(&rec, "method") {
                    method = Some(m.parse()?);
                }
                continue;
            }
            if rec.len() != 4 {
                return Err(Error::format(WHAT, n, "expected rank, term, weight, boost"));
            }
            let rank: usize = tsv::parse(WHAT, (n, rec[0].clone()))?;
            if rank != terms.len() + 1 {
                return Err(Error::format(WHAT, n, format!("rank {rank} out of sequence")));
            }
            let weight: f64 = tsv::parse(WHAT, (n, rec[2].clone()))?;
            terms.push((rec[1].clone(), weight));
        }
        let method = method.ok_or_else(|| Error::format(WHAT, 1, "missing `# method=` header"))?;
        Dictionary::from_ranked(terms, method)
    }
}

/// Retrieval boost for a 1-based dictionary rank: `1 / sqrt(rank)`.
pub fn boost(rank: usize) -> Result<f64> {
    if rank == 0 {
        return Err(Error::param("rank", "ranks start at 1"));
    }
    Ok(1.0 / (rank as f64).sqrt())
}

/// Topic-model term weight: `ln(tf(w)) * sum of p(w|z_k)` over retained topics.
pub fn term_weight(term: &str, model: &TopicModelResult, stats: &TermStats) -> Result<f64> {
    if model.excluded().len() >= model.num_topics() {
        return Err(Error::AllTopicsExcluded);
    }
    let tf = stats.tf(term);
    if tf == 0 {
        return Err(Error::UnknownTerm(term.to_owned()));
    }
    let mass: f64 = model.retained_probabilities(term)?.iter().sum();
    Ok((tf as f64).ln() * mass)
}

/// Sorts by weight descending, term ascending, and keeps the first `n`.
fn rank_and_cut(mut weighted: Vec<(String, f64)>, n: usize, method: DictionaryMethod) -> Result<Dictionary> {
    if n == 0 {
        return Err(Error::param("N", "dictionary size must be at least 1"));
    }
    weighted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    weighted.truncate(n);
    Dictionary::from_ranked(weighted, method)
}

pub fn extract_dictionary_tm(model: &TopicModelResult, stats: &TermStats, n: usize) -> Result<Dictionary> {
    if model.excluded().len() >= model.num_topics() {
        return Err(Error::AllTopicsExcluded);
    }
    let weighted = model
        .vocabulary()
        .iter()
        .map(|w| Ok((w.clone(), term_weight(w, model, stats)?)))
        .collect::<Result<Vec<_>>>()?;
    rank_and_cut(weighted, n, DictionaryMethod::TopicModel)
}

/// Baseline dictionary: `tf(w) * ln(|D| / df(w))` within the reference.
pub fn extract_dictionary_tfidf(reference: &Corpus, n: usize) -> Result<Dictionary> {
    if reference.len() < 2 {
        return Err(Error::IdfUndefined);
    }
    let stats = TermStats::new(reference);
    let docs = reference.len() as f64;
    let weighted = reference
        .vocabulary()
        .iter()
        .map(|w| {
            let idf = (docs / stats.df(w) as f64).ln();
            (w.clone(), stats.tf(w) as f64 * idf)
        })
        .collect();
    rank_and_cut(weighted, n, DictionaryMethod::Tfidf)
}
