//! Sentence-window Dice co-occurrence matrices over dictionary terms.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::corpus::{Corpus, CorpusRole};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::tsv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Reference,
    Generic,
    Filtered,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Reference => "reference",
            Provenance::Generic => "generic",
            Provenance::Filtered => "filtered",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "reference" => Some(Provenance::Reference),
            "generic" => Some(Provenance::Generic),
            "filtered" => Some(Provenance::Filtered),
            _ => None,
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `2 * n_ab / (n_a + n_b)` over sentence counts.
pub fn dice(n_a: u64, n_b: u64, n_ab: u64) -> Result<f64> {
    if n_a + n_b == 0 {
        return Err(Error::param("dice", "n_a + n_b must be positive"));
    }
    if n_ab > n_a.min(n_b) {
        return Err(Error::param("dice", "n_ab cannot exceed min(n_a, n_b)"));
    }
    Ok(2.0 * n_ab as f64 / (n_a + n_b) as f64)
}

/// Sparse symmetric matrix indexed by dictionary position. Only strictly
/// positive off-diagonal values are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CoocMatrix {
    terms: Vec<String>,
    rows: Vec<BTreeMap<usize, f64>>,
    row_norms: Vec<f64>,
    provenance: Provenance,
}

impl CoocMatrix {
    fn empty(terms: Vec<String>, provenance: Provenance) -> Self {
        let rows = vec![BTreeMap::new(); terms.len()];
        let row_norms = vec![0.0; terms.len()];
        CoocMatrix {
            terms,
            rows,
            row_norms,
            provenance,
        }
    }

    fn finish(mut self) -> Self {
        self.row_norms = self
            .rows
            .iter()
            .map(|row| row.values().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        self
    }

    fn insert(&mut self, a: usize, b: usize, value: f64) {
        debug_assert!(a != b && value > 0.0 && value <= 1.0);
        self.rows[a].insert(b, value);
        self.rows[b].insert(a, value);
    }

    /// Builds a matrix over `dict` from `(term_a, term_b, value)` entries.
    pub fn from_pairs<'a>(
        dict: &Dictionary,
        provenance: Provenance,
        pairs: impl IntoIterator<Item = (&'a str, &'a str, f64)>,
    ) -> Result<Self> {
        let mut m = CoocMatrix::empty(dict.terms().map(str::to_owned).collect(), provenance);
        for (ta, tb, v) in pairs {
            let a = dict.position(ta).ok_or_else(|| Error::UnknownTerm(ta.to_owned()))?;
            let b = dict.position(tb).ok_or_else(|| Error::UnknownTerm(tb.to_owned()))?;
            if a == b || !(v > 0.0 && v <= 1.0) {
                return Err(Error::param("pairs", "values must be off-diagonal and in (0, 1]"));
            }
            m.insert(a, b, v);
        }
        Ok(m.finish())
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Value at dictionary positions `(a, b)`; absent pairs and the diagonal are 0.
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.rows[a].get(&b).copied().unwrap_or(0.0)
    }

    /// Stored non-zero entries of column/row `a` as `(position, value)`.
    pub fn row(&self, a: usize) -> &BTreeMap<usize, f64> {
        &self.rows[a]
    }

    /// Euclidean norm of row `a`.
    pub fn row_norm(&self, a: usize) -> f64 {
        self.row_norms[a]
    }

    /// Number of stored unordered pairs.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(BTreeMap::len).sum::<usize>() / 2
    }

    /// Unordered pairs `(a, b, value)` with `a < b` by position.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(a, row)| row.range(a + 1..).map(move |(&b, &v)| (a, b, v)))
    }

    /// Header `# provenance=<p> N=<n>` then `term_a<TAB>term_b<TAB>value`
    /// triplets with `term_a < term_b`, sorted.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# provenance={} N={}", self.provenance, self.dim())?;
        let mut triplets: Vec<(&str, &str, f64)> = self
            .pairs()
            .map(|(a, b, v)| {
                let (ta, tb) = (self.terms[a].as_str(), self.terms[b].as_str());
                if ta < tb {
                    (ta, tb, v)
                } else {
                    (tb, ta, v)
                }
            })
            .collect();
        triplets.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        for (a, b, v) in triplets {
            tsv::check_field(a)?;
            tsv::check_field(b)?;
            writeln!(w, "{a}\t{b}\t{v}")?;
        }
        Ok(())
    }

    /// Reads a matrix file; the term order is taken from `dict`, which must
    /// be the dictionary the matrix was built for.
    pub fn read_tsv<R: BufRead>(reader: R, dict: &Dictionary) -> Result<Self> {
        const WHAT: &str = "co-occurrence matrix";
        let mut lines = tsv::Lines::new(reader, WHAT);
        let (n, header) = lines.expect_record()?;
        let provenance = tsv::header_value(&header, "provenance")
            .and_then(Provenance::parse)
            .ok_or_else(|| Error::format(WHAT, n, "missing `# provenance=` header"))?;
        let dim: usize = tsv::header_value(&header, "N")
            .ok_or_else(|| Error::format(WHAT, n, "missing `N=` in header"))?
            .parse()
            .map_err(|_| Error::format(WHAT, n, "invalid N"))?;
        if dim != dict.len() {
            return Err(Error::TermListMismatch);
        }
        let mut m = CoocMatrix::empty(dict.terms().map(str::to_owned).collect(), provenance);
        while let Some((n, rec)) = lines.next_record()? {
            if rec.len() != 3 {
                return Err(Error::format(WHAT, n, "expected term_a, term_b, value"));
            }
            let a = dict
                .position(&rec[0])
                .ok_or_else(|| Error::UnknownTerm(rec[0].clone()))?;
            let b = dict
                .position(&rec[1])
                .ok_or_else(|| Error::UnknownTerm(rec[1].clone()))?;
            let v: f64 = tsv::parse(WHAT, (n, rec[2].clone()))?;
            if a == b || !(v > 0.0 && v <= 1.0) {
                return Err(Error::format(WHAT, n, "values must be off-diagonal and in (0, 1]"));
            }
            m.insert(a, b, v);
        }
        Ok(m.finish())
    }
}

#[derive(Default)]
struct SentenceCounts {
    single: HashMap<usize, u64>,
    pair: HashMap<(usize, usize), u64>,
}

impl SentenceCounts {
    fn merge(mut self, other: SentenceCounts) -> SentenceCounts {
        for (k, v) in other.single {
            *self.single.entry(k).or_default() += v;
        }
        for (k, v) in other.pair {
            *self.pair.entry(k).or_default() += v;
        }
        self
    }
}

/// Distinct dictionary positions present in a sentence, ascending.
pub fn sentence_terms(sentence: &[String], dict: &Dictionary) -> Vec<usize> {
    let mut present: Vec<usize> = sentence.iter().filter_map(|t| dict.position(t)).collect();
    present.sort_unstable();
    present.dedup();
    present
}

/// Dice matrix over dictionary-term pairs, counting each sentence at most
/// once per term and once per pair.
pub fn build_cooc(corpus: &Corpus, dict: &Dictionary) -> Result<CoocMatrix> {
    if dict.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    let provenance = match corpus.role() {
        CorpusRole::Reference => Provenance::Reference,
        CorpusRole::Generic => Provenance::Generic,
        CorpusRole::Target => return Err(Error::CoocRole("target")),
    };
    let counts = corpus
        .documents()
        .par_iter()
        .map(|doc| {
            let mut local = SentenceCounts::default();
            for sentence in doc.sentences() {
                let present = sentence_terms(sentence, dict);
                for (i, &a) in present.iter().enumerate() {
                    *local.single.entry(a).or_default() += 1;
                    for &b in &present[i + 1..] {
                        *local.pair.entry((a, b)).or_default() += 1;
                    }
                }
            }
            local
        })
        .reduce(SentenceCounts::default, SentenceCounts::merge);

    let mut m = CoocMatrix::empty(dict.terms().map(str::to_owned).collect(), provenance);
    for (&(a, b), &n_ab) in &counts.pair {
        let value = dice(counts.single[&a], counts.single[&b], n_ab)?;
        m.insert(a, b, value);
    }
    Ok(m.finish())
}

/// `C' = max(C - D, 0)` entrywise; pairs missing from `generic` pass through.
pub fn filter_cooc(reference: &CoocMatrix, generic: &CoocMatrix) -> Result<CoocMatrix> {
    if reference.provenance != Provenance::Reference {
        return Err(Error::Provenance {
            expected: "reference",
            found: reference.provenance.as_str(),
        });
    }
    if generic.provenance != Provenance::Generic {
        return Err(Error::Provenance {
            expected: "generic",
            found: generic.provenance.as_str(),
        });
    }
    if reference.terms != generic.terms {
        return Err(Error::TermListMismatch);
    }
    let mut m = CoocMatrix::empty(reference.terms.clone(), Provenance::Filtered);
    for (a, b, c) in reference.pairs() {
        let value = c - generic.get(a, b);
        if value > 0.0 {
            m.insert(a, b, value);
        }
    }
    Ok(m.finish())
}
