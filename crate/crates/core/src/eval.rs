//! Evaluation without a gold standard: an alpha sweep generates many
//! systems, a few strongly biased ones are fused into pseudo-relevant
//! documents (norm weights plus Condorcet voting), and every system is then
//! scored by mean average precision against them. Precision over rank
//! windows supports manual judging.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use crate::cooc::CoocMatrix;
use crate::corpus::Corpus;
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::retrieval::{rank_collection, RankedList};
use crate::scoring::{ScoringConfig, ScoringMode};
use crate::tsv;

pub const DEFAULT_TOP_M: usize = 50;
pub const DEFAULT_FRACTION: f64 = 0.5;

/// Alpha values 0, 2, ..., 30.
pub fn default_alphas() -> Vec<f64> {
    (0..=15).map(|i| 2.0 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSet {
    systems: Vec<RankedList>,
    biased: Vec<String>,
}

impl SystemSet {
    pub fn new(systems: Vec<RankedList>, biased: Vec<String>) -> Result<Self> {
        let mut ids = HashSet::new();
        for s in &systems {
            if !ids.insert(s.system_id()) {
                return Err(Error::DuplicateSystem(s.system_id().to_owned()));
            }
        }
        let mut seen = HashSet::new();
        let mut subset = Vec::new();
        for id in biased {
            if !ids.contains(id.as_str()) {
                return Err(Error::UnknownSystem(id));
            }
            if seen.insert(id.clone()) {
                subset.push(id);
            }
        }
        Ok(SystemSet {
            systems,
            biased: subset,
        })
    }

    /// Uses [`default_biased_ids`] as the biased subset.
    pub fn with_default_biased(systems: Vec<RankedList>) -> Result<Self> {
        let biased = default_biased_ids(&systems);
        SystemSet::new(systems, biased)
    }

    pub fn systems(&self) -> &[RankedList] {
        &self.systems
    }

    pub fn biased_ids(&self) -> &[String] {
        &self.biased
    }

    pub fn get(&self, system_id: &str) -> Option<&RankedList> {
        self.systems.iter().find(|s| s.system_id() == system_id)
    }

    pub fn set_biased(&mut self, biased: Vec<String>) -> Result<()> {
        let checked = SystemSet::new(self.systems.clone(), biased)?;
        self.biased = checked.biased;
        Ok(())
    }

    /// Biased systems in subset order.
    pub fn biased_systems(&self) -> Vec<&RankedList> {
        self.biased
            .iter()
            .filter_map(|id| self.get(id))
            .collect()
    }

    /// A set holding only the biased systems, all marked biased.
    pub fn biased_set(&self) -> SystemSet {
        let systems: Vec<RankedList> = self.biased_systems().into_iter().cloned().collect();
        let biased = systems.iter().map(|s| s.system_id().to_owned()).collect();
        SystemSet { systems, biased }
    }

    /// Concatenation of two sets; system ids must not collide.
    pub fn union(&self, other: &SystemSet) -> Result<SystemSet> {
        let systems = self.systems.iter().chain(&other.systems).cloned().collect();
        let biased = self.biased.iter().chain(&other.biased).cloned().collect();
        SystemSet::new(systems, biased)
    }
}

/// Per dictionary label: the alpha = 0 system (context or unigram mode)
/// and the context-only system, when present.
pub fn default_biased_ids(systems: &[RankedList]) -> Vec<String> {
    let mut labels: Vec<&str> = Vec::new();
    for s in systems {
        let label = s.system_id().split(':').next().unwrap_or_default();
        if !labels.contains(&label) {
            labels.push(label);
        }
    }
    let present: HashSet<&str> = systems.iter().map(RankedList::system_id).collect();
    let mut out = Vec::new();
    for label in labels {
        let zero = [format!("{label}:context:alpha=0"), format!("{label}:unigram:alpha=0")]
            .into_iter()
            .find(|id| present.contains(id.as_str()));
        out.extend(zero);
        let only = format!("{label}:context-only:alpha=1");
        if present.contains(only.as_str()) {
            out.push(only);
        }
    }
    out
}

/// Sort key of a system id in sweep order: `tm` before `tfidf` before other
/// labels, then mode (unigram, context, context-only), then alpha.
fn system_key(id: &str) -> (u8, String, u8, f64, String) {
    let mut parts = id.splitn(3, ':');
    let label = parts.next().unwrap_or_default();
    let mode = parts.next().unwrap_or_default();
    let alpha = parts
        .next()
        .and_then(|a| a.strip_prefix("alpha="))
        .and_then(|a| a.parse().ok())
        .unwrap_or(f64::INFINITY);
    let label_rank = match label {
        "tm" => 0,
        "tfidf" => 1,
        _ => 2,
    };
    let mode_rank = match mode {
        "unigram" => 0,
        "context" => 1,
        "context-only" => 2,
        _ => 3,
    };
    (label_rank, label.to_owned(), mode_rank, alpha, id.to_owned())
}

/// Orders systems as [`generate_sweep`] emits them for `[tm, tfidf]`, so
/// lists loaded from files in any order fuse identically.
pub fn sort_systems(systems: &mut [RankedList]) {
    systems.sort_by(|a, b| {
        let (ka, kb) = (system_key(a.system_id()), system_key(b.system_id()));
        (ka.0, &ka.1, ka.2)
            .cmp(&(kb.0, &kb.1, kb.2))
            .then(ka.3.total_cmp(&kb.3))
            .then_with(|| ka.4.cmp(&kb.4))
    });
}

/// One dictionary with its filtered co-occurrence matrix.
#[derive(Debug, Clone, Copy)]
pub struct SweepInput<'a> {
    pub dict: &'a Dictionary,
    pub matrix: &'a CoocMatrix,
}

/// For every dictionary, one context-mode system per alpha plus one
/// context-only system.
pub fn generate_sweep(
    target: &Corpus,
    inputs: &[SweepInput<'_>],
    alphas: &[f64],
    k: usize,
    slope: f64,
) -> Result<SystemSet> {
    if alphas.is_empty() {
        return Err(Error::param("alphas", "sweep needs at least one alpha value"));
    }
    let mut systems = Vec::with_capacity(inputs.len() * (alphas.len() + 1));
    for input in inputs {
        for &alpha in alphas {
            let config = ScoringConfig::new(slope, alpha, ScoringMode::Context)?;
            systems.push(rank_collection(target, input.dict, Some(input.matrix), &config, k)?);
        }
        let config = ScoringConfig::new(slope, 1.0, ScoringMode::ContextOnly)?;
        systems.push(rank_collection(target, input.dict, Some(input.matrix), &config, k)?);
    }
    SystemSet::with_default_biased(systems)
}

/// `n_d = sum over systems of m_s / rank(d, s)`; documents absent from a
/// system get nothing from it.
pub fn norm_weights(systems: &SystemSet) -> HashMap<String, f64> {
    let mut weights: HashMap<String, f64> = HashMap::new();
    for s in systems.systems() {
        let m = s.len() as f64;
        for e in s.entries() {
            *weights.entry(e.doc_id.clone()).or_insert(0.0) += m / e.rank as f64;
        }
    }
    weights
}

/// Union of the top `top_m` documents of every biased system.
pub fn select_candidates(systems: &SystemSet, top_m: usize) -> Result<BTreeSet<String>> {
    if top_m == 0 {
        return Err(Error::param("top_m", "must be at least 1"));
    }
    if systems.biased_ids().is_empty() {
        return Err(Error::EmptyBiasedSubset);
    }
    Ok(systems
        .biased_systems()
        .into_iter()
        .flat_map(|s| s.doc_ids().take(top_m).map(str::to_owned).collect::<Vec<_>>())
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondorcetEntry {
    pub doc_id: String,
    pub wins: usize,
    pub norm_weight: f64,
}

/// Pairwise-majority ranking of `pool` over the biased systems.
///
/// `a` beats `b` when a strict majority of the biased systems rank `a`
/// above `b`; a document missing from a system ranks below every document
/// that system retrieved. Order: wins desc, `n_d` desc, doc id asc.
pub fn condorcet_rank(pool: &BTreeSet<String>, systems: &SystemSet) -> Result<Vec<CondorcetEntry>> {
    if pool.is_empty() {
        return Err(Error::param("pool", "candidate pool is empty"));
    }
    let biased = systems.biased_set();
    if biased.systems().is_empty() {
        return Err(Error::EmptyBiasedSubset);
    }
    let candidates: Vec<&str> = pool.iter().map(String::as_str).collect();
    let ranks: Vec<Vec<usize>> = biased
        .systems()
        .iter()
        .map(|s| {
            let by_id: HashMap<&str, usize> = s.entries().iter().map(|e| (e.doc_id.as_str(), e.rank)).collect();
            candidates
                .iter()
                .map(|d| by_id.get(d).copied().unwrap_or(usize::MAX))
                .collect()
        })
        .collect();
    let voters = ranks.len();
    let mut wins = vec![0usize; candidates.len()];
    for a in 0..candidates.len() {
        for b in a + 1..candidates.len() {
            let (mut for_a, mut for_b) = (0, 0);
            for r in &ranks {
                match r[a].cmp(&r[b]) {
                    std::cmp::Ordering::Less => for_a += 1,
                    std::cmp::Ordering::Greater => for_b += 1,
                    std::cmp::Ordering::Equal => {}
                }
            }
            if 2 * for_a > voters {
                wins[a] += 1;
            } else if 2 * for_b > voters {
                wins[b] += 1;
            }
        }
    }
    let nd = norm_weights(&biased);
    let mut order: Vec<CondorcetEntry> = candidates
        .iter()
        .zip(wins)
        .map(|(d, w)| CondorcetEntry {
            doc_id: (*d).to_owned(),
            wins: w,
            norm_weight: nd.get(*d).copied().unwrap_or(0.0),
        })
        .collect();
    order.sort_by(|x, y| {
        y.wins
            .cmp(&x.wins)
            .then_with(|| y.norm_weight.total_cmp(&x.norm_weight))
            .then_with(|| x.doc_id.cmp(&y.doc_id))
    });
    Ok(order)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudorelSet {
    doc_ids: BTreeSet<String>,
    condorcet_order: Vec<CondorcetEntry>,
    candidate_pool: BTreeSet<String>,
    fraction: f64,
    top_m: usize,
}

impl PseudorelSet {
    /// A relevance set given directly (e.g. read back from `pseudorels.txt`
    /// or known labels): the pool is the set itself, fraction 1.
    pub fn from_ids(ids: impl IntoIterator<Item = String>) -> Self {
        let doc_ids: BTreeSet<String> = ids.into_iter().collect();
        PseudorelSet {
            candidate_pool: doc_ids.clone(),
            doc_ids,
            condorcet_order: Vec::new(),
            fraction: 1.0,
            top_m: 0,
        }
    }

    pub fn doc_ids(&self) -> &BTreeSet<String> {
        &self.doc_ids
    }

    pub fn condorcet_order(&self) -> &[CondorcetEntry] {
        &self.condorcet_order
    }

    pub fn candidate_pool(&self) -> &BTreeSet<String> {
        &self.candidate_pool
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    pub fn top_m(&self) -> usize {
        self.top_m
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.doc_ids.contains(doc_id)
    }

    /// Writes the Condorcet order of the selected documents, one id per line.
    pub fn write_txt<W: Write>(&self, mut w: W) -> Result<()> {
        if self.condorcet_order.is_empty() {
            for id in &self.doc_ids {
                writeln!(w, "{id}")?;
            }
        } else {
            for e in self.condorcet_order.iter().filter(|e| self.doc_ids.contains(&e.doc_id)) {
                writeln!(w, "{}", e.doc_id)?;
            }
        }
        Ok(())
    }

    pub fn read_txt<R: BufRead>(reader: R) -> Result<Self> {
        let mut ids = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let id = line.trim();
            if !id.is_empty() && !id.starts_with('#') {
                ids.push(id.to_owned());
            }
        }
        Ok(PseudorelSet::from_ids(ids))
    }
}

/// Number of documents kept from a pool: `ceil(fraction * pool)`.
pub fn pseudorel_cutoff(pool: usize, fraction: f64) -> usize {
    // The small guard absorbs representation error such as 0.1 * 30 > 3.
    let exact = fraction * pool as f64;
    ((exact - 1e-9).ceil().max(0.0) as usize).min(pool)
}

pub fn select_pseudorels(systems: &SystemSet, top_m: usize, fraction: f64) -> Result<PseudorelSet> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::param("fraction", format!("{fraction} is outside (0, 1]")));
    }
    let pool = select_candidates(systems, top_m)?;
    let order = condorcet_rank(&pool, systems)?;
    let keep = pseudorel_cutoff(pool.len(), fraction);
    let doc_ids = order.iter().take(keep).map(|e| e.doc_id.clone()).collect();
    Ok(PseudorelSet {
        doc_ids,
        condorcet_order: order,
        candidate_pool: pool,
        fraction,
        top_m,
    })
}

/// Average precision of one ranking; relevant documents that were not
/// retrieved contribute precision 0.
pub fn map_score(list: &RankedList, rels: &PseudorelSet) -> Result<f64> {
    if rels.is_empty() {
        return Err(Error::EmptyPseudorels);
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, id) in list.doc_ids().enumerate() {
        if rels.contains(id) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / rels.len() as f64)
}

/// Inclusive, 1-based rank window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RankRange {
    pub first: usize,
    pub last: usize,
}

impl RankRange {
    pub fn new(first: usize, last: usize) -> Result<Self> {
        if first == 0 || last < first {
            return Err(Error::param("range", format!("{first}-{last} is not a valid rank window")));
        }
        Ok(RankRange { first, last })
    }

    /// Ten ranks starting at each of 1, 101, 501, 1001, 1501 and 1991.
    pub fn defaults() -> Vec<RankRange> {
        [1, 101, 501, 1001, 1501, 1991]
            .into_iter()
            .map(|first| RankRange { first, last: first + 9 })
            .collect()
    }
}

impl fmt::Display for RankRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.first, self.last)
    }
}

impl std::str::FromStr for RankRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| Error::param("range", format!("`{s}` is not of the form FIRST-LAST")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<usize>()
                .map_err(|_| Error::param("range", format!("`{s}` is not of the form FIRST-LAST")))
        };
        RankRange::new(parse(a)?, parse(b)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionRow {
    pub range: RankRange,
    /// Retrieved documents inside the window.
    pub judged: usize,
    /// `None` when the list ends before the window starts.
    pub precision: Option<f64>,
}

/// Fraction of judged-relevant documents among the retrieved documents of
/// each window. Errors list every document in the windows without a
/// judgment, so they can be annotated.
pub fn precision_at_ranges(
    list: &RankedList,
    judgments: &HashMap<String, bool>,
    ranges: &[RankRange],
) -> Result<Vec<PrecisionRow>> {
    let mut missing = BTreeSet::new();
    let mut rows = Vec::with_capacity(ranges.len());
    for &range in ranges {
        let window: Vec<&str> = list
            .doc_ids()
            .skip(range.first - 1)
            .take(range.last - range.first + 1)
            .collect();
        let mut relevant = 0usize;
        for id in &window {
            match judgments.get(*id) {
                Some(true) => relevant += 1,
                Some(false) => {}
                None => {
                    missing.insert((*id).to_owned());
                }
            }
        }
        rows.push(PrecisionRow {
            range,
            judged: window.len(),
            precision: (!window.is_empty()).then(|| relevant as f64 / window.len() as f64),
        });
    }
    if !missing.is_empty() {
        return Err(Error::MissingJudgments(missing.into_iter().collect()));
    }
    Ok(rows)
}

/// `doc_id<TAB>0|1` lines.
pub fn read_judgments<R: BufRead>(reader: R) -> Result<HashMap<String, bool>> {
    const WHAT: &str = "judgments";
    let mut lines = tsv::Lines::new(reader, WHAT);
    let mut out = HashMap::new();
    while let Some((n, rec)) = lines.next_record()? {
        if rec[0].starts_with('#') {
            continue;
        }
        let relevant = match rec.get(1).map(|s| s.trim()) {
            Some("1") => true,
            Some("0") => false,
            _ => return Err(Error::format(WHAT, n, "expected doc_id<TAB>0|1")),
        };
        out.insert(rec[0].clone(), relevant);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// MAP per system, in system order.
    pub map: Vec<(String, f64)>,
    /// `n_d` over the biased systems, sorted descending (plot data).
    pub nd_series: Vec<(String, f64)>,
    /// Condorcet wins of the candidates in Condorcet order (plot data).
    pub wins_series: Vec<(String, usize)>,
    pub precision: Vec<(String, Vec<PrecisionRow>)>,
}

impl EvalReport {
    pub fn new(systems: &SystemSet, rels: &PseudorelSet) -> Result<Self> {
        let map = systems
            .systems()
            .iter()
            .map(|s| Ok((s.system_id().to_owned(), map_score(s, rels)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut nd_series: Vec<(String, f64)> = norm_weights(&systems.biased_set()).into_iter().collect();
        nd_series.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let wins_series = rels
            .condorcet_order()
            .iter()
            .map(|e| (e.doc_id.clone(), e.wins))
            .collect();
        Ok(EvalReport {
            map,
            nd_series,
            wins_series,
            precision: Vec::new(),
        })
    }

    pub fn best_system(&self) -> Option<&(String, f64)> {
        self.map
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
    }

    /// `system_id<TAB>MAP`.
    pub fn write_map_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "system_id\tMAP")?;
        for (id, map) in &self.map {
            writeln!(w, "{id}\t{map}")?;
        }
        Ok(())
    }

    pub fn write_nd_series<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "rank\tdoc_id\tn_d")?;
        for (i, (id, nd)) in self.nd_series.iter().enumerate() {
            writeln!(w, "{}\t{id}\t{nd}", i + 1)?;
        }
        Ok(())
    }

    pub fn write_wins_series<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "rank\tdoc_id\twins")?;
        for (i, (id, wins)) in self.wins_series.iter().enumerate() {
            writeln!(w, "{}\t{id}\t{wins}", i + 1)?;
        }
        Ok(())
    }
}

/// `system_id<TAB>first<TAB>last<TAB>judged<TAB>precision` with `NA` for
/// windows past the end of the list.
pub fn write_precision_tsv<W: Write>(rows: &[(String, Vec<PrecisionRow>)], mut w: W) -> Result<()> {
    writeln!(w, "system_id\tfirst\tlast\tjudged\tprecision")?;
    for (id, table) in rows {
        for row in table {
            let p = row.precision.map_or_else(|| "NA".to_owned(), |p| p.to_string());
            writeln!(w, "{id}\t{}\t{}\t{}\t{p}", row.range.first, row.range.last, row.judged)?;
        }
    }
    Ok(())
}
