//! LDA topic model fitted by collapsed Gibbs sampling, plus analyst-driven
//! topic exclusion.
//!
//! Topic numbers in the public API are 1-based (`1..=K`), matching what an
//! analyst sees in `inspect-topics` output.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::tsv;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdaParams {
    pub topics: usize,
    /// Symmetric document-topic prior.
    pub alpha: f64,
    /// Symmetric topic-word prior.
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaParams {
    /// Conventional defaults: alpha = 50/K, beta = 0.01, 1000 sweeps.
    pub fn new(topics: usize) -> Self {
        LdaParams {
            topics,
            alpha: 50.0 / topics.max(1) as f64,
            beta: 0.01,
            iterations: 1000,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.topics == 0 {
            return Err(Error::param("topics", "K must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(Error::param("iterations", "at least one sweep is required"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::param("alpha_lda", "must be a positive real"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::param("beta", "must be a positive real"));
        }
        Ok(())
    }
}

/// Collapsed Gibbs sampler state. Exposed so callers can step sweeps and
/// inspect counts; [`fit_lda`] is the usual entry point.
pub struct LdaSampler {
    params: LdaParams,
    vocabulary: Vec<String>,
    units: Vec<Vec<usize>>,
    assignments: Vec<Vec<usize>>,
    unit_topic: Vec<Vec<u32>>,
    topic_word: Vec<u32>,
    topic_total: Vec<u64>,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
}

impl LdaSampler {
    pub fn new(corpus: &Corpus, params: LdaParams) -> Result<Self> {
        params.validate()?;
        let vocabulary: Vec<String> = corpus.vocabulary().iter().cloned().collect();
        let index: HashMap<&str, usize> = vocabulary
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), i))
            .collect();
        let units: Vec<Vec<usize>> = corpus
            .documents()
            .iter()
            .flat_map(|d| d.modeling_units())
            .map(|unit| unit.into_iter().map(|t| index[t]).collect::<Vec<_>>())
            .filter(|unit: &Vec<usize>| !unit.is_empty())
            .collect();
        if units.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let k = params.topics;
        let v = vocabulary.len();
        if k > v {
            log::warn!("K={k} exceeds vocabulary size {v}; some topics will stay near-empty");
        }

        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut unit_topic = vec![vec![0u32; k]; units.len()];
        let mut topic_word = vec![0u32; k * v];
        let mut topic_total = vec![0u64; k];
        let mut assignments = Vec::with_capacity(units.len());
        for (u, unit) in units.iter().enumerate() {
            let mut z = Vec::with_capacity(unit.len());
            for &w in unit {
                let topic = rng.random_range(0..k);
                unit_topic[u][topic] += 1;
                topic_word[topic * v + w] += 1;
                topic_total[topic] += 1;
                z.push(topic);
            }
            assignments.push(z);
        }

        Ok(LdaSampler {
            params,
            vocabulary,
            units,
            assignments,
            unit_topic,
            topic_word,
            topic_total,
            rng,
            weights: vec![0.0; k],
        })
    }

    /// One full pass resampling every token's topic.
    pub fn sweep(&mut self) {
        let k = self.params.topics;
        let v = self.vocabulary.len();
        let alpha = self.params.alpha;
        let beta = self.params.beta;
        let v_beta = v as f64 * beta;
        for u in 0..self.units.len() {
            for i in 0..self.units[u].len() {
                let w = self.units[u][i];
                let old = self.assignments[u][i];
                self.unit_topic[u][old] -= 1;
                self.topic_word[old * v + w] -= 1;
                self.topic_total[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let p = (self.unit_topic[u][t] as f64 + alpha)
                        * (self.topic_word[t * v + w] as f64 + beta)
                        / (self.topic_total[t] as f64 + v_beta);
                    total += p;
                    self.weights[t] = total;
                }
                let draw = self.rng.random::<f64>() * total;
                let new = self
                    .weights
                    .iter()
                    .position(|&c| draw < c)
                    .unwrap_or(k - 1);

                self.assignments[u][i] = new;
                self.unit_topic[u][new] += 1;
                self.topic_word[new * v + w] += 1;
                self.topic_total[new] += 1;
            }
        }
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn topic_word_count(&self, topic: usize, word: usize) -> u32 {
        self.topic_word[topic * self.vocabulary.len() + word]
    }

    /// `sum_k count(k, w)` for every word id.
    pub fn word_totals(&self) -> Vec<u64> {
        let v = self.vocabulary.len();
        let mut totals = vec![0u64; v];
        for t in 0..self.params.topics {
            for (w, total) in totals.iter_mut().enumerate() {
                *total += self.topic_word[t * v + w] as u64;
            }
        }
        totals
    }

    pub fn into_result(self) -> TopicModelResult {
        let k = self.params.topics;
        let v = self.vocabulary.len();
        let beta = self.params.beta;
        let tokens: u64 = self.topic_total.iter().sum();
        let phi = (0..k)
            .map(|t| {
                let denom = self.topic_total[t] as f64 + v as f64 * beta;
                (0..v)
                    .map(|w| (self.topic_word[t * v + w] as f64 + beta) / denom)
                    .collect()
            })
            .collect();
        let topic_weight = self
            .topic_total
            .iter()
            .map(|&n| n as f64 / tokens as f64)
            .collect();
        TopicModelResult::from_parts(
            self.vocabulary,
            phi,
            topic_weight,
            BTreeSet::new(),
            self.params,
        )
    }
}

pub fn fit_lda(corpus: &Corpus, params: LdaParams) -> Result<TopicModelResult> {
    let mut sampler = LdaSampler::new(corpus, params)?;
    for _ in 0..params.iterations {
        sampler.sweep();
    }
    Ok(sampler.into_result())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModelResult {
    vocabulary: Vec<String>,
    term_index: HashMap<String, usize>,
    phi: Vec<Vec<f64>>,
    topic_weight: Vec<f64>,
    excluded: BTreeSet<usize>,
    params: LdaParams,
}

impl TopicModelResult {
    fn from_parts(
        vocabulary: Vec<String>,
        phi: Vec<Vec<f64>>,
        topic_weight: Vec<f64>,
        excluded: BTreeSet<usize>,
        params: LdaParams,
    ) -> Self {
        let term_index = vocabulary
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        TopicModelResult {
            vocabulary,
            term_index,
            phi,
            topic_weight,
            excluded,
            params,
        }
    }

    pub fn num_topics(&self) -> usize {
        self.phi.len()
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn params(&self) -> &LdaParams {
        &self.params
    }

    /// `p(w|z_k)` row for 1-based topic `k`.
    pub fn phi(&self, topic: usize) -> Result<&[f64]> {
        self.check_topic(topic)?;
        Ok(&self.phi[topic - 1])
    }

    pub fn topic_weights(&self) -> &[f64] {
        &self.topic_weight
    }

    pub fn excluded(&self) -> &BTreeSet<usize> {
        &self.excluded
    }

    pub fn is_excluded(&self, topic: usize) -> bool {
        self.excluded.contains(&topic)
    }

    pub fn term_id(&self, term: &str) -> Option<usize> {
        self.term_index.get(term).copied()
    }

    /// `p(w|z_k)` for every 1-based topic not excluded.
    pub fn retained_probabilities(&self, term: &str) -> Result<Vec<f64>> {
        let id = self
            .term_id(term)
            .ok_or_else(|| Error::UnknownTerm(term.to_owned()))?;
        Ok((1..=self.num_topics())
            .filter(|k| !self.is_excluded(*k))
            .map(|k| self.phi[k - 1][id])
            .collect())
    }

    fn check_topic(&self, topic: usize) -> Result<()> {
        if topic == 0 || topic > self.num_topics() {
            Err(Error::TopicOutOfRange {
                topic,
                k: self.num_topics(),
            })
        } else {
            Ok(())
        }
    }

    /// Writes the model as TSV: a header block of `key<TAB>value` lines,
    /// the vocabulary line, then one `phi<TAB>k<TAB>p...` row per topic.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        let excluded: Vec<String> = self.excluded.iter().map(usize::to_string).collect();
        writeln!(w, "refdict-topic-model\t1")?;
        writeln!(w, "K\t{}", self.num_topics())?;
        writeln!(w, "V\t{}", self.vocabulary.len())?;
        writeln!(w, "alpha\t{}", self.params.alpha)?;
        writeln!(w, "beta\t{}", self.params.beta)?;
        writeln!(w, "iterations\t{}", self.params.iterations)?;
        writeln!(w, "seed\t{}", self.params.seed)?;
        writeln!(w, "excluded\t{}", excluded.join(","))?;
        write!(w, "weight")?;
        for p in &self.topic_weight {
            write!(w, "\t{p}")?;
        }
        writeln!(w)?;
        write!(w, "vocab")?;
        for term in &self.vocabulary {
            tsv::check_field(term)?;
            write!(w, "\t{term}")?;
        }
        writeln!(w)?;
        for (k, row) in self.phi.iter().enumerate() {
            write!(w, "phi\t{}", k + 1)?;
            for p in row {
                write!(w, "\t{p}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        const WHAT: &str = "topic model";
        let mut lines = tsv::Lines::new(reader, WHAT);
        let (n, magic) = lines.expect_record()?;
        if magic.first().map(String::as_str) != Some("refdict-topic-model") {
            return Err(Error::format(WHAT, n, "missing `refdict-topic-model` header"));
        }
        let mut field = |key: &str| -> Result<(usize, String)> {
            let (n, rec) = lines.expect_record()?;
            if rec.len() != 2 || rec[0] != key {
                return Err(Error::format(WHAT, n, format!("expected `{key}<TAB>value`")));
            }
            Ok((n, rec[1].clone()))
        };
        let k: usize = tsv::parse(WHAT, field("K")?)?;
        let v: usize = tsv::parse(WHAT, field("V")?)?;
        let alpha: f64 = tsv::parse(WHAT, field("alpha")?)?;
        let beta: f64 = tsv::parse(WHAT, field("beta")?)?;
        let iterations: usize = tsv::parse(WHAT, field("iterations")?)?;
        let seed: u64 = tsv::parse(WHAT, field("seed")?)?;
        let (n_ex, ex) = field("excluded")?;
        let mut excluded = BTreeSet::new();
        for part in ex.split(',').filter(|p| !p.is_empty()) {
            let topic: usize = tsv::parse(WHAT, (n_ex, part.to_owned()))?;
            excluded.insert(topic);
        }

        let (n, rec) = lines.expect_record()?;
        if rec.first().map(String::as_str) != Some("weight") || rec.len() != k + 1 {
            return Err(Error::format(WHAT, n, format!("expected `weight` row with {k} values")));
        }
        let topic_weight = rec[1..]
            .iter()
            .map(|s| tsv::parse(WHAT, (n, s.clone())))
            .collect::<Result<Vec<f64>>>()?;

        let (n, rec) = lines.expect_record()?;
        if rec.first().map(String::as_str) != Some("vocab") || rec.len() != v + 1 {
            return Err(Error::format(WHAT, n, format!("expected `vocab` row with {v} terms")));
        }
        let vocabulary = rec[1..].to_vec();

        let mut phi = Vec::with_capacity(k);
        for topic in 1..=k {
            let (n, rec) = lines.expect_record()?;
            if rec.len() != v + 2 || rec[0] != "phi" || rec[1] != topic.to_string() {
                return Err(Error::format(WHAT, n, format!("expected `phi` row for topic {topic}")));
            }
            let row = rec[2..]
                .iter()
                .map(|s| tsv::parse(WHAT, (n, s.clone())))
                .collect::<Result<Vec<f64>>>()?;
            phi.push(row);
        }
        let params = LdaParams {
            topics: k,
            alpha,
            beta,
            iterations,
            seed,
        };
        let model = TopicModelResult::from_parts(vocabulary, phi, topic_weight, BTreeSet::new(), params);
        exclude_topics(&model, &excluded)
    }
}

/// Marks `ids` (1-based) as excluded; `phi` and weights are untouched.
pub fn exclude_topics(model: &TopicModelResult, ids: &BTreeSet<usize>) -> Result<TopicModelResult> {
    for &topic in ids {
        model.check_topic(topic)?;
    }
    let mut out = model.clone();
    out.excluded = ids.clone();
    Ok(out)
}

/// The `n` most probable terms of 1-based topic `k`, ties broken by term.
pub fn top_terms(model: &TopicModelResult, topic: usize, n: usize) -> Result<Vec<(String, f64)>> {
    let row = model.phi(topic)?;
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| {
        row[b]
            .total_cmp(&row[a])
            .then_with(|| model.vocabulary[a].cmp(&model.vocabulary[b]))
    });
    Ok(order
        .into_iter()
        .take(n)
        .map(|i| (model.vocabulary[i].clone(), row[i]))
        .collect())
}

/// `topic<TAB>rank<TAB>term<TAB>prob` rows for every topic.
pub fn write_top_terms_tsv<W: Write>(model: &TopicModelResult, n: usize, mut w: W) -> Result<()> {
    writeln!(w, "topic\trank\tterm\tprob")?;
    for topic in 1..=model.num_topics() {
        for (rank, (term, p)) in top_terms(model, topic, n)?.into_iter().enumerate() {
            writeln!(w, "{topic}\t{}\t{term}\t{p}", rank + 1)?;
        }
    }
    Ok(())
}
