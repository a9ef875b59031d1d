//! Seeded synthetic corpora with planted structure, for tests, benchmarks
//! and demonstration runs.
//!
//! Terms are named by role: `ta..`/`tb..` are topic terms of two planted
//! topics, grouped into clusters that co-occur within sentences; `f...` are
//! filler words that never appear in a reference collection; `eng..` forms
//! a junk vocabulary that a topic model isolates into its own topic.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, CorpusRole, Document, Sentence};
use crate::error::Result;

const CLUSTERS_PER_TOPIC: usize = 4;
const CLUSTER_SIZE: usize = 5;
const TERMS_PER_SENTENCE: usize = 3;
const FILLER_WORDS: usize = 200;

fn topic_terms(prefix: &str) -> Vec<Vec<String>> {
    (0..CLUSTERS_PER_TOPIC)
        .map(|c| {
            (0..CLUSTER_SIZE)
                .map(|i| format!("{prefix}{:02}", c * CLUSTER_SIZE + i))
                .collect()
        })
        .collect()
}

fn filler(i: usize) -> String {
    format!("f{i:03}")
}

fn cluster_sentence(rng: &mut ChaCha8Rng, cluster: &[String]) -> Sentence {
    let mut picked: Vec<String> = cluster.to_vec();
    picked.shuffle(rng);
    picked.truncate(TERMS_PER_SENTENCE);
    picked
}

fn corpus(docs: Vec<Document>, role: CorpusRole) -> Corpus {
    Corpus::from_documents(docs, role).expect("generated ids are unique and non-empty")
}

/// Reference, generic and target corpora with known relevance labels.
#[derive(Debug, Clone)]
pub struct PlantedFixture {
    pub reference: Corpus,
    pub generic: Corpus,
    pub target: Corpus,
    /// Documents whose topic terms appear in reference-like sentence contexts.
    pub relevant: BTreeSet<String>,
    /// Same token multiset as a relevant document, but every topic term
    /// sits alone in its sentence.
    pub decoys: BTreeSet<String>,
}

impl PlantedFixture {
    /// Writes `reference.jsonl`, `generic.jsonl`, `target.jsonl` and
    /// `relevant.txt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        self.reference.save_jsonl(&dir.join("reference.jsonl"))?;
        self.generic.save_jsonl(&dir.join("generic.jsonl"))?;
        self.target.save_jsonl(&dir.join("target.jsonl"))?;
        let labels: String = self.relevant.iter().map(|id| format!("{id}\n")).collect();
        std::fs::write(dir.join("relevant.txt"), labels)?;
        Ok(())
    }
}

/// Builds the planted-relevance fixture: 20 reference documents over two
/// topics, 100 generic documents mixing topic terms at random, and a target
/// of 10 relevant documents, 10 decoys and 80 background documents.
pub fn planted_fixture(seed: u64) -> PlantedFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topics = [topic_terms("ta"), topic_terms("tb")];
    let all_topic_terms: Vec<String> = topics.iter().flatten().flatten().cloned().collect();

    let mut reference = Vec::new();
    for (t, clusters) in topics.iter().enumerate() {
        for d in 0..10 {
            let sentences = (0..30)
                .map(|_| {
                    let c = rng.random_range(0..clusters.len());
                    cluster_sentence(&mut rng, &clusters[c])
                })
                .collect();
            reference.push(Document::new(format!("ref{t}{d:02}"), sentences));
        }
    }

    let mut generic = Vec::new();
    for d in 0..100 {
        let sentences = (0..10)
            .map(|_| {
                let mut s: Sentence = (0..2)
                    .map(|_| all_topic_terms[rng.random_range(0..all_topic_terms.len())].clone())
                    .collect();
                s.extend((0..4).map(|_| filler(rng.random_range(0..FILLER_WORDS))));
                s.shuffle(&mut rng);
                s
            })
            .collect();
        generic.push(Document::new(format!("gen{d:03}"), sentences));
    }

    let mut ids: Vec<String> = (0..100).map(|i| format!("doc{i:03}")).collect();
    ids.shuffle(&mut rng);
    let mut ids = ids.into_iter();
    let mut target = Vec::new();
    let mut relevant = BTreeSet::new();
    let mut decoys = BTreeSet::new();

    for r in 0..10 {
        let clusters = &topics[r % 2];
        let mut sentences = Vec::new();
        for _ in 0..8 {
            let c = rng.random_range(0..clusters.len());
            let mut s = cluster_sentence(&mut rng, &clusters[c]);
            s.extend((0..3).map(|_| filler(rng.random_range(0..FILLER_WORDS))));
            s.shuffle(&mut rng);
            sentences.push(s);
        }

        let (topic_tokens, filler_tokens): (Vec<String>, Vec<String>) = sentences
            .iter()
            .flatten()
            .cloned()
            .partition(|t| !t.starts_with('f'));
        let mut decoy: Vec<Sentence> = topic_tokens.into_iter().map(|t| vec![t]).collect();
        let slots = decoy.len();
        for (i, f) in filler_tokens.into_iter().enumerate() {
            decoy[i % slots].push(f);
        }
        decoy.shuffle(&mut rng);

        let rel_id = ids.next().expect("100 ids");
        let decoy_id = ids.next().expect("100 ids");
        target.push(Document::new(rel_id.clone(), sentences));
        target.push(Document::new(decoy_id.clone(), decoy));
        relevant.insert(rel_id);
        decoys.insert(decoy_id);
    }

    for _ in 0..80 {
        let mut sentences: Vec<Sentence> = (0..8)
            .map(|_| (0..6).map(|_| filler(rng.random_range(0..FILLER_WORDS))).collect())
            .collect();
        for _ in 0..rng.random_range(0..=2) {
            let s = rng.random_range(0..sentences.len());
            let term = all_topic_terms[rng.random_range(0..all_topic_terms.len())].clone();
            sentences[s].push(term);
        }
        target.push(Document::new(ids.next().expect("100 ids"), sentences));
    }
    target.sort_by(|a, b| a.id().cmp(b.id()));

    PlantedFixture {
        reference: corpus(reference, CorpusRole::Reference),
        generic: corpus(generic, CorpusRole::Generic),
        target: corpus(target, CorpusRole::Target),
        relevant,
        decoys,
    }
}

/// Twenty documents, each drawn from exactly one of two disjoint
/// vocabularies `a00..a09` and `b00..b09`.
pub fn two_vocabulary_corpus(seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::new();
    for (v, prefix) in ["a", "b"].into_iter().enumerate() {
        for d in 0..10 {
            let sentences = (0..10)
                .map(|_| (0..5).map(|_| format!("{prefix}{:02}", rng.random_range(0..10))).collect())
                .collect();
            docs.push(Document::new(format!("v{v}d{d:02}"), sentences));
        }
    }
    corpus(docs, CorpusRole::Reference)
}

/// Reference collection with two planted topics plus five documents of a
/// junk vocabulary `eng00..eng14` (standing in for an English bibliography).
pub fn junk_topic_reference(seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topics = [topic_terms("ta"), topic_terms("tb")];
    let mut docs = Vec::new();
    for (t, clusters) in topics.iter().enumerate() {
        for d in 0..10 {
            let sentences = (0..20)
                .map(|_| {
                    let c = rng.random_range(0..clusters.len());
                    cluster_sentence(&mut rng, &clusters[c])
                })
                .collect();
            docs.push(Document::new(format!("ref{t}{d:02}"), sentences));
        }
    }
    for d in 0..5 {
        let sentences = (0..40)
            .map(|_| (0..4).map(|_| format!("eng{:02}", rng.random_range(0..15))).collect())
            .collect();
        docs.push(Document::new(format!("bib{d}"), sentences));
    }
    corpus(docs, CorpusRole::Reference)
}

/// Uniformly random corpus over `w000..` for property tests.
pub fn random_corpus(seed: u64, documents: usize, vocabulary: usize, role: CorpusRole) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let docs = (0..documents.max(1))
        .map(|d| {
            let n_sentences = rng.random_range(1..=8);
            let sentences = (0..n_sentences)
                .map(|_| {
                    let len = rng.random_range(1..=10);
                    (0..len)
                        .map(|_| format!("w{:03}", rng.random_range(0..vocabulary.max(1))))
                        .collect()
                })
                .collect();
            Document::new(format!("{}{d:04}", role.as_str()), sentences)
        })
        .collect();
    corpus(docs, role)
}
