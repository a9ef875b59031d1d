//! Domain-specific retrieval with contextualized dictionaries.
//!
//! A dictionary of domain terms is extracted from a reference collection
//! (topic-model or tf-idf weighting), each term is contextualized with
//! co-occurrence statistics filtered against a generic collection, and a
//! target collection is ranked by a pivoted-normalized score that blends
//! term frequency with sentence-level context similarity. Evaluation needs
//! no relevance judgments: pseudo-relevant documents are fused from biased
//! systems with a Condorcet vote and used to compute MAP.

pub mod cooc;
pub mod corpus;
pub mod dictionary;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod retrieval;
pub mod scoring;
pub mod synthetic;
pub mod topics;
mod tsv;

pub use cooc::{build_cooc, filter_cooc, CoocMatrix, Provenance};
pub use corpus::{ingest_corpus, Corpus, CorpusRole, Document, InputFormat, TermStats};
pub use dictionary::{extract_dictionary_tfidf, extract_dictionary_tm, DictEntry, Dictionary, DictionaryMethod};
pub use error::{Error, Result};
pub use eval::{
    condorcet_rank, generate_sweep, map_score, precision_at_ranges, select_pseudorels, EvalReport, PseudorelSet,
    RankRange, SystemSet,
};
pub use pipeline::{run_pipeline, PipelineConfig, StageError};
pub use retrieval::{rank_collection, RankedEntry, RankedList};
pub use scoring::{score_context, score_dict, ScoringConfig, ScoringMode};
pub use topics::{exclude_topics, fit_lda, LdaParams, TopicModelResult};
