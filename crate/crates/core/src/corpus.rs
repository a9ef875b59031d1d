//! Corpus ingestion and frequency statistics.
//!
//! Documents are held as ordered sentences of tokens. Two input formats are
//! accepted: pre-segmented JSONL (the canonical interchange format, one
//! `{"id", "sentences"}` record per line) and a directory of `.txt` files
//! which are segmented and tokenized with a simple language-neutral rule set.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorpusRole {
    Reference,
    Generic,
    Target,
}

impl CorpusRole {
    pub fn as_str(self) -> &'static str {
        match self {
            CorpusRole::Reference => "reference",
            CorpusRole::Generic => "generic",
            CorpusRole::Target => "target",
        }
    }
}

impl fmt::Display for CorpusRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorpusRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(CorpusRole::Reference),
            "generic" => Ok(CorpusRole::Generic),
            "target" => Ok(CorpusRole::Target),
            other => Err(Error::param("role", format!("unknown corpus role `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Jsonl,
    PlaintextDir,
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(InputFormat::Jsonl),
            "plaintext-dir" | "plaintext" | "txt" => Ok(InputFormat::PlaintextDir),
            other => Err(Error::param("format", format!("unknown input format `{other}`"))),
        }
    }
}

impl InputFormat {
    /// Directories are read as plaintext, anything else as JSONL.
    pub fn detect(path: &Path) -> Self {
        if path.is_dir() {
            InputFormat::PlaintextDir
        } else {
            InputFormat::Jsonl
        }
    }
}

pub type Sentence = Vec<String>;

/// A document as ordered, non-empty sentences of non-empty tokens.
///
/// `paragraphs`, when present, groups sentence indices into paragraphs; the
/// topic model treats each paragraph as its own modeling unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    id: String,
    sentences: Vec<Sentence>,
    paragraphs: Option<Vec<Vec<usize>>>,
}

impl Document {
    /// Builds a document, dropping empty tokens and empty sentences.
    pub fn new(id: impl Into<String>, sentences: Vec<Sentence>) -> Self {
        Self::with_paragraphs(id, sentences, None)
            .expect("documents without paragraphs are always valid")
    }

    pub fn with_paragraphs(
        id: impl Into<String>,
        sentences: Vec<Sentence>,
        paragraphs: Option<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        let id = id.into();
        let original_len = sentences.len();
        let mut remap = vec![None; original_len];
        let mut kept = Vec::with_capacity(original_len);
        for (i, sentence) in sentences.into_iter().enumerate() {
            let tokens: Sentence = sentence.into_iter().filter(|t| !t.is_empty()).collect();
            if !tokens.is_empty() {
                remap[i] = Some(kept.len());
                kept.push(tokens);
            }
        }
        let paragraphs = match paragraphs {
            None => None,
            Some(groups) => {
                let mut out = Vec::with_capacity(groups.len());
                for group in groups {
                    let mut mapped = Vec::with_capacity(group.len());
                    for idx in group {
                        let slot = remap.get(idx).ok_or_else(|| {
                            Error::param(
                                "paragraphs",
                                format!(
                                    "document `{id}`: sentence index {idx} out of range (0..{original_len})"
                                ),
                            )
                        })?;
                        if let Some(new_idx) = slot {
                            mapped.push(*new_idx);
                        }
                    }
                    if !mapped.is_empty() {
                        out.push(mapped);
                    }
                }
                Some(out)
            }
        };
        Ok(Document {
            id,
            sentences: kept,
            paragraphs,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn paragraphs(&self) -> Option<&[Vec<usize>]> {
        self.paragraphs.as_deref()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flatten().map(String::as_str)
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    /// Modeling units for the topic model: one token sequence per paragraph
    /// when paragraph markers exist, otherwise the whole document.
    pub fn modeling_units(&self) -> Vec<Vec<&str>> {
        match &self.paragraphs {
            Some(groups) if !groups.is_empty() => groups
                .iter()
                .map(|g| {
                    g.iter()
                        .flat_map(|&i| self.sentences[i].iter().map(String::as_str))
                        .collect()
                })
                .collect(),
            _ => vec![self.tokens().collect()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    vocabulary: BTreeSet<String>,
    role: CorpusRole,
}

impl Corpus {
    pub fn from_documents(documents: Vec<Document>, role: CorpusRole) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut seen = HashSet::with_capacity(documents.len());
        let mut vocabulary = BTreeSet::new();
        for doc in &documents {
            if !seen.insert(doc.id()) {
                return Err(Error::DuplicateId(doc.id().to_owned()));
            }
            for token in doc.tokens() {
                if !vocabulary.contains(token) {
                    vocabulary.insert(token.to_owned());
                }
            }
        }
        Ok(Corpus {
            documents,
            vocabulary,
            role,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn vocabulary(&self) -> &BTreeSet<String> {
        &self.vocabulary
    }

    pub fn role(&self) -> CorpusRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn with_role(mut self, role: CorpusRole) -> Self {
        self.role = role;
        self
    }

    /// Concatenates two corpora; document ids must stay unique.
    pub fn merge(&self, other: &Corpus) -> Result<Corpus> {
        let docs = self
            .documents
            .iter()
            .chain(other.documents.iter())
            .cloned()
            .collect();
        Corpus::from_documents(docs, self.role)
    }

    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        for doc in &self.documents {
            let record = RecordRef {
                id: &doc.id,
                sentences: &doc.sentences,
                paragraphs: doc.paragraphs.as_deref(),
            };
            serde_json::to_writer(&mut writer, &record)
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|source| Error::Write {
            path: path.to_owned(),
            source,
        })?;
        let mut writer = std::io::BufWriter::new(file);
        self.write_jsonl(&mut writer)?;
        writer.flush().map_err(|source| Error::Write {
            path: path.to_owned(),
            source,
        })
    }
}

#[derive(Deserialize)]
struct Record {
    id: String,
    sentences: Vec<Vec<String>>,
    #[serde(default)]
    paragraphs: Option<Vec<Vec<usize>>>,
}

#[derive(Serialize)]
struct RecordRef<'a> {
    id: &'a str,
    sentences: &'a [Sentence],
    #[serde(skip_serializing_if = "Option::is_none")]
    paragraphs: Option<&'a [Vec<usize>]>,
}

/// Reads pre-segmented JSONL. Blank lines are skipped; record indices in
/// errors are 1-based line numbers.
pub fn read_jsonl<R: BufRead>(reader: R, role: CorpusRole) -> Result<Corpus> {
    let mut documents = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            index: i + 1,
            message: e.to_string(),
        })?;
        let doc = Document::with_paragraphs(record.id, record.sentences, record.paragraphs)
            .map_err(|e| Error::MalformedRecord {
                index: i + 1,
                message: e.to_string(),
            })?;
        documents.push(doc);
    }
    Corpus::from_documents(documents, role)
}

pub fn ingest_corpus(path: &Path, format: InputFormat, role: CorpusRole) -> Result<Corpus> {
    match format {
        InputFormat::Jsonl => {
            let file = fs::File::open(path).map_err(|source| Error::Read {
                path: path.to_owned(),
                source,
            })?;
            read_jsonl(BufReader::new(file), role)
        }
        InputFormat::PlaintextDir => ingest_plaintext_dir(path, role),
    }
}

/// One document per `.txt` file (id = file stem), files taken in name order.
fn ingest_plaintext_dir(dir: &Path, role: CorpusRole) -> Result<Corpus> {
    let read_err = |source| Error::Read {
        path: dir.to_owned(),
        source,
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(read_err)? {
        let path = entry.map_err(read_err)?.path();
        if path.is_file() && path.extension().is_some_and(|ext| ext == "txt") {
            files.push(path);
        }
    }
    files.sort();
    let mut documents = Vec::with_capacity(files.len());
    for path in files {
        let mut text = String::new();
        fs::File::open(&path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|source| Error::Read {
                path: path.clone(),
                source,
            })?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        documents.push(document_from_text(id, &text));
    }
    Corpus::from_documents(documents, role)
}

/// Segments and tokenizes raw text. Blank lines mark paragraph boundaries;
/// paragraph groups are only recorded when there is more than one.
pub fn document_from_text(id: impl Into<String>, text: &str) -> Document {
    let mut sentences = Vec::new();
    let mut paragraphs = Vec::new();
    for block in split_paragraphs(text) {
        let mut group = Vec::new();
        for sentence in segment_sentences(block) {
            let tokens = tokenize(sentence);
            if !tokens.is_empty() {
                group.push(sentences.len());
                sentences.push(tokens);
            }
        }
        if !group.is_empty() {
            paragraphs.push(group);
        }
    }
    let paragraphs = (paragraphs.len() > 1).then_some(paragraphs);
    Document::with_paragraphs(id, sentences, paragraphs)
        .expect("paragraph indices are generated in range")
}

fn split_paragraphs(text: &str) -> Vec<&str> {
    let mut blocks = Vec::new();
    let mut start = 0;
    let mut offset = 0;
    let mut blank_run = false;
    for line in text.split_inclusive('\n') {
        let is_blank = line.trim().is_empty();
        if is_blank && !blank_run && offset > start {
            blocks.push(&text[start..offset]);
        }
        offset += line.len();
        if is_blank {
            start = offset;
        }
        blank_run = is_blank;
    }
    if start < text.len() {
        blocks.push(&text[start..]);
    }
    blocks
}

/// Splits on `.`, `!` or `?` followed by whitespace or end of input.
pub fn segment_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let at_boundary = match chars.peek() {
                None => true,
                Some((_, next)) => next.is_whitespace(),
            };
            if at_boundary {
                let end = i + c.len_utf8();
                out.push(&text[start..end]);
                start = end;
            }
        }
    }
    if start < text.len() {
        out.push(&text[start..]);
    }
    out
}

/// Lowercased runs of Unicode alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Corpus-wide, per-document and per-sentence frequency statistics.
#[derive(Debug, Clone)]
pub struct TermStats {
    tf: HashMap<String, u64>,
    df: HashMap<String, u64>,
    doc_tf: Vec<HashMap<String, u64>>,
    doc_tokens: Vec<u64>,
    total_tokens: u64,
}

impl TermStats {
    pub fn new(corpus: &Corpus) -> Self {
        let mut tf: HashMap<String, u64> = HashMap::new();
        let mut df: HashMap<String, u64> = HashMap::new();
        let mut doc_tf = Vec::with_capacity(corpus.len());
        let mut doc_tokens = Vec::with_capacity(corpus.len());
        for doc in corpus.documents() {
            let mut counts: HashMap<String, u64> = HashMap::new();
            for token in doc.tokens() {
                *counts.entry(token.to_owned()).or_default() += 1;
            }
            for (term, count) in &counts {
                *tf.entry(term.clone()).or_default() += count;
                *df.entry(term.clone()).or_default() += 1;
            }
            doc_tokens.push(doc.token_count() as u64);
            doc_tf.push(counts);
        }
        let total_tokens = doc_tokens.iter().sum();
        TermStats {
            tf,
            df,
            doc_tf,
            doc_tokens,
            total_tokens,
        }
    }

    pub fn num_docs(&self) -> usize {
        self.doc_tf.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Corpus-wide token count of `term`.
    pub fn tf(&self, term: &str) -> u64 {
        self.tf.get(term).copied().unwrap_or(0)
    }

    pub fn df(&self, term: &str) -> u64 {
        self.df.get(term).copied().unwrap_or(0)
    }

    /// Count of `term` in the document at position `doc`.
    pub fn doc_tf(&self, doc: usize, term: &str) -> u64 {
        self.doc_tf[doc].get(term).copied().unwrap_or(0)
    }

    /// Term counts of the document at position `doc`; the keys are `U_d`.
    pub fn doc_terms(&self, doc: usize) -> &HashMap<String, u64> {
        &self.doc_tf[doc]
    }

    pub fn unique_terms(&self, doc: usize) -> usize {
        self.doc_tf[doc].len()
    }

    pub fn doc_tokens(&self, doc: usize) -> u64 {
        self.doc_tokens[doc]
    }
}

pub fn term_stats(corpus: &Corpus) -> TermStats {
    TermStats::new(corpus)
}

/// Occurrences of `term` in one sentence.
pub fn sentence_tf(sentence: &[String], term: &str) -> u64 {
    sentence.iter().filter(|t| *t == term).count() as u64
}
