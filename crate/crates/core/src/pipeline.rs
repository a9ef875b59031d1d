//! End-to-end orchestration with persisted artifacts.
//!
//! A run ingests the corpora, fits the topic model, extracts both
//! dictionaries, builds the reference, generic and filtered co-occurrence
//! matrices, ranks the target collection, runs the alpha sweep, fuses
//! pseudorels and writes MAP and plot series. Every artifact is written
//! with deterministic formatting, and `manifest.txt` is itself a valid
//! configuration file that reproduces the run.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::cooc::{build_cooc, filter_cooc, CoocMatrix};
use crate::corpus::{ingest_corpus, Corpus, CorpusRole, InputFormat, TermStats};
use crate::dictionary::{extract_dictionary_tfidf, extract_dictionary_tm, Dictionary};
use crate::error::{Error, Result};
use crate::eval::{
    default_alphas, precision_at_ranges, read_judgments, select_pseudorels, write_precision_tsv,
    EvalReport, RankRange, SweepInput, DEFAULT_FRACTION, DEFAULT_TOP_M, generate_sweep,
};
use crate::retrieval::{rank_collection, RankedList};
use crate::scoring::{ScoringConfig, ScoringMode, DEFAULT_SLOPE};
use crate::topics::{exclude_topics, fit_lda, write_top_terms_tsv, LdaParams, TopicModelResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST: &str = "manifest.txt";

/// Errors of a pipeline run, labeled with the failing stage.
#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}`: {source}")]
pub struct StageError {
    pub stage: &'static str,
    #[source]
    pub source: Error,
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError>;
}

impl<T> Stage<T> for Result<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// Parses `0:30:2` (inclusive range with step) or `0,2,4`.
pub fn parse_alphas(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::param("sweep", format!("`{text}` is neither START:END:STEP nor a comma list"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let (start, end, step) = (nums[0], nums[1], nums[2]);
        if step.is_nan() || step <= 0.0 || end < start {
            return Err(bad());
        }
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| start + step * i as f64).collect());
    }
    let alphas = text
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    if alphas.is_empty() {
        return Err(bad());
    }
    Ok(alphas)
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub reference: Option<PathBuf>,
    pub generic: Option<PathBuf>,
    pub target: Option<PathBuf>,
    /// `None` detects the format per path.
    pub format: Option<InputFormat>,
    pub output: PathBuf,
    pub topics: usize,
    /// Defaults to 50 / K when unset.
    pub lda_alpha: Option<f64>,
    pub lda_beta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub exclude: BTreeSet<usize>,
    pub dict_size: usize,
    pub slope: f64,
    pub mode: ScoringMode,
    pub alpha: f64,
    pub sweep: Vec<f64>,
    pub k: usize,
    pub top_m: usize,
    pub fraction: f64,
    /// Empty selects the default biased systems.
    pub biased: Vec<String>,
    pub judgments: Option<PathBuf>,
    pub ranges: Vec<RankRange>,
    pub top_terms: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            reference: None,
            generic: None,
            target: None,
            format: None,
            output: PathBuf::from("out"),
            topics: 20,
            lda_alpha: None,
            lda_beta: 0.01,
            iterations: 1000,
            seed: 0,
            exclude: BTreeSet::new(),
            dict_size: 500,
            slope: DEFAULT_SLOPE,
            mode: ScoringMode::Context,
            alpha: 14.0,
            sweep: default_alphas(),
            k: 2000,
            top_m: DEFAULT_TOP_M,
            fraction: DEFAULT_FRACTION,
            biased: Vec::new(),
            judgments: None,
            ranges: RankRange::defaults(),
            top_terms: 20,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &'static str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::param(key, format!("cannot parse `{value}`")))
}

fn optional_path(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl PipelineConfig {
    pub const KEYS: &'static [&'static str] = &[
        "reference", "generic", "target", "format", "output", "topics", "lda_alpha", "lda_beta",
        "iterations", "seed", "exclude", "dict_size", "slope", "mode", "alpha", "sweep", "k",
        "top_m", "fraction", "biased", "judgments", "ranges", "top_terms",
    ];

    /// Sets one key. Manifest bookkeeping keys (`refdict_version`,
    /// `input.*`, `output.*`) are accepted and ignored.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "reference" => self.reference = optional_path(value),
            "generic" => self.generic = optional_path(value),
            "target" => self.target = optional_path(value),
            "format" => {
                self.format = match value {
                    "" | "auto" => None,
                    v => Some(v.parse()?),
                }
            }
            "output" => self.output = PathBuf::from(value),
            "topics" => self.topics = parse_num("topics", value)?,
            "lda_alpha" => {
                self.lda_alpha = match value {
                    "" | "auto" => None,
                    v => Some(parse_num("lda_alpha", v)?),
                }
            }
            "lda_beta" => self.lda_beta = parse_num("lda_beta", value)?,
            "iterations" => self.iterations = parse_num("iterations", value)?,
            "seed" => self.seed = parse_num("seed", value)?,
            "exclude" => {
                self.exclude = value
                    .split(',')
                    .filter(|v| !v.trim().is_empty())
                    .map(|v| parse_num("exclude", v))
                    .collect::<Result<_>>()?
            }
            "dict_size" | "N" => self.dict_size = parse_num("dict_size", value)?,
            "slope" => self.slope = parse_num("slope", value)?,
            "mode" => self.mode = value.parse()?,
            "alpha" => self.alpha = parse_num("alpha", value)?,
            "sweep" => self.sweep = parse_alphas(value)?,
            "k" => self.k = parse_num("k", value)?,
            "top_m" => self.top_m = parse_num("top_m", value)?,
            "fraction" => self.fraction = parse_num("fraction", value)?,
            "biased" => {
                self.biased = value
                    .split(',')
                    .map(str::trim)
                    .filter(|v| !v.is_empty())
                    .map(str::to_owned)
                    .collect()
            }
            "judgments" => self.judgments = optional_path(value),
            "ranges" => {
                self.ranges = value
                    .split(',')
                    .filter(|v| !v.trim().is_empty())
                    .map(|v| v.trim().parse())
                    .collect::<Result<_>>()?
            }
            "top_terms" => self.top_terms = parse_num("top_terms", value)?,
            k if k == "refdict_version" || k.starts_with("input.") || k.starts_with("output.") => {}
            other => return Err(Error::Config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; `#` starts a comment line.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut config = PipelineConfig::default();
        config.apply_kv(text)?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_kv(&text)
    }

    fn path_value(p: &Option<PathBuf>) -> String {
        p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
    }

    /// Every key with its resolved value, in [`Self::KEYS`] order.
    pub fn to_kv(&self) -> String {
        let format = match self.format {
            None => "auto",
            Some(InputFormat::Jsonl) => "jsonl",
            Some(InputFormat::PlaintextDir) => "plaintext-dir",
        };
        let values = [
            Self::path_value(&self.reference),
            Self::path_value(&self.generic),
            Self::path_value(&self.target),
            format.to_owned(),
            self.output.display().to_string(),
            self.topics.to_string(),
            self.lda_alpha.map_or_else(|| "auto".to_owned(), |a| a.to_string()),
            self.lda_beta.to_string(),
            self.iterations.to_string(),
            self.seed.to_string(),
            join(&self.exclude),
            self.dict_size.to_string(),
            self.slope.to_string(),
            self.mode.to_string(),
            self.alpha.to_string(),
            join(&self.sweep),
            self.k.to_string(),
            self.top_m.to_string(),
            self.fraction.to_string(),
            self.biased.join(","),
            Self::path_value(&self.judgments),
            join(&self.ranges),
            self.top_terms.to_string(),
        ];
        Self::KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn lda_params(&self) -> LdaParams {
        let mut params = LdaParams::new(self.topics);
        if let Some(alpha) = self.lda_alpha {
            params.alpha = alpha;
        }
        params.beta = self.lda_beta;
        params.iterations = self.iterations;
        params.seed = self.seed;
        params
    }

    pub fn validate(&self) -> Result<()> {
        for (name, path) in [("reference", &self.reference), ("target", &self.target)] {
            match path {
                None => return Err(Error::Config(format!("{name} corpus path is required"))),
                Some(p) if !p.exists() => {
                    return Err(Error::Config(format!("{name} corpus {} does not exist", p.display())))
                }
                _ => {}
            }
        }
        if let Some(p) = &self.generic {
            if !p.exists() {
                return Err(Error::Config(format!("generic corpus {} does not exist", p.display())));
            }
        }
        if let Some(p) = &self.judgments {
            if !p.exists() {
                return Err(Error::Config(format!("judgments file {} does not exist", p.display())));
            }
        }
        if self.dict_size == 0 {
            return Err(Error::param("dict_size", "N must be at least 1"));
        }
        if self.k == 0 {
            return Err(Error::param("k", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    /// Paths relative to the output directory, in write order.
    pub artifacts: Vec<String>,
    pub best_system: Option<(String, f64)>,
    pub pseudorels: Option<usize>,
}

struct Artifacts<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Artifacts<'_> {
    fn write(&mut self, name: &str, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| Error::Write {
                path: parent.to_owned(),
                source,
            })?;
        }
        let file = fs::File::create(&path).map_err(|source| Error::Write {
            path: path.clone(),
            source,
        })?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush().map_err(|source| Error::Write { path, source })?;
        self.written.push(name.to_owned());
        Ok(())
    }
}

/// Hex SHA-256 of a file, or of every `.txt` file (name and content, in
/// name order) of a directory.
pub fn hash_input(path: &Path) -> Result<String> {
    let read = |p: &Path| {
        fs::read(p).map_err(|source| Error::Read {
            path: p.to_owned(),
            source,
        })
    };
    let mut hasher = Sha256::new();
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|source| Error::Read {
                path: path.to_owned(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        files.sort();
        for f in files {
            hasher.update(f.file_name().unwrap_or_default().to_string_lossy().as_bytes());
            hasher.update([0]);
            hasher.update(read(&f)?);
        }
    } else {
        hasher.update(read(path)?);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// File name for a system's ranked list, e.g. `tm_context_alpha=14.tsv`.
pub fn run_file_name(system_id: &str) -> String {
    format!("{}.tsv", system_id.replace(':', "_"))
}

fn load(path: &Path, format: Option<InputFormat>, role: CorpusRole) -> Result<Corpus> {
    ingest_corpus(path, format.unwrap_or_else(|| InputFormat::detect(path)), role)
}

pub fn run_pipeline(config: &PipelineConfig) -> std::result::Result<PipelineSummary, StageError> {
    config.validate().stage("config")?;
    let out = config.output.as_path();
    fs::create_dir_all(out)
        .map_err(|source| Error::Write {
            path: out.to_owned(),
            source,
        })
        .stage("config")?;
    let mut art = Artifacts {
        dir: out,
        written: Vec::new(),
    };
    let needs_context = config.mode.needs_matrix();
    if needs_context && config.generic.is_none() {
        return Err(Error::Config("generic corpus required for C′".into())).stage("build-cooc");
    }

    let reference_path = config.reference.as_deref().expect("validated");
    let target_path = config.target.as_deref().expect("validated");
    let reference = load(reference_path, config.format, CorpusRole::Reference).stage("ingest")?;
    let target = load(target_path, config.format, CorpusRole::Target).stage("ingest")?;
    let generic = config
        .generic
        .as_deref()
        .map(|p| load(p, config.format, CorpusRole::Generic))
        .transpose()
        .stage("ingest")?;

    let model = fit_lda(&reference, config.lda_params()).stage("fit-topics")?;
    let model = exclude_topics(&model, &config.exclude).stage("fit-topics")?;
    art.write("model.tsv", |w| model.write_tsv(w)).stage("fit-topics")?;
    art.write("topics.tsv", |w| write_top_terms_tsv(&model, config.top_terms, w))
        .stage("inspect-topics")?;

    let ref_stats = TermStats::new(&reference);
    let dict_tm = extract_dictionary_tm(&model, &ref_stats, config.dict_size).stage("extract-dict")?;
    art.write("dict_tm.tsv", |w| dict_tm.write_tsv(w)).stage("extract-dict")?;
    let dict_tfidf = extract_dictionary_tfidf(&reference, config.dict_size).stage("extract-dict")?;
    art.write("dict_tfidf.tsv", |w| dict_tfidf.write_tsv(w)).stage("extract-dict")?;

    let mut filtered: Vec<(Dictionary, CoocMatrix)> = Vec::new();
    if let Some(generic) = &generic {
        for dict in [&dict_tm, &dict_tfidf] {
            let label = dict.method().label();
            let c = build_cooc(&reference, dict).stage("build-cooc")?;
            let d = build_cooc(generic, dict).stage("build-cooc")?;
            let cf = filter_cooc(&c, &d).stage("filter-cooc")?;
            art.write(&format!("cooc_{label}_reference.tsv"), |w| c.write_tsv(w))
                .stage("build-cooc")?;
            art.write(&format!("cooc_{label}_generic.tsv"), |w| d.write_tsv(w))
                .stage("build-cooc")?;
            art.write(&format!("cooc_{label}_filtered.tsv"), |w| cf.write_tsv(w))
                .stage("filter-cooc")?;
            filtered.push((dict.clone(), cf));
        }
    }

    let scoring = ScoringConfig::new(config.slope, config.alpha, config.mode).stage("rank")?;
    let primary = rank_collection(
        &target,
        &dict_tm,
        filtered.first().map(|(_, m)| m),
        &scoring,
        config.k,
    )
    .stage("rank")?;
    art.write("ranked.tsv", |w| primary.write_tsv(w)).stage("rank")?;

    let mut summary = PipelineSummary {
        artifacts: Vec::new(),
        best_system: None,
        pseudorels: None,
    };

    if !filtered.is_empty() {
        let inputs: Vec<SweepInput<'_>> = filtered
            .iter()
            .map(|(dict, matrix)| SweepInput { dict, matrix })
            .collect();
        let mut systems =
            generate_sweep(&target, &inputs, &config.sweep, config.k, config.slope).stage("sweep")?;
        for s in systems.systems() {
            art.write(&format!("runs/{}", run_file_name(s.system_id())), |w| s.write_tsv(w))
                .stage("sweep")?;
        }
        if !config.biased.is_empty() {
            systems.set_biased(config.biased.clone()).stage("fuse")?;
        }
        let rels = select_pseudorels(&systems, config.top_m, config.fraction).stage("fuse")?;
        art.write("pseudorels.txt", |w| rels.write_txt(w)).stage("fuse")?;
        let mut report = EvalReport::new(&systems, &rels).stage("map")?;
        art.write("eval_report.tsv", |w| report.write_map_tsv(w)).stage("map")?;
        art.write("nd_series.tsv", |w| report.write_nd_series(w)).stage("fuse")?;
        art.write("wins_series.tsv", |w| report.write_wins_series(w)).stage("fuse")?;

        if let Some(path) = &config.judgments {
            let judgments = fs::File::open(path)
                .map_err(|source| Error::Read {
                    path: path.clone(),
                    source,
                })
                .and_then(|f| read_judgments(BufReader::new(f)))
                .stage("p-at-k")?;
            report.precision = systems
                .systems()
                .iter()
                .map(|s| Ok((s.system_id().to_owned(), precision_at_ranges(s, &judgments, &config.ranges)?)))
                .collect::<Result<_>>()
                .stage("p-at-k")?;
            art.write("p_at_k.tsv", |w| write_precision_tsv(&report.precision, w))
                .stage("p-at-k")?;
        }
        summary.best_system = report.best_system().cloned();
        summary.pseudorels = Some(rels.len());
    } else if let Some(path) = &config.judgments {
        let judgments = fs::File::open(path)
            .map_err(|source| Error::Read {
                path: path.clone(),
                source,
            })
            .and_then(|f| read_judgments(BufReader::new(f)))
            .stage("p-at-k")?;
        let rows = vec![(
            primary.system_id().to_owned(),
            precision_at_ranges(&primary, &judgments, &config.ranges).stage("p-at-k")?,
        )];
        art.write("p_at_k.tsv", |w| write_precision_tsv(&rows, w)).stage("p-at-k")?;
    }

    let manifest = manifest_text(config, &art.written).stage("manifest")?;
    art.write(MANIFEST, |w| Ok(w.write_all(manifest.as_bytes())?))
        .stage("manifest")?;
    summary.artifacts = art.written;
    Ok(summary)
}

fn manifest_text(config: &PipelineConfig, written: &[String]) -> Result<String> {
    let mut text = String::from("# refdict pipeline manifest; usable as a configuration file\n");
    text.push_str(&format!("refdict_version={VERSION}\n"));
    text.push_str(&config.to_kv());
    for (name, path) in [
        ("reference", &config.reference),
        ("generic", &config.generic),
        ("target", &config.target),
        ("judgments", &config.judgments),
    ] {
        if let Some(p) = path {
            text.push_str(&format!("input.{name}.sha256={}\n", hash_input(p)?));
        }
    }
    for name in written {
        let hash = hash_input(&config.output.join(name))?;
        text.push_str(&format!("output.{name}.sha256={hash}\n"));
    }
    Ok(text)
}

/// Loads a persisted topic model.
pub fn read_model(path: &Path) -> Result<TopicModelResult> {
    let f = fs::File::open(path).map_err(|source| Error::Read {
        path: path.to_owned(),
        source,
    })?;
    TopicModelResult::read_tsv(BufReader::new(f))
}

pub fn read_dictionary(path: &Path) -> Result<Dictionary> {
    let f = fs::File::open(path).map_err(|source| Error::Read {
        path: path.to_owned(),
        source,
    })?;
    Dictionary::read_tsv(BufReader::new(f))
}

pub fn read_matrix(path: &Path, dict: &Dictionary) -> Result<CoocMatrix> {
    let f = fs::File::open(path).map_err(|source| Error::Read {
        path: path.to_owned(),
        source,
    })?;
    CoocMatrix::read_tsv(BufReader::new(f), dict)
}

pub fn read_ranked_list(path: &Path) -> Result<RankedList> {
    let f = fs::File::open(path).map_err(|source| Error::Read {
        path: path.to_owned(),
        source,
    })?;
    RankedList::read_tsv(BufReader::new(f))
}
