use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use refdict::corpus::{ingest_corpus, Corpus, CorpusRole, InputFormat, TermStats};
use refdict::eval::{
    precision_at_ranges, read_judgments, sort_systems, write_precision_tsv, EvalReport, PseudorelSet, RankRange, SweepInput,
    SystemSet,
};
use refdict::pipeline::{parse_alphas, read_dictionary, read_matrix, read_model, read_ranked_list, run_file_name};
use refdict::topics::{top_terms, write_top_terms_tsv};
use refdict::{
    build_cooc, exclude_topics, extract_dictionary_tfidf, extract_dictionary_tm, filter_cooc, fit_lda,
    generate_sweep, rank_collection, run_pipeline, select_pseudorels, DictionaryMethod, Error, LdaParams,
    PipelineConfig, ScoringConfig, ScoringMode,
};

const OUTPUT_ENV: &str = "REFDICT_OUTPUT_DIR";

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "refdict", version, about = "Retrieve domain documents with a contextualized reference dictionary")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read a JSONL file or plaintext directory and write canonical JSONL.
    Ingest(IngestArgs),
    /// Fit the topic model on a reference corpus.
    FitTopics(FitTopicsArgs),
    /// Print topic index, p(z_k) and top terms of a stored model.
    InspectTopics(InspectArgs),
    /// Extract a ranked dictionary from the reference corpus.
    ExtractDict(ExtractArgs),
    /// Build a Dice co-occurrence matrix over the dictionary terms.
    BuildCooc(BuildCoocArgs),
    /// Subtract the generic matrix from the reference matrix.
    FilterCooc(FilterArgs),
    /// Rank the target collection with one system.
    Rank(RankArgs),
    /// Rank the target with every alpha of the sweep plus context-only, per dictionary.
    Sweep(SweepArgs),
    /// Fuse biased systems into pseudorels with a Condorcet vote.
    Fuse(FuseArgs),
    /// MAP of every system against a pseudorel file.
    Map(MapArgs),
    /// Precision over rank windows against manual judgments.
    PAtK(PAtKArgs),
    /// Run the whole pipeline from a key=value configuration.
    Run(RunArgs),
}

#[derive(Args)]
struct Input {
    /// JSONL file or directory of .txt files
    path: PathBuf,
    /// auto, jsonl or plaintext-dir
    #[arg(long, default_value = "auto")]
    format: String,
}

impl Input {
    fn load(&self, role: CorpusRole) -> Result<Corpus, Error> {
        load_corpus(&self.path, &self.format, role)
    }
}

fn load_corpus(path: &Path, format: &str, role: CorpusRole) -> Result<Corpus, Error> {
    let format = match format {
        "auto" => InputFormat::detect(path),
        f => f.parse()?,
    };
    ingest_corpus(path, format, role)
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, default_value = "reference")]
    role: String,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct FitTopicsArgs {
    #[command(flatten)]
    input: Input,
    /// Number of topics
    #[arg(long, short = 'k')]
    topics: usize,
    /// Document-topic prior; defaults to 50 / K
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated 1-based topic ids to mark excluded
    #[arg(long, default_value = "")]
    exclude: String,
    #[arg(long, short)]
    output: PathBuf,
    /// Also write the top terms of every topic as TSV
    #[arg(long)]
    top_terms: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    top_n: usize,
}

#[derive(Args)]
struct InspectArgs {
    model: PathBuf,
    /// Terms per topic
    #[arg(long = "top", short = 'n', default_value_t = 10)]
    n: usize,
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    input: Input,
    /// tm or tfidf
    #[arg(long, default_value = "tm")]
    method: String,
    /// Topic model file, required for tm
    #[arg(long)]
    model: Option<PathBuf>,
    /// Additional topics to exclude (comma-separated)
    #[arg(long, default_value = "")]
    exclude: String,
    /// Dictionary size N
    #[arg(long, short = 'n', default_value_t = 500)]
    size: usize,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct BuildCoocArgs {
    #[command(flatten)]
    input: Input,
    /// reference or generic
    #[arg(long, default_value = "reference")]
    role: String,
    #[arg(long)]
    dict: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    dict: PathBuf,
    /// Reference matrix C
    #[arg(long)]
    reference: PathBuf,
    /// Generic matrix D
    #[arg(long)]
    generic: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct ScoringArgs {
    #[arg(long, default_value_t = refdict::scoring::DEFAULT_SLOPE)]
    slope: f64,
    /// Result-list length
    #[arg(long = "top-k", short = 'k', default_value_t = 2000)]
    k: usize,
}

#[derive(Args)]
struct RankArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long)]
    dict: PathBuf,
    /// Filtered matrix C′; required unless the mode is unigram
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// unigram, context or context-only
    #[arg(long, default_value = "context")]
    mode: String,
    #[arg(long, default_value_t = 14.0)]
    alpha: f64,
    #[command(flatten)]
    scoring: ScoringArgs,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    input: Input,
    /// Dictionary file; repeat for several dictionaries
    #[arg(long, required = true)]
    dict: Vec<PathBuf>,
    /// Filtered matrix for the dictionary at the same position
    #[arg(long, required = true)]
    matrix: Vec<PathBuf>,
    /// START:END:STEP or a comma list
    #[arg(long, default_value = "0:30:2")]
    alphas: String,
    #[command(flatten)]
    scoring: ScoringArgs,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RunsArgs {
    /// Ranked-list files or directories of them
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Biased system ids (comma-separated); default: per dictionary alpha=0 and context-only
    #[arg(long)]
    biased: Option<String>,
}

impl RunsArgs {
    fn load(&self) -> Result<SystemSet, Error> {
        let mut files = Vec::new();
        for path in &self.runs {
            if path.is_dir() {
                let mut inner: Vec<PathBuf> = fs::read_dir(path)
                    .map_err(|source| Error::Read {
                        path: path.clone(),
                        source,
                    })?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x == "tsv"))
                    .collect();
                inner.sort();
                files.extend(inner);
            } else {
                files.push(path.clone());
            }
        }
        let mut systems = files.iter().map(|f| read_ranked_list(f)).collect::<Result<Vec<_>, _>>()?;
        sort_systems(&mut systems);
        let mut set = SystemSet::with_default_biased(systems)?;
        if let Some(ids) = &self.biased {
            set.set_biased(split_list(ids))?;
        }
        Ok(set)
    }
}

#[derive(Args)]
struct FuseArgs {
    #[command(flatten)]
    runs: RunsArgs,
    #[arg(long, default_value_t = refdict::eval::DEFAULT_TOP_M)]
    top_m: usize,
    #[arg(long, default_value_t = refdict::eval::DEFAULT_FRACTION)]
    fraction: f64,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct MapArgs {
    #[command(flatten)]
    runs: RunsArgs,
    #[arg(long)]
    pseudorels: PathBuf,
    /// Defaults to stdout
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PAtKArgs {
    #[command(flatten)]
    runs: RunsArgs,
    /// TSV of `doc_id<TAB>0|1`
    #[arg(long)]
    judgments: PathBuf,
    /// Comma-separated `first-last` windows
    #[arg(long)]
    ranges: Option<String>,
    /// Defaults to stdout
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// key=value configuration file (a previous manifest works too)
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    generic: Option<PathBuf>,
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Override any configuration key
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(str::to_owned).collect()
}

fn topic_ids(s: &str) -> Result<BTreeSet<usize>, Error> {
    split_list(s)
        .iter()
        .map(|p| p.parse().map_err(|_| Error::Config(format!("invalid topic id `{p}`"))))
        .collect()
}

fn role(s: &str) -> Result<CorpusRole, Error> {
    s.parse()
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, Error> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| Error::Write {
            path: parent.to_owned(),
            source,
        })?;
    }
    fs::File::create(path).map(BufWriter::new).map_err(|source| Error::Write {
        path: path.to_owned(),
        source,
    })
}

fn write_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<(), Error>) -> Result<(), Error> {
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush().map_err(|source| Error::Write {
        path: path.to_owned(),
        source,
    })
}

fn write_or_stdout(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<(), Error>) -> Result<(), Error> {
    match path {
        Some(p) => write_file(p, f),
        None => {
            let mut out = io::stdout().lock();
            f(&mut out)?;
            Ok(out.flush()?)
        }
    }
}

/// Explicit flag, then the environment override, then `fallback`.
fn output_dir(flag: Option<&Path>, fallback: &Path) -> PathBuf {
    flag.map(Path::to_owned)
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| fallback.to_owned())
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Ingest(a) => {
            let corpus = a.input.load(role(&a.role)?)?;
            corpus.save_jsonl(&a.output)?;
            log::info!("{} documents, {} terms", corpus.len(), corpus.vocabulary().len());
        }
        Command::FitTopics(a) => {
            let corpus = a.input.load(CorpusRole::Reference)?;
            let mut params = LdaParams::new(a.topics);
            if let Some(alpha) = a.alpha {
                params.alpha = alpha;
            }
            params.beta = a.beta;
            params.iterations = a.iterations;
            params.seed = a.seed;
            let model = exclude_topics(&fit_lda(&corpus, params)?, &topic_ids(&a.exclude)?)?;
            write_file(&a.output, |w| model.write_tsv(w))?;
            if let Some(path) = &a.top_terms {
                write_file(path, |w| write_top_terms_tsv(&model, a.top_n, w))?;
            }
        }
        Command::InspectTopics(a) => {
            let model = read_model(&a.model)?;
            let mut out = io::stdout().lock();
            for topic in 1..=model.num_topics() {
                let flag = if model.is_excluded(topic) { "\texcluded" } else { "" };
                write!(out, "{topic}\t{:.6}{flag}", model.topic_weights()[topic - 1]).map_err(Error::Io)?;
                for (term, _) in top_terms(&model, topic, a.n)? {
                    write!(out, "\t{term}").map_err(Error::Io)?;
                }
                writeln!(out).map_err(Error::Io)?;
            }
        }
        Command::ExtractDict(a) => {
            let reference = a.input.load(CorpusRole::Reference)?;
            let dict = match a.method.parse::<DictionaryMethod>()? {
                DictionaryMethod::TopicModel => {
                    let path = a
                        .model
                        .as_ref()
                        .ok_or_else(|| Error::Config("--model is required for --method tm".into()))?;
                    let model = read_model(path)?;
                    let excluded: BTreeSet<usize> =
                        model.excluded().union(&topic_ids(&a.exclude)?).copied().collect();
                    let model = exclude_topics(&model, &excluded)?;
                    extract_dictionary_tm(&model, &TermStats::new(&reference), a.size)?
                }
                DictionaryMethod::Tfidf => extract_dictionary_tfidf(&reference, a.size)?,
            };
            write_file(&a.output, |w| dict.write_tsv(w))?;
        }
        Command::BuildCooc(a) => {
            let corpus = a.input.load(role(&a.role)?)?;
            let dict = read_dictionary(&a.dict)?;
            let m = build_cooc(&corpus, &dict)?;
            write_file(&a.output, |w| m.write_tsv(w))?;
        }
        Command::FilterCooc(a) => {
            let dict = read_dictionary(&a.dict)?;
            let c = read_matrix(&a.reference, &dict)?;
            let d = read_matrix(&a.generic, &dict)?;
            let f = filter_cooc(&c, &d)?;
            write_file(&a.output, |w| f.write_tsv(w))?;
        }
        Command::Rank(a) => {
            let target = a.input.load(CorpusRole::Target)?;
            let dict = read_dictionary(&a.dict)?;
            let mode: ScoringMode = a.mode.parse()?;
            let config = ScoringConfig::new(a.scoring.slope, a.alpha, mode)?;
            let matrix = a.matrix.as_ref().map(|p| read_matrix(p, &dict)).transpose()?;
            let list = rank_collection(&target, &dict, matrix.as_ref(), &config, a.scoring.k)?;
            write_file(&a.output, |w| list.write_tsv(w))?;
        }
        Command::Sweep(a) => {
            if a.dict.len() != a.matrix.len() {
                return Err(Error::Config("--dict and --matrix must be given the same number of times".into()).into());
            }
            let target = a.input.load(CorpusRole::Target)?;
            let dicts = a.dict.iter().map(|p| read_dictionary(p)).collect::<Result<Vec<_>, _>>()?;
            let matrices = dicts
                .iter()
                .zip(&a.matrix)
                .map(|(d, p)| read_matrix(p, d))
                .collect::<Result<Vec<_>, _>>()?;
            let inputs: Vec<SweepInput<'_>> =
                dicts.iter().zip(&matrices).map(|(dict, matrix)| SweepInput { dict, matrix }).collect();
            let set = generate_sweep(&target, &inputs, &parse_alphas(&a.alphas)?, a.scoring.k, a.scoring.slope)?;
            let dir = output_dir(a.output_dir.as_deref(), Path::new("runs"));
            for s in set.systems() {
                write_file(&dir.join(run_file_name(s.system_id())), |w| s.write_tsv(w))?;
            }
            println!("{} systems written to {}", set.systems().len(), dir.display());
        }
        Command::Fuse(a) => {
            let set = a.runs.load()?;
            let rels = select_pseudorels(&set, a.top_m, a.fraction)?;
            let report = EvalReport::new(&set, &rels)?;
            let dir = output_dir(a.output_dir.as_deref(), Path::new("."));
            write_file(&dir.join("pseudorels.txt"), |w| rels.write_txt(w))?;
            write_file(&dir.join("nd_series.tsv"), |w| report.write_nd_series(w))?;
            write_file(&dir.join("wins_series.tsv"), |w| report.write_wins_series(w))?;
            println!(
                "{} pseudorels from a pool of {} (biased: {})",
                rels.len(),
                rels.candidate_pool().len(),
                set.biased_ids().join(",")
            );
        }
        Command::Map(a) => {
            let set = a.runs.load()?;
            let file = fs::File::open(&a.pseudorels).map_err(|source| Error::Read {
                path: a.pseudorels.clone(),
                source,
            })?;
            let rels = PseudorelSet::read_txt(BufReader::new(file))?;
            let report = EvalReport::new(&set, &rels)?;
            write_or_stdout(a.output.as_deref(), |w| report.write_map_tsv(w))?;
        }
        Command::PAtK(a) => {
            let set = a.runs.load()?;
            let file = fs::File::open(&a.judgments).map_err(|source| Error::Read {
                path: a.judgments.clone(),
                source,
            })?;
            let judgments = read_judgments(BufReader::new(file))?;
            let ranges = match &a.ranges {
                Some(r) => split_list(r).iter().map(|x| x.parse()).collect::<Result<Vec<RankRange>, _>>()?,
                None => RankRange::defaults(),
            };
            let rows = set
                .systems()
                .iter()
                .map(|s| Ok((s.system_id().to_owned(), precision_at_ranges(s, &judgments, &ranges)?)))
                .collect::<Result<Vec<_>, Error>>()?;
            write_or_stdout(a.output.as_deref(), |w| write_precision_tsv(&rows, w))?;
        }
        Command::Run(a) => {
            let mut config = match &a.config {
                Some(path) => PipelineConfig::load(path)?,
                None => PipelineConfig::default(),
            };
            if let Some(dir) = std::env::var_os(OUTPUT_ENV) {
                config.output = PathBuf::from(dir);
            }
            for (key, value) in [("reference", &a.reference), ("generic", &a.generic), ("target", &a.target), ("output", &a.output)] {
                if let Some(v) = value {
                    config.set(key, &v.display().to_string())?;
                }
            }
            for kv in &a.set {
                let (key, value) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
                config.set(key, value)?;
            }
            let summary = run_pipeline(&config).map_err(|e| Failure {
                code: exit_code(&e.source),
                message: e.to_string(),
            })?;
            println!("{} artifacts written to {}", summary.artifacts.len(), config.output.display());
            if let Some((id, map)) = summary.best_system {
                println!("best system {id} (MAP {map:.4})");
            }
        }
    }
    Ok(())
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter { .. }
        | Error::Config(_)
        | Error::TopicOutOfRange { .. }
        | Error::MissingMatrix(_)
        | Error::UnknownSystem(_) => EXIT_USAGE,
        Error::Write { .. } | Error::Io(_) => EXIT_INTERNAL,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| execute(cli.command)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}
