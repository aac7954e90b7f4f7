//! Command-line front end.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::engines::{train, EngineKind, TrainConfig, TrainResult};
use crate::error::TopicError;
use crate::evaluation::{cross_validate, synthesize_corpus, top_words};
use crate::io::{self as csvio, BenchRow};
use crate::messages::Hyperparams;
use crate::scheduler::ScheduleMode;

#[derive(Debug, Parser)]
#[command(name = "topicforge", version, about = "LDA training by message passing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one engine and write its trace and model.
    Train(TrainArgs),
    /// Cross-validate engines by predictive perplexity.
    Cv(TrainArgs),
    /// Train every engine for every K and summarize convergence.
    Bench(TrainArgs),
    /// Write a synthetic corpus sampled from the LDA generative process.
    Synth(SynthArgs),
    /// Print the top words of each topic from a word-topic CSV.
    Topwords(TopwordsArgs),
    /// Print corpus statistics.
    Stats(CorpusArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Docword file: D, W, NNZ header lines then `doc word count` triples.
    #[arg(long)]
    pub docword: PathBuf,
    /// Vocabulary file, one word per line.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long = "engine", visible_alias = "engines", value_delimiter = ',', default_value = "rbp")]
    pub engines: Vec<EngineKind>,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub topics: Vec<usize>,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1.0)]
    pub threshold: f64,
    #[arg(long, env = "TOPICFORGE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "word")]
    pub schedule: ScheduleMode,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 1)]
    pub eval_every: usize,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Write zero for every timing column so outputs are byte-reproducible.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub docs: usize,
    #[arg(long, default_value_t = 500)]
    pub words: usize,
    #[arg(long, default_value_t = 10)]
    pub true_topics: usize,
    #[arg(long, default_value_t = 100)]
    pub tokens_per_doc: usize,
    #[arg(long, env = "TOPICFORGE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TopwordsArgs {
    /// Word-topic CSV written by `train`.
    #[arg(long)]
    pub phi: PathBuf,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] TopicError),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn load_corpus(args: &CorpusArgs) -> CliResult<Corpus> {
    let docword = BufReader::new(File::open(&args.docword)?);
    let vocab = match &args.vocab {
        Some(p) => Some(BufReader::new(File::open(p)?)),
        None => None,
    };
    Ok(Corpus::parse_docword(docword, vocab)?)
}

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

impl TrainArgs {
    fn config(&self, num_topics: usize) -> CliResult<TrainConfig> {
        let config = TrainConfig {
            hyper: Hyperparams::new(num_topics, self.alpha, self.beta)
                .map_err(|e| CliError::Usage(e.to_string()))?,
            max_iters: self.max_iters,
            convergence_threshold: self.threshold,
            seed: self.seed,
            schedule_mode: self.schedule,
            eval_every: self.eval_every,
        };
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(config)
    }

    fn single_engine(&self, command: &str) -> CliResult<EngineKind> {
        match self.engines.as_slice() {
            [one] => Ok(*one),
            _ => Err(CliError::Usage(format!("{command} takes exactly one --engine"))),
        }
    }

    fn single_k(&self, command: &str) -> CliResult<usize> {
        match self.topics.as_slice() {
            [k] => Ok(*k),
            _ => Err(CliError::Usage(format!("{command} takes exactly one --topics value"))),
        }
    }

    fn check_jobs(&self) -> CliResult<()> {
        if self.jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        Ok(())
    }
}

fn write_trace_file(dir: &Path, name: &str, result: &TrainResult, timing: bool) -> CliResult<()> {
    let mut f = create(dir, name)?;
    csvio::write_trace(&mut f, &result.trace, timing)?;
    f.flush()?;
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let engine = args.single_engine("train")?;
    let config = args.config(args.single_k("train")?)?;
    let corpus = load_corpus(&args.corpus)?;
    fs::create_dir_all(&args.out)?;

    let result = train(engine, &corpus, &config)?;
    let k = config.hyper.num_topics;
    write_trace_file(&args.out, "trace.csv", &result, !args.no_timing)?;
    let mut f = create(&args.out, "theta.csv")?;
    csvio::write_matrix(&mut f, &result.final_model.theta, k)?;
    f.flush()?;
    let mut f = create(&args.out, "phi.csv")?;
    csvio::write_matrix(&mut f, &result.final_model.phi, k)?;
    f.flush()?;
    if engine == EngineKind::Rbp {
        let mut f = create(&args.out, "residuals.csv")?;
        csvio::write_residuals(&mut f, &result.residuals)?;
        f.flush()?;
    }
    if !corpus.vocab().is_empty() {
        let table = top_words(&result.final_model.phi, k, corpus.vocab(), 10);
        fs::write(args.out.join("topics.txt"), table.to_string())?;
    }
    match result.converged_at {
        Some(t) => println!(
            "{engine}: converged at iteration {t}, perplexity {:.4}, {:.3}s",
            result.final_perplexity().unwrap_or(f64::NAN),
            result.train_seconds
        ),
        None => println!(
            "{engine}: not converged after {} iterations, perplexity {:.4}",
            result.iterations,
            result.final_perplexity().unwrap_or(f64::NAN)
        ),
    }
    Ok(())
}

fn cmd_cv(args: &TrainArgs) -> CliResult<()> {
    args.check_jobs()?;
    let config = args.config(args.single_k("cv")?)?;
    let corpus = load_corpus(&args.corpus)?;
    fs::create_dir_all(&args.out)?;
    for &engine in &args.engines {
        let report = cross_validate(&corpus, engine, &config, args.folds, args.jobs)?;
        let mut f = create(&args.out, &format!("cv_{engine}.csv"))?;
        csvio::write_cv_report(&mut f, &report, !args.no_timing)?;
        f.flush()?;
        let p = report.predictive_perplexity();
        println!(
            "{engine}: predictive perplexity {:.4} ± {:.4} over {} folds ({} failed)",
            p.mean,
            p.std,
            report.rows.len(),
            report.failed_folds()
        );
    }
    Ok(())
}

fn cmd_bench(args: &TrainArgs) -> CliResult<()> {
    args.check_jobs()?;
    let corpus = load_corpus(&args.corpus)?;
    fs::create_dir_all(&args.out)?;
    let mut runs = Vec::new();
    for &engine in &args.engines {
        for &k in &args.topics {
            runs.push((engine, args.config(k)?));
        }
    }
    let run_one = |(engine, config): &(EngineKind, TrainConfig)| -> CliResult<BenchRow> {
        let result = train(*engine, &corpus, config)?;
        let k = config.hyper.num_topics;
        write_trace_file(&args.out, &format!("trace_{engine}_K{k}.csv"), &result, !args.no_timing)?;
        Ok(BenchRow {
            engine: engine.to_string(),
            num_topics: k,
            converged_at: result.converged_at,
            train_seconds: if args.no_timing { 0.0 } else { result.train_seconds },
            final_perplexity: result.final_perplexity().unwrap_or(f64::NAN),
        })
    };
    let rows: Vec<CliResult<BenchRow>> = if args.jobs > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(|| runs.par_iter().map(run_one).collect())
    } else {
        runs.iter().map(run_one).collect()
    };
    let rows = rows.into_iter().collect::<CliResult<Vec<_>>>()?;
    let mut f = create(&args.out, "summary.csv")?;
    csvio::write_bench_summary(&mut f, &rows)?;
    f.flush()?;
    for r in &rows {
        println!(
            "{:>4} K={:<3} converged_at={:<6} perplexity={:.4}",
            r.engine,
            r.num_topics,
            r.converged_at.map(|c| c.to_string()).unwrap_or_else(|| "-".into()),
            r.final_perplexity
        );
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    let corpus = synthesize_corpus(args.docs, args.words, args.true_topics, args.tokens_per_doc, args.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    fs::create_dir_all(&args.out)?;
    let mut f = create(&args.out, "docword.txt")?;
    corpus.write_docword(&mut f)?;
    f.flush()?;
    let mut f = create(&args.out, "vocab.txt")?;
    corpus.write_vocab(&mut f)?;
    f.flush()?;
    println!(
        "wrote {} documents, {} words, {} tokens to {}",
        corpus.num_docs(),
        corpus.vocab_size(),
        corpus.total_tokens(),
        args.out.display()
    );
    Ok(())
}

fn cmd_topwords(args: &TopwordsArgs) -> CliResult<()> {
    let (k, phi) = csvio::read_matrix(BufReader::new(File::open(&args.phi)?))?;
    let vocab = match &args.vocab {
        Some(p) => fs::read_to_string(p)?.lines().map(|l| l.trim().to_string()).collect(),
        None => Vec::new(),
    };
    let table = top_words(&phi, k, &vocab, args.top);
    match &args.out {
        Some(p) => fs::write(p, table.to_string())?,
        None => print!("{table}"),
    }
    Ok(())
}

fn cmd_stats(args: &CorpusArgs) -> CliResult<()> {
    let s = load_corpus(args)?.stats()?;
    println!("D={} W={} N_d={:.2} W_d={:.2}", s.num_docs, s.vocab_size, s.mean_tokens_per_doc, s.mean_distinct_words_per_doc);
    Ok(())
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Topwords(a) => cmd_topwords(a),
        Command::Stats(a) => cmd_stats(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
