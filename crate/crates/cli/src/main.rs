use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};

use cidiff::baselines::{bigram_diff, default_keywords, keyword_search};
use cidiff::corpus::{load_corpus, write_case, Corpus};
use cidiff::eval::{
    run_corpus, summarize, sweep_thresholds, write_metrics_csv, write_sweep_csv, AlgorithmKind, Builtin,
    CaseAlgorithm,
};
use cidiff::log::{load_log, TimestampStripper};
use cidiff::script::{cidiff_within, lcs_diff_within, render_text};
use cidiff::synth::{synthetic_corpus, MutationRates};
use cidiff::{Error, SimilarityParams};

/// Differencing of CI build logs.
#[derive(Parser, Debug)]
#[command(name = "cidiff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Diff a passing log against a failing log.
    Diff(DiffArgs),
    /// Run algorithms over a corpus and write per-case metrics as CSV.
    Eval(EvalArgs),
    /// Write a synthetic corpus.
    Gen(GenArgs),
    /// Precision/recall of cidiff over a grid of thresholds.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct Thresholds {
    /// Line similarity threshold.
    #[arg(long = "line-sim", default_value_t = 0.5, value_parser = unit_interval)]
    line_sim: f64,
    /// Token similarity threshold.
    #[arg(long = "token-sim", default_value_t = 0.6, value_parser = unit_interval)]
    token_sim: f64,
}

impl Thresholds {
    fn params(&self) -> SimilarityParams {
        SimilarityParams {
            line_threshold: self.line_sim,
            token_threshold: self.token_sim,
        }
    }
}

#[derive(Args, Debug)]
struct Preprocessing {
    /// Compare lines with their leading timestamps.
    #[arg(long, conflicts_with = "timestamp_pattern")]
    keep_timestamps: bool,
    /// Regex for the leading timestamp to strip; matched at line start.
    #[arg(long)]
    timestamp_pattern: Option<String>,
}

impl Preprocessing {
    fn stripper(&self) -> Result<TimestampStripper, Error> {
        match (&self.timestamp_pattern, self.keep_timestamps) {
            (_, true) => Ok(TimestampStripper::Keep),
            (Some(p), false) => TimestampStripper::from_pattern(p),
            (None, false) => Ok(TimestampStripper::Default),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args, Debug)]
struct DiffArgs {
    passing: PathBuf,
    failing: PathBuf,
    #[arg(long, default_value = "cidiff", value_parser = algorithm)]
    algorithm: AlgorithmKind,
    #[command(flatten)]
    thresholds: Thresholds,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Time budget, e.g. `30s`, `500ms`; a bare number means seconds.
    #[arg(long, default_value = "600", value_parser = duration)]
    timeout: Duration,
    /// Comma-separated keywords for the keyword algorithm.
    #[arg(long, value_delimiter = ',')]
    keywords: Option<Vec<String>>,
    #[command(flatten)]
    preprocessing: Preprocessing,
}

#[derive(Args, Debug)]
struct EvalArgs {
    corpus: PathBuf,
    /// Comma-separated subset of cidiff,lcs,bigram,keyword.
    #[arg(long, value_delimiter = ',', default_value = "cidiff,lcs,bigram,keyword", value_parser = algorithm)]
    algorithms: Vec<AlgorithmKind>,
    #[command(flatten)]
    thresholds: Thresholds,
    #[arg(long, default_value = "600", value_parser = duration)]
    timeout: Duration,
    #[arg(long, value_delimiter = ',')]
    keywords: Option<Vec<String>>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// CSV destination; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[command(flatten)]
    preprocessing: Preprocessing,
}

#[derive(Args, Debug)]
struct GenArgs {
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Passing-log length in lines.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    size: u64,
    #[arg(long, default_value_t = MutationRates::default().add, value_parser = unit_interval)]
    add_rate: f64,
    #[arg(long, default_value_t = MutationRates::default().delete, value_parser = unit_interval)]
    delete_rate: f64,
    #[arg(long, default_value_t = MutationRates::default().update, value_parser = unit_interval)]
    update_rate: f64,
    #[arg(long, default_value_t = MutationRates::default().moves, value_parser = unit_interval)]
    move_rate: f64,
}

#[derive(Args, Debug)]
struct SweepArgs {
    corpus: PathBuf,
    /// Grid spacing for both thresholds.
    #[arg(long, default_value_t = 0.1, value_parser = grid_step)]
    step: f64,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[command(flatten)]
    preprocessing: Preprocessing,
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not within [0, 1]"))
    }
}

fn grid_step(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not within (0, 1]"))
    }
}

fn duration(s: &str) -> Result<Duration, String> {
    let d = match s.parse::<f64>() {
        Ok(secs) if secs.is_finite() && secs >= 0.0 => Duration::from_secs_f64(secs),
        Ok(_) => return Err(format!("invalid duration {s:?}")),
        Err(_) => humantime::parse_duration(s).map_err(|e| e.to_string())?,
    };
    if d.is_zero() {
        return Err("timeout must be positive".into());
    }
    Ok(d)
}

fn algorithm(s: &str) -> Result<AlgorithmKind, String> {
    s.parse()
}

/// 1 usage, 2 input/output, 3 timeout.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidPattern(_) | Error::InvalidThreshold { .. } => 1,
        Error::Timeout => 3,
        _ => 2,
    }
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::Io {
            path: p.display().to_string(),
            source: e,
        })?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn stdout_error(e: io::Error) -> Error {
    Error::Io {
        path: "stdout".into(),
        source: e,
    }
}

fn cmd_diff(args: &DiffArgs) -> Result<(), Error> {
    let stripper = args.preprocessing.stripper()?;
    let passing = load_log(&args.passing, &stripper)?;
    let failing = load_log(&args.failing, &stripper)?;
    let params = args.thresholds.params();
    let deadline = Some(Instant::now() + args.timeout);
    let mut out = io::stdout().lock();
    let rendered = match args.algorithm {
        AlgorithmKind::Cidiff | AlgorithmKind::Lcs => {
            let script = if args.algorithm == AlgorithmKind::Cidiff {
                cidiff_within(&passing, &failing, &params, deadline)?
            } else {
                lcs_diff_within(&passing, &failing, &params, deadline)?
            };
            match args.format {
                Format::Json => script.to_json()? + "\n",
                Format::Text => render_text(&script, &passing, &failing),
            }
        }
        AlgorithmKind::Bigram | AlgorithmKind::Keyword => {
            let flagged = if args.algorithm == AlgorithmKind::Bigram {
                bigram_diff(&passing, &failing)
            } else {
                keyword_search(&failing, &args.keywords.clone().unwrap_or_else(default_keywords))
            };
            match args.format {
                Format::Json => serde_json::to_string(&flagged)? + "\n",
                Format::Text => flagged
                    .mod_indices
                    .iter()
                    .map(|&i| format!("{:>6}  {}\n", i + 1, failing.line(i).raw.trim_end_matches('\r')))
                    .collect(),
            }
        }
    };
    if deadline.is_some_and(|d| Instant::now() > d) {
        return Err(Error::Timeout);
    }
    out.write_all(rendered.as_bytes()).map_err(stdout_error)
}

fn load(root: &Path, preprocessing: &Preprocessing) -> Result<Corpus, Error> {
    let corpus = load_corpus(root, &preprocessing.stripper()?)?;
    for skipped in &corpus.skipped {
        eprintln!("skipped: {skipped}");
    }
    Ok(corpus)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), Error> {
    let corpus = load(&args.corpus, &args.preprocessing)?;
    let keywords = args.keywords.clone().unwrap_or_else(default_keywords);
    let builtins: Vec<Builtin> = args
        .algorithms
        .iter()
        .map(|&k| Builtin::new(k, args.thresholds.params(), keywords.clone()))
        .collect();
    let algs: Vec<&dyn CaseAlgorithm> = builtins.iter().map(|b| b as &dyn CaseAlgorithm).collect();
    let metrics = run_corpus(&corpus.cases, &algs, args.timeout, args.jobs)?;
    write_metrics_csv(open_output(&args.output)?, &metrics)?;

    let mut report =
        String::from("algorithm  cases  timed_out  runtime_ms  p_size  p_added  precision  recall\n");
    for s in summarize(&metrics) {
        report += &format!(
            "{:<10} {:>5} {:>10} {:>11} {:>7} {:>8} {:>10} {:>7}\n",
            s.algorithm,
            s.cases,
            s.timed_out,
            fmt_opt(s.runtime_ms),
            fmt_opt(s.p_size),
            fmt_opt(s.p_added),
            fmt_opt(s.precision),
            fmt_opt(s.recall)
        );
    }
    // medians go to stdout unless it carries the CSV
    if args.output.is_some() {
        print!("{report}");
    } else {
        eprint!("{report}");
    }
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> Result<(), Error> {
    fs::create_dir_all(&args.output).map_err(|e| Error::Io {
        path: args.output.display().to_string(),
        source: e,
    })?;
    let rates = MutationRates {
        add: args.add_rate,
        delete: args.delete_rate,
        update: args.update_rate,
        moves: args.move_rate,
    };
    for case in synthetic_corpus(args.seed, args.count, args.size as usize, rates) {
        write_case(&args.output, &case)?;
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Error> {
    let corpus = load(&args.corpus, &args.preprocessing)?;
    let cells = sweep_thresholds(&corpus.cases, args.step, args.jobs)?;
    write_sweep_csv(open_output(&args.output)?, &cells)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Diff(a) => cmd_diff(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
