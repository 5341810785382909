mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use evmlift_core::metrics::Unit;

use config::{BackendArgs, Overrides, RunConfig};

/// Exit status 1 is a problem with the input or flags, 2 a failure inside
/// the tool or of a service it depends on.
#[derive(Debug)]
pub enum Failure {
    User(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::User(_) => 1,
            Failure::Internal(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::User(m) | Failure::Internal(m) => f.write_str(m),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "evmlift", version, about = "Lift EVM runtime bytecode to three-address code and decompile it")]
struct Cli {
    /// Worker threads for per-contract and per-function work
    #[arg(long, global = true, env = "EVMLIFT_JOBS", value_name = "N")]
    jobs: Option<usize>,
    /// off, error, warn, info, debug or trace
    #[arg(long, global = true, env = "EVMLIFT_LOG_LEVEL", value_name = "LEVEL")]
    log_level: Option<String>,
    /// Config file; defaults to ./evmlift.toml when present
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the instruction listing of a bytecode file
    Disasm {
        /// Hex bytecode file, or - for standard input
        input: PathBuf,
        /// Write the listing here instead of standard output
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Write the control-flow graph as cfg.dot and cfg.json
    Cfg {
        /// Hex bytecode file, or - for standard input
        input: PathBuf,
        /// Output directory
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Lift every dispatched function to normalized three-address code
    Lift {
        /// Hex bytecode file, or - for standard input
        input: PathBuf,
        /// Output directory for <selector|fallback>.tac files
        #[arg(long, value_name = "DIR", required_unless_present = "stdout")]
        out: Option<PathBuf>,
        /// Print all functions to standard output, each after a `=== <name>` line
        #[arg(long, conflicts_with = "out")]
        stdout: bool,
    },
    /// Lift and decompile every function through a backend
    Decompile {
        /// Hex bytecode file, or - for standard input
        input: PathBuf,
        /// Output directory for .sol files and summary.json
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Solidity source used to name functions by their signatures
        #[arg(long, value_name = "FILE")]
        source: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Build or inspect a paired training corpus
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Score decompiled functions against references
    Eval {
        /// JSONL rows of {id, reference, candidate}
        #[arg(long, value_name = "FILE")]
        pairs: PathBuf,
        /// Output directory for report.json and the CSV files
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Embedding service base URL; default is the built-in token n-gram scorer
        #[arg(long, env = "EVMLIFT_EMBEDDER", value_name = "URL")]
        embedder: Option<String>,
    },
    /// Shannon entropy of a corpus in bits per unit
    Entropy {
        /// solidity_token, tac_instruction or evm_opcode
        #[arg(long, value_name = "UNIT")]
        unit: Unit,
        /// Files or directories. Solidity: one document per file. TAC: one
        /// function per file or per `=== ` section. Opcodes: one hex
        /// bytecode per line.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum DatasetCommand {
    /// Pair lifted functions with their source from verified-contract bundles
    Build {
        /// Directory of <address>/{source.sol, runtime.hex, meta.json} bundles
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        /// Output JSONL file
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Also emit functions whose selector matched no source signature
        #[arg(long)]
        keep_unmatched: bool,
        /// Fraction of records to hold out
        #[arg(long, value_name = "FRACTION", requires = "holdout_out")]
        holdout: Option<f64>,
        /// Output JSONL file for the held-out records
        #[arg(long, value_name = "FILE", requires = "holdout")]
        holdout_out: Option<PathBuf>,
        /// Shuffle seed for the holdout split
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print corpus statistics as JSON
    Stats {
        /// JSONL file written by `dataset build`
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    let no_backend = BackendArgs::default();
    let (backend, embedder) = match &cli.command {
        Command::Decompile { backend, .. } => (backend, None),
        Command::Eval { embedder, .. } => (&no_backend, embedder.as_deref()),
        _ => (&no_backend, None),
    };
    let cfg = RunConfig::resolve(Overrides {
        config: cli.config.as_deref(),
        jobs: cli.jobs,
        log_level: cli.log_level.as_deref(),
        backend,
        embedder,
    })?;
    env_logger::Builder::new()
        .filter_level(cfg.log_level)
        .format_timestamp(None)
        .init();
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build_global()
        .map_err(|e| Failure::Internal(format!("cannot start worker pool: {e}")))?;
    log::debug!("{cfg:?}");

    match cli.command {
        Command::Disasm { input, out } => commands::disasm(&input, out.as_deref()),
        Command::Cfg { input, out } => commands::cfg(&input, &out),
        Command::Lift { input, out, stdout } => commands::lift(&input, if stdout { None } else { out.as_deref() }),
        Command::Decompile { input, out, source, .. } => commands::decompile(&input, &out, source.as_deref(), &cfg),
        Command::Dataset { command } => match command {
            DatasetCommand::Build { input, out, keep_unmatched, holdout, holdout_out, seed } => {
                let split = holdout.zip(holdout_out).map(|(f, p)| (f, p, seed));
                commands::dataset_build(&input, &out, keep_unmatched, split)
            }
            DatasetCommand::Stats { input } => commands::dataset_stats(&input),
        },
        Command::Eval { pairs, out, .. } => commands::eval(&pairs, &out, &cfg),
        Command::Entropy { unit, inputs } => commands::entropy(unit, &inputs),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
