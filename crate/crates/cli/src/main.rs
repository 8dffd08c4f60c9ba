//! `lfbb`: bilingual lexicon induction with a lexical-feature reranker.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal
//! error.

mod commands;
mod config;

use std::fs::OpenOptions;
use std::io::Write;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use config::{read_config_file, Command, Overrides, RunConfig, KEYS};

#[derive(Parser)]
#[command(name = "lfbb", version, about = "Retrieve, rerank and evaluate word translations")]
struct Cli {
    /// Worker threads (default: one per core)
    #[arg(long, global = true, env = "LFBB_THREADS", value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Generate a synthetic bilingual world in the corpus file formats
    Synth(Overrides),
    /// Align and retrieve top-k candidates for every source word
    Retrieve(Overrides),
    /// Export hard negatives for every training pair
    Mine(Overrides),
    /// Train the ranker on the training dictionary
    Train(Overrides),
    /// Rank test candidates and write the evaluation report
    Eval(Overrides),
    /// Write the POS/frequency correlation grid and PCA exports
    Analyze(Overrides),
    /// List every configuration key
    Keys,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    }

    let (command, overrides, name) = match &cli.command {
        Sub::Synth(o) => (Command::Synth, o, "synth"),
        Sub::Retrieve(o) => (Command::Retrieve, o, "retrieve"),
        Sub::Mine(o) => (Command::Mine, o, "mine"),
        Sub::Train(o) => (Command::Train, o, "train"),
        Sub::Eval(o) => (Command::Eval, o, "eval"),
        Sub::Analyze(o) => (Command::Analyze, o, "analyze"),
        Sub::Keys => {
            for (key, doc) in KEYS {
                println!("{key:<18} {doc}");
            }
            return ExitCode::SUCCESS;
        }
    };

    let mut pairs = Vec::new();
    if let Some(path) = &overrides.config {
        match read_config_file(path) {
            Ok(p) => pairs.extend(p),
            Err(errors) => return config_failure(&errors),
        }
    }
    pairs.extend(overrides.pairs());
    let cfg = match RunConfig::build(&pairs, command) {
        Ok(c) => c,
        Err(errors) => return config_failure(&errors),
    };

    let started = unix_now();
    let clock = Instant::now();
    let result = std::panic::catch_unwind(|| match command {
        Command::Synth => commands::synth(&cfg),
        Command::Retrieve => commands::cmd_retrieve(&cfg),
        Command::Mine => commands::cmd_mine(&cfg),
        Command::Train => commands::cmd_train(&cfg),
        Command::Eval => commands::cmd_eval(&cfg),
        Command::Analyze => commands::cmd_analyze(&cfg),
    });
    match result {
        Ok(Ok(())) => {
            // timestamps live only in this sidecar so every other output is reproducible
            let log = cfg.out_dir.join("run.log");
            if let Ok(mut f) = OpenOptions::new().create(true).append(true).open(&log) {
                let _ = writeln!(
                    f,
                    "{name}\tstarted={started:.3}\telapsed_s={:.3}",
                    clock.elapsed().as_secs_f64()
                );
            }
            ExitCode::SUCCESS
        }
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DATA)
        }
        Err(_) => {
            eprintln!("error: internal invariant violated (see panic message above)");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}

fn config_failure(errors: &[String]) -> ExitCode {
    eprintln!("configuration errors:");
    for e in errors {
        eprintln!("  {e}");
    }
    ExitCode::from(EXIT_CONFIG)
}
