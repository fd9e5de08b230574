//! Command-line experiment runner.
//!
//! One experiment per invocation, named in the config file. The run
//! prints a one-line summary, writes CSV artifacts plus `summary.txt`
//! into the output directory, and exits 0 when every in-config gate
//! holds, 1 on gate failure, and 2 on a malformed config or invalid
//! parameters.

mod config;
mod describe;
mod experiments;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

/// Experiment runner for energy functionals under sliding deformations.
///
/// Identical configs produce byte-identical CSV artifacts regardless of
/// the thread count.
#[derive(Parser)]
#[command(name = "varslide", version)]
struct Args {
    /// Experiment configuration file (TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Artifact directory; defaults to the config's [output] dir or ".".
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (0 = automatic). Affects speed, never results.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// List experiment names and exit.
    #[arg(long)]
    list: bool,
    /// Print what an experiment measures and which sections it reads.
    #[arg(long, value_name = "NAME")]
    describe: Option<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.list {
        for (name, blurb, ..) in describe::CATALOG {
            println!("{name:<12} {blurb}");
        }
        return ExitCode::SUCCESS;
    }
    if let Some(name) = &args.describe {
        return match describe::lookup(name) {
            Ok(text) => {
                println!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        };
    }
    let Some(path) = args.config.as_deref() else {
        eprintln!("nothing to do: pass --config PATH, --list, or --describe NAME");
        return ExitCode::from(2);
    };
    match execute(path, args.out.as_deref(), args.threads) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            if outcome.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                for failure in &outcome.failures {
                    eprintln!("gate failed: {failure}");
                }
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(
    path: &Path,
    out_flag: Option<&Path>,
    threads: Option<usize>,
) -> anyhow::Result<experiments::Outcome> {
    let cfg = config::load(path)?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let out = match out_flag {
        Some(dir) => dir.to_path_buf(),
        None => match cfg.out_dir() {
            Some(dir) => base.join(dir),
            None => PathBuf::from("."),
        },
    };
    std::fs::create_dir_all(&out)?;
    let outcome = match threads {
        Some(n) => varslide::reduce::with_thread_count(n, || experiments::run(&cfg, &base, &out)),
        None => experiments::run(&cfg, &base, &out),
    }?;
    std::fs::write(out.join("summary.txt"), format!("{}\n", outcome.summary))?;
    Ok(outcome)
}
