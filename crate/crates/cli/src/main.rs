use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use geomflow_cli::run::{executor_for, run_to_dir};
use geomflow_cli::spec::{ExperimentSpec, RawSpec};
use geomflow_cli::suite::{format_table, run_suite, Scale};

#[derive(Parser)]
#[command(name = "geomflow", version, about = "Stochastic flows on embedded manifolds: experiments and acceptance suites")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment spec and write `<experiment>.csv` and `.manifest`.
    Run {
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to GEOMFLOW_THREADS, then all cores.
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory, overriding the spec's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit nonzero when a check or diagnostic verdict fails.
        #[arg(long)]
        check: bool,
    },
    /// Run a named suite: paper-examples or invariants.
    Suite {
        name: String,
        /// A tenth of the paths and doubled tolerances.
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
}

const EXIT_INVALID: u8 = 1;
const EXIT_CHECK: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn run(spec: PathBuf, seed: Option<u64>, threads: Option<usize>, out: Option<PathBuf>, check: bool) -> ExitCode {
    let text = match std::fs::read_to_string(&spec) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", spec.display());
            return ExitCode::from(EXIT_INVALID);
        }
    };
    let parsed = RawSpec::parse(&text).and_then(|mut raw| {
        if let Some(s) = seed {
            raw.set("seed", s.to_string());
        }
        if let Some(o) = &out {
            raw.set("output", o.display().to_string());
        }
        ExperimentSpec::resolve(raw)
    });
    let spec_v = match parsed {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", spec.display());
            return ExitCode::from(EXIT_INVALID);
        }
    };
    let executor = match executor_for(threads) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    let report = match run_to_dir(&spec_v, executor) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    println!("wrote {} ({} rows)", report.csv_path.display(), report.execution.rows.len());
    println!("wrote {}", report.manifest_path.display());
    if let Some(m) = &report.execution.failure {
        eprintln!("numerical failure: {m}");
        return ExitCode::from(EXIT_NUMERICAL);
    }
    let mut failed = false;
    for c in &report.checks {
        println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.description);
        failed |= !c.pass;
    }
    if check && failed {
        return ExitCode::from(EXIT_CHECK);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Run { spec, seed, threads, out, check } => run(spec, seed, threads, out, check),
        Cmd::Suite { name, quick, threads } => {
            let executor = match executor_for(threads) {
                Ok(e) => e,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_INVALID);
                }
            };
            match run_suite(&name, &Scale::new(quick, executor)) {
                Ok(rows) => {
                    print!("{}", format_table(&rows));
                    if rows.iter().all(|r| r.pass) { ExitCode::SUCCESS } else { ExitCode::from(EXIT_CHECK) }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_INVALID)
                }
            }
        }
    }
}
