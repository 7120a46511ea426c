//! Command line front end: validate a network spec, simulate it, compare
//! the traces two runs produced.
//!
//! Exit codes are stable so scripts can branch on them: 0 success, 1 the
//! input was sound but the run or comparison failed (violations, an
//! unresolved order is 3, differing traces), 2 the input itself was bad.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vennet_core::config;
use vennet_core::domain::validate_network;
use vennet_core::protocol::read_trace;
use vennet_core::simulator::{self, Mode, RunOutcome, SimError};
use vennet_core::RunSpec;

#[derive(Parser)]
#[command(name = "vennet", version, about = "Multi-site coordination runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network spec and list everything wrong with it.
    Validate { spec: PathBuf },
    /// Simulate a spec, writing the message trace and the run report.
    Run(RunArgs),
    /// Compare two trace files message by message.
    Diff { left: PathBuf, right: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    spec: PathBuf,
    /// Record protocol violations and keep going instead of halting.
    #[arg(long)]
    lenient: bool,
    /// Where to write the message trace.
    #[arg(long, default_value = "trace.txt")]
    trace: PathBuf,
    /// Where to write the run report. A .csv extension switches the format.
    #[arg(long, default_value = "report.txt")]
    report: PathBuf,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Validate { spec } => validate(&spec),
        Command::Run(args) => run(&args),
        Command::Diff { left, right } => diff(&left, &right),
    }
}

fn load(path: &Path) -> Result<RunSpec, ExitCode> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        ExitCode::from(2)
    })?;
    config::load_spec(&text).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        ExitCode::from(2)
    })
}

fn validate(path: &Path) -> ExitCode {
    let spec = match load(path) {
        Ok(spec) => spec,
        Err(code) => return code,
    };
    let violations = validate_network(&spec.network);
    if violations.is_empty() {
        let plants = spec.network.vens().count();
        println!("ok: {plants} plants in {} tiers, {} orders", spec.network.tier_count(), spec.orders.len());
        ExitCode::SUCCESS
    } else {
        for v in &violations {
            println!("{v}");
        }
        ExitCode::from(1)
    }
}

fn run(args: &RunArgs) -> ExitCode {
    let spec = match load(&args.spec) {
        Ok(spec) => spec,
        Err(code) => return code,
    };
    let mode = if args.lenient { Mode::Lenient } else { Mode::Strict };
    let report = match simulator::run(&spec, mode) {
        Ok(report) => report,
        Err(e @ (SimError::Invalid(_) | SimError::BadOrder(_))) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };

    let mut trace_text = report.trace.join("\n");
    trace_text.push('\n');
    let rendered = if args.report.extension().is_some_and(|e| e == "csv") {
        report.render_csv()
    } else {
        report.render_text()
    };
    for (path, text) in [(&args.trace, &trace_text), (&args.report, &rendered)] {
        if let Err(e) = fs::write(path, text) {
            eprintln!("{}: {e}", path.display());
            return ExitCode::from(2);
        }
    }

    print!("{}", report.render_text());
    match report.outcome {
        RunOutcome::Clean => ExitCode::SUCCESS,
        RunOutcome::Unresolved => ExitCode::from(3),
    }
}

fn diff(left: &Path, right: &Path) -> ExitCode {
    let mut sides = Vec::new();
    for path in [left, right] {
        let text = match fs::read_to_string(path) {
            Ok(text) => text,
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                return ExitCode::from(2);
            }
        };
        if let Err(e) = read_trace(&text) {
            eprintln!("{}: {e}", path.display());
            return ExitCode::from(2);
        }
        let lines: Vec<String> = text.lines().map(str::to_owned).collect();
        sides.push(lines);
    }

    let (l, r) = (&sides[0], &sides[1]);
    for (i, (a, b)) in l.iter().zip(r.iter()).enumerate() {
        if a != b {
            println!("message {} differs:", i + 1);
            println!("- {a}");
            println!("+ {b}");
            return ExitCode::from(1);
        }
    }
    if l.len() != r.len() {
        println!("traces agree for {} messages, then one side ends", l.len().min(r.len()));
        return ExitCode::from(1);
    }
    println!("identical: {} messages", l.len());
    ExitCode::SUCCESS
}
