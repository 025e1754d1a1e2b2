use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use refldp_cli::instances::registry;
use refldp_cli::run::{replay, resolve_jobs, run_scenario, with_jobs, ReplayOverrides};
use refldp_cli::{CliError, RunOptions, EXIT_ERROR, EXIT_FAIL, EXIT_PASS};

#[derive(Parser)]
#[command(name = "refldp", version, about = "Reflected stochastic evolution equations: solvers, rate function, scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (default: REFLDP_JOBS, then available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Machine-readable output on stdout.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// List registered model instances and their parameters.
    List,
    /// Re-check a stored trajectory CSV against a scenario.
    Replay {
        trajectory: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Variational-inequality slack relative to 1 + Var(L).
        #[arg(long, allow_hyphen_values = true)]
        vi_rel: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        overshoot: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        support: Option<f64>,
        #[arg(long)]
        probes: Option<usize>,
    },
}

fn list(json: bool) -> Result<i32, CliError> {
    let reg = registry();
    if json {
        println!("{}", serde_json::to_string_pretty(&reg)?);
        return Ok(EXIT_PASS);
    }
    for inst in reg {
        println!("{}: {}", inst.name, inst.summary);
        for p in inst.params {
            println!("    {:<16} {:<8} default {:<8} {}", p.name, p.kind, p.default, p.doc);
        }
    }
    Ok(EXIT_PASS)
}

fn print_report(report: &refldp::ExperimentReport, json: bool) -> Result<(), CliError> {
    if json {
        println!("{}", report.to_json()?);
        return Ok(());
    }
    let failed = report.failed_flags();
    let status = if failed.is_empty() { "PASS" } else { "FAIL" };
    println!("{}: {status} ({} checks, {:.2} s)", report.name, report.pass_flags.len(), report.wall_time);
    for f in failed {
        println!("  failed: {f} = {} (threshold {:?})", report.metrics[f], report.thresholds.get(f).map(|t| t.value));
    }
    for note in &report.notes {
        println!("  note: {note}");
    }
    for a in &report.artifacts {
        println!("  wrote {a}");
    }
    Ok(())
}

fn exit_for(report: &refldp::ExperimentReport) -> i32 {
    if report.passed() {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    let jobs = resolve_jobs(cli.jobs)?;
    let json = cli.json;
    match cli.command {
        Command::List => list(json),
        Command::Run { scenario, seed, output } => {
            let outcome = with_jobs(jobs, || run_scenario(&scenario, &RunOptions { seed, output }))??;
            print_report(&outcome.report, json)?;
            Ok(outcome.exit_code())
        }
        Command::Replay { trajectory, scenario, seed, vi_rel, overshoot, support, probes } => {
            let o = ReplayOverrides { vi_rel, overshoot, support, probes, seed };
            let report = with_jobs(jobs, || replay(&trajectory, &scenario, &o))??;
            print_report(&report, json)?;
            Ok(exit_for(&report))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_PASS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
