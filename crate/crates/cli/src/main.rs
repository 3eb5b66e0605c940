mod commands;
mod error;
mod figures;
mod svg;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "mec-auction", version, about = "Repeated GSP auctions for edge-server VM allocation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write rounds.csv and summary.txt.
    Run(RunArgs),
    /// Simulate a grid of scenarios and write sweep.csv.
    Sweep(SweepArgs),
    /// Run the property suites and print a pass matrix.
    Verify(VerifyArgs),
    /// Replay the four-UE worked example and check the quoted price.
    Example1,
    /// Draw one figure from one or more CSV tables.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MechanismArg {
    Gsp,
    Vcg,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Rank,
    Sorted,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Built-in preset name.
    #[arg(long, conflicts_with = "scenario")]
    preset: Option<String>,
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "gsp")]
    mechanism: MechanismArg,
    /// Number of slots.
    #[arg(long, default_value_t = 50)]
    horizon: usize,
    /// Stop this many slots after the bids settle.
    #[arg(long)]
    stop_after: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<u32>,
    /// Give every server this strategy: rbb, bb, ab, cb or truthful.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long, value_enum, default_value = "rank")]
    price_rule: RuleArg,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// UE counts.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    sweep_ues: Vec<usize>,
    /// Server counts (fig6b).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    sweep_servers: Vec<usize>,
    /// VMs per server (fig9).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    sweep_vms: Vec<usize>,
    /// Average task-size range `lo,hi` in MB (fig10); repeat for a sweep.
    #[arg(long, value_parser = parse_range)]
    davg: Vec<[f64; 2]>,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Restrict to these suites (repeatable).
    #[arg(long)]
    suite: Vec<String>,
    /// Plant a fault to exercise the failure path.
    #[arg(long, value_enum)]
    inject: Option<InjectArg>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InjectArg {
    IrViolation,
}

#[derive(Args)]
pub struct PlotArgs {
    /// One of fig5a, fig5b, fig6a, fig6b, fig7a, fig7b, fig8a, fig8b, fig9a, fig9b, fig10a, fig10b.
    #[arg(long)]
    figure: String,
    /// Input tables; each contributes its own lines.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Output file; defaults to `<figure>.svg`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [lo, hi] = parts.as_slice() else {
        return Err(format!("expected `lo,hi`, got `{s}`"));
    };
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{lo}: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{hi}: {e}"))?;
    if !(lo > 0.0 && hi >= lo) {
        return Err(format!("need 0 < lo ≤ hi, got {lo},{hi}"));
    }
    Ok([lo, hi])
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result: Result<(), CliError> = match cli.command {
        Command::Run(a) => commands::run(&a.common),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Example1 => commands::example1(),
        Command::Plot(a) => commands::plot(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
