use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fortstream::pipeline::Variant;
use fortstream::sim::Schedule;

mod commands;
mod compare;

#[derive(Parser)]
#[command(name = "fortstream", version, about = "FORTRAN 77 to streaming dataflow pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rewrite legacy sources as modular free-form code.
    Refactor {
        #[command(flatten)]
        src: Sources,
        /// Also write refactor_report.json.
        #[arg(long)]
        emit_report: bool,
    },
    /// Build the functional IR of the time-step body.
    Analyze {
        #[command(flatten)]
        src: Sources,
        /// Write the IR as ir.json.
        #[arg(long)]
        dump_ir: bool,
    },
    /// Lower to a pipeline and write kernel texts and the graph.
    Compile {
        #[command(flatten)]
        src: Sources,
        #[command(flatten)]
        lowering: Lowering,
    },
    /// Run the program with its time step on the simulated pipeline.
    Simulate {
        #[command(flatten)]
        src: Sources,
        #[command(flatten)]
        lowering: Lowering,
        #[command(flatten)]
        run: RunFlags,
        /// File name for the JSON report, under --out.
        #[arg(long, value_name = "FILE")]
        dump_report: Option<PathBuf>,
    },
    /// Check each variant against the reference model.
    Compare {
        #[command(flatten)]
        exp: Experiment,
        /// Comma-separated variants.
        #[arg(long, value_delimiter = ',', value_parser = parse_variant, default_value = "baseline,channelized,smartcache")]
        variants: Vec<Variant>,
        #[command(flatten)]
        run: RunFlags,
        #[arg(long, default_value_t = 64)]
        capacity: usize,
        /// Allowed distance from the reference in units in the last place.
        #[arg(long, default_value_t = 0)]
        ulp_tolerance: u32,
    },
    /// Predicted memory traffic and pipeline shape per variant.
    Metrics {
        #[command(flatten)]
        exp: Experiment,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct Sources {
    /// Source files (.f/.for fixed form, anything else free form).
    inputs: Vec<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// PARAMETER override, NAME=VALUE; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_param)]
    params: Vec<(String, i32)>,
}

#[derive(Args)]
struct Lowering {
    #[arg(long, value_parser = parse_variant)]
    variant: Variant,
    /// Minimum channel depth.
    #[arg(long, default_value_t = 64)]
    capacity: usize,
}

#[derive(Args)]
struct RunFlags {
    /// rr or random:<seed>.
    #[arg(long, value_parser = parse_schedule, default_value = "rr", conflicts_with = "seed")]
    sched: Schedule,
    /// Shorthand for --sched random:<seed>.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 4_000_000_000)]
    max_steps: u64,
}

impl RunFlags {
    fn schedule(&self) -> Schedule {
        self.seed.map_or(self.sched, Schedule::Random)
    }
}

#[derive(Args)]
struct Experiment {
    /// Experiment configuration (JSON).
    #[arg(long, value_name = "FILE")]
    experiment: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
        format!("unknown variant `{s}`; valid variants: {}", names.join(", "))
    })
}

fn parse_schedule(s: &str) -> Result<Schedule, String> {
    Schedule::parse(s).ok_or_else(|| format!("bad schedule `{s}`; expected rr or random:<seed>"))
}

fn parse_param(s: &str) -> Result<(String, i32), String> {
    let (k, v) = s.split_once('=').ok_or("expected NAME=VALUE")?;
    let v = v.trim().parse().map_err(|_| format!("`{v}` is not an integer"))?;
    Ok((k.trim().to_ascii_lowercase(), v))
}

/// Why a command stopped; each kind has a fixed exit code.
#[derive(Debug)]
pub enum Failure {
    /// Results disagree with the reference, or the input program is rejected.
    Verify(String),
    Usage(String),
    /// I/O trouble, deadlock, step limit.
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verify(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Internal(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Refactor { src, emit_report } => commands::refactor(&src, emit_report),
        Command::Analyze { src, dump_ir } => commands::analyze(&src, dump_ir),
        Command::Compile { src, lowering } => commands::compile(&src, &lowering),
        Command::Simulate { src, lowering, run, dump_report } => {
            commands::simulate(&src, &lowering, &run, dump_report.as_deref())
        }
        Command::Compare { exp, variants, run, capacity, ulp_tolerance } => {
            compare::compare(&exp, &variants, &run, capacity, ulp_tolerance)
        }
        Command::Metrics { exp, json } => compare::metrics(&exp, json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Verify(m) | Failure::Internal(m) => eprintln!("error: {m}"),
                Failure::Usage(m) => eprintln!("usage error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
