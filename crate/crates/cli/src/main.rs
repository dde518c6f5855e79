use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use preq_core::harness::{self, ExperimentConfig};

#[derive(Parser)]
#[command(name = "preq", version, about = "Quantized Hamiltonian dynamics on the sphere: phase and defect experiments")]
#[command(args_conflicts_with_subcommands = true, arg_required_else_help = true)]
struct Cli {
    /// Print the Hamiltonian preset catalog and exit.
    #[arg(long)]
    list_presets: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output`, then `results/<experiment>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Lifted phase of the quantized rotation against Cal and Sh.
    Theorem1(RunArgs),
    /// Lifted phase of the Kostant–Souriau pullback path for a general flow.
    Prop53(RunArgs),
    /// Distance between Toeplitz and Kostant–Souriau propagators.
    Theorem2(RunArgs),
    /// Quasimorphism defect of the quantized path product.
    Defect(RunArgs),
    /// Random-instance checks of the unitary and universal-cover distances.
    Distance(RunArgs),
    /// Toeplitz and Kostant–Souriau matrices with trace expansion residuals.
    ToeplitzDump(RunArgs),
}

impl Command {
    fn parts(&self) -> (&'static str, &RunArgs) {
        match self {
            Self::Theorem1(a) => ("theorem1", a),
            Self::Prop53(a) => ("prop53", a),
            Self::Theorem2(a) => ("theorem2", a),
            Self::Defect(a) => ("defect", a),
            Self::Distance(a) => ("distance", a),
            Self::ToeplitzDump(a) => ("toeplitz-dump", a),
        }
    }
}

fn run(command: &Command) -> anyhow::Result<bool> {
    let (name, args) = command.parts();
    let config = ExperimentConfig::load(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    if config.experiment != name {
        bail!("{} configures experiment `{}`, not `{name}`", args.config.display(), config.experiment);
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("results").join(name));
    let (lines, passed) = harness::execute(&config, &out)?;
    for line in lines {
        println!("{line}");
    }
    println!("results written to {}", out.display());
    Ok(passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if cli.list_presets {
        print!("{}", harness::catalog());
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        return ExitCode::from(2);
    };
    match run(&command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
