//! dmtlab: configuration-driven experiment runner for
//! diversity-multiplexing-delay tradeoffs of one-bit-CSI MIMO links.
//!
//! Exit codes: 0 success, 2 configuration/usage error, 3 numerical or
//! simulation-abort diagnostic.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dmtlab_cli::config::{
    CliError, CurveParams, Figure3Params, FileConfig, Overrides, SweepParams,
};
use dmtlab_cli::emit;

#[derive(Debug, Parser)]
#[command(
    name = "dmtlab",
    about = "Analytic curves and Monte Carlo sweeps for MIMO diversity-multiplexing-delay tradeoffs with one-bit causal transmit CSI",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Emit the analytic bound table over a multiplexing-gain grid.
    Curve(CommonArgs),
    /// Curve preset: M=N=2, l=8, deadlines 1,2,3,4,8.
    Figure2(CommonArgs),
    /// Emit the achieved-diversity ratio versus deadline for N=1 links.
    Figure3(CommonArgs),
    /// Run a Monte Carlo SNR sweep and estimate the diversity slope.
    Sweep(CommonArgs),
    /// Audit realized power against the long-term budget.
    Audit(CommonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    #[value(alias = "printed_alpha")]
    PrintedAlpha,
    #[value(alias = "printed_exmp2")]
    PrintedExmp2,
    #[value(name = "printed-f-i", alias = "printed_f_i")]
    PrintedFI,
}

impl VariantArg {
    fn name(self) -> &'static str {
        match self {
            VariantArg::PrintedAlpha => "printed_alpha",
            VariantArg::PrintedExmp2 => "printed_exmp2",
            VariantArg::PrintedFI => "printed_f_i",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScheduleArg {
    Printed,
    Exponent,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Flat TOML experiment file; command defaults fill missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials per SNR point.
    #[arg(long)]
    trials: Option<u64>,
    /// Comma-separated SNR grid in dB.
    #[arg(long, value_delimiter = ',')]
    snr_db_list: Option<Vec<f64>>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Printed-form variant switches (repeatable).
    #[arg(long = "variant", value_enum)]
    variant: Vec<VariantArg>,
    /// Long-term power schedule selector.
    #[arg(long, value_enum)]
    schedule: Option<ScheduleArg>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            trials: self.trials,
            snr_db_list: self.snr_db_list.clone(),
            out: self.out.clone(),
            variants: self.variant.iter().map(|v| v.name().to_string()).collect(),
            schedule: self.schedule.map(|s| {
                match s {
                    ScheduleArg::Printed => "printed",
                    ScheduleArg::Exponent => "exponent",
                }
                .to_string()
            }),
        }
    }
}

fn deliver(text: String, out: Option<&PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Curve(args) => {
            let file = FileConfig::load(args.config.as_deref())?;
            let params = CurveParams::resolve(&file, &args.overrides())?;
            deliver(emit::curve_csv(&params)?, params.out.as_ref())
        }
        Command::Figure2(args) => {
            let file = FileConfig::load(args.config.as_deref())?;
            let params = CurveParams::resolve_figure2(&file, &args.overrides())?;
            deliver(emit::curve_csv(&params)?, params.out.as_ref())
        }
        Command::Figure3(args) => {
            let file = FileConfig::load(args.config.as_deref())?;
            let params = Figure3Params::resolve(&file, &args.overrides())?;
            deliver(emit::figure3_csv(&params)?, params.out.as_ref())
        }
        Command::Sweep(args) => {
            let file = FileConfig::load(args.config.as_deref())?;
            let params = SweepParams::resolve(&file, &args.overrides())?;
            deliver(emit::sweep_csv(&params)?, params.out.as_ref())
        }
        Command::Audit(args) => {
            let file = FileConfig::load(args.config.as_deref())?;
            let params = SweepParams::resolve(&file, &args.overrides())?;
            deliver(emit::audit_text(&params)?, params.out.as_ref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err @ CliError::Config(_)) => {
            eprintln!("dmtlab: {err}");
            ExitCode::from(2)
        }
        Err(err @ CliError::Numeric(_)) => {
            eprintln!("dmtlab: {err}");
            ExitCode::from(3)
        }
    }
}
