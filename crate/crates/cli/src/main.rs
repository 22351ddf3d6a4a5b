//! `rzchart`: design and evaluate Shewhart-RZ charts from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Output;
use config::{
    ConfigError, DesignArgs, EarlArgs, EstimationArgs, FileConfig, InputArgs, ProcessArgs, ShiftArgs, SimArgs,
    TableArgs,
};

#[derive(Parser, Debug)]
#[command(
    name = "rzchart",
    version,
    about = "Shewhart-RZ control charts for the ratio of two autocorrelated normal variables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write output here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Probability control limits
    Design {
        #[command(flatten)]
        process: ProcessArgs,
        #[command(flatten)]
        design: DesignArgs,
        #[command(flatten)]
        common: Common,
    },
    /// ARL under a shift of the mean ratio and correlation
    Arl {
        #[command(flatten)]
        process: ProcessArgs,
        #[command(flatten)]
        design: DesignArgs,
        #[command(flatten)]
        shift: ShiftArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Expected ARL over an interval of shifts
    Earl {
        #[command(flatten)]
        process: ProcessArgs,
        #[command(flatten)]
        design: DesignArgs,
        /// Out-of-control correlation, default rho0
        #[arg(long, allow_hyphen_values = true)]
        rho1: Option<f64>,
        #[command(flatten)]
        earl: EarlArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Limit/ARL tables over parameter grids, or EARL-versus-phi grids
    Table {
        #[command(flatten)]
        table: TableArgs,
        /// False alarm probability, default 0.005 for presets
        #[arg(long, conflicts_with = "arl0")]
        alpha: Option<f64>,
        #[arg(long)]
        arl0: Option<f64>,
        /// In-control mean ratio, default 1
        #[arg(long)]
        z0: Option<f64>,
        /// EARL method for figure grids: gauss-legendre or grid
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        step: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Least-squares VAR(1) fit to Phase I data; prints a [process] config
    Estimate {
        #[command(flatten)]
        estimation: EstimationArgs,
        /// CSV of observations: `sample,obs_index,x,y` or `x,y`
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo run lengths, or simulated data with --subgroups / --series
    Simulate {
        #[command(flatten)]
        process: ProcessArgs,
        #[command(flatten)]
        design: DesignArgs,
        #[command(flatten)]
        shift: ShiftArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Classify each subgroup of a data file against the designed limits
    Monitor {
        #[command(flatten)]
        process: ProcessArgs,
        #[command(flatten)]
        design: DesignArgs,
        /// Subgroup CSV `sample,obs_index,x,y`
        #[arg(long)]
        data: Option<PathBuf>,
        /// Use the built-in muesli filling example (model and data)
        #[arg(long)]
        example: bool,
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Design { process, design, common } => {
            let file = FileConfig::load(common.config.as_deref())?;
            commands::design(process.over(file.process), design.over(file.design), Output::open(common.out.as_deref())?)
        }
        Command::Arl { process, design, shift, common } => {
            let file = FileConfig::load(common.config.as_deref())?;
            commands::arl_cmd(
                process.over(file.process),
                design.over(file.design),
                shift.over(file.shift),
                Output::open(common.out.as_deref())?,
            )
        }
        Command::Earl { process, design, rho1, earl, common } => {
            let file = FileConfig::load(common.config.as_deref())?;
            commands::earl_cmd(
                process.over(file.process),
                design.over(file.design),
                rho1.or(file.shift.rho1),
                earl.over(file.earl),
                Output::open(common.out.as_deref())?,
            )
        }
        Command::Table { table, alpha, arl0, z0, method, order, step, common } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let design = DesignArgs { n: None, alpha, arl0 }.over(DesignArgs { n: None, ..file.design });
            let process = ProcessArgs { z0: z0.or(file.process.z0), ..Default::default() };
            let earl = EarlArgs { interval: None, method, order, step }.over(file.earl);
            commands::table(table.over(file.table), design, process, earl, Output::open(common.out.as_deref())?)
        }
        Command::Estimate { estimation, data, common } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let input = InputArgs { data, example: None }.over(file.input);
            commands::estimate(input, estimation.over(file.estimation), Output::open(common.out.as_deref())?)
        }
        Command::Simulate { process, design, shift, sim, common } => {
            let file = FileConfig::load(common.config.as_deref())?;
            commands::simulate(
                process.over(file.process),
                design.over(file.design),
                shift.over(file.shift),
                sim.over(file.simulation),
                Output::open(common.out.as_deref())?,
            )
        }
        Command::Monitor { process, design, data, example, common } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let input = InputArgs { data, example: example.then_some(true) }.over(file.input);
            commands::monitor(
                process.over(file.process),
                design.over(file.design),
                input,
                Output::open(common.out.as_deref())?,
            )
        }
    }
}

/// 2 for input problems, 3 when the numerics fail on valid input, 1 for I/O.
fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<rzchart_core::Error>() {
        return if e.is_numerical() { 3 } else { 2 };
    }
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    1
}

fn broken_pipe(err: &anyhow::Error) -> bool {
    let pipe = |io: &std::io::Error| io.kind() == std::io::ErrorKind::BrokenPipe;
    err.chain().any(|e| {
        e.downcast_ref::<std::io::Error>().is_some_and(pipe)
            || e.downcast_ref::<csv::Error>().is_some_and(|c| matches!(c.kind(), csv::ErrorKind::Io(io) if pipe(io)))
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if broken_pipe(&err) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
