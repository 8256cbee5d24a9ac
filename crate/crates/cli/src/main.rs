//! `narx-fusion`: simulate reference plants, identify local ARX models, fuse
//! them into a global polynomial NARX model, validate and benchmark.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use narx_fusion_core::fusion::Case;
use narx_fusion_core::local_ident::{ArxOrders, ExcitationSpec};
use narx_fusion_core::{OperatingPoint, ValidationMode};

use commands::{parse_case, parse_op, StepSpec};

/// An error tagged with the pipeline stage it came from.
pub struct StageError {
    stage: &'static str,
    error: anyhow::Error,
}

pub type StageResult<T> = Result<T, StageError>;

pub trait Stage<T> {
    fn stage(self, stage: &'static str) -> StageResult<T>;
}

impl<T, E: Into<anyhow::Error>> Stage<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> StageResult<T> {
        self.map_err(|e| StageError {
            stage,
            error: e.into(),
        })
    }
}

fn report_error(stage: &str, message: String, causes: Vec<String>) {
    let body = serde_json::json!({ "error": { "stage": stage, "message": message, "causes": causes } });
    eprintln!("{body}");
}

#[derive(Parser)]
#[command(name = "narx-fusion", version, about = "Fuse local linear models into a global polynomial NARX model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    FreeRun,
    OneStep,
}

impl From<Mode> for ValidationMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::FreeRun => ValidationMode::FreeRun,
            Mode::OneStep => ValidationMode::OneStep,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a reference plant from rest and write a k,u,y CSV.
    Simulate {
        /// toy, tank or hw
        #[arg(long, value_parser = parse_case)]
        plant: Case,
        /// Input step BEFORE:AFTER@INDEX
        #[arg(long, conflicts_with = "constant", required_unless_present = "constant")]
        step: Option<StepSpec>,
        /// Constant input
        #[arg(long = "const")]
        constant: Option<f64>,
        /// Number of samples
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Sampling and integration step (tank only)
        #[arg(long)]
        dt: Option<f64>,
        /// Output CSV (stdout when omitted)
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Identify local ARX models from a plant (PRBS experiments) or a CSV.
    IdentifyLocal {
        /// Plant to excite around each --at coordinate
        #[arg(long, value_parser = parse_case, conflicts_with = "data")]
        plant: Option<Case>,
        /// Grid coordinates (input units; level for the tank)
        #[arg(long, value_delimiter = ',')]
        at: Vec<f64>,
        /// k,u,y CSV measured around --op
        #[arg(long)]
        data: Option<PathBuf>,
        /// Operating point U_S:Y_S of --data
        #[arg(long, value_parser = parse_op)]
        op: Option<OperatingPoint>,
        /// Sampling interval of --data
        #[arg(long, default_value_t = 1.0)]
        dt: f64,
        #[arg(long, default_value_t = 2)]
        n_a: usize,
        #[arg(long, default_value_t = 2)]
        n_b: usize,
        #[arg(long, default_value_t = 0)]
        delay: usize,
        /// Experiment length per operating point
        #[arg(long, default_value_t = 448)]
        n: usize,
        /// PRBS amplitude as a fraction of |u_s|
        #[arg(long, default_value_t = 0.05)]
        fraction: f64,
        /// Smallest PRBS amplitude
        #[arg(long, default_value_t = 0.01)]
        floor: f64,
        /// PRBS switch period in samples
        #[arg(long, default_value_t = 10)]
        switch_period: usize,
        /// Overridden by NARX_FUSION_SEED
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output JSON (stdout when omitted)
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run a fusion experiment described by a TOML config.
    Fuse {
        config: PathBuf,
        #[arg(long, default_value = "fuse-out")]
        out_dir: PathBuf,
    },
    /// Score a model (fused or local JSON) against a k,u,y CSV.
    Validate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::FreeRun)]
        mode: Mode,
        #[arg(long, default_value_t = 1.0)]
        dt: f64,
        /// Warm-up samples taken from the data (default: the model's max lag)
        #[arg(long)]
        start: Option<usize>,
        /// Write k,u,y,prediction here
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a reference benchmark grid: toy, tank or hw.
    Benchmark {
        #[arg(value_parser = parse_case)]
        case: Case,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn run(cli: Cli) -> StageResult<()> {
    match cli.command {
        Command::Simulate {
            plant,
            step,
            constant,
            n,
            dt,
            out,
        } => commands::simulate(commands::SimulateOpts {
            plant,
            step,
            constant,
            n,
            dt,
            out,
        }),
        Command::IdentifyLocal {
            plant,
            at,
            data,
            op,
            dt,
            n_a,
            n_b,
            delay,
            n,
            fraction,
            floor,
            switch_period,
            seed,
            out,
        } => commands::identify_local(commands::IdentifyOpts {
            plant,
            at,
            data,
            op,
            dt,
            orders: ArxOrders { n_a, n_b, delay },
            excitation: ExcitationSpec {
                length: n,
                fraction,
                floor,
                switch_period,
                seed,
            },
            out,
        }),
        Command::Fuse { config, out_dir } => commands::fuse(&config, &out_dir),
        Command::Validate {
            model,
            data,
            mode,
            dt,
            start,
            trace,
        } => commands::validate(commands::ValidateOpts {
            model,
            data,
            mode: mode.into(),
            dt,
            start,
            trace,
        }),
        Command::Benchmark { case, out_dir } => commands::benchmark(case, &out_dir),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            report_error("usage", e.render().to_string().trim().to_string(), Vec::new());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(StageError { stage, error }) => {
            let causes = error.chain().skip(1).map(|c| c.to_string()).collect();
            report_error(stage, error.to_string(), causes);
            ExitCode::FAILURE
        }
    }
}
