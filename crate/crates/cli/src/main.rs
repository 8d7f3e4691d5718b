//! `qosc`: scenario runner for the driven qubit–oscillator solver.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric or convergence
//! error.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qosc_core::Execution;

use config::{parse_override, ScenarioConfig, Units};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<qosc_core::Error> for CliError {
    fn from(e: qosc_core::Error) -> Self {
        use qosc_core::Error as E;
        match e {
            E::InvalidParameter { .. } | E::Configuration(_) | E::Domain(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("cannot write output: {e}"))
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "qosc",
    version,
    about = "Floquet spectra and dynamics of a driven qubit coupled to an oscillator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Quasienergies against the static bias.
    SpectrumEps(Common),
    /// Quasienergies against the coupling strength at fixed bias.
    SpectrumG(Common),
    /// Avoided-crossing widths Ω^K against the coupling strength.
    Gaps(Common),
    /// Survival probability and its Fourier spectrum.
    Dynamics(Common),
    /// Check a configuration: units, commensurability, cutoff convergence.
    Validate(Common),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum UnitArg {
    #[value(name = "Omega")]
    Omega,
    #[value(name = "omega_ex")]
    OmegaEx,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; repeatable, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output CSV path (default `<command>.csv` in $QOSC_OUT_DIR or the
    /// working directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and thermal sums (1 runs sequentially).
    #[arg(long)]
    jobs: Option<usize>,
    /// Unit for all frequencies in input and output.
    #[arg(long, value_enum)]
    units: Option<UnitArg>,
}

impl Common {
    fn resolve(&self) -> Result<ScenarioConfig, CliError> {
        let overrides = self
            .set
            .iter()
            .map(|s| parse_override(s))
            .collect::<Result<Vec<_>, _>>()?;
        let units = self.units.map(|u| match u {
            UnitArg::Omega => Units::Omega,
            UnitArg::OmegaEx => Units::OmegaEx,
        });
        ScenarioConfig::resolve(self.config.as_deref(), &overrides, units)
    }

    fn out_path(&self, command: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| {
            let dir = std::env::var_os("QOSC_OUT_DIR").map(PathBuf::from).unwrap_or_default();
            dir.join(format!("{command}.csv"))
        })
    }

    fn execution(&self) -> Execution {
        match self.jobs {
            Some(1) => Execution::Sequential,
            _ => Execution::Parallel,
        }
    }
}

fn check_writable(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(CliError::Config(format!(
            "output directory {} does not exist",
            dir.display()
        ))),
        _ => Ok(()),
    }
}

fn run(cmd: &Command) -> Result<(), CliError> {
    let (name, common) = match cmd {
        Command::SpectrumEps(c) => ("spectrum-eps", c),
        Command::SpectrumG(c) => ("spectrum-g", c),
        Command::Gaps(c) => ("gaps", c),
        Command::Dynamics(c) => ("dynamics", c),
        Command::Validate(c) => ("validate", c),
    };
    let cfg = common.resolve()?;
    let exec = common.execution();
    let out = common.out_path(name);
    let task = || -> Result<(), CliError> {
        if let Command::Validate(_) = cmd {
            let report = commands::validate(&cfg)?;
            print!("{report}");
            if let Some(path) = &common.out {
                check_writable(path)?;
                std::fs::write(path, report)?;
            }
            return Ok(());
        }
        check_writable(&out)?;
        match cmd {
            Command::SpectrumEps(_) => commands::spectrum_eps(&cfg, exec, &out),
            Command::SpectrumG(_) => commands::spectrum_g(&cfg, exec, &out),
            Command::Gaps(_) => commands::gaps(&cfg, exec, &out),
            Command::Dynamics(_) => commands::dynamics(&cfg, exec, &out),
            Command::Validate(_) => unreachable!("handled above"),
        }
    };
    with_pool(common.jobs, task)
}

#[cfg(feature = "parallel")]
fn with_pool<T: Send>(jobs: Option<usize>, task: impl FnOnce() -> T + Send) -> T {
    match jobs {
        Some(n) if n > 1 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(task),
            Err(_) => task(),
        },
        _ => task(),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_pool<T>(_jobs: Option<usize>, task: impl FnOnce() -> T) -> T {
    task()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qosc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
