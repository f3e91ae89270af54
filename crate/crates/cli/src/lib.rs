//! Command-line front end: TOML configuration, Bode and margin reports,
//! FF/FB comparison bundles and time-domain checks.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use steerdyn_core::emd::Architecture;

pub use commands::{Excitation, Outcome, Subject};
pub use config::{load_config, parse_config, ConfigError, SystemConfig, Violation};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "steerdyn", version, about = "Frequency-domain analysis of power-steering electromechanical dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bode data of one subject as CSV.
    Bode {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        subject: Subject,
    },
    /// Steering-loop stability margins.
    Margins {
        #[command(flatten)]
        common: Common,
    },
    /// FF versus FB comparison bundle.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Time-domain simulation of a rationalized subject.
    Sim {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        subject: Subject,
        /// `step` or `sine:<rad/s>`.
        #[arg(long, default_value = "step")]
        excitation: Excitation,
        /// Seconds; defaults to 1 s for a step and 15 periods for a sine.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Load and check a configuration.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ArchArg {
    Ff,
    Fb,
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    arch: Option<ArchArg>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config grid, `min:max:points_per_decade`.
    #[arg(long)]
    grid: Option<String>,
    /// Overrides `model.pade_order`.
    #[arg(long)]
    pade: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<(SystemConfig, Option<Architecture>), CliError> {
        let mut cfg = load_config(&self.config)?;
        if let Some(g) = &self.grid {
            cfg = cfg.with_grid(commands::parse_grid(g)?);
        }
        if let Some(p) = self.pade {
            if !(1..=10).contains(&p) {
                return Err(CliError::Usage(format!("--pade must be in 1..=10, got {p}")));
            }
            cfg.pade_order = p;
        }
        let arch = self.arch.map(|a| match a {
            ArchArg::Ff => Architecture::Feedforward,
            ArchArg::Fb => Architecture::Feedback,
        });
        Ok((cfg, arch))
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome { stderr: text, code: 1, ..Outcome::default() }
            } else {
                Outcome { stdout: text, ..Outcome::default() }
            };
        }
    };
    match dispatch(cli.command) {
        Ok(o) => o,
        Err(e) => Outcome { stderr: format!("error: {e}\n"), code: e.exit_code(), ..Outcome::default() },
    }
}

fn dispatch(command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::Bode { common, subject } => {
            let (cfg, arch) = common.load()?;
            let arch = commands::resolve_architecture(&cfg, arch)?;
            commands::bode(&cfg, subject, arch, common.out.as_deref())
        }
        Command::Margins { common } => {
            let (cfg, arch) = common.load()?;
            let arch = commands::resolve_architecture(&cfg, arch)?;
            commands::margins(&cfg, arch)
        }
        Command::Compare { common } => {
            let (cfg, _) = common.load()?;
            let out = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
            commands::compare(&cfg, &out)
        }
        Command::Sim { common, subject, excitation, duration } => {
            let (cfg, arch) = common.load()?;
            let arch = commands::resolve_architecture(&cfg, arch)?;
            commands::sim(&cfg, subject, arch, excitation, duration, common.out.as_deref())
        }
        Command::Validate { common } => {
            let (cfg, _) = common.load()?;
            commands::validate(&cfg)
        }
    }
}
