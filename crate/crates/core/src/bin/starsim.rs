use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use starsim::harness::{
    parse_element_range, parse_protocol_list, plot_from_dir, run_sweep, validate, write_outputs,
    Fault, ScenarioKind, SweepConfig, ValidateOptions,
};
use starsim::Error;

#[derive(Parser)]
#[command(
    name = "starsim",
    version,
    about = "STAR surface two-user MISO power-minimization simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a sweep from flags; flags override the (optional) config file.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Element counts as a:b:step (inclusive).
        #[arg(long)]
        elements: Option<String>,
        /// Comma-separated protocols: ES,MS,TS,Conventional,Omni.
        #[arg(long)]
        protocols: Option<String>,
        /// unicast, multicast or both.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the self-check suite; exits 1 if any check fails.
    Validate {
        /// Instances per randomized check.
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
    /// Regenerate plot_<scenario>.csv from an existing aggregate.csv.
    Plotdata {
        #[arg(long = "in")]
        dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    Conservation,
}

enum Failure {
    Validation,
    Error(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn sweep(config: SweepConfig, out: Option<PathBuf>) -> Result<(), Failure> {
    let dir = out.unwrap_or_else(|| config.output_dir.clone());
    let output = run_sweep(&config)?;
    for path in write_outputs(&output, &config.scenarios, &dir)? {
        eprintln!("wrote {}", path.display());
    }
    eprint!("{}", output.summary());
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, out } => sweep(SweepConfig::load(&config)?, out),
        Command::Sweep {
            config,
            elements,
            protocols,
            scenario,
            trials,
            seed,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => SweepConfig::load(&path)?,
                None => SweepConfig::default(),
            };
            if let Some(e) = elements {
                cfg.elements = parse_element_range(&e)?;
            }
            if let Some(p) = protocols {
                cfg.protocols = parse_protocol_list(&p)?;
            }
            if let Some(s) = scenario {
                cfg.scenarios = ScenarioKind::parse_selection(&s)?;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            cfg.validate()?;
            sweep(cfg, out)
        }
        Command::Validate {
            instances,
            inject_fault,
        } => {
            if instances == 0 {
                return Err(Error::Config("--instances must be >= 1".into()).into());
            }
            let report = validate(&ValidateOptions {
                fault: inject_fault.map(|FaultArg::Conservation| Fault::IndependentReflection),
                instances,
            });
            println!("{report}");
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Validation)
            }
        }
        Command::Plotdata { dir } => {
            for path in plot_from_dir(&dir)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation) => ExitCode::from(1),
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Io { .. } | Error::Csv { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
