use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use axmix::scenario::{self, Scenario, ScenarioConfig, ScenarioError};
use clap::{Parser, Subcommand};

/// Photon-axion beam splitting and cavity bifurcation simulator.
#[derive(Debug, Parser)]
#[command(name = "axmix", version)]
struct Cli {
    /// Output directory (overrides the scenario's `outputs`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Number of cavity passes (overrides `cavity.passes`).
    #[arg(long, global = true)]
    passes: Option<usize>,

    /// Suppress the summary on standard output.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file and write its result files.
    Run { config: PathBuf },
    /// Check a scenario file and report every violation.
    Validate { config: PathBuf },
    /// Show or export a shipped preset (lab_cavity, magnetar).
    Preset {
        name: String,
        /// Print the preset's JSON (or write it to --out).
        #[arg(long)]
        emit: bool,
    },
}

const EXIT_INVALID: u8 = 1;
const EXIT_PHYSICS: u8 = 2;
const EXIT_IO: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<ScenarioError>() {
        Some(
            ScenarioError::Parse(_) | ScenarioError::Invalid(_) | ScenarioError::UnknownPreset(_),
        ) => EXIT_INVALID,
        Some(ScenarioError::Physics { .. }) => EXIT_PHYSICS,
        Some(ScenarioError::Io { .. }) | None => EXIT_IO,
    }
}

fn load(path: &Path, passes: Option<usize>) -> Result<ScenarioConfig> {
    let mut config = ScenarioConfig::load(path)?;
    if let (Some(n), Some(c)) = (passes, config.cavity.as_mut()) {
        c.passes = n;
    }
    Ok(config)
}

fn run(cli: &Cli, path: &Path) -> Result<ExitCode> {
    let config = load(path, cli.passes)?;
    let scenario = Scenario::from_config(&config)?;
    let out = cli
        .out
        .clone()
        .or_else(|| config.outputs.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| Path::new("out").join(config.name.as_str()));
    let summary =
        scenario::run(&scenario, &out).with_context(|| format!("running {}", path.display()))?;
    if !cli.quiet {
        println!("scenario        {}", config.name.as_str());
        println!("output          {}", summary.out_dir.display());
        println!("delta_theta     {:e} rad", summary.delta_theta);
        if let Some(f) = summary.geometric_factor {
            println!("f_G             {f}");
        }
        if let Some(s) = summary.std_y {
            println!("std_y           {s:e} m");
        }
        if let Some(s) = summary.weighted_separation {
            println!("weighted sep.   {s:e} m");
        }
        if let Some(p) = summary.fitted_exponent {
            println!("growth exponent {p:.4}");
        }
        if let Some(d) = summary.central_deficit {
            println!("central deficit {d:e}");
        }
        if let Some(d) = summary.reported_deficit {
            println!("with gain       {d:e}");
        }
        println!("files           {}", summary.files.join(", "));
    }
    Ok(ExitCode::SUCCESS)
}

fn validate(cli: &Cli, path: &Path) -> Result<ExitCode> {
    let report = load(path, cli.passes)?.validate();
    if report.is_valid() {
        if !cli.quiet {
            println!("{}: valid (0 findings)", path.display());
        }
        return Ok(ExitCode::SUCCESS);
    }
    if !cli.quiet {
        println!("{}: {} finding(s)", path.display(), report.findings.len());
        print!("{report}");
    }
    Ok(ExitCode::from(EXIT_INVALID))
}

fn preset(cli: &Cli, name: &str, emit: bool) -> Result<ExitCode> {
    let source = scenario::preset_source(name)?;
    match (&cli.out, emit) {
        (Some(dir), _) => {
            fs::create_dir_all(dir).map_err(|e| ScenarioError::Io {
                path: dir.display().to_string(),
                source: e,
            })?;
            let path = dir.join(format!("{name}.json"));
            fs::write(&path, source).map_err(|e| ScenarioError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            if !cli.quiet {
                println!("{}", path.display());
            }
        }
        (None, true) => print!("{source}"),
        (None, false) => {
            let config = scenario::preset(name)?;
            println!("{name}: {}", config.description.as_deref().unwrap_or(""));
            println!("use --emit to print the JSON, --out <dir> to write it");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => run(&cli, config),
        Command::Validate { config } => validate(&cli, config),
        Command::Preset { name, emit } => preset(&cli, name, *emit),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
