use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use hydrospec::error::Error;
use hydrospec::experiment::{self, Command, ExperimentConfig, Num};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Spectrum,
    Resonances,
    Track,
    Validate,
    SweepAlpha,
    SweepTau,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Spectrum => Command::Spectrum,
            Cmd::Resonances => Command::Resonances,
            Cmd::Track => Command::Track,
            Cmd::Validate => Command::Validate,
            Cmd::SweepAlpha => Command::SweepAlpha,
            Cmd::SweepTau => Command::SweepTau,
        }
    }
}

/// Spectra and resonances of deformed Rayleigh and Orr-Sommerfeld operators.
#[derive(Debug, Parser)]
#[command(name = "hydrospec", version)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Discretization size (overrides `N`).
    #[arg(long = "N")]
    n: Option<usize>,
    /// Deformation scale (overrides `tau`).
    #[arg(long)]
    tau: Option<f64>,
}

fn apply(args: &Args) -> Result<(ExperimentConfig, PathBuf), Error> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    let cmd = Command::from(args.command);
    if cfg.command != cmd {
        return Err(Error::Config(format!("config is for `{}`, invoked as `{cmd}`", cfg.command)));
    }
    if let Some(n) = args.n {
        cfg.n = Some(n);
    }
    if let Some(t) = args.tau {
        if cmd == Command::SweepTau {
            return Err(Error::Config("--tau cannot override `tau_values` in sweep-tau".into()));
        }
        cfg.tau = Some(Num::Value(t));
    }
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir());
    Ok((cfg, out))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = apply(&args).and_then(|(cfg, out)| experiment::run(&cfg, &out));
    match result {
        Ok(summary) => {
            for f in &summary.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("hydrospec: {e}");
            ExitCode::from(experiment::exit_code(&e) as u8)
        }
    }
}
