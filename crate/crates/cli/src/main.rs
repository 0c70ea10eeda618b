use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use rkctl::config::{default_config, Config};
use rkctl::experiments::{dispatch, EXPERIMENTS};
use rkctl::manifest::Outputs;
use rkctl::{CliError, EXIT_BLOW_UP, EXIT_CONFIG, EXIT_OK};

/// Step size control experiments for explicit Runge-Kutta methods.
#[derive(Debug, Parser)]
#[command(name = "rkctl", version)]
struct Args {
    /// run, plateau, spectra, coldstart, exner-eigen, cfl-bisect, convergence or all
    experiment: String,
    /// Configuration file; the experiment's bundled defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Control mode: error or cfl.
    #[arg(long)]
    mode: Option<String>,
    /// CFL number for `--mode cfl`.
    #[arg(long)]
    nu: Option<f64>,
    /// Bisect the largest stable CFL number instead of a single run.
    #[arg(long)]
    bisect_cfl: bool,
    /// Lower CFL bracket.
    #[arg(long)]
    lo: Option<f64>,
    /// Upper CFL bracket.
    #[arg(long)]
    hi: Option<f64>,
    /// Tolerance or comma-separated tolerance list.
    #[arg(long)]
    tol: Option<String>,
    /// Method name or comma-separated list.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    hv1: Option<f64>,
    #[arg(long)]
    hv2: Option<f64>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    ag: Option<f64>,
    /// Sweep a parameter grid (exner-eigen).
    #[arg(long)]
    sweep: bool,
    /// `key=value` or `section.key=value` overrides.
    overrides: Vec<String>,
}

impl Args {
    fn flag_overrides(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(value) = value {
                v.push(format!("{key}={value}"));
            }
        };
        push("mode", self.mode.clone());
        push("cfl.nu", self.nu.map(|x| x.to_string()));
        push("cfl.lo", self.lo.map(|x| x.to_string()));
        push("cfl.hi", self.hi.map(|x| x.to_string()));
        push("controller.tol", self.tol.clone());
        push("method", self.method.clone());
        push("problem.problem", self.problem.clone());
        push("problem.alpha", self.alpha.map(|x| x.to_string()));
        push("seed", self.seed.map(|x| x.to_string()));
        push("exner.h", self.h.map(|x| x.to_string()));
        push("exner.hv1", self.hv1.map(|x| x.to_string()));
        push("exner.hv2", self.hv2.map(|x| x.to_string()));
        push("exner.g", self.g.map(|x| x.to_string()));
        push("exner.sigma", self.sigma.map(|x| x.to_string()));
        push("exner.ag", self.ag.map(|x| x.to_string()));
        if self.sweep {
            push("exner.sweep", Some("true".into()));
        }
        v
    }
}

fn experiment_name(args: &Args) -> Result<String, CliError> {
    let name = args.experiment.replace('_', "-");
    if !EXPERIMENTS.contains(&name.as_str()) {
        return Err(CliError::Config(format!(
            "unknown experiment `{}`; expected one of {}",
            args.experiment,
            EXPERIMENTS.join(", ")
        )));
    }
    Ok(if args.bisect_cfl && name == "run" { "cfl-bisect".into() } else { name })
}

fn execute(args: &Args) -> Result<i32, CliError> {
    let experiment = experiment_name(args)?;
    let mut cfg = match &args.config {
        Some(path) => Config::load(path)?,
        None => Config::parse(default_config(&experiment).unwrap_or(""))?,
    };
    for o in args.overrides.iter().chain(&args.flag_overrides()) {
        cfg.apply_override(o)?;
    }
    let mut out = Outputs::new(&args.out)?;
    let outcome = dispatch(&experiment, &cfg, &mut out)?;
    let manifest = out.finish(&experiment, &cfg)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    eprintln!("wrote {}", manifest.display());
    match outcome.blow_up {
        Some(reason) => {
            eprintln!("blow-up: {reason}");
            Ok(EXIT_BLOW_UP)
        }
        None => Ok(EXIT_OK),
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
            return ExitCode::from(code as u8);
        }
    };
    let code = match execute(&args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("rkctl: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
