//! Single runs under error or CFL control, and CFL bisection.

use std::fmt::Write as _;

use rkctl_core::cfl::{bisect_max_cfl, CflError};

use super::{integrate_problem, single_method, single_tolerance, Control, Outcome, RunResult};
use crate::config::Config;
use crate::manifest::Outputs;
use crate::problem;
use crate::CliError;

/// Control mode selected by `mode` (`error` or `cfl`).
pub fn control(cfg: &Config) -> Result<Control, CliError> {
    match cfg.get("", "mode").unwrap_or("error") {
        "error" => Ok(Control::Error(single_tolerance(cfg)?)),
        "cfl" => Ok(Control::Cfl(cfg.require("cfl", "nu")?)),
        other => Err(CliError::Config(format!("unknown mode `{other}`, expected error or cfl"))),
    }
}

/// Writes `trace.csv` and `summary.txt`; a crash is reported as a blow-up.
pub fn run(cfg: &Config, out: &mut Outputs) -> Result<Outcome, CliError> {
    let (method, tab) = single_method(cfg)?;
    let problem = problem::build(cfg, None)?;
    let control = control(cfg)?;
    let result = integrate_problem(cfg, method, &tab, &problem, &problem.u0, (0.0, problem.t_end), control)?;
    let mut outcome = Outcome::default();
    if let Some(sol) = result.solution() {
        out.write("trace.csv", &sol.trace.to_csv())?;
        let line = sol.stats.summary_line(&tab.name, control.tol_or_nu());
        out.write("summary.txt", &format!("{line}\n"))?;
        outcome.summary.push(line);
    }
    if let RunResult::Crashed { reason, .. } = result {
        outcome.blow_up = Some(reason);
    }
    Ok(outcome)
}

/// Outcome of a CFL bisection.
#[derive(Debug, Clone, PartialEq)]
pub struct Bisection {
    pub nu_max: f64,
    /// Every probe in evaluation order: `(ν, survived)`.
    pub probes: Vec<(f64, bool)>,
}

/// Bisects the largest surviving CFL number on `[cfl.lo, cfl.hi]` for the
/// configured problem over its full time span.
pub fn bisect(cfg: &Config, problem: &problem::Problem) -> Result<Bisection, CliError> {
    let (method, tab) = single_method(cfg)?;
    let lo: f64 = cfg.parse_or("cfl", "lo", 0.1)?;
    let hi: f64 = cfg.parse_or("cfl", "hi", 4.0)?;
    let mut probes = Vec::new();
    let mut failure = None;
    let found = bisect_max_cfl(
        |nu| {
            let ok = match integrate_problem(cfg, method, &tab, problem, &problem.u0, (0.0, problem.t_end), Control::Cfl(nu)) {
                Ok(r) => r.is_done(),
                Err(e) => {
                    failure.get_or_insert(e);
                    false
                }
            };
            probes.push((nu, ok));
            ok
        },
        lo,
        hi,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    match found {
        Ok(nu_max) => Ok(Bisection { nu_max, probes }),
        Err(CflError::Bracket(m)) => Err(CliError::Config(format!("cfl.lo/cfl.hi: {m}"))),
        Err(e) => Err(CliError::Internal(e.to_string())),
    }
}

pub fn probes_csv(b: &Bisection) -> String {
    let mut s = String::from("probe,nu,survived\n");
    for (i, (nu, ok)) in b.probes.iter().enumerate() {
        let _ = writeln!(s, "{i},{nu},{}", u8::from(*ok));
    }
    s
}

/// Writes `bisect.csv`, then runs at `ν_max` and writes `trace.csv` and `summary.txt`.
pub fn cfl_bisect(cfg: &Config, out: &mut Outputs) -> Result<(Outcome, Bisection), CliError> {
    let (method, tab) = single_method(cfg)?;
    let problem = problem::build(cfg, None)?;
    let b = bisect(cfg, &problem)?;
    out.write("bisect.csv", &probes_csv(&b))?;
    let control = Control::Cfl(b.nu_max);
    let result = integrate_problem(cfg, method, &tab, &problem, &problem.u0, (0.0, problem.t_end), control)?;
    let RunResult::Done(sol) = result else {
        return Err(CliError::Internal(format!("bisected ν_max = {} no longer survives", b.nu_max)));
    };
    out.write("trace.csv", &sol.trace.to_csv())?;
    let line = sol.stats.summary_line(&tab.name, b.nu_max);
    out.write("summary.txt", &format!("{line}\n"))?;
    Ok((
        Outcome {
            summary: vec![line],
            blow_up: None,
        },
        b,
    ))
}
