//! Start-up transient: error control against CFL control at the asymptotic
//! effective CFL number.
//!
//! The error-controlled run must complete. Its accepted steps give
//!
//! * `dt_min_start`: the smallest step among the first 50,
//! * `dt_median_late`: the median step over the final quartile,
//! * `nu_eff`: the median effective CFL number over the final quartile,
//!
//! where the final quartile excludes the last step, which is clamped to hit
//! the end time. CFL control is then run at `nu_eff` and at
//! `(1 − coldstart.nu_reduction)·nu_eff`, and the largest surviving CFL number
//! below `nu_eff` is bisected.

use std::fmt::Write as _;

use rkctl_core::cfl::{bisect_max_cfl, CflError};
use rkctl_core::integrator::StepStatistics;

use super::{integrate_problem, median, single_method, single_tolerance, Control, Outcome, RunResult};
use crate::config::Config;
use crate::manifest::Outputs;
use crate::problem;
use crate::CliError;

/// Accepted steps inspected for the start-up minimum.
pub const START_STEPS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct CflProbe {
    pub nu: f64,
    pub survived: bool,
    /// Time reached (the end time on success).
    pub t_reached: f64,
    pub stats: StepStatistics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColdstartResult {
    pub stats: StepStatistics,
    pub dt_min_start: f64,
    pub dt_median_late: f64,
    pub nu_eff: f64,
    /// CFL runs at `nu_eff` and at the reduced number.
    pub probes: Vec<CflProbe>,
    /// Largest surviving CFL number, if one exists above `cfl.lo`.
    pub nu_max: Option<f64>,
}

impl ColdstartResult {
    pub fn transient_ratio(&self) -> f64 {
        self.dt_median_late / self.dt_min_start
    }

    /// Relative reduction from `nu_eff` needed to survive, `1 − ν_max/ν_eff`.
    pub fn required_reduction(&self) -> Option<f64> {
        self.nu_max.map(|n| 1.0 - n / self.nu_eff)
    }

    pub fn report(&self, method: &str, tol: f64) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "method: {method}");
        let _ = writeln!(s, "tol: {tol:e}");
        let _ = writeln!(s, "accepted: {}", self.stats.n_accepted);
        let _ = writeln!(s, "rejected: {}", self.stats.n_rejected);
        let _ = writeln!(s, "dt_min_first_{START_STEPS}: {:e}", self.dt_min_start);
        let _ = writeln!(s, "dt_median_final_quartile: {:e}", self.dt_median_late);
        let _ = writeln!(s, "transient_ratio: {:.4}", self.transient_ratio());
        let _ = writeln!(s, "nu_eff: {:.6}", self.nu_eff);
        for p in &self.probes {
            let status = if p.survived { "survived".to_string() } else { format!("crashed at t = {:.6}", p.t_reached) };
            let _ = writeln!(s, "cfl {:.6} ({:.3} nu_eff): {status}", p.nu, p.nu / self.nu_eff);
        }
        match (self.nu_max, self.required_reduction()) {
            (Some(n), Some(r)) => {
                let _ = writeln!(s, "nu_max: {n:.6}");
                let _ = writeln!(s, "required_reduction: {r:.4}");
            }
            _ => {
                let _ = writeln!(s, "nu_max: none above cfl.lo");
            }
        }
        s
    }

    pub fn cfl_csv(&self) -> String {
        let mut s = String::from("nu,survived,t_reached,FE,A,R\n");
        for p in &self.probes {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                p.nu,
                u8::from(p.survived),
                p.t_reached,
                p.stats.n_fe,
                p.stats.n_accepted,
                p.stats.n_rejected
            );
        }
        s
    }
}

pub fn run(cfg: &Config, out: &mut Outputs) -> Result<(Outcome, Option<ColdstartResult>), CliError> {
    let (method, tab) = single_method(cfg)?;
    let tol = single_tolerance(cfg)?;
    let reduction: f64 = cfg.parse_or("coldstart", "nu_reduction", 0.1)?;
    if !(reduction > 0.0 && reduction < 1.0) {
        return Err(CliError::Config(format!("coldstart.nu_reduction = {reduction} outside (0, 1)")));
    }
    let problem = problem::build(cfg, None)?;
    let span = (0.0, problem.t_end);

    let run = integrate_problem(cfg, method, &tab, &problem, &problem.u0, span, Control::Error(tol))?;
    if let Some(sol) = run.solution() {
        out.write("trace.csv", &sol.trace.to_csv())?;
    }
    let sol = match run {
        RunResult::Done(sol) => sol,
        RunResult::Crashed { reason, .. } => {
            return Ok((
                Outcome {
                    summary: Vec::new(),
                    blow_up: Some(format!("error-controlled run: {reason}")),
                },
                None,
            ))
        }
    };
    let summary_line = sol.stats.summary_line(&tab.name, tol);

    let accepted: Vec<_> = sol.trace.accepted().collect();
    let n = accepted.len();
    if n < 8 {
        return Err(CliError::Config(format!("only {n} accepted steps; lengthen problem.t_end")));
    }
    let dt_min_start = accepted.iter().take(START_STEPS).map(|r| r.dt).fold(f64::INFINITY, f64::min);
    let late = &accepted[3 * n / 4..n - 1];
    let dt_median_late = median(&late.iter().map(|r| r.dt).collect::<Vec<_>>());
    let cfls: Vec<f64> = late.iter().filter_map(|r| r.effective_cfl).collect();
    if cfls.is_empty() {
        return Err(CliError::Internal("no effective CFL numbers recorded".into()));
    }
    let nu_eff = median(&cfls);

    let mut probes = Vec::new();
    for nu in [nu_eff, (1.0 - reduction) * nu_eff] {
        let r = integrate_problem(cfg, method, &tab, &problem, &problem.u0, span, Control::Cfl(nu))?;
        let s = r.solution();
        probes.push(CflProbe {
            nu,
            survived: r.is_done(),
            t_reached: s.map_or(0.0, |s| s.t),
            stats: s.map(|s| s.stats).unwrap_or_default(),
        });
    }

    let lo: f64 = cfg.parse_or("cfl", "lo", 0.05)?;
    let mut failure = None;
    let nu_max = match bisect_max_cfl(
        |nu| match integrate_problem(cfg, method, &tab, &problem, &problem.u0, span, Control::Cfl(nu)) {
            Ok(r) => r.is_done(),
            Err(e) => {
                failure.get_or_insert(e);
                false
            }
        },
        lo,
        nu_eff,
    ) {
        Ok(nu) => Some(nu),
        // ν_eff itself survives: no reduction needed.
        Err(CflError::Bracket(_)) if probes[0].survived => Some(nu_eff),
        Err(CflError::Bracket(_)) => None,
        Err(e) => return Err(CliError::Internal(e.to_string())),
    };
    if let Some(e) = failure {
        return Err(e);
    }

    let result = ColdstartResult {
        stats: sol.stats,
        dt_min_start,
        dt_median_late,
        nu_eff,
        probes,
        nu_max,
    };
    out.write("cfl.csv", &result.cfl_csv())?;
    out.write("summary.txt", &format!("{summary_line}\n"))?;
    out.write("report.txt", &result.report(&tab.name, tol))?;
    Ok((
        Outcome {
            summary: vec![summary_line],
            blow_up: None,
        },
        Some(result),
    ))
}
