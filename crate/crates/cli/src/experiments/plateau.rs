//! Tolerance sweep under error control against a bisected CFL baseline.
//!
//! For every mesh variant the largest stable CFL number is bisected, the
//! baseline is run at that number, and the configured tolerances are swept
//! under error control. Crashes become `crash` rows and do not stop the sweep.

use std::fmt::Write as _;

use super::{integrate_problem, single_method, tolerances, Control, Outcome, RunResult};
use crate::config::Config;
use crate::experiments::run::{bisect, probes_csv};
use crate::manifest::Outputs;
use crate::problem::{self, ProblemKind};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct PlateauRow {
    pub mesh: String,
    pub control: Control,
    pub fe: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshSummary {
    pub mesh: String,
    pub nu_max: f64,
    pub baseline_fe: u64,
    /// `(max − min)/min` of #FE over the completed tolerance runs.
    pub fe_variation: f64,
    /// Largest tolerance-run #FE over the baseline #FE.
    pub fe_over_baseline: f64,
    /// Largest #R/#A over the tolerance runs.
    pub max_rejection_ratio: f64,
    pub all_completed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlateauResult {
    pub method: String,
    pub rows: Vec<PlateauRow>,
    pub meshes: Vec<MeshSummary>,
}

impl PlateauResult {
    /// Relative spread of ν_max across meshes, `max/min − 1`.
    pub fn nu_max_spread(&self) -> f64 {
        let nus = self.meshes.iter().map(|m| m.nu_max);
        let max = nus.clone().fold(f64::NEG_INFINITY, f64::max);
        let min = nus.fold(f64::INFINITY, f64::min);
        max / min - 1.0
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("mesh,control,tol_or_nu,FE,A,R,status\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.mesh,
                r.control.label(),
                r.control.tol_or_nu(),
                r.fe,
                r.accepted,
                r.rejected,
                if r.ok { "ok" } else { "crash" }
            );
        }
        s
    }

    pub fn summary_lines(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                format!(
                    "{}:{}:{},{},{},{},{}",
                    self.method,
                    r.mesh,
                    r.control.label(),
                    r.control.tol_or_nu(),
                    r.fe,
                    r.accepted,
                    r.rejected
                )
            })
            .collect()
    }

    pub fn markdown(&self) -> String {
        let mut s = String::from("| Method | Mesh | Control | tol / ν | #FE | #A | #R |\n");
        s.push_str("|--------|------|---------|---------|-----|----|----|\n");
        for r in &self.rows {
            let fe = if r.ok { r.fe.to_string() } else { "crash".into() };
            let _ = writeln!(
                s,
                "| {} | {} | {} | {:e} | {} | {} | {} |",
                self.method,
                r.mesh,
                r.control.label(),
                r.control.tol_or_nu(),
                fe,
                r.accepted,
                r.rejected
            );
        }
        s
    }

    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "method: {}", self.method);
        for m in &self.meshes {
            let _ = writeln!(s, "[{}]", m.mesh);
            let _ = writeln!(s, "nu_max: {}", m.nu_max);
            let _ = writeln!(s, "baseline_fe: {}", m.baseline_fe);
            let _ = writeln!(s, "fe_variation: {:.6}", m.fe_variation);
            let _ = writeln!(s, "fe_over_baseline: {:.6}", m.fe_over_baseline);
            let _ = writeln!(s, "max_rejection_ratio: {:.6}", m.max_rejection_ratio);
            let _ = writeln!(s, "all_completed: {}", m.all_completed);
        }
        if self.meshes.len() > 1 {
            let _ = writeln!(s, "nu_max_spread: {:.6}", self.nu_max_spread());
        }
        s
    }
}

/// Mesh variants: `cartesian` (no warp) and `warped` (`problem.warp`, default 1).
fn mesh_config(cfg: &Config, mesh: &str) -> Result<Config, CliError> {
    let mut c = cfg.clone();
    match mesh {
        "cartesian" => c.set("problem", "warp", "0")?,
        "warped" => {
            if cfg.parse_or("problem", "warp", 0.0)? == 0.0 {
                c.set("problem", "warp", "1")?;
            }
        }
        "default" => {}
        other => return Err(CliError::Config(format!("unknown plateau mesh `{other}`"))),
    }
    Ok(c)
}

fn file_tag(x: f64) -> String {
    format!("{x:e}")
}

pub fn run(cfg: &Config, out: &mut Outputs) -> Result<(Outcome, PlateauResult), CliError> {
    let (method, tab) = single_method(cfg)?;
    let tols = tolerances(cfg)?;
    let kind = problem::kind(cfg)?;
    let two_d = matches!(
        kind,
        ProblemKind::Advection2d | ProblemKind::Advection2dCurved | ProblemKind::BlendedAdvection
    );
    let meshes: Vec<String> = match cfg.list("plateau", "meshes")? {
        Some(m) if !m.is_empty() => m,
        _ if two_d => vec!["cartesian".into(), "warped".into()],
        _ => vec!["default".into()],
    };
    if !two_d && meshes.iter().any(|m| m != "default") {
        return Err(CliError::Config(format!("mesh variants need a 2D problem, got {kind}")));
    }

    let mut result = PlateauResult {
        method: tab.name.clone(),
        rows: Vec::new(),
        meshes: Vec::new(),
    };
    for mesh in &meshes {
        let mcfg = mesh_config(cfg, mesh)?;
        let problem = problem::build(&mcfg, None)?;
        let span = (0.0, problem.t_end);
        let b = bisect(&mcfg, &problem)?;
        out.write(&format!("traces/{mesh}_bisect.csv"), &probes_csv(&b))?;
        let base = integrate_problem(&mcfg, method, &tab, &problem, &problem.u0, span, Control::Cfl(b.nu_max))?;
        let RunResult::Done(base) = base else {
            return Err(CliError::Internal(format!("{mesh}: bisected ν_max = {} crashed", b.nu_max)));
        };
        out.write(&format!("traces/{mesh}_cfl.csv"), &base.trace.to_csv())?;
        result.rows.push(PlateauRow {
            mesh: mesh.clone(),
            control: Control::Cfl(b.nu_max),
            fe: base.stats.n_fe,
            accepted: base.stats.n_accepted,
            rejected: base.stats.n_rejected,
            ok: true,
        });

        let mut completed = Vec::new();
        let mut all_completed = true;
        for &tol in &tols {
            let control = Control::Error(tol);
            let r = integrate_problem(&mcfg, method, &tab, &problem, &problem.u0, span, control)?;
            let stats = r.solution().map(|s| s.stats).unwrap_or_default();
            if let Some(sol) = r.solution() {
                out.write(&format!("traces/{mesh}_tol_{}.csv", file_tag(tol)), &sol.trace.to_csv())?;
            }
            all_completed &= r.is_done();
            if r.is_done() {
                completed.push(stats);
            }
            result.rows.push(PlateauRow {
                mesh: mesh.clone(),
                control,
                fe: stats.n_fe,
                accepted: stats.n_accepted,
                rejected: stats.n_rejected,
                ok: r.is_done(),
            });
        }
        let fes: Vec<f64> = completed.iter().map(|s| s.n_fe as f64).collect();
        let (min, max) = fes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        result.meshes.push(MeshSummary {
            mesh: mesh.clone(),
            nu_max: b.nu_max,
            baseline_fe: base.stats.n_fe,
            fe_variation: if fes.is_empty() { f64::NAN } else { (max - min) / min },
            fe_over_baseline: max / base.stats.n_fe as f64,
            max_rejection_ratio: completed
                .iter()
                .map(|s| s.n_rejected as f64 / s.n_accepted as f64)
                .fold(0.0, f64::max),
            all_completed,
        });
    }

    out.write("plateau.csv", &result.csv())?;
    let summary = result.summary_lines();
    out.write("summary.txt", &(summary.join("\n") + "\n"))?;
    out.write("table.md", &result.markdown())?;
    out.write("report.txt", &result.report())?;
    Ok((Outcome { summary, blow_up: None }, result))
}
