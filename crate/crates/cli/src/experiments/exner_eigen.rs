//! Wave speeds of the shallow water–Exner system for one state or a grid.

use std::fmt::Write as _;

use rkctl_core::exner::{
    characteristic_roots, froude, max_wave_speed, ExnerError, Jacobian42, SweExnerParams, SweExnerState,
};

use super::Outcome;
use crate::config::Config;
use crate::manifest::Outputs;
use crate::CliError;

const S: &str = "exner";

pub const CSV_HEADER: &str =
    "h,hv1,hv2,g,sigma,ag,root1,root2,root3,v1,max_speed,froude,loose_bound_ratio,status";

/// One CSV row. The loose bound is `|v₁| + √(gh)`.
pub fn row(state: &SweExnerState, params: &SweExnerParams) -> Result<String, CliError> {
    let prefix = format!(
        "{},{},{},{},{},{}",
        state.h, state.hv1, state.hv2, params.g, params.sigma, params.a_g
    );
    let fr = froude(state, params).map_err(|e| CliError::Config(e.to_string()))?;
    let (v1, _) = state.velocity();
    match characteristic_roots(state, params) {
        Ok(roots) => {
            let speed = max_wave_speed(state, params).map_err(|e| CliError::Config(e.to_string()))?;
            let loose = v1.abs() + (params.g * state.h).sqrt();
            Ok(format!(
                "{prefix},{},{},{},{v1},{speed},{fr},{},ok",
                roots[0],
                roots[1],
                roots[2],
                speed / loose
            ))
        }
        Err(ExnerError::HyperbolicityLoss { .. }) => Ok(format!("{prefix},,,,{v1},,{fr},,non_hyperbolic")),
        Err(e) => Err(CliError::Config(e.to_string())),
    }
}

fn params(cfg: &Config, a_g: f64) -> Result<SweExnerParams, CliError> {
    let g: f64 = cfg.parse_or(S, "g", 9.8)?;
    let sigma: f64 = cfg.parse_or(S, "sigma", 0.4)?;
    let variant: Jacobian42 = match cfg.get(S, "jacobian_42") {
        Some(v) => v.parse().map_err(|e: ExnerError| CliError::Config(e.to_string()))?,
        None => Jacobian42::default(),
    };
    Ok(SweExnerParams::new(g, sigma, a_g)
        .map_err(|e| CliError::Config(e.to_string()))?
        .with_jacobian_42(variant))
}

fn state(h: f64, hv1: f64, hv2: f64, b: f64) -> Result<SweExnerState, CliError> {
    SweExnerState::new(h, hv1, hv2, b).map_err(|e| CliError::Config(e.to_string()))
}

/// Writes `exner.csv`: one row, or the grid `sweep_h × sweep_v × sweep_ag`
/// (velocities `v₁`; `v₂` keeps the base state's ratio `hv2/h`).
pub fn run(cfg: &Config, out: &mut Outputs) -> Result<Outcome, CliError> {
    let h: f64 = cfg.parse_or(S, "h", 10.0)?;
    let hv1: f64 = cfg.parse_or(S, "hv1", 10.0)?;
    let hv2: f64 = cfg.parse_or(S, "hv2", 0.0)?;
    let b: f64 = cfg.parse_or(S, "b", 0.0)?;
    let a_g: f64 = cfg.parse_or(S, "ag", 0.001)?;
    let sweep: bool = cfg.parse_or(S, "sweep", false)?;

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    let mut rows = 0usize;
    if sweep {
        let hs: Vec<f64> = cfg.list(S, "sweep_h")?.unwrap_or_else(|| vec![0.5, 1.0, 2.0, 5.0, 10.0]);
        let vs: Vec<f64> = cfg.list(S, "sweep_v")?.unwrap_or_else(|| vec![-2.0, -0.5, 0.0, 0.5, 1.0, 2.0, 5.0]);
        let ags: Vec<f64> = cfg.list(S, "sweep_ag")?.unwrap_or_else(|| vec![0.0, 0.001, 0.01, 0.1]);
        let v2 = hv2 / h;
        for &ag in &ags {
            let p = params(cfg, ag)?;
            for &hh in &hs {
                for &v in &vs {
                    let _ = writeln!(csv, "{}", row(&state(hh, hh * v, hh * v2, b)?, &p)?);
                    rows += 1;
                }
            }
        }
    } else {
        let _ = writeln!(csv, "{}", row(&state(h, hv1, hv2, b)?, &params(cfg, a_g)?)?);
        rows = 1;
    }
    out.write("exner.csv", &csv)?;
    Ok(Outcome {
        summary: vec![format!("exner-eigen: {rows} states")],
        blow_up: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dune_state_row() {
        let p = SweExnerParams::new(9.8, 0.4, 0.001).unwrap();
        let r = row(&SweExnerState::new(10.0, 10.0, 0.0, 0.0).unwrap(), &p).unwrap();
        let cols: Vec<&str> = r.split(',').collect();
        assert_eq!(cols.len(), CSV_HEADER.split(',').count());
        assert_eq!(cols[13], "ok");
        let fr: f64 = cols[11].parse().unwrap();
        assert!((fr - 0.1010).abs() < 1e-3);
        let ratio: f64 = cols[12].parse().unwrap();
        assert!(ratio > 0.9 && ratio < 1.1);
    }
}
