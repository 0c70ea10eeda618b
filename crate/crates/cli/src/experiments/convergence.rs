//! Fixed-step convergence on `u' = −u²`, `u(0) = 1`, exact `u = 1/(1 + t)`.

use std::fmt::Write as _;

use rkctl_core::integrator::{integrate_fixed, FnRhs};
use rkctl_core::tableaux::ButcherTableau;

use super::{methods, Outcome};
use crate::config::Config;
use crate::manifest::Outputs;
use crate::CliError;

const S: &str = "convergence";

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub method: String,
    /// `main` or `embedded`.
    pub solution: &'static str,
    pub steps: Vec<usize>,
    pub errors: Vec<f64>,
}

impl Series {
    /// Least-squares slope of `log error` against `log dt`.
    pub fn fitted_order(&self) -> f64 {
        let xs: Vec<f64> = self.steps.iter().map(|&n| -(n as f64).ln()).collect();
        let ys: Vec<f64> = self.errors.iter().map(|e| e.ln()).collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        sxy / sxx
    }

    /// Order between consecutive levels.
    pub fn pairwise_orders(&self) -> Vec<f64> {
        self.errors
            .windows(2)
            .zip(self.steps.windows(2))
            .map(|(e, n)| (e[0] / e[1]).ln() / (n[1] as f64 / n[0] as f64).ln())
            .collect()
    }
}

fn series(tab: &ButcherTableau, solution: &'static str, method: &str, steps: &[usize], t_end: f64) -> Result<Series, CliError> {
    let f = FnRhs::new(|_t: f64, u: &[f64], du: &mut [f64]| du[0] = -u[0] * u[0]);
    let exact = 1.0 / (1.0 + t_end);
    let errors = steps
        .iter()
        .map(|&n| {
            integrate_fixed(tab, &f, &[1.0], (0.0, t_end), n)
                .map(|u| (u[0] - exact).abs())
                .map_err(|e| CliError::BlowUp(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Series {
        method: method.to_string(),
        solution,
        steps: steps.to_vec(),
        errors,
    })
}

/// Writes `convergence.csv` and `report.txt`.
pub fn run(cfg: &Config, out: &mut Outputs) -> Result<(Outcome, Vec<Series>), CliError> {
    let levels: usize = cfg.parse_or(S, "levels", 6)?;
    let base: usize = cfg.parse_or(S, "base_steps", 16)?;
    let t_end: f64 = cfg.parse_or(S, "t_end", 2.0)?;
    if levels < 2 || base == 0 || !(t_end > 0.0) {
        return Err(CliError::Config("need convergence.levels >= 2, base_steps >= 1, t_end > 0".into()));
    }
    let steps: Vec<usize> = (0..levels).map(|l| base << l).collect();
    let mut all = Vec::new();
    for (_, tab) in methods(cfg)? {
        all.push(series(&tab, "main", &tab.name, &steps, t_end)?);
        all.push(series(&tab.embedded_method(), "embedded", &tab.name, &steps, t_end)?);
    }

    let mut csv = String::from("method,solution,steps,dt,error,order\n");
    let mut report = String::new();
    let mut summary = Vec::new();
    for s in &all {
        let orders = s.pairwise_orders();
        for (i, (&n, &e)) in s.steps.iter().zip(&s.errors).enumerate() {
            let order = if i == 0 { String::new() } else { orders[i - 1].to_string() };
            let _ = writeln!(csv, "{},{},{n},{},{e},{order}", s.method, s.solution, t_end / n as f64);
        }
        let line = format!("{} {}: fitted order {:.4}", s.method, s.solution, s.fitted_order());
        let _ = writeln!(report, "{line}");
        summary.push(line);
    }
    out.write("convergence.csv", &csv)?;
    out.write("report.txt", &report)?;
    Ok((Outcome { summary, blow_up: None }, all))
}
