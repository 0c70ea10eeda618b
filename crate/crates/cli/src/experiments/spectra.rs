//! Eigenvalue spectra of pure DGSEM and blended operators embedded into
//! stability regions.
//!
//! Writes `spectrum.csv`, `region.csv` and `report.txt`. With several methods
//! each gets its own subdirectory named after the method.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rkctl_core::spectra::{
    assemble_operator, eigen_residual, eigenvalues, linearity_defect, norm2, SpectrumComparison, LINEARITY_TOL,
};

use super::{methods, seed, Outcome};
use crate::config::Config;
use crate::manifest::Outputs;
use crate::problem;
use crate::CliError;

/// Residual bound for the eigenpair spot checks, relative to `‖M‖₂`.
pub const RESIDUAL_BOUND: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SpotCheck {
    pub operator: &'static str,
    pub lambda: Complex64,
    /// `‖Mv − λv‖ / ‖M‖₂` for the inverse-iteration eigenvector.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct SpectraResult {
    pub comparisons: Vec<SpectrumComparison>,
    pub spot_checks: Vec<SpotCheck>,
}

impl SpectraResult {
    pub fn max_residual(&self) -> f64 {
        self.spot_checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }
}

fn spectrum_of(cfg: &Config, alpha: f64) -> Result<(DMatrix<f64>, Vec<Complex64>), CliError> {
    let p = problem::build(cfg, Some(alpha))?;
    if !p.kind.is_linear() {
        return Err(CliError::Config(format!("spectra needs a linear problem, got {}", p.kind)));
    }
    let n = p.u0.len();
    let seed = seed(cfg)?;
    let defect = linearity_defect(&*p.rhs, n, seed).map_err(|e| CliError::Internal(e.to_string()))?;
    if defect > LINEARITY_TOL {
        return Err(CliError::Config(format!("operator is not linear (defect {defect:e})")));
    }
    let m = assemble_operator(&*p.rhs, n).map_err(|e| CliError::Internal(e.to_string()))?;
    let eigs = eigenvalues(&m).map_err(|e| CliError::Internal(e.to_string()))?;
    Ok((m, eigs))
}

fn spot_checks(
    operator: &'static str,
    m: &DMatrix<f64>,
    eigs: &[Complex64],
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<SpotCheck> {
    let m_norm = norm2(m);
    let mut picks = sample(rng, eigs.len(), count.min(eigs.len())).into_vec();
    picks.sort_unstable();
    picks
        .into_iter()
        .map(|i| SpotCheck {
            operator,
            lambda: eigs[i],
            residual: eigen_residual(m, eigs[i], m_norm),
        })
        .collect()
}

pub fn run(cfg: &Config, out: &mut Outputs) -> Result<(Outcome, SpectraResult), CliError> {
    let tabs = methods(cfg)?;
    let alpha: f64 = match cfg.parse_opt("problem", "alpha")? {
        Some(a) => a,
        None => 0.5,
    };
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(CliError::Config(format!("spectra needs 0 < alpha <= 1, got {alpha}")));
    }
    let (m_dg, dg) = spectrum_of(cfg, 0.0)?;
    let (m_sc, sc) = spectrum_of(cfg, alpha)?;

    let count: usize = cfg.parse_or("spectra", "spot_checks", 4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed(cfg)?);
    let mut checks = spot_checks("dgsem", &m_dg, &dg, count, &mut rng);
    checks.extend(spot_checks("blended", &m_sc, &sc, count, &mut rng));

    let mut check_text = String::new();
    let _ = writeln!(check_text, "spot_checks: {}", checks.len());
    for c in &checks {
        let _ = writeln!(
            check_text,
            "  {} {:.6e} {:+.6e}i residual {:.3e}",
            c.operator, c.lambda.re, c.lambda.im, c.residual
        );
    }
    let worst = checks.iter().map(|c| c.residual).fold(0.0, f64::max);
    let _ = writeln!(check_text, "max_residual: {worst:.3e}");

    let single = tabs.len() == 1;
    let mut result = SpectraResult {
        comparisons: Vec::new(),
        spot_checks: checks,
    };
    let mut summary = Vec::new();
    for (_, tab) in &tabs {
        let cmp = SpectrumComparison::new(tab, alpha, dg.clone(), sc.clone());
        let dir = if single { String::new() } else { format!("{}/", tab.name) };
        out.write(&format!("{dir}spectrum.csv"), &cmp.spectrum_csv())?;
        out.write(&format!("{dir}region.csv"), &SpectrumComparison::region_csv(tab))?;
        out.write(&format!("{dir}report.txt"), &(cmp.report_text() + &check_text))?;
        summary.push(format!(
            "{}: sigma_dgsem {:.6e} sigma_blended {:.6e} ratio {:.4} outside {}",
            tab.name,
            cmp.dgsem.sigma_star,
            cmp.blended.sigma_star,
            cmp.ratio(),
            cmp.outside_at_dgsem_scale.len()
        ));
        result.comparisons.push(cmp);
    }
    if worst > RESIDUAL_BOUND {
        return Err(CliError::Internal(format!(
            "eigenpair residual {worst:e} exceeds {RESIDUAL_BOUND:e}"
        )));
    }
    Ok((Outcome { summary, blow_up: None }, result))
}
