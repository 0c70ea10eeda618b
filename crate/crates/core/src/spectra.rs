//! Spectra of linear semidiscretizations and their embedding into the
//! stability region of an explicit Runge-Kutta method.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::integrator::{Rhs, RhsError};
use crate::tableaux::ButcherTableau;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("operator is not linear: relative defect {defect:.3e}")]
    NotLinear { defect: f64 },
    #[error(transparent)]
    Rhs(#[from] RhsError),
    #[error("eigenvalue iteration did not converge for a {n}x{n} matrix")]
    NoConvergence { n: usize },
    #[error("empty spectrum")]
    Empty,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Relative tolerance of the linearity probe.
pub const LINEARITY_TOL: f64 = 1e-10;
/// Relative tolerance of the σ* bisection.
pub const EMBEDDING_RTOL: f64 = 1e-4;
/// Eigenvalues smaller than this are treated as zero.
pub const ZERO_EIGENVALUE: f64 = 1e-12;

/// Checks `f(a u + b w) = a f(u) + b f(w)` on three seeded random pairs and
/// returns the largest relative defect.
pub fn linearity_defect<F: Rhs + ?Sized>(f: &F, n: usize, seed: u64) -> Result<f64, SpectraError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let (mut fu, mut fw, mut fc) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for _ in 0..3 {
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (a, b): (f64, f64) = (rng.gen_range(0.5..2.0), rng.gen_range(-2.0..-0.5));
        let c: Vec<f64> = u.iter().zip(&w).map(|(x, y)| a * x + b * y).collect();
        f.eval(0.0, &u, &mut fu)?;
        f.eval(0.0, &w, &mut fw)?;
        f.eval(0.0, &c, &mut fc)?;
        let mut scale = 0.0f64;
        let mut defect = 0.0f64;
        for i in 0..n {
            let lin = a * fu[i] + b * fw[i];
            scale = scale.max(lin.abs()).max(fc[i].abs());
            defect = defect.max((fc[i] - lin).abs());
        }
        if scale > 0.0 {
            worst = worst.max(defect / scale);
        }
    }
    Ok(worst)
}

/// Dense matrix of a linear right-hand side; column `j` is `f(e_j)`.
pub fn assemble_operator<F: Rhs + ?Sized>(f: &F, n: usize) -> Result<DMatrix<f64>, SpectraError> {
    let defect = linearity_defect(f, n, 0x5eed)?;
    if !(defect <= LINEARITY_TOL) {
        return Err(SpectraError::NotLinear { defect });
    }
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        f.eval(0.0, &e, &mut col)?;
        m.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    Ok(m)
}

/// All eigenvalues of a real matrix, from its real Schur form.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>, SpectraError> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "matrix must be square");
    if n == 0 {
        return Err(SpectraError::Empty);
    }
    // Highly structured operators (e.g. uniform upwind FV) can stall the QR iteration at
    // the tightest deflation tolerance; eigenpairs are validated by residuals anyway.
    for eps in [f64::EPSILON, 1e-14, 1e-13] {
        if let Some(schur) = nalgebra::Schur::try_new(m.clone(), eps, 100 * n) {
            let eig = schur.complex_eigenvalues();
            return Ok(eig.iter().map(|z| Complex64::new(z.re, z.im)).collect());
        }
    }
    Err(SpectraError::NoConvergence { n })
}

/// Spectral norm estimate by power iteration on `MᵀM`.
pub fn norm2(m: &DMatrix<f64>) -> f64 {
    let n = m.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut sigma = 0.0;
    for _ in 0..200 {
        let w = m.tr_mul(&(m * &v));
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        let next = nw.sqrt();
        v = w / nw;
        if (next - sigma).abs() <= 1e-10 * next {
            return next;
        }
        sigma = next;
    }
    sigma
}

/// `‖Mv − λv‖₂ / ‖M‖₂` for the eigenvector `v` obtained by inverse iteration
/// with a slightly perturbed shift.
pub fn eigen_residual(m: &DMatrix<f64>, lambda: Complex64, m_norm: f64) -> f64 {
    let n = m.nrows();
    let mc: DMatrix<Complex64> = m.map(|x| Complex64::new(x, 0.0));
    let shift = lambda + Complex64::new(1e-10, 1e-10) * m_norm.max(1.0);
    let shifted = &mc - DMatrix::<Complex64>::identity(n, n) * shift;
    let lu = shifted.lu();
    let mut v = DVector::from_fn(n, |i, _| Complex64::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.1));
    v /= Complex64::new(v.norm(), 0.0);
    for _ in 0..3 {
        match lu.solve(&v) {
            Some(w) => {
                let nw = w.norm();
                if !(nw > 0.0 && nw.is_finite()) {
                    break;
                }
                v = w / Complex64::new(nw, 0.0);
            }
            None => break,
        }
    }
    let r = &mc * &v - &v * lambda;
    r.norm() / m_norm.max(f64::MIN_POSITIVE)
}

/// Largest deviation from conjugate pairing, relative to the spectral radius.
pub fn conjugate_pairing_defect(spectrum: &[Complex64]) -> f64 {
    let radius = spectrum.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let mut used = vec![false; spectrum.len()];
    let mut worst = 0.0f64;
    for (i, z) in spectrum.iter().enumerate() {
        if used[i] {
            continue;
        }
        used[i] = true;
        if z.im.abs() <= 1e-8 * radius {
            continue;
        }
        let target = z.conj();
        let best = spectrum
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .min_by(|a, b| (a.1 - target).norm().total_cmp(&(b.1 - target).norm()));
        match best {
            Some((j, w)) => {
                used[j] = true;
                worst = worst.max((w - target).norm() / radius);
            }
            None => return f64::INFINITY,
        }
    }
    worst
}

fn stable(coeffs: &[f64], spectrum: &[Complex64], sigma: f64) -> bool {
    spectrum
        .iter()
        .all(|&l| crate::tableaux::eval_stability_polynomial(coeffs, l * sigma).norm() <= 1.0 + 1e-12)
}

/// Radius outside of which `|R(z)| > 1`.
fn stability_radius_bound(coeffs: &[f64]) -> f64 {
    let lead = coeffs.last().copied().unwrap_or(0.0).abs();
    if lead == 0.0 {
        return f64::INFINITY;
    }
    let rest: f64 = 1.0 + coeffs[..coeffs.len() - 1].iter().map(|c| c.abs()).sum::<f64>();
    1.0 + (rest + 2.0) / lead
}

/// The largest `σ` such that `|R(σλ)| ≤ 1` for all eigenvalues, starting
/// from zero. Returns 0 if the spectrum is unstable for arbitrarily small `σ`,
/// in particular if some eigenvalue has `Re λ > 1e-8`.
pub fn max_embedding_scale(spectrum: &[Complex64], tab: &ButcherTableau) -> f64 {
    let eigs: Vec<Complex64> = spectrum
        .iter()
        .copied()
        .filter(|z| z.norm() >= ZERO_EIGENVALUE)
        .collect();
    if eigs.is_empty() {
        return f64::INFINITY;
    }
    // growing modes are unstable for every positive scale
    if eigs.iter().any(|z| z.re > 1e-8) {
        return 0.0;
    }
    let coeffs = tab.stability_coefficients();
    let lmax = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let upper = stability_radius_bound(&coeffs) / lmax;
    const SAMPLES: usize = 4000;
    let mut lo = 0.0;
    let mut hi = None;
    for k in 1..=SAMPLES {
        let sigma = upper * k as f64 / SAMPLES as f64;
        if stable(&coeffs, &eigs, sigma) {
            lo = sigma;
        } else {
            hi = Some(sigma);
            break;
        }
    }
    let Some(mut hi) = hi else { return upper };
    if lo == 0.0 {
        // refine towards zero before giving up
        let mut s = hi;
        for _ in 0..60 {
            s *= 0.5;
            if stable(&coeffs, &eigs, s) {
                lo = s;
                break;
            }
            hi = s;
        }
        if lo == 0.0 {
            return 0.0;
        }
    }
    while hi - lo > EMBEDDING_RTOL * lo {
        let mid = 0.5 * (lo + hi);
        if stable(&coeffs, &eigs, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Eigenvalues with `|R(σλ)| > 1`.
pub fn outside_region(spectrum: &[Complex64], tab: &ButcherTableau, sigma: f64) -> Vec<Complex64> {
    let coeffs = tab.stability_coefficients();
    spectrum
        .iter()
        .copied()
        .filter(|&l| crate::tableaux::eval_stability_polynomial(&coeffs, l * sigma).norm() > 1.0 + 1e-12)
        .collect()
}

/// Sampled points of the level set `|R(z)| = 1`: crossings on the edges of
/// a uniform grid over `re × im`, linearly interpolated.
pub fn stability_boundary(
    tab: &ButcherTableau,
    re: (f64, f64),
    im: (f64, f64),
    resolution: usize,
) -> Vec<Complex64> {
    let coeffs = tab.stability_coefficients();
    let n = resolution.max(2);
    let x = |i: usize| re.0 + (re.1 - re.0) * i as f64 / (n - 1) as f64;
    let y = |j: usize| im.0 + (im.1 - im.0) * j as f64 / (n - 1) as f64;
    let g: Vec<f64> = (0..n * n)
        .map(|k| {
            let z = Complex64::new(x(k % n), y(k / n));
            crate::tableaux::eval_stability_polynomial(&coeffs, z).norm() - 1.0
        })
        .collect();
    let mut out = Vec::new();
    let crossing = |g0: f64, g1: f64| g0 / (g0 - g1);
    for j in 0..n {
        for i in 0..n {
            let g0 = g[i + n * j];
            if i + 1 < n {
                let g1 = g[i + 1 + n * j];
                if (g0 <= 0.0) != (g1 <= 0.0) {
                    let t = crossing(g0, g1);
                    out.push(Complex64::new(x(i) + t * (x(i + 1) - x(i)), y(j)));
                }
            }
            if j + 1 < n {
                let g1 = g[i + n * (j + 1)];
                if (g0 <= 0.0) != (g1 <= 0.0) {
                    let t = crossing(g0, g1);
                    out.push(Complex64::new(x(i), y(j) + t * (y(j + 1) - y(j))));
                }
            }
        }
    }
    out
}

/// Window and resolution of the emitted stability region boundary.
pub const REGION_RE: (f64, f64) = (-12.0, 2.0);
pub const REGION_IM: (f64, f64) = (-10.0, 10.0);
pub const REGION_RESOLUTION: usize = 600;

/// Spectrum of one operator embedded into a method's stability region.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub label: String,
    pub method: String,
    pub effective_stage_count: f64,
    pub eigenvalues: Vec<Complex64>,
    pub sigma_star: f64,
    pub outside: Vec<Complex64>,
}

impl SpectrumReport {
    pub fn new(label: &str, eigenvalues: Vec<Complex64>, tab: &ButcherTableau) -> Self {
        let sigma_star = max_embedding_scale(&eigenvalues, tab);
        let outside = if sigma_star.is_finite() {
            outside_region(&eigenvalues, tab, sigma_star)
        } else {
            Vec::new()
        };
        Self {
            label: label.to_string(),
            method: tab.name.clone(),
            effective_stage_count: tab.effective_stage_count(),
            eigenvalues,
            sigma_star,
            outside,
        }
    }

    /// `σ*` normalized by the number of stages, for comparisons across methods.
    pub fn normalized_sigma(&self) -> f64 {
        self.sigma_star / self.effective_stage_count
    }
}

/// DGSEM against blended shock-capturing operator for one method.
#[derive(Debug, Clone)]
pub struct SpectrumComparison {
    pub alpha: f64,
    pub dgsem: SpectrumReport,
    pub blended: SpectrumReport,
    /// Blended eigenvalues outside the region at the DGSEM scale.
    pub outside_at_dgsem_scale: Vec<Complex64>,
}

impl SpectrumComparison {
    pub fn new(tab: &ButcherTableau, alpha: f64, dgsem: Vec<Complex64>, blended: Vec<Complex64>) -> Self {
        let dgsem = SpectrumReport::new("dgsem", dgsem, tab);
        let blended = SpectrumReport::new("blended", blended, tab);
        let outside_at_dgsem_scale = outside_region(&blended.eigenvalues, tab, dgsem.sigma_star);
        Self {
            alpha,
            dgsem,
            blended,
            outside_at_dgsem_scale,
        }
    }

    /// `σ*_DGSEM / σ*_blended`.
    pub fn ratio(&self) -> f64 {
        self.dgsem.sigma_star / self.blended.sigma_star
    }

    pub fn spectrum_csv(&self) -> String {
        let mut s = String::from("re,im,alpha\n");
        for (alpha, rep) in [(0.0, &self.dgsem), (self.alpha, &self.blended)] {
            for z in &rep.eigenvalues {
                let _ = writeln!(s, "{:e},{:e},{}", z.re, z.im, alpha);
            }
        }
        s
    }

    pub fn region_csv(tab: &ButcherTableau) -> String {
        let stages = tab.effective_stage_count();
        let mut s = String::from("re,im,re_per_stage,im_per_stage\n");
        for z in stability_boundary(tab, REGION_RE, REGION_IM, REGION_RESOLUTION) {
            let _ = writeln!(s, "{:e},{:e},{:e},{:e}", z.re, z.im, z.re / stages, z.im / stages);
        }
        s
    }

    pub fn report_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "method: {}", self.dgsem.method);
        let _ = writeln!(s, "stages: {}", self.dgsem.effective_stage_count);
        let _ = writeln!(s, "alpha: {}", self.alpha);
        let _ = writeln!(s, "eigenvalues: {}", self.dgsem.eigenvalues.len());
        for rep in [&self.dgsem, &self.blended] {
            let _ = writeln!(s, "sigma_star_{}: {:.6e}", rep.label, rep.sigma_star);
            let _ = writeln!(s, "sigma_star_per_stage_{}: {:.6e}", rep.label, rep.normalized_sigma());
        }
        let _ = writeln!(s, "ratio_dgsem_over_blended: {:.6}", self.ratio());
        let _ = writeln!(s, "outside_at_dgsem_scale: {}", self.outside_at_dgsem_scale.len());
        for z in &self.outside_at_dgsem_scale {
            let _ = writeln!(s, "  {:.6e} {:+.6e}i", z.re, z.im);
        }
        s
    }

    /// Writes `spectrum.csv`, `region.csv` and `report.txt` into `dir`.
    pub fn write(&self, dir: &Path, tab: &ButcherTableau) -> Result<Vec<PathBuf>, SpectraError> {
        let files = [
            ("spectrum.csv", self.spectrum_csv()),
            ("region.csv", Self::region_csv(tab)),
            ("report.txt", self.report_text()),
        ];
        fs::create_dir_all(dir).map_err(|source| SpectraError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut written = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|source| SpectraError::Io {
                path: path.clone(),
                source,
            })?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::FnRhs;
    use crate::tableaux::{builtin, Method};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        let key = |z: &Complex64| ((z.re * 1e8).round() as i64, (z.im * 1e8).round() as i64);
        v.sort_by_key(key);
        v
    }

    #[test]
    fn negative_identity() {
        let f = FnRhs::new(|_t, u: &[f64], du: &mut [f64]| {
            for (d, x) in du.iter_mut().zip(u) {
                *d = -x;
            }
        });
        let m = assemble_operator(&f, 5).unwrap();
        assert_eq!(m, -DMatrix::<f64>::identity(5, 5));
    }

    #[test]
    fn nonlinear_operator_is_rejected() {
        let f = FnRhs::new(|_t, u: &[f64], du: &mut [f64]| {
            for (d, x) in du.iter_mut().zip(u) {
                *d = -x * x;
            }
        });
        assert!(matches!(assemble_operator(&f, 4), Err(SpectraError::NotLinear { .. })));
    }

    #[test]
    fn upwind_circulant() {
        let f = FnRhs::new(|_t, u: &[f64], du: &mut [f64]| {
            let n = u.len();
            for i in 0..n {
                du[i] = -(u[i] - u[(i + n - 1) % n]);
            }
        });
        let m = assemble_operator(&f, 4).unwrap();
        let eig = sorted(eigenvalues(&m).unwrap());
        let expected = sorted(
            (0..4)
                .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / 4.0) - 1.0)
                .collect(),
        );
        for (a, b) in eig.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn small_eigenproblems() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let eig = sorted(eigenvalues(&d).unwrap());
        for (z, v) in eig.iter().zip([1.0, 2.0, 3.0]) {
            assert_abs_diff_eq!(z.re, v, epsilon = 1e-14);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-14);
        }
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let eig = sorted(eigenvalues(&rot).unwrap());
        assert!((eig[0] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((eig[1] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
        // (λ³ − 2λ² − λ + 2)(λ − 4): companion matrix of λ⁴ − 6λ³ + 7λ² + 6λ − 8
        let comp = DMatrix::from_row_slice(
            4,
            4,
            &[
                6.0, -7.0, -6.0, 8.0, //
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 0.0,
            ],
        );
        let eig = sorted(eigenvalues(&comp).unwrap());
        for (z, v) in eig.iter().zip([-1.0, 1.0, 2.0, 4.0]) {
            assert_abs_diff_eq!(z.re, v, epsilon = 1e-10);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-10);
        }
        let norm = norm2(&comp);
        for z in &eig {
            assert!(eigen_residual(&comp, *z, norm) < 1e-8);
        }
    }

    #[test]
    fn classical_third_order_real_axis() {
        let tab = builtin(Method::Bs3_3F).unwrap();
        let sigma = max_embedding_scale(&[Complex64::new(-1.0, 0.0)], &tab);
        assert!((sigma - 2.5127453266).abs() < 2.6e-4, "{sigma}");
        let half = max_embedding_scale(&[Complex64::new(-1.0, 0.0), Complex64::new(-2.0, 0.0)], &tab);
        assert!((half - sigma / 2.0).abs() < 2e-4 * sigma);
    }

    #[test]
    fn unstable_spectrum_gives_zero() {
        let tab = builtin(Method::Bs3_3F).unwrap();
        assert_eq!(max_embedding_scale(&[Complex64::new(1.0, 0.0)], &tab), 0.0);
    }

    #[test]
    fn region_boundary_hits_real_axis_limit() {
        let tab = builtin(Method::Bs3_3F).unwrap();
        let pts = stability_boundary(&tab, REGION_RE, (-1.0, 1.0), 601);
        assert!(pts
            .iter()
            .any(|z| z.im.abs() < 1e-12 && (z.re + 2.5127453266).abs() < 0.03));
    }

    #[test]
    fn pairing_defect() {
        let s = [Complex64::new(-1.0, 2.0), Complex64::new(-1.0, -2.0), Complex64::new(-3.0, 0.0)];
        assert!(conjugate_pairing_defect(&s) < 1e-15);
        assert!(conjugate_pairing_defect(&s[..2]) < 1e-15);
        assert!(conjugate_pairing_defect(&s[..1]).is_infinite());
    }
}
