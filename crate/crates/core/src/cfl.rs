//! CFL-based step selection from mesh metric terms and local wave speeds.
//!
//! For a node `i` of a degree-`p` element the admissible length scale is
//!
//! ```text
//! Δx_i / λ_i = 2/(p+1) · J_i / Σ_j |(J ∂ξ^j/∂x)_i · a|
//! ```
//!
//! where `J_i` is the Jacobian determinant of the element mapping, the sum
//! runs over the contravariant vectors and `a` is the advection velocity or,
//! for nonlinear systems, a vector of local wave speed estimates.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CflError {
    #[error("node {node}: projected wave speed is zero")]
    StationaryWave { node: usize },
    #[error("node {node}: non-finite wave speed")]
    NonFiniteSpeed { node: usize },
    #[error("node {node}: {reason}")]
    WaveSpeed { node: usize, reason: String },
    #[error("mesh limit must be positive, got {0}")]
    NonPositiveLimit(f64),
    #[error("invalid mesh metrics: {0}")]
    InvalidMetrics(String),
    #[error("bisection bracket invalid: {0}")]
    Bracket(String),
}

/// Per-node metric terms of a DG mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshLimitProvider {
    pub degree: usize,
    pub dim: usize,
    /// Jacobian determinant per node.
    pub jacobian: Vec<f64>,
    /// Contravariant vectors per node, `contravariant[i][j]` is direction `j`.
    /// Unused components are zero in 1D.
    pub contravariant: Vec<[[f64; 2]; 2]>,
}

impl MeshLimitProvider {
    pub fn new(
        degree: usize,
        dim: usize,
        jacobian: Vec<f64>,
        contravariant: Vec<[[f64; 2]; 2]>,
    ) -> Result<Self, CflError> {
        if degree < 1 {
            return Err(CflError::InvalidMetrics("degree must be at least 1".into()));
        }
        if !(1..=2).contains(&dim) {
            return Err(CflError::InvalidMetrics(format!("dimension {dim}")));
        }
        if jacobian.len() != contravariant.len() {
            return Err(CflError::InvalidMetrics("length mismatch".into()));
        }
        if let Some(i) = jacobian.iter().position(|&j| !(j > 0.0)) {
            return Err(CflError::InvalidMetrics(format!(
                "non-positive Jacobian {} at node {i}",
                jacobian[i]
            )));
        }
        Ok(Self {
            degree,
            dim,
            jacobian,
            contravariant,
        })
    }

    /// Uniform 1D mesh of `elements` cells of width `h`.
    pub fn uniform_1d(degree: usize, elements: usize, h: f64) -> Result<Self, CflError> {
        let n = elements * (degree + 1);
        Self::new(
            degree,
            1,
            vec![h / 2.0; n],
            vec![[[1.0, 0.0], [0.0, 0.0]]; n],
        )
    }

    pub fn len(&self) -> usize {
        self.jacobian.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jacobian.is_empty()
    }

    /// `Δx_i / λ_i` for velocity (or wave speed vector) `a` at `node`.
    pub fn local_dx_over_lambda(&self, node: usize, a: [f64; 2]) -> Result<f64, CflError> {
        if a.iter().any(|x| !x.is_finite()) {
            return Err(CflError::NonFiniteSpeed { node });
        }
        let ja = &self.contravariant[node];
        let denom: f64 = ja[..self.dim]
            .iter()
            .map(|v| (v[0] * a[0] + v[1] * a[1]).abs())
            .sum();
        if !(denom > 0.0) {
            return Err(CflError::StationaryWave { node });
        }
        Ok(2.0 / (self.degree as f64 + 1.0) * self.jacobian[node] / denom)
    }

    /// `min_i Δx_i / λ_max(u_i)`.
    pub fn mesh_limit_with<W: WaveSpeed + ?Sized>(&self, u: &[f64], ws: &W) -> Result<f64, CflError> {
        let mut min = f64::INFINITY;
        for node in 0..self.len() {
            let a = ws.node_speed(u, node)?;
            min = min.min(self.local_dx_over_lambda(node, a)?);
        }
        if !(min > 0.0) || !min.is_finite() {
            return Err(CflError::NonPositiveLimit(min));
        }
        Ok(min)
    }
}

/// Local wave speed estimates per node, as a vector in physical coordinates.
pub trait WaveSpeed {
    fn node_speed(&self, u: &[f64], node: usize) -> Result<[f64; 2], CflError>;
}

/// A fixed advection velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantVelocity(pub [f64; 2]);

impl WaveSpeed for ConstantVelocity {
    fn node_speed(&self, _u: &[f64], _node: usize) -> Result<[f64; 2], CflError> {
        Ok(self.0)
    }
}

/// Anything that can produce `min_i Δx_i/λ_max(u_i)` for a state.
pub trait MeshLimit {
    fn mesh_limit(&self, u: &[f64]) -> Result<f64, CflError>;
}

/// Metric terms paired with a wave speed estimator.
pub struct CflLimit<W> {
    pub metrics: MeshLimitProvider,
    pub wave_speed: W,
}

impl<W: WaveSpeed> MeshLimit for CflLimit<W> {
    fn mesh_limit(&self, u: &[f64]) -> Result<f64, CflError> {
        self.metrics.mesh_limit_with(u, &self.wave_speed)
    }
}

/// A state-independent limit, e.g. for scalar test equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedLimit(pub f64);

impl MeshLimit for FixedLimit {
    fn mesh_limit(&self, _u: &[f64]) -> Result<f64, CflError> {
        if !(self.0 > 0.0) {
            return Err(CflError::NonPositiveLimit(self.0));
        }
        Ok(self.0)
    }
}

/// `Δt = ν · min_i Δx_i/λ_max(u_i)`.
pub fn cfl_dt<W: WaveSpeed + ?Sized>(
    nu: f64,
    u: &[f64],
    metrics: &MeshLimitProvider,
    wave_speed: &W,
) -> Result<f64, CflError> {
    Ok(nu * metrics.mesh_limit_with(u, wave_speed)?)
}

/// Relative bracket width at which bisection stops (three significant digits).
pub const BISECTION_RTOL: f64 = 5e-3;

/// Largest CFL number for which `runner` succeeds, by bisection.
///
/// `runner(nu)` returns `true` when the simulation survives. Requires
/// `runner(lo)` to succeed and `runner(hi)` to crash.
pub fn bisect_max_cfl<R: FnMut(f64) -> bool>(
    mut runner: R,
    lo: f64,
    hi: f64,
) -> Result<f64, CflError> {
    if !(lo > 0.0 && lo < hi) {
        return Err(CflError::Bracket(format!("need 0 < lo < hi, got [{lo}, {hi}]")));
    }
    if !runner(lo) {
        return Err(CflError::Bracket(format!("lower bound {lo} crashes")));
    }
    if runner(hi) {
        return Err(CflError::Bracket(format!("upper bound {hi} survives")));
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi / lo > 1.0 + BISECTION_RTOL {
        let mid = 0.5 * (lo + hi);
        if runner(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
