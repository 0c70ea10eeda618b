//! 1D compressible Euler equations, weak-form DGSEM with a local
//! Lax-Friedrichs interface flux.
//!
//! The state is stored node-interleaved: `u[3g..3g+3] = (ρ, ρv, E)`.

use super::basis::ReferenceElement;
use super::mesh::Mesh1d;
use crate::cfl::{CflError, CflLimit, WaveSpeed};
use crate::integrator::{Rhs, RhsError};

pub const NVARS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EulerBoundary {
    Periodic,
    /// Fixed conserved states outside the left and right boundaries.
    Dirichlet { left: [f64; 3], right: [f64; 3] },
}

#[derive(Debug, Clone)]
pub struct Euler1d {
    pub basis: ReferenceElement,
    pub mesh: Mesh1d,
    pub gamma: f64,
    pub boundary: EulerBoundary,
    /// Weight of the finite volume subcell operator; zero is pure DGSEM.
    pub alpha: f64,
    dhat: Vec<f64>,
}

/// Primitive variables `(ρ, v, p)` from conserved ones.
#[inline]
pub fn primitive(gamma: f64, q: &[f64]) -> (f64, f64, f64) {
    let rho = q[0];
    let v = q[1] / rho;
    let p = (gamma - 1.0) * (q[2] - 0.5 * rho * v * v);
    (rho, v, p)
}

/// Conserved variables from `(ρ, v, p)`.
pub fn conserved(gamma: f64, rho: f64, v: f64, p: f64) -> [f64; 3] {
    [rho, rho * v, p / (gamma - 1.0) + 0.5 * rho * v * v]
}

#[inline]
fn physical_flux(gamma: f64, q: &[f64]) -> [f64; 3] {
    let (_, v, p) = primitive(gamma, q);
    [q[1], q[1] * v + p, (q[2] + p) * v]
}

#[inline]
fn max_speed(gamma: f64, q: &[f64]) -> f64 {
    let (rho, v, p) = primitive(gamma, q);
    v.abs() + (gamma * p / rho).sqrt()
}

fn admissible(gamma: f64, q: &[f64]) -> bool {
    let (rho, _, p) = primitive(gamma, q);
    rho > 0.0 && p > 0.0 && rho.is_finite() && p.is_finite()
}

fn llf(gamma: f64, ql: &[f64], qr: &[f64]) -> [f64; 3] {
    let fl = physical_flux(gamma, ql);
    let fr = physical_flux(gamma, qr);
    let lam = max_speed(gamma, ql).max(max_speed(gamma, qr));
    std::array::from_fn(|c| 0.5 * (fl[c] + fr[c]) - 0.5 * lam * (qr[c] - ql[c]))
}

impl Euler1d {
    pub fn new(degree: usize, mesh: Mesh1d, gamma: f64, boundary: EulerBoundary) -> Self {
        assert!(gamma > 1.0, "gamma must exceed one");
        let basis = ReferenceElement::new(degree);
        let n = basis.n_nodes();
        let mut dhat = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                dhat[i * n + k] = basis.weights[k] * basis.d(k, i) / basis.weights[i];
            }
        }
        Self {
            basis,
            mesh,
            gamma,
            boundary,
            alpha: 0.0,
            dhat,
        }
    }

    /// Blend with the first-order subcell finite volume operator.
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        assert!((0.0..=1.0).contains(&alpha), "blending factor {alpha} outside [0, 1]");
        self.alpha = alpha;
        self
    }

    pub fn n_dofs(&self) -> usize {
        NVARS * self.mesh.elements * self.basis.n_nodes()
    }

    /// Node values of `init(x)`, which returns primitive `(ρ, v, p)`.
    pub fn project(&self, init: impl Fn(f64) -> (f64, f64, f64)) -> Vec<f64> {
        self.mesh
            .node_coordinates(&self.basis)
            .into_iter()
            .flat_map(|x| {
                let (rho, v, p) = init(x);
                conserved(self.gamma, rho, v, p)
            })
            .collect()
    }

    pub fn quadrature_weights(&self) -> Vec<f64> {
        let jac = 0.5 * self.mesh.h();
        (0..self.mesh.elements)
            .flat_map(|_| self.basis.weights.iter().map(move |w| w * jac))
            .collect()
    }

    /// Discrete integrals of `(ρ, ρv, E)`.
    pub fn totals(&self, u: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (g, w) in self.quadrature_weights().into_iter().enumerate() {
            for c in 0..NVARS {
                out[c] += w * u[NVARS * g + c];
            }
        }
        out
    }

    pub fn cfl_limit(&self) -> CflLimit<EulerWaveSpeed> {
        CflLimit {
            metrics: self.mesh.metrics(&self.basis),
            wave_speed: EulerWaveSpeed { gamma: self.gamma },
        }
    }
}

impl Rhs for Euler1d {
    fn eval(&self, _t: f64, u: &[f64], du: &mut [f64]) -> Result<(), RhsError> {
        let g = self.gamma;
        let n = self.basis.n_nodes();
        let ne = self.mesh.elements;
        let jac = 0.5 * self.mesh.h();
        let w = &self.basis.weights;
        if let Some(node) = (0..ne * n).find(|&k| !admissible(g, &u[NVARS * k..NVARS * k + NVARS])) {
            let (rho, _, p) = primitive(g, &u[NVARS * node..NVARS * node + NVARS]);
            return Err(RhsError::InvalidState(format!(
                "node {node}: density {rho:.3e}, pressure {p:.3e}"
            )));
        }
        let node = |e: usize, i: usize| &u[NVARS * (e * n + i)..NVARS * (e * n + i) + NVARS];
        // face e is the left face of element e; face ne is the right boundary
        let mut faces = Vec::with_capacity(ne + 1);
        for e in 0..=ne {
            let f = match (self.boundary, e) {
                (EulerBoundary::Periodic, _) => llf(g, node((e + ne - 1) % ne, n - 1), node(e % ne, 0)),
                (EulerBoundary::Dirichlet { left, .. }, 0) => llf(g, &left, node(0, 0)),
                (EulerBoundary::Dirichlet { right, .. }, e) if e == ne => llf(g, node(ne - 1, n - 1), &right),
                _ => llf(g, node(e - 1, n - 1), node(e, 0)),
            };
            faces.push(f);
        }
        let jw = |i: usize| jac * w[i];
        let mut flux = vec![[0.0; 3]; n];
        let mut sub = vec![[0.0; 3]; n + 1];
        for e in 0..ne {
            let out = &mut du[NVARS * e * n..NVARS * (e + 1) * n];
            if self.alpha < 1.0 {
                for (i, f) in flux.iter_mut().enumerate() {
                    *f = physical_flux(g, node(e, i));
                }
                for i in 0..n {
                    for c in 0..NVARS {
                        let mut acc = 0.0;
                        for k in 0..n {
                            acc += self.dhat[i * n + k] * flux[k][c];
                        }
                        if i == 0 {
                            acc += faces[e][c] / w[0];
                        }
                        if i == n - 1 {
                            acc -= faces[e + 1][c] / w[n - 1];
                        }
                        out[NVARS * i + c] = (1.0 - self.alpha) * acc / jac;
                    }
                }
            } else {
                out.fill(0.0);
            }
            if self.alpha > 0.0 {
                sub[0] = faces[e];
                sub[n] = faces[e + 1];
                for i in 0..n - 1 {
                    sub[i + 1] = llf(g, node(e, i), node(e, i + 1));
                }
                for i in 0..n {
                    for c in 0..NVARS {
                        out[NVARS * i + c] -= self.alpha * (sub[i + 1][c] - sub[i][c]) / jw(i);
                    }
                }
            }
        }
        Ok(())
    }
}

/// `|v| + c` per node along `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerWaveSpeed {
    pub gamma: f64,
}

impl WaveSpeed for EulerWaveSpeed {
    fn node_speed(&self, u: &[f64], node: usize) -> Result<[f64; 2], CflError> {
        let q = &u[NVARS * node..NVARS * node + NVARS];
        if !admissible(self.gamma, q) {
            return Err(CflError::WaveSpeed {
                node,
                reason: "non-physical state".into(),
            });
        }
        Ok([max_speed(self.gamma, q), 0.0])
    }
}
