//! Structured 1D and 2D meshes with per-node metric terms.

use std::f64::consts::PI;

use super::basis::ReferenceElement;
use crate::cfl::{CflError, MeshLimitProvider};

/// Uniform periodic 1D mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh1d {
    pub elements: usize,
    pub x_min: f64,
    pub x_max: f64,
}

impl Mesh1d {
    pub fn new(elements: usize, x_min: f64, x_max: f64) -> Self {
        assert!(elements >= 1 && x_max > x_min, "invalid 1D mesh");
        Self {
            elements,
            x_min,
            x_max,
        }
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / self.elements as f64
    }

    /// Physical node positions, element-major.
    pub fn node_coordinates(&self, basis: &ReferenceElement) -> Vec<f64> {
        let h = self.h();
        (0..self.elements)
            .flat_map(|e| {
                let left = self.x_min + e as f64 * h;
                basis.nodes.iter().map(move |&r| left + 0.5 * h * (r + 1.0))
            })
            .collect()
    }

    pub fn metrics(&self, basis: &ReferenceElement) -> MeshLimitProvider {
        MeshLimitProvider::uniform_1d(basis.degree, self.elements, self.h())
            .expect("uniform 1D metrics are valid")
    }
}

/// Rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain2d {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Domain2d {
    pub fn square(lo: f64, hi: f64) -> Self {
        Self {
            x: (lo, hi),
            y: (lo, hi),
        }
    }

    fn lengths(&self) -> (f64, f64) {
        (self.x.1 - self.x.0, self.y.1 - self.y.0)
    }

    fn centers(&self) -> (f64, f64) {
        (0.5 * (self.x.0 + self.x.1), 0.5 * (self.y.0 + self.y.1))
    }
}

/// Map from domain coordinates `(ξ, η)` to physical `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mapping2d {
    Identity,
    /// Sequential warp: `y` from `(ξ, η)`, then `x` from `(ξ, y)`. An
    /// amplitude of one is the full warp, zero gives the identity.
    Warp { amplitude: f64 },
}

impl Mapping2d {
    pub fn warped() -> Self {
        Mapping2d::Warp { amplitude: 1.0 }
    }
}

/// The warped mapping evaluated at domain coordinates `(ξ, η)`.
pub fn curved_mapping_2d(xi: f64, eta: f64, domain: &Domain2d, amplitude: f64) -> (f64, f64) {
    let (lx, ly) = domain.lengths();
    let (cx, cy) = domain.centers();
    let y = eta
        + amplitude * ly / 8.0
            * (3.0 * PI * (xi - cx) / lx).cos()
            * (PI * (eta - cy) / ly).cos();
    let x = xi
        + amplitude * lx / 8.0
            * (PI * (xi - cx) / lx).cos()
            * (4.0 * PI * (y - cy) / ly).cos();
    (x, y)
}

/// Analytic Jacobian `[[x_ξ, x_η], [y_ξ, y_η]]` of [`curved_mapping_2d`].
pub fn curved_mapping_jacobian(xi: f64, eta: f64, domain: &Domain2d, amplitude: f64) -> [[f64; 2]; 2] {
    let (lx, ly) = domain.lengths();
    let (cx, cy) = domain.centers();
    let ay = amplitude * ly / 8.0;
    let ax = amplitude * lx / 8.0;
    let (s3, c3) = (3.0 * PI * (xi - cx) / lx).sin_cos();
    let (se, ce) = (PI * (eta - cy) / ly).sin_cos();
    let y = eta + ay * c3 * ce;
    let y_xi = -ay * (3.0 * PI / lx) * s3 * ce;
    let y_eta = 1.0 - ay * (PI / ly) * c3 * se;
    let (s1, c1) = (PI * (xi - cx) / lx).sin_cos();
    let (s4, c4) = (4.0 * PI * (y - cy) / ly).sin_cos();
    let x_xi = 1.0 + ax * (-(PI / lx) * s1 * c4 - c1 * (4.0 * PI / ly) * s4 * y_xi);
    let x_eta = ax * (-c1 * (4.0 * PI / ly) * s4 * y_eta);
    [[x_xi, x_eta], [y_xi, y_eta]]
}

/// Periodic structured quadrilateral mesh with collocated metric terms.
///
/// Metric terms are obtained by differentiating the nodal interpolant of the
/// mapping with the LGL differentiation matrix. In 2D this form satisfies the
/// discrete metric identities exactly, which the free-stream preservation of
/// the DG operators relies on.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvedMesh2D {
    pub nx: usize,
    pub ny: usize,
    pub domain: Domain2d,
    pub mapping: Mapping2d,
    pub degree: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub jacobian: Vec<f64>,
    /// `contravariant[node][j]` is `J ∇ξ^j` at the node.
    pub contravariant: Vec<[[f64; 2]; 2]>,
}

impl CurvedMesh2D {
    pub fn new(
        nx: usize,
        ny: usize,
        domain: Domain2d,
        mapping: Mapping2d,
        basis: &ReferenceElement,
    ) -> Result<Self, CflError> {
        if nx == 0 || ny == 0 {
            return Err(CflError::InvalidMetrics("empty mesh".into()));
        }
        let n = basis.n_nodes();
        let nn = n * n;
        let total = nx * ny * nn;
        let (dxi, deta) = (
            (domain.x.1 - domain.x.0) / nx as f64,
            (domain.y.1 - domain.y.0) / ny as f64,
        );
        let mut x = vec![0.0; total];
        let mut y = vec![0.0; total];
        for ey in 0..ny {
            for ex in 0..nx {
                let e = ex + nx * ey;
                for j in 0..n {
                    for i in 0..n {
                        let xi = domain.x.0 + dxi * (ex as f64 + 0.5 * (basis.nodes[i] + 1.0));
                        let eta = domain.y.0 + deta * (ey as f64 + 0.5 * (basis.nodes[j] + 1.0));
                        let (px, py) = match mapping {
                            Mapping2d::Identity => (xi, eta),
                            Mapping2d::Warp { amplitude } => {
                                curved_mapping_2d(xi, eta, &domain, amplitude)
                            }
                        };
                        x[e * nn + i + n * j] = px;
                        y[e * nn + i + n * j] = py;
                    }
                }
            }
        }

        let mut jacobian = vec![0.0; total];
        let mut contravariant = vec![[[0.0; 2]; 2]; total];
        for e in 0..nx * ny {
            let off = e * nn;
            for j in 0..n {
                for i in 0..n {
                    let (mut x_r, mut y_r, mut x_s, mut y_s) = (0.0, 0.0, 0.0, 0.0);
                    for k in 0..n {
                        let dik = basis.d(i, k);
                        let djk = basis.d(j, k);
                        x_r += dik * x[off + k + n * j];
                        y_r += dik * y[off + k + n * j];
                        x_s += djk * x[off + i + n * k];
                        y_s += djk * y[off + i + n * k];
                    }
                    let g = off + i + n * j;
                    jacobian[g] = x_r * y_s - x_s * y_r;
                    contravariant[g] = [[y_s, -x_s], [-y_r, x_r]];
                }
            }
        }
        if let Some(g) = jacobian.iter().position(|&jj| !(jj > 0.0)) {
            return Err(CflError::InvalidMetrics(format!(
                "non-positive Jacobian {} at node {g}",
                jacobian[g]
            )));
        }
        Ok(Self {
            nx,
            ny,
            domain,
            mapping,
            degree: basis.degree,
            x,
            y,
            jacobian,
            contravariant,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_nodes(&self) -> usize {
        self.jacobian.len()
    }

    #[inline]
    pub fn element(&self, ex: usize, ey: usize) -> usize {
        (ex % self.nx) + self.nx * (ey % self.ny)
    }

    pub fn metrics(&self) -> MeshLimitProvider {
        MeshLimitProvider::new(
            self.degree,
            2,
            self.jacobian.clone(),
            self.contravariant.clone(),
        )
        .expect("mesh construction checked the Jacobian")
    }
}
