//! Linear advection: weak-form DGSEM and the DG/FV blended operator.
//!
//! Interface fluxes are local Lax-Friedrichs, which is the upwind flux for
//! linear advection. The finite volume part uses one subcell per LGL node
//! with width proportional to the quadrature weight; element interfaces share
//! the DG numerical flux so that both operators are conservative.

use super::basis::ReferenceElement;
use super::mesh::{CurvedMesh2D, Mesh1d};
use crate::cfl::{CflLimit, ConstantVelocity};
use crate::integrator::{Rhs, RhsError};

#[inline]
fn llf(normal_speed: f64, ul: f64, ur: f64) -> f64 {
    0.5 * normal_speed * (ul + ur) - 0.5 * normal_speed.abs() * (ur - ul)
}

/// `D̂[i][k] = ω_k D_ki / ω_i`, the weak-form volume operator.
fn weak_derivative(basis: &ReferenceElement) -> Vec<f64> {
    let n = basis.n_nodes();
    let mut dhat = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            dhat[i * n + k] = basis.weights[k] * basis.d(k, i) / basis.weights[i];
        }
    }
    dhat
}

fn check_alpha(alpha: f64) -> f64 {
    assert!((0.0..=1.0).contains(&alpha), "blending factor {alpha} outside [0, 1]");
    alpha
}

/// 1D periodic advection `u_t + a u_x = 0`.
#[derive(Debug, Clone)]
pub struct Advection1d {
    pub basis: ReferenceElement,
    pub mesh: Mesh1d,
    pub velocity: f64,
    /// Weight of the finite volume operator; zero is pure DGSEM.
    pub alpha: f64,
    dhat: Vec<f64>,
}

impl Advection1d {
    pub fn new(degree: usize, mesh: Mesh1d, velocity: f64) -> Self {
        Self::blended(degree, mesh, velocity, 0.0)
    }

    pub fn blended(degree: usize, mesh: Mesh1d, velocity: f64, alpha: f64) -> Self {
        let basis = ReferenceElement::new(degree);
        let dhat = weak_derivative(&basis);
        Self {
            basis,
            mesh,
            velocity,
            alpha: check_alpha(alpha),
            dhat,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.elements * self.basis.n_nodes()
    }

    pub fn cfl_limit(&self) -> CflLimit<ConstantVelocity> {
        CflLimit {
            metrics: self.mesh.metrics(&self.basis),
            wave_speed: ConstantVelocity([self.velocity, 0.0]),
        }
    }

    /// Mass-matrix weights `J_i ω_i` for discrete integrals.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let jac = 0.5 * self.mesh.h();
        (0..self.mesh.elements)
            .flat_map(|_| self.basis.weights.iter().map(move |w| w * jac))
            .collect()
    }

    fn face_fluxes(&self, u: &[f64]) -> Vec<f64> {
        // face e sits between element e-1 and element e (periodic)
        let n = self.basis.n_nodes();
        let ne = self.mesh.elements;
        (0..ne)
            .map(|e| {
                let left = (e + ne - 1) % ne;
                llf(self.velocity, u[left * n + n - 1], u[e * n])
            })
            .collect()
    }

    pub fn dg_rhs(&self, u: &[f64], du: &mut [f64]) {
        let n = self.basis.n_nodes();
        let ne = self.mesh.elements;
        let jac = 0.5 * self.mesh.h();
        let faces = self.face_fluxes(u);
        let w = &self.basis.weights;
        for e in 0..ne {
            let ue = &u[e * n..(e + 1) * n];
            let de = &mut du[e * n..(e + 1) * n];
            for i in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.dhat[i * n + k] * self.velocity * ue[k];
                }
                de[i] = acc;
            }
            de[0] += faces[e] / w[0];
            de[n - 1] -= faces[(e + 1) % ne] / w[n - 1];
            for v in de.iter_mut() {
                *v /= jac;
            }
        }
    }

    pub fn fv_rhs(&self, u: &[f64], du: &mut [f64]) {
        let n = self.basis.n_nodes();
        let ne = self.mesh.elements;
        let jac = 0.5 * self.mesh.h();
        let faces = self.face_fluxes(u);
        let w = &self.basis.weights;
        let mut flux = vec![0.0; n + 1];
        for e in 0..ne {
            let ue = &u[e * n..(e + 1) * n];
            flux[0] = faces[e];
            flux[n] = faces[(e + 1) % ne];
            for i in 0..n - 1 {
                flux[i + 1] = llf(self.velocity, ue[i], ue[i + 1]);
            }
            for i in 0..n {
                du[e * n + i] = -(flux[i + 1] - flux[i]) / (w[i] * jac);
            }
        }
    }
}

impl Rhs for Advection1d {
    fn eval(&self, _t: f64, u: &[f64], du: &mut [f64]) -> Result<(), RhsError> {
        blend(self.alpha, u, du, |u, d| self.dg_rhs(u, d), |u, d| self.fv_rhs(u, d));
        Ok(())
    }
}

fn blend(
    alpha: f64,
    u: &[f64],
    du: &mut [f64],
    dg: impl Fn(&[f64], &mut [f64]),
    fv: impl Fn(&[f64], &mut [f64]),
) {
    if alpha == 0.0 {
        dg(u, du);
    } else if alpha == 1.0 {
        fv(u, du);
    } else {
        dg(u, du);
        let mut tmp = vec![0.0; du.len()];
        fv(u, &mut tmp);
        for (d, f) in du.iter_mut().zip(&tmp) {
            *d = (1.0 - alpha) * *d + alpha * f;
        }
    }
}

/// 2D periodic advection `u_t + a·∇u = 0` on a (possibly curved) mesh.
#[derive(Debug, Clone)]
pub struct Advection2d {
    pub basis: ReferenceElement,
    pub mesh: CurvedMesh2D,
    pub velocity: [f64; 2],
    pub alpha: f64,
    dhat: Vec<f64>,
    /// Contravariant subcell normals for the FV operator, per element:
    /// `(p+2)` interface normals along ξ for each row `j`, then along η for
    /// each column `i`.
    subcell_normals: Vec<[f64; 2]>,
}

impl Advection2d {
    pub fn new(degree: usize, mesh: CurvedMesh2D, velocity: [f64; 2]) -> Self {
        Self::blended(degree, mesh, velocity, 0.0)
    }

    pub fn blended(degree: usize, mesh: CurvedMesh2D, velocity: [f64; 2], alpha: f64) -> Self {
        let basis = ReferenceElement::new(degree);
        assert_eq!(mesh.degree, degree, "mesh and basis degree differ");
        let dhat = weak_derivative(&basis);
        let subcell_normals = subcell_normals(&basis, &mesh);
        Self {
            basis,
            mesh,
            velocity,
            alpha: check_alpha(alpha),
            dhat,
            subcell_normals,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_nodes()
    }

    pub fn cfl_limit(&self) -> CflLimit<ConstantVelocity> {
        CflLimit {
            metrics: self.mesh.metrics(),
            wave_speed: ConstantVelocity(self.velocity),
        }
    }

    pub fn quadrature_weights(&self) -> Vec<f64> {
        let n = self.basis.n_nodes();
        let w = &self.basis.weights;
        self.mesh
            .jacobian
            .iter()
            .enumerate()
            .map(|(g, jac)| {
                let loc = g % (n * n);
                jac * w[loc % n] * w[loc / n]
            })
            .collect()
    }

    #[inline]
    fn normal_speed(&self, v: [f64; 2]) -> f64 {
        v[0] * self.velocity[0] + v[1] * self.velocity[1]
    }

    /// Fluxes through the ξ faces (`[e][j]`, left face of element `e`) and
    /// η faces (`[e][i]`, bottom face of element `e`).
    fn face_fluxes(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.basis.n_nodes();
        let nn = n * n;
        let m = &self.mesh;
        let ne = m.n_elements();
        let mut fx = vec![0.0; ne * n];
        let mut fy = vec![0.0; ne * n];
        for ey in 0..m.ny {
            for ex in 0..m.nx {
                let e = m.element(ex, ey);
                let left = m.element(ex + m.nx - 1, ey);
                let below = m.element(ex, ey + m.ny - 1);
                for j in 0..n {
                    let gl = left * nn + (n - 1) + n * j;
                    let gr = e * nn + n * j;
                    let an = self.normal_speed(m.contravariant[gl][0]);
                    fx[e * n + j] = llf(an, u[gl], u[gr]);
                }
                for i in 0..n {
                    let gl = below * nn + i + n * (n - 1);
                    let gr = e * nn + i;
                    let an = self.normal_speed(m.contravariant[gl][1]);
                    fy[e * n + i] = llf(an, u[gl], u[gr]);
                }
            }
        }
        (fx, fy)
    }

    pub fn dg_rhs(&self, u: &[f64], du: &mut [f64]) {
        let n = self.basis.n_nodes();
        let nn = n * n;
        let m = &self.mesh;
        let w = &self.basis.weights;
        let (fx, fy) = self.face_fluxes(u);
        let mut f1 = vec![0.0; nn];
        let mut f2 = vec![0.0; nn];
        for ey in 0..m.ny {
            for ex in 0..m.nx {
                let e = m.element(ex, ey);
                let right = m.element(ex + 1, ey);
                let above = m.element(ex, ey + 1);
                let off = e * nn;
                for loc in 0..nn {
                    let ja = m.contravariant[off + loc];
                    f1[loc] = self.normal_speed(ja[0]) * u[off + loc];
                    f2[loc] = self.normal_speed(ja[1]) * u[off + loc];
                }
                for j in 0..n {
                    for i in 0..n {
                        let mut acc = 0.0;
                        for k in 0..n {
                            acc += self.dhat[i * n + k] * f1[k + n * j];
                            acc += self.dhat[j * n + k] * f2[i + n * k];
                        }
                        du[off + i + n * j] = acc;
                    }
                }
                for j in 0..n {
                    du[off + n * j] += fx[e * n + j] / w[0];
                    du[off + (n - 1) + n * j] -= fx[right * n + j] / w[n - 1];
                }
                for i in 0..n {
                    du[off + i] += fy[e * n + i] / w[0];
                    du[off + i + n * (n - 1)] -= fy[above * n + i] / w[n - 1];
                }
                for loc in 0..nn {
                    du[off + loc] /= m.jacobian[off + loc];
                }
            }
        }
    }

    pub fn fv_rhs(&self, u: &[f64], du: &mut [f64]) {
        let n = self.basis.n_nodes();
        let nn = n * n;
        let m = &self.mesh;
        let w = &self.basis.weights;
        let (fx, fy) = self.face_fluxes(u);
        let per_elem = 2 * n * (n + 1);
        let mut flux = vec![0.0; n + 1];
        for ey in 0..m.ny {
            for ex in 0..m.nx {
                let e = m.element(ex, ey);
                let right = m.element(ex + 1, ey);
                let above = m.element(ex, ey + 1);
                let off = e * nn;
                let normals = &self.subcell_normals[e * per_elem..(e + 1) * per_elem];
                for loc in 0..nn {
                    du[off + loc] = 0.0;
                }
                // ξ direction, row by row
                for j in 0..n {
                    flux[0] = fx[e * n + j];
                    flux[n] = fx[right * n + j];
                    for i in 0..n - 1 {
                        let an = self.normal_speed(normals[j * (n + 1) + i + 1]);
                        flux[i + 1] = llf(an, u[off + i + n * j], u[off + i + 1 + n * j]);
                    }
                    for i in 0..n {
                        du[off + i + n * j] -= (flux[i + 1] - flux[i]) / w[i];
                    }
                }
                // η direction, column by column
                let base = n * (n + 1);
                for i in 0..n {
                    flux[0] = fy[e * n + i];
                    flux[n] = fy[above * n + i];
                    for j in 0..n - 1 {
                        let an = self.normal_speed(normals[base + i * (n + 1) + j + 1]);
                        flux[j + 1] = llf(an, u[off + i + n * j], u[off + i + n * (j + 1)]);
                    }
                    for j in 0..n {
                        du[off + i + n * j] -= (flux[j + 1] - flux[j]) / w[j];
                    }
                }
                for loc in 0..nn {
                    du[off + loc] /= m.jacobian[off + loc];
                }
            }
        }
    }
}

impl Rhs for Advection2d {
    fn eval(&self, _t: f64, u: &[f64], du: &mut [f64]) -> Result<(), RhsError> {
        blend(self.alpha, u, du, |u, d| self.dg_rhs(u, d), |u, d| self.fv_rhs(u, d));
        Ok(())
    }
}

/// Subcell interface normals obtained by integrating the divergence of the
/// contravariant vectors across the element, which keeps the FV operator
/// free-stream preserving on curved meshes.
fn subcell_normals(basis: &ReferenceElement, mesh: &CurvedMesh2D) -> Vec<[f64; 2]> {
    let n = basis.n_nodes();
    let nn = n * n;
    let w = &basis.weights;
    let ja = &mesh.contravariant;
    let mut out = Vec::with_capacity(mesh.n_elements() * 2 * n * (n + 1));
    for e in 0..mesh.n_elements() {
        let off = e * nn;
        for j in 0..n {
            let mut acc = ja[off + n * j][0];
            out.push(acc);
            for i in 0..n {
                let mut dja = [0.0; 2];
                for k in 0..n {
                    let v = ja[off + k + n * j][0];
                    dja[0] += basis.d(i, k) * v[0];
                    dja[1] += basis.d(i, k) * v[1];
                }
                acc = [acc[0] + w[i] * dja[0], acc[1] + w[i] * dja[1]];
                out.push(acc);
            }
        }
        for i in 0..n {
            let mut acc = ja[off + i][1];
            out.push(acc);
            for j in 0..n {
                let mut dja = [0.0; 2];
                for k in 0..n {
                    let v = ja[off + i + n * k][1];
                    dja[0] += basis.d(j, k) * v[0];
                    dja[1] += basis.d(j, k) * v[1];
                }
                acc = [acc[0] + w[j] * dja[0], acc[1] + w[j] * dja[1]];
                out.push(acc);
            }
        }
    }
    out
}
