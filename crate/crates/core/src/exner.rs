//! Shallow water equations coupled to an Exner bed-evolution equation with
//! the Grass sediment closure: flux Jacobian, characteristic wave speeds and
//! Froude number, as needed for step size control.

use std::str::FromStr;

use nalgebra::Matrix4;
use thiserror::Error;

use crate::cfl::{CflError, WaveSpeed};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExnerError {
    #[error("water height must be positive, got {0}")]
    Domain(f64),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("hyperbolicity lost: depressed cubic discriminant {discriminant:.3e} < 0")]
    HyperbolicityLoss { discriminant: f64 },
}

/// Which form of the `(4,2)` Jacobian entry to use: `ξA_g(3v₁² + v₂)/h` or
/// `ξA_g(3v₁² + v₂²)/h`. Only the squared form is consistent with the
/// characteristic polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Jacobian42 {
    AsPrinted,
    #[default]
    Squared,
}

impl FromStr for Jacobian42 {
    type Err = ExnerError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "as_printed" => Ok(Jacobian42::AsPrinted),
            "squared" => Ok(Jacobian42::Squared),
            other => Err(ExnerError::Params(format!("unknown jacobian_42 variant {other:?}"))),
        }
    }
}

/// Physical constants of the coupled system. The Grass exponent is fixed to 3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweExnerParams {
    pub g: f64,
    /// Bed porosity in `(0, 1)`.
    pub sigma: f64,
    /// `1 / (1 - sigma)`.
    pub xi: f64,
    /// Grass constant in `[0, 1]`.
    pub a_g: f64,
    pub m_exp: u32,
    pub jacobian_42: Jacobian42,
}

impl SweExnerParams {
    pub fn new(g: f64, sigma: f64, a_g: f64) -> Result<Self, ExnerError> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(ExnerError::Params(format!("gravity {g}")));
        }
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(ExnerError::Params(format!("porosity {sigma} outside (0, 1)")));
        }
        if !(0.0..=1.0).contains(&a_g) {
            return Err(ExnerError::Params(format!("Grass constant {a_g} outside [0, 1]")));
        }
        Ok(Self {
            g,
            sigma,
            xi: 1.0 / (1.0 - sigma),
            a_g,
            m_exp: 3,
            jacobian_42: Jacobian42::default(),
        })
    }

    pub fn with_jacobian_42(mut self, variant: Jacobian42) -> Self {
        self.jacobian_42 = variant;
        self
    }
}

/// Conserved state `(h, hv₁, hv₂, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweExnerState {
    pub h: f64,
    pub hv1: f64,
    pub hv2: f64,
    pub b: f64,
}

impl SweExnerState {
    pub fn new(h: f64, hv1: f64, hv2: f64, b: f64) -> Result<Self, ExnerError> {
        if !(h > 0.0) {
            return Err(ExnerError::Domain(h));
        }
        Ok(Self { h, hv1, hv2, b })
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.hv1 / self.h, self.hv2 / self.h)
    }

    /// The same state with the roles of `x` and `y` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            hv1: self.hv2,
            hv2: self.hv1,
            ..*self
        }
    }

    fn check(&self) -> Result<(), ExnerError> {
        if self.h > 0.0 {
            Ok(())
        } else {
            Err(ExnerError::Domain(self.h))
        }
    }
}

/// Solid transport discharge `q = A_g v |v|²`.
pub fn grass_discharge(v: (f64, f64), params: &SweExnerParams) -> (f64, f64) {
    let speed2 = v.0 * v.0 + v.1 * v.1;
    (params.a_g * v.0 * speed2, params.a_g * v.1 * speed2)
}

/// Non-conservative flux Jacobian in `x` for `(h, hv₁, hv₂, b)`.
pub fn flux_jacobian_x(state: &SweExnerState, params: &SweExnerParams) -> Result<Matrix4<f64>, ExnerError> {
    state.check()?;
    let (v1, v2) = state.velocity();
    let h = state.h;
    let gh = params.g * h;
    let k = params.xi * params.a_g / h;
    let v2_term = match params.jacobian_42 {
        Jacobian42::AsPrinted => v2,
        Jacobian42::Squared => v2 * v2,
    };
    #[rustfmt::skip]
    let m = Matrix4::new(
        0.0, 1.0, 0.0, 0.0,
        gh - v1 * v1, 2.0 * v1, 0.0, gh,
        -v1 * v2, v2, v1, 0.0,
        -3.0 * k * v1 * (v1 * v1 + v2 * v2), k * (3.0 * v1 * v1 + v2_term), 2.0 * k * v1 * v2, 0.0,
    );
    Ok(m)
}

/// Flux Jacobian in `y`, obtained by swapping velocity components and the
/// two momentum rows/columns.
pub fn flux_jacobian_y(state: &SweExnerState, params: &SweExnerParams) -> Result<Matrix4<f64>, ExnerError> {
    let mut m = flux_jacobian_x(&state.swapped(), params)?;
    m.swap_rows(1, 2);
    m.swap_columns(1, 2);
    Ok(m)
}

/// Coefficients `(c₂, c₁, c₀)` of the monic cubic `λ³ + c₂λ² + c₁λ + c₀`.
pub fn characteristic_cubic(state: &SweExnerState, params: &SweExnerParams) -> Result<[f64; 3], ExnerError> {
    state.check()?;
    let (v1, v2) = state.velocity();
    let gh = params.g * state.h;
    let s = params.g * params.xi * params.a_g * (3.0 * v1 * v1 + v2 * v2);
    Ok([-2.0 * v1, v1 * v1 - gh - s, s * v1])
}

/// Real roots of a monic cubic with three real roots, ascending, by the
/// trigonometric form of Cardano's method.
pub fn cubic_real_roots(c: [f64; 3]) -> Result<[f64; 3], ExnerError> {
    let [a, b, cc] = c;
    let shift = a / 3.0;
    // depressed cubic t³ + p t + q with λ = t − a/3
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + cc;
    let scale = 1.0f64.max(a.abs()).max(b.abs().sqrt()).max(cc.abs().cbrt());
    let discriminant = -(4.0 * p * p * p + 27.0 * q * q);
    if discriminant < -1e-12 * scale.powi(6) {
        return Err(ExnerError::HyperbolicityLoss { discriminant });
    }
    let mut roots = if p.abs() <= 1e-15 * scale * scale {
        // triple root
        let t = -q.cbrt();
        [t, t, t]
    } else {
        let p = p.min(0.0);
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let tau = 2.0 * std::f64::consts::PI / 3.0;
        [m * theta.cos(), m * (theta - tau).cos(), m * (theta - 2.0 * tau).cos()]
    };
    for r in &mut roots {
        *r -= shift;
        *r = polish(c, *r);
    }
    roots.sort_by(f64::total_cmp);
    Ok(roots)
}

fn polish(c: [f64; 3], mut x: f64) -> f64 {
    for _ in 0..2 {
        let f = ((x + c[0]) * x + c[1]) * x + c[2];
        let df = (3.0 * x + 2.0 * c[0]) * x + c[1];
        if df.abs() < 1e-300 {
            break;
        }
        let next = x - f / df;
        let f_next = ((next + c[0]) * next + c[1]) * next + c[2];
        if !(f_next.abs() < f.abs()) {
            break;
        }
        x = next;
    }
    x
}

/// The three roots of the characteristic cubic, ascending.
pub fn characteristic_roots(state: &SweExnerState, params: &SweExnerParams) -> Result<[f64; 3], ExnerError> {
    cubic_real_roots(characteristic_cubic(state, params)?)
}

/// All four wave speeds in `x`: the cubic roots and `v₁`, ascending.
pub fn wave_speeds_x(state: &SweExnerState, params: &SweExnerParams) -> Result<[f64; 4], ExnerError> {
    let r = characteristic_roots(state, params)?;
    let mut all = [r[0], r[1], r[2], state.velocity().0];
    all.sort_by(f64::total_cmp);
    Ok(all)
}

/// `max(|v₁|, max |λ_k|)` over the characteristic roots.
pub fn max_wave_speed(state: &SweExnerState, params: &SweExnerParams) -> Result<f64, ExnerError> {
    let r = characteristic_roots(state, params)?;
    Ok(r.iter().fold(state.velocity().0.abs(), |m, x| m.max(x.abs())))
}

pub fn froude(state: &SweExnerState, params: &SweExnerParams) -> Result<f64, ExnerError> {
    state.check()?;
    let (v1, v2) = state.velocity();
    Ok((v1 * v1 + v2 * v2).sqrt() / (params.g * state.h).sqrt())
}

/// Per-node wave speeds for CFL control; states are stored node-interleaved
/// as `(h, hv₁, hv₂, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExnerWaveSpeed {
    pub params: SweExnerParams,
}

impl WaveSpeed for ExnerWaveSpeed {
    fn node_speed(&self, u: &[f64], node: usize) -> Result<[f64; 2], CflError> {
        let q = &u[4 * node..4 * node + 4];
        let err = |e: ExnerError| CflError::WaveSpeed {
            node,
            reason: e.to_string(),
        };
        let state = SweExnerState::new(q[0], q[1], q[2], q[3]).map_err(err)?;
        let sx = max_wave_speed(&state, &self.params).map_err(err)?;
        let sy = max_wave_speed(&state.swapped(), &self.params).map_err(err)?;
        Ok([sx, sy])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dune() -> (SweExnerState, SweExnerParams) {
        (
            SweExnerState::new(10.0, 10.0, 0.0, 0.0).unwrap(),
            SweExnerParams::new(9.8, 0.4, 0.001).unwrap(),
        )
    }

    #[test]
    fn params_invariants() {
        let p = SweExnerParams::new(9.8, 0.4, 0.001).unwrap();
        assert_abs_diff_eq!(p.xi * (1.0 - p.sigma), 1.0, epsilon = 1e-14);
        assert_eq!(p.m_exp, 3);
        assert!(SweExnerParams::new(9.8, 1.0, 0.0).is_err());
        assert!(SweExnerParams::new(9.8, 0.4, 1.5).is_err());
        assert!(SweExnerState::new(0.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn grass_examples() {
        let p = SweExnerParams::new(9.8, 0.4, 0.001).unwrap();
        assert_eq!(grass_discharge((0.0, 0.0), &p), (0.0, 0.0));
        let (qx, qy) = grass_discharge((1.0, 0.0), &p);
        assert_abs_diff_eq!(qx, 0.001, epsilon = 1e-18);
        assert_eq!(qy, 0.0);
        let p0 = SweExnerParams::new(9.8, 0.4, 0.0).unwrap();
        assert_eq!(grass_discharge((2.0, -3.0), &p0), (0.0, 0.0));
    }

    #[test]
    fn jacobian_at_rest() {
        let p = SweExnerParams::new(9.8, 0.4, 0.01).unwrap();
        let s = SweExnerState::new(10.0, 0.0, 0.0, 1.0).unwrap();
        let m = flux_jacobian_x(&s, &p).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = match (i, j) {
                    (0, 1) => 1.0,
                    (1, 0) | (1, 3) => 98.0,
                    _ => 0.0,
                };
                assert_abs_diff_eq!(m[(i, j)], expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cubic_examples() {
        let p = SweExnerParams::new(9.8, 0.4, 0.0).unwrap();
        let s = SweExnerState::new(10.0, 0.0, 0.0, 0.0).unwrap();
        let r = characteristic_roots(&s, &p).unwrap();
        let c = 98f64.sqrt();
        for (a, b) in r.iter().zip([-c, 0.0, c]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        let s = SweExnerState::new(10.0, 10.0, 0.0, 0.0).unwrap();
        let r = characteristic_roots(&s, &p).unwrap();
        for (a, b) in r.iter().zip([1.0 - c, 0.0, 1.0 + c]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(max_wave_speed(&s, &p).unwrap(), 1.0 + c, epsilon = 1e-12);
    }

    #[test]
    fn complex_roots_are_reported() {
        // λ³ + λ = 0 has roots 0, ±i
        assert!(matches!(
            cubic_real_roots([0.0, 1.0, 0.0]),
            Err(ExnerError::HyperbolicityLoss { .. })
        ));
        let r = cubic_real_roots([-3.0, 3.0, -1.0]).unwrap();
        for x in r {
            assert_abs_diff_eq!(x, 1.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn dune_state() {
        let (s, p) = dune();
        assert_abs_diff_eq!(froude(&s, &p).unwrap(), 1.0 / 98f64.sqrt(), epsilon = 1e-15);
        let speed = max_wave_speed(&s, &p).unwrap();
        assert!(speed > 98f64.sqrt() - 1.0);
        assert!((speed - (1.0 + 98f64.sqrt())).abs() < 0.1);
    }

    #[test]
    fn froude_edge_cases() {
        let p = SweExnerParams::new(9.8, 0.4, 0.001).unwrap();
        let s = SweExnerState::new(3.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(froude(&s, &p).unwrap(), 0.0);
        let h: f64 = 2.5;
        let v = (9.8 * h).sqrt();
        let s = SweExnerState::new(h, v * h, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(froude(&s, &p).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn y_direction_is_a_swap() {
        let p = SweExnerParams::new(9.81, 0.3, 0.005).unwrap();
        let s = SweExnerState::new(2.0, 0.6, -1.4, 0.0).unwrap();
        let jy = flux_jacobian_y(&s, &p).unwrap();
        let jx_swapped = flux_jacobian_x(&s.swapped(), &p).unwrap();
        let mut perm = Matrix4::zeros();
        for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
            perm[(i, j)] = 1.0;
        }
        let back = perm * jy * perm;
        assert!((back - jx_swapped).abs().max() < 1e-15);
    }
}
