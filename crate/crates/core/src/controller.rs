//! PID step size control driven by embedded error estimates.

use thiserror::Error;

use crate::integrator::{Rhs, RhsError};

#[derive(Debug, Error, PartialEq)]
pub enum ControllerError {
    #[error("vector lengths differ ({0}, {1}, {2})")]
    LengthMismatch(usize, usize, usize),
    #[error("error norm of an empty vector")]
    Empty,
    #[error("invalid controller configuration: {0}")]
    InvalidConfig(String),
    #[error("initial step size estimate failed: {0}")]
    Initialization(String),
}

/// Which state enters `max(|u_new|, |ũ|)` in the error weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefChoice {
    /// `ũ = uⁿ`
    #[default]
    PreviousState,
    /// `ũ = ûⁿ⁺¹`
    EmbeddedSolution,
}

impl std::str::FromStr for RefChoice {
    type Err = ControllerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "previous_state" => Ok(RefChoice::PreviousState),
            "embedded_solution" => Ok(RefChoice::EmbeddedSolution),
            other => Err(ControllerError::InvalidConfig(format!(
                "unknown ref_choice `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub beta: [f64; 3],
    /// Exponent denominator `k = min(q, q̂) + 1`.
    pub k: u32,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub accept_safety: f64,
    pub w_min: f64,
    pub ref_choice: RefChoice,
}

impl ControllerConfig {
    pub const DEFAULT_ACCEPT_SAFETY: f64 = 0.81;
    pub const DEFAULT_W_MIN: f64 = f64::EPSILON;

    /// Equal absolute and relative tolerances.
    pub fn new(beta: [f64; 3], order_q: usize, tol: f64) -> Self {
        Self {
            beta,
            k: order_q as u32,
            tol_abs: tol,
            tol_rel: tol,
            accept_safety: Self::DEFAULT_ACCEPT_SAFETY,
            w_min: Self::DEFAULT_W_MIN,
            ref_choice: RefChoice::PreviousState,
        }
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        let bad = |m: &str| Err(ControllerError::InvalidConfig(m.into()));
        if self.k < 1 {
            return bad("k must be at least 1");
        }
        if !(self.tol_abs > 0.0) || !(self.tol_rel >= 0.0) {
            return bad("tolerances must satisfy tol_abs > 0, tol_rel >= 0");
        }
        if !(self.accept_safety > 0.0 && self.accept_safety < 1.0) {
            return bad("accept_safety must lie in (0, 1)");
        }
        if !(self.w_min > 0.0) {
            return bad("w_min must be positive");
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return bad("beta must be finite");
        }
        Ok(())
    }
}

/// PID memory: the last two inverse error estimates and the current step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub eps_n: f64,
    pub eps_nm1: f64,
    pub dt: f64,
}

impl ControllerState {
    pub fn new(dt: f64) -> Self {
        Self {
            eps_n: 1.0,
            eps_nm1: 1.0,
            dt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub dt_factor: f64,
    pub accept: bool,
    pub dt_next: f64,
    pub new_state: ControllerState,
}

/// Weighted RMS norm of the local error estimate `u_new - u_hat`.
pub fn error_weight_norm(
    u_new: &[f64],
    u_hat: &[f64],
    u_ref: &[f64],
    cfg: &ControllerConfig,
) -> Result<f64, ControllerError> {
    let m = u_new.len();
    if u_hat.len() != m || u_ref.len() != m {
        return Err(ControllerError::LengthMismatch(m, u_hat.len(), u_ref.len()));
    }
    if m == 0 {
        return Err(ControllerError::Empty);
    }
    let sum: f64 = u_new
        .iter()
        .zip(u_hat)
        .zip(u_ref)
        .map(|((&un, &uh), &ur)| {
            let scale = cfg.tol_abs + cfg.tol_rel * un.abs().max(ur.abs());
            let e = (un - uh) / scale;
            e * e
        })
        .sum();
    Ok((sum / m as f64).sqrt())
}

/// Same weights as [`error_weight_norm`] applied to a single vector, with
/// `u_ref` supplying the magnitudes.
fn weighted_norm(v: &[f64], u_ref: &[f64], cfg: &ControllerConfig) -> f64 {
    let sum: f64 = v
        .iter()
        .zip(u_ref)
        .map(|(&x, &r)| {
            let e = x / (cfg.tol_abs + cfg.tol_rel * r.abs());
            e * e
        })
        .sum();
    (sum / v.len() as f64).sqrt()
}

/// Step size limiter `κ(a) = 1 + atan(a - 1)`.
pub fn limiter(a: f64) -> f64 {
    1.0 + (a - 1.0).atan()
}

/// One PID update. The memory advances on rejected steps as well, and a
/// rejected step is retried with `dt_next`.
pub fn propose(state: &ControllerState, w_new: f64, cfg: &ControllerConfig) -> Decision {
    let w = w_new.max(cfg.w_min);
    let eps = 1.0 / w;
    let k = f64::from(cfg.k);
    let [b1, b2, b3] = cfg.beta;
    let raw = eps.powf(b1 / k) * state.eps_n.powf(b2 / k) * state.eps_nm1.powf(b3 / k);
    let dt_factor = limiter(raw);
    let dt_next = dt_factor * state.dt;
    Decision {
        dt_factor,
        accept: dt_factor >= cfg.accept_safety,
        dt_next,
        new_state: ControllerState {
            eps_n: eps,
            eps_nm1: state.eps_n,
            dt: dt_next,
        },
    }
}

/// Initial step size following the recipe of Hairer, Nørsett and Wanner
/// (Solving ODEs I, p. 169), using the controller's weighted norm with
/// `u_ref = u0`. Always costs exactly two right-hand side evaluations.
pub fn initial_dt<F: Rhs + ?Sized>(
    f: &F,
    u0: &[f64],
    t0: f64,
    q: usize,
    cfg: &ControllerConfig,
) -> Result<(f64, u64), ControllerError> {
    if u0.is_empty() {
        return Err(ControllerError::Empty);
    }
    let to_init = |e: RhsError| ControllerError::Initialization(e.to_string());
    let n = u0.len();
    let mut f0 = vec![0.0; n];
    f.eval(t0, u0, &mut f0).map_err(to_init)?;
    if f0.iter().any(|x| !x.is_finite()) {
        return Err(ControllerError::Initialization(
            "non-finite right-hand side at t0".into(),
        ));
    }
    let d0 = weighted_norm(u0, u0, cfg);
    let d1 = weighted_norm(&f0, u0, cfg);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };

    let u1: Vec<f64> = u0.iter().zip(&f0).map(|(u, k)| u + h0 * k).collect();
    let mut f1 = vec![0.0; n];
    f.eval(t0 + h0, &u1, &mut f1).map_err(to_init)?;
    if f1.iter().any(|x| !x.is_finite()) {
        return Err(ControllerError::Initialization(
            "non-finite right-hand side at the Euler probe".into(),
        ));
    }
    let diff: Vec<f64> = f1.iter().zip(&f0).map(|(a, b)| a - b).collect();
    let d2 = weighted_norm(&diff, u0, cfg) / h0;

    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dmax).powf(1.0 / (q as f64 + 1.0))
    };
    Ok(((100.0 * h0).min(h1), 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::FnRhs;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn bs3_cfg(tol: f64) -> ControllerConfig {
        ControllerConfig::new([0.60, -0.20, 0.00], 3, tol)
    }

    #[test]
    fn norm_vanishes_without_error() {
        let u = [1.0, -2.0, 3.0];
        let w = error_weight_norm(&u, &u, &[5.0, 5.0, 5.0], &bs3_cfg(1e-4)).unwrap();
        assert_eq!(w, 0.0);
    }

    #[test]
    fn norm_hand_evaluation() {
        let mut cfg = bs3_cfg(1.0);
        cfg.tol_abs = 1.0;
        cfg.tol_rel = 1.0;
        let w = error_weight_norm(&[2.0], &[1.0], &[3.0], &cfg).unwrap();
        assert_abs_diff_eq!(w, 0.25, epsilon = 1e-16);
    }

    #[test]
    fn norm_is_linear_without_relative_tolerance() {
        let mut cfg = bs3_cfg(1e-3);
        cfg.tol_rel = 0.0;
        let u_hat = [0.3, -0.1, 0.7];
        let u = [0.31, -0.12, 0.71];
        let u10: Vec<f64> = u.iter().zip(&u_hat).map(|(a, b)| b + 10.0 * (a - b)).collect();
        let w1 = error_weight_norm(&u, &u_hat, &u, &cfg).unwrap();
        let w10 = error_weight_norm(&u10, &u_hat, &u10, &cfg).unwrap();
        assert_abs_diff_eq!(w10 / w1, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn norm_contract_violations() {
        let cfg = bs3_cfg(1e-4);
        assert_eq!(
            error_weight_norm(&[1.0], &[1.0, 2.0], &[1.0], &cfg),
            Err(ControllerError::LengthMismatch(1, 2, 1))
        );
        assert_eq!(error_weight_norm(&[], &[], &[], &cfg), Err(ControllerError::Empty));
    }

    #[test]
    fn limiter_values() {
        assert_eq!(limiter(1.0), 1.0);
        assert_abs_diff_eq!(limiter(0.0), 1.0 - FRAC_PI_4, epsilon = 1e-15);
        assert_abs_diff_eq!(limiter(0.0), 0.21460183660255172, epsilon = 1e-15);
        assert_abs_diff_eq!(limiter(1e300), 1.0 + FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn perfect_step_keeps_dt() {
        let cfg = ControllerConfig::new([0.3, -0.1, 0.02], 3, 1e-4);
        let d = propose(&ControllerState::new(0.5), 1.0, &cfg);
        assert_eq!(d.dt_factor, 1.0);
        assert!(d.accept);
        assert_eq!(d.dt_next, 0.5);
    }

    #[test]
    fn worked_pid_example() {
        let d = propose(&ControllerState::new(1.0), 1e-3, &bs3_cfg(1e-4));
        let raw = 1000f64.powf(0.2);
        assert_abs_diff_eq!(raw, 3.981071705534973, epsilon = 1e-14);
        assert_abs_diff_eq!(d.dt_factor, 1.0 + (raw - 1.0).atan(), epsilon = 1e-15);
        assert_abs_diff_eq!(d.dt_factor, 2.2471421354580174, epsilon = 1e-12);
        assert!(d.accept);
    }

    #[test]
    fn large_error_rejects() {
        let d = propose(&ControllerState::new(1.0), 1e6, &bs3_cfg(1e-4));
        assert_abs_diff_eq!(d.dt_factor, limiter(1e-6f64.powf(0.2)), epsilon = 1e-15);
        assert!(d.dt_factor < 0.81);
        assert!(!d.accept);
        // rejected steps still shift the memory and retry with dt_next
        assert_eq!(d.new_state.eps_nm1, 1.0);
        assert_abs_diff_eq!(d.new_state.eps_n, 1e-6, epsilon = 1e-21);
        assert_eq!(d.new_state.dt, d.dt_next);
    }

    #[test]
    fn zero_error_is_clamped() {
        let d = propose(&ControllerState::new(1.0), 0.0, &bs3_cfg(1e-4));
        assert!(d.dt_factor.is_finite());
        assert!(d.new_state.eps_n.is_finite());
        assert_eq!(d.new_state.eps_n, 1.0 / f64::EPSILON);
    }

    #[test]
    fn initial_dt_degenerate_branch() {
        let f = FnRhs::new(|_t, _u: &[f64], du: &mut [f64]| du.fill(0.0));
        let (dt0, evals) = initial_dt(&f, &[1.0, 2.0], 0.0, 3, &bs3_cfg(1e-4)).unwrap();
        assert_eq!(evals, 2);
        // h0 = 1e-6, fallback h1 = max(1e-6, 1e-9), dt0 = min(100 h0, h1)
        assert_abs_diff_eq!(dt0, 1e-6, epsilon = 1e-20);
    }

    #[test]
    fn initial_dt_exponential() {
        let f = FnRhs::new(|_t, u: &[f64], du: &mut [f64]| du.copy_from_slice(u));
        let (dt0, evals) = initial_dt(&f, &[1.0], 0.0, 3, &bs3_cfg(1e-4)).unwrap();
        assert!(dt0 > 0.0 && dt0.is_finite());
        assert_eq!(evals, 2);
    }

    #[test]
    fn initial_dt_rejects_nan() {
        let f = FnRhs::new(|_t, _u: &[f64], du: &mut [f64]| du.fill(f64::NAN));
        assert!(matches!(
            initial_dt(&f, &[1.0], 0.0, 3, &bs3_cfg(1e-4)),
            Err(ControllerError::Initialization(_))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(bs3_cfg(1e-4).validate().is_ok());
        let mut cfg = bs3_cfg(1e-4);
        cfg.accept_safety = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = bs3_cfg(1e-4);
        cfg.w_min = 0.0;
        assert!(cfg.validate().is_err());
        assert_eq!(
            "embedded_solution".parse::<RefChoice>().unwrap(),
            RefChoice::EmbeddedSolution
        );
    }
}
