//! Explicit Runge-Kutta stepping and the adaptive time loop.
//!
//! [`integrate`] runs either error-based control (embedded estimate plus
//! PID controller) or CFL-based control (step recomputed from the mesh limit
//! after every accepted step). Right-hand side evaluations are counted
//! exactly; for a pair with `s` stages
//!
//! | control | FSAL | `n_fe` |
//! |---------|------|--------|
//! | error   | yes  | `s·(A + R) + 1 + 2` |
//! | error   | no   | `s·(A + R) + 2` |
//! | CFL     | yes  | `s·A + 1` |
//! | CFL     | no   | `s·A` |
//!
//! The `+2` is the initial step size estimate and the `+1` the very first
//! step of an FSAL pair, which has no cached first stage yet.

use std::fmt::Write as _;

use thiserror::Error;

use crate::cfl::{CflError, MeshLimit};
use crate::controller::{self, ControllerConfig, ControllerError, ControllerState, RefChoice};
use crate::tableaux::ButcherTableau;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RhsError {
    #[error("invalid state: {0}")]
    InvalidState(String),
}

/// A semidiscretization `du/dt = f(t, u)`.
pub trait Rhs {
    fn eval(&self, t: f64, u: &[f64], du: &mut [f64]) -> Result<(), RhsError>;
}

impl<R: Rhs + ?Sized> Rhs for &R {
    fn eval(&self, t: f64, u: &[f64], du: &mut [f64]) -> Result<(), RhsError> {
        (**self).eval(t, u, du)
    }
}

/// Adapts an infallible closure to [`Rhs`].
pub struct FnRhs<F>(F);

impl<F> FnRhs<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    pub fn new(f: F) -> Self {
        FnRhs(f)
    }
}

impl<F> Rhs for FnRhs<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn eval(&self, t: f64, u: &[f64], du: &mut [f64]) -> Result<(), RhsError> {
        (self.0)(t, u, du);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStatistics {
    pub n_fe: u64,
    pub n_accepted: u64,
    pub n_rejected: u64,
}

impl StepStatistics {
    /// Evaluation count predicted by the counting identities.
    pub fn predicted_fe(stages: usize, fsal: bool, error_control: bool, accepted: u64, rejected: u64) -> u64 {
        let s = stages as u64;
        match (error_control, fsal) {
            (true, true) => s * (accepted + rejected) + 3,
            (true, false) => s * (accepted + rejected) + 2,
            (false, true) => s * accepted + 1,
            (false, false) => s * accepted,
        }
    }

    /// `name,tol_or_nu,FE,A,R`
    pub fn summary_line(&self, name: &str, tol_or_nu: f64) -> String {
        format!(
            "{name},{tol_or_nu},{},{},{}",
            self.n_fe, self.n_accepted, self.n_rejected
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    /// Time after the step if accepted, otherwise the unchanged current time.
    pub t: f64,
    pub dt: f64,
    pub accepted: bool,
    pub w: Option<f64>,
    pub dt_factor: Option<f64>,
    pub effective_cfl: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepTrace {
    pub records: Vec<StepRecord>,
}

impl StepTrace {
    pub const CSV_HEADER: &'static str = "step,t,dt,accepted,w,dt_factor,effective_cfl";

    pub fn accepted(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter(|r| r.accepted)
    }

    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.step,
                r.t,
                r.dt,
                u8::from(r.accepted),
                opt(r.w),
                opt(r.dt_factor),
                opt(r.effective_cfl)
            );
        }
        out
    }

    /// Parses the output of [`StepTrace::to_csv`].
    pub fn from_csv(text: &str) -> Result<StepTrace, String> {
        let mut lines = text.lines();
        if lines.next() != Some(Self::CSV_HEADER) {
            return Err("missing trace header".into());
        }
        let num = |s: &str| -> Result<f64, String> { s.parse().map_err(|_| format!("bad number `{s}`")) };
        let opt = |s: &str| -> Result<Option<f64>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        let mut records = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(format!("expected 7 fields in `{line}`"));
            }
            records.push(StepRecord {
                step: f[0].parse().map_err(|_| format!("bad step `{}`", f[0]))?,
                t: num(f[1])?,
                dt: num(f[2])?,
                accepted: f[3] == "1",
                w: opt(f[4])?,
                dt_factor: opt(f[5])?,
                effective_cfl: opt(f[6])?,
            });
        }
        Ok(StepTrace { records })
    }
}

/// Information handed to callbacks after every accepted step.
pub struct AcceptedStep<'a> {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub u: &'a [f64],
}

pub trait StepCallback {
    fn after_step(&mut self, step: &AcceptedStep<'_>);
}

impl<F: FnMut(&AcceptedStep<'_>)> StepCallback for F {
    fn after_step(&mut self, step: &AcceptedStep<'_>) {
        self(step)
    }
}

pub enum StepControl<'a> {
    Error(ControllerConfig),
    Cfl { nu: f64, limit: &'a dyn MeshLimit },
}

#[derive(Default)]
pub struct IntegrateOptions<'a> {
    /// Skip the initial step size estimate and start with this step.
    pub dt_init: Option<f64>,
    /// Mesh limit used to record effective CFL numbers under error control.
    pub mesh_limit: Option<&'a dyn MeshLimit>,
    /// Treat `max |u| > bound` as a blow-up.
    pub max_abs: Option<f64>,
    /// Abort after this many step attempts.
    pub max_steps: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub t: f64,
    pub u: Vec<f64>,
    pub trace: StepTrace,
    pub stats: StepStatistics,
}

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("blow-up at t = {t} in stage {stage}")]
    BlowUp {
        t: f64,
        stage: usize,
        partial: Box<Solution>,
    },
    #[error("step size {dt:e} underflowed at t = {t}")]
    Stagnation {
        t: f64,
        dt: f64,
        partial: Box<Solution>,
    },
    #[error("step limit reached at t = {t}")]
    StepLimit { t: f64, partial: Box<Solution> },
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Cfl(#[from] CflError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl IntegrateError {
    /// The state reached before the failure, when one exists.
    pub fn partial(&self) -> Option<&Solution> {
        match self {
            IntegrateError::BlowUp { partial, .. }
            | IntegrateError::Stagnation { partial, .. }
            | IntegrateError::StepLimit { partial, .. } => Some(partial),
            _ => None,
        }
    }

    pub fn is_blow_up(&self) -> bool {
        matches!(self, IntegrateError::BlowUp { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub u_next: Vec<f64>,
    /// Embedded solution, when requested.
    pub u_hat: Option<Vec<f64>>,
    /// `f(t, u)`, the first stage derivative.
    pub k_first: Vec<f64>,
    /// `f(t + dt, u_next)` for FSAL pairs.
    pub k_last: Option<Vec<f64>>,
    pub f_evals: u64,
}

/// Where a step failed: the stage index (`s` denotes the FSAL evaluation).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageFailure {
    pub stage: usize,
}

/// One Runge-Kutta step with optional embedded solution.
///
/// For FSAL pairs `fsal_cache` must hold `f(t, u)` when supplied; the step
/// then costs `s` evaluations, otherwise `s + 1`. Non-FSAL pairs cost `s`.
pub fn rk_step<F: Rhs + ?Sized>(
    tab: &ButcherTableau,
    f: &F,
    t: f64,
    u: &[f64],
    dt: f64,
    fsal_cache: Option<&[f64]>,
    embedded: bool,
) -> Result<StepOutput, StageFailure> {
    let s = tab.stages();
    let n = u.len();
    let mut evals = 0u64;
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut y = vec![0.0; n];
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());

    for i in 0..s {
        let mut ki = vec![0.0; n];
        if i == 0 {
            match fsal_cache {
                Some(cache) if tab.fsal => ki.copy_from_slice(cache),
                _ => {
                    f.eval(t, u, &mut ki).map_err(|_| StageFailure { stage: 0 })?;
                    evals += 1;
                }
            }
        } else {
            y.copy_from_slice(u);
            for (j, kj) in k.iter().enumerate() {
                let aij = tab.a[i][j];
                if aij != 0.0 {
                    let h = dt * aij;
                    for (yl, kl) in y.iter_mut().zip(kj) {
                        *yl += h * kl;
                    }
                }
            }
            if !finite(&y) {
                return Err(StageFailure { stage: i });
            }
            f.eval(t + tab.c[i] * dt, &y, &mut ki)
                .map_err(|_| StageFailure { stage: i })?;
            evals += 1;
        }
        if !finite(&ki) {
            return Err(StageFailure { stage: i });
        }
        k.push(ki);
    }

    let combine = |weights: &[f64]| {
        let mut out = u.to_vec();
        for (kj, &w) in k.iter().zip(weights) {
            if w != 0.0 {
                let h = dt * w;
                for (o, kl) in out.iter_mut().zip(kj) {
                    *o += h * kl;
                }
            }
        }
        out
    };
    let u_next = combine(&tab.b);
    if !finite(&u_next) {
        return Err(StageFailure { stage: s });
    }

    let k_last = if tab.fsal {
        let mut kl = vec![0.0; n];
        f.eval(t + dt, &u_next, &mut kl)
            .map_err(|_| StageFailure { stage: s })?;
        evals += 1;
        if !finite(&kl) {
            return Err(StageFailure { stage: s });
        }
        Some(kl)
    } else {
        None
    };

    let u_hat = embedded.then(|| {
        let mut uh = combine(&tab.b_hat[..s]);
        if let Some(kl) = &k_last {
            let h = dt * tab.b_hat[s];
            for (o, x) in uh.iter_mut().zip(kl) {
                *o += h * x;
            }
        }
        uh
    });

    let k_first = k.swap_remove(0);
    Ok(StepOutput {
        u_next,
        u_hat,
        k_first,
        k_last,
        f_evals: evals,
    })
}

/// `dt / mesh_limit`.
pub fn effective_cfl(dt: f64, mesh_limit: f64) -> Result<f64, CflError> {
    if !(mesh_limit > 0.0) {
        return Err(CflError::NonPositiveLimit(mesh_limit));
    }
    Ok(dt / mesh_limit)
}

fn within_ulps(a: f64, b: f64, ulps: f64) -> bool {
    let spacing = f64::EPSILON * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    (a - b).abs() <= ulps * spacing
}

/// Integrates `u' = f(t, u)` from `t_span.0` to `t_span.1`.
pub fn integrate<F: Rhs + ?Sized>(
    tab: &ButcherTableau,
    f: &F,
    u0: &[f64],
    t_span: (f64, f64),
    control: StepControl<'_>,
    callbacks: &mut [&mut dyn StepCallback],
    opts: &IntegrateOptions<'_>,
) -> Result<Solution, IntegrateError> {
    let (t0, t_end) = t_span;
    if !(t_end > t0) {
        return Err(IntegrateError::InvalidInput(format!(
            "empty time span ({t0}, {t_end})"
        )));
    }
    if u0.is_empty() {
        return Err(IntegrateError::InvalidInput("empty state".into()));
    }
    if let Some(dt) = opts.dt_init {
        if !(dt > 0.0) {
            return Err(IntegrateError::InvalidInput(format!("dt_init = {dt}")));
        }
    }
    let duration = t_end - t0;
    let dt_floor = 1e-14 * duration.max(t_end.abs());

    let mut sol = Solution {
        t: t0,
        u: u0.to_vec(),
        trace: StepTrace::default(),
        stats: StepStatistics::default(),
    };
    let mut fsal_cache: Option<Vec<f64>> = None;
    let mut attempts = 0u64;

    let (cfg, mut state, cfl) = match control {
        StepControl::Error(cfg) => {
            cfg.validate()?;
            let dt0 = match opts.dt_init {
                Some(dt) => dt,
                None => {
                    let (dt, evals) = controller::initial_dt(f, u0, t0, tab.order_q, &cfg)?;
                    sol.stats.n_fe += evals;
                    dt
                }
            };
            (Some(cfg), ControllerState::new(dt0), None)
        }
        StepControl::Cfl { nu, limit } => {
            if !(nu > 0.0) {
                return Err(IntegrateError::InvalidInput(format!("CFL number {nu}")));
            }
            let dt0 = match opts.dt_init {
                Some(dt) => dt,
                None => nu * limit.mesh_limit(u0)?,
            };
            (None, ControllerState::new(dt0), Some((nu, limit)))
        }
    };
    let record_limit = cfl.map(|(_, l)| l).or(opts.mesh_limit);

    while sol.t < t_end {
        if let Some(max) = opts.max_steps {
            if attempts >= max {
                let t = sol.t;
                return Err(IntegrateError::StepLimit {
                    t,
                    partial: Box::new(sol),
                });
            }
        }
        attempts += 1;

        let mut dt = state.dt;
        if sol.t + dt > t_end {
            dt = t_end - sol.t;
        }
        if !(dt >= dt_floor) {
            let t = sol.t;
            return Err(IntegrateError::Stagnation {
                t,
                dt,
                partial: Box::new(sol),
            });
        }

        let limit_now = match record_limit {
            Some(l) => Some(l.mesh_limit(&sol.u)?),
            None => None,
        };

        let step = match rk_step(
            tab,
            f,
            sol.t,
            &sol.u,
            dt,
            fsal_cache.as_deref(),
            cfg.is_some(),
        ) {
            Ok(step) => step,
            Err(fail) => {
                let t = sol.t;
                return Err(IntegrateError::BlowUp {
                    t,
                    stage: fail.stage,
                    partial: Box::new(sol),
                });
            }
        };
        sol.stats.n_fe += step.f_evals;

        if let Some(bound) = opts.max_abs {
            if step.u_next.iter().any(|x| x.abs() > bound) {
                let t = sol.t;
                return Err(IntegrateError::BlowUp {
                    t,
                    stage: tab.stages(),
                    partial: Box::new(sol),
                });
            }
        }

        let (accept, w, dt_factor) = match &cfg {
            Some(cfg) => {
                let u_hat = step.u_hat.as_deref().expect("embedded solution requested");
                let u_ref: &[f64] = match cfg.ref_choice {
                    RefChoice::PreviousState => &sol.u,
                    RefChoice::EmbeddedSolution => u_hat,
                };
                let w = controller::error_weight_norm(&step.u_next, u_hat, u_ref, cfg)?;
                state.dt = dt;
                let d = controller::propose(&state, w, cfg);
                state = d.new_state;
                (d.accept, Some(w), Some(d.dt_factor))
            }
            None => (true, None, None),
        };

        let effective = match limit_now {
            Some(l) => Some(effective_cfl(dt, l)?),
            None => None,
        };

        if accept {
            let mut t_new = sol.t + dt;
            if within_ulps(t_new, t_end, 100.0) {
                t_new = t_end;
            }
            sol.t = t_new;
            sol.u = step.u_next;
            fsal_cache = step.k_last;
            sol.stats.n_accepted += 1;
            sol.trace.records.push(StepRecord {
                step: sol.stats.n_accepted + sol.stats.n_rejected - 1,
                t: t_new,
                dt,
                accepted: true,
                w,
                dt_factor,
                effective_cfl: effective,
            });
            let info = AcceptedStep {
                step: sol.stats.n_accepted,
                t: sol.t,
                dt,
                u: &sol.u,
            };
            for cb in callbacks.iter_mut() {
                cb.after_step(&info);
            }
            if let Some((nu, limit)) = cfl {
                if sol.t < t_end {
                    state.dt = nu * limit.mesh_limit(&sol.u)?;
                }
            }
        } else {
            if tab.fsal && fsal_cache.is_none() {
                fsal_cache = Some(step.k_first);
            }
            sol.stats.n_rejected += 1;
            sol.trace.records.push(StepRecord {
                step: sol.stats.n_accepted + sol.stats.n_rejected - 1,
                t: sol.t,
                dt,
                accepted: false,
                w,
                dt_factor,
                effective_cfl: effective,
            });
        }
    }
    Ok(sol)
}

/// Fixed step integration without error estimation (convergence studies).
pub fn integrate_fixed<F: Rhs + ?Sized>(
    tab: &ButcherTableau,
    f: &F,
    u0: &[f64],
    t_span: (f64, f64),
    n_steps: usize,
) -> Result<Vec<f64>, IntegrateError> {
    if n_steps == 0 {
        return Err(IntegrateError::InvalidInput("zero steps".into()));
    }
    let (t0, t_end) = t_span;
    let dt = (t_end - t0) / n_steps as f64;
    let mut u = u0.to_vec();
    let mut cache: Option<Vec<f64>> = None;
    for n in 0..n_steps {
        let t = t0 + n as f64 * dt;
        let step = rk_step(tab, f, t, &u, dt, cache.as_deref(), false).map_err(|fail| {
            IntegrateError::BlowUp {
                t,
                stage: fail.stage,
                partial: Box::new(Solution {
                    t,
                    u: u.clone(),
                    trace: StepTrace::default(),
                    stats: StepStatistics::default(),
                }),
            }
        })?;
        u = step.u_next;
        cache = step.k_last;
    }
    Ok(u)
}
