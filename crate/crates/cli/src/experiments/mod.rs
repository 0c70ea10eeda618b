//! Experiment implementations and shared helpers.

use rkctl_core::controller::{ControllerConfig, ControllerError, RefChoice};
use rkctl_core::integrator::{
    integrate, IntegrateError, IntegrateOptions, Rhs, Solution, StepControl, StepStatistics,
};
use rkctl_core::tableaux::{builtin, ButcherTableau, Method};

use crate::config::Config;
use crate::manifest::Outputs;
use crate::problem::Problem;
use crate::CliError;

pub mod coldstart;
pub mod convergence;
pub mod exner_eigen;
pub mod plateau;
pub mod run;
pub mod spectra;

/// Experiment names accepted on the command line.
pub const EXPERIMENTS: [&str; 8] = [
    "run",
    "plateau",
    "spectra",
    "coldstart",
    "exner-eigen",
    "cfl-bisect",
    "convergence",
    "all",
];

/// What an experiment reports back besides its files.
#[derive(Debug, Default)]
pub struct Outcome {
    /// Lines echoed to stdout (summary lines in `name,tol_or_nu,FE,A,R` form).
    pub summary: Vec<String>,
    /// Set when a run that was required to complete blew up.
    pub blow_up: Option<String>,
}

/// Runs `experiment`, writing outputs through `out`.
pub fn dispatch(experiment: &str, cfg: &Config, out: &mut Outputs) -> Result<Outcome, CliError> {
    match experiment {
        "run" => run::run(cfg, out),
        "cfl-bisect" => run::cfl_bisect(cfg, out).map(|(o, _)| o),
        "plateau" => plateau::run(cfg, out).map(|(o, _)| o),
        "spectra" => spectra::run(cfg, out).map(|(o, _)| o),
        "coldstart" => coldstart::run(cfg, out).map(|(o, _)| o),
        "exner-eigen" => exner_eigen::run(cfg, out),
        "convergence" => convergence::run(cfg, out).map(|(o, _)| o),
        "all" => run_all(cfg, out),
        other => Err(CliError::Config(format!(
            "unknown experiment `{other}`; expected one of {}",
            EXPERIMENTS.join(", ")
        ))),
    }
}

/// Runs the experiments listed in `experiments`, each into its own subdirectory.
fn run_all(cfg: &Config, out: &mut Outputs) -> Result<Outcome, CliError> {
    let list: Vec<String> = cfg.list("", "experiments")?.unwrap_or_default();
    let mut outcome = Outcome::default();
    for name in list.iter().filter(|n| !n.is_empty()) {
        if name == "all" {
            return Err(CliError::Config("`all` cannot list itself".into()));
        }
        out.set_prefix(&format!("{name}/"));
        let sub = dispatch(name, cfg, out);
        out.set_prefix("");
        let sub = sub?;
        outcome.summary.extend(sub.summary);
        if outcome.blow_up.is_none() {
            outcome.blow_up = sub.blow_up.map(|b| format!("{name}: {b}"));
        }
    }
    Ok(outcome)
}

pub fn seed(cfg: &Config) -> Result<u64, CliError> {
    cfg.parse_or("", "seed", crate::DEFAULT_SEED)
}

fn parse_method(name: &str) -> Result<(Method, ButcherTableau), CliError> {
    let method: Method = name
        .parse()
        .map_err(|e: rkctl_core::tableaux::TableauError| CliError::Config(e.to_string()))?;
    let tab = builtin(method).map_err(|e| CliError::Config(e.to_string()))?;
    Ok((method, tab))
}

/// All methods named by `method` (comma-separated, default BS3_3F).
pub fn methods(cfg: &Config) -> Result<Vec<(Method, ButcherTableau)>, CliError> {
    let names: Vec<String> = cfg.list("", "method")?.unwrap_or_else(|| vec!["BS3_3F".into()]);
    if names.is_empty() {
        return Err(CliError::Config("empty method list".into()));
    }
    names.iter().map(|n| parse_method(n)).collect()
}

/// The single method named by `method`.
pub fn single_method(cfg: &Config) -> Result<(Method, ButcherTableau), CliError> {
    let mut all = methods(cfg)?;
    if all.len() != 1 {
        return Err(CliError::Config("this experiment takes exactly one method".into()));
    }
    Ok(all.remove(0))
}

/// Tolerances listed under `controller.tol`.
pub fn tolerances(cfg: &Config) -> Result<Vec<f64>, CliError> {
    let tols: Vec<f64> = cfg
        .list("controller", "tol")?
        .ok_or_else(|| CliError::Config("missing key `controller.tol`".into()))?;
    if tols.is_empty() || tols.iter().any(|t| !(*t > 0.0)) {
        return Err(CliError::Config(format!("controller.tol must be positive, got {tols:?}")));
    }
    Ok(tols)
}

pub fn single_tolerance(cfg: &Config) -> Result<f64, CliError> {
    match tolerances(cfg)?[..] {
        [tol] => Ok(tol),
        _ => Err(CliError::Config("this experiment takes exactly one tolerance".into())),
    }
}

/// Controller configuration from `[controller]`, with method defaults for β.
pub fn controller(cfg: &Config, method: Method, tab: &ButcherTableau, tol: f64) -> Result<ControllerConfig, CliError> {
    const S: &str = "controller";
    let beta = method.default_beta();
    let mut c = ControllerConfig::new(
        [
            cfg.parse_or(S, "beta1", beta[0])?,
            cfg.parse_or(S, "beta2", beta[1])?,
            cfg.parse_or(S, "beta3", beta[2])?,
        ],
        tab.order_q.min(tab.order_q_hat) + 1,
        tol,
    );
    c.accept_safety = cfg.parse_or(S, "accept_safety", c.accept_safety)?;
    c.w_min = cfg.parse_or(S, "w_min", c.w_min)?;
    if let Some(r) = cfg.get(S, "ref_choice") {
        c.ref_choice = r.parse::<RefChoice>().map_err(|e| CliError::Config(e.to_string()))?;
    }
    c.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(c)
}

pub fn dt_init(cfg: &Config) -> Result<Option<f64>, CliError> {
    let dt: Option<f64> = cfg.parse_opt("controller", "dt_init")?;
    match dt {
        Some(d) if !(d > 0.0) => Err(CliError::Config(format!("controller.dt_init = {d} must be positive"))),
        _ => Ok(dt),
    }
}

pub fn max_abs(cfg: &Config) -> Result<Option<f64>, CliError> {
    cfg.parse_opt("cfl", "max_abs")
}

/// Control mode of a single run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Control {
    Error(f64),
    Cfl(f64),
}

impl Control {
    pub fn tol_or_nu(self) -> f64 {
        match self {
            Control::Error(x) | Control::Cfl(x) => x,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Control::Error(_) => "error",
            Control::Cfl(_) => "cfl",
        }
    }
}

/// Result of one integration: the solution or the failure with its partial state.
pub enum RunResult {
    Done(Solution),
    Crashed { reason: String, partial: Option<Solution> },
}

impl RunResult {
    pub fn solution(&self) -> Option<&Solution> {
        match self {
            RunResult::Done(s) => Some(s),
            RunResult::Crashed { partial, .. } => partial.as_ref(),
        }
    }

    pub fn is_done(&self) -> bool {
        matches!(self, RunResult::Done(_))
    }

    pub fn status(&self) -> &'static str {
        if self.is_done() {
            "ok"
        } else {
            "crash"
        }
    }
}

/// Integrates `problem` under `control`, checking the evaluation-count
/// identities on success. Configuration problems are errors; numerical
/// failures become [`RunResult::Crashed`].
pub fn integrate_problem(
    cfg: &Config,
    method: Method,
    tab: &ButcherTableau,
    problem: &Problem,
    u0: &[f64],
    t_span: (f64, f64),
    control: Control,
) -> Result<RunResult, CliError> {
    let dt_init = dt_init(cfg)?;
    let opts = IntegrateOptions {
        dt_init,
        mesh_limit: Some(&*problem.limit),
        max_abs: max_abs(cfg)?,
        max_steps: None,
    };
    let step_control = match control {
        Control::Error(tol) => StepControl::Error(controller(cfg, method, tab, tol)?),
        Control::Cfl(nu) => {
            if !(nu > 0.0) {
                return Err(CliError::Config(format!("CFL number {nu} must be positive")));
            }
            StepControl::Cfl { nu, limit: &*problem.limit }
        }
    };
    let rhs: &dyn Rhs = &*problem.rhs;
    match integrate(tab, rhs, u0, t_span, step_control, &mut [], &opts) {
        Ok(sol) => {
            check_fe_identity(tab, control, dt_init.is_some(), &sol.stats)?;
            Ok(RunResult::Done(sol))
        }
        Err(e) => crash_or_error(e),
    }
}

fn crash_or_error(e: IntegrateError) -> Result<RunResult, CliError> {
    match e {
        IntegrateError::InvalidInput(m) => Err(CliError::Config(m)),
        IntegrateError::Controller(ControllerError::InvalidConfig(m)) => Err(CliError::Config(m)),
        other => {
            let partial = other.partial().cloned();
            Ok(RunResult::Crashed {
                reason: other.to_string(),
                partial,
            })
        }
    }
}

/// Cross-checks the integrator's counters against the counting identities.
pub fn check_fe_identity(
    tab: &ButcherTableau,
    control: Control,
    dt_given: bool,
    stats: &StepStatistics,
) -> Result<(), CliError> {
    let error_control = matches!(control, Control::Error(_));
    let mut expected = StepStatistics::predicted_fe(
        tab.stages(),
        tab.fsal,
        error_control,
        stats.n_accepted,
        stats.n_rejected,
    );
    if error_control && dt_given {
        expected -= 2;
    }
    if expected != stats.n_fe {
        return Err(CliError::Internal(format!(
            "{}: {} evaluations counted, identity predicts {expected}",
            tab.name, stats.n_fe
        )));
    }
    Ok(())
}

/// Median of a non-empty slice.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
