//! Builds semidiscretizations from the `[problem]` section.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use rkctl_core::cfl::MeshLimit;
use rkctl_core::dgsem::euler::conserved;
use rkctl_core::dgsem::{
    Advection1d, Advection2d, CurvedMesh2D, Domain2d, Euler1d, EulerBoundary, Mapping2d, Mesh1d,
};
use rkctl_core::integrator::Rhs;

use crate::config::Config;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Advection1d,
    Advection2d,
    Advection2dCurved,
    BlendedAdvection,
    Euler1d,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Advection1d => "advection1d",
            ProblemKind::Advection2d => "advection2d",
            ProblemKind::Advection2dCurved => "advection2d_curved",
            ProblemKind::BlendedAdvection => "blended_advection",
            ProblemKind::Euler1d => "euler1d",
        }
    }

    pub fn is_linear(self) -> bool {
        self != ProblemKind::Euler1d
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "advection1d" => ProblemKind::Advection1d,
            "advection2d" => ProblemKind::Advection2d,
            "advection2d_curved" => ProblemKind::Advection2dCurved,
            "blended_advection" => ProblemKind::BlendedAdvection,
            "euler1d" => ProblemKind::Euler1d,
            other => return Err(format!("unknown problem `{other}`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Initial {
    /// `1 + A·sin` per periodic direction.
    Sine,
    /// `1 + A·exp(−r²/2w²)` centred in the domain.
    Gauss,
    /// Constant state.
    Uniform,
    /// Euler: ρ = p = 1, v = jump·tanh(x/width).
    Tanh,
    /// Euler: ρ = 1 + A·sin, v = velocity, p = 1.
    DensityWave,
}

impl FromStr for Initial {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "sine" => Initial::Sine,
            "gauss" => Initial::Gauss,
            "uniform" => Initial::Uniform,
            "tanh" => Initial::Tanh,
            "density_wave" => Initial::DensityWave,
            other => return Err(format!("unknown initial condition `{other}`")),
        })
    }
}

/// A ready-to-integrate problem.
pub struct Problem {
    pub kind: ProblemKind,
    pub rhs: Box<dyn Rhs>,
    pub limit: Box<dyn MeshLimit>,
    pub u0: Vec<f64>,
    pub t_end: f64,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("kind", &self.kind)
            .field("n_dofs", &self.u0.len())
            .field("t_end", &self.t_end)
            .finish()
    }
}

const S: &str = "problem";

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn kind(cfg: &Config) -> Result<ProblemKind, CliError> {
    cfg.require(S, "problem")
}

/// Builds the configured problem. `alpha_override` replaces `problem.alpha`.
pub fn build(cfg: &Config, alpha_override: Option<f64>) -> Result<Problem, CliError> {
    let kind = kind(cfg)?;
    let elements: usize = cfg.parse_or(S, "elements", 8)?;
    let degree: usize = cfg.parse_or(S, "degree", 3)?;
    if elements == 0 || !(1..=16).contains(&degree) {
        return Err(bad(format!("need elements >= 1 and 1 <= degree <= 16, got {elements}, {degree}")));
    }
    let default_alpha = if kind == ProblemKind::BlendedAdvection { 0.5 } else { 0.0 };
    let alpha = match alpha_override {
        Some(a) => a,
        None => cfg.parse_or(S, "alpha", default_alpha)?,
    };
    if !(0.0..=1.0).contains(&alpha) {
        return Err(bad(format!("problem.alpha = {alpha} outside [0, 1]")));
    }
    let domain = cfg.list::<f64>(S, "domain")?.unwrap_or_else(|| vec![-1.0, 1.0]);
    let [lo, hi] = domain[..] else {
        return Err(bad("problem.domain must be `lo, hi`"));
    };
    if !(hi > lo) {
        return Err(bad(format!("empty domain [{lo}, {hi}]")));
    }
    let t_end: f64 = cfg.parse_or(S, "t_end", 1.0)?;
    if !(t_end > 0.0) {
        return Err(bad(format!("problem.t_end = {t_end} must be positive")));
    }
    let amplitude: f64 = cfg.parse_or(S, "amplitude", 0.1)?;
    let width: f64 = cfg.parse_or(S, "width", 0.2)?;
    if !(width > 0.0) {
        return Err(bad("problem.width must be positive"));
    }
    let default_initial = if kind == ProblemKind::Euler1d { "density_wave" } else { "sine" };
    let initial: Initial = cfg
        .get(S, "initial")
        .unwrap_or(default_initial)
        .parse()
        .map_err(bad)?;
    let len = hi - lo;
    let centre = 0.5 * (lo + hi);
    let phase = |x: f64| 2.0 * PI * (x - lo) / len;

    let problem = match kind {
        ProblemKind::Advection1d => {
            let velocity: f64 = cfg.parse_or(S, "velocity", 1.0)?;
            let op = Advection1d::blended(degree, Mesh1d::new(elements, lo, hi), velocity, alpha);
            let u0 = op
                .mesh
                .node_coordinates(&op.basis)
                .into_iter()
                .map(|x| match initial {
                    Initial::Sine => Ok(1.0 + amplitude * phase(x).sin()),
                    Initial::Gauss => Ok(1.0 + amplitude * (-(x - centre).powi(2) / (2.0 * width * width)).exp()),
                    Initial::Uniform => Ok(1.0),
                    other => Err(bad(format!("initial condition {other:?} needs euler1d"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            let limit = Box::new(op.cfl_limit());
            Problem { kind, rhs: Box::new(op), limit, u0, t_end }
        }
        ProblemKind::Advection2d | ProblemKind::Advection2dCurved | ProblemKind::BlendedAdvection => {
            let velocity = match cfg.list::<f64>(S, "velocity")? {
                None => [FRAC_1_SQRT_2; 2],
                Some(v) if v.len() == 2 => [v[0], v[1]],
                Some(_) => return Err(bad("2D problem.velocity must be `vx, vy`")),
            };
            let default_warp = if kind == ProblemKind::Advection2dCurved { 1.0 } else { 0.0 };
            let warp: f64 = cfg.parse_or(S, "warp", default_warp)?;
            let mapping = if warp == 0.0 { Mapping2d::Identity } else { Mapping2d::Warp { amplitude: warp } };
            let basis = rkctl_core::dgsem::ReferenceElement::new(degree);
            let mesh = CurvedMesh2D::new(elements, elements, Domain2d::square(lo, hi), mapping, &basis)
                .map_err(|e| bad(format!("mesh: {e}")))?;
            let u0 = mesh
                .x
                .iter()
                .zip(&mesh.y)
                .map(|(&x, &y)| match initial {
                    Initial::Sine => Ok(1.0 + amplitude * phase(x).sin() * phase(y).sin()),
                    Initial::Gauss => {
                        let r2 = (x - centre).powi(2) + (y - centre).powi(2);
                        Ok(1.0 + amplitude * (-r2 / (2.0 * width * width)).exp())
                    }
                    Initial::Uniform => Ok(1.0),
                    other => Err(bad(format!("initial condition {other:?} needs euler1d"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            let op = Advection2d::blended(degree, mesh, velocity, alpha);
            let limit = Box::new(op.cfl_limit());
            Problem { kind, rhs: Box::new(op), limit, u0, t_end }
        }
        ProblemKind::Euler1d => {
            let gamma: f64 = cfg.parse_or(S, "gamma", 1.4)?;
            if !(gamma > 1.0) {
                return Err(bad(format!("problem.gamma = {gamma} must exceed 1")));
            }
            let velocity: f64 = cfg.parse_or(S, "velocity", 1.0)?;
            let jump: f64 = cfg.parse_or(S, "jump", 5.0)?;
            let init = move |x: f64| -> (f64, f64, f64) {
                match initial {
                    Initial::Tanh => (1.0, jump * ((x - centre) / width).tanh(), 1.0),
                    Initial::DensityWave => (1.0 + amplitude * phase(x).sin(), velocity, 1.0),
                    _ => (1.0, velocity, 1.0),
                }
            };
            if matches!(initial, Initial::Sine | Initial::Gauss) {
                return Err(bad("euler1d supports initial = uniform, tanh or density_wave"));
            }
            if initial == Initial::DensityWave && amplitude.abs() >= 1.0 {
                return Err(bad("density wave amplitude must stay below 1"));
            }
            let default_boundary = if initial == Initial::Tanh { "dirichlet" } else { "periodic" };
            let boundary = match cfg.get(S, "boundary").unwrap_or(default_boundary) {
                "periodic" => EulerBoundary::Periodic,
                "dirichlet" => {
                    let (l, r) = (init(lo), init(hi));
                    EulerBoundary::Dirichlet {
                        left: conserved(gamma, l.0, l.1, l.2),
                        right: conserved(gamma, r.0, r.1, r.2),
                    }
                }
                other => return Err(bad(format!("unknown boundary `{other}`"))),
            };
            let op = Euler1d::new(degree, Mesh1d::new(elements, lo, hi), gamma, boundary).with_alpha(alpha);
            let u0 = op.project(init);
            let limit = Box::new(op.cfl_limit());
            Problem { kind, rhs: Box::new(op), limit, u0, t_end }
        }
    };
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Config {
        Config::parse(text).unwrap()
    }

    #[test]
    fn builds_every_kind() {
        for (kind, dofs) in [
            ("advection1d", 4 * 4),
            ("advection2d", 16 * 16),
            ("advection2d_curved", 16 * 16),
            ("blended_advection", 16 * 16),
            ("euler1d", 3 * 4 * 4),
        ] {
            let p = build(&cfg(&format!("[problem]\nproblem = {kind}\nelements = 4\n")), None).unwrap();
            assert_eq!(p.u0.len(), dofs, "{kind}");
            let mut du = vec![0.0; dofs];
            p.rhs.eval(0.0, &p.u0, &mut du).unwrap();
            assert!(p.limit.mesh_limit(&p.u0).unwrap() > 0.0);
        }
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "[problem]\nproblem = advection3d\n",
            "[problem]\nproblem = advection1d\nalpha = 1.5\n",
            "[problem]\nproblem = advection2d\nvelocity = 1\n",
            "[problem]\nproblem = advection1d\ndomain = 1, -1\n",
            "[problem]\nproblem = euler1d\ngamma = 1\n",
            "[problem]\nproblem = euler1d\ninitial = gauss\n",
            "[problem]\nproblem = advection1d\ndegree = 0\n",
        ] {
            assert!(matches!(build(&cfg(text), None), Err(CliError::Config(_))), "{text}");
        }
        assert!(matches!(build(&Config::default(), None), Err(CliError::Config(_))));
    }

    #[test]
    fn tanh_start_uses_far_field_states() {
        let p = build(
            &cfg("[problem]\nproblem = euler1d\ninitial = tanh\njump = 2\nwidth = 0.05\nalpha = 0.5\n"),
            None,
        )
        .unwrap();
        let n = p.u0.len();
        assert!((p.u0[1] + 2.0).abs() < 1e-12);
        assert!((p.u0[n - 2] - 2.0).abs() < 1e-12);
    }
}
