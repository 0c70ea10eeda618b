//! Evaluation counting identities and trace invariants of the adaptive loop.

use proptest::prelude::*;
use rkctl_core::cfl::FixedLimit;
use rkctl_core::controller::ControllerConfig;
use rkctl_core::dgsem::{Advection1d, Mesh1d};
use rkctl_core::integrator::{integrate, FnRhs, IntegrateOptions, Solution, StepControl, StepStatistics};
use rkctl_core::tableaux::{builtin, ButcherTableau, Method};
use std::f64::consts::PI;

const METHODS: [Method; 2] = [Method::Bs3_3F, Method::Ssp3_4];

#[test]
fn published_table_counts() {
    let rows = [
        (Method::Bs3_3F, 724, 4, 2187),
        (Method::Rdpk3_5F, 368, 4, 1863),
        (Method::Ssp3_4, 384, 3, 1550),
        (Method::Bs3_3F, 2511, 2, 7542),
        (Method::Rdpk4_9F, 722, 4, 6537),
        (Method::Ssp3_4, 1367, 2, 5478),
    ];
    for (m, a, r, fe) in rows {
        assert_eq!(StepStatistics::predicted_fe(m.stages(), m.fsal(), true, a, r), fe, "{m}");
    }
}

fn advection() -> (Advection1d, Vec<f64>) {
    let op = Advection1d::new(3, Mesh1d::new(16, -1.0, 1.0), 1.0);
    let u0 = op
        .mesh
        .node_coordinates(&op.basis)
        .into_iter()
        .map(|x| 1.0 + 0.1 * (PI * x).sin())
        .collect();
    (op, u0)
}

fn error_run(tab: &ButcherTableau, m: Method, tol: f64, dt_init: Option<f64>) -> Solution {
    let (op, u0) = advection();
    let lim = op.cfl_limit();
    let cfg = ControllerConfig::new(m.default_beta(), tab.order_q_hat + 1, tol);
    let opts = IntegrateOptions {
        dt_init,
        mesh_limit: Some(&lim),
        ..Default::default()
    };
    integrate(tab, &op, &u0, (0.0, 2.0), StepControl::Error(cfg), &mut [], &opts).unwrap()
}

fn check_trace(sol: &Solution, t_end: f64) {
    let recs = &sol.trace.records;
    assert_eq!(recs.len() as u64, sol.stats.n_accepted + sol.stats.n_rejected);
    assert_eq!(recs.iter().filter(|r| r.accepted).count() as u64, sol.stats.n_accepted);
    let mut t = 0.0;
    for (i, r) in recs.iter().enumerate() {
        assert_eq!(r.step, i as u64);
        assert!(r.dt > 0.0);
        if r.accepted {
            assert!(r.t > t);
            assert!((r.t - (t + r.dt)).abs() <= 1e-12 * r.t.max(1.0));
            t = r.t;
        } else {
            assert_eq!(r.t, t, "rejected steps keep the time");
        }
    }
    assert_eq!(sol.t, t_end);
    assert_eq!(recs.last().unwrap().t, t_end);
}

#[test]
fn error_control_identity_with_rejections() {
    let mut saw_rejection = false;
    for m in METHODS {
        let tab = builtin(m).unwrap();
        for tol in [1e-3, 1e-4, 1e-5, 1e-6] {
            let sol = error_run(&tab, m, tol, None);
            let s = sol.stats;
            assert_eq!(
                s.n_fe,
                StepStatistics::predicted_fe(tab.stages(), tab.fsal, true, s.n_accepted, s.n_rejected),
                "{m} tol {tol}"
            );
            saw_rejection |= s.n_rejected > 0;
            check_trace(&sol, 2.0);
            assert!(sol.trace.records.iter().all(|r| r.w.is_some() && r.dt_factor.is_some()));
            assert!(sol.trace.records.iter().all(|r| r.effective_cfl.is_some()));
        }
    }
    assert!(saw_rejection, "the sweep should exercise the reject path");
}

#[test]
fn dt_init_skips_the_estimate() {
    for m in METHODS {
        let tab = builtin(m).unwrap();
        let sol = error_run(&tab, m, 1e-5, Some(1e-12));
        assert_eq!(sol.trace.records[0].dt.to_bits(), 1e-12f64.to_bits());
        let s = sol.stats;
        let predicted = StepStatistics::predicted_fe(tab.stages(), tab.fsal, true, s.n_accepted, s.n_rejected);
        assert_eq!(s.n_fe, predicted - 2, "{m}");
    }
}

#[test]
fn cfl_control_identity() {
    let (op, u0) = advection();
    let lim = op.cfl_limit();
    for m in METHODS {
        let tab = builtin(m).unwrap();
        for nu in [0.25, 0.5, 1.0] {
            let sol = integrate(
                &tab,
                &op,
                &u0,
                (0.0, 2.0),
                StepControl::Cfl { nu, limit: &lim },
                &mut [],
                &IntegrateOptions::default(),
            )
            .unwrap();
            let s = sol.stats;
            assert_eq!(s.n_rejected, 0);
            assert_eq!(s.n_fe, StepStatistics::predicted_fe(tab.stages(), tab.fsal, false, s.n_accepted, 0));
            check_trace(&sol, 2.0);
            let cfls: Vec<f64> = sol.trace.records.iter().filter_map(|r| r.effective_cfl).collect();
            // all but the clamped final step run at exactly ν
            assert!(cfls[..cfls.len() - 1].iter().all(|c| (c - nu).abs() < 1e-12));
            assert!(sol.trace.records.iter().all(|r| r.w.is_none()));
        }
    }
}

#[test]
fn callbacks_fire_once_per_accepted_step() {
    let tab = builtin(Method::Bs3_3F).unwrap();
    let f = FnRhs::new(|_t, u: &[f64], du: &mut [f64]| du[0] = -u[0]);
    let mut seen = Vec::new();
    let mut cb = |s: &rkctl_core::integrator::AcceptedStep<'_>| seen.push((s.t, s.u[0]));
    let cfg = ControllerConfig::new(Method::Bs3_3F.default_beta(), 3, 1e-6);
    let sol = integrate(&tab, &f, &[1.0], (0.0, 1.0), StepControl::Error(cfg), &mut [&mut cb], &IntegrateOptions::default()).unwrap();
    assert_eq!(seen.len() as u64, sol.stats.n_accepted);
    assert_eq!(seen.last().unwrap().0, 1.0);
    assert!((seen.last().unwrap().1 - (-1f64).exp()).abs() < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn identities_hold_for_scalar_problems(lambda in 0.1f64..20.0, tol in 1e-8f64..1e-2, t_end in 0.1f64..5.0, ssp in any::<bool>()) {
        let m = if ssp { Method::Ssp3_4 } else { Method::Bs3_3F };
        let tab = builtin(m).unwrap();
        let f = FnRhs::new(move |t: f64, u: &[f64], du: &mut [f64]| du[0] = -lambda * (u[0] - t.cos()));
        let cfg = ControllerConfig::new(m.default_beta(), 3, tol);
        let sol = integrate(&tab, &f, &[2.0], (0.0, t_end), StepControl::Error(cfg), &mut [], &IntegrateOptions::default()).unwrap();
        let s = sol.stats;
        prop_assert_eq!(s.n_fe, StepStatistics::predicted_fe(tab.stages(), tab.fsal, true, s.n_accepted, s.n_rejected));
        prop_assert_eq!(sol.t, t_end);

        let lim = FixedLimit(1.0 / lambda);
        let sol = integrate(&tab, &f, &[2.0], (0.0, t_end), StepControl::Cfl { nu: 0.5, limit: &lim }, &mut [], &IntegrateOptions::default()).unwrap();
        let s = sol.stats;
        prop_assert_eq!(s.n_fe, StepStatistics::predicted_fe(tab.stages(), tab.fsal, false, s.n_accepted, 0));
    }
}
