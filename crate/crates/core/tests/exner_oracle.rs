use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rkctl_core::exner::{
    characteristic_cubic, characteristic_roots, flux_jacobian_x, max_wave_speed, wave_speeds_x,
    ExnerError, Jacobian42, SweExnerParams, SweExnerState,
};
use rkctl_core::spectra::eigenvalues;

fn random_state(rng: &mut ChaCha8Rng) -> (SweExnerState, SweExnerParams) {
    let h = rng.gen_range(0.1..100.0);
    let speed = rng.gen_range(0.0..10.0);
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let (v1, v2) = (speed * angle.cos(), speed * angle.sin());
    let params = SweExnerParams::new(9.81, rng.gen_range(0.2..0.6), rng.gen_range(0.0..0.01)).unwrap();
    (SweExnerState::new(h, h * v1, h * v2, 0.0).unwrap(), params)
}

fn sorted_eigs(state: &SweExnerState, params: &SweExnerParams) -> (Vec<f64>, f64) {
    let j = flux_jacobian_x(state, params).unwrap();
    let m = DMatrix::from_iterator(4, 4, j.iter().copied());
    let eig = eigenvalues(&m).unwrap();
    let max_im = eig.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let mut re: Vec<f64> = eig.iter().map(|z| z.re).collect();
    re.sort_by(f64::total_cmp);
    (re, max_im)
}

#[test]
fn cubic_roots_match_dense_eigenvalues() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..100_000 {
        let (s, p) = random_state(&mut rng);
        let speeds = match wave_speeds_x(&s, &p) {
            Ok(r) => r,
            Err(ExnerError::HyperbolicityLoss { .. }) => continue,
            Err(e) => panic!("{e}"),
        };
        let (eig, _) = sorted_eigs(&s, &p);
        for (a, b) in speeds.iter().zip(&eig) {
            worst = worst.max((a - b).abs());
        }
        checked += 1;
    }
    eprintln!("checked {checked}, worst {worst:e}");
    assert!(checked > 99_000);
    assert!(worst <= 1e-8, "{worst:e}");
}

#[test]
fn root_residuals_are_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100_000 {
        let (s, p) = random_state(&mut rng);
        let c = characteristic_cubic(&s, &p).unwrap();
        let scale = c.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for r in characteristic_roots(&s, &p).unwrap() {
            let res = ((r + c[0]) * r + c[1]) * r + c[2];
            // residual relative to the size of the terms being cancelled
            let terms = r.abs().powi(3) + c[0].abs() * r * r + c[1].abs() * r.abs() + c[2].abs();
            assert!(res.abs() <= 1e-9 * scale.max(terms), "{res:e} at {s:?}");
        }
    }
}

#[test]
fn decoupled_limit_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let (s, p) = random_state(&mut rng);
        let p = SweExnerParams::new(p.g, p.sigma, 0.0).unwrap();
        let (v1, _) = s.velocity();
        let c = (p.g * s.h).sqrt();
        let mut expected = [v1, v1 - c, v1 + c, 0.0];
        expected.sort_by(f64::total_cmp);
        for (a, b) in wave_speeds_x(&s, &p).unwrap().iter().zip(expected) {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
        assert!((max_wave_speed(&s, &p).unwrap() - (v1.abs() + c)).abs() <= 1e-10);
    }
}

/// Coefficients of det(λI − J), highest power first, by Faddeev-LeVerrier.
fn charpoly(j: &nalgebra::Matrix4<f64>) -> [f64; 5] {
    let mut c = [1.0, 0.0, 0.0, 0.0, 0.0];
    let id = nalgebra::Matrix4::<f64>::identity();
    let mut m = nalgebra::Matrix4::<f64>::zeros();
    for k in 1..=4 {
        m = j * m + id * c[k - 1];
        c[k] = -(j * m).trace() / k as f64;
    }
    c
}

fn expected_charpoly(s: &SweExnerState, p: &SweExnerParams) -> [f64; 5] {
    let [a, b, c] = characteristic_cubic(s, p).unwrap();
    let v1 = s.velocity().0;
    [1.0, a - v1, b - a * v1, c - b * v1, -c * v1]
}

#[test]
fn squared_entry_matches_characteristic_polynomial() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut printed_mismatch = 0;
    for _ in 0..1000 {
        let (s, p) = random_state(&mut rng);
        let want = expected_charpoly(&s, &p);
        let got = charpoly(&flux_jacobian_x(&s, &p).unwrap());
        let scale = want.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for (a, b) in got.iter().zip(want) {
            assert!((a - b).abs() <= 1e-10 * scale);
        }
        let printed = p.with_jacobian_42(Jacobian42::AsPrinted);
        let got = charpoly(&flux_jacobian_x(&s, &printed).unwrap());
        if got.iter().zip(want).any(|(a, b)| (a - b).abs() > 1e-10 * scale) {
            printed_mismatch += 1;
        }
    }
    assert!(printed_mismatch > 900, "{printed_mismatch}");
}

proptest! {
    #[test]
    fn speeds_grow_with_depth_without_sediment(h in 0.1f64..100.0, dh in 0.01f64..10.0, v in -10.0f64..10.0) {
        let p = SweExnerParams::new(9.81, 0.4, 0.0).unwrap();
        let a = SweExnerState::new(h, h * v, 0.0, 0.0).unwrap();
        let b = SweExnerState::new(h + dh, (h + dh) * v, 0.0, 0.0).unwrap();
        prop_assert!(max_wave_speed(&b, &p).unwrap() > max_wave_speed(&a, &p).unwrap());
    }

    #[test]
    fn sediment_limit_is_continuous(h in 0.5f64..50.0, v1 in -5.0f64..5.0, v2 in -5.0f64..5.0) {
        // away from critical flow, where the root branches collide
        prop_assume!((v1 * v1 + v2 * v2).sqrt() < 0.8 * (9.81 * h).sqrt());
        let s = SweExnerState::new(h, h * v1, h * v2, 0.0).unwrap();
        let r0 = characteristic_roots(&s, &SweExnerParams::new(9.81, 0.4, 0.0).unwrap()).unwrap();
        let dist = |a_g: f64| {
            let r = characteristic_roots(&s, &SweExnerParams::new(9.81, 0.4, a_g).unwrap()).unwrap();
            r.iter().zip(&r0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (d3, d4, d5) = (dist(1e-3), dist(1e-4), dist(1e-5));
        // linear convergence: a tenfold smaller constant, a tenfold smaller gap
        prop_assert!(d4 <= 0.15 * d3 + 1e-13, "{d3:e} {d4:e}");
        prop_assert!(d5 <= 0.15 * d4 + 1e-13, "{d4:e} {d5:e}");
    }

    #[test]
    fn y_analysis_is_the_swapped_x_analysis(h in 0.1f64..100.0, v1 in -10.0f64..10.0, v2 in -10.0f64..10.0, a_g in 0.0f64..0.01) {
        let p = SweExnerParams::new(9.81, 0.4, a_g).unwrap();
        let s = SweExnerState::new(h, h * v1, h * v2, 0.0).unwrap();
        let jy = rkctl_core::exner::flux_jacobian_y(&s, &p).unwrap();
        let (ey, _) = {
            let m = DMatrix::from_iterator(4, 4, jy.iter().copied());
            let e = eigenvalues(&m).unwrap();
            let mut re: Vec<f64> = e.iter().map(|z| z.re).collect();
            re.sort_by(f64::total_cmp);
            (re, 0)
        };
        let (ex, _) = sorted_eigs(&s.swapped(), &p);
        for (a, b) in ey.iter().zip(&ex) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }
}
