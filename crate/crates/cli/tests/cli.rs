use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rkctl_core::integrator::StepTrace;

fn rkctl(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rkctl"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn rkctl")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read(path: impl AsRef<Path>) -> String {
    fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

#[test]
fn successful_run_writes_trace_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = rkctl(&["run"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let trace = read(dir.path().join("trace.csv"));
    assert!(trace.starts_with("step,t,dt,accepted,w,dt_factor,effective_cfl\n"));
    let summary = read(dir.path().join("summary.txt"));
    let fields: Vec<&str> = summary.trim().split(',').collect();
    assert_eq!(fields.len(), 5);
    assert_eq!(fields[0], "BS3_3F");
    let (fe, a, r): (u64, u64, u64) = (fields[2].parse().unwrap(), fields[3].parse().unwrap(), fields[4].parse().unwrap());
    assert_eq!(fe, 3 * (a + r) + 3);
    let manifest = read(dir.path().join("manifest.txt"));
    assert!(manifest.contains("config_sha256: "));
    assert!(manifest.contains("outputs: 2\n"));
    assert!(manifest.contains("  trace.csv\n"));
}

#[test]
fn cfl_mode_summary_obeys_identity() {
    let dir = tempfile::tempdir().unwrap();
    let o = rkctl(&["run", "--mode", "cfl", "--nu", "0.5", "--method", "SSP3_4"], dir.path());
    assert_eq!(code(&o), 0);
    let summary = read(dir.path().join("summary.txt"));
    let f: Vec<u64> = summary.trim().split(',').skip(2).map(|x| x.parse().unwrap()).collect();
    assert_eq!(f[0], 4 * f[1]);
    assert_eq!(f[2], 0);
}

#[test]
fn blow_up_exits_with_two_and_keeps_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = rkctl(&["run", "--mode", "cfl", "--nu", "3.9"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(dir.path().join("trace.csv").exists());
    assert!(dir.path().join("manifest.txt").exists());
}

#[test]
fn configuration_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad_file = dir.path().join("bad.cfg");
    fs::write(&bad_file, "[problem]\nproblem = advection1d\nelemnts = 4\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["run", "bogus=1"],
        vec!["run", "tol=abc"],
        vec!["run", "--mode", "implicit"],
        vec!["run", "--method", "RK99"],
        vec!["nothing"],
        vec!["run", "--no-such-flag"],
        vec!["run", "--config", "/nonexistent/rkctl.cfg"],
        vec!["run", "--config", bad_file.to_str().unwrap()],
        vec!["run", "--bisect-cfl", "--lo", "0.1", "--hi", "0.2"],
        vec!["spectra", "--problem", "euler1d"],
    ];
    for args in cases {
        let o = rkctl(&args, &dir.path().join("out"));
        assert_eq!(code(&o), 3, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    for args in [vec!["run"], vec!["cfl-bisect"], vec!["plateau"], vec!["coldstart"], vec!["exner-eigen", "--sweep"]] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        assert_eq!(code(&rkctl(&args, a.path())), 0);
        assert_eq!(code(&rkctl(&args, b.path())), 0);
        let manifest = read(a.path().join("manifest.txt"));
        assert_eq!(manifest, read(b.path().join("manifest.txt")), "{args:?}");
        for line in manifest.lines().filter(|l| l.len() > 66 && l.as_bytes()[64] == b' ') {
            let name = &line[66..];
            assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
        }
    }
}

#[test]
fn spectra_produces_the_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = rkctl(
        &["spectra", "--problem", "blended_advection", "--alpha", "0.5", "--method", "BS3_3F", "elements=3"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read(dir.path().join("spectrum.csv")).starts_with("re,im,alpha\n"));
    assert!(read(dir.path().join("region.csv")).starts_with("re,im,"));
    let report = read(dir.path().join("report.txt"));
    assert!(report.contains("sigma_star_dgsem"));
    assert!(report.contains("ratio_dgsem_over_blended"));
}

#[test]
fn empty_experiment_list_gives_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("all.cfg");
    fs::write(&cfg, "experiments =\n").unwrap();
    let o = rkctl(&["all", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read(dir.path().join("out/manifest.txt")).contains("outputs: 0\n"));
}

#[test]
fn dt_init_is_used_bitwise_in_the_first_step() {
    let dir = tempfile::tempdir().unwrap();
    let o = rkctl(&["run", "controller.dt_init=1e-12"], dir.path());
    assert_eq!(code(&o), 0);
    let trace = StepTrace::from_csv(&read(dir.path().join("trace.csv"))).unwrap();
    assert_eq!(trace.records[0].dt.to_bits(), 1e-12f64.to_bits());
    let f: Vec<u64> = read(dir.path().join("summary.txt"))
        .trim()
        .split(',')
        .skip(2)
        .map(|x| x.parse().unwrap())
        .collect();
    // no initial step size estimate is charged
    assert_eq!(f[0], 3 * (f[1] + f[2]) + 1);
}

#[test]
fn trace_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&rkctl(&["coldstart"], dir.path())), 0);
    let text = read(dir.path().join("trace.csv"));
    let trace = StepTrace::from_csv(&text).unwrap();
    assert!(trace.records.iter().any(|r| !r.accepted));
    assert_eq!(trace.to_csv(), text);
}

#[test]
fn bisect_flag_switches_to_cfl_bisection() {
    let dir = tempfile::tempdir().unwrap();
    let o = rkctl(&["run", "--bisect-cfl", "--lo", "0.2", "--hi", "3"], dir.path());
    assert_eq!(code(&o), 0);
    let probes = read(dir.path().join("bisect.csv"));
    assert!(probes.starts_with("probe,nu,survived\n"));
    assert!(probes.lines().count() > 5);
}

#[test]
fn exner_single_state() {
    let dir = tempfile::tempdir().unwrap();
    let o = rkctl(
        &["exner-eigen", "--h", "10", "--hv1", "10", "--hv2", "0", "--g", "9.8", "--sigma", "0.4", "--ag", "0.001"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let csv = read(dir.path().join("exner.csv"));
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let fr: f64 = row[11].parse().unwrap();
    assert!((fr - 0.1010).abs() < 1e-3);
    let speed: f64 = row[10].parse().unwrap();
    assert!(speed > (9.8f64 * 10.0).sqrt() - 1.0);
}

#[test]
fn all_runs_listed_experiments_into_subdirectories() {
    let dir = tempfile::tempdir().unwrap();
    let o = rkctl(&["all"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("convergence/convergence.csv").exists());
    assert!(dir.path().join("exner-eigen/exner.csv").exists());
}
