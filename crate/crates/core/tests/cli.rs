use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dyniter::cli::{cmd_illustrate, density_csv, CUBIC_A, CUBIC_PRIOR, CUBIC_Q, CUBIC_R};
use dyniter::filters::ekf_step;
use dyniter::ssm::cubic_model;
use dyniter::Gaussian;
use nalgebra::DVector;

const REDUCED: &str = "\
# two-by-two reduced sweep
q1_grid = 1e-3, 1e-1
sigma2_grid = 1e-1, 1e1
n_trajectories = 2
n_targets_per_trajectory = 2
K = 20
";

fn dyniter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyniter")).args(args).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn illustrate_writes_every_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let out = dyniter(&["illustrate", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    for i in 0..3 {
        for kind in ["smoothed", "predictive", "posterior"] {
            let path = dir.path().join(format!("iter{i}_{kind}.csv"));
            let text = fs::read_to_string(&path).unwrap();
            assert!(text.starts_with("x,density\n"));
            assert_eq!(text.lines().count(), 2002);
        }
    }
    assert!(!dir.path().join("iter3_posterior.csv").exists());
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(
        summary.lines().next(),
        Some("iteration,posterior_mean,posterior_var,kl_to_truth")
    );
    assert_eq!(summary.lines().count(), 4);
    assert!(dir.path().join("truth_posterior.csv").exists());
}

#[test]
fn illustrate_single_pass_is_the_ekf() {
    let dir = tempfile::tempdir().unwrap();
    let summary = cmd_illustrate(dir.path(), 1, 0).unwrap();
    let model = cubic_model(CUBIC_A, CUBIC_Q, CUBIC_R).unwrap();
    let prior = Gaussian::scalar(CUBIC_PRIOR.0, CUBIC_PRIOR.1).unwrap();
    let ekf = ekf_step(&prior, &model, &DVector::from_element(1, summary.y)).unwrap();

    let pred = fs::read_to_string(dir.path().join("iter0_predictive.csv")).unwrap();
    let post = fs::read_to_string(dir.path().join("iter0_posterior.csv")).unwrap();
    assert_eq!(pred, density_csv(&summary.state_axis, &ekf.predicted).unwrap());
    assert_eq!(post, density_csv(&summary.state_axis, &ekf.posterior).unwrap());
    assert!(!dir.path().join("iter1_posterior.csv").exists());
}

#[test]
fn illustrate_is_deterministic_per_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    for (dir, seed) in [(&a, "4"), (&b, "4"), (&c, "5")] {
        let out = dyniter(&["illustrate", "--seed", seed, "--out", dir.path().to_str().unwrap()]);
        assert!(out.status.success());
    }
    assert_eq!(read_dir_sorted(a.path()), read_dir_sorted(b.path()));
    assert_ne!(read_dir_sorted(a.path()), read_dir_sorted(c.path()));
}

#[test]
fn illustrate_rejects_zero_iterations() {
    let out = dyniter(&["illustrate", "--iters", "0"]);
    assert!(!out.status.success());
    assert_eq!(stderr(&out).trim_end().lines().count(), 1);
}

#[test]
fn unwritable_output_is_a_one_line_error() {
    let file = tempfile::NamedTempFile::new().unwrap();
    let target = file.path().join("sub");
    let out = dyniter(&["illustrate", "--out", target.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with("error: cannot create"));
}

#[test]
fn unknown_flags_are_rejected() {
    let out = dyniter(&["track", "--bogus"]);
    assert!(!out.status.success());
    assert_eq!(stderr(&out).trim_end().lines().count(), 1);
}

#[test]
fn reduced_track_run_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("reduced.cfg");
    fs::write(&cfg, REDUCED).unwrap();
    let run = |seed: &str, name: &str| {
        let out_dir = dir.path().join(name);
        let out = dyniter(&[
            "track",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        (out_dir, String::from_utf8(out.stdout).unwrap())
    };
    let (a, stdout) = run("7", "a");
    let (b, _) = run("7", "b");
    let (c, _) = run("8", "c");
    assert_eq!(read_dir_sorted(&a), read_dir_sorted(&b));
    assert_ne!(
        fs::read(a.join("report.csv")).unwrap(),
        fs::read(c.join("report.csv")).unwrap()
    );
    for alg in ["EKF", "UKF", "DIEKF", "DIUKF", "DIPLF"] {
        assert!(stdout.contains(alg), "{stdout}");
    }

    let report = fs::read_to_string(a.join("report.csv")).unwrap();
    assert_eq!(report.lines().next(), Some(dyniter::bench::HEADER));
    // 2x2 configs, five algorithms
    assert_eq!(report.lines().count(), 1 + 4 * 5);
    for file in ["matrix_DIEKF_EKF_V_vel.csv", "matrix_DIPLF_UKF_pos_rmse_iter.csv"] {
        assert!(a.join(file).exists(), "{file}");
    }

    let out = dyniter(&["report", a.join("report.csv").to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("DIEKF / EKF") || text.contains("DIEKF"), "{text}");
}

#[test]
fn track_algorithm_filter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("reduced.cfg");
    fs::write(&cfg, REDUCED).unwrap();
    let out_dir = dir.path().join("out");
    let out = dyniter(&[
        "track",
        "--config",
        cfg.to_str().unwrap(),
        "--algorithms",
        "ekf,DIEKF",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 4 * 2);
    assert!(!report.contains("UKF"));

    let out = dyniter(&["track", "--config", cfg.to_str().unwrap(), "--algorithms", "EKF,KF"]);
    assert!(!out.status.success());
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "n_trajectories = two\n").unwrap();
    let out = dyniter(&[
        "track",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("n_trajectories"), "{err}");
}

#[test]
fn report_schema_mismatch_shows_expected_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "a,b,c\n1,2,3\n").unwrap();
    let out = dyniter(&["report", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains(dyniter::bench::HEADER), "{err}");
}
