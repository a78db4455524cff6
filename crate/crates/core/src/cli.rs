//! Command-line front end: `illustrate`, `track` and `report`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bench::{parse_report_csv, render_report, run_sweep, DifSettings, RmseReport, SweepSpec};
use crate::dif::{dif_step, Algorithm, DifConfig, DifVariant};
use crate::gaussian::Gaussian;
use crate::oracle::{grid_moments, grid_posterior, kl_grid_vs_gaussian, Grid1D, GridSpec};
use crate::ssm::cubic_model;

#[derive(Debug, Parser)]
#[command(name = "dyniter", version, about = "Dynamically iterated Kalman filters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One step of the scalar cubic example, iteration by iteration, against a grid truth.
    Illustrate {
        /// Number of passes (iteration 0 included).
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
        iters: u64,
        /// Seed for the sampled state and measurement.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out/illustrate")]
        out: PathBuf,
    },
    /// Monte Carlo coordinated-turn sweep.
    Track {
        /// `key = value` sweep file; defaults to the full 25-configuration sweep.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out/track")]
        out: PathBuf,
        /// Comma-separated subset of EKF,UKF,DIEKF,DIUKF,DIPLF.
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<Algorithm>>,
    },
    /// Renders a report CSV as iterated/baseline matrices.
    Report { file: PathBuf },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Illustrate { iters, seed, out } => {
            let summary = cmd_illustrate(&out, iters as usize, seed)?;
            print!("{}", summary.table());
        }
        Command::Track {
            config,
            seed,
            out,
            algorithms,
        } => {
            let report = cmd_track(config.as_deref(), seed, &out, algorithms.as_deref())?;
            print!("{}", report.divergence_summary());
        }
        Command::Report { file } => print!("{}", cmd_report(&file)?),
    }
    Ok(())
}

/// Constants of the scalar example: `x_k = a x³ + q`, `y = x + r`.
pub const CUBIC_A: f64 = 0.01;
pub const CUBIC_Q: f64 = 0.1;
pub const CUBIC_R: f64 = 0.1;
pub const CUBIC_PRIOR: (f64, f64) = (3.0, 4.0);

/// Draws `(x_{k-1}, x_k, y)` from the generative model.
pub fn sample_measurement(seed: u64) -> (f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut n = || -> f64 { StandardNormal.sample(&mut rng) };
    let x_prev = CUBIC_PRIOR.0 + CUBIC_PRIOR.1.sqrt() * n();
    let x = CUBIC_A * x_prev.powi(3) + CUBIC_Q.sqrt() * n();
    let y = x + CUBIC_R.sqrt() * n();
    (x_prev, x, y)
}

#[derive(Debug, Clone)]
pub struct IllustrateSummary {
    pub y: f64,
    pub truth: Gaussian,
    /// `(posterior, KL(truth ‖ posterior))` per iteration.
    pub iterations: Vec<(Gaussian, f64)>,
    pub prev_axis: GridSpec,
    pub state_axis: GridSpec,
    pub files: Vec<PathBuf>,
}

impl IllustrateSummary {
    pub fn kl(&self) -> Vec<f64> {
        self.iterations.iter().map(|(_, kl)| *kl).collect()
    }

    fn table(&self) -> String {
        let mut s = format!(
            "y = {:.6}, truth mean {:.6}, var {:.6}\niter  mean       var        KL\n",
            self.y,
            self.truth.mean()[0],
            self.truth.cov()[(0, 0)]
        );
        for (i, (g, kl)) in self.iterations.iter().enumerate() {
            let _ = writeln!(s, "{i:<5} {:<10.6} {:<10.6} {kl:.3e}", g.mean()[0], g.cov()[(0, 0)]);
        }
        s
    }
}

/// `x,density` samples of a scalar Gaussian on `axis`.
pub fn density_csv(axis: &GridSpec, g: &Gaussian) -> Result<String> {
    Ok(grid_csv(&Grid1D::gaussian(*axis, g)?))
}

fn grid_csv(grid: &Grid1D) -> String {
    let mut s = String::from("x,density\n");
    for (i, v) in grid.values.iter().enumerate() {
        let _ = writeln!(s, "{},{}", grid.spec.x(i), v);
    }
    s
}

fn write(dir: &Path, name: &str, body: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
    files.push(path);
    Ok(())
}

/// Runs exactly `iters` DIEKF passes on one sampled measurement and writes the
/// per-iteration smoothed (on the `x_{k-1}` axis), predictive and posterior
/// densities (on the `x_k` axis), the grid truth and a KL summary.
pub fn cmd_illustrate(out_dir: &Path, iters: usize, seed: u64) -> Result<IllustrateSummary> {
    anyhow::ensure!(iters >= 1, "--iters must be at least 1");
    let model = cubic_model(CUBIC_A, CUBIC_Q, CUBIC_R)?;
    let prior = Gaussian::scalar(CUBIC_PRIOR.0, CUBIC_PRIOR.1)?;
    let (_, _, y) = sample_measurement(seed);
    let ys = DVector::from_element(1, y);

    // no early stopping: every requested pass is shown
    let cfg = DifConfig::new(DifVariant::Diekf, 1)
        .with_max_iters(iters)
        .with_tol(f64::MIN_POSITIVE);
    let out = dif_step(&prior, &model, &ys, &cfg)?;
    if let Some(e) = &out.trace.failure {
        anyhow::bail!("iteration {} failed: {e}", out.trace.iterates.len());
    }

    let prev_axis = GridSpec::default_for(&prior)?;
    let pilot = &out.trace.iterates[0].predicted;
    let likelihood_band = GridSpec::around(&Gaussian::scalar(y, CUBIC_R)?, 10.0, 2001)?;
    let state_axis = GridSpec::default_for(pilot)?.union(&likelihood_band);
    let truth_grid = grid_posterior(&prior, &model, y, &prev_axis, &state_axis)?;
    let truth = grid_moments(&truth_grid)?;

    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let mut files = Vec::new();
    write(out_dir, "truth_posterior.csv", &grid_csv(&truth_grid), &mut files)?;
    write(out_dir, "prior.csv", &density_csv(&prev_axis, &prior)?, &mut files)?;

    let mut summary = String::from("iteration,posterior_mean,posterior_var,kl_to_truth\n");
    let mut iterations = Vec::new();
    for (i, it) in out.trace.iterates.iter().enumerate() {
        write(
            out_dir,
            &format!("iter{i}_smoothed.csv"),
            &density_csv(&prev_axis, &it.smoothed_prev)?,
            &mut files,
        )?;
        write(
            out_dir,
            &format!("iter{i}_predictive.csv"),
            &density_csv(&state_axis, &it.predicted)?,
            &mut files,
        )?;
        write(
            out_dir,
            &format!("iter{i}_posterior.csv"),
            &density_csv(&state_axis, &it.posterior)?,
            &mut files,
        )?;
        let kl = kl_grid_vs_gaussian(&truth_grid, &it.posterior)?;
        let (m, v) = (it.posterior.mean()[0], it.posterior.cov()[(0, 0)]);
        let _ = writeln!(summary, "{i},{m},{v},{kl}");
        iterations.push((it.posterior.clone(), kl));
    }
    write(out_dir, "summary.csv", &summary, &mut files)?;
    write(
        out_dir,
        "truth.csv",
        &format!("y,mean,var\n{y},{},{}\n", truth.mean()[0], truth.cov()[(0, 0)]),
        &mut files,
    )?;

    Ok(IllustrateSummary {
        y,
        truth,
        iterations,
        prev_axis,
        state_axis,
        files,
    })
}

/// Runs the sweep described by `config` (or the default sweep) and writes the
/// report files into `out_dir`.
pub fn cmd_track(
    config: Option<&Path>,
    seed: Option<u64>,
    out_dir: &Path,
    algorithms: Option<&[Algorithm]>,
) -> Result<RmseReport> {
    let mut spec = match config {
        Some(path) => SweepSpec::from_file(path).with_context(|| format!("config {}", path.display()))?,
        None => SweepSpec::default(),
    };
    if let Some(seed) = seed {
        spec.master_seed = seed;
    }
    let algorithms = algorithms.unwrap_or(&Algorithm::ALL);
    let report = run_sweep(&spec, algorithms, &DifSettings::default())?;
    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    report.write_files(out_dir)?;
    Ok(report)
}

pub fn cmd_report(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let rows = parse_report_csv(&text).with_context(|| format!("report {}", path.display()))?;
    Ok(render_report(&rows).1)
}

/// One-line rendering of an error chain.
pub fn one_line(err: &anyhow::Error) -> String {
    format!("{err:#}").split_whitespace().collect::<Vec<_>>().join(" ")
}
