use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::dif::Algorithm;
use crate::error::Result;
use crate::ssm::{ct_model, tracking_prior};

use super::config::SweepSpec;
use super::metrics::{divergence_flag, ErrorSums};
use super::report::{AlgorithmResult, ConfigResult, RmseReport};
use super::sim::{hex, run_digest, simulate, Dataset};

/// Iteration controls for the iterated filters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifSettings {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for DifSettings {
    fn default() -> Self {
        Self {
            max_iters: 10,
            tol: 1e-6,
        }
    }
}

struct RunOutcome {
    sums: ErrorSums,
    failed: bool,
    digest: [u8; 32],
}

fn run_algorithm(dataset: &Dataset, algorithm: Algorithm, dif: &DifSettings) -> Result<AlgorithmResult> {
    let model = ct_model(&dataset.params)?;
    let prior = tracking_prior();
    let jobs: Vec<(usize, usize)> = dataset
        .trajectories
        .iter()
        .enumerate()
        .flat_map(|(i, t)| (0..t.measurements.len()).map(move |j| (i, j)))
        .collect();

    let outcomes: Vec<RunOutcome> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let traj = &dataset.trajectories[i];
            let ys = &traj.measurements[j];
            let run = algorithm.run(&prior, &model, ys, dif.max_iters, dif.tol)?;
            let mut sums = ErrorSums::default();
            for (post, truth) in run.posteriors.iter().zip(&traj.states) {
                sums.push(&(post.mean() - truth));
            }
            Ok(RunOutcome {
                sums,
                failed: !run.ok(),
                digest: run_digest(ys),
            })
        })
        .collect::<Result<_>>()?;

    let mut sums = ErrorSums::default();
    let mut digest = Sha256::new();
    let mut failed_runs = 0;
    for o in &outcomes {
        sums.merge(&o.sums);
        digest.update(o.digest);
        failed_runs += usize::from(o.failed);
    }
    let pos_rmse = sums.pos_rmse();
    let vel_rmse = sums.vel_rmse();
    Ok(AlgorithmResult {
        algorithm,
        pos_rmse,
        vel_rmse,
        diverged: divergence_flag(pos_rmse, dataset.params.sigma2) || failed_runs > 0,
        failed_runs,
        run_sums: outcomes.iter().map(|o| o.sums).collect(),
        measurement_digest: hex(&digest.finalize()),
    })
}

pub fn run_config(
    spec: &SweepSpec,
    config_index: usize,
    algorithms: &[Algorithm],
    dif: &DifSettings,
) -> Result<ConfigResult> {
    let params = spec.params(config_index);
    let dataset = simulate(&params, spec, config_index)?;
    let results = algorithms
        .iter()
        .map(|&a| run_algorithm(&dataset, a, dif))
        .collect::<Result<_>>()?;
    Ok(ConfigResult {
        index: config_index,
        q1: params.q1,
        sigma2: params.sigma2,
        results,
    })
}

/// Runs every configuration of `spec` for each algorithm on shared data.
pub fn run_sweep(spec: &SweepSpec, algorithms: &[Algorithm], dif: &DifSettings) -> Result<RmseReport> {
    spec.validate()?;
    let mut algorithms = algorithms.to_vec();
    algorithms.sort();
    algorithms.dedup();
    let configs = (0..spec.n_configs())
        .into_par_iter()
        .map(|i| run_config(spec, i, &algorithms, dif))
        .collect::<Result<Vec<_>>>()?;
    Ok(RmseReport {
        q1_grid: spec.q1_grid.clone(),
        sigma2_grid: spec.sigma2_grid.clone(),
        configs,
    })
}
