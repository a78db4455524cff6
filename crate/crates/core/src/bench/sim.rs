use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::gaussian::chol_psd;
#[cfg(test)]
use crate::gaussian::Gaussian;
use crate::ssm::{ct_model, tracking_prior, CtParams};

use super::config::SweepSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Trajectory = 1,
    Measurement = 2,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-independent seed for one random stream.
pub fn stream_seed(master: u64, config: usize, trajectory: usize, target: usize, stream: Stream) -> u64 {
    [config as u64, trajectory as u64, target as u64, stream as u64]
        .into_iter()
        .fold(splitmix(master), |acc, v| splitmix(acc ^ splitmix(v)))
}

fn rng_for(master: u64, config: usize, trajectory: usize, target: usize, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, config, trajectory, target, stream))
}

fn standard_normal(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Draws `mean + L z` with `L` the lower Cholesky factor of `cov`.
pub fn sample_gaussian(rng: &mut impl Rng, mean: &DVector<f64>, chol: &DMatrix<f64>) -> DVector<f64> {
    mean + chol * standard_normal(rng, mean.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: DVector<f64>,
    /// True states at steps 1..=K.
    pub states: Vec<DVector<f64>>,
    /// One measurement sequence per target, each aligned with `states`.
    pub measurements: Vec<Vec<DVector<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config_index: usize,
    pub params: CtParams,
    pub trajectories: Vec<Trajectory>,
}

impl Dataset {
    /// SHA-256 over every measurement in (trajectory, target, step) order.
    /// SHA-256 over the per-run measurement digests, in (trajectory, target) order.
    pub fn measurement_digest(&self) -> String {
        let mut hasher = Sha256::new();
        for traj in &self.trajectories {
            for ys in &traj.measurements {
                hasher.update(run_digest(ys));
            }
        }
        hex(&hasher.finalize())
    }
}

/// SHA-256 of one measurement sequence (little-endian `f64` bytes).
pub(crate) fn run_digest(ys: &[DVector<f64>]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for y in ys {
        for v in y.iter() {
            hasher.update(v.to_le_bytes());
        }
    }
    hasher.finalize().into()
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn simulate(params: &CtParams, spec: &SweepSpec, config_index: usize) -> Result<Dataset> {
    let model = ct_model(params)?;
    let prior = tracking_prior();
    let prior_chol = chol_psd(prior.cov())?;
    let q_chol = chol_psd(model.q())?;
    let sigma = params.sigma2.sqrt();
    let zero = DVector::zeros(model.state_dim());

    let trajectories = (0..spec.n_trajectories)
        .map(|traj| {
            let mut rng = rng_for(spec.master_seed, config_index, traj, 0, Stream::Trajectory);
            let initial = sample_gaussian(&mut rng, prior.mean(), &prior_chol);
            let mut states = Vec::with_capacity(spec.k);
            let mut x = initial.clone();
            for _ in 0..spec.k {
                x = model.f(&x) + sample_gaussian(&mut rng, &zero, &q_chol);
                states.push(x.clone());
            }
            let measurements = (0..spec.n_targets_per_trajectory)
                .map(|target| {
                    let mut rng = rng_for(spec.master_seed, config_index, traj, target, Stream::Measurement);
                    states
                        .iter()
                        .map(|x| model.h(x) + standard_normal(&mut rng, model.meas_dim()) * sigma)
                        .collect()
                })
                .collect();
            Trajectory {
                initial,
                states,
                measurements,
            }
        })
        .collect();

    Ok(Dataset {
        config_index,
        params: *params,
        trajectories,
    })
}

#[cfg(test)]
/// Draws `n` samples of a Gaussian from one named stream.
pub(crate) fn draw_many(g: &Gaussian, n: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    let chol = chol_psd(g.cov())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| sample_gaussian(&mut rng, g.mean(), &chol)).collect())
}
