//! Dynamically iterated filters.
//!
//! Each time step runs time update → measurement update → one-step RTS
//! smoothing, then re-linearizes the transition about the smoothed density
//! of `x_{k-1}` and the measurement about the posterior of `x_k` and repeats,
//! always restarting from the original prior and measurement. Only the affine
//! surrogates change between iterations, so iteration 0 is exactly the
//! non-iterated filter.
//!
//! The variants differ in the density used for re-linearization:
//!
//! | variant | transition about | measurement about |
//! |---------|------------------|-------------------|
//! | DIEKF   | Jacobian at smoothed mean | Jacobian at posterior mean |
//! | DIUKF   | N(smoothed mean, prior cov) | N(posterior mean, predicted cov) |
//! | DIPLF   | smoothed density | posterior density |

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::filters::{kf_predict, kf_update, rts_smooth_step, Linearization, StepResult};
use crate::gaussian::Gaussian;
use crate::slr::{AffineModel, SigmaConfig};
use crate::ssm::StateSpaceModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DifVariant {
    Diekf,
    Diukf,
    Diplf,
}

impl DifVariant {
    pub const ALL: [DifVariant; 3] = [DifVariant::Diekf, DifVariant::Diukf, DifVariant::Diplf];

    pub fn name(&self) -> &'static str {
        match self {
            DifVariant::Diekf => "DIEKF",
            DifVariant::Diukf => "DIUKF",
            DifVariant::Diplf => "DIPLF",
        }
    }
}

impl fmt::Display for DifVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifConfig {
    pub variant: DifVariant,
    /// Total number of passes, iteration 0 included.
    pub max_iters: usize,
    pub tol: f64,
    pub sigma: SigmaConfig,
}

impl DifConfig {
    pub fn new(variant: DifVariant, state_dim: usize) -> Self {
        Self {
            variant,
            max_iters: 10,
            tol: 1e-6,
            sigma: SigmaConfig::central_third(state_dim),
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }

    fn linearization(&self) -> Linearization {
        match self.variant {
            DifVariant::Diekf => Linearization::Analytic,
            DifVariant::Diukf | DifVariant::Diplf => Linearization::Sigma(self.sigma),
        }
    }
}

/// Densities and surrogates produced by one pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub smoothed_prev: Gaussian,
    pub predicted: Gaussian,
    pub posterior: Gaussian,
    pub transition: AffineModel,
    pub measurement: AffineModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    /// One entry per pass; `iterates.len() == iterations_used + 1`.
    pub iterates: Vec<Iterate>,
    pub iterations_used: usize,
    pub converged: bool,
    /// Set when a pass after iteration 0 failed numerically; the trace then
    /// ends at the last valid iterate.
    pub failure: Option<Error>,
}

impl IterationTrace {
    pub fn last(&self) -> &Iterate {
        self.iterates.last().expect("trace always holds iteration 0")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifStepOutput {
    pub posterior: Gaussian,
    pub smoothed_prev: Gaussian,
    pub trace: IterationTrace,
}

fn pass(
    prior_prev: &Gaussian,
    model: &StateSpaceModel,
    y: &DVector<f64>,
    lin: Linearization,
    transition_about: &Gaussian,
    measurement_about: impl FnOnce(&Gaussian) -> Result<Gaussian>,
) -> Result<Iterate> {
    let transition = lin.transition(model, transition_about)?;
    let predicted = kf_predict(prior_prev, &transition, model.q())?;
    let about = measurement_about(&predicted)?;
    let measurement = lin.measurement(model, &about)?;
    let posterior = kf_update(&predicted, &measurement, model.r(), y)?;
    let smoothed_prev = rts_smooth_step(prior_prev, &predicted, &posterior, &transition)?;
    Ok(Iterate {
        smoothed_prev,
        predicted,
        posterior,
        transition,
        measurement,
    })
}

fn converged(prev: &DVector<f64>, next: &DVector<f64>, tol: f64) -> bool {
    (next - prev).norm() <= tol * (1.0 + prev.norm())
}

pub fn dif_step(
    prior_prev: &Gaussian,
    model: &StateSpaceModel,
    y: &DVector<f64>,
    cfg: &DifConfig,
) -> Result<DifStepOutput> {
    cfg.validate()?;
    if prior_prev.dim() != model.state_dim() {
        return Err(crate::error::dim_err(
            "dif_step prior",
            model.state_dim(),
            prior_prev.dim(),
        ));
    }
    if y.len() != model.meas_dim() {
        return Err(crate::error::dim_err("dif_step measurement", model.meas_dim(), y.len()));
    }
    let lin = cfg.linearization();

    let first = pass(prior_prev, model, y, lin, prior_prev, |pred| Ok(pred.clone()))?;
    let mut iterates = vec![first];
    let mut is_converged = false;
    let mut failure = None;

    for _ in 1..cfg.max_iters {
        let last = iterates.last().expect("non-empty");
        let next = match cfg.variant {
            DifVariant::Diekf | DifVariant::Diplf => {
                let post = last.posterior.clone();
                pass(prior_prev, model, y, lin, &last.smoothed_prev, move |_| Ok(post))
            }
            DifVariant::Diukf => prior_prev.recentered(last.smoothed_prev.mean()).and_then(|about| {
                let post_mean = last.posterior.mean().clone();
                pass(prior_prev, model, y, lin, &about, move |pred| {
                    pred.recentered(&post_mean)
                })
            }),
        };
        match next {
            Ok(it) => {
                let done = converged(last.posterior.mean(), it.posterior.mean(), cfg.tol);
                iterates.push(it);
                if done {
                    is_converged = true;
                    break;
                }
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }

    let last = iterates.last().expect("non-empty");
    Ok(DifStepOutput {
        posterior: last.posterior.clone(),
        smoothed_prev: last.smoothed_prev.clone(),
        trace: IterationTrace {
            iterations_used: iterates.len() - 1,
            iterates,
            converged: is_converged,
            failure,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepFailure {
    pub step: usize,
    pub error: Error,
}

/// Output of a filter run over a measurement sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterRun {
    /// Filtered posterior for each measurement, in order.
    pub posteriors: Vec<Gaussian>,
    /// Per-step iteration traces (empty for baseline filters).
    pub traces: Vec<IterationTrace>,
    /// Steps whose update failed outright; the belief was carried forward.
    pub failures: Vec<StepFailure>,
}

impl FilterRun {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn dif_filter(
    prior0: &Gaussian,
    model: &StateSpaceModel,
    ys: &[DVector<f64>],
    cfg: &DifConfig,
) -> Result<FilterRun> {
    if ys.is_empty() {
        return Err(Error::InvalidParameter("measurement sequence is empty".into()));
    }
    cfg.validate()?;
    let mut belief = prior0.clone();
    let mut run = FilterRun {
        posteriors: Vec::with_capacity(ys.len()),
        traces: Vec::with_capacity(ys.len()),
        failures: Vec::new(),
    };
    for (k, y) in ys.iter().enumerate() {
        match dif_step(&belief, model, y, cfg) {
            Ok(out) => {
                belief = out.posterior;
                run.traces.push(out.trace);
            }
            Err(error) => run.failures.push(StepFailure { step: k, error }),
        }
        run.posteriors.push(belief.clone());
    }
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Baseline {
    Ekf,
    Ukf,
}

impl Baseline {
    pub fn name(&self) -> &'static str {
        match self {
            Baseline::Ekf => "EKF",
            Baseline::Ukf => "UKF",
        }
    }
}

pub fn baseline_filter(
    prior0: &Gaussian,
    model: &StateSpaceModel,
    ys: &[DVector<f64>],
    which: Baseline,
    cfg: &SigmaConfig,
) -> Result<FilterRun> {
    if ys.is_empty() {
        return Err(Error::InvalidParameter("measurement sequence is empty".into()));
    }
    let mut belief = prior0.clone();
    let mut run = FilterRun {
        posteriors: Vec::with_capacity(ys.len()),
        traces: Vec::new(),
        failures: Vec::new(),
    };
    for (k, y) in ys.iter().enumerate() {
        let step: Result<StepResult> = match which {
            Baseline::Ekf => crate::filters::ekf_step(&belief, model, y),
            Baseline::Ukf => crate::filters::ukf_step(&belief, model, y, cfg),
        };
        match step {
            Ok(out) => belief = out.posterior,
            Err(error) => run.failures.push(StepFailure { step: k, error }),
        }
        run.posteriors.push(belief.clone());
    }
    Ok(run)
}

/// Every filter the benchmark knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Ekf,
    Ukf,
    Diekf,
    Diukf,
    Diplf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Ekf,
        Algorithm::Ukf,
        Algorithm::Diekf,
        Algorithm::Diukf,
        Algorithm::Diplf,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Ekf => "EKF",
            Algorithm::Ukf => "UKF",
            Algorithm::Diekf => "DIEKF",
            Algorithm::Diukf => "DIUKF",
            Algorithm::Diplf => "DIPLF",
        }
    }

    /// Non-iterated counterpart of an iterated filter.
    pub fn baseline(&self) -> Option<Algorithm> {
        match self {
            Algorithm::Diekf => Some(Algorithm::Ekf),
            Algorithm::Diukf | Algorithm::Diplf => Some(Algorithm::Ukf),
            _ => None,
        }
    }

    pub fn run(
        &self,
        prior0: &Gaussian,
        model: &StateSpaceModel,
        ys: &[DVector<f64>],
        max_iters: usize,
        tol: f64,
    ) -> Result<FilterRun> {
        let sigma = SigmaConfig::central_third(model.state_dim());
        let dif = |variant| DifConfig {
            variant,
            max_iters,
            tol,
            sigma,
        };
        match self {
            Algorithm::Ekf => baseline_filter(prior0, model, ys, Baseline::Ekf, &sigma),
            Algorithm::Ukf => baseline_filter(prior0, model, ys, Baseline::Ukf, &sigma),
            Algorithm::Diekf => dif_filter(prior0, model, ys, &dif(DifVariant::Diekf)),
            Algorithm::Diukf => dif_filter(prior0, model, ys, &dif(DifVariant::Diukf)),
            Algorithm::Diplf => dif_filter(prior0, model, ys, &dif(DifVariant::Diplf)),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm `{s}`")))
    }
}
