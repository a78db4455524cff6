//! Kalman time update, measurement update and one-step RTS smoothing on
//! affine surrogates, and the non-iterated EKF/UKF steps built from them.

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_err, Error, Result};
use crate::gaussian::{spd_solve, symmetrize, Gaussian};
use crate::slr::{analytic_linearize, slr_linearize, AffineModel, SigmaConfig};
use crate::ssm::StateSpaceModel;

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub predicted: Gaussian,
    pub posterior: Gaussian,
}

/// How a model leg is turned into an [`AffineModel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Linearization {
    Analytic,
    Sigma(SigmaConfig),
}

impl Linearization {
    pub fn transition(&self, model: &StateSpaceModel, about: &Gaussian) -> Result<AffineModel> {
        let f = |x: &DVector<f64>| model.f(x);
        match self {
            Linearization::Analytic => {
                let jac = model.f_jacobian().ok_or_else(|| {
                    Error::InvalidParameter("analytic linearization needs a transition Jacobian".into())
                })?;
                analytic_linearize(&f, &|x| jac(x), about)
            }
            Linearization::Sigma(cfg) => slr_linearize(&f, about, cfg),
        }
    }

    pub fn measurement(&self, model: &StateSpaceModel, about: &Gaussian) -> Result<AffineModel> {
        let h = |x: &DVector<f64>| model.h(x);
        match self {
            Linearization::Analytic => {
                let jac = model.h_jacobian().ok_or_else(|| {
                    Error::InvalidParameter("analytic linearization needs a measurement Jacobian".into())
                })?;
                analytic_linearize(&h, &|x| jac(x), about)
            }
            Linearization::Sigma(cfg) => slr_linearize(&h, about, cfg),
        }
    }
}

/// Mean `Aμ + b`, covariance `APAᵀ + Q + Ω`.
pub fn kf_predict(prior: &Gaussian, m: &AffineModel, q: &DMatrix<f64>) -> Result<Gaussian> {
    if m.input_dim() != prior.dim() {
        return Err(dim_err("kf_predict input", prior.dim(), m.input_dim()));
    }
    if q.shape() != (m.output_dim(), m.output_dim()) {
        return Err(dim_err(
            "kf_predict process noise",
            format!("{0}x{0}", m.output_dim()),
            format!("{}x{}", q.nrows(), q.ncols()),
        ));
    }
    let a = m.a();
    let mean = a * prior.mean() + m.b();
    let cov = a * prior.cov() * a.transpose() + q + m.omega();
    Gaussian::new(mean, symmetrize(&cov)?)
}

/// Joseph-form measurement update on the surrogate `y = Hx + b + e`.
pub fn kf_update(pred: &Gaussian, m: &AffineModel, r: &DMatrix<f64>, y: &DVector<f64>) -> Result<Gaussian> {
    if m.input_dim() != pred.dim() {
        return Err(dim_err("kf_update input", pred.dim(), m.input_dim()));
    }
    if y.len() != m.output_dim() {
        return Err(dim_err("kf_update measurement", m.output_dim(), y.len()));
    }
    if r.shape() != (y.len(), y.len()) {
        return Err(dim_err(
            "kf_update measurement noise",
            format!("{0}x{0}", y.len()),
            format!("{}x{}", r.nrows(), r.ncols()),
        ));
    }
    let h = m.a();
    let p = pred.cov();
    let noise = r + m.omega();
    let s = symmetrize(&(h * p * h.transpose() + &noise))?;
    let pht = p * h.transpose();
    // K = P Hᵀ S⁻¹  <=>  S Kᵀ = H P
    let gain = spd_solve(&s, &pht.transpose(), "kf_update: singular innovation covariance")?.transpose();
    let innovation = y - h * pred.mean() - m.b();
    let mean = pred.mean() + &gain * innovation;
    let n = pred.dim();
    let ikh = DMatrix::identity(n, n) - &gain * h;
    let cov = &ikh * p * ikh.transpose() + &gain * noise * gain.transpose();
    Gaussian::new(mean, symmetrize(&cov)?)
}

/// One-step RTS correction of `prior_prev` given the posterior at the next step.
///
/// `m` must be the transition surrogate that produced `predicted`.
pub fn rts_smooth_step(
    prior_prev: &Gaussian,
    predicted: &Gaussian,
    posterior: &Gaussian,
    m: &AffineModel,
) -> Result<Gaussian> {
    if m.input_dim() != prior_prev.dim() || m.output_dim() != predicted.dim() {
        return Err(dim_err(
            "rts_smooth_step transition",
            format!("{}x{}", predicted.dim(), prior_prev.dim()),
            format!("{}x{}", m.output_dim(), m.input_dim()),
        ));
    }
    if posterior.dim() != predicted.dim() {
        return Err(dim_err("rts_smooth_step posterior", predicted.dim(), posterior.dim()));
    }
    // G = P_prev Aᵀ P_pred⁻¹  <=>  P_pred Gᵀ = A P_prev
    let a_p = m.a() * prior_prev.cov();
    let gain = spd_solve(predicted.cov(), &a_p, "rts_smooth_step: singular predicted covariance")?.transpose();
    let mean = prior_prev.mean() + &gain * (posterior.mean() - predicted.mean());
    let cov = prior_prev.cov() + &gain * (posterior.cov() - predicted.cov()) * gain.transpose();
    Gaussian::new(mean, symmetrize(&cov)?)
}

fn linearized_step(
    prior: &Gaussian,
    model: &StateSpaceModel,
    y: &DVector<f64>,
    lin: Linearization,
) -> Result<StepResult> {
    let fm = lin.transition(model, prior)?;
    let predicted = kf_predict(prior, &fm, model.q())?;
    let hm = lin.measurement(model, &predicted)?;
    let posterior = kf_update(&predicted, &hm, model.r(), y)?;
    Ok(StepResult { predicted, posterior })
}

pub fn ekf_step(prior: &Gaussian, model: &StateSpaceModel, y: &DVector<f64>) -> Result<StepResult> {
    linearized_step(prior, model, y, Linearization::Analytic)
}

pub fn ukf_step(prior: &Gaussian, model: &StateSpaceModel, y: &DVector<f64>, cfg: &SigmaConfig) -> Result<StepResult> {
    linearized_step(prior, model, y, Linearization::Sigma(*cfg))
}
