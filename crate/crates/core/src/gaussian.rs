//! Gaussian beliefs and the covariance primitives shared by every filter.
//!
//! Every [`Gaussian`] is validated on construction: the covariance must be
//! square, match the mean, be symmetric to 1e-12 (relative to its largest
//! entry) and have no eigenvalue below `-1e-10 * trace`. The stored covariance
//! is always exactly symmetric.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{dim_err, Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const JITTER_BASE: f64 = 1e-12;
const JITTER_GROWTH: f64 = 100.0;
const JITTER_RETRIES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl Gaussian {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if !cov.is_square() {
            return Err(dim_err(
                "Gaussian covariance",
                "square matrix",
                format!("{}x{}", cov.nrows(), cov.ncols()),
            ));
        }
        if cov.nrows() != mean.len() {
            return Err(dim_err("Gaussian covariance", mean.len(), cov.nrows()));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidCovariance("non-finite mean or covariance entry".into()));
        }
        let scale = cov.amax().max(f64::MIN_POSITIVE);
        let asym = (&cov - cov.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::InvalidCovariance(format!(
                "asymmetry {asym:e} exceeds tolerance (scale {scale:e})"
            )));
        }
        let cov = symmetrize(&cov)?;
        check_psd(&cov)?;
        Ok(Self { mean, cov })
    }

    pub fn scalar(mean: f64, var: f64) -> Result<Self> {
        Self::new(DVector::from_element(1, mean), DMatrix::from_element(1, 1, var))
    }

    pub fn standard(dim: usize) -> Self {
        Self {
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim),
        }
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Same covariance, new mean.
    pub fn recentered(&self, mean: &DVector<f64>) -> Result<Self> {
        if mean.len() != self.dim() {
            return Err(dim_err("Gaussian::recentered", self.dim(), mean.len()));
        }
        Ok(Self {
            mean: mean.clone(),
            cov: self.cov.clone(),
        })
    }

    /// Log density at `x`. Requires a nonsingular covariance.
    pub fn log_pdf(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(dim_err("Gaussian::log_pdf", self.dim(), x.len()));
        }
        let chol = Cholesky::new(self.cov.clone()).ok_or(Error::Numerical {
            context: "Gaussian::log_pdf",
            eigenvalue: None,
        })?;
        let diff = x - &self.mean;
        let z = chol.l().solve_lower_triangular(&diff).ok_or(Error::Numerical {
            context: "Gaussian::log_pdf",
            eigenvalue: None,
        })?;
        let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let d = self.dim() as f64;
        Ok(-0.5 * (z.norm_squared() + log_det + d * (2.0 * std::f64::consts::PI).ln()))
    }
}

fn check_psd(cov: &DMatrix<f64>) -> Result<()> {
    let n = cov.nrows();
    if n == 0 {
        return Ok(());
    }
    let trace = cov.trace();
    if trace < 0.0 {
        return Err(Error::InvalidCovariance(format!("negative trace {trace:e}")));
    }
    if trace == 0.0 {
        return if cov.iter().all(|v| *v == 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidCovariance("zero trace with nonzero entries".into()))
        };
    }
    // eigenvalues >= -tol*trace  <=>  cov + tol*trace*I is positive definite
    let shifted = cov + DMatrix::identity(n, n) * (PSD_TOL * trace * (1.0 + 1e-6));
    if Cholesky::new(shifted).is_some() {
        return Ok(());
    }
    let min_eig = min_eigenvalue(cov);
    Err(Error::InvalidCovariance(format!(
        "not positive semidefinite: min eigenvalue {min_eig:e}, trace {trace:e}"
    )))
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(dim_err(
            "symmetrize",
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    let n = m.nrows();
    let mut out = m.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Lower Cholesky factor of a (numerically) positive semidefinite matrix.
///
/// Starts from the plain factorization and on failure adds
/// `1e-12 * trace/d * I`, growing the jitter by 100x for up to three retries.
/// A zero matrix factors to zero.
pub fn chol_psd(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = symmetrize(p)?;
    let n = p.nrows();
    if p.iter().all(|v| *v == 0.0) {
        return Ok(DMatrix::zeros(n, n));
    }
    if let Some(c) = Cholesky::new(p.clone()) {
        return Ok(c.unpack());
    }
    let trace = p.trace();
    if trace.is_finite() && trace > 0.0 {
        let mut jitter = JITTER_BASE * trace / n as f64;
        for _ in 0..JITTER_RETRIES {
            let shifted = &p + DMatrix::identity(n, n) * jitter;
            if let Some(c) = Cholesky::new(shifted) {
                return Ok(c.unpack());
            }
            jitter *= JITTER_GROWTH;
        }
    }
    Err(Error::Numerical {
        context: "chol_psd",
        eigenvalue: Some(min_eigenvalue(&p)),
    })
}

/// Solves `S X = B` for symmetric positive definite `S` by Cholesky.
pub(crate) fn spd_solve(s: &DMatrix<f64>, b: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    if s.nrows() != b.nrows() {
        return Err(dim_err(context, s.nrows(), b.nrows()));
    }
    let chol: Cholesky<f64, Dyn> = Cholesky::new(s.clone()).ok_or(Error::Numerical {
        context,
        eigenvalue: None,
    })?;
    let x = chol.solve(b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            context,
            eigenvalue: None,
        });
    }
    Ok(x)
}

/// Closed-form `KL(p || q)` between two Gaussians.
///
/// A singular `p` against a nonsingular `q` has infinite divergence.
pub fn kl_gaussian(p: &Gaussian, q: &Gaussian) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(dim_err("kl_gaussian", q.dim(), p.dim()));
    }
    let d = p.dim();
    let chol_q = Cholesky::new(q.cov.clone()).ok_or(Error::Numerical {
        context: "kl_gaussian: singular q covariance",
        eigenvalue: Some(min_eigenvalue(&q.cov)),
    })?;
    let log_det_q: f64 = chol_q.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    let log_det_p = match Cholesky::new(p.cov.clone()) {
        Some(c) => c.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum::<f64>(),
        None => return Ok(f64::INFINITY),
    };
    let trace_term = chol_q.solve(&p.cov).trace();
    let diff = &q.mean - &p.mean;
    let maha = diff.dot(&chol_q.solve(&diff));
    let kl = 0.5 * (trace_term + maha - d as f64 + log_det_q - log_det_p);
    Ok(kl.max(0.0))
}
