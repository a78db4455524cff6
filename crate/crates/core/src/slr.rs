//! Affine surrogates `g(x) ≈ A x + b + e, e ~ N(0, Ω)` of nonlinear maps.
//!
//! Two backends produce them: analytic linearization (Jacobian at the
//! expansion mean, `Ω = 0`) and statistical linear regression over the
//! sigma points of a scaled unscented transform.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{dim_err, Error, Result};
use crate::gaussian::{chol_psd, spd_solve, symmetrize, Gaussian};

/// Borrowed vector-valued map.
pub type VecFn<'a> = &'a dyn Fn(&DVector<f64>) -> DVector<f64>;
/// Borrowed Jacobian of a [`VecFn`].
pub type JacFn<'a> = &'a dyn Fn(&DVector<f64>) -> DMatrix<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct AffineModel {
    a: DMatrix<f64>,
    b: DVector<f64>,
    omega: DMatrix<f64>,
}

impl AffineModel {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, omega: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(dim_err("AffineModel offset", a.nrows(), b.len()));
        }
        if omega.nrows() != b.len() || omega.ncols() != b.len() {
            return Err(dim_err(
                "AffineModel error covariance",
                format!("{0}x{0}", b.len()),
                format!("{}x{}", omega.nrows(), omega.ncols()),
            ));
        }
        // validates symmetry and PSD
        let omega = Gaussian::new(b.clone(), omega)?.cov().clone();
        Ok(Self { a, b, omega })
    }

    /// Exact affine map with no linearization error.
    pub fn exact(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let m = b.len();
        Self::new(a, b, DMatrix::zeros(m, m))
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn input_dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.a.nrows()
    }
}

/// Scaled unscented transform parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaConfig {
    pub alpha: f64,
    pub kappa: f64,
    pub beta: f64,
}

impl SigmaConfig {
    /// `α = √(3/n)`, `κ = n(3/2 − α²)/α²`, `β = 2`: puts mean weight 1/3 on
    /// the central point for every `n`.
    pub fn central_third(n: usize) -> Self {
        let n = n as f64;
        let alpha = (3.0 / n).sqrt();
        let a2 = alpha * alpha;
        Self {
            alpha,
            kappa: n * (1.5 - a2) / a2,
            beta: 2.0,
        }
    }

    /// `λ = α²(n + κ) − n`.
    pub fn lambda(&self, n: usize) -> f64 {
        self.alpha * self.alpha * (n as f64 + self.kappa) - n as f64
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        let spread = self.alpha * self.alpha * (n as f64 + self.kappa);
        if !(spread > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha^2 (n + kappa) must be > 0 for n = {n}, got {spread}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPoints {
    pub points: Vec<DVector<f64>>,
    pub w_mean: Vec<f64>,
    pub w_cov: Vec<f64>,
}

pub fn sigma_points(q: &Gaussian, cfg: &SigmaConfig) -> Result<SigmaPoints> {
    let n = q.dim();
    cfg.validate(n)?;
    let lambda = cfg.lambda(n);
    let spread = n as f64 + lambda;
    let l = chol_psd(q.cov())? * spread.sqrt();

    let mut points = Vec::with_capacity(2 * n + 1);
    points.push(q.mean().clone());
    for i in 0..n {
        points.push(q.mean() + l.column(i));
    }
    for i in 0..n {
        points.push(q.mean() - l.column(i));
    }

    let w0 = lambda / spread;
    let wi = 1.0 / (2.0 * spread);
    let mut w_mean = vec![wi; 2 * n + 1];
    w_mean[0] = w0;
    let mut w_cov = w_mean.clone();
    w_cov[0] = w0 + 1.0 - cfg.alpha * cfg.alpha + cfg.beta;
    Ok(SigmaPoints { points, w_mean, w_cov })
}

/// `A = J(μ)`, `b = f(μ) − Aμ`, `Ω = 0`.
pub fn analytic_linearize(f: VecFn, jacobian: JacFn, q: &Gaussian) -> Result<AffineModel> {
    let mu = q.mean();
    let fx = f(mu);
    let jac = jacobian(mu);
    if jac.nrows() != fx.len() || jac.ncols() != mu.len() {
        return Err(dim_err(
            "analytic_linearize jacobian",
            format!("{}x{}", fx.len(), mu.len()),
            format!("{}x{}", jac.nrows(), jac.ncols()),
        ));
    }
    let b = &fx - &jac * mu;
    AffineModel::exact(jac, b)
}

/// Statistical linear regression of `f` with respect to `q`.
pub fn slr_linearize(f: VecFn, q: &Gaussian, cfg: &SigmaConfig) -> Result<AffineModel> {
    let sp = sigma_points(q, cfg)?;
    let images: Vec<DVector<f64>> = sp.points.iter().map(f).collect();
    let m = images[0].len();
    if let Some(bad) = images.iter().find(|y| y.len() != m) {
        return Err(dim_err("slr_linearize output", m, bad.len()));
    }
    let n = q.dim();
    let mu = q.mean();

    let mut z_bar = DVector::zeros(m);
    for (w, y) in sp.w_mean.iter().zip(&images) {
        z_bar.axpy(*w, y, 1.0);
    }
    let mut cross = DMatrix::zeros(n, m);
    let mut s = DMatrix::zeros(m, m);
    for ((w, x), y) in sp.w_cov.iter().zip(&sp.points).zip(&images) {
        let dx = x - mu;
        let dy = y - &z_bar;
        cross += (&dx * dy.transpose()) * *w;
        s += (&dy * dy.transpose()) * *w;
    }
    if z_bar.iter().chain(s.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            context: "slr_linearize: non-finite moments",
            eigenvalue: None,
        });
    }

    // A = Cᵀ P⁻¹ = (P⁻¹ C)ᵀ
    let a = spd_solve(q.cov(), &cross, "slr_linearize: singular expansion covariance")?.transpose();
    let b = &z_bar - &a * mu;
    let omega = clip_psd(&(&s - &a * q.cov() * a.transpose()))?;
    AffineModel::new(a, b, omega)
}

/// Symmetrizes and floors the eigenvalues at zero.
fn clip_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = symmetrize(m)?;
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|v| *v >= 0.0) {
        return Ok(sym);
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&clipped) * v.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cubic(x: &DVector<f64>) -> DVector<f64> {
        x.map(|v| 0.01 * v.powi(3))
    }

    fn cubic_jac(x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, 0.03 * x[0] * x[0])
    }

    #[test]
    fn analytic_cubic() {
        let q = Gaussian::scalar(3.0, 4.0).unwrap();
        let m = analytic_linearize(&cubic, &cubic_jac, &q).unwrap();
        assert_abs_diff_eq!(m.a()[(0, 0)], 0.27, epsilon = 1e-15);
        assert_abs_diff_eq!(m.b()[0], -0.54, epsilon = 1e-15);
        assert_eq!(m.omega()[(0, 0)], 0.0);
    }

    #[test]
    fn analytic_affine_and_identity() {
        let mm = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 3.0]);
        let c = DVector::from_vec(vec![0.3, -1.0]);
        let f = |x: &DVector<f64>| &mm * x + &c;
        let j = |_: &DVector<f64>| mm.clone();
        let q = Gaussian::new(DVector::from_vec(vec![5.0, -2.0]), DMatrix::identity(2, 2) * 3.0).unwrap();
        let m = analytic_linearize(&f, &j, &q).unwrap();
        assert!((m.a() - &mm).amax() < 1e-14);
        assert!((m.b() - &c).amax() < 1e-14);

        let id = |x: &DVector<f64>| x.clone();
        let id_j = |x: &DVector<f64>| DMatrix::identity(x.len(), x.len());
        let m = analytic_linearize(&id, &id_j, &Gaussian::standard(3)).unwrap();
        assert_eq!(m.a(), &DMatrix::identity(3, 3));
        assert_eq!(m.b(), &DVector::zeros(3));
    }

    #[test]
    fn analytic_rejects_bad_jacobian() {
        let f = |x: &DVector<f64>| x.clone();
        let j = |_: &DVector<f64>| DMatrix::identity(2, 3);
        assert!(matches!(
            analytic_linearize(&f, &j, &Gaussian::standard(3)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn central_third_weights() {
        for n in [1usize, 2, 5] {
            let cfg = SigmaConfig::central_third(n);
            let sp = sigma_points(&Gaussian::standard(n), &cfg).unwrap();
            assert_abs_diff_eq!(sp.w_mean[0], 1.0 / 3.0, epsilon = 1e-12);
            assert_abs_diff_eq!(sp.w_mean.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert_eq!(sp.points.len(), 2 * n + 1);
        }
        let cfg1 = SigmaConfig::central_third(1);
        assert_abs_diff_eq!(cfg1.alpha, 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(cfg1.kappa, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(cfg1.lambda(1), 0.5, epsilon = 1e-12);

        let cfg5 = SigmaConfig::central_third(5);
        assert_abs_diff_eq!(cfg5.lambda(5), 2.5, epsilon = 1e-12);
        let sp = sigma_points(&Gaussian::standard(5), &cfg5).unwrap();
        for w in &sp.w_mean[1..] {
            assert_abs_diff_eq!(*w, 1.0 / 15.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn scalar_points() {
        let sp = sigma_points(&Gaussian::standard(1), &SigmaConfig::central_third(1)).unwrap();
        let pts: Vec<f64> = sp.points.iter().map(|p| p[0]).collect();
        assert_abs_diff_eq!(pts[0], 0.0);
        assert_abs_diff_eq!(pts[1], 1.5f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(pts[2], -(1.5f64.sqrt()), epsilon = 1e-14);
    }

    #[test]
    fn invalid_sigma_config() {
        let cfg = SigmaConfig {
            alpha: 1.0,
            kappa: -2.0,
            beta: 2.0,
        };
        assert!(sigma_points(&Gaussian::standard(1), &cfg).is_err());
        let cfg = SigmaConfig {
            alpha: 0.0,
            kappa: 0.0,
            beta: 2.0,
        };
        assert!(cfg.validate(3).is_err());
    }

    #[test]
    fn slr_cubic_mean() {
        // three sigma points 3, 3 ± √6 with weights 1/3 each
        let q = Gaussian::scalar(3.0, 4.0).unwrap();
        let m = slr_linearize(&cubic, &q, &SigmaConfig::central_third(1)).unwrap();
        let r6 = 6f64.sqrt();
        let by_hand = (0.01 * 27.0 + 0.01 * (3.0 + r6).powi(3) + 0.01 * (3.0 - r6).powi(3)) / 3.0;
        let z_bar = m.a()[(0, 0)] * 3.0 + m.b()[0];
        assert_abs_diff_eq!(z_bar, by_hand, epsilon = 1e-12);
        // symmetric points integrate the Gaussian third moment exactly: 0.01(μ³ + 3μσ²)
        assert_abs_diff_eq!(z_bar, 0.63, epsilon = 1e-12);
        assert!(m.omega()[(0, 0)] > 0.0);
    }

    #[test]
    fn slr_even_function_has_zero_slope() {
        let sq = |x: &DVector<f64>| x.map(|v| v * v);
        let q = Gaussian::standard(1);
        let m = slr_linearize(&sq, &q, &SigmaConfig::central_third(1)).unwrap();
        assert_abs_diff_eq!(m.a()[(0, 0)], 0.0, epsilon = 1e-14);
        // z̄ = E[x²] = 1 under the transform
        assert_abs_diff_eq!(m.b()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn slr_singular_covariance() {
        let q = Gaussian::scalar(0.0, 0.0).unwrap();
        assert!(matches!(
            slr_linearize(&cubic, &q, &SigmaConfig::central_third(1)),
            Err(Error::Numerical { .. })
        ));
    }

    fn spd(dim: usize, seed: &[f64]) -> DMatrix<f64> {
        let a = DMatrix::from_fn(dim, dim, |i, j| seed[(i * dim + j) % seed.len()]);
        symmetrize(&(&a * a.transpose() + DMatrix::identity(dim, dim) * 0.05)).unwrap()
    }

    proptest! {
        #[test]
        fn backends_agree_on_affine_maps(
            n in 1usize..5,
            m in 1usize..4,
            seed in prop::collection::vec(-2.0f64..2.0, 30),
        ) {
            let mm = DMatrix::from_fn(m, n, |i, j| seed[(i * 5 + j + 7) % seed.len()]);
            let c = DVector::from_fn(m, |i, _| seed[(i + 3) % seed.len()]);
            let f = |x: &DVector<f64>| &mm * x + &c;
            let j = |_: &DVector<f64>| mm.clone();
            let q = Gaussian::new(DVector::from_fn(n, |i, _| seed[i] * 10.0), spd(n, &seed)).unwrap();
            let lin = analytic_linearize(&f, &j, &q).unwrap();
            let stat = slr_linearize(&f, &q, &SigmaConfig::central_third(n)).unwrap();
            prop_assert!((lin.a() - stat.a()).amax() < 1e-9);
            prop_assert!((lin.b() - stat.b()).amax() < 1e-9);
            prop_assert!(stat.omega().amax() < 1e-9);
            prop_assert!(lin.omega().amax() == 0.0);
        }

        #[test]
        fn slr_omega_psd(
            n in 1usize..4,
            seed in prop::collection::vec(-1.5f64..1.5, 20),
        ) {
            let f = |x: &DVector<f64>| {
                DVector::from_vec(vec![x[0].sin() * x[n - 1], x.norm_squared(), (0.3 * x[0]).exp()])
            };
            let q = Gaussian::new(DVector::from_fn(n, |i, _| seed[i]), spd(n, &seed)).unwrap();
            let model = slr_linearize(&f, &q, &SigmaConfig::central_third(n)).unwrap();
            let min_eig = SymmetricEigen::new(model.omega().clone()).eigenvalues.min();
            prop_assert!(min_eig >= -1e-12 * model.omega().trace().max(1.0));
        }

        #[test]
        fn weights_sum_to_one(n in 1usize..8) {
            let sp = sigma_points(&Gaussian::standard(n), &SigmaConfig::central_third(n)).unwrap();
            prop_assert!((sp.w_mean.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
