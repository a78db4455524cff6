//! State-space models with additive Gaussian noise:
//! `x_{k+1} ~ N(f(x_k), Q)`, `y_k ~ N(h(x_k), R)`.
//!
//! Two concrete models are provided: a scalar cubic transition observed
//! directly, and a planar coordinated-turn model with state
//! `(px, vx, py, vy, ω)` observed through its positions.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_err, Error, Result};
use crate::gaussian::Gaussian;

pub type ModelFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Turn rates below this magnitude use the constant-velocity limit.
pub const OMEGA_EPS: f64 = 1e-9;

#[derive(Clone)]
pub struct StateSpaceModel {
    state_dim: usize,
    meas_dim: usize,
    f: ModelFn,
    h: ModelFn,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    f_jacobian: Option<JacobianFn>,
    h_jacobian: Option<JacobianFn>,
}

impl fmt::Debug for StateSpaceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateSpaceModel")
            .field("state_dim", &self.state_dim)
            .field("meas_dim", &self.meas_dim)
            .field("q", &self.q)
            .field("r", &self.r)
            .field("analytic_jacobians", &self.has_jacobians())
            .finish()
    }
}

impl StateSpaceModel {
    pub fn new(
        f: ModelFn,
        h: ModelFn,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        f_jacobian: Option<JacobianFn>,
        h_jacobian: Option<JacobianFn>,
    ) -> Result<Self> {
        let state_dim = q.nrows();
        let meas_dim = r.nrows();
        if state_dim == 0 || meas_dim == 0 {
            return Err(Error::InvalidParameter("model dimensions must be positive".into()));
        }
        // square + symmetric PSD
        let q = Gaussian::new(DVector::zeros(state_dim), q)?.cov().clone();
        let r = Gaussian::new(DVector::zeros(meas_dim), r)?.cov().clone();
        Ok(Self {
            state_dim,
            meas_dim,
            f,
            h,
            q,
            r,
            f_jacobian,
            h_jacobian,
        })
    }

    /// Affine-Gaussian model `x' = F x + u`, `y = H x + c`.
    pub fn linear(
        f_mat: DMatrix<f64>,
        f_off: DVector<f64>,
        h_mat: DMatrix<f64>,
        h_off: DVector<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
    ) -> Result<Self> {
        let n = q.nrows();
        let m = r.nrows();
        if f_mat.shape() != (n, n) || f_off.len() != n {
            return Err(dim_err(
                "linear transition",
                format!("{n}x{n}"),
                format!("{:?}", f_mat.shape()),
            ));
        }
        if h_mat.shape() != (m, n) || h_off.len() != m {
            return Err(dim_err(
                "linear measurement",
                format!("{m}x{n}"),
                format!("{:?}", h_mat.shape()),
            ));
        }
        let (fm, hm) = (f_mat.clone(), h_mat.clone());
        Self::new(
            Arc::new(move |x| &f_mat * x + &f_off),
            Arc::new(move |x| &h_mat * x + &h_off),
            q,
            r,
            Some(Arc::new(move |_| fm.clone())),
            Some(Arc::new(move |_| hm.clone())),
        )
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn meas_dim(&self) -> usize {
        self.meas_dim
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn f(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.f)(x)
    }

    pub fn h(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.h)(x)
    }

    pub fn f_jacobian(&self) -> Option<&JacobianFn> {
        self.f_jacobian.as_ref()
    }

    pub fn h_jacobian(&self) -> Option<&JacobianFn> {
        self.h_jacobian.as_ref()
    }

    pub fn has_jacobians(&self) -> bool {
        self.f_jacobian.is_some() && self.h_jacobian.is_some()
    }
}

/// `x' ~ N(a x³, Q)`, `y ~ N(x, R)`.
pub fn cubic_model(a: f64, q: f64, r: f64) -> Result<StateSpaceModel> {
    if !(q > 0.0 && r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Q and R must be > 0, got Q={q}, R={r}"
        )));
    }
    StateSpaceModel::new(
        Arc::new(move |x| x.map(|v| a * v * v * v)),
        Arc::new(|x| x.clone()),
        DMatrix::from_element(1, 1, q),
        DMatrix::from_element(1, 1, r),
        Some(Arc::new(move |x| DMatrix::from_element(1, 1, 3.0 * a * x[0] * x[0]))),
        Some(Arc::new(|_| DMatrix::identity(1, 1))),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtParams {
    /// Sampling period (s).
    pub t: f64,
    pub q1: f64,
    pub q2: f64,
    /// Measurement noise variance (m²).
    pub sigma2: f64,
}

impl CtParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("T", self.t), ("q1", self.q1), ("q2", self.q2), ("sigma2", self.sigma2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// `sin(Tω)/ω` and `(1 − cos(Tω))/ω`, continuous through ω = 0.
fn turn_terms(omega: f64, t: f64) -> (f64, f64) {
    if omega.abs() < OMEGA_EPS {
        (t, 0.0)
    } else {
        let half = (0.5 * t * omega).sin();
        ((t * omega).sin() / omega, 2.0 * half * half / omega)
    }
}

/// ω-derivatives of the two turn terms.
fn turn_term_derivatives(omega: f64, t: f64) -> (f64, f64) {
    let u = t * omega;
    if u.abs() < 1e-3 {
        // Taylor series; truncation error O(u⁵)
        let u2 = u * u;
        let d_sin = t * t * u * (-1.0 / 3.0 + u2 / 30.0);
        let d_cos = t * t * (0.5 - u2 / 8.0 + u2 * u2 / 144.0);
        (d_sin, d_cos)
    } else {
        let (s, c) = u.sin_cos();
        let half = (0.5 * u).sin();
        let w2 = omega * omega;
        ((u * c - s) / w2, (u * s - 2.0 * half * half) / w2)
    }
}

/// Coordinated-turn transition matrix `F(ω)` for state `(px, vx, py, vy, ω)`.
pub fn ct_transition_matrix(omega: f64, t: f64) -> DMatrix<f64> {
    let (sw, cw) = turn_terms(omega, t);
    let (s, c) = if omega.abs() < OMEGA_EPS {
        (0.0, 1.0)
    } else {
        (t * omega).sin_cos()
    };
    #[rustfmt::skip]
    let f = DMatrix::from_row_slice(5, 5, &[
        1.0, sw,  0.0, -cw, 0.0,
        0.0, c,   0.0, -s,  0.0,
        0.0, cw,  1.0, sw,  0.0,
        0.0, s,   0.0, c,   0.0,
        0.0, 0.0, 0.0, 0.0, 1.0,
    ]);
    f
}

/// Jacobian of `x ↦ F(x₅) x`.
pub fn ct_transition_jacobian(x: &DVector<f64>, t: f64) -> DMatrix<f64> {
    let omega = x[4];
    let (vx, vy) = (x[1], x[3]);
    let mut jac = ct_transition_matrix(omega, t);
    let (d_sw, d_cw) = turn_term_derivatives(omega, t);
    let (s, c) = if omega.abs() < OMEGA_EPS {
        (0.0, 1.0)
    } else {
        (t * omega).sin_cos()
    };
    jac[(0, 4)] = d_sw * vx - d_cw * vy;
    jac[(1, 4)] = -t * s * vx - t * c * vy;
    jac[(2, 4)] = d_cw * vx + d_sw * vy;
    jac[(3, 4)] = t * c * vx - t * s * vy;
    jac[(4, 4)] = 1.0;
    jac
}

/// White-acceleration process noise on each axis plus a turn-rate random walk.
pub fn ct_process_noise(q1: f64, q2: f64, t: f64) -> DMatrix<f64> {
    let t2 = t * t;
    let t3 = t2 * t;
    let mut q = DMatrix::zeros(5, 5);
    for axis in [0, 2] {
        q[(axis, axis)] = q1 * t3 / 3.0;
        q[(axis, axis + 1)] = q1 * t2 / 2.0;
        q[(axis + 1, axis)] = q1 * t2 / 2.0;
        q[(axis + 1, axis + 1)] = q1 * t;
    }
    q[(4, 4)] = q2;
    q
}

/// Selects `(px, py)` from the state.
pub fn ct_measurement_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 5, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0])
}

pub fn ct_model(p: &CtParams) -> Result<StateSpaceModel> {
    p.validate()?;
    let t = p.t;
    let h = ct_measurement_matrix();
    let h_jac = h.clone();
    StateSpaceModel::new(
        Arc::new(move |x| ct_transition_matrix(x[4], t) * x),
        Arc::new(move |x| &h * x),
        ct_process_noise(p.q1, p.q2, t),
        DMatrix::identity(2, 2) * p.sigma2,
        Some(Arc::new(move |x| ct_transition_jacobian(x, t))),
        Some(Arc::new(move |_| h_jac.clone())),
    )
}

/// Initial belief for the tracking experiment.
pub fn tracking_prior() -> Gaussian {
    let mean = DVector::from_vec(vec![130.0, 35.0, -20.0, -20.0, -4.0 * PI / 180.0]);
    let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 5.0, 5.0, 5.0, 1e-2]));
    Gaussian::new(mean, cov).expect("constant prior is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;

    fn fd_jacobian(f: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>, step: f64) -> DMatrix<f64> {
        let fx = f(x);
        let mut jac = DMatrix::zeros(fx.len(), x.len());
        for j in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += step;
            xm[j] -= step;
            let col = (f(&xp) - f(&xm)) / (2.0 * step);
            jac.set_column(j, &col);
        }
        jac
    }

    #[test]
    fn cubic_examples() {
        let m = cubic_model(0.01, 0.1, 0.1).unwrap();
        let x = |v: f64| DVector::from_element(1, v);
        assert_abs_diff_eq!(m.f(&x(3.0))[0], 0.27, epsilon = 1e-15);
        assert_eq!(m.f(&x(0.0))[0], 0.0);
        let jac = m.f_jacobian().unwrap();
        assert_eq!(jac(&x(0.0))[(0, 0)], 0.0);
        let h = 1e-6;
        let fd = (m.f(&x(2.0 + h))[0] - m.f(&x(2.0 - h))[0]) / (2.0 * h);
        assert_abs_diff_eq!(jac(&x(2.0))[(0, 0)], 0.12, epsilon = 1e-15);
        assert_abs_diff_eq!(fd, 0.12, epsilon = 1e-8);
        assert!(cubic_model(0.01, 0.0, 0.1).is_err());
    }

    #[test]
    fn ct_matrix_zero_rate_is_constant_velocity() {
        #[rustfmt::skip]
        let cv = DMatrix::from_row_slice(5, 5, &[
            1.0, 1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 0.0, 1.0,
        ]);
        assert_eq!(ct_transition_matrix(0.0, 1.0), cv);
        assert!((ct_transition_matrix(1e-8, 1.0) - &cv).amax() < 1e-6);
        assert!((ct_transition_matrix(-1e-8, 1.0) - &cv).amax() < 1e-6);
    }

    #[test]
    fn ct_matrix_quarter_turn() {
        let w = PI / 2.0;
        let f = ct_transition_matrix(w, 1.0);
        let sw = 2.0 / PI;
        let cw = (1.0 - (PI / 2.0).cos()) / w;
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(5, 5, &[
            1.0, sw,  0.0, -cw,  0.0,
            0.0, 0.0, 0.0, -1.0, 0.0,
            0.0, cw,  1.0, sw,   0.0,
            0.0, 1.0, 0.0, 0.0,  0.0,
            0.0, 0.0, 0.0, 0.0,  1.0,
        ]);
        assert!((f - expected).amax() < 1e-15);
        assert_abs_diff_eq!(cw, 2.0 / PI, epsilon = 1e-15);
    }

    #[test]
    fn ct_preserves_turn_rate() {
        let x = DVector::from_vec(vec![10.0, 0.0, -4.0, 0.0, 0.3]);
        let y = ct_transition_matrix(0.3, 1.0) * &x;
        assert_eq!(y[4], 0.3);
        let f = ct_transition_matrix(0.3, 1.0);
        assert_eq!(
            f.row(4).iter().copied().collect::<Vec<_>>(),
            vec![0.0, 0.0, 0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn ct_jacobian_zero_velocity_has_zero_rate_column() {
        let x = DVector::from_vec(vec![3.0, 0.0, 1.0, 0.0, 0.2]);
        let jac = ct_transition_jacobian(&x, 1.0);
        for i in 0..4 {
            assert_eq!(jac[(i, 4)], 0.0);
        }
    }

    #[test]
    fn ct_jacobian_continuous_at_zero_rate() {
        let base = DVector::from_vec(vec![1.0, 35.0, 2.0, -20.0, 0.0]);
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[4] = 1e-8;
        minus[4] = -1e-8;
        let j0 = ct_transition_jacobian(&base, 1.0);
        assert!((ct_transition_jacobian(&plus, 1.0) - &j0).amax() < 1e-6);
        assert!((ct_transition_jacobian(&minus, 1.0) - &j0).amax() < 1e-6);
        // (1 - cos)/ω derivative limit T²/2 times vx
        assert_abs_diff_eq!(j0[(2, 4)], 0.5 * 35.0, epsilon = 1e-12);
    }

    #[test]
    fn process_noise_blocks() {
        let q = ct_process_noise(1.0, 1e-2, 1.0);
        assert_abs_diff_eq!(q[(0, 0)], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q[(0, 1)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(q[(1, 1)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q[(2, 3)], 0.5, epsilon = 1e-15);
        assert_eq!(q[(4, 4)], 1e-2);
        for q1 in [1e-4, 1e-3, 1e-2, 1e-1, 1.0] {
            let q = ct_process_noise(q1, 1e-2, 1.0);
            assert_eq!(q, q.transpose());
            assert!(SymmetricEigen::new(q).eigenvalues.min() >= 0.0);
        }
    }

    #[test]
    fn ct_model_measurement() {
        let p = CtParams {
            t: 1.0,
            q1: 1e-2,
            q2: 1e-2,
            sigma2: 1.0,
        };
        let m = ct_model(&p).unwrap();
        let x = DVector::from_vec(vec![130.0, 35.0, -20.0, -20.0, -0.0698]);
        assert_eq!(m.h(&x), DVector::from_vec(vec![130.0, -20.0]));
        assert_eq!(m.meas_dim(), 2);
        assert_eq!(m.r(), &DMatrix::identity(2, 2));
        assert!(ct_model(&CtParams { sigma2: 0.0, ..p }).is_err());
    }

    #[test]
    fn ct_model_small_turn_advances_by_velocity() {
        let p = CtParams {
            t: 1.0,
            q1: 1e-2,
            q2: 1e-2,
            sigma2: 1.0,
        };
        let m = ct_model(&p).unwrap();
        let w = -4.0 * PI / 180.0;
        let x = DVector::from_vec(vec![130.0, 35.0, -20.0, -20.0, w]);
        let mut cv = x.clone();
        cv[4] = 0.0;
        let turned = m.f(&x);
        let straight = m.f(&cv);
        assert_abs_diff_eq!(straight[0], 165.0, epsilon = 1e-12);
        assert_abs_diff_eq!(straight[2], -40.0, epsilon = 1e-12);
        // deviation is first order in Tω with speed-sized coefficient
        let speed = (35f64.powi(2) + 20f64.powi(2)).sqrt();
        let dev = ((turned[0] - straight[0]).powi(2) + (turned[2] - straight[2]).powi(2)).sqrt();
        assert!(dev < speed * w.abs());
        assert!(dev > 0.0);
    }

    #[test]
    fn prior_values() {
        let p = tracking_prior();
        assert_abs_diff_eq!(p.mean()[4], -0.069813, epsilon = 1e-6);
        assert_eq!(p.cov()[(0, 0)], 5.0);
        assert_eq!(p.cov()[(4, 4)], 1e-2);
    }

    proptest! {
        #[test]
        fn ct_jacobian_matches_finite_differences(
            pos in prop::collection::vec(-200.0f64..200.0, 2),
            vel in prop::collection::vec(-40.0f64..40.0, 2),
            omega_pick in 0usize..5,
            omega_free in -0.5f64..0.5,
            sign in prop::bool::ANY,
        ) {
            let omega = [0.0, 1e-10, 1e-3, 0.3, omega_free][omega_pick] * if sign { 1.0 } else { -1.0 };
            let x = DVector::from_vec(vec![pos[0], vel[0], pos[1], vel[1], omega]);
            let f = |s: &DVector<f64>| ct_transition_matrix(s[4], 1.0) * s;
            let fd = fd_jacobian(f, &x, 1e-6);
            let jac = ct_transition_jacobian(&x, 1.0);
            for (a, b) in jac.iter().zip(fd.iter()) {
                prop_assert!((a - b).abs() <= 1e-5 * a.abs().max(1.0), "{} vs {}", a, b);
            }
        }

        #[test]
        fn velocity_rotation_has_unit_determinant(omega in -3.0f64..3.0, t in 0.1f64..2.0) {
            let f = ct_transition_matrix(omega, t);
            let det = f[(1, 1)] * f[(3, 3)] - f[(1, 3)] * f[(3, 1)];
            prop_assert!((det - 1.0).abs() < 1e-12);
        }
    }
}
