//! Dense-grid Bayesian ground truth for scalar models.
//!
//! The one-step posterior
//! `p(x_k | y) ∝ N(y; h(x_k), R) ∫ N(x_k; f(x_{k-1}), Q) p(x_{k-1}) dx_{k-1}`
//! is evaluated by trapezoid quadrature on a pair of uniform grids.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::ssm::StateSpaceModel;

/// Largest mass tolerated in the outer 1% of a grid.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(hi > lo) || n < 2 || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid needs finite hi > lo and n >= 2, got [{lo}, {hi}] with n = {n}"
            )));
        }
        Ok(Self { lo, hi, n })
    }

    /// `mean ± width·std` of a scalar pilot density.
    pub fn around(pilot: &Gaussian, width: f64, n: usize) -> Result<Self> {
        scalar_check(pilot, "GridSpec::around")?;
        let sd = pilot.cov()[(0, 0)].sqrt();
        Self::new(pilot.mean()[0] - width * sd, pilot.mean()[0] + width * sd, n)
    }

    /// Default resolution: ±10 standard deviations, 2001 points.
    pub fn default_for(pilot: &Gaussian) -> Result<Self> {
        Self::around(pilot, 10.0, 2001)
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Smallest grid containing both.
    pub fn union(&self, other: &GridSpec) -> GridSpec {
        GridSpec {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
            n: self.n.max(other.n),
        }
    }
}

/// Density sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

fn trapezoid(values: &[f64], step: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..n - 1].iter().sum();
    step * (inner + 0.5 * (values[0] + values[n - 1]))
}

impl Grid1D {
    pub fn from_fn(spec: GridSpec, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..spec.n).map(|i| f(spec.x(i))).collect();
        Self { spec, values }
    }

    /// Samples a scalar Gaussian density.
    pub fn gaussian(spec: GridSpec, g: &Gaussian) -> Result<Self> {
        scalar_check(g, "Grid1D::gaussian")?;
        let (m, v) = (g.mean()[0], g.cov()[(0, 0)]);
        if !(v > 0.0) {
            return Err(Error::InvalidParameter("Gaussian variance must be > 0".into()));
        }
        Ok(Self::from_fn(spec, |x| normal_pdf(x, m, v)))
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.spec.step())
    }

    pub fn normalized(mut self) -> Result<Self> {
        let z = self.integral();
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::Numerical {
                context: "Grid1D::normalized: zero or non-finite mass",
                eigenvalue: None,
            });
        }
        self.values.iter_mut().for_each(|v| *v /= z);
        Ok(self)
    }

    /// Mass in the outer 1% (at least one cell) on each side.
    pub fn boundary_mass(&self) -> f64 {
        let n = self.values.len();
        let cells = ((n - 1) / 100).max(1);
        let h = self.spec.step();
        trapezoid(&self.values[..=cells], h) + trapezoid(&self.values[n - 1 - cells..], h)
    }

    fn moment(&self, f: impl Fn(f64) -> f64) -> f64 {
        let weighted: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v * f(self.spec.x(i)))
            .collect();
        trapezoid(&weighted, self.spec.step())
    }
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    (-0.5 * d * d / var).exp() / (2.0 * PI * var).sqrt()
}

fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (d * d / var + (2.0 * PI * var).ln())
}

fn scalar_check(g: &Gaussian, context: &'static str) -> Result<()> {
    if g.dim() != 1 {
        return Err(crate::error::dim_err(context, 1, g.dim()));
    }
    Ok(())
}

/// Predictive density of `x_k` on `state`, integrating the prior over `prev`.
fn predictive_values(prior: &Gaussian, model: &StateSpaceModel, prev: &GridSpec, state: &GridSpec) -> Result<Vec<f64>> {
    scalar_check(prior, "grid oracle prior")?;
    if model.state_dim() != 1 || model.meas_dim() != 1 {
        return Err(crate::error::dim_err("grid oracle model", "1-D", model.state_dim()));
    }
    let prior_grid = Grid1D::gaussian(*prev, prior)?;
    let prior_mass = prior_grid.integral();
    if (1.0 - prior_mass).abs() > BOUNDARY_MASS_LIMIT {
        return Err(Error::GridTooNarrow {
            mass: (1.0 - prior_mass).abs(),
            limit: BOUNDARY_MASS_LIMIT,
        });
    }
    let q = model.q()[(0, 0)];
    let h = prev.step();
    // trapezoid weights folded into the prior samples
    let weighted: Vec<(f64, f64)> = prior_grid
        .values
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let w = if j == 0 || j == prev.n - 1 { 0.5 * h } else { h };
            let fx = model.f(&DVector::from_element(1, prev.x(j)))[0];
            (fx, w * p)
        })
        .filter(|(_, w)| *w > 0.0)
        .collect();
    let norm = 1.0 / (2.0 * PI * q).sqrt();
    let inv2q = 0.5 / q;
    Ok((0..state.n)
        .map(|i| {
            let x = state.x(i);
            weighted
                .iter()
                .map(|(fx, w)| {
                    let d = x - fx;
                    w * (-d * d * inv2q).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect())
}

fn checked(grid: Grid1D) -> Result<Grid1D> {
    let grid = grid.normalized()?;
    let mass = grid.boundary_mass();
    if mass > BOUNDARY_MASS_LIMIT {
        return Err(Error::GridTooNarrow {
            mass,
            limit: BOUNDARY_MASS_LIMIT,
        });
    }
    Ok(grid)
}

/// Exact one-step predictive density `p(x_k)` on `state`.
pub fn grid_predictive(prior: &Gaussian, model: &StateSpaceModel, prev: &GridSpec, state: &GridSpec) -> Result<Grid1D> {
    let values = predictive_values(prior, model, prev, state)?;
    checked(Grid1D { spec: *state, values })
}

/// Exact one-step posterior density `p(x_k | y)` on `state`.
pub fn grid_posterior(
    prior: &Gaussian,
    model: &StateSpaceModel,
    y: f64,
    prev: &GridSpec,
    state: &GridSpec,
) -> Result<Grid1D> {
    let mut values = predictive_values(prior, model, prev, state)?;
    let r = model.r()[(0, 0)];
    for (i, v) in values.iter_mut().enumerate() {
        let hx = model.h(&DVector::from_element(1, state.x(i)))[0];
        *v *= normal_pdf(y, hx, r);
    }
    checked(Grid1D { spec: *state, values })
}

/// Trapezoid mean and variance of a normalized grid density.
pub fn grid_moments(g: &Grid1D) -> Result<Gaussian> {
    let mass = g.integral();
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidParameter(format!("grid is not normalized (mass {mass})")));
    }
    let mean = g.moment(|x| x);
    let var = g.moment(|x| (x - mean) * (x - mean));
    if !(var > 0.0) {
        return Err(Error::Numerical {
            context: "grid_moments: degenerate density",
            eigenvalue: None,
        });
    }
    Gaussian::scalar(mean, var)
}

/// `∫ g ln(g / q)` by trapezoid quadrature, with `0 ln 0 = 0`.
pub fn kl_grid_vs_gaussian(g: &Grid1D, q: &Gaussian) -> Result<f64> {
    scalar_check(q, "kl_grid_vs_gaussian")?;
    let (m, v) = (q.mean()[0], q.cov()[(0, 0)]);
    if !(v > 0.0) {
        return Err(Error::InvalidParameter(format!("q variance must be > 0, got {v}")));
    }
    let integrand: Vec<f64> = g
        .values
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if p > 0.0 {
                p * (p.ln() - normal_log_pdf(g.spec.x(i), m, v))
            } else {
                0.0
            }
        })
        .collect();
    Ok(trapezoid(&integrand, g.spec.step()))
}
