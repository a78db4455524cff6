use std::path::Path;

use crate::error::{Error, Result};
use crate::ssm::CtParams;

/// Sweep parameters. `Default` reproduces the full 25-configuration grid
/// with 20 trajectories × 10 targets of 130 steps each.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub q1_grid: Vec<f64>,
    pub sigma2_grid: Vec<f64>,
    pub q2: f64,
    pub t: f64,
    pub n_trajectories: usize,
    pub n_targets_per_trajectory: usize,
    pub k: usize,
    pub master_seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            q1_grid: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            sigma2_grid: vec![1e-2, 1e-1, 1.0, 1e1, 1e2],
            q2: 1e-2,
            t: 1.0,
            n_trajectories: 20,
            n_targets_per_trajectory: 10,
            k: 130,
            master_seed: 0,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| {
            Err(Error::Config {
                key: key.into(),
                message: message.into(),
            })
        };
        if self.q1_grid.is_empty() {
            return bad("q1_grid", "must not be empty");
        }
        if self.sigma2_grid.is_empty() {
            return bad("sigma2_grid", "must not be empty");
        }
        if self.n_trajectories == 0 {
            return bad("n_trajectories", "must be at least 1");
        }
        if self.n_targets_per_trajectory == 0 {
            return bad("n_targets_per_trajectory", "must be at least 1");
        }
        if self.k == 0 {
            return bad("K", "must be at least 1");
        }
        for (i, _) in self.configs().enumerate() {
            self.params(i).validate().map_err(|e| Error::Config {
                key: "q1_grid/sigma2_grid/q2/T".into(),
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn n_configs(&self) -> usize {
        self.q1_grid.len() * self.sigma2_grid.len()
    }

    /// `(q1, sigma2)` pairs, q1-major, indexed by config index.
    pub fn configs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.q1_grid
            .iter()
            .flat_map(move |&q1| self.sigma2_grid.iter().map(move |&s2| (q1, s2)))
    }

    pub fn params(&self, config_index: usize) -> CtParams {
        let n_s = self.sigma2_grid.len();
        CtParams {
            t: self.t,
            q1: self.q1_grid[config_index / n_s],
            q2: self.q2,
            sigma2: self.sigma2_grid[config_index % n_s],
        }
    }

    /// Parses `key = value` lines; `#` starts a comment. Every key is optional.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                key: line.to_string(),
                message: format!("line {}: expected `key = value`", lineno + 1),
            })?;
            let key = key.trim();
            let value = value.trim();
            let err = |message: String| Error::Config {
                key: key.to_string(),
                message,
            };
            let real = |v: &str| v.trim().parse::<f64>().map_err(|e| err(format!("`{v}`: {e}")));
            let count = |v: &str| v.parse::<usize>().map_err(|e| err(format!("`{v}`: {e}")));
            match key {
                "q1_grid" => spec.q1_grid = value.split(',').map(real).collect::<Result<_>>()?,
                "sigma2_grid" => spec.sigma2_grid = value.split(',').map(real).collect::<Result<_>>()?,
                "q2" => spec.q2 = real(value)?,
                "T" | "t" => spec.t = real(value)?,
                "n_trajectories" => spec.n_trajectories = count(value)?,
                "n_targets_per_trajectory" => spec.n_targets_per_trajectory = count(value)?,
                "K" | "k" => spec.k = count(value)?,
                "master_seed" => spec.master_seed = value.parse().map_err(|e| err(format!("`{value}`: {e}")))?,
                _ => return Err(err("unknown key".into())),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}
