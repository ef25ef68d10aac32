//! Experiment configuration: one JSON document that pins every physical
//! and numerical parameter of a run, so results are reproducible records.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::potential::PotentialSpec;
use crate::solve::{NewtonParams, SweepRung};

/// Grid of the finest (last) eps in the sweep.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
}

/// Newton solver settings; all optional in the file.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSpec {
    pub tol: f64,
    pub max_iter: usize,
    /// Line-search halvings before the solve reports stagnation.
    pub damping_cap: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            tol: 1e-10,
            max_iter: 40,
            damping_cap: 20,
        }
    }
}

impl SolverSpec {
    pub fn params(&self) -> NewtonParams {
        NewtonParams {
            tol: self.tol,
            max_iter: self.max_iter,
            damping_cap: self.damping_cap,
            ..NewtonParams::default()
        }
    }
}

/// Uniqueness-probe settings; all optional in the file.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeSpec {
    pub k_perturbations: usize,
    /// Peak displacement in units of eps.
    pub magnitude: f64,
    pub seed: u64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec {
            k_perturbations: 4,
            magnitude: 0.1,
            seed: 7,
        }
    }
}

/// A complete experiment description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub potential: PotentialSpec,
    pub p: f64,
    /// Strictly decreasing; the continuation solves largest first.
    pub eps_list: Vec<f64>,
    /// Grid for the smallest eps; coarser rungs are derived from it.
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub probe: ProbeSpec,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| validation!("config parse: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.potential.validate()?;
        if !(self.p.is_finite() && self.p > 2.0) {
            return Err(validation!("p must exceed 2, got {}", self.p));
        }
        if self.eps_list.is_empty() {
            return Err(validation!("eps_list must not be empty"));
        }
        for e in &self.eps_list {
            if !(e.is_finite() && *e > 0.0) {
                return Err(validation!("eps values must be positive, got {e}"));
            }
        }
        for pair in self.eps_list.windows(2) {
            if pair[1] >= pair[0] {
                return Err(validation!(
                    "eps_list must be strictly decreasing, got {} then {}",
                    pair[0],
                    pair[1]
                ));
            }
        }
        let grid = crate::grid::Grid2D::new(self.grid.n, self.grid.l)?;
        let eps_min = *self.eps_list.last().expect("nonempty");
        if grid.spacing() > eps_min / 8.0 {
            return Err(validation!(
                "grid spacing {} exceeds an eighth of the smallest eps {}",
                grid.spacing(),
                eps_min
            ));
        }
        let margin = 0.75 * self.grid.l;
        for (i, w) in self.potential.wells.iter().enumerate() {
            if w.center[0].abs() > margin || w.center[1].abs() > margin {
                return Err(validation!(
                    "well {i} center ({}, {}) is within L/4 of the domain boundary",
                    w.center[0],
                    w.center[1]
                ));
            }
        }
        if !(self.solver.tol.is_finite() && self.solver.tol > 0.0) {
            return Err(validation!("solver tol must be positive"));
        }
        if self.solver.max_iter == 0 {
            return Err(validation!("solver max_iter must be at least 1"));
        }
        if !(self.probe.magnitude.is_finite() && self.probe.magnitude >= 0.0) {
            return Err(validation!("probe magnitude must be nonnegative"));
        }
        Ok(())
    }

    /// The continuation plan: one rung per eps, largest first.
    ///
    /// The configured grid belongs to the smallest eps. Coarser rungs scale
    /// the domain with eps (the solution width shrinks proportionally, so
    /// the useful domain does too) and take the smallest power-of-two grid
    /// that keeps at least eight cells per eps, never exceeding the
    /// configured n. This reproduces a hand-tuned plan while keeping the
    /// config to a single grid entry.
    pub fn rungs(&self) -> Vec<SweepRung> {
        let eps_min = *self.eps_list.last().expect("validated nonempty");
        self.eps_list
            .iter()
            .map(|&eps| {
                if eps == eps_min {
                    return SweepRung {
                        eps,
                        n: self.grid.n,
                        l: self.grid.l,
                    };
                }
                let l = self.grid.l * eps / eps_min;
                let mut n = 64usize;
                while n < self.grid.n && 2.0 * l / n as f64 > eps / 8.0 {
                    n *= 2;
                }
                SweepRung { eps, n, l }
            })
            .collect()
    }
}
