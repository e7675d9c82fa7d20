//! Seeds, Nehari descent and multistart search.

pub(crate) mod descent;
mod minimize;
mod multistart;
pub mod seeds;

use serde::{Deserialize, Serialize};

pub(crate) use minimize::report;
pub use minimize::{
    class_defects, minimize, retract_in_class, ClassDefects, Preconditioner, SolveReport, Status,
};
pub use multistart::{
    aligned_distance, invariant_permutations, multistart, subclass_factors, Alignment, Solution,
    SolutionSet,
};
pub use seeds::{seed, seed_admissible, seed_nodal, seed_positive, PlanarPair, SeedSpec};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Stop when `max_j ‖∇E(U)_j‖_{L²}` falls below this.
    pub gradient_tol: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    /// Step tried after a reset of the quasi-Newton memory.
    pub initial_step: f64,
    /// Number of stored L-BFGS pairs; 0 gives preconditioned gradient descent.
    pub memory: usize,
    pub min_step: f64,
    /// Minimum aligned, normalized L² distance between kept solutions.
    pub dedup_distance: f64,
    pub starts: usize,
    /// Seeds use `m = 1..=m_max` complex coordinates.
    pub m_max: usize,
    /// Number of nested subclasses `qk` searched besides `k` itself.
    pub subclasses: usize,
    pub rng_seed: u64,
    /// Required defect at the refined rotation.
    pub breaking_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 4000,
            gradient_tol: 1e-8,
            armijo_c: 1e-4,
            backtrack: 0.5,
            initial_step: 1.0,
            memory: 8,
            min_step: 1e-14,
            dedup_distance: 0.1,
            starts: 24,
            m_max: 3,
            subclasses: 3,
            rng_seed: 0,
            breaking_threshold: 0.01,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gradient_tol", self.gradient_tol),
            ("armijo_c", self.armijo_c),
            ("initial_step", self.initial_step),
            ("min_step", self.min_step),
            ("dedup_distance", self.dedup_distance),
            ("breaking_threshold", self.breaking_threshold),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "solver.{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::Config("solver.backtrack must lie in (0, 1)".into()));
        }
        if self.armijo_c >= 1.0 {
            return Err(Error::Config("solver.armijo_c must be below 1".into()));
        }
        if self.m_max == 0 || self.subclasses == 0 {
            return Err(Error::Config(
                "solver.m_max and solver.subclasses must be positive".into(),
            ));
        }
        Ok(())
    }
}
