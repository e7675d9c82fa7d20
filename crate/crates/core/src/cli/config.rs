//! Run configuration read from TOML files with dotted section keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::invariants::{CheckConfig, Fault};
use crate::solver::SolverConfig;
use crate::symmetry::{validate_params, Branch, SymmetryClass, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Ball,
    Annulus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: DomainKind,
    /// Ignored for balls.
    pub r_inner: f64,
    pub r_outer: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            kind: DomainKind::Ball,
            r_inner: 0.0,
            r_outer: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n_r: usize,
    pub n_theta: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_r: 32,
            n_theta: 180,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub p: usize,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    /// Full symmetric matrix; the diagonal is ignored.
    pub beta: Vec<Vec<f64>>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            p: 2,
            lambda: vec![1.0, 1.0],
            mu: vec![1.0, 1.0],
            beta: vec![vec![0.0, -1.0], vec![-1.0, 0.0]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassConfig {
    pub branch: Branch,
    pub k: usize,
}

impl Default for ClassConfig {
    fn default() -> Self {
        Self {
            branch: Branch::Positive,
            k: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReductionConfig {
    pub n_r: usize,
    /// Angular nodes of the reduced grid; the mapped grid has `k` times as many.
    pub n_phi: usize,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        Self { n_r: 64, n_phi: 96 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    pub samples: usize,
    pub n_r: usize,
    pub n_theta: usize,
    pub starts: usize,
    /// Test hook.
    pub fault: Option<Fault>,
}

impl Default for CheckSection {
    fn default() -> Self {
        Self {
            samples: 8,
            n_r: 16,
            n_theta: 48,
            starts: 6,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub grid: GridConfig,
    pub system: SystemConfig,
    pub class: ClassConfig,
    pub solver: SolverConfig,
    pub reduction: ReductionConfig,
    pub output: OutputConfig,
    pub check: CheckSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn params(&self) -> Result<SystemParams> {
        let s = &self.system;
        SystemParams::new(s.p, s.lambda.clone(), s.mu.clone(), s.beta.clone())
    }

    /// Parameters that satisfy every structural assumption.
    pub fn valid_params(&self) -> Result<SystemParams> {
        let params = self.params()?;
        let violations = validate_params(&params);
        if violations.is_empty() {
            return Ok(params);
        }
        let list: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
        Err(Error::Config(format!(
            "parameter assumptions violated:\n{}",
            list.join("\n")
        )))
    }

    pub fn class(&self) -> SymmetryClass {
        SymmetryClass {
            branch: self.class.branch,
            k: self.class.k,
            p: self.system.p,
        }
    }

    fn spec(&self, n_r: usize, n_theta: usize, alignment_order: usize) -> GridSpec {
        let d = &self.domain;
        match d.kind {
            DomainKind::Ball => GridSpec::ball(d.r_outer, n_r, n_theta, alignment_order),
            DomainKind::Annulus => {
                GridSpec::annulus(d.r_inner, d.r_outer, n_r, n_theta, alignment_order)
            }
        }
    }

    pub fn grid_spec(&self) -> GridSpec {
        self.spec(self.grid.n_r, self.grid.n_theta, self.class().order())
    }

    pub fn reduced_spec(&self) -> GridSpec {
        self.spec(self.reduction.n_r, self.reduction.n_phi, 2)
    }

    pub fn check_config(&self) -> Result<CheckConfig> {
        let c = &self.check;
        let class = self.class();
        Ok(CheckConfig {
            grid: self.spec(c.n_r, c.n_theta, class.order()),
            params: self.valid_params()?,
            k: class.k,
            samples: c.samples,
            solver: SolverConfig {
                starts: c.starts,
                ..self.solver.clone()
            },
            reduced_grid: self.spec(c.n_r, c.n_theta / 2, 2),
            fault: c.fault,
        })
    }
}
