//! Preconditioned projected gradient descent on the Nehari set of a class.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::descent::{descend, DescentProblem};
use super::SolverConfig;
use crate::energy::{energy, energy_difference, gradient, nehari_residuals, nehari_scale, State};
use crate::error::Result;
use crate::grid::{Field, HelmholtzSolver, PolarGrid};
use crate::symmetry::{invariance_defect, project_class, Branch, SymmetryClass, SystemParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "detail")]
pub enum Status {
    Converged,
    MaxIterations,
    LineSearchFailed,
    Infeasible(String),
}

/// Invariance defects of a state relative to a class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassDefects {
    /// Largest defect under the rotation by `2π/k`.
    pub period: f64,
    /// Smallest defect under the refined rotation `2π/(pk)` (positive) or
    /// `2π/(2k)` (nodal).
    pub refined: f64,
}

pub fn class_defects(state: &State, class: &SymmetryClass) -> Result<ClassDefects> {
    let nt = state.grid().n_theta();
    let period = class.period_steps(nt)? as i64;
    let refined = class.generator_steps(nt)? as i64;
    let comps = state.components();
    Ok(ClassDefects {
        period: comps
            .iter()
            .map(|u| invariance_defect(u, period))
            .fold(0.0, f64::max),
        refined: comps
            .iter()
            .map(|u| invariance_defect(u, refined))
            .fold(f64::INFINITY, f64::min),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub state: Option<State>,
    pub energy: f64,
    /// `max_j |∂_j E(U) u_j|`.
    pub nehari_residual: f64,
    /// `max_j ‖∇E(U)_j‖_{L²}`, the discrete PDE residual.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub defects: ClassDefects,
    /// Smallest nodal value over all components.
    pub min_value: f64,
    /// Smallest and largest value per component.
    pub ranges: Vec<(f64, f64)>,
    pub converged: bool,
    pub status: Status,
    /// Energies of accepted iterates, starting with the initial state.
    pub energy_trace: Vec<f64>,
}

impl SolveReport {
    pub fn state(&self) -> &State {
        self.state.as_ref().expect("report carries its state")
    }
}

/// `(-Δ + λ_j)^{-1}` per component, sharing factorizations between equal
/// `λ`.
pub struct Preconditioner {
    solvers: Vec<Arc<HelmholtzSolver>>,
    lambda: Vec<f64>,
}

impl Preconditioner {
    pub fn new(grid: &Arc<PolarGrid>, params: &SystemParams) -> Result<Self> {
        let mut cache: HashMap<u64, Arc<HelmholtzSolver>> = HashMap::new();
        let mut solvers = Vec::with_capacity(params.n());
        for &l in params.lambda() {
            let s = match cache.get(&l.to_bits()) {
                Some(s) => Arc::clone(s),
                None => {
                    let s = Arc::new(HelmholtzSolver::new(grid, 1, l)?);
                    cache.insert(l.to_bits(), Arc::clone(&s));
                    s
                }
            };
            solvers.push(s);
        }
        Ok(Self {
            solvers,
            lambda: params.lambda().to_vec(),
        })
    }

    pub fn apply_inverse(&self, g: &State) -> Result<State> {
        let comps = g
            .components()
            .iter()
            .zip(&self.solvers)
            .map(|(c, s)| s.solve(c))
            .collect::<Result<Vec<Field>>>()?;
        State::new(comps)
    }

    /// `⟨s, (-Δ + λ) s⟩`.
    pub fn energy_norm_sq(&self, s: &State) -> f64 {
        s.components()
            .iter()
            .zip(&self.lambda)
            .map(|(c, l)| c.dirichlet_form(1) + l * c.norm_sq())
            .sum()
    }
}

/// Nehari rescaling that keeps the class relations exact: on the positive
/// branch every block shares the factor of its first component.
pub fn retract_in_class(
    params: &SystemParams,
    state: &State,
    class: &SymmetryClass,
) -> Result<State> {
    let mut t = nehari_scale(params, state, class.branch)?;
    if class.branch == Branch::Positive {
        let p = params.p();
        for j in 0..t.len() {
            t[j] = t[j - j % p];
        }
    }
    Ok(state.scale_each(&t))
}

pub(crate) fn report(
    params: &SystemParams,
    class: &SymmetryClass,
    state: State,
    iterations: usize,
    status: Status,
    trace: Vec<f64>,
) -> Result<SolveReport> {
    let branch = class.branch;
    let grad = gradient(params, &state, branch)?;
    let gradient_norm = grad
        .components()
        .iter()
        .map(Field::l2_norm)
        .fold(0.0, f64::max);
    let neh = nehari_residuals(params, &state, branch, f64::INFINITY)?;
    let ranges: Vec<(f64, f64)> = state
        .components()
        .iter()
        .map(|u| (u.min(), u.max()))
        .collect();
    Ok(SolveReport {
        energy: energy(params, &state, branch)?,
        nehari_residual: neh.max_abs_residual(),
        gradient_norm,
        iterations,
        defects: class_defects(&state, class)?,
        min_value: ranges.iter().map(|r| r.0).fold(f64::INFINITY, f64::min),
        ranges,
        converged: status == Status::Converged,
        status,
        energy_trace: trace,
        state: Some(state),
    })
}

struct ClassProblem<'a> {
    params: &'a SystemParams,
    class: &'a SymmetryClass,
    pre: Preconditioner,
}

impl DescentProblem for ClassProblem<'_> {
    fn energy(&self, u: &State) -> Result<f64> {
        energy(self.params, u, self.class.branch)
    }
    fn energy_difference(&self, a: &State, b: &State) -> Result<f64> {
        energy_difference(self.params, a, b, self.class.branch)
    }
    fn gradient(&self, u: &State) -> Result<State> {
        project_class(&gradient(self.params, u, self.class.branch)?, self.class)
    }
    fn retract(&self, u: &State) -> Result<State> {
        retract_in_class(self.params, &project_class(u, self.class)?, self.class)
    }
    fn precondition(&self, g: &State) -> Result<State> {
        self.pre.apply_inverse(g)
    }
}

/// Descends from `start` inside `class`.
///
/// Each step: `V = retract(project(U − α D))` with Armijo backtracking on
/// `E(V) − E(U) ≤ −c α ⟨∇E, D⟩`, where `D` is the L-BFGS direction built on
/// the preconditioner `P = −Δ + λ`. Stops when
/// `max_j ‖∇E(U)_j‖_{L²} ≤ tol`.
pub fn minimize(
    params: &SystemParams,
    class: &SymmetryClass,
    start: &State,
    config: &SolverConfig,
) -> Result<SolveReport> {
    config.validate()?;
    let problem = ClassProblem {
        params,
        class,
        pre: Preconditioner::new(start.grid(), params)?,
    };
    let out = descend(&problem, start, config)?;
    report(
        params,
        class,
        out.state,
        out.iterations,
        out.status,
        out.trace,
    )
}
