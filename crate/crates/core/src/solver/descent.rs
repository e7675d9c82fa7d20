//! Quasi-Newton descent with retraction, shared by the full and reduced
//! problems.

use std::collections::VecDeque;

use super::minimize::Status;
use super::SolverConfig;
use crate::energy::State;
use crate::error::{Error, Result};
use crate::grid::Field;

pub(crate) trait DescentProblem {
    fn energy(&self, u: &State) -> Result<f64>;
    /// `E(a) − E(b)`, accurate when `a` and `b` are close.
    fn energy_difference(&self, a: &State, b: &State) -> Result<f64>;
    /// Gradient tangent to the constraint space (before retraction).
    fn gradient(&self, u: &State) -> Result<State>;
    /// Maps a trial point back to the constraint set; `Error::Infeasible`
    /// rejects the trial.
    fn retract(&self, u: &State) -> Result<State>;
    fn precondition(&self, g: &State) -> Result<State>;
}

pub(crate) struct Descent {
    pub state: State,
    pub iterations: usize,
    pub status: Status,
    pub trace: Vec<f64>,
}

/// Limited-memory inverse Hessian in the `L²` inner product, seeded with a
/// scaled preconditioner.
struct Lbfgs {
    pairs: VecDeque<(State, State, f64)>,
    memory: usize,
}

impl Lbfgs {
    fn push(&mut self, s: State, y: State) {
        let sy = s.dot(&y);
        if self.memory == 0 || !(sy > 1e-14 * s.norm() * y.norm()) {
            return;
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    fn direction(&self, g: &State, problem: &impl DescentProblem) -> Result<State> {
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * s.dot(&q);
            q = q.axpy(-a, y);
            alphas.push(a);
        }
        let mut r = problem.precondition(&q)?;
        if let Some((s, y, _)) = self.pairs.back() {
            let py = problem.precondition(y)?;
            r = r.scale(s.dot(y) / y.dot(&py));
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * y.dot(&r);
            r = r.axpy(a - b, s);
        }
        Ok(r)
    }
}

fn max_norm(g: &State) -> f64 {
    g.components()
        .iter()
        .map(Field::l2_norm)
        .fold(0.0, f64::max)
}

/// Runs until `max_j ‖g_j‖ ≤ config.gradient_tol` or the budget is spent.
/// An infeasible start is reported through `Status::Infeasible` together
/// with the unretracted state.
pub(crate) fn descend(
    problem: &impl DescentProblem,
    start: &State,
    config: &SolverConfig,
) -> Result<Descent> {
    let mut u = match problem.retract(start) {
        Ok(u) => u,
        Err(Error::Infeasible(msg)) => {
            return Ok(Descent {
                state: start.clone(),
                iterations: 0,
                status: Status::Infeasible(msg),
                trace: Vec::new(),
            })
        }
        Err(Error::ZeroComponent(j)) => {
            return Ok(Descent {
                state: start.clone(),
                iterations: 0,
                status: Status::Infeasible(format!("component {j} vanishes")),
                trace: Vec::new(),
            })
        }
        Err(e) => return Err(e),
    };
    let mut trace = vec![problem.energy(&u)?];
    let mut g = problem.gradient(&u)?;
    let mut memory = Lbfgs {
        pairs: VecDeque::with_capacity(config.memory),
        memory: config.memory,
    };

    let done = |state, iterations, status, trace| {
        Ok(Descent {
            state,
            iterations,
            status,
            trace,
        })
    };
    for it in 0..config.max_iter {
        if max_norm(&g) <= config.gradient_tol {
            return done(u, it, Status::Converged, trace);
        }
        let mut d = memory.direction(&g, problem)?;
        let mut slope = g.dot(&d);
        if !(slope > 0.0) {
            memory.pairs.clear();
            d = problem.precondition(&g)?;
            slope = g.dot(&d);
        }

        let mut step = if memory.pairs.is_empty() {
            config.initial_step
        } else {
            1.0
        };
        let accepted = loop {
            if step < config.min_step {
                break None;
            }
            match problem.retract(&u.axpy(-step, &d)) {
                Ok(v) => {
                    if problem.energy_difference(&v, &u)? <= -config.armijo_c * step * slope {
                        break Some(v);
                    }
                }
                Err(Error::Infeasible(_)) | Err(Error::ZeroComponent(_)) => {}
                Err(err) => return Err(err),
            }
            step *= config.backtrack;
        };
        let Some(v) = accepted else {
            if memory.pairs.is_empty() {
                return done(u, it, Status::LineSearchFailed, trace);
            }
            memory.pairs.clear();
            continue;
        };

        let g_new = problem.gradient(&v)?;
        memory.push(v.axpy(-1.0, &u), g_new.axpy(-1.0, &g));
        trace.push(problem.energy(&v)?);
        u = v;
        g = g_new;
    }
    done(u, config.max_iter, Status::MaxIterations, trace)
}
