//! Group actions on states, exact projections onto the symmetry classes,
//! invariance and period diagnostics, parameter validation and admissible
//! pairs of finite orthogonal groups.

mod group;
mod params;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use group::{check_admissible, orbit, AdmissiblePairReport, FiniteGroup, OrthoMatrix, Point};
pub use params::{is_prime, validate_params, SystemParams, Violation};

use crate::energy::State;
use crate::error::{Error, Result};
use crate::grid::Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Positive,
    Nodal,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Positive => "positive",
            Branch::Nodal => "nodal",
        })
    }
}

/// A symmetry class of states.
///
/// Positive branch: `u_{j+1} = R_{2π/(pk)} u_j` inside each block of `p`
/// components, which forces every component to be `2π/k`-periodic.
/// Nodal branch: every component satisfies `u_j = -R_{π/k} u_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymmetryClass {
    pub branch: Branch,
    pub k: usize,
    pub p: usize,
}

impl SymmetryClass {
    pub fn positive(k: usize, p: usize) -> Self {
        Self {
            branch: Branch::Positive,
            k,
            p,
        }
    }

    pub fn nodal(k: usize, p: usize) -> Self {
        Self {
            branch: Branch::Nodal,
            k,
            p,
        }
    }

    /// Order of the generating element: `pk` (positive) or `2k` (nodal).
    pub fn order(&self) -> usize {
        match self.branch {
            Branch::Positive => self.p * self.k,
            Branch::Nodal => 2 * self.k,
        }
    }

    /// Angular index steps of the generating rotation.
    pub fn generator_steps(&self, n_theta: usize) -> Result<usize> {
        let order = self.order();
        if self.k == 0 || n_theta % order != 0 {
            return Err(Error::Alignment { n_theta, order });
        }
        Ok(n_theta / order)
    }

    /// Steps of the rotation by `2π/k`, under which every member is invariant.
    pub fn period_steps(&self, n_theta: usize) -> Result<usize> {
        if self.k == 0 || n_theta % self.k != 0 {
            return Err(Error::Alignment {
                n_theta,
                order: self.k.max(1),
            });
        }
        Ok(n_theta / self.k)
    }

    fn check(&self, state: &State, params_p: Option<usize>) -> Result<usize> {
        if self.k == 0 {
            return Err(Error::InvalidParams(
                "rotation order k must be positive".into(),
            ));
        }
        if self.branch == Branch::Positive {
            if !is_prime(self.p) {
                return Err(Error::InvalidParams(format!("p = {} is not prime", self.p)));
            }
            if state.len() % self.p != 0 {
                return Err(Error::ComponentCount {
                    expected: state.len().div_ceil(self.p) * self.p,
                    found: state.len(),
                });
            }
            if let Some(p) = params_p {
                if p != self.p {
                    return Err(Error::InvalidParams(format!(
                        "class uses p = {} but parameters use p = {p}",
                        self.p
                    )));
                }
            }
        }
        self.generator_steps(state.grid().n_theta())
    }
}

impl fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.branch {
            Branch::Positive => write!(f, "positive(k={}, p={})", self.k, self.p),
            Branch::Nodal => write!(f, "nodal(k={})", self.k),
        }
    }
}

/// Blockwise cyclic left shift `(u_1, …, u_p) ↦ (u_2, …, u_p, u_1)`.
pub fn sigma_permute(state: &State, params: &SystemParams) -> Result<State> {
    sigma_power(state, params.p(), 1).and_then(|s| {
        if s.len() != params.n() {
            Err(Error::ComponentCount {
                expected: params.n(),
                found: s.len(),
            })
        } else {
            Ok(s)
        }
    })
}

/// `σ^power` for block size `p`.
pub fn sigma_power(state: &State, p: usize, power: i64) -> Result<State> {
    let n = state.len();
    if p == 0 || n % p != 0 {
        return Err(Error::ComponentCount {
            expected: n.div_ceil(p.max(1)) * p.max(1),
            found: n,
        });
    }
    let comps = (0..n)
        .map(|j| {
            let (b, pos) = (j / p, j % p);
            let src = b * p + (pos as i64 + power).rem_euclid(p as i64) as usize;
            state.component(src).clone()
        })
        .collect();
    State::new(comps)
}

/// Orthogonal projection onto the symmetry class.
///
/// The result satisfies the class relations exactly (index for index): the
/// averaged field is computed on one fundamental sector and copied.
pub fn project_class(state: &State, class: &SymmetryClass) -> Result<State> {
    let steps = class.check(state, None)?;
    match class.branch {
        Branch::Positive => {
            let p = class.p;
            let period = steps * p;
            let mut comps = Vec::with_capacity(state.len());
            for b in 0..state.len() / p {
                // w = (1/p) Σ_t R^{-t} u_{b,t}, then periodized over 2π/k.
                let mut w = state.component(b * p).clone();
                for t in 1..p {
                    let back = state.component(b * p + t).rotate(-((t * steps) as i64));
                    w = w.axpy(1.0, &back);
                }
                let w = periodize(&w.scale(1.0 / p as f64), period, 1.0);
                for t in 0..p {
                    comps.push(w.rotate((t * steps) as i64));
                }
            }
            State::new(comps)
        }
        Branch::Nodal => {
            let comps = state
                .components()
                .iter()
                .map(|u| periodize(u, steps, -1.0))
                .collect();
            State::new(comps)
        }
    }
}

/// Average of `sign^j R^{j·steps} f` over `j = 0..n_theta/steps`, evaluated on
/// the sector `[0, steps)` and copied with factor `sign^j`, so that the
/// output satisfies `R^{steps} g = sign · g` bit for bit.
fn periodize(f: &Field, steps: usize, sign: f64) -> Field {
    let nt = f.grid().n_theta();
    let copies = nt / steps;
    let nr = f.grid().n_r();
    let src = f.values();
    let mut out = vec![0.0; src.len()];
    let inv = 1.0 / copies as f64;
    for i in 0..nr {
        let row = &src[i * nt..(i + 1) * nt];
        let dst = &mut out[i * nt..(i + 1) * nt];
        for m in 0..steps {
            // g(m) = (1/c) Σ_j sign^j f(m - j·steps)
            let mut acc = 0.0;
            let mut s = 1.0;
            for j in 0..copies {
                let idx = (m + nt - j * steps) % nt;
                acc += s * row[idx];
                s *= sign;
            }
            let g = acc * inv;
            let mut s = 1.0;
            for j in 0..copies {
                dst[m + j * steps] = s * g;
                s *= sign;
            }
        }
    }
    Field::from_values(f.grid(), out).expect("averaging keeps values finite")
}

/// `‖f − R f‖ / max(‖f‖, 1e-300)` for the rotation by `steps` nodes.
pub fn invariance_defect(f: &Field, steps: i64) -> f64 {
    let diff = f.axpy(-1.0, &f.rotate(steps));
    diff.l2_norm() / f.l2_norm().max(1e-300)
}

/// Relative defect of the antisymmetry `f = -R f`.
pub fn antiinvariance_defect(f: &Field, steps: i64) -> f64 {
    let sum = f.axpy(1.0, &f.rotate(steps));
    sum.l2_norm() / f.l2_norm().max(1e-300)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "m")]
pub enum Period {
    /// Invariant under every grid rotation.
    Radial,
    /// Minimal period `2π/m`.
    Fraction(usize),
}

impl Period {
    /// The `m` of `2π/m`; `None` for radial fields.
    pub fn divisor(&self) -> Option<usize> {
        match self {
            Period::Radial => None,
            Period::Fraction(m) => Some(*m),
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Period::Radial => f.write_str("radial"),
            Period::Fraction(1) => f.write_str("2pi"),
            Period::Fraction(m) => write!(f, "2pi/{m}"),
        }
    }
}

/// Smallest angular period `2π/m` over divisors `m` of `n_theta` whose
/// invariance defect is below `tol`.
pub fn minimal_period(f: &Field, tol: f64) -> Period {
    let nt = f.grid().n_theta();
    if invariance_defect(f, 1) < tol {
        return Period::Radial;
    }
    let best = (1..=nt)
        .filter(|m| nt % m == 0)
        .filter(|&m| m == 1 || invariance_defect(f, (nt / m) as i64) < tol)
        .max()
        .unwrap_or(1);
    Period::Fraction(best)
}

/// Table of `(m, defect at 2π/m)` for every divisor `m` of `n_theta`.
pub fn defect_table(f: &Field) -> Vec<(usize, f64)> {
    let nt = f.grid().n_theta();
    (1..=nt)
        .filter(|m| nt % m == 0)
        .map(|m| (m, invariance_defect(f, (nt / m) as i64)))
        .collect()
}
