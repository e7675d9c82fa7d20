//! Multistart search over seeds, with deduplication modulo symmetries.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::minimize::{class_defects, minimize, SolveReport, Status};
use super::seeds::{seed, SeedSpec};
use super::SolverConfig;
use crate::energy::State;
use crate::error::{Error, Result};
use crate::grid::{Field, PolarGrid};
use crate::symmetry::{project_class, Branch, SymmetryClass, SystemParams};

/// Factors `q` such that the class with `qk` is a subclass of the class with
/// `k`: `q ≡ 1 (mod p)` on the positive branch, `q` odd on the nodal one.
/// Only factors whose class the grid resolves are returned.
pub fn subclass_factors(class: &SymmetryClass, n_theta: usize, count: usize) -> Vec<usize> {
    let stride = match class.branch {
        Branch::Positive => class.p,
        Branch::Nodal => 2,
    };
    (0..)
        .map(|i| 1 + i * stride)
        .take_while(|q| q * class.k <= n_theta)
        .filter(|q| {
            let sub = SymmetryClass {
                k: q * class.k,
                ..*class
            };
            sub.generator_steps(n_theta).is_ok()
        })
        .take(count)
        .collect()
}

/// Permutations of the components that leave the coefficients unchanged.
/// All permutations are tried for `N ≤ 6`; otherwise only block shifts.
pub fn invariant_permutations(params: &SystemParams) -> Vec<Vec<usize>> {
    let n = params.n();
    let candidates: Vec<Vec<usize>> = if n <= 6 {
        let mut all = Vec::new();
        let mut perm: Vec<usize> = (0..n).collect();
        permutations(&mut perm, 0, &mut all);
        all
    } else {
        (0..params.p() as i64)
            .map(|s| (0..n).map(|j| params.shift_in_block(j, s)).collect())
            .collect()
    };
    candidates
        .into_iter()
        .filter(|p| params.is_invariant_under(p, 1e-12))
        .collect()
}

fn permutations(perm: &mut Vec<usize>, start: usize, out: &mut Vec<Vec<usize>>) {
    if start == perm.len() {
        out.push(perm.clone());
        return;
    }
    for i in start..perm.len() {
        perm.swap(start, i);
        permutations(perm, start + 1, out);
        perm.swap(start, i);
    }
}

/// Best match of `b` onto `a` over rotations, the reflection `θ ↦ −θ`,
/// admissible permutations and (nodal) sign flips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// `min_g ‖a − g b‖ / max(‖a‖, ‖b‖)`.
    pub distance: f64,
    pub shift: usize,
    pub reflected: bool,
    /// Component `j` of `a` is matched with component `permutation[j]` of `b`.
    pub permutation: Vec<usize>,
}

/// Per-ring weighted circular cross-correlation `c(s) = Σ w_i a_i[m] b_i[m − s]`.
fn correlation(a: &Field, b: &Field, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let grid = a.grid();
    let nt = grid.n_theta();
    let fwd = planner.plan_fft_forward(nt);
    let inv = planner.plan_fft_inverse(nt);
    let mut acc = vec![Complex64::new(0.0, 0.0); nt];
    for i in 0..grid.n_r() {
        let mut fa: Vec<Complex64> = a.ring(i).iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut fb: Vec<Complex64> = b.ring(i).iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fwd.process(&mut fa);
        fwd.process(&mut fb);
        let w = grid.ring_weight(i);
        for ((c, x), y) in acc.iter_mut().zip(&fa).zip(&fb) {
            *c += x * y.conj() * w;
        }
    }
    inv.process(&mut acc);
    acc.iter().map(|c| c.re / nt as f64).collect()
}

pub fn aligned_distance(
    a: &State,
    b: &State,
    perms: &[Vec<usize>],
    branch: Branch,
) -> Result<Alignment> {
    if a.len() != b.len() {
        return Err(Error::ComponentCount {
            expected: a.len(),
            found: b.len(),
        });
    }
    if !Arc::ptr_eq(a.grid(), b.grid()) && a.grid().spec() != b.grid().spec() {
        return Err(Error::GridMismatch);
    }
    let n = a.len();
    let nt = a.grid().n_theta();
    let na = a.norm();
    let nb = b.norm();
    let scale = na.max(nb).max(1e-300);
    let mut planner = FftPlanner::new();
    let mut best = Alignment {
        distance: f64::INFINITY,
        shift: 0,
        reflected: false,
        permutation: (0..n).collect(),
    };
    for reflected in [false, true] {
        let bb = if reflected {
            b.map(|f| f.reflect(0))
        } else {
            b.clone()
        };
        // corr[j][l][s]
        let corr: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|j| {
                (0..n)
                    .map(|l| correlation(a.component(j), bb.component(l), &mut planner))
                    .collect()
            })
            .collect();
        for perm in perms {
            for s in 0..nt {
                let overlap: f64 = (0..n)
                    .map(|j| {
                        let c = corr[j][perm[j]][s];
                        if branch == Branch::Nodal {
                            c.abs()
                        } else {
                            c
                        }
                    })
                    .sum();
                let d = (na * na + nb * nb - 2.0 * overlap).max(0.0).sqrt() / scale;
                if d < best.distance {
                    best = Alignment {
                        distance: d,
                        shift: s,
                        reflected,
                        permutation: perm.clone(),
                    };
                }
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub start: usize,
    /// Rotation order of the subclass the descent ran in.
    pub subclass_k: usize,
    pub m: usize,
    pub seed: SeedSpec,
    /// Diagnostics; defects are relative to the requested class.
    pub report: SolveReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionSet {
    pub class: SymmetryClass,
    /// Distinct converged solutions, sorted by energy.
    pub solutions: Vec<Solution>,
    /// Aligned distances between the kept solutions.
    pub distances: Vec<Vec<f64>>,
    pub attempted: usize,
    pub converged: usize,
    /// Status of every start, in start order.
    pub statuses: Vec<Status>,
}

fn perturb(state: &State, class: &SymmetryClass, rng: &mut ChaCha8Rng) -> Result<State> {
    let comps = state
        .components()
        .iter()
        .map(|u| {
            let amp = 0.01 * u.max_abs();
            let noise: Vec<f64> = (0..u.values().len())
                .map(|_| amp * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
                .collect();
            Field::from_values(u.grid(), noise).map(|n| u.axpy(1.0, &n))
        })
        .collect::<Result<Vec<_>>>()?;
    project_class(&State::new(comps)?, class)
}

fn run_start(
    grid: &Arc<PolarGrid>,
    params: &SystemParams,
    class: &SymmetryClass,
    factors: &[usize],
    config: &SolverConfig,
    start: usize,
) -> Result<(Solution, Status)> {
    let q = factors[start % factors.len()];
    let m = (start / factors.len()) % config.m_max + 1;
    let sub = SymmetryClass {
        k: q * class.k,
        ..*class
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    rng.set_stream(start as u64);
    let spec = SeedSpec::random(params.p(), m, &mut rng)?;
    let initial = seed(grid, &sub, &spec, params)?;
    let mut report = minimize(params, &sub, &initial, config)?;
    if matches!(report.status, Status::Infeasible(_)) {
        let retry = perturb(&initial, &sub, &mut rng)?;
        report = minimize(params, &sub, &retry, config)?;
    }
    report.defects = class_defects(report.state(), class)?;
    let status = report.status.clone();
    Ok((
        Solution {
            start,
            subclass_k: sub.k,
            m,
            seed: spec,
            report,
        },
        status,
    ))
}

/// Runs `config.starts` descents and keeps the distinct converged ones.
///
/// Start `s` uses the subclass factor `factors[s mod len]` and
/// `m = ⌊s / len⌋ mod m_max + 1`; its RNG stream is `s`. The result does not
/// depend on scheduling.
pub fn multistart(
    grid: &Arc<PolarGrid>,
    params: &SystemParams,
    class: &SymmetryClass,
    config: &SolverConfig,
) -> Result<SolutionSet> {
    config.validate()?;
    class.generator_steps(grid.n_theta())?;
    let factors = subclass_factors(class, grid.n_theta(), config.subclasses);
    let runs = (0..config.starts)
        .into_par_iter()
        .map(|s| run_start(grid, params, class, &factors, config, s))
        .collect::<Result<Vec<_>>>()?;

    let statuses: Vec<Status> = runs.iter().map(|(_, st)| st.clone()).collect();
    let mut converged: Vec<Solution> = runs
        .into_iter()
        .filter(|(_, st)| *st == Status::Converged)
        .map(|(s, _)| s)
        .collect();
    let n_converged = converged.len();
    converged.sort_by(|a, b| {
        a.report
            .energy
            .total_cmp(&b.report.energy)
            .then(a.start.cmp(&b.start))
    });

    let perms = invariant_permutations(params);
    let mut kept: Vec<Solution> = Vec::new();
    for cand in converged {
        let mut distinct = true;
        for k in &kept {
            let al = aligned_distance(k.report.state(), cand.report.state(), &perms, class.branch)?;
            if al.distance < config.dedup_distance {
                distinct = false;
                break;
            }
        }
        if distinct {
            kept.push(cand);
        }
    }
    let n = kept.len();
    let mut distances = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = aligned_distance(
                kept[i].report.state(),
                kept[j].report.state(),
                &perms,
                class.branch,
            )?
            .distance;
            distances[i][j] = d;
            distances[j][i] = d;
        }
    }
    Ok(SolutionSet {
        class: *class,
        solutions: kept,
        distances,
        attempted: config.starts,
        converged: n_converged,
        statuses,
    })
}
