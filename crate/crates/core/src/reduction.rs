//! Reduction of the symmetric 2-coupled system to one scalar equation with
//! the anisotropic operator `Δ_k` and the antipodal coupling
//! `u²(x)u²(−x)`, plus polarization and symmetry diagnostics.
//!
//! A reduced field `û` lives on a grid with `n_φ` angular nodes; the mapped
//! pair `Ψ_k û` lives on the grid with the same radii and `k·n_φ` nodes,
//! where `(Ψ_k û)_1(r, θ) = û(r, kθ)` and `(Ψ_k û)_2(r, θ) = û(r, kθ − π)`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{energy_terms, pde_residuals, EnergyTerms, State};
use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec, HelmholtzSolver, PolarGrid};
use crate::solver::descent::{descend, DescentProblem};
use crate::solver::{report, SolveReport, SolverConfig, Status};
use crate::symmetry::{
    defect_table, invariance_defect, minimal_period, Branch, Period, SymmetryClass, SystemParams,
};

/// `−Δ_k u + u = (u⁺)³ + β u u²(−x)` on the grid of `û`.
#[derive(Debug, Clone)]
pub struct ReducedProblem {
    k: usize,
    beta: f64,
    grid: Arc<PolarGrid>,
    full: Arc<PolarGrid>,
}

impl ReducedProblem {
    pub fn new(grid: &Arc<PolarGrid>, k: usize, beta: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParams("k must be positive".into()));
        }
        if !(beta < 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParams(format!(
                "reduction needs beta < 0, got {beta}"
            )));
        }
        let spec = grid.spec();
        if spec.n_theta % 2 != 0 {
            return Err(Error::InvalidGrid(
                "reduced grid needs an even n_theta".into(),
            ));
        }
        let full = PolarGrid::shared(GridSpec {
            n_theta: k * spec.n_theta,
            alignment_order: 2 * k,
            ..*spec
        })?;
        Ok(Self {
            k,
            beta,
            grid: Arc::clone(grid),
            full,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn grid(&self) -> &Arc<PolarGrid> {
        &self.grid
    }
    /// Grid carrying `Ψ_k û`.
    pub fn full_grid(&self) -> &Arc<PolarGrid> {
        &self.full
    }
    /// `λ = μ = 1`, `β₁₂ = β`, `p = 2`.
    pub fn params(&self) -> SystemParams {
        SystemParams::two_coupled(1.0, 1.0, self.beta)
    }
    pub fn class(&self) -> SymmetryClass {
        SymmetryClass::positive(self.k, 2)
    }

    fn check(&self, u: &Field) -> Result<()> {
        self.grid.check(u)
    }
}

pub fn psi_k(prob: &ReducedProblem, u: &Field) -> Result<State> {
    prob.check(u)?;
    let n_phi = prob.grid.n_theta();
    let nt = prob.full.n_theta();
    let half = n_phi / 2;
    let src = u.values();
    let mut first = Vec::with_capacity(prob.full.len());
    let mut second = Vec::with_capacity(prob.full.len());
    for i in 0..prob.grid.n_r() {
        let row = &src[i * n_phi..(i + 1) * n_phi];
        for m in 0..nt {
            first.push(row[m % n_phi]);
            second.push(row[(m + n_phi - half) % n_phi]);
        }
    }
    State::new(vec![
        Field::from_values(&prob.full, first)?,
        Field::from_values(&prob.full, second)?,
    ])
}

/// Recovers `û` from the first component; errors if the pair is not in the
/// image of `Ψ_k` (exactly).
pub fn psi_k_inverse(prob: &ReducedProblem, state: &State) -> Result<Field> {
    if state.len() != 2 {
        return Err(Error::ComponentCount {
            expected: 2,
            found: state.len(),
        });
    }
    prob.full.check(state.component(0))?;
    let n_phi = prob.grid.n_theta();
    let nt = prob.full.n_theta();
    let src = state.component(0).values();
    let values: Vec<f64> = (0..prob.grid.n_r())
        .flat_map(|i| src[i * nt..i * nt + n_phi].iter().copied())
        .collect();
    let u = Field::from_values(&prob.grid, values)?;
    if psi_k(prob, &u)? != *state {
        return Err(Error::InvalidParams(
            "state is not in the image of the reduction map".into(),
        ));
    }
    Ok(u)
}

/// Pieces of `Ê(u) = G + mass − quartic − coupling`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedTerms {
    /// `∫ (u_r² + (k²/r²) u_θ²)`.
    pub gradient: f64,
    /// `∫ u²`.
    pub mass: f64,
    /// `½ ∫ (u⁺)⁴`.
    pub quartic: f64,
    /// `½ β ∫ u²(x) u²(−x)`.
    pub coupling: f64,
}

impl ReducedTerms {
    pub fn total(&self) -> f64 {
        self.gradient + self.mass - self.quartic - self.coupling
    }
    /// `G + ∫u²`, the part of `Ê` quadratic in `u`.
    pub fn quadratic(&self) -> f64 {
        self.gradient + self.mass
    }
    /// `D(u) = ∫(u⁺)⁴ + β ∫u²(x)u²(−x)`.
    pub fn interaction(&self) -> f64 {
        2.0 * (self.quartic + self.coupling)
    }
}

fn pos4(v: f64) -> f64 {
    let q = v.max(0.0);
    let q2 = q * q;
    q2 * q2
}

/// `∫ u²(x) u²(−x)`.
fn antipodal_overlap(u: &Field) -> f64 {
    let sq = u.map(|v| v * v);
    sq.dot(&sq.antipodal())
}

pub fn reduced_terms(prob: &ReducedProblem, u: &Field) -> Result<ReducedTerms> {
    prob.check(u)?;
    Ok(ReducedTerms {
        gradient: u.dirichlet_form(prob.k),
        mass: u.norm_sq(),
        quartic: 0.5 * u.map(pos4).integral(),
        coupling: 0.5 * prob.beta * antipodal_overlap(u),
    })
}

pub fn energy_reduced(prob: &ReducedProblem, u: &Field) -> Result<f64> {
    Ok(reduced_terms(prob, u)?.total())
}

/// `Ê(a) − Ê(b)` from term differences.
pub fn energy_reduced_difference(prob: &ReducedProblem, a: &Field, b: &Field) -> Result<f64> {
    prob.check(a)?;
    prob.check(b)?;
    let d = a.axpy(-1.0, b);
    let s = a.axpy(1.0, b);
    let sq_diff = a.zip_map(b, |x, y| (x - y) * (x + y));
    let quartic = a
        .zip_map(b, |x, y| {
            let (qx, qy) = (x.max(0.0), y.max(0.0));
            (qx - qy) * (qx + qy) * (qx * qx + qy * qy)
        })
        .integral();
    let a2 = a.map(|v| v * v);
    let b2 = b.map(|v| v * v);
    // a²a₋² − b²b₋² = (a² − b²) a₋² + b² (a₋² − b₋²)
    let overlap = sq_diff.dot(&a2.antipodal()) + b2.dot(&sq_diff.antipodal());
    Ok(d.dirichlet_bilinear(&s, prob.k) + sq_diff.integral()
        - 0.5 * quartic
        - 0.5 * prob.beta * overlap)
}

/// `−Δ_k u + u − (u⁺)³ − β u u²(−x)`; the L² gradient of `Ê` is twice this.
pub fn reduced_equation(prob: &ReducedProblem, u: &Field) -> Result<Field> {
    prob.check(u)?;
    let anti = u.antipodal();
    let local = u.zip_map(&anti, |v, w| {
        let q = v.max(0.0);
        v - q * q * q - prob.beta * v * w * w
    });
    Ok(local.axpy(-1.0, &u.laplacian_k(prob.k)))
}

/// `‖−Δ_k u + u − (u⁺)³ − β u u²(−x)‖_{L²}`.
pub fn reduced_residual(prob: &ReducedProblem, u: &Field) -> Result<f64> {
    Ok(reduced_equation(prob, u)?.l2_norm())
}

/// `(G + ∫u²) − D(u)`, which vanishes on the reduced Nehari set.
pub fn reduced_nehari_residual(prob: &ReducedProblem, u: &Field) -> Result<f64> {
    let t = reduced_terms(prob, u)?;
    Ok(t.quadratic() - t.interaction())
}

/// The unique `λ > 0` with `λu` on the reduced Nehari set:
/// `λ = √((G + ∫u²) / D(u))`, infeasible when `D(u) ≤ 0`.
pub fn nehari_scale_reduced(prob: &ReducedProblem, u: &Field) -> Result<f64> {
    let t = reduced_terms(prob, u)?;
    if !(t.quadratic() > 0.0) {
        return Err(Error::ZeroComponent(0));
    }
    let d = t.interaction();
    if !(d > 0.0) {
        return Err(Error::Infeasible(format!("D(u) = {d:e} is not positive")));
    }
    Ok((t.quadratic() / d).sqrt())
}

/// Ratios `full / reduced` per term of the energy at `Ψ_k u`, and the PDE
/// residuals on both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackReport {
    pub full: EnergyTerms,
    pub reduced: ReducedTerms,
    /// `None` where the reduced term vanishes.
    pub ratios: [Option<f64>; 4],
    pub full_energy: f64,
    pub reduced_energy: f64,
    /// `max_j ‖∇E(Ψ_k u)_j‖`.
    pub full_residual: f64,
    pub reduced_residual: f64,
}

pub fn pullback_consistency(prob: &ReducedProblem, u: &Field) -> Result<PullbackReport> {
    let mapped = psi_k(prob, u)?;
    let params = prob.params();
    let full = energy_terms(&params, &mapped, Branch::Positive)?;
    let reduced = reduced_terms(prob, u)?;
    let ratio = |a: f64, b: f64| if b != 0.0 { Some(a / b) } else { None };
    Ok(PullbackReport {
        ratios: [
            ratio(full.gradient, reduced.gradient),
            ratio(full.mass, reduced.mass),
            ratio(full.quartic, reduced.quartic),
            ratio(full.coupling, reduced.coupling),
        ],
        full_energy: full.total(),
        reduced_energy: reduced.total(),
        full_residual: pde_residuals(&params, &mapped, Branch::Positive)?
            .into_iter()
            .fold(0.0, f64::max),
        reduced_residual: reduced_residual(prob, u)?,
        full,
        reduced,
    })
}

struct Reduced<'a> {
    prob: &'a ReducedProblem,
    pre: HelmholtzSolver,
}

fn single(u: Field) -> State {
    State::new(vec![u]).expect("one component")
}

impl DescentProblem for Reduced<'_> {
    fn energy(&self, u: &State) -> Result<f64> {
        energy_reduced(self.prob, u.component(0))
    }
    fn energy_difference(&self, a: &State, b: &State) -> Result<f64> {
        energy_reduced_difference(self.prob, a.component(0), b.component(0))
    }
    fn gradient(&self, u: &State) -> Result<State> {
        Ok(single(
            reduced_equation(self.prob, u.component(0))?.scale(2.0),
        ))
    }
    fn retract(&self, u: &State) -> Result<State> {
        let t = nehari_scale_reduced(self.prob, u.component(0))?;
        Ok(u.scale(t))
    }
    fn precondition(&self, g: &State) -> Result<State> {
        Ok(single(self.pre.solve(g.component(0))?.scale(0.5)))
    }
}

/// Converged reduced minimizer with its image under `Ψ_k`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedReport {
    #[serde(skip)]
    pub field: Option<Field>,
    pub k: usize,
    pub start: usize,
    pub energy: f64,
    pub residual: f64,
    pub nehari_residual: f64,
    pub iterations: usize,
    pub status: Status,
    pub converged: bool,
    pub norm: f64,
    pub foliated_schwarz_defect: f64,
    /// Energies of every converged start, sorted.
    pub local_minima: Vec<f64>,
    pub energy_trace: Vec<f64>,
    /// Full-system diagnostics of `Ψ_k û`.
    pub mapped: SolveReport,
}

impl ReducedReport {
    pub fn field(&self) -> &Field {
        self.field.as_ref().expect("report carries its field")
    }
}

fn radial_profile(spec: &GridSpec, r: f64) -> f64 {
    if spec.is_ball() {
        1.0 - (r / spec.r_outer).powi(2)
    } else {
        (PI * (r - spec.r_inner) / (spec.r_outer - spec.r_inner)).sin()
    }
}

/// Smooth field concentrated around one angle. Start 0 is centered at
/// `θ = 0` without perturbation; the others draw a center node, a width and
/// three perturbing Fourier modes from stream `start`.
pub fn reduced_seed(prob: &ReducedProblem, seed: u64, start: usize) -> Field {
    let grid = &prob.grid;
    let spec = *grid.spec();
    let (center, kappa, modes) = if start == 0 {
        (0.0, 2.0, Vec::new())
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(start as u64);
        let center = grid.theta(rng.gen_range(0..grid.n_theta()));
        let kappa = rng.gen_range(0.5..3.0);
        let modes: Vec<(f64, f64)> = (1..=3)
            .map(|n| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                (0.3 * a / n as f64, 0.3 * b / n as f64)
            })
            .collect();
        (center, kappa, modes)
    };
    Field::from_fn(grid, |r, t| {
        let pert: f64 = modes
            .iter()
            .enumerate()
            .map(|(n, (a, b))| {
                let w = (n + 1) as f64 * t;
                a * w.cos() + b * w.sin()
            })
            .sum();
        radial_profile(&spec, r) * (kappa * ((t - center).cos() - 1.0)).exp() * (1.0 + pert)
    })
}

/// Lowest-energy converged reduced minimizer over `config.starts` seeds.
pub fn ground_state_reduced(prob: &ReducedProblem, config: &SolverConfig) -> Result<ReducedReport> {
    config.validate()?;
    let starts = config.starts.max(1);
    let problem = Reduced {
        prob,
        pre: HelmholtzSolver::new(&prob.grid, prob.k, 1.0)?,
    };
    let runs = (0..starts)
        .into_par_iter()
        .map(|s| {
            let seed = single(reduced_seed(prob, config.rng_seed, s));
            descend(&problem, &seed, config).map(|d| (s, d))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut local_minima: Vec<f64> = runs
        .iter()
        .filter(|(_, d)| d.status == Status::Converged)
        .map(|(_, d)| d.trace.last().copied().unwrap_or(f64::INFINITY))
        .collect();
    local_minima.sort_by(f64::total_cmp);
    let best = runs
        .into_iter()
        .filter(|(_, d)| !d.trace.is_empty())
        .min_by(|(sa, a), (sb, b)| {
            let key = |d: &crate::solver::descent::Descent| {
                (d.status != Status::Converged, *d.trace.last().unwrap())
            };
            let (ca, ea) = key(a);
            let (cb, eb) = key(b);
            ca.cmp(&cb).then(ea.total_cmp(&eb)).then(sa.cmp(sb))
        })
        .ok_or_else(|| {
            Error::Infeasible("no start could be scaled onto the reduced Nehari set".into())
        })?;
    let (start, d) = best;
    let u = d.state.into_components().remove(0);
    let mapped_state = psi_k(prob, &u)?;
    let mapped = report(
        &prob.params(),
        &prob.class(),
        mapped_state,
        d.iterations,
        d.status.clone(),
        Vec::new(),
    )?;
    Ok(ReducedReport {
        k: prob.k,
        start,
        energy: energy_reduced(prob, &u)?,
        residual: reduced_residual(prob, &u)?,
        nehari_residual: reduced_nehari_residual(prob, &u)?,
        iterations: d.iterations,
        converged: d.status == Status::Converged,
        status: d.status,
        norm: u.l2_norm(),
        foliated_schwarz_defect: foliated_schwarz_defect(&u),
        local_minima,
        energy_trace: d.trace,
        mapped,
        field: Some(u),
    })
}

/// Closed half-space bounded by the line through the origin at angle
/// `axis_index · Δθ / 2`; the reflection maps node `m` to
/// `(axis_index − m) mod n_theta`. `H` is the side reached by turning
/// counterclockwise from the axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub axis_index: i64,
}

impl HalfSpace {
    /// `Some(true)` inside `H`, `Some(false)` outside, `None` on `∂H`.
    pub fn side(&self, m: usize, n_theta: usize) -> Option<bool> {
        let twice = (2 * m as i64 - self.axis_index).rem_euclid(2 * n_theta as i64);
        if twice == 0 || twice == n_theta as i64 {
            None
        } else {
            Some(twice < n_theta as i64)
        }
    }
}

pub fn polarize(u: &Field, h: HalfSpace) -> Field {
    let nt = u.grid().n_theta();
    let mirror = u.reflect(h.axis_index);
    let sides: Vec<Option<bool>> = (0..nt).map(|m| h.side(m, nt)).collect();
    let values = u
        .values()
        .iter()
        .zip(mirror.values())
        .enumerate()
        .map(|(idx, (&a, &b))| match sides[idx % nt] {
            Some(true) => a.max(b),
            Some(false) => a.min(b),
            None => a,
        })
        .collect();
    Field::from_values(u.grid(), values).expect("polarization keeps values finite")
}

/// `G`, `P`, `Q` of a field and of its polarization, with
/// `Ê = G + P + ½Q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationReport {
    /// `∫ (u_r² + (k²/r²) u_θ²)`.
    pub g: [f64; 2],
    /// `∫ u² − ½ ∫ (u⁺)⁴`.
    pub p: [f64; 2],
    /// `−β ∫ u²(x) u²(−x)`.
    pub q: [f64; 2],
    pub energy: [f64; 2],
    /// `∫u²`, `∫(u⁺)⁴` and `Ê(u)` in absolute value, for relative tolerances.
    pub scale: f64,
}

impl PolarizationReport {
    /// Names of the violated relations `Ê(u_H) ≤ Ê(u)`, `G(u_H) ≤ G(u)`,
    /// `Q(u_H) ≤ Q(u)` (slack `tol·scale`) and `P(u_H) = P(u)` (to
    /// `p_tol·scale`).
    pub fn violations(&self, tol: f64, p_tol: f64) -> Vec<&'static str> {
        let s = self.scale;
        let mut out = Vec::new();
        if self.energy[1] > self.energy[0] + tol * s {
            out.push("energy");
        }
        if self.g[1] > self.g[0] + tol * s {
            out.push("gradient");
        }
        if self.q[1] > self.q[0] + tol * s {
            out.push("interaction");
        }
        if (self.p[1] - self.p[0]).abs() > p_tol * s {
            out.push("local");
        }
        out
    }
}

pub fn polarization_inequality_check(
    prob: &ReducedProblem,
    u: &Field,
    h: HalfSpace,
) -> Result<PolarizationReport> {
    prob.check(u)?;
    let uh = polarize(u, h);
    let parts = |f: &Field| -> Result<(f64, f64, f64, f64)> {
        let t = reduced_terms(prob, f)?;
        Ok((t.gradient, t.mass - t.quartic, -2.0 * t.coupling, t.total()))
    };
    let a = parts(u)?;
    let b = parts(&uh)?;
    let t = reduced_terms(prob, u)?;
    Ok(PolarizationReport {
        g: [a.0, b.0],
        p: [a.1, b.1],
        q: [a.2, b.2],
        energy: [a.3, b.3],
        scale: t.mass + 2.0 * t.quartic + a.3.abs() + t.gradient,
    })
}

/// Total angular increase met when walking from the direction `e` to its
/// opposite along both half circles, on one ring.
fn ring_violation(row: &[f64], e: usize) -> f64 {
    let nt = row.len();
    let half = nt / 2;
    let mut total = 0.0;
    for dir in [1, nt - 1] {
        let mut prev = row[e];
        for s in 1..=half {
            let cur = row[(e + s * dir) % nt];
            if cur > prev {
                total += cur - prev;
            }
            prev = cur;
        }
    }
    total
}

/// `min_e (Σ_i |ring_i| v_i(e)²)^{1/2}` where `v_i(e)` is the angular
/// monotonicity violation of ring `i` about the grid direction `e` and
/// `|ring_i|` its measure. Zero iff `u` is discretely foliated Schwarz
/// symmetric about some grid direction.
pub fn foliated_schwarz_defect(u: &Field) -> f64 {
    let grid = u.grid();
    let nt = grid.n_theta();
    (0..nt)
        .into_par_iter()
        .map(|e| {
            (0..grid.n_r())
                .map(|i| {
                    let v = ring_violation(u.ring(i), e);
                    grid.ring_weight(i) * nt as f64 * v * v
                })
                .sum::<f64>()
                .sqrt()
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Minimal periods of the reduced ground state and of its image.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimalPeriodReport {
    pub k: usize,
    pub ground: ReducedReport,
    pub reduced_period: Period,
    pub component_periods: Vec<Period>,
    /// Largest defect of a mapped component at `2π/k`.
    pub defect_at_period: f64,
    /// Smallest defect of a mapped component at `2π/(mk)`, `m ≥ 2`.
    pub min_refined_defect: f64,
    /// `(m, defect at 2π/m)` of the first mapped component.
    pub defect_table: Vec<(usize, f64)>,
    pub passed: bool,
}

/// Detection tolerance for a period.
pub const PERIOD_TOL: f64 = 1e-6;
/// Smallest defect that counts as broken symmetry.
pub const BREAKING_TOL: f64 = 0.01;

pub fn minimal_period_theorem_check(
    prob: &ReducedProblem,
    config: &SolverConfig,
) -> Result<MinimalPeriodReport> {
    let ground = ground_state_reduced(prob, config)?;
    let mapped = psi_k(prob, ground.field())?;
    let k = prob.k;
    let nt = prob.full.n_theta();
    let mut defect_at_period: f64 = 0.0;
    let mut min_refined = f64::INFINITY;
    let mut component_periods = Vec::new();
    for u in mapped.components() {
        component_periods.push(minimal_period(u, PERIOD_TOL));
        defect_at_period = defect_at_period.max(invariance_defect(u, (nt / k) as i64));
        for m in (2..=nt / k).filter(|m| nt % (m * k) == 0) {
            min_refined = min_refined.min(invariance_defect(u, (nt / (m * k)) as i64));
        }
    }
    let reduced_period = minimal_period(ground.field(), PERIOD_TOL);
    let passed = ground.converged
        && reduced_period == Period::Fraction(1)
        && component_periods.iter().all(|p| *p == Period::Fraction(k))
        && defect_at_period < PERIOD_TOL
        && min_refined > BREAKING_TOL;
    Ok(MinimalPeriodReport {
        k,
        reduced_period,
        component_periods,
        defect_at_period,
        min_refined_defect: min_refined,
        defect_table: defect_table(mapped.component(0)),
        passed,
        ground,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn problem(k: usize) -> ReducedProblem {
        let g = PolarGrid::shared(GridSpec::ball(1.0, 16, 24, 4)).unwrap();
        ReducedProblem::new(&g, k, -1.0).unwrap()
    }

    fn random_smooth(g: &Arc<PolarGrid>, rng: &mut ChaCha8Rng) -> Field {
        let c: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Field::from_fn(g, move |r, t| {
            (1.0 - r * r)
                * (c[0]
                    + c[1] * t.cos()
                    + c[2] * t.sin()
                    + c[3] * (2.0 * t).cos()
                    + c[4] * (3.0 * t).sin()
                    + c[5] * r
                    + c[6] * r * t.cos())
        })
    }

    #[test]
    fn rejects_bad_problems() {
        let g = PolarGrid::shared(GridSpec::ball(1.0, 4, 12, 4)).unwrap();
        assert!(ReducedProblem::new(&g, 0, -1.0).is_err());
        assert!(ReducedProblem::new(&g, 1, 0.5).is_err());
        assert!(ReducedProblem::new(&g, 1, f64::NAN).is_err());
    }

    #[test]
    fn psi_maps_into_the_class_and_inverts() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in 1..=3 {
            let prob = problem(k);
            let u = random_smooth(prob.grid(), &mut rng);
            let s = psi_k(&prob, &u).unwrap();
            let steps = (prob.full_grid().n_theta() / (2 * k)) as i64;
            assert_eq!(s.component(1), &s.component(0).rotate(steps));
            assert_eq!(s.component(0), &s.component(0).rotate(2 * steps));
            assert_eq!(psi_k_inverse(&prob, &s).unwrap(), u);
        }
    }

    #[test]
    fn psi_of_cosine_is_opposite_pair() {
        let prob = problem(2);
        let u = Field::from_fn(prob.grid(), |r, t| t.cos() * (1.0 - r * r));
        let s = psi_k(&prob, &u).unwrap();
        let expected = Field::from_fn(prob.full_grid(), |r, t| (2.0 * t).cos() * (1.0 - r * r));
        assert!(s.component(0).axpy(-1.0, &expected).max_abs() < 1e-12);
        assert!(s.component(1).axpy(1.0, &expected).max_abs() < 1e-12);
    }

    #[test]
    fn radial_energy_ignores_k() {
        let u1 = Field::from_fn(problem(1).grid(), |r, _| (1.0 - r * r) * 2.0);
        let e1 = energy_reduced(&problem(1), &u1).unwrap();
        let e3 = energy_reduced(&problem(3), &u1).unwrap();
        assert!((e1 - e3).abs() <= 1e-12 * e1.abs());
        assert_eq!(
            energy_reduced(&problem(2), &Field::zeros(problem(2).grid())).unwrap(),
            0.0
        );
    }

    #[test]
    fn terms_match_quadrature_oracle() {
        let prob = problem(2);
        let g = prob.grid();
        let u = Field::from_fn(g, |r, t| (1.0 - r * r) * (1.0 + 0.5 * t.cos()) - 0.2);
        let t = reduced_terms(&prob, &u).unwrap();
        let (nr, nt) = (g.n_r(), g.n_theta());
        let mut quartic = 0.0;
        let mut overlap = 0.0;
        let mut mass = 0.0;
        for i in 0..nr {
            for m in 0..nt {
                let w = g.ring_weight(i);
                let v = u.at(i, m);
                let a = u.at(i, (m + nt / 2) % nt);
                mass += w * v * v;
                quartic += w * v.max(0.0).powi(4);
                overlap += w * v * v * a * a;
            }
        }
        assert!((t.mass - mass).abs() < 1e-12 * mass);
        assert!((t.quartic - 0.5 * quartic).abs() < 1e-12 * quartic);
        assert!((t.coupling + 0.5 * overlap).abs() < 1e-12 * overlap);
        assert!((t.gradient - u.dirichlet_form(2)).abs() == 0.0);
    }

    #[test]
    fn difference_and_gradient_are_consistent() {
        let prob = problem(2);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let u = random_smooth(prob.grid(), &mut rng);
            let v = random_smooth(prob.grid(), &mut rng);
            let direct = energy_reduced(&prob, &u).unwrap() - energy_reduced(&prob, &v).unwrap();
            let diff = energy_reduced_difference(&prob, &u, &v).unwrap();
            assert!((direct - diff).abs() < 1e-10 * (1.0 + direct.abs()));
            let h = 1e-5;
            let fd = (energy_reduced(&prob, &u.axpy(h, &v)).unwrap()
                - energy_reduced(&prob, &u.axpy(-h, &v)).unwrap())
                / (2.0 * h);
            let an = 2.0 * reduced_equation(&prob, &u).unwrap().dot(&v);
            assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "{fd} {an}");
        }
    }

    #[test]
    fn scaling_lands_on_the_nehari_set() {
        let prob = problem(1);
        let u = reduced_seed(&prob, 0, 0);
        let l = nehari_scale_reduced(&prob, &u).unwrap();
        let r = reduced_nehari_residual(&prob, &u.scale(l)).unwrap();
        let q = reduced_terms(&prob, &u.scale(l)).unwrap().quadratic();
        assert!(r.abs() <= 1e-12 * q);
    }

    #[test]
    fn antipodally_symmetric_fields_are_infeasible() {
        let prob = problem(1);
        let radial = Field::from_fn(prob.grid(), |r, _| 1.0 - r * r);
        assert!(matches!(
            nehari_scale_reduced(&prob, &radial),
            Err(Error::Infeasible(_))
        ));
        let even = Field::from_fn(prob.grid(), |r, t| (1.0 - r * r) * (2.0 * t).cos().abs());
        assert!(matches!(
            nehari_scale_reduced(&prob, &even),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn pullback_ratios_are_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for k in 1..=3 {
            let prob = problem(k);
            let u = random_smooth(prob.grid(), &mut rng);
            let rep = pullback_consistency(&prob, &u).unwrap();
            for r in rep.ratios {
                assert!((r.unwrap() - 1.0).abs() < 1e-10, "{rep:?}");
            }
            assert!((rep.full_residual - rep.reduced_residual).abs() < 1e-9 * rep.reduced_residual);
        }
        let z = pullback_consistency(&problem(1), &Field::zeros(problem(1).grid())).unwrap();
        assert_eq!((z.full_energy, z.reduced_energy), (0.0, 0.0));
    }

    #[test]
    fn half_space_sides() {
        let h = HalfSpace { axis_index: 0 };
        assert_eq!(h.side(0, 12), None);
        assert_eq!(h.side(6, 12), None);
        assert_eq!(h.side(3, 12), Some(true));
        assert_eq!(h.side(9, 12), Some(false));
        let between = HalfSpace { axis_index: 1 };
        assert_eq!(between.side(0, 12), Some(false));
        assert_eq!(between.side(1, 12), Some(true));
    }

    fn random_positive(g: &Arc<PolarGrid>, rng: &mut ChaCha8Rng) -> Field {
        let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Field::from_fn(g, move |r, t| {
            (1.0 - r * r)
                * (c[0] * t.cos()
                    + c[1] * t.sin()
                    + c[2] * (2.0 * t).cos()
                    + c[3] * r * (3.0 * t).sin())
                .exp()
        })
    }

    #[test]
    fn polarization_properties() {
        let prob = problem(2);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let u = random_positive(prob.grid(), &mut rng);
            let h = HalfSpace {
                axis_index: rng.gen_range(0..48),
            };
            let uh = polarize(&u, h);
            assert_eq!(polarize(&uh, h), uh);
            let nt = 24;
            for i in 0..prob.grid().n_r() {
                for m in 0..nt {
                    let s = (h.axis_index - m as i64).rem_euclid(nt as i64) as usize;
                    let mut a = [u.at(i, m), u.at(i, s)];
                    let mut b = [uh.at(i, m), uh.at(i, s)];
                    a.sort_by(f64::total_cmp);
                    b.sort_by(f64::total_cmp);
                    assert_eq!(a, b);
                }
            }
            let rep = polarization_inequality_check(&prob, &u, h).unwrap();
            assert!(rep.violations(1e-12, 1e-12).is_empty(), "{rep:?}");
        }
        let sym = Field::from_fn(prob.grid(), |r, t| (1.0 - r) * t.cos());
        assert_eq!(polarize(&sym, HalfSpace { axis_index: 0 }), sym);
    }

    #[test]
    fn interaction_can_grow_for_signed_fields() {
        // nodes 0..4 at right angles; the axis at 45° pairs 0 with 1 and 2 with 3
        let g = PolarGrid::shared(GridSpec::ball(1.0, 1, 4, 4)).unwrap();
        let prob = ReducedProblem::new(&g, 1, -1.0).unwrap();
        let u = Field::from_values(&g, vec![1.0, -2.0, 2.0, 1.0]).unwrap();
        let rep = polarization_inequality_check(&prob, &u, HalfSpace { axis_index: 1 }).unwrap();
        assert!(rep.q[1] > 2.0 * rep.q[0]);
        let pos = u.map(f64::abs);
        let rep = polarization_inequality_check(&prob, &pos, HalfSpace { axis_index: 1 }).unwrap();
        assert!(rep.q[1] <= rep.q[0]);
    }

    #[test]
    fn foliated_schwarz_examples() {
        let g = PolarGrid::shared(GridSpec::ball(1.0, 8, 32, 4)).unwrap();
        let b = |r: f64| 1.0 - r * r;
        assert!(foliated_schwarz_defect(&Field::from_fn(&g, move |r, t| t.cos() * b(r))) < 1e-14);
        assert!(foliated_schwarz_defect(&Field::from_fn(&g, move |r, _| b(r))) == 0.0);
        let two = Field::from_fn(&g, move |r, t| (2.0 * t).cos() * b(r));
        assert!(foliated_schwarz_defect(&two) > 0.1 * two.l2_norm());
        // an axis between two nodes
        let off = Field::from_fn(&g, move |r, t| (t - PI / 32.0).cos() * b(r));
        assert!(foliated_schwarz_defect(&off) < 1e-14);
    }

    #[test]
    fn ground_state_k1_breaks_symmetry() {
        let g = PolarGrid::shared(GridSpec::ball(1.0, 16, 32, 4)).unwrap();
        let prob = ReducedProblem::new(&g, 1, -1.0).unwrap();
        let config = SolverConfig {
            starts: 3,
            ..SolverConfig::default()
        };
        let rep = ground_state_reduced(&prob, &config).unwrap();
        assert!(rep.converged, "{:?}", rep.status);
        assert!(rep.residual <= 1e-8);
        assert!(rep.local_minima.iter().all(|e| *e >= rep.energy));
        assert!(rep.mapped.nehari_residual.abs() < 1e-6);
        assert!(rep.mapped.defects.refined > 0.01);
        assert!(rep.mapped.gradient_norm < 1e-7);
    }
}
