//! Energies of the coupled system, their gradients, Nehari residuals and the
//! componentwise Nehari rescaling.
//!
//! With `q(u) = u⁺` on the positive branch and `q(u) = u` on the nodal one,
//!
//! ```text
//! E(U) = Σ_j ½‖u_j‖_j² − (μ_j/4)∫q(u_j)⁴ − ½ Σ_{i<j} β_ij ∫u_i²u_j²
//! ```
//!
//! where `‖u‖_j² = ∫|∇u|² + λ_j u²` uses the grid's Dirichlet form.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, PolarGrid};
pub use crate::symmetry::Branch;
use crate::symmetry::SystemParams;

/// An `N`-tuple of fields on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    components: Vec<Field>,
}

impl State {
    pub fn new(components: Vec<Field>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::ComponentCount {
                expected: 1,
                found: 0,
            });
        };
        if components.iter().any(|c| !c.same_grid(first)) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { components })
    }

    pub fn zeros(grid: &Arc<PolarGrid>, n: usize) -> Self {
        Self {
            components: vec![Field::zeros(grid); n.max(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
    pub fn grid(&self) -> &Arc<PolarGrid> {
        self.components[0].grid()
    }
    pub fn component(&self, j: usize) -> &Field {
        &self.components[j]
    }
    pub fn components(&self) -> &[Field] {
        &self.components
    }
    pub fn into_components(self) -> Vec<Field> {
        self.components
    }

    pub fn map(&self, f: impl Fn(&Field) -> Field) -> State {
        Self {
            components: self.components.iter().map(f).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> State {
        self.map(|c| c.scale(s))
    }

    /// Componentwise `t_j u_j`.
    pub fn scale_each(&self, t: &[f64]) -> State {
        Self {
            components: self
                .components
                .iter()
                .zip(t)
                .map(|(c, s)| c.scale(*s))
                .collect(),
        }
    }

    pub fn axpy(&self, s: f64, other: &State) -> State {
        Self {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.axpy(s, b))
                .collect(),
        }
    }

    pub fn rotate(&self, steps: i64) -> State {
        self.map(|c| c.rotate(steps))
    }

    /// `Σ_j ⟨u_j, v_j⟩`.
    pub fn dot(&self, other: &State) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.dot(b))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(&self, other: &State) -> f64 {
        self.axpy(-1.0, other).norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .map(Field::max_abs)
            .fold(0.0, f64::max)
    }

    fn check(&self, params: &SystemParams) -> Result<()> {
        if self.len() != params.n() {
            return Err(Error::ComponentCount {
                expected: params.n(),
                found: self.len(),
            });
        }
        Ok(())
    }
}

fn quartic_base(branch: Branch, v: f64) -> f64 {
    match branch {
        Branch::Positive => v.max(0.0),
        Branch::Nodal => v,
    }
}

/// `∫ q(u)⁴`, evaluated as `(q²)²`.
fn quartic_integral(u: &Field, branch: Branch) -> f64 {
    u.map(|v| {
        let q = quartic_base(branch, v);
        let q2 = q * q;
        q2 * q2
    })
    .integral()
}

fn squares(u: &Field) -> Field {
    u.map(|v| v * v)
}

/// Individual pieces of the energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    /// `½ Σ_j ∫|∇u_j|²`.
    pub gradient: f64,
    /// `½ Σ_j λ_j ∫u_j²`.
    pub mass: f64,
    /// `Σ_j (μ_j/4) ∫q(u_j)⁴`.
    pub quartic: f64,
    /// `½ Σ_{i<j} β_ij ∫u_i²u_j²`.
    pub coupling: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.gradient + self.mass - self.quartic - self.coupling
    }
}

pub fn energy_terms(params: &SystemParams, state: &State, branch: Branch) -> Result<EnergyTerms> {
    state.check(params)?;
    let sq: Vec<Field> = state.components().iter().map(squares).collect();
    let mut terms = EnergyTerms {
        gradient: 0.0,
        mass: 0.0,
        quartic: 0.0,
        coupling: 0.0,
    };
    for (j, u) in state.components().iter().enumerate() {
        terms.gradient += 0.5 * u.dirichlet_form(1);
        terms.mass += 0.5 * params.lambda()[j] * sq[j].integral();
        terms.quartic += 0.25 * params.mu()[j] * quartic_integral(u, branch);
        for i in 0..j {
            let b = params.beta(i, j);
            if b != 0.0 {
                terms.coupling += 0.5 * b * sq[i].dot(&sq[j]);
            }
        }
    }
    Ok(terms)
}

pub fn energy(params: &SystemParams, state: &State, branch: Branch) -> Result<f64> {
    Ok(energy_terms(params, state, branch)?.total())
}

pub fn energy_positive(params: &SystemParams, state: &State) -> Result<f64> {
    energy(params, state, Branch::Positive)
}

pub fn energy_nodal(params: &SystemParams, state: &State) -> Result<f64> {
    energy(params, state, Branch::Nodal)
}

/// `E(a) − E(b)` from differences of each term, which keeps full relative
/// accuracy when `a` and `b` are close.
pub fn energy_difference(
    params: &SystemParams,
    a: &State,
    b: &State,
    branch: Branch,
) -> Result<f64> {
    a.check(params)?;
    b.check(params)?;
    let n = params.n();
    let sq_diff: Vec<Field> = (0..n)
        .map(|j| {
            a.component(j)
                .zip_map(b.component(j), |x, y| (x - y) * (x + y))
        })
        .collect();
    let mut total = 0.0;
    for j in 0..n {
        let (ua, ub) = (a.component(j), b.component(j));
        let d = ua.axpy(-1.0, ub);
        let s = ua.axpy(1.0, ub);
        // ½(G(a) − G(b)) = −½⟨Δ(a−b), a+b⟩
        total += 0.5 * d.dirichlet_bilinear(&s, 1);
        total += 0.5 * params.lambda()[j] * sq_diff[j].integral();
        let quartic = ua
            .zip_map(ub, |x, y| {
                let (qx, qy) = (quartic_base(branch, x), quartic_base(branch, y));
                (qx - qy) * (qx + qy) * (qx * qx + qy * qy)
            })
            .integral();
        total -= 0.25 * params.mu()[j] * quartic;
        for i in 0..j {
            let beta = params.beta(i, j);
            if beta == 0.0 {
                continue;
            }
            // a_i²a_j² − b_i²b_j² = (a_i² − b_i²) a_j² + b_i² (a_j² − b_j²)
            let aj2 = squares(ua);
            let bi2 = squares(b.component(i));
            let delta = sq_diff[i].dot(&aj2) + bi2.dot(&sq_diff[j]);
            total -= 0.5 * beta * delta;
        }
    }
    Ok(total)
}

/// L² representation of `dE`: component `j` is
/// `−Δu_j + λ_j u_j − μ_j q(u_j)³ − Σ_{k≠j} β_jk u_j u_k²`.
pub fn gradient(params: &SystemParams, state: &State, branch: Branch) -> Result<State> {
    state.check(params)?;
    let n = params.n();
    let sq: Vec<Field> = state.components().iter().map(squares).collect();
    let comps = (0..n)
        .map(|j| {
            let u = state.component(j);
            let lam = params.lambda()[j];
            let mu = params.mu()[j];
            let mut coupling = Field::zeros(u.grid());
            for k in 0..n {
                let b = params.beta(j, k);
                if k != j && b != 0.0 {
                    coupling = coupling.axpy(b, &sq[k]);
                }
            }
            let local = u.zip_map(&coupling, |v, c| {
                let q = quartic_base(branch, v);
                lam * v - mu * q * q * q - v * c
            });
            local.axpy(-1.0, &u.laplacian_k(1))
        })
        .collect();
    State::new(comps)
}

/// `‖∇E(U)_j‖_{L²}` per component: the discrete PDE residual.
pub fn pde_residuals(params: &SystemParams, state: &State, branch: Branch) -> Result<Vec<f64>> {
    Ok(gradient(params, state, branch)?
        .components()
        .iter()
        .map(Field::l2_norm)
        .collect())
}

/// Threshold below which a component counts as zero: `1e-8·√area` in L².
pub fn is_nonzero(u: &Field) -> bool {
    u.l2_norm() > 1e-8 * u.grid().area().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NehariReport {
    /// `∂_j E(U) u_j`.
    pub residuals: Vec<f64>,
    /// `‖u_j‖_j²`.
    pub norms: Vec<f64>,
    pub feasible: bool,
}

impl NehariReport {
    pub fn max_abs_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |a, r| a.max(r.abs()))
    }
}

/// The Nehari matrix `M`, right-hand side `d` and component norms.
struct NehariSystem {
    matrix: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

fn nehari_system(params: &SystemParams, state: &State, branch: Branch) -> NehariSystem {
    let n = params.n();
    let sq: Vec<Field> = state.components().iter().map(squares).collect();
    let mut matrix = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    for j in 0..n {
        let u = state.component(j);
        rhs[j] = u.dirichlet_form(1) + params.lambda()[j] * sq[j].integral();
        matrix[j][j] = params.mu()[j] * quartic_integral(u, branch);
        for k in 0..j {
            let c = sq[j].dot(&sq[k]);
            matrix[j][k] = params.beta(j, k) * c;
            matrix[k][j] = params.beta(k, j) * c;
        }
    }
    NehariSystem { matrix, rhs }
}

/// Residuals `∂_j E(U)u_j = ‖u_j‖_j² − μ_j∫q(u_j)⁴ − Σ_{k≠j} β_jk ∫u_j²u_k²`.
///
/// `feasible` requires every component to be nonzero and every
/// `|residual_j| ≤ tol`.
pub fn nehari_residuals(
    params: &SystemParams,
    state: &State,
    branch: Branch,
    tol: f64,
) -> Result<NehariReport> {
    state.check(params)?;
    let sys = nehari_system(params, state, branch);
    let residuals: Vec<f64> = (0..params.n())
        .map(|j| sys.rhs[j] - sys.matrix[j].iter().sum::<f64>())
        .collect();
    let nonzero = state.components().iter().all(is_nonzero);
    let feasible = nonzero && residuals.iter().all(|r| r.abs() <= tol);
    Ok(NehariReport {
        residuals,
        norms: sys.rhs,
        feasible,
    })
}

/// Solves `M s = d` by Gaussian elimination with partial pivoting followed
/// by iterative refinement. `None` when a pivot vanishes relative to `M`.
fn solve_dense(matrix: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let scale = matrix.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()));
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let mut lu: Vec<Vec<f64>> = matrix.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| lu[a][col].abs().total_cmp(&lu[b][col].abs()))?;
        if lu[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        lu.swap(col, piv);
        perm.swap(col, piv);
        for row in col + 1..n {
            let f = lu[row][col] / lu[col][col];
            lu[row][col] = f;
            for c in col + 1..n {
                lu[row][c] -= f * lu[col][c];
            }
        }
    }
    let apply = |b: &[f64]| -> Vec<f64> {
        let mut y: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for c in 0..i {
                y[i] -= lu[i][c] * y[c];
            }
        }
        for i in (0..n).rev() {
            for c in i + 1..n {
                y[i] -= lu[i][c] * y[c];
            }
            y[i] /= lu[i][i];
        }
        y
    };
    let mut x = apply(rhs);
    for _ in 0..2 {
        let r: Vec<f64> = (0..n)
            .map(|i| rhs[i] - (0..n).map(|c| matrix[i][c] * x[c]).sum::<f64>())
            .collect();
        let dx = apply(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Scalings `t_j > 0` that put `(t_1u_1, …, t_Nu_N)` on the Nehari set.
///
/// With `s_j = t_j²` the conditions are linear: `Σ_k M_jk s_k = d_j`,
/// `M_jj = μ_j∫q(u_j)⁴`, `M_jk = β_jk∫u_j²u_k²`, `d_j = ‖u_j‖_j²`.
pub fn nehari_scale(params: &SystemParams, state: &State, branch: Branch) -> Result<Vec<f64>> {
    state.check(params)?;
    if let Some(j) = state.components().iter().position(|u| !is_nonzero(u)) {
        return Err(Error::ZeroComponent(j));
    }
    let sys = nehari_system(params, state, branch);
    let s = solve_dense(&sys.matrix, &sys.rhs)
        .ok_or_else(|| Error::Infeasible("Nehari system is singular".into()))?;
    if let Some(j) = s.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Infeasible(format!(
            "no positive scaling: s[{j}] = {:e}",
            s[j]
        )));
    }
    Ok(s.iter().map(|v| v.sqrt()).collect())
}

/// `nehari_scale` applied to the state.
pub fn retract(params: &SystemParams, state: &State, branch: Branch) -> Result<State> {
    let t = nehari_scale(params, state, branch)?;
    Ok(state.scale_each(&t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Arc<PolarGrid> {
        PolarGrid::shared(GridSpec::ball(1.0, 16, 24, 4)).unwrap()
    }

    fn smooth_random(grid: &Arc<PolarGrid>, rng: &mut ChaCha8Rng) -> Field {
        let a: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Field::from_fn(grid, move |r, t| {
            (1.0 - r * r)
                * (a[0]
                    + a[1] * t.cos()
                    + a[2] * (2.0 * t).sin()
                    + a[3] * r * (3.0 * t).cos()
                    + a[4] * r)
        })
    }

    fn state(grid: &Arc<PolarGrid>, rng: &mut ChaCha8Rng, n: usize) -> State {
        State::new((0..n).map(|_| smooth_random(grid, rng)).collect()).unwrap()
    }

    /// Disjoint bumps in two annuli.
    fn disjoint(grid: &Arc<PolarGrid>) -> State {
        let bump = |lo: f64, hi: f64| {
            move |r: f64, t: f64| {
                if r > lo && r < hi {
                    ((r - lo) * (hi - r)).powi(2) * (2.0 + t.cos())
                } else {
                    0.0
                }
            }
        };
        State::new(vec![
            Field::from_fn(grid, bump(0.05, 0.45)),
            Field::from_fn(grid, bump(0.55, 0.95)).scale(3.0),
        ])
        .unwrap()
    }

    #[test]
    fn zero_state_has_zero_energy_and_gradient() {
        let g = grid();
        let params = SystemParams::two_coupled(1.0, 1.0, -1.0);
        let z = State::zeros(&g, 2);
        for branch in [Branch::Positive, Branch::Nodal] {
            assert_eq!(energy(&params, &z, branch).unwrap(), 0.0);
            assert_eq!(gradient(&params, &z, branch).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn energy_matches_term_oracle() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let params = SystemParams::two_coupled(1.5, 2.0, -0.7);
        let s = state(&g, &mut rng, 2);
        let (u, v) = (s.component(0), s.component(1));
        let w = g.ring_weights();
        let nt = g.n_theta();
        let mut quad = 0.0;
        let mut quart = 0.0;
        let mut coup = 0.0;
        for idx in 0..g.len() {
            let wi = w[idx / nt];
            let (a, b) = (u.values()[idx], v.values()[idx]);
            quad += wi * (a * a + b * b);
            quart += wi * (a.max(0.0).powi(4) + b.max(0.0).powi(4));
            coup += wi * a * a * b * b;
        }
        let oracle = 0.5 * (u.dirichlet_form(1) + v.dirichlet_form(1)) + 0.75 * quad - 0.5 * quart
            + 0.35 * coup;
        let e = energy_positive(&params, &s).unwrap();
        assert!(
            (e - oracle).abs() <= 1e-12 * oracle.abs().max(1.0),
            "{e} vs {oracle}"
        );
    }

    #[test]
    fn nodal_energy_is_even_and_agrees_on_nonnegative_states() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params = SystemParams::two_coupled(1.0, 1.0, -1.0);
        let s = state(&g, &mut rng, 2);
        let e = energy_nodal(&params, &s).unwrap();
        assert_eq!(e, energy_nodal(&params, &s.scale(-1.0)).unwrap());
        let abs = s.map(|c| c.map(f64::abs));
        assert_eq!(
            energy_nodal(&params, &abs).unwrap(),
            energy_positive(&params, &abs).unwrap()
        );
    }

    #[test]
    fn gradient_matches_central_differences() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let params = SystemParams::two_coupled(1.0, 1.0, -1.0);
        for branch in [Branch::Positive, Branch::Nodal] {
            for _ in 0..5 {
                let u = state(&g, &mut rng, 2).scale(3.0);
                let v = state(&g, &mut rng, 2);
                let h = 1e-5;
                let ep = energy(&params, &u.axpy(h, &v), branch).unwrap();
                let em = energy(&params, &u.axpy(-h, &v), branch).unwrap();
                let fd = (ep - em) / (2.0 * h);
                let an = gradient(&params, &u, branch).unwrap().dot(&v);
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "{fd} vs {an}");
            }
        }
    }

    #[test]
    fn energy_difference_matches_direct_difference() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = SystemParams::two_coupled(1.0, 1.0, -1.0);
        for branch in [Branch::Positive, Branch::Nodal] {
            let a = state(&g, &mut rng, 2).scale(2.0);
            let b = state(&g, &mut rng, 2);
            let direct =
                energy(&params, &a, branch).unwrap() - energy(&params, &b, branch).unwrap();
            let diff = energy_difference(&params, &a, &b, branch).unwrap();
            assert!((direct - diff).abs() <= 1e-10 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn residual_is_gradient_paired_with_component() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let params = SystemParams::two_coupled(1.0, 1.0, -1.0);
        let s = state(&g, &mut rng, 2).scale(2.0);
        let grad = gradient(&params, &s, Branch::Positive).unwrap();
        let rep = nehari_residuals(&params, &s, Branch::Positive, 1e-8).unwrap();
        for j in 0..2 {
            let pair = grad.component(j).dot(s.component(j));
            assert!((pair - rep.residuals[j]).abs() <= 1e-10 * rep.norms[j].max(1.0));
        }
    }

    #[test]
    fn zero_component_is_never_feasible() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let params = SystemParams::two_coupled(1.0, 1.0, -1.0);
        let s = State::new(vec![smooth_random(&g, &mut rng), Field::zeros(&g)]).unwrap();
        let rep = nehari_residuals(&params, &s, Branch::Positive, f64::INFINITY).unwrap();
        assert!(!rep.feasible);
        assert!(matches!(
            nehari_scale(&params, &s, Branch::Positive),
            Err(Error::ZeroComponent(1))
        ));
    }

    #[test]
    fn disjoint_scaling_is_the_closed_form() {
        let g = grid();
        let params = SystemParams::two_coupled(1.0, 1.0, -1.0);
        let s = disjoint(&g);
        let t = nehari_scale(&params, &s, Branch::Positive).unwrap();
        for j in 0..2 {
            let u = s.component(j);
            let norm = (u.dirichlet_form(1) + u.norm_sq()).sqrt();
            let l4sq = u.map(|v| v.max(0.0).powi(4)).integral().sqrt();
            assert!((t[j] - norm / l4sq).abs() <= 1e-12 * t[j]);
        }
        let on = s.scale_each(&t);
        let rep = nehari_residuals(&params, &on, Branch::Positive, 1e-10).unwrap();
        assert!(rep.feasible, "{rep:?}");
        let again = nehari_scale(&params, &on, Branch::Positive).unwrap();
        assert!(again.iter().all(|x| (x - 1.0).abs() <= 1e-8));
        // On the Nehari set the energy is a quarter of the norms.
        let e = energy_positive(&params, &on).unwrap();
        let quarter = 0.25 * rep.norms.iter().sum::<f64>();
        assert!((e - quarter).abs() <= 1e-8 * e);
    }

    #[test]
    fn overlapping_state_retracts() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let params = SystemParams::two_coupled(1.0, 1.0, -0.3);
        for _ in 0..10 {
            let s = state(&g, &mut rng, 2).map(|c| c.map(f64::abs));
            if let Ok(on) = retract(&params, &s, Branch::Nodal) {
                let rep = nehari_residuals(&params, &on, Branch::Nodal, 1e-10).unwrap();
                assert!(rep.feasible, "{rep:?}");
            }
        }
    }

    #[test]
    fn diagonal_state_is_infeasible_under_tight_repulsion() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let params = SystemParams::two_coupled(1.0, 1.0, -1.0);
        for branch in [Branch::Positive, Branch::Nodal] {
            for _ in 0..10 {
                let u = smooth_random(&g, &mut rng);
                let s = State::new(vec![u.clone(), u]).unwrap();
                assert!(matches!(
                    nehari_scale(&params, &s, branch),
                    Err(Error::Infeasible(_))
                ));
            }
        }
    }

    #[test]
    fn decoupled_overlap_scales_independently() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let params = SystemParams::two_coupled(1.0, 2.0, 0.0);
        let s = state(&g, &mut rng, 2);
        let t = nehari_scale(&params, &s, Branch::Nodal).unwrap();
        for j in 0..2 {
            let u = s.component(j);
            let d = u.dirichlet_form(1) + u.norm_sq();
            let expected = (d / (2.0 * u.map(|v| v.powi(4)).integral())).sqrt();
            assert!((t[j] - expected).abs() <= 1e-12 * expected);
        }
    }
}
