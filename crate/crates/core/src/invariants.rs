//! Property checks run by the `check` command.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{energy, gradient, nehari_scale, retract, State};
use crate::error::Result;
use crate::grid::{Field, GridSpec, PolarGrid};
use crate::reduction::{
    ground_state_reduced, nehari_scale_reduced, polarization_inequality_check, psi_k,
    reduced_nehari_residual, reduced_terms, HalfSpace, ReducedProblem,
};
use crate::solver::{multistart, SolverConfig};
use crate::symmetry::{
    check_admissible, minimal_period, project_class, sigma_permute, validate_params, FiniteGroup,
    OrthoMatrix, SymmetryClass, SystemParams, Violation,
};
use crate::Branch;

/// Deliberate defects used to verify that the suite detects failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Negates the analytic gradient in the consistency check.
    WrongSignGradient,
}

#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub grid: GridSpec,
    pub params: SystemParams,
    pub k: usize,
    pub samples: usize,
    pub solver: SolverConfig,
    /// Grid for the reduced problem.
    pub reduced_grid: GridSpec,
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantResult {
    pub module: String,
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    pub tolerance: f64,
    /// Informational entries never fail the suite.
    pub report_only: bool,
    pub detail: String,
}

struct Suite {
    results: Vec<InvariantResult>,
}

impl Suite {
    /// Records `value ≤ tolerance`.
    fn at_most(&mut self, module: &str, name: &str, value: f64, tolerance: f64, detail: String) {
        self.push(module, name, value <= tolerance, value, tolerance, detail);
    }

    fn at_least(&mut self, module: &str, name: &str, value: f64, tolerance: f64, detail: String) {
        self.push(module, name, value >= tolerance, value, tolerance, detail);
    }

    fn push(
        &mut self,
        module: &str,
        name: &str,
        passed: bool,
        value: f64,
        tolerance: f64,
        detail: String,
    ) {
        self.results.push(InvariantResult {
            module: module.into(),
            name: name.into(),
            passed,
            value,
            tolerance,
            report_only: false,
            detail,
        });
    }
}

fn smooth_field(grid: &Arc<PolarGrid>, rng: &mut ChaCha8Rng) -> Field {
    let c: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let spec = *grid.spec();
    Field::from_fn(grid, move |r, t| {
        let s = (r - spec.r_inner) / (spec.r_outer - spec.r_inner);
        let envelope = if spec.is_ball() {
            1.0 - s * s
        } else {
            s * (1.0 - s) * 4.0
        };
        envelope
            * (c[0]
                + c[1] * t.cos()
                + c[2] * t.sin()
                + c[3] * (2.0 * t).cos()
                + c[4] * s * (3.0 * t).sin()
                + c[5] * s
                + c[6] * s * s * (5.0 * t).cos()
                + c[7] * (t + 2.0 * s).sin())
    })
}

fn positive_field(grid: &Arc<PolarGrid>, rng: &mut ChaCha8Rng) -> Field {
    let f = smooth_field(grid, rng);
    let g = smooth_field(grid, rng);
    f.zip_map(&g, |a, b| a * a + 0.1 * b.abs())
}

fn smooth_state(grid: &Arc<PolarGrid>, n: usize, rng: &mut ChaCha8Rng) -> Result<State> {
    State::new((0..n).map(|_| smooth_field(grid, rng)).collect())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn grid_checks(
    s: &mut Suite,
    grid: &Arc<PolarGrid>,
    rng: &mut ChaCha8Rng,
    samples: usize,
) -> Result<()> {
    let total: f64 = grid
        .ring_weights()
        .iter()
        .map(|w| w * grid.n_theta() as f64)
        .sum();
    s.at_most(
        "grid",
        "quadrature_area",
        rel(total, grid.area()),
        1e-12,
        format!("sum of weights {total}"),
    );

    // order of the midpoint rule on a smooth integrand, against its exact integral
    let spec = *grid.spec();
    let integrand = |r: f64, t: f64| (r * r).cos() * (1.0 + t.cos());
    let exact = PI * ((spec.r_outer.powi(2)).sin() - (spec.r_inner.powi(2)).sin());
    let err = |n_r: usize| -> Result<f64> {
        let g = PolarGrid::shared(GridSpec { n_r, ..spec })?;
        Ok((Field::from_fn(&g, integrand).integral() - exact).abs())
    };
    let (e1, e2) = (err(spec.n_r)?, err(2 * spec.n_r)?);
    let order = (e1 / e2).log2();
    s.at_least(
        "grid",
        "quadrature_order",
        order,
        1.9,
        format!("errors {e1:e}, {e2:e}"),
    );

    let mut perm_err: f64 = 0.0;
    let mut sym_err: f64 = 0.0;
    let mut green_err: f64 = 0.0;
    for _ in 0..samples {
        let f = smooth_field(grid, rng);
        let g = smooth_field(grid, rng);
        let (i0, h0) = (f.integral(), f.dirichlet_form(1) + f.norm_sq());
        for img in [
            f.rotate(rng.gen_range(0..grid.n_theta() as i64)),
            f.antipodal(),
            f.reflect(rng.gen_range(0..64)),
        ] {
            perm_err = perm_err.max((img.integral() - i0).abs() / f.l2_norm().max(1e-300));
            perm_err = perm_err.max(rel(img.dirichlet_form(1) + img.norm_sq(), h0));
        }
        let lhs = f.laplacian_k(3).dot(&g);
        let rhs = f.dot(&g.laplacian_k(3));
        sym_err = sym_err.max((lhs - rhs).abs() / (f.l2_norm() * g.l2_norm()));
        let green = -f.laplacian_k(1).dot(&f) + 1.5 * f.norm_sq();
        green_err = green_err.max(rel(grid.h1_norm_sq(&f, 1.5)?, green));
    }
    s.at_most(
        "grid",
        "permutations_preserve_integrals",
        perm_err,
        1e-12,
        String::new(),
    );
    s.at_most(
        "grid",
        "laplacian_symmetric",
        sym_err,
        1e-10,
        "relative to |f||g|".into(),
    );
    s.at_most("grid", "h1_green_identity", green_err, 1e-8, String::new());
    Ok(())
}

fn mutations(params: &SystemParams) -> Result<Vec<(char, SystemParams)>> {
    let n = params.n();
    let lam = params.lambda().to_vec();
    let mu = params.mu().to_vec();
    let beta = params.beta_matrix().to_vec();
    let mut out = Vec::new();
    let mut l = lam.clone();
    l[0] = -1.0;
    out.push((
        'A',
        SystemParams::new(params.p(), l, mu.clone(), beta.clone())?,
    ));
    if params.p() > 1 {
        let mut l = lam.clone();
        l[1] += 1.0;
        out.push((
            'A',
            SystemParams::new(params.p(), l, mu.clone(), beta.clone())?,
        ));
    }
    let mut m = mu.clone();
    m[0] = -1.0;
    let mut b = beta.clone();
    b[0][0] = -1.0;
    out.push(('B', SystemParams::new(params.p(), lam.clone(), m, b)?));
    if n > 1 {
        let mut b = beta.clone();
        b[0][1] = 0.5;
        b[1][0] = 0.5;
        out.push((
            'B',
            SystemParams::new(params.p(), lam.clone(), mu.clone(), b)?,
        ));
    }
    // (D): make the block too weakly repulsive
    if params.p() > 1 {
        let mut b = beta.clone();
        for j in 0..params.p() {
            for i in 0..params.p() {
                if i != j {
                    b[i][j] = -0.5 * mu[j] / (params.p() - 1) as f64;
                }
            }
        }
        out.push(('D', SystemParams::new(params.p(), lam, mu, b)?));
    }
    // (C) needs a block of size at least 3
    let mut c = vec![vec![-1.0; 3]; 3];
    c[0][1] = -2.0;
    c[1][0] = -2.0;
    out.push(('C', SystemParams::new(3, vec![1.0; 3], vec![1.0; 3], c)?));
    Ok(out)
}

fn symmetry_checks(
    s: &mut Suite,
    cfg: &CheckConfig,
    grid: &Arc<PolarGrid>,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let params = &cfg.params;
    let class = SymmetryClass::positive(cfg.k, params.p());
    let nt = grid.n_theta();
    let gsteps = class.generator_steps(nt)? as i64;
    let mut idem: f64 = 0.0;
    let mut expand: f64 = 0.0;
    let mut inv: f64 = 0.0;
    let mut period_ok = true;
    for _ in 0..cfg.samples {
        let u = smooth_state(grid, params.n(), rng)?;
        let pu = project_class(&u, &class)?;
        idem = idem.max(project_class(&pu, &class)?.distance(&pu) / pu.norm().max(1e-300));
        expand = expand.max(pu.norm() - u.norm());
        let g_pu = sigma_permute(&pu, params)?.rotate(gsteps);
        let e = energy(params, &pu, Branch::Positive)?;
        inv = inv.max(rel(energy(params, &g_pu, Branch::Positive)?, e));
        let f = u.component(0);
        let p0 = minimal_period(f, 1e-8);
        period_ok &= minimal_period(&f.rotate(rng.gen_range(0..nt as i64)), 1e-8) == p0;
        let f3 = f
            .rotate(0)
            .zip_map(&f.rotate((nt / 3) as i64), |a, b| a + b);
        let f3 = f3.zip_map(&f.rotate((2 * nt / 3) as i64), |a, b| a + b);
        if nt % 3 == 0 {
            period_ok &= minimal_period(&f3.rotate(7), 1e-8) == minimal_period(&f3, 1e-8);
        }
    }
    s.at_most(
        "symmetry",
        "projection_idempotent",
        idem,
        1e-14,
        String::new(),
    );
    s.at_most(
        "symmetry",
        "projection_nonexpansive",
        expand,
        1e-12,
        "max of |PU| - |U|".into(),
    );
    s.at_most(
        "symmetry",
        "energy_invariant_under_generator",
        inv,
        1e-12,
        String::new(),
    );
    s.push(
        "symmetry",
        "minimal_period_rotation_invariant",
        period_ok,
        0.0,
        0.0,
        String::new(),
    );

    let base = validate_params(params);
    let muts = mutations(params)?;
    let caught = muts
        .iter()
        .filter(|(a, m)| {
            validate_params(m)
                .iter()
                .any(|v: &Violation| v.assumption() == *a)
        })
        .count();
    s.push(
        "symmetry",
        "validate_params_accepts_and_rejects",
        base.is_empty() && caught == muts.len(),
        caught as f64,
        muts.len() as f64,
        format!("{} violations on the configured parameters", base.len()),
    );

    let mut admissible = Vec::new();
    for (k, p) in [(1usize, 2usize), (2, 2), (3, 3)] {
        let g = FiniteGroup::cyclic_2d(k)?;
        let b = OrthoMatrix::rotation_2d(2.0 * PI / (p * k) as f64);
        admissible.push(check_admissible(&g, &b, p, &[1.0, 0.0])?.admissible());
    }
    let b = OrthoMatrix::rotation_z(PI / 2.0);
    let g = FiniteGroup::generate(3, &[b.pow(2), OrthoMatrix::diagonal(&[1.0, 1.0, -1.0])])?;
    admissible.push(check_admissible(&g, &b, 2, &[1.0, 0.0, 0.0])?.admissible());
    let tet = FiniteGroup::tetrahedral();
    admissible.push(
        check_admissible(
            &tet,
            &OrthoMatrix::diagonal(&[-1.0; 3]),
            2,
            &[1.0, 1.0, 1.0],
        )?
        .admissible(),
    );
    let inside = check_admissible(
        &FiniteGroup::cyclic_2d(4)?,
        &OrthoMatrix::rotation_2d(PI / 2.0),
        2,
        &[1.0, 0.0],
    )?;
    s.push(
        "symmetry",
        "admissible_pair_examples",
        admissible.iter().all(|a| *a) && !inside.admissible(),
        admissible.iter().filter(|a| **a).count() as f64,
        admissible.len() as f64,
        "cyclic pairs, cylinder pair, tetrahedral pair; b in G rejected".into(),
    );
    Ok(())
}

fn energy_checks(
    s: &mut Suite,
    cfg: &CheckConfig,
    grid: &Arc<PolarGrid>,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let params = &cfg.params;
    let mut fixed: f64 = 0.0;
    let mut equiv: f64 = 0.0;
    let mut identity: f64 = 0.0;
    let mut retracted = 0;
    for _ in 0..cfg.samples {
        let u = State::new((0..params.n()).map(|_| positive_field(grid, rng)).collect())?;
        let Ok(v) = retract(params, &u, Branch::Positive) else {
            continue;
        };
        retracted += 1;
        let t = nehari_scale(params, &v, Branch::Positive)?;
        fixed = fixed.max(t.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max));
        let t_u = nehari_scale(params, &u, Branch::Positive)?;
        let t_s = nehari_scale(params, &sigma_permute(&u, params)?, Branch::Positive)?;
        let sigma_t: Vec<f64> = (0..params.n())
            .map(|j| t_u[params.shift_in_block(j, 1)])
            .collect();
        equiv = equiv.max(
            t_s.iter()
                .zip(&sigma_t)
                .map(|(a, b)| rel(*a, *b))
                .fold(0.0, f64::max),
        );
        let quarter: f64 = v
            .components()
            .iter()
            .enumerate()
            .map(|(j, f)| 0.25 * (f.dirichlet_form(1) + params.lambda()[j] * f.norm_sq()))
            .sum();
        identity = identity.max(rel(energy(params, &v, Branch::Positive)?, quarter));
    }
    let detail = format!(
        "{retracted} of {} random states were retractable",
        cfg.samples
    );
    s.at_most(
        "energy",
        "retraction_fixes_nehari",
        fixed,
        1e-8,
        detail.clone(),
    );
    s.at_most(
        "energy",
        "scaling_equivariant",
        equiv,
        1e-10,
        detail.clone(),
    );
    s.at_most("energy", "nehari_energy_identity", identity, 1e-8, detail);

    let sign = if cfg.fault == Some(Fault::WrongSignGradient) {
        -1.0
    } else {
        1.0
    };
    let mut worst: f64 = 0.0;
    for branch in [Branch::Positive, Branch::Nodal] {
        for _ in 0..cfg.samples {
            let u = smooth_state(grid, params.n(), rng)?;
            let v = smooth_state(grid, params.n(), rng)?;
            let h = 1e-5;
            let fd = (energy(params, &u.axpy(h, &v), branch)?
                - energy(params, &u.axpy(-h, &v), branch)?)
                / (2.0 * h);
            let an = sign * gradient(params, &u, branch)?.dot(&v);
            worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-12));
        }
    }
    s.at_most(
        "energy",
        "gradient_consistency",
        worst,
        1e-5,
        "central differences, h = 1e-5".into(),
    );
    Ok(())
}

fn solver_checks(s: &mut Suite, cfg: &CheckConfig, grid: &Arc<PolarGrid>) -> Result<()> {
    let params = &cfg.params;
    let class = SymmetryClass::positive(cfg.k, params.p());
    let set = multistart(grid, params, &class, &cfg.solver)?;
    let again = multistart(grid, params, &class, &cfg.solver)?;
    let same = serde_json::to_string(&set).ok() == serde_json::to_string(&again).ok()
        && set
            .solutions
            .iter()
            .zip(&again.solutions)
            .all(|(a, b)| a.report.state() == b.report.state());
    s.push("solver", "deterministic", same, 0.0, 0.0, String::new());
    s.at_least(
        "solver",
        "found_solutions",
        set.solutions.len() as f64,
        1.0,
        format!("{} converged", set.converged),
    );

    let sols = &set.solutions;
    let min_value = sols
        .iter()
        .map(|x| x.report.min_value)
        .fold(f64::INFINITY, f64::min);
    s.at_least("solver", "positivity", min_value, -1e-8, String::new());
    let period = sols
        .iter()
        .map(|x| x.report.defects.period)
        .fold(0.0, f64::max);
    s.at_most("solver", "class_invariance", period, 1e-10, String::new());
    let refined = sols
        .iter()
        .map(|x| x.report.defects.refined)
        .fold(f64::INFINITY, f64::min);
    s.at_least(
        "solver",
        "symmetry_breaking",
        refined,
        cfg.solver.breaking_threshold,
        String::new(),
    );
    let steps = class.generator_steps(grid.n_theta())? as i64;
    let blockwise = sols.iter().all(|x| {
        let st = x.report.state();
        (0..params.n())
            .filter(|j| (j + 1) % params.p() != 0)
            .all(|j| st.component(j + 1) == &st.component(j).rotate(steps))
    });
    s.push(
        "solver",
        "blockwise_structure",
        blockwise,
        0.0,
        0.0,
        String::new(),
    );
    let rise = sols
        .iter()
        .flat_map(|x| x.report.energy_trace.windows(2).map(|w| w[1] - w[0]))
        .fold(f64::NEG_INFINITY, f64::max);
    s.at_most("solver", "energy_monotone", rise, 1e-12, String::new());
    let residual = sols
        .iter()
        .map(|x| x.report.gradient_norm)
        .fold(0.0, f64::max);
    s.at_most(
        "solver",
        "converged_residual",
        residual,
        cfg.solver.gradient_tol,
        String::new(),
    );
    Ok(())
}

fn reduction_checks(s: &mut Suite, cfg: &CheckConfig, rng: &mut ChaCha8Rng) -> Result<()> {
    let beta = cfg.params.beta(0, 1.min(cfg.params.n() - 1));
    let beta = if beta < 0.0 { beta } else { -1.0 };
    let grid = PolarGrid::shared(cfg.reduced_grid)?;
    let prob = ReducedProblem::new(&grid, cfg.k, beta)?;
    let params = prob.params();
    let n_phi = grid.n_theta();

    let mut intertwine = true;
    let mut nehari: f64 = 0.0;
    let mut polar_bad = 0usize;
    for _ in 0..cfg.samples {
        let u = smooth_field(&grid, rng);
        let m = psi_k(&prob, &u)?;
        intertwine &= m.component(1)
            == &m
                .component(0)
                .rotate((prob.full_grid().n_theta() / (2 * cfg.k)) as i64);
        intertwine &= sigma_permute(&m, &params)? == psi_k(&prob, &u.antipodal())?;
        let pos = positive_field(&grid, rng);
        if let Ok(l) = nehari_scale_reduced(&prob, &pos) {
            let v = pos.scale(l);
            let q = reduced_terms(&prob, &v)?.quadratic();
            nehari = nehari.max(reduced_nehari_residual(&prob, &v)?.abs() / q);
        }
        for _ in 0..4 {
            let h = HalfSpace {
                axis_index: rng.gen_range(0..2 * n_phi as i64),
            };
            let rep = polarization_inequality_check(&prob, &pos, h)?;
            if !rep.violations(1e-10, 1e-12).is_empty() {
                polar_bad += 1;
            }
        }
    }
    s.push(
        "reduction",
        "psi_intertwines_symmetries",
        intertwine,
        0.0,
        0.0,
        String::new(),
    );
    s.at_most(
        "reduction",
        "nehari_identity_after_scaling",
        nehari,
        1e-10,
        String::new(),
    );
    s.at_most(
        "reduction",
        "polarization_inequalities",
        polar_bad as f64,
        0.0,
        "nonnegative fields".into(),
    );

    let ground = ground_state_reduced(&prob, &cfg.solver)?;
    s.at_most(
        "reduction",
        "foliated_schwarz_ground_state",
        ground.foliated_schwarz_defect,
        1e-3 * ground.norm,
        format!("{:?}", ground.status),
    );
    let fine_spec = GridSpec {
        n_r: 2 * grid.n_r(),
        ..cfg.reduced_grid
    };
    let fine = ReducedProblem::new(&PolarGrid::shared(fine_spec)?, cfg.k, beta)?;
    let fine_ground = ground_state_reduced(&fine, &cfg.solver)?;
    let change = rel(fine_ground.energy, ground.energy);
    s.results.push(InvariantResult {
        module: "reduction".into(),
        name: "ground_energy_refinement".into(),
        passed: change <= 1e-2,
        value: change,
        tolerance: 1e-2,
        report_only: true,
        detail: format!(
            "{} -> {} after doubling n_r",
            ground.energy, fine_ground.energy
        ),
    });
    Ok(())
}

/// Runs every check; an entry fails when its value misses the tolerance.
pub fn run_invariants(cfg: &CheckConfig) -> Result<Vec<InvariantResult>> {
    let grid = PolarGrid::shared(cfg.grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.solver.rng_seed);
    let mut suite = Suite {
        results: Vec::new(),
    };
    grid_checks(&mut suite, &grid, &mut rng, cfg.samples)?;
    symmetry_checks(&mut suite, cfg, &grid, &mut rng)?;
    energy_checks(&mut suite, cfg, &grid, &mut rng)?;
    solver_checks(&mut suite, cfg, &grid)?;
    reduction_checks(&mut suite, cfg, &mut rng)?;
    Ok(suite.results)
}

/// Whether every non-informational entry passed.
pub fn all_passed(results: &[InvariantResult]) -> bool {
    results.iter().all(|r| r.passed || r.report_only)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(fault: Option<Fault>) -> CheckConfig {
        CheckConfig {
            grid: GridSpec::ball(1.0, 12, 48, 4),
            params: SystemParams::two_coupled(1.0, 1.0, -1.0),
            k: 1,
            samples: 4,
            solver: SolverConfig {
                starts: 3,
                ..SolverConfig::default()
            },
            reduced_grid: GridSpec::ball(1.0, 12, 24, 4),
            fault,
        }
    }

    #[test]
    fn suite_passes_and_catches_the_fault() {
        let ok = run_invariants(&config(None)).unwrap();
        let failed: Vec<_> = ok.iter().filter(|r| !r.passed && !r.report_only).collect();
        assert!(failed.is_empty(), "{failed:#?}");
        let bad = run_invariants(&config(Some(Fault::WrongSignGradient))).unwrap();
        let failed: Vec<_> = bad
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.name.as_str())
            .collect();
        assert_eq!(failed, vec!["gradient_consistency"]);
    }
}
