mod common;

use std::sync::Arc;

use nehari::energy::{energy, nehari_residuals, retract};
use nehari::reduction::{polarize, HalfSpace};
use nehari::symmetry::{minimal_period, project_class, sigma_permute};
use nehari::{Branch, Field, PolarGrid, State, SymmetryClass, SystemParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid() -> Arc<PolarGrid> {
    common::grid(12, 48, 8)
}

fn field(seed: u64) -> Field {
    common::smooth(&grid(), &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rotations_compose(seed in any::<u64>(), a in -100i64..100, b in -100i64..100) {
        let f = field(seed);
        prop_assert_eq!(f.rotate(a).rotate(b), f.rotate(a + b));
        prop_assert_eq!(f.rotate(48), f);
    }

    #[test]
    fn reflections_are_involutions(seed in any::<u64>(), axis in -96i64..96) {
        let f = field(seed);
        prop_assert_eq!(f.reflect(axis).reflect(axis), f.clone());
        prop_assert!((f.reflect(axis).integral() - f.integral()).abs() <= 1e-13 * f.l2_norm());
    }

    #[test]
    fn dirichlet_form_matches_laplacian(seed in any::<u64>(), k in 1usize..5) {
        let f = field(seed);
        let lhs = f.dirichlet_form(k);
        let rhs = -f.laplacian_k(k).dot(&f);
        prop_assert!(common::rel(lhs, rhs) <= 1e-10);
        prop_assert!(lhs >= 0.0);
    }

    #[test]
    fn projection_is_idempotent(seed in any::<u64>(), k in 1usize..4, nodal in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = common::random_state(&grid(), 2, &mut rng);
        let class = if nodal { SymmetryClass::nodal(k, 2) } else { SymmetryClass::positive(k, 2) };
        let once = project_class(&u, &class).unwrap();
        let twice = project_class(&once, &class).unwrap();
        prop_assert!(twice.distance(&once) <= 1e-14 * once.norm());
        let period = (48 / k) as i64;
        for c in once.components() {
            prop_assert_eq!(&c.rotate(period), c);
        }
    }

    #[test]
    fn energy_is_sigma_invariant(seed in any::<u64>()) {
        let p = SystemParams::two_coupled(1.0, 1.0, -1.0);
        let u = common::random_state(&grid(), 2, &mut ChaCha8Rng::seed_from_u64(seed));
        let su = sigma_permute(&u, &p).unwrap();
        prop_assert_eq!(energy(&p, &su, Branch::Positive).unwrap(), energy(&p, &u, Branch::Positive).unwrap());
    }

    #[test]
    fn retraction_lands_on_nehari_set(seed in any::<u64>(), beta in -3.0f64..-0.01) {
        let p = SystemParams::two_coupled(1.0, 1.0, beta);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = grid();
        let u = State::new(vec![common::smooth_nonnegative(&g, &mut rng), common::smooth_nonnegative(&g, &mut rng)]).unwrap();
        if let Ok(v) = retract(&p, &u, Branch::Positive) {
            let rep = nehari_residuals(&p, &v, Branch::Positive, f64::INFINITY).unwrap();
            let scale: f64 = v.components().iter().map(|c| c.dirichlet_form(1) + c.norm_sq()).sum();
            prop_assert!(rep.max_abs_residual() <= 1e-10 * scale);
        }
    }

    #[test]
    fn polarization_is_idempotent(seed in any::<u64>(), axis in 0i64..96) {
        let f = field(seed);
        let h = HalfSpace { axis_index: axis };
        let once = polarize(&f, h);
        prop_assert_eq!(polarize(&once, h), once.clone());
        prop_assert!((once.norm_sq() - f.norm_sq()).abs() <= 1e-12 * f.norm_sq());
    }

    #[test]
    fn minimal_period_is_rotation_invariant(seed in any::<u64>(), m in prop::sample::select(vec![1usize, 2, 3, 4, 6]), s in 0i64..48) {
        let f = field(seed);
        let steps = 48 / m;
        let mut sum = f.clone();
        for j in 1..m {
            sum = sum.axpy(1.0, &f.rotate((j * steps) as i64));
        }
        prop_assert_eq!(minimal_period(&sum.rotate(s), 1e-8), minimal_period(&sum, 1e-8));
    }
}
