//! Equivariant initial data.
//!
//! Each family maps a point `z` of the unit sphere in `C^m` to a state with
//! pairwise disjoint supports, then rescales onto the Nehari set. Rotating
//! `z` by `e^{2πi/p}` permutes the components by `σ`, exactly: phases are
//! stored as an integer sector of width `2π/p` plus an offset, so the
//! rotation only changes integers and index shifts.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::energy::{nehari_scale, State};
use crate::error::{Error, Result};
use crate::grid::{Field, PolarGrid};
use crate::symmetry::{Branch, FiniteGroup, OrthoMatrix, SymmetryClass, SystemParams};

/// `r e^{iθ}` with `θ = 2π·sector/p + offset`, `offset ∈ [0, 2π/p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub modulus: f64,
    pub sector: usize,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub p: usize,
    pub phases: Vec<Phase>,
    /// Fraction of the admissible angular window covered by a bump.
    pub angular_fill: f64,
    /// Fraction of each radial slot covered by a bump.
    pub radial_fill: f64,
}

impl SeedSpec {
    /// From complex coordinates `(re, im)`; the vector is normalized.
    pub fn from_complex(p: usize, z: &[(f64, f64)]) -> Result<Self> {
        if p == 0 || z.is_empty() {
            return Err(Error::InvalidSeed(
                "need p > 0 and at least one coordinate".into(),
            ));
        }
        let norm = z.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidSeed(
                "z must be a nonzero finite vector".into(),
            ));
        }
        let width = 2.0 * PI / p as f64;
        let phases = z
            .iter()
            .map(|&(re, im)| {
                let angle = im.atan2(re).rem_euclid(2.0 * PI);
                let sector = ((angle / width).floor() as usize).min(p - 1);
                let offset = (angle - sector as f64 * width).clamp(0.0, width);
                Phase {
                    modulus: (re * re + im * im).sqrt() / norm,
                    sector,
                    offset,
                }
            })
            .collect();
        Ok(Self {
            p,
            phases,
            angular_fill: 0.8,
            radial_fill: 0.8,
        })
    }

    /// A point drawn from the rotation-invariant distribution on the sphere.
    pub fn random(p: usize, m: usize, rng: &mut impl Rng) -> Result<Self> {
        let z: Vec<(f64, f64)> = (0..m.max(1))
            .map(|_| (rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::from_complex(p, &z)
    }

    pub fn m(&self) -> usize {
        self.phases.len()
    }

    /// `e^{2πi/p} z`.
    pub fn rotated(&self) -> Self {
        let mut out = self.clone();
        for ph in &mut out.phases {
            ph.sector = (ph.sector + 1) % self.p;
        }
        out
    }

    pub fn to_complex(&self) -> Vec<(f64, f64)> {
        self.phases
            .iter()
            .map(|ph| {
                let a = 2.0 * PI * ph.sector as f64 / self.p as f64 + ph.offset;
                (ph.modulus * a.cos(), ph.modulus * a.sin())
            })
            .collect()
    }

    fn check(&self, p: usize) -> Result<()> {
        if self.p != p {
            return Err(Error::InvalidSeed(format!(
                "seed built for p = {}, system has p = {p}",
                self.p
            )));
        }
        if !(self.angular_fill > 0.0 && self.angular_fill < 1.0)
            || !(self.radial_fill > 0.0 && self.radial_fill < 1.0)
        {
            return Err(Error::InvalidSeed(
                "fill fractions must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// `C^∞` bump with support `(-1, 1)` and maximum 1.
pub fn bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

/// Radial profile of slot `slot` out of `slots` equal annuli.
fn radial_profile(grid: &PolarGrid, slot: usize, slots: usize, fill: f64) -> impl Fn(f64) -> f64 {
    let spec = grid.spec();
    let len = (spec.r_outer - spec.r_inner) / slots as f64;
    let center = spec.r_inner + (slot as f64 + 0.5) * len;
    let half = 0.5 * fill * len;
    move |r| bump((r - center) / half)
}

/// Field defined on the sector `[0, sector)` of angular nodes and extended
/// by `f(θ + sector·Δθ) = sign · f(θ)`.
fn sector_field(
    grid: &Arc<PolarGrid>,
    sector: usize,
    sign: f64,
    f: impl Fn(f64, f64) -> f64,
) -> Field {
    let (nr, nt) = (grid.n_r(), grid.n_theta());
    let mut values = vec![0.0; grid.len()];
    for i in 0..nr {
        let r = grid.radii()[i];
        for m in 0..sector {
            let v = f(r, grid.theta(m));
            let mut s = 1.0;
            for c in 0..nt / sector {
                values[i * nt + m + c * sector] = s * v;
                s *= sign;
            }
        }
    }
    Field::from_values(grid, values).expect("seed values are finite")
}

/// `x` reduced into `(-period/2, period/2]`.
fn centered(x: f64, period: f64) -> f64 {
    let y = x.rem_euclid(period);
    if y > 0.5 * period {
        y - period
    } else {
        y
    }
}

/// Scales by `nehari_scale`, sharing one factor per block on the positive
/// branch so that the class relations stay exact.
///
/// The factors are computed for the phase representative whose first
/// coordinate lies in sector 0 and then permuted, so that
/// `seed(e^{2πi/p} z) = σ seed(z)` holds bit for bit.
fn scale_onto_nehari(
    params: &SystemParams,
    spec: &SeedSpec,
    raw: impl Fn(&SeedSpec) -> Result<State>,
    branch: Branch,
) -> Result<State> {
    let p = params.p();
    let c = spec.phases[0].sector;
    let mut canon = spec.clone();
    for ph in &mut canon.phases {
        ph.sector = (ph.sector + p - c) % p;
    }
    let mut t0 = nehari_scale(params, &raw(&canon)?, branch)?;
    if branch == Branch::Positive {
        for j in 0..t0.len() {
            t0[j] = t0[j - j % p];
        }
    }
    let t: Vec<f64> = (0..t0.len())
        .map(|j| t0[j - j % p + (j % p + c) % p])
        .collect();
    Ok(raw(spec)?.scale_each(&t))
}

/// Unscaled positive seed.
pub fn seed_positive_raw(
    grid: &Arc<PolarGrid>,
    class: &SymmetryClass,
    spec: &SeedSpec,
    params: &SystemParams,
) -> Result<State> {
    if class.branch != Branch::Positive {
        return Err(Error::InvalidSeed(
            "positive seed requested for a nodal class".into(),
        ));
    }
    spec.check(params.p())?;
    let (p, k) = (params.p(), class.k);
    let steps = class.generator_steps(grid.n_theta())?;
    if steps < 2 {
        return Err(Error::InvalidSeed(format!(
            "n_theta = {} leaves fewer than two nodes per sector of width 2pi/{}",
            grid.n_theta(),
            p * k
        )));
    }
    let period = steps * p;
    let period_angle = 2.0 * PI / k as f64;
    let sector_angle = 2.0 * PI / (p * k) as f64;
    let half_width = 0.5 * spec.angular_fill * sector_angle;
    let blocks = params.blocks();
    let slots = spec.m() * blocks;

    let mut comps = Vec::with_capacity(params.n());
    for b in 0..blocks {
        let mut block = Field::zeros(grid);
        for (i, ph) in spec.phases.iter().enumerate() {
            if ph.modulus == 0.0 {
                continue;
            }
            let rho = radial_profile(grid, i * blocks + b, slots, spec.radial_fill);
            let shift = ph.offset / k as f64 + 0.5 * sector_angle;
            let base = sector_field(grid, period, 1.0, |r, t| {
                rho(r) * bump(centered(t - shift, period_angle) / half_width)
            });
            block = block.axpy(ph.modulus, &base.rotate((ph.sector * steps) as i64));
        }
        for l in 0..p {
            comps.push(block.rotate((l * steps) as i64));
        }
    }
    State::new(comps)
}

/// Positive seed on the Nehari set of the class.
pub fn seed_positive(
    grid: &Arc<PolarGrid>,
    class: &SymmetryClass,
    spec: &SeedSpec,
    params: &SystemParams,
) -> Result<State> {
    spec.check(params.p())?;
    let raw = |z: &SeedSpec| seed_positive_raw(grid, class, z, params);
    scale_onto_nehari(params, spec, raw, Branch::Positive)
}

/// Angular window `η_ℓ(θ) = η(θ − ℓπ/p)` evaluated at
/// `θ = offset + 2π·turns/p`, using only integer arithmetic for the shift.
fn window(p: usize, ell: usize, offset: f64, turns: usize) -> f64 {
    let two_p = 2 * p as i64;
    let mut c = (2 * turns as i64 - ell as i64).rem_euclid(two_p);
    if c >= p as i64 {
        c -= two_p;
    }
    let x = offset + c as f64 * PI / p as f64;
    bump(x * p as f64 / PI)
}

/// Unscaled nodal seed.
pub fn seed_nodal_raw(
    grid: &Arc<PolarGrid>,
    class: &SymmetryClass,
    spec: &SeedSpec,
    params: &SystemParams,
) -> Result<State> {
    if class.branch != Branch::Nodal {
        return Err(Error::InvalidSeed(
            "nodal seed requested for a positive class".into(),
        ));
    }
    spec.check(params.p())?;
    let (p, k) = (params.p(), class.k);
    let half = class.generator_steps(grid.n_theta())?;
    if half < 2 * p {
        return Err(Error::InvalidSeed(format!(
            "n_theta = {} cannot hold {} angular slots per half period",
            grid.n_theta(),
            2 * p
        )));
    }
    let slot_angle = PI / (2 * p * k) as f64;
    let half_width = 0.5 * spec.angular_fill * slot_angle;
    let blocks = params.blocks();
    let slots = spec.m() * blocks;

    // φ_ℓ^{i,b}: slot ℓ of the half period, antisymmetric under R_{π/k}.
    let phi = |i: usize, b: usize, ell: usize| -> Field {
        let rho = radial_profile(grid, i * blocks + b, slots, spec.radial_fill);
        let center = (ell as f64 + 0.5) * slot_angle;
        sector_field(grid, half, -1.0, |r, t| {
            rho(r) * bump((t - center) / half_width)
        })
    };

    let mut comps = Vec::with_capacity(params.n());
    for b in 0..blocks {
        let bases: Vec<Vec<Field>> = (0..spec.m())
            .map(|i| (0..2 * p).map(|ell| phi(i, b, ell)).collect())
            .collect();
        for l in 1..=p {
            let mut u = Field::zeros(grid);
            for (i, ph) in spec.phases.iter().enumerate() {
                if ph.modulus == 0.0 {
                    continue;
                }
                for ell in 1..=2 * p {
                    let eta = window(p, ell, ph.offset, ph.sector + l);
                    if eta != 0.0 {
                        u = u.axpy(ph.modulus * eta, &bases[i][ell - 1]);
                    }
                }
            }
            comps.push(u);
        }
    }
    State::new(comps)
}

/// Nodal seed on the Nehari set.
pub fn seed_nodal(
    grid: &Arc<PolarGrid>,
    class: &SymmetryClass,
    spec: &SeedSpec,
    params: &SystemParams,
) -> Result<State> {
    spec.check(params.p())?;
    let raw = |z: &SeedSpec| seed_nodal_raw(grid, class, z, params);
    scale_onto_nehari(params, spec, raw, Branch::Nodal)
}

pub fn seed(
    grid: &Arc<PolarGrid>,
    class: &SymmetryClass,
    spec: &SeedSpec,
    params: &SystemParams,
) -> Result<State> {
    match class.branch {
        Branch::Positive => seed_positive(grid, class, spec, params),
        Branch::Nodal => seed_nodal(grid, class, spec, params),
    }
}

/// Planar admissible pair used for generalized seeds.
#[derive(Debug, Clone)]
pub struct PlanarPair {
    pub group: FiniteGroup,
    pub b: OrthoMatrix,
    pub x0: [f64; 2],
}

/// Positive seed for an admissible pair `(G, b)` in the plane.
///
/// Components are `G`-symmetric and satisfy `u_{j+1} = u_j ∘ b^{-1}` inside
/// each block; functions are evaluated analytically at the grid nodes.
pub fn seed_admissible(
    grid: &Arc<PolarGrid>,
    pair: &PlanarPair,
    spec: &SeedSpec,
    params: &SystemParams,
) -> Result<State> {
    spec.check(params.p())?;
    if pair.group.dim() != 2 || pair.b.dim() != 2 {
        return Err(Error::InvalidSeed(
            "planar seeds need 2x2 group elements".into(),
        ));
    }
    let p = params.p();
    let blocks = params.blocks();
    let m = spec.m();
    let slots = 2 * m * blocks;
    let gs = grid.spec();
    let x0n = pair.x0[0].hypot(pair.x0[1]);
    if !(x0n > 0.0) {
        return Err(Error::InvalidSeed("x0 must be nonzero".into()));
    }
    let dir = [pair.x0[0] / x0n, pair.x0[1] / x0n];
    let len = (gs.r_outer - gs.r_inner) / slots as f64;

    // Orbit of the unit direction under G and the powers of b; δ is a
    // fraction of its smallest chord and of the slot width.
    let mut pts: Vec<Vec<f64>> = Vec::new();
    for s in 0..p {
        let y = pair.b.pow(s).apply(&dir);
        for g in pair.group.elements() {
            pts.push(g.apply(&y));
        }
    }
    let mut chord = f64::INFINITY;
    for a in 0..pts.len() {
        for c in a + 1..pts.len() {
            let d = (pts[a][0] - pts[c][0]).hypot(pts[a][1] - pts[c][1]);
            if d > 1e-9 {
                chord = chord.min(d);
            }
        }
    }
    let b_inv = pair.b.inverse();
    let inverses: Vec<OrthoMatrix> = pair
        .group
        .elements()
        .iter()
        .map(OrthoMatrix::inverse)
        .collect();

    // φ(x) = max_g φ0(g^{-1} x), φ0 a bump at radius ρ along x0.
    let envelope = |slot: usize, x: [f64; 2]| -> f64 {
        let rho = gs.r_inner + (slot as f64 + 0.5) * len;
        let delta = 0.5 * spec.radial_fill * len.min(rho * chord);
        let c = [rho * dir[0], rho * dir[1]];
        inverses
            .iter()
            .map(|gi| {
                let y = gi.apply(&x);
                bump((y[0] - c[0]).hypot(y[1] - c[1]) / delta)
            })
            .fold(0.0, f64::max)
    };

    let mut comps = Vec::with_capacity(params.n());
    for b in 0..blocks {
        for l in 1..=p {
            let mut values = vec![0.0; grid.len()];
            for i in 0..grid.n_r() {
                let r = grid.radii()[i];
                for mm in 0..grid.n_theta() {
                    let t = grid.theta(mm);
                    let x = [r * t.cos(), r * t.sin()];
                    let mut v = 0.0;
                    for (iz, ph) in spec.phases.iter().enumerate() {
                        if ph.modulus == 0.0 {
                            continue;
                        }
                        let slot = 2 * (iz * blocks + b);
                        for ell in 1..=p {
                            // φ_ℓ = φ ∘ (b^{-1})^ℓ
                            let y = b_inv.pow(ell).apply(&x);
                            let y = [y[0], y[1]];
                            let e_odd = window(p, 2 * ell - 1, ph.offset, ph.sector + l);
                            let e_even = window(p, 2 * ell, ph.offset, ph.sector + l);
                            if e_odd != 0.0 {
                                v += ph.modulus * e_odd * envelope(slot, y);
                            }
                            if e_even != 0.0 {
                                v += ph.modulus * e_even * envelope(slot + 1, y);
                            }
                        }
                    }
                    values[i * grid.n_theta() + mm] = v;
                }
            }
            comps.push(Field::from_values(grid, values)?);
        }
    }
    let raw = State::new(comps)?;
    let t = nehari_scale(params, &raw, Branch::Positive)?;
    Ok(raw.scale_each(&t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::nehari_residuals;
    use crate::grid::GridSpec;
    use crate::symmetry::sigma_permute;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Arc<PolarGrid> {
        PolarGrid::shared(GridSpec::ball(1.0, 24, 72, 4)).unwrap()
    }

    fn three() -> SystemParams {
        SystemParams::new(3, vec![1.0; 3], vec![1.0; 3], vec![vec![-1.0; 3]; 3]).unwrap()
    }

    #[test]
    fn phase_rotation_round_trips() {
        let spec = SeedSpec::from_complex(3, &[(1.0, 0.2), (-0.3, -0.4)]).unwrap();
        let z = spec.to_complex();
        let r = spec.rotated().to_complex();
        let w = (2.0 * PI / 3.0).sin_cos();
        for (a, b) in z.iter().zip(&r) {
            let rot = (a.0 * w.1 - a.1 * w.0, a.0 * w.0 + a.1 * w.1);
            assert!((rot.0 - b.0).abs() < 1e-12 && (rot.1 - b.1).abs() < 1e-12);
        }
        assert_eq!(spec.rotated().rotated().rotated(), spec);
    }

    #[test]
    fn positive_seed_is_equivariant_and_on_nehari() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (params, k) in [
            (SystemParams::two_coupled(1.0, 1.0, -1.0), 2),
            (three(), 1),
            (three(), 2),
        ] {
            let class = SymmetryClass::positive(k, params.p());
            for m in 1..=3 {
                let spec = SeedSpec::random(params.p(), m, &mut rng).unwrap();
                let s = seed_positive(&g, &class, &spec, &params).unwrap();
                let t = seed_positive(&g, &class, &spec.rotated(), &params).unwrap();
                assert_eq!(t, sigma_permute(&s, &params).unwrap());
                let steps = (72 / (params.p() * k)) as i64;
                for j in 0..params.n() - 1 {
                    assert_eq!(s.component(j + 1), &s.component(j).rotate(steps));
                }
                let rep = nehari_residuals(&params, &s, Branch::Positive, 1e-8).unwrap();
                assert!(rep.feasible, "{rep:?}");
            }
        }
    }

    #[test]
    fn real_seed_has_disjoint_components() {
        let g = grid();
        let params = SystemParams::two_coupled(1.0, 1.0, -1.0);
        let spec = SeedSpec::from_complex(2, &[(1.0, 0.0)]).unwrap();
        assert_eq!(spec.phases[0].sector, 0);
        assert_eq!(spec.phases[0].offset, 0.0);
        let s = seed_positive(&g, &SymmetryClass::positive(1, 2), &spec, &params).unwrap();
        let prod = s.component(0).zip_map(s.component(1), |a, b| a * b);
        assert_eq!(prod.max_abs(), 0.0);
        assert!(s.component(0).max() > 0.0);
    }

    #[test]
    fn nodal_seed_is_antisymmetric_and_equivariant() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for (params, k) in [(SystemParams::two_coupled(1.0, 1.0, -1.0), 1), (three(), 2)] {
            let class = SymmetryClass::nodal(k, params.p());
            for m in 1..=2 {
                let spec = SeedSpec::random(params.p(), m, &mut rng).unwrap();
                let s = seed_nodal(&g, &class, &spec, &params).unwrap();
                for u in s.components() {
                    assert_eq!(u.scale(-1.0), u.rotate((72 / (2 * k)) as i64));
                }
                let t = seed_nodal(&g, &class, &spec.rotated(), &params).unwrap();
                assert_eq!(t, sigma_permute(&s, &params).unwrap());
                let rep = nehari_residuals(&params, &s, Branch::Nodal, 1e-8).unwrap();
                assert!(rep.feasible, "{rep:?}");
                for a in 0..params.n() {
                    for b in a + 1..params.n() {
                        let prod = s.component(a).zip_map(s.component(b), |x, y| x * y);
                        assert_eq!(prod.max_abs(), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn nodal_windows_never_vanish_together() {
        let g = grid();
        let params = SystemParams::two_coupled(1.0, 1.0, -1.0);
        let class = SymmetryClass::nodal(1, 2);
        for step in 0..64 {
            let a = 2.0 * PI * step as f64 / 64.0;
            let spec = SeedSpec::from_complex(2, &[(a.cos(), a.sin())]).unwrap();
            let s = seed_nodal_raw(&g, &class, &spec, &params).unwrap();
            assert!(
                s.components().iter().all(|u| u.max_abs() > 0.0),
                "phase {a}"
            );
        }
    }

    #[test]
    fn admissible_seed_reproduces_the_rotation_class() {
        let g = grid();
        let params = SystemParams::two_coupled(1.0, 1.0, -1.0);
        let (k, p) = (2, 2);
        let pair = PlanarPair {
            group: FiniteGroup::cyclic_2d(k).unwrap(),
            b: OrthoMatrix::rotation_2d(2.0 * PI / (p * k) as f64),
            x0: [1.0, 0.0],
        };
        let spec = SeedSpec::from_complex(2, &[(0.6, 0.3), (0.2, -0.5)]).unwrap();
        let s = seed_admissible(&g, &pair, &spec, &params).unwrap();
        let steps = (72 / (p * k)) as i64;
        let (u, v) = (s.component(0), s.component(1));
        assert!(v.axpy(-1.0, &u.rotate(steps)).max_abs() <= 1e-10 * u.max_abs());
        assert!(u.axpy(-1.0, &u.rotate(72 / k as i64)).max_abs() <= 1e-10 * u.max_abs());
        let prod = u.zip_map(v, |a, b| a * b);
        assert_eq!(prod.max_abs(), 0.0);
        let rep = nehari_residuals(&params, &s, Branch::Positive, 1e-8).unwrap();
        assert!(rep.feasible);
    }
}
