//! Finite orthogonal groups in two or three dimensions, orbits and the
//! admissibility test for a pair `(G, b)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MATRIX_TOL: f64 = 1e-12;
const POINT_TOL: f64 = 1e-9;

pub type Point = Vec<f64>;

/// Dense `n x n` matrix, `n ∈ {2, 3}`, row major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthoMatrix {
    n: usize,
    data: Vec<f64>,
}

impl OrthoMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if !(n == 2 || n == 3) || data.len() != n * n {
            return Err(Error::InvalidParams(format!(
                "expected a 2x2 or 3x3 matrix, got dimension {n} with {} entries",
                data.len()
            )));
        }
        let m = Self { n, data };
        if !m.mul(&m.transpose()).approx_eq(&Self::identity(n)) {
            return Err(Error::InvalidParams("matrix is not orthogonal".into()));
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    /// Counterclockwise planar rotation.
    pub fn rotation_2d(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            n: 2,
            data: vec![c, -s, s, c],
        }
    }

    /// Rotation about the `x_3` axis.
    pub fn rotation_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            n: 3,
            data: vec![c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0],
        }
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut data = vec![0.0; n * n];
        for (i, e) in entries.iter().enumerate() {
            data[i * n + i] = *e;
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = (0..n).map(|l| self.entry(i, l) * other.entry(l, j)).sum();
            }
        }
        Self { n, data }
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.entry(i, j);
            }
        }
        Self { n, data }
    }

    /// For an orthogonal matrix the inverse is the transpose.
    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn pow(&self, e: usize) -> Self {
        (0..e).fold(Self::identity(self.n), |acc, _| acc.mul(self))
    }

    pub fn apply(&self, x: &[f64]) -> Point {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.entry(i, j) * x[j]).sum())
            .collect()
    }

    pub fn approx_eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| (a - b).abs() <= MATRIX_TOL)
    }
}

/// A finite group of orthogonal matrices, closed under products and inverses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiniteGroup {
    elements: Vec<OrthoMatrix>,
}

impl FiniteGroup {
    const MAX_ORDER: usize = 10_000;

    /// Validates closure, inverses and the identity.
    pub fn new(elements: Vec<OrthoMatrix>) -> Result<Self> {
        let Some(first) = elements.first() else {
            return Err(Error::InvalidParams(
                "group must contain the identity".into(),
            ));
        };
        let n = first.dim();
        if elements.iter().any(|g| g.dim() != n) {
            return Err(Error::InvalidParams(
                "group elements have mixed dimensions".into(),
            ));
        }
        let group = Self { elements };
        if !group.contains(&OrthoMatrix::identity(n)) {
            return Err(Error::InvalidParams(
                "group must contain the identity".into(),
            ));
        }
        for a in &group.elements {
            if !group.contains(&a.inverse()) {
                return Err(Error::InvalidParams(
                    "group is not closed under inverses".into(),
                ));
            }
            for b in &group.elements {
                if !group.contains(&a.mul(b)) {
                    return Err(Error::InvalidParams(
                        "group is not closed under products".into(),
                    ));
                }
            }
        }
        Ok(group)
    }

    /// Group generated by `generators` (closure under products).
    pub fn generate(n: usize, generators: &[OrthoMatrix]) -> Result<Self> {
        if generators.iter().any(|g| g.dim() != n) {
            return Err(Error::InvalidParams("generator dimension mismatch".into()));
        }
        let mut elements = vec![OrthoMatrix::identity(n)];
        let mut frontier = elements.clone();
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for a in &frontier {
                for g in generators {
                    let c = a.mul(g);
                    if !elements.iter().chain(&next).any(|e| e.approx_eq(&c)) {
                        next.push(c);
                    }
                }
            }
            elements.extend(next.iter().cloned());
            if elements.len() > Self::MAX_ORDER {
                return Err(Error::InvalidParams(
                    "generators do not span a finite group".into(),
                ));
            }
            frontier = next;
        }
        Ok(Self { elements })
    }

    pub fn trivial(n: usize) -> Self {
        Self {
            elements: vec![OrthoMatrix::identity(n)],
        }
    }

    /// `⟨R_{2π/k}⟩` in the plane.
    pub fn cyclic_2d(k: usize) -> Result<Self> {
        Self::generate(
            2,
            &[OrthoMatrix::rotation_2d(
                2.0 * std::f64::consts::PI / k as f64,
            )],
        )
    }

    /// Rotations of the tetrahedron together with the coordinate
    /// permutations: the order-24 group of permutation matrices composed
    /// with sign changes of even parity.
    pub fn tetrahedral() -> Self {
        let cycle = OrthoMatrix {
            n: 3,
            data: vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        };
        let swap = OrthoMatrix {
            n: 3,
            data: vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        };
        let flip = OrthoMatrix::diagonal(&[-1.0, -1.0, 1.0]);
        Self::generate(3, &[cycle, swap, flip]).expect("tetrahedral generators are finite")
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[OrthoMatrix] {
        &self.elements
    }

    pub fn contains(&self, m: &OrthoMatrix) -> bool {
        self.elements.iter().any(|e| e.approx_eq(m))
    }
}

fn points_close(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
        <= POINT_TOL
}

/// `{g x0 : g ∈ G}` with points closer than `1e-9` merged.
pub fn orbit(group: &FiniteGroup, x0: &[f64]) -> Result<Vec<Point>> {
    if x0.len() != group.dim() {
        return Err(Error::InvalidParams(
            "point dimension differs from group dimension".into(),
        ));
    }
    if x0.iter().all(|v| *v == 0.0) {
        return Err(Error::InvalidParams(
            "orbit base point must be nonzero".into(),
        ));
    }
    let mut out: Vec<Point> = Vec::new();
    for g in group.elements() {
        let y = g.apply(x0);
        if !out.iter().any(|q| points_close(q, &y)) {
            out.push(y);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissiblePairReport {
    /// `b g b⁻¹ ∈ G` for every `g`.
    pub normalizer_ok: bool,
    /// `b^p ∈ G`.
    pub power_in_group: bool,
    /// The orbits `G(b^s x0)`, `s = 0..p`, are pairwise disjoint.
    pub orbit_disjoint: bool,
    /// `G(b^s x0)` for `s = 0..p`.
    pub witness_orbits: Vec<Vec<Point>>,
}

impl AdmissiblePairReport {
    pub fn admissible(&self) -> bool {
        self.normalizer_ok && self.power_in_group && self.orbit_disjoint
    }
}

pub fn check_admissible(
    group: &FiniteGroup,
    b: &OrthoMatrix,
    p: usize,
    x0: &[f64],
) -> Result<AdmissiblePairReport> {
    if b.dim() != group.dim() {
        return Err(Error::InvalidParams(
            "b and the group act on different dimensions".into(),
        ));
    }
    let b_inv = b.inverse();
    let normalizer_ok = group
        .elements()
        .iter()
        .all(|g| group.contains(&b.mul(g).mul(&b_inv)));
    let power_in_group = group.contains(&b.pow(p));

    let witness_orbits = (0..p)
        .map(|s| orbit(group, &b.pow(s).apply(x0)))
        .collect::<Result<Vec<_>>>()?;
    let mut orbit_disjoint = true;
    for s in 0..p {
        for t in s + 1..p {
            let touching = witness_orbits[s]
                .iter()
                .any(|a| witness_orbits[t].iter().any(|c| points_close(a, c)));
            if touching {
                orbit_disjoint = false;
            }
        }
    }
    Ok(AdmissiblePairReport {
        normalizer_ok,
        power_in_group,
        orbit_disjoint,
        witness_orbits,
    })
}
