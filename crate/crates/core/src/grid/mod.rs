//! Cell-centered polar discretization of a ball or annulus.
//!
//! Radial nodes sit at cell centers `r_i = r_inner + (i + 1/2) Δr`, so a ball
//! never carries a node at the origin. Angular nodes are `θ_m = m Δθ` with
//! `Δθ = 2π / n_theta`. Quadrature is the midpoint rule with weight
//! `r_i Δr Δθ`.
//!
//! The discrete Laplacian is written in flux form. With face radii
//! `r_{i±1/2}` the radial part is
//!
//! ```text
//!   [ r_{i+1/2} (u_{i+1} - u_i) - r_{i-1/2} (u_i - u_{i-1}) ] / (r_i Δr²)
//! ```
//!
//! and the Dirichlet condition on a boundary face is imposed with the mirrored
//! ghost value `-u`, which places the zero exactly on the face. On a ball the
//! innermost ring's inner face is the origin: the cell-centered closure
//! through the center couples ring 0 to its antipodal column with the face
//! weight `r_{-1/2} = 0`, so that flux drops out identically. Because
//! everything is in flux form, `-Δ_k` is symmetric under the quadrature inner
//! product and [`PolarGrid::dirichlet_form`] is exactly its quadratic form.

mod helmholtz;

pub use helmholtz::HelmholtzSolver;

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry and resolution of a polar grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Inner radius; `0` encodes a ball.
    pub r_inner: f64,
    pub r_outer: f64,
    /// Number of radial cells.
    pub n_r: usize,
    /// Number of angular nodes.
    pub n_theta: usize,
    /// Rotations by `2π / alignment_order` must be exact index shifts.
    pub alignment_order: usize,
}

impl GridSpec {
    pub fn ball(r_outer: f64, n_r: usize, n_theta: usize, alignment_order: usize) -> Self {
        Self {
            r_inner: 0.0,
            r_outer,
            n_r,
            n_theta,
            alignment_order,
        }
    }

    pub fn annulus(
        r_inner: f64,
        r_outer: f64,
        n_r: usize,
        n_theta: usize,
        alignment_order: usize,
    ) -> Self {
        Self {
            r_inner,
            r_outer,
            n_r,
            n_theta,
            alignment_order,
        }
    }

    pub fn is_ball(&self) -> bool {
        self.r_inner == 0.0
    }

    fn validate(&self) -> Result<()> {
        if !(self.r_inner >= 0.0) || !self.r_inner.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "r_inner must be finite and >= 0, got {}",
                self.r_inner
            )));
        }
        if !(self.r_outer > self.r_inner) || !self.r_outer.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "r_outer ({}) must exceed r_inner ({})",
                self.r_outer, self.r_inner
            )));
        }
        if self.n_r == 0 || self.n_theta == 0 || self.alignment_order == 0 {
            return Err(Error::InvalidGrid(
                "n_r, n_theta and alignment_order must be positive".into(),
            ));
        }
        if self.n_theta % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "n_theta = {} must be even so the antipodal map is exact",
                self.n_theta
            )));
        }
        if self.n_theta % self.alignment_order != 0 {
            return Err(Error::InvalidGrid(format!(
                "n_theta = {} is not divisible by alignment_order = {}",
                self.n_theta, self.alignment_order
            )));
        }
        Ok(())
    }
}

/// A validated polar grid with precomputed nodes, face radii and weights.
#[derive(Debug, Clone)]
pub struct PolarGrid {
    spec: GridSpec,
    dr: f64,
    dtheta: f64,
    radii: Vec<f64>,
    faces: Vec<f64>,
    ring_weights: Vec<f64>,
}

impl PartialEq for PolarGrid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl PolarGrid {
    /// Builds the grid, rejecting specs whose angular resolution cannot
    /// represent the requested rotations exactly.
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let dr = (spec.r_outer - spec.r_inner) / spec.n_r as f64;
        let dtheta = 2.0 * PI / spec.n_theta as f64;
        let radii: Vec<f64> = (0..spec.n_r)
            .map(|i| spec.r_inner + (i as f64 + 0.5) * dr)
            .collect();
        let faces: Vec<f64> = (0..=spec.n_r)
            .map(|i| spec.r_inner + i as f64 * dr)
            .collect();
        let ring_weights = radii.iter().map(|r| r * dr * dtheta).collect();
        Ok(Self {
            spec,
            dr,
            dtheta,
            radii,
            faces,
            ring_weights,
        })
    }

    /// Convenience wrapper returning a shared handle.
    pub fn shared(spec: GridSpec) -> Result<Arc<Self>> {
        Self::new(spec).map(Arc::new)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn n_r(&self) -> usize {
        self.spec.n_r
    }
    pub fn n_theta(&self) -> usize {
        self.spec.n_theta
    }
    pub fn len(&self) -> usize {
        self.spec.n_r * self.spec.n_theta
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn dr(&self) -> f64 {
        self.dr
    }
    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }
    /// Cell-center radii `r_i`.
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
    /// Face radii `r_{i-1/2}`, `i = 0..=n_r`.
    pub fn faces(&self) -> &[f64] {
        &self.faces
    }
    pub fn theta(&self, m: usize) -> f64 {
        m as f64 * self.dtheta
    }
    /// Quadrature weight shared by every node of ring `i`.
    pub fn ring_weight(&self, i: usize) -> f64 {
        self.ring_weights[i]
    }
    pub fn ring_weights(&self) -> &[f64] {
        &self.ring_weights
    }
    #[inline]
    pub fn index(&self, i: usize, m: usize) -> usize {
        i * self.spec.n_theta + m
    }

    /// Analytic area `π (r_outer² - r_inner²)`.
    pub fn area(&self) -> f64 {
        PI * (self.spec.r_outer.powi(2) - self.spec.r_inner.powi(2))
    }

    /// Number of index steps for a rotation by `2π / order`.
    pub fn steps_for_order(&self, order: usize) -> Result<usize> {
        if order == 0 || self.spec.n_theta % order != 0 {
            return Err(Error::Alignment {
                n_theta: self.spec.n_theta,
                order,
            });
        }
        Ok(self.spec.n_theta / order)
    }

    pub fn check(&self, f: &Field) -> Result<()> {
        if f.grid.spec == self.spec {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `Σ w_im f_im`.
    pub fn integrate(&self, f: &Field) -> Result<f64> {
        self.check(f)?;
        Ok(f.integral())
    }

    /// Second-order stencil of `(1/r)∂_r(r ∂_r u) + (k²/r²) ∂²_θ u`.
    pub fn laplacian_k(&self, f: &Field, k: usize) -> Result<Field> {
        self.check(f)?;
        Ok(f.laplacian_k(k))
    }

    /// `∫ |∇f|² + λ ∫ f²`, the quadratic form of `-Δ_1 + λ`.
    pub fn h1_norm_sq(&self, f: &Field, lambda: f64) -> Result<f64> {
        self.check(f)?;
        Ok(f.dirichlet_form(1) + lambda * f.norm_sq())
    }

    pub fn rotate_field(&self, f: &Field, steps: i64) -> Result<Field> {
        self.check(f)?;
        Ok(f.rotate(steps))
    }

    pub fn antipodal(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        Ok(f.antipodal())
    }

    pub fn reflect_field(&self, f: &Field, axis_index: i64) -> Result<Field> {
        self.check(f)?;
        Ok(f.reflect(axis_index))
    }

    /// Radial flux coefficients `(lower, upper, boundary)` of ring `i`, in
    /// units of `1 / (r_i Δr²)`.
    #[inline]
    fn radial_coefficients(&self, i: usize) -> (f64, f64, f64) {
        let n = self.spec.n_r;
        let lower = if i > 0 { self.faces[i] } else { 0.0 };
        let upper = if i + 1 < n { self.faces[i + 1] } else { 0.0 };
        let mut boundary = 0.0;
        if i + 1 == n {
            boundary += 2.0 * self.spec.r_outer;
        }
        if i == 0 && !self.spec.is_ball() {
            boundary += 2.0 * self.spec.r_inner;
        }
        (lower, upper, boundary)
    }
}

/// One scalar grid function.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<PolarGrid>,
    values: Vec<f64>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.grid.spec == other.grid.spec && self.values == other.values
    }
}

impl Field {
    pub fn zeros(grid: &Arc<PolarGrid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: &Arc<PolarGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("field values must be finite".into()));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Samples `f(r, θ)` at every node.
    pub fn from_fn(grid: &Arc<PolarGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for &r in grid.radii() {
            for m in 0..grid.n_theta() {
                values.push(f(r, grid.theta(m)));
            }
        }
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<PolarGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    #[inline]
    pub fn at(&self, i: usize, m: usize) -> f64 {
        self.values[self.grid.index(i, m)]
    }
    pub fn ring(&self, i: usize) -> &[f64] {
        let n = self.grid.n_theta();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        self.grid.spec == other.grid.spec
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert!(self.same_grid(other));
        Field {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + s * b)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Quadrature `Σ w_im f_im`, ring by ring.
    pub fn integral(&self) -> f64 {
        let n = self.grid.n_theta();
        self.values
            .chunks_exact(n)
            .zip(self.grid.ring_weights())
            .map(|(ring, w)| w * ring.iter().sum::<f64>())
            .sum()
    }

    /// Quadrature inner product `Σ w_im f_im g_im`.
    pub fn dot(&self, other: &Field) -> f64 {
        debug_assert!(self.same_grid(other));
        let n = self.grid.n_theta();
        self.values
            .chunks_exact(n)
            .zip(other.values.chunks_exact(n))
            .zip(self.grid.ring_weights())
            .map(|((a, b), w)| w * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn l2_norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Discrete `Δ_k`.
    pub fn laplacian_k(&self, k: usize) -> Field {
        let grid = &*self.grid;
        let (nr, nt) = (grid.n_r(), grid.n_theta());
        let kk = (k * k) as f64;
        let dr2 = grid.dr * grid.dr;
        let dt2 = grid.dtheta * grid.dtheta;
        let u = &self.values;
        let mut out = vec![0.0; u.len()];
        for i in 0..nr {
            let r = grid.radii[i];
            let (lo, up, bnd) = grid.radial_coefficients(i);
            let rad = 1.0 / (r * dr2);
            let ang = kk / (r * r * dt2);
            for m in 0..nt {
                let c = u[i * nt + m];
                let mut flux = -(bnd * c);
                if i > 0 {
                    flux -= lo * (c - u[(i - 1) * nt + m]);
                }
                if i + 1 < nr {
                    flux += up * (u[(i + 1) * nt + m] - c);
                }
                let left = u[i * nt + (m + nt - 1) % nt];
                let right = u[i * nt + (m + 1) % nt];
                out[i * nt + m] = rad * flux + ang * (left - 2.0 * c + right);
            }
        }
        Field {
            grid: Arc::clone(&self.grid),
            values: out,
        }
    }

    /// `∫ (u_r² + (k²/r²) u_θ²)`: forward differences in `r` on the face
    /// metric and in `θ` on the ring metric, so that the value equals
    /// `-⟨Δ_k u, u⟩` exactly.
    pub fn dirichlet_form(&self, k: usize) -> f64 {
        let grid = &*self.grid;
        let (nr, nt) = (grid.n_r(), grid.n_theta());
        let u = &self.values;
        let radial_scale = grid.dtheta / grid.dr;
        let kk = (k * k) as f64;
        let mut radial = 0.0;
        let mut angular = 0.0;
        for i in 0..nr {
            let (_, up, bnd) = grid.radial_coefficients(i);
            let row = &u[i * nt..(i + 1) * nt];
            let mut ring_r = 0.0;
            if i + 1 < nr {
                let next = &u[(i + 1) * nt..(i + 2) * nt];
                ring_r += up
                    * row
                        .iter()
                        .zip(next)
                        .map(|(a, b)| (b - a) * (b - a))
                        .sum::<f64>();
            }
            if bnd != 0.0 {
                ring_r += bnd * row.iter().map(|a| a * a).sum::<f64>();
            }
            radial += radial_scale * ring_r;
            let mut ring_t = 0.0;
            for m in 0..nt {
                let d = row[(m + 1) % nt] - row[m];
                ring_t += d * d;
            }
            angular += grid.dr / (grid.radii[i] * grid.dtheta) * ring_t;
        }
        radial + kk * angular
    }

    /// Symmetric bilinear form associated with [`Field::dirichlet_form`].
    pub fn dirichlet_bilinear(&self, other: &Field, k: usize) -> f64 {
        -self.laplacian_k(k).dot(other)
    }

    /// Rotation by `steps · Δθ`: `(R f)(θ) = f(θ - steps Δθ)`.
    pub fn rotate(&self, steps: i64) -> Field {
        let nt = self.grid.n_theta();
        let s = steps.rem_euclid(nt as i64) as usize;
        if s == 0 {
            return self.clone();
        }
        let mut out = vec![0.0; self.values.len()];
        for (src, dst) in self.values.chunks_exact(nt).zip(out.chunks_exact_mut(nt)) {
            dst[s..].copy_from_slice(&src[..nt - s]);
            dst[..s].copy_from_slice(&src[nt - s..]);
        }
        Field {
            grid: Arc::clone(&self.grid),
            values: out,
        }
    }

    /// `f(-x)`, rotation by `n_theta / 2` steps.
    pub fn antipodal(&self) -> Field {
        self.rotate((self.grid.n_theta() / 2) as i64)
    }

    /// Reflection across the line through the origin at angle
    /// `axis_index · Δθ / 2`: node `m` maps to `(axis_index - m) mod n_theta`.
    /// Even `axis_index` puts the axis on a node, odd between two nodes.
    pub fn reflect(&self, axis_index: i64) -> Field {
        let nt = self.grid.n_theta() as i64;
        let mut out = vec![0.0; self.values.len()];
        for (src, dst) in self
            .values
            .chunks_exact(nt as usize)
            .zip(out.chunks_exact_mut(nt as usize))
        {
            for m in 0..nt {
                dst[(axis_index - m).rem_euclid(nt) as usize] = src[m as usize];
            }
        }
        Field {
            grid: Arc::clone(&self.grid),
            values: out,
        }
    }
}
