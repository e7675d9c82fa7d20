//! Direct solver for `(-Δ_k + c) x = b` on a polar grid.
//!
//! The periodic angular second difference is diagonalized by the DFT along
//! each ring; what remains per angular mode is a real tridiagonal system in
//! the radial index. Used as the Sobolev preconditioner of the descent
//! methods.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{Field, PolarGrid};
use crate::error::{Error, Result};

pub struct HelmholtzSolver {
    grid: Arc<PolarGrid>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Thomas factorization per angular mode: sub-diagonal, inverse pivots
    /// and modified super-diagonal.
    lower: Vec<f64>,
    pivots_inv: Vec<Vec<f64>>,
    c_prime: Vec<Vec<f64>>,
}

impl std::fmt::Debug for HelmholtzSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HelmholtzSolver")
            .field("spec", self.grid.spec())
            .finish()
    }
}

impl HelmholtzSolver {
    /// Factorizes `-Δ_k + shift`; `shift` must be positive so every mode is
    /// definite.
    pub fn new(grid: &Arc<PolarGrid>, k: usize, shift: f64) -> Result<Self> {
        if !(shift > 0.0) {
            return Err(Error::InvalidParams(format!(
                "Helmholtz shift must be positive, got {shift}"
            )));
        }
        let (nr, nt) = (grid.n_r(), grid.n_theta());
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(nt);
        let inverse = planner.plan_fft_inverse(nt);
        let dr2 = grid.dr() * grid.dr();
        let dt2 = grid.dtheta() * grid.dtheta();
        let kk = (k * k) as f64;

        // Row i of -Δ_r: (lo+up+bnd) x_i - lo x_{i-1} - up x_{i+1}, over r_i Δr².
        let mut lower = vec![0.0; nr];
        let mut upper = vec![0.0; nr];
        let mut diag_radial = vec![0.0; nr];
        for i in 0..nr {
            let (lo, up, bnd) = grid.radial_coefficients(i);
            let s = 1.0 / (grid.radii()[i] * dr2);
            lower[i] = -lo * s;
            upper[i] = -up * s;
            diag_radial[i] = (lo + up + bnd) * s;
        }

        let mut pivots_inv = Vec::with_capacity(nt);
        let mut c_prime = Vec::with_capacity(nt);
        for j in 0..nt {
            let omega =
                (2.0 - 2.0 * (2.0 * std::f64::consts::PI * j as f64 / nt as f64).cos()) / dt2;
            let mut piv = vec![0.0; nr];
            let mut cp = vec![0.0; nr];
            for i in 0..nr {
                let r = grid.radii()[i];
                let diag = diag_radial[i] + kk * omega / (r * r) + shift;
                let d = if i == 0 {
                    diag
                } else {
                    diag - lower[i] * cp[i - 1]
                };
                piv[i] = 1.0 / d;
                cp[i] = upper[i] * piv[i];
            }
            pivots_inv.push(piv);
            c_prime.push(cp);
        }

        Ok(Self {
            grid: Arc::clone(grid),
            forward,
            inverse,
            lower,
            pivots_inv,
            c_prime,
        })
    }

    pub fn grid(&self) -> &Arc<PolarGrid> {
        &self.grid
    }

    /// Returns `x` with `(-Δ_k + shift) x = rhs`.
    pub fn solve(&self, rhs: &Field) -> Result<Field> {
        self.grid.check(rhs)?;
        let (nr, nt) = (self.grid.n_r(), self.grid.n_theta());
        let mut spectrum: Vec<Complex<f64>> =
            rhs.values().iter().map(|&v| Complex::new(v, 0.0)).collect();
        for ring in spectrum.chunks_exact_mut(nt) {
            self.forward.process(ring);
        }
        for j in 0..nt {
            let piv = &self.pivots_inv[j];
            let cp = &self.c_prime[j];
            // forward sweep
            let mut prev = Complex::new(0.0, 0.0);
            for i in 0..nr {
                let idx = i * nt + j;
                let d = if i == 0 {
                    spectrum[idx]
                } else {
                    spectrum[idx] - prev * self.lower[i]
                };
                prev = d * piv[i];
                spectrum[idx] = prev;
            }
            // back substitution
            for i in (0..nr.saturating_sub(1)).rev() {
                let next = spectrum[(i + 1) * nt + j];
                spectrum[i * nt + j] -= next * cp[i];
            }
        }
        for ring in spectrum.chunks_exact_mut(nt) {
            self.inverse.process(ring);
        }
        let scale = 1.0 / nt as f64;
        let values = spectrum.iter().map(|c| c.re * scale).collect();
        Field::from_values(&self.grid, values)
    }
}
