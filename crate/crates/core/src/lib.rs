//! Equivariant Nehari-manifold solver for N-coupled cubic elliptic systems
//!
//! ```text
//!   -Δu_j + λ_j u_j = μ_j u_j³ + Σ_{k≠j} β_jk u_j u_k²   in Ω,   u_j = 0 on ∂Ω
//! ```
//!
//! on 2-D balls and annuli. Solutions are sought inside rotation/permutation
//! symmetry classes (positive branch) or rotation/sign-flip classes (nodal
//! branch) by projected gradient descent on the Nehari set, starting from
//! equivariant seed families.
//!
//! Module map:
//!
//! - [`grid`]: cell-centered polar grids, quadrature, the anisotropic
//!   Laplacian `Δ_k`, exact rotations and reflections.
//! - [`symmetry`]: system parameters and their structural assumptions, group
//!   actions, class projections, period diagnostics, admissible pairs.
//! - [`energy`]: energies, gradients, Nehari residuals and retraction.
//! - [`solver`]: seeds, Nehari descent, multistart with orbit deduplication.
//! - [`reduction`]: the scalar reduction of the 2-coupled problem,
//!   polarization and the minimal-period check.
//! - [`cli`]: configuration, run orchestration and output files.

pub mod cli;
pub mod energy;
pub mod error;
pub mod grid;
pub mod invariants;
pub mod reduction;
pub mod solver;
pub mod symmetry;

pub use energy::{Branch, State};
pub use error::{Error, Result};
pub use grid::{Field, GridSpec, PolarGrid};
pub use symmetry::{SymmetryClass, SystemParams};
