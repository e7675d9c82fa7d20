use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of the coupled system together with the block structure
/// `N = p B` used by the permutation symmetry.
///
/// The coupling matrix stores `β_jj = μ_j` on its diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    p: usize,
    lambda: Vec<f64>,
    mu: Vec<f64>,
    beta: Vec<Vec<f64>>,
}

pub fn is_prime(p: usize) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

impl SystemParams {
    /// `beta` is the full `N x N` coupling matrix; its diagonal is replaced
    /// by `mu`.
    pub fn new(p: usize, lambda: Vec<f64>, mu: Vec<f64>, mut beta: Vec<Vec<f64>>) -> Result<Self> {
        let n = lambda.len();
        if n == 0 {
            return Err(Error::InvalidParams(
                "system needs at least one component".into(),
            ));
        }
        if !is_prime(p) {
            return Err(Error::InvalidParams(format!("p = {p} is not prime")));
        }
        if n % p != 0 {
            return Err(Error::InvalidParams(format!(
                "p = {p} does not divide N = {n}"
            )));
        }
        if mu.len() != n || beta.len() != n || beta.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidParams(format!(
                "lambda, mu and beta must all have dimension N = {n}"
            )));
        }
        let finite = lambda
            .iter()
            .chain(&mu)
            .chain(beta.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("coefficients must be finite".into()));
        }
        for (j, row) in beta.iter_mut().enumerate() {
            row[j] = mu[j];
        }
        Ok(Self {
            p,
            lambda,
            mu,
            beta,
        })
    }

    /// The symmetric 2-coupled system with a single coupling constant.
    pub fn two_coupled(lambda: f64, mu: f64, beta: f64) -> Self {
        Self::new(
            2,
            vec![lambda; 2],
            vec![mu; 2],
            vec![vec![mu, beta], vec![beta, mu]],
        )
        .expect("two-coupled parameters are structurally valid")
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn blocks(&self) -> usize {
        self.n() / self.p
    }
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }
    pub fn beta(&self, i: usize, j: usize) -> f64 {
        self.beta[i][j]
    }
    pub fn beta_matrix(&self) -> &[Vec<f64>] {
        &self.beta
    }

    /// Block index and position inside the block of component `j`.
    pub fn block_of(&self, j: usize) -> (usize, usize) {
        (j / self.p, j % self.p)
    }

    /// Index reached from `j` by a cyclic shift of `shift` inside its block.
    pub fn shift_in_block(&self, j: usize, shift: i64) -> usize {
        let (b, pos) = self.block_of(j);
        b * self.p + (pos as i64 + shift).rem_euclid(self.p as i64) as usize
    }

    /// Whether permuting components by `perm` (component `j` moves to
    /// `perm[j]`) leaves every coefficient unchanged.
    pub fn is_invariant_under(&self, perm: &[usize], tol: f64) -> bool {
        let n = self.n();
        (0..n).all(|i| {
            (self.lambda[perm[i]] - self.lambda[i]).abs() <= tol
                && (0..n).all(|j| (self.beta[perm[i]][perm[j]] - self.beta[i][j]).abs() <= tol)
        })
    }
}

/// A failed structural assumption on the coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// (A) λ must be positive.
    LambdaNonPositive { index: usize },
    /// (A) λ must be constant within each block.
    LambdaNotBlockConstant { block: usize, index: usize },
    /// (B) μ must be positive.
    MuNonPositive { index: usize },
    /// (B) β must be symmetric.
    BetaAsymmetric { i: usize, j: usize },
    /// (B) off-diagonal β must be non-positive.
    BetaAttractive { i: usize, j: usize },
    /// (C) β must be invariant under the cyclic shift inside a block.
    BlockShiftInvariance { block: usize, i: usize, j: usize },
    /// (D) μ_j + Σ_{i in block, i≠j} β_ij must be non-positive.
    BlockRepulsion { index: usize, sum: f64 },
}

impl Violation {
    pub fn assumption(&self) -> char {
        match self {
            Self::LambdaNonPositive { .. } | Self::LambdaNotBlockConstant { .. } => 'A',
            Self::MuNonPositive { .. }
            | Self::BetaAsymmetric { .. }
            | Self::BetaAttractive { .. } => 'B',
            Self::BlockShiftInvariance { .. } => 'C',
            Self::BlockRepulsion { .. } => 'D',
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) ", self.assumption())?;
        match self {
            Self::LambdaNonPositive { index } => write!(f, "lambda[{index}] must be positive"),
            Self::LambdaNotBlockConstant { block, index } => {
                write!(f, "lambda[{index}] differs from the rest of block {block}")
            }
            Self::MuNonPositive { index } => write!(f, "mu[{index}] must be positive"),
            Self::BetaAsymmetric { i, j } => write!(f, "beta[{i}][{j}] != beta[{j}][{i}]"),
            Self::BetaAttractive { i, j } => write!(f, "beta[{i}][{j}] must be <= 0"),
            Self::BlockShiftInvariance { block, i, j } => write!(
                f,
                "beta is not invariant under the cyclic shift of block {block} (entry [{i}][{j}])"
            ),
            Self::BlockRepulsion { index, sum } => write!(
                f,
                "mu[{index}] + sum of in-block couplings = {sum} must be <= 0"
            ),
        }
    }
}

const SHIFT_TOL: f64 = 1e-12;

/// Checks assumptions (A)-(D); an empty list means all hold.
pub fn validate_params(params: &SystemParams) -> Vec<Violation> {
    let n = params.n();
    let p = params.p();
    let mut out = Vec::new();

    for (j, &l) in params.lambda.iter().enumerate() {
        if !(l > 0.0) {
            out.push(Violation::LambdaNonPositive { index: j });
        }
    }
    for b in 0..params.blocks() {
        let first = params.lambda[b * p];
        for j in b * p + 1..(b + 1) * p {
            if params.lambda[j] != first {
                out.push(Violation::LambdaNotBlockConstant { block: b, index: j });
            }
        }
    }

    for (j, &m) in params.mu.iter().enumerate() {
        if !(m > 0.0) {
            out.push(Violation::MuNonPositive { index: j });
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if params.beta[i][j] != params.beta[j][i] {
                out.push(Violation::BetaAsymmetric { i, j });
            }
        }
        for j in 0..n {
            if i != j && params.beta[i][j] > 0.0 {
                out.push(Violation::BetaAttractive { i, j });
            }
        }
    }

    // (C): the product of adjacent row/column swaps inside block b composes
    // to the cyclic shift of that block; β must commute with it.
    for b in 0..params.blocks() {
        let perm: Vec<usize> = (0..n)
            .map(|j| {
                if j / p == b {
                    params.shift_in_block(j, 1)
                } else {
                    j
                }
            })
            .collect();
        'outer: for i in 0..n {
            for j in 0..n {
                if (params.beta[perm[i]][perm[j]] - params.beta[i][j]).abs() > SHIFT_TOL {
                    out.push(Violation::BlockShiftInvariance { block: b, i, j });
                    break 'outer;
                }
            }
        }
    }

    for j in 0..n {
        let (b, _) = params.block_of(j);
        let sum = params.mu[j]
            + (b * p..(b + 1) * p)
                .filter(|&i| i != j)
                .map(|i| params.beta[i][j])
                .sum::<f64>();
        if sum > 0.0 {
            out.push(Violation::BlockRepulsion { index: j, sum });
        }
    }
    out
}
