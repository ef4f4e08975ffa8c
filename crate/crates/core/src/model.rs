//! The two concrete subdiagonal-algebra models.
//!
//! * `MatrixBlock`: `M = M_n` with the normalized trace, `A` the block upper
//!   triangular matrices along a flag `blocks`, `D` the block diagonal ones and
//!   `Phi` the block-diagonal compression.
//! * `TorusMatrix` / `TorusScalar`: `M = L^inf(T; M_n)`, `A` the analytic
//!   matrix functions, `D` the constants and `Phi` the zeroth Fourier
//!   coefficient. Elements are trigonometric polynomials of degree at most
//!   `degree`; integrals are evaluated on `quad_nodes` uniform nodes.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    MatrixBlock,
    TorusMatrix,
    TorusScalar,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelKind::MatrixBlock => "matrix-block",
            ModelKind::TorusMatrix => "torus-matrix",
            ModelKind::TorusScalar => "torus-scalar",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AlgebraModel {
    kind: ModelKind,
    n: usize,
    blocks: Vec<usize>,
    degree: usize,
    quad_nodes: usize,
}

impl AlgebraModel {
    /// Block upper triangular matrices along the flag given by `blocks`.
    pub fn matrix_block(blocks: &[usize]) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidModel("empty block list".into()));
        }
        if blocks.contains(&0) {
            return Err(Error::InvalidModel(format!("zero-sized block in {blocks:?}")));
        }
        Ok(Self {
            kind: ModelKind::MatrixBlock,
            n: blocks.iter().sum(),
            blocks: blocks.to_vec(),
            degree: 0,
            quad_nodes: 1,
        })
    }

    /// Upper triangular `n x n` matrices (every block of size one).
    pub fn triangular(n: usize) -> Result<Self> {
        Self::matrix_block(&vec![1; n])
    }

    /// The degenerate case `A = M = M_n`.
    pub fn full(n: usize) -> Result<Self> {
        Self::matrix_block(&[n])
    }

    /// Torus model with `n x n` matrix coefficients; `n == 1` gives the scalar model.
    pub fn torus(n: usize, degree: usize, quad_nodes: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidModel("matrix dimension must be positive".into()));
        }
        if quad_nodes < 4 * degree + 1 {
            return Err(Error::InvalidModel(format!(
                "{quad_nodes} quadrature nodes cannot integrate degree {degree} products exactly (need >= {})",
                4 * degree + 1
            )));
        }
        let kind = if n == 1 { ModelKind::TorusScalar } else { ModelKind::TorusMatrix };
        Ok(Self { kind, n, blocks: Vec::new(), degree, quad_nodes })
    }

    /// Torus model with the minimal admissible node count `4N + 1`.
    pub fn torus_minimal(n: usize, degree: usize) -> Result<Self> {
        Self::torus(n, degree, 4 * degree + 1)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn quad_nodes(&self) -> usize {
        self.quad_nodes
    }

    pub fn is_torus(&self) -> bool {
        self.kind != ModelKind::MatrixBlock
    }

    /// True when every block has size one.
    pub fn is_fully_triangular(&self) -> bool {
        self.kind == ModelKind::MatrixBlock && self.blocks.iter().all(|&b| b == 1)
    }

    /// Same algebra with a different support bound. The node count is doubled
    /// until it integrates products of the new degree exactly.
    pub fn with_degree(&self, degree: usize) -> Self {
        if !self.is_torus() {
            return self.clone();
        }
        let mut k = self.quad_nodes;
        if k < 4 * degree + 1 {
            while k < 4 * degree + 1 {
                k = 2 * k + 1;
            }
            log::warn!(
                "torus degree grew to {degree}; quadrature nodes raised from {} to {k}",
                self.quad_nodes
            );
        }
        Self { degree, quad_nodes: k, ..self.clone() }
    }

    /// Derived model for computed (non-polynomial) outputs: degree `degree` and at
    /// least `min_nodes` nodes, silently satisfying `K >= 4N + 1`.
    pub(crate) fn derived(&self, degree: usize, min_nodes: usize) -> Self {
        let k = min_nodes.max(self.quad_nodes).max(4 * degree + 1);
        Self { degree, quad_nodes: k, ..self.clone() }
    }

    /// Checks that two models describe the same algebra (node counts may differ).
    pub fn check_compatible(&self, other: &AlgebraModel) -> Result<()> {
        let same = self.kind == other.kind && self.n == other.n && self.blocks == other.blocks;
        if same {
            Ok(())
        } else {
            Err(Error::ModelMismatch(format!(
                "{} (n = {}, blocks {:?}) vs {} (n = {}, blocks {:?})",
                self.kind, self.n, self.blocks, other.kind, other.n, other.blocks
            )))
        }
    }

    /// Index ranges of the diagonal blocks.
    pub fn block_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.blocks
            .iter()
            .map(|&b| {
                let r = start..start + b;
                start += b;
                r
            })
            .collect()
    }

    /// Block index of every row/column.
    pub fn block_index(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(i, &b)| std::iter::repeat_n(i, b))
            .collect()
    }

    /// Entry pattern of `A`: `(i, j)` is allowed iff `block(i) <= block(j)`.
    pub fn a_pattern(&self) -> Vec<(usize, usize)> {
        let idx = self.block_index();
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if idx[i] <= idx[j] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Entry pattern of `A_0 = A ∩ ker Phi`: strictly block upper triangular.
    pub fn a0_pattern(&self) -> Vec<(usize, usize)> {
        let idx = self.block_index();
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if idx[i] < idx[j] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Complex dimension of `A` (matrix-block model only).
    pub fn dim_a(&self) -> usize {
        self.a_pattern().len()
    }

    /// Uniform quadrature nodes `2 pi j / K`.
    pub fn nodes(&self) -> Vec<f64> {
        node_angles(self.quad_nodes)
    }
}

pub(crate) fn node_angles(k: usize) -> Vec<f64> {
    (0..k).map(|j| 2.0 * PI * j as f64 / k as f64).collect()
}
