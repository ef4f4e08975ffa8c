//! Oracles shared by the integration tests. They evaluate elements by direct
//! trigonometric sums and use determinants and eigen/singular value solvers of
//! nalgebra directly, without going through the library's functionals.

#![allow(dead_code)]

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use nchardy::{Element, ElementData};
use num_complex::Complex64;

pub type Mat = DMatrix<Complex64>;

/// `x(theta) = sum_k c_k e^{i k theta}`, or the matrix itself.
pub fn eval(x: &Element, theta: f64) -> Mat {
    match x.data() {
        ElementData::Matrix(m) => m.clone(),
        ElementData::Torus(c) => {
            let n = x.n();
            let mut out = Mat::zeros(n, n);
            for (&k, m) in c {
                out += m * Complex64::from_polar(1.0, k as f64 * theta);
            }
            out
        }
    }
}

/// Values at `m` equispaced nodes (one value in the matrix model).
pub fn nodes(x: &Element, m: usize) -> Vec<Mat> {
    if x.model().is_torus() {
        (0..m).map(|j| eval(x, TAU * j as f64 / m as f64)).collect()
    } else {
        vec![eval(x, 0.0)]
    }
}

/// Square roots of the eigenvalues of `m^* m`.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    (m.adjoint() * m).symmetric_eigen().eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect()
}

/// Smallest singular value as `1 / |m^{-1}|`, zero for an exactly singular matrix.
pub fn sigma_min(m: &Mat) -> f64 {
    match m.clone().try_inverse() {
        Some(inv) => {
            let top = (inv.adjoint() * &inv).symmetric_eigen().eigenvalues.iter().copied().fold(0.0, f64::max);
            1.0 / top.sqrt()
        }
        None => 0.0,
    }
}

/// `(node average of tr|x|^p / n)^{1/p}`.
pub fn pnorm(values: &[Mat], p: f64) -> f64 {
    let n = values[0].nrows() as f64;
    let total: f64 = values.iter().flat_map(singular_values).map(|s| s.powf(p)).sum();
    (total / (n * values.len() as f64)).powf(1.0 / p)
}

/// `exp(node average of log|det x| / n)`.
pub fn det(values: &[Mat]) -> f64 {
    let n = values[0].nrows() as f64;
    let total: f64 = values.iter().map(|v| v.determinant().norm().ln()).sum();
    (total / (n * values.len() as f64)).exp()
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_diff(a: &Mat, b: &Mat) -> f64 {
    max_abs(&(a - b))
}

/// Hermitian power `m^s` by eigendecomposition.
pub fn hermitian_pow(m: &Mat, s: f64) -> Mat {
    let eig = m.clone().symmetric_eigen();
    let d = Mat::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(l.powf(s), 0.0)));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

pub fn min_eigenvalue(m: &Mat) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Rank of the span of the given matrices, thresholded at `rel` times the top singular value.
pub fn span_rank(ms: &[Mat], rel: f64) -> usize {
    if ms.is_empty() {
        return 0;
    }
    let n = ms[0].nrows();
    let stacked = Mat::from_fn(n * n, ms.len(), |r, c| ms[c][(r % n, r / n)]);
    let s = singular_values(&stacked);
    let top = s.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel * top).count()
}

pub fn unit(n: usize, i: usize, j: usize) -> Mat {
    let mut m = Mat::zeros(n, n);
    m[(i, j)] = Complex64::new(1.0, 0.0);
    m
}

/// Block index of each row for a flag.
pub fn block_index(blocks: &[usize]) -> Vec<usize> {
    blocks.iter().enumerate().flat_map(|(b, &len)| std::iter::repeat_n(b, len)).collect()
}

/// Matrix units spanning `A` (block upper triangular) for a flag.
pub fn a_basis(blocks: &[usize]) -> Vec<Mat> {
    let idx = block_index(blocks);
    let n = idx.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if idx[i] <= idx[j] {
                out.push(unit(n, i, j));
            }
        }
    }
    out
}

/// Largest entry outside the block upper triangular pattern.
pub fn below_flag(m: &Mat, blocks: &[usize]) -> f64 {
    let idx = block_index(blocks);
    let mut d: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if idx[i] > idx[j] {
                d = d.max(m[(i, j)].norm());
            }
        }
    }
    d
}

/// Largest entry outside the block diagonal.
pub fn off_diagonal_blocks(m: &Mat, blocks: &[usize]) -> f64 {
    let idx = block_index(blocks);
    let mut d: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if idx[i] != idx[j] {
                d = d.max(m[(i, j)].norm());
            }
        }
    }
    d
}

/// Block-diagonal compression.
pub fn block_diagonal(m: &Mat, blocks: &[usize]) -> Mat {
    let idx = block_index(blocks);
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| if idx[i] == idx[j] { m[(i, j)] } else { Complex64::new(0.0, 0.0) })
}
