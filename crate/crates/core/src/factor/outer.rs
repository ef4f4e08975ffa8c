use nalgebra::DVector;
use serde::Serialize;

use super::spectral::wilson_grid;
use super::{certify, require_in_a, start_grid, to_element, Residuals};
use crate::element::Element;
use crate::error::{Error, Result};
use crate::functional::{fk_det, fk_det_resolved, in_a, phi, MembershipMode};
use crate::linalg::{self, cx, CMat};
use crate::torus::{self, Grid};

/// Singular-value threshold for the subspace ranks, relative to the largest.
pub const RANK_TOL: f64 = 1e-10;
/// Relative distance from the identity below which the truncated torus oracle accepts.
pub const TRUNCATED_TOL: f64 = 1e-6;
/// Default multiplier degree of the truncated torus oracle.
pub const DEFAULT_TRUNCATION: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Bilateral,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum OuterOracle {
    /// Exact subspace ranks in `M_n`.
    Rank,
    /// Distance from `1` to `span {h z^c b}`, `c <= degree`, in the coefficient L^2 norm.
    Truncated { degree: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct OuterReport {
    pub left: bool,
    pub right: bool,
    pub bilateral: bool,
    pub det_h: f64,
    pub det_phi_h: f64,
    /// `det_h > 0` and `det_h = det_phi_h` within `1e-8` relative.
    pub det_criterion: bool,
    pub rank_left: usize,
    pub rank_right: usize,
    pub rank_bilateral: usize,
    /// `dim A` (matrix model) or the number of generators per side (torus).
    pub rank_full: usize,
    pub in_algebra: bool,
    pub oracle: OuterOracle,
    /// Relative distances from `1` to the three spans (torus oracle only).
    pub residuals: Option<[f64; 3]>,
}

fn unit(n: usize, i: usize, j: usize) -> CMat {
    let mut m = linalg::zeros(n);
    m[(i, j)] = cx(1.0, 0.0);
    m
}

fn flatten(ms: &[CMat]) -> CMat {
    let n = ms.first().map_or(0, |m| m.nrows());
    let mut out = CMat::zeros(n * n, ms.len());
    for (c, m) in ms.iter().enumerate() {
        for (r, v) in m.iter().enumerate() {
            out[(r, c)] = *v;
        }
    }
    out
}

fn matrix_generators(h: &CMat, basis: &[CMat], side: Side) -> Vec<CMat> {
    match side {
        Side::Left => basis.iter().map(|b| h * b).collect(),
        Side::Right => basis.iter().map(|b| b * h).collect(),
        Side::Bilateral => basis.iter().flat_map(|a| basis.iter().map(move |b| a * h * b)).collect(),
    }
}

/// Rank of `{h b_i}`, `{b_i h}` or `{b_i h b_j}` over the matrix-unit basis of `A`.
pub fn subspace_rank(h: &Element, side: Side) -> Result<usize> {
    let m = h.as_matrix().ok_or_else(|| Error::Unsupported {
        model: h.model().kind().to_string(),
        what: "subspace rank (matrix model only)".into(),
    })?;
    let n = h.n();
    let basis: Vec<CMat> = h.model().a_pattern().into_iter().map(|(i, j)| unit(n, i, j)).collect();
    Ok(linalg::numerical_rank(&flatten(&matrix_generators(m, &basis, side)), RANK_TOL))
}

fn det_pair(h: &Element) -> (f64, f64, bool) {
    let dh = fk_det_resolved(h);
    let dp = fk_det(&phi(h));
    let agree = dh.is_positive() && (dh.value - dp.value).abs() <= 1e-8 * dh.value;
    (dh.value, dp.value, agree)
}

/// Outerness of `h` with the default oracle settings.
pub fn is_outer(h: &Element) -> OuterReport {
    is_outer_with(h, DEFAULT_TRUNCATION)
}

/// Outerness of `h`: the determinant criterion together with a span oracle,
/// exact ranks in the matrix model, truncated approximation of `1` on the torus.
pub fn is_outer_with(h: &Element, truncation: usize) -> OuterReport {
    let (det_h, det_phi_h, det_criterion) = det_pair(h);
    let in_algebra = in_a(h, MembershipMode::Structural).defect <= h.default_tol() * h.sup_abs().max(1.0);
    let n = h.n();
    if let Some(m) = h.as_matrix() {
        let basis: Vec<CMat> = h.model().a_pattern().into_iter().map(|(i, j)| unit(n, i, j)).collect();
        let rank = |side| linalg::numerical_rank(&flatten(&matrix_generators(m, &basis, side)), RANK_TOL);
        let (rank_left, rank_right, rank_bilateral) = (rank(Side::Left), rank(Side::Right), rank(Side::Bilateral));
        let full = basis.len();
        return OuterReport {
            left: in_algebra && rank_left == full,
            right: in_algebra && rank_right == full,
            bilateral: in_algebra && rank_bilateral == full,
            det_h,
            det_phi_h,
            det_criterion,
            rank_left,
            rank_right,
            rank_bilateral,
            rank_full: full,
            in_algebra,
            oracle: OuterOracle::Rank,
            residuals: None,
        };
    }

    // Torus: generators are coefficient vectors over frequencies 0..=deg(h)+L.
    let hdeg = h.support().map_or(0, |(_, hi)| hi.max(0) as usize);
    let span_deg = hdeg + truncation;
    let len = n * n * (span_deg + 1);
    let coeffs: Vec<(usize, CMat)> = (0..=hdeg).map(|k| (k, h.coefficient(k as i64))).collect();
    let mut vectors: [Vec<DVector<num_complex::Complex64>>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let push = |out: &mut Vec<DVector<num_complex::Complex64>>, shift: usize, f: &dyn Fn(&CMat) -> CMat| {
        let mut v = DVector::zeros(len);
        for (k, c) in &coeffs {
            let block = f(c);
            for (r, val) in block.iter().enumerate() {
                v[(k + shift) * n * n + r] = *val;
            }
        }
        out.push(v);
    };
    for c in 0..=truncation {
        for i in 0..n {
            for j in 0..n {
                let e = unit(n, i, j);
                push(&mut vectors[0], c, &|hk| hk * &e);
                push(&mut vectors[1], c, &|hk| &e * hk);
                for k in 0..n {
                    for l in 0..n {
                        let f = unit(n, k, l);
                        push(&mut vectors[2], c, &|hk| &e * hk * &f);
                    }
                }
            }
        }
    }
    let mut target = DVector::zeros(len);
    for i in 0..n {
        target[i * n + i] = cx(1.0, 0.0);
    }
    let mut residuals = [0.0; 3];
    let mut ranks = [0usize; 3];
    for (s, vs) in vectors.iter().enumerate() {
        let cols = CMat::from_columns(vs);
        residuals[s] = linalg::span_residual(&cols, &target, 1e-12);
        ranks[s] = linalg::numerical_rank(&cols, RANK_TOL);
    }
    let ok = |r: f64| in_algebra && r <= TRUNCATED_TOL;
    OuterReport {
        left: ok(residuals[0]),
        right: ok(residuals[1]),
        bilateral: ok(residuals[2]),
        det_h,
        det_phi_h,
        det_criterion,
        rank_left: ranks[0],
        rank_right: ranks[1],
        rank_bilateral: ranks[2],
        rank_full: n * n * (truncation + 1),
        in_algebra,
        oracle: OuterOracle::Truncated { degree: truncation },
        residuals: Some(residuals),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InnerOuter {
    pub inner: Element,
    pub outer: Element,
    /// `unitarity` and `reconstruction` refer to the inner factor and `inner * outer`.
    pub residuals: Residuals,
    /// Distance of the inner factor from `A`.
    pub inner_membership: f64,
}

/// `x = u h` with `u` inner (a unitary in `A`) and `h` outer, for `x` in `A` with
/// `det(x) > 0`. Matrix model: positive QR, whose unitary factor is block
/// diagonal. Torus: `h` is the spectral factor of `x^* x` and `u = x h^{-1}`.
pub fn inner_outer(x: &Element) -> Result<InnerOuter> {
    require_in_a(x)?;
    if !fk_det(x).is_positive() {
        return Err(Error::ZeroDeterminant(
            "inner-outer factorization needs det(x) > 0; the condition cannot be removed".into(),
        ));
    }
    let model = x.model();
    let (u, h) = if let Some(m) = x.as_matrix() {
        let (q, r) = linalg::qr_positive(m);
        (vec![q], vec![r])
    } else {
        torus::adaptive(start_grid(x), |m| {
            let xs = Grid::from_element(x, m);
            let gram = xs.adjoint().product(&xs);
            let h = wilson_grid(&gram)?.h;
            let u = xs.product(&h.inverse()?);
            let tail = h.tail().max(u.tail());
            Ok(((u.values().to_vec(), h.values().to_vec()), tail))
        })?
    };
    let (inner, inner_membership) = to_element(u, model, true)?;
    let (outer, membership) = to_element(h, model, true)?;
    let residuals = certify(x, &inner, &outer, None, membership, 0.0)?;
    Ok(InnerOuter { inner, outer, residuals, inner_membership })
}
