//! Spectral factorization on the circle: the scalar outer function through the
//! analytic completion of `log w`, and Wilson's Newton-type iteration for
//! matrix symbols.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use super::start_grid;
use crate::element::Element;
use crate::error::{Error, Result};
use crate::fft;
use crate::functional::fk_det;
use crate::linalg::{self, cx, CMat, SIGMA_FLOOR};
use crate::model::ModelKind;
use crate::torus::{self, Grid};

/// Iteration cap for Wilson's scheme.
pub const WILSON_MAX_ITER: usize = 200;
/// Steps without halving the best residual after which the iteration gives up.
pub const WILSON_STALL: usize = 30;
/// Relative residual below which Wilson's iteration is declared converged.
pub const WILSON_TOL: f64 = 1e-10;
/// Largest grid used by the scalar outer factor.
pub const SCALAR_MAX_GRID: usize = (1 << 20) + 1;

#[derive(Clone, Debug, Serialize)]
pub struct SpectralFactor {
    pub factor: Element,
    /// Wilson: sup over check nodes of `|h^* h - w|`. Scalar: sup of `||h| - w| / max w`.
    pub residual: f64,
    /// Largest discarded negative Fourier coefficient, relative to the largest kept one.
    pub negative_defect: f64,
    pub det_h: f64,
    pub det_phi_h: f64,
    /// `|det_h - det_phi_h| / det_h`.
    pub outer_gap: f64,
    pub iterations: usize,
    pub grid: usize,
    /// Relative residual (Wilson) or coefficient change (scalar) per step.
    pub trace: Vec<f64>,
}

/// Fuglede-Kadison determinant of grid values (node average of `tr log |v| / n`).
pub(crate) fn grid_det(values: &[CMat]) -> f64 {
    let n = values.first().map_or(1, |v| v.nrows()) as f64;
    let mut acc = 0.0;
    for v in values {
        acc += linalg::singular_values(v).iter().map(|s| s.ln()).sum::<f64>();
    }
    (acc / (n * values.len() as f64)).exp()
}

fn check_hermitian_positive(w: &Element) -> Result<Grid> {
    let g = Grid::from_element(w, torus::grid_size(64 * (w.model().degree() + 1)));
    let scale = g.sup_abs();
    let mut herm: f64 = 0.0;
    let mut lo = f64::INFINITY;
    for v in g.values() {
        herm = herm.max(linalg::hermitian_defect(v));
        lo = lo.min(linalg::min_eigenvalue(v));
    }
    if herm > 1e-12 * scale.max(1.0) {
        return Err(Error::NotHermitian(herm));
    }
    if lo <= 0.0 || scale == 0.0 {
        return Err(Error::NotPositive(lo));
    }
    Ok(g)
}

/// Relative sup residual of `h^* h = w` on a grid.
fn gram_residual(h: &Grid, w: &Grid) -> f64 {
    let scale = w.sup_abs().max(f64::MIN_POSITIVE);
    h.values()
        .iter()
        .zip(w.values())
        .map(|(a, b)| linalg::max_abs_diff(&(a.adjoint() * a), b))
        .fold(0.0, f64::max)
        / scale
}

pub(crate) struct WilsonRun {
    pub h: Grid,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

/// Wilson's iteration for `h^* h = w` on a fixed grid, with `w` given by its values.
///
/// Starting from the upper Cholesky factor of `w(0)`, each step solves the
/// linearized equation `E + E^* = h^{-*} w h^{-1} - 1` with `E` analytic and
/// Hermitian zeroth coefficient, and sets `h <- (1 + E) h`. The result is
/// normalized so that `h(0)` is upper triangular with a positive diagonal.
pub(crate) fn wilson_grid(w: &Grid) -> Result<WilsonRun> {
    let n = w.n();
    let m = w.size();
    let w0 = w.coefficients().swap_remove(0);
    let h0 = linalg::cholesky_upper(&w0).ok_or_else(|| Error::NotPositive(linalg::min_eigenvalue(&w0)))?;
    let mut h = Grid::constant(m, &h0);
    let id = linalg::eye(n);
    let mut trace = Vec::new();
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    for it in 1..=WILSON_MAX_ITER {
        let hinv = h.inverse()?;
        let x = hinv.adjoint().product(w).product(&hinv);
        let l = x.map(|a| (a + a.adjoint()).scale(0.5) + &id).analytic_part(true);
        h = l.product(&h).analytic_part(false);
        let res = gram_residual(&h, w);
        trace.push(res);
        if res < best * 0.5 {
            stalled = 0;
        } else {
            stalled += 1;
        }
        best = best.min(res);
        if res < 1e-14 || (res < WILSON_TOL && stalled >= 2) {
            return Ok(WilsonRun { h: normalize(&h), iterations: it, trace });
        }
        if stalled >= WILSON_STALL && res >= WILSON_TOL {
            return Err(Error::NoConvergence { iterations: it, residual: res });
        }
    }
    let last = trace.last().copied().unwrap_or(f64::NAN);
    if last < WILSON_TOL {
        return Ok(WilsonRun { h: normalize(&h), iterations: WILSON_MAX_ITER, trace });
    }
    Err(Error::NoConvergence { iterations: WILSON_MAX_ITER, residual: last })
}

/// Left-multiplies by a constant unitary so that `h(0)` is upper triangular with
/// a positive diagonal.
fn normalize(h: &Grid) -> Grid {
    let h0 = h.coefficients().swap_remove(0);
    let (q, _) = linalg::qr_positive(&h0);
    let qs = q.adjoint();
    h.map(|v| &qs * v)
}

/// Runs Wilson's iteration on growing grids until the factor is resolved.
pub(crate) fn wilson_adaptive(w: &Element) -> Result<WilsonRun> {
    torus::adaptive(start_grid(w), |m| {
        let run = wilson_grid(&Grid::from_element(w, m))?;
        let tail = run.h.tail();
        Ok((run, tail))
    })
}

/// Outer `h` with `h^* h = w` for a uniformly positive definite matrix symbol `w`.
pub fn wilson_factor(w: &Element) -> Result<SpectralFactor> {
    if !w.model().is_torus() {
        return Err(Error::Unsupported {
            model: w.model().kind().to_string(),
            what: "spectral factorization (torus models only)".into(),
        });
    }
    check_hermitian_positive(w)?;
    let run = wilson_adaptive(w)?;
    let grid = run.h.size();
    let (h, negative_defect) = run.h.to_element(w.model(), torus::TRUNCATION_TOL, true)?;
    let k = torus::refine(grid);
    let hv = h.samples_at(k);
    let wv = w.samples_at(k);
    let residual = hv
        .iter()
        .zip(&wv)
        .map(|(a, b)| linalg::max_abs_diff(&(a.adjoint() * a), b))
        .fold(0.0, f64::max);
    let det_h = grid_det(&hv);
    let det_phi_h = fk_det(&Element::constant(h.model(), h.coefficient(0))?).value;
    Ok(SpectralFactor {
        factor: h,
        residual,
        negative_defect,
        det_h,
        det_phi_h,
        outer_gap: (det_h - det_phi_h).abs() / det_h,
        iterations: run.iterations,
        grid,
        trace: run.trace,
    })
}

/// Coefficients `0..=degree` of the outer function with modulus `w` on an `m`-grid.
fn scalar_outer_coefficients(w: &Element, m: usize, degree: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = w.samples_at(m).iter().map(|v| v[(0, 0)]).collect();
    let top = buf.iter().map(|z| z.re).fold(0.0, f64::max);
    let floor = SIGMA_FLOOR * top;
    for z in buf.iter_mut() {
        *z = cx(z.re.max(floor).ln(), 0.0);
    }
    fft::scalar_transform(&mut buf, true);
    for (j, z) in buf.iter_mut().enumerate() {
        let k = fft::bin_frequency(j, m);
        if k < 0 {
            *z = cx(0.0, 0.0);
        } else if k > 0 {
            *z *= 2.0;
        }
    }
    fft::scalar_transform(&mut buf, false);
    for z in buf.iter_mut() {
        *z = z.exp();
    }
    fft::scalar_transform(&mut buf, true);
    buf.truncate(degree + 1);
    buf
}

/// Outer function `h = exp(c_0 + 2 sum_{k>0} c_k z^k)` with `c_k` the Fourier
/// coefficients of `log w`, so that `|h| = w` and `h(0) > 0`. For a trigonometric
/// polynomial `w` of degree `N`, `h` is a polynomial of degree `2N`.
pub fn outer_factor_scalar(w: &Element) -> Result<SpectralFactor> {
    if w.model().kind() != ModelKind::TorusScalar {
        return Err(Error::Unsupported {
            model: w.model().kind().to_string(),
            what: "scalar outer factor (scalar torus model only)".into(),
        });
    }
    let fine = Grid::from_element(w, torus::grid_size(64 * (w.model().degree() + 1)));
    let scale = fine.sup_abs();
    let imag = fine.values().iter().map(|v| v[(0, 0)].im.abs()).fold(0.0, f64::max);
    if imag > 1e-12 * scale.max(1.0) {
        return Err(Error::NotHermitian(imag));
    }
    let lo = fine.values().iter().map(|v| v[(0, 0)].re).fold(f64::INFINITY, f64::min);
    if lo < -1e-12 * scale {
        return Err(Error::NotPositive(lo));
    }
    if fk_det(w).floored {
        return Err(Error::ZeroDeterminant(
            "log w is not integrable at the quadrature nodes; the outer factor needs det(w) > 0".into(),
        ));
    }
    let (lo_k, hi_k) = w.support().unwrap_or((0, 0));
    let degree = 2 * lo_k.unsigned_abs().max(hi_k.unsigned_abs()) as usize;

    let mut m = torus::grid_size(32 * (degree + 1));
    let mut coeffs = scalar_outer_coefficients(w, m, degree);
    let mut trace = Vec::new();
    let mut iterations = 1;
    while m < SCALAR_MAX_GRID {
        m = torus::refine(m);
        let next = scalar_outer_coefficients(w, m, degree);
        let top = next.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let change = next.iter().zip(&coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / top;
        trace.push(change);
        coeffs = next;
        iterations += 1;
        if change < 1e-14 {
            break;
        }
    }
    let model = w.model().derived(degree, 0);
    let map: BTreeMap<i64, CMat> =
        coeffs.iter().enumerate().map(|(k, c)| (k as i64, CMat::from_element(1, 1, *c))).collect();
    let h = Element::from_coefficients(&model, map)?;

    let check = torus::refine(torus::grid_size(64 * (degree + 1)));
    let hv = h.samples_at(check);
    let wv = w.samples_at(check);
    let wmax = wv.iter().map(|v| v[(0, 0)].re).fold(0.0, f64::max);
    let residual =
        hv.iter().zip(&wv).map(|(a, b)| (a[(0, 0)].norm() - b[(0, 0)].re).abs()).fold(0.0, f64::max) / wmax;
    let det_h = grid_det(&wv);
    let det_phi_h = coeffs[0].norm();
    Ok(SpectralFactor {
        factor: h,
        residual,
        negative_defect: 0.0,
        det_h,
        det_phi_h,
        outer_gap: (det_h - det_phi_h).abs() / det_h,
        iterations,
        grid: m,
        trace,
    })
}
