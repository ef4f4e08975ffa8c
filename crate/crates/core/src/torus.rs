//! Sampled matrix functions on odd-sized uniform circle grids.
//!
//! Non-polynomial torus quantities (moduli, fractional powers, outer factors)
//! are computed on a working grid and truncated back to trigonometric
//! polynomials. Grids have odd size so the frequency range is symmetric and
//! `theta = pi` is never a node.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::element::Element;
use crate::error::{Error, Result};
use crate::fft;
use crate::linalg::{self, CMat};
use crate::model::AlgebraModel;

/// Largest working grid for matrix-valued computations.
pub const MAX_GRID: usize = (1 << 14) + 1;
/// Tail tolerance used when truncating computed coefficients.
pub const TRUNCATION_TOL: f64 = 1e-14;

/// Tail level at which a working grid is considered resolved.
pub const TAIL_TOL: f64 = 1e-13;

/// Runs `f` on grids of growing size, starting at `start`, until the reported
/// tail drops below [`TAIL_TOL`] or [`MAX_GRID`] is reached. An iteration that
/// fails to converge on an under-resolved grid is retried on the next one.
pub fn adaptive<T>(start: usize, mut f: impl FnMut(usize) -> Result<(T, f64)>) -> Result<T> {
    let mut m = start;
    loop {
        let (value, tail) = match f(m) {
            Ok(v) => v,
            Err(Error::NoConvergence { iterations, residual }) if m < MAX_GRID => {
                log::debug!("grid {m}: no convergence after {iterations} steps (residual {residual:.2e}), refining");
                m = refine(m);
                continue;
            }
            Err(e) => return Err(e),
        };
        if tail <= TAIL_TOL || m >= MAX_GRID {
            if tail > TAIL_TOL {
                log::debug!("grid {m} still has relative tail {tail:.2e}");
            }
            return Ok(value);
        }
        m = refine(m);
    }
}

#[derive(Clone, Debug)]
pub struct Grid {
    n: usize,
    values: Vec<CMat>,
}

/// Smallest grid `2^k + 1` with at least `min` points.
pub fn grid_size(min: usize) -> usize {
    let mut m = 65;
    while m < min {
        m = 2 * (m - 1) + 1;
    }
    m
}

/// Next grid size after `m`.
pub fn refine(m: usize) -> usize {
    2 * (m - 1) + 1
}

impl Grid {
    pub fn from_values(values: Vec<CMat>) -> Self {
        let n = values.first().map_or(0, |v| v.nrows());
        Self { n, values }
    }

    pub fn from_fn(m: usize, f: impl Fn(f64) -> CMat) -> Self {
        Self::from_values((0..m).map(|j| f(2.0 * PI * j as f64 / m as f64)).collect())
    }

    /// Samples of a torus element; exact whenever `m > 2 * degree`.
    pub fn from_element(x: &Element, m: usize) -> Self {
        Self::from_values(x.samples_at(m))
    }

    pub fn constant(m: usize, c: &CMat) -> Self {
        Self::from_values(vec![c.clone(); m])
    }

    pub fn size(&self) -> usize {
        self.values.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[CMat] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(&CMat) -> CMat) -> Self {
        Self::from_values(self.values.iter().map(f).collect())
    }

    pub fn try_map(&self, f: impl Fn(&CMat) -> Result<CMat>) -> Result<Self> {
        Ok(Self::from_values(self.values.iter().map(f).collect::<Result<_>>()?))
    }

    pub fn zip_map(&self, other: &Grid, f: impl Fn(&CMat, &CMat) -> CMat) -> Self {
        assert_eq!(self.size(), other.size(), "grids of different size");
        Self::from_values(self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect())
    }

    pub fn product(&self, other: &Grid) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn adjoint(&self) -> Self {
        self.map(|a| a.adjoint())
    }

    /// Pointwise inverse; fails on a singular node.
    pub fn inverse(&self) -> Result<Self> {
        self.try_map(|a| {
            linalg::inverse(a).ok_or_else(|| Error::Singular {
                smallest: linalg::singular_values(a).last().copied().unwrap_or(0.0),
                floor: 0.0,
            })
        })
    }

    /// Coefficients indexed by FFT bin.
    pub fn coefficients(&self) -> Vec<CMat> {
        fft::analyze(&self.values)
    }

    pub fn from_coefficient_bins(bins: &[CMat]) -> Self {
        let m = bins.len();
        let n = bins.first().map_or(0, |b| b.nrows());
        Self::from_values(fft::synthesize(
            n,
            bins.iter().enumerate().map(|(j, c)| (fft::bin_frequency(j, m), c)),
            m,
        ))
    }

    /// Keeps nonnegative frequencies. With `halve_zero` the zeroth coefficient is
    /// halved, so that `F = P(F) + P(F)^*` for Hermitian-valued `F`.
    pub fn analytic_part(&self, halve_zero: bool) -> Self {
        let m = self.size();
        let mut bins = self.coefficients();
        for (j, b) in bins.iter_mut().enumerate() {
            let k = fft::bin_frequency(j, m);
            if k < 0 {
                b.fill(linalg::cx(0.0, 0.0));
            } else if k == 0 && halve_zero {
                *b *= linalg::cx(0.5, 0.0);
            }
        }
        Self::from_coefficient_bins(&bins)
    }

    /// Relative size of the coefficients in the outer quarter of the frequency range.
    pub fn tail(&self) -> f64 {
        let m = self.size();
        let bins = self.coefficients();
        let scale = bins.iter().map(linalg::max_abs).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let tail = bins
            .iter()
            .enumerate()
            .filter(|(j, _)| fft::bin_frequency(*j, m).unsigned_abs() as usize > m / 4)
            .map(|(_, b)| linalg::max_abs(b))
            .fold(0.0, f64::max);
        tail / scale
    }

    /// Truncates to the smallest symmetric degree whose discarded coefficients are
    /// below `tol` relative to the largest one; coefficients below that level are
    /// dropped inside the range too. With `analytic` all negative
    /// frequencies are discarded; their size is returned as the second value.
    pub fn to_element(&self, template: &AlgebraModel, tol: f64, analytic: bool) -> Result<(Element, f64)> {
        let m = self.size();
        let bins = self.coefficients();
        let scale = bins.iter().map(linalg::max_abs).fold(0.0, f64::max);
        let mut degree = 0usize;
        let mut dropped_negative: f64 = 0.0;
        for (j, b) in bins.iter().enumerate() {
            let k = fft::bin_frequency(j, m);
            let size = linalg::max_abs(b);
            if analytic && k < 0 {
                dropped_negative = dropped_negative.max(size);
                continue;
            }
            if size > tol * scale {
                degree = degree.max(k.unsigned_abs() as usize);
            }
        }
        let mut coeffs = BTreeMap::new();
        for (j, b) in bins.into_iter().enumerate() {
            let k = fft::bin_frequency(j, m);
            let small = linalg::max_abs(&b) <= tol * scale;
            if k.unsigned_abs() as usize <= degree && !(analytic && k < 0) && !small {
                coeffs.insert(k, b);
            }
        }
        let model = template.derived(degree, 0);
        let rel = if scale > 0.0 { dropped_negative / scale } else { 0.0 };
        Ok((Element::from_coefficients(&model, coeffs)?, rel))
    }

    /// Largest entrywise difference over the grid.
    pub fn max_diff(&self, other: &Grid) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| linalg::max_abs_diff(a, b))
            .fold(0.0, f64::max)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }
}
