//! Seeded random elements of the standard classes.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::element::Element;
use crate::linalg::{self, cx, CMat};
use crate::model::AlgebraModel;
use crate::torus::Grid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementClass {
    M,
    A,
    A0,
    D,
    PositiveInvertible,
}

/// Standard complex Gaussian `(g1 + i g2) / sqrt 2`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> num_complex::Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    cx(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    CMat::from_fn(n, n, |_, _| complex_gaussian(rng))
}

/// Haar-distributed unitary (QR of a Gaussian matrix with positive `R` diagonal).
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    linalg::qr_positive(&gaussian_matrix(rng, n)).0
}

/// `U diag(10^s) U^*` with `s` uniform in `[-1.5, 1.5]`: condition number at most `10^3`.
fn positive_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let u = random_unitary(rng, n);
    let d = CMat::from_fn(n, n, |i, j| {
        if i == j {
            cx(10f64.powf(rng.random_range(-1.5..=1.5)), 0.0)
        } else {
            cx(0.0, 0.0)
        }
    });
    let p = &u * d * u.adjoint();
    (&p + p.adjoint()).scale(0.5)
}

fn project_matrix(model: &AlgebraModel, m: CMat, class: ElementClass) -> CMat {
    let idx = model.block_index();
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| {
        let keep = match class {
            ElementClass::M | ElementClass::PositiveInvertible => true,
            ElementClass::A => idx[i] <= idx[j],
            ElementClass::A0 => idx[i] < idx[j],
            ElementClass::D => idx[i] == idx[j],
        };
        if keep {
            m[(i, j)]
        } else {
            cx(0.0, 0.0)
        }
    })
}

/// Random element of `class`, deterministic in `seed`.
pub fn random_element(model: &AlgebraModel, class: ElementClass, seed: u64) -> Element {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_element_with(model, class, &mut rng)
}

pub fn random_element_with<R: Rng + ?Sized>(model: &AlgebraModel, class: ElementClass, rng: &mut R) -> Element {
    let n = model.n();
    if !model.is_torus() {
        let m = match class {
            ElementClass::PositiveInvertible => positive_matrix(rng, n),
            _ => project_matrix(model, gaussian_matrix(rng, n), class),
        };
        return Element::from_matrix(model, m).expect("shape matches model");
    }
    let deg = model.degree() as i64;
    let range = match class {
        ElementClass::M => -deg..=deg,
        ElementClass::A => 0..=deg,
        ElementClass::A0 => 1..=deg,
        ElementClass::D => 0..=0,
        ElementClass::PositiveInvertible => return positive_torus(model, rng),
    };
    let coeffs: BTreeMap<i64, CMat> = range.map(|k| (k, gaussian_matrix(rng, n))).collect();
    Element::from_coefficients(model, coeffs).expect("frequencies within the degree")
}

/// Hermitian trigonometric polynomial shifted and scaled so that its eigenvalues
/// on a fine grid fill `[1, kappa]` with `kappa <= 10^{2.5}`.
fn positive_torus<R: Rng + ?Sized>(model: &AlgebraModel, rng: &mut R) -> Element {
    let n = model.n();
    let deg = model.degree() as i64;
    if deg == 0 {
        return Element::constant(model, positive_matrix(rng, n)).expect("shape matches model");
    }
    let mut coeffs: BTreeMap<i64, CMat> = BTreeMap::new();
    let c0 = gaussian_matrix(rng, n);
    coeffs.insert(0, (&c0 + c0.adjoint()).scale(0.5));
    for k in 1..=deg {
        let c = gaussian_matrix(rng, n);
        coeffs.insert(-k, c.adjoint());
        coeffs.insert(k, c);
    }
    let kappa = 10f64.powf(rng.random_range(0.5..=2.5));
    let p = Element::from_coefficients(model, coeffs).expect("frequencies within the degree");
    let grid = Grid::from_element(&p, 64 * (model.degree() + 1) + 1);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in grid.values() {
        let (ev, _) = linalg::hermitian_eigen(v);
        for e in ev {
            lo = lo.min(e);
            hi = hi.max(e);
        }
    }
    let alpha = if hi - lo > 1e-12 { (kappa - 1.0) / (hi - lo) } else { 0.0 };
    let shift = linalg::eye(n) * cx(1.0 - alpha * lo, 0.0);
    p.scale(cx(alpha, 0.0)).add(&Element::constant(model, shift).expect("shape")).expect("same model")
}
