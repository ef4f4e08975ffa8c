use serde::Serialize;

use super::szego::base_factor;
use super::{check_nodes, require_in_a, start_grid, to_element};
use crate::element::Element;
use crate::error::{Error, Result};
use crate::functional::{fk_det, pnorm_resolved};
use crate::linalg::{self, cx, CMat};
use crate::torus::{self, Grid};

#[derive(Clone, Debug, Serialize)]
pub struct RieszFactorization {
    pub y: Element,
    pub z: Element,
    /// Norms are [`pnorm_resolved`] values, so that all three integrate on resolved grids.
    pub norm_x: f64,
    pub norm_y: f64,
    pub norm_z: f64,
    /// `pnorm(y, q) * pnorm(z, r)`.
    pub product: f64,
    /// Regularization `eps'` in `w = (x^* x + eps')^{1/2}`; zero for the attained factorization.
    pub regularization: f64,
    /// Sup over check nodes of `|y z - x|`.
    pub reconstruction: f64,
    pub y_membership: f64,
    pub z_membership: f64,
}

fn check_exponents(p: f64, q: f64, r: f64) -> Result<()> {
    for e in [p, q, r] {
        if e.is_nan() || e <= 0.0 {
            return Err(Error::InvalidExponent(e));
        }
    }
    let mismatch = (1.0 / p - 1.0 / q - 1.0 / r).abs();
    if mismatch > 1e-12 * (1.0 / p) {
        return Err(Error::InvalidArgument(format!(
            "exponent mismatch: 1/{p} != 1/{q} + 1/{r} (off by {mismatch:.3e})"
        )));
    }
    Ok(())
}

/// `y = x z^{-1}` and `z` with `w^{p/r} = u z` for `w = (x^* x + reg)^{1/2}`, on node values.
fn factor_values(x: &[CMat], p: f64, r: f64, reg: f64) -> Result<(Vec<CMat>, Vec<CMat>)> {
    let n = x[0].nrows();
    let shift = linalg::eye(n) * cx(reg, 0.0);
    let wpr: Vec<CMat> = x.iter().map(|a| linalg::psd_pow(&(a.adjoint() * a + &shift), p / (2.0 * r))).collect();
    let (_, z) = base_factor(&wpr)?;
    let y = x
        .iter()
        .zip(&z)
        .map(|(a, b)| {
            linalg::inverse(b).map(|bi| a * bi).ok_or(Error::Singular { smallest: 0.0, floor: 0.0 })
        })
        .collect::<Result<_>>()?;
    Ok((y, z))
}

fn assemble(x: &Element, p: f64, q: f64, r: f64, reg: f64) -> Result<RieszFactorization> {
    let model = x.model();
    let (y, z) = if model.is_torus() {
        torus::adaptive(start_grid(x), |m| {
            let (y, z) = factor_values(&x.samples_at(m), p, r, reg)?;
            let tail = Grid::from_values(z.clone()).tail().max(Grid::from_values(y.clone()).tail());
            Ok(((y, z), tail))
        })?
    } else {
        factor_values(&x.samples(), p, r, reg)?
    };
    let (y, y_membership) = to_element(y, model, true)?;
    let (z, z_membership) = to_element(z, model, true)?;
    let k = if model.is_torus() { check_nodes(&[&y, &z, x]) } else { 1 };
    let reconstruction = y
        .samples_at(k)
        .iter()
        .zip(z.samples_at(k))
        .zip(x.samples_at(k))
        .map(|((a, b), c)| linalg::max_abs_diff(&(a * b), &c))
        .fold(0.0, f64::max);
    let norm_x = pnorm_resolved(x, p)?;
    let norm_y = pnorm_resolved(&y, q)?;
    let norm_z = pnorm_resolved(&z, r)?;
    Ok(RieszFactorization {
        y,
        z,
        norm_x,
        norm_y,
        norm_z,
        product: norm_y * norm_z,
        regularization: reg,
        reconstruction,
        y_membership,
        z_membership,
    })
}

/// Riesz factorization `x = y z` with `y in H^q`, `z in H^r`, `1/p = 1/q + 1/r`
/// and `|y|_q |z|_r <= |x|_p + eps`.
///
/// The regularization `eps'` in `w = (x^* x + eps')^{1/2}` starts at `eps^2`
/// and is reduced until `|w|_p <= |x|_p + eps / 2`, which bounds the product.
pub fn riesz_factor(x: &Element, p: f64, q: f64, r: f64, eps: f64) -> Result<RieszFactorization> {
    check_exponents(p, q, r)?;
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    require_in_a(x)?;
    let norm_x = pnorm_resolved(x, p)?;
    let nodes = if x.model().is_torus() {
        x.samples_at(torus::grid_size(64 * (x.model().degree() + 1)))
    } else {
        x.samples()
    };
    let mut reg = eps * eps;
    loop {
        let shifted: Vec<f64> = nodes
            .iter()
            .flat_map(|a| linalg::singular_values(a).into_iter().map(|s| (s * s + reg).sqrt()))
            .collect();
        let count = shifted.len() as f64;
        let norm_w = (shifted.iter().map(|s| s.powf(p)).sum::<f64>() / count).powf(1.0 / p);
        if norm_w <= norm_x + eps / 2.0 || reg < 1e-300 {
            break;
        }
        reg /= 100.0;
    }
    assemble(x, p, q, r, reg)
}

/// Riesz factorization attaining `|y|_q |z|_r = |x|_p` when `det(x) > 0`:
/// `z` is the outer factor of `|x|^{p/r}` and `y = x z^{-1}`.
pub fn riesz_factor_attained(x: &Element, p: f64, q: f64, r: f64) -> Result<RieszFactorization> {
    check_exponents(p, q, r)?;
    require_in_a(x)?;
    if !fk_det(x).is_positive() {
        return Err(Error::ZeroDeterminant(
            "the attained Riesz factorization requires det(x) > 0".into(),
        ));
    }
    assemble(x, p, q, r, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AlgebraModel;
    use crate::random::{random_element, ElementClass};

    #[test]
    fn rejects_exponent_mismatch() {
        let model = AlgebraModel::triangular(2).unwrap();
        let x = Element::identity(&model);
        assert!(matches!(riesz_factor(&x, 1.0, 2.0, 3.0, 0.1), Err(Error::InvalidArgument(_))));
        assert!(riesz_factor(&x, 1.0, 2.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn identity() {
        let model = AlgebraModel::triangular(2).unwrap();
        let r = riesz_factor(&Element::identity(&model), 1.0, 2.0, 2.0, 0.1).unwrap();
        assert!(r.reconstruction < 1e-12);
        assert!(r.product <= 1.0 + 0.1 + 1e-8);
    }

    #[test]
    fn coordinate_function() {
        let model = AlgebraModel::torus(1, 1, 5).unwrap();
        let z = Element::coordinate(&model).unwrap();
        let r = riesz_factor(&z, 1.0, 2.0, 2.0, 1e-2).unwrap();
        assert!(r.reconstruction < 1e-8);
        assert!(r.product <= 1.0 + 1e-2 + 1e-8);
    }

    #[test]
    fn random_upper_triangular() {
        let model = AlgebraModel::matrix_block(&[1, 1, 2]).unwrap();
        for seed in 0..5 {
            let x = random_element(&model, ElementClass::A, seed);
            for (p, q, r) in [(1.0, 2.0, 2.0), (0.5, 1.0, 1.0), (2.0 / 3.0, 1.0, 2.0)] {
                for eps in [1e-1, 1e-2, 1e-3] {
                    let f = riesz_factor(&x, p, q, r, eps).unwrap();
                    assert!(f.reconstruction < 1e-8);
                    assert!(f.y_membership < 1e-12 && f.z_membership < 1e-12);
                    assert!(f.product <= f.norm_x + eps + 1e-8);
                }
                let f = riesz_factor_attained(&x, p, q, r).unwrap();
                assert!((f.product - f.norm_x).abs() <= 1e-6 * f.norm_x);
            }
        }
    }
}
