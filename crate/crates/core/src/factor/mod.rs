//! Factorizations `x = u h` with `u` unitary and `h` analytic, their certificates,
//! and the outerness tests.

mod arveson;
mod outer;
mod projection;
mod riesz;
mod spectral;
mod szego;

use serde::Serialize;

pub use arveson::arveson_factor;
pub use outer::{inner_outer, is_outer, is_outer_with, subspace_rank, InnerOuter, OuterOracle, OuterReport, Side};
pub use projection::{szego_factor_projection, ProjectionCertificate, ProjectionSzego};
pub use riesz::{riesz_factor, riesz_factor_attained, RieszFactorization};
pub use spectral::{outer_factor_scalar, wilson_factor, SpectralFactor};
pub use szego::{split_count, szego_factor};

use crate::element::{nodewise_diff, Element};
use crate::error::{Error, Result};
use crate::functional::{in_a, MembershipMode};
use crate::linalg::{self, CMat, SIGMA_FLOOR};
use crate::model::AlgebraModel;
use crate::torus::{self, Grid};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Residuals {
    /// Sup over nodes of `|u h - x|`.
    pub reconstruction: f64,
    /// Sup over nodes of `|u^* u - 1|`.
    pub unitarity: f64,
    /// Distance of `h` from `A` (out-of-pattern entries or discarded negative frequencies).
    pub membership: f64,
    /// Same for `h^{-1}`; zero when the inverse is not computed.
    pub inverse_membership: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorizationResult {
    pub unitary: Element,
    pub analytic: Element,
    pub analytic_inverse: Option<Element>,
    pub residuals: Residuals,
}

impl FactorizationResult {
    /// Largest residual.
    pub fn worst(&self) -> f64 {
        let r = &self.residuals;
        r.reconstruction.max(r.unitarity).max(r.membership).max(r.inverse_membership)
    }
}

/// Starting working grid for torus computations on `x`.
pub(crate) fn start_grid(x: &Element) -> usize {
    torus::grid_size(16 * (x.model().degree() + 1))
}

/// Smallest and largest singular values over the nodes of a grid (or the matrix).
fn singular_range(values: &[CMat]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for v in values {
        let s = linalg::singular_values(v);
        hi = hi.max(s[0]);
        lo = lo.min(*s.last().expect("nonempty"));
    }
    (lo, hi)
}

/// Fails unless every singular value (over a fine grid on the torus) exceeds the floor.
pub(crate) fn require_invertible(x: &Element) -> Result<()> {
    let values = if x.model().is_torus() { x.samples_at(start_grid(x)) } else { x.samples() };
    let (lo, hi) = singular_range(&values);
    let floor = SIGMA_FLOOR * hi;
    if hi == 0.0 || lo <= floor {
        return Err(Error::Singular { smallest: lo, floor });
    }
    Ok(())
}

pub(crate) fn require_in_a(x: &Element) -> Result<()> {
    let m = in_a(x, MembershipMode::Structural);
    let scale = x.sup_abs().max(1.0);
    if m.defect > x.default_tol() * scale {
        return Err(Error::NotInAlgebra(m.defect));
    }
    Ok(())
}

fn sup_unitarity(values: &[CMat]) -> f64 {
    values.iter().map(linalg::unitarity_defect).fold(0.0, f64::max)
}

/// Converts node values back to an element: analytic truncation (with the size of
/// the discarded negative frequencies) or plain truncation.
pub(crate) fn to_element(values: Vec<CMat>, template: &AlgebraModel, analytic: bool) -> Result<(Element, f64)> {
    if template.is_torus() {
        Grid::from_values(values).to_element(template, torus::TRUNCATION_TOL, analytic)
    } else {
        let m = values.into_iter().next().expect("one matrix");
        let defect = if analytic {
            let e = Element::from_matrix(template, m.clone())?;
            in_a(&e, MembershipMode::Structural).defect
        } else {
            0.0
        };
        Ok((Element::from_matrix(template, m)?, defect))
    }
}

/// Residuals of `x = u h` measured on a check grid finer than the working one.
pub(crate) fn certify(
    x: &Element,
    u: &Element,
    h: &Element,
    hinv: Option<&Element>,
    membership: f64,
    inverse_membership: f64,
) -> Result<Residuals> {
    let reconstruction = if x.model().is_torus() {
        let k = check_nodes(&[x, u, h]);
        let uh: Vec<CMat> = u.samples_at(k).iter().zip(h.samples_at(k)).map(|(a, b)| a * b).collect();
        uh.iter().zip(x.samples_at(k)).map(|(a, b)| linalg::max_abs_diff(a, &b)).fold(0.0, f64::max)
    } else {
        nodewise_diff(&u.mul(h)?, x)?
    };
    let unitarity = if x.model().is_torus() {
        sup_unitarity(&u.samples_at(check_nodes(&[u])))
    } else {
        sup_unitarity(&u.samples())
    };
    let inverse_membership = match hinv {
        Some(_) => inverse_membership,
        None => 0.0,
    };
    Ok(Residuals { reconstruction, unitarity, membership, inverse_membership })
}

/// Odd node count resolving products of the given elements without aliasing.
pub(crate) fn check_nodes(xs: &[&Element]) -> usize {
    let deg: usize = xs.iter().map(|x| x.model().degree()).sum();
    torus::refine(torus::grid_size(2 * deg + 2))
}
