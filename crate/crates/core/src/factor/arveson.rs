use super::{certify, require_invertible, FactorizationResult};
use crate::element::Element;
use crate::error::{Error, Result};
use crate::functional::{in_a, MembershipMode};
use crate::linalg;

/// `x = u a` with `u` unitary, `a` upper triangular with a positive diagonal and
/// `a^{-1}` upper triangular. Since upper triangular matrices lie in every block
/// upper triangular algebra, the QR factorization serves any flag.
pub fn arveson_factor(x: &Element) -> Result<FactorizationResult> {
    let m = x.as_matrix().ok_or_else(|| Error::Unsupported {
        model: x.model().kind().to_string(),
        what: "Arveson factorization (matrix model only)".into(),
    })?;
    require_invertible(x)?;
    let (q, r) = linalg::qr_positive(m);
    let rinv = linalg::inverse(&r).ok_or(Error::Singular { smallest: 0.0, floor: 0.0 })?;
    let u = Element::from_matrix(x.model(), q)?;
    let a = Element::from_matrix(x.model(), r)?;
    let ainv = Element::from_matrix(x.model(), rinv)?;
    let membership = in_a(&a, MembershipMode::Structural).defect;
    let inverse_membership = in_a(&ainv, MembershipMode::Structural).defect;
    let residuals = certify(x, &u, &a, Some(&ainv), membership, inverse_membership)?;
    Ok(FactorizationResult { unitary: u, analytic: a, analytic_inverse: Some(ainv), residuals })
}
