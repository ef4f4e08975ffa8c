use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use super::outer::{subspace_rank, Side};
use super::{certify, require_invertible, FactorizationResult};
use crate::element::Element;
use crate::error::{Error, Result};
use crate::functional::{in_a, in_d, phi, MembershipMode};
use crate::linalg::{self, cx, CMat};
use crate::model::AlgebraModel;

/// Largest admissible condition number of the projection Gram matrix.
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;

#[derive(Clone, Debug, Serialize)]
pub struct ProjectionCertificate {
    /// Distance of `|y|` from `D`.
    pub modulus_in_d: f64,
    /// Largest normalized pairing between generators of `[y A_0]`, `[y D]` and `[y A_0^*]`.
    pub orthogonality: f64,
    pub h_membership: f64,
    pub h_inverse_membership: f64,
    /// `|Phi(h) Phi(h^{-1}) - 1|`.
    pub phi_product: f64,
    pub gram_condition: f64,
    /// Rank of `{h b_i}` over a basis of `A`, to be compared with `dim_a`.
    pub rank_h_a: usize,
    pub dim_a: usize,
}

impl ProjectionCertificate {
    pub fn worst(&self) -> f64 {
        self.modulus_in_d
            .max(self.orthogonality)
            .max(self.h_membership)
            .max(self.h_inverse_membership)
            .max(self.phi_product)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectionSzego {
    pub result: FactorizationResult,
    /// `x`, the projection of `w` onto `[w A_0]_2`.
    pub projection: Element,
    /// `y = w - x`.
    pub remainder: Element,
    pub certificate: ProjectionCertificate,
}

fn unit(n: usize, i: usize, j: usize) -> CMat {
    let mut m = linalg::zeros(n);
    m[(i, j)] = cx(1.0, 0.0);
    m
}

/// `tau(a^* b)`.
fn inner(a: &CMat, b: &CMat) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum::<Complex64>() / a.nrows() as f64
}

/// Largest `|tau(s^* t)| / (|s|_2 |t|_2)` over `s` in `left` and `t` in `right`.
fn max_cosine(left: &[CMat], right: &[CMat]) -> f64 {
    let mut worst: f64 = 0.0;
    for s in left {
        let ns = inner(s, s).re.sqrt();
        for t in right {
            let nt = inner(t, t).re.sqrt();
            if ns > 0.0 && nt > 0.0 {
                worst = worst.max(inner(s, t).norm() / (ns * nt));
            }
        }
    }
    worst
}

/// Szegő factorization through the L^2 projection: `x` is the orthogonal
/// projection of `w` onto `span {w a : a in A_0}`, `y = w - x = u |y|`, and
/// `h = u^* w`.
pub fn szego_factor_projection(w: &Element) -> Result<ProjectionSzego> {
    let wm = w.as_matrix().ok_or_else(|| Error::Unsupported {
        model: w.model().kind().to_string(),
        what: "projection Szegő factorization (matrix model only)".into(),
    })?;
    require_invertible(w)?;
    let model: &AlgebraModel = w.model();
    let n = model.n();
    let a0: Vec<CMat> = model.a0_pattern().into_iter().map(|(i, j)| unit(n, i, j)).collect();
    let gens: Vec<CMat> = a0.iter().map(|a| wm * a).collect();

    let (x, gram_condition) = if gens.is_empty() {
        (linalg::zeros(n), 1.0)
    } else {
        let k = gens.len();
        let gram = CMat::from_fn(k, k, |r, c| inner(&gens[r], &gens[c]));
        let (ev, _) = linalg::hermitian_eigen(&gram);
        let hi = ev.iter().copied().fold(0.0, f64::max);
        let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if cond > GRAM_CONDITION_LIMIT {
            return Err(Error::IllConditioned(cond));
        }
        let rhs = DVector::from_fn(k, |r, _| inner(&gens[r], wm));
        let coef = gram.lu().solve(&rhs).ok_or(Error::IllConditioned(f64::INFINITY))?;
        let mut x = linalg::zeros(n);
        for (g, c) in gens.iter().zip(coef.iter()) {
            x += g * *c;
        }
        (x, cond)
    };
    let y = wm - &x;
    let (u, modulus, deficient) = linalg::polar(&y);
    if deficient {
        let s = linalg::singular_values(&y);
        return Err(Error::Singular { smallest: *s.last().expect("nonempty"), floor: linalg::SIGMA_FLOOR * s[0] });
    }
    let h = u.adjoint() * wm;
    let hinv = linalg::inverse(&h).ok_or(Error::Singular { smallest: 0.0, floor: 0.0 })?;

    let to_el = |m: CMat| Element::from_matrix(model, m);
    let (u_el, h_el, hinv_el) = (to_el(u)?, to_el(h)?, to_el(hinv)?);
    let modulus_in_d = in_d(&to_el(modulus)?, MembershipMode::Structural).defect;
    let d_basis: Vec<CMat> = {
        let idx = model.block_index();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if idx[i] == idx[j] {
                    out.push(unit(n, i, j));
                }
            }
        }
        out
    };
    let span_a0: Vec<CMat> = a0.iter().map(|a| &y * a).collect();
    let span_d: Vec<CMat> = d_basis.iter().map(|d| &y * d).collect();
    let span_a0_star: Vec<CMat> = a0.iter().map(|a| &y * a.adjoint()).collect();
    let orthogonality = max_cosine(&span_a0, &span_d)
        .max(max_cosine(&span_a0, &span_a0_star))
        .max(max_cosine(&span_d, &span_a0_star));

    let h_membership = in_a(&h_el, MembershipMode::Structural).defect;
    let h_inverse_membership = in_a(&hinv_el, MembershipMode::Structural).defect;
    let phi_product = phi(&h_el)
        .mul(&phi(&hinv_el))?
        .max_abs_diff(&Element::identity(model))?;
    let rank_h_a = subspace_rank(&h_el, Side::Left)?;
    let certificate = ProjectionCertificate {
        modulus_in_d,
        orthogonality,
        h_membership,
        h_inverse_membership,
        phi_product,
        gram_condition,
        rank_h_a,
        dim_a: model.dim_a(),
    };
    let residuals = certify(w, &u_el, &h_el, Some(&hinv_el), h_membership, h_inverse_membership)?;
    Ok(ProjectionSzego {
        result: FactorizationResult { unitary: u_el, analytic: h_el, analytic_inverse: Some(hinv_el), residuals },
        projection: to_el(x)?,
        remainder: to_el(y)?,
        certificate,
    })
}
