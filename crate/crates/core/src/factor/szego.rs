use super::spectral::wilson_grid;
use super::{certify, require_invertible, start_grid, to_element, FactorizationResult};
use crate::element::Element;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::torus::{self, Grid};

/// Number of factors in the splitting `w = v|w|^{1/n} |w|^{1/n} ... |w|^{1/n}`:
/// the smallest `n` with `n p >= 2` and `n q >= 2`.
pub fn split_count(p: f64, q: f64) -> usize {
    let m = p.min(q);
    if m >= 2.0 {
        1
    } else {
        (2.0 / m).ceil() as usize
    }
}

/// `v = u h` node-wise in the matrix model (QR), or on a circle grid through the
/// spectral factor of `v^* v`.
pub(crate) fn base_factor(v: &[CMat]) -> Result<(Vec<CMat>, Vec<CMat>)> {
    if v.len() == 1 {
        let (q, r) = linalg::qr_positive(&v[0]);
        return Ok((vec![q], vec![r]));
    }
    let gram = Grid::from_values(v.iter().map(|a| a.adjoint() * a).collect());
    let h = wilson_grid(&gram)?.h;
    let hinv = h.inverse()?;
    let u = v.iter().zip(hinv.values()).map(|(a, b)| a * b).collect();
    Ok((u, h.values().to_vec()))
}

/// Factors node values `w = u h` through `n` successive base factorizations:
/// `w_n = u_n h_n` and `w_k u_{k+1} = u_k h_k`, so `w = u_1 h_1 ... h_n`.
pub(crate) fn split_factor(w: &[CMat], n: usize) -> Result<(Vec<CMat>, Vec<CMat>)> {
    if n <= 1 {
        return base_factor(w);
    }
    let parts: Vec<(CMat, CMat, bool)> = w.iter().map(linalg::polar).collect();
    let root: Vec<CMat> = parts.iter().map(|(_, m, _)| linalg::psd_pow(m, 1.0 / n as f64)).collect();
    let first: Vec<CMat> = parts.iter().zip(&root).map(|((v, _, _), r)| v * r).collect();
    let (mut u, mut h) = base_factor(&root)?;
    for k in (1..n).rev() {
        let wk = if k == 1 { &first } else { &root };
        let prod: Vec<CMat> = wk.iter().zip(&u).map(|(a, b)| a * b).collect();
        let (uk, hk) = base_factor(&prod)?;
        h = hk.iter().zip(&h).map(|(a, b)| a * b).collect();
        u = uk;
    }
    Ok((u, h))
}

/// Szegő factorization `w = u h` of an invertible `w` with `w in L^p`,
/// `w^{-1} in L^q`; `h` and `h^{-1}` are analytic. When `min(p, q) < 2` the
/// `n`-fold splitting of `|w|` is used with `n = split_count(p, q)`.
pub fn szego_factor(w: &Element, p: f64, q: f64) -> Result<FactorizationResult> {
    for e in [p, q] {
        if e.is_nan() || e <= 0.0 {
            return Err(Error::InvalidExponent(e));
        }
    }
    require_invertible(w)?;
    let n = split_count(p, q);
    let model = w.model();
    let (u, h) = if model.is_torus() {
        torus::adaptive(start_grid(w), |m| {
            let (u, h) = split_factor(&w.samples_at(m), n)?;
            let hg = Grid::from_values(h);
            let tail = hg.tail();
            Ok(((u, hg.values().to_vec()), tail))
        })?
    } else {
        split_factor(&w.samples(), n)?
    };
    let hinv: Vec<CMat> = h
        .iter()
        .map(|a| linalg::inverse(a).ok_or(Error::Singular { smallest: 0.0, floor: 0.0 }))
        .collect::<Result<_>>()?;
    let (u_el, _) = to_element(u, model, false)?;
    let (h_el, membership) = to_element(h, model, true)?;
    let (hinv_el, inverse_membership) = to_element(hinv, model, true)?;
    let residuals = certify(w, &u_el, &h_el, Some(&hinv_el), membership, inverse_membership)?;
    Ok(FactorizationResult { unitary: u_el, analytic: h_el, analytic_inverse: Some(hinv_el), residuals })
}
