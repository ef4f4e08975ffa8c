//! Scalar functionals on elements: trace, p-quasi-norms, conditional expectation,
//! Fuglede-Kadison determinant, polar data, the dyadic Newton root iteration,
//! and membership tests for `A`, `A_0` and `D`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::element::{nodewise_diff, Element, ElementData};
use crate::error::{Error, Result};
use crate::linalg::{self, cx, CMat, SIGMA_FLOOR};
use crate::model::AlgebraModel;
use crate::torus::{self, Grid};

fn check_exponent(p: f64) -> Result<()> {
    if p > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

/// Normalized trace; on the torus the node average of `tr / n`.
pub fn trace(x: &Element) -> Complex64 {
    let samples = x.samples();
    let n = x.n() as f64;
    let k = samples.len() as f64;
    samples.iter().map(|m| m.trace()).sum::<Complex64>() / (n * k)
}

/// Singular values at every node.
fn nodal_singular_values(x: &Element) -> Vec<Vec<f64>> {
    x.samples().iter().map(linalg::singular_values).collect()
}

/// `tau(|x|^p)^{1/p}`; `p = inf` gives the largest singular value over the nodes.
pub fn pnorm(x: &Element, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let sv = nodal_singular_values(x);
    if p.is_infinite() {
        return Ok(sv.iter().flatten().copied().fold(0.0, f64::max));
    }
    let n = x.n() as f64;
    let k = sv.len() as f64;
    let moment: f64 = sv.iter().flatten().map(|s| s.powf(p)).sum::<f64>() / (n * k);
    Ok(moment.powf(1.0 / p))
}

/// Relative change at which [`pnorm_resolved`] stops refining.
const RESOLVED_TOL: f64 = 1e-12;

/// `pnorm` with the circle integral resolved: node averages on grids of at
/// least `4 (N + 1)` nodes, doubled until the value settles. Equals [`pnorm`]
/// in the matrix model.
pub fn pnorm_resolved(x: &Element, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if !x.model().is_torus() || p.is_infinite() {
        return pnorm(x, p);
    }
    let n = x.n() as f64;
    let at = |m: usize| {
        let samples = x.samples_at(m);
        let moment: f64 =
            samples.iter().flat_map(linalg::singular_values).map(|s| s.powf(p)).sum::<f64>() / (n * m as f64);
        moment.powf(1.0 / p)
    };
    let mut m = torus::grid_size(4 * (x.model().degree() + 1));
    let mut value = at(m);
    while m < torus::MAX_GRID {
        m = torus::refine(m);
        let next = at(m);
        let settled = (next - value).abs() <= RESOLVED_TOL * next;
        value = next;
        if settled {
            break;
        }
    }
    Ok(value)
}

/// Conditional expectation onto `D`: block-diagonal compression, or the zeroth
/// Fourier coefficient as a constant function.
pub fn phi(x: &Element) -> Element {
    match x.data() {
        ElementData::Matrix(m) => {
            let idx = x.model().block_index();
            let d = CMat::from_fn(m.nrows(), m.ncols(), |i, j| {
                if idx[i] == idx[j] {
                    m[(i, j)]
                } else {
                    cx(0.0, 0.0)
                }
            });
            Element::from_matrix(x.model(), d).expect("same shape")
        }
        ElementData::Torus(_) => Element::constant(x.model(), x.coefficient(0)).expect("same shape"),
    }
}

/// Fuglede-Kadison determinant with an explicit degeneracy flag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Determinant {
    pub value: f64,
    /// Some singular value fell below `1e-14 * sigma_max`; `value` is then 0.
    pub floored: bool,
    /// `tau(log|x|)`, `-inf` when floored.
    pub log_value: f64,
}

impl Determinant {
    pub fn is_positive(&self) -> bool {
        !self.floored && self.value > 0.0
    }
}

/// `exp(tau(log|x|))`.
pub fn fk_det(x: &Element) -> Determinant {
    det_of_values(&x.samples(), x.n())
}

/// Determinant with the circle integral resolved on a fine grid of at least
/// `64 (N + 1)` nodes instead of the model's `K`-node rule. The `K`-node rule is
/// exact only for polynomial integrands, which `log |x|` is not; equality
/// criteria such as `det(h) = det(Phi(h))` need the resolved value.
pub fn fk_det_resolved(x: &Element) -> Determinant {
    if !x.model().is_torus() {
        return fk_det(x);
    }
    let m = crate::torus::grid_size(64 * (x.model().degree() + 1)).max(x.model().quad_nodes());
    det_of_values(&x.samples_at(m), x.n())
}

fn det_of_values(values: &[CMat], n: usize) -> Determinant {
    let sv: Vec<Vec<f64>> = values.iter().map(linalg::singular_values).collect();
    let smax = sv.iter().flatten().copied().fold(0.0, f64::max);
    let floor = SIGMA_FLOOR * smax;
    if smax == 0.0 || sv.iter().flatten().any(|&s| s <= floor) {
        return Determinant { value: 0.0, floored: true, log_value: f64::NEG_INFINITY };
    }
    let log_value = sv.iter().flatten().map(|s| s.ln()).sum::<f64>() / (n as f64 * sv.len() as f64);
    Determinant { value: log_value.exp(), floored: false, log_value }
}

/// `pnorm(x, p)` along a strictly decreasing grid of exponents; the values
/// decrease towards `fk_det(x)`.
pub fn det_as_limit(x: &Element, p_grid: &[f64]) -> Result<Vec<f64>> {
    if p_grid.is_empty() {
        return Err(Error::InvalidArgument("empty exponent grid".into()));
    }
    if p_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("exponent grid must be strictly decreasing".into()));
    }
    p_grid.iter().map(|&p| pnorm(x, p)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct PolarData {
    pub unitary_part: Element,
    pub modulus: Element,
    /// `x` is not injective; `unitary_part` is only a partial isometry.
    pub rank_deficient: bool,
    /// Sup over nodes of `|u |x| - x|`.
    pub residual: f64,
}

/// Polar decomposition `x = u |x|`, node-wise on the torus.
pub fn polar(x: &Element) -> Result<PolarData> {
    match x.data() {
        ElementData::Matrix(m) => {
            let (u, p, deficient) = linalg::polar(m);
            let residual = linalg::max_abs_diff(&(&u * &p), m);
            Ok(PolarData {
                unitary_part: Element::from_matrix(x.model(), u)?,
                modulus: Element::from_matrix(x.model(), p)?,
                rank_deficient: deficient,
                residual,
            })
        }
        ElementData::Torus(_) => {
            let start = torus::grid_size(8 * (x.model().degree() + 1));
            let (u, p, deficient) = torus::adaptive(start, |m| {
                let g = Grid::from_element(x, m);
                let parts: Vec<(CMat, CMat, bool)> = g.values().iter().map(linalg::polar).collect();
                let deficient = parts.iter().any(|t| t.2);
                let ug = Grid::from_values(parts.iter().map(|t| t.0.clone()).collect());
                let pg = Grid::from_values(parts.into_iter().map(|t| t.1).collect());
                let tail = ug.tail().max(pg.tail());
                let (u, _) = ug.to_element(x.model(), torus::TRUNCATION_TOL, false)?;
                let (p, _) = pg.to_element(x.model(), torus::TRUNCATION_TOL, false)?;
                Ok(((u, p, deficient), tail))
            })?;
            let residual = nodewise_diff(&u.mul(&p)?, x)?;
            Ok(PolarData { unitary_part: u, modulus: p, rank_deficient: deficient, residual })
        }
    }
}

/// Outcome of [`newton_power_root`].
#[derive(Clone, Debug, Serialize)]
pub struct NewtonRoot {
    pub root: Element,
    /// Updates performed by the final root iteration.
    pub iterations: usize,
    pub converged: bool,
    /// Largest violation of `x_{m+1} <= x_m` in the PSD order, from the second
    /// iterate on (the first Heron step moves above the root).
    pub monotonicity_defect: f64,
    /// Largest `|x_m b - b x_m|` over the iterates.
    pub commutator: f64,
    /// Sup differences between successive iterates.
    pub trace: Vec<f64>,
}

const NEWTON_MAX_ITER: usize = 200;

struct HeronRun {
    root: CMat,
    iterations: usize,
    converged: bool,
    monotonicity_defect: f64,
    commutator: f64,
    trace: Vec<f64>,
}

/// `x_1 = c`, `x_{m+1} = (x_m + c x_m^{-1}) / 2`, converging to `c^{1/2}`.
///
/// The iterates are computed in the coupled form `z_m = c^{-1} x_m`,
/// `x_{m+1} = (x_m + z_m^{-1}) / 2`, `z_{m+1} = (z_m + x_m^{-1}) / 2`, which is
/// the same sequence in exact arithmetic; the uncoupled step amplifies rounding
/// errors once `c` is moderately ill-conditioned.
fn heron(c: &CMat, anchor: &CMat, tol: f64) -> Result<HeronRun> {
    let mut x = c.clone();
    let mut z = linalg::eye(c.nrows());
    let mut run = HeronRun {
        root: x.clone(),
        iterations: 0,
        converged: false,
        monotonicity_defect: 0.0,
        commutator: 0.0,
        trace: Vec::new(),
    };
    let scale = linalg::max_abs(c).max(1.0);
    for m in 1..=NEWTON_MAX_ITER {
        let xinv = linalg::inverse(&x).ok_or(Error::NotPositive(linalg::min_eigenvalue(&x)))?;
        let zinv = linalg::inverse(&z).ok_or(Error::NotPositive(linalg::min_eigenvalue(&z)))?;
        let next = (&x + zinv).scale(0.5);
        let next = (&next + next.adjoint()).scale(0.5);
        z = (&z + xinv).scale(0.5);
        let step = linalg::max_abs_diff(&next, &x);
        if m >= 2 {
            let drop = linalg::min_eigenvalue(&(&x - &next));
            run.monotonicity_defect = run.monotonicity_defect.max(-drop);
        }
        run.commutator = run.commutator.max(linalg::max_abs_diff(&(&next * anchor), &(anchor * &next)));
        run.trace.push(step);
        x = next;
        run.iterations = m;
        // Steps at rounding level count as converged even below an unreachable tol.
        if step < tol * scale || step <= 16.0 * f64::EPSILON * scale {
            run.converged = true;
            break;
        }
    }
    run.root = x;
    Ok(run)
}

/// Splits a dyadic rational `p = k 2^{-e}` in `(0, 1]` with `e <= 30`.
pub fn dyadic_parts(p: f64) -> Result<(u64, u32)> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!("dyadic exponent {p} outside (0, 1]")));
    }
    for e in 0..=30u32 {
        let scaled = p * f64::from(1u32 << e);
        if scaled.fract() == 0.0 {
            return Ok((scaled as u64, e));
        }
    }
    Err(Error::InvalidArgument(format!("{p} is not a dyadic rational k/2^e with e <= 30")))
}

/// `(b + eps)^{p/2}` for positive `b` and dyadic `p`, through Heron-type root
/// iterations that stay inside the commutative algebra generated by `b`:
/// `(b + eps)^p` is built from `e` nested square roots and a `k`-th power, then
/// `x_{m+1} = (x_m + (b + eps)^p x_m^{-1}) / 2` runs from `x_1 = (b + eps)^p`.
pub fn newton_power_root(b: &Element, p: f64, eps: f64, tol: f64) -> Result<NewtonRoot> {
    let m = b.as_matrix().ok_or_else(|| Error::Unsupported {
        model: b.model().kind().to_string(),
        what: "Newton root iteration (matrix model only)".into(),
    })?;
    let herm = linalg::hermitian_defect(m);
    if herm > 1e-12 * linalg::max_abs(m).max(1.0) {
        return Err(Error::NotHermitian(herm));
    }
    if eps < 0.0 || tol <= 0.0 {
        return Err(Error::InvalidArgument("eps must be >= 0 and tol > 0".into()));
    }
    let (k, e) = dyadic_parts(p)?;
    let n = m.nrows();
    let base = m + linalg::eye(n) * cx(eps, 0.0);
    let lmin = linalg::min_eigenvalue(&base);
    if lmin <= 0.0 {
        return Err(Error::NotPositive(lmin));
    }
    let mut root = base.clone();
    for _ in 0..e {
        let run = heron(&root, &base, tol * 1e-3)?;
        if !run.converged {
            return Err(Error::NoConvergence {
                iterations: run.iterations,
                residual: run.trace.last().copied().unwrap_or(f64::NAN),
            });
        }
        root = run.root;
    }
    let c = matrix_power(&root, k);
    let run = heron(&c, &base, tol)?;
    if !run.converged {
        return Err(Error::NoConvergence {
            iterations: run.iterations,
            residual: run.trace.last().copied().unwrap_or(f64::NAN),
        });
    }
    Ok(NewtonRoot {
        root: Element::from_matrix(b.model(), run.root)?,
        iterations: run.iterations,
        converged: run.converged,
        monotonicity_defect: run.monotonicity_defect,
        commutator: run.commutator,
        trace: run.trace,
    })
}

fn matrix_power(m: &CMat, mut k: u64) -> CMat {
    let mut acc = linalg::eye(m.nrows());
    let mut base = m.clone();
    while k > 0 {
        if k & 1 == 1 {
            acc = &acc * &base;
        }
        base = &base * &base;
        k >>= 1;
    }
    (&acc + acc.adjoint()).scale(0.5)
}

// ---------------------------------------------------------------------------
// Membership

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MembershipMode {
    /// Vanishing of the entries or Fourier coefficients outside the pattern.
    Structural,
    /// Pairings `tau(x a)` against a basis of the annihilating subspace.
    Dual,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub member: bool,
    pub defect: f64,
}

fn verdict(x: &Element, defect: f64) -> Membership {
    Membership { member: defect <= x.default_tol(), defect }
}

/// Matrix units `e_ij` as elements.
fn unit(model: &AlgebraModel, i: usize, j: usize, k: i64) -> Element {
    let mut m = linalg::zeros(model.n());
    m[(i, j)] = cx(1.0, 0.0);
    if model.is_torus() {
        let model = model.with_degree(model.degree().max(k.unsigned_abs() as usize));
        Element::from_coefficients(&model, [(k, m)].into_iter().collect()).expect("unit shape")
    } else {
        Element::from_matrix(model, m).expect("unit shape")
    }
}

fn max_pairing(x: &Element, basis: impl Iterator<Item = Element>) -> f64 {
    basis
        .map(|a| x.mul(&a).map(|xa| trace(&xa).norm()).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max)
}

/// Basis of `A_0` (the annihilator of `A` under `tau(x a)`), truncated at `degree` on the torus.
fn a0_basis(model: &AlgebraModel, degree: usize) -> Vec<Element> {
    let n = model.n();
    if model.is_torus() {
        (1..=degree as i64)
            .flat_map(|k| (0..n).flat_map(move |i| (0..n).map(move |j| (i, j, k))))
            .map(|(i, j, k)| unit(model, i, j, k))
            .collect()
    } else {
        model.a0_pattern().into_iter().map(|(i, j)| unit(model, i, j, 0)).collect()
    }
}

fn a_basis(model: &AlgebraModel, degree: usize) -> Vec<Element> {
    let n = model.n();
    if model.is_torus() {
        (0..=degree as i64)
            .flat_map(|k| (0..n).flat_map(move |i| (0..n).map(move |j| (i, j, k))))
            .map(|(i, j, k)| unit(model, i, j, k))
            .collect()
    } else {
        model.a_pattern().into_iter().map(|(i, j)| unit(model, i, j, 0)).collect()
    }
}

fn structural_defect(x: &Element, allowed: impl Fn(usize, usize, i64) -> bool) -> f64 {
    match x.data() {
        ElementData::Matrix(m) => {
            let mut d: f64 = 0.0;
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    if !allowed(i, j, 0) {
                        d = d.max(m[(i, j)].norm());
                    }
                }
            }
            d
        }
        ElementData::Torus(c) => c
            .iter()
            .filter(|(k, _)| !allowed(0, 0, **k))
            .map(|(_, m)| linalg::max_abs(m))
            .fold(0.0, f64::max),
    }
}

/// Membership in `A`.
pub fn in_a(x: &Element, mode: MembershipMode) -> Membership {
    let defect = match mode {
        MembershipMode::Structural => {
            let idx = x.model().block_index();
            let torus = x.model().is_torus();
            structural_defect(x, |i, j, k| if torus { k >= 0 } else { idx[i] <= idx[j] })
        }
        MembershipMode::Dual => {
            let deg = x.model().degree();
            max_pairing(x, a0_basis(x.model(), deg).into_iter())
        }
    };
    verdict(x, defect)
}

/// Membership in `A_0 = A ∩ ker Phi`.
pub fn in_a0(x: &Element, mode: MembershipMode) -> Membership {
    let defect = match mode {
        MembershipMode::Structural => {
            let idx = x.model().block_index();
            let torus = x.model().is_torus();
            structural_defect(x, |i, j, k| if torus { k >= 1 } else { idx[i] < idx[j] })
        }
        MembershipMode::Dual => {
            let deg = x.model().degree();
            max_pairing(x, a_basis(x.model(), deg).into_iter())
        }
    };
    verdict(x, defect)
}

/// Membership in the diagonal `D = A ∩ A^*`.
pub fn in_d(x: &Element, mode: MembershipMode) -> Membership {
    let defect = match mode {
        MembershipMode::Structural => {
            let idx = x.model().block_index();
            let torus = x.model().is_torus();
            structural_defect(x, |i, j, k| if torus { k == 0 } else { idx[i] == idx[j] })
        }
        MembershipMode::Dual => {
            let deg = x.model().degree();
            let basis = a0_basis(x.model(), deg);
            let adjoints: Vec<Element> = basis.iter().map(Element::adjoint).collect();
            max_pairing(x, basis.into_iter().chain(adjoints))
        }
    };
    verdict(x, defect)
}
