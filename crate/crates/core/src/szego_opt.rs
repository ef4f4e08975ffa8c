//! The Szegő formula `det(w) = inf { tau(w |a|^p) : a in A, det(Phi(a)) >= 1 }`
//! as a constrained minimization, with a closed-form oracle at `p = 2` and a
//! Monte-Carlo oracle.
//!
//! Any feasible `a` has the same modulus as an upper triangular matrix with a
//! positive diagonal and the same `det(Phi(.))` (positive QR, whose unitary
//! factor lies in `D`), so the search runs over
//! `a = diag(exp l) + s` with `sum l = 0` and `s` strictly upper triangular.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::element::Element;
use crate::error::{Error, Result};
use crate::functional::{fk_det, phi};
use crate::linalg::{self, cx, CMat, SIGMA_FLOOR};
use crate::random::complex_gaussian;

/// Finite-difference step for the gradient.
pub const FD_STEP: f64 = 1e-6;
/// Default number of starting points.
pub const DEFAULT_STARTS: usize = 8;

#[derive(Clone, Debug, Serialize)]
pub struct SzegoReport {
    pub det_w: f64,
    pub inf_estimate: f64,
    /// Closed-form value when available (`p = 2`, fully triangular flag).
    pub oracle_value: Option<f64>,
    pub relative_gap: f64,
    pub p: f64,
    /// Gradient iterations summed over all starts.
    pub iterations: usize,
    pub minimizer: Element,
    /// `det(Phi(minimizer))`.
    pub constraint: f64,
    /// Smallest objective value evaluated at any feasible point during the search.
    pub min_evaluated: f64,
    /// Best objective after each iteration of the winning start.
    pub trace: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosedForm {
    pub value: f64,
    pub minimizer: Element,
    /// `tau(w |minimizer|^2)` evaluated directly.
    pub objective: f64,
    /// `det(Phi(minimizer))`.
    pub constraint: f64,
}

fn require_matrix(w: &Element, what: &str) -> Result<CMat> {
    w.as_matrix().cloned().ok_or_else(|| Error::Unsupported {
        model: w.model().kind().to_string(),
        what: format!("{what} (matrix model only)"),
    })
}

fn require_psd(w: &CMat) -> Result<()> {
    let scale = linalg::max_abs(w).max(1.0);
    let herm = linalg::hermitian_defect(w);
    if herm > 1e-12 * scale {
        return Err(Error::NotHermitian(herm));
    }
    let lo = linalg::min_eigenvalue(w);
    if lo < -1e-12 * scale {
        return Err(Error::NotPositive(lo));
    }
    Ok(())
}

fn require_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

/// `tau(w |a|^p)`.
pub fn szego_objective(w: &CMat, a: &CMat, p: f64) -> f64 {
    let n = w.nrows() as f64;
    let g = a.adjoint() * a;
    let m = if p == 2.0 { g } else { linalg::psd_pow(&g, p / 2.0) };
    (w * m).trace().re / n
}

/// Upper triangular `a` from the log-diagonal `l` and the strictly upper entries `s`
/// (real and imaginary parts interleaved, row-major).
fn assemble(n: usize, x: &[f64]) -> CMat {
    let mut a = linalg::zeros(n);
    for i in 0..n {
        a[(i, i)] = cx(x[i].exp(), 0.0);
    }
    let mut k = n;
    for i in 0..n {
        for j in i + 1..n {
            a[(i, j)] = cx(x[k], x[k + 1]);
            k += 2;
        }
    }
    a
}

fn center(n: usize, x: &mut [f64]) {
    let mean = x[..n].iter().sum::<f64>() / n as f64;
    for v in &mut x[..n] {
        *v -= mean;
    }
}

struct Search<'a> {
    w: &'a CMat,
    p: f64,
    n: usize,
    min_evaluated: f64,
}

impl Search<'_> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        let f = szego_objective(self.w, &assemble(self.n, x), self.p);
        self.min_evaluated = self.min_evaluated.min(f);
        f
    }

    /// Projected gradient by central differences; diagonal directions are
    /// `e_i - 1/n`, which keep `sum l = 0`.
    fn gradient(&mut self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut g = vec![0.0; x.len()];
        let mut probe = x.to_vec();
        for i in 0..x.len() {
            let step = |probe: &mut Vec<f64>, sign: f64| {
                if i < n {
                    for (j, v) in probe[..n].iter_mut().enumerate() {
                        *v += sign * FD_STEP * (if i == j { 1.0 } else { 0.0 } - 1.0 / n as f64);
                    }
                } else {
                    probe[i] += sign * FD_STEP;
                }
            };
            step(&mut probe, 1.0);
            let fp = self.eval(&probe);
            probe.copy_from_slice(x);
            step(&mut probe, -1.0);
            let fm = self.eval(&probe);
            probe.copy_from_slice(x);
            g[i] = (fp - fm) / (2.0 * FD_STEP);
        }
        g
    }

    /// Barzilai-Borwein steps with Armijo backtracking.
    fn descend(&mut self, mut x: Vec<f64>, budget: usize) -> (Vec<f64>, f64, usize, Vec<f64>) {
        let mut f = self.eval(&x);
        let mut g = self.gradient(&x);
        let mut alpha = 1e-2;
        let mut trace = vec![f];
        let mut iters = 0;
        while iters < budget {
            iters += 1;
            let gnorm2: f64 = g.iter().map(|v| v * v).sum();
            if gnorm2.sqrt() < 1e-11 * (1.0 + f.abs()) {
                break;
            }
            let mut t = alpha;
            let (xn, fnew) = loop {
                let mut xn: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - t * b).collect();
                center(self.n, &mut xn);
                let fnew = self.eval(&xn);
                if fnew <= f - 1e-4 * t * gnorm2 || t < 1e-14 {
                    break (xn, fnew);
                }
                t *= 0.5;
            };
            if fnew >= f {
                break;
            }
            let gn = self.gradient(&xn);
            let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
            let ss: f64 = s.iter().map(|v| v * v).sum();
            alpha = if sy > 0.0 { (ss / sy).clamp(1e-8, 1e4) } else { (2.0 * t).min(1e4) };
            let rel = (f - fnew) / f.abs().max(f64::MIN_POSITIVE);
            x = xn;
            g = gn;
            f = fnew;
            trace.push(f);
            if rel < 1e-15 {
                break;
            }
        }
        (x, f, iters, trace)
    }
}

/// Minimizes `tau(w |a|^p)` over `a in A` with `det(Phi(a)) = 1` by projected
/// gradient descent from `starts` points (the first is `a = 1`).
pub fn szego_infimum_with(w: &Element, p: f64, budget: usize, seed: u64, starts: usize) -> Result<SzegoReport> {
    let wm = require_matrix(w, "Szegő infimum")?;
    require_psd(&wm)?;
    require_exponent(p)?;
    let n = w.n();
    let dim = n + n * (n - 1);
    let mut search = Search { w: &wm, p, n, min_evaluated: f64::INFINITY };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<f64>, f64, Vec<f64>)> = None;
    let mut iterations = 0;
    for start in 0..starts.max(1) {
        let mut x0 = vec![0.0; dim];
        if start > 0 {
            for v in x0.iter_mut() {
                *v = 0.5 * rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
            center(n, &mut x0);
        }
        let (x, f, it, trace) = search.descend(x0, budget);
        iterations += it;
        if best.as_ref().is_none_or(|b| f < b.1) {
            best = Some((x, f, trace));
        }
    }
    let (x, inf_estimate, trace) = best.expect("at least one start");
    let minimizer = Element::from_matrix(w.model(), assemble(n, &x))?;
    let constraint = fk_det(&phi(&minimizer)).value;
    let det_w = fk_det(w).value;
    let oracle_value = if p == 2.0 && w.model().is_fully_triangular() && linalg::min_eigenvalue(&wm) > 0.0 {
        closed_form_p2(w).ok().map(|c| c.value)
    } else {
        None
    };
    let sigma_min = SIGMA_FLOOR * linalg::singular_values(&wm)[0];
    Ok(SzegoReport {
        det_w,
        inf_estimate,
        oracle_value,
        relative_gap: (inf_estimate - det_w) / det_w.max(sigma_min),
        p,
        iterations,
        minimizer,
        constraint,
        min_evaluated: search.min_evaluated,
        trace,
    })
}

/// [`szego_infimum_with`] with the default number of starts.
pub fn szego_infimum(w: &Element, p: f64, budget: usize, seed: u64) -> Result<SzegoReport> {
    szego_infimum_with(w, p, budget, seed, DEFAULT_STARTS)
}

/// Exact minimizer at `p = 2` for the fully triangular flag: with `w = c c^*`,
/// `c` upper triangular, `tau(a w a^*) = |a c|_2^2` is minimized at
/// `a = delta c^{-1}`, `delta = (prod c_ii)^{1/n}`, with value `(det w)^{1/n}`.
pub fn closed_form_p2(w: &Element) -> Result<ClosedForm> {
    let wm = require_matrix(w, "closed-form p = 2 oracle")?;
    if !w.model().is_fully_triangular() {
        return Err(Error::InvalidModel(format!(
            "closed-form oracle needs every block of size 1, got {:?}",
            w.model().blocks()
        )));
    }
    require_psd(&wm)?;
    let n = w.n();
    let c = linalg::cholesky_upper_reversed(&wm).ok_or_else(|| Error::NotPositive(linalg::min_eigenvalue(&wm)))?;
    let log_delta = (0..n).map(|i| c[(i, i)].re.ln()).sum::<f64>() / n as f64;
    let delta = log_delta.exp();
    let cinv = linalg::inverse(&c).ok_or(Error::Singular { smallest: 0.0, floor: 0.0 })?;
    let a = cinv * cx(delta, 0.0);
    let objective = szego_objective(&wm, &a, 2.0);
    let minimizer = Element::from_matrix(w.model(), a)?;
    let constraint = fk_det(&phi(&minimizer)).value;
    Ok(ClosedForm { value: (2.0 * log_delta).exp(), minimizer, objective, constraint })
}

/// Minimum of `tau(w |a|^p)` over `samples` Gaussian `a in A` rescaled to
/// `det(Phi(a)) = 1`. Samples are drawn sequentially from one seeded stream, so
/// the value is nonincreasing in `samples` for a fixed seed.
pub fn brute_force_infimum(w: &Element, p: f64, samples: usize, seed: u64) -> Result<f64> {
    let wm = require_matrix(w, "Monte-Carlo infimum")?;
    require_psd(&wm)?;
    require_exponent(p)?;
    let n = w.n();
    let pattern = w.model().a_pattern();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let mut a = linalg::zeros(n);
        for &(i, j) in &pattern {
            a[(i, j)] = complex_gaussian(&mut rng);
        }
        let el = Element::from_matrix(w.model(), a.clone())?;
        let d = fk_det(&phi(&el));
        if !d.is_positive() {
            continue;
        }
        let a = a * cx(1.0 / d.value, 0.0);
        best = best.min(szego_objective(&wm, &a, p));
    }
    Ok(best)
}
