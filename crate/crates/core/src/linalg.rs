//! Dense complex matrix helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

/// Relative singular-value floor: values below `SIGMA_FLOOR * sigma_max` count as zero.
pub const SIGMA_FLOOR: f64 = 1e-14;

pub fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

fn symmetrize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of the Hermitian part of `m`.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = symmetrize(m).symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    hermitian_eigen(m).0.into_iter().fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(m: &CMat) -> f64 {
    hermitian_eigen(m).0.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Spectral calculus `f(m)` for Hermitian `m`.
pub fn hermitian_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = hermitian_eigen(m);
    let n = m.nrows();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let s = cx(f(vals[j]), 0.0);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    &scaled * vecs.adjoint()
}

/// `m^s` for positive semidefinite `m` (negative rounding noise clamped to zero).
pub fn psd_pow(m: &CMat, s: f64) -> CMat {
    hermitian_fn(m, |t| t.max(0.0).powf(s))
}

pub fn psd_sqrt(m: &CMat) -> CMat {
    hermitian_fn(m, |t| t.max(0.0).sqrt())
}

/// Thin singular value decomposition `m = u diag(sigma) v^*`, sigma decreasing.
/// Columns of `u` belonging to zero singular values are zero.
pub struct Svd {
    pub u: CMat,
    pub sigma: Vec<f64>,
    pub v: CMat,
}

const JACOBI_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD. nalgebra's complex bidiagonal SVD loses
/// digits on some well-conditioned inputs, so the decomposition is done here.
pub fn svd(m: &CMat) -> Svd {
    if m.nrows() < m.ncols() {
        let t = svd(&m.adjoint());
        return Svd { u: t.v, sigma: t.sigma, v: t.u };
    }
    let n = m.ncols();
    let mut a = m.clone();
    let mut v = eye(n);
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.norm();
                if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                rotate_columns(&mut a, p, q, c, c * t, phase);
                rotate_columns(&mut v, p, q, c, c * t, phase);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(f64, usize)> = (0..n).map(|k| (a.column(k).norm(), k)).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut u = CMat::zeros(m.nrows(), n);
    let mut vs = CMat::zeros(n, n);
    for (dst, &(sigma, src)) in order.iter().enumerate() {
        if sigma > 0.0 {
            u.set_column(dst, &(a.column(src) / cx(sigma, 0.0)));
        }
        vs.set_column(dst, &v.column(src));
    }
    Svd { u, sigma: order.iter().map(|o| o.0).collect(), v: vs }
}

/// Columns `p, q` become `c x_p - s y`, `s x_p + c y` with `y = conj(phase) x_q`.
fn rotate_columns(m: &mut CMat, p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    for i in 0..m.nrows() {
        let xp = m[(i, p)];
        let y = m[(i, q)] * phase.conj();
        m[(i, p)] = xp * c - y * s;
        m[(i, q)] = xp * s + y * c;
    }
}

/// Singular values, sorted in decreasing order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    svd(m).sigma
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().try_inverse()
}

/// Polar decomposition `m = u |m|`. When `m` is rank deficient, `u` is the partial
/// isometry supported on the range of `|m|` and the flag is set.
pub fn polar(m: &CMat) -> (CMat, CMat, bool) {
    let n = m.nrows();
    let Svd { u: w, sigma: sv, v } = svd(m);
    let smax = sv.first().copied().unwrap_or(0.0);
    let floor = SIGMA_FLOOR * smax;
    let mut deficient = smax == 0.0;
    let mut u = CMat::zeros(n, n);
    let mut modulus = CMat::zeros(n, n);
    for (k, &s) in sv.iter().enumerate() {
        let wk = w.column(k);
        let vk = v.column(k).adjoint();
        if s > floor {
            u += wk * &vk;
        } else {
            deficient = true;
        }
        // |m| = V S V^*
        modulus += vk.adjoint() * vk * cx(s, 0.0);
    }
    (u, symmetrize(&modulus), deficient)
}

/// QR decomposition with the diagonal of `r` real and nonnegative.
pub fn qr_positive(m: &CMat) -> (CMat, CMat) {
    let n = m.nrows();
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..n {
        let d = r[(i, i)];
        let a = d.norm();
        if a > 0.0 {
            let phase = d / a;
            for j in 0..n {
                r[(i, j)] /= phase;
            }
            for k in 0..n {
                q[(k, i)] *= phase;
            }
            r[(i, i)] = cx(a, 0.0);
        }
        for j in 0..i {
            r[(i, j)] = cx(0.0, 0.0);
        }
    }
    (q, r)
}

/// Factor a positive definite `w = c c^*` with `c` upper triangular and a positive
/// diagonal (Cholesky run in reversed order).
pub fn cholesky_upper_reversed(w: &CMat) -> Option<CMat> {
    let n = w.nrows();
    let flip = |m: &CMat| CMat::from_fn(n, n, |i, j| m[(n - 1 - i, n - 1 - j)]);
    let l = symmetrize(&flip(w)).cholesky()?.l();
    Some(flip(&l))
}

/// Upper triangular `r` with `r^* r = w` (ordinary Cholesky, transposed).
pub fn cholesky_upper(w: &CMat) -> Option<CMat> {
    Some(symmetrize(w).cholesky()?.l().adjoint())
}

/// Numerical rank of the column span of `cols`, thresholded at `rel * sigma_max`.
pub fn numerical_rank(cols: &CMat, rel: f64) -> usize {
    if cols.ncols() == 0 || cols.nrows() == 0 {
        return 0;
    }
    let s = singular_values(cols);
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel * top).count()
}

/// Relative distance from `target` to the column span of `cols`.
pub fn span_residual(cols: &CMat, target: &nalgebra::DVector<Complex64>, rel: f64) -> f64 {
    let tnorm = target.norm();
    if tnorm == 0.0 {
        return 0.0;
    }
    if cols.ncols() == 0 {
        return 1.0;
    }
    let Svd { u, sigma: sv, .. } = svd(cols);
    let top = sv.first().copied().unwrap_or(0.0);
    let mut proj = target.clone();
    for (k, &s) in sv.iter().enumerate() {
        if s > rel * top {
            let uk = u.column(k);
            let coeff = uk.dotc(target);
            proj -= uk * coeff;
        }
    }
    proj.norm() / tnorm
}

/// `max |u^* u - 1|` entrywise.
pub fn unitarity_defect(u: &CMat) -> f64 {
    max_abs_diff(&(u.adjoint() * u), &eye(u.nrows()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CMat {
        CMat::from_row_slice(
            3,
            3,
            &[
                cx(1.0, 0.5),
                cx(-0.3, 0.2),
                cx(2.0, 0.0),
                cx(0.1, -1.0),
                cx(0.7, 0.0),
                cx(0.4, 0.4),
                cx(-1.2, 0.3),
                cx(0.0, 0.9),
                cx(0.5, -0.5),
            ],
        )
    }

    #[test]
    fn qr_has_positive_diagonal() {
        let m = sample();
        let (q, r) = qr_positive(&m);
        assert!(unitarity_defect(&q) < 1e-13);
        assert!(max_abs_diff(&(&q * &r), &m) < 1e-13);
        for i in 0..3 {
            assert!(r[(i, i)].re > 0.0 && r[(i, i)].im == 0.0);
            for j in 0..i {
                assert_eq!(r[(i, j)], cx(0.0, 0.0));
            }
        }
    }

    #[test]
    fn jacobi_svd_reconstructs() {
        // Product of two moderately conditioned positive matrices and a unitary,
        // one of the inputs on which nalgebra's complex SVD drifts.
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(7);
        for _ in 0..200 {
            let g = crate::random::gaussian_matrix(&mut rng, 4);
            let h = crate::random::gaussian_matrix(&mut rng, 4);
            let m = &g * g.adjoint() * &h;
            let d = svd(&m);
            let s = CMat::from_diagonal(&nalgebra::DVector::from_iterator(4, d.sigma.iter().map(|&x| cx(x, 0.0))));
            assert!(max_abs_diff(&(&d.u * s * d.v.adjoint()), &m) <= 1e-12 * d.sigma[0]);
            assert!(unitarity_defect(&d.v) <= 1e-13);
            assert!(d.sigma.windows(2).all(|w| w[0] >= w[1]));
        }
        let wide = CMat::from_fn(2, 3, |i, j| cx((i + 2 * j) as f64, i as f64));
        let d = svd(&wide);
        assert_eq!((d.u.shape(), d.v.shape()), ((2, 2), (3, 2)));
    }

    #[test]
    fn polar_reconstructs() {
        let m = sample();
        let (u, p, deficient) = polar(&m);
        assert!(!deficient);
        assert!(max_abs_diff(&(&u * &p), &m) < 1e-13);
        assert!(unitarity_defect(&u) < 1e-13);
        assert!(min_eigenvalue(&p) > 0.0);
    }

    #[test]
    fn polar_flags_rank_deficiency() {
        let mut m = sample();
        m.set_column(2, &(m.column(0) * cx(2.0, 0.0)));
        let (u, p, deficient) = polar(&m);
        assert!(deficient);
        assert!(max_abs_diff(&(&u * &p), &m) < 1e-12);
    }

    #[test]
    fn reversed_cholesky_is_upper() {
        let m = sample();
        let w = &m * m.adjoint();
        let c = cholesky_upper_reversed(&w).unwrap();
        assert!(max_abs_diff(&(&c * c.adjoint()), &w) < 1e-12);
        for i in 0..3 {
            for j in 0..i {
                assert!(c[(i, j)].norm() < 1e-15);
            }
        }
    }

    #[test]
    fn rank_and_span() {
        let mut cols = CMat::zeros(3, 2);
        cols[(0, 0)] = cx(1.0, 0.0);
        cols[(1, 1)] = cx(1.0, 0.0);
        assert_eq!(numerical_rank(&cols, 1e-10), 2);
        let t = nalgebra::DVector::from_vec(vec![cx(1.0, 0.0), cx(0.0, 0.0), cx(1.0, 0.0)]);
        let r = span_residual(&cols, &t, 1e-12);
        assert!((r - 1.0 / 2f64.sqrt()).abs() < 1e-14);
    }
}
