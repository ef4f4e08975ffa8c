//! Entrywise FFTs of matrix-valued sequences on uniform circle grids.
//!
//! Convention: `x(theta) = sum_k xhat(k) e^{i k theta}`, nodes `theta_j = 2 pi j / m`.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::linalg::CMat;

/// Frequency represented by FFT bin `j` on a grid of `m` points.
pub(crate) fn bin_frequency(j: usize, m: usize) -> i64 {
    if j <= m / 2 {
        j as i64
    } else {
        j as i64 - m as i64
    }
}

/// FFT bin holding frequency `k` on a grid of `m` points.
pub(crate) fn frequency_bin(k: i64, m: usize) -> usize {
    k.rem_euclid(m as i64) as usize
}

/// Values at the `m` nodes of the trigonometric polynomial with the given
/// coefficients. Frequencies are reduced mod `m`, which is exact for evaluation.
pub(crate) fn synthesize<'a>(
    n: usize,
    coeffs: impl IntoIterator<Item = (i64, &'a CMat)>,
    m: usize,
) -> Vec<CMat> {
    let mut bins = vec![CMat::zeros(n, n); m];
    for (k, c) in coeffs {
        bins[frequency_bin(k, m)] += c;
    }
    transform(n, &bins, false)
}

/// Coefficients by bin (`1/m` normalized) of the sampled function.
pub(crate) fn analyze(values: &[CMat]) -> Vec<CMat> {
    let m = values.len();
    let n = values.first().map_or(0, |v| v.nrows());
    let mut out = transform(n, values, true);
    let scale = Complex64::new(1.0 / m as f64, 0.0);
    for c in &mut out {
        *c *= scale;
    }
    out
}

/// In-place scalar FFT; the forward transform is normalized by `1/m`.
pub(crate) fn scalar_transform(buf: &mut [Complex64], forward: bool) {
    let m = buf.len();
    let mut planner = FftPlanner::<f64>::new();
    if forward {
        planner.plan_fft_forward(m).process(buf);
        let scale = 1.0 / m as f64;
        for z in buf.iter_mut() {
            *z *= scale;
        }
    } else {
        planner.plan_fft_inverse(m).process(buf);
    }
}

fn transform(n: usize, input: &[CMat], forward: bool) -> Vec<CMat> {
    let m = input.len();
    let mut planner = FftPlanner::<f64>::new();
    let fft = if forward { planner.plan_fft_forward(m) } else { planner.plan_fft_inverse(m) };
    let mut out = vec![CMat::zeros(n, n); m];
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for r in 0..n {
        for c in 0..n {
            for (j, v) in input.iter().enumerate() {
                buf[j] = v[(r, c)];
            }
            fft.process(&mut buf);
            for (j, o) in out.iter_mut().enumerate() {
                o[(r, c)] = buf[j];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cx, max_abs_diff};

    #[test]
    fn synthesize_then_analyze() {
        let n = 2;
        let a = CMat::from_fn(n, n, |i, j| cx(i as f64 + 1.0, j as f64));
        let b = CMat::from_fn(n, n, |i, j| cx(-(j as f64), 0.5 * i as f64));
        let coeffs = [(0i64, a.clone()), (-2, b.clone())];
        let vals = synthesize(n, coeffs.iter().map(|(k, c)| (*k, c)), 9);
        // direct evaluation at node 3
        let th = 2.0 * std::f64::consts::PI * 3.0 / 9.0;
        let direct = &a + &b * Complex64::from_polar(1.0, -2.0 * th);
        assert!(max_abs_diff(&vals[3], &direct) < 1e-13);
        let back = analyze(&vals);
        assert!(max_abs_diff(&back[frequency_bin(-2, 9)], &b) < 1e-13);
        assert!(max_abs_diff(&back[0], &a) < 1e-13);
        assert_eq!(bin_frequency(7, 9), -2);
    }
}
