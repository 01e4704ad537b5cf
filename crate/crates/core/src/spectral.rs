//! Discrete Fourier machinery on the uniform periodic grid.
//!
//! Coefficients are normalised so that `f_j = sum_k c_k exp(2 pi i k j / n)`,
//! with index `k >= n/2` standing for the negative wavenumber `k - n`. The
//! Nyquist coefficient of real data represents `c_{n/2} cos(pi n x)`.

use std::cell::RefCell;
use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Signed wavenumber of DFT index `k` on an `n`-point grid.
#[inline]
pub(crate) fn wavenumber(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Normalised forward transform of real samples.
pub(crate) fn forward(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n));
    fft.process(&mut buf);
    let scale = 1.0 / n as f64;
    for c in &mut buf {
        *c *= scale;
    }
    buf
}

/// Forward transform of two real signals with one complex FFT.
pub(crate) fn forward_pair(a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = a.len();
    debug_assert_eq!(n, b.len());
    let mut buf: Vec<Complex64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| Complex64::new(x, y))
        .collect();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n));
    fft.process(&mut buf);
    let scale = 0.5 / n as f64;
    let mut ca = vec![Complex64::new(0.0, 0.0); n];
    let mut cb = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        let z = buf[k];
        let zc = buf[(n - k) % n].conj();
        ca[k] = (z + zc) * scale;
        cb[k] = (z - zc) * Complex64::new(0.0, -scale);
    }
    (ca, cb)
}

/// Inverse transform returning the real part.
pub(crate) fn inverse_real(coeffs: Vec<Complex64>) -> Vec<f64> {
    let mut buf = coeffs;
    let n = buf.len();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n));
    fft.process(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// Inverse transform of two coefficient sets whose syntheses are real.
pub(crate) fn inverse_real_pair(a: &[Complex64], b: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    let n = a.len();
    let mut buf: Vec<Complex64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| x + Complex64::new(0.0, 1.0) * y)
        .collect();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n));
    fft.process(&mut buf);
    buf.into_iter().map(|c| (c.re, c.im)).unzip()
}

/// Apply a Fourier multiplier `symbol(k)` to real samples. The Nyquist mode
/// is passed through `nyquist` so that odd multipliers can drop it.
pub(crate) fn apply_multiplier(
    values: &[f64],
    symbol: impl Fn(i64) -> Complex64,
    nyquist: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let n = values.len();
    let mut c = forward(values);
    for (k, ck) in c.iter_mut().enumerate() {
        if k == n / 2 {
            *ck = Complex64::new(nyquist(ck.re), 0.0);
        } else {
            *ck *= symbol(wavenumber(k, n));
        }
    }
    inverse_real(c)
}

/// Exact derivative of the trigonometric interpolant (Nyquist mode dropped).
pub(crate) fn derivative(values: &[f64]) -> Vec<f64> {
    apply_multiplier(values, |k| Complex64::new(0.0, 2.0 * PI * k as f64), |_| 0.0)
}

/// `x -> int_0^x f(y) dy` of the trigonometric interpolant, evaluated on the
/// grid. The mean of `f` contributes a linear ramp.
pub(crate) fn antiderivative(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut c = forward(values);
    let mean = c[0].re;
    c[0] = Complex64::new(0.0, 0.0);
    c[n / 2] = Complex64::new(0.0, 0.0);
    for (k, ck) in c.iter_mut().enumerate().skip(1) {
        if k != n / 2 {
            *ck /= Complex64::new(0.0, 2.0 * PI * wavenumber(k, n) as f64);
        }
    }
    let v = inverse_real(c);
    let v0 = v[0];
    let h = 1.0 / n as f64;
    v.iter()
        .enumerate()
        .map(|(j, &vj)| mean * j as f64 * h + vj - v0)
        .collect()
}

/// `expm1(z) / z`, continuous at zero.
#[inline]
pub(crate) fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 + 0.5 * z
    } else {
        z.exp_m1() / z
    }
}

/// Prefix integrals `Q_j = int_0^{x_j} exp(rate * y) E(y) dy` for `j = 0..=n`,
/// where `E` is the trigonometric interpolant of periodic samples. Entry `n`
/// is the full-period integral.
///
/// Both sets of coefficients are handled with a single complex FFT pair.
pub(crate) fn exp_weighted_prefix_pair(
    e_plus: &[f64],
    rate_plus: f64,
    e_minus: &[f64],
    rate_minus: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = e_plus.len();
    let (mut cp, mut cm) = forward_pair(e_plus, e_minus);
    let mean_p = cp[0].re;
    let mean_m = cm[0].re;
    for (coeffs, rate) in [(&mut cp, rate_plus), (&mut cm, rate_minus)] {
        coeffs[0] = Complex64::new(0.0, 0.0);
        for (k, c) in coeffs.iter_mut().enumerate().skip(1) {
            if k == n / 2 {
                let nyq = PI * n as f64;
                *c *= rate / (rate * rate + nyq * nyq);
            } else {
                *c /= Complex64::new(rate, 2.0 * PI * wavenumber(k, n) as f64);
            }
        }
    }
    let (vp, vm) = inverse_real_pair(&cp, &cm);
    let assemble = |v: &[f64], mean: f64, rate: f64| -> Vec<f64> {
        let h = 1.0 / n as f64;
        let v0 = v[0];
        (0..=n)
            .map(|j| {
                let x = j as f64 * h;
                let vj = v[j % n];
                mean * x * phi1(rate * x) + (rate * x).exp() * vj - v0
            })
            .collect()
    };
    (
        assemble(&vp, mean_p, rate_plus),
        assemble(&vm, mean_m, rate_minus),
    )
}

/// Panel integrals `M_j = int_{x_j}^{x_{j+1}} exp(rate * y) E(y) dy` of the
/// trigonometric interpolant, by explicit product-quadrature weights.
///
/// O(n^2) and FFT-free: an independent route to the same quantities as
/// [`exp_weighted_prefix_pair`].
pub(crate) fn exp_weighted_panels_direct(e: &[f64], rate: f64) -> Vec<f64> {
    let n = e.len();
    let nf = n as f64;
    let h = 1.0 / nf;
    // psi_k = int_0^h exp((rate + 2 pi i k) y) dy for the interpolant's modes.
    let mut psi = Vec::with_capacity(n);
    for k in 0..n {
        if k == 0 {
            psi.push(Complex64::new(h * phi1(rate * h), 0.0));
        } else if k == n / 2 {
            let nyq = PI * nf;
            let v = -((rate * h).exp() + 1.0) * rate / (rate * rate + nyq * nyq);
            psi.push(Complex64::new(v, 0.0));
        } else {
            let s = Complex64::new(rate, 2.0 * PI * wavenumber(k, n) as f64);
            psi.push(((s * h).exp() - 1.0) / s);
        }
    }
    // weight(d) = (1/n) sum_k exp(2 pi i k d / n) psi_k, real by symmetry.
    let (cos_tab, sin_tab): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|i| {
            let theta = 2.0 * PI * i as f64 / nf;
            (theta.cos(), theta.sin())
        })
        .unzip();
    let weights: Vec<f64> = (0..n)
        .map(|d| {
            let mut acc = 0.0;
            for (k, p) in psi.iter().enumerate() {
                let idx = (k * d) % n;
                acc += p.re * cos_tab[idx] - p.im * sin_tab[idx];
            }
            acc / nf
        })
        .collect();
    (0..n)
        .map(|j| {
            let mut acc = 0.0;
            for (l, &el) in e.iter().enumerate() {
                acc += weights[(j + n - l) % n] * el;
            }
            (rate * j as f64 * h).exp() * acc
        })
        .collect()
}

/// Fourier resampling of periodic samples onto `m` nodes.
pub(crate) fn resample(values: &[f64], m: usize) -> Vec<f64> {
    let n = values.len();
    if m == n {
        return values.to_vec();
    }
    let c = forward(values);
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    let half = n.min(m) / 2;
    for (k, ck) in c.iter().enumerate() {
        let kk = wavenumber(k, n);
        if kk.unsigned_abs() as usize >= half {
            continue;
        }
        let idx = if kk >= 0 { kk as usize } else { (m as i64 + kk) as usize };
        out[idx] = *ck;
    }
    if n < m {
        // split the source Nyquist cosine evenly between +-n/2
        let nyq = c[n / 2].re * 0.5;
        out[n / 2] += nyq;
        out[m - n / 2] += nyq;
    } else {
        // +-m/2 alias onto the target Nyquist node pattern
        out[m / 2] = Complex64::new((c[m / 2] + c[n - m / 2]).re, 0.0);
    }
    inverse_real(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..n).map(|j| f(j as f64 / n as f64)).collect()
    }

    #[test]
    fn forward_pair_matches_two_transforms() {
        let a = sample(32, |x| (2.0 * PI * x).sin() + 0.3);
        let b = sample(32, |x| (6.0 * PI * x).cos() * x);
        let (ca, cb) = forward_pair(&a, &b);
        let (ra, rb) = (forward(&a), forward(&b));
        for k in 0..32 {
            assert!((ca[k] - ra[k]).norm() < 1e-14);
            assert!((cb[k] - rb[k]).norm() < 1e-14);
        }
    }

    #[test]
    fn antiderivative_of_cosine() {
        let n = 64;
        let f = sample(n, |x| 2.0 * PI * (2.0 * PI * x).cos() + 1.0);
        let a = antiderivative(&f);
        for (j, v) in a.iter().enumerate() {
            let x = j as f64 / n as f64;
            assert!((v - ((2.0 * PI * x).sin() + x)).abs() < 1e-13);
        }
    }

    #[test]
    fn exp_prefix_matches_closed_form() {
        // int_0^x e^{a y} dy with E == 1
        let n = 32;
        let ones = vec![1.0; n];
        let (qp, qm) = exp_weighted_prefix_pair(&ones, 1.0, &ones, -1.0);
        for j in 0..=n {
            let x = j as f64 / n as f64;
            assert!((qp[j] - x.exp_m1()).abs() < 1e-14);
            assert!((qm[j] + (-x).exp_m1()).abs() < 1e-14);
        }
    }

    #[test]
    fn direct_panels_match_fft_prefix() {
        let n = 32;
        let e = sample(n, |x| (x * 7.0).sin().exp() + (2.0 * PI * 3.0 * x).cos());
        let (q, _) = exp_weighted_prefix_pair(&e, 0.7, &e, 0.7);
        let m = exp_weighted_panels_direct(&e, 0.7);
        for j in 0..n {
            assert!((q[j + 1] - q[j] - m[j]).abs() < 1e-14, "panel {j}");
        }
    }

    #[test]
    fn resample_band_limited_is_exact() {
        let f = |x: f64| (2.0 * PI * x).sin() + 0.5 * (6.0 * PI * x).cos();
        let up = resample(&sample(16, f), 64);
        let down = resample(&sample(64, f), 32);
        for (j, v) in up.iter().enumerate() {
            assert!((v - f(j as f64 / 64.0)).abs() < 1e-13);
        }
        for (j, v) in down.iter().enumerate() {
            assert!((v - f(j as f64 / 32.0)).abs() < 1e-13);
        }
    }
}
