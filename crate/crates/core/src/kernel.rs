//! Nonlocal kernel sums with a monotone phase.
//!
//! For a nondecreasing phase `P` on the lifted circle (`P(y+1) = P(y) + rise`)
//! and a periodic weight `w`, evaluates on the grid
//!
//! ```text
//! cosh-sum(x) = int_0^1 cosh(|P(x) - P(y)| - 1/2) / (2 sinh 1/2) w(y) dy
//! sinh-sum(x) = int_0^x sinh(P(x) - P(y) - 1/2) / (2 sinh 1/2) w(y) dy
//!             - int_x^1 sinh(P(y) - P(x) - 1/2) / (2 sinh 1/2) w(y) dy
//! ```
//!
//! The kernel argument is taken along label order (`y < x` uses `P(x) - P(y)`),
//! which is `|P(x) - P(y)|` whenever `P` is monotone. With `P(y) = y` the
//! cosh-sum is the Helmholtz inverse `(1 - d^2/dx^2)^{-1} w`.
//!
//! Both evaluation modes integrate `exp(+-P) w` exactly against the
//! trigonometric interpolant of `exp(+-(P - rise y)) w`, so they share one
//! discretisation and differ only in the algorithm.

use crate::spectral;

/// Output of one kernel evaluation.
#[derive(Debug, Clone)]
pub(crate) struct KernelSums {
    pub cosh_sum: Vec<f64>,
    pub sinh_sum: Vec<f64>,
}

fn half_sinh_norm() -> f64 {
    2.0 * 0.5f64.sinh()
}

fn weighted_exponentials(phase: &[f64], rise: f64, weight: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = phase.len();
    let h = 1.0 / n as f64;
    let mut ep = Vec::with_capacity(n);
    let mut em = Vec::with_capacity(n);
    for j in 0..n {
        let periodic = phase[j] - rise * j as f64 * h;
        let e = periodic.exp();
        ep.push(e * weight[j]);
        em.push(weight[j] / e);
    }
    (ep, em)
}

/// O(n log n) evaluation: one FFT pair for the prefix integrals, then the
/// exponential addition formula node by node.
pub(crate) fn sums_fast(phase: &[f64], rise: f64, weight: &[f64]) -> KernelSums {
    let n = phase.len();
    let (ep, em) = weighted_exponentials(phase, rise, weight);
    let (qp, qm) = spectral::exp_weighted_prefix_pair(&ep, rise, &em, -rise);
    let (qp_tot, qm_tot) = (qp[n], qm[n]);
    let norm = half_sinh_norm();
    let mut cosh_sum = Vec::with_capacity(n);
    let mut sinh_sum = Vec::with_capacity(n);
    for i in 0..n {
        let e = phase[i].exp();
        let (lo_p, lo_m) = (qp[i], qm[i]);
        let (up_p, up_m) = (qp_tot - qp[i], qm_tot - qm[i]);
        // exp(P_i -+ 1/2) and exp(-P_i -+ 1/2)
        let a = e * (-0.5f64).exp();
        let b = (0.5f64).exp() / e;
        let c = (-0.5f64).exp() / e;
        let d = e * (0.5f64).exp();
        let lower_cosh = 0.5 * (a * lo_m + b * lo_p);
        let upper_cosh = 0.5 * (c * up_p + d * up_m);
        let lower_sinh = 0.5 * (a * lo_m - b * lo_p);
        let upper_sinh = 0.5 * (c * up_p - d * up_m);
        cosh_sum.push((lower_cosh + upper_cosh) / norm);
        sinh_sum.push((lower_sinh - upper_sinh) / norm);
    }
    KernelSums { cosh_sum, sinh_sum }
}

/// O(n^2) evaluation: explicit panel moments, then a double loop applying
/// the kernel pair by pair.
pub(crate) fn sums_direct(phase: &[f64], rise: f64, weight: &[f64]) -> KernelSums {
    let n = phase.len();
    let (ep, em) = weighted_exponentials(phase, rise, weight);
    let mp = spectral::exp_weighted_panels_direct(&ep, rise);
    let mm = spectral::exp_weighted_panels_direct(&em, -rise);
    let cosh_mom: Vec<f64> = mp.iter().zip(&mm).map(|(p, m)| 0.5 * (p + m)).collect();
    let sinh_mom: Vec<f64> = mp.iter().zip(&mm).map(|(p, m)| 0.5 * (p - m)).collect();
    let norm = half_sinh_norm();
    let mut cosh_sum = vec![0.0; n];
    let mut sinh_sum = vec![0.0; n];
    for i in 0..n {
        let (cl, sl) = ((phase[i] - 0.5).cosh(), (phase[i] - 0.5).sinh());
        let (cr, sr) = ((phase[i] + 0.5).cosh(), (phase[i] + 0.5).sinh());
        let mut f = 0.0;
        let mut g = 0.0;
        for j in 0..n {
            let (cm, sm) = (cosh_mom[j], sinh_mom[j]);
            if j < i {
                // panel left of x_i: cosh(P_i - 1/2 - P_y), sinh(P_i - 1/2 - P_y)
                f += cl * cm - sl * sm;
                g += sl * cm - cl * sm;
            } else {
                // panel right of x_i: cosh(P_y - P_i - 1/2), -sinh(P_y - P_i - 1/2)
                f += cr * cm - sr * sm;
                g += sr * cm - cr * sm;
            }
        }
        cosh_sum[i] = f / norm;
        sinh_sum[i] = g / norm;
    }
    KernelSums { cosh_sum, sinh_sum }
}
