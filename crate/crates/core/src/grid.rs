//! Uniform periodic grid on the unit circle `[0, 1)`.
//!
//! Nodes sit at `x_j = j / n` with no duplicated endpoint. On this grid the
//! rectangle and trapezoid rules coincide, so every periodic integral is a
//! plain mean of the samples.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::{kernel, spectral};

/// Samples of a real periodic function at `x_j = j / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

/// Check that `n` is an admissible node count (power of two, at least 16).
pub fn validate_grid_size(n: usize) -> Result<()> {
    if n >= 16 && n.is_power_of_two() {
        Ok(())
    } else {
        Err(Error::InvalidGridSize(n))
    }
}

fn check_finite(values: &[f64], context: &'static str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            context,
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        validate_grid_size(values.len())?;
        check_finite(&values, "grid function")?;
        Ok(Self { values })
    }

    /// Sample `f` at the `n` grid nodes.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        validate_grid_size(n)?;
        Self::new((0..n).map(|j| f(j as f64 / n as f64)).collect())
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::from_fn(n, |_| c)
    }

    /// Internal constructor for values produced by grid operations.
    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(values.len().is_power_of_two());
        Self { values }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Node coordinate `x_j`.
    pub fn node(&self, j: usize) -> f64 {
        j as f64 / self.n() as f64
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction::from_vec_unchecked(self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination; fails when the node counts differ.
    pub fn zip_map(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        ensure_same_grid(self, other)?;
        Ok(self.zip_map_unchecked(other, f))
    }

    pub(crate) fn zip_map_unchecked(
        &self,
        other: &GridFunction,
        f: impl Fn(f64, f64) -> f64,
    ) -> GridFunction {
        GridFunction::from_vec_unchecked(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// Periodic mean (`quad` without the finiteness check).
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `L^2(S^1)` norm via the periodic rule.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.n() as f64).sqrt()
    }

    /// Mean of the pointwise product, `quad(self * other)`.
    pub fn inner(&self, other: &GridFunction) -> Result<f64> {
        ensure_same_grid(self, other)?;
        Ok(self.inner_unchecked(other))
    }

    pub(crate) fn inner_unchecked(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / self.n() as f64
    }

    /// Periodic linear interpolation at an arbitrary (lifted) label.
    pub fn interpolate(&self, x: f64) -> f64 {
        let n = self.n();
        let s = x.rem_euclid(1.0) * n as f64;
        let j = (s.floor() as usize).min(n - 1);
        let frac = s - j as f64;
        let a = self.values[j];
        let b = self.values[(j + 1) % n];
        a + frac * (b - a)
    }
}

pub(crate) fn ensure_same_grid(a: &GridFunction, b: &GridFunction) -> Result<()> {
    if a.n() == b.n() {
        Ok(())
    } else {
        Err(Error::GridMismatch {
            left: a.n(),
            right: b.n(),
        })
    }
}

/// `int_0^1 w dx` by the periodic rectangle rule.
pub fn quad(w: &GridFunction) -> Result<f64> {
    check_finite(w.values(), "quad")?;
    Ok(w.mean())
}

/// Trapezoid cumulative integral `P(x_j) = int_0^{x_j} w`, with `P(x_0) = 0`.
///
/// Adding the closing panel `h (w_{n-1} + w_0) / 2` to the last entry gives
/// `quad(w)`.
pub fn cumint(w: &GridFunction) -> Result<GridFunction> {
    check_finite(w.values(), "cumint")?;
    let h = w.spacing();
    let v = w.values();
    let mut out = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    out.push(0.0);
    for j in 1..v.len() {
        acc += 0.5 * h * (v[j - 1] + v[j]);
        out.push(acc);
    }
    Ok(GridFunction::from_vec_unchecked(out))
}

/// Exact antiderivative `int_0^x w` of the trigonometric interpolant of `w`.
///
/// A nonzero mean of `w` contributes the linear ramp `mean * x`.
pub fn antiderivative(w: &GridFunction) -> GridFunction {
    GridFunction::from_vec_unchecked(spectral::antiderivative(w.values()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivScheme {
    /// Second-order periodic central difference.
    Centered,
    /// Exact derivative of the trigonometric interpolant.
    Spectral,
}

pub fn deriv(w: &GridFunction, scheme: DerivScheme) -> GridFunction {
    match scheme {
        DerivScheme::Centered => {
            let n = w.n();
            let v = w.values();
            let inv = 0.5 * n as f64;
            GridFunction::from_vec_unchecked(
                (0..n)
                    .map(|j| (v[(j + 1) % n] - v[(j + n - 1) % n]) * inv)
                    .collect(),
            )
        }
        DerivScheme::Spectral => GridFunction::from_vec_unchecked(spectral::derivative(w.values())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HelmholtzMethod {
    /// Convolution with `g`, integrated panel by panel against the
    /// trigonometric interpolant of `w` (O(n^2)).
    GreensConvolution,
    /// Division of Fourier mode `k` by `1 + 4 pi^2 k^2`.
    FourierSymbol,
}

/// Green's function of `1 - d^2/dx^2` on the circle,
/// `g(s) = cosh(|s| - 1/2) / (2 sinh 1/2)` with `|s|` reduced into `[0, 1)`.
pub fn greens_kernel(s: f64) -> f64 {
    let d = s.rem_euclid(1.0);
    (d - 0.5).cosh() / (2.0 * 0.5f64.sinh())
}

/// `(1 - d^2/dx^2)^{-1} w`.
pub fn helmholtz_inverse(w: &GridFunction, method: HelmholtzMethod) -> GridFunction {
    match method {
        HelmholtzMethod::GreensConvolution => {
            let n = w.n();
            let phase: Vec<f64> = (0..n).map(|j| j as f64 / n as f64).collect();
            let sums = kernel::sums_direct(&phase, 1.0, w.values());
            GridFunction::from_vec_unchecked(sums.cosh_sum)
        }
        HelmholtzMethod::FourierSymbol => {
            let n = w.n() as f64;
            GridFunction::from_vec_unchecked(spectral::apply_multiplier(
                w.values(),
                |k| {
                    let kk = 2.0 * PI * k as f64;
                    Complex64::new(1.0 / (1.0 + kk * kk), 0.0)
                },
                |c| c / (1.0 + PI * PI * n * n),
            ))
        }
    }
}

/// `d/dx (1 - d^2/dx^2)^{-1} w` through the Fourier symbol.
pub fn helmholtz_inverse_derivative(w: &GridFunction) -> GridFunction {
    GridFunction::from_vec_unchecked(spectral::apply_multiplier(
        w.values(),
        |k| {
            let kk = 2.0 * PI * k as f64;
            Complex64::new(0.0, kk / (1.0 + kk * kk))
        },
        |_| 0.0,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GridFunction::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn rejects_bad_sizes_and_values() {
        assert_eq!(GridFunction::new(vec![0.0; 8]), Err(Error::InvalidGridSize(8)));
        assert_eq!(GridFunction::new(vec![0.0; 24]), Err(Error::InvalidGridSize(24)));
        let mut v = vec![0.0; 16];
        v[3] = f64::NAN;
        assert!(matches!(GridFunction::new(v), Err(Error::NonFinite { index: 3, .. })));
        let a = GridFunction::constant(16, 1.0).unwrap();
        let b = GridFunction::constant(32, 1.0).unwrap();
        assert!(matches!(a.zip_map(&b, |x, y| x + y), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn quad_rejects_non_finite() {
        let mut w = GridFunction::constant(16, 1.0).unwrap();
        w.values[5] = f64::INFINITY;
        assert!(matches!(quad(&w), Err(Error::NonFinite { index: 5, .. })));
    }

    #[test]
    fn quad_examples() {
        assert_eq!(quad(&GridFunction::constant(64, 3.0).unwrap()).unwrap(), 3.0);
        let c = GridFunction::from_fn(64, |x| (2.0 * PI * x).cos()).unwrap();
        assert!(quad(&c).unwrap().abs() <= 1e-14);
    }

    #[test]
    fn quad_matches_fine_riemann_sum() {
        // spectral accuracy for smooth periodic integrands
        let f = |x: f64| (2.0 * PI * x).sin().exp();
        let coarse = quad(&GridFunction::from_fn(64, f).unwrap()).unwrap();
        let fine: f64 = (0..4096).map(|j| f(j as f64 / 4096.0)).sum::<f64>() / 4096.0;
        assert!((coarse - fine).abs() / fine <= 1e-12);
    }

    #[test]
    fn cumint_examples() {
        let ones = GridFunction::constant(64, 1.0).unwrap();
        let p = cumint(&ones).unwrap();
        for j in 0..64 {
            assert_eq!(p.values()[j], p.node(j));
        }
        // O(n^-2) against sin(2 pi x)
        let err = |n: usize| {
            let w = GridFunction::from_fn(n, |x| 2.0 * PI * (2.0 * PI * x).cos()).unwrap();
            let p = cumint(&w).unwrap();
            (0..n)
                .map(|j| (p.values()[j] - (2.0 * PI * p.node(j)).sin()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(64) / err(128);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn cumint_matches_partial_sums_and_closes_to_quad() {
        let w = random(64, 11);
        let p = cumint(&w).unwrap();
        let v = w.values();
        let h = 1.0 / 64.0;
        for j in 0..64 {
            let mut direct = 0.0;
            for i in 1..=j {
                direct += 0.5 * h * (v[i - 1] + v[i]);
            }
            assert_eq!(p.values()[j], direct);
        }
        let closed = p.values()[63] + 0.5 * h * (v[63] + v[0]);
        assert!((closed - quad(&w).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn deriv_examples() {
        let c = GridFunction::constant(32, 2.5).unwrap();
        assert!(deriv(&c, DerivScheme::Spectral).max_abs() < 1e-14);
        assert_eq!(deriv(&c, DerivScheme::Centered).max_abs(), 0.0);
        let s = GridFunction::from_fn(64, |x| (2.0 * PI * x).sin()).unwrap();
        let ds = deriv(&s, DerivScheme::Spectral);
        for j in 0..64 {
            let exact = 2.0 * PI * (2.0 * PI * s.node(j)).cos();
            assert!((ds.values()[j] - exact).abs() <= 1e-12);
        }
        let err = |n: usize| {
            let s = GridFunction::from_fn(n, |x| (2.0 * PI * x).sin()).unwrap();
            let d = deriv(&s, DerivScheme::Centered);
            (0..n)
                .map(|j| (d.values()[j] - 2.0 * PI * (2.0 * PI * s.node(j)).cos()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(64) / err(128);
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn helmholtz_examples() {
        for method in [HelmholtzMethod::GreensConvolution, HelmholtzMethod::FourierSymbol] {
            let c = GridFunction::constant(32, 0.7).unwrap();
            let r = helmholtz_inverse(&c, method);
            assert!(r.values().iter().all(|v| (v - 0.7).abs() <= 1e-12));
            for k in 1..4 {
                let w = GridFunction::from_fn(64, |x| (2.0 * PI * k as f64 * x).cos()).unwrap();
                let r = helmholtz_inverse(&w, method);
                let lam = 1.0 + 4.0 * PI * PI * (k * k) as f64;
                for j in 0..64 {
                    assert!((r.values()[j] - w.values()[j] / lam).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn helmholtz_methods_agree_on_random_data() {
        let w = random(128, 5);
        let a = helmholtz_inverse(&w, HelmholtzMethod::GreensConvolution);
        let b = helmholtz_inverse(&w, HelmholtzMethod::FourierSymbol);
        let diff = a.zip_map(&b, |x, y| x - y).unwrap().max_abs();
        assert!(diff <= 1e-10, "diff {diff}");
    }

    #[test]
    fn greens_kernel_integrates_to_one() {
        // fine midpoint rule of the kernel itself
        let m = 200_000;
        let s: f64 = (0..m).map(|j| greens_kernel((j as f64 + 0.5) / m as f64)).sum::<f64>() / m as f64;
        assert!((s - 1.0).abs() < 1e-10);
        assert!((greens_kernel(-0.25) - greens_kernel(0.25)).abs() < 1e-15);
    }
}
