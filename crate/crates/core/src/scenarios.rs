//! Initial data and the map from `u0` to the Lagrangian state.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{self, GridFunction};
use crate::lagrangian::LagrangianState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierMode {
    pub k: u32,
    pub a_cos: f64,
    pub b_sin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialKind {
    Constant(f64),
    /// `amplitude * sin(2 pi wavenumber x)`
    Sine { amplitude: f64, wavenumber: u32 },
    /// `mean + sum a cos(2 pi k x) + b sin(2 pi k x)`
    Fourier { mean: f64, modes: Vec<FourierMode> },
    /// `p g(x - q1) - p g(x - q2)` with the periodic Helmholtz kernel `g`,
    /// optionally smoothed by a periodic Gaussian of width `mollify`.
    PeakonPair { p: f64, q1: f64, q2: f64, mollify: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialSpec {
    pub kind: InitialKind,
    pub n: usize,
}

impl InitialSpec {
    pub fn new(kind: InitialKind, n: usize) -> Self {
        Self { kind, n }
    }

    pub fn validate(&self) -> Result<()> {
        grid::validate_grid_size(self.n)?;
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} = {v} must be finite")))
            }
        };
        match &self.kind {
            InitialKind::Constant(c) => finite("constant", *c),
            InitialKind::Sine { amplitude, wavenumber } => {
                finite("amplitude", *amplitude)?;
                if *wavenumber == 0 || *wavenumber as usize >= self.n / 2 {
                    return Err(Error::InvalidParameter(format!(
                        "wavenumber {wavenumber} must lie in 1..{}",
                        self.n / 2
                    )));
                }
                Ok(())
            }
            InitialKind::Fourier { mean, modes } => {
                finite("mean", *mean)?;
                for m in modes {
                    finite("a_cos", m.a_cos)?;
                    finite("b_sin", m.b_sin)?;
                    if m.k == 0 || m.k as usize >= self.n / 2 {
                        return Err(Error::InvalidParameter(format!(
                            "mode {} must lie in 1..{}",
                            m.k,
                            self.n / 2
                        )));
                    }
                }
                Ok(())
            }
            InitialKind::PeakonPair { p, q1, q2, mollify } => {
                finite("p", *p)?;
                finite("q1", *q1)?;
                finite("q2", *q2)?;
                let gap = (q1 - q2).rem_euclid(1.0);
                if gap == 0.0 {
                    return Err(Error::InvalidParameter("peakon positions q1 and q2 coincide".into()));
                }
                if let Some(s) = mollify {
                    if !(*s > 0.0 && s.is_finite()) {
                        return Err(Error::InvalidParameter(format!("mollify = {s} must be positive")));
                    }
                }
                Ok(())
            }
        }
    }
}

/// `u0`, `u0'` and the mean velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub u0: GridFunction,
    pub u0x: GridFunction,
    pub mu: f64,
}

pub fn make_initial(spec: &InitialSpec) -> Result<InitialData> {
    spec.validate()?;
    let n = spec.n;
    let (u0, u0x) = match &spec.kind {
        InitialKind::Constant(c) => (GridFunction::constant(n, *c)?, GridFunction::constant(n, 0.0)?),
        InitialKind::Sine { amplitude, wavenumber } => fourier_samples(
            n,
            0.0,
            &[FourierMode {
                k: *wavenumber,
                a_cos: 0.0,
                b_sin: *amplitude,
            }],
        )?,
        InitialKind::Fourier { mean, modes } => fourier_samples(n, *mean, modes)?,
        InitialKind::PeakonPair { p, q1, q2, mollify: None } => {
            let u0 = GridFunction::from_fn(n, |x| p * (grid::greens_kernel(x - q1) - grid::greens_kernel(x - q2)))?;
            let u0x = GridFunction::from_fn(n, |x| p * (kernel_slope(x - q1) - kernel_slope(x - q2)))?;
            (u0, u0x)
        }
        InitialKind::PeakonPair { p, q1, q2, mollify: Some(width) } => mollified_peakons(n, *p, *q1, *q2, *width)?,
    };
    let mu = grid::quad(&u0)?;
    Ok(InitialData { u0, u0x, mu })
}

/// `g'(s)`, with the mean of the one-sided slopes (zero) at the kink.
///
/// Sampling the slope pointwise keeps `rho_t` free of the grid-scale
/// ringing a spectral derivative of the kink would seed; that ringing
/// drives spurious early zeros of `rho` next to the peaks.
fn kernel_slope(s: f64) -> f64 {
    let s = s.rem_euclid(1.0);
    if s == 0.0 {
        0.0
    } else {
        (s - 0.5).sinh() / (2.0 * 0.5f64.sinh())
    }
}

fn fourier_samples(n: usize, mean: f64, modes: &[FourierMode]) -> Result<(GridFunction, GridFunction)> {
    let u0 = GridFunction::from_fn(n, |x| {
        let mut u = mean;
        for m in modes {
            let arg = 2.0 * PI * m.k as f64 * x;
            if m.a_cos != 0.0 {
                u += m.a_cos * arg.cos();
            }
            if m.b_sin != 0.0 {
                u += m.b_sin * arg.sin();
            }
        }
        u
    })?;
    let u0x = GridFunction::from_fn(n, |x| {
        let mut v = 0.0;
        for m in modes {
            let w = 2.0 * PI * m.k as f64;
            let arg = w * x;
            if m.a_cos != 0.0 {
                v -= w * m.a_cos * arg.sin();
            }
            if m.b_sin != 0.0 {
                v += w * m.b_sin * arg.cos();
            }
        }
        v
    })?;
    Ok((u0, u0x))
}

/// Sum of the kernel's Fourier series `1 / (1 + 4 pi^2 k^2)` times the
/// Gaussian factor `exp(-2 pi^2 width^2 k^2)`, truncated once the factor
/// drops below round-off.
fn mollified_peakons(n: usize, p: f64, q1: f64, q2: f64, width: f64) -> Result<(GridFunction, GridFunction)> {
    let decay = 2.0 * PI * PI * width * width;
    let kmax = ((40.0 / decay).sqrt().ceil() as usize).max(1);
    if kmax > 1 << 20 {
        return Err(Error::InvalidParameter(format!("mollify = {width} is too narrow")));
    }
    // mode k of p(g(x-q1) - g(x-q2)) in the form a cos + b sin
    let coeffs: Vec<(f64, f64, f64)> = (1..=kmax)
        .map(|k| {
            let kf = k as f64;
            let amp = 2.0 * p * (-decay * kf * kf).exp() / (1.0 + 4.0 * PI * PI * kf * kf);
            let (s1, c1) = (2.0 * PI * kf * q1).sin_cos();
            let (s2, c2) = (2.0 * PI * kf * q2).sin_cos();
            (2.0 * PI * kf, amp * (c1 - c2), amp * (s1 - s2))
        })
        .collect();
    let u0 = GridFunction::from_fn(n, |x| {
        coeffs.iter().map(|(w, a, b)| {
            let (s, c) = (w * x).sin_cos();
            a * c + b * s
        }).sum()
    })?;
    let u0x = GridFunction::from_fn(n, |x| {
        coeffs.iter().map(|(w, a, b)| {
            let (s, c) = (w * x).sin_cos();
            w * (b * c - a * s)
        }).sum()
    })?;
    Ok((u0, u0x))
}

/// `rho = 1`, `rho_t = u0' / 2`, `k0 = 0`, `t = 0`.
pub fn lagrangian_initial(u0: &GridFunction, u0x: &GridFunction) -> Result<LagrangianState> {
    grid::ensure_same_grid(u0, u0x)?;
    let mean_slope = grid::quad(u0x)?;
    let scale = u0x.max_abs().max(1.0);
    if mean_slope.abs() > 1e-10 * scale {
        return Err(Error::InvalidParameter(format!(
            "u0' has nonzero mean {mean_slope}; u0 is not periodic"
        )));
    }
    grid::quad(u0)?;
    let n = u0.n();
    LagrangianState::new(GridFunction::constant(n, 1.0)?, u0x.map(|v| 0.5 * v), 0.0, 0.0)
}

/// `make_initial` followed by `lagrangian_initial`.
pub fn initial_state(spec: &InitialSpec) -> Result<(InitialData, LagrangianState)> {
    let data = make_initial(spec)?;
    let state = lagrangian_initial(&data.u0, &data.u0x)?;
    Ok((data, state))
}
