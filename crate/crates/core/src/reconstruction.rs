//! From the Lagrangian state back to Eulerian quantities: the flow map
//! `K = k0 + int rho^2`, its inverse, `u = G o K^{-1}`, the slope, and the
//! weak-form residual of the Eulerian equation.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{self, GridFunction};
use crate::integrator::{SimulationRecord, DEFAULT_FLAT_EPS};
use crate::lagrangian::{self, LagrangianState};
use crate::spectral;

/// Lifted samples of the flow map with its flat intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    /// `K(x_j)` for `j = 0..=n`; the last entry closes the period.
    pub k: Vec<f64>,
    /// Maximal runs `(first, last)` of nodes with `rho^2 < flat_eps max rho^2`.
    pub flat_intervals: Vec<(usize, usize)>,
}

impl FlowMap {
    pub fn n(&self) -> usize {
        self.k.len() - 1
    }

    pub fn k0(&self) -> f64 {
        self.k[0]
    }

    /// `K(1) - K(0)`, equal to `quad(rho^2)`.
    pub fn rise(&self) -> f64 {
        self.k[self.n()] - self.k[0]
    }

    fn flat_interval_of(&self, j: usize) -> Option<(usize, usize)> {
        let idx = self.flat_intervals.partition_point(|&(_, b)| b < j);
        self.flat_intervals.get(idx).copied().filter(|&(a, _)| a <= j)
    }

    /// Largest panel index `j < n` with `k_j <= y`, for `y` in `[k_0, k_n)`.
    fn panel(&self, y: f64) -> usize {
        let n = self.n();
        self.k[..n].partition_point(|&k| k <= y).saturating_sub(1)
    }

    /// Reduce `y` into `[K(0), K(0) + rise)` and return the number of
    /// periods removed.
    fn reduce(&self, y: f64) -> (f64, f64) {
        let rise = self.rise();
        let shifts = ((y - self.k0()) / rise).floor();
        let mut r = y - shifts * rise;
        if r >= self.k0() + rise {
            r = self.k0();
        }
        (r, shifts)
    }

    /// Monotone piecewise-linear inverse on the lift, without the
    /// flat-interval midpoint rule.
    fn invert_linear_lifted(&self, y: f64) -> f64 {
        let (r, shifts) = self.reduce(y);
        let j = self.panel(r);
        let h = 1.0 / self.n() as f64;
        let (a, b) = (self.k[j], self.k[j + 1]);
        let frac = if b > a { ((r - a) / (b - a)).clamp(0.0, 1.0) } else { 0.5 };
        (j as f64 + frac) * h + shifts
    }
}

pub fn flow_map(state: &LagrangianState, flat_eps: f64) -> FlowMap {
    let jac = state.jacobian();
    let partial = grid::cumint(&jac).expect("finite state");
    let n = state.n();
    let mut k: Vec<f64> = partial.values().iter().map(|p| state.k0 + p).collect();
    k.push(state.k0 + jac.mean());
    let threshold = flat_eps * jac.max();
    let mut flat_intervals = Vec::new();
    let mut j = 0;
    while j < n {
        if jac.values()[j] < threshold {
            let start = j;
            while j + 1 < n && jac.values()[j + 1] < threshold {
                j += 1;
            }
            flat_intervals.push((start, j));
        }
        j += 1;
    }
    FlowMap { k, flat_intervals }
}

/// Label `x` in `[0, 1)` with `K(x) = y` modulo the period. Inside the image
/// of a flat interval the interval's midpoint is returned.
pub fn invert_flow(map: &FlowMap, y: f64) -> f64 {
    let (r, _) = map.reduce(y);
    let j = map.panel(r);
    if let Some((a, b)) = map.flat_interval_of(j) {
        if a < b && r <= map.k[b] {
            let h = 1.0 / map.n() as f64;
            return 0.5 * (a + b) as f64 * h;
        }
    }
    map.invert_linear_lifted(r).rem_euclid(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EulerianField {
    pub u: GridFunction,
    pub ux: GridFunction,
    pub valid_ux: Vec<bool>,
    pub t: f64,
    /// Magnitude written into `ux` where `valid_ux` is false.
    pub ux_clamp: f64,
}

impl EulerianField {
    pub fn m(&self) -> usize {
        self.u.n()
    }

    pub fn max_abs_valid_ux(&self) -> f64 {
        self.ux
            .values()
            .iter()
            .zip(&self.valid_ux)
            .filter(|(_, v)| **v)
            .fold(0.0, |m, (u, _)| m.max(u.abs()))
    }

    pub fn invalid_count(&self) -> usize {
        self.valid_ux.iter().filter(|v| !**v).count()
    }
}

/// `u = G o K^{-1}` and `u_x = (2 rho_t / rho) o K^{-1}` on `m` nodes.
/// `flat_eps` is relative to `max rho^2`.
pub fn eulerian_velocity(state: &LagrangianState, mu: f64, m: usize, flat_eps: f64) -> Result<EulerianField> {
    grid::validate_grid_size(m)?;
    if !(flat_eps > 0.0) {
        return Err(Error::InvalidParameter(format!("flat_eps = {flat_eps} must be positive")));
    }
    let map = flow_map(state, flat_eps);
    let g = lagrangian::compute_g(state, mu).g;
    let threshold = flat_eps * state.jacobian().max();
    let clamp = 1.0 / flat_eps;
    let mut u = Vec::with_capacity(m);
    let mut ux = Vec::with_capacity(m);
    let mut valid = Vec::with_capacity(m);
    for i in 0..m {
        let x = invert_flow(&map, i as f64 / m as f64);
        u.push(g.interpolate(x));
        let r = state.rho.interpolate(x);
        let rt = state.rho_t.interpolate(x);
        if r * r >= threshold {
            ux.push(2.0 * rt / r);
            valid.push(true);
        } else {
            ux.push(if r * rt > 0.0 { clamp } else { -clamp });
            valid.push(false);
        }
    }
    Ok(EulerianField {
        u: GridFunction::new(u)?,
        ux: GridFunction::new(ux)?,
        valid_ux: valid,
        t: state.t,
        ux_clamp: clamp,
    })
}

/// `int u^2 + u_x^2` in its Lagrangian form, finite through breaking.
pub fn eulerian_energy(state: &LagrangianState, mu: f64) -> f64 {
    lagrangian::energy(state, mu)
}

/// Rectangle rule for `int u^2 + u_x^2` on the Eulerian grid, skipping
/// nodes without a valid slope.
pub fn eulerian_grid_energy(field: &EulerianField) -> f64 {
    let m = field.m() as f64;
    field
        .u
        .values()
        .iter()
        .zip(field.ux.values())
        .zip(&field.valid_ux)
        .filter(|(_, v)| **v)
        .map(|((u, ux), _)| u * u + ux * ux)
        .sum::<f64>()
        / m
}

/// Eulerian density of `u^2 + u_x^2 / 2`, obtained by pushing the
/// Lagrangian weight `rho^2 G^2 + 2 rho_t^2` forward through `K` into `m`
/// cells centred on the output nodes. Mass concentrated where `K` is flat
/// stays in the cell containing its image.
pub fn pressure_source(state: &LagrangianState, mu: f64, m: usize) -> Result<GridFunction> {
    grid::validate_grid_size(m)?;
    let map = flow_map(state, DEFAULT_FLAT_EPS);
    let g = lagrangian::compute_g(state, mu).g;
    let w = lagrangian::kernel_weight(state, &g)?;
    let partial = grid::cumint(&w)?;
    let total = w.mean();
    let n = state.n();
    let mass_below = |x: f64| {
        let shifts = x.floor();
        let s = (x - shifts) * n as f64;
        let j = (s.floor() as usize).min(n - 1);
        let frac = s - j as f64;
        let a = partial.values()[j];
        let b = if j + 1 < n { partial.values()[j + 1] } else { total };
        shifts * total + a + frac * (b - a)
    };
    let dy = 1.0 / m as f64;
    let edges: Vec<f64> = (0..=m)
        .map(|i| mass_below(map.invert_linear_lifted((i as f64 - 0.5) * dy)))
        .collect();
    GridFunction::new(edges.windows(2).map(|e| (e[1] - e[0]) / dy).collect())
}

/// Smooth test function `bump((t - t_center) / t_half_width) cos(2 pi k x + phase)`
/// with `bump(s) = exp(-1 / (1 - s^2))` on `|s| < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    pub wavenumber: f64,
    pub phase: f64,
    pub t_center: f64,
    pub t_half_width: f64,
}

impl TestFunction {
    pub fn validate(&self) -> Result<()> {
        let k = self.wavenumber;
        if !k.is_finite() || k.fract() != 0.0 {
            return Err(Error::UnsupportedTestFunction(format!(
                "wavenumber {k} is not an integer, so the test function is not periodic"
            )));
        }
        if !(self.t_half_width > 0.0 && self.t_half_width.is_finite()) || !self.t_center.is_finite() || !self.phase.is_finite() {
            return Err(Error::UnsupportedTestFunction(format!(
                "time support centre {} half-width {} is not a bounded interval",
                self.t_center, self.t_half_width
            )));
        }
        Ok(())
    }

    pub fn support(&self) -> (f64, f64) {
        (self.t_center - self.t_half_width, self.t_center + self.t_half_width)
    }

    fn bump(&self, t: f64) -> (f64, f64) {
        let s = (t - self.t_center) / self.t_half_width;
        if s.abs() >= 1.0 {
            return (0.0, 0.0);
        }
        let q = 1.0 - s * s;
        let b = (-1.0 / q).exp();
        (b, b * (-2.0 * s / (q * q)) / self.t_half_width)
    }

    /// `(phi, phi_t, phi_x)` at `(t, x)`.
    pub fn eval(&self, t: f64, x: f64) -> (f64, f64, f64) {
        let (b, bt) = self.bump(t);
        let w = 2.0 * PI * self.wavenumber;
        let (s, c) = (w * x + self.phase).sin_cos();
        (b * c, bt * c, -w * b * s)
    }
}

/// The three space-time integrals making up the weak residual.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WeakResidualTerms {
    /// `int int u phi_t`
    pub transport: f64,
    /// `int int (u^2 / 2) phi_x`
    pub flux: f64,
    /// `int int p_x phi`
    pub pressure: f64,
}

impl WeakResidualTerms {
    pub fn total(&self) -> f64 {
        self.transport + self.flux - self.pressure
    }

    /// Largest individual term, the scale against which `total` is small.
    pub fn scale(&self) -> f64 {
        self.transport.abs().max(self.flux.abs()).max(self.pressure.abs())
    }
}

/// `R(phi) = int int u phi_t + (u^2 / 2) phi_x - p_x phi dx dt` with
/// `p = (1 - d^2/dx^2)^{-1} (u^2 + u_x^2 / 2)`.
pub fn weak_residual(record: &SimulationRecord, mu: f64, test_fn: &TestFunction, m: usize, times: usize) -> Result<f64> {
    weak_residual_terms(record, mu, test_fn, m, times).map(|t| t.total())
}

/// Space uses the rectangle rule on `m` Eulerian nodes, time the trapezoid
/// rule on `times` equispaced samples across the support of `phi`. States
/// between snapshots are interpolated linearly in time.
pub fn weak_residual_terms(
    record: &SimulationRecord,
    mu: f64,
    test_fn: &TestFunction,
    m: usize,
    times: usize,
) -> Result<WeakResidualTerms> {
    test_fn.validate()?;
    if times < 3 {
        return Err(Error::InvalidParameter("weak_residual needs at least 3 time samples".into()));
    }
    let (a, b) = test_fn.support();
    let start = record.initial_state().t;
    let end = record.final_state().t;
    if !(a > start && b < end) {
        return Err(Error::UnsupportedTestFunction(format!(
            "time support [{a}, {b}] is not compactly inside the run ({start}, {end})"
        )));
    }
    let dt = (b - a) / (times - 1) as f64;
    // the end samples carry phi = 0 with all derivatives
    let mut acc = WeakResidualTerms::default();
    for s in 1..times - 1 {
        let state = record.state_at(a + s as f64 * dt)?;
        let slice = residual_slice(&state, mu, test_fn, m)?;
        acc.transport += dt * slice.transport;
        acc.flux += dt * slice.flux;
        acc.pressure += dt * slice.pressure;
    }
    Ok(acc)
}

fn residual_slice(state: &LagrangianState, mu: f64, test_fn: &TestFunction, m: usize) -> Result<WeakResidualTerms> {
    let field = eulerian_velocity(state, mu, m, DEFAULT_FLAT_EPS)?;
    let px = grid::helmholtz_inverse_derivative(&pressure_source(state, mu, m)?);
    let mut acc = WeakResidualTerms::default();
    for i in 0..m {
        let x = i as f64 / m as f64;
        let (phi, phi_t, phi_x) = test_fn.eval(state.t, x);
        let u = field.u.values()[i];
        acc.transport += u * phi_t;
        acc.flux += 0.5 * u * u * phi_x;
        acc.pressure += px.values()[i] * phi;
    }
    let h = 1.0 / m as f64;
    Ok(WeakResidualTerms {
        transport: acc.transport * h,
        flux: acc.flux * h,
        pressure: acc.pressure * h,
    })
}

/// Pressure gradient `p_x` built by the alternative route `H o K^{-1}`
/// (since `F = p o K` and `K_x = rho^2`), for cross-checking.
pub fn pressure_gradient_lagrangian(state: &LagrangianState, mu: f64, m: usize) -> Result<GridFunction> {
    grid::validate_grid_size(m)?;
    let map = flow_map(state, DEFAULT_FLAT_EPS);
    let g = lagrangian::compute_g(state, mu).g;
    let h = lagrangian::compute_h(state, &g, lagrangian::KernelMode::Fast)?;
    GridFunction::new((0..m).map(|i| h.interpolate(invert_flow(&map, i as f64 / m as f64))).collect())
}

/// Least-squares slope magnitude of `log |c_k|` against `log k` for the
/// Fourier amplitudes of `K(x) - x - K(0)` above the noise floor. `None`
/// when fewer than three modes clear the floor.
pub fn smoothness_diagnostic(map: &FlowMap) -> Option<f64> {
    let n = map.n();
    let k0 = map.k0();
    let f: Vec<f64> = (0..n).map(|j| map.k[j] - k0 - j as f64 / n as f64 * map.rise()).collect();
    let coeffs = spectral::forward(&f);
    let scale = f.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-13 * scale;
    let points: Vec<(f64, f64)> = (1..n / 2)
        .filter_map(|k| {
            let a = coeffs[k].norm();
            (a > floor).then(|| ((k as f64).ln(), a.ln()))
        })
        .collect();
    if points.len() < 3 {
        return None;
    }
    let len = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / len;
    let my = points.iter().map(|p| p.1).sum::<f64>() / len;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(-sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{evolve, IntegratorConfig};

    fn state(n: usize, rho: impl Fn(f64) -> f64, rho_t: impl Fn(f64) -> f64, k0: f64) -> LagrangianState {
        LagrangianState::new(GridFunction::from_fn(n, rho).unwrap(), GridFunction::from_fn(n, rho_t).unwrap(), k0, 0.0).unwrap()
    }

    fn flat_state(n: usize) -> LagrangianState {
        let raw = GridFunction::from_fn(n, |x| if (0.4..=0.6).contains(&x) { 0.0 } else { 1.0 }).unwrap();
        let norm = raw.l2_norm();
        LagrangianState::new(raw.map(|r| r / norm), GridFunction::constant(n, 0.0).unwrap(), 0.0, 0.0).unwrap()
    }

    #[test]
    fn identity_flow_examples() {
        let s = state(32, |_| 1.0, |_| 0.0, 0.7);
        let map = flow_map(&s, 1e-8);
        for (j, k) in map.k.iter().enumerate() {
            assert!((k - (j as f64 / 32.0 + 0.7)).abs() < 1e-15);
        }
        assert!(map.flat_intervals.is_empty());
        assert!((invert_flow(&map, 0.2) - 0.5).abs() < 1e-14);
        assert!(smoothness_diagnostic(&map).is_none());
    }

    #[test]
    fn flat_interval_maps_to_midpoint() {
        let map = flow_map(&flat_state(64), 1e-8);
        assert_eq!(map.flat_intervals, vec![(26, 38)]);
        assert!((invert_flow(&map, map.k[30]) - 0.5).abs() < 1e-15);
        assert!((invert_flow(&map, map.k[26]) - 0.5).abs() < 1e-15);
        assert!((map.rise() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn inversion_round_trip_on_curved_map() {
        let s = state(64, |x| 1.0 + 0.3 * (2.0 * PI * x).sin(), |_| 0.0, -0.35);
        let norm = s.rho.l2_norm();
        let s = LagrangianState { rho: s.rho.map(|r| r / norm), ..s };
        let map = flow_map(&s, 1e-8);
        for j in 0..64 {
            let x = invert_flow(&map, map.k[j] + 3.0);
            assert!((x - j as f64 / 64.0).abs() < 1e-12, "{j}: {x}");
        }
    }

    #[test]
    fn sine_initial_field() {
        let n = 256;
        let s = state(n, |_| 1.0, |x| PI * (2.0 * PI * x).cos(), 0.0);
        let f = eulerian_velocity(&s, 0.0, n, 1e-8).unwrap();
        for i in 0..n {
            let y = i as f64 / n as f64;
            assert!((f.u.values()[i] - (2.0 * PI * y).sin()).abs() < 1e-12);
            assert!((f.ux.values()[i] - 2.0 * PI * (2.0 * PI * y).cos()).abs() < 1e-12);
        }
        assert_eq!(f.invalid_count(), 0);
        let e = eulerian_energy(&s, 0.0);
        assert!((e - (0.5 + 2.0 * PI * PI)).abs() < 1e-12);
        assert!((eulerian_grid_energy(&f) - e).abs() < 1e-10);
    }

    #[test]
    fn flat_nodes_get_clamped_slopes() {
        let s = flat_state(64);
        let f = eulerian_velocity(&s, 0.2, 64, 1e-8).unwrap();
        assert!(f.invalid_count() > 0);
        assert!(f.ux.values().iter().zip(&f.valid_ux).all(|(v, ok)| *ok || v.abs() == 1e8));
        assert!(f.u.values().iter().all(|u| u.is_finite()));
    }

    #[test]
    fn pressure_source_routes_agree_for_sine() {
        let n = 128;
        let s = state(n, |_| 1.0, |x| 0.1 * PI * (2.0 * PI * x).cos(), 0.0);
        let field = eulerian_velocity(&s, 0.0, n, 1e-8).unwrap();
        let direct = field.u.zip_map(&field.ux, |u, ux| u * u + 0.5 * ux * ux).unwrap();
        let pushed = pressure_source(&s, 0.0, n).unwrap();
        let a = grid::helmholtz_inverse_derivative(&direct);
        let b = grid::helmholtz_inverse_derivative(&pushed);
        let c = pressure_gradient_lagrangian(&s, 0.0, n).unwrap();
        assert!(a.zip_map(&b, |x, y| x - y).unwrap().max_abs() < 1e-4);
        assert!(a.zip_map(&c, |x, y| x - y).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn test_function_validation() {
        let ok = TestFunction { wavenumber: 1.0, phase: 0.0, t_center: 0.5, t_half_width: 0.25 };
        assert!(ok.validate().is_ok());
        let bad = TestFunction { wavenumber: 1.5, ..ok };
        assert!(matches!(bad.validate(), Err(Error::UnsupportedTestFunction(_))));
        let (phi, phi_t, phi_x) = ok.eval(0.9, 0.1);
        assert_eq!((phi, phi_t, phi_x), (0.0, 0.0, -0.0));
    }

    #[test]
    fn constant_run_has_zero_residual() {
        let s = state(32, |_| 1.0, |_| 0.0, 0.0);
        let cfg = IntegratorConfig { snapshot_stride: 1, ..IntegratorConfig::new(0.05, 1.0).unwrap() };
        let rec = evolve(&s, 0.4, &cfg).unwrap();
        let phi = TestFunction { wavenumber: 1.0, phase: 0.3, t_center: 0.5, t_half_width: 0.4 };
        assert!(weak_residual(&rec, 0.4, &phi, 32, 21).unwrap().abs() < 1e-14);
        let outside = TestFunction { t_center: 0.9, ..phi };
        assert!(weak_residual(&rec, 0.4, &outside, 32, 21).is_err());
    }

    #[test]
    fn analytic_data_decays_fast() {
        let s = state(128, |x| (0.3 * (2.0 * PI * x).sin()).exp(), |_| 0.0, 0.0);
        let norm = s.rho.l2_norm();
        let s = LagrangianState { rho: s.rho.map(|r| r / norm), ..s };
        let rate = smoothness_diagnostic(&flow_map(&s, 1e-8)).unwrap();
        assert!(rate > 5.0, "{rate}");
    }
}
