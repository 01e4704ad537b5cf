//! Fixed-step RK4 on the sphere with projection, monitoring and breaking
//! detection.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::lagrangian::{self, ConservedQuantities, FieldEvaluation, LagrangianState};

/// Flat-set threshold relative to `max rho^2`.
pub const DEFAULT_FLAT_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub projection: bool,
    pub snapshot_stride: usize,
    pub breaking_eps: f64,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_end: f64) -> Result<Self> {
        let cfg = Self {
            dt,
            t_end,
            projection: true,
            snapshot_stride: 100,
            breaking_eps: 1e-3,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_end = {} must be >= 0", self.t_end)));
        }
        if !(self.breaking_eps > 0.0 && self.breaking_eps.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "breaking_eps = {} must be positive",
                self.breaking_eps
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::InvalidParameter("snapshot_stride must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of steps to reach `t_end`; the last one is shortened if
    /// `t_end` is not a multiple of `dt`.
    pub fn step_count(&self) -> usize {
        let ratio = self.t_end / self.dt;
        let rounded = ratio.round();
        if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
            rounded as usize
        } else {
            ratio.ceil() as usize
        }
    }

    /// Time after `step` steps from `t0`.
    pub fn time_at(&self, t0: f64, step: usize, steps: usize) -> f64 {
        if step >= steps {
            t0 + self.t_end
        } else {
            t0 + step as f64 * self.dt
        }
    }
}

/// Default step `0.5 / (n max(1, sqrt(E)))`.
pub fn default_dt(n: usize, energy: f64) -> f64 {
    0.5 / (n as f64 * energy.sqrt().max(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// `min rho` changed sign between two steps.
    SignChange,
    /// `|min rho|` dipped below `breaking_eps` without crossing zero.
    NearMiss,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakingEvent {
    pub kind: EventKind,
    /// Zero of the linear interpolant of `min rho` inside `bracket` for a
    /// sign change; the step time of the smallest `|min rho|` otherwise.
    pub time: f64,
    pub bracket: (f64, f64),
    pub step: usize,
    /// Nodes where `rho` changed sign across the bracket (the minimising
    /// node for a near miss).
    pub locations: Vec<usize>,
    /// `min rho` at the later end of the bracket.
    pub min_rho: f64,
}

/// Diagnostics recorded after every step, and at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub sphere_defect: f64,
    pub tangency_defect: f64,
    pub min_rho: f64,
    pub argmin_rho: usize,
    pub flat_measure: f64,
    /// `|quad(G rho^2) - mu|`
    pub mu_check: f64,
    /// `max |G^2 - F|`
    pub forcing: f64,
    /// `max |1 + (G^2 - F) / 2|`, the local Gronwall rate.
    pub gronwall_rate: f64,
    /// `min (rho^2 + rho_t^2)`
    pub min_phase_amplitude: f64,
    /// Nodes whose `rho` has a different sign than at the previous row.
    pub sign_changes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRecord {
    pub config: IntegratorConfig,
    pub snapshots: Vec<LagrangianState>,
    pub series: Vec<SeriesRow>,
    pub events: Vec<BreakingEvent>,
    pub conserved: ConservedQuantities,
}

impl SimulationRecord {
    pub fn final_state(&self) -> &LagrangianState {
        self.snapshots.last().expect("record holds at least the initial snapshot")
    }

    pub fn initial_state(&self) -> &LagrangianState {
        &self.snapshots[0]
    }

    pub fn max_relative_energy_drift(&self) -> f64 {
        let e0 = self.conserved.energy;
        let scale = if e0 == 0.0 { 1.0 } else { e0.abs() };
        self.series.iter().fold(0.0, |m, r| m.max((r.energy - e0).abs() / scale))
    }

    /// `max_t max_x |1 + (G^2 - F) / 2|` over the recorded steps.
    pub fn gronwall_constant(&self) -> f64 {
        self.series.iter().fold(0.0, |m, r| m.max(r.gronwall_rate))
    }

    pub fn first_sign_change(&self) -> Option<&BreakingEvent> {
        self.events.iter().find(|e| e.kind == EventKind::SignChange)
    }

    /// State at time `t`, interpolated linearly between adjacent snapshots.
    pub fn state_at(&self, t: f64) -> Result<LagrangianState> {
        let first = self.snapshots.first().expect("non-empty");
        let last = self.final_state();
        let slack = 1e-12 * last.t.abs().max(1.0);
        if t < first.t - slack || t > last.t + slack {
            return Err(Error::TimeOutOfRange { t, start: first.t, end: last.t });
        }
        let idx = self.snapshots.partition_point(|s| s.t <= t);
        if idx == 0 {
            return Ok(first.clone());
        }
        if idx >= self.snapshots.len() {
            return Ok(last.clone());
        }
        let (a, b) = (&self.snapshots[idx - 1], &self.snapshots[idx]);
        let theta = (t - a.t) / (b.t - a.t);
        if theta <= 0.0 {
            return Ok(a.clone());
        }
        let lerp = |x: f64, y: f64| x + theta * (y - x);
        Ok(LagrangianState {
            rho: a.rho.zip_map_unchecked(&b.rho, lerp),
            rho_t: a.rho_t.zip_map_unchecked(&b.rho_t, lerp),
            k0: lerp(a.k0, b.k0),
            t,
        })
    }
}

/// Failed run: the error plus everything recorded up to the last good step.
#[derive(Debug, Clone)]
pub struct EvolveError {
    pub error: Error,
    pub record: Box<SimulationRecord>,
}

impl fmt::Display for EvolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (last good t = {})", self.error, self.record.final_state().t)
    }
}

impl std::error::Error for EvolveError {}

fn axpy(base: &LagrangianState, h: f64, rate: &lagrangian::StateRate) -> LagrangianState {
    LagrangianState {
        rho: base.rho.zip_map_unchecked(&rate.drho, |a, b| a + h * b),
        rho_t: base.rho_t.zip_map_unchecked(&rate.drho_t, |a, b| a + h * b),
        k0: base.k0 + h * rate.dk0,
        t: base.t + h,
    }
}

fn check_finite(state: &LagrangianState, step: usize) -> Result<()> {
    if state.is_finite() {
        Ok(())
    } else {
        Err(Error::StepFailure { step, t: state.t })
    }
}

fn rk4_from(
    state: &LagrangianState,
    k1: &lagrangian::StateRate,
    mu: f64,
    dt: f64,
    step: usize,
) -> Result<LagrangianState> {
    let s2 = axpy(state, 0.5 * dt, k1);
    check_finite(&s2, step)?;
    let k2 = lagrangian::vector_field(&s2, mu);
    let s3 = axpy(state, 0.5 * dt, &k2);
    check_finite(&s3, step)?;
    let k3 = lagrangian::vector_field(&s3, mu);
    let s4 = axpy(state, dt, &k3);
    check_finite(&s4, step)?;
    let k4 = lagrangian::vector_field(&s4, mu);
    let combine = |y: &GridFunction, a: &GridFunction, b: &GridFunction, c: &GridFunction, d: &GridFunction| {
        let (y, a, b, c, d) = (y.values(), a.values(), b.values(), c.values(), d.values());
        GridFunction::from_vec_unchecked(
            (0..y.len())
                .map(|j| y[j] + dt / 6.0 * (a[j] + 2.0 * b[j] + 2.0 * c[j] + d[j]))
                .collect(),
        )
    };
    let next = LagrangianState {
        rho: combine(&state.rho, &k1.drho, &k2.drho, &k3.drho, &k4.drho),
        rho_t: combine(&state.rho_t, &k1.drho_t, &k2.drho_t, &k3.drho_t, &k4.drho_t),
        k0: state.k0 + dt / 6.0 * (k1.dk0 + 2.0 * k2.dk0 + 2.0 * k3.dk0 + k4.dk0),
        t: state.t + dt,
    };
    check_finite(&next, step)?;
    Ok(next)
}

/// One classical RK4 step of `(rho, rho_t, k0)`. A negative `dt` steps
/// backwards.
pub fn rk4_step(state: &LagrangianState, mu: f64, dt: f64) -> Result<LagrangianState> {
    let k1 = lagrangian::vector_field(state, mu);
    rk4_from(state, &k1, mu, dt, 0)
}

/// Radial projection onto the unit sphere followed by removal of the
/// normal component of `rho_t`.
pub fn project(state: &LagrangianState) -> Result<LagrangianState> {
    let norm = state.rho.l2_norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::ZeroNorm);
    }
    let rho = state.rho.map(|r| r / norm);
    let normal = rho.inner_unchecked(&state.rho_t);
    let rho_t = state.rho_t.zip_map_unchecked(&rho, |rt, r| rt - normal * r);
    Ok(LagrangianState {
        rho,
        rho_t,
        k0: state.k0,
        t: state.t,
    })
}

fn series_row(state: &LagrangianState, eval: &FieldEvaluation, mu: f64, step: usize, prev: Option<&[f64]>) -> SeriesRow {
    let (min_rho, argmin_rho) = state
        .rho
        .values()
        .iter()
        .enumerate()
        .fold((f64::INFINITY, 0), |(m, a), (j, &r)| if r < m { (r, j) } else { (m, a) });
    let max_jac = state.rho.values().iter().fold(0.0f64, |m, r| m.max(r * r));
    let gronwall_rate = eval
        .g
        .values()
        .iter()
        .zip(eval.f.values())
        .fold(0.0f64, |m, (g, f)| m.max((1.0 + 0.5 * (g * g - f)).abs()));
    let sign_changes = match prev {
        Some(prev) => state
            .rho
            .values()
            .iter()
            .zip(prev)
            .enumerate()
            .filter(|(_, (now, before))| (**now < 0.0) != (**before < 0.0))
            .map(|(j, _)| j)
            .collect(),
        None => Vec::new(),
    };
    SeriesRow {
        step,
        t: state.t,
        energy: lagrangian::energy_with_g(state, &eval.g),
        sphere_defect: state.sphere_defect(),
        tangency_defect: state.tangency_defect(),
        min_rho,
        argmin_rho,
        flat_measure: lagrangian::flat_set_measure(state, DEFAULT_FLAT_EPS * max_jac),
        mu_check: (eval.g.inner_unchecked(&state.jacobian()) - mu).abs(),
        forcing: eval.forcing(),
        gronwall_rate,
        min_phase_amplitude: lagrangian::min_phase_amplitude(state),
        sign_changes,
    }
}

/// Integrate from `initial` to `initial.t + cfg.t_end`.
///
/// The field evaluated for the diagnostics of each (projected) state is
/// reused as the first RK4 stage of the next step. Breaking never stops
/// the run; only non-finite values do.
pub fn evolve(
    initial: &LagrangianState,
    mu: f64,
    cfg: &IntegratorConfig,
) -> std::result::Result<SimulationRecord, EvolveError> {
    let fail = |error: Error, snapshots: Vec<LagrangianState>, series: Vec<SeriesRow>, energy: f64| EvolveError {
        record: Box::new(SimulationRecord {
            config: *cfg,
            events: detect_breaking_series(&series, cfg.breaking_eps),
            snapshots,
            series,
            conserved: ConservedQuantities { mu, energy },
        }),
        error,
    };
    let invalid = |error: Error| fail(error, vec![initial.clone()], Vec::new(), f64::NAN);
    cfg.validate().map_err(invalid)?;
    if !initial.is_finite() {
        return Err(invalid(Error::StepFailure { step: 0, t: initial.t }));
    }

    let steps = cfg.step_count();
    let t0 = initial.t;
    let mut state = initial.clone();
    let mut eval = lagrangian::evaluate_field(&state, mu);
    let mut series = vec![series_row(&state, &eval, mu, 0, None)];
    let e0 = series[0].energy;
    let mut snapshots = vec![state.clone()];

    for step in 1..=steps {
        let t_next = cfg.time_at(t0, step, steps);
        let dt = t_next - state.t;
        let stepped = rk4_from(&state, &eval.rate, mu, dt, step).and_then(|mut s| {
            s.t = t_next;
            if cfg.projection {
                s = project(&s).map_err(|_| Error::StepFailure { step, t: t_next })?;
            }
            Ok(s)
        });
        let next = match stepped {
            Ok(s) => s,
            Err(e) => {
                if snapshots.last().map(|s| s.t) != Some(state.t) {
                    snapshots.push(state);
                }
                return Err(fail(e, snapshots, series, e0));
            }
        };
        let next_eval = lagrangian::evaluate_field(&next, mu);
        let row = series_row(&next, &next_eval, mu, step, Some(state.rho.values()));
        if !row.energy.is_finite() || !next_eval.rate.drho_t.is_finite() {
            if snapshots.last().map(|s| s.t) != Some(state.t) {
                snapshots.push(state);
            }
            return Err(fail(Error::StepFailure { step, t: t_next }, snapshots, series, e0));
        }
        series.push(row);
        state = next;
        eval = next_eval;
        if step % cfg.snapshot_stride == 0 || step == steps {
            snapshots.push(state.clone());
        }
    }

    Ok(SimulationRecord {
        config: *cfg,
        events: detect_breaking_series(&series, cfg.breaking_eps),
        snapshots,
        series,
        conserved: ConservedQuantities { mu, energy: e0 },
    })
}

/// Re-derive the breaking events of a record from its series.
pub fn detect_breaking(record: &SimulationRecord) -> Vec<BreakingEvent> {
    detect_breaking_series(&record.series, record.config.breaking_eps)
}

/// Events are sign changes of `min rho` between consecutive rows. An
/// excursion of `|min rho|` below `eps` that never crosses zero yields a
/// single near-miss event at its smallest value.
fn detect_breaking_series(series: &[SeriesRow], eps: f64) -> Vec<BreakingEvent> {
    let mut events = Vec::new();
    let mut k = 0;
    while k < series.len() {
        if series[k].min_rho.abs() >= eps {
            if k > 0 {
                if let Some(e) = sign_change(&series[k - 1], &series[k]) {
                    events.push(e);
                }
            }
            k += 1;
            continue;
        }
        // excursion into the band: rows start..end
        let start = k;
        while k < series.len() && series[k].min_rho.abs() < eps {
            k += 1;
        }
        let end = k.min(series.len() - 1);
        let lo = start.saturating_sub(1);
        let mut crossed = false;
        for j in lo + 1..=end {
            if let Some(e) = sign_change(&series[j - 1], &series[j]) {
                events.push(e);
                crossed = true;
            }
        }
        if !crossed {
            let best = (start..k)
                .min_by(|&a, &b| series[a].min_rho.abs().total_cmp(&series[b].min_rho.abs()))
                .expect("non-empty excursion");
            let row = &series[best];
            let before = if best > 0 { series[best - 1].t } else { row.t };
            events.push(BreakingEvent {
                kind: EventKind::NearMiss,
                time: row.t,
                bracket: (before, row.t),
                step: row.step,
                locations: vec![row.argmin_rho],
                min_rho: row.min_rho,
            });
        }
        // the row after the excursion was already paired with its predecessor
        k = end + 1;
    }
    events
}

fn sign_change(a: &SeriesRow, b: &SeriesRow) -> Option<BreakingEvent> {
    if (a.min_rho < 0.0) == (b.min_rho < 0.0) {
        return None;
    }
    let theta = a.min_rho / (a.min_rho - b.min_rho);
    let locations = if b.sign_changes.is_empty() {
        vec![b.argmin_rho]
    } else {
        b.sign_changes.clone()
    };
    Some(BreakingEvent {
        kind: EventKind::SignChange,
        time: a.t + theta * (b.t - a.t),
        bracket: (a.t, b.t),
        step: b.step,
        locations,
        min_rho: b.min_rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn constant_state(n: usize) -> LagrangianState {
        LagrangianState::new(
            GridFunction::constant(n, 1.0).unwrap(),
            GridFunction::constant(n, 0.0).unwrap(),
            0.0,
            0.0,
        )
        .unwrap()
    }

    fn sine_state(n: usize, a: f64) -> LagrangianState {
        LagrangianState::new(
            GridFunction::constant(n, 1.0).unwrap(),
            GridFunction::from_fn(n, |x| a * PI * (2.0 * PI * x).cos()).unwrap(),
            0.0,
            0.0,
        )
        .unwrap()
    }

    fn row(step: usize, min_rho: f64, changes: Vec<usize>) -> SeriesRow {
        SeriesRow {
            step,
            t: step as f64,
            energy: 1.0,
            sphere_defect: 0.0,
            tangency_defect: 0.0,
            min_rho,
            argmin_rho: 7,
            flat_measure: 0.0,
            mu_check: 0.0,
            forcing: 0.0,
            gronwall_rate: 1.0,
            min_phase_amplitude: 1.0,
            sign_changes: changes,
        }
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(0.0, 1.0).is_err());
        assert!(IntegratorConfig::new(0.1, -1.0).is_err());
        let mut c = IntegratorConfig::new(0.1, 1.0).unwrap();
        assert_eq!(c.step_count(), 10);
        c.breaking_eps = 0.0;
        assert!(c.validate().is_err());
        let c = IntegratorConfig::new(0.3, 1.0).unwrap();
        assert_eq!(c.step_count(), 4);
        assert_eq!(c.time_at(0.0, 4, 4), 1.0);
    }

    #[test]
    fn constant_state_step() {
        let s = constant_state(32);
        let next = rk4_step(&s, 0.5, 0.25).unwrap();
        assert_eq!(next.rho, s.rho);
        assert!(next.rho_t.max_abs() < 1e-16);
        assert!((next.k0 - 0.125).abs() < 1e-16);
        assert_eq!(next.t, 0.25);
    }

    #[test]
    fn projection_examples() {
        let s = sine_state(64, 0.3);
        let p = project(&s).unwrap();
        assert!(p.rho.zip_map(&s.rho, |a, b| a - b).unwrap().max_abs() < 1e-15);
        assert!(p.rho_t.zip_map(&s.rho_t, |a, b| a - b).unwrap().max_abs() < 1e-15);

        let scaled = LagrangianState { rho: s.rho.map(|r| 1.01 * r), ..s.clone() };
        let p = project(&scaled).unwrap();
        assert!(p.sphere_defect() < 1e-15);
        assert!(p.rho.values().iter().all(|r| (r - 1.0).abs() < 1e-15));

        let zero = LagrangianState { rho: s.rho.map(|_| 0.0), ..s };
        assert_eq!(project(&zero), Err(Error::ZeroNorm));
    }

    #[test]
    fn forward_backward_returns_to_start() {
        let s = sine_state(64, 0.05);
        let dt = 1e-2;
        let back = rk4_step(&rk4_step(&s, 0.0, dt).unwrap(), 0.0, -dt).unwrap();
        let err = back.rho_t.zip_map(&s.rho_t, |a, b| a - b).unwrap().max_abs();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn events_from_series() {
        let eps = 1e-3;
        let constant: Vec<_> = (0..5).map(|k| row(k, 1.0, vec![])).collect();
        assert!(detect_breaking_series(&constant, eps).is_empty());

        let crossing = vec![row(0, 0.5, vec![]), row(1, 2e-4, vec![]), row(2, -6e-4, vec![3, 4]), row(3, -0.2, vec![])];
        let ev = detect_breaking_series(&crossing, eps);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, EventKind::SignChange);
        assert_eq!(ev[0].bracket, (1.0, 2.0));
        assert_eq!(ev[0].locations, vec![3, 4]);
        assert!((ev[0].time - 1.25).abs() < 1e-12);

        let miss = vec![row(0, 0.5, vec![]), row(1, 5e-4, vec![]), row(2, 2e-4, vec![]), row(3, 7e-4, vec![]), row(4, 0.1, vec![])];
        let ev = detect_breaking_series(&miss, eps);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, EventKind::NearMiss);
        assert_eq!(ev[0].step, 2);
        assert_eq!(ev[0].locations, vec![7]);

        let big_jump = vec![row(0, 0.5, vec![]), row(1, -0.5, vec![9])];
        let ev = detect_breaking_series(&big_jump, eps);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].locations, vec![9]);
    }

    #[test]
    fn evolve_constant_has_no_events() {
        let cfg = IntegratorConfig { snapshot_stride: 7, ..IntegratorConfig::new(0.01, 0.5).unwrap() };
        let rec = evolve(&constant_state(32), 0.5, &cfg).unwrap();
        assert!(rec.events.is_empty());
        assert_eq!(rec.series.len(), 51);
        assert_eq!(rec.snapshots.len(), 1 + 7 + 1);
        assert!((rec.final_state().k0 - 0.25).abs() < 1e-14);
        assert!(rec.max_relative_energy_drift() < 1e-14);
    }

    #[test]
    fn state_at_interpolates() {
        let cfg = IntegratorConfig { snapshot_stride: 2, ..IntegratorConfig::new(0.1, 0.4).unwrap() };
        let rec = evolve(&constant_state(16), 1.0, &cfg).unwrap();
        let s = rec.state_at(0.3).unwrap();
        assert!((s.k0 - 0.3).abs() < 1e-14);
        assert!(rec.state_at(0.5).is_err());
    }

    #[test]
    fn default_dt_heuristic() {
        assert_eq!(default_dt(100, 0.25), 0.005);
        assert_eq!(default_dt(100, 4.0), 0.0025);
    }
}
