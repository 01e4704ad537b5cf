//! Worked examples that need a full run or an independent oracle.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rho_sphere::grid::GridFunction;
use rho_sphere::integrator::{self, IntegratorConfig, SimulationRecord};
use rho_sphere::lagrangian::{self, LagrangianState};
use rho_sphere::oracle::{self, OracleConfig};
use rho_sphere::reconstruction;
use rho_sphere::scenarios::{self, InitialKind, InitialSpec};

fn random_grid(rng: &mut ChaCha8Rng, n: usize, center: f64, spread: f64) -> GridFunction {
    GridFunction::new((0..n).map(|_| center + rng.gen_range(-spread..spread)).collect()).unwrap()
}

fn random_state(seed: u64, n: usize) -> LagrangianState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = random_grid(&mut rng, n, 1.0, 0.5);
    let rho_t = random_grid(&mut rng, n, 0.0, 1.0);
    let k0 = rng.gen_range(-1.0..1.0);
    integrator::project(&LagrangianState::new(rho, rho_t, k0, 0.0).unwrap()).unwrap()
}

fn peakon_run(n: usize, t_end: f64, stride: usize) -> (f64, SimulationRecord) {
    let spec = InitialSpec::new(InitialKind::PeakonPair { p: 1.0, q1: 0.25, q2: 0.75, mollify: None }, n);
    let (data, s) = scenarios::initial_state(&spec).unwrap();
    let mut cfg = IntegratorConfig::new(0.1024 / n as f64, t_end).unwrap();
    cfg.snapshot_stride = stride;
    (data.mu, integrator::evolve(&s, data.mu, &cfg).unwrap())
}

/// `c` by explicit real Fourier sums: antiderivative of the interpolant of
/// `2 rho rho_t` (Nyquist mode dropped), then the rectangle rule.
fn c_by_nested_sums(s: &LagrangianState, mu: f64) -> f64 {
    let n = s.n();
    let f: Vec<f64> = s.rho.values().iter().zip(s.rho_t.values()).map(|(r, rt)| 2.0 * r * rt).collect();
    let mean = f.iter().sum::<f64>() / n as f64;
    let mut total = 0.0;
    for j in 0..n {
        let x = j as f64 / n as f64;
        let mut a = mean * x;
        for k in 1..n / 2 {
            let w = 2.0 * PI * k as f64;
            let (mut ak, mut bk) = (0.0, 0.0);
            for (i, fi) in f.iter().enumerate() {
                let th = w * i as f64 / n as f64;
                ak += fi * th.cos();
                bk += fi * th.sin();
            }
            ak *= 2.0 / n as f64;
            bk *= 2.0 / n as f64;
            a += (ak * (w * x).sin() + bk * (1.0 - (w * x).cos())) / w;
        }
        let r = s.rho.values()[j];
        total += a * r * r;
    }
    mu - total / n as f64
}

#[test]
fn c_matches_nested_quadrature() {
    for seed in 0..3 {
        let s = random_state(seed, 64);
        let c = lagrangian::compute_c(&s, 0.37);
        let oracle = c_by_nested_sums(&s, 0.37);
        assert!((c - oracle).abs() <= 1e-13, "seed {seed}: {c} vs {oracle}");
    }
}

#[test]
fn flow_map_matches_trapezoid_partial_sums() {
    let s = random_state(7, 128);
    let map = reconstruction::flow_map(&s, 1e-8);
    let h = 1.0 / 128.0;
    let r = s.rho.values();
    let mut partial = 0.0;
    assert_eq!(map.k[0], s.k0);
    for j in 1..128 {
        partial += 0.5 * h * (r[j - 1] * r[j - 1] + r[j] * r[j]);
        assert_eq!(map.k[j], s.k0 + partial, "node {j}");
    }
    assert!((map.k[128] - s.k0 - 1.0).abs() <= 1e-15);
}

/// Projection removes the defects to round-off. The energy moves at first
/// order in the kick size, so shrinking the kick tenfold shrinks the change
/// about tenfold.
#[test]
fn off_sphere_perturbation_is_projected_back() {
    let spec = InitialSpec::new(InitialKind::Sine { amplitude: 1.0, wavenumber: 1 }, 64);
    let (data, s) = scenarios::initial_state(&spec).unwrap();
    let e0 = lagrangian::energy(&s, data.mu);
    let kicked = |seed: u64, size: f64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut kick = |g: &GridFunction| {
            GridFunction::new(g.values().iter().map(|v| v + size * rng.gen_range(-1.0..1.0)).collect()).unwrap()
        };
        let raw = LagrangianState::new(kick(&s.rho), kick(&s.rho_t), s.k0, 0.0).unwrap();
        integrator::project(&raw).unwrap()
    };
    for seed in 0..20 {
        let p = kicked(seed, 1e-3);
        assert!(p.sphere_defect() <= 1e-15 && p.tangency_defect() <= 1e-15, "seed {seed}");
        let de = (lagrangian::energy(&p, data.mu) - e0).abs() / e0;
        assert!(de <= 2e-4, "seed {seed}: {de:e}");
        let small = (lagrangian::energy(&kicked(seed, 1e-4), data.mu) - e0).abs() / e0;
        assert!((5.0..20.0).contains(&(de / small)), "seed {seed}: {de:e} vs {small:e}");
    }
}

/// The breaking time converges from above at first order in `h = 1/n`,
/// to the collision time of the peakon ODE (3.1904 for this pair).
#[test]
fn peakon_event_time_converges_from_above() {
    let times: Vec<f64> = [64, 128, 256, 512]
        .iter()
        .map(|&n| peakon_run(n, 3.5, 1000).1.first_sign_change().expect("peakons collide").time)
        .collect();
    assert!(times.windows(2).all(|w| w[1] < w[0]), "{times:?}");
    let gaps: Vec<f64> = times.windows(2).map(|w| w[0] - w[1]).collect();
    for g in gaps.windows(2) {
        let ratio = g[1] / g[0];
        assert!((0.4..0.6).contains(&ratio), "{gaps:?}");
    }
    let limit = 2.0 * times[3] - times[2];
    assert!((limit - 3.1904).abs() <= 1e-3, "{limit}");
}

/// At a fixed threshold the flat-set fraction tends to the measure of
/// `{rho^2 < eps}`, which shrinks like `sqrt(eps)` around simple zeros.
/// Refinement keeps its time average at that level, and tightening `eps`
/// drives it to zero.
#[test]
fn flat_set_time_average_is_small_and_vanishes_with_threshold() {
    let average = |rec: &SimulationRecord| rec.series.iter().map(|r| r.flat_measure).sum::<f64>() / rec.series.len() as f64;
    let levels: Vec<f64> = [128, 256, 512].iter().map(|&n| average(&peakon_run(n, 6.4, 100_000).1)).collect();
    assert!(levels.iter().all(|a| *a > 0.0 && *a <= 2e-4), "{levels:?}");
    assert!(levels[2] <= 1.2 * levels[1] && levels[1] <= 1.2 * levels[0], "{levels:?}");

    let (_, rec) = peakon_run(128, 6.4, 1);
    let at = |eps: f64| {
        let total: f64 = rec.snapshots.iter().map(|s| lagrangian::flat_set_measure(s, eps * s.jacobian().max())).sum();
        total / rec.snapshots.len() as f64
    };
    let (coarse, fine) = (at(1e-8), at(1e-12));
    assert!(fine <= 0.05 * coarse, "{coarse:e} {fine:e}");
}

#[test]
fn cross_solver_error_shrinks_under_refinement() {
    let l2: Vec<f64> = [(128usize, 1e-3), (256, 5e-4), (512, 2.5e-4)]
        .iter()
        .map(|&(n, dt)| {
            let spec = InitialSpec::new(InitialKind::Sine { amplitude: 0.1, wavenumber: 1 }, n);
            let (data, s) = scenarios::initial_state(&spec).unwrap();
            let rec = integrator::evolve(&s, data.mu, &IntegratorConfig::new(dt, 1.0).unwrap()).unwrap();
            let traj = oracle::eulerian_evolve(&data.u0, &OracleConfig::new(dt, 1.0)).unwrap();
            oracle::compare(&rec, data.mu, &traj, 1.0, n).unwrap().l2
        })
        .collect();
    for w in l2.windows(2) {
        assert!(w[0] / w[1] >= 3.5, "{l2:?}");
    }
}
