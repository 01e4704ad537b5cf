//! CSV and metadata writers. Floats use Rust's shortest round-trip form, so
//! files parse back to the exact bits and repeated runs are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::integrator::{EventKind, SimulationRecord};
use crate::lagrangian::{self, LagrangianState};
use crate::oracle::{Blowup, BlowupReason, Comparison};
use crate::reconstruction::{self, EulerianField};

pub const SERIES_HEADER: &str = "step,t,energy,sphere_defect,tangency_defect,min_rho,argmin_rho,flat_measure,mu_check,forcing,gronwall_rate,min_phase_amplitude,sign_changes";
pub const SNAPSHOT_HEADER: &str = "x,rho,rho_t,K,u,ux,valid_ux";
pub const EULERIAN_HEADER: &str = "y,u,ux,valid_ux";
pub const EVENTS_HEADER: &str = "kind,time,bracket_start,bracket_end,step,min_rho,locations";
pub const COMPARE_HEADER: &str = "t,l2,linf";

fn f(v: f64) -> String {
    format!("{v:?}")
}

pub fn series_csv(record: &SimulationRecord) -> String {
    let mut out = format!("{SERIES_HEADER}\n");
    for r in &record.series {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.step,
            f(r.t),
            f(r.energy),
            f(r.sphere_defect),
            f(r.tangency_defect),
            f(r.min_rho),
            r.argmin_rho,
            f(r.flat_measure),
            f(r.mu_check),
            f(r.forcing),
            f(r.gronwall_rate),
            f(r.min_phase_amplitude),
            r.sign_changes.len()
        );
    }
    out
}

/// One row per label `x_j`: the state, the flow map `K(x_j)`, and the
/// velocity carried by that particle, `u(K) = G` and `u_x(K) = 2 rho_t / rho`.
pub fn snapshot_csv(state: &LagrangianState, mu: f64, flat_eps: f64) -> String {
    let map = reconstruction::flow_map(state, flat_eps);
    let g = lagrangian::compute_g(state, mu).g;
    let threshold = flat_eps * state.jacobian().max();
    let mut out = format!("{SNAPSHOT_HEADER}\n");
    for j in 0..state.n() {
        let (r, rt) = (state.rho.values()[j], state.rho_t.values()[j]);
        let valid = r * r >= threshold;
        let ux = if valid { 2.0 * rt / r } else { f64::NAN };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            f(state.rho.node(j)),
            f(r),
            f(rt),
            f(map.k[j]),
            f(g.values()[j]),
            f(ux),
            u8::from(valid)
        );
    }
    out
}

pub fn eulerian_csv(field: &EulerianField) -> String {
    let mut out = format!("{EULERIAN_HEADER}\n");
    for i in 0..field.m() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            f(field.u.node(i)),
            f(field.u.values()[i]),
            f(field.ux.values()[i]),
            u8::from(field.valid_ux[i])
        );
    }
    out
}

pub fn events_csv(record: &SimulationRecord) -> String {
    let mut out = format!("{EVENTS_HEADER}\n");
    for e in &record.events {
        let kind = match e.kind {
            EventKind::SignChange => "sign_change",
            EventKind::NearMiss => "near_miss",
        };
        let locations: Vec<String> = e.locations.iter().map(usize::to_string).collect();
        let _ = writeln!(
            out,
            "{kind},{},{},{},{},{},{}",
            f(e.time),
            f(e.bracket.0),
            f(e.bracket.1),
            e.step,
            f(e.min_rho),
            locations.join(" ")
        );
    }
    out
}

pub fn compare_csv(rows: &[Comparison]) -> String {
    let mut out = format!("{COMPARE_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", f(r.t), f(r.l2), f(r.linf));
    }
    out
}

pub fn blowup_text(blowup: Option<&Blowup>, slope_bound: f64) -> String {
    let mut out = String::new();
    match blowup {
        None => out.push_str("blowup = none\n"),
        Some(b) => {
            let reason = match b.reason {
                BlowupReason::NonFinite => "non_finite",
                BlowupReason::SlopeCap => "slope_cap",
                BlowupReason::Resolution => "resolution",
            };
            let _ = writeln!(out, "blowup = {reason}");
            let _ = writeln!(out, "blowup.detected = {}", f(b.detected));
            match b.extrapolated {
                Some(t) => {
                    let _ = writeln!(out, "blowup.extrapolated = {}", f(t));
                }
                None => out.push_str("blowup.extrapolated = none\n"),
            }
            let _ = writeln!(out, "blowup.time = {}", f(b.time()));
        }
    }
    let _ = writeln!(out, "slope_bound = {}", f(slope_bound));
    out
}

/// Ordered `key = value` lines; callers pass only deterministic values.
#[derive(Debug, Clone, Default)]
pub struct Metadata {
    lines: Vec<(String, String)>,
}

impl Metadata {
    pub fn new() -> Self {
        let mut m = Self::default();
        m.push("software", env!("CARGO_PKG_NAME"));
        m.push("version", env!("CARGO_PKG_VERSION"));
        m.push(
            "h_sign",
            "H = int_0^x sinh(P(x)-P(y)-1/2) w dy - int_x^1 sinh(P(y)-P(x)-1/2) w dy, over 2 sinh(1/2); F_x = rho^2 H, G_t = -H",
        );
        m
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    pub fn push_f64(&mut self, key: &str, value: f64) {
        self.push(key, f(value));
    }

    /// Prefixes every config line with `config.`.
    pub fn push_config(&mut self, canonical: &str) {
        for line in canonical.lines() {
            if let Some((k, v)) = line.split_once('=') {
                self.push(&format!("config.{}", k.trim()), v.trim());
            }
        }
    }

    pub fn render(&self) -> String {
        self.lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

pub fn write(path: &Path, contents: &str) -> io::Result<()> {
    fs::write(path, contents)
}
