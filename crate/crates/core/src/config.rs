//! Flat `key = value` run configuration with dotted section keys.
//!
//! ```text
//! # comment
//! initial.kind = peakon_pair
//! initial.p = 1
//! grid.n = 512
//! integrator.t_end = 4
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::integrator::{self, IntegratorConfig};
use crate::oracle::{OracleConfig, DEFAULT_SLOPE_CAP};
use crate::scenarios::{FourierMode, InitialKind, InitialSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigError {
    /// 1-based line in the source text, if the problem is tied to one.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl ConfigError {
    fn at(line: Option<usize>, message: impl Into<String>) -> Self {
        Self { line, message: message.into() }
    }
}

const KEYS: &[&str] = &[
    "initial.kind",
    "initial.value",
    "initial.amplitude",
    "initial.wavenumber",
    "initial.mean",
    "initial.modes",
    "initial.p",
    "initial.q1",
    "initial.q2",
    "initial.mollify",
    "grid.n",
    "integrator.dt",
    "integrator.t_end",
    "integrator.projection",
    "integrator.snapshot_stride",
    "integrator.breaking_eps",
    "output.m",
    "output.flat_eps",
    "oracle.dt",
    "oracle.slope_cap",
    "compare.times",
    "seed",
    "sweep.key",
    "sweep.values",
];

/// Raw entries keyed by name, remembering the line each came from.
/// Overrides carry no line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigEntries {
    entries: BTreeMap<String, (String, Option<usize>)>,
}

impl ConfigEntries {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut out = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::at(Some(line), format!("expected `key = value`, found `{content}`")))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(ConfigError::at(Some(line), format!("unknown key `{key}`")));
            }
            if out.entries.contains_key(key) {
                return Err(ConfigError::at(Some(line), format!("duplicate key `{key}`")));
            }
            out.entries.insert(key.to_string(), (value.trim().to_string(), Some(line)));
        }
        Ok(out)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::at(None, format!("unknown key `{key}`")));
        }
        self.entries.insert(key.to_string(), (value.into(), None));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    /// Canonical text form, one sorted entry per line. Parsing it gives back
    /// the same entries (line numbers aside).
    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, (v, _))| format!("{k} = {v}\n")).collect()
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.entries.get(key).and_then(|(_, l)| *l)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| ConfigError::at(*line, format!("`{key}`: cannot parse `{v}`: {e}"))),
        }
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let Some((v, line)) = self.entries.get(key) else { return Ok(None) };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<T>().map_err(|e| ConfigError::at(*line, format!("`{key}`: cannot parse `{s}`: {e}"))))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}

/// Integrator settings before the step size heuristic is resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    pub dt: Option<f64>,
    pub t_end: f64,
    pub projection: bool,
    pub snapshot_stride: usize,
    pub breaking_eps: f64,
}

impl IntegratorSettings {
    /// Fills in `dt` from the heuristic when absent.
    pub fn resolve(&self, n: usize, energy: f64) -> crate::Result<IntegratorConfig> {
        let cfg = IntegratorConfig {
            dt: self.dt.unwrap_or_else(|| integrator::default_dt(n, energy)),
            t_end: self.t_end,
            projection: self.projection,
            snapshot_stride: self.snapshot_stride,
            breaking_eps: self.breaking_eps,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputSettings {
    /// Eulerian output nodes.
    pub m: usize,
    pub flat_eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub key: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub initial: InitialSpec,
    pub integrator: IntegratorSettings,
    pub output: OutputSettings,
    pub oracle_dt: Option<f64>,
    pub slope_cap: f64,
    pub compare_times: Vec<f64>,
    pub seed: u64,
    pub sweep: Option<Sweep>,
    pub entries: ConfigEntries,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_entries(ConfigEntries::parse(text)?)
    }

    pub fn from_entries(entries: ConfigEntries) -> Result<Self, ConfigError> {
        let e = &entries;
        let n: usize = e.or("grid.n", 256)?;
        let kind_line = e.line("initial.kind");
        let kind = match e.get("initial.kind").unwrap_or("sine") {
            "constant" => InitialKind::Constant(e.or("initial.value", 0.0)?),
            "sine" => InitialKind::Sine {
                amplitude: e.or("initial.amplitude", 1.0)?,
                wavenumber: e.or("initial.wavenumber", 1)?,
            },
            "fourier" => InitialKind::Fourier {
                mean: e.or("initial.mean", 0.0)?,
                modes: parse_modes(e.get("initial.modes").unwrap_or(""), e.line("initial.modes"))?,
            },
            "peakon_pair" => InitialKind::PeakonPair {
                p: e.or("initial.p", 1.0)?,
                q1: e.or("initial.q1", 0.25)?,
                q2: e.or("initial.q2", 0.75)?,
                mollify: e.parsed("initial.mollify")?,
            },
            other => {
                return Err(ConfigError::at(
                    kind_line,
                    format!("unknown initial.kind `{other}` (constant, sine, fourier, peakon_pair)"),
                ))
            }
        };
        let initial = InitialSpec::new(kind, n);
        initial
            .validate()
            .map_err(|err| ConfigError::at(kind_line.or(e.line("grid.n")), err.to_string()))?;

        let integrator = IntegratorSettings {
            dt: e.parsed("integrator.dt")?,
            t_end: e.or("integrator.t_end", 1.0)?,
            projection: e.or("integrator.projection", true)?,
            snapshot_stride: e.or("integrator.snapshot_stride", 100)?,
            breaking_eps: e.or("integrator.breaking_eps", 1e-3)?,
        };
        // a placeholder energy stands in for the heuristic dt here
        integrator
            .resolve(n, 1.0)
            .map_err(|err| {
                let line = ["integrator.dt", "integrator.t_end", "integrator.snapshot_stride", "integrator.breaking_eps"]
                    .iter()
                    .find_map(|k| e.line(k));
                ConfigError::at(line, err.to_string())
            })?;

        let output = OutputSettings {
            m: e.or("output.m", n)?,
            flat_eps: e.or("output.flat_eps", integrator::DEFAULT_FLAT_EPS)?,
        };
        crate::grid::validate_grid_size(output.m).map_err(|err| ConfigError::at(e.line("output.m"), err.to_string()))?;
        if !(output.flat_eps > 0.0 && output.flat_eps < 1.0) {
            return Err(ConfigError::at(e.line("output.flat_eps"), "output.flat_eps must lie in (0, 1)"));
        }

        let oracle_dt: Option<f64> = e.parsed("oracle.dt")?;
        if let Some(dt) = oracle_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(ConfigError::at(e.line("oracle.dt"), "oracle.dt must be positive"));
            }
        }
        let slope_cap = e.or("oracle.slope_cap", DEFAULT_SLOPE_CAP)?;
        let compare_times = e.list("compare.times")?.unwrap_or_else(|| vec![0.0, integrator.t_end]);
        if compare_times.iter().any(|t: &f64| !(t.is_finite() && *t >= 0.0)) {
            return Err(ConfigError::at(e.line("compare.times"), "compare.times must be non-negative"));
        }

        let sweep = match (e.get("sweep.key"), e.list::<String>("sweep.values")?) {
            (None, None) => None,
            (Some(key), Some(values)) if !values.is_empty() => {
                if !KEYS.contains(&key) || key.starts_with("sweep.") {
                    return Err(ConfigError::at(e.line("sweep.key"), format!("cannot sweep `{key}`")));
                }
                Some(Sweep { key: key.to_string(), values })
            }
            _ => {
                return Err(ConfigError::at(
                    e.line("sweep.key").or(e.line("sweep.values")),
                    "sweep needs both sweep.key and a non-empty sweep.values",
                ))
            }
        };

        Ok(Self {
            initial,
            integrator,
            output,
            oracle_dt,
            slope_cap,
            compare_times,
            seed: e.or("seed", 0)?,
            sweep,
            entries,
        })
    }

    pub fn oracle_config(&self, dt: f64, t_end: f64) -> OracleConfig {
        OracleConfig {
            slope_cap: self.slope_cap,
            ..OracleConfig::new(self.oracle_dt.unwrap_or(dt), t_end)
        }
    }

    /// One configuration per sweep value, each with the swept key replaced
    /// and the sweep section removed.
    pub fn sweep_points(&self) -> Result<Vec<RunConfig>, ConfigError> {
        let Some(sweep) = &self.sweep else { return Ok(vec![self.clone()]) };
        sweep
            .values
            .iter()
            .map(|v| {
                let mut entries = self.entries.clone();
                entries.entries.remove("sweep.key");
                entries.entries.remove("sweep.values");
                entries.set(&sweep.key, v.clone())?;
                RunConfig::from_entries(entries)
            })
            .collect()
    }
}

/// `k:a:b` triples separated by commas.
fn parse_modes(text: &str, line: Option<usize>) -> Result<Vec<FourierMode>, ConfigError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|triple| {
            let parts: Vec<&str> = triple.split(':').map(str::trim).collect();
            let bad = || ConfigError::at(line, format!("initial.modes: expected `k:a:b`, found `{triple}`"));
            if parts.len() != 3 {
                return Err(bad());
            }
            Ok(FourierMode {
                k: parts[0].parse().map_err(|_| bad())?,
                a_cos: parts[1].parse().map_err(|_| bad())?,
                b_sin: parts[2].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}
