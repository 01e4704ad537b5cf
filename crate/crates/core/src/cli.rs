//! Command-line front end. `run` returns the process exit code:
//! 0 success, 1 invalid configuration or arguments, 2 run failure,
//! 3 validation failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigEntries, ConfigError, RunConfig};
use crate::integrator::{self, IntegratorConfig, SimulationRecord};
use crate::lagrangian::{self, LagrangianState};
use crate::oracle::{self, Comparison};
use crate::output::{self, Metadata};
use crate::reconstruction;
use crate::scenarios;
use crate::validate::{self, ValidateOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUN: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rho-sphere", version, about = "Periodic Camassa-Holm solver through wave breaking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve one configuration and write series, snapshots, events and metadata.
    Simulate(Common),
    /// Run the identity suite on pseudorandom states.
    Validate(ValidateArgs),
    /// Compare the reconstructed velocity against the Eulerian oracle.
    Compare(CompareArgs),
    /// Run every point of the configured sweep.
    Sweep(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "rho-sphere-out")]
    out: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Concurrent sweep points.
    #[arg(long, env = "RHO_SPHERE_WORKERS")]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 100)]
    states: usize,
    /// Negate H inside the suite to check that it notices.
    #[arg(long, hide = true)]
    flip_h_sign: bool,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated comparison times; overrides `compare.times`.
    #[arg(long)]
    times: Option<String>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(c) => load(&c, &[]).and_then(|cfg| cmd_simulate(&cfg, &c.out, out)),
        Command::Validate(v) => cmd_validate(&v, out, err),
        Command::Compare(c) => {
            let extra = c.times.as_deref().map(|t| [("compare.times", t)]);
            load(&c.common, extra.as_ref().map_or(&[][..], |e| &e[..]))
                .and_then(|cfg| cmd_compare(&cfg, &c.common.out, out))
        }
        Command::Sweep(c) => load(&c, &[]).and_then(|cfg| cmd_sweep(&cfg, &c.out, workers(c.workers), out)),
    };
    match result {
        Ok(code) => code,
        Err(Failure { code, message }) => {
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure { code: EXIT_CONFIG, message: e.to_string() }
    }
}

fn config_failure(e: crate::Error) -> Failure {
    Failure { code: EXIT_CONFIG, message: e.to_string() }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure { code: EXIT_RUN, message: format!("{}: {e}", path.display()) }
}

fn workers(flag: Option<usize>) -> usize {
    flag.filter(|w| *w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Reads the config file, then applies command-line overrides on top.
fn load(c: &Common, extra: &[(&str, &str)]) -> Result<RunConfig, Failure> {
    let mut entries = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure { code: EXIT_CONFIG, message: format!("{}: {e}", path.display()) })?;
            ConfigEntries::parse(&text).map_err(|e| Failure {
                code: EXIT_CONFIG,
                message: format!("{}: {e}", path.display()),
            })?
        }
        None => ConfigEntries::default(),
    };
    let overrides = [
        ("grid.n", c.n.map(|v| v.to_string())),
        ("integrator.dt", c.dt.map(|v| format!("{v:?}"))),
        ("integrator.t_end", c.t_end.map(|v| format!("{v:?}"))),
        ("seed", c.seed.map(|v| v.to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            entries.set(key, v)?;
        }
    }
    for (key, value) in extra {
        entries.set(key, *value)?;
    }
    RunConfig::from_entries(entries).map_err(|e| {
        let message = match &c.config {
            Some(path) if e.line.is_some() => format!("{}: {e}", path.display()),
            _ => e.to_string(),
        };
        Failure { code: EXIT_CONFIG, message }
    })
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| io_failure(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    output::write(path, contents).map_err(|e| io_failure(path, e))
}

/// Shared setup: initial state, resolved integrator settings and the
/// metadata describing both.
struct Prepared {
    state: LagrangianState,
    mu: f64,
    cfg: IntegratorConfig,
    metadata: Metadata,
}

fn prepare(run: &RunConfig) -> Result<Prepared, Failure> {
    let (data, state) = scenarios::initial_state(&run.initial).map_err(config_failure)?;
    let energy = lagrangian::energy(&state, data.mu);
    let cfg = run.integrator.resolve(run.initial.n, energy).map_err(config_failure)?;
    let mut metadata = Metadata::new();
    metadata.push_config(&run.entries.to_text());
    metadata.push("n", run.initial.n);
    metadata.push_f64("dt", cfg.dt);
    metadata.push(
        "dt_source",
        if run.integrator.dt.is_some() { "config" } else { "heuristic 0.5 / (n max(1, sqrt(E0)))" },
    );
    metadata.push("steps", cfg.step_count());
    metadata.push_f64("mu", data.mu);
    metadata.push_f64("energy0", energy);
    metadata.push("seed", run.seed);
    Ok(Prepared { state, mu: data.mu, cfg, metadata })
}

/// Largest snapshot stride landing on every requested time.
fn stride_for(times: &[f64], dt: f64) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    let mut g = 0;
    for t in times {
        let r = t / dt;
        if (r - r.round()).abs() > 1e-9 * r.max(1.0) {
            return 1;
        }
        g = gcd(g, r.round() as usize);
    }
    g.max(1)
}

/// Largest valid `|u_x| = |2 rho_t / rho|` over the stored snapshots.
fn max_slope(record: &SimulationRecord, flat_eps: f64) -> f64 {
    record
        .snapshots
        .iter()
        .map(|s| {
            let threshold = flat_eps * s.jacobian().max();
            s.rho
                .values()
                .iter()
                .zip(s.rho_t.values())
                .filter(|(r, _)| *r * *r >= threshold)
                .fold(0.0, |m: f64, (r, rt)| m.max((2.0 * rt / r).abs()))
        })
        .fold(0.0, f64::max)
}

struct Summary {
    code: i32,
    breaking_time: Option<f64>,
    drift: f64,
    max_slope: f64,
}

fn simulate_into(run: &RunConfig, dir: &Path) -> Result<Summary, Failure> {
    let Prepared { state, mu, cfg, mut metadata } = prepare(run)?;
    create_dir(dir)?;
    let (record, failure) = match integrator::evolve(&state, mu, &cfg) {
        Ok(r) => (r, None),
        Err(e) => (*e.record, Some(e.error)),
    };
    write_file(&dir.join("series.csv"), &output::series_csv(&record))?;
    write_file(&dir.join("events.csv"), &output::events_csv(&record))?;
    let snaps = dir.join("snapshots");
    create_dir(&snaps)?;
    for (i, s) in record.snapshots.iter().enumerate() {
        write_file(&snaps.join(format!("snapshot_{i:05}.csv")), &output::snapshot_csv(s, mu, run.output.flat_eps))?;
        let field = reconstruction::eulerian_velocity(s, mu, run.output.m, run.output.flat_eps).map_err(config_failure)?;
        write_file(&snaps.join(format!("eulerian_{i:05}.csv")), &output::eulerian_csv(&field))?;
    }
    let drift = record.max_relative_energy_drift();
    let breaking_time = record.first_sign_change().map(|e| e.time);
    metadata.push("snapshots", record.snapshots.len());
    metadata.push_f64("t_final", record.final_state().t);
    metadata.push_f64("max_relative_energy_drift", drift);
    metadata.push("events", record.events.len());
    match breaking_time {
        Some(t) => metadata.push_f64("first_sign_change", t),
        None => metadata.push("first_sign_change", "none"),
    }
    metadata.push(
        "status",
        match &failure {
            None => "ok".to_string(),
            Some(e) => format!("failed: {e}"),
        },
    );
    write_file(&dir.join("metadata.txt"), &metadata.render())?;
    Ok(Summary {
        code: if failure.is_some() { EXIT_RUN } else { EXIT_OK },
        breaking_time,
        drift,
        max_slope: max_slope(&record, run.output.flat_eps),
    })
}

fn cmd_simulate(run: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let s = simulate_into(run, dir)?;
    let _ = writeln!(
        out,
        "simulate: status {}, max relative energy drift {:e}, first sign change {}",
        if s.code == EXIT_OK { "ok" } else { "step failure" },
        s.drift,
        s.breaking_time.map_or("none".to_string(), |t| format!("{t:.6}"))
    );
    if s.code != EXIT_OK {
        return Err(Failure {
            code: s.code,
            message: format!("integration failed; last good state written to {}", dir.display()),
        });
    }
    Ok(EXIT_OK)
}

fn cmd_validate(v: &ValidateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let run = match &v.common.config {
        Some(_) => Some(load(&v.common, &[])?),
        None => None,
    };
    let n = v.common.n.unwrap_or(128);
    let seed = v.common.seed.or(run.map(|r| r.seed)).unwrap_or(0);
    let options = ValidateOptions { states: v.states, flip_h_sign: v.flip_h_sign, ..ValidateOptions::new(n, seed) };
    let report = validate::run_validation(&options).map_err(config_failure)?;
    let _ = write!(out, "{}", report.table());
    if report.passed() {
        return Ok(EXIT_OK);
    }
    for c in report.failures() {
        let _ = writeln!(err, "FAIL {}: defect {:e} exceeds {:e}", c.name, c.max_defect, c.tolerance);
    }
    Ok(EXIT_VALIDATION)
}

fn cmd_compare(run: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let Prepared { state, mu, mut cfg, mut metadata } = prepare(run)?;
    let mut times = run.compare_times.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let t_max = *times.last().ok_or_else(|| Failure { code: EXIT_CONFIG, message: "no comparison times".into() })?;
    cfg.t_end = t_max;
    cfg.snapshot_stride = stride_for(&times, cfg.dt);

    let (data, _) = scenarios::initial_state(&run.initial).map_err(config_failure)?;
    let mut ocfg = run.oracle_config(cfg.dt, t_max);
    ocfg.store_stride = stride_for(&times, ocfg.dt);
    let traj = oracle::eulerian_evolve(&data.u0, &ocfg).map_err(config_failure)?;
    let record = integrator::evolve(&state, mu, &cfg)
        .map_err(|e| Failure { code: EXIT_RUN, message: format!("Lagrangian run failed: {}", e.error) })?;

    let end = traj.end_time();
    let mut rows: Vec<Comparison> = Vec::new();
    let mut skipped = Vec::new();
    for &t in &times {
        if t > end + 1e-12 * end.max(1.0) {
            skipped.push(t);
            continue;
        }
        rows.push(oracle::compare(&record, mu, &traj, t, run.output.m).map_err(config_failure)?);
    }
    create_dir(dir)?;
    write_file(&dir.join("compare.csv"), &output::compare_csv(&rows))?;
    let mut report = output::blowup_text(traj.blowup.as_ref(), traj.slope_bound);
    let list: Vec<String> = skipped.iter().map(|t| format!("{t:?}")).collect();
    report.push_str(&format!("past_blowup = {}\n", if list.is_empty() { "none".into() } else { list.join(",") }));
    write_file(&dir.join("blowup.txt"), &report)?;
    metadata.push_f64("oracle_dt", ocfg.dt);
    write_file(&dir.join("metadata.txt"), &metadata.render())?;

    for r in &rows {
        let _ = writeln!(out, "t = {:<10} l2 = {:.3e}  linf = {:.3e}", r.t, r.l2, r.linf);
    }
    let _ = write!(out, "{report}");
    if let Some(b) = &traj.blowup {
        if b.detected < times[0] {
            return Err(Failure {
                code: EXIT_RUN,
                message: format!("oracle blew up at t = {:.6} before the first requested time", b.time()),
            });
        }
    }
    Ok(EXIT_OK)
}

fn cmd_sweep(run: &RunConfig, dir: &Path, workers: usize, out: &mut dyn Write) -> Result<i32, Failure> {
    let points = run.sweep_points()?;
    let key = run.sweep.as_ref().map_or("none", |s| s.key.as_str());
    let values: Vec<String> = match &run.sweep {
        Some(s) => s.values.clone(),
        None => vec!["base".into()],
    };
    create_dir(dir)?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Summary, String>>>> = Mutex::new((0..points.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.min(points.len()).max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= points.len() {
                    break;
                }
                let r = simulate_into(&points[i], &dir.join(format!("point_{i:03}"))).map_err(|f| f.message);
                results.lock().expect("no panics while holding the lock")[i] = Some(r);
            });
        }
    });

    let mut csv = String::from("index,key,value,status,breaking_time,energy_drift,max_slope\n");
    let mut succeeded = 0;
    for (i, r) in results.into_inner().expect("workers joined").into_iter().enumerate() {
        let (status, bt, drift, slope) = match r.expect("every point ran") {
            Ok(s) => {
                if s.code == EXIT_OK {
                    succeeded += 1;
                }
                (
                    if s.code == EXIT_OK { "ok".to_string() } else { "step_failure".to_string() },
                    s.breaking_time.map_or("none".into(), |t| format!("{t:?}")),
                    format!("{:?}", s.drift),
                    format!("{:?}", s.max_slope),
                )
            }
            Err(m) => (format!("error: {}", m.replace(',', ";")), "none".into(), "nan".into(), "nan".into()),
        };
        csv.push_str(&format!("{i},{key},{},{status},{bt},{drift},{slope}\n", values[i]));
    }
    write_file(&dir.join("summary.csv"), &csv)?;
    let _ = writeln!(out, "sweep: {succeeded} of {} points succeeded", points.len());
    Ok(if succeeded > 0 { EXIT_OK } else { EXIT_RUN })
}
