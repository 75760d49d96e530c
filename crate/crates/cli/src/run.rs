//! Running experiments and sweeps and writing their results.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use psbr::analysis::{
    classify_regime_with, detect_oscillations, fit_decay_time, physicality_audit, plateau_detect, Observable,
    OscillationMetrics, PhysicalityAudit, Plateau, RegimeReport, DEFAULT_MARGIN,
};
use psbr::liouvillian::build_generator;
use psbr::propagation::{propagate, propagate_eigen, propagate_ode, propagate_ramp, steady_state};
use psbr::rates::build_rate_table;
use psbr::{Generator, Method, RampShape, ReducedState, Trajectory};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Format, GridKind, MethodChoice, STEADY_T_END};

pub const TRAJECTORY_HEADER: &str =
    "t,pop_g1,pop_g2,pop_e1,pop_e2,coh_g_re,coh_g_im,coh_g_abs,coh_e_re,coh_e_im,coh_e_abs";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Numerical(psbr::Error),
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Numerical(_) => 2,
            RunError::Io { .. } => 3,
        }
    }
}

impl From<psbr::Error> for RunError {
    fn from(e: psbr::Error) -> Self {
        if e.is_numerical() {
            RunError::Numerical(e)
        } else {
            RunError::Config(e.to_string())
        }
    }
}

/// Result of a computation that may fail without aborting the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Ok(T),
    Error(String),
}

impl<T> Outcome<T> {
    fn from_result(r: psbr::Result<T>) -> Self {
        match r {
            Ok(v) => Outcome::Ok(v),
            Err(e) => Outcome::Error(e.to_string()),
        }
    }

    pub fn ok(&self) -> Option<&T> {
        match self {
            Outcome::Ok(v) => Some(v),
            Outcome::Error(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableReport {
    pub observable: Observable,
    pub final_value: f64,
    pub max_abs: f64,
    /// Fitted decay time of the envelope after the peak.
    pub decay_time: Outcome<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oscillation: Option<Outcome<OscillationMetrics>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateau: Option<Outcome<Option<Plateau>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadySummary {
    pub null_dimension: usize,
    pub state: Option<ReducedState>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub name: String,
    pub method: Method,
    pub regime: RegimeReport,
    pub audit: PhysicalityAudit,
    pub final_state: ReducedState,
    pub steady_state: Outcome<SteadySummary>,
    pub observables: Vec<ObservableReport>,
}

pub struct RunResult {
    pub trajectory: Trajectory,
    pub metrics: RunMetrics,
}

pub fn build(cfg: &ExperimentConfig) -> psbr::Result<Generator> {
    let rates = build_rate_table(&cfg.system)?;
    let (dg, de) = cfg.system.scaled_splittings(&rates);
    build_generator(&rates, &cfg.alignment_set()?, dg, de, cfg.generator)
}

pub fn simulate(cfg: &ExperimentConfig) -> psbr::Result<Trajectory> {
    let gen = build(cfg)?;
    let times = cfg.propagation.times()?;
    let init = cfg.initial();
    let p = &cfg.propagation;
    if p.ramp.shape != RampShape::Sudden {
        return propagate_ramp(
            &gen.rates,
            &gen.alignment,
            gen.delta_g,
            gen.delta_e,
            gen.options,
            &p.ramp,
            &init,
            &times,
            p.tolerance,
        );
    }
    match p.method {
        MethodChoice::Auto => propagate(&gen, &init, &times, p.tolerance),
        MethodChoice::Eigen => propagate_eigen(&gen, &init, &times),
        MethodChoice::Ode => propagate_ode(&gen, &init, &times, p.tolerance),
    }
}

pub fn analyse(cfg: &ExperimentConfig, traj: &Trajectory) -> RunMetrics {
    let gen = &traj.generator;
    let a = &cfg.analysis;
    let observables = a
        .observables
        .iter()
        .map(|&o| {
            let series = o.series(traj);
            ObservableReport {
                observable: o,
                final_value: *series.last().unwrap_or(&f64::NAN),
                max_abs: series.iter().fold(0.0, |m, v| m.max(v.abs())),
                decay_time: Outcome::from_result(fit_decay_time(&traj.times, &series, a.decay_floor)),
                oscillation: a
                    .oscillation_window
                    .map(|w| Outcome::from_result(detect_oscillations(traj, o, w))),
                plateau: a
                    .plateaus
                    .then(|| Outcome::from_result(plateau_detect(traj, o, None, a.plateau_min_decades))),
            }
        })
        .collect();
    RunMetrics {
        name: cfg.name.clone(),
        method: traj.method,
        regime: classify_regime_with(&gen.rates, gen.delta_g, gen.delta_e, Some(&gen.alignment), DEFAULT_MARGIN),
        audit: physicality_audit(traj),
        final_state: *traj.last().expect("trajectory is nonempty"),
        steady_state: Outcome::from_result(steady_state(gen).map(|s| SteadySummary {
            null_dimension: s.null_dimension,
            state: s.state,
        })),
        observables,
    }
}

pub fn run_point(cfg: &ExperimentConfig) -> psbr::Result<RunResult> {
    let trajectory = simulate(cfg)?;
    let metrics = analyse(cfg, &trajectory);
    Ok(RunResult { trajectory, metrics })
}

// ---------------------------------------------------------------------------
// Serialisation

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut s = String::with_capacity(64 * (traj.len() + 1));
    s.push_str(TRAJECTORY_HEADER);
    s.push('\n');
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let _ = writeln!(
            s,
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            t,
            x.pop_g1,
            x.pop_g2,
            x.pop_e1,
            x.pop_e2,
            x.coh_g_re,
            x.coh_g_im,
            x.coh_g_abs(),
            x.coh_e_re,
            x.coh_e_im,
            x.coh_e_abs()
        );
    }
    s
}

pub fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub kind: GridKind,
    pub t_start: f64,
    pub t_end: f64,
    pub n_times: usize,
}

/// Everything needed to reproduce the files next to it. Contains no clock
/// time so reruns are byte-identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub grid: GridRecord,
    pub files: Vec<String>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(command: &str, cfg: &ExperimentConfig, files: Vec<String>) -> Self {
        let p = &cfg.propagation;
        Self {
            tool: "psbr".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            grid: GridRecord {
                kind: p.grid,
                t_start: p.t_start(),
                t_end: p.t_end,
                n_times: p.n_times,
            },
            files,
            config: cfg.clone(),
        }
    }
}

/// Files are collected in memory first and written together, so that a
/// failed run leaves nothing half-written behind.
#[derive(Default)]
pub struct Bundle {
    pub files: Vec<(String, String)>,
}

impl Bundle {
    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write(&self, dir: &Path) -> Result<(), RunError> {
        for (name, contents) in &self.files {
            let path = dir.join(name);
            let io = |source| RunError::Io {
                path: path.clone(),
                source,
            };
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(io)?;
            }
            std::fs::write(&path, contents).map_err(io)?;
        }
        Ok(())
    }
}

fn finish(mut b: Bundle, command: &str, cfg: &ExperimentConfig) -> Bundle {
    let mut names = b.names();
    names.push("manifest.json".into());
    b.add("manifest.json", json(&Manifest::new(command, cfg, names)));
    b
}

// ---------------------------------------------------------------------------
// Experiments

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(RunResult, Bundle), RunError> {
    let res = run_point(cfg)?;
    let mut b = Bundle::default();
    if cfg.output.wants(Format::Csv) {
        b.add("trajectory.csv", trajectory_csv(&res.trajectory));
    }
    if cfg.output.wants(Format::Json) {
        b.add("metrics.json", json(&res.metrics));
    }
    Ok((res, finish(b, "simulate", cfg)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<RunMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
}

fn make_pool(jobs: usize) -> Result<rayon::ThreadPool, RunError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| RunError::Config(format!("cannot start {jobs} worker threads: {e}")))
}

/// One row per grid value, in grid order whatever the number of workers.
/// A failing point is recorded in its row and the sweep carries on.
pub fn run_sweep(cfg: &ExperimentConfig, jobs: usize) -> Result<(SweepTable, Bundle), RunError> {
    let sw = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| RunError::Config("config has no `sweep` section".into()))?;
    if sw.values.is_empty() {
        return Err(RunError::Config("sweep.values: grid is empty".into()));
    }
    let points: Vec<(usize, f64, Result<ExperimentConfig, String>)> = sw
        .values
        .iter()
        .enumerate()
        .map(|(k, &x)| (k, x, cfg.with_parameter(&sw.parameter, x)))
        .collect();
    let pool = make_pool(jobs)?;
    let results: Vec<(SweepRow, Option<String>)> = pool.install(|| {
        points
            .par_iter()
            .map(|(k, x, point)| {
                let res = point.as_ref().map_err(|e| e.clone()).and_then(|p| run_point(p).map_err(|e| e.to_string()));
                match res {
                    Ok(r) => (
                        SweepRow {
                            index: *k,
                            value: *x,
                            metrics: Some(r.metrics),
                            error: None,
                        },
                        Some(trajectory_csv(&r.trajectory)),
                    ),
                    Err(e) => (
                        SweepRow {
                            index: *k,
                            value: *x,
                            metrics: None,
                            error: Some(e),
                        },
                        None,
                    ),
                }
            })
            .collect()
    });

    let mut b = Bundle::default();
    let mut rows = Vec::with_capacity(results.len());
    let mut csvs = Vec::new();
    for (row, csv) in results {
        if let Some(c) = csv {
            csvs.push((format!("trajectories/point_{:03}.csv", row.index), c));
        }
        rows.push(row);
    }
    let table = SweepTable {
        parameter: sw.parameter.clone(),
        rows,
    };
    if cfg.output.wants(Format::Csv) {
        b.add("sweep.csv", sweep_csv(cfg, &table));
        for (n, c) in csvs {
            b.add(n, c);
        }
    }
    if cfg.output.wants(Format::Json) {
        b.add("sweep.json", json(&table));
    }
    Ok((table, finish(b, "sweep", cfg)))
}

pub fn sweep_csv(cfg: &ExperimentConfig, table: &SweepTable) -> String {
    let obs = &cfg.analysis.observables;
    let osc = cfg.analysis.oscillation_window.is_some();
    let mut header = vec!["index".to_string(), "value".into(), "status".into()];
    for o in obs {
        header.push(format!("{o}_final"));
        header.push(format!("{o}_max"));
        header.push(format!("{o}_decay_time"));
        if osc {
            for f in ["frequency", "amplitude", "n_extrema", "osc_decay_time"] {
                header.push(format!("{o}_{f}"));
            }
        }
    }
    for h in [
        "steady_coh_g_abs",
        "steady_coh_e_abs",
        "max_trace_drift",
        "min_population",
        "max_bound_violation",
        "message",
    ] {
        header.push(h.into());
    }
    let mut s = header.join(",");
    s.push('\n');
    for row in &table.rows {
        let mut f = vec![row.index.to_string(), num(row.value)];
        match &row.metrics {
            None => {
                f.push("error".into());
                f.resize(header.len() - 1, String::new());
                f.push(csv_field(row.error.as_deref().unwrap_or("")));
            }
            Some(m) => {
                f.push("ok".into());
                let mut notes = Vec::new();
                for r in &m.observables {
                    f.push(num(r.final_value));
                    f.push(num(r.max_abs));
                    f.push(r.decay_time.ok().map(|v| num(*v)).unwrap_or_default());
                    if osc {
                        match r.oscillation.as_ref().and_then(|o| o.ok()) {
                            Some(o) => {
                                f.push(num(o.dominant_frequency));
                                f.push(num(o.amplitude));
                                f.push(o.n_extrema.to_string());
                                f.push(num(o.decay_time));
                            }
                            None => {
                                f.extend(std::iter::repeat_n(String::new(), 4));
                                if let Some(Outcome::Error(e)) = &r.oscillation {
                                    notes.push(format!("{}: {e}", r.observable));
                                }
                            }
                        }
                    }
                }
                match m.steady_state.ok().and_then(|s| s.state) {
                    Some(st) => {
                        f.push(num(st.coh_g_abs()));
                        f.push(num(st.coh_e_abs()));
                    }
                    None => f.extend([String::new(), String::new()]),
                }
                f.push(num(m.audit.max_trace_drift));
                f.push(num(m.audit.min_population));
                f.push(num(m.audit.max_bound_violation));
                f.push(csv_field(&notes.join("; ")));
            }
        }
        s.push_str(&f.join(","));
        s.push('\n');
    }
    s
}

// ---------------------------------------------------------------------------
// Steady states

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyReport {
    pub name: String,
    pub null_dimension: usize,
    pub state: Option<ReducedState>,
    pub relative_singular_values: Vec<f64>,
    /// Propagation of the initial state to `long_run_time`.
    pub long_run_time: f64,
    pub long_run_state: ReducedState,
    /// Max-norm distance between the long-run and null-space states.
    pub long_run_difference: Option<f64>,
}

pub fn steady_report(cfg: &ExperimentConfig) -> psbr::Result<SteadyReport> {
    let gen = build(cfg)?;
    let ss = steady_state(&gen)?;
    let t_end = cfg.propagation.t_end.max(STEADY_T_END);
    let traj = propagate(&gen, &cfg.initial(), &[t_end], cfg.propagation.tolerance)?;
    let long = traj.states[0];
    Ok(SteadyReport {
        name: cfg.name.clone(),
        null_dimension: ss.null_dimension,
        state: ss.state,
        relative_singular_values: ss.relative_singular_values,
        long_run_time: t_end,
        long_run_state: long,
        long_run_difference: ss.state.map(|s| s.max_abs_diff(&long)),
    })
}

/// Steady-state report of the config, or of every sweep point if it has a
/// sweep section.
pub fn run_steady_state(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<Outcome<SteadyReport>>, RunError> {
    match &cfg.sweep {
        None => Ok(vec![Outcome::Ok(steady_report(cfg)?)]),
        Some(sw) => {
            let pool = make_pool(jobs)?;
            Ok(pool.install(|| {
                sw.values
                    .par_iter()
                    .map(|&x| match cfg.with_parameter(&sw.parameter, x) {
                        Ok(p) => Outcome::from_result(steady_report(&p)),
                        Err(e) => Outcome::Error(e),
                    })
                    .collect()
            }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn csv_layout() {
        let mut cfg = catalog::fig2();
        cfg.propagation.n_times = 5;
        let traj = simulate(&cfg).unwrap();
        let csv = trajectory_csv(&traj);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(TRAJECTORY_HEADER));
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(first.len(), 11);
        assert_eq!(first[0], 0.01);
        assert_eq!(csv.lines().count(), 6);
        // shortest round-trip representation
        for x in csv.lines().skip(1).flat_map(|l| l.split(',')) {
            let parsed: f64 = x.parse().unwrap();
            assert_eq!(format!("{parsed:?}"), x);
        }
    }

    #[test]
    fn failing_point_is_recorded() {
        let mut cfg = catalog::fig3();
        cfg.propagation.n_times = 201;
        cfg.sweep.as_mut().unwrap().values = vec![0.0, 0.5];
        // A too-short window makes the oscillation analysis fail, not the run.
        cfg.analysis.oscillation_window = Some((199.0, 200.0));
        let (table, b) = run_sweep(&cfg, 2).unwrap();
        assert_eq!(table.rows.len(), 2);
        let osc = table.rows[0].metrics.as_ref().unwrap().observables[0].oscillation.clone().unwrap();
        assert!(matches!(osc, Outcome::Error(_)));
        assert!(b.get("sweep.csv").unwrap().lines().nth(1).unwrap().contains("samples in window"));
    }

    #[test]
    fn single_point_sweep_matches_experiment() {
        let mut cfg = catalog::fig3();
        cfg.sweep.as_mut().unwrap().values = vec![0.5];
        let (table, _) = run_sweep(&cfg, 1).unwrap();
        let point = cfg.with_parameter("system.delta_e", 0.5).unwrap();
        let (res, _) = run_experiment(&point).unwrap();
        assert_eq!(table.rows[0].metrics.as_ref(), Some(&res.metrics));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(RunError::from(psbr::Error::Domain("x".into())).exit_code(), 1);
        assert_eq!(RunError::from(psbr::Error::Analysis("x".into())).exit_code(), 2);
        let io = RunError::Io {
            path: "x".into(),
            source: std::io::Error::other("x"),
        };
        assert_eq!(io.exit_code(), 3);
    }
}
