//! Stochastic-field runs: visibility against window separation, and the
//! pulsed versus suddenly switched comparison.

use std::fmt::Write as _;

use psbr::semiclassical_field::{
    expected_visibility, interference_visibility, pulsed_vs_sudden_report, EnvelopeSpec, Estimate,
    PulsedVsSuddenReport, DEFAULT_WINDOW_FRACTION,
};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Format};
use crate::run::{json, Bundle, Manifest, RunError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityRow {
    /// In units of τ_c.
    pub separation: f64,
    pub visibility: Estimate,
    pub expected: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldReport {
    pub seed: u64,
    pub visibility: Vec<VisibilityRow>,
    pub comparison: PulsedVsSuddenReport,
}

pub fn field_report(cfg: &ExperimentConfig) -> Result<FieldReport, RunError> {
    let f = cfg
        .field
        .as_ref()
        .ok_or_else(|| RunError::Config("config has no `field` section".into()))?;
    let env = EnvelopeSpec::step(1.0);
    let visibility = f
        .separations
        .iter()
        .map(|&d| {
            Ok(VisibilityRow {
                separation: d,
                visibility: interference_visibility(&env, f.tau_c, d * f.tau_c, f.n_realizations, cfg.seed)?,
                expected: expected_visibility(f.tau_c, f.tau_c * DEFAULT_WINDOW_FRACTION, d * f.tau_c),
            })
        })
        .collect::<psbr::Result<Vec<_>>>()?;
    let comparison = pulsed_vs_sudden_report(f.tau_c, &f.tau_p, f.n_realizations, cfg.seed)?;
    Ok(FieldReport {
        seed: cfg.seed,
        visibility,
        comparison,
    })
}

fn n(x: f64) -> String {
    format!("{x:?}")
}

pub fn visibility_csv(r: &FieldReport) -> String {
    let mut s = String::from("separation,visibility,stderr,expected,n_realizations\n");
    for v in &r.visibility {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            n(v.separation),
            n(v.visibility.value),
            n(v.visibility.stderr),
            n(v.expected),
            v.visibility.n_realizations
        );
    }
    s
}

pub fn pulses_csv(r: &FieldReport) -> String {
    let mut s = String::from("tau_p,ratio,coherence,stderr,expected,n_realizations\n");
    for p in &r.comparison.pulses {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            n(p.tau_p),
            n(p.ratio),
            n(p.coherence.value),
            n(p.coherence.stderr),
            n(p.expected),
            p.coherence.n_realizations
        );
    }
    s
}

pub fn steps_csv(r: &FieldReport) -> String {
    let mut s = String::from("turn_on,separation,visibility,stderr,n_realizations\n");
    for p in &r.comparison.steps {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            n(p.turn_on),
            n(p.separation),
            n(p.visibility.value),
            n(p.visibility.stderr),
            p.visibility.n_realizations
        );
    }
    s
}

pub fn run_field(cfg: &ExperimentConfig, jobs: usize) -> Result<(FieldReport, Bundle), RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| RunError::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    let report = pool.install(|| field_report(cfg))?;
    let mut b = Bundle::default();
    if cfg.output.wants(Format::Csv) {
        b.add("field_visibility.csv", visibility_csv(&report));
        b.add("field_pulses.csv", pulses_csv(&report));
        b.add("field_steps.csv", steps_csv(&report));
    }
    if cfg.output.wants(Format::Json) {
        b.add("field.json", json(&report));
    }
    let mut names = b.names();
    names.push("manifest.json".into());
    b.add("manifest.json", json(&Manifest::new("field", cfg, names)));
    Ok((report, b))
}
