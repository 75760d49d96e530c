//! The presets as complete experiment configurations.

use psbr::analysis::Observable;
use psbr::presets::{self, Preset, NBAR};

use crate::config::{
    AnalysisConfig, ExperimentConfig, GridKind, OutputConfig, PropagationConfig, SweepConfig, STEADY_T_END,
};

pub use psbr::presets::NAMES;

/// Excited splittings of the fig3 sweep.
pub const FIG3_DELTA_E: [f64; 5] = [0.0, 0.1, 0.5, 1.0, 2.0];
/// n̄_g2 / n̄_g1 values of the figS4 sweep, in order of growing mismatch.
pub const FIG_S4_RATIOS: [f64; 4] = [0.9, 0.8, 0.65, 0.5];

fn base(p: Preset, grid_note: &str) -> ExperimentConfig {
    let comment = match (p.comment.is_empty(), grid_note.is_empty()) {
        (true, _) => grid_note.to_string(),
        (false, true) => p.comment,
        (false, false) => format!("{}; {grid_note}", p.comment),
    };
    ExperimentConfig {
        name: p.name,
        comment,
        system: p.system,
        alignment: Some(p.alignment),
        dipoles: None,
        generator: Default::default(),
        initial_state: None,
        propagation: PropagationConfig::default(),
        analysis: AnalysisConfig::default(),
        sweep: None,
        field: None,
        output: OutputConfig::default(),
        seed: 0,
    }
}

const LOG_NOTE: &str = "time grid: 601 log-spaced times from 0.01 to 1e4";

pub fn fig2() -> ExperimentConfig {
    let mut c = base(presets::fig2(), LOG_NOTE);
    c.analysis.observables = vec![
        Observable::CohGRe,
        Observable::CohGIm,
        Observable::CohGAbs,
        Observable::CohERe,
        Observable::CohEIm,
        Observable::CohEAbs,
    ];
    c
}

pub fn fig3() -> ExperimentConfig {
    let mut c = base(
        presets::fig3(),
        "time grid: 2001 linear times up to 200, oscillations measured on [5, 200]",
    );
    c.propagation.grid = GridKind::Linear;
    c.propagation.t_end = 200.0;
    c.propagation.n_times = 2001;
    c.analysis.observables = vec![Observable::PopG1, Observable::PopG2, Observable::CohGAbs, Observable::CohEAbs];
    c.analysis.oscillation_window = Some((5.0, 200.0));
    c.analysis.plateaus = false;
    c.sweep = Some(SweepConfig {
        parameter: "system.delta_e".into(),
        values: FIG3_DELTA_E.to_vec(),
    });
    c
}

pub fn fig_s1() -> ExperimentConfig {
    base(presets::fig_s1(), LOG_NOTE)
}

pub fn fig_s2() -> ExperimentConfig {
    let mut c = base(
        presets::fig_s2(),
        "time grid: 801 log-spaced times from 0.01 to 1e6, so the plateau and the decay after it are both on the grid",
    );
    c.propagation.t_end = STEADY_T_END;
    c.propagation.n_times = 801;
    c
}

pub fn fig_s3() -> ExperimentConfig {
    base(presets::fig_s3(), LOG_NOTE)
}

pub fn fig_s4() -> ExperimentConfig {
    let mut c = base(
        presets::fig_s4(),
        "grid runs to 1e6 to check the steady state; the sweep varies nbar_g2 at fixed nbar_g1",
    );
    c.propagation.t_end = STEADY_T_END;
    c.analysis.observables = vec![Observable::CohGAbs, Observable::CohEAbs];
    c.sweep = Some(SweepConfig {
        parameter: "system.bath.occupation[1]".into(),
        values: FIG_S4_RATIOS.iter().map(|r| NBAR * r).collect(),
    });
    c
}

pub fn by_name(name: &str) -> Option<ExperimentConfig> {
    match name {
        "fig2" => Some(fig2()),
        "fig3" => Some(fig3()),
        "figS1" => Some(fig_s1()),
        "figS2" => Some(fig_s2()),
        "figS3" => Some(fig_s3()),
        "figS4" => Some(fig_s4()),
        _ => None,
    }
}

pub fn all() -> Vec<ExperimentConfig> {
    NAMES.iter().filter_map(|n| by_name(n)).collect()
}
