//! Named parameter sets: fig2 and fig3 for the two-regime and mixed-damping
//! dynamics, figS1 to figS4 for the underdamped, overdamped, mixed and
//! non-equilibrium examples.
//!
//! Every preset uses direct rates in units of the mean spontaneous rate,
//! parallel dipoles (all p = 1) and starts from the ground-state mixture
//! ρ_g1g1 = ρ_g2g2 = 1/2.

use serde::{Deserialize, Serialize};

use crate::dipole_geometry::AlignmentSet;
use crate::liouvillian::{build_generator, Generator, GeneratorOptions, ReducedState};
use crate::rates::{build_rate_table, BathSpec, RateSet, SystemSpec};
use crate::Result;

pub const NAMES: [&str; 6] = ["fig2", "fig3", "figS1", "figS2", "figS3", "figS4"];

pub const NBAR: f64 = 0.05;
pub const UNIFORM_GAMMA: [[f64; 2]; 2] = [[1.0, 1.0], [1.0, 1.0]];
pub const SPLIT_GAMMA: [[f64; 2]; 2] = [[1.5, 1.5], [0.5, 0.5]];

/// Ratio n̄_g2 / n̄_g1 used by the figS4 preset when nothing else is asked for.
pub const FIG_S4_DEFAULT_RATIO: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub system: SystemSpec,
    pub alignment: AlignmentSet,
    /// Parameter choices made for this preset.
    pub comment: String,
}

impl Preset {
    pub fn rates(&self) -> Result<RateSet> {
        build_rate_table(&self.system)
    }

    pub fn generator(&self) -> Result<Generator> {
        let rates = self.rates()?;
        let (dg, de) = self.system.scaled_splittings(&rates);
        build_generator(&rates, &self.alignment, dg, de, GeneratorOptions::default())
    }

    pub fn initial_state(&self) -> ReducedState {
        ReducedState::ground_mixture()
    }
}

fn preset(name: &str, gamma: [[f64; 2]; 2], bath: BathSpec, dg: f64, de: f64, comment: &str) -> Preset {
    Preset {
        name: name.to_string(),
        system: SystemSpec::direct(gamma, bath, dg, de),
        alignment: AlignmentSet::uniform(1.0),
        comment: comment.to_string(),
    }
}

/// Coherence examples in both regimes at once: the splitting 0.5γ is above
/// the ground-state width r = 0.1γ and below the excited width ≈ 2.1γ.
pub fn fig2() -> Preset {
    preset(
        "fig2",
        UNIFORM_GAMMA,
        BathSpec::single(NBAR),
        0.5,
        0.5,
        "splittings chosen: 0.5 puts the ground manifold underdamped and the excited manifold overdamped",
    )
}

/// Mixed damping with Δ_e = 0; the fig3 sweep varies Δ_e.
pub fn fig3() -> Preset {
    preset(
        "fig3",
        SPLIT_GAMMA,
        BathSpec::single(NBAR),
        0.3,
        0.0,
        "base trace delta_e = 0; the sweep runs delta_e up to 2",
    )
}

pub fn fig_s1() -> Preset {
    preset("figS1", UNIFORM_GAMMA, BathSpec::single(NBAR), 10.0, 10.0, "")
}

pub fn fig_s2() -> Preset {
    preset("figS2", UNIFORM_GAMMA, BathSpec::single(NBAR), 0.01, 0.01, "")
}

pub fn fig_s3() -> Preset {
    preset("figS3", SPLIT_GAMMA, BathSpec::single(NBAR), 0.3, 0.1, "")
}

/// Non-equilibrium variant with n̄_g2 = ratio · n̄_g1.
pub fn fig_s4_with_ratio(ratio: f64) -> Preset {
    preset(
        "figS4",
        SPLIT_GAMMA,
        BathSpec::per_ground_state(NBAR, NBAR * ratio),
        0.3,
        0.1,
        "mixed-damping rates; nbar_g2 / nbar_g1 = 0.5 by default, the sweep scans this ratio",
    )
}

pub fn fig_s4() -> Preset {
    fig_s4_with_ratio(FIG_S4_DEFAULT_RATIO)
}

pub fn by_name(name: &str) -> Option<Preset> {
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

pub fn all() -> Vec<Preset> {
    NAMES.iter().filter_map(|n| by_name(n)).collect()
}
