//! Partial-secular Bloch-Redfield (PSBR) dynamics of a four-level system
//! (two ground states, two excited states) driven by incoherent radiation.
//!
//! Modules, bottom-up: [`dipole_geometry`] turns transition dipoles into
//! alignment parameters and checks arbitrary sets for orthogonality;
//! [`rates`] builds emission and pumping rates from one bath or one bath per
//! ground state; [`liouvillian`] assembles the real 8×8 generator on
//! [`ReducedState`], plus the secular 4×4 rate matrix. [`propagation`] has
//! eigen and ODE propagation, null-space steady states and turn-on ramps,
//! [`analysis`] the regime, oscillation, plateau and physicality measures.
//! [`semiclassical_field`] is separate: ensembles of stochastic-phase fields
//! and their interference visibility.
//!
//! Units: ħ = k_B = 1, rates in multiples of the mean spontaneous rate γ and
//! times in 1/γ.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dipole_geometry;
mod error;
mod linalg;
pub mod liouvillian;
mod ode;
pub mod presets;
pub mod propagation;
pub mod rates;
pub mod semiclassical_field;

pub use error::{Error, Result};
pub use liouvillian::{Generator, GeneratorOptions, ReducedState};
pub use propagation::{Method, RampProfile, RampShape, SteadyState, Trajectory};
pub use rates::{BathSpec, Occupation, RateInput, RateSet, SystemSpec};
pub use dipole_geometry::{AlignmentSet, DipoleVector, UbiquityReport};
