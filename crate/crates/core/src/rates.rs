//! Spontaneous-emission and incoherent-pumping rates of the four-level system.
//!
//! Natural units are used: ħ = k_B = 1 and 3πε₀c³ = 1, so that
//! γ = ω³|μ|² and n̄ = 1/(e^{ω/T} − 1). Rates are indexed `[i][j]` for the
//! transition g_i ↔ e_j (zero based). The occupation applied to a transition
//! is that of the bath attached to its ground state; within one bath the
//! occupation is flat across the four transition frequencies.

use serde::{Deserialize, Serialize};

use crate::dipole_geometry::{alignment_set_4ls, AlignmentSet, DipoleVector};
use crate::{Error, Result};

/// Minimum Δ₀/Δ below which [`SystemSpec::validate`] warns that the manifolds
/// are not well separated.
pub const GAP_RATIO_WARNING: f64 = 100.0;

/// Mean occupation of a bosonic mode of angular frequency `omega` at
/// temperature `temperature`.
pub fn mean_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Domain(format!("frequency must be > 0, got {omega}")));
    }
    if !(temperature > 0.0) {
        return Err(Error::Domain(format!(
            "temperature must be > 0, got {temperature}"
        )));
    }
    Ok(1.0 / (omega / temperature).exp_m1())
}

/// Spontaneous emission rate ω³|μ|² of a transition.
pub fn spontaneous_rate(omega: f64, mu_norm: f64) -> Result<f64> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Domain(format!("frequency must be > 0, got {omega}")));
    }
    if !(mu_norm >= 0.0) {
        return Err(Error::Domain(format!(
            "dipole magnitude must be ≥ 0, got {mu_norm}"
        )));
    }
    Ok(omega.powi(3) * mu_norm * mu_norm)
}

/// A bath occupation, given directly or through a temperature.
///
/// `frequency` defaults to the manifold gap Δ₀ when omitted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Occupation {
    Nbar(f64),
    Thermal {
        temperature: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        frequency: Option<f64>,
    },
}

impl Occupation {
    pub fn resolve(&self, default_frequency: Option<f64>) -> Result<f64> {
        match *self {
            Occupation::Nbar(n) if n >= 0.0 && n.is_finite() => Ok(n),
            Occupation::Nbar(n) => Err(Error::Domain(format!("n̄ must be ≥ 0, got {n}"))),
            Occupation::Thermal {
                temperature,
                frequency,
            } => {
                let omega = frequency.or(default_frequency).ok_or_else(|| {
                    Error::Config(
                        "thermal occupation needs a frequency (or delta_0 in the system)".into(),
                    )
                })?;
                mean_occupation(omega, temperature)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BathSpec {
    /// One bath for all four transitions.
    Single { occupation: Occupation },
    /// One bath per ground state; transitions g_i ↔ e_j use bath i.
    PerGroundState { occupation: Vec<Occupation> },
}

impl BathSpec {
    pub fn single(nbar: f64) -> Self {
        BathSpec::Single {
            occupation: Occupation::Nbar(nbar),
        }
    }

    pub fn per_ground_state(nbar_g1: f64, nbar_g2: f64) -> Self {
        BathSpec::PerGroundState {
            occupation: vec![Occupation::Nbar(nbar_g1), Occupation::Nbar(nbar_g2)],
        }
    }

    /// Occupation seen by transitions leaving g1 and g2.
    pub fn ground_occupations(&self, default_frequency: Option<f64>) -> Result<[f64; 2]> {
        match self {
            BathSpec::Single { occupation } => {
                let n = occupation.resolve(default_frequency)?;
                Ok([n, n])
            }
            BathSpec::PerGroundState { occupation } => {
                if occupation.len() != 2 {
                    return Err(Error::Config(format!(
                        "per-ground-state bath needs 2 occupations, got {}",
                        occupation.len()
                    )));
                }
                Ok([
                    occupation[0].resolve(default_frequency)?,
                    occupation[1].resolve(default_frequency)?,
                ])
            }
        }
    }
}

/// How the spontaneous rates are specified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RateInput {
    /// `gamma[i][j]` for g_i ↔ e_j, already in units of the mean rate.
    DirectRates { gamma: [[f64; 2]; 2] },
    /// Rates from dipoles (order g1e1, g1e2, g2e1, g2e2) and transition
    /// frequencies Δ₀ + jΔ_e − iΔ_g.
    Physical { dipoles: [DipoleVector; 4] },
}

/// Physical definition of the four-level system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    /// Gap between g1 and e1. Required in physical mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_0: Option<f64>,
    pub delta_g: f64,
    pub delta_e: f64,
    /// Flattened, so `mode` and `gamma`/`dipoles` sit next to the splittings.
    #[serde(flatten)]
    pub rates: RateInput,
    pub bath: BathSpec,
}

/// A validation problem tied to a field of [`SystemSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct FieldIssue {
    pub field: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Validation {
    pub errors: Vec<FieldIssue>,
    pub warnings: Vec<FieldIssue>,
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    fn error(&mut self, field: &str, message: impl Into<String>) {
        self.errors.push(FieldIssue {
            field: field.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, field: &str, message: impl Into<String>) {
        self.warnings.push(FieldIssue {
            field: field.into(),
            message: message.into(),
        });
    }
}

impl SystemSpec {
    /// Uniform-rate direct specification, the starting point of most presets.
    pub fn direct(gamma: [[f64; 2]; 2], bath: BathSpec, delta_g: f64, delta_e: f64) -> Self {
        Self {
            delta_0: None,
            delta_g,
            delta_e,
            rates: RateInput::DirectRates { gamma },
            bath,
        }
    }

    /// Collects every problem at once instead of stopping at the first.
    pub fn validate(&self) -> Validation {
        let mut v = Validation::default();
        for (name, value) in [("delta_g", self.delta_g), ("delta_e", self.delta_e)] {
            if !(value >= 0.0 && value.is_finite()) {
                v.error(name, format!("splitting must be ≥ 0, got {value}"));
            }
        }
        if let Some(d0) = self.delta_0 {
            if !(d0 > 0.0 && d0.is_finite()) {
                v.error("delta_0", format!("manifold gap must be > 0, got {d0}"));
            } else {
                let widest = self.delta_g.max(self.delta_e);
                if widest > 0.0 && d0 / widest < GAP_RATIO_WARNING {
                    v.warn(
                        "delta_0",
                        format!(
                            "delta_0 / max(delta_g, delta_e) = {:.3} is below {GAP_RATIO_WARNING}",
                            d0 / widest
                        ),
                    );
                }
            }
        }
        match &self.rates {
            RateInput::DirectRates { gamma } => {
                if gamma.iter().flatten().any(|g| !(*g >= 0.0 && g.is_finite())) {
                    v.error("gamma", "spontaneous rates must be finite and ≥ 0");
                }
                if gamma.iter().flatten().all(|g| *g == 0.0) {
                    v.error("gamma", "at least one spontaneous rate must be > 0");
                }
            }
            RateInput::Physical { dipoles } => {
                match self.delta_0 {
                    None => v.error("delta_0", "physical mode requires delta_0"),
                    Some(d0) => {
                        if d0 - self.delta_g <= 0.0 {
                            v.error("delta_0", "transition g2 → e1 has non-positive frequency");
                        }
                    }
                }
                let forbidden: Vec<_> = dipoles
                    .iter()
                    .filter(|d| d.is_forbidden())
                    .map(|d| d.label.as_str())
                    .collect();
                if !forbidden.is_empty() {
                    v.error(
                        "dipoles",
                        format!("zero-norm dipoles: {}", forbidden.join(", ")),
                    );
                }
            }
        }
        match &self.bath {
            BathSpec::Single { occupation } => check_occupation(&mut v, "bath.occupation", occupation),
            BathSpec::PerGroundState { occupation } => {
                if occupation.len() != 2 {
                    v.error(
                        "bath.occupation",
                        format!("expected 2 occupations, got {}", occupation.len()),
                    );
                }
                for (k, occ) in occupation.iter().enumerate() {
                    check_occupation(&mut v, &format!("bath.occupation[{k}]"), occ);
                }
            }
        }
        v
    }

    /// Alignment parameters implied by the dipoles, in physical mode.
    pub fn dipole_alignments(&self) -> Option<Result<AlignmentSet>> {
        match &self.rates {
            RateInput::Physical { dipoles: [a, b, c, d] } => Some(alignment_set_4ls(a, b, c, d)),
            RateInput::DirectRates { .. } => None,
        }
    }

    /// Splittings in the unit of the rate table, i.e. divided by
    /// [`RateSet::gamma_unit`].
    pub fn scaled_splittings(&self, rates: &RateSet) -> (f64, f64) {
        (self.delta_g / rates.gamma_unit, self.delta_e / rates.gamma_unit)
    }
}

fn check_occupation(v: &mut Validation, field: &str, occ: &Occupation) {
    match *occ {
        Occupation::Nbar(n) => {
            if !(n >= 0.0 && n.is_finite()) {
                v.error(field, format!("n̄ must be ≥ 0, got {n}"));
            }
        }
        Occupation::Thermal {
            temperature,
            frequency,
        } => {
            if !(temperature > 0.0) {
                v.error(field, format!("temperature must be > 0, got {temperature}"));
            }
            if let Some(f) = frequency {
                if !(f > 0.0) {
                    v.error(field, format!("frequency must be > 0, got {f}"));
                }
            }
        }
    }
}

/// Spontaneous rates, pumping rates and effective occupations per transition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    pub gamma: [[f64; 2]; 2],
    pub r: [[f64; 2]; 2],
    pub nbar_eff: [[f64; 2]; 2],
    pub gamma_mean: f64,
    /// Size of one rate unit in the input unit system: 1 for direct rates,
    /// the absolute mean spontaneous rate in physical mode.
    pub gamma_unit: f64,
}

impl RateSet {
    /// Rates from spontaneous rates and the occupation of each ground state's
    /// bath.
    pub fn from_gamma(gamma: [[f64; 2]; 2], nbar_ground: [f64; 2]) -> Result<Self> {
        if gamma.iter().flatten().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(Error::InvalidRates(format!(
                "spontaneous rates must be finite and ≥ 0: {gamma:?}"
            )));
        }
        if nbar_ground.iter().any(|n| !(*n >= 0.0 && n.is_finite())) {
            return Err(Error::InvalidRates(format!(
                "occupations must be finite and ≥ 0: {nbar_ground:?}"
            )));
        }
        let nbar_eff = [[nbar_ground[0]; 2], [nbar_ground[1]; 2]];
        let r = std::array::from_fn(|i| std::array::from_fn(|j| gamma[i][j] * nbar_eff[i][j]));
        Ok(Self {
            gamma,
            r,
            nbar_eff,
            gamma_mean: gamma.iter().flatten().sum::<f64>() / 4.0,
            gamma_unit: 1.0,
        })
    }

    pub fn uniform(gamma: f64, nbar: f64) -> Result<Self> {
        Self::from_gamma([[gamma; 2]; 2], [nbar; 2])
    }

    /// Total emission rate γ(1 + n̄) of transition g_i ↔ e_j.
    pub fn emission(&self, i: usize, j: usize) -> f64 {
        self.gamma[i][j] * (1.0 + self.nbar_eff[i][j])
    }

    /// Copy with every occupation multiplied by `s`, keeping the spontaneous
    /// rates. Used for intensity ramps.
    pub fn with_intensity(&self, s: f64) -> Self {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.nbar_eff[i][j] = self.nbar_eff[i][j] * s;
                out.r[i][j] = self.gamma[i][j] * out.nbar_eff[i][j];
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let all = self
            .gamma
            .iter()
            .chain(self.r.iter())
            .chain(self.nbar_eff.iter())
            .flatten();
        for x in all {
            if !(*x >= 0.0 && x.is_finite()) {
                return Err(Error::InvalidRates(format!(
                    "rates and occupations must be finite and ≥ 0, found {x}"
                )));
            }
        }
        Ok(())
    }
}

/// Builds the rate table of a validated system.
///
/// In physical mode the spontaneous rates come from ω³|μ|² and are rescaled so
/// that their mean is 1; the scale is kept in [`RateSet::gamma_unit`].
pub fn build_rate_table(spec: &SystemSpec) -> Result<RateSet> {
    let nbar = spec.bath.ground_occupations(spec.delta_0)?;
    match &spec.rates {
        RateInput::DirectRates { gamma } => RateSet::from_gamma(*gamma, nbar),
        RateInput::Physical { dipoles } => {
            let d0 = spec
                .delta_0
                .ok_or_else(|| Error::Config("physical mode requires delta_0".into()))?;
            let forbidden: Vec<String> = dipoles
                .iter()
                .filter(|d| d.is_forbidden())
                .map(|d| d.label.clone())
                .collect();
            if !forbidden.is_empty() {
                return Err(Error::ZeroDipole(forbidden));
            }
            let mut gamma = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    let omega = d0 + j as f64 * spec.delta_e - i as f64 * spec.delta_g;
                    gamma[i][j] = spontaneous_rate(omega, dipoles[2 * i + j].norm())?;
                }
            }
            let unit = gamma.iter().flatten().sum::<f64>() / 4.0;
            let scaled = gamma.map(|row| row.map(|g| g / unit));
            let mut set = RateSet::from_gamma(scaled, nbar)?;
            set.gamma_unit = unit;
            Ok(set)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    #[test]
    fn occupation_examples() {
        assert_relative_eq!(mean_occupation(2f64.ln(), 1.0).unwrap(), 1.0, epsilon = 1e-14);
        assert!(mean_occupation(800.0, 1.0).unwrap() < 1e-300);
        // n̄ = 0.05 ⇔ ω/T = ln 21.
        assert_relative_eq!(21f64.ln(), 3.044522437723423, epsilon = 1e-15);
        assert_relative_eq!(mean_occupation(21f64.ln(), 1.0).unwrap(), 0.05, epsilon = 1e-13);
    }

    #[test]
    fn occupation_errors() {
        assert!(matches!(mean_occupation(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(mean_occupation(1.0, -2.0), Err(Error::Domain(_))));
        assert!(matches!(mean_occupation(0.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn occupation_monotonicity() {
        let mut last = 0.0;
        for k in 1..50 {
            let n = mean_occupation(1.0, 0.1 * k as f64).unwrap();
            assert!(n > last);
            last = n;
        }
        assert!(mean_occupation(2.0, 1.0).unwrap() < mean_occupation(1.0, 1.0).unwrap());
    }

    #[test]
    fn spontaneous_rate_examples() {
        assert_eq!(spontaneous_rate(3.0, 0.0).unwrap(), 0.0);
        assert_eq!(spontaneous_rate(1.0, 1.0).unwrap(), 1.0);
        let a = spontaneous_rate(1.7, 0.3).unwrap();
        assert_relative_eq!(spontaneous_rate(3.4, 0.3).unwrap(), 8.0 * a, epsilon = 1e-14);
        assert!(matches!(spontaneous_rate(0.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn uniform_single_bath() {
        let spec = SystemSpec::direct([[1.0; 2]; 2], BathSpec::single(0.05), 0.5, 0.5);
        let set = build_rate_table(&spec).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(set.r[i][j], 0.05, epsilon = 1e-16);
            }
        }
        assert_eq!(set.gamma_mean, 1.0);
    }

    #[test]
    fn unequal_ground_couplings() {
        let spec = SystemSpec::direct([[1.5; 2], [0.5; 2]], BathSpec::single(0.05), 0.3, 0.0);
        let set = build_rate_table(&spec).unwrap();
        assert_eq!(set.gamma_mean, 1.0);
        for j in 0..2 {
            assert_abs_diff_eq!(set.r[0][j], 0.075, epsilon = 1e-16);
            assert_abs_diff_eq!(set.r[1][j], 0.025, epsilon = 1e-16);
        }
    }

    #[test]
    fn per_ground_state_baths_break_the_ratio() {
        let spec = SystemSpec::direct([[1.0; 2]; 2], BathSpec::per_ground_state(0.05, 0.10), 0.3, 0.1);
        let set = build_rate_table(&spec).unwrap();
        for j in 0..2 {
            assert_abs_diff_eq!(set.r[0][j], 0.05, epsilon = 1e-16);
            assert_abs_diff_eq!(set.r[1][j], 0.10, epsilon = 1e-16);
        }
        assert!(set.r[0][0] / set.gamma[0][0] != set.r[1][0] / set.gamma[1][0]);
    }

    #[test]
    fn bath_count_mismatch_is_a_config_error() {
        let spec = SystemSpec::direct(
            [[1.0; 2]; 2],
            BathSpec::PerGroundState {
                occupation: vec![Occupation::Nbar(0.05)],
            },
            0.0,
            0.0,
        );
        assert!(matches!(build_rate_table(&spec), Err(Error::Config(_))));
        assert!(!spec.validate().is_ok());
    }

    #[test]
    fn validation_collects_every_problem() {
        let spec = SystemSpec::direct([[-1.0, 1.0], [1.0, 1.0]], BathSpec::single(-0.1), -0.3, 0.0);
        let v = spec.validate();
        let fields: Vec<_> = v.errors.iter().map(|e| e.field.as_str()).collect();
        assert_eq!(fields, ["delta_g", "gamma", "bath.occupation"]);
    }

    #[test]
    fn narrow_gap_warns() {
        let mut spec = SystemSpec::direct([[1.0; 2]; 2], BathSpec::single(0.05), 0.3, 0.1);
        spec.delta_0 = Some(10.0);
        let v = spec.validate();
        assert!(v.is_ok());
        assert_eq!(v.warnings.len(), 1);
        spec.delta_0 = Some(1000.0);
        assert!(spec.validate().warnings.is_empty());
    }

    fn physical(scale: f64, temperature: f64) -> SystemSpec {
        let dip = |l: &str, c: [f64; 3]| DipoleVector::new(l, c.map(|x| x * scale));
        SystemSpec {
            delta_0: Some(1.0),
            delta_g: 1e-3,
            delta_e: 2e-3,
            rates: RateInput::Physical {
                dipoles: [
                    dip("g1e1", [1.0, 0.0, 0.0]),
                    dip("g1e2", [0.8, 0.2, 0.0]),
                    dip("g2e1", [0.0, 0.5, 0.5]),
                    dip("g2e2", [0.3, 0.0, 1.1]),
                ],
            },
            bath: BathSpec::Single {
                occupation: Occupation::Thermal {
                    temperature,
                    frequency: None,
                },
            },
        }
    }

    #[test]
    fn physical_mode_uses_flat_occupation_and_cubic_rates() {
        let spec = physical(1.0, 1.0 / 21f64.ln());
        let set = build_rate_table(&spec).unwrap();
        assert_relative_eq!(set.gamma_mean, 1.0, epsilon = 1e-14);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(set.nbar_eff[i][j], 0.05, epsilon = 1e-12);
            }
        }
        let w = |i: usize, j: usize| 1.0 + j as f64 * 2e-3 - i as f64 * 1e-3;
        let ratio = set.gamma[0][0] / set.gamma[1][1];
        let expected = (w(0, 0).powi(3) * 1.0) / (w(1, 1).powi(3) * (0.09 + 1.21));
        assert_relative_eq!(ratio, expected, epsilon = 1e-12);
        assert!(spec.dipole_alignments().unwrap().is_ok());
    }

    proptest! {
        #[test]
        fn pumping_is_gamma_times_occupation(
            g in prop::array::uniform4(0.01f64..5.0),
            n1 in 0.0f64..3.0,
            n2 in 0.0f64..3.0,
        ) {
            let set = RateSet::from_gamma([[g[0], g[1]], [g[2], g[3]]], [n1, n2]).unwrap();
            for j in 0..2 {
                prop_assert_eq!(set.r[0][j], set.gamma[0][j] * n1);
                prop_assert_eq!(set.r[1][j], set.gamma[1][j] * n2);
                prop_assert!((set.r[0][j] / set.gamma[0][j] - n1).abs() <= 1e-15 * n1.max(1.0));
            }
            prop_assert!((set.gamma_mean - (g[0] + g[1] + g[2] + g[3]) / 4.0).abs() < 1e-15);
        }

        #[test]
        fn physical_rates_are_scale_free(c in 0.1f64..10.0) {
            let a = build_rate_table(&physical(1.0, 0.5)).unwrap();
            let b = build_rate_table(&physical(c, 0.5)).unwrap();
            prop_assert!((b.gamma_unit / a.gamma_unit - c * c).abs() < 1e-10 * c * c);
            for i in 0..2 {
                for j in 0..2 {
                    prop_assert!((a.gamma[i][j] - b.gamma[i][j]).abs() < 1e-12);
                    prop_assert!((a.r[i][j] - b.r[i][j]).abs() < 1e-12);
                }
            }
        }
    }
}
