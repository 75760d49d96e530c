//! The PSBR generator in a real eight-component representation.
//!
//! Inter-manifold coherences are dropped, so the density matrix reduces to
//! four populations and the two intra-manifold coherences ρ_{g1g2} and
//! ρ_{e1e2}. Their real and imaginary parts give the state vector
//!
//! ```text
//! (ρ_g1g1, ρ_g2g2, ρ_e1e1, ρ_e2e2, Re ρ_g1g2, Im ρ_g1g2, Re ρ_e1e2, Im ρ_e1e2)
//! ```
//!
//! and the master equation becomes dx/dt = L x with a real 8×8 matrix L.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::dipole_geometry::AlignmentSet;
use crate::rates::RateSet;
use crate::{Error, Result};

pub type Matrix8 = SMatrix<f64, 8, 8>;
pub type Vector8 = SVector<f64, 8>;
pub type Matrix4 = SMatrix<f64, 4, 4>;

pub const POP_G1: usize = 0;
pub const POP_G2: usize = 1;
pub const POP_E1: usize = 2;
pub const POP_E2: usize = 3;
pub const COH_G_RE: usize = 4;
pub const COH_G_IM: usize = 5;
pub const COH_E_RE: usize = 6;
pub const COH_E_IM: usize = 7;

/// Default tolerance on trace and population checks.
pub const STATE_TOLERANCE: f64 = 1e-9;
/// Default tolerance on the coherence bound |ρ_12| ≤ √(ρ_11 ρ_22).
pub const COHERENCE_BOUND_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub pop_g1: f64,
    pub pop_g2: f64,
    pub pop_e1: f64,
    pub pop_e2: f64,
    pub coh_g_re: f64,
    pub coh_g_im: f64,
    pub coh_e_re: f64,
    pub coh_e_im: f64,
}

impl ReducedState {
    /// Equal incoherent mixture of the two ground states.
    pub fn ground_mixture() -> Self {
        Self {
            pop_g1: 0.5,
            pop_g2: 0.5,
            ..Self::default()
        }
    }

    pub fn from_array(x: [f64; 8]) -> Self {
        Self {
            pop_g1: x[0],
            pop_g2: x[1],
            pop_e1: x[2],
            pop_e2: x[3],
            coh_g_re: x[4],
            coh_g_im: x[5],
            coh_e_re: x[6],
            coh_e_im: x[7],
        }
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.pop_g1,
            self.pop_g2,
            self.pop_e1,
            self.pop_e2,
            self.coh_g_re,
            self.coh_g_im,
            self.coh_e_re,
            self.coh_e_im,
        ]
    }

    pub fn from_vector(v: &Vector8) -> Self {
        Self::from_array(std::array::from_fn(|i| v[i]))
    }

    pub fn to_vector(&self) -> Vector8 {
        Vector8::from(self.to_array())
    }

    pub fn trace(&self) -> f64 {
        self.pop_g1 + self.pop_g2 + self.pop_e1 + self.pop_e2
    }

    pub fn coh_g_abs(&self) -> f64 {
        self.coh_g_re.hypot(self.coh_g_im)
    }

    pub fn coh_e_abs(&self) -> f64 {
        self.coh_e_re.hypot(self.coh_e_im)
    }

    pub fn min_population(&self) -> f64 {
        self.pop_g1.min(self.pop_g2).min(self.pop_e1).min(self.pop_e2)
    }

    /// Largest excess of |ρ_12| over √(ρ_11 ρ_22) in either manifold; ≤ 0
    /// when the bound holds. Negative populations are clamped to zero.
    pub fn coherence_bound_excess(&self) -> f64 {
        let g = self.coh_g_abs() - (self.pop_g1.max(0.0) * self.pop_g2.max(0.0)).sqrt();
        let e = self.coh_e_abs() - (self.pop_e1.max(0.0) * self.pop_e2.max(0.0)).sqrt();
        g.max(e)
    }

    /// Checks normalization, positivity and the coherence bound.
    pub fn check_physical(&self, tol: f64, bound_tol: f64) -> Result<()> {
        let mut problems = Vec::new();
        if (self.trace() - 1.0).abs() > tol {
            problems.push(format!("trace {} ≠ 1", self.trace()));
        }
        let pops = [self.pop_g1, self.pop_g2, self.pop_e1, self.pop_e2];
        if pops.iter().any(|p| !(-tol..=1.0 + tol).contains(p)) {
            problems.push(format!("populations {pops:?} outside [0, 1]"));
        }
        if self.coherence_bound_excess() > bound_tol {
            problems.push(format!(
                "coherence exceeds √(ρ_ii ρ_jj) by {}",
                self.coherence_bound_excess()
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Domain(problems.join("; ")))
        }
    }

    pub fn max_abs_diff(&self, other: &ReducedState) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneratorOptions {
    /// Use p_g1 for both j in the excited-population loss term of the
    /// excited coherence, instead of p_{g_j}. Only matters when p_g1 ≠ p_g2.
    #[serde(default)]
    pub excited_loss_uses_p_g1: bool,
    /// Feed the p_× cross transfer into each coherence unconjugated. By
    /// default it enters through the conjugate coherence ρ_{g2g1} (ρ_{e2e1}),
    /// which is what the Redfield index structure gives. The unconjugated
    /// form conserves ρ_{g1g2} + ρ_{e1e2} at p = 1 and its stationary states
    /// can have negative populations.
    #[serde(default)]
    pub cross_transfer_unconjugated: bool,
}

/// The assembled 8×8 generator together with the inputs that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    #[serde(with = "matrix_rows")]
    pub matrix: Matrix8,
    pub rates: RateSet,
    pub alignment: AlignmentSet,
    pub delta_g: f64,
    pub delta_e: f64,
    pub options: GeneratorOptions,
}

impl Generator {
    /// dx/dt for the given state.
    pub fn apply(&self, state: &ReducedState) -> ReducedState {
        ReducedState::from_vector(&(self.matrix * state.to_vector()))
    }

    /// The 4×4 population block.
    pub fn population_block(&self) -> Matrix4 {
        self.matrix.fixed_view::<4, 4>(0, 0).into_owned()
    }

    /// Largest |Σ_i L_ij| over columns, i.e. the departure from exact trace
    /// preservation.
    pub fn trace_defect(&self) -> f64 {
        (0..8)
            .map(|j| (0..4).map(|i| self.matrix[(i, j)]).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    /// A generator with every entry zero, useful as a null dynamics.
    pub fn zero() -> Self {
        Self {
            matrix: Matrix8::zeros(),
            rates: RateSet::uniform(0.0, 0.0).expect("zero rates are valid"),
            alignment: AlignmentSet::secular(),
            delta_g: 0.0,
            delta_e: 0.0,
            options: GeneratorOptions::default(),
        }
    }
}

/// Same as [`Generator::apply`].
pub fn apply(gen: &Generator, state: &ReducedState) -> ReducedState {
    gen.apply(state)
}

/// Assembles the PSBR generator.
///
/// Emission factors γ(1 + n̄) use the occupation of each transition's own
/// bath; products of two transitions take the square root of the product, so
/// the coherence-transfer terms carry the geometric mean of the two (1 + n̄)
/// factors when the baths differ.
pub fn build_generator(
    rates: &RateSet,
    p: &AlignmentSet,
    delta_g: f64,
    delta_e: f64,
    options: GeneratorOptions,
) -> Result<Generator> {
    rates.validate()?;
    p.validate()?;
    if !(delta_g >= 0.0 && delta_e >= 0.0 && delta_g.is_finite() && delta_e.is_finite()) {
        return Err(Error::Domain(format!(
            "splittings must be finite and ≥ 0, got Δ_g = {delta_g}, Δ_e = {delta_e}"
        )));
    }

    let em = |i: usize, j: usize| rates.emission(i, j);
    let pump = |i: usize, j: usize| rates.r[i][j];
    let pg = p.p_ground();
    let pe = p.p_excited();
    // The crossed pair (g2e1, g1e2) links ρ_e1e2 with ρ_g2g1 = ρ_g1g2*.
    let cross_sign = if options.cross_transfer_unconjugated { 1.0 } else { -1.0 };
    let mut l = Matrix8::zeros();

    // Excited populations.
    for i in 0..2 {
        let row = POP_E1 + i;
        for j in 0..2 {
            l[(row, POP_G1 + j)] += pump(j, i);
            l[(row, row)] -= em(j, i);
            l[(row, COH_E_RE)] -= pg[j] * (em(j, 0) * em(j, 1)).sqrt();
        }
        l[(row, COH_G_RE)] += 2.0 * pe[i] * (pump(0, i) * pump(1, i)).sqrt();
    }

    // Ground populations.
    for i in 0..2 {
        let row = POP_G1 + i;
        for j in 0..2 {
            l[(row, POP_E1 + j)] += em(i, j);
            l[(row, COH_G_RE)] -= pe[j] * (pump(0, j) * pump(1, j)).sqrt();
            l[(row, row)] -= pump(i, j);
        }
        l[(row, COH_E_RE)] += 2.0 * pg[i] * (em(i, 0) * em(i, 1)).sqrt();
    }

    // Excited coherence.
    for j in 0..2 {
        l[(COH_E_RE, POP_G1 + j)] += pg[j] * (pump(j, 0) * pump(j, 1)).sqrt();
        let p_loss = if options.excited_loss_uses_p_g1 { pg[0] } else { pg[j] };
        let loss = 0.5 * p_loss * (em(j, 0) * em(j, 1)).sqrt();
        l[(COH_E_RE, POP_E1)] -= loss;
        l[(COH_E_RE, POP_E2)] -= loss;
    }
    let excited_decay = 0.5 * (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| em(i, j)).sum::<f64>();
    l[(COH_E_RE, COH_E_RE)] -= excited_decay;
    l[(COH_E_IM, COH_E_IM)] -= excited_decay;
    // -iΔ_e ρ_e1e2
    l[(COH_E_RE, COH_E_IM)] += delta_e;
    l[(COH_E_IM, COH_E_RE)] -= delta_e;
    let par_up = p.p_par * (pump(0, 0) * pump(1, 1)).sqrt();
    let cross_up = p.p_cross * (pump(0, 1) * pump(1, 0)).sqrt();
    l[(COH_E_RE, COH_G_RE)] += par_up + cross_up;
    l[(COH_E_IM, COH_G_IM)] += par_up + cross_sign * cross_up;

    // Ground coherence.
    for j in 0..2 {
        l[(COH_G_RE, POP_E1 + j)] += pe[j] * (em(0, j) * em(1, j)).sqrt();
        let gain = 0.5 * pe[j] * (pump(0, j) * pump(1, j)).sqrt();
        l[(COH_G_RE, POP_G1)] -= gain;
        l[(COH_G_RE, POP_G2)] -= gain;
    }
    let par_down = p.p_par * (em(0, 0) * em(1, 1)).sqrt();
    let cross_down = p.p_cross * (em(1, 0) * em(0, 1)).sqrt();
    l[(COH_G_RE, COH_E_RE)] += par_down + cross_down;
    l[(COH_G_IM, COH_E_IM)] += par_down + cross_sign * cross_down;
    let ground_decay = 0.5 * rates.r.iter().flatten().sum::<f64>();
    l[(COH_G_RE, COH_G_RE)] -= ground_decay;
    l[(COH_G_IM, COH_G_IM)] -= ground_decay;
    // -iΔ_g ρ_g1g2
    l[(COH_G_RE, COH_G_IM)] += delta_g;
    l[(COH_G_IM, COH_G_RE)] -= delta_g;

    Ok(Generator {
        matrix: l,
        rates: *rates,
        alignment: *p,
        delta_g,
        delta_e,
        options,
    })
}

/// Pauli rate matrix on (ρ_g1g1, ρ_g2g2, ρ_e1e1, ρ_e2e2) without any
/// interference terms. Columns sum to zero.
pub fn secular_generator(rates: &RateSet) -> Result<Matrix4> {
    rates.validate()?;
    let mut w = Matrix4::zeros();
    for g in 0..2 {
        for e in 0..2 {
            let up = rates.r[g][e];
            let down = rates.gamma[g][e] * (1.0 + rates.nbar_eff[g][e]);
            // g → e
            w[(2 + e, g)] += up;
            w[(g, g)] -= up;
            // e → g
            w[(g, 2 + e)] += down;
            w[(2 + e, 2 + e)] -= down;
        }
    }
    Ok(w)
}

mod matrix_rows {
    use super::Matrix8;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix8, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<[f64; 8]> = (0..8)
            .map(|i| std::array::from_fn(|j| m[(i, j)]))
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix8, D::Error> {
        let rows = <[[f64; 8]; 8]>::deserialize(d)?;
        Ok(Matrix8::from_fn(|i, j| rows[i][j]))
    }
}
