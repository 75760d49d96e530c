//! Transition dipoles and the alignment parameters built from them.
//!
//! An alignment parameter is the cosine of the angle between two transition
//! dipoles. It controls how strongly the two transitions interfere when they
//! are driven by the same radiation modes. Real 3-vectors are assumed
//! throughout; zero-length dipoles mark forbidden transitions and are rejected
//! rather than treated as orthogonal.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default tolerance on |cos θ| below which two dipoles count as orthogonal.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-12;

/// A transition dipole moment with the label of the transition it belongs to,
/// e.g. `"g1e2"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipoleVector {
    pub label: String,
    pub components: [f64; 3],
}

impl DipoleVector {
    pub fn new(label: impl Into<String>, components: [f64; 3]) -> Self {
        Self {
            label: label.into(),
            components,
        }
    }

    pub fn norm(&self) -> f64 {
        let [x, y, z] = self.components;
        (x * x + y * y + z * z).sqrt()
    }

    pub fn dot(&self, other: &DipoleVector) -> f64 {
        self.components
            .iter()
            .zip(other.components.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Zero (or non-finite) length dipoles describe forbidden transitions.
    pub fn is_forbidden(&self) -> bool {
        let n = self.norm();
        !(n.is_finite() && n > 0.0)
    }
}

/// The six alignment parameters of the four-level system.
///
/// `p_g1`/`p_g2` pair the two transitions leaving a ground state, `p_e1`/`p_e2`
/// the two transitions reaching an excited state, and `p_par`/`p_cross` the
/// transition pairs sharing no state: (g1e1, g2e2) and (g2e1, g1e2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSet {
    pub p_g1: f64,
    pub p_g2: f64,
    pub p_e1: f64,
    pub p_e2: f64,
    pub p_par: f64,
    pub p_cross: f64,
}

impl AlignmentSet {
    /// Every parameter set to `p`; `uniform(1.0)` is the all-parallel case.
    pub const fn uniform(p: f64) -> Self {
        Self {
            p_g1: p,
            p_g2: p,
            p_e1: p,
            p_e2: p,
            p_par: p,
            p_cross: p,
        }
    }

    /// No interference at all: the secular limit.
    pub const fn secular() -> Self {
        Self::uniform(0.0)
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.p_g1,
            self.p_g2,
            self.p_e1,
            self.p_e2,
            self.p_par,
            self.p_cross,
        ]
    }

    pub fn p_ground(&self) -> [f64; 2] {
        [self.p_g1, self.p_g2]
    }

    pub fn p_excited(&self) -> [f64; 2] {
        [self.p_e1, self.p_e2]
    }

    /// Returns the names of entries outside [-1, 1] or not finite.
    pub fn out_of_range(&self) -> Vec<&'static str> {
        const NAMES: [&str; 6] = ["p_g1", "p_g2", "p_e1", "p_e2", "p_par", "p_cross"];
        NAMES
            .iter()
            .zip(self.as_array())
            .filter(|(_, p)| !(p.is_finite() && (-1.0..=1.0).contains(p)))
            .map(|(n, _)| *n)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = self.out_of_range();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "alignment parameters outside [-1, 1]: {}",
                bad.join(", ")
            )))
        }
    }
}

/// Cosine of the angle between two transition dipoles.
pub fn alignment(u: &DipoleVector, v: &DipoleVector) -> Result<f64> {
    match (u.is_forbidden(), v.is_forbidden()) {
        (false, false) => {}
        (a, b) => {
            let labels = [(a, u), (b, v)]
                .into_iter()
                .filter(|(bad, _)| *bad)
                .map(|(_, d)| d.label.clone())
                .collect();
            return Err(Error::ZeroDipole(labels));
        }
    }
    Ok((u.dot(v) / (u.norm() * v.norm())).clamp(-1.0, 1.0))
}

/// Alignment parameters of the four-level system from its four transition
/// dipoles.
pub fn alignment_set_4ls(
    mu_g1e1: &DipoleVector,
    mu_g1e2: &DipoleVector,
    mu_g2e1: &DipoleVector,
    mu_g2e2: &DipoleVector,
) -> Result<AlignmentSet> {
    let forbidden: Vec<String> = [mu_g1e1, mu_g1e2, mu_g2e1, mu_g2e2]
        .iter()
        .filter(|d| d.is_forbidden())
        .map(|d| d.label.clone())
        .collect();
    if !forbidden.is_empty() {
        return Err(Error::ZeroDipole(forbidden));
    }
    Ok(AlignmentSet {
        p_g1: alignment(mu_g1e1, mu_g1e2)?,
        p_g2: alignment(mu_g2e1, mu_g2e2)?,
        p_e1: alignment(mu_g1e1, mu_g2e1)?,
        p_e2: alignment(mu_g1e2, mu_g2e2)?,
        p_par: alignment(mu_g1e1, mu_g2e2)?,
        p_cross: alignment(mu_g2e1, mu_g1e2)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UbiquityReport {
    pub n_transitions: usize,
    pub max_abs_alignment: f64,
    pub all_mutually_orthogonal: bool,
    /// Label pairs whose |alignment| exceeds the tolerance.
    pub offending_pairs: Vec<(String, String)>,
}

/// Checks whether a set of transition dipoles is mutually orthogonal.
///
/// Three-dimensional space holds at most three mutually orthogonal nonzero
/// vectors, so any list of four or more allowed transitions always reports
/// `all_mutually_orthogonal == false`.
pub fn ubiquity_check(dipoles: &[DipoleVector], tolerance: f64) -> Result<UbiquityReport> {
    if dipoles.is_empty() {
        return Err(Error::Domain("ubiquity check needs at least one dipole".into()));
    }
    if !(tolerance >= 0.0) {
        return Err(Error::Domain(format!(
            "orthogonality tolerance must be ≥ 0, got {tolerance}"
        )));
    }
    let forbidden: Vec<String> = dipoles
        .iter()
        .filter(|d| d.is_forbidden())
        .map(|d| d.label.clone())
        .collect();
    if !forbidden.is_empty() {
        return Err(Error::ZeroDipole(forbidden));
    }

    let mut max_abs: f64 = 0.0;
    let mut offending_pairs = Vec::new();
    for (i, u) in dipoles.iter().enumerate() {
        for v in &dipoles[i + 1..] {
            let p = alignment(u, v)?.abs();
            max_abs = max_abs.max(p);
            if p > tolerance {
                offending_pairs.push((u.label.clone(), v.label.clone()));
            }
        }
    }
    Ok(UbiquityReport {
        n_transitions: dipoles.len(),
        max_abs_alignment: max_abs,
        all_mutually_orthogonal: max_abs <= tolerance,
        offending_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn d(label: &str, c: [f64; 3]) -> DipoleVector {
        DipoleVector::new(label, c)
    }

    fn tetrahedron() -> [DipoleVector; 4] {
        let s = 1.0 / 3f64.sqrt();
        [
            d("g1e1", [s, s, s]),
            d("g1e2", [s, -s, -s]),
            d("g2e1", [-s, s, -s]),
            d("g2e2", [-s, -s, s]),
        ]
    }

    #[test]
    fn alignment_examples() {
        let x = d("a", [1.0, 0.0, 0.0]);
        assert_eq!(alignment(&x, &d("b", [2.0, 0.0, 0.0])).unwrap(), 1.0);
        assert_eq!(alignment(&x, &d("b", [0.0, 1.0, 0.0])).unwrap(), 0.0);
        assert_abs_diff_eq!(
            alignment(&x, &d("b", [1.0, 1.0, 0.0])).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
    }

    #[test]
    fn zero_dipole_is_rejected_with_its_label() {
        let err = alignment(&d("g1e1", [1.0, 0.0, 0.0]), &d("g2e2", [0.0; 3])).unwrap_err();
        assert_eq!(err, Error::ZeroDipole(vec!["g2e2".into()]));
    }

    #[test]
    fn parallel_dipoles_give_all_ones() {
        let z = [0.0, 0.0, 1.0];
        let set = alignment_set_4ls(&d("a", z), &d("b", z), &d("c", z), &d("e", z)).unwrap();
        assert_eq!(set, AlignmentSet::uniform(1.0));
    }

    #[test]
    fn mixed_axis_example() {
        let set = alignment_set_4ls(
            &d("g1e1", [1.0, 0.0, 0.0]),
            &d("g1e2", [0.0, 1.0, 0.0]),
            &d("g2e1", [0.0, 0.0, 1.0]),
            &d("g2e2", [1.0, 0.0, 0.0]),
        )
        .unwrap();
        assert_eq!(
            set,
            AlignmentSet {
                p_g1: 0.0,
                p_g2: 0.0,
                p_e1: 0.0,
                p_e2: 0.0,
                p_par: 1.0,
                p_cross: 0.0
            }
        );
    }

    /// Brute-force pairwise evaluation of the tetrahedral directions.
    #[test]
    fn tetrahedral_alignments_are_minus_one_third() {
        let t = tetrahedron();
        for i in 0..4 {
            for j in (i + 1)..4 {
                let c: f64 = (0..3).map(|k| t[i].components[k] * t[j].components[k]).sum();
                assert_abs_diff_eq!(c, -1.0 / 3.0, epsilon = 1e-15);
            }
        }
        let set = alignment_set_4ls(&t[0], &t[1], &t[2], &t[3]).unwrap();
        for p in set.as_array() {
            assert_abs_diff_eq!(p, -1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn any_zero_dipole_fails_the_set() {
        let x = [1.0, 0.0, 0.0];
        let err = alignment_set_4ls(&d("g1e1", x), &d("g1e2", [0.0; 3]), &d("g2e1", x), &d("g2e2", x))
            .unwrap_err();
        assert_eq!(err, Error::ZeroDipole(vec!["g1e2".into()]));
    }

    #[test]
    fn sign_flip_of_one_dipole_flips_its_three_entries() {
        let t = tetrahedron();
        let base = alignment_set_4ls(&t[0], &t[1], &t[2], &t[3]).unwrap();
        let mut flipped = t[2].clone();
        flipped.components.iter_mut().for_each(|c| *c = -*c);
        let set = alignment_set_4ls(&t[0], &t[1], &flipped, &t[3]).unwrap();
        // g2e1 enters p_g2, p_e1 and p_cross.
        assert_eq!(set.p_g2, -base.p_g2);
        assert_eq!(set.p_e1, -base.p_e1);
        assert_eq!(set.p_cross, -base.p_cross);
        assert_eq!(set.p_g1, base.p_g1);
        assert_eq!(set.p_e2, base.p_e2);
        assert_eq!(set.p_par, base.p_par);
    }

    #[test]
    fn canonical_basis_is_orthogonal() {
        let r = ubiquity_check(
            &[
                d("a", [1.0, 0.0, 0.0]),
                d("b", [0.0, 1.0, 0.0]),
                d("c", [0.0, 0.0, 1.0]),
            ],
            ORTHOGONALITY_TOLERANCE,
        )
        .unwrap();
        assert!(r.all_mutually_orthogonal);
        assert_eq!(r.max_abs_alignment, 0.0);
        assert!(r.offending_pairs.is_empty());
    }

    #[test]
    fn tetrahedron_is_not_orthogonal() {
        let r = ubiquity_check(&tetrahedron(), ORTHOGONALITY_TOLERANCE).unwrap();
        assert!(!r.all_mutually_orthogonal);
        assert_abs_diff_eq!(r.max_abs_alignment, 1.0 / 3.0, epsilon = 1e-12);
        assert_eq!(r.offending_pairs.len(), 6);
    }

    #[test]
    fn ubiquity_errors() {
        assert!(matches!(
            ubiquity_check(&[], 1e-12),
            Err(Error::Domain(_))
        ));
        let err = ubiquity_check(
            &[d("a", [0.0; 3]), d("b", [1.0, 0.0, 0.0]), d("c", [0.0; 3])],
            1e-12,
        )
        .unwrap_err();
        assert_eq!(err, Error::ZeroDipole(vec!["a".into(), "c".into()]));
    }

    fn nonzero_vec() -> impl Strategy<Value = [f64; 3]> {
        prop::array::uniform3(-10.0f64..10.0).prop_filter("nonzero", |v| {
            (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() > 1e-3
        })
    }

    fn rotation(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let [x, y, z] = [axis[0] / n, axis[1] / n, axis[2] / n];
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        [
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ]
    }

    fn rotate(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|i| (0..3).map(|k| m[i][k] * v[k]).sum())
    }

    proptest! {
        #[test]
        fn alignment_is_a_cosine(u in nonzero_vec(), v in nonzero_vec(), a in 0.01f64..100.0, b in 0.01f64..100.0) {
            let du = d("u", u);
            let dv = d("v", v);
            let p = alignment(&du, &dv).unwrap();
            prop_assert!((-1.0..=1.0).contains(&p));
            prop_assert_eq!(p, alignment(&dv, &du).unwrap());
            let scaled = alignment(&d("u", u.map(|c| a * c)), &d("v", v.map(|c| b * c))).unwrap();
            prop_assert!((scaled - p).abs() < 1e-12);
            prop_assert!((alignment(&du, &du).unwrap() - 1.0).abs() < 1e-15);
            prop_assert!((alignment(&du, &d("m", u.map(|c| -c))).unwrap() + 1.0).abs() < 1e-15);
        }

        #[test]
        fn alignment_is_rotation_invariant(u in nonzero_vec(), v in nonzero_vec(), axis in nonzero_vec(), angle in 0.0f64..6.3) {
            let r = rotation(axis, angle);
            let p = alignment(&d("u", u), &d("v", v)).unwrap();
            let q = alignment(&d("u", rotate(&r, u)), &d("v", rotate(&r, v))).unwrap();
            prop_assert!((p - q).abs() < 1e-12);
        }

        #[test]
        fn four_or_more_dipoles_are_never_orthogonal(vs in prop::collection::vec(nonzero_vec(), 4..8)) {
            let dipoles: Vec<_> = vs.iter().enumerate().map(|(i, v)| d(&format!("t{i}"), *v)).collect();
            let r = ubiquity_check(&dipoles, ORTHOGONALITY_TOLERANCE).unwrap();
            prop_assert!(!r.all_mutually_orthogonal);
            prop_assert!(r.max_abs_alignment > 0.0);
        }
    }
}
