//! Dense eigendecomposition and null-space helpers for the 8×8 generator.

use nalgebra::{Complex, DMatrix, DVector};

use crate::liouvillian::{Matrix8, Vector8};
use crate::{Error, Result};

type C64 = Complex<f64>;

/// Eigenvalues closer than this (relative to ‖A‖) are treated as one cluster.
const CLUSTER_TOLERANCE: f64 = 1e-10;
/// A cluster of multiplicity m must have m singular values of A − λI below
/// this (relative) threshold, otherwise the matrix is defective.
const DEFECT_TOLERANCE: f64 = 1e-8;
/// Eigenvector matrices worse conditioned than this are rejected.
pub(crate) const MAX_CONDITION: f64 = 1e10;

/// Singular values below `NULL_TOLERANCE · σ_max` count as zero.
pub(crate) const NULL_TOLERANCE: f64 = 1e-12;
/// Singular values above this relative level count as nonzero; anything in
/// between makes the rank decision ambiguous.
pub(crate) const NONZERO_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug)]
pub(crate) struct Eigensystem {
    pub values: Vec<C64>,
    pub vectors: DMatrix<C64>,
    pub inverse: DMatrix<C64>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub condition: f64,
}

fn sorted_singular_values(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let values = idx.iter().map(|&k| svd.singular_values[k]).collect();
    // Rows of v_t reordered by ascending singular value, returned as columns.
    let n = m.ncols();
    let mut vecs = DMatrix::<C64>::zeros(n, idx.len());
    for (col, &k) in idx.iter().enumerate() {
        for r in 0..n {
            vecs[(r, col)] = v_t[(k, r)].conj();
        }
    }
    (values, vecs)
}

fn condition_number(m: &DMatrix<C64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

impl Eigensystem {
    pub fn new(a: &Matrix8) -> Result<Self> {
        let n = 8;
        let scale = a.amax().max(f64::MIN_POSITIVE);
        let values: Vec<C64> = a.complex_eigenvalues().iter().copied().collect();
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::EigenFallback {
                reason: "eigenvalue computation did not converge".into(),
            });
        }

        let ac: DMatrix<C64> = DMatrix::from_fn(n, n, |i, j| C64::new(a[(i, j)], 0.0));
        let mut assigned = vec![false; n];
        let mut ordered_values = Vec::with_capacity(n);
        let mut vectors = DMatrix::<C64>::zeros(n, n);
        let mut col = 0;
        for k in 0..n {
            if assigned[k] {
                continue;
            }
            let members: Vec<usize> = (k..n)
                .filter(|&m| !assigned[m] && (values[m] - values[k]).norm() <= CLUSTER_TOLERANCE * scale)
                .collect();
            let mean = members.iter().map(|&m| values[m]).sum::<C64>() / members.len() as f64;
            let shifted = &ac - DMatrix::<C64>::identity(n, n) * mean;
            let (sv, basis) = sorted_singular_values(&shifted);
            let m = members.len();
            if sv[m - 1] > DEFECT_TOLERANCE * scale {
                return Err(Error::EigenFallback {
                    reason: format!(
                        "eigenvalue {mean} of multiplicity {m} has a deficient eigenspace \
                         (σ_{m} = {:.3e})",
                        sv[m - 1]
                    ),
                });
            }
            for (slot, &member) in members.iter().enumerate() {
                assigned[member] = true;
                ordered_values.push(if m == 1 { values[member] } else { mean });
                vectors.set_column(col, &basis.column(slot));
                col += 1;
            }
        }

        let condition = condition_number(&vectors);
        if !(condition <= MAX_CONDITION) {
            return Err(Error::EigenFallback {
                reason: format!("eigenvector matrix condition number {condition:.3e}"),
            });
        }
        let inverse = vectors.clone().try_inverse().ok_or_else(|| Error::EigenFallback {
            reason: "eigenvector matrix is singular".into(),
        })?;
        Ok(Self {
            values: ordered_values,
            vectors,
            inverse,
            condition,
        })
    }

    /// Expansion coefficients of a real vector in the eigenbasis.
    pub fn coefficients(&self, x: &Vector8) -> DVector<C64> {
        let xc = DVector::from_iterator(8, x.iter().map(|v| C64::new(*v, 0.0)));
        &self.inverse * xc
    }

    /// Σ_k c_k v_k e^{λ_k t}, real part.
    pub fn evolve(&self, coefficients: &DVector<C64>, t: f64) -> Vector8 {
        let mut out = Vector8::zeros();
        for k in 0..8 {
            let w = coefficients[k] * (self.values[k] * t).exp();
            for i in 0..8 {
                out[i] += (self.vectors[(i, k)] * w).re;
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub(crate) struct NullSpace {
    /// Singular values divided by the largest, ascending.
    pub relative_singular_values: Vec<f64>,
    pub basis: Vec<Vector8>,
}

pub(crate) fn null_space(a: &Matrix8) -> Result<NullSpace> {
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let sigma_max = svd.singular_values.max();
    let mut idx: Vec<usize> = (0..8).collect();
    idx.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    let relative: Vec<f64> = idx
        .iter()
        .map(|&k| {
            if sigma_max > 0.0 {
                svd.singular_values[k] / sigma_max
            } else {
                0.0
            }
        })
        .collect();
    if relative
        .iter()
        .any(|s| *s >= NULL_TOLERANCE && *s < NONZERO_TOLERANCE)
    {
        return Err(Error::AmbiguousNullSpace {
            singular_values: relative,
        });
    }
    let basis = idx
        .iter()
        .zip(&relative)
        .filter(|(_, s)| **s < NULL_TOLERANCE)
        .map(|(&k, _)| Vector8::from_fn(|i, _| v_t[(k, i)]))
        .collect();
    Ok(NullSpace {
        relative_singular_values: relative,
        basis,
    })
}
