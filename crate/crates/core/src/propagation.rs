//! Time evolution of [`ReducedState`]s.
//!
//! Static generators are propagated exactly through their eigendecomposition
//! (`propagate_eigen`) or with the adaptive Dormand-Prince integrator
//! (`propagate_ode`). Intensity ramps make the generator time dependent and
//! always go through the integrator. Steady states come from the null space
//! of the generator.

use serde::{Deserialize, Serialize};

use crate::dipole_geometry::AlignmentSet;
use crate::linalg::{null_space, Eigensystem};
use crate::liouvillian::{build_generator, Generator, GeneratorOptions, ReducedState, Vector8};
use crate::ode::{integrate, OdeOptions};
use crate::rates::RateSet;
use crate::{Error, Result};

/// Number of integrator substeps per ramp duration, at least.
pub const RAMP_SUBSTEPS: f64 = 200.0;

/// Decay constant of the exponential ramp: s(τ_r) would be 1 − e^{-5}
/// without renormalisation.
const EXPONENTIAL_RAMP_RATE: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Eigen,
    Ode,
    Ramp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ReducedState>,
    pub method: Method,
    /// Generator of the dynamics; for ramps, the fully-on generator.
    pub generator: Generator,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&ReducedState> {
        self.states.last()
    }

    /// Largest component-wise difference between two trajectories on the same
    /// grid.
    pub fn max_abs_diff(&self, other: &Trajectory) -> Result<f64> {
        if self.times != other.times {
            return Err(Error::Domain("trajectories use different time grids".into()));
        }
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max))
    }
}

/// `n` logarithmically spaced times from `t_min` to `t_max` inclusive.
pub fn log_grid(t_min: f64, t_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min && n >= 2) {
        return Err(Error::Domain(format!(
            "log grid needs 0 < t_min < t_max and n ≥ 2, got ({t_min}, {t_max}, {n})"
        )));
    }
    let (a, b) = (t_min.ln(), t_max.ln());
    let mut grid: Vec<f64> = (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect();
    grid[0] = t_min;
    grid[n - 1] = t_max;
    Ok(grid)
}

/// `n` equally spaced times from `t0` to `t1` inclusive.
pub fn linear_grid(t0: f64, t1: f64, n: usize) -> Result<Vec<f64>> {
    if !(t0 >= 0.0 && t1 > t0 && n >= 2) {
        return Err(Error::Domain(format!(
            "linear grid needs 0 ≤ t0 < t1 and n ≥ 2, got ({t0}, {t1}, {n})"
        )));
    }
    let dt = (t1 - t0) / (n - 1) as f64;
    let mut grid: Vec<f64> = (0..n).map(|k| t0 + dt * k as f64).collect();
    grid[n - 1] = t1;
    Ok(grid)
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Domain("empty time grid".into()));
    }
    if !(times[0] >= 0.0) {
        return Err(Error::Domain(format!("times must start at ≥ 0, got {}", times[0])));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("times must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// ρ(t) = Σ_k c_k v_k e^{λ_k t}, starting from `initial` at t = 0.
///
/// Returns [`Error::EigenFallback`] when the eigenbasis is defective or too
/// ill-conditioned; callers should then use [`propagate_ode`].
pub fn propagate_eigen(gen: &Generator, initial: &ReducedState, times: &[f64]) -> Result<Trajectory> {
    check_times(times)?;
    let es = Eigensystem::new(&gen.matrix)?;
    let c = es.coefficients(&initial.to_vector());
    let states = times
        .iter()
        .map(|&t| ReducedState::from_vector(&es.evolve(&c, t)))
        .collect();
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        method: Method::Eigen,
        generator: gen.clone(),
    })
}

/// Adaptive Dormand-Prince integration with relative and absolute tolerance
/// `tol`, starting from `initial` at t = 0.
pub fn propagate_ode(
    gen: &Generator,
    initial: &ReducedState,
    times: &[f64],
    tol: f64,
) -> Result<Trajectory> {
    check_times(times)?;
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be > 0, got {tol}")));
    }
    let m = gen.matrix;
    let (ys, _) = integrate(
        |_, y| m * y,
        0.0,
        initial.to_vector(),
        times,
        &[],
        &OdeOptions::with_tol(tol),
    )?;
    Ok(Trajectory {
        times: times.to_vec(),
        states: ys.iter().map(ReducedState::from_vector).collect(),
        method: Method::Ode,
        generator: gen.clone(),
    })
}

/// Eigen propagation, falling back to the integrator when the eigenbasis is
/// unusable.
pub fn propagate(gen: &Generator, initial: &ReducedState, times: &[f64], tol: f64) -> Result<Trajectory> {
    match propagate_eigen(gen, initial, times) {
        Err(Error::EigenFallback { .. }) => propagate_ode(gen, initial, times, tol),
        other => other,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub null_dimension: usize,
    /// Trace-normalised stationary state when the null space is one
    /// dimensional.
    pub state: Option<ReducedState>,
    /// Null-space basis vectors (unnormalised) when it is not.
    pub basis: Vec<ReducedState>,
    /// Singular values of the generator relative to the largest, ascending.
    pub relative_singular_values: Vec<f64>,
}

impl SteadyState {
    pub fn is_unique(&self) -> bool {
        self.null_dimension == 1
    }

    pub fn unique(&self) -> Result<ReducedState> {
        self.state.ok_or_else(|| {
            Error::Domain(format!(
                "steady state is not unique (null-space dimension {})",
                self.null_dimension
            ))
        })
    }
}

/// Stationary state(s) of the generator from its null space.
pub fn steady_state(gen: &Generator) -> Result<SteadyState> {
    let ns = null_space(&gen.matrix)?;
    let dim = ns.basis.len();
    match dim {
        0 => Err(Error::Domain(
            "generator has no null space; no stationary state exists".into(),
        )),
        1 => {
            let v = ns.basis[0];
            let tr = v[0] + v[1] + v[2] + v[3];
            if tr.abs() < 1e-12 {
                return Err(Error::Domain("null vector has zero trace".into()));
            }
            Ok(SteadyState {
                null_dimension: 1,
                state: Some(ReducedState::from_vector(&(v / tr))),
                basis: vec![ReducedState::from_vector(&v)],
                relative_singular_values: ns.relative_singular_values,
            })
        }
        _ => Ok(SteadyState {
            null_dimension: dim,
            state: None,
            basis: ns.basis.iter().map(ReducedState::from_vector).collect(),
            relative_singular_values: ns.relative_singular_values,
        }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampShape {
    Sudden,
    Linear,
    Exponential,
}

/// Turn-on profile s(t) of the incoherent intensity, with s(0) = 0 and
/// s(t ≥ τ_r) = 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RampProfile {
    pub shape: RampShape,
    pub tau_r: f64,
}

impl RampProfile {
    pub const SUDDEN: RampProfile = RampProfile {
        shape: RampShape::Sudden,
        tau_r: 0.0,
    };

    pub fn linear(tau_r: f64) -> Self {
        Self {
            shape: RampShape::Linear,
            tau_r,
        }
    }

    pub fn exponential(tau_r: f64) -> Self {
        Self {
            shape: RampShape::Exponential,
            tau_r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_r >= 0.0 && self.tau_r.is_finite()) {
            return Err(Error::Domain(format!("ramp time must be ≥ 0, got {}", self.tau_r)));
        }
        let sudden = self.shape == RampShape::Sudden;
        if sudden != (self.tau_r == 0.0) {
            return Err(Error::Domain(
                "a ramp is sudden exactly when its turn-on time is zero".into(),
            ));
        }
        Ok(())
    }

    /// Intensity scale at time t.
    pub fn scale(&self, t: f64) -> f64 {
        if t >= self.tau_r {
            return 1.0;
        }
        let x = t / self.tau_r;
        match self.shape {
            RampShape::Sudden => 1.0,
            RampShape::Linear => x,
            RampShape::Exponential => {
                (-EXPONENTIAL_RAMP_RATE * x).exp_m1() / (-EXPONENTIAL_RAMP_RATE).exp_m1()
            }
        }
    }
}

/// Propagation under an intensity ramp: pumping and stimulated emission scale
/// with s(t) while spontaneous emission stays on.
#[allow(clippy::too_many_arguments)]
pub fn propagate_ramp(
    rates: &RateSet,
    p: &AlignmentSet,
    delta_g: f64,
    delta_e: f64,
    options: GeneratorOptions,
    ramp: &RampProfile,
    initial: &ReducedState,
    times: &[f64],
    tol: f64,
) -> Result<Trajectory> {
    ramp.validate()?;
    check_times(times)?;
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be > 0, got {tol}")));
    }
    let full = build_generator(rates, p, delta_g, delta_e, options)?;
    let mut opts = OdeOptions::with_tol(tol);
    let mut breakpoints = Vec::new();
    if ramp.tau_r > 0.0 {
        opts.max_step = ramp.tau_r / RAMP_SUBSTEPS;
        opts.max_step_until = ramp.tau_r;
        breakpoints.push(ramp.tau_r);
    }
    let full_matrix = full.matrix;
    let mut err = None;
    let rhs = |t: f64, y: &Vector8| -> Vector8 {
        let s = ramp.scale(t);
        if s == 1.0 {
            return full_matrix * y;
        }
        match build_generator(&rates.with_intensity(s), p, delta_g, delta_e, options) {
            Ok(g) => g.matrix * y,
            Err(e) => {
                err.get_or_insert(e);
                Vector8::zeros()
            }
        }
    };
    let (ys, _) = integrate(rhs, 0.0, initial.to_vector(), times, &breakpoints, &opts)?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(Trajectory {
        times: times.to_vec(),
        states: ys.iter().map(ReducedState::from_vector).collect(),
        method: Method::Ramp,
        generator: full,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn generator(gamma: [[f64; 2]; 2], nbar: [f64; 2], p: f64, dg: f64, de: f64) -> Generator {
        let rates = RateSet::from_gamma(gamma, nbar).unwrap();
        build_generator(&rates, &AlignmentSet::uniform(p), dg, de, Default::default()).unwrap()
    }

    #[test]
    fn grids() {
        let g = log_grid(1e-2, 1e4, 7).unwrap();
        assert_eq!(g.len(), 7);
        assert_abs_diff_eq!(g[3], 10.0, epsilon = 1e-12);
        let l = linear_grid(0.0, 1.0, 5).unwrap();
        assert_eq!(l, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(log_grid(0.0, 1.0, 5).is_err());
    }

    #[test]
    fn zero_generator_is_constant() {
        let x0 = ReducedState {
            pop_g1: 0.3,
            pop_e2: 0.7,
            coh_g_re: 0.1,
            ..Default::default()
        };
        let traj = propagate_eigen(&Generator::zero(), &x0, &[0.0, 1.0, 1e3]).unwrap();
        for s in &traj.states {
            assert!(s.max_abs_diff(&x0) < 1e-15);
        }
    }

    #[test]
    fn equilibrium_relaxation_reaches_thermal_state() {
        let gen = generator([[1.0; 2]; 2], [0.05; 2], 1.0, 0.01, 0.01);
        let traj = propagate_eigen(&gen, &ReducedState::ground_mixture(), &[1e4, 1e6]).unwrap();
        let s = traj.last().unwrap();
        let e = 0.05 / (2.0 * 1.1);
        assert_abs_diff_eq!(s.pop_e1, e, epsilon = 1e-8);
        assert_abs_diff_eq!(s.pop_e2, e, epsilon = 1e-8);
        assert!(s.coh_g_abs() < 1e-9 && s.coh_e_abs() < 1e-9);
    }

    #[test]
    fn secular_decay_without_pumping() {
        // p = 0, n̄ = 0: the excited population of e1 decays as e^{-(γ11 + γ21) t}.
        let gen = generator([[0.7, 0.2], [0.4, 0.9]], [0.0; 2], 0.0, 0.3, 0.1);
        let x0 = ReducedState {
            pop_e1: 1.0,
            ..Default::default()
        };
        let times: Vec<f64> = (1..40).map(|k| 0.25 * k as f64).collect();
        let traj = propagate_ode(&gen, &x0, &times, 1e-11).unwrap();
        for (t, s) in times.iter().zip(&traj.states) {
            assert_abs_diff_eq!(s.pop_e1, (-1.1 * t).exp(), epsilon = 1e-10);
            assert!((s.trace() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn eigen_semigroup() {
        let gen = generator([[1.5; 2], [0.5; 2]], [0.05; 2], 1.0, 0.3, 0.1);
        let x0 = ReducedState::ground_mixture();
        let (t1, t2) = (3.7, 11.2);
        let once = propagate_eigen(&gen, &x0, &[t1 + t2]).unwrap();
        let half = propagate_eigen(&gen, &x0, &[t1]).unwrap();
        let twice = propagate_eigen(&gen, half.last().unwrap(), &[t2]).unwrap();
        assert!(once.last().unwrap().max_abs_diff(twice.last().unwrap()) < 1e-10);
    }

    #[test]
    fn eigen_matches_ode_on_mixed_regime() {
        let gen = generator([[1.5; 2], [0.5; 2]], [0.05; 2], 1.0, 0.3, 0.0);
        let times = log_grid(1e-2, 1e3, 200).unwrap();
        let x0 = ReducedState::ground_mixture();
        let a = propagate_eigen(&gen, &x0, &times).unwrap();
        let b = propagate_ode(&gen, &x0, &times, 1e-12).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-8);
    }

    #[test]
    fn bad_times_are_rejected() {
        let gen = Generator::zero();
        let x0 = ReducedState::ground_mixture();
        assert!(propagate_eigen(&gen, &x0, &[]).is_err());
        assert!(propagate_eigen(&gen, &x0, &[1.0, 0.5]).is_err());
        assert!(propagate_ode(&gen, &x0, &[-1.0, 0.5], 1e-9).is_err());
        assert!(propagate_ode(&gen, &x0, &[1.0], 0.0).is_err());
    }

    #[test]
    fn steady_state_single_bath_is_thermal() {
        let gen = generator([[1.5; 2], [0.5; 2]], [0.05; 2], 1.0, 0.3, 0.1);
        let ss = steady_state(&gen).unwrap();
        assert!(ss.is_unique());
        let s = ss.unique().unwrap();
        let e = 0.05 / (2.0 * 1.1);
        assert_abs_diff_eq!(s.pop_e1, e, epsilon = 1e-12);
        assert_abs_diff_eq!(s.pop_g1, 0.5 - e, epsilon = 1e-12);
        assert!(s.coh_g_abs() < 1e-9 && s.coh_e_abs() < 1e-9);
        assert!(gen.apply(&s).to_vector().amax() < 1e-10);
    }

    #[test]
    fn two_baths_give_coherent_steady_state() {
        let gen = generator([[1.5; 2], [0.5; 2]], [0.05, 0.10], 1.0, 0.3, 0.1);
        let s = steady_state(&gen).unwrap().unique().unwrap();
        assert!(s.coh_g_abs() > 1e-4, "|ρ_g1g2| = {}", s.coh_g_abs());
    }

    #[test]
    fn degenerate_parallel_system_has_dark_states() {
        use crate::dipole_geometry::{alignment_set_4ls, DipoleVector};
        let rates = RateSet::uniform(1.0, 0.05).unwrap();
        for signs in 0..8u32 {
            let d = |k: u32| {
                let s = if k > 0 && signs >> (k - 1) & 1 == 1 { -1.0 } else { 1.0 };
                DipoleVector::new(format!("d{k}"), [0.0, 0.0, s])
            };
            let p = alignment_set_4ls(&d(0), &d(1), &d(2), &d(3)).unwrap();
            let gen = build_generator(&rates, &p, 0.0, 0.0, Default::default()).unwrap();
            let ss = steady_state(&gen).unwrap();
            assert!(ss.null_dimension > 1, "{p:?}: dimension {}", ss.null_dimension);
            assert!(ss.state.is_none());
            assert!(ss.unique().is_err());
        }
    }

    #[test]
    fn ramp_profiles() {
        assert_eq!(RampProfile::SUDDEN.scale(0.0), 1.0);
        let lin = RampProfile::linear(10.0);
        assert_eq!(lin.scale(0.0), 0.0);
        assert_eq!(lin.scale(5.0), 0.5);
        assert_eq!(lin.scale(12.0), 1.0);
        let ex = RampProfile::exponential(10.0);
        assert_eq!(ex.scale(0.0), 0.0);
        assert_abs_diff_eq!(ex.scale(10.0 - 1e-12), 1.0, epsilon = 1e-10);
        assert!(ex.scale(2.0) > 0.2 * 1.0);
        assert!(RampProfile { shape: RampShape::Linear, tau_r: 0.0 }.validate().is_err());
        assert!(RampProfile { shape: RampShape::Sudden, tau_r: 1.0 }.validate().is_err());
        assert!(RampProfile::linear(-1.0).validate().is_err());
    }

    #[test]
    fn sudden_ramp_equals_static_propagation() {
        let rates = RateSet::from_gamma([[1.5; 2], [0.5; 2]], [0.05; 2]).unwrap();
        let p = AlignmentSet::uniform(1.0);
        let gen = build_generator(&rates, &p, 0.3, 0.1, Default::default()).unwrap();
        let times = linear_grid(0.0, 50.0, 101).unwrap();
        let x0 = ReducedState::ground_mixture();
        let a = propagate_ode(&gen, &x0, &times, 1e-10).unwrap();
        let b = propagate_ramp(&rates, &p, 0.3, 0.1, Default::default(), &RampProfile::SUDDEN, &x0, &times, 1e-10)
            .unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(b.method, Method::Ramp);
    }

    #[test]
    fn ramp_keeps_trace() {
        let rates = RateSet::from_gamma([[1.5; 2], [0.5; 2]], [0.05; 2]).unwrap();
        let p = AlignmentSet::uniform(1.0);
        let times = linear_grid(0.0, 60.0, 61).unwrap();
        let traj = propagate_ramp(&rates, &p, 0.3, 0.0, Default::default(), &RampProfile::linear(20.0), &ReducedState::ground_mixture(), &times, 1e-10)
            .unwrap();
        for s in &traj.states {
            assert!((s.trace() - 1.0).abs() < 1e-9);
        }
        // Nothing is pumped at t = 0, so the start is flat.
        assert!(traj.states[1].pop_e1 < 0.01);
    }
}
