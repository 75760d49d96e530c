//! Classical incoherent fields with a randomly diffusing phase, the
//! first-order excitation amplitudes they generate, and ensemble
//! interference visibilities.
//!
//! A realization is E(t) = A(t) e^{iφ(t)} with φ a Wiener process of variance
//! rate 2/τ_c, so that ⟨e^{i(φ(t) − φ(t′))}⟩ = e^{−|t−t′|/τ_c}. Only ensemble
//! averages are meaningful; single realizations are not.

use std::f64::consts::PI;

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type C64 = Complex<f64>;

/// Correlation time of a perfectly coherent field.
pub const COHERENT: f64 = f64::INFINITY;
pub const MIN_REALIZATIONS: usize = 100;
/// Default visibility window width in units of τ_c.
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.02;
/// Default samples per visibility window.
pub const DEFAULT_WINDOW_SAMPLES: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePath {
    pub dt: f64,
    pub tau_c: f64,
    pub seed: u64,
    pub stream: u64,
    /// φ(k·dt), k = 0..n
    pub phases: Vec<f64>,
}

impl PhasePath {
    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_sampling(tau_c: f64, dt: f64, t_end: f64) -> Result<usize> {
    if !(tau_c > 0.0) {
        return Err(Error::Sampling(format!("correlation time must be > 0, got {tau_c}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Sampling(format!("time step must be > 0, got {dt}")));
    }
    if dt > tau_c / 10.0 {
        return Err(Error::Sampling(format!(
            "time step {dt} is coarser than τ_c/10 = {}",
            tau_c / 10.0
        )));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Sampling(format!("end time must be ≥ 0, got {t_end}")));
    }
    let steps = (t_end / dt).round();
    if steps > 1e9 {
        return Err(Error::Sampling(format!("{steps} steps requested")));
    }
    Ok(steps as usize + 1)
}

/// Phase path on the grid k·dt, 0 ≤ k·dt ≤ t_end, from stream 0 of `seed`.
pub fn sample_phase_path(tau_c: f64, dt: f64, t_end: f64, seed: u64) -> Result<PhasePath> {
    sample_phase_path_stream(tau_c, dt, t_end, seed, 0)
}

/// Same as [`sample_phase_path`] drawing from an independent stream; ensemble
/// drivers use stream = realization index.
pub fn sample_phase_path_stream(tau_c: f64, dt: f64, t_end: f64, seed: u64, stream: u64) -> Result<PhasePath> {
    let n = check_sampling(tau_c, dt, t_end)?;
    let mut rng = rng_for(seed, stream);
    let mut phases = Vec::with_capacity(n);
    let mut phi = rng.random::<f64>() * 2.0 * PI;
    phases.push(phi);
    if tau_c.is_finite() {
        let sigma = (2.0 * dt / tau_c).sqrt();
        for _ in 1..n {
            let z: f64 = rng.sample(StandardNormal);
            phi += sigma * z;
            phases.push(phi);
        }
    } else {
        phases.resize(n, phi);
    }
    Ok(PhasePath {
        dt,
        tau_c,
        seed,
        stream,
        phases,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    /// Rectangular pulse on [0, τ_p).
    Pulse,
    /// Switched on at t = 0 (linearly over `turn_on`, if given) and left on.
    Step,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSpec {
    pub kind: EnvelopeKind,
    #[serde(default)]
    pub tau_p: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub turn_on: f64,
}

impl EnvelopeSpec {
    pub fn pulse(tau_p: f64, amplitude: f64) -> Self {
        Self {
            kind: EnvelopeKind::Pulse,
            tau_p,
            amplitude,
            turn_on: 0.0,
        }
    }

    pub fn step(amplitude: f64) -> Self {
        Self {
            kind: EnvelopeKind::Step,
            tau_p: 0.0,
            amplitude,
            turn_on: 0.0,
        }
    }

    pub fn ramped_step(amplitude: f64, turn_on: f64) -> Self {
        Self {
            turn_on,
            ..Self::step(amplitude)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() {
            return Err(Error::Sampling(format!("amplitude must be finite, got {}", self.amplitude)));
        }
        match self.kind {
            EnvelopeKind::Pulse if !(self.tau_p > 0.0 && self.tau_p.is_finite()) => Err(Error::Sampling(
                format!("pulse duration must be > 0, got {}", self.tau_p),
            )),
            EnvelopeKind::Step if !(self.turn_on >= 0.0 && self.turn_on.is_finite()) => Err(Error::Sampling(
                format!("turn-on time must be ≥ 0, got {}", self.turn_on),
            )),
            _ => Ok(()),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self.kind {
            EnvelopeKind::Pulse => {
                if t < self.tau_p {
                    self.amplitude
                } else {
                    0.0
                }
            }
            EnvelopeKind::Step => {
                if self.turn_on > 0.0 && t < self.turn_on {
                    self.amplitude * t / self.turn_on
                } else {
                    self.amplitude
                }
            }
        }
    }

    pub fn sample(&self, dt: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| self.value(k as f64 * dt)).collect()
    }
}

/// f(t_k) = Σ_{m<k} A(t_m) e^{iφ(t_m)} e^{iΔω t_m} dt for an envelope already
/// sampled on the path grid. f(0) = 0.
pub fn excitation_amplitude_sampled(envelope: &[f64], path: &PhasePath, detuning: f64) -> Result<Vec<C64>> {
    if envelope.len() != path.len() {
        return Err(Error::Sampling(format!(
            "envelope has {} samples, phase path {}",
            envelope.len(),
            path.len()
        )));
    }
    let mut out = Vec::with_capacity(path.len());
    let mut acc = C64::new(0.0, 0.0);
    for (k, (&a, &phi)) in envelope.iter().zip(&path.phases).enumerate() {
        out.push(acc);
        let t = path.time(k);
        acc += C64::from_polar(a * path.dt, phi + detuning * t);
    }
    Ok(out)
}

pub fn excitation_amplitude(env: &EnvelopeSpec, path: &PhasePath, detuning: f64) -> Result<Vec<C64>> {
    env.validate()?;
    excitation_amplitude_sampled(&env.sample(path.dt, path.len()), path, detuning)
}

/// Ensemble estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n_realizations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityOptions {
    /// Width of both windows; default τ_c · DEFAULT_WINDOW_FRACTION.
    pub window_width: Option<f64>,
    /// Start of the first window.
    pub first_window_start: f64,
    /// Integration step; default window_width / DEFAULT_WINDOW_SAMPLES.
    pub dt: Option<f64>,
    pub detuning: f64,
}

impl Default for VisibilityOptions {
    fn default() -> Self {
        Self {
            window_width: None,
            first_window_start: 0.0,
            dt: None,
            detuning: 0.0,
        }
    }
}

/// Closed-form visibility of the Wiener-phase ensemble for a constant
/// envelope, windows of width w whose starts are `separation` apart.
pub fn expected_visibility(tau_c: f64, window_width: f64, separation: f64) -> f64 {
    if !tau_c.is_finite() {
        return 1.0;
    }
    let x = window_width / tau_c;
    let d = separation.abs() / tau_c;
    // ∫₀^w∫₀^w e^{-|s−s′|/τ} in units of τ²
    let same = 2.0 * self_overlap(x);
    let cross = if d >= x {
        (-d).exp() * 4.0 * (x / 2.0).sinh().powi(2)
    } else {
        // Overlapping windows: overlap part plus two disjoint parts.
        let o = x - d;
        let overlap = 2.0 * self_overlap(o);
        overlap + cross_disjoint(d, o)
    };
    cross / same
}

/// x − 1 + e^{−x} without cancellation at small x.
fn self_overlap(x: f64) -> f64 {
    if x < 1e-3 {
        x * x * (0.5 - x / 6.0 + x * x / 24.0)
    } else {
        x - 1.0 + (-x).exp()
    }
}

/// Cross integral for overlapping windows: splits [0,w] = [0,d) ∪ [d,w] and
/// [d,d+w] = [d,w] ∪ (w,w+d].
fn cross_disjoint(d: f64, o: f64) -> f64 {
    // a = [0,d), b = [d,w] (length o), c = (w, w+d]
    // cross = ∫_{a∪b}∫_{b∪c} = ab + ac + bb + bc, bb handled by the caller.
    let pair = |len1: f64, len2: f64, gap: f64| (-gap).exp() * (1.0 - (-len1).exp()) * (1.0 - (-len2).exp());
    pair(d, o, 0.0) + pair(d, d, o) + pair(o, d, 0.0)
}

struct WindowSums {
    c1: C64,
    c2: C64,
}

fn window_sum(
    path: &PhasePath,
    env: &EnvelopeSpec,
    start: usize,
    len: usize,
    detuning: f64,
) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for k in start..start + len {
        let t = path.time(k);
        acc += C64::from_polar(env.value(t) * path.dt, path.phases[k] + detuning * t);
    }
    acc
}

fn check_realizations(n: usize) -> Result<()> {
    if n < MIN_REALIZATIONS {
        return Err(Error::Sampling(format!(
            "need at least {MIN_REALIZATIONS} realizations, got {n}"
        )));
    }
    Ok(())
}

/// Normalised ensemble cross term |⟨c₁c₂*⟩| / √(⟨|c₁|²⟩⟨|c₂|²⟩) between the
/// excitation accumulated in two windows whose starts are `separation` apart.
pub fn interference_visibility(
    env: &EnvelopeSpec,
    tau_c: f64,
    separation: f64,
    n_realizations: usize,
    seed: u64,
) -> Result<Estimate> {
    interference_visibility_with(env, tau_c, separation, n_realizations, seed, &VisibilityOptions::default())
}

pub fn interference_visibility_with(
    env: &EnvelopeSpec,
    tau_c: f64,
    separation: f64,
    n_realizations: usize,
    seed: u64,
    opts: &VisibilityOptions,
) -> Result<Estimate> {
    env.validate()?;
    check_realizations(n_realizations)?;
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::Sampling(format!("window separation must be ≥ 0, got {separation}")));
    }
    let width = match opts.window_width {
        Some(w) => w,
        None if tau_c.is_finite() => tau_c * DEFAULT_WINDOW_FRACTION,
        None => {
            return Err(Error::Sampling(
                "a coherent field needs an explicit window width".into(),
            ))
        }
    };
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::Sampling(format!("degenerate window width {width}")));
    }
    let dt = opts.dt.unwrap_or(width / DEFAULT_WINDOW_SAMPLES as f64);
    let len = (width / dt).round() as usize;
    if len == 0 {
        return Err(Error::Sampling("window is shorter than one time step".into()));
    }
    let s1 = (opts.first_window_start / dt).round() as usize;
    let s2 = ((opts.first_window_start + separation) / dt).round() as usize;
    let t_end = (s2 + len) as f64 * dt;
    check_sampling(tau_c, dt, t_end)?;

    let sums: Vec<Result<WindowSums>> = (0..n_realizations as u64)
        .into_par_iter()
        .map(|i| {
            let path = sample_phase_path_stream(tau_c, dt, t_end, seed, i)?;
            Ok(WindowSums {
                c1: window_sum(&path, env, s1, len, opts.detuning),
                c2: window_sum(&path, env, s2, len, opts.detuning),
            })
        })
        .collect();
    let sums: Vec<WindowSums> = sums.into_iter().collect::<Result<_>>()?;

    let mut s12 = C64::new(0.0, 0.0);
    let (mut s11, mut s22) = (0.0, 0.0);
    for w in &sums {
        s12 += w.c1 * w.c2.conj();
        s11 += w.c1.norm_sqr();
        s22 += w.c2.norm_sqr();
    }
    if !(s11 > 0.0 && s22 > 0.0) {
        return Err(Error::Sampling(
            "a window collects no excitation (envelope is zero there)".into(),
        ));
    }
    let value = s12.norm() / (s11 * s22).sqrt();

    // Leave-one-out jackknife of the ratio.
    let n = sums.len() as f64;
    let loo: Vec<f64> = sums
        .iter()
        .map(|w| {
            let num = (s12 - w.c1 * w.c2.conj()).norm();
            let den = ((s11 - w.c1.norm_sqr()) * (s22 - w.c2.norm_sqr())).sqrt();
            num / den
        })
        .collect();
    let mean = loo.iter().sum::<f64>() / n;
    let var = loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>() * (n - 1.0) / n;
    Ok(Estimate {
        value,
        stderr: var.sqrt(),
        n_realizations,
    })
}

/// ⟨|f(τ_p)|²⟩ over |f|² of the coherent pulse, (A τ_p)² at zero detuning.
pub fn pulse_coherence(
    tau_c: f64,
    tau_p: f64,
    amplitude: f64,
    n_realizations: usize,
    seed: u64,
) -> Result<Estimate> {
    let env = EnvelopeSpec::pulse(tau_p, amplitude);
    env.validate()?;
    check_realizations(n_realizations)?;
    if amplitude == 0.0 {
        return Err(Error::Sampling("coherent reference vanishes for zero amplitude".into()));
    }
    let dt = (tau_c / 10.0).min(tau_p / 100.0);
    let steps = (tau_p / dt).round() as usize;
    let dt = tau_p / steps as f64;
    let values: Vec<Result<f64>> = (0..n_realizations as u64)
        .into_par_iter()
        .map(|i| {
            let path = sample_phase_path_stream(tau_c, dt, tau_p, seed, i)?;
            let f = excitation_amplitude(&env, &path, 0.0)?;
            Ok(f[f.len() - 1].norm_sqr())
        })
        .collect();
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    let reference = (amplitude * tau_p).powi(2);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(Estimate {
        value: mean / reference,
        stderr: (var / n).sqrt() / reference,
        n_realizations,
    })
}

/// Closed form of [`pulse_coherence`]: 2(x − 1 + e^{−x})/x², x = τ_p/τ_c.
pub fn expected_pulse_coherence(tau_c: f64, tau_p: f64) -> f64 {
    if !tau_c.is_finite() {
        return 1.0;
    }
    let x = tau_p / tau_c;
    2.0 * self_overlap(x) / (x * x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseRow {
    pub tau_p: f64,
    pub ratio: f64,
    pub coherence: Estimate,
    pub expected: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub turn_on: f64,
    pub separation: f64,
    pub visibility: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulsedVsSuddenReport {
    pub tau_c: f64,
    pub pulses: Vec<PulseRow>,
    pub steps: Vec<StepRow>,
}

/// Separations (in τ_c) between an early window [0, τ_c] and later ones for
/// step turn-on.
pub const STEP_SEPARATIONS: [f64; 2] = [20.0, 50.0];
/// Turn-on times (in τ_c) compared for step envelopes.
pub const STEP_TURN_ONS: [f64; 3] = [0.0, 1.0, 10.0];

/// Pulse coherence against τ_p/τ_c, and early/late window visibility for
/// step envelopes with several turn-on speeds.
pub fn pulsed_vs_sudden_report(
    tau_c: f64,
    tau_p_grid: &[f64],
    n_realizations: usize,
    seed: u64,
) -> Result<PulsedVsSuddenReport> {
    if !(tau_c > 0.0 && tau_c.is_finite()) {
        return Err(Error::Sampling(format!("correlation time must be finite and > 0, got {tau_c}")));
    }
    if tau_p_grid.is_empty() {
        return Err(Error::Sampling("empty pulse-duration grid".into()));
    }
    let pulses = tau_p_grid
        .iter()
        .map(|&tau_p| {
            Ok(PulseRow {
                tau_p,
                ratio: tau_p / tau_c,
                coherence: pulse_coherence(tau_c, tau_p, 1.0, n_realizations, seed)?,
                expected: expected_pulse_coherence(tau_c, tau_p),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let opts = VisibilityOptions {
        window_width: Some(tau_c),
        dt: Some(tau_c / 20.0),
        ..Default::default()
    };
    let mut steps = Vec::new();
    for &on in &STEP_TURN_ONS {
        for &sep in &STEP_SEPARATIONS {
            let env = EnvelopeSpec::ramped_step(1.0, on * tau_c);
            steps.push(StepRow {
                turn_on: on * tau_c,
                separation: sep * tau_c,
                visibility: interference_visibility_with(&env, tau_c, sep * tau_c, n_realizations, seed, &opts)?,
            });
        }
    }
    Ok(PulsedVsSuddenReport { tau_c, pulses, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn coherent_path_is_constant() {
        let p = sample_phase_path(COHERENT, 0.1, 10.0, 3).unwrap();
        assert_eq!(p.len(), 101);
        assert!(p.phases.iter().all(|&x| x == p.phases[0]));
    }

    #[test]
    fn seeds_and_streams() {
        let a = sample_phase_path(1.0, 0.01, 5.0, 7).unwrap();
        let b = sample_phase_path(1.0, 0.01, 5.0, 7).unwrap();
        let c = sample_phase_path(1.0, 0.01, 5.0, 8).unwrap();
        let d = sample_phase_path_stream(1.0, 0.01, 5.0, 7, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.phases, c.phases);
        assert_ne!(a.phases, d.phases);
    }

    #[test]
    fn coarse_step_is_rejected() {
        assert!(matches!(sample_phase_path(1.0, 0.2, 5.0, 1), Err(Error::Sampling(_))));
        assert!(sample_phase_path(0.0, 0.01, 5.0, 1).is_err());
    }

    #[test]
    fn coherence_function_of_the_phase_process() {
        let n = 10_000;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            let p = sample_phase_path_stream(1.0, 0.05, 1.0, 11, i).unwrap();
            acc += C64::from_polar(1.0, p.phases[0] - p.phases[p.len() - 1]);
        }
        let m = (acc / n as f64).norm();
        assert!((m - (-1.0f64).exp()).abs() < 3.0 / (n as f64).sqrt(), "{m}");
    }

    #[test]
    fn resonant_coherent_drive_grows_linearly() {
        let p = sample_phase_path(COHERENT, 0.01, 3.0, 5).unwrap();
        let f = excitation_amplitude(&EnvelopeSpec::step(0.7), &p, 0.0).unwrap();
        for (k, z) in f.iter().enumerate() {
            assert_abs_diff_eq!(z.norm(), 0.7 * p.time(k), epsilon = 1e-12);
        }
        let zero = excitation_amplitude(&EnvelopeSpec::step(0.0), &p, 0.3).unwrap();
        assert!(zero.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn amplitude_is_linear_in_envelope() {
        let p = sample_phase_path(2.0, 0.01, 3.0, 9).unwrap();
        let a = excitation_amplitude(&EnvelopeSpec::pulse(1.5, 1.0), &p, 0.4).unwrap();
        let b = excitation_amplitude(&EnvelopeSpec::pulse(1.5, -2.5), &p, 0.4).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x * -2.5 - y).norm() < 1e-12);
        }
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let p = sample_phase_path(2.0, 0.01, 1.0, 9).unwrap();
        assert!(excitation_amplitude_sampled(&[1.0; 10], &p, 0.0).is_err());
        assert!(EnvelopeSpec::pulse(0.0, 1.0).validate().is_err());
    }

    #[test]
    fn same_window_has_unit_visibility() {
        let v = interference_visibility(&EnvelopeSpec::step(1.0), 1.0, 0.0, 200, 1).unwrap();
        assert_eq!(v.value, 1.0);
    }

    #[test]
    fn visibility_is_reproducible() {
        let env = EnvelopeSpec::step(1.0);
        let a = interference_visibility(&env, 1.0, 0.5, 300, 42).unwrap();
        let b = interference_visibility(&env, 1.0, 0.5, 300, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_windows() {
        let env = EnvelopeSpec::pulse(1.0, 1.0);
        assert!(interference_visibility(&env, 1.0, 5.0, 200, 1).is_err());
        assert!(interference_visibility(&EnvelopeSpec::step(1.0), 1.0, 1.0, 10, 1).is_err());
        let opts = VisibilityOptions {
            window_width: Some(0.0),
            ..Default::default()
        };
        assert!(interference_visibility_with(&EnvelopeSpec::step(1.0), 1.0, 1.0, 200, 1, &opts).is_err());
    }

    #[test]
    fn closed_forms() {
        assert_abs_diff_eq!(expected_visibility(1.0, 1e-6, 1.0), (-1.0f64).exp(), epsilon = 1e-6);
        assert_abs_diff_eq!(expected_visibility(1.0, 0.5, 0.0), 1.0, epsilon = 1e-12);
        // continuity at d = w
        let a = expected_visibility(1.0, 0.5, 0.5 - 1e-9);
        let b = expected_visibility(1.0, 0.5, 0.5 + 1e-9);
        assert_abs_diff_eq!(a, b, epsilon = 1e-7);
        assert_abs_diff_eq!(expected_pulse_coherence(1.0, 1e-5), 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(expected_pulse_coherence(1.0, 2.0), (2.0 - 1.0 + (-2.0f64).exp()) / 2.0, epsilon = 1e-15);
    }
}
