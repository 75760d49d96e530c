//! Damping regimes, oscillation metrics, quasi-stationary plateaus and
//! physicality audits of trajectories.

use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dipole_geometry::AlignmentSet;
use crate::liouvillian::ReducedState;
use crate::propagation::{linear_grid, propagate, Trajectory};
use crate::rates::RateSet;
use crate::{Error, Result};

pub const DEFAULT_MARGIN: f64 = 0.2;
pub const MIN_OSCILLATION_SAMPLES: usize = 64;
/// Relative variation allowed inside a plateau.
pub const PLATEAU_VARIATION: f64 = 0.05;
/// A plateau must sit this far above the reference level.
pub const PLATEAU_CONTRAST: f64 = 10.0;
pub const PLATEAU_MIN_DECADES: f64 = 0.5;
/// Relative amplitude change per Δ_e doubling below which the suppression is
/// considered saturated.
pub const SATURATION_THRESHOLD: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    PopG1,
    PopG2,
    PopE1,
    PopE2,
    CohGRe,
    CohGIm,
    CohGAbs,
    CohERe,
    CohEIm,
    CohEAbs,
}

impl Observable {
    pub const ALL: [Observable; 10] = [
        Observable::PopG1,
        Observable::PopG2,
        Observable::PopE1,
        Observable::PopE2,
        Observable::CohGRe,
        Observable::CohGIm,
        Observable::CohGAbs,
        Observable::CohERe,
        Observable::CohEIm,
        Observable::CohEAbs,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Observable::PopG1 => "pop_g1",
            Observable::PopG2 => "pop_g2",
            Observable::PopE1 => "pop_e1",
            Observable::PopE2 => "pop_e2",
            Observable::CohGRe => "coh_g_re",
            Observable::CohGIm => "coh_g_im",
            Observable::CohGAbs => "coh_g_abs",
            Observable::CohERe => "coh_e_re",
            Observable::CohEIm => "coh_e_im",
            Observable::CohEAbs => "coh_e_abs",
        }
    }

    pub fn value(&self, s: &ReducedState) -> f64 {
        match self {
            Observable::PopG1 => s.pop_g1,
            Observable::PopG2 => s.pop_g2,
            Observable::PopE1 => s.pop_e1,
            Observable::PopE2 => s.pop_e2,
            Observable::CohGRe => s.coh_g_re,
            Observable::CohGIm => s.coh_g_im,
            Observable::CohGAbs => s.coh_g_abs(),
            Observable::CohERe => s.coh_e_re,
            Observable::CohEIm => s.coh_e_im,
            Observable::CohEAbs => s.coh_e_abs(),
        }
    }

    pub fn series(&self, traj: &Trajectory) -> Vec<f64> {
        traj.states.iter().map(|s| self.value(s)).collect()
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Observable::ALL
            .iter()
            .copied()
            .find(|o| o.label() == s)
            .ok_or_else(|| Error::Analysis(format!("unknown observable `{s}`")))
    }
}

// ---------------------------------------------------------------------------
// Regimes

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Underdamped,
    Overdamped,
    Crossover,
}

impl Regime {
    pub fn from_ratio(ratio: f64, margin: f64) -> Self {
        if ratio > 1.0 + margin {
            Regime::Underdamped
        } else if ratio < 1.0 - margin {
            Regime::Overdamped
        } else {
            Regime::Crossover
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub ground_regime: Regime,
    pub excited_regime: Regime,
    /// Δ_g / Γ_g
    pub ground_ratio: f64,
    /// Δ_e / Γ_e
    pub excited_ratio: f64,
    pub gamma_g: f64,
    pub gamma_e: f64,
    pub margin: f64,
    /// 2√(Δ_e² + (1−p²)γ₁γ₂)/(γ₁+γ₂) for the V subsystem formed by each ground
    /// state with both excited states; small values mean overdamped.
    pub v_system_parameter: Option<[f64; 2]>,
}

pub fn classify_regime(rates: &RateSet, delta_g: f64, delta_e: f64) -> RegimeReport {
    classify_regime_with(rates, delta_g, delta_e, None, DEFAULT_MARGIN)
}

pub fn classify_regime_with(
    rates: &RateSet,
    delta_g: f64,
    delta_e: f64,
    alignment: Option<&AlignmentSet>,
    margin: f64,
) -> RegimeReport {
    // Total out-rate of each excited state e_i and each ground state g_i.
    let gamma_e = (0..2)
        .map(|i| (0..2).map(|j| rates.emission(j, i)).sum::<f64>())
        .sum::<f64>()
        / 2.0;
    let gamma_g = (0..2)
        .map(|i| (0..2).map(|j| rates.r[i][j]).sum::<f64>())
        .sum::<f64>()
        / 2.0;
    let ratio = |d: f64, g: f64| if g > 0.0 { d / g } else { f64::INFINITY };
    let ground_ratio = ratio(delta_g, gamma_g);
    let excited_ratio = ratio(delta_e, gamma_e);
    let v_system_parameter = alignment.map(|p| {
        let pg = p.p_ground();
        std::array::from_fn(|i| {
            let (g1, g2) = (rates.gamma[i][0], rates.gamma[i][1]);
            let s = g1 + g2;
            if s > 0.0 {
                2.0 * (delta_e * delta_e + (1.0 - pg[i] * pg[i]) * g1 * g2).sqrt() / s
            } else {
                f64::INFINITY
            }
        })
    });
    RegimeReport {
        ground_regime: Regime::from_ratio(ground_ratio, margin),
        excited_regime: Regime::from_ratio(excited_ratio, margin),
        ground_ratio,
        excited_ratio,
        gamma_g,
        gamma_e,
        margin,
        v_system_parameter,
    }
}

// ---------------------------------------------------------------------------
// Oscillations

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationMetrics {
    pub observable: Observable,
    /// Angular frequency of the fitted damped sinusoid.
    pub dominant_frequency: f64,
    /// Peak-to-trough of the detrended observable.
    pub amplitude: f64,
    pub n_extrema: usize,
    /// 1/κ of the fitted envelope e^{-κt}; infinite for an undamped fit.
    pub decay_time: f64,
}

/// Uniformly resampled window of a series.
struct Window {
    t: Vec<f64>,
    y: Vec<f64>,
}

fn extract_window(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<Window> {
    let (a, b) = window;
    if !(b > a) {
        return Err(Error::Analysis(format!("empty analysis window [{a}, {b}]")));
    }
    if times.is_empty() || a < times[0] - 1e-12 || b > times[times.len() - 1] + 1e-12 {
        return Err(Error::Analysis(format!(
            "window [{a}, {b}] is outside the trajectory support"
        )));
    }
    let idx: Vec<usize> = (0..times.len())
        .filter(|&k| times[k] >= a - 1e-12 && times[k] <= b + 1e-12)
        .collect();
    if idx.len() < MIN_OSCILLATION_SAMPLES {
        return Err(Error::Analysis(format!(
            "{} samples in window, need at least {MIN_OSCILLATION_SAMPLES}",
            idx.len()
        )));
    }
    let n = idx.len();
    let (t0, t1) = (times[idx[0]], times[idx[n - 1]]);
    let dt = (t1 - t0) / (n - 1) as f64;
    let mut t = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut k = idx[0];
    for m in 0..n {
        let tm = if m == n - 1 { t1 } else { t0 + dt * m as f64 };
        while k + 1 < times.len() && times[k + 1] < tm {
            k += 1;
        }
        let v = if k + 1 < times.len() && times[k + 1] > times[k] && tm > times[k] {
            let w = (tm - times[k]) / (times[k + 1] - times[k]);
            values[k] * (1.0 - w) + values[k + 1] * w
        } else {
            values[k]
        };
        t.push(tm);
        y.push(v);
    }
    Ok(Window { t, y })
}

/// Hann-windowed, zero-padded spectrum of the linearly detrended signal;
/// returns the angular frequency of the largest non-DC peak.
fn spectral_peak(t: &[f64], y: &[f64]) -> Option<f64> {
    let n = y.len();
    let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
    let (slope, intercept) = linear_fit(t, y);
    let padded = (8 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); padded];
    for k in 0..n {
        let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos();
        buf[k] = Complex::new(w * (y[k] - slope * t[k] - intercept), 0.0);
    }
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let power: Vec<f64> = buf[..padded / 2].iter().map(|c| c.norm_sqr()).collect();
    // Ignore the Hann main lobe around DC (two bins of the unpadded length).
    let skip = 2 * padded / n;
    let (k, &p) = power
        .iter()
        .enumerate()
        .skip(skip.max(1))
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(p > 0.0) {
        return None;
    }
    let mut kf = k as f64;
    if k + 1 < power.len() {
        let (a, b, c) = (power[k - 1].ln(), power[k].ln(), power[k + 1].ln());
        let den = a - 2.0 * b + c;
        if den.abs() > 0.0 && den.is_finite() {
            kf += 0.5 * (a - c) / den;
        }
    }
    Some(2.0 * std::f64::consts::PI * kf / (padded as f64 * dt))
}

fn linear_fit(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|x| (x - mt).powi(2)).sum();
    let sxy: f64 = t.iter().zip(y).map(|(x, v)| (x - mt) * (v - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mt)
}

const FIT_BASIS: usize = 5;
const MAX_FIT_SAMPLES: usize = 400;

#[derive(Clone, Copy, Debug)]
struct SineFit {
    omega: f64,
    kappa: f64,
    mu: f64,
    residual: f64,
}

/// Residual of the best linear combination of
/// {1, τ, e^{-μτ}, e^{-κτ}cos ωτ, e^{-κτ}sin ωτ}, τ = t − t₀: a relaxing
/// baseline plus one damped sinusoid.
fn projected_residual(t: &[f64], y: &[f64], omega: f64, kappa: f64, mu: f64) -> f64 {
    use nalgebra::{SMatrix, SVector};
    let t0 = t[0];
    let span = t[t.len() - 1] - t0;
    let mut ata = SMatrix::<f64, FIT_BASIS, FIT_BASIS>::zeros();
    let mut aty = SVector::<f64, FIT_BASIS>::zeros();
    let mut yy = 0.0;
    for (&tk, &yk) in t.iter().zip(y) {
        let tau = tk - t0;
        let env = (-kappa * tau).exp();
        let row = SVector::<f64, FIT_BASIS>::from([
            1.0,
            tau / span,
            (-mu * tau).exp(),
            env * (omega * tau).cos(),
            env * (omega * tau).sin(),
        ]);
        ata += row * row.transpose();
        aty += row * yk;
        yy += yk * yk;
    }
    // The ridge keeps near-collinear bases (μ → 0, ω → 0) solvable.
    let ridge = 1e-10 * ata.trace().max(f64::MIN_POSITIVE);
    let reg = ata + SMatrix::<f64, FIT_BASIS, FIT_BASIS>::identity() * ridge;
    match reg.cholesky() {
        Some(ch) => {
            let c = ch.solve(&aty);
            (yy - c.dot(&aty)).max(0.0)
        }
        None => f64::INFINITY,
    }
}

fn log_space(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
}

/// Least-squares damped-sinusoid fit by variable projection: grid search over
/// (ω, κ, μ) including the spectral peak, then compass refinement of the best
/// few grid points.
fn fit_damped_sinusoid(t_full: &[f64], y_full: &[f64]) -> SineFit {
    let stride = t_full.len().div_ceil(MAX_FIT_SAMPLES);
    let t: Vec<f64> = t_full.iter().step_by(stride).copied().collect();
    let y: Vec<f64> = y_full.iter().step_by(stride).copied().collect();
    let n = t_full.len();
    let span = t_full[n - 1] - t_full[0];
    let dt = span / (n - 1) as f64;
    let w_min = std::f64::consts::PI / span;
    let w_max = std::f64::consts::PI / (4.0 * dt * stride as f64);

    let mut omegas: Vec<f64> = log_space(w_min, w_max, 80).collect();
    if let Some(w) = spectral_peak(t_full, y_full) {
        if w > 0.0 && w.is_finite() {
            omegas.push(w);
        }
    }
    let kappas: Vec<f64> = std::iter::once(0.0).chain(log_space(0.05 / span, 20.0 / span, 10)).collect();
    let mus: Vec<f64> = log_space(0.5 / span, 50.0 / span, 8).collect();

    let mut grid = Vec::with_capacity(omegas.len() * kappas.len() * mus.len());
    for &omega in &omegas {
        for &kappa in &kappas {
            for &mu in &mus {
                let residual = projected_residual(&t, &y, omega, kappa, mu);
                grid.push(SineFit { omega, kappa, mu, residual });
            }
        }
    }
    grid.sort_by(|a, b| a.residual.total_cmp(&b.residual));

    let mut best: Option<SineFit> = None;
    for start in grid.iter().take(4) {
        let f = refine(&t, &y, *start, span);
        if best.is_none_or(|b| f.residual < b.residual) {
            best = Some(f);
        }
    }
    best.expect("grid is nonempty")
}

fn refine(t: &[f64], y: &[f64], start: SineFit, span: f64) -> SineFit {
    let mut f = start;
    let mut sw = 0.1 * f.omega;
    let mut sk = 0.3 * f.kappa.max(0.5 / span);
    let mut sm = 0.3 * f.mu;
    for _ in 0..600 {
        let mut improved = false;
        let moves = [
            (sw, 0.0, 0.0),
            (-sw, 0.0, 0.0),
            (0.0, sk, 0.0),
            (0.0, -sk, 0.0),
            (0.0, 0.0, sm),
            (0.0, 0.0, -sm),
        ];
        for (dw, dk, dm) in moves {
            let (w, k, m) = (f.omega + dw, (f.kappa + dk).max(0.0), f.mu + dm);
            if w <= 0.0 || m <= 0.0 {
                continue;
            }
            let r = projected_residual(t, y, w, k, m);
            if r < f.residual {
                f = SineFit { omega: w, kappa: k, mu: m, residual: r };
                improved = true;
            }
        }
        if !improved {
            sw *= 0.5;
            sk *= 0.5;
            sm *= 0.5;
            if sw < 1e-9 * f.omega && sk < 1e-9 / span && sm < 1e-9 * f.mu {
                break;
            }
        }
    }
    f
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Signal minus its moving median over `width` samples (width ≤ n/2). Only
/// points whose full window fits inside the series are kept.
fn detrend_moving_median(y: &[f64], width: usize) -> Vec<f64> {
    let n = y.len();
    let half = (width / 2).max(1);
    let mut buf = Vec::with_capacity(2 * half + 1);
    (half..n - half)
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half).min(n - 1);
            buf.clear();
            buf.extend_from_slice(&y[lo..=hi]);
            y[k] - median(&mut buf)
        })
        .collect()
}

/// Extrema counted as derivative sign changes, ignoring wiggles smaller than
/// `threshold`.
fn count_extrema(y: &[f64], threshold: f64) -> usize {
    if y.len() < 3 {
        return 0;
    }
    let mut count = 0;
    let mut direction = 0i8;
    let mut anchor = y[0];
    for &v in &y[1..] {
        match direction {
            0 => {
                if v > anchor + threshold {
                    direction = 1;
                    anchor = v;
                } else if v < anchor - threshold {
                    direction = -1;
                    anchor = v;
                }
            }
            1 => {
                if v > anchor {
                    anchor = v;
                } else if v < anchor - threshold {
                    count += 1;
                    direction = -1;
                    anchor = v;
                }
            }
            _ => {
                if v < anchor {
                    anchor = v;
                } else if v > anchor + threshold {
                    count += 1;
                    direction = 1;
                    anchor = v;
                }
            }
        }
    }
    count
}

/// Oscillation metrics of a raw sampled series on `window`.
pub fn oscillation_metrics(
    times: &[f64],
    values: &[f64],
    observable: Observable,
    window: (f64, f64),
) -> Result<OscillationMetrics> {
    if times.len() != values.len() {
        return Err(Error::Analysis("times and values differ in length".into()));
    }
    let w = extract_window(times, values, window)?;
    let SineFit { omega, kappa, .. } = fit_damped_sinusoid(&w.t, &w.y);
    let n = w.t.len();
    let dt = (w.t[n - 1] - w.t[0]) / (n - 1) as f64;
    let period_samples = ((2.0 * std::f64::consts::PI / omega) / dt).round();
    let width = if period_samples.is_finite() {
        (period_samples as usize).clamp(3, n / 2)
    } else {
        n / 2
    };
    let residual = detrend_moving_median(&w.y, width);
    let hi = residual.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = residual.iter().copied().fold(f64::INFINITY, f64::min);
    let amplitude = (hi - lo).max(0.0);
    let scale = w.y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let threshold = 1e-9 * scale.max(f64::MIN_POSITIVE) + 1e-3 * amplitude;
    Ok(OscillationMetrics {
        observable,
        dominant_frequency: omega,
        amplitude,
        n_extrema: count_extrema(&residual, threshold),
        decay_time: if kappa > 0.0 { 1.0 / kappa } else { f64::INFINITY },
    })
}

pub fn detect_oscillations(
    traj: &Trajectory,
    observable: Observable,
    window: (f64, f64),
) -> Result<OscillationMetrics> {
    oscillation_metrics(&traj.times, &observable.series(traj), observable, window)
}

/// Sampling and window used to measure oscillations in a Δ_e sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationProtocol {
    pub t_end: f64,
    pub n_samples: usize,
    pub window: (f64, f64),
    pub observable: Observable,
    pub tolerance: f64,
}

impl Default for OscillationProtocol {
    fn default() -> Self {
        Self {
            t_end: 200.0,
            n_samples: 2001,
            window: (5.0, 200.0),
            observable: Observable::PopG1,
            tolerance: 1e-10,
        }
    }
}

impl OscillationProtocol {
    pub fn times(&self) -> Result<Vec<f64>> {
        linear_grid(0.0, self.t_end, self.n_samples)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuppressionRow {
    pub delta_e: f64,
    pub metrics: OscillationMetrics,
}

/// Oscillation metrics of the ground-population trace for each excited
/// splitting in `delta_e_grid`, everything else fixed.
#[allow(clippy::too_many_arguments)]
pub fn oscillation_suppression_sweep(
    rates: &RateSet,
    alignment: &AlignmentSet,
    delta_g: f64,
    initial: &ReducedState,
    delta_e_grid: &[f64],
    protocol: &OscillationProtocol,
) -> Result<Vec<SuppressionRow>> {
    if delta_e_grid.is_empty() {
        return Err(Error::Analysis("empty Δ_e grid".into()));
    }
    if let Some(bad) = delta_e_grid.iter().find(|d| !(**d >= 0.0)) {
        return Err(Error::Analysis(format!("Δ_e values must be ≥ 0, got {bad}")));
    }
    let times = protocol.times()?;
    delta_e_grid
        .iter()
        .map(|&de| {
            let gen = crate::liouvillian::build_generator(rates, alignment, delta_g, de, Default::default())?;
            let traj = propagate(&gen, initial, &times, protocol.tolerance)?;
            Ok(SuppressionRow {
                delta_e: de,
                metrics: detect_oscillations(&traj, protocol.observable, protocol.window)?,
            })
        })
        .collect()
}

/// |a − b| / max(a, b), zero when both vanish.
pub fn relative_change(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}

// ---------------------------------------------------------------------------
// Plateaus

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub t_start: f64,
    pub t_end: f64,
    /// Median of the observable inside the window.
    pub level: f64,
}

impl Plateau {
    pub fn decades(&self) -> f64 {
        (self.t_end / self.t_start).log10()
    }
}

/// Longest stretch on a logarithmic time axis where the observable stays
/// within 5% of itself and above 10× the reference level.
///
/// `reference` defaults to the larger magnitude of the first and last
/// samples, so features that merely decay from their initial value do not
/// count. Windows shorter than `min_decades` are ignored.
pub fn plateau_detect(
    traj: &Trajectory,
    observable: Observable,
    reference: Option<f64>,
    min_decades: f64,
) -> Result<Option<Plateau>> {
    plateau_in_series(&traj.times, &observable.series(traj), reference, min_decades)
}

pub fn plateau_in_series(
    times: &[f64],
    values: &[f64],
    reference: Option<f64>,
    min_decades: f64,
) -> Result<Option<Plateau>> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, v)| (*t, *v))
        .collect();
    if pts.len() < 2 || (pts[pts.len() - 1].0 / pts[0].0).log10() < 3.0 - 1e-9 {
        return Err(Error::Analysis(
            "plateau detection needs a trajectory covering at least 3 decades in time".into(),
        ));
    }
    let reference = reference
        .unwrap_or_else(|| values[0].abs().max(values[values.len() - 1].abs()))
        .abs();
    let floor = PLATEAU_CONTRAST * reference;

    let mut best: Option<(usize, usize)> = None;
    let mut best_len = -1.0;
    for i in 0..pts.len() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in i..pts.len() {
            let v = pts[j].1;
            if !(v > floor) {
                break;
            }
            lo = lo.min(v);
            hi = hi.max(v);
            if hi > (1.0 + PLATEAU_VARIATION) * lo {
                break;
            }
            let len = (pts[j].0 / pts[i].0).log10();
            if len > best_len {
                best_len = len;
                best = Some((i, j));
            }
        }
    }
    Ok(best.filter(|_| best_len >= min_decades).map(|(i, j)| {
        let mut inside: Vec<f64> = pts[i..=j].iter().map(|p| p.1).collect();
        Plateau {
            t_start: pts[i].0,
            t_end: pts[j].0,
            level: median(&mut inside),
        }
    }))
}

// ---------------------------------------------------------------------------
// Decay fits

/// Decay time of |x| after its global peak. The envelope is the running
/// maximum taken from the right, so it never increases; the times at which it
/// crosses levels spaced evenly in log-amplitude, from the peak down to
/// `floor` times the peak, are fitted by a line. Spacing the points by
/// amplitude rather than by sample keeps the fit independent of the grid.
pub fn fit_decay_time(times: &[f64], values: &[f64], floor: f64) -> Result<f64> {
    const STEP: f64 = 0.25;
    if !(floor > 0.0 && floor < 1.0) {
        return Err(Error::Analysis(format!("decay floor must lie in (0, 1), got {floor}")));
    }
    let mag: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let (peak_idx, &peak) = mag
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Analysis("empty series".into()))?;
    if !(peak > 0.0) {
        return Err(Error::Analysis("series is identically zero".into()));
    }
    let t = &times[peak_idx..];
    let mut env = mag[peak_idx..].to_vec();
    for k in (0..env.len().saturating_sub(1)).rev() {
        env[k] = env[k].max(env[k + 1]);
    }
    let ln_floor = floor.ln();
    let mut pts: Vec<(f64, f64)> = vec![(t[0], 0.0)];
    let mut k = 0;
    let mut j = 1;
    loop {
        let level = -STEP * j as f64;
        if level < ln_floor {
            break;
        }
        while k + 1 < env.len() && (env[k + 1] / peak).ln() >= level {
            k += 1;
        }
        if k + 1 >= env.len() {
            break;
        }
        let (y0, y1) = ((env[k] / peak).ln(), (env[k + 1] / peak).ln());
        let f = if y0 > y1 { (y0 - level) / (y0 - y1) } else { 0.0 };
        pts.push((t[k] + f * (t[k + 1] - t[k]), level));
        j += 1;
    }
    if pts.len() < 3 {
        return Err(Error::Analysis("not enough decay above the floor to fit".into()));
    }
    let (tt, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let (slope, _) = linear_fit(&tt, &y);
    if !(slope < 0.0) {
        return Err(Error::Analysis(format!("series does not decay (slope {slope:e})")));
    }
    Ok(-1.0 / slope)
}

// ---------------------------------------------------------------------------
// Physicality

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhysicalityAudit {
    pub max_trace_drift: f64,
    pub min_population: f64,
    pub max_bound_violation: f64,
    /// Time of the largest bound violation (or of the first sample).
    pub worst_time: f64,
}

impl PhysicalityAudit {
    pub fn passes(&self, trace_tol: f64, pop_tol: f64, bound_tol: f64) -> bool {
        self.max_trace_drift < trace_tol
            && self.min_population > -pop_tol
            && self.max_bound_violation < bound_tol
    }
}

pub fn physicality_audit(traj: &Trajectory) -> PhysicalityAudit {
    audit_states(&traj.times, &traj.states)
}

pub fn audit_states(times: &[f64], states: &[ReducedState]) -> PhysicalityAudit {
    let mut a = PhysicalityAudit {
        min_population: f64::INFINITY,
        worst_time: times.first().copied().unwrap_or(0.0),
        ..Default::default()
    };
    for (t, s) in times.iter().zip(states) {
        a.max_trace_drift = a.max_trace_drift.max((s.trace() - 1.0).abs());
        a.min_population = a.min_population.min(s.min_population());
        let v = s.coherence_bound_excess().max(0.0);
        if v > a.max_bound_violation {
            a.max_bound_violation = v;
            a.worst_time = *t;
        }
    }
    if states.is_empty() {
        a.min_population = 0.0;
    }
    a
}
