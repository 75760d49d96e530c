//! Dormand-Prince 5(4) integrator with adaptive steps, specialised to the
//! eight-component state.
//!
//! Steps are clamped to land exactly on requested output times and on any
//! registered breakpoints, so no interpolation is involved in the output.

use crate::liouvillian::Vector8;
use crate::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Fifth-order weights minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const MAX_STEPS: usize = 50_000_000;

#[derive(Clone, Copy, Debug)]
pub(crate) struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step size while t < `max_step_until`.
    pub max_step: f64,
    pub max_step_until: f64,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            max_step: f64::INFINITY,
            max_step_until: f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub(crate) struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

fn error_norm(err: &Vector8, y0: &Vector8, y1: &Vector8, opts: &OdeOptions) -> f64 {
    let mut acc = 0.0;
    for i in 0..8 {
        let sc = opts.atol + opts.rtol * y0[i].abs().max(y1[i].abs());
        acc += (err[i] / sc).powi(2);
    }
    (acc / 8.0).sqrt()
}

/// Integrates `rhs` from (t0, y0) and records the state at each of `times`
/// (non-decreasing, all ≥ t0). `breakpoints` are times the integrator must
/// step onto, e.g. kinks of a ramp profile.
pub(crate) fn integrate<F>(
    mut rhs: F,
    t0: f64,
    y0: Vector8,
    times: &[f64],
    breakpoints: &[f64],
    opts: &OdeOptions,
) -> Result<(Vec<Vector8>, OdeStats)>
where
    F: FnMut(f64, &Vector8) -> Vector8,
{
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::Domain("integration tolerance must be > 0".into()));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut stats = OdeStats::default();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y);

    // Initial step guess (Hairer, Nørsett & Wanner, II.4).
    let d0 = error_norm(&y, &y, &y, opts).max(1e-300);
    let d1 = error_norm(&k1, &y, &y, opts).max(1e-300);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };

    let mut stops: Vec<f64> = breakpoints.iter().copied().filter(|b| *b > t0).collect();
    stops.sort_by(f64::total_cmp);
    let mut stop_idx = 0;

    for &target in times {
        if target < t {
            return Err(Error::Domain(format!(
                "output times must be non-decreasing and ≥ {t0}, got {target}"
            )));
        }
        while t < target {
            while stop_idx < stops.len() && stops[stop_idx] <= t {
                stop_idx += 1;
            }
            let mut limit = target;
            if stop_idx < stops.len() && stops[stop_idx] < limit {
                limit = stops[stop_idx];
            }
            if t < opts.max_step_until {
                h = h.min(opts.max_step);
            }
            let natural = h;
            let mut last = false;
            if t + h >= limit || (limit - t - h) < 1e-12 * limit.abs().max(1.0) {
                h = limit - t;
                last = true;
            }
            if h <= 1e-14 * t.abs().max(1.0) && !last {
                return Err(Error::Integration {
                    t,
                    reason: format!("step size underflow (h = {h:e})"),
                });
            }

            let k2 = rhs(t + C2 * h, &(y + h * (A21 * k1)));
            let k3 = rhs(t + C3 * h, &(y + h * (A31 * k1 + A32 * k2)));
            let k4 = rhs(t + C4 * h, &(y + h * (A41 * k1 + A42 * k2 + A43 * k3)));
            let k5 = rhs(
                t + C5 * h,
                &(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4)),
            );
            let k6 = rhs(
                t + h,
                &(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5)),
            );
            let y_new = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6);
            let t_new = if last { limit } else { t + h };
            let k7 = rhs(t_new, &y_new);
            let err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
            let en = error_norm(&err, &y, &y_new, opts);

            if !en.is_finite() {
                return Err(Error::Integration {
                    t,
                    reason: "non-finite error estimate".into(),
                });
            }
            let factor = if en == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * en.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            if en <= 1.0 {
                t = t_new;
                y = y_new;
                k1 = k7;
                stats.accepted += 1;
                // A step shortened to hit a stop says nothing against the
                // natural step size.
                h = if last { natural.max(h * factor) } else { h * factor };
            } else {
                stats.rejected += 1;
                h *= factor.min(1.0);
            }
            if stats.accepted + stats.rejected > MAX_STEPS {
                return Err(Error::Integration {
                    t,
                    reason: format!("exceeded {MAX_STEPS} steps"),
                });
            }
        }
        out.push(y);
    }
    Ok((out, stats))
}
