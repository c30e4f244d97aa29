//! Fixed-step classic Runge-Kutta integration over small complex state vectors.
//!
//! States are fixed-size arrays so the dimension cannot change during an
//! integration (2 for amplitudes, 9 for a 3x3 density matrix). A derivative
//! field is any `Fn(&[C64; D], f64) -> [C64; D]`; it must be pure.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// State vector of fixed dimension `D`.
pub type ComplexVector<const D: usize> = [C64; D];

/// Relative slack used to decide that a trailing partial step is really a
/// full step that lost a few ulps to floating-point time arithmetic.
const STEP_SNAP: f64 = 1e-9;

#[inline]
fn axpy<const D: usize>(y: &[C64; D], a: f64, x: &[C64; D]) -> [C64; D] {
    let mut out = *y;
    for (o, xi) in out.iter_mut().zip(x) {
        *o += xi * a;
    }
    out
}

#[inline]
fn all_finite<const D: usize>(v: &[C64; D]) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn checked<const D: usize, F>(f: &F, state: &[C64; D], t: f64) -> Result<[C64; D]>
where
    F: Fn(&[C64; D], f64) -> [C64; D],
{
    let d = f(state, t);
    if all_finite(&d) {
        Ok(d)
    } else {
        Err(Error::Integration { t })
    }
}

/// One classic four-stage RK4 update of `state` from `t` to `t + dt`.
pub fn rk4_step<const D: usize, F>(state: &[C64; D], t: f64, dt: f64, f: &F) -> Result<[C64; D]>
where
    F: Fn(&[C64; D], f64) -> [C64; D],
{
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::validation(format!(
            "rk4 step must be positive, got {dt}"
        )));
    }
    if !all_finite(state) {
        return Err(Error::Integration { t });
    }
    let half = 0.5 * dt;
    let k1 = checked(f, state, t)?;
    let k2 = checked(f, &axpy(state, half, &k1), t + half)?;
    let k3 = checked(f, &axpy(state, half, &k2), t + half)?;
    let k4 = checked(f, &axpy(state, dt, &k3), t + dt)?;

    let w = dt / 6.0;
    let mut out = *state;
    for i in 0..D {
        out[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w;
    }
    if !all_finite(&out) {
        return Err(Error::Integration { t: t + dt });
    }
    Ok(out)
}

/// Integrate from `t0` to `t1` with fixed steps of `dt`.
///
/// Step `k` starts at `t0 + k * dt`. The last step is shortened so the
/// endpoint is exactly `t1`; a remainder within `1e-9 * dt` of a full step
/// is taken as a full step.
pub fn integrate<const D: usize, F>(
    state: &[C64; D],
    t0: f64,
    t1: f64,
    dt: f64,
    f: &F,
) -> Result<[C64; D]>
where
    F: Fn(&[C64; D], f64) -> [C64; D],
{
    if !(t1 >= t0) {
        return Err(Error::validation(format!(
            "integrate needs t1 >= t0 (t0={t0}, t1={t1})"
        )));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::validation(format!(
            "integrate step must be positive, got {dt}"
        )));
    }
    let mut y = *state;
    let mut k: u64 = 0;
    loop {
        let t = t0 + k as f64 * dt;
        let remaining = t1 - t;
        if remaining <= STEP_SNAP * dt {
            break;
        }
        let h = if (remaining - dt).abs() <= STEP_SNAP * dt || remaining > dt {
            dt
        } else {
            remaining
        };
        y = rk4_step(&y, t, h, f)?;
        if h < dt {
            break;
        }
        k += 1;
    }
    Ok(y)
}

/// Squared Euclidean norm.
pub fn norm_sqr<const D: usize>(v: &[C64; D]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}
