//! Two-amplitude dynamics with the decaying intermediate state eliminated.
//!
//! Amplitudes live in the frame rotating with the bare level energies. With
//! `D1 = i*Delta + gamma/2` and `D2 = i*(Delta + delta) + gamma/2` the
//! intermediate amplitude, started from zero at the pulse edge, is
//!
//! ```text
//! c_i = -i Om1 e^{i k1 x_g} c_g (e^{i Delta t} - e^{-gamma t/2}) / D1
//!       -i Om2 e^{i k2 x_e} c_e (e^{i (Delta+delta) t} - e^{-gamma t/2}) / D2
//! ```
//!
//! and feeding it back gives the ground/excited equations used here, each a
//! slowly varying (DC) part plus a transient (AC) part `~ e^{-D t}`. The AC
//! part rotates at Delta, far faster than any affordable step, so pulses are
//! integrated by splitting: RK4 on the DC part, and the AC part integrated in
//! closed form over each step with the amplitudes held at their step
//! average.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::numerics::rk4_step;
use crate::physics::{PulseRole, SegmentKind, SimulationConfig, HBAR};
use crate::stats::analytical_q;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Once `gamma * t / 2` passes this, the transient is below 1e-17.
const TRANSIENT_CUTOFF: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumState {
    pub c_g: C64,
    pub c_e: C64,
    pub q_tot: f64,
    /// Positions of the |g> and |e> components, m.
    pub x_g: f64,
    pub x_e: f64,
    /// Velocities of the |g> and |e> components, m/s.
    pub v_g: f64,
    pub v_e: f64,
    /// Global clock, s.
    pub t: f64,
}

impl QuantumState {
    /// Atom in |g> at position `x` with velocity `v`.
    pub fn ground(x: f64, v: f64) -> Self {
        QuantumState {
            c_g: C64::new(1.0, 0.0),
            c_e: ZERO,
            q_tot: 0.0,
            x_g: x,
            x_e: x,
            v_g: v,
            v_e: v,
            t: 0.0,
        }
    }

    pub fn pop_g(&self) -> f64 {
        self.c_g.norm_sqr()
    }

    pub fn pop_e(&self) -> f64 {
        self.c_e.norm_sqr()
    }

    /// Mean of the two arm velocities.
    pub fn v(&self) -> f64 {
        0.5 * (self.v_g + self.v_e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    pub pop_e: f64,
    pub pop_g: f64,
    pub q_tot: f64,
    /// Read-out phase atan(sqrt(pop_e / (1 - pop_e - q_tot))), rad.
    pub phase: f64,
    /// m/s^2
    pub dev_a: f64,
}

/// Constants of one optical pulse: Rabi frequencies, detunings, decay and
/// wave numbers for the beam direction in use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub rabi1: f64,
    pub rabi2: f64,
    pub delta: f64,
    pub delta_two: f64,
    pub gamma: f64,
    pub k1: f64,
    pub k2: f64,
    d1: C64,
    d2: C64,
}

impl Coupling {
    /// Coupling for a pulse fired along `direction` (+1 or -1).
    pub fn new(cfg: &SimulationConfig, direction: f64) -> Self {
        let l = &cfg.laser;
        Self::from_parts(
            l.rabi1,
            l.rabi2,
            l.delta_single,
            l.delta_two,
            cfg.species.gamma_l,
            direction * l.k1,
            direction * l.k2,
        )
    }

    pub fn from_parts(
        rabi1: f64,
        rabi2: f64,
        delta: f64,
        delta_two: f64,
        gamma: f64,
        k1: f64,
        k2: f64,
    ) -> Self {
        Coupling {
            rabi1,
            rabi2,
            delta,
            delta_two,
            gamma,
            k1,
            k2,
            d1: C64::new(0.5 * gamma, delta),
            d2: C64::new(0.5 * gamma, delta + delta_two),
        }
    }

    pub fn d1(&self) -> C64 {
        self.d1
    }

    pub fn d2(&self) -> C64 {
        self.d2
    }

    /// Two-photon phase k2 x_e - k1 x_g.
    pub fn delta_kx(&self, x_g: f64, x_e: f64) -> f64 {
        self.k2 * x_e - self.k1 * x_g
    }
}

/// Transient factor `e^{-D t}`, dropped once it has decayed away.
#[inline]
fn transient(d: C64, t: f64, gamma: f64) -> C64 {
    if 0.5 * gamma * t > TRANSIENT_CUTOFF {
        return ZERO;
    }
    (-d * t).exp()
}

/// Exact integral of `e^{-D s}` over `[t, t + h]`.
#[inline]
fn transient_integral(d: C64, t: f64, h: f64, gamma: f64) -> C64 {
    if 0.5 * gamma * t > TRANSIENT_CUTOFF {
        return ZERO;
    }
    let z = d * h;
    // (1 - e^{-z}) / D, with the series for tiny z
    let factor = if z.norm() < 1e-6 {
        C64::new(h, 0.0) * (1.0 - z * 0.5)
    } else {
        (1.0 - (-z).exp()) / d
    };
    (-d * t).exp() * factor
}

/// DC right-hand side with explicit two-photon phase `dkx` and time since
/// pulse start `t`.
#[inline]
fn dc_rhs(c_g: C64, c_e: C64, p: &Coupling, dkx: f64, t: f64) -> (C64, C64) {
    let phase = C64::from_polar(1.0, dkx);
    let rot = C64::from_polar(1.0, p.delta_two * t);
    let dc_g =
        -(c_g * (p.rabi1 * p.rabi1)) / p.d1 - (phase * c_e * (p.rabi1 * p.rabi2)) * rot / p.d2;
    let dc_e = -(phase.conj() * c_g * (p.rabi1 * p.rabi2)) * rot.conj() / p.d1
        - (c_e * (p.rabi2 * p.rabi2)) / p.d2;
    (dc_g, dc_e)
}

/// Coefficients multiplying `e^{-D1 t}` (for c_g) and `e^{-D2 t}` (for c_e)
/// in the AC part.
#[inline]
fn ac_coefficients(c_g: C64, c_e: C64, p: &Coupling, dkx: f64) -> (C64, C64) {
    let phase = C64::from_polar(1.0, dkx);
    let om12 = p.rabi1 * p.rabi2;
    let g = c_g * (p.rabi1 * p.rabi1) / p.d1 + phase * c_e * om12 / p.d2;
    let e = phase.conj() * c_g * om12 / p.d1 + c_e * (p.rabi2 * p.rabi2) / p.d2;
    (g, e)
}

/// Full right-hand side, DC plus AC.
#[inline]
fn rhs(c_g: C64, c_e: C64, p: &Coupling, dkx: f64, t: f64) -> (C64, C64) {
    let (dg, de) = dc_rhs(c_g, c_e, p, dkx, t);
    let (ag, ae) = ac_coefficients(c_g, c_e, p, dkx);
    (
        dg + ag * transient(p.d1, t, p.gamma),
        de + ae * transient(p.d2, t, p.gamma),
    )
}

/// Time derivatives of (c_g, c_e) at `t_pulse` seconds into a pulse, with
/// the two-photon phase taken from the positions stored in `state`.
pub fn amplitude_derivatives(state: &QuantumState, p: &Coupling, t_pulse: f64) -> (C64, C64) {
    rhs(
        state.c_g,
        state.c_e,
        p,
        p.delta_kx(state.x_g, state.x_e),
        t_pulse,
    )
}

/// Slowly varying part of the right-hand side alone (transient dropped),
/// with an explicit two-photon phase `dkx`.
pub fn dc_derivatives(c_g: C64, c_e: C64, p: &Coupling, dkx: f64, t_pulse: f64) -> (C64, C64) {
    dc_rhs(c_g, c_e, p, dkx, t_pulse)
}

/// Intermediate-state amplitude at `t_pulse` seconds into a pulse, from the
/// amplitudes and positions stored in `state`.
pub fn intermediate_amplitude(state: &QuantumState, p: &Coupling, t_pulse: f64) -> C64 {
    let mi = C64::new(0.0, -1.0);
    let decay = C64::new((-0.5 * p.gamma * t_pulse).exp(), 0.0);
    let a = mi * p.rabi1 * C64::from_polar(1.0, p.k1 * state.x_g) * state.c_g;
    let b = mi * p.rabi2 * C64::from_polar(1.0, p.k2 * state.x_e) * state.c_e;
    a * (C64::from_polar(1.0, p.delta * t_pulse) - decay) / p.d1
        + b * (C64::from_polar(1.0, (p.delta + p.delta_two) * t_pulse) - decay) / p.d2
}

/// Ballistic flight without light: positions advance under `accel`.
pub fn free_evolve(state: &QuantumState, duration: f64, accel: f64) -> QuantumState {
    let mut s = *state;
    if duration == 0.0 {
        return s;
    }
    let half = 0.5 * accel * duration * duration;
    s.x_g += state.v_g * duration + half;
    s.x_e += state.v_e * duration + half;
    s.v_g += accel * duration;
    s.v_e += accel * duration;
    s.t += duration;
    s
}

/// Integrate one optical pulse of length `duration` with step `dt`.
///
/// The pulse acts at its centre: the laser phase is taken from the arm
/// positions at mid-pulse, and the recoil for `role` is applied there
/// (`v_recoil` is hbar*k_eff/m; its sign follows the beam direction folded
/// into `p`). Loss is booked from the entry amplitudes.
pub fn apply_pulse(
    state: &QuantumState,
    role: PulseRole,
    duration: f64,
    p: &Coupling,
    dt: f64,
    accel: f64,
    v_recoil: f64,
) -> Result<QuantumState> {
    if !(duration > 0.0) {
        return Err(Error::validation(format!(
            "pulse duration must be positive, got {duration}"
        )));
    }
    let mut mid = free_evolve(state, 0.5 * duration, accel);
    // The two-photon detuning already carries the Doppler and recoil shifts,
    // so the laser phase is held fixed for the whole pulse.
    let dkx = p.delta_kx(mid.x_g, mid.x_e);
    let q = analytical_q(state.c_g, state.c_e, p, dkx, duration)?;

    let [c_g, c_e] = integrate_pulse([state.c_g, state.c_e], p, dkx, duration, dt)
        .map_err(|e| shift_time(e, state.t))?;

    let kick = v_recoil * p.k1.signum();
    match role {
        PulseRole::Split => {
            mid.x_e = mid.x_g;
            mid.v_e = mid.v_g + kick;
        }
        PulseRole::Boost | PulseRole::Mirror | PulseRole::Unboost => {
            let (xg, vg, xe, ve) = (mid.x_g, mid.v_g, mid.x_e, mid.v_e);
            mid.x_g = xe;
            mid.v_g = ve - kick;
            mid.x_e = xg;
            mid.v_e = vg + kick;
        }
        PulseRole::Recombine => {}
    }
    let mut s = free_evolve(&mid, duration - 0.5 * duration, accel);
    s.c_g = c_g;
    s.c_e = c_e;
    s.q_tot += q;
    Ok(s)
}

fn shift_time(e: Error, t0: f64) -> Error {
    match e {
        Error::Integration { t } => Error::Integration { t: t + t0 },
        other => other,
    }
}

/// One split step from `t` to `t + h`: RK4 on the DC part, then the AC part
/// integrated exactly with the amplitudes frozen at the step average.
pub fn split_step(y: [C64; 2], p: &Coupling, dkx: f64, t: f64, h: f64) -> Result<[C64; 2]> {
    let field = |y: &[C64; 2], t: f64| {
        let (a, b) = dc_rhs(y[0], y[1], p, dkx, t);
        [a, b]
    };
    let dc = rk4_step(&y, t, h, &field)?;
    let (ag, ae) = ac_coefficients(0.5 * (y[0] + dc[0]), 0.5 * (y[1] + dc[1]), p, dkx);
    let out = [
        dc[0] + ag * transient_integral(p.d1, t, h, p.gamma),
        dc[1] + ae * transient_integral(p.d2, t, h, p.gamma),
    ];
    if out.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(out)
    } else {
        Err(Error::Integration { t: t + h })
    }
}

/// Integrate a pulse of length `duration` in equal steps no longer than `dt`.
pub fn integrate_pulse(
    y0: [C64; 2],
    p: &Coupling,
    dkx: f64,
    duration: f64,
    dt: f64,
) -> Result<[C64; 2]> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::validation(format!(
            "pulse step must be positive, got {dt}"
        )));
    }
    let n = ((duration / dt) * (1.0 - 1e-12)).ceil().max(1.0) as u64;
    let h = duration / n as f64;
    let mut y = y0;
    for k in 0..n {
        y = split_step(y, p, dkx, k as f64 * h, h)?;
    }
    Ok(y)
}

/// Read-out phase and the remaining ground population it is built from.
pub fn readout_phase(pop_e: f64, q_tot: f64) -> Result<f64> {
    let rest = 1.0 - pop_e - q_tot;
    if !(rest > 0.0) {
        return Err(Error::DegeneratePopulation { remaining: rest });
    }
    Ok((pop_e / rest).sqrt().atan())
}

/// Run the full pulse sequence of `cfg` for an atom starting at `x0` with
/// velocity `v0`, under acceleration `accel` along the beams.
pub fn run_interferometer(
    x0: f64,
    v0: f64,
    cfg: &SimulationConfig,
    accel: f64,
) -> Result<RunOutcome> {
    let state = run_sequence(x0, v0, cfg, accel)?;
    let pop_e = state.pop_e();
    let phase = readout_phase(pop_e, state.q_tot)?;
    Ok(RunOutcome {
        pop_e,
        pop_g: state.pop_g(),
        q_tot: state.q_tot,
        phase,
        dev_a: cfg.alpha()? * phase,
    })
}

/// Final quantum state after the whole sequence.
pub fn run_sequence(x0: f64, v0: f64, cfg: &SimulationConfig, accel: f64) -> Result<QuantumState> {
    let seq = &cfg.sequence;
    let roles = seq.roles();
    let dirs = cfg.recoil_schedule.directions(seq);
    let couplings = [Coupling::new(cfg, 1.0), Coupling::new(cfg, -1.0)];
    let v_recoil = HBAR * cfg.laser.k_eff.abs() / cfg.species.mass;
    let a_along = accel * cfg.laser.theta.cos();
    let dt = cfg.dt();

    let mut state = QuantumState::ground(x0, v0);
    let mut pulse = 0;
    for seg in &seq.segments {
        match seg.kind {
            SegmentKind::Free => state = free_evolve(&state, seg.duration, a_along),
            SegmentKind::HalfPi | SegmentKind::Pi => {
                let p = if dirs[pulse] > 0.0 {
                    &couplings[0]
                } else {
                    &couplings[1]
                };
                state = apply_pulse(&state, roles[pulse], seg.duration, p, dt, a_along, v_recoil)?;
                pulse += 1;
            }
        }
    }
    Ok(state)
}
