//! Atoms, lasers, pulse sequences and the phase-to-acceleration scale.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Speed of light, m/s.
pub const C_LIGHT: f64 = 299_792_458.0;

/// 2*pi, for cyclic-to-angular conversions.
pub const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomSpecies {
    /// kg
    pub mass: f64,
    /// m
    pub wavelength: f64,
    /// Total decay rate of the intermediate state, rad/s.
    pub gamma_total: f64,
    /// Decay branch into the loss state, rad/s.
    pub gamma_l: f64,
    /// Decay branch back into |g>, rad/s.
    pub gamma_g: f64,
    /// Decay branch back into |e>, rad/s.
    pub gamma_e: f64,
    /// Ground hyperfine splitting, rad/s.
    pub hyperfine_splitting: f64,
}

impl AtomSpecies {
    /// Rubidium-85 on the D2 line with every decay attributed to the loss branch.
    pub fn rb85() -> Self {
        let gamma = 38.117e6;
        AtomSpecies {
            mass: 1.419e-25,
            wavelength: 780e-9,
            gamma_total: gamma,
            gamma_l: gamma,
            gamma_g: 0.0,
            gamma_e: 0.0,
            hyperfine_splitting: TWO_PI * 3.035_732_439e9,
        }
    }

    /// Same atom with the loss branch set to `gamma_l` and the remainder of
    /// the total rate split evenly between the two ground states.
    pub fn with_loss_rate(mut self, gamma_l: f64) -> Self {
        self.gamma_l = gamma_l;
        let rest = (self.gamma_total - gamma_l).max(0.0);
        self.gamma_g = 0.5 * rest;
        self.gamma_e = 0.5 * rest;
        self
    }

    pub fn k(&self) -> f64 {
        TWO_PI / self.wavelength
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) || !(self.wavelength > 0.0) || !(self.gamma_total > 0.0) {
            return Err(Error::validation(
                "species mass, wavelength and total decay rate must be positive",
            ));
        }
        for (name, v) in [
            ("gamma_l", self.gamma_l),
            ("gamma_g", self.gamma_g),
            ("gamma_e", self.gamma_e),
        ] {
            if !(v >= 0.0) {
                return Err(Error::validation(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        let sum = self.gamma_l + self.gamma_g + self.gamma_e;
        if (sum - self.gamma_total).abs() > 1e-9 * self.gamma_total {
            return Err(Error::validation(format!(
                "decay branches sum to {sum} rad/s, expected {} rad/s",
                self.gamma_total
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    CounterPropagating,
    CoPropagating,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserConfig {
    /// Laser frequencies, rad/s.
    pub omega1: f64,
    pub omega2: f64,
    /// Single-photon Rabi frequencies, rad/s.
    pub rabi1: f64,
    pub rabi2: f64,
    /// Single-photon detuning, rad/s.
    pub delta_single: f64,
    /// Two-photon detuning, rad/s.
    pub delta_two: f64,
    /// Wave numbers, rad/m. `k1` is taken along +z; `k2` carries the
    /// geometry sign.
    pub k1: f64,
    pub k2: f64,
    pub k_eff: f64,
    /// Angle between k_eff and the acceleration, rad.
    pub theta: f64,
    pub geometry: Geometry,
    /// Differential light shift folded into the two-photon detuning, rad/s.
    pub delta_ac: f64,
}

impl LaserConfig {
    /// Laser pair for `species` with the given Rabi frequencies and detunings.
    /// The optical frequencies are placed so that `omega1 - omega2` sits
    /// `delta_two` above the hyperfine splitting.
    pub fn new(
        species: &AtomSpecies,
        rabi1: f64,
        rabi2: f64,
        delta_single: f64,
        delta_two: f64,
        geometry: Geometry,
    ) -> Self {
        let k = species.k();
        let (k2, k_eff) = match geometry {
            Geometry::CounterPropagating => (-k, 2.0 * k),
            Geometry::CoPropagating => (k, 0.0),
        };
        let omega1 = TWO_PI * C_LIGHT / species.wavelength + delta_single;
        let omega2 = omega1 - species.hyperfine_splitting - delta_two;
        LaserConfig {
            omega1,
            omega2,
            rabi1,
            rabi2,
            delta_single,
            delta_two,
            k1: k,
            k2,
            k_eff,
            theta: 0.0,
            geometry,
            delta_ac: 0.0,
        }
    }

    /// Two-photon Rabi coupling |Omega1 Omega2| / Delta, rad/s.
    pub fn raman_coupling(&self) -> f64 {
        (self.rabi1 * self.rabi2).abs() / self.delta_single.abs()
    }

    /// Pulse length giving area pi at this detuning.
    pub fn calibrated_t_pi(&self) -> f64 {
        PI * self.delta_single.abs() / (2.0 * (self.rabi1 * self.rabi2).abs())
    }

    /// True when the detuning is too small for adiabatic elimination to be
    /// trusted.
    pub fn elimination_warning(&self) -> bool {
        self.delta_single.abs() < 10.0 * self.rabi1.abs().max(self.rabi2.abs())
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rabi1", self.rabi1),
            ("rabi2", self.rabi2),
            ("delta_single", self.delta_single),
            ("delta_two", self.delta_two),
            ("theta", self.theta),
            ("delta_ac", self.delta_ac),
        ] {
            if !v.is_finite() {
                return Err(Error::validation(format!("{name} must be finite")));
            }
        }
        if self.delta_single == 0.0 {
            return Err(Error::validation("single-photon detuning must be non-zero"));
        }
        if self.geometry == Geometry::CounterPropagating {
            let expect = self.k1.abs() + self.k2.abs();
            if (self.k_eff.abs() - expect).abs() > 1e-9 * expect {
                return Err(Error::validation(format!(
                    "counter-propagating |k_eff| = {} but |k1| + |k2| = {expect}",
                    self.k_eff.abs()
                )));
            }
        }
        Ok(())
    }
}

/// Two-photon detuning seen by an atom moving at `velocity` along k_eff,
/// including the recoil shift and the configured light shift.
pub fn effective_two_photon_detuning(
    laser: &LaserConfig,
    species: &AtomSpecies,
    velocity: f64,
) -> f64 {
    let recoil = HBAR * laser.k_eff * laser.k_eff / (2.0 * species.mass);
    (laser.omega1 - laser.omega2) - (species.hyperfine_splitting - laser.k_eff * velocity + recoil)
        + laser.delta_ac
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentKind {
    HalfPi,
    Pi,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub kind: SegmentKind,
    /// s
    pub duration: f64,
}

/// Role of an optical pulse within the large-momentum-transfer sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseRole {
    Split,
    Boost,
    Mirror,
    Unboost,
    Recombine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    pub segments: Vec<Segment>,
    pub n_r: u32,
    pub t_free: f64,
    pub tau_d: f64,
    pub t_pi: f64,
    pub t_half_pi: f64,
}

impl PulseSequence {
    /// Number of pi pulses, 2 N_R - 1.
    pub fn pi_count(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| s.kind == SegmentKind::Pi)
            .count()
    }

    /// Loss weight m = 2 N_R (pi pulses count 1, half-pi pulses 1/2).
    pub fn q_weight(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| match s.kind {
                SegmentKind::Pi => 1.0,
                SegmentKind::HalfPi => 0.5,
                SegmentKind::Free => 0.0,
            })
            .sum()
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Role of each optical pulse, in sequence order.
    pub fn roles(&self) -> Vec<PulseRole> {
        let boosts = ((self.n_r - 1) / 2) as usize;
        let mut roles = Vec::with_capacity(2 * self.n_r as usize + 1);
        roles.push(PulseRole::Split);
        roles.extend(std::iter::repeat(PulseRole::Boost).take(boosts));
        roles.extend(std::iter::repeat(PulseRole::Mirror).take(self.n_r as usize));
        roles.extend(std::iter::repeat(PulseRole::Unboost).take(boosts));
        roles.push(PulseRole::Recombine);
        roles
    }
}

/// Lay out the palindromic sequence: half-pi, (N_R-1)/2 boost pi pulses,
/// free flight T, N_R mirror pi pulses, free flight T, (N_R-1)/2 pi pulses,
/// half-pi. Every pi pulse is separated from its neighbours by `tau_d`;
/// zero-length gaps are omitted.
pub fn build_sequence(
    n_r: i64,
    t_free: f64,
    tau_d: f64,
    t_pi: f64,
    t_half_pi: f64,
) -> Result<PulseSequence> {
    if n_r < 1 || n_r % 2 == 0 {
        return Err(Error::validation(format!(
            "n_r must be a positive odd integer, got {n_r}"
        )));
    }
    if !(t_free > 0.0) || !(t_pi > 0.0) || !(t_half_pi > 0.0) {
        return Err(Error::validation("T, t_pi and t_half_pi must be positive"));
    }
    if !(tau_d >= 0.0) || !tau_d.is_finite() {
        return Err(Error::validation(format!(
            "tau_d must be non-negative, got {tau_d}"
        )));
    }
    let boosts = ((n_r - 1) / 2) as usize;
    let mirrors = n_r as usize;
    let pi = Segment {
        kind: SegmentKind::Pi,
        duration: t_pi,
    };
    let gap = Segment {
        kind: SegmentKind::Free,
        duration: tau_d,
    };
    let flight = Segment {
        kind: SegmentKind::Free,
        duration: t_free,
    };
    let half = Segment {
        kind: SegmentKind::HalfPi,
        duration: t_half_pi,
    };

    let mut segments = Vec::with_capacity(6 * mirrors + 5);
    let push_gap = |segs: &mut Vec<Segment>| {
        if tau_d > 0.0 {
            segs.push(gap);
        }
    };
    segments.push(half);
    for _ in 0..boosts {
        push_gap(&mut segments);
        segments.push(pi);
    }
    segments.push(flight);
    push_gap(&mut segments);
    for _ in 0..mirrors {
        segments.push(pi);
        push_gap(&mut segments);
    }
    segments.push(flight);
    for _ in 0..boosts {
        segments.push(pi);
        push_gap(&mut segments);
    }
    segments.push(half);

    Ok(PulseSequence {
        segments,
        n_r: n_r as u32,
        t_free,
        tau_d,
        t_pi,
        t_half_pi,
    })
}

/// Scale factor between the read-out phase and the acceleration deviation.
pub fn alpha_scale(seq: &PulseSequence, k_eff: f64, theta: f64) -> Result<f64> {
    let cos = theta.cos();
    if cos.abs() < 1e-12 {
        return Err(Error::DegenerateGeometry(format!("cos(theta) = {cos:e}")));
    }
    let n = seq.n_r as f64;
    let k = k_eff.abs();
    let t = seq.t_free;
    let denom = (2.0 * n * t * t * k - 2.0 * (n + 1.0) * k * t * seq.tau_d) * cos;
    if !(denom.abs() > 0.0) || !denom.is_finite() {
        return Err(Error::DegenerateGeometry(format!(
            "alpha denominator = {denom:e}"
        )));
    }
    Ok(1.0 / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseCalibration {
    /// Fixed pulse lengths as configured.
    Table,
    /// Pulse length rescaled with the detuning to keep the area at pi.
    Calibrated,
}

/// Convention for the beam direction of each pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoilSchedule {
    /// Boost pulses alternate direction so the arms keep separating, mirror
    /// pulses alternate back; closes the interferometer for any odd N_R.
    Alternating,
    /// Every pulse from the same direction (a plain three-pulse geometry
    /// for N_R = 1; does not close for larger N_R).
    Fixed,
}

impl RecoilSchedule {
    /// Beam direction (+1 or -1) for each optical pulse of `seq`.
    pub fn directions(self, seq: &PulseSequence) -> Vec<f64> {
        let roles = seq.roles();
        match self {
            RecoilSchedule::Fixed => vec![1.0; roles.len()],
            RecoilSchedule::Alternating => {
                // In the frame that flips with every pi pulse, boost and
                // unboost pulses must widen the arm velocity split and mirror
                // pulses reverse it; the lab direction alternates with the
                // frame sign.
                let mut out = Vec::with_capacity(roles.len());
                let mut frame = 1.0;
                for role in roles {
                    let s = match role {
                        PulseRole::Split | PulseRole::Recombine => 1.0,
                        PulseRole::Boost | PulseRole::Unboost => -frame,
                        PulseRole::Mirror => frame,
                    };
                    out.push(s);
                    if !matches!(role, PulseRole::Split | PulseRole::Recombine) {
                        frame = -frame;
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub species: AtomSpecies,
    pub laser: LaserConfig,
    pub sequence: PulseSequence,
    /// m/s^2
    pub a_true: f64,
    /// K
    pub mot_temperature: f64,
    pub n_samples: usize,
    pub epsilon_m: f64,
    pub rng_seed: u64,
    pub pulse_calibration: PulseCalibration,
    /// Pulse lengths used in Table mode, s.
    pub table_t_pi: f64,
    pub table_t_half_pi: f64,
    /// RMS cloud radius along k_eff, m.
    pub cloud_sigma_x: f64,
    /// Integration steps per pi-pulse duration.
    pub steps_per_pi: u32,
    pub recoil_schedule: RecoilSchedule,
}

impl SimulationConfig {
    /// Rb-85 parameters of the reference configuration: Delta = 9 GHz,
    /// delta = 0, Omega1 = Omega2 = 2.12e8 rad/s, T = 100 ms,
    /// tau_d = 150 us, N_R = 1, T_MOT = 2 uK, a = 1.85e-5 m/s^2.
    pub fn reference() -> Self {
        let species = AtomSpecies::rb85();
        let laser = LaserConfig::new(
            &species,
            212e6,
            212e6,
            TWO_PI * 9e9,
            0.0,
            Geometry::CounterPropagating,
        );
        let mut cfg = SimulationConfig {
            species,
            laser,
            sequence: build_sequence(1, 0.1, 150e-6, 2e-6, 1e-6).expect("reference sequence"),
            a_true: 1.85e-5,
            mot_temperature: 2e-6,
            n_samples: 200,
            epsilon_m: 0.02,
            rng_seed: 0,
            pulse_calibration: PulseCalibration::Calibrated,
            table_t_pi: 2e-6,
            table_t_half_pi: 1e-6,
            cloud_sigma_x: 1e-3,
            steps_per_pi: 200,
            recoil_schedule: RecoilSchedule::Alternating,
        };
        cfg.rebuild_sequence(1).expect("reference sequence");
        cfg
    }

    /// Pulse lengths (t_pi, t_half_pi) implied by the calibration mode.
    pub fn pulse_lengths(&self) -> (f64, f64) {
        match self.pulse_calibration {
            PulseCalibration::Table => (self.table_t_pi, self.table_t_half_pi),
            PulseCalibration::Calibrated => {
                let t = self.laser.calibrated_t_pi();
                (t, 0.5 * t)
            }
        }
    }

    /// Rebuild the pulse sequence for `n_r` with the current timings.
    pub fn rebuild_sequence(&mut self, n_r: i64) -> Result<()> {
        let (t_pi, t_half) = self.pulse_lengths();
        self.sequence =
            build_sequence(n_r, self.sequence.t_free, self.sequence.tau_d, t_pi, t_half)?;
        Ok(())
    }

    pub fn with_n_r(&self, n_r: i64) -> Result<Self> {
        let mut c = self.clone();
        c.rebuild_sequence(n_r)?;
        Ok(c)
    }

    /// Copy with a new single-photon detuning (rad/s); keeps the optical
    /// frequencies consistent and recalibrates pulse lengths if needed.
    pub fn with_delta_single(&self, delta: f64) -> Result<Self> {
        let mut c = self.clone();
        c.laser.omega1 += delta - c.laser.delta_single;
        c.laser.omega2 += delta - c.laser.delta_single;
        c.laser.delta_single = delta;
        c.rebuild_sequence(c.sequence.n_r as i64)?;
        Ok(c)
    }

    /// Copy with a new two-photon detuning (rad/s).
    pub fn with_delta_two(&self, delta: f64) -> Result<Self> {
        let mut c = self.clone();
        c.laser.omega2 -= delta - c.laser.delta_two;
        c.laser.delta_two = delta;
        Ok(c)
    }

    pub fn with_epsilon_m(&self, eps: f64) -> Result<Self> {
        let mut c = self.clone();
        c.epsilon_m = eps;
        c.validate()?;
        Ok(c)
    }

    pub fn alpha(&self) -> Result<f64> {
        alpha_scale(&self.sequence, self.laser.k_eff, self.laser.theta)
    }

    /// Integration step: `t_pi / steps_per_pi`.
    pub fn dt(&self) -> f64 {
        self.sequence.t_pi / self.steps_per_pi as f64
    }

    pub fn validate(&self) -> Result<()> {
        self.species.validate()?;
        self.laser.validate()?;
        if self.n_samples < 2 {
            return Err(Error::validation(format!(
                "n_samples must be at least 2, got {}",
                self.n_samples
            )));
        }
        if !(0.0..1.0).contains(&self.epsilon_m) {
            return Err(Error::validation(format!(
                "epsilon_m must lie in [0, 1), got {}",
                self.epsilon_m
            )));
        }
        if !(self.mot_temperature >= 0.0) || !(self.cloud_sigma_x >= 0.0) {
            return Err(Error::validation(
                "temperature and cloud size must be non-negative",
            ));
        }
        if !self.a_true.is_finite() {
            return Err(Error::validation("acceleration must be finite"));
        }
        if self.steps_per_pi == 0 {
            return Err(Error::validation("steps_per_pi must be positive"));
        }
        Ok(())
    }
}
