//! Three-level density-matrix dynamics, used as an independent check of the
//! eliminated amplitude engine.
//!
//! Basis order is (g, e, i). The frame rotates with the lasers so the
//! Hamiltonian is time independent for a static atom:
//!
//! ```text
//!       | 0                0                 Om1 e^{-i phi1} |
//!   H = | 0               -delta             Om2 e^{-i phi2} |
//!       | Om1 e^{i phi1}   Om2 e^{i phi2}    Delta           |
//! ```
//!
//! with phi1 = k1 x_g, phi2 = k2 x_e. |i> decays at Gamma = gamma_g +
//! gamma_e + gamma_l; the gamma_g and gamma_e branches refill |g> and |e>,
//! the gamma_l branch leaves the system, so the trace falls at gamma_l rho_ii.
//! Doppler shifts are not modelled separately; motion enters only through
//! the positions in phi1 and phi2.

use num_complex::Complex64 as C64;

use crate::amplitude::{apply_pulse, Coupling, QuantumState};
use crate::error::{Error, Result};
use crate::numerics::integrate;
use crate::physics::{PulseRole, SegmentKind, SimulationConfig};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

pub const G: usize = 0;
pub const E: usize = 1;
pub const X: usize = 2;

/// Row-major 3x3 density matrix over (g, e, i).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix3 {
    pub rho: [C64; 9],
}

impl DensityMatrix3 {
    pub fn ground() -> Self {
        let mut rho = [ZERO; 9];
        rho[0] = C64::new(1.0, 0.0);
        DensityMatrix3 { rho }
    }

    /// Pure state |psi><psi| for amplitudes (g, e, i).
    pub fn pure(psi: [C64; 3]) -> Self {
        let mut rho = [ZERO; 9];
        for r in 0..3 {
            for c in 0..3 {
                rho[3 * r + c] = psi[r] * psi[c].conj();
            }
        }
        DensityMatrix3 { rho }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> C64 {
        self.rho[3 * r + c]
    }

    pub fn trace(&self) -> f64 {
        self.rho[0].re + self.rho[4].re + self.rho[8].re
    }

    /// Largest entry of |rho - rho^dagger|.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..3 {
            for c in 0..3 {
                worst = worst.max((self.at(r, c) - self.at(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn min_diagonal(&self) -> f64 {
        self.rho[0].re.min(self.rho[4].re).min(self.rho[8].re)
    }
}

/// Rates, couplings and laser phases for the density-matrix equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityParams {
    pub rabi1: f64,
    pub rabi2: f64,
    pub delta: f64,
    pub delta_two: f64,
    pub gamma_g: f64,
    pub gamma_e: f64,
    pub gamma_l: f64,
    /// k1 x_g and k2 x_e, rad.
    pub phi1: f64,
    pub phi2: f64,
}

impl DensityParams {
    pub fn from_config(cfg: &SimulationConfig) -> Self {
        let s = &cfg.species;
        DensityParams {
            rabi1: cfg.laser.rabi1,
            rabi2: cfg.laser.rabi2,
            delta: cfg.laser.delta_single,
            delta_two: cfg.laser.delta_two,
            gamma_g: s.gamma_g,
            gamma_e: s.gamma_e,
            gamma_l: s.gamma_l,
            phi1: 0.0,
            phi2: 0.0,
        }
    }

    pub fn gamma_total(&self) -> f64 {
        self.gamma_g + self.gamma_e + self.gamma_l
    }

    fn hamiltonian(&self) -> [C64; 9] {
        let a = C64::from_polar(self.rabi1, -self.phi1);
        let b = C64::from_polar(self.rabi2, -self.phi2);
        [
            ZERO,
            ZERO,
            a,
            ZERO,
            C64::new(-self.delta_two, 0.0),
            b,
            a.conj(),
            b.conj(),
            C64::new(self.delta, 0.0),
        ]
    }
}

#[inline]
fn lindblad(rho: &[C64; 9], h: &[C64; 9], gamma: f64, gamma_g: f64, gamma_e: f64) -> [C64; 9] {
    let mut out = [ZERO; 9];
    for r in 0..3 {
        for c in 0..3 {
            let mut comm = ZERO;
            for k in 0..3 {
                comm += h[3 * r + k] * rho[3 * k + c] - rho[3 * r + k] * h[3 * k + c];
            }
            let mut v = -I * comm;
            // anticommutator with the projector on |i>
            let proj = (if r == X { 1.0 } else { 0.0 }) + (if c == X { 1.0 } else { 0.0 });
            v -= rho[3 * r + c] * (0.5 * gamma * proj);
            out[3 * r + c] = v;
        }
    }
    let rii = rho[8].re;
    out[0] += C64::new(gamma_g * rii, 0.0);
    out[4] += C64::new(gamma_e * rii, 0.0);
    out
}

/// Open-system right-hand side d(rho)/dt in physical units.
pub fn rho_derivatives_open(rho: &DensityMatrix3, p: &DensityParams) -> DensityMatrix3 {
    let h = p.hamiltonian();
    DensityMatrix3 {
        rho: lindblad(&rho.rho, &h, p.gamma_total(), p.gamma_g, p.gamma_e),
    }
}

/// Closed-system right-hand side d(rho)/d(tau), tau = Gamma t, with both
/// decay branches returning to the ground states at Gamma/2 each. The
/// couplings and detunings in `p` are read in units of Gamma.
pub fn rho_derivatives_closed(rho: &DensityMatrix3, p: &DensityParams) -> DensityMatrix3 {
    let h = p.hamiltonian();
    DensityMatrix3 {
        rho: lindblad(&rho.rho, &h, 1.0, 0.5, 0.5),
    }
}

/// Steady-state optical coherences (rho_gi, rho_ei) slaved to the ground
/// block, neglecting the intermediate population.
pub fn steady_state_coherences(
    rho_gg: f64,
    rho_ge: C64,
    rho_ee: f64,
    p: &DensityParams,
) -> (C64, C64) {
    let gamma = p.gamma_total();
    let a = C64::from_polar(p.rabi1, -p.phi1);
    let b = C64::from_polar(p.rabi2, -p.phi2);
    let gi = I * (a * rho_gg + b * rho_ge) / C64::new(0.5 * gamma, -p.delta);
    let ei = I * (a * rho_ge.conj() + b * rho_ee) / C64::new(0.5 * gamma, -(p.delta + p.delta_two));
    (gi, ei)
}

/// Reduced equations for (rho_gg, rho_ge, rho_ee) with the optical
/// coherences replaced by their steady-state values.
pub fn rho_adiabatic_derivatives(
    rho_gg: f64,
    rho_ge: C64,
    rho_ee: f64,
    p: &DensityParams,
) -> Result<(f64, C64, f64)> {
    if 1.0 - rho_gg - rho_ee < -1e-6 {
        return Err(Error::validation(format!(
            "ground-block populations exceed one: {rho_gg} + {rho_ee}"
        )));
    }
    let (gi, ei) = steady_state_coherences(rho_gg, rho_ge, rho_ee, p);
    let a = C64::from_polar(p.rabi1, -p.phi1);
    let b = C64::from_polar(p.rabi2, -p.phi2);
    let dgg = 2.0 * (I * a.conj() * gi).re;
    let dee = 2.0 * (I * b.conj() * ei).re;
    let dge = -I * a * ei.conj() - I * p.delta_two * rho_ge + I * b.conj() * gi;
    Ok((dgg, dge, dee))
}

/// Integrate the open-system equations over `duration` from `rho`, using a
/// step that resolves the single-photon detuning.
pub fn evolve_open(
    rho: &DensityMatrix3,
    p: &DensityParams,
    duration: f64,
) -> Result<DensityMatrix3> {
    let fastest = p
        .delta
        .abs()
        .max(p.rabi1.abs())
        .max(p.rabi2.abs())
        .max(p.gamma_total());
    let dt = (std::f64::consts::TAU / (40.0 * fastest)).min(duration / 100.0);
    let h = p.hamiltonian();
    let (gamma, gg, ge) = (p.gamma_total(), p.gamma_g, p.gamma_e);
    let f = |y: &[C64; 9], _t: f64| lindblad(y, &h, gamma, gg, ge);
    let out = integrate(&rho.rho, 0.0, duration, dt, &f)?;
    Ok(DensityMatrix3 { rho: out })
}

/// Populations after one pulse from both engines, starting in |g> with a
/// static atom at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleComparison {
    pub amplitude_pop_g: f64,
    pub amplitude_pop_e: f64,
    pub amplitude_loss: f64,
    pub density_pop_g: f64,
    pub density_pop_e: f64,
    pub density_loss: f64,
}

impl OracleComparison {
    pub fn discrepancy(&self) -> f64 {
        (self.amplitude_pop_g - self.density_pop_g)
            .abs()
            .max((self.amplitude_pop_e - self.density_pop_e).abs())
            .max((self.amplitude_loss - self.density_loss).abs())
    }
}

/// Run one pulse of `kind` (HalfPi or Pi) through both engines, with the
/// density engine using the species' decay branches.
pub fn oracle_run(cfg: &SimulationConfig, kind: SegmentKind) -> Result<OracleComparison> {
    oracle_run_with(cfg, kind, &DensityParams::from_config(cfg))
}

/// As [`oracle_run`] with explicit density-engine parameters.
pub fn oracle_run_with(
    cfg: &SimulationConfig,
    kind: SegmentKind,
    params: &DensityParams,
) -> Result<OracleComparison> {
    let duration = match kind {
        SegmentKind::Pi => cfg.sequence.t_pi,
        SegmentKind::HalfPi => cfg.sequence.t_half_pi,
        SegmentKind::Free => {
            return Err(Error::validation(
                "oracle comparison needs an optical pulse",
            ))
        }
    };
    let p = Coupling::new(cfg, 1.0);
    let amp = apply_pulse(
        &QuantumState::ground(0.0, 0.0),
        PulseRole::Recombine,
        duration,
        &p,
        cfg.dt(),
        0.0,
        0.0,
    )?;
    let rho = evolve_open(&DensityMatrix3::ground(), params, duration)?;
    Ok(OracleComparison {
        amplitude_pop_g: amp.pop_g(),
        amplitude_pop_e: amp.pop_e(),
        amplitude_loss: amp.q_tot,
        density_pop_g: rho.at(G, G).re,
        density_pop_e: rho.at(E, E).re,
        density_loss: 1.0 - rho.trace(),
    })
}

/// Maximum absolute population discrepancy between the engines.
pub fn oracle_compare(cfg: &SimulationConfig, kind: SegmentKind) -> Result<f64> {
    Ok(oracle_run(cfg, kind)?.discrepancy())
}
