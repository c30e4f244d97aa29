//! Seeded Monte-Carlo over the atom cloud, the detection-error model, and the
//! reduction of per-atom outcomes to population statistics and an error
//! budget.
//!
//! Every random draw comes from a ChaCha stream keyed by (seed, purpose,
//! sample index), so results do not depend on how samples are scheduled
//! across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::amplitude::run_sequence;
use crate::error::{Error, Result};
use crate::physics::{AtomSpecies, SimulationConfig, K_B};
use crate::stats::{
    accel_error_budget, ErrorBudget, LossContext, LossNoiseModel, PopulationStats, QMode,
};

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "RAMAN_LMT_THREADS";

const STREAM_POSITION: u64 = 1;
const STREAM_VELOCITY: u64 = 2;
const STREAM_DETECTION: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomSample {
    /// m
    pub x0: f64,
    /// m/s, along k_eff
    pub v0: f64,
}

/// How the detection error perturbs the excited population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementModel {
    /// Zero-mean Gaussian with standard deviation epsilon_m * pop_e.
    Multiplicative,
    /// A fixed fraction epsilon_m of the excited population goes undetected.
    Deterministic,
}

/// What the DC offset of the figure of merit is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DcReference {
    /// The configured true acceleration a_tr, compared with <dev(a)>.
    TrueAcceleration,
    /// The read-out an ideal detector would give without loss (Q_tot = 0,
    /// no detection error), both scaled by alpha.
    LosslessReadout,
    /// Read-out rescaled so that the ideal lossless read-out reports a_tr;
    /// the offset is a_tr (1 - <phase> / <ideal phase>).
    CalibratedReadout,
}

/// Analysis choices that sit on top of the dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleOptions {
    pub q_mode: QMode,
    pub noise: LossNoiseModel,
    pub measurement: MeasurementModel,
    pub dc_reference: DcReference,
    /// Worker threads; `None` reads `RAMAN_LMT_THREADS`, else all cores.
    pub threads: Option<usize>,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions {
            q_mode: QMode::Random,
            noise: LossNoiseModel::default(),
            measurement: MeasurementModel::Multiplicative,
            dc_reference: DcReference::TrueAcceleration,
            threads: None,
        }
    }
}

/// Final populations of one simulated atom, before detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleOutcome {
    pub pop_e: f64,
    pub pop_g: f64,
    pub q_tot: f64,
}

/// One atom after detection and read-out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasuredOutcome {
    pub pop_e: f64,
    pub pop_g: f64,
    pub q_tot: f64,
    pub measured_pop_e: f64,
    /// Q_tot as used by the read-out for the chosen q mode.
    pub readout_q: f64,
    pub phase: f64,
    /// Ideal read-out phase (Q_tot = 0, no detection error).
    pub lossless_phase: f64,
    pub dev_a: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub outcomes: Vec<MeasuredOutcome>,
    pub stats: PopulationStats,
    pub budget: ErrorBudget,
    pub alpha: f64,
    /// Mean loss per pi pulse, Q_tot / m.
    pub q_per_pulse: f64,
    /// SHA-256 of the configuration and options, hex.
    pub fingerprint: String,
    pub rng_seed: u64,
}

/// Independent RNG stream for one (seed, purpose, index) triple.
pub fn stream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&purpose.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Thermal velocity spread along one axis, sqrt(k_B T / m).
pub fn thermal_sigma_v(mot_temperature: f64, species: &AtomSpecies) -> f64 {
    (K_B * mot_temperature / species.mass).sqrt()
}

/// Draw `n` atoms: Gaussian positions of width `cloud_sigma_x` and Gaussian
/// velocities at the MOT temperature.
pub fn sample_atoms(
    n: usize,
    seed: u64,
    mot_temperature: f64,
    species: &AtomSpecies,
    cloud_sigma_x: f64,
) -> Vec<AtomSample> {
    let sigma_v = thermal_sigma_v(mot_temperature, species);
    (0..n as u64)
        .map(|i| {
            let zx: f64 = stream(seed, STREAM_POSITION, i).sample(StandardNormal);
            let zv: f64 = stream(seed, STREAM_VELOCITY, i).sample(StandardNormal);
            AtomSample {
                x0: cloud_sigma_x * zx,
                v0: sigma_v * zv,
            }
        })
        .collect()
}

/// Detected excited population, clamped to [0, 1].
pub fn apply_measurement_error<R: Rng + ?Sized>(
    pop_e: f64,
    epsilon_m: f64,
    model: MeasurementModel,
    rng: &mut R,
) -> f64 {
    let out = match model {
        MeasurementModel::Multiplicative => {
            let z: f64 = rng.sample(StandardNormal);
            pop_e + epsilon_m * pop_e * z
        }
        MeasurementModel::Deterministic => pop_e * (1.0 - epsilon_m),
    };
    out.clamp(0.0, 1.0)
}

/// Worker count: explicit request, then `RAMAN_LMT_THREADS`, then all cores.
pub fn resolve_threads(requested: Option<usize>) -> usize {
    requested
        .or_else(|| {
            std::env::var(THREADS_ENV)
                .ok()
                .and_then(|v| v.trim().parse().ok())
        })
        .filter(|&n| n > 0)
        .unwrap_or_else(num_threads_default)
}

fn num_threads_default() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Run `f` over `0..n` on `threads` workers, results in index order.
pub(crate) fn par_map<T, F>(n: usize, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if threads <= 1 {
        return (0..n).map(&f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::validation(format!("thread pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}

/// Dynamics for every atom of the cloud under acceleration `accel`.
pub fn simulate_samples(
    cfg: &SimulationConfig,
    accel: f64,
    threads: Option<usize>,
) -> Result<Vec<SampleOutcome>> {
    cfg.validate()?;
    let atoms = sample_atoms(
        cfg.n_samples,
        cfg.rng_seed,
        cfg.mot_temperature,
        &cfg.species,
        cfg.cloud_sigma_x,
    );
    par_map(atoms.len(), resolve_threads(threads), |i| {
        let a = atoms[i];
        let s = run_sequence(a.x0, a.v0, cfg, accel).map_err(|e| e.in_sample(i))?;
        Ok(SampleOutcome {
            pop_e: s.pop_e(),
            pop_g: s.pop_g(),
            q_tot: s.q_tot,
        })
    })
}

/// Apply detection error and read-out to simulated outcomes and reduce them
/// to statistics and an error budget.
pub fn analyze(
    cfg: &SimulationConfig,
    samples: &[SampleOutcome],
    opts: &EnsembleOptions,
) -> Result<EnsembleResult> {
    if samples.len() < 2 {
        return Err(Error::validation("an ensemble needs at least two samples"));
    }
    let alpha = cfg.alpha()?;
    let m = cfg.sequence.q_weight();
    let mean_q = samples.iter().map(|s| s.q_tot).sum::<f64>() / samples.len() as f64;

    let mut outcomes = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let mut rng = stream(cfg.rng_seed, STREAM_DETECTION, i as u64);
        let measured = apply_measurement_error(s.pop_e, cfg.epsilon_m, opts.measurement, &mut rng);
        let readout_q = match opts.q_mode {
            QMode::Zero => 0.0,
            QMode::Constant => mean_q,
            QMode::Random => s.q_tot,
        };
        // A detector can report more excited atoms than the loss bookkeeping
        // leaves room for; the read-out then saturates at the bright port.
        let measured = measured.min(1.0 - readout_q).max(0.0);
        let phase = saturated_phase(measured, readout_q).map_err(|e| e.in_sample(i))?;
        let lossless_phase = saturated_phase(s.pop_e.min(1.0), 0.0).map_err(|e| e.in_sample(i))?;
        outcomes.push(MeasuredOutcome {
            pop_e: s.pop_e,
            pop_g: s.pop_g,
            q_tot: s.q_tot,
            measured_pop_e: measured,
            readout_q,
            phase,
            lossless_phase,
            dev_a: alpha * phase,
        });
    }

    let xs: Vec<f64> = outcomes.iter().map(|o| o.measured_pop_e).collect();
    let qs: Vec<f64> = outcomes.iter().map(|o| o.readout_q).collect();
    let ctx = LossContext {
        m,
        gamma_l: cfg.species.gamma_l,
        t_pulse: cfg.sequence.t_pi,
    };
    let stats = PopulationStats::from_samples(&xs, &qs, opts.q_mode, &ctx, &opts.noise)?;
    let dev_a: Vec<f64> = outcomes.iter().map(|o| o.dev_a).collect();
    let n = outcomes.len() as f64;
    let ideal = outcomes.iter().map(|o| o.lossless_phase).sum::<f64>() / n;
    let budget = match opts.dc_reference {
        DcReference::TrueAcceleration => {
            accel_error_budget(&stats, alpha, cfg.a_true, &dev_a, opts.noise.ratio_cross)?
        }
        DcReference::LosslessReadout => {
            accel_error_budget(&stats, alpha, alpha * ideal, &dev_a, opts.noise.ratio_cross)?
        }
        DcReference::CalibratedReadout => {
            if !(ideal > 0.0) {
                return Err(Error::DegenerateDenominator { mean_y: ideal });
            }
            let scaled: Vec<f64> = outcomes
                .iter()
                .map(|o| cfg.a_true * o.phase / ideal)
                .collect();
            accel_error_budget(&stats, alpha, cfg.a_true, &scaled, opts.noise.ratio_cross)?
        }
    };
    Ok(EnsembleResult {
        outcomes,
        stats,
        budget,
        alpha,
        q_per_pulse: if m > 0.0 { mean_q / m } else { 0.0 },
        fingerprint: fingerprint(cfg, opts),
        rng_seed: cfg.rng_seed,
    })
}

/// Read-out phase atan(sqrt(x / (1 - x - q))), equal to pi/2 when nothing is
/// left in |g>.
pub fn saturated_phase(x: f64, q: f64) -> Result<f64> {
    let rest = 1.0 - x - q;
    if rest < -1e-12 || 1.0 - q <= 0.0 {
        return Err(Error::DegeneratePopulation { remaining: rest });
    }
    Ok(x.sqrt().atan2(rest.max(0.0).sqrt()))
}

/// Simulate and analyze one parameter point at the configured acceleration.
pub fn run_ensemble(cfg: &SimulationConfig, opts: &EnsembleOptions) -> Result<EnsembleResult> {
    let samples = simulate_samples(cfg, cfg.a_true, opts.threads)?;
    analyze(cfg, &samples, opts)
}

/// Stable digest of everything that determines a result. Thread count is
/// deliberately excluded.
pub fn fingerprint(cfg: &SimulationConfig, opts: &EnsembleOptions) -> String {
    let mut o = *opts;
    o.threads = None;
    let text = format!("{cfg:?}|{o:?}");
    hex::encode(Sha256::digest(text.as_bytes()))
}
