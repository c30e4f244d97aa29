//! Loss bookkeeping and the error-propagation chain from final populations
//! to the acceleration figure of merit.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::amplitude::Coupling;
use crate::error::{Error, Result};

/// How the loss Q_tot enters the population statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QMode {
    /// Lossless read-out: Q_tot = 0, Y = 1 - X.
    Zero,
    /// Q_tot fixed at its ensemble mean, no fluctuation.
    Constant,
    /// Q_tot fluctuates with the modelled variance and covariance.
    Random,
}

/// Normalization of the per-pulse loss variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossVariance {
    /// gamma_l t Q (1 - Q / (gamma_l t)), loss-state occupation Q/(gamma_l t).
    Operator,
    /// Q (1 - Q), loss-state occupation Q.
    Bernoulli,
}

/// Which closed form supplies cov(|c_e|^2, Q_tot).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceForm {
    /// -(m/2) var(Q) / s, s the occupation scale of the variance model.
    PerPulse,
    /// -var(Q_tot) / (2 s) with var(Q_tot) = m^2 var(Q).
    Total,
}

/// Cross term of the ratio variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioCross {
    /// First-order delta method with cov(X, Y), Y = 1 - X - Q_tot.
    DeltaMethod,
    /// cov(X, Q_tot) in place of cov(X, Y); vanishes when Q_tot is fixed.
    LossOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LossNoiseModel {
    pub variance: LossVariance,
    pub covariance: CovarianceForm,
    pub ratio_cross: RatioCross,
}

impl Default for LossNoiseModel {
    fn default() -> Self {
        LossNoiseModel {
            variance: LossVariance::Operator,
            covariance: CovarianceForm::PerPulse,
            ratio_cross: RatioCross::DeltaMethod,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationStats {
    pub mean_pop_e: f64,
    pub var_pop_e: f64,
    pub mean_q: f64,
    pub var_q: f64,
    pub cov_eq: f64,
    pub n: usize,
    pub q_mode: QMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBudget {
    pub mean_dev_a: f64,
    /// Analytic variance from the ratio/arctangent chain.
    pub var_dev_a: f64,
    /// Plain sample variance of dev(a), for comparison.
    pub sample_var_dev_a: f64,
    pub dc_offset: f64,
    pub fom: f64,
    /// Slope and intercept of the linearized arctangent.
    pub d: f64,
    pub b: f64,
}

/// Loss into the dark state over a pulse of length `t_tot`, from the entry
/// amplitudes and the two-photon phase `dkx` = k2 x_e - k1 x_g.
pub fn analytical_q(c_g: C64, c_e: C64, p: &Coupling, dkx: f64, t_tot: f64) -> Result<f64> {
    if p.gamma == 0.0 {
        return Ok(0.0);
    }
    if p.delta.abs() < 10.0 * p.gamma {
        log::warn!(
            "single-photon detuning {:e} rad/s is not large against the decay rate; loss estimate degrades",
            p.delta
        );
    }
    let hg = 0.25 * p.gamma * p.gamma;
    let s = p.delta + p.delta_two;
    let direct = p.rabi1 * p.rabi1 * c_g.norm_sqr() / (p.delta * p.delta + hg)
        + p.rabi2 * p.rabi2 * c_e.norm_sqr() / (s * s + hg);
    let cross = p.rabi1 * p.rabi2 * c_g * c_e.conj() * C64::from_polar(1.0, -dkx)
        / (p.d1() * p.d2().conj());
    let mut q = p.gamma * t_tot * (direct + 2.0 * cross.re);
    if q < 0.0 && q > -1e-12 {
        q = 0.0;
    }
    if !(q < 1.0) {
        return Err(Error::LossOverflow { q });
    }
    Ok(q.max(0.0))
}

fn occupation_scale(model: LossVariance, gamma_l: f64, t_tot: f64) -> f64 {
    match model {
        LossVariance::Operator => gamma_l * t_tot,
        LossVariance::Bernoulli => 1.0,
    }
}

/// Per-pulse loss variance gamma_l t Q (1 - Q/(gamma_l t)).
pub fn variance_q(q: f64, gamma_l: f64, t_tot: f64) -> Result<f64> {
    variance_q_with(LossVariance::Operator, q, gamma_l, t_tot)
}

pub fn variance_q_with(model: LossVariance, q: f64, gamma_l: f64, t_tot: f64) -> Result<f64> {
    if !(q >= 0.0) {
        return Err(Error::validation(format!(
            "loss must be non-negative, got {q}"
        )));
    }
    let s = occupation_scale(model, gamma_l, t_tot);
    if q == 0.0 {
        return Ok(0.0);
    }
    if !(s > 0.0) || q > s {
        return Err(Error::ModelViolation { q, gamma_t: s });
    }
    Ok(s * q * (1.0 - q / s))
}

/// Covariance of the excited population with the loss, -(m/2) Q (1 - Q/(gamma_l t)).
pub fn covariance_ce_q(q: f64, m: f64, gamma_l: f64, t_tot: f64) -> Result<f64> {
    covariance_ce_q_with(&LossNoiseModel::default(), q, m, gamma_l, t_tot)
}

pub fn covariance_ce_q_with(
    model: &LossNoiseModel,
    q: f64,
    m: f64,
    gamma_l: f64,
    t_tot: f64,
) -> Result<f64> {
    let var = variance_q_with(model.variance, q, gamma_l, t_tot)?;
    if var == 0.0 {
        return Ok(0.0);
    }
    let s = occupation_scale(model.variance, gamma_l, t_tot);
    Ok(match model.covariance {
        CovarianceForm::PerPulse => -0.5 * m * var / s,
        CovarianceForm::Total => -(m * m * var) / (2.0 * s),
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Per-pulse loss figures needed to model Q_tot fluctuations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossContext {
    /// Loss weight m = 2 N_R.
    pub m: f64,
    pub gamma_l: f64,
    /// Pi-pulse duration, s.
    pub t_pulse: f64,
}

impl PopulationStats {
    /// Aggregate measured excited populations and per-run losses.
    pub fn from_samples(
        pop_e: &[f64],
        q_tot: &[f64],
        q_mode: QMode,
        ctx: &LossContext,
        model: &LossNoiseModel,
    ) -> Result<Self> {
        let n = pop_e.len();
        if n < 2 || q_tot.len() != n {
            return Err(Error::validation(
                "population statistics need at least two paired samples",
            ));
        }
        let mean_pop_e = mean(pop_e);
        let var_pop_e = sample_variance(pop_e);
        let (mean_q, var_q, cov_eq) = match q_mode {
            QMode::Zero => (0.0, 0.0, 0.0),
            QMode::Constant => (mean(q_tot), 0.0, 0.0),
            QMode::Random => {
                let mq = mean(q_tot);
                let per_pulse = if ctx.m > 0.0 { mq / ctx.m } else { 0.0 };
                let var = variance_q_with(model.variance, per_pulse, ctx.gamma_l, ctx.t_pulse)?;
                let var_tot = ctx.m * ctx.m * var;
                let cov = covariance_ce_q_with(model, per_pulse, ctx.m, ctx.gamma_l, ctx.t_pulse)?;
                // Keep the modelled covariance inside the Cauchy-Schwarz bound
                // implied by the measured excited-population spread.
                let bound = (var_pop_e * var_tot).sqrt();
                (mq, var_tot, cov.clamp(-bound, bound))
            }
        };
        Ok(PopulationStats {
            mean_pop_e,
            var_pop_e,
            mean_q,
            var_q,
            cov_eq,
            n,
            q_mode,
        })
    }
}

/// Mean and variance (of the mean over `n` samples) of R1 = X / Y with
/// X = |c_e|^2 and Y = 1 - X - Q_tot, by second-order Taylor expansion.
pub fn ratio_moments(stats: &PopulationStats) -> Result<(f64, f64)> {
    ratio_moments_with(stats, RatioCross::DeltaMethod)
}

pub fn ratio_moments_with(stats: &PopulationStats, cross: RatioCross) -> Result<(f64, f64)> {
    let mx = stats.mean_pop_e;
    let my = 1.0 - mx - stats.mean_q;
    if !(my > 0.0) {
        return Err(Error::DegenerateDenominator { mean_y: my });
    }
    if stats.n < 1 {
        return Err(Error::validation("ratio moments need samples"));
    }
    let var_x = stats.var_pop_e;
    let var_y = var_x + stats.var_q + 2.0 * stats.cov_eq;
    let cov_xy = -var_x - stats.cov_eq;
    let mean = mx / my + var_y * mx / my.powi(3) - cov_xy / my.powi(2);
    let cross_cov = match cross {
        RatioCross::DeltaMethod => cov_xy,
        RatioCross::LossOnly => stats.cov_eq,
    };
    let var = (var_x / my.powi(2) + mx * mx * var_y / my.powi(4)
        - 2.0 * mx * cross_cov / my.powi(3))
        / stats.n as f64;
    Ok((mean, var.max(0.0)))
}

/// Linearized arctangent: returns (var(phi), d, b) with d = 1/(1+R1^2),
/// b = atan(R1), var(phi) = var(R1) d^2 + 2 d b sqrt(var(R1)) + b^2.
pub fn phase_variance(r1_mean: f64, r1_var: f64) -> Result<(f64, f64, f64)> {
    if !(r1_var >= 0.0) {
        return Err(Error::validation(format!(
            "ratio variance must be non-negative, got {r1_var}"
        )));
    }
    let d = 1.0 / (1.0 + r1_mean * r1_mean);
    let b = r1_mean.atan();
    let var = r1_var * d * d + 2.0 * d * b * r1_var.sqrt() + b * b;
    Ok((var, d, b))
}

/// Combine the analytic variance chain with the sampled mean deviation.
pub fn accel_error_budget(
    stats: &PopulationStats,
    alpha: f64,
    a_tr: f64,
    dev_a: &[f64],
    cross: RatioCross,
) -> Result<ErrorBudget> {
    if dev_a.is_empty() {
        return Err(Error::validation("error budget needs at least one sample"));
    }
    if !alpha.is_finite() {
        return Err(Error::validation("alpha must be finite"));
    }
    let (r1, r1_var) = ratio_moments_with(stats, cross)?;
    let (var_phi, d, b) = phase_variance(r1, r1_var)?;
    let mean_dev_a = mean(dev_a);
    let var_dev_a = alpha * alpha * var_phi;
    let dc_offset = (a_tr - mean_dev_a).powi(2);
    Ok(ErrorBudget {
        mean_dev_a,
        var_dev_a,
        sample_var_dev_a: sample_variance(dev_a),
        dc_offset,
        fom: dc_offset + var_dev_a,
        d,
        b,
    })
}

/// Shot-noise style acceleration variance from mean populations.
pub fn accel_variance_poisson(
    rho_ee: f64,
    rho_gg: f64,
    n: usize,
    alpha: f64,
    a_mean: f64,
) -> Result<f64> {
    if !(rho_gg > 0.0) || n == 0 {
        return Err(Error::validation(
            "Poisson variance needs rho_gg > 0 and n > 0",
        ));
    }
    let arg = alpha * a_mean;
    let half_pi = std::f64::consts::FRAC_PI_2;
    if arg.abs() < 1e-12 || (arg.abs() - half_pi).abs() < 1e-12 {
        return Err(Error::LinearizationSingularity { arg });
    }
    let tan = arg.tan();
    let slope = 2.0 * alpha * (tan + tan.powi(3));
    Ok((rho_ee / rho_gg.powi(3)) * (rho_gg + rho_ee) / (slope * slope) / n as f64)
}
