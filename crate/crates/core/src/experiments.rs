//! Parameter sweeps over pulse count, detunings and detection error, and the
//! minimum-FOM search.

use crate::ensemble::{
    analyze, par_map, resolve_threads, simulate_samples, EnsembleOptions, EnsembleResult,
};
use crate::error::{Error, Result};
use crate::physics::SimulationConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    /// N_R, odd.
    PulseCount,
    /// Delta, rad/s.
    SingleDetuning,
    /// delta, rad/s.
    TwoPhotonDetuning,
    /// epsilon_m, fraction.
    MeasurementError,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::PulseCount => "n_r",
            SweepAxis::SingleDetuning => "delta_single_rad_s",
            SweepAxis::TwoPhotonDetuning => "delta_two_rad_s",
            SweepAxis::MeasurementError => "epsilon_m",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: SimulationConfig,
    pub axis: SweepAxis,
    /// Axis values in SI units, strictly increasing.
    pub values: Vec<f64>,
    pub options: EnsembleOptions,
    pub replicate_seeds: Vec<u64>,
}

/// Default replicate seeds.
pub fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

/// Odd pulse counts 1, 3, ..., 41.
pub fn default_pulse_grid() -> Vec<f64> {
    (1..=41).step_by(2).map(f64::from).collect()
}

impl SweepSpec {
    pub fn new(base: SimulationConfig, axis: SweepAxis, values: Vec<f64>) -> Self {
        SweepSpec {
            base,
            axis,
            values,
            options: EnsembleOptions::default(),
            replicate_seeds: default_seeds(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.values.is_empty() {
            return Err(Error::validation("sweep needs at least one value"));
        }
        if self.replicate_seeds.is_empty() {
            return Err(Error::validation("sweep needs at least one seed"));
        }
        if let Some(w) = self.values.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::validation(format!(
                "sweep values must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        for &v in &self.values {
            self.point_config(v)?;
        }
        Ok(())
    }

    /// Base configuration moved to axis value `v`.
    pub fn point_config(&self, v: f64) -> Result<SimulationConfig> {
        let cfg = match self.axis {
            SweepAxis::PulseCount => {
                if v.fract() != 0.0 || v < 1.0 || v % 2.0 != 1.0 {
                    return Err(Error::validation(format!(
                        "pulse count must be an odd positive integer, got {v}"
                    )));
                }
                self.base.with_n_r(v as i64)?
            }
            SweepAxis::SingleDetuning => self.base.with_delta_single(v)?,
            SweepAxis::TwoPhotonDetuning => self.base.with_delta_two(v)?,
            SweepAxis::MeasurementError => self.base.with_epsilon_m(v)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One sweep point reduced over the replicate seeds. On failure the numeric
/// fields are NaN and `error` holds the first failure.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// dc_offset + var_dev_a.
    pub fom: f64,
    pub var_dev_a: f64,
    pub dc_offset: f64,
    pub q_per_pulse: f64,
    /// Sample standard deviation of the per-seed FOM (0 for a single seed).
    pub fom_spread: f64,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(value: f64, err: &Error) -> Self {
        SweepRow {
            value,
            fom: f64::NAN,
            var_dev_a: f64::NAN,
            dc_offset: f64::NAN,
            q_per_pulse: f64::NAN,
            fom_spread: f64::NAN,
            error: Some(err.to_string()),
        }
    }

    /// Mean over seeds of the per-seed budgets.
    pub fn from_results(value: f64, results: &[EnsembleResult]) -> Self {
        let n = results.len() as f64;
        let mean = |f: &dyn Fn(&EnsembleResult) -> f64| results.iter().map(f).sum::<f64>() / n;
        let var_dev_a = mean(&|r| r.budget.var_dev_a);
        let dc_offset = mean(&|r| r.budget.dc_offset);
        let foms: Vec<f64> = results.iter().map(|r| r.budget.fom).collect();
        SweepRow {
            value,
            fom: dc_offset + var_dev_a,
            var_dev_a,
            dc_offset,
            q_per_pulse: mean(&|r| r.q_per_pulse),
            fom_spread: crate::stats::sample_variance(&foms).sqrt(),
            error: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Run every (value, seed) job and reduce to one row per value, in axis
/// order. A failing job marks its row as failed; the sweep carries on.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let threads = resolve_threads(spec.options.threads);
    let seeds = &spec.replicate_seeds;

    if spec.axis == SweepAxis::MeasurementError {
        // The detection error does not touch the dynamics: simulate once per
        // seed and re-analyze for every epsilon.
        let sims = par_map(seeds.len(), threads, |j| {
            let mut cfg = spec.base.clone();
            cfg.rng_seed = seeds[j];
            Ok(simulate_samples(&cfg, cfg.a_true, Some(1)).map(|s| (cfg, s)))
        })?;
        let rows = spec
            .values
            .iter()
            .map(|&v| {
                let per_seed: Result<Vec<EnsembleResult>> = sims
                    .iter()
                    .map(|sim| {
                        let (cfg, samples) = sim.as_ref().map_err(Clone::clone)?;
                        let cfg = cfg.with_epsilon_m(v)?;
                        analyze(&cfg, samples, &spec.options)
                    })
                    .collect();
                reduce(v, per_seed)
            })
            .collect();
        return Ok(rows);
    }

    let jobs: Vec<(usize, u64)> = (0..spec.values.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let results = par_map(jobs.len(), threads, |j| {
        let (i, seed) = jobs[j];
        Ok(run_point(spec, spec.values[i], seed))
    })?;
    Ok(results
        .chunks(seeds.len())
        .zip(&spec.values)
        .map(|(chunk, &v)| reduce(v, chunk.iter().cloned().collect()))
        .collect())
}

fn run_point(spec: &SweepSpec, value: f64, seed: u64) -> Result<EnsembleResult> {
    let mut cfg = spec.point_config(value)?;
    cfg.rng_seed = seed;
    let samples = simulate_samples(&cfg, cfg.a_true, Some(1))?;
    analyze(&cfg, &samples, &spec.options)
}

fn reduce(value: f64, per_seed: Result<Vec<EnsembleResult>>) -> SweepRow {
    match per_seed {
        Ok(results) => SweepRow::from_results(value, &results),
        Err(e) => SweepRow::failed(value, &e),
    }
}

/// Axis value and FOM of the best row; ties go to the smaller axis value.
pub fn find_min_fom(rows: &[SweepRow]) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for r in rows.iter().filter(|r| r.is_ok() && r.fom.is_finite()) {
        best = match best {
            Some((v, f)) if f < r.fom || (f == r.fom && v <= r.value) => Some((v, f)),
            _ => Some((r.value, r.fom)),
        };
    }
    best.ok_or(Error::NoData)
}
