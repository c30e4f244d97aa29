//! TOML run configuration. Every physical key carries its unit in the name;
//! detunings are cyclic (GHz, kHz), Rabi and decay rates angular (rad/us).
//!
//! Missing keys fall back to the reference values and each fallback is
//! logged. Unknown keys, bad values and invariant violations are reported
//! with the key and the line they appear on.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::ensemble::{DcReference, EnsembleOptions, MeasurementModel};
use crate::error::{Error, Result};
use crate::experiments::{SweepAxis, SweepSpec};
use crate::physics::{
    build_sequence, AtomSpecies, Geometry, LaserConfig, PulseCalibration, RecoilSchedule,
    SimulationConfig, TWO_PI,
};
use crate::stats::{CovarianceForm, LossNoiseModel, LossVariance, QMode, RatioCross};

macro_rules! run_config {
    ($($(#[doc = $doc:literal])* $name:ident : $ty:ty = $default:expr;)*) => {
        /// A run configuration in file units.
        #[derive(Debug, Clone, PartialEq, Serialize)]
        pub struct RunConfig {
            $($(#[doc = $doc])* pub $name: $ty,)*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                RunConfig { $($name: $default,)* }
            }
        }

        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct RawConfig {
            $(#[serde(default)] $name: Option<Spanned<$ty>>,)*
        }

        impl RawConfig {
            /// Fill defaults and record the byte offset of each key present.
            fn resolve(self) -> (RunConfig, BTreeMap<&'static str, usize>) {
                let mut at = BTreeMap::new();
                let d = RunConfig::default();
                let cfg = RunConfig {
                    $($name: match self.$name {
                        Some(v) => {
                            at.insert(stringify!($name), v.span().start);
                            v.into_inner()
                        }
                        None => {
                            log::info!("config: {} not set, using {:?}", stringify!($name), d.$name);
                            d.$name
                        }
                    },)*
                };
                (cfg, at)
            }
        }
    };
}

run_config! {
    delta_single_ghz: f64 = 9.0;
    delta_two_khz: f64 = 0.0;
    /// Differential light shift added to the two-photon detuning.
    delta_ac_khz: f64 = 0.0;
    rabi1_rad_per_us: f64 = 212.0;
    rabi2_rad_per_us: f64 = 212.0;
    /// Decay rate of |i> into the loss state; the rest of the total rate
    /// returns to |g> and |e> in equal parts.
    gamma_l_rad_per_us: f64 = 38.117;
    geometry: Geometry = Geometry::CounterPropagating;
    theta_rad: f64 = 0.0;
    n_r: i64 = 1;
    t_free_ms: f64 = 100.0;
    tau_d_us: f64 = 150.0;
    /// Pulse lengths used when pulse_mode = "table".
    t_pi_us: f64 = 2.0;
    t_half_pi_us: f64 = 1.0;
    pulse_mode: PulseCalibration = PulseCalibration::Calibrated;
    recoil_schedule: RecoilSchedule = RecoilSchedule::Alternating;
    a_true_m_s2: f64 = 1.85e-5;
    mot_temperature_uk: f64 = 2.0;
    cloud_sigma_x_mm: f64 = 1.0;
    n_samples: usize = 200;
    epsilon_m: f64 = 0.02;
    seed: u64 = 0;
    steps_per_pi: u32 = 200;
    q_mode: QMode = QMode::Random;
    measurement_model: MeasurementModel = MeasurementModel::Multiplicative;
    dc_reference: DcReference = DcReference::TrueAcceleration;
    loss_variance: LossVariance = LossVariance::Operator;
    covariance_form: CovarianceForm = CovarianceForm::PerPulse;
    ratio_cross: RatioCross = RatioCross::DeltaMethod;
    pulse_grid: Vec<i64> = (1..=41).step_by(2).collect();
    detuning_grid_ghz: Vec<f64> = vec![1.0, 3.0, 5.0, 7.0, 9.0, 12.0, 20.0];
    two_photon_grid_khz: Vec<f64> = vec![0.0, 63.0];
    measurement_grid: Vec<f64> = vec![0.02, 0.04, 0.1, 0.2, 0.5];
    replicate_seeds: Vec<u64> = (0..5).collect();
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())]
        .bytes()
        .filter(|&b| b == b'\n')
        .count()
        + 1
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
            let key = message
                .split('`')
                .nth(1)
                .filter(|_| message.starts_with("unknown field"))
                .unwrap_or("")
                .to_string();
            Error::Config { key, line, message }
        })?;
        let (cfg, at) = raw.resolve();
        cfg.check().map_err(|(key, message)| Error::Config {
            key: key.to_string(),
            line: at.get(key).map(|&o| line_of(text, o)).unwrap_or(0),
            message,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Per-key checks, then a full build; the error names the offending key.
    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        let finite = [
            ("delta_single_ghz", self.delta_single_ghz),
            ("delta_two_khz", self.delta_two_khz),
            ("delta_ac_khz", self.delta_ac_khz),
            ("rabi1_rad_per_us", self.rabi1_rad_per_us),
            ("rabi2_rad_per_us", self.rabi2_rad_per_us),
            ("theta_rad", self.theta_rad),
            ("a_true_m_s2", self.a_true_m_s2),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                return Err((key, format!("must be finite, got {v}")));
            }
        }
        if self.delta_single_ghz == 0.0 {
            return Err(("delta_single_ghz", "must be non-zero".into()));
        }
        let positive = [
            ("t_free_ms", self.t_free_ms),
            ("tau_d_us", self.tau_d_us),
            ("t_pi_us", self.t_pi_us),
            ("t_half_pi_us", self.t_half_pi_us),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err((key, format!("must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("mot_temperature_uk", self.mot_temperature_uk),
            ("cloud_sigma_x_mm", self.cloud_sigma_x_mm),
        ];
        for (key, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err((key, format!("must be non-negative, got {v}")));
            }
        }
        let gamma_total = AtomSpecies::rb85().gamma_total;
        if !(self.gamma_l_rad_per_us >= 0.0
            && self.gamma_l_rad_per_us * 1e6 <= gamma_total * (1.0 + 1e-12))
        {
            return Err((
                "gamma_l_rad_per_us",
                format!(
                    "must lie in [0, {}], got {}",
                    gamma_total / 1e6,
                    self.gamma_l_rad_per_us
                ),
            ));
        }
        if self.n_r < 1 || self.n_r % 2 == 0 {
            return Err((
                "n_r",
                format!("must be an odd positive integer, got {}", self.n_r),
            ));
        }
        if self.n_samples < 2 {
            return Err((
                "n_samples",
                format!("must be at least 2, got {}", self.n_samples),
            ));
        }
        if !(0.0..1.0).contains(&self.epsilon_m) {
            return Err((
                "epsilon_m",
                format!("must lie in [0, 1), got {}", self.epsilon_m),
            ));
        }
        if self.steps_per_pi == 0 {
            return Err(("steps_per_pi", "must be positive".into()));
        }
        if self.pulse_grid.iter().any(|&n| n < 1 || n % 2 == 0) {
            return Err((
                "pulse_grid",
                "every entry must be an odd positive integer".into(),
            ));
        }
        if self
            .measurement_grid
            .iter()
            .any(|e| !(0.0..1.0).contains(e))
        {
            return Err(("measurement_grid", "every entry must lie in [0, 1)".into()));
        }
        if self
            .detuning_grid_ghz
            .iter()
            .any(|&d| d == 0.0 || !d.is_finite())
        {
            return Err((
                "detuning_grid_ghz",
                "entries must be finite and non-zero".into(),
            ));
        }
        if self.two_photon_grid_khz.iter().any(|d| !d.is_finite()) {
            return Err(("two_photon_grid_khz", "entries must be finite".into()));
        }
        for (key, grid) in [
            (
                "pulse_grid",
                self.pulse_grid
                    .iter()
                    .map(|&n| n as f64)
                    .collect::<Vec<_>>(),
            ),
            ("detuning_grid_ghz", self.detuning_grid_ghz.clone()),
            ("two_photon_grid_khz", self.two_photon_grid_khz.clone()),
            ("measurement_grid", self.measurement_grid.clone()),
        ] {
            if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
                return Err((key, "must be non-empty and strictly increasing".into()));
            }
        }
        if self.replicate_seeds.is_empty() {
            return Err(("replicate_seeds", "must not be empty".into()));
        }
        if self.seed > i64::MAX as u64 || self.replicate_seeds.iter().any(|&s| s > i64::MAX as u64)
        {
            return Err((
                "seed",
                "seeds must fit in a TOML integer (below 2^63)".into(),
            ));
        }
        self.simulation().map_err(|e| ("config", e.to_string()))?;
        Ok(())
    }

    /// The simulation configuration in SI units.
    pub fn simulation(&self) -> Result<SimulationConfig> {
        let species = AtomSpecies::rb85().with_loss_rate(self.gamma_l_rad_per_us * 1e6);
        let mut laser = LaserConfig::new(
            &species,
            self.rabi1_rad_per_us * 1e6,
            self.rabi2_rad_per_us * 1e6,
            TWO_PI * self.delta_single_ghz * 1e9,
            TWO_PI * self.delta_two_khz * 1e3,
            self.geometry,
        );
        laser.theta = self.theta_rad;
        laser.delta_ac = TWO_PI * self.delta_ac_khz * 1e3;
        if laser.elimination_warning() {
            log::warn!(
                "detuning below 10x the Rabi frequency; adiabatic elimination is unreliable here"
            );
        }
        let t_pi = self.t_pi_us * 1e-6;
        let t_half = self.t_half_pi_us * 1e-6;
        let mut cfg = SimulationConfig {
            species,
            laser,
            sequence: build_sequence(
                self.n_r,
                self.t_free_ms * 1e-3,
                self.tau_d_us * 1e-6,
                t_pi,
                t_half,
            )?,
            a_true: self.a_true_m_s2,
            mot_temperature: self.mot_temperature_uk * 1e-6,
            n_samples: self.n_samples,
            epsilon_m: self.epsilon_m,
            rng_seed: self.seed,
            pulse_calibration: self.pulse_mode,
            table_t_pi: t_pi,
            table_t_half_pi: t_half,
            cloud_sigma_x: self.cloud_sigma_x_mm * 1e-3,
            steps_per_pi: self.steps_per_pi,
            recoil_schedule: self.recoil_schedule,
        };
        cfg.rebuild_sequence(self.n_r)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn options(&self, threads: Option<usize>) -> EnsembleOptions {
        EnsembleOptions {
            q_mode: self.q_mode,
            noise: LossNoiseModel {
                variance: self.loss_variance,
                covariance: self.covariance_form,
                ratio_cross: self.ratio_cross,
            },
            measurement: self.measurement_model,
            dc_reference: self.dc_reference,
            threads,
        }
    }

    /// Sweep of `axis` over its configured grid, converted to SI.
    pub fn sweep_spec(&self, axis: SweepAxis, threads: Option<usize>) -> Result<SweepSpec> {
        let values = match axis {
            SweepAxis::PulseCount => self.pulse_grid.iter().map(|&n| n as f64).collect(),
            SweepAxis::SingleDetuning => self
                .detuning_grid_ghz
                .iter()
                .map(|g| TWO_PI * g * 1e9)
                .collect(),
            SweepAxis::TwoPhotonDetuning => self
                .two_photon_grid_khz
                .iter()
                .map(|k| TWO_PI * k * 1e3)
                .collect(),
            SweepAxis::MeasurementError => self.measurement_grid.clone(),
        };
        Ok(SweepSpec {
            base: self.simulation()?,
            axis,
            values,
            options: self.options(threads),
            replicate_seeds: self.replicate_seeds.clone(),
        })
    }
}
