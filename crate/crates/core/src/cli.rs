//! Command-line front end: argument parsing, command dispatch and the result
//! tables each command writes.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::density::{oracle_run_with, DensityParams};
use crate::ensemble::{fingerprint, run_ensemble, stream};
use crate::error::Result;
use crate::experiments::{find_min_fom, sweep, SweepAxis, SweepRow, SweepSpec};
use crate::output::{Cell, ResultTable};
use crate::physics::{PulseCalibration, SegmentKind};
use crate::stats::QMode;

/// Largest population discrepancy `oracle-check` accepts.
pub const ORACLE_BOUND: f64 = 1e-3;
/// Random single-pulse cases drawn by `oracle-check`.
pub const ORACLE_CASES: usize = 20;

const STREAM_ORACLE: u64 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "raman-lmt",
    version,
    about = "Loss-aware simulation of multi-pulse Raman atom interferometers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// One ensemble at the configured point, one row per atom.
    Simulate,
    /// FOM against the pulse count.
    SweepPulses,
    /// FOM against the pulse count for every single-photon detuning.
    SweepDetuning,
    /// FOM against the pulse count for every two-photon detuning.
    SweepTwoPhoton,
    /// FOM against the pulse count for every detection error.
    SweepMeasurement,
    /// Compare the amplitude engine with the density-matrix engine.
    OracleCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QModeArg {
    Zero,
    Constant,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PulseModeArg {
    Table,
    Calibrated,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonArgs {
    /// TOML configuration; missing keys take reference values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output CSV path; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(0..=i64::MAX as u64))]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub q_mode: Option<QModeArg>,
    #[arg(long, global = true)]
    pub pulse_mode: Option<PulseModeArg>,
    /// Worker threads; overrides RAMAN_LMT_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

impl CommonArgs {
    /// Configuration file with the command-line overrides applied.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::from_toml("")?,
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.samples {
            cfg.n_samples = n;
        }
        if let Some(q) = self.q_mode {
            cfg.q_mode = match q {
                QModeArg::Zero => QMode::Zero,
                QModeArg::Constant => QMode::Constant,
                QModeArg::Random => QMode::Random,
            };
        }
        if let Some(m) = self.pulse_mode {
            cfg.pulse_mode = match m {
                PulseModeArg::Table => PulseCalibration::Table,
                PulseModeArg::Calibrated => PulseCalibration::Calibrated,
            };
        }
        // Re-parse so overridden values get the same checks as file values.
        RunConfig::from_toml(&cfg.to_toml())
    }
}

/// Run one command and produce its table. `oracle-check` also reports
/// whether every case stayed within bound.
pub fn execute(
    command: Command,
    run: &RunConfig,
    threads: Option<usize>,
) -> Result<(ResultTable, bool)> {
    let digest = config_digest(command, run);
    let mut table = match command {
        Command::Simulate => simulate(run, threads)?,
        Command::SweepPulses => pulse_table(run, None, threads)?,
        Command::SweepDetuning => pulse_table(run, Some(SweepAxis::SingleDetuning), threads)?,
        Command::SweepTwoPhoton => pulse_table(run, Some(SweepAxis::TwoPhotonDetuning), threads)?,
        Command::SweepMeasurement => pulse_table(run, Some(SweepAxis::MeasurementError), threads)?,
        Command::OracleCheck => oracle_table(run)?,
    };
    let ok = command != Command::OracleCheck
        || table.rows.iter().all(|r| r.last() == Some(&Cell::Int(1)));
    table.note(format!("config_sha256 {digest}"));
    Ok((table, ok))
}

/// Parse arguments, run, write output. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_cli(&cli) {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("error=oracle-bound message=\"discrepancy above {ORACLE_BOUND:e}\"");
            1
        }
        Err(e) => {
            eprintln!("error={} message={:?}", e.kind(), e.to_string());
            1
        }
    }
}

fn run_cli(cli: &Cli) -> Result<bool> {
    let run = cli.common.run_config()?;
    let (table, ok) = execute(cli.command, &run, cli.common.threads)?;
    match &cli.common.out {
        Some(path) => table.write_file(path)?,
        None => table.write_to(std::io::stdout().lock())?,
    }
    Ok(ok)
}

fn config_digest(command: Command, run: &RunConfig) -> String {
    let text = format!("{command:?}\n{}", run.to_toml());
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn simulate(run: &RunConfig, threads: Option<usize>) -> Result<ResultTable> {
    let cfg = run.simulation()?;
    let opts = run.options(threads);
    let r = run_ensemble(&cfg, &opts)?;
    let mut t = ResultTable::new([
        "sample",
        "pop_e",
        "pop_g",
        "q_tot",
        "measured_pop_e",
        "readout_q",
        "phase_rad",
        "dev_a_m_s2",
    ]);
    for (i, o) in r.outcomes.iter().enumerate() {
        t.push(vec![
            i.into(),
            o.pop_e.into(),
            o.pop_g.into(),
            o.q_tot.into(),
            o.measured_pop_e.into(),
            o.readout_q.into(),
            o.phase.into(),
            o.dev_a.into(),
        ]);
    }
    let b = &r.budget;
    for (name, v) in [
        ("alpha_m_s2_per_rad", r.alpha),
        ("q_per_pulse", r.q_per_pulse),
        ("mean_dev_a_m_s2", b.mean_dev_a),
        ("var_dev_a_m2_s4", b.var_dev_a),
        ("sample_var_dev_a_m2_s4", b.sample_var_dev_a),
        ("dc_offset_m2_s4", b.dc_offset),
        ("fom_m2_s4", b.fom),
    ] {
        t.note(format!("{name} {}", Cell::Num(v).render()));
    }
    t.note(format!("fingerprint {}", r.fingerprint));
    t.note(format!("seeds {}", r.rng_seed));
    Ok(t)
}

/// Grid of `axis` as written in the configuration file.
fn file_grid(run: &RunConfig, axis: SweepAxis) -> Vec<f64> {
    match axis {
        SweepAxis::PulseCount => run.pulse_grid.iter().map(|&n| n as f64).collect(),
        SweepAxis::SingleDetuning => run.detuning_grid_ghz.clone(),
        SweepAxis::TwoPhotonDetuning => run.two_photon_grid_khz.clone(),
        SweepAxis::MeasurementError => run.measurement_grid.clone(),
    }
}

fn outer_column(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::SingleDetuning => "delta_single_ghz",
        SweepAxis::TwoPhotonDetuning => "delta_two_khz",
        SweepAxis::MeasurementError => "epsilon_m",
        SweepAxis::PulseCount => "n_r",
    }
}

/// Pulse-count sweeps, one per value of `outer` (or a single one).
pub fn pulse_sweeps(
    run: &RunConfig,
    outer: Option<SweepAxis>,
    threads: Option<usize>,
) -> Result<Vec<(f64, Vec<SweepRow>)>> {
    let pulses = run.sweep_spec(SweepAxis::PulseCount, threads)?;
    let Some(axis) = outer else {
        return Ok(vec![(f64::NAN, sweep(&pulses)?)]);
    };
    let outer_spec = run.sweep_spec(axis, threads)?;
    if axis == SweepAxis::MeasurementError {
        // Reuse the dynamics: one epsilon sweep per pulse count, regrouped.
        let mut by_eps: Vec<Vec<SweepRow>> = vec![Vec::new(); outer_spec.values.len()];
        for &n in &pulses.values {
            let spec = SweepSpec {
                base: pulses.point_config(n)?,
                ..outer_spec.clone()
            };
            for (slot, mut row) in by_eps.iter_mut().zip(sweep(&spec)?) {
                row.value = n;
                slot.push(row);
            }
        }
        return Ok(outer_spec.values.iter().copied().zip(by_eps).collect());
    }
    outer_spec
        .values
        .iter()
        .map(|&v| {
            let spec = SweepSpec {
                base: outer_spec.point_config(v)?,
                ..pulses.clone()
            };
            Ok((v, sweep(&spec)?))
        })
        .collect()
}

fn pulse_table(
    run: &RunConfig,
    outer: Option<SweepAxis>,
    threads: Option<usize>,
) -> Result<ResultTable> {
    let groups = pulse_sweeps(run, outer, threads)?;
    let mut header = Vec::new();
    if let Some(axis) = outer {
        header.push(outer_column(axis));
    }
    header.extend([
        "n_r",
        "fom_m2_s4",
        "var_dev_a_m2_s4",
        "dc_offset_m2_s4",
        "q_per_pulse",
        "fom_spread_m2_s4",
        "error",
    ]);
    let mut t = ResultTable::new(header);
    let labels = outer.map(|axis| file_grid(run, axis)).unwrap_or_default();
    for (i, (_, rows)) in groups.iter().enumerate() {
        for r in rows {
            let mut cells = Vec::new();
            if outer.is_some() {
                cells.push(Cell::Num(labels[i]));
            }
            cells.extend([
                Cell::Int(r.value as i64),
                r.fom.into(),
                r.var_dev_a.into(),
                r.dc_offset.into(),
                r.q_per_pulse.into(),
                r.fom_spread.into(),
                Cell::Text(r.error.clone().unwrap_or_default()),
            ]);
            t.push(cells);
        }
        let prefix = match outer {
            Some(axis) => format!("{} {} ", outer_column(axis), Cell::Num(labels[i]).render()),
            None => String::new(),
        };
        match find_min_fom(rows) {
            Ok((n, fom)) => t.note(format!(
                "{prefix}min_fom_n_r {} fom_m2_s4 {}",
                n as i64,
                Cell::Num(fom).render()
            )),
            Err(e) => t.note(format!("{prefix}min_fom_n_r none ({e})")),
        }
    }
    let sim = run.simulation()?;
    t.note(format!(
        "fingerprint {}",
        fingerprint(&sim, &run.options(None))
    ));
    let seeds: Vec<String> = run.replicate_seeds.iter().map(u64::to_string).collect();
    t.note(format!("seeds {}", seeds.join(" ")));
    Ok(t)
}

/// One single-pulse oracle case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCase {
    pub delta_single_ghz: f64,
    pub delta_two_khz: f64,
    pub gamma_l_rad_per_us: f64,
    pub kind: SegmentKind,
}

/// The configured point as an ideal pi pulse, then random cases drawn from
/// Delta in [3, 20] GHz, delta in [0, 63] kHz and gamma_l in {0, Gamma}.
/// Decay back into |g> and |e> is switched off in both engines.
pub fn oracle_cases(run: &RunConfig) -> Vec<OracleCase> {
    let gamma = crate::physics::AtomSpecies::rb85().gamma_total / 1e6;
    let mut cases = vec![OracleCase {
        delta_single_ghz: run.delta_single_ghz,
        delta_two_khz: run.delta_two_khz,
        gamma_l_rad_per_us: run.gamma_l_rad_per_us,
        kind: SegmentKind::Pi,
    }];
    for i in 0..ORACLE_CASES as u64 {
        let mut rng = stream(run.seed, STREAM_ORACLE, i);
        cases.push(OracleCase {
            delta_single_ghz: rng.gen_range(3.0..=20.0),
            delta_two_khz: rng.gen_range(0.0..=63.0),
            gamma_l_rad_per_us: if rng.gen_bool(0.5) { 0.0 } else { gamma },
            kind: if rng.gen_bool(0.5) {
                SegmentKind::Pi
            } else {
                SegmentKind::HalfPi
            },
        });
    }
    cases
}

fn oracle_table(run: &RunConfig) -> Result<ResultTable> {
    let mut t = ResultTable::new([
        "case",
        "delta_single_ghz",
        "delta_two_khz",
        "gamma_l_rad_per_us",
        "pulse",
        "amplitude_pop_e",
        "density_pop_e",
        "amplitude_loss",
        "density_loss",
        "discrepancy",
        "pass",
    ]);
    for (i, case) in oracle_cases(run).into_iter().enumerate() {
        let point = RunConfig {
            delta_single_ghz: case.delta_single_ghz,
            delta_two_khz: case.delta_two_khz,
            gamma_l_rad_per_us: case.gamma_l_rad_per_us,
            pulse_mode: PulseCalibration::Calibrated,
            ..run.clone()
        };
        let sim = point.simulation()?;
        // The amplitude engine only knows decay into the loss state, so the
        // density engine gets the same generator.
        let params = DensityParams {
            gamma_g: 0.0,
            gamma_e: 0.0,
            ..DensityParams::from_config(&sim)
        };
        let c = oracle_run_with(&sim, case.kind, &params)?;
        let d = c.discrepancy();
        t.push(vec![
            i.into(),
            case.delta_single_ghz.into(),
            case.delta_two_khz.into(),
            case.gamma_l_rad_per_us.into(),
            if case.kind == SegmentKind::Pi {
                "pi"
            } else {
                "half-pi"
            }
            .into(),
            c.amplitude_pop_e.into(),
            c.density_pop_e.into(),
            c.amplitude_loss.into(),
            c.density_loss.into(),
            d.into(),
            Cell::Int((d <= ORACLE_BOUND) as i64),
        ]);
    }
    t.note(format!("bound {}", Cell::Num(ORACLE_BOUND).render()));
    t.note(format!("seeds {}", run.seed));
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> RunConfig {
        RunConfig {
            n_samples: 4,
            steps_per_pi: 40,
            pulse_grid: vec![1, 3],
            detuning_grid_ghz: vec![7.0, 9.0],
            two_photon_grid_khz: vec![0.0, 63.0],
            measurement_grid: vec![0.02, 0.5],
            replicate_seeds: vec![0, 1],
            ..RunConfig::default()
        }
    }

    #[test]
    fn overrides_apply() {
        let args = CommonArgs {
            seed: Some(9),
            samples: Some(17),
            q_mode: Some(QModeArg::Zero),
            pulse_mode: Some(PulseModeArg::Table),
            ..CommonArgs::default()
        };
        let run = args.run_config().unwrap();
        assert_eq!(run.seed, 9);
        assert_eq!(run.n_samples, 17);
        assert_eq!(run.q_mode, QMode::Zero);
        assert_eq!(run.pulse_mode, PulseCalibration::Table);
        let bad = CommonArgs {
            samples: Some(1),
            ..CommonArgs::default()
        };
        assert!(bad.run_config().is_err());
    }

    #[test]
    fn pulse_sweep_table_shape() {
        let (t, ok) = execute(Command::SweepPulses, &tiny(), Some(1)).unwrap();
        assert!(ok);
        assert_eq!(
            t.header[..4],
            ["n_r", "fom_m2_s4", "var_dev_a_m2_s4", "dc_offset_m2_s4"]
        );
        assert_eq!(t.rows.len(), 2);
        assert!(t.footer.iter().any(|l| l.starts_with("min_fom_n_r")));
        assert!(t.footer.iter().any(|l| l == "seeds 0 1"));
    }

    #[test]
    fn nested_sweeps_cover_the_grid() {
        let run = tiny();
        for (cmd, col) in [
            (Command::SweepDetuning, "delta_single_ghz"),
            (Command::SweepTwoPhoton, "delta_two_khz"),
            (Command::SweepMeasurement, "epsilon_m"),
        ] {
            let (t, _) = execute(cmd, &run, Some(1)).unwrap();
            assert_eq!(t.header[0], col);
            assert_eq!(t.rows.len(), 4);
            assert_eq!(t.footer.iter().filter(|l| l.starts_with(col)).count(), 2);
        }
    }

    #[test]
    fn measurement_sweep_matches_direct_pulse_sweep() {
        let run = tiny();
        let groups = pulse_sweeps(&run, Some(SweepAxis::MeasurementError), Some(1)).unwrap();
        let direct = pulse_sweeps(
            &RunConfig {
                epsilon_m: 0.5,
                ..run.clone()
            },
            None,
            Some(1),
        )
        .unwrap();
        assert_eq!(groups[1].0, 0.5);
        assert_eq!(groups[1].1, direct[0].1);
    }

    #[test]
    fn oracle_cases_are_seeded() {
        let run = tiny();
        let a = oracle_cases(&run);
        assert_eq!(a.len(), ORACLE_CASES + 1);
        assert_eq!(a, oracle_cases(&run));
        assert_ne!(a[1..], oracle_cases(&RunConfig { seed: 1, ..run })[1..]);
        for c in &a[1..] {
            assert!((3.0..=20.0).contains(&c.delta_single_ghz));
            assert!((0.0..=63.0).contains(&c.delta_two_khz));
        }
    }
}
