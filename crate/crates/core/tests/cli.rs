use std::path::Path;
use std::process::{Command, Output};

use raman_lmt::config::RunConfig;

const SMALL: &str = "\
n_samples = 12
steps_per_pi = 100
pulse_grid = [1, 3, 5]
measurement_grid = [0.02, 0.5]
replicate_seeds = [3, 4]
";

fn run(dir: &Path, args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_raman-lmt"))
        .args(args)
        .current_dir(dir)
        .env("RAMAN_LMT_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn write_small(dir: &Path) {
    std::fs::write(dir.join("small.toml"), SMALL).unwrap();
}

#[test]
fn output_is_identical_across_runs_and_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    write_small(dir.path());
    for cmd in ["simulate", "sweep-pulses"] {
        let mut files = Vec::new();
        for (i, threads) in ["1", "4", "16", "4"].iter().enumerate() {
            let out = format!("{cmd}-{i}.csv");
            let o = run(
                dir.path(),
                &[cmd, "--config", "small.toml", "--out", &out, "--seed", "11"],
                threads,
            );
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            files.push(std::fs::read(dir.path().join(out)).unwrap());
        }
        assert!(files.iter().all(|f| *f == files[0]), "{cmd} output differs");
    }
}

#[test]
fn sweep_pulses_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    write_small(dir.path());
    let o = run(
        dir.path(),
        &["sweep-pulses", "--config", "small.toml", "--samples", "6"],
        "1",
    );
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("n_r,fom_m2_s4,var_dev_a_m2_s4,dc_offset_m2_s4,"));
    let data: Vec<&str> = lines
        .iter()
        .copied()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .collect();
    let n_r: Vec<&str> = data.iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(n_r, ["1", "3", "5"]);
    for l in &data {
        let cells: Vec<&str> = l.split(',').collect();
        let (fom, var, dc): (f64, f64, f64) = (
            cells[1].parse().unwrap(),
            cells[2].parse().unwrap(),
            cells[3].parse().unwrap(),
        );
        assert_eq!(fom, dc + var);
    }
    assert!(text.contains("\n# fingerprint "));
    assert!(text.contains("\n# seeds 3 4\n"));
}

#[test]
fn bad_config_fails_with_machine_readable_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "seed = 1\nn_r = 4\n").unwrap();
    let o = run(dir.path(), &["simulate", "--config", "bad.toml"], "1");
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.starts_with("error=config "), "{err}");
    assert!(err.contains("line 2") && err.contains("n_r"), "{err}");

    std::fs::write(dir.path().join("unknown.toml"), "t_pi = 2\n").unwrap();
    let o = run(dir.path(), &["simulate", "--config", "unknown.toml"], "1");
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("t_pi"));

    let o = run(dir.path(), &["simulate", "--q-mode", "sometimes"], "1");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_check_passes_for_the_reference_point() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("lossless.toml"), "gamma_l_rad_per_us = 0\n").unwrap();
    let o = run(
        dir.path(),
        &[
            "oracle-check",
            "--config",
            "lossless.toml",
            "--out",
            "oracle.csv",
        ],
        "1",
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("oracle.csv")).unwrap();
    let first = text.lines().nth(1).unwrap();
    let cells: Vec<&str> = first.split(',').collect();
    assert_eq!(cells[4], "pi");
    let discrepancy: f64 = cells[9].parse().unwrap();
    assert!(discrepancy < 1e-3, "{discrepancy}");
}

#[test]
fn written_config_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        delta_single_ghz: 3.5,
        delta_two_khz: 52.0,
        n_r: 5,
        epsilon_m: 0.1,
        ..RunConfig::default()
    };
    let path = dir.path().join("written.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    assert_eq!(RunConfig::load(&path).unwrap(), cfg);
}
