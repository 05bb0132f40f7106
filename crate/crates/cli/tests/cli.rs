use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mcvd_core::stats::Summary;

const FOUR: &str = "\
transmitter = 0 0 0
receiver = 1 0 5 0 1
receiver = 2 0 0 10 1
receiver = 3 0 -5 0 1
receiver = 4 10 0 0 1
D = 100
Q = 2000
sample_interval = 0.02
num_samples = 50
sim_step = 0.001
seed = 11
trials = 1
";

fn mcvd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcvd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn setup(config: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario.conf");
    fs::write(&path, config).unwrap();
    (dir, path)
}

fn run_ok(config: &Path, out: &Path, args: &[&str]) -> String {
    let mut full = vec!["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    full.extend_from_slice(args);
    let o = mcvd(&full);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn simulate_writes_one_row_per_receiver_and_sample() {
    let (dir, cfg) = setup(FOUR);
    let stdout = run_ok(&cfg, dir.path(), &["simulate"]);
    assert!(stdout.contains("conservation = ok"));
    let text = fs::read_to_string(dir.path().join("traces.csv")).unwrap();
    assert!(text.starts_with("# config_hash="));
    assert!(text.contains("seed=11"));
    assert_eq!(data_lines(&text).len(), 4 * 50);
}

#[test]
fn simulate_is_byte_identical_across_reruns_and_thread_counts() {
    let (dir, cfg) = setup(FOUR);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&cfg, &a, &["--trials", "3", "--threads", "1", "simulate"]);
    run_ok(&cfg, &b, &["--trials", "3", "--threads", "3", "simulate"]);
    assert_eq!(
        fs::read(a.join("traces.csv")).unwrap(),
        fs::read(b.join("traces.csv")).unwrap()
    );
}

#[test]
fn zero_diffusion_absorbs_nothing() {
    let (dir, cfg) = setup(&FOUR.replace("D = 100", "D = 0"));
    run_ok(&cfg, dir.path(), &["simulate"]);
    let text = fs::read_to_string(dir.path().join("traces.csv")).unwrap();
    assert!(data_lines(&text).iter().all(|l| l.ends_with(",0")));
}

#[test]
fn fit_reads_simulated_traces() {
    let (dir, cfg) = setup(FOUR);
    run_ok(&cfg, dir.path(), &["--trials", "2", "simulate"]);
    let traces = dir.path().join("traces.csv");
    run_ok(&cfg, dir.path(), &["fit", "--traces", traces.to_str().unwrap()]);
    let text = fs::read_to_string(dir.path().join("estimates.csv")).unwrap();
    let rows = data_lines(&text);
    assert_eq!(rows.len(), 8);
    for r in rows {
        let d: f64 = r.split(',').nth(3).unwrap().parse().unwrap();
        assert!(d > 1.0 && d < 100.0, "{r}");
    }
}

#[test]
fn synthetic_pipeline_recovers_transmitter() {
    let cfg_text = FOUR.replace("transmitter = 0 0 0", "transmitter = 2 1 -1");
    let (dir, cfg) = setup(&cfg_text);
    run_ok(&cfg, dir.path(), &["--trials", "2", "pipeline", "--synthetic"]);
    let text = fs::read_to_string(dir.path().join("results.txt")).unwrap();
    let errs: Vec<f64> = text
        .lines()
        .filter_map(|l| l.strip_prefix("delta_p = "))
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(errs.len(), 2);
    assert!(errs.iter().all(|&e| e < 1e-4), "{errs:?}");
}

#[test]
fn three_receivers_fail_every_trial_without_aborting() {
    let cfg_text: String = FOUR
        .lines()
        .filter(|l| !l.starts_with("receiver = 4"))
        .collect::<Vec<_>>()
        .join("\n");
    let (dir, cfg) = setup(&cfg_text);
    run_ok(&cfg, dir.path(), &["--trials", "3", "pipeline"]);
    let results = fs::read_to_string(dir.path().join("results.txt")).unwrap();
    assert_eq!(results.matches("error = TooFewReceivers").count(), 3);
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let row: Vec<&str> = data_lines(&summary)[0].split(',').collect();
    assert_eq!((row[5], row[6]), ("3", "3"));
}

#[test]
fn sweep_summary_matches_raw_rows() {
    let (dir, cfg) = setup(FOUR);
    run_ok(
        &cfg,
        dir.path(),
        &[
            "--trials",
            "4",
            "sweep",
            "--axis",
            "q",
            "--values",
            "500,2000",
            "--tn-axis",
            "y",
            "--tn-range",
            "-3,2",
        ],
    );
    let raw = fs::read_to_string(dir.path().join("sweep_raw.csv")).unwrap();
    let summary = fs::read_to_string(dir.path().join("sweep_summary.csv")).unwrap();
    assert_eq!(data_lines(&raw).len(), 2 * 2 * 4);
    let rows = data_lines(&summary);
    assert_eq!(rows.len(), 4);
    for row in rows {
        let key: Vec<&str> = row.split(',').take(5).collect();
        let outcomes: Vec<Option<f64>> = data_lines(&raw)
            .into_iter()
            .map(|l| l.split(',').collect::<Vec<_>>())
            .filter(|f| f[..5] == key[..])
            .map(|f| {
                if f[7] == "ok" {
                    Some(f[6].parse().unwrap())
                } else {
                    None
                }
            })
            .collect();
        let s = Summary::from_outcomes(&outcomes);
        let recomputed = format!(
            "{},{},{},{},{},{},{},{}",
            key.join(","),
            s.trials,
            s.failures,
            s.mean,
            s.median,
            s.q25,
            s.q75,
            s.max
        );
        assert_eq!(recomputed, row);
    }
}

#[test]
fn probmap_marks_points_inside_receivers() {
    let (dir, cfg) = setup(FOUR);
    run_ok(&cfg, dir.path(), &["probmap", "--x", "0", "--y", "-5,-2"]);
    let text = fs::read_to_string(dir.path().join("probmap.csv")).unwrap();
    let rows = data_lines(&text);
    assert_eq!(rows.len(), 8);
    assert!(rows
        .iter()
        .filter(|r| r.starts_with("0,-5,"))
        .all(|r| r.ends_with("skipped")));
    assert!(rows
        .iter()
        .filter(|r| r.starts_with("0,-2,"))
        .all(|r| !r.ends_with("skipped")));
}

#[test]
fn bad_config_exits_nonzero_with_error_line() {
    let (dir, cfg) = setup("transmitter = 0 0\n");
    let o = mcvd(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "simulate",
    ]);
    assert!(!o.status.success());
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.starts_with("error kind=Config message="), "{err}");

    let o = mcvd(&["--config", "/no/such/file", "simulate"]);
    assert!(!o.status.success());
    assert!(String::from_utf8(o.stderr).unwrap().starts_with("error kind=Io"));
}
