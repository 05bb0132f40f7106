//! Statistical trends on the bundled configs, driven through the binary.
//! Every arm of a sweep shares the master seed, so trial i of each arm
//! sees the same random stream.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run(config_name: &str, args: &[&str]) -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(config_name);
    let mut full = vec!["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()];
    full.extend_from_slice(args);
    let o = Command::new(env!("CARGO_BIN_EXE_mcvd")).args(&full).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    (dir, String::from_utf8(o.stdout).unwrap())
}

#[derive(Debug)]
struct Row {
    value: String,
    y: f64,
    failures: usize,
    mean: f64,
    median: f64,
}

impl Row {
    /// Failed trials count as unbounded error: fewer failures wins, then
    /// the lower mean over successes.
    fn worse_than(&self, other: &Row) -> bool {
        (self.failures, self.mean) > (other.failures, other.mean)
    }
}

fn summary(dir: &tempfile::TempDir, file: &str) -> Vec<Row> {
    let text = fs::read_to_string(dir.path().join(file)).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            Row {
                value: f[1].to_string(),
                y: f[3].parse().unwrap(),
                failures: f[6].parse().unwrap(),
                mean: f[7].parse().unwrap(),
                median: f[8].parse().unwrap(),
            }
        })
        .collect()
}

fn at(rows: &[Row], y: f64) -> Vec<&Row> {
    rows.iter().filter(|r| r.y == y).collect()
}

fn far_sweep(axis: &str, values: &str) -> Vec<Row> {
    let (dir, _) = run(
        "tetrahedron.conf",
        &[
            "--trials",
            "50",
            "sweep",
            "--axis",
            axis,
            "--values",
            values,
            "--tn-axis",
            "y",
            "--tn-range",
            "30,40",
        ],
    );
    summary(&dir, "sweep_summary.csv")
}

#[test]
fn more_molecules_do_not_hurt_far_from_the_receivers() {
    let rows = far_sweep("q", "1000,5000,10000");
    for y in [30.0, 40.0] {
        let arms = at(&rows, y);
        for w in arms.windows(2) {
            assert!(!w[1].worse_than(w[0]), "{w:?}");
        }
    }
}

#[test]
fn faster_diffusion_helps_far_from_the_receivers() {
    let rows = far_sweep("d", "100,200,300");
    for y in [30.0, 40.0] {
        let arms = at(&rows, y);
        for w in arms.windows(2) {
            assert!(w[0].worse_than(w[1]), "{w:?}");
        }
    }
}

#[test]
fn flow_away_from_the_receivers_is_worst() {
    // The transmitter sits on +y, so positive v_y carries molecules away.
    let rows = far_sweep("flow", "-10,0,5,10");
    for y in [30.0, 40.0] {
        let arms = at(&rows, y);
        let away = arms.iter().find(|r| r.value == "10").unwrap();
        for other in arms.iter().filter(|r| r.value != "10") {
            assert!(away.worse_than(other), "{away:?} vs {other:?}");
        }
    }
}

#[test]
fn transmitter_inside_receiver_hull_is_located_within_a_micrometre() {
    let (dir, _) = run(
        "tetrahedron.conf",
        &["--trials", "50", "pipeline", "--tn-axis", "x", "--tn-range", "-2,0,2"],
    );
    for row in summary(&dir, "summary.csv") {
        assert_eq!(row.failures, 0);
        assert!(row.median < 1.0, "{row:?}");
    }
}

#[test]
fn nearer_receiver_has_smaller_distance_error() {
    let (dir, _) = run("four_receivers.conf", &["--trials", "100", "fit"]);
    let text = fs::read_to_string(dir.path().join("estimates.csv")).unwrap();
    let mean_error = |id: &str, truth: f64| {
        let ds: Vec<f64> = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .map(|l| l.split(',').collect::<Vec<_>>())
            .filter(|f| f[1] == id)
            .map(|f| (f[3].parse::<f64>().unwrap() - truth).abs() / truth)
            .collect();
        assert_eq!(ds.len(), 100);
        ds.iter().sum::<f64>() / 100.0
    };
    let (near, far) = (mean_error("1", 5.0), mean_error("2", 10.0));
    assert!(near < far, "near {near} far {far}");
}
