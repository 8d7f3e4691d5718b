use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn qosc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qosc"))
        .args(args)
        .env("QOSC_OUT_DIR", dir)
        .output()
        .expect("failed to launch qosc")
}

fn run_ok(args: &[&str], dir: &Path) -> Output {
    let out = qosc(args, dir);
    assert!(
        out.status.success(),
        "qosc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

struct Csv {
    meta: Vec<String>,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Csv {
    fn read(path: &Path) -> Self {
        let text = std::fs::read_to_string(path).unwrap();
        let mut meta = Vec::new();
        let mut lines = text.lines();
        let header = loop {
            let line = lines.next().expect("missing column header");
            match line.strip_prefix("# ") {
                Some(m) => meta.push(m.to_string()),
                None => break line,
            }
        };
        let columns = header.split(',').map(str::to_string).collect();
        let rows = lines
            .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
            .collect();
        Self { meta, columns, rows }
    }

    fn column(&self, name: &str) -> Vec<f64> {
        let i = self
            .columns
            .iter()
            .position(|c| c == name)
            .unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| r[i]).collect()
    }

    fn with_prefix(&self, prefix: &str) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&i| self.columns[i].starts_with(prefix))
            .collect()
    }
}

fn out_file(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

#[test]
fn unbiased_tunneling_free_levels_equal_reference() {
    let dir = TempDir::new().unwrap();
    let out = out_file(&dir, "levels.csv");
    run_ok(
        &[
            "spectrum-eps",
            "--set",
            "scenario=fig1",
            "--set",
            "delta=0",
            "--set",
            "sweep_steps=7",
            "--set",
            "numeric=off",
            "--out",
            out.to_str().unwrap(),
        ],
        dir.path(),
    );
    let csv = Csv::read(&out);
    let analytic = csv.with_prefix("analytic_");
    let reference = csv.with_prefix("reference_");
    assert_eq!(analytic.len(), reference.len());
    assert!(!analytic.is_empty());
    for row in &csv.rows {
        for (&a, &r) in analytic.iter().zip(&reference) {
            assert!((row[a] - row[r]).abs() < 1e-12, "{} vs {}", row[a], row[r]);
        }
    }
}

#[test]
fn bias_sweep_is_increasing_with_requested_rows() {
    let dir = TempDir::new().unwrap();
    let out = out_file(&dir, "sweep.csv");
    run_ok(
        &[
            "spectrum-eps",
            "--set",
            "scenario=fig1",
            "--set",
            "sweep_steps=9",
            "--set",
            "numeric=off",
            "--out",
            out.to_str().unwrap(),
        ],
        dir.path(),
    );
    let csv = Csv::read(&out);
    let eps = csv.column("epsilon");
    assert_eq!(eps.len(), 9);
    assert!(eps.windows(2).all(|w| w[1] > w[0]));
    assert!(csv.meta.iter().any(|m| m == "schema: qosc-csv/1"));
    assert!(csv.meta.iter().any(|m| m.starts_with("config: scenario = fig1")));
    assert!(csv.meta.iter().any(|m| m.starts_with("build: ")));
}

#[test]
fn output_is_byte_identical_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let a = out_file(&dir, "a.csv");
    let b = out_file(&dir, "b.csv");
    let base = [
        "spectrum-g",
        "--set",
        "scenario=fig2",
        "--set",
        "sweep_steps=6",
        "--set",
        "k_max_numeric=10",
    ];
    let mut first = base.to_vec();
    first.extend(["--jobs", "1", "--out", a.to_str().unwrap()]);
    let mut second = base.to_vec();
    second.extend(["--jobs", "3", "--out", b.to_str().unwrap()]);
    run_ok(&first, dir.path());
    run_ok(&second, dir.path());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn default_output_lands_in_output_directory() {
    let dir = TempDir::new().unwrap();
    run_ok(
        &["gaps", "--set", "scenario=fig3", "--set", "sweep_steps=4"],
        dir.path(),
    );
    assert!(dir.path().join("gaps.csv").is_file());
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let cases: &[&[&str]] = &[
        &["gaps", "--set", "no_such_key=1"],
        &["gaps", "--set", "g=-1"],
        &["gaps", "--set", "scenario=fig9"],
        &["gaps", "--set", "omega"],
        &["gaps", "--config", "/nonexistent/qosc.conf"],
        &["dynamics", "--set", "scenario=fig4a", "--set", "duration=0"],
        &[
            "dynamics",
            "--set",
            "scenario=fig4a",
            "--set",
            "epsilon=0.7",
            "--set",
            "m=0",
            "--set",
            "L=0",
        ],
        &["gaps", "--out", "/nonexistent/dir/gaps.csv"],
    ];
    for args in cases {
        let out = qosc(args, dir.path());
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn numeric_failures_exit_with_three() {
    let dir = TempDir::new().unwrap();
    // A Sambe space far beyond the dimension guard.
    let out = qosc(
        &[
            "spectrum-eps",
            "--set",
            "k_max_numeric=400",
            "--set",
            "l_max_numeric=400",
            "--set",
            "sweep_steps=2",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_file_is_read_and_overrides_win() {
    let dir = TempDir::new().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "# coupling sweep\nscenario = fig3\ng = 0.3\nsweep_steps = 3\n").unwrap();
    let out = out_file(&dir, "gaps.csv");
    run_ok(
        &[
            "gaps",
            "--config",
            conf.to_str().unwrap(),
            "--set",
            "sweep_steps=5",
            "--out",
            out.to_str().unwrap(),
        ],
        dir.path(),
    );
    let csv = Csv::read(&out);
    assert_eq!(csv.rows.len(), 5);
    assert!(csv.meta.iter().any(|m| m == "config: sweep_steps = 5"));
}

#[test]
fn commensurate_ratio_is_reported() {
    let dir = TempDir::new().unwrap();
    let out = run_ok(&["validate", "--set", "scenario=fig4a"], dir.path());
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("10/53"), "{report}");
    assert!(report.contains("warning"));
}

#[test]
fn incommensurate_ratio_passes_validation() {
    let dir = TempDir::new().unwrap();
    let out = run_ok(&["validate", "--set", "scenario=fig1"], dir.path());
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(!report.contains("warning"), "{report}");
}

#[test]
fn gap_table_matches_closed_forms() {
    let dir = TempDir::new().unwrap();
    let out = out_file(&dir, "gaps.csv");
    // g = 0, 0.25, 0.5, ..., 1.5
    run_ok(
        &[
            "gaps",
            "--set",
            "scenario=fig3",
            "--set",
            "sweep_steps=7",
            "--out",
            out.to_str().unwrap(),
        ],
        dir.path(),
    );
    let csv = Csv::read(&out);
    let g = csv.column("g");
    let k0 = csv.column("Omega^0");
    let k1 = csv.column("Omega^1");
    let delta0 = k0[0];
    assert!(delta0 > 0.2 && delta0 < 0.21);
    for (gi, w) in g.iter().zip(&k0) {
        let alpha = (2.0 * gi).powi(2);
        assert!((w - delta0 * (-alpha / 2.0).exp()).abs() < 1e-14 * delta0);
    }
    let half = g.iter().position(|&x| (x - 0.5).abs() < 1e-12).unwrap();
    assert!(k1[half].abs() < 1e-15, "{}", k1[half]);
    assert!(csv
        .meta
        .iter()
        .any(|m| m.starts_with("laguerre_zero: K = 1 alpha = 1.0000000000000000e0")));
}

#[test]
fn coherent_destruction_gives_flat_analytic_survival() {
    let dir = TempDir::new().unwrap();
    let out = out_file(&dir, "cdt.csv");
    run_ok(
        &[
            "dynamics",
            "--set",
            "scenario=fig5",
            "--set",
            "numeric=off",
            "--set",
            "duration=200",
            "--set",
            "samples=512",
            "--out",
            out.to_str().unwrap(),
        ],
        dir.path(),
    );
    let csv = Csv::read(&out);
    assert_eq!(csv.rows.len(), 512);
    assert!(csv.column("P_analytic").iter().all(|p| (p - 1.0).abs() < 1e-6));
    assert!(dir.path().join("cdt_spectrum.csv").is_file());
}

#[test]
fn units_flag_rescales_output() {
    let dir = TempDir::new().unwrap();
    let a = out_file(&dir, "a.csv");
    let b = out_file(&dir, "b.csv");
    let common = ["gaps", "--set", "scenario=fig3", "--set", "sweep_steps=3"];
    let mut first = common.to_vec();
    first.extend(["--out", a.to_str().unwrap()]);
    let mut second = common.to_vec();
    second.extend(["--units", "omega_ex", "--out", b.to_str().unwrap()]);
    run_ok(&first, dir.path());
    run_ok(&second, dir.path());
    let (a, b) = (Csv::read(&a), Csv::read(&b));
    assert!(b.meta.iter().any(|m| m.starts_with("units: frequencies in omega_ex")));
    for (x, y) in a.column("Omega^0").iter().zip(b.column("Omega^0")) {
        assert!((x / 5.3 - y).abs() < 1e-12 * x);
    }
}
