use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const COMMANDS: [(&str, &str); 5] = [
    ("snr-sweep", "snr_sweep.csv"),
    ("heatmap", "heatmap.csv"),
    ("converge", "converge.csv"),
    ("rf-sweep", "rf_sweep.csv"),
    ("single-run", "single_run.csv"),
];

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn minimal() -> String {
    fs::read_to_string(configs().join("minimal.toml")).unwrap()
}

fn nfloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nfloc")).args(args).output().unwrap()
}

fn run_with(config: &str, cmd: &str, extra: &[&str]) -> (Output, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    (nfloc(&args), dir)
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

fn read(dir: &tempfile::TempDir, name: &str) -> String {
    fs::read_to_string(dir.path().join("out").join(name)).unwrap()
}

#[test]
fn minimal_sweep_has_one_row_and_header() {
    let (out, dir) = run_with(&minimal(), "snr-sweep", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(&dir, "snr_sweep.csv");
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "scheme,snr_db,rmse_m,ci95_m,n_trials,seed");
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("dma_rcg,0,"));
    assert!(text.contains("# seed = 7\n"));
    assert!(text.contains("# [grid]\n"));
}

#[test]
fn every_command_reruns_byte_identically() {
    for (cmd, file) in COMMANDS {
        let (a, da) = run_with(&minimal(), cmd, &["--workers", "1"]);
        let (b, db) = run_with(&minimal(), cmd, &["--workers", "1"]);
        assert!(a.status.success() && b.status.success(), "{cmd}");
        assert_eq!(read(&da, file), read(&db, file), "{cmd}");
    }
}

#[test]
fn worker_count_does_not_change_output() {
    let (_, one) = run_with(&minimal(), "snr-sweep", &["--workers", "1"]);
    let (_, three) = run_with(&minimal(), "snr-sweep", &["--workers", "3"]);
    assert_eq!(read(&one, "snr_sweep.csv"), read(&three, "snr_sweep.csv"));
}

#[test]
fn seed_override_is_echoed_and_changes_results() {
    let (out, dir) = run_with(&minimal(), "snr-sweep", &["--seed-override", "99"]);
    assert!(out.status.success());
    let text = read(&dir, "snr_sweep.csv");
    assert!(text.contains("# seed = 99\n"));
    let (_, base) = run_with(&minimal(), "snr-sweep", &[]);
    assert_ne!(data_rows(&text), data_rows(&read(&base, "snr_sweep.csv")));
}

#[test]
fn missing_field_exits_with_two() {
    let cfg = minimal().replace("n_snapshots = 20\n", "");
    let (out, _dir) = run_with(&cfg, "snr-sweep", &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("n_snapshots"), "{err}");
}

#[test]
fn unknown_key_reports_its_line() {
    let cfg = minimal().replace("n_snapshots = 20\n", "n_snapshots = 20\nsnapshots_per_sec = 3\n");
    let (out, _dir) = run_with(&cfg, "snr-sweep", &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    let line = cfg.lines().position(|l| l.starts_with("snapshots_per_sec")).unwrap() + 1;
    assert!(err.contains("snapshots_per_sec") && err.contains(&line.to_string()), "{err}");
}

#[test]
fn conflicting_units_exit_with_two() {
    let cfg = minimal().replace("distance_m = 0.6\n", "distance_m = 0.6\ndistance_fraunhofer = 0.5\n");
    let (out, _dir) = run_with(&cfg, "snr-sweep", &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreadable_config_exits_with_two() {
    let out = nfloc(&["snr-sweep", "--config", "/nonexistent/run.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fixed_focus_heatmap_single_cell_records_focus() {
    let (out, dir) = run_with(&minimal(), "heatmap", &[]);
    assert!(out.status.success());
    let text = read(&dir, "heatmap.csv");
    assert!(text.contains("# focus_x_m = 0.5\n"));
    assert_eq!(data_rows(&text).len(), 1);
}

#[test]
fn ten_by_ten_heatmap_has_hundred_rows() {
    let cfg = minimal()
        .replace("n_trials = 4", "n_trials = 1")
        .replace("x_max_m = 0.5", "x_max_m = 1.4")
        .replace("y_min_m = 0.0\ny_max_m = 0.0", "y_min_m = -0.45\ny_max_m = 0.45");
    let (out, dir) = run_with(&cfg, "heatmap", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(&dir, "heatmap.csv");
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 100);
    assert!(rows[0].starts_with("0.5,-0.45,"));
}

#[test]
fn single_run_emits_one_row_per_user_per_iteration() {
    let cfg = minimal().replace("max_iterations = 2", "max_iterations = 1").replace(
        "[experiment]",
        "[[users]]\ndistance_m = 0.8\nazimuth_deg = -30.0\n\n[experiment]",
    );
    let (out, dir) = run_with(&cfg, "single-run", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(&dir, "single_run.csv");
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 2 * 2);
    for (i, row) in rows.iter().enumerate() {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 8);
        assert_eq!(fields[1], (i / 2).to_string());
        assert_eq!(fields[2], (i % 2).to_string());
    }
}

#[test]
fn desk_config_sweep_has_scheme_by_snr_rows() {
    let desk = fs::read_to_string(configs().join("desk.toml")).unwrap();
    let cfg = desk
        .replace("n_trials = 50", "n_trials = 1")
        .replace("n_snapshots = 50", "n_snapshots = 5")
        .replace("n_distance = 40", "n_distance = 8")
        .replace("n_azimuth = 61", "n_azimuth = 13")
        .replace("max_iterations = 5", "max_iterations = 1");
    let (out, dir) = run_with(&cfg, "snr-sweep", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(&dir, "snr_sweep.csv");
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 6 * 4);
    let labels: Vec<&str> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(labels[0], "fully_digital");
    assert_eq!(labels[23], "dma_rcg_quarter_wavelength");
    let snrs: Vec<&str> = rows[..4].iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(snrs, ["-15", "-10", "-5", "0"]);
}

#[test]
fn rf_sweep_rows_follow_counts() {
    let (out, dir) = run_with(&minimal(), "rf-sweep", &[]);
    assert!(out.status.success());
    let rows: Vec<String> = data_rows(&read(&dir, "rf_sweep.csv")).iter().map(|s| s.to_string()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("dma_rcg,1,") && rows[1].starts_with("dma_rcg,2,"));
}
