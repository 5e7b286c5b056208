use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn tbscatter(dir: &Path, config: &str, args: &[&str]) -> Run {
    tbscatter_env(dir, config, args, &[])
}

fn tbscatter_env(dir: &Path, config: &str, args: &[&str], env: &[(&str, &str)]) -> Run {
    let cfg: PathBuf = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tbscatter"));
    cmd.args(args).arg("--config").arg(&cfg);
    for (k, v) in env {
        cmd.env(k, v);
    }
    let Output { status, stdout, stderr } = cmd.output().unwrap();
    Run {
        code: status.code().unwrap_or(-1),
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

/// Header line and data rows of a CSV output, comments dropped.
fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

const CHAIN: &str = "[chain1d]\nsites = 5\nv = 0.4\n\n[grid]\nmin = -1.99\nmax = 1.99\ncount = 801\n";

#[test]
fn chain_sweep_has_five_peaks_and_closed_levels() {
    let dir = TempDir::new().unwrap();
    let r = tbscatter(dir.path(), CHAIN, &["sweep"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (h, rows) = table(&r.stdout);
    assert_eq!(h, ["E", "k", "conductance", "T_1", "arg_t_1", "open_channels", "status", "closed_levels"]);
    let g: Vec<f64> = rows.iter().map(|row| num(&row[col(&h, "conductance")])).collect();
    let peaks = (1..g.len() - 1).filter(|&i| g[i] > g[i - 1] && g[i] >= g[i + 1] && g[i] > 0.5).count();
    assert_eq!(peaks, 5);
    let levels: Vec<f64> =
        rows.iter().map(|row| &row[col(&h, "closed_levels")]).filter(|c| !c.is_empty()).map(|c| num(c)).collect();
    assert_eq!(levels.len(), 5);
    assert!((levels[2]).abs() < 1e-12);
    assert!(r.stdout.starts_with("# tbscatter 0.1.0 sweep\n# config:\n"));
}

#[test]
fn dot_case_c_sweep_vanishes_at_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = "[dot2]\ncase = \"C\"\nv = 0.8\n\n[grid]\nmin = -1.0\nmax = 1.0\ncount = 5\n";
    let r = tbscatter(dir.path(), cfg, &["sweep"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (h, rows) = table(&r.stdout);
    let mid = &rows[2];
    assert_eq!(num(&mid[col(&h, "E")]), 0.0);
    assert!(num(&mid[col(&h, "conductance")]) < 1e-24);
}

#[test]
fn config_errors_exit_one_and_name_the_field() {
    let dir = TempDir::new().unwrap();
    let r = tbscatter(dir.path(), "[chain1d]\nsites = 3\n[grid]\nmin = 0.0\nmax = 1.0\ncount = 0\n", &["sweep"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("grid.count"), "{}", r.stderr);

    let r = tbscatter(dir.path(), "[chain1d]\nsites = 3\nstrength = 2.0\n", &["poles"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("strength"), "{}", r.stderr);

    let r = tbscatter(dir.path(), "[chain1d]\nsites = 3\n[dot2]\ncase = \"A\"\n", &["poles"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("geometry"), "{}", r.stderr);

    let r = tbscatter(dir.path(), "[chain1d]\nsites = 3\nv = -1.0\n", &["poles"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("chain1d"), "{}", r.stderr);

    let r = tbscatter(dir.path(), "[chain1d]\nsites = 3\n", &["sweep"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("grid"), "{}", r.stderr);

    let r = tbscatter_env(dir.path(), "[chain1d]\nsites = 3\n", &["poles"], &[("TBSCATTER_THREADS", "many")]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("TBSCATTER_THREADS"));
}

#[test]
fn numerical_failure_exits_two() {
    let dir = TempDir::new().unwrap();
    // No channel is open outside the band, so open-only has nothing to keep.
    let r = tbscatter(dir.path(), "mode = \"open-only\"\nenergy = 3.0\n[chain1d]\nsites = 3\n", &["poles"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
}

#[test]
fn decoupled_chain_poles_are_the_closed_levels() {
    let dir = TempDir::new().unwrap();
    let r = tbscatter(dir.path(), "energy = 0.3\n[chain1d]\nsites = 4\nv = 0.0\n", &["poles"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (h, rows) = table(&r.stdout);
    assert_eq!(rows.len(), 4);
    for (n, row) in rows.iter().enumerate() {
        let e = -2.0 * ((n + 1) as f64 * std::f64::consts::PI / 5.0).cos();
        assert!((num(&row[col(&h, "re")]) - e).abs() < 1e-12);
        assert_eq!(num(&row[col(&h, "width")]), 0.0);
    }
}

#[test]
fn double_pole_is_one_defective_row() {
    let dir = TempDir::new().unwrap();
    let cfg = format!("energy = 0.0\n[dot2]\ncase = \"A\"\nv_l = {}\nv_r = 0.6\n", (2.0f64 + 0.36).sqrt());
    let r = tbscatter(dir.path(), &cfg, &["poles"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (h, rows) = table(&r.stdout);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][col(&h, "multiplicity")], "2");
    assert_eq!(rows[0][col(&h, "defective")], "true");
}

#[test]
fn slab_has_two_poles_per_cross_section_level() {
    let dir = TempDir::new().unwrap();
    let cfg = "energy = 0.2\n[slab3d]\nnx = 2\nny = 3\nnz = 2\ncase = \"face-lead\"\nv = 0.9\n";
    let r = tbscatter(dir.path(), cfg, &["poles"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (_, rows) = table(&r.stdout);
    assert_eq!(rows.len(), 12);
}

#[test]
fn track_writes_every_branch_at_every_step() {
    let dir = TempDir::new().unwrap();
    let cfg =
        "[chain1d]\nsites = 5\nv = 0.0\n\n[path]\nparameter = \"v\"\nfrom = 0.0\nto = 4.0\ncount = 81\nenergy = 1.0\n";
    let r = tbscatter(dir.path(), cfg, &["track"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (h, rows) = table(&r.stdout);
    assert_eq!(rows.len(), 81 * 5);
    // Two branches end up outside the band.
    let last: Vec<&Vec<String>> = rows.iter().filter(|row| row[col(&h, "step")] == "80").collect();
    let outside = last.iter().filter(|row| num(&row[col(&h, "re")]).abs() > 2.0).count();
    assert_eq!(outside, 2);

    let r = tbscatter(dir.path(), "[chain1d]\nsites = 5\n", &["track"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("path"));
}

#[test]
fn validate_exit_codes() {
    let dir = TempDir::new().unwrap();
    let r = tbscatter(dir.path(), CHAIN, &["validate"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    let (h, rows) = table(&r.stdout);
    assert!(rows.iter().all(|row| row[col(&h, "status")] == "pass"));
    assert!(rows.iter().all(|row| num(&row[col(&h, "deviation")]) < 1e-10));

    let rect = "mode = \"open-only\"\n[rect2d]\nnx = 5\nny = 6\nleft_walls = [1, 5]\nright_walls = [0, 4]\n";
    let r = tbscatter(dir.path(), rect, &["validate"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    let (h, rows) = table(&r.stdout);
    let info: Vec<&str> =
        rows.iter().filter(|row| row[col(&h, "status")] == "info").map(|row| row[0].as_str()).collect();
    assert_eq!(info, ["s_vs_oracle[open-only]", "unitarity[open-only]"]);

    let corrupted = format!("{rect}\n[validate]\noracle = 0.0\n");
    let out = dir.path().join("report.csv");
    let r = tbscatter(dir.path(), &corrupted, &["validate", "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("s_vs_oracle[all-channels]"));
    assert!(std::fs::read_to_string(&out).unwrap().contains(",fail,"));
}

#[test]
fn json_mirrors_csv() {
    let dir = TempDir::new().unwrap();
    let csv = tbscatter(dir.path(), CHAIN, &["sweep"]);
    let json = tbscatter(dir.path(), CHAIN, &["sweep", "--format", "json"]);
    assert_eq!(json.code, 0);
    let doc: serde_json::Value = serde_json::from_str(&json.stdout).unwrap();
    let (h, rows) = table(&csv.stdout);
    let jrows = doc["rows"].as_array().unwrap();
    assert_eq!(jrows.len(), rows.len());
    assert_eq!(doc["config"]["chain1d"]["sites"], 5);
    for (c, j) in rows.iter().zip(jrows).step_by(97) {
        assert_eq!(num(&c[col(&h, "conductance")]), j["conductance"].as_f64().unwrap());
        assert_eq!(c[col(&h, "status")], j["status"].as_str().unwrap());
    }
}

#[test]
fn out_file_is_written_atomically_and_reproducibly() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep.csv");
    let a = tbscatter(dir.path(), CHAIN, &["sweep", "--out", out.to_str().unwrap()]);
    assert_eq!(a.code, 0);
    assert!(a.stdout.is_empty());
    let first = std::fs::read(&out).unwrap();
    tbscatter_env(dir.path(), CHAIN, &["sweep", "--out", out.to_str().unwrap()], &[("TBSCATTER_THREADS", "3")]);
    assert_eq!(first, std::fs::read(&out).unwrap());
    // Only the output and the config remain; no stray temp files.
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}
