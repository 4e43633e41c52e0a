use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use floquet_cli::export::{Sidecar, Status, Table};

const S_WAVE: &str = r#"
[well]
V0 = 0.557
A_over_pi = -0.504
p = 1
"#;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn floquet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_floquet")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn missing_mode_lists_the_valid_ones() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), S_WAVE);
    let out = floquet(&["--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for m in ["static-spectrum", "pole-trace", "critical-point", "scatter-grid", "emission", "verify", "ep-scan"] {
        assert!(err.contains(m), "{err}");
    }
}

#[test]
fn derived_radius_is_echoed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), S_WAVE);
    let out_dir = tmp.path().join("out");
    let out = floquet(&["--config", &cfg, "--mode", "scatter", "--out", out_dir.to_str().unwrap()]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("d = 1.5001"));
    let side = Sidecar::read(&out_dir.join("scatter.json")).unwrap();
    assert!((side.config.well.d.unwrap() - 1.5002).abs() < 1e-4);
    assert_eq!(side.status, Status::Complete);
}

#[test]
fn conflicting_well_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), S_WAVE);
    let out = floquet(&["--config", &cfg, "--mode", "scatter", "--override", "well.d=1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("A_over_pi"));
}

#[test]
fn empty_grid_succeeds_with_a_header() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{S_WAVE}\n[scatter]\nomega_range = [0.1, 0.2]\n"));
    let out_dir = tmp.path().join("out");
    ok(&floquet(&["--config", &cfg, "--mode", "scatter-grid", "--out", out_dir.to_str().unwrap()]));
    let table = Table::read(&out_dir.join("grid.csv")).unwrap();
    assert!(table.rows.is_empty());
    assert_eq!(table.header[..3], ["F2", "omega", "Re_S00"]);
    assert_eq!(table.header.len(), 10);
}

#[test]
fn grid_rows_are_complete_and_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "{S_WAVE}\n[drive]\nF2_range = {{ start = 0.0, stop = 0.1, count = 2 }}\n[scatter]\nomega_range = [0.05, 0.3, 1.1]\n[truncation]\nj_neg = 3\nj_pos = 3\nl_max = 4\nn_t = 32\n"
    );
    let cfg = write_config(tmp.path(), &text);
    let run = |name: &str, workers: &str| {
        let dir = tmp.path().join(name);
        ok(&floquet(&["--config", &cfg, "--mode", "scatter-grid", "--workers", workers, "--out", dir.to_str().unwrap()]));
        dir
    };
    let (a, b, c) = (run("a", "1"), run("b", "1"), run("c", "3"));
    let grid = fs::read(a.join("grid.csv")).unwrap();
    assert_eq!(grid, fs::read(b.join("grid.csv")).unwrap());
    assert_eq!(grid, fs::read(c.join("grid.csv")).unwrap());
    let table = Table::read(&a.join("grid.csv")).unwrap();
    assert_eq!(table.rows.len(), 2 * 3);
    // F2 outermost
    assert_eq!(num(&table.rows[1][0]), 0.0);
    assert_eq!(num(&table.rows[1][1]), 0.3);
    // separate real and imaginary columns, 17 significant digits
    let re = &table.rows[4][table.column("Re_S00").unwrap()];
    let mantissa = re.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
    assert_eq!(mantissa.len(), 17, "{re}");
    for row in &table.rows {
        let s = num(&row[4]);
        assert!((0.0..=1.0 + 1e-9).contains(&s));
    }
}

#[test]
fn pole_trace_passes_its_own_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("trace");
    let cfg = configs().join("s-wave-pole-trace.toml");
    ok(&floquet(&["--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]));
    let table = Table::read(&out_dir.join("trajectory.csv")).unwrap();
    let last = table.rows.last().unwrap();
    assert!(num(&last[0]) > 0.27);
    // past the critical point
    assert!(num(&last[2]) > 0.0);
    assert_eq!(table.header[..5], ["F2", "Re_omega", "Im_omega", "Re_k[-6]", "Im_k[-6]"]);
    assert_eq!(table.header[table.header.len() - 2..], ["sigma_min", "iterations"]);

    // every persisted number round-trips to the sidecar bit for bit
    let side = Sidecar::read(&out_dir.join("pole-trace.json")).unwrap();
    assert_eq!(side.solutions.len(), table.rows.len());
    for (row, sol) in table.rows.iter().zip(&side.solutions) {
        assert_eq!(num(&row[0]).to_bits(), sol.f2.to_bits());
        assert_eq!(num(&row[1]).to_bits(), sol.omega.re.to_bits());
        assert_eq!(num(&row[2]).to_bits(), sol.omega.im.to_bits());
        for (i, k) in sol.k.iter().enumerate() {
            assert_eq!(num(&row[3 + 2 * i]).to_bits(), k.re.to_bits());
            assert_eq!(num(&row[4 + 2 * i]).to_bits(), k.im.to_bits());
        }
    }

    let solution = format!("verify.solution=\"{}\"", out_dir.join("pole-trace.json").display());
    let vdir = tmp.path().join("verify");
    let out = floquet(&["--config", cfg.to_str().unwrap(), "--mode", "verify", "--override", &solution, "--out", vdir.to_str().unwrap()]);
    ok(&out);
    let report = Table::read(&vdir.join("verify.csv")).unwrap();
    assert_eq!(report.rows.len(), table.rows.len());
    let worst = report.rows.iter().map(|r| num(&r[4])).fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");

    let strict = floquet(&[
        "--config",
        cfg.to_str().unwrap(),
        "--mode",
        "verify",
        "--override",
        &solution,
        "--override",
        "solver.verify_tol=1e-12",
        "--out",
        vdir.to_str().unwrap(),
    ]);
    assert_eq!(strict.status.code(), Some(3));
}

#[test]
fn resumed_trace_reaches_the_same_pole() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("mode = \"pole-trace\"\n{S_WAVE}\n[drive]\nF2 = 0.16\n"));
    let direct = tmp.path().join("direct");
    let split = tmp.path().join("split");
    ok(&floquet(&["--config", &cfg, "--out", direct.to_str().unwrap()]));
    ok(&floquet(&["--config", &cfg, "--out", split.to_str().unwrap(), "--override", "drive.F2=0.08"]));
    ok(&floquet(&["--config", &cfg, "--out", split.to_str().unwrap(), "--resume"]));
    let a = Sidecar::read(&direct.join("pole-trace.json")).unwrap();
    let b = Sidecar::read(&split.join("pole-trace.json")).unwrap();
    let (pa, pb) = (a.solutions.last().unwrap(), b.solutions.last().unwrap());
    assert_eq!(pa.f2, pb.f2);
    assert!((pa.omega - pb.omega).norm() < 1e-10, "{} vs {}", pa.omega, pb.omega);
    let rows = Table::read(&split.join("trajectory.csv")).unwrap().rows;
    assert_eq!(rows.len(), b.solutions.len());
    assert!(rows.windows(2).all(|w| num(&w[1][0]) > num(&w[0][0])));

    // resuming with a different well is refused
    let out = floquet(&["--config", &cfg, "--out", split.to_str().unwrap(), "--resume", "--override", "well.V0=0.6"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solver_failure_leaves_partial_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("mode = \"pole-trace\"\n{S_WAVE}\n[drive]\nF2 = 0.2\n[solver]\nmax_points = 4\n"));
    let out_dir = tmp.path().join("out");
    let out = floquet(&["--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("partial"));
    let side = Sidecar::read(&out_dir.join("pole-trace.json")).unwrap();
    assert_eq!(side.status, Status::Partial);
    assert_eq!(side.solutions.len(), 4);
    assert_eq!(Table::read(&out_dir.join("trajectory.csv")).unwrap().rows.len(), 4);
}

#[test]
fn emission_profile_is_normalized() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("emission");
    let cfg = configs().join("s-wave-emission.toml");
    ok(&floquet(&["--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]));
    let table = Table::read(&out_dir.join("emission.csv")).unwrap();
    assert_eq!(table.header[..3], ["j", "Re_k", "w_l0"]);
    let weights: Vec<usize> = (0..table.header.len()).filter(|&i| table.header[i].starts_with("w_l")).collect();
    let total: f64 = table.rows.iter().flat_map(|r| weights.iter().map(move |&i| num(&r[i]))).sum();
    assert!((total - 1.0).abs() < 1e-10, "{total}");
    assert_eq!(table.rows[0][0], "1");
    assert_eq!(table.header.iter().filter(|h| h.starts_with("f(theta=")).count(), 37);
}

#[test]
fn emission_past_the_critical_point_uses_the_partner() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("emission");
    let cfg = configs().join("s-wave-emission.toml");
    ok(&floquet(&["--config", cfg.to_str().unwrap(), "--override", "drive.F2=0.27", "--out", out_dir.to_str().unwrap()]));
    let side = Sidecar::read(&out_dir.join("emission.json")).unwrap();
    let sol = &side.solutions[0];
    assert!(sol.omega.im < 0.0);
    assert_eq!(side.diagnostics["dominant_j"], 0);
}

#[test]
fn static_spectrum_and_degeneracy_scan() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("ep");
    let cfg = configs().join("ep-scan.toml");
    ok(&floquet(&["--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]));
    let table = Table::read(&out_dir.join("degeneracies.csv")).unwrap();
    let hit = table
        .rows
        .iter()
        .find(|r| r[1] == "1" && r[4] == "0" && r[7] == "1")
        .expect("p/s coincidence one quantum apart");
    assert!((num(&hit[0]) - 7.084).abs() < 1e-3);

    let out_dir = tmp.path().join("spectrum");
    let cfg = configs().join("static-spectrum.toml");
    ok(&floquet(&["--config", cfg.to_str().unwrap(), "--override", "sweep.range=[0.6, 1.6]", "--out", out_dir.to_str().unwrap()]));
    let table = Table::read(&out_dir.join("spectrum.csv")).unwrap();
    let count = |a: &str, l: &str| table.rows.iter().filter(|r| num(&r[0]) == num(a) && r[3] == l).count();
    // one s state below -A/pi = 1, two between 1.5 and 2; p states from 1
    assert_eq!((count("0.6", "0"), count("0.6", "1")), (1, 0));
    assert_eq!((count("1.6", "0"), count("1.6", "1")), (2, 1));
}
