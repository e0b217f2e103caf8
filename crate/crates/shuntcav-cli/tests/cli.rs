//! End-to-end checks of the binary: output shape, determinism, exit codes,
//! file round-trips. Everything drives the compiled executable.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shuntcav"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

const LATTICE: &[&str] = &[
    "--lx-mm", "42", "--ly-mm", "42", "--lz-mm", "0.5", "--eps-r", "11.9",
    "--spacing-mm", "2", "--radius-mm", "0.1", "--count", "9",
];

#[test]
fn modes_csv_has_provenance_header_and_nine_digit_cells() {
    let out = run(&[&["modes", "--quiet", "--modes", "4"], LATTICE].concat());
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    let prov = lines.next().unwrap();
    assert!(prov.starts_with("# shuntcav "), "provenance line: {prov}");
    assert!(prov.contains("| modes |"));
    assert!(prov.contains("config="));
    assert_eq!(lines.next().unwrap(), "index,n,m,f_ghz");
    let first = lines.next().unwrap();
    assert!(first.starts_with("0,1,1,"), "first data row: {first}");
    let f: f64 = first.rsplit(',').next().unwrap().parse().unwrap();
    assert!((f - 13.43).abs() / 13.43 < 5e-3, "fundamental {f} GHz");
    assert_eq!(text.lines().count(), 2 + 4);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = [&["modes", "--quiet"], LATTICE].concat();
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn json_format_is_shaped_and_parseable_by_eye() {
    let out = run(&[&["plasma", "--quiet", "--format", "json"], LATTICE].concat());
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("{"));
    assert!(text.contains("\"tool\": \"shuntcav\""));
    assert!(text.contains("\"command\": \"plasma\""));
    assert!(text.contains("\"columns\": [\"a_mm\", \"r_mm\", \"eps_eff\", \"f_cutoff_ghz\", \"f_plasma_ghz\", \"valid\"]"));
    assert!(text.contains("\"true\""));
    assert!(text.trim_end().ends_with("}"));
}

#[test]
fn config_file_and_flags_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("box.json");
    let flags_out = stdout(&run(&[&["modes", "--quiet"], LATTICE].concat()));

    // Round-trip the geometry through the documented JSON schema.
    std::fs::write(
        &cfg,
        r#"{
  "lx_mm": 42.0, "ly_mm": 42.0, "lz_mm": 0.5,
  "layers": [{"t_mm": 0.5, "eps_r": 11.9}],
  "a_mm": 2.0, "r_mm": 0.1, "shunts": [9, 9]
}"#,
    )
    .unwrap();
    let cfg_out = stdout(&run(&["modes", "--quiet", "--config", cfg.to_str().unwrap()]));
    // Provenance hashes may differ (different resolved strings are fine);
    // the physics rows must not.
    let tail = |s: &str| s.lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(tail(&flags_out), tail(&cfg_out));
}

#[test]
fn giving_both_config_and_flags_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("box.json");
    std::fs::write(&cfg, "{}").unwrap();
    let out = run(&[
        &["modes", "--config", cfg.to_str().unwrap()],
        LATTICE,
    ]
    .concat());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn domain_errors_exit_3() {
    // Qubit frequency above the lattice cutoff has no penetration depth.
    let out = run(&[&["crosstalk", "--quiet", "--fq-ghz", "20"], LATTICE].concat());
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: "), "stderr: {err}");
}

#[test]
fn invalid_inputs_exit_2() {
    let out = run(&["modes"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["fit", "depth", "--profile", "/nonexistent/profile.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("modes.csv");
    let piped = stdout(&run(&[&["modes", "--quiet"], LATTICE].concat()));
    let out = run(&[
        &["modes", "--quiet", "--out", path.to_str().unwrap()],
        LATTICE,
    ]
    .concat());
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), piped);
}

#[test]
fn crosstalk_output_feeds_the_depth_fitter() {
    let dir = tempfile::tempdir().unwrap();
    let prof = dir.path().join("profile.csv");
    let out = run(&[
        &["crosstalk", "--quiet", "--fq-ghz", "5", "--max-j", "8",
          "--out", prof.to_str().unwrap()],
        LATTICE,
    ]
    .concat());
    assert!(out.status.success());

    let fit = run(&["fit", "depth", "--profile", prof.to_str().unwrap()]);
    assert!(fit.status.success());
    let text = stdout(&fit);
    let row = text.lines().nth(2).unwrap();
    let mut cells = row.split(',');
    let delta_p: f64 = cells.next().unwrap().parse().unwrap();
    let residual: f64 = cells.next().unwrap().parse().unwrap();
    // The profile is exact K0 data, so the generating depth comes back.
    let expected = 1.11703315;
    assert!((delta_p - expected).abs() / expected < 1e-6, "delta_p {delta_p}");
    assert!(residual < 1e-6);
    assert_eq!(cells.next().unwrap(), "true");
}

#[test]
fn circuit_output_feeds_the_circuit_fitter_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("circuit.csv");
    // The fitter's internal model grounds the array edge, so generate
    // observations from that same boundary case.
    let out = run(&[
        "circuit", "--nx", "4", "--ny", "4", "--f0-ghz", "12", "--beta", "0.08",
        "--boundary", "zero", "--quiet", "--out", spec.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let fit = run(&[
        "fit", "circuit", "--observations", spec.to_str().unwrap(),
        "--nx", "4", "--ny", "4", "--order", "1",
    ]);
    assert!(fit.status.success());
    let text = stdout(&fit);
    assert_eq!(text.lines().nth(1).unwrap(), "f0_ghz,beta,beta1,nre,converged,evaluations");
    let row = text.lines().nth(2).unwrap();
    let cells: Vec<&str> = row.split(',').collect();
    let f0: f64 = cells[0].parse().unwrap();
    let beta: f64 = cells[1].parse().unwrap();
    let nre: f64 = cells[3].parse().unwrap();
    assert!((f0 - 12.0).abs() < 1e-6, "f0 {f0}");
    assert!((beta - 0.08).abs() < 1e-6, "beta {beta}");
    assert!(nre < 1e-7, "nre {nre}");
}

#[test]
fn field_export_is_a_full_grid_with_dirichlet_rim() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("field.csv");
    let out = run(&[
        "oracle", "--lx-mm", "6", "--ly-mm", "6", "--lz-mm", "0.5",
        "--eps-r", "11.9", "--h-mm", "0.15", "--modes", "1", "--quiet",
        "--field-out", field.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&field).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].contains("oracle-field"));
    assert_eq!(lines[1], "nx,ny,h_mm,f_ghz");
    let meta: Vec<&str> = lines[2].split(',').collect();
    let (nx, ny): (usize, usize) = (meta[0].parse().unwrap(), meta[1].parse().unwrap());
    assert_eq!((nx, ny), (41, 41));
    assert_eq!(lines.len(), 3 + ny);
    // Conducting walls pin the field.
    assert!(lines[3].split(',').all(|v| v == "0"));
    assert!(lines[2 + ny].split(',').all(|v| v == "0"));
    let mid: Vec<f64> = lines[3 + ny / 2]
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(mid.len(), nx);
    assert_eq!(mid[0], 0.0);
    assert!(mid[nx / 2] > 0.0, "interior amplitude, canonical sign");
}

#[test]
fn sweep_covers_the_bare_cavity_and_scales_with_radius() {
    let out = run(&[
        "sweep", "--spacing-mm", "2", "--eps-r", "11.9",
        "--radii-mm", "0,0.05,0.1,0.2",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][1], 0.0);
    assert!(rows[1][1] > 0.0);
    assert!(rows[1][1] < rows[2][1] && rows[2][1] < rows[3][1]);
}

#[test]
fn refinement_study_reports_second_order_and_extrapolates() {
    let out = run(&[
        "oracle", "--lx-mm", "6", "--ly-mm", "6", "--lz-mm", "0.5",
        "--eps-r", "11.9", "--h-mm", "0.2", "--levels", "3", "--quiet",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "h_mm,f_ghz,order_estimate,extrapolated_ghz");
    assert_eq!(lines.len(), 2 + 3);
    // Intermediate rows leave the study columns blank; the last row fills them.
    assert!(lines[2].ends_with(",,"));
    let last: Vec<&str> = lines[4].split(',').collect();
    let order: f64 = last[2].parse().unwrap();
    let extrap: f64 = last[3].parse().unwrap();
    assert!((order - 2.0).abs() < 0.2, "observed order {order}");
    // Bare 6 mm silicon box: fundamental from the closed form.
    let c0 = 299_792_458.0;
    let expected = c0 / (2.0 * 11.9f64.sqrt()) * (2.0f64).sqrt() / 6e-3 / 1e9;
    assert!((extrap - expected).abs() / expected < 1e-3, "extrapolated {extrap}");
}

#[test]
fn quiet_suppresses_notes_and_results_do_not_change() {
    let noisy = run(&[&["crosstalk", "--fq-ghz", "5"], LATTICE].concat());
    let quiet = run(&[&["crosstalk", "--quiet", "--fq-ghz", "5"], LATTICE].concat());
    assert!(noisy.status.success() && quiet.status.success());
    assert_eq!(noisy.stdout, quiet.stdout);
    assert!(String::from_utf8(noisy.stderr).unwrap().contains("note:"));
    assert!(quiet.stderr.is_empty());
}

#[test]
fn beyond_validity_lattice_still_solves_but_warns() {
    let args = [
        "modes", "--lx-mm", "42", "--ly-mm", "42", "--lz-mm", "0.5",
        "--eps-r", "11.9", "--spacing-mm", "2", "--radius-mm", "0.4",
        "--count", "9", "--modes", "1",
    ];
    let out = run(&args);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("note:"));
}

fn write_profile(path: &Path, rows: &[(f64, f64)]) -> PathBuf {
    let mut text = String::from("d_mm,gamma\n");
    for (d, g) in rows {
        text.push_str(&format!("{d},{g}\n"));
    }
    std::fs::write(path, text).unwrap();
    path.to_path_buf()
}

#[test]
fn non_monotone_profile_is_flagged_in_the_fit_row() {
    let dir = tempfile::tempdir().unwrap();
    // A noisy bump at the third site: legal input, flagged output.
    let prof = write_profile(
        &dir.path().join("bumpy.csv"),
        &[(2.0, 1.0), (4.0, 0.12), (6.0, 0.14), (8.0, 0.002)],
    );
    let out = run(&["fit", "depth", "--profile", prof.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.lines().nth(2).unwrap().ends_with(",false"));
}
