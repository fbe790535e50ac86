use std::path::Path;
use std::process::Command;

use fpme::io::store_density;
use fpme::{make_grid, DensityField};

fn fpme(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fpme"))
        .args(args)
        .output()
        .expect("spawn fpme")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_quick_passes() {
    let out = fpme(&["validate", "--quick"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("PASS"));
    assert!(stdout.contains("0 failed"));
}

#[test]
fn distance_rejects_mass_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let g = make_grid(1, 8).unwrap();
    let a = dir.path().join("a.fpme");
    let b = dir.path().join("b.csv");
    let k = dir.path().join("k.fpme");
    store_density(&DensityField::uniform(g), &a).unwrap();
    store_density(&DensityField::new(g, vec![2.0; 8]).unwrap(), &b).unwrap();
    let out = fpme(&["kernel", "--n", "8", "--sigma", "0.5", "--out", s(&k)]);
    assert_eq!(out.status.code(), Some(0));
    let out = fpme(&["distance", "--rho0", s(&a), "--rho1", s(&b), "--kernel", s(&k), "--m", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mass mismatch"));
}

#[test]
fn distance_and_geodesic_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let g = make_grid(1, 8).unwrap();
    let a = dir.path().join("a.fpme");
    let b = dir.path().join("b.fpme");
    let k = dir.path().join("k.fpme");
    store_density(&DensityField::from_fn(g, |x| 1.0 + 0.5 * (6.0 * x[0]).sin()).unwrap().normalized().unwrap(), &a)
        .unwrap();
    store_density(&DensityField::uniform(g), &b).unwrap();
    assert_eq!(fpme(&["kernel", "--n", "8", "--sigma", "0.5", "--out", s(&k)]).status.code(), Some(0));

    let path = dir.path().join("path");
    let out = fpme(&[
        "distance", "--rho0", s(&a), "--rho1", s(&b), "--kernel", s(&k), "--m", "1.5", "--time-steps", "8",
        "--path-out", s(&path),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let d = json["distance"].as_f64().unwrap();
    assert!(d > 0.0);
    assert_eq!(json["speed_profile"].as_array().unwrap().len(), 8);
    assert!(json["constraint_residual"].as_f64().unwrap() <= 1e-9);
    assert!(path.join("node_000008.fpme").exists());
    assert!(path.join("manifest.json").exists());

    let geo = dir.path().join("geo");
    let out = fpme(&[
        "geodesic", "--rho0", s(&a), "--rho1", s(&b), "--kernel", s(&k), "--m", "1.5", "--time-steps", "8",
        "--out", s(&geo),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((json["distance"].as_f64().unwrap() - d).abs() < 1e-12);
    let csv = std::fs::read_to_string(geo.join("speed_profile.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
}

#[test]
fn jko_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("runs/a");
    let out = fpme(&[
        "jko", "--m", "2", "--sigma", "0.5", "--dim", "1", "--n", "64", "--tau", "1e-3", "--steps", "50", "--init",
        "cosine", "--out", s(&run),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let snapshots = std::fs::read_dir(&run)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("step_"))
        .count();
    assert_eq!(snapshots, 51);
    let csv = std::fs::read_to_string(run.join("diagnostics.csv")).unwrap();
    assert!(csv.starts_with("step,time,mass,entropy,fisher,w2_step,min_density,inner_iterations,residual\n"));
    assert_eq!(csv.lines().count(), 52);
    let manifest: fpme::cli::RunManifest =
        serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.exit_status, 0);
    assert_eq!(manifest.config["jko"]["inner"]["intervals"], 8);
    assert_eq!(manifest.kernel.unwrap().radius, 8);
}

#[test]
fn oracle_commands_and_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let heat = dir.path().join("heat.fpme");
    let ode = dir.path().join("ode.fpme");
    let common = ["--init", "bump:0.1", "--sigma", "0.5", "--n", "32", "--t", "0.01"];
    let mut args = vec!["oracle", "heat"];
    args.extend(common);
    args.extend(["--out", s(&heat)]);
    assert_eq!(fpme(&args).status.code(), Some(0));
    let mut args = vec!["oracle", "ode", "--m", "1"];
    args.extend(common);
    args.extend(["--out", s(&ode)]);
    assert_eq!(fpme(&args).status.code(), Some(0));
    let h = fpme::io::load_density(&heat).unwrap();
    let o = fpme::io::load_density(&ode).unwrap();
    assert!(h.l1_distance(&o).unwrap() < 0.05);

    // a corrupt input reports its offset
    let bad = dir.path().join("bad.fpme");
    std::fs::write(&bad, b"NOPE").unwrap();
    let init = format!("file:{}", s(&bad));
    let out = fpme(&["oracle", "heat", "--init", &init, "--sigma", "0.5", "--n", "4", "--t", "0.1", "--out", s(&heat)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("offset 0"));
}
