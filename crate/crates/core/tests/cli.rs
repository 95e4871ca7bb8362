mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nltl2p::io::{read_cube, write_cube};
use nltl2p::Tensor3f;
use serde_json::Value;
use sha2::{Digest, Sha256};

fn nltl2p(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nltl2p")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Work {
    dir: tempfile::TempDir,
}

impl Work {
    fn new() -> Self {
        Work { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn clean(&self, dims: [usize; 3]) -> PathBuf {
        let p = self.path("clean.nlt");
        write_cube(&p, &common::low_rank_cube(dims)).unwrap();
        p
    }

    fn config(&self, iters: usize) -> PathBuf {
        let mut cfg = common::desk_config();
        cfg.max_outer_iters = iters;
        let p = self.path("run.json");
        std::fs::write(&p, serde_json::json!({ "solver": cfg }).to_string()).unwrap();
        p
    }
}

#[test]
fn simulate_rejects_unknown_case() {
    let w = Work::new();
    let clean = w.clean([8, 8, 4]);
    let out = nltl2p(&["simulate", "--input", s(&clean), "--case", "4", "--seed", "1", "--output", s(&w.path("n.nlt"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_key_names_the_key() {
    let w = Work::new();
    let clean = w.clean([8, 8, 4]);
    let mut cfg = serde_json::to_value(common::desk_config()).unwrap();
    cfg.as_object_mut().unwrap().remove("gamma");
    let cfg_path = w.path("bad.json");
    std::fs::write(&cfg_path, serde_json::json!({ "solver": cfg }).to_string()).unwrap();
    let out = nltl2p(&["denoise", "--input", s(&clean), "--config", s(&cfg_path), "--output", s(&w.path("r.nlt"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma"));
}

#[test]
fn evaluate_dimension_mismatch_is_usage_error() {
    let w = Work::new();
    let clean = w.clean([8, 8, 4]);
    let other = w.path("other.nlt");
    write_cube(&other, &common::low_rank_cube([8, 8, 5])).unwrap();
    let out = nltl2p(&["evaluate", "--restored", s(&other), "--clean", s(&clean)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_manifest_and_identity_check() {
    let w = Work::new();
    let clean = w.clean([12, 11, 8]);
    let noisy = w.path("noisy.nlt");
    let comps = w.path("components");
    let out = nltl2p(&[
        "simulate", "--input", s(&clean), "--case", "3", "--seed", "5", "--output", s(&noisy), "--components-dir", s(&comps),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let manifest: Value = serde_json::from_slice(&std::fs::read(comps.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["case"], 3);
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["dims"], serde_json::json!([12, 11, 8]));
    let hex = |b: &[u8]| Sha256::digest(b).iter().map(|x| format!("{x:02x}")).collect::<String>();
    assert_eq!(manifest["noisy"]["sha256"], hex(&std::fs::read(&noisy).unwrap()));
    for entry in manifest["components"].as_array().unwrap() {
        let bytes = std::fs::read(comps.join(entry["file"].as_str().unwrap())).unwrap();
        assert_eq!(entry["sha256"], hex(&bytes));
    }

    let report = w.path("id.json");
    let out = nltl2p(&[
        "evaluate", "--restored", s(&noisy), "--clean", s(&clean), "--identity-check", s(&comps), "--report", s(&report),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["identity_check"], true);

    // Any tampering with the noisy cube breaks the identity.
    let mut t: Tensor3f = read_cube(&noisy).unwrap();
    t[[0, 0, 0]] += 1e-12;
    write_cube(&noisy, &t).unwrap();
    let out = nltl2p(&["evaluate", "--restored", s(&noisy), "--clean", s(&clean), "--identity-check", s(&comps)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn evaluate_self_gives_perfect_scores() {
    let w = Work::new();
    let clean = w.clean([16, 16, 3]);
    let report = w.path("m.json");
    let out = nltl2p(&["evaluate", "--restored", s(&clean), "--clean", s(&clean), "--report", s(&report)]);
    assert!(out.status.success());
    let r: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["mpsnr"].as_f64().unwrap(), 100.0);
    assert!((r["mssim"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(r["ergas"].as_f64().unwrap(), 0.0);
    let csv = std::fs::read_to_string(w.path("m.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "mpsnr,mssim,ergas,mfsim");
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn evaluate_batch_writes_one_row_per_cube() {
    let w = Work::new();
    let (restored, clean) = (w.path("restored"), w.path("clean"));
    std::fs::create_dir_all(&restored).unwrap();
    std::fs::create_dir_all(&clean).unwrap();
    let base = common::low_rank_cube([16, 16, 2]);
    for (name, shift) in [("a.nlt", 0.0), ("b.nlt", 0.01)] {
        write_cube(clean.join(name), &base).unwrap();
        write_cube(restored.join(name), &base.map(|v| v + shift)).unwrap();
    }
    let csv = w.path("batch.csv");
    let out = nltl2p(&["evaluate", "--restored", s(&restored), "--clean", s(&clean), "--csv", s(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "name,mpsnr,mssim,ergas,mfsim");
    assert!(lines[1].starts_with("a.nlt,100"));
    let psnr_b: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!(psnr_b > 30.0 && psnr_b < 100.0);

    let out = nltl2p(&["evaluate", "--restored", s(&restored), "--clean", s(&clean)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn denoise_writes_outputs_and_report_reads_diagnostics() {
    let w = Work::new();
    let clean = w.clean([16, 16, 8]);
    let noisy = w.path("noisy.nlt");
    assert!(nltl2p(&["simulate", "--input", s(&clean), "--case", "1", "--seed", "2", "--output", s(&noisy)]).status.success());
    let (restored, stripes, diag) = (w.path("r.nlt"), w.path("s.nlt"), w.path("diag.csv"));
    let out = nltl2p(&[
        "denoise",
        "--input",
        s(&noisy),
        "--config",
        s(&w.config(4)),
        "--output",
        s(&restored),
        "--stripes-out",
        s(&stripes),
        "--diagnostics",
        s(&diag),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: Tensor3f = read_cube(&restored).unwrap();
    let st: Tensor3f = read_cube(&stripes).unwrap();
    let n: Tensor3f = read_cube(&noisy).unwrap();
    assert_eq!(r.dims(), n.dims());
    assert_eq!(st.dims(), n.dims());
    assert_eq!(std::fs::read_to_string(&diag).unwrap().lines().count(), 5);

    let plot = w.path("plot.json");
    assert!(nltl2p(&["report", "--diagnostics", s(&diag), "--out", s(&plot)]).status.success());
    let p: Value = serde_json::from_slice(&std::fs::read(&plot).unwrap()).unwrap();
    for key in ["iteration", "phi", "r_s", "r_l", "plan_epoch"] {
        assert_eq!(p[key].as_array().unwrap().len(), 4, "{key}");
    }
}

#[test]
fn report_on_empty_diagnostics_gives_empty_series() {
    let w = Work::new();
    let diag = w.path("empty.csv");
    std::fs::write(&diag, "").unwrap();
    let plot = w.path("plot.json");
    assert!(nltl2p(&["report", "--diagnostics", s(&diag), "--out", s(&plot)]).status.success());
    let p: Value = serde_json::from_slice(&std::fs::read(&plot).unwrap()).unwrap();
    assert!(p["phi"].as_array().unwrap().is_empty());

    let out = nltl2p(&["report", "--diagnostics", s(&w.path("absent.csv")), "--out", s(&plot)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn import_raw_f32_and_u16() {
    let w = Work::new();
    let values: Vec<f32> = (0..24).map(|i| i as f32 * 0.25).collect();
    let raw = w.path("cube.f32");
    std::fs::write(&raw, values.iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>()).unwrap();
    let out_path = w.path("cube.nlt");
    let out = nltl2p(&["import", "--raw", s(&raw), "--dims", "2,3,4", "--dtype", "f32", "--output", s(&out_path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t: Tensor3f = read_cube(&out_path).unwrap();
    assert_eq!(t.dims(), [2, 3, 4]);
    assert!(t.data().iter().zip(&values).all(|(&a, &b)| a == f64::from(b)));

    let counts: Vec<u16> = (0..24).map(|i| 100 + 10 * i).collect();
    let raw16 = w.path("cube.u16");
    std::fs::write(&raw16, counts.iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>()).unwrap();
    let out = nltl2p(&["import", "--raw", s(&raw16), "--dims", "2,3,4", "--dtype", "u16", "--output", s(&out_path), "--normalize"]);
    assert!(out.status.success());
    let t: Tensor3f = read_cube(&out_path).unwrap();
    let (lo, hi) = t.data().iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    assert_eq!((lo, hi), (0.0, 1.0));

    let out = nltl2p(&["import", "--raw", s(&raw16), "--dims", "2,3,5", "--dtype", "u16", "--output", s(&out_path)]);
    assert_eq!(out.status.code(), Some(2));

    let out = nltl2p(&["import", "--raw", s(&raw16), "--dims", "2,3", "--dtype", "u16", "--output", s(&out_path)]);
    assert_eq!(out.status.code(), Some(2));
}
