//! End-to-end tests of the `rotostar` binary: config handling, pipeline
//! artifacts, determinism, manifest completeness, and exit codes.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rotostar"))
}

fn small_config(tasks: &str) -> String {
    format!(
        r#"{{
  "eos": {{"gamma": 1.6666666666666667}},
  "numerics": {{"nr": 150, "ns": 8, "nzeta": 6, "m_values": [0], "lmax": 6,
                "kstar_nr": 80, "dt": 0.02, "t_end": 0.2,
                "kstar_gammas": [1.5]}},
  "tasks": {tasks},
  "seed": 11
}}"#
    )
}

fn write_config(dir: &Path, tasks: &str) -> std::path::PathBuf {
    let path = dir.join("scenario.json");
    std::fs::write(&path, small_config(tasks)).unwrap();
    path
}

#[test]
fn config_round_trips_unchanged() {
    let text = small_config(r#"["equilibrium", "spectrum"]"#);
    let cfg: serde_json::Value = serde_json::from_str(&text).unwrap();
    let again: serde_json::Value =
        serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(cfg, again);
}

#[test]
fn invalid_config_exits_2_with_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"eos": {"gamma": 0.9}, "tasks": ["equilibrium"]}"#,
    )
    .unwrap();
    let out = bin()
        .args(["run"])
        .arg(&path)
        .arg("--out")
        .arg(tmp.path().join("a"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("eos.gamma"), "stderr: {msg}");
}

#[test]
fn unknown_config_field_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    std::fs::write(&path, r#"{"tasks": [], "typo_field": 1}"#).unwrap();
    let out = bin()
        .args(["run"])
        .arg(&path)
        .arg("--out")
        .arg(tmp.path().join("a"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn equilibrium_smoke_writes_model_and_admissibility() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"["equilibrium"]"#);
    let out_dir = tmp.path().join("out");
    let out = bin()
        .args(["run"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("model").join("metadata.json").is_file());
    assert!(out_dir.join("admissibility.json").is_file());
    assert!(out_dir.join("theta_profile.csv").is_file());
    assert!(out_dir.join("boundary.csv").is_file());
    let adm: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("admissibility.json")).unwrap())
            .unwrap();
    assert_eq!(adm["all_pass"], serde_json::Value::Bool(true));

    // the stored model passes `check`
    let chk = bin().arg("check").arg(out_dir.join("model")).output().unwrap();
    assert_eq!(chk.status.code(), Some(0), "{}", String::from_utf8_lossy(&chk.stderr));
}

#[test]
fn nonrotating_spectrum_is_purely_imaginary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"["spectrum"]"#);
    let out_dir = tmp.path().join("out");
    let out = bin()
        .args(["run"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(out_dir.join("spectrum/m0/spectrum.csv")).unwrap();
    let mut n = 0;
    for line in text.lines().skip(1) {
        let re: f64 = line.split(',').next().unwrap().parse().unwrap();
        assert!(re.abs() <= 1e-8, "eigenvalue with real part {re}");
        n += 1;
    }
    assert!(n > 0, "spectrum file is empty");
}

fn snapshot_csv_bodies(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "csv") {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn reruns_with_same_seed_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"["equilibrium", "spectrum", "evolve"]"#);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out_dir in [&a, &b] {
        let out = bin()
            .args(["run"])
            .arg(&cfg)
            .arg("--out")
            .arg(out_dir)
            .args(["--seed", "42"])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (sa, sb) = (snapshot_csv_bodies(&a), snapshot_csv_bodies(&b));
    assert!(!sa.is_empty());
    assert_eq!(sa.len(), sb.len());
    for ((na, ba), (nb, bb)) in sa.iter().zip(sb.iter()) {
        assert_eq!(na, nb);
        assert_eq!(ba, bb, "csv body differs: {na}");
    }
    // manifests agree too (same checksums)
    assert_eq!(
        std::fs::read(a.join("manifest.json")).unwrap(),
        std::fs::read(b.join("manifest.json")).unwrap()
    );
}

#[test]
fn manifest_lists_every_artifact_with_checksum() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"["equilibrium", "spectrum"]"#);
    let out_dir = tmp.path().join("out");
    let out = bin()
        .args(["run"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    let listed: BTreeSet<String> = manifest["files"]
        .as_object()
        .unwrap()
        .keys()
        .cloned()
        .collect();
    // every file on disk (except the manifest itself) is listed
    let mut stack = vec![out_dir.clone()];
    let mut on_disk = BTreeSet::new();
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(&out_dir).unwrap().to_string_lossy().to_string();
                if rel != "manifest.json" {
                    on_disk.insert(rel);
                }
            }
        }
    }
    assert_eq!(listed, on_disk);
    for (rel, entry) in manifest["files"].as_object().unwrap() {
        let sha = entry["sha256"].as_str().unwrap();
        assert_eq!(sha.len(), 64, "bad checksum for {rel}");
    }
}

#[test]
fn empty_task_list_yields_empty_summary_and_exit_0() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[]");
    let out_dir = tmp.path().join("out");
    let out = bin()
        .args(["run"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = bin().arg("report").arg(&out_dir).output().unwrap();
    assert_eq!(rep.status.code(), Some(0));
    assert!(out_dir.join("report/summary.txt").is_file());
}

#[test]
fn report_collates_artifacts_and_emits_plot_series() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"["equilibrium", "spectrum", "evolve", "kstar"]"#);
    let out_dir = tmp.path().join("out");
    let out = bin()
        .args(["run"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = bin().arg("report").arg(&out_dir).output().unwrap();
    assert_eq!(rep.status.code(), Some(0));
    let text = String::from_utf8_lossy(&rep.stdout);
    assert!(text.contains("checksums: all ok"), "{text}");
    assert!(text.contains("spectrum m0"), "{text}");
    assert!(text.contains("evolution: estimate pass"), "{text}");
    // plot-ready series with region metadata and the exponential envelope
    let scatter =
        std::fs::read_to_string(out_dir.join("report/spectrum_scatter.csv")).unwrap();
    assert!(scatter.starts_with("m,re,im,sqrt_mstar,beta_half"));
    let energy = std::fs::read_to_string(out_dir.join("report/energy_envelope.csv")).unwrap();
    assert!(energy.starts_with("t,sqrt_e,envelope"));
    // the envelope dominates √E at every sample (certified estimate)
    for line in energy.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!(cols[2] >= cols[1] - 1e-9 * cols[2].abs().max(1.0));
    }
    let kstar = std::fs::read_to_string(out_dir.join("report/kstar_vs_gamma.csv")).unwrap();
    assert!(kstar.starts_with("gamma,k_star,k_star_nondim"));
    assert_eq!(kstar.lines().count(), 2, "one γ row expected");
}

#[test]
fn check_on_missing_directory_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("check")
        .arg(tmp.path().join("does_not_exist"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn corrupt_model_table_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"["equilibrium"]"#);
    let out_dir = tmp.path().join("out");
    let out = bin()
        .args(["run"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    // truncate a model table
    let table = out_dir.join("model/background.csv");
    let text = std::fs::read_to_string(&table).unwrap();
    let keep: Vec<&str> = text.lines().take(3).collect();
    std::fs::write(&table, keep.join("\n")).unwrap();
    let chk = bin().arg("check").arg(out_dir.join("model")).output().unwrap();
    assert_eq!(chk.status.code(), Some(3), "{}", String::from_utf8_lossy(&chk.stderr));
}
