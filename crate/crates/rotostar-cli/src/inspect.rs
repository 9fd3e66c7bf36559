//! The `check` and `report` subcommands: verify a stored model directory, and
//! collate a run's artifacts into a text summary plus plot-ready series.

use crate::error::CliError;
use crate::manifest;
use rotostar::io::read_csv;
use rotostar::stellar_model::{
    bernoulli_residual, check_admissible, hydrostatic_residual, load_model, StellarError,
};
use std::fmt::Write as _;
use std::path::Path;

/// Load a model directory and re-run the background checks; returns the text
/// report and whether everything passed.
pub fn check_model(dir: &Path) -> Result<(String, bool), CliError> {
    let model = load_model(dir).map_err(|e| match e {
        StellarError::Io(_) => CliError::Io(format!("{}: {e}", dir.display())),
        other => CliError::Task(format!("{}: {other}", dir.display())),
    })?;
    let adm = check_admissible(&model);
    let bern = bernoulli_residual(&model);
    let hydro = hydrostatic_residual(&model);
    let scale = model.upsilon_o.abs().max(1.0);
    let bern_ok = bern <= 1e-6 * scale;
    let hydro_ok = hydro <= 1e-4 * scale;
    let pass = adm.all_pass && bern_ok && hydro_ok;
    let mut s = String::new();
    let _ = writeln!(s, "model: γ = {}, ρ_O = {}, G = {}", model.eos.gamma, model.rho_o, model.g_const);
    let _ = writeln!(s, "  spherical: {}", model.is_spherical());
    let _ = writeln!(s, "  boundary radius: {}", model.r_boundary);
    let _ = writeln!(s, "admissibility:");
    let _ = writeln!(s, "  positivity {}  smoothness {}  monotonicity {}", adm.positivity, adm.smoothness, adm.monotonicity);
    let _ = writeln!(s, "  vacuum boundary {}  barotropy {} (defect {:.3e})", adm.vacuum_boundary, adm.barotropy, adm.barotropy_defect);
    let _ = writeln!(s, "residuals:");
    let _ = writeln!(s, "  bernoulli {bern:.3e} ({})", if bern_ok { "ok" } else { "FAIL" });
    let _ = writeln!(s, "  hydrostatic {hydro:.3e} ({})", if hydro_ok { "ok" } else { "FAIL" });
    let _ = writeln!(s, "overall: {}", if pass { "PASS" } else { "FAIL" });
    Ok((s, pass))
}

fn read_json_value(path: &Path) -> Option<serde_json::Value> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

/// Collate the artifacts of a finished run: verify the manifest, write
/// `report/summary.txt`, and derive plot series (spectrum scatter with
/// inclusion-region metadata, energy-vs-time with the certified envelope, and
/// k* versus γ).
pub fn emit_report(dir: &Path) -> Result<(String, bool), CliError> {
    let report_dir = dir.join("report");
    std::fs::create_dir_all(&report_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", report_dir.display())))?;
    let mut s = String::new();
    let mut all_ok = true;

    // manifest integrity
    match manifest::verify(dir) {
        Ok((m, bad)) => {
            let _ = writeln!(s, "manifest: {} files, seed {}", m.files.len(), m.seed);
            if bad.is_empty() {
                let _ = writeln!(s, "  checksums: all ok");
            } else {
                all_ok = false;
                let _ = writeln!(s, "  checksum FAILURES: {bad:?}");
            }
        }
        Err(e) => {
            let _ = writeln!(s, "manifest: missing or unreadable ({e})");
        }
    }

    if let Some(summary) = read_json_value(&dir.join("run_summary.json")) {
        let tasks = summary["tasks"].as_array().cloned().unwrap_or_default();
        let _ = writeln!(s, "tasks: {}", serde_json::Value::Array(tasks));
    }

    // equilibrium / admissibility
    if let Some(adm) = read_json_value(&dir.join("admissibility.json")) {
        let pass = adm["all_pass"].as_bool().unwrap_or(false);
        all_ok &= pass;
        let _ = writeln!(s, "admissibility: {}", if pass { "pass" } else { "FAIL" });
    }

    // spectrum sectors: inclusion-set and symmetry outcomes + scatter series
    let spec_root = dir.join("spectrum");
    if spec_root.is_dir() {
        let mut scatter: Vec<Vec<f64>> = Vec::new();
        let mut sectors: Vec<_> = std::fs::read_dir(&spec_root)
            .map_err(|e| CliError::Io(format!("{e}")))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_dir())
            .collect();
        sectors.sort();
        for sector in sectors {
            let name = sector.file_name().unwrap_or_default().to_string_lossy().to_string();
            let m: f64 = name.trim_start_matches('m').parse().unwrap_or(f64::NAN);
            let summary = read_json_value(&sector.join("spectrum_summary.json"));
            let (mut sqrt_mstar, mut beta_half) = (f64::NAN, f64::NAN);
            if let Some(v) = &summary {
                let m_star = v["m_star"].as_f64().unwrap_or(f64::NAN);
                let beta = v["beta"].as_f64().unwrap_or(f64::NAN);
                sqrt_mstar = m_star.max(0.0).sqrt();
                beta_half = 0.5 * beta;
                let sym = v["symmetry"]["pass"].as_bool();
                let inc = v["inclusion"]["pass"].as_bool();
                all_ok &= sym.unwrap_or(true) && inc.unwrap_or(true);
                let _ = writeln!(
                    s,
                    "spectrum {name}: symmetry {} inclusion {} (√m* = {sqrt_mstar:.6e}, β/2 = {beta_half:.6e})",
                    sym.map_or("n/a".into(), |b| b.to_string()),
                    inc.map_or("n/a".into(), |b| b.to_string()),
                );
            }
            if let Ok((_, rows)) = read_csv(&sector.join("spectrum.csv")) {
                for row in rows {
                    if row.len() >= 2 {
                        scatter.push(vec![m, row[0], row[1], sqrt_mstar, beta_half]);
                    }
                }
            }
        }
        if !scatter.is_empty() {
            let path = report_dir.join("spectrum_scatter.csv");
            rotostar::io::write_csv(
                &path,
                &["m", "re", "im", "sqrt_mstar", "beta_half"],
                &scatter,
            )
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
    }

    // evolution: energy series with the certified exponential envelope
    let energy_json = read_json_value(&dir.join("evolve").join("energy_report.json"));
    if let Some(er) = &energy_json {
        let kappa = er["kappa"].as_f64().unwrap_or(f64::NAN);
        let pass = er["estimate"]["pass"].as_bool().unwrap_or(false);
        let drift = er["energy_drift_relative"].as_f64().unwrap_or(f64::NAN);
        all_ok &= pass;
        let _ = writeln!(
            s,
            "evolution: estimate {} (κ = {kappa:.6e}, relative drift {drift:.3e})",
            if pass { "pass" } else { "FAIL" }
        );
        if let Ok((_, rows)) = read_csv(&dir.join("evolve").join("trajectory.csv")) {
            if !rows.is_empty() {
                let e0 = rows[0][1].max(0.0).sqrt();
                let series: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|row| {
                        let t = row[0];
                        vec![t, row[1].max(0.0).sqrt(), (kappa * t).exp() * e0]
                    })
                    .collect();
                let path = report_dir.join("energy_envelope.csv");
                rotostar::io::write_csv(&path, &["t", "sqrt_e", "envelope"], &series)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            }
        }
    }

    // stability outcomes
    if let Some(st) = read_json_value(&dir.join("stability.json")) {
        let pd1 = st["pd1_pass"].as_bool().unwrap_or(false);
        all_ok &= pd1;
        let _ = writeln!(
            s,
            "stability: PD.1 {} (min quotient {:.3e})",
            if pd1 { "pass" } else { "FAIL" },
            st["pd1_min_quotient"].as_f64().unwrap_or(f64::NAN)
        );
        if let Some(pd2s) = st["pd2_results"].as_array() {
            for r in pd2s {
                let pass = r["pass"].as_bool().unwrap_or(false);
                all_ok &= pass;
                let _ = writeln!(
                    s,
                    "  PD.2[{}]: {} (quotient {:.6e} vs claim {:.6e})",
                    r["seminorm"].as_str().unwrap_or("?"),
                    if pass { "pass" } else { "FAIL" },
                    r["min_quotient"].as_f64().unwrap_or(f64::NAN),
                    r["delta_claim"].as_f64().unwrap_or(f64::NAN),
                );
            }
        }
        let _ = writeln!(
            s,
            "  constants: δ* = {:.9}, μ₀ = {:.6e}, μ₁ = {:.6e}",
            st["delta_star"].as_f64().unwrap_or(f64::NAN),
            st["mu0"].as_f64().unwrap_or(f64::NAN),
            st["mu1"].as_f64().unwrap_or(f64::NAN),
        );
    }
    if let Some(q1) = read_json_value(&dir.join("q1.json")) {
        let pass = q1["all_pass"].as_bool().unwrap_or(false);
        all_ok &= pass;
        let _ = writeln!(s, "degree-one positivity: {}", if pass { "pass" } else { "FAIL" });
    }

    // k* table: overall values per γ (reported, never asserted against one)
    if let Ok((_, rows)) = read_csv(&dir.join("kstar.csv")) {
        let overall: Vec<Vec<f64>> = rows
            .iter()
            .filter(|r| r.len() >= 5 && r[2] == -1.0)
            .map(|r| vec![r[0], r[3], r[4]])
            .collect();
        for row in &overall {
            let _ = writeln!(s, "k*(γ = {}): {:.9} (nondimensional {:.9})", row[0], row[1], row[2]);
        }
        if !overall.is_empty() {
            let path = report_dir.join("kstar_vs_gamma.csv");
            rotostar::io::write_csv(&path, &["gamma", "k_star", "k_star_nondim"], &overall)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
    }

    if s.is_empty() {
        let _ = writeln!(s, "no artifacts found");
    }
    let _ = writeln!(s, "overall: {}", if all_ok { "PASS" } else { "FAIL" });
    let summary_path = report_dir.join("summary.txt");
    std::fs::write(&summary_path, &s)
        .map_err(|e| CliError::Io(format!("{}: {e}", summary_path.display())))?;
    Ok((s, all_ok))
}
