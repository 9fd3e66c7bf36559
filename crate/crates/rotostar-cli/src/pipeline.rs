//! Scenario execution: build the equilibrium, assemble operators, and run the
//! requested analyses in dependency order, persisting every artifact through
//! the manifest log.

use crate::config::{NumericsConfig, ScenarioConfig, Task};
use crate::error::CliError;
use crate::manifest::ArtifactLog;
use ndarray::Array1;
use num_complex::Complex64 as c64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rotostar::evolution::{
    check_energy_estimate, conserved_energy_check, integrate, save_trajectory, Scheme,
};
use rotostar::io::write_csv;
use rotostar::operators::{
    assemble_axisym_set, compute_bounds, save_operator_set, AxisymOptions, DiscreteOperatorSet,
};
use rotostar::pencil::{check_inclusion_s, check_ir_symmetry, compute_spectrum, save_spectrum};
use rotostar::polytrope::{
    build_b_function, solve_distorted, solve_lane_emden, DistortedOptions, PolytropicIndex,
    RotationProfile,
};
use rotostar::stability::{
    build_stability_report, check_q1_positivity, compute_k_star, save_kstar_csv, save_report,
    KStarResult,
};
use rotostar::stellar_model::{
    build_eos, build_rotating_model, build_spherical_model, check_admissible, length_scale,
    save_model, EquationOfState, StellarModel,
};
use serde_json::json;
use std::path::{Path, PathBuf};

/// Build the equation of state described by the config.
fn make_eos(cfg: &ScenarioConfig, gamma: f64) -> Result<EquationOfState, CliError> {
    build_eos(
        cfg.eos.a_const,
        gamma,
        cfg.eos.c_v,
        cfg.eos.sigma.clone(),
    )
    .map_err(|e| CliError::Task(format!("equation of state: {e}")))
}

/// Build the background model: spherical for zero rotation, otherwise through
/// the distorted equilibrium solver.
fn make_model(cfg: &ScenarioConfig) -> Result<StellarModel, CliError> {
    let eos = make_eos(cfg, cfg.eos.gamma)?;
    if cfg.star.rotation.is_zero() {
        return build_spherical_model(&eos, cfg.star.rho_o, cfg.star.g_const, cfg.numerics.nr)
            .map_err(|e| CliError::Task(format!("spherical equilibrium: {e}")));
    }
    let rot = RotationProfile {
        omega: cfg.star.rotation.omega,
        omega_b: cfg.star.rotation.differential.clone(),
        b_amplitude_norm: 0.0,
    };
    let index = PolytropicIndex::from_gamma(cfg.eos.gamma)
        .map_err(|e| CliError::Task(format!("polytropic index: {e}")))?;
    let sph = solve_lane_emden(index, cfg.numerics.tol.min(1e-10))
        .map_err(|e| CliError::Task(format!("spherical profile: {e}")))?;
    let upsilon_o = eos.f_upsilon(cfg.star.rho_o);
    let a_scale = length_scale(upsilon_o, cfg.star.rho_o, cfg.star.g_const);
    let b = build_b_function(&rot, upsilon_o, a_scale, 4.0 * sph.xi1, 256, None)
        .map_err(|e| CliError::Task(format!("centrifugal function: {e}")))?;
    let opts = DistortedOptions {
        nxi: cfg.numerics.distorted_nxi,
        nzeta: cfg.numerics.distorted_nzeta,
        tol: cfg.numerics.tol.max(1e-12),
        ..DistortedOptions::default()
    };
    let lambda2 = eos.lambda2_closure(cfg.star.rho_o, upsilon_o);
    let sol = solve_distorted(
        index,
        &b,
        lambda2.as_ref().map(|f| f as &dyn Fn(f64) -> f64),
        upsilon_o,
        &opts,
    )
    .map_err(|e| CliError::Task(format!("distorted equilibrium: {e}")))?;
    build_rotating_model(&eos, cfg.star.rho_o, cfg.star.g_const, rot, &sol)
        .map_err(|e| CliError::Task(format!("rotating equilibrium: {e}")))
}

fn write_artifact_csv(
    log: &mut ArtifactLog,
    path: &Path,
    columns: &[&str],
    rows: &[Vec<f64>],
) -> Result<(), CliError> {
    write_csv(path, columns, rows).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    log.record(path);
    Ok(())
}

fn write_artifact_json<T: serde::Serialize>(
    log: &mut ArtifactLog,
    path: &Path,
    value: &T,
) -> Result<(), CliError> {
    rotostar::io::write_json(path, value)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    log.record(path);
    Ok(())
}

fn sector_dir(root: &Path, group: &str, m: i32) -> PathBuf {
    root.join(group).join(format!("m{m}"))
}

/// Equilibrium task: persist the model, its admissibility report, and
/// plot-ready profile/boundary series.
fn run_equilibrium(
    model: &StellarModel,
    log: &mut ArtifactLog,
) -> Result<serde_json::Value, CliError> {
    let model_dir = log.root().join("model");
    save_model(model, &model_dir).map_err(|e| CliError::Io(format!("save model: {e}")))?;
    log.record_dir(&model_dir)
        .map_err(|e| CliError::Io(format!("scan model dir: {e}")))?;

    let adm = check_admissible(model);
    write_artifact_json(log, &log.root().join("admissibility.json"), &adm)?;

    // enthalpy-profile series θ(r, ζ) along a few rays
    let zetas: Vec<f64> = if model.is_spherical() {
        vec![0.0]
    } else {
        (0..9).map(|k| -1.0 + 0.25 * k as f64).collect()
    };
    let mut rows = Vec::new();
    for &z in &zetas {
        let rb = model.boundary_at(z);
        let np = 200;
        for k in 0..=np {
            let r = rb * k as f64 / np as f64;
            rows.push(vec![z, r, model.theta_at(r, z)]);
        }
    }
    write_artifact_csv(
        log,
        &log.root().join("theta_profile.csv"),
        &["zeta", "r", "theta"],
        &rows,
    )?;

    // boundary curve r_b(ζ)
    let nb = 64;
    let mut brows = Vec::with_capacity(nb + 1);
    for k in 0..=nb {
        let z = -1.0 + 2.0 * k as f64 / nb as f64;
        brows.push(vec![z, model.boundary_at(z)]);
    }
    write_artifact_csv(
        log,
        &log.root().join("boundary.csv"),
        &["zeta", "r_boundary"],
        &brows,
    )?;
    Ok(json!({ "admissible": adm.all_pass }))
}

/// Assemble the operator sets for the requested wavenumbers, optionally in
/// parallel, and persist them with their bound constants.
fn build_operator_sets(
    model: &StellarModel,
    num: &NumericsConfig,
    jobs: usize,
    log: &mut ArtifactLog,
) -> Result<Vec<(i32, DiscreteOperatorSet)>, CliError> {
    let opts = AxisymOptions {
        ns: num.ns,
        nzeta: num.nzeta,
        ..AxisymOptions::default()
    };
    let ms = num.m_values.clone();
    let mut sets: Vec<(i32, DiscreteOperatorSet)> = Vec::with_capacity(ms.len());
    if jobs > 1 && ms.len() > 1 {
        let results: Vec<_> = std::thread::scope(|scope| {
            let handles: Vec<_> = ms
                .iter()
                .map(|&m| {
                    let opts = opts.clone();
                    scope.spawn(move || assemble_axisym_set(model, m, &opts))
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for (&m, res) in ms.iter().zip(results) {
            let set = res.map_err(|e| CliError::Task(format!("operators m={m}: {e}")))?;
            sets.push((m, set));
        }
    } else {
        for &m in &ms {
            let set = assemble_axisym_set(model, m, &opts)
                .map_err(|e| CliError::Task(format!("operators m={m}: {e}")))?;
            sets.push((m, set));
        }
    }
    for (m, set) in &sets {
        let dir = sector_dir(log.root(), "operators", *m);
        save_operator_set(set, &dir).map_err(|e| CliError::Io(format!("save operators: {e}")))?;
        log.record_dir(&dir)
            .map_err(|e| CliError::Io(format!("scan operator dir: {e}")))?;
        let bounds = compute_bounds(model, set)
            .map_err(|e| CliError::Task(format!("bound constants m={m}: {e}")))?;
        write_artifact_json(log, &dir.join("bounds.json"), &bounds)?;
    }
    Ok(sets)
}

fn run_spectrum(
    sets: &[(i32, DiscreteOperatorSet)],
    log: &mut ArtifactLog,
) -> Result<serde_json::Value, CliError> {
    let mut summaries = Vec::new();
    for (m, set) in sets {
        let spec = compute_spectrum(set, false)
            .map_err(|e| CliError::Task(format!("spectrum m={m}: {e}")))?;
        let symmetry = check_ir_symmetry(&spec, 1e-8);
        let inclusion = check_inclusion_s(&spec, spec.m_star, spec.beta, 1e-8);
        let dir = sector_dir(log.root(), "spectrum", *m);
        save_spectrum(&spec, Some(&symmetry), Some(&inclusion), &dir)
            .map_err(|e| CliError::Io(format!("save spectrum: {e}")))?;
        log.record_dir(&dir)
            .map_err(|e| CliError::Io(format!("scan spectrum dir: {e}")))?;
        summaries.push(json!({
            "m": m,
            "symmetry_pass": symmetry.pass,
            "inclusion_pass": inclusion.pass,
        }));
    }
    Ok(json!(summaries))
}

/// Evolve task: free oscillation from a seeded random initial state in the
/// first requested sector, with the certified energy-estimate check.
fn run_evolve(
    model: &StellarModel,
    sets: &[(i32, DiscreteOperatorSet)],
    num: &NumericsConfig,
    seed: u64,
    log: &mut ArtifactLog,
) -> Result<serde_json::Value, CliError> {
    let (m, set) = &sets[0];
    let bounds = compute_bounds(model, set)
        .map_err(|e| CliError::Task(format!("bound constants: {e}")))?;
    let n = set.ndof();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        Array1::from_iter(
            (0..n).map(|_| c64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)),
        )
    };
    let xi0 = draw(&mut rng);
    let v0 = draw(&mut rng);
    let zero = move |_t: f64| Array1::<c64>::zeros(n);
    let traj = integrate(
        set,
        &bounds,
        &xi0,
        &v0,
        &zero,
        num.dt,
        num.t_end,
        Scheme::ImplicitMidpoint,
    )
    .map_err(|e| CliError::Task(format!("time integration: {e}")))?;
    let dir = log.root().join("evolve");
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("evolve dir: {e}")))?;
    let traj_path = dir.join("trajectory.csv");
    save_trajectory(set, &traj, &traj_path)
        .map_err(|e| CliError::Io(format!("save trajectory: {e}")))?;
    log.record(&traj_path);
    let estimate = check_energy_estimate(&traj, &bounds);
    let drift = conserved_energy_check(&traj)
        .map_err(|e| CliError::Task(format!("energy drift: {e}")))?;
    let report = json!({
        "m": m,
        "scheme": "implicit_midpoint",
        "dt": num.dt,
        "t_end": num.t_end,
        "kappa": estimate.kappa,
        "estimate": estimate,
        "energy_drift_relative": drift,
    });
    write_artifact_json(log, &dir.join("energy_report.json"), &report)?;
    Ok(json!({
        "estimate_pass": estimate.pass,
        "energy_drift_relative": drift,
    }))
}

/// Stability task: the seminorm report for the m = 0 sector plus the
/// extrapolated degree-one potential positivity check on seeded sources.
fn run_stability(
    model: &StellarModel,
    sets: &[(i32, DiscreteOperatorSet)],
    num: &NumericsConfig,
    seed: u64,
    log: &mut ArtifactLog,
) -> Result<serde_json::Value, CliError> {
    let set = sets
        .iter()
        .find(|(m, _)| *m == 0)
        .map(|(_, s)| s)
        .ok_or_else(|| CliError::Task("stability needs the m = 0 operator set".into()))?;
    let report = build_stability_report(model, set, num.lmax, num.kstar_nr)
        .map_err(|e| CliError::Task(format!("stability report: {e}")))?;
    let path = log.root().join("stability.json");
    save_report(&report, &path).map_err(|e| CliError::Io(format!("save stability: {e}")))?;
    log.record(&path);

    // seeded compactly supported degree-one sources on the stellar interval
    let rb = model.r_boundary;
    let nr_grid = 200;
    let r: Vec<f64> = (0..=nr_grid).map(|k| rb * k as f64 / nr_grid as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51ab);
    let mut samples = Vec::new();
    for _ in 0..6 {
        let c = rb * (0.25 + 0.5 * rng.gen::<f64>());
        let w = rb * (0.08 + 0.12 * rng.gen::<f64>());
        let amp = 2.0 * rng.gen::<f64>() - 1.0;
        let bump = |rv: f64| {
            let x = (rv - c) / w;
            if x.abs() < 1.0 {
                amp * (1.0 - x * x).powi(2)
            } else {
                0.0
            }
        };
        samples.push(r.iter().map(|&rv| bump(rv)).collect::<Vec<f64>>());
    }
    let s_values = [2.0 * rb, 4.0 * rb, num.r_infinity * rb];
    let q1 = check_q1_positivity(model, &samples, &r, &s_values, 4000)
        .map_err(|e| CliError::Task(format!("degree-one positivity: {e}")))?;
    write_artifact_json(log, &log.root().join("q1.json"), &q1)?;
    Ok(json!({
        "pd1_pass": report.pd1_pass,
        "pd2_pass": report.pd2_results.iter().all(|r| r.pass),
        "q1_pass": q1.all_pass,
    }))
}

/// k* sweep over the configured γ values on spherical backgrounds.
fn run_kstar(
    cfg: &ScenarioConfig,
    log: &mut ArtifactLog,
) -> Result<serde_json::Value, CliError> {
    let num = &cfg.numerics;
    let mut results: Vec<KStarResult> = Vec::new();
    for &gamma in &num.kstar_gammas {
        let eos = make_eos(cfg, gamma)?;
        let model = build_spherical_model(&eos, cfg.star.rho_o, cfg.star.g_const, num.nr)
            .map_err(|e| CliError::Task(format!("spherical equilibrium γ={gamma}: {e}")))?;
        let res = compute_k_star(&model, num.lmax, num.kstar_nr)
            .map_err(|e| CliError::Task(format!("k* sweep γ={gamma}: {e}")))?;
        results.push(res);
    }
    let csv = log.root().join("kstar.csv");
    save_kstar_csv(&results, &csv).map_err(|e| CliError::Io(format!("save k*: {e}")))?;
    log.record(&csv);
    write_artifact_json(log, &log.root().join("kstar.json"), &results)?;
    Ok(json!(results
        .iter()
        .map(|r| json!({ "gamma": r.gamma, "k_star": r.overall }))
        .collect::<Vec<_>>()))
}

/// Execute a scenario and return the artifact directory.
pub fn run_pipeline(
    cfg: &ScenarioConfig,
    out: &Path,
    seed: u64,
    jobs: usize,
) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out.display())))?;
    let mut log = ArtifactLog::new(out);
    let mut summary = serde_json::Map::new();

    let needs_model = cfg
        .tasks
        .iter()
        .any(|t| !matches!(t, Task::Kstar));
    let needs_operators = cfg
        .tasks
        .iter()
        .any(|t| matches!(t, Task::Spectrum | Task::Evolve | Task::Stability));

    let model = if needs_model {
        log::info!("building equilibrium model");
        Some(make_model(cfg)?)
    } else {
        None
    };
    let sets = if needs_operators {
        let model = model.as_ref().expect("operators imply a model");
        log::info!("assembling operator sets for m = {:?}", cfg.numerics.m_values);
        build_operator_sets(model, &cfg.numerics, jobs, &mut log)?
    } else {
        Vec::new()
    };

    // tasks in fixed dependency order, regardless of listing order
    let order = [
        Task::Equilibrium,
        Task::Spectrum,
        Task::Evolve,
        Task::Stability,
        Task::Kstar,
    ];
    for task in order {
        if !cfg.tasks.contains(&task) {
            continue;
        }
        log::info!("running task {}", task.name());
        let value = match task {
            Task::Equilibrium => run_equilibrium(model.as_ref().unwrap(), &mut log)?,
            Task::Spectrum => run_spectrum(&sets, &mut log)?,
            Task::Evolve => run_evolve(
                model.as_ref().unwrap(),
                &sets,
                &cfg.numerics,
                seed,
                &mut log,
            )?,
            Task::Stability => run_stability(
                model.as_ref().unwrap(),
                &sets,
                &cfg.numerics,
                seed,
                &mut log,
            )?,
            Task::Kstar => run_kstar(cfg, &mut log)?,
        };
        summary.insert(task.name().to_string(), value);
    }

    let summary_path = out.join("run_summary.json");
    let doc = json!({
        "version": 1,
        "seed": seed,
        "tasks": cfg.tasks.iter().map(|t| t.name()).collect::<Vec<_>>(),
        "results": serde_json::Value::Object(summary),
    });
    rotostar::io::write_json(&summary_path, &doc)
        .map_err(|e| CliError::Io(format!("run summary: {e}")))?;
    log.record(&summary_path);

    log.write_manifest(seed)
        .map_err(|e| CliError::Io(format!("manifest: {e}")))?;
    Ok(out.to_path_buf())
}
