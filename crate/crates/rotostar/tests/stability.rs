//! Stability-module checks: constants, seminorms, coercivity, and the k* sweep.

use ndarray::{Array1, Array2};
use ndarray_linalg::c64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rotostar::operators::{assemble_axisym_set, assemble_radial_ss, AxisymOptions, RadialVariant};
use rotostar::quad::{gauss_legendre, map_rule};
use rotostar::stability::*;
use rotostar::stellar_model::{build_eos, build_spherical_model, SigmaSpec, StellarModel};

const PI: f64 = std::f64::consts::PI;

fn spherical_isentropic(gamma: f64) -> StellarModel {
    let eos = build_eos(1.0, gamma, 1.0, SigmaSpec::Constant(0.0)).unwrap();
    build_spherical_model(&eos, 1.0, 1.0, 400).unwrap()
}

fn spherical_stratified(gamma: f64, c: f64) -> StellarModel {
    let eos = build_eos(1.0, gamma, 1.0, SigmaSpec::Polynomial(vec![0.0, -c])).unwrap();
    build_spherical_model(&eos, 1.0, 1.0, 400).unwrap()
}

fn bump(r: f64, center: f64, width: f64) -> f64 {
    let x = (r - center) / width;
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

/// compactly supported ℓ=0 channel with exactly zero trapezoid r²-moment
fn zero_mean_channel(r: &[f64], rng: &mut ChaCha8Rng, rb: f64) -> Vec<f64> {
    let c1 = rb * (0.2 + 0.2 * rng.gen::<f64>());
    let c2 = rb * (0.5 + 0.15 * rng.gen::<f64>());
    let w = rb * 0.12;
    let g1: Vec<f64> = r.iter().map(|&rv| bump(rv, c1, w)).collect();
    let g2: Vec<f64> = r.iter().map(|&rv| bump(rv, c2, w)).collect();
    let moment = |g: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 1..r.len() {
            acc += 0.5
                * (r[i] - r[i - 1])
                * (g[i] * r[i] * r[i] + g[i - 1] * r[i - 1] * r[i - 1]);
        }
        acc
    };
    let scale = moment(&g1) / moment(&g2);
    g1.iter().zip(&g2).map(|(a, b)| a - scale * b).collect()
}

#[test]
fn mu0_constant_density_matches_bessel_oracle() {
    // uniform ball: μ₀ = π²/(ρ_O R²), the first Dirichlet mode of j₀
    for (rho_o, rad) in [(1.0, 1.0), (2.5, 1.7)] {
        let oracle = PI * PI / (rho_o * rad * rad);
        let mu_a = mu0_weighted(&|_| rho_o, rad, 1200).unwrap();
        let mu_b = mu0_weighted(&|_| rho_o, rad, 2400).unwrap();
        assert!(
            (mu_b - oracle).abs() <= 1e-6 * oracle,
            "μ₀ {mu_b} vs oracle {oracle}"
        );
        assert!(
            (mu_a - mu_b).abs() <= 1e-6 * mu_b.abs(),
            "refinement moves μ₀ by {}",
            (mu_a - mu_b).abs() / mu_b
        );
    }
}

#[test]
fn mu0_positive_and_converged_on_polytrope() {
    let model = spherical_isentropic(5.0 / 3.0);
    let mu_a = mu0_estimate(&model, 2400).unwrap();
    let mu_b = mu0_estimate(&model, 4800).unwrap();
    assert!(mu_a > 0.0);
    assert!(
        (mu_a - mu_b).abs() <= 1e-6 * mu_b.abs(),
        "refinement moves μ₀ by {}",
        (mu_a - mu_b).abs() / mu_b
    );
}

#[test]
fn delta_star_coercivity_holds_for_both_radial_variants() {
    let model = spherical_isentropic(5.0 / 3.0);
    let ds = delta_star(&model).unwrap();
    assert!(ds > 0.0, "δ* = {ds}");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for variant in [RadialVariant::Standard, RadialVariant::RhoWeighted] {
        let set = assemble_radial_ss(&model, 40, variant).unwrap();
        let n = set.ndof();
        for _ in 0..50 {
            let y = Array1::from_iter(
                (0..n).map(|_| c64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)),
            );
            let q = set.quad_form(&set.l, &y).re;
            let m = set.mass_quad(&y);
            assert!(
                q >= ds * m - 1e-10 * q.abs().max(ds * m),
                "Q₀₀ {q} below δ*·mass {}",
                ds * m
            );
        }
    }
}

#[test]
fn seminorms_vanish_for_divergence_free_fields() {
    let model = spherical_isentropic(5.0 / 3.0);
    let rb = model.r_boundary;
    let n = 1200;
    let r: Vec<f64> = (0..=n).map(|k| rb * k as f64 / n as f64).collect();
    let ch = SeminormChannels {
        r_grid: r.clone(),
        g: vec![((0, 0), vec![0.0; n + 1]), ((2, 0), vec![0.0; n + 1])],
        ur00: None,
    };
    for kind in [SeminormKind::N1, SeminormKind::N10, SeminormKind::N2] {
        assert_eq!(seminorm_eval(kind, &ch, &model).unwrap(), 0.0);
    }
}

#[test]
fn pure_dipole_escapes_potential_seminorms_but_not_compressibility() {
    let model = spherical_isentropic(5.0 / 3.0);
    let rb = model.r_boundary;
    let n = 1200;
    let r: Vec<f64> = (0..=n).map(|k| rb * k as f64 / n as f64).collect();
    let g1: Vec<f64> = r.iter().map(|&rv| bump(rv, 0.4 * rb, 0.15 * rb)).collect();
    let ch = SeminormChannels {
        r_grid: r,
        g: vec![((1, 0), g1)],
        ur00: None,
    };
    assert_eq!(seminorm_eval(SeminormKind::N1, &ch, &model).unwrap(), 0.0);
    assert_eq!(seminorm_eval(SeminormKind::N10, &ch, &model).unwrap(), 0.0);
    assert!(seminorm_eval(SeminormKind::N2, &ch, &model).unwrap() > 0.0);
}

#[test]
fn seminorm_ordering_and_radial_identity() {
    let model = spherical_isentropic(5.0 / 3.0);
    let rb = model.r_boundary;
    let n = 1600;
    let r: Vec<f64> = (0..=n).map(|k| rb * k as f64 / n as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let g0 = zero_mean_channel(&r, &mut rng, rb);
        let g2: Vec<f64> = r
            .iter()
            .map(|&rv| rng.gen::<f64>() * 0.0 + bump(rv, 0.45 * rb, 0.2 * rb))
            .collect();
        let g3: Vec<f64> = r.iter().map(|&rv| bump(rv, 0.55 * rb, 0.18 * rb)).collect();
        // radial-velocity channel from the flux integral of g₀₀
        let mut moment = vec![0.0; r.len()];
        for i in 1..r.len() {
            moment[i] = moment[i - 1]
                + 0.5
                    * (r[i] - r[i - 1])
                    * (g0[i] * r[i] * r[i] + g0[i - 1] * r[i - 1] * r[i - 1]);
        }
        let ur00: Vec<f64> = r
            .iter()
            .zip(&moment)
            .map(|(&rv, &mv)| {
                let rho = model.rho_at(rv, 0.0);
                if rv > 0.0 && rv < rb && rho > 0.0 {
                    mv / (rho * rv * rv)
                } else {
                    0.0
                }
            })
            .collect();
        let ch = SeminormChannels {
            r_grid: r.clone(),
            g: vec![((0, 0), g0), ((2, 0), g2), ((3, 1), g3)],
            ur00: Some(ur00),
        };
        let n1 = seminorm_eval(SeminormKind::N1, &ch, &model).unwrap();
        let n10 = seminorm_eval(SeminormKind::N10, &ch, &model).unwrap();
        assert!(
            n1 >= n10 - 1e-12 * n1.max(n10),
            "ordering violated: n1={n1} n10={n10}"
        );
        assert!(ur00_identity_defect(&ch, &model).unwrap() <= 1e-8);
        // the axial/equatorial filter keeps even-ℓ m=0 channels only
        let filtered = axial_equatorial_filter(&ch);
        assert_eq!(filtered.g.len(), 2);
    }
}

#[test]
fn pd2_reduces_to_rayleigh_quotient_when_seminorm_is_the_norm() {
    let n = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut a = Array2::<c64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            a[[i, j]] = c64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        }
    }
    let l = {
        let at = a.t().mapv(|z| z.conj());
        at.dot(&a) // PSD
    };
    let eye = Array2::from_diag(&Array1::from_elem(n, c64::new(1.0, 0.0)));
    let res = check_pd2("norm", &l, &eye, 0.0, 1e-12).unwrap();
    assert!(res.pass);
    assert_eq!(res.rank, n);
    // oracle: smallest eigenvalue of L
    use ndarray_linalg::{Eigh, UPLO};
    let (vals, _) = l.eigh(UPLO::Lower).unwrap();
    let lmin = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!((res.min_quotient - lmin).abs() <= 1e-8 * lmin.abs().max(1.0));
    // degenerate seminorm rejected
    let zero = Array2::<c64>::zeros((n, n));
    assert!(matches!(
        check_pd2("zero", &l, &zero, 0.0, 1e-12),
        Err(StabilityError::DegenerateSeminorm)
    ));
    // rank-deficient seminorm: restriction still works
    let mut ndef = Array2::<c64>::zeros((n, n));
    for i in 0..n / 2 {
        ndef[[i, i]] = c64::new(1.0, 0.0);
    }
    let res2 = check_pd2("half", &l, &ndef, 0.0, 1e-12).unwrap();
    assert_eq!(res2.rank, n / 2);
    assert!(res2.min_quotient >= lmin - 1e-10);
}

#[test]
fn potential_seminorm_coercivity_on_isentropic_sphere() {
    // (PD.2) with the claimed constant 4π·min(δ*, G) for the first seminorm,
    // and (PD.1) nonnegativity, on the discrete m=0 set
    let model = spherical_isentropic(5.0 / 3.0);
    let set = assemble_axisym_set(
        &model,
        0,
        &AxisymOptions {
            ns: 14,
            nzeta: 8,
            ..AxisymOptions::default()
        },
    )
    .unwrap();
    let (pd1_min, scale, pd1_pass) = check_pd1(&set).unwrap();
    assert!(pd1_pass, "PD.1 min quotient {pd1_min} (scale {scale})");

    let ds = delta_star(&model).unwrap();
    let (n1, n10, mu1) = potential_seminorm_grams(&set, &model, 160).unwrap();
    assert!(mu1 > 0.0);
    let delta_claim = 4.0 * PI * ds.min(model.g_const);
    let lscale = set.l.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let res = check_pd2("n1", &set.l, &n1, delta_claim, 1e-6 * lscale).unwrap();
    assert!(
        res.pass,
        "n1 coercivity min quotient {} below claim {delta_claim}",
        res.min_quotient
    );
    // Gram-level ordering n1 ≥ n10 on random vectors
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let nd = set.ndof();
    for _ in 0..100 {
        let u = Array1::from_iter(
            (0..nd).map(|_| c64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)),
        );
        let q1 = set.quad_form(&n1, &u).re;
        let q10 = set.quad_form(&n10, &u).re;
        assert!(
            q1 >= q10 - 1e-10 * q1.abs().max(q10.abs()).max(1e-300),
            "Gram ordering violated: {q1} vs {q10}"
        );
    }
}

#[test]
fn k_star_sweep_decays_and_nondimensional_path_agrees() {
    let model = spherical_isentropic(5.0 / 3.0);
    let res = compute_k_star(&model, 8, 100).unwrap();
    assert_eq!(res.per_ell.len(), 9);
    assert!(res.overall > 0.0);
    assert!(res.quotient_within_c, "k*={} C={}", res.overall, res.c_bound);
    for (a, b) in res.per_ell.iter().zip(&res.per_ell_nondim) {
        assert!(
            (a - b).abs() <= 1e-8 * a.abs().max(1e-300),
            "dimensional {a} vs nondimensional {b}"
        );
    }
    // tail decreasing by construction (TailNotDecaying would have fired)
    let n = res.per_ell.len();
    assert!(res.per_ell[n - 1] <= res.per_ell[n - 3] + 1e-12);
}

#[test]
fn surface_supported_sources_have_vanishing_quotient() {
    let model = spherical_isentropic(5.0 / 3.0);
    let rb = model.r_boundary;
    let (gx, gw) = gauss_legendre(400);
    let (r, w) = map_rule(&gx, &gw, 0.0, rb);
    let mut prev = f64::INFINITY;
    for &width in &[0.2, 0.1, 0.05, 0.025] {
        let g: Vec<f64> = r
            .iter()
            .map(|&rv| bump(rv, rb * (1.0 - 0.75 * width), rb * width * 0.5))
            .collect();
        let q = gravity_quotient(&model, &r, &w, &g, 2).unwrap();
        assert!(q >= 0.0 && q < prev, "quotient {q} not shrinking (prev {prev})");
        prev = q;
    }
    assert!(prev < 0.02, "boundary-layer quotient {prev} not small");
}

#[test]
fn entropy_gradient_condition_sign_and_fit() {
    // isentropic: passes at any ε
    let iso = spherical_isentropic(5.0 / 3.0);
    let rep = check_a_condition(&iso, 1e-9);
    assert!(rep.pass && rep.epsilon_fit == 0.0);

    // Σ(υ) = −cυ: passes, fitted ε proportional to c
    let m1 = spherical_stratified(5.0 / 3.0, 0.004);
    let m2 = spherical_stratified(5.0 / 3.0, 0.008);
    let r1 = check_a_condition(&m1, 1.0);
    let r2 = check_a_condition(&m2, 1.0);
    assert!(r1.pass, "fit {}", r1.epsilon_fit);
    assert!(r2.pass, "fit {}", r2.epsilon_fit);
    assert!(r1.epsilon_fit > 0.0);
    let ratio = r2.epsilon_fit / r1.epsilon_fit;
    assert!(
        (1.5..=2.6).contains(&ratio),
        "ε fit not ∝ c: ratio {ratio}"
    );

    // Σ(υ) = +cυ: the sign condition fails at interior nodes
    let eos = build_eos(1.0, 5.0 / 3.0, 1.0, SigmaSpec::Polynomial(vec![0.0, 0.004])).unwrap();
    let bad = build_spherical_model(&eos, 1.0, 1.0, 400).unwrap();
    let rb = check_a_condition(&bad, 1.0);
    assert!(!rb.sign_ok && !rb.pass);
    assert!(!rb.witnesses.is_empty());
}

#[test]
fn cowling_coercivity_bound_holds_at_discrete_level() {
    // stratified model satisfying the ε-condition at ε = 0.5
    let model = spherical_stratified(5.0 / 3.0, 0.01);
    let rep = check_a_condition(&model, 0.5);
    assert!(rep.pass, "ε-condition fit {}", rep.epsilon_fit);
    let set = assemble_axisym_set(
        &model,
        0,
        &AxisymOptions {
            ns: 12,
            nzeta: 8,
            cowling: true,
            ..AxisymOptions::default()
        },
    )
    .unwrap();
    let min_q = cowling_coercivity_min(&set, 100, 17).unwrap();
    assert!(
        min_q >= 1.0 - 0.5 - 1e-9,
        "Cowling quotient {min_q} below 1−ε"
    );
}

#[test]
fn q1_zero_mode_and_random_sources_are_nonnegative() {
    let model = spherical_isentropic(5.0 / 3.0);
    let rb = model.r_boundary;
    // w = dΥ/dr extension is the zero mode of the potential-form operator
    let q0 = q1_zero_mode(&model, 6000, 6.0 * rb).unwrap();
    let kconst = rb * rb * model.grad_upsilon(rb * (1.0 - 1e-9), 0.0).0.abs();
    let scale = kconst * kconst / rb.powi(3);
    assert!(q0.abs() <= 2e-3 * scale, "zero mode gives {q0} (scale {scale})");

    // random compactly supported dipole sources
    let n = 800;
    let r: Vec<f64> = (0..=n).map(|k| 0.9 * rb * k as f64 / n as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut samples = Vec::new();
    for _ in 0..10 {
        let c = rb * (0.2 + 0.4 * rng.gen::<f64>());
        let w = rb * (0.08 + 0.1 * rng.gen::<f64>());
        let amp = rng.gen::<f64>() - 0.5;
        samples.push(r.iter().map(|&rv| amp * bump(rv, c, w)).collect::<Vec<f64>>());
    }
    samples.push(vec![0.0; n + 1]); // trivial source → exactly zero
    let s_values = [2.0 * rb, 4.0 * rb, 8.0 * rb];
    let report = check_q1_positivity(&model, &samples, &r, &s_values, 4000).unwrap();
    assert!(report.all_pass);
    let trivial = report.samples.last().unwrap();
    assert_eq!(trivial.q1_extrapolated, 0.0);
}

#[test]
fn report_builds_and_serializes() {
    let model = spherical_isentropic(5.0 / 3.0);
    let set = assemble_axisym_set(
        &model,
        0,
        &AxisymOptions {
            ns: 10,
            nzeta: 6,
            ..AxisymOptions::default()
        },
    )
    .unwrap();
    let report = build_stability_report(&model, &set, 6, 80).unwrap();
    assert!(report.delta_star > 0.0);
    assert!(report.mu0 > 0.0);
    assert!(report.nu_star > 0.0);
    assert!((report.mu1 - report.mu0.min(4.0 / model.r_boundary.powi(2))).abs() < 1e-14);
    assert!(report.pd1_pass);
    assert!(report.pd2_results.iter().all(|p| p.pass));
    let dir = tempfile::tempdir().unwrap();
    save_report(&report, &dir.path().join("stability.json")).unwrap();
    let k1 = compute_k_star(&model, 6, 80).unwrap();
    let model2 = spherical_isentropic(1.4);
    let k2 = compute_k_star(&model2, 6, 80).unwrap();
    let csv = dir.path().join("kstar.csv");
    save_kstar_csv(&[k1, k2], &csv).unwrap();
    let (hdr, rows) = rotostar::io::read_csv(&csv).unwrap();
    assert_eq!(hdr, vec!["gamma", "lmax", "ell", "k_sup", "k_sup_nondim"]);
    assert_eq!(rows.len(), 2 * 8); // 7 degrees + overall row per γ
}
