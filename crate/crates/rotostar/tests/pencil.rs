//! Spectrum structure checks for the quadratic pencil.

use ndarray::{Array1, Array2};
use ndarray_linalg::{c64, Eig};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rotostar::operators::{
    assemble_axisym_set, AxisymOptions, DiscreteOperatorSet, OperatorMeta,
};
use rotostar::pencil::{
    check_inclusion_s, check_ir_symmetry, compute_spectrum, eigen_diagnostics,
    linearize_companion, quad_roots, real_axis_window, resolvent_probe, PencilError,
    PencilSpectrum,
};
use rotostar::polytrope::{
    build_b_function, solve_distorted, solve_lane_emden, DistortedOptions, PolytropicIndex,
    RotationProfile,
};
use rotostar::stellar_model::{
    build_eos, build_rotating_model, build_spherical_model, length_scale, SigmaSpec, StellarModel,
};

fn toy_set(m_diag: Vec<f64>, l: Array2<c64>, b: Array2<c64>) -> DiscreteOperatorSet {
    let n = m_diag.len();
    DiscreteOperatorSet {
        m_diag: Array1::from_vec(m_diag),
        l,
        b,
        g_seminorm: Array2::zeros((n, n)),
        r_nodes: vec![],
        zeta_nodes: vec![],
        meta: OperatorMeta {
            kind: "toy".into(),
            m: 0,
            cowling: false,
            ns: n,
            nzeta: 1,
            ndof: n,
            model_id: "toy".into(),
            gamma: 5.0 / 3.0,
            rho_o: 1.0,
            g_const: 1.0,
            omega: 0.0,
            variant: None,
        },
        data: None,
    }
}

fn random_herm(n: usize, rng: &mut ChaCha8Rng) -> Array2<c64> {
    let a = Array2::from_shape_fn((n, n), |_| {
        c64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    (&a + &a.t().mapv(|z| z.conj())).mapv(|z| z * 0.5)
}

fn random_skew(n: usize, rng: &mut ChaCha8Rng) -> Array2<c64> {
    let a = Array2::from_shape_fn((n, n), |_| {
        c64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    (&a - &a.t().mapv(|z| z.conj())).mapv(|z| z * 0.5)
}

/// determinant by Gaussian elimination with partial pivoting
fn det_c(mat: &Array2<c64>) -> c64 {
    let n = mat.nrows();
    let mut a = mat.clone();
    let mut d = c64::new(1.0, 0.0);
    for k in 0..n {
        let mut piv = k;
        for i in k + 1..n {
            if a[[i, k]].norm() > a[[piv, k]].norm() {
                piv = i;
            }
        }
        if a[[piv, k]].norm() == 0.0 {
            return c64::new(0.0, 0.0);
        }
        if piv != k {
            for j in 0..n {
                let t = a[[k, j]];
                a[[k, j]] = a[[piv, j]];
                a[[piv, j]] = t;
            }
            d = -d;
        }
        d *= a[[k, k]];
        for i in k + 1..n {
            let f = a[[i, k]] / a[[k, k]];
            for j in k..n {
                let akj = a[[k, j]];
                a[[i, j]] -= f * akj;
            }
        }
    }
    d
}

/// roots of det(λ²M + λB + L) by trigonometric coefficient recovery plus a
/// polynomial companion eigensolve — an oracle independent of the library's
/// whitened linearization
fn determinant_roots(set: &DiscreteOperatorSet) -> Vec<c64> {
    let n = set.ndof();
    let deg = 2 * n;
    let npts = deg + 1;
    let radius = 1.3;
    let vals: Vec<c64> = (0..npts)
        .map(|j| {
            let th = 2.0 * std::f64::consts::PI * j as f64 / npts as f64;
            let z = c64::new(radius * th.cos(), radius * th.sin());
            let mut p = set.l.clone() + set.b.mapv(|x| x * z);
            for i in 0..n {
                p[[i, i]] += z * z * set.m_diag[i];
            }
            det_c(&p)
        })
        .collect();
    // c_k = (1/(N r^k)) Σ_j vals_j e^{−2πijk/N}
    let mut coeff = vec![c64::new(0.0, 0.0); npts];
    for (k, ck) in coeff.iter_mut().enumerate() {
        let mut acc = c64::new(0.0, 0.0);
        for (j, &vj) in vals.iter().enumerate() {
            let th = -2.0 * std::f64::consts::PI * (j * k) as f64 / npts as f64;
            acc += vj * c64::new(th.cos(), th.sin());
        }
        *ck = acc / (npts as f64 * radius.powi(k as i32));
    }
    // monic companion matrix of the recovered polynomial
    let lead = coeff[deg];
    let mut comp = Array2::<c64>::zeros((deg, deg));
    for i in 1..deg {
        comp[[i, i - 1]] = c64::new(1.0, 0.0);
    }
    for i in 0..deg {
        comp[[i, deg - 1]] = -coeff[i] / lead;
    }
    let (ev, _) = comp.eig().unwrap();
    ev.to_vec()
}

fn assert_multiset_close(a: &[c64], b: &[c64], tol: f64) {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    for &x in a {
        let mut best = f64::INFINITY;
        let mut bj = usize::MAX;
        for (j, &y) in b.iter().enumerate() {
            if !used[j] && (x - y).norm() < best {
                best = (x - y).norm();
                bj = j;
            }
        }
        assert!(
            best <= tol * x.norm().max(1.0),
            "no partner for {x} (closest at distance {best})"
        );
        used[bj] = true;
    }
}

fn spherical_isentropic(gamma: f64) -> StellarModel {
    let eos = build_eos(1.0, gamma, 1.0, SigmaSpec::Constant(0.0)).unwrap();
    build_spherical_model(&eos, 1.0, 1.0, 400).unwrap()
}

fn rotating_model(omega: f64) -> StellarModel {
    let gamma = 5.0 / 3.0;
    let index = PolytropicIndex::from_gamma(gamma).unwrap();
    let sph = solve_lane_emden(index, 1e-12).unwrap();
    let rot = RotationProfile::rigid(omega);
    let eos = build_eos(1.0, gamma, 1.0, SigmaSpec::Constant(0.0)).unwrap();
    let upsilon_o = eos.f_upsilon(1.0);
    let a_scale = length_scale(upsilon_o, 1.0, 1.0);
    let b = build_b_function(&rot, upsilon_o, a_scale, 4.0 * sph.xi1, 256, None).unwrap();
    let opts = DistortedOptions {
        nxi: 120,
        nzeta: 16,
        ..DistortedOptions::default()
    };
    let sol = solve_distorted(index, &b, None, upsilon_o, &opts).unwrap();
    build_rotating_model(&eos, 1.0, 1.0, rot, &sol).unwrap()
}

#[test]
fn unit_oscillators_have_imaginary_pairs() {
    let eye = Array2::from_diag(&Array1::from_vec(vec![c64::new(1.0, 0.0)]));
    let set = toy_set(vec![1.0], eye, Array2::zeros((1, 1)));
    let spec = compute_spectrum(&set, false).unwrap();
    assert_multiset_close(
        &spec.eigenvalues,
        &[c64::new(0.0, 1.0), c64::new(0.0, -1.0)],
        1e-12,
    );

    let l2 = Array2::from_diag(&Array1::from_vec(vec![
        c64::new(1.0, 0.0),
        c64::new(4.0, 0.0),
    ]));
    let set2 = toy_set(vec![1.0, 1.0], l2, Array2::zeros((2, 2)));
    let spec2 = compute_spectrum(&set2, false).unwrap();
    assert_multiset_close(
        &spec2.eigenvalues,
        &[
            c64::new(0.0, 1.0),
            c64::new(0.0, -1.0),
            c64::new(0.0, 2.0),
            c64::new(0.0, -2.0),
        ],
        1e-12,
    );
}

#[test]
fn companion_matches_determinant_oracle() {
    for (n, seed) in [(3usize, 11u64), (4, 12), (6, 13)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = random_herm(n, &mut rng);
        let b = random_skew(n, &mut rng);
        let m: Vec<f64> = (0..n).map(|_| 0.5 + rng.gen::<f64>()).collect();
        let set = toy_set(m, l, b);
        let spec = compute_spectrum(&set, false).unwrap();
        let oracle = determinant_roots(&set);
        assert_multiset_close(&spec.eigenvalues, &oracle, 1e-8);
    }
}

#[test]
fn singular_mass_is_rejected() {
    let eye = Array2::from_diag(&Array1::from_vec(vec![c64::new(1.0, 0.0)]));
    let set = toy_set(vec![0.0], eye, Array2::zeros((1, 1)));
    assert!(matches!(
        linearize_companion(&set),
        Err(PencilError::SingularMass(_))
    ));
}

#[test]
fn spherical_spectrum_factorizes_through_generalized_eigenvalues() {
    let model = spherical_isentropic(5.0 / 3.0);
    let opts = AxisymOptions {
        ns: 10,
        nzeta: 6,
        ..AxisymOptions::default()
    };
    let set = assemble_axisym_set(&model, 2, &opts).unwrap();
    let spec = compute_spectrum(&set, false).unwrap();
    // {λ²} must equal {−μ} over the hermitian (M,L) eigenvalues
    use ndarray_linalg::{Eigh, UPLO};
    let mut wl = set.whitened(&set.l);
    let wlh = wl.t().mapv(|z| z.conj());
    wl = (&wl + &wlh).mapv(|z| z * 0.5);
    let (mu, _) = wl.eigh(UPLO::Lower).unwrap();
    let mut lam_sq: Vec<c64> = spec.eigenvalues.iter().map(|&z| z * z).collect();
    let mut neg_mu: Vec<c64> = mu.iter().flat_map(|&m| [c64::new(-m, 0.0); 2]).collect();
    // compare as sorted real values (all λ² are real here)
    lam_sq.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
    neg_mu.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
    let scale = mu.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
    for (ls, nm) in lam_sq.iter().zip(neg_mu.iter()) {
        assert!(
            (ls - nm).norm() <= 1e-8 * scale,
            "λ² = {ls} vs −μ = {nm}"
        );
    }
    // B = 0: the whole spectrum lies on iℝ ∪ ℝ and is symmetric
    let sym = check_ir_symmetry(&spec, 1e-10);
    assert!(sym.pass, "defect {}", sym.defect);
}

#[test]
fn toroidal_kernel_mode_gives_zero_eigenvalue() {
    let model = spherical_isentropic(5.0 / 3.0);
    let opts = AxisymOptions {
        ns: 10,
        nzeta: 6,
        ..AxisymOptions::default()
    };
    let set = assemble_axisym_set(&model, 0, &opts).unwrap();
    let spec = compute_spectrum(&set, false).unwrap();
    let radius = spec.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let nearest_zero = spec
        .eigenvalues
        .iter()
        .map(|z| z.norm())
        .fold(f64::INFINITY, f64::min);
    assert!(
        nearest_zero <= 1e-8 * radius.max(1.0),
        "no eigenvalue near 0 (closest {nearest_zero})"
    );
}

#[test]
fn rotating_spectrum_symmetry_and_inclusion() {
    let model = rotating_model(0.05);
    let opts = AxisymOptions {
        ns: 8,
        nzeta: 6,
        ..AxisymOptions::default()
    };
    for m in [0i32, 1, 2] {
        let set = assemble_axisym_set(&model, m, &opts).unwrap();
        let spec = compute_spectrum(&set, false).unwrap();
        let radius = spec.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let sym = check_ir_symmetry(&spec, 1e-8 * radius);
        assert!(sym.pass, "m={m}: symmetry defect {}", sym.defect);
        let inc = check_inclusion_s(&spec, spec.m_star, spec.beta, 1e-8 * radius.max(1.0));
        assert!(
            inc.pass,
            "m={m}: {} violators, worst excess {}",
            inc.violators.len(),
            inc.worst_excess
        );
        // no eigenvalue beyond the real-axis window
        let a_win = real_axis_window(spec.m_star, spec.beta);
        for &lam in &spec.eigenvalues {
            assert!(lam.re.abs() <= a_win + 1e-8 * radius.max(1.0));
        }
    }
}

#[test]
fn symmetry_defect_detects_injected_perturbation() {
    // symmetric toy spectrum with one eigenvalue pushed off the axis
    let delta = 1e-3;
    let mut eigs = vec![
        c64::new(0.0, 1.0),
        c64::new(0.0, -1.0),
        c64::new(0.0, 2.0),
        c64::new(0.0, -2.0),
    ];
    eigs[0] += c64::new(delta, 0.0);
    let spec = PencilSpectrum {
        eigenvalues: eigs,
        eigenvectors: None,
        diagnostics: vec![],
        m_star: 0.0,
        beta: 0.0,
        linearization: "toy".into(),
    };
    let rep = check_ir_symmetry(&spec, 1e-8);
    // the perturbed value pairs with its own mirror at distance 2δ
    assert!(
        (rep.defect - 2.0 * delta).abs() <= 1e-12,
        "defect {} vs injected 2δ = {}",
        rep.defect,
        2.0 * delta
    );
    assert!(!rep.pass);
}

#[test]
fn inclusion_classifies_indefinite_instances() {
    // L with one negative eigenvalue → real pair ±√μ inside the window
    let l = Array2::from_diag(&Array1::from_vec(vec![
        c64::new(-2.25, 0.0),
        c64::new(1.0, 0.0),
    ]));
    let set = toy_set(vec![1.0, 1.0], l, Array2::zeros((2, 2)));
    let spec = compute_spectrum(&set, false).unwrap();
    assert!((spec.m_star - 2.25).abs() <= 1e-12);
    assert_multiset_close(
        &spec.eigenvalues,
        &[
            c64::new(1.5, 0.0),
            c64::new(-1.5, 0.0),
            c64::new(0.0, 1.0),
            c64::new(0.0, -1.0),
        ],
        1e-10,
    );
    let inc = check_inclusion_s(&spec, spec.m_star, spec.beta, 1e-8);
    assert!(inc.pass);

    // rotating indefinite 6×6 instance: zero violators at tol = 1e−8·radius
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut lr = random_herm(6, &mut rng);
    lr[[0, 0]] -= c64::new(3.0, 0.0);
    let br = random_skew(6, &mut rng);
    let set6 = toy_set(vec![1.0; 6], lr, br);
    let spec6 = compute_spectrum(&set6, false).unwrap();
    let radius = spec6.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let inc6 = check_inclusion_s(&spec6, spec6.m_star, spec6.beta, 1e-8 * radius);
    assert!(
        inc6.pass,
        "violators: {:?} (m*={}, β={})",
        inc6.violators, spec6.m_star, spec6.beta
    );
}

#[test]
fn eigen_diagnostics_quadratic_identity() {
    let model = rotating_model(0.05);
    let opts = AxisymOptions {
        ns: 8,
        nzeta: 6,
        ..AxisymOptions::default()
    };
    let set = assemble_axisym_set(&model, 1, &opts).unwrap();
    let spec = compute_spectrum(&set, true).unwrap();
    let vecs = spec.eigenvectors.as_ref().unwrap();
    let radius = spec.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for (k, &lam) in spec.eigenvalues.iter().enumerate() {
        let d = &spec.diagnostics[k];
        assert!(d.a > 0.0);
        assert!(d.b_imag.abs() <= 1e-10 * d.b.abs() + 1e-11);
        assert!(d.c_imag.abs() <= 1e-10 * d.c.abs() + 1e-11);
        let scale = (d.a * lam.norm_sqr()).max(d.c.abs()).max(1.0);
        assert!(
            d.quad_residual <= 1e-9 * scale,
            "k={k}: quad residual {} at λ={lam}",
            d.quad_residual
        );
        // λ coincides with one root of the scalar quadratic
        let (r1, r2) = quad_roots(d.a, d.b, d.c);
        let dr = (lam - r1).norm().min((lam - r2).norm());
        assert!(dr <= 1e-8 * radius.max(1.0), "k={k}: root distance {dr}");
        // re-deriving through the public entry point agrees
        let xi = vecs.column(k).to_owned();
        let d2 = eigen_diagnostics(&set, lam, &xi, 1e-6).unwrap();
        assert!((d2.b - d.b).abs() <= 1e-9 * d.b.abs().max(1.0));
    }
    // a garbage vector is rejected
    let n = set.ndof();
    let junk = Array1::from_elem(n, c64::new(1.0, 0.3));
    assert!(matches!(
        eigen_diagnostics(&set, c64::new(0.1, 0.7), &junk, 1e-6),
        Err(PencilError::NotAnEigenpair { .. })
    ));
}

#[test]
fn diagnostics_b_zero_reduces_to_sqrt_c() {
    let model = spherical_isentropic(5.0 / 3.0);
    let opts = AxisymOptions {
        ns: 8,
        nzeta: 6,
        ..AxisymOptions::default()
    };
    let set = assemble_axisym_set(&model, 2, &opts).unwrap();
    let spec = compute_spectrum(&set, true).unwrap();
    let scale = spec
        .diagnostics
        .iter()
        .map(|d| d.c.abs())
        .fold(0.0f64, f64::max);
    for (k, &lam) in spec.eigenvalues.iter().enumerate() {
        let d = &spec.diagnostics[k];
        assert!(d.b.abs() <= 1e-12 * d.c.abs().max(1.0));
        // λ² = −c (squared form avoids the ill-conditioned √ near zero)
        assert!(
            (lam * lam + c64::new(d.c, 0.0)).norm() <= 1e-8 * scale,
            "k={k}: λ² = {} vs −c = {}",
            lam * lam,
            -d.c
        );
    }
}

#[test]
fn resolvent_probes_respect_distance_bound() {
    let model = rotating_model(0.05);
    let opts = AxisymOptions {
        ns: 8,
        nzeta: 6,
        ..AxisymOptions::default()
    };
    let set = assemble_axisym_set(&model, 1, &opts).unwrap();
    let spec = compute_spectrum(&set, false).unwrap();
    let radius = spec.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);

    // at a computed eigenvalue the pencil is singular
    let at_eig = resolvent_probe(&set, &spec, &[spec.eigenvalues[3]]).unwrap();
    assert!(at_eig[0].sigma_min <= 1e-8 * radius.max(1.0) * radius.max(1.0));

    // beyond the real-axis window the resolvent is finite
    let a_win = real_axis_window(spec.m_star, spec.beta);
    let beyond = resolvent_probe(&set, &spec, &[c64::new(1.5 * a_win + 1.0, 0.0)]).unwrap();
    assert!(beyond[0].sigma_min > 0.0 && beyond[0].dist > 0.0);

    // random probes: σ_min ≤ d(2|λ|+β+d) at every point
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let probes: Vec<c64> = (0..10)
        .map(|_| {
            c64::new(
                (rng.gen::<f64>() - 0.5) * 4.0 * radius.max(1.0),
                (rng.gen::<f64>() - 0.5) * 4.0 * radius.max(1.0),
            )
        })
        .collect();
    for p in resolvent_probe(&set, &spec, &probes).unwrap() {
        assert!(
            p.bound_holds,
            "σ_min {} exceeds bound {} at λ = {}+{}i",
            p.sigma_min, p.sigma_bound, p.lambda_re, p.lambda_im
        );
    }
}

#[test]
fn spectrum_serializes() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let set = toy_set(
        vec![1.0, 2.0, 0.5],
        random_herm(3, &mut rng),
        random_skew(3, &mut rng),
    );
    let spec = compute_spectrum(&set, true).unwrap();
    let sym = check_ir_symmetry(&spec, 1e-8);
    let inc = check_inclusion_s(&spec, spec.m_star, spec.beta, 1e-8);
    let dir = tempfile::tempdir().unwrap();
    rotostar::pencil::save_spectrum(&spec, Some(&sym), Some(&inc), dir.path()).unwrap();
    let (hdr, rows) = rotostar::io::read_csv(&dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(hdr[0], "re");
    assert_eq!(rows.len(), 6);
}
