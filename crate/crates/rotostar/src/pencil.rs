//! Quadratic eigenvalue pencil 𝔏(λ) = λ²M + λB + L: companion linearization,
//! spectrum computation, spectral-structure checks (imaginary-axis symmetry,
//! inclusion region), per-eigenpair scalar diagnostics, and resolvent probes.
//!
//! All dense work happens in the M-whitened frame x = M^{1/2}ξ, where the
//! pencil becomes λ²I + λB̃ + L̃ with B̃ skew-hermitian and L̃ hermitian; the
//! B = 0 case then reduces to a hermitian eigenproblem solved symmetrically.

use crate::io::{write_csv, write_json, IoError};
use crate::operators::DiscreteOperatorSet;
use ndarray::{Array1, Array2};
use ndarray_linalg::{c64, Eig, Eigh, SVD, UPLO};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PencilError {
    #[error("mass matrix not positive: {0}")]
    SingularMass(String),
    #[error("eigensolver failure: {0}")]
    EigensolverFailure(String),
    #[error("not an eigenpair: pencil residual {residual} exceeds tolerance {tol}")]
    NotAnEigenpair { residual: f64, tol: f64 },
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Scalar diagnostics of one eigenpair: ξᴴ(λ²M + λB + L)ξ = aλ² + ibλ + c
/// with a > 0 and b, c real for an M-normalized eigenvector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenDiagnostics {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// imaginary contamination of b and c (should be roundoff)
    pub b_imag: f64,
    pub c_imag: f64,
    /// |aλ² + ibλ + c|
    pub quad_residual: f64,
    /// ‖(λ²M+λB+L)ξ‖ in the M^{-1/2} metric, relative to the term sizes
    pub pencil_residual: f64,
}

pub struct PencilSpectrum {
    /// all 2n eigenvalues, sorted by (Re, Im)
    pub eigenvalues: Vec<c64>,
    /// M-normalized eigenvectors ξ⁰ as columns, aligned with `eigenvalues`
    pub eigenvectors: Option<Array2<c64>>,
    pub diagnostics: Vec<EigenDiagnostics>,
    pub m_star: f64,
    pub beta: f64,
    /// linearization recorded for provenance
    pub linearization: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub defect: f64,
    pub spectral_radius: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InclusionReport {
    pub violators: Vec<(f64, f64, f64)>,
    pub worst_excess: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolventProbe {
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub sigma_min: f64,
    pub inv_norm: f64,
    /// distance of λ to the computed spectrum
    pub dist: f64,
    /// the analytic upper bound d(2|λ|+β+d) on σ_min
    pub sigma_bound: f64,
    pub bound_holds: bool,
}

fn fro_norm(a: &Array2<c64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn check_mass(set: &DiscreteOperatorSet) -> Result<(), PencilError> {
    for (i, &m) in set.m_diag.iter().enumerate() {
        if !(m > 0.0) || !m.is_finite() {
            return Err(PencilError::SingularMass(format!(
                "diagonal entry {i} is {m}"
            )));
        }
    }
    Ok(())
}

/// Whitened first-order companion pair: the block matrix A with
/// A[x; y] = λ[x; y] equivalent to (λ²I + λB̃ + L̃)x = 0, i.e. the matrix of
/// −𝐀 for the evolution block form U' + 𝐀U = 0.
pub fn linearize_companion(
    set: &DiscreteOperatorSet,
) -> Result<(Array2<c64>, String), PencilError> {
    check_mass(set)?;
    let n = set.ndof();
    let lw = set.whitened(&set.l);
    let bw = set.whitened(&set.b);
    let mut a = Array2::<c64>::zeros((2 * n, 2 * n));
    for i in 0..n {
        a[[i, n + i]] = c64::new(1.0, 0.0);
        for j in 0..n {
            a[[n + i, j]] = -lw[[i, j]];
            a[[n + i, n + j]] = -bw[[i, j]];
        }
    }
    Ok((a, "whitened-companion".to_string()))
}

fn whitened_constants(set: &DiscreteOperatorSet) -> Result<(f64, f64), PencilError> {
    let beta = if fro_norm(&set.b) == 0.0 {
        0.0
    } else {
        let bw = set.whitened(&set.b);
        let (_, sv, _) = bw
            .svd(false, false)
            .map_err(|e| PencilError::EigensolverFailure(e.to_string()))?;
        sv.iter().cloned().fold(0.0, f64::max)
    };
    let lw = set.whitened(&set.l);
    let lh = (&lw + &lw.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
    let (vals, _) = lh
        .eigh(UPLO::Lower)
        .map_err(|e| PencilError::EigensolverFailure(e.to_string()))?;
    let min_eig = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(((-min_eig).max(0.0), beta))
}

fn sort_pairs(vals: &mut Vec<c64>, vecs: &mut Option<Vec<Array1<c64>>>) {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| {
        (vals[a].re, vals[a].im)
            .partial_cmp(&(vals[b].re, vals[b].im))
            .unwrap()
    });
    *vals = order.iter().map(|&k| vals[k]).collect();
    if let Some(v) = vecs {
        *v = order.iter().map(|&k| v[k].clone()).collect();
    }
}

fn diagnostics_of(
    set: &DiscreteOperatorSet,
    lam: c64,
    xi: &Array1<c64>,
    lw: &Array2<c64>,
    bw: &Array2<c64>,
    x_whitened: &Array1<c64>,
) -> EigenDiagnostics {
    let a: f64 = set.mass_quad(xi);
    let bq = set.quad_form(&set.b, xi);
    let b_full = c64::new(0.0, -1.0) * bq;
    let cq = set.quad_form(&set.l, xi);
    let quad = a * lam * lam + c64::new(0.0, 1.0) * b_full * lam + cq;
    // residual in the whitened frame
    let mut r = x_whitened.mapv(|z| z * lam * lam);
    r = r + bw.dot(x_whitened).mapv(|z| z * lam) + lw.dot(x_whitened);
    let xn: f64 = x_whitened.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let scale = (lam.norm_sqr() + lam.norm() * fro_norm(bw) + fro_norm(lw)) * xn;
    let res: f64 = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    EigenDiagnostics {
        a,
        b: b_full.re,
        c: cq.re,
        b_imag: b_full.im,
        c_imag: cq.im,
        quad_residual: quad.norm(),
        pencil_residual: res / scale.max(f64::MIN_POSITIVE),
    }
}

/// Compute all 2n pencil eigenvalues (and M-normalized eigenvectors with
/// diagnostics when requested).  B = 0 sets go through a hermitian
/// eigensolve with λ = ±i√μ; general sets through the dense companion.
pub fn compute_spectrum(
    set: &DiscreteOperatorSet,
    want_vectors: bool,
) -> Result<PencilSpectrum, PencilError> {
    check_mass(set)?;
    let n = set.ndof();
    let (m_star, beta) = whitened_constants(set)?;
    let lw = set.whitened(&set.l);
    let bw = set.whitened(&set.b);

    let mut vals: Vec<c64> = Vec::with_capacity(2 * n);
    let mut vecs: Option<Vec<Array1<c64>>> = if want_vectors {
        Some(Vec::with_capacity(2 * n))
    } else {
        None
    };

    if fro_norm(&set.b) == 0.0 {
        let lh = (&lw + &lw.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
        let (mu, w) = lh
            .eigh(UPLO::Lower)
            .map_err(|e| PencilError::EigensolverFailure(e.to_string()))?;
        // the square root amplifies eigensolver roundoff: a spurious
        // −ε‖L‖ eigenvalue of a positive-semidefinite stiffness would turn
        // into a √(ε‖L‖) real pair, so negatives inside the roundoff band are
        // treated as exact zeros; genuine instabilities sit far outside it
        let mu_scale = mu.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let tol_psd = f64::EPSILON * n as f64 * mu_scale;
        for k in 0..n {
            let lam = if mu[k] >= 0.0 {
                c64::new(0.0, mu[k].sqrt())
            } else if mu[k] >= -tol_psd {
                c64::new(0.0, 0.0)
            } else {
                c64::new((-mu[k]).sqrt(), 0.0)
            };
            for sgn in [1.0, -1.0] {
                vals.push(lam * sgn);
                if let Some(v) = &mut vecs {
                    // for complex hermitian input the solver hands back the
                    // conjugated eigenvector columns
                    v.push(w.column(k).mapv(|z| z.conj()));
                }
            }
        }
    } else {
        let (comp, _) = linearize_companion(set)?;
        let (ev, evec) = comp
            .eig()
            .map_err(|e| PencilError::EigensolverFailure(e.to_string()))?;
        for k in 0..2 * n {
            vals.push(ev[k]);
            if let Some(v) = &mut vecs {
                let mut x = Array1::<c64>::zeros(n);
                for i in 0..n {
                    x[i] = evec[[i, k]];
                }
                let xn: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if xn == 0.0 {
                    // eigenvector concentrated in the velocity block (λ≈0
                    // defective pair): fall back to that block
                    for i in 0..n {
                        x[i] = evec[[n + i, k]];
                    }
                }
                v.push(x);
            }
        }
    }

    sort_pairs(&mut vals, &mut vecs);

    let (eigenvectors, diagnostics) = match vecs {
        None => (None, Vec::new()),
        Some(cols) => {
            let mut mat = Array2::<c64>::zeros((n, 2 * n));
            let mut diag = Vec::with_capacity(2 * n);
            for (k, x) in cols.iter().enumerate() {
                let xn: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let xw = x.mapv(|z| z / xn);
                // ξ = M^{-1/2} x has unit M-norm
                let mut xi = Array1::<c64>::zeros(n);
                for i in 0..n {
                    xi[i] = xw[i] / set.m_diag[i].sqrt();
                }
                diag.push(diagnostics_of(set, vals[k], &xi, &lw, &bw, &xw));
                for i in 0..n {
                    mat[[i, k]] = xi[i];
                }
            }
            (Some(mat), diag)
        }
    };

    Ok(PencilSpectrum {
        eigenvalues: vals,
        eigenvectors,
        diagnostics,
        m_star,
        beta,
        linearization: "whitened-companion".to_string(),
    })
}

/// Greedy minimal-distance matching of the spectrum against its image under
/// λ ↦ −λ*; the defect is the largest matched distance.
pub fn check_ir_symmetry(spec: &PencilSpectrum, tol: f64) -> SymmetryReport {
    let n = spec.eigenvalues.len();
    let targets: Vec<c64> = spec.eigenvalues.iter().map(|z| -z.conj()).collect();
    let mut used = vec![false; n];
    let mut defect = 0.0f64;
    for &lam in &spec.eigenvalues {
        let mut best = f64::INFINITY;
        let mut best_j = usize::MAX;
        for (j, &t) in targets.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = (lam - t).norm();
            if d < best {
                best = d;
                best_j = j;
            }
        }
        if best_j != usize::MAX {
            used[best_j] = true;
            defect = defect.max(best);
        }
    }
    let radius = spec
        .eigenvalues
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    SymmetryReport {
        defect,
        spectral_radius: radius,
        pass: defect <= tol,
    }
}

/// Check every eigenvalue against the inclusion region
/// S = iℝ ∪ {|λ| ≤ √m*, |Im λ| ≤ β/2}.
pub fn check_inclusion_s(
    spec: &PencilSpectrum,
    m_star: f64,
    beta: f64,
    tol: f64,
) -> InclusionReport {
    let sqrt_mstar = m_star.max(0.0).sqrt();
    let mut violators = Vec::new();
    let mut worst = 0.0f64;
    for &lam in &spec.eigenvalues {
        let on_axis = lam.re.abs() <= tol;
        let in_region = lam.norm() <= sqrt_mstar + tol && lam.im.abs() <= 0.5 * beta + tol;
        if !(on_axis || in_region) {
            let excess = lam
                .re
                .abs()
                .min((lam.norm() - sqrt_mstar).max(lam.im.abs() - 0.5 * beta));
            violators.push((lam.re, lam.im, excess));
            worst = worst.max(excess);
        }
    }
    InclusionReport {
        pass: violators.is_empty(),
        violators,
        worst_excess: worst,
    }
}

/// Scalar diagnostics of a supplied eigenpair; the vector is M-normalized
/// internally.  Errors if the pencil residual exceeds `tol`.
pub fn eigen_diagnostics(
    set: &DiscreteOperatorSet,
    lam: c64,
    xi0: &Array1<c64>,
    tol: f64,
) -> Result<EigenDiagnostics, PencilError> {
    check_mass(set)?;
    let mn = set.mass_quad(xi0).sqrt();
    let xi = xi0.mapv(|z| z / mn);
    let n = set.ndof();
    let mut xw = Array1::<c64>::zeros(n);
    for i in 0..n {
        xw[i] = xi[i] * set.m_diag[i].sqrt();
    }
    let lw = set.whitened(&set.l);
    let bw = set.whitened(&set.b);
    let d = diagnostics_of(set, lam, &xi, &lw, &bw, &xw);
    if d.pencil_residual > tol {
        return Err(PencilError::NotAnEigenpair {
            residual: d.pencil_residual,
            tol,
        });
    }
    Ok(d)
}

/// The two roots of aλ² + ibλ + c = 0, i.e. λ = i[−b/2 ± √(b²/4 + ac)]/a,
/// evaluated by the complex quadratic formula.
pub fn quad_roots(a: f64, b: f64, c: f64) -> (c64, c64) {
    let disc = c64::new(0.25 * b * b + a * c, 0.0).sqrt();
    let r1 = (c64::new(0.0, -0.5 * b) + c64::new(0.0, 1.0) * disc) / a;
    let r2 = (c64::new(0.0, -0.5 * b) - c64::new(0.0, 1.0) * disc) / a;
    (r1, r2)
}

/// σ_min of the whitened pencil at the probe points, with the analytic
/// spectral-distance bound σ_min ≤ d(2|λ| + β + d).
pub fn resolvent_probe(
    set: &DiscreteOperatorSet,
    spec: &PencilSpectrum,
    lambdas: &[c64],
) -> Result<Vec<ResolventProbe>, PencilError> {
    let n = set.ndof();
    let lw = set.whitened(&set.l);
    let bw = set.whitened(&set.b);
    let mut out = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        let mut pl = lw.clone() + bw.mapv(|z| z * lam);
        for i in 0..n {
            pl[[i, i]] += lam * lam;
        }
        let (_, sv, _) = pl
            .svd(false, false)
            .map_err(|e| PencilError::EigensolverFailure(e.to_string()))?;
        let sigma_min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let d = spec
            .eigenvalues
            .iter()
            .map(|&mu| (lam - mu).norm())
            .fold(f64::INFINITY, f64::min);
        let bound = d * (2.0 * lam.norm() + spec.beta + d);
        out.push(ResolventProbe {
            lambda_re: lam.re,
            lambda_im: lam.im,
            sigma_min,
            inv_norm: if sigma_min > 0.0 {
                1.0 / sigma_min
            } else {
                f64::INFINITY
            },
            dist: d,
            sigma_bound: bound,
            bound_holds: sigma_min <= bound * (1.0 + 1e-10) + 1e-14,
        });
    }
    Ok(out)
}

/// Real-axis spectral window: no eigenvalue has |Re λ| beyond
/// A = β/2 + √(β²/4 + m*).
pub fn real_axis_window(m_star: f64, beta: f64) -> f64 {
    0.5 * beta + (0.25 * beta * beta + m_star).sqrt()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub m_star: f64,
    pub beta: f64,
    pub n_eigenvalues: usize,
    pub spectral_radius: f64,
    pub linearization: String,
    pub symmetry: Option<SymmetryReport>,
    pub inclusion: Option<InclusionReport>,
}

/// Export: spectrum.csv (eigenvalues + diagnostics) and summary.json.
pub fn save_spectrum(
    spec: &PencilSpectrum,
    symmetry: Option<&SymmetryReport>,
    inclusion: Option<&InclusionReport>,
    dir: &Path,
) -> Result<(), PencilError> {
    std::fs::create_dir_all(dir).map_err(IoError::Io)?;
    let mut rows = Vec::with_capacity(spec.eigenvalues.len());
    for (k, &lam) in spec.eigenvalues.iter().enumerate() {
        let (a, b, c, qr, pr) = match spec.diagnostics.get(k) {
            Some(d) => (d.a, d.b, d.c, d.quad_residual, d.pencil_residual),
            None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN),
        };
        rows.push(vec![lam.re, lam.im, a, b, c, qr, pr]);
    }
    write_csv(
        &dir.join("spectrum.csv"),
        &["re", "im", "a", "b", "c", "quad_residual", "pencil_residual"],
        &rows,
    )?;
    let summary = SpectrumSummary {
        m_star: spec.m_star,
        beta: spec.beta,
        n_eigenvalues: spec.eigenvalues.len(),
        spectral_radius: spec
            .eigenvalues
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max),
        linearization: spec.linearization.clone(),
        symmetry: symmetry.cloned(),
        inclusion: inclusion.cloned(),
    };
    write_json(&dir.join("spectrum_summary.json"), &summary)?;
    Ok(())
}
