//! Stability machinery for the discretized oscillation problem: the potential
//! seminorms and their coercivity constants, the Sturm-Liouville constant μ₀,
//! the entropy-gradient smallness condition with its Cowling consequence, the
//! ℓ=1 potential-form positivity, and tabulation of the open Rayleigh-quotient
//! constant k* for the self-gravity term.
//!
//! The tool never claims "stable": it only reports whether the discrete
//! positivity conditions (PD.1)/(PD.2) hold with explicitly computed
//! constants, mirroring the distinction between mode stability and solution
//! stability that remains open at the analytic level.

use crate::gravity::hankel_potential;
use crate::io::{write_csv, write_json, IoError};
use crate::operators::DiscreteOperatorSet;
use crate::quad::{assoc_legendre_norm, gauss_legendre, map_rule};
use crate::stellar_model::StellarModel;
use ndarray::{Array1, Array2};
use ndarray_linalg::{c64, Eigh, UPLO};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("quantity proven positive came out nonpositive at the discrete level: {0}")]
    NonPositive(String),
    #[error("missing channels: {0}")]
    MissingChannels(String),
    #[error("per-degree suprema do not decay near lmax: {0}; raise lmax")]
    TailNotDecaying(String),
    #[error("seminorm Gram is numerically zero; nothing to test")]
    DegenerateSeminorm,
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

// ---------------------------------------------------------------------------
// background constants: δ*, ν*
// ---------------------------------------------------------------------------

/// δ* = inf over 0<r<R of −(3γ−4)(1/r)dΥ/dr; positive when γ > 4/3 because
/// the enthalpy-like variable Υ decreases outward.
pub fn delta_star(model: &StellarModel) -> Result<f64, StabilityError> {
    if !model.is_spherical() {
        return Err(StabilityError::Unsupported(
            "δ* is defined on the spherical background".into(),
        ));
    }
    let gamma = model.eos.gamma;
    let rb = model.r_boundary;
    let n = 4000;
    let mut inf = f64::INFINITY;
    for k in 1..n {
        let r = rb * k as f64 / n as f64;
        let dup = model.grad_upsilon(r, 0.0).0;
        let v = -(3.0 * gamma - 4.0) * dup / r;
        if v < inf {
            inf = v;
        }
    }
    Ok(inf)
}

/// ν* = inf over the star of γP/ρ²; the infimum sits at the densest point
/// because the coefficient behaves like ρ^{γ−2} with 1 < γ < 2.
pub fn nu_star(model: &StellarModel) -> Result<f64, StabilityError> {
    let mut inf = f64::INFINITY;
    let n = 2000;
    for (j, &z) in model.zeta_nodes.iter().enumerate() {
        let rb = model.boundary[j.min(model.boundary.len() - 1)];
        for k in 0..n {
            let r = rb * (k as f64 + 0.5) / n as f64;
            let rho = model.rho_at(r, z);
            if rho > 0.0 {
                let v = model.eos.gamma_p_over_rho2(rho);
                if v < inf {
                    inf = v;
                }
            }
        }
    }
    if !(inf > 0.0) {
        return Err(StabilityError::NonPositive(format!("ν* = {inf}")));
    }
    Ok(inf)
}

// ---------------------------------------------------------------------------
// μ₀: weighted Sturm-Liouville constant
// ---------------------------------------------------------------------------

fn thomas_solve(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = off[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - off[i - 1] * c[i - 1];
        c[i] = if i < n - 1 { off[i] / m } else { 0.0 };
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Smallest eigenvalue of the pair (∫(1/ρ)|ψ'|²r²dr, ∫|ψ|²r²dr) with ψ(R)=0
/// essential and the center condition natural, for a given density profile.
/// Linear elements on a mesh graded toward the surface (where 1/ρ blows up),
/// smallest eigenvalue by inverse power iteration on the tridiagonal pair.
pub fn mu0_weighted(
    rho_of: &dyn Fn(f64) -> f64,
    r_max: f64,
    nr: usize,
) -> Result<f64, StabilityError> {
    if nr < 16 {
        return Err(StabilityError::Unsupported("mesh too coarse for μ₀".into()));
    }
    // nodes 0..nr; Dirichlet at node nr
    let mut r = vec![0.0; nr + 1];
    for i in 0..=nr {
        let t = i as f64 / nr as f64;
        r[i] = r_max * (1.0 - (1.0 - t) * (1.0 - t) * (1.0 - t));
    }
    let (gx, gw) = gauss_legendre(6);
    let n = nr; // unknowns: nodes 0..nr-1
    let mut kd = vec![0.0; n];
    let mut ko = vec![0.0; n - 1];
    let mut md = vec![0.0; n];
    let mut mo = vec![0.0; n - 1];
    for e in 0..nr {
        let (a, b) = (r[e], r[e + 1]);
        let h = b - a;
        let (xs, ws) = map_rule(&gx, &gw, a, b);
        let mut kloc = 0.0;
        let mut m00 = 0.0;
        let mut m01 = 0.0;
        let mut m11 = 0.0;
        for (x, w) in xs.iter().zip(&ws) {
            let rho = rho_of(*x).max(1e-300);
            kloc += w * x * x / rho / (h * h);
            let phi1 = (x - a) / h;
            let phi0 = 1.0 - phi1;
            m00 += w * x * x * phi0 * phi0;
            m01 += w * x * x * phi0 * phi1;
            m11 += w * x * x * phi1 * phi1;
        }
        // assemble, skipping the Dirichlet node nr
        if e < nr {
            kd[e] += kloc;
            md[e] += m00;
        }
        if e + 1 < n {
            kd[e + 1] += kloc;
            md[e + 1] += m11;
            ko[e] += -kloc;
            mo[e] += m01;
        }
    }
    // inverse power iteration on (K, M)
    let mut x = vec![1.0; n];
    let mut mu_prev = f64::INFINITY;
    for _ in 0..400 {
        // y = M x (tridiagonal product)
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] = md[i] * x[i];
            if i > 0 {
                y[i] += mo[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                y[i] += mo[i] * x[i + 1];
            }
        }
        let z = thomas_solve(&kd, &ko, &y);
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        for i in 0..n {
            x[i] = z[i] / norm;
        }
        // Rayleigh quotient μ = xᵀKx / xᵀMx
        let mut kx = 0.0;
        let mut mx = 0.0;
        for i in 0..n {
            let mut kv = kd[i] * x[i];
            let mut mv = md[i] * x[i];
            if i > 0 {
                kv += ko[i - 1] * x[i - 1];
                mv += mo[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                kv += ko[i] * x[i + 1];
                mv += mo[i] * x[i + 1];
            }
            kx += x[i] * kv;
            mx += x[i] * mv;
        }
        let mu = kx / mx;
        if (mu - mu_prev).abs() <= 1e-14 * mu.abs() {
            mu_prev = mu;
            break;
        }
        mu_prev = mu;
    }
    if !(mu_prev > 0.0) {
        return Err(StabilityError::NonPositive(format!("μ₀ = {mu_prev}")));
    }
    Ok(mu_prev)
}

/// μ₀ for a model's density profile along the polar ray.
pub fn mu0_estimate(model: &StellarModel, nr: usize) -> Result<f64, StabilityError> {
    if !model.is_spherical() {
        return Err(StabilityError::Unsupported(
            "μ₀ is defined on the spherical background".into(),
        ));
    }
    let rb = model.r_boundary;
    mu0_weighted(&|r| model.rho_at(r, 0.0), rb, nr)
}

// ---------------------------------------------------------------------------
// seminorm evaluation on explicit channels
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeminormKind {
    /// flux-potential seminorm: ρ-weighted radial derivative of the ℓ=0
    /// channel plus the unweighted (ℓ(ℓ+1)−2)-scaled ℓ≥2 channel norms
    N1,
    /// √μ₁ times the plain r²-weighted channel norms inside the star
    N10,
    /// compressibility seminorm ‖div(ρu)‖ with weight γP/ρ²
    N2,
}

/// Radial channels of g = div(ρu): pairs ((ℓ, m), g_{ℓm}(r) on `r_grid`).
/// The optional `ur00` channel carries the radial-velocity average used as an
/// independent cross-check of the ℓ=0 identity ρ u^r₀₀ = ±dΨ₀₀/dr.
pub struct SeminormChannels {
    pub r_grid: Vec<f64>,
    pub g: Vec<((usize, i32), Vec<f64>)>,
    pub ur00: Option<Vec<f64>>,
}

fn trapezoid(r: &[f64], f: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 1..r.len() {
        acc += 0.5 * (r[i] - r[i - 1]) * (f[i] + f[i - 1]);
    }
    acc
}

fn cumulative_moment(r: &[f64], g: &[f64], power: i32) -> Vec<f64> {
    let n = r.len();
    let mut acc = vec![0.0; n];
    for i in 1..n {
        let fi = g[i] * r[i].powi(power);
        let fm = g[i - 1] * r[i - 1].powi(power);
        acc[i] = acc[i - 1] + 0.5 * (r[i] - r[i - 1]) * (fi + fm);
    }
    acc
}

/// Evaluate one of the stability seminorms from explicit radial channels.
/// The ℓ≥2 term of the first seminorm is the paper-verbatim unweighted
/// ∫|Ψ_{ℓm}|²dr (no r² factor); see `StabilityReport::units_note`.
pub fn seminorm_eval(
    kind: SeminormKind,
    ch: &SeminormChannels,
    model: &StellarModel,
) -> Result<f64, StabilityError> {
    if ch.g.is_empty() {
        return Err(StabilityError::MissingChannels("no g channels".into()));
    }
    let r = &ch.r_grid;
    if r.len() < 8 {
        return Err(StabilityError::MissingChannels("r_grid too short".into()));
    }
    let rb = model.r_boundary;
    match kind {
        SeminormKind::N2 => {
            let mut acc = 0.0;
            for ((_ell, _m), gv) in &ch.g {
                let mut integ = vec![0.0; r.len()];
                for (k, &rv) in r.iter().enumerate() {
                    if gv[k] == 0.0 {
                        continue;
                    }
                    let rho = model.rho_at(rv, 0.0);
                    if rho <= 0.0 {
                        return Err(StabilityError::MissingChannels(format!(
                            "divergence channel not supported inside the star at r={rv}"
                        )));
                    }
                    integ[k] = model.eos.gamma_p_over_rho2(rho) * gv[k] * gv[k] * rv * rv;
                }
                acc += trapezoid(r, &integ);
            }
            Ok(acc.sqrt())
        }
        SeminormKind::N1 => {
            let mut acc = 0.0;
            for ((ell, _m), gv) in &ch.g {
                match ell {
                    0 => {
                        // dΨ₀₀/dr = ±(1/r²)∫₀^r g s²ds, zero past the star
                        // only when the channel has zero total mass
                        let moment = cumulative_moment(r, gv, 2);
                        let total = *moment.last().unwrap();
                        let scale = moment.iter().cloned().fold(0.0, f64::max).max(1e-300);
                        if total.abs() > 1e-7 * scale {
                            return Err(StabilityError::MissingChannels(format!(
                                "ℓ=0 channel must have zero mean (defect {total:.3e})"
                            )));
                        }
                        let mut integ = vec![0.0; r.len()];
                        for (k, &rv) in r.iter().enumerate() {
                            if rv <= 0.0 || rv >= rb {
                                continue;
                            }
                            let rho = model.rho_at(rv, 0.0);
                            if rho <= 0.0 {
                                continue;
                            }
                            integ[k] = moment[k] * moment[k] / (rho * rv * rv);
                        }
                        acc += trapezoid(r, &integ);
                    }
                    1 => {}
                    _ => {
                        let psi = hankel_potential(r, gv, *ell, 8);
                        let integ: Vec<f64> = psi.iter().map(|p| p * p).collect();
                        let mut term = trapezoid(r, &integ);
                        // analytic decay tail past the grid end
                        let rend = *r.last().unwrap();
                        term += psi.last().unwrap().powi(2) * rend / (2 * ell + 1) as f64;
                        acc += (ell * (ell + 1) - 2) as f64 * term;
                    }
                }
            }
            Ok(acc.sqrt())
        }
        SeminormKind::N10 => {
            let mu0 = mu0_estimate(model, 400)?;
            let mu1 = mu0.min(4.0 / (rb * rb));
            let mut acc = 0.0;
            for ((ell, _m), gv) in &ch.g {
                if *ell == 1 {
                    continue;
                }
                let psi = hankel_potential(r, gv, *ell, 8);
                let integ: Vec<f64> = psi
                    .iter()
                    .zip(r)
                    .map(|(p, rv)| if *rv <= rb { p * p * rv * rv } else { 0.0 })
                    .collect();
                acc += trapezoid(r, &integ);
            }
            Ok((mu1 * acc).sqrt())
        }
    }
}

/// Relative defect of the ℓ=0 identity ∫|u^r₀₀|²ρr²dr = ∫(1/ρ)|dΨ₀₀/dr|²r²dr.
pub fn ur00_identity_defect(
    ch: &SeminormChannels,
    model: &StellarModel,
) -> Result<f64, StabilityError> {
    let ur = ch
        .ur00
        .as_ref()
        .ok_or_else(|| StabilityError::MissingChannels("u^r_00 channel absent".into()))?;
    let g00 = ch
        .g
        .iter()
        .find(|((l, _), _)| *l == 0)
        .map(|(_, v)| v)
        .ok_or_else(|| StabilityError::MissingChannels("g_00 channel absent".into()))?;
    let r = &ch.r_grid;
    let rb = model.r_boundary;
    let moment = cumulative_moment(r, g00, 2);
    let mut lhs_i = vec![0.0; r.len()];
    let mut rhs_i = vec![0.0; r.len()];
    for (k, &rv) in r.iter().enumerate() {
        if rv <= 0.0 || rv >= rb {
            continue;
        }
        let rho = model.rho_at(rv, 0.0);
        if rho <= 0.0 {
            continue;
        }
        lhs_i[k] = ur[k] * ur[k] * rho * rv * rv;
        rhs_i[k] = moment[k] * moment[k] / (rho * rv * rv);
    }
    let lhs = trapezoid(r, &lhs_i);
    let rhs = trapezoid(r, &rhs_i);
    Ok((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300))
}

/// Restrict channels to axially and equatorially symmetric content (even ℓ,
/// m=0); under this filter the first-seminorm kernel contains no uncontrolled
/// ℓ=1 part, so vanishing seminorm forces a vanishing potential perturbation.
pub fn axial_equatorial_filter(ch: &SeminormChannels) -> SeminormChannels {
    SeminormChannels {
        r_grid: ch.r_grid.clone(),
        g: ch
            .g
            .iter()
            .filter(|((l, m), _)| *m == 0 && l % 2 == 0)
            .cloned()
            .collect(),
        ur00: ch.ur00.clone(),
    }
}

// ---------------------------------------------------------------------------
// (PD.1) / (PD.2)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Pd2Result {
    pub seminorm: String,
    pub delta_claim: f64,
    pub min_quotient: f64,
    pub rank: usize,
    pub pass: bool,
}

/// Hermitian eigendecomposition with eigenvectors verified against the
/// defining residual (the complex backend's raw columns can come out
/// conjugated; pick the orientation that actually satisfies A v = s v).
fn herm_eig_checked(a: &Array2<c64>) -> Result<(Vec<f64>, Vec<Array1<c64>>), StabilityError> {
    let (vals, vecs) = a
        .eigh(UPLO::Lower)
        .map_err(|e| StabilityError::Linalg(format!("{e}")))?;
    let n = vals.len();
    let mut out = Vec::with_capacity(n);
    let scale = vals.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    for k in 0..n {
        let raw = vecs.column(k).to_owned();
        let conj = raw.mapv(|z| z.conj());
        let res = |v: &Array1<c64>| -> f64 {
            let av = a.dot(v);
            (&av - &v.mapv(|z| z * vals[k]))
                .iter()
                .map(|z| z.norm_sqr())
                .sum::<f64>()
                .sqrt()
        };
        let v = if res(&conj) <= res(&raw) { conj } else { raw };
        if res(&v) > 1e-8 * scale {
            return Err(StabilityError::Linalg(
                "hermitian eigenvector residual too large".into(),
            ));
        }
        out.push(v);
    }
    Ok((vals.to_vec(), out))
}

/// (PD.2) check: minimum of uᴴLu / uᴴNu over the nondegenerate range of the
/// seminorm Gram N, compared against a claimed coercivity constant.
pub fn check_pd2(
    name: &str,
    l: &Array2<c64>,
    n_gram: &Array2<c64>,
    delta_claim: f64,
    tol: f64,
) -> Result<Pd2Result, StabilityError> {
    let (svals, svecs) = herm_eig_checked(n_gram)?;
    let smax = svals.iter().cloned().fold(0.0, f64::max);
    if !(smax > 0.0) {
        return Err(StabilityError::DegenerateSeminorm);
    }
    let cut = 1e-10 * smax;
    let kept: Vec<usize> = (0..svals.len()).filter(|&k| svals[k] > cut).collect();
    let rank = kept.len();
    if rank == 0 {
        return Err(StabilityError::DegenerateSeminorm);
    }
    // restricted pencil in the N-orthonormal basis: A_kj = v_kᴴ L v_j /√(s_k s_j)
    let mut a = Array2::<c64>::zeros((rank, rank));
    for (bi, &k) in kept.iter().enumerate() {
        let lvk = l.dot(&svecs[k]);
        for (bj, &j) in kept.iter().enumerate() {
            let mut acc = c64::new(0.0, 0.0);
            for (z, w) in svecs[j].iter().zip(lvk.iter()) {
                acc += z.conj() * *w;
            }
            a[[bj, bi]] = acc / (svals[j] * svals[k]).sqrt();
        }
    }
    // hermitize to kill accumulation noise
    let ah = {
        let at = a.t().mapv(|z| z.conj());
        (&a + &at).mapv(|z| 0.5 * z)
    };
    let (qvals, _) = ah
        .eigh(UPLO::Lower)
        .map_err(|e| StabilityError::Linalg(format!("{e}")))?;
    let min_quotient = qvals.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(Pd2Result {
        seminorm: name.to_string(),
        delta_claim,
        min_quotient,
        rank,
        pass: min_quotient >= delta_claim - tol,
    })
}

/// (PD.1) diagnostic: minimum M-Rayleigh quotient of L, with the scale used
/// for the nonnegativity tolerance.
pub fn check_pd1(set: &DiscreteOperatorSet) -> Result<(f64, f64, bool), StabilityError> {
    let lw = set.whitened(&set.l);
    let lh = {
        let lt = lw.t().mapv(|z| z.conj());
        (&lw + &lt).mapv(|z| 0.5 * z)
    };
    let (vals, _) = lh
        .eigh(UPLO::Lower)
        .map_err(|e| StabilityError::Linalg(format!("{e}")))?;
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok((min, scale, min >= -1e-10 * scale))
}

// ---------------------------------------------------------------------------
// discrete seminorm Grams on an axisymmetric set
// ---------------------------------------------------------------------------

/// Grams of the two potential seminorms on the degrees of freedom of a
/// spherical m=0 set, plus the μ₁ constant used by the second one.  Channels
/// are read off the set's divergence map, transported to a fine auxiliary
/// radial grid through the nodal kernel quadrature, and weighted per the
/// seminorm definitions.
///
/// Channels are normalized so that the squared volume integral of a field
/// equals 4π times the sum of its squared channel norms; this is the
/// convention in which the coercivity claim 4π·min(δ*, G) for the first
/// seminorm is stated (plain orthonormal spherical-harmonic coefficients are
/// larger by √(4π)).
///
/// The monopole channel of div(ρu) integrates to the surface mass flux, which
/// vanishes identically in the continuum (ρ → 0 at the boundary) but only to
/// quadrature accuracy on the discrete set; since the 1/ρ-weighted monopole
/// integral is divergent off that subspace, both Grams are projected onto the
/// discretely flux-free fields, mirroring the continuum function space.
pub fn potential_seminorm_grams(
    set: &DiscreteOperatorSet,
    model: &StellarModel,
    nt: usize,
) -> Result<(Array2<c64>, Array2<c64>, f64), StabilityError> {
    let data = set
        .data
        .as_ref()
        .ok_or_else(|| StabilityError::Unsupported("set carries no node data".into()))?;
    if set.meta.m != 0 || !model.is_spherical() {
        return Err(StabilityError::Unsupported(
            "potential Grams need a spherical m=0 set".into(),
        ));
    }
    let ns = set.meta.ns;
    let nz = set.meta.nzeta;
    let ndof = set.ndof();
    let rb = model.r_boundary;
    let (zeta, wz) = gauss_legendre(nz);
    // radial nodes and dr-weights recovered from the set geometry
    let r_nodes: Vec<f64> = set.r_nodes.clone();
    // vol_w = 2π wr wz r², so wr = vol_w/(2π wz r²) on any ray (take j=0)
    let mut wr = vec![0.0; ns];
    for i in 0..ns {
        let q = i; // j = 0
        wr[i] = data.vol_w[q] / (2.0 * std::f64::consts::PI * wz[0] * r_nodes[i] * r_nodes[i]);
    }

    let lmax = nz - 1;
    // fine evaluation grid strictly inside [0, R]
    let (tg, tw) = gauss_legendre(nt);
    let (tr, trw) = {
        let (a, b) = (0.0, rb);
        let mut xs = Vec::with_capacity(nt);
        let mut ws = Vec::with_capacity(nt);
        for (x, w) in tg.iter().zip(&tw) {
            xs.push(0.5 * (b - a) * x + 0.5 * (a + b));
            ws.push(0.5 * (b - a) * w);
        }
        (xs, ws)
    };

    let mu0 = mu0_estimate(model, 400)?;
    let mu1 = mu0.min(4.0 / (rb * rb));

    let mut n1 = Array2::<c64>::zeros((ndof, ndof));
    let mut n10 = Array2::<c64>::zeros((ndof, ndof));
    let mut flux_row = Array1::<c64>::zeros(ndof);
    // orthonormal-coefficient contraction √(2π)·Σ wz P̄ℓ, divided by √(4π)
    // for the 4π-split channel convention (see the doc comment)
    let chan_coef = (2.0 * std::f64::consts::PI).sqrt() / (4.0 * std::f64::consts::PI).sqrt();
    for ell in 0..=lmax {
        if ell == 1 {
            continue;
        }
        // channel map u → g_ℓ(r_i): rows of c_div contracted with the ζ rule
        let mut gmap = Array2::<c64>::zeros((ns, ndof));
        for i in 0..ns {
            for j in 0..nz {
                let q = j * ns + i;
                let coef = chan_coef * wz[j] * assoc_legendre_norm(ell, 0, zeta[j]);
                for d in 0..ndof {
                    gmap[[i, d]] += data.c_div[[q, d]] * coef;
                }
            }
        }
        // potential map g_ℓ(r_i) → Ψ_ℓ(t_k) by nodal kernel quadrature
        let mut hmap = Array2::<f64>::zeros((nt, ns));
        let mut dmap = Array2::<f64>::zeros((nt, ns)); // ℓ=0 radial derivative
        for (k, &t) in tr.iter().enumerate() {
            for i in 0..ns {
                let ri = r_nodes[i];
                let kern = if ri <= t {
                    t.powi(-(ell as i32) - 1) * ri.powi(ell as i32 + 2)
                } else {
                    t.powi(ell as i32) * ri.powi(1 - ell as i32)
                };
                hmap[[k, i]] = -wr[i] * kern / (2 * ell + 1) as f64;
                if ell == 0 && ri <= t {
                    dmap[[k, i]] = wr[i] * ri * ri / (t * t);
                }
            }
        }
        // weighted accumulation A ↦ Aᴴ diag(w) A
        let accumulate = |target: &mut Array2<c64>, amap: &Array2<f64>, w: &[f64]| {
            let mut a = Array2::<c64>::zeros((nt, ndof));
            for k in 0..nt {
                for i in 0..ns {
                    let c = amap[[k, i]];
                    if c == 0.0 {
                        continue;
                    }
                    for d in 0..ndof {
                        a[[k, d]] += gmap[[i, d]] * c;
                    }
                }
            }
            for k in 0..nt {
                if w[k] == 0.0 {
                    continue;
                }
                for d1 in 0..ndof {
                    let lhs = a[[k, d1]].conj() * w[k];
                    for d2 in 0..ndof {
                        target[[d1, d2]] += lhs * a[[k, d2]];
                    }
                }
            }
        };
        // first seminorm
        if ell == 0 {
            for i in 0..ns {
                let c = wr[i] * r_nodes[i] * r_nodes[i];
                for d in 0..ndof {
                    flux_row[d] += gmap[[i, d]] * c;
                }
            }
            let w: Vec<f64> = tr
                .iter()
                .zip(&trw)
                .map(|(&t, &wt)| {
                    let rho = model.rho_at(t, 0.0);
                    if rho > 0.0 {
                        wt * t * t / rho
                    } else {
                        0.0
                    }
                })
                .collect();
            accumulate(&mut n1, &dmap, &w);
        } else {
            let coef = (ell * (ell + 1) - 2) as f64;
            let w: Vec<f64> = trw.iter().map(|&wt| wt * coef).collect();
            accumulate(&mut n1, &hmap, &w);
            // analytic decay tail past R: Ψ = c t^{−ℓ−1}
            let mut crow = Array1::<c64>::zeros(ndof);
            for i in 0..ns {
                let c = -wr[i] * r_nodes[i].powi(ell as i32 + 2) / (2 * ell + 1) as f64;
                for d in 0..ndof {
                    crow[d] += gmap[[i, d]] * c;
                }
            }
            let tail = coef / ((2 * ell + 1) as f64 * rb.powi(2 * ell as i32 + 1));
            for d1 in 0..ndof {
                let lhs = crow[d1].conj() * tail;
                for d2 in 0..ndof {
                    n1[[d1, d2]] += lhs * crow[d2];
                }
            }
        }
        // second seminorm: μ₁-scaled plain channel norms inside the star
        let w: Vec<f64> = tr
            .iter()
            .zip(&trw)
            .map(|(&t, &wt)| mu1 * wt * t * t)
            .collect();
        accumulate(&mut n10, &hmap, &w);
    }
    // project both Grams onto the discretely flux-free subspace
    let fnorm = flux_row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if fnorm > 0.0 {
        let p: Array1<c64> = flux_row.mapv(|z| z / fnorm);
        let project = |m: &mut Array2<c64>| {
            // M ← (I − ppᴴ) M (I − ppᴴ)
            let mp = m.dot(&p);
            let pm = p.mapv(|z| z.conj()).dot(&*m);
            let pmp: c64 = p
                .iter()
                .zip(mp.iter())
                .map(|(a, b)| a.conj() * *b)
                .sum();
            for a in 0..ndof {
                for b in 0..ndof {
                    m[[a, b]] = m[[a, b]] - mp[a] * p[b].conj() - p[a] * pm[b]
                        + p[a] * pmp * p[b].conj();
                }
            }
        };
        project(&mut n1);
        project(&mut n10);
    }
    // hermitize
    let sym = |m: &Array2<c64>| {
        let mt = m.t().mapv(|z| z.conj());
        (m + &mt).mapv(|z| 0.5 * z)
    };
    Ok((sym(&n1), sym(&n10), mu1))
}

// ---------------------------------------------------------------------------
// k*: the open Rayleigh-quotient constant
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KStarResult {
    pub gamma: f64,
    pub lmax: usize,
    pub per_ell: Vec<f64>,
    pub per_ell_nondim: Vec<f64>,
    pub overall: f64,
    pub overall_nondim: f64,
    pub c_bound: f64,
    pub quotient_within_c: bool,
}

fn sym_eig_max(s: &Array2<f64>) -> Result<f64, StabilityError> {
    let sc = s.mapv(|x| c64::new(x, 0.0));
    let (vals, _) = sc
        .eigh(UPLO::Lower)
        .map_err(|e| StabilityError::Linalg(format!("{e}")))?;
    Ok(vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

fn kstar_ell(
    r: &[f64],
    w: &[f64],
    weight: &[f64],
    ell: usize,
    four_pi_g: f64,
) -> Result<f64, StabilityError> {
    let n = r.len();
    let kmat = crate::gravity::kernel_gram_ell(r, w, ell);
    let mut d = vec![0.0; n];
    for i in 0..n {
        d[i] = w[i] * weight[i] * r[i] * r[i];
        if !(d[i] > 0.0) {
            return Err(StabilityError::NonPositive(format!(
                "weighted mass entry {} at r={}",
                d[i], r[i]
            )));
        }
    }
    let mut s = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            s[[i, j]] = four_pi_g * kmat[[i, j]] / (d[i] * d[j]).sqrt();
        }
    }
    if ell == 0 {
        // deflate the zero-mean constraint ∫ g r²dr = 0
        let mut c = vec![0.0; n];
        for i in 0..n {
            c[i] = w[i] * r[i] * r[i] / d[i].sqrt();
        }
        let nc = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut c {
            *v /= nc;
        }
        // S ← (I − ccᵀ) S (I − ccᵀ)
        let sc: Vec<f64> = (0..n).map(|i| (0..n).map(|j| s[[i, j]] * c[j]).sum()).collect();
        let csc: f64 = (0..n).map(|i| c[i] * sc[i]).sum();
        for i in 0..n {
            for j in 0..n {
                s[[i, j]] += -sc[i] * c[j] - c[i] * sc[j] + csc * c[i] * c[j];
            }
        }
    }
    sym_eig_max(&s)
}

/// Tabulate the per-degree suprema of the self-gravity Rayleigh quotient
///   4πG ∬ 𝒦_ℓ g g* / ∫ (γP/ρ²)|g|² r²dr
/// on a spherical background, together with the nondimensional cross-check
/// using the Lane-Emden weight (γ−1)θ^{−(2−γ)/(γ−1)} (isentropic case).  The
/// overall value is tabulated, never asserted below one: that question is open.
pub fn compute_k_star(
    model: &StellarModel,
    lmax: usize,
    nr: usize,
) -> Result<KStarResult, StabilityError> {
    if !model.is_spherical() {
        return Err(StabilityError::Unsupported(
            "k* tabulation needs a spherical background".into(),
        ));
    }
    if lmax < 4 {
        return Err(StabilityError::Unsupported("lmax must be at least 4".into()));
    }
    let rb = model.r_boundary;
    let gamma = model.eos.gamma;
    let (gx, gw) = gauss_legendre(nr);
    let (r, w) = map_rule(&gx, &gw, 0.0, rb);
    // dimensional weight γP/ρ²
    let weight: Vec<f64> = r
        .iter()
        .map(|&rv| model.eos.gamma_p_over_rho2(model.rho_at(rv, 0.0)))
        .collect();
    let mut per_ell = Vec::with_capacity(lmax + 1);
    for ell in 0..=lmax {
        per_ell.push(kstar_ell(&r, &w, &weight, ell, FOUR_PI * model.g_const)?);
    }
    // nondimensional reduction on the Lane-Emden profile (own scaling path)
    let mut per_ell_nondim = Vec::new();
    if model.isentropic {
        let a = model.a_scale;
        let xi: Vec<f64> = r.iter().map(|&rv| rv / a).collect();
        let wxi: Vec<f64> = w.iter().map(|&wv| wv / a).collect();
        let expo = -(2.0 - gamma) / (gamma - 1.0);
        let theta_weight: Vec<f64> = xi
            .iter()
            .map(|&x| (gamma - 1.0) * model.background.eval(x, 0.0).max(0.0).powf(expo))
            .collect();
        for ell in 0..=lmax {
            per_ell_nondim.push(kstar_ell(&xi, &wxi, &theta_weight, ell, 1.0)?);
        }
    }
    // tail decay over the last three degrees
    let tol = 1e-9 * per_ell[0].abs().max(1e-300);
    for k in (lmax - 2)..=lmax {
        if per_ell[k] > per_ell[k - 1] + tol {
            return Err(StabilityError::TailNotDecaying(format!(
                "supremum rises from {} at ℓ={} to {} at ℓ={}",
                per_ell[k - 1],
                k - 1,
                per_ell[k],
                k
            )));
        }
    }
    let overall = per_ell.iter().cloned().fold(0.0, f64::max);
    let overall_nondim = per_ell_nondim.iter().cloned().fold(0.0, f64::max);
    let nu = nu_star(model)?;
    let c_bound = (2.0f64 / 3.0).sqrt() * rb * rb / nu;
    Ok(KStarResult {
        gamma,
        lmax,
        per_ell,
        per_ell_nondim,
        overall,
        overall_nondim,
        c_bound,
        quotient_within_c: overall <= c_bound * (1.0 + 1e-9),
    })
}

/// Value of the self-gravity quotient for one explicit radial channel g_ℓ.
pub fn gravity_quotient(
    model: &StellarModel,
    r: &[f64],
    w: &[f64],
    g: &[f64],
    ell: usize,
) -> Result<f64, StabilityError> {
    let kmat = crate::gravity::kernel_gram_ell(r, w, ell);
    let mut num = 0.0;
    for i in 0..r.len() {
        for j in 0..r.len() {
            num += g[i] * kmat[[i, j]] * g[j];
        }
    }
    num *= FOUR_PI * model.g_const;
    let mut den = 0.0;
    for i in 0..r.len() {
        let rho = model.rho_at(r[i], 0.0);
        if rho <= 0.0 {
            if g[i] != 0.0 {
                return Err(StabilityError::MissingChannels(
                    "channel supported outside the star".into(),
                ));
            }
            continue;
        }
        den += w[i] * model.eos.gamma_p_over_rho2(rho) * g[i] * g[i] * r[i] * r[i];
    }
    if !(den > 0.0) {
        return Err(StabilityError::DegenerateSeminorm);
    }
    Ok(num / den)
}

// ---------------------------------------------------------------------------
// entropy-gradient smallness (the ε-condition) and its Cowling consequence
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AConditionReport {
    pub epsilon: f64,
    /// 𝒜 ≤ 0 everywhere
    pub sign_ok: bool,
    /// −ε‖gradρ‖²/ρ ≤ 𝒜 (the quadratic-power display)
    pub quadratic_ok: bool,
    /// |𝒜| ≤ ε‖gradρ‖/ρ (the single-power form the assembled operator needs)
    pub single_ok: bool,
    pub pass: bool,
    /// smallest ε for which both lower bounds hold (∞ if the sign fails)
    pub epsilon_fit: f64,
    /// nodes (r, ζ, 𝒜) violating 𝒜 ≤ 0
    pub witnesses: Vec<(f64, f64, f64)>,
}

/// Nodewise check of the entropy-gradient condition on the model grid.
pub fn check_a_condition(model: &StellarModel, epsilon: f64) -> AConditionReport {
    let mut sign_ok = true;
    let mut quadratic_ok = true;
    let mut single_ok = true;
    let mut eps_fit = 0.0f64;
    let mut witnesses = Vec::new();
    let a_scale_grad = model.rho_o / model.a_scale;
    let a_abs_max = model
        .a_field
        .iter()
        .map(|v| v.abs())
        .fold(0.0f64, f64::max);
    let tol_pos = 1e-12 * a_abs_max.max(1e-300);
    for (i, &r) in model.r_grid.iter().enumerate() {
        for (j, &z) in model.zeta_nodes.iter().enumerate() {
            let rho = model.rho[[i, j.min(model.rho.ncols() - 1)]];
            if !(rho > 1e-12 * model.rho_o) || r <= 0.0 {
                continue;
            }
            let a = model.a_field[[i, j.min(model.a_field.ncols() - 1)]];
            let (gr, gt) = model.grad_rho(r, z);
            let ngr = (gr * gr + gt * gt).sqrt();
            if a > tol_pos {
                sign_ok = false;
                if witnesses.len() < 16 {
                    witnesses.push((r, z, a));
                }
                continue;
            }
            if ngr <= 1e-10 * a_scale_grad {
                // near the center both 𝒜 and gradρ vanish; require 𝒜 tiny
                if a.abs() > tol_pos {
                    quadratic_ok = false;
                    single_ok = false;
                    eps_fit = f64::INFINITY;
                }
                continue;
            }
            let quad_need = (-a) * rho / (ngr * ngr);
            let single_need = a.abs() * rho / ngr;
            eps_fit = eps_fit.max(quad_need).max(single_need);
            if quad_need > epsilon {
                quadratic_ok = false;
            }
            if single_need > epsilon {
                single_ok = false;
            }
        }
    }
    if !sign_ok {
        eps_fit = f64::INFINITY;
    }
    AConditionReport {
        epsilon,
        sign_ok,
        quadratic_ok,
        single_ok,
        pass: sign_ok && quadratic_ok && single_ok,
        epsilon_fit: eps_fit,
        witnesses,
    }
}

/// Cowling-coercivity spot check: minimum of uᴴL₀u / uᴴGu over random fields,
/// where G is the compressibility Gram; under the ε-condition the analytic
/// bound is 1−ε.
pub fn cowling_coercivity_min(
    set: &DiscreteOperatorSet,
    nsamples: usize,
    seed: u64,
) -> Result<f64, StabilityError> {
    if !set.meta.cowling {
        return Err(StabilityError::Unsupported(
            "coercivity spot check expects a Cowling set".into(),
        ));
    }
    let n = set.ndof();
    let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).max(1);
    let mut next = move || {
        // xorshift64*: deterministic, dependency-free sampling
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        (state.wrapping_mul(0x2545F4914F6CDD1D) >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut min_q = f64::INFINITY;
    let mut found = false;
    for _ in 0..nsamples {
        let u = Array1::from_iter((0..n).map(|_| c64::new(next(), next())));
        let gq = set.quad_form(&set.g_seminorm, &u).re;
        if gq <= 1e-12 * set.mass_quad(&u) {
            continue;
        }
        let lq = set.quad_form(&set.l, &u).re;
        min_q = min_q.min(lq / gq);
        found = true;
    }
    if !found {
        return Err(StabilityError::DegenerateSeminorm);
    }
    Ok(min_q)
}

// ---------------------------------------------------------------------------
// ℓ=1 potential-form positivity
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Q1Sample {
    pub q1_s: Vec<f64>,
    pub q1_extrapolated: f64,
    pub scale: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Q1Report {
    pub s_values: Vec<f64>,
    pub samples: Vec<Q1Sample>,
    pub all_pass: bool,
}

/// 𝒬₁-type functional on [0, s_max]: ∫(|w'|² + ℓ(ℓ+1)|w|²/r² − 4πG(dρ/dΥ)|w|²)r²dr.
fn q1_functional(
    model: &StellarModel,
    r: &[f64],
    w: &[f64],
    wp: &[f64],
    ell: usize,
) -> (f64, f64) {
    let ll = (ell * (ell + 1)) as f64;
    let mut grad_part = vec![0.0; r.len()];
    let mut rho_part = vec![0.0; r.len()];
    for (k, &rv) in r.iter().enumerate() {
        if rv <= 0.0 {
            continue;
        }
        grad_part[k] = (wp[k] * wp[k] + ll * w[k] * w[k] / (rv * rv)) * rv * rv;
        let rho = model.rho_at(rv, 0.0);
        if rho > 0.0 {
            let drho_dup = 1.0 / model.eos.dupsilon_drho(rho);
            rho_part[k] = FOUR_PI * model.g_const * drho_dup * w[k] * w[k] * rv * rv;
        }
    }
    let gp = trapezoid(r, &grad_part);
    let rp = trapezoid(r, &rho_part);
    (gp - rp, gp.abs().max(rp.abs()))
}

/// Evaluate the kernel potential of an ℓ=1 source and its radial derivative
/// on a grid from the cumulative moments (exact rearrangement, no numerical
/// differentiation).
fn psi1_and_deriv(r: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let inner = cumulative_moment(r, g, 3); // ∫₀^r g s³ ds
    let outer_full = cumulative_moment(r, g, 0); // ∫₀^r g ds
    let total = *outer_full.last().unwrap();
    let n = r.len();
    let mut w = vec![0.0; n];
    let mut wp = vec![0.0; n];
    for k in 0..n {
        let rv = r[k];
        if rv <= 0.0 {
            continue;
        }
        let i1 = inner[k];
        let i2 = total - outer_full[k]; // ∫_r^∞ g ds
        w[k] = -(i1 / (rv * rv) + rv * i2) / 3.0;
        wp[k] = -(-2.0 * i1 / (rv * rv * rv) + i2) / 3.0;
    }
    (w, wp)
}

/// Truncated-domain positivity of the ℓ=1 potential form.  Each sample is a
/// compactly supported source g₁; its potential is corrected on [0, S] by the
/// harmonic tail −C S^{−ℓ−1}(r/S)^ℓ with C = (1/(2ℓ+1))∫ g s^{ℓ+2} ds so the
/// Dirichlet condition at S holds, and the functional is extrapolated in 1/S.
pub fn check_q1_positivity(
    model: &StellarModel,
    samples: &[Vec<f64>],
    r_star_grid: &[f64],
    s_values: &[f64],
    nr: usize,
) -> Result<Q1Report, StabilityError> {
    if s_values.len() < 3 {
        return Err(StabilityError::Unsupported(
            "need at least three truncation radii".into(),
        ));
    }
    let ell = 1usize;
    let mut out = Vec::new();
    for g in samples {
        if g.len() != r_star_grid.len() {
            return Err(StabilityError::MissingChannels(
                "sample length does not match its grid".into(),
            ));
        }
        // C = (1/(2ℓ+1)) ∫ g s^{ℓ+2} ds
        let c_lm = *cumulative_moment(r_star_grid, g, ell as i32 + 2)
            .last()
            .unwrap()
            / (2 * ell + 1) as f64;
        let mut q1_s = Vec::new();
        let mut scale = 0.0f64;
        for &s_max in s_values {
            // uniform evaluation grid on [0, S] carrying the source values
            let m = nr;
            let mut rr = Vec::with_capacity(m + 1);
            let mut gg = Vec::with_capacity(m + 1);
            let interp = crate::interp::CubicInterp::from_values(r_star_grid, g);
            let r_supp = *r_star_grid.last().unwrap();
            for k in 0..=m {
                let rv = s_max * k as f64 / m as f64;
                rr.push(rv);
                gg.push(if rv <= r_supp { interp.eval(rv) } else { 0.0 });
            }
            let (w, wp) = psi1_and_deriv(&rr, &gg);
            // Dirichlet correction: W^S = w + Π^S, Π^S = −C S^{−ℓ−1}(r/S)^ℓ
            let pis: Vec<f64> = rr
                .iter()
                .map(|&rv| -c_lm * s_max.powi(-(ell as i32) - 1) * (rv / s_max).powi(ell as i32))
                .collect();
            let pis_p: Vec<f64> = rr
                .iter()
                .map(|_| -c_lm * s_max.powi(-(ell as i32) - 1) * ell as f64 / s_max)
                .collect();
            let ws: Vec<f64> = w.iter().zip(&pis).map(|(a, b)| a + b).collect();
            let wsp: Vec<f64> = wp.iter().zip(&pis_p).map(|(a, b)| a + b).collect();
            let (q, sc) = q1_functional(model, &rr, &ws, &wsp, ell);
            q1_s.push(q);
            scale = scale.max(sc);
        }
        // quadratic Richardson in x = 1/S through the three largest S
        let n = q1_s.len();
        let xs: Vec<f64> = s_values[n - 3..].iter().map(|s| 1.0 / s).collect();
        let ys = &q1_s[n - 3..];
        let (x0, x1, x2) = (xs[0], xs[1], xs[2]);
        let l0 = (0.0 - x1) * (0.0 - x2) / ((x0 - x1) * (x0 - x2));
        let l1 = (0.0 - x0) * (0.0 - x2) / ((x1 - x0) * (x1 - x2));
        let l2 = (0.0 - x0) * (0.0 - x1) / ((x2 - x0) * (x2 - x1));
        let q1_extrapolated = l0 * ys[0] + l1 * ys[1] + l2 * ys[2];
        let pass = q1_extrapolated >= -1e-8 * scale.max(1e-300);
        out.push(Q1Sample {
            q1_s,
            q1_extrapolated,
            scale,
            pass,
        });
    }
    let all_pass = out.iter().all(|s| s.pass);
    Ok(Q1Report {
        s_values: s_values.to_vec(),
        samples: out,
        all_pass,
    })
}

/// 𝒬₁ of the zero mode w = dΥ/dr (extended by −K/r² outside the star),
/// evaluated with the exact decay tail; the analytic value is zero.
pub fn q1_zero_mode(model: &StellarModel, nr: usize, s_max: f64) -> Result<f64, StabilityError> {
    if !model.is_spherical() {
        return Err(StabilityError::Unsupported(
            "zero-mode evaluation needs a spherical background".into(),
        ));
    }
    let rb = model.r_boundary;
    let kconst = -rb * rb * model.grad_upsilon(rb * (1.0 - 1e-9), 0.0).0;
    let mut rr = Vec::with_capacity(nr + 1);
    let mut w = Vec::with_capacity(nr + 1);
    let mut wp = Vec::with_capacity(nr + 1);
    for k in 0..=nr {
        let rv = s_max * k as f64 / nr as f64;
        rr.push(rv);
        if rv < rb {
            let du = model.grad_upsilon(rv, 0.0).0;
            w.push(du);
            // second derivative by central differences of the gradient
            let h = rb * 1e-6;
            let dp = model.grad_upsilon((rv + h).min(rb * (1.0 - 1e-9)), 0.0).0;
            let dm = model.grad_upsilon((rv - h).max(0.0), 0.0).0;
            wp.push((dp - dm) / ((rv + h).min(rb * (1.0 - 1e-9)) - (rv - h).max(0.0)));
        } else {
            w.push(-kconst / (rv * rv));
            wp.push(2.0 * kconst / (rv * rv * rv));
        }
    }
    let (q, _scale) = q1_functional(model, &rr, &w, &wp, 1);
    // exact harmonic tail past S: integrand 6K²/r⁴
    let tail = 2.0 * kconst * kconst / (s_max * s_max * s_max);
    Ok(q + tail)
}

// ---------------------------------------------------------------------------
// report assembly and export
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub version: u32,
    pub gamma: f64,
    pub delta_star: f64,
    pub mu0: f64,
    pub mu1: f64,
    pub nu_star: f64,
    pub c_bound: f64,
    pub k_star: f64,
    pub k_star_per_ell: Vec<f64>,
    pub pd1_min_quotient: f64,
    pub pd1_pass: bool,
    pub pd2_results: Vec<Pd2Result>,
    pub epsilon_a: f64,
    /// the first seminorm mixes an r²-weighted ℓ=0 term with unweighted ℓ≥2
    /// terms, implemented verbatim from its defining display
    pub units_note: String,
}

/// Assemble the discrete stability report for a spherical model and its m=0
/// operator set: constants, (PD.1), (PD.2) for the potential and
/// compressibility seminorms, and the k* tabulation.
pub fn build_stability_report(
    model: &StellarModel,
    set: &DiscreteOperatorSet,
    lmax: usize,
    nr: usize,
) -> Result<StabilityReport, StabilityError> {
    let ds = delta_star(model)?;
    let nu = nu_star(model)?;
    let mu0 = mu0_estimate(model, 800)?;
    let rb = model.r_boundary;
    let mu1 = mu0.min(4.0 / (rb * rb));
    let kstar = compute_k_star(model, lmax, nr)?;
    let (pd1_min, _scale, pd1_pass) = check_pd1(set)?;
    let mut pd2 = Vec::new();
    if set.meta.m == 0 && set.data.is_some() {
        let (n1, _n10, _mu1) = potential_seminorm_grams(set, model, 160)?;
        let delta_claim = FOUR_PI * ds.min(model.g_const);
        let lscale = set
            .l
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
            .max(1e-300);
        pd2.push(check_pd2("n1", &set.l, &n1, delta_claim, 1e-6 * lscale)?);
    }
    let eps_fit = check_a_condition(model, 1.0).epsilon_fit;
    Ok(StabilityReport {
        version: 1,
        gamma: model.eos.gamma,
        delta_star: ds,
        mu0,
        mu1,
        nu_star: nu,
        c_bound: kstar.c_bound,
        k_star: kstar.overall,
        k_star_per_ell: kstar.per_ell.clone(),
        pd1_min_quotient: pd1_min,
        pd1_pass,
        pd2_results: pd2,
        epsilon_a: eps_fit,
        units_note: "first-seminorm ℓ≥2 term uses the unweighted ∫|Ψ|²dr (paper-verbatim); \
                     its units differ from the r²-weighted ℓ=0 term by length²"
            .into(),
    })
}

pub fn save_report(report: &StabilityReport, path: &Path) -> Result<(), StabilityError> {
    write_json(path, report)?;
    Ok(())
}

/// k* sweep table: one row per degree and γ, plus the overall row (ℓ = −1).
pub fn save_kstar_csv(results: &[KStarResult], path: &Path) -> Result<(), StabilityError> {
    let mut rows = Vec::new();
    for res in results {
        for (l, &v) in res.per_ell.iter().enumerate() {
            rows.push(vec![
                res.gamma,
                res.lmax as f64,
                l as f64,
                v,
                res.per_ell_nondim.get(l).copied().unwrap_or(f64::NAN),
            ]);
        }
        rows.push(vec![
            res.gamma,
            res.lmax as f64,
            -1.0,
            res.overall,
            res.overall_nondim,
        ]);
    }
    write_csv(
        path,
        &["gamma", "lmax", "ell", "k_sup", "k_sup_nondim"],
        &rows,
    )?;
    Ok(())
}
