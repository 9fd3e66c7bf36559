//! Discrete operator sets for the linearized oscillation problem: the ρ-weighted
//! mass matrix, the stiffness form assembled from its integration-by-parts
//! expression (so hermiticity is exact by construction), the pointwise Coriolis
//! term, the compressibility seminorm, and the analytic bound constants.
//!
//! Geometry: each model is covered by a tensor grid (s, ζ) with r = s·R(ζ),
//! where R(ζ) is the vacuum boundary of the ray with ζ = cosϑ.  Radial nodes
//! come from a Gauss-Jacobi rule whose weight matches the boundary vanishing of
//! the density, so that the diverging coefficient γP/ρ² is integrated against
//! factors that keep every quadrature sum finite.

use crate::io::{write_csv, write_json, IoError};
use crate::quad::{
    adaptive_simpson, assoc_legendre_norm, diff_matrix, gauss_jacobi, gauss_legendre,
};
use crate::stellar_model::StellarModel;
use ndarray::{Array1, Array2};
use ndarray_linalg::{c64, Eigh, SVD, UPLO};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("mesh too coarse: {0}")]
    MeshTooCoarse(String),
    #[error("domain truncation too tight: Q = {q1} at r_inf, {q2} at 2 r_inf (tol {tol})")]
    TruncationTooTight { q1: f64, q2: f64, tol: f64 },
    #[error(
        "boundary weight diverges like distance^(-{exponent}); a plain end rule cannot resolve it"
    )]
    UnresolvedBoundaryWeight { exponent: f64 },
    #[error("operator set does not support this operation: {0}")]
    Unsupported(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Which gradient-term coefficient the scalar radial form uses.  `Standard` is
/// the adiabatic wave form coefficient γP r⁴; `RhoWeighted` replaces P by ρ.
/// Both give a nonnegative gradient term, so the δ* lower bound holds either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialVariant {
    Standard,
    RhoWeighted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorMeta {
    pub kind: String,
    pub m: i32,
    pub cowling: bool,
    pub ns: usize,
    pub nzeta: usize,
    pub ndof: usize,
    pub model_id: String,
    pub gamma: f64,
    pub rho_o: f64,
    pub g_const: f64,
    pub omega: f64,
    pub variant: Option<String>,
}

/// Per-node quadrature data kept with an axisymmetric vector set, enough to
/// re-evaluate the quadratic form term by term and to rebuild the coefficient
/// suprema.
pub struct AxisymData {
    /// volume weight per node (2π s² R³ × radial × angular weights)
    pub vol_w: Array1<f64>,
    /// γP/ρ² per node
    pub w_g: Array1<f64>,
    /// γP𝒜/ρ per node (cross-term coefficient)
    pub w_x: Array1<f64>,
    /// γP𝒜‖gradρ‖/ρ per node (projection-term coefficient)
    pub w_a: Array1<f64>,
    pub rho: Array1<f64>,
    /// g = div(ρu) at nodes: g = C u
    pub c_div: Array2<c64>,
    /// p = (u|n) at nodes: p = N u
    pub n_proj: Array2<f64>,
    /// self-gravity Gram on displacement vectors: uᴴ·gravity·v ≈
    /// ∫𝒦[div(ρu)]div(ρv)*; hermitian, positive semidefinite, vanishing on
    /// discretely divergence-free fields, and dominated by the compressibility
    /// Gram exactly: 4πG·uᴴ·gravity·u ≤ Σ ω (γP/ρ²)|div(ρu)|² (see the
    /// assembly comment)
    pub gravity: Array2<c64>,
}

pub struct DiscreteOperatorSet {
    /// diagonal of the hermitian positive mass matrix
    pub m_diag: Array1<f64>,
    pub l: Array2<c64>,
    pub b: Array2<c64>,
    /// Gram of ∫(γP/ρ²)|div(ρu)|²
    pub g_seminorm: Array2<c64>,
    pub r_nodes: Vec<f64>,
    pub zeta_nodes: Vec<f64>,
    pub meta: OperatorMeta,
    pub data: Option<AxisymData>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundConstants {
    pub kappa1: f64,
    pub kappa2: f64,
    pub a: f64,
    pub lower_bound: f64,
    pub m_star_discrete: f64,
    pub beta: f64,
}

fn fro_norm(a: &Array2<c64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl DiscreteOperatorSet {
    pub fn ndof(&self) -> usize {
        self.m_diag.len()
    }

    /// M^{-1/2} A M^{-1/2} for the diagonal mass.
    pub fn whitened(&self, a: &Array2<c64>) -> Array2<c64> {
        let n = self.ndof();
        let inv_sqrt: Vec<f64> = self.m_diag.iter().map(|&m| 1.0 / m.sqrt()).collect();
        let mut out = a.clone();
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] *= inv_sqrt[i] * inv_sqrt[j];
            }
        }
        out
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let d = &self.l - &self.l.t().mapv(|z| z.conj());
        fro_norm(&d) / fro_norm(&self.l).max(f64::MIN_POSITIVE)
    }

    pub fn skew_defect(&self) -> f64 {
        let bn = fro_norm(&self.b);
        if bn == 0.0 {
            return 0.0;
        }
        let d = &self.b + &self.b.t().mapv(|z| z.conj());
        fro_norm(&d) / bn
    }

    pub fn mass_quad(&self, u: &Array1<c64>) -> f64 {
        u.iter()
            .zip(self.m_diag.iter())
            .map(|(z, &m)| m * z.norm_sqr())
            .sum()
    }

    /// ∫𝒦[g]g* for g = div(ρu); zero for sets without stored quadrature data.
    pub fn gravity_quad(&self, u: &Array1<c64>) -> f64 {
        match &self.data {
            None => 0.0,
            Some(d) => {
                let gu = d.gravity.dot(u);
                u.iter()
                    .zip(gu.iter())
                    .map(|(x, y)| (x.conj() * *y).re)
                    .sum()
            }
        }
    }

    pub fn quad_form(&self, a: &Array2<c64>, u: &Array1<c64>) -> c64 {
        let au = a.dot(u);
        u.iter().zip(au.iter()).map(|(x, y)| x.conj() * *y).sum()
    }
}

/// Plain-weight radial rule on (0,1) clustering like the Jacobi weight
/// (1-s)^alpha s^beta: nodes s_i and weights v_i with Σ v_i F(s_i) ≈ ∫₀¹ F ds.
fn radial_rule(ns: usize, alpha: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_jacobi(ns, alpha, beta);
    let mut s = Vec::with_capacity(ns);
    let mut v = Vec::with_capacity(ns);
    for i in 0..ns {
        let si = 0.5 * (x[i] + 1.0);
        let wf = (2.0 * (1.0 - si)).powf(alpha) * (2.0 * si).powf(beta);
        s.push(si);
        v.push(w[i] / (2.0 * wf));
    }
    (s, v)
}

// ---------------------------------------------------------------------------
// scalar radial set (spherical, lowest spherical-harmonic channel)
// ---------------------------------------------------------------------------

/// Assemble the scalar radial operator pair: stiffness
/// ∫(c_g |dy/dr|² − (3γ−4)(1/r)(dΥ/dr)ρr⁴ |y|²) dr with mass ∫|y|²ρr⁴dr,
/// where c_g = γP r⁴ (`Standard`) or γρ r⁴ (`RhoWeighted`).  Natural boundary
/// condition at r = R; regularity at the center is enforced by the r⁴ weight.
pub fn assemble_radial_ss(
    model: &StellarModel,
    ns: usize,
    variant: RadialVariant,
) -> Result<DiscreteOperatorSet, OperatorError> {
    if !model.is_spherical() || !model.isentropic {
        return Err(OperatorError::Unsupported(
            "scalar radial set needs a spherical isentropic model".into(),
        ));
    }
    if ns < 8 {
        return Err(OperatorError::MeshTooCoarse(format!(
            "{ns} radial nodes cannot resolve the ρr⁴ weight"
        )));
    }
    let gamma = model.eos.gamma;
    let npoly = model.index.n;
    let rb = model.r_boundary;
    let (s, v) = radial_rule(ns, npoly, 4.0);
    let r: Vec<f64> = s.iter().map(|&si| si * rb).collect();
    let w: Vec<f64> = v.iter().map(|&vi| vi * rb).collect();

    let mut rho = vec![0.0; ns];
    let mut cg = vec![0.0; ns];
    let mut pot = vec![0.0; ns];
    let mut mass = Array1::<f64>::zeros(ns);
    for i in 0..ns {
        rho[i] = model.rho_at(r[i], 0.0);
        let p = model.p_at(r[i], 0.0);
        let dup = model.grad_upsilon(r[i], 0.0).0;
        let r4 = r[i].powi(4);
        cg[i] = gamma
            * match variant {
                RadialVariant::Standard => p,
                RadialVariant::RhoWeighted => rho[i],
            }
            * r4;
        pot[i] = -(3.0 * gamma - 4.0) * dup / r[i] * rho[i] * r4;
        mass[i] = w[i] * rho[i] * r4;
    }

    // quadrature fidelity check against an independent integral of the weight
    let quad_mass: f64 = mass.sum();
    let f = |rr: f64| model.rho_at(rr, 0.0) * rr.powi(4);
    let ref_mass = adaptive_simpson(&f, 0.0, rb, 1e-10 * quad_mass.abs().max(1.0));
    if (quad_mass - ref_mass).abs() > 1e-3 * ref_mass.abs() {
        return Err(OperatorError::MeshTooCoarse(format!(
            "ρr⁴ quadrature defect {} vs reference {}",
            quad_mass, ref_mass
        )));
    }

    let d = diff_matrix(&r);
    let mut grad = Array2::<f64>::zeros((ns, ns));
    for i in 0..ns {
        for j in 0..ns {
            let mut acc = 0.0;
            for q in 0..ns {
                acc += d[[q, i]] * w[q] * cg[q] * d[[q, j]];
            }
            grad[[i, j]] = acc;
        }
    }
    let mut l = grad.mapv(|x| c64::new(x, 0.0));
    for i in 0..ns {
        l[[i, i]] += c64::new(w[i] * pot[i], 0.0);
    }

    let meta = OperatorMeta {
        kind: "radial_ss".into(),
        m: 0,
        cowling: false,
        ns,
        nzeta: 1,
        ndof: ns,
        model_id: format!("spherical-gamma{:.6}", gamma),
        gamma,
        rho_o: model.rho_o,
        g_const: model.g_const,
        omega: 0.0,
        variant: Some(
            match variant {
                RadialVariant::Standard => "standard",
                RadialVariant::RhoWeighted => "rho-weighted",
            }
            .into(),
        ),
    };
    Ok(DiscreteOperatorSet {
        m_diag: mass,
        l,
        b: Array2::zeros((ns, ns)),
        g_seminorm: grad.mapv(|x| c64::new(x, 0.0)),
        r_nodes: r,
        zeta_nodes: vec![0.0],
        meta,
        data: None,
    })
}

// ---------------------------------------------------------------------------
// potential-channel quadratic form per spherical-harmonic degree
// ---------------------------------------------------------------------------

pub struct QlmForm {
    pub ell: usize,
    pub r: Vec<f64>,
    pub h: f64,
    pub r_star: f64,
    pub r_inf: f64,
    /// 3-point conservative radial Laplacian with the ℓ-barrier and a decay
    /// closure at r_inf matching r^(−ℓ−1)
    pub lap: Array2<f64>,
    /// dΥ/dρ at the nodes (zero outside the star)
    pub dup_drho: Vec<f64>,
    /// dρ/dΥ at the nodes (zero outside the star)
    pub drho_dup: Vec<f64>,
    /// trapezoid weights (without the r² factor)
    pub w: Vec<f64>,
    /// full symmetric form matrix: Ψᴴ·stiffness·Ψ = Q_ℓ[Ψ]
    pub stiffness: Array2<f64>,
    /// Gram of ∫‖∇^(ℓ)Ψ‖² r²dr including the analytic exterior tail
    pub grad_gram: Array2<f64>,
    pub g_newton: f64,
}

/// Discretize Q_ℓ[Ψ] = ∫((dΥ/dρ)|Δ^(ℓ)Ψ|² − 4πG‖∇^(ℓ)Ψ‖²)r²dr on a uniform
/// grid over [0, r_inf], with the first term restricted to the stellar support
/// (outside the star the admissible source Δ^(ℓ)Ψ vanishes identically).
pub fn assemble_qlm(
    model: &StellarModel,
    ell: usize,
    nr: usize,
    r_inf_factor: f64,
) -> Result<QlmForm, OperatorError> {
    if !model.is_spherical() {
        return Err(OperatorError::Unsupported(
            "potential-channel forms are built on spherical models".into(),
        ));
    }
    if nr < 16 {
        return Err(OperatorError::MeshTooCoarse(format!("{nr} nodes").to_string()));
    }
    let r_star = model.r_boundary;
    let r_inf = r_inf_factor * r_star;
    let h = r_inf / (nr - 1) as f64;
    let r: Vec<f64> = (0..nr).map(|k| k as f64 * h).collect();
    let ll = (ell * (ell + 1)) as f64;

    let mut lap = Array2::<f64>::zeros((nr, nr));
    for k in 1..nr - 1 {
        let rk = r[k];
        let am = (rk - 0.5 * h).powi(2) / (h * h * rk * rk);
        let ap = (rk + 0.5 * h).powi(2) / (h * h * rk * rk);
        lap[[k, k - 1]] = am;
        lap[[k, k + 1]] = ap;
        lap[[k, k]] = -am - ap - ll / (rk * rk);
    }
    if ell == 0 {
        // Δw(0) = 6(w₁−w₀)/h² for an even regular profile
        lap[[0, 0]] = -6.0 / (h * h);
        lap[[0, 1]] = 6.0 / (h * h);
    }
    // (for ℓ ≥ 1 the center row stays zero: Ψ(0) = 0 and the node carries no
    // r²-weight in any of the forms)
    {
        let k = nr - 1;
        let rk = r[k];
        let am = (rk - 0.5 * h).powi(2) / (h * h * rk * rk);
        let ap = (rk + 0.5 * h).powi(2) / (h * h * rk * rk);
        // ghost value from the decay law Ψ ∝ r^(−ℓ−1)
        let gfac = (rk / (rk + h)).powi(ell as i32 + 1);
        lap[[k, k - 1]] = am;
        lap[[k, k]] = -am - ap - ll / (rk * rk) + ap * gfac;
    }

    let mut dup_drho = vec![0.0; nr];
    let mut drho_dup = vec![0.0; nr];
    for k in 0..nr {
        let rho = model.rho_at(r[k], 0.0);
        if rho > 0.0 {
            dup_drho[k] = model.eos.dupsilon_drho(rho);
            drho_dup[k] = 1.0 / dup_drho[k];
        }
    }

    let mut w = vec![h; nr];
    w[0] = 0.5 * h;
    w[nr - 1] = 0.5 * h;

    // ∫‖∇^(ℓ)Ψ‖²r²dr: cell-midpoint gradient part + ℓ-barrier part (the r²
    // weight cancels against the 1/r² of the barrier) + the analytic tail of a
    // pure decay solution beyond r_inf
    let mut gg = Array2::<f64>::zeros((nr, nr));
    for k in 0..nr - 1 {
        let rm = 0.5 * (r[k] + r[k + 1]);
        let c = rm * rm / h;
        gg[[k, k]] += c;
        gg[[k + 1, k + 1]] += c;
        gg[[k, k + 1]] -= c;
        gg[[k + 1, k]] -= c;
    }
    for k in 0..nr {
        gg[[k, k]] += ll * w[k];
    }
    gg[[nr - 1, nr - 1]] += (ell as f64 + 1.0) * r_inf;

    let mut stiff = Array2::<f64>::zeros((nr, nr));
    for i in 0..nr {
        for j in 0..nr {
            let mut acc = 0.0;
            for k in 0..nr {
                if dup_drho[k] == 0.0 {
                    continue;
                }
                acc += lap[[k, i]] * w[k] * dup_drho[k] * r[k] * r[k] * lap[[k, j]];
            }
            stiff[[i, j]] = acc - FOUR_PI * model.g_const * gg[[i, j]];
        }
    }

    Ok(QlmForm {
        ell,
        r,
        h,
        r_star,
        r_inf,
        lap,
        dup_drho,
        drho_dup,
        w,
        stiffness: stiff,
        grad_gram: gg,
        g_newton: model.g_const,
    })
}

impl QlmForm {
    pub fn q_value(&self, psi: &[f64]) -> f64 {
        let n = psi.len();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += psi[i] * self.stiffness[[i, j]] * psi[j];
            }
        }
        q
    }

    /// Apply w ↦ −Δ^(ℓ)w − 4πG(dρ/dΥ)w at the nodes.
    pub fn p_apply(&self, wv: &[f64]) -> Vec<f64> {
        let n = wv.len();
        let mut out = vec![0.0; n];
        for k in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.lap[[k, j]] * wv[j];
            }
            out[k] = -acc - FOUR_PI * self.g_newton * self.drho_dup[k] * wv[k];
        }
        out
    }
}

/// Check that doubling the exterior truncation radius does not move the form
/// value of the supplied potential channel beyond `tol` (relative).
pub fn qlm_truncation_check(
    model: &StellarModel,
    ell: usize,
    nr: usize,
    psi_of: &dyn Fn(&QlmForm) -> Vec<f64>,
    tol: f64,
) -> Result<(f64, f64), OperatorError> {
    let near = assemble_qlm(model, ell, nr, 3.0)?;
    let far = assemble_qlm(model, ell, 2 * nr - 1, 6.0)?;
    let q1 = near.q_value(&psi_of(&near));
    let q2 = far.q_value(&psi_of(&far));
    let scale = q1.abs().max(q2.abs()).max(1e-300);
    if (q1 - q2).abs() > tol * scale {
        return Err(OperatorError::TruncationTooTight { q1, q2, tol });
    }
    Ok((q1, q2))
}

// ---------------------------------------------------------------------------
// axisymmetric vector set
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct AxisymOptions {
    pub ns: usize,
    pub nzeta: usize,
    pub cowling: bool,
    /// use boundary-weighted radial end panels (required while γ < 2)
    pub weighted_endpoint: bool,
    /// radial trial functions per degree in the self-gravity potential space
    pub gravity_nr: usize,
    /// highest spherical-harmonic degree in the self-gravity trial space
    /// (0 = auto)
    pub gravity_lmax: usize,
}

impl Default for AxisymOptions {
    fn default() -> Self {
        AxisymOptions {
            ns: 18,
            nzeta: 12,
            cowling: false,
            weighted_endpoint: true,
            gravity_nr: 24,
            gravity_lmax: 0,
        }
    }
}

/// Chebyshev values T_k(x) and derivatives T'_k(x), k = 0..kmax-1.
fn cheb_t_and_deriv(kmax: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let mut t = vec![0.0; kmax];
    let mut d = vec![0.0; kmax];
    if kmax > 0 {
        t[0] = 1.0;
    }
    if kmax > 1 {
        t[1] = x;
        d[1] = 1.0;
    }
    for k in 2..kmax {
        t[k] = 2.0 * x * t[k - 1] - t[k - 2];
        d[k] = 2.0 * t[k - 1] + 2.0 * x * d[k - 1] - d[k - 2];
    }
    (t, d)
}

/// d/dζ of the orthonormalized associated Legendre value, from
/// (1-ζ²) dP̄ℓm/dζ = -ℓζ P̄ℓm + √((ℓ²-m²)(2ℓ+1)/(2ℓ-1)) P̄(ℓ-1)m.
fn assoc_legendre_norm_deriv(ell: usize, m: usize, x: f64) -> f64 {
    let l = ell as f64;
    let mut v = -l * x * assoc_legendre_norm(ell, m, x);
    if ell > m {
        let c = ((l * l - (m * m) as f64) * (2.0 * l + 1.0) / (2.0 * l - 1.0)).sqrt();
        v += c * assoc_legendre_norm(ell - 1, m, x);
    }
    v / (1.0 - x * x)
}

/// Assemble the vector operator set for azimuthal wavenumber `m`: unknowns are
/// the spherical components (u^r, u^ϑ, u^φ) at the (s, ζ) tensor nodes, with
/// fixed e^{imφ} dependence.  The stiffness is built from the four-term
/// quadratic form, the Coriolis matrix pointwise from 2Ω ẑ×u with
/// ẑ = ζ e_r − sinϑ e_ϑ, and the self-gravity block variationally from a
/// trial-potential dictionary (see the assembly comment for the exact bound).
pub fn assemble_axisym_set(
    model: &StellarModel,
    m: i32,
    opts: &AxisymOptions,
) -> Result<DiscreteOperatorSet, OperatorError> {
    let gamma = model.eos.gamma;
    if !opts.weighted_endpoint {
        return Err(OperatorError::UnresolvedBoundaryWeight {
            exponent: (2.0 - gamma) / (gamma - 1.0),
        });
    }
    let ns = opts.ns;
    let nz = opts.nzeta;
    if ns < 6 || nz < 4 {
        return Err(OperatorError::MeshTooCoarse(format!("ns={ns} nzeta={nz}")));
    }
    let nq = ns * nz;
    let ndof = 3 * nq;
    let npoly = model.index.n;

    let (zeta, wz) = gauss_legendre(nz);
    let (s, v) = radial_rule(ns, npoly, 2.0);

    // boundary curve and its ζ-derivative (for the mapped ∂ζ at fixed r)
    let mut rb = vec![0.0; nz];
    let mut drb = vec![0.0; nz];
    for j in 0..nz {
        rb[j] = model.boundary_at(zeta[j]);
        let hz = 1e-5;
        let zp = (zeta[j] + hz).min(1.0 - 1e-12);
        let zm = (zeta[j] - hz).max(-1.0 + 1e-12);
        drb[j] = (model.boundary_at(zp) - model.boundary_at(zm)) / (zp - zm);
    }

    // node fields
    let idx = |i: usize, j: usize| j * ns + i;
    let col = |comp: usize, q: usize| comp * nq + q;
    let mut vol_w = Array1::<f64>::zeros(nq);
    let mut w_g = Array1::<f64>::zeros(nq);
    let mut w_x = Array1::<f64>::zeros(nq);
    let mut w_a = Array1::<f64>::zeros(nq);
    let mut rho = Array1::<f64>::zeros(nq);
    let mut n_r = vec![0.0; nq];
    let mut n_t = vec![0.0; nq];
    for j in 0..nz {
        for i in 0..ns {
            let q = idx(i, j);
            let r = s[i] * rb[j];
            let rh = model.rho_at(r, zeta[j]);
            if !(rh > 0.0) {
                return Err(OperatorError::MeshTooCoarse(format!(
                    "vanishing density at interior node r={r} ζ={}",
                    zeta[j]
                )));
            }
            let p = model.p_at(r, zeta[j]);
            rho[q] = rh;
            vol_w[q] = TWO_PI * v[i] * wz[j] * s[i] * s[i] * rb[j].powi(3);
            w_g[q] = gamma * p / (rh * rh);
            if !model.isentropic {
                let aa = model.discriminant_at(r, zeta[j]);
                let (gr, gt) = model.grad_rho(r, zeta[j]);
                let ngr = (gr * gr + gt * gt).sqrt();
                if ngr > 1e-14 * model.rho_o / model.a_scale {
                    n_r[q] = gr / ngr;
                    n_t[q] = gt / ngr;
                    w_x[q] = gamma * p * aa / rh;
                    w_a[q] = gamma * p * aa * ngr / rh;
                }
            }
        }
    }

    let ds = diff_matrix(&s);
    let dz = diff_matrix(&zeta);

    // divergence matrix: g = (1/r²)∂r(r²ρu^r) − (1/r)∂ζ|_r(√(1−ζ²)ρu^ϑ)
    //                      + (im/(r√(1−ζ²)))ρu^φ,   with ∂ζ|_r = ∂ζ − s(R'/R)∂s.
    // Radial flux differencing of s²ρu^r keeps the ray-wise radial contribution
    // a pure derivative, so its plain-rule integral telescopes to boundary
    // values where ρ vanishes (discrete zero-mean up to quadrature accuracy).
    let mut c_div = Array2::<c64>::zeros((nq, ndof));
    for j in 0..nz {
        let st_j = (1.0 - zeta[j] * zeta[j]).sqrt();
        for i in 0..ns {
            let q = idx(i, j);
            let rq = s[i] * rb[j];
            // radial term
            for i2 in 0..ns {
                let coef = ds[[i, i2]] * s[i2] * s[i2] * rho[idx(i2, j)] / (s[i] * s[i] * rb[j]);
                c_div[[q, col(0, idx(i2, j))]] += c64::new(coef, 0.0);
            }
            // latitudinal term
            for j2 in 0..nz {
                let st2 = (1.0 - zeta[j2] * zeta[j2]).sqrt();
                let coef = -dz[[j, j2]] * st2 * rho[idx(i, j2)] / rq;
                c_div[[q, col(1, idx(i, j2))]] += c64::new(coef, 0.0);
            }
            let slope = s[i] * drb[j] / rb[j];
            for i2 in 0..ns {
                let coef = slope * ds[[i, i2]] * st_j * rho[idx(i2, j)] / rq;
                c_div[[q, col(1, idx(i2, j))]] += c64::new(coef, 0.0);
            }
            // azimuthal term
            let coef = m as f64 * rho[q] / (rq * st_j);
            c_div[[q, col(2, q)]] += c64::new(0.0, coef);
        }
    }

    // density-aligned projection p = (u|n)
    let mut n_proj = Array2::<f64>::zeros((nq, ndof));
    for q in 0..nq {
        n_proj[[q, col(0, q)]] = n_r[q];
        n_proj[[q, col(1, q)]] = n_t[q];
    }

    // Self-gravity Gram by duality through the source g = div(ρu).  For trial
    // potentials Ψ̃ in a finite dictionary {Φ_a} the value of the Gram is
    //     uᴴΓu = max_c [ 2 Re⟨Ψ̃_c, g⟩_ω − E(c) ],
    // where g is the discrete divergence Cu, ⟨·,·⟩_ω is this set's node rule,
    // and E(c) is the field energy ‖gradΨ̃_c‖²_{L²(R³)}: an accurate per-ray
    // quadrature inside the star, plus the boundary-to-sphere gap and the
    // exact harmonic exterior.  For smooth fields the value converges to
    // ∫𝒦[div(ρu)]div(ρu)* from below as the dictionary grows.  Because the
    // pairing factors through the node values of g,
    //     Γ = Cᴴ Q C   with   Q = Vᴴ E⁺ V   (V the ω-weighted value map),
    // so discretely divergence-free fields carry exactly zero self-gravity
    // energy.  The two-sided bound
    //     0 ≤ 4πG·uᴴΓu ≤ Σ_q ω_q (γP/ρ²)_q |g_q|²
    // — which makes the stiffness form positive semidefinite for isentropic
    // backgrounds at the matrix level — is equivalent to
    //     λmax(4πG·D^{−1/2} Q D^{−1/2}) ≤ 1,  D = diag(ω_q (γP/ρ²)_q),
    // the eigenvalues of that quotient matrix being the discrete image of the
    // gravity-to-compressibility Rayleigh quotient, which is below one on
    // admissible backgrounds for resolved sources; the quotient matrix is
    // eigen-clipped at one (see below), so the bound holds exactly for the
    // shipped matrix.  Dictionary: Φ = T_k(2r/r_max−1)·P̄ℓ|m|(ζ)·e^{imφ}
    // inside the bounding sphere, continued by the decaying harmonic with
    // matched value, clamped to the node grid's resolution so every element is
    // grid-resolved (finer elements would alias in the node-value pairing).
    let kr = opts.gravity_nr.max(8).min(ns);
    let lmax = (if opts.gravity_lmax > 0 {
        opts.gravity_lmax
    } else {
        m.unsigned_abs() as usize + nz - 1
    })
    .min(m.unsigned_abs() as usize + nz - 1);
    let mam = m.unsigned_abs() as usize;
    let nch = lmax - mam + 1;
    let ktot = nch * kr;
    let r_max = rb.iter().cloned().fold(0.0, f64::max);
    let mf = m as f64;

    // each dictionary element at a point (r, ζ): its value vl and the gradient
    // components (e_r factor, e_ϑ factor, and the real factor gp whose e_φ
    // component is i·gp)
    let grad_dict = |r: f64,
                     zj: f64,
                     vl: &mut [f64],
                     gr: &mut [f64],
                     gt: &mut [f64],
                     gp: &mut [f64]| {
        let st = (1.0 - zj * zj).sqrt();
        let (tv, td) = cheb_t_and_deriv(kr, 2.0 * r / r_max - 1.0);
        for (ch, ell) in (mam..=lmax).enumerate() {
            let pl = assoc_legendre_norm(ell, mam, zj);
            let pld = assoc_legendre_norm_deriv(ell, mam, zj);
            for k in 0..kr {
                let a = ch * kr + k;
                vl[a] = tv[k] * pl;
                gr[a] = td[k] * (2.0 / r_max) * pl;
                gt[a] = -st / r * tv[k] * pld;
                gp[a] = mf * tv[k] * pl / (r * st);
            }
        }
    };

    // ω-weighted node values of the dictionary (the value map V)
    let mut v_weighted = Array2::<c64>::zeros((ktot, nq));
    let mut vl = vec![0.0; ktot];
    let mut gr = vec![0.0; ktot];
    let mut gt = vec![0.0; ktot];
    let mut gp = vec![0.0; ktot];
    for j in 0..nz {
        for i in 0..ns {
            let q = idx(i, j);
            grad_dict(s[i] * rb[j], zeta[j], &mut vl, &mut gr, &mut gt, &mut gp);
            for a in 0..ktot {
                v_weighted[[a, q]] = c64::new(vol_w[q] * vl[a], 0.0);
            }
        }
    }
    // accurate per-ray field energy inside the star
    let mut g_energy = Array2::<f64>::zeros((ktot, ktot));
    {
        let ngl = 2 * ns.max(kr);
        let (ax, aw) = gauss_legendre(ngl);
        for j in 0..nz {
            let half = 0.5 * rb[j];
            for g in 0..ngl {
                let r = half * (ax[g] + 1.0);
                let wq = TWO_PI * wz[j] * half * aw[g] * r * r;
                grad_dict(r, zeta[j], &mut vl, &mut gr, &mut gt, &mut gp);
                for a in 0..ktot {
                    for a2 in 0..=a {
                        g_energy[[a, a2]] +=
                            wq * (gr[a] * gr[a2] + gt[a] * gt[a2] + gp[a] * gp[a2]);
                    }
                }
            }
        }
    }

    // gap between the stellar surface and the bounding sphere (empty for a
    // spherical model)
    let (gpx, gpw) = gauss_legendre(8);
    for j in 0..nz {
        if rb[j] >= r_max * (1.0 - 1e-12) {
            continue;
        }
        let half = 0.5 * (r_max - rb[j]);
        let mid = 0.5 * (r_max + rb[j]);
        for g in 0..gpx.len() {
            let r = mid + half * gpx[g];
            let wq = TWO_PI * wz[j] * half * gpw[g] * r * r;
            grad_dict(r, zeta[j], &mut vl, &mut gr, &mut gt, &mut gp);
            for a in 0..ktot {
                for a2 in 0..=a {
                    g_energy[[a, a2]] += wq * (gr[a] * gr[a2] + gt[a] * gt[a2] + gp[a] * gp[a2]);
                }
            }
        }
    }
    // exact exterior energy of the harmonic continuation; T_k(1) = 1, so the
    // matched boundary value of every radial element is 1
    for (ch, ell) in (mam..=lmax).enumerate() {
        let e = TWO_PI * (ell as f64 + 1.0) * r_max;
        for k in 0..kr {
            for k2 in 0..kr {
                let (a, a2) = (ch * kr + k, ch * kr + k2);
                if a2 <= a {
                    g_energy[[a, a2]] += e;
                }
            }
        }
    }
    for a in 0..ktot {
        for a2 in 0..a {
            g_energy[[a2, a]] = g_energy[[a, a2]];
        }
    }
    // Q = Vᴴ E⁺ V with a spectral pseudo-inverse of the energy Gram; dropping
    // near-null energy directions only shrinks the attained maximum, so every
    // upper bound on the maximization survives the regularization
    let (evals, evecs) = g_energy
        .eigh(UPLO::Lower)
        .map_err(|e| OperatorError::Linalg(e.to_string()))?;
    let emax = evals.iter().cloned().fold(0.0, f64::max);
    // square roots of the compressibility diagonal D
    let mut d_sqrt = vec![0.0; nq];
    for q in 0..nq {
        let d = vol_w[q] * w_g[q];
        if !(d > 0.0) {
            return Err(OperatorError::Unsupported(
                "nonpositive compressibility weight at an interior node".into(),
            ));
        }
        d_sqrt[q] = d.sqrt();
    }
    let gfac = FOUR_PI * model.g_const;
    // quotient matrix S = 4πG·D^{−1/2} Q D^{−1/2}
    let mut s_mat = Array2::<f64>::zeros((nq, nq));
    for e in 0..ktot {
        if evals[e] > 1e-12 * emax {
            let scale = 1.0 / evals[e].sqrt();
            let mut srow = vec![0.0; nq];
            for a in 0..ktot {
                let vae = evecs[[a, e]];
                if vae != 0.0 {
                    for q in 0..nq {
                        srow[q] += vae * scale * v_weighted[[a, q]].re;
                    }
                }
            }
            for q in 0..nq {
                srow[q] *= gfac.sqrt() / d_sqrt[q];
            }
            for q1 in 0..nq {
                if srow[q1] == 0.0 {
                    continue;
                }
                for q2 in 0..=q1 {
                    s_mat[[q1, q2]] += srow[q1] * srow[q2];
                }
            }
        }
    }
    for q1 in 0..nq {
        for q2 in 0..q1 {
            s_mat[[q2, q1]] = s_mat[[q1, q2]];
        }
    }
    // In the axisymmetric sector the continuum source carries no net mass:
    // the volume integral of div(ρu) is the outward mass flux through the
    // surface, which vanishes because the density does.  Discrete sources leak
    // into the mass direction through quadrature error only, yet a
    // mass-adding source has large self-gravity relative to its
    // compressibility cost (quotient ≈ 4 here versus < 1 on the mass-free
    // complement), so the mass functional Σ_q ω_q g_q is projected out of the
    // quotient matrix before clipping.  For m ≠ 0 the functional is zero
    // identically (the azimuthal factor integrates away) and no projection is
    // applied.
    if m == 0 {
        let mut mass = Array1::<f64>::zeros(nq);
        for q in 0..nq {
            mass[q] = vol_w[q] / d_sqrt[q];
        }
        let norm = mass.dot(&mass).sqrt();
        if norm > 0.0 {
            mass.mapv_inplace(|x| x / norm);
            let sm = s_mat.dot(&mass);
            let msm = mass.dot(&sm);
            for q1 in 0..nq {
                for q2 in 0..nq {
                    s_mat[[q1, q2]] +=
                        -sm[q1] * mass[q2] - mass[q1] * sm[q2] + msm * mass[q1] * mass[q2];
                }
            }
        }
    }
    // Eigen-clip S at one: resolved mass-free source directions sit at the
    // sub-unit discrete quotient constant and pass through unchanged, while
    // any direction pushed above one by quadrature error is capped at exact
    // marginality, which places it in the discrete kernel of the isentropic
    // stiffness form instead of making it indefinite.
    let (svals, svecs) = s_mat
        .eigh(UPLO::Lower)
        .map_err(|e| OperatorError::Linalg(e.to_string()))?;
    // Γ = Cᴴ D^{1/2} U diag(min(s,1)/4πG) Uᴴ D^{1/2} C, assembled from the
    // clipped rows t_e = √(min(s_e,1)/4πG)·(D^{1/2}u_e)ᵀ C
    let mut t_mat = Array2::<c64>::zeros((nq, nq));
    for e in 0..nq {
        let se = svals[e].min(1.0);
        if se <= 0.0 {
            continue;
        }
        let f = (se / gfac).sqrt();
        for q in 0..nq {
            t_mat[[e, q]] = c64::new(f * svecs[[q, e]] * d_sqrt[q], 0.0);
        }
    }
    let t_c = t_mat.dot(&c_div);
    let mut gravity = t_c.t().mapv(|z| z.conj()).dot(&t_c);
    // hermitize away accumulation roundoff
    for i in 0..ndof {
        for j2 in 0..i {
            let a = (gravity[[i, j2]] + gravity[[j2, i]].conj()) * 0.5;
            gravity[[i, j2]] = a;
            gravity[[j2, i]] = a.conj();
        }
        gravity[[i, i]] = c64::new(gravity[[i, i]].re, 0.0);
    }

    // mass diagonal
    let mut m_diag = Array1::<f64>::zeros(ndof);
    for q in 0..nq {
        let mq = vol_w[q] * rho[q];
        for comp in 0..3 {
            m_diag[col(comp, q)] = mq;
        }
    }

    // stiffness from the quadratic form, term by term
    let c_herm = c_div.t().mapv(|z| z.conj());
    let scale_rows = |mat: &Array2<c64>, w: &Array1<f64>| -> Array2<c64> {
        let mut out = mat.clone();
        for q in 0..nq {
            let f = c64::new(w[q], 0.0);
            for j in 0..ndof {
                out[[q, j]] *= f;
            }
        }
        out
    };
    let wg_row: Array1<f64> = (0..nq).map(|q| vol_w[q] * w_g[q]).collect();
    let g_seminorm = c_herm.dot(&scale_rows(&c_div, &wg_row));
    let mut l = g_seminorm.clone();
    if !model.isentropic {
        let n_c = n_proj.mapv(|x| c64::new(x, 0.0));
        let wx_row: Array1<f64> = (0..nq).map(|q| vol_w[q] * w_x[q]).collect();
        let cross = n_c.t().mapv(|z| z.conj()).dot(&scale_rows(&c_div, &wx_row));
        l = l + &cross + &cross.t().mapv(|z| z.conj());
        let wa_row: Array1<f64> = (0..nq).map(|q| vol_w[q] * w_a[q]).collect();
        let proj = n_c.t().mapv(|z| z.conj()).dot(&scale_rows(&n_c, &wa_row));
        l = l - proj;
    }
    if !opts.cowling {
        let gfac = c64::new(FOUR_PI * model.g_const, 0.0);
        l = l - gravity.mapv(|z| z * gfac);
    }

    // Coriolis: pointwise 2Ω ẑ×u (rigid part of the rotation law; shear terms
    // of a differential law are outside this operator's scope)
    let mut b = Array2::<c64>::zeros((ndof, ndof));
    let omega = model.rotation.omega;
    if omega != 0.0 {
        for j in 0..nz {
            let st = (1.0 - zeta[j] * zeta[j]).sqrt();
            for i in 0..ns {
                let q = idx(i, j);
                let f = vol_w[q] * rho[q] * 2.0 * omega;
                b[[col(0, q), col(2, q)]] = c64::new(-f * st, 0.0);
                b[[col(1, q), col(2, q)]] = c64::new(-f * zeta[j], 0.0);
                b[[col(2, q), col(0, q)]] = c64::new(f * st, 0.0);
                b[[col(2, q), col(1, q)]] = c64::new(f * zeta[j], 0.0);
            }
        }
    }

    let r_nodes: Vec<f64> = s.iter().map(|&si| si * r_max).collect();
    let meta = OperatorMeta {
        kind: "axisym".into(),
        m,
        cowling: opts.cowling,
        ns,
        nzeta: nz,
        ndof,
        model_id: format!(
            "{}-gamma{:.6}-omega{:.6}",
            if model.is_spherical() { "spherical" } else { "rotating" },
            gamma,
            omega
        ),
        gamma,
        rho_o: model.rho_o,
        g_const: model.g_const,
        omega,
        variant: None,
    };
    Ok(DiscreteOperatorSet {
        m_diag,
        l,
        b,
        g_seminorm,
        r_nodes,
        zeta_nodes: zeta,
        meta,
        data: Some(AxisymData {
            vol_w,
            w_g,
            w_x,
            w_a,
            rho,
            c_div,
            n_proj,
            gravity,
        }),
    })
}

/// Evaluate the four-term quadratic form directly from the stored node data
/// (independent accumulation path; must agree with uᴴLv to roundoff).
pub fn evaluate_q0(
    set: &DiscreteOperatorSet,
    u: &Array1<c64>,
    v: &Array1<c64>,
) -> Result<c64, OperatorError> {
    let data = set
        .data
        .as_ref()
        .ok_or_else(|| OperatorError::Unsupported("no quadrature data stored".into()))?;
    let gu = data.c_div.dot(u);
    let gv = data.c_div.dot(v);
    let nq = gu.len();
    let pu: Vec<c64> = (0..nq)
        .map(|q| {
            (0..set.ndof())
                .map(|j| c64::new(data.n_proj[[q, j]], 0.0) * u[j])
                .sum()
        })
        .collect();
    let pv: Vec<c64> = (0..nq)
        .map(|q| {
            (0..set.ndof())
                .map(|j| c64::new(data.n_proj[[q, j]], 0.0) * v[j])
                .sum()
        })
        .collect();
    let mut t1 = c64::new(0.0, 0.0);
    let mut t2 = c64::new(0.0, 0.0);
    let mut t3 = c64::new(0.0, 0.0);
    for q in 0..nq {
        let w = data.vol_w[q];
        t1 += c64::new(w * data.w_g[q], 0.0) * gu[q] * gv[q].conj();
        t2 += c64::new(w * data.w_x[q], 0.0) * (pu[q] * gv[q].conj() + gu[q] * pv[q].conj());
        t3 += c64::new(w * data.w_a[q], 0.0) * pu[q] * pv[q].conj();
    }
    let mut t4 = c64::new(0.0, 0.0);
    if !set.meta.cowling {
        let gu_full = data.gravity.dot(u);
        for (vj, gj) in v.iter().zip(gu_full.iter()) {
            t4 += vj.conj() * *gj;
        }
        t4 *= c64::new(FOUR_PI * set.meta.g_const, 0.0);
    }
    Ok(t1 + t2 - t3 - t4)
}

/// Coefficient suprema (with a Richardson safety factor), the derived analytic
/// constants, the discrete operator norm of the Coriolis term in the M-metric,
/// and the discrete lower-spectral shift.
pub fn compute_bounds(
    model: &StellarModel,
    set: &DiscreteOperatorSet,
) -> Result<BoundConstants, OperatorError> {
    let safety = 1.05;
    let (mut k1, mut k2) = (0.0f64, 0.0f64);
    if let Some(data) = &set.data {
        for q in 0..data.rho.len() {
            // |𝒜|√(γP/ρ) = |γP𝒜/ρ| / √(γP/ρ);  γP/ρ = (γP/ρ²)·ρ
            let gp_rho = data.w_g[q] * data.rho[q];
            if gp_rho > 0.0 {
                k1 = k1.max(data.w_x[q].abs() / gp_rho.sqrt());
            }
            k2 = k2.max(data.w_a[q].abs() / data.rho[q]);
        }
        k1 *= safety;
        k2 *= safety;
    }
    let grav = FOUR_PI * model.g_const * model.rho_o;
    let a = 2.0 * k1 * k1 + k2 + grav;
    let lower_bound = 0.25 * k1 * k1 + k2 + grav;

    let beta = if fro_norm(&set.b) == 0.0 {
        0.0
    } else {
        let wb = set.whitened(&set.b);
        let (_, sv, _) = wb
            .svd(false, false)
            .map_err(|e| OperatorError::Linalg(e.to_string()))?;
        sv.iter().cloned().fold(0.0, f64::max)
    };

    let mut wl = set.whitened(&set.l);
    let wlh = wl.t().mapv(|z| z.conj());
    wl = (&wl + &wlh).mapv(|z| z * 0.5);
    let (vals, _) = wl
        .eigh(UPLO::Lower)
        .map_err(|e| OperatorError::Linalg(e.to_string()))?;
    let min_eig = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let m_star_discrete = (-min_eig).max(0.0);

    Ok(BoundConstants {
        kappa1: k1,
        kappa2: k2,
        a,
        lower_bound,
        m_star_discrete,
        beta,
    })
}

/// Write an operator set as CSV triplet lists plus JSON metadata.
pub fn save_operator_set(set: &DiscreteOperatorSet, dir: &Path) -> Result<(), OperatorError> {
    std::fs::create_dir_all(dir).map_err(IoError::Io)?;
    let n = set.ndof();
    let mass_rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, set.m_diag[i]]).collect();
    write_csv(&dir.join("mass.csv"), &["index", "value"], &mass_rows)?;
    let dump = |name: &str, mat: &Array2<c64>| -> Result<(), OperatorError> {
        let mut rows = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let z = mat[[i, j]];
                if z.re != 0.0 || z.im != 0.0 {
                    rows.push(vec![i as f64, j as f64, z.re, z.im]);
                }
            }
        }
        write_csv(&dir.join(name), &["row", "col", "re", "im"], &rows)?;
        Ok(())
    };
    dump("stiffness.csv", &set.l)?;
    dump("coriolis.csv", &set.b)?;
    dump("seminorm.csv", &set.g_seminorm)?;
    write_json(&dir.join("meta.json"), &set.meta)?;
    Ok(())
}
