//! Newtonian potential machinery: the azimuthally averaged kernel K, Legendre
//! decomposition on Gauss nodes, and the per-degree radial operator
//!
//!   H_l[g](r) = (1/(2l+1)) [ ∫_0^r g(s)(s/r)^{l+1} s ds + ∫_r^∞ g(s)(r/s)^l s ds ].
//!
//! For axisymmetric sources the volume potential K[f](x) = (1/4π)∫ f(x')/‖x−x'‖ dx'
//! is assembled channel-by-channel as Σ_l H_l[f_l](r) P_l(ζ).

use crate::interp::CubicInterp;
use crate::quad::{adaptive_simpson, assoc_legendre_norm, gauss_jacobi, gauss_legendre, legendre_p, map_rule};
use ndarray::{Array2, ArrayView2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GravityError {
    #[error("kernel evaluated at coincident spatial points")]
    SingularPoint,
    #[error("field has {found} angular nodes, basis expects {expected}")]
    GridMismatch { expected: usize, found: usize },
}

/// Gauss-Legendre angular discretization with tabulated (associated) Legendre values.
#[derive(Debug, Clone)]
pub struct LegendreBasis {
    pub lmax: usize,
    pub m: usize,
    pub zeta_nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// plain P_l(ζ_j), rows l = 0..=lmax (kept for the m = 0 convention)
    pub p_table: Array2<f64>,
    /// orthonormal associated P̄_l^m(ζ_j), rows l = m..=lmax
    pub pbar_table: Array2<f64>,
}

impl LegendreBasis {
    pub fn new(nzeta: usize, lmax: usize, m: usize) -> Self {
        assert!(lmax + 1 <= nzeta, "need nzeta >= lmax+1 for exact transforms");
        assert!(m <= lmax);
        let (zeta_nodes, weights) = gauss_legendre(nzeta);
        let mut p_table = Array2::zeros((lmax + 1, nzeta));
        for l in 0..=lmax {
            for (j, &z) in zeta_nodes.iter().enumerate() {
                p_table[[l, j]] = legendre_p(l, z);
            }
        }
        let nch = lmax - m + 1;
        let mut pbar_table = Array2::zeros((nch, nzeta));
        for l in m..=lmax {
            for (j, &z) in zeta_nodes.iter().enumerate() {
                pbar_table[[l - m, j]] = assoc_legendre_norm(l, m, z);
            }
        }
        LegendreBasis {
            lmax,
            m,
            zeta_nodes,
            weights,
            p_table,
            pbar_table,
        }
    }

    pub fn nzeta(&self) -> usize {
        self.zeta_nodes.len()
    }

    pub fn nchannels(&self) -> usize {
        self.lmax - self.m + 1
    }

    fn check(&self, field: &ArrayView2<f64>) -> Result<(), GravityError> {
        if field.ncols() != self.nzeta() {
            return Err(GravityError::GridMismatch {
                expected: self.nzeta(),
                found: field.ncols(),
            });
        }
        Ok(())
    }

    /// Plain-Legendre coefficients f_l(r_i) with f = Σ_l f_l P_l (m = 0 only).
    pub fn decompose(&self, field: ArrayView2<f64>) -> Result<Array2<f64>, GravityError> {
        assert_eq!(self.m, 0);
        self.check(&field)?;
        let nr = field.nrows();
        let mut out = Array2::zeros((nr, self.lmax + 1));
        for i in 0..nr {
            for l in 0..=self.lmax {
                let mut s = 0.0;
                for j in 0..self.nzeta() {
                    s += self.weights[j] * self.p_table[[l, j]] * field[[i, j]];
                }
                out[[i, l]] = s * (2 * l + 1) as f64 / 2.0;
            }
        }
        Ok(out)
    }

    pub fn reconstruct(&self, coeffs: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(self.m, 0);
        let nr = coeffs.nrows();
        let mut out = Array2::zeros((nr, self.nzeta()));
        for i in 0..nr {
            for j in 0..self.nzeta() {
                let mut s = 0.0;
                for l in 0..=self.lmax {
                    s += coeffs[[i, l]] * self.p_table[[l, j]];
                }
                out[[i, j]] = s;
            }
        }
        out
    }

    /// Orthonormal-channel coefficients (any m); channel c holds degree l = m + c.
    pub fn decompose_norm(&self, field: ArrayView2<f64>) -> Result<Array2<f64>, GravityError> {
        self.check(&field)?;
        let nr = field.nrows();
        let nch = self.nchannels();
        let mut out = Array2::zeros((nr, nch));
        for i in 0..nr {
            for c in 0..nch {
                let mut s = 0.0;
                for j in 0..self.nzeta() {
                    s += self.weights[j] * self.pbar_table[[c, j]] * field[[i, j]];
                }
                out[[i, c]] = s;
            }
        }
        Ok(out)
    }

    pub fn reconstruct_norm(&self, coeffs: ArrayView2<f64>) -> Array2<f64> {
        let nr = coeffs.nrows();
        let mut out = Array2::zeros((nr, self.nzeta()));
        for i in 0..nr {
            for j in 0..self.nzeta() {
                let mut s = 0.0;
                for c in 0..self.nchannels() {
                    s += coeffs[[i, c]] * self.pbar_table[[c, j]];
                }
                out[[i, j]] = s;
            }
        }
        out
    }

    /// Evaluate a channel expansion at arbitrary ζ.
    pub fn eval_norm(&self, coeffs: &[f64], zeta: f64) -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(c, &a)| a * assoc_legendre_norm(self.m + c, self.m, zeta))
            .sum()
    }
}

/// Azimuthal average of the Newtonian kernel between two rings.
///
///   K(r,ζ,r',ζ') = ∫_0^{2π} dφ / sqrt(r²+r'²−2rr'(sqrt(1−ζ²)sqrt(1−ζ'²)cosφ+ζζ'))
pub fn kernel_k(r: f64, zeta: f64, r2: f64, zeta2: f64, tol: f64) -> Result<f64, GravityError> {
    let a = r * r + r2 * r2 - 2.0 * r * r2 * zeta * zeta2;
    let b = 2.0 * r * r2 * (1.0 - zeta * zeta).max(0.0).sqrt() * (1.0 - zeta2 * zeta2).max(0.0).sqrt();
    if a - b <= f64::EPSILON * (r * r + r2 * r2) {
        return Err(GravityError::SingularPoint);
    }
    // integrand is even about φ = 0 and φ = π
    let f = |phi: f64| 1.0 / (a - b * phi.cos()).sqrt();
    let v = adaptive_simpson(&f, 0.0, std::f64::consts::PI, tol * 0.5);
    Ok(2.0 * v)
}

/// H_l applied to grid samples of a compactly supported radial channel.
/// The input is interpolated cubically; panel quadrature is Gauss-Legendre of
/// the given order aligned to the grid.
pub fn hankel_transform(r_grid: &[f64], values: &[f64], ell: usize, order: usize) -> Vec<f64> {
    let interp = CubicInterp::from_values(r_grid, values);
    let n = r_grid.len();
    let (gx, gw) = gauss_legendre(order);
    let np = n - 1;
    let mut inner = vec![0.0; np]; // ∫ panel g s^{l+2} ds
    let mut outer = vec![0.0; np]; // ∫ panel g s^{1-l} ds
    for k in 0..np {
        let (xs, ws) = map_rule(&gx, &gw, r_grid[k], r_grid[k + 1]);
        for (s, w) in xs.iter().zip(&ws) {
            let g = interp.eval(*s);
            inner[k] += w * g * s.powi(ell as i32 + 2);
            if *s > 0.0 {
                outer[k] += w * g * s.powi(1 - ell as i32);
            }
        }
    }
    let mut pre = vec![0.0; n]; // cumulative inner up to r_i
    for i in 1..n {
        pre[i] = pre[i - 1] + inner[i - 1];
    }
    let mut post = vec![0.0; n]; // cumulative outer from r_i out
    for i in (0..n - 1).rev() {
        post[i] = post[i + 1] + outer[i];
    }
    let mut h = vec![0.0; n];
    for i in 0..n {
        let r = r_grid[i];
        let v = if r == 0.0 {
            if ell == 0 {
                post[i]
            } else {
                0.0
            }
        } else {
            r.powi(-(ell as i32) - 1) * pre[i] + r.powi(ell as i32) * post[i]
        };
        h[i] = v / (2 * ell + 1) as f64;
    }
    h
}

/// Ψ = −H_l[g]: the potential channel sourced by g.
pub fn hankel_potential(r_grid: &[f64], values: &[f64], ell: usize, order: usize) -> Vec<f64> {
    hankel_transform(r_grid, values, ell, order)
        .into_iter()
        .map(|v| -v)
        .collect()
}

/// Axisymmetric source described ray-by-ray so the integrand's surface kink can
/// be resolved: `eval(s, j)` returns g(s, ζ_j); `surface[j]`, when finite and
/// inside the grid, marks where g vanishes along ray j, and the sub-panel up to
/// it is integrated with a Gauss-Jacobi rule of exponent `jacobi_alpha`.
pub struct RaySource<'a> {
    pub eval: &'a dyn Fn(f64, usize) -> f64,
    pub surface: Option<Vec<f64>>,
    pub jacobi_alpha: f64,
}

/// K[g] on the (r, ζ) tensor grid, assembled through H_l channels.
pub fn kcal_axisym(
    r_grid: &[f64],
    basis: &LegendreBasis,
    src: &RaySource,
    order: usize,
) -> Array2<f64> {
    let n = r_grid.len();
    let nz = basis.nzeta();
    let nch = basis.nchannels();
    let m = basis.m;
    let (gx, gw) = gauss_legendre(order);
    let (jx, jw) = gauss_jacobi(order, src.jacobi_alpha, 0.0);
    let np = n - 1;
    let mut inner = Array2::<f64>::zeros((np, nch));
    let mut outer = Array2::<f64>::zeros((np, nch));
    let mut powers = vec![0.0f64; nch];
    let accum = |s: f64,
                     w: f64,
                     gvals: &[f64],
                     inner_k: &mut [f64],
                     outer_k: &mut [f64],
                     powers: &mut [f64]| {
        // channel coefficients of g at radius s
        for c in 0..nch {
            let mut gc = 0.0;
            for j in 0..nz {
                gc += basis.weights[j] * basis.pbar_table[[c, j]] * gvals[j];
            }
            powers[c] = gc;
        }
        let mut sp_in = s.powi(m as i32 + 2);
        let mut sp_out = if s > 0.0 { s.powi(1 - m as i32) } else { 0.0 };
        for c in 0..nch {
            inner_k[c] += w * powers[c] * sp_in;
            outer_k[c] += w * powers[c] * sp_out;
            sp_in *= s;
            if s > 0.0 {
                sp_out /= s;
            }
        }
    };
    let mut gvals = vec![0.0f64; nz];
    for k in 0..np {
        let (a, b) = (r_grid[k], r_grid[k + 1]);
        // rays whose surface falls inside this panel get a dedicated sub-rule
        let mut split: Vec<usize> = Vec::new();
        if let Some(surf) = &src.surface {
            for (j, &s) in surf.iter().enumerate() {
                if s > a && s < b {
                    split.push(j);
                }
            }
        }
        let (xs, ws) = map_rule(&gx, &gw, a, b);
        let mut inner_k = vec![0.0; nch];
        let mut outer_k = vec![0.0; nch];
        for (s, w) in xs.iter().zip(&ws) {
            for j in 0..nz {
                gvals[j] = if split.contains(&j) {
                    0.0
                } else {
                    (src.eval)(*s, j)
                };
            }
            accum(*s, *w, &gvals, &mut inner_k, &mut outer_k, &mut powers);
        }
        // Gauss-Jacobi sub-panels [a, surface_j] per split ray
        for &j in &split {
            let sj = src.surface.as_ref().unwrap()[j];
            let half = 0.5 * (sj - a);
            let alpha_scale = half.powf(src.jacobi_alpha);
            for (x, w) in jx.iter().zip(&jw) {
                let s = a + half * (x + 1.0);
                let q = (src.eval)(s, j) / (sj - s).powf(src.jacobi_alpha);
                let wq = w * half * alpha_scale * q * basis.weights[j];
                let mut sp_in = s.powi(m as i32 + 2);
                let mut sp_out = if s > 0.0 { s.powi(1 - m as i32) } else { 0.0 };
                for c in 0..nch {
                    let pj = basis.pbar_table[[c, j]];
                    inner_k[c] += wq * pj * sp_in;
                    outer_k[c] += wq * pj * sp_out;
                    sp_in *= s;
                    if s > 0.0 {
                        sp_out /= s;
                    }
                }
            }
        }
        for c in 0..nch {
            inner[[k, c]] = inner_k[c];
            outer[[k, c]] = outer_k[c];
        }
    }
    // prefix sums and channel reconstruction; the outward cumulative sum is
    // accumulated backward because the near-axis panels dominate s^{1-l} by
    // many orders and a total-minus-prefix form cancels catastrophically
    let mut hmat = Array2::<f64>::zeros((n, nch));
    let mut post_c = vec![0.0f64; n];
    for c in 0..nch {
        let ell = (m + c) as i32;
        post_c[n - 1] = 0.0;
        for i in (0..np).rev() {
            post_c[i] = post_c[i + 1] + outer[[i, c]];
        }
        let mut pre = 0.0;
        for i in 0..n {
            if i > 0 {
                pre += inner[[i - 1, c]];
            }
            let post = post_c[i];
            let r = r_grid[i];
            let v = if r == 0.0 {
                if ell == 0 {
                    post
                } else {
                    0.0
                }
            } else {
                r.powi(-ell - 1) * pre + r.powi(ell) * post
            };
            hmat[[i, c]] = v / (2 * ell + 1) as f64;
        }
    }
    let mut out = Array2::<f64>::zeros((n, nz));
    for i in 0..n {
        for j in 0..nz {
            let mut s = 0.0;
            for c in 0..nch {
                s += hmat[[i, c]] * basis.pbar_table[[c, j]];
            }
            out[[i, j]] = s;
        }
    }
    out
}

/// K[g] from grid samples (cubic interpolation per ray, no surface splitting).
pub fn solve_potential_axisym(
    r_grid: &[f64],
    basis: &LegendreBasis,
    g: ArrayView2<f64>,
    order: usize,
) -> Result<Array2<f64>, GravityError> {
    if g.ncols() != basis.nzeta() {
        return Err(GravityError::GridMismatch {
            expected: basis.nzeta(),
            found: g.ncols(),
        });
    }
    let rays: Vec<CubicInterp> = (0..basis.nzeta())
        .map(|j| {
            let col: Vec<f64> = (0..r_grid.len()).map(|i| g[[i, j]]).collect();
            CubicInterp::from_values(r_grid, &col)
        })
        .collect();
    let eval = move |s: f64, j: usize| rays[j].eval(s);
    let src = RaySource {
        eval: &eval,
        surface: None,
        jacobi_alpha: 0.0,
    };
    Ok(kcal_axisym(r_grid, basis, &src, order))
}

/// Φ = −4πG K[ρ] for an axisymmetric density.
pub fn potential_from_density(
    r_grid: &[f64],
    basis: &LegendreBasis,
    rho: ArrayView2<f64>,
    g_newton: f64,
    order: usize,
) -> Result<Array2<f64>, GravityError> {
    let k = solve_potential_axisym(r_grid, basis, rho, order)?;
    Ok(k.mapv(|v| -4.0 * std::f64::consts::PI * g_newton * v))
}

/// Symmetric positive-semidefinite Gram of the degree-l potential pairing,
///   (K_l)_ij = w_i r_i² k_l(r_i, r_j) w_j r_j²,  k_l(r,s) = (1/(2l+1)) r_<^l / r_>^{l+1},
/// so that g^T K_l h ≈ ∫ H_l[g] h r² dr with exact symmetry by construction.
pub fn kernel_gram_ell(r_nodes: &[f64], r_weights: &[f64], ell: usize) -> Array2<f64> {
    let n = r_nodes.len();
    let mut k = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let ri = r_nodes[i];
        if ri == 0.0 {
            continue;
        }
        for j in 0..=i {
            let rj = r_nodes[j];
            if rj == 0.0 {
                continue;
            }
            let (lo, hi) = if ri < rj { (ri, rj) } else { (rj, ri) };
            let kern = (lo / hi).powi(ell as i32) / hi / (2 * ell + 1) as f64;
            let v = r_weights[i] * ri * ri * kern * r_weights[j] * rj * rj;
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    k
}

/// Truncated multipole series for the azimuthally averaged kernel; oracle for kernel_k.
pub fn kernel_series(r: f64, zeta: f64, r2: f64, zeta2: f64, lmax: usize) -> f64 {
    let (rlo, rhi) = if r < r2 { (r, r2) } else { (r2, r) };
    let ratio = rlo / rhi;
    let mut sum = 0.0;
    let mut pw = 1.0 / rhi;
    for l in 0..=lmax {
        sum += 2.0 * std::f64::consts::PI * pw * legendre_p(l, zeta) * legendre_p(l, zeta2);
        pw *= ratio;
    }
    sum
}

/// Discrete l-degree radial Laplacian applied to a channel (3-point conservative
/// stencil on a uniform grid); used for Poisson-residual checks.
pub fn laplace_ell(r_grid: &[f64], w: &[f64], ell: usize) -> Vec<f64> {
    let n = r_grid.len();
    let h = r_grid[1] - r_grid[0];
    let mut out = vec![0.0; n];
    let ll = (ell * (ell + 1)) as f64;
    for i in 1..n - 1 {
        let r = r_grid[i];
        let rp = r + 0.5 * h;
        let rm = r - 0.5 * h;
        out[i] = (rp * rp * (w[i + 1] - w[i]) - rm * rm * (w[i] - w[i - 1])) / (h * h * r * r)
            - ll * w[i] / (r * r);
    }
    out
}

/// Pairing ⟨f, g⟩ = Σ_ij wr_i wζ_j f_ij g_ij r_i² used by self-adjointness tests.
pub fn grid_pairing(
    r_grid: &[f64],
    r_weights: &[f64],
    basis: &LegendreBasis,
    f: ArrayView2<f64>,
    g: ArrayView2<f64>,
) -> f64 {
    let mut s = 0.0;
    for i in 0..r_grid.len() {
        for j in 0..basis.nzeta() {
            s += r_weights[i] * basis.weights[j] * f[[i, j]] * g[[i, j]] * r_grid[i] * r_grid[i];
        }
    }
    s
}

/// Radial trapezoid weights for a (possibly nonuniform) grid.
pub fn trapezoid_weights(r_grid: &[f64]) -> Vec<f64> {
    let n = r_grid.len();
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let h = r_grid[i + 1] - r_grid[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

#[allow(unused_imports)]
use ndarray::s;
#[allow(unused_imports)]
use std::convert::identity;
