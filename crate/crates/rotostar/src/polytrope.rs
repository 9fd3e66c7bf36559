//! Classical and rotation-distorted Lane-Emden solvers.
//!
//! The classical problem is the ODE
//!
//!   -(1/ξ²) d/dξ (ξ² dθ/dξ) = (θ ∨ 0)^n,  θ(0) = 1, θ'(0) = 0,
//!
//! whose first zero ξ1 sets the stellar radius. The distorted problem replaces
//! the ODE by the fixed-point integral equation
//!
//!   Θ(ξ,ζ) = 1 + b(ξ√(1−ζ²)) + K[g](ξ,ζ) − K[g](0,0),
//!   g = (Θ ∨ 0)^n (1 + Λ₂(Υ_O Θ)),
//!
//! with K the volume Newton kernel and b the centrifugal function.

use crate::gravity::{kcal_axisym, LegendreBasis, RaySource};
use crate::interp::CubicInterp;
use crate::quad::{gauss_legendre, legendre_p, map_rule};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolytropeError {
    #[error("adiabatic exponent gamma={0} outside (1, 2)")]
    InvalidIndex(f64),
    #[error("theta stayed positive up to xi={0}; no zero found")]
    NoZeroFound(f64),
    #[error("integration step underflow at xi={0}")]
    NonConvergence(f64),
    #[error("centrifugal amplitude ||b||_1 = {norm1} exceeds threshold {beta0}")]
    AmplitudeTooLarge { norm1: f64, beta0: f64 },
    #[error("fixed point not converged after {iterations} iterations, residual {residual}")]
    MaxIterExceeded { iterations: usize, residual: f64 },
    #[error("center value drifted from 1 by {defect}")]
    NegativeCenter { defect: f64 },
    #[error("no sign change of Theta along ray zeta={0}")]
    RootBracketFailure(f64),
}

/// Adiabatic exponent γ with its polytropic index n = 1/(γ−1).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct PolytropicIndex {
    pub gamma: f64,
    pub n: f64,
}

impl PolytropicIndex {
    pub fn from_gamma(gamma: f64) -> Result<Self, PolytropeError> {
        if !(1.0 < gamma && gamma < 2.0) {
            return Err(PolytropeError::InvalidIndex(gamma));
        }
        Ok(PolytropicIndex {
            gamma,
            n: 1.0 / (gamma - 1.0),
        })
    }

    pub fn from_n(n: f64) -> Result<Self, PolytropeError> {
        if !(n > 1.0) {
            return Err(PolytropeError::InvalidIndex(1.0 + 1.0 / n));
        }
        Ok(PolytropicIndex {
            gamma: 1.0 + 1.0 / n,
            n,
        })
    }

    /// Indices outside the physical range (n = 0 and n = 1) used only in tests.
    pub fn test_index(n: f64) -> Self {
        assert!(n >= 0.0);
        PolytropicIndex {
            gamma: if n > 0.0 { 1.0 + 1.0 / n } else { f64::INFINITY },
            n,
        }
    }

    /// (θ ∨ 0)^n, the dimensionless density source.
    pub fn source(&self, theta: f64) -> f64 {
        if self.n == 0.0 {
            1.0
        } else if theta <= 0.0 {
            0.0
        } else {
            theta.powf(self.n)
        }
    }
}

/// Classical Lane-Emden profile up to (and including) its first zero.
#[derive(Debug, Clone)]
pub struct LaneEmdenSolution {
    pub index: PolytropicIndex,
    pub xi_grid: Vec<f64>,
    pub theta: Vec<f64>,
    pub dtheta: Vec<f64>,
    pub xi1: f64,
    pub dtheta_at_xi1: f64,
    interp: CubicInterp,
}

impl LaneEmdenSolution {
    pub fn from_parts(
        index: PolytropicIndex,
        xi_grid: Vec<f64>,
        theta: Vec<f64>,
        dtheta: Vec<f64>,
    ) -> Self {
        let xi1 = *xi_grid.last().unwrap();
        let dtheta_at_xi1 = *dtheta.last().unwrap();
        let interp = CubicInterp::with_slopes(&xi_grid, &theta, &dtheta);
        LaneEmdenSolution {
            index,
            xi_grid,
            theta,
            dtheta,
            xi1,
            dtheta_at_xi1,
            interp,
        }
    }

    /// θ(ξ), continued linearly (strictly negative) beyond ξ1.
    pub fn eval(&self, xi: f64) -> f64 {
        if xi >= self.xi1 {
            self.dtheta_at_xi1 * (xi - self.xi1)
        } else {
            self.interp.eval(xi)
        }
    }

    pub fn eval_deriv(&self, xi: f64) -> f64 {
        if xi >= self.xi1 {
            self.dtheta_at_xi1
        } else {
            self.interp.eval_deriv(xi)
        }
    }
}

fn rk4_step(index: &PolytropicIndex, x: f64, th: f64, v: f64, h: f64) -> (f64, f64) {
    let f = |x: f64, th: f64, v: f64| -> (f64, f64) { (v, -index.source(th) - 2.0 * v / x) };
    let (k1t, k1v) = f(x, th, v);
    let (k2t, k2v) = f(x + 0.5 * h, th + 0.5 * h * k1t, v + 0.5 * h * k1v);
    let (k3t, k3v) = f(x + 0.5 * h, th + 0.5 * h * k2t, v + 0.5 * h * k2v);
    let (k4t, k4v) = f(x + h, th + h * k3t, v + h * k3v);
    (
        th + h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t),
        v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    )
}

/// Integrate the Lane-Emden ODE to its first zero.
pub fn solve_lane_emden(
    index: PolytropicIndex,
    tol: f64,
) -> Result<LaneEmdenSolution, PolytropeError> {
    assert!(tol > 0.0);
    let n = index.n;
    let h = (tol.clamp(1e-13, 1e-4) * 10.0).powf(0.25).clamp(1e-4, 1e-3);
    let xi_max = 100.0;
    // series start past the coordinate singularity
    let xs: f64 = 1e-3;
    let mut xi_grid = vec![0.0];
    let mut theta = vec![1.0];
    let mut dtheta = vec![0.0];
    let mut x = xs;
    let mut th = 1.0 - xs * xs / 6.0 + n * xs.powi(4) / 120.0;
    let mut v = -xs / 3.0 + n * xs.powi(3) / 30.0;
    xi_grid.push(x);
    theta.push(th);
    dtheta.push(v);
    loop {
        let (th1, v1) = rk4_step(&index, x, th, v, h);
        if th1 <= 0.0 {
            // bracketed: bisect the step length, each candidate integrated
            // with refined substeps from the last positive state
            let probe = |delta: f64| -> (f64, f64) {
                if delta == 0.0 {
                    return (th, v);
                }
                let m = 8;
                let hh = delta / m as f64;
                let (mut tt, mut vv, mut xx) = (th, v, x);
                for _ in 0..m {
                    let (t2, v2) = rk4_step(&index, xx, tt, vv, hh);
                    tt = t2;
                    vv = v2;
                    xx += hh;
                }
                (tt, vv)
            };
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let (tm, _) = probe(mid);
                if tm > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-13 * (x + h) {
                    break;
                }
            }
            let delta = 0.5 * (lo + hi);
            let (tz, vz) = probe(delta);
            let xi1 = x + delta;
            xi_grid.push(xi1);
            theta.push(tz.min(0.0).max(-1e-12));
            dtheta.push(vz);
            return Ok(LaneEmdenSolution::from_parts(index, xi_grid, theta, dtheta));
        }
        x += h;
        th = th1;
        v = v1;
        xi_grid.push(x);
        theta.push(th);
        dtheta.push(v);
        if x > xi_max {
            return Err(PolytropeError::NoZeroFound(xi_max));
        }
        if h < 1e-15 * x {
            return Err(PolytropeError::NonConvergence(x));
        }
    }
}

/// Differential-rotation law ω_b(ϖ), polynomial inside a cutoff cylinder and
/// frozen at its cutoff value outside.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum DifferentialRotation {
    None,
    Polynomial { coeffs: Vec<f64>, cutoff: f64 },
}

impl DifferentialRotation {
    pub fn eval(&self, w: f64) -> f64 {
        match self {
            DifferentialRotation::None => 0.0,
            DifferentialRotation::Polynomial { coeffs, cutoff } => {
                let wc = w.min(*cutoff);
                coeffs.iter().rev().fold(0.0, |acc, &c| acc * wc + c)
            }
        }
    }
}

/// Rigid angular velocity Ω plus optional differential part ω_b(ϖ).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RotationProfile {
    pub omega: f64,
    pub omega_b: DifferentialRotation,
    /// ‖b‖₁ diagnostic, filled once the centrifugal function has been built
    pub b_amplitude_norm: f64,
}

impl RotationProfile {
    pub fn none() -> Self {
        RotationProfile {
            omega: 0.0,
            omega_b: DifferentialRotation::None,
            b_amplitude_norm: 0.0,
        }
    }

    pub fn rigid(omega: f64) -> Self {
        RotationProfile {
            omega,
            omega_b: DifferentialRotation::None,
            b_amplitude_norm: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.omega == 0.0 && self.omega_b == DifferentialRotation::None
    }

    /// total angular velocity at cylindrical radius ϖ
    pub fn total(&self, w: f64) -> f64 {
        self.omega + self.omega_b.eval(w)
    }
}

/// Sampled centrifugal function b(ϖ̂) = B(𝖺ϖ̂)/Υ_O with its derivative,
/// where B(ϖ) = ∫_0^ϖ (Ω + ω_b)² ϖ' dϖ'.
#[derive(Debug, Clone)]
pub struct BFunction {
    pub pibar: Vec<f64>,
    pub b: Vec<f64>,
    pub db: Vec<f64>,
    pub norm1: f64,
    interp: CubicInterp,
}

impl BFunction {
    pub fn zero(pibar_max: f64) -> Self {
        let pibar = vec![0.0, 0.5 * pibar_max, pibar_max];
        let b = vec![0.0; 3];
        let db = vec![0.0; 3];
        let interp = CubicInterp::with_slopes(&pibar, &b, &db);
        BFunction {
            pibar,
            b,
            db,
            norm1: 0.0,
            interp,
        }
    }

    /// Rebuild from stored samples (deserialization path).
    pub fn from_samples(pibar: Vec<f64>, b: Vec<f64>, db: Vec<f64>) -> Self {
        let supb = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let supdb = db.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let norm1 = supb + supdb;
        let interp = CubicInterp::with_slopes(&pibar, &b, &db);
        BFunction {
            pibar,
            b,
            db,
            norm1,
            interp,
        }
    }

    pub fn eval(&self, w: f64) -> f64 {
        if w <= 0.0 {
            0.0
        } else {
            self.interp.eval(w)
        }
    }

    pub fn eval_deriv(&self, w: f64) -> f64 {
        self.interp.eval_deriv(w.max(0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.norm1 == 0.0
    }
}

/// Build b over ϖ̂ ∈ [0, pibar_max]; errs when ‖b‖₁ exceeds beta0 (if given).
pub fn build_b_function(
    profile: &RotationProfile,
    upsilon_o: f64,
    a_scale: f64,
    pibar_max: f64,
    n_samples: usize,
    beta0: Option<f64>,
) -> Result<BFunction, PolytropeError> {
    assert!(upsilon_o > 0.0 && a_scale > 0.0 && n_samples >= 2);
    let (gx, gw) = gauss_legendre(8);
    let mut pibar = Vec::with_capacity(n_samples + 1);
    let mut b = Vec::with_capacity(n_samples + 1);
    let mut db = Vec::with_capacity(n_samples + 1);
    let mut acc = 0.0;
    for i in 0..=n_samples {
        let w = pibar_max * i as f64 / n_samples as f64;
        if i > 0 {
            let wprev = pibar_max * (i - 1) as f64 / n_samples as f64;
            let (xs, ws) = map_rule(&gx, &gw, wprev, w);
            for (x, wt) in xs.iter().zip(&ws) {
                let om = profile.total(a_scale * x);
                acc += wt * om * om * a_scale * a_scale * x / upsilon_o;
            }
        }
        let om = profile.total(a_scale * w);
        pibar.push(w);
        b.push(acc);
        db.push(om * om * a_scale * a_scale * w / upsilon_o);
    }
    let supb = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let supdb = db.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let norm1 = supb + supdb;
    if let Some(b0) = beta0 {
        if norm1 > b0 {
            return Err(PolytropeError::AmplitudeTooLarge { norm1, beta0: b0 });
        }
    }
    let interp = CubicInterp::with_slopes(&pibar, &b, &db);
    Ok(BFunction {
        pibar,
        b,
        db,
        norm1,
        interp,
    })
}

/// Options for the distorted fixed-point solve.
#[derive(Debug, Clone)]
pub struct DistortedOptions {
    pub nxi: usize,
    pub nzeta: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub relax: f64,
    pub quad_order: usize,
}

impl Default for DistortedOptions {
    fn default() -> Self {
        DistortedOptions {
            nxi: 200,
            nzeta: 32,
            tol: 1e-10,
            max_iter: 300,
            relax: 1.0,
            quad_order: 8,
        }
    }
}

/// Converged distorted Lane-Emden profile on the (ξ, ζ) tensor grid.
#[derive(Debug, Clone)]
pub struct DistortedSolution {
    pub index: PolytropicIndex,
    pub b_fn: BFunction,
    pub xi_grid: Vec<f64>,
    pub zeta_nodes: Vec<f64>,
    pub zeta_weights: Vec<f64>,
    pub theta: Array2<f64>,
    pub xi1_curve: Vec<f64>,
    pub xi1_spherical: f64,
    pub xi0: f64,
    pub iterations: usize,
    pub residual: f64,
    channels: Vec<CubicInterp>,
}

impl DistortedSolution {
    /// Radial Legendre channels (coefficient interpolants) of Θ.
    pub fn channels(&self) -> &[CubicInterp] {
        &self.channels
    }

    /// Reassemble from persisted pieces (deserialization path); channel
    /// interpolants are rebuilt from the grid iterate.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        index: PolytropicIndex,
        b_fn: BFunction,
        xi_grid: Vec<f64>,
        zeta_nodes: Vec<f64>,
        zeta_weights: Vec<f64>,
        theta: Array2<f64>,
        xi1_curve: Vec<f64>,
        xi1_spherical: f64,
        xi0: f64,
        iterations: usize,
        residual: f64,
    ) -> Self {
        let nz = zeta_nodes.len();
        let lmax = (nz - 1).min(40);
        let basis = LegendreBasis::new(nz, lmax, 0);
        let coeffs = basis.decompose(theta.view()).expect("grid matches basis");
        let nxi = xi_grid.len() - 1;
        let channels: Vec<CubicInterp> = (0..=lmax)
            .map(|l| {
                let col: Vec<f64> = (0..=nxi).map(|i| coeffs[[i, l]]).collect();
                CubicInterp::from_values(&xi_grid, &col)
            })
            .collect();
        DistortedSolution {
            index,
            b_fn,
            xi_grid,
            zeta_nodes,
            zeta_weights,
            theta,
            xi1_curve,
            xi1_spherical,
            xi0,
            iterations,
            residual,
            channels,
        }
    }

    /// Θ(ξ, ζ) for arbitrary arguments; strictly negative linear continuation
    /// beyond the stored grid.
    pub fn eval(&self, xi: f64, zeta: f64) -> f64 {
        let xi_end = *self.xi_grid.last().unwrap();
        let at = xi.min(xi_end);
        let mut v = 0.0;
        for (l, ch) in self.channels.iter().enumerate() {
            v += ch.eval(at) * legendre_p(l, zeta);
        }
        if xi > xi_end {
            let mut dv = 0.0;
            for (l, ch) in self.channels.iter().enumerate() {
                dv += ch.eval_deriv(xi_end) * legendre_p(l, zeta);
            }
            v += dv.min(-1e-3) * (xi - xi_end);
        }
        v
    }

    pub fn eval_deriv_xi(&self, xi: f64, zeta: f64) -> f64 {
        let xi_end = *self.xi_grid.last().unwrap();
        let at = xi.min(xi_end);
        self.channels
            .iter()
            .enumerate()
            .map(|(l, ch)| ch.eval_deriv(at) * legendre_p(l, zeta))
            .sum()
    }

    /// ∂Θ/∂ζ by term-wise Legendre differentiation.
    pub fn eval_deriv_zeta(&self, xi: f64, zeta: f64) -> f64 {
        let xi_end = *self.xi_grid.last().unwrap();
        let at = xi.min(xi_end);
        self.channels
            .iter()
            .enumerate()
            .map(|(l, ch)| ch.eval(at) * crate::quad::legendre_p_deriv(l, zeta))
            .sum()
    }

    /// Boundary radius Ξ₁(ζ) by channel evaluation (interpolates the stored curve).
    pub fn xi1_at(&self, zeta: f64) -> f64 {
        // bisection on the evaluated profile
        let mut lo = 0.0;
        let mut hi = self.xi0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid, zeta) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Solve the distorted Lane-Emden integral equation by Picard iteration.
pub fn solve_distorted(
    index: PolytropicIndex,
    b_fn: &BFunction,
    lambda2: Option<&dyn Fn(f64) -> f64>,
    upsilon_o: f64,
    opts: &DistortedOptions,
) -> Result<DistortedSolution, PolytropeError> {
    let sph = solve_lane_emden(index, opts.tol.min(1e-10))?;
    let xi0 = 4.0 * sph.xi1;
    let nxi = opts.nxi;
    let xi_grid: Vec<f64> = (0..=nxi).map(|i| xi0 * i as f64 / nxi as f64).collect();
    let lmax = (opts.nzeta - 1).min(40);
    let basis = LegendreBasis::new(opts.nzeta, lmax, 0);
    let nz = opts.nzeta;

    // initial iterate: the spherical profile (already exact when b ≡ 0)
    let mut theta = Array2::<f64>::zeros((nxi + 1, nz));
    for (i, &xi) in xi_grid.iter().enumerate() {
        let v = sph.eval(xi);
        for j in 0..nz {
            theta[[i, j]] = v;
        }
    }

    let gfun = move |th: f64| -> f64 {
        let base = index.source(th);
        match lambda2 {
            Some(l2) => base * (1.0 + l2(upsilon_o * th)),
            None => base,
        }
    };

    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        // per-ray interpolants of the current iterate
        let rays: Vec<CubicInterp> = (0..nz)
            .map(|j| {
                let col: Vec<f64> = (0..=nxi).map(|i| theta[[i, j]]).collect();
                CubicInterp::from_values(&xi_grid, &col)
            })
            .collect();
        // surface radius per ray for split quadrature panels
        let mut surface = vec![f64::INFINITY; nz];
        for j in 0..nz {
            let mut k = None;
            for i in 0..nxi {
                if theta[[i, j]] > 0.0 && theta[[i + 1, j]] <= 0.0 {
                    k = Some(i);
                    break;
                }
            }
            if let Some(i) = k {
                let (mut lo, mut hi) = (xi_grid[i], xi_grid[i + 1]);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if rays[j].eval(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                surface[j] = 0.5 * (lo + hi);
            }
        }
        let geval = |s: f64, j: usize| -> f64 {
            if s >= surface[j] {
                0.0
            } else {
                gfun(rays[j].eval(s))
            }
        };
        let src = RaySource {
            eval: &geval,
            surface: Some(surface.clone()),
            jacobi_alpha: index.n.min(4.0),
        };
        let kg = kcal_axisym(&xi_grid, &basis, &src, opts.quad_order);
        // K[g](0,0): value at the origin node (ζ-independent there)
        let kg0 = kg[[0, 0]];
        let mut defect = 0.0f64;
        for (i, &xi) in xi_grid.iter().enumerate() {
            for j in 0..nz {
                let zeta = basis.zeta_nodes[j];
                let w = xi * (1.0 - zeta * zeta).max(0.0).sqrt();
                let new = 1.0 + b_fn.eval(w) + kg[[i, j]] - kg0;
                let cur = theta[[i, j]];
                let upd = cur + opts.relax * (new - cur);
                defect = defect.max((new - cur).abs());
                theta[[i, j]] = upd;
            }
        }
        residual = defect;
        if defect <= opts.tol {
            break;
        }
    }
    if residual > opts.tol {
        return Err(PolytropeError::MaxIterExceeded {
            iterations,
            residual,
        });
    }
    // center consistency
    let center_defect = (0..nz)
        .map(|j| (theta[[0, j]] - 1.0).abs())
        .fold(0.0f64, f64::max);
    if center_defect > 100.0 * opts.tol {
        return Err(PolytropeError::NegativeCenter {
            defect: center_defect,
        });
    }

    // boundary curve
    let rays: Vec<CubicInterp> = (0..nz)
        .map(|j| {
            let col: Vec<f64> = (0..=nxi).map(|i| theta[[i, j]]).collect();
            CubicInterp::from_values(&xi_grid, &col)
        })
        .collect();
    let mut xi1_curve = vec![0.0; nz];
    for j in 0..nz {
        let mut bracket = None;
        for i in 0..nxi {
            if theta[[i, j]] > 0.0 && theta[[i + 1, j]] <= 0.0 {
                bracket = Some(i);
                break;
            }
        }
        let i = bracket.ok_or(PolytropeError::RootBracketFailure(basis.zeta_nodes[j]))?;
        let (mut lo, mut hi) = (xi_grid[i], xi_grid[i + 1]);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if rays[j].eval(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        xi1_curve[j] = 0.5 * (lo + hi);
    }

    // Legendre channels of the final iterate for off-grid evaluation
    let coeffs = basis.decompose(theta.view()).expect("grid matches basis");
    let channels: Vec<CubicInterp> = (0..=lmax)
        .map(|l| {
            let col: Vec<f64> = (0..=nxi).map(|i| coeffs[[i, l]]).collect();
            CubicInterp::from_values(&xi_grid, &col)
        })
        .collect();

    Ok(DistortedSolution {
        index,
        b_fn: b_fn.clone(),
        xi_grid,
        zeta_nodes: basis.zeta_nodes.clone(),
        zeta_weights: basis.weights.clone(),
        theta,
        xi1_curve,
        xi1_spherical: sph.xi1,
        xi0,
        iterations,
        residual,
        channels,
    })
}

/// K[g] of the converged density source on the solution grid, using the same
/// surface-split quadrature as the fixed-point iteration.  Used to assemble
/// the gravitational potential of the finished model.
pub fn source_potential(
    sol: &DistortedSolution,
    lambda2: Option<&dyn Fn(f64) -> f64>,
    upsilon_o: f64,
    quad_order: usize,
) -> Array2<f64> {
    let nz = sol.zeta_nodes.len();
    let nxi = sol.xi_grid.len() - 1;
    let lmax = (nz - 1).min(40);
    let basis = LegendreBasis::new(nz, lmax, 0);
    let rays: Vec<CubicInterp> = (0..nz)
        .map(|j| {
            let col: Vec<f64> = (0..=nxi).map(|i| sol.theta[[i, j]]).collect();
            CubicInterp::from_values(&sol.xi_grid, &col)
        })
        .collect();
    let index = sol.index;
    let gfun = move |th: f64| -> f64 {
        let base = index.source(th);
        match lambda2 {
            Some(l2) => base * (1.0 + l2(upsilon_o * th)),
            None => base,
        }
    };
    let surface = sol.xi1_curve.clone();
    let geval = |s: f64, j: usize| -> f64 {
        if s >= surface[j] {
            0.0
        } else {
            gfun(rays[j].eval(s))
        }
    };
    let src = RaySource {
        eval: &geval,
        surface: Some(surface.clone()),
        jacobi_alpha: sol.index.n.min(4.0),
    };
    kcal_axisym(&sol.xi_grid, &basis, &src, quad_order)
}

/// Boundary curve Ξ₁(ζ) sampled at the solution's ζ nodes.
pub fn boundary_curve(sol: &DistortedSolution) -> Vec<(f64, f64)> {
    sol.zeta_nodes
        .iter()
        .zip(&sol.xi1_curve)
        .map(|(&z, &x)| (z, x))
        .collect()
}
