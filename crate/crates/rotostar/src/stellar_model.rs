//! Physical equilibrium models: equation of state, field assembly from the
//! dimensionless enthalpy profile, Schwarzschild discriminant / buoyancy
//! frequency, admissibility checks, and directory persistence.
//!
//! The barotropic family is P = f^P(ρ) = A ρ^γ exp(Σ̃(υ)/C_V) with
//! υ = ρ^{γ−1}, Σ̃(υ) = Σ(υ) − Σ(0), and specific enthalpy
//! Υ = f^Υ(ρ) = ∫₀^ρ Df^P(ρ')/ρ' dρ'.  All fields follow from the
//! dimensionless Θ = Υ/Υ_O on ξ = r/𝖺, 𝖺 = √(Υ_O / 4πG ρ_O).

use std::f64::consts::PI;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gravity::hankel_potential;
use crate::interp::{fd_slopes, CubicInterp};
use crate::io::{self, IoError};
use crate::polytrope::{
    source_potential, BFunction, DistortedSolution, LaneEmdenSolution, PolytropeError,
    PolytropicIndex, RotationProfile,
};
use crate::quad::{adaptive_simpson, gauss_legendre, map_rule};

#[derive(Debug, Error)]
pub enum StellarError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("pressure-density-positivity condition fails at upsilon={u}: factor={value}")]
    PDPViolation { u: f64, value: f64 },
    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),
    #[error("density gradient degenerates away from the center at r={r}, zeta={zeta}")]
    DegenerateGradient { r: f64, zeta: f64 },
    #[error(transparent)]
    Profile(#[from] PolytropeError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Entropy profile Σ as a function of υ = ρ^{γ−1}.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum SigmaSpec {
    Constant(f64),
    /// coefficients c₀ + c₁υ + c₂υ² + …
    Polynomial(Vec<f64>),
}

impl SigmaSpec {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            SigmaSpec::Constant(c) => *c,
            SigmaSpec::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * u + ck),
        }
    }

    pub fn deriv(&self, u: f64) -> f64 {
        match self {
            SigmaSpec::Constant(_) => 0.0,
            SigmaSpec::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &ck)| acc * u + k as f64 * ck),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            SigmaSpec::Constant(_) => true,
            SigmaSpec::Polynomial(c) => c.len() <= 1,
        }
    }
}

/// Dense precomputed Υ(u) with exact nodal slopes; only built for
/// non-constant Σ, where no closed form exists.
#[derive(Debug, Clone)]
struct EnthalpyTable {
    ups_of_u: CubicInterp,
    u_max: f64,
}

/// Barotropic equation of state with evaluators f^P, f^Υ, f^ρ.
#[derive(Debug, Clone)]
pub struct EquationOfState {
    pub a_const: f64,
    pub gamma: f64,
    pub c_v: f64,
    pub sigma: SigmaSpec,
    table: Option<EnthalpyTable>,
}

/// Range of υ on which the positivity condition is sampled and the enthalpy
/// table is built.
const U_TABLE_MAX: f64 = 32.0;

pub fn build_eos(
    a_const: f64,
    gamma: f64,
    c_v: f64,
    sigma: SigmaSpec,
) -> Result<EquationOfState, StellarError> {
    if !(a_const > 0.0) {
        return Err(StellarError::InvalidParameter(format!(
            "A must be positive, got {a_const}"
        )));
    }
    if !(1.0 < gamma && gamma < 2.0) {
        return Err(StellarError::InvalidParameter(format!(
            "gamma must lie in (1, 2), got {gamma}"
        )));
    }
    if !(c_v > 0.0) {
        return Err(StellarError::InvalidParameter(format!(
            "C_V must be positive, got {c_v}"
        )));
    }
    let mut eos = EquationOfState {
        a_const,
        gamma,
        c_v,
        sigma,
        table: None,
    };
    // pressure-density-positivity: γ + ((γ−1)/C_V) υ Σ'(υ) > 0 on the range
    let nchk = 2048;
    for k in 0..=nchk {
        let u = U_TABLE_MAX * k as f64 / nchk as f64;
        let f = eos.pdp_factor(u);
        if f <= 0.0 {
            return Err(StellarError::PDPViolation { u, value: f });
        }
    }
    if !eos.sigma.is_constant() {
        eos.table = Some(eos.build_table(U_TABLE_MAX));
    }
    Ok(eos)
}

impl EquationOfState {
    fn sigma_tilde(&self, u: f64) -> f64 {
        self.sigma.eval(u) - self.sigma.eval(0.0)
    }

    /// γ + ((γ−1)/C_V) υ Σ'(υ); must stay positive.
    pub fn pdp_factor(&self, u: f64) -> f64 {
        self.gamma + (self.gamma - 1.0) / self.c_v * u * self.sigma.deriv(u)
    }

    /// dΥ/du along the substitution u = ρ^{γ−1}.
    fn dupsilon_du(&self, u: f64) -> f64 {
        self.a_const / (self.gamma - 1.0)
            * self.pdp_factor(u)
            * (self.sigma_tilde(u) / self.c_v).exp()
    }

    fn build_table(&self, u_max: f64) -> EnthalpyTable {
        let npanel = 16384usize;
        let h = u_max / npanel as f64;
        let (gx, gw) = gauss_legendre(8);
        let mut us = Vec::with_capacity(npanel + 1);
        let mut ups = Vec::with_capacity(npanel + 1);
        let mut dups = Vec::with_capacity(npanel + 1);
        let mut acc = 0.0;
        us.push(0.0);
        ups.push(0.0);
        dups.push(self.dupsilon_du(0.0));
        for k in 1..=npanel {
            let (a, b) = ((k - 1) as f64 * h, k as f64 * h);
            let (xs, ws) = map_rule(&gx, &gw, a, b);
            for (x, w) in xs.iter().zip(&ws) {
                acc += w * self.dupsilon_du(*x);
            }
            us.push(b);
            ups.push(acc);
            dups.push(self.dupsilon_du(b));
        }
        EnthalpyTable {
            ups_of_u: CubicInterp::with_slopes(&us, &ups, &dups),
            u_max,
        }
    }

    /// Υ as a function of u = ρ^{γ−1}.
    pub fn upsilon_of_u(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if self.sigma.is_constant() {
            return self.gamma * self.a_const / (self.gamma - 1.0) * u;
        }
        let table = self.table.as_ref().expect("table built for non-constant sigma");
        if u <= table.u_max {
            table.ups_of_u.eval(u)
        } else {
            table.ups_of_u.eval(table.u_max)
                + adaptive_simpson(&|x| self.dupsilon_du(x), table.u_max, u, 1e-13)
        }
    }

    /// P = f^P(ρ).
    pub fn f_p(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        let u = rho.powf(self.gamma - 1.0);
        self.a_const * rho.powf(self.gamma) * (self.sigma_tilde(u) / self.c_v).exp()
    }

    /// Υ = f^Υ(ρ).
    pub fn f_upsilon(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        self.upsilon_of_u(rho.powf(self.gamma - 1.0))
    }

    /// ρ = f^ρ(Υ), the monotone inverse of f^Υ; 0 for Υ ≤ 0.
    pub fn f_rho(&self, upsilon: f64) -> f64 {
        if upsilon <= 0.0 {
            return 0.0;
        }
        let iso = (self.gamma - 1.0) * upsilon / (self.gamma * self.a_const);
        if self.sigma.is_constant() {
            return iso.powf(1.0 / (self.gamma - 1.0));
        }
        // safeguarded Newton on u with the analytic derivative
        let mut u = iso.max(1e-300);
        let mut lo = 0.0f64;
        let mut hi = f64::INFINITY;
        for _ in 0..200 {
            let f = self.upsilon_of_u(u) - upsilon;
            if f > 0.0 {
                hi = hi.min(u);
            } else {
                lo = lo.max(u);
            }
            let step = f / self.dupsilon_du(u);
            let mut next = u - step;
            if !(next > lo && (hi.is_infinite() || next < hi)) {
                next = if hi.is_finite() {
                    0.5 * (lo + hi)
                } else {
                    2.0 * u
                };
            }
            if (next - u).abs() <= 1e-15 * u {
                u = next;
                break;
            }
            u = next;
        }
        u.powf(1.0 / (self.gamma - 1.0))
    }

    /// dΥ/dρ = (1/ρ) dP/dρ.
    pub fn dupsilon_drho(&self, rho: f64) -> f64 {
        let u = rho.powf(self.gamma - 1.0);
        self.a_const
            * rho.powf(self.gamma - 2.0)
            * (self.sigma_tilde(u) / self.c_v).exp()
            * self.pdp_factor(u)
    }

    /// γP/ρ², the compressibility weight of the quadratic form.
    pub fn gamma_p_over_rho2(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        self.gamma * self.f_p(rho) / (rho * rho)
    }

    /// Density correction factor relative to the pure polytrope:
    /// f^ρ(Υ) = ρ_O (Υ/Υ_O)^n (1 + Λ₂(Υ)); identically 0 when Σ is constant.
    pub fn lambda2_closure(&self, rho_o: f64, upsilon_o: f64) -> Option<impl Fn(f64) -> f64 + '_> {
        if self.sigma.is_constant() {
            return None;
        }
        let n = 1.0 / (self.gamma - 1.0);
        let gamma = self.gamma;
        let a = self.a_const;
        let eos = self.clone();
        Some(move |ups: f64| -> f64 {
            if ups <= 1e-12 * upsilon_o {
                // limit from the small-u expansion of f^ρ
                return ((gamma - 1.0) / (gamma * a)).powf(n) * upsilon_o.powf(n) / rho_o - 1.0;
            }
            eos.f_rho(ups) * (upsilon_o / ups).powf(n) / rho_o - 1.0
        })
    }
}

/// Natural length unit 𝖺 = √(Υ_O / 4πG ρ_O).
pub fn length_scale(upsilon_o: f64, rho_o: f64, g_const: f64) -> f64 {
    (upsilon_o / (4.0 * PI * g_const * rho_o)).sqrt()
}

/// Closed-form 𝖺 valid for constant Σ, expressed through (A, γ, Υ_O) only.
pub fn length_scale_closed_form(eos: &EquationOfState, upsilon_o: f64, g_const: f64) -> f64 {
    let g1 = eos.gamma - 1.0;
    (1.0 / (4.0 * PI * g_const).sqrt())
        * (eos.a_const * eos.gamma / g1).powf(1.0 / (2.0 * g1))
        * upsilon_o.powf(-(2.0 - eos.gamma) / (2.0 * g1))
}

/// Dimensionless enthalpy background Θ on (ξ, ζ).
#[derive(Debug, Clone)]
pub enum ThetaBackground {
    Spherical(LaneEmdenSolution),
    Distorted(DistortedSolution),
}

impl ThetaBackground {
    pub fn eval(&self, xi: f64, zeta: f64) -> f64 {
        match self {
            ThetaBackground::Spherical(s) => s.eval(xi),
            ThetaBackground::Distorted(d) => d.eval(xi, zeta),
        }
    }

    pub fn deriv_xi(&self, xi: f64, zeta: f64) -> f64 {
        match self {
            ThetaBackground::Spherical(s) => s.eval_deriv(xi),
            ThetaBackground::Distorted(d) => d.eval_deriv_xi(xi, zeta),
        }
    }

    pub fn deriv_zeta(&self, xi: f64, zeta: f64) -> f64 {
        match self {
            ThetaBackground::Spherical(_) => 0.0,
            ThetaBackground::Distorted(d) => d.eval_deriv_zeta(xi, zeta),
        }
    }

    pub fn xi1_at(&self, zeta: f64) -> f64 {
        match self {
            ThetaBackground::Spherical(s) => s.xi1,
            ThetaBackground::Distorted(d) => d.xi1_at(zeta),
        }
    }
}

/// Assembled equilibrium model: scales, sampled fields, and evaluators.
#[derive(Debug, Clone)]
pub struct StellarModel {
    pub eos: EquationOfState,
    pub index: PolytropicIndex,
    pub rotation: RotationProfile,
    pub isentropic: bool,
    pub g_const: f64,
    pub rho_o: f64,
    pub upsilon_o: f64,
    pub a_scale: f64,
    pub phi_center: f64,
    /// largest boundary radius over ζ (equatorial radius when rotating)
    pub r_boundary: f64,
    pub background: ThetaBackground,
    pub r_grid: Vec<f64>,
    pub zeta_nodes: Vec<f64>,
    pub zeta_weights: Vec<f64>,
    /// physical boundary radius per ζ node
    pub boundary: Vec<f64>,
    pub rho: Array2<f64>,
    pub p: Array2<f64>,
    pub upsilon: Array2<f64>,
    pub phi: Array2<f64>,
    pub a_field: Array2<f64>,
    pub n2_field: Array2<f64>,
}

impl StellarModel {
    pub fn is_spherical(&self) -> bool {
        matches!(self.background, ThetaBackground::Spherical(_))
    }

    pub fn theta_at(&self, r: f64, zeta: f64) -> f64 {
        self.background.eval(r / self.a_scale, zeta)
    }

    pub fn upsilon_at(&self, r: f64, zeta: f64) -> f64 {
        self.upsilon_o * self.theta_at(r, zeta)
    }

    pub fn rho_at(&self, r: f64, zeta: f64) -> f64 {
        self.eos.f_rho(self.upsilon_at(r, zeta))
    }

    pub fn p_at(&self, r: f64, zeta: f64) -> f64 {
        self.eos.f_p(self.rho_at(r, zeta))
    }

    pub fn boundary_at(&self, zeta: f64) -> f64 {
        self.a_scale * self.background.xi1_at(zeta)
    }

    /// Centrifugal integral 𝔅(ϖ) = ∫₀^ϖ (Ω + ω_b)² ϖ' dϖ' at physical
    /// cylindrical radius.
    pub fn centrifugal(&self, w_phys: f64) -> f64 {
        match &self.background {
            ThetaBackground::Spherical(_) => 0.0,
            ThetaBackground::Distorted(d) => {
                self.upsilon_o * d.b_fn.eval(w_phys / self.a_scale)
            }
        }
    }

    fn centrifugal_deriv(&self, w_phys: f64) -> f64 {
        match &self.background {
            ThetaBackground::Spherical(_) => 0.0,
            ThetaBackground::Distorted(d) => {
                self.upsilon_o / self.a_scale * d.b_fn.eval_deriv(w_phys / self.a_scale)
            }
        }
    }

    /// Physical gradient of Υ in (e_r, e_θ) components.
    pub fn grad_upsilon(&self, r: f64, zeta: f64) -> (f64, f64) {
        let xi = r / self.a_scale;
        let dr = self.upsilon_o / self.a_scale * self.background.deriv_xi(xi, zeta);
        let dth = if r > 0.0 {
            -self.upsilon_o * (1.0 - zeta * zeta).max(0.0).sqrt() / r
                * self.background.deriv_zeta(xi, zeta)
        } else {
            0.0
        };
        (dr, dth)
    }

    /// Physical gradient of ρ (chain rule through the EOS).
    pub fn grad_rho(&self, r: f64, zeta: f64) -> (f64, f64) {
        let rho = self.rho_at(r, zeta);
        if rho <= 0.0 {
            return (0.0, 0.0);
        }
        let drho_dups = 1.0 / self.eos.dupsilon_drho(rho);
        let (gr, gt) = self.grad_upsilon(r, zeta);
        (drho_dups * gr, drho_dups * gt)
    }

    /// Gradient of Φ via the Bernoulli relation
    /// gradΦ = −gradΥ + 𝔅'(ϖ) grad ϖ.
    pub fn grad_phi(&self, r: f64, zeta: f64) -> (f64, f64) {
        let (ur, ut) = self.grad_upsilon(r, zeta);
        let s = (1.0 - zeta * zeta).max(0.0).sqrt();
        let db = self.centrifugal_deriv(r * s);
        (-ur + db * s, -ut + db * zeta)
    }

    /// Schwarzschild discriminant
    /// 𝒜 = ((γ−1)/(γ C_V)) υ Σ'(υ) ‖grad υ‖ at υ = ρ^{γ−1}.
    pub fn discriminant_at(&self, r: f64, zeta: f64) -> f64 {
        if self.isentropic {
            return 0.0;
        }
        let rho = self.rho_at(r, zeta);
        if rho <= 0.0 {
            return 0.0;
        }
        let u = rho.powf(self.eos.gamma - 1.0);
        let (gr, gt) = self.grad_upsilon(r, zeta);
        // grad υ through du/dΥ
        let du_dups = 1.0 / self.eos.dupsilon_du(u);
        let grad_u = du_dups * (gr * gr + gt * gt).sqrt();
        (self.eos.gamma - 1.0) / (self.eos.gamma * self.eos.c_v) * u * self.eos.sigma.deriv(u)
            * grad_u
    }

    /// 𝒩² = 𝒜 (gradΦ | n), n = gradρ / ‖gradρ‖.
    pub fn n2_at(&self, r: f64, zeta: f64) -> f64 {
        if self.isentropic {
            return 0.0;
        }
        let (rr, rt) = self.grad_rho(r, zeta);
        let norm = (rr * rr + rt * rt).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let (pr, pt) = self.grad_phi(r, zeta);
        self.discriminant_at(r, zeta) * (pr * rr + pt * rt) / norm
    }
}

/// Integrate θ'' + (2/ξ)θ' = −𝔤(θ) from a series start to the first zero of θ.
fn solve_radial(
    source: &dyn Fn(f64) -> f64,
    index: PolytropicIndex,
) -> Result<LaneEmdenSolution, StellarError> {
    let h = 5e-4;
    let xi_max = 100.0;
    let xs: f64 = 1e-3;
    let g1 = source(1.0);
    let f = |x: f64, th: f64, v: f64| -> (f64, f64) { (v, -source(th) - 2.0 * v / x) };
    let step = |x: f64, th: f64, v: f64, hh: f64| -> (f64, f64) {
        let (k1t, k1v) = f(x, th, v);
        let (k2t, k2v) = f(x + 0.5 * hh, th + 0.5 * hh * k1t, v + 0.5 * hh * k1v);
        let (k3t, k3v) = f(x + 0.5 * hh, th + 0.5 * hh * k2t, v + 0.5 * hh * k2v);
        let (k4t, k4v) = f(x + hh, th + hh * k3t, v + hh * k3v);
        (
            th + hh / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t),
            v + hh / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
        )
    };
    let mut xi_grid = vec![0.0];
    let mut theta = vec![1.0];
    let mut dtheta = vec![0.0];
    let mut x = xs;
    let mut th = 1.0 - g1 * xs * xs / 6.0;
    let mut v = -g1 * xs / 3.0;
    xi_grid.push(x);
    theta.push(th);
    dtheta.push(v);
    loop {
        let (th1, v1) = step(x, th, v, h);
        if th1 <= 0.0 {
            let probe = |delta: f64| -> (f64, f64) {
                if delta == 0.0 {
                    return (th, v);
                }
                let m = 8;
                let hh = delta / m as f64;
                let (mut tt, mut vv, mut xx) = (th, v, x);
                for _ in 0..m {
                    let (t2, v2) = step(xx, tt, vv, hh);
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
            xi_grid.push(x + delta);
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
            return Err(PolytropeError::NoZeroFound(xi_max).into());
        }
    }
}

/// Non-rotating model on a uniform radial mesh of `nr` panels.
pub fn build_spherical_model(
    eos: &EquationOfState,
    rho_o: f64,
    g_const: f64,
    nr: usize,
) -> Result<StellarModel, StellarError> {
    if !(rho_o > 0.0 && g_const > 0.0) {
        return Err(StellarError::InvalidParameter(
            "rho_O and G must be positive".into(),
        ));
    }
    let index = PolytropicIndex::from_gamma(eos.gamma)?;
    let upsilon_o = eos.f_upsilon(rho_o);
    let a_scale = length_scale(upsilon_o, rho_o, g_const);
    let isentropic = eos.sigma.is_constant();
    let profile = if isentropic {
        crate::polytrope::solve_lane_emden(index, 1e-12)?
    } else {
        let src = move |th: f64| -> f64 {
            if th <= 0.0 {
                0.0
            } else {
                eos.f_rho(upsilon_o * th) / rho_o
            }
        };
        solve_radial(&src, index)?
    };
    let r_b = a_scale * profile.xi1;
    let r_grid: Vec<f64> = (0..=nr).map(|i| r_b * i as f64 / nr as f64).collect();
    let mut rho = Array2::zeros((nr + 1, 1));
    let mut p = Array2::zeros((nr + 1, 1));
    let mut ups = Array2::zeros((nr + 1, 1));
    for (i, &r) in r_grid.iter().enumerate() {
        let upsv = upsilon_o * profile.eval(r / a_scale);
        let rhov = if i == 0 { rho_o } else { eos.f_rho(upsv) };
        ups[[i, 0]] = upsv;
        rho[[i, 0]] = rhov;
        p[[i, 0]] = eos.f_p(rhov);
    }
    // potential by the radial kernel transform (independent of the profile ODE)
    let rho_col: Vec<f64> = (0..=nr).map(|i| rho[[i, 0]]).collect();
    let psi = hankel_potential(&r_grid, &rho_col, 0, 8);
    let mut phi = Array2::zeros((nr + 1, 1));
    for i in 0..=nr {
        phi[[i, 0]] = 4.0 * PI * g_const * psi[i];
    }
    let mut model = StellarModel {
        eos: eos.clone(),
        index,
        rotation: RotationProfile::none(),
        isentropic,
        g_const,
        rho_o,
        upsilon_o,
        a_scale,
        phi_center: phi[[0, 0]],
        r_boundary: r_b,
        background: ThetaBackground::Spherical(profile),
        r_grid,
        zeta_nodes: vec![0.0],
        zeta_weights: vec![2.0],
        boundary: vec![r_b],
        rho,
        p,
        upsilon: ups,
        phi,
        a_field: Array2::zeros((nr + 1, 1)),
        n2_field: Array2::zeros((nr + 1, 1)),
    };
    let (af, n2) = discriminant_and_buoyancy(&model)?;
    model.a_field = af;
    model.n2_field = n2;
    Ok(model)
}

/// Rotating model on the distorted solution's (ξ, ζ) grid.
pub fn build_rotating_model(
    eos: &EquationOfState,
    rho_o: f64,
    g_const: f64,
    rotation: RotationProfile,
    distorted: &DistortedSolution,
) -> Result<StellarModel, StellarError> {
    if !(rho_o > 0.0 && g_const > 0.0) {
        return Err(StellarError::InvalidParameter(
            "rho_O and G must be positive".into(),
        ));
    }
    let index = PolytropicIndex::from_gamma(eos.gamma)?;
    if (distorted.index.gamma - eos.gamma).abs() > 1e-12 {
        return Err(StellarError::InconsistentInputs(format!(
            "distorted solution was built for gamma={}, eos has gamma={}",
            distorted.index.gamma, eos.gamma
        )));
    }
    if rotation.is_zero() != distorted.b_fn.is_zero() {
        return Err(StellarError::InconsistentInputs(
            "rotation profile and centrifugal function disagree about being zero".into(),
        ));
    }
    let upsilon_o = eos.f_upsilon(rho_o);
    let a_scale = length_scale(upsilon_o, rho_o, g_const);
    // the centrifugal function must be the one generated by this rotation
    // profile at these scales
    if !rotation.is_zero() {
        let pibar_max = *distorted.b_fn.pibar.last().unwrap();
        let check = crate::polytrope::build_b_function(
            &rotation,
            upsilon_o,
            a_scale,
            pibar_max,
            distorted.b_fn.pibar.len() - 1,
            None,
        )?;
        let scale = distorted.b_fn.norm1.max(1e-300);
        for (&w, &bv) in distorted.b_fn.pibar.iter().zip(&distorted.b_fn.b) {
            if (check.eval(w) - bv).abs() > 1e-9 * scale {
                return Err(StellarError::InconsistentInputs(
                    "centrifugal function does not match the rotation profile at these scales"
                        .into(),
                ));
            }
        }
    }

    let isentropic = eos.sigma.is_constant();
    let nz = distorted.zeta_nodes.len();
    let nxi = distorted.xi_grid.len() - 1;
    let r_grid: Vec<f64> = distorted.xi_grid.iter().map(|&x| a_scale * x).collect();
    let boundary: Vec<f64> = distorted.xi1_curve.iter().map(|&x| a_scale * x).collect();
    let r_b = boundary.iter().cloned().fold(0.0f64, f64::max);

    let l2 = eos.lambda2_closure(rho_o, upsilon_o);
    let l2_ref: Option<&dyn Fn(f64) -> f64> = l2.as_ref().map(|f| f as &dyn Fn(f64) -> f64);
    let kg = source_potential(distorted, l2_ref, upsilon_o, 8);

    let mut rho = Array2::zeros((nxi + 1, nz));
    let mut p = Array2::zeros((nxi + 1, nz));
    let mut ups = Array2::zeros((nxi + 1, nz));
    let mut phi = Array2::zeros((nxi + 1, nz));
    for i in 0..=nxi {
        for j in 0..nz {
            let th = distorted.theta[[i, j]];
            let upsv = upsilon_o * th;
            let rhov = if i == 0 {
                rho_o
            } else if distorted.xi_grid[i] >= distorted.xi1_curve[j] {
                0.0
            } else {
                eos.f_rho(upsv)
            };
            ups[[i, j]] = upsv;
            rho[[i, j]] = rhov;
            p[[i, j]] = eos.f_p(rhov);
            phi[[i, j]] = -upsilon_o * kg[[i, j]];
        }
    }
    let phi_center = phi[[0, 0]];
    let mut model = StellarModel {
        eos: eos.clone(),
        index,
        rotation,
        isentropic,
        g_const,
        rho_o,
        upsilon_o,
        a_scale,
        phi_center,
        r_boundary: r_b,
        background: ThetaBackground::Distorted(distorted.clone()),
        r_grid,
        zeta_nodes: distorted.zeta_nodes.clone(),
        zeta_weights: distorted.zeta_weights.clone(),
        boundary,
        rho,
        p,
        upsilon: ups,
        phi,
        a_field: Array2::zeros((nxi + 1, nz)),
        n2_field: Array2::zeros((nxi + 1, nz)),
    };
    let (af, n2) = discriminant_and_buoyancy(&model)?;
    model.a_field = af;
    model.n2_field = n2;
    Ok(model)
}

/// Sampled (𝒜, 𝒩²) on the model grid; 0 at the center and outside the star.
pub fn discriminant_and_buoyancy(
    model: &StellarModel,
) -> Result<(Array2<f64>, Array2<f64>), StellarError> {
    let nr = model.r_grid.len();
    let nz = model.zeta_nodes.len();
    let mut af = Array2::zeros((nr, nz));
    let mut n2 = Array2::zeros((nr, nz));
    if model.isentropic {
        return Ok((af, n2));
    }
    let grad_scale = model.upsilon_o / model.a_scale;
    for (i, &r) in model.r_grid.iter().enumerate() {
        for (j, &z) in model.zeta_nodes.iter().enumerate() {
            if r == 0.0 || model.rho[[i, j]] <= 0.0 {
                continue;
            }
            if r < model.boundary[j] * 0.999 {
                let (gr, gt) = model.grad_upsilon(r, z);
                if (gr * gr + gt * gt).sqrt() < 1e-12 * grad_scale {
                    return Err(StellarError::DegenerateGradient { r, zeta: z });
                }
            }
            af[[i, j]] = model.discriminant_at(r, z);
            n2[[i, j]] = model.n2_at(r, z);
        }
    }
    Ok((af, n2))
}

/// Per-condition admissibility outcome with numerical witnesses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// ρ > 0 strictly inside, 0 outside
    pub positivity: bool,
    /// all sampled fields finite
    pub smoothness: bool,
    /// ρ and P strictly decreasing along rays
    pub monotonicity: bool,
    /// finite nonzero inward slope of ρ^{γ−1} at the boundary
    pub vacuum_boundary: bool,
    /// P = f^P(ρ) pointwise
    pub barotropy: bool,
    /// fitted C with ∂Θ/∂ξ ≤ −ξ/C on the sampled interior
    pub slope_constant: f64,
    pub boundary_slope_min: f64,
    pub boundary_slope_max: f64,
    /// worst ratio of measured boundary slope to the profile-based scale
    pub boundary_slope_ratio: f64,
    pub barotropy_defect: f64,
    pub all_pass: bool,
}

pub fn check_admissible(model: &StellarModel) -> AdmissibilityReport {
    let mut positivity = true;
    let mut smoothness = true;
    let mut monotonicity = true;
    let mut barotropy_defect = 0.0f64;
    let mut slope_constant = 0.0f64;
    let nsample = 64;

    for v in model
        .rho
        .iter()
        .chain(model.p.iter())
        .chain(model.phi.iter())
        .chain(model.a_field.iter())
        .chain(model.n2_field.iter())
    {
        if !v.is_finite() {
            smoothness = false;
        }
    }

    for (j, &z) in model.zeta_nodes.iter().enumerate() {
        let rb = model.boundary[j];
        let mut prev_rho = f64::INFINITY;
        let mut prev_p = f64::INFINITY;
        for k in 1..=nsample {
            let frac = 0.02 + 0.96 * k as f64 / nsample as f64;
            let r = frac * rb;
            let rho = model.rho_at(r, z);
            let p = model.p_at(r, z);
            if rho <= 0.0 {
                positivity = false;
            }
            if rho >= prev_rho || p >= prev_p {
                monotonicity = false;
            }
            prev_rho = rho;
            prev_p = p;
            barotropy_defect = barotropy_defect.max((p - model.eos.f_p(rho)).abs());
            let xi = r / model.a_scale;
            let dth = model.background.deriv_xi(xi, z);
            if dth >= 0.0 {
                slope_constant = f64::INFINITY;
                monotonicity = false;
            } else {
                slope_constant = slope_constant.max(-xi / dth);
            }
        }
        // exterior vacuum
        for k in 1..=8 {
            let r = rb * (1.0 + 0.02 * k as f64);
            if model.rho_at(r, z) != 0.0 {
                positivity = false;
            }
        }
    }

    // boundary slope of υ = ρ^{γ−1} along each ray, one-sided from inside
    let mut slope_min = f64::INFINITY;
    let mut slope_max = 0.0f64;
    let mut ratio_worst = 1.0f64;
    for (j, &z) in model.zeta_nodes.iter().enumerate() {
        let rb = model.boundary[j];
        let delta = 1e-4 * rb;
        let u_in = model.rho_at(rb - delta, z).powf(model.eos.gamma - 1.0);
        let slope = u_in / delta;
        slope_min = slope_min.min(slope);
        slope_max = slope_max.max(slope);
        // expected scale from the profile: dυ/dΥ(0⁺)·Υ_O|∂Θ/∂ξ|/𝖺
        let dth = model
            .background
            .deriv_xi(rb / model.a_scale, z)
            .abs();
        let expected = (model.eos.gamma - 1.0) / (model.eos.gamma * model.eos.a_const)
            * model.upsilon_o
            * dth
            / model.a_scale;
        if expected > 0.0 {
            let ratio = slope / expected;
            if (ratio - 1.0).abs() > (ratio_worst - 1.0).abs() {
                ratio_worst = ratio;
            }
        }
    }
    let vacuum_boundary = slope_min > 0.0 && slope_max.is_finite();
    let barotropy = barotropy_defect <= 1e-12 * model.eos.f_p(model.rho_o).max(1.0);

    let all_pass = positivity && smoothness && monotonicity && vacuum_boundary && barotropy;
    AdmissibilityReport {
        positivity,
        smoothness,
        monotonicity,
        vacuum_boundary,
        barotropy,
        slope_constant,
        boundary_slope_min: slope_min,
        boundary_slope_max: slope_max,
        boundary_slope_ratio: ratio_worst,
        barotropy_defect,
        all_pass,
    }
}

/// Sup of the Bernoulli defect |Υ + Φ − 𝔅 − (Υ_O + Φ(O))| over interior grid
/// nodes, normalized by Υ_O.
pub fn bernoulli_residual(model: &StellarModel) -> f64 {
    let mut worst = 0.0f64;
    let konst = model.upsilon_o + model.phi_center;
    for (i, &r) in model.r_grid.iter().enumerate() {
        for (j, &z) in model.zeta_nodes.iter().enumerate() {
            if model.rho[[i, j]] <= 0.0 {
                continue;
            }
            let w = r * (1.0 - z * z).max(0.0).sqrt();
            let res = model.upsilon[[i, j]] + model.phi[[i, j]] - model.centrifugal(w) - konst;
            worst = worst.max(res.abs());
        }
    }
    worst / model.upsilon_o
}

/// Sup of |dΥ/dr + dΦ/dr| over interior radial nodes (spherical models),
/// normalized by Υ_O/𝖺.
pub fn hydrostatic_residual(model: &StellarModel) -> f64 {
    let phi_col: Vec<f64> = (0..model.r_grid.len()).map(|i| model.phi[[i, 0]]).collect();
    let dphi = fd_slopes(&model.r_grid, &phi_col);
    let mut worst = 0.0f64;
    for (i, &r) in model.r_grid.iter().enumerate() {
        if r <= 0.0 || r > 0.95 * model.r_boundary {
            continue;
        }
        let (dups, _) = model.grad_upsilon(r, 0.0);
        worst = worst.max((dups + dphi[i]).abs());
    }
    worst / (model.upsilon_o / model.a_scale)
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelMeta {
    format_version: u32,
    kind: String,
    a_const: f64,
    gamma: f64,
    c_v: f64,
    sigma: SigmaSpec,
    rho_o: f64,
    upsilon_o: f64,
    a_scale: f64,
    g_const: f64,
    phi_center: f64,
    r_boundary: f64,
    isentropic: bool,
    rotation: RotationProfile,
    xi1_spherical: Option<f64>,
    xi0: Option<f64>,
    iterations: Option<usize>,
    residual: Option<f64>,
}

/// Persist a model as JSON metadata plus full-precision CSV tables.
pub fn save_model(model: &StellarModel, dir: &Path) -> Result<(), StellarError> {
    std::fs::create_dir_all(dir).map_err(IoError::from)?;
    let (kind, xi1_sph, xi0, iterations, residual) = match &model.background {
        ThetaBackground::Spherical(_) => ("spherical".to_string(), None, None, None, None),
        ThetaBackground::Distorted(d) => (
            "distorted".to_string(),
            Some(d.xi1_spherical),
            Some(d.xi0),
            Some(d.iterations),
            Some(d.residual),
        ),
    };
    let meta = ModelMeta {
        format_version: io::FORMAT_VERSION,
        kind,
        a_const: model.eos.a_const,
        gamma: model.eos.gamma,
        c_v: model.eos.c_v,
        sigma: model.eos.sigma.clone(),
        rho_o: model.rho_o,
        upsilon_o: model.upsilon_o,
        a_scale: model.a_scale,
        g_const: model.g_const,
        phi_center: model.phi_center,
        r_boundary: model.r_boundary,
        isentropic: model.isentropic,
        rotation: model.rotation.clone(),
        xi1_spherical: xi1_sph,
        xi0,
        iterations,
        residual,
    };
    io::write_json(&dir.join("metadata.json"), &meta)?;

    match &model.background {
        ThetaBackground::Spherical(s) => {
            let rows: Vec<Vec<f64>> = s
                .xi_grid
                .iter()
                .zip(s.theta.iter().zip(&s.dtheta))
                .map(|(&x, (&t, &d))| vec![x, t, d])
                .collect();
            io::write_csv(&dir.join("background.csv"), &["xi", "theta", "dtheta"], &rows)?;
        }
        ThetaBackground::Distorted(d) => {
            let nz = d.zeta_nodes.len();
            let names: Vec<String> = std::iter::once("xi".to_string())
                .chain((0..nz).map(|j| format!("theta_{j}")))
                .collect();
            let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
            let rows: Vec<Vec<f64>> = d
                .xi_grid
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    std::iter::once(x)
                        .chain((0..nz).map(|j| d.theta[[i, j]]))
                        .collect()
                })
                .collect();
            io::write_csv(&dir.join("background.csv"), &name_refs, &rows)?;
            let zrows: Vec<Vec<f64>> = (0..nz)
                .map(|j| vec![d.zeta_nodes[j], d.zeta_weights[j], d.xi1_curve[j]])
                .collect();
            io::write_csv(&dir.join("zeta.csv"), &["zeta", "weight", "xi1"], &zrows)?;
            let brows: Vec<Vec<f64>> = d
                .b_fn
                .pibar
                .iter()
                .zip(d.b_fn.b.iter().zip(&d.b_fn.db))
                .map(|(&w, (&b, &db))| vec![w, b, db])
                .collect();
            io::write_csv(&dir.join("centrifugal.csv"), &["pibar", "b", "db"], &brows)?;
        }
    }

    let nz = model.zeta_nodes.len();
    let mut names: Vec<String> = vec!["r".to_string()];
    for j in 0..nz {
        for f in ["rho", "p", "upsilon", "phi", "aa", "n2"] {
            names.push(format!("{f}_{j}"));
        }
    }
    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<f64>> = model
        .r_grid
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let mut row = vec![r];
            for j in 0..nz {
                row.extend_from_slice(&[
                    model.rho[[i, j]],
                    model.p[[i, j]],
                    model.upsilon[[i, j]],
                    model.phi[[i, j]],
                    model.a_field[[i, j]],
                    model.n2_field[[i, j]],
                ]);
            }
            row
        })
        .collect();
    io::write_csv(&dir.join("fields.csv"), &name_refs, &rows)?;
    Ok(())
}

/// Load a model saved by `save_model`.
pub fn load_model(dir: &Path) -> Result<StellarModel, StellarError> {
    let meta: ModelMeta = io::read_versioned_json(&dir.join("metadata.json"))?;
    let eos = build_eos(meta.a_const, meta.gamma, meta.c_v, meta.sigma.clone())?;
    let index = PolytropicIndex::from_gamma(meta.gamma)?;

    let background = if meta.kind == "spherical" {
        let (_, rows) = io::read_csv(&dir.join("background.csv"))?;
        let xi: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let th: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        let dth: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        ThetaBackground::Spherical(LaneEmdenSolution::from_parts(index, xi, th, dth))
    } else {
        let (_, zrows) = io::read_csv(&dir.join("zeta.csv"))?;
        let zeta: Vec<f64> = zrows.iter().map(|r| r[0]).collect();
        let zw: Vec<f64> = zrows.iter().map(|r| r[1]).collect();
        let xi1: Vec<f64> = zrows.iter().map(|r| r[2]).collect();
        let (_, brows) = io::read_csv(&dir.join("centrifugal.csv"))?;
        let b_fn = BFunction::from_samples(
            brows.iter().map(|r| r[0]).collect(),
            brows.iter().map(|r| r[1]).collect(),
            brows.iter().map(|r| r[2]).collect(),
        );
        let (hdr, rows) = io::read_csv(&dir.join("background.csv"))?;
        let nz = hdr.len() - 1;
        if nz != zeta.len() {
            return Err(IoError::CorruptTable {
                path: dir.join("background.csv").display().to_string(),
                detail: format!("{nz} theta columns but {} zeta nodes", zeta.len()),
            }
            .into());
        }
        let xi: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let mut theta = Array2::zeros((rows.len(), nz));
        for (i, row) in rows.iter().enumerate() {
            for j in 0..nz {
                theta[[i, j]] = row[j + 1];
            }
        }
        ThetaBackground::Distorted(DistortedSolution::from_parts(
            index,
            b_fn,
            xi,
            zeta,
            zw,
            theta,
            xi1,
            meta.xi1_spherical.unwrap_or(0.0),
            meta.xi0.unwrap_or(0.0),
            meta.iterations.unwrap_or(0),
            meta.residual.unwrap_or(0.0),
        ))
    };

    let (hdr, rows) = io::read_csv(&dir.join("fields.csv"))?;
    let nz = (hdr.len() - 1) / 6;
    let nr = rows.len();
    let r_grid: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let mut rho = Array2::zeros((nr, nz));
    let mut p = Array2::zeros((nr, nz));
    let mut ups = Array2::zeros((nr, nz));
    let mut phi = Array2::zeros((nr, nz));
    let mut af = Array2::zeros((nr, nz));
    let mut n2 = Array2::zeros((nr, nz));
    for (i, row) in rows.iter().enumerate() {
        for j in 0..nz {
            let base = 1 + 6 * j;
            rho[[i, j]] = row[base];
            p[[i, j]] = row[base + 1];
            ups[[i, j]] = row[base + 2];
            phi[[i, j]] = row[base + 3];
            af[[i, j]] = row[base + 4];
            n2[[i, j]] = row[base + 5];
        }
    }
    let (zeta_nodes, zeta_weights, boundary) = match &background {
        ThetaBackground::Spherical(_) => (vec![0.0], vec![2.0], vec![meta.r_boundary]),
        ThetaBackground::Distorted(d) => (
            d.zeta_nodes.clone(),
            d.zeta_weights.clone(),
            d.xi1_curve.iter().map(|&x| meta.a_scale * x).collect(),
        ),
    };
    Ok(StellarModel {
        eos,
        index,
        rotation: meta.rotation,
        isentropic: meta.isentropic,
        g_const: meta.g_const,
        rho_o: meta.rho_o,
        upsilon_o: meta.upsilon_o,
        a_scale: meta.a_scale,
        phi_center: meta.phi_center,
        r_boundary: meta.r_boundary,
        background,
        r_grid,
        zeta_nodes,
        zeta_weights,
        boundary,
        rho,
        p,
        upsilon: ups,
        phi,
        a_field: af,
        n2_field: n2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn iso_eos() -> EquationOfState {
        build_eos(1.0, 5.0 / 3.0, 1.0, SigmaSpec::Constant(0.0)).unwrap()
    }

    #[test]
    fn isentropic_closed_forms() {
        let eos = iso_eos();
        for &rho in &[0.0, 0.3, 1.0, 2.5] {
            assert_abs_diff_eq!(eos.f_p(rho), rho.powf(5.0 / 3.0), epsilon = 1e-14);
            assert_abs_diff_eq!(
                eos.f_upsilon(rho),
                2.5 * rho.powf(2.0 / 3.0),
                epsilon = 1e-13
            );
        }
        assert_eq!(eos.f_rho(0.0), 0.0);
        assert_eq!(eos.f_rho(-1.0), 0.0);
    }

    #[test]
    fn eos_roundtrip() {
        let eos = build_eos(
            0.8,
            1.4,
            2.0,
            SigmaSpec::Polynomial(vec![0.0, 0.1, -0.001]),
        )
        .unwrap();
        for &rho in &[1e-4, 0.01, 0.3, 1.0, 3.0] {
            let ups = eos.f_upsilon(rho);
            let back = eos.f_rho(ups);
            assert_abs_diff_eq!(back, rho, epsilon = 1e-10 * rho.max(1.0));
            let fwd = eos.f_upsilon(back);
            assert_abs_diff_eq!(fwd, ups, epsilon = 1e-10 * ups.max(1.0));
        }
    }

    #[test]
    fn enthalpy_matches_refined_quadrature() {
        let eps = 0.1;
        let eos = build_eos(1.0, 1.5, 1.0, SigmaSpec::Polynomial(vec![0.0, eps])).unwrap();
        // step-halved composite Simpson oracle for ∫₀^u dΥ/du du
        let oracle = |u: f64, n: usize| -> f64 {
            let h = u / n as f64;
            let f = |x: f64| eos.dupsilon_du(x);
            let mut s = f(0.0) + f(u);
            for k in 1..n {
                s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
            }
            s * h / 3.0
        };
        for &rho in &[0.2f64, 1.0, 2.0] {
            let u = rho.powf(0.5);
            let coarse = oracle(u, 1 << 12);
            let fine = oracle(u, 1 << 13);
            assert!((coarse - fine).abs() < 1e-12 * fine.abs().max(1.0));
            assert_abs_diff_eq!(eos.f_upsilon(rho), fine, epsilon = 1e-10 * fine.max(1.0));
        }
    }

    #[test]
    fn pdp_violation_detected() {
        let res = build_eos(1.0, 1.5, 0.1, SigmaSpec::Polynomial(vec![0.0, -2.0]));
        assert!(matches!(res, Err(StellarError::PDPViolation { .. })));
    }

    #[test]
    fn spherical_model_isentropic() {
        let eos = iso_eos();
        let model = build_spherical_model(&eos, 1.0, 1.0, 400).unwrap();
        assert_eq!(model.rho[[0, 0]], 1.0);
        // dΥ/dρ = γP/ρ² for the isentropic background
        for &rho in &[0.1, 0.5, 1.0] {
            assert_abs_diff_eq!(
                eos.dupsilon_drho(rho),
                eos.gamma_p_over_rho2(rho),
                epsilon = 1e-12
            );
        }
        // R = 𝖺 ξ1
        if let ThetaBackground::Spherical(s) = &model.background {
            assert_abs_diff_eq!(model.r_boundary, model.a_scale * s.xi1, epsilon = 1e-14);
        } else {
            panic!("expected spherical background");
        }
        // isentropic fields vanish
        for v in model.a_field.iter().chain(model.n2_field.iter()) {
            assert_eq!(*v, 0.0);
        }
        assert!(hydrostatic_residual(&model) < 1e-6);
        // closed-form length scale agrees with the general one
        assert_abs_diff_eq!(
            model.a_scale,
            length_scale_closed_form(&eos, model.upsilon_o, 1.0),
            epsilon = 1e-12 * model.a_scale
        );
    }

    #[test]
    fn spherical_mass_gauss_law() {
        let eos = iso_eos();
        let model = build_spherical_model(&eos, 1.0, 1.0, 800).unwrap();
        // M = ∫ ρ 4πr² dr by Simpson on the grid
        let n = model.r_grid.len() - 1;
        let h = model.r_grid[1] - model.r_grid[0];
        let mut mass = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let r = model.r_grid[i];
            mass += w * model.rho[[i, 0]] * 4.0 * PI * r * r;
        }
        mass *= h / 3.0;
        // Gauss: Φ'(R) = G M / R²
        let phi_col: Vec<f64> = (0..=n).map(|i| model.phi[[i, 0]]).collect();
        let dphi = fd_slopes(&model.r_grid, &phi_col);
        let flux_mass = dphi[n] * model.r_boundary * model.r_boundary / model.g_const;
        assert_abs_diff_eq!(mass, flux_mass, epsilon = 1e-6 * mass);
    }

    #[test]
    fn discriminant_signs() {
        // Σ' = ε > 0: entropy decreasing outward, convectively unstable sign
        let eos = build_eos(1.0, 1.5, 1.0, SigmaSpec::Polynomial(vec![0.0, 0.05])).unwrap();
        let model = build_spherical_model(&eos, 1.0, 1.0, 300).unwrap();
        let mid = model.r_grid.len() / 2;
        assert!(model.a_field[[mid, 0]] > 0.0, "A should be positive");
        assert!(model.n2_field[[mid, 0]] < 0.0, "N² should be negative");

        // Σ' = ε < 0: stable sign
        let eos2 = build_eos(1.0, 1.5, 1.0, SigmaSpec::Polynomial(vec![0.0, -0.05])).unwrap();
        let model2 = build_spherical_model(&eos2, 1.0, 1.0, 300).unwrap();
        assert!(model2.a_field[[mid, 0]] < 0.0);
        assert!(model2.n2_field[[mid, 0]] > 0.0);

        // nodewise sign identity N² = A·(gradΦ|n)
        for i in (1..model.r_grid.len()).step_by(37) {
            let a = model.a_field[[i, 0]];
            let n2 = model.n2_field[[i, 0]];
            if a == 0.0 {
                continue;
            }
            let r = model.r_grid[i];
            let (pr, pt) = model.grad_phi(r, 0.0);
            let (rr, rt) = model.grad_rho(r, 0.0);
            let norm = (rr * rr + rt * rt).sqrt();
            let proj = (pr * rr + pt * rt) / norm;
            assert_eq!(n2.signum(), a.signum() * proj.signum());
        }
    }

    #[test]
    fn n2_matches_pressure_form() {
        // 𝒩² = −𝒜 (gradP|gradρ)/(ρ‖gradρ‖) via hydrostatics
        let eos = build_eos(1.0, 1.5, 1.0, SigmaSpec::Polynomial(vec![0.0, 0.05])).unwrap();
        let model = build_spherical_model(&eos, 1.0, 1.0, 300).unwrap();
        for i in (5..model.r_grid.len() - 5).step_by(29) {
            let r = model.r_grid[i];
            let rho = model.rho[[i, 0]];
            if rho <= 0.0 {
                continue;
            }
            let a = model.a_field[[i, 0]];
            // gradP = ρ gradΥ (barotropic chain rule: dP/dr = ρ dΥ/dr)
            let (ur, _) = model.grad_upsilon(r, 0.0);
            let dp = rho * ur;
            let (rr, _) = model.grad_rho(r, 0.0);
            let alt = -a * dp * rr / (rho * rr.abs());
            assert_abs_diff_eq!(
                model.n2_field[[i, 0]],
                alt,
                epsilon = 1e-10 * alt.abs().max(1e-12)
            );
        }
    }

    #[test]
    fn admissibility_spherical() {
        let eos = iso_eos();
        let model = build_spherical_model(&eos, 1.0, 1.0, 300).unwrap();
        let rep = check_admissible(&model);
        assert!(rep.all_pass, "report: {rep:?}");
        assert!(rep.slope_constant.is_finite() && rep.slope_constant > 0.0);
        assert!(
            (rep.boundary_slope_ratio - 1.0).abs() < 0.2,
            "slope ratio {}",
            rep.boundary_slope_ratio
        );
    }

    #[test]
    fn admissibility_plateau_fails() {
        let eos = iso_eos();
        let mut model = build_spherical_model(&eos, 1.0, 1.0, 300).unwrap();
        // overwrite the profile with one flattened near the center
        if let ThetaBackground::Spherical(s) = &model.background {
            let xi: Vec<f64> = s.xi_grid.clone();
            let th: Vec<f64> = xi
                .iter()
                .map(|&x| {
                    if x < 0.4 * s.xi1 {
                        s.eval(0.4 * s.xi1)
                    } else {
                        s.eval(x)
                    }
                })
                .collect();
            let dth: Vec<f64> = xi
                .iter()
                .map(|&x| {
                    if x < 0.4 * s.xi1 {
                        0.0
                    } else {
                        s.eval_deriv(x)
                    }
                })
                .collect();
            model.background = ThetaBackground::Spherical(LaneEmdenSolution::from_parts(
                model.index,
                xi,
                th,
                dth,
            ));
        }
        let rep = check_admissible(&model);
        assert!(!rep.monotonicity);
        assert!(!rep.all_pass);
    }

    #[test]
    fn model_save_load_roundtrip() {
        let eos = iso_eos();
        let model = build_spherical_model(&eos, 1.0, 1.0, 120).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_model(&model, dir.path()).unwrap();
        let back = load_model(dir.path()).unwrap();
        assert_eq!(back.r_grid.len(), model.r_grid.len());
        for i in 0..model.r_grid.len() {
            assert_eq!(back.rho[[i, 0]].to_bits(), model.rho[[i, 0]].to_bits());
            assert_eq!(back.phi[[i, 0]].to_bits(), model.phi[[i, 0]].to_bits());
            assert_eq!(back.p[[i, 0]].to_bits(), model.p[[i, 0]].to_bits());
        }
        assert_eq!(back.a_scale.to_bits(), model.a_scale.to_bits());

        // truncated table → CorruptTable
        let fields = dir.path().join("fields.csv");
        let text = std::fs::read_to_string(&fields).unwrap();
        let cut: String = text
            .lines()
            .take(5)
            .map(|l| {
                let mut l = l.to_string();
                l.push('\n');
                l
            })
            .collect::<String>()
            + "1.0,2.0\n";
        std::fs::write(&fields, cut).unwrap();
        assert!(matches!(
            load_model(dir.path()),
            Err(StellarError::Io(IoError::CorruptTable { .. }))
        ));

        // legacy version tag → VersionMismatch
        save_model(&model, dir.path()).unwrap();
        let meta_path = dir.path().join("metadata.json");
        let meta = std::fs::read_to_string(&meta_path).unwrap();
        std::fs::write(
            &meta_path,
            meta.replace("\"format_version\": 1", "\"format_version\": 0"),
        )
        .unwrap();
        assert!(matches!(
            load_model(dir.path()),
            Err(StellarError::Io(IoError::VersionMismatch { .. }))
        ));
    }
}
