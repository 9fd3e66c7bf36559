//! Scenario configuration: JSON schema, defaults, and validation.

use rotostar::polytrope::DifferentialRotation;
use rotostar::stellar_model::SigmaSpec;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Top-level scenario file.  Every block has defaults so a minimal config only
/// needs the task list; unknown fields are rejected so typos surface as config
/// errors rather than silently ignored settings.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default)]
    pub eos: EosConfig,
    #[serde(default)]
    pub star: StarConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    pub tasks: Vec<Task>,
    /// default artifact directory; the --out flag overrides it
    #[serde(default)]
    pub output_dir: Option<String>,
    /// seed for randomized test fields; the --seed flag overrides it
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_version() -> u32 {
    1
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Equilibrium,
    Spectrum,
    Evolve,
    Stability,
    Kstar,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Equilibrium => "equilibrium",
            Task::Spectrum => "spectrum",
            Task::Evolve => "evolve",
            Task::Stability => "stability",
            Task::Kstar => "kstar",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EosConfig {
    pub gamma: f64,
    /// polytropic constant A in P = Aρ^γ e^{Σ}
    #[serde(default = "one")]
    pub a_const: f64,
    #[serde(default = "one")]
    pub c_v: f64,
    /// entropy profile Σ(υ); constant means isentropic
    #[serde(default = "sigma_zero")]
    pub sigma: SigmaSpec,
}

fn one() -> f64 {
    1.0
}

fn sigma_zero() -> SigmaSpec {
    SigmaSpec::Constant(0.0)
}

impl Default for EosConfig {
    fn default() -> Self {
        EosConfig {
            gamma: 5.0 / 3.0,
            a_const: 1.0,
            c_v: 1.0,
            sigma: sigma_zero(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StarConfig {
    #[serde(default = "one")]
    pub rho_o: f64,
    #[serde(default = "one")]
    pub g_const: f64,
    #[serde(default)]
    pub rotation: RotationConfig,
}

impl Default for StarConfig {
    fn default() -> Self {
        StarConfig {
            rho_o: 1.0,
            g_const: 1.0,
            rotation: RotationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RotationConfig {
    /// rigid angular velocity Ω
    #[serde(default)]
    pub omega: f64,
    /// optional differential part ω_b(ϖ)
    #[serde(default = "no_differential")]
    pub differential: DifferentialRotation,
}

fn no_differential() -> DifferentialRotation {
    DifferentialRotation::None
}

impl Default for RotationConfig {
    fn default() -> Self {
        RotationConfig {
            omega: 0.0,
            differential: no_differential(),
        }
    }
}

impl RotationConfig {
    pub fn is_zero(&self) -> bool {
        self.omega == 0.0 && matches!(self.differential, DifferentialRotation::None)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    /// radial mesh for the spherical equilibrium profile
    #[serde(default = "default_nr")]
    pub nr: usize,
    /// radial collocation nodes per latitude for the vector operator set
    #[serde(default = "default_ns")]
    pub ns: usize,
    /// Gauss–Legendre latitudes for the vector operator set
    #[serde(default = "default_nzeta")]
    pub nzeta: usize,
    /// azimuthal wavenumbers to assemble
    #[serde(default = "default_m_values")]
    pub m_values: Vec<i32>,
    /// highest spherical-harmonic degree in the k* sweep
    #[serde(default = "default_lmax")]
    pub lmax: usize,
    /// radial quadrature size for the k* and seminorm integrals
    #[serde(default = "default_kstar_nr")]
    pub kstar_nr: usize,
    /// largest truncation radius, in units of the stellar radius, for the
    /// extrapolated degree-one potential positivity check
    #[serde(default = "default_r_infinity")]
    pub r_infinity: f64,
    /// time step for the evolve task
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// final time for the evolve task
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// solver / fixed-point tolerance for the distorted equilibrium
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// radial grid of the distorted (rotating) equilibrium solver
    #[serde(default = "default_distorted_nxi")]
    pub distorted_nxi: usize,
    /// latitudes of the distorted (rotating) equilibrium solver
    #[serde(default = "default_distorted_nzeta")]
    pub distorted_nzeta: usize,
    /// γ values swept by the kstar task
    #[serde(default = "default_kstar_gammas")]
    pub kstar_gammas: Vec<f64>,
}

fn default_nr() -> usize {
    400
}
fn default_ns() -> usize {
    12
}
fn default_nzeta() -> usize {
    8
}
fn default_m_values() -> Vec<i32> {
    vec![0]
}
fn default_lmax() -> usize {
    8
}
fn default_kstar_nr() -> usize {
    120
}
fn default_r_infinity() -> f64 {
    8.0
}
fn default_dt() -> f64 {
    0.01
}
fn default_t_end() -> f64 {
    0.5
}
fn default_tol() -> f64 {
    1e-10
}
fn default_distorted_nxi() -> usize {
    160
}
fn default_distorted_nzeta() -> usize {
    24
}
fn default_kstar_gammas() -> Vec<f64> {
    vec![1.4, 1.5, 5.0 / 3.0]
}

impl Default for NumericsConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults are total")
    }
}

/// Schema errors carry a dotted path to the offending field.
pub fn validate(cfg: &ScenarioConfig) -> Result<(), String> {
    if cfg.version != 1 {
        return Err(format!("version: unsupported value {}", cfg.version));
    }
    if !(cfg.eos.gamma > 1.0) {
        return Err(format!("eos.gamma: must exceed 1, got {}", cfg.eos.gamma));
    }
    if !(cfg.eos.a_const > 0.0) {
        return Err("eos.a_const: must be positive".into());
    }
    if !(cfg.eos.c_v > 0.0) {
        return Err("eos.c_v: must be positive".into());
    }
    if !(cfg.star.rho_o > 0.0) {
        return Err("star.rho_o: must be positive".into());
    }
    if !(cfg.star.g_const > 0.0) {
        return Err("star.g_const: must be positive".into());
    }
    if cfg.star.rotation.omega < 0.0 {
        return Err("star.rotation.omega: must be nonnegative".into());
    }
    let n = &cfg.numerics;
    if !(n.tol > 0.0) {
        return Err("numerics.tol: must be positive".into());
    }
    if !(n.dt > 0.0) || !(n.t_end > 0.0) {
        return Err("numerics.dt / numerics.t_end: must be positive".into());
    }
    if n.nr < 16 {
        return Err("numerics.nr: need at least 16 radial samples".into());
    }
    if !(n.r_infinity >= 8.0) {
        return Err("numerics.r_infinity: need at least 8 stellar radii".into());
    }
    let needs_operators = cfg
        .tasks
        .iter()
        .any(|t| matches!(t, Task::Spectrum | Task::Evolve | Task::Stability));
    if needs_operators && (n.ns < 6 || n.nzeta < 4) {
        return Err("numerics.ns / numerics.nzeta: operator tasks need ns ≥ 6, nzeta ≥ 4".into());
    }
    if needs_operators && n.m_values.is_empty() {
        return Err("numerics.m_values: operator tasks need at least one wavenumber".into());
    }
    for t in &cfg.tasks {
        if matches!(t, Task::Stability) {
            if !cfg.star.rotation.is_zero() {
                return Err(
                    "tasks.stability: the seminorm analysis needs a non-rotating background"
                        .into(),
                );
            }
            if !n.m_values.contains(&0) {
                return Err("numerics.m_values: the stability task needs the m = 0 sector".into());
            }
            if n.lmax < 4 {
                return Err("numerics.lmax: the stability task needs lmax ≥ 4".into());
            }
        }
        if matches!(t, Task::Kstar) {
            if n.lmax < 4 {
                return Err("numerics.lmax: the kstar task needs lmax ≥ 4".into());
            }
            if n.kstar_gammas.is_empty() {
                return Err("numerics.kstar_gammas: need at least one γ".into());
            }
            for &g in &n.kstar_gammas {
                if !(g > 4.0 / 3.0) {
                    return Err(format!(
                        "numerics.kstar_gammas: every γ must exceed 4/3, got {g}"
                    ));
                }
            }
        }
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<ScenarioConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let cfg: ScenarioConfig = serde_json::from_str(&text)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    validate(&cfg)?;
    Ok(cfg)
}
