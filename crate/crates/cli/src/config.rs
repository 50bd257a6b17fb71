//! Run configuration: strict JSON with defaults for every field except `n_sites`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use superabsorb::environment::VibRegime;
use superabsorb::experiments::{AngleGrid, DisorderTargets};
use superabsorb::geometry::{RingSpec, SiteParams, TrapMode, TrapSpec};
use superabsorb::hamiltonian::Convention;
use superabsorb::heatengine::{EngineConfig, LoadScan, PhononSpec, ReinitScheme};
use superabsorb::liouvillian::SolverOptions;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_sites: usize,
    #[serde(default)]
    pub site: SiteConfig,
    #[serde(default)]
    pub trap: TrapConfig,
    #[serde(default)]
    pub optical: OpticalConfig,
    #[serde(default)]
    pub phonons: PhononConfig,
    #[serde(default = "default_t_vib")]
    pub vib_temperature: f64,
    #[serde(default)]
    pub reinit: ReinitConfig,
    /// Ladder convention; detected from the couplings when absent.
    #[serde(default)]
    pub convention: Option<Convention>,
    #[serde(default)]
    pub load_scan: LoadScanConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub scaling: ScalingConfig,
    #[serde(default)]
    pub phasemap: PhaseMapConfig,
    #[serde(default)]
    pub angles: AnglesConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
}

fn default_t_vib() -> f64 {
    300.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SiteConfig {
    /// eV.
    pub omega_a: f64,
    /// s.
    pub tau_l: f64,
    /// m.
    pub r_nn: f64,
    pub theta_eq: f64,
    pub theta_zen: f64,
}

impl Default for SiteConfig {
    fn default() -> Self {
        SiteConfig { omega_a: 1.8, tau_l: 2.5e-9, r_nn: 1e-9, theta_eq: FRAC_PI_2, theta_zen: FRAC_PI_4 }
    }
}

impl From<SiteConfig> for SiteParams {
    fn from(s: SiteConfig) -> Self {
        SiteParams { omega_a: s.omega_a, tau_l: s.tau_l, r_nn: s.r_nn, theta_eq: s.theta_eq, theta_zen: s.theta_zen }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapConfig {
    pub mode: TrapMode,
    /// eV; matches ω_good when absent.
    pub omega_t: Option<f64>,
    pub gamma_x: f64,
    pub c_x: f64,
}

impl Default for TrapConfig {
    fn default() -> Self {
        TrapConfig { mode: TrapMode::Incoherent, omega_t: None, gamma_x: 1e-2, c_x: 1e-2 }
    }
}

impl TrapConfig {
    pub fn spec(&self) -> TrapSpec {
        match self.mode {
            TrapMode::Incoherent => TrapSpec { omega_t: self.omega_t, ..TrapSpec::incoherent(self.gamma_x) },
            TrapMode::Coherent => TrapSpec { omega_t: self.omega_t, ..TrapSpec::coherent(self.c_x) },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpticalConfig {
    /// K.
    pub temperature: f64,
    pub suppression: f64,
}

impl Default for OpticalConfig {
    fn default() -> Self {
        OpticalConfig { temperature: 5800.0, suppression: 0.99 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase", deny_unknown_fields)]
pub enum PhononConfig {
    None,
    Ohmic {
        #[serde(default = "default_regime")]
        regime: VibRegime,
        /// Overrides the regime multiplier when set.
        #[serde(default)]
        multiplier: Option<f64>,
    },
    #[serde(rename = "superohmic")]
    SuperOhmic { lambda: f64, omega_crit: f64 },
}

fn default_regime() -> VibRegime {
    VibRegime::Fast
}

impl Default for PhononConfig {
    fn default() -> Self {
        PhononConfig::Ohmic { regime: VibRegime::Fast, multiplier: None }
    }
}

impl PhononConfig {
    pub fn spec(&self) -> PhononSpec {
        match *self {
            PhononConfig::None => PhononSpec::None,
            PhononConfig::Ohmic { regime, multiplier } => PhononSpec::Ohmic { multiplier: multiplier.unwrap_or(regime.multiplier()) },
            PhononConfig::SuperOhmic { lambda, omega_crit } => PhononSpec::SuperOhmic { lambda, omega_crit },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReinitConfig {
    pub scheme: ReinitScheme,
    /// eV.
    pub gamma_r: f64,
}

impl Default for ReinitConfig {
    fn default() -> Self {
        ReinitConfig { scheme: ReinitScheme::Ladder, gamma_r: 1e-2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadScanConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub rel_tol: f64,
}

impl Default for LoadScanConfig {
    fn default() -> Self {
        let s = LoadScan::default();
        LoadScanConfig { min: s.min, max: s.max, points: s.points, rel_tol: s.rel_tol }
    }
}

impl From<LoadScanConfig> for LoadScan {
    fn from(c: LoadScanConfig) -> Self {
        LoadScan { min: c.min, max: c.max, points: c.points, rel_tol: c.rel_tol }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    pub kernel_tol: f64,
    pub refine_steps: usize,
    pub dense_limit: usize,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        let s = SolverOptions::default();
        ToleranceConfig { kernel_tol: s.kernel_tol, refine_steps: s.refine_steps, dense_limit: s.dense_limit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub suppression: Vec<f64>,
    pub gamma_r: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { suppression: vec![0.5, 0.9, 0.99], gamma_r: vec![1e-8, 1e-6, 1e-4, 1e-2] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    /// Ring sizes for full engine solves.
    pub n: Vec<usize>,
    /// Ring sizes for the Hamiltonian-only strength table.
    pub strength_n: Vec<usize>,
    pub power_cap: usize,
    pub strength_cap: usize,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig { n: vec![2, 3, 4, 5], strength_n: (2..=8).collect(), power_cap: 6, strength_cap: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseMapConfig {
    pub tau_l: Vec<f64>,
    pub r_nn: Vec<f64>,
    pub temps: Vec<f64>,
    pub optimize_angles: bool,
    pub angle_grid: AngleGrid,
}

impl Default for PhaseMapConfig {
    fn default() -> Self {
        PhaseMapConfig {
            tau_l: vec![1e-9, 2.5e-9, 1e-8],
            r_nn: vec![0.8e-9, 1e-9, 1.5e-9],
            temps: vec![4.0, 77.0, 300.0],
            optimize_angles: false,
            angle_grid: AngleGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnglesConfig {
    pub theta_eq: Vec<f64>,
    pub theta_zen: Vec<f64>,
}

impl Default for AnglesConfig {
    fn default() -> Self {
        AnglesConfig {
            theta_eq: (0..8).map(|i| std::f64::consts::PI * i as f64 / 4.0).collect(),
            theta_zen: (0..5).map(|i| FRAC_PI_2 * i as f64 / 4.0).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub bins: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig { bins: 60 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleStudy {
    /// Hamiltonian-only target metrics.
    Strength,
    /// Full engine solve per trial.
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub study: EnsembleStudy,
    pub trials: usize,
    pub fraction: f64,
    pub targets: DisorderTargets,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig { study: EnsembleStudy::Strength, trials: 200, fraction: 0.05, targets: DisorderTargets::default() }
    }
}

impl RunConfig {
    /// Minimal configuration with every default filled in.
    pub fn with_sites(n_sites: usize) -> Self {
        serde_json::from_value(serde_json::json!({ "n_sites": n_sites })).expect("defaults deserialize")
    }

    pub fn ring(&self) -> Result<RingSpec, CliError> {
        Ok(RingSpec::regular(self.n_sites, &self.site.into())?.with_trap(self.trap.spec()))
    }

    pub fn engine(&self) -> Result<EngineConfig, CliError> {
        let config = EngineConfig {
            ring: self.ring()?,
            optical_temperature: self.optical.temperature,
            suppression: self.optical.suppression,
            phonons: self.phonons.spec(),
            vib_temperature: self.vib_temperature,
            reinit: self.reinit.scheme,
            gamma_r: self.reinit.gamma_r,
            convention: self.convention,
            solver: self.solver(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load_scan(&self) -> LoadScan {
        self.load_scan.into()
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            kernel_tol: self.tolerances.kernel_tol,
            refine_steps: self.tolerances.refine_steps,
            dense_limit: self.tolerances.dense_limit,
            ..SolverOptions::default()
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.engine()?;
        self.load_scan().validate()?;
        if self.ensemble.trials == 0 {
            return Err(CliError::Config("ensemble.trials must be >= 1".into()));
        }
        if self.spectrum.bins == 0 {
            return Err(CliError::Config("spectrum.bins must be >= 1".into()));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be >= 1".into()));
        }
        Ok(())
    }
}

/// Parses JSON text; an empty document counts as `{}`.
pub fn parse_str(text: &str) -> Result<RunConfig, CliError> {
    let text = if text.trim().is_empty() { "{}" } else { text };
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(if path == "." { e.inner().to_string() } else { format!("{path}: {}", e.inner()) })
    })?;
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_str(&text)
}
