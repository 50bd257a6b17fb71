//! Studies built on the engine: disorder sampling, suppression × reinitialisation grids,
//! size scaling, phase maps, angle scans, transition spectra and disorder ensembles.
//!
//! Every study returns its points in input order; parallel evaluation never changes results.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::mean_intra_manifold_frequency;
use crate::error::{Error, Result};
use crate::geometry::{coupling, normalized_dipoles, RingSpec};
use crate::heatengine::{EngineConfig, LoadScan, Model, PowerReport};
use crate::hamiltonian::{
    build_hamiltonian, dicke_strength, diagonalize, identify_ladder, target_transition, transition_table, Convention,
    Eigenbasis, Target, TransitionTable,
};

pub const MAX_RESAMPLES: usize = 100;
/// Default size caps: full engine solves and Hamiltonian-only strength studies.
pub const POWER_N_CAP: usize = 6;
pub const STRENGTH_N_CAP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderTargets {
    pub omega_a: bool,
    pub tau_l: bool,
    pub positions: bool,
    pub angles: bool,
}

impl Default for DisorderTargets {
    fn default() -> Self {
        DisorderTargets { omega_a: true, tau_l: true, positions: true, angles: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    /// Relative standard deviation.
    pub fraction: f64,
    pub seed: u64,
    pub targets: DisorderTargets,
}

impl DisorderSpec {
    pub fn new(fraction: f64, seed: u64) -> Self {
        DisorderSpec { fraction, seed, targets: DisorderTargets::default() }
    }
}

/// Draws from Normal(mean, σ), redrawing until `ok` accepts the value.
fn draw(rng: &mut ChaCha8Rng, mean: f64, sigma: f64, ok: impl Fn(f64) -> bool) -> Result<f64> {
    if sigma == 0.0 {
        return Ok(mean);
    }
    let dist = Normal::new(mean, sigma.abs()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    for _ in 0..MAX_RESAMPLES {
        let v = dist.sample(rng);
        if ok(v) {
            return Ok(v);
        }
    }
    Err(Error::DisorderResample(MAX_RESAMPLES))
}

/// Disordered copy of `spec` for one trial, seeded with `d.seed + trial`. Reference
/// frequency and lifetime stay nominal.
pub fn sample_disorder(spec: &RingSpec, d: &DisorderSpec, trial: u64) -> Result<RingSpec> {
    if !(d.fraction >= 0.0) || !d.fraction.is_finite() {
        return Err(Error::InvalidParameter("disorder fraction must be finite and >= 0".into()));
    }
    if d.fraction == 0.0 {
        return Ok(spec.clone());
    }
    let f = d.fraction;
    let mut rng = ChaCha8Rng::seed_from_u64(d.seed.wrapping_add(trial));
    let mut out = spec.clone();
    for attempt in 0..=MAX_RESAMPLES {
        if attempt == MAX_RESAMPLES {
            return Err(Error::DisorderResample(MAX_RESAMPLES));
        }
        for i in 0..spec.n_sites {
            if d.targets.omega_a {
                out.omega_a[i] = draw(&mut rng, spec.omega_a[i], f * spec.omega_a[i], |v| v > 0.0)?;
            }
            if d.targets.tau_l {
                out.tau_l[i] = draw(&mut rng, spec.tau_l[i], f * spec.tau_l[i], |v| v > 0.0)?;
            }
            if d.targets.angles {
                out.theta_eq[i] = draw(&mut rng, spec.theta_eq[i], f * spec.theta_eq[i], |_| true)?;
                out.theta_zen[i] = draw(&mut rng, spec.theta_zen[i], f * spec.theta_zen[i], |_| true)?;
            }
            if d.targets.positions {
                for x in 0..3 {
                    out.positions[i][x] = draw(&mut rng, spec.positions[i][x], f * spec.r_nn, |_| true)?;
                }
            }
        }
        // coincident sites are redrawn as a whole
        match out.validate() {
            Ok(()) => return Ok(out),
            Err(Error::DegenerateGeometry(..)) => continue,
            Err(e) => return Err(e),
        }
    }
    unreachable!()
}

/// Ring eigenbasis with ladder, target and optical transitions.
#[derive(Debug, Clone)]
pub struct RingAnalysis {
    pub convention: Convention,
    pub basis: Eigenbasis,
    pub target: Target,
    pub table: TransitionTable,
}

pub fn analyze_ring(spec: &RingSpec, convention: Option<Convention>) -> Result<RingAnalysis> {
    let j = coupling(spec)?;
    let convention = convention.unwrap_or_else(|| Convention::detect(&j));
    let mut basis = diagonalize(&build_hamiltonian(spec, &j, None)?)?;
    identify_ladder(&mut basis, convention);
    let target = target_transition(&basis)?;
    let table = transition_table(&basis, &normalized_dipoles(spec)?, spec.omega_ref);
    Ok(RingAnalysis { convention, basis, target, table })
}

impl RingAnalysis {
    pub fn target_strength(&self) -> f64 {
        crate::hamiltonian::target_strength(&self.basis, &self.table, &self.target)
    }

    /// Whether the strongest optical transition of the ring is BTTS → TTTS.
    pub fn target_is_strongest(&self) -> bool {
        self.table.strongest().is_some_and(|t| t.lower == self.target.btts && t.upper == self.target.ttts)
    }
}

/// Outcome of one study point: a value or the error message that prevented it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome<T> {
    Ok(T),
    Failed(String),
}

impl<T> Outcome<T> {
    fn from_result(r: Result<T>) -> Self {
        match r {
            Ok(v) => Outcome::Ok(v),
            Err(e) => Outcome::Failed(e.to_string()),
        }
    }

    pub fn ok(&self) -> Option<&T> {
        match self {
            Outcome::Ok(v) => Some(v),
            Outcome::Failed(_) => None,
        }
    }
}

/// Builds the engine and optimises the load.
pub fn solve_engine(config: &EngineConfig, scan: &LoadScan) -> Result<PowerReport> {
    Model::build(config)?.optimize_load(scan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub suppression: f64,
    pub gamma_r: f64,
    pub result: Outcome<PowerReport>,
}

/// Net power over suppression × γ_r, row-major in suppression.
pub fn grid_power(base: &EngineConfig, suppressions: &[f64], gamma_rs: &[f64], scan: &LoadScan) -> Vec<GridPoint> {
    let points: Vec<(f64, f64)> = suppressions.iter().flat_map(|&s| gamma_rs.iter().map(move |&g| (s, g))).collect();
    points
        .par_iter()
        .map(|&(suppression, gamma_r)| {
            let config = EngineConfig { suppression, gamma_r, ..base.clone() };
            GridPoint { suppression, gamma_r, result: Outcome::from_result(solve_engine(&config, scan)) }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n_sites: usize,
    pub result: Outcome<PowerReport>,
}

/// Engine power for each ring size; `base` supplies everything except the geometry, which
/// is rebuilt as a regular ring from `site` with the same trap.
pub fn scaling_power(base: &EngineConfig, site: &crate::geometry::SiteParams, ns: &[usize], scan: &LoadScan, cap: usize) -> Vec<ScalingPoint> {
    ns.par_iter()
        .map(|&n| {
            let result = if n > cap {
                Outcome::Failed(Error::DimensionCap { dim: n, cap }.to_string())
            } else {
                Outcome::from_result(RingSpec::regular(n, site).and_then(|ring| {
                    let ring = RingSpec { trap: base.ring.trap.clone(), ..ring };
                    solve_engine(&EngineConfig { ring, ..base.clone() }, scan)
                }))
            };
            ScalingPoint { n_sites: n, result }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrengthPoint {
    pub n_sites: usize,
    /// Target strengths in single-dipole units.
    pub guide_slide: f64,
    pub parallel: f64,
    pub dicke: f64,
    pub independent: f64,
}

impl StrengthPoint {
    pub fn per_site(&self) -> [f64; 4] {
        let n = self.n_sites as f64;
        [self.guide_slide / n, self.parallel / n, self.dicke / n, self.independent / n]
    }
}

/// Hamiltonian-only target strengths at the guide-slide tilt of `site` and at θ_zen = π/2.
pub fn strength_scaling(site: &crate::geometry::SiteParams, ns: &[usize], cap: usize) -> Result<Vec<StrengthPoint>> {
    ns.par_iter()
        .map(|&n| {
            if n > cap {
                return Err(Error::DimensionCap { dim: n, cap });
            }
            let gs = analyze_ring(&RingSpec::regular(n, site)?, None)?.target_strength();
            let par_site = crate::geometry::SiteParams { theta_zen: FRAC_PI_2, ..*site };
            let par = analyze_ring(&RingSpec::regular(n, &par_site)?, Some(Convention::Parallel))?.target_strength();
            Ok(StrengthPoint {
                n_sites: n,
                guide_slide: gs,
                parallel: par,
                dicke: dicke_strength(n, (n - 1) / 2),
                independent: n as f64,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleGrid {
    pub n_eq: usize,
    pub n_zen: usize,
    /// Whether one finer 3×3 pass around the best grid point follows.
    pub refine: bool,
}

impl Default for AngleGrid {
    fn default() -> Self {
        AngleGrid { n_eq: 16, n_zen: 16, refine: true }
    }
}

impl AngleGrid {
    /// θ_eq over [0, 2π), θ_zen over [0, π/2].
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.n_eq * self.n_zen);
        for i in 0..self.n_eq {
            for k in 0..self.n_zen {
                let zen = if self.n_zen > 1 { FRAC_PI_2 * k as f64 / (self.n_zen - 1) as f64 } else { FRAC_PI_2 / 2.0 };
                out.push((2.0 * PI * i as f64 / self.n_eq.max(1) as f64, zen));
            }
        }
        out
    }

    fn steps(&self) -> (f64, f64) {
        (2.0 * PI / self.n_eq.max(1) as f64, FRAC_PI_2 / (self.n_zen.max(2) - 1) as f64)
    }
}

fn with_angles(config: &EngineConfig, theta_eq: f64, theta_zen: f64) -> Result<EngineConfig> {
    let site = site_params_of(&config.ring);
    let site = crate::geometry::SiteParams { theta_eq, theta_zen, ..site };
    let ring = RingSpec { trap: config.ring.trap.clone(), ..RingSpec::regular(config.ring.n_sites, &site)? };
    // the ladder convention follows the geometry, not the base configuration
    Ok(EngineConfig { ring, convention: None, ..config.clone() })
}

/// Nominal site parameters of a (possibly regular) ring: the first site's values.
pub fn site_params_of(ring: &RingSpec) -> crate::geometry::SiteParams {
    crate::geometry::SiteParams {
        omega_a: ring.omega_a[0],
        tau_l: ring.tau_l[0],
        r_nn: ring.r_nn,
        theta_eq: ring.theta_eq[0],
        theta_zen: ring.theta_zen[0],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnglePoint {
    pub theta_eq: f64,
    pub theta_zen: f64,
    pub p_net: Option<f64>,
}

/// Net power over a list of (θ_eq, θ_zen) pairs.
pub fn angle_scan(base: &EngineConfig, angles: &[(f64, f64)], scan: &LoadScan) -> Vec<AnglePoint> {
    angles
        .par_iter()
        .map(|&(theta_eq, theta_zen)| {
            let p_net = with_angles(base, theta_eq, theta_zen).and_then(|c| solve_engine(&c, scan)).ok().map(|r| r.p_net);
            AnglePoint { theta_eq, theta_zen, p_net }
        })
        .collect()
}

fn best_of(points: &[AnglePoint]) -> Option<&AnglePoint> {
    points.iter().filter(|p| p.p_net.is_some()).fold(None, |best: Option<&AnglePoint>, p| match best {
        Some(b) if b.p_net >= p.p_net => Some(b),
        _ => Some(p),
    })
}

/// Grid search over both angles plus an optional local refinement.
pub fn optimize_angles(base: &EngineConfig, grid: &AngleGrid, scan: &LoadScan) -> Option<AnglePoint> {
    let coarse = angle_scan(base, &grid.points(), scan);
    let best = best_of(&coarse)?.clone();
    if !grid.refine {
        return Some(best);
    }
    let (de, dz) = grid.steps();
    let mut local = Vec::with_capacity(8);
    for a in [-0.5, 0.0, 0.5] {
        for b in [-0.5, 0.0, 0.5] {
            if a != 0.0 || b != 0.0 {
                local.push((best.theta_eq + a * de, (best.theta_zen + b * dz).clamp(0.0, FRAC_PI_2)));
            }
        }
    }
    let mut fine = angle_scan(base, &local, scan);
    fine.push(best);
    best_of(&fine).cloned()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub tau_l: f64,
    pub r_nn: f64,
    pub t_vib: f64,
    pub theta_eq: f64,
    pub theta_zen: f64,
    pub p_net: Option<f64>,
    pub positive: bool,
}

/// Net power over τ_L × r_nn for each vibrational temperature, ordered by temperature,
/// then τ_L, then r_nn.
pub fn phase_map(
    base: &EngineConfig,
    taus: &[f64],
    rnns: &[f64],
    temps: &[f64],
    angles: Option<&AngleGrid>,
    scan: &LoadScan,
) -> Vec<PhasePoint> {
    let mut cells = Vec::with_capacity(temps.len() * taus.len() * rnns.len());
    for &t in temps {
        for &tau in taus {
            for &r in rnns {
                cells.push((t, tau, r));
            }
        }
    }
    cells
        .par_iter()
        .map(|&(t_vib, tau_l, r_nn)| {
            let site = crate::geometry::SiteParams { tau_l, r_nn, ..site_params_of(&base.ring) };
            let point = |theta_eq: f64, theta_zen: f64, p_net: Option<f64>| PhasePoint {
                tau_l,
                r_nn,
                t_vib,
                theta_eq,
                theta_zen,
                p_net,
                positive: p_net.is_some_and(|p| p > 0.0),
            };
            let config = RingSpec::regular(base.ring.n_sites, &site).map(|ring| EngineConfig {
                ring: RingSpec { trap: base.ring.trap.clone(), ..ring },
                vib_temperature: t_vib,
                ..base.clone()
            });
            let config = match config {
                Ok(c) => c,
                Err(_) => return point(site.theta_eq, site.theta_zen, None),
            };
            match angles {
                Some(grid) => match optimize_angles(&config, grid, scan) {
                    Some(best) => point(best.theta_eq, best.theta_zen, best.p_net),
                    None => point(site.theta_eq, site.theta_zen, None),
                },
                None => point(site.theta_eq, site.theta_zen, solve_engine(&config, scan).ok().map(|r| r.p_net)),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineClass {
    /// Absorption out of the BTTS.
    Good,
    /// Emission into the BTTS, or any line inside the suppressed band.
    Bad,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub omega: f64,
    pub strength: f64,
    pub class: LineClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub optical: Vec<SpectralLine>,
    /// Intra-manifold |E_a − E_b| for all eigenstate pairs.
    pub phonon: Vec<f64>,
    pub cutoff: Option<f64>,
}

pub fn spectrum(spec: &RingSpec, convention: Option<Convention>) -> Result<Spectrum> {
    let a = analyze_ring(spec, convention)?;
    let t = a.target;
    let cutoff = t.omega_bad.map(|b| 0.5 * (t.omega_good + b));
    let suppressed = |w: f64| match (cutoff, t.omega_bad) {
        (Some(c), Some(b)) if b < t.omega_good => w < c,
        (Some(c), Some(_)) => w > c,
        _ => false,
    };
    let optical = a
        .table
        .entries
        .iter()
        .map(|tr| {
            let class = if tr.lower == t.btts {
                LineClass::Good
            } else if tr.upper == t.btts || suppressed(tr.omega) {
                LineClass::Bad
            } else {
                LineClass::Other
            };
            SpectralLine { omega: tr.omega, strength: tr.strength, class }
        })
        .collect();
    let mut phonon = Vec::new();
    if mean_intra_manifold_frequency(&a.basis).is_ok() {
        for block in &a.basis.blocks {
            for (i, &x) in block.states.iter().enumerate() {
                for &y in &block.states[i + 1..] {
                    phonon.push((a.basis.energies[x] - a.basis.energies[y]).abs());
                }
            }
        }
    }
    Ok(Spectrum { optical, phonon, cutoff })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<f64>,
}

/// Weighted histogram over [lo, hi] with `bins` equal bins; the last bin is closed.
pub fn histogram(values: &[f64], weights: Option<&[f64]>, bins: usize, lo: f64, hi: f64) -> Result<Histogram> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::InvalidParameter("histogram needs bins >= 1 and hi > lo".into()));
    }
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0.0; bins];
    for (k, &v) in values.iter().enumerate() {
        if v < lo || v > hi {
            continue;
        }
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += weights.map_or(1.0, |w| w[k]);
    }
    Ok(Histogram { edges, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    /// 5th, 25th, 50th, 75th and 95th percentiles (linear interpolation).
    pub quantiles: [f64; 5],
}

pub fn stats(values: &[f64]) -> Option<Stats> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let x = p * (n - 1) as f64;
        let (i, frac) = (x.floor() as usize, x - x.floor());
        if i + 1 < n {
            sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
        } else {
            sorted[n - 1]
        }
    };
    Some(Stats { count: n, mean, std: var.sqrt(), quantiles: [q(0.05), q(0.25), q(0.5), q(0.75), q(0.95)] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub metrics: Vec<String>,
    /// Per-trial metric values in trial order; `None` marks a failed trial.
    pub trials: Vec<Option<Vec<f64>>>,
    pub failures: usize,
    pub stats: Vec<Option<Stats>>,
    pub seed: u64,
}

/// Runs `study` on `trials` disordered copies of `base` and aggregates each metric in trial
/// order. Failed trials are counted and excluded.
pub fn ensemble<F>(base: &RingSpec, disorder: &DisorderSpec, trials: usize, metrics: &[&str], study: F) -> Result<Ensemble>
where
    F: Fn(&RingSpec) -> Result<Vec<f64>> + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    let rows: Vec<Option<Vec<f64>>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let ring = sample_disorder(base, disorder, t).ok()?;
            study(&ring).ok().filter(|v| v.len() == metrics.len())
        })
        .collect();
    let failures = rows.iter().filter(|r| r.is_none()).count();
    let stats = (0..metrics.len())
        .map(|m| stats(&rows.iter().flatten().map(|r| r[m]).collect::<Vec<_>>()))
        .collect();
    Ok(Ensemble { metrics: metrics.iter().map(|s| s.to_string()).collect(), trials: rows, failures, stats, seed: disorder.seed })
}

/// Ensemble of Hamiltonian-only ring metrics: target strength, strongest-is-target indicator,
/// ω_good and ω_good − ω_bad.
pub fn strength_ensemble(base: &RingSpec, disorder: &DisorderSpec, trials: usize) -> Result<Ensemble> {
    ensemble(base, disorder, trials, &["target_strength", "target_strongest", "omega_good", "omega_gap"], |ring| {
        let a = analyze_ring(ring, None)?;
        let gap = a.target.omega_bad.map_or(f64::NAN, |b| a.target.omega_good - b);
        Ok(vec![a.target_strength(), f64::from(u8::from(a.target_is_strongest())), a.target.omega_good, gap])
    })
}
