//! Ring + trap heat-engine model: steady state as a function of the load γ_t, current,
//! voltage, load optimisation and input-power accounting.

use faer::Mat;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{power_watts, rate_per_second, E_CHARGE, K_B};
use crate::dissipators::{
    directional_dissipator, extraction_incoherent, ladder_pump_operators, optical_tensor, reinit_ladder, reinit_site,
    trap_decay, vibrational_tensor, BlockLabel, DissipatorBlock,
};
use crate::environment::{bandgap_cutoff, kappa_vib_for, BandGap, GapSide, OpticalBath, PhononBath, PhononModel};
use crate::error::{Error, Result};
use crate::geometry::{coupling, normalized_dipoles, RingSpec, TrapMode, TrapSpec};
use crate::hamiltonian::{build_hamiltonian, diagonalize, identify_ladder, target_transition, Convention, Eigenbasis, Target};
use crate::liouvillian::{assemble, steady_state_with, Diagnostics, Liouvillian, SolverOptions, SteadyState};
use crate::operators::{excited_projector, ZERO};
use crate::superop::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReinitScheme {
    Ladder,
    Site,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum PhononSpec {
    None,
    /// Ohmic bath with κ_vib = multiplier·(ħ/τ)/ω̄_vib.
    Ohmic { multiplier: f64 },
    SuperOhmic { lambda: f64, omega_crit: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub ring: RingSpec,
    pub optical_temperature: f64,
    pub suppression: f64,
    pub phonons: PhononSpec,
    pub vib_temperature: f64,
    pub reinit: ReinitScheme,
    pub gamma_r: f64,
    /// Ladder convention; detected from the nearest-neighbour coupling when absent.
    pub convention: Option<Convention>,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.ring.validate()?;
        self.ring.trap.as_ref().ok_or(Error::MissingTrap)?.validate()?;
        for (name, v) in [("optical_temperature", self.optical_temperature), ("vib_temperature", self.vib_temperature)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0")));
            }
        }
        if !(0.0..=1.0).contains(&self.suppression) {
            return Err(Error::InvalidParameter("suppression must lie in [0, 1]".into()));
        }
        if !(self.gamma_r >= 0.0) || !self.gamma_r.is_finite() {
            return Err(Error::InvalidParameter("gamma_r must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Assembled engine: everything except the trap decay, which enters as L₀ + γ_t·T.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: EngineConfig,
    pub convention: Convention,
    /// Ring-only eigenbasis with ladder flags.
    pub ring: Eigenbasis,
    pub target: Target,
    pub omega_t: f64,
    pub kappa_vib: f64,
    /// Ring + trap eigenbasis in which the Liouvillian is written.
    pub basis: Eigenbasis,
    pub static_part: Liouvillian,
    /// Trap decay at unit rate.
    pub trap_unit: SparseMatrix,
    alpha: Mat<C64>,
    beta: Mat<C64>,
    rung_projectors: Vec<Mat<C64>>,
    site_projectors: Vec<Mat<C64>>,
    pub solver: SolverOptions,
}

fn projector(psi: &[C64]) -> Mat<C64> {
    let d = psi.len();
    Mat::from_fn(d, d, |r, c| psi[r] * psi[c].conj())
}

/// A ⊗ 1 on the trap bit (the highest bit).
fn with_trap_identity(a: &Mat<C64>) -> Mat<C64> {
    let d = a.nrows();
    Mat::from_fn(2 * d, 2 * d, |r, c| if r / d == c / d { a[(r % d, c % d)] } else { ZERO })
}

impl Model {
    pub fn build(config: &EngineConfig) -> Result<Model> {
        config.validate()?;
        let spec = &config.ring;
        let trap: TrapSpec = spec.trap.clone().ok_or(Error::MissingTrap)?;
        let n = spec.n_sites;
        let j = coupling(spec)?;
        let convention = config.convention.unwrap_or_else(|| Convention::detect(&j));
        let mut ring = diagonalize(&build_hamiltonian(spec, &j, None)?)?;
        identify_ladder(&mut ring, convention);
        let target = target_transition(&ring)?;
        let omega_t = trap.omega_t.unwrap_or(target.omega_good);
        let ring_dim = ring.dim();

        let basis = match trap.mode {
            TrapMode::Incoherent => ring.with_trap(omega_t),
            TrapMode::Coherent => diagonalize(&build_hamiltonian(spec, &j, Some(omega_t))?)?,
        };
        let h = Mat::from_fn(basis.dim(), basis.dim(), |r, c| if r == c { C64::new(basis.energies[r], 0.0) } else { ZERO });

        let mut bath = OpticalBath::calibrated(config.optical_temperature, spec.omega_ref, spec.tau_ref);
        if let Some(bad) = target.omega_bad {
            let side = if bad < target.omega_good { GapSide::Below } else { GapSide::Above };
            bath.bandgap = Some(BandGap::new(bandgap_cutoff(target.omega_good, bad)?, config.suppression, side)?);
        }
        let mut blocks = vec![optical_tensor(&basis, &normalized_dipoles(spec)?, &bath)?];

        let tau_mean = spec.tau_l.iter().sum::<f64>() / n as f64;
        let (phonon_model, kappa_vib) = match config.phonons {
            PhononSpec::None => (None, 0.0),
            PhononSpec::Ohmic { multiplier } if multiplier > 0.0 => match kappa_vib_for(&ring, tau_mean, multiplier) {
                Ok(k) => (Some(PhononModel::Ohmic { kappa: k }), k),
                // a single site has no intra-manifold transitions to calibrate against
                Err(Error::NoIntraManifold) => (None, 0.0),
                Err(e) => return Err(e),
            },
            PhononSpec::Ohmic { .. } => (None, 0.0),
            PhononSpec::SuperOhmic { lambda, omega_crit } => (Some(PhononModel::SuperOhmic { lambda, omega_crit }), 0.0),
        };
        if let Some(model) = phonon_model {
            blocks.extend(vibrational_tensor(&basis, n, &PhononBath { model, temperature: config.vib_temperature })?);
        }

        let ladder = ring.ladder_indices();
        match trap.mode {
            TrapMode::Incoherent => {
                blocks.push(extraction_incoherent(ring_dim, &target, trap.gamma_x));
                match config.reinit {
                    ReinitScheme::Ladder => blocks.push(reinit_ladder(ring_dim, &ladder, &target, config.gamma_r, true)),
                    ReinitScheme::Site => blocks.push(reinit_site(&basis, n, config.gamma_r)?),
                }
            }
            TrapMode::Coherent => match config.reinit {
                ReinitScheme::Ladder => {
                    let mut op = crate::superop::SuperOp::zero(basis.dim());
                    for l in ladder_pump_operators(ring_dim, &ladder, &target, true) {
                        // |BTTS⟩⟨rung n| ⊗ 1 written in the ring eigenbasis, moved to the site basis
                        let u = with_trap_identity(&ring.transform);
                        let site = &u * &l * u.adjoint();
                        let m = basis.to_eigen(&(&site + site.adjoint()));
                        op.extend(&directional_dissipator(&m, config.gamma_r, -1, &basis.energies, BlockLabel::Reinit)?.op, 1.0);
                    }
                    blocks.push(DissipatorBlock { label: BlockLabel::Reinit, op });
                }
                ReinitScheme::Site => blocks.push(reinit_site(&basis, n, config.gamma_r)?),
            },
        }

        let static_part = assemble(&h, &blocks)?;
        let trap_unit = trap_decay(&basis, 1.0)?.op.to_sparse_full();

        let bits = n + 1;
        let alpha = basis.to_eigen(&excited_projector(n, bits));
        let beta = basis.to_eigen(&(crate::operators::identity(2 * ring_dim) - excited_projector(n, bits)));
        let rung_projectors = (0..target.rung)
            .map(|r| {
                let psi: Vec<C64> = (0..ring_dim).map(|s| ring.transform[(s, ladder[r])]).collect();
                basis.to_eigen(&with_trap_identity(&projector(&psi)))
            })
            .collect();
        let site_projectors = (0..n).map(|i| basis.to_eigen(&excited_projector(i, bits))).collect();

        Ok(Model {
            config: config.clone(),
            convention,
            ring,
            target,
            omega_t,
            kappa_vib,
            basis,
            static_part,
            trap_unit,
            alpha,
            beta,
            rung_projectors,
            site_projectors,
            solver: config.solver,
        })
    }

    pub fn liouvillian(&self, gamma_t: f64) -> Liouvillian {
        self.static_part.plus_scaled(&self.trap_unit, gamma_t)
    }

    pub fn steady_state(&self, gamma_t: f64) -> Result<SteadyState> {
        if !(gamma_t > 0.0) {
            return Err(Error::InvalidParameter("gamma_t must be > 0".into()));
        }
        steady_state_with(&self.liouvillian(gamma_t), None, &self.solver)
    }

    /// Trap populations (ρ_α, ρ_β).
    pub fn trap_populations(&self, ss: &SteadyState) -> (f64, f64) {
        (ss.expectation(&self.alpha), ss.expectation(&self.beta))
    }

    /// Output power I·V in W; zero when the trap carries no excited population.
    pub fn output_power(&self, ss: &SteadyState, gamma_t: f64) -> Result<f64> {
        let (a, b) = self.trap_populations(ss);
        if a <= 0.0 {
            return Ok(0.0);
        }
        Ok(current(a, gamma_t) * voltage(a, b, self.omega_t, self.config.vib_temperature)?)
    }

    /// Per-rung pump currents (A) and P_in (W) with V_n = (E_BTTS − E_n)/e.
    pub fn input_power_ladder(&self, ss: &SteadyState) -> (Vec<f64>, f64) {
        let e_b = self.ring.energies[self.target.btts];
        let ladder = self.ring.ladder_indices();
        let mut currents = Vec::with_capacity(self.rung_projectors.len());
        let mut total = 0.0;
        for (r, p) in self.rung_projectors.iter().enumerate() {
            let pop = ss.expectation(p).max(0.0);
            currents.push(current(pop, self.config.gamma_r));
            total += power_watts(self.config.gamma_r * pop, e_b - self.ring.energies[ladder[r]]);
        }
        (currents, total)
    }

    /// Per-site pump currents (A) and P_in (W) with eV_i = ω_A,i + k_B T ln(g_i/e_i).
    pub fn input_power_site(&self, ss: &SteadyState) -> Result<(Vec<f64>, f64)> {
        let mut currents = Vec::with_capacity(self.site_projectors.len());
        let mut total = 0.0;
        for (i, p) in self.site_projectors.iter().enumerate() {
            let e = ss.expectation(p);
            let g = 1.0 - e;
            let cur = current(g.max(0.0), self.config.gamma_r);
            currents.push(cur);
            if g <= 0.0 || cur == 0.0 {
                continue;
            }
            if e <= 0.0 {
                return Err(Error::VoltageUndefined);
            }
            total += cur * (self.config.ring.omega_a[i] + K_B * self.config.vib_temperature * (g / e).ln());
        }
        Ok((currents, total))
    }

    pub fn input_power(&self, ss: &SteadyState) -> Result<(Vec<f64>, f64)> {
        match self.config.reinit {
            ReinitScheme::Ladder => Ok(self.input_power_ladder(ss)),
            ReinitScheme::Site => self.input_power_site(ss),
        }
    }

    /// Full report at a fixed load.
    pub fn report_at(&self, gamma_t: f64) -> Result<PowerReport> {
        let ss = self.steady_state(gamma_t)?;
        self.report_from(&ss, gamma_t, false, ss.diagnostics)
    }

    fn report_from(&self, ss: &SteadyState, gamma_t: f64, non_unimodal: bool, worst: Diagnostics) -> Result<PowerReport> {
        let (a, b) = self.trap_populations(ss);
        let (cur, volt, p_out) = if a > 0.0 {
            let i = current(a, gamma_t);
            let v = voltage(a, b, self.omega_t, self.config.vib_temperature)?;
            (i, v, i * v)
        } else {
            (0.0, 0.0, 0.0)
        };
        let (pump_currents, p_in) = self.input_power(ss)?;
        Ok(PowerReport {
            n_sites: self.config.ring.n_sites,
            gamma_t_star: gamma_t,
            current: cur,
            voltage: volt,
            p_out,
            p_in,
            p_net: p_out - p_in,
            rho_alpha: a,
            rho_beta: b,
            pump_currents,
            non_unimodal,
            diagnostics: worst,
        })
    }

    /// Output power at a load, with the steady-state diagnostics.
    pub fn power_at(&self, gamma_t: f64) -> Result<(f64, Diagnostics)> {
        let ss = self.steady_state(gamma_t)?;
        Ok((self.output_power(&ss, gamma_t)?, ss.diagnostics))
    }

    /// Scans γ_t on a log grid, refines the maximum by golden-section search in log γ_t and
    /// reports the engine at γ_t*.
    pub fn optimize_load(&self, scan: &LoadScan) -> Result<PowerReport> {
        scan.validate()?;
        let grid = scan.grid();
        let evals: Vec<Result<(f64, Diagnostics)>> = grid.par_iter().map(|&g| self.power_at(g)).collect();
        let mut powers = Vec::with_capacity(grid.len());
        let mut worst: Option<Diagnostics> = None;
        for e in evals {
            let (p, d) = e?;
            powers.push(p);
            worst = Some(worst.map_or(d, |w| w.worst(d)));
        }
        let mut worst = worst.unwrap_or_default();
        let (best, p_best) = powers
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
        let floor = 1e-6 * p_best.max(0.0);
        let local_maxima = (0..powers.len())
            .filter(|&i| {
                let left = i == 0 || powers[i] > powers[i - 1];
                let right = i + 1 == powers.len() || powers[i] >= powers[i + 1];
                left && right && powers[i] > floor
            })
            .count();
        let non_unimodal = local_maxima > 1;

        let mut star = grid[best];
        if !non_unimodal && p_best > 0.0 {
            let lo = grid[best.saturating_sub(1)].ln();
            let hi = grid[(best + 1).min(grid.len() - 1)].ln();
            let (x, p) = golden_max(lo, hi, scan.rel_tol, |x| {
                let (p, d) = self.power_at(x.exp())?;
                worst = worst.worst(d);
                Ok(p)
            })?;
            if p > p_best {
                star = x.exp();
            }
        }
        let ss = self.steady_state(star)?;
        worst = worst.worst(ss.diagnostics);
        self.report_from(&ss, star, non_unimodal, worst)
    }
}

/// Golden-section maximisation of `f` on [lo, hi] until hi − lo < ln(1 + rel_tol).
fn golden_max(mut lo: f64, mut hi: f64, rel_tol: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let width = (1.0 + rel_tol).ln();
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > width {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadScan {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    /// Relative width at which the golden-section refinement stops.
    pub rel_tol: f64,
}

impl Default for LoadScan {
    fn default() -> Self {
        LoadScan { min: 1e-12, max: 1e-1, points: 60, rel_tol: 0.01 }
    }
}

impl LoadScan {
    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.max > self.min && self.points >= 2 && self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter("load scan needs 0 < min < max, points >= 2, rel_tol > 0".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let (a, b) = (self.min.ln(), self.max.ln());
        (0..self.points).map(|i| (a + (b - a) * i as f64 / (self.points - 1) as f64).exp()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub n_sites: usize,
    /// Optimal (or evaluated) trap decay rate in eV.
    pub gamma_t_star: f64,
    /// A.
    pub current: f64,
    /// V.
    pub voltage: f64,
    /// W.
    pub p_out: f64,
    pub p_in: f64,
    pub p_net: f64,
    pub rho_alpha: f64,
    pub rho_beta: f64,
    /// Pump currents (A) per ladder rung or per site, depending on the reinitialisation scheme.
    pub pump_currents: Vec<f64>,
    pub non_unimodal: bool,
    /// Worst diagnostics over every solve behind this report.
    pub diagnostics: Diagnostics,
}

impl PowerReport {
    pub fn per_site(&self) -> (f64, f64, f64) {
        let n = self.n_sites as f64;
        (self.p_in / n, self.p_out / n, self.p_net / n)
    }
}

/// I = e·(γ_t/ħ)·ρ_α in A.
pub fn current(rho_alpha: f64, gamma_t: f64) -> f64 {
    E_CHARGE * rate_per_second(gamma_t) * rho_alpha
}

/// eV = ω_t + k_B T ln(ρ_α/ρ_β), returned in V.
pub fn voltage(rho_alpha: f64, rho_beta: f64, omega_t: f64, t_vib: f64) -> Result<f64> {
    if !(rho_alpha > 0.0) || !(rho_beta > 0.0) {
        return Err(Error::VoltageUndefined);
    }
    Ok(omega_t + K_B * t_vib * (rho_alpha / rho_beta).ln())
}
