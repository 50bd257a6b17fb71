//! Bath occupations, spectral densities and transition rates. Positive frequencies denote
//! emission into the bath, negative frequencies absorption from it.

use serde::{Deserialize, Serialize};

use crate::constants::{lifetime_to_rate, K_B};
use crate::error::{Error, Result};
use crate::hamiltonian::Eigenbasis;

pub fn bose_einstein(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::InvalidParameter("bose_einstein needs omega > 0".into()));
    }
    if temperature < 0.0 {
        return Err(Error::InvalidParameter("temperature must be >= 0".into()));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (omega / (K_B * temperature)).exp_m1())
}

/// (1 + n) for emission, n for absorption.
fn occupation_factor(omega: f64, temperature: f64) -> Result<f64> {
    let n = bose_einstein(omega.abs(), temperature)?;
    Ok(if omega > 0.0 { 1.0 + n } else { n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapSide {
    Below,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandGap {
    pub cutoff: f64,
    pub suppression: f64,
    pub side: GapSide,
}

impl BandGap {
    pub fn new(cutoff: f64, suppression: f64, side: GapSide) -> Result<Self> {
        if !(0.0..=1.0).contains(&suppression) {
            return Err(Error::InvalidParameter("suppression must lie in [0, 1]".into()));
        }
        if !(cutoff > 0.0) {
            return Err(Error::InvalidParameter("band-gap cutoff must be > 0".into()));
        }
        Ok(BandGap { cutoff, suppression, side })
    }

    pub fn factor(&self, omega_abs: f64) -> f64 {
        let suppressed = match self.side {
            GapSide::Below => omega_abs < self.cutoff,
            GapSide::Above => omega_abs > self.cutoff,
        };
        if suppressed {
            1.0 - self.suppression
        } else {
            1.0
        }
    }
}

pub fn bandgap_cutoff(omega_good: f64, omega_bad: f64) -> Result<f64> {
    if !(omega_good > 0.0) || !(omega_bad > 0.0) {
        return Err(Error::InvalidParameter("band-gap frequencies must be > 0".into()));
    }
    Ok(0.5 * (omega_good + omega_bad))
}

/// Whether a cutoff midway between the two frequencies suppresses the bad mode while
/// leaving the good one untouched on the given side.
pub fn gap_separates(omega_good: f64, omega_bad: f64, side: GapSide) -> bool {
    match side {
        GapSide::Below => omega_bad < omega_good,
        GapSide::Above => omega_bad > omega_good,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalBath {
    pub temperature: f64,
    /// Rate prefactor in eV⁻²: γ(ω) = κ_opt ω³ (1 + n) per unit dipole strength.
    pub kappa_opt: f64,
    pub bandgap: Option<BandGap>,
}

impl OpticalBath {
    /// Calibrated so that a reference dipole at ω_ref decays at ħ/τ_ref at zero temperature.
    pub fn calibrated(temperature: f64, omega_ref: f64, tau_ref: f64) -> Self {
        OpticalBath { temperature, kappa_opt: lifetime_to_rate(tau_ref) / omega_ref.powi(3), bandgap: None }
    }
}

pub fn optical_rate(omega: f64, bath: &OpticalBath) -> Result<f64> {
    if omega == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    let w = omega.abs();
    let gap = bath.bandgap.map_or(1.0, |g| g.factor(w));
    Ok(bath.kappa_opt * w.powi(3) * occupation_factor(omega, bath.temperature)? * gap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum PhononModel {
    /// J(ω) = κ_vib ω.
    Ohmic { kappa: f64 },
    /// J(ω) = λ ω³ / (2 ω_c³) exp(−ω/ω_c).
    SuperOhmic { lambda: f64, omega_crit: f64 },
}

impl PhononModel {
    pub const SUPEROHMIC_PRESETS: [(f64, f64); 2] = [(5e-3, 90e-3), (20e-3, 25e-3)];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhononBath {
    pub model: PhononModel,
    pub temperature: f64,
}

pub fn superohmic_density(omega: f64, lambda: f64, omega_crit: f64) -> f64 {
    lambda * omega.powi(3) / (2.0 * omega_crit.powi(3)) * (-omega / omega_crit).exp()
}

pub fn superohmic_density_derivative(omega: f64, lambda: f64, omega_crit: f64) -> f64 {
    superohmic_density(omega, lambda, omega_crit) * (3.0 / omega - 1.0 / omega_crit)
}

impl PhononBath {
    pub fn spectral_density(&self, omega_abs: f64) -> f64 {
        match self.model {
            PhononModel::Ohmic { kappa } => kappa * omega_abs,
            PhononModel::SuperOhmic { lambda, omega_crit } => superohmic_density(omega_abs, lambda, omega_crit),
        }
    }

    /// lim_{ω→0} J(ω)(1 + n(ω)).
    pub fn zero_frequency_rate(&self) -> f64 {
        match self.model {
            PhononModel::Ohmic { kappa } => kappa * K_B * self.temperature,
            PhononModel::SuperOhmic { .. } => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.model {
            PhononModel::Ohmic { kappa } => kappa >= 0.0,
            PhononModel::SuperOhmic { lambda, omega_crit } => lambda >= 0.0 && omega_crit > 0.0,
        };
        if !ok || !(self.temperature >= 0.0) {
            return Err(Error::InvalidParameter("phonon strengths and temperature must be >= 0".into()));
        }
        Ok(())
    }
}

pub fn phonon_rate(omega: f64, bath: &PhononBath) -> Result<f64> {
    if omega == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    Ok(bath.spectral_density(omega.abs()) * occupation_factor(omega, bath.temperature)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VibRegime {
    Fast,
    Match,
    Slow,
    Off,
}

impl VibRegime {
    pub fn multiplier(self) -> f64 {
        match self {
            VibRegime::Fast => 1e3,
            VibRegime::Match => 1.0,
            VibRegime::Slow => 1e-3,
            VibRegime::Off => 0.0,
        }
    }
}

/// Mean |E_a − E_b| over all pairs of distinct eigenstates within each manifold. Fully
/// degenerate manifolds (mean below the frequency floor) count as having no transitions.
pub fn mean_intra_manifold_frequency(basis: &Eigenbasis) -> Result<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for block in &basis.blocks {
        for (i, &a) in block.states.iter().enumerate() {
            for &b in &block.states[i + 1..] {
                sum += (basis.energies[a] - basis.energies[b]).abs();
                count += 1;
            }
        }
    }
    if count == 0 || sum / (count as f64) < crate::dissipators::FREQUENCY_FLOOR {
        return Err(Error::NoIntraManifold);
    }
    Ok(sum / count as f64)
}

/// Ohmic coupling such that phonon emission at the mean intra-manifold frequency runs at
/// `multiplier` × ħ/τ_L.
pub fn kappa_vib_for(basis: &Eigenbasis, tau_l: f64, multiplier: f64) -> Result<f64> {
    Ok(multiplier * lifetime_to_rate(tau_l) / mean_intra_manifold_frequency(basis)?)
}

/// Default ("fast") calibration: phonon processes 10³ times faster than spontaneous emission.
pub fn calibrate_kappa_vib(basis: &Eigenbasis, tau_l: f64) -> Result<f64> {
    kappa_vib_for(basis, tau_l, VibRegime::Fast.multiplier())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{coupling, CouplingMatrix, RingSpec, SiteParams};
    use crate::hamiltonian::{build_hamiltonian, diagonalize};
    use proptest::prelude::*;

    #[test]
    fn occupation_values() {
        assert_eq!(bose_einstein(1.8, 0.0).unwrap(), 0.0);
        let t = 300.0;
        let n = bose_einstein(K_B * t * 2f64.ln(), t).unwrap();
        assert!((n - 1.0).abs() < 1e-14);
        // 1/(exp(1.8 / (8.617333262e-5 * 5800)) - 1), evaluated independently
        let x: f64 = 1.8 / (8.617333262e-5 * 5800.0);
        let want = 1.0 / (x.exp() - 1.0);
        let got = bose_einstein(1.8, 5800.0).unwrap();
        assert!((got / want - 1.0).abs() < 1e-12);
        // 40-digit evaluation
        assert!((got / 0.028050815380889890434 - 1.0).abs() < 1e-12, "{got}");
        assert!(bose_einstein(0.0, 300.0).is_err());
    }

    #[test]
    fn optical_calibration() {
        let bath = OpticalBath::calibrated(0.0, 1.8, 2.5e-9);
        let r = optical_rate(1.8, &bath).unwrap();
        assert!((r - 2.6328478276e-7).abs() < 1e-16);
        assert!((r * 2.5e-9 / crate::constants::HBAR_EV_S - 1.0).abs() < 1e-12);
        assert_eq!(optical_rate(-1.8, &bath).unwrap(), 0.0);
        assert!(optical_rate(0.0, &bath).is_err());
    }

    #[test]
    fn band_gap_suppression() {
        let mut bath = OpticalBath::calibrated(0.0, 1.8, 2.5e-9);
        let open = optical_rate(1.7, &bath).unwrap();
        bath.bandgap = Some(BandGap::new(1.75, 0.99, GapSide::Below).unwrap());
        assert!((optical_rate(1.7, &bath).unwrap() / open - 0.01).abs() < 1e-12);
        assert_eq!(optical_rate(1.8, &bath).unwrap(), optical_rate(1.8, &OpticalBath { bandgap: None, ..bath }).unwrap());
        bath.bandgap = Some(BandGap::new(1.75, 1.0, GapSide::Below).unwrap());
        assert_eq!(optical_rate(1.7, &bath).unwrap(), 0.0);
        assert!(BandGap::new(1.75, 1.5, GapSide::Above).is_err());
    }

    #[test]
    fn cutoff_midpoint() {
        assert!((bandgap_cutoff(1.9, 1.7).unwrap() - 1.8).abs() < 1e-15);
        assert!(gap_separates(1.9, 1.7, GapSide::Below));
        assert!(!gap_separates(1.7, 1.9, GapSide::Below));
    }

    #[test]
    fn superohmic_points() {
        for (lambda, wc) in PhononModel::SUPEROHMIC_PRESETS {
            let j = superohmic_density(wc, lambda, wc);
            assert!((j - 0.5 * lambda * (-1f64).exp()).abs() <= 1e-12 * lambda);
            assert!(superohmic_density_derivative(3.0 * wc, lambda, wc).abs() < 1e-12);
            let peak = superohmic_density(3.0 * wc, lambda, wc);
            assert!(peak > superohmic_density(3.0 * wc * 1.001, lambda, wc));
            assert!(peak > superohmic_density(3.0 * wc * 0.999, lambda, wc));
        }
    }

    #[test]
    fn ohmic_zero_limit() {
        let bath = PhononBath { model: PhononModel::Ohmic { kappa: 2.0 }, temperature: 300.0 };
        let small = phonon_rate(1e-9, &bath).unwrap();
        assert!((small / bath.zero_frequency_rate() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn kappa_vib_dimer() {
        let s = RingSpec::regular(2, &SiteParams::default()).unwrap();
        let mut j = CouplingMatrix::zeros(2);
        j.set(0, 1, 0.05);
        let b = diagonalize(&build_hamiltonian(&s, &j, None).unwrap()).unwrap();
        let k = calibrate_kappa_vib(&b, 2.5e-9).unwrap();
        assert!((k - 1e3 * lifetime_to_rate(2.5e-9) / 0.1).abs() < 1e-12 * k);
        let bath = PhononBath { model: PhononModel::Ohmic { kappa: k }, temperature: 0.0 };
        let r = phonon_rate(0.1, &bath).unwrap();
        assert!((r / lifetime_to_rate(2.5e-9) - 1e3).abs() < 1e-9);
    }

    #[test]
    fn kappa_vib_needs_manifold_structure() {
        let s = RingSpec::regular(1, &SiteParams::default()).unwrap();
        let b = diagonalize(&build_hamiltonian(&s, &coupling(&s).unwrap(), None).unwrap()).unwrap();
        assert_eq!(calibrate_kappa_vib(&b, 2.5e-9), Err(Error::NoIntraManifold));
        // the regular dimer at θ_zen = π/4 is uncoupled, so its one-excitation pair is degenerate
        let s = RingSpec::regular(2, &SiteParams::default()).unwrap();
        let b = diagonalize(&build_hamiltonian(&s, &coupling(&s).unwrap(), None).unwrap()).unwrap();
        assert_eq!(calibrate_kappa_vib(&b, 2.5e-9), Err(Error::NoIntraManifold));
    }

    #[test]
    fn regime_multipliers() {
        let m: Vec<f64> = [VibRegime::Fast, VibRegime::Match, VibRegime::Slow, VibRegime::Off]
            .iter()
            .map(|r| r.multiplier())
            .collect();
        assert_eq!(m, vec![1e3, 1.0, 1e-3, 0.0]);
    }

    proptest! {
        #[test]
        fn detailed_balance(w in 1e-3f64..3.0, t in 100.0f64..6000.0, s in 0.0f64..1.0) {
            let expect = (-w / (K_B * t)).exp();
            let mut bath = OpticalBath::calibrated(t, 1.8, 2.5e-9);
            bath.bandgap = Some(BandGap::new(1.5, s, GapSide::Below).unwrap());
            let em = optical_rate(w, &bath).unwrap();
            if em > 0.0 {
                prop_assert!((optical_rate(-w, &bath).unwrap() / em / expect - 1.0).abs() < 1e-12);
            }
            for model in [PhononModel::Ohmic { kappa: 0.3 }, PhononModel::SuperOhmic { lambda: 5e-3, omega_crit: 0.09 }] {
                let b = PhononBath { model, temperature: t };
                let em = phonon_rate(w, &b).unwrap();
                if em > 1e-300 {
                    prop_assert!((phonon_rate(-w, &b).unwrap() / em / expect - 1.0).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn suppression_monotone(w in 0.5f64..3.0, s1 in 0.0f64..1.0, s2 in 0.0f64..1.0) {
            let (lo, hi) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
            let mk = |s| OpticalBath { bandgap: Some(BandGap::new(1.8, s, GapSide::Below).unwrap()), ..OpticalBath::calibrated(5800.0, 1.8, 2.5e-9) };
            let (a, b) = (optical_rate(w, &mk(lo)).unwrap(), optical_rate(w, &mk(hi)).unwrap());
            if w < 1.8 { prop_assert!(b <= a); } else { prop_assert_eq!(a, b); }
        }
    }
}
