//! Ring geometry, dipole orientations and the dipole-dipole coupling matrix.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::constants::{C_LIGHT, EPS0, E_CHARGE, HBAR_EV_S, HBAR_J_S};
use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrapMode {
    Incoherent,
    Coherent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapSpec {
    pub mode: TrapMode,
    /// Trap splitting in eV. `None` means "match ω_good", resolved when the model is built.
    pub omega_t: Option<f64>,
    /// Incoherent extraction rate (eV).
    pub gamma_x: f64,
    /// Coherent ring-trap coupling (eV).
    pub c_x: f64,
}

impl TrapSpec {
    pub fn incoherent(gamma_x: f64) -> Self {
        TrapSpec { mode: TrapMode::Incoherent, omega_t: None, gamma_x, c_x: 0.0 }
    }

    pub fn coherent(c_x: f64) -> Self {
        TrapSpec { mode: TrapMode::Coherent, omega_t: None, gamma_x: 0.0, c_x }
    }

    pub fn validate(&self) -> Result<()> {
        let (active, inactive, name) = match self.mode {
            TrapMode::Incoherent => (self.gamma_x, self.c_x, "gamma_x"),
            TrapMode::Coherent => (self.c_x, self.gamma_x, "c_x"),
        };
        if !(active >= 0.0) || !active.is_finite() {
            return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0")));
        }
        if inactive != 0.0 {
            return Err(Error::ModeMismatch("exactly one of gamma_x / c_x may be set per trap mode"));
        }
        if let Some(w) = self.omega_t {
            if !(w > 0.0) {
                return Err(Error::InvalidParameter("omega_t must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Nominal per-site parameters used to lay out an undisordered ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteParams {
    pub omega_a: f64,
    pub tau_l: f64,
    pub r_nn: f64,
    pub theta_eq: f64,
    pub theta_zen: f64,
}

impl Default for SiteParams {
    fn default() -> Self {
        SiteParams { omega_a: 1.8, tau_l: 2.5e-9, r_nn: 1e-9, theta_eq: FRAC_PI_2, theta_zen: FRAC_PI_4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    pub n_sites: usize,
    pub r_nn: f64,
    pub omega_a: Vec<f64>,
    pub tau_l: Vec<f64>,
    pub theta_eq: Vec<f64>,
    pub theta_zen: Vec<f64>,
    pub positions: Vec<Vec3>,
    pub trap: Option<TrapSpec>,
    /// Reference splitting and lifetime defining unit dipole strength and κ_opt.
    pub omega_ref: f64,
    pub tau_ref: f64,
}

pub fn circumradius(n_sites: usize, r_nn: f64) -> f64 {
    if n_sites < 2 {
        0.0
    } else {
        r_nn / (2.0 * (PI / n_sites as f64).sin())
    }
}

fn site_angle(site: usize, n_sites: usize) -> f64 {
    2.0 * PI * site as f64 / n_sites.max(1) as f64
}

impl RingSpec {
    pub fn regular(n_sites: usize, p: &SiteParams) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidParameter("n_sites must be >= 1".into()));
        }
        let r = circumradius(n_sites, p.r_nn);
        let positions = (0..n_sites)
            .map(|i| {
                let phi = site_angle(i, n_sites);
                [r * phi.cos(), r * phi.sin(), 0.0]
            })
            .collect();
        let spec = RingSpec {
            n_sites,
            r_nn: p.r_nn,
            omega_a: vec![p.omega_a; n_sites],
            tau_l: vec![p.tau_l; n_sites],
            theta_eq: vec![p.theta_eq; n_sites],
            theta_zen: vec![p.theta_zen; n_sites],
            positions,
            trap: None,
            omega_ref: p.omega_a,
            tau_ref: p.tau_l,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_trap(mut self, trap: TrapSpec) -> Self {
        self.trap = Some(trap);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_sites;
        if n == 0 {
            return Err(Error::InvalidParameter("n_sites must be >= 1".into()));
        }
        for (name, len) in [
            ("omega_a", self.omega_a.len()),
            ("tau_l", self.tau_l.len()),
            ("theta_eq", self.theta_eq.len()),
            ("theta_zen", self.theta_zen.len()),
            ("positions", self.positions.len()),
        ] {
            if len != n {
                return Err(Error::InvalidParameter(format!("{name} has {len} entries for {n} sites")));
            }
        }
        if !(self.r_nn > 0.0) {
            return Err(Error::InvalidParameter("r_nn must be > 0".into()));
        }
        if !(self.omega_ref > 0.0) || !(self.tau_ref > 0.0) {
            return Err(Error::InvalidParameter("reference omega/tau must be > 0".into()));
        }
        if self.omega_a.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidParameter("omega_a must be > 0".into()));
        }
        if self.tau_l.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::InvalidParameter("tau_l must be > 0".into()));
        }
        let all_angles = self.theta_eq.iter().chain(&self.theta_zen);
        if all_angles.into_iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("angles must be finite".into()));
        }
        for i in 0..n {
            for k in i + 1..n {
                if distance(&self.positions[i], &self.positions[k]) <= 1e-12 * self.r_nn {
                    return Err(Error::DegenerateGeometry(i, k));
                }
            }
        }
        if let Some(t) = &self.trap {
            t.validate()?;
        }
        Ok(())
    }
}

fn distance(a: &Vec3, b: &Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Unit dipole direction of `site` in its local (radial, tangential, normal) frame.
pub fn dipole_orientation(site: usize, spec: &RingSpec) -> Vec3 {
    let phi = site_angle(site, spec.n_sites);
    let (radial, tangential) = ([phi.cos(), phi.sin(), 0.0], [-phi.sin(), phi.cos(), 0.0]);
    let teq = spec.theta_eq[site].rem_euclid(2.0 * PI);
    let tz = spec.theta_zen[site];
    let (c, s) = (tz.cos(), tz.sin());
    let mut d = [0.0; 3];
    for x in 0..3 {
        d[x] = c * (teq.cos() * radial[x] + teq.sin() * tangential[x]);
    }
    d[2] += s;
    d
}

/// Transition dipole magnitude (C·m) of a two-level system with lifetime `tau_l` (s)
/// and splitting `omega_a` (eV).
pub fn dipole_moment(tau_l: f64, omega_a: f64) -> Result<f64> {
    if !(tau_l > 0.0) || !(omega_a > 0.0) {
        return Err(Error::InvalidParameter("dipole_moment needs tau_l > 0 and omega_a > 0".into()));
    }
    let omega = omega_a / HBAR_EV_S;
    Ok((3.0 * PI * EPS0 * HBAR_J_S * C_LIGHT.powi(3) / (tau_l * omega.powi(3))).sqrt())
}

/// Per-site dipole vectors in C·m.
pub fn dipole_vectors(spec: &RingSpec) -> Result<Vec<Vec3>> {
    (0..spec.n_sites)
        .map(|i| {
            let m = dipole_moment(spec.tau_l[i], spec.omega_a[i])?;
            let u = dipole_orientation(i, spec);
            Ok([m * u[0], m * u[1], m * u[2]])
        })
        .collect()
}

/// Dipole vectors in units of the reference dipole |d|(τ_ref, ω_ref).
pub fn normalized_dipoles(spec: &RingSpec) -> Result<Vec<Vec3>> {
    let d_ref = dipole_moment(spec.tau_ref, spec.omega_ref)?;
    Ok(dipole_vectors(spec)?.into_iter().map(|d| [d[0] / d_ref, d[1] / d_ref, d[2] / d_ref]).collect())
}

/// |Σ_i d_i| / Σ_i |d_i|.
pub fn collective_fraction(spec: &RingSpec) -> Result<f64> {
    let d = dipole_vectors(spec)?;
    let mut sum = [0.0; 3];
    let mut norms = 0.0;
    for v in &d {
        for x in 0..3 {
            sum[x] += v[x];
        }
        norms += dot(v, v).sqrt();
    }
    Ok(dot(&sum, &sum).sqrt() / norms)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    j: Vec<f64>,
}

impl CouplingMatrix {
    pub fn zeros(n: usize) -> Self {
        CouplingMatrix { n, j: vec![0.0; n * n] }
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.j[i * self.n + k]
    }

    pub fn set(&mut self, i: usize, k: usize, v: f64) {
        self.j[i * self.n + k] = v;
        self.j[k * self.n + i] = v;
    }

    /// Nearest-neighbour coupling j[0][1], or zero for a single site.
    pub fn nearest_neighbour(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.get(0, 1)
        }
    }
}

/// Pairwise point-dipole couplings in eV.
pub fn coupling(spec: &RingSpec) -> Result<CouplingMatrix> {
    spec.validate()?;
    let d = dipole_vectors(spec)?;
    let n = spec.n_sites;
    let mut out = CouplingMatrix::zeros(n);
    for i in 0..n {
        for k in i + 1..n {
            let (pi, pk) = (&spec.positions[i], &spec.positions[k]);
            let r = distance(pi, pk);
            if r <= 1e-12 * spec.r_nn {
                return Err(Error::DegenerateGeometry(i, k));
            }
            let rhat = [(pk[0] - pi[0]) / r, (pk[1] - pi[1]) / r, (pk[2] - pi[2]) / r];
            let joules = (dot(&d[i], &d[k]) - 3.0 * dot(&rhat, &d[i]) * dot(&rhat, &d[k]))
                / (4.0 * PI * EPS0 * r.powi(3));
            out.set(i, k, joules / E_CHARGE);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ring(n: usize, teq: f64, tz: f64) -> RingSpec {
        RingSpec::regular(n, &SiteParams { theta_eq: teq, theta_zen: tz, ..SiteParams::default() }).unwrap()
    }

    #[test]
    fn zenith_limit_points_along_normal() {
        let s = ring(4, 0.3, FRAC_PI_2);
        for i in 0..4 {
            let d = dipole_orientation(i, &s);
            assert!(d[0].abs() < 1e-15 && d[1].abs() < 1e-15 && (d[2] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn in_plane_radial_limit() {
        let s = ring(4, 0.0, 0.0);
        let d = dipole_orientation(0, &s);
        assert!((d[0] - 1.0).abs() < 1e-15 && d[1].abs() < 1e-15 && d[2].abs() < 1e-15);
    }

    #[test]
    fn guide_slide_collective_fraction() {
        let s = ring(4, FRAC_PI_2, FRAC_PI_4);
        assert!((dipole_orientation(0, &s)[2] - FRAC_PI_4.sin()).abs() < 1e-15);
        assert!((collective_fraction(&s).unwrap() - FRAC_PI_4.sin()).abs() < 1e-12);
    }

    #[test]
    fn dipole_moment_reference_value() {
        // sqrt(3π ε0 ħ c³ τ⁻¹ ω⁻³) evaluated independently with all factors expanded
        let hbar_j = 6.582119569e-16 * 1.602176634e-19;
        let w = 1.8 / 6.582119569e-16;
        let c3 = 2.99792458e8f64 * 2.99792458e8 * 2.99792458e8;
        let expect = (3.0 * std::f64::consts::PI * 8.8541878128e-12 * hbar_j * c3 / (2.5e-9 * w * w * w)).sqrt();
        let got = dipole_moment(2.5e-9, 1.8).unwrap();
        assert!((got / expect - 1.0).abs() < 1e-14);
        // 40-digit evaluation of the closed form
        assert!((got / 6.810028862048889311e-29 - 1.0).abs() < 1e-14, "{got:e}");
    }

    #[test]
    fn dipole_moment_scalings() {
        let d = dipole_moment(2.5e-9, 1.8).unwrap();
        assert!((dipole_moment(1e-8, 1.8).unwrap() / d - 0.5).abs() < 1e-14);
        assert!((dipole_moment(2.5e-9, 7.2).unwrap() / d - 0.125).abs() < 1e-14);
        assert!(dipole_moment(0.0, 1.8).is_err());
        assert!(dipole_moment(1e-9, -1.0).is_err());
    }

    fn two_site(teq: f64, tz: f64, p1: Vec3) -> RingSpec {
        let mut s = ring(2, teq, tz);
        s.positions = vec![[0.0, 0.0, 0.0], p1];
        s
    }

    #[test]
    fn h_and_j_aggregate_signs() {
        let d = dipole_moment(2.5e-9, 1.8).unwrap();
        let scale = d * d / (4.0 * PI * EPS0 * 1e-27) / E_CHARGE;
        // both along z, separated along x: perpendicular to r
        let j = coupling(&two_site(0.0, FRAC_PI_2, [1e-9, 0.0, 0.0])).unwrap().get(0, 1);
        assert!((j / scale - 1.0).abs() < 1e-12);
        // both along z, separated along z: parallel to r
        let j = coupling(&two_site(0.0, FRAC_PI_2, [0.0, 0.0, 1e-9])).unwrap().get(0, 1);
        assert!((j / scale + 2.0).abs() < 1e-12);
    }

    #[test]
    fn tangential_dimer_is_uncoupled() {
        let s = ring(2, FRAC_PI_2, FRAC_PI_4);
        let d = dipole_moment(2.5e-9, 1.8).unwrap();
        let scale = d * d / (4.0 * PI * EPS0 * 1e-27) / E_CHARGE;
        assert!(coupling(&s).unwrap().get(0, 1).abs() < 1e-14 * scale);
    }

    #[test]
    fn coincident_sites_rejected() {
        let mut s = ring(3, FRAC_PI_2, FRAC_PI_4);
        s.positions[2] = s.positions[0];
        assert_eq!(coupling(&s).unwrap_err(), Error::DegenerateGeometry(0, 2));
    }

    #[test]
    fn nearest_neighbour_sign_flip() {
        for n in 3..=7 {
            assert!(coupling(&ring(n, FRAC_PI_2, FRAC_PI_2)).unwrap().nearest_neighbour() > 0.0);
            assert!(coupling(&ring(n, FRAC_PI_2, FRAC_PI_4)).unwrap().nearest_neighbour() < 0.0);
        }
    }

    #[test]
    fn parallel_quadmer_coupling_magnitude() {
        let j = coupling(&ring(4, FRAC_PI_2, FRAC_PI_2)).unwrap().nearest_neighbour();
        assert!((j - 0.26).abs() < 0.01, "{j}");
    }

    proptest! {
        #[test]
        fn orientation_is_unit(n in 1usize..9, teq in 0.0..(2.0 * PI), tz in 0.0..FRAC_PI_2) {
            let s = ring(n, teq, tz);
            for i in 0..n {
                let d = dipole_orientation(i, &s);
                prop_assert!((dot(&d, &d).sqrt() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn coupling_is_rotation_invariant(n in 2usize..8, teq in 0.0..(2.0 * PI), tz in 0.0..FRAC_PI_2) {
            let j = coupling(&ring(n, teq, tz)).unwrap();
            let scale = j.nearest_neighbour().abs().max(1e-6);
            for i in 0..n {
                prop_assert_eq!(j.get(i, i), 0.0);
                for k in 0..n {
                    prop_assert_eq!(j.get(i, k), j.get(k, i));
                    let shifted = j.get(0, (k + n - i) % n);
                    prop_assert!((j.get(i, k) - shifted).abs() <= 1e-9 * scale);
                }
            }
        }

        #[test]
        fn collective_fraction_equals_sin_zenith(n in 2usize..9, tz in 0.0..FRAC_PI_2) {
            let s = ring(n, FRAC_PI_2, tz);
            prop_assert!((collective_fraction(&s).unwrap() - tz.sin()).abs() < 1e-10);
        }
    }
}
