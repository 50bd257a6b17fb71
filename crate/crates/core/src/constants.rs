//! Physical constants. Energies and rates are carried in eV throughout the crate;
//! SI values only appear when converting dipole moments and output power.

/// Reduced Planck constant in eV·s.
pub const HBAR_EV_S: f64 = 6.582119569e-16;
/// Speed of light in m/s.
pub const C_LIGHT: f64 = 2.99792458e8;
/// Vacuum permittivity in F/m.
pub const EPS0: f64 = 8.8541878128e-12;
/// Elementary charge in C.
pub const E_CHARGE: f64 = 1.602176634e-19;
/// Boltzmann constant in eV/K.
pub const K_B: f64 = 8.617333262e-5;
/// Reduced Planck constant in J·s.
pub const HBAR_J_S: f64 = HBAR_EV_S * E_CHARGE;

/// Converts a rate expressed as an energy (eV) into s⁻¹.
pub fn rate_per_second(rate_ev: f64) -> f64 {
    rate_ev / HBAR_EV_S
}

/// Converts a lifetime in seconds into the equivalent rate in eV.
pub fn lifetime_to_rate(tau: f64) -> f64 {
    HBAR_EV_S / tau
}

/// Particle flux (in eV rate units) times an energy (eV) gives power in W.
pub fn power_watts(rate_ev: f64, energy_ev: f64) -> f64 {
    rate_per_second(rate_ev) * energy_ev * E_CHARGE
}
