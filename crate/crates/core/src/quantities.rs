//! Units and physical constants.
//!
//! Everything inside the crate works in one unit system: energies in
//! wavenumbers (cm⁻¹), times in picoseconds, temperatures in Kelvin. Angular
//! frequencies are therefore rad/ps and every rate is ps⁻¹.

use crate::error::{Error, Result};

/// Speed of light in cm/ps (exact, SI definition).
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e-2;

/// Reduced Planck constant in cm⁻¹·ps, i.e. `1 / (2π c)`.
pub const HBAR: f64 = 1.0 / (2.0 * std::f64::consts::PI * SPEED_OF_LIGHT);

/// Boltzmann constant in cm⁻¹/K (CODATA 2018, exact SI ratio k/hc).
pub const K_B: f64 = 0.695_034_800_486_127_4;

/// The internal unit system. Exists so callers can report what units they
/// are reading; the values are the module constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    pub hbar: f64,
    pub k_b: f64,
}

impl UnitSystem {
    pub const ENERGY: &'static str = "cm^-1";
    pub const TIME: &'static str = "ps";
    pub const TEMPERATURE: &'static str = "K";

    pub const fn internal() -> Self {
        UnitSystem { hbar: HBAR, k_b: K_B }
    }
}

/// Converts an energy in cm⁻¹ to an angular frequency in rad/ps.
#[inline]
pub fn energy_to_angular_frequency(energy: f64) -> f64 {
    energy / HBAR
}

/// Inverse of [`energy_to_angular_frequency`].
#[inline]
pub fn angular_frequency_to_energy(omega: f64) -> f64 {
    omega * HBAR
}

/// `k_B T` in cm⁻¹.
pub fn thermal_energy(temperature: f64) -> Result<f64> {
    if !(temperature >= 0.0) || !temperature.is_finite() {
        return Err(Error::config(format!(
            "temperature must be finite and non-negative, got {temperature}"
        )));
    }
    Ok(K_B * temperature)
}
