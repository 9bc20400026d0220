//! Thermal plus zero-point radiation environment.
//!
//! The bath enters the dynamics only through the effective energy D(T) that
//! multiplies the momentum diffusion term, and through the friction γ.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::CONSTANTS;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BathError {
    #[error("temperature must be finite and >= 0 K (got {0})")]
    Temperature(f64),
    #[error("hbar_omega_a must be finite and > 0 eV (got {0})")]
    Quantum(f64),
    #[error("gamma must be finite and >= 0 (got {0})")]
    Gamma(f64),
    #[error("angular frequency must be > 0 (got {0})")]
    Frequency(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBath")]
pub struct Bath {
    #[serde(rename = "temperature_K")]
    temperature: f64,
    #[serde(rename = "hbar_omega_a_eV")]
    hbar_omega_a: f64,
    #[serde(rename = "gamma_reduced")]
    gamma: f64,
    zero_point: bool,
}

#[derive(Deserialize)]
struct RawBath {
    #[serde(rename = "temperature_K")]
    temperature: f64,
    #[serde(rename = "hbar_omega_a_eV")]
    hbar_omega_a: f64,
    #[serde(rename = "gamma_reduced", default)]
    gamma: f64,
    #[serde(default = "default_zero_point")]
    zero_point: bool,
}

fn default_zero_point() -> bool {
    true
}

impl TryFrom<RawBath> for Bath {
    type Error = BathError;

    fn try_from(raw: RawBath) -> Result<Self, Self::Error> {
        Bath::new(raw.temperature, raw.hbar_omega_a, raw.gamma, raw.zero_point)
    }
}

impl Bath {
    pub fn new(temperature: f64, hbar_omega_a: f64, gamma: f64, zero_point: bool) -> Result<Self, BathError> {
        if !(temperature.is_finite() && temperature >= 0.0) {
            return Err(BathError::Temperature(temperature));
        }
        if !(hbar_omega_a.is_finite() && hbar_omega_a > 0.0) {
            return Err(BathError::Quantum(hbar_omega_a));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(BathError::Gamma(gamma));
        }
        Ok(Bath { temperature, hbar_omega_a, gamma, zero_point })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn hbar_omega_a(&self) -> f64 {
        self.hbar_omega_a
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn zero_point(&self) -> bool {
        self.zero_point
    }

    pub fn with_temperature(mut self, temperature: f64) -> Result<Self, BathError> {
        if !(temperature.is_finite() && temperature >= 0.0) {
            return Err(BathError::Temperature(temperature));
        }
        self.temperature = temperature;
        Ok(self)
    }

    /// D(T) in eV.
    pub fn diffusion_energy(&self) -> f64 {
        diffusion_energy(self.temperature, self.hbar_omega_a, self.zero_point)
    }
}

/// coth(a) for a > 0, stable at both ends.
pub fn coth(a: f64) -> f64 {
    if a > 20.0 {
        1.0 + 2.0 * (-2.0 * a).exp()
    } else if a < 1e-6 {
        1.0 / a + a / 3.0
    } else {
        1.0 / a.tanh()
    }
}

/// D(T) = (ħω_a/2)·coth(ħω_a/2k_BT) with zero-point fluctuations, k_BT without.
///
/// T = 0 is an exact special case: ħω_a/2 (zero-point) or 0 (classical).
pub fn diffusion_energy(temperature: f64, hbar_omega_a: f64, zero_point: bool) -> f64 {
    let half = 0.5 * hbar_omega_a;
    if !zero_point {
        return CONSTANTS.k_b * temperature;
    }
    if temperature == 0.0 {
        return half;
    }
    half * coth(half / (CONSTANTS.k_b * temperature))
}

/// Derivative dD/d(ħω_a) at fixed T, zero-point branch.
///
/// With a = ħω_a/2k_BT: dD/dħω_a = ½(coth a − a·csch² a).
pub(crate) fn diffusion_energy_dquantum(temperature: f64, hbar_omega_a: f64) -> f64 {
    if temperature == 0.0 {
        return 0.5;
    }
    let a = 0.5 * hbar_omega_a / (CONSTANTS.k_b * temperature);
    let g = if a > 20.0 {
        // csch² a ≈ 4e^{-2a}
        1.0 + 2.0 * (-2.0 * a).exp() - 4.0 * a * (-2.0 * a).exp()
    } else if a < 1e-4 {
        // coth a − a csch² a = 2a/3 − 4a³/45 + …
        2.0 * a / 3.0 - 4.0 * a * a * a / 45.0
    } else {
        let s = a.sinh();
        coth(a) - a / (s * s)
    };
    0.5 * g
}

/// Spectral energy density ρ(ω,T) = (ω²/π²c³)[ħω/2 + ħω/(e^{ħω/k_BT} − 1)]
/// in eV·s·m⁻³ (energy per volume per unit angular frequency).
pub fn spectral_density(omega: f64, temperature: f64) -> Result<f64, BathError> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(BathError::Frequency(omega));
    }
    if !(temperature.is_finite() && temperature >= 0.0) {
        return Err(BathError::Temperature(temperature));
    }
    let c = CONSTANTS.speed_of_light;
    let prefactor = omega * omega / (std::f64::consts::PI.powi(2) * c * c * c);
    let quantum = CONSTANTS.hbar * omega;
    Ok(prefactor * (0.5 * quantum + planck_occupation_energy(quantum, temperature)))
}

/// Blackbody part ħω/(e^{ħω/k_BT} − 1), zero at T = 0.
pub fn planck_occupation_energy(quantum: f64, temperature: f64) -> f64 {
    if temperature == 0.0 {
        return 0.0;
    }
    let x = quantum / (CONSTANTS.k_b * temperature);
    quantum / x.exp_m1()
}

/// Radiation damping relative to the well frequency,
/// γ/ω_a = (2/3)(e²/ħc)(ħω_a/mc²).
///
/// Returns the ratio and whether it violates γ ≪ ω_a (ratio > 10⁻²).
pub fn radiation_gamma(charge_squared_over_hbar_c: f64, hbar_omega_a: f64, rest_energy: f64) -> (f64, bool) {
    let ratio = 2.0 / 3.0 * charge_squared_over_hbar_c * (hbar_omega_a / rest_energy);
    (ratio, ratio > 1e-2)
}
