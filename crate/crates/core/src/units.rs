//! Physical constants and conversion between physical (eV, s, m, K) and
//! reduced simulation units.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// CODATA 2018 constants in the unit system used at the API boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    /// Boltzmann constant, eV/K.
    pub k_b: f64,
    /// Reduced Planck constant, eV·s.
    pub hbar: f64,
    /// Fine-structure constant e²/ħc.
    pub fine_structure: f64,
    /// Speed of light, m/s.
    pub speed_of_light: f64,
}

pub const CONSTANTS: Constants = Constants {
    k_b: 8.617333262e-5,
    hbar: 6.582119569e-16,
    fine_structure: 7.2973525693e-3,
    speed_of_light: 299_792_458.0,
};

/// Electron rest energy in eV, handy for radiation-damping estimates.
pub const ELECTRON_REST_ENERGY_EV: f64 = 510_998.950_00;

#[derive(Debug, Error, PartialEq)]
pub enum UnitsError {
    #[error("unknown dimension tag `{0}`")]
    UnknownDimension(String),
    #[error("unit scales must be finite and strictly positive (energy={energy}, time={time}, length={length})")]
    InvalidScale { energy: f64, time: f64, length: f64 },
}

/// The dimensions that can be moved between unit systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Energy,
    Time,
    Length,
    Frequency,
    Rate,
    Mass,
    Momentum,
    Position,
}

impl Dimension {
    pub const ALL: [Dimension; 8] = [
        Dimension::Energy,
        Dimension::Time,
        Dimension::Length,
        Dimension::Frequency,
        Dimension::Rate,
        Dimension::Mass,
        Dimension::Momentum,
        Dimension::Position,
    ];

    fn as_str(self) -> &'static str {
        match self {
            Dimension::Energy => "energy",
            Dimension::Time => "time",
            Dimension::Length => "length",
            Dimension::Frequency => "frequency",
            Dimension::Rate => "rate",
            Dimension::Mass => "mass",
            Dimension::Momentum => "momentum",
            Dimension::Position => "position",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = UnitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dimension::ALL
            .iter()
            .copied()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| UnitsError::UnknownDimension(s.to_string()))
    }
}

/// Scales of one reduced unit expressed in eV, s and m.
///
/// Mass and momentum scales follow from the three base scales:
/// `mass = E·t²/L²`, `momentum = E·t/L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedUnits {
    #[serde(rename = "energy_scale_eV")]
    energy_scale: f64,
    #[serde(rename = "time_scale_s")]
    time_scale: f64,
    #[serde(rename = "length_scale_m")]
    length_scale: f64,
}

impl ReducedUnits {
    pub fn new(energy_scale: f64, time_scale: f64, length_scale: f64) -> Result<Self, UnitsError> {
        let units = ReducedUnits { energy_scale, time_scale, length_scale };
        units.validate()?;
        Ok(units)
    }

    /// Units in which a well of quantum `hbar_omega_a` (eV) has ω_a = 1 and ħ = 1.
    pub fn natural_for_well(hbar_omega_a: f64, length_scale: f64) -> Result<Self, UnitsError> {
        Self::new(hbar_omega_a, CONSTANTS.hbar / hbar_omega_a, length_scale)
    }

    pub fn validate(&self) -> Result<(), UnitsError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        let mass = self.mass_scale();
        if ok(self.energy_scale) && ok(self.time_scale) && ok(self.length_scale) && ok(mass) {
            Ok(())
        } else {
            Err(UnitsError::InvalidScale {
                energy: self.energy_scale,
                time: self.time_scale,
                length: self.length_scale,
            })
        }
    }

    pub fn energy_scale(&self) -> f64 {
        self.energy_scale
    }

    pub fn time_scale(&self) -> f64 {
        self.time_scale
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn mass_scale(&self) -> f64 {
        self.energy_scale * self.time_scale * self.time_scale / (self.length_scale * self.length_scale)
    }

    /// Physical size of one reduced unit of `dim`.
    pub fn scale_of(&self, dim: Dimension) -> f64 {
        match dim {
            Dimension::Energy => self.energy_scale,
            Dimension::Time => self.time_scale,
            Dimension::Length | Dimension::Position => self.length_scale,
            Dimension::Frequency | Dimension::Rate => 1.0 / self.time_scale,
            Dimension::Mass => self.mass_scale(),
            Dimension::Momentum => self.energy_scale * self.time_scale / self.length_scale,
        }
    }

    pub fn to_reduced(&self, value: f64, dim: Dimension) -> f64 {
        value / self.scale_of(dim)
    }

    pub fn to_physical(&self, value: f64, dim: Dimension) -> f64 {
        value * self.scale_of(dim)
    }
}

/// Thermal energy k_B·T in eV.
pub fn thermal_energy(temperature_k: f64) -> f64 {
    CONSTANTS.k_b * temperature_k
}

/// Angular frequency (rad/s) of a quantum ħω given in eV.
pub fn angular_frequency(hbar_omega: f64) -> f64 {
    hbar_omega / CONSTANTS.hbar
}
