//! Closed-form flux-over-population escape rates.
//!
//! All quantities here are in reduced units except [`rate_paper_fit`], which
//! takes eV and kelvin and returns s⁻¹.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bath::{diffusion_energy, Bath};
use crate::potential::WellFeatures;
use crate::quadrature::integrate;
use crate::units::{ReducedUnits, CONSTANTS};

/// Barrier ratios below this trigger a validity warning.
pub const LOW_BARRIER_RATIO: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KramersError {
    #[error("boundary layer undefined at zero friction")]
    ZeroFriction,
    #[error("invalid rate inputs: {0}")]
    InvalidInput(String),
}

/// Everything the analytic rate needs, in reduced units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateInputs {
    pub features: WellFeatures,
    pub mass: f64,
    pub gamma: f64,
    /// D(T) in reduced energy units.
    pub diffusion: f64,
}

impl RateInputs {
    pub fn new(features: WellFeatures, mass: f64, gamma: f64, diffusion: f64) -> Result<Self, KramersError> {
        let bad = |what: &str| Err(KramersError::InvalidInput(what.to_string()));
        if !(features.delta_u.is_finite() && features.delta_u > 0.0) {
            return bad("delta_u must be positive");
        }
        if !(features.omega_a > 0.0 && features.omega_b > 0.0) {
            return bad("omega_a and omega_b must be positive");
        }
        if !(mass.is_finite() && mass > 0.0) {
            return bad("mass must be positive");
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return bad("gamma must be >= 0");
        }
        if !(diffusion.is_finite() && diffusion >= 0.0) {
            return bad("diffusion energy must be >= 0");
        }
        Ok(RateInputs { features, mass, gamma, diffusion })
    }

    /// Inputs whose D is the bath's D(T) expressed in `units`.
    pub fn from_bath(
        features: WellFeatures,
        mass: f64,
        bath: &Bath,
        units: &ReducedUnits,
    ) -> Result<Self, KramersError> {
        Self::new(features, mass, bath.gamma(), bath.diffusion_energy() / units.energy_scale())
    }

    /// Inputs with D chosen so that ΔU/D equals `ratio`.
    pub fn with_barrier_ratio(features: WellFeatures, mass: f64, gamma: f64, ratio: f64) -> Result<Self, KramersError> {
        if !(ratio.is_finite() && ratio > 0.0) {
            return Err(KramersError::InvalidInput("barrier ratio must be positive".into()));
        }
        Self::new(features, mass, gamma, features.delta_u / ratio)
    }

    pub fn barrier_ratio(&self) -> f64 {
        self.features.delta_u / self.diffusion
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateMethod {
    AnalyticFull,
    AnalyticLowFriction,
    Arrhenius,
    MonteCarlo,
    FokkerPlanck,
}

impl fmt::Display for RateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RateMethod::AnalyticFull => "analytic-full",
            RateMethod::AnalyticLowFriction => "analytic-low-friction",
            RateMethod::Arrhenius => "arrhenius",
            RateMethod::MonteCarlo => "monte-carlo",
            RateMethod::FokkerPlanck => "fokker-planck",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeRateEstimate {
    pub method: RateMethod,
    pub kappa: f64,
    pub uncertainty: f64,
    pub diagnostics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl EscapeRateEstimate {
    pub fn new(method: RateMethod, kappa: f64, uncertainty: f64) -> Self {
        EscapeRateEstimate { method, kappa, uncertainty, diagnostics: BTreeMap::new(), warnings: Vec::new() }
    }

    pub fn with_diagnostic(mut self, name: &str, value: f64) -> Self {
        self.diagnostics.insert(name.to_string(), value);
        self
    }

    pub fn diagnostic(&self, name: &str) -> Option<f64> {
        self.diagnostics.get(name).copied()
    }
}

/// Positive root α = γ/2 + sqrt(γ²/4 + ω_b²) of α(α − γ) = ω_b².
pub fn alpha_root(gamma: f64, omega_b: f64) -> f64 {
    let half = 0.5 * gamma;
    half + half.hypot(omega_b)
}

/// α − γ evaluated as ω_b²/α, which stays accurate when γ ≫ ω_b.
fn alpha_minus_gamma(alpha: f64, omega_b: f64) -> f64 {
    omega_b * omega_b / alpha
}

/// Normalized boundary-layer function F(y), rising from 0 (y → −∞) to 1.
pub fn boundary_layer_f(y: f64, inputs: &RateInputs) -> Result<f64, KramersError> {
    if inputs.gamma <= 0.0 {
        return Err(KramersError::ZeroFriction);
    }
    let alpha = alpha_root(inputs.gamma, inputs.features.omega_b);
    let am = alpha_minus_gamma(alpha, inputs.features.omega_b);
    let z = y * (am / (2.0 * inputs.mass * inputs.gamma * inputs.diffusion)).sqrt();
    Ok(0.5 * libm::erfc(-z))
}

/// Barrier-top flux j(x_b) = C·sqrt((α−γ)/α)·D·exp(−ΔU/D).
pub fn barrier_flux(inputs: &RateInputs, normalization: f64) -> Result<f64, KramersError> {
    if inputs.gamma <= 0.0 {
        return Err(KramersError::ZeroFriction);
    }
    let omega_b = inputs.features.omega_b;
    let alpha = alpha_root(inputs.gamma, omega_b);
    let d = inputs.diffusion;
    Ok(normalization * (omega_b / alpha) * d * (-inputs.features.delta_u / d).exp())
}

/// Barrier-top flux by nested quadrature of the momentum-weighted boundary
/// layer distribution, ∫dp (p/m) e^{−p²/2mD} ∫_{−∞}^{p} e^{−(α−γ)y²/2mγD} dy,
/// times its normalization. Independent of [`barrier_flux`].
pub fn barrier_flux_quadrature(inputs: &RateInputs, normalization: f64) -> Result<f64, KramersError> {
    if inputs.gamma <= 0.0 {
        return Err(KramersError::ZeroFriction);
    }
    let m = inputs.mass;
    let d = inputs.diffusion;
    let g = inputs.gamma;
    let alpha = alpha_root(g, inputs.features.omega_b);
    let am = alpha - g;
    let sigma_p = (m * d).sqrt();
    let sigma_y = (m * g * d / am).sqrt();
    let norm = (am / (2.0 * PI * m * g * d)).sqrt();

    let inner = |p: f64| {
        let lo = -12.0 * sigma_y;
        if p <= lo {
            return 0.0;
        }
        let b = am / (2.0 * m * g * d);
        integrate(|y| (-b * y * y).exp(), lo, p, 1e-300, 1e-13)
    };
    let outer = integrate(
        |p| p / m * (-p * p / (2.0 * m * d)).exp() * inner(p),
        -12.0 * sigma_p,
        12.0 * sigma_p,
        1e-300,
        1e-11,
    );
    Ok(normalization * norm * (-inputs.features.delta_u / d).exp() * outer)
}

/// Well population P₀ = C·2πD/ω_a.
pub fn well_population(inputs: &RateInputs, normalization: f64) -> f64 {
    normalization * 2.0 * PI * inputs.diffusion / inputs.features.omega_a
}

/// P₀ by 2-D quadrature of the harmonic well distribution. Independent of
/// [`well_population`].
pub fn well_population_quadrature(inputs: &RateInputs, normalization: f64) -> f64 {
    let m = inputs.mass;
    let d = inputs.diffusion;
    let w = inputs.features.omega_a;
    let sigma_p = (m * d).sqrt();
    let sigma_x = (d / m).sqrt() / w;
    integrate(
        |p| {
            integrate(
                |xi| (-(p * p / (2.0 * m) + 0.5 * m * w * w * xi * xi) / d).exp(),
                -12.0 * sigma_x,
                12.0 * sigma_x,
                1e-300,
                1e-13,
            )
        },
        -12.0 * sigma_p,
        12.0 * sigma_p,
        1e-300,
        1e-12,
    ) * normalization
}

/// κ = (ω_a/2πω_b)(sqrt(γ²/4 + ω_b²) − γ/2)·exp(−ΔU/D).
///
/// γ = 0 gives the low-friction form (ω_a/2π)exp(−ΔU/D); D = 0 gives κ = 0.
pub fn rate_full(inputs: &RateInputs) -> EscapeRateEstimate {
    let f = &inputs.features;
    let d = inputs.diffusion;
    if d == 0.0 {
        return EscapeRateEstimate::new(RateMethod::Arrhenius, 0.0, 0.0)
            .with_diagnostic("D", 0.0)
            .with_diagnostic("barrier_ratio", f64::INFINITY);
    }
    let alpha = alpha_root(inputs.gamma, f.omega_b);
    // (sqrt(γ²/4+ω_b²) − γ/2)/ω_b = (α − γ)/ω_b = ω_b/α
    let transmission = f.omega_b / alpha;
    let prefactor = f.omega_a / (2.0 * PI) * transmission;
    let ratio = f.delta_u / d;
    let method = if inputs.gamma == 0.0 { RateMethod::AnalyticLowFriction } else { RateMethod::AnalyticFull };
    let mut est = EscapeRateEstimate::new(method, prefactor * (-ratio).exp(), 0.0)
        .with_diagnostic("alpha", alpha)
        .with_diagnostic("D", d)
        .with_diagnostic("prefactor", prefactor)
        .with_diagnostic("transmission", transmission)
        .with_diagnostic("barrier_ratio", ratio)
        .with_diagnostic("omega_ratio", f.omega_b / f.omega_a);
    if ratio < LOW_BARRIER_RATIO {
        est.warnings
            .push(format!("barrier ratio dU/D = {ratio:.3} < {LOW_BARRIER_RATIO}: high-barrier assumption is weak"));
    }
    est
}

/// κ(T) = (ω_a/2π)·exp(−ΔU/D(T)) in s⁻¹, with ω_a = ħω_a/ħ.
///
/// `zero_point = false` gives the Arrhenius form with D = k_BT.
pub fn rate_paper_fit(temperature: f64, hbar_omega_a: f64, delta_u: f64, zero_point: bool) -> EscapeRateEstimate {
    let omega_a = hbar_omega_a / CONSTANTS.hbar;
    let prefactor = omega_a / (2.0 * PI);
    let d = diffusion_energy(temperature, hbar_omega_a, zero_point);
    let method = if zero_point { RateMethod::AnalyticLowFriction } else { RateMethod::Arrhenius };
    let (kappa, ratio) = if d == 0.0 { (0.0, f64::INFINITY) } else { (prefactor * (-delta_u / d).exp(), delta_u / d) };
    EscapeRateEstimate::new(method, kappa, 0.0)
        .with_diagnostic("temperature_K", temperature)
        .with_diagnostic("D_eV", d)
        .with_diagnostic("omega_a_rad_per_s", omega_a)
        .with_diagnostic("prefactor_per_s", prefactor)
        .with_diagnostic("barrier_ratio", ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_features(omega_b: f64, delta_u: f64) -> WellFeatures {
        WellFeatures::from_parts(0.0, 1.0, 1.0, omega_b, delta_u)
    }

    fn inputs(omega_b: f64, gamma: f64, d: f64, delta_u: f64) -> RateInputs {
        RateInputs::new(unit_features(omega_b, delta_u), 1.0, gamma, d).unwrap()
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_root(0.0, 1.0), 1.0);
        let a = alpha_root(3.0, 2.0);
        assert_eq!(a, 4.0);
        assert_eq!(4.0 / (a - 3.0), 4.0);
    }

    #[test]
    fn boundary_layer_limits() {
        let i = inputs(1.0, 0.5, 0.2, 1.0);
        assert!((boundary_layer_f(0.0, &i).unwrap() - 0.5).abs() < 1e-16);
        assert!((boundary_layer_f(50.0, &i).unwrap() - 1.0).abs() < 1e-16);
        assert!(boundary_layer_f(-50.0, &i).unwrap() < 1e-300);
        assert_eq!(boundary_layer_f(0.0, &inputs(1.0, 0.0, 0.2, 1.0)), Err(KramersError::ZeroFriction));
    }

    #[test]
    fn boundary_layer_matches_quadrature() {
        let i = inputs(1.3, 0.7, 0.25, 1.0);
        let alpha = alpha_root(i.gamma, 1.3);
        let s2 = i.mass * i.gamma * i.diffusion / (alpha - i.gamma);
        for &y in &[-1.0, -0.2, 0.1, 0.6] {
            let direct =
                integrate(|t| (-t * t / (2.0 * s2)).exp(), -12.0 * s2.sqrt(), y, 0.0, 1e-14) / (2.0 * PI * s2).sqrt();
            assert!((direct - boundary_layer_f(y, &i).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn flux_reference_matches_quadrature() {
        let i = inputs(1.0, 0.5, 0.2, 1.0);
        let closed = barrier_flux(&i, 1.0).unwrap();
        let quad = barrier_flux_quadrature(&i, 1.0).unwrap();
        assert!(((closed - quad) / closed).abs() < 1e-6, "{closed} vs {quad}");
    }

    #[test]
    fn flux_limits() {
        let i = inputs(1.0, 1e-9, 0.2, 1.0);
        let j = barrier_flux(&i, 1.0).unwrap();
        assert!((j / (0.2 * (-5.0f64).exp()) - 1.0).abs() < 1e-8);
        let huge = inputs(1.0, 0.5, 0.2, 1e4);
        assert_eq!(barrier_flux(&huge, 1.0).unwrap(), 0.0);
        assert_eq!(barrier_flux(&inputs(1.0, 0.0, 0.2, 1.0), 1.0), Err(KramersError::ZeroFriction));
    }

    #[test]
    fn population_examples() {
        let mut i = inputs(1.0, 0.5, 1.0, 1.0);
        i.features.omega_a = 2.0 * PI;
        assert!((well_population(&i, 1.0) - 1.0).abs() < 1e-15);

        let i = inputs(1.0, 0.5, 0.3, 1.0);
        let p = well_population(&i, 1.0);
        assert!((p - 1.884_955_592_153_876).abs() < 1e-12);
        let q = well_population_quadrature(&i, 1.0);
        assert!(((p - q) / p).abs() < 1e-8);

        let j = inputs(1.0, 0.5, 0.6, 1.0);
        assert!((well_population(&j, 1.0) / p - 2.0).abs() < 1e-15);
    }

    #[test]
    fn low_friction_limit() {
        let r = rate_full(&inputs(1.7, 0.0, 0.25, 1.0));
        assert_eq!(r.method, RateMethod::AnalyticLowFriction);
        assert!((r.kappa - (-4.0f64).exp() / (2.0 * PI)).abs() < 1e-18);
    }

    #[test]
    fn paper_barrier_ratio() {
        let r = rate_full(&RateInputs::with_barrier_ratio(unit_features(1.0, 1.0), 1.0, 0.0, 26.40).unwrap());
        // (1/2π)e^{−26.40} = 5.450618794544e-13
        assert!((r.kappa - 5.450_618_794_544_017e-13).abs() / r.kappa < 1e-10);
    }

    #[test]
    fn smoluchowski_limit() {
        let (wb, d, du) = (1.0, 0.2, 1.0);
        let gamma = 1e4;
        let r = rate_full(&inputs(wb, gamma, d, du));
        let expected = wb / (2.0 * PI * gamma) * (-du / d).exp();
        assert!(((r.kappa - expected) / expected).abs() < 1e-7);
    }

    #[test]
    fn classical_zero_temperature() {
        let r = rate_full(&inputs(1.0, 0.5, 0.0, 1.0));
        assert_eq!(r.kappa, 0.0);
        assert_eq!(r.method, RateMethod::Arrhenius);
    }

    #[test]
    fn low_barrier_warns() {
        let r = rate_full(&inputs(1.0, 0.5, 0.5, 1.0));
        assert_eq!(r.warnings.len(), 1);
        assert!(rate_full(&inputs(1.0, 0.5, 0.2, 1.0)).warnings.is_empty());
    }

    #[test]
    fn paper_fit_values() {
        let r = rate_paper_fit(0.0, 5.06e-3, 6.68e-2, true);
        // 40-digit reference: 4.176930948689574
        assert!(((r.kappa - 4.176_930_948_689_574) / r.kappa).abs() < 1e-12);
        assert_eq!(rate_paper_fit(0.0, 5.06e-3, 6.68e-2, false).kappa, 0.0);
        let r = rate_paper_fit(300.0, 5.06e-3, 6.68e-2, true);
        assert!(((r.kappa - 9.310_718_542_016_268e10) / r.kappa).abs() < 1e-11);
    }

    #[test]
    fn json_report() {
        let r = rate_full(&inputs(1.0, 0.5, 0.2, 1.0));
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["method"], "analytic-full");
        assert!(v["diagnostics"]["alpha"].as_f64().unwrap() > 1.0);
    }

    #[test]
    fn rate_is_unit_invariant() {
        // Same physical well described in two unit systems.
        let hw = 5.06e-3;
        let bath = Bath::new(40.0, hw, 0.3, true).unwrap();
        let nat = ReducedUnits::natural_for_well(hw, 1e-10).unwrap();
        let alt = ReducedUnits::new(3.7 * hw, 0.4 * nat.time_scale(), 2.5e-10).unwrap();
        // γ is given in natural units, so hand it to the other system physically.
        let k_nat = {
            use crate::units::Dimension::*;
            let f = WellFeatures::from_parts(0.0, 1.0, 1.0, 1.6, nat.to_reduced(0.02, Energy));
            let i = RateInputs::from_bath(f, 1.0, &bath, &nat).unwrap();
            nat.to_physical(rate_full(&i).kappa, Rate)
        };
        let k_alt = {
            use crate::units::Dimension::*;
            let gamma = alt.to_reduced(nat.to_physical(bath.gamma(), Rate), Rate);
            let w = alt.to_reduced(hw / CONSTANTS.hbar, Frequency);
            let f = WellFeatures::from_parts(0.0, 1.0, w, 1.6 * w, alt.to_reduced(0.02, Energy));
            let i = RateInputs::new(f, 1.0, gamma, bath.diffusion_energy() / alt.energy_scale()).unwrap();
            alt.to_physical(rate_full(&i).kappa, Rate)
        };
        assert!(k_nat > 0.0);
        assert!(((k_nat - k_alt) / k_nat).abs() < 1e-12, "{k_nat} vs {k_alt}");
    }

    proptest! {
        #[test]
        fn alpha_identity(g in 0.0f64..100.0, wb in 1e-3f64..100.0) {
            let a = alpha_root(g, wb);
            prop_assert!(a - g > 0.0);
            prop_assert!(((a * (a - g) - wb * wb) / (wb * wb)).abs() < 1e-12 * (1.0 + g / wb).powi(2));
            prop_assert!(((alpha_minus_gamma(a, wb) * a - wb * wb) / (wb * wb)).abs() < 1e-14);
        }

        #[test]
        fn normalization_cancels(
            c in 1e-6f64..1e6, g in 0.01f64..10.0, wb in 0.1f64..5.0, d in 0.05f64..1.0,
        ) {
            let i = inputs(wb, g, d, 1.0);
            let k = rate_full(&i).kappa;
            let ratio = barrier_flux(&i, c).unwrap() / well_population(&i, c);
            prop_assert!(((ratio - k) / k).abs() < 1e-12);
        }

        #[test]
        fn boundary_layer_monotone(y1 in -5.0f64..5.0, dy in 0.0f64..3.0) {
            let i = inputs(1.2, 0.4, 0.3, 1.0);
            prop_assert!(boundary_layer_f(y1, &i).unwrap() <= boundary_layer_f(y1 + dy, &i).unwrap());
        }

        #[test]
        fn rate_monotonicity(t in 1.0f64..1000.0, dt in 0.1f64..100.0, du in 0.01f64..0.2) {
            let hw = 5.06e-3;
            let k1 = rate_paper_fit(t, hw, du, true).kappa;
            let k2 = rate_paper_fit(t + dt, hw, du, true).kappa;
            prop_assert!(k2 > k1 || k1 == 0.0 && k2 == 0.0);
            let k3 = rate_paper_fit(t, hw, du * 1.01, true).kappa;
            prop_assert!(k3 < k1 || k1 == 0.0);
            prop_assert!(k1 >= rate_paper_fit(t, hw, du, false).kappa);
        }
    }
}
