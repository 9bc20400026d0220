//! WebAssembly bindings behind `www/index.html`. Every export returns flat
//! `Float64Array`s.

use kramers_zpf::fit::{comparison_curve, linspace};
use kramers_zpf::langevin::{estimate_rate, SimulationConfig};
use kramers_zpf::potential::{make_quartic, shape_interval};
use kramers_zpf::{rate_full, RateInputs};
use wasm_bindgen::prelude::*;

/// Largest trajectory count accepted by [`fpt_histogram`].
pub const MAX_TRAJECTORIES: usize = 20_000;

/// Rows of (T, κ_zp, κ_arrhenius) flattened, T in K and κ in s⁻¹.
pub fn rate_curve_rows(
    hbar_omega_a_ev: f64,
    delta_u_ev: f64,
    t_min: f64,
    t_max: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    if !(hbar_omega_a_ev > 0.0 && delta_u_ev > 0.0) {
        return Err("energies must be positive".into());
    }
    if !(t_min >= 0.0 && t_max > t_min && points >= 2) {
        return Err("need 0 <= t_min < t_max and at least 2 points".into());
    }
    let rows = comparison_curve((hbar_omega_a_ev, delta_u_ev), &linspace(t_min, t_max, points));
    Ok(rows.iter().flat_map(|r| [r.temperature, r.kappa_zp, r.kappa_arrhenius]).collect())
}

/// Pairs (x, U) flattened over the search interval of the quartic with unit
/// mass.
pub fn profile_rows(omega_a: f64, omega_b: f64, delta_u: f64, points: usize) -> Result<Vec<f64>, String> {
    let p = make_quartic(omega_a, omega_b, delta_u, 1.0).map_err(|e| e.to_string())?;
    let (lo, hi) = shape_interval(omega_a, omega_b, delta_u, 1.0);
    Ok(linspace(lo, hi, points.max(2)).into_iter().flat_map(|x| [x, p.value(x)]).collect())
}

/// [x_a, x_b, ω_a, ω_b, ΔU, x_c] for the quartic with unit mass.
pub fn features_of(omega_a: f64, omega_b: f64, delta_u: f64) -> Result<Vec<f64>, String> {
    let p = make_quartic(omega_a, omega_b, delta_u, 1.0).map_err(|e| e.to_string())?;
    let (lo, hi) = shape_interval(omega_a, omega_b, delta_u, 1.0);
    let f = p.analyze(lo, hi).map_err(|e| e.to_string())?;
    Ok(vec![f.x_a, f.x_b, f.omega_a, f.omega_b, f.delta_u, f.default_absorbing_point()])
}

/// [κ_MC, standard error, κ_analytic, n_escaped, n_censored] followed by
/// (bin_left, bin_right, count) triples, for the cubic with ω_a = ω_b = 1,
/// ΔU = 1/6 at the given ΔU/D.
pub fn histogram_rows(
    barrier_ratio: f64,
    gamma: f64,
    n_trajectories: usize,
    seed: u64,
    bins: usize,
) -> Result<Vec<f64>, String> {
    if !(1.0..=8.0).contains(&barrier_ratio) {
        return Err("barrier ratio must lie in [1, 8] for an interactive run".into());
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err("gamma must be positive".into());
    }
    if n_trajectories == 0 || n_trajectories > MAX_TRAJECTORIES || bins == 0 {
        return Err(format!("need 1..={MAX_TRAJECTORIES} trajectories and at least one bin"));
    }
    let p = make_quartic(1.0, 1.0, 1.0 / 6.0, 1.0).map_err(|e| e.to_string())?;
    let interval = shape_interval(1.0, 1.0, 1.0 / 6.0, 1.0);
    let f = p.analyze(interval.0, interval.1).map_err(|e| e.to_string())?;
    let inputs = RateInputs::with_barrier_ratio(f, 1.0, gamma, barrier_ratio).map_err(|e| e.to_string())?;
    let analytic = rate_full(&inputs).kappa;
    let mut cfg = SimulationConfig::new(p, interval, gamma, inputs.diffusion).map_err(|e| e.to_string())?;
    cfg.n_trajectories = n_trajectories;
    cfg.seed = seed;
    cfg.histogram_bins = bins;
    cfg.max_time = 30.0 / analytic;
    let s = estimate_rate(&cfg).map_err(|e| e.to_string())?;
    let mut out = vec![s.kappa, s.kappa_stderr, analytic, s.n_escaped as f64, s.n_censored as f64];
    for (i, &c) in s.histogram.counts.iter().enumerate() {
        out.extend([s.histogram.edges[i], s.histogram.edges[i + 1], c as f64]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn rate_curve(
    hbar_omega_a_ev: f64,
    delta_u_ev: f64,
    t_min: f64,
    t_max: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    rate_curve_rows(hbar_omega_a_ev, delta_u_ev, t_min, t_max, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn potential_profile(omega_a: f64, omega_b: f64, delta_u: f64, points: usize) -> Result<Vec<f64>, JsError> {
    profile_rows(omega_a, omega_b, delta_u, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn well_features(omega_a: f64, omega_b: f64, delta_u: f64) -> Result<Vec<f64>, JsError> {
    features_of(omega_a, omega_b, delta_u).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn fpt_histogram(
    barrier_ratio: f64,
    gamma: f64,
    n_trajectories: usize,
    seed: u64,
    bins: usize,
) -> Result<Vec<f64>, JsError> {
    histogram_rows(barrier_ratio, gamma, n_trajectories, seed, bins).map_err(|e| JsError::new(&e))
}
