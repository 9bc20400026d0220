//! Least-squares recovery of (ħω_a, ΔU) from measured κ(T) tables.
//!
//! The model is ln κ = ln(ω_a/2π) − ΔU/D(T) with ω_a = ħω_a/ħ, fitted in log
//! space over θ = (ln ħω_a, ln ΔU) by damped Gauss–Newton.

use std::f64::consts::PI;
use std::io::Read;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bath::{diffusion_energy, diffusion_energy_dquantum};
use crate::kramers::rate_paper_fit;
use crate::units::CONSTANTS;

pub const MAX_ITERATIONS: usize = 500;
pub const GRADIENT_TOLERANCE: f64 = 1e-10;
const MAX_DAMPING: f64 = 1e16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("unidentifiable: temperatures must vary")]
    Unidentifiable,
    #[error("initial guess must be positive and finite (got {0}, {1})")]
    InvalidGuess(f64, f64),
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    #[serde(rename = "temperature_K")]
    pub temperature: f64,
    #[serde(rename = "kappa_per_s")]
    pub kappa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

impl RatePoint {
    pub fn new(temperature: f64, kappa: f64) -> Self {
        RatePoint { temperature, kappa, weight: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateDataset {
    pub points: Vec<RatePoint>,
    pub label: String,
}

impl RateDataset {
    pub fn new(points: Vec<RatePoint>, label: impl Into<String>) -> Result<Self, FitError> {
        let ds = RateDataset { points, label: label.into() };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<(), FitError> {
        if self.points.len() < 3 {
            return Err(FitError::TooFewPoints(self.points.len()));
        }
        for (i, p) in self.points.iter().enumerate() {
            if !(p.temperature.is_finite() && p.temperature > 0.0) {
                return Err(FitError::InvalidData(format!(
                    "point {i}: temperature must be > 0 (got {})",
                    p.temperature
                )));
            }
            if !(p.kappa.is_finite() && p.kappa > 0.0) {
                return Err(FitError::InvalidData(format!("point {i}: kappa must be > 0 (got {})", p.kappa)));
            }
            if let Some(w) = p.weight {
                if !(w.is_finite() && w > 0.0) {
                    return Err(FitError::InvalidData(format!("point {i}: weight must be > 0 (got {w})")));
                }
            }
        }
        Ok(())
    }

    /// Reads `temperature_K,kappa_per_s[,weight]` CSV.
    pub fn from_csv<R: Read>(reader: R, label: impl Into<String>) -> Result<Self, FitError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let points =
            rdr.deserialize().collect::<Result<Vec<RatePoint>, _>>().map_err(|e| FitError::Csv(e.to_string()))?;
        Self::new(points, label)
    }

    pub fn to_csv(&self) -> String {
        let weighted = self.points.iter().any(|p| p.weight.is_some());
        let mut out =
            String::from(if weighted { "temperature_K,kappa_per_s,weight\n" } else { "temperature_K,kappa_per_s\n" });
        for p in &self.points {
            if weighted {
                out.push_str(&format!("{},{},{}\n", p.temperature, p.kappa, p.weight.unwrap_or(1.0)));
            } else {
                out.push_str(&format!("{},{}\n", p.temperature, p.kappa));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(rename = "hbar_omega_a_eV")]
    pub hbar_omega_a: f64,
    #[serde(rename = "delta_u_eV")]
    pub delta_u: f64,
    pub zero_point: bool,
    /// Covariance of (ln ħω_a, ln ΔU).
    pub covariance: [[f64; 2]; 2],
    pub rms_log_residual: f64,
    /// ln κ_model − ln κ_data, in input order.
    pub per_point_residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    /// Weighted sum of squared log residuals after each accepted step.
    #[serde(skip)]
    pub objective_history: Vec<f64>,
}

impl FitResult {
    /// One-sigma relative uncertainties of (ħω_a, ΔU).
    pub fn relative_uncertainty(&self) -> (f64, f64) {
        (self.covariance[0][0].sqrt(), self.covariance[1][1].sqrt())
    }
}

/// ln κ at temperature `t` and its gradient with respect to θ.
fn model(t: f64, hw: f64, du: f64, zero_point: bool) -> (f64, [f64; 2]) {
    let d = diffusion_energy(t, hw, zero_point);
    let ln_k = (hw / (2.0 * PI * CONSTANTS.hbar)).ln() - du / d;
    let d_hw = if zero_point { 1.0 + du * hw * diffusion_energy_dquantum(t, hw) / (d * d) } else { 1.0 };
    (ln_k, [d_hw, -du / d])
}

struct Problem {
    temps: Vec<f64>,
    ln_k: Vec<f64>,
    sqrt_w: Vec<f64>,
    zero_point: bool,
}

impl Problem {
    /// Objective, gradient Jᵀr and normal matrix JᵀJ at θ.
    fn linearize(&self, theta: [f64; 2]) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let (hw, du) = (theta[0].exp(), theta[1].exp());
        let mut s = 0.0;
        let mut g = [0.0; 2];
        let mut h = [[0.0; 2]; 2];
        for i in 0..self.temps.len() {
            let (m, grad) = model(self.temps[i], hw, du, self.zero_point);
            let r = self.sqrt_w[i] * (m - self.ln_k[i]);
            let j = [self.sqrt_w[i] * grad[0], self.sqrt_w[i] * grad[1]];
            s += r * r;
            for a in 0..2 {
                g[a] += j[a] * r;
                for b in 0..2 {
                    h[a][b] += j[a] * j[b];
                }
            }
        }
        (s, g, h)
    }

    fn objective(&self, theta: [f64; 2]) -> f64 {
        let (hw, du) = (theta[0].exp(), theta[1].exp());
        (0..self.temps.len())
            .map(|i| {
                let r = self.sqrt_w[i] * (model(self.temps[i], hw, du, self.zero_point).0 - self.ln_k[i]);
                r * r
            })
            .sum()
    }
}

fn solve2(a: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if !(det.is_finite() && det.abs() > 0.0) {
        return None;
    }
    Some([(a[1][1] * b[0] - a[0][1] * b[1]) / det, (a[0][0] * b[1] - a[1][0] * b[0]) / det])
}

fn invert2(a: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if !(det.is_finite() && det.abs() > 0.0) {
        return None;
    }
    Some([[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]])
}

/// Data-driven starting point. ΔU comes from the Arrhenius slope of the
/// hotter half of the data; ħω_a from the coldest point when it sits well
/// above that Arrhenius line (a zero-point plateau), else from the intercept.
pub fn initial_guess(data: &RateDataset, zero_point: bool) -> Result<(f64, f64), FitError> {
    data.validate()?;
    let mut pts: Vec<(f64, f64)> = data.points.iter().map(|p| (p.temperature, p.kappa.ln())).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.first().map(|p| p.0) == pts.last().map(|p| p.0) {
        return Err(FitError::Unidentifiable);
    }
    // ln κ against β = 1/k_BT over the hotter half (at least two distinct T).
    let mut start = pts.len() / 2;
    while start > 0 && pts[start].0 == pts[pts.len() - 1].0 {
        start -= 1;
    }
    let hot: Vec<(f64, f64)> = pts[start..].iter().map(|&(t, y)| (1.0 / (CONSTANTS.k_b * t), y)).collect();
    let n = hot.len() as f64;
    let bm = hot.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = hot.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = hot.iter().map(|p| (p.0 - bm) * (p.1 - ym)).sum();
    let sxx: f64 = hot.iter().map(|p| (p.0 - bm).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * bm;
    let du = if slope < 0.0 { -slope } else { 0.1 };
    let from_intercept = 2.0 * PI * CONSTANTS.hbar * intercept.exp();

    let (t0, y0) = pts[0];
    let arrhenius_at_t0 = intercept - du / (CONSTANTS.k_b * t0);
    let hw = if zero_point && y0 - arrhenius_at_t0 > 1.0 {
        // Solve ln(ħω/2πħ) − 2ΔU/ħω = ln κ(T_min); the left side increases with ħω.
        let f = |hw: f64| (hw / (2.0 * PI * CONSTANTS.hbar)).ln() - 2.0 * du / hw - y0;
        let (mut lo, mut hi) = (1e-12, 1e3);
        if f(lo) < 0.0 && f(hi) > 0.0 {
            for _ in 0..200 {
                let mid = (lo * hi).sqrt();
                if f(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (lo * hi).sqrt()
        } else {
            from_intercept
        }
    } else {
        from_intercept
    };
    let hw = if hw.is_finite() && hw > 0.0 { hw } else { 1e-2 };
    Ok((hw, du))
}

/// Minimise Σ w_i (ln κ_model(T_i) − ln κ_i)² over (ln ħω_a, ln ΔU).
pub fn fit_rate_curve(
    data: &RateDataset,
    initial: Option<(f64, f64)>,
    zero_point: bool,
) -> Result<FitResult, FitError> {
    data.validate()?;
    let first_t = data.points[0].temperature;
    if data.points.iter().all(|p| p.temperature == first_t) {
        return Err(FitError::Unidentifiable);
    }
    let (hw0, du0) = match initial {
        Some(g) => g,
        None => initial_guess(data, zero_point)?,
    };
    if !(hw0.is_finite() && hw0 > 0.0 && du0.is_finite() && du0 > 0.0) {
        return Err(FitError::InvalidGuess(hw0, du0));
    }

    // Sorted by temperature.
    let mut order: Vec<usize> = (0..data.points.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&data.points[a], &data.points[b]);
        pa.temperature.total_cmp(&pb.temperature).then(pa.kappa.total_cmp(&pb.kappa))
    });
    let problem = Problem {
        temps: order.iter().map(|&i| data.points[i].temperature).collect(),
        ln_k: order.iter().map(|&i| data.points[i].kappa.ln()).collect(),
        sqrt_w: order.iter().map(|&i| data.points[i].weight.unwrap_or(1.0).sqrt()).collect(),
        zero_point,
    };

    let mut theta = [hw0.ln(), du0.ln()];
    let (mut s, mut g, mut h) = problem.linearize(theta);
    let mut history = vec![s];
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut stalled = false;
    while iterations < MAX_ITERATIONS {
        if (g[0] * g[0] + g[1] * g[1]).sqrt() < GRADIENT_TOLERANCE {
            break;
        }
        iterations += 1;
        let mut accepted = false;
        while lambda <= MAX_DAMPING {
            let a = [[h[0][0] * (1.0 + lambda), h[0][1]], [h[1][0], h[1][1] * (1.0 + lambda)]];
            let Some(delta) = solve2(a, [-g[0], -g[1]]) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [theta[0] + delta[0], theta[1] + delta[1]];
            let st = problem.objective(trial);
            if st.is_finite() && st < s {
                theta = trial;
                (s, g, h) = problem.linearize(theta);
                history.push(s);
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            stalled = true;
            break;
        }
    }
    let gnorm = (g[0] * g[0] + g[1] * g[1]).sqrt();
    // A stall means no representable step lowers the objective any further.
    let converged = gnorm < GRADIENT_TOLERANCE || stalled;

    let n = problem.temps.len();
    let s2 = s / (n as f64 - 2.0);
    let cov =
        invert2(h).map(|c| [[s2 * c[0][0], s2 * c[0][1]], [s2 * c[1][0], s2 * c[1][1]]]).unwrap_or([[f64::NAN; 2]; 2]);

    let (hw, du) = (theta[0].exp(), theta[1].exp());
    let residuals: Vec<f64> =
        data.points.iter().map(|p| model(p.temperature, hw, du, zero_point).0 - p.kappa.ln()).collect();
    let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt();
    Ok(FitResult {
        hbar_omega_a: hw,
        delta_u: du,
        zero_point,
        covariance: cov,
        rms_log_residual: rms,
        per_point_residuals: residuals,
        iterations,
        converged,
        gradient_norm: gnorm,
        objective_history: history,
    })
}

/// κ(T) in s⁻¹ at each temperature.
pub fn predict_curve(params: (f64, f64), temperatures: &[f64], zero_point: bool) -> Vec<(f64, f64)> {
    temperatures.iter().map(|&t| (t, rate_paper_fit(t, params.0, params.1, zero_point).kappa)).collect()
}

/// CSV with header `temperature_K,kappa_per_s`.
pub fn curve_csv(curve: &[(f64, f64)]) -> String {
    let mut out = String::from("temperature_K,kappa_per_s\n");
    for (t, k) in curve {
        out.push_str(&format!("{t},{k}\n"));
    }
    out
}

/// Zero-point and Arrhenius rates side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    #[serde(rename = "temperature_K")]
    pub temperature: f64,
    pub kappa_zp: f64,
    pub kappa_arrhenius: f64,
}

pub fn comparison_curve(params: (f64, f64), temperatures: &[f64]) -> Vec<ComparisonRow> {
    temperatures
        .iter()
        .map(|&t| ComparisonRow {
            temperature: t,
            kappa_zp: rate_paper_fit(t, params.0, params.1, true).kappa,
            kappa_arrhenius: rate_paper_fit(t, params.0, params.1, false).kappa,
        })
        .collect()
}

/// CSV with header `temperature_K,kappa_zp,kappa_arrhenius`.
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("temperature_K,kappa_zp,kappa_arrhenius\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.temperature, r.kappa_zp, r.kappa_arrhenius));
    }
    out
}

/// `n` temperatures evenly spaced on [t_min, t_max].
pub fn linspace(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![t_min],
        _ => (0..n).map(|i| t_min + (t_max - t_min) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Model data with multiplicative lognormal noise: ln κ_i ← ln κ_i + σ·z_i.
pub fn synthetic_dataset(
    params: (f64, f64),
    temperatures: &[f64],
    zero_point: bool,
    log_sigma: f64,
    seed: u64,
) -> Result<RateDataset, FitError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = predict_curve(params, temperatures, zero_point)
        .into_iter()
        .map(|(t, k)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            RatePoint::new(t, k * (log_sigma * z).exp())
        })
        .collect();
    RateDataset::new(points, format!("synthetic hw={} dU={} sigma={log_sigma} seed={seed}", params.0, params.1))
}
