//! Flag sets. Every field doubles as a key of the `--config` JSON object, so
//! the two sources merge by key before a command runs.
#![allow(non_snake_case)]

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kramers_zpf::{Bath, Potential};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(
    name = "kramers-zpf",
    version,
    about = "Escape rates from metastable wells driven by thermal and zero-point noise"
)]
pub struct Cli {
    /// JSON object whose keys mirror the flag names (snake_case); flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output format; each subcommand has its own default.
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// Write the artifact here instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Escape rate: (ω_a/2π)exp(−ΔU/D) from eV parameters, or the full
    /// Kramers rate of a reduced-unit well.
    #[command(allow_negative_numbers = true)]
    Rate(RateArgs),
    /// Effective diffusion energy D(T) in eV.
    #[command(allow_negative_numbers = true)]
    Dcoeff(DcoeffArgs),
    /// Langevin first-passage Monte Carlo.
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// Phase-space Fokker–Planck decay rate.
    #[command(allow_negative_numbers = true)]
    Fpe(FpeArgs),
    /// Fit (ħω_a, ΔU) to a temperature_K,kappa_per_s table.
    #[command(allow_negative_numbers = true)]
    Fit(FitArgs),
    /// κ(T) table, optionally next to the Arrhenius curve.
    #[command(allow_negative_numbers = true)]
    Curve(CurveArgs),
    /// Well and barrier features of a potential, or its profile as CSV.
    #[command(allow_negative_numbers = true)]
    PotentialInfo(PotentialArgs),
}

/// The potential in reduced units. Precedence: coefficients, then a
/// `potential` object from the config, then shape. With none of them the
/// cubic with ω_a = ω_b = 1, ΔU = 1/6, m = 1 is used.
#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default)]
pub struct WellArgs {
    /// Coefficients c0,c1,... of U(x) = Σ c_k x^k.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    /// Particle mass.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    /// Interval lo,hi searched for the well bottom and barrier top.
    #[arg(long = "interval", value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search_interval: Option<Vec<f64>>,
    /// Quartic with the given omega_a,omega_b,delta_u (a cubic when the
    /// frequencies match).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape: Option<Vec<f64>>,
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<Potential>,
}

/// Friction and noise strength in reduced units. D comes from `diffusion`,
/// else from `barrier_ratio` (D = ΔU/ratio), else from a bath, where D(T)
/// is measured in units of ħω_a.
#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default)]
pub struct DynamicsArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barrier_ratio: Option<f64>,
    #[arg(long = "temperature-K")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature_K: Option<f64>,
    #[arg(long = "hbar-omega-a-eV")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hbar_omega_a_eV: Option<f64>,
    /// Use D(T) with zero-point noise (default) or k_BT with `false`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_point: Option<bool>,
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bath: Option<Bath>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default)]
pub struct RateArgs {
    /// Barrier height in eV; selects the (ω_a/2π)exp(−ΔU/D) form.
    #[arg(long = "delta-u-eV")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_u_eV: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub dynamics: DynamicsArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub well: WellArgs,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default)]
pub struct DcoeffArgs {
    #[arg(long = "temperature-K")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature_K: Option<f64>,
    #[arg(long = "hbar-omega-a-eV")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hbar_omega_a_eV: Option<f64>,
    /// Use D(T) with zero-point noise (default) or k_BT with `false`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_point: Option<bool>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub well: WellArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub dynamics: DynamicsArgs,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Escape is recorded on first arrival here.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub absorb_at: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_time: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_trajectories: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// well-thermal or well-bottom-rest.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_condition: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_substeps: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub histogram_bins: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default)]
pub struct FpeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub well: WellArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub dynamics: DynamicsArgs,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub np: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    /// Defaults to the stability bound.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Simulated time; defaults to 30.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_start: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_interval: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default)]
pub struct FitArgs {
    /// CSV with header temperature_K,kappa_per_s[,weight].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// Fit D(T) (default) or the Arrhenius form with `false`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_point: Option<bool>,
    /// Starting point hbar_omega_a_eV,delta_u_eV.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_guess: Option<Vec<f64>>,
    /// Samples of the fitted curve in CSV output.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default)]
pub struct CurveArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// Defaults to 5.06e-3.
    #[arg(long = "hbar-omega-a-eV")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hbar_omega_a_eV: Option<f64>,
    /// Defaults to 6.68e-2.
    #[arg(long = "delta-u-eV")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_u_eV: Option<f64>,
    /// Add the kappa_arrhenius column.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare_arrhenius: Option<bool>,
    /// Single curve with D(T) (default) or k_BT with `false`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_point: Option<bool>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default)]
pub struct PotentialArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub well: WellArgs,
    /// Samples of the CSV profile.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}
