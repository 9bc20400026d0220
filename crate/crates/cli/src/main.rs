mod args;

use std::path::Path;
use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use args::{
    Cli, Command, CurveArgs, DcoeffArgs, DynamicsArgs, FitArgs, Format, FpeArgs, PotentialArgs, RateArgs, SimulateArgs,
    WellArgs,
};
use kramers_zpf::bath::{diffusion_energy, BathError};
use kramers_zpf::fit::{self, FitError, RateDataset};
use kramers_zpf::fokker_planck::{decay_rate, DecayOptions, FpeError, GridSpec};
use kramers_zpf::kramers::KramersError;
use kramers_zpf::langevin::{estimate_rate, FptStatistics, SimError, SimulationConfig};
use kramers_zpf::potential::{make_quartic, shape_interval, PotentialError};
use kramers_zpf::units::thermal_energy;
use kramers_zpf::{rate_full, rate_paper_fit, Bath, EscapeRateEstimate, Potential, RateInputs, WellFeatures};

const THREADS_ENV: &str = "KRAMERS_ZPF_THREADS";
const DEFAULT_HBAR_OMEGA_A: f64 = 5.06e-3;
const DEFAULT_DELTA_U: f64 = 6.68e-2;

#[derive(Debug)]
enum CliError {
    Usage(String),
    Module { kind: &'static str, message: String },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Module { .. } => 1,
        }
    }

    fn to_json(&self) -> String {
        let (kind, message) = match self {
            CliError::Usage(m) => ("usage", m.as_str()),
            CliError::Module { kind, message } => (*kind, message.as_str()),
        };
        serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
    }
}

macro_rules! module_error {
    ($($ty:ty => $kind:literal),* $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Module { kind: $kind, message: e.to_string() }
            }
        })*
    };
}

module_error!(
    PotentialError => "potential",
    BathError => "bath",
    KramersError => "kramers",
    SimError => "langevin",
    FpeError => "fokker_planck",
    FitError => "fit",
    std::io::Error => "io",
);

fn usage<T>(message: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(message.into()))
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        usage(format!("{name} must be finite and > 0 (got {v})"))
    }
}

fn non_negative(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        usage(format!("{name} must be finite and >= 0 (got {v})"))
    }
}

fn finite(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        usage(format!("{name} must be finite (got {v})"))
    }
}

fn required<T>(name: &str, v: Option<T>) -> Result<T, CliError> {
    match v {
        Some(v) => Ok(v),
        None => usage(format!("{name} is required")),
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<usize, CliError> {
    if v >= min {
        Ok(v)
    } else {
        usage(format!("{name} must be >= {min} (got {v})"))
    }
}

fn load_config(path: Option<&Path>) -> Result<Map<String, Value>, CliError> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {} is not valid JSON: {e}", path.display())))?;
    let Value::Object(map) = value else {
        return usage("config must be a JSON object");
    };
    let known: Vec<String> = Cli::command()
        .get_subcommands()
        .flat_map(|s| s.get_arguments().map(|a| a.get_id().to_string()).collect::<Vec<_>>())
        .chain(["potential".to_string(), "bath".to_string()])
        .collect();
    if let Some(key) = map.keys().find(|k| !known.contains(k)) {
        return usage(format!("unknown config key `{key}`"));
    }
    Ok(map)
}

/// Overlays the flags that were given onto the config object.
fn merge<T: Serialize + DeserializeOwned>(flags: &T, config: &Map<String, Value>) -> Result<T, CliError> {
    let mut merged = config.clone();
    if let Value::Object(f) = serde_json::to_value(flags).map_err(|e| CliError::Usage(e.to_string()))? {
        merged.extend(f);
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("config: {e}")))
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn pair(name: &str, v: &[f64]) -> Result<(f64, f64), CliError> {
    match v {
        [a, b] if a.is_finite() && b.is_finite() && a < b => Ok((*a, *b)),
        _ => usage(format!("{name} needs two finite values lo,hi with lo < hi (got {v:?})")),
    }
}

/// Potential and search interval.
fn well(w: &WellArgs) -> Result<(Potential, (f64, f64)), CliError> {
    let mass = w.mass.map(|m| positive("mass", m)).transpose()?;
    let (potential, fallback) = if let Some(c) = &w.coefficients {
        (Potential::new(c.clone(), mass.unwrap_or(1.0))?, None)
    } else if let Some(p) = &w.potential {
        let p = match mass {
            Some(m) => Potential::new(p.coefficients().to_vec(), m)?,
            None => p.clone(),
        };
        (p, None)
    } else {
        let shape = w.shape.clone().unwrap_or_else(|| vec![1.0, 1.0, 1.0 / 6.0]);
        let [wa, wb, du] = shape[..] else {
            return usage(format!("shape needs omega_a,omega_b,delta_u (got {shape:?})"));
        };
        let (wa, wb, du) = (positive("omega_a", wa)?, positive("omega_b", wb)?, positive("delta_u", du)?);
        let m = mass.unwrap_or(1.0);
        (make_quartic(wa, wb, du, m)?, Some(shape_interval(wa, wb, du, m)))
    };
    let interval = match (&w.search_interval, fallback) {
        (Some(v), _) => pair("search_interval", v)?,
        (None, Some(i)) => i,
        (None, None) => return usage("search_interval (--interval lo,hi) is required with explicit coefficients"),
    };
    Ok((potential, interval))
}

fn bath(d: &DynamicsArgs) -> Result<Option<Bath>, CliError> {
    let t = d.temperature_K.or(d.bath.map(|b| b.temperature()));
    let hw = d.hbar_omega_a_eV.or(d.bath.map(|b| b.hbar_omega_a()));
    let (Some(t), Some(hw)) = (t, hw) else {
        return Ok(None);
    };
    let gamma = d.gamma.or(d.bath.map(|b| b.gamma())).unwrap_or(0.0);
    let zp = d.zero_point.or(d.bath.map(|b| b.zero_point())).unwrap_or(true);
    Ok(Some(Bath::new(non_negative("temperature_K", t)?, positive("hbar_omega_a_eV", hw)?, gamma, zp)?))
}

/// γ and D in reduced units, with D(T) measured in units of ħω_a.
fn dynamics(d: &DynamicsArgs, features: &WellFeatures) -> Result<(f64, f64), CliError> {
    let bath = bath(d)?;
    let gamma = non_negative("gamma", required("gamma", d.gamma.or(d.bath.map(|b| b.gamma())))?)?;
    let diffusion = if let Some(v) = d.diffusion {
        positive("diffusion", v)?
    } else if let Some(r) = d.barrier_ratio {
        features.delta_u / positive("barrier_ratio", r)?
    } else if let Some(b) = bath {
        b.diffusion_energy() / b.hbar_omega_a()
    } else {
        return usage("one of diffusion, barrier_ratio or temperature_K with hbar_omega_a_eV is required");
    };
    Ok((gamma, diffusion))
}

struct Model {
    potential: Potential,
    interval: (f64, f64),
    inputs: RateInputs,
}

fn model(w: &WellArgs, d: &DynamicsArgs) -> Result<Model, CliError> {
    let (potential, interval) = well(w)?;
    let features = potential.analyze(interval.0, interval.1)?;
    let (gamma, diffusion) = dynamics(d, &features)?;
    let inputs = RateInputs::new(features, potential.mass(), gamma, diffusion)?;
    Ok(Model { potential, interval, inputs })
}

fn rate(a: RateArgs, format: Format) -> Result<String, CliError> {
    let est = if let Some(du) = a.delta_u_eV {
        let d = &a.dynamics;
        let t = non_negative("temperature_K", required("temperature_K", d.temperature_K)?)?;
        let hw = positive("hbar_omega_a_eV", required("hbar_omega_a_eV", d.hbar_omega_a_eV)?)?;
        rate_paper_fit(t, hw, positive("delta_u_eV", du)?, d.zero_point.unwrap_or(true))
    } else {
        rate_full(&model(&a.well, &a.dynamics)?.inputs)
    };
    Ok(match format {
        Format::Json => pretty(&est),
        Format::Csv => format!("method,kappa,uncertainty\n{},{},{}\n", est.method, est.kappa, est.uncertainty),
    })
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct DcoeffReport {
    temperature_K: f64,
    hbar_omega_a_eV: f64,
    zero_point: bool,
    diffusion_eV: f64,
    thermal_energy_eV: f64,
}

fn dcoeff(a: DcoeffArgs, format: Format) -> Result<String, CliError> {
    let t = non_negative("temperature_K", required("temperature_K", a.temperature_K)?)?;
    let hw = positive("hbar_omega_a_eV", required("hbar_omega_a_eV", a.hbar_omega_a_eV)?)?;
    let zp = a.zero_point.unwrap_or(true);
    let r = DcoeffReport {
        temperature_K: t,
        hbar_omega_a_eV: hw,
        zero_point: zp,
        diffusion_eV: diffusion_energy(t, hw, zp),
        thermal_energy_eV: thermal_energy(t),
    };
    Ok(match format {
        Format::Json => pretty(&r),
        Format::Csv => format!(
            "temperature_K,hbar_omega_a_eV,zero_point,diffusion_eV,thermal_energy_eV\n{},{},{},{},{}\n",
            r.temperature_K, r.hbar_omega_a_eV, r.zero_point, r.diffusion_eV, r.thermal_energy_eV
        ),
    })
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    estimate: EscapeRateEstimate,
    analytic: EscapeRateEstimate,
    config: &'a SimulationConfig,
    statistics: &'a FptStatistics,
}

fn simulate(a: SimulateArgs, format: Format) -> Result<String, CliError> {
    let m = model(&a.well, &a.dynamics)?;
    let mut cfg = SimulationConfig::new(m.potential, m.interval, m.inputs.gamma, m.inputs.diffusion)?;
    if let Some(v) = a.dt {
        cfg.dt = positive("dt", v)?;
    }
    if let Some(v) = a.absorb_at {
        cfg.absorb_at = finite("absorb_at", v)?;
    }
    if let Some(v) = a.max_time {
        cfg.max_time = positive("max_time", v)?;
    }
    if let Some(v) = a.n_trajectories {
        cfg.n_trajectories = at_least("n_trajectories", v, 1)?;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = &a.initial_condition {
        cfg.initial_condition = serde_json::from_value(Value::String(v.clone())).map_err(|_| {
            CliError::Usage(format!("initial_condition must be well-thermal or well-bottom-rest (got {v})"))
        })?;
    }
    if let Some(v) = a.noise_substeps {
        cfg.noise_substeps = at_least("noise_substeps", v as usize, 1)? as u32;
    }
    if let Some(v) = a.histogram_bins {
        cfg.histogram_bins = at_least("histogram_bins", v, 1)?;
    }
    cfg.validate()?;
    let stats = estimate_rate(&cfg)?;
    Ok(match format {
        Format::Json => pretty(&SimulateReport {
            estimate: stats.to_estimate(),
            analytic: rate_full(&m.inputs),
            config: &cfg,
            statistics: &stats,
        }),
        Format::Csv => stats.histogram.to_csv(),
    })
}

#[derive(Serialize)]
struct FpeReport<'a> {
    estimate: EscapeRateEstimate,
    analytic: EscapeRateEstimate,
    grid: &'a GridSpec,
    dt: f64,
    fit_window: (f64, f64),
    residual: f64,
    flux_ratio: f64,
    bookkeeping_drift: f64,
    warnings: &'a [String],
}

fn fpe(a: FpeArgs, format: Format) -> Result<String, CliError> {
    let m = model(&a.well, &a.dynamics)?;
    let mut spec = GridSpec::default_for(&m.inputs);
    if let Some(v) = a.nx {
        spec.nx = at_least("nx", v, 4)?;
    }
    if let Some(v) = a.np {
        spec.np = at_least("np", v, 4)?;
    }
    if let Some(v) = a.x_min {
        spec.x_min = finite("x_min", v)?;
    }
    if let Some(v) = a.x_max {
        spec.x_max = finite("x_max", v)?;
    }
    if let Some(v) = a.p_max {
        spec.p_max = positive("p_max", v)?;
    }
    let mut options = DecayOptions::default();
    options.dt = a.dt.map(|v| positive("dt", v)).transpose()?;
    if let Some(v) = a.horizon {
        options.horizon = positive("horizon", v)?;
    }
    options.fit_start = a.fit_start.map(|v| non_negative("fit_start", v)).transpose()?;
    if let Some(v) = a.sample_interval {
        options.sample_interval = positive("sample_interval", v)?;
    }
    let r = decay_rate(&m.potential, &m.inputs, &spec, &options)?;
    Ok(match format {
        Format::Json => pretty(&FpeReport {
            estimate: r.to_estimate(&m.inputs),
            analytic: rate_full(&m.inputs),
            grid: &r.grid,
            dt: r.dt,
            fit_window: r.fit_window,
            residual: r.residual,
            flux_ratio: r.flux_ratio,
            bookkeeping_drift: r.bookkeeping_drift,
            warnings: &r.warnings,
        }),
        Format::Csv => r.series_csv(),
    })
}

fn fit_data(a: FitArgs, format: Format) -> Result<String, CliError> {
    let path = required("data", a.data)?;
    let file = std::fs::File::open(&path)?;
    let data = RateDataset::from_csv(file, path.display().to_string())?;
    let zp = a.zero_point.unwrap_or(true);
    let initial = match a.initial_guess.as_deref() {
        None => None,
        Some([hw, du]) => Some((positive("initial hbar_omega_a_eV", *hw)?, positive("initial delta_u_eV", *du)?)),
        Some(v) => return usage(format!("initial_guess needs hbar_omega_a_eV,delta_u_eV (got {v:?})")),
    };
    let result = fit::fit_rate_curve(&data, initial, zp)?;
    Ok(match format {
        Format::Json => pretty(&result),
        Format::Csv => {
            let n = at_least("points", a.points.unwrap_or(100), 2)?;
            let lo = data.points.iter().map(|p| p.temperature).fold(f64::INFINITY, f64::min);
            let hi = data.points.iter().map(|p| p.temperature).fold(f64::NEG_INFINITY, f64::max);
            let temps = fit::linspace(lo, hi, n);
            fit::curve_csv(&fit::predict_curve((result.hbar_omega_a, result.delta_u), &temps, zp))
        }
    })
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct CurvePoint {
    temperature_K: f64,
    kappa_per_s: f64,
}

fn curve(a: CurveArgs, format: Format) -> Result<String, CliError> {
    let t_min = non_negative("t_min", a.t_min.unwrap_or(0.0))?;
    let t_max = positive("t_max", a.t_max.unwrap_or(400.0))?;
    if t_max <= t_min {
        return usage(format!("t_max must exceed t_min (got {t_min}, {t_max})"));
    }
    let n = at_least("points", a.points.unwrap_or(101), 2)?;
    let params = (
        positive("hbar_omega_a_eV", a.hbar_omega_a_eV.unwrap_or(DEFAULT_HBAR_OMEGA_A))?,
        positive("delta_u_eV", a.delta_u_eV.unwrap_or(DEFAULT_DELTA_U))?,
    );
    let temps = fit::linspace(t_min, t_max, n);
    if a.compare_arrhenius.unwrap_or(false) {
        let rows = fit::comparison_curve(params, &temps);
        return Ok(match format {
            Format::Json => pretty(&rows),
            Format::Csv => fit::comparison_csv(&rows),
        });
    }
    let pts = fit::predict_curve(params, &temps, a.zero_point.unwrap_or(true));
    Ok(match format {
        Format::Json => {
            pretty(&pts.iter().map(|&(t, k)| CurvePoint { temperature_K: t, kappa_per_s: k }).collect::<Vec<_>>())
        }
        Format::Csv => fit::curve_csv(&pts),
    })
}

#[derive(Serialize)]
struct PotentialReport<'a> {
    potential: &'a Potential,
    search_interval: (f64, f64),
    features: WellFeatures,
    frequency_ratio: f64,
    absorbing_point: f64,
}

fn potential_info(a: PotentialArgs, format: Format) -> Result<String, CliError> {
    let (potential, interval) = well(&a.well)?;
    let features = potential.analyze(interval.0, interval.1)?;
    Ok(match format {
        Format::Json => pretty(&PotentialReport {
            potential: &potential,
            search_interval: interval,
            features,
            frequency_ratio: features.frequency_ratio(),
            absorbing_point: features.default_absorbing_point(),
        }),
        Format::Csv => {
            let n = at_least("points", a.points.unwrap_or(201), 2)?;
            let mut out = String::from("x,U,dU_dx\n");
            for x in fit::linspace(interval.0, interval.1, n) {
                let (u, du) = potential.evaluate(x);
                out.push_str(&format!("{x},{u},{du}\n"));
            }
            out
        }
    })
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize =
        raw.trim().parse().map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a count (got {raw})")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("{THREADS_ENV}: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let config = load_config(cli.config.as_deref())?;
    let format = |default| cli.format.unwrap_or(default);
    let text = match &cli.command {
        Command::Rate(a) => rate(merge(a, &config)?, format(Format::Json))?,
        Command::Dcoeff(a) => dcoeff(merge(a, &config)?, format(Format::Json))?,
        Command::Simulate(a) => simulate(merge(a, &config)?, format(Format::Json))?,
        Command::Fpe(a) => fpe(merge(a, &config)?, format(Format::Json))?,
        Command::Fit(a) => fit_data(merge(a, &config)?, format(Format::Json))?,
        Command::Curve(a) => curve(merge(a, &config)?, format(Format::Csv))?,
        Command::PotentialInfo(a) => potential_info(merge(a, &config)?, format(Format::Json))?,
    };
    match &cli.output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let err = CliError::Usage(text.trim().trim_start_matches("error: ").to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
