//! Underdamped Langevin trajectories and first-passage-time rate estimates.
//!
//! The dynamics are m·ẍ = −mγẋ − U'(x) + F(t) with white noise whose momentum
//! diffusion is mγD, so the stationary well distribution is
//! exp[−(p²/2m + U)/D]. Integration uses the BAOAB splitting: half kick, half
//! drift, exact Ornstein–Uhlenbeck momentum update, half drift, half kick.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bath::Bath;
use crate::kramers::{EscapeRateEstimate, RateMethod, LOW_BARRIER_RATIO};
use crate::potential::{Potential, PotentialError, WellFeatures};
use crate::units::ReducedUnits;

/// Time step bound, dt ≤ DT_BOUND / max(ω_a, ω_b, γ).
pub const DT_BOUND: f64 = 0.05;
/// Censored fraction above which the estimate is flagged as biased.
pub const CENSORED_FRACTION_LIMIT: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("trajectory diverged at t = {time}")]
    Diverged { time: f64 },
    #[error("no escapes observed; raise max_time or lower barrier")]
    NoEscapes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialCondition {
    WellBottomRest,
    WellThermal,
}

/// Phase-space point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub x: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub potential: Potential,
    /// Interval handed to [`Potential::analyze`].
    pub search_interval: (f64, f64),
    pub gamma: f64,
    /// D(T) in reduced energy units.
    pub diffusion: f64,
    pub dt: f64,
    pub absorb_at: f64,
    pub max_time: f64,
    pub n_trajectories: usize,
    pub seed: u64,
    pub initial_condition: InitialCondition,
    /// Each step consumes this many normal draws and uses their normalized
    /// sum. Lets a run at `dt` share its noise path with a run at `dt/k`.
    #[serde(default = "one")]
    pub noise_substeps: u32,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    #[serde(skip)]
    features: Option<WellFeatures>,
}

fn one() -> u32 {
    1
}

fn default_bins() -> usize {
    40
}

impl SimulationConfig {
    /// Config with defaults: dt at the stability bound, absorbing point
    /// x_b + 2(x_b − x_a), thermal initial condition.
    pub fn new(
        potential: Potential,
        search_interval: (f64, f64),
        gamma: f64,
        diffusion: f64,
    ) -> Result<Self, SimError> {
        let features = potential.analyze(search_interval.0, search_interval.1)?;
        let fastest = features.omega_a.max(features.omega_b).max(gamma);
        let cfg = SimulationConfig {
            potential,
            search_interval,
            gamma,
            diffusion,
            dt: DT_BOUND / fastest,
            absorb_at: features.default_absorbing_point(),
            max_time: 1e7,
            n_trajectories: 1000,
            seed: 0,
            initial_condition: InitialCondition::WellThermal,
            noise_substeps: 1,
            histogram_bins: default_bins(),
            features: Some(features),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Config whose γ and D come from `bath`, with D expressed in `units`.
    pub fn from_bath(
        potential: Potential,
        search_interval: (f64, f64),
        bath: &Bath,
        units: &ReducedUnits,
    ) -> Result<Self, SimError> {
        Self::new(potential, search_interval, bath.gamma(), bath.diffusion_energy() / units.energy_scale())
    }

    pub fn features(&self) -> Result<WellFeatures, SimError> {
        match self.features {
            Some(f) => Ok(f),
            None => Ok(self.potential.analyze(self.search_interval.0, self.search_interval.1)?),
        }
    }

    /// Re-derive cached features, e.g. after deserializing.
    pub fn prepared(mut self) -> Result<Self, SimError> {
        self.features = None;
        self.features = Some(self.features()?);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let f = self.features()?;
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return bad(format!("gamma must be >= 0 (got {})", self.gamma));
        }
        if !(self.diffusion.is_finite() && self.diffusion >= 0.0) {
            return bad(format!("diffusion must be >= 0 (got {})", self.diffusion));
        }
        let limit = DT_BOUND / f.omega_a.max(f.omega_b).max(self.gamma);
        // Small slack so that dt computed as the bound itself passes.
        if !(self.dt > 0.0 && self.dt <= limit * (1.0 + 1e-12)) {
            return bad(format!("dt = {} outside (0, {limit}]", self.dt));
        }
        if !(self.absorb_at > f.x_b) {
            return bad(format!("absorb_at = {} must exceed x_b = {}", self.absorb_at, f.x_b));
        }
        if self.n_trajectories == 0 {
            return bad("n_trajectories must be >= 1".into());
        }
        if !(self.max_time > 0.0) {
            return bad("max_time must be > 0".into());
        }
        if self.noise_substeps == 0 || self.histogram_bins == 0 {
            return bad("noise_substeps and histogram_bins must be >= 1".into());
        }
        Ok(())
    }

    pub fn barrier_ratio(&self) -> Result<f64, SimError> {
        Ok(self.features()?.delta_u / self.diffusion)
    }
}

/// OU coefficients for one step: p ← c₁p + c₂·sqrt(mD)·ξ.
#[derive(Debug, Clone, Copy)]
struct Integrator {
    dt: f64,
    mass: f64,
    c1: f64,
    noise_scale: f64,
}

impl Integrator {
    fn new(mass: f64, gamma: f64, diffusion: f64, dt: f64) -> Self {
        let c1 = (-gamma * dt).exp();
        // 1 − e^{−2γdt} without cancellation
        let var = -(-2.0 * gamma * dt).exp_m1();
        Integrator { dt, mass, c1, noise_scale: (var * mass * diffusion).sqrt() }
    }

    /// One BAOAB step. `force` is −U'(x) on entry and is updated to the force
    /// at the new position.
    #[inline]
    fn advance(&self, potential: &Potential, s: &mut State, force: &mut f64, noise: f64) {
        let half = 0.5 * self.dt;
        s.p += half * *force;
        s.x += half * s.p / self.mass;
        s.p = self.c1 * s.p + self.noise_scale * noise;
        s.x += half * s.p / self.mass;
        *force = -potential.gradient(s.x);
        s.p += half * *force;
    }
}

/// Advance `state` by one step driven by the standard normal draw `noise`.
pub fn step(state: State, config: &SimulationConfig, noise: f64) -> Result<State, SimError> {
    if !(state.x.is_finite() && state.p.is_finite()) {
        return Err(SimError::Diverged { time: f64::NAN });
    }
    let integ = Integrator::new(config.potential.mass(), config.gamma, config.diffusion, config.dt);
    let mut s = state;
    let mut force = -config.potential.gradient(s.x);
    integ.advance(&config.potential, &mut s, &mut force, noise);
    if s.x.is_finite() && s.p.is_finite() {
        Ok(s)
    } else {
        Err(SimError::Diverged { time: f64::NAN })
    }
}

/// RNG for trajectory `index`: the ChaCha stream id selects the trajectory, so
/// draws do not depend on scheduling.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_noise(rng: &mut ChaCha8Rng, substeps: u32) -> f64 {
    if substeps == 1 {
        return StandardNormal.sample(rng);
    }
    let sum: f64 = (0..substeps).map(|_| -> f64 { StandardNormal.sample(rng) }).sum();
    sum / (substeps as f64).sqrt()
}

fn initial_state(cfg: &SimulationConfig, f: &WellFeatures, rng: &mut ChaCha8Rng) -> State {
    match cfg.initial_condition {
        InitialCondition::WellBottomRest => State { x: f.x_a, p: 0.0 },
        InitialCondition::WellThermal => {
            let m = cfg.potential.mass();
            let sx = (cfg.diffusion / m).sqrt() / f.omega_a;
            let sp = (m * cfg.diffusion).sqrt();
            // Harmonic well Gaussian restricted to x < x_b.
            loop {
                let zx: f64 = StandardNormal.sample(rng);
                let zp: f64 = StandardNormal.sample(rng);
                let x = f.x_a + sx * zx;
                if x < f.x_b {
                    return State { x, p: sp * zp };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    Escaped(f64),
    Censored,
    Diverged,
}

fn run_trajectory(cfg: &SimulationConfig, f: &WellFeatures, index: u64) -> Outcome {
    let mut rng = trajectory_rng(cfg.seed, index);
    let mut s = initial_state(cfg, f, &mut rng);
    let integ = Integrator::new(cfg.potential.mass(), cfg.gamma, cfg.diffusion, cfg.dt);
    let mut force = -cfg.potential.gradient(s.x);
    let max_steps = (cfg.max_time / cfg.dt).ceil() as u64;
    for n in 1..=max_steps {
        let noise = draw_noise(&mut rng, cfg.noise_substeps);
        integ.advance(&cfg.potential, &mut s, &mut force, noise);
        if s.x >= cfg.absorb_at {
            return Outcome::Escaped(n as f64 * cfg.dt);
        }
        if !s.x.is_finite() || !s.p.is_finite() {
            return Outcome::Diverged;
        }
    }
    Outcome::Censored
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    fn build(values: &[f64], bins: usize) -> Self {
        let hi = values.iter().copied().fold(0.0, f64::max);
        let width = if hi > 0.0 { hi / bins as f64 } else { 1.0 };
        let edges: Vec<f64> = (0..=bins).map(|i| i as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let i = ((v / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Histogram { edges, counts }
    }

    /// CSV with header `bin_left,bin_right,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.edges[i], self.edges[i + 1], c));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FptStatistics {
    pub n_escaped: usize,
    pub n_censored: usize,
    pub n_diverged: usize,
    pub mean_fpt: f64,
    pub kappa: f64,
    pub kappa_stderr: f64,
    /// More than 10% of trajectories were censored.
    pub biased: bool,
    pub barrier_ratio: f64,
    pub histogram: Histogram,
    /// Escape times in trajectory-index order.
    #[serde(skip)]
    pub first_passage_times: Vec<f64>,
}

impl FptStatistics {
    pub fn n_trajectories(&self) -> usize {
        self.n_escaped + self.n_censored + self.n_diverged
    }

    pub fn to_estimate(&self) -> EscapeRateEstimate {
        let mut est = EscapeRateEstimate::new(RateMethod::MonteCarlo, self.kappa, self.kappa_stderr)
            .with_diagnostic("mean_fpt", self.mean_fpt)
            .with_diagnostic("n_escaped", self.n_escaped as f64)
            .with_diagnostic("n_censored", self.n_censored as f64)
            .with_diagnostic("n_diverged", self.n_diverged as f64)
            .with_diagnostic("barrier_ratio", self.barrier_ratio);
        if self.biased {
            est.warnings.push(format!(
                "{} of {} trajectories censored at max_time; estimate biased",
                self.n_censored,
                self.n_trajectories()
            ));
        }
        if self.barrier_ratio < LOW_BARRIER_RATIO {
            est.warnings.push(format!("barrier ratio dU/D = {:.3} < {LOW_BARRIER_RATIO}", self.barrier_ratio));
        }
        est
    }

    /// Tail rate from escapes later than `t0`: for an exponential law the
    /// excess times t − t0 have mean 1/κ. Returns (κ_tail, standard error, n).
    pub fn tail_rate(&self, t0: f64) -> Option<(f64, f64, usize)> {
        let excess: Vec<f64> = self.first_passage_times.iter().filter(|&&t| t > t0).map(|t| t - t0).collect();
        if excess.len() < 2 {
            return None;
        }
        let n = excess.len() as f64;
        let k = n / excess.iter().sum::<f64>();
        Some((k, k / n.sqrt(), excess.len()))
    }
}

fn outcomes(cfg: &SimulationConfig, f: &WellFeatures) -> Vec<Outcome> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..cfg.n_trajectories as u64).into_par_iter().map(|i| run_trajectory(cfg, f, i)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..cfg.n_trajectories as u64).map(|i| run_trajectory(cfg, f, i)).collect()
    }
}

/// κ = 1/⟨τ⟩ over trajectories that reached `absorb_at`.
pub fn estimate_rate(config: &SimulationConfig) -> Result<FptStatistics, SimError> {
    config.validate()?;
    let f = config.features()?;
    let results = outcomes(config, &f);

    let fpts: Vec<f64> = results
        .iter()
        .filter_map(|o| match o {
            Outcome::Escaped(t) => Some(*t),
            _ => None,
        })
        .collect();
    let n_censored = results.iter().filter(|o| **o == Outcome::Censored).count();
    let n_diverged = results.iter().filter(|o| **o == Outcome::Diverged).count();
    if fpts.is_empty() {
        return Err(SimError::NoEscapes);
    }
    let n = fpts.len() as f64;
    let mean = fpts.iter().sum::<f64>() / n;
    let kappa = 1.0 / mean;
    let kappa_stderr = if fpts.len() >= 2 {
        let var = fpts.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt() / (mean * mean)
    } else {
        f64::INFINITY
    };
    Ok(FptStatistics {
        n_escaped: fpts.len(),
        n_censored,
        n_diverged,
        mean_fpt: mean,
        kappa,
        kappa_stderr,
        biased: n_censored as f64 > CENSORED_FRACTION_LIMIT * config.n_trajectories as f64,
        barrier_ratio: f.delta_u / config.diffusion,
        histogram: Histogram::build(&fpts, config.histogram_bins),
        first_passage_times: fpts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumMoments {
    /// ⟨p²/2m + U(x) − U(x_a)⟩
    pub mean_energy: f64,
    /// ⟨(x − x_a)²⟩
    pub position_variance: f64,
    /// ⟨p²⟩
    pub momentum_variance: f64,
    /// ⟨p²/2m⟩
    pub kinetic: f64,
    /// ⟨½mω_a²(x − x_a)²⟩
    pub harmonic_potential: f64,
}

/// Long single-trajectory averages in the well, with a reflecting wall at x_b
/// so the particle cannot escape. Starts from `config.initial_condition`
/// using trajectory stream 0 and samples every step after `burn_in`.
pub fn equilibrium_moments(
    config: &SimulationConfig,
    burn_in: f64,
    samples: usize,
) -> Result<EquilibriumMoments, SimError> {
    config.validate()?;
    let f = config.features()?;
    let m = config.potential.mass();
    let u_a = config.potential.value(f.x_a);
    let mut rng = trajectory_rng(config.seed, 0);
    let mut s = initial_state(config, &f, &mut rng);
    let integ = Integrator::new(m, config.gamma, config.diffusion, config.dt);
    let mut force = -config.potential.gradient(s.x);
    let mut advance = |s: &mut State, force: &mut f64, t: f64| -> Result<(), SimError> {
        let noise = draw_noise(&mut rng, config.noise_substeps);
        integ.advance(&config.potential, s, force, noise);
        if s.x > f.x_b {
            s.x = 2.0 * f.x_b - s.x;
            s.p = -s.p;
            *force = -config.potential.gradient(s.x);
        }
        if s.x.is_finite() && s.p.is_finite() {
            Ok(())
        } else {
            Err(SimError::Diverged { time: t })
        }
    };
    let burn_steps = (burn_in / config.dt).ceil() as usize;
    for i in 0..burn_steps {
        advance(&mut s, &mut force, i as f64 * config.dt)?;
    }
    let (mut e, mut xx, mut pp) = (0.0, 0.0, 0.0);
    for i in 0..samples {
        advance(&mut s, &mut force, (burn_steps + i) as f64 * config.dt)?;
        let xi = s.x - f.x_a;
        e += s.p * s.p / (2.0 * m) + config.potential.value(s.x) - u_a;
        xx += xi * xi;
        pp += s.p * s.p;
    }
    let n = samples.max(1) as f64;
    let (e, xx, pp) = (e / n, xx / n, pp / n);
    Ok(EquilibriumMoments {
        mean_energy: e,
        position_variance: xx,
        momentum_variance: pp,
        kinetic: pp / (2.0 * m),
        harmonic_potential: 0.5 * m * f.omega_a * f.omega_a * xx,
    })
}

/// Sample (x, p) every `stride` steps along one reflecting-wall trajectory.
pub fn sample_phase_space(
    config: &SimulationConfig,
    burn_in: f64,
    samples: usize,
    stride: usize,
) -> Result<Vec<State>, SimError> {
    config.validate()?;
    let f = config.features()?;
    let mut rng = trajectory_rng(config.seed, 0);
    let mut s = initial_state(config, &f, &mut rng);
    let integ = Integrator::new(config.potential.mass(), config.gamma, config.diffusion, config.dt);
    let mut force = -config.potential.gradient(s.x);
    let burn_steps = (burn_in / config.dt).ceil() as usize;
    let mut out = Vec::with_capacity(samples);
    let total = burn_steps + samples * stride.max(1);
    for i in 1..=total {
        let noise = draw_noise(&mut rng, config.noise_substeps);
        integ.advance(&config.potential, &mut s, &mut force, noise);
        if s.x > f.x_b {
            s.x = 2.0 * f.x_b - s.x;
            s.p = -s.p;
            force = -config.potential.gradient(s.x);
        }
        if !(s.x.is_finite() && s.p.is_finite()) {
            return Err(SimError::Diverged { time: i as f64 * config.dt });
        }
        if i > burn_steps && (i - burn_steps) % stride.max(1) == 0 {
            out.push(s);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::make_cubic;

    /// Cubic well so deep that the harmonic approximation is essentially exact
    /// over the sampled region.
    fn deep_well(gamma: f64, d: f64) -> SimulationConfig {
        let p = make_cubic(1.0, 1e4, 1.0).unwrap();
        let xb = (6.0 * 1e4f64).sqrt();
        SimulationConfig::new(p, (-0.5 * xb, 1.5 * xb), gamma, d).unwrap()
    }

    fn energy(cfg: &SimulationConfig, s: State) -> f64 {
        s.p * s.p / (2.0 * cfg.potential.mass()) + cfg.potential.value(s.x)
    }

    #[test]
    fn conservative_limit_has_bounded_energy_error() {
        let mut cfg = deep_well(0.0, 0.0);
        cfg.dt = 0.01;
        let mut s = State { x: 1.0, p: 0.0 };
        let e0 = energy(&cfg, s);
        let mut worst: f64 = 0.0;
        for _ in 0..100_000 {
            s = step(s, &cfg, 0.7).unwrap();
            worst = worst.max((energy(&cfg, s) - e0).abs() / e0);
        }
        assert!(worst <= 1e-4, "relative energy error {worst}");
    }

    #[test]
    fn damped_noiseless_relaxes() {
        let mut cfg = deep_well(0.2, 0.0);
        cfg.dt = 0.01;
        let mut s = State { x: 1.0, p: 0.0 };
        // Energy per oscillation period must shrink.
        let period = (2.0 * std::f64::consts::PI / cfg.dt) as usize;
        let mut last = energy(&cfg, s);
        for _ in 0..40 {
            for _ in 0..period {
                s = step(s, &cfg, 1.0).unwrap();
            }
            let e = energy(&cfg, s);
            assert!(e < last);
            last = e;
        }
        assert!(s.x.abs() < 1e-4 && s.p.abs() < 1e-4);
    }

    #[test]
    fn diverged_state_reported() {
        let cfg = deep_well(0.1, 0.1);
        assert!(matches!(step(State { x: f64::NAN, p: 0.0 }, &cfg, 0.0), Err(SimError::Diverged { .. })));
    }

    #[test]
    fn noiseless_moments_vanish() {
        let mut cfg = deep_well(0.5, 0.0);
        cfg.initial_condition = InitialCondition::WellBottomRest;
        let m = equilibrium_moments(&cfg, 10.0, 1000).unwrap();
        assert_eq!(m.mean_energy, 0.0);
        assert_eq!(m.position_variance, 0.0);
        assert_eq!(m.momentum_variance, 0.0);
    }

    #[test]
    fn config_validation() {
        let p = make_cubic(1.0, 1.0 / 6.0, 1.0).unwrap();
        let mut cfg = SimulationConfig::new(p, (-0.5, 1.5), 0.5, 1.0 / 30.0).unwrap();
        assert!((cfg.absorb_at - 3.0).abs() < 1e-9);
        assert!((cfg.dt - 0.05).abs() < 1e-15);
        cfg.dt = 0.06;
        assert!(cfg.validate().is_err());
        cfg.dt = 0.05;
        cfg.absorb_at = 0.9;
        assert!(cfg.validate().is_err());
        cfg.absorb_at = 3.0;
        cfg.n_trajectories = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn no_escapes_is_an_error() {
        let p = make_cubic(1.0, 1.0 / 6.0, 1.0).unwrap();
        let mut cfg = SimulationConfig::new(p, (-0.5, 1.5), 0.5, 1.0 / 600.0).unwrap();
        cfg.n_trajectories = 4;
        cfg.max_time = 50.0;
        assert_eq!(estimate_rate(&cfg), Err(SimError::NoEscapes));
    }

    #[test]
    fn barrierless_sanity() {
        let p = make_cubic(1.0, 1.0 / 6.0, 1.0).unwrap();
        let mut cfg = SimulationConfig::new(p, (-0.5, 1.5), 0.5, 10.0 / 6.0).unwrap();
        cfg.n_trajectories = 200;
        cfg.seed = 3;
        let stats = estimate_rate(&cfg).unwrap();
        assert!(stats.mean_fpt < 10.0, "mean fpt {}", stats.mean_fpt);
        let est = stats.to_estimate();
        assert!(est.warnings.iter().any(|w| w.contains("barrier ratio")));
        assert_eq!(est.method, RateMethod::MonteCarlo);
    }

    #[test]
    fn histogram_csv() {
        let h = Histogram::build(&[0.5, 1.5, 1.6, 4.0], 4);
        assert_eq!(h.counts, vec![1, 2, 0, 1]);
        assert_eq!(h.to_csv(), "bin_left,bin_right,count\n0,1,1\n1,2,2\n2,3,0\n3,4,1\n");
    }

    #[test]
    fn json_config_round_trip() {
        let p = make_cubic(1.0, 1.0 / 6.0, 1.0).unwrap();
        let cfg = SimulationConfig::new(p, (-0.5, 1.5), 0.5, 1.0 / 30.0).unwrap();
        let s = serde_json::to_string(&cfg).unwrap();
        assert!(s.contains("\"initial_condition\":\"well-thermal\""));
        let back: SimulationConfig = serde_json::from_str::<SimulationConfig>(&s).unwrap().prepared().unwrap();
        assert_eq!(back, cfg);
    }
}
