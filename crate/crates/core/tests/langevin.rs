use kramers_zpf::kramers::{rate_full, RateInputs};
use kramers_zpf::langevin::{estimate_rate, sample_phase_space, InitialCondition, SimulationConfig};
use kramers_zpf::potential::make_cubic;

/// Cubic well of the reference setup (m = 1, ω_a = ω_b = 1, ΔU = 1/6) at the
/// given barrier ratio, with γ = 0.5.
fn reference(ratio: f64, n: usize) -> (SimulationConfig, f64) {
    let p = make_cubic(1.0, 1.0 / 6.0, 1.0).unwrap();
    let f = p.analyze(-0.5, 1.5).unwrap();
    let inputs = RateInputs::with_barrier_ratio(f, 1.0, 0.5, ratio).unwrap();
    let kappa = rate_full(&inputs).kappa;
    let mut cfg = SimulationConfig::new(p, (-0.5, 1.5), 0.5, inputs.diffusion).unwrap();
    cfg.n_trajectories = n;
    cfg.max_time = 30.0 / kappa;
    (cfg, kappa)
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn ks_distance(mut xs: Vec<f64>, sigma: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = normal_cdf(x / sigma);
            (c - i as f64 / n).abs().max((c - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn stationary_distribution_is_the_well_gaussian() {
    // ΔU = 10⁴ keeps the cubic term negligible, so the well is harmonic.
    let (d, gamma) = (0.5, 1.0);
    let p = make_cubic(1.0, 1e4, 1.0).unwrap();
    let xb = 6e4f64.sqrt();
    let mut cfg = SimulationConfig::new(p, (-0.5 * xb, 1.5 * xb), gamma, d).unwrap();
    cfg.seed = 17;
    let samples = sample_phase_space(&cfg, 50.0, 1_000_000, 20).unwrap();
    let sigma = d.sqrt();
    let kx = ks_distance(samples.iter().map(|s| s.x).collect(), sigma);
    let kp = ks_distance(samples.iter().map(|s| s.p).collect(), sigma);
    assert!(kx < 0.01 && kp < 0.01, "KS x {kx}, p {kp}");
}

#[test]
fn long_run_kinetic_energy_is_half_d() {
    let d = 0.3;
    let p = make_cubic(1.0, 1e4, 1.0).unwrap();
    let xb = 6e4f64.sqrt();
    let mut cfg = SimulationConfig::new(p, (-0.5 * xb, 1.5 * xb), 1.0, d).unwrap();
    cfg.seed = 5;
    let m = kramers_zpf::langevin::equilibrium_moments(&cfg, 50.0, 10_000_000).unwrap();
    assert!((m.kinetic - 0.5 * d).abs() / (0.5 * d) < 0.02, "{m:?}");
}

#[test]
fn rate_within_twenty_percent_and_exponential_tail() {
    let (cfg, analytic) = reference(4.0, 5000);
    let stats = estimate_rate(&cfg).unwrap();
    assert_eq!(stats.n_escaped + stats.n_censored + stats.n_diverged, 5000);
    assert!(stats.kappa_stderr > 0.0);
    assert!(!stats.biased);
    let rel = (stats.kappa - analytic) / analytic;
    assert!(rel.abs() < 0.2, "MC {} vs analytic {analytic}", stats.kappa);

    let (tail, tail_se, n_tail) = stats.tail_rate(3.0 / stats.kappa).unwrap();
    assert!(n_tail > 100);
    let combined = (tail_se.powi(2) + stats.kappa_stderr.powi(2)).sqrt();
    assert!((tail - stats.kappa).abs() < 2.0 * combined, "tail {tail} ± {tail_se} vs {}", stats.kappa);
}

#[test]
fn halving_dt_moves_rate_less_than_one_standard_error() {
    let (mut coarse, _) = reference(4.0, 2000);
    coarse.dt = 0.05;
    coarse.noise_substeps = 2;
    let mut fine = coarse.clone();
    fine.dt = 0.025;
    fine.noise_substeps = 1;
    let a = estimate_rate(&coarse).unwrap();
    let b = estimate_rate(&fine).unwrap();
    let se = a.kappa_stderr.max(b.kappa_stderr);
    assert!((a.kappa - b.kappa).abs() < se, "{} vs {} (se {se})", a.kappa, b.kappa);
}

#[test]
fn thread_count_does_not_change_results() {
    let (mut cfg, _) = reference(3.0, 64);
    cfg.seed = 99;
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| estimate_rate(&cfg).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
    assert_eq!(one.first_passage_times, four.first_passage_times);
}

#[test]
fn well_bottom_start_is_slower_but_close() {
    let (mut cfg, _) = reference(3.0, 800);
    let thermal = estimate_rate(&cfg).unwrap();
    cfg.initial_condition = InitialCondition::WellBottomRest;
    let rest = estimate_rate(&cfg).unwrap();
    assert!(rest.mean_fpt > 0.9 * thermal.mean_fpt);
    assert!((rest.kappa - thermal.kappa).abs() / thermal.kappa < 0.2);
}

#[test]
fn heavy_censoring_is_flagged() {
    let (mut cfg, analytic) = reference(4.0, 200);
    cfg.max_time = 0.3 / analytic;
    let stats = estimate_rate(&cfg).unwrap();
    assert!(stats.biased);
    assert!(stats.to_estimate().warnings.iter().any(|w| w.contains("censored")));
}

#[test]
fn histogram_counts_every_escape() {
    let (cfg, _) = reference(3.0, 300);
    let stats = estimate_rate(&cfg).unwrap();
    assert_eq!(stats.histogram.counts.iter().sum::<u64>() as usize, stats.n_escaped);
    let csv = stats.histogram.to_csv();
    assert!(csv.starts_with("bin_left,bin_right,count\n"));
    assert_eq!(csv.lines().count(), cfg.histogram_bins + 1);
}
