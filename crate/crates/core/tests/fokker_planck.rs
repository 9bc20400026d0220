use std::f64::consts::PI;

use kramers_zpf::fokker_planck::{
    decay_rate, evolve, stability_bound, DecayOptions, FpeError, FpeModel, GridSpec, PhaseSpaceGrid, XBoundary,
};
use kramers_zpf::kramers::{rate_full, RateInputs};
use kramers_zpf::potential::{make_cubic, Potential};

fn reference(ratio: f64) -> (Potential, RateInputs) {
    let p = make_cubic(1.0, 1.0 / 6.0, 1.0).unwrap();
    let f = p.analyze(-0.5, 1.5).unwrap();
    let inputs = RateInputs::with_barrier_ratio(f, 1.0, 0.5, ratio).unwrap();
    (p, inputs)
}

#[test]
fn harmonic_well_relaxes_to_gaussian() {
    let (m, omega, gamma, d): (f64, f64, f64, f64) = (1.0, 1.0, 1.0, 0.5);
    let s = (d / m).sqrt() / omega;
    let spec = GridSpec { x_min: -7.0 * s, x_max: 7.0 * s, p_max: 7.0 * (m * d).sqrt(), nx: 256, np: 256 };
    let model = FpeModel::harmonic(0.0, omega, m, gamma, d, &spec);
    let mut g = PhaseSpaceGrid::from_fn(spec, XBoundary::Reflecting, |x, p| {
        (-((x - 1.0).powi(2) + (p + 0.5).powi(2)) / 0.2).exp() + 1e-3
    })
    .unwrap();
    g.normalize().unwrap();
    let dt = stability_bound(&spec, &model);
    evolve(&mut g, &model, dt, (20.0 / gamma / dt).ceil() as usize).unwrap();
    assert!(g.min_density() >= 0.0);
    assert!(g.bookkeeping_error() < 1e-12);
    let z = 2.0 * PI * d / omega;
    let mass = g.total_mass();
    let l1 = g.l1_distance(|x, p| mass * (-(p * p / (2.0 * m) + 0.5 * m * omega * omega * x * x) / d).exp() / z);
    assert!(l1 < 1e-3, "L1 = {l1}");
}

#[test]
fn reflecting_barrier_gives_boltzmann_state() {
    let (p, inputs) = reference(5.0);
    let d = inputs.diffusion;
    let f = inputs.features;
    let mut spec = GridSpec::default_for(&inputs);
    spec.x_max = f.x_b;
    spec.nx = 256;
    spec.np = 256;
    let model = FpeModel::from_potential(&p, inputs.gamma, d, &spec);
    let mut g = PhaseSpaceGrid::well_gaussian(spec, XBoundary::Reflecting, &inputs).unwrap();
    let dt = stability_bound(&spec, &model);
    evolve(&mut g, &model, dt, (40.0 / dt).ceil() as usize).unwrap();
    assert!(g.absorbed() == 0.0);

    let u_a = p.value(f.x_a);
    let boltzmann = |x: f64, q: f64| (-(q * q / 2.0 + p.value(x) - u_a) / d).exp();
    let norm: f64 = {
        let s = g.spec();
        (0..s.nx).flat_map(|i| (0..s.np).map(move |j| (i, j))).map(|(i, j)| boltzmann(s.x(i), s.p(j))).sum::<f64>()
            * g.cell_area()
    };
    let mass = g.total_mass();
    let l1 = g.l1_distance(|x, q| mass * boltzmann(x, q) / norm);
    assert!(l1 < 1e-3, "L1 = {l1}");
}

#[test]
fn quasi_stationary_flux_over_population() {
    let (p, inputs) = reference(5.0);
    let spec = GridSpec { nx: 128, np: 128, ..GridSpec::default_for(&inputs) };
    let r = decay_rate(&p, &inputs, &spec, &DecayOptions { horizon: 30.0, ..Default::default() }).unwrap();
    assert!(r.warnings.is_empty(), "{:?}", r.warnings);
    assert!(r.bookkeeping_drift <= 1e-6);
    assert!(((r.flux_ratio - r.kappa) / r.kappa).abs() < 0.1);

    // j/P stays inside a 5% band after the transient.
    let ratios: Vec<f64> = r
        .p_series
        .iter()
        .zip(&r.flux_series)
        .filter(|((t, _), _)| *t >= r.fit_window.0)
        .map(|((_, pp), (_, j))| j / pp)
        .collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    assert!(hi / lo < 1.05, "band {lo}..{hi}");

    let analytic = rate_full(&inputs).kappa;
    assert!(((r.kappa - analytic) / analytic).abs() < 0.1);
    assert!(r.series_csv().starts_with("t,P\n0,"));
}

#[test]
fn high_barrier_short_horizon_warns() {
    let (p, inputs) = reference(12.0);
    let spec = GridSpec { nx: 48, np: 48, ..GridSpec::default_for(&inputs) };
    let r = decay_rate(&p, &inputs, &spec, &DecayOptions { horizon: 14.0, ..Default::default() }).unwrap();
    assert!(r.warnings.iter().any(|w| w.contains("numerical floor")), "{:?}", r.warnings);
}

#[test]
fn barrier_ratio_outside_range_is_rejected() {
    let (p, inputs) = reference(2.0);
    let spec = GridSpec::default_for(&inputs);
    assert!(matches!(decay_rate(&p, &inputs, &spec, &DecayOptions::default()), Err(FpeError::BarrierRatio(_))));
    let (p, inputs) = reference(20.0);
    assert!(matches!(decay_rate(&p, &inputs, &spec, &DecayOptions::default()), Err(FpeError::BarrierRatio(_))));
}

#[test]
fn oversized_step_is_rejected() {
    let (p, inputs) = reference(5.0);
    let spec = GridSpec { nx: 32, np: 32, ..GridSpec::default_for(&inputs) };
    let opts = DecayOptions { dt: Some(1.0), ..Default::default() };
    assert!(matches!(decay_rate(&p, &inputs, &spec, &opts), Err(FpeError::Unstable { .. })));
}
