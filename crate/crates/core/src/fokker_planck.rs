//! Finite-volume solution of the phase-space Fokker–Planck equation
//!
//! ∂W/∂t = −∂/∂x[(p/m)W] − ∂/∂p[(−U′(x) − γp)W] + mγD ∂²W/∂p²
//!
//! on a cell-centred (x, p) grid. Each step is split into an x sweep, a
//! p-advection sweep and a p-diffusion sweep. Advection uses flux-limited
//! Lax–Wendroff fluxes (monotonized-central limiter); every update is a flux difference, so
//! the mass that leaves the grid is known exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kramers::{rate_full, EscapeRateEstimate, KramersError, RateInputs, RateMethod};
use crate::potential::Potential;

/// Relative change of P over the fit window below which the decay is not
/// considered resolved.
pub const DECAY_SIGNAL_FLOOR: f64 = 1e-4;
/// Fit residual, relative to the fitted log-decrement, above which the decay
/// is flagged as non-exponential.
pub const RESIDUAL_THRESHOLD: f64 = 1e-2;
/// Range of ΔU/D handled by [`decay_rate`].
pub const BARRIER_RATIO_RANGE: (f64, f64) = (3.0, 12.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FpeError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("time step {dt} exceeds the stability bound {bound}")]
    Unstable { dt: f64, bound: f64 },
    #[error("barrier ratio dU/D = {0} outside [3, 12]")]
    BarrierRatio(f64),
    #[error("invalid decay options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Kramers(#[from] KramersError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XBoundary {
    /// Outflow through x_max is removed and counted.
    Absorbing,
    /// Specular wall at x_max. The wall at x_min is always specular.
    Reflecting,
}

/// Grid geometry: x ∈ [x_min, x_max], p ∈ [−p_max, p_max], nx × np cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub p_max: f64,
    pub nx: usize,
    pub np: usize,
}

impl GridSpec {
    /// x from x_a − 4σ_x to x_b + 2(x_b − x_a), p within ±6σ_p, 256 × 256.
    pub fn default_for(inputs: &RateInputs) -> Self {
        let f = &inputs.features;
        let sigma_x = (inputs.diffusion / inputs.mass).sqrt() / f.omega_a;
        let sigma_p = (inputs.mass * inputs.diffusion).sqrt();
        GridSpec {
            x_min: f.x_a - 4.0 * sigma_x,
            x_max: f.default_absorbing_point(),
            p_max: 6.0 * sigma_p,
            nx: 256,
            np: 256,
        }
    }

    pub fn refined(&self, factor: usize) -> Self {
        GridSpec { nx: self.nx * factor, np: self.np * factor, ..*self }
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn dp(&self) -> f64 {
        2.0 * self.p_max / self.np as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn p(&self, j: usize) -> f64 {
        -self.p_max + (j as f64 + 0.5) * self.dp()
    }

    pub fn validate(&self) -> Result<(), FpeError> {
        let finite = self.x_min.is_finite() && self.x_max.is_finite() && self.p_max.is_finite();
        if !finite || self.x_max <= self.x_min || self.p_max <= 0.0 {
            return Err(FpeError::InvalidGrid(format!(
                "need x_min < x_max and p_max > 0 (got [{}, {}], {})",
                self.x_min, self.x_max, self.p_max
            )));
        }
        if self.nx < 4 || self.np < 4 {
            return Err(FpeError::InvalidGrid(format!("need at least 4 cells per axis (got {}x{})", self.nx, self.np)));
        }
        Ok(())
    }
}

/// Drift and diffusion of the equation on a given grid. `force` holds −U′ at
/// each column centre.
#[derive(Debug, Clone, PartialEq)]
pub struct FpeModel {
    pub mass: f64,
    pub gamma: f64,
    pub diffusion: f64,
    pub force: Vec<f64>,
}

impl FpeModel {
    pub fn from_potential(potential: &Potential, gamma: f64, diffusion: f64, spec: &GridSpec) -> Self {
        let force = (0..spec.nx).map(|i| -potential.gradient(spec.x(i))).collect();
        FpeModel { mass: potential.mass(), gamma, diffusion, force }
    }

    /// U = ½mω²(x − x_a)².
    pub fn harmonic(x_a: f64, omega: f64, mass: f64, gamma: f64, diffusion: f64, spec: &GridSpec) -> Self {
        let k = mass * omega * omega;
        let force = (0..spec.nx).map(|i| -k * (spec.x(i) - x_a)).collect();
        FpeModel { mass, gamma, diffusion, force }
    }

    pub fn flat(mass: f64, gamma: f64, diffusion: f64, spec: &GridSpec) -> Self {
        FpeModel { mass, gamma, diffusion, force: vec![0.0; spec.nx] }
    }
}

/// Largest admissible step: half the most restrictive of the x-advection,
/// p-advection and diffusion limits.
pub fn stability_bound(spec: &GridSpec, model: &FpeModel) -> f64 {
    let max_force = model.force.iter().fold(0.0f64, |a, f| a.max(f.abs()));
    let x_limit = spec.dx() * model.mass / spec.p_max;
    let p_speed = max_force + model.gamma * spec.p_max;
    let p_limit = if p_speed > 0.0 { spec.dp() / p_speed } else { f64::INFINITY };
    let k = model.mass * model.gamma * model.diffusion;
    let d_limit = if k > 0.0 { spec.dp() * spec.dp() / (2.0 * k) } else { f64::INFINITY };
    0.5 * x_limit.min(p_limit).min(d_limit)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    spec: GridSpec,
    right: XBoundary,
    /// Densities, row i (fixed x) contiguous in p.
    w: Vec<f64>,
    time: f64,
    steps: u64,
    initial_mass: f64,
    /// Cumulative mass through x = x_max.
    absorbed: f64,
    /// Cumulative mass through |p| = p_max.
    lost_p: f64,
    flux_buf: Vec<f64>,
    next: Vec<f64>,
    /// Ghost rows −2, −1, nx, nx + 1 for the current x sweep.
    ghost: Vec<f64>,
}

impl PhaseSpaceGrid {
    pub fn new(spec: GridSpec, right: XBoundary) -> Result<Self, FpeError> {
        Self::from_fn(spec, right, |_, _| 0.0)
    }

    /// Density initialised cell by cell from `density(x, p)` at cell centres.
    pub fn from_fn(spec: GridSpec, right: XBoundary, density: impl Fn(f64, f64) -> f64) -> Result<Self, FpeError> {
        spec.validate()?;
        let mut w = Vec::with_capacity(spec.nx * spec.np);
        for i in 0..spec.nx {
            let x = spec.x(i);
            for j in 0..spec.np {
                let v = density(x, spec.p(j));
                if !(v.is_finite() && v >= 0.0) {
                    return Err(FpeError::InvalidGrid(format!("density must be finite and >= 0 (got {v})")));
                }
                w.push(v);
            }
        }
        let mut grid = PhaseSpaceGrid {
            spec,
            right,
            w,
            time: 0.0,
            steps: 0,
            initial_mass: 0.0,
            absorbed: 0.0,
            lost_p: 0.0,
            flux_buf: vec![0.0; ((spec.nx + 1) * spec.np).max(spec.nx * (2 * spec.np + 5))],
            ghost: vec![0.0; 4 * spec.np],
            next: vec![0.0; spec.nx * spec.np],
        };
        grid.initial_mass = grid.total_mass();
        Ok(grid)
    }

    /// Harmonic well Gaussian exp[−(p²/2m + ½mω_a²(x − x_a)²)/D] restricted
    /// to x < x_b, normalised to unit mass on the grid.
    pub fn well_gaussian(spec: GridSpec, right: XBoundary, inputs: &RateInputs) -> Result<Self, FpeError> {
        let f = inputs.features;
        let (m, d) = (inputs.mass, inputs.diffusion);
        let mut grid = Self::from_fn(spec, right, |x, p| {
            if x >= f.x_b {
                return 0.0;
            }
            let e = p * p / (2.0 * m) + 0.5 * m * f.omega_a * f.omega_a * (x - f.x_a).powi(2);
            (-e / d).exp()
        })?;
        grid.normalize()?;
        Ok(grid)
    }

    /// Scale to unit mass and restart the bookkeeping.
    pub fn normalize(&mut self) -> Result<(), FpeError> {
        let mass = self.total_mass();
        if !(mass > 0.0) {
            return Err(FpeError::InvalidGrid("cannot normalise a grid with zero mass".into()));
        }
        self.w.iter_mut().for_each(|v| *v /= mass);
        self.initial_mass = 1.0;
        self.absorbed = 0.0;
        self.lost_p = 0.0;
        Ok(())
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn density(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.spec.np + j]
    }

    pub fn set_density(&mut self, i: usize, j: usize, value: f64) {
        self.w[i * self.spec.np + j] = value;
        self.initial_mass = self.total_mass();
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn cell_area(&self) -> f64 {
        self.spec.dx() * self.spec.dp()
    }

    pub fn total_mass(&self) -> f64 {
        self.w.iter().sum::<f64>() * self.cell_area()
    }

    /// ∫dp ∫^{x} dx W, with the cell straddling `x` counted proportionally.
    pub fn mass_left_of(&self, x: f64) -> f64 {
        let s = &self.spec;
        let pos = ((x - s.x_min) / s.dx()).clamp(0.0, s.nx as f64);
        let full = pos.floor() as usize;
        let mut sum: f64 = self.w[..full * s.np].iter().sum();
        if full < s.nx {
            let frac = pos - full as f64;
            sum += frac * self.w[full * s.np..(full + 1) * s.np].iter().sum::<f64>();
        }
        sum * self.cell_area()
    }

    pub fn absorbed(&self) -> f64 {
        self.absorbed
    }

    pub fn lost_through_p(&self) -> f64 {
        self.lost_p
    }

    pub fn initial_mass(&self) -> f64 {
        self.initial_mass
    }

    /// |interior + absorbed + lost − initial|.
    pub fn bookkeeping_error(&self) -> f64 {
        (self.total_mass() + self.absorbed + self.lost_p - self.initial_mass).abs()
    }

    pub fn min_density(&self) -> f64 {
        self.w.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// (⟨x⟩, ⟨p⟩, ⟨p²⟩) normalised by the current mass.
    pub fn moments(&self) -> (f64, f64, f64) {
        let s = &self.spec;
        let (mut m0, mut mx, mut mp, mut mpp) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..s.nx {
            let x = s.x(i);
            for j in 0..s.np {
                let v = self.density(i, j);
                let p = s.p(j);
                m0 += v;
                mx += v * x;
                mp += v * p;
                mpp += v * p * p;
            }
        }
        (mx / m0, mp / m0, mpp / m0)
    }

    /// Σ|W − ⟨other⟩|·ΔxΔp, where ⟨other⟩ is the cell average of a density
    /// (3 × 3 Gauss–Legendre).
    pub fn l1_distance(&self, other: impl Fn(f64, f64) -> f64) -> f64 {
        const NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
        const WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
        let s = &self.spec;
        let (hx, hp) = (0.5 * s.dx(), 0.5 * s.dp());
        let mut sum = 0.0;
        for i in 0..s.nx {
            let x = s.x(i);
            for j in 0..s.np {
                let p = s.p(j);
                let mut avg = 0.0;
                for (a, wa) in NODES.iter().zip(WEIGHTS) {
                    for (b, wb) in NODES.iter().zip(WEIGHTS) {
                        avg += wa * wb * other(x + a * hx, p + b * hp);
                    }
                }
                sum += (self.density(i, j) - avg).abs();
            }
        }
        sum * self.cell_area()
    }

    /// CSV with header `x,p,W`.
    pub fn to_csv(&self) -> String {
        let s = &self.spec;
        let mut out = String::from("x,p,W\n");
        for i in 0..s.nx {
            for j in 0..s.np {
                out.push_str(&format!("{},{},{}\n", s.x(i), s.p(j), self.density(i, j)));
            }
        }
        out
    }
}

/// Monotonized-central limited slope from two one-sided differences.
#[inline]
fn limited(a: f64, b: f64) -> f64 {
    let m = (2.0 * a.abs()).min(0.5 * (a + b).abs()).min(2.0 * b.abs());
    if a * b > 0.0 {
        m.copysign(a)
    } else {
        0.0
    }
}

/// Flux-limited Lax–Wendroff flux through a face with speed v ≥ 0, from
/// upwind cells `wm1`, `w0` into `w1`.
#[inline(always)]
fn flux_right(v: f64, nu: f64, wm1: f64, w0: f64, w1: f64) -> f64 {
    v * (w0 + 0.5 * (1.0 - nu) * limited(w0 - wm1, w1 - w0))
}

/// Mirror of [`flux_right`] for v < 0: from `w2`, `w1` into `w0`.
#[inline(always)]
fn flux_left(v: f64, nu: f64, w0: f64, w1: f64, w2: f64) -> f64 {
    v * (w1 - 0.5 * (1.0 - nu) * limited(w2 - w1, w1 - w0))
}

/// Fills the ghost rows. A reflecting wall mirrors the interior with
/// reversed momentum, W(−1 − m, p) = W(m, −p); an absorbing one is empty.
fn fill_ghosts(grid: &mut PhaseSpaceGrid) {
    let (nx, np) = (grid.spec.nx, grid.spec.np);
    let (w, ghost) = (&grid.w, &mut grid.ghost);
    let mirror = |src: usize, dst: &mut [f64]| {
        for (d, s) in dst.iter_mut().zip(w[src * np..(src + 1) * np].iter().rev()) {
            *d = *s;
        }
    };
    let (left, right) = ghost.split_at_mut(2 * np);
    mirror(1, &mut left[..np]);
    mirror(0, &mut left[np..]);
    if grid.right == XBoundary::Reflecting {
        mirror(nx - 1, &mut right[..np]);
        mirror(nx - 2, &mut right[np..]);
    } else {
        right.fill(0.0);
    }
}

/// Fluxes through x face `k` (between rows k − 1 and k) for every p.
fn x_face_row(grid: &PhaseSpaceGrid, vel: &[f64], lam: f64, k: usize, out: &mut [f64]) {
    let (nx, np) = (grid.spec.nx, grid.spec.np);
    let row = |i: isize| -> &[f64] {
        if i < 0 {
            let g = (i + 2) as usize;
            &grid.ghost[g * np..(g + 1) * np]
        } else if (i as usize) < nx {
            let i = i as usize;
            &grid.w[i * np..(i + 1) * np]
        } else {
            let g = i as usize - nx + 2;
            &grid.ghost[g * np..(g + 1) * np]
        }
    };
    let wall = k == 0 || (k == nx && grid.right == XBoundary::Reflecting);
    let k = k as isize;
    let (rm1, r0, r1, r2) = (row(k - 2), row(k - 1), row(k), row(k + 1));
    let out = &mut out[..np];
    let vel = &vel[..np];
    // Faces with p < 0 first, then p >= 0.
    let split = vel.partition_point(|&v| v < 0.0);
    for j in 0..split {
        let v = vel[j];
        out[j] = flux_left(v, -v * lam, r0[j], r1[j], r2[j]);
    }
    for j in split..np {
        let v = vel[j];
        out[j] = flux_right(v, v * lam, rm1[j], r0[j], r1[j]);
    }
    if wall {
        // The reflected flux mirrors the outgoing one exactly.
        let outgoing_left = k == 0;
        for j in 0..np {
            let incoming = if outgoing_left { vel[j] > 0.0 } else { vel[j] < 0.0 };
            if incoming {
                out[j] = -out[np - 1 - j];
            } else if vel[j] == 0.0 {
                out[j] = 0.0;
            }
        }
    }
}

/// p advection followed by p diffusion on one row. `pad` needs np + 4
/// entries and `flux` np + 1. Returns the mass per unit x that left through
/// |p| = p_max.
fn p_sweep_row(
    row: &mut [f64],
    pad: &mut [f64],
    flux: &mut [f64],
    force: f64,
    model: &FpeModel,
    spec: &GridSpec,
    dt: f64,
) -> f64 {
    let np = row.len();
    let dp = spec.dp();
    let lam = dt / dp;
    let pad = &mut pad[..np + 4];
    let flux = &mut flux[..np + 1];
    pad[0] = 0.0;
    pad[1] = 0.0;
    pad[np + 2] = 0.0;
    pad[np + 3] = 0.0;

    // Diffusion is split symmetrically around the advection.
    let k = model.mass * model.gamma * model.diffusion;
    let r = 0.5 * k * dt / (dp * dp);
    let mut lost = 0.0;
    let mut diffuse = |row: &mut [f64], pad: &mut [f64]| {
        if r > 0.0 {
            pad[2..np + 2].copy_from_slice(row);
            for j in 0..np {
                row[j] = pad[j + 2] + r * (pad[j + 3] - 2.0 * pad[j + 2] + pad[j + 1]);
            }
            lost += r * (pad[2] + pad[np + 1]) * dp;
        }
    };
    diffuse(row, pad);

    pad[2..np + 2].copy_from_slice(row);
    // Face j lies between cells j − 1 and j, i.e. pad[j + 1] and pad[j + 2].
    // The face velocity falls with j, so the faces split into a
    // right-moving block followed by a left-moving one.
    let a0 = force + model.gamma * spec.p_max;
    let da = model.gamma * dp;
    let speed = |j: usize| a0 - da * j as f64;
    let split = if da > 0.0 {
        let guess = ((a0 / da).floor() + 1.0).clamp(0.0, (np + 1) as f64) as usize;
        let mut k = guess.saturating_sub(1);
        while k <= np && speed(k) >= 0.0 {
            k += 1;
        }
        while k > 0 && speed(k - 1) < 0.0 {
            k -= 1;
        }
        k
    } else if a0 >= 0.0 {
        np + 1
    } else {
        0
    };
    for j in 0..split {
        let a = speed(j);
        flux[j] = flux_right(a, a * lam, pad[j], pad[j + 1], pad[j + 2]);
    }
    for j in split..=np {
        let a = speed(j);
        flux[j] = flux_left(a, -a * lam, pad[j + 1], pad[j + 2], pad[j + 3]);
    }
    for j in 0..np {
        row[j] -= lam * (flux[j + 1] - flux[j]);
    }
    let advected = (flux[np] - flux[0]) * dt;

    diffuse(row, pad);
    lost + advected
}

/// Advance `grid` by `steps` steps of size `dt`.
pub fn evolve(grid: &mut PhaseSpaceGrid, model: &FpeModel, dt: f64, steps: usize) -> Result<(), FpeError> {
    let spec = grid.spec;
    if model.force.len() != spec.nx {
        return Err(FpeError::InvalidGrid(format!(
            "model has {} force columns for a grid of {}",
            model.force.len(),
            spec.nx
        )));
    }
    let bound = stability_bound(&spec, model);
    if !(dt > 0.0 && dt <= bound) {
        return Err(FpeError::Unstable { dt, bound });
    }
    let vel: Vec<f64> = (0..spec.np).map(|j| spec.p(j) / model.mass).collect();
    for _ in 0..steps {
        step_once(grid, model, &vel, dt);
    }
    Ok(())
}

/// One step. The x sweep and the p sweeps swap order on alternate steps, so
/// pairs of steps compose symmetrically.
fn step_once(grid: &mut PhaseSpaceGrid, model: &FpeModel, vel: &[f64], dt: f64) {
    if grid.steps.is_multiple_of(2) {
        x_sweep(grid, model, vel, dt);
        p_sweep(grid, model, dt);
    } else {
        p_sweep(grid, model, dt);
        x_sweep(grid, model, vel, dt);
    }
    grid.steps += 1;
    grid.time += dt;
}

fn x_sweep(grid: &mut PhaseSpaceGrid, _model: &FpeModel, vel: &[f64], dt: f64) {
    let spec = grid.spec;
    let (nx, np) = (spec.nx, spec.np);
    let lam = dt / spec.dx();
    fill_ghosts(grid);

    let mut flux = std::mem::take(&mut grid.flux_buf);
    let mut next = std::mem::take(&mut grid.next);
    {
        let g = &*grid;
        let face = |(k, out): (usize, &mut [f64])| x_face_row(g, vel, lam, k, out);
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            flux[..(nx + 1) * np].par_chunks_mut(np).enumerate().for_each(face);
        }
        #[cfg(not(feature = "parallel"))]
        flux[..(nx + 1) * np].chunks_mut(np).enumerate().for_each(face);

        let flux = &flux;
        let update = |(i, out): (usize, &mut [f64])| {
            let w = &g.w[i * np..(i + 1) * np];
            let lo = &flux[i * np..(i + 1) * np];
            let hi = &flux[(i + 1) * np..(i + 2) * np];
            let out = &mut out[..np];
            for j in 0..np {
                out[j] = w[j] - lam * (hi[j] - lo[j]);
            }
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            next.par_chunks_mut(np).enumerate().for_each(update);
        }
        #[cfg(not(feature = "parallel"))]
        next.chunks_mut(np).enumerate().for_each(update);
    }
    let outflow: f64 = match grid.right {
        XBoundary::Absorbing => flux[nx * np..(nx + 1) * np].iter().sum::<f64>() * dt * spec.dp(),
        XBoundary::Reflecting => 0.0,
    };
    std::mem::swap(&mut grid.w, &mut next);
    grid.next = next;
    grid.flux_buf = flux;
    grid.absorbed += outflow;
}

fn p_sweep(grid: &mut PhaseSpaceGrid, model: &FpeModel, dt: f64) {
    let spec = grid.spec;
    let np = spec.np;
    // The flux buffer doubles as per-row scratch.
    let mut scratch = std::mem::take(&mut grid.flux_buf);
    let force = &model.force;
    let chunk = 2 * np + 5;
    let lost: f64 = {
        let sweep = |((i, row), scratch): ((usize, &mut [f64]), &mut [f64])| {
            let (pad, fl) = scratch.split_at_mut(np + 4);
            p_sweep_row(row, pad, fl, force[i], model, &spec, dt)
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let per_row: Vec<f64> =
                grid.w.par_chunks_mut(np).enumerate().zip(scratch.par_chunks_mut(chunk)).map(sweep).collect();
            per_row.iter().sum()
        }
        #[cfg(not(feature = "parallel"))]
        {
            grid.w.chunks_mut(np).enumerate().zip(scratch.chunks_mut(chunk)).map(sweep).sum()
        }
    };
    grid.lost_p += lost * spec.dx();
    grid.flux_buf = scratch;
}

/// j = Σ_p (p/m)·W·Δp at the column whose centre is nearest `x`.
pub fn flux_at_barrier(grid: &PhaseSpaceGrid, mass: f64, x: f64) -> Result<f64, FpeError> {
    let s = &grid.spec;
    if !(x >= s.x_min && x <= s.x_max) {
        return Err(FpeError::InvalidGrid(format!("x = {x} outside [{}, {}]", s.x_min, s.x_max)));
    }
    let i = (((x - s.x_min) / s.dx()) as usize).min(s.nx - 1);
    let flux: f64 = (0..s.np).map(|j| s.p(j) / mass * grid.density(i, j)).sum();
    Ok(flux * s.dp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayOptions {
    /// Defaults to the stability bound.
    pub dt: Option<f64>,
    /// Total simulated time.
    pub horizon: f64,
    /// Defaults to 5/γ.
    pub fit_start: Option<f64>,
    pub sample_interval: f64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        DecayOptions { dt: None, horizon: 30.0, fit_start: None, sample_interval: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayResult {
    pub kappa: f64,
    pub fit_window: (f64, f64),
    /// RMS deviation of ln P from the fitted line.
    pub residual: f64,
    /// (t, P) with P the mass at x < x_b.
    pub p_series: Vec<(f64, f64)>,
    /// (t, j) with j the flux through the column nearest x_b.
    pub flux_series: Vec<(f64, f64)>,
    /// j(x_b)/P at the end of the run.
    pub flux_ratio: f64,
    /// Largest bookkeeping error per unit time seen during the run.
    pub bookkeeping_drift: f64,
    pub dt: f64,
    pub grid: GridSpec,
    pub warnings: Vec<String>,
}

impl DecayResult {
    /// CSV with header `t,P`.
    pub fn series_csv(&self) -> String {
        let mut out = String::from("t,P\n");
        for (t, p) in &self.p_series {
            out.push_str(&format!("{t},{p}\n"));
        }
        out
    }

    pub fn to_estimate(&self, inputs: &RateInputs) -> EscapeRateEstimate {
        let mut est = EscapeRateEstimate::new(RateMethod::FokkerPlanck, self.kappa, f64::NAN)
            .with_diagnostic("residual", self.residual)
            .with_diagnostic("flux_ratio", self.flux_ratio)
            .with_diagnostic("bookkeeping_drift", self.bookkeeping_drift)
            .with_diagnostic("dt", self.dt)
            .with_diagnostic("fit_start", self.fit_window.0)
            .with_diagnostic("fit_end", self.fit_window.1)
            .with_diagnostic("barrier_ratio", inputs.barrier_ratio());
        est.warnings = self.warnings.clone();
        est
    }
}

/// Least-squares slope and intercept with the RMS residual.
fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let slope = sxy / sxx;
    let icpt = ym - slope * tm;
    let rms = (pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    (slope, icpt, rms)
}

/// Quasi-stationary decay rate of the well population.
pub fn decay_rate(
    potential: &Potential,
    inputs: &RateInputs,
    spec: &GridSpec,
    options: &DecayOptions,
) -> Result<DecayResult, FpeError> {
    let ratio = inputs.barrier_ratio();
    if !(ratio >= BARRIER_RATIO_RANGE.0 && ratio <= BARRIER_RATIO_RANGE.1) {
        return Err(FpeError::BarrierRatio(ratio));
    }
    let x_b = inputs.features.x_b;
    if !(spec.x_max > x_b && spec.x_min < inputs.features.x_a) {
        return Err(FpeError::InvalidGrid(format!("grid must span x_a and extend beyond x_b = {x_b}")));
    }
    let model = FpeModel::from_potential(potential, inputs.gamma, inputs.diffusion, spec);
    let bound = stability_bound(spec, &model);
    let dt = options.dt.unwrap_or(bound);
    if !(dt > 0.0 && dt <= bound) {
        return Err(FpeError::Unstable { dt, bound });
    }
    let fit_start = options.fit_start.unwrap_or(if inputs.gamma > 0.0 { 5.0 / inputs.gamma } else { 0.0 });
    if !(options.horizon > fit_start && fit_start >= 0.0 && options.sample_interval > 0.0) {
        return Err(FpeError::InvalidOptions(format!(
            "need 0 <= fit_start < horizon and sample_interval > 0 (got {fit_start}, {}, {})",
            options.horizon, options.sample_interval
        )));
    }

    let mut grid = PhaseSpaceGrid::well_gaussian(*spec, XBoundary::Absorbing, inputs)?;
    let per_sample = ((options.sample_interval / dt).round() as usize).max(1);
    let total_steps = (options.horizon / dt).ceil() as usize;
    let mut series = vec![(0.0, grid.mass_left_of(x_b))];
    let mut fluxes = vec![(0.0, flux_at_barrier(&grid, inputs.mass, x_b)?)];
    let mut drift: f64 = 0.0;
    let mut done = 0;
    while done < total_steps {
        let n = per_sample.min(total_steps - done);
        evolve(&mut grid, &model, dt, n)?;
        done += n;
        series.push((grid.time(), grid.mass_left_of(x_b)));
        fluxes.push((grid.time(), flux_at_barrier(&grid, inputs.mass, x_b)?));
        drift = drift.max(grid.bookkeeping_error() / grid.time());
    }

    let window: Vec<(f64, f64)> = series.iter().filter(|(t, _)| *t >= fit_start).map(|&(t, p)| (t, p.ln())).collect();
    let mut warnings = Vec::new();
    if window.len() < 3 {
        return Err(FpeError::InvalidOptions("fit window holds fewer than 3 samples".into()));
    }
    let (slope, _, residual) = linear_fit(&window);
    let kappa = -slope;
    let t0 = window[0].0;
    let t1 = window[window.len() - 1].0;
    let decrement = window[0].1 - window[window.len() - 1].1;
    if decrement.abs() < DECAY_SIGNAL_FLOOR {
        warnings
            .push(format!("decay signal below numerical floor: ln P changed by {decrement:.3e} over the fit window"));
    } else if residual > RESIDUAL_THRESHOLD * decrement.abs() {
        warnings.push(format!("non-exponential decay: fit residual {residual:.3e}"));
    }
    if !(kappa > 0.0) {
        warnings.push(format!("fitted decay rate {kappa:.3e} is not positive"));
    }
    let p_end = series.last().map(|s| s.1).unwrap_or(f64::NAN);
    let flux_ratio = flux_at_barrier(&grid, inputs.mass, x_b)? / p_end;
    let analytic = rate_full(inputs).kappa;
    if analytic > 0.0 && ((kappa - analytic) / analytic).abs() > 0.5 {
        warnings.push(format!("decay rate {kappa:.4e} far from analytic {analytic:.4e}"));
    }
    Ok(DecayResult {
        kappa,
        fit_window: (t0, t1),
        residual,
        p_series: series,
        flux_series: fluxes,
        flux_ratio,
        bookkeeping_drift: drift,
        dt,
        grid: *spec,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(n: usize) -> GridSpec {
        GridSpec { x_min: -4.0, x_max: 4.0, p_max: 4.0, nx: n, np: n }
    }

    #[test]
    fn liouville_conserves_mass() {
        let spec = GridSpec { x_min: -6.0, x_max: 6.0, p_max: 6.0, nx: 128, np: 128 };
        let model = FpeModel::harmonic(0.0, 1.0, 1.0, 0.0, 0.0, &spec);
        let mut g =
            PhaseSpaceGrid::from_fn(spec, XBoundary::Reflecting, |x, p| (-((x - 1.0).powi(2) + p * p) * 4.0).exp())
                .unwrap();
        let m0 = g.total_mass();
        let dt = stability_bound(&spec, &model);
        evolve(&mut g, &model, dt, 1000).unwrap();
        assert!((g.total_mass() - m0).abs() / m0 < 1e-8);
        assert!(g.bookkeeping_error() < 1e-14);
        assert!(g.min_density() >= 0.0);
    }

    #[test]
    fn unstable_step_rejected() {
        let spec = square(32);
        let model = FpeModel::harmonic(0.0, 1.0, 1.0, 1.0, 1.0, &spec);
        let mut g = PhaseSpaceGrid::new(spec, XBoundary::Reflecting).unwrap();
        let bound = stability_bound(&spec, &model);
        match evolve(&mut g, &model, 2.0 * bound, 1) {
            Err(FpeError::Unstable { bound: b, .. }) => assert_eq!(b, bound),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cold_start_momentum_spreading() {
        let spec = GridSpec { x_min: -1.0, x_max: 1.0, p_max: 1.0, nx: 8, np: 201 };
        let (m, gamma, d) = (1.0, 0.5, 0.2);
        let model = FpeModel::flat(m, gamma, d, &spec);
        let mut g = PhaseSpaceGrid::new(spec, XBoundary::Reflecting).unwrap();
        for i in 0..spec.nx {
            g.set_density(i, 100, 1.0);
        }
        let dt = 0.25 * stability_bound(&spec, &model);
        let steps = 4;
        evolve(&mut g, &model, dt, steps).unwrap();
        let rate = g.moments().2 / (dt * steps as f64);
        let expected = 2.0 * m * gamma * d;
        assert!((rate - expected).abs() / expected < 0.05, "{rate} vs {expected}");
    }

    #[test]
    fn odd_flux_vanishes_and_single_cell() {
        let spec = square(16);
        let mut g = PhaseSpaceGrid::from_fn(spec, XBoundary::Reflecting, |x, p| (-x * x - p * p).exp()).unwrap();
        assert!(flux_at_barrier(&g, 1.0, 0.3).unwrap().abs() < 1e-15);

        g = PhaseSpaceGrid::new(spec, XBoundary::Reflecting).unwrap();
        let (i, j) = (9, 12);
        g.set_density(i, j, 2.0);
        let cell_mass = 2.0 * g.cell_area();
        let mass = 1.5;
        let f = flux_at_barrier(&g, mass, spec.x(i)).unwrap();
        let expected = spec.p(j) / mass * cell_mass / spec.dx();
        assert!((f - expected).abs() < 1e-14 * expected.abs());
        assert!(flux_at_barrier(&g, mass, 10.0).is_err());
    }

    #[test]
    fn flux_limiter_properties() {
        assert_eq!(limited(1.0, -1.0), 0.0);
        assert_eq!(limited(1.0, 1.0), 1.0);
        assert!(limited(1e-300, 1.0) >= 0.0);
        // First-order upwind on a step
        assert_eq!(flux_right(2.0, 0.5, 0.0, 1.0, 0.0), 2.0);
        assert_eq!(flux_left(-2.0, 0.5, 0.0, 1.0, 1.0), -2.0);
    }

    #[test]
    fn csv_headers() {
        let spec = GridSpec { x_min: 0.0, x_max: 4.0, p_max: 2.0, nx: 4, np: 4 };
        let g = PhaseSpaceGrid::new(spec, XBoundary::Absorbing).unwrap();
        let csv = g.to_csv();
        assert!(csv.starts_with("x,p,W\n0.5,-1.5,0\n"));
        assert_eq!(csv.lines().count(), 17);
    }

    #[test]
    fn invalid_grid() {
        let bad = GridSpec { x_min: 1.0, x_max: 0.0, p_max: 1.0, nx: 8, np: 8 };
        assert!(PhaseSpaceGrid::new(bad, XBoundary::Absorbing).is_err());
        let tiny = GridSpec { x_min: 0.0, x_max: 1.0, p_max: 1.0, nx: 2, np: 8 };
        assert!(tiny.validate().is_err());
    }
}
