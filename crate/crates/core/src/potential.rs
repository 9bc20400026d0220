//! One-dimensional polynomial metastable potentials and their well/barrier
//! features.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of uniform samples used to bracket critical points.
const SCAN_SAMPLES: usize = 10_000;
/// Bisection stops once the bracket is narrower than this.
const POSITION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("potential must be at least cubic (got degree {0})")]
    DegreeTooLow(usize),
    #[error("mass must be finite and positive (got {0})")]
    InvalidMass(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no metastable structure in [{lo}, {hi}]")]
    NoMetastableStructure { lo: f64, hi: f64 },
    #[error("ambiguous interval [{lo}, {hi}]: {minima} minima and {maxima} maxima")]
    AmbiguousInterval { lo: f64, hi: f64, minima: usize, maxima: usize },
    #[error("infeasible shape: {0}")]
    InfeasibleShape(String),
}

/// U(x) = Σ cₖ xᵏ in reduced units, together with the particle mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPotential")]
pub struct Potential {
    coefficients: Vec<f64>,
    mass: f64,
}

#[derive(Deserialize)]
struct RawPotential {
    coefficients: Vec<f64>,
    mass: f64,
}

impl TryFrom<RawPotential> for Potential {
    type Error = PotentialError;

    fn try_from(raw: RawPotential) -> Result<Self, Self::Error> {
        Potential::new(raw.coefficients, raw.mass)
    }
}

impl Potential {
    /// Coefficients in ascending degree. Trailing zeros are dropped before the
    /// degree check.
    pub fn new(mut coefficients: Vec<f64>, mass: f64) -> Result<Self, PotentialError> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(PotentialError::InvalidMass(mass));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(PotentialError::InvalidArgument("non-finite coefficient".into()));
        }
        while coefficients.last() == Some(&0.0) {
            coefficients.pop();
        }
        let degree = coefficients.len().saturating_sub(1);
        if degree < 3 {
            return Err(PotentialError::DegreeTooLow(degree));
        }
        Ok(Potential { coefficients, mass })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// (U(x), U'(x)) by Horner's scheme.
    pub fn evaluate(&self, x: f64) -> (f64, f64) {
        let mut u = 0.0;
        let mut du = 0.0;
        for &c in self.coefficients.iter().rev() {
            du = du * x + u;
            u = u * x + c;
        }
        (u, du)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.evaluate(x).0
    }

    pub fn gradient(&self, x: f64) -> f64 {
        self.evaluate(x).1
    }

    pub fn curvature(&self, x: f64) -> f64 {
        // Second derivative, Horner on k(k-1) c_k x^{k-2}.
        self.coefficients.iter().enumerate().skip(2).rev().fold(0.0, |acc, (k, &c)| acc * x + (k * (k - 1)) as f64 * c)
    }

    /// Copy shifted by a constant so that U(x_ref) = 0.
    pub fn shifted_to_zero_at(&self, x_ref: f64) -> Potential {
        let mut coefficients = self.coefficients.clone();
        coefficients[0] -= self.value(x_ref);
        Potential { coefficients, mass: self.mass }
    }

    /// Locate the well minimum and barrier top inside `[lo, hi]`.
    pub fn analyze(&self, lo: f64, hi: f64) -> Result<WellFeatures, PotentialError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(PotentialError::InvalidArgument(format!("bad search interval [{lo}, {hi}]")));
        }
        let mut minima = Vec::new();
        let mut maxima = Vec::new();
        let step = (hi - lo) / SCAN_SAMPLES as f64;
        let mut x_prev = lo;
        let mut g_prev = self.gradient(lo);
        for i in 1..=SCAN_SAMPLES {
            let x = if i == SCAN_SAMPLES { hi } else { lo + step * i as f64 };
            let g = self.gradient(x);
            // Exact zeros are skipped so that the bracket spans them; a tangent
            // zero (inflection) then produces no sign change at all.
            let crosses = (g_prev < 0.0 && g > 0.0) || (g_prev > 0.0 && g < 0.0);
            if crosses {
                let root = self.bisect_gradient(x_prev, x);
                if g_prev < 0.0 {
                    minima.push(root);
                } else {
                    maxima.push(root);
                }
            }
            if g != 0.0 {
                x_prev = x;
                g_prev = g;
            }
        }

        if minima.len() > 1 || maxima.len() > 1 {
            return Err(PotentialError::AmbiguousInterval { lo, hi, minima: minima.len(), maxima: maxima.len() });
        }
        let (x_a, x_b) = match (minima.first(), maxima.first()) {
            (Some(&a), Some(&b)) if a < b => (a, b),
            _ => return Err(PotentialError::NoMetastableStructure { lo, hi }),
        };
        let (u_a, _) = self.evaluate(x_a);
        let (u_b, _) = self.evaluate(x_b);
        let k_a = self.curvature(x_a);
        let k_b = self.curvature(x_b);
        let delta_u = u_b - u_a;
        if !(k_a > 0.0 && k_b < 0.0 && delta_u > 0.0) {
            // Degenerate (flat) critical points.
            return Err(PotentialError::NoMetastableStructure { lo, hi });
        }
        Ok(WellFeatures {
            x_a,
            x_b,
            omega_a: (k_a / self.mass).sqrt(),
            omega_b: (-k_b / self.mass).sqrt(),
            delta_u,
            u_a,
        })
    }

    /// Root of U' in a sign-changing bracket: bisection to POSITION_TOL, then
    /// a few guarded Newton polishes.
    fn bisect_gradient(&self, mut a: f64, mut b: f64) -> f64 {
        let mut ga = self.gradient(a);
        if self.gradient(b) == 0.0 {
            return b;
        }
        while (b - a).abs() > POSITION_TOL {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let gm = self.gradient(m);
            if gm == 0.0 {
                return m;
            }
            if (gm < 0.0) == (ga < 0.0) {
                a = m;
                ga = gm;
            } else {
                b = m;
            }
        }
        let mut x = 0.5 * (a + b);
        for _ in 0..3 {
            let g = self.gradient(x);
            let k = self.curvature(x);
            if k == 0.0 {
                break;
            }
            let next = x - g / k;
            if (next - x).abs() > 1e-9 || !next.is_finite() {
                break;
            }
            x = next;
        }
        x
    }
}

/// Harmonic features of the well bottom and barrier top.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellFeatures {
    pub x_a: f64,
    pub x_b: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    pub delta_u: f64,
    /// Raw U(x_a) before normalization; rate formulas take U(x_a) = 0.
    #[serde(default)]
    pub u_a: f64,
}

impl WellFeatures {
    /// Features of an idealized well given directly by its harmonic data.
    pub fn from_parts(x_a: f64, x_b: f64, omega_a: f64, omega_b: f64, delta_u: f64) -> Self {
        WellFeatures { x_a, x_b, omega_a, omega_b, delta_u, u_a: 0.0 }
    }

    pub fn frequency_ratio(&self) -> f64 {
        self.omega_b / self.omega_a
    }

    /// Default absorbing point x_c = x_b + 2(x_b − x_a).
    pub fn default_absorbing_point(&self) -> f64 {
        self.x_b + 2.0 * (self.x_b - self.x_a)
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), PotentialError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(PotentialError::InvalidArgument(format!("{name} must be positive (got {v})")))
    }
}

/// U(x) = ½mω²x² − (mω²/3x_s)x³ with ΔU = mω²x_s²/6, so x_a = 0, x_b = x_s
/// and ω_b = ω_a.
pub fn make_cubic(omega_a: f64, delta_u: f64, mass: f64) -> Result<Potential, PotentialError> {
    check_positive("omega_a", omega_a)?;
    check_positive("delta_u", delta_u)?;
    check_positive("mass", mass)?;
    let k = mass * omega_a * omega_a;
    let x_s = (6.0 * delta_u / k).sqrt();
    Potential::new(vec![0.0, 0.0, 0.5 * k, -k / (3.0 * x_s)], mass)
}

/// Quartic U(x) = a₂x² + a₃x³ + a₄x⁴ with U''(0) = mω_a², U''(x_b) = −mω_b²
/// and U(x_b) = ΔU.
///
/// Writing t = x/x_b, the constraints solve to
/// a₂ = mω_a²/2, a₃x_b = m(ω_b² − 2ω_a²)/3, a₄x_b² = m(ω_a² − ω_b²)/4 and
/// x_b² = 12ΔU / (m(ω_a² + ω_b²)). Every positive input is feasible. The
/// remaining critical point of U sits at t = ω_a²/(ω_a² − ω_b²): left of the
/// well when ω_b > ω_a, a second minimum beyond the barrier when ω_b < ω_a,
/// and absent (the cubic) when they are equal.
pub fn make_quartic(omega_a: f64, omega_b: f64, delta_u: f64, mass: f64) -> Result<Potential, PotentialError> {
    check_positive("omega_a", omega_a)?;
    check_positive("omega_b", omega_b)?;
    check_positive("delta_u", delta_u)?;
    check_positive("mass", mass)?;
    let wa2 = omega_a * omega_a;
    let wb2 = omega_b * omega_b;
    let x_b = (12.0 * delta_u / (mass * (wa2 + wb2))).sqrt();
    let a2 = 0.5 * mass * wa2;
    let a3 = mass * (wb2 - 2.0 * wa2) / (3.0 * x_b);
    let a4 = mass * (wa2 - wb2) / (4.0 * x_b * x_b);
    if ![x_b, a2, a3, a4].iter().all(|v| v.is_finite()) {
        return Err(PotentialError::InfeasibleShape(format!(
            "coefficients overflow for omega_a={omega_a}, omega_b={omega_b}, delta_u={delta_u}"
        )));
    }
    let mut coefficients = vec![0.0, 0.0, a2, a3, a4];
    if a4 == 0.0 {
        coefficients.pop();
    }
    Potential::new(coefficients, mass)
}

/// A search interval that brackets exactly the well and barrier of a
/// potential built by [`make_quartic`] (or [`make_cubic`]).
pub fn shape_interval(omega_a: f64, omega_b: f64, delta_u: f64, mass: f64) -> (f64, f64) {
    let wa2 = omega_a * omega_a;
    let wb2 = omega_b * omega_b;
    let x_b = (12.0 * delta_u / (mass * (wa2 + wb2))).sqrt();
    let mut lo = -x_b;
    let mut hi = 1.5 * x_b;
    if wb2 != wa2 {
        let t_other = wa2 / (wa2 - wb2);
        if t_other < 0.0 {
            lo = lo.max(0.5 * t_other * x_b);
        } else {
            hi = hi.min(0.5 * (1.0 + t_other) * x_b);
        }
    }
    (lo, hi)
}
