//! Classical Kramers escape rates from metastable wells driven by thermal and
//! zero-point radiation.
//!
//! The analytic rate lives in [`kramers`]; [`langevin`] and [`fokker_planck`]
//! are independent numerical engines for the same quantity, and [`fit`]
//! recovers well parameters from measured κ(T) tables.

pub mod bath;
pub mod fit;
pub mod fokker_planck;
pub mod kramers;
pub mod langevin;
pub mod potential;
mod quadrature;
pub mod units;

pub use bath::Bath;
pub use kramers::{rate_full, rate_paper_fit, EscapeRateEstimate, RateInputs, RateMethod};
pub use potential::{Potential, WellFeatures};
pub use units::{Dimension, ReducedUnits, CONSTANTS};
