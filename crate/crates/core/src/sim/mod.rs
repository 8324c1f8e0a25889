//! Deterministic and linear-noise simulation of reaction networks.

mod field;
mod integrate;
mod observe;
mod output;
mod run;
mod symbolic;

pub use field::{build_ode, mass_action_flux, StateLayout, SystemSpec, VectorField};
pub use integrate::{integrate, FnSystem, OdeSystem, Solution, Tolerances};
pub use observe::{observe, psd_violation, LinearCombination, Observer, ObserverSeries, Timecourse};
pub(crate) use output::escape_xml;
pub use output::{format_float, timecourse_csv, timecourse_svg};
pub use run::{simulate, Probe, PSD_TOLERANCE};
pub use symbolic::symbolic_odes;

use thiserror::Error;

/// Avogadro constant, 1/mol.
pub const AVOGADRO: f64 = 6.022_140_76e23;

/// Default relative tolerance.
pub const DEFAULT_RTOL: f64 = 1e-6;
/// Default absolute tolerance.
pub const DEFAULT_ATOL: f64 = 1e-8;
/// Default number of output points.
pub const DEFAULT_POINTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("step size underflow at t={t} (dt={dt:e}); system looks stiff, fastest-changing species: {species}")]
    Stiff { t: f64, dt: f64, species: String },
    #[error("non-finite value at t={t}; last good state {last_good:?}")]
    NonFinite { t: f64, last_good: Vec<f64> },
    #[error("concentration of {species} keeps going negative at t={t}")]
    Negative { t: f64, species: String },
    #[error("rate of reaction {reaction} is not differentiable in {species} at t={t}; the noise approximation needs differentiable kinetics")]
    NonDifferentiable { reaction: usize, species: String, t: f64 },
    #[error("{stat} needs covariances; enable the linear noise approximation (--lna)")]
    NeedsLna { stat: &'static str },
    #[error("observer is not a linear combination of species: {0}")]
    NotLinear(String),
    #[error("invalid integration request: {0}")]
    InvalidInput(String),
}
