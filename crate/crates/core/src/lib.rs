//! Asymptotic mutual information, MMSE and phase transitions of symmetric
//! rank-one matrix estimation with a discrete prior.
//!
//! The analytic core ([`prior`], [`potential`], [`state_evolution`]) is generic
//! over the scalar type; the aliases below fix it to `f64`.

pub mod amp;
pub mod channels;
pub mod error;
pub mod numeric;
pub mod oracle;
pub mod phase;
pub mod potential;
pub mod prior;
pub mod quadrature;
pub mod scalar;
pub mod state_evolution;

pub use error::{Error, Result};
pub use prior::{DiscretePrior, PriorRecord, ScalarModel};
pub use quadrature::{GaussianQuadrature, QuadratureRule};
pub use scalar::Real;

pub type Prior = DiscretePrior<f64>;
pub type Model = ScalarModel<f64>;
pub type Thresholds = potential::Thresholds<f64>;
pub type SeTrajectory = state_evolution::SeTrajectory<f64>;
pub type CoupledRun = state_evolution::CoupledRun<f64>;
