//! Survival probabilities for joint-liability lending groups with default
//! contagion between members.
//!
//! * [`model`]: exact subset enumeration for heterogeneous groups, with
//!   constant or delayed contagion.
//! * [`homogeneous`]: closed forms for identical members and uniform contagion.
//! * [`optimizer`]: analytic bounds on the optimal group size and the finite
//!   search over sizes.
//! * [`monte_carlo`]: a seeded simulator of the full model, used as an
//!   independent oracle.
//!
//! The exact evaluators are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiation.

pub mod error;
pub mod homogeneous;
pub mod lambert;
pub mod model;
pub mod monte_carlo;
pub mod optimizer;
pub mod scalar;

pub use error::{Error, Result};
pub use lambert::lambert_w_minus1;
pub use model::{SubsetMask, N_MAX_CONSTANT, N_MAX_DELAYED};
pub use monte_carlo::{
    estimate_survival, sample_trial, ContagionSchedule, DefaultFamily, DefaultTimeDistribution,
    Interpolation, SimulationSpec, SurvivalEstimate, TrialOutcome,
};
pub use scalar::Scalar;

pub type Probability = model::Probability<f64>;
pub type ContagionMatrix = model::ContagionMatrix<f64>;
pub type GroupSpec = model::GroupSpec<f64>;
pub type AllDefaultBreakdown = model::AllDefaultBreakdown<f64>;
pub type HomogeneousSpec = homogeneous::HomogeneousSpec<f64>;
pub type TailBound = optimizer::TailBound<f64>;
pub type BoundReport = optimizer::BoundReport<f64>;
pub type SizeSearchResult = optimizer::SizeSearchResult<f64>;

pub type GroupSpec32 = model::GroupSpec<f32>;
pub type HomogeneousSpec32 = homogeneous::HomogeneousSpec<f32>;
