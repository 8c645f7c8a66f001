//! Intermittent quasistatic dynamical systems built from Pomeau–Manneville
//! maps `T_α`.
//!
//! Maps and their inverse branches live in [`pm_map`], parameter curves and
//! triangular arrays of parameters in [`param_curve`], Ulam discretisations
//! of transfer operators in [`transfer_op`], the invariant cone and the
//! decomposition of observables into cone pieces in [`cone`], and time
//! averages, their limits and correlations in [`ergodic`].
//!
//! Everything is generic over `f32`/`f64` through [`Real`]; the aliases
//! below fix the precision.

pub mod cone;
pub mod ergodic;
pub mod error;
pub mod observable;
pub mod param_curve;
pub mod pm_map;
mod scalar;
pub mod transfer_op;

pub use error::{QdsError, Result};
pub use scalar::Real;

pub type PmMap64 = pm_map::PmMap<f64>;
pub type PmMap32 = pm_map::PmMap<f32>;
pub type MapSequence64 = pm_map::MapSequence<f64>;
pub type Curve64 = param_curve::PiecewiseHolderCurve<f64>;
pub type GridDensity64 = transfer_op::GridDensity<f64>;
pub type GridDensity32 = transfer_op::GridDensity<f32>;
pub type UlamOperator64 = transfer_op::UlamOperator<f64>;
pub type UlamOperator32 = transfer_op::UlamOperator<f32>;
pub type OperatorCache64 = transfer_op::OperatorCache<f64>;
pub type ConeParams64 = cone::ConeParams<f64>;
