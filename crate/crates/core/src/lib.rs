//! Critical-point structure of quantum gate-fidelity landscapes on U(N):
//! kinematic landscapes, their critical strata, Schrödinger dynamics for
//! dipole control, and descent methods.
//!
//! Everything is generic over the real scalar (`f32` or `f64`); the aliases
//! below fix the common double-precision instances.

pub mod atlas;
pub mod dynamics;
pub mod error;
pub mod gates;
pub mod io;
pub mod landscapes;
pub mod matgeom;
pub mod optimize;
pub mod scalar;

pub use error::{Error, Result};
pub use nalgebra;

pub type UnitaryMatrix64 = matgeom::UnitaryMatrix<f64>;
pub type UnitaryMatrix32 = matgeom::UnitaryMatrix<f32>;
pub type TangentVector64 = matgeom::TangentVector<f64>;
pub type WeightSpectrum64 = matgeom::WeightSpectrum<f64>;
pub type LandscapeSpec64 = landscapes::LandscapeSpec<f64>;
pub type LandscapeSpec32 = landscapes::LandscapeSpec<f32>;
pub type CriticalStratum64 = atlas::CriticalStratum<f64>;
pub type ControlProblem64 = dynamics::ControlProblem<f64>;
pub type ControlField64 = dynamics::ControlField<f64>;
pub type FlowTrace64 = optimize::FlowTrace<f64>;
