//! Numerical toolkit for fractional caloric capacities.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: the s-parabolic metric, cubes, dilations and hierarchical
//!   Hausdorff-content covers;
//! * [`quadrature`] and [`kernels`]: adaptive Gauss-Kronrod integration and
//!   the fractional heat kernels `P_s` (closed forms for `s = 1/2` and
//!   `s = 1`, a tabulated self-similar profile otherwise);
//! * [`measures`]: discrete measures on segments and corner Cantor sets and
//!   their parabolic growth constants;
//! * [`potentials`] and [`fractional`]: potentials against discrete measures,
//!   sup/BMO/Lipschitz estimators and the fractional time derivative;
//! * [`lp`] and [`capacity`]: a dense simplex solver and capacity lower/upper
//!   bounds.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`, which is what the CLI and the
//! acceptance suite use.

pub mod capacity;
pub mod error;
pub mod fractional;
pub mod geometry;
pub mod kernels;
pub mod lp;
pub mod measures;
pub mod potentials;
pub mod quadrature;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type FracParams = geometry::FracParams<f64>;
pub type SpacetimePoint = geometry::SpacetimePoint<f64>;
pub type ParabolicCube = geometry::ParabolicCube<f64>;
pub type SetDescriptor = geometry::SetDescriptor<f64>;
pub type KernelProfile = kernels::KernelProfile<f64>;
pub type KernelKind = kernels::KernelKind<f64>;
pub type DiscreteMeasure = measures::DiscreteMeasure<f64>;
pub type SignedDiscreteMeasure = measures::SignedDiscreteMeasure<f64>;
pub type GridSpec = potentials::GridSpec<f64>;
pub type CapacityEstimate = capacity::CapacityEstimate<f64>;
