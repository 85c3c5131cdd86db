//! Spatial accessibility of primary care: a constrained patient-to-physician
//! assignment model, policy scenario simulation, and space-varying
//! coefficient inference.
//!
//! Numeric kernels (linear programming, distance, density, entropy, Moran's
//! I) are generic over [`Scalar`]; the aliases below fix them to `f64`.

pub mod assignment;
pub mod lp;
pub mod metrics;
pub mod model;
pub mod policy;
pub mod rng;
mod scalar;
pub mod spatial;
pub mod svcm;

pub use scalar::Scalar;

pub type LinearProgram = lp::LinearProgram<f64>;
pub type LpSolution = lp::LpSolution<f64>;
pub type FlowNetwork = lp::FlowNetwork<f64>;
pub type FlowSolution = lp::FlowSolution<f64>;
pub type Kde = spatial::Kde<f64>;
