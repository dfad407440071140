//! Finite-sample workbench for coarsely convex metric spaces.
//!
//! The crate works on finite point samples: a [`FiniteMetricSpace`] with a
//! [`GeodesicSystem`] of sampled quasi-geodesics. On top of that it fits the
//! convexity constants, derives the constant table, computes Gromov products
//! of rays, clusters rays into an approximate ideal boundary, and audits the
//! quantitative lemmas (cone maps, contraction schedule, bicombing, function
//! classification) on the sample.
//!
//! Heavy scans take an [`Exec`] argument. With the default `parallel`
//! feature they run on rayon; without it every policy falls back to the
//! sequential loop. Results do not depend on the policy.

#![allow(clippy::too_many_arguments, clippy::large_enum_variant)]

pub mod boundary;
pub mod cone;
pub mod constants;
pub mod convexity;
pub mod error;
pub mod exec;
pub mod functions;
pub mod homotopy;
pub mod io;
pub mod metric;
pub mod path;
pub mod products;
pub mod real;
pub mod sample;
pub mod spaces;
pub mod system;

pub use constants::{derive_constants, ConstantTable};
pub use convexity::{ConvexityCertificate, ThetaTable};
pub use error::{CcxError, Result};
pub use exec::Exec;
pub use metric::{FiniteMetricSpace, Metric, PointId};
pub use path::{DiscretePath, PathKind};
pub use system::GeodesicSystem;

/// Absolute tolerance used for all distance comparisons.
pub const TOL: f64 = 1e-9;
