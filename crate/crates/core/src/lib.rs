//! Numerical verification toolkit for the linearized Liouville eigenvalue
//! problem and the Alexandrov-Bol inequality.
//!
//! The crate discretizes planar domains (disks, annuli, conformal images of
//! the unit disk) with linear triangles and provides:
//!
//! * [`mesh`]: structured polar meshes with exact boundary reprojection,
//! * [`fields`]: the explicit `U_λ` family, Liouville residual checks, a
//!   damped Newton solver for the Dirichlet problem and the scaling gauge,
//! * [`spectral`]: the first eigenpair of `-Δφ = ν e^w φ` with Dirichlet data,
//! * [`levelset`]: level-set statistics, Bol/Huber/isoperimetric defects and
//!   the multiply-connected audit chains,
//! * [`rearrange`]: the weighted equimeasurable decreasing rearrangement,
//! * [`conformal`]: univalent maps of the unit disk and pullback metrics,
//! * [`scenario`]: named experiments with CSV output.

pub mod config;
pub mod conformal;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod levelset;
pub mod mesh;
pub mod quadrature;
pub mod rearrange;
pub mod scenario;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
pub use fields::ScalarField;
pub use geometry::Point;
pub use mesh::Mesh;

/// `8π`, the full-plane mass of every `U_λ`.
pub const EIGHT_PI: f64 = 8.0 * std::f64::consts::PI;
