//! Exact geometry of finite-dimensional polyhedral normed spaces, and the
//! machinery to recover the linear map behind an onto isometry of their unit
//! spheres.
//!
//! The crate has three layers:
//!
//! * exact convex geometry: [`ball::PolyBall`] holds a symmetric polytope
//!   with both vertex and facet descriptions, its face lattice, support
//!   functionals, tangent cones and smoothness radii, all in rational
//!   arithmetic;
//! * sphere maps and their differential behaviour: [`maps::SphereMap`] wraps
//!   linear, piecewise-linear and black-box maps between unit spheres, and
//!   [`differential`] computes difference-quotient limits, tangent and dual
//!   transports, one-sided derivatives and linearity defects along dyadic
//!   step schedules;
//! * extension and search: [`extension`] recovers per-facet matrices from a
//!   sphere map and stitches them into one certified linear isometry, while
//!   [`iso`] enumerates all linear isometries between two balls by exhaustive
//!   vertex matching, as an independent ground truth.
//!
//! The `polysphere` binary exposes the same operations over JSON files; see
//! [`formats`] for the schemas and [`verify`] for the report produced by
//! `polysphere verify lemmas`.

pub mod ball;
pub mod cli;
pub mod corpus;
pub mod differential;
pub mod error;
pub mod extension;
pub mod formats;
pub mod iso;
pub mod linalg;
pub mod lp;
pub mod maps;
pub mod verify;

pub use ball::PolyBall;
pub use cli::run;
pub use error::{Error, Result};
pub use linalg::{Functional, Matrix, Rational, Vector};

