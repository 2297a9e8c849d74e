//! Numerical laboratory for harmonic functions that vanish on a boundary
//! patch of a C1-Dini graph domain.
//!
//! The library is organized as a pipeline:
//!
//! * [`modulus`] - Dini moduli of continuity and the derived decay moduli
//!   that control every quantitative statement downstream.
//! * [`geometry`] - graph domains, boundary-adapted orthogonal frames,
//!   flattening charts, and the elliptic coefficient field produced by
//!   flattening.
//! * [`hhp`] - homogeneous harmonic polynomials: exact basis construction,
//!   half-ball inner products, projections, and derivatives of the
//!   fundamental solution.
//! * [`field`] - the scalar field abstraction shared by exact polynomial
//!   fixtures and grid-backed solutions.
//! * [`solver`] - a Dirichlet solver for the flattened divergence-form
//!   equation on half balls, with odd reflection across the flat boundary.
//! * [`frequency`] - Almgren frequency, its boundary-adapted modification,
//!   vanishing orders, and doubling exponents.
//! * [`expansion`] - blow-up sequences, tangent extraction by two
//!   independent routes, error-band fits, and tangent continuity.
//! * [`config`] / [`scenario`] / [`report`] - the command line surface:
//!   key-value configs, named verification scenarios, and deterministic
//!   CSV/JSON reports.

pub mod config;
pub mod error;
pub mod expansion;
pub mod field;
pub mod frequency;
pub mod geometry;
pub mod hhp;
pub mod linalg;
pub mod modulus;
pub mod quad;
pub mod report;
pub mod scenario;
pub mod solver;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
