//! Numerical geodesics of O(n)-invariant positive Lagrangian spheres
//! (matching cycles) in n-dimensional A_m Milnor fibers.
//!
//! The Milnor fiber `M^n = { z_1^2 + … + z_n^2 = f(ζ) }` of a polynomial `f`
//! with simple zeros carries the holomorphic volume form
//! `Ω = dz_1 ∧ … ∧ dz_n / f'(ζ)`. An O(n)-invariant Lagrangian sphere fibered
//! over a curve joining two zeros of `f` is determined by its one-dimensional
//! shadow, a symmetric circle `u ↦ (z(u), ζ(u))` in `M^1`. This crate
//! discretizes that shadow and computes with it:
//!
//! * [`fiber`] — the polynomial data, root finding, and branch-tracked square
//!   roots of `f` along paths in the ζ-plane;
//! * [`cycle`] — symmetric circles, positivity, the measure induced by
//!   `Re Ω`, and the weak Riemannian metric Υ on invariant functions;
//! * [`foliation`] — the horizontal foliation of `M^1`, its extension to the
//!   real blowup at the zeros of `f`, leaf tracing, and leafwise matching of
//!   cycles;
//! * [`geodesic`] — initial-value and boundary-value geodesic solvers, the
//!   induced distance, leafwise transport, and verification of the geodesic
//!   and flatness identities.

pub mod cycle;
pub mod error;
pub mod fiber;
pub mod foliation;
pub mod geodesic;
pub mod json;
pub mod tolerance;

pub use cycle::{InvariantFunction, PositivityReport, SymmetricCircle};
pub use error::{Error, ErrorClass, Result};
pub use fiber::MilnorFiber;
pub use foliation::{ChartPoint, ChartTangent, LeafTrace, MatchResult, SingularAngles};
pub use geodesic::{GeodesicPath, TransportMap};
pub use tolerance::ToleranceProfile;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
