//! Geodesic solvers and the metric structure they induce.
//!
//! The initial-value solver flows markers along the leaves of the blown-up
//! foliation under the pseudo-Hamiltonian field of `h₀∘P`; the
//! boundary-value solver matches two cycles leafwise, computes the flow time
//! `s(u)` of the field of `cos(u)∘P` along each connecting leaf segment, and
//! integrates `dh = s dk` to recover the generating velocity. Both produce a
//! [`GeodesicPath`] of positive symmetric-circle snapshots.

mod bvp;
mod ivp;
mod ops;
#[cfg(test)]
mod tests;
mod verify;

pub use bvp::bvp_solve;
pub use ivp::ivp_solve;
pub use ops::{distance, exp_isometry_check, pullback, transport, triangle_identity};
pub use verify::{check_horizontal_family, horizontal_reparametrize, verify_geodesic};

use crate::cycle::{InvariantFunction, SymmetricCircle};
use crate::error::{Error, Result};
use crate::foliation::MatchResult;

/// What generated a geodesic path.
#[derive(Debug, Clone)]
pub enum Generator {
    Ivp { h0: InvariantFunction },
    Bvp { s: Vec<f64>, h: InvariantFunction, matches: MatchResult },
}

/// Per-run diagnostics of a geodesic solve.
#[derive(Debug, Clone, Default)]
pub struct PathDiagnostics {
    /// Smallest positivity margin over all snapshots.
    pub min_positivity_margin: f64,
    /// Largest pre-projection marker drift off its leaf (IVP only).
    pub max_leaf_drift: f64,
    /// Largest leaf-condition residual of the underlying traces.
    pub max_leaf_residual: f64,
    /// Early-stop reason when the solve did not reach the requested time.
    pub horizon: Option<String>,
    /// Divisor crossing angles (u = 0, π) per recorded time.
    pub endpoint_theta: Vec<[f64; 2]>,
    /// Residual of the independent swept-area cross-check (BVP only).
    pub cross_check_residual: Option<f64>,
}

/// A time-indexed family of symmetric-circle snapshots along a geodesic.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub times: Vec<f64>,
    pub snapshots: Vec<SymmetricCircle>,
    pub generator: Generator,
    pub diagnostics: PathDiagnostics,
}

impl GeodesicPath {
    pub fn endpoint(&self) -> &SymmetricCircle {
        self.snapshots.last().expect("path has at least one snapshot")
    }

    pub fn reached(&self, t: f64) -> bool {
        self.times.last().map_or(false, |&last| last >= t - 1e-12)
    }
}

/// Leafwise identification of γ0 with γ1: `v[k]` is the γ1-parameter of the
/// point sharing the leaf of γ0(u_k). Strictly increasing from 0 to π.
#[derive(Debug, Clone)]
pub struct TransportMap {
    pub v: Vec<f64>,
}

impl TransportMap {
    pub(crate) fn from_match(m: &MatchResult) -> Result<Self> {
        for w in m.v.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::DoubleIntersection);
            }
        }
        Ok(TransportMap { v: m.v.clone() })
    }
}

/// Cumulative integral of a derivative sampled on the half grid, 4th order:
/// each interval is integrated with the cubic through its four surrounding
/// nodes. Returns the primitive with value 0 at k = 0.
pub(crate) fn cumulative_integral(dv: &[f64], du: f64) -> Vec<f64> {
    let n = dv.len() - 1;
    let mut out = vec![0.0; n + 1];
    let val = |i: i64| -> f64 {
        // Odd extension: the integrand is odd about 0 and π.
        let m = 2 * n as i64;
        let mut k = i.rem_euclid(m);
        let mut s = 1.0;
        if k > n as i64 {
            k = m - k;
            s = -1.0;
        }
        s * dv[k as usize]
    };
    for k in 0..n {
        let i = k as i64;
        let (f0, f1, f2, f3) = (val(i - 1), val(i), val(i + 1), val(i + 2));
        out[k + 1] = out[k] + du * (-f0 + 13.0 * f1 + 13.0 * f2 - f3) / 24.0;
    }
    out
}

#[cfg(test)]
mod quadrature_tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cumulative_integral_of_sine() {
        let n = 64;
        let du = PI / n as f64;
        let dv: Vec<f64> = (0..=n).map(|k| (k as f64 * du).sin()).collect();
        let prim = cumulative_integral(&dv, du);
        for k in 0..=n {
            let expect = 1.0 - (k as f64 * du).cos();
            assert!(
                (prim[k] - expect).abs() < 1e-6,
                "k={k}: {} vs {expect}",
                prim[k]
            );
        }
    }
}
