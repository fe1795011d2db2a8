//! Metric operations built on the boundary-value solver: distance, leafwise
//! transport of invariant functions, and the flatness identities.

use crate::cycle::{InvariantFunction, SymmetricCircle};
use crate::error::{Error, Result};
use crate::geodesic::{bvp_solve, ivp_solve, Generator, GeodesicPath, TransportMap};

use std::f64::consts::PI;

/// Geodesic distance `√Υ(ĥ, ĥ)`, the constant speed of the connecting
/// geodesic.
pub fn distance(gamma0: &SymmetricCircle, gamma1: &SymmetricCircle) -> Result<f64> {
    let path = bvp_solve(gamma0, gamma1, &[])?;
    let Generator::Bvp { h, .. } = &path.generator else { unreachable!() };
    gamma0.norm(h)
}

/// Leafwise identification of gamma0 with gamma1.
pub fn transport(gamma0: &SymmetricCircle, gamma1: &SymmetricCircle) -> Result<TransportMap> {
    let m = crate::foliation::horizontal_match(gamma0, gamma1)?;
    TransportMap::from_match(&m)
}

/// Pull an invariant function on gamma1 back to gamma0 along the transport map,
/// by cubic interpolation on gamma1's grid.
pub fn pullback(map: &TransportMap, h: &InvariantFunction) -> Result<InvariantFunction> {
    let values: Vec<f64> = map.v.iter().map(|&v| interp_even(h, v)).collect();
    InvariantFunction::from_values(values)
}

/// Catmull-Rom interpolation of an even grid function at parameter v ∈ [0, π].
fn interp_even(h: &InvariantFunction, v: f64) -> f64 {
    let n = h.n_half();
    let du = PI / n as f64;
    let x = (v / du).clamp(0.0, n as f64);
    let j = (x.floor() as i64).min(n as i64 - 1);
    let t = x - j as f64;
    let (p0, p1, p2, p3) = (
        h.value_full(j - 1),
        h.value_full(j),
        h.value_full(j + 1),
        h.value_full(j + 2),
    );
    0.5 * (2.0 * p1
        + (-p0 + p2) * t
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
        + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t)
}

/// Flatness through the triangle identity
/// `ĥ_{0,2} = ĥ_{0,1} + φ*_{Λ0,Λ1} ĥ_{1,2}`; returns the Υ-relative
/// residual on gamma0.
pub fn triangle_identity(
    gamma0: &SymmetricCircle,
    gamma1: &SymmetricCircle,
    gamma2: &SymmetricCircle,
) -> Result<f64> {
    let h02 = generating_velocity(gamma0, gamma2)?;
    let h01 = generating_velocity(gamma0, gamma1)?;
    let h12 = generating_velocity(gamma1, gamma2)?;
    let map01 = transport(gamma0, gamma1)?;
    let pulled = pullback(&map01, &h12)?;
    let sum = h01.axpy(1.0, &pulled, 1.0)?;
    let sum = gamma0.project_mean_zero(&sum)?;
    let diff = h02.axpy(1.0, &sum, -1.0)?;
    // Degenerate triples (e.g. γ2 = γ0) have ‖ĥ02‖ = 0; normalize by the
    // scale of the triangle instead of blowing up.
    let denom = gamma0
        .norm(&h02)?
        .max(gamma0.norm(&h01)?)
        .max(gamma0.norm(&pulled)?)
        .max(1e-12);
    Ok(gamma0.norm(&diff)? / denom)
}

fn generating_velocity(a: &SymmetricCircle, b: &SymmetricCircle) -> Result<InvariantFunction> {
    let path = bvp_solve(a, b, &[])?;
    let Generator::Bvp { h, .. } = path.generator else { unreachable!() };
    Ok(h)
}

/// Exponential-map isometry check:
/// `|d(exp(h1), exp(h2)) - ‖h1 - h2‖_Υ| / ‖h1 - h2‖_Υ`.
pub fn exp_isometry_check(
    gamma0: &SymmetricCircle,
    h1: &InvariantFunction,
    h2: &InvariantFunction,
    dt: f64,
) -> Result<f64> {
    let e1 = exp_endpoint(gamma0, h1, dt)?;
    let e2 = exp_endpoint(gamma0, h2, dt)?;
    let d = distance(&e1, &e2)?;
    let base = gamma0.norm(&h1.axpy(1.0, h2, -1.0)?)?;
    if base < 1e-12 {
        return Ok(d);
    }
    Ok((d - base).abs() / base)
}

fn exp_endpoint(
    gamma0: &SymmetricCircle,
    h: &InvariantFunction,
    dt: f64,
) -> Result<SymmetricCircle> {
    let path: GeodesicPath = ivp_solve(gamma0, h, 1.0, dt)?;
    if !path.reached(1.0) {
        return Err(Error::HorizonReached(
            path.diagnostics
                .horizon
                .unwrap_or_else(|| "geodesic stopped before t = 1".into()),
        ));
    }
    Ok(path.endpoint().clone())
}

#[cfg(test)]
pub(crate) fn tests_interp(h: &InvariantFunction, v: f64) -> f64 {
    interp_even(h, v)
}
