//! Leafwise matching of two positive cycles: for every marker of gamma0, the
//! unique point of gamma1 on the same leaf of the blown-up foliation.

use rayon::prelude::*;

use crate::cycle::SymmetricCircle;
use crate::error::{Error, Result};
use crate::foliation::trace::{LeafSegment, StopRule, Termination, Tracer};
use crate::foliation::{wrap_angle, ChartPoint};
use crate::C64;

use std::f64::consts::PI;

/// A matched point on gamma1, with both chart and M¹ coordinates.
#[derive(Debug, Clone)]
pub struct MatchPoint {
    pub chart: ChartPoint,
    pub z: C64,
    pub zeta: C64,
}

/// Output of [`horizontal_match`]: per grid index k, the leafwise image of
/// gamma0(u_k) on gamma1, the gamma1-parameter of the match, the leaf arclength of the
/// connecting segment, and the traced segments themselves.
#[derive(Debug, Clone)]
pub struct MatchResult {
    pub beta1: Vec<MatchPoint>,
    pub v: Vec<f64>,
    pub s_arclength: Vec<f64>,
    /// Traced leaves for interior k (entries 0 and N are on the divisor).
    pub leaves: Vec<Option<LeafSegment>>,
    /// Divisor crossing angles of the two strict transforms at u = 0, π.
    pub theta0: [f64; 2],
    pub theta1: [f64; 2],
}

/// Squared ℂ²-distance from a point to a segment, plus the segment parameter.
fn point_segment_c2(p: (C64, C64), a: (C64, C64), b: (C64, C64)) -> (f64, f64) {
    let dz = b.0 - a.0;
    let dzeta = b.1 - a.1;
    let len2 = dz.norm_sqr() + dzeta.norm_sqr();
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0).conj() * dz).re + ((p.1 - a.1).conj() * dzeta).re) / len2
    }
    .clamp(0.0, 1.0);
    let qz = a.0 + dz * t;
    let qzeta = a.1 + dzeta * t;
    ((p.0 - qz).norm_sqr() + (p.1 - qzeta).norm_sqr(), t)
}

/// Distance in ℂ² from a point of M¹ to the full circle polyline; returns
/// (distance, parameter v folded into [0, π]).
fn distance_to_circle(z: C64, zeta: C64, c: &SymmetricCircle) -> (f64, f64) {
    let two_n = 2 * c.n_half();
    let mut best = (f64::INFINITY, 0.0f64);
    for m in 0..two_n {
        let a = (c.z_full(m as i64), c.zeta_full(m as i64));
        let b = (c.z_full(m as i64 + 1), c.zeta_full(m as i64 + 1));
        let (d2, t) = point_segment_c2((z, zeta), a, b);
        if d2 < best.0 {
            let v = (m as f64 + t) * PI / c.n_half() as f64;
            let v = if v > PI { 2.0 * PI - v } else { v };
            best = (d2, v);
        }
    }
    (best.0.sqrt(), best.1)
}

/// For each marker of gamma0, trace its leaf (both orientations if needed)
/// until it crosses gamma1 on the correct sheet; endpoints are matched on the
/// exceptional divisor by the θ-coordinate of the strict transforms.
pub fn horizontal_match(gamma0: &SymmetricCircle, gamma1: &SymmetricCircle) -> Result<MatchResult> {
    let fiber = gamma0.fiber();
    if fiber.n() < 2 {
        return Err(Error::InvalidInput("leafwise matching requires n >= 2".into()));
    }
    if !std::sync::Arc::ptr_eq(fiber, gamma1.fiber())
        && (fiber.coeffs() != gamma1.fiber().coeffs() || fiber.n() != gamma1.fiber().n())
    {
        return Err(Error::NotIsotopic("cycles live on different fibers".into()));
    }
    if gamma0.root_at_0() != gamma1.root_at_0() || gamma0.root_at_pi() != gamma1.root_at_pi() {
        return Err(Error::NotIsotopic(
            "cycles span different root pairs (or opposite order)".into(),
        ));
    }
    gamma0.require_positive()?;
    gamma1.require_positive()?;

    let n = gamma0.n_half();
    let scale = fiber.scale();
    let budget = fiber.tolerances().match_arclength_factor * scale;
    let snap = 1e-10 * scale;

    let interior: Vec<Result<(MatchPoint, f64, f64, Option<LeafSegment>)>> = (1..n)
        .into_par_iter()
        .map(|k| {
            let start_z = gamma0.z()[k];
            let start_zeta = gamma0.zeta()[k];
            // Already on the target: identity match.
            let (d, v) = distance_to_circle(start_z, start_zeta, gamma1);
            if d < snap {
                return Ok((
                    MatchPoint {
                        chart: ChartPoint::Zeta { z: start_z, zeta: start_zeta },
                        z: start_z,
                        zeta: start_zeta,
                    },
                    v,
                    0.0,
                    None,
                ));
            }
            let tracer = Tracer::new(fiber);
            let start = ChartPoint::Zeta { z: start_z, zeta: start_zeta };
            let mut last_err: Option<Error> = None;
            for sign in [1i8, -1] {
                let rule = StopRule::HitCurve { target: gamma1, max_arclength: budget };
                match tracer.trace(&start, sign, &rule) {
                    Ok(trace) => match &trace.termination {
                        Termination::HitCurve(info) => {
                            let mp = MatchPoint { chart: info.point, z: info.z, zeta: info.zeta };
                            let v = info.v;
                            let ell = info.arclength;
                            return Ok((mp, v, ell, Some(LeafSegment::new(trace))));
                        }
                        Termination::Arclength | Termination::LeftDomain => {
                            last_err = Some(Error::NoIntersection);
                        }
                        Termination::NearSingularity => {
                            last_err = Some(Error::SingularityApproach);
                        }
                        Termination::StepCollapse => {
                            last_err = Some(Error::StepCollapse);
                        }
                    },
                    Err(e) => return Err(e),
                }
            }
            Err(last_err.unwrap_or(Error::NoIntersection))
        })
        .collect();

    let mut beta1 = Vec::with_capacity(n + 1);
    let mut v = Vec::with_capacity(n + 1);
    let mut s_arclength = Vec::with_capacity(n + 1);
    let mut leaves: Vec<Option<LeafSegment>> = Vec::with_capacity(n + 1);

    // Endpoint match on the divisor: the strict transform meets the
    // exceptional divisor along the direction of approach of z, which is
    // +z'(0) at u = 0 and -z'(π) at u = π.
    let theta0 = [gamma0.dz_du(0).arg(), (-gamma0.dz_du(gamma0.n_half())).arg()];
    let theta1 = [gamma1.dz_du(0).arg(), (-gamma1.dz_du(gamma1.n_half())).arg()];

    beta1.push(MatchPoint {
        chart: ChartPoint::Polar { root: gamma0.root_at_0(), r: 0.0, theta: theta1[0] },
        z: C64::new(0.0, 0.0),
        zeta: fiber.roots()[gamma0.root_at_0()],
    });
    v.push(0.0);
    s_arclength.push(wrap_angle(theta1[0] - theta0[0]).abs());
    leaves.push(None);

    for item in interior {
        let (mp, vk, ell, leaf) = item?;
        beta1.push(mp);
        v.push(vk);
        s_arclength.push(ell);
        leaves.push(leaf);
    }

    beta1.push(MatchPoint {
        chart: ChartPoint::Polar { root: gamma0.root_at_pi(), r: 0.0, theta: theta1[1] },
        z: C64::new(0.0, 0.0),
        zeta: fiber.roots()[gamma0.root_at_pi()],
    });
    v.push(PI);
    s_arclength.push(wrap_angle(theta1[1] - theta0[1]).abs());
    leaves.push(None);

    Ok(MatchResult { beta1, v, s_arclength, leaves, theta0, theta1 })
}
