//! The horizontal foliation of `M^1 \ {z = 0}` and its smooth extension to
//! the real blowup of `M^1` at the zeros of `f`.
//!
//! Away from the zeros, the foliation is tangent to
//! `τ(p) = { v : dζ(v) ∈ i z^{2-n} ℝ }`. Near a zero `ζ_j`, `z` is a local
//! coordinate; in polar coordinates `z = r e^{iθ}` (with `r` allowed to be
//! negative) the pulled-back direction field extends smoothly to
//!
//! ```text
//! X̃ = |f'(ζ)| r cos(π/2 + arg f'(ζ) - nθ) ∂_r
//!    + |f'(ζ)| sin(π/2 + arg f'(ζ) - nθ) ∂_θ ,
//! ```
//!
//! which is tangent to the exceptional divisor `E_j = {r = 0}` and vanishes
//! exactly at the 2n angles solving `nθ - arg f'(ζ_j) ∈ π/2 + πℤ`.

mod matching;
mod trace;

pub use matching::{horizontal_match, MatchPoint, MatchResult};
pub use trace::{trace_leaf, HitInfo, LeafSegment, LeafTrace, StopRule, Termination, TraceNode};
pub(crate) use trace::Tracer;

use crate::cycle::z_int_pow;
use crate::error::{Error, Result};
use crate::fiber::MilnorFiber;
use crate::C64;

use std::f64::consts::PI;

/// A point of the blown-up surface, in one of the two chart families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChartPoint {
    /// Chart away from the zeros of `f`: the point `(z, ζ)` of `M^1` itself.
    Zeta { z: C64, zeta: C64 },
    /// Polar chart over root `j`: `z = r e^{iθ}`, with `r` possibly negative;
    /// `r = 0` is the exceptional divisor.
    Polar { root: usize, r: f64, theta: f64 },
}

/// Tangent vector in chart components.
#[derive(Debug, Clone, Copy)]
pub enum ChartTangent {
    /// dζ component in the ζ-chart.
    Zeta(C64),
    /// (dr, dθ) components in a polar chart.
    Polar { dr: f64, dtheta: f64 },
}

impl ChartTangent {
    pub fn norm(&self) -> f64 {
        match self {
            ChartTangent::Zeta(v) => v.norm(),
            ChartTangent::Polar { dr, dtheta } => (dr * dr + dtheta * dtheta).sqrt(),
        }
    }

    pub fn dot(&self, other: &ChartTangent) -> f64 {
        match (self, other) {
            (ChartTangent::Zeta(a), ChartTangent::Zeta(b)) => a.re * b.re + a.im * b.im,
            (
                ChartTangent::Polar { dr: a, dtheta: b },
                ChartTangent::Polar { dr: c, dtheta: d },
            ) => a * c + b * d,
            _ => 0.0,
        }
    }

    pub fn neg(&self) -> ChartTangent {
        match self {
            ChartTangent::Zeta(v) => ChartTangent::Zeta(-v),
            ChartTangent::Polar { dr, dtheta } => {
                ChartTangent::Polar { dr: -dr, dtheta: -dtheta }
            }
        }
    }
}

/// The 2n angles on the exceptional divisor over root `j` at which the
/// blowup field vanishes; equally spaced by π/n.
#[derive(Debug, Clone)]
pub struct SingularAngles {
    pub root: usize,
    pub angles: Vec<f64>,
}

/// Solve `nθ - arg f'(ζ_j) ∈ π/2 + πℤ` for the 2n angles in `[0, 2π)`.
pub fn singular_angles(fiber: &MilnorFiber, root: usize) -> SingularAngles {
    let n = fiber.n();
    let base = fiber.eval_fprime(fiber.roots()[root]).arg();
    let mut angles: Vec<f64> = (0..2 * n)
        .map(|k| {
            let theta = (base + PI / 2.0 + k as f64 * PI) / n as f64;
            theta.rem_euclid(2.0 * PI)
        })
        .collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    SingularAngles { root, angles }
}

/// Polar chart radius (in |z|) of root `j`: a fixed fraction of the distance
/// to the nearest other root, measured through the quadratic model
/// `|ζ - ζ_j| ≈ |z|² / |f'(ζ_j)|` so the local inverse stays well
/// conditioned inside the chart.
pub fn chart_radius(fiber: &MilnorFiber, root: usize) -> f64 {
    let zj = fiber.roots()[root];
    let mut d = f64::INFINITY;
    for (i, &r) in fiber.roots().iter().enumerate() {
        if i != root {
            d = d.min((r - zj).norm());
        }
    }
    if !d.is_finite() {
        d = fiber.scale();
    }
    let fp = fiber.eval_fprime(zj).norm();
    fiber.tolerances().chart_radius_factor * (d * fp).sqrt()
}

/// The inverse of `z ↦ ζ(z)` near root `j`: solve `f(ζ) = z²` on the branch
/// through `ζ_j` by Newton, seeded with the quadratic model.
pub fn local_inverse(fiber: &MilnorFiber, root: usize, z: C64) -> Result<C64> {
    let zj = fiber.roots()[root];
    let w = z * z;
    let mut zeta = zj + w / fiber.eval_fprime(zj);
    for _ in 0..60 {
        let fp = fiber.eval_fprime(zeta);
        if fp.norm() == 0.0 {
            return Err(Error::BranchFailure("f' vanished during local inverse".into()));
        }
        let step = (fiber.eval_f(zeta) - w) / fp;
        zeta -= step;
        if step.norm() < 1e-13 * (1.0 + zeta.norm()) {
            return Ok(zeta);
        }
    }
    Err(Error::BranchFailure("local inverse did not converge".into()))
}

impl ChartPoint {
    /// The underlying point `(z, ζ)` of `M^1` (on the divisor, `z = 0` and
    /// `ζ` is the root itself).
    pub fn position(&self, fiber: &MilnorFiber) -> Result<(C64, C64)> {
        match *self {
            ChartPoint::Zeta { z, zeta } => Ok((z, zeta)),
            ChartPoint::Polar { root, r, theta } => {
                let z = C64::from_polar(r.abs(), if r < 0.0 { theta + PI } else { theta });
                let zeta = if r == 0.0 {
                    fiber.roots()[root]
                } else {
                    local_inverse(fiber, root, z)?
                };
                Ok((z, zeta))
            }
        }
    }

    /// Distance to the singular set in the (r, θ) metric; infinite in the
    /// ζ-chart (the singular set lives on the exceptional divisors).
    pub fn singular_distance(&self, fiber: &MilnorFiber) -> f64 {
        match *self {
            ChartPoint::Zeta { .. } => f64::INFINITY,
            ChartPoint::Polar { root, r, theta } => {
                let sing = singular_angles(fiber, root);
                let mut best = f64::INFINITY;
                for &a in &sing.angles {
                    // r may be negative: the same point appears at (−r, θ+π).
                    for (rr, tt) in [(r, theta), (-r, theta + PI)] {
                        if rr >= -1e-300 {
                            let dth = wrap_angle(tt - a);
                            best = best.min((rr * rr + dth * dth).sqrt());
                        }
                    }
                }
                best
            }
        }
    }
}

/// Wrap an angle into (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// Unit tangent of the horizontal foliation at `p`, in chart components.
///
/// The sign is chosen to align with `prev` when given; on a first call the
/// caller fixes the sign. Errors with [`Error::AtSingularity`] inside the
/// exclusion radius of the singular set.
pub fn direction(
    fiber: &MilnorFiber,
    p: &ChartPoint,
    prev: Option<&ChartTangent>,
) -> Result<ChartTangent> {
    if p.singular_distance(fiber) < fiber.tolerances().sing_radius {
        return Err(Error::AtSingularity);
    }
    let raw = direction_unchecked(fiber, p)?;
    Ok(match prev {
        Some(d) if raw.dot(d) < 0.0 => raw.neg(),
        _ => raw,
    })
}

pub(crate) fn direction_unchecked(fiber: &MilnorFiber, p: &ChartPoint) -> Result<ChartTangent> {
    match *p {
        ChartPoint::Zeta { z, zeta: _ } => {
            if z.norm() == 0.0 {
                return Err(Error::AtSingularity);
            }
            let v = C64::i() * z_int_pow(z, 2 - fiber.n() as i32);
            Ok(ChartTangent::Zeta(v / v.norm()))
        }
        ChartPoint::Polar { root, r, theta } => {
            let z = C64::from_polar(r.abs(), if r < 0.0 { theta + PI } else { theta });
            let zeta = if r == 0.0 {
                fiber.roots()[root]
            } else {
                local_inverse(fiber, root, z)?
            };
            let fp = fiber.eval_fprime(zeta);
            let a = PI / 2.0 + fp.arg() - fiber.n() as f64 * theta;
            let dr = r * a.cos();
            let dtheta = a.sin();
            let norm = (dr * dr + dtheta * dtheta).sqrt();
            if norm < 1e-300 {
                return Err(Error::AtSingularity);
            }
            Ok(ChartTangent::Polar { dr: dr / norm, dtheta: dtheta / norm })
        }
    }
}

/// The blowup field X̃ itself (not normalized), in polar components.
pub fn blowup_field(fiber: &MilnorFiber, root: usize, r: f64, theta: f64) -> Result<(f64, f64)> {
    let z = C64::from_polar(r.abs(), if r < 0.0 { theta + PI } else { theta });
    let zeta = if r == 0.0 {
        fiber.roots()[root]
    } else {
        local_inverse(fiber, root, z)?
    };
    let fp = fiber.eval_fprime(zeta);
    let a = PI / 2.0 + fp.arg() - fiber.n() as f64 * theta;
    Ok((fp.norm() * r * a.cos(), fp.norm() * a.sin()))
}

/// Pullback symplectic area of the pair (a, b) at `p`.
///
/// In the ζ-chart, `ω = g(ζ) dξ∧dη` with `g = 1 + |f'(ζ)|²/(4|f(ζ)|)`;
/// in a polar chart, `π*ω = r ψ(z) dr∧dθ` with `ψ = 1 + 4|z|²/|f'(ζ)|²`,
/// which vanishes on the exceptional divisor.
pub fn area_form(
    fiber: &MilnorFiber,
    p: &ChartPoint,
    a: &ChartTangent,
    b: &ChartTangent,
) -> Result<f64> {
    match (*p, a, b) {
        (ChartPoint::Zeta { z: _, zeta }, ChartTangent::Zeta(va), ChartTangent::Zeta(vb)) => {
            let fz = fiber.eval_f(zeta);
            if fz.norm() < 1e-300 {
                return Err(Error::AtBranchPoint);
            }
            let g = 1.0 + fiber.eval_fprime(zeta).norm_sqr() / (4.0 * fz.norm());
            Ok(g * (va.conj() * vb).im)
        }
        (
            ChartPoint::Polar { root, r, theta },
            ChartTangent::Polar { dr: ar, dtheta: at },
            ChartTangent::Polar { dr: br, dtheta: bt },
        ) => {
            let z = C64::from_polar(r.abs(), if r < 0.0 { theta + PI } else { theta });
            let zeta = if r == 0.0 {
                fiber.roots()[root]
            } else {
                local_inverse(fiber, root, z)?
            };
            let psi = 1.0 + 4.0 * z.norm_sqr() / fiber.eval_fprime(zeta).norm_sqr();
            Ok(r * psi * (ar * bt - at * br))
        }
        _ => Err(Error::InvalidInput(
            "area_form arguments must share the point's chart".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn std_fiber(n: u32) -> Arc<MilnorFiber> {
        Arc::new(MilnorFiber::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)], n).unwrap())
    }

    #[test]
    fn vertical_direction_for_n2() {
        let fiber = std_fiber(2);
        for (z, zeta) in [(c(1.0, 0.0), c(0.0, 0.0)), (c(0.8, 0.3), c(0.2, 0.4))] {
            let p = ChartPoint::Zeta { z, zeta };
            let d = direction(&fiber, &p, None).unwrap();
            match d {
                ChartTangent::Zeta(v) => {
                    assert!(v.re.abs() < 1e-15, "leaves must be vertical, got {v}");
                    assert!((v.norm() - 1.0).abs() < 1e-14);
                }
                _ => panic!("expected zeta chart tangent"),
            }
        }
    }

    #[test]
    fn horizontal_direction_example_n3() {
        // At (z, ζ) = (i√3, 2): i z^{-1} = i/(i√3) = 1/√3 is real.
        let fiber = std_fiber(3);
        let p = ChartPoint::Zeta { z: c(0.0, 3f64.sqrt()), zeta: c(2.0, 0.0) };
        let d = direction(&fiber, &p, None).unwrap();
        match d {
            ChartTangent::Zeta(v) => assert!(v.im.abs() < 1e-14, "expected horizontal, got {v}"),
            _ => panic!("expected zeta chart tangent"),
        }
    }

    #[test]
    fn polar_field_on_divisor_example() {
        // Root +1 of f = 1-ζ², arg f' = π, n = 2, at (r, θ) = (0, 0):
        // X̃ = |−2| sin(π/2 + π) ∂_θ = −2 ∂_θ.
        let fiber = std_fiber(2);
        let (xr, xt) = blowup_field(&fiber, 1, 0.0, 0.0).unwrap();
        assert!(xr.abs() < 1e-14);
        assert!((xt + 2.0).abs() < 1e-12, "got {xt}");
    }

    #[test]
    fn singular_angles_example_n2() {
        let fiber = std_fiber(2);
        for root in [0usize, 1] {
            let s = singular_angles(&fiber, root);
            let expect = [PI / 4.0, 3.0 * PI / 4.0, 5.0 * PI / 4.0, 7.0 * PI / 4.0];
            assert_eq!(s.angles.len(), 4);
            for (a, e) in s.angles.iter().zip(expect) {
                assert!((a - e).abs() < 1e-12, "angle {a} vs {e}");
            }
        }
    }

    #[test]
    fn singular_angle_count_n1() {
        let fiber = std_fiber(1);
        let s = singular_angles(&fiber, 0);
        assert_eq!(s.angles.len(), 2);
        assert!((wrap_angle(s.angles[1] - s.angles[0]).abs() - PI).abs() < 1e-12);
    }

    #[test]
    fn blowup_field_vanishes_at_singular_angles_and_alternates() {
        for n in [2u32, 3, 5] {
            let fiber = std_fiber(n);
            for root in [0usize, 1] {
                let s = singular_angles(&fiber, root);
                assert_eq!(s.angles.len(), 2 * n as usize);
                for &a in &s.angles {
                    let (xr, xt) = blowup_field(&fiber, root, 0.0, a).unwrap();
                    assert!((xr * xr + xt * xt).sqrt() <= 1e-10, "n={n} θ={a}");
                }
                // Between consecutive singular angles the θ-component keeps
                // one sign, and the sign alternates across angles.
                let mut last_sign = 0.0f64;
                for w in 0..s.angles.len() {
                    let a0 = s.angles[w];
                    let a1 = if w + 1 < s.angles.len() {
                        s.angles[w + 1]
                    } else {
                        s.angles[0] + 2.0 * PI
                    };
                    let probes = [0.25, 0.5, 0.75];
                    let mut sign = 0.0;
                    for t in probes {
                        let th = a0 + t * (a1 - a0);
                        let (_, xt) = blowup_field(&fiber, root, 0.0, th).unwrap();
                        if sign == 0.0 {
                            sign = xt.signum();
                        }
                        assert!(xt.signum() == sign, "sign change inside sector");
                    }
                    if last_sign != 0.0 {
                        assert!(sign == -last_sign, "sectors must alternate");
                    }
                    last_sign = sign;
                }
            }
        }
    }

    #[test]
    fn area_form_zeta_chart_matches_ambient_pullback() {
        // Independent oracle: ω(a, b) for ζ-chart tangents a, b lifts to
        // ambient tangents (f'/(2z)·a, a), (f'/(2z)·b, b) on z² = f(ζ), and
        // ω_ambient = Im(conj(a_z) b_z) + Im(conj(a_ζ) b_ζ).
        let fiber = std_fiber(2);
        for (zeta, a, b) in [
            (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)),
            (c(0.3, 0.2), c(0.5, -0.1), c(0.2, 0.9)),
            (c(-0.4, 0.6), c(1.0, 1.0), c(-0.3, 0.4)),
        ] {
            let z = fiber.eval_f(zeta).sqrt();
            let p = ChartPoint::Zeta { z, zeta };
            let got = area_form(
                &fiber,
                &p,
                &ChartTangent::Zeta(a),
                &ChartTangent::Zeta(b),
            )
            .unwrap();
            let lift = fiber.eval_fprime(zeta) / (z * 2.0);
            let (az, bz) = (lift * a, lift * b);
            let oracle = (az.conj() * bz).im + (a.conj() * b).im;
            assert!((got - oracle).abs() < 1e-12, "ζ={zeta}: {got} vs {oracle}");
        }
    }

    #[test]
    fn area_form_at_origin_of_f_equals_one() {
        // f = 1-ζ², ζ = 0: f'(0) = 0, so g = 1 and the form is the plain
        // Euclidean area there.
        let fiber = std_fiber(2);
        let p = ChartPoint::Zeta { z: c(1.0, 0.0), zeta: c(0.0, 0.0) };
        let v = area_form(
            &fiber,
            &p,
            &ChartTangent::Zeta(c(1.0, 0.0)),
            &ChartTangent::Zeta(c(0.0, 1.0)),
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-14, "got {v}");
    }

    #[test]
    fn area_form_vanishes_on_divisor_and_is_antisymmetric() {
        let fiber = std_fiber(3);
        let p = ChartPoint::Polar { root: 1, r: 0.0, theta: 0.3 };
        let a = ChartTangent::Polar { dr: 1.0, dtheta: 0.2 };
        let b = ChartTangent::Polar { dr: -0.4, dtheta: 1.0 };
        assert_eq!(area_form(&fiber, &p, &a, &b).unwrap(), 0.0);
        let q = ChartPoint::Polar { root: 1, r: 0.2, theta: 0.3 };
        let ab = area_form(&fiber, &q, &a, &b).unwrap();
        let ba = area_form(&fiber, &q, &b, &a).unwrap();
        assert!((ab + ba).abs() < 1e-14);
        assert!(ab != 0.0);
    }

    #[test]
    fn area_form_errors_at_branch_point() {
        let fiber = std_fiber(2);
        let p = ChartPoint::Zeta { z: c(0.0, 0.0), zeta: c(1.0, 0.0) };
        let err = area_form(
            &fiber,
            &p,
            &ChartTangent::Zeta(c(1.0, 0.0)),
            &ChartTangent::Zeta(c(0.0, 1.0)),
        )
        .unwrap_err();
        assert!(matches!(err, Error::AtBranchPoint));
    }

    #[test]
    fn chart_consistency_of_local_inverse() {
        let fiber = std_fiber(3);
        for root in [0usize, 1] {
            let rc = chart_radius(&fiber, root);
            assert!(rc > 0.1);
            for k in 0..12 {
                let theta = 2.0 * PI * k as f64 / 12.0 + 0.13;
                let z = C64::from_polar(0.7 * rc, theta);
                let zeta = local_inverse(&fiber, root, z).unwrap();
                assert!((fiber.eval_f(zeta) - z * z).norm() < 1e-11);
                assert!((zeta - fiber.roots()[root]).norm() < 0.5 * fiber.root_sep());
            }
        }
    }

    #[test]
    fn direction_errors_at_singularity() {
        let fiber = std_fiber(2);
        let s = singular_angles(&fiber, 1);
        let p = ChartPoint::Polar { root: 1, r: 0.0, theta: s.angles[0] };
        assert!(matches!(direction(&fiber, &p, None), Err(Error::AtSingularity)));
    }
}
