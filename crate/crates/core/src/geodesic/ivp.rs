//! Initial-value geodesic solver: method of lines along precomputed leaves.
//!
//! Interior markers obey `∂_t q_k = λ_k T(q_k)` with
//! `λ_k = h₀'(u_k) / ω(T(q_k), D_u q_k)` — the pseudo-Hamiltonian flow of
//! `h₀∘P`, expressed through the moving front. Markers at the poles live on
//! the exceptional divisors and obey `dθ/dt = -χ_r / ψ(0)`, with `χ_r` the
//! limit of `∂_r(h₀∘P)/r` obtained from an even quadratic fit through the
//! two nearest interior markers. Classical RK4 in time; after every step
//! each marker is projected back onto its stored leaf trace and the
//! pre-projection drift is logged.

use crate::cycle::{InvariantFunction, SymmetricCircle};
use crate::error::{Error, Result};
use crate::fiber::MilnorFiber;
use crate::foliation::{
    area_form, direction_unchecked, ChartPoint, ChartTangent, LeafSegment, StopRule, Termination,
    Tracer,
};
use crate::geodesic::{Generator, GeodesicPath, PathDiagnostics};
use crate::C64;

#[derive(Clone, Copy, PartialEq)]
enum Frame {
    Z,
    P(usize),
}

fn frame_of(p: &ChartPoint) -> (Frame, [f64; 2]) {
    match *p {
        ChartPoint::Zeta { zeta, .. } => (Frame::Z, [zeta.re, zeta.im]),
        ChartPoint::Polar { root, r, theta } => (Frame::P(root), [r, theta]),
    }
}

/// (z, ζ) of a frame point, continuing the z-branch from `z_ref`.
fn materialize(fiber: &MilnorFiber, frame: Frame, y: [f64; 2], z_ref: C64) -> Result<(C64, C64)> {
    match frame {
        Frame::Z => {
            let zeta = C64::new(y[0], y[1]);
            Ok((fiber.sqrt_f_near(zeta, z_ref), zeta))
        }
        Frame::P(j) => {
            let z = C64::new(y[0], 0.0) * C64::from_polar(1.0, y[1]);
            let zeta = if y[0] == 0.0 {
                fiber.roots()[j]
            } else {
                crate::foliation::local_inverse(fiber, j, z)?
            };
            Ok((z, zeta))
        }
    }
}

/// Both-sided precomputed leaf of one marker, coordinatized by signed
/// arclength (positive along the canonical orientation).
struct MarkerLeaf {
    fwd: LeafSegment,
    bwd: LeafSegment,
}

impl MarkerLeaf {
    fn build(fiber: &MilnorFiber, start: &ChartPoint, budget: f64) -> Result<Self> {
        let tracer = Tracer::new(fiber);
        let mk = |sign: i8| -> Result<LeafSegment> {
            let trace = tracer.trace(start, sign, &StopRule::MaxArclength(budget))?;
            if matches!(trace.termination, Termination::StepCollapse) {
                return Err(Error::StepCollapse);
            }
            Ok(LeafSegment::new(trace))
        };
        Ok(MarkerLeaf { fwd: mk(1)?, bwd: mk(-1)? })
    }

    fn nearest(&self, fiber: &MilnorFiber, z: C64, zeta: C64) -> Result<(f64, f64)> {
        let (lf, df) = self.fwd.project(fiber, z, zeta)?;
        let (lb, db) = self.bwd.project(fiber, z, zeta)?;
        Ok(if df <= db { (lf, df) } else { (-lb, db) })
    }

    fn point_at(&self, fiber: &MilnorFiber, ell: f64) -> Result<(ChartPoint, C64, C64)> {
        if ell >= 0.0 {
            self.fwd.point_at(fiber, ell)
        } else {
            self.bwd.point_at(fiber, -ell)
        }
    }

    /// Extend coverage to |ell| + margin; returns false when the needed side
    /// ends at an obstruction (singularity, domain edge) before the target.
    fn ensure(&mut self, fiber: &MilnorFiber, ell: f64, margin: f64) -> Result<bool> {
        let (seg, need) = if ell >= 0.0 {
            (&mut self.fwd, ell + margin)
        } else {
            (&mut self.bwd, -ell + margin)
        };
        if seg.end_arclength() >= need {
            return Ok(true);
        }
        seg.extend_to(fiber, need + margin)?;
        Ok(seg.end_arclength() >= need)
    }

    fn max_residual(&self) -> f64 {
        self.fwd.trace.max_leaf_residual.max(self.bwd.trace.max_leaf_residual)
    }
}

struct MarkerState {
    leaf: MarkerLeaf,
    chart: ChartPoint,
    z: C64,
    zeta: C64,
}

/// Solve the geodesic initial value problem from `gamma0` with velocity `dh0`,
/// up to time `t_final` with RK4 step `dt`. Returns a truncated path with
/// the horizon flag set if positivity or the singular-set guard fails
/// before `t_final`.
pub fn ivp_solve(
    gamma0: &SymmetricCircle,
    h0: &InvariantFunction,
    t_final: f64,
    dt: f64,
) -> Result<GeodesicPath> {
    if h0.n_half() != gamma0.n_half() {
        return Err(Error::InvalidInput("h0 grid does not match the cycle grid".into()));
    }
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(Error::InvalidInput("need dt > 0 and t_final >= 0".into()));
    }
    gamma0.require_positive()?;
    let fiber = gamma0.fiber().clone();
    let n = gamma0.n_half();
    let du = gamma0.du();
    let h0 = gamma0.project_mean_zero(h0)?;
    let dh: Vec<f64> = (0..=n).map(|k| h0.derivative(k)).collect();

    // Precompute marker leaves.
    let budget0 = 0.5 * fiber.scale();
    let mut markers: Vec<MarkerState> = Vec::with_capacity(n - 1);
    for k in 1..n {
        let start = ChartPoint::Zeta { z: gamma0.z()[k], zeta: gamma0.zeta()[k] };
        let leaf = MarkerLeaf::build(&fiber, &start, budget0)?;
        markers.push(MarkerState { leaf, chart: start, z: gamma0.z()[k], zeta: gamma0.zeta()[k] });
    }
    // Divisor crossing angles of the strict transform: the approach
    // direction is +z'(0) at u = 0 but -z'(π) at u = π (u - π < 0 there).
    let mut theta = [gamma0.dz_du(0).arg(), (-gamma0.dz_du(n)).arg()];
    let roots = [gamma0.root_at_0(), gamma0.root_at_pi()];

    let mut times = vec![0.0];
    let mut snapshots = vec![gamma0.clone()];
    let mut diag = PathDiagnostics {
        min_positivity_margin: gamma0.check_positive().margin,
        endpoint_theta: vec![theta],
        ..Default::default()
    };

    let n_steps = (t_final / dt).ceil() as usize;
    let mut t = 0.0;
    'time: for _step in 0..n_steps {
        let h_step = dt.min(t_final - t);
        if h_step <= 1e-15 {
            break;
        }

        // Frames and base coordinates frozen for this step.
        let frames: Vec<(Frame, [f64; 2])> = markers.iter().map(|m| frame_of(&m.chart)).collect();
        let z_refs: Vec<C64> = markers.iter().map(|m| m.z).collect();

        // Derivative of the full front at given stage coordinates.
        let deriv = |ys: &[[f64; 2]], th: [f64; 2]| -> Result<(Vec<[f64; 2]>, [f64; 2])> {
            let mut zs = Vec::with_capacity(n - 1);
            let mut zetas = Vec::with_capacity(n - 1);
            for (i, &(fr, _)) in frames.iter().enumerate() {
                let (z, zeta) = materialize(&fiber, fr, ys[i], z_refs[i])?;
                zs.push(z);
                zetas.push(zeta);
            }
            let mut out = Vec::with_capacity(n - 1);
            for i in 0..n - 1 {
                let (fr, _) = frames[i];
                let p = match fr {
                    Frame::Z => ChartPoint::Zeta { z: zs[i], zeta: zetas[i] },
                    Frame::P(j) => ChartPoint::Polar { root: j, r: ys[i][0], theta: ys[i][1] },
                };
                let tdir = direction_unchecked(&fiber, &p)?;
                // Neighbor coordinates in this marker's frame.
                let nb = |side: i64| -> [f64; 2] {
                    let idx = i as i64 + side;
                    match fr {
                        Frame::Z => {
                            let zeta_nb = if idx < 0 {
                                fiber.roots()[roots[0]]
                            } else if idx >= (n - 1) as i64 {
                                fiber.roots()[roots[1]]
                            } else {
                                zetas[idx as usize]
                            };
                            [zeta_nb.re, zeta_nb.im]
                        }
                        Frame::P(_) => {
                            let anchor = ys[i][1];
                            if idx < 0 {
                                [0.0, th[0]]
                            } else if idx >= (n - 1) as i64 {
                                [0.0, th[1]]
                            } else {
                                let zn = zs[idx as usize];
                                // Pick the (±r, θ) representation closest in θ.
                                let raw = zn.arg();
                                let cand1 = (zn.norm(), raw);
                                let cand2 = (-zn.norm(), raw + std::f64::consts::PI);
                                let near = |th_c: f64| {
                                    let d = (th_c - anchor)
                                        .rem_euclid(2.0 * std::f64::consts::PI);
                                    d.min(2.0 * std::f64::consts::PI - d)
                                };
                                let (r, mut t_nb) = if near(cand1.1) <= near(cand2.1) {
                                    cand1
                                } else {
                                    cand2
                                };
                                t_nb = anchor
                                    + crate::foliation::wrap_angle(t_nb - anchor);
                                [r, t_nb]
                            }
                        }
                    }
                };
                let prev = nb(-1);
                let next = nb(1);
                let dq = match fr {
                    Frame::Z => ChartTangent::Zeta(
                        (C64::new(next[0], next[1]) - C64::new(prev[0], prev[1])) / (2.0 * du),
                    ),
                    Frame::P(_) => ChartTangent::Polar {
                        dr: (next[0] - prev[0]) / (2.0 * du),
                        dtheta: (next[1] - prev[1]) / (2.0 * du),
                    },
                };
                let omega = area_form(&fiber, &p, &tdir, &dq)?;
                if !omega.is_finite() || omega.abs() < 1e-14 {
                    return Err(Error::StepUnstable(format!(
                        "degenerate area form at marker {}",
                        i + 1
                    )));
                }
                let lambda = dh[i + 1] / omega;
                if !lambda.is_finite() {
                    return Err(Error::StepUnstable(format!("λ blow-up at marker {}", i + 1)));
                }
                out.push(match tdir {
                    ChartTangent::Zeta(v) => [lambda * v.re, lambda * v.im],
                    ChartTangent::Polar { dr, dtheta } => [lambda * dr, lambda * dtheta],
                });
            }
            // Divisor angle dynamics through the even quadratic fit
            // h(r) = h(pole) + c r² + d r⁴ over the two nearest markers.
            let chi = |marker1: usize, grid1: usize, marker2: usize, grid2: usize, pole: usize| {
                let (r1, r2) = (zs[marker1].norm(), zs[marker2].norm());
                let d1 = h0.values()[grid1] - h0.values()[pole];
                let d2 = h0.values()[grid2] - h0.values()[pole];
                let det = r1 * r1 * r2.powi(4) - r2 * r2 * r1.powi(4);
                let c = if det.abs() > 1e-300 {
                    (d1 * r2.powi(4) - d2 * r1.powi(4)) / det
                } else {
                    d1 / (r1 * r1).max(1e-300)
                };
                2.0 * c
            };
            let chi0 = chi(0, 1, 1, 2, 0);
            let chi1 = chi(n - 2, n - 1, n - 3, n - 2, n);
            Ok((out, [-chi0, -chi1]))
        };

        // Classical RK4 across the coupled front.
        let y0: Vec<[f64; 2]> = frames.iter().map(|&(_, y)| y).collect();
        let (k1, t1) = deriv(&y0, theta)?;
        let comb = |a: &[[f64; 2]], b: &[[f64; 2]], c: f64| -> Vec<[f64; 2]> {
            a.iter()
                .zip(b)
                .map(|(x, v)| [x[0] + c * v[0], x[1] + c * v[1]])
                .collect()
        };
        let (k2, t2) = deriv(
            &comb(&y0, &k1, 0.5 * h_step),
            [theta[0] + 0.5 * h_step * t1[0], theta[1] + 0.5 * h_step * t1[1]],
        )?;
        let (k3, t3) = deriv(
            &comb(&y0, &k2, 0.5 * h_step),
            [theta[0] + 0.5 * h_step * t2[0], theta[1] + 0.5 * h_step * t2[1]],
        )?;
        let (k4, t4) = deriv(
            &comb(&y0, &k3, h_step),
            [theta[0] + h_step * t3[0], theta[1] + h_step * t3[1]],
        )?;
        let scale_guard = 0.3 * fiber.scale();
        let mut y_next = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let inc = [
                h_step / 6.0 * (k1[i][0] + 2.0 * k2[i][0] + 2.0 * k3[i][0] + k4[i][0]),
                h_step / 6.0 * (k1[i][1] + 2.0 * k2[i][1] + 2.0 * k3[i][1] + k4[i][1]),
            ];
            if !inc[0].is_finite() || !inc[1].is_finite() {
                return Err(Error::StepUnstable("non-finite marker increment".into()));
            }
            if (inc[0] * inc[0] + inc[1] * inc[1]).sqrt() > scale_guard {
                return Err(Error::StepUnstable(
                    "marker moved more than a chart scale in one step; dt too large".into(),
                ));
            }
            y_next.push([y0[i][0] + inc[0], y0[i][1] + inc[1]]);
        }
        theta = [
            theta[0] + h_step / 6.0 * (t1[0] + 2.0 * t2[0] + 2.0 * t3[0] + t4[0]),
            theta[1] + h_step / 6.0 * (t1[1] + 2.0 * t2[1] + 2.0 * t3[1] + t4[1]),
        ];

        // Project each marker back onto its stored leaf; log the drift.
        for i in 0..n - 1 {
            let (fr, _) = frames[i];
            let (z_raw, zeta_raw) = materialize(&fiber, fr, y_next[i], z_refs[i])?;
            let (ell, drift) = markers[i].leaf.nearest(&fiber, z_raw, zeta_raw)?;
            diag.max_leaf_drift = diag.max_leaf_drift.max(drift);
            if !markers[i].leaf.ensure(&fiber, ell, 0.2)? {
                diag.horizon = Some(format!(
                    "marker {} reached the end of an obstructed leaf at t = {:.6}",
                    i + 1,
                    t + h_step
                ));
                break 'time;
            }
            // Re-query after extension in case the nearest point moved.
            let (ell, _) = markers[i].leaf.nearest(&fiber, z_raw, zeta_raw)?;
            let (chart, z, zeta) = markers[i].leaf.point_at(&fiber, ell)?;
            markers[i].chart = chart;
            markers[i].z = z;
            markers[i].zeta = zeta;
        }
        t += h_step;

        // Assemble and vet the new snapshot.
        let mut zeta_arr = Vec::with_capacity(n + 1);
        let mut z_arr = Vec::with_capacity(n + 1);
        zeta_arr.push(fiber.roots()[roots[0]]);
        z_arr.push(C64::new(0.0, 0.0));
        for m in &markers {
            zeta_arr.push(m.zeta);
            z_arr.push(m.z);
        }
        zeta_arr.push(fiber.roots()[roots[1]]);
        z_arr.push(C64::new(0.0, 0.0));
        let snap = SymmetricCircle::from_samples(fiber.clone(), zeta_arr, z_arr)?;
        let rep = snap.check_positive();
        let sing = markers
            .iter()
            .map(|m| m.chart.singular_distance(&fiber))
            .fold(f64::INFINITY, f64::min);
        if !rep.is_positive {
            diag.horizon = Some(format!(
                "positivity margin {:.3e} fell below the floor at t = {t:.6}",
                rep.margin
            ));
            break;
        }
        if sing < fiber.tolerances().sing_radius {
            diag.horizon = Some(format!("marker within the singular radius at t = {t:.6}"));
            break;
        }
        diag.min_positivity_margin = diag.min_positivity_margin.min(rep.margin);
        times.push(t);
        snapshots.push(snap);
        diag.endpoint_theta.push(theta);
    }

    diag.max_leaf_residual = markers
        .iter()
        .map(|m| m.leaf.max_residual())
        .fold(0.0, f64::max);
    Ok(GeodesicPath {
        times,
        snapshots,
        generator: Generator::Ivp { h0 },
        diagnostics: diag,
    })
}
