//! Boundary-value geodesic solver.
//!
//! Pipeline: leafwise matching of the two cycles, flow time `s(u)` of the
//! pseudo-Hamiltonian field of `k∘P` (with `k(u) = cos u`) along each
//! matched leaf segment, the generating velocity from `dh = s dk`, snapshot
//! placement by inverting the cumulative flow-time table, and an
//! independent swept-area audit of `h`.

use crate::cycle::{InvariantFunction, SymmetricCircle};
use crate::error::{Error, Result};
use crate::fiber::MilnorFiber;
use crate::foliation::{
    area_form, chart_radius, direction_unchecked, horizontal_match, wrap_angle, ChartPoint,
    ChartTangent, LeafSegment, MatchResult,
};
use crate::geodesic::{cumulative_integral, Generator, GeodesicPath, PathDiagnostics};
use crate::C64;

use std::f64::consts::PI;

/// Flow-time data of one matched leaf segment.
struct LeafTable {
    ells: Vec<f64>,
    taus: Vec<f64>,
    hit_ell: f64,
}

fn node_tangent(chart: &ChartPoint, dir: [f64; 2]) -> ChartTangent {
    match chart {
        ChartPoint::Zeta { .. } => ChartTangent::Zeta(C64::new(dir[0], dir[1])),
        ChartPoint::Polar { .. } => ChartTangent::Polar { dr: dir[0], dtheta: dir[1] },
    }
}

/// Coordinates of an M¹ point `(z, ζ)` in the frame of `at`.
fn coords_in_frame(at: &ChartPoint, z: C64, zeta: C64) -> [f64; 2] {
    match *at {
        ChartPoint::Zeta { .. } => [zeta.re, zeta.im],
        ChartPoint::Polar { theta, .. } => {
            let raw = z.arg();
            let d1 = wrap_angle(raw - theta).abs();
            let d2 = wrap_angle(raw + PI - theta).abs();
            if d1 <= d2 {
                [z.norm(), theta + wrap_angle(raw - theta)]
            } else {
                [-z.norm(), theta + wrap_angle(raw + PI - theta)]
            }
        }
    }
}

/// Nearest on-leaf point of `seg` to `(z, ζ)`, as coordinates in the frame
/// of `at`.
fn nearest_in_frame(
    fiber: &MilnorFiber,
    seg: &LeafSegment,
    at: &ChartPoint,
    z: C64,
    zeta: C64,
) -> Result<[f64; 2]> {
    let (ell, _) = seg.project(fiber, z, zeta)?;
    let (_, znb, zetanb) = seg.point_at(fiber, ell)?;
    Ok(coords_in_frame(at, znb, zetanb))
}

/// Solve the boundary value problem between two positive cycles with a
/// common root pair, producing snapshots at the requested times in [0, 1].
pub fn bvp_solve(
    gamma0: &SymmetricCircle,
    gamma1: &SymmetricCircle,
    t_samples: &[f64],
) -> Result<GeodesicPath> {
    if t_samples.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
        return Err(Error::InvalidInput("snapshot times must lie in [0, 1]".into()));
    }
    let matches = horizontal_match(gamma0, gamma1)?;
    let fiber = gamma0.fiber().clone();
    let n = gamma0.n_half();
    let du = gamma0.du();
    let kprime = |k: usize| -> f64 { -(gamma0.u(k)).sin() };

    // Flow time along every interior leaf segment.
    let mut s = vec![0.0; n + 1];
    let mut tables: Vec<Option<LeafTable>> = (0..=n).map(|_| None).collect();
    for k in 1..n {
        let Some(seg) = matches.leaves[k].as_ref() else {
            continue; // identity match, s = 0
        };
        let hit_ell = matches.s_arclength[k];
        // Node list up to the hit, with the exact hit point appended.
        let mut nodes: Vec<(ChartPoint, C64, C64, f64, [f64; 2])> = seg
            .trace
            .points
            .iter()
            .take_while(|p| p.arclength < hit_ell - 1e-12)
            .map(|p| (p.chart, p.z, p.zeta, p.arclength, p.dir))
            .collect();
        {
            let (chart, z, zeta) = seg.point_at(&fiber, hit_ell)?;
            let dir_prev = nodes.last().map(|t| t.4).unwrap_or([1.0, 0.0]);
            let t = direction_unchecked(&fiber, &chart)?;
            let t = if node_tangent(&chart, dir_prev).dot(&t) < 0.0 { t.neg() } else { t };
            let dir = match t {
                ChartTangent::Zeta(v) => [v.re, v.im],
                ChartTangent::Polar { dr, dtheta } => [dr, dtheta],
            };
            nodes.push((chart, z, zeta, hit_ell, dir));
        }
        // Transversal derivative V = centered difference of the nearest
        // on-leaf points of the two adjacent segments; one-sided next to the
        // poles unless the node sits in a polar chart, where the exceptional
        // divisor itself provides the missing neighbor at (0, θ).
        let mut gvals = Vec::with_capacity(nodes.len());
        let mut ells = Vec::with_capacity(nodes.len());
        for (chart, z, zeta, ell, dir) in &nodes {
            let polar = matches!(chart, ChartPoint::Polar { .. });
            let prev: Option<[f64; 2]> = if k >= 2 {
                match matches.leaves[k - 1].as_ref() {
                    Some(sp) => Some(nearest_in_frame(&fiber, sp, chart, *z, *zeta)?),
                    None => Some(coords_in_frame(chart, matches.beta1[k - 1].z, matches.beta1[k - 1].zeta)),
                }
            } else if polar {
                // The divisor arc is the u = 0 leaf.
                let th = coords_in_frame(chart, *z, *zeta)[1];
                Some([0.0, th])
            } else {
                None
            };
            let next: Option<[f64; 2]> = if k + 2 <= n {
                match matches.leaves[k + 1].as_ref() {
                    Some(sn) => Some(nearest_in_frame(&fiber, sn, chart, *z, *zeta)?),
                    None => Some(coords_in_frame(chart, matches.beta1[k + 1].z, matches.beta1[k + 1].zeta)),
                }
            } else if polar {
                let th = coords_in_frame(chart, *z, *zeta)[1];
                Some([0.0, th])
            } else {
                None
            };
            let here = coords_in_frame(chart, *z, *zeta);
            let (va, vb, span) = match (prev, next) {
                (Some(p), Some(q)) => (p, q, 2.0 * du),
                (None, Some(q)) => (here, q, du),
                (Some(p), None) => (p, here, du),
                (None, None) => {
                    return Err(Error::InvalidInput("grid too coarse for matching".into()))
                }
            };
            let v = match chart {
                ChartPoint::Zeta { .. } => {
                    ChartTangent::Zeta(C64::new((vb[0] - va[0]) / span, (vb[1] - va[1]) / span))
                }
                ChartPoint::Polar { .. } => ChartTangent::Polar {
                    dr: (vb[0] - va[0]) / span,
                    dtheta: (vb[1] - va[1]) / span,
                },
            };
            let t = node_tangent(chart, *dir);
            gvals.push(area_form(&fiber, chart, &t, &v)?);
            ells.push(*ell);
        }
        // dτ = ω(T, V) / k'(u_k) dℓ, accumulated by trapezoid.
        let kp = kprime(k);
        let mut taus = vec![0.0; ells.len()];
        for i in 1..ells.len() {
            taus[i] = taus[i - 1]
                + 0.5 * (gvals[i - 1] + gvals[i]) * (ells[i] - ells[i - 1]) / kp;
        }
        s[k] = *taus.last().unwrap();
        tables[k] = Some(LeafTable { ells, taus, hit_ell });
    }

    // Even quartic extrapolation of s at the poles.
    s[0] = even_quartic_extrapolate(&[(gamma0.u(1), s[1]), (gamma0.u(2), s[2]), (gamma0.u(3), s[3])]);
    s[n] = even_quartic_extrapolate(&[
        (PI - gamma0.u(n - 1), s[n - 1]),
        (PI - gamma0.u(n - 2), s[n - 2]),
        (PI - gamma0.u(n - 3), s[n - 3]),
    ]);

    // dh = s dk, integrated to the Υ-mean-zero generating velocity.
    let dh: Vec<f64> = (0..=n).map(|k| s[k] * kprime(k)).collect();
    let h_raw = cumulative_integral(&dh, du);
    let h = gamma0.project_mean_zero(&InvariantFunction::from_values(h_raw)?)?;

    // Independent audit: band-wise swept ω-area must reproduce dh. Both
    // routes discretize at second order, so the threshold (calibrated at
    // N = 128) scales with the squared grid spacing.
    let cross = cross_check(&fiber, gamma0, &matches, &tables, &h)?;
    let grid_factor = (128.0 / n as f64).powi(2);
    let tol = fiber.tolerances().cross_tol * h.sup_norm().max(1.0) * grid_factor;
    if let Some(res) = cross {
        if res > tol {
            return Err(Error::CrossCheckFailure { residual: res, tol });
        }
    }

    // Snapshots by inverting the cumulative flow-time tables.
    let mut times = Vec::with_capacity(t_samples.len());
    let mut snapshots = Vec::with_capacity(t_samples.len());
    let mut diag = PathDiagnostics {
        min_positivity_margin: f64::INFINITY,
        cross_check_residual: cross,
        ..Default::default()
    };
    for &t in t_samples {
        let snap = if t == 0.0 {
            gamma0.clone()
        } else if t == 1.0 {
            let mut zeta_arr = Vec::with_capacity(n + 1);
            let mut z_arr = Vec::with_capacity(n + 1);
            for mp in &matches.beta1 {
                zeta_arr.push(mp.zeta);
                z_arr.push(mp.z);
            }
            SymmetricCircle::from_samples(fiber.clone(), zeta_arr, z_arr)?
        } else {
            let mut zeta_arr = Vec::with_capacity(n + 1);
            let mut z_arr = Vec::with_capacity(n + 1);
            zeta_arr.push(fiber.roots()[gamma0.root_at_0()]);
            z_arr.push(C64::new(0.0, 0.0));
            for k in 1..n {
                let (z, zeta) = match (&tables[k], &matches.leaves[k]) {
                    (Some(table), Some(seg)) => {
                        let ell = invert_flow_time(table, t * s[k]);
                        let (_, z, zeta) = seg.point_at(&fiber, ell)?;
                        (z, zeta)
                    }
                    _ => (gamma0.z()[k], gamma0.zeta()[k]),
                };
                zeta_arr.push(zeta);
                z_arr.push(z);
            }
            zeta_arr.push(fiber.roots()[gamma0.root_at_pi()]);
            z_arr.push(C64::new(0.0, 0.0));
            SymmetricCircle::from_samples(fiber.clone(), zeta_arr, z_arr)?
        };
        snap.require_positive()?;
        diag.min_positivity_margin = diag
            .min_positivity_margin
            .min(snap.check_positive().margin);
        diag.endpoint_theta.push([
            matches.theta0[0] + t * wrap_angle(matches.theta1[0] - matches.theta0[0]),
            matches.theta0[1] + t * wrap_angle(matches.theta1[1] - matches.theta0[1]),
        ]);
        times.push(t);
        snapshots.push(snap);
    }
    diag.max_leaf_residual = matches
        .leaves
        .iter()
        .flatten()
        .map(|seg| seg.trace.max_leaf_residual)
        .fold(0.0, f64::max);

    Ok(GeodesicPath {
        times,
        snapshots,
        generator: Generator::Bvp { s, h, matches },
        diagnostics: diag,
    })
}

/// Fit `s(x) = a + b x² + c x⁴` through three interior samples and evaluate
/// at x = 0.
fn even_quartic_extrapolate(pts: &[(f64, f64)]) -> f64 {
    let (x1, y1) = pts[0];
    let (x2, y2) = pts[1];
    let (x3, y3) = pts[2];
    let (q1, q2, q3) = (x1 * x1, x2 * x2, x3 * x3);
    // Lagrange in the variable q = x² evaluated at q = 0.
    let l1 = (q2 * q3) / ((q1 - q2) * (q1 - q3));
    let l2 = (q1 * q3) / ((q2 - q1) * (q2 - q3));
    let l3 = (q1 * q2) / ((q3 - q1) * (q3 - q2));
    y1 * l1 + y2 * l2 + y3 * l3
}

fn invert_flow_time(table: &LeafTable, target: f64) -> f64 {
    let total = *table.taus.last().unwrap();
    if total == 0.0 {
        return 0.0;
    }
    let sigma = total.signum();
    let t = sigma * target;
    let taus: Vec<f64> = table.taus.iter().map(|&x| sigma * x).collect();
    if t <= taus[0] {
        return table.ells[0];
    }
    if t >= *taus.last().unwrap() {
        return table.hit_ell;
    }
    let mut i = match taus.binary_search_by(|a| a.partial_cmp(&t).unwrap()) {
        Ok(i) => return table.ells[i],
        Err(i) => i - 1,
    };
    if i + 1 >= taus.len() {
        i = taus.len() - 2;
    }
    let frac = (t - taus[i]) / (taus[i + 1] - taus[i]);
    table.ells[i] + frac * (table.ells[i + 1] - table.ells[i])
}

/// Swept-area audit: over every band between adjacent leaf segments that
/// stays comfortably inside the ζ-chart, the ω-area of the band (triangle
/// quadrature against the density g) must match the increment of h.
/// Returns the sup-residual, or None if no band qualifies.
fn cross_check(
    fiber: &MilnorFiber,
    gamma0: &SymmetricCircle,
    matches: &MatchResult,
    tables: &[Option<LeafTable>],
    h: &InvariantFunction,
) -> Result<Option<f64>> {
    let n = gamma0.n_half();
    let m_sub = 64usize;
    let radii: Vec<f64> = (0..fiber.roots().len())
        .map(|j| chart_radius(fiber, j))
        .collect();
    // Keep clear of the poles, where the ζ-chart density g ~ 1/|f| makes
    // low-order 2D quadrature inaccurate.
    let comfortable = |z: C64, zeta: C64| -> bool {
        let (j, _) = fiber.nearest_root(zeta);
        z.norm() > 0.75 * radii[j]
    };
    // Sample each matched segment uniformly in arclength.
    let edge = |k: usize| -> Result<Option<Vec<C64>>> {
        let Some(seg) = matches.leaves[k].as_ref() else {
            return Ok(None);
        };
        let hit = tables[k].as_ref().map_or(0.0, |t| t.hit_ell);
        let mut pts = Vec::with_capacity(m_sub + 1);
        for i in 0..=m_sub {
            let (_, z, zeta) = seg.point_at(fiber, hit * i as f64 / m_sub as f64)?;
            if !comfortable(z, zeta) {
                return Ok(None);
            }
            pts.push(zeta);
        }
        Ok(Some(pts))
    };
    let density = |zeta: C64| -> f64 {
        1.0 + fiber.eval_fprime(zeta).norm_sqr() / (4.0 * fiber.eval_f(zeta).norm())
    };
    // Midpoint-edge triangle rule, exact for quadratic densities.
    let tri = |p: C64, q: C64, r: C64| -> f64 {
        let area = 0.5 * ((q - p).re * (r - p).im - (q - p).im * (r - p).re);
        area * (density((p + q) * 0.5) + density((q + r) * 0.5) + density((r + p) * 0.5)) / 3.0
    };

    let mut worst: Option<f64> = None;
    let mut k = 1;
    while k < n {
        // Find a maximal run of comfortable bands [k, k_end).
        let mut edges: Vec<Vec<C64>> = Vec::new();
        match edge(k)? {
            Some(e) => edges.push(e),
            None => {
                k += 1;
                continue;
            }
        }
        let mut k_end = k;
        while k_end + 1 < n {
            match edge(k_end + 1)? {
                Some(e) => {
                    edges.push(e);
                    k_end += 1;
                }
                None => break,
            }
        }
        if edges.len() >= 2 {
            let mut acc = 0.0;
            let mut run_worst = 0.0f64;
            for (b, kk) in (k..k_end).enumerate() {
                let (ea, eb) = (&edges[b], &edges[b + 1]);
                let mut band = 0.0;
                for i in 0..m_sub {
                    // Quad (a_i, a_{i+1}, b_{i+1}, b_i) oriented by
                    // (leaf direction, u direction), matching dh.
                    band += tri(ea[i], ea[i + 1], eb[i + 1]);
                    band += tri(ea[i], eb[i + 1], eb[i]);
                }
                acc += band;
                let dh_measured = h.values()[kk + 1] - h.values()[k];
                run_worst = run_worst.max((acc - dh_measured).abs());
            }
            worst = Some(worst.unwrap_or(0.0).max(run_worst));
        }
        k = k_end + 1;
    }
    Ok(worst)
}
