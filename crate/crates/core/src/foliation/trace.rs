//! Adaptive tracing of foliation leaves, with automatic switching between
//! the ζ-chart and the blowup polar charts, event detection against target
//! curves, and an a-posteriori leaf-condition audit per accepted step.

use crate::cycle::{z_int_pow, SymmetricCircle};
use crate::error::{Error, Result};
use crate::fiber::MilnorFiber;
use crate::foliation::{chart_radius, local_inverse, ChartPoint};
use crate::C64;

use std::f64::consts::PI;

/// Stopping rule for a leaf trace.
pub enum StopRule<'a> {
    /// Integrate until the accumulated chart-Euclidean arclength reaches L.
    MaxArclength(f64),
    /// Integrate until the trace crosses the target circle on the correct
    /// sheet of the double cover, within the given arclength budget.
    HitCurve { target: &'a SymmetricCircle, max_arclength: f64 },
}

/// How a trace ended.
#[derive(Debug, Clone)]
pub enum Termination {
    Arclength,
    HitCurve(HitInfo),
    NearSingularity,
    LeftDomain,
    StepCollapse,
}

/// Data of a located leaf–curve intersection.
#[derive(Debug, Clone)]
pub struct HitInfo {
    pub point: ChartPoint,
    pub z: C64,
    pub zeta: C64,
    /// Target curve parameter of the hit, folded into [0, π] by evenness.
    pub v: f64,
    /// Arclength along the trace at the hit.
    pub arclength: f64,
}

/// One node of a traced leaf.
#[derive(Debug, Clone)]
pub struct TraceNode {
    pub chart: ChartPoint,
    pub z: C64,
    pub zeta: C64,
    pub arclength: f64,
    pub(crate) dir: [f64; 2],
}

/// A numerically integrated leaf of the horizontal foliation.
#[derive(Debug, Clone)]
pub struct LeafTrace {
    pub origin: ChartPoint,
    pub direction_sign: i8,
    pub points: Vec<TraceNode>,
    pub termination: Termination,
    /// Largest renormalized leaf-condition residual over accepted steps.
    pub max_leaf_residual: f64,
}

/// Trace the leaf through `start`. The initial orientation is the canonical
/// chart direction times `sign`; under a `HitCurve` rule the intersection is
/// refined by bisection in the step parameter and audited for uniqueness by
/// tracing 10% extra arclength past the first hit.
pub fn trace_leaf(
    fiber: &MilnorFiber,
    start: &ChartPoint,
    sign: i8,
    rule: StopRule<'_>,
) -> Result<LeafTrace> {
    let tracer = Tracer::new(fiber);
    let trace = tracer.trace(start, sign, &rule)?;
    match (&rule, &trace.termination) {
        (_, Termination::NearSingularity) => Err(Error::SingularityApproach),
        (_, Termination::StepCollapse) => Err(Error::StepCollapse),
        (StopRule::HitCurve { .. }, Termination::HitCurve(_)) => Ok(trace),
        (StopRule::HitCurve { .. }, _) => Err(Error::NoIntersection),
        (StopRule::MaxArclength(_), _) => Ok(trace),
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Rep {
    Zeta,
    Polar(usize),
}

#[derive(Clone, Copy)]
struct State {
    rep: Rep,
    y: [f64; 2],
    z: C64,
    dir: [f64; 2],
    ell: f64,
}

struct Target {
    zeta: Vec<C64>,
    z: Vec<C64>,
    n_half: usize,
}

impl Target {
    fn from_circle(c: &SymmetricCircle) -> Self {
        let two_n = 2 * c.n_half();
        let mut zeta = Vec::with_capacity(two_n + 1);
        let mut z = Vec::with_capacity(two_n + 1);
        for m in 0..=two_n {
            zeta.push(c.zeta_full(m as i64));
            z.push(c.z_full(m as i64));
        }
        Target { zeta, z, n_half: c.n_half() }
    }

    fn param_of(&self, seg: usize, s: f64) -> f64 {
        let v = (seg as f64 + s) * PI / self.n_half as f64;
        // Evenness of invariant data folds the mirror sheet back to [0, π].
        if v > PI {
            2.0 * PI - v
        } else {
            v
        }
    }
}

pub(crate) struct Tracer<'a> {
    fiber: &'a MilnorFiber,
    radii: Vec<f64>,
    domain_radius: f64,
    tol: f64,
    max_step: f64,
    leaf_tol: f64,
    sing_radius: f64,
}

impl<'a> Tracer<'a> {
    pub(crate) fn new(fiber: &'a MilnorFiber) -> Self {
        let radii = (0..fiber.roots().len())
            .map(|j| chart_radius(fiber, j))
            .collect();
        let tp = fiber.tolerances();
        Tracer {
            fiber,
            radii,
            domain_radius: 20.0 * fiber.scale(),
            tol: tp.trace_tol,
            max_step: tp.trace_max_step,
            leaf_tol: tp.leaf_tol,
            sing_radius: tp.sing_radius,
        }
    }

    fn state_from_chart(&self, p: &ChartPoint, sign: i8) -> Result<State> {
        let (z, _zeta) = p.position(self.fiber)?;
        let (rep, y) = match *p {
            ChartPoint::Zeta { zeta, .. } => (Rep::Zeta, [zeta.re, zeta.im]),
            ChartPoint::Polar { root, r, theta } => (Rep::Polar(root), [r, theta]),
        };
        let dir0 = self.field(rep, y, z, None)?;
        let s = sign as f64;
        Ok(State { rep, y, z, dir: [dir0[0] * s, dir0[1] * s], ell: 0.0 })
    }

    /// Unit direction field in the given representation, sign-matched to
    /// `dir_ref` when present.
    fn field(&self, rep: Rep, y: [f64; 2], z_ref: C64, dir_ref: Option<[f64; 2]>) -> Result<[f64; 2]> {
        let raw = match rep {
            Rep::Zeta => {
                let zeta = C64::new(y[0], y[1]);
                let z = self.fiber.sqrt_f_near(zeta, z_ref);
                if z.norm() < 1e-150 {
                    return Err(Error::SingularityApproach);
                }
                let v = C64::i() * z_int_pow(z, 2 - self.fiber.n() as i32);
                let v = v / v.norm();
                [v.re, v.im]
            }
            Rep::Polar(j) => {
                let (r, theta) = (y[0], y[1]);
                let z = C64::new(r, 0.0) * C64::from_polar(1.0, theta);
                let zeta = if r == 0.0 {
                    self.fiber.roots()[j]
                } else {
                    local_inverse(self.fiber, j, z)?
                };
                let a = PI / 2.0 + self.fiber.eval_fprime(zeta).arg() - self.fiber.n() as f64 * theta;
                let dr = r * a.cos();
                let dth = a.sin();
                let norm = (dr * dr + dth * dth).sqrt();
                if norm < 1e-150 {
                    return Err(Error::SingularityApproach);
                }
                [dr / norm, dth / norm]
            }
        };
        Ok(match dir_ref {
            Some(d) if raw[0] * d[0] + raw[1] * d[1] < 0.0 => [-raw[0], -raw[1]],
            _ => raw,
        })
    }

    /// Position data of a representation point.
    fn materialize(&self, rep: Rep, y: [f64; 2], z_ref: C64) -> Result<(ChartPoint, C64, C64)> {
        match rep {
            Rep::Zeta => {
                let zeta = C64::new(y[0], y[1]);
                let z = self.fiber.sqrt_f_near(zeta, z_ref);
                Ok((ChartPoint::Zeta { z, zeta }, z, zeta))
            }
            Rep::Polar(j) => {
                let z = C64::new(y[0], 0.0) * C64::from_polar(1.0, y[1]);
                let zeta = if y[0] == 0.0 {
                    self.fiber.roots()[j]
                } else {
                    local_inverse(self.fiber, j, z)?
                };
                Ok((ChartPoint::Polar { root: j, r: y[0], theta: y[1] }, z, zeta))
            }
        }
    }

    /// One Dormand–Prince 5(4) attempt from `s` with step `h`.
    /// Returns (y_new, error_estimate).
    fn dopri_step(&self, s: &State, h: f64) -> Result<([f64; 2], f64)> {
        let f = |y: [f64; 2]| self.field(s.rep, y, s.z, Some(s.dir));
        let k1 = f(s.y)?;
        let y2 = [s.y[0] + h * 0.2 * k1[0], s.y[1] + h * 0.2 * k1[1]];
        let k2 = f(y2)?;
        let y3 = [
            s.y[0] + h * (3.0 / 40.0 * k1[0] + 9.0 / 40.0 * k2[0]),
            s.y[1] + h * (3.0 / 40.0 * k1[1] + 9.0 / 40.0 * k2[1]),
        ];
        let k3 = f(y3)?;
        let y4 = [
            s.y[0] + h * (44.0 / 45.0 * k1[0] - 56.0 / 15.0 * k2[0] + 32.0 / 9.0 * k3[0]),
            s.y[1] + h * (44.0 / 45.0 * k1[1] - 56.0 / 15.0 * k2[1] + 32.0 / 9.0 * k3[1]),
        ];
        let k4 = f(y4)?;
        let y5 = [
            s.y[0]
                + h * (19372.0 / 6561.0 * k1[0] - 25360.0 / 2187.0 * k2[0]
                    + 64448.0 / 6561.0 * k3[0]
                    - 212.0 / 729.0 * k4[0]),
            s.y[1]
                + h * (19372.0 / 6561.0 * k1[1] - 25360.0 / 2187.0 * k2[1]
                    + 64448.0 / 6561.0 * k3[1]
                    - 212.0 / 729.0 * k4[1]),
        ];
        let k5 = f(y5)?;
        let y6 = [
            s.y[0]
                + h * (9017.0 / 3168.0 * k1[0] - 355.0 / 33.0 * k2[0] + 46732.0 / 5247.0 * k3[0]
                    + 49.0 / 176.0 * k4[0]
                    - 5103.0 / 18656.0 * k5[0]),
            s.y[1]
                + h * (9017.0 / 3168.0 * k1[1] - 355.0 / 33.0 * k2[1] + 46732.0 / 5247.0 * k3[1]
                    + 49.0 / 176.0 * k4[1]
                    - 5103.0 / 18656.0 * k5[1]),
        ];
        let k6 = f(y6)?;
        let y_new = [
            s.y[0]
                + h * (35.0 / 384.0 * k1[0] + 500.0 / 1113.0 * k3[0] + 125.0 / 192.0 * k4[0]
                    - 2187.0 / 6784.0 * k5[0]
                    + 11.0 / 84.0 * k6[0]),
            s.y[1]
                + h * (35.0 / 384.0 * k1[1] + 500.0 / 1113.0 * k3[1] + 125.0 / 192.0 * k4[1]
                    - 2187.0 / 6784.0 * k5[1]
                    + 11.0 / 84.0 * k6[1]),
        ];
        let k7 = f(y_new)?;
        let y4th = [
            s.y[0]
                + h * (5179.0 / 57600.0 * k1[0] + 7571.0 / 16695.0 * k3[0]
                    + 393.0 / 640.0 * k4[0]
                    - 92097.0 / 339200.0 * k5[0]
                    + 187.0 / 2100.0 * k6[0]
                    + 1.0 / 40.0 * k7[0]),
            s.y[1]
                + h * (5179.0 / 57600.0 * k1[1] + 7571.0 / 16695.0 * k3[1]
                    + 393.0 / 640.0 * k4[1]
                    - 92097.0 / 339200.0 * k5[1]
                    + 187.0 / 2100.0 * k6[1]
                    + 1.0 / 40.0 * k7[1]),
        ];
        let err = ((y_new[0] - y4th[0]).powi(2) + (y_new[1] - y4th[1]).powi(2)).sqrt();
        Ok((y_new, err))
    }

    /// Classical RK4 over a fraction of a step; used for event refinement
    /// and for on-leaf placement between stored nodes.
    fn partial_step(&self, s: &State, delta: f64) -> Result<State> {
        let substeps = 4usize;
        let h = delta / substeps as f64;
        let mut cur = *s;
        for _ in 0..substeps {
            let f = |y: [f64; 2]| self.field(cur.rep, y, cur.z, Some(cur.dir));
            let k1 = f(cur.y)?;
            let k2 = f([cur.y[0] + 0.5 * h * k1[0], cur.y[1] + 0.5 * h * k1[1]])?;
            let k3 = f([cur.y[0] + 0.5 * h * k2[0], cur.y[1] + 0.5 * h * k2[1]])?;
            let k4 = f([cur.y[0] + h * k3[0], cur.y[1] + h * k3[1]])?;
            let y = [
                cur.y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                cur.y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            ];
            let (_, z, _) = self.materialize(cur.rep, y, cur.z)?;
            let dir = self.field(cur.rep, y, z, Some(cur.dir))?;
            cur = State { rep: cur.rep, y, z, dir, ell: cur.ell + h };
        }
        Ok(cur)
    }

    /// Renormalized leaf-condition residual of one step: the real part of
    /// `∫ z^{n-2} dζ` over the step (Simpson on the chord; the form is
    /// holomorphic, so the chord integral equals the leaf integral), which
    /// vanishes identically along exact leaves.
    fn step_residual(&self, za: C64, zeta_a: C64, zb: C64, zeta_b: C64) -> f64 {
        let dzeta = zeta_b - zeta_a;
        if dzeta.norm() < 1e-16 * (1.0 + zeta_a.norm()) {
            return 0.0;
        }
        let mid_zeta = (zeta_a + zeta_b) * 0.5;
        let zm = self.fiber.sqrt_f_near(mid_zeta, (za + zb) * 0.5);
        let p = self.fiber.n() as i32 - 2;
        let s = (z_int_pow(za, p) + z_int_pow(zm, p) * 4.0 + z_int_pow(zb, p)) / 6.0 * dzeta;
        let denom = s.norm();
        if denom < 1e-250 {
            0.0
        } else {
            s.re.abs() / denom
        }
    }

    /// Chart handoff at an accepted node, with hysteresis.
    fn maybe_switch(&self, s: State) -> Result<State> {
        match s.rep {
            Rep::Zeta => {
                let zeta = C64::new(s.y[0], s.y[1]);
                let (j, dz) = self.fiber.nearest_root(zeta);
                if s.z.norm() < 0.9 * self.radii[j] && dz < 0.45 * self.fiber.scale() {
                    // Confirm ζ lies on the branch of the local inverse.
                    if let Ok(back) = local_inverse(self.fiber, j, s.z) {
                        if (back - zeta).norm() < 1e-8 * (1.0 + zeta.norm()) {
                            let r = s.z.norm();
                            let theta = s.z.arg();
                            let dzeta = C64::new(s.dir[0], s.dir[1]);
                            let dzc = self.fiber.eval_fprime(zeta) / (s.z * 2.0) * dzeta;
                            let e = C64::from_polar(1.0, -theta) * dzc;
                            let (dr, dth) = (e.re, e.im / r);
                            let n = (dr * dr + dth * dth).sqrt();
                            if n > 0.0 {
                                return Ok(State {
                                    rep: Rep::Polar(j),
                                    y: [r, theta],
                                    z: s.z,
                                    dir: [dr / n, dth / n],
                                    ell: s.ell,
                                });
                            }
                        }
                    }
                }
                Ok(s)
            }
            Rep::Polar(j) => {
                if s.y[0].abs() >= self.radii[j] {
                    let z = C64::new(s.y[0], 0.0) * C64::from_polar(1.0, s.y[1]);
                    let zeta = local_inverse(self.fiber, j, z)?;
                    let dz = C64::from_polar(1.0, s.y[1])
                        * C64::new(s.dir[0], s.y[0] * s.dir[1]);
                    let dzeta = z * 2.0 / self.fiber.eval_fprime(zeta) * dz;
                    let n = dzeta.norm();
                    if n > 0.0 {
                        return Ok(State {
                            rep: Rep::Zeta,
                            y: [zeta.re, zeta.im],
                            z,
                            dir: [dzeta.re / n, dzeta.im / n],
                            ell: s.ell,
                        });
                    }
                }
                Ok(s)
            }
        }
    }

    fn node_of(&self, s: &State) -> Result<TraceNode> {
        let (chart, z, zeta) = self.materialize(s.rep, s.y, s.z)?;
        Ok(TraceNode { chart, z, zeta, arclength: s.ell, dir: s.dir })
    }

    pub(crate) fn trace(&self, start: &ChartPoint, sign: i8, rule: &StopRule<'_>) -> Result<LeafTrace> {
        let mut s = self.state_from_chart(start, sign)?;
        s = self.maybe_switch(s)?;
        let target = match rule {
            StopRule::HitCurve { target, .. } => Some(Target::from_circle(target)),
            _ => None,
        };
        let budget = match rule {
            StopRule::MaxArclength(l) => *l,
            StopRule::HitCurve { max_arclength, .. } => *max_arclength,
        };
        if !(budget > 0.0) {
            return Err(Error::InvalidInput("arclength budget must be positive".into()));
        }

        let mut points = vec![self.node_of(&s)?];
        let mut max_residual = 0.0f64;
        let mut hit: Option<HitInfo> = None;
        let mut h = self.max_step.min(budget);
        let termination;

        loop {
            // Stop checks on the current node.
            let sing_dist = points.last().unwrap().chart.singular_distance(self.fiber);
            if sing_dist < self.sing_radius {
                termination = Termination::NearSingularity;
                break;
            }
            if points.last().unwrap().zeta.norm() > self.domain_radius {
                termination = Termination::LeftDomain;
                break;
            }
            let limit = match &hit {
                Some(info) => (info.arclength * 1.1 + 1e-9).min(budget),
                None => budget,
            };
            if s.ell >= limit - 1e-12 {
                termination = match hit.take() {
                    Some(info) => Termination::HitCurve(info),
                    None => Termination::Arclength,
                };
                break;
            }
            h = h.min(limit - s.ell);

            // Attempt a step; shrink on error or on leaf-residual excess.
            let mut accepted: Option<(State, f64)> = None;
            loop {
                if h < 1e-12 {
                    break;
                }
                match self.dopri_step(&s, h) {
                    Ok((y_new, err)) => {
                        if err <= self.tol {
                            let (_, z_new, zeta_new) = self.materialize(s.rep, y_new, s.z)?;
                            let node = points.last().unwrap();
                            let res = self.step_residual(node.z, node.zeta, z_new, zeta_new);
                            if res <= self.leaf_tol {
                                let dir_new = self.field(s.rep, y_new, z_new, Some(s.dir))?;
                                let s_new = State {
                                    rep: s.rep,
                                    y: y_new,
                                    z: z_new,
                                    dir: dir_new,
                                    ell: s.ell + h,
                                };
                                accepted = Some((s_new, res));
                                break;
                            }
                        }
                        let shrink = if err > self.tol {
                            0.9 * (self.tol / err).powf(0.2)
                        } else {

                            0.5
                        };
                        h *= shrink.clamp(0.1, 0.9);
                    }
                    Err(Error::SingularityApproach) => {
                        // A stage touched the degenerate locus: approach slowly.
                        h *= 0.3;
                    }
                    Err(e) => return Err(e),
                }
            }
            let (s_new, res) = match accepted {
                Some(v) => v,
                None => {
                    termination = Termination::StepCollapse;
                    break;
                }
            };
            max_residual = max_residual.max(res);

            // Event detection against the target curve on this step.
            if let Some(tg) = &target {
                if let Some(info) = self.detect_hit(&s, &s_new, tg)? {
                    match &hit {
                        None => hit = Some(info),
                        Some(first) => {
                            if info.arclength > first.arclength + 1e-7 * (1.0 + first.arclength) {
                                return Err(Error::DoubleIntersection);
                            }
                        }
                    }
                }
            }

            s = self.maybe_switch(s_new)?;
            points.push(self.node_of(&s)?);

            // Step-size growth for the next attempt.
            h = (h * 2.0).min(self.max_step);
        }

        Ok(LeafTrace {
            origin: *start,
            direction_sign: sign,
            points,
            termination,
            max_leaf_residual: max_residual,
        })
    }

    /// Find the first sheet-compatible crossing of the step [s0 → s1] with
    /// the target polyline; bisection refines the step parameter to 1e-10.
    fn detect_hit(&self, s0: &State, s1: &State, tg: &Target) -> Result<Option<HitInfo>> {
        let (_, _za, zeta_a) = self.materialize(s0.rep, s0.y, s0.z)?;
        let (_, _zb, zeta_b) = self.materialize(s1.rep, s1.y, s1.z)?;
        let step_len = (zeta_b - zeta_a).norm();
        if step_len == 0.0 {
            return Ok(None);
        }
        let h = s1.ell - s0.ell;
        let mut best: Option<(f64, usize, f64)> = None; // (t, segment, seg param)
        for m in 0..tg.zeta.len() - 1 {
            let (p, q) = (tg.zeta[m], tg.zeta[m + 1]);
            let seg = q - p;
            let seg_len = seg.norm();
            if seg_len == 0.0 {
                continue;
            }
            // Quick reject: chord endpoints on the same side and far away.
            let side = |x: C64| (seg.re * (x - p).im - seg.im * (x - p).re) / seg_len;
            let (ga, gb) = (side(zeta_a), side(zeta_b));
            if ga * gb > 0.0 {
                continue;
            }
            if ga == 0.0 && gb == 0.0 {
                continue;
            }
            // Chord parameter estimate and along-segment check.
            let t0 = if (ga - gb).abs() > 0.0 { ga / (ga - gb) } else { 0.5 };
            let x0 = zeta_a + (zeta_b - zeta_a) * t0;
            let sp = ((x0 - p).re * seg.re + (x0 - p).im * seg.im) / (seg_len * seg_len);
            if !(-0.02..=1.02).contains(&sp) {
                continue;
            }
            // Bisection on the integrated sub-step.
            let mut lo = 0.0f64;
            let mut hi = 1.0f64;
            let mut g_lo = ga;
            for _ in 0..40 {
                if hi - lo < 1e-10 {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let sm = self.partial_step(s0, mid * h)?;
                let (_, _, zeta_m) = self.materialize(sm.rep, sm.y, sm.z)?;
                let gm = side(zeta_m);
                if g_lo * gm <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    g_lo = gm;
                }
            }
            let t_star = 0.5 * (lo + hi);
            match best {
                Some((tb, _, _)) if tb <= t_star => {}
                _ => {
                    let sh = self.partial_step(s0, t_star * h)?;
                    let (_, z_h, zeta_h) = self.materialize(sh.rep, sh.y, sh.z)?;
                    let sp = ((zeta_h - p).re * seg.re + (zeta_h - p).im * seg.im)
                        / (seg_len * seg_len);
                    if !(-0.02..=1.02).contains(&sp) {
                        continue;
                    }
                    let sp = sp.clamp(0.0, 1.0);
                    // Sheet compatibility: the traced z must match the
                    // target's z, not its negative.
                    let z_t = tg.z[m] * (1.0 - sp) + tg.z[m + 1] * sp;
                    let rel = (z_h - z_t).norm() / z_t.norm().max(z_h.norm()).max(1e-12);
                    if rel <= self.fiber.tolerances().sheet_match_rel {
                        best = Some((t_star, m, sp));
                        let _ = (z_h, zeta_h);
                    }
                }
            }
        }
        match best {
            None => Ok(None),
            Some((t, m, sp)) => {
                let sh = self.partial_step(s0, t * h)?;
                let (chart, z_h, zeta_h) = self.materialize(sh.rep, sh.y, sh.z)?;
                Ok(Some(HitInfo {
                    point: chart,
                    z: z_h,
                    zeta: zeta_h,
                    v: tg.param_of(m, sp),
                    arclength: s0.ell + t * h,
                }))
            }
        }
    }
}

/// A traced leaf segment with amenities for walking along it: placement at
/// a prescribed arclength by local re-integration from the nearest stored
/// node, nearest-point queries in (z, ζ) coordinates, and on-demand
/// extension past the stored end.
#[derive(Debug, Clone)]
pub struct LeafSegment {
    pub trace: LeafTrace,
}

impl LeafSegment {
    pub fn new(trace: LeafTrace) -> Self {
        LeafSegment { trace }
    }

    pub fn end_arclength(&self) -> f64 {
        self.trace.points.last().map_or(0.0, |n| n.arclength)
    }

    fn node_state(&self, i: usize) -> State {
        let n = &self.trace.points[i];
        let (rep, y) = match n.chart {
            ChartPoint::Zeta { zeta, .. } => (Rep::Zeta, [zeta.re, zeta.im]),
            ChartPoint::Polar { root, r, theta } => (Rep::Polar(root), [r, theta]),
        };
        State { rep, y, z: n.z, dir: n.dir, ell: n.arclength }
    }

    /// Point of the leaf at the given arclength (clamped to the stored
    /// range), by fixed-step re-integration from the preceding node.
    pub fn point_at(&self, fiber: &MilnorFiber, ell: f64) -> Result<(ChartPoint, C64, C64)> {
        let pts = &self.trace.points;
        let ell = ell.clamp(0.0, self.end_arclength());
        let i = match pts.binary_search_by(|n| n.arclength.partial_cmp(&ell).unwrap()) {
            Ok(i) => return Ok((pts[i].chart, pts[i].z, pts[i].zeta)),
            Err(i) => i.saturating_sub(1).min(pts.len().saturating_sub(2)),
        };
        let tracer = Tracer::new(fiber);
        let s = tracer.partial_step(&self.node_state(i), ell - pts[i].arclength)?;
        tracer.materialize(s.rep, s.y, s.z)
    }

    /// Arclength of the point nearest to `(z, ζ)` in ℂ² distance, refined
    /// by a parabolic fit of the squared distance over three consecutive
    /// nodes (one-sided at the trace ends).
    pub fn nearest_arclength(&self, z: C64, zeta: C64) -> (f64, f64) {
        let pts = &self.trace.points;
        let d2 = |n: &TraceNode| (n.z - z).norm_sqr() + (n.zeta - zeta).norm_sqr();
        let mut bi = 0;
        let mut bd = f64::INFINITY;
        for (i, n) in pts.iter().enumerate() {
            let d = d2(n);
            if d < bd {
                bd = d;
                bi = i;
            }
        }
        if pts.len() < 3 {
            return (pts[bi].arclength, bd.sqrt());
        }
        let i0 = bi.max(1).min(pts.len() - 2) - 1;
        let (l0, l1, l2) = (
            pts[i0].arclength,
            pts[i0 + 1].arclength,
            pts[i0 + 2].arclength,
        );
        let (d0, d1, d2v) = (d2(&pts[i0]), d2(&pts[i0 + 1]), d2(&pts[i0 + 2]));
        let denom = (l0 - l1) * (l0 - l2) * (l1 - l2);
        if denom.abs() < 1e-300 {
            return (pts[bi].arclength, bd.sqrt());
        }
        let a = (l2 * (d1 - d0) + l1 * (d0 - d2v) + l0 * (d2v - d1)) / denom;
        let b = (l2 * l2 * (d0 - d1) + l1 * l1 * (d2v - d0) + l0 * l0 * (d1 - d2v)) / denom;
        if a <= 0.0 {
            return (pts[bi].arclength, bd.sqrt());
        }
        let lv = (-b / (2.0 * a)).clamp(l0, l2);
        // Distance at the refined arclength from the fitted parabola.
        let dv = (a * lv * lv + b * lv + (d0 - a * l0 * l0 - b * l0)).max(0.0);
        (lv, dv.sqrt().min(bd.sqrt()))
    }

    /// Nearest-point projection refined by Newton on the exactly integrated
    /// curve: minimizes the ℂ² distance to `(z, ζ)` over the arclength.
    /// Returns (arclength, transversal distance).
    pub fn project(&self, fiber: &MilnorFiber, z: C64, zeta: C64) -> Result<(f64, f64)> {
        let (mut ell, coarse_d) = self.nearest_arclength(z, zeta);
        let tracer = Tracer::new(fiber);
        let end = self.end_arclength();
        let pts = &self.trace.points;
        let mut dist = coarse_d;
        for _ in 0..3 {
            let (chart, zc, zetac) = self.point_at(fiber, ell)?;
            // Trace orientation from the preceding stored node, so the
            // tangent matches the arclength parametrization's sign.
            let node_idx = match pts
                .binary_search_by(|nd| nd.arclength.partial_cmp(&ell).unwrap())
            {
                Ok(i) => i,
                Err(i) => i.saturating_sub(1).min(pts.len().saturating_sub(1)),
            };
            // ℂ² tangent of the arclength parametrization at this point.
            let dir = match tracer.field(
                match chart {
                    ChartPoint::Zeta { .. } => Rep::Zeta,
                    ChartPoint::Polar { root, .. } => Rep::Polar(root),
                },
                match chart {
                    ChartPoint::Zeta { zeta, .. } => [zeta.re, zeta.im],
                    ChartPoint::Polar { r, theta, .. } => [r, theta],
                },
                zc,
                Some(pts[node_idx].dir),
            ) {
                Ok(d) => d,
                Err(_) => break,
            };
            let (dz, dzeta) = match chart {
                ChartPoint::Zeta { .. } => {
                    let dzeta = C64::new(dir[0], dir[1]);
                    let dz = if zc.norm() > 1e-150 {
                        fiber.eval_fprime(zetac) / (zc * 2.0) * dzeta
                    } else {
                        C64::new(0.0, 0.0)
                    };
                    (dz, dzeta)
                }
                ChartPoint::Polar { r, theta, .. } => {
                    let dz = C64::from_polar(1.0, theta) * C64::new(dir[0], r * dir[1]);
                    let dzeta = if zc.norm() > 1e-150 {
                        zc * 2.0 / fiber.eval_fprime(zetac) * dz
                    } else {
                        C64::new(0.0, 0.0)
                    };
                    (dz, dzeta)
                }
            };
            let rz = zc - z;
            let rzeta = zetac - zeta;
            dist = (rz.norm_sqr() + rzeta.norm_sqr()).sqrt();
            let grad = (rz.conj() * dz).re + (rzeta.conj() * dzeta).re;
            let hess = dz.norm_sqr() + dzeta.norm_sqr();
            if hess < 1e-300 {
                break;
            }
            let step = grad / hess;
            ell = (ell - step).clamp(0.0, end);
            if step.abs() < 1e-12 {
                break;
            }
        }
        let (_, zf, zetaf) = self.point_at(fiber, ell)?;
        dist = ((zf - z).norm_sqr() + (zetaf - zeta).norm_sqr()).sqrt();
        Ok((ell, dist))
    }

    /// Extend the trace so that it covers at least `ell_target`, tracing
    /// onward from the stored end.
    pub fn extend_to(&mut self, fiber: &MilnorFiber, ell_target: f64) -> Result<()> {
        let end = self.end_arclength();
        if ell_target <= end || self.trace.points.len() < 2 {
            return Ok(());
        }
        let tracer = Tracer::new(fiber);
        let last = self.trace.points.last().unwrap().clone();
        let extra = tracer.trace_from_state(
            self.node_state(self.trace.points.len() - 1),
            ell_target - end,
        )?;
        for mut n in extra {
            if n.arclength == 0.0 && (n.zeta - last.zeta).norm() < 1e-14 {
                continue;
            }
            n.arclength += end;
            self.trace.points.push(n);
        }
        Ok(())
    }
}

impl<'a> Tracer<'a> {
    /// Plain onward integration used by `LeafSegment::extend_to`; returns
    /// nodes with arclength starting at 0. Best effort: stops quietly at
    /// singular approaches, step collapse, or the domain edge, so callers
    /// can treat a short extension as an obstruction.
    fn trace_from_state(&self, start: State, budget: f64) -> Result<Vec<TraceNode>> {
        let mut s = State { ell: 0.0, ..start };
        let mut out = Vec::new();
        let mut h = self.max_step.min(budget);
        while s.ell < budget - 1e-12 {
            h = h.min(budget - s.ell);
            let mut stepped = false;
            while h >= 1e-12 {
                match self.dopri_step(&s, h) {
                    Ok((y_new, err)) if err <= self.tol => {
                        let (_, z_new, _) = self.materialize(s.rep, y_new, s.z)?;
                        let dir_new = self.field(s.rep, y_new, z_new, Some(s.dir))?;
                        s = State { rep: s.rep, y: y_new, z: z_new, dir: dir_new, ell: s.ell + h };
                        stepped = true;
                        break;
                    }
                    Ok((_, err)) => {
                        h *= (0.9 * (self.tol / err).powf(0.2)).clamp(0.1, 0.9);
                    }
                    Err(Error::SingularityApproach) => h *= 0.3,
                    Err(e) => return Err(e),
                }
            }
            if !stepped {
                break;
            }
            s = self.maybe_switch(s)?;
            let node = self.node_of(&s)?;
            let stop = node.chart.singular_distance(self.fiber) < self.sing_radius
                || node.zeta.norm() > self.domain_radius;
            out.push(node);
            if stop {
                break;
            }
            h = (h * 2.0).min(self.max_step);
        }
        Ok(out)
    }
}
