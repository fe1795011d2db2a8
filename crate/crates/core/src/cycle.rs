//! Discrete symmetric circles, the matching cycles they span, positivity,
//! the measure induced by `Re Ω`, and the metric Υ on invariant functions.
//!
//! A symmetric circle `γ(u) = (z(u), ζ(u))` is O(1)-equivariant:
//! `ζ(-u) = ζ(u)`, `z(-u) = -z(u)`, with `z` vanishing exactly at `u = 0, π`.
//! Only the half grid `u_k = πk/N, k = 0..=N` is stored; the other half is
//! mirrored, so equivariance holds exactly by construction.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fiber::MilnorFiber;
use crate::C64;

use std::f64::consts::PI;

/// Volume of the unit (n-1)-sphere, `2 π^{n/2} / Γ(n/2)`; `V_0 = 2`.
pub fn unit_sphere_volume(n: u32) -> f64 {
    // Γ(n/2) for half-integer arguments, by the recursion Γ(x+1) = x Γ(x).
    let mut gamma;
    let mut x;
    if n % 2 == 0 {
        gamma = 1.0; // Γ(1)
        x = 1.0;
    } else {
        gamma = PI.sqrt(); // Γ(1/2)
        x = 0.5;
    }
    while x < n as f64 / 2.0 - 0.25 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(n as f64 / 2.0) / gamma
}

/// A parametrized arc in the ζ-plane, mapped over `[0, 1]`.
pub trait ArcCurve {
    fn at(&self, x: f64) -> C64;
}

impl<F: Fn(f64) -> C64> ArcCurve for F {
    fn at(&self, x: f64) -> C64 {
        self(x)
    }
}

/// Piecewise-linear arc with arclength-uniform parametrization.
#[derive(Debug, Clone)]
pub struct PolylineArc {
    points: Vec<C64>,
    cum: Vec<f64>,
}

impl PolylineArc {
    pub fn new(points: Vec<C64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput("polyline arc needs >= 2 points".into()));
        }
        let mut cum = vec![0.0];
        for w in points.windows(2) {
            let len = (w[1] - w[0]).norm();
            cum.push(cum.last().unwrap() + len);
        }
        if *cum.last().unwrap() == 0.0 {
            return Err(Error::InvalidInput("polyline arc has zero length".into()));
        }
        Ok(PolylineArc { points, cum })
    }
}

impl ArcCurve for PolylineArc {
    fn at(&self, x: f64) -> C64 {
        let target = x.clamp(0.0, 1.0) * self.cum.last().unwrap();
        let seg = match self
            .cum
            .binary_search_by(|c| c.partial_cmp(&target).unwrap())
        {
            Ok(i) => i.min(self.points.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.points.len() - 2),
        };
        let lo = self.cum[seg];
        let hi = self.cum[seg + 1];
        let t = if hi > lo { (target - lo) / (hi - lo) } else { 0.0 };
        self.points[seg] + (self.points[seg + 1] - self.points[seg]) * t
    }
}

/// Verdict of the positivity test.
#[derive(Debug, Clone)]
pub struct PositivityReport {
    pub is_positive: bool,
    /// Minimum over the grid of the normalized margin `|Re ρ̂| / |ρ̂|`,
    /// with `(z')^n / f'` substituted at the poles.
    pub margin: f64,
    pub worst_u: f64,
}

/// Discrete O(1)-equivariant circle on `M^1`, the shadow of a matching cycle.
#[derive(Debug, Clone)]
pub struct SymmetricCircle {
    fiber: Arc<MilnorFiber>,
    /// Half grid size N; stored samples live at u_k = πk/N, k = 0..=N.
    n_half: usize,
    zeta: Vec<C64>,
    z: Vec<C64>,
    root_at_0: usize,
    root_at_pi: usize,
}

impl SymmetricCircle {
    /// Build the circle over an arc joining two distinct roots of `f`.
    ///
    /// The arc parameter is warped by `w(u) = (1 - cos u)/2`, so that
    /// `ζ(u) = arc(w(u))` is automatically even about `u = 0, π`, and
    /// `z(u) = sin(u) √(q(u))` with `q = f(ζ)/sin²u` extended by its limit
    /// at the poles and `√q` tracked continuously.
    pub fn from_arc(fiber: Arc<MilnorFiber>, arc: &dyn ArcCurve, n_half: usize) -> Result<Self> {
        if n_half < 4 {
            return Err(Error::InvalidInput("grid size N must be >= 4".into()));
        }
        let n = n_half;
        let mut zeta = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let u = PI * k as f64 / n as f64;
            let w = 0.5 * (1.0 - u.cos());
            zeta.push(arc.at(w));
        }
        let scale = fiber.scale();
        let (j0, d0) = fiber.nearest_root(zeta[0]);
        if d0 > 1e-8 * scale {
            return Err(Error::ArcEndpointNotRoot { which: "start", dist: d0 });
        }
        let (j1, d1) = fiber.nearest_root(zeta[n]);
        if d1 > 1e-8 * scale {
            return Err(Error::ArcEndpointNotRoot { which: "end", dist: d1 });
        }
        if j0 == j1 {
            return Err(Error::CoincidentEndpoints);
        }
        zeta[0] = fiber.roots()[j0];
        zeta[n] = fiber.roots()[j1];

        let clearance = fiber.tolerances().branch_clearance;
        for (k, &zk) in zeta.iter().enumerate().skip(1).take(n - 1) {
            let (_, d) = fiber.nearest_root(zk);
            if d < clearance {
                return Err(Error::ArcThroughRoot { x: k as f64 / n as f64 });
            }
        }

        // q_k = f(ζ_k)/sin²u_k in the interior; Richardson extrapolation of
        // the even function q at the poles.
        let mut q = vec![C64::new(0.0, 0.0); n + 1];
        for k in 1..n {
            let u = PI * k as f64 / n as f64;
            q[k] = fiber.eval_f(zeta[k]) / (u.sin() * u.sin());
        }
        q[0] = (q[1] * 4.0 - q[2]) / 3.0;
        q[n] = (q[n - 1] * 4.0 - q[n - 2]) / 3.0;

        let mut sq = Vec::with_capacity(n + 1);
        let mut prev = q[0].sqrt();
        sq.push(prev);
        for (k, &qk) in q.iter().enumerate().skip(1) {
            if qk.norm() < 1e-14 {
                return Err(Error::BranchFailure(format!(
                    "q vanished at grid index {k}; arc too close to a root"
                )));
            }
            let w = qk.sqrt();
            let cand = if (w - prev).norm() <= (-w - prev).norm() { w } else { -w };
            sq.push(cand);
            prev = cand;
        }

        let mut z = Vec::with_capacity(n + 1);
        for (k, &s) in sq.iter().enumerate() {
            let u = PI * k as f64 / n as f64;
            z.push(s * u.sin());
        }
        z[0] = C64::new(0.0, 0.0);
        z[n] = C64::new(0.0, 0.0);

        Self::assemble(fiber, zeta, z, j0, j1)
    }

    /// Build directly from half-grid samples (k = 0..=N). Endpoint ζ values
    /// are snapped to the nearest roots; all invariants are validated.
    pub fn from_samples(
        fiber: Arc<MilnorFiber>,
        mut zeta: Vec<C64>,
        mut z: Vec<C64>,
    ) -> Result<Self> {
        if zeta.len() != z.len() || zeta.len() < 5 {
            return Err(Error::InvalidInput(
                "zeta and z must have equal length N+1 >= 5".into(),
            ));
        }
        let n = zeta.len() - 1;
        let scale = fiber.scale();
        let (j0, d0) = fiber.nearest_root(zeta[0]);
        if d0 > 1e-6 * scale {
            return Err(Error::ArcEndpointNotRoot { which: "start", dist: d0 });
        }
        let (j1, d1) = fiber.nearest_root(zeta[n]);
        if d1 > 1e-6 * scale {
            return Err(Error::ArcEndpointNotRoot { which: "end", dist: d1 });
        }
        if j0 == j1 {
            return Err(Error::CoincidentEndpoints);
        }
        zeta[0] = fiber.roots()[j0];
        zeta[n] = fiber.roots()[j1];
        if z[0].norm() > 1e-6 * scale || z[n].norm() > 1e-6 * scale {
            return Err(Error::InvalidInput("z must vanish at u = 0, π".into()));
        }
        z[0] = C64::new(0.0, 0.0);
        z[n] = C64::new(0.0, 0.0);
        Self::assemble(fiber, zeta, z, j0, j1)
    }

    fn assemble(
        fiber: Arc<MilnorFiber>,
        zeta: Vec<C64>,
        z: Vec<C64>,
        root_at_0: usize,
        root_at_pi: usize,
    ) -> Result<Self> {
        let n = zeta.len() - 1;
        let tol = fiber.tolerances();
        for k in 1..n {
            if z[k].norm() == 0.0 {
                return Err(Error::InvalidInput(format!(
                    "z vanishes at interior grid index {k}"
                )));
            }
            let fz = fiber.eval_f(zeta[k]);
            let res = (z[k] * z[k] - fz).norm();
            if res > tol.branch_residual.max(1e-10) * (1.0 + fz.norm()) {
                return Err(Error::BranchFailure(format!(
                    "on-fiber residual {res:.3e} at grid index {k}"
                )));
            }
        }
        let circle = SymmetricCircle { fiber, n_half: n, zeta, z, root_at_0, root_at_pi };
        circle.check_embedded()?;
        Ok(circle)
    }

    /// The ζ-polyline over k = 0..N must be simple.
    fn check_embedded(&self) -> Result<()> {
        let n = self.n_half;
        for i in 0..n {
            for j in i + 2..n {
                let (a, b) = (self.zeta[i], self.zeta[i + 1]);
                let (c, d) = (self.zeta[j], self.zeta[j + 1]);
                if segments_cross(a, b, c, d) {
                    return Err(Error::NotEmbedded { i, j });
                }
            }
        }
        Ok(())
    }

    pub fn fiber(&self) -> &Arc<MilnorFiber> {
        &self.fiber
    }

    pub fn n_half(&self) -> usize {
        self.n_half
    }

    pub fn du(&self) -> f64 {
        PI / self.n_half as f64
    }

    pub fn u(&self, k: usize) -> f64 {
        PI * k as f64 / self.n_half as f64
    }

    pub fn zeta(&self) -> &[C64] {
        &self.zeta
    }

    pub fn z(&self) -> &[C64] {
        &self.z
    }

    pub fn root_at_0(&self) -> usize {
        self.root_at_0
    }

    pub fn root_at_pi(&self) -> usize {
        self.root_at_pi
    }

    /// ζ at an arbitrary signed index, using `ζ(-u) = ζ(u)` and periodicity.
    pub fn zeta_full(&self, i: i64) -> C64 {
        let (k, _) = self.fold_index(i);
        self.zeta[k]
    }

    /// z at an arbitrary signed index, using `z(-u) = -z(u)` and periodicity.
    pub fn z_full(&self, i: i64) -> C64 {
        let (k, sign) = self.fold_index(i);
        if sign { -self.z[k] } else { self.z[k] }
    }

    fn fold_index(&self, i: i64) -> (usize, bool) {
        let two_n = 2 * self.n_half as i64;
        let mut k = i.rem_euclid(two_n);
        if k > self.n_half as i64 {
            k = two_n - k;
            (k as usize, true)
        } else {
            (k as usize, false)
        }
    }

    /// Fourth-order centered derivative of ζ on the periodic grid.
    pub fn dzeta_du(&self, k: usize) -> C64 {
        let i = k as i64;
        let h = self.du();
        ((self.zeta_full(i + 1) - self.zeta_full(i - 1)) * 8.0
            - (self.zeta_full(i + 2) - self.zeta_full(i - 2)))
            / (12.0 * h)
    }

    /// Fourth-order centered derivative of z on the periodic grid.
    pub fn dz_du(&self, k: usize) -> C64 {
        let i = k as i64;
        let h = self.du();
        ((self.z_full(i + 1) - self.z_full(i - 1)) * 8.0
            - (self.z_full(i + 2) - self.z_full(i - 2)))
            / (12.0 * h)
    }

    /// The Ω-density `ρ(u_k) = ζ'(u_k) z(u_k)^{n-2} / 2` along the circle.
    pub fn rho(&self, k: usize) -> C64 {
        let zp = z_int_pow(self.z[k], self.fiber.n() as i32 - 2);
        self.dzeta_du(k) * zp * 0.5
    }

    /// Positivity test: `Re ρ ≠ 0` in the interior and
    /// `(z')^n / f' ∉ iℝ` at the poles, reported as a normalized margin.
    pub fn check_positive(&self) -> PositivityReport {
        let n = self.n_half;
        let mut margin = f64::INFINITY;
        let mut worst_u = 0.0;
        for k in 1..n {
            let rho = self.rho(k);
            let denom = rho.norm();
            let ratio = if denom == 0.0 { 0.0 } else { rho.re.abs() / denom };
            if ratio < margin {
                margin = ratio;
                worst_u = self.u(k);
            }
        }
        for &k in &[0usize, n] {
            let zp = self.dz_du(k);
            let e = z_int_pow(zp, self.fiber.n() as i32) / self.fiber.eval_fprime(self.zeta[k]);
            let denom = e.norm();
            let ratio = if denom == 0.0 { 0.0 } else { e.re.abs() / denom };
            if ratio < margin {
                margin = ratio;
                worst_u = self.u(k);
            }
        }
        let is_positive = margin > self.fiber.tolerances().positivity_floor;
        PositivityReport { is_positive, margin, worst_u }
    }

    pub fn require_positive(&self) -> Result<()> {
        let rep = self.check_positive();
        if rep.is_positive {
            Ok(())
        } else {
            Err(Error::NotPositive { margin: rep.margin, worst_u: rep.worst_u })
        }
    }

    /// The density `μ_k = V_{n-1} |Re ρ_k|` of the volume form `Re Ω`
    /// against du, on the half grid. Vanishes at the poles for n >= 2.
    pub fn measure_density(&self) -> Result<Vec<f64>> {
        self.require_positive()?;
        let n = self.n_half;
        let vol = unit_sphere_volume(self.fiber.n());
        let mut mu = vec![0.0; n + 1];
        for k in 1..n {
            mu[k] = vol * self.rho(k).re.abs();
        }
        if self.fiber.n() >= 2 {
            mu[0] = 0.0;
            mu[n] = 0.0;
        } else {
            mu[0] = (4.0 * mu[1] - mu[2]) / 3.0;
            mu[n] = (4.0 * mu[n - 1] - mu[n - 2]) / 3.0;
        }
        Ok(mu)
    }

    /// `∫_Λ h Re Ω`. Endpoint-corrected trapezoid over the half period,
    /// doubled (the integrand is even); left-to-right summation order.
    pub fn integrate(&self, h: &InvariantFunction) -> Result<f64> {
        let mu = self.measure_density()?;
        Ok(self.quadrature(|k| h.values[k] * mu[k]))
    }

    /// `Υ(h, k) = ∫_Λ h k Re Ω`.
    pub fn inner(&self, h: &InvariantFunction, k: &InvariantFunction) -> Result<f64> {
        let mu = self.measure_density()?;
        Ok(self.quadrature(|i| h.values[i] * k.values[i] * mu[i]))
    }

    pub fn norm(&self, h: &InvariantFunction) -> Result<f64> {
        Ok(self.inner(h, h)?.max(0.0).sqrt())
    }

    /// Total mass `∫_Λ Re Ω`.
    pub fn total_mass(&self) -> Result<f64> {
        let mu = self.measure_density()?;
        Ok(self.quadrature(|k| mu[k]))
    }

    /// Subtract the μ-mean so that `∫ h dμ = 0`.
    pub fn project_mean_zero(&self, h: &InvariantFunction) -> Result<InvariantFunction> {
        let mu = self.measure_density()?;
        let total = self.quadrature(|k| mu[k]);
        let mean = self.quadrature(|k| h.values[k] * mu[k]) / total;
        let values: Vec<f64> = h.values.iter().map(|v| v - mean).collect();
        Ok(InvariantFunction { values, mean_zero: true })
    }

    /// Trapezoid over `[0, π]` with the Euler–Maclaurin h²/12 endpoint
    /// correction (one-sided 4th-order derivative stencils), times two.
    /// Smooth even integrands integrate to O(h⁴); plain trapezoid would lose
    /// the measure's |u|^{n-1} pole behavior at O(h²).
    pub(crate) fn quadrature(&self, phi: impl Fn(usize) -> f64) -> f64 {
        let n = self.n_half;
        let h = self.du();
        let mut sum = 0.5 * phi(0);
        for k in 1..n {
            sum += phi(k);
        }
        sum += 0.5 * phi(n);
        let d0 = (-25.0 * phi(0) + 48.0 * phi(1) - 36.0 * phi(2) + 16.0 * phi(3) - 3.0 * phi(4))
            / (12.0 * h);
        let d1 = (25.0 * phi(n) - 48.0 * phi(n - 1) + 36.0 * phi(n - 2) - 16.0 * phi(n - 3)
            + 3.0 * phi(n - 4))
            / (12.0 * h);
        2.0 * (sum * h - h * h / 12.0 * (d1 - d0))
    }

    /// True iff `arg ρ` is constant modulo π over the interior grid, i.e.
    /// the cycle is special Lagrangian to the requested tolerance.
    pub fn is_special(&self, tol: f64) -> Result<bool> {
        self.require_positive()?;
        let n = self.n_half;
        // Work with 2·arg ρ so the mod-π ambiguity becomes mod-2π.
        let mut mean = C64::new(0.0, 0.0);
        let mut dirs = Vec::with_capacity(n - 1);
        for k in 1..n {
            let rho = self.rho(k);
            let d = rho / rho.norm();
            let doubled = d * d;
            dirs.push(doubled);
            mean += doubled;
        }
        if mean.norm() == 0.0 {
            return Ok(false);
        }
        let mean = mean / mean.norm();
        let max_dev = dirs
            .iter()
            .map(|d| (d * mean.conj()).arg().abs() / 2.0)
            .fold(0.0, f64::max);
        Ok(max_dev <= tol)
    }

    /// Resample to a new half-grid size via trigonometric (DCT-I)
    /// interpolation of ζ; z is rebuilt from `q = f(ζ)/sin²u` so the
    /// on-fiber identity stays exact, with the branch matched to the parent.
    pub fn resample(&self, new_n: usize) -> Result<Self> {
        let n = self.n_half;
        // Cosine coefficients of the even extension of ζ.
        let mut a = vec![C64::new(0.0, 0.0); n + 1];
        for (j, aj) in a.iter_mut().enumerate() {
            let mut s = self.zeta[0] * 0.5;
            for k in 1..n {
                s += self.zeta[k] * ((j * k) as f64 * PI / n as f64).cos();
            }
            s += self.zeta[n] * 0.5 * if j % 2 == 0 { 1.0 } else { -1.0 };
            *aj = s * (2.0 / n as f64);
        }
        let eval = |u: f64| -> C64 {
            let mut s = a[0] * 0.5;
            for (j, &aj) in a.iter().enumerate().skip(1).take(n - 1) {
                s += aj * (j as f64 * u).cos();
            }
            s + a[n] * 0.5 * (n as f64 * u).cos()
        };
        let mut zeta = Vec::with_capacity(new_n + 1);
        for k in 0..=new_n {
            zeta.push(eval(PI * k as f64 / new_n as f64));
        }
        zeta[0] = self.zeta[0];
        zeta[new_n] = self.zeta[n];

        let mut q = vec![C64::new(0.0, 0.0); new_n + 1];
        for (k, qk) in q.iter_mut().enumerate().skip(1).take(new_n - 1) {
            let u = PI * k as f64 / new_n as f64;
            *qk = self.fiber.eval_f(zeta[k]) / (u.sin() * u.sin());
        }
        q[0] = (q[1] * 4.0 - q[2]) / 3.0;
        q[new_n] = (q[new_n - 1] * 4.0 - q[new_n - 2]) / 3.0;
        // Match the parent branch: the limit of z/sin u at 0 is z'(0).
        let parent_r0 = self.dz_du(0);
        let mut prev = q[0].sqrt();
        if (prev - parent_r0).norm() > (-prev - parent_r0).norm() {
            prev = -prev;
        }
        let mut z = vec![C64::new(0.0, 0.0); new_n + 1];
        for k in 1..new_n {
            let w = q[k].sqrt();
            let cand = if (w - prev).norm() <= (-w - prev).norm() { w } else { -w };
            let u = PI * k as f64 / new_n as f64;
            z[k] = cand * u.sin();
            prev = cand;
        }
        Self::assemble(self.fiber.clone(), zeta, z, self.root_at_0, self.root_at_pi)
    }
}

/// Integer power of a complex number, with negative exponents.
pub fn z_int_pow(z: C64, p: i32) -> C64 {
    match p.cmp(&0) {
        std::cmp::Ordering::Equal => C64::new(1.0, 0.0),
        std::cmp::Ordering::Greater => z.powu(p as u32),
        std::cmp::Ordering::Less => z.powu((-p) as u32).finv(),
    }
}

fn segments_cross(a: C64, b: C64, c: C64, d: C64) -> bool {
    let orient = |p: C64, q: C64, r: C64| -> f64 {
        (q.re - p.re) * (r.im - p.im) - (q.im - p.im) * (r.re - p.re)
    };
    let eps = 1e-14 * ((b - a).norm() + (d - c).norm()).max(1e-300);
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 * o2 < -eps * eps && o3 * o4 < -eps * eps
}

/// Directed Hausdorff distance between the ζ-polylines of two circles,
/// symmetrized. Used as the endpoint metric for geodesic round trips.
pub fn hausdorff_distance(a: &SymmetricCircle, b: &SymmetricCircle) -> f64 {
    let one_way = |p: &SymmetricCircle, q: &SymmetricCircle| -> f64 {
        p.zeta()
            .iter()
            .map(|&pt| point_polyline_distance(pt, q.zeta()))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

pub(crate) fn point_polyline_distance(p: C64, poly: &[C64]) -> f64 {
    let mut best = f64::INFINITY;
    for w in poly.windows(2) {
        let (a, b) = (w[0], w[1]);
        let ab = b - a;
        let len2 = ab.norm_sqr();
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((p - a).re * ab.re + (p - a).im * ab.im) / len2).clamp(0.0, 1.0)
        };
        let d = (p - (a + ab * t)).norm();
        if d < best {
            best = d;
        }
    }
    best
}

/// Even grid function `h(u_k)` on the half grid, representing the
/// O(n)-invariant tangent vector `dh`.
#[derive(Debug, Clone)]
pub struct InvariantFunction {
    values: Vec<f64>,
    mean_zero: bool,
}

impl InvariantFunction {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 5 {
            return Err(Error::InvalidInput("need at least N+1 = 5 values".into()));
        }
        Ok(InvariantFunction { values, mean_zero: false })
    }

    pub fn from_fn(n_half: usize, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..=n_half)
            .map(|k| f(PI * k as f64 / n_half as f64))
            .collect();
        InvariantFunction { values, mean_zero: false }
    }

    pub fn zero(n_half: usize) -> Self {
        InvariantFunction { values: vec![0.0; n_half + 1], mean_zero: true }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_half(&self) -> usize {
        self.values.len() - 1
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean_zero
    }

    pub fn value_full(&self, i: i64) -> f64 {
        let n = self.n_half() as i64;
        let mut k = i.rem_euclid(2 * n);
        if k > n {
            k = 2 * n - k;
        }
        self.values[k as usize]
    }

    /// Fourth-order centered derivative on the periodic grid; vanishes
    /// exactly at the poles because h is even.
    pub fn derivative(&self, k: usize) -> f64 {
        let n = self.n_half();
        let h = PI / n as f64;
        let i = k as i64;
        ((self.value_full(i + 1) - self.value_full(i - 1)) * 8.0
            - (self.value_full(i + 2) - self.value_full(i - 2)))
            / (12.0 * h)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise combination `a·self + b·other`.
    pub fn axpy(&self, a: f64, other: &InvariantFunction, b: f64) -> Result<InvariantFunction> {
        if self.values.len() != other.values.len() {
            return Err(Error::InvalidInput("grid size mismatch".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(InvariantFunction { values, mean_zero: false })
    }

    pub fn scale(&self, a: f64) -> InvariantFunction {
        InvariantFunction {
            values: self.values.iter().map(|v| a * v).collect(),
            mean_zero: self.mean_zero,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    pub fn std_fiber(n: u32) -> Arc<MilnorFiber> {
        Arc::new(MilnorFiber::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)], n).unwrap())
    }

    pub fn round_cycle(n: u32, grid: usize) -> SymmetricCircle {
        let fiber = std_fiber(n);
        SymmetricCircle::from_arc(fiber, &|x: f64| c(1.0 - 2.0 * x, 0.0), grid).unwrap()
    }

    pub fn parabolic_cycle(n: u32, a: f64, grid: usize) -> SymmetricCircle {
        let fiber = std_fiber(n);
        SymmetricCircle::from_arc(
            fiber,
            &move |x: f64| {
                let t = 1.0 - 2.0 * x;
                c(t, a * (1.0 - t * t))
            },
            grid,
        )
        .unwrap()
    }

    #[test]
    fn round_cycle_closed_form() {
        let gamma = round_cycle(2, 64);
        for k in 0..=64 {
            let u = PI * k as f64 / 64.0;
            assert!((gamma.zeta()[k] - c(u.cos(), 0.0)).norm() < 1e-12);
            assert!((gamma.z()[k] - c(u.sin(), 0.0)).norm() < 1e-12);
        }
        assert_ne!(gamma.root_at_0(), gamma.root_at_pi());
    }

    #[test]
    fn parabolic_cycle_closed_form() {
        let gamma = parabolic_cycle(2, 0.3, 64);
        for k in 0..=64 {
            let u = PI * k as f64 / 64.0;
            let expect = c(u.cos(), 0.3 * u.sin() * u.sin());
            assert!((gamma.zeta()[k] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn arc_back_to_same_root_rejected() {
        let fiber = std_fiber(2);
        let err = SymmetricCircle::from_arc(
            fiber,
            &|x: f64| c(1.0 - 0.5 * (PI * x).sin().powi(2), 0.3 * (PI * x).sin()),
            32,
        )
        .unwrap_err();
        assert!(matches!(err, Error::CoincidentEndpoints));
    }

    #[test]
    fn arc_endpoint_not_root_rejected() {
        let fiber = std_fiber(2);
        let err =
            SymmetricCircle::from_arc(fiber, &|x: f64| c(0.9 - 1.9 * x, 0.0), 32).unwrap_err();
        assert!(matches!(err, Error::ArcEndpointNotRoot { .. }));
    }

    #[test]
    fn round_cycle_positive_n2_and_n3() {
        for n in [2u32, 3] {
            let gamma = round_cycle(n, 64);
            let rep = gamma.check_positive();
            assert!(rep.is_positive, "n = {n}: margin {}", rep.margin);
            assert!(rep.margin > 0.9, "n = {n}: margin {}", rep.margin);
        }
    }

    #[test]
    fn vertical_jog_not_positive_n2() {
        let fiber = std_fiber(2);
        let arc = PolylineArc::new(vec![
            c(1.0, 0.0),
            c(0.5, 0.0),
            c(0.5, 0.4),
            c(-0.2, 0.4),
            c(-0.2, 0.0),
            c(-1.0, 0.0),
        ])
        .unwrap();
        let gamma = SymmetricCircle::from_arc(fiber, &arc, 128).unwrap();
        let rep = gamma.check_positive();
        assert!(!rep.is_positive, "margin {}", rep.margin);
    }

    #[test]
    fn measure_totals_match_sphere_volumes() {
        // n=2: total 4π (area of unit S²); n=3: total 2π² (volume of S³).
        let g2 = round_cycle(2, 256);
        let t2 = g2.total_mass().unwrap();
        assert!(
            (t2 - 4.0 * PI).abs() / (4.0 * PI) < 1e-8,
            "n=2 total {t2} vs {}",
            4.0 * PI
        );
        let g3 = round_cycle(3, 256);
        let t3 = g3.total_mass().unwrap();
        assert!(
            (t3 - 2.0 * PI * PI).abs() / (2.0 * PI * PI) < 1e-8,
            "n=3 total {t3} vs {}",
            2.0 * PI * PI
        );
    }

    #[test]
    fn measure_density_round_n2() {
        let gamma = round_cycle(2, 128);
        let mu = gamma.measure_density().unwrap();
        // 4th-order finite differences leave O(h⁴) ≈ 1e-8 per point at N=128.
        for k in 1..128 {
            let u = gamma.u(k);
            assert!((mu[k] - PI * u.sin().abs()).abs() < 5e-8);
        }
    }

    #[test]
    fn integrate_odd_harmonic_vanishes() {
        let gamma = round_cycle(2, 128);
        let h = InvariantFunction::from_fn(128, |u| u.cos());
        let val = gamma.integrate(&h).unwrap();
        assert!(val.abs() < 1e-10, "got {val}");
    }

    #[test]
    fn project_constant_to_zero() {
        let gamma = round_cycle(3, 64);
        let h = InvariantFunction::from_fn(64, |_| 2.5);
        let p = gamma.project_mean_zero(&h).unwrap();
        assert!(p.sup_norm() < 1e-12);
        assert!(p.is_mean_zero());
    }

    #[test]
    fn inner_positive_semidefinite() {
        let gamma = round_cycle(2, 64);
        let h = InvariantFunction::from_fn(64, |u| u.cos() + 0.3 * (2.0 * u).cos());
        assert!(gamma.inner(&h, &h).unwrap() > 0.0);
        let zero = InvariantFunction::zero(64);
        assert!(gamma.inner(&zero, &zero).unwrap().abs() < 1e-14);
    }

    #[test]
    fn mean_zero_certified() {
        let gamma = round_cycle(2, 128);
        let h = InvariantFunction::from_fn(128, |u| u.cos().powi(2));
        let p = gamma.project_mean_zero(&h).unwrap();
        let mu = gamma.measure_density().unwrap();
        let abs_int = gamma.quadrature(|k| p.values()[k].abs() * mu[k]);
        let int = gamma.integrate(&p).unwrap();
        assert!(int.abs() <= 1e-9 * abs_int.max(1e-300));
    }

    #[test]
    fn special_round_cycles() {
        assert!(round_cycle(3, 64).is_special(1e-6).unwrap());
        assert!(round_cycle(2, 64).is_special(1e-6).unwrap());
        assert!(!parabolic_cycle(2, 0.3, 64).is_special(1e-6).unwrap());
    }

    #[test]
    fn positivity_invariant_under_reversal() {
        let fiber = std_fiber(2);
        let fwd = SymmetricCircle::from_arc(
            fiber.clone(),
            &|x: f64| {
                let t = 1.0 - 2.0 * x;
                c(t, 0.25 * (1.0 - t * t))
            },
            96,
        )
        .unwrap();
        let rev = SymmetricCircle::from_arc(
            fiber,
            &|x: f64| {
                let t = 2.0 * x - 1.0;
                c(t, 0.25 * (1.0 - t * t))
            },
            96,
        )
        .unwrap();
        let a = fwd.check_positive();
        let b = rev.check_positive();
        assert_eq!(a.is_positive, b.is_positive);
        assert!((a.margin - b.margin).abs() < 1e-8);
    }

    #[test]
    fn resample_preserves_integrals_to_second_order() {
        let h = |u: f64| (2.0 * u).cos() + 0.2;
        let ga = parabolic_cycle(2, 0.3, 64);
        let gb = ga.resample(128).unwrap();
        let gc = ga.resample(256).unwrap();
        let ia = ga.integrate(&InvariantFunction::from_fn(64, h)).unwrap();
        let ib = gb.integrate(&InvariantFunction::from_fn(128, h)).unwrap();
        let ic = gc.integrate(&InvariantFunction::from_fn(256, h)).unwrap();
        let e1 = (ia - ic).abs();
        let e2 = (ib - ic).abs();
        assert!(e2 <= e1 / 3.0 + 1e-12, "e1 {e1:.3e} e2 {e2:.3e}");
    }

    #[test]
    fn sphere_volumes() {
        assert!((unit_sphere_volume(1) - 2.0).abs() < 1e-14);
        assert!((unit_sphere_volume(2) - 2.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_volume(3) - 4.0 * PI).abs() < 1e-13);
        assert!((unit_sphere_volume(4) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn self_intersecting_polyline_rejected() {
        let fiber = std_fiber(2);
        let arc = PolylineArc::new(vec![
            c(1.0, 0.0),
            c(-0.5, 0.5),
            c(-0.5, -0.5),
            c(0.5, 0.5),
            c(-1.0, 0.0),
        ])
        .unwrap();
        let err = SymmetricCircle::from_arc(fiber, &arc, 64).unwrap_err();
        assert!(matches!(err, Error::NotEmbedded { .. }), "{err:?}");
    }
}
