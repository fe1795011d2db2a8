//! The Milnor fiber data: the polynomial `f`, its roots, and branch-tracked
//! square roots of `f` along paths in the ζ-plane.

use crate::error::{Error, Result};
use crate::tolerance::ToleranceProfile;
use crate::C64;

const ROOT_ITER_MAX: usize = 200;
const NEWTON_POLISH_MAX: usize = 20;

/// The fiber `M^n = { z_1^2 + … + z_n^2 = f(ζ) }` for a polynomial `f` with
/// simple zeros. Immutable after construction and cheap to share.
#[derive(Debug, Clone)]
pub struct MilnorFiber {
    coeffs: Vec<C64>,
    n: u32,
    roots: Vec<C64>,
    root_sep: f64,
    tol: ToleranceProfile,
}

impl MilnorFiber {
    /// Build the fiber from the coefficients of `f` (ascending degree) and
    /// the ambient dimension `n >= 1`. Roots are located by simultaneous
    /// (Durand–Kerner) iteration and polished by Newton's method; a fiber
    /// with a near-double root is rejected.
    pub fn new(coeffs: Vec<C64>, n: u32) -> Result<Self> {
        Self::with_tolerances(coeffs, n, ToleranceProfile::default())
    }

    pub fn with_tolerances(mut coeffs: Vec<C64>, n: u32, tol: ToleranceProfile) -> Result<Self> {
        while coeffs.last().map_or(false, |c| c.norm() == 0.0) {
            coeffs.pop();
        }
        if coeffs.len() < 2 {
            // Degree zero or identically zero: no zeros to fiber over.
            return Err(Error::EmptyPolynomial);
        }
        if n < 1 {
            return Err(Error::InvalidInput("ambient dimension must be >= 1".into()));
        }
        let mut roots = durand_kerner(&coeffs);
        let max_coeff = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for r in roots.iter_mut() {
            *r = newton_polish(&coeffs, *r);
            let res = horner(&coeffs, *r).norm();
            if res > tol.root_residual * (1.0 + max_coeff) {
                return Err(Error::BranchFailure(format!(
                    "root polishing stalled at residual {res:.3e}"
                )));
            }
        }
        roots.sort_by(|a, b| {
            (a.re, a.im)
                .partial_cmp(&(b.re, b.im))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let max_root = roots.iter().map(|r| r.norm()).fold(0.0, f64::max);
        let floor = (tol.root_simplicity_rel * max_root).max(tol.root_simplicity_floor);
        let mut root_sep = f64::INFINITY;
        for i in 0..roots.len() {
            for j in i + 1..roots.len() {
                let sep = (roots[i] - roots[j]).norm();
                if sep < root_sep {
                    root_sep = sep;
                }
                if sep <= floor {
                    return Err(Error::DegenerateRoots { i, j, sep });
                }
            }
        }
        if roots.len() == 1 {
            root_sep = f64::INFINITY;
        }
        Ok(MilnorFiber { coeffs, n, roots, root_sep, tol })
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Degree of `f`, i.e. m + 1 for the A_m singularity.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Ambient complex dimension n of the fiber.
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn roots(&self) -> &[C64] {
        &self.roots
    }

    pub fn root_sep(&self) -> f64 {
        self.root_sep
    }

    pub fn tolerances(&self) -> &ToleranceProfile {
        &self.tol
    }

    pub fn eval_f(&self, zeta: C64) -> C64 {
        horner(&self.coeffs, zeta)
    }

    pub fn eval_fprime(&self, zeta: C64) -> C64 {
        horner_prime(&self.coeffs, zeta)
    }

    /// Index of the root nearest to `zeta` and its distance.
    pub fn nearest_root(&self, zeta: C64) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (j, r) in self.roots.iter().enumerate() {
            let d = (zeta - r).norm();
            if d < best.1 {
                best = (j, d);
            }
        }
        best
    }

    /// Geometric scale of the root configuration, used to size arclength
    /// budgets and domain guards.
    pub fn scale(&self) -> f64 {
        let max_root = self.roots.iter().map(|r| r.norm()).fold(0.0, f64::max);
        let span = if self.roots.len() > 1 { self.root_sep } else { 0.0 };
        (max_root + span).max(1.0)
    }

    /// Continue the square root of `f` along a ζ-polyline. `seed_z` fixes
    /// the branch at `path[0]`; each subsequent value is the square root
    /// nearest to its predecessor. Fails with [`Error::StepTooLarge`] when a
    /// step would jump by more than half the current modulus, which signals
    /// that the path passed too close to a branch point for the sampling.
    pub fn branch_track_sqrt(&self, path: &[C64], seed_z: C64) -> Result<Vec<C64>> {
        if path.is_empty() {
            return Err(Error::InvalidInput("empty path".into()));
        }
        let f0 = self.eval_f(path[0]);
        let residual = (seed_z * seed_z - f0).norm();
        if residual > self.tol.branch_residual.max(1e-9) * (1.0 + f0.norm()) {
            return Err(Error::BadSeed { residual });
        }
        let mut out = Vec::with_capacity(path.len());
        out.push(seed_z);
        let mut prev = seed_z;
        for (k, &zk) in path.iter().enumerate().skip(1) {
            let w = self.eval_f(zk).sqrt();
            let cand = if (w - prev).norm() <= (-w - prev).norm() { w } else { -w };
            if (cand - prev).norm() > 0.5 * prev.norm() + 1e-6 {
                return Err(Error::StepTooLarge { index: k });
            }
            out.push(cand);
            prev = cand;
        }
        Ok(out)
    }

    /// The nearest square root of `f(ζ)` to a reference value; single-step
    /// branch continuation used by the tracers.
    pub fn sqrt_f_near(&self, zeta: C64, reference: C64) -> C64 {
        let w = self.eval_f(zeta).sqrt();
        if (w - reference).norm() <= (-w - reference).norm() {
            w
        } else {
            -w
        }
    }
}

/// Horner evaluation of a polynomial given by ascending coefficients.
pub fn horner(coeffs: &[C64], x: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// Horner evaluation of the derivative.
pub fn horner_prime(coeffs: &[C64], x: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (k, &c) in coeffs.iter().enumerate().skip(1).rev() {
        acc = acc * x + c * (k as f64);
    }
    acc
}

/// Simultaneous root iteration (Durand–Kerner). Robust for the small
/// degrees relevant here; every output is afterwards polished by Newton.
fn durand_kerner(coeffs: &[C64]) -> Vec<C64> {
    let deg = coeffs.len() - 1;
    let lead = coeffs[deg];
    let monic: Vec<C64> = coeffs.iter().map(|c| c / lead).collect();
    // Initial guesses on a circle of the Cauchy-bound radius, at a generic
    // angle offset so that no guess starts on a symmetry axis.
    let radius = 1.0
        + monic
            .iter()
            .take(deg)
            .map(|c| c.norm())
            .fold(0.0, f64::max);
    let mut zs: Vec<C64> = (0..deg)
        .map(|k| {
            let ang = 2.0 * std::f64::consts::PI * (k as f64) / (deg as f64) + 0.4;
            C64::from_polar(radius, ang)
        })
        .collect();
    for _ in 0..ROOT_ITER_MAX {
        let mut max_step = 0.0f64;
        for i in 0..deg {
            let mut denom = C64::new(1.0, 0.0);
            for j in 0..deg {
                if j != i {
                    denom *= zs[i] - zs[j];
                }
            }
            if denom.norm() == 0.0 {
                // Collided guesses: nudge and keep iterating.
                zs[i] += C64::new(1e-6, 1e-6);
                continue;
            }
            let step = horner(&monic, zs[i]) / denom;
            zs[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-14 * radius {
            break;
        }
    }
    zs
}

fn newton_polish(coeffs: &[C64], mut z: C64) -> C64 {
    for _ in 0..NEWTON_POLISH_MAX {
        let fz = horner(coeffs, z);
        let dfz = horner_prime(coeffs, z);
        if dfz.norm() == 0.0 {
            break;
        }
        let step = fz / dfz;
        z -= step;
        if step.norm() < 1e-16 * (1.0 + z.norm()) {
            break;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn one_minus_zeta_sq(n: u32) -> MilnorFiber {
        MilnorFiber::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)], n).unwrap()
    }

    #[test]
    fn quadratic_roots() {
        let fib = one_minus_zeta_sq(2);
        assert_eq!(fib.roots().len(), 2);
        assert!((fib.roots()[0] - c(-1.0, 0.0)).norm() < 1e-12);
        assert!((fib.roots()[1] - c(1.0, 0.0)).norm() < 1e-12);
        assert!((fib.root_sep() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn linear_root() {
        let fib = MilnorFiber::new(vec![c(0.0, 0.0), c(1.0, 0.0)], 3).unwrap();
        assert_eq!(fib.roots().len(), 1);
        assert!(fib.roots()[0].norm() < 1e-14);
    }

    #[test]
    fn double_root_rejected() {
        // (1 - ζ^2)^2 = 1 - 2ζ^2 + ζ^4
        let err = MilnorFiber::new(
            vec![c(1.0, 0.0), c(0.0, 0.0), c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            2,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateRoots { .. }));
    }

    #[test]
    fn zero_polynomial_rejected() {
        let err = MilnorFiber::new(vec![c(0.0, 0.0), c(0.0, 0.0)], 2).unwrap_err();
        assert!(matches!(err, Error::EmptyPolynomial));
    }

    #[test]
    fn horner_values() {
        let fib = one_minus_zeta_sq(2);
        assert!((fib.eval_f(c(0.0, 0.0)) - c(1.0, 0.0)).norm() < 1e-15);
        assert!((fib.eval_fprime(c(1.0, 0.0)) - c(-2.0, 0.0)).norm() < 1e-15);
        assert!((fib.eval_f(c(0.0, 2.0)) - c(5.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn random_degree8_roots_polish() {
        // Fixed well-separated root set; reconstruct coefficients and check
        // the finder recovers every root to 1e-12.
        let roots = [
            c(1.0, 0.0),
            c(-1.0, 0.3),
            c(0.2, -1.1),
            c(2.0, 0.5),
            c(-2.2, -0.4),
            c(0.9, 1.7),
            c(-0.6, -1.9),
            c(1.5, -1.5),
        ];
        let mut coeffs = vec![c(1.0, 0.0)];
        for r in roots {
            let mut next = vec![c(0.0, 0.0); coeffs.len() + 1];
            for (k, &ck) in coeffs.iter().enumerate() {
                next[k + 1] += ck;
                next[k] -= ck * r;
            }
            coeffs = next;
        }
        let fib = MilnorFiber::new(coeffs, 2).unwrap();
        for r in roots {
            let (_, d) = fib.nearest_root(r);
            assert!(d < 1e-12, "root {r} off by {d:.3e}");
        }
    }

    #[test]
    fn branch_track_vertical_segment() {
        let fib = one_minus_zeta_sq(2);
        let path: Vec<C64> = (0..=10).map(|k| c(0.0, 0.05 * k as f64)).collect();
        let zs = fib.branch_track_sqrt(&path, c(1.0, 0.0)).unwrap();
        // sqrt(1 - (0.5i)^2) = sqrt(1.25) on the principal branch through 1.
        let expect = 1.25f64.sqrt();
        assert!((zs[10] - c(expect, 0.0)).norm() < 1e-12);
        for (k, &z) in zs.iter().enumerate() {
            let fz = fib.eval_f(path[k]);
            assert!((z * z - fz).norm() <= 1e-12 * (1.0 + fz.norm()));
        }
    }

    #[test]
    fn branch_track_constant_path() {
        let fib = one_minus_zeta_sq(2);
        let path = vec![c(0.0, 0.0); 5];
        let zs = fib.branch_track_sqrt(&path, c(-1.0, 0.0)).unwrap();
        assert!(zs.iter().all(|&z| (z - c(-1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn branch_track_bad_seed() {
        let fib = one_minus_zeta_sq(2);
        let err = fib
            .branch_track_sqrt(&[c(0.0, 0.0)], c(0.5, 0.0))
            .unwrap_err();
        assert!(matches!(err, Error::BadSeed { .. }));
    }

    fn loop_around(center: C64, radius: f64, steps: usize, turns: usize) -> Vec<C64> {
        (0..=steps * turns)
            .map(|k| {
                let ang = 2.0 * std::f64::consts::PI * (k as f64) / (steps as f64);
                center + C64::from_polar(radius, ang)
            })
            .collect()
    }

    #[test]
    fn monodromy_around_one_root_flips_sign() {
        let fib = one_minus_zeta_sq(2);
        let path = loop_around(c(1.0, 0.0), 0.1, 72, 1);
        let seed = fib.eval_f(path[0]).sqrt();
        let zs = fib.branch_track_sqrt(&path, seed).unwrap();
        assert!((zs[zs.len() - 1] + seed).norm() < 1e-10);
    }

    #[test]
    fn monodromy_around_two_roots_preserves_sign() {
        let fib = one_minus_zeta_sq(2);
        let path = loop_around(c(0.0, 0.0), 2.0, 144, 1);
        let seed = fib.eval_f(path[0]).sqrt();
        let zs = fib.branch_track_sqrt(&path, seed).unwrap();
        assert!((zs[zs.len() - 1] - seed).norm() < 1e-10);
    }

    #[test]
    fn reverse_path_returns_seed() {
        let fib = one_minus_zeta_sq(3);
        let mut path: Vec<C64> = (0..=40)
            .map(|k| {
                let t = k as f64 / 40.0;
                c(0.3 * t, 0.8 * t * (1.0 - 0.3 * t))
            })
            .collect();
        let seed = c(1.0, 0.0);
        let fwd = fib.branch_track_sqrt(&path, seed).unwrap();
        path.reverse();
        let back = fib
            .branch_track_sqrt(&path, fwd[fwd.len() - 1])
            .unwrap();
        assert!((back[back.len() - 1] - seed).norm() < 1e-10);
    }
}
