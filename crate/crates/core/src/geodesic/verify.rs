//! Verification of the geodesic identity `h_t∘Ψ_t = h_0∘Ψ_0`, the discrete
//! horizontality condition, and horizontal reparametrization of families.

use crate::cycle::{z_int_pow, InvariantFunction, SymmetricCircle};
use crate::error::{Error, Result};
use crate::foliation::horizontal_match;
use crate::geodesic::{cumulative_integral, Generator, GeodesicPath};
use crate::C64;

/// Recover the velocity primitive at every snapshot by integrating
/// `ω(∂_t γ, ∂_u γ) du`, and report the largest sup-deviation from the
/// path's generating velocity, relative to its sup norm.
pub fn verify_geodesic(path: &GeodesicPath) -> Result<f64> {
    let m = path.snapshots.len();
    if m < 3 {
        return Err(Error::InvalidInput("need at least 3 snapshots to verify".into()));
    }
    let n = path.snapshots[0].n_half();
    let du = path.snapshots[0].du();

    let recovered_at = |j: usize| -> Result<InvariantFunction> {
        // Non-uniform second-order time stencil at t_j.
        let (jm, jp) = if j == 0 {
            (0, 2)
        } else if j == m - 1 {
            (m - 3, m - 1)
        } else {
            (j - 1, j + 1)
        };
        let (t0, t1, t2) = (path.times[jm], path.times[(jm + jp) / 2], path.times[jp]);
        
        let (sm, s0, sp) = (
            &path.snapshots[jm],
            &path.snapshots[(jm + jp) / 2],
            &path.snapshots[jp],
        );
        // Weights of the 3-point derivative at the requested time t_j.
        let tj = path.times[j];
        let w = three_point_weights(t0, t1, t2, tj);
        let mut dphi = vec![0.0; n + 1];
        for k in 0..=n {
            let zt = sm.z()[k] * w[0] + s0.z()[k] * w[1] + sp.z()[k] * w[2];
            let zetat = sm.zeta()[k] * w[0] + s0.zeta()[k] * w[1] + sp.zeta()[k] * w[2];
            let target = &path.snapshots[j];
            let zu = target.dz_du(k);
            let zetau = target.dzeta_du(k);
            dphi[k] = (zt.conj() * zu).im + (zetat.conj() * zetau).im;
        }
        let raw = cumulative_integral(&dphi, du);
        path.snapshots[j].project_mean_zero(&InvariantFunction::from_values(raw)?)
    };

    let h_ref = match &path.generator {
        Generator::Ivp { h0 } => h0.clone(),
        Generator::Bvp { h, .. } => h.clone(),
    };
    let href_norm = h_ref.sup_norm();

    let mut worst = 0.0f64;
    let mut max_recovered = 0.0f64;
    for j in 0..m {
        let ht = recovered_at(j)?;
        max_recovered = max_recovered.max(ht.sup_norm());
        let dev = ht.axpy(1.0, &h_ref, -1.0)?.sup_norm();
        worst = worst.max(dev);
    }
    if href_norm < 1e-14 && max_recovered < 1e-14 {
        return Ok(0.0);
    }
    Ok(worst / href_norm.max(1e-14))
}

fn three_point_weights(t0: f64, t1: f64, t2: f64, t: f64) -> [f64; 3] {
    // Derivative of the Lagrange basis through (t0, t1, t2) at t.
    let w0 = ((t - t1) + (t - t2)) / ((t0 - t1) * (t0 - t2));
    let w1 = ((t - t0) + (t - t2)) / ((t1 - t0) * (t1 - t2));
    let w2 = ((t - t0) + (t - t1)) / ((t2 - t0) * (t2 - t1));
    [w0, w1, w2]
}

/// Largest renormalized horizontality residual over consecutive snapshots
/// and interior grid points; 0/0 counts as 0.
///
/// The continuum condition is `∂_t z · z^{n-1}/f'(ζ) ∈ iℝ`; on the fiber
/// this 1-form equals `z^{n-2} dζ / 2`, which is holomorphic, so its chord
/// integral between consecutive marker positions (Simpson, 5th order)
/// vanishes in the real part exactly when the markers share a leaf.
pub fn check_horizontal_family(snapshots: &[SymmetricCircle]) -> Result<f64> {
    if snapshots.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 snapshots".into()));
    }
    let n = snapshots[0].n_half();
    let fiber = snapshots[0].fiber().clone();
    let p = fiber.n() as i32 - 2;
    let mut worst = 0.0f64;
    for w in snapshots.windows(2) {
        if w[1].n_half() != n {
            return Err(Error::InvalidInput("snapshots must share a grid".into()));
        }
        for k in 1..n {
            let (za, zb) = (w[0].z()[k], w[1].z()[k]);
            let (zeta_a, zeta_b) = (w[0].zeta()[k], w[1].zeta()[k]);
            if (zb - za).norm() < 1e-14 && (zeta_b - zeta_a).norm() < 1e-14 {
                continue;
            }
            let zm = fiber.sqrt_f_near((zeta_a + zeta_b) * 0.5, (za + zb) * 0.5);
            let s = (z_int_pow(za, p) + z_int_pow(zm, p) * 4.0 + z_int_pow(zb, p)) / 6.0
                * (zeta_b - zeta_a)
                * 0.5;
            let denom = s.norm();
            if denom > 1e-250 {
                worst = worst.max(s.re.abs() / denom);
            }
        }
    }
    Ok(worst)
}

/// Reparametrize a family of positive circles so that it becomes horizontal:
/// slice 0 is kept, and every later slice is replaced by the leafwise image
/// of slice 0's markers on it.
pub fn horizontal_reparametrize(family: &[SymmetricCircle]) -> Result<Vec<SymmetricCircle>> {
    if family.is_empty() {
        return Err(Error::InvalidInput("empty family".into()));
    }
    let base = &family[0];
    let mut out = vec![base.clone()];
    for slice in &family[1..] {
        let m = horizontal_match(base, slice)?;
        let zeta: Vec<C64> = m.beta1.iter().map(|p| p.zeta).collect();
        let z: Vec<C64> = m.beta1.iter().map(|p| p.z).collect();
        out.push(SymmetricCircle::from_samples(base.fiber().clone(), zeta, z)?);
    }
    Ok(out)
}
