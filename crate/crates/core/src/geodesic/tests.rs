use super::*;
use crate::cycle::{hausdorff_distance, InvariantFunction, SymmetricCircle};
use crate::fiber::MilnorFiber;
use crate::C64;

use std::f64::consts::PI;
use std::sync::Arc;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn std_fiber(n: u32) -> Arc<MilnorFiber> {
    Arc::new(MilnorFiber::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)], n).unwrap())
}

fn round(n: u32, grid: usize) -> SymmetricCircle {
    SymmetricCircle::from_arc(std_fiber(n), &|x: f64| c(1.0 - 2.0 * x, 0.0), grid).unwrap()
}

fn parabolic(n: u32, a: f64, grid: usize) -> SymmetricCircle {
    SymmetricCircle::from_arc(
        std_fiber(n),
        &move |x: f64| {
            let t = 1.0 - 2.0 * x;
            c(t, a * (1.0 - t * t))
        },
        grid,
    )
    .unwrap()
}

fn mean_zero_cos(circle: &SymmetricCircle, amp: f64) -> InvariantFunction {
    let h = InvariantFunction::from_fn(circle.n_half(), |u| amp * u.cos());
    circle.project_mean_zero(&h).unwrap()
}

#[test]
fn ivp_zero_velocity_is_constant() {
    let g = round(2, 32);
    let h0 = InvariantFunction::zero(32);
    let path = ivp_solve(&g, &h0, 0.3, 0.05).unwrap();
    assert!(path.reached(0.3));
    for snap in &path.snapshots {
        assert!(hausdorff_distance(snap, &g) < 1e-12);
    }
}

#[test]
fn ivp_velocity_recovery_round_n2() {
    let g = round(2, 64);
    let h0 = mean_zero_cos(&g, 1.0);
    let path = ivp_solve(&g, &h0, 0.1, 1.0 / 100.0).unwrap();
    assert!(path.reached(0.1), "horizon: {:?}", path.diagnostics.horizon);
    let res = verify_geodesic(&path).unwrap();
    assert!(res < 2e-3, "velocity recovery residual {res:.3e}");
    // Markers move along vertical leaves: Re ζ is conserved per marker.
    let last = path.endpoint();
    for k in 0..=64 {
        assert!(
            (last.zeta()[k].re - g.zeta()[k].re).abs() < 1e-8,
            "k={k}: Re ζ drifted by {:.3e}",
            (last.zeta()[k].re - g.zeta()[k].re).abs()
        );
    }
}

#[test]
fn ivp_velocity_recovery_n3() {
    let g = round(3, 64);
    let h0 = mean_zero_cos(&g, 1.0);
    let path = ivp_solve(&g, &h0, 0.1, 1.0 / 100.0).unwrap();
    assert!(path.reached(0.1), "horizon: {:?}", path.diagnostics.horizon);
    let res = verify_geodesic(&path).unwrap();
    assert!(res < 2e-3, "velocity recovery residual {res:.3e}");
}

#[test]
fn ivp_reversal_returns_home() {
    let g = round(2, 64);
    let h0 = mean_zero_cos(&g, 1.0);
    let fwd = ivp_solve(&g, &h0, 0.2, 1.0 / 100.0).unwrap();
    assert!(fwd.reached(0.2));
    // Transported velocity keeps the same values per marker label.
    let back = ivp_solve(fwd.endpoint(), &h0.scale(-1.0), 0.2, 1.0 / 100.0).unwrap();
    assert!(back.reached(0.2));
    let dist = hausdorff_distance(back.endpoint(), &g);
    assert!(dist < 1e-4, "round trip Hausdorff {dist:.3e}");
}

#[test]
fn bvp_identity() {
    let g = parabolic(2, 0.2, 48);
    let path = bvp_solve(&g, &g, &[0.0, 0.5, 1.0]).unwrap();
    let Generator::Bvp { s, h, .. } = &path.generator else { panic!() };
    assert!(s.iter().all(|x| x.abs() < 1e-9), "s not zero: {:?}", &s[..4]);
    assert!(h.sup_norm() < 1e-9);
    for snap in &path.snapshots {
        assert!(hausdorff_distance(snap, &g) < 1e-9);
    }
}

#[test]
fn bvp_round_to_parabolic_n2_vertical_geometry() {
    let g0 = round(2, 64);
    let g1 = parabolic(2, 0.3, 64);
    let path = bvp_solve(&g0, &g1, &[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
    let Generator::Bvp { h, .. } = &path.generator else { panic!() };
    // Vertical leaves: every snapshot keeps Re ζ(u) = cos u.
    for snap in &path.snapshots {
        for k in 0..=64 {
            let u = snap.u(k);
            assert!(
                (snap.zeta()[k].re - u.cos()).abs() < 1e-6,
                "Re ζ deviates at k={k}"
            );
        }
    }
    // h is even by construction and not identically zero.
    assert!(h.sup_norm() > 1e-3);
    // Endpoint snapshot must be γ1.
    assert!(hausdorff_distance(path.endpoint(), &g1) < 1e-6);
    // The audit threshold is calibrated at N = 128 and scaled by Δu²;
    // at N = 64 the honest bound is four times looser.
    let res = path.diagnostics.cross_check_residual.unwrap();
    assert!(res < 4e-4, "cross-check residual {res:.3e}");
}

#[test]
fn bvp_ivp_roundtrip_coarse() {
    for n in [2u32, 3] {
        let g0 = round(n, 64);
        let g1 = parabolic(n, 0.3, 64);
        let path = bvp_solve(&g0, &g1, &[]).unwrap();
        let Generator::Bvp { h, .. } = &path.generator else { panic!() };
        let ivp = ivp_solve(&g0, h, 1.0, 1.0 / 100.0).unwrap();
        assert!(ivp.reached(1.0), "n={n} horizon: {:?}", ivp.diagnostics.horizon);
        let dist = hausdorff_distance(ivp.endpoint(), &g1);
        assert!(dist < 5e-3, "n={n}: roundtrip Hausdorff {dist:.3e}");
    }
}

#[test]
fn distance_zero_and_symmetry() {
    let g0 = round(2, 64);
    let g1 = parabolic(2, 0.25, 64);
    assert!(distance(&g0, &g0).unwrap() < 1e-9);
    let d01 = distance(&g0, &g1).unwrap();
    let d10 = distance(&g1, &g0).unwrap();
    assert!(d01 > 1e-3);
    assert!(
        (d01 - d10).abs() / d01 < 1e-4,
        "asymmetry: {d01:.8} vs {d10:.8}"
    );
}

#[test]
fn transport_identity_and_isometry() {
    let g0 = round(2, 64);
    let map = transport(&g0, &g0).unwrap();
    for (k, &v) in map.v.iter().enumerate() {
        assert!((v - g0.u(k)).abs() < 1e-8, "identity transport v[{k}]");
    }
    let h = mean_zero_cos(&g0, 1.0);
    let back = pullback(&map, &h).unwrap();
    for k in 0..=64 {
        assert!((back.values()[k] - h.values()[k]).abs() < 1e-8);
    }

    let g1 = parabolic(2, 0.3, 64);
    let map01 = transport(&g0, &g1).unwrap();
    let h1 = InvariantFunction::from_fn(64, |u| u.cos());
    let pulled = pullback(&map01, &h1).unwrap();
    let lhs = g0.inner(&pulled, &pulled).unwrap();
    let rhs = g1.inner(&h1, &h1).unwrap();
    assert!(
        (lhs - rhs).abs() / rhs.abs() < 1e-4,
        "transport not isometric: {lhs:.8} vs {rhs:.8}"
    );
}

#[test]
fn transport_naturality() {
    let g0 = round(2, 64);
    let g1 = parabolic(2, 0.15, 64);
    let g2 = parabolic(2, 0.3, 64);
    let m02 = transport(&g0, &g2).unwrap();
    let m01 = transport(&g0, &g1).unwrap();
    let m12 = transport(&g1, &g2).unwrap();
    // Composite: v02 ≈ v12(v01(u)) with cubic interpolation of v12.
    let v12_fn = InvariantFunction::from_values(m12.v.clone()).unwrap();
    for k in 1..64 {
        let composed = super::ops::tests_interp(&v12_fn, m01.v[k]);
        assert!(
            (m02.v[k] - composed).abs() < 1e-5,
            "naturality at k={k}: {} vs {}",
            m02.v[k],
            composed
        );
    }
}

#[test]
fn verify_constant_path_is_zero() {
    let g = round(2, 48);
    let path = GeodesicPath {
        times: vec![0.0, 0.5, 1.0],
        snapshots: vec![g.clone(), g.clone(), g.clone()],
        generator: Generator::Ivp { h0: InvariantFunction::zero(48) },
        diagnostics: PathDiagnostics::default(),
    };
    assert_eq!(verify_geodesic(&path).unwrap(), 0.0);
}

#[test]
fn verify_flags_corrupted_path() {
    let g = round(2, 64);
    let h0 = mean_zero_cos(&g, 1.0);
    let path = ivp_solve(&g, &h0, 0.2, 1.0 / 50.0).unwrap();
    assert!(path.reached(0.2));
    // Corrupt: re-time the markers non-affinely by squashing the snapshot
    // sequence (markers slide along their leaves by a non-affine amount).
    let m = path.snapshots.len();
    let corrupted = GeodesicPath {
        times: path.times.clone(),
        snapshots: (0..m)
            .map(|j| {
                let jj = ((j * j) / m.max(1)).min(m - 1);
                path.snapshots[jj].clone()
            })
            .collect(),
        generator: path.generator.clone(),
        diagnostics: PathDiagnostics::default(),
    };
    let res = verify_geodesic(&corrupted).unwrap();
    assert!(res > 1e-1, "corrupted path residual only {res:.3e}");
}

#[test]
fn horizontal_family_checks() {
    let g0 = round(2, 64);
    let g1 = parabolic(2, 0.3, 64);
    let path = bvp_solve(&g0, &g1, &[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
    let res = check_horizontal_family(&path.snapshots).unwrap();
    assert!(res <= 1e-6, "BVP family horizontality residual {res:.3e}");

    // Negative control for n = 3: linear interpolation in ζ at fixed u is
    // not horizontal.
    let g0 = round(3, 64);
    let g1 = parabolic(3, 0.3, 64);
    let fiber = g0.fiber().clone();
    let mut family = vec![g0.clone()];
    for j in 1..=4 {
        let t = j as f64 / 4.0;
        let zeta: Vec<C64> = (0..=64)
            .map(|k| g0.zeta()[k] * (1.0 - t) + g1.zeta()[k] * t)
            .collect();
        let mut z = Vec::with_capacity(65);
        let mut prev = g0.dz_du(0);
        for (k, &zk) in zeta.iter().enumerate() {
            let u = PI * k as f64 / 64.0;
            if k == 0 || k == 64 {
                z.push(c(0.0, 0.0));
            } else {
                let q = fiber.eval_f(zk) / (u.sin() * u.sin());
                let w = q.sqrt();
                let cand = if (w - prev).norm() <= (-w - prev).norm() { w } else { -w };
                z.push(cand * u.sin());
                prev = cand;
            }
        }
        family.push(SymmetricCircle::from_samples(fiber.clone(), zeta, z).unwrap());
    }
    let res = check_horizontal_family(&family).unwrap();
    assert!(res > 1e-2, "linear interpolation looked horizontal: {res:.3e}");

    // Reparametrizing the same family makes it horizontal.
    let fixed = horizontal_reparametrize(&family).unwrap();
    let res = check_horizontal_family(&fixed).unwrap();
    assert!(res <= 1e-6, "reparametrized residual {res:.3e}");
}

#[test]
fn horizontal_reparametrize_idempotent_and_vertical() {
    let g0 = round(2, 48);
    let g1 = parabolic(2, 0.3, 48);
    let path = bvp_solve(&g0, &g1, &[0.0, 0.5, 1.0]).unwrap();
    let again = horizontal_reparametrize(&path.snapshots).unwrap();
    for (a, b) in path.snapshots.iter().zip(&again) {
        assert!(hausdorff_distance(a, b) < 1e-7);
    }
    // Linear-in-ζ interpolation for n = 2, reparametrized, recovers
    // Re ζ(u) = cos u on every slice (vertical leaves).
    let fiber = g0.fiber().clone();
    let mut family = vec![g0.clone()];
    for j in 1..=3 {
        let t = j as f64 / 3.0;
        let zeta: Vec<C64> = (0..=48)
            .map(|k| g0.zeta()[k] * (1.0 - t) + g1.zeta()[k] * t)
            .collect();
        let mut z = Vec::with_capacity(49);
        for (k, &zk) in zeta.iter().enumerate() {
            let u = PI * k as f64 / 48.0;
            if k == 0 || k == 48 {
                z.push(c(0.0, 0.0));
            } else {
                let q = fiber.eval_f(zk) / (u.sin() * u.sin());
                z.push(q.sqrt() * u.sin());
            }
        }
        family.push(SymmetricCircle::from_samples(fiber.clone(), zeta, z).unwrap());
    }
    let fixed = horizontal_reparametrize(&family).unwrap();
    for slice in &fixed {
        for k in 1..48 {
            let u = slice.u(k);
            assert!((slice.zeta()[k].re - u.cos()).abs() < 1e-6);
        }
    }
}

#[test]
fn triangle_identity_degenerate_cases() {
    let g0 = round(2, 64);
    let g1 = parabolic(2, 0.2, 64);
    // γ1 = γ0: residual reduces to comparing ĥ02 with itself.
    let res = triangle_identity(&g0, &g0, &g1).unwrap();
    assert!(res < 1e-4, "γ1 = γ0 residual {res:.3e}");
    // γ2 = γ0: ĥ01 = -φ* ĥ10.
    let res = triangle_identity(&g0, &g1, &g0).unwrap();
    assert!(res < 1e-3, "γ2 = γ0 residual {res:.3e}");
}

#[test]
fn triangle_identity_parabolic_family() {
    let g0 = round(2, 64);
    let g1 = parabolic(2, 0.2, 64);
    let g2 = parabolic(2, 0.4, 64);
    let res = triangle_identity(&g0, &g1, &g2).unwrap();
    assert!(res < 1e-3, "triangle residual {res:.3e}");
}

#[test]
fn exp_isometry_equal_velocities() {
    let g0 = round(2, 48);
    let h = mean_zero_cos(&g0, 0.05);
    let res = exp_isometry_check(&g0, &h, &h, 1.0 / 50.0).unwrap();
    assert!(res < 1e-8, "equal velocities give {res:.3e}");
}

#[test]
fn exp_isometry_against_zero() {
    // h2 = 0 reduces to distance(exp(h1), γ0) = ‖h1‖.
    let g0 = round(2, 64);
    let h1 = mean_zero_cos(&g0, 0.05);
    let res = exp_isometry_check(&g0, &h1, &InvariantFunction::zero(64), 1.0 / 100.0).unwrap();
    assert!(res < 1e-2, "exp isometry vs zero: {res:.3e}");
}

#[test]
fn ivp_matches_exact_flow_oracle_n2() {
    // For n = 2 and h0 = cos u on the round cycle, each marker obeys the
    // 1D ODE dy/dt = -1/g(x + iy) on its vertical line x = cos u, with
    // g = 1 + (x² + y²)/|1 - ζ²|. Integrate it finely as ground truth.
    let g = round(2, 64);
    let h0 = mean_zero_cos(&g, 1.0);
    let t_final = 0.1;
    let path = ivp_solve(&g, &h0, t_final, 1.0 / 100.0).unwrap();
    assert!(path.reached(t_final));
    let gdens = |x: f64, y: f64| -> f64 {
        let zeta = c(x, y);
        let f = c(1.0, 0.0) - zeta * zeta;
        1.0 + (x * x + y * y) / f.norm()
    };
    for k in 1..64 {
        let x = g.u(k).cos();
        let mut y = 0.0;
        let m = 4000;
        let dt = t_final / m as f64;
        for _ in 0..m {
            let k1 = -1.0 / gdens(x, y);
            let k2 = -1.0 / gdens(x, y + 0.5 * dt * k1);
            let k3 = -1.0 / gdens(x, y + 0.5 * dt * k2);
            let k4 = -1.0 / gdens(x, y + dt * k3);
            y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let got = path.endpoint().zeta()[k];
        assert!(
            (got.re - x).abs() < 1e-10,
            "k={k}: marker left its vertical leaf by {:.3e}",
            (got.re - x).abs()
        );
        assert!(
            (got.im - y).abs() < 1e-4,
            "k={k}: flow deviates from the exact oracle by {:.3e}",
            (got.im - y).abs()
        );
    }
}

#[test]
#[ignore]
fn probe_profiles() {
    // n=3 recovery profile
    let g = round(3, 64);
    let h0 = mean_zero_cos(&g, 1.0);
    let path = ivp_solve(&g, &h0, 0.1, 1.0 / 100.0).unwrap();
    let j = path.snapshots.len() / 2;
    let (sm, s0, sp) = (&path.snapshots[j - 1], &path.snapshots[j], &path.snapshots[j + 1]);
    let dtt = path.times[j + 1] - path.times[j - 1];
    eprintln!("== n=3 recovery dphi vs h0' ==");
    for k in (1..64).step_by(3) {
        let zt = (sp.z()[k] - sm.z()[k]) / dtt;
        let zetat = (sp.zeta()[k] - sm.zeta()[k]) / dtt;
        let dphi = (zt.conj() * s0.dz_du(k)).im + (zetat.conj() * s0.dzeta_du(k)).im;
        eprintln!("k={k:3} diff={:+.3e} |z|={:.3}", dphi - h0.derivative(k), s0.z()[k].norm());
    }
    // reversal profile n=2
    let g = round(2, 64);
    let h0 = mean_zero_cos(&g, 1.0);
    let fwd = ivp_solve(&g, &h0, 0.2, 1.0 / 100.0).unwrap();
    let back = ivp_solve(fwd.endpoint(), &h0.scale(-1.0), 0.2, 1.0 / 100.0).unwrap();
    eprintln!("== n=2 reversal zeta deviation ==");
    for k in (1..64).step_by(3) {
        let d = (back.endpoint().zeta()[k] - g.zeta()[k]).norm();
        eprintln!("k={k:3} dev={:.3e} |z|={:.3}", d, g.z()[k].norm());
    }
    panic!("probe");
}

#[test]
#[ignore]
fn probe_s_oracle_both_directions() {
    // Vertical-leaf oracle: flowing between the round cycle (y = 0) and the
    // parabola y = a sin²u along x = cos u, the flow time of the field of
    // cos∘P is ±∫ g(x + iy) dy with g = 1 + (x²+y²)/|1-ζ²|.
    let a = 0.25;
    let gdens = |x: f64, y: f64| -> f64 {
        let zeta = c(x, y);
        let f = c(1.0, 0.0) - zeta * zeta;
        1.0 + (x * x + y * y) / f.norm()
    };
    let s_exact = |u: f64, sign: f64| -> f64 {
        let x = u.cos();
        let y_top = a * u.sin() * u.sin();
        let m = 2000;
        let mut acc = 0.0;
        for i in 0..m {
            let y0 = y_top * i as f64 / m as f64;
            let y1 = y_top * (i + 1) as f64 / m as f64;
            acc += 0.5 * (gdens(x, y0) + gdens(x, y1)) * (y1 - y0);
        }
        sign * acc
    };
    let g0 = round(2, 64);
    let g1 = parabolic(2, a, 64);
    // Forward: round -> parabola: flow goes up, X points down: s < 0.
    let fwd = bvp_solve(&g0, &g1, &[]).unwrap();
    let Generator::Bvp { s: s_fwd, .. } = &fwd.generator else { panic!() };
    eprintln!("== forward (round->parab): s vs -oracle ==");
    for k in (1..64).step_by(7) {
        let u = g0.u(k);
        eprintln!("k={k:2} s={:+.7} exact={:+.7} diff={:+.2e}", s_fwd[k], s_exact(u, -1.0), s_fwd[k] - s_exact(u, -1.0));
    }
    // Loosen the audit so the reverse solve completes for inspection.
    let mut tol = crate::tolerance::ToleranceProfile::default();
    tol.cross_tol = 1.0;
    let fiber = Arc::new(
        MilnorFiber::with_tolerances(
            vec![c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)], 2, tol,
        ).unwrap(),
    );
    let g0l = SymmetricCircle::from_arc(fiber.clone(), &|x: f64| c(1.0 - 2.0 * x, 0.0), 64).unwrap();
    let g1l = SymmetricCircle::from_arc(fiber, &move |x: f64| { let t = 1.0 - 2.0 * x; c(t, a * (1.0 - t * t)) }, 64).unwrap();
    let rev = bvp_solve(&g1l, &g0l, &[]).unwrap();
    let Generator::Bvp { s: s_rev, h: h_rev, .. } = &rev.generator else { panic!() };
    eprintln!("== reverse (parab->round): s vs +oracle ==");
    for k in (1..64).step_by(7) {
        let u = g1l.u(k);
        eprintln!("k={k:2} s={:+.7} exact={:+.7} diff={:+.2e}", s_rev[k], s_exact(u, 1.0), s_rev[k] - s_exact(u, 1.0));
    }
    eprintln!("cross residual: {:?}", rev.diagnostics.cross_check_residual);
    eprintln!("h sup {:.4}", h_rev.sup_norm());
    // Per-band mismatch profiles via the public pieces: rebuild leaves and
    // areas indirectly by comparing h increments against band areas is what
    // cross_check does; instead dump h increments for both directions.
    let fwd2 = bvp_solve(&g0l, &g1l, &[]).unwrap();
    let Generator::Bvp { h: h_fwd, .. } = &fwd2.generator else { panic!() };
    eprintln!("fwd cross: {:?}", fwd2.diagnostics.cross_check_residual);
    for k in (1..63).step_by(5) {
        eprintln!("k={k:2} dh_fwd={:+.6e} dh_rev={:+.6e} sum={:+.2e}",
            h_fwd.values()[k+1]-h_fwd.values()[k],
            h_rev.values()[k+1]-h_rev.values()[k],
            (h_fwd.values()[k+1]-h_fwd.values()[k]) + (h_rev.values()[k+1]-h_rev.values()[k]));
    }
    panic!("probe");
}
