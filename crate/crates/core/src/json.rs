//! Serde representations of the on-disk JSON schemas.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::cycle::{InvariantFunction, SymmetricCircle};
use crate::error::{Error, Result};
use crate::fiber::MilnorFiber;
use crate::geodesic::{Generator, GeodesicPath};
use crate::tolerance::ToleranceProfile;
use crate::C64;

fn c(pair: [f64; 2]) -> C64 {
    C64::new(pair[0], pair[1])
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

/// `{"coeffs": [[re, im], ...], "n": int}`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiberJson {
    pub coeffs: Vec<[f64; 2]>,
    pub n: u32,
}

impl FiberJson {
    pub fn build(&self, tol: ToleranceProfile) -> Result<MilnorFiber> {
        MilnorFiber::with_tolerances(self.coeffs.iter().map(|&p| c(p)).collect(), self.n, tol)
    }

    pub fn of(fiber: &MilnorFiber) -> Self {
        FiberJson {
            coeffs: fiber.coeffs().iter().map(|&z| pair(z)).collect(),
            n: fiber.n(),
        }
    }
}

/// `{"roots": [[re, im], ...]}`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RootsJson {
    pub roots: Vec<[f64; 2]>,
}

/// `{"fiber": {...}, "N": int, "zeta": [...], "z": [...]}` over k = 0..=N.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CycleJson {
    pub fiber: FiberJson,
    #[serde(rename = "N")]
    pub n_grid: usize,
    pub zeta: Vec<[f64; 2]>,
    pub z: Vec<[f64; 2]>,
}

impl CycleJson {
    pub fn build(&self, tol: ToleranceProfile) -> Result<SymmetricCircle> {
        if self.zeta.len() != self.n_grid + 1 || self.z.len() != self.n_grid + 1 {
            return Err(Error::InvalidInput(
                "cycle arrays must have N+1 entries (k = 0..=N)".into(),
            ));
        }
        let fiber = Arc::new(self.fiber.build(tol)?);
        SymmetricCircle::from_samples(
            fiber,
            self.zeta.iter().map(|&p| c(p)).collect(),
            self.z.iter().map(|&p| c(p)).collect(),
        )
    }

    pub fn of(circle: &SymmetricCircle) -> Self {
        CycleJson {
            fiber: FiberJson::of(circle.fiber()),
            n_grid: circle.n_half(),
            zeta: circle.zeta().iter().map(|&z| pair(z)).collect(),
            z: circle.z().iter().map(|&z| pair(z)).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsJson {
    pub min_positivity_margin: f64,
    pub max_leaf_drift: f64,
    pub max_leaf_residual: f64,
    pub horizon: Option<String>,
    pub cross_check_residual: Option<f64>,
}

/// `{"times": [...], "snapshots": [...], "s": [...], "h": [...],
///   "distance": x, "diagnostics": {...}}`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeodesicJson {
    pub times: Vec<f64>,
    pub snapshots: Vec<CycleJson>,
    pub s: Option<Vec<f64>>,
    pub h: Vec<f64>,
    pub distance: Option<f64>,
    pub diagnostics: DiagnosticsJson,
}

impl GeodesicJson {
    pub fn of(path: &GeodesicPath, distance: Option<f64>) -> Self {
        let (s, h) = match &path.generator {
            Generator::Ivp { h0 } => (None, h0.values().to_vec()),
            Generator::Bvp { s, h, .. } => (Some(s.clone()), h.values().to_vec()),
        };
        GeodesicJson {
            times: path.times.clone(),
            snapshots: path.snapshots.iter().map(CycleJson::of).collect(),
            s,
            h,
            distance,
            diagnostics: DiagnosticsJson {
                min_positivity_margin: path.diagnostics.min_positivity_margin,
                max_leaf_drift: path.diagnostics.max_leaf_drift,
                max_leaf_residual: path.diagnostics.max_leaf_residual,
                horizon: path.diagnostics.horizon.clone(),
                cross_check_residual: path.diagnostics.cross_check_residual,
            },
        }
    }

    /// Rebuild the snapshot circles (e.g. for verification of a stored path).
    pub fn snapshots_built(&self, tol: &ToleranceProfile) -> Result<Vec<SymmetricCircle>> {
        self.snapshots.iter().map(|c| c.build(tol.clone())).collect()
    }

    pub fn velocity(&self) -> Result<InvariantFunction> {
        InvariantFunction::from_values(self.h.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_round_trip() {
        let fiber = Arc::new(
            MilnorFiber::new(
                vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0)],
                2,
            )
            .unwrap(),
        );
        let circle =
            SymmetricCircle::from_arc(fiber, &|x: f64| C64::new(1.0 - 2.0 * x, 0.0), 32).unwrap();
        let js = CycleJson::of(&circle);
        let text = serde_json::to_string(&js).unwrap();
        let parsed: CycleJson = serde_json::from_str(&text).unwrap();
        let rebuilt = parsed.build(ToleranceProfile::default()).unwrap();
        for k in 0..=32 {
            assert!((rebuilt.zeta()[k] - circle.zeta()[k]).norm() < 1e-15);
            assert!((rebuilt.z()[k] - circle.z()[k]).norm() < 1e-15);
        }
    }
}
