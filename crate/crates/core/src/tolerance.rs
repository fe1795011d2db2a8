//! Numeric tolerances, collected in one overridable record.

use serde::{Deserialize, Serialize};

/// All tunable tolerances and guard radii. Every operation that needs a
/// threshold reads it from here; the CLI exposes each field as an override.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ToleranceProfile {
    /// Root simplicity: roots must be separated by at least
    /// `max(root_simplicity_rel * max|root|, root_simplicity_floor)`.
    pub root_simplicity_rel: f64,
    pub root_simplicity_floor: f64,
    /// Residual bound for polished roots, relative to `1 + max|coeff|`.
    pub root_residual: f64,
    /// Minimum distance a tracked path must keep from the roots of `f`.
    pub branch_clearance: f64,
    /// Relative residual bound `|z^2 - f(ζ)| <= branch_residual * (1 + |f|)`.
    pub branch_residual: f64,
    /// Positivity verdict threshold on the normalized margin `|Re ρ|/|ρ|`.
    pub positivity_floor: f64,
    /// Constant-argument threshold (radians) for the specialness test.
    pub special_tol: f64,
    /// A-posteriori leaf-condition residual bound along accepted traces.
    pub leaf_tol: f64,
    /// Local truncation tolerance of the adaptive leaf tracer.
    pub trace_tol: f64,
    /// Largest arclength step the tracer may take.
    pub trace_max_step: f64,
    /// Exclusion radius around singular points, in the (r, θ) chart metric.
    pub sing_radius: f64,
    /// Chart radius factor: polar chart of root j extends to
    /// `chart_radius_factor * sqrt(d_j |f'(ζ_j)|)` in |z|, with `d_j` the
    /// distance to the nearest other root.
    pub chart_radius_factor: f64,
    /// Relative z-agreement required to accept a leaf/curve intersection on
    /// the correct sheet of the double cover.
    pub sheet_match_rel: f64,
    /// Arclength budget for leafwise matching, as a multiple of the
    /// geometric scale of the configuration.
    pub match_arclength_factor: f64,
    /// Tolerance of the h = A + const cross-check in the BVP solver,
    /// relative to max(1, ‖h‖∞).
    pub cross_tol: f64,
    /// Mean-zero certification: `|∫ h dμ| <= mean_zero_tol * ∫ |h| dμ`.
    pub mean_zero_tol: f64,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        ToleranceProfile {
            root_simplicity_rel: 1e-8,
            root_simplicity_floor: 1e-10,
            root_residual: 1e-10,
            branch_clearance: 1e-6,
            branch_residual: 1e-12,
            positivity_floor: 1e-6,
            special_tol: 1e-6,
            leaf_tol: 1e-8,
            trace_tol: 1e-11,
            trace_max_step: 0.02,
            sing_radius: 1e-4,
            chart_radius_factor: 0.25,
            sheet_match_rel: 0.2,
            match_arclength_factor: 25.0,
            cross_tol: 1e-4,
            mean_zero_tol: 1e-9,
        }
    }
}

impl ToleranceProfile {
    /// Set a field by name; used by the CLI `--tol key=value` overrides.
    pub fn set(&mut self, key: &str, value: f64) -> bool {
        match key {
            "root_simplicity_rel" => self.root_simplicity_rel = value,
            "root_simplicity_floor" => self.root_simplicity_floor = value,
            "root_residual" => self.root_residual = value,
            "branch_clearance" => self.branch_clearance = value,
            "branch_residual" => self.branch_residual = value,
            "positivity_floor" => self.positivity_floor = value,
            "special_tol" => self.special_tol = value,
            "leaf_tol" => self.leaf_tol = value,
            "trace_tol" => self.trace_tol = value,
            "trace_max_step" => self.trace_max_step = value,
            "sing_radius" => self.sing_radius = value,
            "chart_radius_factor" => self.chart_radius_factor = value,
            "sheet_match_rel" => self.sheet_match_rel = value,
            "match_arclength_factor" => self.match_arclength_factor = value,
            "cross_tol" => self.cross_tol = value,
            "mean_zero_tol" => self.mean_zero_tol = value,
            _ => return false,
        }
        true
    }
}
