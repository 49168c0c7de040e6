//! Centralized tolerances.
//!
//! All numeric thresholds used across the crate live here, either as fields of
//! the runtime-configurable [`Tolerances`] record or as fixed contract
//! constants. Tests assert against these names instead of repeating literals.

use serde::{Deserialize, Serialize};

/// Runtime-configurable tolerance record, threaded through the public API.
///
/// The defaults are the contract values used by the verification suites; they
/// are chosen so that each downstream check has at least an order of magnitude
/// of slack over the accumulated floating-point error of the quantities it
/// compares at desk scale (dimension <= 8, coordinates O(1..10)).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Tolerances {
    /// Accepted deviation of `gauge(x)` from 1 for points claimed on a boundary.
    pub boundary_tol: f64,
    /// Accepted max norm of the reflection-law residual on witness trajectories.
    pub criticality_tol: f64,
    /// Simplex-diameter stopping width for derivative-free local descent.
    pub search_tol: f64,
    /// Accepted residual for convex-combination certificates (weights and hulls).
    pub hull_tol: f64,
    /// Confidence level of Monte Carlo volume intervals.
    pub mc_ci_level: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            boundary_tol: 1e-9,
            criticality_tol: 1e-6,
            search_tol: 1e-10,
            hull_tol: 1e-9,
            mc_ci_level: 0.99,
        }
    }
}

/// `boundary_point` returns points with `|gauge - 1|` below this bound.
pub const BOUNDARY_POINT_TOL: f64 = 1e-12;

/// Residual bound honored by `root_on_ray`: the returned `t` has `|g(t)|` below this.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-11;

/// Bisection interval width at which `root_on_ray` switches to polishing.
pub const ROOT_BRACKET_WIDTH: f64 = 1e-13;

/// Central-difference step for finite-difference gradient checks.
pub const FD_STEP: f64 = 1e-6;

/// Euclidean distance below which two consecutive bounce points are merged
/// (an orbit that lost a bounce during descent).
pub const MERGE_TOL: f64 = 1e-6;

/// Relative disagreement between the trajectory search and the two-bounce
/// formula above which the pair is flagged as a falsification candidate.
pub const ROUTE_AGREEMENT_TOL: f64 = 1e-3;

/// Relative disagreement allowed between the sharpness-extrapolated capacity
/// of a smoothed polytope pair and the two-bounce value on the originals
/// (smoothing bias is first order in the inverse sharpness, so the
/// extrapolated value carries an `O(s^-2)` error at `s = 8, 16`).
pub const SMOOTHING_AGREEMENT_TOL: f64 = 2e-2;

/// Euclidean hull-distance (relative to the body scale) below which a merged
/// search polygon is accepted as containing the origin in its hull.
pub const SEARCH_FEASIBILITY_TOL: f64 = 1e-6;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_positive_and_ordered() {
        let t = Tolerances::default();
        for v in [
            t.boundary_tol,
            t.criticality_tol,
            t.search_tol,
            t.hull_tol,
            BOUNDARY_POINT_TOL,
            ROOT_RESIDUAL_TOL,
            ROOT_BRACKET_WIDTH,
            FD_STEP,
            MERGE_TOL,
            ROUTE_AGREEMENT_TOL,
            SMOOTHING_AGREEMENT_TOL,
            SEARCH_FEASIBILITY_TOL,
        ] {
            assert!(v > 0.0 && v.is_finite());
        }
        assert!(t.mc_ci_level > 0.5 && t.mc_ci_level < 1.0);
        // Boundary membership must be stricter than the criticality check that
        // consumes boundary points, and root residuals stricter than both.
        assert!(BOUNDARY_POINT_TOL < t.boundary_tol);
        assert!(t.boundary_tol < t.criticality_tol);
        assert!(ROOT_RESIDUAL_TOL < t.boundary_tol);
    }
}
