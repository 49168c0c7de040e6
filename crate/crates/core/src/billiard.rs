//! Billiard trajectories in a table `K` whose reflection geometry is induced
//! by a second body `T`.
//!
//! A closed trajectory is a polygon of bounce points `q_1 … q_m` on `∂K`.
//! Edge lengths are measured by the support function `h_T`, and each edge
//! carries a momentum `p_i ∈ ∂T` realizing `h_T(q_{i+1} - q_i)`. At a critical
//! polygon the momentum jump at each vertex aligns with the table normal:
//! `p_{i-1} - p_i = λ_i n_K(q_i)` with `λ_i ≥ 0`, which is the reflection law
//! the bounce map integrates forward.
//!
//! Sign convention: momenta stored here are the *variational* ones,
//! `p_i = argmax_{p ∈ T} <p, q_{i+1} - q_i>`, so the vertex identity above
//! holds as written. The dynamical momentum driving the flow between bounces
//! is its antipode (`T = -T`), which is why the bounce map moves along
//! `-∇g_T(p)`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::ConvexBody;
use crate::numerics::{conv_membership, root_on_ray, HullMembershipCertificate};
use crate::tol::Tolerances;

/// A closed billiard polygon with its edge momenta and vertex multipliers.
#[derive(Clone, Debug)]
pub struct BilliardTrajectory {
    /// Bounce points on `∂K`, cyclically ordered.
    pub bounce_points: Vec<DVector<f64>>,
    /// `p_i` realizes the support of edge `q_i → q_{i+1}` on `T`.
    pub momenta: Vec<DVector<f64>>,
    /// Reflection multipliers `λ_i` from the least-squares fit at each vertex;
    /// empty when `K` carries no normal field (vertex-form polytope).
    pub multipliers: Vec<f64>,
    /// `Σ_i h_T(q_{i+1} - q_i)`.
    pub length: f64,
}

impl BilliardTrajectory {
    /// Assembles a trajectory from bounce points: computes momenta by support
    /// lookup on `T`, the length, and (when `K` has a normal field) the
    /// reflection multipliers.
    pub fn from_points(
        k: &ConvexBody,
        t: &ConvexBody,
        bounce_points: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let momenta = support_momenta(t, &bounce_points)?;
        let mut length = 0.0;
        let m = bounce_points.len();
        for i in 0..m {
            length += t.support(&(&bounce_points[(i + 1) % m] - &bounce_points[i]))?;
        }
        let multipliers = match criticality_report(k, t, &bounce_points, &momenta) {
            Ok(report) => report.multipliers,
            Err(Error::NotSmooth(_)) => Vec::new(),
            Err(e) => return Err(e),
        };
        Ok(BilliardTrajectory { bounce_points, momenta, multipliers, length })
    }

    pub fn bounce_count(&self) -> usize {
        self.bounce_points.len()
    }
}

/// Momentum of each edge by support lookup (no smoothness requirement; on
/// polytope `T` a face-maximizer tie resolves by the deterministic pivot
/// order of the support solver).
pub(crate) fn support_momenta(
    t: &ConvexBody,
    bounce_points: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    let m = bounce_points.len();
    if m < 2 {
        return Err(Error::InvalidInput("a closed trajectory needs at least 2 bounce points".into()));
    }
    let mut momenta = Vec::with_capacity(m);
    for i in 0..m {
        let edge = &bounce_points[(i + 1) % m] - &bounce_points[i];
        if edge.norm() < 1e-12 {
            return Err(Error::InvalidInput(format!("zero edge between bounces {i} and {}", (i + 1) % m)));
        }
        momenta.push(t.support_point(&edge)?);
    }
    Ok(momenta)
}

/// Edge momenta `p_i = argmax_{p ∈ T} <p, q_{i+1} - q_i>`.
///
/// Requires a smooth strictly convex `T` so the maximizer (and hence the
/// reflection law downstream) is unique.
pub fn edge_momenta(
    t: &ConvexBody,
    bounce_points: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    if !t.is_smooth() {
        return Err(Error::NotSmooth(
            "edge momenta need a smooth strictly convex geometry body; smooth polytopes first".into(),
        ));
    }
    support_momenta(t, bounce_points)
}

/// Vertex-by-vertex diagnostics of the reflection law.
#[derive(Clone, Debug)]
pub struct CriticalityReport {
    /// `‖p_{i-1} - p_i - λ_i n_K(q_i)‖₂` per vertex.
    pub residuals: Vec<f64>,
    /// Fitted multipliers `λ_i` (nonnegative at a genuine critical polygon).
    pub multipliers: Vec<f64>,
    /// `‖Σ_i λ_i n_K(q_i)‖₂` — vanishes for closed trajectories because the
    /// momentum jumps telescope.
    pub closure_residual: f64,
    pub max_residual: f64,
    pub min_multiplier: f64,
}

/// Fits the reflection multiplier at each vertex and reports the residuals.
///
/// For each `i`, projects the momentum jump `p_{i-1} - p_i` onto the outward
/// normal at `q_i`: `λ_i = <Δ_i, n_i>/<n_i, n_i>`, residual
/// `r_i = Δ_i - λ_i n_i`. Residual magnitudes are diagnostics, not errors.
pub fn criticality_report(
    k: &ConvexBody,
    t: &ConvexBody,
    bounce_points: &[DVector<f64>],
    momenta: &[DVector<f64>],
) -> Result<CriticalityReport> {
    let m = bounce_points.len();
    if momenta.len() != m || m < 2 {
        return Err(Error::InvalidInput("momenta must pair with bounce points".into()));
    }
    let _ = t; // momenta are supplied; `t` kept for signature symmetry and future validation
    let mut residuals = Vec::with_capacity(m);
    let mut multipliers = Vec::with_capacity(m);
    let mut weighted_normal_sum = DVector::zeros(bounce_points[0].len());
    for i in 0..m {
        let prev = (i + m - 1) % m;
        let jump = &momenta[prev] - &momenta[i];
        let normal = k.normal_at(&bounce_points[i])?;
        let lambda = jump.dot(&normal) / normal.dot(&normal);
        let residual = (&jump - &normal * lambda).norm();
        weighted_normal_sum += &normal * lambda;
        residuals.push(residual);
        multipliers.push(lambda);
    }
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    let min_multiplier = multipliers.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(CriticalityReport {
        residuals,
        multipliers,
        closure_residual: weighted_normal_sum.norm(),
        max_residual,
        min_multiplier,
    })
}

/// LP certificate that the origin lies in the hull of the outward normals at
/// the bounce points — the closedness condition every critical trajectory
/// satisfies (the multipliers themselves are valid weights after
/// normalization).
pub fn normal_hull_certificate(
    k: &ConvexBody,
    bounce_points: &[DVector<f64>],
    tol: &Tolerances,
) -> Result<HullMembershipCertificate> {
    let mut normals = Vec::with_capacity(bounce_points.len());
    for q in bounce_points {
        normals.push(k.normal_at(q)?);
    }
    let origin = DVector::zeros(k.dim());
    conv_membership(&normals, &origin, tol)
}

/// One forward step of the billiard dynamics, or the reason it stopped.
#[derive(Clone, Debug)]
pub enum BounceOutcome {
    /// Proper reflection: the next bounce point and the next (dynamical)
    /// momentum, both on their boundaries.
    Proper { q_next: DVector<f64>, p_next: DVector<f64> },
    /// The motion ray is tangent to `∂K` (or the momentum chord degenerates):
    /// the orbit would glide along the boundary. Detected and reported, never
    /// integrated.
    GlidingOnset { tangency: f64 },
}

/// Advances one bounce of the `(K, T)` dynamics from `(q, p)`:
/// the point travels along `-∇g_T(p)` to the far boundary intersection `q'`,
/// then the momentum jumps along the chord `p + s ∇g_K(q')` to its second
/// boundary intersection `p'`.
///
/// Both bodies must be smooth and strictly convex; `q ∈ ∂K`, `p ∈ ∂T`
/// (dynamical momentum). Tangential starts are reported as
/// [`BounceOutcome::GlidingOnset`].
pub fn bounce_map(
    k: &ConvexBody,
    t: &ConvexBody,
    q: &DVector<f64>,
    p: &DVector<f64>,
    tol: &Tolerances,
) -> Result<BounceOutcome> {
    if !k.is_smooth() || !t.is_smooth() {
        return Err(Error::NotSmooth("bounce map needs smooth strictly convex bodies".into()));
    }
    let gq = k.gauge(q)?;
    if (gq - 1.0).abs() > 10.0 * tol.boundary_tol {
        return Err(Error::InvalidInput(format!("q is not on the table boundary (gauge {gq:.12})")));
    }
    let gp = t.gauge(p)?;
    if (gp - 1.0).abs() > 10.0 * tol.boundary_tol {
        return Err(Error::InvalidInput(format!("p is not on the geometry boundary (gauge {gp:.12})")));
    }

    let d = -t.gauge_gradient(p)?;
    let nq = k.gauge_gradient(q)?;
    // The ray enters the interior iff the directional derivative of g_K is
    // negative; near-zero means tangency, clearly positive means the pair is
    // not a forward state of the flow at all.
    let entry = nq.dot(&d) / (nq.norm() * d.norm());
    if entry > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "momentum moves the point outward (cosine {entry:.3e}); not a forward state"
        )));
    }
    if entry >= -1e-9 {
        return Ok(BounceOutcome::GlidingOnset { tangency: entry });
    }
    let q_next = far_chord_point(k, q, &d)?;

    let u = k.gauge_gradient(&q_next)?;
    // Transversality on the momentum chord: g_T must initially decrease.
    let slide = t.gauge_gradient(p)?.dot(&u) / (t.gauge_gradient(p)?.norm() * u.norm());
    if slide >= -1e-9 {
        return Ok(BounceOutcome::GlidingOnset { tangency: slide });
    }
    let p_next = far_chord_point(t, p, &u)?;
    Ok(BounceOutcome::Proper { q_next, p_next })
}

/// Second intersection of the ray `x + s·dir` (s > 0) with `∂B`, starting
/// from a boundary point `x` whose ray enters the interior.
///
/// The gauge along the ray is convex with value 1 at `s = 0`, so the far root
/// is bracketed by stepping: halve an initial step until the gauge drops
/// below 1, then double until it exceeds 1 again.
fn far_chord_point(b: &ConvexBody, x: &DVector<f64>, dir: &DVector<f64>) -> Result<DVector<f64>> {
    let g = |s: f64| -> f64 { b.gauge(&(x + dir * s)).map(|v| v - 1.0).unwrap_or(f64::INFINITY) };
    // Scale-aware initial step: the chord length is at most twice the support
    // of the body in the ray direction over the gauge of the direction.
    let mut lo = 1.0;
    let mut tries = 0;
    while g(lo) >= 0.0 {
        lo *= 0.5;
        tries += 1;
        if tries > 60 {
            return Err(Error::Bracket("ray does not enter the body interior".into()));
        }
    }
    let mut hi = lo * 2.0;
    tries = 0;
    while g(hi) <= 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::Bracket("ray never exits the body (unbounded?)".into()));
        }
    }
    let dg = |s: f64| -> f64 {
        b.gauge_gradient(&(x + dir * s)).map(|grad| grad.dot(dir)).unwrap_or(0.0)
    };
    let s_star = root_on_ray(g, Some(&dg), lo, hi)?;
    Ok(x + dir * s_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{random_unit_vector, stream_rng};
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn disk() -> ConvexBody {
        ConvexBody::ball(2)
    }

    fn diameter_points() -> Vec<DVector<f64>> {
        vec![dvector![1.0, 0.0], dvector![-1.0, 0.0]]
    }

    #[test]
    fn edge_momenta_hand_values() {
        let momenta = edge_momenta(&disk(), &diameter_points()).unwrap();
        assert_relative_eq!(momenta[0][0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(momenta[1][0], 1.0, epsilon = 1e-12);
        // Realization identity <p_i, edge_i> = h_T(edge_i).
        let edge = dvector![-2.0, 0.0];
        assert_relative_eq!(momenta[0].dot(&edge), disk().support(&edge).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn edge_momenta_rejects_polytope_geometry() {
        assert!(matches!(
            edge_momenta(&ConvexBody::cross_polytope(2), &diameter_points()),
            Err(Error::NotSmooth(_))
        ));
    }

    #[test]
    fn diameter_orbit_is_critical_with_multiplier_two() {
        let k = disk();
        let traj = BilliardTrajectory::from_points(&k, &disk(), diameter_points()).unwrap();
        assert_relative_eq!(traj.length, 4.0, epsilon = 1e-12);
        let report = criticality_report(&k, &disk(), &traj.bounce_points, &traj.momenta).unwrap();
        assert!(report.max_residual < 1e-12);
        assert_relative_eq!(report.multipliers[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(report.multipliers[1], 2.0, epsilon = 1e-12);
        assert!(report.closure_residual < 1e-12);
    }

    #[test]
    fn perturbed_polygon_fails_criticality() {
        let k = disk();
        let ang: f64 = 2.4;
        let pts = vec![
            dvector![1.0, 0.0],
            dvector![ang.cos(), ang.sin()],
            dvector![(-ang / 2.0).cos(), (-ang / 2.0).sin()],
        ];
        let momenta = edge_momenta(&disk(), &pts).unwrap();
        let report = criticality_report(&k, &disk(), &pts, &momenta).unwrap();
        assert!(report.max_residual > 1e-3, "irregular triangle should not be critical");
    }

    #[test]
    fn length_matches_momentum_pairing() {
        let k = ConvexBody::ellipsoid_diag(&[2.0, 1.0]).unwrap();
        let t = ConvexBody::lp_ball_unit(2, 3.0).unwrap();
        let mut rng = stream_rng(21, 0);
        for _ in 0..20 {
            let pts: Vec<DVector<f64>> = (0..4)
                .map(|_| k.boundary_point(&random_unit_vector(&mut rng, 2)).unwrap())
                .collect();
            if let Ok(traj) = BilliardTrajectory::from_points(&k, &t, pts) {
                let paired: f64 = (0..4)
                    .map(|i| {
                        let edge = &traj.bounce_points[(i + 1) % 4] - &traj.bounce_points[i];
                        traj.momenta[i].dot(&edge)
                    })
                    .sum();
                assert_relative_eq!(traj.length, paired, epsilon = 1e-9, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn normal_certificate_for_antipodal_pair() {
        let tol = Tolerances::default();
        let cert = normal_hull_certificate(&disk(), &diameter_points(), &tol).unwrap();
        assert!(cert.residual <= tol.hull_tol);
        assert_relative_eq!(cert.weights[0], 0.5, epsilon = 1e-9);
        assert_relative_eq!(cert.weights[1], 0.5, epsilon = 1e-9);
        // A single bounce point can never close.
        assert!(normal_hull_certificate(&disk(), &diameter_points()[..1], &tol).is_err());
    }

    #[test]
    fn bounce_map_disk_hand_orbit() {
        let tol = Tolerances::default();
        let q = dvector![1.0, 0.0];
        let p = dvector![1.0, 0.0];
        match bounce_map(&disk(), &disk(), &q, &p, &tol).unwrap() {
            BounceOutcome::Proper { q_next, p_next } => {
                assert_relative_eq!(q_next[0], -1.0, epsilon = 1e-10);
                assert_relative_eq!(q_next[1], 0.0, epsilon = 1e-10);
                assert_relative_eq!(p_next[0], -1.0, epsilon = 1e-10);
                // Second application returns to the start: period two.
                match bounce_map(&disk(), &disk(), &q_next, &p_next, &tol).unwrap() {
                    BounceOutcome::Proper { q_next: q2, p_next: p2 } => {
                        assert_relative_eq!((q2 - q).norm(), 0.0, epsilon = 1e-9);
                        assert_relative_eq!((p2 - p).norm(), 0.0, epsilon = 1e-9);
                    }
                    other => panic!("expected proper bounce, got {other:?}"),
                }
            }
            other => panic!("expected proper bounce, got {other:?}"),
        }
    }

    #[test]
    fn bounce_map_preserves_boundaries() {
        let tol = Tolerances::default();
        let k = ConvexBody::ellipsoid_diag(&[2.0, 1.0]).unwrap();
        let t = ConvexBody::lp_ball_unit(2, 3.0).unwrap();
        let mut rng = stream_rng(22, 1);
        let mut proper = 0;
        for _ in 0..200 {
            let q = k.boundary_point(&random_unit_vector(&mut rng, 2)).unwrap();
            let mut p = t.boundary_point(&random_unit_vector(&mut rng, 2)).unwrap();
            // Orient the momentum so the motion ray points inward (the
            // antipode reverses the ray by central symmetry).
            let n = k.gauge_gradient(&q).unwrap();
            if n.dot(&-t.gauge_gradient(&p).unwrap()) > 0.0 {
                p = -p;
            }
            match bounce_map(&k, &t, &q, &p, &tol).unwrap() {
                BounceOutcome::Proper { q_next, p_next } => {
                    proper += 1;
                    assert!((k.gauge(&q_next).unwrap() - 1.0).abs() < 1e-10);
                    assert!((t.gauge(&p_next).unwrap() - 1.0).abs() < 1e-10);
                }
                BounceOutcome::GlidingOnset { .. } => {}
            }
        }
        assert!(proper > 190, "oriented starts should bounce properly ({proper}/200)");
    }

    #[test]
    fn tangential_start_reports_gliding() {
        let tol = Tolerances::default();
        // Motion direction -∇g_T(p) = (0, 1) is tangent to the disk at (1, 0).
        let q = dvector![1.0, 0.0];
        let p = dvector![0.0, -1.0];
        match bounce_map(&disk(), &disk(), &q, &p, &tol).unwrap() {
            BounceOutcome::GlidingOnset { tangency } => assert!(tangency.abs() < 1e-12),
            other => panic!("expected gliding onset, got {other:?}"),
        }
    }

    #[test]
    fn euclidean_geometry_gives_equal_angle_reflection() {
        // With T a Euclidean ball the bounce is the classical mirror law:
        // outgoing direction = incoming reflected across the tangent plane.
        let tol = Tolerances::default();
        let tables = [
            ConvexBody::ellipsoid_diag(&[2.0, 1.0]).unwrap(),
            ConvexBody::lp_ball_unit(2, 3.0).unwrap(),
        ];
        let t = disk();
        let mut rng = stream_rng(23, 2);
        for table in &tables {
            let mut checked = 0;
            while checked < 100 {
                let q = table.boundary_point(&random_unit_vector(&mut rng, 2)).unwrap();
                let mut p = t.boundary_point(&random_unit_vector(&mut rng, 2)).unwrap();
                if table.gauge_gradient(&q).unwrap().dot(&-t.gauge_gradient(&p).unwrap()) > 0.0 {
                    p = -p;
                }
                let (q_next, p_next) = match bounce_map(table, &t, &q, &p, &tol).unwrap() {
                    BounceOutcome::Proper { q_next, p_next } => (q_next, p_next),
                    BounceOutcome::GlidingOnset { .. } => continue,
                };
                checked += 1;
                let d_in = -t.gauge_gradient(&p).unwrap();
                let d_out = -t.gauge_gradient(&p_next).unwrap();
                let n = table.gauge_gradient(&q_next).unwrap();
                let n_hat = &n / n.norm();
                let reflected = &d_in - &n_hat * (2.0 * d_in.dot(&n_hat));
                let err = (&d_out / d_out.norm() - &reflected / reflected.norm()).norm();
                assert!(err <= 1e-8, "reflection mismatch {err}");
            }
        }
    }
}
