//! Convex-hull membership certificates and hull distances.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::lp;
use crate::tol::Tolerances;

/// A verified convex-combination certificate: nonnegative weights summing to
/// one whose combination reproduces the target within `residual`.
#[derive(Clone, Debug)]
pub struct HullMembershipCertificate {
    /// One weight per input point; at most `dim + 1` are nonzero.
    pub weights: Vec<f64>,
    /// Euclidean norm of `sum w_i x_i - target`, plus any weight-sum defect.
    pub residual: f64,
}

impl HullMembershipCertificate {
    /// Re-verifies the certificate against `points` and `target` by direct
    /// substitution; returns the combined residual.
    pub fn verify(&self, points: &[DVector<f64>], target: &DVector<f64>) -> f64 {
        let mut acc = DVector::zeros(target.len());
        let mut sum = 0.0;
        let mut min_w: f64 = 0.0;
        for (p, &w) in points.iter().zip(&self.weights) {
            acc += p * w;
            sum += w;
            min_w = min_w.min(w);
        }
        (acc - target).norm() + (sum - 1.0).abs() + (-min_w).max(0.0)
    }
}

/// Decides `target ∈ conv{points}` and, when feasible, returns a certificate
/// with at most `n + 1` nonzero weights.
///
/// Infeasibility is reported as [`Error::HullInfeasible`] carrying the best
/// achieved residual (useful as a violation magnitude in diagnostics).
pub fn conv_membership(points: &[DVector<f64>], target: &DVector<f64>, tol: &Tolerances) -> Result<HullMembershipCertificate> {
    if points.is_empty() {
        return Err(Error::InvalidInput("empty point set".into()));
    }
    let n = target.len();
    for p in points {
        if p.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: p.len() });
        }
    }
    let mut weights = lp::conv_weights(points, target).map_err(|residual| Error::HullInfeasible { residual })?;
    for w in &mut weights {
        if *w < 0.0 {
            *w = 0.0; // clip LP round-off
        }
    }
    let nonzero = weights.iter().filter(|&&w| w > 1e-12).count();
    if nonzero > n + 1 {
        weights = caratheodory_reduce(points, target, &weights);
    }
    let cert = HullMembershipCertificate { weights, residual: 0.0 };
    let residual = cert.verify(points, target);
    if residual > tol.hull_tol {
        return Err(Error::HullInfeasible { residual });
    }
    Ok(HullMembershipCertificate { residual, ..cert })
}

/// Reduces a convex-combination certificate to at most `n + 1` nonzero weights
/// without changing the represented point.
///
/// Each round finds an affine dependence among the currently supported points
/// and walks along it until some weight vanishes.
pub fn caratheodory_reduce(points: &[DVector<f64>], target: &DVector<f64>, weights: &[f64]) -> Vec<f64> {
    let n = target.len();
    let mut w: Vec<f64> = weights.to_vec();
    loop {
        let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 1e-13).collect();
        if support.len() <= n + 1 {
            break;
        }
        // Rows: point coordinates plus the all-ones row (affine dependence),
        // padded with zero rows to a square matrix so the full SVD exposes the
        // nullspace (a thin SVD of the wide matrix would not).
        let k = support.len();
        let mat = DMatrix::from_fn(k, k, |r, c| {
            if r < n {
                points[support[c]][r]
            } else if r == n {
                1.0
            } else {
                0.0
            }
        });
        let svd = mat.svd(false, true);
        let vt = svd.v_t.expect("svd with v_t requested");
        let smallest = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("nonempty singular values");
        let alpha = vt.row(smallest).transpose();
        // Ensure some strictly positive entry so the ratio step is defined.
        let has_pos = alpha.iter().any(|&a| a > 1e-12);
        let alpha: Vec<f64> = if has_pos { alpha.iter().copied().collect() } else { alpha.iter().map(|a| -a).collect() };
        let mut theta = f64::INFINITY;
        for (idx, &a) in alpha.iter().enumerate() {
            if a > 1e-12 {
                theta = theta.min(w[support[idx]] / a);
            }
        }
        if !theta.is_finite() {
            break; // numerically null dependence; give up rather than loop
        }
        for (idx, &a) in alpha.iter().enumerate() {
            let wi = &mut w[support[idx]];
            *wi -= theta * a;
            if *wi < 1e-13 {
                *wi = 0.0;
            }
        }
    }
    w
}

/// Euclidean distance from the origin to `conv{points}` (0 when inside).
///
/// Exact at desk scale: the minimum-norm point lies in the relative interior
/// of a face spanned by an affinely independent subset of at most `n + 1`
/// points, so all such subsets are enumerated and the best in-face projection
/// is taken. Intended for small point sets (the trajectory search uses m <= 8).
pub fn hull_distance(points: &[DVector<f64>]) -> f64 {
    let m = points.len();
    if m == 0 {
        return f64::INFINITY;
    }
    let n = points[0].len();
    let max_size = (n + 1).min(m);
    let mut best = points.iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min);
    let mut subset: Vec<usize> = Vec::with_capacity(max_size);
    // Iterative enumeration of subsets of size 2..=max_size.
    fn recurse(points: &[DVector<f64>], subset: &mut Vec<usize>, next: usize, want: usize, best: &mut f64) {
        if subset.len() == want {
            if let Some(dist) = face_distance(points, subset) {
                if dist < *best {
                    *best = dist;
                }
            }
            return;
        }
        let m = points.len();
        let remaining = want - subset.len();
        for i in next..=(m - remaining) {
            subset.push(i);
            recurse(points, subset, i + 1, want, best);
            subset.pop();
        }
    }
    for size in 2..=max_size {
        recurse(points, &mut subset, 0, size, &mut best);
        if best <= 1e-15 {
            break;
        }
    }
    best
}

/// Distance from the origin to the affine hull of the subset, if the nearest
/// affine point has nonnegative barycentric coordinates (i.e. lies in the
/// convex face); `None` otherwise or when the subset is affinely degenerate.
fn face_distance(points: &[DVector<f64>], subset: &[usize]) -> Option<f64> {
    let k = subset.len();
    let y0 = &points[subset[0]];
    let n = y0.len();
    // z = y0 + B t, B columns y_i - y0; minimize ||z||^2.
    let b = DMatrix::from_fn(n, k - 1, |r, c| points[subset[c + 1]][r] - y0[r]);
    let gram = b.transpose() * &b;
    let rhs = -(b.transpose() * y0);
    let t = gram.lu().solve(&rhs)?;
    let mut lam0 = 1.0;
    for &ti in t.iter() {
        lam0 -= ti;
    }
    if lam0 < -1e-10 || t.iter().any(|&ti| ti < -1e-10) {
        return None;
    }
    let z = y0 + &b * &t;
    Some(z.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn square() -> Vec<DVector<f64>> {
        vec![dvector![1.0, 0.0], dvector![0.0, 1.0], dvector![-1.0, 0.0], dvector![0.0, -1.0]]
    }

    #[test]
    fn membership_certificate_round_trips() {
        let tol = Tolerances::default();
        let cert = conv_membership(&square(), &dvector![0.2, 0.1], &tol).unwrap();
        assert!(cert.residual <= tol.hull_tol);
        assert!(cert.weights.iter().filter(|&&w| w > 1e-12).count() <= 3);

        let err = conv_membership(&square(), &dvector![2.0, 0.0], &tol).unwrap_err();
        match err {
            Error::HullInfeasible { residual } => assert!(residual > 1e-3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn caratheodory_reduction_preserves_the_point() {
        // Uniform weights over 8 directions of a regular octagon describing the origin.
        let pts: Vec<DVector<f64>> = (0..8)
            .map(|i| {
                let a = i as f64 * std::f64::consts::TAU / 8.0;
                dvector![a.cos(), a.sin()]
            })
            .collect();
        let w0 = vec![0.125; 8];
        let target = dvector![0.0, 0.0];
        let w = caratheodory_reduce(&pts, &target, &w0);
        let nz = w.iter().filter(|&&wi| wi > 1e-12).count();
        assert!(nz <= 3, "support {nz}");
        let cert = HullMembershipCertificate { weights: w, residual: 0.0 };
        assert!(cert.verify(&pts, &target) < 1e-9);
    }

    #[test]
    fn hull_distance_matches_hand_values() {
        // Hull of the square contains the origin.
        assert!(hull_distance(&square()) < 1e-12);
        // Segment from (1,1) to (3,1): nearest point is (1,1).
        let pts = vec![dvector![1.0, 1.0], dvector![3.0, 1.0]];
        assert!((hull_distance(&pts) - 2.0f64.sqrt()).abs() < 1e-12);
        // Segment crossing x-axis at distance 1: from (1,-1) to (1,1).
        let pts = vec![dvector![1.0, -1.0], dvector![1.0, 1.0]];
        assert!((hull_distance(&pts) - 1.0).abs() < 1e-12);
        // Single point.
        let pts = vec![dvector![0.0, 3.0]];
        assert!((hull_distance(&pts) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn hull_distance_agrees_with_membership_lp() {
        use crate::numerics::rng::{random_unit_vector, stream_rng};
        let tol = Tolerances::default();
        let mut rng = stream_rng(42, 0);
        for n in 2..=4 {
            for trial in 0..200 {
                let m = 2 + (trial % 5);
                let pts: Vec<DVector<f64>> = (0..m).map(|_| random_unit_vector(&mut rng, n) * 2.0).collect();
                let inside = conv_membership(&pts, &DVector::zeros(n), &tol).is_ok();
                let dist = hull_distance(&pts);
                if inside {
                    assert!(dist < 1e-7, "n={n} trial={trial} dist={dist}");
                } else {
                    assert!(dist > 1e-9, "n={n} trial={trial} dist={dist}");
                }
            }
        }
    }
}
