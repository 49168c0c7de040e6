//! Closed polygonal paths measured in a gauge norm, constructive hull
//! splitting, shortcut comparisons, and certificate-producing length-bound
//! verifiers.
//!
//! The central fact these tools establish numerically: a closed polygon whose
//! vertices avoid the interior of a symmetric body `K` and whose convex hull
//! contains the origin has gauge length at least 4. The verifier does not just
//! evaluate the length — it reproduces the constructive argument (split the
//! cycle across an antipodal pair `±p`, shortcut each arc, double each half)
//! and reports every intermediate inequality so a failure pinpoints the step
//! that broke.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::ConvexBody;
use crate::numerics::{self, conv_membership, HullMembershipCertificate};
use crate::tol::Tolerances;

/// Weight-vector sanity bound: entries may dip this far below zero from
/// round-off and are treated as zero.
const WEIGHT_CLIP: f64 = 1e-12;
/// Residual allowed when validating that supplied weights reproduce a target.
const COMBINATION_TOL: f64 = 1e-9;

/// A closed polygonal path `x_1 → x_2 → … → x_m → x_1` with at least two
/// vertices and no repeated consecutive vertex (including the wrap-around).
#[derive(Clone, Debug)]
pub struct PolygonalPath {
    points: Vec<DVector<f64>>,
}

impl PolygonalPath {
    pub fn new(points: Vec<DVector<f64>>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput("a closed path needs at least 2 points".into()));
        }
        let n = points[0].len();
        for p in &points {
            if p.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: p.len() });
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput("non-finite path vertex".into()));
            }
        }
        let m = points.len();
        for i in 0..m {
            let d = (&points[(i + 1) % m] - &points[i]).norm();
            if d < 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "consecutive path vertices {i} and {} coincide",
                    (i + 1) % m
                )));
            }
        }
        Ok(PolygonalPath { points })
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn vertex_count(&self) -> usize {
        self.points.len()
    }

    /// The same cycle starting from vertex `r`.
    pub fn rotated(&self, r: usize) -> PolygonalPath {
        let m = self.points.len();
        let points = (0..m).map(|i| self.points[(i + r) % m].clone()).collect();
        PolygonalPath { points }
    }
}

/// Cyclic gauge length `Σ_i g_K(x_{i+1} - x_i)` (indices mod m).
pub fn path_length(k: &ConvexBody, path: &PolygonalPath) -> Result<f64> {
    let pts = path.points();
    let m = pts.len();
    let mut total = 0.0;
    for i in 0..m {
        total += k.gauge(&(&pts[(i + 1) % m] - &pts[i]))?;
    }
    Ok(total)
}

fn open_chain_length(k: &ConvexBody, pts: &[DVector<f64>]) -> Result<f64> {
    let mut total = 0.0;
    for w in pts.windows(2) {
        total += k.gauge(&(&w[1] - &w[0]))?;
    }
    Ok(total)
}

fn validate_convex_weights(weights: &[f64], count: usize) -> Result<f64> {
    if weights.len() != count {
        return Err(Error::InvalidInput(format!(
            "expected {count} weights, got {}",
            weights.len()
        )));
    }
    let mut sum = 0.0;
    for &w in weights {
        if !w.is_finite() || w < -WEIGHT_CLIP {
            return Err(Error::InvalidInput(format!("weight {w} is not a convex coefficient")));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > COMBINATION_TOL {
        return Err(Error::InvalidInput(format!("weights sum to {sum}, expected 1")));
    }
    Ok(sum)
}

/// Both sides of the chain-vs-triangle comparison for a point
/// `z = Σ λ_j x_j` in the hull of the chain, plus the intermediate quantities
/// of the inductive argument.
#[derive(Clone, Debug)]
pub struct ShortcutCheck {
    /// Closed length of the full cycle `x_1 … x_m`.
    pub lhs: f64,
    /// Closed length of the triangle `x_1 z x_m`.
    pub rhs: f64,
    /// Same comparison without the shared closing edge `x_1 x_m`.
    pub lhs_open: f64,
    pub rhs_open: f64,
    /// `lhs - rhs` (equals `lhs_open - rhs_open`); the claim is `margin ≥ 0`.
    pub margin: f64,
    /// The inductive intermediate `d = Σ_{j<m} λ_j x_j / (1 - λ_m)`; `None`
    /// when `λ_m ≈ 1` (then `z = x_m` and the comparison is immediate).
    pub proof_point: Option<DVector<f64>>,
    /// `| g(x_m - d) - g(x_m - z) - g(d - z) |`: `z` lies on the segment
    /// `[x_m, d]`, so the gauge must split additively along it.
    pub collinearity_gap: f64,
}

/// Compares the open chain `x_1 → … → x_m` against the two-edge detour
/// `x_1 → z → x_m` for a hull point `z` of the chain; the chain is never
/// shorter. Reported as closed cycle lengths (both sides share the closing
/// edge `x_m → x_1`, which therefore cancels in the margin).
pub fn shortcut(
    k: &ConvexBody,
    points: &[DVector<f64>],
    z: &DVector<f64>,
    weights: &[f64],
) -> Result<ShortcutCheck> {
    if points.len() < 2 {
        return Err(Error::InvalidInput("shortcut needs at least 2 chain points".into()));
    }
    validate_convex_weights(weights, points.len())?;
    let mut combo = DVector::zeros(z.len());
    for (x, &w) in points.iter().zip(weights) {
        if x.len() != z.len() {
            return Err(Error::DimensionMismatch { expected: z.len(), got: x.len() });
        }
        combo += x * w;
    }
    if (&combo - z).norm() > COMBINATION_TOL {
        return Err(Error::InvalidInput(format!(
            "weights reproduce z only within {:.3e}",
            (&combo - z).norm()
        )));
    }

    let m = points.len();
    let first = &points[0];
    let last = &points[m - 1];
    let closing = k.gauge(&(first - last))?;
    let lhs_open = open_chain_length(k, points)?;
    let rhs_open = k.gauge(&(z - first))? + k.gauge(&(last - z))?;

    let lam_m = weights[m - 1];
    let (proof_point, collinearity_gap) = if 1.0 - lam_m > 1e-9 {
        let mut d = DVector::zeros(z.len());
        for (x, &w) in points[..m - 1].iter().zip(weights) {
            d += x * (w / (1.0 - lam_m));
        }
        let lhs_split = k.gauge(&(last - &d))?;
        let rhs_split = k.gauge(&(last - z))? + k.gauge(&(&d - z))?;
        (Some(d), (lhs_split - rhs_split).abs())
    } else {
        (None, 0.0)
    };

    Ok(ShortcutCheck {
        lhs: lhs_open + closing,
        rhs: rhs_open + closing,
        lhs_open,
        rhs_open,
        margin: lhs_open - rhs_open,
        proof_point,
        collinearity_gap,
    })
}

/// A splitting of a cycle `x_1 … x_m` (with `0 = Σ η_i x_i`) across an
/// antipodal pair: `p` lies in the hull of the leading arc
/// `x_{i0} … x_{j0}` and `-p` in the hull of the trailing arc
/// `x_{j0} … x_{i0-1}` (indices cyclic). All indices refer to the **rotated**
/// cycle starting at `rotation`; `i0` is always 0 there.
#[derive(Clone, Debug)]
pub struct AntipodalSplit {
    /// Offset into the caller's point list at which the rotated cycle starts.
    pub rotation: usize,
    /// Start of the leading arc in the rotated frame (always 0).
    pub i0: usize,
    /// Split vertex: the leading arc is `0..=j0`, the trailing arc
    /// `j0..=m-1`; both arcs contain at least two vertices.
    pub j0: usize,
    pub p: DVector<f64>,
    /// Convex weights over the leading arc reproducing `p`.
    pub coeffs_a: Vec<f64>,
    /// Convex weights over the trailing arc reproducing `-p`.
    pub coeffs_b: Vec<f64>,
    pub cert_a: HullMembershipCertificate,
    pub cert_b: HullMembershipCertificate,
    /// The rotated cycle the indices refer to.
    pub rotated_points: Vec<DVector<f64>>,
}

/// Splits a cycle carrying a convex certificate `Σ η_i x_i = 0` into two arcs
/// whose hulls contain an antipodal pair `±p`.
///
/// The cycle is first rotated so that the opening weight is at most half the
/// total and the closing weight strictly below half (such a rotation always
/// exists for `m ≥ 3`; a weight of at least one half simply ends up interior,
/// where the prefix rule pairs it against the rest of the cycle). Then `j0` is
/// the largest index whose preceding prefix weight is at most half, the split
/// weight is divided to make the prefix exactly half, and `p` is twice the
/// prefix combination.
pub fn antipodal_split(points: &[DVector<f64>], weights: &[f64]) -> Result<AntipodalSplit> {
    let m = points.len();
    if m < 3 {
        return Err(Error::InvalidInput("antipodal split needs at least 3 points".into()));
    }
    let n = points[0].len();
    for x in points {
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
    }
    let total = validate_convex_weights(weights, m)?;
    let mut combo = DVector::zeros(n);
    for (x, &w) in points.iter().zip(weights) {
        combo += x * w;
    }
    if combo.norm() > COMBINATION_TOL {
        return Err(Error::InvalidInput(format!(
            "weights combine to a point {:.3e} away from the origin",
            combo.norm()
        )));
    }

    let half = total / 2.0;
    let eta = |rot: usize, i: usize| weights[(i + rot) % m].max(0.0);
    let rotation = (0..m)
        .find(|&r| eta(r, 0) <= half && eta(r, m - 1) < half)
        .ok_or_else(|| {
            Error::InvalidInput("no rotation places sub-half weights at both cycle ends".into())
        })?;

    let rotated_points: Vec<DVector<f64>> =
        (0..m).map(|i| points[(i + rotation) % m].clone()).collect();
    let eta: Vec<f64> = (0..m).map(|i| weights[(i + rotation) % m].max(0.0)).collect();

    // Largest j0 whose strict prefix stays within half the total weight.
    let mut prefix = 0.0;
    let mut j0 = 0;
    let mut prefix_at_j0 = 0.0;
    for j in 0..m {
        if prefix <= half {
            j0 = j;
            prefix_at_j0 = prefix;
        } else {
            break;
        }
        prefix += eta[j];
    }
    debug_assert!(j0 >= 1 && j0 <= m - 2, "rotation predicate bounds the split index");

    let split_lead = half - prefix_at_j0; // portion of η_{j0} assigned to the leading arc
    let split_trail = eta[j0] - split_lead;

    let mut coeffs_a: Vec<f64> = eta[..j0].iter().map(|&e| e / half).collect();
    coeffs_a.push(split_lead / half);
    let mut coeffs_b: Vec<f64> = vec![split_trail / half];
    coeffs_b.extend(eta[j0 + 1..].iter().map(|&e| e / half));

    let mut p = DVector::zeros(n);
    for (x, &c) in rotated_points[..=j0].iter().zip(&coeffs_a) {
        p += x * c;
    }

    let cert_a = HullMembershipCertificate { weights: coeffs_a.clone(), residual: 0.0 };
    let res_a = cert_a.verify(&rotated_points[..=j0], &p);
    let cert_b = HullMembershipCertificate { weights: coeffs_b.clone(), residual: 0.0 };
    let res_b = cert_b.verify(&rotated_points[j0..], &(-&p));

    Ok(AntipodalSplit {
        rotation,
        i0: 0,
        j0,
        p,
        coeffs_a,
        coeffs_b,
        cert_a: HullMembershipCertificate { weights: cert_a.weights, residual: res_a },
        cert_b: HullMembershipCertificate { weights: cert_b.weights, residual: res_b },
        rotated_points,
    })
}

/// A subset `I` of simplex-vertex indices such that the origin lies in the
/// hull of `{q_i}_{i∈I} ∪ {x_j}_{j∉I}`, with the LP certificate.
#[derive(Clone, Debug)]
pub struct SimplexCover {
    pub subset: Vec<usize>,
    pub cert: HullMembershipCertificate,
}

/// Given a nondegenerate simplex `x_1 … x_{k+1}` in `R^k` containing the
/// origin and replacement points `q_i` in the facet hull `conv{x_j}_{j≠i}`,
/// finds a nonempty index set `I` for which swapping `x_i ↦ q_i` (for
/// `i ∈ I`) keeps the origin inside the hull.
///
/// Brute force over all subsets, smallest-to-largest starting from pairs
/// (singletons only reproduce a facet, which can cover the origin only in
/// boundary cases, so they are tried last).
pub fn simplex_cover(
    x: &[DVector<f64>],
    q: &[DVector<f64>],
    tol: &Tolerances,
) -> Result<SimplexCover> {
    let kp1 = x.len();
    if kp1 < 2 || q.len() != kp1 {
        return Err(Error::InvalidInput("need k+1 simplex vertices and k+1 replacement points".into()));
    }
    let k = kp1 - 1;
    for v in x.iter().chain(q.iter()) {
        if v.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: v.len() });
        }
    }
    // Nondegeneracy: the edge vectors from x_0 span R^k.
    let edges = nalgebra::DMatrix::from_fn(k, k, |r, c| x[c + 1][r] - x[0][r]);
    if edges.rank(1e-10) < k {
        return Err(Error::InvalidInput("simplex is degenerate".into()));
    }
    conv_membership(x, &DVector::zeros(k), tol)
        .map_err(|_| Error::InvalidInput("origin is not inside the simplex".into()))?;
    for i in 0..kp1 {
        let facet: Vec<DVector<f64>> =
            (0..kp1).filter(|&j| j != i).map(|j| x[j].clone()).collect();
        conv_membership(&facet, &q[i], tol).map_err(|_| {
            Error::InvalidInput(format!("replacement point {i} is outside its facet hull"))
        })?;
    }

    let origin = DVector::zeros(k);
    let mut sizes: Vec<usize> = (2..=kp1).collect();
    sizes.push(1);
    for size in sizes {
        // All subsets of {0..kp1} with the given popcount.
        for mask in 1u32..(1u32 << kp1) {
            if mask.count_ones() as usize != size {
                continue;
            }
            let mixed: Vec<DVector<f64>> = (0..kp1)
                .map(|i| if mask & (1 << i) != 0 { q[i].clone() } else { x[i].clone() })
                .collect();
            if let Ok(cert) = conv_membership(&mixed, &origin, tol) {
                let subset = (0..kp1).filter(|i| mask & (1 << i) != 0).collect();
                return Ok(SimplexCover { subset, cert });
            }
        }
    }
    Err(Error::NoConvergence(
        "no replacement subset keeps the origin covered — upstream inputs are inconsistent".into(),
    ))
}

/// Full audit trail of the length-bound argument for one instance.
#[derive(Clone, Debug)]
pub struct LengthBoundReport {
    /// Cyclic gauge length of the input.
    pub length: f64,
    /// `length - 4`; the claim is `margin ≥ 0`.
    pub margin: f64,
    /// Certificate that the origin lies in the hull of the points.
    pub hull_cert: HullMembershipCertificate,
    /// The antipodal splitting (absent for two-point inputs, which are
    /// handled by the direct collinear argument).
    pub split: Option<AntipodalSplit>,
    /// Shortcut comparisons for the leading and trailing arcs.
    pub shortcuts: Option<[ShortcutCheck; 2]>,
    /// Length of the four-point cycle `x_{i0} → p → x_{j0} → -p`.
    pub quad_length: Option<f64>,
    /// The two doubled-half lower bounds `2 g_K(x_{i0})`, `2 g_K(x_{j0})`.
    pub half_bounds: [f64; 2],
    /// The certified chain lower bound for `length` (at least 4 when the
    /// preconditions hold).
    pub pipeline_bound: f64,
    /// True when every inequality in the chain held within `1e-9` slack.
    pub chain_consistent: bool,
}

const CHAIN_SLACK: f64 = 1e-9;

/// Verifies `Length_K ≥ 4` for points outside the interior of `K` whose hull
/// contains the origin, by running the constructive argument end to end:
/// certify the hull, split across `±p`, shortcut both arcs, and bound each
/// doubled half through the triangle inequality.
pub fn verify_length_bound(
    k: &ConvexBody,
    points: &[DVector<f64>],
    tol: &Tolerances,
) -> Result<LengthBoundReport> {
    let path = PolygonalPath::new(points.to_vec())?;
    for (i, x) in points.iter().enumerate() {
        let g = k.gauge(x)?;
        if g < 1.0 - tol.boundary_tol {
            return Err(Error::InvalidInput(format!(
                "point {i} lies inside the body (gauge {g:.12})"
            )));
        }
    }
    let origin = DVector::zeros(points[0].len());
    let hull_cert = conv_membership(points, &origin, tol)?;
    let length = path_length(k, &path)?;

    if points.len() == 2 {
        // Hull condition forces the two points onto a line through the origin
        // on opposite sides, where the edge gauge splits additively:
        // g(x1 - x2) >= 2 max(g1, g2) - g(x1 + x2), with equality for exact
        // collinearity, and the right side is at least g1 + g2 >= 2.
        let g1 = k.gauge(&points[0])?;
        let g2 = k.gauge(&points[1])?;
        let cross = k.gauge(&(&points[0] + &points[1]))?;
        let pipeline_bound = 2.0 * (2.0 * g1.max(g2) - cross);
        let chain_consistent = length >= pipeline_bound - CHAIN_SLACK
            && pipeline_bound >= 4.0 - CHAIN_SLACK;
        return Ok(LengthBoundReport {
            length,
            margin: length - 4.0,
            hull_cert,
            split: None,
            shortcuts: None,
            quad_length: None,
            half_bounds: [2.0 * g1, 2.0 * g2],
            pipeline_bound,
            chain_consistent,
        });
    }

    let split = antipodal_split(points, &hull_cert.weights)?;
    let rot = &split.rotated_points;
    let m = rot.len();
    let j0 = split.j0;

    // Leading arc x_0 … x_{j0} against p.
    let arc_a: Vec<DVector<f64>> = rot[..=j0].to_vec();
    let check_a = shortcut(k, &arc_a, &split.p, &split.coeffs_a)?;
    // Trailing arc x_{j0} … x_{m-1} → x_0 against -p; the hull certificate
    // for -p is over the trailing vertices, extended by a zero weight on the
    // appended wrap-around vertex.
    let mut arc_b: Vec<DVector<f64>> = rot[j0..].to_vec();
    arc_b.push(rot[0].clone());
    let mut weights_b = split.coeffs_b.clone();
    weights_b.push(0.0);
    let check_b = shortcut(k, &arc_b, &(-&split.p), &weights_b)?;

    let quad = check_a.rhs_open + check_b.rhs_open;
    let g_i0 = k.gauge(&rot[0])?;
    let g_j0 = k.gauge(&rot[j0])?;
    let half_bounds = [2.0 * g_i0, 2.0 * g_j0];
    let pipeline_bound = half_bounds[0] + half_bounds[1];

    // length = open(arc A) + open(arc B) ≥ quad ≥ 2 g(x_0) + 2 g(x_{j0}) ≥ 4.
    let chain_consistent = (length - (check_a.lhs_open + check_b.lhs_open)).abs() < 1e-7
        && check_a.margin >= -CHAIN_SLACK
        && check_b.margin >= -CHAIN_SLACK
        && quad >= pipeline_bound - CHAIN_SLACK
        && pipeline_bound >= 4.0 - CHAIN_SLACK
        && split.cert_a.residual <= 10.0 * tol.hull_tol
        && split.cert_b.residual <= 10.0 * tol.hull_tol;
    debug_assert_eq!(m, points.len());

    Ok(LengthBoundReport {
        length,
        margin: length - 4.0,
        hull_cert,
        split: Some(split),
        shortcuts: Some([check_a, check_b]),
        quad_length: Some(quad),
        half_bounds,
        pipeline_bound,
        chain_consistent,
    })
}

/// Audit record for the boundary-normal variant of the length bound.
#[derive(Clone, Debug)]
pub struct NormalBoundReport {
    pub length: f64,
    /// `length - 4`; the claim is `margin ≥ 0`.
    pub margin: f64,
    /// Outward normals at the boundary points.
    pub normals: Vec<DVector<f64>>,
    /// Certificate that the origin lies in the hull of the normals.
    pub normal_cert: HullMembershipCertificate,
}

/// Verifies `Length_K ≥ 4` for points **on** the boundary of a smooth body
/// whose outward normals positively span the origin. The hull condition moves
/// from the points to their normals, which is exactly the closedness
/// condition satisfied by billiard bounce points.
pub fn verify_normal_length_bound(
    k: &ConvexBody,
    points: &[DVector<f64>],
    tol: &Tolerances,
) -> Result<NormalBoundReport> {
    if !k.is_smooth() {
        return Err(Error::NotSmooth("normal-hull length bound needs a smooth body".into()));
    }
    let path = PolygonalPath::new(points.to_vec())?;
    let mut normals = Vec::with_capacity(points.len());
    for (i, q) in points.iter().enumerate() {
        let g = k.gauge(q)?;
        if (g - 1.0).abs() > tol.boundary_tol * 10.0 {
            return Err(Error::InvalidInput(format!(
                "point {i} is not on the boundary (gauge {g:.12})"
            )));
        }
        normals.push(k.gauge_gradient(q)?);
    }
    let origin = DVector::zeros(points[0].len());
    let normal_cert = conv_membership(&normals, &origin, tol)?;
    let length = path_length(k, &path)?;
    Ok(NormalBoundReport { length, margin: length - 4.0, normals, normal_cert })
}

// ----- randomized instance generators ---------------------------------------
//
// All generators are constructive: the final point is chosen to close the
// convex certificate exactly, so no rejection loop is needed and every
// generated instance carries its own weights.

/// `m` points outside the interior of `K` (gauges in roughly `[1, 2]`) whose
/// hull provably contains the origin, together with the convex weights.
pub fn random_outer_instance(
    k: &ConvexBody,
    m: usize,
    seed: u64,
    instance: u64,
) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
    assert!(m >= 2, "need at least two points");
    let n = k.dim();
    let mut rng = numerics::stream_rng(seed, instance);
    for _attempt in 0..64 {
        let mut pts: Vec<DVector<f64>> = Vec::with_capacity(m);
        let mut coeffs: Vec<f64> = Vec::with_capacity(m);
        let mut combo = DVector::zeros(n);
        for _ in 0..m - 1 {
            let dir = numerics::random_unit_vector(&mut rng, n);
            let x = k.boundary_point(&dir)? * rng.gen_range(1.0..2.0);
            let c = rng.gen_range(0.2..1.0);
            combo += &x * c;
            pts.push(x);
            coeffs.push(c);
        }
        let g = k.gauge(&combo)?;
        if g < 1e-9 {
            continue; // partial sum collapsed onto the origin; resample
        }
        let t = rng.gen_range(1.0..2.0);
        pts.push(&combo * (-t / g));
        coeffs.push(g / t);
        let total: f64 = coeffs.iter().sum();
        let weights: Vec<f64> = coeffs.iter().map(|c| c / total).collect();
        if PolygonalPath::new(pts.clone()).is_ok() {
            return Ok((pts, weights));
        }
    }
    Err(Error::NoConvergence("could not draw a nondegenerate outer instance".into()))
}

/// An antipodal boundary pair `±q`, the equality case of the length bound.
pub fn random_equality_instance(k: &ConvexBody, seed: u64, instance: u64) -> Result<Vec<DVector<f64>>> {
    let mut rng = numerics::stream_rng(seed, instance);
    let q = k.boundary_point(&numerics::random_unit_vector(&mut rng, k.dim()))?;
    Ok(vec![q.clone(), -q])
}

/// `m` boundary points of a smooth body whose outward normals carry a convex
/// certificate of the origin: the last point is placed by support-point
/// lookup opposite the weighted normal sum.
pub fn random_normal_instance(
    k: &ConvexBody,
    m: usize,
    seed: u64,
    instance: u64,
) -> Result<Vec<DVector<f64>>> {
    assert!(m >= 2, "need at least two points");
    if !k.is_smooth() {
        return Err(Error::NotSmooth("normal instances need a smooth body".into()));
    }
    let n = k.dim();
    let mut rng = numerics::stream_rng(seed, instance);
    for _attempt in 0..64 {
        let mut pts: Vec<DVector<f64>> = Vec::with_capacity(m);
        let mut normal_sum = DVector::zeros(n);
        for _ in 0..m - 1 {
            let q = k.boundary_point(&numerics::random_unit_vector(&mut rng, n))?;
            normal_sum += k.gauge_gradient(&q)? * rng.gen_range(0.2..1.0);
            pts.push(q);
        }
        if normal_sum.norm() < 1e-9 {
            continue;
        }
        // The support point in direction -normal_sum has outward normal
        // positively proportional to -normal_sum, closing the hull condition.
        pts.push(k.support_point(&(-&normal_sum))?);
        if PolygonalPath::new(pts.clone()).is_ok() {
            return Ok(pts);
        }
    }
    Err(Error::NoConvergence("could not draw a nondegenerate normal instance".into()))
}

/// `m ≥ 3` points in `R^n` with convex weights combining to the origin
/// (no body involved) for exercising the splitting algorithm.
pub fn random_split_instance(
    n: usize,
    m: usize,
    seed: u64,
    instance: u64,
) -> (Vec<DVector<f64>>, Vec<f64>) {
    assert!(m >= 3, "need at least three points");
    let mut rng = numerics::stream_rng(seed, instance);
    loop {
        let mut pts: Vec<DVector<f64>> = Vec::with_capacity(m);
        let mut coeffs: Vec<f64> = Vec::with_capacity(m);
        let mut combo = DVector::zeros(n);
        for _ in 0..m - 1 {
            let x = numerics::random_unit_vector(&mut rng, n) * rng.gen_range(0.5..2.0);
            let c = rng.gen_range(0.2..1.0);
            combo += &x * c;
            pts.push(x);
            coeffs.push(c);
        }
        let s = rng.gen_range(0.5..2.0);
        if combo.norm() < 1e-9 {
            continue;
        }
        pts.push(&combo * (-1.0 / s));
        coeffs.push(s);
        let total: f64 = coeffs.iter().sum();
        return (pts, coeffs.iter().map(|c| c / total).collect());
    }
}

/// A nondegenerate simplex in `R^k` with the origin interior, plus one
/// replacement point inside each opposite facet — the hypotheses of the
/// cover search.
pub fn random_cover_instance(
    k_dim: usize,
    seed: u64,
    instance: u64,
) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    assert!(k_dim >= 1);
    let mut rng = numerics::stream_rng(seed, instance);
    loop {
        let mut x: Vec<DVector<f64>> = Vec::with_capacity(k_dim + 1);
        let mut combo = DVector::zeros(k_dim);
        for _ in 0..k_dim {
            let v = numerics::random_unit_vector(&mut rng, k_dim) * rng.gen_range(0.5..2.0);
            combo += &v * rng.gen_range(0.2..1.0);
            x.push(v);
        }
        x.push(-combo);
        let edges = nalgebra::DMatrix::from_fn(k_dim, k_dim, |r, c| x[c + 1][r] - x[0][r]);
        if edges.rank(1e-8) < k_dim {
            continue;
        }
        let q: Vec<DVector<f64>> = (0..=k_dim)
            .map(|i| {
                // Random interior convex combination of the opposite facet.
                let raw: Vec<f64> = (0..k_dim).map(|_| rng.gen_range(0.1f64..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let mut point = DVector::zeros(k_dim);
                let mut slot = 0;
                for (j, vert) in x.iter().enumerate() {
                    if j != i {
                        point += vert * (raw[slot] / total);
                        slot += 1;
                    }
                }
                point
            })
            .collect();
        return (x, q);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn disk() -> ConvexBody {
        ConvexBody::ball(2)
    }

    #[test]
    fn path_length_hand_values() {
        let pair = PolygonalPath::new(vec![dvector![1.0, 0.0], dvector![-1.0, 0.0]]).unwrap();
        assert_relative_eq!(path_length(&disk(), &pair).unwrap(), 4.0);

        let cube = ConvexBody::cube(2);
        let diamond = PolygonalPath::new(vec![
            dvector![1.0, 0.0],
            dvector![0.0, 1.0],
            dvector![-1.0, 0.0],
            dvector![0.0, -1.0],
        ])
        .unwrap();
        assert_relative_eq!(path_length(&cube, &diamond).unwrap(), 4.0);
    }

    #[test]
    fn path_length_is_homogeneous() {
        let mut rng = numerics::stream_rng(11, 0);
        let body = ConvexBody::lp_ball_unit(3, 3.0).unwrap();
        let pts: Vec<DVector<f64>> =
            (0..4).map(|_| numerics::random_unit_vector(&mut rng, 3) * 2.0).collect();
        let path = PolygonalPath::new(pts.clone()).unwrap();
        let scaled =
            PolygonalPath::new(pts.iter().map(|p| p * 3.5).collect()).unwrap();
        assert_relative_eq!(
            path_length(&body, &scaled).unwrap(),
            3.5 * path_length(&body, &path).unwrap(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn path_validation_rejects_degenerate_input() {
        assert!(PolygonalPath::new(vec![dvector![1.0, 0.0]]).is_err());
        assert!(PolygonalPath::new(vec![dvector![1.0, 0.0], dvector![1.0, 0.0]]).is_err());
        // Wrap-around coincidence: first equals last.
        assert!(PolygonalPath::new(vec![
            dvector![1.0, 0.0],
            dvector![0.0, 1.0],
            dvector![1.0, 0.0]
        ])
        .is_err());
    }

    #[test]
    fn shortcut_midpoint_of_a_pair_is_tight() {
        let pts = vec![dvector![2.0, 0.0], dvector![0.0, 2.0]];
        let z = dvector![1.0, 1.0];
        let check = shortcut(&disk(), &pts, &z, &[0.5, 0.5]).unwrap();
        assert_relative_eq!(check.lhs, check.rhs, epsilon = 1e-12);
        assert!(check.collinearity_gap < 1e-12);
    }

    #[test]
    fn shortcut_triangle_hand_instance() {
        let pts = vec![dvector![2.0, 0.0], dvector![0.0, 2.0], dvector![-2.0, 0.0]];
        let z = dvector![0.0, 2.0 / 3.0];
        let w = [1.0 / 3.0; 3];
        let check = shortcut(&disk(), &pts, &z, &w).unwrap();
        assert!(check.margin >= -1e-9, "margin {}", check.margin);
        assert!(check.collinearity_gap <= 1e-9);
        // Independent evaluation of both sides.
        let lhs = 2.0 * 8.0f64.sqrt() + 4.0;
        assert_relative_eq!(check.lhs, lhs, epsilon = 1e-12);
    }

    #[test]
    fn shortcut_to_an_endpoint_is_the_triangle_inequality() {
        let pts = vec![dvector![2.0, 0.0], dvector![0.0, 2.0], dvector![-2.0, 0.0]];
        let z = pts[0].clone();
        let check = shortcut(&disk(), &pts, &z, &[1.0, 0.0, 0.0]).unwrap();
        assert!(check.margin >= -1e-12);
        assert_relative_eq!(check.rhs_open, disk().gauge(&dvector![-4.0, 0.0]).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn shortcut_rejects_bad_weights() {
        let pts = vec![dvector![1.0, 0.0], dvector![0.0, 1.0]];
        assert!(shortcut(&disk(), &pts, &dvector![0.5, 0.5], &[0.9, 0.9]).is_err());
        assert!(shortcut(&disk(), &pts, &dvector![0.9, 0.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn split_square_hand_instance() {
        let pts = vec![
            dvector![1.0, 0.0],
            dvector![0.0, 1.0],
            dvector![-1.0, 0.0],
            dvector![0.0, -1.0],
        ];
        let w = [0.25; 4];
        let split = antipodal_split(&pts, &w).unwrap();
        assert_eq!(split.rotation, 0);
        assert_eq!(split.j0, 2);
        assert_relative_eq!(split.p[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(split.p[1], 0.5, epsilon = 1e-12);
        assert!(split.cert_a.residual <= 1e-9);
        assert!(split.cert_b.residual <= 1e-9);
        // Independent LP re-verification of both memberships.
        let tol = Tolerances::default();
        assert!(conv_membership(&split.rotated_points[..=2], &split.p, &tol).is_ok());
        assert!(conv_membership(&split.rotated_points[2..], &(-&split.p), &tol).is_ok());
    }

    #[test]
    fn split_rejects_pairs_and_nonzero_combos() {
        let pts = vec![dvector![1.0, 0.0], dvector![-1.0, 0.0]];
        assert!(antipodal_split(&pts, &[0.5, 0.5]).is_err());
        let pts = vec![dvector![1.0, 0.0], dvector![0.0, 1.0], dvector![-1.0, 0.0]];
        assert!(antipodal_split(&pts, &[0.4, 0.2, 0.4]).is_err()); // combo != 0
    }

    #[test]
    fn split_handles_a_dominant_weight() {
        // One weight above one half: it must end up interior to the rotation.
        let pts = vec![
            dvector![1.0, 0.0],
            dvector![-0.6, 0.0],
            dvector![0.0, 1.0],
            dvector![0.0, -1.0],
        ];
        // 0.375·x0 + 0.625·x1 = 0 with two zero-weight fillers.
        let w = [0.375, 0.625, 0.0, 0.0];
        let split = antipodal_split(&pts, &w).unwrap();
        assert!(split.cert_a.residual <= 1e-9, "residual {}", split.cert_a.residual);
        assert!(split.cert_b.residual <= 1e-9, "residual {}", split.cert_b.residual);
        assert!(split.j0 >= 1 && split.j0 <= 2);
    }

    #[test]
    fn random_splits_carry_valid_certificates() {
        let tol = Tolerances::default();
        for inst in 0..300 {
            let m = 3 + (inst as usize % 4);
            let n = 2 + (inst as usize % 3);
            let (pts, w) = random_split_instance(n, m, 2024, inst);
            let split = antipodal_split(&pts, &w).unwrap();
            assert!(split.cert_a.residual <= tol.hull_tol, "instance {inst}");
            assert!(split.cert_b.residual <= tol.hull_tol, "instance {inst}");
            assert!(split.j0 >= 1 && split.j0 <= m - 2, "both sides need >= 2 points");
            // Independent LP re-verification.
            assert!(conv_membership(&split.rotated_points[..=split.j0], &split.p, &tol).is_ok());
            assert!(conv_membership(&split.rotated_points[split.j0..], &(-&split.p), &tol).is_ok());
        }
    }

    #[test]
    fn cover_line_hand_instance() {
        let tol = Tolerances::default();
        let x = vec![dvector![-1.0], dvector![1.0]];
        let q = vec![dvector![1.0], dvector![-1.0]];
        let cover = simplex_cover(&x, &q, &tol).unwrap();
        assert_eq!(cover.subset, vec![0, 1]);
    }

    #[test]
    fn cover_random_instances_yield_valid_subsets() {
        let tol = Tolerances::default();
        for inst in 0..100 {
            let k_dim = 1 + (inst as usize % 4);
            let (x, q) = random_cover_instance(k_dim, 77, inst);
            let cover = simplex_cover(&x, &q, &tol).unwrap();
            assert!(!cover.subset.is_empty());
            // Re-verify the certificate by substitution.
            let mixed: Vec<DVector<f64>> = (0..=k_dim)
                .map(|i| if cover.subset.contains(&i) { q[i].clone() } else { x[i].clone() })
                .collect();
            let res = cover.cert.verify(&mixed, &DVector::zeros(k_dim));
            assert!(res <= tol.hull_tol, "instance {inst} residual {res}");
        }
    }

    #[test]
    fn cover_rejects_broken_hypotheses() {
        let tol = Tolerances::default();
        // Origin outside the simplex.
        let x = vec![dvector![1.0], dvector![2.0]];
        let q = vec![dvector![2.0], dvector![1.0]];
        assert!(simplex_cover(&x, &q, &tol).is_err());
        // Replacement point outside its facet.
        let x = vec![dvector![-1.0], dvector![1.0]];
        let q = vec![dvector![5.0], dvector![-1.0]];
        assert!(simplex_cover(&x, &q, &tol).is_err());
    }

    #[test]
    fn length_bound_equality_pair_is_exact() {
        let tol = Tolerances::default();
        let report =
            verify_length_bound(&disk(), &[dvector![1.0, 0.0], dvector![-1.0, 0.0]], &tol).unwrap();
        assert!((report.length - 4.0).abs() < 1e-12);
        assert!(report.chain_consistent);
        let report =
            verify_length_bound(&disk(), &[dvector![2.0, 0.0], dvector![-2.0, 0.0]], &tol).unwrap();
        assert_relative_eq!(report.length, 8.0, epsilon = 1e-12);
        assert!(report.pipeline_bound >= 4.0);
    }

    #[test]
    fn length_bound_rejects_interior_points_and_bad_hulls() {
        let tol = Tolerances::default();
        // Point strictly inside the disk.
        assert!(verify_length_bound(
            &disk(),
            &[dvector![0.5, 0.0], dvector![-1.0, 0.0]],
            &tol
        )
        .is_err());
        // Hull misses the origin.
        assert!(verify_length_bound(
            &disk(),
            &[dvector![1.0, 0.0], dvector![2.0, 0.0], dvector![1.0, 1.0]],
            &tol
        )
        .is_err());
    }

    #[test]
    fn length_bound_randomized_pipeline_audit() {
        let tol = Tolerances::default();
        let bodies = [
            ConvexBody::ball(2),
            ConvexBody::cube(3),
            ConvexBody::lp_ball_unit(4, 1.5).unwrap(),
        ];
        for (b, body) in bodies.iter().enumerate() {
            for inst in 0..120 {
                let m = 2 + (inst as usize % 5);
                let (pts, _w) =
                    random_outer_instance(body, m, 9000 + b as u64, inst).unwrap();
                let report = verify_length_bound(body, &pts, &tol).unwrap();
                assert!(report.margin >= -1e-9, "body {b} inst {inst}: margin {}", report.margin);
                assert!(report.chain_consistent, "body {b} inst {inst}: chain broke");
                assert!(report.length >= report.pipeline_bound - 1e-9);
            }
        }
    }

    #[test]
    fn deleting_a_vertex_never_lengthens_the_cycle() {
        let body = ConvexBody::lp_ball_unit(3, 3.0).unwrap();
        for inst in 0..50 {
            let (pts, _) = random_outer_instance(&body, 5, 31337, inst).unwrap();
            let full = path_length(&body, &PolygonalPath::new(pts.clone()).unwrap()).unwrap();
            for drop in 0..pts.len() {
                let reduced: Vec<DVector<f64>> = (0..pts.len())
                    .filter(|&i| i != drop)
                    .map(|i| pts[i].clone())
                    .collect();
                if let Ok(path) = PolygonalPath::new(reduced) {
                    let shorter = path_length(&body, &path).unwrap();
                    assert!(shorter <= full + 1e-9, "inst {inst} drop {drop}");
                }
            }
        }
    }

    #[test]
    fn normal_bound_hand_and_random_instances() {
        let tol = Tolerances::default();
        let report = verify_normal_length_bound(
            &disk(),
            &[dvector![1.0, 0.0], dvector![-1.0, 0.0]],
            &tol,
        )
        .unwrap();
        assert_relative_eq!(report.length, 4.0, epsilon = 1e-12);

        // Long-axis pair on an ellipse: length is twice the gauge of the
        // full chord, which is 4 regardless of the axis ratio.
        let ell = ConvexBody::ellipsoid_diag(&[2.0, 1.0]).unwrap();
        let report = verify_normal_length_bound(
            &ell,
            &[dvector![2.0, 0.0], dvector![-2.0, 0.0]],
            &tol,
        )
        .unwrap();
        assert_relative_eq!(report.length, 4.0, epsilon = 1e-12);

        let bodies = [
            ConvexBody::ellipsoid_diag(&[2.0, 1.0, 0.5]).unwrap(),
            ConvexBody::lp_ball_unit(2, 3.0).unwrap(),
        ];
        for (b, body) in bodies.iter().enumerate() {
            for inst in 0..100 {
                let m = 2 + (inst as usize % 4);
                let pts = random_normal_instance(body, m, 500 + b as u64, inst).unwrap();
                let report = verify_normal_length_bound(body, &pts, &tol).unwrap();
                assert!(report.margin >= -1e-6, "body {b} inst {inst}: {}", report.margin);
                assert!(report.normal_cert.residual <= tol.hull_tol);
            }
        }
    }

    #[test]
    fn normal_bound_rejects_polytopes_and_off_boundary_points() {
        let tol = Tolerances::default();
        assert!(verify_normal_length_bound(
            &ConvexBody::cube(2),
            &[dvector![1.0, 0.0], dvector![-1.0, 0.0]],
            &tol
        )
        .is_err());
        assert!(verify_normal_length_bound(
            &disk(),
            &[dvector![1.5, 0.0], dvector![-1.5, 0.0]],
            &tol
        )
        .is_err());
    }
}
