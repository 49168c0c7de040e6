//! Centrally symmetric convex bodies and their basic functionals.
//!
//! A body `K = -K` with nonempty interior is represented in one of five
//! closed forms (plus an exact polar wrapper) and exposes:
//!
//! * `gauge`: the Minkowski functional `g_K(x) = inf { r > 0 : x in r K }`,
//!   which is the norm with unit ball `K`;
//! * `support`: `h_K(u) = sup { <x, u> : x in K }`, the gauge of the polar
//!   body `K° = { p : <p, q> <= 1 for all q in K }`;
//! * `support_point`: a maximizer realizing `h_K(u)` on the boundary;
//! * `gauge_gradient`: the outward normal field `∇g_K` (smooth bodies);
//! * `boundary_point`: the radial projection `u / g_K(u)`;
//! * `polar` and the relative inradius `max { r : r S ⊆ K }`.
//!
//! Coordinates are plain `R^n` with the standard inner product; a polar body
//! lives in the same coordinates under that pairing.

mod schema;

pub use schema::BodySpec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::{self, lp, minimize_local, project_unit_blocks, DescentOptions};
use crate::tol::Tolerances;

/// A nonzero direction vector, validated on construction.
///
/// Used at untrusted input boundaries (file/CLI parsing); the geometry methods
/// themselves accept raw vectors and reject zero input with
/// [`Error::ZeroDirection`].
#[derive(Clone, Debug)]
pub struct Direction(DVector<f64>);

impl Direction {
    pub fn new(v: DVector<f64>) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) || v.norm() < 1e-12 {
            return Err(Error::ZeroDirection);
        }
        Ok(Direction(v))
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for Direction {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Direction::new(DVector::from_vec(v))
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Rep {
    /// `{ x : |<a_i, x>| <= 1 }` — symmetric halfspace pairs.
    HPolytope { functionals: Vec<DVector<f64>> },
    /// `conv { ±v_j }`.
    VPolytope { vertices: Vec<DVector<f64>> },
    /// `A · B_2` for invertible `A`.
    Ellipsoid { a: DMatrix<f64>, a_inv: DMatrix<f64> },
    /// `A · B_p`, `p` in `(1, ∞)`.
    LpBall { a: DMatrix<f64>, a_inv: DMatrix<f64>, p: f64 },
    /// Gauge `(Σ_i |<a_i, x>|^s)^{1/s}`, `s` in `(1, ∞)` — a smooth strictly
    /// convex envelope of the polytope with the same functionals.
    PowerSum { functionals: Vec<DVector<f64>>, s: f64 },
    /// Polar of a smooth body without a closed-form polar. All functionals are
    /// evaluated through exact duality: the wrapper's gauge is the inner
    /// body's support and vice versa.
    PolarDual { inner: Box<ConvexBody> },
}

/// A centrally symmetric convex body with nonempty interior.
#[derive(Clone, Debug)]
pub struct ConvexBody {
    dim: usize,
    rep: Rep,
}

fn check_spanning(vectors: &[DVector<f64>], n: usize, what: &str) -> Result<()> {
    if vectors.is_empty() {
        return Err(Error::InvalidBody(format!("no {what} given")));
    }
    for v in vectors {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidBody(format!("non-finite {what}")));
        }
        if v.norm() < 1e-12 {
            return Err(Error::InvalidBody(format!("zero {what}")));
        }
    }
    let mat = DMatrix::from_fn(n, vectors.len(), |r, c| vectors[c][r]);
    if mat.rank(1e-10) < n {
        return Err(Error::InvalidBody(format!("{what} do not span R^{n} (degenerate body)")));
    }
    Ok(())
}

fn check_invertible(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::InvalidBody("matrix is not square".into()));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidBody("non-finite matrix entry".into()));
    }
    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax.max(1e-300)) {
        return Err(Error::InvalidBody("matrix is singular or badly conditioned".into()));
    }
    a.clone().try_inverse().ok_or_else(|| Error::InvalidBody("matrix inversion failed".into()))
}

/// Stable `p`-norm: factors out the max magnitude before exponentiation.
fn pnorm(v: &DVector<f64>, p: f64) -> f64 {
    let m = v.amax();
    if m == 0.0 || !m.is_finite() {
        return if m == 0.0 { 0.0 } else { f64::INFINITY };
    }
    let s: f64 = v.iter().map(|x| (x.abs() / m).powf(p)).sum();
    m * s.powf(1.0 / p)
}

/// Gradient of the `p`-norm at `v != 0` (scale-invariant form).
fn pnorm_gradient(v: &DVector<f64>, p: f64) -> DVector<f64> {
    let m = v.amax();
    let u = v / m;
    let nu = pnorm(&u, p);
    DVector::from_fn(v.len(), |i, _| {
        let t = u[i].abs() / nu;
        u[i].signum() * t.powf(p - 1.0)
    })
}

impl ConvexBody {
    // ----- constructors ---------------------------------------------------

    /// `{ x : |<a_i, x>| <= 1 }`. The functionals must span `R^n`.
    pub fn hpolytope(functionals: Vec<DVector<f64>>) -> Result<Self> {
        let n = functionals.first().map(|v| v.len()).unwrap_or(0);
        check_spanning(&functionals, n, "functionals")?;
        Ok(ConvexBody { dim: n, rep: Rep::HPolytope { functionals } })
    }

    /// `conv { ±v_j }`. The vertices must span `R^n`.
    pub fn vpolytope(vertices: Vec<DVector<f64>>) -> Result<Self> {
        let n = vertices.first().map(|v| v.len()).unwrap_or(0);
        check_spanning(&vertices, n, "vertices")?;
        Ok(ConvexBody { dim: n, rep: Rep::VPolytope { vertices } })
    }

    /// `A · B_2` for invertible `A`.
    pub fn ellipsoid(a: DMatrix<f64>) -> Result<Self> {
        let a_inv = check_invertible(&a)?;
        Ok(ConvexBody { dim: a.nrows(), rep: Rep::Ellipsoid { a, a_inv } })
    }

    /// Axis-aligned ellipsoid with the given semi-axes.
    pub fn ellipsoid_diag(semi_axes: &[f64]) -> Result<Self> {
        let n = semi_axes.len();
        Self::ellipsoid(DMatrix::from_fn(n, n, |r, c| if r == c { semi_axes[r] } else { 0.0 }))
    }

    /// `A · B_p` with `p` in `(1, ∞)`.
    pub fn lp_ball(a: DMatrix<f64>, p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidBody(format!("lp ball exponent must lie in (1, inf), got {p}")));
        }
        let a_inv = check_invertible(&a)?;
        Ok(ConvexBody { dim: a.nrows(), rep: Rep::LpBall { a, a_inv, p } })
    }

    /// Unit `l_p` ball.
    pub fn lp_ball_unit(n: usize, p: f64) -> Result<Self> {
        Self::lp_ball(DMatrix::identity(n, n), p)
    }

    /// Body with gauge `(Σ_i |<a_i, x>|^s)^{1/s}`; smooth and strictly convex
    /// for `s` in `(1, ∞)` when the functionals span.
    pub fn power_sum(functionals: Vec<DVector<f64>>, s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 1.0) {
            return Err(Error::InvalidBody(format!("power-sum exponent must lie in (1, inf), got {s}")));
        }
        let n = functionals.first().map(|v| v.len()).unwrap_or(0);
        check_spanning(&functionals, n, "functionals")?;
        Ok(ConvexBody { dim: n, rep: Rep::PowerSum { functionals, s } })
    }

    /// Euclidean unit ball.
    pub fn ball(n: usize) -> Self {
        Self::ellipsoid(DMatrix::identity(n, n)).expect("identity is invertible")
    }

    /// Cube `[-1, 1]^n`.
    pub fn cube(n: usize) -> Self {
        let fs = (0..n).map(|i| DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 })).collect();
        Self::hpolytope(fs).expect("axis functionals span")
    }

    /// Cross-polytope `conv { ±e_i }`.
    pub fn cross_polytope(n: usize) -> Self {
        let vs = (0..n).map(|i| DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 })).collect();
        Self::vpolytope(vs).expect("axis vertices span")
    }

    /// Regular polygon with `edges` edges (even, >= 4), circumscribing edge
    /// distance 1: functionals at angles `k·π/(edges/2)`.
    pub fn regular_polygon(edges: usize) -> Result<Self> {
        if edges < 4 || edges % 2 != 0 {
            return Err(Error::InvalidBody("regular_polygon wants an even edge count >= 4".into()));
        }
        let pairs = edges / 2;
        let fs = (0..pairs)
            .map(|k| {
                let ang = k as f64 * std::f64::consts::PI / pairs as f64;
                DVector::from_vec(vec![ang.cos(), ang.sin()])
            })
            .collect();
        Self::hpolytope(fs)
    }

    // ----- basic queries ---------------------------------------------------

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when the boundary is C^1 and strictly convex, so that gauge
    /// gradients (outward normals) are defined everywhere off the origin.
    pub fn is_smooth(&self) -> bool {
        match &self.rep {
            Rep::HPolytope { .. } | Rep::VPolytope { .. } => false,
            Rep::Ellipsoid { .. } | Rep::LpBall { .. } | Rep::PowerSum { .. } => true,
            Rep::PolarDual { inner } => inner.is_smooth(),
        }
    }

    /// Short human-readable representation tag (for reports).
    pub fn kind(&self) -> &'static str {
        match &self.rep {
            Rep::HPolytope { .. } => "hpolytope",
            Rep::VPolytope { .. } => "vpolytope",
            Rep::Ellipsoid { .. } => "ellipsoid",
            Rep::LpBall { .. } => "lpball",
            Rep::PowerSum { .. } => "powersum",
            Rep::PolarDual { .. } => "polar",
        }
    }

    fn check_dim(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        Ok(())
    }

    // ----- gauge and support ------------------------------------------------

    /// Minkowski gauge `g_K(x)`; positively homogeneous, `g_K(0) = 0`,
    /// and `K = { g_K <= 1 }`.
    pub fn gauge(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        Ok(match &self.rep {
            Rep::HPolytope { functionals } => functionals.iter().map(|a| a.dot(x).abs()).fold(0.0, f64::max),
            Rep::VPolytope { vertices } => match lp::min_abs_combination(vertices, x) {
                Some((g, _)) => g,
                None => return Err(Error::InvalidBody("vertices do not span the query point".into())),
            },
            Rep::Ellipsoid { a_inv, .. } => (a_inv * x).norm(),
            Rep::LpBall { a_inv, p, .. } => pnorm(&(a_inv * x), *p),
            Rep::PowerSum { functionals, s } => {
                let w = DVector::from_fn(functionals.len(), |i, _| functionals[i].dot(x));
                pnorm(&w, *s)
            }
            Rep::PolarDual { inner } => inner.support(x)?,
        })
    }

    /// Support function `h_K(u) = sup_{x in K} <x, u>`; equals the gauge of
    /// the polar body.
    pub fn support(&self, u: &DVector<f64>) -> Result<f64> {
        self.check_dim(u)?;
        Ok(match &self.rep {
            Rep::HPolytope { functionals } => match lp::min_abs_combination(functionals, u) {
                Some((h, _)) => h,
                None => return Err(Error::InvalidBody("functionals do not span".into())),
            },
            Rep::VPolytope { vertices } => vertices.iter().map(|v| v.dot(u).abs()).fold(0.0, f64::max),
            Rep::Ellipsoid { a, .. } => (a.transpose() * u).norm(),
            Rep::LpBall { a, p, .. } => pnorm(&(a.transpose() * u), p / (p - 1.0)),
            Rep::PowerSum { functionals, s } => {
                if u.norm() == 0.0 {
                    0.0
                } else {
                    power_sum_support(functionals, *s, u)?.0
                }
            }
            Rep::PolarDual { inner } => inner.gauge(u)?,
        })
    }

    /// A boundary point maximizing `<x, u>` over `K`.
    ///
    /// For polytopes the maximizer may be a whole face; the deterministic
    /// tie-break (lowest vertex index / Bland pivot order) picks a fixed
    /// vertex of that face and the ambiguity is inherent to the input, not
    /// reported as an error.
    pub fn support_point(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(u)?;
        if u.norm() < 1e-300 {
            return Err(Error::ZeroDirection);
        }
        Ok(match &self.rep {
            Rep::HPolytope { functionals } => match lp::box_support_point(functionals, u) {
                Some((x, _)) => x,
                None => return Err(Error::InvalidBody("functionals do not span".into())),
            },
            Rep::VPolytope { vertices } => {
                let mut best = 0usize;
                let mut best_val = f64::NEG_INFINITY;
                let mut sign = 1.0;
                for (j, v) in vertices.iter().enumerate() {
                    let d = v.dot(u);
                    if d.abs() > best_val + 1e-15 {
                        best_val = d.abs();
                        best = j;
                        sign = if d >= 0.0 { 1.0 } else { -1.0 };
                    }
                }
                &vertices[best] * sign
            }
            Rep::Ellipsoid { a, .. } => {
                let w = a.transpose() * u;
                a * (&w / w.norm())
            }
            Rep::LpBall { a, p, .. } => {
                let q = p / (p - 1.0);
                let w = a.transpose() * u;
                a * lp_unit_support_point(&w, q)
            }
            Rep::PowerSum { functionals, s } => power_sum_support(functionals, *s, u)?.1,
            // By duality the maximizer over K° in direction u is the unit
            // normal point ∇g_inner(u), which lies on ∂K° exactly.
            Rep::PolarDual { inner } => inner.gauge_gradient(u)?,
        })
    }

    /// Gradient of the gauge at `x != 0` (the non-normalized outward normal).
    ///
    /// Errors with [`Error::NotSmooth`] on polytopes — facet normals with a
    /// tie-break are available through [`ConvexBody::normal_at`].
    pub fn gauge_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        if x.norm() < 1e-300 {
            return Err(Error::ZeroDirection);
        }
        Ok(match &self.rep {
            Rep::HPolytope { .. } | Rep::VPolytope { .. } => {
                return Err(Error::NotSmooth(
                    "polytope gauges are piecewise linear; use normal_at for a facet normal with tie-break".into(),
                ))
            }
            Rep::Ellipsoid { a_inv, .. } => {
                let y = a_inv * x;
                a_inv.transpose() * (&y / y.norm())
            }
            Rep::LpBall { a_inv, p, .. } => {
                let y = a_inv * x;
                a_inv.transpose() * pnorm_gradient(&y, *p)
            }
            Rep::PowerSum { functionals, s } => {
                let w = DVector::from_fn(functionals.len(), |i, _| functionals[i].dot(x));
                let grad_w = pnorm_gradient(&w, *s);
                let mut g = DVector::zeros(self.dim);
                for (a, &gw) in functionals.iter().zip(grad_w.iter()) {
                    g += a * gw;
                }
                g
            }
            // ∇h_inner(x) is the supporting point of the inner body in
            // direction x (unique by strict convexity).
            Rep::PolarDual { inner } => inner.support_point(x)?,
        })
    }

    /// Outward normal direction at a boundary point.
    ///
    /// Smooth bodies use the gauge gradient; halfspace polytopes return the
    /// functional of the most-binding constraint (lowest index on ties, which
    /// is the documented deterministic tie-break on ridges). Vertex-form
    /// polytopes carry no facet data and are rejected.
    pub fn normal_at(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.rep {
            Rep::HPolytope { functionals } => {
                self.check_dim(x)?;
                let mut best = 0usize;
                let mut best_val = f64::NEG_INFINITY;
                for (i, a) in functionals.iter().enumerate() {
                    let v = a.dot(x).abs();
                    if v > best_val + 1e-15 {
                        best_val = v;
                        best = i;
                    }
                }
                let sign = functionals[best].dot(x).signum();
                Ok(&functionals[best] * sign)
            }
            Rep::VPolytope { .. } => Err(Error::NotSmooth(
                "vertex-form polytopes carry no facet normals; convert to halfspace form or smooth first".into(),
            )),
            _ => self.gauge_gradient(x),
        }
    }

    /// Radial projection of `u` onto the boundary: `u / g_K(u)`.
    /// The result has gauge 1 within [`crate::tol::BOUNDARY_POINT_TOL`].
    pub fn boundary_point(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(u)?;
        let g = self.gauge(u)?;
        if !(g > 1e-300) {
            return Err(Error::ZeroDirection);
        }
        Ok(u / g)
    }

    // ----- polar duality ----------------------------------------------------

    /// The polar body `K° = { p : <p, q> <= 1 for all q in K }`.
    ///
    /// Closed forms: halfspace and vertex forms swap data, linear images of
    /// `B_2`/`B_p` dualize through the inverse transpose and the conjugate
    /// exponent. Power-sum bodies have no closed-form polar and return an
    /// exact duality wrapper whose gauge evaluates `h_K`.
    pub fn polar(&self) -> ConvexBody {
        let rep = match &self.rep {
            Rep::HPolytope { functionals } => Rep::VPolytope { vertices: functionals.clone() },
            Rep::VPolytope { vertices } => Rep::HPolytope { functionals: vertices.clone() },
            Rep::Ellipsoid { a, a_inv } => Rep::Ellipsoid { a: a_inv.transpose(), a_inv: a.transpose() },
            Rep::LpBall { a, a_inv, p } => {
                Rep::LpBall { a: a_inv.transpose(), a_inv: a.transpose(), p: p / (p - 1.0) }
            }
            Rep::PowerSum { .. } => Rep::PolarDual { inner: Box::new(self.clone()) },
            Rep::PolarDual { inner } => inner.rep.clone(),
        };
        ConvexBody { dim: self.dim, rep }
    }

    /// The dilate `t · K`, `t > 0`.
    pub fn scale(&self, t: f64) -> Result<ConvexBody> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidInput(format!("scale factor must be positive, got {t}")));
        }
        let rep = match &self.rep {
            Rep::HPolytope { functionals } => {
                Rep::HPolytope { functionals: functionals.iter().map(|a| a / t).collect() }
            }
            Rep::VPolytope { vertices } => Rep::VPolytope { vertices: vertices.iter().map(|v| v * t).collect() },
            Rep::Ellipsoid { a, a_inv } => Rep::Ellipsoid { a: a * t, a_inv: a_inv / t },
            Rep::LpBall { a, a_inv, p } => Rep::LpBall { a: a * t, a_inv: a_inv / t, p: *p },
            Rep::PowerSum { functionals, s } => {
                Rep::PowerSum { functionals: functionals.iter().map(|a| a / t).collect(), s: *s }
            }
            Rep::PolarDual { inner } => Rep::PolarDual { inner: Box::new(inner.scale(1.0 / t)?) },
        };
        Ok(ConvexBody { dim: self.dim, rep })
    }

    /// Smooth strictly convex envelope: halfspace polytopes become power sums
    /// over the same functionals, vertex polytopes are smoothed through their
    /// polar; already-smooth bodies are returned unchanged.
    ///
    /// Halfspace form smooths inward (the result is inscribed in the
    /// original), vertex form smooths outward (circumscribed); either way the
    /// result converges to the original as `s → ∞`.
    pub fn smoothed(&self, s: f64) -> Result<ConvexBody> {
        match &self.rep {
            Rep::HPolytope { functionals } => ConvexBody::power_sum(functionals.clone(), s),
            Rep::VPolytope { vertices } => {
                // conv{±v}: polar is the halfspace body over the vertices, so
                // smooth the polar and dualize back (keeps containment K_s ⊇ ... ).
                let smooth_polar = ConvexBody::power_sum(vertices.clone(), s)?;
                Ok(smooth_polar.polar())
            }
            _ => Ok(self.clone()),
        }
    }

    // ----- derived measurements ----------------------------------------------

    /// Half-widths of the axis-aligned bounding box: `h_K(e_i)`.
    pub fn axis_supports(&self) -> Result<Vec<f64>> {
        (0..self.dim)
            .map(|i| {
                let e = DVector::from_fn(self.dim, |r, _| if r == i { 1.0 } else { 0.0 });
                self.support(&e)
            })
            .collect()
    }

    /// Data for an exact volume formula, when the representation has one.
    pub(crate) fn closed_form_volume_data(&self) -> Option<crate::mahler::CfVolume> {
        use crate::mahler::CfVolume;
        match &self.rep {
            Rep::HPolytope { functionals } if functionals.len() == self.dim => {
                let m = DMatrix::from_fn(self.dim, self.dim, |r, c| functionals[r][c]);
                Some(CfVolume::Box { det: m.determinant() })
            }
            Rep::VPolytope { vertices } if vertices.len() == self.dim => {
                let m = DMatrix::from_fn(self.dim, self.dim, |r, c| vertices[c][r]);
                Some(CfVolume::CrossPolytope { det: m.determinant() })
            }
            Rep::Ellipsoid { a, .. } => Some(CfVolume::Ellipsoid { det: a.determinant() }),
            Rep::LpBall { a, p, .. } => Some(CfVolume::LpBall { det: a.determinant(), p: *p }),
            _ => None,
        }
    }

    /// The generating vertices of a vertex-form polytope (`K = conv{±v_j}`).
    pub(crate) fn vertex_list(&self) -> Option<Vec<DVector<f64>>> {
        match &self.rep {
            Rep::VPolytope { vertices } => Some(vertices.clone()),
            _ => None,
        }
    }

    /// Largest `r` such that `r S ⊆ K`, i.e. `min_{x on ∂K} g_S(x)`.
    ///
    /// Multistart derivative-free descent over boundary directions: the `2n`
    /// coordinate axes plus seeded random directions up to `starts`, each run
    /// to `tol.search_tol`, with a local re-polish of the incumbent.
    pub fn inradius_wrt(&self, s: &ConvexBody, starts: usize, seed: u64, tol: &Tolerances) -> Result<Inradius> {
        if s.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: s.dim() });
        }
        let n = self.dim;
        let objective = |u: &[f64]| -> f64 {
            let v = DVector::from_column_slice(u);
            match self.boundary_point(&v).and_then(|b| s.gauge(&b)) {
                Ok(g) => g,
                Err(_) => f64::INFINITY,
            }
        };
        let mut start_dirs: Vec<DVector<f64>> = Vec::new();
        for i in 0..n {
            for sign in [1.0, -1.0] {
                start_dirs.push(DVector::from_fn(n, |r, _| if r == i { sign } else { 0.0 }));
            }
        }
        let mut rng = numerics::stream_rng(seed, 0x1238_1db5);
        while start_dirs.len() < starts.max(2 * n) {
            start_dirs.push(numerics::random_unit_vector(&mut rng, n));
        }
        let opts = DescentOptions { tol: tol.search_tol, max_evals: 4_000, init_step: 0.35 };
        let project = project_unit_blocks(n);
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut converged = 0usize;
        for dir in &start_dirs {
            let res = minimize_local(objective, dir.as_slice(), &project, &opts);
            if res.converged {
                converged += 1;
            }
            if best.as_ref().map(|(v, _)| res.value < *v).unwrap_or(true) {
                best = Some((res.value, res.x));
            }
        }
        let (_, x) = best.expect("at least one start");
        let polish_opts = DescentOptions { tol: (tol.search_tol * 1e-3).max(1e-14), max_evals: 4_000, init_step: 1e-4 };
        let polished = minimize_local(objective, &x, &project, &polish_opts);
        let direction = DVector::from_column_slice(&polished.x);
        let witness = self.boundary_point(&direction)?;
        Ok(Inradius { value: polished.value, witness, direction, starts: start_dirs.len(), converged_starts: converged })
    }
}

/// Result of a relative-inradius computation.
#[derive(Clone, Debug)]
pub struct Inradius {
    /// `max { r : r S ⊆ K }`.
    pub value: f64,
    /// Boundary point of `K` attaining `g_S(witness) = value` (a tangency
    /// point of the scaled copy `value · S`).
    pub witness: DVector<f64>,
    /// The direction whose boundary point is `witness`.
    pub direction: DVector<f64>,
    pub starts: usize,
    pub converged_starts: usize,
}

/// Support point of the unit `l_q`-dual construction: the maximizer of
/// `<x, w>` over the unit `l_p` ball, written via the conjugate exponent `q`.
fn lp_unit_support_point(w: &DVector<f64>, q: f64) -> DVector<f64> {
    let m = w.amax();
    let u = w / m;
    let nq = pnorm(&u, q);
    DVector::from_fn(w.len(), |i, _| {
        let t = u[i].abs() / nq;
        u[i].signum() * t.powf(q - 1.0)
    })
}

/// Support function and support point of a power-sum body.
///
/// Solves the strictly convex program `min φ(x) = (1/s)·Σ|<a_i,x>|^s - <u, x>`
/// by damped Newton; at the optimum `∇(g^s/s) = u`, so `x*/g(x*)` is the
/// boundary maximizer and `h(u) = <u, x*>/g(x*)`. Converges to near machine
/// precision, which downstream finite-difference checks rely on.
fn power_sum_support(functionals: &[DVector<f64>], s: f64, u_raw: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let n = u_raw.len();
    let unorm = u_raw.norm();
    let u = u_raw / unorm;
    let k = functionals.len();

    let wdot = |x: &DVector<f64>| DVector::from_fn(k, |i, _| functionals[i].dot(x));
    let phi = |x: &DVector<f64>| -> f64 {
        let w = wdot(x);
        w.iter().map(|wi| wi.abs().powf(s)).sum::<f64>() / s - u.dot(x)
    };

    // Start on the ray through u, at the scale where the ray derivative vanishes.
    let gs_u: f64 = wdot(&u).iter().map(|wi| wi.abs().powf(s)).sum();
    let mut x = &u * (1.0 / gs_u).powf(1.0 / (s - 1.0));
    let mut fx = phi(&x);

    for _ in 0..80 {
        let w = wdot(&x);
        let mut grad = -u.clone();
        for (a, &wi) in functionals.iter().zip(w.iter()) {
            grad += a * (wi.signum() * wi.abs().powf(s - 1.0));
        }
        let gnorm = grad.norm();
        if gnorm <= 1e-13 {
            break;
        }
        let mut hess = DMatrix::zeros(n, n);
        for (a, &wi) in functionals.iter().zip(w.iter()) {
            let c = (s - 1.0) * wi.abs().powf(s - 2.0);
            if c.is_finite() {
                hess.syger(c, a, a, 1.0);
            }
        }
        for i in 0..n {
            hess[(i, i)] += 1e-14;
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&(-&grad)),
            None => -&grad * (1.0 / gnorm), // gradient fallback for degenerate Hessians
        };
        let mut t = 1.0;
        let slope = grad.dot(&step);
        let mut advanced = false;
        while t > 1e-14 {
            let cand = &x + &step * t;
            let fc = phi(&cand);
            if fc <= fx + 1e-4 * t * slope {
                x = cand;
                fx = fc;
                advanced = true;
                break;
            }
            t *= 0.5;
        }
        if !advanced {
            break;
        }
    }

    let w = wdot(&x);
    let g = pnorm(&w, s);
    if !(g > 1e-300) {
        return Err(Error::NoConvergence("power-sum support solve collapsed to the origin".into()));
    }
    let sp = &x / g;
    Ok((unorm * u.dot(&sp), sp))
}
