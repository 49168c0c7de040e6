//! Dense linear programming at desk scale.
//!
//! A self-contained two-phase tableau simplex for problems with at most a few
//! dozen variables and ~10 equality constraints:
//!
//! ```text
//!     minimize c'z   subject to   Az = b,  z >= 0.
//! ```
//!
//! Bland's rule is used throughout (termination over speed; problems here are
//! tiny), artificial variables are pivoted out eagerly, and callers re-verify
//! solutions by direct substitution. The workspace is reusable so per-sample
//! membership tests inside Monte Carlo loops do not allocate.

use nalgebra::DVector;

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum LpStatus {
    Optimal,
    /// Phase 1 ended with positive artificial mass (sum reported).
    Infeasible { residual: f64 },
    Unbounded,
}

#[derive(Clone, Debug)]
pub(crate) struct LpSolution {
    pub status: LpStatus,
    /// Primal values for the original (non-artificial) variables.
    pub z: Vec<f64>,
    pub objective: f64,
}

/// Reusable scratch space for the simplex tableau.
#[derive(Default)]
pub(crate) struct LpWorkspace {
    t: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
}

enum PivotOutcome {
    Optimal,
    Unbounded,
    Stalled,
}

impl LpWorkspace {
    /// Solves `min c'z : Az = b, z >= 0` with `A` given row-major (`m x k`).
    ///
    /// Rows with negative right-hand side are flipped first; artificials are
    /// appended internally. `z` slots beyond `k` are never exposed.
    pub fn solve(&mut self, m: usize, k: usize, a: &[f64], b: &[f64], c: &[f64]) -> LpSolution {
        assert_eq!(a.len(), m * k);
        assert_eq!(b.len(), m);
        assert_eq!(c.len(), k);
        let cols = k + m; // original variables + artificials
        let stride = cols + 1; // rhs column at index `cols`
        self.t.clear();
        self.t.resize((m + 1) * stride, 0.0);
        self.basis.clear();
        self.in_basis.clear();
        self.in_basis.resize(cols, false);

        for r in 0..m {
            let flip = if b[r] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..k {
                self.t[r * stride + j] = flip * a[r * k + j];
            }
            self.t[r * stride + k + r] = 1.0;
            self.t[r * stride + cols] = flip * b[r];
            self.basis.push(k + r);
            self.in_basis[k + r] = true;
        }

        // Phase-1 objective: sum of artificials, priced out against the basis.
        for j in 0..=cols {
            let mut s = 0.0;
            for r in 0..m {
                s += self.t[r * stride + j];
            }
            let base = if (k..cols).contains(&j) { 1.0 } else { 0.0 };
            self.t[m * stride + j] = base - s;
        }

        let budget = 400 + 60 * (m + k);
        match self.pivot_loop(m, cols, stride, cols, budget) {
            PivotOutcome::Optimal => {}
            // Phase 1 is always bounded below by 0; treat anomalies as stalls.
            PivotOutcome::Unbounded | PivotOutcome::Stalled => {
                return LpSolution { status: LpStatus::Infeasible { residual: f64::INFINITY }, z: vec![0.0; k], objective: f64::INFINITY };
            }
        }
        let phase1 = -self.t[m * stride + cols];
        if phase1 > FEAS_TOL {
            return LpSolution { status: LpStatus::Infeasible { residual: phase1 }, z: self.extract(m, k, stride, cols), objective: f64::INFINITY };
        }

        // Drive any zero-valued artificials out of the basis where possible.
        for r in 0..m {
            if self.basis[r] >= k {
                if let Some(j) = (0..k).find(|&j| !self.in_basis[j] && self.t[r * stride + j].abs() > PIVOT_TOL) {
                    self.pivot(m, stride, cols, r, j);
                }
            }
        }

        // Phase-2 objective, priced out against the current basis.
        for j in 0..=cols {
            self.t[m * stride + j] = if j < k { c[j] } else { 0.0 };
        }
        for r in 0..m {
            let bv = self.basis[r];
            if bv < k && c[bv] != 0.0 {
                let cb = c[bv];
                for j in 0..=cols {
                    self.t[m * stride + j] -= cb * self.t[r * stride + j];
                }
            }
        }

        let status = match self.pivot_loop(m, cols, stride, k, budget) {
            PivotOutcome::Optimal => LpStatus::Optimal,
            PivotOutcome::Unbounded => LpStatus::Unbounded,
            PivotOutcome::Stalled => LpStatus::Infeasible { residual: f64::INFINITY },
        };
        let z = self.extract(m, k, stride, cols);
        let objective = c.iter().zip(&z).map(|(ci, zi)| ci * zi).sum();
        LpSolution { status, z, objective }
    }

    fn extract(&self, m: usize, k: usize, stride: usize, cols: usize) -> Vec<f64> {
        let mut z = vec![0.0; k];
        for r in 0..m {
            if self.basis[r] < k {
                z[self.basis[r]] = self.t[r * stride + cols];
            }
        }
        z
    }

    /// Bland-rule pivoting. Only columns `< enter_limit` may enter (phase 2
    /// blocks artificials). Basic artificials sitting at zero leave eagerly so
    /// they can never regain positive value.
    fn pivot_loop(&mut self, m: usize, cols: usize, stride: usize, enter_limit: usize, budget: usize) -> PivotOutcome {
        for _ in 0..budget {
            let obj_row = m * stride;
            let mut enter = None;
            for j in 0..enter_limit {
                if !self.in_basis[j] && self.t[obj_row + j] < -COST_TOL {
                    enter = Some(j);
                    break;
                }
            }
            let Some(j) = enter else { return PivotOutcome::Optimal };

            // Degenerate-artificial rule: a basic artificial (value 0) leaves as
            // soon as its row is touched by the entering column.
            let mut row = None;
            for r in 0..m {
                if self.basis[r] >= enter_limit && self.t[r * stride + j].abs() > PIVOT_TOL {
                    row = Some(r);
                    break;
                }
            }
            if row.is_none() {
                let mut best: Option<(f64, usize)> = None;
                for r in 0..m {
                    let coef = self.t[r * stride + j];
                    if coef > PIVOT_TOL {
                        let ratio = self.t[r * stride + cols] / coef;
                        let better = match best {
                            None => true,
                            Some((br, brow)) => {
                                ratio < br - PIVOT_TOL
                                    || (ratio < br + PIVOT_TOL && self.basis[r] < self.basis[brow])
                            }
                        };
                        if better {
                            best = Some((ratio, r));
                        }
                    }
                }
                match best {
                    Some((_, r)) => row = Some(r),
                    None => return PivotOutcome::Unbounded,
                }
            }
            self.pivot(m, stride, cols, row.unwrap(), j);
        }
        PivotOutcome::Stalled
    }

    fn pivot(&mut self, m: usize, stride: usize, cols: usize, r: usize, j: usize) {
        let piv = self.t[r * stride + j];
        let inv = 1.0 / piv;
        for col in 0..=cols {
            self.t[r * stride + col] *= inv;
        }
        self.t[r * stride + j] = 1.0;
        for row in 0..=m {
            if row == r {
                continue;
            }
            let f = self.t[row * stride + j];
            if f != 0.0 {
                for col in 0..=cols {
                    self.t[row * stride + col] -= f * self.t[r * stride + col];
                }
                self.t[row * stride + j] = 0.0;
            }
        }
        self.in_basis[self.basis[r]] = false;
        self.basis[r] = j;
        self.in_basis[j] = true;
    }
}

thread_local! {
    static SCRATCH: std::cell::RefCell<LpWorkspace> = std::cell::RefCell::new(LpWorkspace::default());
}

/// Runs `f` with the thread-local LP workspace.
pub(crate) fn with_lp<T>(f: impl FnOnce(&mut LpWorkspace) -> T) -> T {
    SCRATCH.with(|ws| f(&mut ws.borrow_mut()))
}

/// Least total-variation combination: `min sum |t_j|` over `sum t_j v_j = x`.
///
/// This is the gauge of `conv{±v_j}` at `x`. Returns the optimum and the
/// signed coefficients, or `None` when `x` is outside the span of the vectors.
pub(crate) fn min_abs_combination(vectors: &[DVector<f64>], x: &DVector<f64>) -> Option<(f64, Vec<f64>)> {
    let n = x.len();
    let k = vectors.len();
    // Normalize magnitudes so pivot tolerances are meaningful.
    let scale = vectors
        .iter()
        .flat_map(|v| v.iter())
        .chain(x.iter())
        .fold(0.0f64, |m, &v| m.max(v.abs()))
        .max(1e-30);
    let mut a = vec![0.0; n * 2 * k];
    for (j, v) in vectors.iter().enumerate() {
        for i in 0..n {
            a[i * 2 * k + j] = v[i] / scale;
            a[i * 2 * k + k + j] = -v[i] / scale;
        }
    }
    let b: Vec<f64> = x.iter().map(|&xi| xi / scale).collect();
    let c = vec![1.0; 2 * k];
    let sol = with_lp(|ws| ws.solve(n, 2 * k, &a, &b, &c));
    match sol.status {
        LpStatus::Optimal => {
            let coeffs: Vec<f64> = (0..k).map(|j| sol.z[j] - sol.z[k + j]).collect();
            Some((sol.objective, coeffs))
        }
        _ => None,
    }
}

/// Maximizes `<u, x>` over `{x : |<a_i, x>| <= 1}`.
///
/// Returns the optimizer (a vertex of the optimal face; the Bland pivot order
/// fixes the tie-break deterministically) and the optimal value. `None` when
/// the region is unbounded in direction `u` (functionals do not span).
pub(crate) fn box_support_point(functionals: &[DVector<f64>], u: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let n = u.len();
    let m = functionals.len();
    let rows = 2 * m;
    let k = 2 * n + rows; // x+, x-, slacks
    let mut a = vec![0.0; rows * k];
    for (i, f) in functionals.iter().enumerate() {
        for d in 0..n {
            a[i * k + d] = f[d];
            a[i * k + n + d] = -f[d];
            a[(m + i) * k + d] = -f[d];
            a[(m + i) * k + n + d] = f[d];
        }
        a[i * k + 2 * n + i] = 1.0;
        a[(m + i) * k + 2 * n + m + i] = 1.0;
    }
    let b = vec![1.0; rows];
    let mut c = vec![0.0; k];
    let unorm = u.norm().max(1e-300);
    for d in 0..n {
        c[d] = -u[d] / unorm;
        c[n + d] = u[d] / unorm;
    }
    let sol = with_lp(|ws| ws.solve(rows, k, &a, &b, &c));
    match sol.status {
        LpStatus::Optimal => {
            let x = DVector::from_fn(n, |d, _| sol.z[d] - sol.z[n + d]);
            let value = u.dot(&x);
            Some((x, value))
        }
        _ => None,
    }
}

/// Convex-combination weights: `w >= 0, sum w = 1, sum w_i x_i = target`.
///
/// On success the weights come from a basic feasible solution, so at most
/// `n + 1` of them are nonzero. `Err` carries the phase-1 residual.
pub(crate) fn conv_weights(points: &[DVector<f64>], target: &DVector<f64>) -> std::result::Result<Vec<f64>, f64> {
    let n = target.len();
    let k = points.len();
    let scale = points
        .iter()
        .flat_map(|p| p.iter())
        .chain(target.iter())
        .fold(0.0f64, |m, &v| m.max(v.abs()))
        .max(1.0);
    let rows = n + 1;
    let mut a = vec![0.0; rows * k];
    for (j, p) in points.iter().enumerate() {
        for i in 0..n {
            a[i * k + j] = p[i] / scale;
        }
        a[n * k + j] = 1.0;
    }
    let mut b: Vec<f64> = target.iter().map(|&t| t / scale).collect();
    b.push(1.0);
    let c = vec![0.0; k];
    let sol = with_lp(|ws| ws.solve(rows, k, &a, &b, &c));
    match sol.status {
        LpStatus::Optimal => Ok(sol.z),
        LpStatus::Infeasible { residual } => Err(residual),
        LpStatus::Unbounded => Err(f64::INFINITY),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn min_abs_combination_is_l1_gauge_for_cross_polytope() {
        // conv{±e1, ±e2} is the l1 ball, so the optimum is |x1| + |x2|.
        let vs = vec![dvector![1.0, 0.0], dvector![0.0, 1.0]];
        let (g, coeffs) = min_abs_combination(&vs, &dvector![0.5, 0.5]).unwrap();
        assert!((g - 1.0).abs() < 1e-12, "g = {g}");
        let rebuilt = &vs[0] * coeffs[0] + &vs[1] * coeffs[1];
        assert!((rebuilt - dvector![0.5, 0.5]).norm() < 1e-12);

        let (g, _) = min_abs_combination(&vs, &dvector![-3.0, 1.0]).unwrap();
        assert!((g - 4.0).abs() < 1e-12);
    }

    #[test]
    fn min_abs_combination_detects_span_failure() {
        let vs = vec![dvector![1.0, 0.0]];
        assert!(min_abs_combination(&vs, &dvector![0.0, 1.0]).is_none());
        // ... but works along the span.
        let (g, _) = min_abs_combination(&vs, &dvector![-2.0, 0.0]).unwrap();
        assert!((g - 2.0).abs() < 1e-12);
    }

    #[test]
    fn box_support_point_on_unit_cube() {
        let fs = vec![dvector![1.0, 0.0], dvector![0.0, 1.0]];
        let (x, v) = box_support_point(&fs, &dvector![3.0, -1.0]).unwrap();
        assert!((v - 4.0).abs() < 1e-10);
        assert!((x - dvector![1.0, -1.0]).norm() < 1e-10);
    }

    #[test]
    fn box_support_point_skewed_functionals() {
        // {|x+y| <= 1, |x-y| <= 1} is the rotated square with vertices (±1, 0), (0, ±1).
        let fs = vec![dvector![1.0, 1.0], dvector![1.0, -1.0]];
        let (_, v) = box_support_point(&fs, &dvector![1.0, 0.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "v = {v}");
        let (_, v) = box_support_point(&fs, &dvector![1.0, 1.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "v = {v}");
    }

    #[test]
    fn conv_weights_feasible_and_infeasible() {
        let pts = vec![dvector![1.0, 0.0], dvector![-1.0, 1.0], dvector![-1.0, -1.0]];
        let w = conv_weights(&pts, &dvector![0.0, 0.0]).unwrap();
        assert!(w.iter().all(|&wi| wi >= -1e-12));
        let s: f64 = w.iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
        let rebuilt = pts.iter().zip(&w).fold(DVector::zeros(2), |acc, (p, &wi)| acc + p * wi);
        assert!(rebuilt.norm() < 1e-9);

        // Origin outside the hull of two points in the right half plane.
        let pts = vec![dvector![1.0, 0.0], dvector![1.0, 1.0]];
        assert!(conv_weights(&pts, &dvector![0.0, 0.0]).is_err());
    }

    #[test]
    fn conv_weights_support_is_caratheodory_small() {
        // Basic feasible solutions have at most n+1 = 3 nonzero weights even
        // with many redundant generators.
        let mut pts = Vec::new();
        for i in 0..12 {
            let a = i as f64 * std::f64::consts::TAU / 12.0;
            pts.push(dvector![a.cos(), a.sin()]);
        }
        let w = conv_weights(&pts, &dvector![0.1, 0.05]).unwrap();
        let nz = w.iter().filter(|&&wi| wi > 1e-12).count();
        assert!(nz <= 3, "nz = {nz}");
    }
}
