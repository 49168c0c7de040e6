//! Derivative-free local descent (Nelder-Mead) with a projection hook.
//!
//! The trajectory search and the relative-inradius computation both minimize
//! over products of unit spheres; the projection hook renormalizes each
//! coordinate block after every proposed step, so the simplex lives on the
//! constraint manifold. Deterministic given the start point.

/// Options for [`minimize_local`].
#[derive(Clone, Debug)]
pub struct DescentOptions {
    /// Stop when the simplex diameter (max distance to the best vertex) falls below this.
    pub tol: f64,
    /// Hard cap on objective evaluations.
    pub max_evals: usize,
    /// Edge length of the initial simplex (before projection).
    pub init_step: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions { tol: 1e-10, max_evals: 20_000, init_step: 0.25 }
    }
}

/// Result of a local descent run.
#[derive(Clone, Debug)]
pub struct DescentResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    /// True when the simplex-diameter criterion was met within budget.
    pub converged: bool,
}

/// Minimizes `f` from `x0` with the standard Nelder-Mead moves
/// (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
///
/// `project` is applied to the start, to every trial point, and after shrink
/// steps; it must be idempotent. Ties are resolved by insertion order, so the
/// run is deterministic.
pub fn minimize_local<F, P>(mut f: F, x0: &[f64], project: P, opts: &DescentOptions) -> DescentResult
where
    F: FnMut(&[f64]) -> f64,
    P: Fn(&mut [f64]),
{
    let dim = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut base = x0.to_vec();
    project(&mut base);
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    let mut values: Vec<f64> = Vec::with_capacity(dim + 1);
    simplex.push(base.clone());
    values.push(eval(&base, &mut evals));
    for i in 0..dim {
        let mut v = base.clone();
        v[i] += opts.init_step;
        project(&mut v);
        values.push(eval(&v, &mut evals));
        simplex.push(v);
    }

    let mut order: Vec<usize> = (0..=dim).collect();
    loop {
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];

        // Convergence: diameter of the simplex around the incumbent.
        let diam = order
            .iter()
            .skip(1)
            .map(|&i| {
                simplex[i]
                    .iter()
                    .zip(&simplex[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        if diam < opts.tol {
            return DescentResult { x: simplex[best].clone(), value: values[best], evals, converged: true };
        }
        if evals >= opts.max_evals {
            return DescentResult { x: simplex[best].clone(), value: values[best], evals, converged: false };
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; dim];
        for &i in order.iter().take(dim) {
            for (c, xi) in centroid.iter_mut().zip(&simplex[i]) {
                *c += xi / dim as f64;
            }
        }

        let blend = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
            let mut out: Vec<f64> = a.iter().zip(b).map(|(ai, bi)| ai + t * (bi - ai)).collect();
            project(&mut out);
            out
        };

        // Reflection.
        let reflected = blend(&centroid, &simplex[worst], -1.0);
        let fr = eval(&reflected, &mut evals);
        if fr < values[order[0]] {
            // Expansion.
            let expanded = blend(&centroid, &simplex[worst], -2.0);
            let fe = eval(&expanded, &mut evals);
            if fe < fr {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = fr;
            continue;
        }
        // Contraction (outside if the reflection improved on the worst).
        let contracted = if fr < values[worst] {
            blend(&centroid, &simplex[worst], -0.5)
        } else {
            blend(&centroid, &simplex[worst], 0.5)
        };
        let fc = eval(&contracted, &mut evals);
        if fc < values[worst].min(fr) {
            simplex[worst] = contracted;
            values[worst] = fc;
            continue;
        }
        // Shrink toward the best vertex.
        let best_point = simplex[best].clone();
        for &i in order.iter().skip(1) {
            simplex[i] = blend(&best_point, &simplex[i], 0.5);
            values[i] = eval(&simplex[i], &mut evals);
        }
    }
}

/// Projection hook renormalizing each consecutive `block` of coordinates to
/// the unit sphere (the domain of boundary-direction parametrizations).
pub fn project_unit_blocks(block: usize) -> impl Fn(&mut [f64]) {
    move |x: &mut [f64]| {
        for chunk in x.chunks_mut(block) {
            let norm = chunk.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                for v in chunk {
                    *v /= norm;
                }
            } else {
                chunk.fill(0.0);
                chunk[0] = 1.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_a_shifted_quadratic() {
        let f = |x: &[f64]| (x[0] - 1.5).powi(2) + 3.0 * (x[1] + 0.5).powi(2) + 7.0;
        let res = minimize_local(f, &[0.0, 0.0], |_x: &mut [f64]| {}, &DescentOptions::default());
        assert!(res.converged);
        assert!((res.x[0] - 1.5).abs() < 1e-7, "{:?}", res.x);
        assert!((res.x[1] + 0.5).abs() < 1e-7);
        assert!((res.value - 7.0).abs() < 1e-12);
    }

    #[test]
    fn respects_sphere_projection() {
        // min x . d over the unit sphere is attained at -d.
        let d = [0.6, -0.8];
        let f = move |x: &[f64]| x[0] * d[0] + x[1] * d[1];
        let res = minimize_local(f, &[1.0, 0.0], project_unit_blocks(2), &DescentOptions::default());
        assert!(res.converged);
        assert!((res.value + 1.0).abs() < 1e-9, "value {}", res.value);
        let norm = (res.x[0] * res.x[0] + res.x[1] * res.x[1]).sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn is_deterministic() {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (v - i as f64).powi(2)).sum::<f64>();
        let a = minimize_local(f, &[5.0; 4], |_x: &mut [f64]| {}, &DescentOptions::default());
        let b = minimize_local(f, &[5.0; 4], |_x: &mut [f64]| {}, &DescentOptions::default());
        assert_eq!(a.x, b.x);
        assert_eq!(a.evals, b.evals);
    }
}
