//! Scalar root finding along rays.

use crate::error::{Error, Result};
use crate::tol::{ROOT_BRACKET_WIDTH, ROOT_RESIDUAL_TOL};

/// Finds the root of `g` in `[lo, hi]`, given `g(lo) < 0 < g(hi)`.
///
/// Bisection narrows the bracket to [`ROOT_BRACKET_WIDTH`] (relative to the
/// bracket magnitude), then a few Newton steps (or secant steps when no
/// derivative is supplied) polish the result. The returned `t` satisfies
/// `|g(t)| <= ROOT_RESIDUAL_TOL` for unit-scale functions.
pub fn root_on_ray<G>(g: G, dg: Option<&dyn Fn(f64) -> f64>, lo: f64, hi: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = (lo, hi);
    let (mut glo, ghi) = (g(lo), g(hi));
    if !(glo < 0.0 && ghi > 0.0) {
        return Err(Error::Bracket(format!("need g(lo) < 0 < g(hi), got g({lo}) = {glo}, g({hi}) = {ghi}")));
    }
    let width_goal = ROOT_BRACKET_WIDTH * hi.abs().max(1.0);
    while hi - lo > width_goal {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // resolution limit
        }
        let gm = g(mid);
        if gm < 0.0 {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    let mut t = if -glo < g(hi) { lo } else { hi };
    let mut gt = g(t);
    for _ in 0..6 {
        if gt.abs() <= 0.25 * ROOT_RESIDUAL_TOL {
            break;
        }
        let slope = match dg {
            Some(d) => d(t),
            None => {
                let h = (hi - lo).max(1e-13);
                (g(t + h) - g(t - h)) / (2.0 * h)
            }
        };
        if !slope.is_finite() || slope.abs() < 1e-14 {
            break;
        }
        let next = t - gt / slope;
        if !(lo - width_goal..=hi + width_goal).contains(&next) {
            break;
        }
        t = next;
        gt = g(t);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let g = |t: f64| t * t - 2.0;
        let dg = |t: f64| 2.0 * t;
        let t = root_on_ray(g, Some(&dg), 0.0, 2.0).unwrap();
        assert!((t - 2.0f64.sqrt()).abs() < 1e-12);
        assert!(g(t).abs() <= ROOT_RESIDUAL_TOL);
    }

    #[test]
    fn works_without_derivative() {
        let g = |t: f64| t.exp() - 3.0;
        let t = root_on_ray(g, None, 0.0, 4.0).unwrap();
        assert!((t - 3.0f64.ln()).abs() < 1e-11);
        assert!(g(t).abs() <= ROOT_RESIDUAL_TOL);
    }

    #[test]
    fn rejects_bad_brackets() {
        assert!(root_on_ray(|t| t + 10.0, None, 0.0, 1.0).is_err());
    }
}
