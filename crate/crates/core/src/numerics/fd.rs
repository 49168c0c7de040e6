//! Finite-difference validation of claimed gradients.

use nalgebra::DVector;

use crate::tol::FD_STEP;

/// Compares a claimed gradient against central differences of `f` at each
/// sample point; returns the maximum relative deviation
/// `||fd - grad|| / max(1, ||grad||)` across the samples.
pub fn finite_diff_check<F, G>(f: F, grad: G, samples: &[DVector<f64>]) -> f64
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut worst = 0.0f64;
    for x in samples {
        let g = grad(x);
        let mut fd = DVector::zeros(x.len());
        for i in 0..x.len() {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[i] += FD_STEP;
            lo[i] -= FD_STEP;
            fd[i] = (f(&hi) - f(&lo)) / (2.0 * FD_STEP);
        }
        let dev = (fd - &g).norm() / g.norm().max(1.0);
        worst = worst.max(dev);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn accepts_a_correct_gradient() {
        let f = |x: &DVector<f64>| x[0] * x[0] + 3.0 * x[0] * x[1];
        let g = |x: &DVector<f64>| dvector![2.0 * x[0] + 3.0 * x[1], 3.0 * x[0]];
        let samples = vec![dvector![0.3, -1.2], dvector![2.0, 0.5]];
        assert!(finite_diff_check(f, g, &samples) < 1e-9);
    }

    #[test]
    fn flags_a_wrong_gradient() {
        let f = |x: &DVector<f64>| x[0] * x[0];
        let g = |x: &DVector<f64>| dvector![5.0 * x[0]]; // wrong factor
        let samples = vec![dvector![1.0]];
        assert!(finite_diff_check(f, g, &samples) > 0.5);
    }
}
