//! Central finite-difference gradient checking.
//!
//! The checker only re-runs a caller-supplied forward closure at perturbed
//! parameter values, so it is independent of the reverse-mode sweep it is
//! used to verify.

use super::Tensor;

/// Numerical gradient of `f` w.r.t. every entry of `param`, by central
/// differences with the given step. `f` must rebuild its forward pass from
/// the tensor's current data on every call. The tensor is restored afterward.
pub fn finite_diff_grad(param: &Tensor, step: f64, mut f: impl FnMut() -> f64) -> Vec<f64> {
    let base = param.to_vec();
    let mut grads = vec![0.0; base.len()];
    let mut work = base.clone();
    for i in 0..base.len() {
        work[i] = base[i] + step;
        param.set_data(&work).unwrap();
        let fp = f();
        work[i] = base[i] - step;
        param.set_data(&work).unwrap();
        let fm = f();
        work[i] = base[i];
        grads[i] = (fp - fm) / (2.0 * step);
    }
    param.set_data(&base).unwrap();
    grads
}

/// Worst relative error between two gradient vectors, with denominator
/// max(|a|, |b|, 1e-6) so that near-zero entries compare absolutely.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}
