//! Central finite-difference gradient checking, always in `f64`.

/// Compare `analytic` against central differences of `f` at `x`.
///
/// Returns the maximum relative error over all coordinates, with the
/// per-coordinate denominator `max(|analytic|, |numeric|, 1e-8)`. The probe
/// point must be differentiable; kink neighborhoods of piecewise-linear ops
/// are the caller's responsibility to avoid.
pub fn grad_check<F>(f: F, x: &[f64], analytic: &[f64], eps: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    assert_eq!(x.len(), analytic.len(), "gradient length must match input length");
    assert!(eps > 0.0);
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let plus = f(&probe);
        probe[i] = x[i] - eps;
        let minus = f(&probe);
        probe[i] = x[i];
        let numeric = (plus - minus) / (2.0 * eps);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}
