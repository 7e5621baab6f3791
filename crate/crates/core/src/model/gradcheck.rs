use super::fusion::{batch_gradient, batch_objective, Example};
use super::{FusionModelParams, ModelError};

/// Largest `|g_a - g_fd| / max(1e-8, |g_a| + |g_fd|)` over all coordinates,
/// where `g_fd` is the central difference of the full objective (mean BCE
/// plus `l2 * ||weights||^2`).
pub fn gradient_check(
    params: &FusionModelParams,
    batch: &[&Example],
    l2: f64,
    epsilon: f64,
) -> Result<f64, ModelError> {
    let (_, analytic) = batch_gradient(params, batch, l2)?;
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for (i, &ga) in analytic.iter().enumerate() {
        let orig = probe.theta[i];
        probe.theta[i] = orig + epsilon;
        let plus = batch_objective(&probe, batch, l2)?;
        probe.theta[i] = orig - epsilon;
        let minus = batch_objective(&probe, batch, l2)?;
        probe.theta[i] = orig;
        let gfd = (plus - minus) / (2.0 * epsilon);
        let rel = (ga - gfd).abs() / (ga.abs() + gfd.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}
