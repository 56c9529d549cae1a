//! Central finite-difference verification of analytic gradients.

use crate::rng::Rng;

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-4;

/// Compares an analytic gradient against central finite differences of
/// `loss` over a random subset of `n_probe` parameters, returning the
/// maximum relative error
/// `|analytic - numeric| / max(1, |analytic|, |numeric|)`.
///
/// The loss must be twice differentiable at `params`: move parameters away
/// from ReLU kinks first (see `Mlp::nudge_relu_kinks`), or finite
/// differences straddle a kink and disagree with the true one-sided
/// gradient.
pub fn grad_check<F>(
    loss: F,
    params: &[f64],
    analytic: &[f64],
    n_probe: usize,
    step: f64,
    rng: &mut Rng,
) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let n = params.len();
    let probes: Vec<usize> = if n_probe >= n {
        (0..n).collect()
    } else {
        (0..n_probe).map(|_| rng.below(n as u64) as usize).collect()
    };
    grad_check_indices(loss, params, analytic, &probes, step)
}

/// As [`grad_check`], probing an explicit list of parameter indices.
pub fn grad_check_indices<F>(
    loss: F,
    params: &[f64],
    analytic: &[f64],
    indices: &[usize],
    step: f64,
) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len());
    let mut scratch = params.to_vec();
    let mut worst = 0.0f64;
    for &idx in indices {
        let orig = scratch[idx];
        scratch[idx] = orig + step;
        let up = loss(&scratch);
        scratch[idx] = orig - step;
        let down = loss(&scratch);
        scratch[idx] = orig;
        let numeric = (up - down) / (2.0 * step);
        let denom = 1.0f64.max(numeric.abs()).max(analytic[idx].abs());
        worst = worst.max((numeric - analytic[idx]).abs() / denom);
    }
    worst
}
