//! Diagonal-Gaussian negative log-likelihood.

/// `-log N(a; mu, diag(sigma^2))`
/// `= sum_d [ log sigma_d + (a_d - mu_d)^2 / (2 sigma_d^2) ] + (D/2) log 2pi`.
///
/// All slices must share a length and `sigma` must be strictly positive.
pub fn gaussian_nll(a: &[f64], mu: &[f64], sigma: &[f64]) -> f64 {
    assert_eq!(a.len(), mu.len());
    assert_eq!(a.len(), sigma.len());
    let mut acc = 0.5 * a.len() as f64 * (2.0 * std::f64::consts::PI).ln();
    for ((&av, &mv), &sv) in a.iter().zip(mu).zip(sigma) {
        assert!(sv > 0.0, "sigma must be positive");
        let d = av - mv;
        acc += sv.ln() + d * d / (2.0 * sv * sv);
    }
    acc
}

/// NLL plus its gradients in `mu` and `sigma`:
/// `dNLL/dmu_d = (mu_d - a_d) / sigma_d^2`,
/// `dNLL/dsigma_d = 1/sigma_d - (a_d - mu_d)^2 / sigma_d^3`.
pub fn gaussian_nll_grad(
    a: &[f64],
    mu: &[f64],
    sigma: &[f64],
    dmu: &mut [f64],
    dsigma: &mut [f64],
) -> f64 {
    let nll = gaussian_nll(a, mu, sigma);
    for i in 0..a.len() {
        let d = a[i] - mu[i];
        let s2 = sigma[i] * sigma[i];
        dmu[i] = -d / s2;
        dsigma[i] = 1.0 / sigma[i] - d * d / (s2 * sigma[i]);
    }
    nll
}
