//! Adam optimizer over flat parameter vectors.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AdamError {
    #[error("non-finite gradient at parameter {0}; update rejected")]
    NonFiniteGradient(usize),
    #[error("gradient length {got} does not match {expected} parameters")]
    ShapeMismatch { got: usize, expected: usize },
}

/// First/second moment accumulators plus hyperparameters. Defaults follow
/// the usual Adam settings: `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> AdamState {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected Adam update. A non-finite gradient leaves both
    /// the parameters and the optimizer state untouched.
    pub fn apply(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), AdamError> {
        if grads.len() != params.len() || params.len() != self.m.len() {
            return Err(AdamError::ShapeMismatch {
                got: grads.len(),
                expected: self.m.len(),
            });
        }
        if let Some(bad) = grads.iter().position(|g| !g.is_finite()) {
            return Err(AdamError::NonFiniteGradient(bad));
        }
        self.step += 1;
        let t = self.step as i32;
        let corr1 = 1.0 - self.beta1.powi(t);
        let corr2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / corr1;
            let v_hat = self.v[i] / corr2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}
