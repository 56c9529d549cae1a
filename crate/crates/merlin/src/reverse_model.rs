//! Model-based backward data generation: a reverse dynamics model that
//! predicts the previous state from `(next state, action)`, and a CVAE
//! reverse policy that proposes candidate actions for backward rollouts.
//!
//! Rollouts start at goal states (sampled dataset final states) and walk
//! backward: draw a latent from the standard Gaussian, decode a candidate
//! action conditioned on the next state, and let the reverse dynamics
//! produce the previous state. Emitted trajectories are stored forward with
//! the start state as both final state and desired goal, ready for the same
//! relabeling and cloning pipeline as real data.

use crate::dataset::{DataSource, Dataset, Trajectory};
use crate::env::{phi, EnvSpec, POINT_DIM};
use crate::nn::adam::{AdamError, AdamState};
use crate::nn::mat::Mat;
use crate::nn::mlp::{ForwardCache, Mlp, Scratch};
use crate::rng::{derive_seed, Rng};
use rayon::prelude::*;
use thiserror::Error;

/// Encoder log-std clamp range.
pub const LOGSTD_CLAMP: (f64, f64) = (-4.0, 15.0);

#[derive(Debug, Error)]
pub enum ReverseModelError {
    #[error("dataset has no transitions")]
    NoTransitions,
    #[error("loss diverged (non-finite) at epoch {epoch}")]
    Diverged { epoch: u32 },
    #[error(transparent)]
    Adam(#[from] AdamError),
}

/// Hyperparameters for both models and the rollout generation.
#[derive(Debug, Clone, PartialEq)]
pub struct ReverseModelParams {
    pub epochs: u32,
    pub lr: f64,
    pub batch_size: usize,
    pub n_rollouts: usize,
    pub rollout_steps: u32,
}

impl Default for ReverseModelParams {
    fn default() -> Self {
        ReverseModelParams {
            epochs: 100,
            lr: 3e-4,
            batch_size: 256,
            n_rollouts: 2000,
            rollout_steps: 50,
        }
    }
}

/// Deterministic reverse dynamics `f(s', a) -> s`.
#[derive(Debug, Clone)]
pub struct ReverseDynamics {
    pub net: Mlp,
}

impl ReverseDynamics {
    fn dims() -> Vec<usize> {
        vec![2 * POINT_DIM, 256, 256, 256, POINT_DIM]
    }

    pub fn predict_prev(&self, s_next: [f64; 2], action: [f64; 2]) -> [f64; 2] {
        let y = self
            .net
            .forward_one(&[s_next[0], s_next[1], action[0], action[1]]);
        [y[0], y[1]]
    }
}

/// CVAE reverse policy: encoder `(s', a) -> (mu_z, log sigma_z)` and decoder
/// `(s', z) -> a` with tanh-scaled output. Latent dim is twice the action
/// dim; the encoder log-std is clamped to [`LOGSTD_CLAMP`].
#[derive(Debug, Clone)]
pub struct ReverseCvae {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub action_scale: f64,
}

/// Latent dimensionality (2 x action dim).
pub const LATENT_DIM: usize = 2 * POINT_DIM;

impl ReverseCvae {
    fn encoder_dims() -> Vec<usize> {
        vec![2 * POINT_DIM, 256, 256, 2 * LATENT_DIM]
    }

    fn decoder_dims() -> Vec<usize> {
        vec![POINT_DIM + LATENT_DIM, 256, 256, POINT_DIM]
    }

    /// Encodes a transition into the clamped latent Gaussian parameters.
    pub fn encode(&self, s_next: [f64; 2], action: [f64; 2]) -> ([f64; LATENT_DIM], [f64; LATENT_DIM]) {
        let y = self
            .encoder
            .forward_one(&[s_next[0], s_next[1], action[0], action[1]]);
        let mut mu = [0.0; LATENT_DIM];
        let mut logstd = [0.0; LATENT_DIM];
        for i in 0..LATENT_DIM {
            mu[i] = y[i];
            logstd[i] = y[LATENT_DIM + i].clamp(LOGSTD_CLAMP.0, LOGSTD_CLAMP.1);
        }
        (mu, logstd)
    }

    /// Decodes a latent into an action within the action bounds.
    pub fn decode(&self, s_next: [f64; 2], z: &[f64]) -> [f64; 2] {
        let mut input = vec![s_next[0], s_next[1]];
        input.extend_from_slice(z);
        let y = self.decoder.forward_one(&input);
        [
            self.action_scale * y[0].tanh(),
            self.action_scale * y[1].tanh(),
        ]
    }
}

/// Flat `(s, a, s')` arrays extracted from a dataset.
#[derive(Debug, Clone)]
pub struct Transitions {
    pub s: Vec<[f64; 2]>,
    pub a: Vec<[f64; 2]>,
    pub s_next: Vec<[f64; 2]>,
}

impl Transitions {
    pub fn from_dataset(data: &Dataset) -> Result<Transitions, ReverseModelError> {
        let mut out = Transitions {
            s: Vec::new(),
            a: Vec::new(),
            s_next: Vec::new(),
        };
        for traj in &data.trajectories {
            for i in 0..traj.len() {
                out.s.push(traj.state_f64(i));
                out.a.push(traj.action_f64(i));
                out.s_next.push(traj.state_f64(i + 1));
            }
        }
        if out.s.is_empty() {
            return Err(ReverseModelError::NoTransitions);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Reverse dynamics training
// ---------------------------------------------------------------------------

/// Mean squared one-step error `||s - f(s', a)||^2` over a batch given as
/// `[s' || a]` inputs and `s` targets.
pub fn dynamics_loss(net: &Mlp, inputs: &Mat, targets: &Mat) -> f64 {
    let mut cache = ForwardCache::default();
    net.forward_batch(inputs, &mut cache);
    let y = cache.output();
    let mut acc = 0.0;
    for r in 0..y.rows {
        for (p, t) in y.row(r).iter().zip(targets.row(r)) {
            acc += (p - t) * (p - t);
        }
    }
    acc / y.rows as f64
}

/// Loss plus flat parameter gradients.
pub fn dynamics_loss_grad(net: &Mlp, inputs: &Mat, targets: &Mat) -> (f64, Vec<f64>) {
    let mut cache = ForwardCache::default();
    net.forward_batch(inputs, &mut cache);
    let y = cache.output();
    let b = y.rows;
    let mut dy = Mat::zeros(b, y.cols);
    let mut loss = 0.0;
    for r in 0..b {
        for c in 0..y.cols {
            let diff = y.row(r)[c] - targets.row(r)[c];
            loss += diff * diff;
            dy.row_mut(r)[c] = 2.0 * diff / b as f64;
        }
    }
    let mut grads = vec![0.0; net.params.len()];
    let mut scratch = Scratch::default();
    net.backward_batch(&cache, &dy, &mut grads, &mut scratch);
    (loss / b as f64, grads)
}

/// Held-out evaluation: mean `||s - f(s', a)||^2` over all transitions of a
/// dataset.
pub fn dynamics_mse(dynamics: &ReverseDynamics, data: &Dataset) -> f64 {
    let tr = match Transitions::from_dataset(data) {
        Ok(tr) => tr,
        Err(_) => return 0.0,
    };
    let (inputs, targets) = assemble_dynamics_batch(&tr, &(0..tr.len()).collect::<Vec<_>>());
    dynamics_loss(&dynamics.net, &inputs, &targets)
}

fn assemble_dynamics_batch(tr: &Transitions, idx: &[usize]) -> (Mat, Mat) {
    let mut inputs = Mat::zeros(idx.len(), 2 * POINT_DIM);
    let mut targets = Mat::zeros(idx.len(), POINT_DIM);
    for (r, &i) in idx.iter().enumerate() {
        let row = inputs.row_mut(r);
        row[0] = tr.s_next[i][0];
        row[1] = tr.s_next[i][1];
        row[2] = tr.a[i][0];
        row[3] = tr.a[i][1];
        let t = targets.row_mut(r);
        t[0] = tr.s[i][0];
        t[1] = tr.s[i][1];
    }
    (inputs, targets)
}

/// Trains the reverse dynamics model by minimizing the mean squared
/// one-step error over all transitions. Returns the model and the mean
/// loss per epoch.
pub fn train_dynamics(
    data: &Dataset,
    params: &ReverseModelParams,
    seed: u64,
) -> Result<ReverseDynamics, ReverseModelError> {
    let tr = Transitions::from_dataset(data)?;
    let mut rng = Rng::seed_from_u64(derive_seed(seed, "dynamics-init", 0));
    let mut net = Mlp::kaiming(&ReverseDynamics::dims(), 0.01, &mut rng);
    let mut adam = AdamState::new(net.params.len(), params.lr);
    let mut order: Vec<usize> = (0..tr.len()).collect();
    let mut shuffle_rng = Rng::seed_from_u64(derive_seed(seed, "dynamics-epochs", 0));
    for epoch in 0..params.epochs {
        shuffle_rng.shuffle(&mut order);
        for chunk in order.chunks(params.batch_size) {
            let (inputs, targets) = assemble_dynamics_batch(&tr, chunk);
            let (loss, grads) = dynamics_loss_grad(&net, &inputs, &targets);
            if !loss.is_finite() {
                return Err(ReverseModelError::Diverged { epoch });
            }
            adam.apply(&mut net.params, &grads)?;
        }
    }
    Ok(ReverseDynamics { net })
}

// ---------------------------------------------------------------------------
// CVAE training
// ---------------------------------------------------------------------------

/// A CVAE training batch with frozen reparameterization noise.
#[derive(Debug, Clone)]
pub struct CvaeBatch {
    pub s_next: Mat,
    pub actions: Mat,
    pub eps: Mat,
}

impl CvaeBatch {
    fn from_transitions(tr: &Transitions, idx: &[usize], rng: &mut Rng) -> CvaeBatch {
        let mut s_next = Mat::zeros(idx.len(), POINT_DIM);
        let mut actions = Mat::zeros(idx.len(), POINT_DIM);
        let mut eps = Mat::zeros(idx.len(), LATENT_DIM);
        for (r, &i) in idx.iter().enumerate() {
            s_next.row_mut(r).copy_from_slice(&tr.s_next[i]);
            actions.row_mut(r).copy_from_slice(&tr.a[i]);
            for e in eps.row_mut(r) {
                *e = rng.normal();
            }
        }
        CvaeBatch {
            s_next,
            actions,
            eps,
        }
    }
}

/// Per-batch CVAE terms: mean reconstruction error and mean KL.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvaeTerms {
    pub recon: f64,
    pub kl: f64,
}

impl CvaeTerms {
    pub fn total(&self) -> f64 {
        self.recon + self.kl
    }
}

/// Evaluates the CVAE objective
/// `E[(a - D(s', z))^2 + KL(E(s', a) || N(0, I))]`
/// with `z = mu + sigma * eps`, returning both terms. The KL is the closed
/// form for diagonal Gaussians and is non-negative.
pub fn cvae_loss(cvae: &ReverseCvae, batch: &CvaeBatch) -> CvaeTerms {
    cvae_forward(cvae, batch).0
}

/// Loss terms plus flat gradients, laid out `[encoder || decoder]`.
pub fn cvae_loss_grad(cvae: &ReverseCvae, batch: &CvaeBatch) -> (CvaeTerms, Vec<f64>) {
    let b = batch.s_next.rows;
    let (terms, enc_cache, dec_cache, _dec_in, logstd_raw) = cvae_forward(cvae, batch);
    let inv_b = 1.0 / b as f64;

    // Reconstruction gradient through the tanh-scaled decoder output.
    let a_pre = dec_cache.output();
    let mut dy_dec = Mat::zeros(b, POINT_DIM);
    for r in 0..b {
        for c in 0..POINT_DIM {
            let t = a_pre.row(r)[c].tanh();
            let recon = cvae.action_scale * t;
            let d_recon = 2.0 * (recon - batch.actions.row(r)[c]) * inv_b;
            dy_dec.row_mut(r)[c] = d_recon * cvae.action_scale * (1.0 - t * t);
        }
    }
    let mut dec_grads = vec![0.0; cvae.decoder.params.len()];
    let mut scratch = Scratch::default();
    let mut d_dec_in = Mat::zeros(0, 0);
    cvae.decoder.backward_batch_full(
        &dec_cache,
        &dy_dec,
        &mut dec_grads,
        &mut scratch,
        Some(&mut d_dec_in),
    );

    // Latent gradients: reconstruction path through z plus the KL terms.
    let enc_out = enc_cache.output();
    let mut dy_enc = Mat::zeros(b, 2 * LATENT_DIM);
    for r in 0..b {
        for i in 0..LATENT_DIM {
            let dz = d_dec_in.row(r)[POINT_DIM + i];
            let mu = enc_out.row(r)[i];
            let logstd = logstd_raw.row(r)[i].clamp(LOGSTD_CLAMP.0, LOGSTD_CLAMP.1);
            let sigma = logstd.exp();
            let d_mu = dz + mu * inv_b;
            let mut d_logstd = dz * batch.eps.row(r)[i] * sigma + (sigma * sigma - 1.0) * inv_b;
            let raw = logstd_raw.row(r)[i];
            if raw <= LOGSTD_CLAMP.0 || raw >= LOGSTD_CLAMP.1 {
                d_logstd = 0.0; // clamped: no gradient flows
            }
            dy_enc.row_mut(r)[i] = d_mu;
            dy_enc.row_mut(r)[LATENT_DIM + i] = d_logstd;
        }
    }
    let mut enc_grads = vec![0.0; cvae.encoder.params.len()];
    cvae.encoder
        .backward_batch(&enc_cache, &dy_enc, &mut enc_grads, &mut scratch);

    let mut grads = enc_grads;
    grads.extend_from_slice(&dec_grads);
    (terms, grads)
}

/// Shared forward pass. Returns the loss terms plus everything backward
/// needs: encoder cache, decoder cache, decoder input, and the raw
/// (pre-clamp) log-std outputs.
#[allow(clippy::type_complexity)]
fn cvae_forward(
    cvae: &ReverseCvae,
    batch: &CvaeBatch,
) -> (CvaeTerms, ForwardCache, ForwardCache, Mat, Mat) {
    let b = batch.s_next.rows;
    let mut enc_in = Mat::zeros(b, 2 * POINT_DIM);
    for r in 0..b {
        enc_in.row_mut(r)[..POINT_DIM].copy_from_slice(batch.s_next.row(r));
        enc_in.row_mut(r)[POINT_DIM..].copy_from_slice(batch.actions.row(r));
    }
    let mut enc_cache = ForwardCache::default();
    cvae.encoder.forward_batch(&enc_in, &mut enc_cache);
    let enc_out = enc_cache.output().clone();

    let mut logstd_raw = Mat::zeros(b, LATENT_DIM);
    let mut dec_in = Mat::zeros(b, POINT_DIM + LATENT_DIM);
    let mut kl = 0.0;
    for r in 0..b {
        dec_in.row_mut(r)[..POINT_DIM].copy_from_slice(batch.s_next.row(r));
        for i in 0..LATENT_DIM {
            let mu = enc_out.row(r)[i];
            let raw = enc_out.row(r)[LATENT_DIM + i];
            logstd_raw.row_mut(r)[i] = raw;
            let logstd = raw.clamp(LOGSTD_CLAMP.0, LOGSTD_CLAMP.1);
            let sigma = logstd.exp();
            let z = mu + sigma * batch.eps.row(r)[i];
            dec_in.row_mut(r)[POINT_DIM + i] = z;
            kl += 0.5 * (mu * mu + sigma * sigma - 1.0 - 2.0 * logstd);
        }
    }
    let mut dec_cache = ForwardCache::default();
    cvae.decoder.forward_batch(&dec_in, &mut dec_cache);
    let a_pre = dec_cache.output();
    let mut recon = 0.0;
    for r in 0..b {
        for c in 0..POINT_DIM {
            let a_hat = cvae.action_scale * a_pre.row(r)[c].tanh();
            let diff = a_hat - batch.actions.row(r)[c];
            recon += diff * diff;
        }
    }
    let terms = CvaeTerms {
        recon: recon / b as f64,
        kl: kl / b as f64,
    };
    (terms, enc_cache, dec_cache, dec_in, logstd_raw)
}

/// Per-run CVAE training statistics.
#[derive(Debug, Clone)]
pub struct CvaeTrainStats {
    pub epoch_losses: Vec<f64>,
    /// Smallest per-batch KL seen during training (non-negative by
    /// construction of the closed form).
    pub min_kl: f64,
}

/// Trains the CVAE reverse policy, returning the model and training stats.
pub fn train_cvae(
    data: &Dataset,
    params: &ReverseModelParams,
    seed: u64,
) -> Result<ReverseCvae, ReverseModelError> {
    Ok(train_cvae_with_stats(data, params, seed)?.0)
}

pub fn train_cvae_with_stats(
    data: &Dataset,
    params: &ReverseModelParams,
    seed: u64,
) -> Result<(ReverseCvae, CvaeTrainStats), ReverseModelError> {
    let tr = Transitions::from_dataset(data)?;
    let mut rng = Rng::seed_from_u64(derive_seed(seed, "cvae-init", 0));
    let encoder = Mlp::kaiming(&ReverseCvae::encoder_dims(), 0.01, &mut rng);
    let decoder = Mlp::kaiming(&ReverseCvae::decoder_dims(), 0.01, &mut rng);
    let mut cvae = ReverseCvae {
        encoder,
        decoder,
        action_scale: 1.0,
    };
    let n_enc = cvae.encoder.params.len();
    let mut adam_enc = AdamState::new(n_enc, params.lr);
    let mut adam_dec = AdamState::new(cvae.decoder.params.len(), params.lr);
    let mut order: Vec<usize> = (0..tr.len()).collect();
    let mut epoch_rng = Rng::seed_from_u64(derive_seed(seed, "cvae-epochs", 0));
    let mut stats = CvaeTrainStats {
        epoch_losses: Vec::with_capacity(params.epochs as usize),
        min_kl: f64::INFINITY,
    };
    for epoch in 0..params.epochs {
        epoch_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(params.batch_size) {
            let batch = CvaeBatch::from_transitions(&tr, chunk, &mut epoch_rng);
            let (terms, grads) = cvae_loss_grad(&cvae, &batch);
            let loss = terms.total();
            if !loss.is_finite() {
                return Err(ReverseModelError::Diverged { epoch });
            }
            stats.min_kl = stats.min_kl.min(terms.kl);
            adam_enc.apply(&mut cvae.encoder.params, &grads[..n_enc])?;
            adam_dec.apply(&mut cvae.decoder.params, &grads[n_enc..])?;
            epoch_loss += loss;
            n_batches += 1;
        }
        stats.epoch_losses.push(epoch_loss / n_batches.max(1) as f64);
    }
    Ok((cvae, stats))
}

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

/// Samples `n` final states (with replacement) from the dataset's
/// trajectories.
pub fn sample_final_states(data: &Dataset, n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let t = rng.below(data.trajectories.len() as u64) as usize;
            data.trajectories[t].final_state_f64()
        })
        .collect()
}

/// Generates backward rollouts from the given start states.
///
/// Each rollout draws `steps` latent vectors, decodes candidate actions,
/// and chains the reverse dynamics; a state escaping the arena by more
/// than twice its diameter truncates that rollout (model error guard).
/// Trajectories are emitted forward-ordered with `desired_goal` set to the
/// start state, `source = model_rollout`.
pub fn reverse_rollout(
    dynamics: &ReverseDynamics,
    cvae: &ReverseCvae,
    spec: &EnvSpec,
    start_states: &[[f64; 2]],
    steps: u32,
    seed: u64,
) -> Dataset {
    let diameter = 2.0 * spec.bound * 2.0f64.sqrt();
    let escape = spec.bound + 2.0 * diameter;
    let trajectories: Vec<Trajectory> = start_states
        .par_iter()
        .enumerate()
        .map(|(i, &start)| {
            let mut rng = Rng::seed_from_u64(derive_seed(seed, "rollout", i as u64));
            let store = |p: [f64; 2]| [p[0] as f32, p[1] as f32];
            let start32 = store(start);
            let mut rev_states = vec![start32];
            let mut rev_actions: Vec<[f32; 2]> = Vec::new();
            let mut current = [start32[0] as f64, start32[1] as f64];
            for _ in 0..steps {
                let mut z = [0.0; LATENT_DIM];
                for v in &mut z {
                    *v = rng.normal();
                }
                let action = cvae.decode(current, &z);
                let action32 = store(action);
                let prev = dynamics.predict_prev(
                    current,
                    [action32[0] as f64, action32[1] as f64],
                );
                let prev32 = store(prev);
                if prev32[0].abs() as f64 > escape || prev32[1].abs() as f64 > escape {
                    break; // diverging rollout
                }
                rev_actions.push(action32);
                rev_states.push(prev32);
                current = [prev32[0] as f64, prev32[1] as f64];
            }
            let mut states = Vec::with_capacity(rev_states.len() * POINT_DIM);
            for s in rev_states.iter().rev() {
                states.extend_from_slice(s);
            }
            let mut actions = Vec::with_capacity(rev_actions.len() * POINT_DIM);
            for a in rev_actions.iter().rev() {
                actions.extend_from_slice(a);
            }
            Trajectory {
                states,
                actions,
                desired_goal: store(phi(start)).to_vec(),
            }
        })
        .collect();
    Dataset {
        spec: spec.clone(),
        source: DataSource::ModelRollout,
        seed,
        trajectories,
    }
}
