//! The horizon-conditioned diagonal-Gaussian goal policy and its
//! behavior-cloning objective, plus the GCSL baseline mode.
//!
//! The policy network maps `[state || goal || horizon-embedding]` to a mean
//! and a standard deviation per action dimension. The mean is squashed with
//! `tanh` and scaled to the action range; the standard deviation goes
//! through a softplus with a small floor. Training maximizes the
//! log-likelihood of dataset actions conditioned on hindsight-relabeled
//! goals and the time gap `h` to them — reversing, one step at a time, the
//! walks the dataset took away from those goals.
//!
//! GCSL mode isolates the two deltas: the variance is frozen at 1 (the std
//! head receives no gradient) and the horizon embedding is zeroed.

use crate::dataset::Dataset;
use crate::neighbors::BallTree;
use crate::nn::adam::{AdamError, AdamState};
use crate::nn::checkpoint::{self, CheckpointError};
use crate::nn::embed::EmbedTable;
use crate::nn::gauss::gaussian_nll_grad;
use crate::nn::mat::Mat;
use crate::nn::mlp::{ForwardCache, Mlp, Scratch};
use crate::relabel::{sample_batch_into, RelabelConfig, RelabelError, TrainTuple, TransitionIndex};
use crate::reverse_model::{
    reverse_rollout, sample_final_states, train_cvae, train_dynamics, ReverseModelError,
    ReverseModelParams,
};
use crate::rng::{derive_seed, Rng};
use crate::stitcher::{stitch, StitchConfig, StitchError};
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

/// Size of the sinusoidal horizon embedding fed to the policy.
pub const HORIZON_EMBED_DIM: usize = 32;
/// Hidden layer width.
pub const HIDDEN_DIM: usize = 256;
/// Number of hidden layers.
pub const HIDDEN_LAYERS: usize = 3;
/// Additive floor on the policy standard deviation.
pub const SIGMA_FLOOR: f64 = 1e-3;
/// Scale applied to the final layer at initialization.
pub const FINAL_INIT_SCALE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Relabel(#[from] RelabelError),
    #[error(transparent)]
    Stitch(#[from] StitchError),
    #[error(transparent)]
    Neighbors(#[from] crate::neighbors::NeighborsError),
    #[error(transparent)]
    ReverseModel(#[from] ReverseModelError),
    #[error(transparent)]
    Adam(#[from] AdamError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("loss diverged (non-finite) at update {update}")]
    Diverged { update: u64 },
    #[error("mode merlin_np requires stitch parameters")]
    MissingStitchParams,
    #[error("mode merlin_p requires reverse-model parameters")]
    MissingModelParams,
}

/// Which training pipeline produces the batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// Reverse play of the offline data as stored.
    Merlin,
    /// Nearest-neighbor trajectory stitching first, then reverse play.
    MerlinNp,
    /// Reverse-model rollouts mixed 50/50 with the offline data.
    MerlinP,
    /// Behavior cloning baseline: fixed unit variance, no horizon input.
    Gcsl,
}

impl TrainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::Merlin => "merlin",
            TrainMode::MerlinNp => "merlin_np",
            TrainMode::MerlinP => "merlin_p",
            TrainMode::Gcsl => "gcsl",
        }
    }

    pub fn parse(s: &str) -> Option<TrainMode> {
        Some(match s {
            "merlin" => TrainMode::Merlin,
            "merlin_np" => TrainMode::MerlinNp,
            "merlin_p" => TrainMode::MerlinP,
            "gcsl" => TrainMode::Gcsl,
            _ => return None,
        })
    }
}

/// Stitching hyperparameters carried inside a [`TrainConfig`]; the stitch
/// seed is derived from the training seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StitchParams {
    pub delta: f64,
    pub n_new: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub updates: u64,
    pub batch_size: usize,
    pub lr: f64,
    pub hindsight_ratio: f64,
    /// Horizon used at evaluation time (recorded here so one config file
    /// drives the whole pipeline).
    pub eval_horizon: u32,
    /// Record a log row every this many updates (0: only the final row).
    pub log_interval: u64,
    /// Write an intermediate checkpoint every this many updates (0: never).
    pub checkpoint_interval: u64,
    pub stitch: Option<StitchParams>,
    pub model: Option<ReverseModelParams>,
}

impl TrainConfig {
    pub fn new(mode: TrainMode, updates: u64) -> TrainConfig {
        TrainConfig {
            mode,
            updates,
            batch_size: 512,
            lr: 5e-4,
            hindsight_ratio: 1.0,
            eval_horizon: 1,
            log_interval: 1000,
            checkpoint_interval: 0,
            stitch: None,
            model: None,
        }
    }
}

/// How [`GaussianPolicy::act`] turns the action distribution into an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    /// The distribution mean (deterministic; the evaluation default).
    Mean,
    /// A sample `mu + sigma * z`, clipped to the action range.
    Sample,
}

/// One training-log entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub update: u64,
    pub loss: f64,
    pub wall_time_s: f64,
}

/// Horizon-conditioned diagonal-Gaussian policy.
#[derive(Debug, Clone)]
pub struct GaussianPolicy {
    pub net: Mlp,
    pub action_scale: f64,
    /// GCSL baseline: zeroed horizon embedding and unit variance.
    pub gcsl: bool,
    embed: EmbedTable,
}

impl GaussianPolicy {
    pub fn input_dim() -> usize {
        4 + HORIZON_EMBED_DIM
    }

    /// Layer widths of the policy network.
    pub fn net_dims() -> Vec<usize> {
        let mut dims = vec![Self::input_dim()];
        dims.extend(std::iter::repeat_n(HIDDEN_DIM, HIDDEN_LAYERS));
        dims.push(4); // mean and std pre-activations, 2 each
        dims
    }

    /// Freshly initialized policy for an environment with unit action range
    /// and horizon periods up to `max_steps`.
    pub fn init(max_steps: u32, gcsl: bool, rng: &mut Rng) -> GaussianPolicy {
        let net = Mlp::kaiming(&Self::net_dims(), FINAL_INIT_SCALE, rng);
        GaussianPolicy::from_net(net, max_steps, gcsl)
    }

    pub fn from_net(net: Mlp, max_steps: u32, gcsl: bool) -> GaussianPolicy {
        assert_eq!(net.dims, Self::net_dims(), "unexpected policy network shape");
        GaussianPolicy {
            net,
            action_scale: 1.0,
            gcsl,
            embed: EmbedTable::new(max_steps, HORIZON_EMBED_DIM, max_steps as f64),
        }
    }

    /// Serializes the network (optionally with optimizer state) in the
    /// `MRLW` checkpoint format.
    pub fn to_checkpoint_bytes(&self, adam: Option<&AdamState>) -> Vec<u8> {
        checkpoint::to_bytes(&self.net, adam)
    }

    /// Restores a policy from checkpoint bytes. `max_steps` and `gcsl` are
    /// run-configuration facts, not stored in the checkpoint.
    pub fn from_checkpoint_bytes(
        bytes: &[u8],
        max_steps: u32,
        gcsl: bool,
    ) -> Result<GaussianPolicy, CheckpointError> {
        let (net, _) = checkpoint::from_bytes(bytes)?;
        if net.dims != Self::net_dims() {
            return Err(CheckpointError::WrongShape {
                got: net.dims,
                expected: Self::net_dims(),
            });
        }
        Ok(GaussianPolicy::from_net(net, max_steps, gcsl))
    }

    fn fill_input_row(&self, row: &mut [f64], s: &[f64; 2], g: &[f64; 2], h: u32) {
        row[0] = s[0];
        row[1] = s[1];
        row[2] = g[0];
        row[3] = g[1];
        if self.gcsl {
            row[4..].fill(0.0);
        } else {
            let mut fallback = Vec::new();
            row[4..].copy_from_slice(self.embed.get(h, &mut fallback));
        }
    }

    /// Mean and standard deviation of the action distribution at
    /// `(s, g, h)`. GCSL policies report unit standard deviation.
    pub fn mean_std(&self, s: [f64; 2], g: [f64; 2], h: u32) -> ([f64; 2], [f64; 2]) {
        assert!(h >= 1, "horizon must be at least 1");
        let mut x = vec![0.0; Self::input_dim()];
        self.fill_input_row(&mut x, &s, &g, h);
        let y = self.net.forward_one(&x);
        let mu = [
            self.action_scale * y[0].tanh(),
            self.action_scale * y[1].tanh(),
        ];
        let sigma = if self.gcsl {
            [1.0, 1.0]
        } else {
            [softplus(y[2]) + SIGMA_FLOOR, softplus(y[3]) + SIGMA_FLOOR]
        };
        (mu, sigma)
    }

    /// Produces an action: the mean, or a clipped Gaussian sample.
    pub fn act(&self, s: [f64; 2], g: [f64; 2], h: u32, mode: ActMode, rng: &mut Rng) -> [f64; 2] {
        let (mu, sigma) = self.mean_std(s, g, h);
        match mode {
            ActMode::Mean => mu,
            ActMode::Sample => {
                let a = [
                    mu[0] + sigma[0] * rng.normal(),
                    mu[1] + sigma[1] * rng.normal(),
                ];
                [
                    a[0].clamp(-self.action_scale, self.action_scale),
                    a[1].clamp(-self.action_scale, self.action_scale),
                ]
            }
        }
    }

    /// Behavior-cloning loss: mean Gaussian NLL of the batch actions under
    /// the policy distribution. Gradients are left in `ws.grads`.
    pub fn bc_loss(&self, batch: &[TrainTuple], ws: &mut PolicyWorkspace) -> f64 {
        self.loss_and_grad(&[batch], false, ws)
    }

    /// GCSL baseline loss: unit variance (no gradient reaches the std head)
    /// and zeroed horizon embedding.
    pub fn gcsl_loss(&self, batch: &[TrainTuple], ws: &mut PolicyWorkspace) -> f64 {
        self.loss_and_grad(&[batch], true, ws)
    }

    /// Builds the network input batch `[s || g || embed(h)]` for the given
    /// tuples (embedding zeroed in GCSL mode).
    pub fn assemble_inputs(
        &self,
        parts: &[&[TrainTuple]],
        gcsl: bool,
        x: &mut Mat,
        fallback: &mut Vec<f64>,
    ) {
        let total: usize = parts.iter().map(|p| p.len()).sum();
        x.reshape(total, Self::input_dim());
        let mut r = 0;
        for part in parts {
            for tuple in *part {
                let row = x.row_mut(r);
                row[0] = tuple.state[0];
                row[1] = tuple.state[1];
                row[2] = tuple.goal[0];
                row[3] = tuple.goal[1];
                if gcsl {
                    row[4..].fill(0.0);
                } else {
                    row[4..].copy_from_slice(self.embed.get(tuple.horizon, fallback));
                }
                r += 1;
            }
        }
    }

    /// Shared loss path over one or more batch slices (multiple slices are
    /// used by the merlin_p real/synthetic mix). `gcsl` freezes the
    /// variance at 1 and zeroes the horizon input.
    pub fn loss_and_grad(
        &self,
        parts: &[&[TrainTuple]],
        gcsl: bool,
        ws: &mut PolicyWorkspace,
    ) -> f64 {
        let total: usize = parts.iter().map(|p| p.len()).sum();
        assert!(total > 0, "empty batch");
        self.assemble_inputs(parts, gcsl, &mut ws.x, &mut ws.fallback);
        self.net.forward_batch(&ws.x, &mut ws.cache);
        let y = ws.cache.output();
        ws.dy.reshape(total, 4);
        let inv_b = 1.0 / total as f64;
        let mut loss = 0.0;
        let mut r = 0;
        let mut mu = [0.0; 2];
        let (mut dmu, mut dsigma) = ([0.0; 2], [0.0; 2]);
        for part in parts {
            for tuple in *part {
                let out = y.row(r);
                let dy = ws.dy.row_mut(r);
                let tanh = [out[0].tanh(), out[1].tanh()];
                mu[0] = self.action_scale * tanh[0];
                mu[1] = self.action_scale * tanh[1];
                let sigma = if gcsl {
                    [1.0, 1.0]
                } else {
                    [softplus(out[2]) + SIGMA_FLOOR, softplus(out[3]) + SIGMA_FLOOR]
                };
                let nll = gaussian_nll_grad(&tuple.action, &mu, &sigma, &mut dmu, &mut dsigma);
                loss += nll * inv_b;
                for d in 0..2 {
                    dy[d] = dmu[d] * self.action_scale * (1.0 - tanh[d] * tanh[d]) * inv_b;
                    dy[2 + d] = if gcsl {
                        0.0
                    } else {
                        dsigma[d] * sigmoid(out[2 + d]) * inv_b
                    };
                }
                r += 1;
            }
        }
        ws.grads.resize(self.net.params.len(), 0.0);
        self.net
            .backward_batch(&ws.cache, &ws.dy, &mut ws.grads, &mut ws.scratch);
        loss
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    // log(1 + e^x), stable for large |x|.
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Reusable buffers for the batched loss path.
#[derive(Debug, Default, Clone)]
pub struct PolicyWorkspace {
    pub x: Mat,
    pub dy: Mat,
    pub cache: ForwardCache,
    pub scratch: Scratch,
    pub grads: Vec<f64>,
    fallback: Vec<f64>,
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: GaussianPolicy,
    pub adam: AdamState,
    pub log: Vec<LogRow>,
    /// Trajectory count of the dataset actually sampled from (after
    /// stitching or rollout augmentation).
    pub train_trajectories: usize,
}

/// Runs the full training pipeline for the configured mode.
///
/// Deterministic given `(data, cfg, seed)`: the policy initialization,
/// batch sampling, stitching, and model rollouts all derive their streams
/// from `seed`. Wall-clock time appears only in the log.
pub fn train(
    data: &Dataset,
    cfg: &TrainConfig,
    seed: u64,
    checkpoint_dir: Option<&Path>,
) -> Result<TrainOutcome, TrainError> {
    let start = Instant::now();
    let mut init_rng = Rng::seed_from_u64(derive_seed(seed, "policy-init", 0));
    let gcsl = cfg.mode == TrainMode::Gcsl;
    let mut policy = GaussianPolicy::init(data.spec.max_steps, gcsl, &mut init_rng);
    let mut adam = AdamState::new(policy.net.params.len(), cfg.lr);

    // Mode-specific data augmentation.
    let mut synthetic: Option<Dataset> = None;
    let augmented: Dataset;
    let train_data: &Dataset = match cfg.mode {
        TrainMode::Merlin | TrainMode::Gcsl => data,
        TrainMode::MerlinNp => {
            let params = cfg.stitch.ok_or(TrainError::MissingStitchParams)?;
            let tree = BallTree::build(data, 32)?;
            let stitch_cfg = StitchConfig {
                delta: params.delta,
                n_new: params.n_new,
                seed: derive_seed(seed, "stitch", 0),
            };
            augmented = stitch(data, &tree, &stitch_cfg)?.dataset;
            &augmented
        }
        TrainMode::MerlinP => {
            let params = cfg.model.clone().ok_or(TrainError::MissingModelParams)?;
            let dynamics = train_dynamics(data, &params, derive_seed(seed, "reverse-dynamics", 0))?;
            let cvae = train_cvae(data, &params, derive_seed(seed, "reverse-cvae", 0))?;
            let starts = sample_final_states(
                data,
                params.n_rollouts,
                derive_seed(seed, "rollout-starts", 0),
            );
            synthetic = Some(reverse_rollout(
                &dynamics,
                &cvae,
                &data.spec,
                &starts,
                params.rollout_steps,
                derive_seed(seed, "rollouts", 0),
            ));
            data
        }
    };

    let index = TransitionIndex::build(train_data)?;
    let synth_index = synthetic
        .as_ref()
        .map(TransitionIndex::build)
        .transpose()?;
    let relabel_cfg = RelabelConfig {
        hindsight_ratio: cfg.hindsight_ratio,
        seed, // informational; the stream below is what is drawn from
    };
    let mut rng = Rng::seed_from_u64(derive_seed(seed, "train-batches", 0));
    let mut ws = PolicyWorkspace::default();
    let mut batch = Vec::with_capacity(cfg.batch_size);
    let mut synth_batch = Vec::with_capacity(cfg.batch_size);
    let mut log = Vec::new();
    let n_train_traj = train_data.trajectories.len()
        + synthetic.as_ref().map_or(0, |s| s.trajectories.len());

    for update in 0..cfg.updates {
        let loss = match (&synthetic, &synth_index) {
            (Some(synth), Some(sidx)) => {
                // merlin_p: half real, half synthetic per batch.
                let real_n = cfg.batch_size / 2;
                let synth_n = cfg.batch_size - real_n;
                sample_batch_into(train_data, &index, real_n, &relabel_cfg, &mut rng, &mut batch, None);
                sample_batch_into(synth, sidx, synth_n, &relabel_cfg, &mut rng, &mut synth_batch, None);
                policy.loss_and_grad(&[&batch, &synth_batch], gcsl, &mut ws)
            }
            _ => {
                sample_batch_into(
                    train_data,
                    &index,
                    cfg.batch_size,
                    &relabel_cfg,
                    &mut rng,
                    &mut batch,
                    None,
                );
                policy.loss_and_grad(&[&batch], gcsl, &mut ws)
            }
        };
        if !loss.is_finite() {
            return Err(TrainError::Diverged { update });
        }
        adam.apply(&mut policy.net.params, &ws.grads)?;

        let done = update + 1 == cfg.updates;
        if done || (cfg.log_interval > 0 && (update + 1).is_multiple_of(cfg.log_interval)) {
            log.push(LogRow {
                update: update + 1,
                loss,
                wall_time_s: start.elapsed().as_secs_f64(),
            });
        }
        if let Some(dir) = checkpoint_dir {
            if cfg.checkpoint_interval > 0 && (update + 1).is_multiple_of(cfg.checkpoint_interval)
            {
                let path = dir.join(format!("ckpt_{:08}.mrlw", update + 1));
                checkpoint::save(&policy.net, Some(&adam), &path)?;
            }
        }
    }
    Ok(TrainOutcome {
        policy,
        adam,
        log,
        train_trajectories: n_train_traj,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_random;
    use crate::env::EnvSpec;
    use crate::nn::gradcheck::{grad_check, FD_STEP};
    use crate::relabel::sample_batch;

    fn tiny_batch(seed: u64, n: usize) -> Vec<TrainTuple> {
        let data = generate_random(&EnvSpec::point_reach(), 4, seed);
        let cfg = RelabelConfig {
            hindsight_ratio: 0.5,
            seed,
        };
        let mut rng = Rng::seed_from_u64(seed);
        sample_batch(&data, n, &cfg, &mut rng).unwrap()
    }

    #[test]
    fn fresh_policy_mean_is_near_zero_and_bounded() {
        let mut rng = Rng::seed_from_u64(1);
        let policy = GaussianPolicy::init(50, false, &mut rng);
        let mut probe = Rng::seed_from_u64(2);
        for _ in 0..200 {
            let s = [probe.range(-5.0, 5.0), probe.range(-5.0, 5.0)];
            let g = [probe.range(-5.0, 5.0), probe.range(-5.0, 5.0)];
            let h = 1 + probe.below(50) as u32;
            let (mu, sigma) = policy.mean_std(s, g, h);
            assert!(mu[0].abs() < 0.05 && mu[1].abs() < 0.05, "{mu:?}");
            assert!(mu[0].abs() <= 1.0 && mu[1].abs() <= 1.0);
            assert!(sigma[0] > 0.0 && sigma[1] > 0.0);
        }
    }

    #[test]
    fn sampled_actions_respect_bounds() {
        let mut rng = Rng::seed_from_u64(3);
        let policy = GaussianPolicy::init(50, false, &mut rng);
        for _ in 0..500 {
            let a = policy.act([0.0, 0.0], [3.0, 3.0], 5, ActMode::Sample, &mut rng);
            assert!(a[0].abs() <= 1.0 && a[1].abs() <= 1.0);
        }
    }

    #[test]
    fn bc_loss_at_mean_with_unit_sigma_is_log_2pi() {
        // Force mu = action and sigma = 1 by constructing the batch from the
        // policy's own outputs: a zero-weight network emits mu = 0; choose
        // actions 0 and check against the closed form with the actual sigma.
        let net = Mlp::zeros(&GaussianPolicy::net_dims());
        let policy = GaussianPolicy::from_net(net, 50, false);
        let tuples = vec![
            TrainTuple {
                state: [0.3, -0.4],
                action: [0.0, 0.0],
                goal: [1.0, 1.0],
                horizon: 3,
            };
            4
        ];
        let mut ws = PolicyWorkspace::default();
        let loss = policy.bc_loss(&tuples, &mut ws);
        // Zero net: mu = 0 = a, sigma = softplus(0) + floor.
        let sigma = softplus(0.0) + SIGMA_FLOOR;
        let expected = 2.0 * (sigma.ln()) + (2.0 * std::f64::consts::PI).ln();
        assert!((loss - expected).abs() < 1e-12, "{loss} vs {expected}");
    }

    #[test]
    fn gcsl_loss_with_zero_net_is_exact_closed_form() {
        // GCSL freezes sigma at exactly 1, so with mu = 0 the loss is
        // sum(a^2)/2 + log 2pi.
        let net = Mlp::zeros(&GaussianPolicy::net_dims());
        let policy = GaussianPolicy::from_net(net, 50, true);
        let tuples = vec![TrainTuple {
            state: [0.0, 0.0],
            action: [0.6, -0.8],
            goal: [0.0, 0.0],
            horizon: 1,
        }];
        let mut ws = PolicyWorkspace::default();
        let loss = policy.gcsl_loss(&tuples, &mut ws);
        let expected = (0.36 + 0.64) / 2.0 + (2.0 * std::f64::consts::PI).ln();
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn gcsl_std_head_receives_no_gradient() {
        let mut rng = Rng::seed_from_u64(5);
        let policy = GaussianPolicy::init(50, true, &mut rng);
        let batch = tiny_batch(7, 8);
        let mut ws = PolicyWorkspace::default();
        policy.gcsl_loss(&batch, &mut ws);
        // Gradient of the final layer's std columns must vanish. The final
        // layer weights are the last 256*4 + 4 parameters.
        let n = policy.net.params.len();
        let w_off = n - (HIDDEN_DIM * 4 + 4);
        for row in 0..HIDDEN_DIM {
            assert_eq!(ws.grads[w_off + row * 4 + 2], 0.0);
            assert_eq!(ws.grads[w_off + row * 4 + 3], 0.0);
        }
        assert_eq!(ws.grads[n - 2], 0.0);
        assert_eq!(ws.grads[n - 1], 0.0);
    }

    #[test]
    fn bc_gradients_match_finite_differences() {
        let mut rng = Rng::seed_from_u64(11);
        let mut policy = GaussianPolicy::init(50, false, &mut rng);
        let batch = tiny_batch(13, 4);
        let mut ws = PolicyWorkspace::default();
        // Move pre-activations away from ReLU kinks at this input batch.
        let mut x = Mat::zeros(0, 0);
        let mut fb = Vec::new();
        policy.assemble_inputs(&[&batch], false, &mut x, &mut fb);
        policy.net.nudge_relu_kinks(&x, 1e-3);
        let analytic_loss = policy.bc_loss(&batch, &mut ws);
        let analytic = ws.grads.clone();
        let params = policy.net.params.clone();
        let probe_policy = policy.clone();
        let loss_at = move |p: &[f64]| {
            let mut pol = probe_policy.clone();
            pol.net.params.copy_from_slice(p);
            let mut w = PolicyWorkspace::default();
            pol.bc_loss(&batch, &mut w)
        };
        assert!(analytic_loss.is_finite());
        let mut probe_rng = Rng::seed_from_u64(17);
        let err = grad_check(loss_at, &params, &analytic, 200, FD_STEP, &mut probe_rng);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn zero_updates_returns_initialized_policy() {
        let data = generate_random(&EnvSpec::point_reach(), 4, 1);
        let cfg = TrainConfig {
            log_interval: 0,
            ..TrainConfig::new(TrainMode::Merlin, 0)
        };
        let out = train(&data, &cfg, 9, None).unwrap();
        let mut rng = Rng::seed_from_u64(derive_seed(9, "policy-init", 0));
        let reference = GaussianPolicy::init(50, false, &mut rng);
        assert_eq!(out.policy.net.params, reference.net.params);
        assert!(out.log.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let data = generate_random(&EnvSpec::point_reach(), 20, 3);
        let mut cfg = TrainConfig::new(TrainMode::Merlin, 300);
        cfg.batch_size = 64;
        cfg.log_interval = 100;
        let a = train(&data, &cfg, 21, None).unwrap();
        let b = train(&data, &cfg, 21, None).unwrap();
        assert_eq!(
            a.policy.to_checkpoint_bytes(Some(&a.adam)),
            b.policy.to_checkpoint_bytes(Some(&b.adam))
        );
    }

    #[test]
    fn smoothed_loss_decreases_over_early_training() {
        // Window-averaged training loss over the first few thousand updates
        // must trend down; single-batch losses are too noisy to compare.
        let data = generate_random(&EnvSpec::point_reach(), 50, 3);
        let mut cfg = TrainConfig::new(TrainMode::Merlin, 2000);
        cfg.batch_size = 128;
        cfg.log_interval = 1;
        let out = train(&data, &cfg, 21, None).unwrap();
        let window = 250;
        let means: Vec<f64> = out
            .log
            .chunks(window)
            .map(|c| c.iter().map(|r| r.loss).sum::<f64>() / c.len() as f64)
            .collect();
        for pair in means.windows(2) {
            assert!(
                pair[1] <= pair[0] + 0.05,
                "window means should not rise: {means:?}"
            );
        }
        assert!(
            means.last().unwrap() < means.first().unwrap(),
            "loss should decrease overall: {means:?}"
        );
    }

    #[test]
    fn merlin_np_requires_stitch_params() {
        let data = generate_random(&EnvSpec::point_reach(), 4, 1);
        let cfg = TrainConfig::new(TrainMode::MerlinNp, 1);
        assert!(matches!(
            train(&data, &cfg, 1, None),
            Err(TrainError::MissingStitchParams)
        ));
    }

    #[test]
    fn checkpoint_round_trip_preserves_f32_params() {
        let mut rng = Rng::seed_from_u64(2);
        let policy = GaussianPolicy::init(50, false, &mut rng);
        let bytes = policy.to_checkpoint_bytes(None);
        let restored = GaussianPolicy::from_checkpoint_bytes(&bytes, 50, false).unwrap();
        assert_eq!(restored.to_checkpoint_bytes(None), bytes);
    }
}
