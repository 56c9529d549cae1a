//! Gradient verification suites: backprop of every loss in the crate
//! checked against central finite differences on randomly sampled small
//! instances. Used by the `merlin grad-check` subcommand and the acceptance
//! tests.

use crate::dataset::generate_random;
use std::cell::RefCell;
use crate::env::EnvSpec;
use crate::nn::gradcheck::{grad_check, FD_STEP};
use crate::nn::mat::Mat;
use crate::nn::mlp::Mlp;
use crate::policy::{GaussianPolicy, PolicyWorkspace};
use crate::relabel::{sample_batch, RelabelConfig};
use crate::reverse_model::{
    cvae_loss, cvae_loss_grad, dynamics_loss, dynamics_loss_grad, CvaeBatch, ReverseCvae,
    Transitions,
};
use crate::rng::{derive_seed, Rng};

/// Margin used when nudging parameters away from ReLU kinks; comfortably
/// larger than anything a +-1e-4 parameter probe can move a pre-activation.
const KINK_MARGIN: f64 = 1e-3;
/// Parameters probed per instance.
const PROBES: usize = 60;

/// Result of one verification suite.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub name: &'static str,
    pub instances: usize,
    pub max_rel_err: f64,
}

fn random_tuples(seed: u64, n: usize) -> Vec<crate::relabel::TrainTuple> {
    let data = generate_random(&EnvSpec::point_reach(), 3, seed);
    let cfg = RelabelConfig {
        hindsight_ratio: 0.5,
        seed,
    };
    let mut rng = Rng::seed_from_u64(derive_seed(seed, "gc-batch", 0));
    sample_batch(&data, n, &cfg, &mut rng).expect("generated data has transitions")
}

fn check_policy_loss(gcsl: bool, instances: usize, seed: u64) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..instances {
        let inst_seed = derive_seed(seed, if gcsl { "gc-gcsl" } else { "gc-bc" }, i as u64);
        let mut rng = Rng::seed_from_u64(inst_seed);
        let net = Mlp::kaiming(&GaussianPolicy::net_dims(), 0.5, &mut rng);
        let mut policy = GaussianPolicy::from_net(net, 50, gcsl);
        let batch = random_tuples(inst_seed, 4);
        let mut x = Mat::zeros(0, 0);
        let mut fallback = Vec::new();
        policy.assemble_inputs(&[&batch], gcsl, &mut x, &mut fallback);
        policy.net.nudge_relu_kinks(&x, KINK_MARGIN);
        let mut ws = PolicyWorkspace::default();
        let _ = policy.loss_and_grad(&[&batch], gcsl, &mut ws);
        let analytic = ws.grads.clone();
        let params = policy.net.params.clone();
        let batch_ref = &batch;
        let probe = RefCell::new((policy, PolicyWorkspace::default()));
        let loss_at = |p: &[f64]| {
            let mut guard = probe.borrow_mut();
            let (pol, w) = &mut *guard;
            pol.net.params.copy_from_slice(p);
            pol.loss_and_grad(&[batch_ref], gcsl, w)
        };
        let err = grad_check(loss_at, &params, &analytic, PROBES, FD_STEP, &mut rng);
        worst = worst.max(err);
    }
    worst
}

/// Behavior-cloning loss gradients vs finite differences.
pub fn check_bc_loss(instances: usize, seed: u64) -> f64 {
    check_policy_loss(false, instances, seed)
}

/// GCSL baseline loss gradients vs finite differences.
pub fn check_gcsl_loss(instances: usize, seed: u64) -> f64 {
    check_policy_loss(true, instances, seed)
}

/// Reverse-dynamics loss gradients vs finite differences.
pub fn check_dynamics_loss(instances: usize, seed: u64) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..instances {
        let inst_seed = derive_seed(seed, "gc-dynamics", i as u64);
        let mut rng = Rng::seed_from_u64(inst_seed);
        let data = generate_random(&EnvSpec::point_reach(), 2, inst_seed);
        let tr = Transitions::from_dataset(&data).expect("non-empty");
        let idx: Vec<usize> = (0..4).map(|_| rng.below(tr.len() as u64) as usize).collect();
        let mut inputs = Mat::zeros(idx.len(), 4);
        let mut targets = Mat::zeros(idx.len(), 2);
        for (r, &j) in idx.iter().enumerate() {
            inputs.row_mut(r)[..2].copy_from_slice(&tr.s_next[j]);
            inputs.row_mut(r)[2..].copy_from_slice(&tr.a[j]);
            targets.row_mut(r).copy_from_slice(&tr.s[j]);
        }
        let mut net = Mlp::kaiming(&[4, 256, 256, 256, 2], 0.5, &mut rng);
        net.nudge_relu_kinks(&inputs, KINK_MARGIN);
        let (_, analytic) = dynamics_loss_grad(&net, &inputs, &targets);
        let params = net.params.clone();
        let probe = RefCell::new(net);
        let loss_at = |p: &[f64]| {
            let mut n = probe.borrow_mut();
            n.params.copy_from_slice(p);
            dynamics_loss(&n, &inputs, &targets)
        };
        let err = grad_check(loss_at, &params, &analytic, PROBES, FD_STEP, &mut rng);
        worst = worst.max(err);
    }
    worst
}

/// CVAE loss gradients (with frozen reparameterization noise) vs finite
/// differences, over the concatenated encoder and decoder parameters.
pub fn check_cvae_loss(instances: usize, seed: u64) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..instances {
        let inst_seed = derive_seed(seed, "gc-cvae", i as u64);
        let mut rng = Rng::seed_from_u64(inst_seed);
        let data = generate_random(&EnvSpec::point_reach(), 2, inst_seed);
        let tr = Transitions::from_dataset(&data).expect("non-empty");
        let idx: Vec<usize> = (0..4).map(|_| rng.below(tr.len() as u64) as usize).collect();
        let mut cvae = ReverseCvae {
            encoder: Mlp::kaiming(&[4, 256, 256, 8], 0.5, &mut rng),
            decoder: Mlp::kaiming(&[6, 256, 256, 2], 0.5, &mut rng),
            action_scale: 1.0,
        };
        let batch = {
            let mut s_next = Mat::zeros(idx.len(), 2);
            let mut actions = Mat::zeros(idx.len(), 2);
            let mut eps = Mat::zeros(idx.len(), 4);
            for (r, &j) in idx.iter().enumerate() {
                s_next.row_mut(r).copy_from_slice(&tr.s_next[j]);
                actions.row_mut(r).copy_from_slice(&tr.a[j]);
                for e in eps.row_mut(r) {
                    *e = rng.normal();
                }
            }
            CvaeBatch {
                s_next,
                actions,
                eps,
            }
        };
        // Nudge the encoder at its inputs, then the decoder at the decoder
        // inputs induced by the (nudged) encoder.
        let mut enc_in = Mat::zeros(batch.s_next.rows, 4);
        for r in 0..batch.s_next.rows {
            enc_in.row_mut(r)[..2].copy_from_slice(batch.s_next.row(r));
            enc_in.row_mut(r)[2..].copy_from_slice(batch.actions.row(r));
        }
        cvae.encoder.nudge_relu_kinks(&enc_in, KINK_MARGIN);
        let dec_in = decoder_inputs(&cvae, &batch);
        cvae.decoder.nudge_relu_kinks(&dec_in, KINK_MARGIN);
        let (_, analytic) = cvae_loss_grad(&cvae, &batch);
        let n_enc = cvae.encoder.params.len();
        let mut flat = cvae.encoder.params.clone();
        flat.extend_from_slice(&cvae.decoder.params);
        let batch_ref = &batch;
        let probe = RefCell::new(cvae);
        let loss_at = |p: &[f64]| {
            let mut c = probe.borrow_mut();
            c.encoder.params.copy_from_slice(&p[..n_enc]);
            c.decoder.params.copy_from_slice(&p[n_enc..]);
            cvae_loss(&c, batch_ref).total()
        };
        let err = grad_check(loss_at, &flat, &analytic, PROBES, FD_STEP, &mut rng);
        worst = worst.max(err);
    }
    worst
}

/// Decoder inputs `[s' || z]` induced by the current encoder on a batch.
fn decoder_inputs(cvae: &ReverseCvae, batch: &CvaeBatch) -> Mat {
    let b = batch.s_next.rows;
    let mut dec_in = Mat::zeros(b, 6);
    for r in 0..b {
        let s = [batch.s_next.row(r)[0], batch.s_next.row(r)[1]];
        let a = [batch.actions.row(r)[0], batch.actions.row(r)[1]];
        let (mu, logstd) = cvae.encode(s, a);
        dec_in.row_mut(r)[..2].copy_from_slice(&s);
        for i in 0..4 {
            dec_in.row_mut(r)[2 + i] = mu[i] + logstd[i].exp() * batch.eps.row(r)[i];
        }
    }
    dec_in
}

/// Runs all four suites. `instances` random instances per loss.
pub fn run_all(instances: usize, seed: u64) -> Vec<GradCheckReport> {
    vec![
        GradCheckReport {
            name: "bc_loss",
            instances,
            max_rel_err: check_bc_loss(instances, seed),
        },
        GradCheckReport {
            name: "gcsl_loss",
            instances,
            max_rel_err: check_gcsl_loss(instances, seed),
        },
        GradCheckReport {
            name: "reverse_dynamics_loss",
            instances,
            max_rel_err: check_dynamics_loss(instances, seed),
        },
        GradCheckReport {
            name: "cvae_loss",
            instances,
            max_rel_err: check_cvae_loss(instances, seed),
        },
    ]
}

/// Demonstrates that the checker flags wrong gradients: corrupts the
/// largest-magnitude gradient entry of a BC instance and returns the
/// reported error (expected to exceed any reasonable tolerance).
pub fn negative_control(seed: u64) -> f64 {
    let mut rng = Rng::seed_from_u64(derive_seed(seed, "gc-negative", 0));
    let net = Mlp::kaiming(&GaussianPolicy::net_dims(), 0.5, &mut rng);
    let mut policy = GaussianPolicy::from_net(net, 50, false);
    let batch = random_tuples(derive_seed(seed, "gc-negative", 1), 4);
    let mut x = Mat::zeros(0, 0);
    let mut fallback = Vec::new();
    policy.assemble_inputs(&[&batch], false, &mut x, &mut fallback);
    policy.net.nudge_relu_kinks(&x, KINK_MARGIN);
    let mut ws = PolicyWorkspace::default();
    let _ = policy.loss_and_grad(&[&batch], false, &mut ws);
    let mut corrupted = ws.grads.clone();
    let argmax = corrupted
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).expect("finite"))
        .map(|(i, _)| i)
        .expect("non-empty gradient");
    corrupted[argmax] *= 2.0;
    let params = policy.net.params.clone();
    let batch_ref = &batch;
    let probe = RefCell::new((policy, PolicyWorkspace::default()));
    let loss_at = |p: &[f64]| {
        let mut guard = probe.borrow_mut();
        let (pol, w) = &mut *guard;
        pol.net.params.copy_from_slice(p);
        pol.loss_and_grad(&[batch_ref], false, w)
    };
    // Probe exactly the corrupted parameter.
    crate::nn::gradcheck::grad_check_indices(loss_at, &params, &corrupted, &[argmax], FD_STEP)
}
