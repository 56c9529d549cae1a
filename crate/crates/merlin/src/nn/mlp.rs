//! Fully connected network with ReLU hidden layers, identity output, and
//! manual backpropagation.
//!
//! Parameters live in one flat `Vec<f64>`, laid out layer by layer as the
//! row-major weight matrix followed by the bias vector. The flat layout is
//! shared by gradients, the Adam optimizer, finite-difference checks, and
//! checkpoints. All arithmetic is in f64; parameters are narrowed to f32
//! only when written to disk.

use super::mat::{dgemm_slices, matmul, Mat};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    /// Layer widths, input first: `[d_in, h_1, ..., d_out]`.
    pub dims: Vec<usize>,
    /// Flat parameters: per layer, `W` (`d_l x d_{l+1}`, row-major) then `b`.
    pub params: Vec<f64>,
}

/// Activations retained by a forward pass for backprop: `acts[0]` is the
/// input batch, `acts[l]` the post-ReLU output of layer `l`, and the last
/// entry the network output.
#[derive(Debug, Default, Clone)]
pub struct ForwardCache {
    pub acts: Vec<Mat>,
}

impl ForwardCache {
    pub fn output(&self) -> &Mat {
        self.acts.last().expect("forward has been run")
    }
}

/// Reusable backprop buffers.
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    delta: Mat,
    delta_prev: Mat,
}

impl Mlp {
    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn param_count_for(dims: &[usize]) -> usize {
        dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn zeros(dims: &[usize]) -> Mlp {
        assert!(dims.len() >= 2, "need at least input and output dims");
        Mlp {
            dims: dims.to_vec(),
            params: vec![0.0; Mlp::param_count_for(dims)],
        }
    }

    /// Kaiming-uniform initialization for ReLU layers (`U(+-sqrt(6/fan_in))`),
    /// zero biases, and the final layer scaled by `final_scale` so initial
    /// outputs sit near zero.
    pub fn kaiming(dims: &[usize], final_scale: f64, rng: &mut Rng) -> Mlp {
        let mut net = Mlp::zeros(dims);
        let n_layers = net.n_layers();
        let mut offset = 0;
        for l in 0..n_layers {
            let (din, dout) = (dims[l], dims[l + 1]);
            let bound = (6.0 / din as f64).sqrt();
            let scale = if l + 1 == n_layers { final_scale } else { 1.0 };
            for w in &mut net.params[offset..offset + din * dout] {
                *w = scale * rng.range(-bound, bound);
            }
            offset += din * dout + dout; // biases stay zero
        }
        net
    }

    /// Offset of layer `l`'s weights in the flat parameter vector.
    fn layer_offset(&self, l: usize) -> usize {
        self.dims[..l]
            .iter()
            .zip(&self.dims[1..=l])
            .map(|(a, b)| a * b + b)
            .sum()
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        let off = self.layer_offset(l);
        &self.params[off..off + self.dims[l] * self.dims[l + 1]]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        let off = self.layer_offset(l) + self.dims[l] * self.dims[l + 1];
        &self.params[off..off + self.dims[l + 1]]
    }

    /// Batched forward pass; `x` is `batch x d_in`.
    pub fn forward_batch(&self, x: &Mat, cache: &mut ForwardCache) {
        assert_eq!(x.cols, self.dims[0], "input dim mismatch");
        let n_layers = self.n_layers();
        cache.acts.resize(n_layers + 1, Mat::zeros(0, 0));
        cache.acts[0].reshape(x.rows, x.cols);
        cache.acts[0].data.copy_from_slice(&x.data);
        for l in 0..n_layers {
            let (din, dout) = (self.dims[l], self.dims[l + 1]);
            let (input, rest) = cache.acts.split_at_mut(l + 1);
            let z = &mut rest[0];
            z.reshape(x.rows, dout);
            dgemm_slices(
                x.rows,
                din,
                dout,
                &input[l].data,
                din as isize,
                1,
                self.weights(l),
                dout as isize,
                1,
                0.0,
                &mut z.data,
                dout as isize,
                1,
            );
            let b = self.biases(l);
            for r in 0..z.rows {
                let row = z.row_mut(r);
                for (v, bias) in row.iter_mut().zip(b) {
                    *v += bias;
                }
            }
            if l + 1 < n_layers {
                for v in &mut z.data {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
        }
    }

    /// Single-sample forward pass.
    pub fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        let mut cache = ForwardCache::default();
        let input = Mat {
            rows: 1,
            cols: x.len(),
            data: x.to_vec(),
        };
        self.forward_batch(&input, &mut cache);
        cache.output().data.clone()
    }

    /// Backpropagates `dy` (gradient of the loss in the network output)
    /// through the cached activations, writing parameter gradients into the
    /// flat `grads` buffer (overwritten, same layout as `params`).
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        dy: &Mat,
        grads: &mut [f64],
        scratch: &mut Scratch,
    ) {
        self.backward_batch_full(cache, dy, grads, scratch, None);
    }

    /// Like [`Mlp::backward_batch`], also writing the gradient in the input
    /// batch into `input_grad` when requested (no activation is applied to
    /// the input, so it is the plain product with the first weight matrix).
    pub fn backward_batch_full(
        &self,
        cache: &ForwardCache,
        dy: &Mat,
        grads: &mut [f64],
        scratch: &mut Scratch,
        input_grad: Option<&mut Mat>,
    ) {
        assert_eq!(grads.len(), self.params.len());
        let n_layers = self.n_layers();
        assert_eq!(dy.rows, cache.acts[0].rows);
        assert_eq!(dy.cols, self.dims[n_layers]);
        scratch.delta.reshape(dy.rows, dy.cols);
        scratch.delta.data.copy_from_slice(&dy.data);
        let mut input_grad = input_grad;
        for l in (0..n_layers).rev() {
            let (din, dout) = (self.dims[l], self.dims[l + 1]);
            let off = self.layer_offset(l);
            let input = &cache.acts[l];
            let batch = scratch.delta.rows;
            // dW = input^T * delta
            dgemm_slices(
                din,
                batch,
                dout,
                &input.data,
                1,
                din as isize,
                &scratch.delta.data,
                dout as isize,
                1,
                0.0,
                &mut grads[off..off + din * dout],
                dout as isize,
                1,
            );
            // db = column sums of delta
            let db = &mut grads[off + din * dout..off + din * dout + dout];
            db.fill(0.0);
            for r in 0..batch {
                for (g, v) in db.iter_mut().zip(scratch.delta.row(r)) {
                    *g += v;
                }
            }
            if l > 0 {
                // delta_prev = (delta * W^T) masked by the ReLU activation.
                scratch.delta_prev.reshape(batch, din);
                dgemm_slices(
                    batch,
                    dout,
                    din,
                    &scratch.delta.data,
                    dout as isize,
                    1,
                    self.weights(l),
                    1,
                    dout as isize,
                    0.0,
                    &mut scratch.delta_prev.data,
                    din as isize,
                    1,
                );
                for (d, a) in scratch.delta_prev.data.iter_mut().zip(&input.data) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
                std::mem::swap(&mut scratch.delta, &mut scratch.delta_prev);
            } else if let Some(dx) = input_grad.take() {
                dx.reshape(batch, din);
                dgemm_slices(
                    batch,
                    dout,
                    din,
                    &scratch.delta.data,
                    dout as isize,
                    1,
                    self.weights(l),
                    1,
                    dout as isize,
                    0.0,
                    &mut dx.data,
                    din as isize,
                    1,
                );
            }
        }
    }

    /// Pre-activations of every hidden layer for the given batch (used to
    /// steer parameters away from ReLU kinks before finite differencing).
    pub fn hidden_preacts(&self, x: &Mat) -> Vec<Mat> {
        let n_layers = self.n_layers();
        let mut act = x.clone();
        let mut pre = Vec::new();
        for l in 0..n_layers - 1 {
            let w = Mat {
                rows: self.dims[l],
                cols: self.dims[l + 1],
                data: self.weights(l).to_vec(),
            };
            let mut z = Mat::zeros(0, 0);
            matmul(&mut z, &act, &w);
            let b = self.biases(l);
            for r in 0..z.rows {
                for (v, bias) in z.row_mut(r).iter_mut().zip(b) {
                    *v += bias;
                }
            }
            pre.push(z.clone());
            for v in &mut z.data {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            act = z;
        }
        pre
    }

    /// Bumps hidden biases until no pre-activation of `x` lies within
    /// `margin` of a ReLU kink. Finite-difference probes stay on one side of
    /// every kink afterwards.
    pub fn nudge_relu_kinks(&mut self, x: &Mat, margin: f64) {
        for _ in 0..200 {
            let pre = self.hidden_preacts(x);
            let mut clean = true;
            for (l, z) in pre.iter().enumerate() {
                let dout = self.dims[l + 1];
                let off = self.layer_offset(l) + self.dims[l] * dout;
                for unit in 0..dout {
                    let near = (0..z.rows).any(|r| z.row(r)[unit].abs() < margin);
                    if near {
                        self.params[off + unit] += 2.0 * margin;
                        clean = false;
                    }
                }
            }
            if clean {
                return;
            }
        }
        panic!("could not nudge parameters away from ReLU kinks");
    }
}
