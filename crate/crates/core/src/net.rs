//! Fully connected scoring network: real/imaginary input encoding, forward
//! pass with residual skip connections and a sigmoid head, manual
//! backpropagation, Adam updates, and binary weight persistence.
//!
//! All batched kernels accumulate in a fixed lane order, so results are
//! bit-identical regardless of batch size or thread count.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::rng::RngState;

const MODEL_MAGIC: [u8; 4] = *b"SP2N";
const MODEL_VERSION: u32 = 1;

/// Fixed sample-block size for the batched kernels. Constant (not derived
/// from the thread count) so that chunked evaluation is reproducible.
const SAMPLE_BLOCK: usize = 64;
const ROW_BLOCK: usize = 64;

/// Network input: re/im split of the snapshot and of the hypothesis steering
/// vector, with the noise level appended. Total length `4M + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetInput {
    data: Vec<f64>,
}

impl NetInput {
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Layout: `[Re x | Im x | Re a | Im a | sigma_v]`.
pub fn encode_input(
    snapshot: &[Complex64],
    steering: &[Complex64],
    sigma_v: f64,
) -> Result<NetInput> {
    if snapshot.len() != steering.len() {
        return Err(invalid(format!(
            "snapshot has {} entries, steering vector has {}",
            snapshot.len(),
            steering.len()
        )));
    }
    if !sigma_v.is_finite() {
        return Err(invalid("sigma_v must be finite"));
    }
    let m = snapshot.len();
    let mut data = Vec::with_capacity(4 * m + 1);
    data.extend(snapshot.iter().map(|z| z.re));
    data.extend(snapshot.iter().map(|z| z.im));
    data.extend(steering.iter().map(|z| z.re));
    data.extend(steering.iter().map(|z| z.im));
    data.push(sigma_v);
    Ok(NetInput { data })
}

/// Append an encoded input directly onto a batch buffer (same layout as
/// [`encode_input`]), avoiding a per-sample allocation in training loops.
pub fn encode_input_into(
    snapshot: &[Complex64],
    steering: &[Complex64],
    sigma_v: f64,
    out: &mut Vec<f64>,
) {
    debug_assert_eq!(snapshot.len(), steering.len());
    out.extend(snapshot.iter().map(|z| z.re));
    out.extend(snapshot.iter().map(|z| z.im));
    out.extend(steering.iter().map(|z| z.re));
    out.extend(steering.iter().map(|z| z.im));
    out.push(sigma_v);
}

/// Weights, biases, and skip wiring of the scoring network.
///
/// `layer_dims` runs from the input width to the scalar output; weight layer
/// `l` maps activation `l` to activation `l+1` (row-major `out x in`). A skip
/// pair `(src, tgt)` adds hidden activation `src` onto hidden activation
/// `tgt` after the ReLU, requiring equal widths.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    skip_pairs: Vec<(usize, usize)>,
}

impl ModelParams {
    /// Zero-initialized network (useful for tests; training starts from
    /// [`ModelParams::init_random`]).
    pub fn zeros(layer_dims: Vec<usize>, skip_pairs: Vec<(usize, usize)>) -> Result<Self> {
        Self::validate_shape(&layer_dims, &skip_pairs)?;
        let weights = (0..layer_dims.len() - 1)
            .map(|l| vec![0.0; layer_dims[l + 1] * layer_dims[l]])
            .collect();
        let biases = (0..layer_dims.len() - 1)
            .map(|l| vec![0.0; layer_dims[l + 1]])
            .collect();
        Ok(ModelParams {
            layer_dims,
            weights,
            biases,
            skip_pairs,
        })
    }

    /// He-style uniform init (`+-sqrt(6/fan_in)`) for the ReLU layers; the
    /// output layer starts near zero so initial scores sit around 0.5.
    pub fn init_random(
        layer_dims: Vec<usize>,
        skip_pairs: Vec<(usize, usize)>,
        rng: &mut RngState,
    ) -> Result<Self> {
        let mut params = Self::zeros(layer_dims, skip_pairs)?;
        let layers = params.weights.len();
        for l in 0..layers {
            let fan_in = params.layer_dims[l] as f64;
            let bound = if l == layers - 1 {
                1e-3
            } else {
                (6.0 / fan_in).sqrt()
            };
            for w in params.weights[l].iter_mut() {
                *w = rng.uniform(-bound, bound);
            }
        }
        Ok(params)
    }

    /// The architecture used for the full model on an `M`-element array:
    /// 4M+1 -> 256 -> 512 -> 1024 -> 2048 -> 2048 -> 2048 -> 2048 -> 1 with
    /// residual connections between the consecutive 2048-wide layers.
    pub fn default_dims(num_elements: usize) -> (Vec<usize>, Vec<(usize, usize)>) {
        let dims = vec![4 * num_elements + 1, 256, 512, 1024, 2048, 2048, 2048, 2048, 1];
        let skips = vec![(4, 5), (5, 6), (6, 7)];
        (dims, skips)
    }

    fn validate_shape(layer_dims: &[usize], skip_pairs: &[(usize, usize)]) -> Result<()> {
        if layer_dims.len() < 2 {
            return Err(invalid("need at least an input and an output layer"));
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(invalid("layer widths must be positive"));
        }
        if *layer_dims.last().unwrap() != 1 {
            return Err(invalid("output layer must be scalar"));
        }
        let hidden_last = layer_dims.len() - 2;
        let mut seen_targets = Vec::new();
        for &(src, tgt) in skip_pairs {
            if src == 0 || src >= tgt || tgt > hidden_last {
                return Err(invalid(format!(
                    "skip pair ({src}, {tgt}) out of range for {} hidden layers",
                    hidden_last
                )));
            }
            if layer_dims[src] != layer_dims[tgt] {
                return Err(invalid(format!(
                    "skip pair ({src}, {tgt}) connects widths {} and {}",
                    layer_dims[src], layer_dims[tgt]
                )));
            }
            if seen_targets.contains(&tgt) {
                return Err(invalid(format!("duplicate skip target {tgt}")));
            }
            seen_targets.push(tgt);
        }
        Ok(())
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn skip_pairs(&self) -> &[(usize, usize)] {
        &self.skip_pairs
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn num_weight_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn num_parameters(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn weight(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn weight_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.weights[layer]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.biases[layer]
    }

    fn skip_source_into(&self, tgt: usize) -> Option<usize> {
        self.skip_pairs
            .iter()
            .find(|&&(_, t)| t == tgt)
            .map(|&(s, _)| s)
    }

    pub fn all_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

#[inline]
fn axpy(dst: &mut [f64], coef: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += coef * s;
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `out[s][j] = bias[j] + sum_k x[s][k] w[j][k]`, accumulated in ascending
/// `k` per sample through a transposed weight copy. Every output row depends
/// only on its own sample, so chunked evaluation is exact for any chunking.
fn linear_forward_batch(
    x: &[f64],
    w: &[f64],
    bias: &[f64],
    in_dim: usize,
    out_dim: usize,
    out: &mut [f64],
) {
    let mut wt = vec![0.0f64; in_dim * out_dim];
    for j in 0..out_dim {
        for k in 0..in_dim {
            wt[k * out_dim + j] = w[j * in_dim + k];
        }
    }
    out.par_chunks_mut(SAMPLE_BLOCK * out_dim)
        .zip(x.par_chunks(SAMPLE_BLOCK * in_dim))
        .for_each(|(oblk, xblk)| {
            let rows = xblk.len() / in_dim;
            for s in 0..rows {
                oblk[s * out_dim..(s + 1) * out_dim].copy_from_slice(bias);
            }
            for k in 0..in_dim {
                let wk = &wt[k * out_dim..(k + 1) * out_dim];
                for s in 0..rows {
                    let coef = xblk[s * in_dim + k];
                    if coef != 0.0 {
                        axpy(&mut oblk[s * out_dim..(s + 1) * out_dim], coef, wk);
                    }
                }
            }
        });
}

/// `dx[s][k] = sum_j dz[s][j] w[j][k]`, accumulated in ascending `j`.
fn linear_backward_input_batch(
    dz: &[f64],
    w: &[f64],
    in_dim: usize,
    out_dim: usize,
    dx: &mut [f64],
) {
    dx.par_chunks_mut(SAMPLE_BLOCK * in_dim)
        .zip(dz.par_chunks(SAMPLE_BLOCK * out_dim))
        .for_each(|(xblk, zblk)| {
            xblk.fill(0.0);
            let rows = zblk.len() / out_dim;
            for j in 0..out_dim {
                let wj = &w[j * in_dim..(j + 1) * in_dim];
                for s in 0..rows {
                    let coef = zblk[s * out_dim + j];
                    if coef != 0.0 {
                        axpy(&mut xblk[s * in_dim..(s + 1) * in_dim], coef, wj);
                    }
                }
            }
        });
}

/// `wgrad[j][k] += sum_s dz[s][j] x[s][k]` and `bgrad[j] += sum_s dz[s][j]`,
/// accumulated in ascending `s`; parallel over disjoint row blocks.
fn linear_backward_params_batch(
    dz: &[f64],
    x: &[f64],
    in_dim: usize,
    out_dim: usize,
    wgrad: &mut [f64],
    bgrad: &mut [f64],
) {
    let rows = dz.len() / out_dim;
    let blocks: Vec<(usize, &mut [f64], &mut [f64])> = {
        let mut list = Vec::new();
        let mut w_rest = wgrad;
        let mut b_rest = bgrad;
        let mut j0 = 0;
        while j0 < out_dim {
            let take = ROW_BLOCK.min(out_dim - j0);
            let (w_blk, w_tail) = w_rest.split_at_mut(take * in_dim);
            let (b_blk, b_tail) = b_rest.split_at_mut(take);
            list.push((j0, w_blk, b_blk));
            w_rest = w_tail;
            b_rest = b_tail;
            j0 += take;
        }
        list
    };
    blocks
        .into_par_iter()
        .for_each(|(j0, w_blk, b_blk)| {
            let jn = b_blk.len();
            for s in 0..rows {
                let xrow = &x[s * in_dim..(s + 1) * in_dim];
                let zrow = &dz[s * out_dim..(s + 1) * out_dim];
                for dj in 0..jn {
                    let coef = zrow[j0 + dj];
                    if coef != 0.0 {
                        b_blk[dj] += coef;
                        axpy(&mut w_blk[dj * in_dim..(dj + 1) * in_dim], coef, xrow);
                    }
                }
            }
        });
}

/// Per-layer activations of a batch forward pass, kept for backprop. Layer 0
/// holds the inputs; the sigmoid outputs are stored separately.
pub struct BatchActivations {
    layers: Vec<Vec<f64>>,
    outputs: Vec<f64>,
}

impl BatchActivations {
    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }
}

/// Batched forward pass; `inputs` is row-major `B x input_dim`.
pub fn forward_batch(params: &ModelParams, inputs: &[f64]) -> Result<BatchActivations> {
    let in_dim = params.input_dim();
    if in_dim == 0 || inputs.len() % in_dim != 0 {
        return Err(invalid(format!(
            "batch length {} is not a multiple of the input width {in_dim}",
            inputs.len()
        )));
    }
    let batch = inputs.len() / in_dim;
    let n_layers = params.num_weight_layers();
    let mut layers: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
    layers.push(inputs.to_vec());

    for l in 0..n_layers - 1 {
        let (din, dout) = (params.layer_dims[l], params.layer_dims[l + 1]);
        let mut z = vec![0.0; batch * dout];
        linear_forward_batch(&layers[l], &params.weights[l], &params.biases[l], din, dout, &mut z);
        for v in z.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        if let Some(src) = params.skip_source_into(l + 1) {
            let src_act = &layers[src];
            z.par_chunks_mut(SAMPLE_BLOCK * dout)
                .zip(src_act.par_chunks(SAMPLE_BLOCK * dout))
                .for_each(|(zb, sb)| {
                    for (zv, sv) in zb.iter_mut().zip(sb) {
                        *zv += sv;
                    }
                });
        }
        layers.push(z);
    }

    let l = n_layers - 1;
    let (din, dout) = (params.layer_dims[l], params.layer_dims[l + 1]);
    debug_assert_eq!(dout, 1);
    let mut z = vec![0.0; batch];
    linear_forward_batch(&layers[l], &params.weights[l], &params.biases[l], din, dout, &mut z);
    let outputs: Vec<f64> = z.iter().map(|&v| sigmoid(v)).collect();
    Ok(BatchActivations { layers, outputs })
}

/// Per-parameter gradient accumulator, shaped like the model.
#[derive(Debug, Clone)]
pub struct Gradients {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Gradients {
            weights: params.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn scale(&mut self, c: f64) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            for x in v.iter_mut() {
                *x *= c;
            }
        }
    }

    pub fn weight(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn all_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    fn matches(&self, params: &ModelParams) -> bool {
        self.weights.len() == params.weights.len()
            && self
                .weights
                .iter()
                .zip(&params.weights)
                .all(|(g, w)| g.len() == w.len())
            && self
                .biases
                .iter()
                .zip(&params.biases)
                .all(|(g, b)| g.len() == b.len())
    }
}

/// Accumulate gradients of `sum_s weight_s * (out_s - target_s)^2` into
/// `grads`; returns the summed weighted loss. ReLU masks are recovered from
/// the stored activations (subtracting the skip source where one applies).
pub fn backward_batch(
    params: &ModelParams,
    acts: &BatchActivations,
    targets: &[f64],
    loss_weights: &[f64],
    grads: &mut Gradients,
) -> Result<f64> {
    let batch = acts.outputs.len();
    if targets.len() != batch || loss_weights.len() != batch {
        return Err(invalid("targets/weights length does not match the batch"));
    }
    if !grads.matches(params) {
        return Err(invalid("gradient shapes do not match the model"));
    }
    let n_layers = params.num_weight_layers();

    let mut loss = 0.0;
    // d(loss)/d(z_out): chain through the sigmoid.
    let mut dz: Vec<f64> = Vec::with_capacity(batch);
    for s in 0..batch {
        let out = acts.outputs[s];
        let err = out - targets[s];
        loss += loss_weights[s] * err * err;
        dz.push(loss_weights[s] * 2.0 * err * out * (1.0 - out));
    }

    // Output layer.
    let l = n_layers - 1;
    linear_backward_params_batch(
        &dz,
        &acts.layers[l],
        params.layer_dims[l],
        1,
        &mut grads.weights[l],
        &mut grads.biases[l],
    );
    let mut dh = vec![0.0; batch * params.layer_dims[l]];
    linear_backward_input_batch(&dz, &params.weights[l], params.layer_dims[l], 1, &mut dh);

    // Gradients routed through skip additions, keyed by source activation.
    let mut pending: Vec<Option<Vec<f64>>> = vec![None; n_layers];

    for l in (1..n_layers).rev() {
        let dim = params.layer_dims[l];
        if let Some(extra) = pending[l].take() {
            for (d, e) in dh.iter_mut().zip(&extra) {
                *d += e;
            }
        }
        // The skip contribution bypasses the ReLU entirely.
        if let Some(src) = params.skip_source_into(l) {
            let src_act = &acts.layers[src];
            let slot = pending[src].get_or_insert_with(|| vec![0.0; batch * dim]);
            for (p, d) in slot.iter_mut().zip(&dh) {
                *p += d;
            }
            // Mask by the pre-skip ReLU output.
            let act = &acts.layers[l];
            for i in 0..dh.len() {
                if act[i] - src_act[i] <= 0.0 {
                    dh[i] = 0.0;
                }
            }
        } else {
            let act = &acts.layers[l];
            for i in 0..dh.len() {
                if act[i] <= 0.0 {
                    dh[i] = 0.0;
                }
            }
        }

        let din = params.layer_dims[l - 1];
        linear_backward_params_batch(
            &dh,
            &acts.layers[l - 1],
            din,
            dim,
            &mut grads.weights[l - 1],
            &mut grads.biases[l - 1],
        );
        if l > 1 {
            let mut dprev = vec![0.0; batch * din];
            linear_backward_input_batch(&dh, &params.weights[l - 1], din, dim, &mut dprev);
            dh = dprev;
        }
    }
    Ok(loss)
}

/// Score in (0, 1) for one encoded input.
pub fn forward(params: &ModelParams, input: &NetInput) -> Result<f64> {
    if input.len() != params.input_dim() {
        return Err(invalid(format!(
            "input has length {}, model expects {}",
            input.len(),
            params.input_dim()
        )));
    }
    let acts = forward_batch(params, input.as_slice())?;
    Ok(acts.outputs[0])
}

/// Gradients of `weight * (forward(input) - target)^2` for one sample.
pub fn backward(
    params: &ModelParams,
    input: &NetInput,
    target: f64,
    weight: f64,
) -> Result<Gradients> {
    if !(0.0..=1.0).contains(&target) {
        return Err(invalid(format!("target {target} outside [0, 1]")));
    }
    if weight < 0.0 || !weight.is_finite() {
        return Err(invalid(format!("loss weight {weight} must be >= 0")));
    }
    if input.len() != params.input_dim() {
        return Err(invalid(format!(
            "input has length {}, model expects {}",
            input.len(),
            params.input_dim()
        )));
    }
    let acts = forward_batch(params, input.as_slice())?;
    let mut grads = Gradients::zeros_like(params);
    backward_batch(params, &acts, &[target], &[weight], &mut grads)?;
    Ok(grads)
}

/// Adam optimizer state, shaped like the parameters it updates.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    m_w: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ModelParams, learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            m_w: params.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            v_w: params.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            m_b: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            v_b: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One Adam update with bias correction.
pub fn adam_step(
    params: &mut ModelParams,
    state: &mut AdamState,
    grads: &Gradients,
) -> Result<()> {
    if !grads.matches(params) {
        return Err(invalid("gradient shapes do not match the model"));
    }
    if !grads.all_finite() {
        return Err(Error::NonFinite(format!(
            "gradients contain NaN/Inf at optimizer step {}",
            state.step_count + 1
        )));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.learning_rate, state.epsilon);

    let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    };
    for l in 0..params.weights.len() {
        update(
            &mut params.weights[l],
            &grads.weights[l],
            &mut state.m_w[l],
            &mut state.v_w[l],
        );
        update(
            &mut params.biases[l],
            &grads.biases[l],
            &mut state.m_b[l],
            &mut state.v_b[l],
        );
    }
    Ok(())
}

fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::ModelFormat("file truncated while reading header".into()))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64_into(r: &mut impl Read, out: &mut [f64], what: &str) -> Result<()> {
    let mut buf = vec![0u8; out.len() * 8];
    r.read_exact(&mut buf)
        .map_err(|_| Error::ModelFormat(format!("file truncated while reading {what}")))?;
    for (i, chunk) in buf.chunks_exact(8).enumerate() {
        out[i] = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    Ok(())
}

/// Write the model in the binary format: magic `SP2N`, version, M, layer
/// count, layer widths, skip pairs, then per layer the row-major weights and
/// the biases as little-endian f64.
pub fn save_model(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    if !params.all_finite() {
        return Err(Error::NonFinite(
            "refusing to save a model with NaN/Inf parameters".into(),
        ));
    }
    let input = params.input_dim();
    if input < 5 || (input - 1) % 4 != 0 {
        return Err(invalid(format!(
            "input width {input} is not of the form 4M+1"
        )));
    }
    let m = (input - 1) / 4;
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(&MODEL_MAGIC)?;
    write_u32(&mut w, MODEL_VERSION)?;
    write_u32(&mut w, m as u32)?;
    write_u32(&mut w, params.layer_dims.len() as u32)?;
    for &d in &params.layer_dims {
        write_u32(&mut w, d as u32)?;
    }
    write_u32(&mut w, params.skip_pairs.len() as u32)?;
    for &(s, t) in &params.skip_pairs {
        write_u32(&mut w, s as u32)?;
        write_u32(&mut w, t as u32)?;
    }
    for l in 0..params.weights.len() {
        for &x in &params.weights[l] {
            w.write_all(&x.to_le_bytes())?;
        }
        for &x in &params.biases[l] {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a model written by [`save_model`], verifying every header field and
/// the exact payload size.
pub fn load_model(path: impl AsRef<Path>) -> Result<ModelParams> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::ModelFormat("file too short for magic bytes".into()))?;
    if magic != MODEL_MAGIC {
        return Err(Error::ModelFormat(format!(
            "bad magic bytes {magic:?}, expected {MODEL_MAGIC:?}"
        )));
    }
    let version = read_u32(&mut r)?;
    if version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {version}"
        )));
    }
    let m = read_u32(&mut r)? as usize;
    let n_dims = read_u32(&mut r)? as usize;
    if n_dims < 2 || n_dims > 1024 {
        return Err(Error::ModelFormat(format!(
            "implausible layer count {n_dims}"
        )));
    }
    let mut layer_dims = Vec::with_capacity(n_dims);
    for _ in 0..n_dims {
        layer_dims.push(read_u32(&mut r)? as usize);
    }
    if layer_dims[0] != 4 * m + 1 {
        return Err(Error::ModelFormat(format!(
            "declared M = {m} inconsistent with input width {}",
            layer_dims[0]
        )));
    }
    let n_skips = read_u32(&mut r)? as usize;
    let mut skip_pairs = Vec::with_capacity(n_skips);
    for _ in 0..n_skips {
        let s = read_u32(&mut r)? as usize;
        let t = read_u32(&mut r)? as usize;
        skip_pairs.push((s, t));
    }
    ModelParams::validate_shape(&layer_dims, &skip_pairs)
        .map_err(|e| Error::ModelFormat(format!("invalid header: {e}")))?;

    let mut params = ModelParams::zeros(layer_dims, skip_pairs).expect("validated above");
    for l in 0..params.weights.len() {
        let dims = format!("layer {l} weights");
        let mut w = std::mem::take(&mut params.weights[l]);
        read_f64_into(&mut r, &mut w, &dims)?;
        params.weights[l] = w;
        let dims = format!("layer {l} biases");
        let mut b = std::mem::take(&mut params.biases[l]);
        read_f64_into(&mut r, &mut b, &dims)?;
        params.biases[l] = b;
    }
    let mut extra = [0u8; 1];
    match r.read(&mut extra) {
        Ok(0) => {}
        Ok(_) => {
            return Err(Error::ModelFormat(
                "trailing bytes after the declared payload".into(),
            ))
        }
        Err(e) => return Err(e.into()),
    }
    if !params.all_finite() {
        return Err(Error::ModelFormat(
            "payload contains NaN/Inf parameters".into(),
        ));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn micro_input(dim: usize, seed: u64) -> NetInput {
        let mut rng = RngState::new(seed);
        NetInput {
            data: (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        }
    }

    #[test]
    fn encode_layout_and_length() {
        let x: Vec<Complex64> = (0..16)
            .map(|i| Complex64::new(i as f64, -(i as f64)))
            .collect();
        let a: Vec<Complex64> = (0..16)
            .map(|i| Complex64::new(0.5 * i as f64, 0.25))
            .collect();
        let input = encode_input(&x, &a, 0.7).unwrap();
        assert_eq!(input.len(), 65);
        assert_eq!(input.as_slice()[0], 0.0);
        assert_eq!(input.as_slice()[15], 15.0);
        assert_eq!(input.as_slice()[16], -0.0);
        assert_eq!(input.as_slice()[31], -15.0);
        assert_eq!(input.as_slice()[32], 0.0);
        assert_eq!(input.as_slice()[48], 0.25);
        assert_eq!(input.as_slice()[64], 0.7);
    }

    #[test]
    fn encode_zero_and_real_cases() {
        let zeros = vec![Complex64::new(0.0, 0.0); 16];
        let input = encode_input(&zeros, &zeros, 0.0).unwrap();
        assert!(input.as_slice().iter().all(|&v| v == 0.0));

        let real: Vec<Complex64> = (0..16).map(|i| Complex64::new(1.0 + i as f64, 0.0)).collect();
        let input = encode_input(&real, &zeros, 0.1).unwrap();
        assert!(input.as_slice()[16..32].iter().all(|&v| v == 0.0));

        let short = vec![Complex64::new(0.0, 0.0); 8];
        assert!(encode_input(&short, &zeros, 0.1).is_err());
    }

    #[test]
    fn zero_model_outputs_half() {
        let params = ModelParams::zeros(vec![65, 8, 1], vec![]).unwrap();
        let out = forward(&params, &micro_input(65, 3)).unwrap();
        assert_eq!(out, 0.5);
    }

    #[test]
    fn outputs_stay_in_unit_interval() {
        let mut rng = RngState::new(17);
        let params = ModelParams::init_random(vec![65, 16, 16, 1], vec![(1, 2)], &mut rng).unwrap();
        for seed in 0..50 {
            let out = forward(&params, &micro_input(65, seed)).unwrap();
            assert!(out > 0.0 && out < 1.0);
        }
    }

    #[test]
    fn hand_computed_three_neuron_network() {
        let mut params = ModelParams::zeros(vec![2, 3, 1], vec![]).unwrap();
        params.weight_mut(0).copy_from_slice(&[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        params.bias_mut(0).copy_from_slice(&[0.5, -0.25, 0.0]);
        params.weight_mut(1).copy_from_slice(&[1.0, 2.0, -1.0]);
        params.bias_mut(1).copy_from_slice(&[0.1]);
        let input = NetInput {
            data: vec![0.3, -0.2],
        };
        // z1 = [0.8, -0.45, 0.1] -> relu [0.8, 0, 0.1]
        // z2 = 0.8 + 0 - 0.1 + 0.1 = 0.8 -> sigmoid(0.8)
        let expected = 1.0 / (1.0 + (-0.8f64).exp());
        let out = forward(&params, &input).unwrap();
        assert!((out - expected).abs() < 1e-12);
    }

    #[test]
    fn forward_is_deterministic_and_batch_invariant() {
        let mut rng = RngState::new(5);
        let params = ModelParams::init_random(vec![65, 32, 32, 1], vec![(1, 2)], &mut rng).unwrap();
        let inputs: Vec<NetInput> = (0..33).map(|i| micro_input(65, i)).collect();
        let single: Vec<f64> = inputs
            .iter()
            .map(|inp| forward(&params, inp).unwrap())
            .collect();
        let mut flat = Vec::new();
        for inp in &inputs {
            flat.extend_from_slice(inp.as_slice());
        }
        let batched = forward_batch(&params, &flat).unwrap();
        assert_eq!(single, batched.outputs);
    }

    #[test]
    fn zero_error_or_zero_weight_gives_zero_gradients(){
        let mut rng = RngState::new(11);
        let params = ModelParams::init_random(vec![9, 4, 1], vec![], &mut rng).unwrap();
        let input = micro_input(9, 2);
        let out = forward(&params, &input).unwrap();
        let grads = backward(&params, &input, out, 1.0).unwrap();
        assert!(grads.weights.iter().all(|w| w.iter().all(|&g| g == 0.0)));
        let grads = backward(&params, &input, 0.9, 0.0).unwrap();
        assert!(grads.weights.iter().all(|w| w.iter().all(|&g| g == 0.0)));
        assert!(grads.biases.iter().all(|b| b.iter().all(|&g| g == 0.0)));
    }

    fn finite_diff_check(dims: Vec<usize>, skips: Vec<(usize, usize)>, seed: u64) -> f64 {
        let mut rng = RngState::new(seed);
        let params = ModelParams::init_random(dims.clone(), skips, &mut rng).unwrap();
        let input = NetInput {
            data: (0..dims[0]).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        };
        let target = rng.uniform(0.0, 1.0);
        let weight = rng.uniform(0.1, 1.0);
        let grads = backward(&params, &input, target, weight).unwrap();

        let loss_of = |p: &ModelParams| {
            let out = forward(p, &input).unwrap();
            weight * (out - target) * (out - target)
        };
        let h = 1e-5;
        let mut max_rel = 0.0f64;
        let mut check = |l: usize, idx: usize, is_bias: bool, analytic: f64| {
            let mut plus = params.clone();
            let mut minus = params.clone();
            if is_bias {
                plus.bias_mut(l)[idx] += h;
                minus.bias_mut(l)[idx] -= h;
            } else {
                plus.weight_mut(l)[idx] += h;
                minus.weight_mut(l)[idx] -= h;
            }
            let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
            let rel = (numeric - analytic).abs() / (numeric.abs() + analytic.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
        };
        for l in 0..params.num_weight_layers() {
            for idx in 0..params.weight(l).len() {
                check(l, idx, false, grads.weight(l)[idx]);
            }
            for idx in 0..params.bias(l).len() {
                check(l, idx, true, grads.bias(l)[idx]);
            }
        }
        max_rel
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in [1u64, 2, 3] {
            let rel = finite_diff_check(vec![65, 8, 8, 1], vec![(1, 2)], seed);
            assert!(rel < 1e-4, "seed {seed}: max relative error {rel}");
        }
    }

    #[test]
    fn gradients_match_finite_differences_multi_skip() {
        let rel = finite_diff_check(vec![9, 6, 6, 6, 6, 1], vec![(1, 3), (2, 4)], 4);
        assert!(rel < 1e-4, "max relative error {rel}");
    }

    #[test]
    fn skip_block_with_zero_weights_is_identity_plus_relu_bias() {
        // Zeroed target-layer weights turn the skipped block into
        // relu(bias) + source activation.
        let mut rng = RngState::new(21);
        let mut params =
            ModelParams::init_random(vec![5, 4, 4, 1], vec![(1, 2)], &mut rng).unwrap();
        for w in params.weight_mut(1).iter_mut() {
            *w = 0.0;
        }
        params.bias_mut(1).copy_from_slice(&[0.3, -0.2, 0.0, 1.0]);
        let input = micro_input(5, 9);
        let acts = forward_batch(&params, input.as_slice()).unwrap();
        let h1 = &acts.layers[1];
        let h2 = &acts.layers[2];
        for j in 0..4 {
            let expected = params.bias(1)[j].max(0.0) + h1[j];
            assert!((h2[j] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn adam_first_step_magnitude() {
        let mut params = ModelParams::zeros(vec![3, 2, 1], vec![]).unwrap();
        let mut state = AdamState::new(&params, 0.001);
        let mut grads = Gradients::zeros_like(&params);
        for g in grads.weights[0].iter_mut() {
            *g = 0.37;
        }
        adam_step(&mut params, &mut state, &grads).unwrap();
        assert_eq!(state.step_count(), 1);
        for &p in params.weight(0) {
            assert!((p.abs() - 0.001).abs() < 1e-7, "step magnitude {}", p.abs());
            assert!(p < 0.0);
        }
        // Untouched parameters stay at zero.
        assert!(params.weight(1).iter().all(|&p| p == 0.0));
    }

    #[test]
    fn adam_zero_gradients_keep_params() {
        let mut rng = RngState::new(2);
        let mut params = ModelParams::init_random(vec![5, 4, 1], vec![], &mut rng).unwrap();
        let reference = params.clone();
        let mut state = AdamState::new(&params, 0.01);
        let grads = Gradients::zeros_like(&params);
        adam_step(&mut params, &mut state, &grads).unwrap();
        assert_eq!(params, reference);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn adam_rejects_non_finite_gradients() {
        let mut params = ModelParams::zeros(vec![3, 2, 1], vec![]).unwrap();
        let mut state = AdamState::new(&params, 0.001);
        let mut grads = Gradients::zeros_like(&params);
        grads.weights[0][0] = f64::NAN;
        assert!(adam_step(&mut params, &mut state, &grads).is_err());
    }

    #[test]
    fn adam_minimizes_two_parameter_quadratic() {
        // loss = (w - 0.35)^2 + 2 (b + 0.15)^2, driven by hand-fed gradients.
        let mut params = ModelParams::zeros(vec![1, 1], vec![]).unwrap();
        let mut state = AdamState::new(&params, 0.01);
        for _ in 0..200 {
            let w = params.weight(0)[0];
            let b = params.bias(0)[0];
            let mut grads = Gradients::zeros_like(&params);
            grads.weights[0][0] = 2.0 * (w - 0.35);
            grads.biases[0][0] = 4.0 * (b + 0.15);
            adam_step(&mut params, &mut state, &grads).unwrap();
        }
        let w = params.weight(0)[0];
        let b = params.bias(0)[0];
        let loss = (w - 0.35).powi(2) + 2.0 * (b + 0.15).powi(2);
        assert!(loss < 1e-6, "final loss {loss}");
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let mut rng = RngState::new(77);
        let params =
            ModelParams::init_random(vec![65, 8, 8, 1], vec![(1, 2)], &mut rng).unwrap();
        save_model(&params, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(params, loaded);
    }

    #[test]
    fn corrupt_model_files_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let mut rng = RngState::new(78);
        let params = ModelParams::init_random(vec![65, 8, 1], vec![], &mut rng).unwrap();
        save_model(&params, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        // Truncated payload.
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(load_model(&path).is_err());

        // Bad magic.
        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(load_model(&path).is_err());

        // Header/dimension mismatch: claim a different hidden width.
        let mut bad = bytes.clone();
        // layer_dims[1] lives after magic(4) + version(4) + m(4) + count(4) + dims[0](4).
        bad[20] = 9;
        std::fs::write(&path, &bad).unwrap();
        assert!(load_model(&path).is_err());

        // Trailing garbage.
        let mut bad = bytes.clone();
        bad.push(0);
        std::fs::write(&path, &bad).unwrap();
        assert!(load_model(&path).is_err());
    }

    #[test]
    fn shape_validation() {
        assert!(ModelParams::zeros(vec![65], vec![]).is_err());
        assert!(ModelParams::zeros(vec![65, 8, 2], vec![]).is_err());
        assert!(ModelParams::zeros(vec![65, 8, 4, 1], vec![(1, 2)]).is_err());
        assert!(ModelParams::zeros(vec![65, 8, 8, 1], vec![(2, 1)]).is_err());
        assert!(ModelParams::zeros(vec![65, 8, 8, 1], vec![(0, 2)]).is_err());
        assert!(ModelParams::zeros(vec![65, 8, 8, 1], vec![(1, 3)]).is_err());
        let params = ModelParams::zeros(vec![65, 8, 1], vec![]).unwrap();
        assert!(forward(&params, &micro_input(9, 0)).is_err());
    }
}
