//! The causal network: a positionwise latent expansion feeding `n` parallel
//! causal heads, one per target variable.
//!
//! Each head owns a kernel over every `(variable, lag)` input cell and is
//! masked so it can never read its own contemporaneous value. Causal edge
//! strengths are read off the head kernels as channelwise L2 norms.
//!
//! Two variants share this module: the default `conv2d` model whose latent
//! layer is a 1x1 (positionwise) channel expansion, and the `conv1d`
//! ablation which flattens the `(variable, lag)` grid to one axis and runs
//! a width-3 convolution along it before the heads. Flattening mixes
//! neighboring cells across variable boundaries, which is the point of the
//! ablation.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::TensorError;
use crate::graph::TemporalGraph;
use crate::preprocess::WindowedBatch;
use crate::tensor::{Scalar, Tensor};

const LATENT_TAPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub(crate) fn apply<F: Scalar>(self, x: F) -> F {
        match self {
            Activation::Relu => x.max(F::zero()),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed in terms of the activation output.
    #[inline]
    pub(crate) fn derivative_from_output<F: Scalar>(self, z: F) -> F {
        match self {
            Activation::Relu => {
                if z > F::zero() {
                    F::one()
                } else {
                    F::zero()
                }
            }
            Activation::Tanh => F::one() - z * z,
        }
    }
}

impl FromStr for Activation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(format!("unknown activation {other:?} (relu|tanh)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Conv2d,
    Conv1dAblation,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Conv2d => write!(f, "conv2d"),
            Variant::Conv1dAblation => write!(f, "conv1d-ablation"),
        }
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conv2d" => Ok(Variant::Conv2d),
            "conv1d" | "conv1d-ablation" => Ok(Variant::Conv1dAblation),
            other => Err(format!("unknown variant {other:?} (conv2d|conv1d)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n: usize,
    pub l_max: usize,
    pub latent_channels: usize,
    pub activation: Activation,
    pub variant: Variant,
    /// Latent parameters are clamped to this magnitude after every
    /// optimizer step. Keeps the latent amplitude bounded so edge norms
    /// sit on a fixed scale against the L1 penalty and the threshold.
    pub latent_clamp: f64,
}

impl ModelConfig {
    pub fn new(n: usize, l_max: usize) -> Self {
        ModelConfig {
            n,
            l_max,
            latent_channels: 8,
            activation: Activation::Tanh,
            variant: Variant::Conv2d,
            latent_clamp: 1.0,
        }
    }

    fn width(&self) -> usize {
        self.l_max + 1
    }

    fn validate(&self) -> Result<(), TensorError> {
        if self.n < 2 || self.l_max < 1 || self.latent_channels < 1 {
            return Err(TensorError::Dimension(format!(
                "invalid model config: n={}, l_max={}, latent_channels={}",
                self.n, self.l_max, self.latent_channels
            )));
        }
        Ok(())
    }
}

/// All learnable parameters.
///
/// Head kernels are stored as one `[n, n, l_max+1, channels]` tensor:
/// `heads[j][i][c][k]` is head `j`'s weight on input cell `(i, c)` in
/// latent channel `k`. The conv1d variant reads the same storage with the
/// `(i, c)` pair flattened to a single axis. The mask invariant is that
/// `heads[j][j][l_max][..] == 0` for every head `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<F> {
    pub config: ModelConfig,
    /// Conv2d: `[channels]`; conv1d: `[channels, 3]` taps.
    pub latent_weight: Tensor<F>,
    pub latent_bias: Tensor<F>,
    pub heads: Tensor<F>,
    pub head_bias: Tensor<F>,
}

/// Gradients with the same layout as [`ModelState`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads<F> {
    pub latent_weight: Tensor<F>,
    pub latent_bias: Tensor<F>,
    pub heads: Tensor<F>,
    pub head_bias: Tensor<F>,
}

impl<F: Scalar> ModelState<F> {
    /// Zeroes every head's own-contemporaneous kernel slice.
    pub fn apply_mask(&mut self) {
        let (n, width, channels) = (
            self.config.n,
            self.config.width(),
            self.config.latent_channels,
        );
        for j in 0..n {
            let base = ((j * n + j) * width + (width - 1)) * channels;
            for k in 0..channels {
                self.heads.data_mut()[base + k] = F::zero();
            }
        }
    }

    /// Clamps latent parameters to `[-latent_clamp, latent_clamp]`.
    pub fn clamp_latent(&mut self) {
        let cap = F::from_f64(self.config.latent_clamp).unwrap();
        for v in self
            .latent_weight
            .data_mut()
            .iter_mut()
            .chain(self.latent_bias.data_mut().iter_mut())
        {
            *v = (*v).max(-cap).min(cap);
        }
    }

    /// True iff every masked cell is exactly zero.
    pub fn mask_holds(&self) -> bool {
        let (n, width, channels) = (
            self.config.n,
            self.config.width(),
            self.config.latent_channels,
        );
        (0..n).all(|j| {
            let base = ((j * n + j) * width + (width - 1)) * channels;
            (0..channels).all(|k| self.heads.data()[base + k] == F::zero())
        })
    }
}

/// Initializes the model: heads get small uniform weights in [-0.1, 0.1];
/// the latent layer draws from the full clamp range so its channels start
/// at working amplitude (weak latent slopes leave the heads unable to
/// outpull the sparsity penalty).
pub fn init<F: Scalar>(config: &ModelConfig, seed: u64) -> Result<ModelState<F>, TensorError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |shape: &[usize], range: f64| -> Tensor<F> {
        let len = shape.iter().product();
        let data = (0..len)
            .map(|_| F::from_f64(rng.gen_range(-range..range)).unwrap())
            .collect();
        Tensor::from_data(shape, data).expect("shape/product consistent")
    };
    let channels = config.latent_channels;
    let latent_range = config.latent_clamp;
    let latent_weight = match config.variant {
        Variant::Conv2d => draw(&[channels], latent_range),
        Variant::Conv1dAblation => draw(&[channels, LATENT_TAPS], latent_range),
    };
    let latent_bias = draw(&[channels], latent_range);
    let heads = draw(&[config.n, config.n, config.width(), channels], 0.1);
    let head_bias = draw(&[config.n], 0.1);
    let mut state = ModelState {
        config: config.clone(),
        latent_weight,
        latent_bias,
        heads,
        head_bias,
    };
    state.apply_mask();
    Ok(state)
}

fn check_batch<F: Scalar>(state: &ModelState<F>, batch: &WindowedBatch) -> Result<(), TensorError> {
    if batch.n() != state.config.n || batch.l_max != state.config.l_max {
        return Err(TensorError::Dimension(format!(
            "batch shape (n={}, l_max={}) does not match model (n={}, l_max={})",
            batch.n(),
            batch.l_max,
            state.config.n,
            state.config.l_max
        )));
    }
    Ok(())
}

/// Latent activations for the whole batch, shape `[samples, n, width, channels]`.
fn latent_forward<F: Scalar>(state: &ModelState<F>, batch: &WindowedBatch) -> Tensor<F> {
    let (n, width, channels) = (
        state.config.n,
        state.config.width(),
        state.config.latent_channels,
    );
    let samples = batch.num_samples();
    let act = state.config.activation;
    let mut z = Tensor::zeros(&[samples, n, width, channels]);
    let kw = state.latent_weight.data();
    let kb = state.latent_bias.data();
    match state.config.variant {
        Variant::Conv2d => {
            let zd = z.data_mut();
            let mut out = 0usize;
            for s in 0..samples {
                for i in 0..n {
                    for c in 0..width {
                        let x = F::from_f64(batch.samples.get3(s, i, c).to_f64_lossy()).unwrap();
                        for k in 0..channels {
                            zd[out] = act.apply(kw[k] * x + kb[k]);
                            out += 1;
                        }
                    }
                }
            }
        }
        Variant::Conv1dAblation => {
            // Width-3 convolution along the flattened (variable, lag) axis,
            // zero-padded at both ends.
            let positions = n * width;
            let zd = z.data_mut();
            for s in 0..samples {
                let flat_at = |p: isize| -> F {
                    if p < 0 || p >= positions as isize {
                        return F::zero();
                    }
                    let p = p as usize;
                    F::from_f64(batch.samples.get3(s, p / width, p % width).to_f64_lossy())
                        .unwrap()
                };
                for p in 0..positions {
                    let x_prev = flat_at(p as isize - 1);
                    let x_here = flat_at(p as isize);
                    let x_next = flat_at(p as isize + 1);
                    let base = (s * positions + p) * channels;
                    for k in 0..channels {
                        let pre = kw[k * LATENT_TAPS] * x_prev
                            + kw[k * LATENT_TAPS + 1] * x_here
                            + kw[k * LATENT_TAPS + 2] * x_next
                            + kb[k];
                        zd[base + k] = act.apply(pre);
                    }
                }
            }
        }
    }
    z
}

/// Predicts each variable at the current timestep; shape `[samples, n]`.
pub fn forward<F: Scalar>(
    state: &ModelState<F>,
    batch: &WindowedBatch,
) -> Result<Tensor<F>, TensorError> {
    check_batch(state, batch)?;
    let z = latent_forward(state, batch);
    Ok(head_forward(state, &z, batch.num_samples()))
}

fn head_forward<F: Scalar>(state: &ModelState<F>, z: &Tensor<F>, samples: usize) -> Tensor<F> {
    let (n, width, channels) = (
        state.config.n,
        state.config.width(),
        state.config.latent_channels,
    );
    let cells = n * width;
    let head_len = cells * channels;
    let mut pred = Tensor::zeros(&[samples, n]);
    let hd = state.heads.data();
    let zd = z.data();
    let pd = pred.data_mut();
    for s in 0..samples {
        let zrow = &zd[s * head_len..(s + 1) * head_len];
        for j in 0..n {
            let kernel = &hd[j * head_len..(j + 1) * head_len];
            let mut acc = state.head_bias.data()[j];
            for (kv, zv) in kernel.iter().zip(zrow) {
                acc = acc + *kv * *zv;
            }
            pd[s * n + j] = acc;
        }
    }
    pred
}

/// Exact gradients of a scalar loss w.r.t. all parameters, given
/// `loss_gradient[s][j] = dLoss/dPrediction[s][j]`. Masked cells get zero.
pub fn backward<F: Scalar>(
    state: &ModelState<F>,
    batch: &WindowedBatch,
    loss_gradient: &Tensor<F>,
) -> Result<ModelGrads<F>, TensorError> {
    check_batch(state, batch)?;
    let samples = batch.num_samples();
    if loss_gradient.shape() != [samples, state.config.n] {
        return Err(TensorError::Dimension(format!(
            "loss gradient shape {:?} does not match predictions [{samples}, {}]",
            loss_gradient.shape(),
            state.config.n
        )));
    }
    let z = latent_forward(state, batch);
    Ok(backward_from_latent(state, batch, &z, loss_gradient))
}

fn backward_from_latent<F: Scalar>(
    state: &ModelState<F>,
    batch: &WindowedBatch,
    z: &Tensor<F>,
    loss_gradient: &Tensor<F>,
) -> ModelGrads<F> {
    let (n, width, channels) = (
        state.config.n,
        state.config.width(),
        state.config.latent_channels,
    );
    let samples = batch.num_samples();
    let cells = n * width;
    let head_len = cells * channels;
    let act = state.config.activation;

    let mut grads = ModelGrads {
        latent_weight: Tensor::zeros(state.latent_weight.shape()),
        latent_bias: Tensor::zeros(&[channels]),
        heads: Tensor::zeros(&[n, n, width, channels]),
        head_bias: Tensor::zeros(&[n]),
    };

    // dLoss/dz, accumulated over heads.
    let mut dz = Tensor::<F>::zeros(&[samples, cells * channels]);
    {
        let hd = state.heads.data();
        let zd = z.data();
        let gd = grads.heads.data_mut();
        let gb = grads.head_bias.data_mut();
        let dzd = dz.data_mut();
        for s in 0..samples {
            let zrow = &zd[s * head_len..(s + 1) * head_len];
            let dzrow = &mut dzd[s * head_len..(s + 1) * head_len];
            for j in 0..n {
                let dp = loss_gradient.data()[s * n + j];
                if dp == F::zero() {
                    continue;
                }
                gb[j] = gb[j] + dp;
                let kernel = &hd[j * head_len..(j + 1) * head_len];
                let gkernel = &mut gd[j * head_len..(j + 1) * head_len];
                for idx in 0..head_len {
                    gkernel[idx] = gkernel[idx] + dp * zrow[idx];
                    dzrow[idx] = dzrow[idx] + dp * kernel[idx];
                }
            }
        }
    }

    // Through the activation into the latent parameters.
    let kw_grad = grads.latent_weight.data_mut();
    let kb_grad = grads.latent_bias.data_mut();
    match state.config.variant {
        Variant::Conv2d => {
            let zd = z.data();
            let dzd = dz.data();
            let mut idx = 0usize;
            for s in 0..samples {
                for i in 0..n {
                    for c in 0..width {
                        let x = F::from_f64(batch.samples.get3(s, i, c).to_f64_lossy()).unwrap();
                        for k in 0..channels {
                            let dpre = dzd[idx] * act.derivative_from_output(zd[idx]);
                            kw_grad[k] = kw_grad[k] + dpre * x;
                            kb_grad[k] = kb_grad[k] + dpre;
                            idx += 1;
                        }
                    }
                }
            }
        }
        Variant::Conv1dAblation => {
            let positions = cells;
            let zd = z.data();
            let dzd = dz.data();
            for s in 0..samples {
                let flat_at = |p: isize| -> F {
                    if p < 0 || p >= positions as isize {
                        return F::zero();
                    }
                    let p = p as usize;
                    F::from_f64(batch.samples.get3(s, p / width, p % width).to_f64_lossy())
                        .unwrap()
                };
                for p in 0..positions {
                    let x_prev = flat_at(p as isize - 1);
                    let x_here = flat_at(p as isize);
                    let x_next = flat_at(p as isize + 1);
                    let base = (s * positions + p) * channels;
                    for k in 0..channels {
                        let dpre = dzd[base + k] * act.derivative_from_output(zd[base + k]);
                        kw_grad[k * LATENT_TAPS] = kw_grad[k * LATENT_TAPS] + dpre * x_prev;
                        kw_grad[k * LATENT_TAPS + 1] = kw_grad[k * LATENT_TAPS + 1] + dpre * x_here;
                        kw_grad[k * LATENT_TAPS + 2] = kw_grad[k * LATENT_TAPS + 2] + dpre * x_next;
                        kb_grad[k] = kb_grad[k] + dpre;
                    }
                }
            }
        }
    }

    mask_grads(&state.config, &mut grads);
    grads
}

fn mask_grads<F: Scalar>(config: &ModelConfig, grads: &mut ModelGrads<F>) {
    let (n, width, channels) = (config.n, config.width(), config.latent_channels);
    for j in 0..n {
        let base = ((j * n + j) * width + (width - 1)) * channels;
        for k in 0..channels {
            grads.heads.data_mut()[base + k] = F::zero();
        }
    }
}

/// Reads the causal graph off the head kernels: the strength of edge
/// `(i, column c) -> j` is the L2 norm of head `j`'s kernel at cell
/// `(i, c)` across latent channels.
pub fn extract_adjacency<F: Scalar>(state: &ModelState<F>) -> TemporalGraph<F> {
    let (n, width, channels) = (
        state.config.n,
        state.config.width(),
        state.config.latent_channels,
    );
    let names = (0..n).map(|i| format!("x{}", i + 1)).collect();
    let mut graph = TemporalGraph::zeros(names, state.config.l_max);
    let hd = state.heads.data();
    for j in 0..n {
        for i in 0..n {
            for c in 0..width {
                let base = ((j * n + i) * width + c) * channels;
                let mut sq = F::zero();
                for k in 0..channels {
                    sq = sq + hd[base + k] * hd[base + k];
                }
                graph.weights.set3(i, c, j, sq.sqrt());
            }
        }
    }
    // The mask already zeroes these; keep the invariant explicit.
    for j in 0..n {
        graph.weights.set3(j, width - 1, j, F::zero());
    }
    graph
}

#[derive(Serialize, Deserialize)]
struct TensorData {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl TensorData {
    fn from_tensor<F: Scalar>(t: &Tensor<F>) -> Self {
        TensorData {
            shape: t.shape().to_vec(),
            data: t.data().iter().map(|v| v.to_f64_lossy()).collect(),
        }
    }

    fn to_tensor<F: Scalar>(&self) -> Result<Tensor<F>, TensorError> {
        let data = self
            .data
            .iter()
            .map(|&v| F::from_f64(v).unwrap())
            .collect();
        Tensor::from_data(&self.shape, data)
    }
}

/// Checkpoint file layout: config plus flat weight buffers with shape
/// headers. Stable field order; see README for the exact schema.
#[derive(Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub config: ModelConfig,
    latent_weight: TensorData,
    latent_bias: TensorData,
    heads: TensorData,
    head_bias: TensorData,
}

const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint<F: Scalar>(state: &ModelState<F>, path: &Path) -> std::io::Result<()> {
    let ckpt = Checkpoint {
        schema_version: CHECKPOINT_VERSION,
        config: state.config.clone(),
        latent_weight: TensorData::from_tensor(&state.latent_weight),
        latent_bias: TensorData::from_tensor(&state.latent_bias),
        heads: TensorData::from_tensor(&state.heads),
        head_bias: TensorData::from_tensor(&state.head_bias),
    };
    let text = serde_json::to_string_pretty(&ckpt).expect("checkpoint serializes");
    std::fs::write(path, text)
}

pub fn load_checkpoint<F: Scalar>(path: &Path) -> Result<ModelState<F>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("read {path:?}: {e}"))?;
    let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| format!("parse: {e}"))?;
    if ckpt.schema_version != CHECKPOINT_VERSION {
        return Err(format!(
            "unsupported checkpoint version {}",
            ckpt.schema_version
        ));
    }
    let state = ModelState {
        config: ckpt.config,
        latent_weight: ckpt.latent_weight.to_tensor().map_err(|e| e.to_string())?,
        latent_bias: ckpt.latent_bias.to_tensor().map_err(|e| e.to_string())?,
        heads: ckpt.heads.to_tensor().map_err(|e| e.to_string())?,
        head_bias: ckpt.head_bias.to_tensor().map_err(|e| e.to_string())?,
    };
    Ok(state)
}
