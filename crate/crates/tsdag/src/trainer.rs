//! Augmented Lagrangian training loop.
//!
//! Minimizes `loss + (rho/2) h^2 + alpha h + lambda ||A||_1` over the model
//! parameters, where `h` is the acyclicity of the contemporaneous block of
//! the extracted adjacency `A`, with the penalty schedule
//! `rho <- (1+beta) rho` whenever `h` fails to shrink by factor `gamma`,
//! and `alpha <- alpha + rho h` each outer iteration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adam::AdamState;
use crate::error::{DataError, TensorError};
use crate::expm::acyclicity_h_and_grad;
use crate::graph::TemporalGraph;
use crate::model::{self, ModelConfig, ModelGrads, ModelState, Variant};
use crate::preprocess::WindowedBatch;
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Sparsity weight on the extracted adjacency.
    pub lambda: f64,
    pub rho0: f64,
    pub alpha0: f64,
    /// Penalty growth factor (rho multiplies by 1+beta).
    pub beta: f64,
    /// Required shrink ratio of h between outer iterations.
    pub gamma: f64,
    /// Edge pruning threshold applied to the final adjacency.
    pub omega: f64,
    pub inner_epochs: usize,
    pub max_outer: usize,
    pub h_tolerance: f64,
    pub rho_max: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.1,
            rho0: 1.0,
            alpha0: 0.0,
            beta: 0.1,
            gamma: 0.25,
            omega: 0.3,
            inner_epochs: 300,
            max_outer: 100,
            h_tolerance: 1e-8,
            rho_max: 1e16,
            learning_rate: 0.005,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), String> {
        if self.beta <= 0.0 {
            return Err(format!("beta must be positive, got {}", self.beta));
        }
        if self.gamma <= 0.0 || self.gamma >= 1.0 {
            return Err(format!("gamma must be in (0,1), got {}", self.gamma));
        }
        if self.lambda < 0.0 {
            return Err(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if self.rho0 <= 0.0 {
            return Err(format!("rho0 must be positive, got {}", self.rho0));
        }
        if self.omega < 0.0 {
            return Err(format!("omega must be non-negative, got {}", self.omega));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub loss: f64,
    pub h: f64,
    pub rho: f64,
    pub alpha: f64,
    pub objective: f64,
}

/// Adam states for every parameter tensor.
#[derive(Debug, Clone)]
pub struct OptimizerState<F> {
    pub latent_weight: AdamState<F>,
    pub latent_bias: AdamState<F>,
    pub heads: AdamState<F>,
    pub head_bias: AdamState<F>,
}

/// Model weights plus Lagrangian state across outer iterations.
#[derive(Debug, Clone)]
pub struct TrainState<F> {
    pub model: ModelState<F>,
    pub rho: F,
    pub alpha: F,
    pub h_prev: F,
    pub outer_iteration: usize,
    pub history: Vec<IterationRecord>,
    pub optimizer: OptimizerState<F>,
}

#[derive(Debug, Error)]
pub enum TrainError<F: Scalar> {
    #[error("training diverged (non-finite loss) at outer iteration {iteration}")]
    Diverged {
        iteration: usize,
        /// State at the end of the last finite outer iteration.
        last: Box<TrainState<F>>,
    },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid train config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParts<F> {
    /// Frobenius squared prediction error, summed over samples and
    /// variables.
    pub loss: F,
    pub h: F,
    pub l1: F,
}

/// `loss + (rho/2) h^2 + alpha h + lambda l1`.
pub fn objective_total<F: Scalar>(parts: &ObjectiveParts<F>, rho: F, alpha: F, lambda: F) -> F {
    let half = F::from_f64(0.5).unwrap();
    parts.loss + half * rho * parts.h * parts.h + alpha * parts.h + lambda * parts.l1
}

/// Penalty schedule: inflate `rho` when `h` did not shrink below
/// `gamma * h_prev`, then accumulate the multiplier with the pre-update
/// `rho`.
pub fn update_lagrangian<F: Scalar>(
    rho: F,
    alpha: F,
    h_new: F,
    h_prev: F,
    beta: F,
    gamma: F,
) -> (F, F) {
    let rho_next = if h_new > gamma * h_prev {
        (F::one() + beta) * rho
    } else {
        rho
    };
    let alpha_next = alpha + rho * h_new;
    (rho_next, alpha_next)
}

/// Current-timestep targets for every sample: column `l_max`.
fn targets<F: Scalar>(batch: &WindowedBatch) -> Tensor<F> {
    let samples = batch.num_samples();
    let n = batch.n();
    let mut y = Tensor::zeros(&[samples, n]);
    for s in 0..samples {
        for j in 0..n {
            let v = batch.samples.get3(s, j, batch.l_max);
            y.set2(s, j, F::from_f64(v).unwrap());
        }
    }
    y
}

fn squared_error_sum<F: Scalar>(pred: &Tensor<F>, y: &Tensor<F>) -> F {
    pred.data()
        .iter()
        .zip(y.data())
        .fold(F::zero(), |acc, (p, t)| {
            let d = *p - *t;
            acc + d * d
        })
}

/// Evaluates the full objective at the current weights.
pub fn objective<F: Scalar>(
    state: &TrainState<F>,
    batch: &WindowedBatch,
    config: &TrainConfig,
) -> Result<(F, ObjectiveParts<F>), TrainError<F>> {
    let pred = model::forward(&state.model, batch)?;
    let y = targets::<F>(batch);
    let loss = squared_error_sum(&pred, &y);
    let adjacency = model::extract_adjacency(&state.model);
    let (h, _) = acyclicity_h_and_grad(&adjacency.contemporaneous_block())?;
    let l1 = adjacency.weights.l1_norm();
    let parts = ObjectiveParts { loss, h, l1 };
    let total = objective_total(
        &parts,
        state.rho,
        state.alpha,
        F::from_f64(config.lambda).unwrap(),
    );
    Ok((total, parts))
}

/// Adds the gradients of `(rho/2) h^2 + alpha h + lambda ||A||_1` through
/// the adjacency extraction into the head gradients. Returns `(h, l1)`.
fn add_penalty_grads<F: Scalar>(
    state: &ModelState<F>,
    grads: &mut ModelGrads<F>,
    rho: F,
    alpha: F,
    lambda: F,
) -> Result<(F, F), TensorError> {
    let (n, width, channels) = (
        state.config.n,
        state.config.l_max + 1,
        state.config.latent_channels,
    );
    let adjacency = model::extract_adjacency(state);
    let (h, h_grad) = acyclicity_h_and_grad(&adjacency.contemporaneous_block())?;
    let l1 = adjacency.weights.l1_norm();
    let h_coef = rho * h + alpha;
    let hd = state.heads.data();
    let gd = grads.heads.data_mut();
    for j in 0..n {
        for i in 0..n {
            for c in 0..width {
                let a = adjacency.weights.get3(i, c, j);
                if a == F::zero() {
                    continue; // subgradient at zero group norm taken as 0
                }
                let mut coef = lambda;
                if c == width - 1 {
                    coef = coef + h_coef * h_grad.get2(i, j);
                }
                let scale = coef / a;
                let base = ((j * n + i) * width + c) * channels;
                for k in 0..channels {
                    gd[base + k] = gd[base + k] + scale * hd[base + k];
                }
            }
        }
    }
    Ok((h, l1))
}

/// Rows of the series underlying an overlap-consistent batch, or `None`
/// when the batch does not share rows between samples.
fn overlap_rows(batch: &WindowedBatch) -> Option<Tensor<f64>> {
    let samples = batch.num_samples();
    let n = batch.n();
    let width = batch.l_max + 1;
    for s in 1..samples {
        for i in 0..n {
            for c in 0..width - 1 {
                if batch.samples.get3(s, i, c) != batch.samples.get3(s - 1, i, c + 1) {
                    return None;
                }
            }
        }
    }
    let rows = samples + width - 1;
    let mut out = Tensor::zeros(&[rows, n]);
    for t in 0..rows {
        let (s, c) = if t < samples {
            (t, 0)
        } else {
            (samples - 1, t - (samples - 1))
        };
        for i in 0..n {
            out.set2(t, i, batch.samples.get3(s, i, c));
        }
    }
    Some(out)
}

/// Precomputed training-loop buffers for the conv2d fast path: the 1x1
/// latent depends only on the underlying series row, so windows that share
/// rows share latent values.
struct Conv2dCache<F> {
    rows: Tensor<F>,
    z: Tensor<F>,
    dz: Tensor<F>,
    /// Maps (sample, column) to a row index; identical math either way.
    overlapping: bool,
}

impl<F: Scalar> Conv2dCache<F> {
    fn build(batch: &WindowedBatch) -> Self {
        let samples = batch.num_samples();
        let n = batch.n();
        let width = batch.l_max + 1;
        match overlap_rows(batch) {
            Some(rows64) => {
                let rows = convert_tensor::<F>(&rows64);
                let r = rows.shape()[0];
                Conv2dCache {
                    rows,
                    z: Tensor::zeros(&[0]),
                    dz: Tensor::zeros(&[0]),
                    overlapping: true,
                }
                .with_buffers(r, n)
            }
            None => {
                // Fall back to one pseudo-row per (sample, column).
                let mut rows = Tensor::zeros(&[samples * width, n]);
                for s in 0..samples {
                    for c in 0..width {
                        for i in 0..n {
                            rows.set2(
                                s * width + c,
                                i,
                                F::from_f64(batch.samples.get3(s, i, c)).unwrap(),
                            );
                        }
                    }
                }
                let r = samples * width;
                Conv2dCache {
                    rows,
                    z: Tensor::zeros(&[0]),
                    dz: Tensor::zeros(&[0]),
                    overlapping: false,
                }
                .with_buffers(r, n)
            }
        }
    }

    fn with_buffers(mut self, rows: usize, n: usize) -> Self {
        self.z = Tensor::zeros(&[rows, n, 0]); // resized on first use
        self.dz = Tensor::zeros(&[rows, n, 0]);
        self
    }

}

fn convert_tensor<F: Scalar>(t: &Tensor<f64>) -> Tensor<F> {
    let data = t.data().iter().map(|&v| F::from_f64(v).unwrap()).collect();
    Tensor::from_data(t.shape(), data).expect("same shape")
}

/// One full-batch gradient step on the objective; returns the loss.
/// Conv2d uses the shared-row latent cache; conv1d goes through the
/// generic model path.
fn gradient_step<F: Scalar>(
    state: &mut TrainState<F>,
    batch: &WindowedBatch,
    cache: &mut Conv2dCache<F>,
    y: &Tensor<F>,
    lambda: F,
) -> Result<F, TrainError<F>> {
    let cfg = state.model.config.clone();
    let (n, width, channels) = (cfg.n, cfg.l_max + 1, cfg.latent_channels);
    let samples = y.shape()[0];

    let (loss, mut grads) = match cfg.variant {
        Variant::Conv2d => {
            let act = cfg.activation;
            let kw = state.model.latent_weight.data();
            let kb = state.model.latent_bias.data();
            let row_count = cache.rows.shape()[0];
            if cache.z.shape() != [row_count, n, channels] {
                cache.z = Tensor::zeros(&[row_count, n, channels]);
                cache.dz = Tensor::zeros(&[row_count, n, channels]);
            }
            // latent on unique rows
            {
                let zd = cache.z.data_mut();
                let xd = cache.rows.data();
                let mut out = 0usize;
                for t in 0..row_count {
                    for i in 0..n {
                        let x = xd[t * n + i];
                        for k in 0..channels {
                            zd[out] = act.apply(kw[k] * x + kb[k]);
                            out += 1;
                        }
                    }
                }
            }
            // forward + dpred + head grads + dz in two passes
            let overlapping = cache.overlapping;
            let row_of = move |s: usize, c: usize| -> usize {
                if overlapping {
                    s + c
                } else {
                    s * width + c
                }
            };
            let head_len = n * width * channels;
            let mut grads = ModelGrads {
                latent_weight: Tensor::zeros(state.model.latent_weight.shape()),
                latent_bias: Tensor::zeros(&[channels]),
                heads: Tensor::zeros(&[n, n, width, channels]),
                head_bias: Tensor::zeros(&[n]),
            };
            let mut loss = F::zero();
            cache.dz.fill(F::zero());
            {
                let hd = state.model.heads.data();
                let hb = state.model.head_bias.data();
                let zd = cache.z.data();
                let dzd = cache.dz.data_mut();
                let gh = grads.heads.data_mut();
                let gb = grads.head_bias.data_mut();
                let yd = y.data();
                let two = F::from_f64(2.0).unwrap();
                for s in 0..samples {
                    for j in 0..n {
                        // forward for head j
                        let mut acc = hb[j];
                        let kernel = &hd[j * head_len..(j + 1) * head_len];
                        for i in 0..n {
                            for c in 0..width {
                                let r = row_of(s, c);
                                let zs = &zd[(r * n + i) * channels..(r * n + i + 1) * channels];
                                let ks = &kernel
                                    [(i * width + c) * channels..(i * width + c + 1) * channels];
                                for k in 0..channels {
                                    acc = acc + ks[k] * zs[k];
                                }
                            }
                        }
                        let err = acc - yd[s * n + j];
                        loss = loss + err * err;
                        let dp = two * err;
                        gb[j] = gb[j] + dp;
                        // backward for head j
                        let gk = &mut gh[j * head_len..(j + 1) * head_len];
                        for i in 0..n {
                            for c in 0..width {
                                let r = row_of(s, c);
                                let zbase = (r * n + i) * channels;
                                let cell = (i * width + c) * channels;
                                for k in 0..channels {
                                    gk[cell + k] = gk[cell + k] + dp * zd[zbase + k];
                                    dzd[zbase + k] = dzd[zbase + k] + dp * kernel[cell + k];
                                }
                            }
                        }
                    }
                }
            }
            // latent grads from accumulated dz
            {
                let zd = cache.z.data();
                let dzd = cache.dz.data();
                let xd = cache.rows.data();
                let gw = grads.latent_weight.data_mut();
                let gbl = grads.latent_bias.data_mut();
                let mut idx = 0usize;
                for t in 0..cache.rows.shape()[0] {
                    for i in 0..n {
                        let x = xd[t * n + i];
                        for k in 0..channels {
                            let dpre = dzd[idx] * act.derivative_from_output(zd[idx]);
                            gw[k] = gw[k] + dpre * x;
                            gbl[k] = gbl[k] + dpre;
                            idx += 1;
                        }
                    }
                }
            }
            (loss, grads)
        }
        Variant::Conv1dAblation => {
            let pred = model::forward(&state.model, batch)?;
            let mut dpred = Tensor::zeros(&[samples, n]);
            let mut loss = F::zero();
            let two = F::from_f64(2.0).unwrap();
            for idx in 0..pred.len() {
                let err = pred.data()[idx] - y.data()[idx];
                loss = loss + err * err;
                dpred.data_mut()[idx] = two * err;
            }
            let grads = model::backward(&state.model, batch, &dpred)?;
            (loss, grads)
        }
    };

    if !loss.is_finite() {
        return Err(TrainError::Diverged {
            iteration: state.outer_iteration,
            last: Box::new(state.clone()),
        });
    }

    add_penalty_grads(&state.model, &mut grads, state.rho, state.alpha, lambda)?;

    // masked cells never receive gradient
    let opt = &mut state.optimizer;
    opt.latent_weight
        .apply(&mut state.model.latent_weight, &grads.latent_weight)?;
    opt.latent_bias
        .apply(&mut state.model.latent_bias, &grads.latent_bias)?;
    opt.heads.apply(&mut state.model.heads, &grads.heads)?;
    opt.head_bias
        .apply(&mut state.model.head_bias, &grads.head_bias)?;
    state.model.apply_mask();
    state.model.clamp_latent();
    Ok(loss)
}

/// Fresh training state: model init plus Lagrangian initial values.
pub fn init_state<F: Scalar>(
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<TrainState<F>, TrainError<F>> {
    config.validate().map_err(TrainError::Config)?;
    let model = model::init(model_config, config.seed)?;
    let lr = F::from_f64(config.learning_rate).unwrap();
    let optimizer = OptimizerState {
        latent_weight: AdamState::new(model.latent_weight.shape(), lr),
        latent_bias: AdamState::new(model.latent_bias.shape(), lr),
        heads: AdamState::new(model.heads.shape(), lr),
        head_bias: AdamState::new(model.head_bias.shape(), lr),
    };
    let adjacency = model::extract_adjacency(&model);
    let (h0, _) = acyclicity_h_and_grad(&adjacency.contemporaneous_block())?;
    Ok(TrainState {
        model,
        rho: F::from_f64(config.rho0).unwrap(),
        alpha: F::from_f64(config.alpha0).unwrap(),
        h_prev: h0,
        outer_iteration: 0,
        history: Vec::new(),
        optimizer,
    })
}

/// One outer iteration: `inner_epochs` full-batch steps, then the
/// rho/alpha schedule. Records a history line.
pub fn outer_step<F: Scalar>(
    state: &mut TrainState<F>,
    batch: &WindowedBatch,
    config: &TrainConfig,
) -> Result<(), TrainError<F>> {
    let mut cache = Conv2dCache::build(batch);
    outer_step_cached(state, batch, &mut cache, config)
}

fn outer_step_cached<F: Scalar>(
    state: &mut TrainState<F>,
    batch: &WindowedBatch,
    cache: &mut Conv2dCache<F>,
    config: &TrainConfig,
) -> Result<(), TrainError<F>> {
    let y = targets::<F>(batch);
    let lambda = F::from_f64(config.lambda).unwrap();
    let mut last_loss = F::zero();
    for _ in 0..config.inner_epochs {
        last_loss = gradient_step(state, batch, cache, &y, lambda)?;
    }
    let adjacency = model::extract_adjacency(&state.model);
    let (h_new, _) = acyclicity_h_and_grad(&adjacency.contemporaneous_block())?;
    let l1 = adjacency.weights.l1_norm();
    let parts = ObjectiveParts {
        loss: last_loss,
        h: h_new,
        l1,
    };
    let total = objective_total(&parts, state.rho, state.alpha, lambda);
    state.history.push(IterationRecord {
        iteration: state.outer_iteration,
        loss: last_loss.to_f64_lossy(),
        h: h_new.to_f64_lossy(),
        rho: state.rho.to_f64_lossy(),
        alpha: state.alpha.to_f64_lossy(),
        objective: total.to_f64_lossy(),
    });
    let beta = F::from_f64(config.beta).unwrap();
    let gamma = F::from_f64(config.gamma).unwrap();
    let (rho, alpha) = update_lagrangian(state.rho, state.alpha, h_new, state.h_prev, beta, gamma);
    state.rho = rho;
    state.alpha = alpha;
    state.h_prev = h_new;
    state.outer_iteration += 1;
    Ok(())
}

/// Why the outer loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    HTolerance,
    RhoMax,
    MaxOuter,
}

/// Everything `fit` hands back: the pruned graph (surviving edges keep
/// their extracted strengths), the raw weighted adjacency, and run flags.
#[derive(Debug, Clone)]
pub struct FitReport<F> {
    pub graph: TemporalGraph<F>,
    pub weighted: TemporalGraph<F>,
    pub state: TrainState<F>,
    pub termination: Termination,
    pub acyclicity_reached: bool,
    /// Contemporaneous edges removed post hoc to restore a DAG when the
    /// run ended with h above tolerance.
    pub edges_removed: usize,
}

/// Runs the full outer loop and prunes the learned adjacency.
pub fn fit<F: Scalar>(
    batch: &WindowedBatch,
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<FitReport<F>, TrainError<F>> {
    if model_config.n != batch.n() || model_config.l_max != batch.l_max {
        return Err(TrainError::Config(format!(
            "model config (n={}, l_max={}) does not match batch (n={}, l_max={})",
            model_config.n,
            model_config.l_max,
            batch.n(),
            batch.l_max
        )));
    }
    let mut state = init_state::<F>(model_config, config)?;
    let mut cache = Conv2dCache::build(batch);
    let h_tol = F::from_f64(config.h_tolerance).unwrap();
    let rho_max = F::from_f64(config.rho_max).unwrap();
    let mut termination = Termination::MaxOuter;
    for _ in 0..config.max_outer {
        outer_step_cached(&mut state, batch, &mut cache, config)?;
        if state.h_prev < h_tol {
            termination = Termination::HTolerance;
            break;
        }
        if state.rho > rho_max {
            termination = Termination::RhoMax;
            break;
        }
    }
    let acyclicity_reached = state.h_prev < h_tol;

    let mut weighted = model::extract_adjacency(&state.model);
    weighted.names = batch.names.clone();
    let omega = F::from_f64(config.omega).unwrap();
    let binary = weighted.threshold(omega);

    // Surviving edges keep their learned strengths.
    let mut graph = weighted.clone();
    for (g, b) in graph.weights.data_mut().iter_mut().zip(binary.weights.data()) {
        if *b == F::zero() {
            *g = F::zero();
        }
    }

    // If the constraint was not met, drop the weakest contemporaneous
    // edges until the block sorts topologically. Logged, never silent.
    let mut edges_removed = 0usize;
    if !acyclicity_reached {
        while graph.contemporaneous_topological_order().is_none() {
            let n = graph.n();
            let mut weakest: Option<(usize, usize, F)> = None;
            for i in 0..n {
                for j in 0..n {
                    let w = graph.weight_at(i, 0, j);
                    if w > F::zero() && weakest.is_none_or(|(_, _, best)| w < best) {
                        weakest = Some((i, j, w));
                    }
                }
            }
            match weakest {
                Some((i, j, _)) => {
                    graph.set_weight(i, 0, j, F::zero());
                    edges_removed += 1;
                }
                None => break,
            }
        }
    }

    Ok(FitReport {
        graph,
        weighted,
        state,
        termination,
        acyclicity_reached,
        edges_removed,
    })
}
