//! VGG-style convolutional classifier with exact backpropagation.
//!
//! Everything is computed in `f64`. Batch normalization follows every
//! convolution in both presets; convolutions feeding a normalization layer
//! carry no bias.

pub mod arch;
pub mod checkpoint;
mod gemm;
pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;

pub use arch::{ArchitectureSpec, LayerSpec, Shape3};
pub use gradcheck::{grad_check, GradCheckReport};
pub use optim::{sgd_step, OptimizerState};
pub use train::{evaluate, predict, train, train_with_progress, EpochRecord, TrainConfig, TrainOutcome};

use layers::{ConvDims, BN_EPS, BN_MOMENTUM};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Deliberate backward-pass defects, used to show the gradient check bites.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    ReluBackwardSignFlip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    ConvWeight,
    ConvBias,
    BnGamma,
    BnBeta,
    LinearWeight,
    LinearBias,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Layer {
    Conv {
        dims: (usize, usize, usize, usize),
        weight: Vec<f64>,
        bias: Option<Vec<f64>>,
    },
    BatchNorm {
        channels: usize,
        hw: usize,
        gamma: Vec<f64>,
        beta: Vec<f64>,
        running_mean: Vec<f64>,
        running_var: Vec<f64>,
    },
    Relu,
    MaxPool {
        c: usize,
        h: usize,
        w: usize,
    },
    Flatten,
    Linear {
        in_f: usize,
        out_f: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    },
}

fn conv_dims(dims: (usize, usize, usize, usize)) -> ConvDims {
    ConvDims {
        in_c: dims.0,
        out_c: dims.1,
        h: dims.2,
        w: dims.3,
    }
}

fn kaiming_uniform(rng: &mut ChaCha8Rng, len: usize, fan_in: usize) -> Vec<f64> {
    let bound = (6.0 / fan_in as f64).sqrt();
    (0..len).map(|_| rng.random_range(-bound..bound)).collect()
}

fn layer_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn build_linear(seed: u64, index: usize, in_f: usize, out_f: usize) -> Layer {
    let mut rng = layer_rng(seed, index);
    Layer::Linear {
        in_f,
        out_f,
        weight: kaiming_uniform(&mut rng, in_f * out_f, in_f),
        bias: vec![0.0; out_f],
    }
}

/// Per-layer values kept from the forward pass for backpropagation.
enum Aux {
    None,
    BatchNorm { xhat: Vec<f64>, inv_std: Vec<f64> },
    Pool(Vec<u32>),
}

/// Statistics measured on one batch by one batch-norm layer: mean and unbiased variance.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub layer: usize,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

struct ForwardPass {
    activations: Vec<Vec<f64>>,
    aux: Vec<Aux>,
    stats: Vec<BatchStats>,
}

/// Loss, gradients congruent with [`CnnModel::params`], and the batch statistics seen.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub grads: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub batch_stats: Vec<BatchStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    spec: ArchitectureSpec,
    pub(crate) layers: Vec<Layer>,
    pub mode: Mode,
    fault: Option<Fault>,
}

impl CnnModel {
    /// Kaiming-uniform (fan-in) weights, zero biases, unit batch-norm scale.
    pub fn new(spec: ArchitectureSpec, seed: u64) -> Result<Self> {
        let shapes = spec.shapes()?;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (i, layer) in spec.layers.iter().enumerate() {
            let (c, h, w) = if i == 0 { spec.input } else { shapes[i - 1] };
            layers.push(match *layer {
                LayerSpec::Conv { out_channels } => {
                    let mut rng = layer_rng(seed, i);
                    let fan_in = c * 9;
                    Layer::Conv {
                        dims: (c, out_channels, h, w),
                        weight: kaiming_uniform(&mut rng, out_channels * fan_in, fan_in),
                        bias: (!spec.conv_feeds_batchnorm(i)).then(|| vec![0.0; out_channels]),
                    }
                }
                LayerSpec::BatchNorm => Layer::BatchNorm {
                    channels: c,
                    hw: h * w,
                    gamma: vec![1.0; c],
                    beta: vec![0.0; c],
                    running_mean: vec![0.0; c],
                    running_var: vec![1.0; c],
                },
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::MaxPool => Layer::MaxPool { c, h, w },
                LayerSpec::Flatten => Layer::Flatten,
                LayerSpec::Linear { out_features } => build_linear(seed, i, c, out_features),
            });
        }
        Ok(CnnModel {
            spec,
            layers,
            mode: Mode::Train,
            fault: None,
        })
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn n_classes(&self) -> usize {
        self.spec.n_classes()
    }

    #[doc(hidden)]
    pub fn inject_fault(&mut self, fault: Option<Fault>) {
        self.fault = fault;
    }

    /// Trainable tensors in a fixed order, with names and kinds.
    pub fn params(&self) -> Vec<(String, ParamKind, &[f64])> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Conv { weight, bias, .. } => {
                    out.push((format!("layers.{i}.weight"), ParamKind::ConvWeight, weight.as_slice()));
                    if let Some(b) = bias {
                        out.push((format!("layers.{i}.bias"), ParamKind::ConvBias, b.as_slice()));
                    }
                }
                Layer::BatchNorm { gamma, beta, .. } => {
                    out.push((format!("layers.{i}.gamma"), ParamKind::BnGamma, gamma.as_slice()));
                    out.push((format!("layers.{i}.beta"), ParamKind::BnBeta, beta.as_slice()));
                }
                Layer::Linear { weight, bias, .. } => {
                    out.push((format!("layers.{i}.weight"), ParamKind::LinearWeight, weight.as_slice()));
                    out.push((format!("layers.{i}.bias"), ParamKind::LinearBias, bias.as_slice()));
                }
                _ => {}
            }
        }
        out
    }

    /// Mutable views in the same order as [`CnnModel::params`].
    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for layer in self.layers.iter_mut() {
            match layer {
                Layer::Conv { weight, bias, .. } => {
                    out.push(weight);
                    if let Some(b) = bias {
                        out.push(b);
                    }
                }
                Layer::BatchNorm { gamma, beta, .. } => {
                    out.push(gamma);
                    out.push(beta);
                }
                Layer::Linear { weight, bias, .. } => {
                    out.push(weight);
                    out.push(bias);
                }
                _ => {}
            }
        }
        out
    }

    /// Running statistics `(layer index, mean, var)` of every batch-norm layer.
    pub fn running_stats(&self) -> Vec<(usize, &[f64], &[f64])> {
        self.layers
            .iter()
            .enumerate()
            .filter_map(|(i, l)| match l {
                Layer::BatchNorm {
                    running_mean,
                    running_var,
                    ..
                } => Some((i, running_mean.as_slice(), running_var.as_slice())),
                _ => None,
            })
            .collect()
    }

    /// Folds batch statistics into the running estimates with momentum 0.1.
    pub fn update_running_stats(&mut self, stats: &[BatchStats]) {
        for st in stats {
            if let Some(Layer::BatchNorm {
                running_mean,
                running_var,
                ..
            }) = self.layers.get_mut(st.layer)
            {
                for (r, m) in running_mean.iter_mut().zip(&st.mean) {
                    *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * m;
                }
                for (r, v) in running_var.iter_mut().zip(&st.var) {
                    *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * v;
                }
            }
        }
    }

    fn batch_size(&self, input: &[f64]) -> Result<usize> {
        let len = self.spec.input_len();
        if input.is_empty() || input.len() % len != 0 {
            return Err(Error::Shape(format!(
                "input of {} values is not a whole number of {:?} samples",
                input.len(),
                self.spec.input
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model input".into()));
        }
        Ok(input.len() / len)
    }

    fn run_forward(&self, input: &[f64], exec: Exec, keep: bool) -> Result<ForwardPass> {
        let n = self.batch_size(input)?;
        let train = self.mode == Mode::Train;
        let mut activations = vec![input.to_vec()];
        let mut aux = Vec::with_capacity(self.layers.len());
        let mut stats = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let x = activations.last().expect("input is always present");
            let (y, a) = match layer {
                Layer::Conv { dims, weight, bias } => (
                    layers::conv_forward(exec, &conv_dims(*dims), weight, bias.as_deref(), x, n),
                    Aux::None,
                ),
                Layer::BatchNorm {
                    channels,
                    hw,
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                } => {
                    let (c, hw) = (*channels, *hw);
                    let (mean, inv_std) = if train {
                        let st = layers::channel_stats(exec, x, n, c, hw);
                        let m = (n * hw) as f64;
                        let unbias = if m > 1.0 { m / (m - 1.0) } else { 1.0 };
                        stats.push(BatchStats {
                            layer: i,
                            mean: st.iter().map(|s| s.0).collect(),
                            var: st.iter().map(|s| s.1 * unbias).collect(),
                        });
                        (
                            st.iter().map(|s| s.0).collect::<Vec<_>>(),
                            st.iter().map(|s| 1.0 / (s.1 + BN_EPS).sqrt()).collect::<Vec<_>>(),
                        )
                    } else {
                        (
                            running_mean.clone(),
                            running_var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect(),
                        )
                    };
                    let (y, xhat) = layers::bn_apply(exec, x, n, c, hw, &mean, &inv_std, gamma, beta);
                    (y, Aux::BatchNorm { xhat, inv_std })
                }
                Layer::Relu => (x.iter().map(|&v| v.max(0.0)).collect(), Aux::None),
                Layer::MaxPool { c, h, w } => {
                    let (y, arg) = layers::maxpool_forward(x, n, *c, *h, *w);
                    (y, Aux::Pool(arg))
                }
                Layer::Flatten => (x.clone(), Aux::None),
                Layer::Linear {
                    in_f,
                    out_f,
                    weight,
                    bias,
                } => (
                    layers::linear_forward(weight, bias, x, n, *in_f, *out_f),
                    Aux::None,
                ),
            };
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericLayer { layer: i });
            }
            if !keep && activations.len() > 1 {
                activations.clear();
            }
            activations.push(y);
            aux.push(if keep { a } else { Aux::None });
        }
        Ok(ForwardPass {
            activations,
            aux,
            stats,
        })
    }

    /// Logits `[B × n_classes]`. In train mode batch statistics are used and
    /// folded into the running estimates.
    pub fn forward(&mut self, input: &[f64], exec: Exec) -> Result<Vec<f64>> {
        let pass = self.run_forward(input, exec, false)?;
        if self.mode == Mode::Train {
            self.update_running_stats(&pass.stats);
        }
        Ok(pass.activations.into_iter().last().unwrap_or_default())
    }

    /// Logits without touching any state.
    pub fn logits(&self, input: &[f64], exec: Exec) -> Result<Vec<f64>> {
        let pass = self.run_forward(input, exec, false)?;
        Ok(pass.activations.into_iter().last().unwrap_or_default())
    }

    /// Mean cross-entropy and its gradient for every trainable tensor.
    /// Running statistics are not modified; the batch statistics are returned.
    pub fn loss_and_grad(&self, input: &[f64], labels: &[usize], exec: Exec) -> Result<LossGrad> {
        let k = self.n_classes();
        if let Some(&code) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidLabel { code, n_classes: k });
        }
        let n = self.batch_size(input)?;
        if labels.len() != n {
            return Err(Error::Shape(format!("{} labels for {n} samples", labels.len())));
        }
        let pass = self.run_forward(input, exec, true)?;
        let logits = pass.activations.last().expect("logits").clone();
        let (loss, mut dy) = layers::softmax_cross_entropy(&logits, labels, k);

        let mut grads: Vec<Vec<Vec<f64>>> = vec![Vec::new(); self.layers.len()];
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &pass.activations[i];
            let need_dx = i > 0;
            dy = match layer {
                Layer::Conv { dims, weight, bias } => {
                    let g = layers::conv_backward(
                        exec,
                        &conv_dims(*dims),
                        weight,
                        bias.is_some(),
                        x,
                        &dy,
                        n,
                        need_dx,
                    );
                    grads[i].push(g.weight);
                    if let Some(b) = g.bias {
                        grads[i].push(b);
                    }
                    g.input.unwrap_or_default()
                }
                Layer::BatchNorm {
                    channels, hw, gamma, ..
                } => {
                    let Aux::BatchNorm { xhat, inv_std } = &pass.aux[i] else {
                        unreachable!("batch norm keeps its normalized input")
                    };
                    let g = layers::bn_backward(
                        exec,
                        &dy,
                        xhat,
                        n,
                        *channels,
                        *hw,
                        gamma,
                        inv_std,
                        self.mode == Mode::Train,
                    );
                    grads[i].push(g.gamma);
                    grads[i].push(g.beta);
                    g.input
                }
                Layer::Relu => {
                    let y = &pass.activations[i + 1];
                    let sign = if self.fault == Some(Fault::ReluBackwardSignFlip) {
                        -1.0
                    } else {
                        1.0
                    };
                    dy.iter()
                        .zip(y)
                        .map(|(g, &out)| if out > 0.0 { sign * g } else { 0.0 })
                        .collect()
                }
                Layer::MaxPool { .. } => {
                    let Aux::Pool(arg) = &pass.aux[i] else {
                        unreachable!("pooling keeps its argmax")
                    };
                    layers::maxpool_backward(&dy, arg, x.len())
                }
                Layer::Flatten => dy,
                Layer::Linear {
                    in_f, out_f, weight, ..
                } => {
                    let g = layers::linear_backward(weight, x, &dy, n, *in_f, *out_f, need_dx);
                    grads[i].push(g.weight);
                    grads[i].push(g.bias);
                    g.input.unwrap_or_default()
                }
            };
        }
        Ok(LossGrad {
            loss,
            grads: grads.into_iter().flatten().collect(),
            logits,
            batch_stats: pass.stats,
        })
    }

    /// Replaces the final linear layer with a freshly initialized one of
    /// `n_classes` outputs. Every other tensor is left untouched.
    pub fn replace_head(&self, n_classes: usize, seed: u64) -> Result<CnnModel> {
        if n_classes == 0 {
            return Err(Error::InvalidArgument("head needs at least one output".into()));
        }
        let last = self.layers.len().checked_sub(1);
        let Some((idx, Layer::Linear { in_f, .. })) = last.map(|i| (i, &self.layers[i])) else {
            return Err(Error::Shape("model does not end with a linear layer".into()));
        };
        let mut layers_spec = self.spec.layers.clone();
        layers_spec[idx] = LayerSpec::Linear {
            out_features: n_classes,
        };
        let spec = ArchitectureSpec::new(self.spec.input, layers_spec)?;
        let mut layers = self.layers.clone();
        layers[idx] = build_linear(seed, idx, *in_f, n_classes);
        Ok(CnnModel {
            spec,
            layers,
            mode: self.mode,
            fault: self.fault,
        })
    }
}

/// Index of the largest logit per row, lowest index on ties.
pub fn argmax_rows(logits: &[f64], k: usize) -> Vec<usize> {
    logits
        .chunks(k)
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
