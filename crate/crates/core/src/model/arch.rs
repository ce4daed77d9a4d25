//! Layer-graph descriptions and their text form.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Activation shape of one sample, `(channels, height, width)`.
/// Flattened features are `(features, 1, 1)`.
pub type Shape3 = (usize, usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    /// 3×3 convolution, stride 1, padding 1.
    Conv { out_channels: usize },
    BatchNorm,
    Relu,
    /// 2×2 max pooling, stride 2.
    MaxPool,
    Flatten,
    Linear { out_features: usize },
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv { out_channels } => write!(f, "conv{out_channels}"),
            LayerSpec::BatchNorm => f.write_str("bn"),
            LayerSpec::Relu => f.write_str("relu"),
            LayerSpec::MaxPool => f.write_str("pool"),
            LayerSpec::Flatten => f.write_str("flatten"),
            LayerSpec::Linear { out_features } => write!(f, "linear{out_features}"),
        }
    }
}

impl FromStr for LayerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let num = |rest: &str| {
            rest.parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::Format(format!("bad layer size in {s:?}")))
        };
        Ok(match s {
            "bn" => LayerSpec::BatchNorm,
            "relu" => LayerSpec::Relu,
            "pool" => LayerSpec::MaxPool,
            "flatten" => LayerSpec::Flatten,
            _ if s.starts_with("conv") => LayerSpec::Conv {
                out_channels: num(&s[4..])?,
            },
            _ if s.starts_with("linear") => LayerSpec::Linear {
                out_features: num(&s[6..])?,
            },
            _ => return Err(Error::Format(format!("unknown layer {s:?}"))),
        })
    }
}

/// A feed-forward stack ending in a linear layer whose outputs feed a softmax
/// cross-entropy head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchitectureSpec {
    pub input: Shape3,
    pub layers: Vec<LayerSpec>,
}

impl ArchitectureSpec {
    pub fn new(input: Shape3, layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = ArchitectureSpec { input, layers };
        spec.shapes()?;
        if !matches!(spec.layers.last(), Some(LayerSpec::Linear { .. })) {
            return Err(Error::Shape("architecture must end with a linear layer".into()));
        }
        Ok(spec)
    }

    /// Four Conv-BN-ReLU-Pool blocks (8, 16, 32, 64 channels), then
    /// Linear(128)-ReLU-Linear(n_classes).
    pub fn minivgg(input: Shape3, n_classes: usize) -> Result<Self> {
        let mut layers = Vec::new();
        for ch in [8, 16, 32, 64] {
            layers.extend([
                LayerSpec::Conv { out_channels: ch },
                LayerSpec::BatchNorm,
                LayerSpec::Relu,
                LayerSpec::MaxPool,
            ]);
        }
        layers.extend([
            LayerSpec::Flatten,
            LayerSpec::Linear { out_features: 128 },
            LayerSpec::Relu,
            LayerSpec::Linear {
                out_features: n_classes,
            },
        ]);
        ArchitectureSpec::new(input, layers)
    }

    /// VGG-16 with batch normalization: 13 convolutions in five pooled
    /// stages, then three linear layers.
    pub fn vgg16(input: Shape3, n_classes: usize) -> Result<Self> {
        let stages: [&[usize]; 5] = [
            &[64, 64],
            &[128, 128],
            &[256, 256, 256],
            &[512, 512, 512],
            &[512, 512, 512],
        ];
        let mut layers = Vec::new();
        for stage in stages {
            for &ch in stage {
                layers.extend([
                    LayerSpec::Conv { out_channels: ch },
                    LayerSpec::BatchNorm,
                    LayerSpec::Relu,
                ]);
            }
            layers.push(LayerSpec::MaxPool);
        }
        layers.extend([
            LayerSpec::Flatten,
            LayerSpec::Linear { out_features: 4096 },
            LayerSpec::Relu,
            LayerSpec::Linear { out_features: 4096 },
            LayerSpec::Relu,
            LayerSpec::Linear {
                out_features: n_classes,
            },
        ]);
        ArchitectureSpec::new(input, layers)
    }

    pub fn preset(name: &str, input: Shape3, n_classes: usize) -> Result<Self> {
        match name {
            "minivgg" => ArchitectureSpec::minivgg(input, n_classes),
            "vgg16" => ArchitectureSpec::vgg16(input, n_classes),
            other => Err(Error::InvalidArgument(format!("unknown architecture preset {other:?}"))),
        }
    }

    /// Output shape after every layer (index `i` is the output of layer `i`).
    pub fn shapes(&self) -> Result<Vec<Shape3>> {
        let (c, h, w) = self.input;
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::Shape("input dimensions must be positive".into()));
        }
        let mut cur = self.input;
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let (c, h, w) = cur;
            cur = match *layer {
                LayerSpec::Conv { out_channels } => (out_channels, h, w),
                LayerSpec::BatchNorm | LayerSpec::Relu => cur,
                LayerSpec::MaxPool => {
                    if h < 2 || w < 2 {
                        return Err(Error::Shape(format!(
                            "layer {i}: cannot pool a {h}x{w} map"
                        )));
                    }
                    (c, h / 2, w / 2)
                }
                LayerSpec::Flatten => (c * h * w, 1, 1),
                LayerSpec::Linear { out_features } => {
                    if h != 1 || w != 1 {
                        return Err(Error::Shape(format!(
                            "layer {i}: linear layer needs flattened input, got {c}x{h}x{w}"
                        )));
                    }
                    (out_features, 1, 1)
                }
            };
            out.push(cur);
        }
        Ok(out)
    }

    pub fn n_classes(&self) -> usize {
        match self.layers.last() {
            Some(LayerSpec::Linear { out_features }) => *out_features,
            _ => 0,
        }
    }

    pub fn input_len(&self) -> usize {
        self.input.0 * self.input.1 * self.input.2
    }

    pub fn conv_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l, LayerSpec::Conv { .. }))
            .count()
    }

    pub fn linear_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l, LayerSpec::Linear { .. }))
            .count()
    }

    /// Whether layer `i` is a convolution directly followed by batch norm
    /// (such convolutions carry no bias; the normalization would cancel it).
    pub fn conv_feeds_batchnorm(&self, i: usize) -> bool {
        matches!(self.layers.get(i), Some(LayerSpec::Conv { .. }))
            && matches!(self.layers.get(i + 1), Some(LayerSpec::BatchNorm))
    }
}

/// `CxHxW:layer,layer,...,softmax_ce`
impl fmt::Display for ArchitectureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (c, h, w) = self.input;
        write!(f, "{c}x{h}x{w}:")?;
        for layer in &self.layers {
            write!(f, "{layer},")?;
        }
        f.write_str("softmax_ce")
    }
}

impl FromStr for ArchitectureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (input, layers) = s
            .split_once(':')
            .ok_or_else(|| Error::Format(format!("architecture {s:?} lacks ':'")))?;
        let dims: Vec<usize> = input
            .split('x')
            .map(|d| d.parse().map_err(|_| Error::Format(format!("bad input shape {input:?}"))))
            .collect::<Result<_>>()?;
        let [c, h, w] = dims[..] else {
            return Err(Error::Format(format!("input shape {input:?} must be CxHxW")));
        };
        let mut parts: Vec<&str> = layers.split(',').collect();
        if parts.pop() != Some("softmax_ce") {
            return Err(Error::Format("architecture must end with softmax_ce".into()));
        }
        let layers = parts
            .into_iter()
            .map(str::parse)
            .collect::<Result<Vec<LayerSpec>>>()?;
        ArchitectureSpec::new((c, h, w), layers)
    }
}
