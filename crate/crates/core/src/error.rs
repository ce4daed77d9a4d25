use std::io;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid filter design: {0}")]
    InvalidDesign(String),

    #[error("unstable filter: pole magnitude {magnitude} is not inside the unit circle")]
    Unstable { magnitude: f64 },

    #[error("signal too short: {len} samples, need more than {min}")]
    SignalTooShort { len: usize, min: usize },

    #[error("insufficient samples: {len} available, {needed} needed")]
    InsufficientSamples { len: usize, needed: usize },

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("spectrogram geometry is {rows}x{cols}, expected {expected}x{expected}")]
    Geometry {
        rows: usize,
        cols: usize,
        expected: usize,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("marker at onset {onset} overruns recording of {n_samples} samples (trial length {trial_len})")]
    OutOfBounds {
        onset: usize,
        trial_len: usize,
        n_samples: usize,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid label code {code} for {n_classes} classes")]
    InvalidLabel { code: usize, n_classes: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite activation at layer {layer}")]
    NumericLayer { layer: usize },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
