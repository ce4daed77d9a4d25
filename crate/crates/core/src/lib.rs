//! EEG motor-imagery classification from channel spectrograms.
//!
//! The pipeline runs raw multichannel recordings through a Chebyshev band-pass
//! and a mains notch ([`preprocess`]), cuts 788-sample trials ([`dataset`]),
//! turns every channel into a 224×224 log-power STFT image ([`spectrogram`]),
//! and classifies the images with a VGG-style CNN trained by SGD with momentum
//! ([`model`]). [`metrics`] produces per-subject accuracies and confusion
//! matrices. Binary file formats live in [`formats`].

pub mod dataset;
pub mod error;
pub mod exec;
pub mod formats;
pub mod metrics;
pub mod model;
pub mod preprocess;
pub mod spectrogram;
pub mod types;

pub use error::{Error, Result};
pub use exec::Exec;
pub use types::{
    Marker, MovementClass4, MovementClass7, MultichannelRecording, Provenance, SubjectId, Trial,
};
