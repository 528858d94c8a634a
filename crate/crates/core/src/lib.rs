//! Learnable frequency-filter (LFF) front-ends for speaker verification.
//!
//! The pipeline is: waveform ([`signal`]) → STFT spectrum ([`stft`]) → a bank of
//! triangle or bell filters with trainable centers and bandwidths
//! ([`filterbank`]) → dB features. Time-domain Sinc/Gabor front-ends
//! ([`timedomain`]) are provided for cost comparisons, together with a small
//! end-to-end trainer ([`trainer`]), verification scoring ([`eval`]) and the
//! benchmark/experiment drivers used by the `lff` binary ([`bench`], [`commands`]).

pub mod bench;
pub mod commands;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod filterbank;
pub mod io;
pub mod signal;
pub mod stft;
pub mod timedomain;
pub mod trainer;

pub use error::{Error, Result};
pub use filterbank::{FeatureMatrix, FilterBankParams, FilterShape, ParamGradients};
pub use signal::AudioBuffer;
pub use stft::{SpectrumKind, SpectrumMatrix, StftConfig, WindowKind};
