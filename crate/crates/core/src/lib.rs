//! Vocoder source attribution.
//!
//! The crate is organised the way the pipeline runs:
//!
//! * [`corpus`]: WAV IO, the utterance manifest, speaker-disjoint splits and a
//!   synthetic corpus built from toy vocoder channels (Griffin-Lim among them).
//! * [`features`]: the cepstral front-end producing LFCC/MFCC matrices with
//!   delta and delta-delta coefficients, plus spectrogram export.
//! * [`nnet`]: a small tensor type with reverse-mode autodiff, the residual
//!   fingerprint extractor and checkpoint serialization.
//! * [`trainer`]: Adam with linear learning-rate decay and seeded batching.
//! * [`eval`]: confusion matrices, precision/recall/F1 reports and
//!   fingerprint embedding export.
//! * [`cli`]: the `vfp` command surface.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod nnet;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
