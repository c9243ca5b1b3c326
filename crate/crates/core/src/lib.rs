//! Speech enhancement front-end built around a priori SNR estimation.
//!
//! The crate is organised along the processing chain:
//!
//! - [`dsp`]: Hamming-windowed STFT analysis (32 ms frames, 16 ms shift, 257 bins)
//!   and weighted overlap-add resynthesis.
//! - [`xi`]: oracle a priori SNR, its per-bin dB statistics and the Gaussian-CDF
//!   map into `[0, 1]` used as the network training target.
//! - [`gain`]: Wiener, square-root Wiener and MMSE-STSA gain rules.
//! - [`dd`]: decision-directed a priori SNR baseline with a recursive noise tracker.
//! - [`neural`]: residual (Bi)LSTM estimator with forward inference, BPTT and Adam.
//! - [`corpus`]: WAV I/O, SNR-controlled mixing and test manifests.
//! - [`eval`]: MFCC features, word error rate and segmental SNR.
//! - [`synth`]: deterministic toy signals (tone-burst "speech", white and pink noise).

pub mod corpus;
pub mod dd;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod gain;
pub mod neural;
pub mod special;
pub mod synth;
pub mod xi;

pub use error::{Error, Result};

/// Sample rate used throughout the pipeline.
pub const SAMPLE_RATE: u32 = 16_000;
