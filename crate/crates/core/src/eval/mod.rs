//! MFCC features, word error rate and segmental SNR.

pub mod mfcc;
pub mod score;
pub mod segsnr;
pub mod wer;

pub use mfcc::{dct_ii_orthonormal, mel_filterbank, mfcc, Cepstra, N_CEPS, N_FILTERS};
pub use score::{score_manifest, scores_to_csv, ScoreRow};
pub use segsnr::segmental_snr;
pub use wer::{normalize_text, wer, EvalRecord, Transcript};
