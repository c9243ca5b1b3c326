//! WAV I/O, SNR-controlled mixing, and deterministic test-set manifests.

pub mod manifest;
pub mod mix;
pub mod wav;

pub use manifest::{build_test_manifest, list_wavs, render_manifest, Manifest, MixSpec};
pub use mix::{measured_snr_db, mix_at_snr, noise_section, Mixture};
pub use wav::{load_wav, save_wav, wav_len};
