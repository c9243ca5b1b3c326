//! Mel-frequency cepstral coefficients from a magnitude spectrogram.
//!
//! Recipe: power spectrum, 26 triangular mel filters spanning 0-8000 Hz, natural log
//! floored at 1e-10, orthonormal DCT-II, all 26 coefficients kept. No liftering.

use std::f64::consts::PI;

use crate::dsp::SpectroGram;
use crate::error::{Error, Result};
use crate::SAMPLE_RATE;

pub const N_FILTERS: usize = 26;
pub const N_CEPS: usize = 26;
const LOG_FLOOR: f64 = 1e-10;
const N_BINS: usize = 257;

#[derive(Debug, Clone, PartialEq)]
pub struct Cepstra {
    /// One row of [`N_CEPS`] coefficients per frame.
    pub coeffs: Vec<Vec<f64>>,
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// `n_filters x n_bins` triangular weights. Filter edges are equally spaced on the mel
/// scale between 0 Hz and Nyquist; each triangle is evaluated at bin centre frequencies.
pub fn mel_filterbank(n_filters: usize, n_bins: usize, sample_rate: u32) -> Vec<Vec<f64>> {
    let nyq = sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyq);
    let edges: Vec<f64> = (0..n_filters + 2).map(|i| mel_to_hz(top * i as f64 / (n_filters + 1) as f64)).collect();
    let bin_hz = nyq / (n_bins - 1) as f64;
    (0..n_filters)
        .map(|m| {
            let (lo, c, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..n_bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= c {
                        (f - lo) / (c - lo)
                    } else {
                        (hi - f) / (hi - c)
                    }
                })
                .collect()
        })
        .collect()
}

pub fn dct_ii_orthonormal(x: &[f64], n_out: usize) -> Vec<f64> {
    let m = x.len() as f64;
    (0..n_out)
        .map(|n| {
            let scale = if n == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
            scale
                * x.iter()
                    .enumerate()
                    .map(|(j, v)| v * (PI * n as f64 * (j as f64 + 0.5) / m).cos())
                    .sum::<f64>()
        })
        .collect()
}

pub fn mfcc(spec: &SpectroGram) -> Result<Cepstra> {
    if spec.n_bins != N_BINS {
        return Err(Error::shape(format!("mfcc expects {N_BINS} bins, got {}", spec.n_bins)));
    }
    let bank = mel_filterbank(N_FILTERS, N_BINS, SAMPLE_RATE);
    let coeffs = spec
        .mag_frames()
        .map(|mag| {
            let log_e: Vec<f64> = bank
                .iter()
                .map(|row| {
                    let e: f64 = row.iter().zip(mag).map(|(w, m)| w * m * m).sum();
                    e.max(LOG_FLOOR).ln()
                })
                .collect();
            dct_ii_orthonormal(&log_e, N_CEPS)
        })
        .collect();
    Ok(Cepstra { coeffs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{stft, AnalysisConfig, AudioSignal};
    use crate::synth::white_noise;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_signal_is_constant_log_floor() {
        let spec = stft(&AudioSignal::new(vec![0.0; 1000]).unwrap(), &AnalysisConfig::default()).unwrap();
        let c = mfcc(&spec).unwrap();
        for row in &c.coeffs {
            // DCT of a constant vector: only c0 = sqrt(26) * ln(1e-10).
            assert!((row[0] - 26f64.sqrt() * LOG_FLOOR.ln()).abs() < 1e-9);
            assert!(row[1..].iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn filterbank_covers_spectrum() {
        let bank = mel_filterbank(N_FILTERS, N_BINS, SAMPLE_RATE);
        assert_eq!(bank.len(), 26);
        assert!(bank.iter().all(|row| row.iter().sum::<f64>() > 0.0));
        // Bin 0 sits on the lowest edge and bin 256 on the highest.
        for k in 1..N_BINS - 1 {
            assert!(bank.iter().any(|row| row[k] > 0.0), "bin {k} uncovered");
        }
    }

    #[test]
    fn rejects_wrong_bins() {
        let cfg = AnalysisConfig { frame_len: 256, frame_shift: 128, fft_size: 256 };
        let spec = stft(&AudioSignal::new(vec![0.1; 600]).unwrap(), &cfg).unwrap();
        assert!(matches!(mfcc(&spec), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn phase_invariant() {
        let x = white_noise(&mut ChaCha8Rng::seed_from_u64(2), 4000);
        let mut spec = stft(&x, &AnalysisConfig::default()).unwrap();
        let a = mfcc(&spec).unwrap();
        spec.phase.iter_mut().for_each(|p| *p = 1.234);
        assert_eq!(a, mfcc(&spec).unwrap());
    }
}
