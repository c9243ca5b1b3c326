//! Deterministic toy signals for tests, demos and the desk-scale training run.
//!
//! The "speech" is a train of harmonic tone bursts: each burst has a random
//! fundamental in 100-250 Hz, harmonics rolled off as `1/h` up to 4 kHz, a Hann
//! envelope, and is followed by a short pause.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dsp::AudioSignal;
use crate::SAMPLE_RATE;

const FS: f64 = SAMPLE_RATE as f64;

pub fn gaussian(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Unit-variance white Gaussian noise.
pub fn white_noise(rng: &mut impl Rng, n: usize) -> AudioSignal {
    AudioSignal { samples: (0..n).map(|_| gaussian(rng)).collect(), sample_rate: SAMPLE_RATE }
}

/// Approximately 1/f noise (Paul Kellet's three-pole filter), scaled to unit RMS.
pub fn pink_noise(rng: &mut impl Rng, n: usize) -> AudioSignal {
    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    let mut x: Vec<f64> = (0..n)
        .map(|_| {
            let w = gaussian(rng);
            b0 = 0.99765 * b0 + w * 0.099_046_0;
            b1 = 0.96300 * b1 + w * 0.296_516_4;
            b2 = 0.57000 * b2 + w * 1.052_691_3;
            b0 + b1 + b2 + w * 0.1848
        })
        .collect();
    normalize_rms(&mut x, 1.0);
    AudioSignal { samples: x, sample_rate: SAMPLE_RATE }
}

fn normalize_rms(x: &mut [f64], target: f64) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v *= target / rms);
    }
}

/// One harmonic burst of `n` samples at fundamental `f0`.
fn burst(n: usize, f0: f64, phase: f64) -> Vec<f64> {
    let n_harm = (4000.0 / f0).floor() as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / FS;
            let env = 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos();
            let tone: f64 = (1..=n_harm)
                .map(|h| (2.0 * PI * h as f64 * f0 * t + h as f64 * phase).sin() / h as f64)
                .sum();
            env * tone
        })
        .collect()
}

/// Tone-burst "speech" of exactly `n` samples with peak amplitude 0.5. A dither at
/// -80 dB keeps every STFT cell nonzero.
pub fn tone_burst_speech(rng: &mut impl Rng, n: usize) -> AudioSignal {
    let mut x = vec![0.0; n];
    let mut pos = rng.random_range(0..800);
    while pos < n {
        let len = rng.random_range(1300..4000);
        let f0 = rng.random_range(100.0..250.0);
        let phase = rng.random_range(0.0..2.0 * PI);
        for (j, v) in burst(len, f0, phase).into_iter().enumerate() {
            if pos + j < n {
                x[pos + j] += v;
            }
        }
        pos += len + rng.random_range(500..2400);
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v *= 0.5 / peak);
    }
    for v in x.iter_mut() {
        *v += 1e-4 * gaussian(rng);
    }
    AudioSignal { samples: x, sample_rate: SAMPLE_RATE }
}

/// `count` utterances with lengths drawn uniformly from `[min_s, max_s]` seconds.
pub fn toy_speech_corpus(rng: &mut impl Rng, count: usize, min_s: f64, max_s: f64) -> Vec<AudioSignal> {
    (0..count)
        .map(|_| {
            let n = (rng.random_range(min_s..=max_s) * FS) as usize;
            tone_burst_speech(rng, n.max(1))
        })
        .collect()
}

/// A white and a pink recording of `seconds` each, at RMS 0.1.
pub fn toy_noise_corpus(rng: &mut impl Rng, seconds: f64) -> Vec<AudioSignal> {
    let n = (seconds * FS) as usize;
    let mut out = vec![white_noise(rng, n), pink_noise(rng, n)];
    for s in out.iter_mut() {
        normalize_rms(&mut s.samples, 0.1);
    }
    out
}
