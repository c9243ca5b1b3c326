//! Short-time Fourier analysis and weighted overlap-add synthesis.
//!
//! Frames start at `l * frame_shift` with no leading padding. The final frame is
//! zero-padded, so a signal of `n` samples yields `ceil(n / frame_shift)` frames.
//! The forward DFT is unnormalized and the inverse carries the `1/N` factor.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::SAMPLE_RATE;

/// Mono waveform, nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSignal {
    /// Wraps samples at the pipeline rate, rejecting NaN/Inf.
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        Self::with_rate(samples, SAMPLE_RATE)
    }

    pub fn with_rate(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalysisConfig {
    pub frame_len: usize,
    pub frame_shift: usize,
    pub fft_size: usize,
}

impl Default for AnalysisConfig {
    /// 32 ms frames with a 16 ms shift at 16 kHz.
    fn default() -> Self {
        Self { frame_len: 512, frame_shift: 256, fft_size: 512 }
    }
}

impl AnalysisConfig {
    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_len < 2 || self.frame_shift == 0 {
            return Err(Error::invalid("frame_len must be >= 2 and frame_shift >= 1"));
        }
        if self.frame_shift > self.frame_len {
            return Err(Error::invalid("frame_shift exceeds frame_len"));
        }
        if self.frame_len > self.fft_size {
            return Err(Error::invalid("frame_len exceeds fft_size"));
        }
        Ok(())
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        len.div_ceil(self.frame_shift)
    }

    /// Longest signal an `n_frames` spectrogram can resynthesize.
    pub fn synthesizable_len(&self, n_frames: usize) -> usize {
        if n_frames == 0 {
            0
        } else {
            (n_frames - 1) * self.frame_shift + self.frame_len
        }
    }
}

/// Magnitude and phase over `n_frames x n_bins`, stored row-major by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectroGram {
    pub magnitude: Vec<f64>,
    pub phase: Vec<f64>,
    pub n_frames: usize,
    pub n_bins: usize,
    pub config: AnalysisConfig,
}

impl SpectroGram {
    pub fn zeros(n_frames: usize, config: AnalysisConfig) -> Self {
        let n_bins = config.n_bins();
        Self {
            magnitude: vec![0.0; n_frames * n_bins],
            phase: vec![0.0; n_frames * n_bins],
            n_frames,
            n_bins,
            config,
        }
    }

    pub fn mag_frame(&self, l: usize) -> &[f64] {
        &self.magnitude[l * self.n_bins..(l + 1) * self.n_bins]
    }

    pub fn mag_frame_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.magnitude[l * self.n_bins..(l + 1) * self.n_bins]
    }

    pub fn phase_frame(&self, l: usize) -> &[f64] {
        &self.phase[l * self.n_bins..(l + 1) * self.n_bins]
    }

    pub fn mag_frames(&self) -> impl Iterator<Item = &[f64]> {
        self.magnitude.chunks_exact(self.n_bins)
    }

    /// Squared magnitudes, frame by frame.
    pub fn power_frames(&self) -> Vec<Vec<f64>> {
        self.mag_frames().map(|f| f.iter().map(|m| m * m).collect()).collect()
    }

    pub fn same_shape(&self, other: &SpectroGram) -> bool {
        self.n_frames == other.n_frames && self.n_bins == other.n_bins
    }
}

/// Symmetric Hamming window, `0.54 - 0.46 cos(2 pi i / (n - 1))`.
pub fn hamming_window(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid(format!("window length {n} < 2")));
    }
    let denom = (n - 1) as f64;
    Ok((0..n).map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / denom).cos()).collect())
}

/// Splits a signal into `frame_len` frames starting every `frame_shift` samples.
pub fn frame_signal(signal: &AudioSignal, config: &AnalysisConfig) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    if signal.is_empty() {
        return Err(Error::EmptyInput);
    }
    let x = &signal.samples;
    let frames = (0..config.frame_count(x.len()))
        .map(|l| {
            let start = l * config.frame_shift;
            let end = (start + config.frame_len).min(x.len());
            let mut frame = vec![0.0; config.frame_len];
            frame[..end - start].copy_from_slice(&x[start..end]);
            frame
        })
        .collect();
    Ok(frames)
}

pub fn stft(signal: &AudioSignal, config: &AnalysisConfig) -> Result<SpectroGram> {
    let frames = frame_signal(signal, config)?;
    let window = hamming_window(config.frame_len)?;
    let n = config.fft_size;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);

    let mut spec = SpectroGram::zeros(frames.len(), *config);
    let k = spec.n_bins;
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for (l, frame) in frames.iter().enumerate() {
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (b, (&x, &w)) in buf.iter_mut().zip(frame.iter().zip(&window)) {
            b.re = x * w;
        }
        fft.process(&mut buf);
        // DC and Nyquist are real for real input.
        buf[0].im = 0.0;
        if n.is_multiple_of(2) {
            buf[n / 2].im = 0.0;
        }
        for (j, c) in buf[..k].iter().enumerate() {
            spec.magnitude[l * k + j] = c.norm();
            spec.phase[l * k + j] = c.im.atan2(c.re);
        }
    }
    Ok(spec)
}

/// Weighted overlap-add: each frame is windowed again and the sum is divided by
/// the summed squared-window envelope, which reconstructs unmodified spectra exactly.
pub fn istft(spec: &SpectroGram, out_len: usize) -> Result<AudioSignal> {
    let config = spec.config;
    config.validate()?;
    if spec.n_bins != config.n_bins()
        || spec.magnitude.len() != spec.n_frames * spec.n_bins
        || spec.phase.len() != spec.magnitude.len()
    {
        return Err(Error::shape("spectrogram arrays inconsistent with its config"));
    }
    let max_len = config.synthesizable_len(spec.n_frames);
    if out_len > max_len {
        return Err(Error::invalid(format!(
            "out_len {out_len} exceeds synthesizable length {max_len}"
        )));
    }

    let n = config.fft_size;
    let k = spec.n_bins;
    let window = hamming_window(config.frame_len)?;
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);

    let mut acc = vec![0.0; max_len];
    let mut env = vec![0.0; max_len];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for l in 0..spec.n_frames {
        let mag = spec.mag_frame(l);
        let ph = spec.phase_frame(l);
        for j in 0..k {
            buf[j] = Complex::from_polar(mag[j], ph[j]);
        }
        buf[0].im = 0.0;
        if n.is_multiple_of(2) {
            buf[n / 2].im = 0.0;
        }
        for j in 1..n - k + 1 {
            buf[n - j] = buf[j].conj();
        }
        ifft.process(&mut buf);
        let start = l * config.frame_shift;
        for (i, &w) in window.iter().enumerate() {
            acc[start + i] += buf[i].re / n as f64 * w;
            env[start + i] += w * w;
        }
    }
    let samples = acc[..out_len]
        .iter()
        .zip(&env)
        .map(|(&a, &e)| if e > 0.0 { a / e } else { 0.0 })
        .collect();
    AudioSignal::with_rate(samples, SAMPLE_RATE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sig(samples: Vec<f64>) -> AudioSignal {
        AudioSignal::new(samples).unwrap()
    }

    fn noise(n: usize, seed: u64) -> AudioSignal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sig((0..n).map(|_| rng.random_range(-0.5..0.5)).collect())
    }

    #[test]
    fn frame_counts() {
        let cfg = AnalysisConfig::default();
        let frames = frame_signal(&sig((0..512).map(|i| i as f64 + 1.0).collect()), &cfg).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[1][..256], (257..=512).map(|i| i as f64).collect::<Vec<_>>()[..]);
        assert!(frames[1][256..].iter().all(|&x| x == 0.0));

        let frames = frame_signal(&sig(vec![0.0; 256]), &cfg).unwrap();
        assert_eq!(frames.len(), 1);
        assert!(frames[0].iter().all(|&x| x == 0.0));

        assert_eq!(frame_signal(&sig(vec![0.1; 1024]), &cfg).unwrap().len(), 4);
        assert!(matches!(frame_signal(&sig(vec![]), &cfg), Err(Error::EmptyInput)));
    }

    #[test]
    fn hamming_values() {
        let w = hamming_window(512).unwrap();
        assert!((w[0] - 0.08).abs() < 1e-15);
        assert_eq!(w[255], w[256]);
        assert!(w.iter().all(|&v| v > 0.0 && v <= 1.0));
        let w4 = hamming_window(4).unwrap();
        for (a, b) in w4.iter().zip([0.08, 0.77, 0.77, 0.08]) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!(hamming_window(1).is_err());
    }

    #[test]
    fn cosine_peaks_at_its_bin() {
        let cfg = AnalysisConfig::default();
        for bin in [5usize, 40, 100, 200] {
            let f = bin as f64 * 16000.0 / 512.0;
            let x: Vec<f64> =
                (0..4096).map(|n| 0.5 * (2.0 * PI * f * n as f64 / 16000.0).cos()).collect();
            let spec = stft(&sig(x), &cfg).unwrap();
            assert_eq!(spec.n_bins, 257);
            // Frames fully inside the signal.
            for l in 0..spec.n_frames - 1 {
                let m = spec.mag_frame(l);
                let peak = (0..257).max_by(|&a, &b| m[a].total_cmp(&m[b])).unwrap();
                assert_eq!(peak, bin, "frame {l}");
            }
        }
    }

    #[test]
    fn zero_signal_and_dc_phase() {
        let cfg = AnalysisConfig::default();
        let spec = stft(&sig(vec![0.0; 2000]), &cfg).unwrap();
        assert!(spec.magnitude.iter().all(|&m| m == 0.0));

        let spec = stft(&noise(3000, 3), &cfg).unwrap();
        for l in 0..spec.n_frames {
            let p = spec.phase_frame(l)[0];
            assert!(p == 0.0 || p == PI, "dc phase {p}");
        }
    }

    #[test]
    fn parseval_per_frame() {
        let cfg = AnalysisConfig::default();
        let x = noise(5000, 11);
        let frames = frame_signal(&x, &cfg).unwrap();
        let w = hamming_window(512).unwrap();
        let spec = stft(&x, &cfg).unwrap();
        for (l, frame) in frames.iter().enumerate() {
            let time: f64 = frame.iter().zip(&w).map(|(a, b)| (a * b).powi(2)).sum();
            let m = spec.mag_frame(l);
            let mut freq = m[0].powi(2) + m[256].powi(2);
            freq += 2.0 * m[1..256].iter().map(|v| v * v).sum::<f64>();
            freq /= 512.0;
            assert!((time - freq).abs() <= 1e-6 * time, "frame {l}: {time} vs {freq}");
        }
    }

    #[test]
    fn round_trip_noise_and_ramp() {
        let cfg = AnalysisConfig::default();
        let ramp = sig((0..16000).map(|i| i as f64 / 16000.0 - 0.5).collect());
        for x in [noise(7777, 5), ramp] {
            let y = istft(&stft(&x, &cfg).unwrap(), x.len()).unwrap();
            let err = x.samples.iter().zip(&y.samples).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-6, "{err}");
        }
    }

    #[test]
    fn istft_zero_and_length_checks() {
        let cfg = AnalysisConfig::default();
        let spec = SpectroGram::zeros(4, cfg);
        let y = istft(&spec, 1024).unwrap();
        assert!(y.samples.iter().all(|&v| v == 0.0));
        assert!(istft(&spec, 3 * 256 + 512 + 1).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip_any_length(len in 1usize..4000, seed in 0u64..1000) {
            let cfg = AnalysisConfig::default();
            let x = noise(len, seed);
            let spec = stft(&x, &cfg).unwrap();
            proptest::prop_assert_eq!(spec.n_bins, 257);
            let y = istft(&spec, len).unwrap();
            for (a, b) in x.samples.iter().zip(&y.samples) {
                proptest::prop_assert!((a - b).abs() < 1e-6);
            }
        }
    }
}
