use crate::dsp::AudioSignal;
use crate::error::{Error, Result};

/// Components of a mixture. `noisy` is formed as `clean + noise` after any rescale, so the
/// identity holds exactly.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub clean: AudioSignal,
    pub noise: AudioSignal,
    pub noisy: AudioSignal,
    /// Gain applied to the noise section before peak protection.
    pub noise_gain: f64,
    /// Common factor applied to all three signals (1.0 when no rescale was needed).
    pub rescale: f64,
}

fn mean_square(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// `10 log10(P_clean / P_noise)` with full-signal mean-square powers.
pub fn measured_snr_db(clean: &AudioSignal, noise: &AudioSignal) -> f64 {
    10.0 * (mean_square(&clean.samples) / mean_square(&noise.samples)).log10()
}

/// `len` samples of `noise` starting at `offset`, wrapping around when the recording
/// is shorter than requested.
pub fn noise_section(noise: &AudioSignal, offset: usize, len: usize) -> Result<AudioSignal> {
    if noise.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = noise.len();
    let samples = (0..len).map(|i| noise.samples[(offset + i) % n]).collect();
    AudioSignal::with_rate(samples, noise.sample_rate)
}

/// Scales `noise[offset..offset + clean.len()]` to sit `snr_db` below the clean signal
/// and adds it. If the mixture peaks above full scale, all three signals are multiplied
/// by `0.99 / peak`, which leaves the SNR unchanged.
pub fn mix_at_snr(
    clean: &AudioSignal,
    noise: &AudioSignal,
    snr_db: f64,
    offset: usize,
) -> Result<Mixture> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::invalid(format!("snr_db must be finite or +inf, got {snr_db}")));
    }
    if clean.is_empty() {
        return Err(Error::EmptyInput);
    }
    let end = offset + clean.len();
    if end > noise.len() {
        return Err(Error::invalid(format!(
            "noise section {offset}..{end} exceeds noise length {}",
            noise.len()
        )));
    }
    let section = &noise.samples[offset..end];
    let (ps, pn) = (mean_square(&clean.samples), mean_square(section));
    if ps == 0.0 {
        return Err(Error::invalid("clean signal has zero power"));
    }
    if pn == 0.0 {
        return Err(Error::invalid("noise section has zero power"));
    }
    let gain = (ps / pn * 10f64.powf(-snr_db / 10.0)).sqrt();

    let mut c = clean.samples.clone();
    let mut d: Vec<f64> = section.iter().map(|v| v * gain).collect();
    let peak = c.iter().zip(&d).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
    let rescale = if peak > 1.0 { 0.99 / peak } else { 1.0 };
    if rescale != 1.0 {
        c.iter_mut().for_each(|v| *v *= rescale);
        d.iter_mut().for_each(|v| *v *= rescale);
    }
    let x: Vec<f64> = c.iter().zip(&d).map(|(a, b)| a + b).collect();
    Ok(Mixture {
        clean: AudioSignal::with_rate(c, clean.sample_rate)?,
        noise: AudioSignal::with_rate(d, clean.sample_rate)?,
        noisy: AudioSignal::with_rate(x, clean.sample_rate)?,
        noise_gain: gain,
        rescale,
    })
}
