use crate::dsp::AudioSignal;
use crate::error::{Error, Result};

const FRAME: usize = 512;
const MIN_DB: f64 = -10.0;
const MAX_DB: f64 = 35.0;
const SILENCE: f64 = 1e-10;

/// Mean over non-overlapping 32 ms frames of the per-frame SNR, clamped to [-10, 35] dB.
/// Frames whose clean energy is below 1e-10 are skipped.
pub fn segmental_snr(clean: &AudioSignal, processed: &AudioSignal) -> Result<f64> {
    if clean.len() != processed.len() {
        return Err(Error::shape(format!("clean has {} samples, processed {}", clean.len(), processed.len())));
    }
    let mut total = 0.0;
    let mut n = 0usize;
    for (s, p) in clean.samples.chunks(FRAME).zip(processed.samples.chunks(FRAME)) {
        let signal: f64 = s.iter().map(|v| v * v).sum();
        if signal < SILENCE {
            continue;
        }
        let err: f64 = s.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum();
        let db = if err == 0.0 { MAX_DB } else { 10.0 * (signal / err).log10() };
        total += db.clamp(MIN_DB, MAX_DB);
        n += 1;
    }
    if n == 0 {
        return Err(Error::invalid("no clean frames above the energy threshold"));
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::white_noise;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn clamps_and_identities() {
        let s = AudioSignal::new((0..5000).map(|i| (i as f64 * 0.03).sin() * 0.3).collect()).unwrap();
        assert_eq!(segmental_snr(&s, &s).unwrap(), 35.0);
        assert!(segmental_snr(&s, &AudioSignal::new(vec![0.0; 5000]).unwrap()).unwrap().abs() < 1e-12);
        let short = AudioSignal::new(vec![0.0; 10]).unwrap();
        assert!(segmental_snr(&s, &short).is_err());
    }

    #[test]
    fn stationary_noise_at_ten_db() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = white_noise(&mut rng, 64 * 512);
        let d = white_noise(&mut rng, 64 * 512);
        let p: Vec<f64> = s.samples.iter().zip(&d.samples).map(|(a, b)| a + b * 0.1f64.sqrt()).collect();
        let snr = segmental_snr(&s, &AudioSignal::new(p).unwrap()).unwrap();
        assert!((snr - 10.0).abs() < 0.5, "{snr}");
    }

    #[test]
    fn silent_frames_are_skipped() {
        let mut x = vec![0.0; 2048];
        x[1024..].iter_mut().enumerate().for_each(|(i, v)| *v = (i as f64 * 0.1).sin());
        let s = AudioSignal::new(x).unwrap();
        let z = AudioSignal::new(vec![0.0; 2048]).unwrap();
        assert!(segmental_snr(&s, &z).unwrap().abs() < 1e-12);
    }
}
