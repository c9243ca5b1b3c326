//! Mini-batch training on randomly mixed utterances.
//!
//! Every clean utterance is visited once per epoch in a shuffled order. Each is mixed
//! with a random section of a random noise recording at a random SNR level, giving the
//! noisy magnitude spectrum as input and the mapped oracle a priori SNR as target.
//! Sequences keep their own lengths: the batch loss is the mean over all real frames of
//! the batch, which is what zero-padding with a frame mask computes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::{Adam, AdamConfig};
use super::network::{loss_and_grad_scaled, NetworkParams};
use crate::corpus::{mix_at_snr, noise_section};
use crate::dsp::{stft, AnalysisConfig, AudioSignal};
use crate::error::{Error, Result};
use crate::xi::{draw_mix, oracle_xi, MixDraw, XiStats};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub snr_min: f64,
    pub snr_max: f64,
    pub snr_step: f64,
    pub rng_seed: u64,
    /// Global gradient-norm ceiling; `0` disables clipping.
    pub grad_clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 10,
            epochs: 10,
            adam: AdamConfig::default(),
            snr_min: -10.0,
            snr_max: 20.0,
            snr_step: 1.0,
            rng_seed: 0,
            grad_clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    /// `snr_min, snr_min + step, ..., <= snr_max`.
    pub fn snr_levels(&self) -> Result<Vec<f64>> {
        if !(self.snr_min.is_finite() && self.snr_max.is_finite()) || self.snr_min > self.snr_max {
            return Err(Error::invalid(format!("bad SNR range {}..{}", self.snr_min, self.snr_max)));
        }
        if !(self.snr_step > 0.0) {
            return Err(Error::invalid("snr_step must be positive"));
        }
        let n = ((self.snr_max - self.snr_min) / self.snr_step + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|i| self.snr_min + i as f64 * self.snr_step).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if !(self.adam.learn_rate >= 0.0) || !(self.grad_clip_norm >= 0.0) {
            return Err(Error::invalid("learn_rate and grad_clip_norm must be >= 0"));
        }
        self.snr_levels().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean cross-entropy of each mini-batch, before its update.
    pub loss_history: Vec<f64>,
    pub batches_per_epoch: usize,
}

impl TrainReport {
    pub fn epoch_means(&self) -> Vec<f64> {
        if self.batches_per_epoch == 0 {
            return Vec::new();
        }
        self.loss_history
            .chunks(self.batches_per_epoch)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    }
}

/// Per-frame rows of a sequence.
pub type Frames = Vec<Vec<f64>>;

/// Network input (noisy magnitudes) and target (mapped oracle xi) for one mixture.
pub fn make_example(
    clean: &AudioSignal,
    noise: &AudioSignal,
    offset: usize,
    snr_db: f64,
    stats: &XiStats,
) -> Result<(Frames, Frames)> {
    let cfg = AnalysisConfig::default();
    let section = noise_section(noise, offset, clean.len())?;
    let mix = mix_at_snr(clean, &section, snr_db, 0)?;
    let noisy = stft(&mix.noisy, &cfg)?;
    let xi = oracle_xi(&stft(&mix.clean, &cfg)?, &stft(&mix.noise, &cfg)?)?;
    if stats.n_bins() != noisy.n_bins {
        return Err(Error::shape(format!("stats have {} bins, spectra {}", stats.n_bins(), noisy.n_bins)));
    }
    let input = noisy.mag_frames().map(<[f64]>::to_vec).collect();
    let target = xi.iter().map(|f| f.mapped(stats)).collect();
    Ok((input, target))
}

/// Trains `params` in place. Per-utterance gradients are evaluated in parallel and
/// summed in batch order, so results do not depend on the thread count.
pub fn train(
    params: &mut NetworkParams,
    clean: &[AudioSignal],
    noise: &[AudioSignal],
    stats: &XiStats,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if clean.is_empty() || noise.is_empty() {
        return Err(Error::EmptyInput);
    }
    if clean.len() < cfg.batch_size {
        return Err(Error::invalid(format!(
            "corpus of {} utterances is smaller than batch size {}",
            clean.len(),
            cfg.batch_size
        )));
    }
    if params.input_dim != stats.n_bins() || params.output_dim != stats.n_bins() {
        return Err(Error::shape(format!(
            "network maps {} -> {} but stats have {} bins",
            params.input_dim,
            params.output_dim,
            stats.n_bins()
        )));
    }
    let levels = cfg.snr_levels()?;
    let noise_lens: Vec<usize> = noise.iter().map(AudioSignal::len).collect();
    let batches_per_epoch = clean.len() / cfg.batch_size;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut adam = Adam::new(cfg.adam, params);
    let mut history = Vec::with_capacity(cfg.epochs * batches_per_epoch);

    for _ in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..clean.len()).collect();
        order.shuffle(&mut rng);
        for batch in order.chunks_exact(cfg.batch_size) {
            let draws: Vec<MixDraw> =
                batch.iter().map(|&i| draw_mix(&mut rng, i, clean[i].len(), &noise_lens, &levels)).collect();
            let examples = draws
                .par_iter()
                .map(|d| make_example(&clean[d.clean], &noise[d.noise], d.offset, d.snr_db, stats))
                .collect::<Result<Vec<_>>>()?;
            let n_elems: usize = examples.iter().map(|(x, _)| x.len() * params.output_dim).sum();
            let scale = 1.0 / n_elems as f64;
            let parts = examples
                .par_iter()
                .map(|(x, t)| loss_and_grad_scaled(params, x, t, scale))
                .collect::<Result<Vec<_>>>()?;

            let mut grad = params.zeros_like();
            let mut loss_sum = 0.0;
            for (l, g) in &parts {
                loss_sum += l;
                grad.add_assign(g);
            }
            let loss = loss_sum * scale;
            let norm = grad.global_norm();
            if !loss.is_finite() || !norm.is_finite() {
                return Err(Error::Numerical(format!("non-finite loss or gradient at batch {}", history.len())));
            }
            if cfg.grad_clip_norm > 0.0 && norm > cfg.grad_clip_norm {
                grad.scale(cfg.grad_clip_norm / norm);
            }
            adam.step(params, &grad);
            params.round_to_f32();
            history.push(loss);
        }
    }
    Ok(TrainReport { loss_history: history, batches_per_epoch })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::network::{Mode, NetworkShape};
    use crate::synth::{toy_noise_corpus, toy_speech_corpus};
    use crate::xi::estimate_stats;

    fn setup(n: usize) -> (Vec<AudioSignal>, Vec<AudioSignal>, XiStats, NetworkParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let clean = toy_speech_corpus(&mut rng, n, 0.3, 0.5);
        let noise = toy_noise_corpus(&mut rng, 2.0);
        let stats = estimate_stats(&clean, &noise, &[-5.0, 0.0, 5.0], 1).unwrap();
        let shape = NetworkShape { mode: Mode::Uni, n_blocks: 1, cell_size: 8, input_dim: 257, output_dim: 257 };
        (clean, noise, stats, NetworkParams::init(&shape, 3).unwrap())
    }

    #[test]
    fn snr_levels_grid() {
        let levels = TrainConfig::default().snr_levels().unwrap();
        assert_eq!(levels.len(), 31);
        assert_eq!((levels[0], levels[30]), (-10.0, 20.0));
        assert!(TrainConfig { snr_min: 3.0, snr_max: 2.0, ..Default::default() }.snr_levels().is_err());
    }

    #[test]
    fn history_length_and_determinism() {
        let (clean, noise, stats, init) = setup(7);
        let cfg = TrainConfig { batch_size: 3, epochs: 2, rng_seed: 5, ..Default::default() };
        let mut a = init.clone();
        let ra = train(&mut a, &clean, &noise, &stats, &cfg).unwrap();
        assert_eq!(ra.loss_history.len(), 2 * (7 / 3));
        let mut b = init.clone();
        let rb = train(&mut b, &clean, &noise, &stats, &cfg).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a, b);
        assert_ne!(a, init);
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let (clean, noise, stats, init) = setup(4);
        let cfg = TrainConfig {
            batch_size: 2,
            epochs: 1,
            adam: AdamConfig { learn_rate: 0.0, ..Default::default() },
            ..Default::default()
        };
        let mut p = init.clone();
        train(&mut p, &clean, &noise, &stats, &cfg).unwrap();
        assert_eq!(p, init);
    }

    #[test]
    fn small_corpus_is_rejected() {
        let (clean, noise, stats, init) = setup(3);
        let mut p = init;
        let err = train(&mut p, &clean, &noise, &stats, &TrainConfig::default()).unwrap_err();
        assert!(err.to_string().contains("smaller than batch size"));
    }
}
