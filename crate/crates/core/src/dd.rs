//! Decision-directed a priori SNR estimation with a recursive noise-power tracker.
//!
//! The tracker is initialised with the mean periodogram of the first `init_frames`
//! frames and then follows `lambda <- a lambda + (1 - a) |X|^2` in bins where
//! `|X|^2 < beta lambda`, leaving the other bins untouched.
//!
//! On stationary noise this gate discards the upper tail of the exponentially
//! distributed periodogram, so the estimate drifts low over time (about 20% after 50
//! frames with `beta = 2`). Larger `beta` tracks noise better but also absorbs
//! stationary speech into the noise estimate; `beta = 2` keeps the DD estimate close
//! to the true SNR on stationary mixtures.

use crate::dsp::{istft, stft, AnalysisConfig, AudioSignal};
use crate::error::{Error, Result};
use crate::gain::{apply_gain_values, GainRule};
use crate::xi::XiFrame;

/// Lower bound on tracked noise power.
pub const LAMBDA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    pub alpha_n: f64,
    pub beta: f64,
    pub init_frames: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self { alpha_n: 0.98, beta: 2.0, init_frames: 10 }
    }
}

#[derive(Debug, Clone)]
pub struct NoiseTracker {
    config: TrackerConfig,
    lambda_d: Option<Vec<f64>>,
}

impl NoiseTracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        if !(config.alpha_n > 0.0 && config.alpha_n < 1.0) {
            return Err(Error::invalid(format!("alpha_n must be in (0, 1), got {}", config.alpha_n)));
        }
        if !(config.beta > 0.0) || config.init_frames == 0 {
            return Err(Error::invalid("beta must be positive and init_frames >= 1"));
        }
        Ok(Self { config, lambda_d: None })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Sets the estimate to the mean of the given power frames (at most `init_frames`).
    pub fn initialize(&mut self, power_frames: &[Vec<f64>]) -> Result<()> {
        let used = &power_frames[..power_frames.len().min(self.config.init_frames)];
        let Some(first) = used.first() else {
            return Err(Error::EmptyInput);
        };
        let mut lambda = vec![0.0; first.len()];
        for frame in used {
            if frame.len() != lambda.len() {
                return Err(Error::shape("initialisation frames differ in length"));
            }
            for (l, p) in lambda.iter_mut().zip(frame) {
                *l += p;
            }
        }
        let n = used.len() as f64;
        lambda.iter_mut().for_each(|l| *l = (*l / n).max(LAMBDA_FLOOR));
        self.lambda_d = Some(lambda);
        Ok(())
    }

    pub fn is_initialized(&self) -> bool {
        self.lambda_d.is_some()
    }

    pub fn lambda_d(&self) -> Option<&[f64]> {
        self.lambda_d.as_deref()
    }

    pub fn update(&mut self, noisy_power: &[f64]) -> Result<&[f64]> {
        let TrackerConfig { alpha_n, beta, .. } = self.config;
        let lambda = self
            .lambda_d
            .as_mut()
            .ok_or_else(|| Error::invalid("noise tracker used before initialisation"))?;
        if noisy_power.len() != lambda.len() {
            return Err(Error::shape(format!("{} bins for a {}-bin tracker", noisy_power.len(), lambda.len())));
        }
        for (l, &p) in lambda.iter_mut().zip(noisy_power) {
            if p < beta * *l {
                *l = (alpha_n * *l + (1.0 - alpha_n) * p).max(LAMBDA_FLOOR);
            }
        }
        Ok(lambda)
    }
}

#[derive(Debug, Clone)]
pub struct DdState {
    pub alpha_dd: f64,
    /// Enhanced amplitude squared from the previous frame.
    pub prev_amp_sq: Vec<f64>,
}

impl DdState {
    pub fn new(alpha_dd: f64, n_bins: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha_dd) {
            return Err(Error::invalid(format!("alpha_dd must be in [0, 1), got {alpha_dd}")));
        }
        Ok(Self { alpha_dd, prev_amp_sq: vec![0.0; n_bins] })
    }
}

/// Output of one decision-directed step.
#[derive(Debug, Clone)]
pub struct DdStep {
    pub xi: XiFrame,
    pub gamma: Vec<f64>,
    pub gain: Vec<f64>,
}

/// `xi = a * prev_amp_sq / lambda + (1 - a) max(gamma - 1, 0)`, then the state is
/// advanced with the enhanced amplitude squared `(G |X|)^2` under `rule`.
pub fn dd_xi(state: &mut DdState, noisy_power: &[f64], lambda_d: &[f64], rule: GainRule) -> Result<DdStep> {
    let k = noisy_power.len();
    if lambda_d.len() != k || state.prev_amp_sq.len() != k {
        return Err(Error::shape("DD inputs differ in bin count"));
    }
    let a = state.alpha_dd;
    let mut xi = Vec::with_capacity(k);
    let mut gamma = Vec::with_capacity(k);
    let mut gain = Vec::with_capacity(k);
    for j in 0..k {
        let lam = lambda_d[j];
        if !(lam > 0.0) {
            return Err(Error::invalid(format!("lambda_d[{j}] = {lam} is not positive")));
        }
        let g = noisy_power[j] / lam;
        let x = a * state.prev_amp_sq[j] / lam + (1.0 - a) * (g - 1.0).max(0.0);
        // STSA needs gamma > 0; a silent bin has no amplitude to scale anyway.
        let gv = rule.gain(x, g.max(f64::MIN_POSITIVE))?;
        state.prev_amp_sq[j] = gv * gv * noisy_power[j];
        xi.push(x);
        gamma.push(g);
        gain.push(gv);
    }
    Ok(DdStep { xi: XiFrame::from_linear(xi), gamma, gain })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdConfig {
    pub alpha_dd: f64,
    pub tracker: TrackerConfig,
}

impl Default for DdConfig {
    fn default() -> Self {
        Self { alpha_dd: 0.98, tracker: TrackerConfig::default() }
    }
}

/// Per-frame DD estimates for a whole power spectrogram.
pub fn dd_track(power: &[Vec<f64>], rule: GainRule, config: &DdConfig) -> Result<Vec<DdStep>> {
    let Some(first) = power.first() else {
        return Err(Error::EmptyInput);
    };
    let mut tracker = NoiseTracker::new(config.tracker)?;
    tracker.initialize(power)?;
    let mut state = DdState::new(config.alpha_dd, first.len())?;
    let mut steps = Vec::with_capacity(power.len());
    for (l, p) in power.iter().enumerate() {
        // The initialisation frames are already folded into lambda_d.
        if l >= config.tracker.init_frames {
            tracker.update(p)?;
        }
        let lambda = tracker.lambda_d().expect("initialised above");
        steps.push(dd_xi(&mut state, p, lambda, rule)?);
    }
    Ok(steps)
}

/// Full baseline: STFT, noise tracking and DD per frame, gain, and resynthesis with
/// the noisy phase. The output has the input's length.
pub fn enhance_dd(noisy: &AudioSignal, rule: GainRule, config: &DdConfig) -> Result<AudioSignal> {
    let analysis = AnalysisConfig::default();
    let spec = stft(noisy, &analysis)?;
    let steps = dd_track(&spec.power_frames(), rule, config)?;
    let gains: Vec<f64> = steps.iter().flat_map(|s| s.gain.iter().copied()).collect();
    istft(&apply_gain_values(&spec, &gains)?, noisy.len())
}
