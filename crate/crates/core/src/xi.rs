//! A priori SNR: oracle computation, per-bin dB statistics and the Gaussian-CDF map.
//!
//! The network target is `bar_xi = Phi((xi_db - mu_k) / sigma_k)`, where `(mu_k, sigma_k)`
//! are the per-bin sample mean and standard deviation of oracle `xi_db`. The inverse map
//! is evaluated through `erfc`/`erfcinv` on whichever tail is closer, which keeps
//! `unmap(map(x)) == x` to ~1e-10 dB across +-5 sigma.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::mix::{mix_at_snr, noise_section};
use crate::dsp::{stft, AnalysisConfig, AudioSignal, SpectroGram};
use crate::error::{Error, Result};
use crate::special::{erfc, erfcinv};

/// Floor on the noise power in the oracle ratio.
pub const NOISE_POWER_FLOOR: f64 = 1e-12;
/// Floor applied to linear xi before conversion to dB (-120 dB).
pub const XI_FLOOR: f64 = 1e-12;
/// Clamp applied to mapped estimates before the inverse map.
pub const MAP_CLAMP: f64 = 1e-7;
/// Floor on per-bin standard deviations, in dB.
pub const SIGMA_FLOOR_DB: f64 = 0.1;

pub fn to_db(xi: f64) -> f64 {
    10.0 * xi.max(XI_FLOOR).log10()
}

pub fn from_db(xi_db: f64) -> f64 {
    10f64.powf(xi_db / 10.0)
}

/// One frame of a priori SNR values.
#[derive(Debug, Clone, PartialEq)]
pub struct XiFrame {
    pub xi: Vec<f64>,
    pub xi_db: Vec<f64>,
}

impl XiFrame {
    pub fn from_linear(xi: Vec<f64>) -> Self {
        let xi_db = xi.iter().map(|&v| to_db(v)).collect();
        Self { xi, xi_db }
    }

    pub fn from_db(xi_db: Vec<f64>) -> Self {
        let xi = xi_db.iter().map(|&v| from_db(v)).collect();
        Self { xi, xi_db }
    }

    pub fn mapped(&self, stats: &XiStats) -> Vec<f64> {
        map_xi(&self.xi_db, stats)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct XiStats {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Frames pooled to produce the statistics.
    pub n_samples: u64,
}

impl XiStats {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>, n_samples: u64) -> Result<Self> {
        if mu.len() != sigma.len() || mu.is_empty() {
            return Err(Error::shape(format!(
                "mu has {} bins, sigma has {}",
                mu.len(),
                sigma.len()
            )));
        }
        if let Some(k) = sigma.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::invalid(format!("sigma[{k}] = {} is not positive", sigma[k])));
        }
        if let Some(k) = mu.iter().position(|m| !m.is_finite()) {
            return Err(Error::invalid(format!("mu[{k}] is not finite")));
        }
        Ok(Self { mu, sigma, n_samples })
    }

    pub fn n_bins(&self) -> usize {
        self.mu.len()
    }

    /// Text form: a header (format tag, bin count, sample count) then one row of `mu`
    /// and one row of `sigma`, space separated.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "xistats 1").unwrap();
        writeln!(s, "bins {}", self.n_bins()).unwrap();
        writeln!(s, "samples {}", self.n_samples).unwrap();
        for row in [&self.mu, &self.sigma] {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(s, "{}", line.join(" ")).unwrap();
        }
        s
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let bad = |msg: &str| Error::format(origin, msg.to_string());
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("xistats 1") {
            return Err(bad("missing 'xistats 1' header"));
        }
        let mut field = |name: &str| -> Result<u64> {
            let line = lines.next().ok_or_else(|| bad(&format!("missing '{name}' line")))?;
            let mut it = line.split_whitespace();
            match (it.next(), it.next().and_then(|v| v.parse().ok())) {
                (Some(n), Some(v)) if n == name => Ok(v),
                _ => Err(bad(&format!("malformed '{name}' line"))),
            }
        };
        let bins = field("bins")? as usize;
        let samples = field("samples")?;
        let mut row = |name: &str| -> Result<Vec<f64>> {
            let line = lines.next().ok_or_else(|| bad(&format!("missing {name} row")))?;
            let vals = line
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad(&format!("unparsable value in {name} row")))?;
            if vals.len() != bins {
                return Err(bad(&format!("{name} row has {} values, expected {bins}", vals.len())));
            }
            Ok(vals)
        };
        let mu = row("mu")?;
        let sigma = row("sigma")?;
        Self::new(mu, sigma, samples).map_err(|e| bad(&e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// `xi = |S|^2 / max(|D|^2, 1e-12)` for every cell.
pub fn oracle_xi(clean: &SpectroGram, noise: &SpectroGram) -> Result<Vec<XiFrame>> {
    if !clean.same_shape(noise) {
        return Err(Error::shape(format!(
            "clean {}x{} vs noise {}x{}",
            clean.n_frames, clean.n_bins, noise.n_frames, noise.n_bins
        )));
    }
    Ok(clean
        .mag_frames()
        .zip(noise.mag_frames())
        .map(|(s, d)| {
            XiFrame::from_linear(
                s.iter().zip(d).map(|(s, d)| s * s / (d * d).max(NOISE_POWER_FLOOR)).collect(),
            )
        })
        .collect())
}

/// Standard normal CDF evaluated without losing the small tail.
fn normal_cdf(z: f64) -> f64 {
    let t = z / std::f64::consts::SQRT_2;
    if t < 0.0 {
        0.5 * erfc(-t)
    } else {
        1.0 - 0.5 * erfc(t)
    }
}

fn normal_quantile(p: f64) -> f64 {
    let z = if p < 0.5 { -erfcinv(2.0 * p) } else { erfcinv(2.0 * (1.0 - p)) };
    z * std::f64::consts::SQRT_2
}

/// `bar_xi[k] = (1 + erf((xi_db[k] - mu_k) / (sigma_k sqrt 2))) / 2`.
pub fn map_xi(xi_db: &[f64], stats: &XiStats) -> Vec<f64> {
    debug_assert_eq!(xi_db.len(), stats.n_bins());
    xi_db
        .iter()
        .zip(stats.mu.iter().zip(&stats.sigma))
        .map(|(&x, (&mu, &sigma))| normal_cdf((x - mu) / sigma))
        .collect()
}

/// Inverse map into dB, after clamping estimates to `[1e-7, 1 - 1e-7]`.
pub fn unmap_xi_db(bar_xi: &[f64], stats: &XiStats) -> Vec<f64> {
    debug_assert_eq!(bar_xi.len(), stats.n_bins());
    bar_xi
        .iter()
        .zip(stats.mu.iter().zip(&stats.sigma))
        .map(|(&p, (&mu, &sigma))| {
            let p = if p.is_nan() { 0.5 } else { p.clamp(MAP_CLAMP, 1.0 - MAP_CLAMP) };
            sigma * normal_quantile(p) + mu
        })
        .collect()
}

/// Inverse map to linear a priori SNR.
pub fn unmap_xi(bar_xi: &[f64], stats: &XiStats) -> Vec<f64> {
    unmap_xi_db(bar_xi, stats).into_iter().map(from_db).collect()
}

/// Per-bin running mean and sum of squared deviations (Welford), mergeable in a fixed order.
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(n_bins: usize) -> Self {
        Self { count: 0, mean: vec![0.0; n_bins], m2: vec![0.0; n_bins] }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, values: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(values) {
            let delta = x - *m;
            *m += delta / n;
            *s += delta * (x - *m);
        }
    }

    pub fn merge(&mut self, other: &MomentAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for k in 0..self.mean.len() {
            let delta = other.mean[k] - self.mean[k];
            self.mean[k] += delta * nb / n;
            self.m2[k] += other.m2[k] + delta * delta * na * nb / n;
        }
        self.count += other.count;
    }

    /// Sample mean and (n-1) standard deviation, floored at [`SIGMA_FLOOR_DB`].
    pub fn finish(&self) -> Result<XiStats> {
        if self.count == 0 {
            return Err(Error::EmptyInput);
        }
        let denom = (self.count.max(2) - 1) as f64;
        let sigma = self.m2.iter().map(|&s| (s.max(0.0) / denom).sqrt().max(SIGMA_FLOOR_DB)).collect();
        XiStats::new(self.mean.clone(), sigma, self.count)
    }
}

/// One clean utterance paired with a noise section at a given SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixDraw {
    pub clean: usize,
    pub noise: usize,
    pub offset: usize,
    pub snr_db: f64,
}

/// Draws, for every clean utterance in order, a noise recording, a section offset and an
/// SNR level. Offsets are uniform over the positions where the section fits; noise
/// shorter than the utterance is tiled from offset 0.
pub fn draw_mix(
    rng: &mut impl Rng,
    clean_idx: usize,
    clean_len: usize,
    noise_lens: &[usize],
    snr_levels: &[f64],
) -> MixDraw {
    let noise = rng.random_range(0..noise_lens.len());
    let snr_db = snr_levels[rng.random_range(0..snr_levels.len())];
    let room = noise_lens[noise].saturating_sub(clean_len);
    let offset = rng.random_range(0..=room);
    MixDraw { clean: clean_idx, noise, offset, snr_db }
}

pub fn mixing_schedule(
    clean: &[AudioSignal],
    noise: &[AudioSignal],
    snr_levels: &[f64],
    seed: u64,
) -> Result<Vec<MixDraw>> {
    if clean.is_empty() || noise.is_empty() {
        return Err(Error::EmptyInput);
    }
    if snr_levels.is_empty() {
        return Err(Error::invalid("empty grid"));
    }
    let noise_lens: Vec<usize> = noise.iter().map(AudioSignal::len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(clean
        .iter()
        .enumerate()
        .map(|(i, c)| draw_mix(&mut rng, i, c.len(), &noise_lens, snr_levels))
        .collect())
}

/// Oracle xi frames for one scheduled mixture.
pub fn oracle_xi_for_draw(
    clean: &[AudioSignal],
    noise: &[AudioSignal],
    draw: &MixDraw,
    config: &AnalysisConfig,
) -> Result<Vec<XiFrame>> {
    let c = &clean[draw.clean];
    let section = noise_section(&noise[draw.noise], draw.offset, c.len())?;
    let mix = mix_at_snr(c, &section, draw.snr_db, 0)?;
    oracle_xi(&stft(&mix.clean, config)?, &stft(&mix.noise, config)?)
}

/// Statistics over an explicit schedule. Per-draw moments are computed in parallel and
/// merged in schedule order, so the result does not depend on the thread count.
pub fn stats_from_schedule(
    clean: &[AudioSignal],
    noise: &[AudioSignal],
    schedule: &[MixDraw],
    config: &AnalysisConfig,
) -> Result<XiStats> {
    let partials: Vec<MomentAccumulator> = schedule
        .par_iter()
        .map(|draw| {
            let mut acc = MomentAccumulator::new(config.n_bins());
            for frame in oracle_xi_for_draw(clean, noise, draw, config)? {
                acc.push(&frame.xi_db);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = MomentAccumulator::new(config.n_bins());
    for p in &partials {
        total.merge(p);
    }
    total.finish()
}

/// Pooled per-bin statistics of oracle `xi_db` over one random mixture per clean utterance.
pub fn estimate_stats(
    clean: &[AudioSignal],
    noise: &[AudioSignal],
    snr_levels: &[f64],
    seed: u64,
) -> Result<XiStats> {
    let schedule = mixing_schedule(clean, noise, snr_levels, seed)?;
    stats_from_schedule(clean, noise, &schedule, &AnalysisConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::erf;

    fn flat_stats(mu: f64, sigma: f64, k: usize) -> XiStats {
        XiStats::new(vec![mu; k], vec![sigma; k], 1).unwrap()
    }

    fn spec_from(mags: &[Vec<f64>]) -> SpectroGram {
        let cfg = AnalysisConfig::default();
        let mut s = SpectroGram::zeros(mags.len(), cfg);
        for (l, m) in mags.iter().enumerate() {
            s.mag_frame_mut(l).copy_from_slice(m);
        }
        s
    }

    #[test]
    fn oracle_xi_cases() {
        let clean = spec_from(&[vec![2.0; 257], vec![1.0; 257]]);
        let noise = spec_from(&[vec![1.0; 257], vec![0.0; 257]]);
        let xi = oracle_xi(&clean, &noise).unwrap();
        assert_eq!(xi[0].xi[3], 4.0);
        assert_eq!(xi[1].xi[3], 1e12);
        assert!((xi[1].xi_db[3] - 120.0).abs() < 1e-9);

        let same = oracle_xi(&clean, &clean).unwrap();
        assert!(same[0].xi.iter().all(|&v| v == 1.0));
        assert!(same[0].xi_db.iter().all(|&v| v == 0.0));

        let short = spec_from(&[vec![1.0; 257]]);
        assert!(matches!(oracle_xi(&clean, &short), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn map_examples() {
        let stats = flat_stats(-3.0, 7.0, 4);
        let bar = map_xi(&[-3.0, -3.0 + 7.0 * 2f64.sqrt(), -1e6, 1e6], &stats);
        assert_eq!(bar[0], 0.5);
        assert!((bar[1] - 0.921_350_396_474_857_4).abs() < 1e-15);
        assert!((bar[1] - (1.0 + erf(1.0)) / 2.0).abs() < 1e-15);
        assert_eq!(bar[2], 0.0);
        assert_eq!(bar[3], 1.0);
    }

    #[test]
    fn unmap_examples() {
        let stats = flat_stats(-3.0, 7.0, 3);
        let db = unmap_xi_db(&[0.5, 0.921_350_396_474_857_4, 1.0], &stats);
        assert!((db[0] + 3.0).abs() < 1e-12);
        assert!((db[1] - (-3.0 + 7.0 * 2f64.sqrt())).abs() < 1e-9);
        // Saturated outputs are clamped, so the estimate stays finite.
        assert!(db[2].is_finite());
        assert!(unmap_xi(&[0.0, 1.0, 0.5], &stats).iter().all(|&x| x > 0.0 && x.is_finite()));
    }

    #[test]
    fn round_trip_on_db_grid() {
        let stats = flat_stats(0.0, 10.0, 1);
        for i in 0..=8000 {
            let x = -40.0 + i as f64 * 0.01;
            let back = unmap_xi_db(&map_xi(&[x], &stats), &stats)[0];
            assert!((back - x).abs() <= 1e-9, "{x} -> {back}");
        }
    }

    #[test]
    fn accumulator_hand_computed() {
        // Two frames, two bins: bin0 {1, 3} -> mean 2, sd sqrt(2); bin1 {-4, -4} -> sd floored.
        let mut acc = MomentAccumulator::new(2);
        acc.push(&[1.0, -4.0]);
        acc.push(&[3.0, -4.0]);
        let s = acc.finish().unwrap();
        assert_eq!(s.mu, vec![2.0, -4.0]);
        assert!((s.sigma[0] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.sigma[1], SIGMA_FLOOR_DB);
        assert_eq!(s.n_samples, 2);

        let mut a = MomentAccumulator::new(1);
        let mut b = MomentAccumulator::new(1);
        let mut all = MomentAccumulator::new(1);
        for (i, v) in [0.5, 2.0, -1.0, 7.0, 3.5].iter().enumerate() {
            if i < 2 { a.push(&[*v]) } else { b.push(&[*v]) }
            all.push(&[*v]);
        }
        a.merge(&b);
        let (m, s) = (a.finish().unwrap(), all.finish().unwrap());
        assert!((m.mu[0] - s.mu[0]).abs() < 1e-14);
        assert!((m.sigma[0] - s.sigma[0]).abs() < 1e-14);
    }

    #[test]
    fn stats_file_round_trip_and_errors() {
        let s = XiStats::new(vec![1.5, -2.25e-3], vec![0.1, 17.0], 42).unwrap();
        let back = XiStats::parse(&s.to_text(), Path::new("x")).unwrap();
        assert_eq!(s, back);
        assert!(XiStats::parse("xistats 1\nbins 2\nsamples 1\n1 2\n0.1\n", Path::new("x")).is_err());
        assert!(XiStats::new(vec![0.0], vec![0.0], 1).is_err());
    }
}
