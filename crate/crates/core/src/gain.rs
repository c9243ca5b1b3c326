//! MMSE gain rules, applied element-wise to the noisy magnitude spectrum.

use std::fmt;
use std::str::FromStr;

use crate::dsp::SpectroGram;
use crate::error::{Error, Result};
use crate::special::{bessel_i0e, bessel_i1e};
use crate::xi::XiFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum GainRule {
    Wiener,
    /// Square-root Wiener filter.
    #[default]
    Srwf,
    MmseStsa,
}

impl GainRule {
    pub fn needs_gamma(self) -> bool {
        matches!(self, GainRule::MmseStsa)
    }

    /// Gain for one cell; `gamma` is only read by MMSE-STSA.
    pub fn gain(self, xi: f64, gamma: f64) -> Result<f64> {
        match self {
            GainRule::Wiener => Ok(gain_wiener(xi)),
            GainRule::Srwf => Ok(gain_srwf(xi)),
            GainRule::MmseStsa => gain_mmse_stsa(xi, gamma),
        }
    }
}

impl FromStr for GainRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wiener" | "wf" => Ok(GainRule::Wiener),
            "srwf" => Ok(GainRule::Srwf),
            "mmse-stsa" | "stsa" => Ok(GainRule::MmseStsa),
            other => Err(Error::invalid(format!("unknown gain rule '{other}'"))),
        }
    }
}

impl fmt::Display for GainRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GainRule::Wiener => "wiener",
            GainRule::Srwf => "srwf",
            GainRule::MmseStsa => "mmse-stsa",
        })
    }
}

pub fn gain_wiener(xi: f64) -> f64 {
    let xi = xi.max(0.0);
    if xi.is_infinite() {
        return 1.0;
    }
    xi / (1.0 + xi)
}

pub fn gain_srwf(xi: f64) -> f64 {
    gain_wiener(xi).sqrt()
}

/// Above this `nu` the STSA gain is replaced by its Wiener limit.
const STSA_NU_LIMIT: f64 = 700.0;

/// Short-time spectral amplitude estimator:
/// `G = (sqrt(pi)/2) (sqrt(nu)/gamma) e^{-nu/2} [(1 + nu) I0(nu/2) + nu I1(nu/2)]`
/// with `nu = xi gamma / (1 + xi)`.
pub fn gain_mmse_stsa(xi: f64, gamma: f64) -> Result<f64> {
    if !xi.is_finite() || !gamma.is_finite() {
        return Err(Error::Numerical(format!("non-finite STSA input xi={xi} gamma={gamma}")));
    }
    if xi < 0.0 || gamma <= 0.0 {
        return Err(Error::invalid(format!("STSA requires xi >= 0, gamma > 0 (xi={xi}, gamma={gamma})")));
    }
    let nu = xi * gamma / (1.0 + xi);
    if nu > STSA_NU_LIMIT {
        return Ok(gain_wiener(xi));
    }
    let half = nu / 2.0;
    // e^{-nu/2} I_n(nu/2) is exactly the scaled Bessel value.
    let bracket = (1.0 + nu) * bessel_i0e(half) + nu * bessel_i1e(half);
    Ok(std::f64::consts::PI.sqrt() / 2.0 * nu.sqrt() / gamma * bracket)
}

/// `|S_hat| = |X| * G`, with the phase copied from the input.
pub fn apply_gain(
    noisy: &SpectroGram,
    xi_frames: &[XiFrame],
    rule: GainRule,
    gamma_frames: Option<&[Vec<f64>]>,
) -> Result<SpectroGram> {
    if xi_frames.len() != noisy.n_frames {
        return Err(Error::shape(format!("{} xi frames for {} spectrogram frames", xi_frames.len(), noisy.n_frames)));
    }
    if rule.needs_gamma() {
        match gamma_frames {
            None => return Err(Error::invalid("MMSE-STSA requires a posteriori SNR frames")),
            Some(g) if g.len() != noisy.n_frames => {
                return Err(Error::shape(format!("{} gamma frames for {} spectrogram frames", g.len(), noisy.n_frames)))
            }
            _ => {}
        }
    }
    let mut gains = Vec::with_capacity(noisy.magnitude.len());
    for (l, frame) in xi_frames.iter().enumerate() {
        if frame.xi.len() != noisy.n_bins {
            return Err(Error::shape(format!("xi frame {l} has {} bins", frame.xi.len())));
        }
        let gamma = gamma_frames.map(|g| &g[l]);
        for (k, &xi) in frame.xi.iter().enumerate() {
            let g = gamma.map_or(1.0, |g| g[k]);
            gains.push(rule.gain(xi, g)?);
        }
    }
    apply_gain_values(noisy, &gains)
}

/// Multiplies every magnitude by the corresponding entry of a flat gain array.
pub fn apply_gain_values(noisy: &SpectroGram, gains: &[f64]) -> Result<SpectroGram> {
    if gains.len() != noisy.magnitude.len() {
        return Err(Error::shape(format!("{} gains for {} cells", gains.len(), noisy.magnitude.len())));
    }
    let mut out = noisy.clone();
    for (m, g) in out.magnitude.iter_mut().zip(gains) {
        *m *= g;
    }
    Ok(out)
}
