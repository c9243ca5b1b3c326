//! Residual (Bi)LSTM a priori SNR estimator: inference, exact gradients and training.

pub mod adam;
pub mod gradcheck;
pub mod io;
pub mod lstm;
pub mod network;
pub mod train;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{finite_difference_check, TensorCheck};
pub use io::{load_model, model_from_bytes, model_to_bytes, save_model};
pub use lstm::{lstm_step, LstmCellParams};
pub use network::{backward, loss_cross_entropy, res_block_forward, Dense, Mode, NetworkParams, NetworkShape, ResBlock};
pub use train::{make_example, train, TrainConfig, TrainReport};

use crate::dsp::{stft, AnalysisConfig, AudioSignal, SpectroGram};
use crate::error::{Error, Result};
use crate::xi::{unmap_xi_db, XiFrame, XiStats};

/// A priori SNR estimates for an already analysed noisy signal.
pub fn infer_xi_spec(params: &NetworkParams, noisy: &SpectroGram, stats: &XiStats) -> Result<Vec<XiFrame>> {
    if stats.n_bins() != params.output_dim || noisy.n_bins != params.input_dim {
        return Err(Error::shape(format!(
            "network maps {} -> {}, spectrogram has {} bins, stats {}",
            params.input_dim,
            params.output_dim,
            noisy.n_bins,
            stats.n_bins()
        )));
    }
    let input: Vec<Vec<f64>> = noisy.mag_frames().map(<[f64]>::to_vec).collect();
    let bar = params.forward(&input)?;
    Ok(bar.iter().map(|b| XiFrame::from_db(unmap_xi_db(b, stats))).collect())
}

/// STFT, forward pass and inverse map.
pub fn infer_xi(params: &NetworkParams, noisy: &AudioSignal, stats: &XiStats) -> Result<Vec<XiFrame>> {
    infer_xi_spec(params, &stft(noisy, &AnalysisConfig::default())?, stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_half_output_unmaps_to_mean() {
        let shape = NetworkShape::default();
        let mut p = NetworkParams::init(&shape, 2).unwrap();
        p.out = Dense::zeros(shape.cell_size, 257);
        let mu: Vec<f64> = (0..257).map(|k| k as f64 * 0.1 - 10.0).collect();
        let stats = XiStats::new(mu.clone(), vec![8.0; 257], 1).unwrap();
        let x = AudioSignal::new((0..3000).map(|i| (i as f64 * 0.05).sin() * 0.2).collect()).unwrap();
        let xi = infer_xi(&p, &x, &stats).unwrap();
        for f in &xi {
            for (a, b) in f.xi_db.iter().zip(&mu) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!(f.xi.iter().all(|&v| v > 0.0));
        }
        assert_eq!(xi, infer_xi(&p, &x, &stats).unwrap());
    }
}
