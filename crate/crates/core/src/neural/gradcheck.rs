//! Central finite-difference check of the analytic gradient.

use super::network::{backward, loss_cross_entropy, NetworkParams};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub n_values: usize,
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|)` among entries above the floor.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub passed: bool,
}

/// Compares every gradient entry against `(L(p + h) - L(p - h)) / 2h`. An entry passes when
/// its relative error is within `rel_tol` or its absolute error is within `abs_floor`.
pub fn finite_difference_check(
    params: &NetworkParams,
    input: &[Vec<f64>],
    target: &[Vec<f64>],
    step: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<Vec<TensorCheck>> {
    let (_, grad) = backward(params, input, target)?;
    let loss_at = |p: &NetworkParams| -> Result<f64> { loss_cross_entropy(&p.forward(input)?, target) };
    let mut probe = params.clone();
    let mut out = Vec::new();
    for (ti, ((name, _), g)) in params.tensor_specs().into_iter().zip(grad.tensors()).enumerate() {
        let (mut max_rel, mut max_abs, mut passed) = (0.0f64, 0.0f64, true);
        for (i, &analytic) in g.iter().enumerate() {
            let orig = probe.tensors()[ti][i];
            probe.tensors_mut()[ti][i] = orig + step;
            let up = loss_at(&probe)?;
            probe.tensors_mut()[ti][i] = orig - step;
            let down = loss_at(&probe)?;
            probe.tensors_mut()[ti][i] = orig;
            let numeric = (up - down) / (2.0 * step);
            let abs = (analytic - numeric).abs();
            let rel = abs / analytic.abs().max(numeric.abs()).max(f64::MIN_POSITIVE);
            max_abs = max_abs.max(abs);
            if abs > abs_floor {
                max_rel = max_rel.max(rel);
                passed &= rel <= rel_tol;
            }
        }
        out.push(TensorCheck { name, n_values: g.len(), max_rel_err: max_rel, max_abs_err: max_abs, passed });
    }
    Ok(out)
}
