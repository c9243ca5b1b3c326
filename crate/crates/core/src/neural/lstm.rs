//! LSTM cell without peepholes. Gates are stacked `[i; f; g; o]` along the rows of the
//! weight matrices.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub input_dim: usize,
    pub cell_size: usize,
    /// `4H x D`, row-major.
    pub w_x: Vec<f64>,
    /// `4H x H`, row-major.
    pub w_h: Vec<f64>,
    /// `4H`.
    pub bias: Vec<f64>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `y += W x` for a row-major `rows x x.len()` matrix.
pub(crate) fn matvec_acc(w: &[f64], x: &[f64], y: &mut [f64]) {
    let d = x.len();
    for (r, out) in y.iter_mut().enumerate() {
        let row = &w[r * d..(r + 1) * d];
        *out += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `x_grad += W^T dy`.
pub(crate) fn matvec_t_acc(w: &[f64], dy: &[f64], x_grad: &mut [f64]) {
    let d = x_grad.len();
    for (r, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &w[r * d..(r + 1) * d];
        for (xg, a) in x_grad.iter_mut().zip(row) {
            *xg += g * a;
        }
    }
}

/// `W_grad += dy x^T`.
pub(crate) fn outer_acc(w_grad: &mut [f64], dy: &[f64], x: &[f64]) {
    let d = x.len();
    for (r, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        for (wg, a) in w_grad[r * d..(r + 1) * d].iter_mut().zip(x) {
            *wg += g * a;
        }
    }
}

impl LstmCellParams {
    pub fn zeros(input_dim: usize, cell_size: usize) -> Self {
        let g = 4 * cell_size;
        Self {
            input_dim,
            cell_size,
            w_x: vec![0.0; g * input_dim],
            w_h: vec![0.0; g * cell_size],
            bias: vec![0.0; g],
        }
    }

    fn check(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<()> {
        let hs = self.cell_size;
        if x.len() != self.input_dim || h.len() != hs || c.len() != hs {
            return Err(Error::shape(format!(
                "lstm_step: x {} (want {}), h {} and c {} (want {hs})",
                x.len(),
                self.input_dim,
                h.len(),
                c.len()
            )));
        }
        Ok(())
    }
}

/// Everything a step needs to be differentiated later.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gates `[i; f; g; o]`.
    pub gates: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

pub(crate) fn step_cached(p: &LstmCellParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, Vec<f64>, StepCache) {
    let hs = p.cell_size;
    let mut z = p.bias.clone();
    matvec_acc(&p.w_x, x, &mut z);
    matvec_acc(&p.w_h, h_prev, &mut z);
    for (j, v) in z.iter_mut().enumerate() {
        *v = if (2 * hs..3 * hs).contains(&j) { v.tanh() } else { sigmoid(*v) };
    }
    let (i, f, g, o) = (&z[..hs], &z[hs..2 * hs], &z[2 * hs..3 * hs], &z[3 * hs..]);
    let c: Vec<f64> = (0..hs).map(|j| f[j] * c_prev[j] + i[j] * g[j]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..hs).map(|j| o[j] * tanh_c[j]).collect();
    let cache = StepCache { x: x.to_vec(), h_prev: h_prev.to_vec(), c_prev: c_prev.to_vec(), gates: z, tanh_c };
    (h, c, cache)
}

/// One time step: returns `(h_t, c_t)`.
pub fn lstm_step(params: &LstmCellParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    params.check(x, h_prev, c_prev)?;
    let (h, c, _) = step_cached(params, x, h_prev, c_prev);
    Ok((h, c))
}

/// Runs the cell over `xs` from zero state, returning every hidden state and the caches.
pub(crate) fn run_sequence(p: &LstmCellParams, xs: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<StepCache>) {
    let mut h = vec![0.0; p.cell_size];
    let mut c = vec![0.0; p.cell_size];
    let mut hs = Vec::with_capacity(xs.len());
    let mut caches = Vec::with_capacity(xs.len());
    for x in xs {
        let (h_new, c_new, cache) = step_cached(p, x, &h, &c);
        hs.push(h_new.clone());
        caches.push(cache);
        h = h_new;
        c = c_new;
    }
    (hs, caches)
}

/// BPTT through a sequence run. `dh` holds the loss gradient arriving at each `h_t`
/// from above; returns the gradient with respect to each input `x_t`.
pub(crate) fn backward_sequence(
    p: &LstmCellParams,
    caches: &[StepCache],
    dh: &[Vec<f64>],
    grad: &mut LstmCellParams,
) -> Vec<Vec<f64>> {
    let hs = p.cell_size;
    let mut dh_next = vec![0.0; hs];
    let mut dc_next = vec![0.0; hs];
    let mut dxs = vec![Vec::new(); caches.len()];
    let mut dz = vec![0.0; 4 * hs];
    for t in (0..caches.len()).rev() {
        let cache = &caches[t];
        let gt = &cache.gates;
        for j in 0..hs {
            let (i, f, g, o) = (gt[j], gt[hs + j], gt[2 * hs + j], gt[3 * hs + j]);
            let tc = cache.tanh_c[j];
            let dhj = dh[t][j] + dh_next[j];
            let dc = dc_next[j] + dhj * o * (1.0 - tc * tc);
            dz[j] = dc * g * i * (1.0 - i);
            dz[hs + j] = dc * cache.c_prev[j] * f * (1.0 - f);
            dz[2 * hs + j] = dc * i * (1.0 - g * g);
            dz[3 * hs + j] = dhj * tc * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        outer_acc(&mut grad.w_x, &dz, &cache.x);
        outer_acc(&mut grad.w_h, &dz, &cache.h_prev);
        for (b, d) in grad.bias.iter_mut().zip(&dz) {
            *b += d;
        }
        let mut dx = vec![0.0; p.input_dim];
        matvec_t_acc(&p.w_x, &dz, &mut dx);
        dxs[t] = dx;
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        matvec_t_acc(&p.w_h, &dz, &mut dh_next);
    }
    dxs
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_give_zero_output() {
        let p = LstmCellParams::zeros(3, 4);
        let (h, c) = lstm_step(&p, &[1.0, -2.0, 0.5], &[0.0; 4], &[0.0; 4]).unwrap();
        assert_eq!(h, vec![0.0; 4]);
        assert_eq!(c, vec![0.0; 4]);
        assert!(lstm_step(&p, &[1.0], &[0.0; 4], &[0.0; 4]).is_err());
    }

    #[test]
    fn saturated_gates_hold_memory() {
        let mut p = LstmCellParams::zeros(2, 3);
        for j in 0..3 {
            p.bias[j] = -50.0; // input gate shut
            p.bias[3 + j] = 50.0; // forget gate open
        }
        let c_prev = [0.3, -1.2, 2.0];
        let (_, c) = lstm_step(&p, &[5.0, -5.0], &[0.1, 0.2, 0.3], &c_prev).unwrap();
        for (a, b) in c.iter().zip(&c_prev) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    /// Gate equations written out longhand with separate per-gate matrices.
    #[test]
    fn matches_longhand_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (d, hs) = (3, 2);
        let mut p = LstmCellParams::zeros(d, hs);
        for v in p.w_x.iter_mut().chain(p.w_h.iter_mut()).chain(p.bias.iter_mut()) {
            *v = rng.random_range(-0.5..0.5);
        }
        let x = [0.2, -0.7, 1.1];
        let h0 = [0.05, -0.3];
        let c0 = [0.4, 0.1];
        let (h, c) = lstm_step(&p, &x, &h0, &c0).unwrap();

        let pre = |gate: usize, j: usize| -> f64 {
            let r = gate * hs + j;
            let mut s = p.bias[r];
            for k in 0..d {
                s += p.w_x[r * d + k] * x[k];
            }
            for k in 0..hs {
                s += p.w_h[r * hs + k] * h0[k];
            }
            s
        };
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        for j in 0..hs {
            let (i, f, g, o) = (sig(pre(0, j)), sig(pre(1, j)), pre(2, j).tanh(), sig(pre(3, j)));
            let cj = f * c0[j] + i * g;
            assert!((c[j] - cj).abs() < 1e-14);
            assert!((h[j] - o * cj.tanh()).abs() < 1e-14);
        }
    }
}
