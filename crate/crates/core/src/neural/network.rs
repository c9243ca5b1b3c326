//! Residual (Bi)LSTM a priori SNR estimator.
//!
//! `|X_l|` → dense → layer norm → ReLU → `n_blocks` residual blocks → dense → sigmoid.
//! A unidirectional block adds its LSTM output to its input. A bidirectional block adds
//! the outputs of a forward cell and a cell run over the time-reversed sequence.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lstm::{backward_sequence, matvec_acc, matvec_t_acc, outer_acc, run_sequence, sigmoid, LstmCellParams, StepCache};
use crate::error::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-6;
/// Predictions are clamped to `[PRED_CLAMP, 1 - PRED_CLAMP]` inside the loss.
pub const PRED_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Uni,
    Bi,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uni" => Ok(Mode::Uni),
            "bi" => Ok(Mode::Bi),
            other => Err(Error::invalid(format!("unknown network mode '{other}' (uni|bi)"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Uni => "uni",
            Mode::Bi => "bi",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    /// `n_out x n_in`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self { n_in, n_out, weight: vec![0.0; n_in * n_out], bias: vec![0.0; n_out] }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.bias.clone();
        matvec_acc(&self.weight, x, &mut y);
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResBlock {
    pub fwd: LstmCellParams,
    /// Present only in bidirectional mode.
    pub bwd: Option<LstmCellParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub mode: Mode,
    pub input_dim: usize,
    pub output_dim: usize,
    pub cell_size: usize,
    pub fc_in: Dense,
    pub ln_gain: Vec<f64>,
    pub ln_bias: Vec<f64>,
    pub blocks: Vec<ResBlock>,
    pub out: Dense,
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkShape {
    pub mode: Mode,
    pub n_blocks: usize,
    pub cell_size: usize,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl Default for NetworkShape {
    fn default() -> Self {
        Self { mode: Mode::Uni, n_blocks: 2, cell_size: 64, input_dim: 257, output_dim: 257 }
    }
}

impl NetworkShape {
    pub fn validate(&self) -> Result<()> {
        if self.n_blocks == 0 || self.cell_size == 0 || self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::invalid(format!("degenerate network shape {self:?}")));
        }
        Ok(())
    }
}

fn round_f32(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = *x as f32 as f64);
}

fn glorot(rng: &mut impl Rng, v: &mut [f64], fan_in: usize, fan_out: usize) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    v.iter_mut().for_each(|x| *x = rng.random_range(-limit..limit));
}

impl NetworkParams {
    /// All-zero parameters of the given shape (layer-norm gain included).
    pub fn zeros(shape: &NetworkShape) -> Result<Self> {
        shape.validate()?;
        let c = shape.cell_size;
        let blocks = (0..shape.n_blocks)
            .map(|_| ResBlock {
                fwd: LstmCellParams::zeros(c, c),
                bwd: (shape.mode == Mode::Bi).then(|| LstmCellParams::zeros(c, c)),
            })
            .collect();
        Ok(Self {
            mode: shape.mode,
            input_dim: shape.input_dim,
            output_dim: shape.output_dim,
            cell_size: c,
            fc_in: Dense::zeros(shape.input_dim, c),
            ln_gain: vec![0.0; c],
            ln_bias: vec![0.0; c],
            blocks,
            out: Dense::zeros(c, shape.output_dim),
        })
    }

    /// Glorot-uniform weights, zero biases except a forget-gate bias of +1, unit
    /// layer-norm gain. Values are rounded to f32 so the model file is exact.
    pub fn init(shape: &NetworkShape, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(shape)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, k_in, k_out) = (shape.cell_size, shape.input_dim, shape.output_dim);
        glorot(&mut rng, &mut p.fc_in.weight, k_in, c);
        p.ln_gain.iter_mut().for_each(|g| *g = 1.0);
        for block in p.blocks.iter_mut() {
            for cell in std::iter::once(&mut block.fwd).chain(block.bwd.as_mut()) {
                glorot(&mut rng, &mut cell.w_x, c, 4 * c);
                glorot(&mut rng, &mut cell.w_h, c, 4 * c);
                cell.bias[c..2 * c].iter_mut().for_each(|b| *b = 1.0);
            }
        }
        glorot(&mut rng, &mut p.out.weight, c, k_out);
        p.round_to_f32();
        Ok(p)
    }

    pub fn shape(&self) -> NetworkShape {
        NetworkShape {
            mode: self.mode,
            n_blocks: self.blocks.len(),
            cell_size: self.cell_size,
            input_dim: self.input_dim,
            output_dim: self.output_dim,
        }
    }

    pub fn round_to_f32(&mut self) {
        for t in self.tensors_mut() {
            round_f32(t);
        }
    }

    /// Names and shapes of every tensor, in storage order.
    pub fn tensor_specs(&self) -> Vec<(String, Vec<usize>)> {
        let (c, k_in, k_out) = (self.cell_size, self.input_dim, self.output_dim);
        let mut v = vec![
            ("fc_in.weight".to_string(), vec![c, k_in]),
            ("fc_in.bias".to_string(), vec![c]),
            ("fc_in.ln_gain".to_string(), vec![c]),
            ("fc_in.ln_bias".to_string(), vec![c]),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            let dirs: &[&str] = if b.bwd.is_some() { &["fwd", "bwd"] } else { &["fwd"] };
            for d in dirs {
                v.push((format!("block{i}.{d}.w_x"), vec![4 * c, c]));
                v.push((format!("block{i}.{d}.w_h"), vec![4 * c, c]));
                v.push((format!("block{i}.{d}.bias"), vec![4 * c]));
            }
        }
        v.push(("out.weight".to_string(), vec![k_out, c]));
        v.push(("out.bias".to_string(), vec![k_out]));
        v
    }

    /// Tensor data in the same order as [`Self::tensor_specs`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![&self.fc_in.weight, &self.fc_in.bias, &self.ln_gain, &self.ln_bias];
        for b in &self.blocks {
            for cell in std::iter::once(&b.fwd).chain(b.bwd.as_ref()) {
                v.extend([&cell.w_x[..], &cell.w_h[..], &cell.bias[..]]);
            }
        }
        v.extend([&self.out.weight[..], &self.out.bias[..]]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut v = vec![&mut self.fc_in.weight, &mut self.fc_in.bias, &mut self.ln_gain, &mut self.ln_bias];
        for b in self.blocks.iter_mut() {
            for cell in std::iter::once(&mut b.fwd).chain(b.bwd.as_mut()) {
                v.push(&mut cell.w_x);
                v.push(&mut cell.w_h);
                v.push(&mut cell.bias);
            }
        }
        v.push(&mut self.out.weight);
        v.push(&mut self.out.bias);
        v
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Zeros with the same structure, used as a gradient or optimizer-moment container.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.iter_mut().for_each(|x| *x = 0.0);
        }
        z
    }

    pub fn add_assign(&mut self, other: &NetworkParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }

    fn check_input(&self, input: &[Vec<f64>]) -> Result<()> {
        if input.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (l, f) in input.iter().enumerate() {
            if f.len() != self.input_dim {
                return Err(Error::shape(format!("frame {l} has {} values, network expects {}", f.len(), self.input_dim)));
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("non-finite network input in frame {l}")));
            }
        }
        Ok(())
    }

    /// Mapped a priori SNR estimates, one row of `output_dim` values in (0, 1) per frame.
    pub fn forward(&self, input: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_input(input)?;
        Ok(self.forward_cached(input).pred)
    }

    fn forward_cached(&self, input: &[Vec<f64>]) -> ForwardCache {
        let c = self.cell_size;
        let mut ln = Vec::with_capacity(input.len());
        let mut act = Vec::with_capacity(input.len());
        for x in input {
            let a = self.fc_in.apply(x);
            let mean = a.iter().sum::<f64>() / c as f64;
            let var = a.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let inv_std = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            let xhat: Vec<f64> = a.iter().map(|v| (v - mean) * inv_std).collect();
            let y: Vec<f64> = (0..c).map(|j| self.ln_gain[j] * xhat[j] + self.ln_bias[j]).collect();
            act.push(y.iter().map(|v| v.max(0.0)).collect::<Vec<f64>>());
            ln.push(LnCache { xhat, inv_std, pre_relu: y });
        }

        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut h = act;
        for block in &self.blocks {
            let (out, cache) = block_forward(block, &h);
            blocks.push(cache);
            h = out;
        }
        let pred = h.iter().map(|v| self.out.apply(v).into_iter().map(sigmoid).collect()).collect();
        ForwardCache { input: input.to_vec(), ln, blocks, top: h, pred }
    }
}

struct LnCache {
    xhat: Vec<f64>,
    inv_std: f64,
    pre_relu: Vec<f64>,
}

struct BlockCache {
    input: Vec<Vec<f64>>,
    fwd: Vec<StepCache>,
    bwd: Option<Vec<StepCache>>,
}

struct ForwardCache {
    input: Vec<Vec<f64>>,
    ln: Vec<LnCache>,
    blocks: Vec<BlockCache>,
    top: Vec<Vec<f64>>,
    pred: Vec<Vec<f64>>,
}

fn block_forward(block: &ResBlock, input: &[Vec<f64>]) -> (Vec<Vec<f64>>, BlockCache) {
    let (hf, fwd) = run_sequence(&block.fwd, input);
    let mut out: Vec<Vec<f64>> = input.iter().zip(&hf).map(|(x, h)| x.iter().zip(h).map(|(a, b)| a + b).collect()).collect();
    let bwd = block.bwd.as_ref().map(|cell| {
        let reversed: Vec<Vec<f64>> = input.iter().rev().cloned().collect();
        let (hb, caches) = run_sequence(cell, &reversed);
        let n = input.len();
        for (t, o) in out.iter_mut().enumerate() {
            o.iter_mut().zip(&hb[n - 1 - t]).for_each(|(a, b)| *a += b);
        }
        caches
    });
    (out, BlockCache { input: input.to_vec(), fwd, bwd })
}

/// One residual block over a sequence of `cell_size`-dimensional frames.
pub fn res_block_forward(block: &ResBlock, input: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = block.fwd.input_dim;
    if block.fwd.cell_size != d || block.bwd.as_ref().is_some_and(|b| b.input_dim != d || b.cell_size != d) {
        return Err(Error::shape("residual block cells must map cell_size to cell_size"));
    }
    if let Some((t, f)) = input.iter().enumerate().find(|(_, f)| f.len() != d) {
        return Err(Error::shape(format!("frame {t} has {} values, block expects {d}", f.len())));
    }
    Ok(block_forward(block, input).0)
}

fn check_target(pred: &[Vec<f64>], target: &[Vec<f64>]) -> Result<()> {
    if pred.len() != target.len() || pred.iter().zip(target).any(|(p, t)| p.len() != t.len()) {
        return Err(Error::shape("prediction and target shapes differ"));
    }
    Ok(())
}

fn ce(p: f64, t: f64) -> f64 {
    let p = p.clamp(PRED_CLAMP, 1.0 - PRED_CLAMP);
    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
}

/// Mean element-wise binary cross-entropy.
pub fn loss_cross_entropy(pred: &[Vec<f64>], target: &[Vec<f64>]) -> Result<f64> {
    check_target(pred, target)?;
    let n: usize = pred.iter().map(Vec::len).sum();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let s: f64 = pred.iter().zip(target).flat_map(|(p, t)| p.iter().zip(t)).map(|(&p, &t)| ce(p, t)).sum();
    Ok(s / n as f64)
}

/// Summed (unnormalized) loss and `scale`-weighted gradient of the summed loss.
pub(crate) fn loss_and_grad_scaled(
    params: &NetworkParams,
    input: &[Vec<f64>],
    target: &[Vec<f64>],
    scale: f64,
) -> Result<(f64, NetworkParams)> {
    params.check_input(input)?;
    if target.len() != input.len() || target.iter().any(|t| t.len() != params.output_dim) {
        return Err(Error::shape("target must have one output_dim row per input frame"));
    }
    let cache = params.forward_cached(input);
    let mut grad = params.zeros_like();
    let mut loss_sum = 0.0;

    // Output layer: dL/dz = (p - t) where the clamp is inactive.
    let mut d_top = Vec::with_capacity(input.len());
    for ((p, t), h) in cache.pred.iter().zip(target).zip(&cache.top) {
        let dz: Vec<f64> = p
            .iter()
            .zip(t)
            .map(|(&p, &t)| {
                loss_sum += ce(p, t);
                if (PRED_CLAMP..=1.0 - PRED_CLAMP).contains(&p) { scale * (p - t) } else { 0.0 }
            })
            .collect();
        outer_acc(&mut grad.out.weight, &dz, h);
        grad.out.bias.iter_mut().zip(&dz).for_each(|(b, d)| *b += d);
        let mut dh = vec![0.0; params.cell_size];
        matvec_t_acc(&params.out.weight, &dz, &mut dh);
        d_top.push(dh);
    }

    let mut d = d_top;
    for ((block, bc), gblock) in params.blocks.iter().zip(&cache.blocks).zip(grad.blocks.iter_mut()).rev() {
        let dx_f = backward_sequence(&block.fwd, &bc.fwd, &d, &mut gblock.fwd);
        let mut d_in: Vec<Vec<f64>> = d.iter().zip(&dx_f).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
        if let (Some(cell), Some(caches), Some(gcell)) = (&block.bwd, &bc.bwd, gblock.bwd.as_mut()) {
            let d_rev: Vec<Vec<f64>> = d.iter().rev().cloned().collect();
            let dx_b = backward_sequence(cell, caches, &d_rev, gcell);
            let n = d.len();
            for (t, di) in d_in.iter_mut().enumerate() {
                di.iter_mut().zip(&dx_b[n - 1 - t]).for_each(|(a, b)| *a += b);
            }
        }
        debug_assert_eq!(bc.input.len(), d_in.len());
        d = d_in;
    }

    let c = params.cell_size as f64;
    for ((dr, lc), x) in d.iter().zip(&cache.ln).zip(&cache.input) {
        let dy: Vec<f64> = dr.iter().zip(&lc.pre_relu).map(|(g, y)| if *y > 0.0 { *g } else { 0.0 }).collect();
        let mut dxhat = vec![0.0; dy.len()];
        for j in 0..dy.len() {
            grad.ln_gain[j] += dy[j] * lc.xhat[j];
            grad.ln_bias[j] += dy[j];
            dxhat[j] = dy[j] * params.ln_gain[j];
        }
        let m1 = dxhat.iter().sum::<f64>() / c;
        let m2 = dxhat.iter().zip(&lc.xhat).map(|(a, b)| a * b).sum::<f64>() / c;
        let da: Vec<f64> = dxhat.iter().zip(&lc.xhat).map(|(g, xh)| lc.inv_std * (g - m1 - xh * m2)).collect();
        outer_acc(&mut grad.fc_in.weight, &da, x);
        grad.fc_in.bias.iter_mut().zip(&da).for_each(|(b, g)| *b += g);
    }
    Ok((loss_sum, grad))
}

/// Loss and its exact gradient for one sequence.
pub fn backward(params: &NetworkParams, input: &[Vec<f64>], target: &[Vec<f64>]) -> Result<(f64, NetworkParams)> {
    let n = (input.len() * params.output_dim) as f64;
    let (s, g) = loss_and_grad_scaled(params, input, target, 1.0 / n)?;
    Ok((s / n, g))
}
