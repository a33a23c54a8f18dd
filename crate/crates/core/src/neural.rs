//! Minimal trainable primitives: affine layers, activations, MLP blocks with
//! hand-derived backward passes, Adam, and a finite-difference checker.
//!
//! All math is f64; forward/backward/update are pure given explicit state,
//! which keeps training runs bit-reproducible.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative at pre-activation z.
    fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Dense layer y = W x + b, weight stored row-major (out x in).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffineLayer {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl AffineLayer {
    pub fn out_dim(&self) -> usize {
        self.bias.len()
    }

    pub fn in_dim(&self) -> usize {
        self.weight.first().map_or(0, |r| r.len())
    }

    /// He-style uniform fan-in initialization.
    pub fn init<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = (6.0 / in_dim as f64).sqrt();
        let weight = (0..out_dim)
            .map(|_| (0..in_dim).map(|_| rng.random_range(-limit..limit)).collect())
            .collect();
        AffineLayer {
            weight,
            bias: vec![0.0; out_dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let weight = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        AffineLayer {
            weight,
            bias: vec![0.0; dim],
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weight
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| {
                let mut acc = *b;
                for (w, xi) in row.iter().zip(x) {
                    acc += w * xi;
                }
                acc
            })
            .collect()
    }
}

/// Stack of affine layers each followed by an activation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpBlock {
    pub layers: Vec<(AffineLayer, Activation)>,
}

/// Cached intermediates from one forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// Input to each layer (layer_inputs[0] is the block input).
    layer_inputs: Vec<Vec<f64>>,
    /// Pre-activation values per layer.
    preacts: Vec<Vec<f64>>,
}

/// Per-layer gradients mirroring the block's parameters.
#[derive(Debug, Clone)]
pub struct BlockGrads {
    pub layers: Vec<(Vec<Vec<f64>>, Vec<f64>)>,
}

impl BlockGrads {
    pub fn zeros_like(block: &MlpBlock) -> Self {
        BlockGrads {
            layers: block
                .layers
                .iter()
                .map(|(l, _)| {
                    (
                        vec![vec![0.0; l.in_dim()]; l.out_dim()],
                        vec![0.0; l.out_dim()],
                    )
                })
                .collect(),
        }
    }
}

impl MlpBlock {
    /// Builds a block from a dimension chain and per-layer activations;
    /// `dims.len()` must be `acts.len() + 1`.
    pub fn init<R: Rng>(dims: &[usize], acts: &[Activation], rng: &mut R) -> Self {
        assert_eq!(dims.len(), acts.len() + 1, "dimension chain mismatch");
        let layers = acts
            .iter()
            .enumerate()
            .map(|(i, &a)| (AffineLayer::init(dims[i], dims[i + 1], rng), a))
            .collect();
        MlpBlock { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |(l, _)| l.in_dim())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |(l, _)| l.out_dim())
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Tape)> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for (layer, act) in &self.layers {
            let z = layer.apply(&cur);
            let y = z.iter().map(|&v| act.apply(v)).collect::<Vec<_>>();
            layer_inputs.push(std::mem::replace(&mut cur, y));
            preacts.push(z);
        }
        Ok((
            cur,
            Tape {
                layer_inputs,
                preacts,
            },
        ))
    }

    /// Backpropagates `dy` (gradient of the loss w.r.t. the block output)
    /// through the tape, returning the input gradient and parameter gradients.
    pub fn backward(&self, tape: &Tape, dy: &[f64]) -> Result<(Vec<f64>, BlockGrads)> {
        if tape.layer_inputs.len() != self.layers.len() {
            return Err(Error::Numeric("tape does not match block".into()));
        }
        if dy.len() != self.output_dim() {
            return Err(Error::Dimension {
                expected: self.output_dim(),
                got: dy.len(),
            });
        }
        let mut grads = BlockGrads::zeros_like(self);
        let mut upstream = dy.to_vec();
        for (i, (layer, act)) in self.layers.iter().enumerate().rev() {
            let z = &tape.preacts[i];
            let x = &tape.layer_inputs[i];
            if z.len() != layer.out_dim() || x.len() != layer.in_dim() {
                return Err(Error::Numeric("stale tape".into()));
            }
            // dz = dy * act'(z)
            let dz: Vec<f64> = upstream
                .iter()
                .zip(z)
                .map(|(&g, &zz)| g * act.derivative(zz))
                .collect();
            let (dw, db) = &mut grads.layers[i];
            let mut dx = vec![0.0; layer.in_dim()];
            for (o, &dzo) in dz.iter().enumerate() {
                db[o] += dzo;
                let row = &layer.weight[o];
                let drow = &mut dw[o];
                for (j, (&xi, &wij)) in x.iter().zip(row).enumerate() {
                    drow[j] += dzo * xi;
                    dx[j] += dzo * wij;
                }
            }
            upstream = dx;
        }
        Ok((upstream, grads))
    }

    // --- flat parameter views (weights row-major, then bias, per layer) ---

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|(l, _)| l.out_dim() * (l.in_dim() + 1))
            .sum()
    }

    pub fn flatten_params(&self, out: &mut Vec<f64>) {
        for (l, _) in &self.layers {
            for row in &l.weight {
                out.extend_from_slice(row);
            }
            out.extend_from_slice(&l.bias);
        }
    }

    pub fn assign_params(&mut self, flat: &[f64], mut offset: usize) -> usize {
        for (l, _) in &mut self.layers {
            for row in &mut l.weight {
                let n = row.len();
                row.copy_from_slice(&flat[offset..offset + n]);
                offset += n;
            }
            let n = l.bias.len();
            l.bias.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        offset
    }
}

impl BlockGrads {
    pub fn flatten(&self, out: &mut Vec<f64>) {
        for (dw, db) in &self.layers {
            for row in dw {
                out.extend_from_slice(row);
            }
            out.extend_from_slice(db);
        }
    }

    pub fn accumulate(&mut self, other: &BlockGrads) {
        for ((dw, db), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            for (r, or) in dw.iter_mut().zip(ow) {
                for (v, ov) in r.iter_mut().zip(or) {
                    *v += ov;
                }
            }
            for (v, ov) in db.iter_mut().zip(ob) {
                *v += ov;
            }
        }
    }
}

/// Bias-corrected Adam over a flat parameter vector; no weight decay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        AdamState {
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension {
                expected: self.m.len(),
                got: params.len().max(grads.len()),
            });
        }
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Compares analytic gradients against central finite differences for a
/// scalar loss over the block output; returns the max relative error across
/// all parameters and the input.
pub fn grad_check<F>(block: &MlpBlock, loss: F, x: &[f64], step: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    if !(step > 0.0) {
        return Err(Error::Config("finite-difference step must be positive".into()));
    }
    let (y, tape) = block.forward(x)?;
    let (_, dy) = loss(&y);
    let (dx, grads) = block.backward(&tape, &dy)?;

    let mut analytic = Vec::new();
    grads.flatten(&mut analytic);
    analytic.extend_from_slice(&dx);

    let mut flat = Vec::with_capacity(block.param_count());
    block.flatten_params(&mut flat);
    let n_params = flat.len();
    flat.extend_from_slice(x);

    let mut max_err = 0.0f64;
    let mut probe = block.clone();
    for i in 0..flat.len() {
        let orig = flat[i];
        let eval = |b: &mut MlpBlock, flat: &[f64]| -> Result<f64> {
            b.assign_params(&flat[..n_params], 0);
            let (y, _) = b.forward(&flat[n_params..])?;
            Ok(loss(&y).0)
        };
        flat[i] = orig + step;
        let plus = eval(&mut probe, &flat)?;
        flat[i] = orig - step;
        let minus = eval(&mut probe, &flat)?;
        flat[i] = orig;
        let numeric = (plus - minus) / (2.0 * step);
        let err = relative_error(analytic[i], numeric);
        max_err = max_err.max(err);
    }
    Ok(max_err)
}

/// |a - n| scaled by the larger magnitude, floored so finite-difference noise
/// on near-zero gradients does not dominate.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}
