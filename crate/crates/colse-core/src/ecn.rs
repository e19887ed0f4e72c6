//! Error compensation network: a small fully-connected net that predicts
//! the magnitude and sign of the joint estimator's log-space residual,
//! applied as a gated multiplicative correction.
//!
//! The network is deliberately plain — dense layers, ReLU, Adam — and
//! trained single-threaded so identical seeds give bitwise-identical
//! weights.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::jpe::{DVineModel, QueryBounds};

// test builds link std via dev-deps and resolve these methods inherently;
// plain no_std builds need the trait
#[allow(unused_imports)]
use num_traits::Float;

/// Hidden layer widths, input and output excluded.
pub const HIDDEN_DIMS: [usize; 4] = [256, 256, 128, 64];
/// Output head width: magnitude, add-logit, subtract-logit.
pub const OUT_DIM: usize = 3;
/// Salt separating the shuffle RNG stream from weight initialization.
const SHUFFLE_SALT: u64 = 0x5348_5546;

/// One training example: feature vector plus the signed log-space
/// residual `r = ln(true_sel) - ln(jpe_sel)` (both floored at s_min).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub features: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 25, batch_size: 32, learning_rate: 1e-3, seed: 42 }
    }
}

/// Per-epoch mean losses; `val_loss` is empty when no validation split
/// was supplied.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    EmptyTrainingSet,
    FeatureLengthMismatch { expected: usize, got: usize },
    /// Loss stopped being finite; reports where so the offending batch
    /// can be inspected upstream.
    NonFiniteLoss { epoch: usize, batch: usize },
}

impl core::fmt::Display for TrainError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TrainError::EmptyTrainingSet => write!(f, "training requires at least one labeled query"),
            TrainError::FeatureLengthMismatch { expected, got } => {
                write!(f, "feature vector has length {got}, network expects {expected}")
            }
            TrainError::NonFiniteLoss { epoch, batch } => {
                write!(f, "non-finite loss at epoch {epoch}, batch {batch}")
            }
        }
    }
}

impl core::error::Error for TrainError {}

/// The compensation network. Weight matrices are row-major
/// `[out x in]`; layer `l` maps activations of width `dims[l]` to
/// `dims[l+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EcnModel {
    dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl EcnModel {
    /// Fresh network for a `d`-attribute schema: input width `2d + 2`,
    /// He-uniform weights from the seed, zero biases.
    pub fn new(attr_count: usize, seed: u64) -> Self {
        assert!(attr_count > 0, "network needs at least one attribute");
        let mut dims = vec![2 * attr_count + 2];
        dims.extend_from_slice(&HIDDEN_DIMS);
        dims.push(OUT_DIM);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            let w: Vec<f64> =
                (0..fan_in * fan_out).map(|_| rng.gen::<f64>() * 2.0 * limit - limit).collect();
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        EcnModel { dims, weights, biases }
    }

    /// Reassemble from serialized parts, validating the fixed topology.
    pub fn from_parts(
        input_dim: usize,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self, TrainError> {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(&HIDDEN_DIMS);
        dims.push(OUT_DIM);
        if input_dim < 4 || input_dim % 2 != 0 || weights.len() != dims.len() - 1 || biases.len() != dims.len() - 1 {
            return Err(TrainError::FeatureLengthMismatch { expected: dims.len() - 1, got: weights.len() });
        }
        for l in 0..dims.len() - 1 {
            if weights[l].len() != dims[l] * dims[l + 1] || biases[l].len() != dims[l + 1] {
                return Err(TrainError::FeatureLengthMismatch {
                    expected: dims[l] * dims[l + 1],
                    got: weights[l].len(),
                });
            }
        }
        Ok(EcnModel { dims, weights, biases })
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn attr_count(&self) -> usize {
        (self.dims[0] - 2) / 2
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    /// Forward pass: predicted residual magnitude and the two sign
    /// logits.
    ///
    /// # Panics
    /// If the feature length does not match the input layer.
    pub fn forward(&self, features: &[f64]) -> (f64, f64, f64) {
        assert_eq!(
            features.len(),
            self.dims[0],
            "feature vector has length {}, network expects {}",
            features.len(),
            self.dims[0]
        );
        let mut cur: Vec<f64> = features.to_vec();
        let last = self.weights.len() - 1;
        for l in 0..self.weights.len() {
            let mut next = self.affine(l, &cur);
            if l != last {
                for v in &mut next {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            cur = next;
        }
        (cur[0], cur[1], cur[2])
    }

    /// Forward pass with the sign logits squashed to probabilities — the
    /// estimation-time entry point feeding [`apply_correction`].
    pub fn predict(&self, features: &[f64]) -> (f64, f64, f64) {
        let (m, lp, lm) = self.forward(features);
        (m, sigmoid(lp), sigmoid(lm))
    }

    fn affine(&self, l: usize, input: &[f64]) -> Vec<f64> {
        let (n_in, _n_out) = (self.dims[l], self.dims[l + 1]);
        let w = &self.weights[l];
        let mut out = self.biases[l].clone();
        for (o, slot) in out.iter_mut().enumerate() {
            let row = &w[o * n_in..(o + 1) * n_in];
            let mut acc = 0.0;
            for (wi, xi) in row.iter().zip(input) {
                acc += wi * xi;
            }
            *slot += acc;
        }
        out
    }

    /// Mean loss of a batch: squared error on the magnitude head plus
    /// binary cross-entropy on each sign logit.
    pub fn batch_loss(&self, batch: &[TrainSample]) -> f64 {
        let mut sum = 0.0;
        for s in batch {
            let (m, lp, lm) = self.forward(&s.features);
            sum += sample_loss(m, lp, lm, s.residual);
        }
        sum / batch.len() as f64
    }

    /// Forward the whole batch storing activations, then backpropagate
    /// the mean loss. Returns (loss, weight grads, bias grads).
    fn loss_and_grads(&self, batch: &[TrainSample]) -> (f64, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let layers = self.weights.len();
        let mut gw: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut gb: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        let inv_b = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers + 1);
        for s in batch {
            acts.clear();
            acts.push(s.features.clone());
            for l in 0..layers {
                let mut next = self.affine(l, &acts[l]);
                if l != layers - 1 {
                    for v in &mut next {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                }
                acts.push(next);
            }
            let out = &acts[layers];
            let (m, lp, lm) = (out[0], out[1], out[2]);
            let r = s.residual;
            loss += sample_loss(m, lp, lm, r) * inv_b;
            let mag = r.abs();
            let yp = if r > 0.0 { 1.0 } else { 0.0 };
            let ym = if r < 0.0 { 1.0 } else { 0.0 };
            let mut delta = vec![
                2.0 * (m - mag) * inv_b,
                (sigmoid(lp) - yp) * inv_b,
                (sigmoid(lm) - ym) * inv_b,
            ];
            for l in (0..layers).rev() {
                let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
                let input = &acts[l];
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let grow = &mut gw[l][o * n_in..(o + 1) * n_in];
                    for (g, xi) in grow.iter_mut().zip(input) {
                        *g += d * xi;
                    }
                    gb[l][o] += d;
                }
                if l > 0 {
                    let w = &self.weights[l];
                    let mut prev = vec![0.0; n_in];
                    for (o, &d) in delta.iter().enumerate() {
                        if d == 0.0 {
                            continue;
                        }
                        let row = &w[o * n_in..(o + 1) * n_in];
                        for (p, wi) in prev.iter_mut().zip(row) {
                            *p += d * wi;
                        }
                    }
                    // ReLU gate: units that were clamped pass no gradient
                    for (p, a) in prev.iter_mut().zip(&acts[l][..]) {
                        if *a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                    delta = prev;
                }
            }
        }
        (loss, gw, gb)
    }

    /// Adam-train on shuffled mini-batches. Deterministic for a fixed
    /// seed and input order.
    pub fn train(
        &mut self,
        samples: &[TrainSample],
        validation: &[TrainSample],
        cfg: &TrainConfig,
    ) -> Result<TrainReport, TrainError> {
        if samples.is_empty() {
            return Err(TrainError::EmptyTrainingSet);
        }
        for s in samples.iter().chain(validation) {
            if s.features.len() != self.dims[0] {
                return Err(TrainError::FeatureLengthMismatch {
                    expected: self.dims[0],
                    got: s.features.len(),
                });
            }
        }
        let batch_size = cfg.batch_size.max(1);
        let mut adam = AdamState::new(&self.dims);
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ SHUFFLE_SALT);
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut batch: Vec<TrainSample> = Vec::with_capacity(batch_size);
        let mut report = TrainReport::default();
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            let mut batches = 0usize;
            for (b, chunk) in order.chunks(batch_size).enumerate() {
                batch.clear();
                batch.extend(chunk.iter().map(|&i| samples[i].clone()));
                let (loss, gw, gb) = self.loss_and_grads(&batch);
                if !loss.is_finite() {
                    return Err(TrainError::NonFiniteLoss { epoch, batch: b });
                }
                adam.step(cfg.learning_rate, &gw, &gb, &mut self.weights, &mut self.biases);
                epoch_loss += loss;
                batches += 1;
            }
            report.train_loss.push(epoch_loss / batches as f64);
            if !validation.is_empty() {
                report.val_loss.push(self.batch_loss(validation));
            }
        }
        Ok(report)
    }
}

fn sample_loss(m: f64, lp: f64, lm: f64, r: f64) -> f64 {
    let mag = r.abs();
    let yp = if r > 0.0 { 1.0 } else { 0.0 };
    let ym = if r < 0.0 { 1.0 } else { 0.0 };
    (m - mag) * (m - mag) + bce_with_logits(lp, yp) + bce_with_logits(lm, ym)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `-y ln σ(x) - (1-y) ln(1-σ(x))`.
fn bce_with_logits(x: f64, y: f64) -> f64 {
    x.max(0.0) - x * y + (-x.abs()).exp().ln_1p()
}

struct AdamState {
    t: u64,
    mw: Vec<Vec<f64>>,
    vw: Vec<Vec<f64>>,
    mb: Vec<Vec<f64>>,
    vb: Vec<Vec<f64>>,
}

impl AdamState {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(dims: &[usize]) -> Self {
        let mw: Vec<Vec<f64>> =
            (0..dims.len() - 1).map(|l| vec![0.0; dims[l] * dims[l + 1]]).collect();
        let mb: Vec<Vec<f64>> = (0..dims.len() - 1).map(|l| vec![0.0; dims[l + 1]]).collect();
        AdamState { t: 0, vw: mw.clone(), vb: mb.clone(), mw, mb }
    }

    fn step(
        &mut self,
        lr: f64,
        gw: &[Vec<f64>],
        gb: &[Vec<f64>],
        weights: &mut [Vec<f64>],
        biases: &mut [Vec<f64>],
    ) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let c2 = 1.0 - Self::BETA2.powi(self.t as i32);
        let update = |m: &mut [f64], v: &mut [f64], g: &[f64], p: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * g[i];
                v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
            }
        };
        for l in 0..weights.len() {
            update(&mut self.mw[l], &mut self.vw[l], &gw[l], &mut weights[l]);
            update(&mut self.mb[l], &mut self.vb[l], &gb[l], &mut biases[l]);
        }
    }
}

/// Assemble the feature vector for a query: per attribute the CDF-space
/// bounds (`(0, 1)` when unconstrained), then the two estimates on a
/// normalized log scale where 1 means "at the selectivity floor" and 0
/// means "the whole table".
pub fn featurize(model: &DVineModel, q: &QueryBounds, jpe_sel: f64, avi_sel: f64) -> Vec<f64> {
    let s_min = model.s_min();
    let norm = |s: f64| s.max(s_min).ln() / s_min.ln();
    let mut out = Vec::with_capacity(2 * model.attr_count() + 2);
    for (lo, hi) in model.cdf_bounds(q) {
        out.push(lo);
        out.push(hi);
    }
    out.push(norm(jpe_sel));
    out.push(norm(avi_sel));
    out
}

/// Signed log-space residual between the true and estimated selectivity,
/// both floored at `s_min`.
pub fn residual(true_sel: f64, jpe_sel: f64, s_min: f64) -> f64 {
    true_sel.max(s_min).ln() - jpe_sel.max(s_min).ln()
}

/// Gated correction: shift the estimate by the predicted magnitude in
/// log space, but only when one sign probability dominates and clears
/// 0.5. Result clamped to `[s_min, 1]`.
pub fn apply_correction(jpe_sel: f64, m_hat: f64, p_plus: f64, p_minus: f64, s_min: f64) -> f64 {
    let m = m_hat.max(0.0);
    let corrected = if p_plus > p_minus && p_plus > 0.5 {
        (jpe_sel.ln() + m).exp()
    } else if p_minus > p_plus && p_minus > 0.5 {
        (jpe_sel.ln() - m).exp()
    } else {
        jpe_sel
    };
    corrected.clamp(s_min, 1.0)
}

/// Compare analytic gradients against central finite differences
/// (`± h`) on `per_layer` randomly chosen weights and biases of every
/// layer, plus one random-direction derivative per layer. Returns the
/// worst relative error, with near-zero gradients compared on an
/// absolute scale via the `1e-3` denominator floor.
pub fn gradient_check(
    model: &EcnModel,
    batch: &[TrainSample],
    h: f64,
    per_layer: usize,
    seed: u64,
) -> f64 {
    let (_, gw, gb) = model.loss_and_grads(batch);
    let mut probe = model.clone();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let rel = |fd: f64, an: f64| (fd - an).abs() / fd.abs().max(an.abs()).max(1e-3);
    for l in 0..model.weights.len() {
        for _ in 0..per_layer {
            let i = rng.gen_range(0..model.weights[l].len());
            let orig = probe.weights[l][i];
            probe.weights[l][i] = orig + h;
            let up = probe.batch_loss(batch);
            probe.weights[l][i] = orig - h;
            let dn = probe.batch_loss(batch);
            probe.weights[l][i] = orig;
            worst = worst.max(rel((up - dn) / (2.0 * h), gw[l][i]));
        }
        let bi = rng.gen_range(0..model.biases[l].len());
        let orig = probe.biases[l][bi];
        probe.biases[l][bi] = orig + h;
        let up = probe.batch_loss(batch);
        probe.biases[l][bi] = orig - h;
        let dn = probe.batch_loss(batch);
        probe.biases[l][bi] = orig;
        worst = worst.max(rel((up - dn) / (2.0 * h), gb[l][bi]));

        // directional derivative across the whole layer: a strong check
        // that is immune to individual near-zero gradients
        let dir: Vec<f64> = (0..model.weights[l].len())
            .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let scale = (model.weights[l].len() as f64).sqrt();
        for (w, d) in probe.weights[l].iter_mut().zip(&dir) {
            *w += h * d / scale;
        }
        let up = probe.batch_loss(batch);
        for (w, d) in probe.weights[l].iter_mut().zip(&dir) {
            *w -= 2.0 * h * d / scale;
        }
        let dn = probe.batch_loss(batch);
        probe.weights[l].copy_from_slice(&model.weights[l]);
        let an_dir: f64 = gw[l].iter().zip(&dir).map(|(g, d)| g * d / scale).sum();
        worst = worst.max(rel((up - dn) / (2.0 * h), an_dir));
    }
    worst
}
