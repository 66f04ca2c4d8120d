//! Small trainable regressor: one tanh hidden layer over the band-limited
//! log-power spectrum, trained with mini-batch Adam and hand-written
//! backpropagation.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::frontend::{spectrum_forward, GridSize, SpectrumTrace};
use super::{DifferentiableEstimator, FrequencyBand, HrEstimator, DEFAULT_HALF_WIDTH};
use crate::error::{Error, Result};
use crate::radargram::{ComplexGrid, Radargram};

pub const MLPW_MAGIC: [u8; 4] = *b"MLPW";
pub const MLPW_VERSION: u16 = 1;

/// Added to the sum-normalised power before the logarithm.
const LOG_FLOOR: f64 = 1e-2;

/// Fixed architecture `K -> H (tanh) -> 1`. `w1` is `H x K` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub inputs: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MlpParams {
    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        Self { inputs, hidden, w1: vec![0.0; inputs * hidden], b1: vec![0.0; hidden], w2: vec![0.0; hidden], b2: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs < 2 || self.hidden == 0 {
            return Err(Error::invalid(format!("MLP needs K >= 2 and H >= 1, got K={} H={}", self.inputs, self.hidden)));
        }
        if self.w1.len() != self.inputs * self.hidden || self.b1.len() != self.hidden || self.w2.len() != self.hidden {
            return Err(Error::invalid("MLP parameter shapes do not match (K, H)"));
        }
        if self.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("MLP parameters must be finite"));
        }
        Ok(())
    }

    /// Flat view in storage order: `w1`, `b1`, `w2`, `b2`.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.w1.iter().chain(&self.b1).chain(&self.w2).copied().chain(std::iter::once(self.b2))
    }

    fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(std::iter::once(&mut self.b2))
    }

    pub fn len(&self) -> usize {
        self.inputs * self.hidden + 2 * self.hidden + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn hidden_activations(&self, features: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|h| {
                let row = &self.w1[h * self.inputs..(h + 1) * self.inputs];
                let a: f64 = row.iter().zip(features).map(|(w, z)| w * z).sum::<f64>() + self.b1[h];
                a.tanh()
            })
            .collect()
    }

    /// Network output for one feature vector.
    pub fn predict(&self, features: &[f64]) -> f64 {
        let h = self.hidden_activations(features);
        h.iter().zip(&self.w2).map(|(a, w)| a * w).sum::<f64>() + self.b2
    }

    /// `d out / d features`.
    fn feature_grad(&self, features: &[f64]) -> Vec<f64> {
        let h = self.hidden_activations(features);
        let mut g = vec![0.0; self.inputs];
        for (j, hj) in h.iter().enumerate() {
            let ga = self.w2[j] * (1.0 - hj * hj);
            let row = &self.w1[j * self.inputs..(j + 1) * self.inputs];
            for (gk, w) in g.iter_mut().zip(row) {
                *gk += ga * w;
            }
        }
        g
    }

    /// Accumulates `scale * d out / d params` into `grad`, returns the output.
    fn accumulate_param_grad(&self, features: &[f64], scale: f64, grad: &mut MlpParams) -> f64 {
        let h = self.hidden_activations(features);
        let out = h.iter().zip(&self.w2).map(|(a, w)| a * w).sum::<f64>() + self.b2;
        grad.b2 += scale;
        for (j, hj) in h.iter().enumerate() {
            grad.w2[j] += scale * hj;
            let ga = scale * self.w2[j] * (1.0 - hj * hj);
            grad.b1[j] += ga;
            let row = &mut grad.w1[j * self.inputs..(j + 1) * self.inputs];
            for (gw, z) in row.iter_mut().zip(features) {
                *gw += ga * z;
            }
        }
        out
    }
}

/// Log of the sum-normalised band power, plus the trace needed to backprop.
fn features_with_trace(
    x: &Radargram,
    inputs: usize,
    band: &FrequencyBand,
    half_width: usize,
) -> Result<(Vec<f64>, SpectrumTrace, f64)> {
    let trace = spectrum_forward(x, band, half_width, GridSize::Points(inputs))?;
    let total: f64 = trace.power.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::ZeroSignal);
    }
    let features = trace.power.iter().map(|p| (p / total + LOG_FLOOR).ln()).collect();
    Ok((features, trace, total))
}

/// Input features the MLP sees for radargram `x`.
pub fn mlp_features(x: &Radargram, inputs: usize, band: &FrequencyBand, half_width: usize) -> Result<Vec<f64>> {
    Ok(features_with_trace(x, inputs, band, half_width)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpEstimator {
    pub params: MlpParams,
    pub band: FrequencyBand,
    pub half_width: usize,
}

impl MlpEstimator {
    pub fn new(params: MlpParams) -> Self {
        Self { params, band: FrequencyBand::heart_rate(), half_width: DEFAULT_HALF_WIDTH }
    }

    pub fn forward(&self, x: &Radargram) -> Result<f64> {
        self.params.validate()?;
        let features = mlp_features(x, self.params.inputs, &self.band, self.half_width)?;
        Ok(self.params.predict(&features))
    }
}

impl HrEstimator for MlpEstimator {
    fn name(&self) -> &'static str {
        "mlp"
    }

    fn estimate(&self, x: &Radargram) -> Result<f64> {
        self.forward(x)
    }
}

impl DifferentiableEstimator for MlpEstimator {
    fn estimate_with_grad(&self, x: &Radargram) -> Result<(f64, ComplexGrid)> {
        self.params.validate()?;
        let (features, trace, total) = features_with_trace(x, self.params.inputs, &self.band, self.half_width)?;
        let out = self.params.predict(&features);
        let g_z = self.params.feature_grad(&features);
        // z_k = ln(q_k + floor), q_k = p_k / sum(p)
        let q: Vec<f64> = trace.power.iter().map(|p| p / total).collect();
        let g_q: Vec<f64> = g_z.iter().zip(&q).map(|(g, qk)| g / (qk + LOG_FLOOR)).collect();
        let dot: f64 = g_q.iter().zip(&q).map(|(g, qk)| g * qk).sum();
        let g_p: Vec<f64> = g_q.iter().map(|g| (g - dot) / total).collect();
        Ok((out, trace.input_grad(x, &g_p)))
    }
}

/// Precomputed feature vectors with their target heart rates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureSet {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn push(&mut self, features: Vec<f64>, target: f64) {
        self.features.push(features);
        self.targets.push(target);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Feature count `K`.
    pub inputs: usize,
    /// Hidden units `H`.
    pub hidden: usize,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self { learning_rate: 0.005, epochs: 400, batch_size: 32, seed: 0, inputs: 51, hidden: 32 }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be > 0"));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.hidden == 0 || self.inputs < 2 {
            return Err(Error::invalid("epochs, batch size and hidden units must be positive, K >= 2"));
        }
        Ok(())
    }
}

/// Mean squared error over the set and its gradient with respect to every parameter.
pub fn mse_param_grad(params: &MlpParams, features: &[Vec<f64>], targets: &[f64]) -> (f64, MlpParams) {
    let mut grad = MlpParams::zeros(params.inputs, params.hidden);
    let n = targets.len().max(1) as f64;
    let mut loss = 0.0;
    for (z, y) in features.iter().zip(targets) {
        let residual = params.predict(z) - y;
        loss += residual * residual;
        params.accumulate_param_grad(z, 2.0 * residual / n, &mut grad);
    }
    (loss / n, grad)
}

/// One shared location and scale for all features, plus the target's.
fn standardize(set: &FeatureSet) -> (f64, f64, f64, f64) {
    let n = set.len() as f64;
    let count = n * set.features[0].len() as f64;
    let mean = set.features.iter().flatten().sum::<f64>() / count;
    let std = (set.features.iter().flatten().map(|v| (v - mean).powi(2)).sum::<f64>() / count).sqrt().max(1e-8);
    let y_mean = set.targets.iter().sum::<f64>() / n;
    let y_std = (set.targets.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n).sqrt().max(1e-8);
    (mean, std, y_mean, y_std)
}

/// Trains on precomputed features. Deterministic for a given seed.
pub fn train_mlp_on_features(set: &FeatureSet, hyper: &TrainHyper) -> Result<MlpParams> {
    hyper.validate()?;
    if set.len() < 100 {
        return Err(Error::invalid(format!("training needs at least 100 examples, got {}", set.len())));
    }
    let k = hyper.inputs;
    if set.features.iter().any(|z| z.len() != k) {
        return Err(Error::invalid("feature length does not match K"));
    }
    if set.targets.iter().chain(set.features.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("training data must be finite"));
    }
    let (mean, std, y_mean, y_std) = standardize(set);
    let xs: Vec<Vec<f64>> = set
        .features
        .iter()
        .map(|z| z.iter().map(|v| (v - mean) / std).collect())
        .collect();
    let ys: Vec<f64> = set.targets.iter().map(|y| (y - y_mean) / y_std).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut net = MlpParams::zeros(k, hyper.hidden);
    let lim1 = (6.0 / (k + hyper.hidden) as f64).sqrt();
    let lim2 = (6.0 / (hyper.hidden + 1) as f64).sqrt();
    net.w1.iter_mut().for_each(|w| *w = rng.random_range(-lim1..lim1));
    net.w2.iter_mut().for_each(|w| *w = rng.random_range(-lim2..lim2));

    let (beta1, beta2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut m1 = MlpParams::zeros(k, hyper.hidden);
    let mut m2 = MlpParams::zeros(k, hyper.hidden);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut step = 0i32;
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        // cosine decay to a tenth of the base rate
        let progress = epoch as f64 / hyper.epochs as f64;
        let lr = hyper.learning_rate * (0.1 + 0.9 * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()));
        for batch in order.chunks(hyper.batch_size) {
            let bx: Vec<Vec<f64>> = batch.iter().map(|&i| xs[i].clone()).collect();
            let by: Vec<f64> = batch.iter().map(|&i| ys[i]).collect();
            let (_, grad) = mse_param_grad(&net, &bx, &by);
            step += 1;
            let c1 = 1.0 - beta1.powi(step);
            let c2 = 1.0 - beta2.powi(step);
            for (((p, g), a), b) in net.iter_mut().zip(grad.iter()).zip(m1.iter_mut()).zip(m2.iter_mut()) {
                *a = beta1 * *a + (1.0 - beta1) * g;
                *b = beta2 * *b + (1.0 - beta2) * g * g;
                *p -= lr * (*a / c1) / ((*b / c2).sqrt() + eps);
            }
        }
        let (loss, _) = mse_param_grad(&net, &xs, &ys);
        if !loss.is_finite() || net.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        log::debug!("epoch {epoch}: standardized mse {loss:.5}");
    }

    // fold the input and output standardization into the weights
    let mut out = MlpParams::zeros(k, hyper.hidden);
    for h in 0..hyper.hidden {
        let mut shift = 0.0;
        for j in 0..k {
            let w = net.w1[h * k + j];
            out.w1[h * k + j] = w / std;
            shift += w * mean / std;
        }
        out.b1[h] = net.b1[h] - shift;
        out.w2[h] = net.w2[h] * y_std;
    }
    out.b2 = net.b2 * y_std + y_mean;
    out.validate()?;
    Ok(out)
}

/// Extracts features from every radargram and trains on them.
pub fn train_mlp(dataset: &[(Radargram, f64)], hyper: &TrainHyper) -> Result<MlpParams> {
    let band = FrequencyBand::heart_rate();
    let mut set = FeatureSet::default();
    for (x, bpm) in dataset {
        set.push(mlp_features(x, hyper.inputs, &band, DEFAULT_HALF_WIDTH)?, *bpm);
    }
    train_mlp_on_features(&set, hyper)
}

fn encode(params: &MlpParams) -> Result<Vec<u8>> {
    params.validate()?;
    let k = u32::try_from(params.inputs).map_err(|_| Error::invalid("K does not fit in u32"))?;
    let h = u32::try_from(params.hidden).map_err(|_| Error::invalid("H does not fit in u32"))?;
    let mut out = Vec::with_capacity(14 + params.len() * 8);
    out.extend_from_slice(&MLPW_MAGIC);
    out.extend_from_slice(&MLPW_VERSION.to_le_bytes());
    out.extend_from_slice(&k.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    for v in params.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn decode(bytes: &[u8]) -> Result<MlpParams> {
    if bytes.len() < 14 {
        if bytes.len() >= 4 && bytes[..4] != MLPW_MAGIC {
            let mut found = [0u8; 4];
            found.copy_from_slice(&bytes[..4]);
            return Err(Error::BadMagic { expected: MLPW_MAGIC, found });
        }
        return Err(Error::Truncated { expected: 14, found: bytes.len() as u64 });
    }
    let mut magic = [0u8; 4];
    magic.copy_from_slice(&bytes[..4]);
    if magic != MLPW_MAGIC {
        return Err(Error::BadMagic { expected: MLPW_MAGIC, found: magic });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != MLPW_VERSION {
        return Err(Error::Version { expected: MLPW_VERSION, found: version });
    }
    let k = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    let h = u32::from_le_bytes(bytes[10..14].try_into().expect("4 bytes")) as usize;
    let mut params = MlpParams::zeros(k, h);
    let expected = 14 + params.len() as u64 * 8;
    if bytes.len() as u64 != expected {
        return Err(Error::Truncated { expected, found: bytes.len() as u64 });
    }
    for (i, (slot, chunk)) in params.iter_mut().zip(bytes[14..].chunks_exact(8)).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(Error::NonFiniteValue(i));
        }
        *slot = v;
    }
    params.validate()?;
    Ok(params)
}

pub fn write_mlp_params(params: &MlpParams, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode(params)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub fn read_mlp_params(path: impl AsRef<Path>) -> Result<MlpParams> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}
