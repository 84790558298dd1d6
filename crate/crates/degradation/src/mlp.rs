//! Fully connected rectifier network with one linear output, trained by
//! mini-batch Adam on mean squared error.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::oracle::{DegradationFeatures, Sample};
use crate::{DegradationError, Result};

pub const LAYER_SIZES: [usize; 4] = [5, 20, 10, 1];
const INPUTS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layer_sizes: Vec<usize>,
    /// Per layer, `out × in` row-major.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    /// Inputs are mapped to `(x - shift) / scale` before the first layer.
    pub input_shift: Vec<f64>,
    pub input_scale: Vec<f64>,
    /// The network predicts `label / output_scale`.
    pub output_scale: f64,
}

impl MlpModel {
    /// All-zero parameters with identity normalization.
    pub fn zeros(layer_sizes: &[usize]) -> Self {
        let pairs = layer_sizes.windows(2);
        Self {
            layer_sizes: layer_sizes.to_vec(),
            weights: pairs.clone().map(|w| vec![0.0; w[0] * w[1]]).collect(),
            biases: pairs.map(|w| vec![0.0; w[1]]).collect(),
            input_shift: vec![0.0; layer_sizes[0]],
            input_scale: vec![1.0; layer_sizes[0]],
            output_scale: 1.0,
        }
    }

    /// He-uniform weights and zero biases.
    pub fn initialized(layer_sizes: &[usize], seed: u64) -> Self {
        let mut m = Self::zeros(layer_sizes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (l, w) in m.weights.iter_mut().enumerate() {
            let limit = (6.0 / layer_sizes[l] as f64).sqrt();
            w.iter_mut().for_each(|v| *v = rng.random_range(-limit..limit));
        }
        m
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DegradationError::Model(msg));
        let n = self.layer_sizes.len();
        if n < 2 || self.layer_sizes.iter().any(|&s| s == 0) || *self.layer_sizes.last().unwrap() != 1 {
            return bad(format!("layer sizes {:?}", self.layer_sizes));
        }
        if self.weights.len() != n - 1 || self.biases.len() != n - 1 {
            return bad("layer count does not match parameter blocks".into());
        }
        for l in 0..n - 1 {
            let (i, o) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            if self.weights[l].len() != i * o || self.biases[l].len() != o {
                return bad(format!("layer {l} parameter shape"));
            }
        }
        let inputs = self.layer_sizes[0];
        if self.input_shift.len() != inputs || self.input_scale.len() != inputs {
            return bad("normalization length".into());
        }
        if self.input_scale.iter().any(|&s| !(s > 0.0)) || !(self.output_scale > 0.0) {
            return bad("normalization scales must be positive".into());
        }
        Ok(())
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.input_shift).zip(&self.input_scale).map(|((v, s), c)| (v - s) / c).collect()
    }

    /// Network output for already normalized inputs, in label units
    /// divided by `output_scale`.
    pub fn forward_normalized(&self, x: &[f64]) -> f64 {
        let mut a = x.to_vec();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let inputs = a.len();
            let mut z: Vec<f64> = b.clone();
            for (o, zo) in z.iter_mut().enumerate() {
                *zo += w[o * inputs..(o + 1) * inputs].iter().zip(&a).map(|(wi, ai)| wi * ai).sum::<f64>();
            }
            if l < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            a = z;
        }
        a[0]
    }

    /// Unclamped prediction in label units.
    pub fn predict_raw(&self, f: &DegradationFeatures) -> f64 {
        self.output_scale * self.forward_normalized(&self.normalize(&f.to_array()))
    }

    pub fn predict(&self, f: &DegradationFeatures) -> f64 {
        self.predict_raw(f).max(0.0)
    }

    pub fn num_parameters(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Flattened as each layer's weights followed by its biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_parameters());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            p.extend_from_slice(w);
            p.extend_from_slice(b);
        }
        p
    }

    pub fn set_parameters(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.num_parameters(), "parameter vector length");
        let mut at = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&p[at..at + nw]);
            b.copy_from_slice(&p[at + nw..at + nw + nb]);
            at += nw + nb;
        }
    }

    /// Mean squared error over `(normalized input, normalized target)` pairs
    /// and its gradient in `parameters()` order.
    pub fn loss_and_gradient(&self, inputs: &[Vec<f64>], targets: &[f64]) -> (f64, Vec<f64>) {
        let layers = self.weights.len();
        let mut gw: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut gb: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        let n = inputs.len() as f64;
        let mut loss = 0.0;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers + 1);
        for (x, &t) in inputs.iter().zip(targets) {
            acts.clear();
            acts.push(x.clone());
            for l in 0..layers {
                let a = &acts[l];
                let w = &self.weights[l];
                let mut z = self.biases[l].clone();
                for (o, zo) in z.iter_mut().enumerate() {
                    *zo += w[o * a.len()..(o + 1) * a.len()].iter().zip(a).map(|(wi, ai)| wi * ai).sum::<f64>();
                }
                if l + 1 < layers {
                    z.iter_mut().for_each(|v| *v = v.max(0.0));
                }
                acts.push(z);
            }
            let err = acts[layers][0] - t;
            loss += err * err / n;
            let mut delta = vec![2.0 * err / n];
            for l in (0..layers).rev() {
                let a = &acts[l];
                let w = &self.weights[l];
                for (o, &d) in delta.iter().enumerate() {
                    gb[l][o] += d;
                    for (i, &ai) in a.iter().enumerate() {
                        gw[l][o * a.len() + i] += d * ai;
                    }
                }
                if l > 0 {
                    // a > 0 exactly where the rectifier was active
                    delta = (0..a.len())
                        .map(|i| {
                            if a[i] > 0.0 {
                                delta.iter().enumerate().map(|(o, d)| d * w[o * a.len() + i]).sum()
                            } else {
                                0.0
                            }
                        })
                        .collect();
                }
            }
        }
        let mut g = Vec::with_capacity(self.num_parameters());
        for (w, b) in gw.iter().zip(&gb) {
            g.extend_from_slice(w);
            g.extend_from_slice(b);
        }
        (loss, g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| DegradationError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DegradationError::io(path, e))?;
        Self::from_json(&text)
    }
}

pub fn mlp_predict(model: &MlpModel, f: &DegradationFeatures) -> f64 {
    model.predict(f)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub validation_fraction: f64,
    /// Start the output layer at zero instead of random weights.
    pub zero_output_init: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-3,
            epochs: 150,
            batch_size: 64,
            seed: 7,
            validation_fraction: 0.2,
            zero_output_init: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub train_loss: f64,
    pub validation_loss: f64,
    /// Coefficient of determination of clamped predictions on the held-out
    /// split, in label units.
    pub validation_r2: f64,
    pub train_size: usize,
    pub validation_size: usize,
}

/// 1 − SS_res / SS_tot.
pub fn r_squared(predicted: &[f64], actual: &[f64]) -> f64 {
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = predicted.iter().zip(actual).map(|(p, y)| (p - y).powi(2)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, p: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for j in 0..p.len() {
            self.m[j] = Self::B1 * self.m[j] + (1.0 - Self::B1) * g[j];
            self.v[j] = Self::B2 * self.v[j] + (1.0 - Self::B2) * g[j] * g[j];
            p[j] -= lr * (self.m[j] / c1) / ((self.v[j] / c2).sqrt() + Self::EPS);
        }
    }
}

pub fn train_mlp(samples: &[Sample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    if samples.len() < 100 {
        return Err(DegradationError::Training(format!("need at least 100 samples, got {}", samples.len())));
    }
    if !(cfg.learning_rate > 0.0)
        || cfg.epochs == 0
        || cfg.batch_size == 0
        || !(0.0..1.0).contains(&cfg.validation_fraction)
    {
        return Err(DegradationError::Training(format!("bad configuration: {cfg:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((samples.len() as f64) * cfg.validation_fraction).round() as usize;
    let (val_idx, train_idx) = order.split_at(n_val);

    let mut model = MlpModel::initialized(&LAYER_SIZES, rng.random());
    if cfg.zero_output_init {
        let last = model.weights.len() - 1;
        model.weights[last].iter_mut().for_each(|w| *w = 0.0);
    }
    let nt = train_idx.len() as f64;
    for j in 0..INPUTS {
        let vals = train_idx.iter().map(|&i| samples[i].features.to_array()[j]);
        let mean = vals.clone().sum::<f64>() / nt;
        let var = vals.map(|v| (v - mean).powi(2)).sum::<f64>() / nt;
        model.input_shift[j] = mean;
        model.input_scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    let rms = (train_idx.iter().map(|&i| samples[i].label.powi(2)).sum::<f64>() / nt).sqrt();
    model.output_scale = if rms > 0.0 { rms } else { 1.0 };

    let prep = |idx: &[usize], m: &MlpModel| -> (Vec<Vec<f64>>, Vec<f64>) {
        idx.iter().map(|&i| (m.normalize(&samples[i].features.to_array()), samples[i].label / m.output_scale)).unzip()
    };
    let (tx, ty) = prep(train_idx, &model);
    let (vx, vy) = prep(val_idx, &model);

    let mut params = model.parameters();
    let mut adam = Adam::new(params.len());
    let mut batch_order: Vec<usize> = (0..tx.len()).collect();
    let mut train_loss = f64::NAN;
    for epoch in 0..cfg.epochs {
        batch_order.shuffle(&mut rng);
        // cosine decay to a tenth of the initial rate
        let progress = epoch as f64 / cfg.epochs as f64;
        let lr = cfg.learning_rate * (0.1 + 0.9 * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()));
        let mut epoch_loss = 0.0;
        for chunk in batch_order.chunks(cfg.batch_size) {
            let bx: Vec<Vec<f64>> = chunk.iter().map(|&i| tx[i].clone()).collect();
            let by: Vec<f64> = chunk.iter().map(|&i| ty[i]).collect();
            model.set_parameters(&params);
            let (loss, g) = model.loss_and_gradient(&bx, &by);
            if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(DegradationError::Training(format!(
                    "loss diverged in epoch {epoch}; try a learning rate below {}",
                    cfg.learning_rate
                )));
            }
            epoch_loss += loss * chunk.len() as f64;
            adam.step(&mut params, &g, lr);
        }
        train_loss = epoch_loss / tx.len() as f64;
    }
    model.set_parameters(&params);

    let (validation_loss, validation_r2) = if vx.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let (loss, _) = model.loss_and_gradient(&vx, &vy);
        let pred: Vec<f64> = val_idx.iter().map(|&i| model.predict(&samples[i].features)).collect();
        let actual: Vec<f64> = val_idx.iter().map(|&i| samples[i].label).collect();
        (loss, r_squared(&pred, &actual))
    };
    Ok(TrainOutcome {
        model,
        train_loss,
        validation_loss,
        validation_r2,
        train_size: train_idx.len(),
        validation_size: val_idx.len(),
    })
}
