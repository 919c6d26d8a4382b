//! From-scratch feed-forward network for the modulation-index to
//! switching-angle map.
//!
//! The network is deliberately tiny: one input (m), tanh hidden layers, `s`
//! linear outputs (angles). Inputs are normalized to `[-1, 1]` over the
//! training range; targets are offset by their per-output mean and scaled by
//! `pi/2`. Training is full-batch gradient descent on mean squared error with
//! no momentum, so a `(seed, dataset, epochs, lr)` tuple reproduces the exact
//! same weights bit for bit.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::harmonics::{SwitchingAngleSet, ANGLE_EPSILON};
use crate::she_solver::AngleTable;

/// Hidden-layer activation tag. Outputs are always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

/// Affine normalization: `normalized = (raw - offset) / scale`.
pub type Norm = (f64, f64);

/// A feed-forward network plus the normalization constants and training
/// range needed to use it safely at prediction time.
///
/// Serialized as a single JSON document; `weights[l][i][j]` is the weight
/// from input `j` to output `i` of layer `l` (row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    /// Input normalization (offset, scale).
    pub input_norm: Norm,
    /// Per-output normalization (offset, scale).
    pub output_norm: Vec<Norm>,
    /// Modulation-index interval the model was trained on.
    pub train_range: Option<(f64, f64)>,
    pub seed: u64,
}

/// Rows of `(m, target angles in radians)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingDataset {
    rows: Vec<(f64, Vec<f64>)>,
    s: usize,
}

impl TrainingDataset {
    pub fn new(rows: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(domain("training dataset must be non-empty"));
        };
        let s = first.1.len();
        if s == 0 {
            return Err(domain("training targets must contain at least one angle"));
        }
        for (i, (m, angles)) in rows.iter().enumerate() {
            if !m.is_finite() {
                return Err(domain(format!("row {i}: non-finite m")));
            }
            if angles.len() != s {
                return Err(domain(format!(
                    "row {i}: expected {s} angles, got {}",
                    angles.len()
                )));
            }
        }
        let mut ms: Vec<f64> = rows.iter().map(|r| r.0).collect();
        ms.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if ms.windows(2).any(|w| w[0] == w[1]) {
            return Err(domain("modulation indices must be distinct"));
        }
        Ok(Self { rows, s })
    }

    /// Builds a dataset from the clean converged rows of an angle table.
    pub fn from_angle_table(table: &AngleTable) -> Result<Self> {
        let rows: Vec<(f64, Vec<f64>)> = table
            .clean_rows()
            .filter_map(|r| {
                let m = r.m?;
                Some((m, r.angles_deg.iter().map(|d| d.to_radians()).collect()))
            })
            .collect();
        Self::new(rows)
    }

    /// Splits off every 5th row (offset `phase`) as a held-out set. The first
    /// and last rows always stay in the training split so held-out points are
    /// interpolations, not range-edge extrapolations.
    pub fn split_holdout(&self, phase: usize) -> (TrainingDataset, Vec<(f64, Vec<f64>)>) {
        let mut train = Vec::new();
        let mut held = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            if i % 5 == phase % 5 && i != 0 && i != self.rows.len() - 1 {
                held.push(row.clone());
            } else {
                train.push(row.clone());
            }
        }
        (
            TrainingDataset {
                rows: train,
                s: self.s,
            },
            held,
        )
    }

    pub fn rows(&self) -> &[(f64, Vec<f64>)] {
        &self.rows
    }

    pub fn angle_count(&self) -> usize {
        self.s
    }

    pub fn m_range(&self) -> (f64, f64) {
        let lo = self.rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
        let hi = self
            .rows
            .iter()
            .map(|r| r.0)
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Initializes a network with Xavier-uniform weights
/// (`+-sqrt(6 / (fan_in + fan_out))`) and zero biases. Deterministic per
/// seed.
pub fn init_mlp(layer_sizes: &[usize], seed: u64) -> Result<MlpModel> {
    if layer_sizes.len() < 2 {
        return Err(domain("network needs at least an input and an output layer"));
    }
    if layer_sizes.contains(&0) {
        return Err(domain("layer sizes must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
    let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
    for w in layer_sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let layer: Vec<Vec<f64>> = (0..fan_out)
            .map(|_| {
                (0..fan_in)
                    .map(|_| rng.random_range(-limit..limit))
                    .collect()
            })
            .collect();
        weights.push(layer);
        biases.push(vec![0.0; fan_out]);
    }
    let outputs = *layer_sizes.last().unwrap();
    Ok(MlpModel {
        layer_sizes: layer_sizes.to_vec(),
        activation: Activation::Tanh,
        weights,
        biases,
        input_norm: (0.0, 1.0),
        output_norm: vec![(0.0, PI / 2.0); outputs],
        train_range: None,
        seed,
    })
}

impl MlpModel {
    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Evaluates the network on an already-normalized input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(domain(format!(
                "input has {} values, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        Ok(self.forward_all(input).pop().unwrap())
    }

    /// Forward pass keeping all layer activations (input first).
    fn forward_all(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![input.to_vec()];
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let prev = acts.last().unwrap();
            let mut next = Vec::with_capacity(b.len());
            for (row, bias) in w.iter().zip(b) {
                let z: f64 = row.iter().zip(prev).map(|(wij, a)| wij * a).sum::<f64>() + bias;
                next.push(if l < last { z.tanh() } else { z });
            }
            acts.push(next);
        }
        acts
    }

    fn normalize_input(&self, m: f64) -> f64 {
        (m - self.input_norm.0) / self.input_norm.1
    }

    fn denormalize_outputs(&self, out: &[f64]) -> Vec<f64> {
        out.iter()
            .zip(&self.output_norm)
            .map(|(y, (off, scale))| y * scale + off)
            .collect()
    }

    fn normalize_targets(&self, angles: &[f64]) -> Vec<f64> {
        angles
            .iter()
            .zip(&self.output_norm)
            .map(|(a, (off, scale))| (a - off) / scale)
            .collect()
    }

    /// Writes the model as a single JSON document.
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("model serialization failed: {e}")))?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let model: MlpModel = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("model parse failed: {e}")))?;
        if model.output_norm.len() != model.output_dim() {
            return Err(Error::Format(
                "output_norm length does not match the output layer".into(),
            ));
        }
        if model.output_norm.iter().any(|(_, s)| *s == 0.0) || model.input_norm.1 == 0.0 {
            return Err(Error::Format("normalization scales must be nonzero".into()));
        }
        Ok(model)
    }
}

/// Per-sample loss in normalized space: mean over outputs of the squared
/// error. The full-batch loss is the mean of this over all samples.
fn sample_loss(model: &MlpModel, x: f64, y: &[f64]) -> f64 {
    let acts = model.forward_all(&[x]);
    let pred = acts.last().unwrap();
    pred.iter()
        .zip(y)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / y.len() as f64
}

/// Trains a copy of `model` by full-batch gradient descent on MSE.
///
/// Normalization constants and the training range are (re)derived from the
/// dataset before the first epoch. The returned history holds `epochs + 1`
/// entries, the first being the loss before any update.
pub fn train(
    model: &MlpModel,
    dataset: &TrainingDataset,
    epochs: usize,
    learning_rate: f64,
) -> Result<(MlpModel, Vec<f64>)> {
    if learning_rate <= 0.0 {
        return Err(domain("learning rate must be positive"));
    }
    if model.input_dim() != 1 {
        return Err(domain("angle-map training expects a single input (m)"));
    }
    if model.output_dim() != dataset.angle_count() {
        return Err(domain(format!(
            "network has {} outputs, dataset targets {} angles",
            model.output_dim(),
            dataset.angle_count()
        )));
    }

    let mut model = model.clone();
    let (lo, hi) = dataset.m_range();
    model.input_norm = if hi > lo {
        ((lo + hi) / 2.0, (hi - lo) / 2.0)
    } else {
        (lo, 1.0)
    };
    let n = dataset.rows().len();
    let dout = model.output_dim();
    for k in 0..dout {
        let mean = dataset.rows().iter().map(|r| r.1[k]).sum::<f64>() / n as f64;
        model.output_norm[k] = (mean, PI / 2.0);
    }
    model.train_range = Some((lo, hi));

    // pre-normalize the dataset once
    let data: Vec<(f64, Vec<f64>)> = dataset
        .rows()
        .iter()
        .map(|(m, angles)| (model.normalize_input(*m), model.normalize_targets(angles)))
        .collect();

    let batch_loss = |model: &MlpModel| -> f64 {
        data.iter()
            .map(|(x, y)| sample_loss(model, *x, y))
            .sum::<f64>()
            / n as f64
    };

    let mut history = Vec::with_capacity(epochs + 1);
    history.push(batch_loss(&model));

    let layers = model.weights.len();
    for _ in 0..epochs {
        let mut gw: Vec<Vec<Vec<f64>>> = model
            .weights
            .iter()
            .map(|l| l.iter().map(|r| vec![0.0; r.len()]).collect())
            .collect();
        let mut gb: Vec<Vec<f64>> = model.biases.iter().map(|b| vec![0.0; b.len()]).collect();

        for (x, y) in &data {
            let acts = model.forward_all(&[*x]);
            let pred = acts.last().unwrap();
            // dL/dpred for L = sum over samples and outputs / (n * dout)
            let mut delta: Vec<f64> = pred
                .iter()
                .zip(y)
                .map(|(p, t)| 2.0 * (p - t) / (n * dout) as f64)
                .collect();
            for l in (0..layers).rev() {
                let a_in = &acts[l];
                for (i, d) in delta.iter().enumerate() {
                    for (j, a) in a_in.iter().enumerate() {
                        gw[l][i][j] += d * a;
                    }
                    gb[l][i] += d;
                }
                if l > 0 {
                    let mut prev_delta = vec![0.0; a_in.len()];
                    for (i, d) in delta.iter().enumerate() {
                        for (j, pd) in prev_delta.iter_mut().enumerate() {
                            *pd += model.weights[l][i][j] * d;
                        }
                    }
                    // tanh'(z) = 1 - tanh(z)^2, and a_in holds tanh(z)
                    for (pd, a) in prev_delta.iter_mut().zip(a_in) {
                        *pd *= 1.0 - a * a;
                    }
                    delta = prev_delta;
                }
            }
        }
        for l in 0..layers {
            for i in 0..model.weights[l].len() {
                for (w, g) in model.weights[l][i].iter_mut().zip(&gw[l][i]) {
                    *w -= learning_rate * g;
                }
                model.biases[l][i] -= learning_rate * gb[l][i];
            }
        }
        history.push(batch_loss(&model));
    }
    Ok((model, history))
}

/// Backprop gradient of the per-sample loss, for gradient checking.
fn sample_gradients(model: &MlpModel, x: f64, y: &[f64]) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>) {
    let layers = model.weights.len();
    let mut gw: Vec<Vec<Vec<f64>>> = model
        .weights
        .iter()
        .map(|l| l.iter().map(|r| vec![0.0; r.len()]).collect())
        .collect();
    let mut gb: Vec<Vec<f64>> = model.biases.iter().map(|b| vec![0.0; b.len()]).collect();
    let acts = model.forward_all(&[x]);
    let pred = acts.last().unwrap();
    let dout = y.len();
    let mut delta: Vec<f64> = pred
        .iter()
        .zip(y)
        .map(|(p, t)| 2.0 * (p - t) / dout as f64)
        .collect();
    for l in (0..layers).rev() {
        let a_in = &acts[l];
        for (i, d) in delta.iter().enumerate() {
            for (j, a) in a_in.iter().enumerate() {
                gw[l][i][j] = d * a;
            }
            gb[l][i] = *d;
        }
        if l > 0 {
            let mut prev_delta = vec![0.0; a_in.len()];
            for (i, d) in delta.iter().enumerate() {
                for (j, pd) in prev_delta.iter_mut().enumerate() {
                    *pd += model.weights[l][i][j] * d;
                }
            }
            for (pd, a) in prev_delta.iter_mut().zip(a_in) {
                *pd *= 1.0 - a * a;
            }
            delta = prev_delta;
        }
    }
    (gw, gb)
}

/// Compares the backprop gradient of the per-sample loss against central
/// finite differences on every weight and bias; returns the worst relative
/// error. `sample` is a raw `(m, angles)` pair, normalized with the model's
/// own constants.
#[allow(clippy::needless_range_loop)]
pub fn gradient_check(model: &MlpModel, sample: (f64, &[f64]), epsilon: f64) -> Result<f64> {
    if epsilon <= 0.0 {
        return Err(domain("epsilon must be positive"));
    }
    if sample.1.len() != model.output_dim() {
        return Err(domain("sample target length does not match the network"));
    }
    let x = model.normalize_input(sample.0);
    let y = model.normalize_targets(sample.1);
    let (gw, gb) = sample_gradients(model, x, &y);

    let mut worst: f64 = 0.0;
    let mut probe = model.clone();
    let rel = |bp: f64, fd: f64| (bp - fd).abs() / (bp.abs() + fd.abs()).max(1e-6);
    for l in 0..model.weights.len() {
        for i in 0..model.weights[l].len() {
            for j in 0..model.weights[l][i].len() {
                let orig = model.weights[l][i][j];
                probe.weights[l][i][j] = orig + epsilon;
                let lp = sample_loss(&probe, x, &y);
                probe.weights[l][i][j] = orig - epsilon;
                let lm = sample_loss(&probe, x, &y);
                probe.weights[l][i][j] = orig;
                worst = worst.max(rel(gw[l][i][j], (lp - lm) / (2.0 * epsilon)));
            }
            let orig = model.biases[l][i];
            probe.biases[l][i] = orig + epsilon;
            let lp = sample_loss(&probe, x, &y);
            probe.biases[l][i] = orig - epsilon;
            let lm = sample_loss(&probe, x, &y);
            probe.biases[l][i] = orig;
            worst = worst.max(rel(gb[l][i], (lp - lm) / (2.0 * epsilon)));
        }
    }
    Ok(worst)
}

/// Turns raw network outputs into a valid angle set: sort, clamp into the
/// open interval, separate any coincident neighbors.
fn sanitize_angles(mut angles: Vec<f64>) -> Result<SwitchingAngleSet> {
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let hi = PI / 2.0 - ANGLE_EPSILON;
    for a in angles.iter_mut() {
        *a = a.clamp(ANGLE_EPSILON, hi);
    }
    let sep = 1e-9;
    for k in 1..angles.len() {
        if angles[k] <= angles[k - 1] {
            angles[k] = angles[k - 1] + sep;
        }
    }
    // if the cascade pushed past the top, walk back down
    for k in (0..angles.len().saturating_sub(1)).rev() {
        if angles[k + 1] > hi {
            angles[k + 1] = hi;
        }
        if angles[k] >= angles[k + 1] {
            angles[k] = angles[k + 1] - sep;
        }
    }
    SwitchingAngleSet::new(angles)
}

/// Predicts switching angles at `m`, erroring if `m` lies outside the
/// model's recorded training range.
pub fn predict_angles(model: &MlpModel, m: f64) -> Result<SwitchingAngleSet> {
    let (lo, hi) = model
        .train_range
        .ok_or_else(|| domain("model carries no training range; train it first"))?;
    if m < lo || m > hi {
        return Err(Error::Extrapolation { m, lo, hi });
    }
    let out = model.forward(&[model.normalize_input(m)])?;
    sanitize_angles(model.denormalize_outputs(&out))
}

/// Like [`predict_angles`] but clamps out-of-range requests to the nearest
/// trained modulation index instead of erroring. Returns the angle set and
/// whether clamping occurred, so callers can surface the extrapolation
/// explicitly.
pub fn predict_angles_clamped(model: &MlpModel, m: f64) -> Result<(SwitchingAngleSet, bool)> {
    let (lo, hi) = model
        .train_range
        .ok_or_else(|| domain("model carries no training range; train it first"))?;
    let clamped = m.clamp(lo, hi);
    let out = model.forward(&[model.normalize_input(clamped)])?;
    Ok((
        sanitize_angles(model.denormalize_outputs(&out))?,
        clamped != m,
    ))
}
