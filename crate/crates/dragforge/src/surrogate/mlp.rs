//! Fully-connected ReLU regressor trained by full-batch gradient descent.
//!
//! Inputs and targets are standardized inside the model so prediction and
//! input gradients stay consistent with the stored statistics.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DragSample};
use crate::error::{Error, Result};
use crate::geometry::ShapeParams;

pub const INPUT_DIM: usize = 5;
pub const HIDDEN_LAYERS: usize = 6;
pub const HIDDEN_WIDTH: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// (out, in) weight matrix.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    /// Hidden layers followed by the linear output layer.
    pub layers: Vec<Layer>,
    pub x_mean: [f64; INPUT_DIM],
    pub x_std: [f64; INPUT_DIM],
    pub y_mean: f64,
    pub y_std: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub step_size: f64,
    pub epochs: usize,
    pub checkpoint_interval: usize,
    pub test_fraction: f64,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            step_size: 1e-3,
            epochs: 20_000,
            checkpoint_interval: 1000,
            test_fraction: 0.2,
            seed: 0,
            init_scale: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size >= 0.0) {
            return Err(Error::invalid("step_size", "must be >= 0"));
        }
        if self.checkpoint_interval < 1 {
            return Err(Error::invalid("checkpoint_interval", "must be >= 1"));
        }
        if self.epochs < self.checkpoint_interval {
            return Err(Error::invalid("epochs", "must be >= checkpoint_interval"));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::invalid("test_fraction", "must lie in [0, 1)"));
        }
        if !(self.init_scale > 0.0) {
            return Err(Error::invalid("init_scale", "must be > 0"));
        }
        Ok(())
    }
}

/// Loss record of one training run; losses are standardized-target MSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// (epoch, train MSE) at every checkpoint interval.
    pub loss_checkpoints: Vec<(usize, f64)>,
    pub final_train_mse: f64,
    pub final_test_mse: f64,
    pub grad_norm_at_init: f64,
    pub seed: u64,
}

/// Divergence during training; keeps what was recorded so far.
#[derive(Debug, Clone)]
pub struct TrainError {
    pub epoch: usize,
    pub trace: TrainTrace,
}

impl std::fmt::Display for TrainError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "training diverged at epoch {}", self.epoch)
    }
}

impl std::error::Error for TrainError {}

impl From<TrainError> for Error {
    fn from(e: TrainError) -> Self {
        Error::TrainingDiverged(e.to_string())
    }
}

/// Standard architecture: six hidden layers of 32 units.
pub fn mlp_init(seed: u64, init_scale: f64) -> MlpModel {
    mlp_init_custom(seed, init_scale, HIDDEN_LAYERS, HIDDEN_WIDTH)
}

/// Weights uniform in ±init_scale·√(1/fan_in), biases zero.
pub fn mlp_init_custom(
    seed: u64,
    init_scale: f64,
    hidden_layers: usize,
    hidden_width: usize,
) -> MlpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dims = vec![INPUT_DIM];
    dims.extend(std::iter::repeat(hidden_width).take(hidden_layers));
    dims.push(1);
    let layers = dims
        .windows(2)
        .map(|d| {
            let (fan_in, fan_out) = (d[0], d[1]);
            let limit = init_scale * (1.0 / fan_in as f64).sqrt();
            let w = Array2::from_shape_fn((fan_out, fan_in), |_| rng.gen_range(-limit..=limit));
            Layer { w, b: Array1::zeros(fan_out) }
        })
        .collect();
    MlpModel {
        layers,
        x_mean: [0.0; INPUT_DIM],
        x_std: [1.0; INPUT_DIM],
        y_mean: 0.0,
        y_std: 1.0,
        seed,
    }
}

fn standardize(m: &MlpModel, p: &ShapeParams) -> [f64; INPUT_DIM] {
    let x = p.as_features();
    let mut out = [0.0; INPUT_DIM];
    for i in 0..INPUT_DIM {
        out[i] = (x[i] - m.x_mean[i]) / m.x_std[i];
    }
    out
}

/// Network output in original drag units.
pub fn mlp_forward(m: &MlpModel, p: &ShapeParams) -> f64 {
    let mut a: Vec<f64> = standardize(m, p).to_vec();
    let last = m.layers.len() - 1;
    for (k, layer) in m.layers.iter().enumerate() {
        let mut next = vec![0.0; layer.b.len()];
        for (r, nv) in next.iter_mut().enumerate() {
            let mut acc = layer.b[r];
            for (c, &av) in a.iter().enumerate() {
                acc += layer.w[(r, c)] * av;
            }
            *nv = if k < last { acc.max(0.0) } else { acc };
        }
        a = next;
    }
    m.y_mean + m.y_std * a[0]
}

/// Exact reverse-mode gradient of the scalar output with respect to the
/// raw features (θ₁..θ₄, width); ReLU kinks take subgradient zero.
pub fn mlp_input_gradient(m: &MlpModel, p: &ShapeParams) -> [f64; INPUT_DIM] {
    let last = m.layers.len() - 1;
    let mut a: Vec<f64> = standardize(m, p).to_vec();
    let mut acts: Vec<Vec<f64>> = vec![a.clone()];
    for (k, layer) in m.layers.iter().enumerate() {
        let mut next = vec![0.0; layer.b.len()];
        for (r, nv) in next.iter_mut().enumerate() {
            let mut acc = layer.b[r];
            for (c, &av) in a.iter().enumerate() {
                acc += layer.w[(r, c)] * av;
            }
            *nv = if k < last { acc.max(0.0) } else { acc };
        }
        acts.push(next.clone());
        a = next;
    }
    // backward: d out / d a_k
    let mut delta = vec![1.0f64];
    for k in (0..m.layers.len()).rev() {
        let layer = &m.layers[k];
        let mut prev = vec![0.0; layer.w.ncols()];
        for (c, pv) in prev.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (r, &dv) in delta.iter().enumerate() {
                acc += layer.w[(r, c)] * dv;
            }
            *pv = acc;
        }
        if k > 0 {
            // gate by this layer's ReLU activity
            for (c, pv) in prev.iter_mut().enumerate() {
                if acts[k][c] <= 0.0 {
                    *pv = 0.0;
                }
            }
        }
        delta = prev;
    }
    let mut grad = [0.0; INPUT_DIM];
    for i in 0..INPUT_DIM {
        grad[i] = m.y_std * delta[i] / m.x_std[i];
    }
    grad
}

/// Design matrix in the model's standardized space.
fn features_matrix(m: &MlpModel, samples: &[DragSample]) -> Array2<f64> {
    let mut x = Array2::zeros((samples.len(), INPUT_DIM));
    for (r, s) in samples.iter().enumerate() {
        let f = standardize(m, &s.params);
        for c in 0..INPUT_DIM {
            x[(r, c)] = f[c];
        }
    }
    x
}

fn targets_std(m: &MlpModel, samples: &[DragSample]) -> Array1<f64> {
    Array1::from_iter(samples.iter().map(|s| (s.drag - m.y_mean) / m.y_std))
}

/// Forward over a batch, keeping post-activation values per layer.
fn forward_batch(layers: &[Layer], x: &Array2<f64>) -> Vec<Array2<f64>> {
    let last = layers.len() - 1;
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(x.clone());
    for (k, layer) in layers.iter().enumerate() {
        let mut z = acts[k].dot(&layer.w.t());
        z += &layer.b;
        if k < last {
            z.mapv_inplace(|v| v.max(0.0));
        }
        acts.push(z);
    }
    acts
}

/// Standardized-target MSE over a slice of samples.
pub fn batch_loss(m: &MlpModel, samples: &[DragSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let x = features_matrix(m, samples);
    let y = targets_std(m, samples);
    let acts = forward_batch(&m.layers, &x);
    let pred = acts.last().unwrap().column(0);
    let n = samples.len() as f64;
    pred.iter().zip(y.iter()).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n
}

/// MSE gradient with respect to every weight and bias, same layer order.
pub fn batch_param_gradient(m: &MlpModel, samples: &[DragSample]) -> Vec<(Array2<f64>, Array1<f64>)> {
    let x = features_matrix(m, samples);
    let y = targets_std(m, samples);
    let acts = forward_batch(&m.layers, &x);
    param_grad_from_acts(&m.layers, &acts, &y).1
}

/// Returns (loss, gradients) given precomputed activations.
fn param_grad_from_acts(
    layers: &[Layer],
    acts: &[Array2<f64>],
    y: &Array1<f64>,
) -> (f64, Vec<(Array2<f64>, Array1<f64>)>) {
    let n = y.len() as f64;
    let pred = acts.last().unwrap().column(0);
    let resid: Array1<f64> = &pred - y;
    let loss = resid.iter().map(|e| e * e).sum::<f64>() / n;

    let mut grads: Vec<(Array2<f64>, Array1<f64>)> = Vec::with_capacity(layers.len());
    // delta: (n, out) gradient of loss wrt layer pre-activation
    let mut delta: Array2<f64> = resid.insert_axis(Axis(1)) * (2.0 / n);
    for k in (0..layers.len()).rev() {
        let dw = delta.t().dot(&acts[k]);
        let db = delta.sum_axis(Axis(0));
        if k > 0 {
            let mut prev = delta.dot(&layers[k].w);
            prev.zip_mut_with(&acts[k], |d, &a| {
                if a <= 0.0 {
                    *d = 0.0;
                }
            });
            delta = prev;
        }
        grads.push((dw, db));
    }
    grads.reverse();
    (loss, grads)
}

/// Full-batch gradient descent on MSE. The test split (last ⌈f·n⌉ samples
/// of a seed-shuffled order) is held out of every gradient step; the
/// standardization statistics come from the training split and are stored
/// in the returned model.
pub fn train(
    init: &MlpModel,
    ds: &Dataset,
    cfg: &TrainConfig,
) -> std::result::Result<(MlpModel, TrainTrace), TrainError> {
    cfg.validate().expect("invalid TrainConfig");
    assert!(!ds.is_empty(), "dataset must be non-empty");

    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order.shuffle(&mut rng);
    let n_test = (cfg.test_fraction * ds.len() as f64).ceil() as usize;
    let n_train = ds.len() - n_test;
    assert!(n_train > 0, "test_fraction leaves no training data");
    let train_samples: Vec<DragSample> = order[..n_train].iter().map(|&i| ds.samples[i]).collect();
    let test_samples: Vec<DragSample> = order[n_train..].iter().map(|&i| ds.samples[i]).collect();

    let mut model = init.clone();
    set_standardization(&mut model, &train_samples);

    let x = features_matrix(&model, &train_samples);
    let y = targets_std(&model, &train_samples);

    let mut checkpoints = Vec::new();
    let mut grad_norm_at_init = 0.0;
    let mut last_loss = f64::NAN;

    for epoch in 1..=cfg.epochs {
        let acts = forward_batch(&model.layers, &x);
        let (loss, grads) = param_grad_from_acts(&model.layers, &acts, &y);
        if epoch == 1 {
            grad_norm_at_init = grads
                .iter()
                .map(|(dw, db)| {
                    dw.iter().map(|v| v * v).sum::<f64>() + db.iter().map(|v| v * v).sum::<f64>()
                })
                .sum::<f64>()
                .sqrt();
        }
        if !loss.is_finite() {
            return Err(TrainError {
                epoch,
                trace: TrainTrace {
                    loss_checkpoints: checkpoints,
                    final_train_mse: loss,
                    final_test_mse: f64::NAN,
                    grad_norm_at_init,
                    seed: model.seed,
                },
            });
        }
        for (layer, (dw, db)) in model.layers.iter_mut().zip(grads.iter()) {
            layer.w.scaled_add(-cfg.step_size, dw);
            layer.b.scaled_add(-cfg.step_size, db);
        }
        last_loss = loss;
        if epoch % cfg.checkpoint_interval == 0 {
            checkpoints.push((epoch, loss));
        }
    }

    let final_train_mse = batch_loss(&model, &train_samples);
    let final_test_mse =
        if test_samples.is_empty() { final_train_mse } else { batch_loss(&model, &test_samples) };
    if !final_train_mse.is_finite() {
        return Err(TrainError {
            epoch: cfg.epochs,
            trace: TrainTrace {
                loss_checkpoints: checkpoints,
                final_train_mse,
                final_test_mse,
                grad_norm_at_init,
                seed: model.seed,
            },
        });
    }
    let _ = last_loss;
    Ok((
        model.clone(),
        TrainTrace {
            loss_checkpoints: checkpoints,
            final_train_mse,
            final_test_mse,
            grad_norm_at_init,
            seed: model.seed,
        },
    ))
}

fn set_standardization(model: &mut MlpModel, samples: &[DragSample]) {
    let n = samples.len() as f64;
    let mut mean = [0.0; INPUT_DIM];
    let mut var = [0.0; INPUT_DIM];
    for s in samples {
        let f = s.params.as_features();
        for i in 0..INPUT_DIM {
            mean[i] += f[i];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    for s in samples {
        let f = s.params.as_features();
        for i in 0..INPUT_DIM {
            var[i] += (f[i] - mean[i]) * (f[i] - mean[i]);
        }
    }
    let mut std = [1.0; INPUT_DIM];
    for i in 0..INPUT_DIM {
        let s = (var[i] / n).sqrt();
        std[i] = if s > 1e-12 { s } else { 1.0 };
    }
    let y_mean = samples.iter().map(|s| s.drag).sum::<f64>() / n;
    let y_var = samples.iter().map(|s| (s.drag - y_mean) * (s.drag - y_mean)).sum::<f64>() / n;
    let y_std = if y_var.sqrt() > 1e-12 { y_var.sqrt() } else { 1.0 };
    model.x_mean = mean;
    model.x_std = std;
    model.y_mean = y_mean;
    model.y_std = y_std;
}

#[derive(Serialize, Deserialize)]
struct MlpJson {
    version: String,
    layer_dims: Vec<(usize, usize)>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    x_mean: [f64; INPUT_DIM],
    x_std: [f64; INPUT_DIM],
    y_mean: f64,
    y_std: f64,
    seed: u64,
}

impl MlpModel {
    pub fn to_json(&self) -> String {
        let dto = MlpJson {
            version: "mlp-v1".into(),
            layer_dims: self.layers.iter().map(|l| (l.w.nrows(), l.w.ncols())).collect(),
            weights: self.layers.iter().map(|l| l.w.iter().copied().collect()).collect(),
            biases: self.layers.iter().map(|l| l.b.to_vec()).collect(),
            x_mean: self.x_mean,
            x_std: self.x_std,
            y_mean: self.y_mean,
            y_std: self.y_std,
            seed: self.seed,
        };
        serde_json::to_string_pretty(&dto).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dto: MlpJson = serde_json::from_str(text)?;
        if dto.version != "mlp-v1" {
            return Err(Error::invalid("version", format!("expected mlp-v1, got {}", dto.version)));
        }
        if dto.layer_dims.len() != dto.weights.len() || dto.layer_dims.len() != dto.biases.len() {
            return Err(Error::invalid("layers", "dims/weights/biases length mismatch"));
        }
        let mut prev = INPUT_DIM;
        let mut layers = Vec::with_capacity(dto.layer_dims.len());
        for (k, (&(rows, cols), flat)) in dto.layer_dims.iter().zip(&dto.weights).enumerate() {
            if cols != prev {
                return Err(Error::invalid(
                    format!("layer[{k}]"),
                    format!("expected {prev} input columns, got {cols}"),
                ));
            }
            if flat.len() != rows * cols || dto.biases[k].len() != rows {
                return Err(Error::invalid(format!("layer[{k}]"), "shape mismatch"));
            }
            let w = Array2::from_shape_vec((rows, cols), flat.clone())
                .map_err(|e| Error::invalid(format!("layer[{k}]"), e.to_string()))?;
            layers.push(Layer { w, b: Array1::from_vec(dto.biases[k].clone()) });
            prev = rows;
        }
        if prev != 1 {
            return Err(Error::invalid("layers", "output layer must have a single unit"));
        }
        Ok(MlpModel {
            layers,
            x_mean: dto.x_mean,
            x_std: dto.x_std,
            y_mean: dto.y_mean,
            y_std: dto.y_std,
            seed: dto.seed,
        })
    }
}
