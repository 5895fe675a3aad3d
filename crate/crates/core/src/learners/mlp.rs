//! Small feed-forward network: tanh hidden layers, linear output, trained
//! by seeded mini-batch gradient descent on squared or pinball loss.
//! Inputs and target are standardized internally.

use super::{FeatureMatrix, LearnError, LossKind};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const BATCH_SIZE: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer {
    // weights[out][in]
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub feature_names: Vec<String>,
    layers: Vec<Layer>,
    x_mean: Vec<f64>,
    x_std: Vec<f64>,
    y_mean: f64,
    y_std: f64,
    pub loss: LossKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Full-batch training loss recorded after each epoch.
    pub loss_history: Vec<f64>,
}

pub fn fit_mlp(
    x: &FeatureMatrix,
    y: &[f64],
    hidden: &[usize],
    learning_rate: f64,
    epochs: usize,
    seed: u64,
    loss: LossKind,
) -> Result<MlpModel, LearnError> {
    loss.validate()?;
    if hidden.iter().any(|&h| h == 0) {
        return Err(LearnError::BadSpec("hidden sizes must be positive".into()));
    }
    if !(learning_rate > 0.0) {
        return Err(LearnError::BadSpec("learning rate must be positive".into()));
    }
    let n = x.n_rows();
    if n != y.len() {
        return Err(LearnError::Misaligned(format!(
            "{} feature rows vs {} targets",
            n,
            y.len()
        )));
    }
    if n == 0 {
        return Err(LearnError::ShortSeries { need: 1, got: 0 });
    }

    let p = x.n_cols();
    let (x_mean, x_std) = column_standardization(x);
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let y_var = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / n as f64;
    let y_std = if y_var > 0.0 { y_var.sqrt() } else { 1.0 };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sizes = vec![p];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    let layers = sizes
        .windows(2)
        .map(|io| init_layer(io[0], io[1], &mut rng))
        .collect();

    let mut model = MlpModel {
        feature_names: x.names().to_vec(),
        layers,
        x_mean,
        x_std,
        y_mean,
        y_std,
        loss,
        learning_rate,
        epochs,
        seed,
        loss_history: Vec::new(),
    };

    let xs: Vec<Vec<f64>> = x.rows().iter().map(|r| model.standardize_row(r)).collect();
    let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_std).collect();

    let mut order: Vec<usize> = (0..n).collect();
    for _epoch in 0..epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(BATCH_SIZE) {
            let (batch_loss, grads) = model.batch_gradient(&xs, &ys, batch);
            if !batch_loss.is_finite() {
                return Err(LearnError::Diverged);
            }
            model.apply_gradients(&grads, learning_rate);
        }
        let (epoch_loss, _) = model.batch_gradient(&xs, &ys, &order);
        if !epoch_loss.is_finite() {
            return Err(LearnError::Diverged);
        }
        model.loss_history.push(epoch_loss);
    }
    Ok(model)
}

fn column_standardization(x: &FeatureMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = x.n_rows() as f64;
    let p = x.n_cols();
    let mut mean = vec![0.0; p];
    for row in x.rows() {
        for (j, v) in row.iter().enumerate() {
            mean[j] += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut var = vec![0.0; p];
    for row in x.rows() {
        for (j, v) in row.iter().enumerate() {
            var[j] += (v - mean[j]) * (v - mean[j]);
        }
    }
    let std = var
        .iter()
        .map(|v| {
            let s = (v / n).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

fn init_layer(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Layer {
    // Xavier-uniform.
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Layer {
        weights: (0..fan_out)
            .map(|_| (0..fan_in).map(|_| rng.gen_range(-limit..limit)).collect())
            .collect(),
        bias: vec![0.0; fan_out],
    }
}

impl MlpModel {
    fn standardize_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| (v - self.x_mean[j]) / self.x_std[j])
            .collect()
    }

    /// Forward pass on a standardized input; returns activations per layer
    /// (the input itself first, the scalar output last).
    fn forward(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let last = self.layers.len() - 1;
        let mut activations = vec![input.to_vec()];
        for (li, layer) in self.layers.iter().enumerate() {
            let prev = activations.last().unwrap();
            let mut out = Vec::with_capacity(layer.bias.len());
            for (w_row, b) in layer.weights.iter().zip(&layer.bias) {
                let z: f64 = w_row.iter().zip(prev).map(|(w, a)| w * a).sum::<f64>() + b;
                out.push(if li == last { z } else { z.tanh() });
            }
            activations.push(out);
        }
        activations
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>, LearnError> {
        if x.names() != self.feature_names.as_slice() {
            return Err(LearnError::Misaligned(format!(
                "feature schema {:?} does not match the fitted schema {:?}",
                x.names(),
                self.feature_names
            )));
        }
        Ok(x.rows()
            .iter()
            .map(|row| {
                let std_row = self.standardize_row(row);
                let out = self.forward(&std_row).pop().unwrap()[0];
                out * self.y_std + self.y_mean
            })
            .collect())
    }

    /// Mean loss and flattened weight gradient over the given rows
    /// (standardized space). Backprop for the tanh/linear architecture.
    fn batch_gradient(
        &self,
        xs: &[Vec<f64>],
        ys: &[f64],
        batch: &[usize],
    ) -> (f64, Vec<(Vec<Vec<f64>>, Vec<f64>)>) {
        let mut grads: Vec<(Vec<Vec<f64>>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| {
                (
                    l.weights.iter().map(|r| vec![0.0; r.len()]).collect(),
                    vec![0.0; l.bias.len()],
                )
            })
            .collect();
        let mut total_loss = 0.0;
        for &i in batch {
            let activations = self.forward(&xs[i]);
            let yhat = activations.last().unwrap()[0];
            let y = ys[i];
            total_loss += self.loss.eval(y, yhat);
            // dL/dyhat
            let g = match self.loss {
                LossKind::Squared => 2.0 * (yhat - y),
                LossKind::Pinball(q) => {
                    let r = y - yhat;
                    if r > 0.0 {
                        -q
                    } else if r < 0.0 {
                        1.0 - q
                    } else {
                        0.0
                    }
                }
            };
            // Backwards: delta over layer outputs.
            let mut delta = vec![g];
            for li in (0..self.layers.len()).rev() {
                let input = &activations[li];
                for (o, d) in delta.iter().enumerate() {
                    for (j, a) in input.iter().enumerate() {
                        grads[li].0[o][j] += d * a;
                    }
                    grads[li].1[o] += d;
                }
                if li == 0 {
                    break;
                }
                // Propagate through weights, then through the tanh of layer li-1.
                let mut prev_delta = vec![0.0; input.len()];
                for (o, d) in delta.iter().enumerate() {
                    for (j, w) in self.layers[li].weights[o].iter().enumerate() {
                        prev_delta[j] += d * w;
                    }
                }
                for (j, pd) in prev_delta.iter_mut().enumerate() {
                    let a = activations[li][j];
                    *pd *= 1.0 - a * a;
                }
                delta = prev_delta;
            }
        }
        let scale = 1.0 / batch.len() as f64;
        for (gw, gb) in grads.iter_mut() {
            for row in gw.iter_mut() {
                for v in row.iter_mut() {
                    *v *= scale;
                }
            }
            for v in gb.iter_mut() {
                *v *= scale;
            }
        }
        (total_loss * scale, grads)
    }

    fn apply_gradients(&mut self, grads: &[(Vec<Vec<f64>>, Vec<f64>)], lr: f64) {
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(grads) {
            for (w_row, g_row) in layer.weights.iter_mut().zip(gw) {
                for (w, g) in w_row.iter_mut().zip(g_row) {
                    *w -= lr * g;
                }
            }
            for (b, g) in layer.bias.iter_mut().zip(gb) {
                *b -= lr * g;
            }
        }
    }

    /// Flattened copy of all weights and biases, layer by layer.
    pub fn weights_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for row in &layer.weights {
                out.extend_from_slice(row);
            }
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    pub fn set_weights_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        for layer in &mut self.layers {
            for row in &mut layer.weights {
                for w in row.iter_mut() {
                    *w = *it.next().expect("enough weights");
                }
            }
            for b in &mut layer.bias {
                *b = *it.next().expect("enough weights");
            }
        }
        assert!(it.next().is_none(), "weight vector too long");
    }

    /// Mean training loss and its gradient with respect to the flattened
    /// weights, evaluated on raw (unstandardized) data. Diagnostic hook,
    /// also used by the finite-difference tests.
    pub fn loss_and_gradient(&self, x: &FeatureMatrix, y: &[f64]) -> Result<(f64, Vec<f64>), LearnError> {
        if x.n_rows() != y.len() {
            return Err(LearnError::Misaligned(format!(
                "{} feature rows vs {} targets",
                x.n_rows(),
                y.len()
            )));
        }
        let xs: Vec<Vec<f64>> = x.rows().iter().map(|r| self.standardize_row(r)).collect();
        let ys: Vec<f64> = y.iter().map(|v| (v - self.y_mean) / self.y_std).collect();
        let batch: Vec<usize> = (0..y.len()).collect();
        let (loss, grads) = self.batch_gradient(&xs, &ys, &batch);
        let mut flat = Vec::new();
        for (gw, gb) in &grads {
            for row in gw {
                flat.extend_from_slice(row);
            }
            flat.extend_from_slice(gb);
        }
        Ok((loss, flat))
    }
}
