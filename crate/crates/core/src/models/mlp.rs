use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{check_labels, logistic, Model, TrainConfig};
use crate::error::{check_dim, Error, Result};
use crate::seed;

/// Fully connected layer, `weights` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    fn glorot(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weights =
            Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-limit..limit));
        Self {
            weights,
            bias: Array1::zeros(fan_out),
        }
    }
}

/// Rectifier MLP with a single logistic output unit.
///
/// At a rectifier input of exactly 0 the derivative is taken as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<DenseLayer>,
}

impl MlpModel {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("an MLP needs at least one layer".into()));
        }
        for (l, layer) in layers.iter().enumerate() {
            check_dim(layer.weights.nrows(), layer.bias.len())?;
            if l > 0 {
                check_dim(layers[l - 1].weights.nrows(), layer.weights.ncols())?;
            }
        }
        check_dim(1, layers.last().map_or(0, |l| l.weights.nrows()))?;
        Ok(Self { layers })
    }

    fn widths(input_dim: usize, hidden: &[usize]) -> Vec<usize> {
        let mut w = Vec::with_capacity(hidden.len() + 2);
        w.push(input_dim);
        w.extend_from_slice(hidden);
        w.push(1);
        w
    }

    /// All parameters zero; predicts 0.5 everywhere.
    pub fn zeros(input_dim: usize, hidden: &[usize]) -> Self {
        let widths = Self::widths(input_dim, hidden);
        let layers = widths
            .windows(2)
            .map(|w| DenseLayer {
                weights: Array2::zeros((w[1], w[0])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Self { layers }
    }

    /// Uniform `±sqrt(6 / (fan_in + fan_out))` weights, zero biases.
    pub fn glorot(input_dim: usize, hidden: &[usize], seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        Self::glorot_with(input_dim, hidden, &mut rng)
    }

    fn glorot_with(input_dim: usize, hidden: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let widths = Self::widths(input_dim, hidden);
        let layers = widths
            .windows(2)
            .map(|w| DenseLayer::glorot(w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.weights.nrows())
            .collect()
    }

    /// Pre-activations of every layer for one input.
    pub fn pre_activations(&self, x: &[f64]) -> Result<Vec<Array1<f64>>> {
        check_dim(self.input_dim(), x.len())?;
        let mut a = Array1::from(x.to_vec());
        let mut zs = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.weights.dot(&a) + &layer.bias;
            if l + 1 < self.layers.len() {
                a = z.mapv(relu);
            }
            zs.push(z);
        }
        Ok(zs)
    }

    fn forward_batch(&self, xs: ArrayView2<'_, f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        let mut zs: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let input = if l == 0 { xs } else { acts[l - 1].view() };
            let z = input.dot(&layer.weights.t()) + &layer.bias;
            acts.push(z.mapv(relu));
            zs.push(z);
        }
        (zs, acts)
    }
}

#[inline]
fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

#[inline]
fn relu_mask(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        0.0
    }
}

impl Model for MlpModel {
    fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        let zs = self.pre_activations(x)?;
        Ok(logistic(zs.last().expect("nonempty")[0]))
    }

    fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let zs = self.pre_activations(x)?;
        let h = logistic(zs.last().expect("nonempty")[0]);
        let mut g = Array1::from(vec![h * (1.0 - h)]);
        for l in (0..self.layers.len()).rev() {
            g = self.layers[l].weights.t().dot(&g);
            if l > 0 {
                Zip::from(&mut g)
                    .and(&zs[l - 1])
                    .for_each(|gi, &z| *gi *= relu_mask(z));
            }
        }
        Ok(g.to_vec())
    }

    fn predict_proba_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        check_dim(self.input_dim(), xs.ncols())?;
        let (zs, _) = self.forward_batch(xs);
        Ok(zs.last().expect("nonempty").column(0).mapv(logistic))
    }

    fn input_gradient_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim(self.input_dim(), xs.ncols())?;
        let (zs, _) = self.forward_batch(xs);
        let mut g = zs.last().expect("nonempty").mapv(|z| {
            let h = logistic(z);
            h * (1.0 - h)
        });
        for l in (0..self.layers.len()).rev() {
            g = g.dot(&self.layers[l].weights);
            if l > 0 {
                Zip::from(&mut g)
                    .and(&zs[l - 1])
                    .for_each(|gi, &z| *gi *= relu_mask(z));
            }
        }
        Ok(g)
    }
}

struct AdamState {
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
    step: i32,
}

impl AdamState {
    fn new(model: &MlpModel) -> Self {
        Self {
            m_w: model
                .layers
                .iter()
                .map(|l| Array2::zeros(l.weights.raw_dim()))
                .collect(),
            v_w: model
                .layers
                .iter()
                .map(|l| Array2::zeros(l.weights.raw_dim()))
                .collect(),
            m_b: model
                .layers
                .iter()
                .map(|l| Array1::zeros(l.bias.raw_dim()))
                .collect(),
            v_b: model
                .layers
                .iter()
                .map(|l| Array1::zeros(l.bias.raw_dim()))
                .collect(),
            step: 0,
        }
    }
}

fn adam_update<D: ndarray::Dimension>(
    param: &mut ndarray::Array<f64, D>,
    grad: &ndarray::Array<f64, D>,
    m: &mut ndarray::Array<f64, D>,
    v: &mut ndarray::Array<f64, D>,
    cfg: &TrainConfig,
    bias1: f64,
    bias2: f64,
) {
    Zip::from(param)
        .and(grad)
        .and(m)
        .and(v)
        .for_each(|p, &g, m, v| {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        });
}

/// Mini-batch Adam on mean binary cross entropy for exactly `cfg.epochs` epochs.
///
/// The generator seeded with `cfg.seed` draws the initial weights and then
/// the per-epoch shuffles, so the result is a pure function of the inputs.
pub fn train_mlp(x: ArrayView2<'_, f64>, y: &[u8], cfg: &TrainConfig) -> Result<MlpModel> {
    cfg.validate()?;
    check_labels(x, y)?;
    let n = x.nrows();
    let mut rng = seed::rng(cfg.seed);
    let mut model = MlpModel::glorot_with(x.ncols(), &cfg.hidden_layers, &mut rng);
    let mut adam = AdamState::new(&model);
    let targets: Array1<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let n_layers = model.layers.len();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xb = x.select(Axis(0), batch);
            let yb = targets.select(Axis(0), batch);
            let bsize = batch.len() as f64;
            let (zs, acts) = model.forward_batch(xb.view());
            let logits = zs[n_layers - 1].column(0);

            let mut batch_loss = 0.0;
            let mut dz = Array2::<f64>::zeros((batch.len(), 1));
            for i in 0..batch.len() {
                let z = logits[i];
                batch_loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - yb[i] * z;
                dz[[i, 0]] = (logistic(z) - yb[i]) / bsize;
            }
            epoch_loss += batch_loss;

            let mut grads_w: Vec<Array2<f64>> = Vec::with_capacity(n_layers);
            let mut grads_b: Vec<Array1<f64>> = Vec::with_capacity(n_layers);
            for l in (0..n_layers).rev() {
                let input = if l == 0 {
                    xb.view()
                } else {
                    acts[l - 1].view()
                };
                grads_w.push(dz.t().dot(&input));
                grads_b.push(dz.sum_axis(Axis(0)));
                if l > 0 {
                    let mut da = dz.dot(&model.layers[l].weights);
                    Zip::from(&mut da)
                        .and(&zs[l - 1])
                        .for_each(|g, &z| *g *= relu_mask(z));
                    dz = da;
                }
            }
            grads_w.reverse();
            grads_b.reverse();

            adam.step += 1;
            let bias1 = 1.0 - cfg.beta1.powi(adam.step);
            let bias2 = 1.0 - cfg.beta2.powi(adam.step);
            for (l, layer) in model.layers.iter_mut().enumerate() {
                adam_update(
                    &mut layer.weights,
                    &grads_w[l],
                    &mut adam.m_w[l],
                    &mut adam.v_w[l],
                    cfg,
                    bias1,
                    bias2,
                );
                adam_update(
                    &mut layer.bias,
                    &grads_b[l],
                    &mut adam.m_b[l],
                    &mut adam.v_b[l],
                    cfg,
                    bias1,
                    bias2,
                );
            }
        }
        if !(epoch_loss / n as f64).is_finite() {
            return Err(Error::Divergence { epoch });
        }
    }
    Ok(model)
}
