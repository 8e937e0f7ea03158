//! Probabilistic binary classifiers with exact input gradients.

mod checkpoint;
mod linear;
mod mlp;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub use checkpoint::Checkpoint;
pub use linear::{train_logistic, LinearModel};
pub use mlp::{train_mlp, DenseLayer, MlpModel};

/// Numerically stable logistic function, kept inside the open interval (0, 1).
#[inline]
pub fn logistic(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// A trained classifier `h: R^d -> (0, 1)`.
pub trait Model: Send + Sync {
    fn input_dim(&self) -> usize;

    /// Predicted probability of the positive class.
    fn predict_proba(&self, x: &[f64]) -> Result<f64>;

    /// `dh/dx` at `x`.
    fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Row-wise [`Model::predict_proba`].
    fn predict_proba_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        check_dim(self.input_dim(), xs.ncols())?;
        xs.rows()
            .into_iter()
            .map(|r| self.predict_proba(&r.to_vec()))
            .collect::<Result<Vec<_>>>()
            .map(Array1::from)
    }

    /// Row-wise [`Model::input_gradient`].
    fn input_gradient_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim(self.input_dim(), xs.ncols())?;
        let mut out = Array2::zeros(xs.raw_dim());
        for (i, r) in xs.rows().into_iter().enumerate() {
            let g = self.input_gradient(&r.to_vec())?;
            out.row_mut(i).assign(&Array1::from(g));
        }
        Ok(out)
    }

    /// Hard decision `g(h) = 1` iff `h >= 0.5`.
    fn predict_class(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.predict_proba(x)? >= 0.5))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "LR")]
    Lr,
    #[serde(rename = "NN")]
    Nn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 2] = [ModelKind::Lr, ModelKind::Nn];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lr => "LR",
            ModelKind::Nn => "NN",
        }
    }

    pub fn id(self) -> u64 {
        match self {
            ModelKind::Lr => 0,
            ModelKind::Nn => 1,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LR" => Ok(ModelKind::Lr),
            "NN" | "MLP" => Ok(ModelKind::Nn),
            _ => Err(Error::Config(format!("unknown model kind `{s}`"))),
        }
    }
}

fn default_epochs() -> usize {
    100
}
fn default_lr() -> f64 {
    1e-3
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_batch() -> usize {
    32
}
fn default_l2() -> f64 {
    1e-4
}
fn default_tol() -> f64 {
    1e-8
}
fn default_hidden() -> Vec<usize> {
    vec![50, 100, 200]
}

/// Training hyperparameters shared by both model classes.
///
/// For logistic regression `epochs` bounds the number of Newton iterations;
/// the Adam and batch settings apply to the MLP only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// L2 penalty on logistic-regression coefficients (not the intercept).
    #[serde(default = "default_l2")]
    pub l2_penalty: f64,
    /// Gradient-norm stopping tolerance for logistic regression.
    #[serde(default = "default_tol")]
    pub tolerance: f64,
    /// Hidden layer widths, input side first.
    #[serde(default = "default_hidden")]
    pub hidden_layers: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            learning_rate: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_eps(),
            batch_size: default_batch(),
            l2_penalty: default_l2(),
            tolerance: default_tol(),
            hidden_layers: default_hidden(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || self.l2_penalty < 0.0 {
            return Err(Error::Config(
                "learning rate must be > 0 and l2 >= 0".into(),
            ));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        Ok(())
    }
}

/// Either trained model class behind one type.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Linear(LinearModel),
    Mlp(MlpModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Linear(_) => ModelKind::Lr,
            TrainedModel::Mlp(_) => ModelKind::Nn,
        }
    }

    fn inner(&self) -> &dyn Model {
        match self {
            TrainedModel::Linear(m) => m,
            TrainedModel::Mlp(m) => m,
        }
    }
}

impl Model for TrainedModel {
    fn input_dim(&self) -> usize {
        self.inner().input_dim()
    }
    fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        self.inner().predict_proba(x)
    }
    fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.inner().input_gradient(x)
    }
    fn predict_proba_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.inner().predict_proba_batch(xs)
    }
    fn input_gradient_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.inner().input_gradient_batch(xs)
    }
}

/// Trains the requested model class.
pub fn train(
    kind: ModelKind,
    x: ArrayView2<'_, f64>,
    y: &[u8],
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    Ok(match kind {
        ModelKind::Lr => TrainedModel::Linear(train_logistic(x, y, cfg)?),
        ModelKind::Nn => TrainedModel::Mlp(train_mlp(x, y, cfg)?),
    })
}

/// Absolute standardized coefficients of a linear model.
pub fn ground_truth_weights(model: &TrainedModel) -> Result<Vec<f64>> {
    match model {
        TrainedModel::Linear(m) => Ok(m.ground_truth_weights()),
        TrainedModel::Mlp(_) => Err(Error::UnsupportedModel(
            "ground-truth importances exist only for linear models".into(),
        )),
    }
}

/// Fraction of rows whose hard prediction matches the label.
pub fn accuracy(model: &dyn Model, x: ArrayView2<'_, f64>, y: &[u8]) -> Result<f64> {
    check_dim(x.nrows(), y.len())?;
    let p = model.predict_proba_batch(x)?;
    let hits = p
        .iter()
        .zip(y)
        .filter(|(&p, &y)| u8::from(p >= 0.5) == y)
        .count();
    Ok(hits as f64 / y.len() as f64)
}

pub(crate) fn check_labels(x: ArrayView2<'_, f64>, y: &[u8]) -> Result<()> {
    check_dim(x.nrows(), y.len())?;
    if y.len() < 2 {
        return Err(Error::Input("need at least 2 training rows".into()));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::DegenerateLabels);
    }
    Ok(())
}
