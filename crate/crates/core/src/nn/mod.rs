//! Single-hidden-layer ReLU networks and their trainers.
//!
//! A [`SingleLayerNN`] is both the base learner of the ensemble and the shape
//! of the final flattened model. Two trainers are provided: minibatch Adam
//! ([`train_adam`]) and the local linear approximation optimizer
//! ([`train_lla`]), which alternates a least-squares fit on linearized ReLU
//! features with a closed-form update of the hidden weights.

mod adam;
mod lla;

pub use adam::{loss_and_gradient, train_adam, train_adam_from, Gradient};
pub use lla::{apply_lla_update, train_lla, LlaCoefficients};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LifeError, Result};
use crate::linalg::{self, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

/// `f(x) = β₀ + Σₖ βₖ σ(bₖ + xᵀwₖ)`, passed through the logistic link for
/// classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "NetworkDocument", try_from = "NetworkDocument")]
pub struct SingleLayerNN {
    pub task: Task,
    /// `K × p`; row `k` is `wₖ`.
    pub hidden_weights: Array2<f64>,
    pub hidden_biases: Array1<f64>,
    pub output_coefficients: Array1<f64>,
    pub output_intercept: f64,
}

impl SingleLayerNN {
    pub fn new(
        task: Task,
        hidden_weights: Array2<f64>,
        hidden_biases: Array1<f64>,
        output_coefficients: Array1<f64>,
        output_intercept: f64,
    ) -> Result<Self> {
        let k = hidden_weights.nrows();
        if k == 0 {
            return Err(LifeError::InvalidConfig("network needs at least one hidden unit".into()));
        }
        for (what, len) in [
            ("hidden biases", hidden_biases.len()),
            ("output coefficients", output_coefficients.len()),
        ] {
            if len != k {
                return Err(LifeError::DimensionMismatch {
                    what,
                    expected: k,
                    found: len,
                });
            }
        }
        let net = Self {
            task,
            hidden_weights,
            hidden_biases,
            output_coefficients,
            output_intercept,
        };
        net.check_finite()?;
        Ok(net)
    }

    pub fn n_hidden(&self) -> usize {
        self.hidden_weights.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.hidden_weights.ncols()
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        let ok = self.hidden_weights.iter().all(|v| v.is_finite())
            && self.hidden_biases.iter().all(|v| v.is_finite())
            && self.output_coefficients.iter().all(|v| v.is_finite())
            && self.output_intercept.is_finite();
        if ok {
            Ok(())
        } else {
            Err(LifeError::NonFinite("network parameters".into()))
        }
    }

    fn check_input(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.n_inputs() {
            return Err(LifeError::DimensionMismatch {
                what: "input columns",
                expected: self.n_inputs(),
                found: x.ncols(),
            });
        }
        Ok(())
    }

    /// `bₖ + xᵢᵀwₖ`, one row per observation.
    pub fn pre_activations(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        Ok(x.dot(&self.hidden_weights.t()) + &self.hidden_biases)
    }

    /// `max(0, bₖ + xᵢᵀwₖ)`, an `N × K` matrix.
    pub fn hidden_activations(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.pre_activations(x)?.mapv_into(|v| v.max(0.0)))
    }

    /// The linear output `β₀ + Σ βₖσₖ`: the prediction for regression and the
    /// log-odds for classification.
    pub fn linear_output(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.hidden_activations(x)?.dot(&self.output_coefficients) + self.output_intercept)
    }

    /// Predictions: the linear output for regression, probabilities for
    /// classification. Probabilities are kept strictly inside `(0, 1)` even
    /// where the logistic function rounds to an endpoint.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        let eta = self.linear_output(x)?;
        Ok(match self.task {
            Task::Regression => eta,
            Task::Classification => {
                eta.mapv_into(|v| sigmoid(v).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
            }
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NetworkDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<NetworkDocument>(text)?.try_into()
    }
}

/// Exchange format: `{task, p, K, W (row-major), b, beta, beta0}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub task: Task,
    pub p: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "W")]
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub beta: Vec<f64>,
    pub beta0: f64,
}

impl From<&SingleLayerNN> for NetworkDocument {
    fn from(net: &SingleLayerNN) -> Self {
        Self {
            task: net.task,
            p: net.n_inputs(),
            k: net.n_hidden(),
            w: net.hidden_weights.iter().copied().collect(),
            b: net.hidden_biases.to_vec(),
            beta: net.output_coefficients.to_vec(),
            beta0: net.output_intercept,
        }
    }
}

impl From<SingleLayerNN> for NetworkDocument {
    fn from(net: SingleLayerNN) -> Self {
        NetworkDocument::from(&net)
    }
}

impl TryFrom<NetworkDocument> for SingleLayerNN {
    type Error = LifeError;

    fn try_from(doc: NetworkDocument) -> Result<Self> {
        if doc.w.len() != doc.k * doc.p {
            return Err(LifeError::SchemaMismatch(format!(
                "W has {} entries, expected K·p = {}",
                doc.w.len(),
                doc.k * doc.p
            )));
        }
        let w = Array2::from_shape_vec((doc.k, doc.p), doc.w)
            .map_err(|e| LifeError::SchemaMismatch(e.to_string()))?;
        SingleLayerNN::new(doc.task, w, Array1::from(doc.b), Array1::from(doc.beta), doc.beta0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Adam,
    Lla,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub task: Task,
    pub hidden_units: usize,
    /// Epochs for Adam, iteration cap for LLA.
    pub iterations: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Ridge on the weight/bias update blocks of the LLA least-squares step.
    pub lla_ridge: f64,
    /// `|β̂ⱼ|` below this leaves neuron `j` untouched in an LLA step.
    pub lla_epsilon: f64,
    /// Relative parameter change that stops LLA.
    pub tolerance: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn lla(task: Task, hidden_units: usize) -> Self {
        Self {
            optimizer: Optimizer::Lla,
            task,
            hidden_units,
            iterations: 200,
            learning_rate: 1e-2,
            batch_size: 64,
            lla_ridge: 1e-4,
            lla_epsilon: 1e-3,
            tolerance: 1e-6,
            seed: 0,
        }
    }

    pub fn adam(task: Task, hidden_units: usize) -> Self {
        Self {
            optimizer: Optimizer::Adam,
            iterations: 100,
            ..Self::lla(task, hidden_units)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_units == 0 {
            return Err(LifeError::InvalidConfig("hidden_units must be >= 1".into()));
        }
        if !(self.lla_epsilon > 0.0) {
            return Err(LifeError::InvalidConfig("lla_epsilon must be > 0".into()));
        }
        if !(self.lla_ridge >= 0.0) {
            return Err(LifeError::InvalidConfig("lla_ridge must be >= 0".into()));
        }
        if self.optimizer == Optimizer::Adam && (!(self.learning_rate > 0.0) || self.batch_size == 0) {
            return Err(LifeError::InvalidConfig(
                "adam needs learning_rate > 0 and batch_size >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// A trained network plus its per-epoch (Adam) or per-iteration (LLA)
/// training loss.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: SingleLayerNN,
    pub loss_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Dispatches on `config.optimizer`.
pub fn train(x: ArrayView2<f64>, y: ArrayView1<f64>, config: &TrainConfig) -> Result<Trained> {
    match config.optimizer {
        Optimizer::Adam => train_adam(x, y, config),
        Optimizer::Lla => train_lla(x, y, config),
    }
}

/// Mean squared error or mean log-loss of `net` on `(x, y)`.
pub fn training_loss(net: &SingleLayerNN, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<f64> {
    let eta = net.linear_output(x)?;
    Ok(match net.task {
        Task::Regression => {
            let r = &y - &eta;
            r.dot(&r) / y.len().max(1) as f64
        }
        Task::Classification => linalg::mean_logistic_loss(y, eta.view()),
    })
}

pub(crate) fn validate_training_data(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    task: Task,
) -> Result<()> {
    linalg::check_rows(x, y)?;
    linalg::check_finite_matrix(x, "training inputs")?;
    linalg::check_finite_vector(y, "training response")?;
    if task == Task::Classification && !y.iter().all(|&v| v == 0.0 || v == 1.0) {
        return Err(LifeError::InvalidConfig("classification labels must be 0/1".into()));
    }
    Ok(())
}

/// Least-squares (or logistic) output layer for fixed hidden units.
pub(crate) fn refit_output_layer(
    net: &mut SingleLayerNN,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
) -> Result<()> {
    let acts = net.hidden_activations(x)?;
    let fit = match net.task {
        Task::Regression => linalg::solve_least_squares_with_intercept(acts.view(), y, 0.0)?,
        Task::Classification => linalg::logistic_fit(acts.view(), y, 1e-4)?,
    };
    net.output_coefficients = fit.coefficients;
    net.output_intercept = fit.intercept;
    Ok(())
}

/// Hidden weights from `N(0, 1/p)`, zero biases, output layer by one solve on
/// the initial activations.
pub(crate) fn initialize(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    task: Task,
    hidden_units: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SingleLayerNN> {
    let p = x.ncols();
    let scale = 1.0 / (p.max(1) as f64).sqrt();
    let w = Array2::from_shape_fn((hidden_units, p), |_| rng.sample::<f64, _>(StandardNormal) * scale);
    let mut net = SingleLayerNN::new(
        task,
        w,
        Array1::zeros(hidden_units),
        Array1::zeros(hidden_units),
        0.0,
    )?;
    refit_output_layer(&mut net, x, y)?;
    Ok(net)
}

/// Column indices of neurons active on at least one row of `pre`.
pub(crate) fn live_neurons(pre: &Array2<f64>) -> Vec<usize> {
    pre.axis_iter(Axis(1))
        .enumerate()
        .filter(|(_, col)| col.iter().any(|&v| v > 0.0))
        .map(|(k, _)| k)
        .collect()
}
