//! The LIFE procedure: hierarchical projection sampling, base-learner
//! training, neuron flattening and a joint fit of the output layer.

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{ColumnKind, Dataset, Scaler};
use crate::error::{LifeError, Result};
use crate::linalg::{
    elastic_net_fit_warm, logistic_fit, CdControl, mean_logistic_loss, solve_least_squares_with_intercept, Family,
};
use crate::nn::{self, SingleLayerNN, Task, TrainConfig};
use crate::sampling::{
    bootstrap_subsets, coverage, filter_by_size, project_subset, random_projection_subsets, SamplingConfig, Scheme,
};
use crate::seed::{derive_seed, rng_from};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// How the flattened features are combined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Aggregation {
    Unpenalized,
    ElasticNet { l1: f64, l2: f64 },
    /// Small `(l1, l2)` grid chosen by k-fold cross-validation.
    CrossValidated { folds: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifeConfig {
    pub hidden_per_iteration: Vec<usize>,
    pub sampling: SamplingConfig,
    /// `hidden_units` and `seed` are set per learner.
    pub base_trainer: TrainConfig,
    pub aggregation: Aggregation,
    pub standardize: bool,
    pub seed: u64,
}

impl LifeConfig {
    /// LLA base learners, default sampling bounds and cross-validated elastic net.
    pub fn new(task: Task, hidden_per_iteration: Vec<usize>) -> Self {
        let k = hidden_per_iteration.first().copied().unwrap_or(1);
        LifeConfig {
            hidden_per_iteration,
            sampling: SamplingConfig::default(),
            base_trainer: TrainConfig::lla(task, k),
            aggregation: Aggregation::CrossValidated { folds: 5 },
            standardize: true,
            seed: 0,
        }
    }

    pub fn task(&self) -> Task {
        self.base_trainer.task
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_per_iteration.is_empty() || self.hidden_per_iteration.contains(&0) {
            return Err(LifeError::InvalidConfig(format!(
                "hidden_per_iteration needs J >= 1 entries, all >= 1, got {:?}",
                self.hidden_per_iteration
            )));
        }
        self.sampling.validate()?;
        self.base_trainer.validate()?;
        match self.aggregation {
            Aggregation::ElasticNet { l1, l2 } if !(l1 >= 0.0 && l2 >= 0.0 && l1.is_finite() && l2.is_finite()) => {
                Err(LifeError::InvalidConfig("elastic-net penalties must be finite and >= 0".into()))
            }
            Aggregation::CrossValidated { folds } if folds < 2 => {
                Err(LifeError::InvalidConfig("cross-validation needs at least 2 folds".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeuronOrigin {
    pub iteration: usize,
    pub learner: usize,
    pub neuron: usize,
}

/// A network trained on one subset, in standardized input coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseLearner {
    pub iteration: usize,
    pub id: usize,
    /// Neuron whose projection defined the subset; `None` for the first
    /// iteration and for the random-projection and bootstrap schemes.
    pub parent: Option<NeuronOrigin>,
    pub subset_ratio: f64,
    pub network: SingleLayerNN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub candidates: usize,
    pub kept: usize,
    pub trained: usize,
    pub failed: usize,
    /// `trained × K_j`.
    pub neurons: usize,
    pub subset_ratios: Vec<f64>,
    /// Whether each candidate passed the size filter.
    pub kept_mask: Vec<bool>,
    pub coverage: f64,
    pub seconds: f64,
}

/// The flattened ensemble. Neuron parameters live in standardized
/// coordinates; [`LifeModel::flatten_to_single_nn`] folds the scaler in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifeModel {
    pub version: u32,
    pub config: LifeConfig,
    pub task: Task,
    pub scaler: Scaler,
    pub neuron_weights: Array2<f64>,
    pub neuron_biases: Array1<f64>,
    pub beta: Array1<f64>,
    pub intercept: f64,
    /// `(l1, l2)` used for the output layer.
    pub penalty: (f64, f64),
    pub provenance: Vec<NeuronOrigin>,
    pub dead_features: Vec<usize>,
    pub base_learners: Vec<BaseLearner>,
    pub trace: Vec<IterationTrace>,
}

/// Columns `σ(bₖ + Xwₖ)`.
pub fn extract_features(weights: ArrayView2<f64>, biases: ArrayView1<f64>, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    if weights.ncols() != x.ncols() {
        return Err(LifeError::DimensionMismatch {
            what: "input columns",
            expected: weights.ncols(),
            found: x.ncols(),
        });
    }
    if biases.len() != weights.nrows() {
        return Err(LifeError::DimensionMismatch {
            what: "neuron biases",
            expected: weights.nrows(),
            found: biases.len(),
        });
    }
    let mut f = x.dot(&weights.t());
    f += &biases;
    f.mapv_inplace(|v| v.max(0.0));
    Ok(f)
}

fn learner_config(config: &LifeConfig, iteration: usize, id: usize) -> TrainConfig {
    let mut cfg = config.base_trainer.clone();
    cfg.hidden_units = config.hidden_per_iteration[iteration - 1];
    cfg.seed = derive_seed(config.seed, &[iteration as u64, id as u64]);
    cfg
}

struct Candidate {
    rows: Vec<usize>,
    ratio: f64,
    parent: Option<NeuronOrigin>,
}

fn candidates_for(
    z: ArrayView2<f64>,
    previous: &[BaseLearner],
    iteration: usize,
    config: &LifeConfig,
) -> Result<Vec<(Candidate, bool)>> {
    let n = z.nrows();
    let s = &config.sampling;
    let count: usize = previous.iter().map(|l| l.network.n_hidden()).sum();
    let stream = derive_seed(s.seed, &[config.seed, iteration as u64]);
    let out = match s.scheme {
        Scheme::NnProjection => {
            let mut out = Vec::with_capacity(count);
            for learner in previous {
                let net = &learner.network;
                for k in 0..net.n_hidden() {
                    let spec = project_subset(net.hidden_weights.row(k), net.hidden_biases[k], s.cp, z)?;
                    let keep = filter_by_size(&spec, s.lower, s.upper);
                    let parent = NeuronOrigin {
                        iteration: learner.iteration,
                        learner: learner.id,
                        neuron: k,
                    };
                    out.push((
                        Candidate {
                            rows: spec.indices,
                            ratio: spec.ratio,
                            parent: Some(parent),
                        },
                        keep,
                    ));
                }
            }
            out
        }
        Scheme::RandomProjection => {
            let cfg = SamplingConfig { seed: stream, ..s.clone() };
            random_projection_subsets(z, count, &cfg)
                .into_iter()
                .map(|spec| {
                    let keep = filter_by_size(&spec, s.lower, s.upper);
                    (
                        Candidate {
                            rows: spec.indices,
                            ratio: spec.ratio,
                            parent: None,
                        },
                        keep,
                    )
                })
                .collect()
        }
        Scheme::Bootstrap => bootstrap_subsets(n, count, stream)
            .into_iter()
            .map(|rows| {
                let mut unique = rows.clone();
                unique.sort_unstable();
                unique.dedup();
                let ratio = unique.len() as f64 / n as f64;
                (Candidate { rows, ratio, parent: None }, true)
            })
            .collect(),
    };
    Ok(out)
}

fn train_on_rows(z: ArrayView2<f64>, y: ArrayView1<f64>, rows: Option<&[usize]>, cfg: &TrainConfig) -> Result<SingleLayerNN> {
    let trained = match rows {
        None => nn::train(z, y, cfg)?,
        Some(rows) => {
            let zs = z.select(Axis(0), rows);
            let ys = y.select(Axis(0), rows);
            nn::train(zs.view(), ys.view(), cfg)?
        }
    };
    Ok(trained.model)
}

/// Runs every iteration of the sampling hierarchy and returns the final
/// iteration's learners with the per-iteration trace.
pub fn train_base_learners(
    z: ArrayView2<f64>,
    y: ArrayView1<f64>,
    config: &LifeConfig,
) -> Result<(Vec<BaseLearner>, Vec<IterationTrace>)> {
    config.validate()?;
    let n = z.nrows();
    let k_max = config.hidden_per_iteration.iter().copied().max().unwrap_or(1);
    if n <= 10.max(k_max) {
        return Err(LifeError::DegenerateInput(format!(
            "need more than max(10, K) = {} training rows, got {n}",
            10.max(k_max)
        )));
    }
    let start = Instant::now();
    let first = train_on_rows(z, y, None, &learner_config(config, 1, 0))?;
    let mut learners = vec![BaseLearner {
        iteration: 1,
        id: 0,
        parent: None,
        subset_ratio: 1.0,
        network: first,
    }];
    let mut trace = vec![IterationTrace {
        iteration: 1,
        candidates: 1,
        kept: 1,
        trained: 1,
        failed: 0,
        neurons: config.hidden_per_iteration[0],
        subset_ratios: vec![1.0],
        kept_mask: vec![true],
        coverage: 1.0,
        seconds: start.elapsed().as_secs_f64(),
    }];

    for iteration in 2..=config.hidden_per_iteration.len() {
        let start = Instant::now();
        let candidates = candidates_for(z, &learners, iteration, config)?;
        let ratios: Vec<f64> = candidates.iter().map(|(c, _)| c.ratio).collect();
        let kept_mask: Vec<bool> = candidates.iter().map(|(_, k)| *k).collect();
        let kept: Vec<Candidate> = candidates.into_iter().filter(|(_, k)| *k).map(|(c, _)| c).collect();
        if kept.is_empty() {
            return Err(LifeError::AllNeuronsDropped { iteration, ratios });
        }
        let cov = coverage(n, kept.iter().map(|c| c.rows.as_slice()));
        if cov < 1.0 {
            log::info!("iteration {iteration}: kept subsets cover {:.1}% of training rows", 100.0 * cov);
        }
        let results: Vec<Result<SingleLayerNN>> = kept
            .par_iter()
            .enumerate()
            .map(|(id, c)| train_on_rows(z, y, Some(&c.rows), &learner_config(config, iteration, id)))
            .collect();
        let mut next = Vec::with_capacity(kept.len());
        let mut failed = 0;
        for (id, (c, res)) in kept.iter().zip(results).enumerate() {
            match res {
                Ok(network) => next.push(BaseLearner {
                    iteration,
                    id,
                    parent: c.parent,
                    subset_ratio: c.ratio,
                    network,
                }),
                Err(e) => {
                    log::warn!("iteration {iteration}, learner {id} skipped: {e}");
                    failed += 1;
                }
            }
        }
        if next.is_empty() {
            return Err(LifeError::AllNeuronsDropped { iteration, ratios });
        }
        trace.push(IterationTrace {
            iteration,
            candidates: ratios.len(),
            kept: kept.len(),
            trained: next.len(),
            failed,
            neurons: next.len() * config.hidden_per_iteration[iteration - 1],
            subset_ratios: ratios,
            kept_mask,
            coverage: cov,
            seconds: start.elapsed().as_secs_f64(),
        });
        learners = next;
    }
    Ok((learners, trace))
}

/// Output layer over a fixed feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateFit {
    pub coefficients: Array1<f64>,
    pub intercept: f64,
    pub penalty: (f64, f64),
}

fn column_scales(f: ArrayView2<f64>) -> Array1<f64> {
    let n = f.nrows() as f64;
    f.axis_iter(Axis(1))
        .map(|c| {
            let m = c.sum() / n;
            (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect()
}

fn unpenalized(f: ArrayView2<f64>, y: ArrayView1<f64>, task: Task) -> Result<AggregateFit> {
    let fit = match task {
        Task::Regression => solve_least_squares_with_intercept(f, y, 0.0)?,
        Task::Classification => logistic_fit(f, y, 0.0)?,
    };
    Ok(AggregateFit {
        coefficients: fit.coefficients,
        intercept: fit.intercept,
        penalty: (0.0, 0.0),
    })
}

/// Elastic net on unit-variance feature columns, mapped back to the raw
/// feature scale. Constant columns get a zero coefficient.
fn penalized(
    f: ArrayView2<f64>,
    y: ArrayView1<f64>,
    task: Task,
    l1: f64,
    l2: f64,
    warm: Option<&crate::linalg::FitResult>,
    control: CdControl,
) -> Result<(AggregateFit, crate::linalg::FitResult)> {
    let scales = column_scales(f);
    let live: Vec<usize> = (0..f.ncols()).filter(|&j| scales[j] > 1e-12).collect();
    let mut fs = f.select(Axis(1), &live);
    for (c, &j) in live.iter().enumerate() {
        fs.column_mut(c).mapv_inplace(|v| v / scales[j]);
    }
    let family = match task {
        Task::Regression => Family::Regression,
        Task::Classification => Family::Logistic,
    };
    let fit = elastic_net_fit_warm(fs.view(), y, l1, l2, family, warm, control)?;
    if !fit.converged && control == CdControl::default() {
        log::warn!("elastic net hit its iteration cap at l1 = {l1}, l2 = {l2}");
    }
    let mut coefficients = Array1::zeros(f.ncols());
    for (c, &j) in live.iter().enumerate() {
        coefficients[j] = fit.coefficients[c] / scales[j];
    }
    Ok((
        AggregateFit {
            coefficients,
            intercept: fit.intercept,
            penalty: (l1, l2),
        },
        fit,
    ))
}

fn lambda_max(f: ArrayView2<f64>, y: ArrayView1<f64>) -> f64 {
    let n = f.nrows() as f64;
    let scales = column_scales(f);
    let y_mean = y.sum() / n;
    f.axis_iter(Axis(1))
        .zip(scales.iter())
        .filter(|(_, &s)| s > 1e-12)
        .map(|(c, &s)| {
            let m = c.sum() / n;
            (c.iter().zip(y).map(|(v, t)| (v - m) * (t - y_mean)).sum::<f64>() / (n * s)).abs()
        })
        .fold(0.0, f64::max)
}

const CV_FRACTIONS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
const CV_MIXES: [f64; 2] = [1.0, 0.5];
/// Fold fits only rank penalties, so they stop earlier than the final refit.
const FOLD_CONTROL: CdControl = CdControl {
    tolerance: 1e-6,
    max_sweeps: 1_000,
};

fn holdout_loss(task: Task, y: ArrayView1<f64>, f: ArrayView2<f64>, fit: &AggregateFit) -> f64 {
    let eta = f.dot(&fit.coefficients) + fit.intercept;
    match task {
        Task::Regression => y.iter().zip(&eta).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64,
        Task::Classification => mean_logistic_loss(y, eta.view()),
    }
}

fn cross_validated(f: ArrayView2<f64>, y: ArrayView1<f64>, task: Task, folds: usize, seed: u64) -> Result<AggregateFit> {
    let n = f.nrows();
    let folds = folds.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(derive_seed(seed, &[u64::MAX])));
    let lmax = lambda_max(f, y);
    // (l1, l2) candidates, strongest penalty first; (0, 0) is the unpenalized fit.
    let mut grid: Vec<(f64, f64)> = Vec::new();
    for &mix in &CV_MIXES {
        for &frac in &CV_FRACTIONS {
            let lambda = frac * lmax / mix;
            grid.push((mix * lambda, (1.0 - mix) * lambda));
        }
    }
    grid.push((0.0, 0.0));
    let mut losses = vec![0.0; grid.len()];
    for fold in 0..folds {
        let test: Vec<usize> = order.iter().copied().skip(fold).step_by(folds).collect();
        let mut is_test = vec![false; n];
        test.iter().for_each(|&i| is_test[i] = true);
        let train: Vec<usize> = (0..n).filter(|&i| !is_test[i]).collect();
        let (ft, yt) = (f.select(Axis(0), &train), y.select(Axis(0), &train));
        let (fv, yv) = (f.select(Axis(0), &test), y.select(Axis(0), &test));
        let mut warm = None;
        for (g, &(l1, l2)) in grid.iter().enumerate() {
            let fit = if l1 == 0.0 && l2 == 0.0 {
                unpenalized(ft.view(), yt.view(), task)?
            } else {
                if g % CV_FRACTIONS.len() == 0 {
                    warm = None;
                }
                let (fit, raw) = penalized(ft.view(), yt.view(), task, l1, l2, warm.as_ref(), FOLD_CONTROL)?;
                warm = Some(raw);
                fit
            };
            losses[g] += holdout_loss(task, yv.view(), fv.view(), &fit) * test.len() as f64 / n as f64;
        }
    }
    let best = losses
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("grid is non-empty");
    let (l1, l2) = grid[best];
    log::debug!("cross-validated penalty l1 = {l1:.3e}, l2 = {l2:.3e}");
    if l1 == 0.0 && l2 == 0.0 {
        unpenalized(f, y, task)
    } else {
        Ok(penalized(f, y, task, l1, l2, None, CdControl::default())?.0)
    }
}

/// Fits the output layer on flattened features.
pub fn aggregate(f: ArrayView2<f64>, y: ArrayView1<f64>, task: Task, aggregation: Aggregation, seed: u64) -> Result<AggregateFit> {
    let fit = match aggregation {
        Aggregation::Unpenalized => unpenalized(f, y, task)?,
        Aggregation::ElasticNet { l1, l2 } if l1 == 0.0 && l2 == 0.0 => unpenalized(f, y, task)?,
        Aggregation::ElasticNet { l1, l2 } => penalized(f, y, task, l1, l2, None, CdControl::default())?.0,
        Aggregation::CrossValidated { folds } => cross_validated(f, y, task, folds, seed)?,
    };
    if !fit.intercept.is_finite() || fit.coefficients.iter().any(|v| !v.is_finite()) {
        return Err(LifeError::NonFinite("aggregation coefficients".into()));
    }
    Ok(fit)
}

/// Flattens `learners` into one neuron bank and fits its output layer on `z`.
pub fn assemble(
    z: ArrayView2<f64>,
    y: ArrayView1<f64>,
    learners: Vec<BaseLearner>,
    trace: Vec<IterationTrace>,
    scaler: Scaler,
    config: &LifeConfig,
) -> Result<LifeModel> {
    if learners.is_empty() {
        return Err(LifeError::TooFewLearners { needed: 1, found: 0 });
    }
    let p = z.ncols();
    let m: usize = learners.iter().map(|l| l.network.n_hidden()).sum();
    let mut weights = Array2::zeros((m, p));
    let mut biases = Array1::zeros(m);
    let mut provenance = Vec::with_capacity(m);
    let mut row = 0;
    for l in &learners {
        for k in 0..l.network.n_hidden() {
            weights.row_mut(row).assign(&l.network.hidden_weights.row(k));
            biases[row] = l.network.hidden_biases[k];
            provenance.push(NeuronOrigin {
                iteration: l.iteration,
                learner: l.id,
                neuron: k,
            });
            row += 1;
        }
    }
    let features = extract_features(weights.view(), biases.view(), z)?;
    let dead_features: Vec<usize> = features
        .axis_iter(Axis(1))
        .enumerate()
        .filter(|(_, c)| c.iter().all(|&v| v == 0.0))
        .map(|(j, _)| j)
        .collect();
    if !dead_features.is_empty() {
        log::info!("{} flattened features are zero on every training row", dead_features.len());
    }
    let fit = aggregate(features.view(), y, config.task(), config.aggregation, config.seed)?;
    Ok(LifeModel {
        version: MODEL_FORMAT_VERSION,
        config: config.clone(),
        task: config.task(),
        scaler,
        neuron_weights: weights,
        neuron_biases: biases,
        beta: fit.coefficients,
        intercept: fit.intercept,
        penalty: fit.penalty,
        provenance,
        dead_features,
        base_learners: learners,
        trace,
    })
}

/// Fits on inputs that are already in the coordinates described by `scaler`.
pub fn fit_scaled(z: ArrayView2<f64>, y: ArrayView1<f64>, scaler: Scaler, config: &LifeConfig) -> Result<LifeModel> {
    crate::linalg::check_rows(z, y)?;
    crate::linalg::check_finite_matrix(z, "training inputs")?;
    crate::linalg::check_finite_vector(y, "training response")?;
    if scaler.means.len() != z.ncols() {
        return Err(LifeError::DimensionMismatch {
            what: "scaler columns",
            expected: z.ncols(),
            found: scaler.means.len(),
        });
    }
    let (learners, trace) = train_base_learners(z, y, config)?;
    assemble(z, y, learners, trace, scaler, config)
}

/// Fits on raw inputs, standardizing every column first unless
/// `config.standardize` is off.
pub fn fit(x: ArrayView2<f64>, y: ArrayView1<f64>, config: &LifeConfig) -> Result<LifeModel> {
    let scaler = if config.standardize {
        let names: Vec<String> = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Scaler::fit(x, &vec![ColumnKind::Continuous; x.ncols()], &names)?
    } else {
        Scaler::identity(x.ncols())
    };
    let z = scaler.transform(x)?;
    fit_scaled(z.view(), y, scaler, config)
}

/// Fits on a dataset using its stored (training) scaler.
pub fn fit_dataset(data: &Dataset, config: &LifeConfig) -> Result<LifeModel> {
    if config.standardize {
        fit_scaled(data.standardized().view(), data.y.view(), data.scaler.clone(), config)
    } else {
        fit_scaled(data.x.view(), data.y.view(), Scaler::identity(data.x.ncols()), config)
    }
}

impl LifeModel {
    pub fn n_neurons(&self) -> usize {
        self.beta.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.neuron_weights.ncols()
    }

    /// The model as a network on standardized inputs.
    pub fn standardized_network(&self) -> SingleLayerNN {
        SingleLayerNN {
            task: self.task,
            hidden_weights: self.neuron_weights.clone(),
            hidden_biases: self.neuron_biases.clone(),
            output_coefficients: self.beta.clone(),
            output_intercept: self.intercept,
        }
    }

    /// The model as a network on raw inputs: `wₖ/s` and `bₖ − Σⱼ wₖⱼ mⱼ/sⱼ`.
    pub fn flatten_to_single_nn(&self) -> SingleLayerNN {
        let s = Array1::from(self.scaler.stds.clone());
        let m = Array1::from(self.scaler.means.clone());
        let w = &self.neuron_weights / &s;
        let b = &self.neuron_biases - &w.dot(&m);
        SingleLayerNN {
            task: self.task,
            hidden_weights: w,
            hidden_biases: b,
            output_coefficients: self.beta.clone(),
            output_intercept: self.intercept,
        }
    }

    /// Regression output or class-1 probability on raw inputs.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.flatten_to_single_nn().forward(x)
    }

    /// Flattened features on raw inputs.
    pub fn features(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let z = self.scaler.transform(x)?;
        extract_features(self.neuron_weights.view(), self.neuron_biases.view(), z.view())
    }

    /// Rebuilds the model from a subset of its base learners, refitting the
    /// output layer on standardized training inputs `z`.
    pub fn with_learners(&self, keep: &[usize], z: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<LifeModel> {
        let learners: Vec<BaseLearner> = keep.iter().map(|&i| self.base_learners[i].clone()).collect();
        assemble(z, y, learners, self.trace.clone(), self.scaler.clone(), &self.config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == MODEL_FORMAT_VERSION as u64 => {}
            Some(v) => {
                return Err(LifeError::SchemaMismatch(format!(
                    "model format version {v}, expected {MODEL_FORMAT_VERSION}"
                )))
            }
            None => return Err(LifeError::SchemaMismatch("model file has no version field".into())),
        }
        Ok(serde_json::from_value(value)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::training_loss;
    use ndarray::array;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn toy(n: usize, seed: u64) -> (Array2<f64>, Array1<f64>) {
        let mut rng = rng_from(seed);
        let x = Array2::from_shape_fn((n, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let y = Array1::from_shape_fn(n, |i| {
            x[[i, 0]].abs() + 0.5 * x[[i, 1]] * x[[i, 2]] + 0.1 * rng.sample::<f64, _>(StandardNormal)
        });
        (x, y)
    }

    fn quick(task: Task, hidden: Vec<usize>) -> LifeConfig {
        let mut cfg = LifeConfig::new(task, hidden);
        cfg.base_trainer.iterations = 20;
        cfg.aggregation = Aggregation::Unpenalized;
        cfg
    }

    #[test]
    fn relu_feature_column() {
        let f = extract_features(array![[1.0]].view(), array![0.0].view(), array![[2.0], [-1.0]].view()).unwrap();
        assert_eq!(f, array![[2.0], [0.0]]);
    }

    #[test]
    fn single_iteration_refit_does_not_lose_to_base_learner() {
        let (x, y) = toy(400, 1);
        let cfg = quick(Task::Regression, vec![5]);
        let model = fit(x.view(), y.view(), &cfg).unwrap();
        assert_eq!(model.base_learners.len(), 1);
        let z = model.scaler.transform(x.view()).unwrap();
        let base = training_loss(&model.base_learners[0].network, z.view(), y.view()).unwrap();
        let pred = model.predict(x.view()).unwrap();
        let mse = crate::metrics::mse(y.view(), pred.view()).unwrap();
        assert!(mse <= base + 1e-10, "{mse} vs {base}");
    }

    #[test]
    fn flattened_network_reproduces_predictions() {
        let (x, y) = toy(300, 2);
        let cfg = quick(Task::Regression, vec![3, 3]);
        let model = fit(x.view(), y.view(), &cfg).unwrap();
        let flat = model.flatten_to_single_nn();
        assert_eq!(flat.n_hidden(), model.n_neurons());
        let (probe, _) = toy(1000, 3);
        let a = model.predict(probe.view()).unwrap();
        let b = flat.forward(probe.view()).unwrap();
        assert_eq!(a, b);
        // Independent evaluation in standardized coordinates.
        let z = model.scaler.transform(probe.view()).unwrap();
        let c = model.standardized_network().forward(z.view()).unwrap();
        assert!((&a - &c).iter().all(|v| v.abs() < 1e-10));
        // Features times β plus intercept.
        let f = model.features(probe.view()).unwrap();
        let d = f.dot(&model.beta) + model.intercept;
        assert!((&a - &d).iter().all(|v| v.abs() < 1e-12 * (1.0 + v.abs()).max(1.0) * 10.0));
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let (x, y) = toy(200, 4);
        let model = fit(x.view(), y.view(), &quick(Task::Regression, vec![3, 2])).unwrap();
        let text = model.to_json().unwrap();
        let back = LifeModel::from_json(&text).unwrap();
        let a = model.predict(x.view()).unwrap();
        let b = back.predict(x.view()).unwrap();
        assert!((&a - &b).iter().all(|v| v.abs() < 1e-12));
        let stale = text.replacen("\"version\":1", "\"version\":0", 1);
        assert!(matches!(LifeModel::from_json(&stale), Err(LifeError::SchemaMismatch(_))));
    }

    #[test]
    fn neuron_count_follows_kept_learners() {
        let (x, y) = toy(400, 5);
        let model = fit(x.view(), y.view(), &quick(Task::Regression, vec![3, 3, 2])).unwrap();
        let last = model.trace.last().unwrap();
        assert_eq!(model.n_neurons(), last.trained * 2);
        for w in model.trace.windows(2) {
            assert_eq!(w[1].candidates, w[0].neurons);
            assert!(w[1].kept <= w[1].candidates);
        }
        assert_eq!(model.provenance.len(), model.n_neurons());
    }

    #[test]
    fn all_neurons_dropped_is_reported() {
        let (x, y) = toy(200, 6);
        let mut cfg = quick(Task::Regression, vec![3, 3]);
        cfg.sampling.cp = 1e6;
        match fit(x.view(), y.view(), &cfg) {
            Err(LifeError::AllNeuronsDropped { iteration, ratios }) => {
                assert_eq!(iteration, 2);
                assert_eq!(ratios.len(), 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fitting_is_deterministic() {
        let (x, y) = toy(300, 7);
        let mut cfg = quick(Task::Regression, vec![3, 3]);
        cfg.aggregation = Aggregation::CrossValidated { folds: 3 };
        let mut a = fit(x.view(), y.view(), &cfg).unwrap();
        let mut b = fit(x.view(), y.view(), &cfg).unwrap();
        for m in [&mut a, &mut b] {
            m.trace.iter_mut().for_each(|t| t.seconds = 0.0);
        }
        assert_eq!(a, b);
    }

    #[test]
    fn duplicated_neurons_with_ridge() {
        let (x, y) = toy(300, 8);
        let mut cfg = quick(Task::Regression, vec![3]);
        cfg.aggregation = Aggregation::ElasticNet { l1: 0.0, l2: 0.1 };
        let (learners, trace) = train_base_learners(x.view(), y.view(), &cfg).unwrap();
        let mut twice = learners.clone();
        twice.extend(learners);
        let model = assemble(x.view(), y.view(), twice, trace, Scaler::identity(3), &cfg).unwrap();
        assert!(model.beta.iter().all(|v| v.is_finite()));
        assert_eq!(model.n_neurons(), 6);
    }

    #[test]
    fn classification_outputs_probabilities() {
        let mut rng = rng_from(9);
        let x = Array2::from_shape_fn((400, 2), |_| rng.sample::<f64, _>(StandardNormal));
        let y = Array1::from_shape_fn(400, |i| (x[[i, 0]] * x[[i, 1]] > 0.0) as u8 as f64);
        let mut cfg = quick(Task::Classification, vec![4, 3]);
        cfg.aggregation = Aggregation::CrossValidated { folds: 3 };
        let model = fit(x.view(), y.view(), &cfg).unwrap();
        let p = model.predict(x.view()).unwrap();
        assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn sampling_schemes_all_train() {
        let (x, y) = toy(300, 10);
        for scheme in [Scheme::NnProjection, Scheme::RandomProjection, Scheme::Bootstrap] {
            let mut cfg = quick(Task::Regression, vec![3, 2]);
            cfg.sampling.scheme = scheme;
            let model = fit(x.view(), y.view(), &cfg).unwrap();
            assert!(model.n_neurons() >= 2, "{scheme:?}");
        }
    }

    #[test]
    fn rejects_tiny_data() {
        let (x, y) = toy(8, 11);
        assert!(fit(x.view(), y.view(), &quick(Task::Regression, vec![2])).is_err());
    }
}
