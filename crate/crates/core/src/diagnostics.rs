//! Ambiguity decompositions of ensemble loss, two-stage stacking, and the
//! accuracy–diversity sweep over the projection cutoff.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LifeError, Result};
use crate::linalg::{check_finite_matrix, logistic_fit, sigmoid, solve_least_squares_with_intercept};
use crate::nn::Task;
use crate::pipeline::{train_base_learners, LifeConfig};

const SIMPLEX_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossSpace {
    Mse,
    Probability,
    LogOdds,
}

/// `total = accuracy − diversity`, with per-learner losses and the weighted
/// quadratic spread of members around the ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub space: LossSpace,
    pub total_loss: f64,
    pub accuracy_term: f64,
    pub diversity_term: f64,
    pub quadratic_deviation: f64,
    pub weights: Vec<f64>,
    pub per_learner_losses: Vec<f64>,
}

impl DecompositionReport {
    pub fn identity_gap(&self) -> f64 {
        (self.accuracy_term - self.diversity_term - self.total_loss).abs()
    }
}

fn check_simplex(weights: ArrayView1<f64>) -> Result<()> {
    let sum = weights.sum();
    let min = weights.iter().copied().fold(f64::INFINITY, f64::min);
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE || min < -SIMPLEX_TOLERANCE || !sum.is_finite() {
        return Err(LifeError::WeightsOffSimplex { sum, min });
    }
    Ok(())
}

fn check_members(y: ArrayView1<f64>, preds: ArrayView2<f64>, weights: ArrayView1<f64>) -> Result<()> {
    if preds.nrows() != y.len() {
        return Err(LifeError::DimensionMismatch {
            what: "prediction rows",
            expected: y.len(),
            found: preds.nrows(),
        });
    }
    if preds.ncols() != weights.len() {
        return Err(LifeError::DimensionMismatch {
            what: "learner weights",
            expected: preds.ncols(),
            found: weights.len(),
        });
    }
    if y.is_empty() {
        return Err(LifeError::DegenerateInput("empty target".into()));
    }
    check_finite_matrix(preds, "member predictions")?;
    check_simplex(weights)
}

/// Weighted mean anchored at the first member, so identical members give
/// an exactly identical ensemble.
fn ensemble_of(preds: ArrayView2<f64>, weights: ArrayView1<f64>) -> Array1<f64> {
    let anchor = preds.column(0).to_owned();
    let offsets = &preds - &anchor.view().insert_axis(Axis(1));
    anchor + offsets.dot(&weights)
}

fn decompose(
    space: LossSpace,
    y: ArrayView1<f64>,
    preds: ArrayView2<f64>,
    weights: ArrayView1<f64>,
    loss: impl Fn(f64, f64) -> f64,
    explicit_diversity: bool,
) -> DecompositionReport {
    let n = y.len() as f64;
    let ensemble = ensemble_of(preds, weights);
    let total = y.iter().zip(&ensemble).map(|(&t, &f)| loss(t, f)).sum::<f64>() / n;
    let per_learner: Vec<f64> = preds
        .axis_iter(Axis(1))
        .map(|col| y.iter().zip(col).map(|(&t, &f)| loss(t, f)).sum::<f64>() / n)
        .collect();
    let accuracy: f64 = per_learner.iter().zip(weights).map(|(l, w)| w * l).sum();
    let quadratic: f64 = preds
        .axis_iter(Axis(1))
        .zip(weights)
        .map(|(col, &w)| w * col.iter().zip(&ensemble).map(|(a, b)| (b - a).powi(2)).sum::<f64>())
        .sum::<f64>()
        / n;
    let diversity = if explicit_diversity { quadratic } else { accuracy - total };
    DecompositionReport {
        space,
        total_loss: total,
        accuracy_term: accuracy,
        diversity_term: diversity,
        quadratic_deviation: quadratic,
        weights: weights.to_vec(),
        per_learner_losses: per_learner,
    }
}

/// Squared-error ambiguity decomposition; `preds` is `N × M`.
pub fn mse_decomposition(y: ArrayView1<f64>, preds: ArrayView2<f64>, weights: ArrayView1<f64>) -> Result<DecompositionReport> {
    check_members(y, preds, weights)?;
    Ok(decompose(LossSpace::Mse, y, preds, weights, |t, f| (t - f).powi(2), true))
}

fn cross_entropy(t: f64, p: f64) -> f64 {
    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
}

/// Cross-entropy decomposition with the ensemble averaged in probability space.
pub fn ce_decomposition_probability(
    y: ArrayView1<f64>,
    probs: ArrayView2<f64>,
    weights: ArrayView1<f64>,
) -> Result<DecompositionReport> {
    check_members(y, probs, weights)?;
    if let Some(&bad) = probs.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return Err(LifeError::ProbabilityOutOfRange { value: bad });
    }
    Ok(decompose(LossSpace::Probability, y, probs, weights, cross_entropy, false))
}

fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

/// Cross-entropy decomposition with the ensemble averaged in log-odds space.
pub fn ce_decomposition_logodds(
    y: ArrayView1<f64>,
    logits: ArrayView2<f64>,
    weights: ArrayView1<f64>,
) -> Result<DecompositionReport> {
    check_members(y, logits, weights)?;
    Ok(decompose(
        LossSpace::LogOdds,
        y,
        logits,
        weights,
        |t, f| t * softplus(-f) + (1.0 - t) * softplus(f),
        false,
    ))
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: ArrayView1<f64>) -> Array1<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumulative += ui;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    let mut w = v.mapv(|x| (x - theta).max(0.0));
    // Absorb rounding so the weights sum to one.
    let s = w.sum();
    if s > 0.0 {
        w /= s;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StackingMode {
    Unconstrained,
    Simplex,
}

/// Combination of base-learner predictions. Unconstrained classification
/// stacks member log-odds through a logistic model; simplex mode mixes
/// member outputs (probabilities for classification) with no intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackingModel {
    pub task: Task,
    pub mode: StackingMode,
    pub weights: Array1<f64>,
    pub intercept: f64,
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-15, 1.0 - 1e-15);
    (p / (1.0 - p)).ln()
}

impl StackingModel {
    pub fn predict(&self, preds: ArrayView2<f64>) -> Result<Array1<f64>> {
        if preds.ncols() != self.weights.len() {
            return Err(LifeError::DimensionMismatch {
                what: "learner count",
                expected: self.weights.len(),
                found: preds.ncols(),
            });
        }
        Ok(match (self.task, self.mode) {
            (Task::Regression, _) | (Task::Classification, StackingMode::Simplex) => {
                preds.dot(&self.weights) + self.intercept
            }
            (Task::Classification, StackingMode::Unconstrained) => {
                (preds.mapv(logit).dot(&self.weights) + self.intercept).mapv(sigmoid)
            }
        })
    }

    /// Mean squared error or mean log-loss on `(preds, y)`.
    pub fn loss(&self, preds: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<f64> {
        let f = self.predict(preds)?;
        match self.task {
            Task::Regression => crate::metrics::mse(y, f.view()),
            Task::Classification => crate::metrics::log_loss(y, f.view()),
        }
    }
}

fn simplex_objective(task: Task, preds: ArrayView2<f64>, y: ArrayView1<f64>, w: &Array1<f64>) -> f64 {
    let f = preds.dot(w);
    let n = y.len() as f64;
    match task {
        Task::Regression => y.iter().zip(&f).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (2.0 * n),
        Task::Classification => y
            .iter()
            .zip(&f)
            .map(|(&t, &p)| cross_entropy(t, p.clamp(1e-15, 1.0 - 1e-15)))
            .sum::<f64>()
            / n,
    }
}

fn simplex_gradient(task: Task, preds: ArrayView2<f64>, y: ArrayView1<f64>, w: &Array1<f64>) -> Array1<f64> {
    let f = preds.dot(w);
    let n = y.len() as f64;
    let d: Array1<f64> = match task {
        Task::Regression => (&f - &y) / n,
        Task::Classification => y
            .iter()
            .zip(&f)
            .map(|(&t, &p)| {
                let p = p.clamp(1e-15, 1.0 - 1e-15);
                (-(t / p) + (1.0 - t) / (1.0 - p)) / n
            })
            .collect(),
    };
    preds.t().dot(&d)
}

/// Projected gradient with backtracking on the simplex.
fn simplex_weights(task: Task, preds: ArrayView2<f64>, y: ArrayView1<f64>) -> Array1<f64> {
    let m = preds.ncols();
    let mut w = Array1::from_elem(m, 1.0 / m as f64);
    if m == 1 {
        return w;
    }
    let mut step = 1.0;
    let mut obj = simplex_objective(task, preds, y, &w);
    for _ in 0..20_000 {
        let g = simplex_gradient(task, preds, y, &w);
        let mut accepted = None;
        for _ in 0..60 {
            let cand = project_to_simplex((&w - &(&g * step)).view());
            let diff = &cand - &w;
            let cand_obj = simplex_objective(task, preds, y, &cand);
            if cand_obj <= obj + g.dot(&diff) + diff.dot(&diff) / (2.0 * step) {
                accepted = Some((cand, cand_obj, diff));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, cand_obj, diff)) = accepted else { break };
        let moved = diff.iter().map(|v| v.abs()).fold(0.0, f64::max);
        w = cand;
        let improvement = obj - cand_obj;
        obj = cand_obj;
        if moved < 1e-12 || improvement.abs() <= 1e-15 * obj.abs().max(1.0) {
            break;
        }
        step *= 2.0;
    }
    w
}

/// Fits the second stage of a two-stage stacking ensemble on an `N × M`
/// matrix of member predictions (probabilities for classification).
pub fn stacking_fit(preds: ArrayView2<f64>, y: ArrayView1<f64>, task: Task, mode: StackingMode) -> Result<StackingModel> {
    if preds.ncols() == 0 {
        return Err(LifeError::TooFewLearners { needed: 1, found: 0 });
    }
    crate::linalg::check_rows(preds, y)?;
    check_finite_matrix(preds, "member predictions")?;
    let (weights, intercept) = match (mode, task) {
        (StackingMode::Unconstrained, Task::Regression) => {
            let fit = solve_least_squares_with_intercept(preds, y, 0.0)?;
            (fit.coefficients, fit.intercept)
        }
        (StackingMode::Unconstrained, Task::Classification) => {
            let fit = logistic_fit(preds.mapv(logit).view(), y, 0.0)?;
            (fit.coefficients, fit.intercept)
        }
        (StackingMode::Simplex, _) => (simplex_weights(task, preds, y), 0.0),
    };
    Ok(StackingModel {
        task,
        mode,
        weights,
        intercept,
    })
}

/// How member weights are chosen at each sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepWeights {
    /// Simplex-constrained stacking fit.
    Stacked,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cp: f64,
    pub mean_ratio: f64,
    pub learners: usize,
    pub accuracy: f64,
    pub diversity: f64,
    pub total: f64,
}

fn sweep_point(z: ArrayView2<f64>, y: ArrayView1<f64>, config: &LifeConfig, cp: f64, weighting: SweepWeights) -> Result<SweepRow> {
    let mut cfg = config.clone();
    cfg.sampling.cp = cp;
    let (learners, _) = train_base_learners(z, y, &cfg)?;
    let m = learners.len();
    let mut preds = Array2::zeros((z.nrows(), m));
    for (j, l) in learners.iter().enumerate() {
        preds.column_mut(j).assign(&l.network.forward(z)?);
    }
    let task = cfg.task();
    let weights = match weighting {
        SweepWeights::Uniform => Array1::from_elem(m, 1.0 / m as f64),
        SweepWeights::Stacked => stacking_fit(preds.view(), y, task, StackingMode::Simplex)?.weights,
    };
    let report = match task {
        Task::Regression => mse_decomposition(y, preds.view(), weights.view())?,
        Task::Classification => ce_decomposition_probability(y, preds.view(), weights.view())?,
    };
    Ok(SweepRow {
        cp,
        mean_ratio: learners.iter().map(|l| l.subset_ratio).sum::<f64>() / m as f64,
        learners: m,
        accuracy: report.accuracy_term,
        diversity: report.diversity_term,
        total: report.total_loss,
    })
}

/// One stacking fit (no flattening) per cutoff; rows sorted by mean subset
/// ratio. `z` must already be standardized.
pub fn accuracy_diversity_sweep(
    z: ArrayView2<f64>,
    y: ArrayView1<f64>,
    config: &LifeConfig,
    cutoffs: &[f64],
    weighting: SweepWeights,
) -> Result<Vec<SweepRow>> {
    if cutoffs.is_empty() {
        return Err(LifeError::InvalidConfig("sweep needs at least one cutoff".into()));
    }
    if config.hidden_per_iteration.len() < 2 {
        return Err(LifeError::InvalidConfig("sweep needs at least two iterations to sample subsets".into()));
    }
    let mut rows = cutoffs
        .par_iter()
        .map(|&cp| {
            sweep_point(z, y, config, cp, weighting).map_err(|e| LifeError::SweepPoint {
                cp,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.mean_ratio.total_cmp(&b.mean_ratio));
    Ok(rows)
}
