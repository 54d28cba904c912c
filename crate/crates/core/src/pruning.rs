//! Base-learner selection: greedily drop learners whose training residuals
//! are best explained by the residuals of the others, then refit.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LifeError, Result};
use crate::linalg::solve_least_squares;
use crate::metrics;
use crate::nn::Task;
use crate::pipeline::{assemble, Aggregation, LifeModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionOptions {
    /// Fraction of learners to retain, in `(0, 1]`.
    pub tau: f64,
    /// Recompute every R² after each removal (greedy backward elimination).
    /// When false the initial ranking is used throughout.
    pub recompute: bool,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        SelectionOptions { tau: 0.5, recompute: true }
    }
}

/// Unpenalized refit after each removal. `metric` is training R² for
/// regression and training log-loss for classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneStep {
    pub learners: usize,
    pub neurons: usize,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub tau: f64,
    /// R² of each learner's residuals on all other residuals, before any removal.
    /// `None` marks learners whose residuals are constant.
    pub r_squared: Vec<Option<f64>>,
    pub removal_order: Vec<usize>,
    /// R² of the removed learner at the step it was removed.
    pub removal_r_squared: Vec<f64>,
    pub retained: Vec<usize>,
    pub degenerate: Vec<usize>,
    pub curve: Vec<PruneStep>,
}

const TIE_TOLERANCE: f64 = 1e-12;

/// R² of column `j` regressed (with intercept) on columns `others`, from the
/// centered Gram matrix of the residuals.
fn r_squared(gram: &Array2<f64>, j: usize, others: &[usize]) -> f64 {
    let tss = gram[[j, j]];
    if others.is_empty() {
        return 0.0;
    }
    let g_oo = gram.select(Axis(0), others).select(Axis(1), others);
    let g_oj: Array1<f64> = others.iter().map(|&o| gram[[o, j]]).collect();
    let c = solve_least_squares(g_oo.view(), g_oj.view(), 0.0)
        .map(|f| f.coefficients)
        .unwrap_or_else(|_| Array1::zeros(others.len()));
    ((g_oj.dot(&c)) / tss).clamp(0.0, 1.0)
}

fn round_scores(gram: &Array2<f64>, active: &[usize], degenerate: &[bool]) -> Vec<(usize, f64)> {
    active
        .par_iter()
        .filter(|&&j| !degenerate[j])
        .map(|&j| {
            let others: Vec<usize> = active.iter().copied().filter(|&o| o != j).collect();
            (j, r_squared(gram, j, &others))
        })
        .collect()
}

/// Highest R², ties broken toward the later learner.
fn pick(scores: &[(usize, f64)]) -> Option<(usize, f64)> {
    scores.iter().copied().fold(None, |best, (j, r)| match best {
        None => Some((j, r)),
        Some((bj, br)) if r > br + TIE_TOLERANCE || ((r - br).abs() <= TIE_TOLERANCE && j > bj) => Some((j, r)),
        keep => keep,
    })
}

fn training_metric(model: &LifeModel, z: ArrayView2<f64>, y: ndarray::ArrayView1<f64>) -> Result<f64> {
    let pred = model.standardized_network().forward(z)?;
    match model.task {
        Task::Regression => metrics::r2(y, pred.view()),
        Task::Classification => metrics::log_loss(y, pred.view()),
    }
}

/// Prunes `model` to `ceil(τ·M)` base learners and refits its output layer
/// with the model's own aggregation. `x` is in raw units.
pub fn base_learner_selection(
    model: &LifeModel,
    x: ArrayView2<f64>,
    y: ndarray::ArrayView1<f64>,
    options: SelectionOptions,
) -> Result<(SelectionReport, LifeModel)> {
    let tau = options.tau;
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(LifeError::InvalidConfig(format!("tau must lie in (0, 1], got {tau}")));
    }
    let m = model.base_learners.len();
    if m < 2 {
        return Err(LifeError::TooFewLearners { needed: 2, found: m });
    }
    let z = model.scaler.transform(x)?;
    let n = z.nrows();
    if y.len() != n {
        return Err(LifeError::DimensionMismatch {
            what: "target length",
            expected: n,
            found: y.len(),
        });
    }
    let mut resid = Array2::<f64>::zeros((n, m));
    for (j, learner) in model.base_learners.iter().enumerate() {
        let pred = learner.network.forward(z.view())?;
        resid.column_mut(j).assign(&(&y - &pred));
    }
    let means = resid.mean_axis(Axis(0)).expect("n > 0");
    resid -= &means;
    let gram = resid.t().dot(&resid);
    let scale = (0..m).map(|j| gram[[j, j]]).fold(0.0, f64::max);
    let degenerate: Vec<bool> = (0..m).map(|j| gram[[j, j]] <= 1e-14 * scale.max(f64::MIN_POSITIVE)).collect();
    let degenerate_ids: Vec<usize> = (0..m).filter(|&j| degenerate[j]).collect();
    if !degenerate_ids.is_empty() {
        log::warn!("learners {degenerate_ids:?} have constant training residuals; they are retained");
    }

    let all: Vec<usize> = (0..m).collect();
    let initial = round_scores(&gram, &all, &degenerate);
    let mut r_squared_init = vec![None; m];
    for &(j, r) in &initial {
        r_squared_init[j] = Some(r);
    }

    let target = ((tau * m as f64).ceil() as usize).max(1);
    let mut active = all.clone();
    let mut removal_order = Vec::new();
    let mut removal_r_squared = Vec::new();
    let curve_config = {
        let mut c = model.config.clone();
        c.aggregation = Aggregation::Unpenalized;
        c
    };
    let refit_curve = |active: &[usize]| -> Result<PruneStep> {
        let learners = active.iter().map(|&i| model.base_learners[i].clone()).collect();
        let pruned = assemble(z.view(), y, learners, Vec::new(), model.scaler.clone(), &curve_config)?;
        Ok(PruneStep {
            learners: active.len(),
            neurons: pruned.n_neurons(),
            metric: training_metric(&pruned, z.view(), y)?,
        })
    };
    let mut curve = vec![refit_curve(&active)?];
    let mut static_order: Vec<(usize, f64)> = initial.clone();
    static_order.sort_by(|a, b| b.1.total_cmp(&a.1).then(b.0.cmp(&a.0)));
    let mut static_iter = static_order.into_iter();

    while active.len() > target {
        let choice = if options.recompute {
            pick(&round_scores(&gram, &active, &degenerate))
        } else {
            static_iter.next()
        };
        let Some((j, r)) = choice else { break };
        active.retain(|&a| a != j);
        removal_order.push(j);
        removal_r_squared.push(r);
        curve.push(refit_curve(&active)?);
    }

    let mut pruned = model.with_learners(&active, z.view(), y)?;
    pruned.trace = model.trace.clone();
    let report = SelectionReport {
        tau,
        r_squared: r_squared_init,
        removal_order,
        removal_r_squared,
        retained: active,
        degenerate: degenerate_ids,
        curve,
    };
    Ok((report, pruned))
}
