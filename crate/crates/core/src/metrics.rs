//! Evaluation metrics.

use ndarray::ArrayView1;

use crate::error::{LifeError, Result};

fn check_pair(y: ArrayView1<f64>, pred: ArrayView1<f64>) -> Result<()> {
    if y.len() != pred.len() {
        return Err(LifeError::DimensionMismatch {
            what: "prediction length",
            expected: y.len(),
            found: pred.len(),
        });
    }
    if y.is_empty() {
        return Err(LifeError::DegenerateInput("empty target vector".into()));
    }
    Ok(())
}

pub fn mse(y: ArrayView1<f64>, pred: ArrayView1<f64>) -> Result<f64> {
    check_pair(y, pred)?;
    Ok(y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64)
}

pub fn rmse(y: ArrayView1<f64>, pred: ArrayView1<f64>) -> Result<f64> {
    mse(y, pred).map(f64::sqrt)
}

/// Coefficient of determination, `1 − SS_res / SS_tot`.
pub fn r2(y: ArrayView1<f64>, pred: ArrayView1<f64>) -> Result<f64> {
    check_pair(y, pred)?;
    let mean = y.sum() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(LifeError::DegenerateInput("constant target in R²".into()));
    }
    let ss_res: f64 = y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Mean binary cross-entropy; probabilities are clipped to `[1e-15, 1 − 1e-15]`.
pub fn log_loss(y: ArrayView1<f64>, prob: ArrayView1<f64>) -> Result<f64> {
    check_pair(y, prob)?;
    let total: f64 = y
        .iter()
        .zip(prob)
        .map(|(&t, &p)| {
            let p = p.clamp(1e-15, 1.0 - 1e-15);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / y.len() as f64)
}

/// Area under the ROC curve via the rank-sum statistic with tied ranks averaged.
pub fn auc(y: ArrayView1<f64>, score: ArrayView1<f64>) -> Result<f64> {
    check_pair(y, score)?;
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| score[a].total_cmp(&score[b]));
    let mut ranks = vec![0.0; y.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && score[order[j + 1]] == score[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    let n_pos = y.iter().filter(|&&v| v > 0.5).count() as f64;
    let n_neg = y.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return Err(LifeError::DegenerateInput("AUC needs both classes".into()));
    }
    let pos_rank_sum: f64 = y.iter().zip(&ranks).filter(|(&t, _)| t > 0.5).map(|(_, r)| r).sum();
    Ok((pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}
