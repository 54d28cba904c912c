//! Local linear approximation (LLA) training.
//!
//! Around the current hidden parameters each ReLU unit is linearized as
//! `βσ(xᵀw + b) ≈ βz₁ + γz₂ + ηᵀz₃` with `z₁ = σ(xᵀw⁽ᶜ⁾ + b⁽ᶜ⁾)`,
//! `z₂ = I(xᵀw⁽ᶜ⁾ + b⁽ᶜ⁾ > 0)` and `z₃ = x·z₂`. One least-squares regression of
//! the response on all `z` columns gives `(β̂, γ̂, η̂)`, after which
//! `b ← b + γ̂/β̂` and `w ← w + η̂/β̂` for every unit with `|β̂| ≥ ε`.
//!
//! `z₁` is an exact linear combination of `z₂` and `z₃`, so the step is only
//! identified through the ridge on the `(γ, η)` blocks; with that penalty a
//! stationary activation pattern yields a zero update.
//!
//! Classification runs the same step on IRLS working responses and weights.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use super::{
    initialize, live_neurons, refit_output_layer, training_loss, validate_training_data,
    SingleLayerNN, Task, TrainConfig, Trained,
};
use crate::error::{LifeError, Result};
use crate::linalg::{cholesky_solve, sigmoid};
use crate::seed::rng_from;

const BETA_FLOOR: f64 = 1e-12;
const IRLS_WEIGHT_FLOOR: f64 = 1e-5;

/// Least-squares coefficients of one LLA step for a single hidden unit.
#[derive(Debug, Clone, PartialEq)]
pub struct LlaCoefficients {
    pub beta: f64,
    pub gamma: f64,
    pub eta: Array1<f64>,
}

/// Applies the LLA parameter update to unit `k` of `net`. Returns whether the
/// unit moved (`|β̂| ≥ ε`).
pub fn apply_lla_update(net: &mut SingleLayerNN, k: usize, coef: &LlaCoefficients, epsilon: f64) -> bool {
    if coef.beta.abs() < epsilon {
        return false;
    }
    net.hidden_biases[k] += coef.gamma / coef.beta;
    net.hidden_weights
        .row_mut(k)
        .scaled_add(1.0 / coef.beta, &coef.eta);
    true
}

struct Step {
    intercept: f64,
    per_unit: Vec<(usize, LlaCoefficients)>,
}

/// Builds the `z` design for the live units and solves the penalized
/// (optionally weighted) least-squares problem.
fn lla_step(
    net: &SingleLayerNN,
    x: ArrayView2<f64>,
    response: ArrayView1<f64>,
    weights: Option<&Array1<f64>>,
    ridge: f64,
) -> Result<Step> {
    let (n, p) = x.dim();
    let pre = net.pre_activations(x)?;
    let live = live_neurons(&pre);
    let l = live.len();
    let d = 1 + l * (p + 2);
    // Column layout: [1 | z1 (l) | z2 (l) | z3 (l·p)].
    let mut z = Array2::<f64>::zeros((n, d));
    for i in 0..n {
        z[[i, 0]] = 1.0;
        for (c, &k) in live.iter().enumerate() {
            let v = pre[[i, k]];
            if v > 0.0 {
                z[[i, 1 + c]] = v;
                z[[i, 1 + l + c]] = 1.0;
                let base = 1 + 2 * l + c * p;
                for j in 0..p {
                    z[[i, base + j]] = x[[i, j]];
                }
            }
        }
    }
    let (gram, rhs) = match weights {
        None => (z.t().dot(&z) / n as f64, z.t().dot(&response) / n as f64),
        Some(w) => {
            let w_sum = w.sum();
            let mut zw = z.clone();
            for (mut row, &wi) in zw.rows_mut().into_iter().zip(w.iter()) {
                row *= wi;
            }
            (z.t().dot(&zw) / w_sum, zw.t().dot(&response) / w_sum)
        }
    };
    let mut penalty = Array1::<f64>::zeros(d);
    penalty.slice_mut(s![1..1 + l]).fill(BETA_FLOOR);
    penalty.slice_mut(s![1 + l..]).fill(ridge.max(BETA_FLOOR));

    let mut theta = None;
    let scale = (0..d).map(|j| gram[[j, j]]).sum::<f64>() / d as f64;
    for jitter in [0.0, 1e-10, 1e-8, 1e-6] {
        let mut a = gram.clone();
        for j in 0..d {
            a[[j, j]] += penalty[j] + if j > 0 { jitter * scale } else { 0.0 };
        }
        if let Some(t) = cholesky_solve(&a, &rhs) {
            theta = Some(t);
            break;
        }
    }
    let theta = theta.ok_or(LifeError::SingularSystem { ridge })?;
    let per_unit = live
        .iter()
        .enumerate()
        .map(|(c, &k)| {
            let base = 1 + 2 * l + c * p;
            (
                k,
                LlaCoefficients {
                    beta: theta[1 + c],
                    gamma: theta[1 + l + c],
                    eta: theta.slice(s![base..base + p]).to_owned(),
                },
            )
        })
        .collect();
    Ok(Step {
        intercept: theta[0],
        per_unit,
    })
}

fn hidden_norm(net: &SingleLayerNN) -> f64 {
    (net.hidden_weights.iter().map(|v| v * v).sum::<f64>()
        + net.hidden_biases.iter().map(|v| v * v).sum::<f64>())
    .sqrt()
}

/// Trains a network with the LLA optimizer, returning the iterate with the
/// lowest training loss after a final output-layer solve.
pub fn train_lla(x: ArrayView2<f64>, y: ArrayView1<f64>, config: &TrainConfig) -> Result<Trained> {
    config.validate()?;
    validate_training_data(x, y, config.task)?;
    let mut rng = rng_from(config.seed);
    let mut net = initialize(x, y, config.task, config.hidden_units, &mut rng)?;
    let mut best = net.clone();
    let mut best_loss = training_loss(&net, x, y)?;
    let mut history = Vec::with_capacity(config.iterations);
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=config.iterations {
        iterations = it;
        let step = match config.task {
            Task::Regression => lla_step(&net, x, y, None, config.lla_ridge)?,
            Task::Classification => {
                let eta = net.linear_output(x)?;
                let mut w = Array1::<f64>::zeros(y.len());
                let mut working = Array1::<f64>::zeros(y.len());
                for i in 0..y.len() {
                    let p = sigmoid(eta[i]);
                    let wi = (p * (1.0 - p)).max(IRLS_WEIGHT_FLOOR);
                    w[i] = wi;
                    working[i] = eta[i] + (y[i] - p) / wi;
                }
                lla_step(&net, x, working.view(), Some(&w), config.lla_ridge)?
            }
        };
        let before = (net.hidden_weights.clone(), net.hidden_biases.clone());
        net.output_coefficients.fill(0.0);
        net.output_intercept = step.intercept;
        for (k, coef) in &step.per_unit {
            net.output_coefficients[*k] = coef.beta;
            apply_lla_update(&mut net, *k, coef, config.lla_epsilon);
        }
        if net.check_finite().is_err() {
            log::warn!("LLA iterate became non-finite at iteration {it}; keeping best iterate");
            break;
        }
        let change = ((&net.hidden_weights - &before.0).iter().map(|v| v * v).sum::<f64>()
            + (&net.hidden_biases - &before.1).iter().map(|v| v * v).sum::<f64>())
        .sqrt();
        let rel = change / hidden_norm(&net).max(1e-12);
        let loss = training_loss(&net, x, y)?;
        history.push(loss);
        if loss.is_finite() && loss < best_loss {
            best_loss = loss;
            best = net.clone();
        }
        if rel < config.tolerance {
            converged = true;
            break;
        }
    }
    refit_output_layer(&mut best, x, y)?;
    best.check_finite()?;
    Ok(Trained {
        model: best,
        loss_history: history,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn one_step_update_by_hand() {
        let mut net = SingleLayerNN::new(Task::Regression, array![[0.5]], array![-1.0], array![1.0], 0.0).unwrap();
        let coef = LlaCoefficients {
            beta: 2.0,
            gamma: 1.0,
            eta: array![4.0],
        };
        assert!(apply_lla_update(&mut net, 0, &coef, 1e-3));
        assert_eq!(net.hidden_biases[0], -0.5);
        assert_eq!(net.hidden_weights[[0, 0]], 2.5);
    }

    #[test]
    fn small_beta_leaves_unit_unchanged() {
        let mut net = SingleLayerNN::new(Task::Regression, array![[0.5, 1.0]], array![-1.0], array![1.0], 0.0).unwrap();
        let before = net.clone();
        let coef = LlaCoefficients {
            beta: 1e-4,
            gamma: 1.0,
            eta: array![4.0, 4.0],
        };
        assert!(!apply_lla_update(&mut net, 0, &coef, 1e-3));
        assert_eq!(net, before);
    }

    fn teacher_data(n: usize, seed: u64) -> (Array2<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 2), |_| rng.sample::<f64, _>(StandardNormal));
        let teacher = SingleLayerNN::new(
            Task::Regression,
            array![[1.0, 0.5], [-0.7, 1.2]],
            array![0.3, -0.2],
            array![2.0, -1.5],
            0.5,
        )
        .unwrap();
        let y = teacher.forward(x.view()).unwrap();
        (x, y)
    }

    #[test]
    fn recovers_noiseless_two_neuron_teacher() {
        let (x, y) = teacher_data(5000, 4);
        let mut cfg = TrainConfig::lla(Task::Regression, 4);
        cfg.seed = 1;
        let out = train_lla(x.view(), y.view(), &cfg).unwrap();
        let pred = out.model.forward(x.view()).unwrap();
        let mean = y.mean().unwrap();
        let ss_res: f64 = (&y - &pred).mapv(|v| v * v).sum();
        let ss_tot: f64 = y.mapv(|v| (v - mean).powi(2)).sum();
        let r2 = 1.0 - ss_res / ss_tot;
        assert!(r2 >= 0.999, "R² = {r2}");
    }

    #[test]
    fn fixed_pattern_step_is_exact() {
        // Target shares the activation pattern of the current network, so the
        // linearization is exact and one step lands on it.
        let (x, _) = teacher_data(400, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        for _ in 0..20 {
            let w = Array2::from_shape_fn((3, 2), |_| rng.sample::<f64, _>(StandardNormal));
            let b = Array1::from_shape_fn(3, |_| rng.sample::<f64, _>(StandardNormal) * 0.3);
            let current = SingleLayerNN::new(Task::Regression, w.clone(), b.clone(), array![1.0, 1.0, 1.0], 0.0).unwrap();
            let target = SingleLayerNN::new(
                Task::Regression,
                w.mapv(|v| v + 0.005 * rng.sample::<f64, _>(StandardNormal)),
                b.mapv(|v| v + 0.005 * rng.sample::<f64, _>(StandardNormal)),
                array![1.5, -2.0, 0.7],
                0.3,
            )
            .unwrap();
            let pre = current.pre_activations(x.view()).unwrap();
            let keep: Vec<usize> = (0..x.nrows())
                .filter(|&i| pre.row(i).iter().all(|v| v.abs() > 0.1))
                .collect();
            let x = x.select(ndarray::Axis(0), &keep);
            let pattern = current.pre_activations(x.view()).unwrap().mapv(|v| v > 0.0);
            if target.pre_activations(x.view()).unwrap().mapv(|v| v > 0.0) != pattern {
                continue;
            }
            checked += 1;
            let y = target.forward(x.view()).unwrap();
            let mut net = current.clone();
            let mut moves = Vec::new();
            for _ in 0..8 {
                let step = lla_step(&net, x.view(), y.view(), None, 1e-4).unwrap();
                let before = net.clone();
                net.output_intercept = step.intercept;
                for (k, coef) in &step.per_unit {
                    net.output_coefficients[*k] = coef.beta;
                    apply_lla_update(&mut net, *k, coef, 1e-3);
                }
                let dw = &net.hidden_weights - &before.hidden_weights;
                let db = &net.hidden_biases - &before.hidden_biases;
                moves.push((dw.mapv(|v| v * v).sum() + db.mapv(|v| v * v).sum()).sqrt());
                assert_eq!(net.pre_activations(x.view()).unwrap().mapv(|v| v > 0.0), pattern);
            }
            let loss = training_loss(&net, x.view(), y.view()).unwrap();
            assert!(loss < 1e-15, "loss {loss}");
            // Contracts until only the β floor rescaling remains, far below
            // the training convergence tolerance.
            assert!(moves[1] < 0.1 * moves[0], "{moves:?}");
            assert!(moves[7] < 1e-6 * hidden_norm(&net), "{moves:?}");
        }
        assert!(checked > 5, "only {checked} trials kept their pattern");
    }

    #[test]
    fn dead_unit_keeps_parameters() {
        let (x, y) = teacher_data(200, 2);
        let mut net = initialize(x.view(), y.view(), Task::Regression, 2, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        net.hidden_biases[1] = -1e6;
        let step = lla_step(&net, x.view(), y.view(), None, 1e-4).unwrap();
        assert!(step.per_unit.iter().all(|(k, _)| *k == 0));
    }

    #[test]
    fn classification_variant_reduces_log_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = Array2::from_shape_fn((2000, 2), |_| rng.sample::<f64, _>(StandardNormal));
        let y = Array1::from_shape_fn(2000, |i| {
            let f = 2.0 * x[[i, 0]].abs() - 1.5 + x[[i, 1]];
            (rng.random::<f64>() < sigmoid(f)) as u8 as f64
        });
        let mut cfg = TrainConfig::lla(Task::Classification, 4);
        cfg.iterations = 30;
        cfg.lla_ridge = 1e-3;
        let out = train_lla(x.view(), y.view(), &cfg).unwrap();
        let base = crate::linalg::logistic_fit(x.view(), y.view(), 0.0).unwrap();
        let eta = x.dot(&base.coefficients) + base.intercept;
        let linear_loss = crate::linalg::mean_logistic_loss(y.view(), eta.view());
        let loss = training_loss(&out.model, x.view(), y.view()).unwrap();
        assert!(loss < linear_loss, "{loss} vs linear {linear_loss}");
    }
}
