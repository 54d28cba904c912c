use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;

use super::{initialize, training_loss, validate_training_data, SingleLayerNN, Task, TrainConfig, Trained};
use crate::error::{LifeError, Result};
use crate::linalg::sigmoid;
use crate::seed::rng_from;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Gradient of the mean training loss with respect to every parameter.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub hidden_weights: Array2<f64>,
    pub hidden_biases: Array1<f64>,
    pub output_coefficients: Array1<f64>,
    pub output_intercept: f64,
}

/// Mean loss (MSE for regression, log-loss for classification) and its
/// analytic gradient.
pub fn loss_and_gradient(
    net: &SingleLayerNN,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
) -> Result<(f64, Gradient)> {
    let n = y.len().max(1) as f64;
    let pre = net.pre_activations(x)?;
    let act = pre.mapv(|v| v.max(0.0));
    let eta = act.dot(&net.output_coefficients) + net.output_intercept;
    let (loss, d_eta) = match net.task {
        Task::Regression => {
            let r = &eta - &y;
            (r.dot(&r) / n, r * (2.0 / n))
        }
        Task::Classification => {
            let p = eta.mapv(sigmoid);
            let loss = crate::linalg::mean_logistic_loss(y, eta.view());
            (loss, (p - y) / n)
        }
    };
    let g_beta = act.t().dot(&d_eta);
    let g_beta0 = d_eta.sum();
    let mut d_pre = Array2::<f64>::zeros(pre.raw_dim());
    for ((mut row, pre_row), &d) in d_pre.axis_iter_mut(Axis(0)).zip(pre.axis_iter(Axis(0))).zip(d_eta.iter()) {
        for ((slot, &z), &b) in row.iter_mut().zip(pre_row.iter()).zip(net.output_coefficients.iter()) {
            if z > 0.0 {
                *slot = d * b;
            }
        }
    }
    let g_w = d_pre.t().dot(&x);
    let g_b = d_pre.sum_axis(Axis(0));
    Ok((
        loss,
        Gradient {
            hidden_weights: g_w,
            hidden_biases: g_b,
            output_coefficients: g_beta,
            output_intercept: g_beta0,
        },
    ))
}

struct Moments {
    w: (Array2<f64>, Array2<f64>),
    b: (Array1<f64>, Array1<f64>),
    beta: (Array1<f64>, Array1<f64>),
    beta0: (f64, f64),
}

fn adam_step<D: ndarray::Dimension>(
    param: &mut ndarray::Array<f64, D>,
    grad: &ndarray::Array<f64, D>,
    m: &mut ndarray::Array<f64, D>,
    v: &mut ndarray::Array<f64, D>,
    lr_t: f64,
) {
    ndarray::Zip::from(param)
        .and(grad)
        .and(m)
        .and(v)
        .for_each(|p, &g, m, v| {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= lr_t * *m / (v.sqrt() + EPS);
        });
}

/// Minibatch Adam from the default initialization.
pub fn train_adam(x: ArrayView2<f64>, y: ArrayView1<f64>, config: &TrainConfig) -> Result<Trained> {
    config.validate()?;
    validate_training_data(x, y, config.task)?;
    let mut rng = rng_from(config.seed);
    let init = initialize(x, y, config.task, config.hidden_units, &mut rng)?;
    run_adam(init, x, y, config, &mut rng)
}

/// Minibatch Adam starting from `init` (its task and width override the config).
pub fn train_adam_from(
    init: SingleLayerNN,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    config: &TrainConfig,
) -> Result<Trained> {
    validate_training_data(x, y, init.task)?;
    let mut rng = rng_from(config.seed);
    run_adam(init, x, y, config, &mut rng)
}

fn run_adam(
    mut net: SingleLayerNN,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    config: &TrainConfig,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Trained> {
    if x.ncols() != net.n_inputs() {
        return Err(LifeError::DimensionMismatch {
            what: "input columns",
            expected: net.n_inputs(),
            found: x.ncols(),
        });
    }
    let n = x.nrows();
    let batch = config.batch_size.clamp(1, n);
    let mut moments = Moments {
        w: (Array2::zeros(net.hidden_weights.raw_dim()), Array2::zeros(net.hidden_weights.raw_dim())),
        b: (Array1::zeros(net.n_hidden()), Array1::zeros(net.n_hidden())),
        beta: (Array1::zeros(net.n_hidden()), Array1::zeros(net.n_hidden())),
        beta0: (0.0, 0.0),
    };
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.iterations);
    let mut step = 0_i32;
    for epoch in 1..=config.iterations {
        order.shuffle(rng);
        for chunk in order.chunks(batch) {
            let xb = x.select(Axis(0), chunk);
            let yb = y.select(Axis(0), chunk);
            let (_, g) = loss_and_gradient(&net, xb.view(), yb.view())?;
            step += 1;
            let lr_t = config.learning_rate * (1.0 - BETA2.powi(step)).sqrt() / (1.0 - BETA1.powi(step));
            adam_step(&mut net.hidden_weights, &g.hidden_weights, &mut moments.w.0, &mut moments.w.1, lr_t);
            adam_step(&mut net.hidden_biases, &g.hidden_biases, &mut moments.b.0, &mut moments.b.1, lr_t);
            adam_step(
                &mut net.output_coefficients,
                &g.output_coefficients,
                &mut moments.beta.0,
                &mut moments.beta.1,
                lr_t,
            );
            let (m0, v0) = &mut moments.beta0;
            *m0 = BETA1 * *m0 + (1.0 - BETA1) * g.output_intercept;
            *v0 = BETA2 * *v0 + (1.0 - BETA2) * g.output_intercept.powi(2);
            net.output_intercept -= lr_t * *m0 / (v0.sqrt() + EPS);
        }
        let loss = training_loss(&net, x, y)?;
        if !loss.is_finite() {
            return Err(LifeError::Diverged { epoch });
        }
        history.push(loss);
    }
    net.check_finite()?;
    Ok(Trained {
        model: net,
        iterations: config.iterations,
        converged: true,
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn params(net: &SingleLayerNN) -> Vec<f64> {
        net.hidden_weights
            .iter()
            .chain(net.hidden_biases.iter())
            .chain(net.output_coefficients.iter())
            .copied()
            .chain(std::iter::once(net.output_intercept))
            .collect()
    }

    fn set_params(net: &mut SingleLayerNN, theta: &[f64]) {
        let (k, p) = net.hidden_weights.dim();
        let mut it = theta.iter().copied();
        net.hidden_weights.iter_mut().for_each(|v| *v = it.next().unwrap());
        net.hidden_biases.iter_mut().for_each(|v| *v = it.next().unwrap());
        net.output_coefficients.iter_mut().for_each(|v| *v = it.next().unwrap());
        net.output_intercept = it.next().unwrap();
        assert_eq!(theta.len(), k * p + 2 * k + 1);
    }

    fn random_net(rng: &mut ChaCha8Rng, task: Task, k: usize, p: usize) -> SingleLayerNN {
        let mut g = || rng.sample::<f64, _>(StandardNormal);
        SingleLayerNN::new(
            task,
            Array2::from_shape_fn((k, p), |_| g()),
            Array1::from_shape_fn(k, |_| g()),
            Array1::from_shape_fn(k, |_| g()),
            g(),
        )
        .unwrap()
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let h = 1e-5;
        for trial in 0..100 {
            let task = if trial % 2 == 0 { Task::Regression } else { Task::Classification };
            let x = Array2::from_shape_fn((8, 3), |_| rng.sample::<f64, _>(StandardNormal));
            let y = match task {
                Task::Regression => Array1::from_shape_fn(8, |_| rng.sample::<f64, _>(StandardNormal)),
                Task::Classification => Array1::from_shape_fn(8, |_| rng.random_range(0..2) as f64),
            };
            let mut net = random_net(&mut rng, task, 4, 3);
            let (_, g) = loss_and_gradient(&net, x.view(), y.view()).unwrap();
            let analytic = params(&Gradient::into_net(&g, &net));
            let theta = params(&net);
            for i in 0..theta.len() {
                let mut plus = theta.clone();
                plus[i] += h;
                set_params(&mut net, &plus);
                let fp = training_loss(&net, x.view(), y.view()).unwrap();
                let mut minus = theta.clone();
                minus[i] -= h;
                set_params(&mut net, &minus);
                let fm = training_loss(&net, x.view(), y.view()).unwrap();
                set_params(&mut net, &theta);
                let numeric = (fp - fm) / (2.0 * h);
                let denom = numeric.abs().max(analytic[i].abs()).max(1e-6);
                assert!(
                    (numeric - analytic[i]).abs() / denom < 1e-4,
                    "trial {trial} param {i}: numeric {numeric} analytic {}",
                    analytic[i]
                );
            }
        }
    }

    impl Gradient {
        fn into_net(&self, like: &SingleLayerNN) -> SingleLayerNN {
            SingleLayerNN {
                task: like.task,
                hidden_weights: self.hidden_weights.clone(),
                hidden_biases: self.hidden_biases.clone(),
                output_coefficients: self.output_coefficients.clone(),
                output_intercept: self.output_intercept,
            }
        }
    }

    #[test]
    fn separable_toy_loss_decreases() {
        let x = Array2::from_shape_fn((40, 1), |(i, _)| i as f64 / 20.0 - 1.0 + 0.025);
        let y = x.column(0).mapv(|v| (v > 0.0) as u8 as f64);
        let mut cfg = TrainConfig::adam(Task::Classification, 3);
        cfg.iterations = 50;
        cfg.batch_size = 8;
        cfg.seed = 3;
        let out = train_adam(x.view(), y.view(), &cfg).unwrap();
        assert_eq!(out.loss_history.len(), 50);
        assert!(out.loss_history[49] < out.loss_history[0]);
    }

    #[test]
    fn identical_seeds_identical_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((100, 2), |_| rng.sample::<f64, _>(StandardNormal));
        let y = x.column(0).mapv(|v| v.abs());
        let mut cfg = TrainConfig::adam(Task::Regression, 4);
        cfg.iterations = 5;
        cfg.seed = 99;
        let a = train_adam(x.view(), y.view(), &cfg).unwrap();
        let b = train_adam(x.view(), y.view(), &cfg).unwrap();
        assert_eq!(params(&a.model), params(&b.model));
        cfg.seed = 100;
        let c = train_adam(x.view(), y.view(), &cfg).unwrap();
        assert_ne!(params(&a.model), params(&c.model));
    }

    #[test]
    fn descends_on_constant_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = Array2::from_shape_fn((200, 2), |_| rng.sample::<f64, _>(StandardNormal));
        let y = Array1::zeros(200);
        let init = random_net(&mut rng, Task::Regression, 4, 2);
        let before = training_loss(&init, x.view(), y.view()).unwrap();
        let mut cfg = TrainConfig::adam(Task::Regression, 4);
        cfg.iterations = 100;
        let out = train_adam_from(init, x.view(), y.view(), &cfg).unwrap();
        let after = training_loss(&out.model, x.view(), y.view()).unwrap();
        assert!(after < before, "{after} !< {before}");
        assert!(after < 1e-2 * before);
    }
}
