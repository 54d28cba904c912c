//! Dense numerical kernels shared by the trainers, the aggregation step and the
//! interpretation tools: least squares, elastic net, logistic regression,
//! Nadaraya–Watson smoothing and weighted statistics.
//!
//! Design matrices are plain `ndarray` matrices with one observation per row.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{LifeError, Result};

/// Coordinate-descent stopping rule: max absolute coefficient change.
pub const ENET_TOLERANCE: f64 = 1e-8;
/// Coordinate-descent sweep cap.
pub const ENET_MAX_SWEEPS: usize = 10_000;
/// Ridge floor applied inside IRLS so separable data stays bounded.
pub const LOGISTIC_RIDGE_FLOOR: f64 = 1e-8;

const IRLS_MAX_ITER: usize = 100;
const IRLS_WEIGHT_FLOOR: f64 = 1e-5;

/// Output of every linear solver in this module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub coefficients: Array1<f64>,
    pub intercept: f64,
    /// Value of the solver's objective at the returned point.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    /// Turns a flagged non-converged result into [`LifeError::NoConvergence`].
    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(LifeError::NoConvergence {
                iterations: self.iterations,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Regression,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed(f64),
    /// Silverman's rule of thumb, `0.9 min(sd, IQR/1.34) n^(-1/5)`.
    Silverman,
}

pub(crate) fn check_finite_matrix(x: ArrayView2<f64>, what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LifeError::NonFinite(what.to_string()))
    }
}

pub(crate) fn check_finite_vector(x: ArrayView1<f64>, what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LifeError::NonFinite(what.to_string()))
    }
}

pub(crate) fn check_rows(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(LifeError::DimensionMismatch {
            what: "response length",
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if x.nrows() == 0 {
        return Err(LifeError::DegenerateInput("no observations".into()));
    }
    Ok(())
}

fn to_dmatrix(x: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[[i, j]])
}

/// Solves the symmetric positive definite system `a θ = b` by Cholesky.
/// Returns `None` when the factorization fails.
pub(crate) fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
    let chol = m.cholesky()?;
    let sol = chol.solve(&DVector::from_iterator(n, b.iter().copied()));
    if sol.iter().all(|v| v.is_finite()) {
        Some(Array1::from_iter(sol.iter().copied()))
    } else {
        None
    }
}

/// `argmin ‖y − Xβ‖² + ridge·‖β‖²` without an intercept.
///
/// Uses a thin SVD, so with `ridge = 0` and a rank-deficient `X` the result is
/// the minimum-norm least-squares solution.
pub fn solve_least_squares(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    ridge: f64,
) -> Result<FitResult> {
    check_rows(x, y)?;
    check_finite_matrix(x, "design matrix")?;
    check_finite_vector(y, "response")?;
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(LifeError::InvalidConfig(format!("ridge must be >= 0, got {ridge}")));
    }
    let p = x.ncols();
    if p == 0 {
        return Ok(FitResult {
            coefficients: Array1::zeros(0),
            intercept: 0.0,
            objective: y.dot(&y),
            iterations: 0,
            converged: true,
        });
    }
    let svd = to_dmatrix(x).svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let s = &svd.singular_values;
    let s_max = s.iter().cloned().fold(0.0_f64, f64::max);
    let tol = s_max * (x.nrows().max(p) as f64) * f64::EPSILON;
    let y_d = DVector::from_iterator(y.len(), y.iter().copied());
    let uty = u.transpose() * &y_d;
    let mut beta = Array1::<f64>::zeros(p);
    for (i, &si) in s.iter().enumerate() {
        let keep = if ridge > 0.0 { si > 0.0 } else { si > tol };
        if !keep {
            continue;
        }
        let scale = si / (si * si + ridge) * uty[i];
        for j in 0..p {
            beta[j] += scale * v_t[(i, j)];
        }
    }
    let resid = &y - &x.dot(&beta);
    let objective = resid.dot(&resid) + ridge * beta.dot(&beta);
    Ok(FitResult {
        coefficients: beta,
        intercept: 0.0,
        objective,
        iterations: 0,
        converged: true,
    })
}

/// Least squares with an unpenalized intercept: centers, solves, restores.
pub fn solve_least_squares_with_intercept(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    ridge: f64,
) -> Result<FitResult> {
    check_rows(x, y)?;
    let x_mean = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()));
    let y_mean = y.mean().unwrap_or(0.0);
    let xc = &x - &x_mean;
    let yc = &y - y_mean;
    let mut fit = solve_least_squares(xc.view(), yc.view(), ridge)?;
    fit.intercept = y_mean - x_mean.dot(&fit.coefficients);
    Ok(fit)
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Stopping rule and sweep cap for coordinate descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct CdControl {
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for CdControl {
    fn default() -> Self {
        Self {
            tolerance: ENET_TOLERANCE,
            max_sweeps: ENET_MAX_SWEEPS,
        }
    }
}

/// One pass of coordinate updates over `coords`; returns the largest change.
fn cd_pass(
    gram: &Array2<f64>,
    c: &Array1<f64>,
    l1: f64,
    l2: f64,
    beta: &mut Array1<f64>,
    q: &mut Array1<f64>,
    coords: impl Iterator<Item = usize>,
) -> f64 {
    let mut max_change = 0.0_f64;
    for j in coords {
        let gjj = gram[[j, j]];
        let old = beta[j];
        let new = if gjj + l2 <= 0.0 {
            0.0
        } else {
            let z = c[j] - (q[j] - gjj * old);
            soft_threshold(z, l1) / (gjj + l2)
        };
        let delta = new - old;
        if delta != 0.0 {
            beta[j] = new;
            q.scaled_add(delta, &gram.column(j));
            max_change = max_change.max(delta.abs());
        }
    }
    max_change
}

/// Covariance-mode coordinate descent for
/// `½βᵀGβ − cᵀβ + l1‖β‖₁ + (l2/2)‖β‖²`, warm-started from `beta`.
///
/// After each full sweep the nonzero coordinates are cycled alone until they
/// settle; convergence is declared only by a full sweep.
/// Returns `(sweeps, converged)`. When `trace` is given, the objective after
/// every sweep is appended.
pub(crate) fn enet_cd(
    gram: &Array2<f64>,
    c: &Array1<f64>,
    l1: f64,
    l2: f64,
    beta: &mut Array1<f64>,
    mut trace: Option<&mut Vec<f64>>,
    control: CdControl,
) -> (usize, bool) {
    let p = c.len();
    // q = G β, kept in sync with beta.
    let mut q = gram.dot(&*beta);
    let mut sweeps = 0;
    while sweeps < control.max_sweeps {
        let change = cd_pass(gram, c, l1, l2, beta, &mut q, 0..p);
        sweeps += 1;
        if let Some(t) = trace.as_deref_mut() {
            t.push(quadratic_enet_objective(gram, c, l1, l2, beta));
        }
        if change < control.tolerance {
            return (sweeps, true);
        }
        let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
        if active.len() == p {
            continue;
        }
        while sweeps < control.max_sweeps {
            let change = cd_pass(gram, c, l1, l2, beta, &mut q, active.iter().copied());
            sweeps += 1;
            if let Some(t) = trace.as_deref_mut() {
                t.push(quadratic_enet_objective(gram, c, l1, l2, beta));
            }
            if change < control.tolerance {
                break;
            }
        }
    }
    (sweeps, false)
}

fn quadratic_enet_objective(
    gram: &Array2<f64>,
    c: &Array1<f64>,
    l1: f64,
    l2: f64,
    beta: &Array1<f64>,
) -> f64 {
    0.5 * beta.dot(&gram.dot(beta)) - c.dot(beta)
        + l1 * beta.iter().map(|b| b.abs()).sum::<f64>()
        + 0.5 * l2 * beta.dot(beta)
}

fn log1pexp(z: f64) -> f64 {
    if z > 35.0 {
        z
    } else if z < -35.0 {
        z.exp()
    } else {
        z.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy of labels `y` against logits `eta`.
pub(crate) fn mean_logistic_loss(y: ArrayView1<f64>, eta: ArrayView1<f64>) -> f64 {
    let n = y.len().max(1) as f64;
    y.iter()
        .zip(eta.iter())
        .map(|(&yi, &e)| yi * log1pexp(-e) + (1.0 - yi) * log1pexp(e))
        .sum::<f64>()
        / n
}

fn check_binary(y: ArrayView1<f64>) -> Result<()> {
    if y.iter().all(|&v| v == 0.0 || v == 1.0) {
        Ok(())
    } else {
        Err(LifeError::InvalidConfig("binary response must be 0/1".into()))
    }
}

/// Elastic net by coordinate descent with an unpenalized intercept.
///
/// Regression minimizes `(1/2N)‖y − β₀ − Xβ‖² + l1‖β‖₁ + (l2/2)‖β‖²`;
/// the logistic family replaces the squared loss by the mean negative
/// log-likelihood and runs coordinate descent inside an IRLS loop.
/// Penalties act on the columns as given (standardize first for scale-free
/// penalties). A fit that hits the sweep cap is returned with
/// `converged = false`.
pub fn elastic_net_fit(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    l1: f64,
    l2: f64,
    family: Family,
) -> Result<FitResult> {
    elastic_net_fit_warm(x, y, l1, l2, family, None, CdControl::default())
}

pub(crate) fn elastic_net_fit_warm(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    l1: f64,
    l2: f64,
    family: Family,
    warm: Option<&FitResult>,
    control: CdControl,
) -> Result<FitResult> {
    check_rows(x, y)?;
    check_finite_matrix(x, "design matrix")?;
    check_finite_vector(y, "response")?;
    if !(l1 >= 0.0 && l2 >= 0.0 && l1.is_finite() && l2.is_finite()) {
        return Err(LifeError::InvalidConfig("penalties must be finite and >= 0".into()));
    }
    let p = x.ncols();
    let mut beta = match warm {
        Some(w) if w.coefficients.len() == p => w.coefficients.clone(),
        _ => Array1::zeros(p),
    };
    match family {
        Family::Regression => {
            let n = x.nrows() as f64;
            let x_mean = x.mean_axis(Axis(0)).unwrap();
            let y_mean = y.mean().unwrap();
            let xc = &x - &x_mean;
            let yc = &y - y_mean;
            let gram = xc.t().dot(&xc) / n;
            let c = xc.t().dot(&yc) / n;
            let (sweeps, converged) = enet_cd(&gram, &c, l1, l2, &mut beta, None, control);
            let resid = &yc - &xc.dot(&beta);
            let objective = 0.5 * resid.dot(&resid) / n
                + l1 * beta.iter().map(|b| b.abs()).sum::<f64>()
                + 0.5 * l2 * beta.dot(&beta);
            Ok(FitResult {
                intercept: y_mean - x_mean.dot(&beta),
                coefficients: beta,
                objective,
                iterations: sweeps,
                converged,
            })
        }
        Family::Logistic => {
            check_binary(y)?;
            let n = x.nrows() as f64;
            let ybar = y.mean().unwrap().clamp(1e-6, 1.0 - 1e-6);
            let mut beta0 = match warm {
                Some(w) if w.coefficients.len() == p => w.intercept,
                _ => (ybar / (1.0 - ybar)).ln(),
            };
            let mut total_sweeps = 0;
            let mut converged = false;
            for _ in 0..IRLS_MAX_ITER {
                let eta = x.dot(&beta) + beta0;
                let mut w = Array1::<f64>::zeros(x.nrows());
                let mut z = Array1::<f64>::zeros(x.nrows());
                for i in 0..x.nrows() {
                    let pi = sigmoid(eta[i]);
                    let wi = (pi * (1.0 - pi)).max(IRLS_WEIGHT_FLOOR);
                    w[i] = wi;
                    z[i] = eta[i] + (y[i] - pi) / wi;
                }
                let w_sum = w.sum();
                let x_mean = x.t().dot(&w) / w_sum;
                let z_mean = z.dot(&w) / w_sum;
                let sw = w.mapv(f64::sqrt);
                let mut xs = &x - &x_mean;
                for (mut row, &s) in xs.axis_iter_mut(Axis(0)).zip(sw.iter()) {
                    row *= s;
                }
                let zs = (&z - z_mean) * &sw;
                let gram = xs.t().dot(&xs) / n;
                let c = xs.t().dot(&zs) / n;
                let old_beta = beta.clone();
                let old_beta0 = beta0;
                let (sweeps, _) = enet_cd(&gram, &c, l1, l2, &mut beta, None, control);
                total_sweeps += sweeps;
                beta0 = z_mean - x_mean.dot(&beta);
                let change = beta
                    .iter()
                    .zip(old_beta.iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold((beta0 - old_beta0).abs(), f64::max);
                if !change.is_finite() {
                    return Err(LifeError::NonFinite("logistic elastic net iterate".into()));
                }
                if change < control.tolerance {
                    converged = true;
                    break;
                }
            }
            let eta = x.dot(&beta) + beta0;
            let objective = mean_logistic_loss(y, eta.view())
                + l1 * beta.iter().map(|b| b.abs()).sum::<f64>()
                + 0.5 * l2 * beta.dot(&beta);
            Ok(FitResult {
                coefficients: beta,
                intercept: beta0,
                objective,
                iterations: total_sweeps,
                converged,
            })
        }
    }
}

/// Ridge-penalized logistic regression by Newton/IRLS with step halving.
///
/// Minimizes `−ℓ(β₀, β)/N + (ridge/2)‖β‖²`. The ridge is floored at
/// [`LOGISTIC_RIDGE_FLOOR`], and the intercept carries the floor alone, so
/// separable or single-class data still yields finite coefficients.
pub fn logistic_fit(x: ArrayView2<f64>, y: ArrayView1<f64>, ridge: f64) -> Result<FitResult> {
    let w = Array1::from_elem(x.nrows(), 1.0);
    logistic_fit_weighted(x, y, w.view(), ridge)
}

/// [`logistic_fit`] with per-observation weights (normalized by their sum).
pub(crate) fn logistic_fit_weighted(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    obs_weights: ArrayView1<f64>,
    ridge: f64,
) -> Result<FitResult> {
    check_rows(x, y)?;
    check_finite_matrix(x, "design matrix")?;
    check_finite_vector(y, "response")?;
    check_binary(y)?;
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(LifeError::InvalidConfig(format!("ridge must be >= 0, got {ridge}")));
    }
    let ridge = ridge.max(LOGISTIC_RIDGE_FLOOR);
    let n_rows = x.nrows();
    let p = x.ncols();
    let w_total: f64 = obs_weights.sum();
    if w_total <= 0.0 {
        return Err(LifeError::ZeroWeight);
    }
    // Design with a leading intercept column.
    let mut design = Array2::<f64>::ones((n_rows, p + 1));
    design.slice_mut(ndarray::s![.., 1..]).assign(&x);
    let mut penalty = Array1::from_elem(p + 1, ridge);
    penalty[0] = LOGISTIC_RIDGE_FLOOR;

    let objective = |theta: &Array1<f64>| -> f64 {
        let eta = design.dot(theta);
        let ll: f64 = y
            .iter()
            .zip(eta.iter())
            .zip(obs_weights.iter())
            .map(|((&yi, &e), &wi)| wi * (yi * log1pexp(-e) + (1.0 - yi) * log1pexp(e)))
            .sum();
        ll / w_total + 0.5 * theta.iter().zip(penalty.iter()).map(|(t, r)| r * t * t).sum::<f64>()
    };

    let mut theta = Array1::<f64>::zeros(p + 1);
    let mut current = objective(&theta);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=IRLS_MAX_ITER {
        iterations = it;
        let eta = design.dot(&theta);
        let probs = eta.mapv(sigmoid);
        let mut weighted = design.clone();
        let mut grad = &penalty * &theta;
        for i in 0..n_rows {
            let wi = obs_weights[i] / w_total;
            let resid = probs[i] - y[i];
            grad.scaled_add(wi * resid, &design.row(i));
            let h = (probs[i] * (1.0 - probs[i])).max(1e-12) * wi;
            weighted.row_mut(i).mapv_inplace(|v| v * h);
        }
        let mut hess = design.t().dot(&weighted);
        for j in 0..=p {
            hess[[j, j]] += penalty[j];
        }
        let step = cholesky_solve(&hess, &grad).ok_or(LifeError::SingularSystem { ridge })?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = &theta - &(&step * t);
            let val = objective(&cand);
            if val.is_finite() && val <= current + 1e-14 * current.abs().max(1.0) {
                theta = cand;
                current = val;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        let change = step.iter().map(|s| (s * t).abs()).fold(0.0_f64, f64::max);
        if !accepted || change < 1e-10 {
            converged = true;
            break;
        }
    }
    if !current.is_finite() {
        return Err(LifeError::NonFinite("logistic objective".into()));
    }
    Ok(FitResult {
        intercept: theta[0],
        coefficients: theta.slice(ndarray::s![1..]).to_owned(),
        objective: current,
        iterations,
        converged,
    })
}

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Silverman's rule-of-thumb bandwidth for a Gaussian kernel.
pub fn silverman_bandwidth(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(LifeError::DegenerateInput("need at least two points".into()));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sd = population_std(x);
    if sd == 0.0 {
        return Err(LifeError::DegenerateInput("smoothing variable is constant".into()));
    }
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * (x.len() as f64).powf(-0.2))
}

/// Nadaraya–Watson estimate of `E(t | x)` at each point of `eval_grid`, with a
/// Gaussian kernel.
pub fn kernel_smooth(
    x: ArrayView1<f64>,
    t: ArrayView1<f64>,
    eval_grid: ArrayView1<f64>,
    bandwidth: Bandwidth,
) -> Result<Array1<f64>> {
    if x.len() != t.len() {
        return Err(LifeError::DimensionMismatch {
            what: "smoothing response length",
            expected: x.len(),
            found: t.len(),
        });
    }
    if x.len() < 2 {
        return Err(LifeError::DegenerateInput("need at least two points".into()));
    }
    check_finite_vector(x, "smoothing abscissa")?;
    check_finite_vector(t, "smoothing response")?;
    check_finite_vector(eval_grid, "evaluation grid")?;
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(t.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pairs[0].0 == pairs[pairs.len() - 1].0 {
        return Err(LifeError::DegenerateInput("smoothing variable is constant".into()));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let h = match bandwidth {
        Bandwidth::Fixed(h) if h > 0.0 => h,
        Bandwidth::Fixed(h) => {
            return Err(LifeError::InvalidConfig(format!("bandwidth must be > 0, got {h}")))
        }
        Bandwidth::Silverman => silverman_bandwidth(&xs)?,
    };
    // Kernel mass beyond 8 bandwidths is below 1e-14 of the peak.
    let reach = 8.0 * h;
    let out = eval_grid
        .iter()
        .map(|&e| {
            let lo = xs.partition_point(|&v| v < e - reach);
            let hi = xs.partition_point(|&v| v <= e + reach);
            if lo < hi {
                let (mut num, mut den) = (0.0, 0.0);
                for &(xi, ti) in &pairs[lo..hi] {
                    let u = (xi - e) / h;
                    let k = (-0.5 * u * u).exp();
                    num += k * ti;
                    den += k;
                }
                num / den
            } else {
                // Far from the data: normalize in log space.
                let logs: Vec<f64> = pairs
                    .iter()
                    .map(|&(xi, _)| {
                        let u = (xi - e) / h;
                        -0.5 * u * u
                    })
                    .collect();
                let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let (mut num, mut den) = (0.0, 0.0);
                for (l, &(_, ti)) in logs.iter().zip(&pairs) {
                    let k = (l - m).exp();
                    num += k * ti;
                    den += k;
                }
                num / den
            }
        })
        .collect();
    Ok(out)
}

/// `sqrt(Σwᵢ(vᵢ − v̄_w)² / Σwᵢ)` with the weighted mean `v̄_w`.
pub fn weighted_std(values: ArrayView1<f64>, weights: ArrayView1<f64>) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(LifeError::DimensionMismatch {
            what: "weights length",
            expected: values.len(),
            found: weights.len(),
        });
    }
    check_finite_vector(values, "values")?;
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(LifeError::InvalidConfig("weights must be finite and >= 0".into()));
    }
    let w_sum = weights.sum();
    if w_sum <= 0.0 {
        return Err(LifeError::ZeroWeight);
    }
    let mean = values.dot(&weights) / w_sum;
    let var = values
        .iter()
        .zip(weights.iter())
        .map(|(v, w)| w * (v - mean).powi(2))
        .sum::<f64>()
        / w_sum;
    Ok(var.sqrt())
}
