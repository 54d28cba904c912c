//! Interpretation of a single-hidden-layer ReLU network: neuron importance,
//! activation regions, varying coefficients, and main/interaction effects.
//!
//! Everything is computed on the linear output (log-odds for
//! classification) in the network's own input space.

use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LifeError, Result};
use crate::linalg::{kernel_smooth, weighted_std, Bandwidth};
use crate::nn::SingleLayerNN;

fn population_std(v: ArrayView1<f64>) -> f64 {
    let n = v.len() as f64;
    let mean = v.sum() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn output_std(net: &SingleLayerNN, x: ArrayView2<f64>) -> Result<(Array2<f64>, f64)> {
    let act = net.hidden_activations(x)?;
    if x.nrows() == 0 {
        return Err(LifeError::DegenerateModel);
    }
    let f = act.dot(&net.output_coefficients) + net.output_intercept;
    let sd = population_std(f.view());
    if !(sd > 0.0) {
        return Err(LifeError::DegenerateModel);
    }
    Ok((act, sd))
}

/// `std(βₖσₖ) / std(f̂)` for each hidden unit.
pub fn neuron_importance(net: &SingleLayerNN, x: ArrayView2<f64>) -> Result<Array1<f64>> {
    let (act, sd) = output_std(net, x)?;
    Ok(act
        .axis_iter(Axis(1))
        .zip(&net.output_coefficients)
        .map(|(col, &beta)| population_std(col.mapv(|v| beta * v).view()) / sd)
        .collect())
}

/// `K × p` matrix with entries `w_km βₖ std(σₖ) / std(f̂)`.
pub fn variable_contribution(net: &SingleLayerNN, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let (act, sd) = output_std(net, x)?;
    let mut out = net.hidden_weights.clone();
    for (k, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let scale = net.output_coefficients[k] * population_std(act.column(k)) / sd;
        row *= scale;
    }
    Ok(out)
}

/// Observations sharing one activation pattern, on which the network is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalRegion {
    pub pattern: Vec<bool>,
    pub count: usize,
    pub rows: Vec<usize>,
    pub slope: Array1<f64>,
    pub intercept: f64,
}

impl LocalRegion {
    /// The pattern as a string of `0`/`1`, one character per hidden unit.
    pub fn pattern_key(&self) -> String {
        self.pattern.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    /// Regions with more than `tau` observations, largest first.
    pub regions: Vec<LocalRegion>,
    pub overflow_patterns: usize,
    pub overflow_observations: usize,
    pub tau: usize,
}

fn active_pattern(pre: ArrayView1<f64>) -> Vec<bool> {
    pre.iter().map(|&v| v > 0.0).collect()
}

fn linear_piece(net: &SingleLayerNN, pattern: &[bool]) -> (Array1<f64>, f64) {
    let mut slope = Array1::zeros(net.n_inputs());
    let mut intercept = net.output_intercept;
    for (k, _) in pattern.iter().enumerate().filter(|(_, &on)| on) {
        let beta = net.output_coefficients[k];
        slope.scaled_add(beta, &net.hidden_weights.row(k));
        intercept += beta * net.hidden_biases[k];
    }
    (slope, intercept)
}

/// Groups rows by exact activation pattern and materializes every region
/// holding more than `tau` rows.
pub fn extract_local_regions(net: &SingleLayerNN, x: ArrayView2<f64>, tau: usize) -> Result<RegionReport> {
    let pre = net.pre_activations(x)?;
    let mut groups: HashMap<Vec<bool>, Vec<usize>> = HashMap::new();
    for (i, row) in pre.axis_iter(Axis(0)).enumerate() {
        groups.entry(active_pattern(row)).or_default().push(i);
    }
    let mut regions = Vec::new();
    let (mut overflow_patterns, mut overflow_observations) = (0, 0);
    for (pattern, rows) in groups {
        if rows.len() > tau {
            let (slope, intercept) = linear_piece(net, &pattern);
            regions.push(LocalRegion {
                count: rows.len(),
                pattern,
                rows,
                slope,
                intercept,
            });
        } else {
            overflow_patterns += 1;
            overflow_observations += rows.len();
        }
    }
    regions.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.pattern.cmp(&b.pattern)));
    Ok(RegionReport {
        regions,
        overflow_patterns,
        overflow_observations,
        tau,
    })
}

/// Per-observation slopes `αᵢ` and intercepts with `αᵢ·xᵢ + α₀ᵢ = f̂ᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaryingCoefficients {
    pub alpha: Array2<f64>,
    pub intercepts: Array1<f64>,
}

impl VaryingCoefficients {
    pub fn reconstruct(&self, x: ArrayView2<f64>) -> Array1<f64> {
        (&self.alpha * &x).sum_axis(Axis(1)) + &self.intercepts
    }
}

pub fn varying_coefficients(net: &SingleLayerNN, x: ArrayView2<f64>) -> Result<VaryingCoefficients> {
    let pre = net.pre_activations(x)?;
    let gated = pre.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }) * &net.output_coefficients;
    Ok(VaryingCoefficients {
        alpha: gated.dot(&net.hidden_weights),
        intercepts: gated.dot(&net.hidden_biases) + net.output_intercept,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectOptions {
    pub grid_size: usize,
    pub density_bins: usize,
    pub bandwidth: Bandwidth,
}

impl Default for EffectOptions {
    fn default() -> Self {
        EffectOptions {
            grid_size: 100,
            density_bins: 50,
            bandwidth: Bandwidth::Silverman,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    Main,
    Interaction,
    Ale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectCurve {
    pub kind: EffectKind,
    /// `[m]` for main effects, `[m, k]` for the effect of `k` on `α_m`.
    pub variables: Vec<usize>,
    pub grid: Array1<f64>,
    pub values: Array1<f64>,
    pub strength: f64,
}

fn range_of(v: ArrayView1<f64>) -> Result<(f64, f64)> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(LifeError::DegenerateInput("variable is constant".into()));
    }
    Ok((lo, hi))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Array1<f64> {
    Array1::linspace(lo, hi, n.max(2))
}

/// Histogram share of the observations in the bin holding each grid point.
fn density_weights(v: ArrayView1<f64>, grid: ArrayView1<f64>, bins: usize) -> Result<Array1<f64>> {
    let (lo, hi) = range_of(v)?;
    let bins = bins.max(1);
    let width = (hi - lo) / bins as f64;
    let bin_of = |t: f64| (((t - lo) / width) as usize).min(bins - 1);
    let mut counts = vec![0usize; bins];
    v.iter().for_each(|&t| counts[bin_of(t)] += 1);
    let n = v.len() as f64;
    Ok(grid.mapv(|g| counts[bin_of(g.clamp(lo, hi))] as f64 / n))
}

fn column(x: ArrayView2<f64>, vc: &VaryingCoefficients, m: usize) -> Result<()> {
    if x.nrows() != vc.alpha.nrows() || x.ncols() != vc.alpha.ncols() {
        return Err(LifeError::DimensionMismatch {
            what: "data shape for varying coefficients",
            expected: vc.alpha.len(),
            found: x.len(),
        });
    }
    if m >= x.ncols() {
        return Err(LifeError::DimensionMismatch {
            what: "variable index",
            expected: x.ncols(),
            found: m,
        });
    }
    Ok(())
}

fn smoothed_curve(
    kind: EffectKind,
    variables: Vec<usize>,
    abscissa: ArrayView1<f64>,
    response: ArrayView1<f64>,
    opts: &EffectOptions,
) -> Result<EffectCurve> {
    let (lo, hi) = range_of(abscissa)?;
    let grid = linspace(lo, hi, opts.grid_size);
    let values = kernel_smooth(abscissa, response, grid.view(), opts.bandwidth)?;
    let weights = density_weights(abscissa, grid.view(), opts.density_bins)?;
    let strength = weighted_std(values.view(), weights.view())?;
    Ok(EffectCurve {
        kind,
        variables,
        grid,
        values,
        strength,
    })
}

/// `E(α_m | x_m)` on an evenly spaced grid over the range of `x_m`.
pub fn main_effect_curve(vc: &VaryingCoefficients, x: ArrayView2<f64>, m: usize, opts: &EffectOptions) -> Result<EffectCurve> {
    column(x, vc, m)?;
    smoothed_curve(EffectKind::Main, vec![m], x.column(m), vc.alpha.column(m), opts)
}

const RESIDUAL_GRID: usize = 1000;

/// `α_m − ĝ_main(x_m)` for every row, with the main effect interpolated
/// from a dense grid.
fn main_effect_residual(vc: &VaryingCoefficients, x: ArrayView2<f64>, m: usize, opts: &EffectOptions) -> Result<Array1<f64>> {
    let xm = x.column(m);
    let (lo, hi) = range_of(xm)?;
    let grid = linspace(lo, hi, RESIDUAL_GRID);
    let g = kernel_smooth(xm, vc.alpha.column(m), grid.view(), opts.bandwidth)?;
    let step = (hi - lo) / (RESIDUAL_GRID - 1) as f64;
    Ok(xm
        .iter()
        .zip(vc.alpha.column(m))
        .map(|(&t, &a)| {
            let pos = ((t - lo) / step).clamp(0.0, (RESIDUAL_GRID - 1) as f64);
            let i = (pos.floor() as usize).min(RESIDUAL_GRID - 2);
            let frac = pos - i as f64;
            a - (g[i] + frac * (g[i + 1] - g[i]))
        })
        .collect())
}

/// Residual of `α_m` after removing its main effect, smoothed against `x_k`.
pub fn interaction_curve(
    vc: &VaryingCoefficients,
    x: ArrayView2<f64>,
    m: usize,
    k: usize,
    opts: &EffectOptions,
) -> Result<EffectCurve> {
    column(x, vc, m)?;
    column(x, vc, k)?;
    if m == k {
        return Err(LifeError::InvalidConfig("interaction needs two distinct variables".into()));
    }
    let residual = main_effect_residual(vc, x, m, opts)?;
    smoothed_curve(EffectKind::Interaction, vec![m, k], x.column(k), residual.view(), opts)
}

/// Entry `(m, k)` is the strength of the effect of `x_k` on `α_m`; the
/// diagonal is zero. Constant variables get zero rows and columns.
pub fn interaction_matrix(vc: &VaryingCoefficients, x: ArrayView2<f64>, opts: &EffectOptions) -> Result<Array2<f64>> {
    let p = x.ncols();
    column(x, vc, 0)?;
    if p < 2 {
        return Err(LifeError::InvalidConfig("interaction matrix needs at least two variables".into()));
    }
    let rows: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|m| {
            let residual = match main_effect_residual(vc, x, m, opts) {
                Ok(r) => r,
                Err(LifeError::DegenerateInput(_)) => return Ok(vec![0.0; p]),
                Err(e) => return Err(e),
            };
            (0..p)
                .map(|k| {
                    if k == m {
                        return Ok(0.0);
                    }
                    match smoothed_curve(EffectKind::Interaction, vec![m, k], x.column(k), residual.view(), opts) {
                        Ok(c) => Ok(c.strength),
                        Err(LifeError::DegenerateInput(_)) => Ok(0.0),
                        Err(e) => Err(e),
                    }
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(Array2::from_shape_fn((p, p), |(m, k)| rows[m][k]))
}

/// Accumulated local effect of `x_m`: the smoothed slope at bin midpoints,
/// integrated from the minimum by the midpoint rule and centered to mean
/// zero over the observations. The curve is reported at the bin edges; with
/// `scale = Some((mean, std))` the edges are mapped back to `mean + std·x`.
pub fn ale_main_effect(
    vc: &VaryingCoefficients,
    x: ArrayView2<f64>,
    m: usize,
    bins: usize,
    scale: Option<(f64, f64)>,
    bandwidth: Bandwidth,
) -> Result<EffectCurve> {
    column(x, vc, m)?;
    if bins < 2 {
        return Err(LifeError::InvalidConfig(format!("ALE needs at least 2 bins, got {bins}")));
    }
    let xm = x.column(m);
    let (lo, hi) = range_of(xm)?;
    let width = (hi - lo) / bins as f64;
    let mids = Array1::from_shape_fn(bins, |b| lo + (b as f64 + 0.5) * width);
    let slopes = kernel_smooth(xm, vc.alpha.column(m), mids.view(), bandwidth)?;
    let mut values = Array1::zeros(bins + 1);
    for b in 0..bins {
        values[b + 1] = values[b] + slopes[b] * width;
    }
    let at = |t: f64| {
        let pos = ((t - lo) / width).clamp(0.0, bins as f64);
        let i = (pos.floor() as usize).min(bins - 1);
        values[i] + (pos - i as f64) * (values[i + 1] - values[i])
    };
    let center = xm.iter().map(|&t| at(t)).sum::<f64>() / xm.len() as f64;
    values -= center;
    let weights = density_weights(xm, linspace(lo, hi, bins + 1).view(), bins)?;
    let strength = weighted_std(values.view(), weights.view())?;
    let edges = linspace(lo, hi, bins + 1);
    let grid = match scale {
        Some((mean, sd)) => edges.mapv(|e| mean + sd * e),
        None => edges,
    };
    Ok(EffectCurve {
        kind: EffectKind::Ale,
        variables: vec![m],
        grid,
        values,
        strength,
    })
}
