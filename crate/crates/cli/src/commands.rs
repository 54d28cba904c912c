use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use life_core::datasets::{self, load_csv, split, Dataset, PredictorDist, Scaler, SimForm, SimSpec};
use life_core::diagnostics::{
    accuracy_diversity_sweep, ce_decomposition_logodds, ce_decomposition_probability, mse_decomposition, stacking_fit,
    StackingMode, SweepWeights,
};
use life_core::interpret::{
    ale_main_effect, extract_local_regions, interaction_matrix, main_effect_curve, neuron_importance,
    variable_contribution, varying_coefficients, EffectOptions,
};
use life_core::linalg::Bandwidth;
use life_core::metrics;
use life_core::nn::{Task, TrainConfig};
use life_core::pipeline::{fit_dataset, Aggregation, LifeConfig, LifeModel};
use life_core::pruning::{base_learner_selection, SelectionOptions};
use life_core::sampling::{SamplingConfig, Scheme};
use life_core::seed::derive_seed;
use life_core::LifeError;
use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::*;
use crate::output::{ensure_dir, write_json, write_rows, write_table, MetricRow, RunConfig};
use crate::UsageError;

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn resolve_seed(seed: u64) -> anyhow::Result<u64> {
    match std::env::var("LIFE_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| usage(format!("LIFE_SEED must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(seed),
    }
}

fn data_path(d: &DataArgs) -> anyhow::Result<&PathBuf> {
    let path = d.data.as_ref().ok_or_else(|| usage("--data is required"))?;
    if !path.is_file() {
        return Err(usage(format!("data file not found: {}", path.display())));
    }
    Ok(path)
}

fn load_data(d: &DataArgs) -> anyhow::Result<Dataset> {
    let path = data_path(d)?;
    load_csv(path, &d.target, &d.categorical).with_context(|| format!("loading {}", path.display()))
}

fn dataset_name(d: &DataArgs) -> String {
    d.data
        .as_deref()
        .and_then(Path::file_stem)
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn load_model(path: &Path) -> anyhow::Result<LifeModel> {
    if !path.is_file() {
        return Err(usage(format!("model file not found: {}", path.display())));
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    LifeModel::from_json(&text).with_context(|| format!("loading model {}", path.display()))
}

fn load_model_and_data(io: &ModelDataArgs) -> anyhow::Result<(LifeModel, Dataset)> {
    let model = load_model(&io.model)?;
    let data = load_data(&io.data)?;
    if data.x.ncols() != model.n_inputs() {
        anyhow::bail!(
            "model expects {} input columns but {} has {}",
            model.n_inputs(),
            dataset_name(&io.data),
            data.x.ncols()
        );
    }
    Ok((model, data))
}

fn task_of(arg: Option<TaskArg>, y: ArrayView1<f64>) -> Task {
    match arg {
        Some(TaskArg::Regression) => Task::Regression,
        Some(TaskArg::Classification) => Task::Classification,
        None if y.iter().all(|&v| v == 0.0 || v == 1.0) => Task::Classification,
        None => Task::Regression,
    }
}

fn life_config(a: &LifeArgs, task: Task, seed: u64) -> anyhow::Result<LifeConfig> {
    let k = a.hidden.first().copied().unwrap_or(1);
    let mut cfg = LifeConfig::new(task, a.hidden.clone());
    if let OptimizerArg::Adam = a.optimizer {
        cfg.base_trainer = TrainConfig::adam(task, k);
    }
    if let Some(it) = a.iterations {
        cfg.base_trainer.iterations = it;
    }
    if let Some(lr) = a.learning_rate {
        cfg.base_trainer.learning_rate = lr;
    }
    cfg.sampling = SamplingConfig {
        scheme: match a.sampling {
            SamplingArg::Nn => Scheme::NnProjection,
            SamplingArg::Random => Scheme::RandomProjection,
            SamplingArg::Bootstrap => Scheme::Bootstrap,
        },
        cp: a.cp,
        lower: a.lower,
        upper: a.upper,
        seed: 0,
    };
    cfg.aggregation = match a.aggregation {
        AggregationArg::Cv => Aggregation::CrossValidated { folds: a.folds },
        AggregationArg::None => Aggregation::Unpenalized,
        AggregationArg::Enet => Aggregation::ElasticNet { l1: a.l1, l2: a.l2 },
    };
    cfg.standardize = !a.no_standardize;
    cfg.seed = seed;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

/// Named scores of `pred` against `y`; metrics undefined on this data are skipped.
fn scores(task: Task, y: ArrayView1<f64>, pred: ArrayView1<f64>) -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    match task {
        Task::Regression => {
            out.extend(metrics::rmse(y, pred).ok().map(|v| ("rmse", v)));
            out.extend(metrics::r2(y, pred).ok().map(|v| ("r2", v)));
        }
        Task::Classification => {
            out.extend(metrics::log_loss(y, pred).ok().map(|v| ("log_loss", v)));
            out.extend(metrics::auc(y, pred).ok().map(|v| ("auc", v)));
            let hits = y.iter().zip(pred).filter(|(&t, &p)| (p >= 0.5) == (t >= 0.5)).count();
            out.push(("accuracy", hits as f64 / y.len().max(1) as f64));
        }
    }
    out
}

fn loss(task: Task, y: ArrayView1<f64>, pred: ArrayView1<f64>) -> life_core::Result<f64> {
    match task {
        Task::Regression => metrics::mse(y, pred),
        Task::Classification => metrics::log_loss(y, pred),
    }
}

pub fn gen_data(a: GenDataArgs) -> anyhow::Result<()> {
    let spec = SimSpec {
        form: match a.form {
            FormArg::Gam => SimForm::Gam,
            FormArg::Aim => SimForm::Aim,
            FormArg::Mim => SimForm::Mim,
        },
        task: task_of(Some(a.task), ArrayView1::from(&[])),
        n: a.n,
        predictor_dist: match a.dist {
            DistArg::Normal => PredictorDist::Normal,
            DistArg::Laplace => PredictorDist::Laplace,
        },
        seed: resolve_seed(a.seed)?,
    };
    if spec.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let sim = datasets::generate(&spec)?;
    ensure_dir(&a.out)?;
    sim.data.write_csv(&a.out.join("data.csv"), None)?;
    write_json(&a.out.join("data.json"), &spec)?;
    write_json(
        &a.out.join("config.json"),
        &RunConfig {
            command: "gen-data",
            version: VERSION,
            seed: spec.seed,
            args: &a,
            resolved: &spec,
        },
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GridRow {
    cp: f64,
    width_scale: f64,
    hidden: String,
    cv_loss: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrainResolved {
    life: LifeConfig,
    grid: Option<Vec<GridRow>>,
}

/// Row `i` goes to fold `rank(i) mod k` under a seeded shuffle.
fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| derive_seed(seed, &[i as u64]));
    let mut fold = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        fold[i] = rank % k;
    }
    fold
}

fn cv_loss(data: &Dataset, cfg: &LifeConfig, folds: &[usize], k: usize) -> f64 {
    let mut total = 0.0;
    for f in 0..k {
        let (tr, va): (Vec<usize>, Vec<usize>) = (0..data.n_rows()).partition(|&i| folds[i] != f);
        let result = (|| -> life_core::Result<f64> {
            let mut train = data.select_rows(&tr);
            train.scaler = Scaler::fit(train.x.view(), &train.kinds, &train.names)?;
            let valid = data.select_rows(&va);
            let model = fit_dataset(&train, cfg)?;
            let pred = model.predict(valid.x.view())?;
            loss(cfg.task(), valid.y.view(), pred.view())
        })();
        match result {
            Ok(l) => total += l * va.len() as f64,
            Err(e) => {
                log::warn!("grid cell cp = {}, hidden = {:?} failed: {e}", cfg.sampling.cp, cfg.hidden_per_iteration);
                return f64::INFINITY;
            }
        }
    }
    total / data.n_rows() as f64
}

fn grid_search(data: &Dataset, base: &LifeConfig) -> anyhow::Result<(LifeConfig, Vec<GridRow>)> {
    const FOLDS: usize = 5;
    let folds = fold_assignment(data.n_rows(), FOLDS, derive_seed(base.seed, &[u64::MAX - 1]));
    let cells: Vec<(f64, f64)> = [-0.5, 0.0, 0.5]
        .iter()
        .flat_map(|&cp| [0.5, 1.0].map(move |s| (cp, s)))
        .collect();
    let rows: Vec<(LifeConfig, GridRow)> = cells
        .par_iter()
        .map(|&(cp, scale)| {
            let mut cfg = base.clone();
            cfg.sampling.cp = cp;
            cfg.hidden_per_iteration = base
                .hidden_per_iteration
                .iter()
                .map(|&k| ((k as f64 * scale).ceil() as usize).max(1))
                .collect();
            let l = cv_loss(data, &cfg, &folds, FOLDS);
            let hidden = cfg.hidden_per_iteration.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
            (
                cfg,
                GridRow {
                    cp,
                    width_scale: scale,
                    hidden,
                    cv_loss: l,
                },
            )
        })
        .collect();
    let best = rows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.cv_loss.total_cmp(&b.1 .1.cv_loss).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("grid is non-empty");
    if !rows[best].1.cv_loss.is_finite() {
        anyhow::bail!("every grid cell failed to fit");
    }
    let chosen = rows[best].0.clone();
    Ok((chosen, rows.into_iter().map(|r| r.1).collect()))
}

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    candidates: usize,
    kept: usize,
    trained: usize,
    failed: usize,
    neurons: usize,
    coverage: f64,
    mean_ratio: f64,
    seconds: f64,
}

#[derive(Serialize)]
struct SubsetRow {
    iteration: usize,
    candidate: usize,
    ratio: f64,
    kept: bool,
}

fn write_trace(dir: &Path, model: &LifeModel) -> anyhow::Result<()> {
    write_rows(
        &dir.join("trace.csv"),
        model.trace.iter().map(|t| TraceRow {
            iteration: t.iteration,
            candidates: t.candidates,
            kept: t.kept,
            trained: t.trained,
            failed: t.failed,
            neurons: t.neurons,
            coverage: t.coverage,
            mean_ratio: t.subset_ratios.iter().sum::<f64>() / t.subset_ratios.len().max(1) as f64,
            seconds: t.seconds,
        }),
    )?;
    write_rows(
        &dir.join("subsets.csv"),
        model.trace.iter().flat_map(|t| {
            t.subset_ratios.iter().zip(&t.kept_mask).enumerate().map(|(candidate, (&ratio, &kept))| SubsetRow {
                iteration: t.iteration,
                candidate,
                ratio,
                kept,
            })
        }),
    )
}

pub fn train(mut a: TrainArgs) -> anyhow::Result<()> {
    let mut preset: Option<TrainResolved> = None;
    if let Some(path) = a.config.clone() {
        let text = std::fs::read_to_string(&path).map_err(|e| usage(format!("reading config {}: {e}", path.display())))?;
        let doc: serde_json::Value = serde_json::from_str(&text)?;
        if doc["command"] != "train" {
            return Err(usage(format!("{} was not written by `train`", path.display())));
        }
        let out = a.out.clone();
        a = serde_json::from_value(doc["args"].clone()).context("config args")?;
        a.out = out;
        preset = Some(serde_json::from_value(doc["resolved"].clone()).context("resolved config")?);
    }
    if !(0.0..1.0).contains(&a.test_fraction) {
        return Err(usage(format!("--test-fraction must lie in [0, 1), got {}", a.test_fraction)));
    }
    let data = load_data(&a.data)?;
    let name = dataset_name(&a.data);
    let seed = resolve_seed(preset.as_ref().map_or(a.life.seed, |p| p.life.seed))?;
    let (train, test) = if a.test_fraction > 0.0 {
        let (tr, te) = split(&data, 1.0 - a.test_fraction, seed)?;
        (tr, Some(te))
    } else {
        (data, None)
    };
    let (config, grid) = match preset {
        Some(p) => {
            let mut life = p.life;
            life.seed = seed;
            (life, p.grid)
        }
        None => {
            let base = life_config(&a.life, task_of(a.life.task, train.y.view()), seed)?;
            if a.grid {
                let (cfg, rows) = grid_search(&train, &base)?;
                (cfg, Some(rows))
            } else {
                (base, None)
            }
        }
    };
    let start = Instant::now();
    let model = fit_dataset(&train, &config)?;
    let seconds = start.elapsed().as_secs_f64();

    ensure_dir(&a.out)?;
    std::fs::write(a.out.join("model.json"), model.to_json()?)?;
    let task = model.task;
    let mut rows: Vec<(String, f64)> = Vec::new();
    let pred = model.predict(train.x.view())?;
    rows.extend(scores(task, train.y.view(), pred.view()).into_iter().map(|(m, v)| (format!("train_{m}"), v)));
    if let Some(te) = &test {
        let pred = model.predict(te.x.view())?;
        rows.extend(scores(task, te.y.view(), pred.view()).into_iter().map(|(m, v)| (format!("test_{m}"), v)));
    }
    rows.push(("neurons".into(), model.n_neurons() as f64));
    rows.push(("base_learners".into(), model.base_learners.len() as f64));
    write_rows(
        &a.out.join("metrics.csv"),
        rows.iter().map(|(metric, value)| MetricRow {
            dataset: &name,
            seed,
            model: "life",
            metric,
            value: *value,
            seconds,
        }),
    )?;
    write_trace(&a.out, &model)?;
    if let Some(g) = &grid {
        write_rows(&a.out.join("grid.csv"), g.iter())?;
    }
    write_json(
        &a.out.join("config.json"),
        &RunConfig {
            command: "train",
            version: VERSION,
            seed,
            args: &a,
            resolved: TrainResolved { life: config, grid },
        },
    )
}

#[derive(Serialize)]
struct PredictionRow {
    row: usize,
    y: f64,
    prediction: f64,
}

pub fn evaluate(a: ModelDataArgs) -> anyhow::Result<()> {
    let (model, data) = load_model_and_data(&a)?;
    let start = Instant::now();
    let pred = model.predict(data.x.view())?;
    let seconds = start.elapsed().as_secs_f64();
    let name = dataset_name(&a.data);
    ensure_dir(&a.out)?;
    let seed = model.config.seed;
    write_rows(
        &a.out.join("metrics.csv"),
        scores(model.task, data.y.view(), pred.view()).into_iter().map(|(metric, value)| MetricRow {
            dataset: &name,
            seed,
            model: "life",
            metric,
            value,
            seconds,
        }),
    )?;
    write_rows(
        &a.out.join("predictions.csv"),
        pred.iter().zip(&data.y).enumerate().map(|(row, (&prediction, &y))| PredictionRow { row, y, prediction }),
    )?;
    write_json(
        &a.out.join("config.json"),
        &RunConfig {
            command: "evaluate",
            version: VERSION,
            seed,
            args: &a,
            resolved: (),
        },
    )
}

#[derive(Serialize)]
struct DecompositionRow {
    space: SpaceArg,
    weighting: WeightsArg,
    learners: usize,
    total: f64,
    accuracy: f64,
    diversity: f64,
    quadratic_deviation: f64,
}

#[derive(Serialize)]
struct LearnerLossRow {
    learner: usize,
    iteration: usize,
    id: usize,
    subset_ratio: f64,
    weight: f64,
    loss: f64,
}

pub fn decompose(a: DecomposeArgs) -> anyhow::Result<()> {
    let (model, data) = load_model_and_data(&a.io)?;
    let task = model.task;
    let space = a.space.unwrap_or(match task {
        Task::Regression => SpaceArg::Mse,
        Task::Classification => SpaceArg::Probability,
    });
    match (space, task) {
        (SpaceArg::Mse, Task::Classification) => return Err(usage("--space mse needs a regression model")),
        (SpaceArg::Probability | SpaceArg::LogOdds, Task::Regression) => {
            return Err(usage("--space probability/log-odds needs a classification model"))
        }
        _ => {}
    }
    let z = model.scaler.transform(data.x.view())?;
    let m = model.base_learners.len();
    let n = data.n_rows();
    let mut outputs = Array2::zeros((n, m));
    let mut logits = Array2::zeros((n, m));
    for (j, l) in model.base_learners.iter().enumerate() {
        outputs.column_mut(j).assign(&l.network.forward(z.view())?);
        logits.column_mut(j).assign(&l.network.linear_output(z.view())?);
    }
    let y = data.y.view();
    let simplex = stacking_fit(outputs.view(), y, task, StackingMode::Simplex)?;
    let weights = match a.weights {
        WeightsArg::Uniform => Array1::from_elem(m, 1.0 / m as f64),
        WeightsArg::Stacked => simplex.weights.clone(),
    };
    let report = match space {
        SpaceArg::Mse => mse_decomposition(y, outputs.view(), weights.view())?,
        SpaceArg::Probability => ce_decomposition_probability(y, outputs.view(), weights.view())?,
        SpaceArg::LogOdds => ce_decomposition_logodds(y, logits.view(), weights.view())?,
    };
    ensure_dir(&a.io.out)?;
    write_rows(
        &a.io.out.join("decomposition.csv"),
        [DecompositionRow {
            space,
            weighting: a.weights,
            learners: m,
            total: report.total_loss,
            accuracy: report.accuracy_term,
            diversity: report.diversity_term,
            quadratic_deviation: report.quadratic_deviation,
        }],
    )?;
    write_rows(
        &a.io.out.join("learners.csv"),
        model.base_learners.iter().enumerate().map(|(j, l)| LearnerLossRow {
            learner: j,
            iteration: l.iteration,
            id: l.id,
            subset_ratio: l.subset_ratio,
            weight: report.weights[j],
            loss: report.per_learner_losses[j],
        }),
    )?;
    let name = dataset_name(&a.io.data);
    let life_loss = loss(task, y, model.predict(data.x.view())?.view())?;
    let unconstrained = stacking_fit(outputs.view(), y, task, StackingMode::Unconstrained)?;
    let comparisons = [
        ("life", life_loss),
        ("stacking_unconstrained", unconstrained.loss(outputs.view(), y)?),
        ("stacking_simplex", simplex.loss(outputs.view(), y)?),
    ];
    let metric = match task {
        Task::Regression => "mse",
        Task::Classification => "log_loss",
    };
    let seed = model.config.seed;
    write_rows(
        &a.io.out.join("metrics.csv"),
        comparisons.iter().map(|&(model, value)| MetricRow {
            dataset: &name,
            seed,
            model,
            metric,
            value,
            seconds: 0.0,
        }),
    )?;
    write_json(
        &a.io.out.join("config.json"),
        &RunConfig {
            command: "decompose",
            version: VERSION,
            seed,
            args: &a,
            resolved: space,
        },
    )
}

pub fn sweep(a: SweepArgs) -> anyhow::Result<()> {
    if a.cps.is_empty() {
        return Err(usage("--cps needs at least one value"));
    }
    let data = load_data(&a.data)?;
    let seed = resolve_seed(a.life.seed)?;
    let config = life_config(&a.life, task_of(a.life.task, data.y.view()), seed)?;
    if config.hidden_per_iteration.len() < 2 {
        return Err(usage("sweep needs at least two entries in --hidden"));
    }
    let z = if config.standardize { data.standardized() } else { data.x.clone() };
    let weighting = match a.weights {
        WeightsArg::Uniform => SweepWeights::Uniform,
        WeightsArg::Stacked => SweepWeights::Stacked,
    };
    let rows = accuracy_diversity_sweep(z.view(), data.y.view(), &config, &a.cps, weighting)?;
    ensure_dir(&a.out)?;
    write_rows(&a.out.join("sweep.csv"), rows.iter())?;
    write_json(
        &a.out.join("config.json"),
        &RunConfig {
            command: "sweep",
            version: VERSION,
            seed,
            args: &a,
            resolved: &config,
        },
    )
}

#[derive(Serialize)]
struct SelectionRow {
    learner: usize,
    iteration: usize,
    id: usize,
    r_squared: Option<f64>,
    degenerate: bool,
    removal_rank: Option<usize>,
    removal_r_squared: Option<f64>,
    retained: bool,
}

pub fn prune(a: PruneArgs) -> anyhow::Result<()> {
    let (model, data) = load_model_and_data(&a.io)?;
    let options = SelectionOptions {
        tau: a.tau,
        recompute: !a.one_shot,
    };
    let (report, pruned) = match base_learner_selection(&model, data.x.view(), data.y.view(), options) {
        Err(e @ LifeError::InvalidConfig(_)) => return Err(usage(e.to_string())),
        other => other?,
    };
    ensure_dir(&a.io.out)?;
    std::fs::write(a.io.out.join("model.json"), pruned.to_json()?)?;
    write_rows(
        &a.io.out.join("learners.csv"),
        model.base_learners.iter().enumerate().map(|(j, l)| {
            let rank = report.removal_order.iter().position(|&r| r == j);
            SelectionRow {
                learner: j,
                iteration: l.iteration,
                id: l.id,
                r_squared: report.r_squared[j],
                degenerate: report.degenerate.contains(&j),
                removal_rank: rank,
                removal_r_squared: rank.map(|r| report.removal_r_squared[r]),
                retained: report.retained.contains(&j),
            }
        }),
    )?;
    write_rows(&a.io.out.join("curve.csv"), report.curve.iter())?;
    let name = dataset_name(&a.io.data);
    let seed = model.config.seed;
    let mut rows = Vec::new();
    for (label, m) in [("life", &model), ("life_pruned", &pruned)] {
        let pred = m.predict(data.x.view())?;
        for (metric, value) in scores(m.task, data.y.view(), pred.view()) {
            rows.push(MetricRow {
                dataset: &name,
                seed,
                model: label,
                metric,
                value,
                seconds: 0.0,
            });
        }
    }
    write_rows(&a.io.out.join("metrics.csv"), rows)?;
    write_json(
        &a.io.out.join("config.json"),
        &RunConfig {
            command: "prune",
            version: VERSION,
            seed,
            args: &a,
            resolved: options,
        },
    )
}

#[derive(Serialize)]
struct CurveRow<'a> {
    variable: &'a str,
    grid: f64,
    value: f64,
    strength: f64,
}

#[derive(Serialize)]
struct InteractionRow<'a> {
    variable: &'a str,
    by: &'a str,
    strength: f64,
}

#[derive(Serialize)]
struct AleRow<'a> {
    variable: &'a str,
    grid: f64,
    value: f64,
}

fn fmt(v: f64) -> String {
    v.to_string()
}

pub fn interpret(a: InterpretArgs) -> anyhow::Result<()> {
    let (model, data) = load_model_and_data(&a.io)?;
    let names = &data.names;
    let out = &a.io.out;
    ensure_dir(out)?;

    let net_z = model.standardized_network();
    let z = model.scaler.transform(data.x.view())?;
    let importance = neuron_importance(&net_z, z.view())?;
    let contribution = variable_contribution(&net_z, z.view())?;
    let mut header = vec!["neuron".to_string(), "importance".to_string()];
    header.extend(names.iter().cloned());
    write_table(
        &out.join("importance.csv"),
        &header,
        importance.iter().enumerate().map(|(k, &imp)| {
            let mut row = vec![k.to_string(), fmt(imp)];
            row.extend(contribution.row(k).iter().map(|&v| fmt(v)));
            row
        }),
    )?;

    let flat = model.flatten_to_single_nn();
    let regions = extract_local_regions(&flat, data.x.view(), a.region_tau)?;
    let mut header = vec!["pattern".to_string(), "count".to_string(), "intercept".to_string()];
    header.extend(names.iter().map(|n| format!("slope_{n}")));
    let overflow = {
        let mut row = vec!["overflow".to_string(), regions.overflow_observations.to_string(), String::new()];
        row.extend(names.iter().map(|_| String::new()));
        row
    };
    write_table(
        &out.join("regions.csv"),
        &header,
        regions
            .regions
            .iter()
            .map(|r| {
                let mut row = vec![r.pattern_key(), r.count.to_string(), fmt(r.intercept)];
                row.extend(r.slope.iter().map(|&v| fmt(v)));
                row
            })
            .chain(std::iter::once(overflow)),
    )?;

    let vc = varying_coefficients(&net_z, z.view())?;
    let opts = EffectOptions {
        grid_size: a.grid_size,
        density_bins: a.bins,
        bandwidth: Bandwidth::Silverman,
    };
    let p = names.len();
    let scale = |m: usize| (model.scaler.means[m], model.scaler.stds[m]);
    let curves: Vec<_> = (0..p)
        .into_par_iter()
        .map(|m| {
            let main = main_effect_curve(&vc, z.view(), m, &opts);
            let ale = ale_main_effect(&vc, z.view(), m, a.bins, Some(scale(m)), opts.bandwidth);
            (main, ale)
        })
        .collect();
    let mut main_rows = Vec::new();
    let mut ale_rows = Vec::new();
    for (m, (main, ale)) in curves.into_iter().enumerate() {
        match (main, ale) {
            (Ok(main), Ok(ale)) => {
                let (mean, sd) = scale(m);
                main_rows.extend(main.grid.iter().zip(&main.values).map(|(&g, &v)| CurveRow {
                    variable: &names[m],
                    grid: mean + sd * g,
                    value: v,
                    strength: main.strength,
                }));
                ale_rows.extend(ale.grid.iter().zip(&ale.values).map(|(&g, &v)| AleRow {
                    variable: &names[m],
                    grid: g,
                    value: v,
                }));
            }
            (Err(e), _) | (_, Err(e)) => log::warn!("skipping effects of `{}`: {e}", names[m]),
        }
    }
    write_rows(&out.join("main_effects.csv"), main_rows)?;
    write_rows(&out.join("ale.csv"), ale_rows)?;
    let interactions = if p >= 2 {
        interaction_matrix(&vc, z.view(), &opts)?
    } else {
        Array2::zeros((p, p))
    };
    write_rows(
        &out.join("interactions.csv"),
        (0..p).flat_map(|m| {
            let interactions = &interactions;
            (0..p).map(move |k| InteractionRow {
                variable: &names[m],
                by: &names[k],
                strength: interactions[[m, k]],
            })
        }),
    )?;
    write_json(
        &out.join("config.json"),
        &RunConfig {
            command: "interpret",
            version: VERSION,
            seed: model.config.seed,
            args: &a,
            resolved: opts,
        },
    )
}
