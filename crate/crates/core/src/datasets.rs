//! Simulation generators, CSV ingestion and train/test preprocessing.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LifeError, Result};
use crate::linalg::sigmoid;
use crate::nn::Task;
use crate::seed::rng_from;

pub use crate::metrics::{auc, log_loss, mse, r2, rmse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimForm {
    Gam,
    Aim,
    Mim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorDist {
    Normal,
    Laplace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSpec {
    pub form: SimForm,
    pub task: Task,
    pub n: usize,
    pub predictor_dist: PredictorDist,
    pub seed: u64,
}

pub const SIM_PREDICTORS: usize = 6;

/// Noise-free regression surface.
pub fn regression_surface(form: SimForm, x: ArrayView1<f64>) -> f64 {
    let (x1, x2, x3, x4, x5, x6) = (x[0], x[1], x[2], x[3], x[4], x[5]);
    match form {
        SimForm::Gam => {
            1.5 * x1 + 5f64.sqrt() * x2.abs().sqrt() + 2.0 * x3.abs() + 4.0 * (-1.5f64 / 7.0).exp() * x4.exp()
                + 4.0 * 1.5f64.ln() * x5.abs().ln()
                - 4.0 * x6.max(1.0)
        }
        SimForm::Aim => {
            2.0 * (3.0 * x1 - 2.5 * x2 + 2.0 * x3 - 1.5 * x4).abs().ln()
                + ((2.0 * x3 - 1.5 * x4 + 1.5 * x5 - x6) / 9.0).exp()
                + (1.5 * x5 - x6).max(0.0)
        }
        SimForm::Mim => {
            (0.03 * x1 - 0.025 * x2).exp() * x3 + (-3.0 * x4) / (1.0 + 1.5 * x5.abs()) + (-2.0 * x6).max(2.0)
        }
    }
}

/// Noise-free logit of the classification simulations.
pub fn classification_logit(form: SimForm, x: ArrayView1<f64>) -> f64 {
    let (x1, x2, x3, x4, x5, x6) = (x[0], x[1], x[2], x[3], x[4], x[5]);
    match form {
        SimForm::Gam => {
            1.5 * x1 + 4.0 * (-2.5 * x2).abs().sqrt() + 2.0 * x3.abs() + 4.0 * (-3.0 / 14.0 * x4).exp()
                + 4.0 * (1.5 * x5.abs()).ln()
                - 4.0 * x6.max(1.0)
        }
        SimForm::Aim => {
            (3.0 * x1 - 2.5 * x2 + 2.0 * x3 - 1.5 * x4).abs().ln() + ((-1.5 * x4 + 1.5 * x5 - x6) / 11.0).exp()
        }
        SimForm::Mim => {
            (0.03 * x1 - 0.025 * x2).exp() * x3 - 3.0 * x4 / (1.0 + 1.5 * x5.abs()) + 2.0 * x6.max(1.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Dummy,
}

/// Per-column affine standardization. Dummy columns pass through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    pub fn identity(p: usize) -> Self {
        Scaler {
            means: vec![0.0; p],
            stds: vec![1.0; p],
        }
    }

    /// Fits means and population standard deviations of the continuous columns.
    pub fn fit(x: ArrayView2<f64>, kinds: &[ColumnKind], names: &[String]) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(LifeError::DegenerateInput("no rows to standardize".into()));
        }
        let mut scaler = Scaler::identity(x.ncols());
        for (j, col) in x.axis_iter(Axis(1)).enumerate() {
            if kinds.get(j).copied().unwrap_or(ColumnKind::Continuous) == ColumnKind::Dummy {
                continue;
            }
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            if !(var > 0.0) || !var.is_finite() {
                let name = names.get(j).cloned().unwrap_or_else(|| format!("x{}", j + 1));
                return Err(LifeError::DegenerateColumn(name));
            }
            scaler.means[j] = mean;
            scaler.stds[j] = var.sqrt();
        }
        Ok(scaler)
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(x)?;
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.means[j], self.stds[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(z)?;
        let mut out = z.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.means[j], self.stds[j]);
            col.mapv_inplace(|v| v * s + m);
        }
        Ok(out)
    }

    fn check(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.means.len() {
            return Err(LifeError::DimensionMismatch {
                what: "scaler columns",
                expected: self.means.len(),
                found: x.ncols(),
            });
        }
        Ok(())
    }
}

/// Tabular data in its original units together with the scaler fitted on it
/// (or on the training split it was derived from).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub names: Vec<String>,
    pub kinds: Vec<ColumnKind>,
    pub target: String,
    pub scaler: Scaler,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>, names: Vec<String>, kinds: Vec<ColumnKind>, target: String) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(LifeError::DimensionMismatch {
                what: "target length",
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if names.len() != x.ncols() || kinds.len() != x.ncols() {
            return Err(LifeError::DimensionMismatch {
                what: "column metadata",
                expected: x.ncols(),
                found: names.len().min(kinds.len()),
            });
        }
        let scaler = Scaler::fit(x.view(), &kinds, &names)?;
        Ok(Dataset {
            x,
            y,
            names,
            kinds,
            target,
            scaler,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn standardized(&self) -> Array2<f64> {
        self.scaler.transform(self.x.view()).expect("scaler width matches dataset")
    }

    /// Rows `idx`, keeping the current scaler.
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), idx),
            y: self.y.select(Axis(0), idx),
            names: self.names.clone(),
            kinds: self.kinds.clone(),
            target: self.target.clone(),
            scaler: self.scaler.clone(),
        }
    }

    pub fn write_csv(&self, path: &Path, extra: Option<(&str, ArrayView1<f64>)>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = self.names.clone();
        header.push(self.target.clone());
        if let Some((name, _)) = extra {
            header.push(name.to_string());
        }
        w.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut row: Vec<String> = self.x.row(i).iter().map(|v| v.to_string()).collect();
            row.push(self.y[i].to_string());
            if let Some((_, col)) = extra {
                row.push(col[i].to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A simulated dataset and its noise-free (regression) or linked (classification) signal.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub spec: SimSpec,
    pub data: Dataset,
    pub signal: Array1<f64>,
}

fn draw_predictor(dist: PredictorDist, rng: &mut impl Rng) -> f64 {
    match dist {
        PredictorDist::Normal => rng.sample(StandardNormal),
        PredictorDist::Laplace => {
            // Inverse CDF of the unit-scale Laplace distribution.
            let u: f64 = rng.random::<f64>() - 0.5;
            -u.signum() * (1.0 - 2.0 * u.abs()).ln()
        }
    }
}

/// Draws one of the six-predictor simulations.
///
/// Regression adds standard-normal noise to the surface. Classification adds
/// standard-normal noise inside the logit and samples labels from the
/// resulting probability; the returned signal is that logit.
pub fn generate(spec: &SimSpec) -> Result<Simulation> {
    if spec.n == 0 {
        return Err(LifeError::InvalidConfig("simulation needs n >= 1".into()));
    }
    let mut rng = rng_from(spec.seed);
    let x = Array2::from_shape_fn((spec.n, SIM_PREDICTORS), |_| draw_predictor(spec.predictor_dist, &mut rng));
    let mut y = Array1::zeros(spec.n);
    let mut signal = Array1::zeros(spec.n);
    for (i, row) in x.outer_iter().enumerate() {
        let eps: f64 = rng.sample(StandardNormal);
        match spec.task {
            Task::Regression => {
                signal[i] = regression_surface(spec.form, row);
                y[i] = signal[i] + eps;
            }
            Task::Classification => {
                signal[i] = classification_logit(spec.form, row) + eps;
                y[i] = if rng.random::<f64>() < sigmoid(signal[i]) { 1.0 } else { 0.0 };
            }
        }
    }
    let names = (1..=SIM_PREDICTORS).map(|j| format!("x{j}")).collect();
    let data = Dataset::new(x, y, names, vec![ColumnKind::Continuous; SIM_PREDICTORS], "y".into())?;
    Ok(Simulation {
        spec: spec.clone(),
        data,
        signal,
    })
}

/// Reads a CSV with a header row. Columns listed in `categorical`, and any
/// column holding a non-numeric value, are one-hot encoded with the first
/// level (in sorted order) dropped.
pub fn load_csv(path: &Path, target: &str, categorical: &[String]) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| LifeError::MissingTarget(target.to_string()))?;
    let mut cells: Vec<Vec<String>> = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(LifeError::Parse {
                row: r + 1,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        cells.push(rec.iter().map(str::to_string).collect());
    }
    if cells.is_empty() {
        return Err(LifeError::DegenerateInput(format!("{} has no data rows", path.display())));
    }
    let parse = |r: usize, c: usize| -> Result<f64> {
        let raw = &cells[r][c];
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| LifeError::Parse {
                row: r + 1,
                column: headers[c].clone(),
                message: format!("`{raw}` is not a finite number"),
            })
    };
    let y = (0..cells.len()).map(|r| parse(r, target_idx)).collect::<Result<Array1<f64>>>()?;

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut names = Vec::new();
    let mut kinds = Vec::new();
    for c in (0..headers.len()).filter(|&c| c != target_idx) {
        let numeric = cells.iter().all(|row| row[c].parse::<f64>().is_ok());
        let is_cat = categorical.iter().any(|n| n == &headers[c]) || (!numeric && cells.iter().all(|row| !row[c].is_empty()));
        if is_cat {
            let levels: BTreeSet<&str> = cells.iter().map(|row| row[c].as_str()).collect();
            if levels.len() < 2 {
                return Err(LifeError::DegenerateColumn(headers[c].clone()));
            }
            for level in levels.iter().skip(1) {
                columns.push(cells.iter().map(|row| (row[c] == *level) as u8 as f64).collect());
                names.push(format!("{}={}", headers[c], level));
                kinds.push(ColumnKind::Dummy);
            }
        } else {
            columns.push((0..cells.len()).map(|r| parse(r, c)).collect::<Result<_>>()?);
            names.push(headers[c].clone());
            kinds.push(ColumnKind::Continuous);
        }
    }
    let n = cells.len();
    let x = Array2::from_shape_fn((n, columns.len()), |(i, j)| columns[j][i]);
    Dataset::new(x, y, names, kinds, target.to_string())
}

/// Seeded shuffle into `round(fraction · N)` training rows and the rest.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(LifeError::InvalidConfig(format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from(seed));
    let n_train = (fraction * n as f64).round() as usize;
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

/// Train/test split; the scaler is refitted on the training rows and shared by both parts.
pub fn split(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (tr, te) = split_indices(data.n_rows(), fraction, seed)?;
    let mut train = data.select_rows(&tr);
    train.scaler = Scaler::fit(train.x.view(), &train.kinds, &train.names)?;
    let mut test = data.select_rows(&te);
    test.scaler = train.scaler.clone();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::io::Write;

    // Independent transcription of the generating formulas with explicit coefficient sets.
    fn oracle(form: SimForm, task: Task, x: &[f64]) -> f64 {
        match (form, task) {
            (SimForm::Gam, Task::Regression) => {
                let beta = [1.5, 5f64.sqrt(), 2.0, 4.0 * (-1.5f64 / 7.0).exp(), 4.0 * 1.5f64.ln(), -4.0];
                let terms = [
                    x[0],
                    x[1].abs().sqrt(),
                    x[2].abs(),
                    x[3].exp(),
                    x[4].abs().ln(),
                    if x[5] > 1.0 { x[5] } else { 1.0 },
                ];
                beta.iter().zip(terms).map(|(b, t)| b * t).sum()
            }
            (SimForm::Aim, Task::Regression) => {
                let beta = [3.0, -2.5, 2.0, -1.5, 1.5, -1.0];
                let lin_a: f64 = (0..4).map(|j| beta[j] * x[j]).sum();
                let lin_b: f64 = (2..6).map(|j| beta[j] * x[j]).sum();
                let lin_c: f64 = (4..6).map(|j| beta[j] * x[j]).sum();
                2.0 * lin_a.abs().ln() + (lin_b / 9.0).exp() + if lin_c > 0.0 { lin_c } else { 0.0 }
            }
            (SimForm::Mim, Task::Regression) => {
                let beta = [0.03, -0.025, 1.0, -3.0, 1.5, -2.0];
                let last = beta[5] * x[5];
                (beta[0] * x[0] + beta[1] * x[1]).exp() * beta[2] * x[2]
                    + beta[3] * x[3] / (1.0 + beta[4] * x[4].abs())
                    + if last > 2.0 { last } else { 2.0 }
            }
            (SimForm::Gam, Task::Classification) => {
                1.5 * x[0] + 4.0 * (2.5 * x[1].abs()).sqrt() + 2.0 * x[2].abs() + 4.0 * (-3.0 * x[3] / 14.0).exp()
                    + 4.0 * (1.5f64.ln() + x[4].abs().ln())
                    - 4.0 * if x[5] > 1.0 { x[5] } else { 1.0 }
            }
            (SimForm::Aim, Task::Classification) => {
                (3.0 * x[0] - 2.5 * x[1] + 2.0 * x[2] - 1.5 * x[3]).abs().ln()
                    + ((-1.5 * x[3] + 1.5 * x[4] - x[5]) / 11.0).exp()
            }
            (SimForm::Mim, Task::Classification) => {
                (0.03 * x[0] - 0.025 * x[1]).exp() * x[2] - 3.0 * x[3] / (1.0 + 1.5 * x[4].abs())
                    + 2.0 * if x[5] > 1.0 { x[5] } else { 1.0 }
            }
        }
    }

    #[test]
    fn generators_match_independent_transcription() {
        let mut rng = rng_from(99);
        for form in [SimForm::Gam, SimForm::Aim, SimForm::Mim] {
            for _ in 0..100 {
                let x: Vec<f64> = (0..6).map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0).collect();
                let row = Array1::from(x.clone());
                let a = regression_surface(form, row.view());
                let b = oracle(form, Task::Regression, &x);
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{form:?}: {a} vs {b}");
                let a = classification_logit(form, row.view());
                let b = oracle(form, Task::Classification, &x);
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{form:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn mim_at_origin_is_two() {
        assert_eq!(regression_surface(SimForm::Mim, Array1::zeros(6).view()), 2.0);
    }

    #[test]
    fn gam_noise_has_unit_rmse() {
        let sim = generate(&SimSpec {
            form: SimForm::Gam,
            task: Task::Regression,
            n: 20_000,
            predictor_dist: PredictorDist::Normal,
            seed: 1,
        })
        .unwrap();
        let e = rmse(sim.data.y.view(), sim.signal.view()).unwrap();
        assert!((e - 1.0).abs() < 0.02, "{e}");
    }

    #[test]
    fn generation_is_seeded() {
        let spec = SimSpec {
            form: SimForm::Aim,
            task: Task::Classification,
            n: 500,
            predictor_dist: PredictorDist::Laplace,
            seed: 3,
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.signal, b.signal);
    }

    #[test]
    fn laplace_draws_have_variance_two() {
        let sim = generate(&SimSpec {
            form: SimForm::Mim,
            task: Task::Regression,
            n: 50_000,
            predictor_dist: PredictorDist::Laplace,
            seed: 5,
        })
        .unwrap();
        let col = sim.data.x.column(0);
        let var = col.mapv(|v| v * v).mean().unwrap();
        assert!((var - 2.0).abs() < 0.06, "{var}");
    }

    #[test]
    fn label_frequency_matches_link() {
        for form in [SimForm::Gam, SimForm::Aim, SimForm::Mim] {
            let sim = generate(&SimSpec {
                form,
                task: Task::Classification,
                n: 20_000,
                predictor_dist: PredictorDist::Normal,
                seed: 8,
            })
            .unwrap();
            let p = sim.signal.mapv(sigmoid);
            let expected = p.mean().unwrap();
            let se = (p.mapv(|q| q * (1.0 - q)).sum()).sqrt() / p.len() as f64;
            let observed = sim.data.y.mean().unwrap();
            assert!((observed - expected).abs() < 3.0 * se, "{form:?}: {observed} vs {expected}");
        }
    }

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn categorical_column_gets_dummies() {
        let f = write_temp("a,color,y\n1.0,red,1\n2.0,green,0\n3.0,blue,1\n4.0,red,0\n");
        let d = load_csv(f.path(), "y", &[]).unwrap();
        assert_eq!(d.names, vec!["a", "color=green", "color=red"]);
        assert_eq!(d.kinds, vec![ColumnKind::Continuous, ColumnKind::Dummy, ColumnKind::Dummy]);
        assert_eq!(d.x.column(2).to_vec(), vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn csv_errors() {
        let f = write_temp("a,b,y\n1,2,3\n4,oops,6\n7,8,x\n");
        match load_csv(f.path(), "y", &[]) {
            Err(LifeError::Parse { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "y");
            }
            other => panic!("{other:?}"),
        }
        let f = write_temp("a,b\n1,2\n");
        assert!(matches!(load_csv(f.path(), "y", &[]), Err(LifeError::MissingTarget(_))));
        let f = write_temp("a,k,y\n1,5,1\n2,5,2\n3,5,3\n");
        match load_csv(f.path(), "y", &[]) {
            Err(LifeError::DegenerateColumn(name)) => assert_eq!(name, "k"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn standardize_round_trip() {
        let x = array![[1.0, 10.0], [2.0, 30.0], [4.0, 20.0]];
        let d = Dataset::new(x.clone(), array![0.0, 1.0, 2.0], vec!["a".into(), "b".into()], vec![ColumnKind::Continuous; 2], "y".into()).unwrap();
        let z = d.standardized();
        for col in z.axis_iter(Axis(1)) {
            let m = col.mean().unwrap();
            let s = (col.mapv(|v| (v - m).powi(2)).mean().unwrap()).sqrt();
            assert!(m.abs() < 1e-10 && (s - 1.0).abs() < 1e-10);
        }
        let back = d.scaler.inverse_transform(z.view()).unwrap();
        assert!((&back - &x).iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn split_sizes_determinism_and_train_scaler() {
        let sim = generate(&SimSpec {
            form: SimForm::Gam,
            task: Task::Regression,
            n: 100,
            predictor_dist: PredictorDist::Normal,
            seed: 2,
        })
        .unwrap();
        let (tr, te) = split(&sim.data, 0.8, 4).unwrap();
        assert_eq!((tr.n_rows(), te.n_rows()), (80, 20));
        let (tr2, te2) = split(&sim.data, 0.8, 4).unwrap();
        assert_eq!(tr, tr2);
        assert_eq!(te, te2);
        assert_eq!(tr.scaler, te.scaler);
        let zt = tr.standardized();
        assert!(zt.column(0).mean().unwrap().abs() < 1e-10);
        assert!(te.standardized().column(0).mean().unwrap().abs() > 1e-6);
        assert!(split(&sim.data, 1.0, 0).is_err());
    }
}
