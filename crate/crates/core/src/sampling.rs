//! Training subsets defined by neuron projections, plus the random-projection
//! and bootstrap ablations.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LifeError, Result};
use crate::seed::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    NnProjection,
    RandomProjection,
    Bootstrap,
}

impl std::str::FromStr for Scheme {
    type Err = LifeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nn" | "nn_projection" => Ok(Scheme::NnProjection),
            "random" | "random_projection" => Ok(Scheme::RandomProjection),
            "bootstrap" => Ok(Scheme::Bootstrap),
            other => Err(LifeError::InvalidConfig(format!("unknown sampling scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub scheme: Scheme,
    pub cp: f64,
    pub lower: f64,
    pub upper: f64,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            scheme: Scheme::NnProjection,
            cp: 0.0,
            lower: 0.1,
            upper: 0.9,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lower > 0.0 && self.lower < self.upper && self.upper <= 1.0 && self.cp.is_finite();
        if ok {
            Ok(())
        } else {
            Err(LifeError::InvalidConfig(format!(
                "sampling bounds need 0 < l < u <= 1 and finite cp, got l = {}, u = {}, cp = {}",
                self.lower, self.upper, self.cp
            )))
        }
    }
}

/// Rows of the training data on the positive side of a shifted hyperplane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSpec {
    pub projection: Array1<f64>,
    pub offset: f64,
    pub cutoff: f64,
    pub indices: Vec<usize>,
    pub ratio: f64,
}

/// Selects `{i : b + xᵢᵀw > cp}`.
pub fn project_subset(w: ArrayView1<f64>, b: f64, cp: f64, x: ArrayView2<f64>) -> Result<SubsetSpec> {
    if w.len() != x.ncols() {
        return Err(LifeError::DimensionMismatch {
            what: "projection length",
            expected: x.ncols(),
            found: w.len(),
        });
    }
    let scores = x.dot(&w);
    let indices: Vec<usize> = scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| b + s > cp)
        .map(|(i, _)| i)
        .collect();
    let n = x.nrows();
    let ratio = if n == 0 { 0.0 } else { indices.len() as f64 / n as f64 };
    Ok(SubsetSpec {
        projection: w.to_owned(),
        offset: b,
        cutoff: cp,
        indices,
        ratio,
    })
}

/// Size filter: keep iff `l < s/N < u`.
pub fn filter_by_size(spec: &SubsetSpec, lower: f64, upper: f64) -> bool {
    lower < spec.ratio && spec.ratio < upper
}

/// Subsets from i.i.d. standard-normal projections and offsets.
pub fn random_projection_subsets(x: ArrayView2<f64>, count: usize, config: &SamplingConfig) -> Vec<SubsetSpec> {
    let mut rng = rng_from(config.seed);
    let p = x.ncols();
    (0..count)
        .map(|_| {
            let w: Array1<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
            let b: f64 = rng.sample(StandardNormal);
            project_subset(w.view(), b, config.cp, x).expect("projection length matches by construction")
        })
        .collect()
}

/// Resamples of size `n` drawn with replacement.
pub fn bootstrap_subsets(n: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = rng_from(seed);
    (0..count)
        .map(|_| (0..n).map(|_| rng.random_range(0..n)).collect())
        .collect()
}

/// Fraction of the `n` training rows that fall in at least one subset.
pub fn coverage<'a>(n: usize, subsets: impl IntoIterator<Item = &'a [usize]>) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut seen = vec![false; n];
    for s in subsets {
        for &i in s {
            seen[i] = true;
        }
    }
    seen.iter().filter(|&&v| v).count() as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::{any, prop_assert, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn normal_rows(n: usize, p: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, p), |_| rng.sample(StandardNormal))
    }

    #[test]
    fn sign_test() {
        let x = array![[1.0, 5.0], [-1.0, 2.0]];
        let s = project_subset(array![1.0, 0.0].view(), 0.0, 0.0, x.view()).unwrap();
        assert_eq!(s.indices, vec![0]);
        assert_eq!(s.ratio, 0.5);
    }

    #[test]
    fn cut_below_everything_selects_all() {
        let x = normal_rows(50, 3, 1);
        let s = project_subset(array![1.0, 1.0, 1.0].view(), 0.0, -1e9, x.view()).unwrap();
        assert_eq!(s.indices.len(), 50);
        assert_eq!(s.ratio, 1.0);
    }

    #[test]
    fn symmetric_split_is_about_half() {
        let x = normal_rows(1000, 2, 2);
        let s = project_subset(array![1.0, 0.0].view(), 0.0, 0.0, x.view()).unwrap();
        assert!((s.ratio - 0.5).abs() < 0.05);
    }

    #[test]
    fn projection_length_checked() {
        let x = normal_rows(5, 2, 0);
        assert!(matches!(
            project_subset(array![1.0].view(), 0.0, 0.0, x.view()),
            Err(LifeError::DimensionMismatch { .. })
        ));
    }

    fn spec_with(s: usize, n: usize) -> SubsetSpec {
        SubsetSpec {
            projection: array![1.0],
            offset: 0.0,
            cutoff: 0.0,
            indices: (0..s).collect(),
            ratio: s as f64 / n as f64,
        }
    }

    #[test]
    fn size_filter_is_strict() {
        assert!(filter_by_size(&spec_with(50, 100), 0.1, 0.9));
        assert!(!filter_by_size(&spec_with(5, 100), 0.1, 0.9));
        assert!(!filter_by_size(&spec_with(95, 100), 0.1, 0.9));
        assert!(!filter_by_size(&spec_with(10, 100), 0.1, 0.9));
        assert!(!filter_by_size(&spec_with(90, 100), 0.1, 0.9));
    }

    #[test]
    fn random_projection_is_seeded() {
        let x = normal_rows(200, 3, 3);
        let cfg = SamplingConfig {
            seed: 11,
            ..Default::default()
        };
        let a = random_projection_subsets(x.view(), 5, &cfg);
        let b = random_projection_subsets(x.view(), 5, &cfg);
        assert_eq!(a, b);
        assert!(random_projection_subsets(x.view(), 0, &cfg).is_empty());
    }

    #[test]
    fn random_projection_mean_ratio() {
        let x = normal_rows(10_000, 4, 4);
        let specs = random_projection_subsets(x.view(), 20, &SamplingConfig::default());
        let mean = specs.iter().map(|s| s.ratio).sum::<f64>() / 20.0;
        assert!((0.3..=0.7).contains(&mean), "mean ratio {mean}");
    }

    #[test]
    fn bootstrap_single_row() {
        assert_eq!(bootstrap_subsets(1, 3, 0), vec![vec![0]; 3]);
    }

    #[test]
    fn bootstrap_unique_fraction() {
        let n = 10_000;
        let sets = bootstrap_subsets(n, 100, 7);
        let mut total = 0.0;
        for s in &sets {
            assert_eq!(s.len(), n);
            let mut seen = vec![false; n];
            s.iter().for_each(|&i| seen[i] = true);
            total += seen.iter().filter(|&&v| v).count() as f64 / n as f64;
        }
        let mean = total / 100.0;
        let expected = 1.0 - (-1.0f64).exp();
        assert!((mean - expected).abs() < 0.01, "{mean}");
        assert_eq!(sets, bootstrap_subsets(n, 100, 7));
    }

    #[test]
    fn coverage_counts_union() {
        let a = [0usize, 1];
        let b = [1usize, 2];
        assert_eq!(coverage(4, [&a[..], &b[..]]), 0.75);
    }

    #[test]
    fn config_bounds_validated() {
        let bad = SamplingConfig {
            lower: 0.5,
            upper: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(SamplingConfig::default().validate().is_ok());
    }

    proptest! {
        #[test]
        fn subsets_shrink_as_cutoff_rises(
            seed in any::<u64>(),
            cp1 in -3.0f64..3.0,
            delta in 0.0f64..3.0,
            b in -1.0f64..1.0,
        ) {
            let x = normal_rows(60, 3, seed);
            let w = array![0.3, -1.1, 0.7];
            let lo = project_subset(w.view(), b, cp1, x.view()).unwrap();
            let hi = project_subset(w.view(), b, cp1 + delta, x.view()).unwrap();
            prop_assert!(hi.indices.iter().all(|i| lo.indices.binary_search(i).is_ok()));
        }
    }
}
