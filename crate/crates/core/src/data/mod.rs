//! Dataset ingestion, normalization, splits, and synthetic generators.
//!
//! Datasets are dense row-major matrices with classification labels or
//! regression targets. Min-max normalization to [0,1] is the default
//! preprocessing step so that a single perturbation radius is commensurable
//! across heterogeneous features.

mod csv;
mod idx;
mod synth;

pub use self::csv::{load_csv, CsvSchema};
pub use idx::load_idx;
pub use synth::{synth_2d, SynthKind};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Task;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] ::csv::Error),
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("row {row}: column {column:?} has non-numeric value {value:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("no data rows")]
    EmptyFile,
    #[error("inconsistent dataset shape: {0}")]
    Shape(String),
    #[error("test fraction {0} must lie strictly between 0 and 1")]
    BadSplitFraction(f64),
    #[error("split produces an empty part (train {train}, test {test})")]
    EmptySplitPart { train: usize, test: usize },
    #[error("idx format: {0}")]
    IdxFormat(String),
    #[error("images file has {images} items but labels file has {labels}")]
    LengthMismatch { images: usize, labels: usize },
    #[error("invalid argument: {0}")]
    InvalidArg(String),
}

/// Classification labels or regression targets.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Labels(Vec<usize>),
    Values(Vec<f64>),
}

/// Feature scaling mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    MinMax,
    Zscore,
}

/// Per-feature statistics frozen at normalization time, reusable on held-out
/// rows. Re-applying a spec to rows it already transformed is a no-op.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub mode: NormMode,
    /// Per-feature (min, max) for min-max, (mean, std) for z-score.
    pub stats: Vec<(f64, f64)>,
    /// Features whose observed values never vary; min-max maps them to 0.5.
    pub constant_features: Vec<usize>,
}

impl NormalizationSpec {
    fn transform_value(&self, feature: usize, v: f64) -> f64 {
        if self.constant_features.binary_search(&feature).is_ok() {
            return match self.mode {
                NormMode::MinMax => 0.5,
                NormMode::Zscore => 0.0,
            };
        }
        let (a, b) = self.stats[feature];
        match self.mode {
            NormMode::MinMax => (v - a) / (b - a),
            NormMode::Zscore => (v - a) / b,
        }
    }

    /// Applies the stored statistics to a dataset (typically held-out rows).
    /// A dataset already stamped with this spec is returned unchanged.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset, DataError> {
        if data.n_features() != self.stats.len() {
            return Err(DataError::Shape(format!(
                "normalization spec covers {} features, dataset has {}",
                self.stats.len(),
                data.n_features()
            )));
        }
        if data.normalization.as_ref() == Some(self) {
            return Ok(data.clone());
        }
        let mut out = data.clone();
        for r in 0..out.n_rows() {
            for f in 0..out.n_features {
                let idx = r * out.n_features + f;
                out.features[idx] = self.transform_value(f, out.features[idx]);
            }
        }
        out.normalization = Some(self.clone());
        Ok(out)
    }
}

/// A dense dataset: `n` rows by `d` features, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    targets: Targets,
    pub feature_names: Vec<String>,
    n_classes: usize,
    pub normalization: Option<NormalizationSpec>,
    /// Original categorical column name and the feature-index span its
    /// one-hot encoding occupies.
    pub categorical_map: Vec<(String, std::ops::Range<usize>)>,
    /// Input rows dropped during loading (empty cells).
    pub rejected_rows: usize,
}

impl Dataset {
    pub fn from_parts_classification(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self, DataError> {
        if n_features == 0 {
            return Err(DataError::Shape("zero features".into()));
        }
        if features.len() != labels.len() * n_features {
            return Err(DataError::Shape(format!(
                "{} feature values for {} rows of {} features",
                features.len(),
                labels.len(),
                n_features
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(DataError::Shape(format!(
                "label {} out of range for {} classes",
                bad, n_classes
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Shape("non-finite feature value".into()));
        }
        let feature_names = (0..n_features).map(|i| format!("f{}", i)).collect();
        Ok(Dataset {
            features,
            n_features,
            targets: Targets::Labels(labels),
            feature_names,
            n_classes,
            normalization: None,
            categorical_map: Vec::new(),
            rejected_rows: 0,
        })
    }

    pub fn from_parts_regression(
        features: Vec<f64>,
        n_features: usize,
        values: Vec<f64>,
    ) -> Result<Self, DataError> {
        if n_features == 0 {
            return Err(DataError::Shape("zero features".into()));
        }
        if features.len() != values.len() * n_features {
            return Err(DataError::Shape(format!(
                "{} feature values for {} rows of {} features",
                features.len(),
                values.len(),
                n_features
            )));
        }
        if features.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(DataError::Shape("non-finite value".into()));
        }
        let feature_names = (0..n_features).map(|i| format!("f{}", i)).collect();
        Ok(Dataset {
            features,
            n_features,
            targets: Targets::Values(values),
            feature_names,
            n_classes: 0,
            normalization: None,
            categorical_map: Vec::new(),
            rejected_rows: 0,
        })
    }

    pub fn n_rows(&self) -> usize {
        match &self.targets {
            Targets::Labels(l) => l.len(),
            Targets::Values(v) => v.len(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn task(&self) -> Task {
        match &self.targets {
            Targets::Labels(_) => Task::Classification,
            Targets::Values(_) => Task::Regression,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn label(&self, i: usize) -> usize {
        match &self.targets {
            Targets::Labels(l) => l[i],
            Targets::Values(_) => panic!("label() called on regression data"),
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        match &self.targets {
            Targets::Values(v) => v[i],
            Targets::Labels(_) => panic!("value() called on classification data"),
        }
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    fn take_rows(&self, rows: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(rows.len() * self.n_features);
        for &r in rows {
            features.extend_from_slice(self.row(r));
        }
        let targets = match &self.targets {
            Targets::Labels(l) => Targets::Labels(rows.iter().map(|&r| l[r]).collect()),
            Targets::Values(v) => Targets::Values(rows.iter().map(|&r| v[r]).collect()),
        };
        Dataset {
            features,
            n_features: self.n_features,
            targets,
            feature_names: self.feature_names.clone(),
            n_classes: self.n_classes,
            normalization: self.normalization.clone(),
            categorical_map: self.categorical_map.clone(),
            rejected_rows: 0,
        }
    }
}

/// Scales every feature, returning the transformed dataset and the frozen
/// statistics. Min-max maps observed ranges onto [0,1]; constant features go
/// to 0.5 and are flagged in the spec. Normalizing an already-normalized
/// dataset is a no-op that returns the existing spec.
pub fn normalize(data: &Dataset, mode: NormMode) -> Result<(Dataset, NormalizationSpec), DataError> {
    if data.n_rows() == 0 {
        return Err(DataError::EmptyFile);
    }
    if let Some(spec) = &data.normalization {
        return Ok((data.clone(), spec.clone()));
    }
    let d = data.n_features();
    let n = data.n_rows();
    let mut stats = Vec::with_capacity(d);
    let mut constant = Vec::new();
    for f in 0..d {
        let column = (0..n).map(|r| data.row(r)[f]);
        match mode {
            NormMode::MinMax => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for v in column {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if lo == hi {
                    constant.push(f);
                }
                stats.push((lo, hi));
            }
            NormMode::Zscore => {
                let vals: Vec<f64> = column.collect();
                let mean = vals.iter().sum::<f64>() / n as f64;
                let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
                let std = var.sqrt();
                if std == 0.0 {
                    constant.push(f);
                }
                stats.push((mean, std));
            }
        }
    }
    let spec = NormalizationSpec {
        mode,
        stats,
        constant_features: constant,
    };
    let mut out = data.clone();
    for r in 0..n {
        for f in 0..d {
            let idx = r * d + f;
            out.features[idx] = spec.transform_value(f, out.features[idx]);
        }
    }
    out.normalization = Some(spec.clone());
    Ok((out, spec))
}

/// Seeded permutation split. The test part gets `round(n * test_fraction)`
/// rows; no row appears in both parts.
pub fn train_test_split(
    data: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::BadSplitFraction(test_fraction));
    }
    let n = data.n_rows();
    let test_n = (n as f64 * test_fraction).round() as usize;
    let train_n = n - test_n;
    if test_n == 0 || train_n == 0 {
        return Err(DataError::EmptySplitPart {
            train: train_n,
            test: test_n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let test_rows = &order[..test_n];
    let train_rows = &order[test_n..];
    Ok((data.take_rows(train_rows), data.take_rows(test_rows)))
}
