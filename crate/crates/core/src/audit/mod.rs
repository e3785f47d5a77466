//! End-to-end audit orchestration: load data, train (or load) the model,
//! then measure every configured explainer's local robustness and assemble
//! the report. One explainer failing records a failure entry and the run
//! continues; the cross-method comparison still needs the others' numbers.

mod config;
mod report;

pub use config::{
    ActivationName, AuditConfig, AuditMode, CoalitionName, CoalitionSetting, DatasetConfig,
    ExplainersConfig, ModelConfig, ModelKind, PatchConfig, RobustnessConfig, SourceKind,
    SynthName,
};
pub use report::{
    emit_report, AuditReport, MethodFailure, MethodTiming, NoiseRow, NoiseTable, ReportFormat,
    Timings, WorstPairRecord, SCHEMA_VERSION,
};

use crate::data::{self, CsvSchema, DataError, Dataset, SynthKind};
use crate::explain::ExplainError;
use crate::model::{
    fit_random_forest, load_model, train_mlp, ForestConfig, Model, ModelError, TrainConfig,
};
use crate::robustness::{
    dataset_robustness_summary, noise_probe, worst_pair, EstimateMode, ExplanationMap,
    NeighborhoodSpec, RobustnessError, RobustnessSummary,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(#[from] DataError),
    #[error("model error: {0}")]
    Model(#[from] ModelError),
    #[error("explain error: {0}")]
    Explain(#[from] ExplainError),
    #[error("robustness error: {0}")]
    Robustness(#[from] RobustnessError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("report encoding error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl AuditError {
    /// Process exit code: 2 config, 3 data, 4 anything at runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            AuditError::Config(_) => 2,
            AuditError::Data(_) => 3,
            _ => 4,
        }
    }
}

impl SynthName {
    fn to_kind(self) -> SynthKind {
        match self {
            SynthName::Blobs => SynthKind::Blobs,
            SynthName::Moons => SynthKind::Moons,
        }
    }
}

/// Loads and (by default) normalizes the configured dataset. The seed only
/// matters for the synthetic source.
pub fn load_dataset(cfg: &DatasetConfig, seed: u64) -> Result<Dataset, AuditError> {
    let raw = match cfg.source {
        SourceKind::Csv => {
            let schema = CsvSchema {
                target: cfg.target.clone().expect("validated"),
                categorical: cfg.categorical.clone(),
                classification: cfg.classification,
            };
            data::load_csv(cfg.path.as_ref().expect("validated"), &schema)?
        }
        SourceKind::Idx => data::load_idx(
            cfg.images.as_ref().expect("validated"),
            cfg.labels.as_ref().expect("validated"),
        )?,
        SourceKind::Synthetic => {
            data::synth_2d(cfg.kind.expect("validated").to_kind(), cfg.n, cfg.noise, seed)?
        }
    };
    match cfg.normalization {
        Some(mode) => Ok(data::normalize(&raw, mode)?.0),
        None => Ok(raw),
    }
}

/// Trains the configured model, or loads a pretrained one when `load` is
/// set.
pub fn build_model(cfg: &ModelConfig, train: &Dataset, seed: u64) -> Result<Model, AuditError> {
    if let Some(path) = &cfg.load {
        return Ok(load_model(path)?);
    }
    match cfg.kind {
        ModelKind::Mlp => {
            let tc = TrainConfig {
                learning_rate: cfg.learning_rate,
                epochs: cfg.epochs,
                batch_size: cfg.batch_size,
                seed,
                init_scale: cfg.init_scale,
                hidden_activation: cfg.activation.to_activation(),
            };
            Ok(Model::Mlp(train_mlp(train, &cfg.hidden, &tc)?))
        }
        ModelKind::Forest => {
            let fc = ForestConfig {
                n_trees: cfg.n_trees,
                max_depth: cfg.max_depth,
                min_leaf: cfg.min_leaf,
                bootstrap: cfg.bootstrap,
                seed,
            };
            Ok(Model::Forest(fit_random_forest(train, &fc)?))
        }
    }
}

enum MethodOutput {
    Lipschitz(RobustnessSummary, Option<WorstPairRecord>),
    Noise(NoiseTable),
}

fn audit_method(
    map: &ExplanationMap,
    rows: &[Vec<f64>],
    cfg: &AuditConfig,
    spec: &NeighborhoodSpec,
) -> Result<MethodOutput, RobustnessError> {
    let r = &cfg.robustness;
    match r.mode {
        AuditMode::Continuous | AuditMode::Discrete => {
            let mode = match r.mode {
                AuditMode::Continuous => EstimateMode::Continuous,
                _ => EstimateMode::Discrete,
            };
            let budget = r.budget_for(map.method, cfg.seed);
            let summary = dataset_robustness_summary(
                map,
                rows,
                r.sample_size,
                mode,
                spec,
                &budget,
                cfg.seed,
            )?;
            let record = match summary
                .estimates
                .iter()
                .filter(|e| e.is_defined())
                .max_by(|a, b| a.value.partial_cmp(&b.value).expect("defined values are finite"))
            {
                Some(best) => Some(WorstPairRecord {
                    method: map.method,
                    pair: worst_pair(map, &rows[best.anchor_index], best)?,
                }),
                None => None,
            };
            Ok(MethodOutput::Lipschitz(summary, record))
        }
        AuditMode::Noise => {
            if r.sample_size > rows.len() {
                return Err(RobustnessError::SampleTooLarge {
                    requested: r.sample_size,
                    available: rows.len(),
                });
            }
            // Same anchor sampling as the summary path, so every method and
            // every mode sees the same points.
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut anchors =
                rand::seq::index::sample(&mut rng, rows.len(), r.sample_size).into_vec();
            anchors.sort_unstable();
            let table_rows = anchors
                .into_iter()
                .map(|i| {
                    noise_probe(
                        map,
                        &rows[i],
                        r.sigma,
                        r.perturbations,
                        cfg.seed.wrapping_add(i as u64),
                    )
                    .map(|result| NoiseRow {
                        anchor_index: i,
                        result,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(MethodOutput::Noise(NoiseTable {
                method: map.method,
                rows: table_rows,
            }))
        }
    }
}

/// Runs the full pipeline described by the config. Deterministic end to end
/// given the seed, except for the `timings` field.
pub fn run_audit(config: &AuditConfig) -> Result<AuditReport, AuditError> {
    config.validate()?;
    let total = Instant::now();
    let dataset = load_dataset(&config.dataset, config.seed)?;
    let (train, test) = data::train_test_split(&dataset, config.dataset.test_fraction, config.seed)?;
    let model = build_model(&config.model, &train, config.seed)?;
    let rows: Vec<Vec<f64>> = (0..test.n_rows()).map(|i| test.row(i).to_vec()).collect();
    let explainer_cfg = config.explainer_config();
    let spec = NeighborhoodSpec {
        epsilon: config.robustness.epsilon,
        membership_norm: config.robustness.membership_norm,
    };

    let mut summaries = Vec::new();
    let mut worst_pairs = Vec::new();
    let mut noise_tables = Vec::new();
    let mut failures = Vec::new();
    let mut per_method = Vec::new();
    for &method in &config.explainers.methods {
        let start = Instant::now();
        let map = ExplanationMap::new(&model, method, &explainer_cfg);
        match audit_method(&map, &rows, config, &spec) {
            Ok(MethodOutput::Lipschitz(summary, record)) => {
                summaries.push(summary);
                worst_pairs.extend(record);
            }
            Ok(MethodOutput::Noise(table)) => noise_tables.push(table),
            Err(e) => failures.push(MethodFailure {
                method,
                error: e.to_string(),
            }),
        }
        per_method.push(MethodTiming {
            method,
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    Ok(AuditReport {
        schema_version: SCHEMA_VERSION,
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        summaries,
        worst_pairs,
        noise_tables,
        failures,
        timings: Timings {
            total_seconds: total.elapsed().as_secs_f64(),
            per_method,
        },
    })
}
