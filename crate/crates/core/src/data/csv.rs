//! CSV ingestion with in-place one-hot expansion of categorical columns.

use std::collections::BTreeSet;
use std::path::Path;

use super::{DataError, Dataset, Targets};

/// Which header columns hold the target and the categorical features.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub target: String,
    pub categorical: Vec<String>,
    /// Classification parses the target as category strings; regression
    /// parses it as a number.
    pub classification: bool,
}

/// Loads an RFC-4180-style CSV with a header row. Categorical feature columns
/// expand in place into one-hot groups, one column per distinct value in
/// lexicographic order, so the layout is deterministic. Rows containing empty
/// cells are rejected and counted, not imputed.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset, DataError> {
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();

    let target_idx = headers
        .iter()
        .position(|h| h == &schema.target)
        .ok_or_else(|| DataError::MissingColumn(schema.target.clone()))?;
    for c in &schema.categorical {
        if !headers.iter().any(|h| h == c) {
            return Err(DataError::MissingColumn(c.clone()));
        }
        if c == &schema.target {
            return Err(DataError::InvalidArg(format!(
                "target column {:?} cannot also be categorical feature",
                c
            )));
        }
    }

    let mut records: Vec<::csv::StringRecord> = Vec::new();
    let mut rejected = 0usize;
    for rec in reader.records() {
        let rec = rec?;
        if rec.iter().any(|cell| cell.trim().is_empty()) {
            rejected += 1;
            continue;
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(DataError::EmptyFile);
    }

    // Distinct values per categorical column, sorted so the one-hot layout
    // does not depend on row order.
    let mut category_values: Vec<Option<Vec<String>>> = vec![None; headers.len()];
    for (col, header) in headers.iter().enumerate() {
        if schema.categorical.iter().any(|c| c == header) {
            let mut set = BTreeSet::new();
            for rec in &records {
                set.insert(rec[col].trim().to_string());
            }
            category_values[col] = Some(set.into_iter().collect());
        }
    }

    // Output layout: source columns in header order, categorical ones fanned
    // out into `name=value` indicator columns.
    let mut feature_names = Vec::new();
    let mut categorical_map = Vec::new();
    for (col, header) in headers.iter().enumerate() {
        if col == target_idx {
            continue;
        }
        match &category_values[col] {
            Some(values) => {
                let start = feature_names.len();
                for v in values {
                    feature_names.push(format!("{}={}", header, v));
                }
                categorical_map.push((header.clone(), start..feature_names.len()));
            }
            None => feature_names.push(header.clone()),
        }
    }
    let d = feature_names.len();

    let mut features = Vec::with_capacity(records.len() * d);
    let mut raw_targets: Vec<String> = Vec::with_capacity(records.len());
    for (row_idx, rec) in records.iter().enumerate() {
        for (col, header) in headers.iter().enumerate() {
            if col == target_idx {
                continue;
            }
            let cell = rec[col].trim();
            match &category_values[col] {
                Some(values) => {
                    for v in values {
                        features.push(if v == cell { 1.0 } else { 0.0 });
                    }
                }
                None => {
                    let parsed: f64 = cell.parse().map_err(|_| DataError::NonNumeric {
                        row: row_idx,
                        column: header.clone(),
                        value: cell.to_string(),
                    })?;
                    if !parsed.is_finite() {
                        return Err(DataError::NonNumeric {
                            row: row_idx,
                            column: header.clone(),
                            value: cell.to_string(),
                        });
                    }
                    features.push(parsed);
                }
            }
        }
        raw_targets.push(rec[target_idx].trim().to_string());
    }

    let (targets, n_classes) = if schema.classification {
        let classes: Vec<String> = raw_targets
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let labels = raw_targets
            .iter()
            .map(|t| classes.iter().position(|c| c == t).unwrap())
            .collect();
        (Targets::Labels(labels), classes.len())
    } else {
        let mut values = Vec::with_capacity(raw_targets.len());
        for (row_idx, t) in raw_targets.iter().enumerate() {
            let parsed: f64 = t.parse().map_err(|_| DataError::NonNumeric {
                row: row_idx,
                column: schema.target.clone(),
                value: t.clone(),
            })?;
            values.push(parsed);
        }
        (Targets::Values(values), 0)
    };

    Ok(Dataset {
        features,
        n_features: d,
        targets,
        feature_names,
        n_classes,
        normalization: None,
        categorical_map,
        rejected_rows: rejected,
    })
}
