//! CSV ingestion for observations and contrast definitions.
//!
//! Data files are UTF-8 comma-separated with a header row. Group cells are
//! treated as labels and mapped to dense ids in order of first appearance;
//! numeric cells accept anything `f64` parses, including scientific
//! notation. Contrast files are sparse: header
//! `hypothesis,group,param,coeff`, one nonzero cell per row, everything
//! unspecified defaulting to zero. Parameter index 0 is the intercept;
//! index `j >= 1` is the j-th regressor column.

use std::fmt;
use std::path::Path;

use crate::glm::Dataset;
use crate::hypothesis::{ContrastTensor, HypothesisError};
use crate::tensor::Tensor;

/// Cap on hypothesis indices in contrast files, guarding against a typo
/// allocating a gigantic dense tensor.
pub const MAX_HYPOTHESIS_INDEX: usize = 9_999;

#[derive(Debug, Clone, PartialEq)]
pub enum DataError {
    /// Filesystem or CSV-structure failure.
    Io { path: String, message: String },
    /// A required column is absent from the header.
    MissingColumn { column: String },
    /// A cell failed to parse as a number. Rows are 1-based data rows
    /// (the header is row 0).
    NonNumericCell { row: usize, column: String },
    /// No data rows.
    EmptyFile,
    /// Model column names are not distinct.
    DuplicateModelColumns { column: String },
    /// A contrast index is outside the model's dimensions.
    IndexOutOfRange {
        row: usize,
        field: &'static str,
        value: usize,
        limit: usize,
    },
    /// A hypothesis has no nonzero coefficient (or no rows at all).
    AllZeroHypothesis { hypothesis: usize },
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::Io { path, message } => write!(f, "{path}: {message}"),
            DataError::MissingColumn { column } => {
                write!(f, "header is missing column '{column}'")
            }
            DataError::NonNumericCell { row, column } => {
                write!(f, "row {row}, column '{column}': not a number")
            }
            DataError::EmptyFile => write!(f, "file has no data rows"),
            DataError::DuplicateModelColumns { column } => {
                write!(f, "column '{column}' is used for more than one model role")
            }
            DataError::IndexOutOfRange {
                row,
                field,
                value,
                limit,
            } => write!(
                f,
                "row {row}: {field} index {value} is out of range (limit {limit})"
            ),
            DataError::AllZeroHypothesis { hypothesis } => {
                write!(f, "hypothesis {hypothesis} has no nonzero coefficient")
            }
        }
    }
}

impl std::error::Error for DataError {}

/// Which columns of a data file play which role in the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub outcome: String,
    pub regressors: Vec<String>,
    pub group: String,
}

impl ModelSpec {
    pub fn new(
        outcome: String,
        regressors: Vec<String>,
        group: String,
    ) -> Result<Self, DataError> {
        let mut seen: Vec<&str> = Vec::new();
        for name in std::iter::once(outcome.as_str())
            .chain(regressors.iter().map(String::as_str))
            .chain(std::iter::once(group.as_str()))
        {
            if seen.contains(&name) {
                return Err(DataError::DuplicateModelColumns {
                    column: name.to_string(),
                });
            }
            seen.push(name);
        }
        Ok(Self {
            outcome,
            regressors,
            group,
        })
    }

    /// Parameter names in coefficient order: intercept first.
    pub fn parameter_names(&self) -> Vec<String> {
        std::iter::once("intercept".to_string())
            .chain(self.regressors.iter().cloned())
            .collect()
    }
}

/// A parsed dataset together with the original group labels, index-aligned
/// with the dense group ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub group_labels: Vec<String>,
}

fn io_error(path: &Path, err: impl fmt::Display) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        message: err.to_string(),
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize, DataError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| DataError::MissingColumn {
            column: name.to_string(),
        })
}

fn parse_float(cell: &str, row: usize, column: &str) -> Result<f64, DataError> {
    cell.trim()
        .parse::<f64>()
        .map_err(|_| DataError::NonNumericCell {
            row,
            column: column.to_string(),
        })
}

fn parse_index(cell: &str, row: usize, column: &str) -> Result<usize, DataError> {
    cell.trim()
        .parse::<usize>()
        .map_err(|_| DataError::NonNumericCell {
            row,
            column: column.to_string(),
        })
}

/// Loads observations: one outcome and group cell per row plus the
/// requested regressor columns.
pub fn load_csv(path: &Path, spec: &ModelSpec) -> Result<LoadedDataset, DataError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    let headers = reader.headers().map_err(|e| io_error(path, e))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(DataError::EmptyFile);
    }
    let outcome_col = column_index(&headers, &spec.outcome)?;
    let group_col = column_index(&headers, &spec.group)?;
    let regressor_cols: Vec<usize> = spec
        .regressors
        .iter()
        .map(|name| column_index(&headers, name))
        .collect::<Result<_, _>>()?;

    let mut outcomes = Vec::new();
    let mut regressors = Vec::new();
    let mut group_ids = Vec::new();
    let mut group_labels: Vec<String> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| io_error(path, e))?;
        outcomes.push(parse_float(&record[outcome_col], row, &spec.outcome)?);
        let mut values = Vec::with_capacity(regressor_cols.len());
        for (&col, name) in regressor_cols.iter().zip(&spec.regressors) {
            values.push(parse_float(&record[col], row, name)?);
        }
        regressors.push(values);

        let label = record[group_col].trim().to_string();
        let id = match group_labels.iter().position(|l| *l == label) {
            Some(id) => id,
            None => {
                group_labels.push(label);
                group_labels.len() - 1
            }
        };
        group_ids.push(id);
    }
    if outcomes.is_empty() {
        return Err(DataError::EmptyFile);
    }

    let group_count = group_labels.len();
    let dataset = Dataset::new(outcomes, regressors, group_ids, group_count)
        .expect("first-appearance mapping satisfies dataset invariants");
    Ok(LoadedDataset {
        dataset,
        group_labels,
    })
}

/// Loads a sparse contrast file into a dense `(H, p, G)` tensor, with
/// `H = 1 + max hypothesis index`. Repeated cells accumulate.
pub fn load_contrasts(
    path: &Path,
    parameters: usize,
    groups: usize,
) -> Result<ContrastTensor, DataError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    let headers = reader.headers().map_err(|e| io_error(path, e))?.clone();
    let hypothesis_col = column_index(&headers, "hypothesis")?;
    let group_col = column_index(&headers, "group")?;
    let param_col = column_index(&headers, "param")?;
    let coeff_col = column_index(&headers, "coeff")?;

    let mut entries: Vec<(usize, usize, usize, f64)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| io_error(path, e))?;
        let hypothesis = parse_index(&record[hypothesis_col], row, "hypothesis")?;
        if hypothesis > MAX_HYPOTHESIS_INDEX {
            return Err(DataError::IndexOutOfRange {
                row,
                field: "hypothesis",
                value: hypothesis,
                limit: MAX_HYPOTHESIS_INDEX,
            });
        }
        let group = parse_index(&record[group_col], row, "group")?;
        if group >= groups {
            return Err(DataError::IndexOutOfRange {
                row,
                field: "group",
                value: group,
                limit: groups - 1,
            });
        }
        let param = parse_index(&record[param_col], row, "param")?;
        if param >= parameters {
            return Err(DataError::IndexOutOfRange {
                row,
                field: "param",
                value: param,
                limit: parameters - 1,
            });
        }
        let coeff = parse_float(&record[coeff_col], row, "coeff")?;
        entries.push((hypothesis, group, param, coeff));
    }
    if entries.is_empty() {
        return Err(DataError::EmptyFile);
    }

    let hypotheses = 1 + entries.iter().map(|e| e.0).max().unwrap_or(0);
    let mut dense = vec![0.0; hypotheses * parameters * groups];
    for (hypothesis, group, param, coeff) in entries {
        dense[(hypothesis * parameters + param) * groups + group] += coeff;
    }
    let values = Tensor::new(vec![hypotheses, parameters, groups], dense)
        .expect("dense contrast volume matches");
    ContrastTensor::new(values).map_err(|err| match err {
        HypothesisError::AllZeroHypothesis { hypothesis } => {
            DataError::AllZeroHypothesis { hypothesis }
        }
        other => DataError::Io {
            path: path.display().to_string(),
            message: other.to_string(),
        },
    })
}
