//! The conventional flat formulation of the grouped linear model.
//!
//! All groups share one dense design matrix: each observation row is
//! nonzero only in its own group's columns, and the columns are laid out
//! parameter-major (`column = parameter * groups + group`), i.e. every
//! group's intercept first, then every group's slope, and so on. Extra
//! groups therefore stagger the nonzero blocks and fill the rest of the
//! matrix with explicit zeros.
//!
//! This module exists as the baseline: the tensor formulation in [`crate::glm`]
//! must reproduce its coefficients and test statistics, and the benchmark
//! measures how much storage and arithmetic the staggered zeros cost.

use std::fmt;

use crate::count::{FitCounts, OpCounter};
use crate::glm::{BetaTensor, Dataset, VarianceEstimate};
use crate::hypothesis::ContrastTensor;
use crate::linalg::{elimination_inverse, elimination_inverse_counted, LinalgError};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum StaggeredError {
    /// The normal-equations matrix is singular.
    SingularSystem,
    /// A flat coefficient vector has the wrong length.
    LengthMismatch { expected: usize, actual: usize },
    /// The between-hypothesis matrix is singular.
    SingularContrastSystem,
    /// Contrast dimensions disagree with the system.
    ShapeMismatch { context: &'static str },
}

impl fmt::Display for StaggeredError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StaggeredError::SingularSystem => {
                write!(f, "staggered normal equations are singular")
            }
            StaggeredError::LengthMismatch { expected, actual } => {
                write!(f, "flat coefficient vector has length {actual}, expected {expected}")
            }
            StaggeredError::SingularContrastSystem => {
                write!(f, "hypothesis rows are linearly dependent")
            }
            StaggeredError::ShapeMismatch { context } => write!(f, "mismatched shapes: {context}"),
        }
    }
}

impl std::error::Error for StaggeredError {}

/// The flat design: a dense `(total observations) x (parameters * groups)`
/// matrix with materialized zeros, plus the outcome vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredSystem {
    design: Vec<f64>,
    rows: usize,
    outcome: Vec<f64>,
    parameters: usize,
    group_count: usize,
    group_sizes: Vec<usize>,
}

impl StaggeredSystem {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn columns(&self) -> usize {
        self.parameters * self.group_count
    }

    pub fn parameters(&self) -> usize {
        self.parameters
    }

    pub fn group_count(&self) -> usize {
        self.group_count
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    /// Row-major dense design entries.
    pub fn design(&self) -> &[f64] {
        &self.design
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn design_entry(&self, row: usize, column: usize) -> f64 {
        self.design[row * self.columns() + column]
    }
}

/// Builds the staggered design: rows grouped by group id in input order,
/// column `parameter * groups + group` for each group's parameters.
pub fn build_staggered(data: &Dataset) -> StaggeredSystem {
    let groups = data.group_count();
    let p = data.regressor_count() + 1;
    let columns = p * groups;
    let rows = data.observations();

    let mut row_order: Vec<usize> = Vec::with_capacity(rows);
    for group in 0..groups {
        for (row, &id) in data.group_ids().iter().enumerate() {
            if id == group {
                row_order.push(row);
            }
        }
    }

    let mut design = vec![0.0; rows * columns];
    let mut outcome = Vec::with_capacity(rows);
    for (out_row, &src_row) in row_order.iter().enumerate() {
        let group = data.group_ids()[src_row];
        design[out_row * columns + group] = 1.0;
        for (j, &value) in data.regressors()[src_row].iter().enumerate() {
            design[out_row * columns + (1 + j) * groups + group] = value;
        }
        outcome.push(data.outcomes()[src_row]);
    }

    StaggeredSystem {
        design,
        rows,
        outcome,
        parameters: p,
        group_count: groups,
        group_sizes: data.group_sizes().to_vec(),
    }
}

/// Normal-equations matrix `A'A` of the staggered design (full dense
/// products, zeros included).
pub fn normal_matrix(sys: &StaggeredSystem) -> Tensor {
    normal_matrix_counted(sys, &mut OpCounter::new())
}

fn normal_matrix_counted(sys: &StaggeredSystem, counter: &mut OpCounter) -> Tensor {
    let m = sys.columns();
    let mut data = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let mut acc = 0.0;
            for row in 0..sys.rows {
                acc += sys.design[row * m + i] * sys.design[row * m + j];
            }
            data.push(acc);
        }
    }
    counter.multiplies += (m * m * sys.rows) as u64;
    counter.adds += (m * m * sys.rows) as u64;
    Tensor::new(vec![m, m], data).expect("normal matrix volume matches")
}

/// Ordinary least squares on the full staggered system: invert the
/// normal-equations matrix by elimination and apply it to `A'y`. Returns
/// the flat coefficient vector of length `parameters * groups`.
pub fn fit_staggered(sys: &StaggeredSystem) -> Result<Vec<f64>, StaggeredError> {
    fit_staggered_counted(sys).map(|(flat, _)| flat)
}

/// As [`fit_staggered`], also returning exact per-stage operation counts.
pub fn fit_staggered_counted(
    sys: &StaggeredSystem,
) -> Result<(Vec<f64>, FitCounts), StaggeredError> {
    let m = sys.columns();
    let mut counts = FitCounts::default();

    let normal = normal_matrix_counted(sys, &mut counts.build);
    let mut rhs = vec![0.0; m];
    for (i, slot) in rhs.iter_mut().enumerate() {
        let mut acc = 0.0;
        for row in 0..sys.rows {
            acc += sys.design[row * m + i] * sys.outcome[row];
        }
        *slot = acc;
    }
    counts.build.multiplies += (m * sys.rows) as u64;
    counts.build.adds += (m * sys.rows) as u64;

    let inverse = elimination_inverse_counted(&normal, &mut counts.solve)
        .map_err(|_| StaggeredError::SingularSystem)?;
    let mut flat = vec![0.0; m];
    for (i, slot) in flat.iter_mut().enumerate() {
        let mut acc = 0.0;
        for j in 0..m {
            acc += inverse.data()[i * m + j] * rhs[j];
        }
        *slot = acc;
    }
    counts.solve.multiplies += (m * m) as u64;
    counts.solve.adds += (m * m) as u64;

    Ok((flat, counts))
}

/// Reshapes a flat staggered coefficient vector into `beta[a, l]`:
/// `beta[a, l] = flat[a * groups + l]`.
pub fn flat_to_beta(
    flat: &[f64],
    parameters: usize,
    groups: usize,
) -> Result<BetaTensor, StaggeredError> {
    if flat.len() != parameters * groups {
        return Err(StaggeredError::LengthMismatch {
            expected: parameters * groups,
            actual: flat.len(),
        });
    }
    let values =
        Tensor::new(vec![parameters, groups], flat.to_vec()).expect("length checked above");
    BetaTensor::new(values).map_err(|_| StaggeredError::ShapeMismatch {
        context: "flat coefficients",
    })
}

/// Flattens contrast rows to the staggered column layout:
/// `c[h][a * groups + l] = C[h, a, l]`.
pub fn flatten_contrasts(contrasts: &ContrastTensor) -> Vec<Vec<f64>> {
    let (h, p, groups) = (
        contrasts.hypotheses(),
        contrasts.parameters(),
        contrasts.groups(),
    );
    (0..h)
        .map(|hypothesis| {
            let mut row = vec![0.0; p * groups];
            for a in 0..p {
                for l in 0..groups {
                    row[a * groups + l] = contrasts.get(hypothesis, a, l);
                }
            }
            row
        })
        .collect()
}

/// Residual variance of the staggered fit: pooled over all rows with
/// `rows - parameters * groups` degrees of freedom, plus per-group values.
pub fn residual_variance(
    sys: &StaggeredSystem,
    flat: &[f64],
) -> Result<VarianceEstimate, StaggeredError> {
    let m = sys.columns();
    if flat.len() != m {
        return Err(StaggeredError::LengthMismatch {
            expected: m,
            actual: flat.len(),
        });
    }
    let p = sys.parameters;
    let mut per_group = Vec::with_capacity(sys.group_count);
    let mut total_rss = 0.0;
    let mut total_df = 0usize;
    let mut row = 0usize;
    for &n in &sys.group_sizes {
        let mut rss = 0.0;
        for _ in 0..n {
            let mut predicted = 0.0;
            for j in 0..m {
                predicted += sys.design[row * m + j] * flat[j];
            }
            let residual = sys.outcome[row] - predicted;
            rss += residual * residual;
            row += 1;
        }
        total_rss += rss;
        if n > p {
            total_df += n - p;
            per_group.push(Some(rss / (n - p) as f64));
        } else {
            per_group.push(None);
        }
    }
    Ok(VarianceEstimate {
        pooled: total_rss / total_df as f64,
        per_group,
        df: total_df,
    })
}

/// One conventional-route test: contrast value, standard error, t.
#[derive(Debug, Clone, PartialEq)]
pub struct ConventionalTest {
    pub g: f64,
    pub standard_error: f64,
    pub t: f64,
}

/// t statistics computed entirely in the flat formulation:
/// `t = c'beta / sqrt(sigma2 * c' inv(A'A) c)` per hypothesis row.
pub fn conventional_t_statistics(
    sys: &StaggeredSystem,
    flat: &[f64],
    contrasts: &ContrastTensor,
    sigma2: f64,
) -> Result<Vec<ConventionalTest>, StaggeredError> {
    let m = sys.columns();
    if contrasts.parameters() != sys.parameters || contrasts.groups() != sys.group_count {
        return Err(StaggeredError::ShapeMismatch {
            context: "contrast tensor does not match the staggered system",
        });
    }
    if flat.len() != m {
        return Err(StaggeredError::LengthMismatch {
            expected: m,
            actual: flat.len(),
        });
    }
    let inverse = elimination_inverse(&normal_matrix(sys))
        .map_err(|_| StaggeredError::SingularSystem)?;

    let rows = flatten_contrasts(contrasts);
    let mut out = Vec::with_capacity(rows.len());
    for c in &rows {
        let g: f64 = c.iter().zip(flat).map(|(ci, bi)| ci * bi).sum();
        let mut quad = 0.0;
        for i in 0..m {
            for j in 0..m {
                quad += c[i] * inverse.data()[i * m + j] * c[j];
            }
        }
        let standard_error = (sigma2 * quad).sqrt();
        out.push(ConventionalTest {
            g,
            standard_error,
            t: g / standard_error,
        });
    }
    Ok(out)
}

/// Joint Wald F in the flat formulation:
/// `F = g' inv(C inv(A'A) C') g / (H sigma2)`.
pub fn conventional_f_statistic(
    sys: &StaggeredSystem,
    flat: &[f64],
    contrasts: &ContrastTensor,
    sigma2: f64,
) -> Result<f64, StaggeredError> {
    let m = sys.columns();
    if contrasts.parameters() != sys.parameters || contrasts.groups() != sys.group_count {
        return Err(StaggeredError::ShapeMismatch {
            context: "contrast tensor does not match the staggered system",
        });
    }
    let inverse = elimination_inverse(&normal_matrix(sys))
        .map_err(|_| StaggeredError::SingularSystem)?;

    let rows = flatten_contrasts(contrasts);
    let h = rows.len();
    let mut between = vec![0.0; h * h];
    for (i, ci) in rows.iter().enumerate() {
        for (j, cj) in rows.iter().enumerate() {
            let mut acc = 0.0;
            for a in 0..m {
                for b in 0..m {
                    acc += ci[a] * inverse.data()[a * m + b] * cj[b];
                }
            }
            between[i * h + j] = acc;
        }
    }
    let between = Tensor::new(vec![h, h], between).expect("between volume matches");
    let between_inv = elimination_inverse(&between).map_err(|err| match err {
        LinalgError::SingularMatrix => StaggeredError::SingularContrastSystem,
        _ => StaggeredError::ShapeMismatch {
            context: "between-hypothesis matrix",
        },
    })?;

    let g: Vec<f64> = rows
        .iter()
        .map(|c| c.iter().zip(flat).map(|(ci, bi)| ci * bi).sum())
        .collect();
    let mut numerator = 0.0;
    for i in 0..h {
        for j in 0..h {
            numerator += g[i] * between_inv.data()[i * h + j] * g[j];
        }
    }
    Ok(numerator / (h as f64 * sigma2))
}
