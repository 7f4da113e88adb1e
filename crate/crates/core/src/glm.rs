//! The tensor-formulation linear model: rank-3 design construction,
//! per-group least-squares coefficients, residuals, and variance.
//!
//! Observations live in a single rectangular design array `X[k, a, l]`
//! (sample by parameter by group) with parameter slot 0 holding the
//! intercept column of ones. Ragged groups are zero-padded up to the
//! largest group so one tensor holds everything; every sum is either
//! masked to a group's valid rows or runs over padding that contributes
//! exactly zero, so the two read the same.

use std::fmt;

use crate::count::{FitCounts, OpCounter};
use crate::einsum::{contract_counted, EinsumSpec};
use crate::linalg::{gram_counted, invert_gram_counted, LinalgError};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum GlmError {
    /// A group id references a group with no observations.
    EmptyGroup { group: usize },
    /// A group id is outside `0..groups`.
    GroupIdOutOfRange { row: usize, id: usize, groups: usize },
    /// Outcome, regressor, and group-id sequences disagree in length.
    RowCountMismatch {
        outcomes: usize,
        regressors: usize,
        group_ids: usize,
    },
    /// One observation has a different number of regressors than the rest.
    RaggedRegressors {
        row: usize,
        expected: usize,
        actual: usize,
    },
    /// A group has fewer valid samples than parameters.
    InsufficientSamples {
        group: usize,
        samples: usize,
        parameters: usize,
    },
    /// A group's Gram matrix is singular.
    SingularGram { group: usize },
    /// The solve produced a NaN or infinity.
    NonFiniteCoefficients { group: usize },
    /// No residual degrees of freedom remain.
    NoDegreesOfFreedom,
    /// Two values that must share a shape do not.
    ShapeMismatch { context: &'static str },
}

impl fmt::Display for GlmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GlmError::EmptyGroup { group } => write!(f, "group {group} has no observations"),
            GlmError::GroupIdOutOfRange { row, id, groups } => {
                write!(f, "row {row} has group id {id}, outside 0..{groups}")
            }
            GlmError::RowCountMismatch {
                outcomes,
                regressors,
                group_ids,
            } => write!(
                f,
                "row counts disagree: {outcomes} outcomes, {regressors} regressor rows, {group_ids} group ids"
            ),
            GlmError::RaggedRegressors {
                row,
                expected,
                actual,
            } => write!(
                f,
                "row {row} has {actual} regressors, expected {expected}"
            ),
            GlmError::InsufficientSamples {
                group,
                samples,
                parameters,
            } => write!(
                f,
                "group {group} has {samples} samples for {parameters} parameters"
            ),
            GlmError::SingularGram { group } => {
                write!(f, "Gram matrix for group {group} is singular")
            }
            GlmError::NonFiniteCoefficients { group } => {
                write!(f, "fit for group {group} produced non-finite coefficients")
            }
            GlmError::NoDegreesOfFreedom => {
                write!(f, "no residual degrees of freedom (need at least 1)")
            }
            GlmError::ShapeMismatch { context } => write!(f, "mismatched shapes: {context}"),
        }
    }
}

impl std::error::Error for GlmError {}

impl From<LinalgError> for GlmError {
    fn from(err: LinalgError) -> Self {
        match err {
            LinalgError::SingularGram { group } => GlmError::SingularGram { group },
            other => GlmError::ShapeMismatch {
                context: match other {
                    LinalgError::NotSquare { .. } => "gram slice not square",
                    _ => "linear algebra failure",
                },
            },
        }
    }
}

/// Observations: one outcome, `r` regressors, and a group id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    outcomes: Vec<f64>,
    regressors: Vec<Vec<f64>>,
    group_ids: Vec<usize>,
    group_count: usize,
    group_sizes: Vec<usize>,
}

impl Dataset {
    pub fn new(
        outcomes: Vec<f64>,
        regressors: Vec<Vec<f64>>,
        group_ids: Vec<usize>,
        group_count: usize,
    ) -> Result<Self, GlmError> {
        if outcomes.len() != regressors.len() || outcomes.len() != group_ids.len() {
            return Err(GlmError::RowCountMismatch {
                outcomes: outcomes.len(),
                regressors: regressors.len(),
                group_ids: group_ids.len(),
            });
        }
        let expected = regressors.first().map_or(0, Vec::len);
        for (row, regs) in regressors.iter().enumerate() {
            if regs.len() != expected {
                return Err(GlmError::RaggedRegressors {
                    row,
                    expected,
                    actual: regs.len(),
                });
            }
        }
        let mut group_sizes = vec![0usize; group_count];
        for (row, &id) in group_ids.iter().enumerate() {
            if id >= group_count {
                return Err(GlmError::GroupIdOutOfRange {
                    row,
                    id,
                    groups: group_count,
                });
            }
            group_sizes[id] += 1;
        }
        if let Some(group) = group_sizes.iter().position(|&n| n == 0) {
            return Err(GlmError::EmptyGroup { group });
        }
        if group_count == 0 {
            return Err(GlmError::EmptyGroup { group: 0 });
        }
        Ok(Self {
            outcomes,
            regressors,
            group_ids,
            group_count,
            group_sizes,
        })
    }

    pub fn observations(&self) -> usize {
        self.outcomes.len()
    }

    pub fn regressor_count(&self) -> usize {
        self.regressors.first().map_or(0, Vec::len)
    }

    pub fn group_count(&self) -> usize {
        self.group_count
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn regressors(&self) -> &[Vec<f64>] {
        &self.regressors
    }

    pub fn group_ids(&self) -> &[usize] {
        &self.group_ids
    }
}

/// Rank-3 design `X[k, a, l]` with per-group valid row counts; padding
/// rows are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignTensor {
    values: Tensor,
    valid: Vec<usize>,
}

impl DesignTensor {
    /// Validating constructor: shape `(k_max, p, groups)`, intercept ones
    /// on valid rows, padding rows exactly zero.
    pub fn new(values: Tensor, valid: Vec<usize>) -> Result<Self, GlmError> {
        if values.rank() != 3 || values.shape()[2] != valid.len() {
            return Err(GlmError::ShapeMismatch {
                context: "design tensor must have shape (samples, parameters, groups)",
            });
        }
        let (k_max, p, groups) = (values.shape()[0], values.shape()[1], values.shape()[2]);
        for (group, &n) in valid.iter().enumerate() {
            if n > k_max {
                return Err(GlmError::ShapeMismatch {
                    context: "valid counts exceed the sample axis",
                });
            }
            for k in 0..k_max {
                let intercept = values.get(&[k, 0, group]);
                if k < n && intercept != 1.0 {
                    return Err(GlmError::ShapeMismatch {
                        context: "intercept column must be all ones on valid rows",
                    });
                }
                if k >= n && (0..p).any(|a| values.get(&[k, a, group]) != 0.0) {
                    return Err(GlmError::ShapeMismatch {
                        context: "padding rows must be zero",
                    });
                }
            }
        }
        Ok(Self { values, valid })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    /// Valid sample count per group.
    pub fn valid(&self) -> &[usize] {
        &self.valid
    }

    pub fn max_samples(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn parameters(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn groups(&self) -> usize {
        self.values.shape()[2]
    }
}

/// Outcomes `Y[k, l]` with the same padding convention as the design.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeTensor {
    values: Tensor,
    valid: Vec<usize>,
}

impl OutcomeTensor {
    /// Validating constructor: shape `(k_max, groups)`, padding rows zero.
    pub fn new(values: Tensor, valid: Vec<usize>) -> Result<Self, GlmError> {
        if values.rank() != 2 || values.shape()[1] != valid.len() {
            return Err(GlmError::ShapeMismatch {
                context: "outcome tensor must have shape (samples, groups)",
            });
        }
        let k_max = values.shape()[0];
        for (group, &n) in valid.iter().enumerate() {
            if n > k_max {
                return Err(GlmError::ShapeMismatch {
                    context: "valid counts exceed the sample axis",
                });
            }
            for k in n..k_max {
                if values.get(&[k, group]) != 0.0 {
                    return Err(GlmError::ShapeMismatch {
                        context: "padding rows must be zero",
                    });
                }
            }
        }
        Ok(Self { values, valid })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn valid(&self) -> &[usize] {
        &self.valid
    }
}

/// Fitted coefficients `beta[a, l]`, one column per group.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaTensor {
    values: Tensor,
}

impl BetaTensor {
    pub fn new(values: Tensor) -> Result<Self, GlmError> {
        if values.rank() != 2 {
            return Err(GlmError::ShapeMismatch {
                context: "coefficient tensor must have shape (parameters, groups)",
            });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn parameters(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn groups(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn get(&self, parameter: usize, group: usize) -> f64 {
        self.values.get(&[parameter, group])
    }
}

/// Residuals `N[k, l]` on valid rows, zero on padding.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTensor {
    values: Tensor,
    valid: Vec<usize>,
}

impl ResidualTensor {
    pub fn new(values: Tensor, valid: Vec<usize>) -> Result<Self, GlmError> {
        if values.rank() != 2 || values.shape()[1] != valid.len() {
            return Err(GlmError::ShapeMismatch {
                context: "residual tensor must have shape (samples, groups)",
            });
        }
        if valid.iter().any(|&n| n > values.shape()[0]) {
            return Err(GlmError::ShapeMismatch {
                context: "valid counts exceed the sample axis",
            });
        }
        Ok(Self { values, valid })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn valid(&self) -> &[usize] {
        &self.valid
    }
}

/// Residual variance: pooled across groups plus per-group values where a
/// group has spare degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceEstimate {
    pub pooled: f64,
    pub per_group: Vec<Option<f64>>,
    pub df: usize,
}

/// Builds the design and outcome tensors from a dataset: intercept column
/// of ones, regressor columns in order, rows grouped by group id in input
/// order, padding zeroed.
pub fn build_design(data: &Dataset) -> (DesignTensor, OutcomeTensor) {
    let groups = data.group_count();
    let r = data.regressor_count();
    let p = r + 1;
    let k_max = data.group_sizes().iter().copied().max().unwrap_or(0);

    let mut design = vec![0.0; k_max * p * groups];
    let mut outcome = vec![0.0; k_max * groups];
    let mut cursor = vec![0usize; groups];
    for (row, &group) in data.group_ids().iter().enumerate() {
        let k = cursor[group];
        cursor[group] += 1;
        design[(k * p) * groups + group] = 1.0;
        for (j, &value) in data.regressors()[row].iter().enumerate() {
            design[(k * p + 1 + j) * groups + group] = value;
        }
        outcome[k * groups + group] = data.outcomes()[row];
    }

    (
        DesignTensor {
            values: Tensor::new(vec![k_max, p, groups], design).expect("design volume matches"),
            valid: data.group_sizes().to_vec(),
        },
        OutcomeTensor {
            values: Tensor::new(vec![k_max, groups], outcome).expect("outcome volume matches"),
            valid: data.group_sizes().to_vec(),
        },
    )
}

/// Ordinary least squares per group via the normal equations:
/// `beta[., l] = inv(W_l) (sum_k X[k,.,l] Y[k,l])`.
pub fn fit(x: &DesignTensor, y: &OutcomeTensor) -> Result<BetaTensor, GlmError> {
    fit_counted(x, y).map(|(beta, _)| beta)
}

/// As [`fit`], also returning exact per-stage operation counts.
pub fn fit_counted(
    x: &DesignTensor,
    y: &OutcomeTensor,
) -> Result<(BetaTensor, FitCounts), GlmError> {
    if x.values().shape()[0] != y.values().shape()[0]
        || x.values().shape()[2] != y.values().shape()[1]
        || x.valid() != y.valid()
    {
        return Err(GlmError::ShapeMismatch {
            context: "design and outcome tensors disagree",
        });
    }
    let p = x.parameters();
    for (group, &n) in x.valid().iter().enumerate() {
        if n < p {
            return Err(GlmError::InsufficientSamples {
                group,
                samples: n,
                parameters: p,
            });
        }
    }

    let mut counts = FitCounts::default();

    let w = gram_counted(x, &mut counts.build);
    let xty_spec = EinsumSpec::parse("kal,kl->al").expect("static spec");
    let xty = contract_counted(&xty_spec, &[x.values(), y.values()], &mut counts.build)
        .expect("shapes agree by construction");

    let inverse = invert_gram_counted(&w, &mut counts.solve)?;
    let beta_spec = EinsumSpec::parse("abl,bl->al").expect("static spec");
    let beta = contract_counted(&beta_spec, &[&inverse.inverse, &xty], &mut counts.solve)
        .expect("shapes agree by construction");

    if let Some(flat) = beta.data().iter().position(|v| !v.is_finite()) {
        return Err(GlmError::NonFiniteCoefficients {
            group: flat % x.groups(),
        });
    }
    Ok((BetaTensor { values: beta }, counts))
}

/// Residuals `N[k,l] = Y[k,l] - sum_a X[k,a,l] beta[a,l]`.
pub fn residuals(
    x: &DesignTensor,
    beta: &BetaTensor,
    y: &OutcomeTensor,
) -> Result<ResidualTensor, GlmError> {
    if beta.parameters() != x.parameters() || beta.groups() != x.groups() {
        return Err(GlmError::ShapeMismatch {
            context: "coefficients do not match the design",
        });
    }
    if x.values().shape()[0] != y.values().shape()[0] || x.valid() != y.valid() {
        return Err(GlmError::ShapeMismatch {
            context: "design and outcome tensors disagree",
        });
    }
    let spec = EinsumSpec::parse("kal,al->kl").expect("static spec");
    let predicted = contract_counted(&spec, &[x.values(), beta.values()], &mut OpCounter::new())
        .expect("shapes agree by construction");
    let data: Vec<f64> = y
        .values()
        .data()
        .iter()
        .zip(predicted.data())
        .map(|(obs, fit)| obs - fit)
        .collect();
    Ok(ResidualTensor {
        values: Tensor::new(y.values().shape().to_vec(), data).expect("shape preserved"),
        valid: y.valid().to_vec(),
    })
}

/// Pooled and per-group residual variance with `sum_l (n_l - p)` degrees
/// of freedom.
pub fn estimate_variance(
    residuals: &ResidualTensor,
    parameters: usize,
) -> Result<VarianceEstimate, GlmError> {
    let groups = residuals.valid().len();
    let k_max = residuals.values().shape()[0];
    let mut total_rss = 0.0;
    let mut total_df = 0usize;
    let mut per_group = Vec::with_capacity(groups);
    for (group, &n) in residuals.valid().iter().enumerate() {
        let mut rss = 0.0;
        for k in 0..n.min(k_max) {
            let v = residuals.values().data()[k * groups + group];
            rss += v * v;
        }
        total_rss += rss;
        if n > parameters {
            let df = n - parameters;
            total_df += df;
            per_group.push(Some(rss / df as f64));
        } else {
            per_group.push(None);
        }
    }
    if total_df < 1 {
        return Err(GlmError::NoDegreesOfFreedom);
    }
    Ok(VarianceEstimate {
        pooled: total_rss / total_df as f64,
        per_group,
        df: total_df,
    })
}
