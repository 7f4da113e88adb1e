//! Contrast-based hypothesis tests over fitted coefficients.
//!
//! A contrast assigns one coefficient to every (parameter, group) cell of
//! the model, for each of `H` null hypotheses; its value is
//! `g[h] = sum_{a,l} C[h,a,l] * beta[a,l]` and each null asserts the value
//! is zero. The t statistic divides `g[h]` by its standard error
//!
//! ```text
//! se[h] = sqrt(sigma2 * sum_l sum_{a,b} C[h,a,l] inv(W_l)[a,b] C[h,b,l])
//! ```
//!
//! where `W_l` is group `l`'s Gram matrix: group covariances are block
//! diagonal, so the quadratic form sums per group. The joint F statistic
//! for all `H` hypotheses is the Wald form
//! `F = g' inv(M) g / (H sigma2)` with `M[h,h'] = sum_l C_h inv(W_l) C_h''`.
//!
//! Two-sided p-values come from the Student-t distribution via the
//! regularized incomplete beta function, evaluated with a continued
//! fraction; no external special-function dependency.

use std::fmt;

use crate::count::OpCounter;
use crate::einsum::{contract_counted, EinsumSpec};
use crate::glm::{BetaTensor, DesignTensor, VarianceEstimate};
use crate::linalg::{elimination_inverse, gram, invert_gram, LinalgError};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum HypothesisError {
    /// Contrast, coefficient, or design shapes disagree.
    ShapeMismatch { context: &'static str },
    /// A hypothesis row has no nonzero coefficient.
    AllZeroHypothesis { hypothesis: usize },
    /// A group's Gram matrix is singular.
    SingularGram { group: usize },
    /// A quadratic form came out non-positive, signalling numerical
    /// failure.
    NonPositiveVariance { hypothesis: usize },
    /// The between-hypothesis matrix is singular (e.g. duplicated rows).
    SingularContrastSystem,
}

impl fmt::Display for HypothesisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HypothesisError::ShapeMismatch { context } => {
                write!(f, "mismatched shapes: {context}")
            }
            HypothesisError::AllZeroHypothesis { hypothesis } => {
                write!(f, "hypothesis {hypothesis} has no nonzero coefficient")
            }
            HypothesisError::SingularGram { group } => {
                write!(f, "Gram matrix for group {group} is singular")
            }
            HypothesisError::NonPositiveVariance { hypothesis } => {
                write!(f, "non-positive variance for hypothesis {hypothesis}")
            }
            HypothesisError::SingularContrastSystem => {
                write!(f, "hypothesis rows are linearly dependent")
            }
        }
    }
}

impl std::error::Error for HypothesisError {}

impl From<LinalgError> for HypothesisError {
    fn from(err: LinalgError) -> Self {
        match err {
            LinalgError::SingularGram { group } => HypothesisError::SingularGram { group },
            LinalgError::SingularMatrix => HypothesisError::SingularContrastSystem,
            _ => HypothesisError::ShapeMismatch {
                context: "linear algebra failure",
            },
        }
    }
}

/// Contrast coefficients `C[h, a, l]`, one row per null hypothesis.
/// Construction rejects all-zero rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastTensor {
    values: Tensor,
}

impl ContrastTensor {
    pub fn new(values: Tensor) -> Result<Self, HypothesisError> {
        if values.rank() != 3 {
            return Err(HypothesisError::ShapeMismatch {
                context: "contrast tensor must have shape (hypotheses, parameters, groups)",
            });
        }
        let (h, p, g) = (values.shape()[0], values.shape()[1], values.shape()[2]);
        for hypothesis in 0..h {
            let row = &values.data()[hypothesis * p * g..(hypothesis + 1) * p * g];
            if row.iter().all(|&v| v == 0.0) {
                return Err(HypothesisError::AllZeroHypothesis { hypothesis });
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn hypotheses(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn parameters(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn groups(&self) -> usize {
        self.values.shape()[2]
    }

    pub fn get(&self, hypothesis: usize, parameter: usize, group: usize) -> f64 {
        self.values.get(&[hypothesis, parameter, group])
    }
}

/// Per-hypothesis statistics from one fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisResult {
    pub g: Vec<f64>,
    pub t: Vec<f64>,
    pub standard_error: Vec<f64>,
    pub f: Option<f64>,
    pub df: usize,
    pub p_values: Vec<f64>,
}

fn check_contrast_shapes(
    contrasts: &ContrastTensor,
    beta: &BetaTensor,
) -> Result<(), HypothesisError> {
    if contrasts.parameters() != beta.parameters() || contrasts.groups() != beta.groups() {
        return Err(HypothesisError::ShapeMismatch {
            context: "contrast and coefficient tensors disagree",
        });
    }
    Ok(())
}

/// Contrast values `g[h] = sum_{a,l} C[h,a,l] * beta[a,l]`.
pub fn contrast_value(
    contrasts: &ContrastTensor,
    beta: &BetaTensor,
) -> Result<Vec<f64>, HypothesisError> {
    check_contrast_shapes(contrasts, beta)?;
    let spec = EinsumSpec::parse("hal,al->h").expect("static spec");
    let g = contract_counted(
        &spec,
        &[contrasts.values(), beta.values()],
        &mut OpCounter::new(),
    )
    .expect("shapes agree by construction");
    Ok(g.data().to_vec())
}

/// Per-group quadratic forms `q[h] = sum_l C_h inv(W_l) C_h'` assembled
/// with two contractions, plus the inverse stack they came from.
fn contrast_quadratic(
    contrasts: &ContrastTensor,
    x: &DesignTensor,
) -> Result<(Vec<f64>, Tensor), HypothesisError> {
    if contrasts.parameters() != x.parameters() || contrasts.groups() != x.groups() {
        return Err(HypothesisError::ShapeMismatch {
            context: "contrast tensor does not match the design",
        });
    }
    let inverse = invert_gram(&gram(x))?;
    let mut counter = OpCounter::new();
    let step_spec = EinsumSpec::parse("hal,abl->hbl").expect("static spec");
    let step = contract_counted(
        &step_spec,
        &[contrasts.values(), &inverse.inverse],
        &mut counter,
    )
    .expect("shapes agree by construction");
    let quad_spec = EinsumSpec::parse("hbl,hbl->h").expect("static spec");
    let quad = contract_counted(&quad_spec, &[&step, contrasts.values()], &mut counter)
        .expect("shapes agree by construction");
    Ok((quad.data().to_vec(), step))
}

/// t statistic, standard error, and two-sided p-value per hypothesis.
pub fn t_statistics(
    contrasts: &ContrastTensor,
    beta: &BetaTensor,
    x: &DesignTensor,
    variance: &VarianceEstimate,
) -> Result<HypothesisResult, HypothesisError> {
    check_contrast_shapes(contrasts, beta)?;
    let g = contrast_value(contrasts, beta)?;
    let (quad, _) = contrast_quadratic(contrasts, x)?;

    let mut t = Vec::with_capacity(g.len());
    let mut standard_error = Vec::with_capacity(g.len());
    let mut p_values = Vec::with_capacity(g.len());
    for (hypothesis, (&gh, &qh)) in g.iter().zip(&quad).enumerate() {
        if qh <= 0.0 {
            return Err(HypothesisError::NonPositiveVariance { hypothesis });
        }
        let se = (variance.pooled * qh).sqrt();
        let th = gh / se;
        standard_error.push(se);
        t.push(th);
        p_values.push(t_pvalue(th, variance.df));
    }
    Ok(HypothesisResult {
        g,
        t,
        standard_error,
        f: None,
        df: variance.df,
        p_values,
    })
}

/// Joint Wald F statistic over all hypothesis rows:
/// `F = g' inv(M) g / (H sigma2)` with numerator df `H` and denominator
/// df the residual degrees of freedom.
pub fn f_statistic(
    contrasts: &ContrastTensor,
    beta: &BetaTensor,
    x: &DesignTensor,
    variance: &VarianceEstimate,
) -> Result<f64, HypothesisError> {
    check_contrast_shapes(contrasts, beta)?;
    let g = contrast_value(contrasts, beta)?;
    let (_, step) = contrast_quadratic(contrasts, x)?;

    let between_spec = EinsumSpec::parse("hbl,gbl->hg").expect("static spec");
    let between = contract_counted(
        &between_spec,
        &[&step, contrasts.values()],
        &mut OpCounter::new(),
    )
    .expect("shapes agree by construction");
    let inv = elimination_inverse(&between).map_err(|err| match err {
        LinalgError::SingularMatrix => HypothesisError::SingularContrastSystem,
        other => other.into(),
    })?;

    let h = g.len();
    let mut numerator = 0.0;
    for i in 0..h {
        for j in 0..h {
            numerator += g[i] * inv.data()[i * h + j] * g[j];
        }
    }
    Ok(numerator / (h as f64 * variance.pooled))
}

/// Two-sided Student-t p-value with `df` degrees of freedom, via the
/// regularized incomplete beta function `I_{df/(df+t^2)}(df/2, 1/2)`.
///
/// NaN propagates; an infinite statistic gives p = 0.
pub fn t_pvalue(t: f64, df: usize) -> f64 {
    assert!(df >= 1, "t p-value requires at least 1 degree of freedom");
    if t.is_nan() {
        return f64::NAN;
    }
    let v = df as f64;
    let x = v / (v + t * t);
    regularized_incomplete_beta(v / 2.0, 0.5, x)
}

/// Continued-fraction convergence tolerance and iteration cap.
const BETA_CF_TOLERANCE: f64 = 1e-12;
const BETA_CF_MAX_ITERATIONS: usize = 300;

/// Regularized incomplete beta function `I_x(a, b)` for `a, b > 0` and
/// `x` in `[0, 1]`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "shape parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    // The continued fraction converges fastest below the mean; mirror
    // through the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) otherwise.
    let front = (a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b)).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        let mirrored = (b * (1.0 - x).ln() + a * x.ln() - ln_beta(b, a)).exp();
        1.0 - mirrored * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-30;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;

    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;

    for m in 1..=BETA_CF_MAX_ITERATIONS {
        let mf = m as f64;
        let m2 = 2.0 * mf;

        let numerator = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = 1.0 + numerator * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + numerator / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let numerator = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = 1.0 + numerator * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + numerator / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;

        if (delta - 1.0).abs() < BETA_CF_TOLERANCE {
            break;
        }
    }
    h
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Lanczos approximation (g = 7, 9 terms), accurate to about 1e-13 for
/// positive arguments.
fn ln_gamma(x: f64) -> f64 {
    const COEFFICIENTS: [f64; 8] = [
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection for the left half plane.
        let pi = std::f64::consts::PI;
        return pi.ln() - (pi * x).sin().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.999_999_999_999_809_93;
    for (i, &c) in COEFFICIENTS.iter().enumerate() {
        acc += c / (x + i as f64 + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{build_design, estimate_variance, fit, residuals, Dataset};

    fn two_group_fit() -> (DesignTensor, BetaTensor, VarianceEstimate) {
        let data = Dataset::new(
            vec![1.1, 2.8, 5.3, 6.9, 0.9, 3.1, 5.1, 7.2],
            vec![
                vec![0.0],
                vec![1.0],
                vec![2.0],
                vec![3.0],
                vec![0.0],
                vec![1.0],
                vec![2.0],
                vec![3.0],
            ],
            vec![0, 0, 0, 0, 1, 1, 1, 1],
            2,
        )
        .unwrap();
        let (x, y) = build_design(&data);
        let beta = fit(&x, &y).unwrap();
        let n = residuals(&x, &beta, &y).unwrap();
        let variance = estimate_variance(&n, 2).unwrap();
        (x, beta, variance)
    }

    fn contrast(h: usize, p: usize, g: usize, data: Vec<f64>) -> ContrastTensor {
        ContrastTensor::new(Tensor::new(vec![h, p, g], data).unwrap()).unwrap()
    }

    #[test]
    fn all_zero_hypothesis_rejected() {
        let values = Tensor::new(vec![2, 1, 1], vec![1.0, 0.0]).unwrap();
        assert_eq!(
            ContrastTensor::new(values).unwrap_err(),
            HypothesisError::AllZeroHypothesis { hypothesis: 1 }
        );
    }

    #[test]
    fn selector_contrast_reads_single_coefficient() {
        let (_, beta, _) = two_group_fit();
        let c = contrast(1, 2, 2, vec![0.0, 0.0, 1.0, 0.0]);
        let g = contrast_value(&c, &beta).unwrap();
        assert_eq!(g, vec![beta.get(1, 0)]);
    }

    #[test]
    fn difference_contrast_on_identical_groups_is_zero() {
        let data = Dataset::new(
            vec![1.0, 3.2, 4.9, 1.0, 3.2, 4.9],
            vec![vec![0.0], vec![1.0], vec![2.0], vec![0.0], vec![1.0], vec![2.0]],
            vec![0, 0, 0, 1, 1, 1],
            2,
        )
        .unwrap();
        let (x, y) = build_design(&data);
        let beta = fit(&x, &y).unwrap();
        let c = contrast(1, 2, 2, vec![0.0, 0.0, 1.0, -1.0]);
        let g = contrast_value(&c, &beta).unwrap();
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn zero_contrast_value_gives_zero_t() {
        let data = Dataset::new(
            vec![1.0, 3.5, 4.4, 6.8, 1.0, 3.5, 4.4, 6.8],
            vec![
                vec![0.0],
                vec![1.0],
                vec![2.0],
                vec![3.0],
                vec![0.0],
                vec![1.0],
                vec![2.0],
                vec![3.0],
            ],
            vec![0, 0, 0, 0, 1, 1, 1, 1],
            2,
        )
        .unwrap();
        let (x, y) = build_design(&data);
        let beta = fit(&x, &y).unwrap();
        let n = residuals(&x, &beta, &y).unwrap();
        let variance = estimate_variance(&n, 2).unwrap();
        let c = contrast(1, 2, 2, vec![0.0, 0.0, 1.0, -1.0]);
        let result = t_statistics(&c, &beta, &x, &variance).unwrap();
        assert_eq!(result.t, vec![0.0]);
        assert_eq!(result.p_values, vec![1.0]);
    }

    #[test]
    fn f_equals_t_squared_for_single_hypothesis() {
        let (x, beta, variance) = two_group_fit();
        let c = contrast(1, 2, 2, vec![0.0, 0.0, 1.0, -1.0]);
        let result = t_statistics(&c, &beta, &x, &variance).unwrap();
        let f = f_statistic(&c, &beta, &x, &variance).unwrap();
        let t2 = result.t[0] * result.t[0];
        assert!((f - t2).abs() <= 1e-10 * t2.abs().max(1.0));
    }

    #[test]
    fn duplicated_hypotheses_are_singular() {
        let (x, beta, variance) = two_group_fit();
        let c = contrast(
            2,
            2,
            2,
            vec![0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 1.0, -1.0],
        );
        assert_eq!(
            f_statistic(&c, &beta, &x, &variance).unwrap_err(),
            HypothesisError::SingularContrastSystem
        );
    }

    #[test]
    fn pvalue_at_zero_is_one() {
        assert_eq!(t_pvalue(0.0, 7), 1.0);
    }

    #[test]
    fn pvalue_is_symmetric() {
        for &t in &[0.3, 1.7, 2.9, 14.0] {
            assert_eq!(t_pvalue(t, 9), t_pvalue(-t, 9));
        }
    }

    #[test]
    fn pvalue_classic_table_entry() {
        // 5% two-sided critical value at 10 degrees of freedom.
        let p = t_pvalue(2.2281, 10);
        assert!((p - 0.050).abs() < 5e-4, "p = {p}");
    }

    #[test]
    fn pvalue_decreases_in_magnitude() {
        let grid: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        for df in [1, 3, 10, 60] {
            for pair in grid.windows(2) {
                assert!(t_pvalue(pair[0], df) > t_pvalue(pair[1], df));
            }
        }
    }

    #[test]
    fn pvalue_of_infinite_statistic_is_zero() {
        assert_eq!(t_pvalue(f64::INFINITY, 4), 0.0);
    }

    #[test]
    fn incomplete_beta_endpoints() {
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 0.0), 0.0);
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 1.0), 1.0);
        // I_x(1,1) is the uniform CDF.
        let v = regularized_incomplete_beta(1.0, 1.0, 0.42);
        assert!((v - 0.42).abs() < 1e-14);
    }
}
