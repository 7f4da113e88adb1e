//! Hypothesis-test invariants: linearity, scale invariance, the F/t
//! identity, and agreement between the tensor-route and flat-route test
//! statistics.

mod common;

use common::{scaled_deviation, seeded_rng};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use tensorglm::bench::synthetic_dataset;
use tensorglm::glm::{build_design, estimate_variance, fit, residuals, Dataset};
use tensorglm::hypothesis::{
    contrast_value, f_statistic, t_statistics, ContrastTensor,
};
use tensorglm::staggered::{
    build_staggered, conventional_f_statistic, conventional_t_statistics, fit_staggered,
    residual_variance,
};
use tensorglm::Tensor;

fn random_contrast(
    rng: &mut ChaCha12Rng,
    hypotheses: usize,
    parameters: usize,
    groups: usize,
) -> ContrastTensor {
    let volume = hypotheses * parameters * groups;
    let data: Vec<f64> = (0..volume).map(|_| rng.random_range(-2.0..2.0)).collect();
    ContrastTensor::new(Tensor::new(vec![hypotheses, parameters, groups], data).unwrap()).unwrap()
}

struct Instance {
    data: Dataset,
    contrasts: ContrastTensor,
}

fn random_test_instance(seed: u64, hypotheses: usize) -> Instance {
    let mut rng = seeded_rng(seed);
    // H independent contrast rows need at least H coefficient cells.
    let (groups, regressors) = loop {
        let groups = rng.random_range(1..=3);
        let regressors = rng.random_range(0..=2);
        if (regressors + 1) * groups >= hypotheses {
            break (groups, regressors);
        }
    };
    let samples = rng.random_range(6..=20);
    let data = synthetic_dataset(&mut rng, groups, regressors, samples, false);
    let contrasts = random_contrast(&mut rng, hypotheses, regressors + 1, groups);
    Instance { data, contrasts }
}

#[test]
fn contrast_value_is_linear_in_both_arguments() {
    for seed in 0..20u64 {
        let mut rng = seeded_rng(seed);
        let (h, p, g) = (2usize, 3usize, 2usize);
        let c1 = random_contrast(&mut rng, h, p, g);
        let c2 = random_contrast(&mut rng, h, p, g);
        let beta = tensorglm::glm::BetaTensor::new(
            Tensor::new(vec![p, g], (0..p * g).map(|_| rng.random_range(-2.0..2.0)).collect())
                .unwrap(),
        )
        .unwrap();
        let a: f64 = rng.random_range(-2.0..2.0);

        let mixed = ContrastTensor::new(
            Tensor::new(
                vec![h, p, g],
                c1.values()
                    .data()
                    .iter()
                    .zip(c2.values().data())
                    .map(|(x, y)| x + a * y)
                    .collect(),
            )
            .unwrap(),
        )
        .unwrap();

        let g1 = contrast_value(&c1, &beta).unwrap();
        let g2 = contrast_value(&c2, &beta).unwrap();
        let gm = contrast_value(&mixed, &beta).unwrap();
        for i in 0..h {
            let expected = g1[i] + a * g2[i];
            assert!(
                (gm[i] - expected).abs() <= 1e-12 * expected.abs().max(1.0),
                "seed {seed}: contrast value not linear"
            );
        }
    }
}

#[test]
fn t_is_invariant_under_outcome_scaling() {
    for seed in 30..45u64 {
        let instance = random_test_instance(seed, 2);
        let (x, y) = build_design(&instance.data);
        let beta = fit(&x, &y).unwrap();
        let variance = estimate_variance(&residuals(&x, &beta, &y).unwrap(), x.parameters()).unwrap();
        let base = t_statistics(&instance.contrasts, &beta, &x, &variance).unwrap();

        for c in [0.5, 3.0, 100.0] {
            let scaled_data = Dataset::new(
                instance.data.outcomes().iter().map(|v| c * v).collect(),
                instance.data.regressors().to_vec(),
                instance.data.group_ids().to_vec(),
                instance.data.group_count(),
            )
            .unwrap();
            let (sx, sy) = build_design(&scaled_data);
            let sbeta = fit(&sx, &sy).unwrap();
            let svariance =
                estimate_variance(&residuals(&sx, &sbeta, &sy).unwrap(), sx.parameters()).unwrap();
            let scaled = t_statistics(&instance.contrasts, &sbeta, &sx, &svariance).unwrap();
            let deviation = scaled_deviation(&base.t, &scaled.t);
            assert!(
                deviation <= 1e-10,
                "seed {seed}: scaling outcomes by {c} moved t by {deviation:e}"
            );
        }
    }
}

#[test]
fn t_is_invariant_under_contrast_scaling() {
    for seed in 60..75u64 {
        let instance = random_test_instance(seed, 2);
        let (x, y) = build_design(&instance.data);
        let beta = fit(&x, &y).unwrap();
        let variance = estimate_variance(&residuals(&x, &beta, &y).unwrap(), x.parameters()).unwrap();
        let base = t_statistics(&instance.contrasts, &beta, &x, &variance).unwrap();

        let scaled_contrast = ContrastTensor::new(
            Tensor::new(
                instance.contrasts.values().shape().to_vec(),
                instance
                    .contrasts
                    .values()
                    .data()
                    .iter()
                    .map(|v| 4.0 * v)
                    .collect(),
            )
            .unwrap(),
        )
        .unwrap();
        let scaled = t_statistics(&scaled_contrast, &beta, &x, &variance).unwrap();
        let deviation = scaled_deviation(&base.t, &scaled.t);
        assert!(deviation <= 1e-10, "seed {seed}: t moved by {deviation:e}");
        // The numerator and standard error both scale by 4.
        for (a, b) in base.g.iter().zip(&scaled.g) {
            assert!((4.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}

#[test]
fn f_equals_t_squared_for_one_hypothesis() {
    for seed in 90..110u64 {
        let instance = random_test_instance(seed, 1);
        let (x, y) = build_design(&instance.data);
        let beta = fit(&x, &y).unwrap();
        let variance = estimate_variance(&residuals(&x, &beta, &y).unwrap(), x.parameters()).unwrap();
        let t = t_statistics(&instance.contrasts, &beta, &x, &variance).unwrap().t[0];
        let f = f_statistic(&instance.contrasts, &beta, &x, &variance).unwrap();
        assert!(
            (f - t * t).abs() <= 1e-10 * (t * t).abs().max(1.0),
            "seed {seed}: F = {f} but t^2 = {}",
            t * t
        );
    }
}

#[test]
fn tensor_t_matches_conventional_t() {
    for seed in 120..150u64 {
        let instance = random_test_instance(seed, 2);
        let (x, y) = build_design(&instance.data);
        let beta = fit(&x, &y).unwrap();
        let variance = estimate_variance(&residuals(&x, &beta, &y).unwrap(), x.parameters()).unwrap();
        let tensor = t_statistics(&instance.contrasts, &beta, &x, &variance).unwrap();

        let sys = build_staggered(&instance.data);
        let flat = fit_staggered(&sys).unwrap();
        let flat_variance = residual_variance(&sys, &flat).unwrap();
        let conventional =
            conventional_t_statistics(&sys, &flat, &instance.contrasts, flat_variance.pooled)
                .unwrap();

        let conventional_t: Vec<f64> = conventional.iter().map(|c| c.t).collect();
        let deviation = scaled_deviation(&tensor.t, &conventional_t);
        assert!(
            deviation <= 1e-9,
            "seed {seed}: t statistics disagree by {deviation:e}"
        );
    }
}

#[test]
fn tensor_f_matches_staggered_covariance_route() {
    for seed in 160..180u64 {
        let instance = random_test_instance(seed, 2);
        let (x, y) = build_design(&instance.data);
        let beta = fit(&x, &y).unwrap();
        let variance = estimate_variance(&residuals(&x, &beta, &y).unwrap(), x.parameters()).unwrap();
        let f_tensor = f_statistic(&instance.contrasts, &beta, &x, &variance).unwrap();

        let sys = build_staggered(&instance.data);
        let flat = fit_staggered(&sys).unwrap();
        let flat_variance = residual_variance(&sys, &flat).unwrap();
        let f_flat =
            conventional_f_statistic(&sys, &flat, &instance.contrasts, flat_variance.pooled)
                .unwrap();
        assert!(
            (f_tensor - f_flat).abs() <= 1e-9 * f_tensor.abs().max(1.0),
            "seed {seed}: F disagreement: {f_tensor} vs {f_flat}"
        );
    }
}
