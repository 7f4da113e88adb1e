//! Storage and operation-count measurements: tensor versus staggered.
//!
//! For every sweep point (group count x regressor count x samples per
//! group) the benchmark generates one synthetic dataset, builds both
//! design structures, fits both backends with instrumented arithmetic, and
//! records stored elements, nonzero elements, exact per-stage FLOP counts,
//! median wall time, and the coefficient deviation between the backends.
//!
//! Counts are exact and deterministic for a fixed seed; wall times are the
//! only column expected to vary between runs.

use std::fmt;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::count::{FitCounts, OpCounter};
use crate::glm::{build_design, fit_counted, Dataset};
use crate::staggered::{build_staggered, fit_staggered_counted, flat_to_beta};

/// Threshold above which the two backends are considered to disagree.
pub const BETA_DEVIATION_LIMIT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Tensor,
    Staggered,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Tensor => write!(f, "tensor"),
            Backend::Staggered => write!(f, "staggered"),
        }
    }
}

/// Sweep definition: the cartesian product of the three axes.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub group_counts: Vec<usize>,
    pub regressor_counts: Vec<usize>,
    pub samples_per_group: Vec<usize>,
    pub seed: u64,
    pub repetitions: usize,
    /// Test hook: copy regressor 0 into every other regressor column,
    /// forcing a singular fit whenever there are two or more regressors.
    pub duplicate_regressors: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            group_counts: vec![1, 2, 4, 8],
            regressor_counts: vec![1],
            samples_per_group: vec![32],
            seed: 7,
            repetitions: 3,
            duplicate_regressors: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    Ok,
    Failed(String),
}

impl RowStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RowStatus::Ok)
    }
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowStatus::Ok => write!(f, "ok"),
            RowStatus::Failed(reason) => write!(f, "failed: {reason}"),
        }
    }
}

/// One sweep point under one backend.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub groups: usize,
    pub regressors: usize,
    pub samples: usize,
    pub backend: Backend,
    pub stored: u64,
    pub nonzero: u64,
    pub build: OpCounter,
    pub solve: OpCounter,
    pub median_seconds: f64,
    /// Max coefficient deviation against the other backend, scale-relative;
    /// absent when either backend failed.
    pub beta_max_rel_dev: Option<f64>,
    pub status: RowStatus,
}

impl BenchRow {
    pub fn total_flops(&self) -> u64 {
        self.build.total() + self.solve.total()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

/// Closed-form stored/nonzero element counts for one backend's design
/// structure. Nonzero counts assume no regressor value happens to be zero.
pub fn count_elements(
    backend: Backend,
    groups: usize,
    parameters: usize,
    group_sizes: &[usize],
) -> (u64, u64) {
    let total: usize = group_sizes.iter().sum();
    let nonzero = (total * parameters) as u64;
    let stored = match backend {
        Backend::Staggered => (total * parameters * groups) as u64,
        Backend::Tensor => {
            let k_max = group_sizes.iter().copied().max().unwrap_or(0);
            (k_max * parameters * groups) as u64
        }
    };
    (stored, nonzero)
}

/// Max entry deviation between two equal-length vectors, relative to the
/// larger of 1 and the largest entry magnitude on either side.
pub fn max_relative_deviation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "vectors must have equal length");
    let scale = a
        .iter()
        .chain(b)
        .fold(1.0_f64, |acc, v| acc.max(v.abs()));
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0_f64, f64::max)
        / scale
}

/// Seeded synthetic dataset: regressors uniform on [-1, 1], outcomes from
/// a per-group standard-normal truth vector plus unit-variance noise.
pub fn synthetic_dataset(
    rng: &mut ChaCha12Rng,
    groups: usize,
    regressors: usize,
    samples_per_group: usize,
    duplicate_regressors: bool,
) -> Dataset {
    let total = groups * samples_per_group;
    let mut outcomes = Vec::with_capacity(total);
    let mut regressor_rows = Vec::with_capacity(total);
    let mut group_ids = Vec::with_capacity(total);
    for group in 0..groups {
        let truth: Vec<f64> = (0..=regressors)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        for _ in 0..samples_per_group {
            let mut row: Vec<f64> = (0..regressors)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            if duplicate_regressors {
                for j in 1..regressors {
                    row[j] = row[0];
                }
            }
            let noise: f64 = rng.sample(StandardNormal);
            let mut y = truth[0] + noise;
            for (j, &x) in row.iter().enumerate() {
                y += truth[j + 1] * x;
            }
            outcomes.push(y);
            regressor_rows.push(row);
            group_ids.push(group);
        }
    }
    Dataset::new(outcomes, regressor_rows, group_ids, groups)
        .expect("generator satisfies dataset invariants")
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("durations are finite"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn count_nonzero(values: &[f64]) -> u64 {
    values.iter().filter(|v| **v != 0.0).count() as u64
}

struct BackendRun {
    stored: u64,
    nonzero: u64,
    counts: FitCounts,
    median_seconds: f64,
    beta: Option<Vec<f64>>,
    error: Option<String>,
}

fn run_tensor(data: &Dataset, repetitions: usize) -> BackendRun {
    let (x, y) = build_design(data);
    let stored = x.values().len() as u64;
    let nonzero = count_nonzero(x.values().data());
    let mut durations = Vec::with_capacity(repetitions);
    let mut outcome: Result<(Vec<f64>, FitCounts), String> = Err("no repetitions ran".into());
    let mut counts_stable = true;
    for rep in 0..repetitions {
        let start = Instant::now();
        let result = fit_counted(&x, &y);
        durations.push(start.elapsed().as_secs_f64());
        match result {
            Ok((beta, counts)) => {
                if let Ok((_, previous)) = &outcome {
                    counts_stable &= *previous == counts;
                }
                if rep == 0 || outcome.is_err() {
                    outcome = Ok((beta.values().data().to_vec(), counts));
                }
            }
            Err(err) => outcome = Err(err.to_string()),
        }
    }
    finish_backend_run(outcome, counts_stable, stored, nonzero, durations)
}

fn run_staggered(data: &Dataset, repetitions: usize) -> BackendRun {
    let sys = build_staggered(data);
    let stored = sys.design().len() as u64;
    let nonzero = count_nonzero(sys.design());
    let p = sys.parameters();
    let groups = sys.group_count();
    let mut durations = Vec::with_capacity(repetitions);
    let mut outcome: Result<(Vec<f64>, FitCounts), String> = Err("no repetitions ran".into());
    let mut counts_stable = true;
    for rep in 0..repetitions {
        let start = Instant::now();
        let result = fit_staggered_counted(&sys);
        durations.push(start.elapsed().as_secs_f64());
        match result {
            Ok((flat, counts)) => {
                if let Ok((_, previous)) = &outcome {
                    counts_stable &= *previous == counts;
                }
                if rep == 0 || outcome.is_err() {
                    let beta = flat_to_beta(&flat, p, groups)
                        .expect("fit returns a full-length vector");
                    outcome = Ok((beta.values().data().to_vec(), counts));
                }
            }
            Err(err) => outcome = Err(err.to_string()),
        }
    }
    finish_backend_run(outcome, counts_stable, stored, nonzero, durations)
}

fn finish_backend_run(
    outcome: Result<(Vec<f64>, FitCounts), String>,
    counts_stable: bool,
    stored: u64,
    nonzero: u64,
    durations: Vec<f64>,
) -> BackendRun {
    let median_seconds = median(durations);
    match outcome {
        Ok((beta, counts)) => BackendRun {
            stored,
            nonzero,
            counts,
            median_seconds,
            beta: Some(beta),
            error: if counts_stable {
                None
            } else {
                Some("operation counts varied across repetitions".into())
            },
        },
        Err(err) => BackendRun {
            stored,
            nonzero,
            counts: FitCounts::default(),
            median_seconds,
            beta: None,
            error: Some(err),
        },
    }
}

/// Runs the full sweep. Fit failures are recorded in their row's status
/// and never abort the sweep.
pub fn run_benchmark(cfg: &BenchConfig) -> BenchReport {
    assert!(cfg.repetitions >= 1, "need at least one repetition");
    assert!(
        !cfg.group_counts.is_empty()
            && !cfg.regressor_counts.is_empty()
            && !cfg.samples_per_group.is_empty(),
        "sweep axes must be nonempty"
    );
    assert!(
        cfg.group_counts.iter().all(|&g| g >= 1)
            && cfg.samples_per_group.iter().all(|&n| n >= 1),
        "group and sample counts must be positive"
    );

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    for &groups in &cfg.group_counts {
        for &regressors in &cfg.regressor_counts {
            for &samples in &cfg.samples_per_group {
                let data = synthetic_dataset(
                    &mut rng,
                    groups,
                    regressors,
                    samples,
                    cfg.duplicate_regressors,
                );
                let tensor = run_tensor(&data, cfg.repetitions);
                let staggered = run_staggered(&data, cfg.repetitions);

                let deviation = match (&tensor.beta, &staggered.beta) {
                    (Some(t), Some(s)) => Some(max_relative_deviation(t, s)),
                    _ => None,
                };
                let divergence_failure = deviation
                    .filter(|d| *d >= BETA_DEVIATION_LIMIT)
                    .map(|d| format!("backends disagree: max coefficient deviation {d:e}"));

                for (backend, run) in [
                    (Backend::Tensor, &tensor),
                    (Backend::Staggered, &staggered),
                ] {
                    let status = match (&run.error, &divergence_failure) {
                        (Some(err), _) => RowStatus::Failed(err.clone()),
                        (None, Some(msg)) => RowStatus::Failed(msg.clone()),
                        (None, None) => RowStatus::Ok,
                    };
                    rows.push(BenchRow {
                        groups,
                        regressors,
                        samples,
                        backend,
                        stored: run.stored,
                        nonzero: run.nonzero,
                        build: run.counts.build,
                        solve: run.counts.solve,
                        median_seconds: run.median_seconds,
                        beta_max_rel_dev: deviation,
                        status,
                    });
                }
            }
        }
    }
    BenchReport { rows }
}

impl BenchReport {
    /// One CSV row per sweep point and backend. The `median_seconds`
    /// column is the only one expected to differ between identical runs.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record([
                "groups",
                "regressors",
                "samples",
                "backend",
                "stored",
                "nonzero",
                "build_multiplies",
                "build_adds",
                "build_divides",
                "solve_multiplies",
                "solve_adds",
                "solve_divides",
                "total_flops",
                "median_seconds",
                "beta_max_rel_dev",
                "status",
            ])
            .expect("writing to memory");
        for row in &self.rows {
            writer
                .write_record([
                    row.groups.to_string(),
                    row.regressors.to_string(),
                    row.samples.to_string(),
                    row.backend.to_string(),
                    row.stored.to_string(),
                    row.nonzero.to_string(),
                    row.build.multiplies.to_string(),
                    row.build.adds.to_string(),
                    row.build.divides.to_string(),
                    row.solve.multiplies.to_string(),
                    row.solve.adds.to_string(),
                    row.solve.divides.to_string(),
                    row.total_flops().to_string(),
                    format!("{:.3e}", row.median_seconds),
                    row.beta_max_rel_dev
                        .map(|d| format!("{d:e}"))
                        .unwrap_or_default(),
                    row.status.to_string(),
                ])
                .expect("writing to memory");
        }
        String::from_utf8(writer.into_inner().expect("writing to memory"))
            .expect("csv output is UTF-8")
    }

    /// Human-readable aligned table.
    pub fn to_table(&self) -> String {
        let header = [
            "groups", "regr", "samples", "backend", "stored", "nonzero", "build", "solve",
            "total", "time_s", "beta_dev", "status",
        ];
        let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for row in &self.rows {
            cells.push(vec![
                row.groups.to_string(),
                row.regressors.to_string(),
                row.samples.to_string(),
                row.backend.to_string(),
                row.stored.to_string(),
                row.nonzero.to_string(),
                row.build.total().to_string(),
                row.solve.total().to_string(),
                row.total_flops().to_string(),
                format!("{:.2e}", row.median_seconds),
                row.beta_max_rel_dev
                    .map(|d| format!("{d:.2e}"))
                    .unwrap_or_else(|| "-".to_string()),
                row.status.to_string(),
            ]);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|col| cells.iter().map(|row| row[col].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &cells {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell:>w$}"))
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_counts() {
        let (stored, nonzero) = count_elements(Backend::Staggered, 2, 2, &[3, 3]);
        assert_eq!((stored, nonzero), (24, 12));
        let (stored, nonzero) = count_elements(Backend::Tensor, 2, 2, &[3, 3]);
        assert_eq!((stored, nonzero), (12, 12));
    }

    #[test]
    fn single_group_backends_store_identically() {
        let a = count_elements(Backend::Staggered, 1, 3, &[10]);
        let b = count_elements(Backend::Tensor, 1, 3, &[10]);
        assert_eq!(a, b);
    }

    #[test]
    fn closed_form_matches_built_structures() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for groups in [1usize, 2, 5] {
            let data = synthetic_dataset(&mut rng, groups, 1, 8, false);
            let (x, _) = build_design(&data);
            let sys = build_staggered(&data);

            let (stored_t, nonzero_t) =
                count_elements(Backend::Tensor, groups, 2, data.group_sizes());
            assert_eq!(stored_t, x.values().len() as u64);
            assert_eq!(nonzero_t, count_nonzero(x.values().data()));

            let (stored_s, nonzero_s) =
                count_elements(Backend::Staggered, groups, 2, data.group_sizes());
            assert_eq!(stored_s, sys.design().len() as u64);
            assert_eq!(nonzero_s, count_nonzero(sys.design()));
        }
    }

    #[test]
    fn repetitions_do_not_change_counts() {
        let mut cfg = BenchConfig {
            group_counts: vec![2],
            regressor_counts: vec![1],
            samples_per_group: vec![8],
            seed: 3,
            repetitions: 1,
            duplicate_regressors: false,
        };
        let once = run_benchmark(&cfg);
        cfg.repetitions = 3;
        let thrice = run_benchmark(&cfg);
        for (a, b) in once.rows.iter().zip(&thrice.rows) {
            assert_eq!((a.build, a.solve), (b.build, b.solve));
            assert_eq!(a.stored, b.stored);
            assert_eq!(a.nonzero, b.nonzero);
            assert!(a.status.is_ok() && b.status.is_ok());
        }
    }

    #[test]
    fn singular_point_is_flagged_and_sweep_continues() {
        let cfg = BenchConfig {
            group_counts: vec![1, 2],
            regressor_counts: vec![2],
            samples_per_group: vec![8],
            seed: 5,
            repetitions: 1,
            duplicate_regressors: true,
        };
        let report = run_benchmark(&cfg);
        assert_eq!(report.rows.len(), 4);
        assert!(report.rows.iter().all(|r| !r.status.is_ok()));
        assert!(report.rows.iter().all(|r| r.beta_max_rel_dev.is_none()));
    }

    #[test]
    fn deviation_is_scale_relative() {
        let a = [1.0, 2.0];
        let b = [1.0, 2.0 + 2e-9];
        let dev = max_relative_deviation(&a, &b);
        assert!((dev - 1e-9).abs() < 1e-12);
    }

    #[test]
    fn csv_report_has_header_and_rows() {
        let cfg = BenchConfig {
            group_counts: vec![1],
            regressor_counts: vec![0],
            samples_per_group: vec![4],
            seed: 1,
            repetitions: 1,
            duplicate_regressors: false,
        };
        let report = run_benchmark(&cfg);
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("groups,regressors,samples,backend"));
    }
}
