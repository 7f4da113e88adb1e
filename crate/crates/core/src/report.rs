//! Structured run reports: JSON on disk, lossless round-trip.
//!
//! Reports serialize with stable field order, so
//! serialize -> parse -> serialize is byte-identical. Statistics that can
//! be non-finite (t, p) are stored as options and become `null`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// One input file and the SHA-256 of its raw bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn for_file(path: &Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        let digest = Sha256::digest(&bytes);
        let mut hex = String::with_capacity(64);
        for byte in digest {
            write!(hex, "{byte:02x}").expect("writing to string");
        }
        Ok(Self {
            path: path.display().to_string(),
            sha256: hex,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelColumns {
    pub outcome: String,
    pub regressors: Vec<String>,
    pub group: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub label: String,
    pub samples: u64,
    /// Per-group residual variance; absent when the group has no spare
    /// degrees of freedom.
    pub sigma2: Option<f64>,
    pub coefficients: Vec<Coefficient>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSummary {
    pub hypothesis: u64,
    pub g: f64,
    pub standard_error: f64,
    /// None when the statistic is not finite (e.g. zero residual variance).
    pub t: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FSummary {
    pub f: f64,
    pub df_numerator: u64,
    pub df_denominator: u64,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub beta_max_rel_dev: f64,
    pub t_max_rel_dev: Option<f64>,
    pub passed: bool,
}

/// Everything a `fit` or `test` run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub backend: String,
    pub inputs: Vec<InputDigest>,
    pub model: ModelColumns,
    pub groups: Vec<GroupSummary>,
    pub pooled_sigma2: f64,
    pub residual_df: u64,
    pub hypotheses: Option<Vec<HypothesisSummary>>,
    pub f_test: Option<FSummary>,
    pub cross_check: Option<CrossCheck>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("report contains only finite floats");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Wraps a possibly non-finite statistic for serialization.
pub fn finite_or_none(value: f64) -> Option<f64> {
    value.is_finite().then_some(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> RunReport {
        RunReport {
            command: "test".into(),
            backend: "both".into(),
            inputs: vec![InputDigest {
                path: "data.csv".into(),
                sha256: "ab".repeat(32),
            }],
            model: ModelColumns {
                outcome: "y".into(),
                regressors: vec!["x".into()],
                group: "g".into(),
            },
            groups: vec![GroupSummary {
                label: "ctrl".into(),
                samples: 4,
                sigma2: Some(0.25),
                coefficients: vec![
                    Coefficient {
                        name: "intercept".into(),
                        value: 1.0,
                    },
                    Coefficient {
                        name: "x".into(),
                        value: 2.0,
                    },
                ],
            }],
            pooled_sigma2: 0.25,
            residual_df: 2,
            hypotheses: Some(vec![HypothesisSummary {
                hypothesis: 0,
                g: 2.0,
                standard_error: 0.5,
                t: Some(4.0),
                p: Some(0.057),
            }]),
            f_test: None,
            cross_check: Some(CrossCheck {
                beta_max_rel_dev: 1.2e-15,
                t_max_rel_dev: Some(3.4e-14),
                passed: true,
            }),
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let report = sample_report();
        let first = report.to_json();
        let parsed = RunReport::from_json(&first).unwrap();
        assert_eq!(parsed, report);
        assert_eq!(parsed.to_json(), first);
    }

    #[test]
    fn non_finite_becomes_none() {
        assert_eq!(finite_or_none(f64::INFINITY), None);
        assert_eq!(finite_or_none(f64::NAN), None);
        assert_eq!(finite_or_none(1.5), Some(1.5));
    }

    #[test]
    fn digest_matches_known_vector() {
        let file = {
            use std::io::Write;
            let mut f = tempfile::NamedTempFile::new().unwrap();
            f.write_all(b"abc").unwrap();
            f.flush().unwrap();
            f
        };
        let digest = InputDigest::for_file(file.path()).unwrap();
        assert_eq!(
            digest.sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
