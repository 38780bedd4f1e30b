//! Metric bounds computed against an approximate ground truth refinement,
//! the ε̂ selection policy, the over-fit litmus test, and side-by-side model
//! comparison.
//!
//! Given a predicted clustering `C`, an AGTR `R̂`, and an error allowance
//! `ε̂`, the precision of `C` against the (unknown) reference clustering is
//! bounded below by `Precision(C, R̂) − ε̂/m`, and recall and accuracy are
//! bounded above by `Recall(C, R̂) + ε̂/m`, provided `ε̂` is at least the
//! number of construction errors in `R̂`.

use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::metrics::MetricValue;

/// Default ε̂ rate: one percent of the dataset size.
pub const DEFAULT_EPSILON_RATE: f64 = 0.01;

/// `ceil(rate · m)` with protection against f64 representation noise in
/// `rate`: products within a few ulps of an integer are treated as exact,
/// so e.g. `rate = 0.01, m = 100` yields 1 rather than 2.
pub(crate) fn ceil_fraction(rate: f64, m: u64) -> u64 {
    let scaled = rate * m as f64;
    let nearest = scaled.round();
    if (scaled - nearest).abs() <= scaled.abs() * f64::EPSILON * 4.0 {
        nearest as u64
    } else {
        scaled.ceil() as u64
    }
}

/// ε̂ for a dataset of `m` samples at the default one-percent rate.
pub fn default_epsilon_hat(m: u64) -> u64 {
    epsilon_hat_for_rate(m, DEFAULT_EPSILON_RATE)
}

/// ε̂ = `ceil(rate · m)` for a caller-chosen error rate in (0, 1].
pub fn epsilon_hat_for_rate(m: u64, rate: f64) -> u64 {
    assert!(m >= 1, "dataset must be non-empty");
    assert!(rate > 0.0 && rate <= 1.0, "rate must lie in (0, 1]");
    ceil_fraction(rate, m)
}

/// Which bounds were clamped into [0, 1], with the raw values preserved
/// for auditing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampedFlags {
    /// True when the raw precision lower bound fell below 0.
    pub precision_lower_clamped: bool,
    /// True when the raw recall upper bound rose above 1.
    pub recall_upper_clamped: bool,
    /// `Precision(C, R̂) − ε̂/m` before clamping.
    pub precision_lower_raw: f64,
    /// `Recall(C, R̂) + ε̂/m` before clamping.
    pub recall_upper_raw: f64,
}

/// AGTR-derived metric bounds for one predicted clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Universe size.
    pub m: u64,
    /// The error allowance the bounds were computed with.
    pub epsilon_hat: u64,
    /// Raw precision of the candidate against the AGTR.
    pub precision_agtr: MetricValue,
    /// Raw recall of the candidate against the AGTR.
    pub recall_agtr: MetricValue,
    /// `max(0, Precision(C, R̂) − ε̂/m)`.
    pub precision_lower_bound: f64,
    /// `min(1, Recall(C, R̂) + ε̂/m)`.
    pub recall_upper_bound: f64,
    /// Equals the recall upper bound.
    pub accuracy_upper_bound: f64,
    /// Clamping flags plus the unclamped values.
    pub clamped_flags: ClampedFlags,
}

impl BoundReport {
    /// Assembles a report from already-computed AGTR metrics.
    pub fn from_metrics(precision_agtr: MetricValue, recall_agtr: MetricValue, epsilon_hat: u64) -> Self {
        let m = precision_agtr.den;
        let slack = epsilon_hat as f64 / m as f64;
        let precision_lower_raw = precision_agtr.value - slack;
        let recall_upper_raw = recall_agtr.value + slack;
        let precision_lower_bound = precision_lower_raw.max(0.0);
        let recall_upper_bound = recall_upper_raw.min(1.0);
        BoundReport {
            m,
            epsilon_hat,
            precision_agtr,
            recall_agtr,
            precision_lower_bound,
            recall_upper_bound,
            accuracy_upper_bound: recall_upper_bound,
            clamped_flags: ClampedFlags {
                precision_lower_clamped: precision_lower_raw < 0.0,
                recall_upper_clamped: recall_upper_raw > 1.0,
                precision_lower_raw,
                recall_upper_raw,
            },
        }
    }
}

/// Computes the AGTR bound report for predicted clustering `c` against the
/// AGTR `r_hat` with error allowance `epsilon_hat`.
pub fn agtr_bounds(c: &Clustering, r_hat: &Clustering, epsilon_hat: u64) -> Result<BoundReport> {
    let table = crate::clustering::contingency(c, r_hat)?;
    Ok(BoundReport::from_metrics(
        crate::metrics::precision_from_table(&table),
        crate::metrics::recall_from_table(&table),
        epsilon_hat,
    ))
}

/// Metrics reported by some prior evaluation on a reference dataset,
/// to be checked against AGTR bounds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportedMetrics {
    /// Name of the reference dataset the metrics came from.
    #[serde(default)]
    pub source_dataset: Option<String>,
    /// Reported precision, if any.
    #[serde(default)]
    pub precision: Option<f64>,
    /// Reported recall, if any.
    #[serde(default)]
    pub recall: Option<f64>,
    /// Reported accuracy, if any.
    #[serde(default)]
    pub accuracy: Option<f64>,
}

impl ReportedMetrics {
    /// Rejects values outside [0, 1].
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("precision", self.precision),
            ("recall", self.recall),
            ("accuracy", self.accuracy),
        ] {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::UniverseMismatch {
                        detail: format!("reported {name} {v} is outside [0, 1]"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Per-metric outcome of the litmus test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LitmusStatus {
    /// The reported value respects the AGTR bound.
    Consistent,
    /// The reported value violates the AGTR bound.
    SuspectOverfit,
    /// No value was reported for this metric.
    NotTested,
}

/// Status and signed margin (`reported − bound`) for one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVerdict {
    /// Consistency status.
    pub status: LitmusStatus,
    /// `reported − bound`; absent when the metric was not tested.
    pub margin: Option<f64>,
}

/// Outcome of the over-fit litmus test for one set of reported metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LitmusVerdict {
    /// Reported precision vs the precision lower bound.
    pub precision: MetricVerdict,
    /// Reported recall vs the recall upper bound.
    pub recall: MetricVerdict,
    /// Reported accuracy vs the accuracy upper bound.
    pub accuracy: MetricVerdict,
}

impl LitmusVerdict {
    /// True when any tested metric violated its bound.
    pub fn any_suspect(&self) -> bool {
        [self.precision, self.recall, self.accuracy]
            .iter()
            .any(|v| v.status == LitmusStatus::SuspectOverfit)
    }
}

/// Tests previously reported metrics against AGTR bounds. A reported
/// precision strictly below the lower bound, or a reported recall or
/// accuracy strictly above the upper bound, is flagged as suspect
/// over-fitting of the original evaluation.
pub fn litmus_test(reported: &ReportedMetrics, bounds: &BoundReport) -> LitmusVerdict {
    let check_lower = |value: Option<f64>, bound: f64| match value {
        None => MetricVerdict {
            status: LitmusStatus::NotTested,
            margin: None,
        },
        Some(v) => MetricVerdict {
            status: if bound > v {
                LitmusStatus::SuspectOverfit
            } else {
                LitmusStatus::Consistent
            },
            margin: Some(v - bound),
        },
    };
    let check_upper = |value: Option<f64>, bound: f64| match value {
        None => MetricVerdict {
            status: LitmusStatus::NotTested,
            margin: None,
        },
        Some(v) => MetricVerdict {
            status: if bound < v {
                LitmusStatus::SuspectOverfit
            } else {
                LitmusStatus::Consistent
            },
            margin: Some(v - bound),
        },
    };
    LitmusVerdict {
        precision: check_lower(reported.precision, bounds.precision_lower_bound),
        recall: check_upper(reported.recall, bounds.recall_upper_bound),
        accuracy: check_upper(reported.accuracy, bounds.accuracy_upper_bound),
    }
}

/// A bound report tagged with the candidate model's name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedBoundReport {
    /// Candidate name as supplied by the caller.
    pub name: String,
    /// Bounds for that candidate.
    pub report: BoundReport,
}

/// Computes bound reports for several candidate clusterings against one
/// AGTR with a shared ε̂. Callers assert that the candidates are
/// intrinsically similar models; output order follows input order.
pub fn compare_bounds(
    candidates: &[(String, Clustering)],
    r_hat: &Clustering,
    epsilon_hat: u64,
) -> Result<Vec<NamedBoundReport>> {
    candidates
        .iter()
        .map(|(name, c)| {
            Ok(NamedBoundReport {
                name: name.clone(),
                report: agtr_bounds(c, r_hat, epsilon_hat)?,
            })
        })
        .collect()
}
