//! Incremental shuffle test: progressively randomizes cluster memberships
//! and checks that the AGTR bounds degrade with a strong negative Pearson
//! correlation, the precondition for comparing similar models by their
//! bounds.
//!
//! One run visits every sample exactly once in a seeded random order and
//! reassigns it to a cluster drawn from the *original* cluster-size
//! distribution (weights frozen at the start; self-assignment permitted).
//! Bounds are recorded at fraction 0 and after each `⌈interval·m⌉` moves.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::bounds::{ceil_fraction, BoundReport};
use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::metrics::MetricValue;

/// Default correlation threshold for the pass flag.
pub const DEFAULT_CORRELATION_THRESHOLD: f64 = -0.9;

/// Bounds observed at one shuffle checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShuffleRecord {
    /// Fraction of samples reassigned so far, in [0, 1].
    pub shuffle_fraction: f64,
    /// Precision lower bound at this point.
    pub precision_lower_bound: f64,
    /// Recall upper bound at this point.
    pub recall_upper_bound: f64,
}

/// Runs the incremental shuffle of `c` against the AGTR `r_hat`.
///
/// Deterministic per `(c, r_hat, epsilon_hat, interval, seed)`; the record
/// at fraction 0 equals `agtr_bounds(c, r_hat, epsilon_hat)` exactly.
pub fn shuffle_run(
    c: &Clustering,
    r_hat: &Clustering,
    epsilon_hat: u64,
    interval: f64,
    seed: u64,
) -> Result<Vec<ShuffleRecord>> {
    assert!(
        interval > 0.0 && interval <= 1.0,
        "interval must lie in (0, 1]"
    );
    c.require_same_universe(r_hat)?;
    let m = c.universe_size();
    let ids = c.sorted_ids();

    // Integer index views of both clusterings, plus the frozen size-weighted
    // sampler: a uniform draw in [0, m) mapped through cumulative sizes.
    let mut c_assign: Vec<u32> = Vec::with_capacity(m);
    let mut r_assign: Vec<u32> = Vec::with_capacity(m);
    for id in &ids {
        c_assign.push(c.cluster_index_of(id).expect("same universe"));
        r_assign.push(r_hat.cluster_index_of(id).expect("same universe"));
    }
    let mut cumulative_sizes: Vec<u64> = Vec::with_capacity(c.cluster_count());
    let mut running = 0u64;
    for idx in 0..c.cluster_count() {
        running += c.members_at(idx).len() as u64;
        cumulative_sizes.push(running);
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);

    let step = (ceil_fraction(interval, m as u64) as usize).max(1);
    let mut records = Vec::with_capacity(m / step + 2);
    let c_clusters = c.cluster_count();
    let r_clusters = r_hat.cluster_count();
    records.push(record_at(&c_assign, &r_assign, c_clusters, r_clusters, epsilon_hat, 0, m));

    for (moves_done, &sample) in order.iter().enumerate() {
        let draw = rng.random_range(0..m as u64);
        let target = cumulative_sizes.partition_point(|&cum| cum <= draw) as u32;
        c_assign[sample] = target;
        let done = moves_done + 1;
        if done % step == 0 || done == m {
            records.push(record_at(
                &c_assign,
                &r_assign,
                c_clusters,
                r_clusters,
                epsilon_hat,
                done,
                m,
            ));
        }
    }
    Ok(records)
}

/// Bounds of the working assignment against the AGTR, computed over the
/// integer index views. Matches the `agtr_bounds` arithmetic bit for bit.
fn record_at(
    c_assign: &[u32],
    r_assign: &[u32],
    c_clusters: usize,
    r_clusters: usize,
    epsilon_hat: u64,
    moves_done: usize,
    m: usize,
) -> ShuffleRecord {
    let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
    for (&ci, &ri) in c_assign.iter().zip(r_assign) {
        *counts.entry((ci, ri)).or_insert(0) += 1;
    }
    let mut row_max = vec![0u64; c_clusters];
    let mut col_max = vec![0u64; r_clusters];
    for (&(ci, ri), &n) in &counts {
        row_max[ci as usize] = row_max[ci as usize].max(n);
        col_max[ri as usize] = col_max[ri as usize].max(n);
    }
    let report = BoundReport::from_metrics(
        MetricValue::new(row_max.iter().sum(), m as u64),
        MetricValue::new(col_max.iter().sum(), m as u64),
        epsilon_hat,
    );
    ShuffleRecord {
        shuffle_fraction: moves_done as f64 / m as f64,
        precision_lower_bound: report.precision_lower_bound,
        recall_upper_bound: report.recall_upper_bound,
    }
}

/// Pearson correlations between shuffle fraction and each bound series,
/// with two-sided p-values from the Student-t transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    /// Pearson r of (fraction, precision lower bound).
    pub r_precision: f64,
    /// Pearson r of (fraction, recall upper bound).
    pub r_recall: f64,
    /// Two-sided p-value for `r_precision`.
    pub p_precision: f64,
    /// Two-sided p-value for `r_recall`.
    pub p_recall: f64,
    /// Number of records correlated.
    pub n_points: usize,
    /// Threshold both correlations must not exceed.
    pub threshold: f64,
    /// True iff both correlations are at or below the threshold.
    pub pass: bool,
}

/// Formats a p-value, reporting underflowed values as `< 1e-300`.
pub fn format_p_value(p: f64) -> String {
    if p < 1e-300 {
        "< 1e-300".to_string()
    } else {
        format!("{p:.3e}")
    }
}

/// Correlates shuffle fraction against both bound series.
///
/// Requires at least three records and nonzero variance in each bound
/// series; a constant series is reported as [`Error::DegenerateSeries`]
/// rather than silently passing.
pub fn correlation_test(records: &[ShuffleRecord], threshold: f64) -> Result<CorrelationReport> {
    if records.len() < 3 {
        return Err(Error::TooFewRecords {
            found: records.len(),
        });
    }
    let fractions: Vec<f64> = records.iter().map(|r| r.shuffle_fraction).collect();
    let precision_series: Vec<f64> = records.iter().map(|r| r.precision_lower_bound).collect();
    let recall_series: Vec<f64> = records.iter().map(|r| r.recall_upper_bound).collect();

    let r_precision = pearson(&fractions, &precision_series)
        .ok_or(Error::DegenerateSeries {
            series: "precision lower bound",
        })?;
    let r_recall = pearson(&fractions, &recall_series).ok_or(Error::DegenerateSeries {
        series: "recall upper bound",
    })?;

    let n = records.len();
    let report = CorrelationReport {
        r_precision,
        r_recall,
        p_precision: two_sided_p(r_precision, n),
        p_recall: two_sided_p(r_recall, n),
        n_points: n,
        threshold,
        pass: r_precision <= threshold && r_recall <= threshold,
    };
    Ok(report)
}

/// Pearson correlation coefficient; `None` when either series is constant.
fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut ss_x = 0.0;
    let mut ss_y = 0.0;
    let mut cov = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        ss_x += dx * dx;
        ss_y += dy * dy;
        cov += dx * dy;
    }
    if ss_x == 0.0 || ss_y == 0.0 {
        return None;
    }
    Some((cov / (ss_x.sqrt() * ss_y.sqrt())).clamp(-1.0, 1.0))
}

/// Two-sided p-value of a Pearson r over `n` points via
/// `t = r·sqrt((n−2)/(1−r²))` against Student-t with `n−2` degrees of
/// freedom. Perfect correlations yield 0.
fn two_sided_p(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = r.abs() * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    (2.0 * (1.0 - dist.cdf(t))).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::agtr_bounds;
    use crate::refinement::random_refinement;

    fn clustering(spec: &[(&str, &[&str])]) -> Clustering {
        let pairs: Vec<(String, String)> = spec
            .iter()
            .flat_map(|(name, ids)| {
                ids.iter()
                    .map(|id| (id.to_string(), name.to_string()))
                    .collect::<Vec<_>>()
            })
            .collect();
        Clustering::from_assignments(pairs).unwrap()
    }

    /// 20 samples across 4 planted families plus a refinement AGTR.
    fn planted() -> (Clustering, Clustering) {
        let c = Clustering::from_assignments(
            (0..20).map(|i| (format!("s{i}"), format!("f{}", i / 5))),
        )
        .unwrap();
        let r_hat = random_refinement(&c, 0.4, 11);
        (c, r_hat)
    }

    #[test]
    fn first_record_matches_agtr_bounds() {
        let (c, r_hat) = planted();
        let records = shuffle_run(&c, &r_hat, 2, 0.25, 3).unwrap();
        let baseline = agtr_bounds(&c, &r_hat, 2).unwrap();
        assert_eq!(records[0].shuffle_fraction, 0.0);
        assert_eq!(records[0].precision_lower_bound, baseline.precision_lower_bound);
        assert_eq!(records[0].recall_upper_bound, baseline.recall_upper_bound);
    }

    #[test]
    fn record_count_arithmetic() {
        let c = Clustering::from_assignments(
            (0..1000).map(|i| (format!("s{i}"), format!("f{}", i / 10))),
        )
        .unwrap();
        let r_hat = random_refinement(&c, 0.5, 5);
        let records = shuffle_run(&c, &r_hat, 10, 0.01, 7).unwrap();
        assert_eq!(records.len(), 101);
        assert_eq!(records[0].shuffle_fraction, 0.0);
        assert_eq!(records[100].shuffle_fraction, 1.0);
        for pair in records.windows(2) {
            assert!(pair[0].shuffle_fraction < pair[1].shuffle_fraction);
        }
    }

    #[test]
    fn partial_final_step_still_recorded() {
        let c = Clustering::from_assignments(
            (0..7).map(|i| (format!("s{i}"), format!("f{i}"))),
        )
        .unwrap();
        let records = shuffle_run(&c, &c, 0, 0.3, 1).unwrap();
        // step = ceil(0.3·7) = 3 -> records at 0, 3, 6, 7 moves
        assert_eq!(records.len(), 4);
        assert_eq!(records.last().unwrap().shuffle_fraction, 1.0);
    }

    #[test]
    fn runs_are_deterministic() {
        let (c, r_hat) = planted();
        let a = shuffle_run(&c, &r_hat, 1, 0.1, 99).unwrap();
        let b = shuffle_run(&c, &r_hat, 1, 0.1, 99).unwrap();
        assert_eq!(a, b);
        let other_seed = shuffle_run(&c, &r_hat, 1, 0.1, 100).unwrap();
        assert_ne!(a, other_seed);
    }

    #[test]
    fn universe_mismatch_rejected() {
        let c = clustering(&[("a", &["1", "2"])]);
        let r = clustering(&[("a", &["1", "3"])]);
        assert!(shuffle_run(&c, &r, 0, 0.5, 1).is_err());
    }

    #[test]
    fn linear_series_correlates_perfectly() {
        let records: Vec<ShuffleRecord> = (0..11)
            .map(|i| ShuffleRecord {
                shuffle_fraction: i as f64 / 10.0,
                precision_lower_bound: 1.0 - i as f64 / 10.0,
                recall_upper_bound: 1.0 - i as f64 / 20.0,
            })
            .collect();
        let report = correlation_test(&records, -0.9).unwrap();
        assert!((report.r_precision + 1.0).abs() < 1e-12);
        assert!((report.r_recall + 1.0).abs() < 1e-12);
        assert!(report.pass);
        assert_eq!(report.p_precision, 0.0);
    }

    #[test]
    fn increasing_series_fails() {
        let records: Vec<ShuffleRecord> = (0..11)
            .map(|i| ShuffleRecord {
                shuffle_fraction: i as f64 / 10.0,
                precision_lower_bound: i as f64 / 10.0,
                recall_upper_bound: i as f64 / 10.0,
            })
            .collect();
        let report = correlation_test(&records, -0.9).unwrap();
        assert!((report.r_precision - 1.0).abs() < 1e-12);
        assert!(!report.pass);
    }

    #[test]
    fn constant_series_is_degenerate() {
        let records: Vec<ShuffleRecord> = (0..5)
            .map(|i| ShuffleRecord {
                shuffle_fraction: i as f64 / 4.0,
                precision_lower_bound: 0.5,
                recall_upper_bound: 1.0 - i as f64 / 8.0,
            })
            .collect();
        assert!(matches!(
            correlation_test(&records, -0.9),
            Err(Error::DegenerateSeries { .. })
        ));
    }

    #[test]
    fn too_few_records_rejected() {
        let records = vec![
            ShuffleRecord {
                shuffle_fraction: 0.0,
                precision_lower_bound: 1.0,
                recall_upper_bound: 1.0,
            };
            2
        ];
        assert!(matches!(
            correlation_test(&records, -0.9),
            Err(Error::TooFewRecords { found: 2 })
        ));
    }

    #[test]
    fn p_value_matches_reference() {
        // expected values frozen from an independent statistics package
        let records: Vec<ShuffleRecord> = vec![
            (0.0, 0.95, 1.00),
            (0.1, 0.90, 0.97),
            (0.2, 0.88, 0.96),
            (0.3, 0.70, 0.88),
            (0.4, 0.80, 0.92),
            (0.5, 0.62, 0.80),
            (0.6, 0.65, 0.85),
            (0.7, 0.50, 0.70),
            (0.8, 0.58, 0.78),
            (0.9, 0.40, 0.62),
            (1.0, 0.42, 0.65),
        ]
        .into_iter()
        .map(|(f, p, r)| ShuffleRecord {
            shuffle_fraction: f,
            precision_lower_bound: p,
            recall_upper_bound: r,
        })
        .collect();
        let report = correlation_test(&records, -0.9).unwrap();
        assert!((report.r_precision - -0.9582149997713991).abs() < 1e-12);
        assert!((report.r_recall - -0.943902050665911).abs() < 1e-12);
        assert!((report.p_precision - 3.434141639481235e-6).abs() < 1e-14);
        assert!((report.p_recall - 1.2659657198850306e-5).abs() < 1e-13);
        assert!(report.pass);
    }

    #[test]
    fn p_value_formatting() {
        assert_eq!(format_p_value(0.0), "< 1e-300");
        assert_eq!(format_p_value(1e-310), "< 1e-300");
        assert_eq!(format_p_value(0.5), "5.000e-1");
    }

    #[test]
    fn planted_corpus_correlates_negatively() {
        let c = Clustering::from_assignments(
            (0..600).map(|i| (format!("s{i}"), format!("f{}", i / 12))),
        )
        .unwrap();
        let r_hat = random_refinement(&c, 0.3, 21);
        let records = shuffle_run(&c, &r_hat, 6, 0.02, 17).unwrap();
        let report = correlation_test(&records, -0.9).unwrap();
        assert!(report.r_precision <= -0.9, "r_p = {}", report.r_precision);
        assert!(report.r_recall <= -0.9, "r_r = {}", report.r_recall);
        assert!(report.pass);
    }
}
