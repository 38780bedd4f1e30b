//! Cluster validity metrics: precision, recall, accuracy, and the argmax
//! cluster mappings between two partitions.
//!
//! Precision sums, over each predicted cluster, its largest overlap with any
//! reference cluster; recall is the dual over reference clusters. Both are
//! reported as exact integer numerators over `m` so downstream bound checks
//! never depend on floating-point rounding.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::clustering::{contingency, Clustering, ContingencyTable, Labeling};
use crate::error::Result;

/// A metric value in (0, 1] carried with its exact integer ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    /// Exact numerator (an overlap or match count).
    pub num: u64,
    /// Denominator: the universe size `m`.
    pub den: u64,
    /// `num / den` as a double.
    pub value: f64,
}

impl MetricValue {
    /// Builds the ratio `num / den`.
    pub fn new(num: u64, den: u64) -> Self {
        MetricValue {
            num,
            den,
            value: num as f64 / den as f64,
        }
    }
}

/// Which direction a [`ClusterMapping`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MappingDirection {
    /// Source clusters are the predicted side, targets the reference side.
    PredictedToReference,
    /// Source clusters are the reference side, targets the predicted side.
    ReferenceToPredicted,
}

/// Total mapping sending each source cluster to the target cluster with
/// which it has maximal overlap (ties broken by lexicographically smallest
/// target name).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterMapping {
    /// Declared orientation of the mapping.
    pub direction: MappingDirection,
    /// Source cluster name -> target cluster name.
    pub pairs: BTreeMap<Arc<str>, Arc<str>>,
}

/// Maps each `src` cluster to the `dst` cluster of maximal overlap.
///
/// `direction` records which role (`predicted` or `reference`) the source
/// side plays; it does not affect the computation.
pub fn cluster_mapping(
    src: &Clustering,
    dst: &Clustering,
    direction: MappingDirection,
) -> Result<ClusterMapping> {
    let table = contingency(src, dst)?;
    Ok(mapping_from_table(&table, direction))
}

fn mapping_from_table(table: &ContingencyTable, direction: MappingDirection) -> ClusterMapping {
    // Entries are row-major and sorted by target index within a row, so the
    // first strictly-greater count wins and ties keep the smallest name.
    let mut best: Vec<Option<(u64, u32)>> = vec![None; table.row_count()];
    for ((a, b), n) in table.indexed_entries() {
        let slot = &mut best[*a as usize];
        match slot {
            Some((count, _)) if *count >= *n => {}
            _ => *slot = Some((*n, *b)),
        }
    }
    let pairs = best
        .iter()
        .enumerate()
        .map(|(a, slot)| {
            let (_, b) = slot.expect("every cluster is non-empty");
            (table.a_name(a as u32).clone(), table.b_name(b).clone())
        })
        .collect();
    ClusterMapping { direction, pairs }
}

/// Precision of predicted clustering `c` against reference clustering `d`:
/// the fraction of samples covered by each predicted cluster's largest
/// overlap with a reference cluster.
pub fn precision(c: &Clustering, d: &Clustering) -> Result<MetricValue> {
    let table = contingency(c, d)?;
    Ok(precision_from_table(&table))
}

/// Recall of predicted clustering `c` against reference clustering `d`:
/// the dual of precision, summed over reference clusters.
pub fn recall(c: &Clustering, d: &Clustering) -> Result<MetricValue> {
    let table = contingency(c, d)?;
    Ok(recall_from_table(&table))
}

/// Precision read off an already-computed contingency table.
pub fn precision_from_table(table: &ContingencyTable) -> MetricValue {
    MetricValue::new(table.row_maxima().iter().sum(), table.universe_size())
}

/// Recall read off an already-computed contingency table.
pub fn recall_from_table(table: &ContingencyTable) -> MetricValue {
    MetricValue::new(table.col_maxima().iter().sum(), table.universe_size())
}

/// Accuracy of a predicted labeling against a reference labeling, plus a
/// flag marking inapplicable label vocabularies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Fraction of samples whose predicted label equals the reference label.
    pub accuracy: MetricValue,
    /// True when the two label vocabularies share no label at all, in which
    /// case the identity mapping underlying accuracy is inapplicable.
    pub disjoint_vocabularies: bool,
}

/// Computes accuracy by direct label-string comparison over a shared
/// universe. Unlabeled samples never match. Disjoint vocabularies yield
/// zero with a warning flag rather than an error.
pub fn accuracy(pred: &Labeling, reference: &Labeling) -> Result<AccuracyReport> {
    use crate::error::Error;
    use std::collections::HashSet;

    if pred.len() != reference.len() {
        return Err(Error::UniverseMismatch {
            detail: format!(
                "predicted labeling has {} samples, reference has {}",
                pred.len(),
                reference.len()
            ),
        });
    }
    let mut matches = 0u64;
    let mut pred_vocab: HashSet<&str> = HashSet::new();
    let mut ref_vocab: HashSet<&str> = HashSet::new();
    for (id, pred_label) in pred.iter() {
        if !reference.contains(id) {
            return Err(Error::UniverseMismatch {
                detail: format!("sample `{id}` is missing from the reference labeling"),
            });
        }
        let ref_label = reference.label_of(id);
        if let Some(p) = pred_label {
            pred_vocab.insert(p);
        }
        if let Some(r) = ref_label {
            ref_vocab.insert(r);
        }
        if let (Some(p), Some(r)) = (pred_label, ref_label) {
            if p == r {
                matches += 1;
            }
        }
    }
    let disjoint = pred_vocab.is_disjoint(&ref_vocab);
    Ok(AccuracyReport {
        accuracy: MetricValue::new(matches, pred.len() as u64),
        disjoint_vocabularies: disjoint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::SampleId;
    use proptest::prelude::*;

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

    fn labeling(entries: &[(&str, Option<&str>)]) -> Labeling {
        Labeling::new(entries.iter().map(|(id, l)| {
            (
                SampleId::new(id).unwrap(),
                l.map(|s| s.to_string()),
            )
        }))
        .unwrap()
    }

    /// O(c·d) reference for precision/recall via explicit set intersection.
    pub(crate) fn brute_force_precision_recall(c: &Clustering, d: &Clustering) -> (u64, u64) {
        let overlap = |x: &[SampleId], y: &[SampleId]| -> u64 {
            x.iter().filter(|id| y.contains(id)).count() as u64
        };
        let mut precision_num = 0;
        for (_, ci) in c.iter() {
            precision_num += d.iter().map(|(_, dj)| overlap(ci, dj)).max().unwrap();
        }
        let mut recall_num = 0;
        for (_, dj) in d.iter() {
            recall_num += c.iter().map(|(_, ci)| overlap(ci, dj)).max().unwrap();
        }
        (precision_num, recall_num)
    }

    fn fixture_e1() -> (Clustering, Clustering) {
        (
            clustering(&[("c1", &["1", "2", "3", "4"]), ("c2", &["5", "6", "7", "8"])]),
            clustering(&[
                ("d1", &["1", "2"]),
                ("d2", &["3", "4"]),
                ("d3", &["5", "6", "7", "8"]),
            ]),
        )
    }

    #[test]
    fn precision_on_fixture() {
        let (c, d) = fixture_e1();
        let p = precision(&c, &d).unwrap();
        // brute force: c1 max overlap 2, c2 max overlap 4 -> (2+4)/8
        assert_eq!((p.num, p.den), (6, 8));
        assert_eq!(p.value, 0.75);
    }

    #[test]
    fn recall_on_fixture() {
        let (c, d) = fixture_e1();
        let r = recall(&c, &d).unwrap();
        // brute force: d1 -> 2, d2 -> 2, d3 -> 4 -> 8/8
        assert_eq!((r.num, r.den), (8, 8));
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn identity_gives_one() {
        let (c, _) = fixture_e1();
        assert_eq!(precision(&c, &c).unwrap().value, 1.0);
        assert_eq!(recall(&c, &c).unwrap().value, 1.0);
    }

    #[test]
    fn singleton_reference_bounds() {
        let c = clustering(&[("c1", &["1", "2", "3"]), ("c2", &["4", "5"])]);
        let singletons = Clustering::from_assignments(
            (1..=5).map(|i| (i.to_string(), format!("s{i}"))),
        )
        .unwrap();
        let p = precision(&c, &singletons).unwrap();
        let r = recall(&c, &singletons).unwrap();
        // each predicted cluster overlaps any singleton by at most 1
        assert_eq!(p.num, c.cluster_count() as u64);
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn mapping_identity() {
        let (c, _) = fixture_e1();
        let f = cluster_mapping(&c, &c, MappingDirection::PredictedToReference).unwrap();
        for (src, dst) in &f.pairs {
            assert_eq!(src, dst);
        }
    }

    #[test]
    fn mapping_tie_breaks_lexicographically() {
        let c = clustering(&[("c1", &["1", "2", "3", "4"])]);
        let d = clustering(&[("d1", &["1", "2"]), ("d2", &["3", "4"])]);
        let f = cluster_mapping(&c, &d, MappingDirection::PredictedToReference).unwrap();
        assert_eq!(f.pairs.get("c1" as &str).map(|s| s.as_ref()), Some("d1"));
    }

    #[test]
    fn mapping_onto_singletons_is_total() {
        let c = clustering(&[("c1", &["1", "2"]), ("c2", &["3"])]);
        let singles = Clustering::from_assignments(
            (1..=3).map(|i| (i.to_string(), format!("s{i}"))),
        )
        .unwrap();
        let f = cluster_mapping(&c, &singles, MappingDirection::PredictedToReference).unwrap();
        assert_eq!(f.pairs.len(), c.cluster_count());
        for (_, target) in &f.pairs {
            assert!(singles.cluster_names().any(|n| n == target.as_ref()));
        }
    }

    #[test]
    fn accuracy_identity() {
        let l = labeling(&[("1", Some("a")), ("2", Some("b"))]);
        let rep = accuracy(&l, &l).unwrap();
        assert_eq!(rep.accuracy.value, 1.0);
        assert!(!rep.disjoint_vocabularies);
    }

    #[test]
    fn accuracy_counts_equal_labels() {
        let pred = labeling(&[("1", Some("a")), ("2", Some("a")), ("3", Some("b"))]);
        let reference = labeling(&[("1", Some("a")), ("2", Some("b")), ("3", Some("b"))]);
        let rep = accuracy(&pred, &reference).unwrap();
        assert_eq!((rep.accuracy.num, rep.accuracy.den), (2, 3));
        assert!(!rep.disjoint_vocabularies);
    }

    #[test]
    fn accuracy_disjoint_vocabulary_warns() {
        let pred = labeling(&[("1", Some("x")), ("2", Some("y"))]);
        let reference = labeling(&[("1", Some("a")), ("2", Some("b"))]);
        let rep = accuracy(&pred, &reference).unwrap();
        assert_eq!(rep.accuracy.value, 0.0);
        assert!(rep.disjoint_vocabularies);
    }

    #[test]
    fn accuracy_universe_mismatch() {
        let pred = labeling(&[("1", Some("a"))]);
        let reference = labeling(&[("2", Some("a"))]);
        assert!(accuracy(&pred, &reference).is_err());
    }

    fn arb_pair(max_m: usize, max_k: usize) -> impl Strategy<Value = (Clustering, Clustering)> {
        (1..=max_m).prop_flat_map(move |m| {
            let mk = move |labels: Vec<usize>| {
                Clustering::from_assignments(
                    labels
                        .iter()
                        .enumerate()
                        .map(|(i, k)| (format!("s{i}"), format!("k{k}"))),
                )
                .unwrap()
            };
            (
                proptest::collection::vec(0..max_k, m).prop_map(mk),
                proptest::collection::vec(0..max_k, m).prop_map(mk),
            )
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force((c, d) in arb_pair(200, 10)) {
            let (pn, rn) = brute_force_precision_recall(&c, &d);
            let p = precision(&c, &d).unwrap();
            let r = recall(&c, &d).unwrap();
            prop_assert_eq!(p.num, pn);
            prop_assert_eq!(r.num, rn);
        }

        #[test]
        fn duality_holds_exactly((c, d) in arb_pair(150, 8)) {
            let p = precision(&c, &d).unwrap();
            let r = recall(&d, &c).unwrap();
            prop_assert_eq!(p, r);
        }

        #[test]
        fn values_in_unit_interval((c, d) in arb_pair(150, 8)) {
            let p = precision(&c, &d).unwrap();
            let r = recall(&c, &d).unwrap();
            prop_assert!(p.value > 0.0 && p.value <= 1.0);
            prop_assert!(r.value > 0.0 && r.value <= 1.0);
        }
    }
}
