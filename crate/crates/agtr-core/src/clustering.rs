//! Core data model: sample ids, clusterings (exact partitions), labelings,
//! and sparse contingency tables.
//!
//! A [`Clustering`] is an exact partition of a sample universe into named
//! clusters. Construction canonicalizes the representation (clusters ordered
//! lexicographically by name, members ordered by id) so that the same input
//! set always yields an identical structure regardless of input order.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Reserved cluster-name prefix for singleton clusters created from
/// unlabeled samples. User labels must not start with this prefix.
pub const SINGLETON_PREFIX: &str = "__singleton__:";

/// Identifier of a single data point; a non-empty string, unique within
/// one clustering.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SampleId(Arc<str>);

impl SampleId {
    /// Creates a sample id, rejecting empty strings.
    pub fn new(id: impl AsRef<str>) -> Result<Self> {
        let id = id.as_ref();
        if id.is_empty() {
            return Err(Error::EmptyId { line: None });
        }
        Ok(SampleId(Arc::from(id)))
    }

    /// The id as a string slice.
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SampleId({:?})", &*self.0)
    }
}

/// Maps every sample id to an optional label string. Unlabeled samples
/// (`None`) become singleton clusters under [`Clustering::from_labels`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Labeling {
    entries: BTreeMap<SampleId, Option<String>>,
}

impl Labeling {
    /// Builds a labeling from `(id, optional label)` pairs.
    /// Each sample id must appear exactly once.
    pub fn new(entries: impl IntoIterator<Item = (SampleId, Option<String>)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (id, label) in entries {
            if map.insert(id.clone(), label).is_some() {
                return Err(Error::DuplicateSample {
                    id: id.to_string(),
                    line: None,
                });
            }
        }
        Ok(Labeling { entries: map })
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Whether the labeling holds no samples.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The label assigned to `id`, if the sample exists and is labeled.
    pub fn label_of(&self, id: &SampleId) -> Option<&str> {
        self.entries.get(id).and_then(|l| l.as_deref())
    }

    /// Whether `id` is part of this labeling.
    pub fn contains(&self, id: &SampleId) -> bool {
        self.entries.contains_key(id)
    }

    /// Iterates entries in sorted id order.
    pub fn iter(&self) -> impl Iterator<Item = (&SampleId, Option<&str>)> {
        self.entries.iter().map(|(id, l)| (id, l.as_deref()))
    }
}

/// An exact partition of a sample universe into named clusters.
///
/// Invariants: clusters are pairwise disjoint and non-empty, their union is
/// the universe, and iteration order is lexicographic by cluster name.
#[derive(Clone)]
pub struct Clustering {
    /// Cluster names, sorted lexicographically.
    names: Vec<Arc<str>>,
    /// Members per cluster, parallel to `names`; each list sorted by id.
    members: Vec<Vec<SampleId>>,
    /// Sample id -> index into `names`.
    assignment: HashMap<SampleId, u32>,
}

impl Clustering {
    /// Builds a clustering from `(sample id, cluster name)` assignments.
    ///
    /// The result is canonical: the same assignment set produces an
    /// identical clustering regardless of input order.
    pub fn from_assignments<I, S, T>(assignments: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let mut by_cluster: BTreeMap<Arc<str>, Vec<SampleId>> = BTreeMap::new();
        let mut seen: HashMap<SampleId, ()> = HashMap::new();
        for (id, cluster) in assignments {
            let id = SampleId::new(id)?;
            if seen.insert(id.clone(), ()).is_some() {
                return Err(Error::DuplicateSample {
                    id: id.to_string(),
                    line: None,
                });
            }
            by_cluster
                .entry(Arc::from(cluster.as_ref()))
                .or_default()
                .push(id);
        }
        if by_cluster.is_empty() {
            return Err(Error::EmptyFile);
        }
        Ok(Self::from_sorted_map(by_cluster))
    }

    /// Builds the clustering induced by a labeling: samples sharing a label
    /// share a cluster; each unlabeled sample becomes a singleton cluster
    /// named `__singleton__:<id>`.
    ///
    /// Labels starting with the reserved singleton prefix are rejected so
    /// the generated singleton names can never collide with user clusters.
    pub fn from_labels(labels: &Labeling) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyFile);
        }
        let mut by_cluster: BTreeMap<Arc<str>, Vec<SampleId>> = BTreeMap::new();
        for (id, label) in labels.iter() {
            let name: Arc<str> = match label {
                Some(l) => {
                    if l.starts_with(SINGLETON_PREFIX) {
                        return Err(Error::ReservedLabel {
                            label: l.to_string(),
                            prefix: SINGLETON_PREFIX,
                        });
                    }
                    Arc::from(l)
                }
                None => Arc::from(format!("{SINGLETON_PREFIX}{id}").as_str()),
            };
            by_cluster.entry(name).or_default().push(id.clone());
        }
        Ok(Self::from_sorted_map(by_cluster))
    }

    /// Internal constructor from a name-sorted map; member lists are sorted
    /// here. Callers guarantee ids are unique and names non-empty of members.
    fn from_sorted_map(by_cluster: BTreeMap<Arc<str>, Vec<SampleId>>) -> Self {
        let mut names = Vec::with_capacity(by_cluster.len());
        let mut members = Vec::with_capacity(by_cluster.len());
        let mut assignment = HashMap::new();
        for (name, mut ids) in by_cluster {
            ids.sort_unstable();
            let idx = names.len() as u32;
            for id in &ids {
                assignment.insert(id.clone(), idx);
            }
            names.push(name);
            members.push(ids);
        }
        Clustering {
            names,
            members,
            assignment,
        }
    }

    /// Total number of samples `m`.
    pub fn universe_size(&self) -> usize {
        self.assignment.len()
    }

    /// Number of clusters.
    pub fn cluster_count(&self) -> usize {
        self.names.len()
    }

    /// Cluster names in canonical (lexicographic) order.
    pub fn cluster_names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(|n| n.as_ref())
    }

    /// Iterates `(cluster name, members)` in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[SampleId])> {
        self.names
            .iter()
            .zip(&self.members)
            .map(|(n, m)| (n.as_ref(), m.as_slice()))
    }

    /// Members of the cluster at canonical index `idx`.
    pub fn members_at(&self, idx: usize) -> &[SampleId] {
        &self.members[idx]
    }

    /// Name of the cluster at canonical index `idx`.
    pub fn name_at(&self, idx: usize) -> &Arc<str> {
        &self.names[idx]
    }

    /// Canonical index of the cluster containing `id`.
    pub fn cluster_index_of(&self, id: &SampleId) -> Option<u32> {
        self.assignment.get(id).copied()
    }

    /// Name of the cluster containing `id`.
    pub fn cluster_of(&self, id: &SampleId) -> Option<&str> {
        self.cluster_index_of(id)
            .map(|i| self.names[i as usize].as_ref())
    }

    /// Whether `id` belongs to the universe.
    pub fn contains(&self, id: &SampleId) -> bool {
        self.assignment.contains_key(id)
    }

    /// All sample ids in sorted order.
    pub fn sorted_ids(&self) -> Vec<SampleId> {
        let mut ids: Vec<SampleId> = self.assignment.keys().cloned().collect();
        ids.sort_unstable();
        ids
    }

    /// Whether both clusterings partition exactly the same id set.
    pub fn same_universe(&self, other: &Clustering) -> bool {
        self.assignment.len() == other.assignment.len()
            && self.assignment.keys().all(|id| other.contains(id))
    }

    /// Errors with a descriptive [`Error::UniverseMismatch`] unless both
    /// clusterings share the same universe.
    pub fn require_same_universe(&self, other: &Clustering) -> Result<()> {
        if self.assignment.len() != other.assignment.len() {
            return Err(Error::UniverseMismatch {
                detail: format!(
                    "left has {} samples, right has {}",
                    self.assignment.len(),
                    other.assignment.len()
                ),
            });
        }
        for id in self.assignment.keys() {
            if !other.contains(id) {
                return Err(Error::UniverseMismatch {
                    detail: format!("sample `{id}` is missing from the right clustering"),
                });
            }
        }
        Ok(())
    }

    /// Whether both clusterings describe the same partition, ignoring
    /// cluster names.
    pub fn same_partition(&self, other: &Clustering) -> bool {
        if !self.same_universe(other) {
            return false;
        }
        if self.cluster_count() != other.cluster_count() {
            return false;
        }
        self.members.iter().all(|cluster| {
            other
                .cluster_index_of(&cluster[0])
                .is_some_and(|idx| other.members[idx as usize] == *cluster)
        })
    }
}

impl PartialEq for Clustering {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names && self.members == other.members
    }
}

impl Eq for Clustering {}

impl fmt::Debug for Clustering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut map = f.debug_map();
        for (name, members) in self.iter() {
            map.entry(&name, &members.iter().map(|s| s.as_str()).collect::<Vec<_>>());
        }
        map.finish()
    }
}

/// Sparse overlap counts between two clusterings of the same universe:
/// one positive entry per pair of intersecting clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    a_names: Vec<Arc<str>>,
    b_names: Vec<Arc<str>>,
    /// `((a index, b index), |A_i ∩ B_j|)`, sorted by key.
    entries: Vec<((u32, u32), u64)>,
    row_marginals: Vec<u64>,
    col_marginals: Vec<u64>,
    m: u64,
}

impl ContingencyTable {
    /// Number of samples shared by both clusterings.
    pub fn universe_size(&self) -> u64 {
        self.m
    }

    /// Number of clusters on the A side.
    pub fn row_count(&self) -> usize {
        self.a_names.len()
    }

    /// Number of clusters on the B side.
    pub fn col_count(&self) -> usize {
        self.b_names.len()
    }

    /// Overlap count for a named cluster pair (zero when disjoint).
    pub fn overlap(&self, a_name: &str, b_name: &str) -> u64 {
        let a = match self.a_names.binary_search_by(|n| n.as_ref().cmp(a_name)) {
            Ok(i) => i as u32,
            Err(_) => return 0,
        };
        let b = match self.b_names.binary_search_by(|n| n.as_ref().cmp(b_name)) {
            Ok(i) => i as u32,
            Err(_) => return 0,
        };
        match self.entries.binary_search_by_key(&(a, b), |(k, _)| *k) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0,
        }
    }

    /// Iterates `(a name, b name, count)` over the nonzero entries in
    /// canonical (row-major) order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u64)> {
        self.entries.iter().map(|((a, b), n)| {
            (
                self.a_names[*a as usize].as_ref(),
                self.b_names[*b as usize].as_ref(),
                *n,
            )
        })
    }

    /// Nonzero entries as `((a index, b index), count)` in row-major order.
    pub fn indexed_entries(&self) -> &[((u32, u32), u64)] {
        &self.entries
    }

    /// Name of the A-side cluster at index `i`.
    pub fn a_name(&self, i: u32) -> &Arc<str> {
        &self.a_names[i as usize]
    }

    /// Name of the B-side cluster at index `j`.
    pub fn b_name(&self, j: u32) -> &Arc<str> {
        &self.b_names[j as usize]
    }

    /// `|A_i|` per A-side cluster index.
    pub fn row_marginals(&self) -> &[u64] {
        &self.row_marginals
    }

    /// `|B_j|` per B-side cluster index.
    pub fn col_marginals(&self) -> &[u64] {
        &self.col_marginals
    }

    /// Maximum overlap per A-side cluster.
    pub fn row_maxima(&self) -> Vec<u64> {
        let mut maxima = vec![0u64; self.a_names.len()];
        for ((a, _), n) in &self.entries {
            let slot = &mut maxima[*a as usize];
            *slot = (*slot).max(*n);
        }
        maxima
    }

    /// Maximum overlap per B-side cluster.
    pub fn col_maxima(&self) -> Vec<u64> {
        let mut maxima = vec![0u64; self.b_names.len()];
        for ((_, b), n) in &self.entries {
            let slot = &mut maxima[*b as usize];
            *slot = (*slot).max(*n);
        }
        maxima
    }
}

/// Computes the sparse contingency table of two clusterings of the same
/// universe in a single pass over the sample ids.
pub fn contingency(a: &Clustering, b: &Clustering) -> Result<ContingencyTable> {
    a.require_same_universe(b)?;
    let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
    for (a_idx, members) in a.members.iter().enumerate() {
        for id in members {
            let b_idx = b.assignment[id];
            *counts.entry((a_idx as u32, b_idx)).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<((u32, u32), u64)> = counts.into_iter().collect();
    entries.sort_unstable_by_key(|(k, _)| *k);

    let mut row_marginals = vec![0u64; a.cluster_count()];
    let mut col_marginals = vec![0u64; b.cluster_count()];
    for ((i, j), n) in &entries {
        row_marginals[*i as usize] += n;
        col_marginals[*j as usize] += n;
    }

    Ok(ContingencyTable {
        a_names: a.names.clone(),
        b_names: b.names.clone(),
        entries,
        row_marginals,
        col_marginals,
        m: a.universe_size() as u64,
    })
}
