//! Refinement checks, correction/distance oracles, and the seeded
//! generators (`random_refinement`, `perturb`) used by the theorem
//! property suites.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::clustering::{contingency, Clustering, SampleId, SINGLETON_PREFIX};
use crate::error::{Error, Result};

/// Reserved name prefix for the sub-clusters emitted by [`random_refinement`]
/// when it splits a cluster.
pub const PART_PREFIX: &str = "__part__:";

/// Reserved name prefix for fresh singleton clusters created by [`perturb`].
pub const PERTURB_PREFIX: &str = "__perturb__:";

/// Returns true iff every cluster of `r` is a subset of some cluster of `s`.
pub fn is_refinement(r: &Clustering, s: &Clustering) -> Result<bool> {
    r.require_same_universe(s)?;
    for (_, members) in r.iter() {
        let target = s.cluster_index_of(&members[0]).expect("same universe");
        if members[1..]
            .iter()
            .any(|id| s.cluster_index_of(id) != Some(target))
        {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The unique grouping of a refinement's clusters under the coarser
/// clustering: each coarse cluster names the fine clusters whose union
/// reproduces it exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefinementDecomposition {
    /// Coarse cluster name -> names of the fine clusters it comprises.
    pub groups: BTreeMap<Arc<str>, BTreeSet<Arc<str>>>,
}

/// Decomposes refinement `r` along the coarser clustering `s`.
pub fn decompose(r: &Clustering, s: &Clustering) -> Result<RefinementDecomposition> {
    if !is_refinement(r, s)? {
        return Err(Error::NotARefinement);
    }
    let mut groups: BTreeMap<Arc<str>, BTreeSet<Arc<str>>> = BTreeMap::new();
    for idx in 0..r.cluster_count() {
        let members = r.members_at(idx);
        let coarse = s.cluster_index_of(&members[0]).expect("same universe");
        groups
            .entry(s.name_at(coarse as usize).clone())
            .or_default()
            .insert(r.name_at(idx).clone());
    }
    Ok(RefinementDecomposition { groups })
}

/// One membership correction: move `id` out of `from` into `to`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Move {
    /// The sample to move.
    pub id: SampleId,
    /// Cluster it currently belongs to.
    pub from: Arc<str>,
    /// Destination cluster (a fresh singleton).
    pub to: Arc<str>,
}

/// A minimal set of membership corrections turning a clustering into a
/// refinement of a target, together with its count ε.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectionWitness {
    /// The corrections, ordered by source cluster then sample id.
    pub moves: Vec<Move>,
    /// ε: the number of corrections (`moves.len()`).
    pub count: u64,
}

impl CorrectionWitness {
    /// Applies the witness moves to `base`, yielding the corrected
    /// clustering. Emptied clusters disappear.
    pub fn apply(&self, base: &Clustering) -> Clustering {
        let mut reassigned: HashMap<&SampleId, &Arc<str>> = HashMap::new();
        for mv in &self.moves {
            reassigned.insert(&mv.id, &mv.to);
        }
        let mut pairs: Vec<(String, String)> = Vec::with_capacity(base.universe_size());
        for (name, members) in base.iter() {
            for id in members {
                let target = reassigned
                    .get(id)
                    .map(|t| t.to_string())
                    .unwrap_or_else(|| name.to_string());
                pairs.push((id.to_string(), target));
            }
        }
        Clustering::from_assignments(pairs).expect("moves preserve the partition invariants")
    }
}

/// Minimum number of membership corrections turning `r_hat` into a
/// refinement of `d`, with an explicit witness: every member outside its
/// cluster's plurality reference cluster moves to a fresh singleton.
///
/// The count equals `m - Σ_k max_j |R̂_k ∩ D_j|`, i.e. exactly
/// `m · (1 - precision(r_hat, d))`.
pub fn min_corrections_to_refinement(r_hat: &Clustering, d: &Clustering) -> Result<CorrectionWitness> {
    r_hat.require_same_universe(d)?;
    let mut moves = Vec::new();
    for idx in 0..r_hat.cluster_count() {
        let members = r_hat.members_at(idx);
        // plurality reference cluster of this cluster, smallest name on ties
        let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
        for id in members {
            *counts.entry(d.cluster_index_of(id).expect("same universe")).or_insert(0) += 1;
        }
        let (&plurality, _) = counts
            .iter()
            .max_by(|(ia, na), (ib, nb)| {
                na.cmp(nb).then_with(|| {
                    d.name_at(**ib as usize).cmp(d.name_at(**ia as usize))
                })
            })
            .expect("clusters are non-empty");
        for id in members {
            if d.cluster_index_of(id) != Some(plurality) {
                moves.push(Move {
                    id: id.clone(),
                    from: r_hat.name_at(idx).clone(),
                    to: Arc::from(format!("{SINGLETON_PREFIX}{id}").as_str()),
                });
            }
        }
    }
    let count = moves.len() as u64;
    Ok(CorrectionWitness { moves, count })
}

/// Partition distance δ: the minimum number of membership changes turning
/// one partition into the other, computed as `m` minus the maximum total
/// overlap over an injective cluster assignment (Hungarian method on the
/// negated overlap matrix, padded square with empty clusters).
///
/// Exact but cubic in the cluster count; intended for modest instances.
pub fn partition_distance(a: &Clustering, b: &Clustering) -> Result<u64> {
    let table = contingency(a, b)?;
    let n = table.row_count().max(table.col_count());
    let mut cost = vec![vec![0i64; n]; n];
    for ((i, j), overlap) in table.indexed_entries() {
        cost[*i as usize][*j as usize] = -(*overlap as i64);
    }
    let max_overlap = -min_cost_assignment(&cost);
    Ok(table.universe_size() - max_overlap as u64)
}

/// O(n³) Hungarian algorithm (potentials formulation) for a square cost
/// matrix; returns the minimum total assignment cost.
fn min_cost_assignment(cost: &[Vec<i64>]) -> i64 {
    let n = cost.len();
    if n == 0 {
        return 0;
    }
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut matched_row = vec![0usize; n + 1]; // column j -> row matched to it
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        matched_row[0] = row;
        let mut j0 = 0usize;
        let mut min_slack = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let slack = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if slack < min_slack[j] {
                    min_slack[j] = slack;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| cost[matched_row[j] - 1][j - 1]).sum()
}

/// Randomly splits each cluster of `d` into contiguous parts of a shuffled
/// member ordering, starting a new part at each member with probability
/// `split_probability`. The output is always a true refinement of `d` and is
/// deterministic per seed.
///
/// Unsplit clusters keep their original name; split parts are named
/// `__part__:<smallest member id>` (a reserved prefix).
pub fn random_refinement(d: &Clustering, split_probability: f64, seed: u64) -> Clustering {
    assert!(
        (0.0..=1.0).contains(&split_probability),
        "split_probability must lie in [0, 1]"
    );
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut pairs: Vec<(String, String)> = Vec::with_capacity(d.universe_size());
    for (name, members) in d.iter() {
        let mut order: Vec<&SampleId> = members.iter().collect();
        order.shuffle(&mut rng);
        let mut parts: Vec<Vec<&SampleId>> = vec![vec![order[0]]];
        for &id in &order[1..] {
            if rng.random_bool(split_probability) {
                parts.push(vec![id]);
            } else {
                parts.last_mut().unwrap().push(id);
            }
        }
        if parts.len() == 1 {
            for id in &parts[0] {
                pairs.push((id.to_string(), name.to_string()));
            }
        } else {
            for part in &parts {
                let anchor = part.iter().min().unwrap();
                for id in part {
                    pairs.push((id.to_string(), format!("{PART_PREFIX}{anchor}")));
                }
            }
        }
    }
    Clustering::from_assignments(pairs).expect("splitting preserves the partition invariants")
}

/// Moves exactly `n_moves` distinct samples (chosen uniformly without
/// replacement) each to a different cluster: uniformly one of the other
/// existing clusters or, with probability `1/(k+1)`, a fresh singleton
/// named `__perturb__:<id>`. Deterministic per seed.
pub fn perturb(s: &Clustering, n_moves: usize, seed: u64) -> Clustering {
    assert!(
        n_moves <= s.universe_size(),
        "cannot move more samples than the universe holds"
    );
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut ids = s.sorted_ids();
    let (chosen, _) = ids.partial_shuffle(&mut rng, n_moves);

    let mut clusters: BTreeMap<Arc<str>, BTreeSet<SampleId>> = BTreeMap::new();
    let mut assignment: HashMap<SampleId, Arc<str>> = HashMap::new();
    for (name, members) in s.iter() {
        let name: Arc<str> = Arc::from(name);
        for id in members {
            assignment.insert(id.clone(), name.clone());
        }
        clusters.insert(name, members.iter().cloned().collect());
    }

    for id in chosen.iter() {
        let current = assignment[id].clone();
        let others: Vec<Arc<str>> = clusters.keys().filter(|n| **n != current).cloned().collect();
        let pick = rng.random_range(0..=others.len());
        let target: Arc<str> = if pick == others.len() {
            Arc::from(format!("{PERTURB_PREFIX}{id}").as_str())
        } else {
            others[pick].clone()
        };
        let source = clusters.get_mut(&current).expect("id is assigned");
        source.remove(id);
        if source.is_empty() {
            clusters.remove(&current);
        }
        clusters.entry(target.clone()).or_default().insert(id.clone());
        assignment.insert(id.clone(), target);
    }

    Clustering::from_assignments(
        clusters
            .iter()
            .flat_map(|(name, members)| {
                members
                    .iter()
                    .map(|id| (id.to_string(), name.to_string()))
                    .collect::<Vec<_>>()
            }),
    )
    .expect("moves preserve the partition invariants")
}

/// ε via the closed form `m · (1 - precision(r_hat, d))`, used to
/// cross-check [`min_corrections_to_refinement`].
pub fn corrections_from_precision(r_hat: &Clustering, d: &Clustering) -> Result<u64> {
    let p = crate::metrics::precision(r_hat, d)?;
    Ok(p.den - p.num)
}
