//! Distance matrix, threshold clustering, minimum-size enforcement and
//! cluster centers.

use std::fmt::Write as _;

use petgraph::unionfind::UnionFind;
use rayon::prelude::*;

use crate::sketch::{jaccard_estimate, mash_distance, KmerSketch, SketchError};

/// Symmetric pairwise Mash distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    ids: Vec<String>,
    d: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    /// Builds a matrix from explicit values. Panics if `d` is not square,
    /// symmetric with a zero diagonal.
    pub fn from_rows(ids: Vec<String>, d: Vec<Vec<f64>>) -> Self {
        let n = ids.len();
        assert_eq!(d.len(), n, "distance matrix must be square");
        for (i, row) in d.iter().enumerate() {
            assert_eq!(row.len(), n, "distance matrix must be square");
            assert_eq!(row[i], 0.0, "diagonal must be zero");
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, d[j][i], "distance matrix must be symmetric");
            }
        }
        Self { ids, d }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i][j]
    }

    /// Tab-separated dump: header row of ids, one row per id, six decimals.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for id in &self.ids {
            out.push('\t');
            out.push_str(id);
        }
        out.push('\n');
        for (id, row) in self.ids.iter().zip(&self.d) {
            out.push_str(id);
            for v in row {
                let _ = write!(out, "\t{v:.6}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn build_distance_matrix(sketches: &[KmerSketch], distance_cap: f64) -> Result<DistanceMatrix, SketchError> {
    let n = sketches.len();
    if let Some(first) = sketches.first() {
        if sketches.iter().any(|s| s.params != first.params) {
            return Err(SketchError::ParamMismatch);
        }
    }
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| {
                    let jac = jaccard_estimate(&sketches[i], &sketches[j])?;
                    Ok(mash_distance(jac, sketches[i].params.k, distance_cap))
                })
                .collect::<Result<Vec<_>, SketchError>>()
        })
        .collect::<Result<_, _>>()?;
    let mut d = vec![vec![0.0; n]; n];
    for (i, row) in upper.iter().enumerate() {
        for (offset, &v) in row.iter().enumerate() {
            let j = i + 1 + offset;
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    Ok(DistanceMatrix {
        ids: sketches.iter().map(|s| s.record_id.clone()).collect(),
        d,
    })
}

/// A group of dataset indices with its designated center.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub members: Vec<usize>,
    pub center: usize,
}

impl Cluster {
    pub fn new(members: Vec<usize>, dm: &DistanceMatrix) -> Self {
        let center = find_center(&members, dm);
        Self { members, center }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPlan {
    pub clusters: Vec<Cluster>,
    pub similarity_cutoff: f64,
    pub min_size: usize,
}

/// Groups indices of a distance matrix into clusters.
///
/// Implementations return groups ordered by their smallest member, members
/// in ascending index order.
pub trait ClusteringBackend {
    fn groups(&self, dm: &DistanceMatrix) -> Vec<Vec<usize>>;
}

/// Connected components of the graph with an edge wherever
/// `1 - d(i, j) >= cutoff`.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdComponents {
    pub cutoff: f64,
}

impl ClusteringBackend for ThresholdComponents {
    fn groups(&self, dm: &DistanceMatrix) -> Vec<Vec<usize>> {
        let n = dm.len();
        let mut uf = UnionFind::<usize>::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if 1.0 - dm.get(i, j) >= self.cutoff {
                    uf.union(i, j);
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot_of_root: Vec<Option<usize>> = vec![None; n];
        for i in 0..n {
            let root = uf.find(i);
            match slot_of_root[root] {
                Some(slot) => groups[slot].push(i),
                None => {
                    slot_of_root[root] = Some(groups.len());
                    groups.push(vec![i]);
                }
            }
        }
        groups
    }
}

pub fn cluster_sequences(dm: &DistanceMatrix, cutoff: f64) -> Vec<Cluster> {
    ThresholdComponents { cutoff }
        .groups(dm)
        .into_iter()
        .map(|members| Cluster::new(members, dm))
        .collect()
}

/// Folds every cluster smaller than `min_size` into the cluster after it.
/// A small trailing cluster folds into its predecessor instead.
pub fn enforce_min_size(clusters: Vec<Cluster>, min_size: usize, dm: &DistanceMatrix) -> Vec<Cluster> {
    let min_size = min_size.max(1);
    let mut out: Vec<Cluster> = Vec::with_capacity(clusters.len());
    let mut pending: Option<Vec<usize>> = None;
    for cluster in clusters {
        let members = match pending.take() {
            Some(mut carried) => {
                carried.extend(cluster.members);
                carried.sort_unstable();
                carried
            }
            None if cluster.len() >= min_size => {
                out.push(cluster);
                continue;
            }
            None => cluster.members,
        };
        if members.len() < min_size {
            pending = Some(members);
        } else {
            out.push(Cluster::new(members, dm));
        }
    }
    if let Some(carried) = pending {
        match out.pop() {
            Some(last) => {
                let mut members = last.members;
                members.extend(carried);
                members.sort_unstable();
                out.push(Cluster::new(members, dm));
            }
            None => out.push(Cluster::new(carried, dm)),
        }
    }
    out
}

/// Member with the smallest total distance to the rest of the cluster;
/// ties go to the earliest index.
pub fn find_center(members: &[usize], dm: &DistanceMatrix) -> usize {
    assert!(!members.is_empty(), "cluster must have members");
    let mut best = members[0];
    let mut best_sum = f64::INFINITY;
    for &i in members {
        let sum: f64 = members.iter().map(|&j| dm.get(i, j)).sum();
        if sum < best_sum || (sum == best_sum && i < best) {
            best = i;
            best_sum = sum;
        }
    }
    best
}

pub fn plan_clusters(dm: &DistanceMatrix, cutoff: f64, min_size: usize) -> ClusterPlan {
    let clusters = enforce_min_size(cluster_sequences(dm, cutoff), min_size, dm);
    ClusterPlan {
        clusters,
        similarity_cutoff: cutoff,
        min_size,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqio::SequenceRecord;
    use crate::sketch::{build_sketch, SketchParams};
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    fn matrix(n: usize, pairs: &[(usize, usize, f64)]) -> DistanceMatrix {
        let mut d = vec![vec![1.0; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for &(i, j, v) in pairs {
            d[i][j] = v;
            d[j][i] = v;
        }
        DistanceMatrix::from_rows(ids(n), d)
    }

    fn sizes(clusters: &[Cluster]) -> Vec<usize> {
        clusters.iter().map(Cluster::len).collect()
    }

    fn singletons(groups: &[&[usize]], dm: &DistanceMatrix) -> Vec<Cluster> {
        groups.iter().map(|g| Cluster::new(g.to_vec(), dm)).collect()
    }

    fn sketch_all(seqs: &[&str]) -> Vec<KmerSketch> {
        let p = SketchParams::new(4, 64, 0).unwrap();
        seqs.iter()
            .enumerate()
            .map(|(i, s)| build_sketch(&SequenceRecord::new(format!("s{i}"), *s), p).unwrap())
            .collect()
    }

    #[test]
    fn identical_and_disjoint_pairs() {
        let dm = build_distance_matrix(&sketch_all(&["NVRLMLRL", "NVRLMLRL"]), 1.0).unwrap();
        assert_eq!(dm.get(0, 1), 0.0);
        let dm = build_distance_matrix(&sketch_all(&["AAAAA", "CCCCC"]), 1.0).unwrap();
        assert_eq!(dm.get(0, 1), 1.0);
        assert_eq!(dm.get(1, 0), 1.0);
    }

    #[test]
    fn cutoff_zero_gives_one_cluster() {
        let dm = matrix(4, &[]);
        let clusters = cluster_sequences(&dm, 0.0);
        assert_eq!(sizes(&clusters), [4]);
    }

    #[test]
    fn cutoff_above_one_keeps_only_duplicates_together() {
        let dm = matrix(4, &[(0, 1, 0.0), (1, 2, 0.01)]);
        let clusters = cluster_sequences(&dm, 1.0 + 1e-9);
        assert_eq!(sizes(&clusters), [1, 1, 1, 1]);
        let clusters = cluster_sequences(&dm, 1.0);
        let members: Vec<_> = clusters.iter().map(|c| c.members.clone()).collect();
        assert_eq!(members, vec![vec![0, 1], vec![2], vec![3]]);
    }

    #[test]
    fn components_ordered_by_smallest_member() {
        let dm = matrix(5, &[(0, 3, 0.1), (1, 4, 0.1)]);
        let members: Vec<_> = cluster_sequences(&dm, 0.5).into_iter().map(|c| c.members).collect();
        assert_eq!(members, vec![vec![0, 3], vec![1, 4], vec![2]]);
    }

    #[test]
    fn min_size_rules() {
        let dm = matrix(7, &[]);
        let c = singletons(&[&[0], &[1, 2, 3], &[4, 5, 6]], &dm);
        assert_eq!(sizes(&enforce_min_size(c.clone(), 1, &dm)), [1, 3, 3]);
        let merged = enforce_min_size(c, 2, &dm);
        assert_eq!(sizes(&merged), [4, 3]);
        assert_eq!(merged[0].members, [0, 1, 2, 3]);

        let c = singletons(&[&[0, 1, 2], &[3, 4, 5], &[6]], &dm);
        let merged = enforce_min_size(c, 2, &dm);
        assert_eq!(sizes(&merged), [3, 4]);
        assert_eq!(merged[1].members, [3, 4, 5, 6]);

        // chained small clusters accumulate until they reach the threshold
        let c = singletons(&[&[0, 1], &[2], &[3], &[4], &[5]], &dm);
        assert_eq!(sizes(&enforce_min_size(c, 2, &dm)), [2, 2, 2]);
        let c = singletons(&[&[0], &[1]], &dm);
        assert_eq!(sizes(&enforce_min_size(c, 5, &dm)), [2]);
    }

    #[test]
    fn center_selection() {
        let dm = matrix(3, &[(0, 1, 0.1), (0, 2, 0.1), (1, 2, 0.4)]);
        assert_eq!(find_center(&[0, 1, 2], &dm), 0);
        assert_eq!(find_center(&[2], &dm), 2);
        let dm = matrix(2, &[(0, 1, 0.0)]);
        assert_eq!(find_center(&[0, 1], &dm), 0);
        let dm = matrix(3, &[(0, 1, 0.4), (0, 2, 0.4), (1, 2, 0.1)]);
        assert_eq!(find_center(&[0, 1, 2], &dm), 1);
    }

    #[test]
    fn tsv_layout() {
        let dm = matrix(2, &[(0, 1, 0.25)]);
        assert_eq!(
            dm.to_tsv(),
            "\ts0\ts1\ns0\t0.000000\t0.250000\ns1\t0.250000\t0.000000\n"
        );
    }

    #[allow(clippy::needless_range_loop)]
    fn arb_matrix() -> impl Strategy<Value = DistanceMatrix> {
        (2usize..9).prop_flat_map(|n| {
            prop::collection::vec(0.0f64..=1.0, n * (n - 1) / 2).prop_map(move |vals| {
                let mut d = vec![vec![0.0; n]; n];
                let mut it = vals.into_iter();
                for i in 0..n {
                    for j in (i + 1)..n {
                        let v = it.next().unwrap();
                        d[i][j] = v;
                        d[j][i] = v;
                    }
                }
                DistanceMatrix::from_rows(ids(n), d)
            })
        })
    }

    proptest! {
        #[test]
        fn plan_is_partition_with_optimal_centers(
            dm in arb_matrix(), cutoff in 0.0f64..=1.0, min_size in 1usize..4
        ) {
            let plan = plan_clusters(&dm, cutoff, min_size);
            let mut all: Vec<usize> = plan.clusters.iter().flat_map(|c| c.members.clone()).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..dm.len()).collect::<Vec<_>>());
            let k = plan.clusters.len();
            for c in &plan.clusters {
                if k > 1 {
                    prop_assert!(c.len() >= min_size);
                }
                prop_assert!(c.members.contains(&c.center));
                let sum = |i: usize| c.members.iter().map(|&j| dm.get(i, j)).sum::<f64>();
                let center_sum = sum(c.center);
                for &m in &c.members {
                    prop_assert!(sum(m) >= center_sum);
                }
            }
        }

        #[test]
        fn raising_cutoff_refines_components(dm in arb_matrix(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let coarse = cluster_sequences(&dm, lo);
            let fine = cluster_sequences(&dm, hi);
            for c in &fine {
                prop_assert!(coarse.iter().any(|o| c.members.iter().all(|m| o.members.contains(m))));
            }
        }
    }
}
