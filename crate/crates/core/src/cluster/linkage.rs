//! Average-linkage agglomerative clustering via the Lance-Williams
//! recurrence, plus dendrogram cutting.
//!
//! The merge loop is fully deterministic: among all active cluster pairs at
//! minimum dissimilarity, the pair with the lexicographically smallest
//! (id_a, id_b) wins, where ids follow the leaf convention 0..n-1 and merge
//! m creates id n+m. Per-cluster nearest-neighbor candidates (Anderberg's
//! caching) keep the loop near O(n^2) without changing that order, because
//! the comparison key (dissimilarity, id_a, id_b) is a total order.

use super::{ClusterError, CondensedDistances};

/// Lance-Williams coefficients for one merge update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkageCoefficients {
    pub alpha_a: f64,
    pub alpha_b: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Average-linkage coefficients for merging clusters of the given sizes:
/// `alpha_a = n_a / (n_a + n_b)`, `alpha_b = n_b / (n_a + n_b)`,
/// `beta = gamma = 0`.
pub fn average_linkage_coefficients(size_a: usize, size_b: usize) -> LinkageCoefficients {
    let total = (size_a + size_b) as f64;
    LinkageCoefficients {
        alpha_a: size_a as f64 / total,
        alpha_b: size_b as f64 / total,
        beta: 0.0,
        gamma: 0.0,
    }
}

impl LinkageCoefficients {
    /// Dissimilarity between the merged cluster and an external cluster,
    /// from the pre-merge dissimilarities.
    pub fn update(&self, d_ae: f64, d_be: f64, d_ab: f64) -> f64 {
        self.alpha_a * d_ae + self.alpha_b * d_be + self.beta * d_ab
            + self.gamma * (d_ae - d_be).abs()
    }
}

/// One merge step: the two consumed cluster ids, the dissimilarity at which
/// they merged, and the size of the new cluster.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Merge {
    pub cluster_a: usize,
    pub cluster_b: usize,
    pub height: f64,
    pub size: usize,
}

/// The stepwise merge tree of an agglomerative clustering run.
///
/// Leaves carry ids `0..n`, the m-th merge creates id `n + m`; every id is
/// consumed at most once and average linkage keeps heights non-decreasing.
#[derive(Clone, Debug, PartialEq)]
pub struct Dendrogram {
    n_points: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }
}

/// Candidate entry: best known partner for an active slot.
#[derive(Clone, Copy)]
struct Candidate {
    value: f64,
    partner: usize,
}

struct LinkageState {
    diss: Vec<f64>,
    n: usize,
    active: Vec<bool>,
    cluster_id: Vec<usize>,
    size: Vec<usize>,
}

impl LinkageState {
    #[inline]
    fn diss_index(&self, a: usize, b: usize) -> usize {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        i * self.n - i * (i + 1) / 2 + j - i - 1
    }

    #[inline]
    fn get(&self, a: usize, b: usize) -> f64 {
        self.diss[self.diss_index(a, b)]
    }

    #[inline]
    fn set(&mut self, a: usize, b: usize, value: f64) {
        let idx = self.diss_index(a, b);
        self.diss[idx] = value;
    }

    /// Key realizing the deterministic total order on cluster pairs.
    fn pair_key(&self, a: usize, b: usize) -> (f64, usize, usize) {
        let (id_a, id_b) = (self.cluster_id[a], self.cluster_id[b]);
        let (lo, hi) = if id_a < id_b { (id_a, id_b) } else { (id_b, id_a) };
        (self.get(a, b), lo, hi)
    }

    fn key_less(lhs: (f64, usize, usize), rhs: (f64, usize, usize)) -> bool {
        lhs.0.total_cmp(&rhs.0).then(lhs.1.cmp(&rhs.1)).then(lhs.2.cmp(&rhs.2))
            == std::cmp::Ordering::Less
    }

    /// Best partner for `slot` over all other active slots.
    fn scan_row(&self, slot: usize) -> Option<Candidate> {
        let mut best: Option<(f64, usize, usize, usize)> = None;
        for other in 0..self.n {
            if other == slot || !self.active[other] {
                continue;
            }
            let key = self.pair_key(slot, other);
            match best {
                Some((v, lo, hi, _)) if !Self::key_less(key, (v, lo, hi)) => {}
                _ => best = Some((key.0, key.1, key.2, other)),
            }
        }
        best.map(|(value, _, _, partner)| Candidate { value, partner })
    }
}

/// Build the average-linkage dendrogram of a condensed distance matrix.
///
/// At each step the active pair with minimum dissimilarity merges (ties
/// resolved by smallest (id_a, id_b)); dissimilarities from the merged
/// cluster to every external cluster follow the Lance-Williams update with
/// average-linkage coefficients, and the recorded height is the merged
/// pair's dissimilarity.
pub fn ahc_average_linkage(distances: &CondensedDistances) -> Dendrogram {
    let n = distances.n_points();
    let mut dendrogram = Dendrogram {
        n_points: n,
        merges: Vec::with_capacity(n.saturating_sub(1)),
    };
    if n < 2 {
        return dendrogram;
    }

    let mut state = LinkageState {
        diss: distances.data().to_vec(),
        n,
        active: vec![true; n],
        cluster_id: (0..n).collect(),
        size: vec![1; n],
    };
    let mut candidates: Vec<Option<Candidate>> = (0..n).map(|slot| state.scan_row(slot)).collect();

    for step in 0..n - 1 {
        // Global minimum over cached row candidates; the cache is exact, so
        // this equals the naive scan over all active pairs.
        let mut best_slot = usize::MAX;
        let mut best_key = (f64::INFINITY, usize::MAX, usize::MAX);
        for slot in 0..n {
            if !state.active[slot] {
                continue;
            }
            let cand = candidates[slot].expect("active slot has a candidate");
            let key = state.pair_key(slot, cand.partner);
            debug_assert_eq!(key.0.to_bits(), cand.value.to_bits());
            if best_slot == usize::MAX || LinkageState::key_less(key, best_key) {
                best_slot = slot;
                best_key = key;
            }
        }

        let slot_a = best_slot;
        let slot_b = candidates[slot_a].unwrap().partner;
        let height = state.get(slot_a, slot_b);
        let (id_a, id_b) = (state.cluster_id[slot_a], state.cluster_id[slot_b]);
        let (id_lo, id_hi) = if id_a < id_b { (id_a, id_b) } else { (id_b, id_a) };
        let merged_size = state.size[slot_a] + state.size[slot_b];
        dendrogram.merges.push(Merge {
            cluster_a: id_lo,
            cluster_b: id_hi,
            height,
            size: merged_size,
        });

        // Merge into slot_a; slot_b leaves the active set.
        let coeffs = average_linkage_coefficients(state.size[slot_a], state.size[slot_b]);
        state.active[slot_b] = false;
        candidates[slot_b] = None;
        for slot in 0..n {
            if !state.active[slot] || slot == slot_a {
                continue;
            }
            let updated = coeffs.update(state.get(slot, slot_a), state.get(slot, slot_b), height);
            state.set(slot, slot_a, updated);
        }
        state.cluster_id[slot_a] = n + step;
        state.size[slot_a] = merged_size;

        candidates[slot_a] = state.scan_row(slot_a);
        for slot in 0..n {
            if !state.active[slot] || slot == slot_a {
                continue;
            }
            let cand = candidates[slot].expect("active slot has a candidate");
            if cand.partner == slot_a || cand.partner == slot_b {
                // cached partner merged; its value and id are stale
                candidates[slot] = state.scan_row(slot);
            } else {
                let key = state.pair_key(slot, slot_a);
                let cached = state.pair_key(slot, cand.partner);
                if LinkageState::key_less(key, cached) {
                    candidates[slot] = Some(Candidate {
                        value: key.0,
                        partner: slot_a,
                    });
                }
            }
        }
    }
    dendrogram
}

/// Undo the last `k - 1` merges and label the resulting groups.
///
/// Labels are assigned in order of each group's smallest member index.
pub fn cut(dendrogram: &Dendrogram, k: usize) -> Result<Vec<usize>, ClusterError> {
    let n = dendrogram.n_points();
    if k < 1 || k > n {
        return Err(ClusterError::CutOutOfRange { k, n });
    }

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }

    // representative leaf of every cluster id seen so far
    let mut rep: Vec<usize> = (0..n).collect();
    for (step, merge) in dendrogram.merges()[..n - k].iter().enumerate() {
        let ra = find(&mut parent, rep[merge.cluster_a]);
        let rb = find(&mut parent, rep[merge.cluster_b]);
        parent[rb] = ra;
        rep.push(ra);
        debug_assert_eq!(rep.len() - 1, n + step);
    }

    let mut labels = vec![usize::MAX; n];
    let mut next = 0;
    let mut label_of_root = vec![usize::MAX; n];
    for leaf in 0..n {
        let root = find(&mut parent, leaf);
        if label_of_root[root] == usize::MAX {
            label_of_root[root] = next;
            next += 1;
        }
        labels[leaf] = label_of_root[root];
    }
    debug_assert_eq!(next, k);
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::pairwise_distances;
    use crate::geom::Point3;

    fn line_points() -> Vec<Point3> {
        [0.0, 1.0, 10.0]
            .iter()
            .map(|&x| Point3::new(x, 0.0, 0.0))
            .collect()
    }

    #[test]
    fn average_coefficients_sum_to_one() {
        for (a, b) in [(1, 1), (3, 5), (10, 1)] {
            let c = average_linkage_coefficients(a, b);
            assert!((c.alpha_a + c.alpha_b - 1.0).abs() < 1e-15);
            assert_eq!(c.beta, 0.0);
            assert_eq!(c.gamma, 0.0);
        }
    }

    #[test]
    fn singleton_merge_update_is_the_two_term_mean() {
        let c = average_linkage_coefficients(1, 1);
        assert_eq!(c.update(3.0, 5.0, 1.0), 4.0);
    }

    #[test]
    fn single_point_has_no_merges() {
        let d = pairwise_distances(&[Point3::new(1.0, 2.0, 3.0)], [1.0; 3]).unwrap();
        let dend = ahc_average_linkage(&d);
        assert_eq!(dend.n_points(), 1);
        assert!(dend.merges().is_empty());
    }

    #[test]
    fn line_dendrogram_matches_hand_trace() {
        // points at 0, 1, 10: merge (0, 1) at height 1, then the pair
        // cluster (id 3) with leaf 2 at (10 + 9) / 2 = 9.5
        let d = pairwise_distances(&line_points(), [1.0; 3]).unwrap();
        let dend = ahc_average_linkage(&d);
        assert_eq!(dend.merges().len(), 2);
        let m0 = dend.merges()[0];
        assert_eq!((m0.cluster_a, m0.cluster_b, m0.size), (0, 1, 2));
        assert!((m0.height - 1.0).abs() < 1e-12);
        let m1 = dend.merges()[1];
        assert_eq!((m1.cluster_a, m1.cluster_b, m1.size), (2, 3, 3));
        assert!((m1.height - 9.5).abs() < 1e-12);
    }

    #[test]
    fn cut_extremes_and_line_example() {
        let d = pairwise_distances(&line_points(), [1.0; 3]).unwrap();
        let dend = ahc_average_linkage(&d);
        assert_eq!(cut(&dend, 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(cut(&dend, 1).unwrap(), vec![0, 0, 0]);
        assert_eq!(cut(&dend, 2).unwrap(), vec![0, 0, 1]);
        assert!(matches!(
            cut(&dend, 4),
            Err(ClusterError::CutOutOfRange { k: 4, n: 3 })
        ));
        assert!(cut(&dend, 0).is_err());
    }

    #[test]
    fn tie_break_prefers_smallest_id_pair() {
        // equilateral distances: merges must consume (0, 1) first, then the
        // new cluster (id 3) with leaf 2
        let d = CondensedDistances::from_raw(3, vec![1.0, 1.0, 1.0]);
        let dend = ahc_average_linkage(&d);
        assert_eq!(dend.merges()[0].cluster_a, 0);
        assert_eq!(dend.merges()[0].cluster_b, 1);
        assert_eq!(dend.merges()[1].cluster_a, 2);
        assert_eq!(dend.merges()[1].cluster_b, 3);
    }

    #[test]
    fn heights_are_non_decreasing() {
        let points: Vec<Point3> = (0..40)
            .map(|i| {
                let f = i as f64;
                Point3::new((f * 37.0) % 11.0, (f * 17.0) % 7.0, (f * 5.0) % 13.0)
            })
            .collect();
        let d = pairwise_distances(&points, [1.0; 3]).unwrap();
        let dend = ahc_average_linkage(&d);
        for pair in dend.merges().windows(2) {
            assert!(pair[1].height >= pair[0].height - 1e-9);
        }
    }
}
