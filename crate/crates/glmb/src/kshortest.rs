//! Enumeration of the K lowest-total-cost subsets of a node set with real
//! (possibly negative) node costs.
//!
//! Nodes are arranged in the directed acyclic graph used for prediction
//! truncation: sorted by non-decreasing cost, with edges only from earlier to
//! later nodes plus start/end nodes, so every start-to-end path visits a
//! distinct subset and accumulates that subset's total cost. Because the graph
//! is acyclic, negative node costs cannot create negative cycles; paths are
//! ranked by a best-first search whose completion bound is the sum of the
//! remaining negative costs, which pops complete paths in exact
//! non-decreasing cost order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{GlmbError, Result};

/// One entry of a ranked subset enumeration: member indices into the caller's
/// node list (sorted ascending) and the subset's total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedSubset {
    pub members: Vec<usize>,
    pub total_cost: f64,
}

struct PathState {
    /// Lower bound on the best completion: accumulated cost plus the sum of
    /// remaining negative node costs.
    bound: f64,
    /// Next position in the sorted node order to decide on.
    pos: usize,
    /// Arena index of the latest include/skip decision.
    trail: usize,
    seq: u64,
}

impl PartialEq for PathState {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for PathState {}
impl Ord for PathState {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap by bound.
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}
impl PartialOrd for PathState {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Arena entry recording one include decision: `(sorted position, parent)`.
const TRAIL_ROOT: usize = usize::MAX;

/// Returns the `min(K, 2^n)` lowest-total-cost subsets in non-decreasing cost
/// order. Empty subset costs 0. Ties are broken by smaller cardinality first,
/// then lexicographically on the sorted member indices; in particular the
/// best subset is exactly the strictly-negative-cost nodes, with zero-cost
/// nodes excluded.
pub fn k_shortest_subsets(costs: &[f64], k: usize) -> Result<Vec<RankedSubset>> {
    if k == 0 {
        return Err(GlmbError::InvalidInput(
            "k_shortest_subsets requires K >= 1".into(),
        ));
    }
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(GlmbError::InvalidInput("node costs must be finite".into()));
    }
    let n = costs.len();

    // Nodes sorted by non-decreasing cost; ties by original index for
    // determinism.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then_with(|| a.cmp(&b)));
    let sorted_costs: Vec<f64> = order.iter().map(|&i| costs[i]).collect();

    // negative_suffix[p] = sum of negative costs among positions p..n.
    let mut negative_suffix = vec![0.0_f64; n + 1];
    for p in (0..n).rev() {
        negative_suffix[p] = negative_suffix[p + 1] + sorted_costs[p].min(0.0);
    }

    // Trail arena: (position included, parent trail index).
    let mut trail: Vec<(usize, usize)> = Vec::new();
    let mut heap: BinaryHeap<PathState> = BinaryHeap::new();
    let mut seq = 0_u64;
    heap.push(PathState {
        bound: negative_suffix[0],
        pos: 0,
        trail: TRAIL_ROOT,
        seq,
    });

    let mut collected: Vec<RankedSubset> = Vec::new();
    // Max-heap over the K smallest canonical costs seen so far.
    let mut best_costs: BinaryHeap<OrdF64> = BinaryHeap::new();
    let max_subsets = if n >= 63 { usize::MAX } else { 1usize << n };
    let wanted = k.min(max_subsets);

    while let Some(state) = heap.pop() {
        if collected.len() >= wanted {
            let kth = best_costs.peek().expect("wanted >= 1").0;
            // Small slack: bounds accumulate in sorted-node order while the
            // reported costs are re-summed canonically in index order.
            if state.bound > kth + 1e-9 * (1.0 + kth.abs()) {
                break;
            }
        }
        if state.pos == n {
            // Complete path: recover members, re-sum canonically.
            let mut members = Vec::new();
            let mut t = state.trail;
            while t != TRAIL_ROOT {
                let (p, parent) = trail[t];
                members.push(order[p]);
                t = parent;
            }
            members.sort_unstable();
            let total_cost: f64 = members.iter().map(|&i| costs[i]).sum();
            if best_costs.len() < wanted {
                best_costs.push(OrdF64(total_cost));
            } else if total_cost < best_costs.peek().unwrap().0 {
                best_costs.pop();
                best_costs.push(OrdF64(total_cost));
            }
            collected.push(RankedSubset {
                members,
                total_cost,
            });
            continue;
        }
        // Include the node at `pos`.
        trail.push((state.pos, state.trail));
        seq += 1;
        heap.push(PathState {
            bound: state.bound - sorted_costs[state.pos].min(0.0) + sorted_costs[state.pos],
            pos: state.pos + 1,
            trail: trail.len() - 1,
            seq,
        });
        // Skip it.
        seq += 1;
        heap.push(PathState {
            bound: state.bound - sorted_costs[state.pos].min(0.0),
            pos: state.pos + 1,
            trail: state.trail,
            seq,
        });
    }

    collected.sort_by(|a, b| {
        a.total_cost
            .total_cmp(&b.total_cost)
            .then_with(|| a.members.len().cmp(&b.members.len()))
            .then_with(|| a.members.cmp(&b.members))
    });
    collected.truncate(wanted);
    Ok(collected)
}

#[derive(PartialEq)]
struct OrdF64(f64);
impl Eq for OrdF64 {}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}
impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;

    #[test]
    fn single_negative_node() {
        let got = k_shortest_subsets(&[-1.0], 2).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].members, vec![0]);
        assert_eq!(got[0].total_cost, -1.0);
        assert_eq!(got[1].members, Vec::<usize>::new());
        assert_eq!(got[1].total_cost, 0.0);
    }

    #[test]
    fn survival_odds_ordering() {
        // eta_S = (0.9, 0.8) -> costs (-ln 9, -ln 4).
        let costs = vec![-(9.0_f64.ln()), -(4.0_f64.ln())];
        let got = k_shortest_subsets(&costs, 4).unwrap();
        let expect: Vec<(Vec<usize>, f64)> = vec![
            (vec![0, 1], -(9.0_f64.ln()) - 4.0_f64.ln()),
            (vec![0], -(9.0_f64.ln())),
            (vec![1], -(4.0_f64.ln())),
            (vec![], 0.0),
        ];
        for (g, (m, c)) in got.iter().zip(expect) {
            assert_eq!(g.members, m);
            assert!((g.total_cost - c).abs() < 1e-12);
        }
        assert!((got[0].total_cost - -3.5835).abs() < 1e-4);
    }

    #[test]
    fn matches_brute_force_full_enumeration() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for _ in 0..30 {
            let n = rng.random_range(0..=8);
            let costs: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let expected = oracle::ranked_subsets_brute(&costs);
            let got = k_shortest_subsets(&costs, 1 << n).unwrap();
            assert_eq!(got.len(), expected.len());
            for (g, (m, c)) in got.iter().zip(expected.iter()) {
                assert_eq!(&g.members, m);
                assert!((g.total_cost - c).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn best_subset_is_negative_nodes_zero_excluded() {
        let costs = vec![0.0, -2.0, 1.5, -0.5, 0.0];
        let got = k_shortest_subsets(&costs, 1).unwrap();
        assert_eq!(got[0].members, vec![1, 3]);
        assert_eq!(got[0].total_cost, -2.5);
    }

    #[test]
    fn truncation_returns_prefix_of_full_ranking() {
        let costs = vec![-2.2, 0.4, -0.7, 1.9, 0.1, -1.3];
        let full = k_shortest_subsets(&costs, 1 << costs.len()).unwrap();
        for k in [1, 3, 17, 40] {
            let part = k_shortest_subsets(&costs, k).unwrap();
            assert_eq!(part.len(), k.min(full.len()));
            assert_eq!(&full[..part.len()], part.as_slice());
        }
    }

    #[test]
    fn rejects_k_zero() {
        assert!(k_shortest_subsets(&[1.0], 0).is_err());
    }
}
