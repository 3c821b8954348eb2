//! Optimal and ranked (T-best) linear assignment over rectangular cost matrices
//! with misdetection handling.
//!
//! Rows are tracks, columns are measurements, and entries are negative
//! log-likelihood ratios. A track may always be left unassigned (misdetected)
//! at cost zero; this is realized by appending a diagonal block of dummy
//! columns (see [`extend_for_misdetection`]). Ranked enumeration uses Murty
//! partitioning on top of a shortest-augmenting-path solver.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use crate::error::{GlmbError, Result};

/// Rectangular cost matrix, row-major. Entries are finite or `+inf`
/// (`+inf` marks a forbidden pairing). Either dimension may be zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(GlmbError::InvalidInput(format!(
                "cost matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        if data.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(GlmbError::InvalidInput(
                "cost matrix entries must be finite or +inf".into(),
            ));
        }
        Ok(CostMatrix { rows, cols, data })
    }

    /// Builds a matrix from row slices, rejecting ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(GlmbError::InvalidInput("ragged cost matrix".into()));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        CostMatrix::new(rows.len(), ncols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Sentinel strictly larger than twice the absolute sum of finite entries,
    /// so no solution containing it can outrank any fully finite solution.
    fn sentinel(&self) -> f64 {
        let s: f64 = self
            .data
            .iter()
            .filter(|v| v.is_finite())
            .map(|v| v.abs())
            .sum();
        2.0 * s + 1.0
    }
}

/// Association map for one hypothesis: entry `i` is the 1-based measurement
/// index assigned to track `i`, or 0 for a misdetected track. No two tracks
/// share a positive index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AssociationMap {
    assignment: Vec<u32>,
}

impl AssociationMap {
    pub fn new(assignment: Vec<u32>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &a in &assignment {
            if a > 0 && !seen.insert(a) {
                return Err(GlmbError::InvalidInput(format!(
                    "measurement {a} assigned to two tracks"
                )));
            }
        }
        Ok(AssociationMap { assignment })
    }

    pub fn empty() -> Self {
        AssociationMap {
            assignment: Vec::new(),
        }
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Measurement index (0-based) for track `i`, or `None` if misdetected.
    pub fn measurement_for(&self, i: usize) -> Option<usize> {
        match self.assignment[i] {
            0 => None,
            j => Some(j as usize - 1),
        }
    }

    pub fn detection_count(&self) -> usize {
        self.assignment.iter().filter(|&&a| a > 0).count()
    }
}

/// One entry of a ranked-assignment result.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedSolution {
    pub map: AssociationMap,
    /// Sum of selected original-matrix entries; misdetections contribute 0.
    pub cost: f64,
}

/// Total cost of an association map against the original matrix,
/// summed in row order (misdetected rows contribute 0).
pub fn assignment_cost(cost: &CostMatrix, map: &AssociationMap) -> f64 {
    map.assignment()
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0)
        .map(|(i, &a)| cost.get(i, a as usize - 1))
        .sum()
}

/// Appends an identity-patterned dummy block so misdetection becomes an
/// ordinary column choice: the result is `rows x (cols + rows)`, where row `i`
/// assigned to column `cols + i` encodes misdetection at cost 0, and all other
/// dummy columns are forbidden for row `i`. Misdetection costs 0 because the
/// update cost entries already divide by the misdetection likelihood.
pub fn extend_for_misdetection(cost: &CostMatrix) -> CostMatrix {
    let (n, m) = (cost.rows, cost.cols);
    let mut data = Vec::with_capacity(n * (m + n));
    for i in 0..n {
        for j in 0..m {
            data.push(cost.get(i, j));
        }
        for j in 0..n {
            data.push(if j == i { 0.0 } else { f64::INFINITY });
        }
    }
    CostMatrix {
        rows: n,
        cols: m + n,
        data,
    }
}

/// Minimum-cost assignment of every row to a distinct column (rows <= cols),
/// by shortest augmenting paths with potentials. Costs must be finite.
/// Returns `row -> column`.
fn solve_lap<F: Fn(usize, usize) -> f64>(rows: usize, cols: usize, cost: F) -> Vec<usize> {
    debug_assert!(rows <= cols);
    if rows == 0 {
        return Vec::new();
    }
    // 1-based with virtual column 0 per the classic formulation.
    let mut u = vec![0.0_f64; rows + 1];
    let mut v = vec![0.0_f64; cols + 1];
    let mut p = vec![0_usize; cols + 1]; // row assigned to column j (0 = none)
    let mut way = vec![0_usize; cols + 1];

    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0_usize;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0_usize;
            for j in 1..=cols {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![usize::MAX; rows];
    for j in 1..=cols {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    debug_assert!(assignment.iter().all(|&c| c != usize::MAX));
    assignment
}

/// Murty subproblem: a set of forced pairs plus a set of banned pairs over the
/// extended matrix, together with its optimal solution.
struct Subproblem {
    forced: Vec<(usize, usize)>,
    banned: Vec<(usize, usize)>,
    solution: Vec<usize>,
    cost: f64,
    seq: u64,
}

impl PartialEq for Subproblem {
    fn eq(&self, other: &Self) -> bool {
        self.cost == other.cost && self.seq == other.seq
    }
}
impl Eq for Subproblem {}
impl Ord for Subproblem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want smallest cost first.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}
impl PartialOrd for Subproblem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Solves one subproblem of the extended matrix. Returns `None` if every
/// completion uses a forbidden or banned pairing.
fn solve_subproblem(
    ext: &CostMatrix,
    sentinel: f64,
    forced: &[(usize, usize)],
    banned: &[(usize, usize)],
) -> Option<(Vec<usize>, f64)> {
    let n = ext.rows();
    let m = ext.cols();
    let mut fixed_col = vec![usize::MAX; n];
    let mut col_taken = vec![false; m];
    for &(r, c) in forced {
        fixed_col[r] = c;
        col_taken[c] = true;
    }
    let free_rows: Vec<usize> = (0..n).filter(|&r| fixed_col[r] == usize::MAX).collect();
    let free_cols: Vec<usize> = (0..m).filter(|&c| !col_taken[c]).collect();

    let is_banned = |r: usize, c: usize| banned.iter().any(|&(br, bc)| br == r && bc == c);

    let mut solution = fixed_col;
    if !free_rows.is_empty() {
        let eff = |si: usize, sj: usize| {
            let (r, c) = (free_rows[si], free_cols[sj]);
            let raw = ext.get(r, c);
            if raw.is_infinite() || is_banned(r, c) {
                sentinel
            } else {
                raw
            }
        };
        let sub = solve_lap(free_rows.len(), free_cols.len(), eff);
        for (si, &sj) in sub.iter().enumerate() {
            solution[free_rows[si]] = free_cols[sj];
        }
    }

    // Infeasible if any selected pair is forbidden or banned.
    for (r, &c) in solution.iter().enumerate() {
        if ext.get(r, c).is_infinite() || is_banned(r, c) {
            return None;
        }
    }
    let cost: f64 = solution
        .iter()
        .enumerate()
        .map(|(r, &c)| ext.get(r, c))
        .sum();
    Some((solution, cost))
}

fn canonical_map(solution: &[usize], original_cols: usize) -> AssociationMap {
    let assignment = solution
        .iter()
        .map(|&c| if c < original_cols { c as u32 + 1 } else { 0 })
        .collect();
    AssociationMap { assignment }
}

/// Minimum-total-cost association map, where misdetected tracks contribute 0.
/// Realized over the misdetection-extended square-block matrix.
pub fn solve_optimal_assignment(cost: &CostMatrix) -> Result<AssociationMap> {
    let ext = extend_for_misdetection(cost);
    if ext.rows() == 0 {
        return Ok(AssociationMap::empty());
    }
    let sentinel = ext.sentinel();
    let (solution, _) = solve_subproblem(&ext, sentinel, &[], &[])
        .expect("the all-misdetected assignment is always feasible");
    Ok(canonical_map(&solution, cost.cols()))
}

/// The `min(T, #maps)` lowest-cost association maps in non-decreasing cost
/// order. Equal costs are broken lexicographically on the assignment vector,
/// smallest first. Dummy-column solutions are canonicalized to misdetections
/// and deduplicated. Deterministic for identical inputs.
pub fn ranked_assignments(cost: &CostMatrix, t: usize) -> Result<Vec<RankedSolution>> {
    if t == 0 {
        return Err(GlmbError::InvalidInput(
            "ranked_assignments requires T >= 1".into(),
        ));
    }
    let ext = extend_for_misdetection(cost);
    if ext.rows() == 0 {
        return Ok(vec![RankedSolution {
            map: AssociationMap::empty(),
            cost: 0.0,
        }]);
    }
    let sentinel = ext.sentinel();

    let mut heap: BinaryHeap<Subproblem> = BinaryHeap::new();
    let mut seq = 0_u64;
    let (root_sol, root_cost) = solve_subproblem(&ext, sentinel, &[], &[])
        .expect("the all-misdetected assignment is always feasible");
    heap.push(Subproblem {
        forced: Vec::new(),
        banned: Vec::new(),
        solution: root_sol,
        cost: root_cost,
        seq,
    });

    let mut collected: Vec<RankedSolution> = Vec::new();
    let mut seen: BTreeSet<Vec<u32>> = BTreeSet::new();
    // Max-heap of the T smallest collected costs; its top is the current
    // T-th best cost, the threshold below which enumeration must continue.
    let mut best_costs: BinaryHeap<OrdF64> = BinaryHeap::new();

    while let Some(node) = heap.pop() {
        if collected.len() >= t {
            let kth = best_costs.peek().expect("t >= 1").0;
            if node.cost > kth {
                break;
            }
        }

        let map = canonical_map(&node.solution, cost.cols());
        if seen.insert(map.assignment().to_vec()) {
            if best_costs.len() < t {
                best_costs.push(OrdF64(node.cost));
            } else if node.cost < best_costs.peek().unwrap().0 {
                best_costs.pop();
                best_costs.push(OrdF64(node.cost));
            }
            collected.push(RankedSolution {
                map,
                cost: node.cost,
            });
        }

        // Partition: children exclude this solution and together cover the
        // rest of the subproblem.
        let forced_rows: BTreeSet<usize> = node.forced.iter().map(|&(r, _)| r).collect();
        let mut forced_acc = node.forced.clone();
        for r in 0..ext.rows() {
            if forced_rows.contains(&r) {
                continue;
            }
            let c = node.solution[r];
            let mut banned = node.banned.clone();
            banned.push((r, c));
            if let Some((solution, cost_val)) =
                solve_subproblem(&ext, sentinel, &forced_acc, &banned)
            {
                seq += 1;
                heap.push(Subproblem {
                    forced: forced_acc.clone(),
                    banned,
                    solution,
                    cost: cost_val,
                    seq,
                });
            }
            forced_acc.push((r, c));
        }
    }

    collected.sort_by(|a, b| {
        a.cost
            .total_cmp(&b.cost)
            .then_with(|| a.map.assignment().cmp(b.map.assignment()))
    });
    collected.truncate(t);
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
