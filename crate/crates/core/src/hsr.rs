//! Half-space range reporting over a fixed point set.
//!
//! [`ReporterIndex`] is built once over the `n` rows of a key matrix and
//! answers two queries:
//!
//! * [`ReporterIndex::query`] — all indices `i` with `⟨a, Kᵢ⟩ ≥ b`
//!   (inclusive at equality, matching `sgn(⟨a,x⟩ − b) ≥ 0`);
//! * [`ReporterIndex::query_extreme`] — the `r` indices with the largest
//!   inner products, ties broken toward the smaller index.
//!
//! Both backends are exact reporters and must return identical index lists:
//! `LinearScan` tests the predicate on every point and doubles as the oracle,
//! `SpatialTree` is a median-split tree with per-node bounding boxes that
//! prunes subtrees whose box cannot reach the half-space and accepts
//! wholesale subtrees whose box lies entirely inside it. Work done per query
//! is surfaced in [`QueryCost`] instead of asserting asymptotic claims.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::tensor::{dot, DenseMatrix};

/// Points per leaf in the spatial tree.
const LEAF_SIZE: usize = 16;

/// A query half-space `{x : ⟨a, x⟩ − b ≥ 0}`.
#[derive(Debug, Clone)]
pub struct HalfspaceQuery {
    /// Direction vector `a`; must have the index dimension `d`.
    pub direction: Vec<f64>,
    /// Threshold `b`.
    pub threshold: f64,
}

impl HalfspaceQuery {
    pub fn new(direction: Vec<f64>, threshold: f64) -> Self {
        Self {
            direction,
            threshold,
        }
    }
}

/// Work counters for one query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryCost {
    /// Points whose predicate was explicitly evaluated.
    pub candidates_examined: usize,
    /// Tree nodes entered (0 for the linear scan).
    pub nodes_visited: usize,
    /// Reported indices (`k̃`).
    pub reported: usize,
}

impl QueryCost {
    /// Accumulate another query's counters into this one.
    pub fn absorb(&mut self, other: &QueryCost) {
        self.candidates_examined += other.candidates_examined;
        self.nodes_visited += other.nodes_visited;
        self.reported += other.reported;
    }
}

/// Result of a reporting query: strictly increasing indices plus counters.
#[derive(Debug, Clone)]
pub struct FiredSet {
    pub indices: Vec<usize>,
    pub cost: QueryCost,
}

/// Which reporting implementation backs the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReporterBackend {
    LinearScan,
    SpatialTree,
}

struct TreeNode {
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Range into the permuted point-id array covered by this subtree.
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

struct SpatialTree {
    nodes: Vec<TreeNode>,
    /// Point ids permuted so every subtree covers a contiguous range.
    order: Vec<usize>,
    root: usize,
    depth: usize,
}

/// Immutable half-space reporting index over `n` points in `R^d`.
///
/// Read-only after build; concurrent queries from many threads are safe.
pub struct ReporterIndex {
    points: DenseMatrix,
    backend: ReporterBackend,
    tree: Option<SpatialTree>,
}

impl ReporterIndex {
    /// Build over the rows of `points`. The index keeps its own copy.
    pub fn build(points: &DenseMatrix, backend: ReporterBackend) -> Result<Self> {
        if points.cols() == 0 {
            return Err(Error::Dimension {
                context: "ReporterIndex::build",
                expected: 1,
                got: 0,
            });
        }
        let tree = match backend {
            ReporterBackend::LinearScan => None,
            ReporterBackend::SpatialTree => Some(SpatialTree::build(points)),
        };
        Ok(Self {
            points: points.clone(),
            backend,
            tree,
        })
    }

    pub fn n(&self) -> usize {
        self.points.rows()
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn backend(&self) -> ReporterBackend {
        self.backend
    }

    /// Tree node count (0 for the linear scan).
    pub fn node_count(&self) -> usize {
        self.tree.as_ref().map_or(0, |t| t.nodes.len())
    }

    /// Tree depth in nodes along the longest path (0 for the linear scan).
    pub fn depth(&self) -> usize {
        self.tree.as_ref().map_or(0, |t| t.depth)
    }

    /// Report all indices with `⟨a, Kᵢ⟩ ≥ b`, ascending.
    pub fn query(&self, query: &HalfspaceQuery) -> Result<FiredSet> {
        if query.direction.len() != self.dim() {
            return Err(Error::Dimension {
                context: "ReporterIndex::query",
                expected: self.dim(),
                got: query.direction.len(),
            });
        }
        let mut cost = QueryCost::default();
        let mut indices = Vec::new();
        match &self.tree {
            None => {
                for i in 0..self.n() {
                    cost.candidates_examined += 1;
                    if dot(&query.direction, self.points.row(i)) >= query.threshold {
                        indices.push(i);
                    }
                }
            }
            Some(tree) => {
                if self.n() > 0 {
                    self.tree_report(
                        tree,
                        tree.root,
                        &query.direction,
                        query.threshold,
                        &mut indices,
                        &mut cost,
                    );
                    indices.sort_unstable();
                }
            }
        }
        cost.reported = indices.len();
        Ok(FiredSet { indices, cost })
    }

    /// Report the `r` indices with the largest `⟨a, Kᵢ⟩`, ties broken toward
    /// the smaller index; returned ascending by index.
    pub fn query_extreme(&self, direction: &[f64], r: usize) -> Result<FiredSet> {
        if direction.len() != self.dim() {
            return Err(Error::Dimension {
                context: "ReporterIndex::query_extreme",
                expected: self.dim(),
                got: direction.len(),
            });
        }
        if r > self.n() {
            return Err(Error::Range(format!(
                "top-r count {r} exceeds point count {}",
                self.n()
            )));
        }
        let mut cost = QueryCost::default();
        if r == 0 {
            return Ok(FiredSet {
                indices: Vec::new(),
                cost,
            });
        }
        let mut indices = match &self.tree {
            None => {
                cost.candidates_examined = self.n();
                let mut ids: Vec<usize> = (0..self.n()).collect();
                let dots: Vec<f64> = ids
                    .iter()
                    .map(|&i| dot(direction, self.points.row(i)))
                    .collect();
                let better = |a: &usize, b: &usize| -> Ordering {
                    dots[*b]
                        .total_cmp(&dots[*a])
                        .then_with(|| a.cmp(b))
                        .reverse()
                };
                // partial selection of the r best under (dot desc, index asc)
                if r < ids.len() {
                    ids.select_nth_unstable_by(r - 1, |a, b| better(b, a));
                }
                ids.truncate(r);
                ids
            }
            Some(tree) => self.tree_extreme(tree, direction, r, &mut cost),
        };
        indices.sort_unstable();
        cost.reported = indices.len();
        Ok(FiredSet { indices, cost })
    }

    fn tree_report(
        &self,
        tree: &SpatialTree,
        node_id: usize,
        direction: &[f64],
        threshold: f64,
        out: &mut Vec<usize>,
        cost: &mut QueryCost,
    ) {
        cost.nodes_visited += 1;
        let node = &tree.nodes[node_id];
        let (lower, upper, slack) = directed_bounds(direction, &node.lower, &node.upper);
        // Bounds are padded by `slack` so a decision taken here can never
        // contradict the float-evaluated point predicate used at the leaves.
        if upper + slack < threshold {
            return;
        }
        if lower - slack >= threshold {
            out.extend_from_slice(&tree.order[node.start..node.end]);
            return;
        }
        match node.children {
            None => {
                for &i in &tree.order[node.start..node.end] {
                    cost.candidates_examined += 1;
                    if dot(direction, self.points.row(i)) >= threshold {
                        out.push(i);
                    }
                }
            }
            Some((left, right)) => {
                self.tree_report(tree, left, direction, threshold, out, cost);
                self.tree_report(tree, right, direction, threshold, out, cost);
            }
        }
    }

    fn tree_extreme(
        &self,
        tree: &SpatialTree,
        direction: &[f64],
        r: usize,
        cost: &mut QueryCost,
    ) -> Vec<usize> {
        // Best-first traversal: frontier ordered by padded upper bound, the
        // kept candidates in a worst-first heap of size r.
        let mut frontier: BinaryHeap<Frontier> = BinaryHeap::new();
        let mut kept: BinaryHeap<WorstFirst> = BinaryHeap::with_capacity(r + 1);
        let root = &tree.nodes[tree.root];
        let (_, upper, slack) = directed_bounds(direction, &root.lower, &root.upper);
        frontier.push(Frontier {
            bound: upper + slack,
            node: tree.root,
        });
        while let Some(entry) = frontier.pop() {
            if kept.len() == r {
                let worst = kept.peek().expect("kept is non-empty");
                // Strict comparison: a subtree whose bound ties the current
                // worst may still hold an equal dot with a smaller index.
                if entry.bound < worst.dot {
                    break;
                }
            }
            cost.nodes_visited += 1;
            let node = &tree.nodes[entry.node];
            match node.children {
                None => {
                    for &i in &tree.order[node.start..node.end] {
                        cost.candidates_examined += 1;
                        let value = dot(direction, self.points.row(i));
                        if kept.len() < r {
                            kept.push(WorstFirst { dot: value, index: i });
                        } else {
                            let worst = kept.peek().expect("kept is non-empty");
                            let improves = value > worst.dot
                                || (value == worst.dot && i < worst.index);
                            if improves {
                                kept.pop();
                                kept.push(WorstFirst { dot: value, index: i });
                            }
                        }
                    }
                }
                Some((left, right)) => {
                    for child in [left, right] {
                        let c = &tree.nodes[child];
                        let (_, upper, slack) = directed_bounds(direction, &c.lower, &c.upper);
                        frontier.push(Frontier {
                            bound: upper + slack,
                            node: child,
                        });
                    }
                }
            }
        }
        kept.into_iter().map(|e| e.index).collect()
    }
}

/// Min/max of `⟨a, x⟩` over the box `[lower, upper]`, plus a padding term
/// that dominates the rounding error of both this bound and any point dot
/// evaluated inside the box.
#[inline]
fn directed_bounds(direction: &[f64], lower: &[f64], upper: &[f64]) -> (f64, f64, f64) {
    let mut lo = 0.0;
    let mut hi = 0.0;
    let mut abs = 0.0;
    for j in 0..direction.len() {
        let a = direction[j];
        if a >= 0.0 {
            lo += a * lower[j];
            hi += a * upper[j];
        } else {
            lo += a * upper[j];
            hi += a * lower[j];
        }
        abs += a.abs() * lower[j].abs().max(upper[j].abs());
    }
    let slack = 4.0 * (direction.len() as f64 + 1.0) * f64::EPSILON * abs;
    (lo, hi, slack)
}

struct Frontier {
    bound: f64,
    node: usize,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on bound; node id settles ties deterministically
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.node.cmp(&self.node))
    }
}

struct WorstFirst {
    dot: f64,
    index: usize,
}

impl PartialEq for WorstFirst {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for WorstFirst {}
impl PartialOrd for WorstFirst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for WorstFirst {
    fn cmp(&self, other: &Self) -> Ordering {
        // max element = worst candidate: smaller dot, then larger index
        other
            .dot
            .total_cmp(&self.dot)
            .then_with(|| self.index.cmp(&other.index))
    }
}

impl SpatialTree {
    fn build(points: &DenseMatrix) -> SpatialTree {
        let n = points.rows();
        let mut tree = SpatialTree {
            nodes: Vec::new(),
            order: (0..n).collect(),
            root: 0,
            depth: 0,
        };
        if n == 0 {
            return tree;
        }
        let (root, depth) = tree.build_range(points, 0, n);
        tree.root = root;
        tree.depth = depth;
        tree
    }

    /// Build the subtree over `order[start..end]`; returns (node id, depth).
    fn build_range(&mut self, points: &DenseMatrix, start: usize, end: usize) -> (usize, usize) {
        let d = points.cols();
        let mut lower = vec![f64::INFINITY; d];
        let mut upper = vec![f64::NEG_INFINITY; d];
        for &i in &self.order[start..end] {
            let row = points.row(i);
            for j in 0..d {
                lower[j] = lower[j].min(row[j]);
                upper[j] = upper[j].max(row[j]);
            }
        }
        let len = end - start;
        if len <= LEAF_SIZE {
            self.nodes.push(TreeNode {
                lower,
                upper,
                start,
                end,
                children: None,
            });
            return (self.nodes.len() - 1, 1);
        }
        // split on the widest axis at the median; point id breaks coordinate
        // ties so the partition is deterministic
        let mut axis = 0;
        let mut spread = upper[0] - lower[0];
        for j in 1..d {
            let s = upper[j] - lower[j];
            if s > spread {
                spread = s;
                axis = j;
            }
        }
        let mid = len / 2;
        self.order[start..end].select_nth_unstable_by(mid, |&a, &b| {
            points
                .get(a, axis)
                .total_cmp(&points.get(b, axis))
                .then_with(|| a.cmp(&b))
        });
        let (left, left_depth) = self.build_range(points, start, start + mid);
        let (right, right_depth) = self.build_range(points, start + mid, end);
        self.nodes.push(TreeNode {
            lower,
            upper,
            start,
            end,
            children: Some((left, right)),
        });
        (self.nodes.len() - 1, 1 + left_depth.max(right_depth))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSpec;
    use crate::tensor::sample_gaussian_matrix;
    use proptest::prelude::*;

    fn unit_square_points() -> DenseMatrix {
        DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[-1.0, 0.0], &[0.0, -1.0]]).unwrap()
    }

    #[test]
    fn empty_point_set_reports_nothing() {
        for backend in [ReporterBackend::LinearScan, ReporterBackend::SpatialTree] {
            let index = ReporterIndex::build(&DenseMatrix::zeros(0, 3), backend).unwrap();
            assert_eq!(index.n(), 0);
            let fired = index
                .query(&HalfspaceQuery::new(vec![1.0, 0.0, 0.0], -100.0))
                .unwrap();
            assert!(fired.indices.is_empty());
        }
    }

    #[test]
    fn build_metadata() {
        let points = unit_square_points();
        let linear = ReporterIndex::build(&points, ReporterBackend::LinearScan).unwrap();
        assert_eq!(linear.n(), 4);
        assert_eq!(linear.dim(), 2);
        let tree = ReporterIndex::build(&points, ReporterBackend::SpatialTree).unwrap();
        // 4 points fit one leaf; depth must stay within ceil(log2 4) + 1 = 3
        assert!(tree.depth() <= 3, "depth {}", tree.depth());
        assert!(tree.node_count() >= 1);
    }

    #[test]
    fn zero_dimension_is_rejected() {
        let err = ReporterIndex::build(&DenseMatrix::zeros(5, 0), ReporterBackend::LinearScan);
        assert!(matches!(err, Err(Error::Dimension { .. })));
    }

    #[test]
    fn query_examples() {
        let points = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[-1.0, 0.0]]).unwrap();
        for backend in [ReporterBackend::LinearScan, ReporterBackend::SpatialTree] {
            let index = ReporterIndex::build(&points, backend).unwrap();
            let fired = index
                .query(&HalfspaceQuery::new(vec![1.0, 0.0], 0.5))
                .unwrap();
            assert_eq!(fired.indices, vec![0]);
            // threshold below the minimum dot reports everything
            let all = index
                .query(&HalfspaceQuery::new(vec![1.0, 0.0], -2.0))
                .unwrap();
            assert_eq!(all.indices, vec![0, 1, 2]);
        }
    }

    #[test]
    fn predicate_is_inclusive_at_equality() {
        let points = DenseMatrix::from_rows(&[&[1.0], &[2.0]]).unwrap();
        for backend in [ReporterBackend::LinearScan, ReporterBackend::SpatialTree] {
            let index = ReporterIndex::build(&points, backend).unwrap();
            let fired = index.query(&HalfspaceQuery::new(vec![1.0], 2.0)).unwrap();
            assert_eq!(fired.indices, vec![1]);
        }
    }

    #[test]
    fn query_dimension_mismatch() {
        let index =
            ReporterIndex::build(&unit_square_points(), ReporterBackend::SpatialTree).unwrap();
        assert!(index
            .query(&HalfspaceQuery::new(vec![1.0, 0.0, 0.0], 0.0))
            .is_err());
        assert!(index.query_extreme(&[1.0], 2).is_err());
    }

    #[test]
    fn extreme_examples() {
        let points = DenseMatrix::from_rows(&[&[1.0], &[3.0], &[2.0]]).unwrap();
        for backend in [ReporterBackend::LinearScan, ReporterBackend::SpatialTree] {
            let index = ReporterIndex::build(&points, backend).unwrap();
            assert!(index.query_extreme(&[1.0], 0).unwrap().indices.is_empty());
            assert_eq!(index.query_extreme(&[1.0], 3).unwrap().indices, vec![0, 1, 2]);
            assert_eq!(index.query_extreme(&[1.0], 2).unwrap().indices, vec![1, 2]);
            assert!(index.query_extreme(&[1.0], 4).is_err());
        }
    }

    #[test]
    fn extreme_ties_break_toward_smaller_index() {
        // all dots equal: top-r must be the first r indices
        let points = DenseMatrix::from_rows(&[&[2.0], &[2.0], &[2.0], &[2.0], &[2.0]]).unwrap();
        for backend in [ReporterBackend::LinearScan, ReporterBackend::SpatialTree] {
            let index = ReporterIndex::build(&points, backend).unwrap();
            assert_eq!(index.query_extreme(&[1.5], 3).unwrap().indices, vec![0, 1, 2]);
        }
    }

    /// Brute-force top-r oracle: full sort by (dot desc, index asc).
    fn brute_top_r(points: &DenseMatrix, direction: &[f64], r: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..points.rows()).collect();
        ids.sort_by(|&a, &b| {
            dot(direction, points.row(b))
                .total_cmp(&dot(direction, points.row(a)))
                .then_with(|| a.cmp(&b))
        });
        ids.truncate(r);
        ids.sort_unstable();
        ids
    }

    /// Brute-force halfspace oracle, independent of the backends.
    fn brute_report(points: &DenseMatrix, direction: &[f64], threshold: f64) -> Vec<usize> {
        (0..points.rows())
            .filter(|&i| dot(direction, points.row(i)) >= threshold)
            .collect()
    }

    #[test]
    fn pruning_soundness_counts() {
        let points = sample_gaussian_matrix(512, 4, 1.0, &RngSpec::new(15));
        let index = ReporterIndex::build(&points, ReporterBackend::SpatialTree).unwrap();
        let fired = index
            .query(&HalfspaceQuery::new(vec![0.7, -0.2, 0.1, 0.4], 0.8))
            .unwrap();
        assert!(fired.cost.reported <= fired.cost.candidates_examined);
        assert!(fired.cost.candidates_examined <= index.n());
        assert_eq!(fired.cost.reported, fired.indices.len());
    }

    #[test]
    fn monotone_in_threshold() {
        let points = sample_gaussian_matrix(256, 3, 1.0, &RngSpec::new(4));
        let index = ReporterIndex::build(&points, ReporterBackend::SpatialTree).unwrap();
        let dir = vec![0.3, 0.9, -0.4];
        let mut previous: Option<Vec<usize>> = None;
        for b in [-2.0, -1.0, 0.0, 0.5, 1.5, 3.0] {
            let fired = index.query(&HalfspaceQuery::new(dir.clone(), b)).unwrap();
            if let Some(prev) = &previous {
                // larger threshold must report a subset
                assert!(fired.indices.iter().all(|i| prev.contains(i)));
            }
            previous = Some(fired.indices);
        }
    }

    proptest! {
        #[test]
        fn backends_agree_on_random_inputs(
            seed in 0u64..1_000,
            n in 0usize..200,
            d in 1usize..6,
            quantile in 0.0f64..1.0,
        ) {
            let spec = RngSpec::new(seed);
            let points = sample_gaussian_matrix(n, d, 1.0, &spec.substream(0));
            let mut g = spec.substream(1).gaussian_stream();
            let direction: Vec<f64> = (0..d).map(|_| g.next_gaussian()).collect();
            let mut dots: Vec<f64> = (0..n).map(|i| dot(&direction, points.row(i))).collect();
            dots.sort_by(f64::total_cmp);
            let threshold = if n == 0 {
                0.0
            } else {
                dots[((n as f64 - 1.0) * quantile) as usize]
            };
            let linear = ReporterIndex::build(&points, ReporterBackend::LinearScan).unwrap();
            let tree = ReporterIndex::build(&points, ReporterBackend::SpatialTree).unwrap();
            let q = HalfspaceQuery::new(direction.clone(), threshold);
            let a = linear.query(&q).unwrap();
            let b = tree.query(&q).unwrap();
            prop_assert_eq!(&a.indices, &b.indices);
            prop_assert_eq!(a.indices, brute_report(&points, &direction, threshold));
        }

        #[test]
        fn extreme_matches_brute_force(
            seed in 0u64..1_000,
            n in 1usize..150,
            d in 1usize..5,
            r_frac in 0.0f64..=1.0,
        ) {
            let spec = RngSpec::new(seed);
            let points = sample_gaussian_matrix(n, d, 1.0, &spec.substream(0));
            let mut g = spec.substream(1).gaussian_stream();
            let direction: Vec<f64> = (0..d).map(|_| g.next_gaussian()).collect();
            let r = ((n as f64) * r_frac) as usize;
            let expected = brute_top_r(&points, &direction, r);
            for backend in [ReporterBackend::LinearScan, ReporterBackend::SpatialTree] {
                let index = ReporterIndex::build(&points, backend).unwrap();
                let fired = index.query_extreme(&direction, r).unwrap();
                prop_assert_eq!(&fired.indices, &expected);
            }
        }
    }
}
