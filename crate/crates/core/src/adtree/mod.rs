//! All-dimension tree over a categorical table.
//!
//! The tree indexes every conjunctive "variable = value" count query. Each
//! node stores the count of subjects matching the branch conjunction above
//! it, with two memory economies:
//!
//! * at every vary node the most common value's child is pruned and its
//!   count reconstructed by subtraction at query time, and
//! * nodes whose count falls at or below a threshold store their row indices
//!   as an explicit leaf list instead of a subtree.
//!
//! Construction is linear in the subject count; a built tree is immutable
//! and answers queries in time that depends on the schema but not on `n`,
//! so many workers can share one tree safely.

mod cache;

pub use cache::{decode_cache, encode_cache, load_cache, save_cache};

use crate::dataset::CategoricalTable;
use crate::subset::VariableSubset;

/// Default count at or below which a node is stored as a leaf list.
/// Scanning a short row list beats pointer chasing.
pub const DEFAULT_LEAF_THRESHOLD: usize = 16;

/// A variable subset together with the level required on each member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialAssignment {
    // (variable, level) pairs sorted by variable index.
    pairs: Vec<(u16, u32)>,
}

impl PartialAssignment {
    pub fn empty() -> Self {
        PartialAssignment { pairs: Vec::new() }
    }

    /// Build from unsorted pairs; duplicate variables are rejected.
    pub fn new(mut pairs: Vec<(u16, u32)>) -> Option<Self> {
        pairs.sort_unstable_by_key(|&(j, _)| j);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return None;
        }
        Some(PartialAssignment { pairs })
    }

    /// The assignment `x_{t,u}`: subject `t`'s values on the variables in `u`.
    pub fn of_subject(table: &CategoricalTable, t: usize, u: VariableSubset) -> Self {
        let pairs = u.iter().map(|j| (j as u16, table.code(t, j))).collect();
        PartialAssignment { pairs }
    }

    pub fn subset(&self) -> VariableSubset {
        VariableSubset::from_indices(
            &self
                .pairs
                .iter()
                .map(|&(j, _)| j as usize)
                .collect::<Vec<_>>(),
        )
    }

    pub fn pairs(&self) -> &[(u16, u32)] {
        &self.pairs
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Node {
    /// Explicit sorted row indices; the count is the list length.
    Leaf(Vec<u32>),
    Internal {
        count: u64,
        /// One vary node per variable above this node's branch variable,
        /// in increasing variable order.
        varies: Vec<VaryNode>,
    },
}

impl Node {
    fn count(&self) -> u64 {
        match self {
            Node::Leaf(rows) => rows.len() as u64,
            Node::Internal { count, .. } => *count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct VaryNode {
    pub(crate) var: u16,
    /// Most common value in this context; its child is pruned.
    pub(crate) mcv: u32,
    /// Children for the non-MCV values present in this context, sorted by
    /// value. Values absent from the context have no child.
    pub(crate) children: Vec<(u32, Node)>,
}

/// The all-dimension tree, borrowing the table it indexes.
#[derive(Debug)]
pub struct AdTree<'a> {
    table: &'a CategoricalTable,
    leaf_threshold: usize,
    node_count: usize,
    pub(crate) root: Node,
}

impl<'a> AdTree<'a> {
    /// Build the tree. `leaf_threshold` is the count at or below which a
    /// node is stored as a leaf list; `0` expands everything.
    pub fn build(table: &'a CategoricalTable, leaf_threshold: usize) -> Self {
        let rows: Vec<u32> = (0..table.n() as u32).collect();
        let mut node_count = 0;
        let root = build_node(table, &rows, 0, leaf_threshold, &mut node_count);
        log::debug!(
            "ad-tree built: n={} d={} nodes={} leaf_threshold={}",
            table.n(),
            table.d(),
            node_count,
            leaf_threshold
        );
        AdTree {
            table,
            leaf_threshold,
            node_count,
            root,
        }
    }

    pub(crate) fn from_raw(
        table: &'a CategoricalTable,
        leaf_threshold: usize,
        node_count: usize,
        root: Node,
    ) -> Self {
        AdTree {
            table,
            leaf_threshold,
            node_count,
            root,
        }
    }

    pub fn table(&self) -> &'a CategoricalTable {
        self.table
    }

    pub fn leaf_threshold(&self) -> usize {
        self.leaf_threshold
    }

    /// Number of materialized nodes (leaf lists included).
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Exact cohort cardinality for the assignment: the number of subjects
    /// matching every (variable, level) pair.
    pub fn count(&self, a: &PartialAssignment) -> u64 {
        let mut visits = 0;
        self.count_in(&self.root, a.pairs(), &mut visits)
    }

    /// Like [`count`](Self::count), also reporting how many tree nodes the
    /// query visited. Visits depend on the schema and the tree shape, never
    /// on `n` directly.
    pub fn count_with_visits(&self, a: &PartialAssignment) -> (u64, u64) {
        let mut visits = 0;
        let count = self.count_in(&self.root, a.pairs(), &mut visits);
        (count, visits)
    }

    /// Cohort cardinality `N_t(u)` for subject `t` on subset `u`.
    pub fn count_subject(&self, t: usize, u: VariableSubset) -> u64 {
        let a = PartialAssignment::of_subject(self.table, t, u);
        self.count(&a)
    }

    fn count_in(&self, node: &Node, query: &[(u16, u32)], visits: &mut u64) -> u64 {
        *visits += 1;
        if query.is_empty() {
            return node.count();
        }
        match node {
            Node::Leaf(rows) => rows
                .iter()
                .filter(|&&i| {
                    query
                        .iter()
                        .all(|&(j, v)| self.table.code(i as usize, j as usize) == v)
                })
                .count() as u64,
            Node::Internal { varies, .. } => {
                let (j, v) = query[0];
                let rest = &query[1..];
                let vary = match varies.binary_search_by_key(&j, |vn| vn.var) {
                    Ok(k) => &varies[k],
                    Err(_) => unreachable!("query variable below branch point"),
                };
                if v == vary.mcv {
                    // The MCV child is pruned: reconstruct by subtracting
                    // every sibling count from the count ignoring variable j.
                    let without_j = self.count_in(node, rest, visits);
                    let siblings: u64 = vary
                        .children
                        .iter()
                        .map(|(_, child)| self.count_in(child, rest, visits))
                        .sum();
                    without_j.saturating_sub(siblings)
                } else {
                    match vary.children.binary_search_by_key(&v, |(val, _)| *val) {
                        Ok(k) => self.count_in(&vary.children[k].1, rest, visits),
                        Err(_) => 0,
                    }
                }
            }
        }
    }
}

fn build_node(
    table: &CategoricalTable,
    rows: &[u32],
    first_var: usize,
    leaf_threshold: usize,
    node_count: &mut usize,
) -> Node {
    *node_count += 1;
    if rows.len() <= leaf_threshold {
        return Node::Leaf(rows.to_vec());
    }
    let d = table.d();
    let mut varies = Vec::with_capacity(d - first_var);
    for j in first_var..d {
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); table.level_count(j)];
        for &i in rows {
            buckets[table.code(i as usize, j) as usize].push(i);
        }
        // First maximal bucket wins, so ties break toward the smallest value
        // and construction stays deterministic.
        let mut mcv = 0;
        for v in 1..buckets.len() {
            if buckets[v].len() > buckets[mcv].len() {
                mcv = v;
            }
        }
        let children = buckets
            .iter()
            .enumerate()
            .filter(|&(v, bucket)| v != mcv && !bucket.is_empty())
            .map(|(v, bucket)| {
                (
                    v as u32,
                    build_node(table, bucket, j + 1, leaf_threshold, node_count),
                )
            })
            .collect();
        varies.push(VaryNode {
            var: j as u16,
            mcv: mcv as u32,
            children,
        });
    }
    Node::Internal {
        count: rows.len() as u64,
        varies,
    }
}

/// Linear-scan cohort cardinality: the oracle every tree answer is tested
/// against, and the "standard" engine in the benchmark command.
pub fn naive_count(table: &CategoricalTable, t: usize, u: VariableSubset) -> u64 {
    debug_assert!(t < table.n());
    let vars: Vec<usize> = u.iter().collect();
    let mut count = 0u64;
    'rows: for i in 0..table.n() {
        for &j in &vars {
            if table.code(i, j) != table.code(t, j) {
                continue 'rows;
            }
        }
        count += 1;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn d1() -> CategoricalTable {
        CategoricalTable::from_csv_reader(Cursor::new("v1,v2\nA,0\nA,1\nB,0\nB,0\n"), None).unwrap()
    }

    #[test]
    fn hand_counts_on_d1() {
        let t = d1();
        let tree = AdTree::build(&t, 0);
        assert_eq!(tree.count(&PartialAssignment::empty()), 4);
        // var1 = A
        assert_eq!(
            tree.count(&PartialAssignment::new(vec![(0, 0)]).unwrap()),
            2
        );
        // var2 = 0
        assert_eq!(
            tree.count(&PartialAssignment::new(vec![(1, 0)]).unwrap()),
            3
        );
        // var1 = A, var2 = 0
        assert_eq!(
            tree.count(&PartialAssignment::new(vec![(0, 0), (1, 0)]).unwrap()),
            1
        );
        // Subject 3 matches subject 2 on everything.
        let full = VariableSubset::full(2);
        assert_eq!(tree.count_subject(3, full), 2);
    }

    #[test]
    fn naive_count_hand_values() {
        let t = d1();
        assert_eq!(naive_count(&t, 0, VariableSubset::EMPTY), 4);
        assert_eq!(naive_count(&t, 0, VariableSubset::from_indices(&[0])), 2);
        assert_eq!(naive_count(&t, 1, VariableSubset::from_indices(&[1])), 1);
    }

    #[test]
    fn degenerate_leaf_threshold_still_answers_correctly() {
        let t = d1();
        let tree = AdTree::build(&t, t.n());
        assert_eq!(tree.node_count(), 1);
        assert!(matches!(tree.root, Node::Leaf(ref rows) if rows.len() == 4));
        for subject in 0..t.n() {
            for mask in 0u64..4 {
                let u = VariableSubset::from_mask(mask);
                assert_eq!(tree.count_subject(subject, u), naive_count(&t, subject, u));
            }
        }
    }

    #[test]
    fn subject_assignments_never_have_empty_cohorts() {
        let t = d1();
        let tree = AdTree::build(&t, 1);
        for subject in 0..t.n() {
            for mask in 0u64..4 {
                assert!(tree.count_subject(subject, VariableSubset::from_mask(mask)) >= 1);
            }
        }
    }

    #[test]
    fn mcv_reconstruction_matches_naive_on_a_directed_case() {
        // Column 0's MCV at the root is 0 (three zeros, one one); querying
        // the MCV exercises the subtraction path.
        let t = CategoricalTable::from_parts(
            vec!["a".into(), "b".into()],
            vec![
                vec!["0".into(), "1".into()],
                vec!["x".into(), "y".into(), "z".into()],
            ],
            vec![vec![0, 0, 0, 1, 1, 0], vec![0, 1, 2, 0, 1, 1]],
        )
        .unwrap();
        let tree = AdTree::build(&t, 0);
        for subject in 0..t.n() {
            for mask in 0u64..4 {
                let u = VariableSubset::from_mask(mask);
                assert_eq!(
                    tree.count_subject(subject, u),
                    naive_count(&t, subject, u),
                    "subject {subject} mask {mask}"
                );
            }
        }
    }

    #[test]
    fn query_visits_do_not_grow_with_n_for_fixed_schema() {
        // Same product schema at growing replication: identical support,
        // identical tree shape, so visits must be identical while n grows.
        let mut visit_series = Vec::new();
        for replication in [1usize, 8, 64] {
            let t = CategoricalTable::synth_product(&[3, 2, 2], replication).unwrap();
            let tree = AdTree::build(&t, 0);
            let a = PartialAssignment::of_subject(&t, 0, VariableSubset::full(3));
            let (count, visits) = tree.count_with_visits(&a);
            assert_eq!(count, replication as u64);
            visit_series.push(visits);
        }
        assert_eq!(visit_series[0], visit_series[1]);
        assert_eq!(visit_series[1], visit_series[2]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        prop_compose! {
            fn arb_columns()(d in 1usize..=5, n in 1usize..=40)
                (level_counts in proptest::collection::vec(1usize..=4, d),
                 n in Just(n))
                -> (Vec<usize>, usize) {
                (level_counts, n)
            }
        }

        fn arb_table() -> impl Strategy<Value = CategoricalTable> {
            arb_columns()
                .prop_flat_map(|(level_counts, n)| {
                    let columns: Vec<_> = level_counts
                        .iter()
                        .map(|&l| proptest::collection::vec(0..l as u32, n))
                        .collect();
                    (Just(level_counts), columns)
                })
                .prop_map(|(level_counts, columns)| {
                    let names = (0..level_counts.len()).map(|j| format!("v{j}")).collect();
                    let levels = level_counts
                        .iter()
                        .map(|&l| (0..l).map(|v| v.to_string()).collect())
                        .collect();
                    CategoricalTable::from_parts(names, levels, columns).unwrap()
                })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            /// Tree counts agree with the linear-scan oracle for every
            /// subject and every subset, at several leaf thresholds.
            #[test]
            fn tree_matches_naive_everywhere(table in arb_table(),
                                             threshold_pick in 0usize..3) {
                let threshold = [0, 2, usize::MAX][threshold_pick].min(table.n());
                let tree = AdTree::build(&table, threshold);
                let d = table.d();
                for t in 0..table.n() {
                    for mask in 0u64..1 << d {
                        let u = VariableSubset::from_mask(mask);
                        prop_assert_eq!(
                            tree.count_subject(t, u),
                            naive_count(&table, t, u),
                            "t={} mask={} threshold={}", t, mask, threshold
                        );
                    }
                }
            }

            /// Adding a variable to the subset never grows the cohort.
            #[test]
            fn counts_are_monotone_in_the_subset(table in arb_table()) {
                let tree = AdTree::build(&table, 2);
                let d = table.d();
                for t in 0..table.n() {
                    for mask in 0u64..1 << d {
                        let u = VariableSubset::from_mask(mask);
                        let base = tree.count_subject(t, u);
                        for j in 0..d {
                            if !u.contains(j) {
                                prop_assert!(tree.count_subject(t, u.with(j)) <= base);
                            }
                        }
                    }
                }
            }
        }
    }
}
