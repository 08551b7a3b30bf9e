//! Empirical entropies, relative and cross entropies, and the closed-form
//! identities that serve as independent oracles for the cohort engine.
//!
//! Distributions carry exact integer counts; probabilities only ever appear
//! inside logarithms, and entropy sums use compensated summation so the
//! identities hold to tight tolerances even over large supports.

use std::collections::BTreeMap;

use crate::dataset::{CategoricalTable, SubjectSet};
use crate::error::{Error, Result};
use crate::numeric::Kahan;
use crate::shapley::DEFAULT_EXACT_D_LIMIT;
use crate::subset::{VariableSubset, WeightTable};

/// Empirical distribution of the value tuples of a variable subset, over the
/// full table or a subject subset. Counts are exact integers; the tuple keys
/// are level codes in increasing variable order.
///
/// The support is kept ordered so every sum over it runs in a fixed order:
/// outputs stay byte-identical across runs.
#[derive(Debug, Clone)]
pub struct EmpiricalDistribution {
    subset: VariableSubset,
    total: u64,
    counts: BTreeMap<Vec<u32>, u64>,
}

impl EmpiricalDistribution {
    pub fn subset(&self) -> VariableSubset {
        self.subset
    }

    /// Number of observations the distribution was formed from.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn support_size(&self) -> usize {
        self.counts.len()
    }

    pub fn count_of(&self, tuple: &[u32]) -> u64 {
        self.counts.get(tuple).copied().unwrap_or(0)
    }

    pub fn prob_of(&self, tuple: &[u32]) -> f64 {
        self.count_of(tuple) as f64 / self.total as f64
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u32], u64)> {
        self.counts.iter().map(|(k, &c)| (k.as_slice(), c))
    }
}

/// Marginal distribution of the tuple of columns `w`, over all rows or over
/// the rows in `v`. The empty subset yields the point mass on the empty
/// tuple.
pub fn marginal(
    table: &CategoricalTable,
    w: VariableSubset,
    v: Option<&SubjectSet>,
) -> EmpiricalDistribution {
    let vars: Vec<usize> = w.iter().collect();
    debug_assert!(vars.iter().all(|&j| j < table.d()));
    let mut counts: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
    let mut total = 0u64;
    let mut tally = |i: usize| {
        let key: Vec<u32> = vars.iter().map(|&j| table.code(i, j)).collect();
        *counts.entry(key).or_insert(0) += 1;
        total += 1;
    };
    match v {
        None => (0..table.n()).for_each(&mut tally),
        Some(set) => set.iter().for_each(&mut tally),
    }
    EmpiricalDistribution {
        subset: w,
        total,
        counts,
    }
}

/// Shannon entropy in bits, with 0·log2(0) = 0.
///
/// Computed as `log2(T) - (Σ c·log2 c) / T` from the integer counts.
pub fn entropy(dist: &EmpiricalDistribution) -> f64 {
    let total = dist.total as f64;
    let mut acc = Kahan::default();
    for (_, c) in dist.iter() {
        acc.add(c as f64 * (c as f64).log2());
    }
    total.log2() - acc.total() / total
}

/// Conditional entropy `H(target | given) = H(target ∪ given) - H(given)`
/// under the table's empirical distribution.
pub fn conditional_entropy(
    table: &CategoricalTable,
    target: VariableSubset,
    given: VariableSubset,
) -> Result<f64> {
    if let Some(j) = target.iter().find(|&j| given.contains(j)) {
        return Err(Error::OverlappingSubsets(j));
    }
    let joint = VariableSubset::from_mask(target.mask() | given.mask());
    let h_joint = entropy(&marginal(table, joint, None));
    let h_given = entropy(&marginal(table, given, None));
    Ok(h_joint - h_given)
}

fn check_comparable(q: &EmpiricalDistribution, p: &EmpiricalDistribution) -> Result<()> {
    if q.subset != p.subset {
        return Err(Error::SubsetMismatch);
    }
    Ok(())
}

fn support_violation(subset: VariableSubset, tuple: &[u32]) -> Error {
    let rendered: Vec<String> = subset
        .iter()
        .zip(tuple)
        .map(|(j, code)| format!("v{}={}", j, code))
        .collect();
    Error::SupportViolation {
        tuple: format!("({})", rendered.join(", ")),
    }
}

/// Relative entropy (Kullback-Leibler divergence) `D(q ‖ p) = Σ q log2(q/p)`
/// in bits. Fails if `q` puts mass on a tuple outside `p`'s support.
pub fn relative_entropy(q: &EmpiricalDistribution, p: &EmpiricalDistribution) -> Result<f64> {
    check_comparable(q, p)?;
    let tq = q.total as f64;
    let tp = p.total as f64;
    let mut acc = Kahan::default();
    for (tuple, cq) in q.iter() {
        let cp = p.count_of(tuple);
        if cp == 0 {
            return Err(support_violation(q.subset, tuple));
        }
        let term = (cq as f64).log2() - tq.log2() - (cp as f64).log2() + tp.log2();
        acc.add(cq as f64 * term);
    }
    Ok(acc.total() / tq)
}

/// Cross entropy `H(p, q) = -Σ q log2 p` in bits; the distribution inside
/// the logarithm comes first. Satisfies `H(p, q) = H(q) + D(q ‖ p)`.
pub fn cross_entropy(p: &EmpiricalDistribution, q: &EmpiricalDistribution) -> Result<f64> {
    check_comparable(q, p)?;
    let tq = q.total as f64;
    let tp = p.total as f64;
    let mut acc = Kahan::default();
    for (tuple, cq) in q.iter() {
        let cp = p.count_of(tuple);
        if cp == 0 {
            return Err(support_violation(q.subset, tuple));
        }
        acc.add(cq as f64 * (tp.log2() - (cp as f64).log2()));
    }
    Ok(acc.total() / tq)
}

/// Entropy of every variable subset, indexed by bit mask. The `2^d`
/// marginals make this exponential in `d`, so it is capped at the exact-mode
/// limit.
pub fn subset_entropies(table: &CategoricalTable) -> Result<Vec<f64>> {
    let d = table.d();
    if d > DEFAULT_EXACT_D_LIMIT {
        return Err(Error::DimensionTooLarge {
            d,
            limit: DEFAULT_EXACT_D_LIMIT,
        });
    }
    Ok((0u64..1 << d)
        .map(|mask| entropy(&marginal(table, VariableSubset::from_mask(mask), None)))
        .collect())
}

/// The global per-variable value as a binomial-weighted sum of conditional
/// entropies: `(1/d) Σ_{u ⊆ -j} C(d-1,|u|)^{-1} · H(j | u)`.
///
/// This is the closed-form twin of averaging the per-subject cohort values
/// over all subjects, and is used as an independent oracle for that path.
pub fn global_shapley_via_entropy(table: &CategoricalTable, j: usize) -> Result<f64> {
    let d = table.d();
    if j >= d {
        return Err(Error::VariableOutOfRange { index: j, d });
    }
    let h = subset_entropies(table)?;
    let weights = WeightTable::plain(d);
    let mut acc = Kahan::default();
    for u in VariableSubset::subsets_excluding(d, j) {
        let h_cond = h[u.with(j).mask() as usize] - h[u.mask() as usize];
        acc.add(weights.weight(u.len()) * h_cond);
    }
    Ok(acc.total())
}

/// The subject-subset aggregate as a weighted sum of cross-entropy
/// differences: `(1/d) Σ_{u ⊆ -j} C(d-1,|u|)^{-1} (H(p_{u+j}, q_{u+j}) -
/// H(p_u, q_u))`, where `q` is the empirical distribution over the rows in
/// `v` and `p` over all rows.
pub fn subset_shapley_via_cross_entropy(
    table: &CategoricalTable,
    v: &SubjectSet,
    j: usize,
) -> Result<f64> {
    let d = table.d();
    if j >= d {
        return Err(Error::VariableOutOfRange { index: j, d });
    }
    if d > DEFAULT_EXACT_D_LIMIT {
        return Err(Error::DimensionTooLarge {
            d,
            limit: DEFAULT_EXACT_D_LIMIT,
        });
    }
    // Cross entropy of every subset mask; the empty mask contributes 0.
    let mut cross = vec![0.0; 1 << d];
    for mask in 0u64..1 << d {
        let w = VariableSubset::from_mask(mask);
        let p = marginal(table, w, None);
        let q = marginal(table, w, Some(v));
        cross[mask as usize] = cross_entropy(&p, &q)?;
    }
    let weights = WeightTable::plain(d);
    let mut acc = Kahan::default();
    for u in VariableSubset::subsets_excluding(d, j) {
        let diff = cross[u.with(j).mask() as usize] - cross[u.mask() as usize];
        acc.add(weights.weight(u.len()) * diff);
    }
    Ok(acc.total())
}
