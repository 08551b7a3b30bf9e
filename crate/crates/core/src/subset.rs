//! Variable subsets as bit masks, and the Shapley subset weights.
//!
//! Both the cohort engine and the entropy identities sum over all subsets
//! `u` of the variables excluding some `j`, weighting each term by
//! `1 / (d * C(d-1, |u|))`. The weights are computed once per `(d, r)` in
//! exact integer arithmetic and shared between the two modules.

use std::fmt;

/// A subset of the `d` variable indices, stored as a bit mask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct VariableSubset(u64);

impl VariableSubset {
    /// Masks are 64-bit, so at most 64 variables are addressable.
    pub const MAX_VARIABLES: usize = 64;

    pub const EMPTY: VariableSubset = VariableSubset(0);

    pub fn from_mask(mask: u64) -> Self {
        VariableSubset(mask)
    }

    /// The full set `{0, .., d-1}`.
    pub fn full(d: usize) -> Self {
        assert!(d <= Self::MAX_VARIABLES);
        if d == 64 {
            VariableSubset(u64::MAX)
        } else {
            VariableSubset((1u64 << d) - 1)
        }
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        let mut mask = 0u64;
        for &j in indices {
            assert!(j < Self::MAX_VARIABLES);
            mask |= 1 << j;
        }
        VariableSubset(mask)
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    pub fn contains(self, j: usize) -> bool {
        j < Self::MAX_VARIABLES && self.0 & (1 << j) != 0
    }

    pub fn with(self, j: usize) -> Self {
        assert!(j < Self::MAX_VARIABLES);
        VariableSubset(self.0 | (1 << j))
    }

    pub fn without(self, j: usize) -> Self {
        VariableSubset(self.0 & !(1u64 << j))
    }

    /// Number of variables in the subset.
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Member variable indices in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let j = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(j)
            }
        })
    }

    /// All subsets of `{0, .., d-1} \ {j}`, i.e. every `u ⊆ -j`.
    pub fn subsets_excluding(d: usize, j: usize) -> impl Iterator<Item = VariableSubset> {
        assert!(d < Self::MAX_VARIABLES && j < d);
        (0u64..1 << d)
            .map(VariableSubset)
            .filter(move |u| !u.contains(j))
    }
}

impl fmt::Debug for VariableSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Exact binomial coefficient `C(n, k)`.
///
/// Panics on overflow; with `n <= 64` every value fits comfortably in `u128`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k {
        // Multiply before dividing; the running product is always divisible.
        acc = acc * (n - k + i) as u128 / i as u128;
    }
    acc
}

/// The weight attached to one subset cardinality in a Shapley sum.
///
/// Stored with its exact integer denominator (the weight is `1/denominator`)
/// alongside the floating-point value actually used in accumulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetWeight {
    pub d: usize,
    pub r: usize,
    pub denominator: u128,
    pub value: f64,
}

/// Per-cardinality weight lookup shared by the cohort engine and the
/// entropy-identity formulas. Index by `|u|`.
#[derive(Debug, Clone)]
pub struct WeightTable {
    weights: Vec<SubsetWeight>,
}

impl WeightTable {
    /// Plain Shapley weights `γ(d, r) = 1 / (d · C(d-1, r))` for `r = 0..d-1`.
    pub fn plain(d: usize) -> Self {
        assert!((1..=VariableSubset::MAX_VARIABLES).contains(&d));
        let weights = (0..d)
            .map(|r| {
                let denominator = d as u128 * binomial(d as u64 - 1, r as u64);
                SubsetWeight {
                    d,
                    r,
                    denominator,
                    value: 1.0 / denominator as f64,
                }
            })
            .collect();
        WeightTable { weights }
    }

    /// Weights `1 / ((d+1) · C(d, r))` for the posited-unique-key variant,
    /// still indexed by `r = |u|` over the original `d` variables.
    pub fn keyed(d: usize) -> Self {
        assert!((1..VariableSubset::MAX_VARIABLES).contains(&d));
        let weights = (0..d)
            .map(|r| {
                let denominator = (d as u128 + 1) * binomial(d as u64, r as u64);
                SubsetWeight {
                    d,
                    r,
                    denominator,
                    value: 1.0 / denominator as f64,
                }
            })
            .collect();
        WeightTable { weights }
    }

    pub fn weight(&self, subset_len: usize) -> f64 {
        self.weights[subset_len].value
    }

    pub fn entries(&self) -> &[SubsetWeight] {
        &self.weights
    }
}
