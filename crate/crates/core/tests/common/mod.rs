//! Shared fixtures and independent oracles for the integration suites.

#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use uniqshap::{naive_count, CategoricalTable, VariableSubset};

pub fn assert_close(actual: f64, expected: f64, tol: f64, what: &str) {
    assert!(
        (actual - expected).abs() <= tol,
        "{what}: {actual} vs {expected} (tol {tol})"
    );
}

/// Random table with n in `n_range`, d in `d_range`, and per-column level
/// counts in `level_range`. Half the columns are drawn uniformly, half with
/// a quadratic skew toward low codes, so most-common-value pruning and
/// uneven marginals both get exercised.
pub fn random_table(
    rng: &mut ChaCha8Rng,
    n_range: std::ops::RangeInclusive<usize>,
    d_range: std::ops::RangeInclusive<usize>,
    level_range: std::ops::RangeInclusive<usize>,
) -> CategoricalTable {
    let n = rng.random_range(n_range);
    let d = rng.random_range(d_range);
    let mut names = Vec::with_capacity(d);
    let mut levels = Vec::with_capacity(d);
    let mut columns = Vec::with_capacity(d);
    for j in 0..d {
        let level_count = rng.random_range(level_range.clone());
        names.push(format!("v{j}"));
        levels.push((0..level_count).map(|v| v.to_string()).collect());
        let skewed = j % 2 == 1;
        let column = (0..n)
            .map(|_| {
                if skewed {
                    let x: f64 = rng.random();
                    ((x * x) * level_count as f64) as u32
                } else {
                    rng.random_range(0..level_count as u32)
                }
            })
            .collect();
        columns.push(column);
    }
    CategoricalTable::from_parts(names, levels, columns).unwrap()
}

/// Deterministic generator for the acceptance sweeps.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn permutations_of(d: usize) -> Vec<Vec<usize>> {
    let mut all = Vec::new();
    let mut current: Vec<usize> = (0..d).collect();
    heap_permute(&mut current, d, &mut all);
    all
}

fn heap_permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == 1 {
        out.push(items.clone());
        return;
    }
    for i in 0..k {
        heap_permute(items, k - 1, out);
        if k.is_multiple_of(2) {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}

/// The definitional oracle: average over all d! variable orders of the
/// incremental log cohort shrinkage, with every cardinality obtained from
/// the linear-scan count. Exponential in d; for small fixtures only.
pub fn permutation_shapley_oracle(table: &CategoricalTable, t: usize) -> Vec<f64> {
    let d = table.d();
    let n = table.n() as f64;
    let orders = permutations_of(d);
    let mut sums = vec![0.0; d];
    for order in &orders {
        let mut revealed = VariableSubset::EMPTY;
        let mut prev_log = n.log2();
        for &j in order {
            revealed = revealed.with(j);
            let log_count = (naive_count(table, t, revealed) as f64).log2();
            sums[j] += prev_log - log_count;
            prev_log = log_count;
        }
    }
    sums.iter().map(|s| s / orders.len() as f64).collect()
}
