//! Per-subject uniqueness values: exact enumeration, the Monte Carlo
//! estimator, and the posited-database-key variant, plus aggregation over
//! subject sets.
//!
//! The value of revealing variable `j` for subject `t` combines the log
//! cohort shrinkage `log2(N_t(u) / N_t(u+j))` over every subset `u` of the
//! other variables, weighted by `1 / (d · C(d-1, |u|))`. All counts come
//! through the [`CohortCounter`] trait so the tree-backed engine and the
//! linear-scan engine are interchangeable and can be checked against each
//! other.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::adtree::{naive_count, AdTree};
use crate::dataset::{CategoricalTable, SubjectSet};
use crate::error::{Error, Result};
use crate::infotheory;
use crate::numeric::Kahan;
use crate::subset::{VariableSubset, WeightTable};

/// Exact enumeration touches all `2^d` subsets per subject; beyond this the
/// caller should switch to Monte Carlo.
pub const DEFAULT_EXACT_D_LIMIT: usize = 20;

/// Source of cohort cardinalities `N_t(u)`.
pub trait CohortCounter: Sync {
    fn n(&self) -> usize;
    fn d(&self) -> usize;
    /// Number of subjects matching subject `t` on every variable in `u`.
    /// Always at least 1, since `t` matches itself.
    fn count(&self, t: usize, u: VariableSubset) -> u64;
}

impl CohortCounter for AdTree<'_> {
    fn n(&self) -> usize {
        self.table().n()
    }

    fn d(&self) -> usize {
        self.table().d()
    }

    fn count(&self, t: usize, u: VariableSubset) -> u64 {
        self.count_subject(t, u)
    }
}

/// Linear-scan engine: the reference oracle and the benchmark baseline.
pub struct NaiveCounter<'a> {
    table: &'a CategoricalTable,
}

impl<'a> NaiveCounter<'a> {
    pub fn new(table: &'a CategoricalTable) -> Self {
        NaiveCounter { table }
    }
}

impl CohortCounter for NaiveCounter<'_> {
    fn n(&self) -> usize {
        self.table.n()
    }

    fn d(&self) -> usize {
        self.table.d()
    }

    fn count(&self, t: usize, u: VariableSubset) -> u64 {
        naive_count(self.table, t, u)
    }
}

/// How a matrix was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Provenance {
    Exact,
    MonteCarlo { permutations: usize, seed: u64 },
    Keyed,
}

/// An `n x d` matrix of per-subject values in bits.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
    provenance: Provenance,
}

impl ShapleyMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, provenance: Provenance) -> Self {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        debug_assert!(rows.iter().all(|r| r.len() == d));
        ShapleyMatrix {
            n,
            d,
            values: rows.into_iter().flatten().collect(),
            provenance,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.d..(t + 1) * self.d]
    }

    pub fn get(&self, t: usize, j: usize) -> f64 {
        self.values[t * self.d + j]
    }

    /// Sum of subject `t`'s row; in exact mode this equals
    /// `log2(n / N_t(1:d))`.
    pub fn row_total(&self, t: usize) -> f64 {
        self.row(t).iter().sum()
    }

    /// Mean of column `j` over the subjects in `v`.
    pub fn column_mean(&self, j: usize, v: &SubjectSet) -> f64 {
        let mut acc = Kahan::default();
        for t in v.iter() {
            acc.add(self.get(t, j));
        }
        acc.total() / v.len() as f64
    }
}

/// Aggregated values for a subject set, with entropy baselines.
#[derive(Debug, Clone, Serialize)]
pub struct AggregateReport {
    pub subset_size: usize,
    pub total_subjects: usize,
    /// |v| / n as a percentage.
    pub subset_pct: f64,
    pub variables: Vec<VariableAggregate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariableAggregate {
    pub name: String,
    /// Marginal entropy of the variable over the full table, in bits.
    pub entropy_bits: f64,
    /// Mean per-subject value over the subject set, in bits.
    pub shapley_bits: f64,
}

fn check_exact_preconditions(counter: &impl CohortCounter, t: usize, limit: usize) -> Result<()> {
    let d = counter.d();
    if d > limit {
        return Err(Error::DimensionTooLarge { d, limit });
    }
    if t >= counter.n() {
        return Err(Error::SubjectOutOfRange {
            index: t,
            n: counter.n(),
        });
    }
    Ok(())
}

/// One subject's row under an arbitrary per-cardinality weight table.
/// Fetches all `2^d` cohort counts once, then forms every weighted
/// `log2(N_t(u)) - log2(N_t(u+j))` difference from the cached logs.
fn weighted_row(counter: &impl CohortCounter, t: usize, weights: &WeightTable) -> Vec<f64> {
    let d = counter.d();
    let cells = 1usize << d;
    let mut log_counts = vec![0.0f64; cells];
    for (mask, slot) in log_counts.iter_mut().enumerate() {
        let c = counter.count(t, VariableSubset::from_mask(mask as u64));
        debug_assert!(c >= 1, "cohort of subject {t} empty on mask {mask}");
        *slot = (c as f64).log2();
    }
    let mut row = Vec::with_capacity(d);
    for j in 0..d {
        let bit = 1usize << j;
        let mut acc = Kahan::default();
        for mask in 0..cells {
            if mask & bit == 0 {
                let weight = weights.weight(mask.count_ones() as usize);
                acc.add(weight * (log_counts[mask] - log_counts[mask | bit]));
            }
        }
        row.push(acc.total());
    }
    row
}

/// Exact values for one subject: `φ_{t,j} = Σ_{u⊆-j} γ(d,|u|) ·
/// log2(N_t(u)/N_t(u+j))`, in bits.
pub fn shapley_subject(counter: &impl CohortCounter, t: usize) -> Result<Vec<f64>> {
    check_exact_preconditions(counter, t, DEFAULT_EXACT_D_LIMIT)?;
    Ok(weighted_row(counter, t, &WeightTable::plain(counter.d())))
}

/// Exact values for every subject, computed in parallel. The result is
/// deterministic regardless of `workers` (0 = rayon default).
pub fn shapley_all(counter: &impl CohortCounter, workers: usize) -> Result<ShapleyMatrix> {
    shapley_all_with_limit(counter, workers, DEFAULT_EXACT_D_LIMIT)
}

/// As [`shapley_all`] with an explicit exact-mode dimension limit.
pub fn shapley_all_with_limit(
    counter: &impl CohortCounter,
    workers: usize,
    limit: usize,
) -> Result<ShapleyMatrix> {
    check_exact_preconditions(counter, 0, limit)?;
    let weights = WeightTable::plain(counter.d());
    let rows = parallel_rows(counter, workers, move |c, t| weighted_row(c, t, &weights));
    Ok(ShapleyMatrix::from_rows(rows, Provenance::Exact))
}

/// Values under a posited perfectly-identifying key variable that is never
/// materialized: each subset term is reweighted to `1/((d+1)·C(d,|u|))`,
/// accounting for the insertion positions of the key in every variable
/// order.
pub fn shapley_subject_keyed(counter: &impl CohortCounter, t: usize) -> Result<Vec<f64>> {
    check_exact_preconditions(counter, t, DEFAULT_EXACT_D_LIMIT)?;
    Ok(weighted_row(counter, t, &WeightTable::keyed(counter.d())))
}

/// Keyed values for every subject.
pub fn shapley_all_keyed(counter: &impl CohortCounter, workers: usize) -> Result<ShapleyMatrix> {
    shapley_all_keyed_with_limit(counter, workers, DEFAULT_EXACT_D_LIMIT)
}

pub fn shapley_all_keyed_with_limit(
    counter: &impl CohortCounter,
    workers: usize,
    limit: usize,
) -> Result<ShapleyMatrix> {
    check_exact_preconditions(counter, 0, limit)?;
    let weights = WeightTable::keyed(counter.d());
    let rows = parallel_rows(counter, workers, move |c, t| weighted_row(c, t, &weights));
    Ok(ShapleyMatrix::from_rows(rows, Provenance::Keyed))
}

/// Monte Carlo estimate for one subject: averages the incremental value of
/// `j` over uniformly random variable orders. Returns the estimates and
/// their standard errors (sample standard deviation / sqrt(permutations)).
///
/// Reproducible: the generator stream is derived from the seed and the
/// subject index, so results do not depend on worker count or scheduling.
pub fn shapley_subject_mc(
    counter: &impl CohortCounter,
    t: usize,
    permutations: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = counter.d();
    let n = counter.n();
    if t >= n {
        return Err(Error::SubjectOutOfRange { index: t, n });
    }
    if d > VariableSubset::MAX_VARIABLES {
        return Err(Error::DimensionTooLarge {
            d,
            limit: VariableSubset::MAX_VARIABLES,
        });
    }
    assert!(permutations >= 1, "permutations must be >= 1");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64 + 1);

    let mut order: Vec<usize> = (0..d).collect();
    let mut sums = vec![0.0f64; d];
    let mut squares = vec![0.0f64; d];
    for _ in 0..permutations {
        order.shuffle(&mut rng);
        let mut revealed = VariableSubset::EMPTY;
        let mut prev_log = (n as f64).log2();
        for &j in &order {
            revealed = revealed.with(j);
            let log_count = (counter.count(t, revealed) as f64).log2();
            let increment = prev_log - log_count;
            sums[j] += increment;
            squares[j] += increment * increment;
            prev_log = log_count;
        }
    }

    let r = permutations as f64;
    let estimates: Vec<f64> = sums.iter().map(|s| s / r).collect();
    let errors: Vec<f64> = (0..d)
        .map(|j| {
            if permutations < 2 {
                0.0
            } else {
                let variance =
                    ((squares[j] - r * estimates[j] * estimates[j]) / (r - 1.0)).max(0.0);
                (variance / r).sqrt()
            }
        })
        .collect();
    Ok((estimates, errors))
}

/// Monte Carlo matrix over all subjects.
pub fn shapley_all_mc(
    counter: &impl CohortCounter,
    workers: usize,
    permutations: usize,
    seed: u64,
) -> Result<ShapleyMatrix> {
    if counter.d() > VariableSubset::MAX_VARIABLES {
        return Err(Error::DimensionTooLarge {
            d: counter.d(),
            limit: VariableSubset::MAX_VARIABLES,
        });
    }
    let rows = try_parallel_rows(counter, workers, move |c, t| {
        shapley_subject_mc(c, t, permutations, seed).map(|(est, _)| est)
    })?;
    Ok(ShapleyMatrix::from_rows(
        rows,
        Provenance::MonteCarlo { permutations, seed },
    ))
}

/// Mean row over the subjects in `v`, with each variable's marginal entropy
/// attached as a baseline.
pub fn aggregate(
    matrix: &ShapleyMatrix,
    v: &SubjectSet,
    table: &CategoricalTable,
) -> Result<AggregateReport> {
    if matrix.n() != table.n() || matrix.d() != table.d() {
        return Err(Error::InvalidTable(
            "matrix dimensions disagree with table".into(),
        ));
    }
    if let Some(&max) = v.indices().last() {
        if max as usize >= matrix.n() {
            return Err(Error::SubjectOutOfRange {
                index: max as usize,
                n: matrix.n(),
            });
        }
    }
    let variables = (0..table.d())
        .map(|j| {
            let dist = infotheory::marginal(table, VariableSubset::from_indices(&[j]), None);
            VariableAggregate {
                name: table.name(j).to_owned(),
                entropy_bits: infotheory::entropy(&dist),
                shapley_bits: matrix.column_mean(j, v),
            }
        })
        .collect();
    Ok(AggregateReport {
        subset_size: v.len(),
        total_subjects: table.n(),
        subset_pct: 100.0 * v.fraction(table.n()),
        variables,
    })
}

fn parallel_rows<C, F>(counter: &C, workers: usize, row_fn: F) -> Vec<Vec<f64>>
where
    C: CohortCounter,
    F: Fn(&C, usize) -> Vec<f64> + Sync,
{
    run_in_pool(workers, || {
        (0..counter.n())
            .into_par_iter()
            .map(|t| row_fn(counter, t))
            .collect()
    })
}

fn try_parallel_rows<C, F>(counter: &C, workers: usize, row_fn: F) -> Result<Vec<Vec<f64>>>
where
    C: CohortCounter,
    F: Fn(&C, usize) -> Result<Vec<f64>> + Sync,
    Error: Send,
{
    run_in_pool(workers, || {
        (0..counter.n())
            .into_par_iter()
            .map(|t| row_fn(counter, t))
            .collect()
    })
}

fn run_in_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        job()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("failed to build worker pool");
        pool.install(job)
    }
}
