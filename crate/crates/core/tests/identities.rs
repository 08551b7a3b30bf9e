//! Cross-module invariants: the cohort engine against the information
//! theoretic identities, over randomized tables.

mod common;

use common::{assert_close, random_table, seeded_rng};
use uniqshap::adtree::AdTree;
use uniqshap::dataset::{CategoricalTable, SubjectSet};
use uniqshap::infotheory;
use uniqshap::shapley;
use uniqshap::VariableSubset;

#[test]
fn exact_values_are_nonnegative_and_efficient() {
    let mut rng = seeded_rng(11);
    for _ in 0..10 {
        let table = random_table(&mut rng, 5..=80, 2..=5, 2..=4);
        let tree = AdTree::build(&table, 8);
        let matrix = shapley::shapley_all(&tree, 0).unwrap();
        for t in 0..table.n() {
            let full = tree.count_subject(t, VariableSubset::full(table.d()));
            let expect = (table.n() as f64 / full as f64).log2();
            assert_close(matrix.row_total(t), expect, 1e-9, "efficiency");
            for j in 0..table.d() {
                assert!(matrix.get(t, j) >= -1e-12, "negative value at ({t}, {j})");
            }
        }
    }
}

#[test]
fn global_values_sit_inside_the_bracketing_bounds() {
    let mut rng = seeded_rng(12);
    for _ in 0..10 {
        let table = random_table(&mut rng, 5..=80, 2..=5, 2..=4);
        let tree = AdTree::build(&table, 8);
        let matrix = shapley::shapley_all(&tree, 0).unwrap();
        let all = SubjectSet::all(table.n());
        let joint = infotheory::entropy(&infotheory::marginal(
            &table,
            VariableSubset::full(table.d()),
            None,
        ));
        for j in 0..table.d() {
            let phi = matrix.column_mean(j, &all);
            let h_j = infotheory::entropy(&infotheory::marginal(
                &table,
                VariableSubset::from_indices(&[j]),
                None,
            ));
            assert!(
                phi >= h_j / table.d() as f64 - 1e-12,
                "variable {j}: {phi} below H/d = {}",
                h_j / table.d() as f64
            );
            assert!(
                phi <= joint + 1e-12,
                "variable {j}: {phi} above H(1:d) = {joint}"
            );
        }
    }
}

#[test]
fn singleton_subsets_reduce_the_cross_entropy_form_to_per_subject_values() {
    let mut rng = seeded_rng(13);
    let table = random_table(&mut rng, 5..=40, 2..=4, 2..=4);
    let tree = AdTree::build(&table, 4);
    for t in 0..table.n().min(8) {
        let v = SubjectSet::new(vec![t as u32], table.n()).unwrap();
        let phi = shapley::shapley_subject(&tree, t).unwrap();
        for (j, &direct) in phi.iter().enumerate() {
            let via_cross = infotheory::subset_shapley_via_cross_entropy(&table, &v, j).unwrap();
            assert_close(
                via_cross,
                direct,
                1e-9,
                &format!("subject {t}, variable {j}"),
            );
        }
    }
}

#[test]
fn d1_two_subject_subset_via_cross_entropy() {
    let table = CategoricalTable::from_csv_reader(
        std::io::Cursor::new("v1,v2\nA,0\nA,1\nB,0\nB,0\n"),
        None,
    )
    .unwrap();
    let v = SubjectSet::new(vec![2, 3], 4).unwrap();
    let phi = infotheory::subset_shapley_via_cross_entropy(&table, &v, 0).unwrap();
    assert_close(phi, 0.792481, 1e-6, "B-rows subset, variable 1");
}

#[test]
fn product_designs_factorize_exactly_over_column_pairs() {
    let table = CategoricalTable::synth_product(&[2, 3, 4], 2).unwrap();
    for j in 0..table.d() {
        for k in 0..table.d() {
            if j == k {
                continue;
            }
            let joint = infotheory::marginal(&table, VariableSubset::from_indices(&[j, k]), None);
            let pj = infotheory::marginal(&table, VariableSubset::from_indices(&[j]), None);
            let pk = infotheory::marginal(&table, VariableSubset::from_indices(&[k]), None);
            for a in 0..table.level_count(j) as u32 {
                for b in 0..table.level_count(k) as u32 {
                    let tuple = if j < k { [a, b] } else { [b, a] };
                    let product = pj.prob_of(&[a]) * pk.prob_of(&[b]);
                    assert_close(
                        joint.prob_of(&tuple),
                        product,
                        1e-12,
                        &format!("pair ({j}, {k}), tuple ({a}, {b})"),
                    );
                }
            }
        }
    }
}

#[test]
fn product_designs_satisfy_the_independence_identity_everywhere() {
    for (level_counts, replication) in [(vec![2usize, 2, 3], 2), (vec![4, 2], 5)] {
        let table = CategoricalTable::synth_product(&level_counts, replication).unwrap();
        let tree = AdTree::build(&table, 4);
        let matrix = shapley::shapley_all(&tree, 0).unwrap();
        let all = SubjectSet::all(table.n());
        for j in 0..table.d() {
            let h = infotheory::entropy(&infotheory::marginal(
                &table,
                VariableSubset::from_indices(&[j]),
                None,
            ));
            assert_close(matrix.column_mean(j, &all), h, 1e-9, "independence");
        }
    }
}

#[test]
fn monte_carlo_tracks_exact_values_on_a_wide_random_table() {
    let mut rng = seeded_rng(14);
    let table = random_table(&mut rng, 40..=60, 6..=6, 2..=4);
    let tree = AdTree::build(&table, 8);
    for t in [0usize, 7, 23] {
        let exact = shapley::shapley_subject(&tree, t).unwrap();
        let (est, se) = shapley::shapley_subject_mc(&tree, t, 20_000, 5).unwrap();
        for (j, (&e, &s)) in est.iter().zip(&se).enumerate() {
            assert!(
                (e - exact[j]).abs() <= 4.0 * s + 1e-12,
                "subject {t}, variable {j}: {e} vs {} (se {s})",
                exact[j]
            );
        }
    }
}
