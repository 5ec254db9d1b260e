use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use proptest::prelude::*;

use polya_profile::enumeration::{count_trees, degree_series, enumerate_trees_exhaustive, scaled_ln_counts};
use polya_profile::profile::{exact_distribution, exact_distributions_all, exact_tree_series, level_sum_of_means, mean_profile, RootSelector};
use polya_profile::tree::{PolyaTree, ROOT_PARENT};

fn parents() -> impl Strategy<Value = Vec<u32>> {
    (1usize..14).prop_flat_map(|n| {
        (1..n).map(|v| (0..v as u32).boxed()).collect::<Vec<_>>().prop_map(|mut tail| {
            let mut p = vec![ROOT_PARENT];
            p.append(&mut tail);
            p
        })
    })
}

fn selector() -> impl Strategy<Value = RootSelector> {
    prop_oneof![Just(RootSelector::Any), (1usize..5).prop_map(RootSelector::Degree)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_code_round_trips(p in parents()) {
        let t = PolyaTree::from_parents(p).unwrap();
        let code = t.canonical_code();
        let back = PolyaTree::from_code(&code).unwrap();
        prop_assert_eq!(back.size(), t.size());
        prop_assert_eq!(back.canonical_code(), code.clone());
        prop_assert_eq!(t.canonical().canonical_code(), code);
    }

    #[test]
    fn degrees_count_edges(p in parents()) {
        let t = PolyaTree::from_parents(p).unwrap();
        let total: usize = (0..t.size()).map(|v| t.degree(v)).sum();
        // planted degrees: children plus one, the root included
        prop_assert_eq!(total, 2 * t.size() - 1);
    }

    #[test]
    fn laws_are_normalized(n in 1usize..12, k in 0usize..6, sel in selector()) {
        let table = count_trees(n).unwrap();
        let dist = exact_distribution(&table, n, sel, k).unwrap();
        prop_assert!(dist.total().is_one());
        let y = exact_tree_series(&table, n).unwrap();
        let means = mean_profile(&y, sel, n, k).unwrap();
        prop_assert_eq!(dist.mean(), means[k].clone());
    }
}

#[test]
fn level_means_add_up_to_degree_totals() {
    let n = 14;
    let table = count_trees(n).unwrap();
    let y = exact_tree_series(&table, n).unwrap();
    for d in 1..=4 {
        let dists = exact_distributions_all(&table, n, RootSelector::Degree(d), n - 1).unwrap();
        let total = degree_series(d, &y).unwrap().total.coeff(n);
        let yn = BigRational::from_integer(table.y(n).clone().into());
        assert_eq!(level_sum_of_means(&dists), total / yn, "d = {d}");
    }
}

#[test]
fn degree_totals_match_enumeration() {
    for n in 1..=9 {
        let trees = enumerate_trees_exhaustive(n).unwrap();
        let y = exact_tree_series(&count_trees(n).unwrap(), n).unwrap();
        for d in 1..=4 {
            let brute: usize = trees.iter().map(|t| (0..t.size()).filter(|&v| t.degree(v) == d).count()).sum();
            let series = degree_series(d, &y).unwrap().total.coeff(n);
            assert_eq!(series, BigRational::from_integer(brute.into()), "n = {n}, d = {d}");
        }
    }
}

#[test]
fn scaled_logs_agree_with_big_integers() {
    let n = 500;
    let table = count_trees(n).unwrap();
    let logs = scaled_ln_counts(n).unwrap();
    for m in [1, 2, 10, 100, 499, 500] {
        let exact = table.ln_y(m) - m as f64 * 3f64.ln();
        assert!((logs[m] - exact).abs() < 1e-10, "m = {m}");
    }
    assert_eq!(table.y(n).to_f64().map(f64::is_finite), Some(true));
}
