use std::collections::HashMap;

use polya_profile::enumeration::{count_trees, degree_series, enumerate_trees_exhaustive};
use polya_profile::profile::float_tree_series;
use polya_profile::sampling::{extract_profile, sample_many, TreeSampler};
use polya_profile::verify::chi_square_uniform;

fn codes(sampler: &TreeSampler, n: usize, count: usize, seed: u64) -> Vec<String> {
    sample_many(sampler, n, count, seed).unwrap().iter().map(|t| t.canonical_code()).collect()
}

#[test]
fn exact_weights_sampler_is_uniform() {
    let n = 8;
    let classes: Vec<String> = enumerate_trees_exhaustive(n).unwrap().iter().map(|t| t.canonical_code()).collect();
    let sampler = TreeSampler::new(n).unwrap().exact_only();
    let samples = codes(&sampler, n, 40_000, 11);
    let (_, p) = chi_square_uniform(&classes, &samples);
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn float_guided_choice_equals_exact_choice() {
    // same stream, same trees: the float path only short-cuts comparisons
    let n = 60;
    let fast = codes(&TreeSampler::new(n).unwrap(), n, 300, 5);
    let slow = codes(&TreeSampler::new(n).unwrap().exact_only(), n, 300, 5);
    assert_eq!(fast, slow);
}

#[test]
fn sampled_degree_totals_match_counts() {
    let n = 200;
    let count = 4000;
    let trees = sample_many(&TreeSampler::new(n).unwrap(), n, count, 21).unwrap();
    let y = float_tree_series(&count_trees(n).unwrap(), n).unwrap();
    for d in 1..=3 {
        let expected = degree_series(d, &y).unwrap().total.coeff_ratio(&y, n);
        let xs: Vec<f64> = trees.iter().map(|t| f64::from(extract_profile(t, 3).degree_total(d))).collect();
        let mean = xs.iter().sum::<f64>() / count as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
        let se = (var / count as f64).sqrt();
        assert!((mean - expected).abs() < 4.0 * se, "d = {d}: {mean} vs {expected} (se {se})");
    }
}

#[test]
fn every_class_shows_up() {
    let n = 7;
    let sampler = TreeSampler::new(n).unwrap();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for c in codes(&sampler, n, 5000, 2) {
        *seen.entry(c).or_default() += 1;
    }
    assert_eq!(seen.len(), 48);
}
