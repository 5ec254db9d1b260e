use polya_profile::constants::{compute_constants, TreeFunction};
use polya_profile::enumeration::count_trees;
use polya_profile::limits::{eval_cov_limit, eval_limit_mean, eval_psi, eval_var_limit};

#[test]
fn known_values() {
    let c = compute_constants(400, &[1, 2, 3]).unwrap();
    assert!((c.rho.value - 0.338_321_856_899_207_7).abs() < 1e-12);
    assert!((c.b.value - 2.681_128_147_7).abs() < 1e-8);
    assert!((c.c.value - 7.758_160_291_2).abs() < 1e-8);
    let mu: Vec<f64> = c.degrees.iter().map(|g| g.mu.value).collect();
    for (got, want) in mu.iter().zip([0.438156, 0.294000, 0.159114]) {
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
}

#[test]
fn stable_in_the_order() {
    let lo = compute_constants(150, &[1, 4]).unwrap();
    let hi = compute_constants(300, &[1, 4]).unwrap();
    assert!((lo.rho.value - hi.rho.value).abs() <= lo.rho.error + hi.rho.error + 1e-14);
    assert!((lo.b.value - hi.b.value).abs() <= 10.0 * (lo.b.error + hi.b.error));
    for (a, b) in lo.degrees.iter().zip(&hi.degrees) {
        assert!((a.cd.value - b.cd.value).abs() <= 10.0 * (a.cd.error + b.cd.error) + 1e-12);
    }
}

#[test]
fn tree_function_is_singular_at_rho() {
    let tf = TreeFunction::new(400).unwrap();
    let c = compute_constants(400, &[]).unwrap();
    let near = tf.y_near(c.rho.value * (1.0 - 1e-6)).unwrap();
    assert!(near.y < 1.0 && near.y > 0.99);
}

#[test]
fn limits_fit_together() {
    let c = compute_constants(400, &[1, 2]).unwrap();
    let var = eval_var_limit(1, 1.0, &c).unwrap();
    let cov = eval_cov_limit(1, 2, 1.0, &c).unwrap();
    assert!(var > 0.0 && cov > 0.0);
    assert!((eval_cov_limit(1, 1, 1.0, &c).unwrap() - var).abs() < 1e-15);
    // psi''(0) = -(mean^2 + var) through a symmetric difference
    let mean = eval_limit_mean(1, 1.0, &count_trees(1600).unwrap()).unwrap();
    let h = 1e-2;
    let p = |t: f64| eval_psi(t, 1, 1.0, &c).unwrap().complex();
    let second = (p(h) + p(-h) - 2.0 * p(0.0)).re / (h * h);
    assert!((-second - (mean.value * mean.value + var)).abs() < 2e-3, "{second} {} {var}", mean.value);
}

#[test]
fn degree_densities_partition_vertices() {
    let degrees: Vec<usize> = (1..=20).collect();
    let c = compute_constants(400, &degrees).unwrap();
    let total: f64 = c.degrees.iter().map(|g| g.mu.value).sum();
    assert!((total - 1.0).abs() < 1e-3, "{total}");
    // C_d approaches C geometrically
    let k = polya_profile::constants::fit_cd_decay(&c);
    assert!(k.is_finite() && k < 1e3, "K = {k}");
    let last = c.degree(20).unwrap();
    assert!((last.cd.value - c.c.value).abs() < 1e-6 * c.c.value);
}

#[test]
fn rho_brackets_and_orders() {
    let tf = TreeFunction::new(400).unwrap();
    assert!(tf.g(0.2).unwrap().0 < 0.0);
    assert!(tf.g(0.45).unwrap().0 > 0.0);
    let rhos: Vec<f64> = [200, 400, 800].iter().map(|&n| compute_constants(n, &[]).unwrap().rho.value).collect();
    assert!(rhos.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12), "{rhos:?}");
}
