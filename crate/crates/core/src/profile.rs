//! Exact finite-size profile laws.
//!
//! `y_k(x, u)` marks the vertices of a chosen class on level `k`:
//! `y_0 = y + (u - 1) R(y)` with `R` the root term of the class, and
//! `y_{k+1} = x exp(Σ_i y_k(x^i, u^i)/i)`. Full distributions keep every
//! power of `u`; moment runs expand around `u = 1` instead. The univariate
//! `γ` recurrences for the first and second derivatives at `u = 1` are
//! implemented separately and serve both as the fast path for large `n` and
//! as an independent check of the marked computation.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::enumeration::{planted_root_term, CountTable};
use crate::error::{usage, Error, Result};
use crate::powerseries::{MarkBasis, MarkPoly, MarkedSeries, SeriesAlgebra, TruncatedSeries};
use crate::scalar::Scalar;

/// Which vertices are marked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RootSelector {
    /// Vertices of planted degree `d` (one more than the child count).
    Degree(usize),
    /// Every vertex.
    Any,
}

/// Generating function of trees whose root belongs to the selected class,
/// given the series `child` of the subtrees hanging off the root.
pub fn root_part<S: SeriesAlgebra>(sel: RootSelector, child: &S) -> Result<S> {
    match sel {
        RootSelector::Degree(d) => planted_root_term(d, child),
        RootSelector::Any => Ok(child.multiset()?.shift_x()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkMode {
    /// Every power of the mark up to the truncation order.
    Full,
    /// Derivatives at `u = 1` up to the given order.
    Moments(usize),
}

impl MarkMode {
    fn basis(self, order: usize) -> MarkBasis {
        match self {
            MarkMode::Full => MarkBasis::Power { cap: order },
            MarkMode::Moments(m) => MarkBasis::Shifted { order: m },
        }
    }
}

fn lift<T: Scalar>(s: &TruncatedSeries<T>, bases: [MarkBasis; 2]) -> MarkedSeries<T> {
    MarkedSeries::from_series(s, bases)
}

/// `y_0, ..., y_{k_max}` with the mark in variable `var` of `bases`.
fn level_chain<T: Scalar>(
    y: &TruncatedSeries<T>,
    sel: RootSelector,
    k_max: usize,
    bases: [MarkBasis; 2],
    var: usize,
) -> Result<Vec<MarkedSeries<T>>> {
    let rp = lift(&root_part(sel, y)?, bases);
    let base = lift(y, bases);
    let mut chain = Vec::with_capacity(k_max + 1);
    chain.push(base.checked_add(&rp.mul_poly(&MarkPoly::mark_minus_one(var, &bases)))?);
    for k in 0..k_max {
        let next = chain[k].multiset()?.shift_x();
        chain.push(next);
    }
    Ok(chain)
}

/// `y_k(x, u)` for the selected class on level `k`.
pub fn level_degree_series<T: Scalar>(
    y: &TruncatedSeries<T>,
    sel: RootSelector,
    k: usize,
    mode: MarkMode,
) -> Result<MarkedSeries<T>> {
    Ok(level_chain(y, sel, k, [mode.basis(y.order()), MarkBasis::ABSENT], 0)?.pop().expect("nonempty chain"))
}

/// `y_0(x, u), ..., y_{k_max}(x, u)`.
pub fn level_series_all<T: Scalar>(
    y: &TruncatedSeries<T>,
    sel: RootSelector,
    k_max: usize,
    mode: MarkMode,
) -> Result<Vec<MarkedSeries<T>>> {
    level_chain(y, sel, k_max, [mode.basis(y.order()), MarkBasis::ABSENT], 0)
}

/// Joint marking of levels `k` (first variable) and `k + h` (second).
pub fn two_level_series<T: Scalar>(
    y: &TruncatedSeries<T>,
    sel: RootSelector,
    k: usize,
    h: usize,
    bases: [MarkBasis; 2],
) -> Result<MarkedSeries<T>> {
    let p1 = MarkPoly::mark_minus_one(0, &bases);
    let mut current = if h == 0 {
        // both marks sit on the root: u1 u2 - 1 = (u1 - 1)(u2 - 1) + (u1 - 1) + (u2 - 1)
        let p2 = MarkPoly::mark_minus_one(1, &bases);
        let mut p = p1.mul(&p2);
        p.add_assign(&p1);
        p.add_assign(&p2);
        lift(y, bases).checked_add(&lift(&root_part(sel, y)?, bases).mul_poly(&p))?
    } else {
        let chain = level_chain(y, sel, h, bases, 1)?;
        let below = root_part(sel, &chain[h - 1])?;
        chain[h].checked_add(&below.mul_poly(&p1))?
    };
    for _ in 0..k {
        current = current.multiset()?.shift_x();
    }
    Ok(current)
}

/// Exact law of the number of marked vertices on one level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileDistribution {
    pub n: usize,
    pub selector: RootSelector,
    pub k: usize,
    /// `probs[ℓ] = P(L = ℓ)`.
    #[serde(serialize_with = "ser_ratios")]
    pub probs: Vec<BigRational>,
}

fn ser_ratios<S: serde::Serializer>(v: &[BigRational], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|r| r.to_string()))
}

impl ProfileDistribution {
    pub fn total(&self) -> BigRational {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> BigRational {
        self.probs.iter().enumerate().map(|(l, p)| p * BigInt::from(l)).sum()
    }

    /// `E L(L - 1)`.
    pub fn second_factorial(&self) -> BigRational {
        self.probs.iter().enumerate().map(|(l, p)| p * BigInt::from(l * l.saturating_sub(1))).sum()
    }
}

fn count_as<T: Scalar>(table: &CountTable, n: usize) -> T {
    T::from_bigint(&BigInt::from(table.y(n).clone()))
}

fn exact_y(table: &CountTable, n: usize) -> Result<TruncatedSeries<BigRational>> {
    if n == 0 {
        return usage("tree size must be positive");
    }
    table.series(n)
}

fn distribution_from(poly: &MarkPoly<BigRational>, bases: &[MarkBasis; 2], yn: &BigRational) -> Vec<BigRational> {
    let mut probs: Vec<BigRational> = poly.marginal(0, bases).into_iter().map(|c| c / yn).collect();
    while probs.len() > 1 && probs.last().is_some_and(|p| p.is_zero()) {
        probs.pop();
    }
    probs
}

/// `P(L_n(k) = ℓ)` for every `ℓ`, exact.
pub fn exact_distribution(table: &CountTable, n: usize, sel: RootSelector, k: usize) -> Result<ProfileDistribution> {
    let y = exact_y(table, n)?;
    let s = level_degree_series(&y, sel, k, MarkMode::Full)?;
    let yn: BigRational = count_as(table, n);
    Ok(ProfileDistribution { n, selector: sel, k, probs: distribution_from(s.poly(n), s.bases(), &yn) })
}

/// Distributions on every level `0..=k_max` from one pass of the recurrence.
pub fn exact_distributions_all(
    table: &CountTable,
    n: usize,
    sel: RootSelector,
    k_max: usize,
) -> Result<Vec<ProfileDistribution>> {
    let y = exact_y(table, n)?;
    let yn: BigRational = count_as(table, n);
    let chain = level_series_all(&y, sel, k_max, MarkMode::Full)?;
    Ok(chain
        .iter()
        .enumerate()
        .map(|(k, s)| ProfileDistribution { n, selector: sel, k, probs: distribution_from(s.poly(n), s.bases(), &yn) })
        .collect())
}

/// `result[n - 1][k]` for every size `1..=n_max` and level `0..=k_max`, from
/// one pass of the recurrence at order `n_max`.
pub fn exact_distributions_by_size(
    table: &CountTable,
    n_max: usize,
    sel: RootSelector,
    k_max: usize,
) -> Result<Vec<Vec<ProfileDistribution>>> {
    let y = exact_y(table, n_max)?;
    let chain = level_series_all(&y, sel, k_max, MarkMode::Full)?;
    Ok((1..=n_max)
        .map(|n| {
            let yn: BigRational = count_as(table, n);
            chain
                .iter()
                .enumerate()
                .map(|(k, s)| ProfileDistribution { n, selector: sel, k, probs: distribution_from(s.poly(n), s.bases(), &yn) })
                .collect()
        })
        .collect())
}

/// Exact joint law of the marked counts on levels `k` and `k + h`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointDistribution {
    pub n: usize,
    pub selector: RootSelector,
    pub k: usize,
    pub h: usize,
    /// `probs[a][b] = P(L(k) = a, L(k+h) = b)`.
    #[serde(serialize_with = "ser_table")]
    pub probs: Vec<Vec<BigRational>>,
}

fn ser_table<S: serde::Serializer>(v: &[Vec<BigRational>], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|row| row.iter().map(|r| r.to_string()).collect::<Vec<_>>()))
}

pub fn exact_joint_distribution(
    table: &CountTable,
    n: usize,
    sel: RootSelector,
    k: usize,
    h: usize,
) -> Result<JointDistribution> {
    let y = exact_y(table, n)?;
    let bases = [MarkBasis::Power { cap: n }, MarkBasis::Power { cap: n }];
    let s = two_level_series(&y, sel, k, h, bases)?;
    let yn: BigRational = count_as(table, n);
    let poly = s.poly(n);
    let probs = (0..=n).map(|a| (0..=n).map(|b| poly.get(a, b) / &yn).collect()).collect();
    Ok(JointDistribution { n, selector: sel, k, h, probs })
}

/// `γ_0, ..., γ_{k_max}`: first derivatives `∂_u y_k(x, 1)`, from
/// `γ_{k+1} = y (γ_k + Σ_{i≥2} γ_k(x^i))`, `γ_0 = R(y)`.
pub fn gamma_series<T: Scalar>(y: &TruncatedSeries<T>, sel: RootSelector, k_max: usize) -> Result<Vec<TruncatedSeries<T>>> {
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(root_part(sel, y)?);
    for k in 0..k_max {
        let g = &out[k];
        let sum = g.power_sum(1, |_| 1)?;
        out.push(y.checked_mul(&sum)?);
    }
    Ok(out)
}

/// Second factorial moment numerators `∂_u^2 y_k(x, 1)`:
/// `γ2_{k+1} = y [(γ_k + Γ_k)^2 + Σ_{i≥1} i γ2_k(x^i) + Σ_{i≥2} (i-1) γ_k(x^i)]`, `γ2_0 = 0`.
pub fn second_factorial_series<T: Scalar>(
    y: &TruncatedSeries<T>,
    gammas: &[TruncatedSeries<T>],
) -> Result<Vec<TruncatedSeries<T>>> {
    let mut out: Vec<TruncatedSeries<T>> = Vec::with_capacity(gammas.len());
    out.push(gammas[0].zero_like());
    for k in 0..gammas.len() - 1 {
        let full = gammas[k].power_sum(1, |_| 1)?;
        let mut inner = full.checked_mul(&full)?;
        inner = inner.checked_add(&out[k].power_sum(1, |i| i)?)?;
        inner = inner.checked_add(&gammas[k].power_sum(2, |i| i - 1)?)?;
        out.push(y.checked_mul(&inner)?);
    }
    Ok(out)
}

/// Mixed numerators `∂_{u1} ∂_{u2} y_k(x, 1, 1)` for two disjoint classes:
/// `γ̃_{k+1} = y [(γ1_k + Γ1_k)(γ2_k + Γ2_k) + Σ_{i≥1} i γ̃_k(x^i)]`, `γ̃_0 = 0`.
pub fn mixed_gamma_series<T: Scalar>(
    y: &TruncatedSeries<T>,
    first: &[TruncatedSeries<T>],
    second: &[TruncatedSeries<T>],
) -> Result<Vec<TruncatedSeries<T>>> {
    if first.len() != second.len() {
        return usage("level chains differ in length");
    }
    let mut out: Vec<TruncatedSeries<T>> = Vec::with_capacity(first.len());
    out.push(first[0].zero_like());
    for k in 0..first.len() - 1 {
        let a = first[k].power_sum(1, |_| 1)?;
        let b = second[k].power_sum(1, |_| 1)?;
        let inner = a.checked_mul(&b)?.checked_add(&out[k].power_sum(1, |i| i)?)?;
        out.push(y.checked_mul(&inner)?);
    }
    Ok(out)
}

/// Moments of two degree counts on one level.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable<T: Scalar> {
    pub n: usize,
    pub d1: usize,
    pub d2: usize,
    pub k: usize,
    pub mean1: T,
    pub mean2: T,
    /// `E X1 (X1 - 1)`.
    pub second_factorial1: T,
    pub second_factorial2: T,
    /// `E X1 X2` (equals `E X1^2` when `d1 = d2`).
    pub mixed: T,
    pub var1: T,
    pub var2: T,
    pub covariance: T,
    /// `None` when a variance vanishes.
    pub correlation: Option<f64>,
}

/// Exact (or double precision, depending on `T`) moments of
/// `X1 = L_n^{(d1)}(k)` and `X2 = L_n^{(d2)}(k)`.
pub fn finite_covariance<T: Scalar>(
    y: &TruncatedSeries<T>,
    d1: usize,
    d2: usize,
    n: usize,
    k: usize,
) -> Result<MomentTable<T>> {
    if n == 0 || n > y.order() {
        return usage(format!("n = {n} outside the series order {}", y.order()));
    }
    let y = y.truncate(n);
    let g1 = gamma_series(&y, RootSelector::Degree(d1), k)?;
    let f1 = second_factorial_series(&y, &g1)?;
    let at = |s: &TruncatedSeries<T>| s.coeff_ratio(&y, n);
    let mean1 = at(&g1[k]);
    let sf1 = at(&f1[k]);
    let var1 = sf1.clone() + mean1.clone() - mean1.mul_ref(&mean1);
    let (mean2, sf2, var2, mixed) = if d1 == d2 {
        let mixed = sf1.clone() + mean1.clone();
        (mean1.clone(), sf1.clone(), var1.clone(), mixed)
    } else {
        let g2 = gamma_series(&y, RootSelector::Degree(d2), k)?;
        let f2 = second_factorial_series(&y, &g2)?;
        let mix = mixed_gamma_series(&y, &g1, &g2)?;
        let mean2 = at(&g2[k]);
        let sf2 = at(&f2[k]);
        let var2 = sf2.clone() + mean2.clone() - mean2.mul_ref(&mean2);
        (mean2, sf2, var2, at(&mix[k]))
    };
    let covariance = mixed.clone() - mean1.mul_ref(&mean2);
    let correlation = if var1.is_zero() || var2.is_zero() {
        None
    } else {
        Some(covariance.to_f64() / (var1.to_f64() * var2.to_f64()).sqrt())
    };
    Ok(MomentTable {
        n,
        d1,
        d2,
        k,
        mean1,
        mean2,
        second_factorial1: sf1,
        second_factorial2: sf2,
        mixed,
        var1,
        var2,
        covariance,
        correlation,
    })
}

/// `E L_n(k)` of the selected class for every level `0..=k_max`.
pub fn mean_profile<T: Scalar>(y: &TruncatedSeries<T>, sel: RootSelector, n: usize, k_max: usize) -> Result<Vec<T>> {
    if n == 0 || n > y.order() {
        return usage(format!("n = {n} outside the series order {}", y.order()));
    }
    let y = y.truncate(n);
    Ok(gamma_series(&y, sel, k_max)?.iter().map(|g| g.coeff_ratio(&y, n)).collect())
}

/// Exact `E (L_n(r) - L_n(r+h))^4` for the total level sizes, from the
/// two-level series evaluated at `(u, 1/u)` and expanded to `ε^4` around `u = 1`.
pub fn tightness_fourth_moment<T: Scalar>(y: &TruncatedSeries<T>, n: usize, r: usize, h: usize) -> Result<T> {
    if n == 0 || n > y.order() {
        return usage(format!("n = {n} outside the series order {}", y.order()));
    }
    if h == 0 {
        return Ok(T::zero());
    }
    let y = y.truncate(n);
    let bases = [MarkBasis::Shifted { order: 4 }, MarkBasis::Shifted { order: 4 }];
    let s = two_level_series(&y, RootSelector::Any, r, h, bases)?;
    let c = s.poly(n).compose_inverse_pair(4);
    // Z^4 = C(Z,1) + 14 C(Z,2) + 36 C(Z,3) + 24 C(Z,4)
    let mut acc = c[1].clone();
    acc.add_assign_ref(&c[2].mul_usize(14));
    acc.add_assign_ref(&c[3].mul_usize(36));
    acc.add_assign_ref(&c[4].mul_usize(24));
    Ok(acc / y.stored()[n].clone())
}

/// Level index `⌊κ √n⌋`.
pub fn scaled_level(kappa: f64, n: usize) -> usize {
    (kappa * (n as f64).sqrt() + 1e-12).floor() as usize
}

/// Double precision tree series at order `n` for large-size moment work.
pub fn float_tree_series(table: &CountTable, n: usize) -> Result<TruncatedSeries<f64>> {
    table.scaled_series(n, crate::constants::FLOAT_SCALE)
}

/// Exact `y(x)` as a rational series.
pub fn exact_tree_series(table: &CountTable, n: usize) -> Result<TruncatedSeries<BigRational>> {
    exact_y(table, n)
}

/// Checks that a selector is usable.
pub fn check_selector(sel: RootSelector) -> Result<()> {
    match sel {
        RootSelector::Degree(0) => Err(Error::Usage("degrees start at 1".into())),
        _ => Ok(()),
    }
}

/// `Σ_ℓ ℓ P(ℓ)` over levels equals the total count of the class over `y_n`.
pub fn level_sum_of_means(dists: &[ProfileDistribution]) -> BigRational {
    dists.iter().map(|d| d.mean()).fold(BigRational::zero(), |a, b| a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumeration::count_trees;
    use num_traits::One;

    type Q = BigRational;

    #[test]
    fn small_examples() {
        let t = count_trees(8).unwrap();
        let d = exact_distribution(&t, 3, RootSelector::Degree(1), 1).unwrap();
        assert_eq!(d.probs, vec![Q::ratio(1, 2), Q::zero(), Q::ratio(1, 2)]);
        let d = exact_distribution(&t, 2, RootSelector::Degree(1), 1).unwrap();
        assert_eq!(d.probs, vec![Q::zero(), Q::one()]);
    }

    #[test]
    fn marks_collapse_at_one() {
        let t = count_trees(12).unwrap();
        let y = exact_tree_series(&t, 12).unwrap();
        for mode in [MarkMode::Full, MarkMode::Moments(2)] {
            let s = level_degree_series(&y, RootSelector::Degree(2), 3, mode).unwrap();
            assert_eq!(s.at_one(), y);
        }
    }

    #[test]
    fn two_level_reductions() {
        let n = 10;
        let t = count_trees(n).unwrap();
        let y = exact_tree_series(&t, n).unwrap();
        let bases = [MarkBasis::Power { cap: n }, MarkBasis::Power { cap: n }];
        for (k, h) in [(0, 0), (1, 0), (0, 2), (2, 1), (1, 3)] {
            let joint = two_level_series(&y, RootSelector::Degree(1), k, h, bases).unwrap();
            let lower = level_degree_series(&y, RootSelector::Degree(1), k, MarkMode::Full).unwrap();
            let upper = level_degree_series(&y, RootSelector::Degree(1), k + h, MarkMode::Full).unwrap();
            for m in 0..=n {
                let p = joint.poly(m);
                assert_eq!(p.marginal(0, &bases), lower.poly(m).marginal(0, lower.bases()), "k={k} h={h} m={m}");
                assert_eq!(p.marginal(1, &bases), upper.poly(m).marginal(0, upper.bases()), "k={k} h={h} m={m}");
            }
        }
    }

    #[test]
    fn moments_mode_matches_gamma() {
        let n = 16;
        let t = count_trees(n).unwrap();
        let y = exact_tree_series(&t, n).unwrap();
        let sel = RootSelector::Degree(3);
        let chain = level_series_all(&y, sel, 6, MarkMode::Moments(2)).unwrap();
        let g = gamma_series(&y, sel, 6).unwrap();
        let f = second_factorial_series(&y, &g).unwrap();
        for k in 0..=6 {
            for m in 0..=n {
                assert_eq!(chain[k].poly(m).get(1, 0), &g[k].coeff(m));
                assert_eq!(chain[k].poly(m).get(2, 0) * Q::from_int(2), f[k].coeff(m));
            }
        }
    }

    #[test]
    fn float_moments_track_exact() {
        let n = 40;
        let t = count_trees(n).unwrap();
        let exact = finite_covariance(&exact_tree_series(&t, n).unwrap(), 1, 2, n, 5).unwrap();
        let float = finite_covariance(&float_tree_series(&t, n).unwrap(), 1, 2, n, 5).unwrap();
        for (a, b) in [(exact.mean1, float.mean1), (exact.covariance, float.covariance), (exact.var2, float.var2)] {
            assert!((a.to_f64() - b).abs() < 1e-10 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn tightness_at_zero_gap_is_zero() {
        let t = count_trees(8).unwrap();
        let y = exact_tree_series(&t, 8).unwrap();
        assert!(tightness_fourth_moment(&y, 8, 1, 0).unwrap().is_zero());
    }

    #[test]
    fn scaled_level_floors() {
        assert_eq!(scaled_level(1.0, 400), 20);
        assert_eq!(scaled_level(0.5, 1600), 20);
        assert_eq!(scaled_level(0.0, 100), 0);
    }
}
