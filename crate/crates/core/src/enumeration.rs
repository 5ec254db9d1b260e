//! Exact counting of rooted unlabelled trees.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{usage, Result};
use crate::powerseries::{Algebra, SeriesAlgebra, TruncatedSeries};
use crate::scalar::Scalar;
use crate::tree::PolyaTree;

/// Largest size accepted by [`enumerate_trees_exhaustive`].
pub const EXHAUSTIVE_MAX: usize = 10;

/// `y[n]`, the number of trees with `n` nodes, and the Euler-transform
/// weights `s[n] = Σ_{d | n} d y[d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    y: Vec<BigUint>,
    s: Vec<BigUint>,
}

impl CountTable {
    pub fn n_max(&self) -> usize {
        self.y.len() - 1
    }

    pub fn y(&self, n: usize) -> &BigUint {
        &self.y[n]
    }

    pub fn s(&self, n: usize) -> &BigUint {
        &self.s[n]
    }

    pub fn counts(&self) -> &[BigUint] {
        &self.y
    }

    /// Natural logarithm of `y[n]` (`-inf` for `n = 0`).
    pub fn ln_y(&self, n: usize) -> f64 {
        biguint_ln(&self.y[n])
    }

    /// `y(x)` with exact coefficients, truncated at `order ≤ n_max`.
    pub fn series<T: Scalar>(&self, order: usize) -> Result<TruncatedSeries<T>> {
        self.check_order(order)?;
        Ok(TruncatedSeries::from_fn(order, |n| T::from_bigint(&BigInt::from(self.y[n].clone()))))
    }

    /// `y(x)` in double precision with stored values `y_n r^n`, which stay
    /// finite for orders far beyond the overflow point of `y_n` itself.
    pub fn scaled_series(&self, order: usize, scale: f64) -> Result<TruncatedSeries<f64>> {
        self.check_order(order)?;
        let ln_r = scale.ln();
        let stored = (0..=order)
            .map(|n| if n == 0 { 0.0 } else { (self.ln_y(n) + n as f64 * ln_r).exp() })
            .collect();
        Ok(TruncatedSeries::from_scaled(stored, scale))
    }

    fn check_order(&self, order: usize) -> Result<()> {
        if order > self.n_max() {
            return usage(format!("order {order} exceeds the count table ({})", self.n_max()));
        }
        Ok(())
    }
}

/// `ln x` for a big unsigned integer.
pub fn biguint_ln(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("fits a double").ln();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().expect("fits a double").ln() + shift as f64 * std::f64::consts::LN_2
}

/// Ratio used by [`scaled_ln_counts`].
pub const COUNT_SCALE: f64 = 1.0 / 3.0;

/// `ln(y[n] · COUNT_SCALE^n)` for `n ≤ n_max` from the counting recurrence
/// run in double precision. Every term is positive, so relative errors stay
/// near the rounding level; this is much cheaper than [`count_trees`] at
/// large sizes.
pub fn scaled_ln_counts(n_max: usize) -> Result<Vec<f64>> {
    if n_max < 1 {
        return usage("scaled_ln_counts needs n_max ≥ 1");
    }
    let r = COUNT_SCALE;
    let mut y = vec![0.0f64; n_max + 1];
    let mut s = vec![0.0f64; n_max + 1];
    // s_m r^m = Σ_{d | m} d (y_d r^d) r^{m-d}
    for (m, v) in s.iter_mut().enumerate().skip(1) {
        *v = r.powi(m as i32);
    }
    y[1] = r;
    for n in 2..=n_max {
        let acc: f64 = (1..n).map(|k| s[k] * y[n - k]).sum();
        y[n] = acc / (n - 1) as f64;
        s[n] += n as f64 * y[n];
        let mut m = 2 * n;
        while m <= n_max {
            s[m] += n as f64 * y[n] * r.powi((m - n) as i32);
            m += n;
        }
    }
    Ok(y.iter().map(|v| v.ln()).collect())
}

/// Counts for all sizes up to `n_max` by `(n-1) y[n] = Σ_{k<n} s[k] y[n-k]`.
pub fn count_trees(n_max: usize) -> Result<CountTable> {
    if n_max < 1 {
        return usage("count_trees needs n_max ≥ 1");
    }
    let mut t = CountTable { y: vec![BigUint::zero(), BigUint::one()], s: vec![BigUint::zero(), BigUint::one()] };
    t.extend_to(n_max);
    Ok(t)
}

impl CountTable {
    /// Grows the table in place; a no-op when it already reaches `n_max`.
    pub fn extend_to(&mut self, n_max: usize) {
        for n in self.y.len()..=n_max {
            let mut acc = BigUint::zero();
            for k in 1..n {
                acc += &self.s[k] * &self.y[n - k];
            }
            self.y.push(acc / BigUint::from(n - 1));
            let mut s = BigUint::zero();
            for d in divisors(n) {
                s += &self.y[d] * BigUint::from(d);
            }
            self.s.push(s);
        }
    }
}

fn divisors(n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            if d * d != n {
                out.push(n / d);
            }
        }
        d += 1;
    }
    out
}

/// Cycle indices `Z_0, ..., Z_d` of the symmetric groups evaluated at
/// `s_1, s_2, ...`, via `Z_m = (1/m) Σ_{r=1}^{m} s_r Z_{m-r}`.
pub fn cycle_index_all<A: Algebra>(d: usize, s: &[A]) -> Result<Vec<A>> {
    if s.is_empty() {
        return usage("cycle index needs at least one argument");
    }
    if s.len() < d {
        return usage(format!("Z_{d} needs {d} arguments, got {}", s.len()));
    }
    let mut z = Vec::with_capacity(d + 1);
    z.push(s[0].one_like());
    for m in 1..=d {
        let mut acc = s[0].mul(&z[m - 1]);
        for r in 2..=m {
            acc = acc.add(&s[r - 1].mul(&z[m - r]));
        }
        z.push(acc.div_usize(m));
    }
    Ok(z)
}

/// `Z_d(s_1, ..., s_d)`.
pub fn cycle_index_apply<A: Algebra>(d: usize, s: &[A]) -> Result<A> {
    Ok(cycle_index_all(d, s)?.pop().expect("Z_0 is always present"))
}

/// `x Z_{d-1}(f(x), f(x^2), ..., f(x^{d-1}))`: a planted root of degree `d`
/// over a multiset of `d - 1` subtrees counted by `f`.
pub fn planted_root_term<S: SeriesAlgebra>(d: usize, child: &S) -> Result<S> {
    if d == 0 {
        return usage("degrees start at 1");
    }
    let args: Vec<S> = (1..d.max(2)).map(|i| child.substitute_power(i)).collect();
    Ok(cycle_index_apply(d - 1, &args)?.shift_x())
}

/// Generating function of the total number of degree-`d` vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeSeriesSet<T: Scalar> {
    pub d: usize,
    /// `Σ_n d_n x^n` with `d_n` the number of degree-`d` vertices over all trees of size `n`.
    pub total: TruncatedSeries<T>,
    /// `x Z_{d-1}(y(x), ..., y(x^{d-1}))`.
    pub root_term: TruncatedSeries<T>,
}

/// Solves `(1 - y) D = y Σ_{i≥2} D(x^i) + x Z_{d-1}(y(x), ...)` order by order.
pub fn degree_series<T: Scalar>(d: usize, y: &TruncatedSeries<T>) -> Result<DegreeSeriesSet<T>> {
    let root_term = planted_root_term(d, y)?;
    let n = y.order();
    let scale = y.scale().clone();
    let unit = scale.is_one();
    let ys = y.stored();
    let zs = root_term.stored();
    // stored values of D and of E = Σ_{i≥2} D(x^i)
    let mut dd = vec![T::zero(); n + 1];
    let mut ee = vec![T::zero(); n + 1];
    for m in 1..=n {
        let mut acc = zs[m].clone();
        for j in 1..m {
            let mut inner = dd[m - j].clone();
            inner.add_assign_ref(&ee[m - j]);
            acc.mul_acc(&ys[j], &inner);
        }
        dd[m] = acc;
        // D_m feeds E at m*i, stored with the extra factor r^{m(i-1)}
        let step = if unit { T::one() } else { scale.pow_usize(m) };
        let mut factor = step.clone();
        let mut idx = 2 * m;
        while idx <= n {
            if unit {
                ee[idx].add_assign_ref(&dd[m]);
            } else {
                ee[idx].add_assign_ref(&dd[m].mul_ref(&factor));
                factor = factor.mul_ref(&step);
            }
            idx += m;
        }
    }
    Ok(DegreeSeriesSet { d, total: TruncatedSeries::from_scaled(dd, scale), root_term })
}

/// One tree per isomorphism class of size `n`, in canonical layout.
pub fn enumerate_trees_exhaustive(n: usize) -> Result<Vec<PolyaTree>> {
    if n == 0 || n > EXHAUSTIVE_MAX {
        return usage(format!("exhaustive enumeration supports 1 ≤ n ≤ {EXHAUSTIVE_MAX}"));
    }
    // codes[m] lists the canonical codes of all trees of size m
    let mut codes: Vec<Vec<String>> = vec![Vec::new(), vec!["()".to_string()]];
    for m in 2..=n {
        let mut out = Vec::new();
        let mut chosen = Vec::new();
        forests(&codes, m - 1, (m - 1, usize::MAX), &mut chosen, &mut out);
        out.sort();
        codes.push(out);
    }
    codes[n].iter().map(|c| PolyaTree::from_code(c)).collect()
}

/// All multisets of trees with total size `left`, with parts `(size, index)`
/// taken in nonincreasing order not above `bound`.
fn forests(
    codes: &[Vec<String>],
    left: usize,
    bound: (usize, usize),
    chosen: &mut Vec<(usize, usize)>,
    out: &mut Vec<String>,
) {
    if left == 0 {
        let mut parts: Vec<&str> = chosen.iter().map(|&(s, i)| codes[s][i].as_str()).collect();
        parts.sort_unstable_by(|a, b| b.cmp(a));
        out.push(format!("({})", parts.concat()));
        return;
    }
    for size in (1..=left.min(bound.0)).rev() {
        let top = if size == bound.0 { bound.1.min(codes[size].len().saturating_sub(1)) } else { codes[size].len() - 1 };
        for idx in (0..=top).rev() {
            chosen.push((size, idx));
            forests(codes, left - size, (size, idx), chosen, out);
            chosen.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    type Q = BigRational;

    #[test]
    fn scaled_log_counts_track_exact() {
        let t = count_trees(1200).unwrap();
        let f = scaled_ln_counts(1200).unwrap();
        for n in 1..=1200 {
            let e = t.ln_y(n) + n as f64 * COUNT_SCALE.ln();
            // the exact side carries the rounding of ln y_n itself
            assert!((f[n] - e).abs() <= 1e-15 * t.ln_y(n) + 1e-13, "n = {n}: {} vs {e}", f[n]);
        }
    }

    #[test]
    fn extension_matches_fresh_table() {
        let mut t = count_trees(10).unwrap();
        t.extend_to(60);
        assert_eq!(t, count_trees(60).unwrap());
    }

    #[test]
    fn first_counts() {
        let t = count_trees(10).unwrap();
        let expect = [0u32, 1, 1, 2, 4, 9, 20, 48, 115, 286, 719];
        for (n, &e) in expect.iter().enumerate() {
            assert_eq!(t.y(n), &BigUint::from(e));
        }
        assert!(count_trees(0).is_err());
    }

    #[test]
    fn exhaustive_matches_counts() {
        let t = count_trees(EXHAUSTIVE_MAX).unwrap();
        for n in 1..=8 {
            let trees = enumerate_trees_exhaustive(n).unwrap();
            assert_eq!(BigUint::from(trees.len()), *t.y(n), "n = {n}");
            let mut codes: Vec<String> = trees.iter().map(|t| t.canonical_code()).collect();
            codes.dedup();
            assert_eq!(codes.len(), trees.len());
            assert!(trees.iter().all(|t| t.size() == n));
        }
        assert!(enumerate_trees_exhaustive(EXHAUSTIVE_MAX + 1).is_err());
    }

    #[test]
    fn cycle_index_small_groups() {
        let s = [Q::from_int(2), Q::from_int(3), Q::from_int(5)];
        assert_eq!(cycle_index_apply(0, &s).unwrap(), Q::from_int(1));
        // (s1² + s2)/2 and (s1³ + 3 s1 s2 + 2 s3)/6
        assert_eq!(cycle_index_apply(2, &s).unwrap(), Q::ratio(7, 2));
        assert_eq!(cycle_index_apply(3, &s).unwrap(), Q::ratio(8 + 18 + 10, 6));
        assert!(cycle_index_apply(4, &s).is_err());
    }

    #[test]
    fn multiset_identity_through_cycle_indices() {
        let order = 20;
        let y: TruncatedSeries<Q> = count_trees(order).unwrap().series(order).unwrap();
        let args: Vec<_> = (1..=order).map(|i| y.substitute_power(i)).collect();
        let z = cycle_index_all(order, &args).unwrap();
        let mut sum = TruncatedSeries::zero(order);
        for zd in &z {
            sum = &sum + zd;
        }
        assert_eq!(sum.shift_x(), y);
    }

    #[test]
    fn degree_counts_partition_vertices() {
        let order = 30;
        let table = count_trees(order).unwrap();
        let y: TruncatedSeries<Q> = table.series(order).unwrap();
        let mut total = vec![Q::zero(); order + 1];
        for d in 1..=order {
            let ds = degree_series(d, &y).unwrap();
            for n in 0..=order {
                let c = ds.total.coeff(n);
                assert!(c.is_integer() && c >= Q::zero());
                if n < d {
                    assert!(c.is_zero(), "d = {d}, n = {n}");
                }
                total[n] += c;
            }
        }
        for n in 1..=order {
            assert_eq!(total[n], Q::from_count(n) * Q::from_bigint(&BigInt::from(table.y(n).clone())));
        }
        let leaves = degree_series(1, &y).unwrap();
        assert_eq!(leaves.total.coeff(2), Q::from_int(1));
    }

    #[test]
    fn scaled_float_degree_series() {
        let order = 60;
        let table = count_trees(order).unwrap();
        let exact = degree_series(2, &table.series::<Q>(order).unwrap()).unwrap();
        let r = 0.34;
        let float = degree_series(2, &table.scaled_series(order, r).unwrap()).unwrap();
        for n in [10, 30, 60] {
            let want = Scalar::to_f64(&exact.total.coeff(n)) * r.powi(n as i32);
            let got = float.total.stored()[n];
            assert!((got / want - 1.0).abs() < 1e-12, "n = {n}: {got} vs {want}");
        }
    }

    #[test]
    fn huge_counts_have_finite_logs() {
        let t = count_trees(1200).unwrap();
        let l = t.ln_y(1200);
        assert!(l.is_finite() && l > 1000.0);
        let s = t.scaled_series(1200, 0.338).unwrap();
        assert!(s.stored().iter().all(|v| v.is_finite()));
    }
}
