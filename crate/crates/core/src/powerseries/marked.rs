//! Series in `x` whose coefficients are dense polynomials in up to two
//! marking variables.
//!
//! Each marking variable uses one of two bases. [`MarkBasis::Power`] keeps the
//! coefficients of `u^0..=u^cap` and yields full distributions.
//! [`MarkBasis::Shifted`] writes `u = 1 + ε` and keeps `ε^0..=ε^order`; the
//! coefficient of `ε^j` is the `j`-th derivative at `u = 1` divided by `j!`,
//! so a single pass produces every factorial moment up to `order`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{Algebra, SeriesAlgebra, TruncatedSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkBasis {
    /// Coefficients of `u^0..=u^cap`; degrees above `cap` are dropped.
    Power { cap: usize },
    /// Coefficients of `ε^0..=ε^order` where `u = 1 + ε`.
    Shifted { order: usize },
}

impl MarkBasis {
    /// Placeholder for an unused second variable.
    pub const ABSENT: MarkBasis = MarkBasis::Power { cap: 0 };

    pub fn len(&self) -> usize {
        match *self {
            MarkBasis::Power { cap } => cap + 1,
            MarkBasis::Shifted { order } => order + 1,
        }
    }

    /// Table `t[a][j] = [ε^j] ((1+ε)^i - 1)^a` for the shifted basis.
    fn shifted_table<T: Scalar>(order: usize, i: usize) -> Vec<Vec<T>> {
        let mut q = vec![T::zero(); order + 1];
        // (1+ε)^i - 1 = Σ_{j≥1} C(i, j) ε^j
        let mut binom = T::one();
        for (j, slot) in q.iter_mut().enumerate().skip(1) {
            if j > i {
                break;
            }
            binom = binom.mul_usize(i + 1 - j).div_usize(j);
            *slot = binom.clone();
        }
        let mut table = Vec::with_capacity(order + 1);
        let mut cur = vec![T::zero(); order + 1];
        cur[0] = T::one();
        for _ in 0..=order {
            table.push(cur.clone());
            let mut next = vec![T::zero(); order + 1];
            for (a, ca) in cur.iter().enumerate() {
                if ca.is_zero() {
                    continue;
                }
                for b in 1..=(order - a) {
                    next[a + b].mul_acc(ca, &q[b]);
                }
            }
            cur = next;
        }
        table
    }
}

/// Dense polynomial in two marking variables, `len_a × len_b` coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkPoly<T: Scalar> {
    data: Vec<T>,
    len_a: usize,
    len_b: usize,
}

impl<T: Scalar> MarkPoly<T> {
    pub fn zero(bases: &[MarkBasis; 2]) -> Self {
        let (len_a, len_b) = (bases[0].len(), bases[1].len());
        Self { data: vec![T::zero(); len_a * len_b], len_a, len_b }
    }

    pub fn constant(c: T, bases: &[MarkBasis; 2]) -> Self {
        let mut p = Self::zero(bases);
        p.data[0] = c;
        p
    }

    /// `u_var - 1` expressed in the basis of that variable.
    pub fn mark_minus_one(var: usize, bases: &[MarkBasis; 2]) -> Self {
        assert!(var < 2);
        assert!(bases[var].len() >= 2, "marking variable has no room for degree one");
        let mut p = Self::zero(bases);
        let unit = if var == 0 { p.len_b } else { 1 };
        p.data[unit] = T::one();
        if let MarkBasis::Power { .. } = bases[var] {
            p.data[0] = -T::one();
        }
        p
    }

    pub fn get(&self, a: usize, b: usize) -> &T {
        &self.data[a * self.len_b + b]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.len_a, self.len_b)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|c| c.is_zero())
    }

    fn support(&self) -> Option<(usize, usize)> {
        let mut top = None;
        for a in 0..self.len_a {
            for b in 0..self.len_b {
                if !self.get(a, b).is_zero() {
                    let (ma, mb) = top.unwrap_or((0, 0));
                    top = Some((ma.max(a), mb.max(b)));
                }
            }
        }
        top
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            a.add_assign_ref(b);
        }
    }

    pub fn scaled(&self, c: &T) -> Self {
        Self { data: self.data.iter().map(|x| x.mul_ref(c)).collect(), ..*self }
    }

    pub fn div_usize(&self, d: usize) -> Self {
        Self { data: self.data.iter().map(|x| x.div_usize(d)).collect(), ..*self }
    }

    /// `acc += self * other`, truncated to the common dimensions.
    pub fn mul_acc_into(&self, other: &Self, acc: &mut Self) {
        let (Some((ta, tb)), Some((oa, ob))) = (self.support(), other.support()) else {
            return;
        };
        let lb = self.len_b;
        for a1 in 0..=ta {
            for b1 in 0..=tb {
                let c1 = &self.data[a1 * lb + b1];
                if c1.is_zero() {
                    continue;
                }
                for a2 in 0..=oa.min(self.len_a - 1 - a1) {
                    for b2 in 0..=ob.min(lb - 1 - b1) {
                        acc.data[(a1 + a2) * lb + b1 + b2].mul_acc(c1, &other.data[a2 * lb + b2]);
                    }
                }
            }
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self { data: vec![T::zero(); self.data.len()], ..*self };
        self.mul_acc_into(other, &mut out);
        out
    }

    /// Apply `u -> u^i` (and `v -> v^i`) in the given bases.
    fn substitute(&self, i: usize, bases: &[MarkBasis; 2], tables: &[Option<Vec<Vec<T>>>; 2]) -> Self {
        if i == 1 {
            return self.clone();
        }
        let mut stage = Self { data: vec![T::zero(); self.data.len()], ..*self };
        // first variable
        for a in 0..self.len_a {
            for b in 0..self.len_b {
                let c = self.get(a, b);
                if c.is_zero() {
                    continue;
                }
                match (&bases[0], &tables[0]) {
                    (MarkBasis::Power { .. }, _) => {
                        if a * i < self.len_a {
                            stage.data[a * i * self.len_b + b].add_assign_ref(c);
                        }
                    }
                    (MarkBasis::Shifted { .. }, Some(t)) => {
                        for (j, tj) in t[a].iter().enumerate() {
                            stage.data[j * self.len_b + b].mul_acc(c, tj);
                        }
                    }
                    (MarkBasis::Shifted { .. }, None) => unreachable!("shifted table missing"),
                }
            }
        }
        if self.len_b == 1 {
            return stage;
        }
        let mut out = Self { data: vec![T::zero(); self.data.len()], ..*self };
        for a in 0..self.len_a {
            for b in 0..self.len_b {
                let c = stage.get(a, b);
                if c.is_zero() {
                    continue;
                }
                match (&bases[1], &tables[1]) {
                    (MarkBasis::Power { .. }, _) => {
                        if b * i < self.len_b {
                            out.data[a * self.len_b + b * i].add_assign_ref(c);
                        }
                    }
                    (MarkBasis::Shifted { .. }, Some(t)) => {
                        for (j, tj) in t[b].iter().enumerate() {
                            out.data[a * self.len_b + j].mul_acc(c, tj);
                        }
                    }
                    (MarkBasis::Shifted { .. }, None) => unreachable!("shifted table missing"),
                }
            }
        }
        out
    }

    /// Value at `u = v = 1`.
    pub fn at_one(&self, bases: &[MarkBasis; 2]) -> T {
        let mut acc = T::zero();
        for a in 0..self.len_a {
            if a > 0 && matches!(bases[0], MarkBasis::Shifted { .. }) {
                break;
            }
            for b in 0..self.len_b {
                if b > 0 && matches!(bases[1], MarkBasis::Shifted { .. }) {
                    break;
                }
                acc.add_assign_ref(self.get(a, b));
            }
        }
        acc
    }

    /// Marginal in the first variable at `v = 1`, or in the second at `u = 1`.
    pub fn marginal(&self, var: usize, bases: &[MarkBasis; 2]) -> Vec<T> {
        let other = 1 - var;
        let shifted_other = matches!(bases[other], MarkBasis::Shifted { .. });
        let (len_keep, len_sum) = if var == 0 { (self.len_a, self.len_b) } else { (self.len_b, self.len_a) };
        (0..len_keep)
            .map(|k| {
                let mut acc = T::zero();
                for s in 0..len_sum {
                    if s > 0 && shifted_other {
                        break;
                    }
                    let c = if var == 0 { self.get(k, s) } else { self.get(s, k) };
                    acc.add_assign_ref(c);
                }
                acc
            })
            .collect()
    }

    /// For two shifted variables, substitute `ε1 = ε` and `ε2 = (1+ε)^{-1} - 1`,
    /// i.e. evaluate at `(u, 1/u)`; returns the `ε`-coefficients up to `order`.
    pub fn compose_inverse_pair(&self, order: usize) -> Vec<T> {
        // (1+ε)^{-1} - 1 = Σ_{j≥1} (-1)^j ε^j
        let mut inv = vec![T::zero(); order + 1];
        for (j, slot) in inv.iter_mut().enumerate().skip(1) {
            *slot = if j % 2 == 0 { T::one() } else { -T::one() };
        }
        let mut inv_pows = vec![{
            let mut one = vec![T::zero(); order + 1];
            one[0] = T::one();
            one
        }];
        for p in 1..self.len_b {
            let prev = &inv_pows[p - 1];
            let mut next = vec![T::zero(); order + 1];
            for (i, ci) in prev.iter().enumerate() {
                for j in 1..=(order - i) {
                    next[i + j].mul_acc(ci, &inv[j]);
                }
            }
            inv_pows.push(next);
        }
        let mut out = vec![T::zero(); order + 1];
        for a in 0..self.len_a.min(order + 1) {
            for b in 0..self.len_b {
                let c = self.get(a, b);
                if c.is_zero() {
                    continue;
                }
                for (j, w) in inv_pows[b].iter().enumerate() {
                    if a + j <= order {
                        out[a + j].mul_acc(c, w);
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkedSeries<T: Scalar> {
    coeffs: Vec<MarkPoly<T>>,
    bases: [MarkBasis; 2],
    scale: T,
}

impl<T: Scalar> MarkedSeries<T> {
    /// Lift an unmarked series (constant polynomials).
    pub fn from_series(s: &TruncatedSeries<T>, bases: [MarkBasis; 2]) -> Self {
        let coeffs = s.stored().iter().map(|c| MarkPoly::constant(c.clone(), &bases)).collect();
        Self { coeffs, bases, scale: s.scale().clone() }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn bases(&self) -> &[MarkBasis; 2] {
        &self.bases
    }

    pub fn scale(&self) -> &T {
        &self.scale
    }

    /// Stored polynomial at `x^n` (scaled like [`TruncatedSeries::stored`]).
    pub fn poly(&self, n: usize) -> &MarkPoly<T> {
        &self.coeffs[n]
    }

    fn like(&self, coeffs: Vec<MarkPoly<T>>) -> Self {
        Self { coeffs, bases: self.bases, scale: self.scale.clone() }
    }

    fn zero_like(&self) -> Self {
        self.like(vec![MarkPoly::zero(&self.bases); self.coeffs.len()])
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.order() != other.order() || self.bases != other.bases || self.scale != other.scale {
            return Err(Error::Usage("marked series differ in order, bases or scale".into()));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            a.add_assign(b);
        }
        Ok(out)
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let n = self.order();
        let mut out = self.zero_like();
        let nz_a: Vec<usize> = (0..=n).filter(|&i| !self.coeffs[i].is_zero()).collect();
        let nz_b: Vec<usize> = (0..=n).filter(|&i| !other.coeffs[i].is_zero()).collect();
        for &i in &nz_a {
            for &j in nz_b.iter().take_while(|&&j| i + j <= n) {
                let (head, tail) = out.coeffs.split_at_mut(i + j);
                let _ = head;
                self.coeffs[i].mul_acc_into(&other.coeffs[j], &mut tail[0]);
            }
        }
        Ok(out)
    }

    /// Multiply every coefficient by a polynomial in the marks.
    pub fn mul_poly(&self, p: &MarkPoly<T>) -> Self {
        self.like(self.coeffs.iter().map(|c| c.mul(p)).collect())
    }

    pub fn shift_x(&self) -> Self {
        let n = self.order();
        let mut out = Vec::with_capacity(n + 1);
        out.push(MarkPoly::zero(&self.bases));
        let unit = self.scale.is_one();
        for k in 1..=n {
            out.push(if unit { self.coeffs[k - 1].clone() } else { self.coeffs[k - 1].scaled(&self.scale) });
        }
        self.like(out)
    }

    fn tables(&self, i: usize) -> [Option<Vec<Vec<T>>>; 2] {
        let t = |b: &MarkBasis| match *b {
            MarkBasis::Shifted { order } if i > 1 => Some(MarkBasis::shifted_table::<T>(order, i)),
            _ => None,
        };
        [t(&self.bases[0]), t(&self.bases[1])]
    }

    /// `x -> x^i` together with `u -> u^i`, `v -> v^i`.
    pub fn substitute_power(&self, i: usize) -> Self {
        assert!(i >= 1, "substitution power must be positive");
        if i == 1 {
            return self.clone();
        }
        let n = self.order();
        let tables = self.tables(i);
        let mut out = vec![MarkPoly::zero(&self.bases); n + 1];
        let unit = self.scale.is_one();
        let step = if unit { T::one() } else { self.scale.pow_usize(i - 1) };
        let mut factor = T::one();
        for m in 0..=(n / i) {
            let mut p = self.coeffs[m].substitute(i, &self.bases, &tables);
            if !unit {
                p = p.scaled(&factor);
                factor = factor.mul_ref(&step);
            }
            out[m * i] = p;
        }
        self.like(out)
    }

    fn require_zero_constant(&self, what: &str) -> Result<()> {
        if !self.coeffs[0].is_zero() {
            return Err(Error::Domain(format!("{what} needs a zero constant term")));
        }
        Ok(())
    }

    /// `Σ_{i≥1} a(x^i, u^i, v^i)/i`.
    pub fn polya_exponent(&self) -> Result<Self> {
        self.require_zero_constant("Pólya exponent")?;
        let mut acc = self.zero_like();
        for i in 1..=self.order().max(1) {
            let sub = self.substitute_power(i);
            for (a, b) in acc.coeffs.iter_mut().zip(&sub.coeffs) {
                a.add_assign(&b.div_usize(i));
            }
        }
        Ok(acc)
    }

    pub fn exp(&self) -> Result<Self> {
        self.require_zero_constant("exp")?;
        let weighted: Vec<MarkPoly<T>> =
            self.coeffs.iter().enumerate().map(|(k, p)| p.scaled(&T::from_count(k))).collect();
        Ok(self.like(self.exp_recurrence(&weighted)))
    }

    /// `exp(Σ_{i≥1} a(x^i, u^i, v^i)/i)` through the divisor-sum recurrence.
    pub fn multiset(&self) -> Result<Self> {
        self.require_zero_constant("multiset construction")?;
        let n = self.order();
        let mut c = vec![MarkPoly::zero(&self.bases); n + 1];
        let unit = self.scale.is_one();
        let mut table_cache: Vec<Option<[Option<Vec<Vec<T>>>; 2]>> = vec![None; n + 1];
        for j in 1..=n {
            if self.coeffs[j].is_zero() {
                continue;
            }
            let base = self.coeffs[j].scaled(&T::from_count(j));
            let step = if unit { T::one() } else { self.scale.pow_usize(j) };
            let mut factor = T::one();
            let mut i = 1;
            while i * j <= n {
                let tables = table_cache[i].get_or_insert_with(|| self.tables(i));
                let mut p = base.substitute(i, &self.bases, tables);
                if !unit {
                    p = p.scaled(&factor);
                    factor = factor.mul_ref(&step);
                }
                c[i * j].add_assign(&p);
                i += 1;
            }
        }
        Ok(self.like(self.exp_recurrence(&c)))
    }

    fn exp_recurrence(&self, c: &[MarkPoly<T>]) -> Vec<MarkPoly<T>> {
        let n = self.order();
        let mut b: Vec<MarkPoly<T>> = Vec::with_capacity(n + 1);
        b.push(MarkPoly::constant(T::one(), &self.bases));
        for k in 1..=n {
            let mut acc = MarkPoly::zero(&self.bases);
            for m in 1..=k {
                c[m].mul_acc_into(&b[k - m], &mut acc);
            }
            b.push(acc.div_usize(k));
        }
        b
    }

    /// Set every mark to one.
    pub fn at_one(&self) -> TruncatedSeries<T> {
        TruncatedSeries::from_scaled(self.coeffs.iter().map(|p| p.at_one(&self.bases)).collect(), self.scale.clone())
    }
}

impl<T: Scalar> Algebra for MarkedSeries<T> {
    fn one_like(&self) -> Self {
        let mut s = self.zero_like();
        s.coeffs[0] = MarkPoly::constant(T::one(), &self.bases);
        s
    }
    fn add(&self, other: &Self) -> Self {
        self.checked_add(other).expect("incompatible marked series")
    }
    fn mul(&self, other: &Self) -> Self {
        self.checked_mul(other).expect("incompatible marked series")
    }
    fn div_usize(&self, d: usize) -> Self {
        self.like(self.coeffs.iter().map(|p| p.div_usize(d)).collect())
    }
}

impl<T: Scalar> SeriesAlgebra for MarkedSeries<T> {
    fn substitute_power(&self, i: usize) -> Self {
        MarkedSeries::substitute_power(self, i)
    }
    fn shift_x(&self) -> Self {
        MarkedSeries::shift_x(self)
    }
    fn multiset(&self) -> Result<Self> {
        MarkedSeries::multiset(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::ratio(n, d)
    }

    const POW: [MarkBasis; 2] = [MarkBasis::Power { cap: 3 }, MarkBasis::ABSENT];

    fn ux(order: usize, bases: [MarkBasis; 2]) -> MarkedSeries<Q> {
        // u * x
        let x = TruncatedSeries::<Q>::variable(order);
        let base = MarkedSeries::from_series(&x, bases);
        let um1 = MarkPoly::mark_minus_one(0, &bases);
        base.checked_add(&base.mul_poly(&um1)).unwrap()
    }

    #[test]
    fn marked_polya_exponent_of_ux() {
        let p = ux(2, POW).polya_exponent().unwrap();
        assert_eq!(p.poly(1).get(1, 0), &q(1, 1));
        assert_eq!(p.poly(1).get(0, 0), &q(0, 1));
        assert_eq!(p.poly(2).get(2, 0), &q(1, 2));
        assert_eq!(p.poly(2).get(1, 0), &q(0, 1));
    }

    #[test]
    fn multiset_agrees_with_exp_route() {
        let bases = [MarkBasis::Power { cap: 4 }, MarkBasis::Power { cap: 2 }];
        let x = TruncatedSeries::<Q>::new(vec![q(0, 1), q(1, 1), q(2, 1), q(1, 3), q(0, 1), q(5, 1)]);
        let mut s = MarkedSeries::from_series(&x, bases);
        s = s.mul_poly(&MarkPoly::mark_minus_one(0, &bases)).checked_add(&s).unwrap();
        s = s.checked_add(&s.mul_poly(&MarkPoly::mark_minus_one(1, &bases)).shift_x()).unwrap();
        let via_exp = s.polya_exponent().unwrap().exp().unwrap();
        assert_eq!(s.multiset().unwrap(), via_exp);
    }

    #[test]
    fn shifted_basis_matches_power_basis_derivatives() {
        // the same series in both bases: derivatives at u = 1 agree with ε-coefficients
        let x = TruncatedSeries::<Q>::new(vec![q(0, 1), q(1, 1), q(1, 1), q(2, 1), q(4, 1), q(9, 1)]);
        let pow = [MarkBasis::Power { cap: 5 }, MarkBasis::ABSENT];
        let sh = [MarkBasis::Shifted { order: 2 }, MarkBasis::ABSENT];
        let build = |bases: [MarkBasis; 2]| {
            let s = MarkedSeries::from_series(&x, bases);
            let marked = s.checked_add(&s.mul_poly(&MarkPoly::mark_minus_one(0, &bases)).shift_x()).unwrap();
            marked.multiset().unwrap().shift_x()
        };
        let full = build(pow);
        let eps = build(sh);
        for n in 0..=5 {
            let p = full.poly(n).marginal(0, &pow);
            let mean: Q = p.iter().enumerate().map(|(l, c)| c * Q::from_count(l)).sum();
            let fact2: Q = p.iter().enumerate().map(|(l, c)| c * Q::from_count(l * l.saturating_sub(1))).sum();
            assert_eq!(eps.poly(n).get(1, 0), &mean);
            assert_eq!(eps.poly(n).get(2, 0).clone() * Q::from_count(2), fact2);
            assert_eq!(eps.poly(n).get(0, 0), &full.poly(n).at_one(&pow));
        }
    }

    #[test]
    fn inverse_pair_composition() {
        // u * u^{-1} = 1: the polynomial (1+ε1)(1+ε2) collapses to 1
        let bases = [MarkBasis::Shifted { order: 4 }, MarkBasis::Shifted { order: 4 }];
        let mut p = MarkPoly::<Q>::constant(q(1, 1), &bases);
        p = p.mul(&MarkPoly::constant(q(1, 1), &bases).mul(&MarkPoly::mark_minus_one(0, &bases)));
        let mut full = MarkPoly::constant(q(1, 1), &bases);
        full.add_assign(&MarkPoly::mark_minus_one(0, &bases));
        let mut v = MarkPoly::constant(q(1, 1), &bases);
        v.add_assign(&MarkPoly::mark_minus_one(1, &bases));
        let prod = full.mul(&v);
        assert_eq!(prod.compose_inverse_pair(4), vec![q(1, 1), q(0, 1), q(0, 1), q(0, 1), q(0, 1)]);
        let _ = p;
    }
}
