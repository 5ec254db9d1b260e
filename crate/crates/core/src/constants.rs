//! Numerical values of the singular constants of `y(x)`.
//!
//! `y(x)` itself converges too slowly near `ρ` for direct summation, so it is
//! recovered from `y e^{-y} = x e^{S(x)}` with `S(x) = Σ_{i≥2} y(x^i)/i`;
//! `S` only samples the series at `x^2 ≤ ρ^2`, where it converges
//! geometrically. The radius solves `ρ e^{1 + S(ρ)} = 1`, the same condition
//! as `y(ρ) = 1`.

use serde::Serialize;

use crate::enumeration::{count_trees, cycle_index_apply, degree_series};
use crate::error::{Error, Result};
use crate::powerseries::TruncatedSeries;

/// Scale used for double precision tree series (`y_n r^n` stays finite).
pub const FLOAT_SCALE: f64 = 1.0 / 3.0;

/// Ladder exponents `j` in `x_j = ρ (1 - 2^{-j})`.
const LADDER: std::ops::RangeInclusive<i32> = 5..=20;

/// Stop the `i`-sums once terms drop below this.
const SUM_CUTOFF: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn contains(&self, target: f64, tolerance: f64) -> bool {
        (self.value - target).abs() <= tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeConstants {
    pub d: usize,
    /// `C_d` with `C^{(d)}(ρ) = C_d ρ^d`.
    pub cd: Estimate,
    /// Asymptotic fraction of degree-`d` vertices, `2 C_d ρ^d / (b^2 ρ)`.
    pub mu: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsSet {
    pub order: usize,
    pub rho: Estimate,
    pub b: Estimate,
    #[serde(rename = "C")]
    pub c: Estimate,
    pub degrees: Vec<DegreeConstants>,
}

impl ConstantsSet {
    pub fn degree(&self, d: usize) -> Option<&DegreeConstants> {
        self.degrees.iter().find(|g| g.d == d)
    }

    /// `C_d ρ^d`, the amplitude in the limit laws.
    pub fn amplitude(&self, d: usize) -> Result<f64> {
        let g = self
            .degree(d)
            .ok_or_else(|| Error::Usage(format!("degree {d} was not computed")))?;
        Ok(g.cd.value * self.rho.value.powi(d as i32))
    }
}

/// `y(x)` on `[0, ρ]` from a truncated series.
#[derive(Debug, Clone)]
pub struct TreeFunction {
    series: TruncatedSeries<f64>,
    /// `Σ_{n≥2} y_n x^{n-1}`, i.e. `y(x)/x - 1`.
    excess: TruncatedSeries<f64>,
}

impl TreeFunction {
    pub fn new(order: usize) -> Result<Self> {
        if order < 40 {
            return Err(Error::Usage(format!("series order {order} is too small (need ≥ 40)")));
        }
        let table = count_trees(order)?;
        Self::from_series(table.scaled_series(order, FLOAT_SCALE)?)
    }

    pub fn from_series(series: TruncatedSeries<f64>) -> Result<Self> {
        let r = *series.scale();
        let s = series.stored();
        let mut ex = vec![0.0; s.len()];
        for m in 1..s.len() - 1 {
            ex[m] = s[m + 1] / r;
        }
        Ok(Self { excess: TruncatedSeries::from_scaled(ex, r), series })
    }

    pub fn series(&self) -> &TruncatedSeries<f64> {
        &self.series
    }

    /// Direct series value; only for points well inside the disc.
    pub fn y_direct(&self, x: f64) -> Result<(f64, f64)> {
        let ev = self.series.evaluate(x)?;
        Ok((ev.value, ev.error))
    }

    /// `y(z)/z - 1` for small `z`.
    pub fn excess(&self, z: f64) -> Result<(f64, f64)> {
        let ev = self.excess.evaluate(z)?;
        Ok((ev.value, ev.error))
    }

    /// `S(x) = Σ_{i≥2} y(x^i)/i` with an error estimate.
    pub fn s_tail(&self, x: f64) -> Result<(f64, f64)> {
        let (mut sum, mut err) = (0.0, 0.0);
        let mut xi = x;
        for i in 2.. {
            xi *= x;
            let (v, e) = self.y_direct(xi)?;
            let term = v / i as f64;
            sum += term;
            err += e / i as f64;
            if term.abs() < SUM_CUTOFF {
                break;
            }
        }
        Ok((sum, err + 4.0 * f64::EPSILON * sum.abs()))
    }

    /// `g(x) = x e^{1 + S(x)} - 1`, increasing, with root `ρ`.
    pub fn g(&self, x: f64) -> Result<(f64, f64)> {
        let (s, e) = self.s_tail(x)?;
        let v = x * (1.0 + s).exp();
        Ok((v - 1.0, v * e))
    }

    /// `y(x)` for `0 ≤ x ≤ ρ`, accurate up to the singularity; returns `1 - y`
    /// as well since that is what the singular fits need.
    pub fn y_near(&self, x: f64) -> Result<YValue> {
        let (s, s_err) = self.s_tail(x)?;
        let tau = (-1.0 - x.ln() - s).max(0.0);
        let v = solve_gap(tau);
        // dv/dτ = (1 - v)/v
        let dv = if v > 0.0 { (1.0 - v) / v } else { f64::INFINITY };
        let err = (dv * (s_err + 4.0 * f64::EPSILON)).min(1.0) + 4.0 * f64::EPSILON * v;
        Ok(YValue { y: 1.0 - v, gap: v, error: err })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YValue {
    pub y: f64,
    /// `1 - y`, computed without cancellation.
    pub gap: f64,
    pub error: f64,
}

/// Solves `-ln(1 - v) - v = τ` for `v ∈ [0, 1)`.
fn solve_gap(tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let f = |v: f64| gap_excess(v) - tau;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut v = (2.0 * tau).sqrt().min(0.5);
    for _ in 0..200 {
        let fv = f(v);
        if fv > 0.0 {
            hi = v;
        } else {
            lo = v;
        }
        let step = fv * (1.0 - v) / v;
        let mut next = v - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - v).abs() <= 1e-17 * v.max(1e-300) {
            return next;
        }
        v = next;
    }
    v
}

/// `-ln(1 - v) - v = Σ_{k≥2} v^k / k`, without cancellation for small `v`.
fn gap_excess(v: f64) -> f64 {
    if v > 0.25 {
        return -(-v).ln_1p() - v;
    }
    let mut term = v * v;
    let mut sum = 0.0;
    let mut k = 2.0;
    while term > 1e-18 * sum || sum == 0.0 {
        sum += term / k;
        term *= v;
        k += 1.0;
        if term == 0.0 {
            break;
        }
    }
    sum
}

/// `ρ` by bisection of `g` on `(0.2, 0.45)`.
pub fn compute_rho(tf: &TreeFunction) -> Result<Estimate> {
    let (mut lo, mut hi) = (0.2f64, 0.45f64);
    let (glo, _) = tf.g(lo)?;
    let (ghi, _) = tf.g(hi)?;
    if !(glo < 0.0 && ghi > 0.0) {
        return Err(Error::Accuracy(format!("radius is not bracketed: g(0.2) = {glo}, g(0.45) = {ghi}")));
    }
    while hi - lo > 2.0 * f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if tf.g(mid)?.0 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rho = 0.5 * (lo + hi);
    // propagate the evaluation error of g through its slope
    let (_, g_err) = tf.g(rho)?;
    let dx = 1e-6;
    let slope = (tf.g(rho + dx)?.0 - tf.g(rho - dx)?.0) / (2.0 * dx);
    Ok(Estimate { value: rho, error: (hi - lo) + g_err / slope.abs() })
}

/// Neville extrapolation to `h = 0`; returns the value of the best column
/// and the gap to the previous column as residual.
fn extrapolate(h: &[f64], v: &[f64]) -> (f64, f64) {
    let m = h.len();
    let mut table = v.to_vec();
    let mut estimates = vec![v[m - 1]];
    for level in 1..m {
        for i in 0..m - level {
            let (hi, hj) = (h[i], h[i + level]);
            table[i] = (hj * table[i] - hi * table[i + 1]) / (hj - hi);
        }
        estimates.push(table[m - level - 1]);
    }
    // pick the column where consecutive estimates agree best
    let mut best = (estimates[1], (estimates[1] - estimates[0]).abs());
    for w in 2..estimates.len() {
        let diff = (estimates[w] - estimates[w - 1]).abs();
        if diff < best.1 {
            best = (estimates[w], diff);
        }
    }
    best
}

/// Ladder points `x_j = ρ(1 - 2^{-j})` paired with `h_j = √(ρ - x_j)`.
fn ladder(rho: f64) -> Vec<(f64, f64)> {
    LADDER
        .map(|j| {
            let delta = rho * 2f64.powi(-j);
            (rho - delta, delta.sqrt())
        })
        .collect()
}

/// Tolerated extrapolation residual, relative to the value.
const RESIDUAL_LIMIT: f64 = 1e-4;

/// `b` from `b^2 = lim (1 - y)^2/(ρ - x)` along the ladder.
pub fn compute_b(tf: &TreeFunction, rho: &Estimate) -> Result<Estimate> {
    let pts = ladder(rho.value);
    let mut hs = Vec::new();
    let mut qs = Vec::new();
    let mut eval_err: f64 = 0.0;
    for &(x, h) in &pts {
        let yv = tf.y_near(x)?;
        let q = yv.gap * yv.gap / (h * h);
        eval_err = eval_err.max(2.0 * yv.gap * yv.error / (h * h));
        hs.push(h);
        qs.push(q);
    }
    let (b2, residual) = extrapolate(&hs, &qs);
    if residual > RESIDUAL_LIMIT * b2 {
        return Err(Error::Accuracy(format!("b² extrapolation residual {residual:e} too large")));
    }
    let b = b2.sqrt();
    // an error in ρ shifts the ladder; its effect is first order in ρ's error over the smallest gap
    let rho_effect = b2 * rho.error / (hs[hs.len() - 1].powi(2));
    Ok(Estimate { value: b, error: (residual + eval_err + rho_effect) / (2.0 * b) })
}

/// `C = exp(Σ_{i≥1} (y(ρ^i)/ρ^i - 1)/i)`, using `y(ρ) = 1` for `i = 1`.
pub fn compute_c(tf: &TreeFunction, rho: &Estimate) -> Result<Estimate> {
    let r = rho.value;
    let mut sum = 1.0 / r - 1.0;
    let mut err = rho.error / (r * r);
    let mut z = r;
    for i in 2.. {
        z *= r;
        let (ex, e) = tf.excess(z)?;
        let term = ex / i as f64;
        sum += term;
        err += e / i as f64;
        if term.abs() < SUM_CUTOFF {
            break;
        }
    }
    let c = sum.exp();
    Ok(Estimate { value: c, error: c * (err + 8.0 * f64::EPSILON * sum.abs()) })
}

/// Partial sums of the series defining `ln C` (for diagnostics).
pub fn c_partial_sums(tf: &TreeFunction, rho: f64, terms: usize) -> Result<Vec<f64>> {
    let mut sums = Vec::with_capacity(terms);
    let mut sum = 1.0 / rho - 1.0;
    sums.push(sum);
    let mut z = rho;
    for i in 2..=terms {
        z *= rho;
        sum += tf.excess(z)?.0 / i as f64;
        sums.push(sum);
    }
    Ok(sums)
}

/// `C_d` and `μ_d` for one degree.
pub fn compute_cd(tf: &TreeFunction, d: usize, rho: &Estimate, b: &Estimate) -> Result<DegreeConstants> {
    let r = rho.value;
    let ds = degree_series(d, tf.series())?;
    let total = &ds.total;
    let power_sum_d = |x: f64| -> Result<(f64, f64)> {
        let (mut s, mut e) = (0.0, 0.0);
        let mut xi = x;
        for _ in 2.. {
            xi *= x;
            let ev = total.evaluate(xi)?;
            s += ev.value;
            e += ev.error;
            if ev.value.abs() < SUM_CUTOFF {
                break;
            }
        }
        Ok((s, e))
    };
    // x Z_{d-1}(y(x), y(x^2), ...) with y(x) supplied separately
    let root_term = |x: f64, y1: f64| -> Result<(f64, f64)> {
        let mut args = vec![y1];
        let mut err = 0.0;
        let mut xi = x;
        for _ in 2..d {
            xi *= x;
            let (v, e) = tf.y_direct(xi)?;
            args.push(v);
            err += e;
        }
        Ok((x * cycle_index_apply(d - 1, &args)?, x * err * d as f64))
    };

    // direct value at ρ, where y(ρ) = 1
    let (ps, ps_err) = power_sum_d(r)?;
    let (zt, zt_err) = root_term(r, 1.0)?;
    let direct = ps + zt;

    let mut hs = Vec::new();
    let mut vs = Vec::new();
    let mut eval_err: f64 = ps_err + zt_err;
    for (x, h) in ladder(r) {
        let yv = tf.y_near(x)?;
        let (ps, pe) = power_sum_d(x)?;
        let (zt, ze) = root_term(x, yv.y)?;
        let v = (yv.y * ps + zt) / yv.y.powi(d as i32);
        eval_err = eval_err.max(pe + ze + d as f64 * v * yv.error);
        hs.push(h);
        vs.push(v);
    }
    let (limit, residual) = extrapolate(&hs, &vs);
    let error = residual + (limit - direct).abs() + eval_err;
    if error > RESIDUAL_LIMIT * limit.abs().max(1e-300) {
        return Err(Error::Accuracy(format!("C^({d})(ρ) extrapolation disagrees with the value at ρ by {error:e}")));
    }
    let rd = r.powi(d as i32);
    let cd = limit / rd;
    let cd_err = error / rd + cd * d as f64 * rho.error / r;
    let b2 = b.value * b.value;
    let mu = 2.0 * limit / (b2 * r);
    let mu_err = mu * (error / limit.abs() + 2.0 * b.error / b.value + rho.error / r);
    Ok(DegreeConstants { d, cd: Estimate { value: cd, error: cd_err }, mu: Estimate { value: mu, error: mu_err } })
}

/// Full constants set at series order `order` for the given degrees.
pub fn compute_constants(order: usize, degrees: &[usize]) -> Result<ConstantsSet> {
    let tf = TreeFunction::new(order)?;
    constants_from(&tf, degrees)
}

pub fn constants_from(tf: &TreeFunction, degrees: &[usize]) -> Result<ConstantsSet> {
    let rho = compute_rho(tf)?;
    let b = compute_b(tf, &rho)?;
    let c = compute_c(tf, &rho)?;
    let degrees = degrees
        .iter()
        .map(|&d| {
            if d == 0 {
                return Err(Error::Usage("degrees start at 1".into()));
            }
            compute_cd(tf, d, &rho, &b)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConstantsSet { order: tf.series().order(), rho, b, c, degrees })
}

/// Smallest `K` with `|C_d - C| ≤ K d ρ^d` over the computed degrees.
pub fn fit_cd_decay(set: &ConstantsSet) -> f64 {
    set.degrees
        .iter()
        .map(|g| (g.cd.value - set.c.value).abs() / (g.d as f64 * set.rho.value.powi(g.d as i32)))
        .fold(0.0, f64::max)
}

/// Ratio of `y_n` to the leading asymptotic `b √ρ / (2√π) n^{-3/2} ρ^{-n}`,
/// computed in logarithms.
pub fn asymptotic_ratio(ln_yn: f64, n: usize, rho: f64, b: f64) -> f64 {
    let nf = n as f64;
    let ln_pred = (b * rho.sqrt() / (2.0 * std::f64::consts::PI.sqrt())).ln() - 1.5 * nf.ln() - nf * rho.ln();
    (ln_yn - ln_pred).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_equation_inverts() {
        for &v in &[1e-6f64, 1e-3, 0.1, 0.5, 0.9, 0.999] {
            // Σ_{k≥2} v^k / k summed from the small end; closed form where it is stable
            let tau: f64 =
                if v < 0.5 { (2..400).rev().map(|k| v.powi(k) / k as f64).sum() } else { -(1.0 - v).ln() - v };
            let got = solve_gap(tau);
            assert!((got - v).abs() < 1e-13 * v.max(1e-3), "{v} vs {got}");
        }
        assert_eq!(solve_gap(0.0), 0.0);
    }

    #[test]
    fn extrapolation_removes_polynomial_terms() {
        let h: Vec<f64> = (0..8).map(|j| 0.5f64.powi(j)).collect();
        let v: Vec<f64> = h.iter().map(|h| 3.0 + 2.0 * h - h * h + 0.5 * h.powi(3)).collect();
        let (lim, res) = extrapolate(&h, &v);
        assert!((lim - 3.0).abs() < 1e-12 && res < 1e-10);
    }

    #[test]
    fn y_near_agrees_with_series_inside() {
        let tf = TreeFunction::new(200).unwrap();
        for &x in &[0.2, 0.25, 0.3] {
            let direct = tf.y_direct(x).unwrap().0;
            let near = tf.y_near(x).unwrap().y;
            assert!((direct - near).abs() < 1e-10, "{x}: {direct} vs {near}");
        }
    }

    #[test]
    fn small_orders_are_rejected() {
        assert!(matches!(TreeFunction::new(10), Err(Error::Usage(_))));
    }
}
