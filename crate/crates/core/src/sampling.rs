//! Uniform random Pólya trees of a given size and Monte Carlo profile
//! statistics.
//!
//! Trees are drawn by the recursive method: a tree of size `m > 1` is a
//! tree of size `m - jd` whose root receives `j` extra copies of a random
//! tree of size `d`, where `(j, d)` has probability
//! `d y_d y_{m-jd} / ((m-1) y_m)`. Pair selection compares one uniform
//! variate `U` against the cumulative boundaries. The boundaries are computed
//! in floating point; a comparison that falls within [`AMBIGUITY_MARGIN`] of
//! a boundary is settled exactly by drawing further bits of `U` and comparing
//! against the big-integer cumulative weights, so the selection is exactly
//! uniform.

use num_bigint::BigUint;
use num_traits::Zero;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use std::sync::Mutex;

use crate::enumeration::{count_trees, scaled_ln_counts, CountTable, COUNT_SCALE};
use crate::error::{usage, Error, Result};
use crate::tree::{PolyaTree, ROOT_PARENT};

/// Float comparisons closer than this to a boundary are settled exactly.
const AMBIGUITY_MARGIN: f64 = 1e-10;

/// Samples per deterministic work unit.
pub const CHUNK_SIZE: usize = 64;

/// A uniform variate on `[0, 1)` whose binary digits are drawn on demand.
struct LazyUniform {
    words: Vec<u64>,
}

impl LazyUniform {
    fn new<R: RngCore>(rng: &mut R) -> Self {
        Self { words: vec![rng.next_u64()] }
    }

    /// Lower end of the interval known so far (first word only).
    fn approx(&self) -> f64 {
        self.words[0] as f64 * 2f64.powi(-64)
    }

    /// Exact `U < num / den`.
    fn less_than<R: RngCore>(&mut self, num: &BigUint, den: &BigUint, rng: &mut R) -> bool {
        let mut used = 0;
        loop {
            if used == self.words.len() {
                self.words.push(rng.next_u64());
            }
            used += 1;
            let bits = 64 * used;
            let mut prefix = BigUint::zero();
            for w in &self.words[..used] {
                prefix = (prefix << 64u32) + BigUint::from(*w);
            }
            let scaled = num << bits;
            // U ∈ [prefix, prefix + 1) / 2^bits
            if (&prefix + 1u32) * den <= scaled {
                return true;
            }
            if &prefix * den >= scaled {
                return false;
            }
        }
    }
}

/// Exact-size uniform sampler.
///
/// Boundaries come from double precision log-counts; the big-integer count
/// table is grown only as far as draws that land too close to a boundary
/// require.
#[derive(Debug)]
pub struct TreeSampler {
    n_max: usize,
    /// `ln(y_n COUNT_SCALE^n)`
    ln_y: Vec<f64>,
    exact: Mutex<CountTable>,
    exact_only: bool,
}

impl TreeSampler {
    pub fn new(n_max: usize) -> Result<Self> {
        let n_max = n_max.max(1);
        Ok(Self { n_max, ln_y: scaled_ln_counts(n_max)?, exact: Mutex::new(count_trees(1)?), exact_only: false })
    }

    /// Every selection uses the big-integer boundaries (slow; for validation).
    pub fn exact_only(mut self) -> Self {
        self.exact_only = true;
        self
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn sample<R: RngCore>(&self, n: usize, rng: &mut R) -> Result<PolyaTree> {
        if n == 0 || n > self.n_max {
            return usage(format!("tree size {n} outside 1..={}", self.n_max()));
        }
        let mut parent = Vec::with_capacity(n);
        self.sample_into(n, ROOT_PARENT, &mut parent, rng);
        debug_assert_eq!(parent.len(), n);
        let mut children = vec![0u32; n];
        for &p in &parent[1..] {
            children[p as usize] += 1;
        }
        Ok(PolyaTree::from_parts_unchecked(parent, children))
    }

    fn sample_into<R: RngCore>(&self, m: usize, parent: u32, out: &mut Vec<u32>, rng: &mut R) {
        let root = out.len() as u32;
        out.push(parent);
        let mut rest = m;
        while rest > 1 {
            let (j, d) = self.choose(rest, rng);
            let start = out.len() as u32;
            self.sample_into(d, root, out, rng);
            for _ in 1..j {
                let fresh = out.len() as u32;
                for t in 0..d as u32 {
                    let p = out[(start + t) as usize];
                    out.push(if t == 0 { root } else { p - start + fresh });
                }
            }
            rest -= j * d;
        }
    }

    /// Pairs `(j, d)` for size `m` in scan order: `d` descending, then `j` ascending.
    fn pairs(m: usize) -> impl Iterator<Item = (usize, usize)> {
        (1..m).rev().flat_map(move |d| (1..=(m - 1) / d).map(move |j| (j, d)))
    }

    fn weight_f64(&self, m: usize, j: usize, d: usize) -> f64 {
        let ln = (d as f64).ln() + self.ln_y[d] + self.ln_y[m - j * d] - ((m - 1) as f64).ln() - self.ln_y[m]
            + ((j - 1) * d) as f64 * COUNT_SCALE.ln();
        ln.exp()
    }

    fn choose<R: RngCore>(&self, m: usize, rng: &mut R) -> (usize, usize) {
        let mut u = LazyUniform::new(rng);
        if self.exact_only {
            return self.choose_exact(m, &mut u, rng);
        }
        let approx = u.approx();
        let mut cum = 0.0;
        for (j, d) in Self::pairs(m) {
            cum += self.weight_f64(m, j, d);
            if approx + 2f64.powi(-60) < cum - AMBIGUITY_MARGIN {
                return (j, d);
            }
            if approx < cum + AMBIGUITY_MARGIN {
                // too close to call in floating point
                return self.choose_exact(m, &mut u, rng);
            }
        }
        // float boundaries undershoot 1; the exact path settles the remainder
        self.choose_exact(m, &mut u, rng)
    }

    fn choose_exact<R: RngCore>(&self, m: usize, u: &mut LazyUniform, rng: &mut R) -> (usize, usize) {
        let mut table = self.exact.lock().unwrap_or_else(|e| e.into_inner());
        table.extend_to(m);
        let total = BigUint::from(m - 1) * table.y(m);
        let mut cum = BigUint::zero();
        let mut last = (1, m - 1);
        for (j, d) in Self::pairs(m) {
            last = (j, d);
            cum += BigUint::from(d) * table.y(d) * table.y(m - j * d);
            if u.less_than(&cum, &total, rng) {
                return (j, d);
            }
        }
        debug_assert_eq!(cum, total);
        last
    }
}

/// Per-level vertex counts of one tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProfileSample {
    /// `levels[k]` is the number of vertices at depth `k`.
    pub levels: Vec<u32>,
    /// `by_degree[d - 1][k]` counts degree-`d` vertices at depth `k`, `d ≤ d_max`.
    pub by_degree: Vec<Vec<u32>>,
    pub height: usize,
}

impl ProfileSample {
    pub fn level(&self, k: usize) -> u32 {
        self.levels.get(k).copied().unwrap_or(0)
    }

    pub fn degree_level(&self, d: usize, k: usize) -> u32 {
        self.by_degree.get(d - 1).and_then(|row| row.get(k)).copied().unwrap_or(0)
    }

    pub fn degree_total(&self, d: usize) -> u32 {
        self.by_degree.get(d - 1).map(|row| row.iter().sum()).unwrap_or(0)
    }
}

/// Level decomposition with planted degrees (`children + 1`).
pub fn extract_profile(t: &PolyaTree, d_max: usize) -> ProfileSample {
    let depth = t.depths();
    let height = depth.iter().copied().max().unwrap_or(0) as usize;
    let mut levels = vec![0u32; height + 1];
    let mut by_degree = vec![vec![0u32; height + 1]; d_max];
    for (v, &k) in depth.iter().enumerate() {
        levels[k as usize] += 1;
        let d = t.degree(v);
        if d <= d_max {
            by_degree[d - 1][k as usize] += 1;
        }
    }
    ProfileSample { levels, by_degree, height }
}

/// Deterministic generator for work unit `chunk` of a run seeded with `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Draws `count` trees of size `n`; identical for every thread count.
pub fn sample_many(sampler: &TreeSampler, n: usize, count: usize, seed: u64) -> Result<Vec<PolyaTree>> {
    let chunks = count.div_ceil(CHUNK_SIZE);
    let parts: Vec<Result<Vec<PolyaTree>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c as u64);
            let len = CHUNK_SIZE.min(count - c * CHUNK_SIZE);
            (0..len).map(|_| sampler.sample(n, &mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(count);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Monte Carlo experiment description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSpec {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub degrees: Vec<usize>,
    pub kappas: Vec<f64>,
    /// Arguments of the empirical characteristic function.
    pub t_values: Vec<f64>,
    /// Include the fourth-moment increment grid.
    pub tightness: bool,
}

/// One output row; fields that do not apply to a statistic are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub n: usize,
    pub stat: String,
    pub d: Option<usize>,
    pub d2: Option<usize>,
    pub kappa: Option<f64>,
    pub t: Option<f64>,
    pub r: Option<usize>,
    pub h: Option<usize>,
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl EstimateRow {
    fn new(n: usize, stat: &str, estimate: f64, stderr: f64, samples: usize) -> Self {
        Self { n, stat: stat.into(), d: None, d2: None, kappa: None, t: None, r: None, h: None, estimate, stderr, samples }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub spec: MonteCarloSpec,
    pub rows: Vec<EstimateRow>,
}

pub const CSV_HEADER: &str = "n,stat,d,d2,kappa,t,r,h,estimate,stderr,samples";

impl MonteCarloReport {
    pub fn to_csv(&self) -> String {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map(|x| x.to_string()).unwrap_or_default()
        }
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{:.12e},{:.6e},{}\n",
                r.n,
                r.stat,
                opt(&r.d),
                opt(&r.d2),
                opt(&r.kappa),
                opt(&r.t),
                opt(&r.r),
                opt(&r.h),
                r.estimate,
                r.stderr,
                r.samples
            ));
        }
        s
    }

    pub fn find(&self, stat: &str, pred: impl Fn(&EstimateRow) -> bool) -> Option<&EstimateRow> {
        self.rows.iter().find(|r| r.stat == stat && pred(r))
    }
}

/// Power sums `Σ x^a y^b` for `a, b ≤ 2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Bivariate {
    s: [[f64; 3]; 3],
}

impl Bivariate {
    fn push(&mut self, x: f64, y: f64) {
        let xs = [1.0, x, x * x];
        let ys = [1.0, y, y * y];
        for a in 0..3 {
            for b in 0..3 {
                self.s[a][b] += xs[a] * ys[b];
            }
        }
    }

    fn merge(&mut self, o: &Self) {
        for a in 0..3 {
            for b in 0..3 {
                self.s[a][b] += o.s[a][b];
            }
        }
    }

    fn m(&self, a: usize, b: usize) -> f64 {
        self.s[a][b] / self.s[0][0]
    }

    /// Mean of `x` and its standard error.
    fn mean_x(&self) -> (f64, f64) {
        let n = self.s[0][0];
        let mean = self.m(1, 0);
        let var = (self.m(2, 0) - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    }

    /// Covariance of `x` and `y` with a delta-method standard error.
    fn covariance(&self) -> (f64, f64) {
        let n = self.s[0][0];
        let (mx, my) = (self.m(1, 0), self.m(0, 1));
        let cov = self.m(1, 1) - mx * my;
        // E[(x - mx)^2 (y - my)^2] from raw moments
        let c22 = self.m(2, 2) - 2.0 * my * self.m(2, 1) + my * my * self.m(2, 0) - 2.0 * mx * self.m(1, 2)
            + 4.0 * mx * my * self.m(1, 1)
            - 2.0 * mx * my * my * self.m(1, 0)
            + mx * mx * self.m(0, 2)
            - 2.0 * mx * mx * my * self.m(0, 1)
            + mx * mx * my * my;
        let unbiased = cov * n / (n - 1.0).max(1.0);
        (unbiased, ((c22 - cov * cov).max(0.0) / n).sqrt())
    }
}

/// Sums of `cos(tX)`, `sin(tX)` and their squares.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct CharSums {
    count: f64,
    c: f64,
    s: f64,
    cc: f64,
    ss: f64,
}

impl CharSums {
    fn push(&mut self, arg: f64) {
        let (s, c) = arg.sin_cos();
        self.count += 1.0;
        self.c += c;
        self.s += s;
        self.cc += c * c;
        self.ss += s * s;
    }

    fn merge(&mut self, o: &Self) {
        self.count += o.count;
        self.c += o.c;
        self.s += o.s;
        self.cc += o.cc;
        self.ss += o.ss;
    }

    fn estimates(&self) -> [(f64, f64); 2] {
        let n = self.count;
        let (mc, ms) = (self.c / n, self.s / n);
        let vc = (self.cc / n - mc * mc).max(0.0);
        let vs = (self.ss / n - ms * ms).max(0.0);
        [(mc, (vc / n).sqrt()), (ms, (vs / n).sqrt())]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct FourthSums {
    count: f64,
    z4: f64,
    z8: f64,
}

/// Grid of `(r, h)` for the tightness ratio at size `n`.
pub fn tightness_grid(n: usize) -> Vec<(usize, usize)> {
    let s = (n as f64).sqrt().floor() as usize;
    let half = ((n as f64).sqrt() / 2.0).floor().max(1.0) as usize;
    let mut hs = vec![1, half, s];
    hs.dedup();
    let mut out = Vec::new();
    for r in [0, s, 2 * s] {
        for &h in &hs {
            if !out.contains(&(r, h)) {
                out.push((r, h));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Accumulator {
    /// per (d, κ): (x, x) power sums
    single: Vec<Bivariate>,
    /// per (pair of degrees, κ)
    pairs: Vec<Bivariate>,
    /// per (d, κ, t)
    chars: Vec<CharSums>,
    /// per (r, h)
    fourth: Vec<FourthSums>,
    /// per d: total degree-d count
    totals: Vec<Bivariate>,
}

impl Accumulator {
    fn merge(&mut self, o: &Self) {
        for (a, b) in self.single.iter_mut().zip(&o.single) {
            a.merge(b);
        }
        for (a, b) in self.pairs.iter_mut().zip(&o.pairs) {
            a.merge(b);
        }
        for (a, b) in self.chars.iter_mut().zip(&o.chars) {
            a.merge(b);
        }
        for (a, b) in self.fourth.iter_mut().zip(&o.fourth) {
            a.count += b.count;
            a.z4 += b.z4;
            a.z8 += b.z8;
        }
        for (a, b) in self.totals.iter_mut().zip(&o.totals) {
            a.merge(b);
        }
    }
}

fn degree_pairs(degrees: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, &a) in degrees.iter().enumerate() {
        for &b in &degrees[i + 1..] {
            out.push((a, b));
        }
    }
    out
}

fn validate(spec: &MonteCarloSpec, sampler: &TreeSampler) -> Result<()> {
    if spec.n == 0 || spec.n > sampler.n_max() {
        return usage(format!("n = {} outside the sampler range 1..={}", spec.n, sampler.n_max()));
    }
    if spec.samples < 2 {
        return usage("Monte Carlo needs at least two samples");
    }
    if spec.degrees.contains(&0) {
        return usage("degrees start at 1");
    }
    if spec.kappas.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
        return usage("levels κ must be finite and nonnegative");
    }
    Ok(())
}

/// Runs the experiment; output depends only on the spec, never on the thread count.
pub fn monte_carlo(spec: &MonteCarloSpec, sampler: &TreeSampler) -> Result<MonteCarloReport> {
    validate(spec, sampler)?;
    let n = spec.n;
    let sqrt_n = (n as f64).sqrt();
    let d_max = spec.degrees.iter().copied().max().unwrap_or(1);
    let levels: Vec<usize> = spec.kappas.iter().map(|&k| crate::profile::scaled_level(k, n)).collect();
    let pairs = degree_pairs(&spec.degrees);
    let grid = if spec.tightness { tightness_grid(n) } else { Vec::new() };
    let nd = spec.degrees.len();
    let nk = levels.len();
    let nt = spec.t_values.len();

    let fresh = || Accumulator {
        single: vec![Bivariate::default(); nd * nk],
        pairs: vec![Bivariate::default(); pairs.len() * nk],
        chars: vec![CharSums::default(); nd * nk * nt],
        fourth: vec![FourthSums::default(); grid.len()],
        totals: vec![Bivariate::default(); nd],
    };

    let chunks = spec.samples.div_ceil(CHUNK_SIZE);
    let parts: Vec<Result<Accumulator>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(spec.seed, c as u64);
            let mut acc = fresh();
            let len = CHUNK_SIZE.min(spec.samples - c * CHUNK_SIZE);
            for _ in 0..len {
                let tree = sampler.sample(n, &mut rng)?;
                let p = extract_profile(&tree, d_max);
                for (di, &d) in spec.degrees.iter().enumerate() {
                    let tot = p.degree_total(d) as f64;
                    acc.totals[di].push(tot, tot);
                    for (ki, &k) in levels.iter().enumerate() {
                        let x = p.degree_level(d, k) as f64;
                        acc.single[di * nk + ki].push(x, x);
                        for (ti, &t) in spec.t_values.iter().enumerate() {
                            acc.chars[(di * nk + ki) * nt + ti].push(t * x / sqrt_n);
                        }
                    }
                }
                for (pi, &(a, b)) in pairs.iter().enumerate() {
                    for (ki, &k) in levels.iter().enumerate() {
                        acc.pairs[pi * nk + ki].push(p.degree_level(a, k) as f64, p.degree_level(b, k) as f64);
                    }
                }
                for (gi, &(r, h)) in grid.iter().enumerate() {
                    let z = p.level(r) as f64 - p.level(r + h) as f64;
                    let z4 = z.powi(4);
                    let f = &mut acc.fourth[gi];
                    f.count += 1.0;
                    f.z4 += z4;
                    f.z8 += z4 * z4;
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = fresh();
    for p in parts {
        total.merge(&p?);
    }

    let samples = spec.samples;
    let nf = n as f64;
    let mut rows = Vec::new();
    for (di, &d) in spec.degrees.iter().enumerate() {
        let (m, se) = total.totals[di].mean_x();
        rows.push(EstimateRow { d: Some(d), ..EstimateRow::new(n, "total", m, se, samples) });
        for (ki, &kappa) in spec.kappas.iter().enumerate() {
            let b = &total.single[di * nk + ki];
            let (m, se) = b.mean_x();
            let base = EstimateRow { d: Some(d), kappa: Some(kappa), ..EstimateRow::new(n, "", 0.0, 0.0, samples) };
            rows.push(EstimateRow { stat: "mean".into(), estimate: m / sqrt_n, stderr: se / sqrt_n, ..base.clone() });
            let (v, vse) = b.covariance();
            rows.push(EstimateRow { stat: "var".into(), estimate: v / nf, stderr: vse / nf, ..base.clone() });
            for (ti, &t) in spec.t_values.iter().enumerate() {
                let [(re, re_se), (im, im_se)] = total.chars[(di * nk + ki) * nt + ti].estimates();
                let row = EstimateRow { t: Some(t), ..base.clone() };
                rows.push(EstimateRow { stat: "cf_re".into(), estimate: re, stderr: re_se, ..row.clone() });
                rows.push(EstimateRow { stat: "cf_im".into(), estimate: im, stderr: im_se, ..row });
            }
        }
    }
    for (pi, &(a, b)) in pairs.iter().enumerate() {
        for (ki, &kappa) in spec.kappas.iter().enumerate() {
            let (c, se) = total.pairs[pi * nk + ki].covariance();
            rows.push(EstimateRow {
                d: Some(a),
                d2: Some(b),
                kappa: Some(kappa),
                ..EstimateRow::new(n, "cov", c / nf, se / nf, samples)
            });
        }
    }
    for (gi, &(r, h)) in grid.iter().enumerate() {
        let f = &total.fourth[gi];
        let m4 = f.z4 / f.count;
        let var = (f.z8 / f.count - m4 * m4).max(0.0);
        let norm = (h * h) as f64 * nf;
        rows.push(EstimateRow {
            r: Some(r),
            h: Some(h),
            ..EstimateRow::new(n, "tightness", m4 / norm, (var / f.count).sqrt() / norm, samples)
        });
    }
    Ok(MonteCarloReport { spec: spec.clone(), rows })
}

/// Maximum of the tightness ratio over the grid, with the standard error of the maximising cell.
pub fn tightness_max(report: &MonteCarloReport) -> Result<(f64, f64)> {
    report
        .rows
        .iter()
        .filter(|r| r.stat == "tightness")
        .map(|r| (r.estimate, r.stderr))
        .fold(None, |best: Option<(f64, f64)>, x| match best {
            Some(b) if b.0 >= x.0 => Some(b),
            _ => Some(x),
        })
        .ok_or_else(|| Error::Usage("report has no tightness rows".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumeration::enumerate_trees_exhaustive;
    use std::collections::HashMap;

    #[test]
    fn tiny_sizes_are_forced() {
        let s = TreeSampler::new(4).unwrap();
        let mut rng = chunk_rng(1, 0);
        assert_eq!(s.sample(1, &mut rng).unwrap().size(), 1);
        assert_eq!(s.sample(2, &mut rng).unwrap().canonical_code(), "(())");
        assert!(s.sample(5, &mut rng).is_err());
    }

    #[test]
    fn lazy_uniform_exact_comparison() {
        let mut rng = chunk_rng(7, 0);
        let mut u = LazyUniform { words: vec![u64::MAX / 3] };
        // U starts just below 1/3; the comparison must look at later words
        let one = BigUint::from(1u32);
        let three = BigUint::from(3u32);
        let below = u.less_than(&one, &three, &mut rng);
        assert!(u.words.len() >= 2 || below);
        let mut v = LazyUniform { words: vec![u64::MAX / 2 + 1] };
        assert!(!v.less_than(&one, &BigUint::from(2u32), &mut rng));
    }

    #[test]
    fn exact_path_agrees_with_counts() {
        // every (j, d) weight sums to (m - 1) y_m
        let s = TreeSampler::new(30).unwrap();
        for m in 2..=30 {
            let total: f64 = TreeSampler::pairs(m).map(|(j, d)| s.weight_f64(m, j, d)).sum();
            assert!((total - 1.0).abs() < 1e-12, "m = {m}: {total}");
        }
    }

    #[test]
    fn float_weights_match_exact() {
        use num_rational::BigRational;
        use num_bigint::BigInt;
        use num_traits::ToPrimitive;
        let m = 1200;
        let s = TreeSampler::new(m).unwrap();
        let t = count_trees(m).unwrap();
        let total = BigInt::from(BigUint::from(m - 1) * t.y(m));
        let mut worst = 0.0f64;
        let mut cum_exact = BigRational::from_integer(BigInt::zero());
        let mut cum = 0.0;
        for (j, d) in TreeSampler::pairs(m) {
            let w = BigInt::from(BigUint::from(d) * t.y(d) * t.y(m - j * d));
            cum_exact += BigRational::new(w, total.clone());
            cum += s.weight_f64(m, j, d);
            worst = worst.max((cum - cum_exact.to_f64().unwrap()).abs());
        }
        assert!(worst < AMBIGUITY_MARGIN / 100.0, "{worst:e}");
    }

    #[test]
    fn all_classes_appear() {
        let s = TreeSampler::new(6).unwrap();
        let mut rng = chunk_rng(3, 0);
        let mut seen: HashMap<String, usize> = HashMap::new();
        for _ in 0..4000 {
            *seen.entry(s.sample(6, &mut rng).unwrap().canonical_code()).or_default() += 1;
        }
        let classes = enumerate_trees_exhaustive(6).unwrap();
        assert_eq!(seen.len(), classes.len());
    }

    #[test]
    fn profile_of_small_trees() {
        let single = extract_profile(&PolyaTree::single(), 3);
        assert_eq!(single.levels, vec![1]);
        assert_eq!(single.degree_level(1, 0), 1);
        let path = PolyaTree::from_code("((()))").unwrap();
        let p = extract_profile(&path, 3);
        assert_eq!((p.degree_level(2, 0), p.degree_level(2, 1), p.degree_level(1, 2)), (1, 1, 1));
    }

    #[test]
    fn aggregates_cover_every_chunk() {
        let s = TreeSampler::new(50).unwrap();
        let spec = MonteCarloSpec {
            n: 50,
            samples: 3 * CHUNK_SIZE + 5,
            seed: 11,
            degrees: vec![],
            kappas: vec![],
            t_values: vec![],
            tightness: true,
        };
        let report = monte_carlo(&spec, &s).unwrap();
        let trees = sample_many(&s, 50, spec.samples, 11).unwrap();
        let (r, h) = tightness_grid(50)[4];
        let direct: f64 = trees
            .iter()
            .map(|t| {
                let p = extract_profile(t, 1);
                (p.level(r) as f64 - p.level(r + h) as f64).powi(4)
            })
            .sum::<f64>()
            / (spec.samples * h * h * 50) as f64;
        let row = report.find("tightness", |e| e.r == Some(r) && e.h == Some(h)).unwrap();
        assert!((row.estimate - direct).abs() < 1e-12 * direct.max(1.0), "{} vs {direct}", row.estimate);
    }

    #[test]
    fn grid_shape() {
        assert_eq!(tightness_grid(100), vec![(0, 1), (0, 5), (0, 10), (10, 1), (10, 5), (10, 10), (20, 1), (20, 5), (20, 10)]);
    }

    #[test]
    fn bivariate_covariance_of_known_data() {
        let mut b = Bivariate::default();
        for (x, y) in [(1.0, 2.0), (2.0, 4.0), (3.0, 7.0), (4.0, 7.0)] {
            b.push(x, y);
        }
        // sample covariance with n - 1 denominator
        let (c, _) = b.covariance();
        assert!((c - 3.0).abs() < 1e-12, "{c}");
    }
}
