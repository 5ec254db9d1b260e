//! Limit laws of the scaled degree profile: the characteristic function of
//! the local-time limit, the covariance and variance limits, correlation
//! convergence and the limiting mean profile.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use serde::Serialize;

use crate::constants::ConstantsSet;
use crate::enumeration::CountTable;
use crate::error::{usage, Error, Result};
use crate::powerseries::TruncatedSeries;
use crate::profile::{finite_covariance, float_tree_series, mean_profile, scaled_level, RootSelector};

/// Nodes per quadrature panel.
const PANEL_NODES: usize = 20;
/// Panels are doubled until successive results agree to this relative level.
const QUAD_TOLERANCE: f64 = 1e-13;
const MAX_PANELS: usize = 4096;
/// Sizes used to extrapolate the limiting mean.
pub const MEAN_SIZES: [usize; 3] = [400, 900, 1600];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitKind {
    CharFn,
    Covariance,
    Variance,
    Correlation,
    MeanProfile,
}

impl LimitKind {
    pub fn name(self) -> &'static str {
        match self {
            LimitKind::CharFn => "char_fn",
            LimitKind::Covariance => "covariance",
            LimitKind::Variance => "variance",
            LimitKind::Correlation => "correlation",
            LimitKind::MeanProfile => "mean_profile",
        }
    }
}

/// One evaluated limit quantity; real quantities have `value_im = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitEvaluation {
    pub kind: LimitKind,
    pub d: usize,
    pub d2: Option<usize>,
    pub kappa: f64,
    pub t: Option<f64>,
    pub n: Option<usize>,
    pub value_re: f64,
    pub value_im: f64,
    pub error: f64,
}

pub const CSV_HEADER: &str = "kind,d,d2,kappa,t,n,value_re,value_im,error";

impl LimitEvaluation {
    fn real(kind: LimitKind, d: usize, kappa: f64, value: f64, error: f64) -> Self {
        Self { kind, d, d2: None, kappa, t: None, n: None, value_re: value, value_im: 0.0, error }
    }

    pub fn csv_line(&self) -> String {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map(|x| x.to_string()).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{:.12e},{:.12e},{:.3e}",
            self.kind.name(),
            self.d,
            opt(&self.d2),
            self.kappa,
            opt(&self.t),
            opt(&self.n),
            self.value_re,
            self.value_im,
            self.error
        )
    }
}

/// Truncated Hankel contour around the positive real axis, traversed
/// clockwise: in along `arg s = -angle`, around the circle of `radius`, out
/// along `arg s = angle`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contour {
    pub angle: f64,
    pub radius: f64,
    /// The rays end where `|e^{-s}| = e^{-decay}`.
    pub decay: f64,
}

impl Default for Contour {
    fn default() -> Self {
        // steep rays keep the integrand's poles (all with Re s > 0) inside the contour
        Self { angle: 0.45 * PI, radius: 0.5, decay: 40.0 }
    }
}

impl Contour {
    fn reach(&self) -> f64 {
        self.decay / self.angle.cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourIntegral {
    pub value: Complex64,
    pub error: f64,
    pub panels: usize,
}

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(PANEL_NODES).expect("nonzero")))
}

fn panels_sum(a: f64, b: f64, panels: usize, f: &mut impl FnMut(f64) -> Complex64) -> Complex64 {
    let width = (b - a) / panels as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        for &(x, w) in rule().as_node_weight_pairs() {
            sum += f(lo + 0.5 * width * (x + 1.0)) * (0.5 * width * w);
        }
    }
    sum
}

fn contour_pass(c: &Contour, panels: usize, f: &mut impl FnMut(Complex64) -> Complex64) -> Complex64 {
    let reach = c.reach();
    let down = Complex64::from_polar(1.0, -c.angle);
    let up = Complex64::from_polar(1.0, c.angle);
    let arc_panels = (panels / 4).max(4);
    // incoming ray, traversed from reach down to radius
    let lower = -panels_sum(c.radius, reach, panels, &mut |r| f(down * r) * down);
    let arc = -panels_sum(-2.0 * PI + c.angle, -c.angle, arc_panels, &mut |th| {
        let s = Complex64::from_polar(c.radius, th);
        f(s) * Complex64::i() * s
    });
    let upper = panels_sum(c.radius, reach, panels, &mut |r| f(up * r) * up);
    lower + arc + upper
}

/// `∫_γ f(s) ds` along `contour`, refining until two passes agree.
pub fn contour_integral(contour: &Contour, mut f: impl FnMut(Complex64) -> Complex64) -> Result<ContourIntegral> {
    if !(contour.angle > 0.0 && contour.angle < 0.5 * PI && contour.radius > 0.0 && contour.decay > 0.0) {
        return usage("contour needs 0 < angle < π/2, radius > 0, decay > 0");
    }
    let reach = contour.reach();
    let tail = (f(Complex64::from_polar(reach, contour.angle)).norm()
        + f(Complex64::from_polar(reach, -contour.angle)).norm())
        / contour.angle.cos();
    let mut panels = 16;
    let mut prev = contour_pass(contour, panels, &mut f);
    loop {
        panels *= 2;
        let next = contour_pass(contour, panels, &mut f);
        let diff = (next - prev).norm();
        if diff <= QUAD_TOLERANCE * next.norm().max(1e-3) || panels >= MAX_PANELS {
            return Ok(ContourIntegral { value: next, error: diff + tail, panels });
        }
        prev = next;
    }
}

/// Parameters of the characteristic function integrand.
#[derive(Debug, Clone, Copy)]
struct PsiShape {
    /// `κ b √ρ`
    alpha: f64,
    /// `C_d ρ^d / (b √ρ)`
    k: f64,
    prefactor: f64,
}

impl PsiShape {
    fn new(d: usize, kappa: f64, constants: &ConstantsSet) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return usage(format!("κ must be finite and nonnegative, got {kappa}"));
        }
        let amplitude = constants.amplitude(d)?;
        let (rho, b) = (constants.rho.value, constants.b.value);
        let sr = rho.sqrt();
        Ok(Self { alpha: kappa * b * sr, k: amplitude / (b * sr), prefactor: amplitude / (b * (rho * PI).sqrt()) })
    }
}

/// `ψ(t)` with an error bound covering quadrature and truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiValue {
    pub re: f64,
    pub im: f64,
    pub error: f64,
}

impl PsiValue {
    pub fn complex(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Characteristic function of the limit of `L_n^{(d)}(⌊κ√n⌋)/√n`,
///
/// `ψ(t) = 1 + (C_d ρ^d / (i b √(ρπ))) ∫_γ G(s) e^{-s} ds`, with
/// `G = i t w e^{-αw} / (w - i t K (1 - e^{-αw})/2)`, `w = √(-s)`.
pub fn eval_psi(t: f64, d: usize, kappa: f64, constants: &ConstantsSet) -> Result<PsiValue> {
    eval_psi_on(t, d, kappa, constants, &Contour::default())
}

pub fn eval_psi_on(t: f64, d: usize, kappa: f64, constants: &ConstantsSet, contour: &Contour) -> Result<PsiValue> {
    if !t.is_finite() {
        return usage("t must be finite");
    }
    let shape = PsiShape::new(d, kappa, constants)?;
    let mut c = *contour;
    for _ in 0..4 {
        let mut near_pole = false;
        let integral = contour_integral(&c, |s| {
            let w = (-s).sqrt();
            let decay = (-shape.alpha * w).exp();
            let num = Complex64::i() * t * w * decay;
            let den = w - Complex64::i() * (t * shape.k * 0.5) * (1.0 - decay);
            if den.norm() < 1e-9 * w.norm().max(1.0) {
                near_pole = true;
                return Complex64::new(0.0, 0.0);
            }
            num / den * (-s).exp()
        })?;
        if near_pole {
            c.radius *= 0.5;
            continue;
        }
        let value = 1.0 + integral.value * shape.prefactor / Complex64::i();
        return Ok(PsiValue { re: value.re, im: value.im, error: integral.error * shape.prefactor });
    }
    Err(Error::Accuracy(format!("integrand denominator vanishes on every tried contour (t = {t}, κ = {kappa})")))
}

/// `(2/(b²ρ))(e^{-a/4} - e^{-a}) - κ² e^{-a/2}` with `a = κ² b² ρ`.
pub fn covariance_shape(kappa: f64, rho: f64, b: f64) -> f64 {
    let a = kappa * kappa * b * b * rho;
    2.0 / (b * b * rho) * ((-a / 4.0).exp() - (-a).exp()) - kappa * kappa * (-a / 2.0).exp()
}

/// `lim Cov(L_n^{(d1)}(k), L_n^{(d2)}(k)) / n` at `k = ⌊κ√n⌋`.
pub fn eval_cov_limit(d1: usize, d2: usize, kappa: f64, constants: &ConstantsSet) -> Result<f64> {
    if !(kappa.is_finite() && kappa >= 0.0) {
        return usage(format!("κ must be finite and nonnegative, got {kappa}"));
    }
    let a = constants.amplitude(d1)? * constants.amplitude(d2)?;
    Ok(a * covariance_shape(kappa, constants.rho.value, constants.b.value))
}

/// `lim Var L_n^{(d)}(k) / n`.
pub fn eval_var_limit(d: usize, kappa: f64, constants: &ConstantsSet) -> Result<f64> {
    eval_cov_limit(d, d, kappa, constants)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub n: usize,
    pub k: usize,
    pub correlation: f64,
    pub one_minus: f64,
    /// `√n (1 - corr)`
    pub scaled: f64,
}

/// Exact finite-size correlation of the degree-`d1` and degree-`d2` counts on level `⌊κ√n⌋`.
pub fn correlation_convergence_report(
    d1: usize,
    d2: usize,
    kappa: f64,
    sizes: &[usize],
    table: &CountTable,
) -> Result<Vec<CorrelationRow>> {
    let n_max = sizes.iter().copied().max().unwrap_or(0);
    if n_max == 0 {
        return usage("correlation report needs at least one positive size");
    }
    let y = float_tree_series(table, n_max)?;
    sizes
        .iter()
        .map(|&n| {
            let k = scaled_level(kappa, n);
            let m = finite_covariance(&y, d1, d2, n, k)?;
            let correlation = m
                .correlation
                .ok_or_else(|| Error::Domain(format!("a variance vanishes at n = {n}, k = {k}")))?;
            let one_minus = 1.0 - correlation;
            Ok(CorrelationRow { n, k, correlation, one_minus, scaled: (n as f64).sqrt() * one_minus })
        })
        .collect()
}

/// Limiting mean of `L_n^{(d)}(⌊κ√n⌋)/√n` by quadratic extrapolation in
/// `1/√n` of exact means.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanLimit {
    pub value: f64,
    pub error: f64,
    /// `(n, E L_n^{(d)}(k)/√n)`
    pub finite: Vec<(usize, f64)>,
}

pub fn eval_limit_mean(d: usize, kappa: f64, table: &CountTable) -> Result<MeanLimit> {
    eval_limit_mean_over(d, kappa, table, &MEAN_SIZES)
}

pub fn eval_limit_mean_over(d: usize, kappa: f64, table: &CountTable, sizes: &[usize; 3]) -> Result<MeanLimit> {
    if d == 0 {
        return usage("degrees start at 1");
    }
    let n_max = sizes.iter().copied().max().expect("three sizes");
    let y = float_tree_series(table, n_max)?;
    let finite = finite_means(&y, d, kappa, sizes)?;
    let h: Vec<f64> = sizes.iter().map(|&n| 1.0 / (n as f64).sqrt()).collect();
    let v: Vec<f64> = finite.iter().map(|p| p.1).collect();
    // Lagrange interpolation at h = 0
    let mut quad = 0.0;
    for i in 0..3 {
        let mut w = 1.0;
        for j in 0..3 {
            if j != i {
                w *= h[j] / (h[j] - h[i]);
            }
        }
        quad += w * v[i];
    }
    let linear = (h[2] * v[1] - h[1] * v[2]) / (h[2] - h[1]);
    let mut error = (quad - linear).abs();
    let monotone = (v[0] <= v[1] && v[1] <= v[2]) || (v[0] >= v[1] && v[1] >= v[2]);
    if !monotone {
        let spread = v.iter().fold(f64::MIN, |a, &b| a.max(b)) - v.iter().fold(f64::MAX, |a, &b| a.min(b));
        error = error.max(spread);
    }
    Ok(MeanLimit { value: quad, error, finite })
}

fn finite_means(y: &TruncatedSeries<f64>, d: usize, kappa: f64, sizes: &[usize]) -> Result<Vec<(usize, f64)>> {
    sizes
        .iter()
        .map(|&n| {
            let k = scaled_level(kappa, n);
            let means = mean_profile(y, RootSelector::Degree(d), n, k)?;
            Ok((n, means[k] / (n as f64).sqrt()))
        })
        .collect()
}

/// Rows for a grid of `ψ` arguments.
pub fn psi_table(d: usize, kappa: f64, ts: &[f64], constants: &ConstantsSet) -> Result<Vec<LimitEvaluation>> {
    ts.iter()
        .map(|&t| {
            let p = eval_psi(t, d, kappa, constants)?;
            Ok(LimitEvaluation {
                kind: LimitKind::CharFn,
                d,
                d2: None,
                kappa,
                t: Some(t),
                n: None,
                value_re: p.re,
                value_im: p.im,
                error: p.error,
            })
        })
        .collect()
}

pub fn cov_row(d1: usize, d2: usize, kappa: f64, constants: &ConstantsSet) -> Result<LimitEvaluation> {
    let v = eval_cov_limit(d1, d2, kappa, constants)?;
    Ok(LimitEvaluation { d2: Some(d2), ..LimitEvaluation::real(LimitKind::Covariance, d1, kappa, v, 0.0) })
}

pub fn var_row(d: usize, kappa: f64, constants: &ConstantsSet) -> Result<LimitEvaluation> {
    let v = eval_var_limit(d, kappa, constants)?;
    Ok(LimitEvaluation::real(LimitKind::Variance, d, kappa, v, 0.0))
}

pub fn correlation_rows(d1: usize, d2: usize, kappa: f64, sizes: &[usize], table: &CountTable) -> Result<Vec<LimitEvaluation>> {
    Ok(correlation_convergence_report(d1, d2, kappa, sizes, table)?
        .into_iter()
        .map(|r| LimitEvaluation {
            d2: Some(d2),
            n: Some(r.n),
            ..LimitEvaluation::real(LimitKind::Correlation, d1, kappa, r.correlation, 0.0)
        })
        .collect())
}

pub fn mean_row(d: usize, kappa: f64, table: &CountTable) -> Result<LimitEvaluation> {
    let m = eval_limit_mean(d, kappa, table)?;
    Ok(LimitEvaluation::real(LimitKind::MeanProfile, d, kappa, m.value, m.error))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::compute_constants;
    use statrs::function::gamma::gamma;

    fn constants() -> &'static ConstantsSet {
        static C: OnceLock<ConstantsSet> = OnceLock::new();
        C.get_or_init(|| compute_constants(400, &[1, 2, 3]).unwrap())
    }

    #[test]
    fn hankel_orientation() {
        // (1/2πi) ∫ (-s)^{-z} e^{-s} ds = 1/Γ(z) on the clockwise contour
        for z in [-0.5, 0.5, 1.5, -1.5] {
            let r = contour_integral(&Contour::default(), |s| (-s).powf(-z) * (-s).exp()).unwrap();
            let got = r.value / (2.0 * PI * Complex64::i());
            let want = 1.0 / gamma(z);
            assert!((got.re - want).abs() < 1e-10 && got.im.abs() < 1e-10, "z = {z}: {got} vs {want}");
        }
    }

    #[test]
    fn psi_basic_properties() {
        let c = constants();
        let at0 = eval_psi(0.0, 1, 1.0, c).unwrap();
        assert_eq!((at0.re, at0.im), (1.0, 0.0));
        for t in [0.5, 1.0, 2.0] {
            let p = eval_psi(t, 1, 1.0, c).unwrap();
            let m = eval_psi(-t, 1, 1.0, c).unwrap();
            assert!((p.re - m.re).abs() < 1e-9 && (p.im + m.im).abs() < 1e-9);
            assert!(p.error < 1e-6, "{p:?}");
        }
    }

    #[test]
    fn psi_contour_independent() {
        let c = constants();
        let alt = Contour { angle: 0.3 * PI, radius: 0.8, decay: 45.0 };
        for (t, kappa) in [(1.0, 1.0), (3.0, 0.5), (-2.0, 1.5)] {
            let a = eval_psi(t, 1, kappa, c).unwrap();
            let b = eval_psi_on(t, 1, kappa, c, &alt).unwrap();
            assert!((a.complex() - b.complex()).norm() < 1e-9, "t = {t}, κ = {kappa}: {a:?} vs {b:?}");
        }
    }

    #[test]
    fn psi_slope_gives_mean() {
        let c = constants();
        let (rho, b) = (c.rho.value, c.b.value);
        for kappa in [0.5, 1.0] {
            let t = 1e-3;
            let p = eval_psi(t, 1, kappa, c).unwrap().complex();
            let m = eval_psi(-t, 1, kappa, c).unwrap().complex();
            let mean = ((p - m) / (2.0 * t * Complex64::i())).re;
            let closed = c.amplitude(1).unwrap() * kappa * (-kappa * kappa * b * b * rho / 4.0).exp();
            assert!((mean - closed).abs() < 1e-5, "κ = {kappa}: {mean} vs {closed}");
        }
    }

    #[test]
    fn covariance_shape_limits() {
        let c = constants();
        assert_eq!(eval_cov_limit(1, 2, 0.0, c).unwrap(), 0.0);
        let peak = eval_cov_limit(1, 2, 1.0, c).unwrap();
        assert!(peak > 0.0);
        assert!(eval_cov_limit(1, 2, 10.0, c).unwrap().abs() < 1e-10 * peak);
        assert_eq!(eval_cov_limit(1, 2, 0.7, c).unwrap(), eval_cov_limit(2, 1, 0.7, c).unwrap());
        for i in 0..=30 {
            assert!(eval_var_limit(1, i as f64 * 0.1, c).unwrap() >= 0.0);
        }
    }
}
