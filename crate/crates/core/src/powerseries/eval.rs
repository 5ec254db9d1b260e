//! Point evaluation of truncated series with a tail estimate.
//!
//! The tail beyond the last retained index is modelled from the last
//! retained terms `t_n = c_n x0^n` as `A n^{-β} q^n` (three-point fit). This
//! covers both geometric decay (`β = 0`) and the algebraic-geometric decay of
//! tree-like generating functions near their radius of convergence. Two fits
//! with different stencils give the error estimate.

use serde::Serialize;

use crate::error::{Error, Result};

/// Direct summation stops after this many tail terms; the rest is integrated.
const TAIL_DIRECT_TERMS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailModel {
    pub amplitude: f64,
    pub exponent: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    /// Partial sum plus the modelled tail.
    pub value: f64,
    pub partial_sum: f64,
    pub tail: f64,
    /// Estimated absolute error of `value`.
    pub error: f64,
}

pub(crate) fn evaluate_stored(stored: &[f64], scale: f64, x0: f64) -> Result<Evaluation> {
    if !(x0.abs() < 1.0) {
        return Err(Error::Usage(format!("evaluation point {x0} must satisfy |x| < 1")));
    }
    let z = x0 / scale;
    let mut terms = Vec::with_capacity(stored.len());
    let mut pow = 1.0;
    for &c in stored {
        terms.push(c * pow);
        pow *= z;
    }
    let partial: f64 = terms.iter().rev().sum();
    let abs_sum: f64 = terms.iter().map(|t| t.abs()).sum();
    let rounding = 4.0 * f64::EPSILON * abs_sum * (terms.len() as f64).sqrt();

    let n = terms.len() - 1;
    let upper = terms[n / 2..].iter().fold(0.0f64, |m, t| m.max(t.abs()));
    if x0 == 0.0 || upper == 0.0 {
        return Ok(Evaluation { value: partial, partial_sum: partial, tail: 0.0, error: rounding });
    }
    // terms already far below the rounding level: nothing left to model
    if upper < 1e-6 * f64::EPSILON * abs_sum && terms[n].abs() <= terms[n / 2].abs() {
        return Ok(Evaluation { value: partial, partial_sum: partial, tail: 0.0, error: rounding + upper });
    }

    let wide = fit_tail(&terms, (n / 4).max(1));
    let narrow = fit_tail(&terms, (n / 8).max(1));
    let (tail, spread) = match (wide, narrow) {
        (Some(a), Some(b)) => {
            let ta = sum_tail(&a, n)?;
            let tb = sum_tail(&b, n)?;
            (ta, (ta - tb).abs())
        }
        (Some(a), None) | (None, Some(a)) => {
            let ta = sum_tail(&a, n)?;
            (ta, ta.abs())
        }
        (None, None) => {
            // irregular signs: fall back to a geometric bound from the last two terms
            let (a, b) = (terms[n - 1].abs(), terms[n].abs());
            if a == 0.0 || b >= a {
                return Err(Error::Accuracy(
                    "series terms do not decay at the evaluation point".into(),
                ));
            }
            let q = b / a;
            (0.0, b * q / (1.0 - q))
        }
    };
    if tail.abs() > 0.5 * partial.abs().max(f64::MIN_POSITIVE) && tail.abs() > 1e-12 {
        return Err(Error::Accuracy(format!(
            "tail estimate {tail:e} dominates the partial sum {partial:e}; raise the order"
        )));
    }
    Ok(Evaluation { value: partial + tail, partial_sum: partial, tail, error: spread + rounding })
}

/// Fit `t_n ≈ A n^{-β} q^n` through `t_{N-2m}, t_{N-m}, t_N`.
fn fit_tail(terms: &[f64], m: usize) -> Option<TailModel> {
    let n3 = terms.len() - 1;
    if n3 < 2 * m || n3 - 2 * m == 0 {
        return None;
    }
    let (n1, n2) = (n3 - 2 * m, n3 - m);
    let (t1, t2, t3) = (terms[n1], terms[n2], terms[n3]);
    let sign = t3.signum();
    if t1 == 0.0 || t2 == 0.0 || t3 == 0.0 || t1.signum() != sign || t2.signum() != sign {
        return None;
    }
    let (l1, l2, l3) = (t1.abs().ln(), t2.abs().ln(), t3.abs().ln());
    let (g1, g2) = ((n2 as f64 / n1 as f64).ln(), (n3 as f64 / n2 as f64).ln());
    let denom = g2 - g1;
    let beta = if denom.abs() < 1e-300 { 0.0 } else { -((l3 - l2) - (l2 - l1)) / denom };
    let log_q = ((l3 - l2) + beta * g2) / m as f64;
    let log_a = l3 + beta * (n3 as f64).ln() - n3 as f64 * log_q;
    Some(TailModel { amplitude: sign * log_a.exp(), exponent: beta, ratio: log_q.exp() })
}

fn sum_tail(model: &TailModel, last: usize) -> Result<f64> {
    let TailModel { amplitude, exponent: beta, ratio: q } = *model;
    let log_q = q.ln();
    if log_q > 1e-4 {
        return Err(Error::Accuracy(format!(
            "series diverges at the evaluation point (fitted term ratio {q})"
        )));
    }
    // at the radius itself fit noise can put q marginally above one
    let log_q = log_q.min(0.0);
    if log_q > -1e-12 && beta <= 1.0 {
        return Err(Error::Accuracy("tail is not summable at the evaluation point".into()));
    }
    let mut sum = 0.0;
    let mut k = last + 1;
    let stop = last + TAIL_DIRECT_TERMS;
    while k <= stop {
        let kf = k as f64;
        let term = amplitude * (-beta * kf.ln() + kf * log_q).exp();
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            return Ok(sum);
        }
        k += 1;
    }
    let m = stop as f64;
    let at_m = amplitude * (-beta * m.ln() + m * log_q).exp();
    let rate = beta / m - log_q;
    Ok(sum + at_m / rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_series_at_half() {
        let ev = evaluate_stored(&vec![1.0; 41], 1.0, 0.5).unwrap();
        assert!((ev.value - 2.0).abs() < 1e-14, "{ev:?}");
        assert!((ev.value - 2.0).abs() <= ev.error + 1e-15);
    }

    #[test]
    fn zero_point() {
        let ev = evaluate_stored(&[0.0, 1.0, 1.0, 2.0], 1.0, 0.0).unwrap();
        assert_eq!(ev.value, 0.0);
    }

    #[test]
    fn polynomial_has_no_tail() {
        let ev = evaluate_stored(&[1.0, 2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1.0, 0.5).unwrap();
        assert_eq!(ev.value, 2.25);
        assert_eq!(ev.tail, 0.0);
    }

    #[test]
    fn algebraic_tail_is_recovered() {
        // Σ n^{-3/2} 0.9^n over n ≥ 1
        let coeffs: Vec<f64> = (0..200).map(|n| if n == 0 { 0.0 } else { (n as f64).powf(-1.5) }).collect();
        let exact: f64 = (1..2000).map(|n| (n as f64).powf(-1.5) * 0.9f64.powi(n)).sum();
        let ev = evaluate_stored(&coeffs, 1.0, 0.9).unwrap();
        assert!((ev.value - exact).abs() < 1e-10, "{} vs {}", ev.value, exact);
    }

    #[test]
    fn divergence_is_reported() {
        let coeffs: Vec<f64> = (0..100).map(|n| 2f64.powi(n)).collect();
        assert!(matches!(evaluate_stored(&coeffs, 1.0, 0.9), Err(Error::Accuracy(_))));
        assert!(matches!(evaluate_stored(&coeffs, 1.0, 1.5), Err(Error::Usage(_))));
    }
}
