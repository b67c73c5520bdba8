//! Adaptive Gauss-Kronrod (7/15) quadrature with global subdivision.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

const MAX_PANELS: usize = 4000;

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    // Largest error first; ties broken by position so the order is total and deterministic.
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error).then_with(|| other.a.total_cmp(&self.a))
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for k in 0..7 {
        let dx = half * XGK[k];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[k] * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Panel { a, b, value, error }
}

/// Integrates `f` over `[a, b]` until the estimated error is below
/// `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Quadrature> {
    integrate_with_breaks(f, &[a, b], abs_tol, rel_tol)
}

/// Like [`integrate`], with the initial panels split at the sorted `breaks`
/// (first and last entries are the integration limits). Kinks of the
/// integrand belong in `breaks`.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, breaks: &[f64], abs_tol: f64, rel_tol: f64) -> Result<Quadrature> {
    let (q, converged) = adapt(&f, breaks, abs_tol, rel_tol, MAX_PANELS)?;
    if converged {
        Ok(q)
    } else {
        Err(Error::Quadrature { achieved: q.error })
    }
}

/// Best effort within `max_panels`: returns the estimate with its achieved
/// error even when the tolerance was not met. Useful when the integrand is
/// only known to a noise floor and the caller judges the achieved error.
pub fn integrate_budgeted<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64, max_panels: usize) -> Result<Quadrature> {
    integrate_budgeted_with_breaks(f, &[a, b], abs_tol, rel_tol, max_panels)
}

/// [`integrate_budgeted`] with the initial panels split at `breaks`.
pub fn integrate_budgeted_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<Quadrature> {
    adapt(&f, breaks, abs_tol, rel_tol, max_panels).map(|r| r.0)
}

fn adapt<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], abs_tol: f64, rel_tol: f64, max_panels: usize) -> Result<(Quadrature, bool)> {
    if breaks.len() < 2 {
        return Err(Error::InvalidInput("quadrature needs at least two limits".into()));
    }
    if breaks.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite quadrature limit".into()));
    }
    let (lo, hi) = (breaks[0], breaks[breaks.len() - 1]);
    if lo == hi {
        return Ok((Quadrature { value: 0.0, error: 0.0, evaluations: 0 }, true));
    }
    let sign = if hi < lo { -1.0 } else { 1.0 };
    let mut pts: Vec<f64> = breaks.to_vec();
    if sign < 0.0 {
        pts.reverse();
    }

    let mut heap = BinaryHeap::new();
    for w in pts.windows(2) {
        if w[1] > w[0] {
            heap.push(kronrod(f, w[0], w[1]));
        }
    }
    let mut evaluations = 15 * heap.len();
    // Running sums steer the refinement; the reported totals are re-summed in
    // position order.
    let (mut value, mut error) = totals(&heap);
    let finish = |heap: &BinaryHeap<Panel>, evaluations: usize, ok: bool| {
        let (v, e) = totals(heap);
        if !v.is_finite() {
            return Err(Error::Quadrature { achieved: f64::INFINITY });
        }
        Ok((Quadrature { value: sign * v, error: e, evaluations }, ok))
    };
    loop {
        if !value.is_finite() {
            return Err(Error::Quadrature { achieved: f64::INFINITY });
        }
        if error <= abs_tol.max(rel_tol * value.abs()) {
            let (v, e) = totals(&heap);
            let ok = e <= abs_tol.max(rel_tol * v.abs());
            if ok || heap.len() >= max_panels {
                return finish(&heap, evaluations, ok);
            }
            // Drift in the running sums; resynchronize and keep refining.
            value = v;
            error = e;
            continue;
        }
        if heap.len() >= max_panels {
            return finish(&heap, evaluations, false);
        }
        let worst = heap.pop().expect("non-empty panel heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel collapsed to adjacent floats; nothing left to refine.
            heap.push(worst);
            let (v, e) = totals(&heap);
            return finish(&heap, evaluations, e <= 1e3 * abs_tol.max(rel_tol * v.abs()));
        }
        let left = kronrod(f, worst.a, mid);
        let right = kronrod(f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        evaluations += 30;
    }
}

fn totals(heap: &BinaryHeap<Panel>) -> (f64, f64) {
    // Sum in position order so the result does not depend on heap layout.
    let mut panels: Vec<&Panel> = heap.iter().collect();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    panels.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| 3.0 * x * x, 0.0, 2.0, 1e-14, 0.0).unwrap();
        assert!((q.value - 8.0).abs() < 1e-13);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let q = integrate(f64::sin, std::f64::consts::PI, 0.0, 1e-13, 0.0).unwrap();
        assert!((q.value + 2.0).abs() < 1e-12);
    }

    #[test]
    fn kink_at_break() {
        let q = integrate_with_breaks(|x: f64| x.abs(), &[-1.0, 0.0, 2.0], 1e-14, 0.0).unwrap();
        assert!((q.value - 2.5).abs() < 1e-13);
    }

    #[test]
    fn log_singularity_converges() {
        // ∫_0^1 -ln x dx = 1
        let q = integrate(|x: f64| -x.ln(), 0.0, 1.0, 1e-10, 0.0).unwrap();
        assert!((q.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_interval() {
        assert_eq!(integrate(|x| x, 1.0, 1.0, 1e-12, 0.0).unwrap().value, 0.0);
    }
}
