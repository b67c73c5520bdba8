use super::{zero_set, Nonlinearity, TOL_F};
use crate::error::Result;
use serde::{Deserialize, Serialize};

const SCAN_N: usize = 10_000;
const DELTAS: [f64; 5] = [1e-3, 1e-4, 1e-5, 1e-6, 1e-7];
/// Difference quotients below this are treated as vanishing.
const RATIO_TOL: f64 = 1e-6;

/// Outcome of a sampled hypothesis test. Sampling can fail to decide; that
/// is reported as `Indeterminate`, never as a pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Satisfied,
    Violated,
    Indeterminate,
}

impl Verdict {
    pub fn holds(self) -> bool {
        self == Verdict::Satisfied
    }

    fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Violated, _) | (_, Violated) => Violated,
            (Indeterminate, _) | (_, Indeterminate) => Indeterminate,
            _ => Satisfied,
        }
    }
}

/// One-sided difference quotients `f(z ± δ) / (±δ)` at a zero `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub z: f64,
    /// `+1` for the right quotient, `-1` for the left one.
    pub side: i8,
    pub ratios: Vec<(f64, f64)>,
    pub min: f64,
    pub verdict: Verdict,
}

/// Sampled verdicts for the three structural assumptions on `f`:
///
/// * `positive_then_nonpositive`: `f > 0` on `(0, µ)`, `f <= 0` beyond, `f`
///   nonincreasing on some `[µ', µ]`, and either `f(0) > 0` or `f(0) = 0`
///   with a positive right quotient at 0;
/// * `nonnegative_with_transversal_zeros`: `f >= 0` and every zero has a
///   positive right quotient;
/// * `left_transversal_beyond_mu`: every zero above `µ` has a positive left
///   quotient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub positive_then_nonpositive: Verdict,
    pub mu: Option<f64>,
    pub mu_prime: Option<f64>,
    pub origin_ratio: Option<RatioEstimate>,
    pub nonnegative_with_transversal_zeros: Verdict,
    pub right_ratios: Vec<RatioEstimate>,
    pub left_transversal_beyond_mu: Verdict,
    pub left_ratios: Vec<RatioEstimate>,
    pub notes: Vec<String>,
}

impl HypothesisReport {
    pub fn satisfies_h1(&self) -> bool {
        self.positive_then_nonpositive.holds()
    }

    pub fn satisfies_h2(&self) -> bool {
        self.nonnegative_with_transversal_zeros.holds()
    }

    pub fn satisfies_h3(&self) -> bool {
        self.left_transversal_beyond_mu.holds()
    }
}

fn ratio_estimate(nl: &Nonlinearity, z: f64, side: i8) -> RatioEstimate {
    let ratios: Vec<(f64, f64)> = DELTAS
        .iter()
        .map(|&d| {
            let step = f64::from(side) * d;
            (d, nl.value(z + step) / step)
        })
        .collect();
    let min = ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let max = ratios.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let verdict = if min > RATIO_TOL {
        Verdict::Satisfied
    } else if max <= RATIO_TOL {
        Verdict::Violated
    } else {
        Verdict::Indeterminate
    };
    RatioEstimate { z, side, ratios, min, verdict }
}

/// Tests the three structural assumptions on a dense grid over `[0, s_max]`.
pub fn check_hypotheses(nl: &Nonlinearity) -> Result<HypothesisReport> {
    let n = SCAN_N;
    let h = nl.s_max / (n - 1) as f64;
    let s_at = |i: usize| if i == n - 1 { nl.s_max } else { i as f64 * h };
    let vals: Vec<f64> = (0..n).map(|i| nl.value(s_at(i))).collect();
    let zeros = zero_set(nl, TOL_F, n)?;
    let mut notes = Vec::new();

    // Sign pattern: positive, then nonpositive for good.
    let f0 = vals[0];
    let mut h1 = Verdict::Satisfied;
    let mut origin_ratio = None;
    if f0 < -TOL_F {
        h1 = Verdict::Violated;
        notes.push(format!("f(0) = {f0:.3e} < 0"));
    } else if f0.abs() <= TOL_F {
        let r = ratio_estimate(nl, 0.0, 1);
        h1 = h1.and(r.verdict);
        origin_ratio = Some(r);
    }
    let first_down = (1..n).find(|&i| vals[i] <= TOL_F);
    let (mut mu, mut mu_prime) = (None, None);
    match first_down {
        None => {
            h1 = Verdict::Violated;
            notes.push("f stays positive on (0, s_max]: no µ".into());
        }
        Some(i) => {
            let m = if vals[i].abs() <= TOL_F { s_at(i) } else { bisect_down(nl, s_at(i - 1), s_at(i)) };
            if m <= 0.0 {
                h1 = Verdict::Violated;
            }
            let tail_ok = vals[i..].iter().all(|&v| v <= TOL_F);
            if !tail_ok {
                h1 = Verdict::Violated;
                notes.push(format!("f becomes positive again above µ ≈ {m:.6}"));
            }
            // Walk back from µ while f keeps increasing towards the left.
            let mut k = i - 1;
            while k > 1 && vals[k - 1] >= vals[k] {
                k -= 1;
            }
            let mp = s_at(k.max(1));
            if mp < m {
                mu_prime = Some(mp);
            } else {
                h1 = Verdict::Violated;
                notes.push("f is not nonincreasing on any interval left of µ".into());
            }
            mu = Some(m);
        }
    }

    // Nonnegativity with transversal zeros from the right.
    let mut h2 = if vals.iter().all(|&v| v >= -TOL_F) { Verdict::Satisfied } else { Verdict::Violated };
    if !zeros.intervals.is_empty() {
        h2 = Verdict::Violated;
        notes.push(format!("{} flat zero interval(s): right quotients vanish inside", zeros.intervals.len()));
    }
    let right_ratios: Vec<RatioEstimate> =
        zeros.points.iter().filter(|&&z| z + DELTAS[0] <= nl.s_max).map(|&z| ratio_estimate(nl, z, 1)).collect();
    for r in &right_ratios {
        h2 = h2.and(r.verdict);
    }

    // Transversality from the left at zeros above µ.
    let (h3, left_ratios) = match mu {
        None => {
            notes.push("left-transversality is relative to µ, which was not found".into());
            (Verdict::Indeterminate, Vec::new())
        }
        Some(m) => {
            let reps = zeros.representatives();
            let above: Vec<f64> = reps.into_iter().filter(|&z| z > m + h).collect();
            let ratios: Vec<RatioEstimate> = above.iter().map(|&z| ratio_estimate(nl, z, -1)).collect();
            let mut v = Verdict::Satisfied;
            for r in &ratios {
                v = v.and(r.verdict);
            }
            if zeros.intervals.iter().any(|iv| iv.1 > m + h) {
                v = Verdict::Violated;
            }
            (v, ratios)
        }
    };

    Ok(HypothesisReport {
        positive_then_nonpositive: h1,
        mu,
        mu_prime,
        origin_ratio,
        nonnegative_with_transversal_zeros: h2,
        right_ratios,
        left_transversal_beyond_mu: h3,
        left_ratios,
        notes,
    })
}

/// First point in `(a, b]` where `f <= tol`, given `f(a) > tol`.
fn bisect_down(nl: &Nonlinearity, mut a: f64, mut b: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        if nl.value(mid) <= 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_pattern() {
        let r = check_hypotheses(&Nonlinearity::logistic()).unwrap();
        assert!(r.satisfies_h1());
        assert!((r.mu.unwrap() - 1.0).abs() < 1e-12);
        assert!(r.mu_prime.unwrap() < 1.0);
        assert_eq!(r.nonnegative_with_transversal_zeros, Verdict::Violated);
        assert!(r.satisfies_h3());
    }

    #[test]
    fn abs_sin_pattern() {
        let r = check_hypotheses(&Nonlinearity::abs_sin()).unwrap();
        assert!(r.satisfies_h2());
        assert!(!r.satisfies_h1());
        for q in &r.right_ratios {
            assert!((q.min - 1.0).abs() < 1e-3, "{q:?}");
        }
    }

    #[test]
    fn linear_decay_pattern() {
        let r = check_hypotheses(&Nonlinearity::linear_decay()).unwrap();
        assert!(r.satisfies_h1());
        assert!((r.mu.unwrap() - 1.0).abs() < 1e-12);
        assert!(r.origin_ratio.is_none());
        assert!(r.satisfies_h3());
    }

    #[test]
    fn cantor_fails_transversality() {
        let r = check_hypotheses(&Nonlinearity::cantor(3).unwrap()).unwrap();
        assert_eq!(r.nonnegative_with_transversal_zeros, Verdict::Violated);
    }

    #[test]
    fn constant_one_has_no_mu() {
        let r = check_hypotheses(&Nonlinearity::constant(1.0).unwrap()).unwrap();
        assert_eq!(r.positive_then_nonpositive, Verdict::Violated);
        assert_eq!(r.left_transversal_beyond_mu, Verdict::Indeterminate);
        assert!(r.satisfies_h2());
    }
}
