use super::{Kind, Nonlinearity};
use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

/// Zeros of `f` on `[0, s_max]`: isolated points and flat stretches.
///
/// When produced by [`compute_zf`], `points` holds the members of `Z_f`,
/// `borderline` the candidates whose strictness margin fell within `tol_F`,
/// and `vacuous_zero` records that 0 was admitted only because the defining
/// condition is empty there.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ZeroSet {
    pub points: Vec<f64>,
    pub intervals: Vec<(f64, f64)>,
    pub tol_f: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub borderline: Vec<f64>,
    #[serde(default)]
    pub vacuous_zero: bool,
}

impl ZeroSet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty() && self.intervals.is_empty()
    }

    /// Points plus the left endpoint of every interval, sorted.
    pub fn representatives(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.points.iter().copied().chain(self.intervals.iter().map(|iv| iv.0)).collect();
        all.sort_by(f64::total_cmp);
        all
    }

    /// Distance from `s` to the nearest point or interval.
    pub fn distance(&self, s: f64) -> f64 {
        let p = self.points.iter().map(|&p| (s - p).abs());
        let iv = self.intervals.iter().map(|&(a, b)| {
            if s < a {
                a - s
            } else if s > b {
                s - b
            } else {
                0.0
            }
        });
        p.chain(iv).fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, s: f64, tol: f64) -> bool {
        self.distance(s) <= tol
    }
}

const GOLDEN_ITERS: usize = 200;
const BISECT_ITERS: usize = 200;

/// Scans `[0, s_max]` on `grid_n` points for zeros of `f`.
///
/// Sign changes are refined by bisection, local minima of `|f|` (tangential
/// zeros such as the kinks of `|sin|`) by golden-section search, and runs of
/// consecutive sub-threshold samples become intervals whose ends are refined
/// by bisection on the predicate `|f| <= tol_f`.
pub fn zero_set(nl: &Nonlinearity, tol_f: f64, grid_n: usize) -> Result<ZeroSet> {
    if grid_n < 2 {
        return invalid(format!("grid_n must be at least 2, got {grid_n}"));
    }
    if !(tol_f >= 0.0) {
        return invalid("tol_f must be nonnegative");
    }
    let n = grid_n;
    let h = nl.s_max / (n - 1) as f64;
    let s_at = |i: usize| if i == n - 1 { nl.s_max } else { i as f64 * h };
    let vals: Vec<f64> = (0..n).map(|i| nl.value(s_at(i))).collect();
    let small: Vec<bool> = vals.iter().map(|v| v.abs() <= tol_f).collect();
    let is_zero = |s: f64| nl.value(s).abs() <= tol_f;

    let mut points = Vec::new();
    let mut intervals = Vec::new();
    let mut i = 0;
    while i < n {
        if small[i] {
            let start = i;
            while i + 1 < n && small[i + 1] {
                i += 1;
            }
            let end = i;
            if end > start {
                let a = if start == 0 { 0.0 } else { bisect_predicate(&is_zero, s_at(start - 1), s_at(start)) };
                let b = if end == n - 1 { nl.s_max } else { bisect_predicate(&is_zero, s_at(end + 1), s_at(end)) };
                intervals.push((a, b));
            } else {
                let lo = s_at(start.saturating_sub(1));
                let hi = s_at((start + 1).min(n - 1));
                let g = golden_min(|s| nl.value(s).abs(), lo, hi);
                let p = if nl.value(g).abs() < vals[start].abs() { g } else { s_at(start) };
                points.push(p);
            }
        } else {
            if i + 1 < n && !small[i + 1] && vals[i] * vals[i + 1] < 0.0 {
                points.push(bisect_sign(|s| nl.value(s), s_at(i), s_at(i + 1)));
            }
            if i > 0 && i + 1 < n && !small[i - 1] && !small[i + 1] {
                let (l, c, r) = (vals[i - 1].abs(), vals[i].abs(), vals[i + 1].abs());
                if c < l && c <= r {
                    let g = golden_min(|s| nl.value(s).abs(), s_at(i - 1), s_at(i + 1));
                    if nl.value(g).abs() <= tol_f {
                        points.push(g);
                    }
                }
            }
        }
        i += 1;
    }

    points.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = Vec::with_capacity(points.len());
    for p in points {
        match merged.last() {
            Some(&q) if p - q <= h => {
                // Keep whichever is the better zero.
                if nl.value(p).abs() < nl.value(q).abs() {
                    *merged.last_mut().expect("nonempty") = p;
                }
            }
            _ => merged.push(p),
        }
    }
    merged.retain(|&p| !intervals.iter().any(|&(a, b)| p >= a - h && p <= b + h));
    Ok(ZeroSet { points: merged, intervals, tol_f, borderline: Vec::new(), vacuous_zero: false })
}

/// The subset `Z_f` of the zero set: zeros `z0` with `F(z) < F(z0)` for all
/// `z` in `[0, z0)`.
///
/// Strictness is tested on the scan grid: a candidate is a member when
/// `F(z0) - max F(z)` over grid points `z <= z0 - h_grid` (and `z = 0`)
/// exceeds `tol_F`. This is resolution-limited: `h_grid^2 / 2` should
/// comfortably exceed `tol_F` so that zeros approached linearly from below
/// are not misreported as ties.
pub fn compute_zf(nl: &Nonlinearity, tol_f: f64, tol_big_f: f64, grid_n: usize) -> Result<ZeroSet> {
    let e = zero_set(nl, tol_f, grid_n)?;
    let n = grid_n;
    let h = nl.s_max / (n - 1) as f64;
    let grid_f = grid_primitive(nl, n, h)?;
    let mut prefix_max = grid_f.clone();
    for k in 1..n {
        prefix_max[k] = prefix_max[k].max(prefix_max[k - 1]);
    }

    let mut members = Vec::new();
    let mut borderline = Vec::new();
    let mut vacuous_zero = false;
    for z0 in e.representatives() {
        if z0 <= 0.0 {
            members.push(0.0);
            vacuous_zero = true;
            continue;
        }
        let fz0 = nl.primitive(z0)?;
        let reach = z0 - h;
        let below = if reach >= 0.0 {
            let k = ((reach / h).floor() as usize).min(n - 1);
            // Guard against the floor landing one node past `reach`.
            let k = if k as f64 * h > reach && k > 0 { k - 1 } else { k };
            prefix_max[k]
        } else {
            grid_f[0]
        };
        let margin = fz0 - below;
        if margin > tol_big_f {
            members.push(z0);
        } else if margin.abs() <= tol_big_f {
            borderline.push(z0);
        }
    }
    Ok(ZeroSet { points: members, intervals: Vec::new(), tol_f, borderline, vacuous_zero })
}

fn grid_primitive(nl: &Nonlinearity, n: usize, h: f64) -> Result<Vec<f64>> {
    let s_at = |i: usize| if i == n - 1 { nl.s_max } else { i as f64 * h };
    if matches!(nl.kind, Kind::Table { .. } | Kind::Reflected { .. }) {
        let mut out = Vec::with_capacity(n);
        let mut acc = 0.0;
        out.push(0.0);
        for i in 1..n {
            acc += nl.integral(s_at(i - 1), s_at(i))?;
            out.push(acc);
        }
        Ok(out)
    } else {
        (0..n).map(|i| nl.primitive(s_at(i))).collect()
    }
}

/// Smallest `c >= floor` with `f(c) <= 0` (up to `tol_f`), searching up to
/// `max(s_max, 2 floor + 1)`. Constant such `c` are discrete supersolutions.
pub fn constant_supersolution(nl: &Nonlinearity, floor: f64, tol_f: f64) -> Result<Option<f64>> {
    if nl.value(floor) <= tol_f {
        return Ok(Some(floor));
    }
    let cap = nl.s_max.max(2.0 * floor + 1.0);
    let wide = if cap > nl.s_max { nl.with_s_max(cap)? } else { nl.clone() };
    let grid_n = ((cap * 2000.0).ceil() as usize).clamp(2_000, 200_000);
    let zs = zero_set(&wide, tol_f, grid_n)?;
    let from_points = zs.points.iter().copied().filter(|&p| p >= floor);
    let from_intervals = zs.intervals.iter().filter(|iv| iv.1 >= floor).map(|iv| iv.0.max(floor));
    Ok(from_points.chain(from_intervals).min_by(f64::total_cmp))
}

/// Locates the boundary of `pred` between `out` (false) and `inside` (true).
fn bisect_predicate(pred: &impl Fn(f64) -> bool, mut out: f64, mut inside: f64) -> f64 {
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (out + inside);
        if mid == out || mid == inside {
            break;
        }
        if pred(mid) {
            inside = mid;
        } else {
            out = mid;
        }
    }
    inside
}

fn bisect_sign(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    if f(a).abs() <= f(b).abs() {
        a
    } else {
        b
    }
}

pub(crate) fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERS {
        if b - a <= 4.0 * f64::EPSILON * (a.abs() + b.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    [mid, c, d].into_iter().min_by(|x, y| f(*x).total_cmp(&f(*y))).expect("nonempty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn abs_sin_zeros() {
        let z = zero_set(&Nonlinearity::abs_sin(), 1e-10, 10_000).unwrap();
        assert_eq!(z.points.len(), 4, "{z:?}");
        for (k, p) in z.points.iter().enumerate() {
            assert!(close(*p, k as f64 * PI, 1e-9), "{p}");
        }
        assert!(z.intervals.is_empty());
    }

    #[test]
    fn logistic_zeros() {
        let z = zero_set(&Nonlinearity::logistic(), 1e-10, 10_000).unwrap();
        assert_eq!(z.points.len(), 2);
        assert!(close(z.points[0], 0.0, 1e-12) && close(z.points[1], 1.0, 1e-12));
    }

    #[test]
    fn logistic_zeros_off_grid() {
        // 7 points on [0, 2] do not hit s = 1 exactly.
        let z = zero_set(&Nonlinearity::logistic(), 1e-10, 8).unwrap();
        assert_eq!(z.points.len(), 2);
        assert!(close(z.points[1], 1.0, 1e-12));
    }

    #[test]
    fn cantor_one_intervals() {
        let z = zero_set(&Nonlinearity::cantor(1).unwrap(), 1e-10, 10_000).unwrap();
        assert!(z.points.is_empty(), "{z:?}");
        assert_eq!(z.intervals.len(), 2);
        assert!(close(z.intervals[0].0, 0.0, 1e-9) && close(z.intervals[0].1, 1.0 / 3.0, 1e-9));
        assert!(close(z.intervals[1].0, 2.0 / 3.0, 1e-9) && close(z.intervals[1].1, 1.0, 1e-9));
    }

    #[test]
    fn linear_decay_has_single_zero() {
        let z = zero_set(&Nonlinearity::linear_decay(), 1e-10, 10_000).unwrap();
        assert_eq!(z.points.len(), 1);
        assert!(close(z.points[0], 1.0, 1e-12));
    }

    #[test]
    fn zf_cantor_two() {
        let zf = compute_zf(&Nonlinearity::cantor(2).unwrap(), 1e-10, 1e-12, 10_000).unwrap();
        let want = [0.0, 2.0 / 9.0, 2.0 / 3.0, 8.0 / 9.0];
        assert_eq!(zf.points.len(), 4, "{zf:?}");
        for (g, w) in zf.points.iter().zip(want) {
            assert!(close(*g, w, 1e-8), "{g} vs {w}");
        }
        assert!(zf.vacuous_zero);
    }

    #[test]
    fn zf_abs_sin_and_logistic() {
        let zf = compute_zf(&Nonlinearity::abs_sin(), 1e-10, 1e-12, 10_000).unwrap();
        assert_eq!(zf.points.len(), 4);
        let zf = compute_zf(&Nonlinearity::logistic(), 1e-10, 1e-12, 10_000).unwrap();
        assert_eq!(zf.points.len(), 2);
    }

    #[test]
    fn zf_excludes_zero_below_a_higher_plateau() {
        // f = sin on [0, 3pi] has zeros 0, pi, 2pi, 3pi; F(2pi) = 0 = F(0) so 2pi is not in Z_f.
        let s: Vec<f64> = (0..=3000).map(|i| i as f64 * 3.0 * PI / 3000.0).collect();
        let f: Vec<f64> = s.iter().map(|x| x.sin()).collect();
        let nl = Nonlinearity::new(Kind::Table { s, f }, 3.0 * PI).unwrap();
        let e = zero_set(&nl, 1e-6, 10_000).unwrap();
        assert_eq!(e.points.len(), 4, "{e:?}");
        let zf = compute_zf(&nl, 1e-6, 1e-12, 10_000).unwrap();
        assert_eq!(zf.points.len(), 2, "{zf:?}");
        assert!(close(zf.points[1], PI, 1e-6));
    }

    #[test]
    fn supersolution_constants() {
        assert_eq!(constant_supersolution(&Nonlinearity::linear_decay(), 3.0, 1e-10).unwrap(), Some(3.0));
        let c = constant_supersolution(&Nonlinearity::linear_decay(), 0.5, 1e-10).unwrap().unwrap();
        assert!(close(c, 1.0, 1e-12));
        let c = constant_supersolution(&Nonlinearity::abs_sin(), 5.0, 1e-10).unwrap().unwrap();
        assert!(close(c, 2.0 * PI, 1e-9));
        assert_eq!(constant_supersolution(&Nonlinearity::constant(1.0).unwrap(), 0.0, 1e-10).unwrap(), None);
    }

    #[test]
    fn golden_finds_kink() {
        let g = golden_min(|s: f64| (s - 0.3).abs(), 0.0, 1.0);
        assert!(close(g, 0.3, 1e-14));
    }
}
