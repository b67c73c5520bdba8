//! Reaction terms `f`: evaluation, antiderivative `F`, zero sets and
//! hypothesis checks.
//!
//! A [`Nonlinearity`] is an immutable value. Evaluation through
//! [`Nonlinearity::eval`] enforces the analysis cap `s_max`; solvers use the
//! unchecked [`Nonlinearity::value`], which extends every builtin naturally
//! past the cap (and to small negative arguments).

mod hypotheses;
mod zeros;

pub use hypotheses::{check_hypotheses, HypothesisReport, RatioEstimate, Verdict};
pub use zeros::{compute_zf, constant_supersolution, zero_set, ZeroSet};

use crate::error::{invalid, Error, Result};
use crate::quad;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

/// Default zero-detection threshold on |f|.
pub const TOL_F: f64 = 1e-10;
/// Default strictness margin for membership in `Z_f`.
pub const TOL_BIG_F: f64 = 1e-12;
/// Default pre-fractal level of the Cantor nonlinearity.
pub const CANTOR_DEFAULT_LEVEL: u32 = 6;

const LIPSCHITZ_GRID: usize = 10_000;

/// The concrete formula behind a [`Nonlinearity`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    /// `f(s) = s (1 - s)`
    Logistic,
    /// `f(s) = |sin s|`
    AbsSin,
    /// `f(s) = 1 - s`
    LinearDecay,
    /// `f(s) = c`
    Constant { value: f64 },
    /// Distance to the level-`level` Cantor pre-fractal in `[0, 1]`.
    Cantor { level: u32 },
    /// Piecewise-linear interpolation of samples; constant outside the knots.
    Table { s: Vec<f64>, f: Vec<f64> },
    /// `g(s) = -f(M' + 1 - s)` for `s <= M' + 1 - m`, `-f(m)` beyond.
    Reflected { base: Box<Nonlinearity>, m_prime: f64, m: f64 },
}

/// A reaction term with its analysis cap and sampled Lipschitz bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Stored")]
pub struct Nonlinearity {
    pub kind: Kind,
    pub s_max: f64,
    /// Max symmetric difference quotient on a 10^4-point grid, inflated by 1.1.
    pub lipschitz_estimate: f64,
    /// Only for `Cantor`: sorted closed intervals of the pre-fractal.
    #[serde(skip)]
    cantor: Vec<(f64, f64)>,
}

/// Serialized form; derived fields are recomputed on load.
#[derive(Deserialize)]
struct Stored {
    kind: Kind,
    s_max: f64,
    #[allow(dead_code)]
    lipschitz_estimate: Option<f64>,
}

impl TryFrom<Stored> for Nonlinearity {
    type Error = Error;
    fn try_from(s: Stored) -> Result<Self> {
        Self::new(s.kind, s.s_max)
    }
}

impl Nonlinearity {
    pub fn new(kind: Kind, s_max: f64) -> Result<Self> {
        if !(s_max.is_finite() && s_max > 0.0) {
            return invalid(format!("s_max must be positive and finite, got {s_max}"));
        }
        match &kind {
            Kind::Cantor { level } if *level == 0 || *level > 20 => {
                return invalid(format!("cantor level must be in 1..=20, got {level}"));
            }
            Kind::Table { s, f } => validate_table(s, f)?,
            Kind::Reflected { m_prime, m, .. } if !(m <= m_prime) || *m < 0.0 => {
                return invalid(format!("reflection needs 0 <= m <= M', got m={m}, M'={m_prime}"));
            }
            Kind::Constant { value } if !value.is_finite() => return invalid("non-finite constant"),
            _ => {}
        }
        let cantor = match &kind {
            Kind::Cantor { level } => cantor_intervals(*level),
            _ => Vec::new(),
        };
        let mut nl = Self { kind, s_max, lipschitz_estimate: 0.0, cantor };
        nl.lipschitz_estimate = nl.sampled_lipschitz();
        Ok(nl)
    }

    pub fn logistic() -> Self {
        Self::new(Kind::Logistic, 2.0).expect("builtin")
    }

    pub fn abs_sin() -> Self {
        Self::new(Kind::AbsSin, 10.0).expect("builtin")
    }

    pub fn linear_decay() -> Self {
        Self::new(Kind::LinearDecay, 3.0).expect("builtin")
    }

    pub fn cantor(level: u32) -> Result<Self> {
        Self::new(Kind::Cantor { level }, 1.0)
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(Kind::Constant { value }, 10.0)
    }

    /// Same formula, different analysis cap.
    pub fn with_s_max(&self, s_max: f64) -> Result<Self> {
        Self::new(self.kind.clone(), s_max)
    }

    /// Parses `logistic`, `abs-sin`, `linear-decay`, `cantor:<level>`,
    /// `constant:<c>` or `table:<path>` (CSV with header `s,f`).
    pub fn from_spec(spec: &str, s_max: Option<f64>) -> Result<Self> {
        let spec = spec.trim();
        let (head, arg) = match spec.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (spec, None),
        };
        let nl = match (head, arg) {
            ("logistic", None) => Self::logistic(),
            ("abs-sin", None) => Self::abs_sin(),
            ("linear-decay", None) => Self::linear_decay(),
            ("cantor", a) => {
                let level = match a {
                    None => CANTOR_DEFAULT_LEVEL,
                    Some(a) => a.parse().map_err(|_| Error::InvalidInput(format!("bad cantor level '{a}'")))?,
                };
                Self::cantor(level)?
            }
            ("constant", Some(a)) => {
                let c: f64 = a.parse().map_err(|_| Error::InvalidInput(format!("bad constant '{a}'")))?;
                Self::constant(c)?
            }
            ("table", Some(path)) => Self::from_table_file(Path::new(path))?,
            _ => return invalid(format!("unknown nonlinearity '{spec}'")),
        };
        match s_max {
            Some(cap) => nl.with_s_max(cap),
            None => Ok(nl),
        }
    }

    pub fn from_table_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("cannot read table {}: {e}", path.display())))?;
        let (s, f) = parse_two_column_csv(&text, ("s", "f"))?;
        let cap = *s.last().expect("validated non-empty");
        Self::new(Kind::Table { s, f }, cap)
    }

    /// Short textual name, the inverse of [`Nonlinearity::from_spec`] for builtins.
    pub fn name(&self) -> String {
        match &self.kind {
            Kind::Logistic => "logistic".into(),
            Kind::AbsSin => "abs-sin".into(),
            Kind::LinearDecay => "linear-decay".into(),
            Kind::Constant { value } => format!("constant:{value}"),
            Kind::Cantor { level } => format!("cantor:{level}"),
            Kind::Table { s, .. } => format!("table[{} knots]", s.len()),
            Kind::Reflected { base, m_prime, m } => format!("reflect({}, M'={m_prime}, m={m})", base.name()),
        }
    }

    /// `f(s)` with the domain check `0 <= s <= s_max`.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(0.0..=self.s_max).contains(&s) {
            return invalid(format!("s = {s} outside [0, {}]", self.s_max));
        }
        Ok(self.value(s))
    }

    /// `f(s)` without the domain check.
    pub fn value(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Logistic => s * (1.0 - s),
            Kind::AbsSin => s.sin().abs(),
            Kind::LinearDecay => 1.0 - s,
            Kind::Constant { value } => *value,
            Kind::Cantor { .. } => cantor_distance(&self.cantor, s),
            Kind::Table { s: xs, f: fs } => interp_linear(xs, fs, s),
            Kind::Reflected { base, m_prime, m } => {
                if s <= m_prime + 1.0 - m {
                    -base.value(m_prime + 1.0 - s)
                } else {
                    -base.value(*m)
                }
            }
        }
    }

    /// Derivative of `f`; at kinks the left derivative.
    pub fn slope(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Logistic => 1.0 - 2.0 * s,
            Kind::AbsSin => {
                let sn = s.sin();
                let c = s.cos();
                if sn > 0.0 {
                    c
                } else if sn < 0.0 {
                    -c
                } else {
                    // Left derivative at k*pi is -|cos| = -1.
                    -c.abs()
                }
            }
            Kind::LinearDecay => -1.0,
            Kind::Constant { .. } => 0.0,
            Kind::Cantor { .. } | Kind::Table { .. } => {
                let d = 1e-7 * (1.0 + s.abs());
                (self.value(s) - self.value(s - d)) / d
            }
            Kind::Reflected { base, m_prime, m } => {
                if s <= m_prime + 1.0 - m {
                    base.slope(m_prime + 1.0 - s)
                } else {
                    0.0
                }
            }
        }
    }

    /// Points in `[lo, hi]` where `f` is not differentiable, sorted.
    pub fn kinks(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out: Vec<f64> = match &self.kind {
            Kind::Logistic | Kind::LinearDecay | Kind::Constant { .. } => Vec::new(),
            Kind::AbsSin => {
                let first = (lo / PI).ceil().max(0.0) as usize;
                (first..).map(|k| k as f64 * PI).take_while(|&s| s <= hi).collect()
            }
            Kind::Cantor { .. } => {
                let mut k = Vec::with_capacity(3 * self.cantor.len());
                for (idx, &(a, b)) in self.cantor.iter().enumerate() {
                    k.push(a);
                    k.push(b);
                    if let Some(next) = self.cantor.get(idx + 1) {
                        k.push(0.5 * (b + next.0));
                    }
                }
                k
            }
            Kind::Table { s, .. } => s.clone(),
            Kind::Reflected { base, m_prime, m } => {
                let edge = m_prime + 1.0 - m;
                let mut k: Vec<f64> = base.kinks(*m, m_prime + 1.0).into_iter().map(|t| m_prime + 1.0 - t).collect();
                k.push(edge);
                k
            }
        };
        out.retain(|&s| s >= lo && s <= hi);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// `F(z) = ∫_0^z f`, with the domain check `0 <= z <= s_max`.
    pub fn antiderivative(&self, z: f64) -> Result<f64> {
        if !(0.0..=self.s_max).contains(&z) {
            return invalid(format!("z = {z} outside [0, {}]", self.s_max));
        }
        self.primitive(z)
    }

    /// `F(z)` without the domain check; closed form for every builtin,
    /// adaptive quadrature (absolute tolerance 1e-12) for tables.
    pub fn primitive(&self, z: f64) -> Result<f64> {
        Ok(match &self.kind {
            Kind::Logistic => z * z / 2.0 - z * z * z / 3.0,
            Kind::AbsSin => abs_sin_primitive(z),
            Kind::LinearDecay => z - z * z / 2.0,
            Kind::Constant { value } => value * z,
            Kind::Cantor { .. } => cantor_primitive(&self.cantor, z),
            Kind::Table { s, .. } => {
                let mut breaks = vec![0.0];
                let (lo, hi) = if z >= 0.0 { (0.0, z) } else { (z, 0.0) };
                breaks.extend(s.iter().copied().filter(|&k| k > lo && k < hi));
                breaks.push(z);
                if z < 0.0 {
                    let last = breaks.len() - 1;
                    breaks[1..last].reverse();
                }
                quad::integrate_with_breaks(|x| self.value(x), &breaks, 1e-12, 0.0)?.value
            }
            Kind::Reflected { base, m_prime, m } => {
                let top = m_prime + 1.0;
                let knee = top - m;
                if z <= knee {
                    -base.integral(top - z, top)?
                } else {
                    -base.integral(top - knee, top)? - base.value(*m) * (z - knee)
                }
            }
        })
    }

    /// `∫_a^b f`, accurate in relative terms when `b - a` is small
    /// (direct quadrature instead of a difference of antiderivatives).
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        if (b - a).abs() <= 0.05 * (1.0 + a.abs().max(b.abs())) {
            // Short intervals: the integrand is only known to rounding noise,
            // so a few panels reach the attainable accuracy once the kinks
            // are panel edges.
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let mut breaks = vec![a];
            let inner = self.kinks(lo, hi).into_iter().filter(|&k| k > lo && k < hi);
            if a < b {
                breaks.extend(inner);
            } else {
                breaks.extend(inner.rev());
            }
            breaks.push(b);
            let q = quad::integrate_budgeted_with_breaks(|x| self.value(x), &breaks, 0.0, 1e-14, 32 + breaks.len())?;
            return Ok(q.value);
        }
        Ok(self.primitive(b)? - self.primitive(a)?)
    }

    /// The reflected-truncated nonlinearity `g(s) = -f(M'+1-s)` on
    /// `[0, M'+1-m]`, constant `-f(m)` beyond.
    pub fn reflect(&self, m_prime: f64, m: f64) -> Result<Self> {
        if !(m <= m_prime) || m < 0.0 || !m_prime.is_finite() {
            return invalid(format!("reflect needs 0 <= m <= M', got m={m}, M'={m_prime}"));
        }
        Self::new(Kind::Reflected { base: Box::new(self.clone()), m_prime, m }, m_prime + 1.0)
    }

    fn sampled_lipschitz(&self) -> f64 {
        let n = LIPSCHITZ_GRID;
        let h = self.s_max / (n - 1) as f64;
        let vals: Vec<f64> = (0..n).map(|i| self.value(i as f64 * h)).collect();
        let raw = vals.windows(3).map(|w| ((w[2] - w[0]) / (2.0 * h)).abs()).fold(0.0f64, f64::max);
        1.1 * raw
    }
}

fn validate_table(s: &[f64], f: &[f64]) -> Result<()> {
    if s.len() < 2 || s.len() != f.len() {
        return invalid("table needs at least two (s, f) rows of equal length");
    }
    if s.iter().chain(f).any(|v| !v.is_finite()) {
        return invalid("table contains non-finite values");
    }
    if s[0] != 0.0 {
        return invalid("table must start at s = 0");
    }
    if s.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("table abscissae must be strictly increasing");
    }
    Ok(())
}

/// Parses a two-column CSV with the given header names.
pub fn parse_two_column_csv(text: &str, header: (&str, &str)) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines.next().ok_or_else(|| Error::InvalidInput("empty CSV".into()))?;
    let cols: Vec<&str> = head.split(',').map(str::trim).collect();
    if cols != [header.0, header.1] {
        return invalid(format!("line 1: expected header '{},{}', got '{}'", header.0, header.1, head.trim()));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (lineno, line) in lines {
        let mut parts = line.split(',').map(str::trim);
        let parse = |p: Option<&str>| -> Result<f64> {
            p.and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::InvalidInput(format!("line {}: cannot parse '{}'", lineno + 1, line.trim())))
        };
        xs.push(parse(parts.next())?);
        ys.push(parse(parts.next())?);
        if parts.next().is_some() {
            return invalid(format!("line {}: too many columns", lineno + 1));
        }
    }
    if xs.len() < 2 {
        return invalid("CSV needs at least two data rows");
    }
    Ok((xs, ys))
}

pub fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|&v| v <= x) - 1;
    let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] + t * (ys[k + 1] - ys[k])
}

fn abs_sin_primitive(z: f64) -> f64 {
    if z < 0.0 {
        return -abs_sin_primitive(-z);
    }
    let k = (z / PI).floor();
    let r = z - k * PI;
    // 1 - cos r = 2 sin^2(r/2) keeps relative accuracy for small r.
    2.0 * k + 2.0 * (0.5 * r).sin().powi(2)
}

/// The `2^level` closed intervals of the Cantor pre-fractal, sorted.
pub fn cantor_intervals(level: u32) -> Vec<(f64, f64)> {
    let scale = 3u64.pow(level);
    let denom = scale as f64;
    (0..(1u64 << level))
        .map(|bits| {
            // Ternary digits are 0 or 2, selected by the binary digits of `bits`.
            let mut k = 0u64;
            for d in (0..level).rev() {
                k = 3 * k + 2 * ((bits >> d) & 1);
            }
            (k as f64 / denom, (k + 1) as f64 / denom)
        })
        .collect()
}

fn cantor_distance(iv: &[(f64, f64)], s: f64) -> f64 {
    if s <= 0.0 {
        return -s;
    }
    if s >= 1.0 {
        return s - 1.0;
    }
    let k = iv.partition_point(|&(a, _)| a <= s);
    // iv[k-1].0 <= s < iv[k].0
    let b = iv[k - 1].1;
    if s <= b {
        return 0.0;
    }
    let next = iv.get(k).map_or(f64::INFINITY, |p| p.0);
    (s - b).min(next - s)
}

fn cantor_primitive(iv: &[(f64, f64)], z: f64) -> f64 {
    if z <= 0.0 {
        return -z * z / 2.0;
    }
    let mut total = 0.0;
    for w in iv.windows(2) {
        let (b, a_next) = (w[0].1, w[1].0);
        let gap = a_next - b;
        if z >= a_next {
            total += gap * gap / 4.0;
        } else if z > b {
            let t = z - b;
            total += if t <= gap / 2.0 { t * t / 2.0 } else { gap * gap / 4.0 - (gap - t) * (gap - t) / 2.0 };
            return total;
        } else {
            return total;
        }
    }
    if z > 1.0 {
        total += (z - 1.0) * (z - 1.0) / 2.0;
    }
    total
}
