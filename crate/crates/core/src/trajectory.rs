//! Translation semiflow on computed fields: shifts in `x1`, limit levels,
//! identification of the limit along `x1 -> ∞` and attractor tables.

use crate::elliptic::{AxisBc, BoundarySpec, EndBc, Field, Grid2D};
use crate::error::{invalid, Error, Result};
use crate::nonlinearity::{compute_zf, zero_set, Nonlinearity, TOL_BIG_F, TOL_F};
use crate::profile1d::{compute_profile, Profile1D};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Scan resolution for zero sets used by attractor tables.
pub const ZERO_GRID: usize = 100_000;

/// `x ↦ u(x1 + h, x2)` restricted to `[0, L1 - h] × [0, L2]`. `h` must be a
/// multiple of the grid spacing. The new left trace is the old row at `h`.
pub fn shift(u: &Field, h: f64) -> Result<Field> {
    let g = &u.grid;
    if !(h >= 0.0) {
        return invalid(format!("shift must be nonnegative, got {h}"));
    }
    let k = (h / g.h).round() as usize;
    if ((k as f64) * g.h - h).abs() > 1e-9 * g.h {
        return invalid(format!("shift {h} is not a multiple of h = {}", g.h));
    }
    if k >= g.n1 {
        return Err(Error::EmptyDomain(format!("shift {h} leaves nothing of [0, {}]", g.l1)));
    }
    if k == 0 {
        return Ok(Field { certificate: None, ..u.clone() });
    }
    let n1 = g.n1 - k;
    let grid = Grid2D { l1: n1 as f64 * g.h, l2: g.l2, h: g.h, n1, n2: g.n2 };
    let values = u.values[k * g.row_len()..].to_vec();
    let x1 = match &u.boundary.x1 {
        AxisBc::Bounded { hi, .. } => AxisBc::Bounded { lo: EndBc::Dirichlet(u.row(k).to_vec()), hi: hi.clone() },
        AxisBc::Periodic => AxisBc::Bounded { lo: EndBc::Dirichlet(u.row(k).to_vec()), hi: EndBc::Neumann },
    };
    let x2 = match &u.boundary.x2 {
        AxisBc::Periodic => AxisBc::Periodic,
        AxisBc::Bounded { lo, hi } => {
            let cut = |e: &EndBc| match e {
                EndBc::Neumann => EndBc::Neumann,
                EndBc::Dirichlet(v) => EndBc::Dirichlet(v[k..].to_vec()),
            };
            AxisBc::Bounded { lo: cut(lo), hi: cut(hi) }
        }
    };
    Ok(Field { grid, values, boundary: BoundarySpec { x1, x2 }, certificate: None })
}

/// Rectangle `[x1.0, x1.1] × [x2.0, x2.1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x1: (f64, f64),
    pub x2: (f64, f64),
}

impl Window {
    pub fn whole(g: &Grid2D) -> Self {
        Self { x1: (0.0, g.l1), x2: (0.0, g.l2) }
    }

    /// Inclusive node ranges covered by the window.
    fn ranges(&self, g: &Grid2D) -> Result<((usize, usize), (usize, usize))> {
        let eps = 1e-9 * g.h;
        let lo1 = ((self.x1.0 - eps) / g.h).ceil().max(0.0) as usize;
        let hi1 = (((self.x1.1 + eps) / g.h).floor() as usize).min(g.n1);
        let lo2 = ((self.x2.0 - eps) / g.h).ceil().max(0.0) as usize;
        let hi2 = (((self.x2.1 + eps) / g.h).floor() as usize).min(g.n2);
        if lo1 > hi1 || lo2 > hi2 {
            return invalid(format!("window {self:?} contains no nodes"));
        }
        Ok(((lo1, hi1), (lo2, hi2)))
    }
}

/// `(min, max)` of `u` over the nodes of `w`.
pub fn window_extrema(u: &Field, w: &Window) -> Result<(f64, f64)> {
    let ((a, b), (c, d)) = w.ranges(&u.grid)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in a..=b {
        for &v in &u.row(i)[c..=d] {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    Ok((lo, hi))
}

/// Discrete `C^0` (`order = 0`) or `C^2` (`order = 2`) norm over a window:
/// `sup|u|`, plus the sups of first and second central differences.
pub fn window_norm(u: &Field, w: &Window, order: u8) -> Result<f64> {
    let g = &u.grid;
    let ((a, b), (c, d)) = w.ranges(g)?;
    let mut sup = 0.0f64;
    for i in a..=b {
        for j in c..=d {
            sup = sup.max(u.at(i, j).abs());
        }
    }
    match order {
        0 => Ok(sup),
        2 => {
            let (h, h2) = (g.h, g.h * g.h);
            let mut d1 = 0.0f64;
            let mut d2 = 0.0f64;
            for i in a.max(1)..=b.min(g.n1 - 1) {
                for j in c.max(1)..=d.min(g.n2 - 1) {
                    let ux = (u.at(i + 1, j) - u.at(i - 1, j)) / (2.0 * h);
                    let uy = (u.at(i, j + 1) - u.at(i, j - 1)) / (2.0 * h);
                    let uxx = (u.at(i + 1, j) - 2.0 * u.at(i, j) + u.at(i - 1, j)) / h2;
                    let uyy = (u.at(i, j + 1) - 2.0 * u.at(i, j) + u.at(i, j - 1)) / h2;
                    let uxy = (u.at(i + 1, j + 1) - u.at(i + 1, j - 1) - u.at(i - 1, j + 1) + u.at(i - 1, j - 1)) / (4.0 * h2);
                    d1 = d1.max(ux.abs()).max(uy.abs());
                    d2 = d2.max(uxx.abs()).max(uyy.abs()).max(uxy.abs());
                }
            }
            Ok(sup + d1 + d2)
        }
        _ => invalid(format!("window norm order must be 0 or 2, got {order}")),
    }
}

/// Trailing-window extrema: `M` and `m` over `x1 >= frac · L1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLevels {
    pub fracs: Vec<f64>,
    pub sups: Vec<f64>,
    pub infs: Vec<f64>,
    #[serde(rename = "M")]
    pub m_sup: f64,
    #[serde(rename = "m")]
    pub m_inf: f64,
    /// `|ΔM|` between successive windows.
    pub cauchy: Vec<f64>,
}

pub const DEFAULT_WINDOW_FRACS: [f64; 4] = [0.5, 0.6, 0.7, 0.8];

pub fn estimate_m(u: &Field, fracs: &[f64]) -> Result<LimitLevels> {
    if fracs.is_empty() || fracs.iter().any(|f| !(*f > 0.0 && *f < 1.0)) || fracs.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("window fractions must be increasing within (0, 1)");
    }
    let g = &u.grid;
    let mut sups = Vec::with_capacity(fracs.len());
    let mut infs = Vec::with_capacity(fracs.len());
    for &f in fracs {
        let (lo, hi) = window_extrema(u, &Window { x1: (f * g.l1, g.l1), x2: (0.0, g.l2) })?;
        infs.push(lo);
        sups.push(hi);
    }
    let cauchy = sups.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    Ok(LimitLevels { fracs: fracs.to_vec(), m_sup: *sups.last().unwrap(), m_inf: *infs.last().unwrap(), sups, infs, cauchy })
}

/// A candidate limit: a profile `V_z(x2)` or the constant `z`.
#[derive(Debug, Clone)]
pub enum Candidate {
    Profile(Profile1D),
    Constant(f64),
}

impl Candidate {
    pub fn z(&self) -> f64 {
        match self {
            Candidate::Profile(p) => p.z,
            Candidate::Constant(c) => *c,
        }
    }

    pub fn at(&self, x2: f64) -> f64 {
        match self {
            Candidate::Profile(p) => p.sample(x2),
            Candidate::Constant(c) => *c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OmegaOptions {
    pub shifts: usize,
    /// Largest shift as a fraction of `L1`.
    pub max_shift_frac: f64,
    /// Cross-sections are compared on `x2 ∈ [0, x2_window · L2]`.
    pub x2_window: f64,
    pub conv_tol: f64,
    /// Required ratio of second-best to best final distance.
    pub margin: f64,
}

impl Default for OmegaOptions {
    fn default() -> Self {
        Self { shifts: 16, max_shift_frac: 0.8, x2_window: 0.75, conv_tol: 5e-2, margin: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    pub h: f64,
    pub z: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub detected_z: Option<f64>,
    pub converged: bool,
    #[serde(rename = "M")]
    pub m_estimate: f64,
    #[serde(rename = "m")]
    pub m_inf_estimate: f64,
    /// Slope of `ln d(h, z)` against `h` for the detected (or closest) candidate.
    pub tail_slope: f64,
    pub h_grid: Vec<f64>,
    pub candidates: Vec<f64>,
    pub distances: Vec<Distance>,
    /// Final distance of the best candidate.
    pub final_distance: f64,
    /// Second-best over best final distance (infinite with a single candidate).
    pub margin_ratio: f64,
    /// The two closest candidates when the margin test failed.
    #[serde(default)]
    pub ambiguous: Vec<f64>,
}

impl TrajectoryReport {
    /// `(h, d)` pairs for candidate `z`, in `h` order.
    pub fn series(&self, z: f64) -> Vec<(f64, f64)> {
        self.distances.iter().filter(|d| d.z == z).map(|d| (d.h, d.d)).collect()
    }
}

/// Up to `count` log-spaced shifts in `[h, max]`, snapped to the grid.
pub fn shift_grid(g: &Grid2D, count: usize, max_frac: f64) -> Vec<usize> {
    let top = ((max_frac * g.l1 / g.h).floor() as usize).clamp(1, g.n1 - 1);
    let mut ks: Vec<usize> = (0..count)
        .map(|k| {
            let t = if count > 1 { k as f64 / (count - 1) as f64 } else { 1.0 };
            ((top as f64).powf(t).round() as usize).clamp(1, top)
        })
        .collect();
    ks.dedup();
    ks
}

/// Measures `d(h, z) = max_{x2} |u(h, x2) - candidate_z(x2)|` along a shift
/// grid and identifies the limit of the cross-sections.
pub fn omega_limit(u: &Field, candidates: &[Candidate], opts: &OmegaOptions) -> Result<TrajectoryReport> {
    if candidates.is_empty() {
        return invalid("omega_limit needs at least one candidate");
    }
    let g = &u.grid;
    let ks = shift_grid(g, opts.shifts, opts.max_shift_frac);
    let j_max = ((opts.x2_window * g.l2 / g.h + 1e-9).floor() as usize).min(g.n2);
    let table: Vec<Vec<f64>> = candidates
        .par_iter()
        .map(|c| {
            let target: Vec<f64> = (0..=j_max).map(|j| c.at(g.x2(j))).collect();
            ks.iter().map(|&k| u.row(k)[..=j_max].iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)).collect()
        })
        .collect();
    let h_grid: Vec<f64> = ks.iter().map(|&k| g.x1(k)).collect();
    let mut distances = Vec::with_capacity(ks.len() * candidates.len());
    for (c, row) in candidates.iter().zip(&table) {
        for (h, d) in h_grid.iter().zip(row) {
            distances.push(Distance { h: *h, z: c.z(), d: *d });
        }
    }

    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| table[a].last().unwrap().total_cmp(table[b].last().unwrap()).then(a.cmp(&b)));
    let best = order[0];
    let final_distance = *table[best].last().unwrap();
    let margin_ratio = match order.get(1) {
        Some(&second) => table[second].last().unwrap() / final_distance,
        None => f64::INFINITY,
    };
    let close = final_distance < opts.conv_tol;
    let unique = margin_ratio >= opts.margin;
    let converged = close && unique;
    let ambiguous = if close && !unique { order[..2].iter().map(|&i| candidates[i].z()).collect() } else { Vec::new() };

    let levels = estimate_m(u, &DEFAULT_WINDOW_FRACS)?;
    Ok(TrajectoryReport {
        detected_z: converged.then(|| candidates[best].z()),
        converged,
        m_estimate: levels.m_sup,
        m_inf_estimate: levels.m_inf,
        tail_slope: log_slope(&h_grid, &table[best]),
        h_grid,
        candidates: candidates.iter().map(Candidate::z).collect(),
        distances,
        final_distance,
        margin_ratio,
        ambiguous,
    })
}

/// Least-squares slope of `ln d` against `h` over the positive distances.
fn log_slope(h: &[f64], d: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = h.iter().zip(d).filter(|(_, d)| **d > 0.0).map(|(h, d)| (*h, d.ln())).collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Quarter,
    Half,
}

#[derive(Debug, Clone, Serialize)]
pub struct AttractorElement {
    pub z: f64,
    /// `V_z'(0)` for profile elements; absent for constants.
    pub slope0: Option<f64>,
    #[serde(skip)]
    pub profile: Option<Profile1D>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AttractorEstimate {
    pub kind: ProblemKind,
    pub m_cap: f64,
    pub elements: Vec<AttractorElement>,
}

impl AttractorEstimate {
    pub fn candidates(&self) -> Vec<Candidate> {
        self.elements
            .iter()
            .map(|e| match &e.profile {
                Some(p) => Candidate::Profile(p.clone()),
                None => Candidate::Constant(e.z),
            })
            .collect()
    }

    /// Whether `z ↦ V_z'(0)` is injective (strictly increasing in `z`) on
    /// the profile elements.
    pub fn slopes_injective(&self) -> bool {
        let s: Vec<f64> = self.elements.iter().filter_map(|e| e.slope0).collect();
        s.windows(2).all(|w| w[1] > w[0])
    }
}

/// Discretization of the profiles materialized by [`attractor_table`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileGrid {
    pub xi_max: f64,
    pub n: usize,
}

impl Default for ProfileGrid {
    fn default() -> Self {
        Self { xi_max: 40.0, n: 4000 }
    }
}

/// Possible limits below `m_cap`: profiles `V_z`, `z ∈ Z_f`, for the quarter
/// problem (0 only when `f(0) = 0`); constants `z ∈ E` for the half problem.
pub fn attractor_table(nl: &Nonlinearity, m_cap: f64, kind: ProblemKind, grid: &ProfileGrid) -> Result<AttractorEstimate> {
    if !(m_cap >= 0.0) {
        return invalid("M cap must be nonnegative");
    }
    let scope = if m_cap > nl.s_max { nl.with_s_max(m_cap)? } else { nl.clone() };
    let elements = match kind {
        ProblemKind::Half => zero_set(&scope, TOL_F, ZERO_GRID)?
            .representatives()
            .into_iter()
            .filter(|&z| z <= m_cap)
            .map(|z| AttractorElement { z, slope0: None, profile: None })
            .collect(),
        ProblemKind::Quarter => {
            let zs: Vec<f64> = compute_zf(&scope, TOL_F, TOL_BIG_F, ZERO_GRID)?.points.into_iter().filter(|&z| z <= m_cap).collect();
            zs.par_iter()
                .map(|&z| {
                    let p = compute_profile(&scope, z, grid.xi_max, grid.n)?;
                    Ok(AttractorElement { z, slope0: Some(p.slope0), profile: Some(p) })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(AttractorEstimate { kind, m_cap, elements })
}
