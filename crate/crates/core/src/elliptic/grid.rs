use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Uniform rectangular grid on `[0, l1] × [0, l2]` with `(n1+1) × (n2+1)`
/// nodes. Node `(i, j)` sits at `(i h, j h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub l1: f64,
    pub l2: f64,
    pub h: f64,
    pub n1: usize,
    pub n2: usize,
}

impl Grid2D {
    pub fn new(l1: f64, l2: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite() && l1 > 0.0 && l2 > 0.0 && l1.is_finite() && l2.is_finite()) {
            return invalid(format!("grid needs positive finite extents and spacing, got {l1} x {l2}, h = {h}"));
        }
        let n1 = (l1 / h).round() as usize;
        let n2 = (l2 / h).round() as usize;
        for (l, n) in [(l1, n1), (l2, n2)] {
            if n < 2 || (n as f64 * h - l).abs() > 1e-12 * l.max(1.0) {
                return invalid(format!("extent {l} is not a multiple (>= 2) of h = {h}"));
            }
        }
        Ok(Self { l1, l2, h, n1, n2 })
    }

    pub fn nodes(&self) -> usize {
        (self.n1 + 1) * (self.n2 + 1)
    }

    pub fn row_len(&self) -> usize {
        self.n2 + 1
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * (self.n2 + 1) + j
    }

    pub fn x1(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn x2(&self, j: usize) -> f64 {
        j as f64 * self.h
    }
}

/// Condition at one end of a bounded axis. Dirichlet values run along the
/// other axis (one per node).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndBc {
    Neumann,
    Dirichlet(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisBc {
    /// Node `n` duplicates node `0`.
    Periodic,
    Bounded {
        lo: EndBc,
        hi: EndBc,
    },
}

/// Boundary conditions on both axes. Where Dirichlet ends of the two axes
/// meet, the `x2` condition wins (the bottom wall owns the corner).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub x1: AxisBc,
    pub x2: AxisBc,
}

impl BoundarySpec {
    /// Quarter-plane truncation: trace `u0(x2)` at `x1 = 0`, `u = 0` at
    /// `x2 = 0`, Neumann-0 at the far sides.
    pub fn quarter(grid: &Grid2D, trace: Vec<f64>) -> Result<Self> {
        check_trace(&trace, grid.n2 + 1)?;
        Ok(Self {
            x1: AxisBc::Bounded { lo: EndBc::Dirichlet(trace), hi: EndBc::Neumann },
            x2: AxisBc::Bounded { lo: EndBc::Dirichlet(vec![0.0; grid.n1 + 1]), hi: EndBc::Neumann },
        })
    }

    /// Half-plane truncation: trace at `x1 = 0`, Neumann-0 at `x1 = L1`,
    /// periodic in `x2`. The trace's last entry must repeat its first.
    pub fn half(grid: &Grid2D, trace: Vec<f64>) -> Result<Self> {
        check_trace(&trace, grid.n2 + 1)?;
        if trace[0] != trace[grid.n2] {
            return invalid("periodic trace must satisfy u0(0) = u0(L2)");
        }
        Ok(Self { x1: AxisBc::Bounded { lo: EndBc::Dirichlet(trace), hi: EndBc::Neumann }, x2: AxisBc::Periodic })
    }

    pub fn periodic_box() -> Self {
        Self { x1: AxisBc::Periodic, x2: AxisBc::Periodic }
    }

    /// Periodic in `x1`, `u = 0` at `x2 = 0`, Neumann-0 at `x2 = L2`.
    pub fn dirichlet_strip(grid: &Grid2D) -> Self {
        Self { x1: AxisBc::Periodic, x2: AxisBc::Bounded { lo: EndBc::Dirichlet(vec![0.0; grid.n1 + 1]), hi: EndBc::Neumann } }
    }

    pub fn validate(&self, grid: &Grid2D) -> Result<()> {
        for (axis, other_len) in [(&self.x1, grid.n2 + 1), (&self.x2, grid.n1 + 1)] {
            if let AxisBc::Bounded { lo, hi } = axis {
                for end in [lo, hi] {
                    if let EndBc::Dirichlet(v) = end {
                        check_trace(v, other_len)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Left trace (`x1 = 0` Dirichlet values), if any.
    pub fn left_trace(&self) -> Option<&[f64]> {
        match &self.x1 {
            AxisBc::Bounded { lo: EndBc::Dirichlet(v), .. } => Some(v),
            _ => None,
        }
    }

    /// Short human-readable description, e.g. for run summaries.
    pub fn describe(&self) -> String {
        fn axis(a: &AxisBc) -> String {
            match a {
                AxisBc::Periodic => "periodic".into(),
                AxisBc::Bounded { lo, hi } => format!("{}/{}", end(lo), end(hi)),
            }
        }
        fn end(e: &EndBc) -> &'static str {
            match e {
                EndBc::Neumann => "neumann",
                EndBc::Dirichlet(v) if v.iter().all(|&x| x == 0.0) => "dirichlet-0",
                EndBc::Dirichlet(_) => "dirichlet",
            }
        }
        format!("x1: {}, x2: {}", axis(&self.x1), axis(&self.x2))
    }
}

fn check_trace(v: &[f64], len: usize) -> Result<()> {
    if v.len() != len {
        return invalid(format!("boundary trace has {} values, grid needs {len}", v.len()));
    }
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return invalid("boundary traces must be finite and nonnegative");
    }
    Ok(())
}

/// How a field was produced and how well it solves the discrete problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `max |Δ_h u + f(u)|` over the unknown nodes.
    pub residual: f64,
    pub iterations: usize,
    pub method: String,
    /// Residual after each iteration, starting with the initial guess.
    pub history: Vec<f64>,
    pub min_value: f64,
    /// `min_value < -tol`: the discrete maximum principle was violated.
    pub undershoot: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotone: Option<MonotoneTrace>,
}

/// Order diagnostics of a monotone iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneTrace {
    pub iterations: usize,
    /// Smallest nodewise increment `u_{k+1} - u_k` seen (should be >= 0).
    pub min_increment: f64,
    /// Largest excess `u_k - sup` seen (should be <= 0).
    pub max_above_sup: f64,
}

/// Node values of `u` on a grid with its boundary conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid2D,
    pub values: Vec<f64>,
    pub boundary: BoundarySpec,
    pub certificate: Option<Certificate>,
}

impl Field {
    pub fn new(grid: Grid2D, boundary: BoundarySpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nodes() {
            return invalid(format!("field has {} values, grid has {} nodes", values.len(), grid.nodes()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("field values must be finite".into()));
        }
        boundary.validate(&grid)?;
        Ok(Self { grid, values, boundary, certificate: None })
    }

    /// Samples `u(x1, x2)` at the nodes.
    pub fn from_fn(grid: Grid2D, boundary: BoundarySpec, u: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.nodes());
        for i in 0..=grid.n1 {
            for j in 0..=grid.n2 {
                values.push(u(grid.x1(i), grid.x2(j)));
            }
        }
        Self::new(grid, boundary, values)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// The cross-section `x1 = i h`.
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.grid.row_len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Bilinear interpolation at `(x1, x2)`, clamped to the domain.
    pub fn interpolate(&self, x1: f64, x2: f64) -> f64 {
        let g = &self.grid;
        let s = (x1 / g.h).clamp(0.0, g.n1 as f64);
        let t = (x2 / g.h).clamp(0.0, g.n2 as f64);
        let i = (s.floor() as usize).min(g.n1 - 1);
        let j = (t.floor() as usize).min(g.n2 - 1);
        let (a, b) = (s - i as f64, t - j as f64);
        (1.0 - a) * ((1.0 - b) * self.at(i, j) + b * self.at(i, j + 1)) + a * ((1.0 - b) * self.at(i + 1, j) + b * self.at(i + 1, j + 1))
    }

    /// CSV with header `x1,x2,u`, row-major (`x2` fastest).
    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut out = String::with_capacity(g.nodes() * 64);
        out.push_str("x1,x2,u\n");
        for i in 0..=g.n1 {
            for j in 0..=g.n2 {
                let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", g.x1(i), g.x2(j), self.at(i, j));
            }
        }
        out
    }

    /// Parses the output of [`Field::to_csv`] back onto `grid`.
    pub fn values_from_csv(grid: &Grid2D, text: &str) -> Result<Vec<f64>> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "x1,x2,u" => {}
            _ => return invalid("line 1: expected header 'x1,x2,u'"),
        }
        let mut values = Vec::with_capacity(grid.nodes());
        for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let u = line
                .rsplit(',')
                .next()
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::InvalidInput(format!("line {}: cannot parse '{line}'", k + 2)))?;
            values.push(u);
        }
        if values.len() != grid.nodes() {
            return invalid(format!("CSV has {} rows, grid has {} nodes", values.len(), grid.nodes()));
        }
        Ok(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        let g = Grid2D::new(60.0, 30.0, 0.25).unwrap();
        assert_eq!((g.n1, g.n2), (240, 120));
        assert!(Grid2D::new(1.0, 1.0, 0.3).is_err());
        assert!(Grid2D::new(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid2D::new(2.0, 1.0, 0.5).unwrap();
        let bc = BoundarySpec::quarter(&g, vec![0.0, 1.0, 2.0]).unwrap();
        let f = Field::from_fn(g, bc, |x, y| x * 10.0 + y).unwrap();
        let back = Field::values_from_csv(&g, &f.to_csv()).unwrap();
        assert_eq!(back, f.values);
    }

    #[test]
    fn bilinear_reproduces_affine() {
        let g = Grid2D::new(2.0, 1.0, 0.5).unwrap();
        let f = Field::from_fn(g, BoundarySpec::periodic_box(), |x, y| 2.0 * x - y + 1.0).unwrap();
        assert!((f.interpolate(0.7, 0.3) - (1.4 - 0.3 + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn rejects_negative_trace() {
        let g = Grid2D::new(2.0, 1.0, 0.5).unwrap();
        assert!(BoundarySpec::quarter(&g, vec![0.0, -1.0, 0.0]).is_err());
        assert!(BoundarySpec::half(&g, vec![1.0, 0.0, 0.0]).is_err());
    }
}
