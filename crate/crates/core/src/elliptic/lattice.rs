//! The discrete operator: 5-point Laplacian with Dirichlet, mirrored-ghost
//! Neumann and wrapped periodic ends, plus unknown ordering for band solves.

use super::banded::BandMatrix;
use super::grid::{AxisBc, BoundarySpec, EndBc, Grid2D};
use crate::nonlinearity::Nonlinearity;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy)]
struct Axis {
    /// Number of intervals.
    n: usize,
    periodic: bool,
}

impl Axis {
    fn active(&self) -> usize {
        if self.periodic {
            self.n
        } else {
            self.n + 1
        }
    }

    /// Lower and upper neighbor of node `k`. Neumann ends mirror; nodes on
    /// Dirichlet ends never ask.
    #[inline]
    fn neighbors(&self, k: usize) -> (usize, usize) {
        if self.periodic {
            let lo = if k == 0 { self.n - 1 } else { k - 1 };
            let hi = if k + 1 == self.n { 0 } else { k + 1 };
            (lo, hi)
        } else {
            let lo = if k == 0 { 1 } else { k - 1 };
            let hi = if k == self.n { self.n - 1 } else { k + 1 };
            (lo, hi)
        }
    }

    /// Position along the slow axis. Periodic axes are folded
    /// (0, n-1, 1, n-2, ...) so the wrap-around coupling stays near the diagonal.
    fn slow_position(&self, k: usize) -> usize {
        if !self.periodic {
            return k;
        }
        let half = (self.n - 1) / 2;
        if k <= half {
            2 * k
        } else {
            2 * (self.n - 1 - k) + 1
        }
    }
}

/// Node classification and indexing for one grid and boundary specification.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub grid: Grid2D,
    a1: Axis,
    a2: Axis,
    /// Dirichlet value for fixed nodes, `None` for unknowns and duplicates.
    fixed: Vec<Option<f64>>,
    /// Active nodes are unknowns or fixed; periodic duplicates are not.
    active: Vec<bool>,
    /// Band-solve index of each active node.
    dof: Vec<usize>,
    n_dof: usize,
    fast_is_x2: bool,
    inv_h2: f64,
}

impl Lattice {
    pub fn new(grid: &Grid2D, bc: &BoundarySpec) -> Self {
        let a1 = Axis { n: grid.n1, periodic: bc.x1 == AxisBc::Periodic };
        let a2 = Axis { n: grid.n2, periodic: bc.x2 == AxisBc::Periodic };
        let nodes = grid.nodes();
        let mut fixed = vec![None; nodes];
        let mut active = vec![true; nodes];
        for i in 0..=grid.n1 {
            for j in 0..=grid.n2 {
                if (a1.periodic && i == grid.n1) || (a2.periodic && j == grid.n2) {
                    active[grid.index(i, j)] = false;
                }
            }
        }
        if let AxisBc::Bounded { lo, hi } = &bc.x1 {
            for (end, i) in [(lo, 0), (hi, grid.n1)] {
                if let EndBc::Dirichlet(v) = end {
                    for j in 0..=grid.n2 {
                        fixed[grid.index(i, j)] = Some(v[j]);
                    }
                }
            }
        }
        // Applied second: the x2 walls own the corners.
        if let AxisBc::Bounded { lo, hi } = &bc.x2 {
            for (end, j) in [(lo, 0), (hi, grid.n2)] {
                if let EndBc::Dirichlet(v) = end {
                    for i in 0..=grid.n1 {
                        fixed[grid.index(i, j)] = Some(v[i]);
                    }
                }
            }
        }
        for (f, a) in fixed.iter_mut().zip(&active) {
            if !a {
                *f = None;
            }
        }

        // The periodic axis is the fast one (wrap coupling stays within one
        // block); otherwise the shorter axis.
        let fast_is_x2 = match (a1.periodic, a2.periodic) {
            (false, true) => true,
            (true, false) => false,
            _ => a2.active() <= a1.active(),
        };
        let (fast, slow) = if fast_is_x2 { (a2, a1) } else { (a1, a2) };
        let mut dof = vec![usize::MAX; nodes];
        for i in 0..=grid.n1 {
            for j in 0..=grid.n2 {
                let p = grid.index(i, j);
                if active[p] {
                    let (kf, ks) = if fast_is_x2 { (j, i) } else { (i, j) };
                    dof[p] = slow.slow_position(ks) * fast.active() + kf;
                }
            }
        }
        let n_dof = fast.active() * slow.active();
        Self { grid: *grid, a1, a2, fixed, active, dof, n_dof, fast_is_x2, inv_h2: 1.0 / (grid.h * grid.h) }
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    pub fn is_unknown(&self, p: usize) -> bool {
        self.active[p] && self.fixed[p].is_none()
    }

    /// Imposes Dirichlet values and copies periodic duplicates.
    pub fn apply_bc(&self, u: &mut [f64]) {
        for (v, f) in u.iter_mut().zip(&self.fixed) {
            if let Some(x) = f {
                *v = *x;
            }
        }
        self.sync_duplicates(u);
    }

    fn sync_duplicates(&self, u: &mut [f64]) {
        let g = &self.grid;
        if self.a2.periodic {
            for i in 0..=g.n1 {
                u[g.index(i, g.n2)] = u[g.index(i, 0)];
            }
        }
        if self.a1.periodic {
            for j in 0..=g.n2 {
                u[g.index(g.n1, j)] = u[g.index(0, j)];
            }
        }
    }

    #[inline]
    fn laplacian_at(&self, u: &[f64], i: usize, j: usize) -> f64 {
        let g = &self.grid;
        let c = u[g.index(i, j)];
        let (il, ih) = self.a1.neighbors(i);
        let (jl, jh) = self.a2.neighbors(j);
        (u[g.index(il, j)] + u[g.index(ih, j)] + u[g.index(i, jl)] + u[g.index(i, jh)] - 4.0 * c) * self.inv_h2
    }

    /// Writes `Δ_h u + f(u)` at unknown nodes (zero elsewhere) and returns
    /// `(max |R|, Σ R²)`. Rows are processed in parallel; partial sums are
    /// combined in row order so the result does not depend on the thread count.
    pub fn residual(&self, u: &[f64], nl: &Nonlinearity, out: &mut [f64]) -> (f64, f64) {
        let w = self.grid.row_len();
        let partials: Vec<(f64, f64)> = out
            .par_chunks_mut(w)
            .enumerate()
            .map(|(i, row)| {
                let (mut m, mut s) = (0.0f64, 0.0f64);
                for (j, r) in row.iter_mut().enumerate() {
                    let p = i * w + j;
                    *r = if self.is_unknown(p) { self.laplacian_at(u, i, j) + nl.value(u[p]) } else { 0.0 };
                    m = m.max(r.abs());
                    s += *r * *r;
                }
                (m, s)
            })
            .collect();
        partials.iter().fold((0.0, 0.0), |(m, s), &(pm, ps)| (m.max(pm), s + ps))
    }

    /// `Δ_h u` at unknown nodes, zero elsewhere.
    pub fn laplacian(&self, u: &[f64], out: &mut [f64]) {
        let w = self.grid.row_len();
        out.par_chunks_mut(w).enumerate().for_each(|(i, row)| {
            for (j, r) in row.iter_mut().enumerate() {
                let p = i * w + j;
                *r = if self.is_unknown(p) { self.laplacian_at(u, i, j) } else { 0.0 };
            }
        });
    }

    fn coupled(&self, i: usize, j: usize) -> [(usize, usize); 4] {
        let (il, ih) = self.a1.neighbors(i);
        let (jl, jh) = self.a2.neighbors(j);
        [(il, j), (ih, j), (i, jl), (i, jh)]
    }

    /// Band matrix of `Δ_h + diag(d)` acting on increments: identity rows for
    /// fixed nodes, couplings to fixed nodes dropped (their increment is 0).
    pub fn assemble(&self, d: impl Fn(usize) -> f64) -> BandMatrix {
        let g = &self.grid;
        let mut band = 0usize;
        for i in 0..=g.n1 {
            for j in 0..=g.n2 {
                let p = g.index(i, j);
                if !self.is_unknown(p) {
                    continue;
                }
                for (a, b) in self.coupled(i, j) {
                    let q = g.index(a, b);
                    if self.is_unknown(q) {
                        band = band.max(self.dof[p].abs_diff(self.dof[q]));
                    }
                }
            }
        }
        let mut m = BandMatrix::zeros(self.n_dof, band, band);
        for i in 0..=g.n1 {
            for j in 0..=g.n2 {
                let p = g.index(i, j);
                if !self.active[p] {
                    continue;
                }
                let r = self.dof[p];
                if self.fixed[p].is_some() {
                    m.add(r, r, 1.0);
                    continue;
                }
                m.add(r, r, -4.0 * self.inv_h2 + d(p));
                for (a, b) in self.coupled(i, j) {
                    let q = g.index(a, b);
                    if self.is_unknown(q) {
                        m.add(r, self.dof[q], self.inv_h2);
                    }
                }
            }
        }
        m
    }

    /// Gathers node values into band-solve order.
    pub fn to_dofs(&self, node_values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dof];
        for (p, &v) in node_values.iter().enumerate() {
            if self.active[p] {
                out[self.dof[p]] = v;
            }
        }
        out
    }

    /// Scatters band-solve values back to nodes (duplicates left untouched).
    pub fn from_dofs(&self, dofs: &[f64], node_values: &mut [f64]) {
        for (p, v) in node_values.iter_mut().enumerate() {
            if self.active[p] {
                *v = dofs[self.dof[p]];
            }
        }
    }

    pub fn fast_axis_is_x2(&self) -> bool {
        self.fast_is_x2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::grid::Field;

    #[test]
    fn laplacian_of_quadratic_is_exact() {
        let g = Grid2D::new(4.0, 2.0, 0.25).unwrap();
        let bc = BoundarySpec::quarter(&g, vec![0.0; g.n2 + 1]).unwrap();
        let f = Field::from_fn(g, bc.clone(), |x, y| x * x + 3.0 * y * y).unwrap();
        let lat = Lattice::new(&g, &bc);
        let mut out = vec![0.0; g.nodes()];
        lat.laplacian(&f.values, &mut out);
        // Interior node away from mirrored ends.
        assert!((out[g.index(5, 3)] - 8.0).abs() < 1e-10);
    }

    #[test]
    fn periodic_ordering_has_bounded_bandwidth() {
        let g = Grid2D::new(8.0, 8.0, 0.5).unwrap();
        let lat = Lattice::new(&g, &BoundarySpec::periodic_box());
        let m = lat.assemble(|_| 0.0);
        assert!(m.kl() <= 2 * 16, "kl = {}", m.kl());
    }

    #[test]
    fn assembled_operator_matches_stencil() {
        let g = Grid2D::new(3.0, 2.0, 0.5).unwrap();
        for bc in [
            BoundarySpec::quarter(&g, vec![1.0; g.n2 + 1]).unwrap(),
            BoundarySpec::half(&g, vec![1.0; g.n2 + 1]).unwrap(),
            BoundarySpec::periodic_box(),
            BoundarySpec::dirichlet_strip(&g),
        ] {
            let lat = Lattice::new(&g, &bc);
            let mut u: Vec<f64> = (0..g.nodes()).map(|p| ((p * 37 % 11) as f64).cos()).collect();
            // Increments vanish on fixed nodes.
            for p in 0..g.nodes() {
                if !lat.is_unknown(p) {
                    u[p] = 0.0;
                }
            }
            lat.apply_bc(&mut vec![0.0; g.nodes()]);
            let mut zero_bc = u.clone();
            for (p, v) in zero_bc.iter_mut().enumerate() {
                if lat.fixed[p].is_some() {
                    *v = 0.0;
                }
            }
            lat.sync_duplicates(&mut zero_bc);
            let mut direct = vec![0.0; g.nodes()];
            lat.laplacian(&zero_bc, &mut direct);
            let m = lat.assemble(|_| 0.0);
            let y = m.mul_vec(&lat.to_dofs(&zero_bc));
            for p in 0..g.nodes() {
                if lat.is_unknown(p) {
                    assert!((y[lat.dof[p]] - direct[p]).abs() < 1e-12, "{}", bc.describe());
                }
            }
        }
    }
}
