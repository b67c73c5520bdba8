//! Discrete sliding of a radial subsolution under a computed field.

use super::bubble::RadialBubble;
use super::grid::Field;
use crate::error::{invalid, Result};
use serde::Serialize;

/// Steps per unit length when the caller does not choose.
pub const STEPS_PER_UNIT: f64 = 64.0;

#[derive(Debug, Clone, Serialize)]
pub struct SlideReport {
    pub from: [f64; 2],
    pub to: [f64; 2],
    pub steps: usize,
    /// `min (u - v(· - y_t))` over ball nodes, for each placement `t = k / steps`.
    pub margins: Vec<f64>,
    pub min_margin: f64,
    /// First `t` at which the ordering failed; the slide stops there.
    pub failed_at: Option<f64>,
    /// Lower bound for `u(y_t)` implied by the nodal ordering, minimized over the path.
    pub implied_lower_bound: f64,
    pub v0: f64,
}

impl SlideReport {
    pub fn holds(&self) -> bool {
        self.failed_at.is_none() && self.min_margin > 0.0
    }
}

pub fn default_steps(from: [f64; 2], to: [f64; 2]) -> usize {
    let len = ((to[0] - from[0]).powi(2) + (to[1] - from[1]).powi(2)).sqrt();
    ((STEPS_PER_UNIT * len).ceil() as usize).max(1)
}

/// Translates the bubble along the segment `from -> to` and checks `u >= v`
/// at every node of each ball placement.
pub fn sliding_verify(u: &Field, b: &RadialBubble, from: [f64; 2], to: [f64; 2], steps: usize) -> Result<SlideReport> {
    let g = &u.grid;
    let rp = b.r_prime;
    for y in [from, to] {
        if y[0] - rp < 0.0 || y[0] + rp > g.l1 || y[1] - rp < 0.0 || y[1] + rp > g.l2 {
            return invalid(format!("ball of radius {rp:.4} at ({}, {}) leaves the domain", y[0], y[1]));
        }
    }
    if steps == 0 {
        return invalid("steps must be positive");
    }
    let mut margins = Vec::with_capacity(steps + 1);
    let mut failed_at = None;
    let mut implied = f64::INFINITY;
    for k in 0..=steps {
        let t = k as f64 / steps as f64;
        let y = [from[0] + t * (to[0] - from[0]), from[1] + t * (to[1] - from[1])];
        let i_lo = ((y[0] - rp) / g.h).floor().max(0.0) as usize;
        let i_hi = (((y[0] + rp) / g.h).ceil() as usize).min(g.n1);
        let j_lo = ((y[1] - rp) / g.h).floor().max(0.0) as usize;
        let j_hi = (((y[1] + rp) / g.h).ceil() as usize).min(g.n2);
        let mut margin = f64::INFINITY;
        for i in i_lo..=i_hi {
            for j in j_lo..=j_hi {
                let rho = (g.x1(i) - y[0]).hypot(g.x2(j) - y[1]);
                if rho <= rp {
                    margin = margin.min(u.at(i, j) - b.sample(rho));
                }
            }
        }
        margins.push(margin);
        // Bilinear weights of y_t: u(y_t) >= Σ w v(|x_k - y_t|) + margin.
        let s = y[0] / g.h;
        let r = y[1] / g.h;
        let (i0, j0) = ((s.floor() as usize).min(g.n1 - 1), (r.floor() as usize).min(g.n2 - 1));
        let (a, c) = (s - i0 as f64, r - j0 as f64);
        let corner = |i: usize, j: usize| b.sample((g.x1(i) - y[0]).hypot(g.x2(j) - y[1]));
        let v_interp = (1.0 - a) * ((1.0 - c) * corner(i0, j0) + c * corner(i0, j0 + 1))
            + a * ((1.0 - c) * corner(i0 + 1, j0) + c * corner(i0 + 1, j0 + 1));
        implied = implied.min(v_interp + margin);
        if margin <= 0.0 {
            failed_at = Some(t);
            break;
        }
    }
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SlideReport { from, to, steps, margins, min_margin, failed_at, implied_lower_bound: implied, v0: b.v0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::bubble::radial_bubble;
    use crate::elliptic::grid::{BoundarySpec, Grid2D};
    use crate::nonlinearity::Nonlinearity;

    fn setup(c: f64) -> (Field, RadialBubble) {
        let g = Grid2D::new(30.0, 20.0, 0.25).unwrap();
        let bc = BoundarySpec::half(&g, vec![c; g.n2 + 1]).unwrap();
        let u = Field::new(g, bc, vec![c; g.nodes()]).unwrap();
        let b = radial_bubble(&Nonlinearity::logistic(), 1.0, 0.1, 2).unwrap();
        (u, b)
    }

    #[test]
    fn constant_above_bubble_keeps_margin() {
        let (u, b) = setup(1.0);
        let rep = sliding_verify(&u, &b, [10.0, 10.0], [20.0, 10.0], default_steps([10.0, 10.0], [20.0, 10.0])).unwrap();
        assert!(rep.holds());
        assert!((rep.min_margin - (1.0 - b.v0)).abs() < 1e-3);
        assert!(rep.implied_lower_bound >= b.v0 - 1e-2);
    }

    #[test]
    fn zero_field_fails_immediately() {
        let (u, b) = setup(0.0);
        let rep = sliding_verify(&u, &b, [10.0, 10.0], [20.0, 10.0], 10).unwrap();
        assert_eq!(rep.failed_at, Some(0.0));
        assert_eq!(rep.margins.len(), 1);
    }

    #[test]
    fn ball_must_fit() {
        let (u, b) = setup(1.0);
        assert!(sliding_verify(&u, &b, [1.0, 10.0], [20.0, 10.0], 10).is_err());
    }
}
