//! Classical RK4 with step-doubling error control and event location.
//!
//! Each accepted step is the Richardson-extrapolated combination of one full
//! step and two half steps, so the local error of the returned solution is
//! well below the controlled estimate.

use crate::error::{Error, Result};

/// Adaptive RK4 integrator for small fixed-size systems.
#[derive(Debug, Clone, Copy)]
pub struct Rk4 {
    /// Per-step error bound, mixed absolute/relative.
    pub tol: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Rk4 {
    fn default() -> Self {
        Self { tol: 1e-10, h_min: 1e-14, h_max: 0.25, max_steps: 10_000_000 }
    }
}

/// How an integration leg ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Leg<const D: usize> {
    Reached {
        y: [f64; D],
    },
    /// The event function changed sign; `t`, `y` are located to `tol`.
    Event {
        t: f64,
        y: [f64; D],
        which: usize,
    },
}

fn axpy<const D: usize>(y: &[f64; D], a: f64, k: &[f64; D]) -> [f64; D] {
    let mut out = *y;
    for i in 0..D {
        out[i] += a * k[i];
    }
    out
}

/// One classical RK4 step.
pub fn rk4_step<const D: usize, F>(rhs: &F, t: f64, y: &[f64; D], h: f64) -> [f64; D]
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let k1 = rhs(t, y);
    let k2 = rhs(t + 0.5 * h, &axpy(y, 0.5 * h, &k1));
    let k3 = rhs(t + 0.5 * h, &axpy(y, 0.5 * h, &k2));
    let k4 = rhs(t + h, &axpy(y, h, &k3));
    let mut out = *y;
    for i in 0..D {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Step-doubled RK4 step: returns the extrapolated state and the error estimate.
fn doubled_step<const D: usize, F>(rhs: &F, t: f64, y: &[f64; D], h: f64) -> ([f64; D], f64)
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let full = rk4_step(rhs, t, y, h);
    let half = rk4_step(rhs, t, y, 0.5 * h);
    let two = rk4_step(rhs, t + 0.5 * h, &half, 0.5 * h);
    let mut out = two;
    let mut err = 0.0f64;
    for i in 0..D {
        let diff = two[i] - full[i];
        out[i] = two[i] + diff / 15.0;
        err = err.max(diff.abs() / 15.0 / (1.0 + two[i].abs()));
    }
    (out, err)
}

impl Rk4 {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    /// Integrates from `(t0, y0)` to `t1 > t0`. `h` carries the step size
    /// between legs. Events fire when any `events` component changes sign
    /// (strictly, from nonzero to zero-or-opposite).
    pub fn advance<const D: usize, F, G, const E: usize>(
        &self,
        rhs: &F,
        t0: f64,
        y0: [f64; D],
        t1: f64,
        h: &mut f64,
        events: Option<&G>,
    ) -> Result<Leg<D>>
    where
        F: Fn(f64, &[f64; D]) -> [f64; D],
        G: Fn(f64, &[f64; D]) -> [f64; E],
    {
        if t1 <= t0 {
            return Ok(Leg::Reached { y: y0 });
        }
        let mut t = t0;
        let mut y = y0;
        let mut g_prev = events.map(|g| g(t, &y));
        if !(*h > 0.0) {
            *h = (self.h_max).min(t1 - t0);
        }
        let mut steps = 0usize;
        while t < t1 {
            steps += 1;
            if steps > self.max_steps {
                return Err(Error::NonConvergence { what: "rk4 integration", iterations: steps, residual: t1 - t });
            }
            let step = h.min(self.h_max).min(t1 - t);
            let last = step >= t1 - t;
            let (y_new, err) = doubled_step(rhs, t, &y, step);
            let finite = y_new.iter().all(|v| v.is_finite());
            if finite && (err <= self.tol || step <= self.h_min) {
                let t_new = if last { t1 } else { t + step };
                if let (Some(g), Some(gp)) = (events, g_prev.as_ref()) {
                    let g_new = g(t_new, &y_new);
                    if let Some(which) = crossed(gp, &g_new) {
                        let (te, ye) = self.locate(rhs, g, which, t, &y, step, gp[which]);
                        return Ok(Leg::Event { t: te, y: ye, which });
                    }
                    g_prev = Some(g_new);
                }
                t = t_new;
                y = y_new;
                // Grow conservatively; RK4 error scales like h^5.
                let grow = if err > 0.0 { (0.9 * (self.tol / err).powf(0.2)).clamp(0.2, 4.0) } else { 4.0 };
                if !last {
                    *h = step * grow;
                }
            } else {
                if step <= self.h_min {
                    return Err(Error::NonConvergence { what: "rk4 step control", iterations: steps, residual: err });
                }
                let shrink = if finite && err > 0.0 { (0.9 * (self.tol / err).powf(0.2)).clamp(0.1, 0.5) } else { 0.1 };
                *h = (step * shrink).max(self.h_min);
            }
        }
        Ok(Leg::Reached { y })
    }

    #[allow(clippy::too_many_arguments)]
    fn locate<const D: usize, F, G, const E: usize>(
        &self,
        rhs: &F,
        g: &G,
        which: usize,
        t: f64,
        y: &[f64; D],
        step: f64,
        g_start: f64,
    ) -> (f64, [f64; D])
    where
        F: Fn(f64, &[f64; D]) -> [f64; D],
        G: Fn(f64, &[f64; D]) -> [f64; E],
    {
        let (mut lo, mut hi) = (0.0f64, step);
        let mut y_hi = doubled_step(rhs, t, y, hi).0;
        for _ in 0..200 {
            if hi - lo <= 1e-15 * (1.0 + t.abs()) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let y_mid = doubled_step(rhs, t, y, mid).0;
            let g_mid = g(t + mid, &y_mid)[which];
            if g_mid == 0.0 || g_mid.signum() != g_start.signum() {
                hi = mid;
                y_hi = y_mid;
            } else {
                lo = mid;
            }
        }
        (t + hi, y_hi)
    }
}

fn crossed<const E: usize>(prev: &[f64; E], next: &[f64; E]) -> Option<usize> {
    (0..E).find(|&i| prev[i] != 0.0 && (next[i] == 0.0 || next[i].signum() != prev[i].signum()))
}

/// Event-function type to name in `None::<&NoEvents<D>>` for legs without events.
pub type NoEvents<const D: usize> = fn(f64, &[f64; D]) -> [f64; 0];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let rk = Rk4::with_tol(1e-12);
        let mut h = 0.0;
        let leg = rk.advance(&|_t, y: &[f64; 1]| [-y[0]], 0.0, [1.0], 5.0, &mut h, None::<&NoEvents<1>>).unwrap();
        let Leg::Reached { y } = leg else { panic!() };
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn harmonic_oscillator_event_at_zero() {
        // y'' = -y, y(0)=1: first zero of cos at pi/2.
        let rk = Rk4::with_tol(1e-12);
        let mut h = 0.0;
        let ev = |_t: f64, y: &[f64; 2]| [y[0]];
        let leg = rk.advance(&|_t, y: &[f64; 2]| [y[1], -y[0]], 0.0, [1.0, 0.0], 10.0, &mut h, Some(&ev)).unwrap();
        let Leg::Event { t, which, .. } = leg else { panic!("no event") };
        assert_eq!(which, 0);
        assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }
}
