//! Compactly supported radial subsolutions and their energies.
//!
//! A bubble is the solution of `v'' + (N-1)/r v' + g(v) = 0`, `v(0) = a`,
//! `v'(0) = 0`, cut off at its first zero `R'`. Extended by 0 it is a
//! subsolution of `Δv + g(v) >= 0` whenever `g(0) >= 0`.

use crate::error::{invalid, Error, Result};
use crate::nonlinearity::{Nonlinearity, TOL_F};
use crate::ode::{Leg, NoEvents, Rk4};
use crate::quad::integrate;
use serde::Serialize;
use std::f64::consts::PI;

const SAMPLES: usize = 2048;
const R_MAX: f64 = 200.0;
const MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct RadialBubble {
    pub dimension: usize,
    pub z: f64,
    pub eps: f64,
    /// `v(0) = max v`.
    pub v0: f64,
    pub r_prime: f64,
    pub r: Vec<f64>,
    pub v: Vec<f64>,
    /// Number of starting values tried (`a = z - eps / 2^k`).
    pub attempts: usize,
}

impl RadialBubble {
    /// `v(ρ)` by linear interpolation in the radius; 0 outside the ball.
    pub fn sample(&self, rho: f64) -> f64 {
        if rho >= self.r_prime {
            return 0.0;
        }
        let s = rho / self.r_prime * (self.r.len() - 1) as f64;
        let k = (s.floor() as usize).min(self.r.len() - 2);
        let t = s - k as f64;
        (1.0 - t) * self.v[k] + t * self.v[k + 1]
    }
}

/// Volume of the unit ball in `R^N`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        0 => 1.0,
        1 => 2.0,
        n => unit_ball_volume(n - 2) * 2.0 * PI / n as f64,
    }
}

fn radial_rhs(g: &Nonlinearity, dim: usize) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + '_ {
    let k = (dim - 1) as f64;
    move |r: f64, y: &[f64; 2]| [y[1], -k / r * y[1] - g.value(y[0].max(0.0))]
}

/// Series start away from the coordinate singularity at `r = 0`.
fn start(g: &Nonlinearity, dim: usize, a: f64) -> (f64, [f64; 2]) {
    let r0 = 1e-4;
    let ga = g.value(a);
    (r0, [a - ga * r0 * r0 / (2.0 * dim as f64), -ga * r0 / dim as f64])
}

/// First zero of the shooting solution from `v(0) = a`, if it occurs before
/// `R_MAX` while `v` stays decreasing.
fn first_zero(g: &Nonlinearity, dim: usize, a: f64, rk: &Rk4) -> Result<Option<f64>> {
    let rhs = radial_rhs(g, dim);
    let (r0, y0) = start(g, dim, a);
    // Events: v hits 0, v' turns positive (the solution would oscillate back up).
    let events = |_: f64, y: &[f64; 2]| [y[0], -y[1] + 1e-300];
    let mut h = 1e-3;
    match rk.advance(&rhs, r0, y0, R_MAX, &mut h, Some(&events))? {
        Leg::Event { t, which: 0, .. } => Ok(Some(t)),
        _ => Ok(None),
    }
}

/// Shoots a radial bubble with `v(0) >= z - eps` and `0 <= v < z`.
pub fn radial_bubble(g: &Nonlinearity, z: f64, eps: f64, dim: usize) -> Result<RadialBubble> {
    if dim < 1 {
        return invalid("dimension must be at least 1");
    }
    if !(eps > 0.0 && eps <= z) || z > g.s_max {
        return invalid(format!("need 0 < eps <= z <= s_max, got eps={eps}, z={z}"));
    }
    if g.value(z).abs() > TOL_F {
        return invalid(format!("g(z) = {:.3e} is not zero", g.value(z)));
    }
    const SCAN: usize = 1000;
    if let Some(k) = (0..=SCAN).find(|&k| g.value(z * k as f64 / SCAN as f64) < -TOL_F) {
        return invalid(format!("g < 0 at s = {:.6} inside [0, z]", z * k as f64 / SCAN as f64));
    }
    let rk = Rk4 { tol: 1e-12, h_max: 0.05, ..Rk4::default() };
    let mut found = None;
    for k in 0..MAX_HALVINGS {
        let a = z - eps / 2f64.powi(k as i32);
        if a <= 0.0 || g.value(a) <= 0.0 {
            continue;
        }
        if let Some(rp) = first_zero(g, dim, a, &rk)? {
            found = Some((a, rp, k + 1));
            break;
        }
    }
    let (a, r_prime, attempts) =
        found.ok_or_else(|| Error::Infeasible(format!("no bubble with v(0) >= {} reaches 0 before r = {R_MAX}", z - eps)))?;

    let rhs = radial_rhs(g, dim);
    let dr = r_prime / SAMPLES as f64;
    let mut r = vec![0.0];
    let mut v = vec![a];
    let (r0, mut y) = start(g, dim, a);
    let mut t = r0;
    let mut h = 1e-3;
    for i in 1..=SAMPLES {
        let target = i as f64 * dr;
        if let Leg::Reached { y: next } = rk.advance(&rhs, t, y, target, &mut h, None::<&NoEvents<2>>)? {
            y = next;
        }
        t = target;
        r.push(target);
        v.push(y[0]);
    }
    // The located zero and the resampled endpoint agree to the integrator tolerance.
    v[SAMPLES] = 0.0;
    Ok(RadialBubble { dimension: dim, z, eps, v0: a, r_prime, r, v, attempts })
}

/// Energies of the bubble and of the comparison ramp on `B(0, R')`.
#[derive(Debug, Clone, Serialize)]
pub struct BubbleEnergy {
    /// `½∫|∇v|² + ∫G(v)` with `G(s) = ∫_s^z g`.
    pub i_v: f64,
    /// Same functional for the ramp `w = z` on `|x| <= R'-1`, `z (R' - |x|)` outside.
    pub i_w: f64,
}

fn g_upper(g: &Nonlinearity, z: f64) -> Result<impl Fn(f64) -> f64 + '_> {
    let fz = g.primitive(z)?;
    Ok(move |s: f64| fz - g.primitive(s.clamp(0.0, z)).unwrap_or(f64::NAN))
}

/// `I_r(w_r)` for the ramp of radius `r > 1`.
pub fn ramp_energy(g: &Nonlinearity, z: f64, dim: usize, r: f64) -> Result<f64> {
    if !(r > 1.0) {
        return invalid("ramp radius must exceed 1");
    }
    let big_g = g_upper(g, z)?;
    let omega = dim as f64 * unit_ball_volume(dim);
    let inner = (r - 1.0).powi(dim as i32) / dim as f64 * big_g(z);
    let shell = integrate(|rho| (0.5 * z * z + big_g(z * (r - rho))) * rho.powi(dim as i32 - 1), r - 1.0, r, 1e-12, 1e-12)?;
    Ok(omega * (inner + shell.value))
}

pub fn bubble_energy(b: &RadialBubble, g: &Nonlinearity, z: f64) -> Result<BubbleEnergy> {
    let big_g = g_upper(g, z)?;
    let dim = b.dimension;
    let n = b.r.len() - 1;
    let dr = b.r_prime / n as f64;
    // Slopes by central differences (one-sided at the ends), Simpson in r.
    let slope = |i: usize| {
        if i == 0 {
            0.0
        } else if i == n {
            (3.0 * b.v[n] - 4.0 * b.v[n - 1] + b.v[n - 2]) / (2.0 * dr)
        } else {
            (b.v[i + 1] - b.v[i - 1]) / (2.0 * dr)
        }
    };
    let density = |i: usize| (0.5 * slope(i).powi(2) + big_g(b.v[i])) * b.r[i].powi(dim as i32 - 1);
    let mut sum = density(0) + density(n);
    for i in 1..n {
        sum += density(i) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let omega = dim as f64 * unit_ball_volume(dim);
    let i_v = omega * sum * dr / 3.0;
    let i_w = if b.r_prime > 1.0 { ramp_energy(g, z, dim, b.r_prime)? } else { f64::NAN };
    Ok(BubbleEnergy { i_v, i_w })
}

/// Growth of the ramp energy against the plateau lower bound `α_N r^N G(z-ε)`.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthScan {
    pub radii: Vec<f64>,
    pub ramp: Vec<f64>,
    pub plateau: Vec<f64>,
    /// Least-squares slopes of `ln I` against `ln r`.
    pub ramp_exponent: f64,
    pub plateau_exponent: f64,
}

fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

pub fn growth_scan(g: &Nonlinearity, z: f64, eps: f64, dim: usize, radii: &[f64]) -> Result<GrowthScan> {
    if radii.len() < 2 {
        return invalid("growth scan needs at least two radii");
    }
    let gz = g_upper(g, z)?(z - eps);
    let ramp = radii.iter().map(|&r| ramp_energy(g, z, dim, r)).collect::<Result<Vec<_>>>()?;
    let plateau: Vec<f64> = radii.iter().map(|&r| unit_ball_volume(dim) * r.powi(dim as i32) * gz).collect();
    Ok(GrowthScan {
        radii: radii.to_vec(),
        ramp_exponent: log_slope(radii, &ramp),
        plateau_exponent: log_slope(radii, &plateau),
        ramp,
        plateau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_bubble_shape() {
        let g = Nonlinearity::logistic();
        let b = radial_bubble(&g, 1.0, 0.1, 2).unwrap();
        assert!((0.9..1.0).contains(&b.v0));
        assert!(b.r_prime.is_finite() && b.r_prime > 1.0);
        assert!(b.v.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*b.v.last().unwrap(), 0.0);
        let tighter = radial_bubble(&g, 1.0, 0.05, 2).unwrap();
        assert!(tighter.r_prime >= b.r_prime);
    }

    #[test]
    fn linear_decay_bubble_matches_bessel_form() {
        // v = 1 - (1 - a) I0(r) for g = 1 - s in two dimensions.
        let g = Nonlinearity::linear_decay();
        let b = radial_bubble(&g, 1.0, 0.1, 2).unwrap();
        let i0 = |r: f64| (0..40).map(|k| (r / 2.0).powi(2 * k) / (1..=k).map(|j| j as f64).product::<f64>().powi(2)).sum::<f64>();
        for k in (0..b.r.len()).step_by(128) {
            let want = 1.0 - 0.1 * i0(b.r[k]);
            assert!((b.v[k] - want).abs() < 1e-8, "r={} {} vs {want}", b.r[k], b.v[k]);
        }
        assert!((0.1 * i0(b.r_prime) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn eps_equal_to_z_is_feasible() {
        let b = radial_bubble(&Nonlinearity::logistic(), 1.0, 1.0, 2).unwrap();
        assert!(b.v0 >= 0.0 && b.v0 < 1.0);
    }

    #[test]
    fn rejects_nonzero_target() {
        assert!(radial_bubble(&Nonlinearity::logistic(), 0.5, 0.1, 2).is_err());
    }

    #[test]
    fn zero_function_energy_is_volume_times_g0() {
        let g = Nonlinearity::logistic();
        let flat = RadialBubble {
            dimension: 2,
            z: 1.0,
            eps: 1.0,
            v0: 0.0,
            r_prime: 3.0,
            r: (0..=64).map(|i| 3.0 * i as f64 / 64.0).collect(),
            v: vec![0.0; 65],
            attempts: 0,
        };
        let e = bubble_energy(&flat, &g, 1.0).unwrap();
        assert!((e.i_v - PI * 9.0 / 6.0).abs() < 1e-10, "{}", e.i_v);
    }

    #[test]
    fn bubble_energy_below_ramp_and_growth_rates_separate() {
        let g = Nonlinearity::logistic();
        let b = radial_bubble(&g, 1.0, 0.1, 2).unwrap();
        let e = bubble_energy(&b, &g, 1.0).unwrap();
        assert!(e.i_v <= e.i_w, "{e:?}");
        let scan = growth_scan(&g, 1.0, 0.1, 2, &[5.0, 10.0, 20.0]).unwrap();
        assert!((scan.plateau_exponent - 2.0).abs() < 1e-12);
        assert!((scan.ramp_exponent - 1.0).abs() < 0.1, "{scan:?}");
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-15);
    }
}
