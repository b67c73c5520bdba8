//! One-dimensional limit profiles: the increasing solution of
//! `V'' + f(V) = 0`, `V(0) = 0`, `V(+∞) = z`.
//!
//! The primary construction inverts the first integral
//! `V'² = 2 (F(z) - F(V))`: node by node, `ξ_{i+1} - ξ_i = ∫ dσ / Φ(σ)` over
//! `[V_i, V_{i+1}]` is solved for `V_{i+1}` with a safeguarded Newton method.
//! The substitution `σ = z - t²` tames the logarithmic blow-up of the
//! integrand as `σ → z`. Once `V` reaches `z - EXIT_TOL` the remaining nodes
//! follow the linearized exponential tail. An adaptive RK4 integration of the
//! ODE from the shooting data serves as an independent cross-check.

use crate::error::{Error, Result};
use crate::nonlinearity::{Nonlinearity, TOL_F};
use crate::ode::{Leg, NoEvents, Rk4};
use crate::quad;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Closest approach to `z` resolved by the quadrature path.
pub const EXIT_TOL: f64 = 1e-8;
/// The ODE cross-check stops once `z - V` drops below this (relative to
/// `max(z, 1)`): beyond it the saddle at `(z, 0)` amplifies round-off faster
/// than any integrator can control.
pub const CROSS_CHECK_GAP: f64 = 1e-4;

/// A sampled profile on the uniform grid `xi_i = i · xi_max / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile1D {
    pub z: f64,
    pub slope0: f64,
    pub xi: Vec<f64>,
    pub values: Vec<f64>,
    /// `V'` at the nodes, from the first integral.
    pub slopes: Vec<f64>,
    /// Where `V = z - EXIT_TOL` was reached, if within `[0, xi_max]`.
    pub exit_xi: Option<f64>,
    /// `z - V(xi_max)`.
    pub tail_bound: f64,
    /// Max `|D²V + f(V)|` over all interior nodes.
    pub residual: f64,
    /// Same, over stencils whose values do not straddle a kink of `f`;
    /// this is what `residual_tol` bounds.
    pub smooth_residual: f64,
    /// Interior stencils excluded from `smooth_residual`.
    pub kink_stencils: usize,
    pub residual_tol: f64,
    /// Max node error `|W² - 2 (F(z) - F(V))|` with `F` from the antiderivative.
    pub first_integral_error: f64,
    pub cross_check: Option<CrossCheck>,
}

/// Agreement between the quadrature profile and direct ODE integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    /// Nodes with `xi <= window` were compared.
    pub window: f64,
    pub max_deviation: f64,
    pub max_slope_deviation: f64,
}

impl Profile1D {
    pub fn xi_max(&self) -> f64 {
        *self.xi.last().expect("profile has nodes")
    }

    fn spacing(&self) -> f64 {
        self.xi_max() / (self.xi.len() - 1) as f64
    }

    /// `V(xi)` by cubic Hermite interpolation; exponential tail past `xi_max`.
    pub fn sample(&self, xi: f64) -> f64 {
        if self.z == 0.0 || xi <= 0.0 {
            return if xi <= 0.0 { 0.0 } else { self.values[0] };
        }
        let n = self.xi.len() - 1;
        let h = self.spacing();
        if xi >= self.xi_max() {
            let gap = self.z - self.values[n];
            if gap <= 0.0 {
                return self.values[n];
            }
            let kappa = self.slopes[n] / gap;
            return self.z - gap * (-kappa * (xi - self.xi_max())).exp();
        }
        let k = ((xi / h) as usize).min(n - 1);
        let t = (xi - self.xi[k]) / h;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1
    }

    /// CSV with header `xi,V,W`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.xi.len() * 72);
        out.push_str("xi,V,W\n");
        for i in 0..self.xi.len() {
            let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", self.xi[i], self.values[i], self.slopes[i]);
        }
        out
    }
}

/// Shooting slope `V'(0) = √(2 F(z))`.
pub fn shoot_slope(nl: &Nonlinearity, z: f64) -> Result<f64> {
    if z == 0.0 {
        return Ok(0.0);
    }
    let big_f = nl.integral(0.0, z)?;
    if big_f < 0.0 {
        return Err(Error::Infeasible(format!("F({z}) = {big_f:.3e} < 0: no profile reaches {z}")));
    }
    Ok((2.0 * big_f).sqrt())
}

/// Max over interior nodes of `|(V_{i+1} - 2 V_i + V_{i-1}) / h² + f(V_i)|`.
pub fn profile_residual(p: &Profile1D, nl: &Nonlinearity) -> f64 {
    sampled_residual(&p.values, p.spacing(), nl)
}

fn sampled_residual(v: &[f64], h: f64, nl: &Nonlinearity) -> f64 {
    v.windows(3).map(|w| ((w[2] - 2.0 * w[1] + w[0]) / (h * h) + nl.value(w[1])).abs()).fold(0.0, f64::max)
}

/// Residual over stencils clear of kinks of `f`, where the second difference
/// is only first-order accurate, plus the number of stencils skipped.
fn smooth_residual(v: &[f64], h: f64, nl: &Nonlinearity) -> (f64, usize) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kinks = nl.kinks(lo, hi);
    let mut skipped = 0;
    let mut worst = 0.0f64;
    for w in v.windows(3) {
        let (a, b) = (w[0].min(w[2]).min(w[1]), w[0].max(w[2]).max(w[1]));
        let k = kinks.partition_point(|&t| t < a);
        if kinks.get(k).is_some_and(|&t| t <= b) {
            skipped += 1;
            continue;
        }
        worst = worst.max(((w[2] - 2.0 * w[1] + w[0]) / (h * h) + nl.value(w[1])).abs());
    }
    (worst, skipped)
}

struct Inverter<'a> {
    nl: &'a Nonlinearity,
    z: f64,
}

impl Inverter<'_> {
    /// `Φ(σ)² = 2 ∫_σ^z f`.
    fn phi_sq(&self, sigma: f64) -> Result<f64> {
        Ok(2.0 * self.nl.integral(sigma, self.z)?)
    }

    /// Relative accuracy attainable for an increment ending at `b`: rounding
    /// of `z - t²` perturbs `f` by ~eps·z, which is relatively large where
    /// `Φ` is small.
    fn noise_floor(&self, b: f64) -> f64 {
        let gap = (self.z - b).max(EXIT_TOL);
        (16.0 * f64::EPSILON * self.z.max(1.0) / gap).max(1e-13)
    }

    /// `∫_a^b dσ / Φ(σ)` through `σ = z - t²`.
    fn increment(&self, a: f64, b: f64) -> Result<f64> {
        let (ta, tb) = ((self.z - a).max(0.0).sqrt(), (self.z - b).max(0.0).sqrt());
        let failure = std::cell::Cell::new(None);
        let integrand = |t: f64| {
            if t <= 0.0 {
                return 0.0;
            }
            match self.phi_sq(self.z - t * t) {
                Ok(p) if p > 0.0 => 2.0 * t / p.sqrt(),
                Ok(_) => {
                    if failure.get().is_none() {
                        failure.set(Some(self.z - t * t));
                    }
                    f64::INFINITY
                }
                Err(_) => f64::NAN,
            }
        };
        let rel = self.noise_floor(b);
        let q = quad::integrate_budgeted(integrand, tb, ta, 1e-15, rel, 2000)?;
        if let Some(sigma) = failure.get() {
            return Err(not_attaining(self.z, sigma));
        }
        if q.error > 1e3 * rel * q.value.abs() + 1e-15 {
            return Err(Error::Quadrature { achieved: q.error });
        }
        Ok(q.value)
    }

    /// Solves `increment(a, b) = target` for `b` in `(a, hi)` given
    /// `increment(a, hi) > target`.
    fn solve_step(&self, a: f64, hi: f64, target: f64) -> Result<f64> {
        let (mut lo, mut hi) = (a, hi);
        let phi_a = self.phi_sq(a)?.max(0.0).sqrt();
        let mut b = a + phi_a * target;
        if !(b > lo && b < hi) {
            b = 0.5 * (lo + hi);
        }
        for _ in 0..100 {
            let g = self.increment(a, b)? - target;
            if g.abs() <= (2.0 * self.noise_floor(b)).max(1e-15) * target {
                return Ok(b);
            }
            if g > 0.0 {
                hi = b;
            } else {
                lo = b;
            }
            let phi_b = self.phi_sq(b)?.max(0.0).sqrt();
            let mut next = b - g * phi_b;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - b).abs() <= 4.0 * f64::EPSILON * b.abs().max(f64::MIN_POSITIVE) || hi - lo <= f64::EPSILON * hi.abs() {
                return Ok(next);
            }
            b = next;
        }
        Err(Error::NonConvergence { what: "profile node inversion", iterations: 100, residual: hi - lo })
    }
}

fn not_attaining(z: f64, sigma: f64) -> Error {
    Error::Infeasible(format!("F(σ) >= F(z) at σ = {sigma:.6} < z = {z}: the profile does not attain z (z outside Z_f)"))
}

/// Computes `V_z` on `n + 1` uniform nodes over `[0, xi_max]`.
pub fn compute_profile(nl: &Nonlinearity, z: f64, xi_max: f64, n: usize) -> Result<Profile1D> {
    if !(xi_max > 0.0 && xi_max.is_finite()) {
        return Err(Error::InvalidInput(format!("xi_max must be positive, got {xi_max}")));
    }
    if n < 16 {
        return Err(Error::InvalidInput(format!("profile needs n >= 16 intervals, got {n}")));
    }
    let h = xi_max / n as f64;
    let xi: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let residual_tol = 10.0 * h * h;
    if z == 0.0 {
        let f0 = nl.value(0.0);
        if f0.abs() > TOL_F {
            return Err(Error::Infeasible(format!("f(0) = {f0:.3e} != 0: the zero profile is not a solution")));
        }
        return Ok(Profile1D {
            z,
            slope0: 0.0,
            values: vec![0.0; n + 1],
            slopes: vec![0.0; n + 1],
            xi,
            exit_xi: Some(0.0),
            tail_bound: 0.0,
            residual: f0.abs(),
            smooth_residual: f0.abs(),
            kink_stencils: 0,
            residual_tol,
            first_integral_error: 0.0,
            cross_check: None,
        });
    }
    if !(z > 0.0) {
        return Err(Error::InvalidInput(format!("profile limit must be >= 0, got {z}")));
    }
    let slope0 = shoot_slope(nl, z)?;
    let inv = Inverter { nl, z };
    let hi_cap = z - EXIT_TOL;
    if !(hi_cap > 0.0) {
        return Err(Error::InvalidInput(format!("z = {z} is below the exit tolerance")));
    }
    prescan(&inv, hi_cap)?;

    let mut values = vec![0.0; n + 1];
    let mut exit_xi = None;
    for i in 0..n {
        let a = values[i];
        let to_cap = inv.increment(a, hi_cap)?;
        if to_cap <= h {
            exit_xi = Some(xi[i] + to_cap);
            break;
        }
        values[i + 1] = inv.solve_step(a, hi_cap, h)?;
    }
    let mut slopes: Vec<f64> = values.iter().map(|&v| inv.phi_sq(v).map(|p| p.max(0.0).sqrt())).collect::<Result<_>>()?;
    if let Some(xe) = exit_xi {
        let kappa = inv.phi_sq(hi_cap)?.max(0.0).sqrt() / EXIT_TOL;
        for i in 0..=n {
            if xi[i] >= xe {
                let gap = EXIT_TOL * (-kappa * (xi[i] - xe)).exp();
                values[i] = z - gap;
                slopes[i] = kappa * gap;
            }
        }
    }

    let big_fz = nl.primitive(z)?;
    let first_integral_error = values
        .iter()
        .zip(&slopes)
        .map(|(&v, &w)| nl.primitive(v).map(|fv| (w * w - 2.0 * (big_fz - fv)).abs()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let mut profile = Profile1D {
        z,
        slope0,
        tail_bound: z - values[n],
        xi,
        values,
        slopes,
        exit_xi,
        residual: 0.0,
        smooth_residual: 0.0,
        kink_stencils: 0,
        residual_tol,
        first_integral_error,
        cross_check: None,
    };
    profile.residual = profile_residual(&profile, nl);
    (profile.smooth_residual, profile.kink_stencils) = smooth_residual(&profile.values, h, nl);
    if profile.smooth_residual > residual_tol {
        return Err(Error::NonConvergence { what: "profile residual check", iterations: n, residual: profile.smooth_residual });
    }
    profile.cross_check = Some(ode_cross_check(nl, &profile)?);
    Ok(profile)
}

/// Rejects `z` when `2 ∫_σ^z f` vanishes or turns negative well below `z`.
fn prescan(inv: &Inverter<'_>, hi_cap: f64) -> Result<()> {
    const SAMPLES: usize = 2000;
    let z = inv.z;
    let big_fz = inv.nl.primitive(z)?;
    for k in 0..SAMPLES {
        let sigma = hi_cap * k as f64 / SAMPLES as f64;
        let gap = 2.0 * (big_fz - inv.nl.primitive(sigma)?);
        let near_tie = sigma <= z - 1e-3 && gap <= 1e-12;
        if gap <= 0.0 || near_tie {
            return Err(not_attaining(z, sigma));
        }
    }
    Ok(())
}

fn ode_cross_check(nl: &Nonlinearity, p: &Profile1D) -> Result<CrossCheck> {
    let rk = Rk4 { tol: 1e-13, h_max: 0.05, ..Rk4::default() };
    let rhs = |_t: f64, y: &[f64; 2]| [y[1], -nl.value(y[0])];
    let gap_limit = CROSS_CHECK_GAP * p.z.max(1.0);
    let mut y = [0.0, p.slope0];
    let mut step = 0.0;
    let (mut dev, mut dev_w, mut window) = (0.0f64, 0.0f64, 0.0);
    for i in 1..p.xi.len() {
        if p.z - p.values[i] < gap_limit {
            break;
        }
        match rk.advance(&rhs, p.xi[i - 1], y, p.xi[i], &mut step, None::<&NoEvents<2>>)? {
            Leg::Reached { y: next } => y = next,
            Leg::Event { .. } => unreachable!("no events requested"),
        }
        dev = dev.max((y[0] - p.values[i]).abs());
        dev_w = dev_w.max((y[1] - p.slopes[i]).abs());
        window = p.xi[i];
    }
    Ok(CrossCheck { window, max_deviation: dev, max_slope_deviation: dev_w })
}

/// Profiles for several limits, computed in parallel, returned in input order.
pub fn compute_profiles(nl: &Nonlinearity, zs: &[f64], xi_max: f64, n: usize) -> Vec<Result<Profile1D>> {
    zs.par_iter().map(|&z| compute_profile(nl, z, xi_max, n)).collect()
}

/// How a shooting trajectory with a perturbed slope left the profile family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeEvent {
    /// `V` crossed `z` upwards.
    Overshoot,
    /// `V'` vanished with `V < z`; monotonicity fails from there on.
    TurnBack,
    /// `V` went negative.
    Negative,
    /// Unperturbed run stayed on the profile up to `xi_max`.
    Tracks,
    /// Perturbed run produced no event before `xi_max`.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub slope: f64,
    pub event: ProbeEvent,
    pub xi_event: Option<f64>,
    pub v_event: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub z: f64,
    pub delta: f64,
    pub plus: ProbeOutcome,
    pub minus: ProbeOutcome,
    /// For `delta = 0`: residual of the ODE samples on a 1024-interval grid.
    pub reference_residual: Option<f64>,
    pub reference_residual_tol: Option<f64>,
}

/// Integrates `V'' = -f(V)` from `V(0) = 0` with slopes `√(2F(z)) ± delta`
/// and reports how each run leaves the monotone family bounded by `z`.
pub fn disconnectedness_probe(nl: &Nonlinearity, z: f64, delta: f64, xi_max: f64) -> Result<ProbeReport> {
    if !(delta >= 0.0) || !(xi_max > 0.0) {
        return Err(Error::InvalidInput("probe needs delta >= 0 and xi_max > 0".into()));
    }
    let slope0 = shoot_slope(nl, z)?;
    let plus = probe_run(nl, z, slope0 + delta, xi_max, delta == 0.0)?;
    let minus = if delta == 0.0 { plus } else { probe_run(nl, z, slope0 - delta, xi_max, false)? };
    let (mut reference_residual, mut reference_residual_tol) = (None, None);
    if delta == 0.0 {
        const N: usize = 1024;
        let end = plus.xi_event.unwrap_or(xi_max);
        let h = end / N as f64;
        let rk = Rk4::with_tol(1e-13);
        let rhs = |_t: f64, y: &[f64; 2]| [y[1], -nl.value(y[0])];
        let mut y = [0.0, slope0];
        let mut step = 0.0;
        let mut samples = vec![0.0];
        for i in 0..N {
            if let Leg::Reached { y: next } = rk.advance(&rhs, i as f64 * h, y, (i + 1) as f64 * h, &mut step, None::<&NoEvents<2>>)? {
                y = next;
            }
            samples.push(y[0]);
        }
        reference_residual = Some(sampled_residual(&samples, h, nl));
        reference_residual_tol = Some(10.0 * h * h);
    }
    Ok(ProbeReport { z, delta, plus, minus, reference_residual, reference_residual_tol })
}

fn probe_run(nl: &Nonlinearity, z: f64, slope: f64, xi_max: f64, unperturbed: bool) -> Result<ProbeOutcome> {
    let outcome = |event, t: Option<f64>, v: Option<f64>| ProbeOutcome { slope, event, xi_event: t, v_event: v };
    if slope < 0.0 || (slope == 0.0 && nl.value(0.0) > 0.0) {
        return Ok(outcome(ProbeEvent::Negative, Some(0.0), Some(0.0)));
    }
    if slope == 0.0 {
        return Ok(outcome(if unperturbed { ProbeEvent::Tracks } else { ProbeEvent::Inconclusive }, None, None));
    }
    let rk = Rk4::with_tol(1e-12);
    let rhs = |_t: f64, y: &[f64; 2]| [y[1], -nl.value(y[0])];
    let events = |_t: f64, y: &[f64; 2]| [y[0] - z, y[1], y[0] + 1e-12];
    let mut step = 0.0;
    match rk.advance(&rhs, 0.0, [0.0, slope], xi_max, &mut step, Some(&events))? {
        Leg::Reached { .. } => Ok(outcome(if unperturbed { ProbeEvent::Tracks } else { ProbeEvent::Inconclusive }, None, None)),
        Leg::Event { t, y, which } => {
            let event = match which {
                0 => ProbeEvent::Overshoot,
                1 => ProbeEvent::TurnBack,
                _ => ProbeEvent::Negative,
            };
            Ok(outcome(event, Some(t), Some(y[0])))
        }
    }
}
