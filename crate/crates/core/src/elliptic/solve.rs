use super::grid::{AxisBc, BoundarySpec, Certificate, Field, Grid2D, MonotoneTrace};
use super::lattice::Lattice;
use crate::error::{invalid, Error, Result};
use crate::nonlinearity::{constant_supersolution, Nonlinearity, TOL_F};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Damped Newton from a constant supersolution (or the extended trace).
    Newton,
    /// Sub/supersolution iteration from 0 below a constant supersolution.
    Monotone,
    /// Monotone iteration to `switch_tol`, then Newton.
    Hybrid,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Newton => "newton",
            Method::Monotone => "monotone",
            Method::Hybrid => "hybrid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub method: Method,
    /// Target for `max |Δ_h u + f(u)|`.
    pub tol: f64,
    pub max_newton: usize,
    pub max_monotone: usize,
    /// Residual at which the hybrid method hands over to Newton.
    pub switch_tol: f64,
    /// Tolerated round-off in the monotone order checks.
    pub order_slack: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { method: Method::Newton, tol: 1e-10, max_newton: 60, max_monotone: 200_000, switch_tol: 1e-4, order_slack: 1e-11 }
    }
}

impl SolverOptions {
    pub fn with(method: Method, tol: f64) -> Self {
        Self { method, tol, ..Self::default() }
    }
}

const DAMPING_FLOOR: f64 = 1.0 / 4096.0;
const ARMIJO: f64 = 1e-4;

fn certificate(lat: &Lattice, u: &[f64], method: &str, iterations: usize, history: Vec<f64>, tol: f64) -> Certificate {
    let min_value = u.iter().copied().fold(f64::INFINITY, f64::min);
    let _ = lat;
    Certificate {
        residual: *history.last().expect("history starts with the initial residual"),
        iterations,
        method: method.into(),
        history,
        min_value,
        undershoot: min_value < -tol,
        monotone: None,
    }
}

/// Damped Newton on `Δ_h u + f(u) = 0` from `init`. Each step solves
/// `(Δ_h + diag f'(u)) δ = -R(u)` and backtracks on `‖R‖₂` (Armijo) down to
/// a damping floor of 2⁻¹²; convergence is judged in the max norm.
pub fn newton_solve(init: &Field, nl: &Nonlinearity, tol: f64) -> Result<Field> {
    newton_with(init, nl, &SolverOptions::with(Method::Newton, tol), Vec::new(), "newton")
}

fn newton_with(init: &Field, nl: &Nonlinearity, opts: &SolverOptions, mut history: Vec<f64>, label: &str) -> Result<Field> {
    let lat = Lattice::new(&init.grid, &init.boundary);
    let mut u = init.values.clone();
    lat.apply_bc(&mut u);
    let n = u.len();
    let mut r = vec![0.0; n];
    let (mut rmax, mut rss) = lat.residual(&u, nl, &mut r);
    let already = history.len();
    history.push(rmax);
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; n];
    let mut steps = 0;
    while rmax > opts.tol {
        if steps >= opts.max_newton {
            return Err(Error::NonConvergence { what: "newton iteration", iterations: steps, residual: rmax });
        }
        steps += 1;
        let jac = lat.assemble(|p| nl.slope(u[p]));
        let lu = jac.factor()?;
        let mut rhs = lat.to_dofs(&r);
        rhs.iter_mut().for_each(|v| *v = -*v);
        lu.solve(&mut rhs);
        let mut delta = vec![0.0; n];
        lat.from_dofs(&rhs, &mut delta);

        let mut lambda = 1.0;
        loop {
            for p in 0..n {
                trial[p] = u[p] + lambda * delta[p];
            }
            lat.apply_bc(&mut trial);
            let (tmax, tss) = lat.residual(&trial, nl, &mut r_trial);
            if tss <= (1.0 - 2.0 * ARMIJO * lambda) * rss || tmax <= opts.tol {
                std::mem::swap(&mut u, &mut trial);
                std::mem::swap(&mut r, &mut r_trial);
                rmax = tmax;
                rss = tss;
                break;
            }
            lambda *= 0.5;
            if lambda < DAMPING_FLOOR {
                return Err(Error::NonConvergence { what: "newton line search (damping floor)", iterations: steps, residual: rmax });
            }
        }
        history.push(rmax);
    }
    let total = already + steps;
    let cert = certificate(&lat, &u, label, total, history, opts.tol);
    Ok(Field { grid: init.grid, values: u, boundary: init.boundary.clone(), certificate: Some(cert) })
}

/// Picard iteration between an ordered pair of discrete sub- and
/// supersolutions: `(Δ_h - K) u_{k+1} = -f(u_k) - K u_k` with
/// `K = 1.1 × Lipschitz(f)` on the order interval. Iterates must increase
/// and stay below `sup`; a violation is reported as an error.
pub fn monotone_iterate(sub: &Field, sup: &Field, nl: &Nonlinearity, tol: f64) -> Result<Field> {
    let opts = SolverOptions::with(Method::Monotone, tol);
    monotone_with(sub, sup, nl, &opts, tol).map(|(f, _)| f)
}

fn monotone_with(sub: &Field, sup: &Field, nl: &Nonlinearity, opts: &SolverOptions, stop: f64) -> Result<(Field, Vec<f64>)> {
    if sub.grid != sup.grid || sub.boundary != sup.boundary {
        return invalid("sub- and supersolution must share grid and boundary");
    }
    let lat = Lattice::new(&sub.grid, &sub.boundary);
    let mut u = sub.values.clone();
    lat.apply_bc(&mut u);
    let mut upper = sup.values.clone();
    lat.apply_bc(&mut upper);
    if let Some(p) = (0..u.len()).find(|&p| u[p] > upper[p] + opts.order_slack) {
        return invalid(format!("sub exceeds sup at node {p}: {} > {}", u[p], upper[p]));
    }
    let lo = u.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = upper.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let k_shift = 1.1 * nl.lipschitz_estimate.max(local_lipschitz(nl, lo, hi));
    let lu = lat.assemble(|_| -k_shift).factor()?;

    let n = u.len();
    let mut r = vec![0.0; n];
    let (mut rmax, _) = lat.residual(&u, nl, &mut r);
    let mut history = vec![rmax];
    let mut trace = MonotoneTrace { iterations: 0, min_increment: f64::INFINITY, max_above_sup: f64::NEG_INFINITY };
    let mut delta = vec![0.0; n];
    while rmax > stop {
        if trace.iterations >= opts.max_monotone {
            return Err(Error::NonConvergence { what: "monotone iteration", iterations: trace.iterations, residual: rmax });
        }
        trace.iterations += 1;
        let mut rhs = lat.to_dofs(&r);
        rhs.iter_mut().for_each(|v| *v = -*v);
        lu.solve(&mut rhs);
        lat.from_dofs(&rhs, &mut delta);
        for p in 0..n {
            u[p] += delta[p];
        }
        lat.apply_bc(&mut u);
        let (min_inc, above) = (0..n)
            .filter(|&p| lat.is_unknown(p))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(m, a), p| (m.min(delta[p]), a.max(u[p] - upper[p])));
        trace.min_increment = trace.min_increment.min(min_inc);
        trace.max_above_sup = trace.max_above_sup.max(above);
        if min_inc < -opts.order_slack || above > opts.order_slack {
            return Err(Error::OrderViolation {
                iteration: trace.iterations,
                detail: format!("min increment {min_inc:.3e}, max excess over sup {above:.3e} (shift K = {k_shift:.4})"),
            });
        }
        rmax = lat.residual(&u, nl, &mut r).0;
        history.push(rmax);
    }
    let mut cert = certificate(&lat, &u, "monotone", trace.iterations, history.clone(), opts.tol);
    if trace.iterations == 0 {
        trace.min_increment = 0.0;
        trace.max_above_sup = (0..n).map(|p| u[p] - upper[p]).fold(f64::NEG_INFINITY, f64::max);
    }
    cert.monotone = Some(trace);
    Ok((Field { grid: sub.grid, values: u, boundary: sub.boundary.clone(), certificate: Some(cert) }, history))
}

fn local_lipschitz(nl: &Nonlinearity, lo: f64, hi: f64) -> f64 {
    if !(hi > lo) {
        return 0.0;
    }
    const N: usize = 10_000;
    let h = (hi - lo) / N as f64;
    (1..N)
        .map(|k| {
            let s = lo + k as f64 * h;
            ((nl.value(s + h) - nl.value(s - h)) / (2.0 * h)).abs()
        })
        .fold(0.0, f64::max)
        * 1.1
}

/// The constant supersolution `c >= max(boundary data)` with `f(c) <= 0`.
fn supersolution_level(nl: &Nonlinearity, bc: &BoundarySpec) -> Result<Option<f64>> {
    let mut top = 0.0f64;
    for axis in [&bc.x1, &bc.x2] {
        if let AxisBc::Bounded { lo, hi } = axis {
            for end in [lo, hi] {
                if let super::grid::EndBc::Dirichlet(v) = end {
                    top = v.iter().copied().fold(top, f64::max);
                }
            }
        }
    }
    constant_supersolution(nl, top, TOL_F)
}

/// Solves `Δ_h u + f(u) = 0` for the given boundary data with `opts.method`.
pub fn solve(nl: &Nonlinearity, bc: &BoundarySpec, grid: &Grid2D, opts: &SolverOptions) -> Result<Field> {
    bc.validate(grid)?;
    let level = supersolution_level(nl, bc)?;
    let guess = |c: Option<f64>| -> Result<Field> {
        let mut values = vec![0.0; grid.nodes()];
        match (c, bc.left_trace()) {
            (Some(c), _) => values.iter_mut().for_each(|v| *v = c),
            (None, Some(trace)) => {
                for i in 0..=grid.n1 {
                    values[grid.index(i, 0)..=grid.index(i, grid.n2)].copy_from_slice(trace);
                }
            }
            (None, None) => {}
        }
        Lattice::new(grid, bc).apply_bc(&mut values);
        Field::new(*grid, bc.clone(), values)
    };
    match opts.method {
        Method::Newton => newton_with(&guess(level)?, nl, opts, Vec::new(), "newton"),
        Method::Monotone | Method::Hybrid => {
            let c = level.ok_or_else(|| Error::Infeasible("no constant supersolution above the boundary data (f > 0 beyond it)".into()))?;
            if nl.value(0.0) < -TOL_F {
                return Err(Error::Infeasible("0 is not a subsolution: f(0) < 0".into()));
            }
            let sub = guess(Some(0.0))?;
            let sup = guess(Some(c))?;
            if opts.method == Method::Monotone {
                return monotone_with(&sub, &sup, nl, opts, opts.tol).map(|r| r.0);
            }
            let (start, history) = monotone_with(&sub, &sup, nl, opts, opts.switch_tol.max(opts.tol))?;
            let trace = start.certificate.as_ref().and_then(|c| c.monotone);
            let mut out = newton_with(&start, nl, opts, history, "hybrid")?;
            if let Some(cert) = out.certificate.as_mut() {
                cert.monotone = trace;
            }
            Ok(out)
        }
    }
}

/// Quarter-plane problem: the boundary must have a Dirichlet-0 bottom wall
/// and a Dirichlet trace on the left.
pub fn solve_quarter(nl: &Nonlinearity, bc: &BoundarySpec, grid: &Grid2D, opts: &SolverOptions) -> Result<Field> {
    use super::grid::EndBc;
    let bottom_zero = matches!(&bc.x2, AxisBc::Bounded { lo: EndBc::Dirichlet(v), .. } if v.iter().all(|&x| x == 0.0));
    if !bottom_zero || bc.left_trace().is_none() {
        return invalid("quarter-plane problem needs u = 0 at x2 = 0 and a trace at x1 = 0");
    }
    solve(nl, bc, grid, opts)
}

/// Half-plane problem: periodic in `x2` with a Dirichlet trace on the left.
pub fn solve_half(nl: &Nonlinearity, bc: &BoundarySpec, grid: &Grid2D, opts: &SolverOptions) -> Result<Field> {
    if bc.x2 != AxisBc::Periodic || bc.left_trace().is_none() {
        return invalid("half-plane problem needs periodic x2 and a trace at x1 = 0");
    }
    solve(nl, bc, grid, opts)
}

/// `max |Δ_h u + f(u)|` over the unknown nodes of `u`.
pub fn residual_norm(u: &Field, nl: &Nonlinearity) -> f64 {
    let lat = Lattice::new(&u.grid, &u.boundary);
    let mut r = vec![0.0; u.values.len()];
    lat.residual(&u.values, nl, &mut r).0
}
