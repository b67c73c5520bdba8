//! Randomized sweeps on periodic boxes and half-space strips, looking for
//! bounded nonnegative solutions that are not constant (box) or not
//! one-dimensional (strip). Finite domains stand in for the unbounded
//! ones, so the sweeps provide evidence only.

use crate::elliptic::{newton_solve, BoundarySpec, Field, Grid2D, Lattice};
use crate::error::{Error, Result};
use crate::nonlinearity::{check_hypotheses, zero_set, Nonlinearity, TOL_F};
use crate::ode::{Leg, Rk4};
use crate::trajectory::{attractor_table, Candidate, ProblemKind, ProfileGrid, ZERO_GRID};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const SURROGATE_BANNER: &str =
    "surrogate domain: finite periodic box / strip standing in for an unbounded domain; results are numerical evidence, not proof";

/// Number of Fourier modes in the random initial data.
pub const MODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    pub tol: f64,
    /// A field counts as constant (box) or one-dimensional (strip) when its
    /// (lateral) variation is below this.
    pub constant_tol: f64,
    pub max_flow_steps: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { tol: 1e-10, constant_tol: 1e-4, max_flow_steps: 2_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepDomain {
    PeriodicBox,
    Strip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub converged: bool,
    /// `newton` or `parabolic` (explicit flow after a failed Newton run).
    pub method: String,
    pub iterations: usize,
    pub residual: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Box: `max - min`. Strip: max over `x2`-rows of the row's `max - min`.
    pub deviation: f64,
    /// Box: distance of the mean to `E`. Strip: distance to the nearest `V_z`.
    pub distance: f64,
    /// Strip only: the closest profile level.
    pub matched_z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub banner: String,
    pub domain: SweepDomain,
    pub nonlinearity: String,
    pub grid: Grid2D,
    pub seed: u64,
    pub trials: usize,
    pub converged: usize,
    /// Converged trials classified constant (box) or one-dimensional (strip).
    pub constant_count: usize,
    pub max_deviation: f64,
    /// Largest distance of a converged mean to `E` (box) or field to the
    /// nearest profile (strip).
    pub zero_distance: f64,
    pub records: Vec<TrialRecord>,
    #[serde(skip)]
    pub fields: Vec<Option<Field>>,
}

impl SweepReport {
    fn assemble(
        domain: SweepDomain,
        nl: &Nonlinearity,
        grid: Grid2D,
        seed: u64,
        opts: &SweepOptions,
        runs: Vec<(TrialRecord, Option<Field>)>,
    ) -> Self {
        let (records, fields): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
        let done: Vec<&TrialRecord> = records.iter().filter(|r| r.converged).collect();
        Self {
            banner: SURROGATE_BANNER.into(),
            domain,
            nonlinearity: nl.name(),
            grid,
            seed,
            trials: records.len(),
            converged: done.len(),
            constant_count: done.iter().filter(|r| r.deviation < opts.constant_tol).count(),
            max_deviation: done.iter().map(|r| r.deviation).fold(0.0, f64::max),
            zero_distance: done.iter().map(|r| r.distance).fold(0.0, f64::max),
            records,
            fields,
        }
    }

    /// Every converged trial passed both classification thresholds.
    pub fn all_classified(&self, dev_tol: f64, dist_tol: f64) -> bool {
        self.records.iter().filter(|r| r.converged).all(|r| r.deviation < dev_tol && r.distance < dist_tol)
    }
}

fn require_zeros(nl: &Nonlinearity) -> Result<()> {
    if zero_set(nl, TOL_F, ZERO_GRID)?.is_empty() {
        return Err(Error::Infeasible("sweep precondition fails: f has no zeros (E is empty)".into()));
    }
    if !check_hypotheses(nl)?.satisfies_h2() {
        return Err(Error::Infeasible("sweep precondition fails: f is not nonnegative with transversal zeros".into()));
    }
    Ok(())
}

/// Trial `k`'s generator: one ChaCha stream per trial.
fn trial_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

/// Mode indices `(p, q)` ordered by frequency, lowest first.
fn lowest_modes(w1: f64, w2: f64, q_shift: f64) -> Vec<(f64, f64)> {
    let mut modes = Vec::new();
    for p in -4i32..=4 {
        for q in 0..=4 {
            let qf = q as f64 + q_shift;
            if q_shift == 0.0 && q == 0 && p < 0 {
                continue;
            }
            modes.push((p as f64, qf));
        }
    }
    modes.sort_by(|a, b| {
        let fa = (a.0 * w1).powi(2) + (a.1 * w2).powi(2);
        let fb = (b.0 * w1).powi(2) + (b.1 * w2).powi(2);
        fa.total_cmp(&fb).then(a.0.total_cmp(&b.0)).then(a.1.total_cmp(&b.1))
    });
    modes.truncate(MODES);
    modes
}

/// Random band-limited nonnegative data: the `MODES` lowest modes with
/// amplitudes in `[0, 3]` and random phases, clipped at 0.
pub fn random_initial(grid: &Grid2D, domain: SweepDomain, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (w1, w2) = (
        2.0 * PI / grid.l1,
        match domain {
            SweepDomain::PeriodicBox => 2.0 * PI / grid.l2,
            SweepDomain::Strip => PI / grid.l2,
        },
    );
    let q_shift = if domain == SweepDomain::Strip { 0.5 } else { 0.0 };
    let modes: Vec<(f64, f64, f64, f64)> = lowest_modes(w1, w2, q_shift)
        .into_iter()
        .map(|(p, q)| (p, q, rng.random_range(0.0..=3.0), rng.random_range(0.0..2.0 * PI)))
        .collect();
    let mut values = Vec::with_capacity(grid.nodes());
    for i in 0..=grid.n1 {
        for j in 0..=grid.n2 {
            let (x1, x2) = (grid.x1(i), grid.x2(j));
            let v: f64 = modes
                .iter()
                .map(|&(p, q, a, phase)| match domain {
                    SweepDomain::PeriodicBox => a * (p * w1 * x1 + q * w2 * x2 + phase).cos(),
                    SweepDomain::Strip => a * (p * w1 * x1 + phase).cos() * (q * w2 * x2).sin(),
                })
                .sum();
            values.push(v.max(0.0));
        }
    }
    values
}

/// Explicit flow `u ← u + dt (Δ_h u + f(u))`, `dt = 0.2 h²`, until the
/// update drops below 1e-12.
fn parabolic_flow(init: &Field, nl: &Nonlinearity, max_steps: usize) -> (Field, usize, bool) {
    let lat = Lattice::new(&init.grid, &init.boundary);
    let dt = 0.2 * init.grid.h * init.grid.h;
    let mut u = init.values.clone();
    lat.apply_bc(&mut u);
    let mut r = vec![0.0; u.len()];
    let mut steps = 0;
    let mut steady = false;
    while steps < max_steps {
        let (rmax, _) = lat.residual(&u, nl, &mut r);
        if dt * rmax < 1e-12 {
            steady = true;
            break;
        }
        if !rmax.is_finite() {
            break;
        }
        for (p, v) in u.iter_mut().enumerate() {
            if lat.is_unknown(p) {
                *v += dt * r[p];
            }
        }
        lat.apply_bc(&mut u);
        steps += 1;
    }
    (Field { values: u, certificate: None, ..init.clone() }, steps, steady)
}

/// Newton from `init`; on failure the explicit flow from the same data.
fn settle(init: &Field, nl: &Nonlinearity, opts: &SweepOptions) -> (Field, String, usize, f64, Option<String>) {
    match newton_solve(init, nl, opts.tol) {
        Ok(f) => {
            let c = f.certificate.clone().expect("solver attaches a certificate");
            (f, "newton".into(), c.iterations, c.residual, None)
        }
        Err(e) => {
            let (f, steps, _) = parabolic_flow(init, nl, opts.max_flow_steps);
            let lat = Lattice::new(&f.grid, &f.boundary);
            let mut r = vec![0.0; f.values.len()];
            let residual = lat.residual(&f.values, nl, &mut r).0;
            (f, "parabolic".into(), steps, residual, Some(e.to_string()))
        }
    }
}

fn stats(values: &[f64]) -> (f64, f64, f64) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max, values.iter().sum::<f64>() / values.len() as f64)
}

/// Zero set over a range wide enough for the field's values.
fn zeros_covering(nl: &Nonlinearity, top: f64) -> Result<crate::nonlinearity::ZeroSet> {
    let scope = if top + 1.0 > nl.s_max { nl.with_s_max(top + 1.0)? } else { nl.clone() };
    zero_set(&scope, TOL_F, ZERO_GRID)
}

/// Runs one periodic-box trial from the given node values.
pub fn box_trial(nl: &Nonlinearity, grid: &Grid2D, init: Vec<f64>, trial: usize, opts: &SweepOptions) -> Result<(TrialRecord, Field)> {
    let start = Field::new(*grid, BoundarySpec::periodic_box(), init)?;
    let (u, method, iterations, residual, newton_error) = settle(&start, nl, opts);
    // Distinct nodes only: the periodic duplicates would bias the mean.
    let distinct: Vec<f64> = (0..grid.n1).flat_map(|i| (0..grid.n2).map(move |j| (i, j))).map(|(i, j)| u.at(i, j)).collect();
    let (min, max, mean) = stats(&distinct);
    let converged = residual <= opts.tol;
    let distance = if converged && mean.is_finite() { zeros_covering(nl, max.max(0.0))?.distance(mean) } else { f64::NAN };
    let rec = TrialRecord {
        trial,
        converged,
        method,
        iterations,
        residual,
        mean,
        min,
        max,
        deviation: max - min,
        distance,
        matched_z: None,
        newton_error,
    };
    Ok((rec, u))
}

/// Random trials on the fully periodic box.
pub fn periodic_box_sweep(nl: &Nonlinearity, trials: usize, grid: &Grid2D, seed: u64, opts: &SweepOptions) -> Result<SweepReport> {
    require_zeros(nl)?;
    let runs = (0..trials)
        .into_par_iter()
        .map(|k| {
            let init = random_initial(grid, SweepDomain::PeriodicBox, &mut trial_rng(seed, k));
            box_trial(nl, grid, init, k, opts).map(|(r, f)| (r, Some(f)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport::assemble(SweepDomain::PeriodicBox, nl, *grid, seed, opts, runs))
}

/// Runs one strip trial from the given node values.
pub fn strip_trial(nl: &Nonlinearity, grid: &Grid2D, init: Vec<f64>, trial: usize, opts: &SweepOptions) -> Result<(TrialRecord, Field)> {
    let start = Field::new(*grid, BoundarySpec::dirichlet_strip(grid), init)?;
    let (u, method, iterations, residual, newton_error) = settle(&start, nl, opts);
    let (min, max, mean) = stats(&u.values);
    let converged = residual <= opts.tol;
    let lateral = (0..=grid.n2)
        .map(|j| {
            let col = (0..grid.n1).map(|i| u.at(i, j));
            let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            hi - lo
        })
        .fold(0.0, f64::max);
    let (mut distance, mut matched_z) = (f64::NAN, None);
    if converged && max.is_finite() {
        let table = attractor_table(nl, max.max(0.0) + 0.5, ProblemKind::Quarter, &ProfileGrid::default())?;
        for c in table.candidates() {
            let d = profile_distance(&u, &c);
            if !(d >= distance) {
                distance = d;
                matched_z = Some(c.z());
            }
        }
    }
    let rec = TrialRecord {
        trial,
        converged,
        method,
        iterations,
        residual,
        mean,
        min,
        max,
        deviation: lateral,
        distance,
        matched_z,
        newton_error,
    };
    Ok((rec, u))
}

fn profile_distance(u: &Field, c: &Candidate) -> f64 {
    let g = &u.grid;
    let target: Vec<f64> = (0..=g.n2).map(|j| c.at(g.x2(j))).collect();
    (0..=g.n1).map(|i| u.row(i).iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)).fold(0.0, f64::max)
}

/// Random trials on the strip: periodic in `x1`, `u = 0` at `x2 = 0`,
/// Neumann-0 at `x2 = L2`.
pub fn halfspace_strip_sweep(nl: &Nonlinearity, trials: usize, grid: &Grid2D, seed: u64, opts: &SweepOptions) -> Result<SweepReport> {
    require_zeros(nl)?;
    let runs = (0..trials)
        .into_par_iter()
        .map(|k| {
            let init = random_initial(grid, SweepDomain::Strip, &mut trial_rng(seed, k));
            strip_trial(nl, grid, init, k, opts).map(|(r, f)| (r, Some(f)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport::assemble(SweepDomain::Strip, nl, *grid, seed, opts, runs))
}

/// Solution of `ξ' = f(ξ)`, `ξ(0) = m`, sampled on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorCurve {
    pub m: f64,
    pub t: Vec<f64>,
    pub xi: Vec<f64>,
    /// Time at which `|ξ|` exceeded `1e12` (end of the maximal interval).
    pub blow_up: Option<f64>,
    /// `f(m) > 0`: the curve leaves `m` upward immediately.
    pub increasing_at_zero: bool,
}

const FLOOR_SAMPLES: usize = 400;
const BLOW_UP: f64 = 1e12;

pub fn parabolic_floor(nl: &Nonlinearity, m: f64, t_max: f64) -> Result<FloorCurve> {
    if !(m >= 0.0) || !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidInput(format!("need m >= 0 and t_max > 0, got m={m}, t_max={t_max}")));
    }
    let rk = Rk4::with_tol(1e-12);
    let rhs = |_: f64, y: &[f64; 1]| [nl.value(y[0])];
    let dt = t_max / FLOOR_SAMPLES as f64;
    let mut t = vec![0.0];
    let mut xi = vec![m];
    let mut y = [m];
    let mut h = dt;
    let mut blow_up = None;
    for k in 1..=FLOOR_SAMPLES {
        let (a, b) = ((k - 1) as f64 * dt, k as f64 * dt);
        let escaped = |_: f64, y: &[f64; 1]| [BLOW_UP - y[0].abs()];
        match rk.advance(&rhs, a, y, b, &mut h, Some(&escaped)) {
            Ok(Leg::Reached { y: next }) => y = next,
            Ok(Leg::Event { t: te, .. }) => {
                blow_up = Some(te);
                break;
            }
            Err(Error::NonConvergence { .. }) => {
                blow_up = Some(a);
                break;
            }
            Err(e) => return Err(e),
        }
        t.push(b);
        xi.push(y[0]);
    }
    Ok(FloorCurve { m, t, xi, blow_up, increasing_at_zero: nl.value(m) > 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_curves() {
        let ld = parabolic_floor(&Nonlinearity::linear_decay(), 0.0, 1.0).unwrap();
        let k = ld.t.iter().position(|&t| (t - 0.5).abs() < 1e-12).unwrap();
        assert!((ld.xi[k] - (1.0 - (-0.5f64).exp())).abs() < 1e-10);
        assert!(ld.increasing_at_zero);

        let lg = parabolic_floor(&Nonlinearity::logistic(), 0.1, 20.0).unwrap();
        assert!(lg.xi.windows(2).all(|w| w[1] > w[0]));
        assert!(*lg.xi.last().unwrap() < 1.0 && *lg.xi.last().unwrap() > 0.99);

        let eq = parabolic_floor(&Nonlinearity::abs_sin(), PI, 5.0).unwrap();
        assert!(eq.xi.iter().all(|&v| (v - PI).abs() < 1e-12));
    }

    #[test]
    fn floor_blow_up_is_reported() {
        // ξ' = 1e13 leaves the 1e12 ball at t = 0.1.
        let c = Nonlinearity::constant(1e13).unwrap();
        let r = parabolic_floor(&c, 0.0, 1.0).unwrap();
        assert!((r.blow_up.unwrap() - 0.1).abs() < 1e-6);
    }

    #[test]
    fn rejects_nonlinearity_without_zeros() {
        let g = Grid2D::new(8.0, 8.0, 0.5).unwrap();
        let c = Nonlinearity::constant(1.0).unwrap();
        assert!(matches!(periodic_box_sweep(&c, 2, &g, 1, &SweepOptions::default()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn constant_at_zero_is_fixed() {
        let g = Grid2D::new(8.0, 8.0, 0.5).unwrap();
        let (rec, _) = box_trial(&Nonlinearity::abs_sin(), &g, vec![PI; g.nodes()], 0, &SweepOptions::default()).unwrap();
        assert!(rec.converged);
        assert_eq!(rec.iterations, 0);
        assert_eq!(rec.deviation, 0.0);
    }

    #[test]
    fn zero_strip_stays_zero() {
        let g = Grid2D::new(4.0, 5.0, 0.25).unwrap();
        let (rec, u) = strip_trial(&Nonlinearity::abs_sin(), &g, vec![0.0; g.nodes()], 0, &SweepOptions::default()).unwrap();
        assert!(rec.converged);
        assert!(u.values.iter().all(|&v| v == 0.0));
        assert_eq!(rec.matched_z, Some(0.0));
    }

    #[test]
    fn small_box_sweep_is_reproducible() {
        let g = Grid2D::new(8.0, 8.0, 0.5).unwrap();
        let nl = Nonlinearity::abs_sin();
        let a = periodic_box_sweep(&nl, 4, &g, 11, &SweepOptions::default()).unwrap();
        let b = periodic_box_sweep(&nl, 4, &g, 11, &SweepOptions::default()).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.constant_count, a.converged);
        assert!(a.all_classified(1e-4, 1e-3), "{:#?}", a.records);
    }

    #[test]
    fn initial_data_is_nonnegative_and_seeded() {
        let g = Grid2D::new(8.0, 8.0, 0.5).unwrap();
        let a = random_initial(&g, SweepDomain::PeriodicBox, &mut trial_rng(3, 1));
        let b = random_initial(&g, SweepDomain::PeriodicBox, &mut trial_rng(3, 1));
        let c = random_initial(&g, SweepDomain::PeriodicBox, &mut trial_rng(3, 2));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|&v| v >= 0.0));
    }
}
