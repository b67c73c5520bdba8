//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Oracles are computed here, independently of the library paths
//! they check.

use elliptic_lab::elliptic::{
    bubble_energy, dirichlet_eigenpair, growth_scan, radial_bubble, sliding::default_steps, sliding_verify, solve_half, solve_quarter,
    BoundarySpec, Field, Grid2D, Method, SolverOptions,
};
use elliptic_lab::liouville::{halfspace_strip_sweep, periodic_box_sweep, SweepOptions, SweepReport};
use elliptic_lab::nonlinearity::{cantor_intervals, compute_zf, Nonlinearity, TOL_BIG_F, TOL_F};
use elliptic_lab::profile1d::compute_profile;
use elliptic_lab::trace::bump;
use elliptic_lab::trajectory::{
    attractor_table, estimate_m, omega_limit, shift, window_extrema, OmegaOptions, ProblemKind, ProfileGrid, TrajectoryReport, Window,
    DEFAULT_WINDOW_FRACS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

const SWEEP_SEED: u64 = 20240601;
const SWEEP_TRIALS: usize = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn run(id: &str, title: &str, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let o = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|_| outcome(false, "panicked".into()));
    let verdict = if o.pass { "PASS" } else { "FAIL" };
    println!("{id} {verdict} {title}: {} [{:.2}s]", o.detail, t.elapsed().as_secs_f64());
    o.pass
}

// ---------- independent oracles ----------

/// Smallest positive zero of J0 from its power series, by bisection.
fn j0_first_zero() -> f64 {
    let j0 = |x: f64| {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            term *= -(x / 2.0).powi(2) / (k as f64 * k as f64);
            sum += term;
        }
        sum
    };
    let (mut a, mut b) = (2.0, 3.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if j0(a) * j0(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

/// Brute-force `Z_f` for the level-`level` Cantor distance: trapezoid `F` on
/// `n` points, members are the starts of zero runs where `F` exceeds every
/// value a few nodes earlier.
fn cantor_zf_oracle(level: u32, n: usize) -> Vec<f64> {
    let mut iv = vec![(0.0f64, 1.0f64)];
    for _ in 0..level {
        iv = iv
            .iter()
            .flat_map(|&(a, b)| {
                let t = (b - a) / 3.0;
                [(a, a + t), (b - t, b)]
            })
            .collect();
    }
    let dist = |s: f64| {
        iv.iter()
            .map(|&(a, b)| {
                if s < a {
                    a - s
                } else if s > b {
                    s - b
                } else {
                    0.0
                }
            })
            .fold(f64::INFINITY, f64::min)
    };
    let h = 1.0 / (n - 1) as f64;
    let f: Vec<f64> = (0..n).map(|i| dist(i as f64 * h)).collect();
    let mut big_f = vec![0.0; n];
    for i in 1..n {
        big_f[i] = big_f[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
    }
    // Strictness is judged against F up to `lag` nodes before the candidate,
    // so round-off in `dist` cannot shift a run start onto a flat stretch.
    let lag = 10;
    let mut out = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        if i >= lag {
            best = best.max(big_f[i - lag]);
        }
        let zero = f[i] <= 1e-12;
        let starts_run = zero && (i == 0 || f[i - 1] > 1e-12);
        if starts_run && (i < lag || big_f[i] > best + 1e-12) {
            out.push(i as f64 * h);
        }
    }
    out
}

// ---------- shared experiments (also used for the determinism check) ----------

struct Solved {
    field: Field,
    report: TrajectoryReport,
}

impl Solved {
    fn bytes(&self) -> Vec<u8> {
        let mut b = self.field.to_csv().into_bytes();
        b.extend(serde_json::to_vec(&self.report).unwrap());
        b.extend(serde_json::to_vec(&self.field.certificate).unwrap());
        b
    }
}

fn quarter_experiment() -> Solved {
    let nl = Nonlinearity::linear_decay();
    let g = Grid2D::new(60.0, 30.0, 0.25).unwrap();
    let trace = (0..=g.n2).map(|j| bump(g.x2(j), 10.0, 5.0, 0.5)).collect();
    let bc = BoundarySpec::quarter(&g, trace).unwrap();
    let field = solve_quarter(&nl, &bc, &g, &SolverOptions::with(Method::Newton, 1e-10)).unwrap();
    let opts = OmegaOptions::default();
    let m = estimate_m(&field, &DEFAULT_WINDOW_FRACS).unwrap().m_sup;
    let table = attractor_table(&nl, m + opts.conv_tol, ProblemKind::Quarter, &ProfileGrid::default()).unwrap();
    let report = omega_limit(&field, &table.candidates(), &opts).unwrap();
    Solved { field, report }
}

fn half_experiment(nl: &Nonlinearity, level: f64) -> Solved {
    let g = Grid2D::new(60.0, 20.0, 0.25).unwrap();
    let bc = BoundarySpec::half(&g, vec![level; g.n2 + 1]).unwrap();
    let field = solve_half(nl, &bc, &g, &SolverOptions::with(Method::Newton, 1e-10)).unwrap();
    let opts = OmegaOptions { x2_window: 1.0, ..OmegaOptions::default() };
    let m = estimate_m(&field, &DEFAULT_WINDOW_FRACS).unwrap().m_sup;
    let table = attractor_table(nl, m + opts.conv_tol, ProblemKind::Half, &ProfileGrid::default()).unwrap();
    let report = omega_limit(&field, &table.candidates(), &opts).unwrap();
    Solved { field, report }
}

fn sweeps() -> (SweepReport, SweepReport) {
    let nl = Nonlinearity::abs_sin();
    let bx = Grid2D::new(32.0, 32.0, 0.5).unwrap();
    let strip = Grid2D::new(16.0, 20.0, 0.25).unwrap();
    let o = SweepOptions::default();
    (
        periodic_box_sweep(&nl, SWEEP_TRIALS, &bx, SWEEP_SEED, &o).unwrap(),
        halfspace_strip_sweep(&nl, SWEEP_TRIALS, &strip, SWEEP_SEED, &o).unwrap(),
    )
}

fn sweep_bytes(r: &(SweepReport, SweepReport)) -> Vec<u8> {
    let mut b = serde_json::to_vec(&r.0).unwrap();
    b.extend(serde_json::to_vec(&r.1).unwrap());
    b
}

// ---------- criteria ----------

fn c1() -> Outcome {
    let t = Instant::now();
    let p = compute_profile(&Nonlinearity::abs_sin(), PI, 10.0, 1000).unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    let err = p.xi.iter().zip(&p.values).map(|(&x, &v)| (v - (4.0 * x.exp().atan() - PI)).abs()).fold(0.0, f64::max);
    let slope = (p.slope0 - 2.0).abs();
    outcome(
        err < 1e-6 && slope < 1e-8 && elapsed < 1.0,
        format!("max |V - 4 atan(e^x) + pi| = {err:.2e} on [0,10], |V'(0) - 2| = {slope:.2e}, build {elapsed:.3}s"),
    )
}

fn c2() -> Outcome {
    let sin = Nonlinearity::abs_sin();
    let cantor = Nonlinearity::cantor(3).unwrap();
    let mut cases: Vec<(String, Nonlinearity, f64)> = vec![
        ("logistic z=1".into(), Nonlinearity::logistic(), 1.0),
        ("abs-sin z=pi".into(), sin.clone(), PI),
        ("abs-sin z=2pi".into(), sin, 2.0 * PI),
    ];
    for (a, _) in cantor_intervals(3).into_iter().filter(|iv| iv.0 > 0.0) {
        cases.push((format!("cantor:3 z={a:.6}"), cantor.clone(), a));
    }
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (name, nl, z) in &cases {
        match compute_profile(nl, *z, 40.0, 4000) {
            Ok(p) => worst = worst.max(p.first_integral_error),
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    outcome(
        failures.is_empty() && worst < 1e-8,
        format!(
            "{} profiles, max |W^2 - 2(F(z) - F(V))| = {worst:.2e}{}",
            cases.len(),
            if failures.is_empty() { String::new() } else { format!("; errors: {failures:?}") }
        ),
    )
}

fn c3() -> Outcome {
    let t = Instant::now();
    let got = compute_zf(&Nonlinearity::cantor(3).unwrap(), TOL_F, TOL_BIG_F, 100_000).unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    let oracle = cantor_zf_oracle(3, 1_000_000);
    let expected: Vec<f64> = cantor_intervals(3).into_iter().map(|iv| iv.0).collect();
    let same_len = got.points.len() == oracle.len() && oracle.len() == expected.len();
    let err = if same_len { got.points.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) } else { f64::INFINITY };
    outcome(
        same_len && err < 1e-5 && elapsed < 5.0,
        format!("{} members (oracle {}), max endpoint error {err:.2e}, {elapsed:.2}s", got.points.len(), oracle.len()),
    )
}

fn c4(s: &Solved, elapsed: f64) -> Outcome {
    let nl = Nonlinearity::linear_decay();
    let res = s.field.certificate.as_ref().unwrap().residual;
    let g = &s.field.grid;
    // Profile oracle for f = 1 - s: V(x) = 1 - e^{-x}.
    let i50 = (50.0 / g.h).round() as usize;
    let j20 = (20.0 / g.h).round() as usize;
    let dev = (0..=j20).map(|j| (s.field.at(i50, j) - (1.0 - (-g.x2(j)).exp())).abs()).fold(0.0, f64::max);
    let (inf, _) = window_extrema(&s.field, &Window { x1: (25.0, g.l1), x2: (25.0, g.l2) }).unwrap();
    let detected = s.report.detected_z.is_some_and(|z| (z - 1.0).abs() < 1e-9 && nl.value(z).abs() < TOL_F);
    outcome(
        res < 1e-8 && detected && dev < 5e-2 && inf > 1.0 - 5e-2 && elapsed < 60.0,
        format!(
            "residual {res:.2e}, detected z = {:?}, sup|u(50,.) - V| on [0,20] = {dev:.2e}, inf over x1,x2 >= 25 = {inf:.6}",
            s.report.detected_z
        ),
    )
}

fn c5(s: &Solved, elapsed: f64) -> Outcome {
    let r = &s.report;
    let z = r.detected_z;
    let in_set = z.is_some_and(|z| (z - PI).abs() < 1e-9 || (z - 2.0 * PI).abs() < 1e-9);
    let gap = z.map_or(f64::INFINITY, |z| (z - r.m_estimate).abs());
    outcome(
        r.converged && r.margin_ratio >= 2.0 && in_set && gap < 1e-2 && r.final_distance < 1e-2 && elapsed < 60.0,
        format!("detected z = {z:?}, margin {:.2e}, |z - M| = {gap:.2e}, final distance {:.2e}", r.margin_ratio, r.final_distance),
    )
}

fn c6() -> Outcome {
    let nl = Nonlinearity::linear_decay();
    let s = half_experiment(&nl, 3.0);
    let z = s.report.detected_z;
    let ok = z.is_some_and(|z| z >= 1.0 - 1e-9 && nl.value(z).abs() < 1e-6);
    outcome(ok, format!("detected constant {z:?} (mu = 1), f(z) = {:.2e}", z.map_or(f64::NAN, |z| nl.value(z))))
}

fn c7() -> Outcome {
    let g = Nonlinearity::logistic();
    let b = radial_bubble(&g, 1.0, 0.1, 2).unwrap();
    let tight = radial_bubble(&g, 1.0, 0.05, 2).unwrap();
    let e = bubble_energy(&b, &g, 1.0).unwrap();
    let scan = growth_scan(&g, 1.0, 0.1, 2, &[5.0, 10.0, 20.0]).unwrap();
    let shape = (0.9..1.0).contains(&b.v0) && b.v.iter().all(|&v| v < 1.0) && *b.v.last().unwrap() == 0.0;
    let gap = scan.plateau_exponent - scan.ramp_exponent;
    outcome(
        shape && tight.r_prime >= b.r_prime && e.i_v <= e.i_w && gap >= 0.8,
        format!(
            "v(0) = {:.4}, R'(0.1) = {:.4}, R'(0.05) = {:.4}, I(v) = {:.4} <= I(w) = {:.4}, exponents {:.3} vs {:.3}",
            b.v0, b.r_prime, tight.r_prime, e.i_v, e.i_w, scan.ramp_exponent, scan.plateau_exponent
        ),
    )
}

fn c8() -> Outcome {
    let oracle = j0_first_zero().powi(2);
    let e1 = dirichlet_eigenpair(2, 1.0, 400).unwrap();
    let e_half = dirichlet_eigenpair(2, 1.0, 200).unwrap();
    let rich = (4.0 * e1.lambda - e_half.lambda) / 3.0;
    let e2 = dirichlet_eigenpair(2, 2.0, 400).unwrap();
    let scaling = ((4.0 * e2.lambda - e1.lambda) / e1.lambda).abs();
    let err = (e1.lambda - oracle).abs();
    outcome(
        err < 1e-3 && (rich - oracle).abs() < 1e-3 && scaling < 1e-8,
        format!("lambda = {:.6} (oracle {oracle:.6}, Richardson {rich:.6}), scaling error {scaling:.1e}", e1.lambda),
    )
}

fn c9(s: &Solved) -> Outcome {
    let g = Nonlinearity::linear_decay();
    let b = radial_bubble(&g, 1.0, 0.1, 2).unwrap();
    let (from, to) = ([15.0, 10.0], [45.0, 10.0]);
    let rep = sliding_verify(&s.field, &b, from, to, default_steps(from, to)).unwrap();
    outcome(
        rep.holds() && rep.implied_lower_bound >= b.v0 - 1e-3,
        format!(
            "{} placements, min margin {:.4e}, implied u >= {:.6} (v(0) = {:.4})",
            rep.margins.len(),
            rep.min_margin,
            rep.implied_lower_bound,
            b.v0
        ),
    )
}

fn c10(r: &(SweepReport, SweepReport), elapsed: f64) -> Outcome {
    let (bx, strip) = r;
    let box_ok = bx.converged > 0 && bx.constant_count == bx.converged && bx.all_classified(1e-4, 1e-3);
    let strip_ok = strip.converged > 0 && strip.all_classified(1e-4, 1e-2);
    outcome(
        box_ok && strip_ok && elapsed < 120.0,
        format!(
            "box {}/{} converged, {} constant, max dev {:.1e}, max dist to E {:.1e}; strip {}/{} converged, max lateral {:.1e}, max profile dist {:.1e}",
            bx.converged, bx.trials, bx.constant_count, bx.max_deviation, bx.zero_distance,
            strip.converged, strip.trials, strip.max_deviation, strip.zero_distance
        ),
    )
}

fn c11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = 0;
    for _ in 0..100 {
        let h = [0.25, 0.5, 1.0][rng.random_range(0..3)];
        let n1 = rng.random_range(4..40);
        let n2 = rng.random_range(2..20);
        let g = Grid2D::new(n1 as f64 * h, n2 as f64 * h, h).unwrap();
        let values: Vec<f64> = (0..g.nodes()).map(|_| rng.random_range(0.0..10.0)).collect();
        let bc = BoundarySpec::quarter(&g, values[..g.row_len()].to_vec()).unwrap();
        let u = Field::new(g, bc, values).unwrap();
        let a = rng.random_range(0..n1 / 2) as f64 * h;
        let b = rng.random_range(0..n1 / 2) as f64 * h;
        let id = shift(&u, 0.0).unwrap();
        let two = shift(&shift(&u, a).unwrap(), b).unwrap();
        let one = shift(&u, a + b).unwrap();
        let same = |x: &[f64], y: &[f64]| x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits());
        if !(same(&id.values, &u.values) && same(&two.values, &one.values) && two.grid == one.grid) {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("100 random fields, {failures} violations of identity/composition"))
}

fn c12(reference: &[(&str, Vec<u8>)]) -> Outcome {
    let mut mismatches = Vec::new();
    for threads in [1, 2, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let outputs = pool.install(|| {
            [
                ("quarter", quarter_experiment().bytes()),
                ("half", half_experiment(&Nonlinearity::abs_sin(), 5.0).bytes()),
                ("sweeps", sweep_bytes(&sweeps())),
            ]
        });
        for ((name, want), (_, got)) in reference.iter().zip(&outputs) {
            if want != got {
                mismatches.push(format!("{name}@{threads}"));
            }
        }
    }
    outcome(
        mismatches.is_empty(),
        format!(
            "outputs of the quarter, half and sweep runs at 1/2/8 threads vs reference: {} mismatches {mismatches:?}",
            mismatches.len()
        ),
    )
}

fn main() {
    let mut all = true;
    all &= run("C1", "profile closed form", c1);
    all &= run("C2", "first-integral conservation", c2);
    all &= run("C3", "Z_f of cantor:3", c3);

    let t = Instant::now();
    let quarter = quarter_experiment();
    let t_quarter = t.elapsed().as_secs_f64();
    all &= run("C4", "quarter-plane convergence to the profile", || c4(&quarter, t_quarter));

    let t = Instant::now();
    let half = half_experiment(&Nonlinearity::abs_sin(), 5.0);
    let t_half = t.elapsed().as_secs_f64();
    all &= run("C5", "half-plane convergence to a constant", || c5(&half, t_half));

    all &= run("C6", "half-plane limit above mu", c6);
    all &= run("C7", "radial bubble and energies", c7);
    all &= run("C8", "Dirichlet eigenpair", c8);
    all &= run("C9", "sliding the bubble", || c9(&quarter));

    let t = Instant::now();
    let sw = sweeps();
    let t_sweeps = t.elapsed().as_secs_f64();
    all &= run("C10", "Liouville sweeps", || c10(&sw, t_sweeps));

    all &= run("C11", "semiflow laws", c11);
    let reference = [("quarter", quarter.bytes()), ("half", half.bytes()), ("sweeps", sweep_bytes(&sw))];
    all &= run("C12", "determinism across thread counts", || c12(&reference));

    if !all {
        eprintln!("acceptance: at least one criterion failed");
        std::process::exit(1);
    }
}
