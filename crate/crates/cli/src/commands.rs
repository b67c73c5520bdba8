//! Subcommand implementations. Each returns normally on success and leaves
//! exit-code mapping to `main`.

use crate::config::{ExperimentConfig, GridConfig};
use crate::error::{CliError, CliResult};
use crate::output::OutputDir;
use elliptic_lab::elliptic::{
    bubble_energy, dirichlet_eigenpair, growth_scan, radial_bubble, sliding::default_steps, sliding_verify, solve_half, solve_quarter,
    BoundarySpec, Field, Grid2D, RadialBubble, SlideReport,
};
use elliptic_lab::liouville::{halfspace_strip_sweep, periodic_box_sweep, SweepReport};
use elliptic_lab::nonlinearity::{check_hypotheses, compute_zf, zero_set, ZeroSet, TOL_BIG_F, TOL_F};
use elliptic_lab::plot::distance_plot;
use elliptic_lab::profile1d::{compute_profile, Profile1D};
use elliptic_lab::trajectory::{attractor_table, estimate_m, omega_limit, AttractorEstimate, ProblemKind, TrajectoryReport, ZERO_GRID};
use elliptic_lab::Nonlinearity;
use serde::Serialize;
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::Path;

/// Sweep classification thresholds: lateral variation and distance to `E`
/// (box) or to the nearest profile (strip).
const BOX_DIST_TOL: f64 = 1e-3;
const STRIP_DIST_TOL: f64 = 1e-2;

pub fn analysis_value(nl: &Nonlinearity, grid_n: usize) -> CliResult<Value> {
    let hyp = check_hypotheses(nl)?;
    let e = zero_set(nl, TOL_F, grid_n)?;
    let zf = compute_zf(nl, TOL_F, TOL_BIG_F, grid_n)?;
    Ok(json!({
        "nonlinearity": nl.name(),
        "s_max": nl.s_max,
        "f0": nl.value(0.0),
        "hypotheses": hyp,
        "zero_set": e,
        "zf": zf,
    }))
}

pub fn analyze_f(nl: &Nonlinearity, out: &mut OutputDir) -> CliResult<()> {
    let v = analysis_value(nl, ZERO_GRID)?;
    let e: ZeroSet = serde_json::from_value(v["zero_set"].clone()).expect("zero set round-trips");
    let zf: ZeroSet = serde_json::from_value(v["zf"].clone()).expect("zero set round-trips");
    println!("f = {} on [0, {}], f(0) = {:.6e}", nl.name(), nl.s_max, nl.value(0.0));
    println!("E: {} points, {} intervals", e.points.len(), e.intervals.len());
    println!("Z_f: {}", fmt_list(&zf.points));
    for (key, label) in [
        ("positive_then_nonpositive", "f > 0 then f <= 0 past mu"),
        ("nonnegative_with_transversal_zeros", "f >= 0 with transversal zeros"),
        ("left_transversal_beyond_mu", "zeros beyond mu are left-transversal"),
    ] {
        println!("{label}: {}", v["hypotheses"][key].as_str().unwrap_or("?"));
    }
    out.write_json("analysis.json", &v)?;
    Ok(())
}

pub fn zf(nl: &Nonlinearity, grid_n: usize, out: &mut OutputDir) -> CliResult<()> {
    let zf = compute_zf(nl, TOL_F, TOL_BIG_F, grid_n)?;
    println!("Z_f ({} members): {}", zf.points.len(), fmt_list(&zf.points));
    if !zf.borderline.is_empty() {
        println!("borderline: {}", fmt_list(&zf.borderline));
    }
    out.write_json("zf.json", &zf)?;
    Ok(())
}

fn fmt_list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.10}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn profile_file_name(z: f64) -> String {
    format!("profile_z={z:.6}.csv")
}

/// Profile metadata without the node arrays, which go to the CSV.
fn profile_meta(p: &Profile1D) -> Value {
    let mut v = serde_json::to_value(p).expect("profile serializes");
    if let Value::Object(m) = &mut v {
        for k in ["xi", "values", "slopes"] {
            m.remove(k);
        }
        m.insert("xi_max".into(), json!(p.xi_max()));
        m.insert("nodes".into(), json!(p.xi.len()));
    }
    v
}

pub fn profile(nl: &Nonlinearity, z: f64, xi_max: f64, n: usize, out: &mut OutputDir) -> CliResult<()> {
    let p = compute_profile(nl, z, xi_max, n)?;
    println!(
        "V_z for z = {z}: V'(0) = {:.12}, first-integral error {:.2e}, residual {:.2e} (tol {:.2e})",
        p.slope0, p.first_integral_error, p.smooth_residual, p.residual_tol
    );
    out.write(&profile_file_name(z), p.to_csv())?;
    out.write_json("profile.json", &profile_meta(&p))?;
    Ok(())
}

/// Boundary conditions and grid of a configured solve.
pub fn boundary(cfg: &ExperimentConfig, nl: &Nonlinearity) -> CliResult<(Grid2D, BoundarySpec)> {
    let g = cfg.domain.grid()?;
    let trace = cfg.domain.trace.sample(g.n2, g.h, nl)?;
    let bc = match cfg.domain.kind {
        ProblemKind::Quarter => BoundarySpec::quarter(&g, trace)?,
        ProblemKind::Half => BoundarySpec::half(&g, trace)?,
    };
    Ok((g, bc))
}

pub fn solve_field(cfg: &ExperimentConfig, nl: &Nonlinearity) -> CliResult<Field> {
    let (g, bc) = boundary(cfg, nl)?;
    let u = match cfg.domain.kind {
        ProblemKind::Quarter => solve_quarter(nl, &bc, &g, &cfg.solver)?,
        ProblemKind::Half => solve_half(nl, &bc, &g, &cfg.solver)?,
    };
    let c = u.certificate.as_ref().expect("solver attaches a certificate");
    println!(
        "solved {} on {} x {} (h = {}): {} in {} iterations, residual {:.2e}",
        kind_name(cfg.domain.kind),
        g.l1,
        g.l2,
        g.h,
        c.method,
        c.iterations,
        c.residual
    );
    Ok(u)
}

pub fn kind_name(k: ProblemKind) -> &'static str {
    match k {
        ProblemKind::Quarter => "quarter",
        ProblemKind::Half => "half",
    }
}

pub fn solve_summary(cfg: &ExperimentConfig, u: &Field) -> Value {
    json!({
        "nonlinearity": cfg.nonlinearity.spec,
        "kind": kind_name(cfg.domain.kind),
        "grid": u.grid,
        "trace": cfg.domain.trace,
        "boundary": u.boundary.describe(),
        "certificate": u.certificate,
        "min": u.min(),
        "max": u.max(),
    })
}

/// Reads a field written by `Field::to_csv`, inferring the grid from the
/// coordinates and the left trace from the first cross-section.
pub fn load_field(path: &Path, kind: ProblemKind) -> CliResult<Field> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read field {}", path.display()), e))?;
    let bad = |m: String| CliError::Validation(format!("{}: {m}", path.display()));
    let mut coords = text.lines().skip(1).filter(|l| !l.trim().is_empty()).map(|l| {
        let mut it = l.split(',');
        let x1 = it.next().and_then(|s| s.trim().parse::<f64>().ok());
        let x2 = it.next().and_then(|s| s.trim().parse::<f64>().ok());
        (x1, x2)
    });
    let (l1, l2, h) = {
        let first = coords.next().ok_or_else(|| bad("no data rows".into()))?;
        let second = coords.next().ok_or_else(|| bad("fewer than two data rows".into()))?;
        let h = match (first, second) {
            ((Some(_), Some(a)), (Some(_), Some(b))) => b - a,
            _ => return Err(bad("unparsable coordinates".into())),
        };
        let last = text.lines().rev().find(|l| !l.trim().is_empty()).expect("nonempty");
        let mut it = last.split(',').map(|s| s.trim().parse::<f64>());
        match (it.next(), it.next()) {
            (Some(Ok(l1)), Some(Ok(l2))) => (l1, l2, h),
            _ => return Err(bad("unparsable last row".into())),
        }
    };
    let g = Grid2D::new(l1, l2, h).map_err(|e| bad(e.to_string()))?;
    let values = Field::values_from_csv(&g, &text).map_err(|e| bad(e.to_string()))?;
    let trace = values[..g.row_len()].to_vec();
    let bc = match kind {
        ProblemKind::Quarter => BoundarySpec::quarter(&g, trace),
        ProblemKind::Half => BoundarySpec::half(&g, trace),
    }
    .map_err(|e| bad(e.to_string()))?;
    Field::new(g, bc, values).map_err(|e| bad(e.to_string()))
}

pub struct Trajectory {
    pub report: TrajectoryReport,
    pub table: AttractorEstimate,
}

pub fn trajectory(cfg: &ExperimentConfig, nl: &Nonlinearity, u: &Field) -> CliResult<Trajectory> {
    let a = &cfg.analysis;
    let levels = estimate_m(u, &a.window_fracs)?;
    let table = attractor_table(nl, levels.m_sup + a.omega.conv_tol, cfg.domain.kind, &a.profile_grid)?;
    let report = omega_limit(u, &table.candidates(), &a.omega)?;
    match report.detected_z {
        Some(z) => println!(
            "limit along x1: z = {z:.10} (final distance {:.2e}, margin {:.2e}, tail slope {:.3e})",
            report.final_distance, report.margin_ratio, report.tail_slope
        ),
        None => {
            println!("limit along x1 not detected: best final distance {:.2e}, margin {:.2e}", report.final_distance, report.margin_ratio)
        }
    }
    Ok(Trajectory { report, table })
}

/// Writes the trajectory report, its plot and the candidate profiles.
pub fn write_trajectory(t: &Trajectory, out: &mut OutputDir) -> CliResult<()> {
    out.write_json("trajectory.json", &t.report)?;
    out.write_json("attractor.json", &t.table)?;
    out.write("trajectory.svg", distance_plot(&t.report)?)?;
    for e in &t.table.elements {
        if let Some(p) = &e.profile {
            out.write(&profile_file_name(e.z), p.to_csv())?;
        }
    }
    Ok(())
}

pub fn bubble(g: &Nonlinearity, z: f64, eps: f64, dim: usize, radii: &[f64], out: &mut OutputDir) -> CliResult<RadialBubble> {
    let b = radial_bubble(g, z, eps, dim)?;
    let energy = bubble_energy(&b, g, z)?;
    println!("bubble: v(0) = {:.10}, R' = {:.6}, I(v) = {:.6e}, I(w) = {:.6e}", b.v0, b.r_prime, energy.i_v, energy.i_w);
    let scan = if radii.is_empty() { None } else { Some(growth_scan(g, z, eps, dim, radii)?) };
    if let Some(s) = &scan {
        println!("growth exponents: ramp {:.4}, plateau {:.4}", s.ramp_exponent, s.plateau_exponent);
    }
    let mut csv = String::from("r,v\n");
    for (r, v) in b.r.iter().zip(&b.v) {
        let _ = writeln!(csv, "{r:.16e},{v:.16e}");
    }
    out.write("bubble.csv", csv)?;
    out.write_json(
        "bubble.json",
        &json!({
            "nonlinearity": g.name(),
            "dimension": dim,
            "z": z,
            "eps": eps,
            "v0": b.v0,
            "r_prime": b.r_prime,
            "attempts": b.attempts,
            "energy": energy,
            "growth": scan,
        }),
    )?;
    Ok(b)
}

pub fn eigen(dim: usize, radius: f64, n: usize, out: &mut OutputDir) -> CliResult<()> {
    let e = dirichlet_eigenpair(dim, radius, n)?;
    println!("lambda_1 = {:.12} (Rayleigh {:.12}), {} iterations", e.lambda, e.rayleigh, e.iterations);
    let mut csv = String::from("r,phi\n");
    for (r, p) in e.r.iter().zip(&e.phi) {
        let _ = writeln!(csv, "{r:.16e},{p:.16e}");
    }
    out.write("eigen.csv", csv)?;
    out.write_json(
        "eigen.json",
        &json!({ "dimension": e.dimension, "radius": e.radius, "lambda": e.lambda, "rayleigh": e.rayleigh, "iterations": e.iterations, "n": n }),
    )?;
    Ok(())
}

pub fn slide(u: &Field, b: &RadialBubble, from: [f64; 2], to: [f64; 2], steps: Option<usize>) -> CliResult<SlideReport> {
    let r = sliding_verify(u, b, from, to, steps.unwrap_or_else(|| default_steps(from, to)))?;
    println!(
        "slide {:?} -> {:?}: {} placements, min margin {:.4e}, implied u >= {:.6}{}",
        from,
        to,
        r.steps + 1,
        r.min_margin,
        r.implied_lower_bound,
        r.failed_at.map_or(String::new(), |t| format!(", ordering lost at t = {t:.4}"))
    );
    Ok(r)
}

/// Report without the per-placement margins, which can be long.
pub fn slide_value(r: &SlideReport) -> Value {
    let mut v = serde_json::to_value(r).expect("slide report serializes");
    if let Value::Object(m) = &mut v {
        m.insert("holds".into(), json!(r.holds()));
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepWhich {
    Box,
    Strip,
}

pub fn sweep(
    nl: &Nonlinearity,
    which: SweepWhich,
    trials: usize,
    grid: &GridConfig,
    seed: u64,
    opts: &elliptic_lab::liouville::SweepOptions,
    out: &mut OutputDir,
) -> CliResult<SweepReport> {
    let g = grid.grid()?;
    let (r, name) = match which {
        SweepWhich::Box => (periodic_box_sweep(nl, trials, &g, seed, opts)?, "box"),
        SweepWhich::Strip => (halfspace_strip_sweep(nl, trials, &g, seed, opts)?, "strip"),
    };
    println!("{}", r.banner);
    println!(
        "{name} sweep: {}/{} converged, {} classified, max deviation {:.2e}, max distance {:.2e}",
        r.converged, r.trials, r.constant_count, r.max_deviation, r.zero_distance
    );
    out.write_json(&format!("sweep_{name}.json"), &r)?;
    if out.dump_fields {
        for (k, f) in r.fields.iter().enumerate() {
            if let Some(f) = f {
                out.write(&format!("sweep_{name}_trial{k:03}.csv"), f.to_csv())?;
            }
        }
    }
    Ok(r)
}

pub fn sweep_holds(r: &SweepReport, which: SweepWhich) -> bool {
    let dist = match which {
        SweepWhich::Box => BOX_DIST_TOL,
        SweepWhich::Strip => STRIP_DIST_TOL,
    };
    r.converged == r.trials && r.constant_count == r.converged && r.all_classified(f64::INFINITY, dist)
}

pub fn plot(report: &Path, svg: &Path) -> CliResult<()> {
    let text = std::fs::read_to_string(report).map_err(|e| CliError::io(format!("cannot read report {}", report.display()), e))?;
    let r: TrajectoryReport = serde_json::from_str(&text).map_err(|e| {
        CliError::Validation(format!("{}: line {}, column {}: not a trajectory report: {e}", report.display(), e.line(), e.column()))
    })?;
    let s = distance_plot(&r)?;
    std::fs::write(svg, s).map_err(|e| CliError::io(format!("cannot write {}", svg.display()), e))?;
    Ok(())
}

/// One verdict line of `run`.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: String) -> Self {
        let c = Self { name: name.into(), pass, detail };
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        c
    }
}

/// The full pipeline: analyze `f`, solve, identify the limit along `x1`,
/// then the optional sweeps and sliding check.
pub fn run(cfg: &ExperimentConfig, out: &mut OutputDir) -> CliResult<Vec<Check>> {
    let nl = cfg.nonlinearity()?;
    out.write("config.json", cfg.to_json() + "\n")?;
    let analysis = analysis_value(&nl, ZERO_GRID)?;
    out.write_json("analysis.json", &analysis)?;
    let zf: ZeroSet = serde_json::from_value(analysis["zf"].clone()).expect("zero set round-trips");
    let e: ZeroSet = serde_json::from_value(analysis["zero_set"].clone()).expect("zero set round-trips");

    let u = solve_field(cfg, &nl)?;
    out.write("field.csv", u.to_csv())?;
    let t = trajectory(cfg, &nl, &u)?;
    write_trajectory(&t, out)?;

    let mut checks = Vec::new();
    let res = u.certificate.as_ref().map_or(f64::NAN, |c| c.residual);
    checks.push(Check::new(
        "discrete solve",
        res <= cfg.solver.tol,
        format!("max |Δ_h u + f(u)| = {res:.2e} (tol {:.1e}), min u = {:.3e}", cfg.solver.tol, u.min()),
    ));
    let z = t.report.detected_z;
    match cfg.domain.kind {
        ProblemKind::Quarter => {
            let in_zf = z.is_some_and(|z| zf.points.iter().any(|&p| (p - z).abs() <= 1e-9));
            checks.push(Check::new(
                "limit is a profile V_z with z in Z_f",
                t.report.converged && in_zf,
                format!("z = {z:?}, Z_f ∩ [0, M_cap] = {}, final distance {:.2e}", fmt_list(&t.report.candidates), t.report.final_distance),
            ));
            if nl.value(0.0) > TOL_F {
                checks.push(Check::new("f(0) > 0 rules out the zero limit", z.is_some_and(|z| z > 0.0), format!("z = {z:?}")));
            }
            checks.push(Check::new(
                "profile slopes increase with z",
                t.table.slopes_injective(),
                format!("{} profile candidates", t.table.elements.iter().filter(|e| e.slope0.is_some()).count()),
            ));
        }
        ProblemKind::Half => {
            let in_e = z.is_some_and(|z| e.contains(z, 1e-9));
            checks.push(Check::new(
                "limit is a constant in E",
                t.report.converged && in_e,
                format!(
                    "z = {z:?}, |z - M| = {:.2e}, final distance {:.2e}",
                    z.map_or(f64::NAN, |z| (z - t.report.m_estimate).abs()),
                    t.report.final_distance
                ),
            ));
        }
    }

    if let Some(b) = &cfg.analysis.bubble {
        let bub = bubble(&nl, b.z, b.eps, b.dim, &[], out)?;
        let r = slide(&u, &bub, b.from, b.to, None)?;
        out.write_json("slide.json", &slide_value(&r))?;
        checks.push(Check::new(
            "sliding the bubble keeps u above it",
            r.holds(),
            format!("min margin {:.3e}, implied u >= {:.6} along the path", r.min_margin, r.implied_lower_bound),
        ));
    }

    if let Some(sw) = &cfg.analysis.sweep {
        let seed = cfg.analysis.seed;
        for (which, grid) in [(SweepWhich::Box, &sw.periodic_box), (SweepWhich::Strip, &sw.strip)] {
            let r = sweep(&nl, which, sw.trials, grid, seed, &sw.options, out)?;
            let name = match which {
                SweepWhich::Box => "periodic box solutions are constants in E",
                SweepWhich::Strip => "strip solutions depend on x2 only",
            };
            checks.push(Check::new(
                name,
                sweep_holds(&r, which),
                format!(
                    "{}/{} converged, {} classified, max deviation {:.1e}, max distance {:.1e}",
                    r.converged, r.trials, r.constant_count, r.max_deviation, r.zero_distance
                ),
            ));
        }
    }
    Ok(checks)
}
