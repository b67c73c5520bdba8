//! `elab`: runs the elliptic-lab experiments from the command line.
//!
//! Exit codes: 0 success, 1 invalid input or config, 2 numerical failure
//! (including a failed check in `run`), 3 I/O error.

// `!(x > y)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use commands::SweepWhich;
use config::{ExperimentConfig, GridConfig};
use elliptic_lab::elliptic::Method;
use elliptic_lab::trace::TraceSpec;
use elliptic_lab::trajectory::{ProblemKind, ZERO_GRID};
use elliptic_lab::Nonlinearity;
use error::{CliError, CliResult};
use output::OutputDir;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(name = "elab", version, about = "Boundary-layer limits of semilinear elliptic problems")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed for the random sweeps; overrides `analysis.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write the field of every sweep trial.
    #[arg(long, global = true)]
    dump_fields: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Hypothesis checks, zero set E and Z_f of a nonlinearity.
    AnalyzeF(FArgs),
    /// The boundary-layer profile V_z.
    Profile {
        #[command(flatten)]
        f: FArgs,
        #[arg(long)]
        z: f64,
        #[arg(long, default_value_t = 40.0)]
        xi_max: f64,
        #[arg(long, default_value_t = 4000)]
        n: usize,
    },
    /// Z_f alone.
    Zf {
        #[command(flatten)]
        f: FArgs,
        #[arg(long, default_value_t = ZERO_GRID)]
        grid_n: usize,
    },
    /// Solve on the truncated quarter plane.
    SolveQuarter(SolveArgs),
    /// Solve on the truncated half plane, periodic in x2.
    SolveHalf(SolveArgs),
    /// Radial bubble below a level z and its energies.
    Bubble {
        #[command(flatten)]
        f: FArgs,
        #[arg(long)]
        z: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Radii for the energy growth scan, comma separated.
        #[arg(long, value_delimiter = ',')]
        radii: Vec<f64>,
    },
    /// First Dirichlet eigenpair of the ball.
    Eigen {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 400)]
        n: usize,
    },
    /// Slide a radial bubble under a solved field.
    Slide {
        /// Field CSV from a solve; solved from the config when omitted.
        #[arg(long)]
        field: Option<PathBuf>,
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long)]
        z: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_delimiter = ',', num_args = 2, required = true)]
        from: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 2, required = true)]
        to: Vec<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Identify the limit of u(x1 + h, .) as h grows.
    Trajectory {
        /// Field CSV from a solve; solved from the config when omitted.
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Random-data sweeps on the periodic box and the Dirichlet strip.
    LiouvilleSweep {
        #[command(flatten)]
        f: FArgs,
        #[arg(long, value_enum, default_value_t = SweepArg::Both)]
        domain: SweepArg,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Box grid `l1,l2,h`.
        #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [32.0, 32.0, 0.5])]
        box_grid: Vec<f64>,
        /// Strip grid `l1,l2,h`.
        #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [16.0, 20.0, 0.25])]
        strip_grid: Vec<f64>,
    },
    /// Render a trajectory report as an SVG distance plot.
    Plot { report: PathBuf, svg: PathBuf },
    /// The full pipeline from a config file.
    Run {
        /// Config path (alternatively `--config`).
        path: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct FArgs {
    /// Nonlinearity: logistic, abs-sin, linear-decay, cantor:<level>,
    /// constant:<c> or table:<path>. Defaults to the config's.
    #[arg(long = "f")]
    spec: Option<String>,
    #[arg(long)]
    s_max: Option<f64>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    f: FArgs,
    #[arg(long)]
    l1: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    /// constant:<c>, bump:<center>,<width>,<height>, profile:<z> or table:<path>.
    #[arg(long)]
    trace: Option<TraceSpec>,
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum KindArg {
    Quarter,
    Half,
}

impl From<KindArg> for ProblemKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Quarter => ProblemKind::Quarter,
            KindArg::Half => ProblemKind::Half,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SweepArg {
    Box,
    Strip,
    Both,
}

fn parse_method(s: &str) -> Result<Method, String> {
    serde_json::from_value(json!(s)).map_err(|_| format!("unknown method '{s}' (newton, monotone, hybrid)"))
}

struct Context {
    config: Option<ExperimentConfig>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    dump_fields: bool,
}

impl Context {
    fn base(&self, kind: ProblemKind) -> ExperimentConfig {
        let mut cfg = self.config.clone().unwrap_or_else(|| ExperimentConfig::baseline(kind));
        if let Some(s) = self.seed {
            cfg.analysis.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        cfg.output.dump_fields |= self.dump_fields;
        cfg
    }

    fn nonlinearity(&self, f: &FArgs) -> CliResult<Nonlinearity> {
        let cfg = self.base(ProblemKind::Quarter);
        let spec = f.spec.clone().unwrap_or(cfg.nonlinearity.spec);
        let s_max = f.s_max.or(cfg.nonlinearity.s_max);
        Ok(Nonlinearity::from_spec(&spec, s_max)?)
    }

    /// Config for a solve: file (or baseline) with the flags applied on top.
    fn solve_config(&self, kind: Option<ProblemKind>, a: &SolveArgs) -> CliResult<ExperimentConfig> {
        let mut cfg = self.base(kind.unwrap_or(ProblemKind::Quarter));
        if let Some(k) = kind {
            cfg.domain.kind = k;
        }
        if let Some(s) = &a.f.spec {
            cfg.nonlinearity.spec = s.clone();
        }
        if a.f.s_max.is_some() {
            cfg.nonlinearity.s_max = a.f.s_max;
        }
        let d = &mut cfg.domain;
        d.l1 = a.l1.unwrap_or(d.l1);
        d.l2 = a.l2.unwrap_or(d.l2);
        d.h = a.h.unwrap_or(d.h);
        if let Some(t) = &a.trace {
            d.trace = t.clone();
        }
        if let Some(m) = a.method {
            cfg.solver.method = m;
        }
        if let Some(t) = a.tol {
            cfg.solver.tol = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self) -> CliResult<OutputDir> {
        let cfg = self.base(ProblemKind::Quarter);
        let mut out = OutputDir::create(&cfg.output.dir)?;
        out.dump_fields = cfg.output.dump_fields;
        Ok(out)
    }
}

fn grid_of(v: &[f64]) -> GridConfig {
    GridConfig { l1: v[0], l2: v[1], h: v[2] }
}

fn point(v: &[f64]) -> [f64; 2] {
    [v[0], v[1]]
}

fn finish(out: OutputDir) -> CliResult<()> {
    let root = out.root().to_path_buf();
    let n = out.finish()?.len();
    println!("wrote {n} files and manifest.json to {}", root.display());
    Ok(())
}

fn write_summary(out: &mut OutputDir, command: &str, started: Instant, mut body: serde_json::Value) -> CliResult<()> {
    if let serde_json::Value::Object(m) = &mut body {
        m.insert("command".into(), json!(command));
        m.insert("wall_time_ms".into(), json!(started.elapsed().as_millis() as u64));
    }
    out.write_json("summary.json", &body)?;
    Ok(())
}

fn load_or_solve(
    ctx: &Context,
    field: Option<&Path>,
    kind: Option<ProblemKind>,
    a: &SolveArgs,
) -> CliResult<(ExperimentConfig, elliptic_lab::elliptic::Field)> {
    let cfg = ctx.solve_config(kind, a)?;
    let nl = cfg.nonlinearity()?;
    let u = match field {
        Some(p) => commands::load_field(p, cfg.domain.kind)?,
        None => commands::solve_field(&cfg, &nl)?,
    };
    Ok((cfg, u))
}

fn execute(cli: Cli) -> CliResult<()> {
    let started = Instant::now();
    let run_path = match &cli.command {
        Command::Run { path } => path.clone().or_else(|| cli.config.clone()),
        _ => cli.config.clone(),
    };
    if matches!(cli.command, Command::Run { .. }) && run_path.is_none() {
        return Err(CliError::Validation("run needs a config path".into()));
    }
    let config = run_path.as_deref().map(ExperimentConfig::load).transpose()?;
    let ctx = Context { config, out: cli.out, seed: cli.seed, dump_fields: cli.dump_fields };

    match cli.command {
        Command::AnalyzeF(f) => {
            let nl = ctx.nonlinearity(&f)?;
            let mut out = ctx.out_dir()?;
            commands::analyze_f(&nl, &mut out)?;
            finish(out)
        }
        Command::Profile { f, z, xi_max, n } => {
            let nl = ctx.nonlinearity(&f)?;
            let mut out = ctx.out_dir()?;
            commands::profile(&nl, z, xi_max, n, &mut out)?;
            finish(out)
        }
        Command::Zf { f, grid_n } => {
            let nl = ctx.nonlinearity(&f)?;
            let mut out = ctx.out_dir()?;
            commands::zf(&nl, grid_n, &mut out)?;
            finish(out)
        }
        Command::SolveQuarter(a) => solve_command(&ctx, ProblemKind::Quarter, &a, started),
        Command::SolveHalf(a) => solve_command(&ctx, ProblemKind::Half, &a, started),
        Command::Bubble { f, z, eps, dim, radii } => {
            let nl = ctx.nonlinearity(&f)?;
            let mut out = ctx.out_dir()?;
            commands::bubble(&nl, z, eps, dim, &radii, &mut out)?;
            finish(out)
        }
        Command::Eigen { dim, radius, n } => {
            let mut out = ctx.out_dir()?;
            commands::eigen(dim, radius, n, &mut out)?;
            finish(out)
        }
        Command::Slide { field, solve, z, eps, from, to, steps } => {
            let (cfg, u) = load_or_solve(&ctx, field.as_deref(), Some(ProblemKind::Quarter), &solve)?;
            let nl = cfg.nonlinearity()?;
            let mut out = ctx.out_dir()?;
            let b = commands::bubble(&nl, z, eps, 2, &[], &mut out)?;
            let r = commands::slide(&u, &b, point(&from), point(&to), steps)?;
            out.write_json("slide.json", &commands::slide_value(&r))?;
            if !r.holds() {
                return Err(CliError::Numeric(format!("sliding failed: min margin {:.3e}", r.min_margin)));
            }
            finish(out)
        }
        Command::Trajectory { field, kind, solve } => {
            let kind = kind.map(ProblemKind::from).or(ctx.config.as_ref().map(|c| c.domain.kind));
            let (cfg, u) = load_or_solve(&ctx, field.as_deref(), kind, &solve)?;
            let nl = cfg.nonlinearity()?;
            let mut out = ctx.out_dir()?;
            if field.is_none() {
                out.write("field.csv", u.to_csv())?;
            }
            let t = commands::trajectory(&cfg, &nl, &u)?;
            commands::write_trajectory(&t, &mut out)?;
            write_summary(&mut out, "trajectory", started, commands::solve_summary(&cfg, &u))?;
            finish(out)
        }
        Command::LiouvilleSweep { f, domain, trials, box_grid, strip_grid } => {
            let nl = ctx.nonlinearity(&f)?;
            let cfg = ctx.base(ProblemKind::Quarter);
            let opts = cfg.analysis.sweep.as_ref().map(|s| s.options).unwrap_or_default();
            let mut out = ctx.out_dir()?;
            let mut runs = Vec::new();
            if domain != SweepArg::Strip {
                runs.push((SweepWhich::Box, grid_of(&box_grid)));
            }
            if domain != SweepArg::Box {
                runs.push((SweepWhich::Strip, grid_of(&strip_grid)));
            }
            for (which, g) in runs {
                commands::sweep(&nl, which, trials, &g, cfg.analysis.seed, &opts, &mut out)?;
            }
            finish(out)
        }
        Command::Plot { report, svg } => commands::plot(&report, &svg),
        Command::Run { .. } => {
            let cfg = ctx.base(ProblemKind::Quarter);
            let mut out = OutputDir::create(&cfg.output.dir)?;
            out.dump_fields = cfg.output.dump_fields;
            let checks = commands::run(&cfg, &mut out)?;
            let failed = checks.iter().filter(|c| !c.pass).count();
            write_summary(&mut out, "run", started, json!({ "checks": checks, "failed": failed }))?;
            finish(out)?;
            if failed > 0 {
                return Err(CliError::Numeric(format!("{failed} of {} checks failed", checks.len())));
            }
            Ok(())
        }
    }
}

fn solve_command(ctx: &Context, kind: ProblemKind, a: &SolveArgs, started: Instant) -> CliResult<()> {
    let cfg = ctx.solve_config(Some(kind), a)?;
    let nl = cfg.nonlinearity()?;
    let u = commands::solve_field(&cfg, &nl)?;
    let mut out = ctx.out_dir()?;
    out.write("field.csv", u.to_csv())?;
    write_summary(&mut out, commands::kind_name(kind), started, commands::solve_summary(&cfg, &u))?;
    finish(out)
}

fn main() {
    // Usage errors are validation errors (exit 1); clap's own code 2 is
    // reserved here for numerical failures.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            std::process::exit(1);
        }
    }
    if let Err(e) = execute(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
