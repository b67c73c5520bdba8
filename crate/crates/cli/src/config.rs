//! Experiment configuration: a JSON document with the sections
//! `nonlinearity`, `domain`, `solver`, `analysis` and `output`.

use crate::error::{CliError, CliResult};
use elliptic_lab::elliptic::{Grid2D, SolverOptions};
use elliptic_lab::liouville::SweepOptions;
use elliptic_lab::trace::TraceSpec;
use elliptic_lab::trajectory::{OmegaOptions, ProblemKind, ProfileGrid, DEFAULT_WINDOW_FRACS};
use elliptic_lab::Nonlinearity;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const DEFAULT_SEED: u64 = 20240601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub nonlinearity: NonlinearityConfig,
    pub domain: DomainConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    /// `logistic`, `abs-sin`, `linear-decay`, `cantor:<level>`,
    /// `constant:<c>` or `table:<path>`.
    pub spec: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub l1: f64,
    pub l2: f64,
    pub h: f64,
}

impl GridConfig {
    pub fn grid(&self) -> CliResult<Grid2D> {
        Ok(Grid2D::new(self.l1, self.l2, self.h)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: ProblemKind,
    pub l1: f64,
    pub l2: f64,
    pub h: f64,
    /// Boundary trace `u0(x2)` at `x1 = 0`.
    pub trace: TraceSpec,
}

impl DomainConfig {
    pub fn grid(&self) -> CliResult<Grid2D> {
        GridConfig { l1: self.l1, l2: self.l2, h: self.h }.grid()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub seed: u64,
    pub omega: OmegaOptions,
    /// Trailing-window fractions used to estimate the limsup `M`.
    pub window_fracs: Vec<f64>,
    pub profile_grid: ProfileGrid,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bubble: Option<BubbleConfig>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            omega: OmegaOptions::default(),
            window_fracs: DEFAULT_WINDOW_FRACS.to_vec(),
            profile_grid: ProfileGrid::default(),
            sweep: None,
            bubble: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub trials: usize,
    #[serde(rename = "box")]
    pub periodic_box: GridConfig,
    pub strip: GridConfig,
    #[serde(default)]
    pub options: SweepOptions,
}

/// A radial bubble for `f` itself, slid under the solved field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BubbleConfig {
    pub z: f64,
    pub eps: f64,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub from: [f64; 2],
    pub to: [f64; 2],
}

fn default_dim() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Also write every sweep trial's field.
    pub dump_fields: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), dump_fields: false }
    }
}

impl ExperimentConfig {
    /// A quarter-plane logistic run, used when a subcommand gets no config.
    pub fn baseline(kind: ProblemKind) -> Self {
        Self {
            nonlinearity: NonlinearityConfig { spec: "logistic".into(), s_max: None },
            domain: DomainConfig { kind, l1: 60.0, l2: 30.0, h: 0.25, trace: TraceSpec::Bump { center: 10.0, width: 5.0, height: 0.5 } },
            solver: SolverOptions::default(),
            analysis: AnalysisConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn parse(text: &str, origin: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| CliError::Validation(format!("{origin}: line {}, column {}: {e}", e.line(), e.column())))?;
        cfg.validate().map_err(|e| match e {
            CliError::Validation(m) => CliError::Validation(format!("{origin}: {m}")),
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read config {}", path.display()), e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn nonlinearity(&self) -> CliResult<Nonlinearity> {
        Ok(Nonlinearity::from_spec(&self.nonlinearity.spec, self.nonlinearity.s_max)?)
    }

    /// Checks everything that can be checked without solving.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Validation(m));
        self.nonlinearity()?;
        self.domain.grid()?;
        if let TraceSpec::Table(p) = &self.domain.trace {
            if !p.is_file() {
                return bad(format!("domain.trace: table {} does not exist", p.display()));
            }
        }
        let s = &self.solver;
        if !(s.tol > 0.0 && s.tol.is_finite()) {
            return bad(format!("solver.tol must be positive, got {}", s.tol));
        }
        if s.max_newton == 0 || s.max_monotone == 0 {
            return bad("solver iteration limits must be positive".into());
        }
        if !(s.switch_tol > 0.0) || !(s.order_slack >= 0.0) {
            return bad("solver.switch_tol must be positive and solver.order_slack nonnegative".into());
        }
        let a = &self.analysis;
        let o = &a.omega;
        if o.shifts < 2 || !(o.max_shift_frac > 0.0 && o.max_shift_frac < 1.0) {
            return bad("analysis.omega needs shifts >= 2 and 0 < max_shift_frac < 1".into());
        }
        if !(o.x2_window > 0.0 && o.x2_window <= 1.0) || !(o.conv_tol > 0.0) || !(o.margin >= 1.0) {
            return bad("analysis.omega needs 0 < x2_window <= 1, conv_tol > 0 and margin >= 1".into());
        }
        if a.window_fracs.is_empty() || a.window_fracs.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
            return bad("analysis.window_fracs must be a nonempty list of fractions in (0, 1)".into());
        }
        if !(a.profile_grid.xi_max > 0.0) || a.profile_grid.n < 16 {
            return bad("analysis.profile_grid needs xi_max > 0 and n >= 16".into());
        }
        if let Some(sw) = &a.sweep {
            if sw.trials == 0 {
                return bad("analysis.sweep.trials must be positive".into());
            }
            sw.periodic_box.grid()?;
            sw.strip.grid()?;
            if !(sw.options.tol > 0.0 && sw.options.constant_tol > 0.0) {
                return bad("analysis.sweep.options tolerances must be positive".into());
            }
        }
        if let Some(b) = &a.bubble {
            if !(b.eps > 0.0 && b.eps <= b.z) || !(1..=3).contains(&b.dim) {
                return bad("analysis.bubble needs 0 < eps <= z and dim in 1..=3".into());
            }
            let g = &self.domain;
            let inside = |p: [f64; 2]| (0.0..=g.l1).contains(&p[0]) && (0.0..=g.l2).contains(&p[1]);
            if !inside(b.from) || !inside(b.to) {
                return bad("analysis.bubble path must lie inside the domain".into());
            }
        }
        Ok(())
    }
}
