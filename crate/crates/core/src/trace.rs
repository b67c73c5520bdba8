//! Boundary traces `u0(x2)` described by short specs.

use crate::error::{invalid, Error, Result};
use crate::nonlinearity::{parse_two_column_csv, Nonlinearity};
use crate::profile1d::compute_profile;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// `constant:<c>`, `bump:<center>,<width>,<height>`, `profile:<z>` or
/// `table:<path>` (CSV with header `x,u`, linearly interpolated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TraceSpec {
    Constant(f64),
    Bump { center: f64, width: f64, height: f64 },
    Profile(f64),
    Table(PathBuf),
}

impl TryFrom<String> for TraceSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TraceSpec> for String {
    fn from(t: TraceSpec) -> String {
        t.to_string()
    }
}

impl std::fmt::Display for TraceSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TraceSpec::Constant(c) => write!(f, "constant:{c}"),
            TraceSpec::Bump { center, width, height } => write!(f, "bump:{center},{width},{height}"),
            TraceSpec::Profile(z) => write!(f, "profile:{z}"),
            TraceSpec::Table(p) => write!(f, "table:{}", p.display()),
        }
    }
}

fn number(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::InvalidInput(format!("trace {what}: cannot parse '{s}' as a number")))
}

impl std::str::FromStr for TraceSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s.split_once(':').ok_or_else(|| Error::InvalidInput(format!("trace '{s}': expected '<kind>:<args>'")))?;
        match kind.trim() {
            "constant" => {
                let c = number(arg, "constant")?;
                if c < 0.0 {
                    return invalid("constant trace must be nonnegative");
                }
                Ok(TraceSpec::Constant(c))
            }
            "bump" => {
                let parts: Vec<&str> = arg.split(',').collect();
                if parts.len() != 3 {
                    return invalid(format!("bump trace '{s}': expected center,width,height"));
                }
                let (center, width, height) = (number(parts[0], "bump")?, number(parts[1], "bump")?, number(parts[2], "bump")?);
                if width <= 0.0 || height < 0.0 {
                    return invalid("bump needs width > 0 and height >= 0");
                }
                Ok(TraceSpec::Bump { center, width, height })
            }
            "profile" => {
                let z = number(arg, "profile")?;
                if z < 0.0 {
                    return invalid("profile level must be nonnegative");
                }
                Ok(TraceSpec::Profile(z))
            }
            "table" if !arg.trim().is_empty() => Ok(TraceSpec::Table(PathBuf::from(arg.trim()))),
            other => invalid(format!("unknown trace kind '{other}' (constant, bump, profile, table)")),
        }
    }
}

/// Smooth bump `height · exp(1 - 1/(1 - ((x - c)/w)²))` on `|x - c| < w`.
pub fn bump(x: f64, center: f64, width: f64, height: f64) -> f64 {
    let t = (x - center) / width;
    if t.abs() >= 1.0 {
        0.0
    } else {
        height * (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

impl TraceSpec {
    /// Samples the trace at `x2 = j h`, `j = 0..=n`. `nl` is needed for
    /// profile traces.
    pub fn sample(&self, n: usize, h: f64, nl: &Nonlinearity) -> Result<Vec<f64>> {
        let xs = (0..=n).map(|j| j as f64 * h);
        match self {
            TraceSpec::Constant(c) => Ok(vec![*c; n + 1]),
            TraceSpec::Bump { center, width, height } => Ok(xs.map(|x| bump(x, *center, *width, *height)).collect()),
            TraceSpec::Profile(z) => {
                let xi_max = (n as f64 * h).max(40.0);
                let p = compute_profile(nl, *z, xi_max, (xi_max / h).ceil() as usize * 4)?;
                Ok(xs.map(|x| p.sample(x)).collect())
            }
            TraceSpec::Table(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::InvalidInput(format!("cannot read trace table {}: {e}", path.display())))?;
                let (x, u) = parse_two_column_csv(&text, ("x", "u"))?;
                Ok(xs.map(|t| crate::nonlinearity::interp_linear(&x, &u, t)).collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for s in ["constant:5", "bump:10,5,0.5", "profile:1", "table:data/u0.csv"] {
            let t: TraceSpec = s.parse().unwrap();
            assert_eq!(t.to_string(), s);
        }
        assert!("bump:1,2".parse::<TraceSpec>().is_err());
        assert!("wave:1".parse::<TraceSpec>().is_err());
        assert!("constant:-1".parse::<TraceSpec>().is_err());
    }

    #[test]
    fn bump_shape() {
        assert_eq!(bump(10.0, 10.0, 5.0, 0.5), 0.5);
        assert_eq!(bump(5.0, 10.0, 5.0, 0.5), 0.0);
        assert!(bump(12.0, 10.0, 5.0, 0.5) < 0.5);
    }

    #[test]
    fn profile_trace_starts_at_zero() {
        let v = TraceSpec::Profile(1.0).sample(40, 0.25, &Nonlinearity::logistic()).unwrap();
        assert_eq!(v[0], 0.0);
        assert!(v.windows(2).all(|w| w[1] > w[0]));
    }
}
