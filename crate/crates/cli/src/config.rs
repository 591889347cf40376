//! Run configuration: a flat `key=value` file overlaid by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nodal_lab::diophantine::Metric;
use nodal_lab::harness::Widths;
use nodal_lab::spectrum::{CountingConvention, DomainSpec};
use serde::Serialize;
use thiserror::Error;

/// Every key accepted in a config file or as a `--flag`.
pub const KEYS: &[&str] = &[
    "domain",
    "alpha",
    "m",
    "mu-min",
    "mu-max",
    "delta",
    "mu-delta",
    "ppw",
    "a",
    "b",
    "c",
    "epsilon",
    "seed",
    "points",
    "k-max",
    "k0",
    "fit-mu-min",
    "fit-mu-max",
    "convention",
    "metric",
    "box-stat",
    "exclude-boundary",
    "out",
    "cache-dir",
    "no-cache",
    "jobs",
];

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid number for `{key}`: `{value}`")]
    InvalidNumber { key: String, value: String },
    #[error("missing required field `{0}`")]
    Missing(String),
    #[error("invalid value for `{key}`: {msg}")]
    Invalid { key: String, msg: String },
    #[error("config file {path}: {msg}")]
    File { path: String, msg: String },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxStat {
    #[default]
    Comparability,
    Nodal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub domain: Option<DomainSpec>,
    pub modes: Vec<Vec<u32>>,
    pub mu_min: f64,
    pub mu_max: Option<f64>,
    pub widths: Option<Widths>,
    pub ppw: Option<f64>,
    pub a: f64,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub epsilon: f64,
    pub seed: u64,
    pub points: Option<usize>,
    pub k_max: Option<usize>,
    pub k0: Option<Vec<usize>>,
    pub fit_mu_min: f64,
    pub fit_mu_max: f64,
    pub convention: CountingConvention,
    pub metric: Metric,
    pub box_stat: BoxStat,
    pub exclude_boundary: bool,
    // Locations and parallelism never change results and stay out of the echo.
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub cache_dir: Option<PathBuf>,
    #[serde(skip)]
    pub no_cache: bool,
    #[serde(skip)]
    pub jobs: Option<usize>,
}

impl RunConfig {
    /// The resolved configuration as flat strings, for report echoes.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let v = serde_json::to_value(self).expect("config serializes");
        v.as_object()
            .expect("config is an object")
            .iter()
            .map(|(k, v)| (k.replace('_', "-"), v.to_string()))
            .collect()
    }

    pub fn require_domain(&self) -> Result<&DomainSpec, ConfigError> {
        self.domain.as_ref().ok_or_else(|| ConfigError::Missing("domain".into()))
    }
}

/// Reads a `key=value` file; `#` starts a comment.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    parse_config_text(&text).map_err(|msg| ConfigError::File {
        path: path.display().to_string(),
        msg,
    })
}

pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Merges file values with flag values (flags win) and validates the result.
pub fn parse_config(
    command: &str,
    flags: &BTreeMap<String, String>,
    file: Option<&Path>,
) -> Result<RunConfig, ConfigError> {
    let mut map = match file {
        Some(p) => read_config_file(p)?,
        None => BTreeMap::new(),
    };
    for (k, v) in flags {
        map.insert(k.clone(), v.clone());
    }
    resolve(command, &map)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.trim().parse().map_err(|_| ConfigError::InvalidNumber {
        key: key.into(),
        value: v.into(),
    })
}

fn positive(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = num(key, v)?;
    if !(x.is_finite() && x > 0.0) {
        return Err(ConfigError::Invalid {
            key: key.into(),
            msg: format!("{v} must be positive"),
        });
    }
    Ok(x)
}

fn list<T, F: Fn(&str, &str) -> Result<T, ConfigError>>(key: &str, v: &str, f: F) -> Result<Vec<T>, ConfigError> {
    let out: Vec<T> = v.split(',').map(|s| f(key, s.trim())).collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err(ConfigError::Invalid {
            key: key.into(),
            msg: "empty list".into(),
        });
    }
    Ok(out)
}

fn flag(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ConfigError::Invalid {
            key: key.into(),
            msg: format!("`{v}` is not a boolean"),
        }),
    }
}

/// `interval`, `box<n>` or `torus<n>`, with optional per-axis weights.
pub fn parse_domain(name: &str, alpha: Option<&str>) -> Result<DomainSpec, ConfigError> {
    let invalid = |msg: String| ConfigError::Invalid {
        key: "domain".into(),
        msg,
    };
    let weights = |n: usize| -> Result<Vec<f64>, ConfigError> {
        match alpha {
            Some(a) => {
                let w = list("alpha", a, positive)?;
                if w.len() != n {
                    return Err(ConfigError::Invalid {
                        key: "alpha".into(),
                        msg: format!("expected {n} weights, got {}", w.len()),
                    });
                }
                Ok(w)
            }
            None => Ok(vec![1.0; n]),
        }
    };
    let dim = |rest: &str| -> Result<usize, ConfigError> {
        let n: usize = rest.parse().map_err(|_| invalid(format!("bad dimension in `{name}`")))?;
        if n == 0 {
            return Err(invalid("dimension must be at least 1".into()));
        }
        Ok(n)
    };
    let lib = |r: nodal_lab::Result<DomainSpec>| r.map_err(|e| invalid(e.to_string()));
    if name == "interval" {
        if alpha.is_some() {
            return Err(ConfigError::Invalid {
                key: "alpha".into(),
                msg: "the interval takes no weights".into(),
            });
        }
        Ok(DomainSpec::interval())
    } else if let Some(rest) = name.strip_prefix("box") {
        lib(DomainSpec::dirichlet_box(weights(dim(rest)?)?))
    } else if let Some(rest) = name.strip_prefix("torus") {
        lib(DomainSpec::flat_torus(weights(dim(rest)?)?))
    } else {
        Err(invalid(format!("unknown domain `{name}` (interval, box<n>, torus<n>)")))
    }
}

fn resolve(command: &str, map: &BTreeMap<String, String>) -> Result<RunConfig, ConfigError> {
    if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(ConfigError::UnknownKey(k.clone()));
    }
    let get = |k: &str| map.get(k).map(String::as_str);
    let domain = get("domain").map(|d| parse_domain(d, get("alpha"))).transpose()?;
    if domain.is_none() && get("alpha").is_some() {
        return Err(ConfigError::Missing("domain".into()));
    }
    let modes = match get("m") {
        Some(v) => v
            .split(';')
            .map(|m| list("m", m, |k, s| num::<u32>(k, s)))
            .collect::<Result<Vec<_>, _>>()?,
        None => Vec::new(),
    };
    if let Some(d) = &domain {
        if let Some(m) = modes.iter().find(|m| m.len() != d.dim()) {
            return Err(ConfigError::Invalid {
                key: "m".into(),
                msg: format!("mode {m:?} does not match dimension {}", d.dim()),
            });
        }
    }
    let widths = match (get("delta"), get("mu-delta")) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Invalid {
                key: "delta".into(),
                msg: "give either delta or mu-delta, not both".into(),
            })
        }
        (Some(v), None) => Some(Widths::Delta(list("delta", v, positive)?)),
        (None, Some(v)) => Some(Widths::MuDelta(list("mu-delta", v, positive)?)),
        (None, None) => None,
    };
    let opt_pos = |k: &str| get(k).map(|v| positive(k, v)).transpose();
    let opt_count = |k: &str| -> Result<Option<usize>, ConfigError> {
        match get(k) {
            Some(v) => {
                let n: usize = num(k, v)?;
                if n == 0 {
                    return Err(ConfigError::Invalid {
                        key: k.into(),
                        msg: "must be at least 1".into(),
                    });
                }
                Ok(Some(n))
            }
            None => Ok(None),
        }
    };
    let nonneg = |k: &str, default: f64| -> Result<f64, ConfigError> {
        match get(k) {
            Some(v) => {
                let x: f64 = num(k, v)?;
                if x.is_nan() || x < 0.0 {
                    return Err(ConfigError::Invalid {
                        key: k.into(),
                        msg: format!("{v} must be nonnegative"),
                    });
                }
                Ok(x)
            }
            None => Ok(default),
        }
    };
    let a = opt_pos("a")?.unwrap_or(10.0);
    if a <= 1.0 {
        return Err(ConfigError::Invalid {
            key: "a".into(),
            msg: "A must exceed 1".into(),
        });
    }
    let ppw = opt_pos("ppw")?;
    if ppw.is_some_and(|p| p < 4.0) {
        return Err(ConfigError::Invalid {
            key: "ppw".into(),
            msg: "points per wavelength must be at least 4".into(),
        });
    }
    let convention = match get("convention") {
        None | Some("modes") => CountingConvention::Modes,
        Some("distinct") => CountingConvention::Distinct,
        Some(v) => {
            return Err(ConfigError::Invalid {
                key: "convention".into(),
                msg: format!("`{v}` (modes, distinct)"),
            })
        }
    };
    let metric = match get("metric") {
        None | Some("euclidean") => Metric::Euclidean,
        Some("max") => Metric::Max,
        Some(v) => {
            return Err(ConfigError::Invalid {
                key: "metric".into(),
                msg: format!("`{v}` (euclidean, max)"),
            })
        }
    };
    let box_stat = match get("box-stat") {
        None | Some("comparability") => BoxStat::Comparability,
        Some("nodal") => BoxStat::Nodal,
        Some(v) => {
            return Err(ConfigError::Invalid {
                key: "box-stat".into(),
                msg: format!("`{v}` (comparability, nodal)"),
            })
        }
    };
    let fit_mu_max = match get("fit-mu-max") {
        Some(v) => positive("fit-mu-max", v)?,
        None => f64::INFINITY,
    };
    Ok(RunConfig {
        command: command.to_string(),
        domain,
        modes,
        mu_min: nonneg("mu-min", 0.0)?,
        mu_max: opt_pos("mu-max")?,
        widths,
        ppw,
        a,
        b: opt_pos("b")?,
        c: opt_pos("c")?,
        epsilon: opt_pos("epsilon")?.unwrap_or(1.0),
        seed: get("seed").map(|v| num("seed", v)).transpose()?.unwrap_or(1),
        points: opt_count("points")?,
        k_max: opt_count("k-max")?,
        k0: get("k0").map(|v| list("k0", v, |k, s| num::<usize>(k, s))).transpose()?,
        fit_mu_min: nonneg("fit-mu-min", 0.0)?,
        fit_mu_max,
        convention,
        metric,
        box_stat,
        exclude_boundary: get("exclude-boundary").map(|v| flag("exclude-boundary", v)).transpose()?.unwrap_or(false),
        out: PathBuf::from(get("out").unwrap_or("out")),
        cache_dir: get("cache-dir").map(PathBuf::from),
        no_cache: get("no-cache").map(|v| flag("no-cache", v)).transpose()?.unwrap_or(false),
        jobs: opt_count("jobs")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn torus_mode_from_flags() {
        let c = parse_config("tube", &flags(&[("domain", "torus2"), ("m", "3,4"), ("delta", "0.05")]), None).unwrap();
        let d = c.domain.as_ref().unwrap();
        assert!(d.is_periodic());
        assert_eq!(d.dim(), 2);
        assert_eq!(c.modes, vec![vec![3, 4]]);
        assert_eq!(c.widths, Some(Widths::Delta(vec![0.05])));
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.conf");
        std::fs::write(&p, "# comment\nseed = 7\ndomain=interval\n").unwrap();
        let c = parse_config("dioph", &flags(&[("seed", "9")]), Some(&p)).unwrap();
        assert_eq!(c.seed, 9);
        let c = parse_config("dioph", &BTreeMap::new(), Some(&p)).unwrap();
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn validation_errors() {
        let bad = |pairs: &[(&str, &str)]| parse_config("tube", &flags(pairs), None).unwrap_err();
        assert!(matches!(bad(&[("delta", "-0.1")]), ConfigError::Invalid { .. }));
        assert!(matches!(bad(&[("delta", "abc")]), ConfigError::InvalidNumber { .. }));
        assert!(matches!(bad(&[("colour", "red")]), ConfigError::UnknownKey(_)));
        assert!(matches!(bad(&[("domain", "torus2"), ("m", "3")]), ConfigError::Invalid { .. }));
        assert!(matches!(bad(&[("domain", "box2"), ("alpha", "1")]), ConfigError::Invalid { .. }));
        assert!(matches!(bad(&[("domain", "sphere2")]), ConfigError::Invalid { .. }));
        assert!(matches!(bad(&[("alpha", "1,1")]), ConfigError::Missing(_)));
        assert!(matches!(bad(&[("ppw", "2")]), ConfigError::Invalid { .. }));
    }

    #[test]
    fn unknown_key_in_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.conf");
        std::fs::write(&p, "sead=7\n").unwrap();
        assert_eq!(
            parse_config("dioph", &BTreeMap::new(), Some(&p)).unwrap_err(),
            ConfigError::UnknownKey("sead".into())
        );
        std::fs::write(&p, "seed 7\n").unwrap();
        assert!(matches!(parse_config("dioph", &BTreeMap::new(), Some(&p)), Err(ConfigError::File { .. })));
    }

    #[test]
    fn echo_omits_locations() {
        let c = parse_config("tube", &flags(&[("out", "/tmp/x"), ("jobs", "2"), ("domain", "interval")]), None).unwrap();
        let e = c.echo();
        assert!(!e.contains_key("out") && !e.contains_key("jobs"));
        assert_eq!(e["command"], "\"tube\"");
        assert!(e.contains_key("mu-max"));
    }

    #[test]
    fn weighted_domains() {
        let d = parse_domain("box2", Some("1, 1.4142135623730951")).unwrap();
        assert!((d.axis_length(1) - std::f64::consts::PI / 2f64.sqrt()).abs() < 1e-12);
        assert!(parse_domain("box0", None).is_err());
        assert!(parse_domain("interval", Some("2")).is_err());
    }
}
