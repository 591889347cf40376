//! Subcommand dispatch.

use std::path::Path;

use nodal_lab::cache::FieldCache;
use nodal_lab::diophantine::{approx_events, events_csv, sample_points, FitWindow};
use nodal_lab::harness::{
    run_borel_cantelli, run_comparability_scaling, run_density_check, run_dim2_checks, run_exponents,
    run_nodal_box_law, run_spectrum, run_tube_scaling, run_yau_check, ApproxOptions, ComparabilityOptions,
    ExperimentReport, ExponentOptions, FieldOptions, TubeScalingOptions, Widths,
};
use nodal_lab::spectrum::{enumerate_modes, EigenMode};
use nodal_lab::{Error, Result};

use crate::config::{BoxStat, RunConfig};

/// Largest mode family a single run accepts.
pub const MAX_FAMILY: usize = 256;

pub fn select_modes(cfg: &RunConfig) -> Result<Vec<EigenMode>> {
    let domain = cfg.require_domain().map_err(|e| Error::InvalidInput(e.to_string()))?;
    if !cfg.modes.is_empty() {
        return cfg.modes.iter().map(|m| EigenMode::new(domain.clone(), m)).collect();
    }
    let mu_max = cfg
        .mu_max
        .ok_or_else(|| Error::InvalidInput("missing required field `m` or `mu-max`".into()))?;
    let list = enumerate_modes(domain, mu_max)?;
    let modes: Vec<EigenMode> = list.modes.into_iter().filter(|m| m.mu() >= cfg.mu_min).collect();
    if modes.is_empty() {
        return Err(Error::InvalidInput(format!("no modes with {} <= mu <= {mu_max}", cfg.mu_min)));
    }
    if modes.len() > MAX_FAMILY {
        return Err(Error::ResourceGuard(format!(
            "{} modes selected, at most {MAX_FAMILY} per run",
            modes.len()
        )));
    }
    Ok(modes)
}

fn cache(cfg: &RunConfig) -> FieldCache {
    if cfg.no_cache {
        FieldCache::disabled()
    } else if let Some(d) = &cfg.cache_dir {
        FieldCache::new(Some(d.clone()))
    } else {
        FieldCache::from_env(None)
    }
}

fn field_options(cfg: &RunConfig) -> FieldOptions {
    let mut o = FieldOptions::default();
    if let Some(p) = cfg.ppw {
        o.points_per_wavelength = p;
    }
    o.exclude_boundary = cfg.exclude_boundary;
    o
}

fn widths_or(cfg: &RunConfig, default: &[f64]) -> Widths {
    cfg.widths.clone().unwrap_or_else(|| Widths::MuDelta(default.to_vec()))
}

/// Runs the experiment(s) of `cfg.command`. Extra files (beyond the report
/// pair) are returned as `(suffix, contents)`.
pub fn dispatch(cfg: &RunConfig) -> Result<Vec<(ExperimentReport, Vec<(String, String)>)>> {
    let plain = |r: ExperimentReport| vec![(r, Vec::new())];
    let domain = || cfg.require_domain().map_err(|e| Error::InvalidInput(e.to_string()));
    Ok(match cfg.command.as_str() {
        "spectrum" => {
            let mu_max = cfg.mu_max.ok_or_else(|| Error::InvalidInput("missing required field `mu-max`".into()))?;
            plain(run_spectrum(domain()?, mu_max, cfg.convention)?)
        }
        "tube" => {
            let mut o = TubeScalingOptions::default();
            if let Some(p) = cfg.ppw {
                o.points_per_wavelength = p;
            }
            let w = widths_or(cfg, &[0.05, 0.1, 0.2, 0.3]);
            plain(run_tube_scaling(domain()?, &select_modes(cfg)?, &w, &o)?)
        }
        "yau" => plain(run_yau_check(domain()?, &select_modes(cfg)?, &field_options(cfg), &cache(cfg))?),
        "density" => plain(run_density_check(domain()?, &select_modes(cfg)?, &field_options(cfg), &cache(cfg))?),
        "dim2" => {
            let md = match &cfg.widths {
                None => 0.2,
                Some(Widths::MuDelta(v)) if v.len() == 1 => v[0],
                Some(_) => return Err(Error::InvalidInput("dim2 takes a single mu-delta value".into())),
            };
            plain(run_dim2_checks(domain()?, &select_modes(cfg)?, md, &field_options(cfg))?)
        }
        "boxes" => match cfg.box_stat {
            BoxStat::Comparability => {
                let modes = select_modes(cfg)?;
                if modes.len() != 1 {
                    return Err(Error::InvalidInput(format!(
                        "comparability runs take one mode, {} selected",
                        modes.len()
                    )));
                }
                let o = ComparabilityOptions {
                    a: cfg.a,
                    ..ComparabilityOptions::default()
                };
                let w = widths_or(cfg, &[0.1, 0.2, 0.4]);
                plain(run_comparability_scaling(domain()?, &modes[0], &w, &o)?)
            }
            BoxStat::Nodal => {
                let w = widths_or(cfg, &[0.05, 0.1, 0.2, 0.3]);
                plain(run_nodal_box_law(domain()?, &select_modes(cfg)?, &w, 3.0)?)
            }
        },
        "dioph" => {
            let d = domain()?;
            let mut o = ExponentOptions::for_domain(d);
            if let Some(m) = cfg.mu_max {
                o.mu_max = m;
            }
            if let Some(p) = cfg.points {
                o.points = p;
            }
            o.seed = cfg.seed;
            o.window = FitWindow {
                mu_min: cfg.fit_mu_min,
                mu_max: cfg.fit_mu_max,
            };
            o.metric = cfg.metric;
            o.convention = cfg.convention;
            let report = run_exponents(d, &o)?;
            let mut extra = Vec::new();
            if let Some(b) = cfg.b {
                let modes = enumerate_modes(d, o.mu_max)?;
                let c = cfg.c.unwrap_or(1.0);
                let mut events = Vec::new();
                for p in sample_points(d, o.points, o.seed) {
                    events.extend(approx_events(&p, &modes, b, c)?);
                }
                extra.push(("events.csv".to_string(), events_csv(&events)));
            }
            vec![(report, extra)]
        }
        "borel-cantelli" => {
            let mut o = ApproxOptions {
                epsilon: cfg.epsilon,
                seed: cfg.seed,
                ..ApproxOptions::default()
            };
            if let Some(c) = cfg.c {
                o.c = c;
            }
            if let Some(k) = cfg.k_max {
                o.k_max = k;
            }
            if let Some(p) = cfg.points {
                o.points = p;
            }
            if let Some(k0) = &cfg.k0 {
                o.k0 = k0.clone();
            }
            plain(run_borel_cantelli(domain()?, &o)?)
        }
        other => return Err(Error::InvalidInput(format!("unknown command `{other}`"))),
    })
}

/// Summary lines of the saved reports in `dir`, and whether all passed.
pub fn summarize_dir(dir: &Path) -> Result<(Vec<String>, bool)> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidInput(format!("no reports in {}", dir.display())));
    }
    let mut lines = Vec::new();
    let mut all = true;
    for p in paths {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p)?)?;
        let (Some(exp), Some(passed)) = (v["experiment"].as_str(), v["passed"].as_bool()) else {
            return Err(Error::InvalidInput(format!("{} is not a report", p.display())));
        };
        all &= passed;
        let stem = p.file_stem().unwrap_or_default().to_string_lossy();
        lines.push(format!("{stem}: {exp} {}", if passed { "PASS" } else { "FAIL" }));
    }
    Ok((lines, all))
}
