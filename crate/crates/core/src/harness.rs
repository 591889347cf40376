//! Experiment runners and machine-readable reports.
//!
//! Every runner returns an [`ExperimentReport`] whose pass/fail gates are
//! pure functions of the numbers stored in the report.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::boxes::{bad_proportion, comparability_set, growth_statistic, nodal_box_count_points, subdivide_domain};
use crate::cache::FieldCache;
use crate::diophantine::{
    borel_cantelli_sum, estimate_exponents, sample_points, FitWindow, Metric,
};
use crate::nodal_geom::{
    density_radius, distance_field, exact_tube_volume, extract_nodal, nodal_measure, nodal_vertices_tiled,
    sample_lattice_capped,
    tube_volume, tube_volume_tiled, DistanceField, GridSample, Lattice, NodalApprox, Resolution,
    DEFAULT_MAX_POINTS, DEFAULT_SUBSAMPLES,
};
use crate::spectrum::{
    enumerate_modes_capped, modes_for_count, weyl_count, CountingConvention, DomainKind, DomainSpec, EigenMode,
    FactorKind, DEFAULT_MODE_CAP,
};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Cell {
    pub label: String,
    pub params: BTreeMap<String, f64>,
    pub values: BTreeMap<String, f64>,
    /// Estimated numerical error of the value with the same key.
    pub errors: BTreeMap<String, f64>,
    /// Reason the cell could not be computed; skipped cells never enter gates.
    pub skipped: Option<String>,
    /// Computed but outside the window where the law is tested.
    pub excluded: bool,
}

impl Cell {
    fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            ..Self::default()
        }
    }

    fn param(mut self, k: &str, v: f64) -> Self {
        self.params.insert(k.to_string(), v);
        self
    }

    fn value(&mut self, k: &str, v: f64, err: Option<f64>) {
        self.values.insert(k.to_string(), v);
        if let Some(e) = err {
            self.errors.insert(k.to_string(), e);
        }
    }

    fn counts(&self) -> bool {
        self.skipped.is_none() && !self.excluded
    }

    pub fn get(&self, k: &str) -> Option<f64> {
        self.values.get(k).copied()
    }

    /// Whether the cell was skipped by a resource or resolution guard.
    pub fn skipped_by_guard(&self) -> bool {
        self.skipped
            .as_deref()
            .is_some_and(|s| s.starts_with("resource guard") || s.starts_with("resolution guard"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub resolution: String,
    pub code_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub schema: u32,
    pub experiment: String,
    pub domain: DomainSpec,
    pub parameters: BTreeMap<String, Value>,
    /// Fully resolved run configuration, echoed by the front end.
    pub config: BTreeMap<String, String>,
    pub cells: Vec<Cell>,
    pub summary: BTreeMap<String, f64>,
    pub gates: Vec<Gate>,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
    pub passed: bool,
}

impl ExperimentReport {
    pub fn new(experiment: &str, domain: &DomainSpec) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            experiment: experiment.to_string(),
            domain: domain.clone(),
            parameters: BTreeMap::new(),
            config: BTreeMap::new(),
            cells: Vec::new(),
            summary: BTreeMap::new(),
            gates: Vec::new(),
            warnings: Vec::new(),
            provenance: Provenance {
                seed: None,
                resolution: String::new(),
                code_version: env!("CARGO_PKG_VERSION").to_string(),
            },
            passed: true,
        }
    }

    pub fn param(&mut self, k: &str, v: impl Serialize) {
        self.parameters
            .insert(k.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    pub fn with_config(mut self, config: BTreeMap<String, String>) -> Self {
        self.config = config;
        self
    }

    /// Adds a gate `lower ≤ value ≤ upper`; a NaN value fails.
    pub fn gate(&mut self, name: &str, value: f64, lower: Option<f64>, upper: Option<f64>) {
        let passed = !value.is_nan() && lower.is_none_or(|l| value >= l) && upper.is_none_or(|u| value <= u);
        self.gates.push(Gate {
            name: name.to_string(),
            value,
            lower,
            upper,
            passed,
        });
        self.passed = self.gates.iter().all(|g| g.passed);
    }

    pub fn gate_passed(&self, name: &str) -> Option<bool> {
        self.gates.iter().find(|g| g.name == name).map(|g| g.passed)
    }

    fn counted(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| c.counts())
    }

    fn counted_values(&self, key: &str) -> Vec<f64> {
        self.counted().filter_map(|c| c.get(key)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One row per cell with the union of all parameter, value and error
    /// columns (sorted), then `skipped` and `excluded`.
    pub fn to_csv(&self) -> String {
        let pk: BTreeSet<&String> = self.cells.iter().flat_map(|c| c.params.keys()).collect();
        let vk: BTreeSet<&String> = self.cells.iter().flat_map(|c| c.values.keys()).collect();
        let ek: BTreeSet<&String> = self.cells.iter().flat_map(|c| c.errors.keys()).collect();
        let mut out = String::from("label");
        for k in &pk {
            let _ = write!(out, ",{k}");
        }
        for k in &vk {
            let _ = write!(out, ",{k}");
        }
        for k in &ek {
            let _ = write!(out, ",{k}_err");
        }
        out.push_str(",skipped,excluded\n");
        let fmt = |v: Option<&f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.cells {
            out.push_str(&csv_field(&c.label));
            for k in &pk {
                let _ = write!(out, ",{}", fmt(c.params.get(*k)));
            }
            for k in &vk {
                let _ = write!(out, ",{}", fmt(c.values.get(*k)));
            }
            for k in &ek {
                let _ = write!(out, ",{}", fmt(c.errors.get(*k)));
            }
            let _ = writeln!(
                out,
                ",{},{}",
                csv_field(c.skipped.as_deref().unwrap_or("")),
                c.excluded as u8
            );
        }
        out
    }

    /// `{experiment}-{hash}` where the hash covers the domain, parameters and config.
    pub fn file_stem(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.experiment.as_bytes());
        h.update(serde_json::to_string(&self.domain).unwrap_or_default().as_bytes());
        h.update(serde_json::to_string(&self.parameters).unwrap_or_default().as_bytes());
        h.update(serde_json::to_string(&self.config).unwrap_or_default().as_bytes());
        let digest = h.finalize();
        format!("{}-{}", self.experiment, &hex::encode(digest)[..16])
    }

    /// Writes `{stem}.json` and `{stem}.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let stem = self.file_stem();
        let json = dir.join(format!("{stem}.json"));
        let csv = dir.join(format!("{stem}.csv"));
        std::fs::write(&json, self.to_json()?)?;
        std::fs::write(&csv, self.to_csv())?;
        Ok((json, csv))
    }

    /// One-line human summary.
    pub fn summary_line(&self) -> String {
        let failed: Vec<&str> = self.gates.iter().filter(|g| !g.passed).map(|g| g.name.as_str()).collect();
        let skipped = self.cells.iter().filter(|c| c.skipped.is_some()).count();
        format!(
            "{}: {} ({} cells, {} skipped, {} gates{})",
            self.experiment,
            if self.passed { "PASS" } else { "FAIL" },
            self.cells.len(),
            skipped,
            self.gates.len(),
            if failed.is_empty() { String::new() } else { format!(", failed: {}", failed.join(" ")) }
        )
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn mode_label(mode: &EigenMode) -> String {
    let m: Vec<String> = mode.m().iter().map(|x| x.to_string()).collect();
    let mut s = format!("m={}", m.join(":"));
    if mode.kinds().contains(&FactorKind::Cosine) {
        let k: String = mode
            .kinds()
            .iter()
            .map(|k| if *k == FactorKind::Sine { 's' } else { 'c' })
            .collect();
        let _ = write!(s, " {k}");
    }
    s
}

fn extremes(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn band_ratio(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let (lo, hi) = extremes(v);
    hi / lo
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len() as f64;
    if xs.len() < 2 {
        return f64::NAN;
    }
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    sxy / sxx
}

/// Per-axis zero spacing and axis length for the non-constant axes.
fn separable_axes(mode: &EigenMode) -> Vec<(f64, f64)> {
    (0..mode.m().len())
        .filter_map(|j| mode.axis_zero_spacing(j).map(|s| (s, mode.domain().axis_length(j))))
        .collect()
}

/// Largest distance to the nodal set: half the smallest zero spacing.
pub fn density_oracle(mode: &EigenMode) -> Option<f64> {
    separable_axes(mode).iter().map(|(s, _)| s / 2.0).reduce(f64::min)
}

/// Exact nodal measure of a separable mode as seen by the estimators:
/// the zero count in 1D; otherwise interior hyperplanes at full weight, plus
/// the Dirichlet boundary at half weight unless boundary vertices are dropped.
pub fn nodal_measure_oracle(mode: &EigenMode, exclude_boundary: bool) -> f64 {
    let domain = mode.domain();
    let n = domain.dim();
    let closed = !domain.is_periodic();
    if n == 1 {
        let k = mode.m()[0] as f64;
        return if exclude_boundary { k - 1.0 } else { k + 1.0 };
    }
    let mut total = 0.0;
    for j in 0..n {
        let len = domain.axis_length(j);
        let face: f64 = (0..n).filter(|&i| i != j).map(|i| domain.axis_length(i)).product();
        let planes = match mode.axis_zero_spacing(j) {
            Some(s) => {
                let gaps = (len / s).round();
                if closed {
                    gaps - 1.0 + if exclude_boundary { 0.0 } else { 1.0 }
                } else {
                    gaps
                }
            }
            None if closed && !exclude_boundary => 1.0,
            None => 0.0,
        };
        total += planes * face;
    }
    total
}

/// Tube widths, either as μδ targets or as absolute δ values.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Widths {
    MuDelta(Vec<f64>),
    Delta(Vec<f64>),
}

impl Widths {
    pub fn validate(&self) -> Result<()> {
        let (Widths::MuDelta(v) | Widths::Delta(v)) = self;
        if v.is_empty() || v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::invalid("tube widths must be a nonempty list of positive numbers"));
        }
        Ok(())
    }

    /// `(δ, μδ)` pairs for `mode`.
    pub fn for_mode(&self, mode: &EigenMode) -> Vec<(f64, f64)> {
        let mu = mode.mu();
        match self {
            Widths::MuDelta(v) => v.iter().map(|&md| (md / mu, md)).collect(),
            Widths::Delta(v) => v.iter().map(|&d| (d, d * mu)).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TubeScalingOptions {
    pub points_per_wavelength: f64,
    /// Largest band ratio max/min of Vol/(μδ) that passes.
    pub band_cap: f64,
    /// Cells with μδ above this are reported but excluded from the gates.
    pub mu_delta_window: f64,
    pub oracle_tolerance: f64,
    pub tile_cells: usize,
    pub subsamples: usize,
}

impl Default for TubeScalingOptions {
    fn default() -> Self {
        Self {
            points_per_wavelength: 16.0,
            band_cap: 4.0,
            mu_delta_window: 0.3,
            oracle_tolerance: 0.02,
            tile_cells: 384,
            subsamples: DEFAULT_SUBSAMPLES,
        }
    }
}

fn tube_at(mode: &EigenMode, delta: f64, ppw: f64, divisor: f64, opts: &TubeScalingOptions) -> Result<f64> {
    let res = Resolution::new(ppw).with_max_h(delta / divisor);
    let lattice = Lattice::for_mode(mode, &res)?;
    tube_volume_tiled(mode, &lattice, delta, opts.subsamples, opts.tile_cells)
}

/// Vol(T_{μ,δ})/(μδ) over modes × μδ targets.
pub fn run_tube_scaling(
    domain: &DomainSpec,
    modes: &[EigenMode],
    widths: &Widths,
    opts: &TubeScalingOptions,
) -> Result<ExperimentReport> {
    widths.validate()?;
    let mut report = ExperimentReport::new("tube", domain);
    report.param("widths", widths);
    report.param("modes", modes.iter().map(mode_label).collect::<Vec<_>>());
    report.param("options", opts);
    report.provenance.resolution = format!(
        "h <= delta/3 (error from delta/2), ppw >= {}, refined estimator s={}",
        opts.points_per_wavelength, opts.subsamples
    );
    let jobs: Vec<(&EigenMode, f64, f64)> = modes
        .iter()
        .flat_map(|m| widths.for_mode(m).into_iter().map(move |(d, md)| (m, d, md)))
        .collect();
    let cells: Vec<Cell> = jobs
        .iter()
        .map(|&(mode, delta, md)| {
            let mu = mode.mu();
            let mut cell = Cell::new(format!("{} md={md}", mode_label(mode)))
                .param("mu", mu)
                .param("delta", delta)
                .param("mu_delta", md);
            let fine = tube_at(mode, delta, opts.points_per_wavelength, 3.0, opts);
            let coarse = tube_at(mode, delta, opts.points_per_wavelength, 2.0, opts);
            match (fine, coarse) {
                (Ok(v), Ok(vc)) => {
                    let err = (v - vc).abs();
                    let exact = exact_tube_volume(mode, delta);
                    cell.value("volume", v, Some(err));
                    cell.value("ratio", v / (mu * delta), Some(err / (mu * delta)));
                    cell.value("exact_volume", exact, None);
                    cell.value("exact_ratio", exact / (mu * delta), None);
                    cell.value("oracle_rel_err", (v - exact).abs() / exact, None);
                    cell.value("saturation", v / domain.volume(), None);
                }
                (Err(e), _) | (_, Err(e)) => cell.skipped = Some(e.to_string()),
            }
            cell.excluded = md > opts.mu_delta_window;
            cell
        })
        .collect();
    report.cells = cells;
    let ratios = report.counted_values("ratio");
    let (lo, hi) = extremes(&ratios);
    report.summary.insert("band_min".into(), lo);
    report.summary.insert("band_max".into(), hi);
    let max_err = report.counted_values("oracle_rel_err").into_iter().fold(0.0, f64::max);
    report.summary.insert("max_oracle_rel_err".into(), max_err);
    report.gate("band_ratio", band_ratio(&ratios), None, Some(opts.band_cap));
    report.gate("oracle_agreement", if ratios.is_empty() { f64::NAN } else { max_err }, None, Some(opts.oracle_tolerance));
    Ok(report)
}

fn field_for(
    mode: &EigenMode,
    lattice: &Lattice,
    cache: &FieldCache,
    exclude_boundary: bool,
) -> Result<(GridSample, NodalApprox, DistanceField)> {
    let sample = sample_lattice_capped(mode, lattice, DEFAULT_MAX_POINTS)?;
    let mut nodal = extract_nodal(&sample);
    let field = if exclude_boundary && !mode.domain().is_periodic() {
        nodal = nodal.without_boundary(mode.domain());
        distance_field(&nodal, &sample)?
    } else {
        cache.distance_field(mode, lattice)?
    };
    Ok((sample, nodal, field))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FieldOptions {
    pub points_per_wavelength: f64,
    pub exclude_boundary: bool,
}

impl Default for FieldOptions {
    fn default() -> Self {
        Self {
            points_per_wavelength: 32.0,
            exclude_boundary: false,
        }
    }
}

/// Nodal measure / μ per mode.
pub fn run_yau_check(
    domain: &DomainSpec,
    modes: &[EigenMode],
    opts: &FieldOptions,
    cache: &FieldCache,
) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("yau", domain);
    report.param("modes", modes.iter().map(mode_label).collect::<Vec<_>>());
    report.param("options", opts);
    report.provenance.resolution = format!("h <= 2pi/(ppw mu), ppw {}, t = 4h, 3h, 2h", opts.points_per_wavelength);
    for mode in modes {
        let mu = mode.mu();
        let mut cell = Cell::new(mode_label(mode)).param("mu", mu);
        let run = || -> Result<_> {
            // isotropic spacing so that t = 4h stays below every line spacing
            let ppw = opts.points_per_wavelength;
            let res = Resolution::new(ppw).with_max_h(2.0 * PI / (ppw * mu));
            let lattice = Lattice::for_mode(mode, &res)?;
            let (_, nodal, field) = field_for(mode, &lattice, cache, opts.exclude_boundary)?;
            let h = lattice.max_h();
            let m = nodal_measure(&field, &nodal, &[4.0 * h, 3.0 * h, 2.0 * h])?;
            Ok((m, h))
        };
        match run() {
            Ok((m, h)) => {
                let spread = {
                    let (lo, hi) = extremes(&m.ratios.iter().map(|r| r.1).collect::<Vec<_>>());
                    hi - lo
                };
                let err = match m.segment_length {
                    Some(s) => (s - m.estimate).abs(),
                    None if domain.dim() == 1 => 0.0,
                    None => spread,
                };
                let exact = nodal_measure_oracle(mode, opts.exclude_boundary);
                cell.value("measure", m.estimate, Some(err));
                cell.value("ratio", m.estimate / mu, Some(err / mu));
                cell.value("exact_measure", exact, None);
                cell.value("oracle_rel_err", (m.estimate - exact).abs() / exact, None);
                cell.value("flagged", m.flagged as u8 as f64, None);
                cell.value("h", h, None);
                if let Some(s) = m.segment_length {
                    cell.value("segment_length", s, None);
                }
                if let Some(d) = m.disagreement {
                    cell.value("estimator_disagreement", d, None);
                }
            }
            Err(e) => cell.skipped = Some(e.to_string()),
        }
        report.cells.push(cell);
    }
    let ratios = report.counted_values("ratio");
    let (lo, hi) = extremes(&ratios);
    report.summary.insert("ratio_min".into(), lo);
    report.summary.insert("ratio_max".into(), hi);
    report.gate("band_ratio", band_ratio(&ratios), None, Some(2.0));
    let errs = report.counted_values("oracle_rel_err");
    let max_err = if errs.is_empty() { f64::NAN } else { errs.iter().cloned().fold(0.0, f64::max) };
    report.gate("oracle_agreement", max_err, None, Some(0.03));
    if domain.dim() == 2 {
        let d = report.counted_values("estimator_disagreement").into_iter().fold(0.0, f64::max);
        report.gate("estimator_agreement", d, None, Some(crate::nodal_geom::MEASURE_TOLERANCE));
    }
    Ok(report)
}

/// density_radius · μ per mode against the cell-inradius oracle.
pub fn run_density_check(
    domain: &DomainSpec,
    modes: &[EigenMode],
    opts: &FieldOptions,
    cache: &FieldCache,
) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("density", domain);
    report.param("modes", modes.iter().map(mode_label).collect::<Vec<_>>());
    report.param("options", opts);
    report.provenance.resolution = format!("ppw {}", opts.points_per_wavelength);
    for mode in modes {
        let mu = mode.mu();
        let mut cell = Cell::new(mode_label(mode)).param("mu", mu);
        let run = || -> Result<_> {
            let lattice = Lattice::for_mode(mode, &Resolution::new(opts.points_per_wavelength))?;
            let (_, _, field) = field_for(mode, &lattice, cache, false)?;
            Ok((density_radius(&field)?, lattice.max_h()))
        };
        match run() {
            Ok((r, h)) => {
                cell.value("radius_mu", r * mu, Some(2.0 * h * mu));
                cell.value("h", h, None);
                if let Some(oracle) = density_oracle(mode) {
                    cell.value("oracle_mu", oracle * mu, None);
                    cell.value("excess", r / oracle, None);
                    cell.value("dev_in_h", (r - oracle).abs() / h, None);
                }
            }
            Err(e) => cell.skipped = Some(e.to_string()),
        }
        report.cells.push(cell);
    }
    let rmu = report.counted_values("radius_mu");
    report.summary.insert("max_radius_mu".into(), rmu.iter().cloned().fold(f64::NAN, f64::max));
    let excess = report.counted_values("excess").into_iter().fold(f64::NAN, f64::max);
    report.gate("bounded_by_cell_formula", excess, None, Some(1.05));
    let dev = report.counted_values("dev_in_h").into_iter().fold(f64::NAN, f64::max);
    report.gate("within_2h_of_oracle", dev, None, Some(2.0));
    Ok(report)
}

/// Nodal domains on a 2D sign grid: 4-connectivity, torus wrap, exact zeros
/// excluded.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalDomains {
    /// Component id per lattice point (`usize::MAX` at zeros).
    pub labels: Vec<usize>,
    pub count: usize,
    /// Area of each component.
    pub areas: Vec<f64>,
    /// Largest distance to the nodal set inside each component.
    pub inradius: Vec<f64>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

pub fn nodal_domains(sample: &GridSample, field: &DistanceField) -> Result<NodalDomains> {
    if sample.dim() != 2 {
        return Err(Error::invalid("nodal domains are computed for 2D samples"));
    }
    let (nx, ny) = (sample.shape.dims[0], sample.shape.dims[1]);
    let v = &sample.values;
    let sign = |i: usize| (v[i] > 0.0) as i8 - (v[i] < 0.0) as i8;
    let mut uf = UnionFind::new(v.len());
    let neighbors = |i: usize, j: usize| -> [Option<(usize, usize)>; 4] {
        let right = if i + 1 < nx { Some((i + 1, j)) } else if sample.wrap[0] { Some((0, j)) } else { None };
        let up = if j + 1 < ny { Some((i, j + 1)) } else if sample.wrap[1] { Some((i, 0)) } else { None };
        let left = if i > 0 { Some((i - 1, j)) } else if sample.wrap[0] { Some((nx - 1, j)) } else { None };
        let down = if j > 0 { Some((i, j - 1)) } else if sample.wrap[1] { Some((i, ny - 1)) } else { None };
        [right, up, left, down]
    };
    for i in 0..nx {
        for j in 0..ny {
            let a = i * ny + j;
            let s = sign(a);
            if s == 0 {
                continue;
            }
            for (p, q) in neighbors(i, j).into_iter().take(2).flatten() {
                let b = p * ny + q;
                if sign(b) == s {
                    uf.union(a, b);
                }
            }
        }
    }
    let mut ids = BTreeMap::new();
    let mut labels = vec![usize::MAX; v.len()];
    for a in 0..v.len() {
        if sign(a) != 0 {
            let r = uf.find(a);
            let next = ids.len();
            labels[a] = *ids.entry(r).or_insert(next);
        }
    }
    let count = ids.len();
    let cell = sample.lattice.cell_volume();
    let mut areas = vec![0.0; count];
    let mut inradius = vec![0.0f64; count];
    for i in 0..nx {
        for j in 0..ny {
            let a = i * ny + j;
            if labels[a] != usize::MAX {
                areas[labels[a]] += cell;
                inradius[labels[a]] = inradius[labels[a]].max(field.dist[a]);
                continue;
            }
            let mut adj: Vec<usize> = neighbors(i, j)
                .into_iter()
                .flatten()
                .map(|(p, q)| labels[p * ny + q])
                .filter(|&l| l != usize::MAX)
                .collect();
            adj.sort_unstable();
            adj.dedup();
            for &l in &adj {
                areas[l] += cell / adj.len() as f64;
            }
        }
    }
    Ok(NodalDomains {
        labels,
        count,
        areas,
        inradius,
    })
}

/// Rectangle-cell oracle for product modes: (count, area, inradius).
pub fn product_cell_oracle(mode: &EigenMode) -> Option<(usize, f64, f64)> {
    let domain = mode.domain();
    let mut count = 1usize;
    let mut area = 1.0;
    let mut inr = f64::INFINITY;
    for j in 0..domain.dim() {
        let len = domain.axis_length(j);
        match mode.axis_zero_spacing(j) {
            Some(s) => {
                count *= (len / s).round() as usize;
                area *= s;
                inr = inr.min(s / 2.0);
            }
            None => area *= len,
        }
    }
    inr.is_finite().then_some((count, area, inr))
}

/// Smallest Courant index carrying the mode's eigenvalue.
pub fn courant_index(mode: &EigenMode) -> Result<u64> {
    let domain = mode.domain();
    let below = weyl_count(domain, mode.mu() * (1.0 - 1e-9))?;
    Ok(below + 1 + domain.is_periodic() as u64)
}

pub fn run_dim2_checks(
    domain: &DomainSpec,
    modes: &[EigenMode],
    mu_delta: f64,
    opts: &FieldOptions,
) -> Result<ExperimentReport> {
    if domain.dim() != 2 {
        return Err(Error::invalid("dim2 checks need a 2D domain"));
    }
    if !(mu_delta.is_finite() && mu_delta > 0.0) {
        return Err(Error::invalid("mu*delta must be positive"));
    }
    let mut report = ExperimentReport::new("dim2", domain);
    report.param("modes", modes.iter().map(mode_label).collect::<Vec<_>>());
    report.param("mu_delta", mu_delta);
    report.param("options", opts);
    report.provenance.resolution = format!("ppw {}, h <= delta/3", opts.points_per_wavelength);
    let mut count_ok = true;
    let (mut worst_area, mut worst_inr, mut worst_c, mut courant_excess) = (0.0f64, 0.0f64, 0.0f64, f64::NEG_INFINITY);
    for mode in modes {
        let mu = mode.mu();
        let delta = mu_delta / mu;
        let mut cell = Cell::new(mode_label(mode)).param("mu", mu).param("delta", delta);
        let run = || -> Result<_> {
            let res = Resolution::new(opts.points_per_wavelength).with_max_h(delta / 3.0);
            let lattice = Lattice::for_mode(mode, &res)?;
            let sample = sample_lattice_capped(mode, &lattice, DEFAULT_MAX_POINTS)?;
            let nodal = extract_nodal(&sample);
            let field = distance_field(&nodal, &sample)?;
            let doms = nodal_domains(&sample, &field)?;
            let vol = tube_volume(&field, delta)?;
            Ok((doms, vol, nodal.measure_2d.unwrap_or(0.0), lattice.max_h()))
        };
        match run() {
            Ok((doms, vol, length, h)) => {
                let min_area = doms.areas.iter().cloned().fold(f64::INFINITY, f64::min);
                let max_r = doms.inradius.iter().cloned().fold(0.0, f64::max);
                let c = vol / (length * delta);
                let courant = courant_index(mode)? as f64;
                cell.value("components", doms.count as f64, None);
                cell.value("min_area", min_area, Some(2.0 * h * min_area.sqrt() * 2.0));
                cell.value("min_area_mu2", min_area * mu * mu, None);
                cell.value("inradius_mu", max_r * mu, Some(2.0 * h * mu));
                cell.value("tube_volume", vol, None);
                cell.value("length", length, None);
                cell.value("vol_over_length_delta", c, None);
                cell.value("courant_index", courant, None);
                worst_c = worst_c.max(c);
                courant_excess = courant_excess.max(doms.count as f64 - courant);
                if let Some((n, area, inr)) = product_cell_oracle(mode) {
                    cell.value("oracle_components", n as f64, None);
                    cell.value("oracle_area", area, None);
                    cell.value("oracle_inradius_mu", inr * mu, None);
                    count_ok &= n == doms.count;
                    worst_area = worst_area.max((min_area - area).abs() / area);
                    worst_inr = worst_inr.max((max_r - inr).abs() / inr);
                }
            }
            Err(e) => cell.skipped = Some(e.to_string()),
        }
        report.cells.push(cell);
    }
    let any = report.counted().count() > 0;
    let nan_if_none = |x: f64| if any { x } else { f64::NAN };
    report.gate("component_count_exact", nan_if_none(count_ok as u8 as f64), Some(1.0), None);
    report.gate("min_area_vs_oracle", nan_if_none(worst_area), None, Some(0.05));
    report.gate("inradius_vs_oracle", nan_if_none(worst_inr), None, Some(0.05));
    report.gate("vol_over_length_delta", nan_if_none(worst_c), None, Some(3.0));
    report.gate("courant_excess", nan_if_none(courant_excess), None, Some(0.0));
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComparabilityOptions {
    pub a: f64,
    /// Lattice points per δ (box sides exceed δ, so ≥ this many per side).
    pub points_per_delta: f64,
}

impl Default for ComparabilityOptions {
    fn default() -> Self {
        Self {
            a: 10.0,
            points_per_delta: 10.0,
        }
    }
}

pub fn run_comparability_scaling(
    domain: &DomainSpec,
    mode: &EigenMode,
    widths: &Widths,
    opts: &ComparabilityOptions,
) -> Result<ExperimentReport> {
    widths.validate()?;
    if !(opts.a.is_finite() && opts.a > 1.0) {
        return Err(Error::invalid(format!("A = {} must exceed 1", opts.a)));
    }
    let mut report = ExperimentReport::new("boxes", domain);
    report.param("mode", mode_label(mode));
    report.param("widths", widths);
    report.param("options", opts);
    report.provenance.resolution = format!("h <= delta/{} (error from delta/8)", opts.points_per_delta);
    let mu = mode.mu();
    for (delta, md) in widths.for_mode(mode) {
        let mut cell = Cell::new(format!("{} md={md}", mode_label(mode)))
            .param("mu", mu)
            .param("delta", delta)
            .param("mu_delta", md);
        let at = |per: f64| -> Result<_> {
            let res = Resolution::new(8.0).with_max_h(delta / per);
            let lattice = Lattice::for_mode(mode, &res)?;
            let sample = sample_lattice_capped(mode, &lattice, DEFAULT_MAX_POINTS)?;
            let sub = subdivide_domain(domain, delta)?;
            let comp = comparability_set(&sample, &sub, opts.a)?;
            Ok((sample, comp))
        };
        match at(opts.points_per_delta).and_then(|f| at(8.0).map(|c| (f, c))) {
            Ok(((sample, comp), (_, coarse))) => {
                let e = comp.volume;
                let err = (e - coarse.volume).abs();
                let bad = bad_proportion(&comp.stats);
                let growth = growth_statistic(&sample, &comp.stats)?;
                cell.value("e_volume", e, Some(err));
                cell.value("e_over_mu_delta", e / md, Some(err / md));
                cell.value("bad_proportion", bad, None);
                if e > 0.0 {
                    cell.value("bad_over_e", bad / e, None);
                }
                cell.value("boxes", comp.stats.points.len() as f64, None);
                cell.value("growth_c", growth.c, None);
                cell.value("growth_tested", growth.tested as f64, None);
            }
            Err(e) => cell.skipped = Some(e.to_string()),
        }
        report.cells.push(cell);
    }
    let r = report.counted_values("e_over_mu_delta");
    report.gate("e_band_ratio", band_ratio(&r), None, Some(2.0));
    let pts: Vec<(f64, f64)> = report
        .counted()
        .filter_map(|c| Some((c.params["mu_delta"].ln(), c.get("e_volume")?.ln())))
        .collect();
    let slope = fit_slope(&pts.iter().map(|p| p.0).collect::<Vec<_>>(), &pts.iter().map(|p| p.1).collect::<Vec<_>>());
    report.summary.insert("loglog_slope".into(), slope);
    report.gate("loglog_slope", slope, Some(0.7), Some(1.3));
    Ok(report)
}

fn nodal_boxes_at(mode: &EigenMode, delta: f64, per: f64, tile: usize) -> Result<(usize, usize)> {
    let domain = mode.domain();
    let res = Resolution::new(8.0).with_max_h(delta / per);
    let lattice = Lattice::for_mode(mode, &res)?;
    let sub = subdivide_domain(domain, delta)?;
    let verts = nodal_vertices_tiled(mode, &lattice, tile)?;
    let count = nodal_box_count_points(&sub, verts.iter().map(|v| &v[..])).count;
    Ok((count, sub.box_count()))
}

/// Nodal box counts, normalized as count·δ^{n−1}/μ.
pub fn run_nodal_box_law(
    domain: &DomainSpec,
    modes: &[EigenMode],
    widths: &Widths,
    band_cap: f64,
) -> Result<ExperimentReport> {
    widths.validate()?;
    let mut report = ExperimentReport::new("nodal-boxes", domain);
    report.param("modes", modes.iter().map(mode_label).collect::<Vec<_>>());
    report.param("widths", widths);
    report.param("band_cap", band_cap);
    report.provenance.resolution = "vertices at h <= delta/4 (error from delta/2)".into();
    let n = domain.dim() as i32;
    for mode in modes {
        for (delta, md) in widths.for_mode(mode) {
            let mu = mode.mu();
            let mut cell = Cell::new(format!("{} md={md}", mode_label(mode)))
                .param("mu", mu)
                .param("delta", delta)
                .param("mu_delta", md);
            let fine = nodal_boxes_at(mode, delta, 4.0, 512);
            let coarse = nodal_boxes_at(mode, delta, 2.0, 512);
            match (fine, coarse) {
                (Ok((c, total)), Ok((cc, _))) => {
                    let scale = delta.powi(n - 1) / mu;
                    cell.value("count", c as f64, Some(c.abs_diff(cc) as f64));
                    cell.value("normalized", c as f64 * scale, Some(c.abs_diff(cc) as f64 * scale));
                    cell.value("boxes", total as f64, None);
                    cell.value("nodal_fraction", c as f64 / total as f64, None);
                }
                (Err(e), _) | (_, Err(e)) => cell.skipped = Some(e.to_string()),
            }
            report.cells.push(cell);
        }
    }
    let v = report.counted_values("normalized");
    let (lo, hi) = extremes(&v);
    report.summary.insert("normalized_min".into(), lo);
    report.summary.insert("normalized_max".into(), hi);
    report.gate("band_ratio", band_ratio(&v), None, Some(band_cap));
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApproxOptions {
    pub c: f64,
    pub epsilon: f64,
    pub k_max: usize,
    pub points: usize,
    pub seed: u64,
    pub k0: Vec<usize>,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 1.0,
            k_max: 10_000,
            points: 10_000,
            seed: 1,
            k0: vec![10, 30, 100, 300, 1000],
        }
    }
}

/// Largest 1-based mode index with `dist < C/μ^b`, per point.
fn last_hits(points: &[Vec<f64>], modes: &[EigenMode], b: f64, c: f64) -> Vec<usize> {
    let radii: Vec<f64> = modes.iter().map(|m| c / m.mu().powf(b)).collect();
    points
        .par_iter()
        .map(|p| {
            let mut last = 0;
            for (i, mode) in modes.iter().enumerate() {
                let mut d = f64::INFINITY;
                for (j, &x) in p.iter().enumerate() {
                    if let Some(dj) = mode.axis_zero_distance(j, x) {
                        d = d.min(dj);
                    }
                }
                if d < radii[i] {
                    last = i + 1;
                }
            }
            last
        })
        .collect()
}

/// Borel–Cantelli partial sums and the measure-decay proxy at
/// `b = n + 1 + ε`.
pub fn run_borel_cantelli(domain: &DomainSpec, opts: &ApproxOptions) -> Result<ExperimentReport> {
    if opts.points == 0 || opts.k_max == 0 || !(opts.c.is_finite() && opts.c > 0.0) {
        return Err(Error::invalid("borel-cantelli needs points > 0, k_max > 0 and C > 0"));
    }
    let mut report = ExperimentReport::new("borel-cantelli", domain);
    report.param("options", opts);
    report.provenance.seed = Some(opts.seed);
    report.provenance.resolution = "exact separable tube volumes".into();
    let bc = borel_cantelli_sum(domain, opts.c, opts.epsilon, opts.k_max)?;
    let modes = modes_for_count(domain, opts.k_max)?;
    let n = domain.dim() as f64;
    let b = n + 1.0 + opts.epsilon;
    let points = sample_points(domain, opts.points, opts.seed);
    let last = last_hits(&points, &modes.modes, b, opts.c);
    let c_ctrl = PI * n.sqrt();
    let ctrl = last_hits(&points, &modes.modes, 1.0, c_ctrl);
    let total = bc.last();
    let vol = domain.volume();
    let np = opts.points as f64;
    let mut worst_margin = f64::NEG_INFINITY;
    let mut ctrl_min = f64::INFINITY;
    for &(k, gap) in &bc.cauchy_gaps {
        let mut cell = Cell::new(format!("cauchy K={k}")).param("k", k as f64);
        cell.value("s_2k_minus_s_k", gap, None);
        report.cells.push(cell);
    }
    for &k0 in &opts.k0 {
        let mut cell = Cell::new(format!("k0={k0}")).param("k0", k0 as f64);
        if k0 >= modes.len() {
            cell.skipped = Some(format!("k0 {k0} beyond the {} scanned modes", modes.len()));
            report.cells.push(cell);
            continue;
        }
        let frac = last.iter().filter(|&&l| l > k0).count() as f64 / np;
        let ctrl_frac = ctrl.iter().filter(|&&l| l > k0).count() as f64 / np;
        let tail = total - bc.partial_sums[k0 - 1];
        let bound = (tail / vol).min(1.0);
        let se = (bound * (1.0 - bound) / np).sqrt();
        cell.value("hit_fraction", frac, Some((frac * (1.0 - frac) / np).sqrt()));
        cell.value("tail_sum", tail, None);
        cell.value("tail_bound", bound, None);
        cell.value("binomial_se", se, None);
        cell.value("control_fraction", ctrl_frac, None);
        worst_margin = worst_margin.max(frac - (bound + 3.0 * se));
        ctrl_min = ctrl_min.min(ctrl_frac);
        report.cells.push(cell);
    }
    report.summary.insert("partial_sum".into(), total);
    report.summary.insert("comparison_sum".into(), bc.comparison.last().copied().unwrap_or(0.0));
    if domain.kind == DomainKind::Interval && opts.c == 1.0 && opts.epsilon == 1.0 {
        report.summary.insert("limit_gap".into(), (PI * PI / 3.0 - total).abs());
    }
    let gaps: Vec<f64> = bc.cauchy_gaps.iter().map(|g| g.1).collect();
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    report.summary.insert("cauchy_gaps_monotone".into(), monotone as u8 as f64);
    let last_gap = gaps.last().copied().unwrap_or(f64::NAN);
    report.gate("cauchy_gap_shrinks", last_gap / gaps.first().copied().unwrap_or(f64::NAN), None, Some(1.0));
    report.gate("hit_fraction_within_tail_bound", worst_margin, None, Some(0.0));
    report.gate("b1_control_all_hit", ctrl_min, Some(1.0), None);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentOptions {
    pub mu_max: f64,
    pub points: usize,
    pub seed: u64,
    pub window: FitWindow,
    pub metric: Metric,
    pub convention: CountingConvention,
    pub mean_band: (f64, f64),
    pub point_band: (f64, f64),
    pub point_fraction: f64,
}

impl ExponentOptions {
    /// Defaults with acceptance bands for the domain's dimension: the
    /// interval also gates individual points.
    pub fn for_domain(domain: &DomainSpec) -> Self {
        if domain.dim() == 1 {
            Self::default()
        } else {
            Self {
                mu_max: 2000.0,
                points: 50,
                mean_band: (1.7, 2.3),
                point_fraction: 0.0,
                ..Self::default()
            }
        }
    }
}

impl Default for ExponentOptions {
    fn default() -> Self {
        Self {
            mu_max: 1e5,
            points: 100,
            seed: 1,
            window: FitWindow::default(),
            metric: Metric::Euclidean,
            convention: CountingConvention::Modes,
            mean_band: (1.8, 2.2),
            point_band: (1.6, 2.4),
            point_fraction: 0.9,
        }
    }
}

/// Per-point exponent estimates and their population statistics.
pub fn run_exponents(domain: &DomainSpec, opts: &ExponentOptions) -> Result<ExperimentReport> {
    if opts.points == 0 || !(opts.mu_max.is_finite() && opts.mu_max > 0.0) {
        return Err(Error::invalid("exponent runs need points > 0 and a positive mu_max"));
    }
    let mut report = ExperimentReport::new("dioph", domain);
    report.param("options", opts);
    report.provenance.seed = Some(opts.seed);
    report.provenance.resolution = "closed-form nodal distances".into();
    let modes = enumerate_modes_capped(domain, opts.mu_max, DEFAULT_MODE_CAP)?;
    if modes.is_empty() {
        return Err(Error::invalid(format!("no modes below mu_max {}", opts.mu_max)));
    }
    let points = sample_points(domain, opts.points, opts.seed);
    // Records depend only on the running minimum over μ, which is the same
    // whether equal eigenvalues are grouped or not.
    let est = estimate_exponents(&points, &modes, opts.window)?;
    let mut finite = Vec::new();
    for (i, e) in est.iter().enumerate() {
        let mut cell = Cell::new(format!("point {i}"));
        for (j, x) in e.point.iter().enumerate() {
            cell.params.insert(format!("x{j}"), *x);
        }
        cell.value("b_hat", e.b_hat, Some(e.residual));
        cell.value("records", e.records as f64, None);
        cell.value("mu_lo", e.mu_lo, None);
        cell.value("mu_hi", e.mu_hi, None);
        cell.value("low_confidence", e.low_confidence as u8 as f64, None);
        cell.value("exact_hit", e.exact_hit as u8 as f64, None);
        if e.b_hat.is_finite() {
            finite.push(e.b_hat);
        }
        report.cells.push(cell);
    }
    let mean = finite.iter().sum::<f64>() / finite.len() as f64;
    let mut sorted = finite.clone();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| sorted.get(((sorted.len() as f64 - 1.0) * p).round() as usize).copied().unwrap_or(f64::NAN);
    let in_band = finite.iter().filter(|&&b| b >= opts.point_band.0 && b <= opts.point_band.1).count();
    report.summary.insert("mean_b_hat".into(), mean);
    report.summary.insert("q10".into(), q(0.1));
    report.summary.insert("median".into(), q(0.5));
    report.summary.insert("q90".into(), q(0.9));
    report.summary.insert("points_in_band".into(), in_band as f64);
    report.summary.insert("modes".into(), modes.len() as f64);
    report.summary.insert(
        "exact_hits".into(),
        est.iter().filter(|e| e.exact_hit).count() as f64,
    );
    report.gate("mean_b_hat", mean, Some(opts.mean_band.0), Some(opts.mean_band.1));
    report.gate("fraction_in_point_band", in_band as f64 / opts.points as f64, Some(opts.point_fraction), None);
    Ok(report)
}

/// Mode listing with Weyl counts.
pub fn run_spectrum(domain: &DomainSpec, mu_max: f64, convention: CountingConvention) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("spectrum", domain);
    report.param("mu_max", mu_max);
    report.param("convention", convention);
    let modes = enumerate_modes_capped(domain, mu_max, DEFAULT_MODE_CAP)?;
    if modes.is_empty() {
        report.warnings.push(format!("no modes with mu <= {mu_max}"));
    }
    for (i, mode) in modes.modes.iter().enumerate() {
        let mut cell = Cell::new(mode_label(mode)).param("k", (i + 1) as f64);
        cell.value("mu", mode.mu(), None);
        report.cells.push(cell);
    }
    let count = match convention {
        CountingConvention::Modes => modes.len(),
        CountingConvention::Distinct => modes.eigenvalue_groups().len(),
    };
    report.summary.insert("count".into(), count as f64);
    if mu_max > 0.0 {
        report
            .summary
            .insert("weyl_ratio".into(), count as f64 / mu_max.powi(domain.dim() as i32));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus() -> DomainSpec {
        DomainSpec::flat_torus(vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn interval_tube_cells_are_two() {
        let d = DomainSpec::interval();
        let modes: Vec<EigenMode> = [10, 20].iter().map(|&k| EigenMode::new(d.clone(), &[k]).unwrap()).collect();
        let r = run_tube_scaling(&d, &modes, &Widths::MuDelta(vec![0.05, 0.1, 3.0]), &TubeScalingOptions::default()).unwrap();
        for c in r.cells.iter().filter(|c| !c.excluded) {
            assert!((c.get("ratio").unwrap() - 2.0).abs() < 0.04, "{c:?}");
            assert!((c.get("exact_ratio").unwrap() - 2.0).abs() < 1e-12);
        }
        // μδ = 3 saturates: Vol is the whole interval
        let sat = r.cells.iter().find(|c| c.excluded).unwrap();
        assert!((sat.get("exact_volume").unwrap() - PI).abs() < 1e-12);
        assert!(r.passed, "{}", r.summary_line());
    }

    #[test]
    fn dim2_product_mode() {
        let d = torus();
        let mode = EigenMode::new(d.clone(), &[3, 4]).unwrap();
        let r = run_dim2_checks(&d, &[mode], 0.2, &FieldOptions::default()).unwrap();
        let c = &r.cells[0];
        assert_eq!(c.get("components"), Some(48.0));
        let area = (PI / 3.0) * (PI / 4.0);
        assert!((c.get("min_area").unwrap() - area).abs() / area < 0.03);
        assert!((c.get("inradius_mu").unwrap() - 5.0 * PI / 8.0).abs() / (5.0 * PI / 8.0) < 0.05);
        assert!(r.passed, "{}", r.summary_line());
    }

    #[test]
    fn union_find_on_synthetic_grid() {
        // two positive blobs separated by a negative column, on a closed box
        let d = DomainSpec::dirichlet_box(vec![1.0, 1.0]).unwrap();
        let lat = Lattice::with_max_spacing(&d, &[PI / 4.0, PI / 4.0]).unwrap();
        assert_eq!(lat.counts, vec![5, 5]);
        let mut vals = vec![1.0; 25];
        for j in 0..5 {
            vals[2 * 5 + j] = -1.0;
        }
        let s = GridSample::from_values(d, lat, vals, 1.0).unwrap();
        let f = distance_field(&extract_nodal(&s), &s).unwrap();
        let doms = nodal_domains(&s, &f).unwrap();
        assert_eq!(doms.count, 3);
        let total: f64 = doms.areas.iter().sum();
        assert!((total - 25.0 * s.lattice.cell_volume()).abs() < 1e-12);
    }

    #[test]
    fn courant_indices() {
        let d = DomainSpec::interval();
        let m = EigenMode::new(d, &[5]).unwrap();
        assert_eq!(courant_index(&m).unwrap(), 5);
        let t = torus();
        let m = EigenMode::new(t, &[1, 0]).unwrap();
        // constant mode first, then the four modes at μ = 1
        assert_eq!(courant_index(&m).unwrap(), 2);
    }

    #[test]
    fn measure_oracles() {
        let t = EigenMode::new(torus(), &[3, 4]).unwrap();
        assert!((nodal_measure_oracle(&t, false) - 4.0 * PI * 7.0).abs() < 1e-12);
        let iv = EigenMode::new(DomainSpec::interval(), &[6]).unwrap();
        assert_eq!(nodal_measure_oracle(&iv, false), 7.0);
        assert_eq!(nodal_measure_oracle(&iv, true), 5.0);
        assert!((density_oracle(&t).unwrap() - PI / 8.0).abs() < 1e-15);
    }

    #[test]
    fn report_files_are_stable() {
        let d = DomainSpec::interval();
        let r1 = run_spectrum(&d, 5.0, CountingConvention::Modes).unwrap();
        let r2 = run_spectrum(&d, 5.0, CountingConvention::Modes).unwrap();
        assert_eq!(r1.to_json().unwrap(), r2.to_json().unwrap());
        assert_eq!(r1.to_csv(), r2.to_csv());
        assert_eq!(r1.file_stem(), r2.file_stem());
        assert!(r1.file_stem().starts_with("spectrum-"));
        let r3 = run_spectrum(&d, 6.0, CountingConvention::Modes).unwrap();
        assert_ne!(r1.file_stem(), r3.file_stem());
        let dir = tempfile::tempdir().unwrap();
        let (j, c) = r1.write(dir.path()).unwrap();
        assert!(j.exists() && c.exists());
        let v: Value = serde_json::from_str(&std::fs::read_to_string(j).unwrap()).unwrap();
        assert_eq!(v["schema"], 1);
    }

    #[test]
    fn empty_spectrum_warns() {
        let d = DomainSpec::dirichlet_box(vec![1.0, 1.0]).unwrap();
        let r = run_spectrum(&d, 0.5, CountingConvention::Modes).unwrap();
        assert!(r.cells.is_empty());
        assert_eq!(r.warnings.len(), 1);
        assert!(r.passed);
    }

    #[test]
    fn gates_fail_on_nan() {
        let mut r = ExperimentReport::new("x", &DomainSpec::interval());
        r.gate("g", f64::NAN, None, Some(1.0));
        assert!(!r.passed);
    }
}
