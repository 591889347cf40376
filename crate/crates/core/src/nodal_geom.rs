//! Lattice sampling of eigenmodes, nodal-set extraction, exact distance
//! fields and tube measurements.
//!
//! Grid values of separable modes are computed from integer phases, so a
//! nodal hyperplane that passes through lattice points produces exact zeros
//! there. The nodal set is approximated by the vertices where the piecewise
//! linear interpolant vanishes along lattice edges; distance fields measure the
//! exact Euclidean distance from every lattice point to that vertex set.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::Range;

use rayon::prelude::*;
use smallvec::SmallVec;

use crate::spectrum::{DomainSpec, EigenMode, FactorKind};
use crate::{Error, Result};

/// Default cap on the number of lattice points in one in-memory sample.
pub const DEFAULT_MAX_POINTS: u64 = 40_000_000;

/// Lattice size cap for the tiled engines, which never hold the whole lattice.
pub const TILED_MAX_POINTS: u64 = 1_000_000_000;

/// Default number of stratified sub-samples per axis in straddling cells.
pub const DEFAULT_SUBSAMPLES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resolution {
    pub points_per_wavelength: f64,
    /// Upper bound on every lattice spacing, typically derived from δ.
    pub max_h: Option<f64>,
}

impl Default for Resolution {
    fn default() -> Self {
        Self {
            points_per_wavelength: 32.0,
            max_h: None,
        }
    }
}

impl Resolution {
    pub fn new(points_per_wavelength: f64) -> Self {
        Self {
            points_per_wavelength,
            max_h: None,
        }
    }

    pub fn with_max_h(mut self, max_h: f64) -> Self {
        self.max_h = Some(max_h);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.points_per_wavelength.is_finite() && self.points_per_wavelength >= 4.0) {
            return Err(Error::invalid(format!(
                "points per wavelength {} must be at least 4",
                self.points_per_wavelength
            )));
        }
        if let Some(h) = self.max_h {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::invalid(format!("spacing cap {h} must be positive")));
            }
        }
        Ok(())
    }
}

/// Global sampling lattice over a domain's fundamental region.
///
/// Closed axes carry `N` points `0, h, …, L` with `h = L/(N-1)`; periodic axes
/// carry `N` points `0, h, …, L-h` with `h = L/N`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    pub counts: Vec<usize>,
    pub h: Vec<f64>,
    pub lengths: Vec<f64>,
    pub periodic: bool,
}

impl Lattice {
    /// Lattice whose spacing on axis `j` is at most `h_max[j]`.
    pub fn with_max_spacing(domain: &DomainSpec, h_max: &[f64]) -> Result<Self> {
        if h_max.len() != domain.dim() {
            return Err(Error::invalid("spacing list does not match the domain dimension"));
        }
        let periodic = domain.is_periodic();
        let mut counts = Vec::with_capacity(h_max.len());
        let mut h = Vec::with_capacity(h_max.len());
        let mut lengths = Vec::with_capacity(h_max.len());
        for (j, &bound) in h_max.iter().enumerate() {
            if !(bound.is_finite() && bound > 0.0) {
                return Err(Error::invalid(format!("spacing bound {bound} must be positive")));
            }
            let len = domain.axis_length(j);
            let segments = (len / bound).ceil();
            if segments > 1e9 {
                return Err(Error::ResourceGuard(format!("axis {j} would need {segments} points")));
            }
            let segments = (segments as usize).max(2);
            let (n, step) = if periodic {
                (segments, len / segments as f64)
            } else {
                (segments + 1, len / segments as f64)
            };
            counts.push(n);
            h.push(step);
            lengths.push(len);
        }
        Ok(Self {
            counts,
            h,
            lengths,
            periodic,
        })
    }

    /// Lattice chosen by the resolution rule for a given mode: on axis `j`
    /// the spacing is at most `2π / (ppw · m_j α_j)` (or `2π / (ppw · μ)` on
    /// a constant axis), at most the caller cap, and every axis carries at
    /// least `ppw` points.
    pub fn for_mode(mode: &EigenMode, res: &Resolution) -> Result<Self> {
        res.validate()?;
        let domain = mode.domain();
        let ppw = res.points_per_wavelength;
        let bounds: Vec<f64> = (0..domain.dim())
            .map(|j| {
                let rate = if mode.m()[j] == 0 { mode.mu() } else { mode.axis_rate(j) };
                let mut b = 2.0 * PI / (ppw * rate);
                b = b.min(domain.axis_length(j) / ppw.ceil());
                if let Some(cap) = res.max_h {
                    b = b.min(cap);
                }
                b
            })
            .collect();
        Self::with_max_spacing(domain, &bounds)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn total_points(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).product()
    }

    pub fn max_h(&self) -> f64 {
        self.h.iter().cloned().fold(0.0, f64::max)
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    /// Number of cells along axis `j`.
    pub fn cells(&self, j: usize) -> usize {
        if self.periodic {
            self.counts[j]
        } else {
            self.counts[j] - 1
        }
    }
}

/// Row-major shape helper (last axis fastest).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shape {
    pub dims: Vec<usize>,
    pub strides: Vec<usize>,
}

impl Shape {
    pub fn new(dims: Vec<usize>) -> Self {
        let mut strides = vec![1; dims.len()];
        for j in (0..dims.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * dims[j + 1];
        }
        Self { dims, strides }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for j in 0..self.dims.len() {
            out[j] = flat / self.strides[j];
            flat %= self.strides[j];
        }
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }
}

/// Mode values on a window of a lattice (the whole lattice for full samples).
#[derive(Clone, Debug)]
pub struct GridSample {
    pub domain: DomainSpec,
    pub lattice: Lattice,
    /// Global lattice index of the first sample point on each axis. May be
    /// negative on periodic axes of partial windows.
    pub origin: Vec<i64>,
    pub shape: Shape,
    /// Axis wraps around (full periodic axis).
    pub wrap: Vec<bool>,
    pub values: Vec<f64>,
    pub mode_mu: f64,
}

impl GridSample {
    pub fn dim(&self) -> usize {
        self.shape.dims.len()
    }

    pub fn h(&self) -> &[f64] {
        &self.lattice.h
    }

    pub fn max_h(&self) -> f64 {
        self.lattice.max_h()
    }

    /// Physical coordinate of local index `i` on axis `j` (unwrapped).
    pub fn coord(&self, j: usize, i: usize) -> f64 {
        (self.origin[j] + i as i64) as f64 * self.lattice.h[j]
    }

    pub fn point(&self, flat: usize) -> SmallVec<[f64; 3]> {
        let mut idx = [0usize; 8];
        let n = self.dim();
        let mut out = SmallVec::new();
        if n <= 8 {
            self.shape.unravel(flat, &mut idx[..n]);
            for j in 0..n {
                out.push(self.coord(j, idx[j]));
            }
        } else {
            let mut v = vec![0; n];
            self.shape.unravel(flat, &mut v);
            for j in 0..n {
                out.push(self.coord(j, v[j]));
            }
        }
        out
    }

    /// Cell counts of the sample (wrapped axes close up).
    pub fn cell_shape(&self) -> Shape {
        Shape::new(
            (0..self.dim())
                .map(|j| if self.wrap[j] { self.shape.dims[j] } else { self.shape.dims[j].saturating_sub(1) })
                .collect(),
        )
    }

    /// Whether the window covers the whole lattice.
    pub fn is_full(&self) -> bool {
        (0..self.dim()).all(|j| self.origin[j] == 0 && self.shape.dims[j] == self.lattice.counts[j])
    }

    /// Sample with caller-supplied values on a full lattice.
    pub fn from_values(domain: DomainSpec, lattice: Lattice, values: Vec<f64>, mode_mu: f64) -> Result<Self> {
        let shape = Shape::new(lattice.counts.clone());
        if values.len() != shape.len() {
            return Err(Error::invalid("value count does not match the lattice"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sample values must be finite"));
        }
        let wrap = vec![lattice.periodic; lattice.dim()];
        Ok(Self {
            domain,
            origin: vec![0; lattice.dim()],
            shape,
            wrap,
            lattice,
            values,
            mode_mu,
        })
    }
}

/// `sin(π num / den)` for `0 ≤ num < 2 den`, exactly zero at multiples of π.
fn sin_pi_ratio(num: u64, den: u64) -> f64 {
    debug_assert!(num < 2 * den);
    if num == 0 || num == den {
        return 0.0;
    }
    let (sign, r) = if num > den { (-1.0, num - den) } else { (1.0, num) };
    let r = r.min(den - r);
    sign * (PI * r as f64 / den as f64).sin()
}

/// Factor values of one axis at global lattice indices `start..start+len`.
fn axis_factor_values(mode: &EigenMode, lattice: &Lattice, j: usize, start: i64, len: usize) -> Vec<f64> {
    let m = mode.m()[j] as u64;
    if m == 0 {
        return vec![1.0; len];
    }
    let n = lattice.counts[j] as i64;
    (0..len)
        .map(|i| {
            let g = start + i as i64;
            if lattice.periodic {
                // m α x = 2π m g / N
                let g = g.rem_euclid(n) as u64;
                let den = n as u64;
                let num = ((2 * m as u128 * g as u128) % (2 * den as u128)) as u64;
                match mode.kinds()[j] {
                    FactorKind::Sine => sin_pi_ratio(num, den),
                    FactorKind::Cosine => sin_pi_ratio((2 * num + den) % (4 * den), 2 * den),
                }
            } else {
                // m α x = π m g / (N - 1)
                let den = (n - 1) as u64;
                let num = ((m as u128 * g as u128) % (2 * den as u128)) as u64;
                sin_pi_ratio(num, den)
            }
        })
        .collect()
}

/// Evaluates a mode on a window `[origin, origin + dims)` of the lattice.
pub fn sample_window(mode: &EigenMode, lattice: &Lattice, origin: &[i64], dims: &[usize]) -> Result<GridSample> {
    let n = lattice.dim();
    if origin.len() != n || dims.len() != n || mode.domain().dim() != n {
        return Err(Error::invalid("window does not match the lattice dimension"));
    }
    for j in 0..n {
        if !lattice.periodic && (origin[j] < 0 || origin[j] as usize + dims[j] > lattice.counts[j]) {
            return Err(Error::invalid("window leaves a closed lattice"));
        }
        if dims[j] == 0 {
            return Err(Error::invalid("empty window"));
        }
    }
    let shape = Shape::new(dims.to_vec());
    let factors: Vec<Vec<f64>> = (0..n)
        .map(|j| axis_factor_values(mode, lattice, j, origin[j], dims[j]))
        .collect();
    let mut values = vec![0.0; shape.len()];
    let last = n - 1;
    let row = dims[last];
    values.par_chunks_mut(row).enumerate().for_each(|(r, chunk)| {
        let mut prefix = 1.0;
        let mut rem = r;
        for j in (0..last).rev() {
            let i = rem % dims[j];
            rem /= dims[j];
            prefix *= factors[j][i];
        }
        for (v, f) in chunk.iter_mut().zip(&factors[last]) {
            *v = prefix * f;
        }
    });
    let wrap = (0..n)
        .map(|j| lattice.periodic && origin[j] == 0 && dims[j] == lattice.counts[j])
        .collect();
    Ok(GridSample {
        domain: mode.domain().clone(),
        lattice: lattice.clone(),
        origin: origin.to_vec(),
        shape,
        wrap,
        values,
        mode_mu: mode.mu(),
    })
}

/// Samples a mode on the full lattice chosen by `res`.
pub fn sample_grid(mode: &EigenMode, res: &Resolution) -> Result<GridSample> {
    sample_grid_capped(mode, res, DEFAULT_MAX_POINTS)
}

pub fn sample_grid_capped(mode: &EigenMode, res: &Resolution, max_points: u64) -> Result<GridSample> {
    let lattice = Lattice::for_mode(mode, res)?;
    sample_lattice_capped(mode, &lattice, max_points)
}

pub fn sample_lattice_capped(mode: &EigenMode, lattice: &Lattice, max_points: u64) -> Result<GridSample> {
    let total = lattice.total_points();
    if total > max_points {
        return Err(Error::ResourceGuard(format!(
            "lattice of {total} points exceeds the cap {max_points}"
        )));
    }
    let origin = vec![0; lattice.dim()];
    sample_window(mode, lattice, &origin, &lattice.counts.clone())
}

/// A zero of the linear interpolant on a lattice edge, or a lattice point
/// where the sample is exactly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalVertex {
    pub position: SmallVec<[f64; 3]>,
    /// Axis of the edge, `None` for an exact zero at a lattice point.
    pub edge_axis: Option<usize>,
    /// Local flat index of the lower edge endpoint (or of the zero point).
    pub base: usize,
    /// Fractional offset along the edge in `[0, 1)`.
    pub t: f64,
}

#[derive(Clone, Debug)]
pub struct NodalApprox {
    pub dim: usize,
    /// Local flat cell indices with mixed corner signs or a zero corner.
    pub cells: Vec<usize>,
    pub vertices: Vec<NodalVertex>,
    /// Marching-squares segments (2D samples only).
    pub segments: Vec<[[f64; 2]; 2]>,
    pub measure_2d: Option<f64>,
}

impl NodalApprox {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Drops vertices lying on the boundary of a closed domain.
    pub fn without_boundary(mut self, domain: &DomainSpec) -> Self {
        if domain.is_periodic() {
            return self;
        }
        let tol = 1e-12;
        self.vertices.retain(|v| {
            v.position.iter().enumerate().all(|(j, &x)| {
                let len = domain.axis_length(j);
                x > tol * len && x < len * (1.0 - tol)
            })
        });
        self
    }
}

/// Extracts the discrete nodal set of a sample.
pub fn extract_nodal(sample: &GridSample) -> NodalApprox {
    let n = sample.dim();
    let shape = &sample.shape;
    let values = &sample.values;
    let mut vertices = Vec::new();
    let mut idx = vec![0usize; n];
    for flat in 0..shape.len() {
        let v0 = values[flat];
        if v0 == 0.0 {
            shape.unravel(flat, &mut idx);
            let position = (0..n).map(|j| sample.coord(j, idx[j])).collect();
            vertices.push(NodalVertex {
                position,
                edge_axis: None,
                base: flat,
                t: 0.0,
            });
            continue;
        }
        let mut unraveled = false;
        for j in 0..n {
            let d = shape.dims[j];
            let i = if unraveled {
                idx[j]
            } else {
                shape.unravel(flat, &mut idx);
                unraveled = true;
                idx[j]
            };
            let other = if i + 1 < d {
                flat + shape.strides[j]
            } else if sample.wrap[j] && d > 1 {
                flat - (d - 1) * shape.strides[j]
            } else {
                continue;
            };
            let v1 = values[other];
            if (v0 > 0.0 && v1 < 0.0) || (v0 < 0.0 && v1 > 0.0) {
                let t = v0 / (v0 - v1);
                let position = (0..n)
                    .map(|k| {
                        let base = sample.coord(k, idx[k]);
                        if k == j {
                            base + t * sample.lattice.h[j]
                        } else {
                            base
                        }
                    })
                    .collect();
                vertices.push(NodalVertex {
                    position,
                    edge_axis: Some(j),
                    base: flat,
                    t,
                });
            }
        }
    }

    let cell_shape = sample.cell_shape();
    let corners = 1usize << n;
    let mut cells = Vec::new();
    let mut cidx = vec![0usize; n];
    let mut pidx = vec![0usize; n];
    for c in 0..cell_shape.len() {
        cell_shape.unravel(c, &mut cidx);
        let (mut pos, mut neg, mut zero) = (false, false, false);
        for corner in 0..corners {
            for j in 0..n {
                let step = (corner >> j) & 1;
                pidx[j] = (cidx[j] + step) % shape.dims[j];
            }
            let v = values[shape.ravel(&pidx)];
            pos |= v > 0.0;
            neg |= v < 0.0;
            zero |= v == 0.0;
        }
        if zero || (pos && neg) {
            cells.push(c);
        }
    }

    let segments = if n == 2 { marching_squares(sample, &cells) } else { Vec::new() };
    let measure_2d = (n == 2).then(|| {
        segments
            .iter()
            .map(|[a, b]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
            .sum()
    });
    NodalApprox {
        dim: n,
        cells,
        vertices,
        segments,
        measure_2d,
    }
}

fn marching_squares(sample: &GridSample, cells: &[usize]) -> Vec<[[f64; 2]; 2]> {
    let shape = &sample.shape;
    let cell_shape = sample.cell_shape();
    let (hx, hy) = (sample.lattice.h[0], sample.lattice.h[1]);
    let mut out = Vec::new();
    let mut cidx = [0usize; 2];
    for &c in cells {
        cell_shape.unravel(c, &mut cidx);
        let (i, j) = (cidx[0], cidx[1]);
        let i1 = (i + 1) % shape.dims[0];
        let j1 = (j + 1) % shape.dims[1];
        let x0 = sample.coord(0, i);
        let y0 = sample.coord(1, j);
        // c0 (x0,y0), c1 (x1,y0), c2 (x1,y1), c3 (x0,y1)
        let v = [
            sample.values[shape.ravel(&[i, j])],
            sample.values[shape.ravel(&[i1, j])],
            sample.values[shape.ravel(&[i1, j1])],
            sample.values[shape.ravel(&[i, j1])],
        ];
        let p = [[x0, y0], [x0 + hx, y0], [x0 + hx, y0 + hy], [x0, y0 + hy]];
        let inside = |x: f64| x >= 0.0;
        let case = (0..4).fold(0usize, |acc, k| acc | ((inside(v[k]) as usize) << k));
        if case == 0 || case == 15 {
            continue;
        }
        let edge_point = |e: usize| -> [f64; 2] {
            let (a, b) = (e, (e + 1) % 4);
            let t = v[a] / (v[a] - v[b]);
            [p[a][0] + t * (p[b][0] - p[a][0]), p[a][1] + t * (p[b][1] - p[a][1])]
        };
        let crosses = |e: usize| inside(v[e]) != inside(v[(e + 1) % 4]);
        let edges: SmallVec<[usize; 4]> = (0..4).filter(|&e| crosses(e)).collect();
        if edges.len() == 2 {
            out.push([edge_point(edges[0]), edge_point(edges[1])]);
            continue;
        }
        // Saddle: resolved by the sign of the cell-center value.
        let center = inside(0.25 * (v[0] + v[1] + v[2] + v[3]));
        let around_odd = match case {
            5 => center,   // c0, c2 inside and joined: cut off c1 and c3
            10 => !center, // c1, c3 inside; joined when center inside
            _ => unreachable!("four crossings only in saddle cases"),
        };
        if around_odd {
            out.push([edge_point(0), edge_point(1)]);
            out.push([edge_point(2), edge_point(3)]);
        } else {
            out.push([edge_point(3), edge_point(0)]);
            out.push([edge_point(1), edge_point(2)]);
        }
    }
    out
}

/// Distances from lattice points to the discrete nodal set.
#[derive(Clone, Debug)]
pub struct DistanceField {
    pub domain: DomainSpec,
    pub lattice: Lattice,
    pub origin: Vec<i64>,
    pub shape: Shape,
    pub wrap: Vec<bool>,
    pub dist: Vec<f64>,
    pub wraparound: bool,
    /// No nodal vertices: every distance is `+∞`.
    pub empty: bool,
}

impl DistanceField {
    pub fn dim(&self) -> usize {
        self.shape.dims.len()
    }

    pub fn max_h(&self) -> f64 {
        self.lattice.max_h()
    }

    fn cell_shape(&self) -> Shape {
        Shape::new(
            (0..self.dim())
                .map(|j| if self.wrap[j] { self.shape.dims[j] } else { self.shape.dims[j].saturating_sub(1) })
                .collect(),
        )
    }
}

/// One pass of the lower envelope of parabolas along a line:
/// `out[i] = min_q (x_i - x_q)² + f[q]`.
struct Envelope {
    centers: Vec<f64>,
    heights: Vec<f64>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn new() -> Self {
        Self {
            centers: Vec::new(),
            heights: Vec::new(),
            bounds: Vec::new(),
        }
    }

    fn run(&mut self, f: &[f64], h: f64, periodic: bool, out: &mut [f64]) {
        let n = f.len();
        self.centers.clear();
        self.heights.clear();
        self.bounds.clear();
        let copies: &[i64] = if periodic { &[-1, 0, 1] } else { &[0] };
        for &copy in copies {
            for (q, &fq) in f.iter().enumerate() {
                if !fq.is_finite() {
                    continue;
                }
                let x = (q as i64 + copy * n as i64) as f64 * h;
                self.push(x, fq);
            }
        }
        if self.centers.is_empty() {
            out.iter_mut().for_each(|o| *o = f64::INFINITY);
            return;
        }
        self.bounds.push(f64::INFINITY);
        let mut k = 0;
        for (i, o) in out.iter_mut().enumerate() {
            let x = i as f64 * h;
            while self.bounds[k] < x {
                k += 1;
            }
            let d = x - self.centers[k];
            *o = d * d + self.heights[k];
        }
    }

    /// Adds a parabola with a center to the right of all previous ones.
    /// `bounds[k]` is the right end of the region where parabola `k` wins.
    fn push(&mut self, x: f64, fx: f64) {
        loop {
            let Some(&xv) = self.centers.last() else {
                self.centers.push(x);
                self.heights.push(fx);
                return;
            };
            let fv = *self.heights.last().unwrap();
            let s = ((fx + x * x) - (fv + xv * xv)) / (2.0 * (x - xv));
            let left = if self.bounds.is_empty() {
                f64::NEG_INFINITY
            } else {
                self.bounds[self.bounds.len() - 1]
            };
            if self.centers.len() > 1 && s <= left {
                self.centers.pop();
                self.heights.pop();
                self.bounds.pop();
                continue;
            }
            if self.centers.len() == 1 && s <= f64::NEG_INFINITY {
                self.centers.pop();
                self.heights.pop();
                continue;
            }
            self.bounds.push(s);
            self.centers.push(x);
            self.heights.push(fx);
            return;
        }
    }
}

/// Squared exact Euclidean distances from every sample point to the vertex set.
///
/// Vertices on edges along axis `g` lie on lattice lines along `g`, so for that
/// group a first pass along `g` computes exact 1D distances to sub-lattice
/// positions and the remaining axes are handled by lower-envelope passes.
/// The result is the minimum over all groups.
fn squared_distances(sample: &GridSample, vertices: &[NodalVertex]) -> Vec<f64> {
    let n = sample.dim();
    let shape = &sample.shape;
    let total = shape.len();
    let mut best = vec![f64::INFINITY; total];
    let mut idx = vec![0usize; n];
    for g in 0..n {
        // (line id, position along the line in index units)
        let mut seeds: Vec<(usize, f64)> = vertices
            .iter()
            .filter(|v| v.edge_axis == Some(g) || (g == 0 && v.edge_axis.is_none()))
            .map(|v| {
                shape.unravel(v.base, &mut idx);
                let pos = idx[g] as f64 + v.t;
                (v.base - idx[g] * shape.strides[g], pos)
            })
            .collect();
        if seeds.is_empty() {
            continue;
        }
        seeds.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

        let mut field = vec![f64::INFINITY; total];
        let len = shape.dims[g];
        let stride = shape.strides[g];
        let hg = sample.lattice.h[g];
        let period = len as f64;
        let mut start = 0;
        while start < seeds.len() {
            let line = seeds[start].0;
            let mut end = start;
            while end < seeds.len() && seeds[end].0 == line {
                end += 1;
            }
            let pos: Vec<f64> = seeds[start..end].iter().map(|s| s.1).collect();
            let mut k = 0;
            for i in 0..len {
                let x = i as f64;
                while k + 1 < pos.len() && pos[k + 1] <= x {
                    k += 1;
                }
                let mut d = (x - pos[k]).abs();
                if k + 1 < pos.len() {
                    d = d.min((pos[k + 1] - x).abs());
                }
                if sample.wrap[g] {
                    d = d.min(pos[0] + period - x).min(x + period - pos[pos.len() - 1]);
                }
                let dh = d * hg;
                field[line + i * stride] = dh * dh;
            }
            start = end;
        }

        for k in (0..n).filter(|&k| k != g) {
            envelope_pass(&mut field, shape, k, sample.lattice.h[k], sample.wrap[k]);
        }
        best.par_iter_mut().zip(&field).for_each(|(b, f)| {
            if *f < *b {
                *b = *f;
            }
        });
    }
    best
}

fn envelope_pass(field: &mut [f64], shape: &Shape, axis: usize, h: f64, periodic: bool) {
    let len = shape.dims[axis];
    let stride = shape.strides[axis];
    let total = shape.len();
    let lines: Vec<usize> = (0..total)
        .filter(|&flat| (flat / stride) % len == 0)
        .collect();
    let results: Vec<(usize, Vec<f64>)> = lines
        .par_iter()
        .map_init(
            || (Envelope::new(), Vec::new()),
            |(env, buf), &line| {
                buf.clear();
                buf.extend((0..len).map(|i| field[line + i * stride]));
                let mut out = vec![0.0; len];
                env.run(buf, h, periodic, &mut out);
                (line, out)
            },
        )
        .collect();
    for (line, out) in results {
        for (i, v) in out.into_iter().enumerate() {
            field[line + i * stride] = v;
        }
    }
}

/// Exact Euclidean distance transform of the nodal vertex set.
pub fn distance_field(nodal: &NodalApprox, sample: &GridSample) -> Result<DistanceField> {
    if nodal.dim != sample.dim() {
        return Err(Error::invalid("nodal set and sample dimensions differ"));
    }
    let empty = nodal.vertices.is_empty();
    let dist = if empty {
        vec![f64::INFINITY; sample.shape.len()]
    } else {
        let mut sq = squared_distances(sample, &nodal.vertices);
        sq.par_iter_mut().for_each(|v| *v = v.sqrt());
        sq
    };
    Ok(DistanceField {
        domain: sample.domain.clone(),
        lattice: sample.lattice.clone(),
        origin: sample.origin.clone(),
        shape: sample.shape.clone(),
        wrap: sample.wrap.clone(),
        dist,
        wraparound: sample.wrap.iter().any(|&w| w),
        empty,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TubeEstimator {
    /// Trapezoid-weighted count of lattice points with `dist < δ`.
    PointCount,
    /// Exact cell classification, with stratified sub-samples of the
    /// multilinear interpolant in cells straddling the `δ` level set.
    Refined { subsamples: usize },
}

impl Default for TubeEstimator {
    fn default() -> Self {
        TubeEstimator::Refined {
            subsamples: DEFAULT_SUBSAMPLES,
        }
    }
}

fn check_tube_radius(delta: f64, max_h: f64) -> Result<()> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid(format!("tube radius {delta} must be positive")));
    }
    if delta < 2.0 * max_h {
        return Err(Error::Resolution { delta, max_h });
    }
    Ok(())
}

/// Volume of `{x : dist(x, N) < δ}` with the default estimator.
pub fn tube_volume(field: &DistanceField, delta: f64) -> Result<f64> {
    tube_volume_with(field, delta, TubeEstimator::default())
}

pub fn tube_volume_with(field: &DistanceField, delta: f64, estimator: TubeEstimator) -> Result<f64> {
    check_tube_radius(delta, field.max_h())?;
    if field.empty {
        return Ok(0.0);
    }
    let cells = field.cell_shape();
    let full: Vec<Range<usize>> = cells.dims.iter().map(|&d| 0..d).collect();
    Ok(match estimator {
        TubeEstimator::PointCount => point_count_volume(field, delta),
        TubeEstimator::Refined { subsamples } => refined_volume(field, delta, subsamples.max(1), &full),
    })
}

fn point_count_volume(field: &DistanceField, delta: f64) -> f64 {
    let n = field.dim();
    let mut idx = vec![0usize; n];
    let mut sum = 0.0;
    for (flat, &d) in field.dist.iter().enumerate() {
        if d >= delta {
            continue;
        }
        field.shape.unravel(flat, &mut idx);
        let mut w = 1.0;
        for j in 0..n {
            if !field.lattice.periodic {
                let g = field.origin[j] + idx[j] as i64;
                if g == 0 || g == field.lattice.counts[j] as i64 - 1 {
                    w *= 0.5;
                }
            }
        }
        sum += w;
    }
    sum * field.lattice.cell_volume()
}

/// Tube volume restricted to the cells with local indices in `ranges`.
fn refined_volume(field: &DistanceField, delta: f64, subsamples: usize, ranges: &[Range<usize>]) -> f64 {
    let n = field.dim();
    let corners = 1usize << n;
    let sub_total = subsamples.pow(n as u32);
    let dims: Vec<usize> = ranges.iter().map(|r| r.len()).collect();
    let local = Shape::new(dims);
    if local.is_empty() {
        return 0.0;
    }
    let chunk = local.strides[0].max(1);
    let total = local.len();
    let partial: Vec<f64> = (0..total.div_ceil(chunk))
        .into_par_iter()
        .map(|b| {
            let block = b * chunk..((b + 1) * chunk).min(total);
            let mut cidx = vec![0usize; n];
            let mut pidx = vec![0usize; n];
            let mut corner_d = vec![0.0f64; corners];
            let mut frac_sum = 0.0;
            for r in block {
                local.unravel(r, &mut cidx);
                for j in 0..n {
                    cidx[j] += ranges[j].start;
                }
                let (mut below, mut above) = (0usize, 0usize);
                for (corner, cd) in corner_d.iter_mut().enumerate() {
                    for j in 0..n {
                        pidx[j] = (cidx[j] + ((corner >> j) & 1)) % field.shape.dims[j];
                    }
                    let d = field.dist[field.shape.ravel(&pidx)];
                    *cd = if d.is_finite() { d } else { 1e300 };
                    if d < delta {
                        below += 1;
                    } else {
                        above += 1;
                    }
                }
                if above == 0 {
                    frac_sum += 1.0;
                } else if below > 0 {
                    let mut hits = 0usize;
                    for s in 0..sub_total {
                        let mut rem = s;
                        let mut value = 0.0;
                        let mut u = [0.0f64; 8];
                        for uj in u.iter_mut().take(n) {
                            *uj = ((rem % subsamples) as f64 + 0.5) / subsamples as f64;
                            rem /= subsamples;
                        }
                        for (corner, &cd) in corner_d.iter().enumerate() {
                            let mut w = 1.0;
                            for (j, &uj) in u.iter().enumerate().take(n) {
                                w *= if (corner >> j) & 1 == 1 { uj } else { 1.0 - uj };
                            }
                            value += w * cd;
                        }
                        if value < delta {
                            hits += 1;
                        }
                    }
                    frac_sum += hits as f64 / sub_total as f64;
                }
            }
            frac_sum
        })
        .collect();
    partial.iter().sum::<f64>() * field.lattice.cell_volume()
}

fn check_tiled_size(lattice: &Lattice) -> Result<()> {
    let total = lattice.total_points();
    if total > TILED_MAX_POINTS {
        return Err(Error::ResourceGuard(format!(
            "lattice of {total} points exceeds the tiled cap {TILED_MAX_POINTS}"
        )));
    }
    Ok(())
}

/// Tube volume on a lattice too large to hold in memory: the lattice is cut
/// into tiles, each evaluated on a window padded by a halo wide enough that
/// every vertex within `δ` plus one cell diagonal of the tile is seen.
pub fn tube_volume_tiled(mode: &EigenMode, lattice: &Lattice, delta: f64, subsamples: usize, tile_cells: usize) -> Result<f64> {
    check_tube_radius(delta, lattice.max_h())?;
    check_tiled_size(lattice)?;
    let windows = tile_windows(lattice, delta, tile_cells.max(1));
    let parts: Vec<Result<f64>> = windows
        .par_iter()
        .map(|w| {
            let sample = sample_window(mode, lattice, &w.origin, &w.dims)?;
            let nodal = extract_nodal(&sample);
            let field = distance_field(&nodal, &sample)?;
            if field.empty {
                return Ok(0.0);
            }
            Ok(refined_volume(&field, delta, subsamples.max(1), &w.owned))
        })
        .collect();
    let mut total = 0.0;
    for p in parts {
        total += p?;
    }
    Ok(total)
}

/// Nodal vertex positions over the whole lattice, gathered tile by tile.
/// Each vertex is reported once (by the tile owning its base point).
pub fn nodal_vertices_tiled(mode: &EigenMode, lattice: &Lattice, tile_cells: usize) -> Result<Vec<SmallVec<[f64; 3]>>> {
    check_tiled_size(lattice)?;
    let windows = tile_windows(lattice, 0.0, tile_cells.max(1));
    let parts: Vec<Result<Vec<SmallVec<[f64; 3]>>>> = windows
        .par_iter()
        .map(|w| {
            let sample = sample_window(mode, lattice, &w.origin, &w.dims)?;
            let nodal = extract_nodal(&sample);
            let n = sample.dim();
            let mut idx = vec![0usize; n];
            Ok(nodal
                .vertices
                .into_iter()
                .filter(|v| {
                    sample.shape.unravel(v.base, &mut idx);
                    (0..n).all(|j| w.owned[j].contains(&idx[j]))
                })
                .map(|v| v.position)
                .collect())
        })
        .collect();
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

struct TileWindow {
    origin: Vec<i64>,
    dims: Vec<usize>,
    /// Local cell (or base-point) index ranges owned by this tile.
    owned: Vec<Range<usize>>,
}

fn tile_windows(lattice: &Lattice, delta: f64, tile: usize) -> Vec<TileWindow> {
    let n = lattice.dim();
    let diag = lattice.max_h() * (n as f64).sqrt();
    let per_axis: Vec<Vec<(i64, usize, Range<usize>)>> = (0..n)
        .map(|j| {
            let cells = lattice.cells(j);
            let halo = ((delta + 2.0 * diag) / lattice.h[j]).ceil() as usize + 1;
            if cells <= tile + 2 * halo {
                return vec![(0, lattice.counts[j], 0..cells)];
            }
            let mut out = Vec::new();
            let mut a = 0;
            while a < cells {
                let b = (a + tile).min(cells);
                let (lo, hi) = if lattice.periodic {
                    (a as i64 - halo as i64, b as i64 + halo as i64)
                } else {
                    (
                        (a as i64 - halo as i64).max(0),
                        (b as i64 + halo as i64).min(lattice.counts[j] as i64 - 1),
                    )
                };
                let dims = (hi - lo + 1) as usize;
                let start = (a as i64 - lo) as usize;
                out.push((lo, dims, start..start + (b - a)));
                a = b;
            }
            out
        })
        .collect();
    let mut windows = Vec::new();
    let counts: Vec<usize> = per_axis.iter().map(|v| v.len()).collect();
    let grid = Shape::new(counts);
    let mut tidx = vec![0usize; n];
    for t in 0..grid.len() {
        grid.unravel(t, &mut tidx);
        windows.push(TileWindow {
            origin: (0..n).map(|j| per_axis[j][tidx[j]].0).collect(),
            dims: (0..n).map(|j| per_axis[j][tidx[j]].1).collect(),
            owned: (0..n).map(|j| per_axis[j][tidx[j]].2.clone()).collect(),
        });
    }
    windows
}

/// (n-1)-dimensional measure of the nodal set.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalMeasure {
    /// Reported measure: zero count in 1D, Minkowski extrapolation otherwise.
    pub estimate: f64,
    /// Linear extrapolation to `t = 0` of `Vol(T_t) / 2t`.
    pub minkowski: Option<f64>,
    /// Total marching-squares segment length (2D only).
    pub segment_length: Option<f64>,
    /// `|segment - minkowski| / minkowski` (2D only).
    pub disagreement: Option<f64>,
    pub tolerance: f64,
    /// `(t, Vol(T_t)/2t)` pairs.
    pub ratios: Vec<(f64, f64)>,
    /// `Vol/2t` changes direction by more than the tolerance, or the two
    /// 2D estimators disagree beyond it.
    pub flagged: bool,
}

/// Relative tolerance for agreement between the two 2D measure estimators.
pub const MEASURE_TOLERANCE: f64 = 0.03;

pub fn nodal_measure(field: &DistanceField, nodal: &NodalApprox, t_list: &[f64]) -> Result<NodalMeasure> {
    if t_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("t values must be strictly decreasing"));
    }
    let mut ratios = Vec::with_capacity(t_list.len());
    for &t in t_list {
        ratios.push((t, tube_volume(field, t)? / (2.0 * t)));
    }
    let minkowski = match ratios.len() {
        0 => None,
        1 => Some(ratios[0].1),
        _ => Some(linear_intercept(&ratios)),
    };
    let n = field.dim();
    let mut flagged = false;
    let estimate = if n == 1 {
        distinct_zero_count(nodal) as f64
    } else {
        minkowski.ok_or_else(|| Error::invalid("at least one t value is required"))?
    };
    if ratios.len() >= 3 {
        let diffs: Vec<f64> = ratios.windows(2).map(|w| w[1].1 - w[0].1).collect();
        let scale = MEASURE_TOLERANCE * 0.5 * estimate.abs().max(1e-300);
        let up = diffs.iter().any(|&d| d > scale);
        let down = diffs.iter().any(|&d| d < -scale);
        flagged |= up && down;
    }
    let segment_length = nodal.measure_2d;
    let disagreement = match (segment_length, minkowski) {
        (Some(s), Some(m)) if n == 2 && m > 0.0 => Some((s - m).abs() / m),
        _ => None,
    };
    if let Some(d) = disagreement {
        flagged |= d > MEASURE_TOLERANCE;
    }
    Ok(NodalMeasure {
        estimate,
        minkowski,
        segment_length,
        disagreement,
        tolerance: MEASURE_TOLERANCE,
        ratios,
        flagged,
    })
}

fn distinct_zero_count(nodal: &NodalApprox) -> usize {
    let mut xs: Vec<f64> = nodal.vertices.iter().map(|v| v.position[0]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.len()
}

/// Least-squares intercept of `y` against `x`.
pub(crate) fn linear_intercept(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return my;
    }
    my - (sxy / sxx) * mx
}

/// Largest lattice distance to the nodal set: the nodal set is `r`-dense for
/// this `r` up to lattice error.
pub fn density_radius(field: &DistanceField) -> Result<f64> {
    if field.empty {
        return Err(Error::EmptyNodalSet);
    }
    Ok(field.dist.iter().cloned().fold(0.0, f64::max))
}

/// CSV of `(delta, volume, error)` rows.
pub fn tube_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("delta,volume,error\n");
    for (d, v, e) in rows {
        let _ = writeln!(out, "{d},{v},{e}");
    }
    out
}

/// Exact tube volume of a separable mode: the tube is the complement of a
/// product of per-axis sets, so `Vol = Π L_j - Π (L_j - ℓ_j(δ))` with `ℓ_j`
/// the 1D measure of the δ-neighborhood of the axis zeros.
pub fn exact_tube_volume(mode: &EigenMode, delta: f64) -> f64 {
    let domain = mode.domain();
    let mut log_keep = 0.0;
    for j in 0..domain.dim() {
        let Some(spacing) = mode.axis_zero_spacing(j) else {
            continue;
        };
        // zeros are equally spaced and every gap has the same length
        let len = domain.axis_length(j);
        let gaps = (len / spacing).round();
        let covered = gaps * spacing.min(2.0 * delta);
        log_keep += (-(covered / len).min(1.0)).ln_1p();
    }
    -domain.volume() * log_keep.exp_m1()
}

/// Measure of `{x ∈ [0, L] : dist(x, zeros) < δ}` (periodic when asked).
pub fn axis_tube_length(zeros: &[f64], len: f64, periodic: bool, delta: f64) -> f64 {
    if zeros.is_empty() {
        return 0.0;
    }
    let mut z = zeros.to_vec();
    z.sort_by(f64::total_cmp);
    let mut covered = 0.0;
    for w in z.windows(2) {
        covered += (w[1] - w[0]).min(2.0 * delta);
    }
    if periodic {
        covered += (z[0] + len - z[z.len() - 1]).min(2.0 * delta);
    } else {
        covered += z[0].min(delta) + (len - z[z.len() - 1]).min(delta);
    }
    covered.min(len)
}
