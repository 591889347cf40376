//! Box subdivisions at scale δ, the average-comparability set, good/bad
//! classification, nodal-box counts and sign-volume ratios.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::nodal_geom::{GridSample, NodalApprox, Shape};
use crate::spectrum::DomainSpec;
use crate::{Error, Result};

/// Values with `|φ| ≤ SIGN_THRESHOLD` count as neither sign.
pub const SIGN_THRESHOLD: f64 = 1e-12;

/// Axis-aligned box `[lower, upper]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cube {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Cube {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::invalid("cube corners must have the same positive dimension"));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a.is_finite() && b.is_finite() && b > a)) {
            return Err(Error::invalid("cube sides must be finite and positive"));
        }
        Ok(Self { lower, upper })
    }

    /// The fundamental region of a domain.
    pub fn of_domain(domain: &DomainSpec) -> Self {
        let n = domain.dim();
        Self {
            lower: vec![0.0; n],
            upper: (0..n).map(|j| domain.axis_length(j)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn side(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Subdivision {
    pub cube: Cube,
    pub delta: f64,
    /// Interval endpoints per axis, `N_j + 1` values from lower to upper.
    pub endpoints: Vec<Vec<f64>>,
    /// Axes on which starred neighborhoods wrap around (full torus axes).
    pub wrap: Vec<bool>,
    pub shape: Shape,
}

/// Number of equal intervals of an axis of length `len` with sides in `(δ, 2δ)`.
pub fn axis_intervals(len: f64, delta: f64) -> Result<usize> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid(format!("delta {delta} must be positive")));
    }
    if len <= delta {
        return Err(Error::invalid(format!("side {len} is not larger than delta {delta}")));
    }
    let ok = |n: usize| n >= 1 && len / n as f64 > delta && len / (n as f64) < 2.0 * delta;
    let n = ((len / (1.5 * delta)).floor() as usize).max(1);
    [n, n + 1, n.saturating_sub(1)]
        .into_iter()
        .find(|&c| ok(c))
        .ok_or_else(|| Error::invalid(format!("no interval count fits side {len} at delta {delta}")))
}

pub fn subdivide(cube: &Cube, delta: f64) -> Result<Subdivision> {
    subdivide_wrapped(cube, delta, &vec![false; cube.dim()])
}

/// Subdivision of a domain's fundamental region; torus axes wrap.
pub fn subdivide_domain(domain: &DomainSpec, delta: f64) -> Result<Subdivision> {
    let cube = Cube::of_domain(domain);
    subdivide_wrapped(&cube, delta, &vec![domain.is_periodic(); domain.dim()])
}

fn subdivide_wrapped(cube: &Cube, delta: f64, wrap: &[bool]) -> Result<Subdivision> {
    let mut endpoints = Vec::with_capacity(cube.dim());
    for j in 0..cube.dim() {
        let len = cube.side(j);
        let n = axis_intervals(len, delta)?;
        let mut e: Vec<f64> = (0..n).map(|i| cube.lower[j] + len * i as f64 / n as f64).collect();
        e.push(cube.upper[j]);
        endpoints.push(e);
    }
    let shape = Shape::new(endpoints.iter().map(|e| e.len() - 1).collect());
    Ok(Subdivision {
        cube: cube.clone(),
        delta,
        endpoints,
        wrap: wrap.to_vec(),
        shape,
    })
}

impl Subdivision {
    pub fn dim(&self) -> usize {
        self.cube.dim()
    }

    pub fn box_count(&self) -> usize {
        self.shape.len()
    }

    pub fn intervals(&self, j: usize) -> usize {
        self.shape.dims[j]
    }

    pub fn box_side(&self, j: usize) -> f64 {
        self.cube.side(j) / self.intervals(j) as f64
    }

    pub fn box_volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.box_side(j)).product()
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        self.shape.unravel(flat, &mut idx);
        idx
    }

    /// Lower corner and upper corner of box `flat`.
    pub fn bounds(&self, flat: usize) -> (Vec<f64>, Vec<f64>) {
        let idx = self.multi_index(flat);
        (
            (0..self.dim()).map(|j| self.endpoints[j][idx[j]]).collect(),
            (0..self.dim()).map(|j| self.endpoints[j][idx[j] + 1]).collect(),
        )
    }

    /// Box index along axis `j` containing coordinate `x` (clamped into the cube;
    /// wrapped on periodic axes).
    pub fn axis_box(&self, j: usize, x: f64) -> Option<usize> {
        let len = self.cube.side(j);
        let mut u = x - self.cube.lower[j];
        if self.wrap[j] {
            u = u.rem_euclid(len);
        } else if u < -1e-12 * len || u > len * (1.0 + 1e-12) {
            return None;
        }
        let n = self.intervals(j);
        Some(((u / len * n as f64).floor().max(0.0) as usize).min(n - 1))
    }

    pub fn box_of(&self, x: &[f64]) -> Option<usize> {
        let mut flat = 0;
        for (j, &xj) in x.iter().enumerate() {
            flat += self.axis_box(j, xj)? * self.shape.strides[j];
        }
        Some(flat)
    }

    /// The starred neighborhood `R_ν*`: the box and every box touching it.
    pub fn starred(&self, flat: usize) -> Vec<usize> {
        let n = self.dim();
        let idx = self.multi_index(flat);
        let mut out = vec![0usize];
        for j in 0..n {
            let len = self.intervals(j) as i64;
            let mut choices: Vec<usize> = Vec::with_capacity(3);
            for d in -1i64..=1 {
                let mut k = idx[j] as i64 + d;
                if self.wrap[j] {
                    k = k.rem_euclid(len);
                } else if k < 0 || k >= len {
                    continue;
                }
                if !choices.contains(&(k as usize)) {
                    choices.push(k as usize);
                }
            }
            out = out
                .iter()
                .flat_map(|&base| choices.iter().map(move |&k| base + k * self.shape.strides[j]))
                .collect();
        }
        out.sort_unstable();
        out
    }
}

/// Volume of the unit ball in `n` dimensions.
pub fn unit_ball_volume(n: usize) -> f64 {
    // ω_n = π^{n/2} / Γ(n/2 + 1), via ω_n = ω_{n-2} · 2π/n
    let (mut w, start) = if n % 2 == 0 { (1.0, 2) } else { (2.0, 3) };
    let mut k = start;
    while k <= n {
        w *= 2.0 * PI / k as f64;
        k += 2;
    }
    w
}

/// Default goodness threshold `ω_n · 10^{-2n}`.
pub fn good_threshold(n: usize) -> f64 {
    unit_ball_volume(n) * 10f64.powi(-2 * n as i32)
}

/// Per-box statistics for a sample and a subdivision.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxStats {
    pub sub: Subdivision,
    pub a: f64,
    pub avg: Vec<f64>,
    pub avg_star: Vec<f64>,
    pub points: Vec<usize>,
    pub e_points: Vec<usize>,
    pub e_mass: Vec<f64>,
    pub good: Vec<bool>,
    pub nodal: Vec<bool>,
    pub pos_frac: Vec<f64>,
    pub neg_frac: Vec<f64>,
    /// Total `|E|` (marked points times the lattice cell volume).
    pub e_volume: f64,
}

impl BoxStats {
    pub fn e_fraction(&self, b: usize) -> f64 {
        if self.points[b] == 0 {
            0.0
        } else {
            self.e_points[b] as f64 / self.points[b] as f64
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("nu,avg,avg_star,e_frac,good,nodal,pos_frac,neg_frac\n");
        for b in 0..self.avg.len() {
            let nu: Vec<String> = self.sub.multi_index(b).iter().map(|i| i.to_string()).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                nu.join(":"),
                self.avg[b],
                self.avg_star[b],
                self.e_fraction(b),
                self.good[b] as u8,
                self.nodal[b] as u8,
                self.pos_frac[b],
                self.neg_frac[b]
            );
        }
        out
    }
}

/// Result of the pointwise comparability test.
#[derive(Clone, Debug)]
pub struct Comparability {
    /// One flag per sample point: `φ²(x) / Av_{R_x*} φ² ∉ [1/A, A]`.
    pub mask: Vec<bool>,
    pub volume: f64,
    pub stats: BoxStats,
}

/// Box index of each sample point along each axis (None outside the cube).
fn point_boxes(sample: &GridSample, sub: &Subdivision) -> Vec<Vec<Option<usize>>> {
    (0..sample.dim())
        .map(|j| (0..sample.shape.dims[j]).map(|i| sub.axis_box(j, sample.coord(j, i))).collect())
        .collect()
}

fn check_compatible(sample: &GridSample, sub: &Subdivision) -> Result<()> {
    if sample.dim() != sub.dim() {
        return Err(Error::invalid("sample and subdivision dimensions differ"));
    }
    if !sample.is_full() {
        return Err(Error::invalid("box statistics need a full-lattice sample"));
    }
    for j in 0..sub.dim() {
        let per_side = sub.box_side(j) / sample.lattice.h[j];
        if per_side < 8.0 {
            return Err(Error::Precondition(format!(
                "axis {j} has {per_side:.2} grid points per box side; at least 8 are needed"
            )));
        }
    }
    Ok(())
}

/// Minimal comparability set `E` for constant `A`, with per-box statistics.
/// Averages are equal-weight means over the lattice points of each box.
pub fn comparability_set(sample: &GridSample, sub: &Subdivision, a: f64) -> Result<Comparability> {
    if !(a.is_finite() && a >= 1.0) {
        return Err(Error::invalid(format!("comparability constant {a} must be at least 1")));
    }
    check_compatible(sample, sub)?;
    let n = sample.dim();
    let nb = sub.box_count();
    let pb = point_boxes(sample, sub);
    let mut owner = vec![usize::MAX; sample.shape.len()];
    let mut sum = vec![0.0f64; nb];
    let mut points = vec![0usize; nb];
    let mut pos = vec![0usize; nb];
    let mut neg = vec![0usize; nb];
    let mut idx = vec![0usize; n];
    for (flat, &v) in sample.values.iter().enumerate() {
        sample.shape.unravel(flat, &mut idx);
        let mut b = 0;
        let mut inside = true;
        for j in 0..n {
            match pb[j][idx[j]] {
                Some(k) => b += k * sub.shape.strides[j],
                None => {
                    inside = false;
                    break;
                }
            }
        }
        if !inside {
            continue;
        }
        owner[flat] = b;
        sum[b] += v * v;
        points[b] += 1;
        if v > SIGN_THRESHOLD {
            pos[b] += 1;
        } else if v < -SIGN_THRESHOLD {
            neg[b] += 1;
        }
    }
    let avg: Vec<f64> = (0..nb)
        .map(|b| if points[b] > 0 { sum[b] / points[b] as f64 } else { 0.0 })
        .collect();
    let avg_star: Vec<f64> = (0..nb)
        .into_par_iter()
        .map(|b| {
            let (s, c) = sub
                .starred(b)
                .into_iter()
                .fold((0.0, 0usize), |(s, c), k| (s + sum[k], c + points[k]));
            if c > 0 {
                s / c as f64
            } else {
                0.0
            }
        })
        .collect();
    if avg_star.iter().zip(&points).any(|(&v, &p)| p > 0 && v <= 0.0) {
        return Err(Error::ZeroAverage);
    }
    let mask: Vec<bool> = sample
        .values
        .par_iter()
        .zip(&owner)
        .map(|(&v, &b)| {
            if b == usize::MAX {
                return false;
            }
            let r = v * v / avg_star[b];
            !(r >= 1.0 / a && r <= a)
        })
        .collect();
    let mut e_points = vec![0usize; nb];
    for (&m, &b) in mask.iter().zip(&owner) {
        if m {
            e_points[b] += 1;
        }
    }
    let cell = sample.lattice.cell_volume();
    let marked = e_points.iter().sum::<usize>();
    let box_vol = sub.box_volume();
    let e_mass = (0..nb)
        .map(|b| if points[b] > 0 { box_vol * e_points[b] as f64 / points[b] as f64 } else { 0.0 })
        .collect();
    let frac = |c: &[usize], b: usize| if points[b] > 0 { c[b] as f64 / points[b] as f64 } else { 0.0 };
    let mut stats = BoxStats {
        sub: sub.clone(),
        a,
        avg,
        avg_star,
        e_points,
        e_mass,
        good: vec![true; nb],
        nodal: vec![false; nb],
        pos_frac: (0..nb).map(|b| frac(&pos, b)).collect(),
        neg_frac: (0..nb).map(|b| frac(&neg, b)).collect(),
        points,
        e_volume: marked as f64 * cell,
    };
    classify_boxes(&mut stats, None);
    Ok(Comparability {
        mask,
        volume: stats.e_volume,
        stats,
    })
}

/// Marks boxes good iff their E-fraction is below the threshold
/// (default `ω_n · 10^{-2n}`). Returns the good flags.
pub fn classify_boxes(stats: &mut BoxStats, threshold: Option<f64>) -> Vec<bool> {
    let t = threshold.unwrap_or_else(|| good_threshold(stats.sub.dim()));
    stats.good = (0..stats.avg.len()).map(|b| stats.e_fraction(b) < t).collect();
    stats.good.clone()
}

/// Fraction of bad boxes.
pub fn bad_proportion(stats: &BoxStats) -> f64 {
    if stats.good.is_empty() {
        return 0.0;
    }
    stats.good.iter().filter(|&&g| !g).count() as f64 / stats.good.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodalBoxCount {
    pub count: usize,
    /// `Vol(∪ R_ν*)` over the nodal boxes.
    pub starred_volume: f64,
    pub flags: Vec<bool>,
}

/// Boxes containing at least one nodal vertex.
pub fn nodal_box_count(sub: &Subdivision, nodal: &NodalApprox) -> NodalBoxCount {
    nodal_box_count_points(sub, nodal.vertices.iter().map(|v| &v.position[..]))
}

pub fn nodal_box_count_points<'a>(sub: &Subdivision, points: impl IntoIterator<Item = &'a [f64]>) -> NodalBoxCount {
    let mut flags = vec![false; sub.box_count()];
    for p in points {
        if let Some(b) = sub.box_of(p) {
            flags[b] = true;
        }
    }
    let mut star = vec![false; sub.box_count()];
    for (b, _) in flags.iter().enumerate().filter(|(_, &f)| f) {
        for k in sub.starred(b) {
            star[k] = true;
        }
    }
    NodalBoxCount {
        count: flags.iter().filter(|&&f| f).count(),
        starred_volume: star.iter().filter(|&&s| s).count() as f64 * sub.box_volume(),
        flags,
    }
}

/// Marks the nodal flags of box statistics.
pub fn mark_nodal(stats: &mut BoxStats, nodal: &NodalApprox) {
    stats.nodal = nodal_box_count(&stats.sub, nodal).flags;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignRatio {
    /// `Vol(B⁺)/Vol(B⁻)`, `+∞` when `B⁻` is empty.
    pub ratio: f64,
    pub pos_frac: f64,
    pub neg_frac: f64,
}

/// Lattice points of the sample within distance `radius` of `center`
/// (minimum-image distance on wrapped axes).
fn ball_points(sample: &GridSample, center: &[f64], radius: f64) -> Vec<(usize, f64)> {
    let n = sample.dim();
    let mut ranges = Vec::with_capacity(n);
    for j in 0..n {
        let h = sample.lattice.h[j];
        let lo = ((center[j] - radius) / h).floor() as i64 - sample.origin[j];
        let hi = ((center[j] + radius) / h).ceil() as i64 - sample.origin[j];
        ranges.push((lo, hi));
    }
    let mut out = Vec::new();
    let mut idx = vec![0i64; n];
    let mut local = vec![0usize; n];
    for (j, r) in ranges.iter().enumerate() {
        idx[j] = r.0;
    }
    'outer: loop {
        let mut ok = true;
        let mut d2 = 0.0;
        for j in 0..n {
            let dims = sample.shape.dims[j] as i64;
            let i = if sample.wrap[j] { idx[j].rem_euclid(dims) } else { idx[j] };
            if i < 0 || i >= dims {
                ok = false;
                break;
            }
            local[j] = i as usize;
            let x = (sample.origin[j] + idx[j]) as f64 * sample.lattice.h[j];
            d2 += (x - center[j]).powi(2);
        }
        if ok && d2 <= radius * radius {
            out.push((sample.shape.ravel(&local), d2.sqrt()));
        }
        for j in (0..n).rev() {
            idx[j] += 1;
            if idx[j] <= ranges[j].1 {
                continue 'outer;
            }
            idx[j] = ranges[j].0;
        }
        break;
    }
    if (0..n).any(|j| sample.wrap[j] && ranges[j].1 - ranges[j].0 + 1 > sample.shape.dims[j] as i64) {
        out.sort_unstable_by_key(|p| p.0);
        out.dedup_by_key(|p| p.0);
    }
    out
}

/// Positive-to-negative volume ratio of `φ` in a ball centered on the nodal set.
pub fn sign_ratio(sample: &GridSample, nodal: &NodalApprox, center: &[f64], radius: f64) -> Result<SignRatio> {
    let n = sample.dim();
    if center.len() != n {
        return Err(Error::invalid("ball center has the wrong dimension"));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::invalid(format!("radius {radius} must be positive")));
    }
    for j in 0..n {
        if !sample.wrap[j] {
            let lo = sample.coord(j, 0);
            let hi = sample.coord(j, sample.shape.dims[j] - 1);
            if center[j] - radius < lo - 1e-12 || center[j] + radius > hi + 1e-12 {
                return Err(Error::Precondition("ball leaves the sampled region".into()));
            }
        }
    }
    let tol = 2.0 * sample.max_h();
    let near = nodal.vertices.iter().any(|v| {
        let d2: f64 = (0..n)
            .map(|j| {
                let mut d = (v.position[j] - center[j]).abs();
                if sample.wrap[j] {
                    let len = sample.lattice.lengths[j];
                    d %= len;
                    d = d.min(len - d);
                }
                d * d
            })
            .sum();
        d2 <= tol * tol
    });
    if !near {
        return Err(Error::Precondition("ball center is not on the nodal set".into()));
    }
    let pts = ball_points(sample, center, radius);
    let (mut pos, mut neg) = (0usize, 0usize);
    for &(flat, _) in &pts {
        let v = sample.values[flat];
        if v > SIGN_THRESHOLD {
            pos += 1;
        } else if v < -SIGN_THRESHOLD {
            neg += 1;
        }
    }
    let total = pts.len().max(1) as f64;
    Ok(SignRatio {
        ratio: if neg == 0 { f64::INFINITY } else { pos as f64 / neg as f64 },
        pos_frac: pos as f64 / total,
        neg_frac: neg as f64 / total,
    })
}

/// Growth of `φ²` on good boxes: for each good box a ball `B` of radius
/// `side/4` at the box center is compared with the concentric ball `2B`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthStat {
    /// `min over tested boxes of (∫_B φ² / ∫_{2B} φ²) · A`.
    pub c: f64,
    pub tested: usize,
    pub ratios: Vec<f64>,
}

pub fn growth_statistic(sample: &GridSample, stats: &BoxStats) -> Result<GrowthStat> {
    let sub = &stats.sub;
    let n = sub.dim();
    let side = (0..n).map(|j| sub.box_side(j)).fold(f64::INFINITY, f64::min);
    let r = side / 4.0;
    let boxes: Vec<usize> = (0..sub.box_count()).filter(|&b| stats.good[b]).collect();
    let ratios: Vec<Option<f64>> = boxes
        .par_iter()
        .map(|&b| {
            let (lo, hi) = sub.bounds(b);
            let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
            for j in 0..n {
                if !sample.wrap[j] && (center[j] - 2.0 * r < sub.cube.lower[j] || center[j] + 2.0 * r > sub.cube.upper[j]) {
                    return None;
                }
            }
            let pts = ball_points(sample, &center, 2.0 * r);
            let (mut inner, mut outer) = (0.0, 0.0);
            for (flat, d) in pts {
                let v2 = sample.values[flat].powi(2);
                outer += v2;
                if d <= r {
                    inner += v2;
                }
            }
            (outer > 0.0).then(|| inner / outer)
        })
        .collect();
    let ratios: Vec<f64> = ratios.into_iter().flatten().collect();
    let c = ratios.iter().cloned().fold(f64::INFINITY, f64::min) * stats.a;
    Ok(GrowthStat {
        c: if ratios.is_empty() { f64::NAN } else { c },
        tested: ratios.len(),
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nodal_geom::{extract_nodal, sample_grid, Lattice, Resolution};
    use crate::spectrum::EigenMode;

    #[test]
    fn subdivide_examples() {
        let s = subdivide(&Cube::new(vec![0.0], vec![1.0]).unwrap(), 0.3).unwrap();
        assert_eq!(s.intervals(0), 2);
        assert!((s.box_side(0) - 0.5).abs() < 1e-15);
        let s = subdivide(&Cube::new(vec![0.0], vec![2.0 * PI]).unwrap(), 0.1).unwrap();
        assert_eq!(s.intervals(0), 41);
        assert!((s.box_side(0) - 0.15325).abs() < 1e-4);
        assert!(subdivide(&Cube::new(vec![0.0], vec![0.2]).unwrap(), 0.3).is_err());
    }

    #[test]
    fn thresholds() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((good_threshold(2) - PI * 1e-4).abs() < 1e-18);
    }

    #[test]
    fn starred_counts() {
        let d = DomainSpec::flat_torus(vec![1.0, 1.0]).unwrap();
        let s = subdivide_domain(&d, 0.5).unwrap();
        for b in 0..s.box_count() {
            assert_eq!(s.starred(b).len(), 9);
        }
        let c = subdivide(&Cube::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(), 0.2).unwrap();
        assert_eq!(c.starred(0).len(), 4);
        assert_eq!(c.starred(c.shape.ravel(&[1, 1])).len(), 9);
    }

    #[test]
    fn constant_sample_has_empty_e() {
        let d = DomainSpec::dirichlet_box(vec![1.0, 1.0]).unwrap();
        let lat = Lattice::with_max_spacing(&d, &[0.01, 0.01]).unwrap();
        let vals = vec![2.5; lat.total_points() as usize];
        let s = GridSample::from_values(d.clone(), lat, vals, 1.0).unwrap();
        let sub = subdivide_domain(&d, 0.2).unwrap();
        for a in [1.0, 2.0, 10.0] {
            let c = comparability_set(&s, &sub, a).unwrap();
            assert_eq!(c.volume, 0.0);
            assert!(c.stats.good.iter().all(|&g| g));
            assert_eq!(bad_proportion(&c.stats), 0.0);
        }
        let zero = GridSample::from_values(d.clone(), s.lattice.clone(), vec![0.0; s.values.len()], 1.0).unwrap();
        assert!(matches!(comparability_set(&zero, &sub, 10.0), Err(Error::ZeroAverage)));
    }

    #[test]
    fn coarse_sample_is_rejected() {
        let mode = EigenMode::new(DomainSpec::interval(), &[5]).unwrap();
        let s = sample_grid(&mode, &Resolution::new(8.0)).unwrap();
        let sub = subdivide_domain(&DomainSpec::interval(), 0.05).unwrap();
        assert!(matches!(comparability_set(&s, &sub, 10.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn classify_threshold_example() {
        let d = DomainSpec::dirichlet_box(vec![1.0, 1.0]).unwrap();
        let lat = Lattice::with_max_spacing(&d, &[0.01, 0.01]).unwrap();
        let s = GridSample::from_values(d.clone(), lat.clone(), vec![1.0; lat.total_points() as usize], 1.0).unwrap();
        let sub = subdivide_domain(&d, 1.0).unwrap();
        let mut stats = comparability_set(&s, &sub, 10.0).unwrap().stats;
        let nb = stats.points.len();
        for (b, frac) in [(0usize, 2e-4), (1, 4e-4)] {
            stats.points[b] = 10_000;
            stats.e_points[b] = (frac * 10_000.0) as usize;
        }
        let good = classify_boxes(&mut stats, None);
        assert!(good[0]);
        assert!(!good[1]);
        for b in 0..nb {
            stats.e_points[b] = stats.points[b];
        }
        classify_boxes(&mut stats, None);
        assert_eq!(bad_proportion(&stats), 1.0);
    }

    #[test]
    fn interval_nodal_boxes() {
        let k = 10;
        let delta = 0.01;
        let mode = EigenMode::new(DomainSpec::interval(), &[k]).unwrap();
        let s = sample_grid(&mode, &Resolution::new(16.0).with_max_h(delta / 3.0)).unwrap();
        let nodal = extract_nodal(&s);
        let sub = subdivide_domain(&DomainSpec::interval(), delta).unwrap();
        let c = nodal_box_count(&sub, &nodal);
        assert_eq!(c.count, k as usize + 1);
        assert!(c.starred_volume <= (k as f64 + 1.0) * 3.0 * sub.box_side(0) + 1e-12);
        let empty = nodal_box_count_points(&sub, std::iter::empty());
        assert_eq!(empty.count, 0);
    }

    #[test]
    fn interval_sign_ratio_is_balanced() {
        let k = 6;
        let mode = EigenMode::new(DomainSpec::interval(), &[k]).unwrap();
        let s = sample_grid(&mode, &Resolution::new(64.0)).unwrap();
        let nodal = extract_nodal(&s);
        let x0 = 2.0 * PI / k as f64;
        let r = sign_ratio(&s, &nodal, &[x0], 0.8 * PI / (2.0 * k as f64)).unwrap();
        assert!((r.ratio - 1.0).abs() < 0.1, "{r:?}");
        assert!(sign_ratio(&s, &nodal, &[x0 + PI / (2.0 * k as f64)], 0.1).is_err());
    }

    #[test]
    fn torus_sign_ratio_at_crossing() {
        let d = DomainSpec::flat_torus(vec![1.0, 1.0]).unwrap();
        let mode = EigenMode::new(d, &[3, 4]).unwrap();
        let s = sample_grid(&mode, &Resolution::new(48.0)).unwrap();
        let nodal = extract_nodal(&s);
        let r = sign_ratio(&s, &nodal, &[PI / 3.0, PI / 4.0], PI / 16.0).unwrap();
        assert!((r.ratio - 1.0).abs() < 0.05, "{r:?}");
        assert!(r.pos_frac + r.neg_frac <= 1.0 + 1e-12);
    }

    #[test]
    fn csv_rows() {
        let d = DomainSpec::interval();
        let mode = EigenMode::new(d.clone(), &[3]).unwrap();
        let s = sample_grid(&mode, &Resolution::new(64.0).with_max_h(0.01)).unwrap();
        let sub = subdivide_domain(&d, 0.2).unwrap();
        let c = comparability_set(&s, &sub, 10.0).unwrap();
        let csv = c.stats.to_csv();
        assert_eq!(csv.lines().count(), sub.box_count() + 1);
        assert!(csv.starts_with("nu,avg,avg_star,e_frac,good,nodal,pos_frac,neg_frac"));
    }
}
