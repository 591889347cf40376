//! Separable eigenmodes of the Laplacian on model domains.
//!
//! Three domain families are supported:
//!
//! * `Interval`: `[0, π]` with Dirichlet conditions, modes `sin(kx)`, `μ = k`.
//! * `DirichletBox`: `Π [0, π/α_j]`, modes `Π sin(m_j α_j x_j)` with `m_j ≥ 1`.
//! * `FlatTorus`: `Π [0, 2π/α_j)` periodic, modes `Π f_j(m_j α_j x_j)` with
//!   `f_j ∈ {sin, cos}` on every axis with `m_j ≠ 0`.
//!
//! In every case `μ² = Σ α_j² m_j²`. Rational independence of the `α_j²` is a
//! modeling assumption that cannot be checked numerically; it is carried as the
//! `declared_independent` flag. Square roots of distinct square-free integers
//! (`1, √2, √3, √5, …`) are a good choice.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::{Error, Result};

/// Default cap on the number of lattice points a single enumeration may visit.
pub const DEFAULT_MODE_CAP: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Interval,
    DirichletBox,
    FlatTorus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub declared_independent: bool,
}

impl DomainSpec {
    pub fn new(kind: DomainKind, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("domain dimension must be at least 1"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::invalid(format!("weight {w} must be positive and finite")));
        }
        if kind == DomainKind::Interval && (weights.len() != 1 || weights[0] != 1.0) {
            return Err(Error::invalid("an interval domain is [0, π] with weight 1"));
        }
        Ok(Self {
            kind,
            weights,
            declared_independent: false,
        })
    }

    pub fn interval() -> Self {
        Self {
            kind: DomainKind::Interval,
            weights: vec![1.0],
            declared_independent: true,
        }
    }

    pub fn dirichlet_box(weights: Vec<f64>) -> Result<Self> {
        Self::new(DomainKind::DirichletBox, weights)
    }

    pub fn flat_torus(weights: Vec<f64>) -> Result<Self> {
        Self::new(DomainKind::FlatTorus, weights)
    }

    pub fn with_declared_independent(mut self, flag: bool) -> Self {
        self.declared_independent = flag;
        self
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn is_periodic(&self) -> bool {
        self.kind == DomainKind::FlatTorus
    }

    /// Side length of the fundamental region along axis `j`.
    pub fn axis_length(&self, j: usize) -> f64 {
        match self.kind {
            DomainKind::Interval => PI,
            DomainKind::DirichletBox => PI / self.weights[j],
            DomainKind::FlatTorus => 2.0 * PI / self.weights[j],
        }
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.axis_length(j)).product()
    }

    /// Stable textual key used for content hashing.
    pub fn canonical_key(&self) -> String {
        let w: Vec<String> = self.weights.iter().map(|w| format!("{:.17e}", w)).collect();
        format!("{:?}[{}]", self.kind, w.join(","))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Sine,
    Cosine,
}

pub type MultiIndex = SmallVec<[u32; 3]>;
pub type FactorKinds = SmallVec<[FactorKind; 3]>;

/// One separable eigenfunction `Π_j f_j(m_j α_j x_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenMode {
    domain: Arc<DomainSpec>,
    m: MultiIndex,
    kinds: FactorKinds,
    mu_sq: f64,
}

impl EigenMode {
    /// Mode with sine factors on every axis.
    pub fn new(domain: DomainSpec, m: &[u32]) -> Result<Self> {
        let kinds = std::iter::repeat(FactorKind::Sine).take(m.len()).collect::<Vec<_>>();
        Self::with_kinds(domain, m, &kinds)
    }

    pub fn with_kinds(domain: DomainSpec, m: &[u32], kinds: &[FactorKind]) -> Result<Self> {
        Self::from_shared(Arc::new(domain), m, kinds)
    }

    pub fn from_shared(domain: Arc<DomainSpec>, m: &[u32], kinds: &[FactorKind]) -> Result<Self> {
        let n = domain.dim();
        if m.len() != n || kinds.len() != n {
            return Err(Error::invalid(format!(
                "multi-index of length {} does not match domain dimension {n}",
                m.len()
            )));
        }
        match domain.kind {
            DomainKind::Interval | DomainKind::DirichletBox => {
                if m.iter().any(|&mj| mj == 0) {
                    return Err(Error::invalid("Dirichlet modes need every m_j >= 1"));
                }
                if kinds.iter().any(|&k| k != FactorKind::Sine) {
                    return Err(Error::invalid("Dirichlet modes use sine factors only"));
                }
            }
            DomainKind::FlatTorus => {
                if m.iter().all(|&mj| mj == 0) {
                    return Err(Error::invalid("the constant torus mode is excluded"));
                }
            }
        }
        let mu_sq = mu_squared(&domain.weights, m);
        Ok(Self {
            m: m.iter().copied().collect(),
            kinds: kinds.iter().copied().collect(),
            domain,
            mu_sq,
        })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn shared_domain(&self) -> &Arc<DomainSpec> {
        &self.domain
    }

    pub fn m(&self) -> &[u32] {
        &self.m
    }

    pub fn kinds(&self) -> &[FactorKind] {
        &self.kinds
    }

    pub fn mu(&self) -> f64 {
        self.mu_sq.sqrt()
    }

    pub fn mu_squared(&self) -> f64 {
        self.mu_sq
    }

    /// Angular frequency of the factor along axis `j`.
    pub fn axis_rate(&self, j: usize) -> f64 {
        self.m[j] as f64 * self.domain.weights[j]
    }

    /// Value of the `j`-th one-dimensional factor at coordinate `x`.
    pub fn axis_factor(&self, j: usize, x: f64) -> f64 {
        if self.m[j] == 0 {
            return 1.0;
        }
        let arg = self.axis_rate(j) * x;
        match self.kinds[j] {
            FactorKind::Sine => arg.sin(),
            FactorKind::Cosine => arg.cos(),
        }
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.m.len() {
            return Err(Error::invalid(format!(
                "point of dimension {} for a {}-dimensional domain",
                point.len(),
                self.m.len()
            )));
        }
        Ok(point
            .iter()
            .enumerate()
            .map(|(j, &x)| self.axis_factor(j, x))
            .product())
    }

    /// Spacing between consecutive zeros of the `j`-th factor, `None` for a
    /// constant factor.
    pub fn axis_zero_spacing(&self, j: usize) -> Option<f64> {
        (self.m[j] != 0).then(|| PI / self.axis_rate(j))
    }

    /// Distance from coordinate `x` to the nearest zero of the `j`-th factor.
    pub fn axis_zero_distance(&self, j: usize, x: f64) -> Option<f64> {
        let spacing = self.axis_zero_spacing(j)?;
        let offset = match self.kinds[j] {
            FactorKind::Sine => 0.0,
            FactorKind::Cosine => 0.5,
        };
        let t = x / spacing - offset;
        Some((t - t.round()).abs() * spacing)
    }

    /// Zero hyperplanes of every non-constant factor inside the fundamental
    /// region. For Dirichlet domains both boundary hyperplanes are included.
    pub fn nodal_description(&self) -> NodalDescription {
        let axes = (0..self.m.len())
            .filter(|&j| self.m[j] != 0)
            .map(|j| {
                let spacing = PI / self.axis_rate(j);
                let m = self.m[j] as usize;
                let coords = match (self.domain.kind, self.kinds[j]) {
                    (DomainKind::FlatTorus, FactorKind::Sine) => {
                        (0..2 * m).map(|k| k as f64 * spacing).collect()
                    }
                    (DomainKind::FlatTorus, FactorKind::Cosine) => {
                        (0..2 * m).map(|k| (k as f64 + 0.5) * spacing).collect()
                    }
                    _ => (0..=m).map(|k| k as f64 * spacing).collect(),
                };
                AxisZeros { axis: j, coords }
            })
            .collect();
        NodalDescription { axes }
    }
}

/// Zero coordinates of one factor; the nodal set contains every hyperplane
/// `x_axis = c` for `c` in `coords`.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisZeros {
    pub axis: usize,
    pub coords: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodalDescription {
    pub axes: Vec<AxisZeros>,
}

impl NodalDescription {
    pub fn hyperplane_count(&self) -> usize {
        self.axes.iter().map(|a| a.coords.len()).sum()
    }
}

fn axis_term(weight: f64, m: u32) -> f64 {
    let r = weight * m as f64;
    r * r
}

fn mu_squared(weights: &[f64], m: &[u32]) -> f64 {
    weights
        .iter()
        .zip(m)
        .fold(0.0, |acc, (&w, &mj)| acc + axis_term(w, mj))
}

/// Whether counting runs over modes (with multiplicity) or over distinct
/// eigenvalues.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountingConvention {
    #[default]
    Modes,
    Distinct,
}

/// All admissible modes with `μ ≤ μ_max`, sorted by `μ`, ties broken by the
/// multi-index and then by the factor kinds.
#[derive(Clone, Debug)]
pub struct ModeList {
    pub domain: DomainSpec,
    pub mu_max: f64,
    pub modes: Vec<EigenMode>,
}

impl ModeList {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Index ranges of modes sharing one eigenvalue (relative tolerance 1e-12).
    pub fn eigenvalue_groups(&self) -> Vec<std::ops::Range<usize>> {
        let mut groups = Vec::new();
        let mut start = 0;
        for i in 1..=self.modes.len() {
            let split = i == self.modes.len() || {
                let a = self.modes[start].mu_sq;
                let b = self.modes[i].mu_sq;
                (b - a) > 1e-12 * b.abs().max(1.0)
            };
            if split {
                groups.push(start..i);
                start = i;
            }
        }
        groups
    }

    /// ModeList JSON with μ written to 17 significant digits.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct ModeOut<'a> {
            m: &'a [u32],
            kinds: &'a [FactorKind],
            mu: Box<serde_json::value::RawValue>,
        }
        #[derive(Serialize)]
        struct ListOut<'a> {
            domain: &'a DomainSpec,
            mu_max: Box<serde_json::value::RawValue>,
            modes: Vec<ModeOut<'a>>,
        }
        let modes = self
            .modes
            .iter()
            .map(|mode| {
                Ok(ModeOut {
                    m: mode.m(),
                    kinds: mode.kinds(),
                    mu: sig17(mode.mu())?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let out = ListOut {
            domain: &self.domain,
            mu_max: sig17(self.mu_max)?,
            modes,
        };
        Ok(serde_json::to_string_pretty(&out)?)
    }
}

fn sig17(x: f64) -> Result<Box<serde_json::value::RawValue>> {
    Ok(serde_json::value::RawValue::from_string(format!("{:.16e}", x))?)
}

/// Admission bound for `Σ α_j² m_j² ≤ μ_max²`, padded by a relative 1e-12 so
/// that mathematically equal sums (e.g. `1 + (2√2)²` against `3²`) are kept.
fn admission_limit(mu_max: f64) -> f64 {
    mu_max * mu_max * (1.0 + 1e-12)
}

fn validate_cutoff(mu_max: f64) -> Result<()> {
    if !mu_max.is_finite() || mu_max <= 0.0 {
        return Err(Error::invalid(format!("cutoff {mu_max} must be positive and finite")));
    }
    Ok(())
}

fn min_index(domain: &DomainSpec) -> u32 {
    match domain.kind {
        DomainKind::FlatTorus => 0,
        _ => 1,
    }
}

/// Largest `m ≥ lo` with `partial + (w m)² ≤ limit`, or `None` if even `lo`
/// fails. Uses exactly the admission test of [`enumerate_modes`].
fn last_axis_max(partial: f64, weight: f64, limit: f64, lo: u32) -> Option<u32> {
    if partial + axis_term(weight, lo) > limit {
        return None;
    }
    let rem = (limit - partial).max(0.0);
    let mut m = ((rem.sqrt() / weight).floor() as u64).min(u32::MAX as u64 - 1) as u32;
    m = m.max(lo);
    while m > lo && partial + axis_term(weight, m) > limit {
        m -= 1;
    }
    while partial + axis_term(weight, m + 1) <= limit {
        m += 1;
    }
    Some(m)
}

/// Multiplicity of one multi-index: sine/cosine choices on torus axes.
fn multiplicity(domain: &DomainSpec, m: &[u32]) -> u64 {
    match domain.kind {
        DomainKind::FlatTorus => 1u64 << m.iter().filter(|&&mj| mj != 0).count(),
        _ => 1,
    }
}

fn count_rec(domain: &DomainSpec, axis: usize, partial: f64, limit: f64, m: &mut Vec<u32>, cap: u64, acc: &mut u64) -> Result<()> {
    let n = domain.dim();
    let lo = min_index(domain);
    let w = domain.weights[axis];
    if axis + 1 == n {
        let Some(hi) = last_axis_max(partial, w, limit, lo) else {
            return Ok(());
        };
        let torus = domain.kind == DomainKind::FlatTorus;
        let nonzero = m.iter().filter(|&&mj| mj != 0).count() as u32;
        let prefix_zero = nonzero == 0;
        let mut add = 0u64;
        if torus {
            // m_last = 0 term, then m_last in 1..=hi
            if !prefix_zero {
                add += 1u64 << nonzero;
            }
            add += (hi as u64) * (1u64 << (nonzero + 1));
        } else {
            add += (hi - lo + 1) as u64;
        }
        *acc += add;
        if *acc > cap {
            return Err(Error::ResourceGuard(format!("mode count exceeds cap {cap}")));
        }
        return Ok(());
    }
    let mut mj = lo;
    loop {
        let next = partial + axis_term(w, mj);
        if next > limit {
            break;
        }
        m.push(mj);
        count_rec(domain, axis + 1, next, limit, m, cap, acc)?;
        m.pop();
        mj += 1;
    }
    Ok(())
}

/// Number of modes (with multiplicity) with `μ ≤ λ`, capped.
pub fn weyl_count_capped(domain: &DomainSpec, lambda: f64, cap: u64) -> Result<u64> {
    validate_cutoff(lambda)?;
    let mut acc = 0;
    count_rec(domain, 0, 0.0, admission_limit(lambda), &mut Vec::new(), cap, &mut acc)?;
    Ok(acc)
}

/// Eigenvalue counting function `#{modes: μ ≤ λ}` with multiplicity.
pub fn weyl_count(domain: &DomainSpec, lambda: f64) -> Result<u64> {
    weyl_count_capped(domain, lambda, DEFAULT_MODE_CAP)
}

/// Number of distinct eigenvalues `μ ≤ λ`.
pub fn weyl_count_distinct(domain: &DomainSpec, lambda: f64) -> Result<u64> {
    Ok(enumerate_modes(domain, lambda)?.eigenvalue_groups().len() as u64)
}

pub fn enumerate_modes(domain: &DomainSpec, mu_max: f64) -> Result<ModeList> {
    enumerate_modes_capped(domain, mu_max, DEFAULT_MODE_CAP)
}

pub fn enumerate_modes_capped(domain: &DomainSpec, mu_max: f64, cap: u64) -> Result<ModeList> {
    // The counting pass enforces the cap before anything is allocated.
    let total = weyl_count_capped(domain, mu_max, cap)?;
    let shared = Arc::new(domain.clone());
    let limit = admission_limit(mu_max);
    let n = domain.dim();
    let lo = min_index(domain);
    let mut modes = Vec::with_capacity(total as usize);
    let mut m: Vec<u32> = Vec::with_capacity(n);

    fn push_variants(shared: &Arc<DomainSpec>, m: &[u32], out: &mut Vec<EigenMode>) {
        let nonzero: Vec<usize> = (0..m.len()).filter(|&j| m[j] != 0).collect();
        let variants = multiplicity(shared, m);
        for bits in 0..variants {
            let mut kinds: Vec<FactorKind> = vec![FactorKind::Sine; m.len()];
            // Highest bit maps to the first nonzero axis, so variants come out
            // in lexicographic order of the kinds.
            for (pos, &j) in nonzero.iter().enumerate() {
                let bit = nonzero.len() - 1 - pos;
                if shared.kind == DomainKind::FlatTorus && (bits >> bit) & 1 == 1 {
                    kinds[j] = FactorKind::Cosine;
                }
            }
            let mode = EigenMode::from_shared(shared.clone(), m, &kinds)
                .expect("enumerated multi-index is admissible");
            out.push(mode);
        }
    }

    // Walks the ellipsoid axis by axis with the same admission test as the counter.
    fn rec(shared: &Arc<DomainSpec>, axis: usize, partial: f64, limit: f64, lo: u32, m: &mut Vec<u32>, out: &mut Vec<EigenMode>) {
        let n = shared.dim();
        let w = shared.weights[axis];
        let mut mj = lo;
        loop {
            let next = partial + axis_term(w, mj);
            if next > limit {
                break;
            }
            m.push(mj);
            if axis + 1 == n {
                if !(shared.kind == DomainKind::FlatTorus && m.iter().all(|&x| x == 0)) {
                    push_variants(shared, m, out);
                }
            } else {
                rec(shared, axis + 1, next, limit, lo, m, out);
            }
            m.pop();
            mj += 1;
        }
    }
    rec(&shared, 0, 0.0, limit, lo, &mut m, &mut modes);
    debug_assert_eq!(modes.len() as u64, total);

    modes.sort_by(compare_modes);
    Ok(ModeList {
        domain: domain.clone(),
        mu_max,
        modes,
    })
}

fn compare_modes(a: &EigenMode, b: &EigenMode) -> Ordering {
    a.mu_sq
        .partial_cmp(&b.mu_sq)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.m.as_slice().cmp(b.m.as_slice()))
        .then_with(|| a.kinds.as_slice().cmp(b.kinds.as_slice()))
}

/// Smallest cutoff whose mode list has at least `k` entries (doubling search).
pub fn modes_for_count(domain: &DomainSpec, k: usize) -> Result<ModeList> {
    let mut mu_max = domain.weights.iter().cloned().fold(0.0, f64::max) * (domain.dim() as f64).sqrt();
    loop {
        let count = weyl_count(domain, mu_max)?;
        if count as usize >= k {
            let mut list = enumerate_modes(domain, mu_max)?;
            list.modes.truncate(k);
            if let Some(last) = list.modes.last() {
                list.mu_max = last.mu();
            }
            return Ok(list);
        }
        mu_max *= 2.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_modes_are_integers() {
        let list = enumerate_modes(&DomainSpec::interval(), 3.5).unwrap();
        let mus: Vec<f64> = list.modes.iter().map(|m| m.mu()).collect();
        assert_eq!(mus, vec![1.0, 2.0, 3.0]);
        for (k, mode) in list.modes.iter().enumerate() {
            assert_eq!(mode.m(), &[k as u32 + 1]);
        }
    }

    #[test]
    fn unit_square_below_sqrt2_is_empty() {
        let d = DomainSpec::dirichlet_box(vec![1.0, 1.0]).unwrap();
        assert!(enumerate_modes(&d, 1.0).unwrap().is_empty());
        assert_eq!(enumerate_modes(&d, 2f64.sqrt() + 1e-12).unwrap().len(), 1);
    }

    #[test]
    fn box_sqrt2_matches_double_loop() {
        let d = DomainSpec::dirichlet_box(vec![1.0, 2f64.sqrt()]).unwrap();
        let list = enumerate_modes(&d, 3.0).unwrap();
        let mut brute: Vec<(f64, [u32; 2])> = Vec::new();
        for m1 in 1..=3u32 {
            for m2 in 1..=3u32 {
                let mu2 = (m1 * m1) as f64 + 2.0 * (m2 * m2) as f64;
                if mu2 <= 9.0 {
                    brute.push((mu2.sqrt(), [m1, m2]));
                }
            }
        }
        brute.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        // (1,1): √3, (2,1): √6, (1,2): 3
        assert_eq!(brute.len(), 3);
        assert_eq!(list.len(), brute.len());
        for (mode, (mu, m)) in list.modes.iter().zip(&brute) {
            assert_eq!(mode.m(), m);
            assert!((mode.mu() - mu).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_examples() {
        let iv = DomainSpec::interval();
        for k in [1u32, 3, 10, 57] {
            let mode = EigenMode::new(iv.clone(), &[k]).unwrap();
            let quarter = mode.eval(&[PI / (2.0 * k as f64)]).unwrap();
            assert!((quarter - 1.0).abs() < 1e-14);
            for j in 0..=k {
                let z = mode.eval(&[PI * j as f64 / k as f64]).unwrap();
                assert!(z.abs() < 1e-12, "k={k} j={j} value {z}");
            }
        }
        let torus = DomainSpec::flat_torus(vec![1.0, 1.0]).unwrap();
        let mode = EigenMode::new(torus, &[3, 4]).unwrap();
        let v = mode.eval(&[0.2, 0.3]).unwrap();
        // independent expression: Taylor series of sine
        let taylor = |t: f64| {
            let (mut term, mut sum) = (t, t);
            for k in 1..30 {
                term *= -t * t / ((2 * k) as f64 * (2 * k + 1) as f64);
                sum += term;
            }
            sum
        };
        assert!((v - taylor(0.6) * taylor(1.2)).abs() < 1e-15);
        assert!((v - (0.6f64).sin() * (1.2f64).sin()).abs() < 1e-15);
        assert!(mode.eval(&[0.1]).is_err());
    }

    #[test]
    fn nodal_descriptions() {
        let iv = DomainSpec::interval();
        let mode = EigenMode::new(iv, &[4]).unwrap();
        let desc = mode.nodal_description();
        assert_eq!(desc.axes.len(), 1);
        let want: Vec<f64> = (0..=4).map(|j| PI * j as f64 / 4.0).collect();
        assert_eq!(desc.axes[0].coords, want);

        let torus = DomainSpec::flat_torus(vec![1.0, 1.0]).unwrap();
        let mode = EigenMode::new(torus.clone(), &[3, 4]).unwrap();
        let desc = mode.nodal_description();
        assert_eq!(desc.axes[0].coords.len(), 6);
        assert_eq!(desc.axes[1].coords.len(), 8);
        assert_eq!(desc.hyperplane_count(), 14);

        let line = EigenMode::new(torus, &[2, 0]).unwrap();
        let desc = line.nodal_description();
        assert_eq!(desc.axes.len(), 1);
        assert_eq!(desc.axes[0].axis, 0);
    }

    #[test]
    fn weyl_examples() {
        assert_eq!(weyl_count(&DomainSpec::interval(), 10.5).unwrap(), 10);
        let d = DomainSpec::dirichlet_box(vec![1.0, 1.0]).unwrap();
        let mut brute = 0;
        for m1 in 1..=5 {
            for m2 in 1..=5 {
                if m1 * m1 + m2 * m2 <= 25 {
                    brute += 1;
                }
            }
        }
        assert_eq!(weyl_count(&d, 5.0).unwrap(), brute);
        let ratios: Vec<f64> = [20.0, 40.0, 80.0]
            .iter()
            .map(|&l| weyl_count(&d, l).unwrap() as f64 / (l * l))
            .collect();
        let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!((hi - lo) / hi < 0.10, "{ratios:?}");
    }

    #[test]
    fn torus_counts_full_lattice() {
        // Torus multiplicities reproduce the Z^2 lattice count minus the origin.
        let t = DomainSpec::flat_torus(vec![1.0, 1.0]).unwrap();
        let r = 7.3f64;
        let mut brute = 0u64;
        for a in -8i32..=8 {
            for b in -8i32..=8 {
                if (a, b) != (0, 0) && ((a * a + b * b) as f64) <= r * r {
                    brute += 1;
                }
            }
        }
        assert_eq!(weyl_count(&t, r).unwrap(), brute);
        assert_eq!(enumerate_modes(&t, r).unwrap().len() as u64, brute);
    }

    #[test]
    fn resource_guard_trips() {
        let d = DomainSpec::dirichlet_box(vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            enumerate_modes_capped(&d, 100.0, 1000),
            Err(Error::ResourceGuard(_))
        ));
        assert!(enumerate_modes(&d, f64::NAN).is_err());
        assert!(enumerate_modes(&d, f64::INFINITY).is_err());
    }

    #[test]
    fn invalid_modes_rejected() {
        let d = DomainSpec::dirichlet_box(vec![1.0, 1.0]).unwrap();
        assert!(EigenMode::new(d.clone(), &[0, 1]).is_err());
        assert!(EigenMode::with_kinds(d, &[1, 1], &[FactorKind::Cosine, FactorKind::Sine]).is_err());
        let t = DomainSpec::flat_torus(vec![1.0]).unwrap();
        assert!(EigenMode::new(t, &[0]).is_err());
        assert!(DomainSpec::dirichlet_box(vec![]).is_err());
        assert!(DomainSpec::dirichlet_box(vec![-1.0]).is_err());
        assert!(DomainSpec::new(DomainKind::Interval, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn json_has_seventeen_digits() {
        let d = DomainSpec::dirichlet_box(vec![1.0, 1.0]).unwrap();
        let list = enumerate_modes(&d, 2.0).unwrap();
        let json = list.to_json().unwrap();
        assert!(json.contains("1.4142135623730951e0"), "{json}");
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["modes"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn eigenvalue_groups_merge_ties() {
        let d = DomainSpec::dirichlet_box(vec![1.0, 1.0]).unwrap();
        let list = enumerate_modes(&d, 5.0).unwrap();
        let groups = list.eigenvalue_groups();
        // (1,2) and (2,1) share μ² = 5
        assert!(groups.iter().any(|g| g.len() == 2));
        assert_eq!(groups.iter().map(|g| g.len()).sum::<usize>(), list.len());
        assert_eq!(weyl_count_distinct(&d, 5.0).unwrap() as usize, groups.len());
    }
}
