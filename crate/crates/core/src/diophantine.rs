//! Continued fractions and approximation of points by nodal sets.

use std::fmt::Write as _;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::nodal_geom::exact_tube_volume;
use crate::spectrum::{modes_for_count, DomainSpec, EigenMode, ModeList};
use crate::{Error, Result};

/// Remainders below this end an expansion.
pub const REMAINDER_EPS: f64 = 1e-15;

/// A distance this small (relative to the domain size) is treated as an
/// exact hit of the nodal set.
pub const EXACT_HIT_TOL: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub struct Convergent {
    pub p: BigInt,
    pub q: BigInt,
}

impl Convergent {
    pub fn value(&self) -> f64 {
        ratio_f64(&self.p, &self.q)
    }

    pub fn q_u64(&self) -> Option<u64> {
        self.q.to_u64()
    }
}

fn ratio_f64(p: &BigInt, q: &BigInt) -> f64 {
    // Scale down huge operands before converting.
    let bits = q.bits().max(p.bits());
    if bits < 1000 {
        p.to_f64().unwrap_or(f64::NAN) / q.to_f64().unwrap_or(f64::NAN)
    } else {
        let shift = bits - 900;
        let ps: BigInt = p >> shift;
        let qs: BigInt = q >> shift;
        ps.to_f64().unwrap_or(f64::NAN) / qs.to_f64().unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuedFraction {
    pub x: f64,
    /// Partial quotients `a_1, …, a_d`.
    pub quotients: Vec<BigInt>,
    /// Convergents `p_m/q_m`, `m = 1..d`.
    pub convergents: Vec<Convergent>,
    /// The expansion reached `x` exactly.
    pub terminated: bool,
}

/// The exact dyadic rational `num / den` equal to a finite double in `[0, 1)`.
pub fn exact_rational(x: f64) -> (BigInt, BigInt) {
    if x == 0.0 {
        return (BigInt::zero(), BigInt::one());
    }
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
    // x = mant · 2^e with e < 0 for x < 1
    let num = BigInt::from(mant);
    let den = BigInt::one() << (-e) as usize;
    let g = num.gcd(&den);
    (num / &g, den / g)
}

/// Continued fraction of `x ∈ [0, 1)` computed on the exact rational value of
/// the double. Stops after `depth` quotients, when a denominator exceeds
/// `q_cap`, or when the remainder falls below 1e-15.
pub fn continued_fraction(x: f64, depth: usize, q_cap: Option<&BigInt>) -> Result<ContinuedFraction> {
    if !(x.is_finite() && (0.0..1.0).contains(&x)) {
        return Err(Error::invalid(format!("{x} is not in [0, 1)")));
    }
    let (mut num, mut den) = exact_rational(x);
    let mut quotients = Vec::new();
    let mut convergents = Vec::new();
    let (mut p_prev, mut q_prev) = (BigInt::one(), BigInt::zero());
    let (mut p, mut q) = (BigInt::zero(), BigInt::one());
    let mut terminated = num.is_zero();
    // Invariant: the current remainder is num/den ∈ (0, 1).
    while !num.is_zero() && quotients.len() < depth {
        let (a, r) = den.div_rem(&num);
        let p_next = &a * &p + &p_prev;
        let q_next = &a * &q + &q_prev;
        if let Some(cap) = q_cap {
            if &q_next > cap {
                break;
            }
        }
        p_prev = std::mem::replace(&mut p, p_next);
        q_prev = std::mem::replace(&mut q, q_next);
        quotients.push(a);
        convergents.push(Convergent { p: p.clone(), q: q.clone() });
        den = std::mem::replace(&mut num, r);
        if num.is_zero() {
            terminated = true;
            break;
        }
        if ratio_f64(&num, &den) < REMAINDER_EPS {
            break;
        }
    }
    Ok(ContinuedFraction {
        x,
        quotients,
        convergents,
        terminated,
    })
}

/// Distance metric on product domains. Both give the same distance to a
/// union of coordinate hyperplanes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
    Max,
}

fn check_point(point: &[f64], domain: &DomainSpec) -> Result<()> {
    if point.len() != domain.dim() {
        return Err(Error::invalid("point dimension does not match the domain"));
    }
    for (j, &x) in point.iter().enumerate() {
        let len = domain.axis_length(j);
        if !(x.is_finite() && x >= 0.0 && x <= len) {
            return Err(Error::invalid(format!("coordinate {x} outside [0, {len}]")));
        }
    }
    Ok(())
}

/// Exact distance from `point` to the nodal set of a separable mode: the
/// nodal set is a union of coordinate hyperplanes, so the distance is the
/// smallest per-axis distance to a factor zero (in either metric).
pub fn nearest_nodal_distance(point: &[f64], mode: &EigenMode) -> Result<f64> {
    check_point(point, mode.domain())?;
    nodal_distance_unchecked(point, mode).ok_or(Error::EmptyNodalSet)
}

fn nodal_distance_unchecked(point: &[f64], mode: &EigenMode) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (j, &x) in point.iter().enumerate() {
        if let Some(d) = mode.axis_zero_distance(j, x) {
            best = Some(best.map_or(d, |b: f64| b.min(d)));
        }
    }
    best
}

pub fn nearest_nodal_distance_metric(point: &[f64], mode: &EigenMode, _metric: Metric) -> Result<f64> {
    nearest_nodal_distance(point, mode)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApproxEvent {
    pub point: Vec<f64>,
    /// 1-based position of the mode in the list.
    pub k: usize,
    pub mu: f64,
    pub dist: f64,
}

impl ApproxEvent {
    pub fn hit(&self, b: f64, c: f64) -> bool {
        self.dist < c / self.mu.powf(b)
    }
}

/// Modes of the list whose nodal set passes within `C/μ^b` of the point.
pub fn approx_events(point: &[f64], modes: &ModeList, b: f64, c: f64) -> Result<Vec<ApproxEvent>> {
    if modes.is_empty() {
        return Err(Error::invalid("empty mode list"));
    }
    check_point(point, &modes.domain)?;
    let mut out = Vec::new();
    for (i, mode) in modes.modes.iter().enumerate() {
        let Some(dist) = nodal_distance_unchecked(point, mode) else {
            continue;
        };
        let mu = mode.mu();
        if dist < c / mu.powf(b) {
            out.push(ApproxEvent {
                point: point.to_vec(),
                k: i + 1,
                mu,
                dist,
            });
        }
    }
    Ok(out)
}

pub fn events_csv(events: &[ApproxEvent]) -> String {
    let dim = events.first().map_or(0, |e| e.point.len());
    let mut out = String::new();
    for j in 0..dim {
        let _ = write!(out, "x{j},");
    }
    out.push_str("k,mu,dist\n");
    for e in events {
        for x in &e.point {
            let _ = write!(out, "{x},");
        }
        let _ = writeln!(out, "{},{},{}", e.k, e.mu, e.dist);
    }
    out
}

/// Record events of the running best distance `d_k = min_{i ≤ k} dist(x, N_i)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Record {
    pub k: usize,
    pub mu: f64,
    pub dist: f64,
}

pub fn record_events(point: &[f64], modes: &ModeList) -> Result<Vec<Record>> {
    check_point(point, &modes.domain)?;
    let mut best = f64::INFINITY;
    let mut out = Vec::new();
    for (i, mode) in modes.modes.iter().enumerate() {
        let Some(d) = nodal_distance_unchecked(point, mode) else {
            continue;
        };
        if d < best {
            best = d;
            out.push(Record {
                k: i + 1,
                mu: mode.mu(),
                dist: d,
            });
            if d == 0.0 {
                break;
            }
        }
    }
    Ok(out)
}

/// Range of `μ` whose records enter the regression.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitWindow {
    pub mu_min: f64,
    pub mu_max: f64,
}

impl Default for FitWindow {
    fn default() -> Self {
        Self {
            mu_min: 0.0,
            mu_max: f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentEstimate {
    pub point: Vec<f64>,
    /// Least-squares slope of `-log d` against `log μ` over the records;
    /// `+∞` when the point lies on a nodal set.
    pub b_hat: f64,
    pub records: usize,
    /// Root-mean-square residual of the regression.
    pub residual: f64,
    pub mu_lo: f64,
    pub mu_hi: f64,
    /// Fewer than five records, or a decade of `μ` without a record.
    pub low_confidence: bool,
    pub exact_hit: bool,
}

pub fn estimate_exponent(point: &[f64], modes: &ModeList, window: FitWindow) -> Result<ExponentEstimate> {
    let records = record_events(point, modes)?;
    let scale = (0..modes.domain.dim())
        .map(|j| modes.domain.axis_length(j))
        .fold(0.0, f64::max);
    if let Some(last) = records.last() {
        if last.dist <= EXACT_HIT_TOL * scale {
            return Ok(ExponentEstimate {
                point: point.to_vec(),
                b_hat: f64::INFINITY,
                records: records.len(),
                residual: 0.0,
                mu_lo: records[0].mu,
                mu_hi: last.mu,
                low_confidence: false,
                exact_hit: true,
            });
        }
    }
    let used: Vec<&Record> = records
        .iter()
        .filter(|r| r.mu >= window.mu_min && r.mu <= window.mu_max)
        .collect();
    let xs: Vec<f64> = used.iter().map(|r| r.mu.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|r| -r.dist.ln()).collect();
    let (slope, residual) = least_squares_slope(&xs, &ys);
    let mu_lo = used.first().map_or(f64::NAN, |r| r.mu);
    let mu_hi = used.last().map_or(f64::NAN, |r| r.mu);
    let window_hi = window.mu_max.min(modes.mu_max);
    let window_lo = window.mu_min.max(used.first().map_or(1.0, |r| r.mu));
    let gap = decade_gap(&xs, window_lo.ln(), window_hi.ln());
    Ok(ExponentEstimate {
        point: point.to_vec(),
        b_hat: slope,
        records: used.len(),
        residual,
        mu_lo,
        mu_hi,
        low_confidence: used.len() < 5 || gap,
        exact_hit: false,
    })
}

/// Whether some decade of `[lo, hi]` (natural logs) contains no sample.
fn decade_gap(xs: &[f64], lo: f64, hi: f64) -> bool {
    let decade = std::f64::consts::LN_10;
    let mut prev = lo;
    for &x in xs.iter().chain(std::iter::once(&hi)) {
        if x - prev > decade {
            return true;
        }
        prev = prev.max(x);
    }
    false
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n < 2 {
        return (f64::NAN, f64::NAN);
    }
    let k = n as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    (slope, (ss / k).sqrt())
}

/// Exponent estimates for many points in parallel; order follows `points`.
pub fn estimate_exponents(points: &[Vec<f64>], modes: &ModeList, window: FitWindow) -> Result<Vec<ExponentEstimate>> {
    points.par_iter().map(|p| estimate_exponent(p, modes, window)).collect()
}

/// Uniform points in the fundamental region from a seeded ChaCha8 stream.
pub fn sample_points(domain: &DomainSpec, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..domain.dim())
                .map(|j| rng.gen::<f64>() * domain.axis_length(j))
                .collect()
        })
        .collect()
}

/// Uniform reals in `[0, 1)` from a seeded ChaCha8 stream.
pub fn sample_unit(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.gen::<f64>()).collect()
}

/// Distance to the nearest integer.
pub fn dist_to_integer(x: f64) -> f64 {
    (x - x.round()).abs()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KhinchinResult {
    pub q_max: u64,
    /// Number of `q ≤ q_max` with `‖q x‖ < ψ(q)`, per point.
    pub counts: Vec<u64>,
    /// Largest solution `q`, per point.
    pub largest_q: Vec<Option<u64>>,
}

impl KhinchinResult {
    /// Fraction of points with a solution `q > q0`.
    pub fn fraction_beyond(&self, q0: u64) -> f64 {
        if self.largest_q.is_empty() {
            return 0.0;
        }
        self.largest_q.iter().filter(|q| q.is_some_and(|q| q > q0)).count() as f64 / self.largest_q.len() as f64
    }

    pub fn mean_count(&self) -> f64 {
        if self.counts.is_empty() {
            return 0.0;
        }
        self.counts.iter().sum::<u64>() as f64 / self.counts.len() as f64
    }
}

pub fn khinchin_check<F>(psi: F, points: &[f64], q_max: u64) -> Result<KhinchinResult>
where
    F: Fn(u64) -> f64 + Sync,
{
    let psi_values: Vec<f64> = (1..=q_max).map(&psi).collect();
    if psi_values.iter().any(|v| v.is_nan() || *v < 0.0) {
        return Err(Error::invalid("psi must be nonnegative"));
    }
    let per_point: Vec<(u64, Option<u64>)> = points
        .par_iter()
        .map(|&x| {
            let mut count = 0;
            let mut largest = None;
            for (i, &bound) in psi_values.iter().enumerate() {
                let q = i as u64 + 1;
                if dist_to_integer(q as f64 * x) < bound {
                    count += 1;
                    largest = Some(q);
                }
            }
            (count, largest)
        })
        .collect();
    Ok(KhinchinResult {
        q_max,
        counts: per_point.iter().map(|p| p.0).collect(),
        largest_q: per_point.iter().map(|p| p.1).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BorelCantelli {
    pub c: f64,
    pub epsilon: f64,
    /// `S_K = Σ_{k ≤ K} Vol(T_{k, δ_k})` for `K = 1..k_max`.
    pub partial_sums: Vec<f64>,
    /// `C · Σ_{k ≤ K} μ_k^{-n-ε}`.
    pub comparison: Vec<f64>,
    /// `(K, S_{2K} - S_K)` at `K = 1, 2, 4, …` with `2K ≤ k_max`.
    pub cauchy_gaps: Vec<(usize, f64)>,
}

impl BorelCantelli {
    pub fn last(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }
}

/// Partial sums of exact tube volumes with radii `δ_k = C / μ_k^{n+1+ε}`.
pub fn borel_cantelli_sum(domain: &DomainSpec, c: f64, epsilon: f64, k_max: usize) -> Result<BorelCantelli> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon {epsilon} must be positive")));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::invalid(format!("C = {c} must be positive")));
    }
    let modes = modes_for_count(domain, k_max)?;
    let n = domain.dim() as f64;
    let mut partial_sums = Vec::with_capacity(k_max);
    let mut comparison = Vec::with_capacity(k_max);
    let (mut s, mut t) = (0.0, 0.0);
    for mode in &modes.modes {
        let mu = mode.mu();
        let delta = c / mu.powf(n + 1.0 + epsilon);
        s += exact_tube_volume(mode, delta);
        t += c * mu.powf(-n - epsilon);
        partial_sums.push(s);
        comparison.push(t);
    }
    let mut cauchy_gaps = Vec::new();
    let mut k = 1;
    while 2 * k <= partial_sums.len() {
        cauchy_gaps.push((k, partial_sums[2 * k - 1] - partial_sums[k - 1]));
        k *= 2;
    }
    Ok(BorelCantelli {
        c,
        epsilon,
        partial_sums,
        comparison,
        cauchy_gaps,
    })
}

/// Sign of `a - b` for exact rationals.
pub fn compare_rational(a: (&BigInt, &BigInt), b: (&BigInt, &BigInt)) -> std::cmp::Ordering {
    (a.0 * b.1).cmp(&(b.0 * a.1))
}

/// `|x - p/q| · q² < 1` evaluated exactly for `x = num/den`.
pub fn within_inverse_square(num: &BigInt, den: &BigInt, p: &BigInt, q: &BigInt) -> bool {
    let diff = num * q - p * den;
    let lhs = if diff.sign() == Sign::Minus { -diff } else { diff } * q;
    lhs < *den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::enumerate_modes;
    use std::f64::consts::PI;

    fn qs(cf: &ContinuedFraction) -> Vec<u64> {
        cf.convergents.iter().map(|c| c.q_u64().unwrap()).collect()
    }

    #[test]
    fn three_eighths() {
        let cf = continued_fraction(0.375, 50, None).unwrap();
        let a: Vec<u64> = cf.quotients.iter().map(|a| a.to_u64().unwrap()).collect();
        assert_eq!(a, vec![2, 1, 2]);
        assert!(cf.terminated);
        let last = cf.convergents.last().unwrap();
        assert_eq!((last.p.to_u64().unwrap(), last.q.to_u64().unwrap()), (3, 8));
    }

    #[test]
    fn golden_ratio_gives_fibonacci() {
        let x = (5f64.sqrt() - 1.0) / 2.0;
        let cf = continued_fraction(x, 30, None).unwrap();
        assert!(cf.quotients.iter().all(|a| a.is_one()));
        let mut fib = vec![1u64, 1];
        while fib.len() < 32 {
            let k = fib.len();
            fib.push(fib[k - 1] + fib[k - 2]);
        }
        for (m, c) in cf.convergents.iter().enumerate() {
            assert_eq!(c.p.to_u64().unwrap(), fib[m]);
            assert_eq!(c.q.to_u64().unwrap(), fib[m + 1]);
        }
    }

    #[test]
    fn pi_minus_three_matches_exhaustive_search() {
        let x = PI - 3.0;
        let cf = continued_fraction(x, 10, None).unwrap();
        let q = qs(&cf);
        assert!(q.contains(&7) && q.contains(&113));
        // Best approximations of the first kind: q whose best |x - p/q| beats
        // every smaller denominator.
        let mut best = f64::INFINITY;
        let mut records = Vec::new();
        for q in 1..=120u64 {
            let d = (x - (x * q as f64).round() / q as f64).abs();
            if d < best {
                best = d;
                records.push(q);
            }
        }
        let conv: Vec<u64> = q.into_iter().filter(|&q| q <= 120).collect();
        for c in &conv {
            assert!(records.contains(c), "{c} not a record");
        }
        assert_eq!(conv, vec![7, 106, 113]);
    }

    #[test]
    fn zero_and_bad_input() {
        let cf = continued_fraction(0.0, 10, None).unwrap();
        assert!(cf.quotients.is_empty());
        assert!(continued_fraction(1.0, 10, None).is_err());
        assert!(continued_fraction(-0.1, 10, None).is_err());
        assert!(continued_fraction(f64::NAN, 10, None).is_err());
    }

    #[test]
    fn q_cap_stops_expansion() {
        let cap = BigInt::from(200);
        let cf = continued_fraction(PI - 3.0, 50, Some(&cap)).unwrap();
        assert_eq!(qs(&cf), vec![7, 106, 113]);
    }

    #[test]
    fn interval_nearest_distance() {
        let k = 7;
        let mode = EigenMode::new(DomainSpec::interval(), &[k]).unwrap();
        let x = PI / (2.0 * k as f64);
        assert!((nearest_nodal_distance(&[x], &mode).unwrap() - x).abs() < 1e-15);
        assert_eq!(nearest_nodal_distance(&[3.0 * PI / k as f64], &mode).unwrap(), 0.0);
        assert!(nearest_nodal_distance(&[4.0], &mode).is_err());
    }

    #[test]
    fn torus_nearest_distance() {
        let mode = EigenMode::new(DomainSpec::flat_torus(vec![1.0, 1.0]).unwrap(), &[3, 4]).unwrap();
        let d = nearest_nodal_distance(&[0.4, 0.4], &mode).unwrap();
        // dense scan of the zero hyperplanes
        let mut best = f64::INFINITY;
        for axis in mode.nodal_description().axes {
            for c in axis.coords {
                best = best.min((0.4 - c).abs());
            }
        }
        assert!((d - best).abs() < 1e-15);
        // nearest zero is y = π/4 on the second axis
        assert!((d - (PI / 4.0 - 0.4)).abs() < 1e-15);
        let constant = EigenMode::new(DomainSpec::flat_torus(vec![1.0, 1.0]).unwrap(), &[0, 0]);
        if let Ok(c) = constant {
            assert!(matches!(nearest_nodal_distance(&[0.1, 0.1], &c), Err(Error::EmptyNodalSet)));
        }
    }

    #[test]
    fn every_interval_mode_is_a_b1_hit() {
        let modes = enumerate_modes(&DomainSpec::interval(), 500.0).unwrap();
        for x in sample_unit(20, 7) {
            let ev = approx_events(&[x * PI], &modes, 1.0, PI).unwrap();
            assert_eq!(ev.len(), modes.len());
        }
    }

    #[test]
    fn b2_hits_and_convergents() {
        let y = 2f64.sqrt() - 1.0;
        let x = y * PI;
        let modes = enumerate_modes(&DomainSpec::interval(), 5000.0).unwrap();
        let cf = continued_fraction(y, 40, Some(&BigInt::from(5000))).unwrap();
        let conv = qs(&cf);
        let hits: Vec<usize> = approx_events(&[x], &modes, 2.0, PI).unwrap().iter().map(|e| e.k).collect();
        for q in &conv {
            assert!(hits.contains(&(*q as usize)), "convergent {q} missing");
        }
        // With C = π/2 every hit is a multiple of a convergent denominator.
        let tight: Vec<usize> = approx_events(&[x], &modes, 2.0, PI / 2.0).unwrap().iter().map(|e| e.k).collect();
        assert!(!tight.is_empty());
        for k in tight.into_iter().filter(|&k| k > 1) {
            assert!(conv.iter().any(|&q| k as u64 % q == 0), "{k}");
        }
    }

    #[test]
    fn b10_has_no_late_hits() {
        let modes = enumerate_modes(&DomainSpec::interval(), 2000.0).unwrap();
        for x in sample_unit(50, 11) {
            let ev = approx_events(&[x * PI], &modes, 10.0, 1.0).unwrap();
            assert!(ev.iter().all(|e| e.k <= 2), "{x}");
        }
    }

    #[test]
    fn rational_point_is_flagged() {
        let modes = enumerate_modes(&DomainSpec::interval(), 100.0).unwrap();
        let est = estimate_exponent(&[PI / 2.0], &modes, FitWindow::default()).unwrap();
        assert!(est.exact_hit);
        assert!(est.b_hat.is_infinite());
    }

    #[test]
    fn khinchin_examples() {
        let xs = sample_unit(200, 3);
        let zero = khinchin_check(|_| 0.0, &xs, 1000).unwrap();
        assert!(zero.counts.iter().all(|&c| c == 0));
        let small = khinchin_check(|q| 0.5 / q as f64, &xs, 100).unwrap();
        let large = khinchin_check(|q| 0.5 / q as f64, &xs, 10_000).unwrap();
        assert!(large.mean_count() > small.mean_count());
        for (a, b) in small.counts.iter().zip(&large.counts) {
            assert!(b >= a);
        }
        assert!(khinchin_check(|_| -1.0, &xs, 10).is_err());
    }

    #[test]
    fn borel_cantelli_interval() {
        let bc = borel_cantelli_sum(&DomainSpec::interval(), 1.0, 1.0, 1000).unwrap();
        let want: f64 = (1..=1000).map(|k| 2.0 / (k as f64).powi(2)).sum();
        assert!((bc.last() - want).abs() < 1e-12);
        assert!(bc.cauchy_gaps.windows(2).all(|w| w[1].1 < w[0].1));
        assert!(borel_cantelli_sum(&DomainSpec::interval(), 1.0, 0.0, 10).is_err());
    }

    #[test]
    fn sampling_is_seeded() {
        let d = DomainSpec::dirichlet_box(vec![1.0, 2f64.sqrt()]).unwrap();
        assert_eq!(sample_points(&d, 5, 42), sample_points(&d, 5, 42));
        assert_ne!(sample_points(&d, 5, 42), sample_points(&d, 5, 43));
        for p in sample_points(&d, 100, 1) {
            assert!(p[0] < PI && p[1] < PI / 2f64.sqrt());
        }
    }

    #[test]
    fn events_csv_layout() {
        let modes = enumerate_modes(&DomainSpec::interval(), 10.0).unwrap();
        let ev = approx_events(&[1.0], &modes, 1.0, PI).unwrap();
        let csv = events_csv(&ev);
        assert!(csv.starts_with("x0,k,mu,dist\n"));
        assert_eq!(csv.lines().count(), ev.len() + 1);
    }
}
