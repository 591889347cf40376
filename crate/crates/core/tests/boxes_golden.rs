//! Comparability-set golden value for the interval mode m = 20, δ = 0.02,
//! A = 10, checked against a dense-grid recomputation written from scratch.

use std::f64::consts::PI;

use nodal_lab::boxes::{comparability_set, subdivide_domain};
use nodal_lab::nodal_geom::{sample_lattice_capped, Lattice, DEFAULT_MAX_POINTS};
use nodal_lab::spectrum::{DomainSpec, EigenMode};

const M: u32 = 20;
const DELTA: f64 = 0.02;
const A: f64 = 10.0;
/// |E| from the library at h ≤ δ/10, pinned for regressions.
const GOLDEN: f64 = 0.327_957_476_249_984_7;

fn library_e(per_delta: f64) -> f64 {
    let d = DomainSpec::interval();
    let mode = EigenMode::new(d.clone(), &[M]).unwrap();
    let lat = Lattice::with_max_spacing(&d, &[DELTA / per_delta]).unwrap();
    let sample = sample_lattice_capped(&mode, &lat, DEFAULT_MAX_POINTS).unwrap();
    let sub = subdivide_domain(&d, DELTA).unwrap();
    comparability_set(&sample, &sub, A).unwrap().volume
}

/// Plain loops over a uniform grid with `segments` cells on [0, π].
fn dense_oracle(segments: usize) -> f64 {
    let h = PI / segments as f64;
    // N = floor(L / 1.5δ) already lands in (δ, 2δ) here
    let boxes = (PI / (1.5 * DELTA)).floor() as usize;
    let side = PI / boxes as f64;
    assert!(side > DELTA && side < 2.0 * DELTA);
    let f: Vec<f64> = (0..=segments).map(|i| (M as f64 * i as f64 * h).sin().powi(2)).collect();
    let owner: Vec<usize> = (0..=segments)
        .map(|i| (((i as f64 * h) / side).floor() as usize).min(boxes - 1))
        .collect();
    let mut sum = vec![0.0; boxes];
    let mut cnt = vec![0.0; boxes];
    for (v, &b) in f.iter().zip(&owner) {
        sum[b] += v;
        cnt[b] += 1.0;
    }
    let star: Vec<f64> = (0..boxes)
        .map(|b| {
            let lo = b.saturating_sub(1);
            let hi = (b + 1).min(boxes - 1);
            (lo..=hi).map(|k| sum[k]).sum::<f64>() / (lo..=hi).map(|k| cnt[k]).sum::<f64>()
        })
        .collect();
    let marked = f
        .iter()
        .zip(&owner)
        .filter(|(v, &b)| {
            let r = *v / star[b];
            !(1.0 / A..=A).contains(&r)
        })
        .count();
    marked as f64 * h
}

#[test]
fn golden_value_matches_dense_oracle() {
    let e = library_e(10.0);
    let lat = Lattice::with_max_spacing(&DomainSpec::interval(), &[DELTA / 10.0]).unwrap();
    let oracle = dense_oracle(4 * (lat.counts[0] - 1));
    assert!((e - oracle).abs() / oracle < 0.10, "library {e}, oracle {oracle}");
    assert!((e - GOLDEN).abs() / GOLDEN < 1e-9, "golden drifted: {e}");
}

#[test]
fn refinement_is_stable() {
    let coarse = library_e(8.0);
    let fine = library_e(20.0);
    assert!((coarse - fine).abs() / fine < 0.10, "{coarse} vs {fine}");
}
