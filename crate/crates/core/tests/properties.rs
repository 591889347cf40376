use std::f64::consts::PI;

use nodal_lab::boxes::{axis_intervals, comparability_set, subdivide_domain};
use nodal_lab::diophantine::{continued_fraction, exact_rational, nearest_nodal_distance, within_inverse_square};
use nodal_lab::nodal_geom::{
    distance_field, exact_tube_volume, extract_nodal, sample_grid, sample_lattice_capped, Lattice, Resolution,
    DEFAULT_MAX_POINTS,
};
use nodal_lab::spectrum::{enumerate_modes, weyl_count, DomainSpec, EigenMode};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn convergents_approximate_within_inverse_square(x in 0.0f64..1.0) {
        let cf = continued_fraction(x, 40, None).unwrap();
        let (num, den) = exact_rational(x);
        let mut last_q = None;
        for c in &cf.convergents {
            prop_assert!(within_inverse_square(&num, &den, &c.p, &c.q) || c.q_u64() == Some(1));
            if let Some(q) = &last_q {
                prop_assert!(&c.q >= q);
            }
            last_q = Some(c.q.clone());
        }
    }

    #[test]
    fn nodal_distance_is_lipschitz(
        m in (1u32..12, 1u32..12),
        p in (0.0f64..1.0, 0.0f64..1.0),
        q in (0.0f64..1.0, 0.0f64..1.0),
        torus in any::<bool>(),
    ) {
        let d = if torus {
            DomainSpec::flat_torus(vec![1.0, 1.5]).unwrap()
        } else {
            DomainSpec::dirichlet_box(vec![1.0, 1.5]).unwrap()
        };
        let mode = EigenMode::new(d.clone(), &[m.0, m.1]).unwrap();
        let x = [p.0 * d.axis_length(0), p.1 * d.axis_length(1)];
        let y = [q.0 * d.axis_length(0), q.1 * d.axis_length(1)];
        let dx = nearest_nodal_distance(&x, &mode).unwrap();
        let dy = nearest_nodal_distance(&y, &mode).unwrap();
        // on the torus the metric is the quotient one, bounded by the chart distance
        let gap = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        prop_assert!((dx - dy).abs() <= gap + 1e-12);
    }

    #[test]
    fn subdivision_tiles_the_axis(len in 0.05f64..10.0, ratio in 1.01f64..200.0) {
        let delta = len / ratio;
        let n = axis_intervals(len, delta).unwrap();
        let side = len / n as f64;
        prop_assert!(side > delta && side < 2.0 * delta);
        let d = DomainSpec::dirichlet_box(vec![PI / len]).unwrap();
        let sub = subdivide_domain(&d, delta).unwrap();
        prop_assert_eq!(sub.intervals(0), n);
        let e = &sub.endpoints[0];
        prop_assert_eq!(e[0], 0.0);
        prop_assert!((e[n] - len).abs() < 1e-12 * len);
        prop_assert!(e.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn comparability_set_shrinks_as_a_grows(m in 2u32..30, md in 0.1f64..0.5, a in 1.5f64..20.0) {
        let d = DomainSpec::interval();
        let mode = EigenMode::new(d.clone(), &[m]).unwrap();
        let delta = md / m as f64;
        let lat = Lattice::with_max_spacing(&d, &[delta / 10.0]).unwrap();
        let s = sample_lattice_capped(&mode, &lat, DEFAULT_MAX_POINTS).unwrap();
        let sub = subdivide_domain(&d, delta).unwrap();
        let small = comparability_set(&s, &sub, a).unwrap();
        let large = comparability_set(&s, &sub, 2.0 * a).unwrap();
        prop_assert!(large.volume <= small.volume);
        prop_assert!(large.mask.iter().zip(&small.mask).all(|(l, s)| !l || *s));
    }

    #[test]
    fn exact_tube_volume_is_monotone(m in (0u32..20, 1u32..20), d1 in 0.001f64..1.0, d2 in 0.001f64..1.0) {
        let mode = EigenMode::new(DomainSpec::flat_torus(vec![1.0, 1.0]).unwrap(), &[m.0, m.1]).unwrap();
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        let (vl, vh) = (exact_tube_volume(&mode, lo), exact_tube_volume(&mode, hi));
        prop_assert!(vl <= vh + 1e-12);
        prop_assert!(vh <= 4.0 * PI * PI + 1e-9);
    }

    #[test]
    fn weyl_count_matches_enumeration(mu in 0.5f64..25.0, w in 0.5f64..2.0, torus in any::<bool>()) {
        let d = if torus {
            DomainSpec::flat_torus(vec![1.0, w]).unwrap()
        } else {
            DomainSpec::dirichlet_box(vec![1.0, w]).unwrap()
        };
        let list = enumerate_modes(&d, mu).unwrap();
        prop_assert_eq!(weyl_count(&d, mu).unwrap(), list.len() as u64);
        prop_assert!(list.modes.windows(2).all(|p| p[0].mu() <= p[1].mu()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn distance_field_matches_exact_distance(m in (1u32..7, 1u32..7), torus in any::<bool>()) {
        let d = if torus {
            DomainSpec::flat_torus(vec![1.0, 1.0]).unwrap()
        } else {
            DomainSpec::dirichlet_box(vec![1.0, 1.0]).unwrap()
        };
        let mode = EigenMode::new(d, &[m.0, m.1]).unwrap();
        let s = sample_grid(&mode, &Resolution::new(12.0)).unwrap();
        let f = distance_field(&extract_nodal(&s), &s).unwrap();
        let h = s.lattice.max_h();
        for (i, &dist) in f.dist.iter().enumerate() {
            let x = s.point(i);
            let exact = nearest_nodal_distance(&x, &mode).unwrap();
            prop_assert!((dist - exact).abs() <= 2.0 * h, "{} vs {}", dist, exact);
        }
    }
}
