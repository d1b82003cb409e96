mod common;

use std::f64::consts::PI;

use common::{clenshaw_curtis, kernel, random_unit, test_rng};
use needlet::cubature::build_rule;
use needlet::sphere::{geodesic_distance, legendre_kernel, projector_kernel_sum, LegendreSeries};
use needlet::UnitVector3;

#[test]
fn geodesic_distance_axes() {
    let e1 = UnitVector3::E1;
    assert_eq!(geodesic_distance(&e1, &e1), 0.0);
    assert!((geodesic_distance(&e1, &-e1) - PI).abs() < 1e-15);
    assert!((geodesic_distance(&e1, &UnitVector3::E2) - PI / 2.0).abs() < 1e-15);
}

#[test]
fn kernel_normalization() {
    for t in [-1.0, -0.3, 0.0, 0.8, 1.0] {
        assert!((legendre_kernel(0, t).unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-16);
    }
    for l in [1, 5, 64, 1000] {
        let v = legendre_kernel(l, 1.0).unwrap();
        assert!((v - (2 * l + 1) as f64 / (4.0 * PI)).abs() < 1e-12 * v);
    }
    assert!(legendre_kernel(3, 1.0 + 1e-10).is_ok());
    assert!(legendre_kernel(3, 1.0 + 1e-6).is_err());
}

#[test]
fn orthogonality_up_to_64() {
    let (nodes, weights) = clenshaw_curtis(512);
    let values: Vec<Vec<f64>> = (0..=64)
        .map(|l| nodes.iter().map(|&t| legendre_kernel(l, t).unwrap()).collect())
        .collect();
    for l in 0..=64 {
        for k in 0..=64 {
            let integral: f64 = weights
                .iter()
                .enumerate()
                .map(|(i, w)| w * values[l][i] * values[k][i])
                .sum();
            let expected = if l == k { (2 * l + 1) as f64 / (8.0 * PI * PI) } else { 0.0 };
            assert!((integral - expected).abs() < 1e-10, "l={l} k={k}: {integral} vs {expected}");
        }
    }
    let (nodes, weights) = clenshaw_curtis(64);
    let i3: f64 = nodes
        .iter()
        .zip(&weights)
        .map(|(&t, w)| w * legendre_kernel(3, t).unwrap().powi(2))
        .sum();
    assert!((i3 - 7.0 / (8.0 * PI * PI)).abs() < 1e-14);
}

#[test]
fn recurrence_stays_bounded_to_4096() {
    let mut rng = test_rng(1);
    use rand::Rng;
    let ts: Vec<f64> = (0..200).map(|_| rng.gen_range(-1.0..=1.0)).chain([-1.0, 1.0, 0.0]).collect();
    for l in [1usize, 17, 256, 1023, 2048, 4096] {
        let bound = (2 * l + 1) as f64 / (4.0 * PI);
        for &t in &ts {
            let v = legendre_kernel(l, t).unwrap();
            assert!(v.abs() <= bound * (1.0 + 1e-12), "l={l} t={t}: {v}");
        }
    }
}

#[test]
fn matches_independent_recurrence() {
    for l in [0usize, 1, 2, 7, 40, 300] {
        for t in [-0.97, -0.2, 0.45, 0.999] {
            assert!((legendre_kernel(l, t).unwrap() - kernel(l, t)).abs() < 1e-12);
        }
    }
}

#[test]
fn kernel_sum_cases() {
    assert_eq!(projector_kernel_sum(&[0.0; 8], 0.3).unwrap(), 0.0);
    assert!((projector_kernel_sum(&[1.0], -0.7).unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-16);
    let w = [0.5, -1.0, 0.0, 2.0];
    let direct: f64 = w.iter().enumerate().map(|(l, c)| c * kernel(l, 0.37)).sum();
    assert!((projector_kernel_sum(&w, 0.37).unwrap() - direct).abs() < 1e-14);
}

#[test]
fn reproducing_property_by_cubature() {
    let j = 4;
    let rule = build_rule(j).unwrap();
    let mut rng = test_rng(2);
    for _ in 0..5 {
        let x = random_unit(&mut rng);
        let z = random_unit(&mut rng);
        for l in [0usize, 1, 5, 16] {
            for k in [0usize, 1, 5, 16] {
                let integral: f64 = rule
                    .iter()
                    .map(|(y, w)| w * kernel(l, x.dot(y)) * kernel(k, y.dot(&z)))
                    .sum();
                let expected = if l == k { kernel(l, x.dot(&z)) } else { 0.0 };
                assert!((integral - expected).abs() < 1e-8, "l={l} k={k}");
            }
        }
    }
}

#[test]
fn blocked_series_is_bit_identical() {
    let s = LegendreSeries::new((0..40).map(|l| 1.0 / (1.0 + l as f64)).collect());
    let mut rng = test_rng(3);
    use rand::Rng;
    let ts: Vec<f64> = (0..101).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let mut many = ts.clone();
    s.eval_many(&mut many);
    for (t, v) in ts.iter().zip(&many) {
        assert_eq!(s.eval(*t).to_bits(), v.to_bits());
    }
}
