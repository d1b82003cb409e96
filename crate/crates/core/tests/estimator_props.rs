mod common;

use std::f64::consts::PI;

use common::{random_unit, test_rng};
use needlet::cubature::{build_rule, matched_node_count};
use needlet::estimator::{
    default_max_level, empirical_coefficients, error_metrics, estimate_density, hard_threshold,
    pilot_bound, scaling_factor, EstimatorConfig, MetricsRecord, Sample,
};
use needlet::experiments::sample_uniform;
use needlet::frame::NeedletFrame;
use needlet::{Error, UnitVector3};
use proptest::prelude::*;
use rand::Rng;

const UNIFORM: f64 = 1.0 / (4.0 * PI);

fn frame(j: u32) -> NeedletFrame {
    NeedletFrame::build(j).unwrap()
}

#[test]
fn single_point_coefficients_are_needlet_values() {
    let f = frame(3);
    let x = UnitVector3::from_angles(1.1, -0.4);
    let pyr = empirical_coefficients(&Sample::new(vec![x]).unwrap(), 3, &f).unwrap();
    for j in 0..=3 {
        for (node, b) in pyr.level(j).iter().enumerate() {
            assert!((b - f.eval(&f.atom(j, node), &x)).abs() < 1e-13);
        }
    }
}

#[test]
fn empty_sample_rejected() {
    assert!(matches!(Sample::new(vec![]), Err(Error::EmptySample)));
    assert!(EstimatorConfig::new(0, 1, 1.0, 1.0).is_err());
    assert!(EstimatorConfig::new(10, 1, 1.0, 0.0).is_err());
}

#[test]
fn tuning_defaults() {
    assert!((scaling_factor(2000) - (2000f64.ln() / 2000.0).sqrt()).abs() < 1e-16);
    for (n, j) in [(500, 2), (2000, 3), (8000, 4), (32000, 5)] {
        assert_eq!(default_max_level(n, matched_node_count), j, "n={n}");
    }
    // Clamp: 16 + 64 coefficients exceed 50 observations.
    assert_eq!(default_max_level(50, matched_node_count), 0);
    let c = EstimatorConfig::new(8000, 4, 1.5, UNIFORM).unwrap();
    assert!((c.kappa - 1.5 * 0.107f64.sqrt() * UNIFORM).abs() < 1e-16);
    assert_eq!(c.threshold(), c.kappa * c.c_n);
}

#[test]
fn coefficient_variance_matches_norm() {
    let f = frame(3);
    let n = 8000;
    let sample = sample_uniform(n, 11, 0).unwrap();
    let pyr = empirical_coefficients(&sample, 3, &f).unwrap();
    let z2: Vec<f64> = pyr
        .level(3)
        .iter()
        .enumerate()
        .map(|(node, b)| b * b * 4.0 * PI * n as f64 / f.l2_norm_squared(&f.atom(3, node)))
        .collect();
    let m = z2.len() as f64;
    let mean = z2.iter().sum::<f64>() / m;
    // z_η are nearly Gaussian with correlations ρ, so Var(mean z²) = 2 Σ ρ² / m².
    let atoms: Vec<_> = (0..z2.len()).map(|i| f.atom(3, i)).collect();
    let mut sum_rho2 = 0.0;
    for a in &atoms {
        let va = f.coefficient_covariance(a, a).unwrap();
        for b in &atoms {
            let rho = f.coefficient_covariance(a, b).unwrap()
                / (va * f.coefficient_covariance(b, b).unwrap()).sqrt();
            sum_rho2 += rho * rho;
        }
    }
    let se = (2.0 * sum_rho2).sqrt() / m;
    assert!((mean - 1.0).abs() < 3.0 * se, "{mean} ± {se}");
}

#[test]
fn coefficients_are_unbiased() {
    let f = frame(3);
    let mut rng = test_rng(40);
    let spots: Vec<(u32, usize)> = (0..20)
        .map(|_| {
            let j = rng.gen_range(0..=3);
            (j, rng.gen_range(0..f.rule(j).len()))
        })
        .collect();
    let reps = 200;
    let draws: Vec<Vec<f64>> = (0..reps)
        .map(|r| {
            let s = sample_uniform(500, 41, r).unwrap();
            let pyr = empirical_coefficients(&s, 3, &f).unwrap();
            spots.iter().map(|&(j, i)| pyr.level(j)[i]).collect()
        })
        .collect();
    for (k, (j, i)) in spots.iter().enumerate() {
        let v: Vec<f64> = draws.iter().map(|d| d[k]).collect();
        let mean = v.iter().sum::<f64>() / reps as f64;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0)).sqrt();
        assert!(mean.abs() <= 4.0 * sd / (reps as f64).sqrt(), "j={j} η={i}: {mean} sd {sd}");
    }
}

#[test]
fn threshold_extremes() {
    let f = frame(2);
    let s = sample_uniform(300, 3, 0).unwrap();
    let pyr = empirical_coefficients(&s, 2, &f).unwrap();
    let keep_all = hard_threshold(&pyr, 0.0);
    assert_eq!(keep_all.pyramid, pyr);
    let max = pyr.levels().iter().flatten().fold(0.0f64, |m, b| m.max(b.abs()));
    let none = hard_threshold(&pyr, max * 1.000001);
    assert!(none.survivors.iter().all(|&c| c == 0));
    assert_eq!(none.pyramid.constant(), UNIFORM);
    let x = random_unit(&mut test_rng(42));
    let config = EstimatorConfig::new(300, 2, 1e6, 1.0).unwrap();
    let fit = estimate_density(&s, &config, &f).unwrap();
    assert_eq!(fit.eval(&f, &x).unwrap(), UNIFORM);
    let metrics = error_metrics(&fit, &f, |_| UNIFORM, &[1.0, 2.0], &[x], &build_rule(3).unwrap(), true).unwrap();
    assert_eq!(metrics.linf, 0.0);
    assert_eq!(metrics.lp_norm(2.0), Some(0.0));
    assert_eq!(metrics.l2_proxy, Some(0.0));
}

#[test]
fn ties_are_kept() {
    let f = frame(1);
    let s = sample_uniform(50, 5, 0).unwrap();
    let pyr = empirical_coefficients(&s, 1, &f).unwrap();
    let b = pyr.level(1)[3].abs();
    let t = hard_threshold(&pyr, b);
    assert_eq!(t.pyramid.level(1)[3], pyr.level(1)[3]);
}

#[test]
fn uniform_study_at_2000() {
    let f = frame(3);
    let s = sample_uniform(2000, 1, 0).unwrap();
    let config = EstimatorConfig::new(2000, 3, 2.0, UNIFORM).unwrap();
    let fit = estimate_density(&s, &config, &f).unwrap();
    for j in 1..=3 {
        let frac = fit.survivors()[j] as f64 / f.rule(j as u32).len() as f64;
        assert!((0.02..=0.25).contains(&frac), "j={j}: {frac}");
    }
    let proxy = fit.coefficient_l2();
    assert!((0.04..=0.2).contains(&proxy), "{proxy}");
}

#[test]
fn pilot_bound_is_sane() {
    let f = frame(3);
    let s = sample_uniform(2000, 2, 0).unwrap();
    let grid: Vec<UnitVector3> = build_rule(2).unwrap().nodes().to_vec();
    let m = pilot_bound(&s, 3, &f, &grid).unwrap();
    assert!((2.0 * UNIFORM..6.0 * UNIFORM).contains(&m), "{m}");
}

#[test]
fn independent_of_worker_count() {
    let f = frame(3);
    let s = sample_uniform(1500, 7, 0).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| empirical_coefficients(&s, 3, &f).unwrap())
    };
    let a = run(1);
    let b = run(4);
    for (x, y) in a.levels().iter().flatten().zip(b.levels().iter().flatten()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn metrics_record_keys() {
    let f = frame(2);
    let s = sample_uniform(400, 9, 0).unwrap();
    let config = EstimatorConfig::new(400, 2, 1.0, UNIFORM).unwrap();
    let fit = estimate_density(&s, &config, &f).unwrap();
    let record = MetricsRecord::new(&fit, Some(9), None);
    let json = serde_json::to_value(&record).unwrap();
    for key in ["n", "J", "kappa", "k0", "seed", "survivors", "linf", "l2", "l2_proxy"] {
        assert!(json.get(key).is_some(), "{key}");
    }
}

fn arb_sample(max: usize) -> impl Strategy<Value = Vec<UnitVector3>> {
    prop::collection::vec((-1.0f64..1.0, 0.0f64..(2.0 * PI)), 1..max).prop_map(|v| {
        v.into_iter()
            .map(|(z, phi)| UnitVector3::from_angles(z.acos(), phi))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn zero_sum_for_any_sample(points in arb_sample(60)) {
        let f = frame(4);
        let pyr = empirical_coefficients(&Sample::new(points).unwrap(), 4, &f).unwrap();
        for j in 0..=4 {
            prop_assert!(pyr.zero_sum(j, f.rule(j)).abs() <= 1e-9);
        }
    }

    #[test]
    fn thresholding_is_idempotent(points in arb_sample(80), t in 0.0f64..0.05) {
        let f = frame(2);
        let pyr = empirical_coefficients(&Sample::new(points).unwrap(), 2, &f).unwrap();
        let once = hard_threshold(&pyr, t);
        let twice = hard_threshold(&once.pyramid, t);
        prop_assert_eq!(&once.pyramid, &twice.pyramid);
        prop_assert_eq!(once.survivors, twice.survivors);
    }

    #[test]
    fn survivors_monotone_in_k0(points in arb_sample(200)) {
        let f = frame(2);
        let s = Sample::new(points).unwrap();
        let counts: Vec<Vec<usize>> = [1.0, 1.5, 2.0]
            .iter()
            .map(|&k0| {
                let c = EstimatorConfig::new(s.len(), 2, k0, UNIFORM).unwrap();
                estimate_density(&s, &c, &f).unwrap().survivors().to_vec()
            })
            .collect();
        for w in counts.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                prop_assert!(b <= a);
            }
        }
    }

    #[test]
    fn estimate_has_unit_mass(points in arb_sample(100), k0 in 0.0f64..3.0) {
        let f = frame(2);
        let s = Sample::new(points).unwrap();
        let c = EstimatorConfig::new(s.len(), 2, k0, UNIFORM).unwrap();
        let fit = estimate_density(&s, &c, &f).unwrap();
        let rule = build_rule(3).unwrap();
        let values = fit.eval_many(&f, rule.nodes()).unwrap();
        prop_assert!((rule.integrate_values(&values).unwrap() - 1.0).abs() < 1e-9);
    }
}
