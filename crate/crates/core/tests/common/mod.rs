//! Test-local oracles, written independently of the library code paths.
#![allow(dead_code)]

use std::f64::consts::PI;

use needlet::UnitVector3;
use rand::Rng;

/// Clenshaw–Curtis rule on [−1, 1] with `n + 1` nodes (`n` even), exact to degree `n`.
pub fn clenshaw_curtis(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n.is_multiple_of(2));
    let mut nodes = Vec::with_capacity(n + 1);
    let mut weights = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let theta = k as f64 * PI / n as f64;
        nodes.push(theta.cos());
        let mut s = 1.0;
        for j in 1..=n / 2 {
            let b = if j == n / 2 { 1.0 } else { 2.0 };
            s -= b / (4.0 * (j * j) as f64 - 1.0) * (2.0 * j as f64 * theta).cos();
        }
        let c = if k == 0 || k == n { 1.0 } else { 2.0 };
        weights.push(c * s / n as f64);
    }
    (nodes, weights)
}

/// `P_l(t)` by Bonnet's recurrence.
pub fn legendre_p(l: usize, t: f64) -> f64 {
    let (mut a, mut b) = (1.0, t);
    if l == 0 {
        return a;
    }
    for k in 1..l {
        let k = k as f64;
        let c = ((2.0 * k + 1.0) * t * b - k * a) / (k + 1.0);
        a = b;
        b = c;
    }
    b
}

pub fn kernel(l: usize, t: f64) -> f64 {
    (2 * l + 1) as f64 / (4.0 * PI) * legendre_p(l, t)
}

pub fn random_unit(rng: &mut impl Rng) -> UnitVector3 {
    loop {
        let v: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        if r2 > 1e-4 && r2 <= 1.0 {
            return UnitVector3::normalize(v[0], v[1], v[2]).unwrap();
        }
    }
}

pub fn test_rng(tag: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_0000 + tag)
}
