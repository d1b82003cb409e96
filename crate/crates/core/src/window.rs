//! The Littlewood–Paley window pair `(φ, b)`.
//!
//! `φ` equals 1 on `[0, 1/2]`, 0 beyond 1, and on `[1/2, 1]` descends along the
//! normalized primitive of the bump `x ↦ exp(-1/(1-x²))`, mapped affinely from
//! `[-1, 1]` onto `[1/2, 1]`. Then `b(ξ)² = φ(ξ/2) − φ(ξ)`, so that
//! `Σ_{j≥0} b²(ξ/2^j) = 1` for `|ξ| ≥ 1` by telescoping.

use crate::error::{Error, Result};
use crate::gauss::{composite_gauss, gauss_legendre};

pub const DEFAULT_RESOLUTION: usize = 4096;

/// Gauss order used per table cell when accumulating the bump primitive.
const CELL_ORDER: usize = 10;

fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

/// Smooth cutoff `φ` and its companion `b`, tabulated once and immutable.
#[derive(Debug, Clone)]
pub struct WindowFunction {
    resolution: usize,
    // normalized primitive G(t_k) and slope G'(t_k) on the uniform grid over [-1, 1]
    primitive: Vec<f64>,
    slope: Vec<f64>,
}

impl Default for WindowFunction {
    fn default() -> Self {
        Self::new(DEFAULT_RESOLUTION).expect("default resolution is valid")
    }
}

impl WindowFunction {
    /// Builds the window with `resolution` table cells (and internal quadrature panels).
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution < 16 {
            return Err(Error::InvalidParameter(format!(
                "window resolution {resolution} < 16"
            )));
        }
        let h = 2.0 / resolution as f64;
        let (gx, gw) = gauss_legendre(CELL_ORDER);
        let mut primitive = Vec::with_capacity(resolution + 1);
        let mut acc = 0.0;
        primitive.push(0.0);
        for k in 0..resolution {
            let lo = -1.0 + k as f64 * h;
            let cell: f64 = gx
                .iter()
                .zip(&gw)
                .map(|(x, w)| 0.5 * h * w * bump(lo + 0.5 * h * (x + 1.0)))
                .sum();
            acc += cell;
            primitive.push(acc);
        }
        let total = acc;
        primitive.iter_mut().for_each(|p| *p /= total);
        *primitive.last_mut().expect("nonempty") = 1.0;

        let mut slope: Vec<f64> = (0..=resolution)
            .map(|k| bump(-1.0 + k as f64 * h) / total)
            .collect();
        limit_slopes(&primitive, &mut slope, h);

        Ok(Self {
            resolution,
            primitive,
            slope,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Normalized primitive on `[-1, 1]`, monotone cubic Hermite interpolation.
    fn rising(&self, t: f64) -> f64 {
        if t <= -1.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        let h = 2.0 / self.resolution as f64;
        let pos = (t + 1.0) / h;
        let k = (pos.floor() as usize).min(self.resolution - 1);
        let s = pos - k as f64;
        let (y0, y1) = (self.primitive[k], self.primitive[k + 1]);
        let (m0, m1) = (self.slope[k] * h, self.slope[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        (h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1).clamp(y0, y1)
    }

    /// The cutoff `φ`.
    pub fn phi(&self, xi: f64) -> f64 {
        let a = xi.abs();
        if a <= 0.5 {
            1.0
        } else if a >= 1.0 {
            0.0
        } else {
            1.0 - self.rising(4.0 * a - 3.0)
        }
    }

    /// `b²(ξ) = max(φ(ξ/2) − φ(ξ), 0)`.
    pub fn b_squared(&self, xi: f64) -> f64 {
        (self.phi(0.5 * xi) - self.phi(xi)).max(0.0)
    }

    pub fn b(&self, xi: f64) -> f64 {
        self.b_squared(xi).sqrt()
    }

    /// `|Σ_{j=0}^{j_max} b²(ξ/2^j) − 1|` for `ξ ≥ 1`.
    pub fn partition_of_unity_defect(&self, xi: f64, j_max: u32) -> Result<f64> {
        if !(xi >= 1.0) {
            return Err(Error::OutOfDomain {
                what: "partition of unity",
                value: xi,
                lo: 1.0,
                hi: f64::INFINITY,
            });
        }
        if 2f64.powi(j_max as i32) < 2.0 * xi {
            return Err(Error::InvalidParameter(format!(
                "j_max = {j_max} too small for xi = {xi}"
            )));
        }
        let sum: f64 = (0..=j_max)
            .map(|j| self.b_squared(xi / 2f64.powi(j as i32)))
            .sum();
        Ok((sum - 1.0).abs())
    }

    /// `I = (1/8) ∫_{1/2}^{2} t b²(t) dt`.
    pub fn localization_integral(&self) -> f64 {
        localization_integral_of(|t| self.b_squared(t), self.resolution)
    }

    /// Samples `(ξ, φ(ξ), b(ξ))` on `count` equispaced points of `[0, xi_max]`.
    pub fn profile(&self, xi_max: f64, count: usize) -> Vec<(f64, f64, f64)> {
        let step = if count > 1 {
            xi_max / (count - 1) as f64
        } else {
            0.0
        };
        (0..count)
            .map(|i| {
                let xi = i as f64 * step;
                (xi, self.phi(xi), self.b(xi))
            })
            .collect()
    }
}

/// `(1/8) ∫_{1/2}^{2} t · b_sq(t) dt` by composite Gauss quadrature.
///
/// The interval is split at 1 where the window's two branches meet.
pub fn localization_integral_of(b_sq: impl Fn(f64) -> f64, resolution: usize) -> f64 {
    let panels = (resolution / 8).max(4);
    let mut total = 0.0;
    for (a, b) in [(0.5, 1.0), (1.0, 2.0)] {
        let (x, w) = composite_gauss(a, b, panels, 8);
        total += x.iter().zip(&w).map(|(t, wi)| wi * t * b_sq(*t)).sum::<f64>();
    }
    total / 8.0
}

/// Fritsch–Carlson limiter: keeps the Hermite interpolant monotone.
fn limit_slopes(y: &[f64], m: &mut [f64], h: f64) {
    for k in 0..y.len() - 1 {
        let delta = (y[k + 1] - y[k]) / h;
        if delta <= 0.0 {
            m[k] = 0.0;
            m[k + 1] = 0.0;
            continue;
        }
        let a = m[k] / delta;
        let b = m[k + 1] / delta;
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            m[k] = tau * a * delta;
            m[k + 1] = tau * b * delta;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window() -> WindowFunction {
        WindowFunction::default()
    }

    #[test]
    fn plateau_and_support() {
        let w = window();
        assert_eq!(w.phi(0.3), 1.0);
        assert_eq!(w.phi(-0.3), 1.0);
        assert_eq!(w.phi(1.2), 0.0);
        assert_eq!(w.b(0.4), 0.0);
        assert_eq!(w.b(2.5), 0.0);
        assert!((w.b(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_bridge_midpoint() {
        let w = window();
        assert!((w.phi(0.75) - 0.5).abs() < 1e-12);
        assert!((w.b(0.75) - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((w.b(1.5) - 0.5f64.sqrt()).abs() < 1e-12);
    }

    // Reference values of b to seven decimals.
    #[test]
    fn matches_reference_values() {
        let w = window();
        for (xi, b) in [
            (0.51, 0.0001345),
            (0.6, 0.2634459),
            (0.7, 0.5801056),
            (0.9, 0.9646742),
            (1.25, 0.9365002),
            (1.8, 0.2634459),
            (1.98, 0.0001345),
        ] {
            assert!((w.b(xi) - b).abs() < 6e-8, "xi={xi}: {} vs {b}", w.b(xi));
        }
    }

    // b(1.99)² = G(−0.98) ≈ 1.80475e-14, from adaptive quadrature of the bump.
    #[test]
    fn far_tail_relative_accuracy() {
        let b = window().b(1.99);
        assert!((b / 1.3434046e-7 - 1.0).abs() < 5e-3, "{b}");
    }

    #[test]
    fn partition_of_unity_examples() {
        let w = window();
        for xi in [1.0, 3.7, 100.0] {
            assert!(w.partition_of_unity_defect(xi, 10).unwrap() < 1e-12);
        }
        assert!(w.partition_of_unity_defect(0.99, 10).is_err());
        assert!(w.partition_of_unity_defect(600.0, 10).is_err());
    }

    #[test]
    fn flat_b_squared_integral() {
        let i = localization_integral_of(|t| if (0.5..=2.0).contains(&t) { 1.0 } else { 0.0 }, 4096);
        assert!((i - 15.0 / 64.0).abs() < 1e-14);
    }

    #[test]
    fn localization_integral_value() {
        let i = window().localization_integral();
        assert!((i - 0.107).abs() < 0.003, "I = {i}");
    }

    #[test]
    fn localization_integral_resolution_stable() {
        let a = WindowFunction::new(4096).unwrap().localization_integral();
        let b = WindowFunction::new(8192).unwrap().localization_integral();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn rejects_tiny_resolution() {
        assert!(WindowFunction::new(4).is_err());
    }
}
