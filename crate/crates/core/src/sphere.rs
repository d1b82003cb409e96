//! Geometry of the unit sphere S² and the projector kernels `L_l`.
//!
//! For d = 2 the reproducing kernel of the degree-`l` harmonic subspace is
//! `L_l(t) = (2l+1)/(4π) · P_l(t)`, where `P_l` is the Legendre polynomial with
//! `P_l(1) = 1`. With this scaling
//!
//! ```text
//! ∫_{-1}^{1} L_l(t) L_k(t) dt = (2l+1)/(8π²) δ_{lk}
//! ∫_{S²} L_l(<x,y>) L_k(<y,z>) dy = δ_{lk} L_l(<x,z>)
//! ```
//!
//! The general-dimension Gegenbauer normalization is not implemented.

use std::f64::consts::PI;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|v|² - 1` accepted by [`UnitVector3::new`].
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// Guard band outside `[-1, 1]` accepted (and clamped) by kernel evaluation.
pub const DOMAIN_GUARD: f64 = 1e-9;

pub const FOUR_PI: f64 = 4.0 * PI;

/// A point on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitVector3 {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVector3 {
    pub const E1: UnitVector3 = UnitVector3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const E2: UnitVector3 = UnitVector3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const E3: UnitVector3 = UnitVector3 { x: 0.0, y: 0.0, z: 1.0 };

    /// Checked constructor; the components must already be unit length.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let defect = x * x + y * y + z * z - 1.0;
        if !defect.is_finite() || defect.abs() > UNIT_TOLERANCE {
            return Err(Error::NotUnit { x, y, z, defect });
        }
        Ok(Self { x, y, z })
    }

    /// Projects an arbitrary nonzero vector onto the sphere.
    pub fn normalize(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cannot normalize ({x}, {y}, {z})"
            )));
        }
        Ok(Self {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    /// Point at colatitude `theta` and longitude `phi`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self {
            x: st * cp,
            y: st * sp,
            z: ct,
        }
    }

    /// Point with height `z = cos θ` and longitude `phi`.
    pub(crate) fn from_height(z: f64, phi: f64) -> Self {
        let s = (1.0 - z * z).max(0.0).sqrt();
        let (sp, cp) = phi.sin_cos();
        Self {
            x: s * cp,
            y: s * sp,
            z,
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &UnitVector3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Inner product clamped to `[-1, 1]`.
    pub fn cos_angle(&self, other: &UnitVector3) -> f64 {
        self.dot(other).clamp(-1.0, 1.0)
    }

    /// Squared chordal distance `|a - b|² = 2 - 2<a,b>`.
    pub fn chord_squared(&self, other: &UnitVector3) -> f64 {
        2.0 - 2.0 * self.dot(other)
    }
}

impl std::ops::Neg for UnitVector3 {
    type Output = Self;

    fn neg(self) -> Self {
        Self {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

/// Great-circle distance `arccos <a,b>` in `[0, π]`.
pub fn geodesic_distance(a: &UnitVector3, b: &UnitVector3) -> f64 {
    a.cos_angle(b).acos()
}

fn check_domain(t: f64) -> Result<f64> {
    if !(-1.0 - DOMAIN_GUARD..=1.0 + DOMAIN_GUARD).contains(&t) {
        return Err(Error::OutOfDomain {
            what: "legendre kernel",
            value: t,
            lo: -1.0,
            hi: 1.0,
        });
    }
    Ok(t.clamp(-1.0, 1.0))
}

/// Classical Legendre polynomial `P_l(t)` by upward three-term recurrence.
pub fn legendre(l: usize, t: f64) -> f64 {
    let mut prev = 1.0;
    if l == 0 {
        return prev;
    }
    let mut cur = t;
    for k in 1..l {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * t * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// The normalized projector kernel `L_l(t) = (2l+1)/(4π) P_l(t)`.
pub fn legendre_kernel(l: usize, t: f64) -> Result<f64> {
    let t = check_domain(t)?;
    Ok(kernel_scale(l) * legendre(l, t))
}

/// `L_l(1) = (2l+1)/(4π)`.
pub fn kernel_scale(l: usize) -> f64 {
    (2 * l + 1) as f64 / FOUR_PI
}

/// `Σ_l weights[l] · L_l(t)`, summed in ascending `l`.
pub fn projector_kernel_sum(weights: &[f64], t: f64) -> Result<f64> {
    let t = check_domain(t)?;
    let coeffs: Vec<f64> = weights
        .iter()
        .enumerate()
        .map(|(l, w)| w * kernel_scale(l))
        .collect();
    Ok(legendre_series(&coeffs, t))
}

/// Evaluates `Σ_l coeffs[l] · P_l(t)` with the upward recurrence.
pub fn legendre_series(coeffs: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    let mut prev = 1.0;
    let mut cur = t;
    for (l, &c) in coeffs.iter().enumerate() {
        let p = match l {
            0 => prev,
            1 => cur,
            _ => {
                let k = (l - 1) as f64;
                let next = ((2.0 * k + 1.0) * t * cur - k * prev) / (k + 1.0);
                prev = cur;
                cur = next;
                cur
            }
        };
        acc += c * p;
    }
    acc
}

/// Table of `L_0(t), …, L_max(t)` at one argument `t`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    t: f64,
    values: Vec<f64>,
}

impl KernelTable {
    pub fn new(max_degree: usize, t: f64) -> Result<Self> {
        let t = check_domain(t)?;
        let mut values = Vec::with_capacity(max_degree + 1);
        let mut prev = 1.0;
        let mut cur = t;
        for l in 0..=max_degree {
            let p = match l {
                0 => 1.0,
                1 => t,
                _ => {
                    let k = (l - 1) as f64;
                    let next = ((2.0 * k + 1.0) * t * cur - k * prev) / (k + 1.0);
                    prev = cur;
                    cur = next;
                    cur
                }
            };
            values.push(kernel_scale(l) * p);
        }
        Ok(Self { t, values })
    }

    pub fn max_degree(&self) -> usize {
        self.values.len() - 1
    }

    pub fn argument(&self) -> f64 {
        self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Index<usize> for KernelTable {
    type Output = f64;

    fn index(&self, l: usize) -> &f64 {
        &self.values[l]
    }
}

/// Coefficients of a fixed Legendre series, evaluated many times.
///
/// `eval_many` runs the recurrence over a block of arguments at once so the
/// inner loop vectorizes; results are bit-identical to `eval`.
#[derive(Debug, Clone)]
pub struct LegendreSeries {
    coeffs: Vec<f64>,
    // recurrence factors (2k+1)/(k+1) and k/(k+1)
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

const BLOCK: usize = 16;

impl LegendreSeries {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let n = coeffs.len();
        let mut alpha = Vec::with_capacity(n);
        let mut beta = Vec::with_capacity(n);
        for k in 0..n {
            let kf = k as f64;
            alpha.push((2.0 * kf + 1.0) / (kf + 1.0));
            beta.push(kf / (kf + 1.0));
        }
        Self {
            coeffs,
            alpha,
            beta,
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let c = &self.coeffs;
        match c.len() {
            0 => return 0.0,
            1 => return c[0],
            _ => {}
        }
        let mut acc = c[0] + c[1] * t;
        let mut prev = 1.0;
        let mut cur = t;
        for k in 1..c.len() - 1 {
            let next = self.alpha[k] * t * cur - self.beta[k] * prev;
            prev = cur;
            cur = next;
            acc += c[k + 1] * cur;
        }
        acc
    }

    /// Overwrites each `ts[i]` with the series value at `ts[i]`.
    pub fn eval_many(&self, ts: &mut [f64]) {
        let mut chunks = ts.chunks_exact_mut(BLOCK);
        for chunk in &mut chunks {
            let block: &mut [f64; BLOCK] = chunk.try_into().expect("block size");
            self.eval_block(block);
        }
        for t in chunks.into_remainder() {
            *t = self.eval(*t);
        }
    }

    fn eval_block(&self, ts: &mut [f64; BLOCK]) {
        let c = &self.coeffs;
        if c.len() < 2 {
            let v = c.first().copied().unwrap_or(0.0);
            ts.iter_mut().for_each(|t| *t = v);
            return;
        }
        let t = *ts;
        let mut acc = [0.0; BLOCK];
        let mut prev = [1.0; BLOCK];
        let mut cur = t;
        for i in 0..BLOCK {
            acc[i] = c[0] + c[1] * t[i];
        }
        for k in 1..c.len() - 1 {
            let (a, b, ck) = (self.alpha[k], self.beta[k], c[k + 1]);
            for i in 0..BLOCK {
                let next = a * t[i] * cur[i] - b * prev[i];
                prev[i] = cur[i];
                cur[i] = next;
                acc[i] += ck * next;
            }
        }
        *ts = acc;
    }
}
