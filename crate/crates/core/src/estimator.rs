//! Hard-thresholding needlet density estimator.
//!
//! Given `X_1, …, X_n` i.i.d. on S²,
//!
//! ```text
//! β̂_{jη} = (1/n) Σ_i ψ_{jη}(X_i)
//! f̂      = 1/(4π) + Σ_{j≤J} Σ_η β̂_{jη} ψ_{jη} 1{|β̂_{jη}| ≥ κ c_n}
//! ```
//!
//! with `c_n = √(log n / n)` and, by default, `κ = k0 √0.107 M` where `M`
//! bounds `‖f‖_∞`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubature::{CubatureRule, RuleSet};
use crate::error::{Error, Result};
use crate::frame::{CoefficientKind, CoefficientPyramid, NeedletFrame};
use crate::sphere::{UnitVector3, FOUR_PI};

/// The localization constant `I` of the window, rounded as used for κ.
pub const LOCALIZATION_CONSTANT: f64 = 0.107;

/// Where a sample came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: String,
    pub seed: u64,
    pub replicate: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    points: Vec<UnitVector3>,
    provenance: Option<Provenance>,
}

impl Sample {
    pub fn new(points: Vec<UnitVector3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        Ok(Self {
            points,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn points(&self) -> &[UnitVector3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }
}

/// `c_n = √(log n / n)`.
pub fn scaling_factor(n: usize) -> f64 {
    let nf = n as f64;
    (nf.ln() / nf).sqrt()
}

/// Largest `J` with `2^J ≤ (n / log n)^{1/2}`, lowered until the number of
/// coefficients in levels `0..=J` does not exceed `n`.
pub fn default_max_level(n: usize, rules_count: impl Fn(u32) -> usize) -> u32 {
    if n < 3 {
        return 0;
    }
    let nf = n as f64;
    let mut j = (0.5 * (nf / nf.ln()).log2()).floor().max(0.0) as u32;
    while j > 0 && (0..=j).map(&rules_count).sum::<usize>() > n {
        j -= 1;
    }
    j
}

/// Tuning of the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub n: usize,
    pub max_level: u32,
    pub kappa: f64,
    pub c_n: f64,
    pub bound: f64,
    pub k0: f64,
}

impl EstimatorConfig {
    /// `κ = k0 √0.107 M`, `c_n = √(log n / n)`.
    pub fn new(n: usize, max_level: u32, k0: f64, bound: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySample);
        }
        if !(k0 >= 0.0 && k0.is_finite()) {
            return Err(Error::InvalidParameter(format!("k0 = {k0}")));
        }
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::InvalidParameter(format!("density bound M = {bound}")));
        }
        Ok(Self {
            n,
            max_level,
            kappa: k0 * LOCALIZATION_CONSTANT.sqrt() * bound,
            c_n: scaling_factor(n),
            bound,
            k0,
        })
    }

    /// Same as [`new`](Self::new) with `J` from [`default_max_level`].
    pub fn with_default_level(n: usize, k0: f64, bound: f64, rules: &RuleSet) -> Result<Self> {
        let j = default_max_level(n, |j| {
            crate::cubature::build_rule_with(j, rules.scheme()).map_or(usize::MAX, |r| r.len())
        });
        Self::new(n, j, k0, bound)
    }

    /// `κ c_n`.
    pub fn threshold(&self) -> f64 {
        self.kappa * self.c_n
    }
}

/// `β̂_{jη} = (1/n) Σ_i ψ_{jη}(X_i)` for `j ≤ max_level`.
///
/// Each coefficient sums the sample in order, so results do not depend on
/// how the nodes are split across workers.
pub fn empirical_coefficients(
    sample: &Sample,
    max_level: u32,
    frame: &NeedletFrame,
) -> Result<CoefficientPyramid> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if max_level > frame.max_level() {
        return Err(Error::InvalidParameter(format!(
            "J = {max_level} beyond frame maximum {}",
            frame.max_level()
        )));
    }
    let n = sample.len() as f64;
    let points = sample.points();
    let levels = (0..=max_level)
        .map(|j| {
            let rule = frame.rule(j);
            let kernel = frame.kernel(j);
            rule.nodes()
                .par_iter()
                .zip(rule.weights().par_iter())
                .map_init(Vec::new, |ts, (eta, lambda)| {
                    ts.clear();
                    ts.extend(points.iter().map(|x| eta.cos_angle(x)));
                    kernel.eval_many(ts);
                    lambda.sqrt() * ts.iter().sum::<f64>() / n
                })
                .collect()
        })
        .collect();
    CoefficientPyramid::new(CoefficientKind::Empirical, 1.0 / FOUR_PI, levels)
}

/// A thresholded pyramid and the number of survivors per level.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholded {
    pub pyramid: CoefficientPyramid,
    pub survivors: Vec<usize>,
    pub threshold: f64,
}

/// Keeps `β̂` iff `|β̂| ≥ threshold`; the constant term is untouched.
pub fn hard_threshold(pyramid: &CoefficientPyramid, threshold: f64) -> Thresholded {
    let mut survivors = Vec::with_capacity(pyramid.levels().len());
    let levels = pyramid
        .levels()
        .iter()
        .map(|level| {
            survivors.push(level.iter().filter(|b| b.abs() >= threshold).count());
            level
                .iter()
                .map(|&b| if b.abs() >= threshold { b } else { 0.0 })
                .collect()
        })
        .collect();
    Thresholded {
        pyramid: CoefficientPyramid::new(pyramid.kind(), pyramid.constant(), levels)
            .expect("same shape as input"),
        survivors,
        threshold,
    }
}

/// The fitted estimator `f̂`.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    pub config: EstimatorConfig,
    pub empirical: CoefficientPyramid,
    pub thresholded: Thresholded,
}

impl DensityEstimate {
    pub fn pyramid(&self) -> &CoefficientPyramid {
        &self.thresholded.pyramid
    }

    pub fn survivors(&self) -> &[usize] {
        &self.thresholded.survivors
    }

    pub fn eval(&self, frame: &NeedletFrame, x: &UnitVector3) -> Result<f64> {
        frame.synthesize(self.pyramid(), x)
    }

    pub fn eval_many(&self, frame: &NeedletFrame, points: &[UnitVector3]) -> Result<Vec<f64>> {
        frame.synthesize_many(self.pyramid(), points)
    }

    /// `√(Σ surviving β̂²)`, an `L²` error proxy when the truth is uniform.
    pub fn coefficient_l2(&self) -> f64 {
        self.pyramid()
            .levels()
            .iter()
            .flatten()
            .map(|b| b * b)
            .sum::<f64>()
            .sqrt()
    }
}

/// Empirical coefficients followed by hard thresholding at `κ c_n`.
pub fn estimate_density(
    sample: &Sample,
    config: &EstimatorConfig,
    frame: &NeedletFrame,
) -> Result<DensityEstimate> {
    let empirical = empirical_coefficients(sample, config.max_level, frame)?;
    let thresholded = hard_threshold(&empirical, config.threshold());
    Ok(DensityEstimate {
        config: *config,
        empirical,
        thresholded,
    })
}

/// Default `M`: twice the sup of a pilot estimate (`k0 = 1`, `M = 1/(4π)`)
/// over `grid`, and never below `1/(4π)`.
pub fn pilot_bound(
    sample: &Sample,
    max_level: u32,
    frame: &NeedletFrame,
    grid: &[UnitVector3],
) -> Result<f64> {
    let pilot = EstimatorConfig::new(sample.len(), max_level, 1.0, 1.0 / FOUR_PI)?;
    let fit = estimate_density(sample, &pilot, frame)?;
    let sup = fit
        .eval_many(frame, grid)?
        .into_iter()
        .fold(1.0 / FOUR_PI, f64::max);
    Ok(2.0 * sup)
}

/// Error of `f̂` against a known density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub linf: f64,
    /// `(p, ‖f̂ − f‖_p)` for each requested finite `p`.
    pub lp: Vec<(f64, f64)>,
    pub l2_proxy: Option<f64>,
}

impl ErrorMetrics {
    pub fn lp_norm(&self, p: f64) -> Option<f64> {
        self.lp.iter().find(|(q, _)| *q == p).map(|(_, v)| *v)
    }
}

/// Sup error over `grid`; `L^p` errors by cubature with `rule`.
///
/// `truth_is_uniform` adds the coefficient-space proxy `√(Σ β̂²)`.
pub fn error_metrics(
    estimate: &DensityEstimate,
    frame: &NeedletFrame,
    truth: impl Fn(&UnitVector3) -> f64 + Sync,
    p_list: &[f64],
    grid: &[UnitVector3],
    rule: &CubatureRule,
    truth_is_uniform: bool,
) -> Result<ErrorMetrics> {
    let on_grid = estimate.eval_many(frame, grid)?;
    let linf = on_grid
        .par_iter()
        .zip(grid.par_iter())
        .map(|(v, x)| (v - truth(x)).abs())
        .reduce(|| 0.0, f64::max);
    let lp = if p_list.is_empty() {
        Vec::new()
    } else {
        let on_nodes = estimate.eval_many(frame, rule.nodes())?;
        let diff: Vec<f64> = on_nodes
            .par_iter()
            .zip(rule.nodes().par_iter())
            .map(|(v, x)| (v - truth(x)).abs())
            .collect();
        p_list
            .iter()
            .map(|&p| {
                if !(p >= 1.0 && p.is_finite()) {
                    return Err(Error::InvalidParameter(format!("L^p exponent {p}")));
                }
                let powered: Vec<f64> = diff.iter().map(|d| d.powf(p)).collect();
                Ok((p, rule.integrate_values(&powered)?.powf(1.0 / p)))
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(ErrorMetrics {
        linf,
        lp,
        l2_proxy: truth_is_uniform.then(|| estimate.coefficient_l2()),
    })
}

/// Flat JSON record of one estimation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub n: usize,
    #[serde(rename = "J")]
    pub max_level: u32,
    pub kappa: f64,
    pub k0: f64,
    pub seed: Option<u64>,
    pub survivors: Vec<usize>,
    pub linf: Option<f64>,
    pub l2: Option<f64>,
    pub l2_proxy: Option<f64>,
}

impl MetricsRecord {
    pub fn new(estimate: &DensityEstimate, seed: Option<u64>, metrics: Option<&ErrorMetrics>) -> Self {
        Self {
            n: estimate.config.n,
            max_level: estimate.config.max_level,
            kappa: estimate.config.kappa,
            k0: estimate.config.k0,
            seed,
            survivors: estimate.survivors().to_vec(),
            linf: metrics.map(|m| m.linf),
            l2: metrics.and_then(|m| m.lp_norm(2.0)),
            l2_proxy: metrics.and_then(|m| m.l2_proxy),
        }
    }
}
