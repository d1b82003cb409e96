//! Needlet frame on S²: atoms `ψ_{jη}`, analysis, synthesis and Besov norms.
//!
//! ```text
//! ψ_{jη}(x) = √λ_η Σ_{2^{j-1} < l < 2^{j+1}} b(l/2^j) L_l(<x,η>)
//! f = L_0 f + Σ_j Σ_{η ∈ Z_j} <f, ψ_{jη}> ψ_{jη}
//! ```
//!
//! `Z_j` is the node set of the level-`j` cubature rule and `λ_η` its weights.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubature::{build_rule, required_degree, CubatureRule, RuleScheme, RuleSet};
use crate::error::{Error, Result};
use crate::sphere::{kernel_scale, LegendreSeries, UnitVector3, FOUR_PI};
use crate::window::WindowFunction;

/// Level used for analysis when the input is not known to be band-limited.
pub const FALLBACK_ANALYSIS_LEVEL: u32 = 8;

/// Highest degree `l` with `b(l/2^j) ≠ 0` is `2^{j+1} − 1`.
pub fn band_limit(level: u32) -> usize {
    (1usize << (level + 1)) - 1
}

/// One frame element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeedletAtom {
    pub level: u32,
    /// Index into `Z_j`; `None` for a free-standing atom with a chosen weight.
    pub node: Option<usize>,
    pub center: UnitVector3,
    pub weight: f64,
}

impl NeedletAtom {
    /// An atom centred at `center` with cubature weight `weight`, detached from
    /// any rule. Used for diagnostics that fix `λ` explicitly.
    pub fn detached(level: u32, center: UnitVector3, weight: f64) -> Self {
        Self {
            level,
            node: None,
            center,
            weight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientKind {
    Exact,
    Empirical,
}

impl fmt::Display for CoefficientKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoefficientKind::Exact => "exact",
            CoefficientKind::Empirical => "empirical",
        })
    }
}

/// Needlet coefficients for levels `0..=J` plus the constant term.
///
/// Level vectors are aligned with the node order of the level rules.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPyramid {
    kind: CoefficientKind,
    constant: f64,
    levels: Vec<Vec<f64>>,
}

impl CoefficientPyramid {
    pub fn new(kind: CoefficientKind, constant: f64, levels: Vec<Vec<f64>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidParameter("pyramid needs at least one level".into()));
        }
        Ok(Self {
            kind,
            constant,
            levels,
        })
    }

    /// All-zero pyramid shaped like `rules` up to `max_level`.
    pub fn zeros(kind: CoefficientKind, constant: f64, rules: &RuleSet, max_level: u32) -> Self {
        let levels = (0..=max_level)
            .map(|j| vec![0.0; rules.level(j).map_or(0, CubatureRule::len)])
            .collect();
        Self {
            kind,
            constant,
            levels,
        }
    }

    pub fn kind(&self) -> CoefficientKind {
        self.kind
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn max_level(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn level(&self, j: u32) -> &[f64] {
        &self.levels[j as usize]
    }

    pub fn level_mut(&mut self, j: u32) -> &mut [f64] {
        &mut self.levels[j as usize]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn coefficient_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn nonzero_count(&self, j: u32) -> usize {
        self.level(j).iter().filter(|b| **b != 0.0).count()
    }

    /// Multiplies the β part by `a`; the constant term is left alone.
    pub fn scale_coefficients(&self, a: f64) -> Self {
        Self {
            kind: self.kind,
            constant: self.constant,
            levels: self
                .levels
                .iter()
                .map(|l| l.iter().map(|b| a * b).collect())
                .collect(),
        }
    }

    /// Checks that every level matches the node count of its rule.
    pub fn check_shape(&self, rules: &RuleSet) -> Result<()> {
        for (j, level) in self.levels.iter().enumerate() {
            let rule = rules.level(j as u32).ok_or_else(|| {
                Error::Validation(format!("no cubature rule for pyramid level {j}"))
            })?;
            if rule.len() != level.len() {
                return Err(Error::Validation(format!(
                    "level {j} has {} coefficients, rule has {} nodes",
                    level.len(),
                    rule.len()
                )));
            }
        }
        Ok(())
    }

    /// `Σ_η √λ_η β_{jη}`, which vanishes for every needlet expansion.
    pub fn zero_sum(&self, j: u32, rule: &CubatureRule) -> f64 {
        self.level(j)
            .iter()
            .zip(rule.weights())
            .map(|(b, w)| w.sqrt() * b)
            .sum()
    }
}

/// How `analyze` integrates `f · ψ_{jη}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalysisQuadrature {
    /// `f` is a spherical polynomial of at most this degree; each level uses
    /// the coarsest rule that makes the inner products exact.
    BandLimited(usize),
    /// Every level is integrated with the rule of this level.
    Fixed(u32),
}

impl Default for AnalysisQuadrature {
    fn default() -> Self {
        AnalysisQuadrature::Fixed(FALLBACK_ANALYSIS_LEVEL)
    }
}

impl AnalysisQuadrature {
    fn level_for(self, j: u32) -> u32 {
        match self {
            AnalysisQuadrature::BandLimited(degree) => {
                let needed = degree + band_limit(j);
                (0..).find(|&k| required_degree(k) >= needed).expect("finite degree")
            }
            AnalysisQuadrature::Fixed(k) => k,
        }
    }
}

/// Window, level rules and per-level kernels `M_j`, `Λ_j`.
#[derive(Debug, Clone)]
pub struct NeedletFrame {
    window: WindowFunction,
    rules: RuleSet,
    // M_j(t) = Σ b(l/2^j) L_l(t)
    kernels: Vec<LegendreSeries>,
    // Λ_j(t) = Σ b²(l/2^j) L_l(t)
    squared: Vec<LegendreSeries>,
}

impl NeedletFrame {
    pub fn new(window: WindowFunction, rules: RuleSet) -> Self {
        let (kernels, squared) = (0..=rules.max_level())
            .map(|j| {
                let scale = (1u64 << j) as f64;
                let top = band_limit(j);
                let b: Vec<f64> = (0..=top).map(|l| window.b(l as f64 / scale)).collect();
                let m = b.iter().enumerate().map(|(l, bl)| bl * kernel_scale(l)).collect();
                let s = b
                    .iter()
                    .enumerate()
                    .map(|(l, bl)| bl * bl * kernel_scale(l))
                    .collect();
                (LegendreSeries::new(m), LegendreSeries::new(s))
            })
            .unzip();
        Self {
            window,
            rules,
            kernels,
            squared,
        }
    }

    /// Default window and matched rules for levels `0..=max_level`.
    pub fn build(max_level: u32) -> Result<Self> {
        Ok(Self::new(
            WindowFunction::default(),
            RuleSet::build(max_level, RuleScheme::Matched)?,
        ))
    }

    pub fn window(&self) -> &WindowFunction {
        &self.window
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    pub fn max_level(&self) -> u32 {
        self.rules.max_level()
    }

    pub fn rule(&self, j: u32) -> &CubatureRule {
        self.rules.level(j).expect("level within frame")
    }

    /// `M_j` as a Legendre series in `t = <x, η>`.
    pub fn kernel(&self, j: u32) -> &LegendreSeries {
        &self.kernels[j as usize]
    }

    /// `Λ_j` as a Legendre series in `t = <x, η>`.
    pub fn squared_kernel(&self, j: u32) -> &LegendreSeries {
        &self.squared[j as usize]
    }

    fn check_level(&self, j: u32) -> Result<()> {
        if j > self.max_level() {
            return Err(Error::InvalidParameter(format!(
                "level {j} beyond frame maximum {}",
                self.max_level()
            )));
        }
        Ok(())
    }

    pub fn atom(&self, j: u32, node: usize) -> NeedletAtom {
        let rule = self.rule(j);
        NeedletAtom {
            level: j,
            node: Some(node),
            center: rule.nodes()[node],
            weight: rule.weights()[node],
        }
    }

    /// `ψ_{jη}(x)`.
    pub fn eval(&self, atom: &NeedletAtom, x: &UnitVector3) -> f64 {
        atom.weight.sqrt() * self.kernel(atom.level).eval(atom.center.cos_angle(x))
    }

    /// `‖ψ_{jη}‖² = λ_η Σ_l b²(l/2^j) L_l(1)`.
    pub fn l2_norm_squared(&self, atom: &NeedletAtom) -> f64 {
        atom.weight * self.squared_kernel(atom.level).eval(1.0)
    }

    /// `√(λ_ξ λ_η) Σ_l b²(l/2^j) L_l(<ξ,η>)`: the covariance of two
    /// single-observation coefficients under the uniform law, in the
    /// normalization where `dx` is the probability measure on S². With the
    /// area measure, `Cov(β̂_ξ, β̂_η)` for `n` draws is this value over `4πn`.
    pub fn coefficient_covariance(&self, a: &NeedletAtom, b: &NeedletAtom) -> Result<f64> {
        if a.level != b.level {
            return Err(Error::InvalidParameter(format!(
                "covariance across levels {} and {}",
                a.level, b.level
            )));
        }
        Ok((a.weight * b.weight).sqrt()
            * self.squared_kernel(a.level).eval(a.center.cos_angle(&b.center)))
    }

    /// `ψ_{jη}(x)` for every node `η` of level `j`, in node order.
    pub fn level_values(&self, j: u32, x: &UnitVector3) -> Vec<f64> {
        let rule = self.rule(j);
        let mut ts: Vec<f64> = rule.nodes().iter().map(|eta| eta.cos_angle(x)).collect();
        self.kernel(j).eval_many(&mut ts);
        ts.iter_mut()
            .zip(rule.weights())
            .for_each(|(v, w)| *v *= w.sqrt());
        ts
    }

    /// Exact coefficients `β_{jη} = <f, ψ_{jη}>` for `j ≤ max_level`.
    ///
    /// Inner products are cubature sums; see [`AnalysisQuadrature`] for when
    /// they are exact.
    pub fn analyze(
        &self,
        f: impl Fn(&UnitVector3) -> f64 + Sync,
        max_level: u32,
        quadrature: AnalysisQuadrature,
    ) -> Result<CoefficientPyramid> {
        self.check_level(max_level)?;
        let mut cache: Vec<(u32, CubatureRule, Vec<f64>)> = Vec::new();
        let mut levels = Vec::with_capacity(max_level as usize + 1);
        for j in 0..=max_level {
            let k = quadrature.level_for(j);
            if !cache.iter().any(|(level, _, _)| *level == k) {
                let rule = build_rule(k)?;
                let values = sample(&rule, &f)?;
                cache.push((k, rule, values));
            }
            let (_, rule, values) = cache.iter().find(|(level, _, _)| *level == k).expect("cached");
            let weighted: Vec<f64> = values.iter().zip(rule.weights()).map(|(v, w)| v * w).collect();
            let kernel = self.kernel(j);
            let centers = self.rule(j);
            let level: Vec<f64> = centers
                .nodes()
                .par_iter()
                .zip(centers.weights().par_iter())
                .map(|(eta, lambda)| {
                    let mut ts: Vec<f64> = rule.nodes().iter().map(|y| y.cos_angle(eta)).collect();
                    kernel.eval_many(&mut ts);
                    lambda.sqrt() * ts.iter().zip(&weighted).map(|(k, fw)| k * fw).sum::<f64>()
                })
                .collect();
            levels.push(level);
        }
        let (_, rule, values) = cache.last().expect("at least one level");
        let constant = rule.integrate_values(values)? / FOUR_PI;
        CoefficientPyramid::new(CoefficientKind::Exact, constant, levels)
    }

    /// `c + Σ_{j≤J} Σ_η β_{jη} ψ_{jη}(x)` at one point.
    pub fn synthesize(&self, pyramid: &CoefficientPyramid, x: &UnitVector3) -> Result<f64> {
        Ok(self.synthesize_many(pyramid, std::slice::from_ref(x))?[0])
    }

    /// Synthesis at many points; zero coefficients are skipped.
    pub fn synthesize_many(
        &self,
        pyramid: &CoefficientPyramid,
        points: &[UnitVector3],
    ) -> Result<Vec<f64>> {
        self.check_level(pyramid.max_level())?;
        let mut active: Vec<(u32, Vec<UnitVector3>, Vec<f64>)> = Vec::new();
        for j in 0..=pyramid.max_level() {
            let rule = self.rule(j);
            let beta = pyramid.level(j);
            if beta.len() != rule.len() {
                return Err(Error::Validation(format!(
                    "pyramid level {j} has {} coefficients, rule has {} nodes",
                    beta.len(),
                    rule.len()
                )));
            }
            let (centers, scaled): (Vec<_>, Vec<_>) = rule
                .iter()
                .zip(beta)
                .filter(|(_, b)| **b != 0.0)
                .map(|((eta, w), b)| (*eta, b * w.sqrt()))
                .unzip();
            if !centers.is_empty() {
                active.push((j, centers, scaled));
            }
        }
        let constant = pyramid.constant();
        Ok(points
            .par_iter()
            .map(|x| {
                let mut total = constant;
                let mut ts = Vec::new();
                for (j, centers, scaled) in &active {
                    ts.clear();
                    ts.extend(centers.iter().map(|eta| eta.cos_angle(x)));
                    self.kernel(*j).eval_many(&mut ts);
                    total += ts.iter().zip(scaled).map(|(k, c)| k * c).sum::<f64>();
                }
                total
            })
            .collect())
    }
}

fn sample(rule: &CubatureRule, f: &(impl Fn(&UnitVector3) -> f64 + Sync)) -> Result<Vec<f64>> {
    let values: Vec<f64> = rule.nodes().par_iter().map(f).collect();
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { index: i, value: *v });
    }
    Ok(values)
}

/// A sequence-space exponent: finite `p ≥ 1` or `∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    pub fn reciprocal(self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinite => 0.0,
        }
    }
}

/// `ℓ_p` norm of a vector.
pub fn lp_norm(values: &[f64], p: Exponent) -> f64 {
    match p {
        Exponent::Infinite => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        Exponent::Finite(1.0) => values.iter().map(|v| v.abs()).sum(),
        Exponent::Finite(2.0) => values.iter().map(|v| v * v).sum::<f64>().sqrt(),
        Exponent::Finite(p) => values.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p),
    }
}

/// Parameters of the Besov space `B^s_{r,q}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    pub s: f64,
    pub r: Exponent,
    pub q: Exponent,
}

impl BesovParams {
    pub fn new(s: f64, r: Exponent, q: Exponent) -> Result<Self> {
        let valid = |e: Exponent| matches!(e, Exponent::Infinite) || matches!(e, Exponent::Finite(p) if p >= 1.0);
        if !(s > 0.0) || !valid(r) || !valid(q) {
            return Err(Error::InvalidParameter(format!(
                "Besov parameters s={s}, r={r:?}, q={q:?}"
            )));
        }
        Ok(Self { s, r, q })
    }
}

/// `‖(2^{j[s + 2(1/2 − 1/r)]} ‖β_{j·}‖_{ℓ_r})_j‖_{ℓ_q}` on S².
pub fn besov_norm(pyramid: &CoefficientPyramid, params: &BesovParams) -> f64 {
    let exponent = params.s + 2.0 * (0.5 - params.r.reciprocal());
    let per_level: Vec<f64> = pyramid
        .levels()
        .iter()
        .enumerate()
        .map(|(j, level)| 2f64.powf(j as f64 * exponent) * lp_norm(level, params.r))
        .collect();
    lp_norm(&per_level, params.q)
}
