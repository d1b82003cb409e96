//! Positive-weight cubature rules on S², exact up to a declared degree.
//!
//! Rules are products of Gauss–Legendre nodes in `cos θ` and equispaced
//! longitudes. A ring of `m` equispaced longitudes integrates every azimuthal
//! mode `e^{ikφ}` with `|k| < m` exactly, and `g` Gauss heights integrate
//! polynomials in `z` of degree `< 2g`, so the product is exact on all
//! spherical polynomials of degree `≤ min(2g − 1, m − 1)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::gauss_legendre;
use crate::sphere::{UnitVector3, FOUR_PI};

pub const MAX_LEVEL: u32 = 12;

/// Nodes are summed in fixed-size chunks; partial sums are combined in order.
const REDUCTION_CHUNK: usize = 4096;

/// Node layout of a level rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum RuleScheme {
    /// `2^{j+1}` Gauss heights × `2^{j+3}` longitudes: `2^{2j+4}` nodes, mean
    /// weight `4π·2^{-2j-4}`.
    #[default]
    Matched,
    /// `⌈(L+1)/2⌉` Gauss heights × `(L+1)` longitudes with `L = 2^{j+2} − 2`;
    /// the fewest nodes a Gauss product rule needs for degree `L`.
    Minimal,
}

/// Degree every level-`j` rule must integrate exactly: `2^{j+2} − 2`.
pub fn required_degree(level: u32) -> usize {
    (1usize << (level + 2)) - 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubatureRule {
    level: u32,
    exact_degree: usize,
    nodes: Vec<UnitVector3>,
    weights: Vec<f64>,
}

impl CubatureRule {
    /// Validates and assembles a rule from raw parts.
    pub fn from_parts(
        level: u32,
        exact_degree: usize,
        nodes: Vec<UnitVector3>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::Validation(format!(
                "{} nodes but {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.is_empty() {
            return Err(Error::Validation("rule has no nodes".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::Validation(format!(
                "weight {i} is {w}, expected a positive finite value"
            )));
        }
        Ok(Self {
            level,
            exact_degree,
            nodes,
            weights,
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn exact_degree(&self) -> usize {
        self.exact_degree
    }

    pub fn nodes(&self) -> &[UnitVector3] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&UnitVector3, f64)> + '_ {
        self.nodes.iter().zip(self.weights.iter().copied())
    }

    /// `Σ_η λ_η f(η)` in node order.
    pub fn integrate(&self, f: impl Fn(&UnitVector3) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        for (i, (x, w)) in self.iter().enumerate() {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { index: i, value: v });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// Parallel variant of [`integrate`](Self::integrate).
    ///
    /// Partial sums over fixed 4096-node chunks are combined in chunk order,
    /// so the result does not depend on the worker count.
    pub fn integrate_par(&self, f: impl Fn(&UnitVector3) -> f64 + Sync) -> Result<f64> {
        let partials: Vec<Result<f64>> = self
            .nodes
            .par_chunks(REDUCTION_CHUNK)
            .zip(self.weights.par_chunks(REDUCTION_CHUNK))
            .enumerate()
            .map(|(c, (xs, ws))| {
                let mut acc = 0.0;
                for (i, (x, w)) in xs.iter().zip(ws).enumerate() {
                    let v = f(x);
                    if !v.is_finite() {
                        return Err(Error::NonFinite {
                            index: c * REDUCTION_CHUNK + i,
                            value: v,
                        });
                    }
                    acc += w * v;
                }
                Ok(acc)
            })
            .collect();
        let mut total = 0.0;
        for p in partials {
            total += p?;
        }
        Ok(total)
    }

    /// Integral of a function already sampled at the nodes.
    pub fn integrate_values(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values for {} nodes",
                values.len(),
                self.len()
            )));
        }
        let mut acc = 0.0;
        for (i, (v, w)) in values.iter().zip(&self.weights).enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { index: i, value: *v });
            }
            acc += w * v;
        }
        Ok(acc)
    }
}

/// Builds the level-`j` rule with the default [`RuleScheme::Matched`] layout.
pub fn build_rule(level: u32) -> Result<CubatureRule> {
    build_rule_with(level, RuleScheme::Matched)
}

fn check_level(level: u32) -> Result<()> {
    if level > MAX_LEVEL {
        return Err(Error::InvalidParameter(format!(
            "cubature level {level} exceeds {MAX_LEVEL}"
        )));
    }
    Ok(())
}

pub fn build_rule_with(level: u32, scheme: RuleScheme) -> Result<CubatureRule> {
    check_level(level)?;
    let degree = required_degree(level);
    let (heights, longitudes) = match scheme {
        RuleScheme::Matched => (1usize << (level + 1), 1usize << (level + 3)),
        RuleScheme::Minimal => ((degree + 2) / 2, degree + 1),
    };
    debug_assert!(2 * heights > degree && longitudes > degree);
    let (z, gw) = gauss_legendre(heights);
    let dphi = 2.0 * PI / longitudes as f64;
    let mut nodes = Vec::with_capacity(heights * longitudes);
    let mut weights = Vec::with_capacity(heights * longitudes);
    for (zk, wk) in z.iter().zip(&gw) {
        for m in 0..longitudes {
            nodes.push(UnitVector3::from_height(*zk, m as f64 * dphi));
            weights.push(wk * dphi);
        }
    }
    CubatureRule::from_parts(level, degree, nodes, weights)
}

/// Rules for levels `0..=max_level`, indexed by level.
#[derive(Debug, Clone)]
pub struct RuleSet {
    scheme: RuleScheme,
    rules: Vec<CubatureRule>,
}

impl RuleSet {
    pub fn build(max_level: u32, scheme: RuleScheme) -> Result<Self> {
        check_level(max_level)?;
        let rules = (0..=max_level)
            .map(|j| build_rule_with(j, scheme))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { scheme, rules })
    }

    pub fn scheme(&self) -> RuleScheme {
        self.scheme
    }

    pub fn max_level(&self) -> u32 {
        self.rules.len() as u32 - 1
    }

    pub fn level(&self, j: u32) -> Option<&CubatureRule> {
        self.rules.get(j as usize)
    }

    pub fn rules(&self) -> &[CubatureRule] {
        &self.rules
    }

    /// Total node count over levels `0..=max_level`.
    pub fn coefficient_count(&self, max_level: u32) -> usize {
        self.rules
            .iter()
            .take(max_level as usize + 1)
            .map(CubatureRule::len)
            .sum()
    }
}

/// Node count of the default layout at level `j`: `2^{2j+4}`.
pub fn matched_node_count(level: u32) -> usize {
    1usize << (2 * level + 4)
}

/// Measured ratios of a rule against the reference scale `N = 2^{2j+4}`,
/// `λ = 4π / N`.
#[derive(Debug, Clone, Copy)]
pub struct CardinalityBounds {
    pub count_ratio: f64,
    pub min_weight_ratio: f64,
    pub max_weight_ratio: f64,
}

impl CardinalityBounds {
    pub fn measure(rule: &CubatureRule) -> Self {
        let n_ref = matched_node_count(rule.level()) as f64;
        let w_ref = FOUR_PI / n_ref;
        let (lo, hi) = rule
            .weights()
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &w| (lo.min(w), hi.max(w)));
        Self {
            count_ratio: rule.len() as f64 / n_ref,
            min_weight_ratio: lo / w_ref,
            max_weight_ratio: hi / w_ref,
        }
    }
}
