//! Density models, samplers and the simulation drivers.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubature::{build_rule, CubatureRule};
use crate::error::{Error, Result};
use crate::estimator::{
    default_max_level, error_metrics, estimate_density, EstimatorConfig, MetricsRecord, Provenance,
    Sample,
};
use crate::frame::NeedletFrame;
use crate::io::{write_csv, write_text};
use crate::rng::{stream, Purpose};
use crate::sphere::{UnitVector3, FOUR_PI};

/// Cubature level for `L^p` errors of fitted densities (exact to degree 126).
pub const ERROR_RULE_LEVEL: u32 = 5;

/// One bell `c · exp(−k |x − x₀|²)` with `c = k / (π (1 − e^{−4k}))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bell {
    pub center: UnitVector3,
    pub concentration: f64,
    pub weight: f64,
}

impl Bell {
    /// Makes the bell integrate to one over S².
    pub fn normalizer(&self) -> f64 {
        let k = self.concentration;
        k / (PI * -(-4.0 * k).exp_m1())
    }

    pub fn eval(&self, x: &UnitVector3) -> f64 {
        self.normalizer() * (-self.concentration * self.center.chord_squared(x)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DensityModel {
    Uniform,
    BellMixture(Vec<Bell>),
}

impl DensityModel {
    /// Validated mixture: positive concentrations, weights summing to one.
    pub fn mixture(bells: Vec<Bell>) -> Result<Self> {
        if bells.is_empty() {
            return Err(Error::InvalidParameter("mixture without components".into()));
        }
        if let Some(b) = bells
            .iter()
            .find(|b| !(b.concentration > 0.0 && b.concentration.is_finite()) || !(b.weight >= 0.0))
        {
            return Err(Error::InvalidParameter(format!("invalid mixture component {b:?}")));
        }
        let total: f64 = bells.iter().map(|b| b.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("mixture weights sum to {total}")));
        }
        Ok(DensityModel::BellMixture(bells))
    }

    /// Weights 0.65 / 0.35, concentrations 0.7 / 2, centres (0,1,0) and (0,−0.8,0.6).
    pub fn two_bump() -> Self {
        DensityModel::mixture(vec![
            Bell {
                center: UnitVector3::E2,
                concentration: 0.7,
                weight: 0.65,
            },
            Bell {
                center: UnitVector3::new(0.0, -0.8, 0.6).expect("unit"),
                concentration: 2.0,
                weight: 0.35,
            },
        ])
        .expect("valid mixture")
    }

    pub fn name(&self) -> &'static str {
        match self {
            DensityModel::Uniform => "uniform",
            DensityModel::BellMixture(_) => "mixture",
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, DensityModel::Uniform)
    }

    /// `Σ_i w_i c_i exp(−k_i (2 − 2<x, x_i>))`.
    pub fn eval(&self, x: &UnitVector3) -> f64 {
        match self {
            DensityModel::Uniform => 1.0 / FOUR_PI,
            DensityModel::BellMixture(bells) => bells.iter().map(|b| b.weight * b.eval(x)).sum(),
        }
    }
}

fn uniform_point(rng: &mut ChaCha8Rng) -> UnitVector3 {
    let z = 2.0 * rng.gen::<f64>() - 1.0;
    let phi = 2.0 * PI * rng.gen::<f64>();
    UnitVector3::from_height(z, phi)
}

/// `n` i.i.d. uniform points: `z ~ U[−1, 1]`, longitude `~ U[0, 2π)`.
pub fn sample_uniform(n: usize, seed: u64, replicate: u64) -> Result<Sample> {
    let mut rng = stream(seed, replicate, Purpose::Sample);
    let points = (0..n).map(|_| uniform_point(&mut rng)).collect();
    Ok(Sample::new(points)?.with_provenance(Provenance {
        model: "uniform".into(),
        seed,
        replicate,
    }))
}

/// Proposal counts of the rejection sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SamplerStats {
    pub proposals: u64,
    pub accepted: u64,
}

impl SamplerStats {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.proposals.max(1) as f64
    }
}

/// Draws from `model`. Mixture components are chosen by weight; each bell is
/// sampled by rejection from the uniform law, accepting with probability
/// `exp(−k |x − x₀|²) ≤ 1`.
pub fn sample_model(
    model: &DensityModel,
    n: usize,
    seed: u64,
    replicate: u64,
) -> Result<(Sample, SamplerStats)> {
    let bells = match model {
        DensityModel::Uniform => {
            let sample = sample_uniform(n, seed, replicate)?;
            return Ok((
                sample,
                SamplerStats {
                    proposals: n as u64,
                    accepted: n as u64,
                },
            ));
        }
        DensityModel::BellMixture(bells) => bells,
    };
    let mut pick = stream(seed, replicate, Purpose::Component);
    let mut propose = stream(seed, replicate, Purpose::Proposal);
    let mut stats = SamplerStats::default();
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = pick.gen();
        let mut acc = 0.0;
        let bell = bells
            .iter()
            .find(|b| {
                acc += b.weight;
                u < acc
            })
            .unwrap_or(bells.last().expect("nonempty mixture"));
        loop {
            stats.proposals += 1;
            let x = uniform_point(&mut propose);
            if propose.gen::<f64>() < (-bell.concentration * bell.center.chord_squared(&x)).exp() {
                stats.accepted += 1;
                points.push(x);
                break;
            }
        }
    }
    let sample = Sample::new(points)?.with_provenance(Provenance {
        model: model.name().into(),
        seed,
        replicate,
    });
    Ok((sample, stats))
}

/// A `(colatitude, longitude)` lattice of cell centres in θ and equispaced φ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for Lattice {
    fn default() -> Self {
        Self {
            n_theta: 256,
            n_phi: 512,
        }
    }
}

impl Lattice {
    /// Parses `"256x512"`.
    pub fn parse(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::InvalidParameter(format!("lattice {s:?}, expected AxB")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::InvalidParameter(format!("lattice dimension {v:?}")))
        };
        Ok(Self {
            n_theta: parse(a)?,
            n_phi: parse(b)?,
        })
    }

    pub fn angles(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.n_theta * self.n_phi);
        for i in 0..self.n_theta {
            let theta = (i as f64 + 0.5) * PI / self.n_theta as f64;
            for k in 0..self.n_phi {
                out.push((theta, 2.0 * PI * k as f64 / self.n_phi as f64));
            }
        }
        out
    }

    pub fn points(&self) -> Vec<UnitVector3> {
        self.angles()
            .into_iter()
            .map(|(t, p)| UnitVector3::from_angles(t, p))
            .collect()
    }
}

/// Sup of a density over a lattice.
pub fn lattice_sup(model: &DensityModel, lattice: &Lattice) -> f64 {
    lattice
        .points()
        .par_iter()
        .map(|x| model.eval(x))
        .reduce(|| 0.0, f64::max)
}

/// Settings of one simulation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub model: DensityModel,
    pub n: usize,
    pub k0: Vec<f64>,
    /// `None`: chosen from `n` by [`default_max_level`].
    pub max_level: Option<u32>,
    pub seed: u64,
    pub replicates: usize,
    /// Bound `M` on `‖f‖_∞`; `None` uses the sup of the true density.
    pub bound: Option<f64>,
    pub lattice: Lattice,
    /// Sample sizes for the rate sweep.
    pub n_list: Vec<usize>,
}

impl ExperimentSpec {
    pub fn uniform(n: usize, k0: Vec<f64>, seed: u64) -> Self {
        Self {
            model: DensityModel::Uniform,
            n,
            k0,
            max_level: None,
            seed,
            replicates: 1,
            bound: None,
            lattice: Lattice::default(),
            n_list: Vec::new(),
        }
    }

    pub fn two_bump(n: usize, k0: Vec<f64>, seed: u64) -> Self {
        Self {
            model: DensityModel::two_bump(),
            ..Self::uniform(n, k0, seed)
        }
    }

    pub fn rates(n_list: Vec<usize>, replicates: usize, k0: f64, seed: u64) -> Self {
        Self {
            model: DensityModel::two_bump(),
            n: n_list.iter().copied().max().unwrap_or(1),
            k0: vec![k0],
            max_level: None,
            seed,
            replicates,
            bound: None,
            lattice: Lattice::default(),
            n_list,
        }
    }

    /// Reads `key = value` lines over the defaults in `self`.
    ///
    /// Keys: `model` (uniform|twobump), `n`, `n_list`, `k0` (comma lists),
    /// `J`, `seed`, `replicates`, `m`, `lattice` (AxB). `#` starts a comment.
    pub fn apply_config(mut self, text: &str) -> Result<Self> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Parse {
                path: "<config>".into(),
                line: i + 1,
                message: msg,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key = value, found {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad(format!("bad number {v:?}")));
            let int = |v: &str| v.trim().parse::<u64>().map_err(|_| bad(format!("bad integer {v:?}")));
            match key {
                "model" => {
                    self.model = match value {
                        "uniform" => DensityModel::Uniform,
                        "twobump" => DensityModel::two_bump(),
                        other => return Err(bad(format!("unknown model {other:?}"))),
                    }
                }
                "n" => self.n = int(value)? as usize,
                "n_list" => {
                    self.n_list = value.split(',').map(|v| int(v).map(|n| n as usize)).collect::<Result<_>>()?
                }
                "k0" => self.k0 = value.split(',').map(num).collect::<Result<_>>()?,
                "J" | "j" => self.max_level = Some(int(value)? as u32),
                "seed" => self.seed = int(value)?,
                "replicates" => self.replicates = int(value)? as usize,
                "m" | "M" => self.bound = Some(num(value)?),
                "lattice" => self.lattice = Lattice::parse(value)?,
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n_list.contains(&0) {
            return Err(Error::InvalidParameter("sample size must be at least 1".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be at least 1".into()));
        }
        if self.k0.is_empty() {
            return Err(Error::InvalidParameter("no k0 values".into()));
        }
        Ok(())
    }

    /// `J` used for sample size `n`.
    pub fn level_for(&self, n: usize) -> u32 {
        self.max_level
            .unwrap_or_else(|| default_max_level(n, crate::cubature::matched_node_count))
    }
}

/// One cell of a survival table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRow {
    pub k0: f64,
    pub j: u32,
    pub survivors: usize,
    pub total: usize,
    pub fraction: f64,
}

fn survival_rows(k0: f64, survivors: &[usize], frame: &NeedletFrame) -> Vec<SurvivalRow> {
    survivors
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let total = frame.rule(j as u32).len();
            SurvivalRow {
                k0,
                j: j as u32,
                survivors: s,
                total,
                fraction: s as f64 / total as f64,
            }
        })
        .collect()
}

fn write_table(path: &Path, rows: &[SurvivalRow]) -> Result<()> {
    let mut text = String::from("k0,j,survivors,total,fraction\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            crate::io::fmt_real(r.k0),
            r.j,
            r.survivors,
            r.total,
            crate::io::fmt_real(r.fraction)
        ));
    }
    write_text(path, &text)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// Survival counts for the uniform density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformReport {
    pub n: usize,
    pub max_level: u32,
    pub bound: f64,
    pub seed: u64,
    pub rows: Vec<SurvivalRow>,
    pub records: Vec<MetricsRecord>,
}

impl UniformReport {
    pub fn fractions(&self, k0: f64) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.k0 == k0)
            .map(|r| r.fraction)
            .collect()
    }

    pub fn l2_proxy(&self, k0: f64) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.k0 == k0)
            .and_then(|r| r.l2_proxy)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_table(&dir.join("uniform_table.csv"), &self.rows)?;
        write_json(&dir.join("uniform_metrics.json"), &self.records)
    }
}

/// Every `k0` is applied to the same sample. `M` defaults to `1/(4π)`.
pub fn run_uniform_experiment(spec: &ExperimentSpec, frame: &NeedletFrame) -> Result<UniformReport> {
    spec.validate()?;
    let max_level = spec.level_for(spec.n);
    let bound = spec.bound.unwrap_or(1.0 / FOUR_PI);
    let sample = sample_uniform(spec.n, spec.seed, 0)?;
    let base = EstimatorConfig::new(spec.n, max_level, 1.0, bound)?;
    let empirical = crate::estimator::empirical_coefficients(&sample, max_level, frame)?;
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for &k0 in &spec.k0 {
        let config = EstimatorConfig { k0, kappa: base.kappa * k0, ..base };
        let thresholded = crate::estimator::hard_threshold(&empirical, config.threshold());
        rows.extend(survival_rows(k0, &thresholded.survivors, frame));
        let fit = crate::estimator::DensityEstimate {
            config,
            empirical: empirical.clone(),
            thresholded,
        };
        let metrics = crate::estimator::ErrorMetrics {
            linf: f64::NAN,
            lp: Vec::new(),
            l2_proxy: Some(fit.coefficient_l2()),
        };
        let mut record = MetricsRecord::new(&fit, Some(spec.seed), Some(&metrics));
        record.linf = None;
        records.push(record);
    }
    Ok(UniformReport {
        n: spec.n,
        max_level,
        bound,
        seed: spec.seed,
        rows,
        records,
    })
}

/// One `k0` of the two-bump study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoBumpRun {
    pub k0: f64,
    pub survivors: Vec<usize>,
    pub sup_error: f64,
    pub l2_error: f64,
    #[serde(skip)]
    pub estimate_on_lattice: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoBumpReport {
    pub n: usize,
    pub max_level: u32,
    pub bound: f64,
    pub seed: u64,
    pub acceptance_rate: f64,
    pub truth_sup: f64,
    pub lattice: Lattice,
    pub runs: Vec<TwoBumpRun>,
    pub rows: Vec<SurvivalRow>,
    #[serde(skip)]
    pub truth_on_lattice: Vec<f64>,
}

impl TwoBumpReport {
    pub fn run(&self, k0: f64) -> Option<&TwoBumpRun> {
        self.runs.iter().find(|r| r.k0 == k0)
    }

    /// Survival table, a JSON summary, and one `theta,phi,f,fhat` CSV per `k0`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_table(&dir.join("twobump_table.csv"), &self.rows)?;
        write_json(&dir.join("twobump_metrics.json"), self)?;
        let angles = self.lattice.angles();
        for run in &self.runs {
            let rows = angles
                .iter()
                .zip(&self.truth_on_lattice)
                .zip(&run.estimate_on_lattice)
                .map(|(((t, p), f), g)| vec![*t, *p, *f, *g]);
            write_csv(
                &dir.join(format!("twobump_lattice_k0_{}.csv", run.k0)),
                &["theta", "phi", "f", "fhat"],
                rows,
            )?;
        }
        Ok(())
    }
}

/// Fits the mixture for every `k0` on one sample; sup errors on the lattice.
/// `M` defaults to the lattice sup of the true density.
pub fn run_twobump_experiment(spec: &ExperimentSpec, frame: &NeedletFrame) -> Result<TwoBumpReport> {
    spec.validate()?;
    let model = &spec.model;
    let max_level = spec.level_for(spec.n);
    let points = spec.lattice.points();
    let truth_on_lattice: Vec<f64> = points.par_iter().map(|x| model.eval(x)).collect();
    let truth_sup = truth_on_lattice.iter().copied().fold(0.0, f64::max);
    let bound = spec.bound.unwrap_or(truth_sup);
    let (sample, stats) = sample_model(model, spec.n, spec.seed, 0)?;
    let error_rule = build_rule(ERROR_RULE_LEVEL)?;
    let mut runs = Vec::new();
    let mut rows = Vec::new();
    for &k0 in &spec.k0 {
        let config = EstimatorConfig::new(spec.n, max_level, k0, bound)?;
        let fit = estimate_density(&sample, &config, frame)?;
        let on_lattice = fit.eval_many(frame, &points)?;
        let sup_error = on_lattice
            .iter()
            .zip(&truth_on_lattice)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let l2_error = l2_error(&fit, frame, model, &error_rule)?;
        rows.extend(survival_rows(k0, fit.survivors(), frame));
        runs.push(TwoBumpRun {
            k0,
            survivors: fit.survivors().to_vec(),
            sup_error,
            l2_error,
            estimate_on_lattice: on_lattice,
        });
    }
    Ok(TwoBumpReport {
        n: spec.n,
        max_level,
        bound,
        seed: spec.seed,
        acceptance_rate: stats.acceptance_rate(),
        truth_sup,
        lattice: spec.lattice,
        runs,
        rows,
        truth_on_lattice,
    })
}

fn l2_error(
    fit: &crate::estimator::DensityEstimate,
    frame: &NeedletFrame,
    model: &DensityModel,
    rule: &CubatureRule,
) -> Result<f64> {
    let metrics = error_metrics(fit, frame, |x| model.eval(x), &[2.0], &[], rule, false)?;
    Ok(metrics.lp_norm(2.0).expect("requested p = 2"))
}

/// Mean `L²` error against sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub k0: f64,
    pub seed: u64,
    pub n_list: Vec<usize>,
    pub levels: Vec<u32>,
    /// `errors[i][r]`: replicate `r` at `n_list[i]`.
    pub errors: Vec<Vec<f64>>,
    pub mean_errors: Vec<f64>,
    /// Least-squares slope of `log(mean error)` on `log n`.
    pub slope: f64,
}

impl RateReport {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let rows = self
            .n_list
            .iter()
            .zip(&self.levels)
            .zip(&self.mean_errors)
            .map(|((n, j), e)| vec![*n as f64, *j as f64, *e]);
        write_csv(&dir.join("rates.csv"), &["n", "J", "mean_l2_error"], rows)?;
        write_json(&dir.join("rates.json"), self)
    }
}

/// Least-squares slope of `ys` on `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// `L²` error over `replicates` independent samples for each `n` in
/// `spec.n_list`, with `k0 = spec.k0[0]`. Replicate `r` uses stream
/// `(seed, r)` at every `n`.
pub fn run_rate_sweep(spec: &ExperimentSpec, frame: &NeedletFrame) -> Result<RateReport> {
    spec.validate()?;
    if spec.n_list.len() < 2 {
        return Err(Error::InvalidParameter("rate sweep needs at least two sample sizes".into()));
    }
    let model = &spec.model;
    let k0 = spec.k0[0];
    let bound = match spec.bound {
        Some(m) => m,
        None => lattice_sup(model, &spec.lattice),
    };
    let rule = build_rule(ERROR_RULE_LEVEL)?;
    let mut levels = Vec::new();
    let mut errors = Vec::new();
    for &n in &spec.n_list {
        let max_level = spec.level_for(n);
        levels.push(max_level);
        let row = (0..spec.replicates as u64)
            .into_par_iter()
            .map(|r| {
                let (sample, _) = sample_model(model, n, spec.seed, r)?;
                let config = EstimatorConfig::new(n, max_level, k0, bound)?;
                let fit = estimate_density(&sample, &config, frame)?;
                l2_error(&fit, frame, model, &rule)
            })
            .collect::<Result<Vec<f64>>>()?;
        errors.push(row);
    }
    let mean_errors: Vec<f64> = errors
        .iter()
        .map(|row| row.iter().sum::<f64>() / row.len() as f64)
        .collect();
    let xs: Vec<f64> = spec.n_list.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = mean_errors.iter().map(|e| e.ln()).collect();
    Ok(RateReport {
        k0,
        seed: spec.seed,
        n_list: spec.n_list.clone(),
        levels,
        slope: ls_slope(&xs, &ys),
        errors,
        mean_errors,
    })
}
