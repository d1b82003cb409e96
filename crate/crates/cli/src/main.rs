//! `needlet` command-line interface.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use needlet::cubature::build_rule;
use needlet::estimator::{default_max_level, estimate_density, pilot_bound, EstimatorConfig, MetricsRecord};
use needlet::experiments::{
    run_rate_sweep, run_twobump_experiment, run_uniform_experiment, sample_model, DensityModel,
    ExperimentSpec, Lattice,
};
use needlet::frame::{CoefficientKind, CoefficientPyramid, NeedletFrame};
use needlet::io;

/// Lattice used for the pilot bound when `--m` is omitted.
const PILOT_LATTICE: Lattice = Lattice {
    n_theta: 64,
    n_phi: 128,
};

#[derive(Parser)]
#[command(name = "needlet", version, about = "Needlet frames and thresholded density estimation on S²")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cubature grids.
    Grid {
        #[command(subcommand)]
        action: GridAction,
    },
    /// Draw a sample from a model.
    Sample(SampleArgs),
    /// Fit the thresholded estimator to a sample.
    Estimate(EstimateArgs),
    /// Evaluate a coefficient file on a (θ, φ) lattice.
    Eval(EvalArgs),
    /// Run a simulation study.
    Experiment(ExperimentArgs),
}

#[derive(Subcommand)]
enum GridAction {
    /// Write the level-j rule.
    Build {
        #[arg(long)]
        j: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Uniform,
    Twobump,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    sample: PathBuf,
    /// Finest level; chosen from the sample size when omitted.
    #[arg(long)]
    j: Option<u32>,
    #[arg(long, default_value_t = 1.5)]
    k0: f64,
    /// Bound on the sup of the density; a pilot fit is used when omitted.
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON metrics record.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    coeffs: PathBuf,
    #[arg(long, default_value = "256x512")]
    lattice: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Study {
    Uniform,
    Twobump,
    Rates,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    study: Study,
    /// `key = value` overrides of the study defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Grid {
            action: GridAction::Build { j, out },
        } => {
            let rule = build_rule(j)?;
            io::write_rule(&rule, &out)?;
            eprintln!("level {j}: {} nodes, exact to degree {}", rule.len(), rule.exact_degree());
        }
        Command::Sample(args) => sample(args)?,
        Command::Estimate(args) => estimate(args)?,
        Command::Eval(args) => eval(args)?,
        Command::Experiment(args) => experiment(args)?,
    }
    Ok(())
}

fn sample(args: SampleArgs) -> Result<()> {
    if args.n == 0 {
        bail!("--n must be at least 1");
    }
    let model = match args.model {
        Model::Uniform => DensityModel::Uniform,
        Model::Twobump => DensityModel::two_bump(),
    };
    let (sample, stats) = sample_model(&model, args.n, args.seed, 0)?;
    io::write_sample(&sample, &args.out)?;
    eprintln!(
        "{} points, acceptance rate {:.4}",
        sample.len(),
        stats.acceptance_rate()
    );
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let sample = io::load_sample(&args.sample)?;
    let n = sample.len();
    let max_level = args
        .j
        .unwrap_or_else(|| default_max_level(n, needlet::cubature::matched_node_count));
    let frame = NeedletFrame::build(max_level)?;
    let bound = match args.m {
        Some(m) => m,
        None => {
            let m = pilot_bound(&sample, max_level, &frame, &PILOT_LATTICE.points())?;
            eprintln!("pilot bound M = {m:.6}");
            m
        }
    };
    let config = EstimatorConfig::new(n, max_level, args.k0, bound)?;
    let fit = estimate_density(&sample, &config, &frame)?;
    io::write_pyramid(fit.pyramid(), &args.out)?;
    eprintln!("J = {max_level}, threshold {:.6e}, survivors {:?}", config.threshold(), fit.survivors());
    if let Some(path) = args.metrics {
        let seed = sample.provenance().map(|p| p.seed);
        let record = MetricsRecord::new(&fit, seed, None);
        io::write_text(&path, &(serde_json::to_string_pretty(&record)? + "\n"))?;
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let lattice = Lattice::parse(&args.lattice)?;
    let pyramid: CoefficientPyramid = io::load_pyramid(&args.coeffs)?;
    let frame = NeedletFrame::build(pyramid.max_level())?;
    let values = frame.synthesize_many(&pyramid, &lattice.points())?;
    let column = match pyramid.kind() {
        CoefficientKind::Exact => "f",
        CoefficientKind::Empirical => "fhat",
    };
    let rows = lattice
        .angles()
        .into_iter()
        .zip(values)
        .map(|((t, p), v)| vec![t, p, v]);
    io::write_csv(&args.out, &["theta", "phi", column], rows)?;
    Ok(())
}

fn read_config(spec: ExperimentSpec, path: Option<&Path>) -> Result<ExperimentSpec> {
    match path {
        None => Ok(spec),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(spec.apply_config(&text).with_context(|| format!("in {}", p.display()))?)
        }
    }
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let config = args.config.as_deref();
    match args.study {
        Study::Uniform => {
            let spec = read_config(ExperimentSpec::uniform(8000, vec![1.0, 1.5, 2.0], 1), config)?;
            let frame = NeedletFrame::build(spec.level_for(spec.n))?;
            let report = run_uniform_experiment(&spec, &frame)?;
            report.write(&args.out_dir)?;
            for r in &report.rows {
                println!("k0={} j={} {}/{} ({:.3})", r.k0, r.j, r.survivors, r.total, r.fraction);
            }
        }
        Study::Twobump => {
            let spec = read_config(ExperimentSpec::two_bump(2000, vec![1.1, 1.65], 1), config)?;
            let frame = NeedletFrame::build(spec.level_for(spec.n))?;
            let report = run_twobump_experiment(&spec, &frame)?;
            report.write(&args.out_dir)?;
            eprintln!("acceptance rate {:.4}", report.acceptance_rate);
            println!("sup f = {:.6}", report.truth_sup);
            for run in &report.runs {
                println!("k0={} sup error {:.6} L2 error {:.6} survivors {:?}", run.k0, run.sup_error, run.l2_error, run.survivors);
            }
        }
        Study::Rates => {
            let spec = read_config(ExperimentSpec::rates(vec![500, 2000, 8000, 32000], 10, 1.65, 1), config)?;
            let top = spec.n_list.iter().map(|&n| spec.level_for(n)).max().unwrap_or(0);
            let frame = NeedletFrame::build(top)?;
            let report = run_rate_sweep(&spec, &frame)?;
            report.write(&args.out_dir)?;
            for ((n, j), e) in report.n_list.iter().zip(&report.levels).zip(&report.mean_errors) {
                println!("n={n} J={j} mean L2 error {e:.6}");
            }
            println!("slope {:.4}", report.slope);
        }
    }
    Ok(())
}
