//! The `inferkit` command line. One subcommand per algorithm plus `oracle`.
//!
//! Exit codes: 0 success, 1 model failure, 2 bad configuration, 3 weight
//! degeneracy, 4 data or output IO.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dataio::{self, Format, Metadata};
use crate::effects::{uniform, Model};
use crate::error::{Error, Result};
use crate::inference::{
    importance_sampling_with, pmmh, rmsmc_with, smc_with, tmcmc, Histogram, PmmhConfig, SmcConfig, Workers,
};
use crate::logweight::LogWeight;
use crate::models::{
    climate_month_model, coin_model, gaussian_mean_likelihood, gaussian_mean_model, gaussian_mean_prior,
    linear_gaussian_model, logistic_regression_model, markov_chain_model, markov_chain_model_with,
    synthetic_logistic_data, ClimateHyperParams, LinearGaussian, BLOCKS, GAUSSIAN_MEAN_DATA,
};
use crate::oracles::{enumerate_discrete_posterior, kalman_filter_exact, merge_equal};
use crate::randomness::RngState;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DEGENERACY: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Size and generator seed of the bundled logistic-regression data set.
const LOGREG_POINTS: usize = 50;
const LOGREG_DATA_SEED: u64 = 50;

/// Readings per block in a sliced month series.
const CLIMATE_READINGS_PER_BLOCK: usize = dataio::BLOCK_YEARS as usize;

#[derive(Parser, Debug)]
#[command(name = "inferkit", version, about = "Run inference over the bundled models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Importance sampling
    Is(RunArgs),
    /// Sequential Monte Carlo
    Smc(RunArgs),
    /// Trace Metropolis-Hastings
    Tmcmc(RunArgs),
    /// Resample-move SMC
    Rmsmc(RunArgs),
    /// Particle marginal Metropolis-Hastings
    Pmmh(RunArgs),
    /// Exact reference computations
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Subcommand, Debug)]
pub enum OracleCommand {
    /// Kalman filter over the bundled linear-Gaussian instance
    Kalman(KalmanArgs),
    /// Posterior of a model whose samples are restricted to a uniform grid
    Enumerate(EnumerateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    Is,
    Smc,
    Tmcmc,
    Rmsmc,
    Pmmh,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Is => "is",
            Algorithm::Smc => "smc",
            Algorithm::Tmcmc => "tmcmc",
            Algorithm::Rmsmc => "rmsmc",
            Algorithm::Pmmh => "pmmh",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    /// Six-step Gaussian random walk scored against 3.0
    Chain,
    /// Bayesian logistic regression on 50 synthetic points
    Logreg,
    /// One month of the block temperature model; needs --data
    Climate,
    /// Two binary choices with a likelihood table
    Coin,
    /// Gaussian mean with a standard normal prior
    Gauss,
    /// Five-observation linear-Gaussian state-space model
    Lgss,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Chain => "chain",
            ModelKind::Logreg => "logreg",
            ModelKind::Climate => "climate",
            ModelKind::Coin => "coin",
            ModelKind::Gauss => "gauss",
            ModelKind::Lgss => "lgss",
        }
    }

    fn score_count(self) -> usize {
        match self {
            ModelKind::Chain => 6,
            ModelKind::Logreg => LOGREG_POINTS,
            ModelKind::Climate => BLOCKS * CLIMATE_READINGS_PER_BLOCK,
            ModelKind::Coin => 1,
            ModelKind::Gauss => GAUSSIAN_MEAN_DATA.len(),
            ModelKind::Lgss => LinearGaussian::example().y.len(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Args, Clone, Debug)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[arg(long)]
    pub particles: Option<usize>,
    /// Resampling rounds (smc, rmsmc, inner pmmh) or MH updates (tmcmc)
    #[arg(long)]
    pub steps: Option<usize>,
    /// Scores between resampling rounds
    #[arg(long)]
    pub step_size: Option<usize>,
    /// Moves per round (rmsmc) or outer MH updates (pmmh)
    #[arg(long)]
    pub mh_steps: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long, env = "INFERKIT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Temperature CSV for the climate model
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Month of the climate series, 1 to 12
    #[arg(long)]
    pub month: Option<u32>,
    /// Histogram output; multi-quantity models write one suffixed file each
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Defaults to json for a .json output path and csv otherwise
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Writes the run statistics as JSON
    #[arg(long)]
    pub json_summary: Option<PathBuf>,
}

#[derive(Args, Clone, Debug)]
pub struct KalmanArgs {
    /// Table of filtered means and variances
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Args, Clone, Debug)]
pub struct EnumerateArgs {
    #[arg(long, value_enum, default_value = "coin")]
    pub model: ModelKind,
    /// Grid points per sample
    #[arg(long, default_value_t = 10)]
    pub resolution: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long)]
    pub json_summary: Option<PathBuf>,
}

/// A fully resolved run: every default filled in and checked.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub model: ModelKind,
    pub particles: usize,
    pub steps: usize,
    pub step_size: usize,
    pub mh_steps: usize,
    pub burnin: usize,
    pub seed: u64,
    pub data: Option<PathBuf>,
    pub month: u32,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub threads: usize,
    pub json_summary: Option<PathBuf>,
}

fn config_error(message: impl Into<String>) -> Error {
    Error::Config(message.into())
}

fn resolve_format(format: Option<FormatArg>, out: Option<&Path>) -> Format {
    match format {
        Some(f) => f.into(),
        None if out.and_then(Path::extension).is_some_and(|e| e == "json") => Format::Json,
        None => Format::Csv,
    }
}

impl RunConfig {
    /// Fills algorithm- and model-specific defaults and rejects flags the
    /// algorithm does not use.
    pub fn resolve(algorithm: Algorithm, args: RunArgs) -> Result<RunConfig> {
        use Algorithm::*;
        let uses = |flag: &str| -> bool {
            match flag {
                "particles" => matches!(algorithm, Is | Smc | Rmsmc | Pmmh),
                "steps" => matches!(algorithm, Smc | Rmsmc | Tmcmc | Pmmh),
                "step-size" => matches!(algorithm, Smc | Rmsmc | Pmmh),
                "mh-steps" => matches!(algorithm, Rmsmc | Pmmh),
                "burnin" => matches!(algorithm, Tmcmc | Pmmh),
                _ => true,
            }
        };
        for (flag, given) in [
            ("particles", args.particles.is_some()),
            ("steps", args.steps.is_some()),
            ("step-size", args.step_size.is_some()),
            ("mh-steps", args.mh_steps.is_some()),
            ("burnin", args.burnin.is_some()),
        ] {
            if given && !uses(flag) {
                return Err(config_error(format!("--{flag} does not apply to {}", algorithm.name())));
            }
        }
        let climate = args.model == ModelKind::Climate;
        if climate && args.data.is_none() {
            return Err(config_error("the climate model needs --data"));
        }
        if !climate && (args.data.is_some() || args.month.is_some()) {
            return Err(config_error("--data and --month apply only to the climate model"));
        }
        let month = args.month.unwrap_or(1);
        if !(1..=12).contains(&month) {
            return Err(config_error(format!("--month must be in 1..=12, got {month}")));
        }
        if args.threads == 0 {
            return Err(config_error("--threads must be at least 1"));
        }
        if args.threads > 1 && matches!(algorithm, Tmcmc | Pmmh) {
            return Err(config_error(format!("{} runs on one thread", algorithm.name())));
        }
        if algorithm == Pmmh && !matches!(args.model, ModelKind::Chain | ModelKind::Gauss) {
            return Err(config_error("pmmh supports the chain and gauss models"));
        }

        let particles = args.particles.unwrap_or(match algorithm {
            Pmmh => PmmhConfig::default().particles,
            Rmsmc => 1000,
            _ => 2000,
        });
        let step_size = args
            .step_size
            .unwrap_or(if climate { CLIMATE_READINGS_PER_BLOCK } else { 1 });
        if particles == 0 || step_size == 0 {
            return Err(config_error("--particles and --step-size must be at least 1"));
        }
        let steps = args.steps.unwrap_or(match algorithm {
            Tmcmc if climate => 100_000,
            Tmcmc => 10_000,
            Pmmh => PmmhConfig::default().smc_steps,
            _ => args.model.score_count().div_ceil(step_size),
        });
        let mh_steps = args.mh_steps.unwrap_or(match algorithm {
            Pmmh => PmmhConfig::default().mh_steps,
            Rmsmc => 2,
            _ => 0,
        });
        let burnin = args.burnin.unwrap_or(match algorithm {
            Tmcmc if climate => steps / 5 * 4,
            Tmcmc => steps / 10,
            _ => 0,
        });
        let chain_len = if algorithm == Pmmh { mh_steps } else { steps };
        if matches!(algorithm, Tmcmc | Pmmh) && burnin > chain_len {
            return Err(config_error(format!(
                "--burnin {burnin} exceeds the {chain_len} MH updates"
            )));
        }
        let format = resolve_format(args.format, args.out.as_deref());
        Ok(RunConfig {
            algorithm,
            model: args.model,
            particles,
            steps,
            step_size,
            mh_steps,
            burnin,
            seed: args.seed,
            data: args.data,
            month,
            out: args.out,
            format,
            threads: args.threads,
            json_summary: args.json_summary,
        })
    }

    /// The settings that shape the output, as histogram metadata.
    fn metadata(&self) -> Metadata {
        use Algorithm::*;
        let mut m = Metadata::new();
        m.insert("algorithm".into(), self.algorithm.name().into());
        m.insert("model".into(), self.model.name().into());
        m.insert("seed".into(), self.seed.to_string());
        let mut put = |k: &str, v: usize| {
            m.insert(k.into(), v.to_string());
        };
        match self.algorithm {
            Is => put("particles", self.particles),
            Smc => {
                put("particles", self.particles);
                put("steps", self.steps);
                put("step_size", self.step_size);
            }
            Rmsmc => {
                put("particles", self.particles);
                put("steps", self.steps);
                put("step_size", self.step_size);
                put("mh_steps", self.mh_steps);
            }
            Tmcmc => {
                put("steps", self.steps);
                put("burnin", self.burnin);
            }
            Pmmh => {
                put("particles", self.particles);
                put("steps", self.steps);
                put("step_size", self.step_size);
                put("mh_steps", self.mh_steps);
                put("burnin", self.burnin);
            }
        }
        if self.model == ModelKind::Climate {
            m.insert("month".into(), self.month.to_string());
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuantityStats {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

/// Run statistics. The runtime is kept apart so the JSON form is
/// reproducible.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub algorithm: String,
    pub model: String,
    pub seed: Option<u64>,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ess: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_evidence: Option<f64>,
    pub quantities: Vec<QuantityStats>,
    pub outputs: Vec<PathBuf>,
}

impl Summary {
    fn render(&self, runtime: Duration) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "algorithm: {}", self.algorithm);
        let _ = writeln!(s, "model: {}", self.model);
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed: {seed}");
        }
        let _ = writeln!(s, "runtime: {:.3} s", runtime.as_secs_f64());
        let _ = writeln!(s, "samples: {}", self.samples);
        if let Some(ess) = self.ess {
            let _ = writeln!(s, "ess: {ess:.2}");
        }
        if let Some(rate) = self.acceptance_rate {
            let _ = writeln!(s, "acceptance rate: {rate:.4}");
        }
        if let Some(z) = self.log_evidence {
            let _ = writeln!(s, "log evidence: {z:.6}");
        }
        for q in &self.quantities {
            let _ = writeln!(s, "{}: mean {:.6} std {:.6}", q.name, q.mean, q.std);
        }
        for p in &self.outputs {
            let _ = writeln!(s, "wrote {}", p.display());
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub summary: Summary,
    pub runtime: Duration,
}

/// A model over vectors of named scalars.
struct Built {
    model: Model<Vec<f64>>,
    names: Vec<String>,
}

fn scalar(model: Model<f64>, name: &str) -> Built {
    Built {
        model: model.map(|x| vec![x]),
        names: vec![name.into()],
    }
}

fn block_names() -> Vec<String> {
    (1..=BLOCKS).map(|b| format!("block-{b:02}")).collect()
}

fn build_model(config: &RunConfig) -> Result<Built> {
    Ok(match config.model {
        ModelKind::Chain => scalar(markov_chain_model(), "x"),
        ModelKind::Gauss => scalar(gaussian_mean_model(&GAUSSIAN_MEAN_DATA), "theta"),
        ModelKind::Lgss => scalar(linear_gaussian_model(LinearGaussian::example())?, "x"),
        ModelKind::Coin => Built {
            model: coin_model().map(|b| vec![if b { 1.0 } else { 0.0 }]),
            names: vec!["b".into()],
        },
        ModelKind::Logreg => Built {
            model: logistic_regression_model(synthetic_logistic_data(LOGREG_POINTS, LOGREG_DATA_SEED))?
                .map(|(slope, intercept)| vec![slope, intercept]),
            names: vec!["slope".into(), "intercept".into()],
        },
        ModelKind::Climate => {
            let path = config
                .data
                .as_deref()
                .ok_or_else(|| config_error("the climate model needs --data"))?;
            let obs = dataio::month_observations(path, config.month)?;
            let hp = ClimateHyperParams::from_observations(&obs)?;
            Built {
                model: climate_month_model(obs, hp)?,
                names: block_names(),
            }
        }
    })
}

struct Outcome {
    histogram: Histogram<Vec<f64>>,
    names: Vec<String>,
    ess: Option<f64>,
    acceptance_rate: Option<f64>,
    log_evidence: Option<f64>,
}

fn smc_config(config: &RunConfig) -> SmcConfig {
    SmcConfig::new(config.particles, config.steps, config.step_size)
}

fn infer(config: &RunConfig) -> Result<Outcome> {
    let mut rng = RngState::new(config.seed);
    if config.algorithm == Algorithm::Pmmh {
        return run_pmmh(config, &mut rng);
    }
    let built = build_model(config)?;
    let workers = Workers::new(config.threads)?;
    let (histogram, ess, acceptance_rate, log_evidence) = match config.algorithm {
        Algorithm::Is => {
            let h = importance_sampling_with(&built.model, config.particles, &mut rng, &workers)?;
            let z = h.total_weight().log_value();
            let ess = h.ess();
            (h, Some(ess), None, Some(z))
        }
        Algorithm::Smc | Algorithm::Rmsmc => {
            let out = if config.algorithm == Algorithm::Smc {
                smc_with(&built.model, &smc_config(config), &mut rng, &workers)?
            } else {
                rmsmc_with(&built.model, &smc_config(config), config.mh_steps, &mut rng, &workers)?
            };
            let ess = out.histogram.ess();
            (out.histogram, Some(ess), None, Some(out.diagnostics.log_evidence))
        }
        Algorithm::Tmcmc => {
            let out = tmcmc(&built.model, config.steps, LogWeight::ONE, config.burnin, &mut rng)?;
            (out.histogram(), None, Some(out.acceptance_rate()), None)
        }
        Algorithm::Pmmh => unreachable!("handled above"),
    };
    Ok(Outcome {
        histogram,
        names: built.names,
        ess,
        acceptance_rate,
        log_evidence,
    })
}

fn run_pmmh(config: &RunConfig, rng: &mut RngState) -> Result<Outcome> {
    let pc = PmmhConfig {
        particles: config.particles,
        smc_steps: config.steps,
        step_size: config.step_size,
        mh_steps: config.mh_steps,
        burnin: config.burnin,
    };
    let (out, name) = match config.model {
        ModelKind::Chain => (
            pmmh(&uniform(0.2, 2.0), |sd: &f64| markov_chain_model_with(*sd), &pc, rng)?,
            "transition_sd",
        ),
        ModelKind::Gauss => (
            pmmh(
                &gaussian_mean_prior(),
                |t: &f64| gaussian_mean_likelihood(*t, &GAUSSIAN_MEAN_DATA),
                &pc,
                rng,
            )?,
            "theta",
        ),
        other => {
            return Err(config_error(format!(
                "pmmh does not support the {} model",
                other.name()
            )))
        }
    };
    Ok(Outcome {
        histogram: out.histogram().map(|x| vec![*x]),
        names: vec![name.into()],
        ess: None,
        acceptance_rate: Some(out.acceptance_rate()),
        log_evidence: None,
    })
}

/// Where each quantity's histogram goes.
fn output_paths(out: &Path, model: ModelKind, names: &[String]) -> Vec<PathBuf> {
    match names.len() {
        1 => vec![out.to_path_buf()],
        _ if model == ModelKind::Climate => (1..=names.len()).map(|b| dataio::block_path(out, b)).collect(),
        _ => names.iter().map(|n| dataio::suffixed_path(out, n)).collect(),
    }
}

/// Per-quantity statistics, then one histogram file per quantity.
fn emit(
    outcome: Outcome,
    out: Option<&Path>,
    format: Format,
    model: ModelKind,
    metadata: Metadata,
) -> Result<(Vec<QuantityStats>, Vec<PathBuf>)> {
    let h = outcome.histogram.normalise()?;
    let marginals: Vec<Histogram<f64>> = (0..outcome.names.len()).map(|q| h.map(|v| v[q])).collect();
    let mut stats = Vec::with_capacity(marginals.len());
    for (name, m) in outcome.names.iter().zip(&marginals) {
        let (mean, std) = m.mean_and_std(|x| *x)?;
        stats.push(QuantityStats {
            name: name.clone(),
            mean,
            std,
        });
    }
    let Some(out) = out else {
        return Ok((stats, Vec::new()));
    };
    let paths = output_paths(out, model, &outcome.names);
    for ((path, name), m) in paths.iter().zip(&outcome.names).zip(&marginals) {
        let mut meta = metadata.clone();
        meta.insert("quantity".into(), name.clone());
        write_file(path, |p| dataio::write_histogram(m, p, format, &meta))?;
    }
    Ok((stats, paths))
}

fn write_file(path: &Path, f: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    f(path)
}

fn write_summary(summary: &Summary, path: Option<&Path>) -> Result<()> {
    let Some(path) = path else { return Ok(()) };
    write_file(path, |p| {
        let text = serde_json::to_string_pretty(summary).map_err(|e| config_error(e.to_string()))?;
        std::fs::write(p, text + "\n").map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        })
    })
}

/// Runs one inference job and writes its files.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    let start = Instant::now();
    log::info!(
        "{} on {} with seed {}",
        config.algorithm.name(),
        config.model.name(),
        config.seed
    );
    let outcome = infer(config)?;
    let samples = outcome.histogram.len();
    let (ess, acceptance_rate, log_evidence) = (outcome.ess, outcome.acceptance_rate, outcome.log_evidence);
    let (quantities, outputs) = emit(
        outcome,
        config.out.as_deref(),
        config.format,
        config.model,
        config.metadata(),
    )?;
    let summary = Summary {
        algorithm: config.algorithm.name().into(),
        model: config.model.name().into(),
        seed: Some(config.seed),
        samples,
        ess,
        acceptance_rate,
        log_evidence,
        quantities,
        outputs,
    };
    write_summary(&summary, config.json_summary.as_deref())?;
    Ok(RunReport {
        summary,
        runtime: start.elapsed(),
    })
}

fn run_kalman(args: KalmanArgs) -> Result<String> {
    let p = LinearGaussian::example();
    let post = kalman_filter_exact(&p.a, &p.c, p.q, &p.r, &p.y, p.prior_mean, p.prior_var)?;
    let mut text = String::from("step mean variance\n");
    for (t, (m, v)) in post.means.iter().zip(&post.variances).enumerate() {
        let _ = writeln!(text, "{t} {m:.9} {v:.9}");
    }
    if let Some(out) = args.out.as_deref() {
        let format = resolve_format(args.format, Some(out));
        write_file(out, |path| write_kalman(&post, path, format))?;
        let _ = writeln!(text, "wrote {}", out.display());
    }
    Ok(text)
}

fn write_kalman(post: &crate::oracles::KalmanPosterior, path: &Path, format: Format) -> Result<()> {
    let io = |source: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    match format {
        Format::Json => {
            let text = serde_json::to_string(post).map_err(|e| config_error(e.to_string()))?;
            std::fs::write(path, text + "\n").map_err(io)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_path(path).map_err(|e| io(e.into()))?;
            w.write_record(["step", "mean", "variance"]).map_err(|e| io(e.into()))?;
            for (t, (m, v)) in post.means.iter().zip(&post.variances).enumerate() {
                w.write_record([t.to_string(), m.to_string(), v.to_string()])
                    .map_err(|e| io(e.into()))?;
            }
            w.flush().map_err(io)
        }
    }
}

fn run_enumerate(args: EnumerateArgs) -> Result<String> {
    if args.model == ModelKind::Climate {
        return Err(config_error("the climate model is too large to enumerate"));
    }
    let start = Instant::now();
    let config = RunConfig::resolve(
        Algorithm::Is,
        RunArgs {
            model: args.model,
            particles: None,
            steps: None,
            step_size: None,
            mh_steps: None,
            burnin: None,
            seed: 0,
            data: None,
            month: None,
            out: None,
            format: None,
            threads: 1,
            json_summary: None,
        },
    )?;
    let built = build_model(&config)?;
    let exact = merge_equal(&enumerate_discrete_posterior(&built.model, args.resolution)?);
    let samples = exact.len();
    let mut metadata = Metadata::new();
    metadata.insert("algorithm".into(), "enumerate".into());
    metadata.insert("model".into(), args.model.name().into());
    metadata.insert("resolution".into(), args.resolution.to_string());
    let outcome = Outcome {
        histogram: exact,
        names: built.names,
        ess: None,
        acceptance_rate: None,
        log_evidence: None,
    };
    let format = resolve_format(args.format, args.out.as_deref());
    let (quantities, outputs) = emit(outcome, args.out.as_deref(), format, args.model, metadata)?;
    let summary = Summary {
        algorithm: "enumerate".into(),
        model: args.model.name().into(),
        seed: None,
        samples,
        ess: None,
        acceptance_rate: None,
        log_evidence: None,
        quantities,
        outputs,
    };
    write_summary(&summary, args.json_summary.as_deref())?;
    Ok(summary.render(start.elapsed()))
}

/// Exit code for a failed run.
pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Config(_) | Error::GridTooLarge(_) => EXIT_CONFIG,
        Error::DegenerateHistogram | Error::ParticleDegeneracy { .. } => EXIT_DEGENERACY,
        Error::Io { .. } | Error::Parse { .. } | Error::NonMonotoneDates { .. } | Error::CoverageGap(_) => EXIT_IO,
        _ => EXIT_FAILURE,
    }
}

fn execute(command: Command) -> Result<String> {
    let (algorithm, args) = match command {
        Command::Is(a) => (Algorithm::Is, a),
        Command::Smc(a) => (Algorithm::Smc, a),
        Command::Tmcmc(a) => (Algorithm::Tmcmc, a),
        Command::Rmsmc(a) => (Algorithm::Rmsmc, a),
        Command::Pmmh(a) => (Algorithm::Pmmh, a),
        Command::Oracle(OracleCommand::Kalman(a)) => return run_kalman(a),
        Command::Oracle(OracleCommand::Enumerate(a)) => return run_enumerate(a),
    };
    let config = RunConfig::resolve(algorithm, args)?;
    let report = run(&config)?;
    Ok(report.summary.render(report.runtime))
}

/// Parses `args` (program name first), runs the command, prints the summary
/// and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(text) => {
            print!("{text}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("inferkit: {e}");
            exit_code(&e)
        }
    }
}
