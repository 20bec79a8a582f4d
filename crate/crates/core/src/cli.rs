//! Command-line front end. Exit codes: 0 success, 2 validation error, 1 runtime error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::error::{invalid, Result};
use crate::eval::{self, ExperimentConfig, RateCache, RateMetric, ScheduleChoice};
use crate::io;
use crate::metrics::VxConfig;
use crate::rate::RateTable;
use crate::samplers::SamplerKind;
use crate::schedule::MetricWeight;
use crate::toy::PointDataset;

#[derive(Debug, Parser)]
#[command(name = "crs", version, about = "Constant rate noise schedules for diffusion models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure a rate function on a dataset and write it as a table.
    ComputeRate(ComputeRateArgs),
    /// Solve a constant-rate schedule from one or more rate tables.
    SolveSchedule(SolveScheduleArgs),
    /// Draw samples along a schedule.
    Sample(SampleArgs),
    /// Score every (schedule, sampler, NFE) cell of an experiment.
    Evaluate(ExperimentArgs),
    /// Two-stage search over metric weights and exponents.
    Sweep(ExperimentArgs),
    /// Diffused density matrix of a 1-D dataset.
    ToyFigure(ToyFigureArgs),
}

#[derive(Debug, Args)]
pub struct ComputeRateArgs {
    /// Builtin dataset name or CSV path.
    #[arg(long, default_value = "toy3")]
    pub dataset: String,
    /// One of v_x, v_eps, v_klub, v_fid.
    #[arg(long, default_value = "v_x")]
    pub metric: String,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha_start: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub alpha_end: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output table (.csv or .json); standard errors go to `<stem>.meta.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveScheduleArgs {
    /// Rate table file; repeat to combine several.
    #[arg(long = "rate", required = true)]
    pub rates: Vec<PathBuf>,
    /// Weight per rate table (default: 1 for a single table, equal otherwise).
    #[arg(long = "weight")]
    pub weights: Vec<f64>,
    /// Exponent per rate table (default 1).
    #[arg(long = "xi")]
    pub xis: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 0.01)]
    pub alpha_min: f64,
    #[arg(long, default_value_t = 1001)]
    pub knots: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Optional JSON experiment config supplying dataset, metrics and bounds.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<String>,
    /// `uniform`, `crs`, `file:<path>` or a zoo schedule name.
    #[arg(long, default_value = "uniform")]
    pub schedule: String,
    /// `ddim:<eta>` or `dpmpp2m`.
    #[arg(long, default_value = "ddim:0")]
    pub sampler: String,
    #[arg(long, default_value_t = 10)]
    pub nfe: usize,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long = "schedule")]
    pub schedules: Vec<String>,
    #[arg(long = "sampler")]
    pub samplers: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub nfe: Vec<usize>,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ToyFigureArgs {
    #[arg(long, default_value = "toy3")]
    pub dataset: String,
    #[arg(long, default_value_t = 100)]
    pub alpha_points: usize,
    #[arg(long, default_value_t = 0.999)]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 2048)]
    pub x_points: usize,
    #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
    pub x_min: f64,
    #[arg(long, default_value_t = 5.0)]
    pub x_max: f64,
    #[arg(long, default_value = "out")]
    pub output_dir: PathBuf,
}

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = load_config(self.config.as_ref())?;
        if let Some(d) = &self.dataset {
            cfg.dataset = d.clone();
        }
        if !self.schedules.is_empty() {
            cfg.schedules = self.schedules.clone();
        }
        if !self.samplers.is_empty() {
            cfg.samplers = self.samplers.clone();
        }
        if !self.nfe.is_empty() {
            cfg.nfe = self.nfe.clone();
        }
        if let Some(n) = self.n_samples {
            cfg.n_samples = n;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.output_dir {
            cfg.output_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn compute_rate(args: &ComputeRateArgs) -> Result<()> {
    let metric: RateMetric = args.metric.parse()?;
    let dataset = PointDataset::resolve(&args.dataset)?;
    let config = VxConfig {
        steps: args.steps,
        samples: args.samples,
        alpha_start: args.alpha_start,
        alpha_end: args.alpha_end,
    };
    let estimate = eval::compute_rate(&dataset, metric, &config, args.seed)?;
    let side = eval::write_rate(&args.out, &estimate, metric, &config, args.seed)?;
    info!(
        "wrote {} knots to {} (standard errors in {})",
        estimate.table.len(),
        args.out.display(),
        side.display()
    );
    Ok(())
}

fn solve_schedule(args: &SolveScheduleArgs) -> Result<()> {
    let n = args.rates.len();
    let weights = match args.weights.len() {
        0 => vec![1.0 / n as f64; n],
        k if k == n => args.weights.clone(),
        k => return Err(invalid!("{k} weights given for {n} rate tables")),
    };
    let xis = match args.xis.len() {
        0 => vec![1.0; n],
        k if k == n => args.xis.clone(),
        k => return Err(invalid!("{k} exponents given for {n} rate tables")),
    };
    let mut rates = Vec::with_capacity(n);
    for ((path, w), xi) in args.rates.iter().zip(weights).zip(xis) {
        rates.push((RateTable::load(path)?, MetricWeight::new(w, xi)?));
    }
    let schedule = eval::schedule_from_rates(&rates, args.alpha_max, args.alpha_min, args.knots)?;
    schedule.save(&args.out)?;
    info!("wrote schedule with {} knots to {}", args.knots, args.out.display());
    Ok(())
}

fn sample(args: &SampleArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_ref())?;
    if let Some(d) = &args.dataset {
        cfg.dataset = d.clone();
    }
    if let Some(n) = args.n_samples {
        cfg.n_samples = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    if args.nfe == 0 {
        return Err(invalid!("NFE must be at least 1"));
    }
    let sampler: SamplerKind = args.sampler.parse()?;
    let choice: ScheduleChoice = args.schedule.parse()?;
    let dataset = cfg.dataset()?;
    let schedule = eval::resolve_schedule(&choice, &cfg, &dataset, &mut RateCache::default())?;
    let samples = eval::draw_samples(&dataset, &schedule, sampler, args.nfe, cfg.n_samples, cfg.seed)?;
    io::write_string(&args.out, &eval::samples_to_csv(&samples, dataset.dim()))?;
    info!("wrote {} samples to {}", cfg.n_samples, args.out.display());
    Ok(())
}

fn evaluate(args: &ExperimentArgs) -> Result<()> {
    let cfg = args.config()?;
    let report = eval::evaluate(&cfg)?;
    report.save(&cfg.output_dir, "evaluate")?;
    for row in &report.rows {
        println!(
            "{:<20} {:<10} nfe {:>5}  {} {:.6} ± {:.6}",
            row.schedule, row.sampler, row.nfe, report.header.distance, row.distance, row.std_error
        );
    }
    Ok(())
}

fn sweep(args: &ExperimentArgs) -> Result<()> {
    let cfg = args.config()?;
    let report = eval::sweep(&cfg)?;
    report.save(&cfg.output_dir, "sweep")?;
    for row in &report.rows {
        println!(
            "nfe {:>5} stage {} w [{}] xi [{}]  {:.6} ± {:.6}  rank {}",
            row.nfe, row.stage, row.weights, row.xis, row.distance, row.std_error, row.rank
        );
    }
    Ok(())
}

fn toy_figure(args: &ToyFigureArgs) -> Result<()> {
    if args.alpha_points < 2 || args.x_points < 3 || !(args.x_min < args.x_max) {
        return Err(invalid!("need >= 2 alpha points, >= 3 x points and x_min < x_max"));
    }
    if !(0.0 < args.alpha_max && args.alpha_max < 1.0) {
        return Err(invalid!("alpha_max must lie in (0, 1)"));
    }
    let dataset = PointDataset::resolve(&args.dataset)?;
    let alphas = eval::linspace(0.0, args.alpha_max, args.alpha_points);
    let xs = eval::linspace(args.x_min, args.x_max, args.x_points);
    let fig = eval::toy_figure(&dataset, &alphas, &xs)?;
    fig.save(&args.output_dir)?;
    info!(
        "mode counts from alpha 0 to {}: {} -> {}",
        args.alpha_max,
        fig.mode_counts[0],
        fig.mode_counts[fig.mode_counts.len() - 1]
    );
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::ComputeRate(a) => compute_rate(a),
        Command::SolveSchedule(a) => solve_schedule(a),
        Command::Sample(a) => sample(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a),
        Command::ToyFigure(a) => toy_figure(a),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
