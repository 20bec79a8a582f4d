//! Sample-quality evaluation, hyperparameter sweeps and toy-figure data.
//!
//! Image FID has no desk-scale counterpart here. Sample sets are compared to
//! the dataset they were drawn for with the exact 1-D 2-Wasserstein distance
//! (d = 1) or the Fréchet distance between moment fits (d > 1).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::io;
use crate::metrics::{self, RateEstimate, RateSidecar, VxConfig};
use crate::rate::RateTable;
use crate::rng;
use crate::samplers::{self, SamplerKind, SamplerSpec};
use crate::schedule::{combine_rates, discretize, solve_schedule, MetricWeight, NoiseSchedule};
use crate::toy::{density_mode_count, diffused_density, PointDataset, PosteriorMean, TOY3_POINTS};
use crate::zoo::ZooSchedule;

/// Stated in every report: what the distance column measures.
pub const PROTOCOL: &str = "distance to the dataset: exact 2-Wasserstein for d = 1, \
Fréchet distance of moment fits for d > 1; a desk-scale stand-in for FID";

/// 2-Wasserstein distance between two 1-D empirical distributions.
///
/// Equal sizes pair sorted order statistics; unequal sizes integrate the
/// squared difference of the two empirical quantile functions exactly.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid!("Wasserstein distance needs nonempty samples"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(invalid!("samples must be finite"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    if na == nb {
        let s: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        return Ok((s / na as f64).sqrt());
    }
    let (mut i, mut j) = (0, 0);
    let mut prev = 0.0;
    let mut acc = 0.0;
    while i < na && j < nb {
        // quantile breakpoints (i+1)/na and (j+1)/nb, compared exactly
        let (ka, kb) = ((i + 1) * nb, (j + 1) * na);
        let u = ka.min(kb) as f64 / (na * nb) as f64;
        acc += (u - prev) * (a[i] - b[j]) * (a[i] - b[j]);
        prev = u;
        if ka <= kb {
            i += 1;
        }
        if kb <= ka {
            j += 1;
        }
    }
    Ok(acc.max(0.0).sqrt())
}

fn moments(rows: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = (rows.len() / dim) as f64;
    let mut mean = vec![0.0; dim];
    for r in rows.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut cov = vec![0.0; dim * dim];
    for r in rows.chunks_exact(dim) {
        for i in 0..dim {
            for j in 0..dim {
                cov[i * dim + j] += (r[i] - mean[i]) * (r[j] - mean[j]) / n;
            }
        }
    }
    (mean, cov)
}

/// Fréchet distance between the (population) moment fits of two row-major sample sets.
pub fn moment_frechet(a: &[f64], b: &[f64], dim: usize) -> Result<f64> {
    if dim == 0 || a.is_empty() || b.is_empty() || !a.len().is_multiple_of(dim) || !b.len().is_multiple_of(dim) {
        return Err(invalid!("sample sets must be nonempty multiples of dimension {dim}"));
    }
    let (ma, ca) = moments(a, dim);
    let (mb, cb) = moments(b, dim);
    metrics::frechet_distance(&ma, &ca, &mb, &cb)
}

/// [`wasserstein_1d`] for `dim = 1`, [`moment_frechet`] otherwise.
pub fn sample_distance(samples: &[f64], reference: &[f64], dim: usize) -> Result<f64> {
    if dim == 1 {
        wasserstein_1d(samples, reference)
    } else {
        moment_frechet(samples, reference, dim)
    }
}

/// Name of the distance used for dimension `dim`.
pub fn distance_name(dim: usize) -> &'static str {
    if dim == 1 {
        "w2"
    } else {
        "frechet-moments"
    }
}

/// Bootstrap standard error of [`sample_distance`] over resampled `samples`.
pub fn bootstrap_std_error(
    samples: &[f64],
    reference: &[f64],
    dim: usize,
    resamples: usize,
    seed: u64,
) -> Result<f64> {
    if resamples < 2 {
        return Ok(f64::NAN);
    }
    let n = samples.len() / dim;
    let stats: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, b as u64);
            let mut draw = Vec::with_capacity(samples.len());
            for _ in 0..n {
                let k = r.random_range(0..n);
                draw.extend_from_slice(&samples[k * dim..(k + 1) * dim]);
            }
            sample_distance(&draw, reference, dim)
        })
        .collect::<Result<_>>()?;
    let m = stats.iter().sum::<f64>() / resamples as f64;
    let var = stats.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / (resamples - 1) as f64;
    Ok(var.sqrt())
}

/// A rate metric addressable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RateMetric {
    Vx,
    Veps,
    Vklub,
    Vfid,
}

impl FromStr for RateMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "v_x" => Ok(RateMetric::Vx),
            "v_eps" => Ok(RateMetric::Veps),
            "v_klub" => Ok(RateMetric::Vklub),
            "v_fid" => Ok(RateMetric::Vfid),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }
}

impl fmt::Display for RateMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateMetric::Vx => "v_x",
            RateMetric::Veps => "v_eps",
            RateMetric::Vklub => "v_klub",
            RateMetric::Vfid => "v_fid",
        })
    }
}

/// Measures `metric` on `dataset` with the Bayes-optimal predictor.
///
/// All metrics use the grid of `config`; `v_fid` uses `config.samples`
/// forward chains for its moment fits.
pub fn compute_rate(
    dataset: &PointDataset,
    metric: RateMetric,
    config: &VxConfig,
    seed: u64,
) -> Result<RateEstimate> {
    let predictor = PosteriorMean::new(dataset.clone());
    match metric {
        RateMetric::Vx => metrics::compute_v_x(dataset, &predictor, config, seed),
        RateMetric::Veps => metrics::compute_v_eps(dataset, &predictor, config, seed),
        RateMetric::Vklub => metrics::compute_v_klub(dataset, &predictor, config, seed),
        RateMetric::Vfid => {
            config.validate()?;
            metrics::compute_v_fid(dataset, &config.grid(), config.samples, seed, None)
        }
    }
}

/// Path of the metadata file written next to a rate table.
pub fn sidecar_path(table_path: &Path) -> PathBuf {
    table_path.with_extension("meta.json")
}

/// Writes a rate table and its standard-error sidecar.
pub fn write_rate(
    path: &Path,
    estimate: &RateEstimate,
    metric: RateMetric,
    config: &VxConfig,
    seed: u64,
) -> Result<PathBuf> {
    estimate.table.save(path)?;
    let sidecar = RateSidecar {
        metric: metric.to_string(),
        seed,
        config: serde_json::to_value(config)?,
        alphas: estimate.table.alphas().to_vec(),
        std_errors: estimate.std_errors.clone(),
    };
    let side = sidecar_path(path);
    io::write_string(&side, &serde_json::to_string_pretty(&sidecar)?)?;
    Ok(side)
}

/// A metric with its combination weight and exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub metric: String,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default = "one")]
    pub xi: f64,
}

fn one() -> f64 {
    1.0
}

/// Solves a schedule from one rate (with exponent `xi`) or from a weighted
/// combination of several.
pub fn schedule_from_rates(
    rates: &[(RateTable, MetricWeight)],
    alpha_max: f64,
    alpha_min: f64,
    n_knots: usize,
) -> Result<NoiseSchedule> {
    match rates {
        [] => Err(invalid!("no rate tables given")),
        [(table, w)] => {
            if (w.weight - 1.0).abs() > crate::schedule::WEIGHT_SUM_TOLERANCE {
                return Err(invalid!("a single rate must have weight 1, got {}", w.weight));
            }
            solve_schedule(table, w.xi, alpha_max, alpha_min, n_knots)
        }
        _ => {
            let combined = combine_rates(rates, alpha_min, alpha_max)?;
            solve_schedule(&combined, 1.0, alpha_max, alpha_min, n_knots)
        }
    }
}

/// Stage grids of the two-step `(w, xi)` search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    /// Weights of the first metric; the second gets `1 - w`.
    pub weights: Vec<f64>,
    pub xis: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            weights: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            xis: vec![0.5, 1.0, 1.2, 1.4],
        }
    }
}

/// A single JSON document describing an experiment; CLI flags override fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Builtin dataset name or CSV path.
    pub dataset: String,
    /// Rates defining the `crs` schedule.
    pub metrics: Vec<MetricSpec>,
    /// `uniform`, `crs`, `file:<path>` or a zoo name.
    pub schedules: Vec<String>,
    pub samplers: Vec<String>,
    pub nfe: Vec<usize>,
    pub n_samples: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub alpha_max: f64,
    pub alpha_min: f64,
    pub schedule_knots: usize,
    /// Grid and trajectory count of rate measurements.
    pub rate: VxConfig,
    pub bootstrap: usize,
    pub sweep: SweepGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: "two-point".into(),
            metrics: vec![MetricSpec {
                metric: "v_x".into(),
                weight: 1.0,
                xi: 1.0,
            }],
            schedules: vec!["uniform".into(), "crs".into()],
            samplers: vec!["ddim:0".into()],
            nfe: vec![5, 10, 100],
            n_samples: 10_000,
            seed: 0,
            output_dir: PathBuf::from("out"),
            alpha_max: 1.0,
            alpha_min: 0.01,
            schedule_knots: 1001,
            rate: VxConfig::default(),
            bootstrap: 200,
            sweep: SweepGrid::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&io::read_to_string(path)?)
            .map_err(|e| invalid!("config {}: {e}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nfe.is_empty() || self.nfe.contains(&0) {
            return Err(invalid!("NFE values must be at least 1"));
        }
        if self.n_samples < 1 {
            return Err(invalid!("n_samples must be at least 1"));
        }
        if !(0.0 <= self.alpha_min && self.alpha_min < self.alpha_max && self.alpha_max <= 1.0) {
            return Err(invalid!("need 0 <= alpha_min < alpha_max <= 1"));
        }
        for s in &self.samplers {
            s.parse::<SamplerKind>()?;
        }
        for s in &self.schedules {
            s.parse::<ScheduleChoice>()?;
        }
        for m in &self.metrics {
            m.metric.parse::<RateMetric>()?;
            MetricWeight::new(m.weight, m.xi)?;
        }
        self.rate.validate()
    }

    /// SHA-256 of the canonical JSON form, leaving out `output_dir`.
    pub fn hash(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
        }
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(&value)?)))
    }

    pub fn dataset(&self) -> Result<PointDataset> {
        PointDataset::resolve(&self.dataset)
    }
}

/// A sampling schedule named in a config.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleChoice {
    /// Uniform spacing in alpha.
    Uniform,
    /// Constant-rate schedule from the configured metrics.
    Crs,
    File(PathBuf),
    Zoo(ZooSchedule),
}

impl FromStr for ScheduleChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "uniform" => Ok(ScheduleChoice::Uniform),
            "crs" => Ok(ScheduleChoice::Crs),
            _ => match s.strip_prefix("file:") {
                Some(p) => Ok(ScheduleChoice::File(PathBuf::from(p))),
                None => Ok(ScheduleChoice::Zoo(s.parse()?)),
            },
        }
    }
}

/// Measured rates of an experiment, computed once per metric.
#[derive(Debug, Default)]
pub struct RateCache {
    rates: BTreeMap<RateMetric, RateTable>,
}

impl RateCache {
    pub fn get(&mut self, config: &ExperimentConfig, dataset: &PointDataset, metric: RateMetric) -> Result<RateTable> {
        if let Some(t) = self.rates.get(&metric) {
            return Ok(t.clone());
        }
        info!("measuring {metric} on {}", config.dataset);
        let t = compute_rate(dataset, metric, &config.rate, config.seed)?.table;
        self.rates.insert(metric, t.clone());
        Ok(t)
    }

    /// Solves the schedule for `(metric, weight, xi)` triples.
    pub fn schedule(
        &mut self,
        config: &ExperimentConfig,
        dataset: &PointDataset,
        specs: &[(RateMetric, f64, f64)],
    ) -> Result<NoiseSchedule> {
        let mut rates = Vec::with_capacity(specs.len());
        for &(m, w, xi) in specs {
            rates.push((self.get(config, dataset, m)?, MetricWeight::new(w, xi)?));
        }
        schedule_from_rates(&rates, config.alpha_max, config.alpha_min, config.schedule_knots)
    }
}

fn metric_triples(config: &ExperimentConfig) -> Result<Vec<(RateMetric, f64, f64)>> {
    config
        .metrics
        .iter()
        .map(|m| Ok((m.metric.parse()?, m.weight, m.xi)))
        .collect()
}

/// A schedule ready to produce sampling grids.
#[derive(Debug, Clone)]
pub enum ResolvedSchedule {
    Continuous(NoiseSchedule),
    Zoo(ZooSchedule),
}

impl ResolvedSchedule {
    /// Decreasing alphas with `nfe` intervals.
    pub fn sampling_alphas(&self, nfe: usize) -> Result<Vec<f64>> {
        match self {
            ResolvedSchedule::Continuous(s) => discretize(s, nfe, false),
            ResolvedSchedule::Zoo(z) => z.sampling_alphas(nfe),
        }
    }
}

pub fn resolve_schedule(
    choice: &ScheduleChoice,
    config: &ExperimentConfig,
    dataset: &PointDataset,
    cache: &mut RateCache,
) -> Result<ResolvedSchedule> {
    Ok(match choice {
        ScheduleChoice::Uniform => {
            ResolvedSchedule::Continuous(NoiseSchedule::linear(config.alpha_max, config.alpha_min)?)
        }
        ScheduleChoice::Crs => {
            ResolvedSchedule::Continuous(cache.schedule(config, dataset, &metric_triples(config)?)?)
        }
        ScheduleChoice::File(p) => ResolvedSchedule::Continuous(NoiseSchedule::load(p)?),
        ScheduleChoice::Zoo(z) => ResolvedSchedule::Zoo(z.clone()),
    })
}

/// Samples from `dataset`'s Bayes-optimal predictor along a schedule.
pub fn draw_samples(
    dataset: &PointDataset,
    schedule: &ResolvedSchedule,
    sampler: SamplerKind,
    nfe: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let predictor = PosteriorMean::new(dataset.clone());
    let spec = SamplerSpec::new(sampler, schedule.sampling_alphas(nfe)?)?;
    samplers::sample(&predictor, &spec, n_samples, seed)
}

/// Distance of a sample set to the dataset with its bootstrap standard error.
pub fn score_samples(
    samples: &[f64],
    dataset: &PointDataset,
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let d = dataset.dim();
    let dist = sample_distance(samples, dataset.as_flat(), d)?;
    let se = bootstrap_std_error(samples, dataset.as_flat(), d, resamples, seed ^ 0x5eed_b007)?;
    Ok((dist, se))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub schedule: String,
    pub sampler: String,
    pub nfe: usize,
    pub distance: f64,
    pub std_error: f64,
}

/// Provenance fields shared by all reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub dataset: String,
    pub distance: String,
    pub protocol: String,
}

impl ReportHeader {
    fn new(config: &ExperimentConfig, dim: usize) -> Result<Self> {
        Ok(Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash()?,
            seed: config.seed,
            dataset: config.dataset.clone(),
            distance: distance_name(dim).to_string(),
            protocol: PROTOCOL.to_string(),
        })
    }

    fn csv_preamble(&self) -> String {
        format!(
            "# crs {} config {} seed {} dataset {} distance {}\n# {}\n",
            self.version, self.config_hash, self.seed, self.dataset, self.distance, self.protocol
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub header: ReportHeader,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        Ok(self.header.csv_preamble() + &body)
    }

    /// Writes `<stem>.csv` and `<stem>.json` under `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        io::write_string(&dir.join(format!("{stem}.csv")), &self.to_csv_string()?)?;
        io::write_string(&dir.join(format!("{stem}.json")), &serde_json::to_string_pretty(self)?)
    }
}

/// Scores every (schedule, sampler, NFE) cell of `config`.
///
/// Every cell samples with the same seed, so schedules are compared on
/// common initial noise.
pub fn evaluate(config: &ExperimentConfig) -> Result<EvalReport> {
    config.validate()?;
    let dataset = config.dataset()?;
    let mut cache = RateCache::default();
    let mut schedules = Vec::new();
    for name in &config.schedules {
        let resolved = resolve_schedule(&name.parse()?, config, &dataset, &mut cache)?;
        schedules.push((name.clone(), resolved));
    }
    let samplers: Vec<SamplerKind> = config
        .samplers
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_>>()?;
    let mut cells = Vec::new();
    for (name, sched) in &schedules {
        for &sampler in &samplers {
            for &nfe in &config.nfe {
                cells.push((name, sched, sampler, nfe));
            }
        }
    }
    let rows = cells
        .par_iter()
        .map(|&(name, sched, sampler, nfe)| {
            let samples = draw_samples(&dataset, sched, sampler, nfe, config.n_samples, config.seed)?;
            let (distance, std_error) = score_samples(&samples, &dataset, config.bootstrap, config.seed)?;
            Ok(EvalRow {
                schedule: name.clone(),
                sampler: sampler.to_string(),
                nfe,
                distance,
                std_error,
            })
        })
        .collect::<Result<_>>()?;
    Ok(EvalReport {
        header: ReportHeader::new(config, dataset.dim())?,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub nfe: usize,
    pub stage: u8,
    /// Weight of each configured metric, in order.
    pub weights: String,
    pub xis: String,
    pub distance: f64,
    pub std_error: f64,
    /// 1 for the best cell of its NFE.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub header: ReportHeader,
    pub sampler: String,
    pub metrics: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        Ok(self.header.csv_preamble() + &body)
    }

    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        io::write_string(&dir.join(format!("{stem}.csv")), &self.to_csv_string()?)?;
        io::write_string(&dir.join(format!("{stem}.json")), &serde_json::to_string_pretty(self)?)
    }
}

fn join(v: &[f64]) -> String {
    // rounding hides float noise such as 1 - 0.9 = 0.09999999999999998
    v.iter()
        .map(|x| format!("{}", (x * 1e12).round() / 1e12))
        .collect::<Vec<_>>()
        .join(";")
}

/// Two-stage search over combination weights, then exponents, per NFE.
///
/// Stage 1 tries every weight in the grid with all exponents 1. Stage 2 keeps
/// the stage-1 winner's weights and tries every exponent pair. A stage-2
/// cell identical to an evaluated stage-1 cell is not repeated.
pub fn sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    let dataset = config.dataset()?;
    let metrics: Vec<RateMetric> = config
        .metrics
        .iter()
        .map(|m| m.metric.parse())
        .collect::<Result<_>>()?;
    let sampler: SamplerKind = config
        .samplers
        .first()
        .ok_or_else(|| invalid!("sweep needs a sampler"))?
        .parse()?;
    let grid = &config.sweep;
    if grid.weights.is_empty() || grid.xis.is_empty() {
        return Err(invalid!("sweep grids must be nonempty"));
    }
    let stage1: Vec<Vec<f64>> = match metrics.len() {
        1 => vec![vec![1.0]],
        2 => grid.weights.iter().map(|&w| vec![w, 1.0 - w]).collect(),
        n => return Err(invalid!("sweep combines one or two metrics, got {n}")),
    };
    let xi_cells: Vec<Vec<f64>> = match metrics.len() {
        1 => grid.xis.iter().map(|&x| vec![x]).collect(),
        _ => grid
            .xis
            .iter()
            .flat_map(|&a| grid.xis.iter().map(move |&b| vec![a, b]))
            .collect(),
    };
    let mut cache = RateCache::default();
    for &m in &metrics {
        cache.get(config, &dataset, m)?;
    }
    let unit_xi = vec![1.0; metrics.len()];

    let mut rows = Vec::new();
    for &nfe in &config.nfe {
        let mut eval_cell = |weights: &[f64], xis: &[f64], stage: u8| -> Result<SweepRow> {
            let specs: Vec<_> = metrics
                .iter()
                .zip(weights)
                .zip(xis)
                .map(|((&m, &w), &x)| (m, w, x))
                .collect();
            let sched = ResolvedSchedule::Continuous(cache.schedule(config, &dataset, &specs)?);
            let samples = draw_samples(&dataset, &sched, sampler, nfe, config.n_samples, config.seed)?;
            let (distance, std_error) = score_samples(&samples, &dataset, config.bootstrap, config.seed)?;
            Ok(SweepRow {
                nfe,
                stage,
                weights: join(weights),
                xis: join(xis),
                distance,
                std_error,
                rank: 0,
            })
        };
        let mut cells: Vec<SweepRow> = Vec::new();
        for w in &stage1 {
            cells.push(eval_cell(w, &unit_xi, 1)?);
        }
        let best = cells
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.distance.total_cmp(&b.1.distance))
            .map(|(i, _)| i)
            .expect("stage 1 is nonempty");
        let best_weights = stage1[best].clone();
        for xis in &xi_cells {
            if *xis == unit_xi {
                continue;
            }
            cells.push(eval_cell(&best_weights, xis, 2)?);
        }
        let mut order: Vec<usize> = (0..cells.len()).collect();
        order.sort_by(|&a, &b| cells[a].distance.total_cmp(&cells[b].distance));
        for (rank, &i) in order.iter().enumerate() {
            cells[i].rank = rank + 1;
        }
        rows.extend(cells);
    }
    Ok(SweepReport {
        header: ReportHeader::new(config, dataset.dim())?,
        sampler: sampler.to_string(),
        metrics: metrics.iter().map(|m| m.to_string()).collect(),
        rows,
    })
}

/// Diffused densities on an `(alpha, x)` grid of a 1-D dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub alphas: Vec<f64>,
    pub xs: Vec<f64>,
    /// Row `i` holds `q_alpha_i(xs)`.
    pub rows: Vec<Vec<f64>>,
}

impl DensityMatrix {
    pub fn compute(dataset: &PointDataset, alphas: &[f64], xs: &[f64]) -> Result<Self> {
        if dataset.dim() != 1 {
            return Err(invalid!("density matrices need a 1-D dataset"));
        }
        let rows = alphas
            .par_iter()
            .map(|&a| xs.iter().map(|&x| diffused_density(dataset, a, &[x])).collect())
            .collect::<Result<_>>()?;
        Ok(Self {
            alphas: alphas.to_vec(),
            xs: xs.to_vec(),
            rows,
        })
    }

    /// Header `alpha,<x_0>,...`, then one row per alpha.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("alpha");
        for x in &self.xs {
            s.push_str(&format!(",{x:?}"));
        }
        s.push('\n');
        for (a, row) in self.alphas.iter().zip(&self.rows) {
            s.push_str(&format!("{a:?}"));
            for v in row {
                s.push_str(&format!(",{v:?}"));
            }
            s.push('\n');
        }
        s
    }
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let mut v: Vec<f64> = (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect();
            v[n - 1] = hi;
            v
        }
    }
}

/// True when counts start at 1, end at 3, never exceed 3 and never decrease.
pub fn is_one_to_three_transition(counts: &[usize]) -> bool {
    counts.first() == Some(&1)
        && counts.last() == Some(&3)
        && counts.iter().all(|&c| (1..=3).contains(&c))
        && counts.windows(2).all(|w| w[0] <= w[1])
}

/// Density matrix and per-row mode counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyFigure {
    pub density: DensityMatrix,
    pub mode_counts: Vec<usize>,
}

/// Builds the toy figure. For the three-point toy dataset the 1 → 3 mode
/// transition is checked and a failure is an error.
pub fn toy_figure(dataset: &PointDataset, alphas: &[f64], xs: &[f64]) -> Result<ToyFigure> {
    let density = DensityMatrix::compute(dataset, alphas, xs)?;
    let mode_counts = alphas
        .iter()
        .map(|&a| density_mode_count(dataset, a, xs))
        .collect::<Result<Vec<_>>>()?;
    let is_toy3 = dataset.dim() == 1 && dataset.as_flat() == TOY3_POINTS;
    if is_toy3 && !is_one_to_three_transition(&mode_counts) {
        return Err(Error::Numerical(format!(
            "toy3 mode counts do not go from 1 to 3: {mode_counts:?}"
        )));
    }
    Ok(ToyFigure {
        density,
        mode_counts,
    })
}

impl ToyFigure {
    /// Writes `density.csv` and `modes.csv` under `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        io::write_string(&dir.join("density.csv"), &self.density.to_csv_string())?;
        let mut modes = String::from("alpha,modes\n");
        for (a, c) in self.density.alphas.iter().zip(&self.mode_counts) {
            modes.push_str(&format!("{a:?},{c}\n"));
        }
        io::write_string(&dir.join("modes.csv"), &modes)
    }
}

/// Samples as CSV with header `x0,x1,...`.
pub fn samples_to_csv(samples: &[f64], dim: usize) -> String {
    let mut s = (0..dim).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",");
    s.push('\n');
    for row in samples.chunks(dim) {
        s.push_str(&row.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn w2_identities() {
        let a = [0.3, -1.0, 2.0, 0.0];
        assert_eq!(wasserstein_1d(&a, &a).unwrap(), 0.0);
        let shifted: Vec<f64> = a.iter().map(|x| x + 0.7).collect();
        assert!((wasserstein_1d(&a, &shifted).unwrap() - 0.7).abs() < 1e-12);
        assert!(wasserstein_1d(&[], &a).is_err());
    }

    #[test]
    fn w2_unequal_sizes_matches_replication() {
        // replicating each point of b twice gives the same distribution
        let a = [0.1, 0.5, 0.9, 1.7];
        let b = [0.0, 1.0];
        let b2 = [0.0, 0.0, 1.0, 1.0];
        let exact = wasserstein_1d(&a, &b).unwrap();
        assert!((exact - wasserstein_1d(&a, &b2).unwrap()).abs() < 1e-15);
        let c = [0.2, 0.4, 0.6];
        // quantile pieces: [0,1/4): .1-.2, [1/4,1/3): .5-.2, [1/3,1/2): .5-.4,
        // [1/2,2/3): .9-.4, [2/3,3/4): .9-.6, [3/4,1]: 1.7-.6
        let want: f64 = 0.25 * 0.01 + (1.0 / 12.0) * 0.09 + (1.0 / 6.0) * 0.01
            + (1.0 / 6.0) * 0.25 + (1.0 / 12.0) * 0.09 + 0.25 * 1.21;
        assert!((wasserstein_1d(&a, &c).unwrap() - want.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn parse_names() {
        assert_eq!("v_fid".parse::<RateMetric>().unwrap(), RateMetric::Vfid);
        assert!(matches!("v_y".parse::<RateMetric>(), Err(Error::UnknownName(_))));
        assert_eq!("crs".parse::<ScheduleChoice>().unwrap(), ScheduleChoice::Crs);
        assert!(matches!(
            "edm".parse::<ScheduleChoice>().unwrap(),
            ScheduleChoice::Zoo(ZooSchedule::Edm(_))
        ));
        assert!("nope".parse::<ScheduleChoice>().is_err());
    }

    #[test]
    fn config_json_round_trip_and_hash() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
        let partial: ExperimentConfig = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(partial.seed, 3);
        assert_ne!(partial.hash().unwrap(), cfg.hash().unwrap());
    }

    #[test]
    fn config_validation() {
        let bad = ExperimentConfig { nfe: vec![0], ..Default::default() };
        assert!(bad.validate().unwrap_err().is_validation());
        let bad = ExperimentConfig { samplers: vec!["euler".into()], ..Default::default() };
        assert!(bad.validate().unwrap_err().is_validation());
    }

    #[test]
    fn transition_rule() {
        assert!(is_one_to_three_transition(&[1, 1, 2, 3, 3]));
        assert!(is_one_to_three_transition(&[1, 3]));
        assert!(!is_one_to_three_transition(&[1, 2, 1, 3]));
        assert!(!is_one_to_three_transition(&[1, 2]));
    }

    #[test]
    fn single_rate_must_have_unit_weight() {
        let t = RateTable::constant(1.0).unwrap();
        let w = MetricWeight::new(0.5, 1.0).unwrap();
        assert!(schedule_from_rates(&[(t, w)], 1.0, 0.0, 11).is_err());
    }
}
