//! Exact desk-scale diffusion over empirical point datasets.
//!
//! The diffused density of an empirical dataset is a Gaussian mixture, and
//! the Bayes-optimal data prediction is a softmax-weighted mean of the data
//! points. Both are computed in closed form here and stand in for a trained
//! network everywhere else in the crate.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::io;
use crate::rng;

/// Below this alpha the posterior weights are taken to be exactly uniform.
pub const ALPHA_FLOOR: f64 = 1e-6;

/// Default points of the three-point 1-D toy dataset.
pub const TOY3_POINTS: [f64; 3] = [-1.0, 0.2, 1.0];

/// `N` points in `d` dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointDataset {
    dim: usize,
    points: Vec<f64>,
    labels: Option<Vec<i64>>,
}

impl PointDataset {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(invalid!("dataset rows have inconsistent dimension"));
        }
        Self::from_flat(dim, rows.into_iter().flatten().collect())
    }

    pub fn from_flat(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid!("dataset dimension must be at least 1"));
        }
        if points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(invalid!(
                "dataset needs at least one point and a whole number of rows"
            ));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(invalid!("dataset contains non-finite coordinates"));
        }
        Ok(Self {
            dim,
            points,
            labels: None,
        })
    }

    /// 1-D dataset from scalar points.
    pub fn from_scalars(points: &[f64]) -> Result<Self> {
        Self::from_flat(1, points.to_vec())
    }

    pub fn with_labels(mut self, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(invalid!(
                "{} labels for {} points",
                labels.len(),
                self.len()
            ));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for p in self.points() {
            for (mi, pi) in m.iter_mut().zip(p) {
                *mi += pi;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Population covariance (divides by `N`), row-major `d × d`.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim;
        let m = self.mean();
        let mut c = vec![0.0; d * d];
        for p in self.points() {
            for i in 0..d {
                for j in 0..d {
                    c[i * d + j] += (p[i] - m[i]) * (p[j] - m[j]);
                }
            }
        }
        let n = self.len() as f64;
        c.iter_mut().for_each(|v| *v /= n);
        c
    }

    /// Every point multiplied by -1.
    pub fn negated(&self) -> Self {
        Self {
            dim: self.dim,
            points: self.points.iter().map(|v| -v).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Applies a `d × d` row-major linear map to every point.
    pub fn transformed(&self, matrix: &[f64]) -> Result<Self> {
        let d = self.dim;
        if matrix.len() != d * d {
            return Err(invalid!("transform must be {d}x{d}"));
        }
        let points = self
            .points()
            .flat_map(|p| (0..d).map(move |i| (0..d).map(|j| matrix[i * d + j] * p[j]).sum::<f64>()))
            .collect();
        Ok(Self {
            dim: d,
            points,
            labels: self.labels.clone(),
        })
    }

    /// Built-in datasets: `toy3`, `two-point`, `single-point`, `grid-mixture:<k>`.
    ///
    /// `grid-mixture:<k>` is the `k × k` lattice spanning `[-1, 1]^2`.
    pub fn builtin(name: &str) -> Result<Self> {
        match name.trim() {
            "toy3" => Self::from_scalars(&TOY3_POINTS),
            "two-point" => Self::from_scalars(&[-1.0, 1.0]),
            "single-point" => Self::from_scalars(&[0.5]),
            other => {
                if let Some(k) = other.strip_prefix("grid-mixture:") {
                    let k: usize = k
                        .trim()
                        .parse()
                        .map_err(|_| invalid!("bad grid-mixture size `{k}`"))?;
                    if k == 0 {
                        return Err(invalid!("grid-mixture size must be at least 1"));
                    }
                    let coord = |i: usize| {
                        if k == 1 {
                            0.0
                        } else {
                            -1.0 + 2.0 * i as f64 / (k - 1) as f64
                        }
                    };
                    let rows = (0..k)
                        .flat_map(|i| (0..k).map(move |j| vec![coord(i), coord(j)]))
                        .collect();
                    Self::new(rows)
                } else {
                    Err(Error::UnknownName(other.to_string()))
                }
            }
        }
    }

    /// Parses CSV text with one point per row; a non-numeric first row is
    /// treated as a header.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let parsed: std::result::Result<Vec<f64>, _> =
                record.iter().map(|f| f.parse::<f64>()).collect();
            match parsed {
                Ok(row) => rows.push(row),
                Err(_) if i == 0 => continue,
                Err(_) => return Err(invalid!("non-numeric value on data row {}", i + 1)),
            }
        }
        Self::new(rows)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::from_csv_str(&io::read_to_string(path)?)
    }

    /// Resolves a built-in name, falling back to a CSV path.
    pub fn resolve(spec: &str) -> Result<Self> {
        match Self::builtin(spec) {
            Err(Error::UnknownName(_)) => {
                let path = Path::new(spec);
                if path.exists() {
                    Self::load_csv(path)
                } else {
                    Err(Error::UnknownName(spec.to_string()))
                }
            }
            other => other,
        }
    }
}

/// Data prediction `x̂(x, alpha)` of a (possibly learned) denoiser.
pub trait Predictor: Sync {
    fn dim(&self) -> usize;

    /// Writes `x̂(x, alpha)` into `out`.
    fn predict_into(&self, x: &[f64], alpha: f64, out: &mut [f64]) -> Result<()>;

    fn predict(&self, x: &[f64], alpha: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.predict_into(x, alpha, &mut out)?;
        Ok(out)
    }

    /// `ε̂ = (x - alpha x̂) / sigma`.
    fn predict_noise(&self, x: &[f64], alpha: f64) -> Result<Vec<f64>> {
        let x_hat = self.predict(x, alpha)?;
        noise_from_data(x, alpha, &x_hat)
    }
}

/// Exact posterior mean `E[x0 | x_alpha]` under the empirical prior.
#[derive(Debug, Clone)]
pub struct PosteriorMean {
    dataset: PointDataset,
    mean: Vec<f64>,
}

impl PosteriorMean {
    pub fn new(dataset: PointDataset) -> Self {
        let mean = dataset.mean();
        Self { dataset, mean }
    }

    pub fn dataset(&self) -> &PointDataset {
        &self.dataset
    }

    /// Normalized posterior weights over the data points.
    pub fn weights(&self, x: &[f64], alpha: f64) -> Result<Vec<f64>> {
        check_alpha_open(alpha)?;
        let n = self.dataset.len();
        if alpha < ALPHA_FLOOR {
            return Ok(vec![1.0 / n as f64; n]);
        }
        let var = 1.0 - alpha * alpha;
        let mut logits: Vec<f64> = self
            .dataset
            .points()
            .map(|p| -sq_dist_scaled(x, p, alpha) / (2.0 * var))
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for l in logits.iter_mut() {
            *l = (*l - max).exp();
            total += *l;
        }
        logits.iter_mut().for_each(|w| *w /= total);
        Ok(logits)
    }
}

impl Predictor for PosteriorMean {
    fn dim(&self) -> usize {
        self.dataset.dim()
    }

    fn predict_into(&self, x: &[f64], alpha: f64, out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Predictor(format!(
                "input has dimension {}, expected {}",
                x.len(),
                self.dim()
            )));
        }
        check_alpha_open(alpha).map_err(|e| Error::Predictor(e.to_string()))?;
        if alpha < ALPHA_FLOOR {
            out.copy_from_slice(&self.mean);
            return Ok(());
        }
        let w = self.weights(x, alpha)?;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (wn, p) in w.iter().zip(self.dataset.points()) {
            for (o, pi) in out.iter_mut().zip(p) {
                *o += wn * pi;
            }
        }
        Ok(())
    }
}

/// Posterior mean for isotropic Gaussian data `N(mean, std^2 I)`.
///
/// Its probability-flow trajectories are known in closed form, which makes
/// it the reference problem for sampler convergence orders.
#[derive(Debug, Clone)]
pub struct GaussianPrior {
    pub mean: Vec<f64>,
    pub std: f64,
}

impl GaussianPrior {
    pub fn new(mean: Vec<f64>, std: f64) -> Result<Self> {
        if mean.is_empty() || !(std > 0.0 && std.is_finite()) {
            return Err(invalid!("Gaussian prior needs a mean and a positive std"));
        }
        Ok(Self { mean, std })
    }

    /// Marginal standard deviation of `x_alpha`.
    pub fn marginal_std(&self, alpha: f64) -> f64 {
        (alpha * alpha * self.std * self.std + 1.0 - alpha * alpha).sqrt()
    }

    /// Exact probability-flow transport of `x` from `alpha_from` to `alpha_to`.
    pub fn flow(&self, x: &[f64], alpha_from: f64, alpha_to: f64) -> Vec<f64> {
        let scale = self.marginal_std(alpha_to) / self.marginal_std(alpha_from);
        x.iter()
            .zip(&self.mean)
            .map(|(xi, mi)| alpha_to * mi + scale * (xi - alpha_from * mi))
            .collect()
    }
}

impl Predictor for GaussianPrior {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn predict_into(&self, x: &[f64], alpha: f64, out: &mut [f64]) -> Result<()> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Predictor(format!("alpha {alpha} outside [0, 1]")));
        }
        let s2 = self.std * self.std;
        let gain = alpha * s2 / (alpha * alpha * s2 + 1.0 - alpha * alpha);
        for ((o, xi), mi) in out.iter_mut().zip(x).zip(&self.mean) {
            *o = mi + gain * (xi - alpha * mi);
        }
        Ok(())
    }
}

fn check_alpha_open(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(invalid!("alpha must lie in [0, 1), got {alpha}"));
    }
    Ok(())
}

fn sq_dist_scaled(x: &[f64], p: &[f64], alpha: f64) -> f64 {
    x.iter()
        .zip(p)
        .map(|(xi, pi)| {
            let d = xi - alpha * pi;
            d * d
        })
        .sum()
}

/// `log q(x_alpha)` of the empirical mixture, via log-sum-exp.
pub fn log_diffused_density(dataset: &PointDataset, alpha: f64, x: &[f64]) -> Result<f64> {
    check_alpha_open(alpha)?;
    if x.len() != dataset.dim() {
        return Err(invalid!("point has dimension {}, expected {}", x.len(), dataset.dim()));
    }
    let var = 1.0 - alpha * alpha;
    let logits: Vec<f64> = dataset
        .points()
        .map(|p| -sq_dist_scaled(x, p, alpha) / (2.0 * var))
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    let d = dataset.dim() as f64;
    Ok(lse - (dataset.len() as f64).ln() - 0.5 * d * (2.0 * std::f64::consts::PI * var).ln())
}

/// `q(x_alpha) = (1/N) Σ N(x; alpha x_n, (1 - alpha^2) I)`.
pub fn diffused_density(dataset: &PointDataset, alpha: f64, x: &[f64]) -> Result<f64> {
    log_diffused_density(dataset, alpha, x).map(f64::exp)
}

/// `ε̂ = (x - alpha x̂) / sigma`; undefined at `alpha = 1`.
pub fn noise_from_data(x: &[f64], alpha: f64, x_hat: &[f64]) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(invalid!("noise prediction needs alpha in [0, 1), got {alpha}"));
    }
    let sigma = (1.0 - alpha * alpha).sqrt();
    Ok(x.iter()
        .zip(x_hat)
        .map(|(xi, hi)| (xi - alpha * hi) / sigma)
        .collect())
}

/// Checks a forward grid: nonempty, within `[0, 1]`, strictly decreasing.
pub fn validate_forward_grid(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(invalid!("alpha grid is empty"));
    }
    if alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(invalid!("alpha grid leaves [0, 1]"));
    }
    if alphas.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(invalid!("alpha grid must be strictly decreasing"));
    }
    Ok(())
}

/// Runs one Markov chain `x_t = beta_t x_{t-1} + delta_t z` from data point
/// `x0` along `alphas`, calling `visit(t, x_t)` at every grid step.
///
/// When `alphas[0] < 1` the first state is drawn from `q(x_alpha0 | x0)`.
pub fn forward_chain<R: rand::Rng + ?Sized>(
    x0: &[f64],
    alphas: &[f64],
    rng: &mut R,
    mut visit: impl FnMut(usize, &[f64]) -> Result<()>,
) -> Result<()> {
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut z = vec![0.0; d];
    let a0 = alphas[0];
    if a0 < 1.0 {
        let s0 = (1.0 - a0 * a0).sqrt();
        rng::fill_normal(rng, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi = a0 * *xi + s0 * zi;
        }
    }
    visit(0, &x)?;
    for t in 1..alphas.len() {
        let beta = alphas[t] / alphas[t - 1];
        let delta = (1.0 - beta * beta).max(0.0).sqrt();
        rng::fill_normal(rng, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi = beta * *xi + delta * zi;
        }
        visit(t, &x)?;
    }
    Ok(())
}

/// All states of `n_samples` forward chains.
#[derive(Debug, Clone)]
pub struct ForwardSamples {
    pub alphas: Vec<f64>,
    pub dim: usize,
    pub n_samples: usize,
    /// `steps[t]` holds `n_samples × dim` values, row-major.
    pub steps: Vec<Vec<f64>>,
}

impl ForwardSamples {
    pub fn sample(&self, t: usize, s: usize) -> &[f64] {
        &self.steps[t][s * self.dim..(s + 1) * self.dim]
    }
}

/// Simulates `n_samples` forward chains. Start points come from a seeded
/// permutation of the dataset (cycled when `n_samples > N`) and sample `s`
/// draws its noise from stream `(seed, s)`, so the result does not depend
/// on the rayon thread count.
pub fn simulate_forward(
    dataset: &PointDataset,
    alphas: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<ForwardSamples> {
    validate_forward_grid(alphas)?;
    if n_samples == 0 {
        return Err(invalid!("n_samples must be at least 1"));
    }
    let d = dataset.dim();
    let starts = rng::permuted_indices(dataset.len(), n_samples, seed);
    let per_sample: Vec<Vec<f64>> = starts
        .par_iter()
        .enumerate()
        .map(|(s, &idx)| {
            let mut traj = Vec::with_capacity(alphas.len() * d);
            let mut r = rng::stream(seed, s as u64);
            forward_chain(dataset.point(idx), alphas, &mut r, |_, x| {
                traj.extend_from_slice(x);
                Ok(())
            })?;
            Ok(traj)
        })
        .collect::<Result<_>>()?;
    let mut steps = vec![Vec::with_capacity(n_samples * d); alphas.len()];
    for traj in &per_sample {
        for (t, step) in steps.iter_mut().enumerate() {
            step.extend_from_slice(&traj[t * d..(t + 1) * d]);
        }
    }
    Ok(ForwardSamples {
        alphas: alphas.to_vec(),
        dim: d,
        n_samples,
        steps,
    })
}

/// Strict local maxima of a sampled curve; plateaus count once.
pub fn count_local_maxima(values: &[f64]) -> usize {
    let n = values.len();
    let mut count = 0;
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                count += 1;
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    count
}

/// Number of modes of the diffused density on the grid `xs` (1-D datasets).
pub fn density_mode_count(dataset: &PointDataset, alpha: f64, xs: &[f64]) -> Result<usize> {
    if dataset.dim() != 1 {
        return Err(invalid!("mode counting needs a 1-D dataset"));
    }
    let values = xs
        .iter()
        .map(|&x| log_diffused_density(dataset, alpha, &[x]))
        .collect::<Result<Vec<_>>>()?;
    Ok(count_local_maxima(&values))
}
