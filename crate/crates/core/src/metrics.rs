//! Rate functions measured on simulated forward diffusion.
//!
//! * `v_fid`: Fréchet distance between Gaussian moment fits of consecutive
//!   steps, divided by the alpha step.
//! * `v_x` / `v_eps`: square root of the per-unit-alpha mean squared change of
//!   the data (noise) prediction along forward trajectories.
//! * `v_klub`: `v_x` times the weight `sqrt(alpha) / (sqrt(2) sigma^2)`.
//!
//! Trajectories are processed in fixed-size blocks whose partial sums are
//! merged in block order, so results are bit-identical for any thread count.

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rate::RateTable;
use crate::rng;
use crate::toy::{forward_chain, validate_forward_grid, PointDataset, Predictor};

/// Largest tolerated asymmetry `|A_ij - A_ji|` of a covariance input.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;
/// Eigenvalues below this are clamped to zero in matrix square roots.
pub const PSD_CLAMP: f64 = 1e-10;
/// Trajectories per accumulation block.
const BLOCK: usize = 256;
/// Batches used for the batch-means standard error of `v_fid`.
const FID_SE_BATCHES: usize = 8;

/// Feature transform applied to diffused samples before taking moments.
pub type FeatureMap<'a> = &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync);

fn to_matrix(dim: usize, data: &[f64], name: &str) -> Result<DMatrix<f64>> {
    if data.len() != dim * dim {
        return Err(invalid!("{name} must be {dim}x{dim}"));
    }
    let m = DMatrix::from_row_slice(dim, dim, data);
    let asym = (0..dim)
        .flat_map(|i| (0..dim).map(move |j| (i, j)))
        .map(|(i, j)| (m[(i, j)] - m[(j, i)]).abs())
        .fold(0.0, f64::max);
    if asym > SYMMETRY_TOLERANCE {
        return Err(invalid!("{name} is not symmetric (max asymmetry {asym:e})"));
    }
    Ok((&m + m.transpose()) * 0.5)
}

fn psd_sqrt(m: DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m);
    let roots = eig
        .eigenvalues
        .map(|l| if l > PSD_CLAMP { l.sqrt() } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `‖mu1 - mu2‖² + Tr(S1 + S2 - 2 (S1 S2)^(1/2))` for row-major covariances.
///
/// The cross term is evaluated as `Tr((S1^½ S2 S1^½)^½)`, a symmetric
/// eigenproblem, with negative eigenvalues clamped to zero.
pub fn frechet_distance(mu1: &[f64], sigma1: &[f64], mu2: &[f64], sigma2: &[f64]) -> Result<f64> {
    let d = mu1.len();
    if d == 0 || mu2.len() != d {
        return Err(invalid!("mean vectors must be nonempty and of equal length"));
    }
    let s1 = to_matrix(d, sigma1, "sigma1")?;
    let s2 = to_matrix(d, sigma2, "sigma2")?;
    let mean_term: f64 = mu1.iter().zip(mu2).map(|(a, b)| (a - b) * (a - b)).sum();
    let root1 = psd_sqrt(s1.clone());
    let inner = &root1 * &s2 * &root1;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross: f64 = SymmetricEigen::new(inner)
        .eigenvalues
        .iter()
        .map(|&l| if l > 0.0 { l.sqrt() } else { 0.0 })
        .sum();
    Ok((mean_term + s1.trace() + s2.trace() - 2.0 * cross).max(0.0))
}

/// Per-step means and covariances of diffused data along a decreasing alpha grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTrajectory {
    pub alphas: Vec<f64>,
    pub dim: usize,
    pub means: Vec<Vec<f64>>,
    /// Row-major `dim × dim` covariances.
    pub covs: Vec<Vec<f64>>,
}

impl MomentTrajectory {
    /// Exact moments of the empirical mixture: `alpha mu` and
    /// `alpha^2 C + sigma^2 I` with `C` the population covariance.
    pub fn exact(dataset: &PointDataset, alphas: &[f64]) -> Self {
        let d = dataset.dim();
        let mu = dataset.mean();
        let c = dataset.covariance();
        let means = alphas
            .iter()
            .map(|a| mu.iter().map(|m| a * m).collect())
            .collect();
        let covs = alphas
            .iter()
            .map(|a| {
                let s2 = 1.0 - a * a;
                (0..d * d)
                    .map(|k| a * a * c[k] + if k / d == k % d { s2 } else { 0.0 })
                    .collect()
            })
            .collect();
        Self {
            alphas: alphas.to_vec(),
            dim: d,
            means,
            covs,
        }
    }

    /// `FD(t, t+1) / (alpha_t - alpha_{t+1})` on the trajectory's grid, with
    /// the last knot copying its neighbour. Returned in grid order.
    pub fn fid_rates(&self) -> Result<Vec<f64>> {
        let n = self.alphas.len();
        if n < 2 {
            return Err(invalid!("need at least two grid points"));
        }
        let mut v = Vec::with_capacity(n);
        for t in 0..n - 1 {
            let fd = frechet_distance(
                &self.means[t],
                &self.covs[t],
                &self.means[t + 1],
                &self.covs[t + 1],
            )?;
            v.push(fd / (self.alphas[t] - self.alphas[t + 1]));
        }
        v.push(v[n - 2]);
        Ok(v)
    }
}

/// Running mean and centered cross-product sums of one step.
#[derive(Debug, Clone)]
struct StepMoments {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl StepMoments {
    fn from_rows(rows: &[f64], dim: usize) -> Self {
        let n = rows.len() / dim;
        let mut mean = vec![0.0; dim];
        for r in rows.chunks_exact(dim) {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut m2 = vec![0.0; dim * dim];
        for r in rows.chunks_exact(dim) {
            for i in 0..dim {
                let di = r[i] - mean[i];
                for j in 0..dim {
                    m2[i * dim + j] += di * (r[j] - mean[j]);
                }
            }
        }
        Self {
            n: n as f64,
            mean,
            m2,
        }
    }

    /// Chan et al. pairwise merge.
    fn merge(&mut self, other: &StepMoments) {
        let n = self.n + other.n;
        let dim = self.mean.len();
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        let f = self.n * other.n / n;
        for i in 0..dim {
            for j in 0..dim {
                self.m2[i * dim + j] += other.m2[i * dim + j] + delta[i] * delta[j] * f;
            }
        }
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d * other.n / n;
        }
        self.n = n;
    }

    fn covariance(&self) -> Vec<f64> {
        self.m2.iter().map(|v| v / (self.n - 1.0)).collect()
    }
}

/// A measured rate table plus per-knot Monte Carlo standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    pub table: RateTable,
    /// Aligned with `table.alphas()`.
    pub std_errors: Vec<f64>,
}

/// Metadata written next to a measured rate table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateSidecar {
    pub metric: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub alphas: Vec<f64>,
    pub std_errors: Vec<f64>,
}

fn ascending(alphas: &[f64], values: &[f64], errors: &[f64]) -> Result<RateEstimate> {
    let table = RateTable::new(
        alphas.iter().rev().copied().collect(),
        values.iter().rev().copied().collect(),
    )?;
    Ok(RateEstimate {
        table,
        std_errors: errors.iter().rev().copied().collect(),
    })
}

fn feature_dim(dataset: &PointDataset, feature_map: Option<FeatureMap<'_>>) -> usize {
    match feature_map {
        Some(f) => f(dataset.point(0)).len(),
        None => dataset.dim(),
    }
}

/// Per-step moments of forward chains, merged over contiguous sample ranges.
fn simulate_moments(
    dataset: &PointDataset,
    alphas: &[f64],
    n_samples: usize,
    seed: u64,
    feature_map: Option<FeatureMap<'_>>,
    batches: usize,
) -> Result<Vec<Vec<StepMoments>>> {
    let fdim = feature_dim(dataset, feature_map);
    let starts = rng::permuted_indices(dataset.len(), n_samples, seed);
    let n_blocks = n_samples.div_ceil(BLOCK);
    let blocks: Vec<Vec<StepMoments>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let range = b * BLOCK..((b + 1) * BLOCK).min(n_samples);
            let mut buffers = vec![Vec::with_capacity(range.len() * fdim); alphas.len()];
            for s in range {
                let mut r = rng::stream(seed, s as u64);
                forward_chain(dataset.point(starts[s]), alphas, &mut r, |t, x| {
                    match feature_map {
                        Some(f) => {
                            let feat = f(x);
                            if feat.len() != fdim {
                                return Err(invalid!("feature map output changed dimension"));
                            }
                            buffers[t].extend_from_slice(&feat);
                        }
                        None => buffers[t].extend_from_slice(x),
                    }
                    Ok(())
                })?;
            }
            Ok(buffers
                .iter()
                .map(|rows| StepMoments::from_rows(rows, fdim))
                .collect())
        })
        .collect::<Result<_>>()?;

    // batch g collects blocks [g*n_blocks/batches, (g+1)*n_blocks/batches)
    let mut out = Vec::with_capacity(batches);
    for g in 0..batches {
        let lo = g * n_blocks / batches;
        let hi = (g + 1) * n_blocks / batches;
        if lo == hi {
            continue;
        }
        let mut acc = blocks[lo].clone();
        for block in &blocks[lo + 1..hi] {
            for (a, m) in acc.iter_mut().zip(block) {
                a.merge(m);
            }
        }
        out.push(acc);
    }
    Ok(out)
}

fn trajectory_from(alphas: &[f64], moments: &[StepMoments]) -> MomentTrajectory {
    MomentTrajectory {
        alphas: alphas.to_vec(),
        dim: moments[0].mean.len(),
        means: moments.iter().map(|m| m.mean.clone()).collect(),
        covs: moments.iter().map(StepMoments::covariance).collect(),
    }
}

/// Sample moments of `n_samples` simulated forward chains.
pub fn simulate_moment_trajectory(
    dataset: &PointDataset,
    alphas: &[f64],
    n_samples: usize,
    seed: u64,
    feature_map: Option<FeatureMap<'_>>,
) -> Result<MomentTrajectory> {
    validate_forward_grid(alphas)?;
    let fdim = feature_dim(dataset, feature_map);
    if n_samples < fdim + 2 {
        return Err(Error::SingularCovariance(format!(
            "{n_samples} samples cannot give a full-rank covariance in {fdim} dimensions"
        )));
    }
    let merged = simulate_moments(dataset, alphas, n_samples, seed, feature_map, 1)?;
    Ok(trajectory_from(alphas, &merged[0]))
}

/// Fréchet-distance rate along the decreasing grid `alphas`.
///
/// Standard errors are batch-means estimates over 8 contiguous sample batches.
pub fn compute_v_fid(
    dataset: &PointDataset,
    alphas: &[f64],
    n_samples: usize,
    seed: u64,
    feature_map: Option<FeatureMap<'_>>,
) -> Result<RateEstimate> {
    validate_forward_grid(alphas)?;
    if alphas.len() < 2 {
        return Err(invalid!("v_fid needs at least two grid points"));
    }
    let fdim = feature_dim(dataset, feature_map);
    if n_samples < fdim + 2 {
        return Err(Error::SingularCovariance(format!(
            "{n_samples} samples cannot give a full-rank covariance in {fdim} dimensions"
        )));
    }
    let batches = if n_samples >= FID_SE_BATCHES * BLOCK.max(fdim + 2) {
        FID_SE_BATCHES
    } else {
        1
    };
    let parts = simulate_moments(dataset, alphas, n_samples, seed, feature_map, batches)?;
    let mut total = parts[0].clone();
    for p in &parts[1..] {
        for (a, m) in total.iter_mut().zip(p) {
            a.merge(m);
        }
    }
    let values = trajectory_from(alphas, &total).fid_rates()?;
    let errors = if parts.len() > 1 {
        let per_batch: Vec<Vec<f64>> = parts
            .iter()
            .map(|p| trajectory_from(alphas, p).fid_rates())
            .collect::<Result<_>>()?;
        let g = per_batch.len() as f64;
        (0..alphas.len())
            .map(|t| {
                let mean = per_batch.iter().map(|v| v[t]).sum::<f64>() / g;
                let var = per_batch.iter().map(|v| (v[t] - mean).powi(2)).sum::<f64>() / (g - 1.0);
                (var / g).sqrt()
            })
            .collect()
    } else {
        vec![f64::NAN; alphas.len()]
    };
    ascending(alphas, &values, &errors)
}

/// Grid `alpha_t = p`-power spacing `1 - (t/T)^p`, `t = 0..=T`, used for v_fid.
pub fn power_grid(t_steps: usize, power: f64) -> Result<Vec<f64>> {
    if t_steps < 1 || !(power > 0.0) {
        return Err(invalid!("power grid needs T >= 1 and p > 0"));
    }
    Ok((0..=t_steps)
        .map(|t| 1.0 - (t as f64 / t_steps as f64).powf(power))
        .collect())
}

/// Settings of the prediction-based rate estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VxConfig {
    /// Forward simulation steps `T`.
    pub steps: usize,
    /// Averaged trajectories `S`.
    pub samples: usize,
    pub alpha_start: f64,
    pub alpha_end: f64,
}

impl Default for VxConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            samples: 10_000,
            alpha_start: 1.0,
            alpha_end: 1e-4,
        }
    }
}

impl VxConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(invalid!("T must be at least 2"));
        }
        if self.samples < 1 {
            return Err(invalid!("S must be at least 1"));
        }
        if !(0.0 < self.alpha_end && self.alpha_end < self.alpha_start && self.alpha_start <= 1.0) {
            return Err(invalid!(
                "need 0 < alpha_end < alpha_start <= 1, got ({}, {})",
                self.alpha_start,
                self.alpha_end
            ));
        }
        Ok(())
    }

    pub fn delta_alpha(&self) -> f64 {
        (self.alpha_start - self.alpha_end) / self.steps as f64
    }

    /// Decreasing grid `alpha_s - Δα t`, `t = 0..=T`, ending exactly at `alpha_e`.
    pub fn grid(&self) -> Vec<f64> {
        let da = self.delta_alpha();
        let mut g: Vec<f64> = (0..=self.steps)
            .map(|t| self.alpha_start - da * t as f64)
            .collect();
        g[self.steps] = self.alpha_end;
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PredictionKind {
    Data,
    Noise,
}

/// `D̄²_t` means, standard errors and the first accumulated step.
struct SquaredChanges {
    mean: Vec<f64>,
    std_error: Vec<f64>,
    first: usize,
}

fn squared_changes(
    dataset: &PointDataset,
    predictor: &dyn Predictor,
    config: &VxConfig,
    seed: u64,
    kind: PredictionKind,
) -> Result<SquaredChanges> {
    config.validate()?;
    if predictor.dim() != dataset.dim() {
        return Err(invalid!(
            "predictor dimension {} does not match dataset dimension {}",
            predictor.dim(),
            dataset.dim()
        ));
    }
    let grid = config.grid();
    let n_steps = grid.len();
    let s_total = config.samples;
    let d = dataset.dim();
    // at alpha = 1 the noise prediction is undefined, so its first difference is skipped
    let first = if kind == PredictionKind::Noise && grid[0] >= 1.0 { 2 } else { 1 };
    let starts = rng::permuted_indices(dataset.len(), s_total, seed);
    let n_blocks = s_total.div_ceil(BLOCK);

    let blocks: Vec<(Vec<f64>, Vec<f64>)> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut sum = vec![0.0; n_steps];
            let mut sumsq = vec![0.0; n_steps];
            let mut prev = vec![0.0; d];
            let mut cur = vec![0.0; d];
            let end = ((b + 1) * BLOCK).min(s_total);
            for (s, &start) in starts.iter().enumerate().take(end).skip(b * BLOCK) {
                let mut r = rng::stream(seed, s as u64);
                forward_chain(dataset.point(start), &grid, &mut r, |t, x| {
                    let alpha = grid[t];
                    if alpha >= 1.0 {
                        // clean endpoint: the data prediction is the state itself
                        cur.copy_from_slice(x);
                    } else {
                        predictor.predict_into(x, alpha, &mut cur)?;
                        if kind == PredictionKind::Noise {
                            let sigma = (1.0 - alpha * alpha).sqrt();
                            for (c, xi) in cur.iter_mut().zip(x) {
                                *c = (xi - alpha * *c) / sigma;
                            }
                        }
                    }
                    if t >= first {
                        let d2: f64 = cur.iter().zip(&prev).map(|(a, b)| (a - b) * (a - b)).sum();
                        sum[t] += d2;
                        sumsq[t] += d2 * d2;
                    }
                    std::mem::swap(&mut prev, &mut cur);
                    Ok(())
                })?;
            }
            Ok((sum, sumsq))
        })
        .collect::<Result<_>>()?;

    let mut sum = vec![0.0; n_steps];
    let mut sumsq = vec![0.0; n_steps];
    for (bs, bq) in &blocks {
        for t in 0..n_steps {
            sum[t] += bs[t];
            sumsq[t] += bq[t];
        }
    }
    let n = s_total as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_error = (0..n_steps)
        .map(|t| {
            if s_total < 2 {
                return f64::NAN;
            }
            let var = ((sumsq[t] - n * mean[t] * mean[t]) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    Ok(SquaredChanges {
        mean,
        std_error,
        first,
    })
}

fn rate_from_changes(config: &VxConfig, changes: SquaredChanges) -> Result<RateEstimate> {
    let grid = config.grid();
    let da = config.delta_alpha();
    let n = grid.len();
    let mut values = vec![0.0; n];
    let mut errors = vec![0.0; n];
    for t in changes.first..n {
        let v = (changes.mean[t] / da).sqrt();
        values[t] = v;
        // delta method for sqrt(D / Δα)
        errors[t] = if v > 0.0 {
            changes.std_error[t] / (2.0 * da * v)
        } else {
            (changes.std_error[t] / da).sqrt()
        };
    }
    for t in (0..changes.first).rev() {
        values[t] = values[t + 1];
        errors[t] = errors[t + 1];
    }
    ascending(&grid, &values, &errors)
}

/// Rate of change of the data prediction along forward trajectories.
pub fn compute_v_x(
    dataset: &PointDataset,
    predictor: &dyn Predictor,
    config: &VxConfig,
    seed: u64,
) -> Result<RateEstimate> {
    let changes = squared_changes(dataset, predictor, config, seed, PredictionKind::Data)?;
    rate_from_changes(config, changes)
}

/// Rate of change of the noise prediction along forward trajectories.
pub fn compute_v_eps(
    dataset: &PointDataset,
    predictor: &dyn Predictor,
    config: &VxConfig,
    seed: u64,
) -> Result<RateEstimate> {
    let changes = squared_changes(dataset, predictor, config, seed, PredictionKind::Noise)?;
    rate_from_changes(config, changes)
}

/// `sqrt(alpha) / (sqrt(2) sigma^2)`; infinite at `alpha = 1`.
pub fn klub_weight(alpha: f64) -> f64 {
    alpha.sqrt() / (std::f64::consts::SQRT_2 * (1.0 - alpha * alpha))
}

/// `v_x` reweighted by [`klub_weight`]. Knots with `alpha >= 1` are dropped.
pub fn compute_v_klub(
    dataset: &PointDataset,
    predictor: &dyn Predictor,
    config: &VxConfig,
    seed: u64,
) -> Result<RateEstimate> {
    let vx = compute_v_x(dataset, predictor, config, seed)?;
    weight_by_klub(&vx)
}

/// Applies the KLUB weight to an existing `v_x` estimate.
pub fn weight_by_klub(vx: &RateEstimate) -> Result<RateEstimate> {
    let keep: Vec<usize> = (0..vx.table.len())
        .filter(|&i| vx.table.alphas()[i] < 1.0)
        .collect();
    if keep.len() < vx.table.len() {
        warn!(
            "v_klub: dropped {} knot(s) at alpha = 1 where the weight diverges",
            vx.table.len() - keep.len()
        );
    }
    let alphas: Vec<f64> = keep.iter().map(|&i| vx.table.alphas()[i]).collect();
    let values = keep
        .iter()
        .map(|&i| vx.table.values()[i] * klub_weight(vx.table.alphas()[i]))
        .collect();
    let std_errors = keep
        .iter()
        .map(|&i| vx.std_errors[i] * klub_weight(vx.table.alphas()[i]))
        .collect();
    Ok(RateEstimate {
        table: RateTable::new(alphas, values)?,
        std_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::PosteriorMean;

    #[test]
    fn frechet_unit_cases() {
        let eye = [1.0];
        assert!(frechet_distance(&[0.3], &eye, &[0.3], &eye).unwrap() <= 1e-10);
        assert!((frechet_distance(&[0.0], &eye, &[1.0], &eye).unwrap() - 1.0).abs() <= 1e-10);
        assert!((frechet_distance(&[0.0], &[1.0], &[0.0], &[4.0]).unwrap() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn frechet_rejects_asymmetric() {
        let a = [1.0, 0.5, 0.4, 1.0];
        let i = [1.0, 0.0, 0.0, 1.0];
        assert!(frechet_distance(&[0.0, 0.0], &a, &[0.0, 0.0], &i).is_err());
        assert!(frechet_distance(&[0.0], &[1.0], &[0.0, 0.0], &i).is_err());
    }

    #[test]
    fn frechet_matches_commuting_closed_form() {
        // diagonal covariances commute: cross term is Σ sqrt(a_i b_i)
        let a = [2.0, 0.0, 0.0, 0.5];
        let b = [0.5, 0.0, 0.0, 3.0];
        let expected = (2f64.sqrt() - 0.5f64.sqrt()).powi(2) + (0.5f64.sqrt() - 3f64.sqrt()).powi(2) + 1.0;
        let got = frechet_distance(&[1.0, 0.0], &a, &[0.0, 0.0], &b).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn vx_of_single_point_is_zero() {
        let ds = PointDataset::from_scalars(&[0.4]).unwrap();
        let p = PosteriorMean::new(ds.clone());
        let cfg = VxConfig { steps: 50, samples: 40, ..Default::default() };
        let est = compute_v_x(&ds, &p, &cfg, 1).unwrap();
        assert_eq!(est.table.len(), 51);
        assert!(est.table.values().iter().all(|&v| v == 0.0));
        let eps = compute_v_eps(&ds, &p, &cfg, 1).unwrap();
        assert!(eps.table.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn vx_config_validation() {
        let bad = [
            VxConfig { steps: 1, ..Default::default() },
            VxConfig { samples: 0, ..Default::default() },
            VxConfig { alpha_end: 0.0, ..Default::default() },
            VxConfig { alpha_start: 1.1, ..Default::default() },
            VxConfig { alpha_start: 0.5, alpha_end: 0.6, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        let g = VxConfig::default().grid();
        assert_eq!(g.len(), 1001);
        assert_eq!((g[0], g[1000]), (1.0, 1e-4));
    }

    #[test]
    fn single_interval_fid_copies_last_rate() {
        let ds = PointDataset::builtin("two-point").unwrap();
        let est = compute_v_fid(&ds, &[0.9, 0.8], 64, 2, None).unwrap();
        assert_eq!(est.table.len(), 2);
        assert_eq!(est.table.values()[0], est.table.values()[1]);
    }

    #[test]
    fn fid_needs_enough_samples() {
        let ds = PointDataset::builtin("grid-mixture:2").unwrap();
        assert!(matches!(
            compute_v_fid(&ds, &[0.9, 0.8], 3, 0, None),
            Err(Error::SingularCovariance(_))
        ));
    }

    #[test]
    fn klub_weight_value() {
        assert!((klub_weight(0.5) - 2.0 / 3.0).abs() < 1e-15);
        assert!(klub_weight(1.0).is_infinite());
    }

    #[test]
    fn power_grid_shape() {
        let g = power_grid(4, 2.0).unwrap();
        assert_eq!(g, vec![1.0, 0.9375, 0.75, 0.4375, 0.0]);
    }
}
