//! Online estimation of the data-prediction rate during training.
//!
//! Each training step probes the predictor at `alpha` and `alpha - Δα`,
//! folds the squared difference into an EMA for the bin containing `alpha`,
//! and every `refresh_interval` steps rebuilds the training schedule from
//! the binned rate.

use std::path::{Path, PathBuf};

use log::info;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rate::RateTable;
use crate::rng::{self, StreamRng};
use crate::schedule::{solve_schedule, NoiseSchedule};
use crate::toy::{noise_from_data, PointDataset, Predictor};

/// Initial EMA value of every bin.
pub const INITIAL_D2: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub bins: usize,
    pub decay: f64,
    pub alpha_max: f64,
    pub alpha_min: f64,
    pub alpha_threshold: f64,
    pub delta_alpha: f64,
    pub xi: f64,
    pub warmup: usize,
    pub refresh_interval: usize,
    /// Knots of each rebuilt schedule.
    pub schedule_knots: usize,
    /// Removes the initial value's remaining weight `e^k` from a bin after
    /// `k` updates when reading rates. Off by default.
    #[serde(default)]
    pub bias_correction: bool,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            bins: 100,
            decay: 0.995,
            alpha_max: 1.0,
            alpha_min: 0.0,
            alpha_threshold: 0.01,
            delta_alpha: 1e-3,
            xi: 1.0,
            warmup: 1000,
            refresh_interval: 100,
            schedule_knots: 1001,
            bias_correction: false,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 1 {
            return Err(invalid!("need at least one bin"));
        }
        if !(0.0..1.0).contains(&self.decay) {
            return Err(invalid!("EMA decay must lie in [0, 1), got {}", self.decay));
        }
        if !(0.0 <= self.alpha_min
            && self.alpha_min <= self.alpha_threshold
            && self.alpha_threshold < self.alpha_max
            && self.alpha_max <= 1.0)
        {
            return Err(invalid!(
                "need 0 <= alpha_min <= alpha_th < alpha_max <= 1, got ({}, {}, {})",
                self.alpha_min,
                self.alpha_threshold,
                self.alpha_max
            ));
        }
        if !(self.delta_alpha > 0.0 && self.delta_alpha < self.alpha_threshold) {
            return Err(invalid!(
                "probe offset must satisfy 0 < Δα < alpha_th, got {}",
                self.delta_alpha
            ));
        }
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return Err(invalid!("xi must be positive"));
        }
        if self.refresh_interval < 1 {
            return Err(invalid!("refresh interval must be at least 1"));
        }
        if self.schedule_knots < 2 {
            return Err(invalid!("schedules need at least two knots"));
        }
        Ok(())
    }
}

/// Per-bin EMA of squared prediction differences over `[alpha_th, alpha_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedRateEstimator {
    pub config: AdaptiveConfig,
    d2: Vec<f64>,
    updates: Vec<u64>,
}

impl BinnedRateEstimator {
    pub fn new(config: AdaptiveConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            d2: vec![INITIAL_D2; config.bins],
            updates: vec![0; config.bins],
        })
    }

    pub fn d2(&self) -> &[f64] {
        &self.d2
    }

    /// Updates received per bin.
    pub fn updates(&self) -> &[u64] {
        &self.updates
    }

    /// Left bin edges `alpha_0..alpha_B`.
    pub fn edges(&self) -> Vec<f64> {
        let c = &self.config;
        let width = (c.alpha_max - c.alpha_threshold) / c.bins as f64;
        let mut e: Vec<f64> = (0..=c.bins)
            .map(|b| c.alpha_threshold + width * b as f64)
            .collect();
        e[c.bins] = c.alpha_max;
        e
    }

    /// `min(floor((alpha - alpha_th) / (alpha_max - alpha_th) B), B - 1)`.
    pub fn bin_index(&self, alpha: f64) -> Result<usize> {
        let c = &self.config;
        if !(alpha >= c.alpha_threshold && alpha <= c.alpha_max) {
            return Err(invalid!(
                "alpha {alpha} outside the binned range [{}, {}]",
                c.alpha_threshold,
                c.alpha_max
            ));
        }
        let pos = (alpha - c.alpha_threshold) / (c.alpha_max - c.alpha_threshold) * c.bins as f64;
        Ok((pos.floor() as usize).min(c.bins - 1))
    }

    /// `D²_b <- e D²_b + (1 - e) value`.
    pub fn ema_update(&mut self, bin: usize, value: f64) -> Result<()> {
        if bin >= self.config.bins {
            return Err(invalid!("bin {bin} out of range"));
        }
        if !(value >= 0.0 && value.is_finite()) {
            return Err(invalid!("squared difference must be finite and nonnegative, got {value}"));
        }
        let e = self.config.decay;
        self.d2[bin] = e * self.d2[bin] + (1.0 - e) * value;
        self.updates[bin] += 1;
        Ok(())
    }

    /// Bin contents as used for rates, with the optional bias correction.
    pub fn effective_d2(&self) -> Vec<f64> {
        let e = self.config.decay;
        self.d2
            .iter()
            .zip(&self.updates)
            .map(|(&d, &k)| {
                if !self.config.bias_correction || k == 0 {
                    return d;
                }
                let w = e.powf(k as f64);
                ((d - w * INITIAL_D2) / (1.0 - w)).max(0.0)
            })
            .collect()
    }

    /// Table on `{alpha_min, alpha_0, ..., alpha_B}` with values
    /// `{v_0, v_0, v_1, ..., v_{B-1}, v_{B-1}}`, `v_b = sqrt(D²_b / Δα)`.
    pub fn rate_from_bins(&self) -> Result<RateTable> {
        let c = &self.config;
        let v: Vec<f64> = self
            .effective_d2()
            .iter()
            .map(|d| (d / c.delta_alpha).sqrt())
            .collect();
        let mut xs = Vec::with_capacity(c.bins + 2);
        let mut ys = Vec::with_capacity(c.bins + 2);
        if c.alpha_min < c.alpha_threshold {
            xs.push(c.alpha_min);
            ys.push(v[0]);
        }
        for (b, edge) in self.edges().into_iter().enumerate() {
            xs.push(edge);
            ys.push(v[b.min(c.bins - 1)]);
        }
        RateTable::new(xs, ys)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let est: Self = serde_json::from_str(text)?;
        est.config.validate()?;
        if est.d2.len() != est.config.bins || est.updates.len() != est.config.bins {
            return Err(invalid!("estimator state does not match its bin count"));
        }
        if est.d2.iter().any(|d| !(*d >= 0.0)) {
            return Err(invalid!("estimator state holds negative bins"));
        }
        Ok(est)
    }
}

/// Squared difference of data predictions at `alpha` and at
/// `alpha' = alpha - Δα`, where `x_alpha' = β' x_alpha + δ' z`.
pub fn probe_pair<R: Rng + ?Sized>(
    x_alpha: &[f64],
    alpha: f64,
    predictor: &dyn Predictor,
    delta_alpha: f64,
    rng: &mut R,
) -> Result<f64> {
    let alpha_next = alpha - delta_alpha;
    if !(alpha_next > 0.0) || !(alpha <= 1.0) || !(delta_alpha > 0.0) {
        return Err(invalid!("probe needs 0 < alpha - Δα < alpha <= 1, got alpha = {alpha}, Δα = {delta_alpha}"));
    }
    let beta = alpha_next / alpha;
    let delta = (1.0 - beta * beta).sqrt();
    let mut z = vec![0.0; x_alpha.len()];
    rng::fill_normal(rng, &mut z);
    let x_next: Vec<f64> = x_alpha.iter().zip(&z).map(|(x, zi)| beta * x + delta * zi).collect();
    let y = if alpha >= 1.0 {
        x_alpha.to_vec()
    } else {
        predictor.predict(x_alpha, alpha)?
    };
    let y_next = predictor.predict(&x_next, alpha_next)?;
    Ok(y.iter().zip(&y_next).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Receives the per-step training signal; a trainable model would take a
/// gradient step here.
pub trait OptimizerHook {
    fn on_step(&mut self, step: usize, alpha: f64, eps: &[f64], eps_hat: &[f64], loss: f64) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub loss: f64,
    pub alpha: f64,
    pub refreshed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefreshEvent {
    pub step: usize,
    pub schedule_path: Option<PathBuf>,
    /// Sup-norm change from the previous schedule.
    pub change: f64,
}

/// Training loop driver holding the estimator and the current schedule.
pub struct AdaptiveTrainer<'a> {
    dataset: &'a PointDataset,
    predictor: &'a dyn Predictor,
    estimator: BinnedRateEstimator,
    schedule: NoiseSchedule,
    step: usize,
    rng: StreamRng,
    order: Vec<usize>,
    refreshes: Vec<RefreshEvent>,
    schedule_dir: Option<PathBuf>,
    hook: Option<Box<dyn OptimizerHook + 'a>>,
}

impl<'a> AdaptiveTrainer<'a> {
    /// Starts from the linear schedule between `alpha_max` and `alpha_min`.
    pub fn new(
        dataset: &'a PointDataset,
        predictor: &'a dyn Predictor,
        config: AdaptiveConfig,
        seed: u64,
    ) -> Result<Self> {
        if predictor.dim() != dataset.dim() {
            return Err(invalid!("predictor and dataset dimensions differ"));
        }
        let estimator = BinnedRateEstimator::new(config)?;
        let schedule = NoiseSchedule::linear(config.alpha_max, config.alpha_min)?;
        Ok(Self {
            dataset,
            predictor,
            estimator,
            schedule,
            step: 0,
            rng: rng::stream(seed, 0),
            order: Vec::new(),
            refreshes: Vec::new(),
            schedule_dir: None,
            hook: None,
        })
    }

    /// Writes every refreshed schedule as `schedule_<step>.csv` under `dir`.
    pub fn with_schedule_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.schedule_dir = Some(dir.into());
        self
    }

    pub fn with_hook(mut self, hook: Box<dyn OptimizerHook + 'a>) -> Self {
        self.hook = Some(hook);
        self
    }

    /// Resumes from a saved estimator state.
    pub fn with_estimator(mut self, estimator: BinnedRateEstimator) -> Result<Self> {
        if estimator.config != self.estimator.config {
            return Err(invalid!("estimator config differs from trainer config"));
        }
        self.estimator = estimator;
        Ok(self)
    }

    pub fn estimator(&self) -> &BinnedRateEstimator {
        &self.estimator
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn refreshes(&self) -> &[RefreshEvent] {
        &self.refreshes
    }

    pub fn step(&mut self) -> Result<StepOutcome> {
        let cfg = self.estimator.config;
        let alpha = loop {
            let t = 1.0 - self.rng.random::<f64>();
            let a = self.schedule.alpha(t);
            if a < 1.0 {
                break a;
            }
        };
        // data points are visited in a fresh random permutation each epoch
        if self.order.is_empty() {
            self.order = (0..self.dataset.len()).collect();
            self.order.shuffle(&mut self.rng);
        }
        let x0 = self.dataset.point(self.order.pop().expect("nonempty epoch"));
        let sigma = (1.0 - alpha * alpha).sqrt();
        let eps = rng::normal_vec(&mut self.rng, x0.len());
        let x: Vec<f64> = x0.iter().zip(&eps).map(|(a0, e)| alpha * a0 + sigma * e).collect();
        let x_hat = self.predictor.predict(&x, alpha)?;
        let eps_hat = noise_from_data(&x, alpha, &x_hat)?;
        let loss = 0.5 * eps.iter().zip(&eps_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        if let Some(hook) = self.hook.as_mut() {
            hook.on_step(self.step, alpha, &eps, &eps_hat, loss)?;
        }

        if self.step >= cfg.warmup && alpha >= cfg.alpha_threshold {
            let d2 = probe_pair(&x, alpha, self.predictor, cfg.delta_alpha, &mut self.rng)?;
            let bin = self.estimator.bin_index(alpha)?;
            self.estimator.ema_update(bin, d2)?;
        }
        self.step += 1;

        let refreshed = self.step > cfg.warmup && (self.step - cfg.warmup).is_multiple_of(cfg.refresh_interval);
        if refreshed {
            self.refresh()?;
        }
        Ok(StepOutcome {
            loss,
            alpha,
            refreshed,
        })
    }

    /// Runs `n` steps and returns the mean loss.
    pub fn run(&mut self, n: usize) -> Result<f64> {
        let mut total = 0.0;
        for _ in 0..n {
            total += self.step()?.loss;
        }
        Ok(if n > 0 { total / n as f64 } else { 0.0 })
    }

    /// Rebuilds the schedule from the current bins.
    pub fn refresh(&mut self) -> Result<()> {
        let cfg = self.estimator.config;
        let rate = self.estimator.rate_from_bins()?;
        let next = solve_schedule(&rate, cfg.xi, cfg.alpha_max, cfg.alpha_min, cfg.schedule_knots)?;
        let change = next.sup_distance(&self.schedule);
        let schedule_path = match &self.schedule_dir {
            Some(dir) => {
                let path = dir.join(format!("schedule_{}.csv", self.step));
                next.save(&path)?;
                Some(path)
            }
            None => None,
        };
        info!("step {}: schedule refreshed (sup change {change:.3e})", self.step);
        self.refreshes.push(RefreshEvent {
            step: self.step,
            schedule_path,
            change,
        });
        self.schedule = next;
        Ok(())
    }

    /// Saves the estimator state as JSON.
    pub fn save_estimator(&self, path: &Path) -> Result<()> {
        crate::io::write_string(path, &self.estimator.to_json_string()?)
    }
}

impl std::fmt::Debug for AdaptiveTrainer<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AdaptiveTrainer")
            .field("step", &self.step)
            .field("estimator", &self.estimator)
            .field("refreshes", &self.refreshes.len())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::PosteriorMean;

    fn est() -> BinnedRateEstimator {
        BinnedRateEstimator::new(AdaptiveConfig::default()).unwrap()
    }

    #[test]
    fn bin_index_cases() {
        let e = est();
        assert_eq!(e.bin_index(0.01).unwrap(), 0);
        assert_eq!(e.bin_index(1.0).unwrap(), 99);
        assert_eq!(e.bin_index(0.505).unwrap(), 50);
        assert!(e.bin_index(0.005).is_err());
    }

    #[test]
    fn ema_one_step_and_degenerate_decay() {
        let mut e = est();
        e.ema_update(3, 1.0).unwrap();
        assert!((e.d2()[3] - (0.995e-6 + 0.005)).abs() < 1e-15);
        assert!(e.ema_update(3, -1.0).is_err());

        let mut z = BinnedRateEstimator::new(AdaptiveConfig { decay: 0.0, ..Default::default() }).unwrap();
        z.ema_update(0, 0.7).unwrap();
        z.ema_update(0, 0.3).unwrap();
        assert_eq!(z.d2()[0], 0.3);
    }

    #[test]
    fn ema_geometric_series() {
        let mut e = est();
        for _ in 0..50 {
            e.ema_update(0, 2.0).unwrap();
        }
        let k = 0.995f64.powi(50);
        assert!((e.d2()[0] - (k * 1e-6 + (1.0 - k) * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn untouched_bins_give_constant_table() {
        let t = est().rate_from_bins().unwrap();
        assert_eq!(t.len(), 102);
        assert_eq!(t.alphas()[0], 0.0);
        assert_eq!(t.alphas()[1], 0.01);
        for v in t.values() {
            assert!((v - 1e-3f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn table_is_flat_below_threshold() {
        let mut e = est();
        e.ema_update(0, 5.0).unwrap();
        let t = e.rate_from_bins().unwrap();
        assert_eq!(t.eval(0.0), t.eval(0.01));
        assert_eq!(t.eval(0.004), t.eval(0.01));
    }

    #[test]
    fn bias_correction_recovers_constant_input() {
        let cfg = AdaptiveConfig { bias_correction: true, ..Default::default() };
        let mut e = BinnedRateEstimator::new(cfg).unwrap();
        for _ in 0..7 {
            e.ema_update(2, 0.04).unwrap();
        }
        assert!((e.effective_d2()[2] - 0.04).abs() < 1e-12);
        assert_eq!(e.effective_d2()[3], INITIAL_D2);
    }

    #[test]
    fn estimator_json_round_trip() {
        let mut e = est();
        e.ema_update(7, 0.25).unwrap();
        let back = BinnedRateEstimator::from_json_str(&e.to_json_string().unwrap()).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn single_point_training_has_zero_loss_and_probes() {
        let ds = PointDataset::from_scalars(&[0.3]).unwrap();
        let p = PosteriorMean::new(ds.clone());
        let cfg = AdaptiveConfig { warmup: 10, refresh_interval: 5, ..Default::default() };
        let mut tr = AdaptiveTrainer::new(&ds, &p, cfg, 4).unwrap();
        for i in 0..30 {
            let out = tr.step().unwrap();
            assert!(out.loss <= 1e-20, "step {i}: loss {}", out.loss);
            if i < 10 {
                assert!(tr.estimator().updates().iter().all(|&u| u == 0));
            }
        }
        assert_eq!(tr.refreshes().len(), 4);
        assert!(tr.estimator().d2().iter().all(|&d| d <= INITIAL_D2));
    }

    #[test]
    fn probe_rejects_nonpositive_target() {
        let ds = PointDataset::from_scalars(&[0.3]).unwrap();
        let p = PosteriorMean::new(ds);
        let mut r = rng::stream(0, 0);
        assert!(probe_pair(&[0.1], 0.001, &p, 1e-3, &mut r).is_err());
        assert_eq!(probe_pair(&[0.1], 0.5, &p, 1e-3, &mut r).unwrap(), 0.0);
    }
}
