//! Conventional baseline schedules and variance-preserving ↔ EDM conversion.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::schedule::NoiseSchedule;

/// Number of diffusion steps of the discrete linear-beta schedule.
pub const LINEAR_STEPS: usize = 1000;
pub const LINEAR_BETA_MIN: f64 = 1e-4;
pub const LINEAR_BETA_MAX: f64 = 0.02;

/// Endpoint clamp for the shifted cosine log-SNR, which diverges at t ∈ {0, 1}.
pub const SHIFTED_COSINE_EPS: f64 = 1e-9;
/// Knot count used when tabulating the shifted cosine schedule.
pub const SHIFTED_COSINE_KNOTS: usize = 1001;
/// Affine rescale bounds applied to shifted cosine sampling grids.
pub const SHIFTED_COSINE_SAMPLING_MIN: f64 = 0.01;
pub const SHIFTED_COSINE_SAMPLING_MAX: f64 = 1.0;

/// `alpha = 1 / sqrt(1 + sigma^2)`: the variance-preserving coefficient with
/// the same log-SNR as EDM noise level `sigma_edm`.
pub fn alpha_from_edm_sigma(sigma_edm: f64) -> Result<f64> {
    if !(sigma_edm > 0.0 && sigma_edm.is_finite()) {
        return Err(invalid!("EDM sigma must be positive, got {sigma_edm}"));
    }
    Ok(1.0 / (1.0 + sigma_edm * sigma_edm).sqrt())
}

/// Inverse of [`alpha_from_edm_sigma`]: `sigma = sqrt(1 - alpha^2) / alpha`.
pub fn sigma_from_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid!("alpha must lie in (0, 1), got {alpha}"));
    }
    Ok(((1.0 - alpha) * (1.0 + alpha)).sqrt() / alpha)
}

/// `log(alpha^2 / (1 - alpha^2))`.
pub fn log_snr(alpha: f64) -> f64 {
    let a2 = alpha * alpha;
    (a2 / (1.0 - a2)).ln()
}

/// The DDPM linear-beta schedule at its 1001 native knots `t = i / 1000`.
pub fn linear_schedule() -> NoiseSchedule {
    let mut alphas = Vec::with_capacity(LINEAR_STEPS + 1);
    let mut alpha = 1.0;
    alphas.push(alpha);
    for i in 1..=LINEAR_STEPS {
        alpha *= (1.0 - linear_beta(i)).sqrt();
        alphas.push(alpha);
    }
    NoiseSchedule::from_fn(LINEAR_STEPS + 1, |t| {
        alphas[(t * LINEAR_STEPS as f64).round() as usize]
    })
    .expect("linear-beta schedule is strictly decreasing")
}

/// `beta_i` for `i` in `1..=1000`, linear from 1e-4 to 0.02.
pub fn linear_beta(i: usize) -> f64 {
    LINEAR_BETA_MIN + (LINEAR_BETA_MAX - LINEAR_BETA_MIN) * (i - 1) as f64 / (LINEAR_STEPS - 1) as f64
}

/// Continuous shifted cosine: `alpha = sqrt(sigmoid(lambda))` with
/// `lambda(t) = -2 log tan(pi t / 2) + 2 log(64 / d)`.
pub fn shifted_cosine_alpha(t: f64, resolution: u32) -> f64 {
    let t = t.clamp(SHIFTED_COSINE_EPS, 1.0 - SHIFTED_COSINE_EPS);
    let lambda = -2.0 * (std::f64::consts::FRAC_PI_2 * t).tan().ln()
        + 2.0 * (64.0 / resolution as f64).ln();
    sigmoid(lambda).sqrt()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Shifted cosine tabulated on [`SHIFTED_COSINE_KNOTS`] knots.
pub fn shifted_cosine_schedule(resolution: u32) -> Result<NoiseSchedule> {
    if resolution == 0 {
        return Err(invalid!("shifted cosine resolution must be at least 1"));
    }
    NoiseSchedule::from_fn(SHIFTED_COSINE_KNOTS, |t| shifted_cosine_alpha(t, resolution))
}

/// Sampling grid `alpha_min + (alpha_max - alpha_min) alpha_shifted(i / n)`.
pub fn shifted_cosine_sampling(resolution: u32, n_steps: usize) -> Result<Vec<f64>> {
    if resolution == 0 || n_steps == 0 {
        return Err(invalid!("resolution and n_steps must be at least 1"));
    }
    let span = SHIFTED_COSINE_SAMPLING_MAX - SHIFTED_COSINE_SAMPLING_MIN;
    Ok((0..=n_steps)
        .map(|i| {
            let t = i as f64 / n_steps as f64;
            SHIFTED_COSINE_SAMPLING_MIN + span * shifted_cosine_alpha(t, resolution)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdmParams {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub rho: f64,
}

impl Default for EdmParams {
    fn default() -> Self {
        Self {
            sigma_min: 0.002,
            sigma_max: 80.0,
            rho: 7.0,
        }
    }
}

impl EdmParams {
    pub fn new(sigma_min: f64, sigma_max: f64, rho: f64) -> Result<Self> {
        if !(sigma_min > 0.0 && sigma_max.is_finite() && sigma_min < sigma_max) {
            return Err(invalid!(
                "EDM sigmas must satisfy 0 < sigma_min < sigma_max, got ({sigma_min}, {sigma_max})"
            ));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(invalid!("EDM rho must be positive, got {rho}"));
        }
        Ok(Self {
            sigma_min,
            sigma_max,
            rho,
        })
    }

    /// `sigma(t) = (smax^(1/rho) + (smin^(1/rho) - smax^(1/rho)) (1 - t))^rho`;
    /// `t = 0` gives `sigma_min`, `t = 1` gives `sigma_max`.
    pub fn sigma(&self, t: f64) -> f64 {
        let inv = 1.0 / self.rho;
        let hi = self.sigma_max.powf(inv);
        let lo = self.sigma_min.powf(inv);
        (hi + (lo - hi) * (1.0 - t)).powf(self.rho)
    }

    pub fn alpha(&self, t: f64) -> f64 {
        let s = self.sigma(t);
        1.0 / (1.0 + s * s).sqrt()
    }
}

/// EDM sampling grid of `n_steps + 1` alphas; entry 0 is overridden to 1.
pub fn edm_schedule(params: &EdmParams, n_steps: usize) -> Result<Vec<f64>> {
    if n_steps == 0 {
        return Err(invalid!("n_steps must be at least 1"));
    }
    let mut out: Vec<f64> = (0..=n_steps)
        .map(|i| params.alpha(i as f64 / n_steps as f64))
        .collect();
    out[0] = 1.0;
    Ok(out)
}

/// The continuous EDM map `t → alpha` as a schedule between
/// `alpha(sigma_min)` and `alpha(sigma_max)`.
pub fn edm_noise_schedule(params: &EdmParams, n_knots: usize) -> Result<NoiseSchedule> {
    NoiseSchedule::from_fn(n_knots, |t| params.alpha(t))
}

/// A baseline schedule addressable by name.
#[derive(Debug, Clone, PartialEq)]
pub enum ZooSchedule {
    Linear,
    ShiftedCosine { resolution: u32 },
    Edm(EdmParams),
}

impl ZooSchedule {
    /// Sampling grid with `n_steps` intervals, ordered from high to low alpha.
    pub fn sampling_alphas(&self, n_steps: usize) -> Result<Vec<f64>> {
        match self {
            ZooSchedule::Linear => crate::schedule::discretize(&linear_schedule(), n_steps, false),
            ZooSchedule::ShiftedCosine { resolution } => {
                shifted_cosine_sampling(*resolution, n_steps)
            }
            ZooSchedule::Edm(p) => edm_schedule(p, n_steps),
        }
    }

    /// Continuous schedule (training-phase form).
    pub fn schedule(&self) -> Result<NoiseSchedule> {
        match self {
            ZooSchedule::Linear => Ok(linear_schedule()),
            ZooSchedule::ShiftedCosine { resolution } => shifted_cosine_schedule(*resolution),
            ZooSchedule::Edm(p) => edm_noise_schedule(p, 1001),
        }
    }
}

impl FromStr for ZooSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "linear" {
            return Ok(ZooSchedule::Linear);
        }
        if let Some(rest) = s.strip_prefix("shifted-cosine:") {
            let resolution: u32 = rest
                .trim()
                .parse()
                .map_err(|_| invalid!("bad shifted-cosine resolution `{rest}`"))?;
            if resolution == 0 {
                return Err(invalid!("shifted-cosine resolution must be at least 1"));
            }
            return Ok(ZooSchedule::ShiftedCosine { resolution });
        }
        if let Some(rest) = s.strip_prefix("edm:") {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 3 {
                return Err(invalid!("expected edm:<smin>,<smax>,<rho>, got `{s}`"));
            }
            let nums: Vec<f64> = parts
                .iter()
                .map(|p| crate::io::parse_f64(p))
                .collect::<Result<_>>()?;
            return Ok(ZooSchedule::Edm(EdmParams::new(nums[0], nums[1], nums[2])?));
        }
        if s == "edm" {
            return Ok(ZooSchedule::Edm(EdmParams::default()));
        }
        Err(Error::UnknownName(s.to_string()))
    }
}

impl fmt::Display for ZooSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZooSchedule::Linear => write!(f, "linear"),
            ZooSchedule::ShiftedCosine { resolution } => write!(f, "shifted-cosine:{resolution}"),
            ZooSchedule::Edm(p) => write!(f, "edm:{},{},{}", p.sigma_min, p.sigma_max, p.rho),
        }
    }
}
