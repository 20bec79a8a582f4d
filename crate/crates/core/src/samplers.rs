//! Reverse-process samplers: DDIM (any `eta` in `[0, 1]`) and DPM-Solver++(2M).
//!
//! Both consume an increasing alpha grid (noise to data) and a [`Predictor`].

use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::toy::Predictor;

/// Starting alphas above this are a poor stand-in for pure noise.
pub const START_ALPHA_WARNING: f64 = 0.05;
/// Samples per parallel work unit.
const BLOCK: usize = 64;

fn sigma(alpha: f64) -> f64 {
    (1.0 - alpha * alpha).max(0.0).sqrt()
}

/// Half log-SNR `log(alpha / sigma)`.
pub fn half_log_snr(alpha: f64) -> f64 {
    (alpha / sigma(alpha)).ln()
}

fn check_step(alpha_t: f64, alpha_s: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha_t) {
        return Err(invalid!("step start alpha must lie in [0, 1), got {alpha_t}"));
    }
    if !(alpha_s > alpha_t && alpha_s <= 1.0) {
        return Err(invalid!(
            "step must move toward data: need {alpha_t} < alpha_s <= 1, got {alpha_s}"
        ));
    }
    Ok(())
}

/// One DDIM update from `alpha_t` to `alpha_s > alpha_t`.
///
/// `σ̃ = eta (σ_s/σ_t) sqrt(1 - α_t²/α_s²)` and
/// `x_s = α_s x̂ + sqrt(σ_s² - σ̃²) ε̂ + σ̃ z`. No randomness is drawn when
/// `eta = 0` or `alpha_s = 1`.
pub fn ddim_step<R: Rng + ?Sized>(
    x_t: &[f64],
    alpha_t: f64,
    alpha_s: f64,
    predictor: &dyn Predictor,
    eta: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_step(alpha_t, alpha_s)?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid!("eta must lie in [0, 1], got {eta}"));
    }
    let x_hat = predictor.predict(x_t, alpha_t)?;
    if alpha_s >= 1.0 {
        return Ok(x_hat);
    }
    let (s_t, s_s) = (sigma(alpha_t), sigma(alpha_s));
    let noise_scale = eta * (s_s / s_t) * (1.0 - (alpha_t * alpha_t) / (alpha_s * alpha_s)).sqrt();
    let det_var = s_s * s_s - noise_scale * noise_scale;
    assert!(det_var >= -1e-15, "DDIM noise exceeds sigma_s");
    let det = det_var.max(0.0).sqrt();
    let mut out: Vec<f64> = x_t
        .iter()
        .zip(&x_hat)
        .map(|(x, xh)| alpha_s * xh + det * (x - alpha_t * xh) / s_t)
        .collect();
    if noise_scale > 0.0 {
        let mut z = vec![0.0; out.len()];
        rng::fill_normal(rng, &mut z);
        for (o, zi) in out.iter_mut().zip(&z) {
            *o += noise_scale * zi;
        }
    }
    Ok(out)
}

/// State carried between DPM-Solver++(2M) steps: `(x̂_t, λ_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Carry {
    pub x_hat: Vec<f64>,
    pub lambda: f64,
}

/// One DPM-Solver++(2M) update with `λ = log(α/σ)`.
///
/// Without `previous` this is the first-order exponential integrator
/// `x_s = (σ_s/σ_t) x_t + α_s (1 - e^{-h}) x̂_t`. With it, `x̂_t` is replaced
/// by `(1 + 1/(2r)) x̂_t - 1/(2r) x̂_prev`, `r = h_prev / h`. A step to
/// `alpha_s = 1` returns `x̂_t`.
pub fn dpmpp2m_step(
    x_t: &[f64],
    alpha_t: f64,
    alpha_s: f64,
    predictor: &dyn Predictor,
    previous: Option<&Carry>,
) -> Result<(Vec<f64>, Carry)> {
    check_step(alpha_t, alpha_s)?;
    let x_hat = predictor.predict(x_t, alpha_t)?;
    let lambda_t = half_log_snr(alpha_t);
    let carry_next = |x_hat: Vec<f64>| Carry {
        x_hat,
        lambda: lambda_t,
    };
    if alpha_s >= 1.0 {
        return Ok((x_hat.clone(), carry_next(x_hat)));
    }
    let lambda_s = half_log_snr(alpha_s);
    let h = lambda_s - lambda_t;
    let (s_t, s_s) = (sigma(alpha_t), sigma(alpha_s));
    let gain = alpha_s * (-(-h).exp_m1());
    let out = match previous {
        None => x_t
            .iter()
            .zip(&x_hat)
            .map(|(x, xh)| (s_s / s_t) * x + gain * xh)
            .collect(),
        Some(prev) => {
            if prev.x_hat.len() != x_hat.len() {
                return Err(invalid!("carry dimension does not match state"));
            }
            let h_prev = lambda_t - prev.lambda;
            if !(h_prev > 0.0) {
                return Err(invalid!("log-SNR must increase along the reverse pass"));
            }
            let c = 0.5 * h / h_prev;
            x_t.iter()
                .zip(&x_hat)
                .zip(&prev.x_hat)
                .map(|((x, xh), xp)| (s_s / s_t) * x + gain * ((1.0 + c) * xh - c * xp))
                .collect()
        }
    };
    Ok((out, carry_next(x_hat)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplerKind {
    Ddim { eta: f64 },
    DpmPp2m,
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "dpmpp2m" {
            return Ok(SamplerKind::DpmPp2m);
        }
        if s == "ddim" {
            return Ok(SamplerKind::Ddim { eta: 0.0 });
        }
        if let Some(rest) = s.strip_prefix("ddim:") {
            let eta: f64 = rest
                .parse()
                .map_err(|_| invalid!("bad eta `{rest}` in sampler `{s}`"))?;
            if !(0.0..=1.0).contains(&eta) {
                return Err(invalid!("eta must lie in [0, 1], got {eta}"));
            }
            return Ok(SamplerKind::Ddim { eta });
        }
        Err(Error::UnknownName(s.to_string()))
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplerKind::Ddim { eta } => write!(f, "ddim:{eta}"),
            SamplerKind::DpmPp2m => f.write_str("dpmpp2m"),
        }
    }
}

/// A sampler together with the alpha grid it traverses.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    alphas: Vec<f64>,
}

impl SamplerSpec {
    /// Sorts `alphas` ascending and removes duplicates, so any ordering of
    /// the same grid gives the same spec.
    pub fn new(kind: SamplerKind, mut alphas: Vec<f64>) -> Result<Self> {
        if alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(invalid!("sampling alphas must lie in [0, 1]"));
        }
        alphas.sort_by(f64::total_cmp);
        alphas.dedup();
        if alphas.len() < 2 {
            return Err(invalid!("sampling grid needs at least two distinct alphas"));
        }
        if alphas[0] >= 1.0 {
            return Err(invalid!("sampling must start below alpha = 1"));
        }
        if alphas[0] > START_ALPHA_WARNING {
            warn!(
                "sampling starts at alpha = {} > {START_ALPHA_WARNING}; standard normal noise is a poor proxy there",
                alphas[0]
            );
        }
        Ok(Self { kind, alphas })
    }

    /// Increasing alphas of the reverse pass.
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Predictor evaluations per sample.
    pub fn nfe(&self) -> usize {
        self.alphas.len() - 1
    }

    /// Runs one trajectory from `x` (a state at `alphas[0]`).
    pub fn run<R: Rng + ?Sized>(
        &self,
        predictor: &dyn Predictor,
        mut x: Vec<f64>,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let mut carry: Option<Carry> = None;
        for w in self.alphas.windows(2) {
            x = match self.kind {
                SamplerKind::Ddim { eta } => ddim_step(&x, w[0], w[1], predictor, eta, rng)?,
                SamplerKind::DpmPp2m => {
                    let (next, c) = dpmpp2m_step(&x, w[0], w[1], predictor, carry.as_ref())?;
                    carry = Some(c);
                    next
                }
            };
        }
        Ok(x)
    }
}

/// Draws `n_samples` standard normal starts and runs them through `spec`.
///
/// Sample `i` uses the random stream `(seed, i)`; the output is row-major
/// `n_samples × dim` and independent of thread count.
pub fn sample(
    predictor: &dyn Predictor,
    spec: &SamplerSpec,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let d = predictor.dim();
    let rows: Vec<Vec<f64>> = (0..n_samples.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut out = Vec::with_capacity(BLOCK * d);
            for i in b * BLOCK..((b + 1) * BLOCK).min(n_samples) {
                let mut r = rng::stream(seed, i as u64);
                let x = rng::normal_vec(&mut r, d);
                out.extend(spec.run(predictor, x, &mut r)?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(rows.concat())
}

/// Runs given starting states (row-major) through `spec`.
pub fn sample_from(
    predictor: &dyn Predictor,
    spec: &SamplerSpec,
    initial: &[f64],
    seed: u64,
) -> Result<Vec<f64>> {
    let d = predictor.dim();
    if !initial.len().is_multiple_of(d) {
        return Err(invalid!("initial states are not a multiple of dimension {d}"));
    }
    let rows: Vec<Vec<f64>> = initial
        .par_chunks(d)
        .enumerate()
        .map(|(i, x)| {
            let mut r = rng::stream(seed, i as u64);
            spec.run(predictor, x.to_vec(), &mut r)
        })
        .collect::<Result<_>>()?;
    Ok(rows.concat())
}
