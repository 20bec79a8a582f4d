//! Noise schedules `alpha(t)` and the constant-rate solver that builds them
//! from rate tables.
//!
//! A schedule solved from a rate `v` satisfies `-dalpha/dt = C v(alpha)^-xi`
//! with `C = ∫ v^xi dalpha` over `[alpha_min, alpha_max]`, i.e. the rescaled
//! time `t(alpha) = ∫_alpha^alpha_max v^xi / C` advances at a constant rate of
//! distributional change.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io::{self, TwoColumn};
use crate::rate::{cumulative_trapezoid, interp_clamped, RateTable, RATE_FLOOR};

/// Weight and exponent applied to one rate table inside [`combine_rates`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricWeight {
    pub weight: f64,
    pub xi: f64,
}

impl MetricWeight {
    pub fn new(weight: f64, xi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(invalid!("metric weight {weight} outside [0, 1]"));
        }
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(invalid!("metric exponent {xi} must be positive"));
        }
        Ok(Self { weight, xi })
    }
}

/// Tolerance on `Σ w_m = 1` for a weight combination.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Monotone decreasing map `t ∈ [0, 1] → alpha`, linear between knots.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    knots_t: Vec<f64>,
    knots_alpha: Vec<f64>,
}

impl NoiseSchedule {
    pub fn new(knots_t: Vec<f64>, knots_alpha: Vec<f64>) -> Result<Self> {
        if knots_t.len() != knots_alpha.len() {
            return Err(Error::InvalidSchedule(format!(
                "{} time knots but {} alpha knots",
                knots_t.len(),
                knots_alpha.len()
            )));
        }
        if knots_t.len() < 2 {
            return Err(Error::InvalidSchedule("at least two knots required".into()));
        }
        if knots_t[0] != 0.0 || *knots_t.last().unwrap() != 1.0 {
            return Err(Error::InvalidSchedule(
                "time knots must start at 0 and end at 1".into(),
            ));
        }
        if knots_t.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidSchedule(
                "time knots must be strictly increasing".into(),
            ));
        }
        if let Some(a) = knots_alpha.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::InvalidSchedule(format!("alpha {a} outside [0, 1]")));
        }
        if knots_alpha.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::InvalidSchedule(
                "alpha knots must be strictly decreasing".into(),
            ));
        }
        Ok(Self {
            knots_t,
            knots_alpha,
        })
    }

    /// Knots at `t = i / (n - 1)` with `alpha = f(t)`.
    pub fn from_fn(n_knots: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n_knots < 2 {
            return Err(Error::InvalidSchedule("at least two knots required".into()));
        }
        let knots_t = uniform_unit_grid(n_knots);
        let knots_alpha = knots_t.iter().map(|&t| f(t)).collect();
        Self::new(knots_t, knots_alpha)
    }

    /// `alpha(t) = alpha_max - (alpha_max - alpha_min) t`.
    pub fn linear(alpha_max: f64, alpha_min: f64) -> Result<Self> {
        Self::new(vec![0.0, 1.0], vec![alpha_max, alpha_min])
    }

    pub fn knots_t(&self) -> &[f64] {
        &self.knots_t
    }

    pub fn knots_alpha(&self) -> &[f64] {
        &self.knots_alpha
    }

    pub fn alpha_max(&self) -> f64 {
        self.knots_alpha[0]
    }

    pub fn alpha_min(&self) -> f64 {
        *self.knots_alpha.last().unwrap()
    }

    pub fn alpha(&self, t: f64) -> f64 {
        interp_clamped(&self.knots_t, &self.knots_alpha, t)
    }

    pub fn sigma(&self, t: f64) -> f64 {
        let a = self.alpha(t);
        (1.0 - a * a).max(0.0).sqrt()
    }

    /// Inverse map `alpha → t`, clamped to `[0, 1]`.
    pub fn time_of(&self, alpha: f64) -> f64 {
        let n = self.knots_alpha.len();
        let rev_a: Vec<f64> = self.knots_alpha.iter().rev().copied().collect();
        let rev_t: Vec<f64> = self.knots_t.iter().rev().copied().collect();
        debug_assert_eq!(rev_a.len(), n);
        interp_clamped(&rev_a, &rev_t, alpha)
    }

    /// Largest absolute difference in `alpha` over the union of both knot grids.
    pub fn sup_distance(&self, other: &NoiseSchedule) -> f64 {
        self.knots_t
            .iter()
            .chain(other.knots_t.iter())
            .map(|&t| (self.alpha(t) - other.alpha(t)).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_two_column(&self) -> TwoColumn {
        TwoColumn {
            alphas: self.knots_alpha.clone(),
            values: self.knots_t.clone(),
        }
    }

    pub fn from_two_column(data: TwoColumn) -> Result<Self> {
        Self::new(data.values, data.alphas)
    }

    pub fn to_csv_string(&self) -> String {
        io::to_csv_string(("alpha", "t"), &self.to_two_column())
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        Self::from_two_column(io::from_csv_str(text)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        io::to_json_string(&self.to_two_column())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_two_column(io::from_json_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_two_column(io::read_two_column(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_two_column(path, ("alpha", "t"), &self.to_two_column())
    }
}

pub(crate) fn uniform_unit_grid(n_knots: usize) -> Vec<f64> {
    let last = (n_knots - 1) as f64;
    let mut grid: Vec<f64> = (0..n_knots).map(|i| i as f64 / last).collect();
    grid[n_knots - 1] = 1.0;
    grid
}

fn check_bounds(alpha_max: f64, alpha_min: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha_min) || !(0.0..=1.0).contains(&alpha_max) {
        return Err(invalid!(
            "alpha bounds ({alpha_max}, {alpha_min}) must lie in [0, 1]"
        ));
    }
    if !(alpha_min < alpha_max) {
        return Err(invalid!(
            "alpha_min {alpha_min} must be below alpha_max {alpha_max}"
        ));
    }
    Ok(())
}

fn rate_vanishes_on(rate: &RateTable, grid: &[f64]) -> bool {
    grid.iter().all(|&a| rate.eval(a) < RATE_FLOOR)
}

/// Solves the constant-rate schedule for `rate` between `alpha_max` (at
/// `t = 0`) and `alpha_min` (at `t = 1`), tabulated at `n_knots` uniform times.
///
/// `xi > 1` concentrates knots where the rate is large; `xi < 1` flattens
/// the allocation toward uniform spacing in `alpha`.
pub fn solve_schedule(
    rate: &RateTable,
    xi: f64,
    alpha_max: f64,
    alpha_min: f64,
    n_knots: usize,
) -> Result<NoiseSchedule> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(invalid!("xi must be positive, got {xi}"));
    }
    check_bounds(alpha_max, alpha_min)?;
    if n_knots < 2 {
        return Err(invalid!("n_knots must be at least 2, got {n_knots}"));
    }

    let grid = rate.quadrature_grid(alpha_min, alpha_max);
    if rate_vanishes_on(rate, &grid) {
        return Err(Error::ZeroRate {
            alpha_min,
            alpha_max,
        });
    }
    let integrand: Vec<f64> = grid.iter().map(|&a| rate.eval_pow(a, xi)).collect();
    let cumulative = cumulative_trapezoid(&grid, &integrand);
    let total = *cumulative.last().unwrap();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::ZeroRate {
            alpha_min,
            alpha_max,
        });
    }

    let knots_t = uniform_unit_grid(n_knots);
    let mut knots_alpha: Vec<f64> = knots_t
        .iter()
        .map(|&t| interp_clamped(&cumulative, &grid, total * (1.0 - t)))
        .collect();
    knots_alpha[0] = alpha_max;
    knots_alpha[n_knots - 1] = alpha_min;

    NoiseSchedule::new(knots_t, knots_alpha).map_err(|e| {
        Error::Numerical(format!(
            "schedule inversion lost monotonicity ({e}); reduce n_knots or raise the rate floor"
        ))
    })
}

/// Rate function for which `schedule` is the constant-rate solution with
/// `xi = 1`, normalized to unit integral over the schedule's alpha range.
pub fn schedule_to_rate(schedule: &NoiseSchedule) -> Result<RateTable> {
    let t = schedule.knots_t();
    let a = schedule.knots_alpha();
    let n = t.len();
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        let (lo, hi) = match k {
            0 => (0, 1),
            k if k == n - 1 => (n - 2, n - 1),
            k => (k - 1, k + 1),
        };
        let slope = (a[hi] - a[lo]) / (t[hi] - t[lo]);
        let v = -1.0 / slope;
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "zero slope near t = {} gives an infinite rate",
                t[k]
            )));
        }
        values.push(v);
    }
    let alphas: Vec<f64> = a.iter().rev().copied().collect();
    values.reverse();
    let norm = *cumulative_trapezoid(&alphas, &values).last().unwrap();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Numerical(format!(
            "rate normalization {norm} is not positive"
        )));
    }
    RateTable::new(alphas, values.into_iter().map(|v| v / norm).collect())
}

/// Number of uniform intervals added to the union grid of a combination.
const COMBINE_GRID_INTERVALS: usize = 1024;

/// Weighted sum of normalized, exponentiated rates on `[alpha_min, alpha_max]`:
/// `v = Σ w_m v_m^xi_m / C_m` with `C_m = ∫ v_m^xi_m`.
///
/// The exponents are already applied, so the result should be solved with `xi = 1`.
pub fn combine_rates(
    components: &[(RateTable, MetricWeight)],
    alpha_min: f64,
    alpha_max: f64,
) -> Result<RateTable> {
    if components.is_empty() {
        return Err(invalid!("no rate tables to combine"));
    }
    check_bounds(alpha_max, alpha_min)?;
    let weight_sum: f64 = components.iter().map(|(_, w)| w.weight).sum();
    if (weight_sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(invalid!("metric weights sum to {weight_sum}, expected 1"));
    }

    let mut norms = Vec::with_capacity(components.len());
    for (table, w) in components {
        MetricWeight::new(w.weight, w.xi)?;
        let (d0, d1) = table.domain();
        if !(d0.max(alpha_min) < d1.min(alpha_max)) {
            return Err(invalid!(
                "rate table on [{d0}, {d1}] does not overlap [{alpha_min}, {alpha_max}]"
            ));
        }
        let grid = table.quadrature_grid(alpha_min, alpha_max);
        if rate_vanishes_on(table, &grid) {
            return Err(Error::ZeroRate {
                alpha_min,
                alpha_max,
            });
        }
        norms.push(table.integrate_pow(w.xi, alpha_min, alpha_max));
    }

    let mut grid: Vec<f64> = (0..=COMBINE_GRID_INTERVALS)
        .map(|i| alpha_min + (alpha_max - alpha_min) * (i as f64 / COMBINE_GRID_INTERVALS as f64))
        .collect();
    grid[COMBINE_GRID_INTERVALS] = alpha_max;
    for (table, _) in components {
        grid.extend(
            table
                .alphas()
                .iter()
                .copied()
                .filter(|&a| a > alpha_min && a < alpha_max),
        );
    }
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();

    let values = grid
        .iter()
        .map(|&a| {
            components
                .iter()
                .zip(&norms)
                .map(|((table, w), c)| w.weight * table.eval_pow(a, w.xi) / c)
                .sum()
        })
        .collect();
    RateTable::new(grid, values)
}

/// `alpha(i / n_steps)` for `i = 0..=n_steps`; with `prepend_unit_alpha` the
/// first entry is replaced by exactly 1.
pub fn discretize(
    schedule: &NoiseSchedule,
    n_steps: usize,
    prepend_unit_alpha: bool,
) -> Result<Vec<f64>> {
    if n_steps == 0 {
        return Err(invalid!("n_steps must be at least 1"));
    }
    let mut out: Vec<f64> = (0..=n_steps)
        .map(|i| schedule.alpha(i as f64 / n_steps as f64))
        .collect();
    out[n_steps] = schedule.alpha_min();
    if prepend_unit_alpha {
        out[0] = 1.0;
    }
    if out.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::Numerical(format!(
            "discretized schedule with {n_steps} steps is not strictly decreasing"
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
    }

    #[test]
    fn constant_rate_gives_linear_schedule() {
        let s = solve_schedule(&RateTable::constant(3.0).unwrap(), 1.0, 1.0, 0.0, 101).unwrap();
        assert!((s.alpha(0.25) - 0.75).abs() < 1e-12);
        for (&t, &a) in s.knots_t().iter().zip(s.knots_alpha()) {
            assert!((a - (1.0 - t)).abs() < 1e-12);
        }
    }

    #[test]
    fn boundaries_are_exact() {
        let rate = RateTable::from_fn(uniform(0.0, 1.0, 50), |a| 1.0 + (5.0 * a).sin().abs()).unwrap();
        let s = solve_schedule(&rate, 1.3, 0.999998, 0.0125, 77).unwrap();
        assert_eq!(s.alpha(0.0), 0.999998);
        assert_eq!(s.alpha(1.0), 0.0125);
        assert_eq!(s.knots_alpha()[0], 0.999998);
        assert_eq!(*s.knots_alpha().last().unwrap(), 0.0125);
    }

    #[test]
    fn solver_errors() {
        let rate = RateTable::constant(1.0).unwrap();
        assert!(solve_schedule(&rate, 0.0, 1.0, 0.0, 10).is_err());
        assert!(solve_schedule(&rate, -1.0, 1.0, 0.0, 10).is_err());
        assert!(solve_schedule(&rate, 1.0, 0.5, 0.5, 10).is_err());
        assert!(solve_schedule(&rate, 1.0, 0.2, 0.5, 10).is_err());
        let zero = RateTable::constant(0.0).unwrap();
        let err = solve_schedule(&zero, 1.0, 1.0, 0.0, 10).unwrap_err();
        assert!(matches!(err, Error::ZeroRate { .. }));
    }

    #[test]
    fn zero_segment_is_floored_not_fatal() {
        let rate = RateTable::new(vec![0.0, 0.4, 0.6, 1.0], vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let s = solve_schedule(&rate, 1.0, 1.0, 0.0, 11).unwrap();
        assert_eq!(s.alpha(1.0), 0.0);
    }

    #[test]
    fn linear_schedule_maps_to_constant_rate() {
        let s = NoiseSchedule::from_fn(11, |t| 1.0 - t).unwrap();
        let r = schedule_to_rate(&s).unwrap();
        for &v in r.values() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn discretize_linear_and_single_step() {
        let s = NoiseSchedule::linear(1.0, 0.0).unwrap();
        assert_eq!(discretize(&s, 4, false).unwrap(), vec![1.0, 0.75, 0.5, 0.25, 0.0]);
        let s = NoiseSchedule::linear(0.9, 0.1).unwrap();
        assert_eq!(discretize(&s, 1, false).unwrap(), vec![0.9, 0.1]);
        assert_eq!(discretize(&s, 1, true).unwrap(), vec![1.0, 0.1]);
        assert!(discretize(&s, 0, false).is_err());
    }

    #[test]
    fn combine_validates_inputs() {
        let r = RateTable::constant(1.0).unwrap();
        assert!(combine_rates(&[], 0.0, 1.0).is_err());
        let bad = [
            (r.clone(), MetricWeight { weight: 0.5, xi: 1.0 }),
            (r.clone(), MetricWeight { weight: 0.6, xi: 1.0 }),
        ];
        assert!(combine_rates(&bad, 0.0, 1.0).unwrap_err().is_validation());
        let zero = [(RateTable::constant(0.0).unwrap(), MetricWeight { weight: 1.0, xi: 1.0 })];
        assert!(matches!(
            combine_rates(&zero, 0.0, 1.0).unwrap_err(),
            Error::ZeroRate { .. }
        ));
    }

    #[test]
    fn schedule_round_trips_through_files() {
        let s = NoiseSchedule::from_fn(9, |t| (std::f64::consts::FRAC_PI_2 * t).cos()).unwrap();
        assert_eq!(NoiseSchedule::from_csv_str(&s.to_csv_string()).unwrap(), s);
        assert_eq!(NoiseSchedule::from_json_str(&s.to_json_string().unwrap()).unwrap(), s);
    }
}
