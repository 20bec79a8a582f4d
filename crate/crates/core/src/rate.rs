//! Tabulated rate functions `v(alpha)` and the quadrature shared by the solver.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{self, TwoColumn};

/// Rates below this floor are lifted to it before exponentiation.
pub const RATE_FLOOR: f64 = 1e-12;

/// Minimum number of uniform quadrature intervals between the integration bounds.
pub const MIN_QUADRATURE_INTERVALS: usize = 4096;

/// A nonnegative rate sampled on a strictly increasing grid of `alpha` values.
///
/// Evaluation interpolates linearly between knots and clamps to the nearest
/// endpoint value outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    alphas: Vec<f64>,
    values: Vec<f64>,
}

impl RateTable {
    pub fn new(alphas: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if alphas.len() != values.len() {
            return Err(Error::InvalidRateTable(format!(
                "{} alphas but {} values",
                alphas.len(),
                values.len()
            )));
        }
        if alphas.len() < 2 {
            return Err(Error::InvalidRateTable(
                "at least two grid points are required".into(),
            ));
        }
        if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::InvalidRateTable(format!("alpha {a} outside [0, 1]")));
        }
        if alphas.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidRateTable(
                "alphas must be strictly increasing".into(),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidRateTable(format!(
                "rate value {v} is not finite and nonnegative"
            )));
        }
        Ok(Self { alphas, values })
    }

    /// Tabulates `f` on the given grid.
    pub fn from_fn(alphas: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = alphas.iter().map(|&a| f(a)).collect();
        Self::new(alphas, values)
    }

    /// A constant rate on `[0, 1]`.
    pub fn constant(value: f64) -> Result<Self> {
        Self::new(vec![0.0, 1.0], vec![value, value])
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.alphas[0], *self.alphas.last().unwrap())
    }

    pub fn eval(&self, alpha: f64) -> f64 {
        interp_clamped(&self.alphas, &self.values, alpha)
    }

    /// Returns a copy with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.alphas.clone(),
            self.values.iter().map(|v| v * factor).collect(),
        )
    }

    /// Integral of `max(v, floor)^xi` over `[lo, hi]` by composite trapezoid.
    pub fn integrate_pow(&self, xi: f64, lo: f64, hi: f64) -> f64 {
        let grid = self.quadrature_grid(lo, hi);
        let f: Vec<f64> = grid.iter().map(|&a| self.eval_pow(a, xi)).collect();
        cumulative_trapezoid(&grid, &f).last().copied().unwrap_or(0.0)
    }

    pub(crate) fn eval_pow(&self, alpha: f64, xi: f64) -> f64 {
        self.eval(alpha).max(RATE_FLOOR).powf(xi)
    }

    /// Uniform grid of at least [`MIN_QUADRATURE_INTERVALS`] intervals on
    /// `[lo, hi]`, merged with every table knot strictly inside the interval so
    /// the piecewise-linear interpolant is integrated without kink error.
    pub(crate) fn quadrature_grid(&self, lo: f64, hi: f64) -> Vec<f64> {
        let n = MIN_QUADRATURE_INTERVALS;
        let mut grid: Vec<f64> = (0..=n)
            .map(|i| lo + (hi - lo) * (i as f64 / n as f64))
            .collect();
        grid[n] = hi;
        grid.extend(self.alphas.iter().copied().filter(|&a| a > lo && a < hi));
        grid.sort_by(|a, b| a.total_cmp(b));
        grid.dedup();
        grid
    }

    pub fn to_two_column(&self) -> TwoColumn {
        TwoColumn {
            alphas: self.alphas.clone(),
            values: self.values.clone(),
        }
    }

    pub fn from_two_column(data: TwoColumn) -> Result<Self> {
        Self::new(data.alphas, data.values)
    }

    pub fn to_csv_string(&self) -> String {
        io::to_csv_string(("alpha", "value"), &self.to_two_column())
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

    /// Loads from `.json` or CSV depending on the extension.
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_two_column(io::read_two_column(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_two_column(path, ("alpha", "value"), &self.to_two_column())
    }
}

/// Linear interpolation on increasing `xs`, clamped to the end values.
pub(crate) fn interp_clamped(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    // first index with xs[i] > x; 1 <= i <= n-1
    let i = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let (y0, y1) = (ys[i - 1], ys[i]);
    if x == x0 {
        return y0;
    }
    y0 + (y1 - y0) * ((x - x0) / (x1 - x0))
}

/// Running trapezoid integral; the first entry is zero.
pub(crate) fn cumulative_trapezoid(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..xs.len() {
        acc += 0.5 * (xs[i] - xs[i - 1]) * (ys[i] + ys[i - 1]);
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_malformed_tables() {
        assert!(RateTable::new(vec![0.0], vec![1.0]).is_err());
        assert!(RateTable::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(RateTable::new(vec![0.5, 0.2], vec![1.0, 1.0]).is_err());
        assert!(RateTable::new(vec![0.0, 1.5], vec![1.0, 1.0]).is_err());
        assert!(RateTable::new(vec![0.0, 1.0], vec![-1.0, 1.0]).is_err());
        assert!(RateTable::new(vec![0.0, 1.0], vec![f64::NAN, 1.0]).is_err());
        assert!(RateTable::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn interpolates_and_clamps() {
        let t = RateTable::new(vec![0.2, 0.4, 0.8], vec![1.0, 3.0, 2.0]).unwrap();
        assert_eq!(t.eval(0.0), 1.0);
        assert_eq!(t.eval(0.2), 1.0);
        assert!((t.eval(0.3) - 2.0).abs() < 1e-15);
        assert_eq!(t.eval(0.4), 3.0);
        assert!((t.eval(0.6) - 2.5).abs() < 1e-15);
        assert_eq!(t.eval(1.0), 2.0);
    }

    #[test]
    fn piecewise_linear_integral_is_exact() {
        // knots at 0.3 and 0.7 are off the uniform grid only if merged in
        let t = RateTable::new(vec![0.0, 0.3, 0.7, 1.0], vec![0.0, 3.0, 1.0, 1.0]).unwrap();
        let exact = 0.5 * 0.3 * 3.0 + 0.5 * 0.4 * 4.0 + 0.3 * 1.0;
        assert!((t.integrate_pow(1.0, 0.0, 1.0) - exact).abs() < 1e-12);
    }

    #[test]
    fn csv_and_json_round_trip_bit_exact() {
        let alphas = vec![0.0, 0.1, 1.0 / 3.0, 0.7000000000000001, 1.0];
        let values = vec![1e-300, std::f64::consts::PI, 2.0 / 7.0, 1e12 + 0.5, 0.0];
        let t = RateTable::new(alphas, values).unwrap();
        assert_eq!(RateTable::from_csv_str(&t.to_csv_string()).unwrap(), t);
        assert_eq!(
            RateTable::from_json_str(&t.to_json_string().unwrap()).unwrap(),
            t
        );
    }
}
