//! Mixes two rate shapes and shows where each puts its sampling steps.

use crs::{combine_rates, discretize, solve_schedule, MetricWeight, RateTable};

fn main() -> crs::Result<()> {
    let grid: Vec<f64> = (0..=2000).map(|i| i as f64 / 2000.0).collect();
    // one metric cares about the clean end, the other about the noisy end
    let clean = RateTable::from_fn(grid.clone(), |a| (8.0 * a).exp())?;
    let noisy = RateTable::from_fn(grid, |a| 1.0 / (0.05 + a))?;

    for w in [0.0, 0.3, 0.5, 0.7, 1.0] {
        let parts = [
            (clean.clone(), MetricWeight::new(w, 1.0)?),
            (noisy.clone(), MetricWeight::new(1.0 - w, 1.0)?),
        ];
        let combined = combine_rates(&parts, 0.01, 1.0)?;
        let schedule = solve_schedule(&combined, 1.0, 1.0, 0.01, 1001)?;
        let steps = discretize(&schedule, 10, false)?;
        let shown: Vec<String> = steps.iter().map(|a| format!("{a:.3}")).collect();
        println!("w = {w:.1}: {}", shown.join(" "));
    }
    Ok(())
}
