//! Recovers the cosine schedule from its own rate.
//!
//! The rate of `alpha(t) = cos(pi t / 2)` is `2 / (pi sqrt(1 - alpha^2))`;
//! solving for a constant rate must give the cosine back.

use std::f64::consts::PI;

use crs::{solve_schedule, RateTable};

fn main() -> crs::Result<()> {
    // knots cluster toward alpha = 1, where the rate diverges; the endpoint
    // gets a finite stand-in that the linear interpolant integrates harmlessly
    let n = 4000;
    let alphas: Vec<f64> = (0..=n).map(|i| (PI / 2.0 * i as f64 / n as f64).sin()).collect();
    let mut values: Vec<f64> = alphas[..n].iter().map(|a| 2.0 / (PI * (1.0 - a * a).sqrt())).collect();
    values.push(2.0 * values[n - 1]);
    let rate = RateTable::new(alphas, values)?;
    let schedule = solve_schedule(&rate, 1.0, 1.0, 0.0, 1001)?;

    println!("{:>6} {:>12} {:>12}", "t", "solved", "cos(pi t/2)");
    for t in [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0] {
        println!("{t:>6.2} {:>12.8} {:>12.8}", schedule.alpha(t), (PI * t / 2.0).cos());
    }
    let worst = (0..=1000)
        .map(|i| {
            let t = i as f64 / 1000.0;
            (schedule.alpha(t) - (PI * t / 2.0).cos()).abs()
        })
        .fold(0.0, f64::max);
    println!("max deviation {worst:.2e}");
    Ok(())
}
