//! Diffused density of the three-point dataset, printed as a coarse text plot.

use crs::eval::linspace;
use crs::toy::{density_mode_count, diffused_density};
use crs::PointDataset;

fn main() -> crs::Result<()> {
    let ds = PointDataset::builtin("toy3")?;
    let xs = linspace(-3.0, 3.0, 61);
    let fine = linspace(-5.0, 5.0, 2048);
    for alpha in [0.0, 0.5, 0.8, 0.9, 0.95, 0.99] {
        let mut line = String::new();
        for x in &xs {
            let q = diffused_density(&ds, alpha, &[*x])?;
            line.push(match q {
                q if q > 0.8 => '#',
                q if q > 0.4 => '*',
                q if q > 0.15 => '+',
                q if q > 0.03 => '.',
                _ => ' ',
            });
        }
        let modes = density_mode_count(&ds, alpha, &fine)?;
        println!("alpha {alpha:.2} |{line}| {modes} mode(s)");
    }
    Ok(())
}
