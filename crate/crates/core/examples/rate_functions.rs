//! Measures the four rate functions on the three-point dataset.

use crs::eval::{compute_rate, RateMetric};
use crs::metrics::VxConfig;
use crs::PointDataset;

fn main() -> crs::Result<()> {
    let ds = PointDataset::builtin("toy3")?;
    let config = VxConfig { steps: 400, samples: 4000, ..Default::default() };
    let probes = [0.1, 0.3, 0.5, 0.7, 0.9, 0.99];
    print!("{:<8}", "metric");
    for a in probes {
        print!(" {:>10}", format!("a={a}"));
    }
    println!();
    for metric in [RateMetric::Vx, RateMetric::Veps, RateMetric::Vklub, RateMetric::Vfid] {
        let est = compute_rate(&ds, metric, &config, 0)?;
        print!("{:<8}", metric.to_string());
        for a in probes {
            print!(" {:>10.4}", est.table.eval(a));
        }
        println!();
    }
    Ok(())
}
