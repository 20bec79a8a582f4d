//! DDIM and DPM-Solver++(2M) on uniform and constant-rate grids.

use crs::eval::{compute_rate, wasserstein_1d, RateMetric};
use crs::metrics::VxConfig;
use crs::samplers::{sample, SamplerKind, SamplerSpec};
use crs::{discretize, solve_schedule, NoiseSchedule, PointDataset, PosteriorMean};

fn main() -> crs::Result<()> {
    let ds = PointDataset::builtin("toy3")?;
    let predictor = PosteriorMean::new(ds.clone());
    let rate = compute_rate(&ds, RateMetric::Vx, &VxConfig::default(), 0)?;
    let crs = solve_schedule(&rate.table, 1.0, 1.0, 0.01, 1001)?;
    let uniform = NoiseSchedule::linear(1.0, 0.01)?;

    // reference: the dataset repeated to the sample count
    let n = 6000;
    let reference: Vec<f64> = (0..n).map(|i| ds.point(i % ds.len())[0]).collect();

    println!("{:<10} {:<9} {:>5} {:>10}", "sampler", "schedule", "nfe", "w2");
    for kind in [SamplerKind::Ddim { eta: 0.0 }, SamplerKind::DpmPp2m] {
        for (name, schedule) in [("uniform", &uniform), ("crs", &crs)] {
            for nfe in [5, 10, 20] {
                let spec = SamplerSpec::new(kind, discretize(schedule, nfe, false)?)?;
                let xs = sample(&predictor, &spec, n, 1)?;
                let w2 = wasserstein_1d(&xs, &reference)?;
                println!("{:<10} {name:<9} {nfe:>5} {w2:>10.4}", kind.to_string());
            }
        }
    }
    Ok(())
}
