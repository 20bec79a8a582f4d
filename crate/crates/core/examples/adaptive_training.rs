//! Online schedule refinement with a frozen analytic predictor.

use crs::adaptive::{AdaptiveConfig, AdaptiveTrainer};
use crs::eval::{compute_rate, RateMetric};
use crs::metrics::VxConfig;
use crs::{solve_schedule, PointDataset, PosteriorMean};

fn main() -> crs::Result<()> {
    let ds = PointDataset::builtin("toy3")?;
    let predictor = PosteriorMean::new(ds.clone());
    let config = AdaptiveConfig::default();
    let mut trainer = AdaptiveTrainer::new(&ds, &predictor, config, 17)?;

    let offline = compute_rate(&ds, RateMetric::Vx, &VxConfig::default(), 0)?;
    let target = solve_schedule(&offline.table, 1.0, config.alpha_max, config.alpha_min, config.schedule_knots)?;

    println!("{:>7} {:>10} {:>14}", "step", "mean loss", "sup to offline");
    for _ in 0..10 {
        let loss = trainer.run(5000)?;
        let gap = trainer.schedule().sup_distance(&target);
        println!("{:>7} {loss:>10.4} {gap:>14.4}", trainer.steps_done());
    }
    println!("{} refreshes", trainer.refreshes().len());
    Ok(())
}
