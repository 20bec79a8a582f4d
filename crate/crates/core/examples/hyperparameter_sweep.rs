//! Two-stage weight and exponent search for a v_x + v_eps combination.

use crs::eval::{sweep, ExperimentConfig, MetricSpec, SweepGrid};
use crs::metrics::VxConfig;

fn main() -> crs::Result<()> {
    let metric = |name: &str| MetricSpec { metric: name.to_string(), weight: 1.0, xi: 1.0 };
    let config = ExperimentConfig {
        dataset: "toy3".into(),
        metrics: vec![metric("v_x"), metric("v_eps")],
        nfe: vec![5, 10],
        n_samples: 5000,
        rate: VxConfig { steps: 400, samples: 4000, ..Default::default() },
        bootstrap: 50,
        sweep: SweepGrid { weights: vec![0.1, 0.5, 0.9], xis: vec![0.5, 1.0, 1.4] },
        ..Default::default()
    };
    let report = sweep(&config)?;
    println!("{:>4} {:>5} {:>10} {:>10} {:>9} {:>4}", "nfe", "stage", "weights", "xis", "w2", "rank");
    for r in &report.rows {
        println!("{:>4} {:>5} {:>10} {:>10} {:>9.4} {:>4}", r.nfe, r.stage, r.weights, r.xis, r.distance, r.rank);
    }
    Ok(())
}
