//! Baseline schedules and their rates.

use crs::schedule_to_rate;
use crs::zoo::{EdmParams, ZooSchedule};

fn main() -> crs::Result<()> {
    let zoo = [
        ("linear", ZooSchedule::Linear),
        ("shifted-cosine:64", ZooSchedule::ShiftedCosine { resolution: 64 }),
        ("edm", ZooSchedule::Edm(EdmParams::default())),
    ];
    for (name, z) in &zoo {
        let steps = z.sampling_alphas(10)?;
        let shown: Vec<String> = steps.iter().map(|a| format!("{a:.4}")).collect();
        println!("{name:<18} {}", shown.join(" "));
    }

    println!();
    println!("implied rate |dalpha/dt| of the continuous forms:");
    for (name, z) in &zoo {
        let rate = schedule_to_rate(&z.schedule()?)?;
        let at: Vec<String> = [0.1, 0.5, 0.9].iter().map(|a| format!("{:.3}", rate.eval(*a))).collect();
        println!("{name:<18} at alpha 0.1/0.5/0.9: {}", at.join(" "));
    }
    Ok(())
}
