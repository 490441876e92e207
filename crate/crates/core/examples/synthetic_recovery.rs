//! Recovery of the correct candidate in sampled worlds with known ground
//! truth, with and without anchors.
//!
//! ```text
//! cargo run --release --example synthetic_recovery -- [seeds]
//! ```

use bace::belief::NoiseModel;
use bace::lab::{recovery_experiment, LabParams, LatentWorld};

fn main() {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let noise = NoiseModel::evolved_default();
    let worlds = [("standard", LatentWorld::standard(noise)), ("adversarial", LatentWorld::adversarial(noise))];

    println!("world\tanchoring\trounds\tmap_accuracy\tbaseline\tmean_b_correct\tmean_b_incorrect");
    for (name, world) in &worlds {
        for anchoring in [true, false] {
            for rounds in [1, 3] {
                let params = LabParams { anchoring, rounds, ..LabParams::default() };
                let s = recovery_experiment(world, &params, 0..seeds).expect("worlds have a correct candidate");
                println!(
                    "{name}\t{anchoring}\t{rounds}\t{:.3}\t{:.3}\t{:.4}\t{:.4}",
                    s.map_accuracy, s.baseline_accuracy, s.mean_belief_correct, s.mean_belief_incorrect
                );
            }
        }
    }
}
