//! Where does a passing result stop counting as evidence?
//!
//! Prints the credibility threshold for a few noise models, then checks the
//! sign of the pass evidence on a grid.
//!
//! ```text
//! cargo run --example threshold_sweep
//! ```

use bace::belief::{credibility_threshold, woe_test, LogOddsLimit, NoiseModel, Outcome, UpdateTarget};
use bace::lab::threshold_sweep;

fn main() {
    let limit = LogOddsLimit::default();
    let models = [
        ("evolved", NoiseModel::evolved_default()),
        ("anchor", NoiseModel::anchor_default()),
        ("flat", NoiseModel::new(0.3, 0.3, 0.3).unwrap()),
        ("noisy", NoiseModel::new(0.05, 0.1, 0.6).unwrap()),
    ];
    println!("model\talpha\tbeta\tgamma\ttest_threshold\tcode_threshold");
    for (name, n) in &models {
        println!(
            "{name}\t{}\t{}\t{}\t{:.6}\t{:.6}",
            n.alpha,
            n.beta,
            n.gamma,
            credibility_threshold(n, UpdateTarget::TestUpdate),
            credibility_threshold(n, UpdateTarget::CodeUpdate)
        );
    }

    let evolved = NoiseModel::evolved_default();
    println!("\nb_code\twoe_test(pass)");
    for b in [0.01, 0.04, 1.0 / 19.0, 0.07, 0.2, 0.5, 0.9] {
        println!("{b:.4}\t{:+.6}", woe_test(Outcome::Pass, b, &evolved, limit));
    }

    let noises: Vec<NoiseModel> = models.iter().map(|(_, n)| *n).collect();
    let beliefs: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    let rows = threshold_sweep(&noises, &beliefs, limit);
    let disagreements = rows.iter().filter(|r| !r.agrees()).count();
    println!("\n{} grid points, {disagreements} disagreements", rows.len());
}
