// Adaptive schedule tuning on a bimodal target with random-walk exploration.

use ptlab::anneal::{StreamRng, TargetModel};
use ptlab::experiments::bimodal_rwm;
use ptlab::explorers::{ladder, IidReference};
use ptlab::gcb::{tune_rounds, TuningConfig};
use ptlab::models::bimodal_pair;

pub fn run_example() -> ptlab::Result<()> {
    let model = bimodal_pair();
    let reference = IidReference::new(&model)?;
    let rwm = bimodal_rwm(&model, 3);
    let kernels = ladder(&reference, &rwm, 8);
    let init = |_: usize, g: &mut StreamRng| model.sample_reference(g).expect("gaussian reference");
    let mut cfg = TuningConfig::new(8, 200, 4, 11);
    cfg.rounds = 4;
    let report = tune_rounds(&cfg, &model, &kernels, &init)?;
    for (k, round) in report.rounds.iter().enumerate() {
        let worst = round.rejection.iter().cloned().fold(0.0, f64::max);
        println!(
            "round {k}: {} iterations, Λ̂ = {:.3}, worst pair rejection {worst:.3}",
            round.iterations, round.lambda_hat
        );
    }
    println!("tuned β: {:?}", report.schedule.betas());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
