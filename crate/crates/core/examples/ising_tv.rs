// NRPT on the 4×4 Ising torus with Gibbs exploration, checked against the
// exact target by enumeration.

use ptlab::experiments::{ising_tv_experiment, IsingInit, IsingTvConfig};

pub fn run_example() -> ptlab::Result<()> {
    let cfg = IsingTvConfig {
        replicas: 4_000,
        iterations: 12,
        init: IsingInit::AllMinus,
        ..Default::default()
    };
    let report = ising_tv_experiment(&cfg)?;
    println!("Λ̂ = {:.3}, β = {:?}", report.lambda_hat, report.schedule.betas());
    for row in &report.rows {
        println!(
            "t={:>3} TV {:.4} (noise {:.4}) bound {:.4}",
            row.t, row.tv, row.noise_floor, row.bound
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
