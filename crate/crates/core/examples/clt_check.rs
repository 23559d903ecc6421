// Standardized ergodic averages from independent NRPT runs should look
// Gaussian; Anderson–Darling checks that.

use ptlab::experiments::{bimodal_clt, CltConfig};

pub fn run_example() -> ptlab::Result<()> {
    let cfg = CltConfig {
        runs: 40,
        iterations: 2048,
        tune_rounds: 4,
        ..Default::default()
    };
    let rep = bimodal_clt(&cfg)?;
    println!(
        "Λ̂ = {:.3}; z mean {:+.3}, var {:.3}; A*² = {:.3}, p = {:.3}",
        rep.lambda_hat, rep.z_mean, rep.z_var, rep.anderson_darling.a2_star, rep.anderson_darling.p_value
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
