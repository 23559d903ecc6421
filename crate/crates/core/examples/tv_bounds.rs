// Finite-N TV bounds, their coarse envelopes and the PDMP loose bound.

use ptlab::anneal::{RngSeed, Scheme};
use ptlab::bounds::{coarse_bound, mixing_time_bound, pdmp_loose_bound, tv_bound_finite};
use ptlab::walks::{hitting_samples, sim_pdmp};

pub fn run_example() -> ptlab::Result<()> {
    let (n, r) = (6, 0.46);
    println!(
        "{:>4} {:>10} {:>10} {:>10} {:>10}",
        "t", "NRPT", "coarse", "RPT", "coarse"
    );
    for t in [1, 5, 10, 20, 40] {
        let nr = tv_bound_finite(Scheme::Nrpt, n, r, t)?;
        let rp = tv_bound_finite(Scheme::Rpt, n, r, t)?;
        let cn = coarse_bound(Scheme::Nrpt, n, r, t)?;
        let cr = coarse_bound(Scheme::Rpt, n, r, t)?;
        println!("{t:>4} {nr:>10.4} {cn:>10.4} {rp:>10.4} {cr:>10.4}");
    }

    let lambda = 4.0;
    let taus = hitting_samples(20_000, RngSeed(5), 0, |g| sim_pdmp(lambda, g));
    for t in [2.0, 5.0, 10.0] {
        let mc = taus.iter().filter(|&&x| x > t).count() as f64 / taus.len() as f64;
        println!(
            "PDMP Λ={lambda}: Pr(τ > {t}) ≈ {mc:.4} ≤ {:.4}",
            pdmp_loose_bound(lambda, t)?
        );
    }
    println!(
        "mixing time to 0.01 with C=1, ρ=0.9: {}",
        mixing_time_bound(1.0, 0.9, 0.01)?
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
