// Exact hitting tails of the index walks against simulation.

use ptlab::anneal::{RngSeed, Scheme};
use ptlab::bounds::HittingTailTable;
use ptlab::walks::{hitting_samples, sim_persistent_walk, sim_seo_walk, SurvivalCurve};

pub fn run_example() -> ptlab::Result<()> {
    let (n, r) = (6, 0.46);
    let grid: Vec<f64> = (0..=25).map(|t| t as f64).collect();
    for scheme in [Scheme::Nrpt, Scheme::Rpt] {
        let exact = HittingTailTable::compute(scheme, n, r, 25)?;
        let samples = hitting_samples(20_000, RngSeed(3), 0, |g| match scheme {
            Scheme::Nrpt => sim_persistent_walk(n, r, g) as f64,
            Scheme::Rpt => sim_seo_walk(n, r, g) as f64,
        });
        let mc = SurvivalCurve::from_samples(&samples, &grid);
        println!(
            "{scheme}: Pr(hit by 20) exact {:.4}, simulated {:.4}",
            1.0 - exact.tail(20),
            1.0 - mc.survival[20]
        );
        for t in 0..=25 {
            assert!((mc.survival[t] - exact.tail(t)).abs() <= 5.0 * mc.stderr[t] + 1e-3);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
