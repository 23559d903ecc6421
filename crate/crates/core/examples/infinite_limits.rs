// Large-N limits: the persistent walk against the PDMP hitting time, and
// the reversible walk against the reflected Brownian motion series.

use ptlab::anneal::{RngSeed, Scheme};
use ptlab::bounds::{nrpt_infinite_bound, rpt_infinite_tail, HittingTailTable, RPT_SERIES_TERMS};
use ptlab::laplace::c_lambda;
use ptlab::walks::{hitting_samples, sim_pdmp, sim_reflected_bm};

pub fn run_example() -> ptlab::Result<()> {
    let lambda = 4.0;
    let c = c_lambda(lambda)?;
    let pdmp = hitting_samples(20_000, RngSeed(7), 0, |g| sim_pdmp(lambda, g));
    for t in [2.0, 5.0, 10.0] {
        let mc = pdmp.iter().filter(|&&x| x > t).count() as f64 / pdmp.len() as f64;
        let finite: Vec<String> = [10usize, 30, 100]
            .iter()
            .map(|&n| {
                let tab = HittingTailTable::compute(Scheme::Nrpt, n, lambda / n as f64, (t * n as f64) as usize)?;
                Ok(format!("N={n}: {:.4}", tab.tail((t * n as f64) as usize)))
            })
            .collect::<ptlab::Result<_>>()?;
        println!(
            "NRPT t={t}: {}; PDMP {mc:.4}; bound {:.4}",
            finite.join(", "),
            nrpt_infinite_bound(lambda, t, c)?
        );
    }

    let n = 30;
    let tab = HittingTailTable::compute(Scheme::Rpt, n, 0.0, 2 * n * n)?;
    let bm = hitting_samples(2_000, RngSeed(8), 0, |g| sim_reflected_bm(1e-3, 3.0, g));
    for t in [0.5, 1.0, 2.0] {
        let series = rpt_infinite_tail(t, RPT_SERIES_TERMS)?;
        let walk = tab.tail((t * (n * n) as f64) as usize);
        let mc = bm.iter().filter(|&&x| x > t).count() as f64 / bm.len() as f64;
        println!("RPT t={t}: series {series:.4}, N={n} walk {walk:.4}, Euler BM {mc:.4}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
