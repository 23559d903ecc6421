// With ideal exploration the engine's index process is exactly the
// persistent (or reversible) walk.

use ptlab::anneal::Scheme;
use ptlab::experiments::ele_exactness;

pub fn run_example() -> ptlab::Result<()> {
    for scheme in [Scheme::Nrpt, Scheme::Rpt] {
        let rep = ele_exactness(scheme, 5, 0.3, 4_000, &[5, 20], 2)?;
        for (law, anc) in rep.index_law.iter().zip(&rep.ancestral) {
            println!(
                "{scheme} t={:>3}: KS {:.4} (band {:.4}); survival {:.4} ± {:.4} vs exact tail {:.4}",
                law.t, law.ks, law.band, anc.survival, anc.stderr, anc.tail_t
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
