// Local-exploration diagnostics. On disjoint modes the mode-local kernel
// mixes energies at once (ρ₁ ≈ 0) even though PT cannot cross modes; on the
// thin shell the Gibbs kernel moves x₁ by only O(1/a) per step.

use ptlab::anneal::{AnnealingSchedule, RngSeed, Scheme, StreamRng, TargetModel};
use ptlab::diagnostics::{lag1_band, lag1_energy_autocorr, EnergyTrace};
use ptlab::engine::{run_pt, PtConfig};
use ptlab::explorers::{ladder, Explorer, IidReference, ModeLocal, ThinShellGibbs};
use ptlab::models::{DisjointModes, ThinShell};

fn report<M: TargetModel>(name: &str, model: &M, kernels: &[&dyn Explorer<M::State>]) -> ptlab::Result<()> {
    let cfg = PtConfig::new(
        Scheme::Nrpt,
        AnnealingSchedule::uniform(kernels.len() - 1)?,
        2_000,
        1,
        4,
    );
    let init = |_: usize, g: &mut StreamRng| model.sample_reference(g).expect("reference draw");
    let trace = run_pt(&cfg, model, kernels, &init)?;
    for n in [1, kernels.len() - 1] {
        let e = EnergyTrace::from_trace(&trace, n)?;
        println!(
            "{name} chain {n}: ρ₁ = {:+.3} (band ±{:.3})",
            lag1_energy_autocorr(&e)?,
            lag1_band(&e)
        );
    }
    Ok(())
}

pub fn run_example() -> ptlab::Result<()> {
    let modes = DisjointModes;
    let r = IidReference::new(&modes)?;
    report("disjoint modes", &modes, &ladder(&r, &ModeLocal, 6))?;

    let a = 100.0;
    let shell = ThinShell::new(a)?;
    let r = IidReference::new(&shell)?;
    report("thin shell", &shell, &ladder(&r, &ThinShellGibbs { shell }, 6))?;

    let gibbs = ThinShellGibbs { shell };
    let mut g = RngSeed(6).stream(0, 0);
    let mut x = [0.5, 0.5 * a];
    let steps: Vec<f64> = (0..5_000)
        .map(|_| {
            let y = gibbs.step(&x, 1.0, &mut g);
            let d = y[0] - x[0];
            x = y;
            d
        })
        .collect();
    let sd = (steps.iter().map(|d| d * d).sum::<f64>() / steps.len() as f64).sqrt();
    println!(
        "thin shell a={a}: sd of Δx₁ per Gibbs step {sd:.4} (1/a = {:.4})",
        1.0 / a
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
