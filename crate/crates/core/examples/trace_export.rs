// Export a run to CSV/JSON and diagnose it again from disk.

use ptlab::anneal::{AnnealingSchedule, Scheme, StreamRng, TargetModel};
use ptlab::diagnostics::{export_run, TraceTable};
use ptlab::engine::{run_replicas, PtConfig, RunSummary};
use ptlab::explorers::{ladder, IdealEle, IidReference};
use ptlab::models::GaussianPair;

pub fn run_example() -> ptlab::Result<()> {
    let model = GaussianPair::mean_shift(vec![3.0])?;
    let reference = IidReference::new(&model)?;
    let ele = IdealEle::new(&model);
    let kernels = ladder(&reference, &ele, 4);
    let cfg = PtConfig::new(Scheme::Nrpt, AnnealingSchedule::uniform(4)?, 300, 2, 9);
    let init = |_: usize, g: &mut StreamRng| model.sample_reference(g).expect("gaussian reference");
    let traces = run_replicas(&cfg, &model, &kernels, &init, |_, t| t)?;

    let dir = std::env::temp_dir().join(format!("ptlab-trace-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| ptlab::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    for f in export_run(&traces, &dir, 60)? {
        println!("wrote {}", f.display());
    }
    let table = TraceTable::read_csv(&dir.join("trace.csv"))?;
    println!("read back {} rows over {} chains", table.rows.len(), table.chains);
    println!("{}", serde_json::to_string(&RunSummary::from_traces(&traces, 60)?)?);
    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
