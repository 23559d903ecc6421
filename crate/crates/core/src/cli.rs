//! Command-line front end. Every subcommand accepts its options as flags or
//! as keys of a JSON file given with `--config`; flags win over the file.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::anneal::{AnnealingSchedule, RngSeed, Scheme, StreamRng, TargetModel};
use crate::bounds::{coarse_bound, tv_bound_finite, HittingTailTable};
use crate::diagnostics::{
    export_run, export_walk_paths, ks_against_tail, ks_band_99, lag1_band, lag1_energy_autocorr, write_csv_rows,
    write_json, EnergyTrace, TraceTable,
};
use crate::engine::{run_replicas, PtConfig, RestartCounter, RunSummary};
use crate::error::{ensure, Error, Result};
use crate::experiments::{bimodal_rwm, ising_tv_experiment, IsingInit, IsingTvConfig};
use crate::explorers::{ladder, Explorer, IdealEle, IidReference, IsingGibbs, ModeLocal, ThinShellGibbs};
use crate::gcb::{gcb_direct_mc, tune_rounds, TuningConfig, TuningReport};
use crate::laplace::{c_analytic_bound_default, default_t_grid, CCurve, LaplaceParams};
use crate::models::{bimodal_pair, DisjointModes, ExactPathSampler, GaussianPair, IsingModel, ThinShell, ALL_MINUS};
use crate::walks::{
    hitting_samples, persistent_walk_path, seo_walk_path, sim_persistent_walk, sim_seo_walk, SurvivalCurve,
};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "PTLAB_OUT";

#[derive(Debug, Parser)]
#[command(name = "ptlab", version, about = "Parallel tempering laboratory")]
pub struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run PT on a benchmark model and export traces.
    Sample(SampleArgs),
    /// Tune an annealing schedule over rounds of doubling budget.
    Tune(TuneArgs),
    /// Estimate the global communication barrier.
    Gcb(TuneArgs),
    /// Exact hitting tails and coarse bounds of the index walks.
    Bounds(BoundsArgs),
    /// Simulate index walks and compare with the exact tails.
    Hitting(HittingArgs),
    /// C(Λ) by numerical Laplace inversion.
    Laplace(LaplaceArgs),
    /// Ising total-variation experiment against the exact target.
    IsingValidate(IsingArgs),
    /// Diagnostics for an exported trace.csv.
    Diagnose(DiagnoseArgs),
}

fn default_out() -> PathBuf {
    std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("ptlab-out"))
}

/// Overlays the flags that were given onto the JSON config file, then
/// deserializes; unknown keys in the file are rejected.
fn resolve<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> Result<T> {
    let mut base = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            serde_json::from_str::<Value>(&text)
                .map_err(|e| Error::invalid(format!("config {}: {e}", path.display())))?
        }
        None => json!({}),
    };
    let obj = base
        .as_object_mut()
        .ok_or_else(|| Error::invalid("config file must hold a JSON object"))?;
    if let Value::Object(over) = serde_json::to_value(flags)? {
        obj.extend(over);
    }
    serde_json::from_value(base).map_err(|e| Error::invalid(format!("config: {e}")))
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// ising | bimodal | gaussian | disjoint-modes | thin-shell
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// gibbs | ideal | rwm | mode-local (default depends on the model)
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explorer: Option<String>,
    /// nrpt | rpt
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    /// Number of chains minus one.
    #[arg(long = "N")]
    #[serde(rename = "N")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_pairs: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Fraction of iterations discarded for statistics.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<f64>,
    /// uniform | tuned
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<String>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune_rounds: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune_iterations: Option<usize>,
    /// Mean shift of the gaussian model.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Scale of the thin-shell model.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Ising initial state: all-minus | random
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<String>,
    /// Random-walk steps per exploration.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explorer: Option<String>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_pairs: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    /// Iterations of the first round; round k uses 2^k times this.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_iterations: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Also run the direct quadrature oracle (exactly samplable models).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct: Option<bool>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_pairs: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tmax: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HittingArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_pairs: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tmax: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Number of trajectories to export.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    /// Last time step of exported trajectories.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaplaceArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Comma-separated Λ values.
    #[arg(long)]
    #[arg(value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    /// Emit only the supremum table (skip the C(Λ, t) curves).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<bool>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chains: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    /// all-minus | random
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<String>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune_rounds: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune_iterations: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune_replicas: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Path to a trace.csv written by `sample`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Parses `argv`, runs the subcommand, prints JSON, and returns the exit
/// code: 0 on success, 1 on validation errors, 2 on runtime errors.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                print!("{e}");
                return 0;
            }
            report_error("invalid_argument", &e.to_string());
            return 1;
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Error::invalid("--threads must be positive")),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))
            .and_then(|pool| pool.install(|| run(&cli.command))),
        None => run(&cli.command),
    };
    match result {
        Ok(v) => {
            use std::io::Write;
            let text = serde_json::to_string_pretty(&v).expect("serializable summary");
            let _ = writeln!(std::io::stdout(), "{text}");
            0
        }
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn report_error(kind: &str, message: &str) {
    eprintln!(
        "{}",
        json!({ "error": { "kind": kind, "message": message.trim_end() } })
    );
}

/// Runs a parsed command and returns its JSON summary.
pub fn run(cmd: &Command) -> Result<Value> {
    match cmd {
        Command::Sample(a) => cmd_sample(&resolve(a, a.config.as_deref())?),
        Command::Tune(a) => cmd_tune(&resolve(a, a.config.as_deref())?, false),
        Command::Gcb(a) => cmd_tune(&resolve(a, a.config.as_deref())?, true),
        Command::Bounds(a) => cmd_bounds(&resolve(a, a.config.as_deref())?),
        Command::Hitting(a) => cmd_hitting(&resolve(a, a.config.as_deref())?),
        Command::Laplace(a) => cmd_laplace(&resolve(a, a.config.as_deref())?),
        Command::IsingValidate(a) => cmd_ising(&resolve(a, a.config.as_deref())?),
        Command::Diagnose(a) => cmd_diagnose(&resolve(a, a.config.as_deref())?),
    }
}

fn out_dir(out: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = out.clone().unwrap_or_else(default_out);
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    Ok(dir)
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

// ---------------------------------------------------------------------------
// Model dispatch

#[derive(Debug, Clone)]
struct ModelOpts {
    model: String,
    explorer: Option<String>,
    n: usize,
    mu: f64,
    a: f64,
    init: IsingInit,
    steps: usize,
}

/// Work that is generic over the model's state type.
trait Visitor {
    type Out;
    fn visit<M: TargetModel>(
        self,
        model: &M,
        kernels: &[&dyn Explorer<M::State>],
        init: &(dyn Fn(usize, &mut StreamRng) -> M::State + Sync),
    ) -> Result<Self::Out>;
}

fn unknown_explorer(model: &str, e: &str) -> Error {
    Error::invalid(format!("explorer '{e}' is not available for model '{model}'"))
}

fn with_model<V: Visitor>(o: &ModelOpts, v: V) -> Result<V::Out> {
    ensure(o.n >= 1, || "N must be at least 1".into())?;
    let explorer = o.explorer.as_deref();
    match o.model.as_str() {
        "ising" => {
            let m = IsingModel;
            let r = IidReference::new(&m)?;
            let init = |_: usize, g: &mut StreamRng| match o.init {
                IsingInit::AllMinus => ALL_MINUS,
                IsingInit::Random => m.sample_reference(g).expect("uniform reference"),
            };
            match explorer.unwrap_or("gibbs") {
                "gibbs" => v.visit(&m, &ladder(&r, &IsingGibbs::default(), o.n), &init),
                "ideal" => v.visit(&m, &ladder(&r, &IdealEle::new(&m), o.n), &init),
                e => Err(unknown_explorer("ising", e)),
            }
        }
        "bimodal" => {
            let m = bimodal_pair();
            let r = IidReference::new(&m)?;
            let init = |_: usize, g: &mut StreamRng| m.sample_reference(g).expect("gaussian reference");
            match explorer.unwrap_or("rwm") {
                "rwm" => v.visit(&m, &ladder(&r, &bimodal_rwm(&m, o.steps), o.n), &init),
                "ideal" => v.visit(&m, &ladder(&r, &IdealEle::new(&m), o.n), &init),
                e => Err(unknown_explorer("bimodal", e)),
            }
        }
        "gaussian" => {
            let m = GaussianPair::mean_shift(vec![o.mu])?;
            let r = IidReference::new(&m)?;
            let init = |_: usize, g: &mut StreamRng| m.sample_reference(g).expect("gaussian reference");
            match explorer.unwrap_or("ideal") {
                "ideal" => v.visit(&m, &ladder(&r, &IdealEle::new(&m), o.n), &init),
                e => Err(unknown_explorer("gaussian", e)),
            }
        }
        "disjoint-modes" => {
            let m = DisjointModes;
            let r = IidReference::new(&m)?;
            let init = |_: usize, g: &mut StreamRng| m.sample_reference(g).expect("uniform reference");
            match explorer.unwrap_or("mode-local") {
                "mode-local" => v.visit(&m, &ladder(&r, &ModeLocal, o.n), &init),
                e => Err(unknown_explorer("disjoint-modes", e)),
            }
        }
        "thin-shell" => {
            let m = ThinShell::new(o.a)?;
            let r = IidReference::new(&m)?;
            let init = |_: usize, g: &mut StreamRng| m.sample_reference(g).expect("product reference");
            match explorer.unwrap_or("gibbs") {
                "gibbs" => v.visit(&m, &ladder(&r, &ThinShellGibbs { shell: m }, o.n), &init),
                e => Err(unknown_explorer("thin-shell", e)),
            }
        }
        other => Err(Error::invalid(format!(
            "unknown model '{other}' (expected ising, bimodal, gaussian, disjoint-modes or thin-shell)"
        ))),
    }
}

fn parse_init(s: &Option<String>) -> Result<IsingInit> {
    s.as_deref().unwrap_or("random").parse()
}

// ---------------------------------------------------------------------------
// sample

struct SampleVisitor<'a> {
    args: &'a SampleArgs,
    scheme: Scheme,
    n: usize,
}

impl Visitor for SampleVisitor<'_> {
    type Out = Value;

    fn visit<M: TargetModel>(
        self,
        model: &M,
        kernels: &[&dyn Explorer<M::State>],
        init: &(dyn Fn(usize, &mut StreamRng) -> M::State + Sync),
    ) -> Result<Value> {
        let a = self.args;
        let seed = a.seed.unwrap_or(1);
        let burn = a.burn_in.unwrap_or(crate::gcb::DEFAULT_BURN_IN);
        ensure((0.0..1.0).contains(&burn), || "burn_in must lie in [0, 1)".into())?;
        let schedule = match a.schedule.as_deref().unwrap_or("tuned") {
            "uniform" => AnnealingSchedule::uniform(self.n)?,
            "tuned" => {
                let mut tc = TuningConfig::new(
                    self.n,
                    a.tune_iterations.unwrap_or(200),
                    4,
                    seed.wrapping_add(1_000_003),
                );
                tc.scheme = self.scheme;
                tc.rounds = a.tune_rounds.unwrap_or(5);
                tune_rounds(&tc, model, kernels, init)?.schedule
            }
            s => {
                return Err(Error::invalid(format!(
                    "unknown schedule '{s}' (expected uniform or tuned)"
                )))
            }
        };
        let iterations = a.iterations.unwrap_or(1000);
        let cfg = PtConfig::new(self.scheme, schedule, iterations, a.replicas.unwrap_or(4), seed);
        let traces = run_replicas(&cfg, model, kernels, init, |_, tr| tr)?;
        let burn_iters = (burn * iterations as f64).floor() as usize;
        let files = export_run(&traces, &out_dir(&a.out)?, burn_iters)?;
        let summary = RunSummary::from_traces(&traces, burn_iters)?;
        Ok(json!({
            "command": "sample",
            "summary": summary,
            "burn_in_iterations": burn_iters,
            "files": files.iter().map(|p| path_str(p)).collect::<Vec<_>>(),
        }))
    }
}

fn cmd_sample(a: &SampleArgs) -> Result<Value> {
    let o = ModelOpts {
        model: a.model.clone().unwrap_or_else(|| "bimodal".into()),
        explorer: a.explorer.clone(),
        n: a.n_pairs.unwrap_or(12),
        mu: a.mu.unwrap_or(2.0),
        a: a.a.unwrap_or(100.0),
        init: parse_init(&a.init)?,
        steps: a.steps.unwrap_or(3),
    };
    let v = SampleVisitor {
        args: a,
        scheme: a.scheme.unwrap_or(Scheme::Nrpt),
        n: o.n,
    };
    with_model(&o, v)
}

// ---------------------------------------------------------------------------
// tune and gcb

struct TuneVisitor {
    cfg: TuningConfig,
}

impl Visitor for TuneVisitor {
    type Out = TuningReport;

    fn visit<M: TargetModel>(
        self,
        model: &M,
        kernels: &[&dyn Explorer<M::State>],
        init: &(dyn Fn(usize, &mut StreamRng) -> M::State + Sync),
    ) -> Result<TuningReport> {
        tune_rounds(&self.cfg, model, kernels, init)
    }
}

fn direct_oracle(o: &ModelOpts, grid: usize, pairs: usize, seed: u64) -> Result<crate::gcb::McEstimate> {
    fn go<M: ExactPathSampler>(m: &M, grid: usize, pairs: usize, seed: u64) -> Result<crate::gcb::McEstimate> {
        gcb_direct_mc(m, grid, pairs, RngSeed(seed))
    }
    match o.model.as_str() {
        "ising" => go(&IsingModel, grid, pairs, seed),
        "bimodal" => go(&bimodal_pair(), grid, pairs, seed),
        "gaussian" => go(&GaussianPair::mean_shift(vec![o.mu])?, grid, pairs, seed),
        m => Err(Error::invalid(format!("no exact path sampler for model '{m}'"))),
    }
}

fn cmd_tune(a: &TuneArgs, gcb: bool) -> Result<Value> {
    let o = ModelOpts {
        model: a.model.clone().unwrap_or_else(|| "ising".into()),
        explorer: a.explorer.clone(),
        n: a.n_pairs.unwrap_or(5),
        mu: a.mu.unwrap_or(2.0),
        a: a.a.unwrap_or(100.0),
        init: IsingInit::Random,
        steps: a.steps.unwrap_or(3),
    };
    let seed = a.seed.unwrap_or(1);
    let mut cfg = TuningConfig::new(o.n, a.base_iterations.unwrap_or(256), a.replicas.unwrap_or(8), seed);
    cfg.scheme = a.scheme.unwrap_or(Scheme::Nrpt);
    cfg.rounds = a.rounds.unwrap_or(3);
    cfg.burn_in = a.burn_in.unwrap_or(crate::gcb::DEFAULT_BURN_IN);
    let report = with_model(&o, TuneVisitor { cfg: cfg.clone() })?;
    let dir = out_dir(&a.out)?;
    let last = report.rounds.last().expect("at least one round");
    let value = if gcb {
        let stats_barrier = crate::gcb::BarrierFn::new(&last.schedule, &last.rejection)?;
        let direct = if a.direct.unwrap_or(false) {
            Some(direct_oracle(
                &o,
                a.grid.unwrap_or(200),
                a.pairs.unwrap_or(10_000),
                seed,
            )?)
        } else {
            None
        };
        json!({
            "command": "gcb",
            "model": o.model,
            "lambda_hat": last.lambda_hat,
            "rejection": last.rejection,
            "measured_schedule": last.schedule,
            "barrier_knots": stats_barrier.knots(),
            "tuned_schedule": report.schedule,
            "direct_quadrature": direct,
        })
    } else {
        json!({ "command": "tune", "model": o.model, "config": cfg, "report": report })
    };
    let name = if gcb { "gcb.json" } else { "tune.json" };
    write_json(&dir.join(name), &value)?;
    Ok(value)
}

// ---------------------------------------------------------------------------
// bounds and hitting

fn cmd_bounds(a: &BoundsArgs) -> Result<Value> {
    let scheme = a.scheme.unwrap_or(Scheme::Nrpt);
    let n = a.n_pairs.unwrap_or(6);
    let r = a.r.unwrap_or(0.46);
    let tmax = a.tmax.unwrap_or(25);
    let tab = HittingTailTable::compute(scheme, n, r, tmax)?;
    let mut rows = Vec::new();
    for t in 0..=tmax {
        let tv = if t >= 1 {
            Some(tv_bound_finite(scheme, n, r, t)?)
        } else {
            None
        };
        rows.push(json!({
            "t": t,
            "tail": tab.tail(t),
            "hit_by_t": 1.0 - tab.tail(t),
            "coarse": coarse_bound(scheme, n, r, t)?,
            "tv_bound": tv,
        }));
    }
    let dir = out_dir(&a.out)?;
    let path = dir.join(format!("bounds_{scheme}.csv"));
    write_csv_rows(
        &path,
        &["t", "tail", "hit_by_t", "coarse", "tv_bound"],
        rows.iter().map(|v| {
            ["t", "tail", "hit_by_t", "coarse", "tv_bound"]
                .iter()
                .map(|k| match &v[*k] {
                    Value::Null => String::new(),
                    x => x.to_string(),
                })
                .collect::<Vec<String>>()
        }),
    )?;
    Ok(json!({ "command": "bounds", "scheme": scheme, "N": n, "r": r, "rows": rows, "file": path_str(&path) }))
}

fn cmd_hitting(a: &HittingArgs) -> Result<Value> {
    let scheme = a.scheme.unwrap_or(Scheme::Nrpt);
    let n = a.n_pairs.unwrap_or(30);
    let r = a.r.unwrap_or(0.1);
    let reps = a.reps.unwrap_or(100_000);
    let seed = RngSeed(a.seed.unwrap_or(1));
    ensure(reps >= 100, || "reps must be at least 100".into())?;
    ensure((0.0..1.0).contains(&r), || format!("r {r} outside [0, 1)"))?;
    ensure(n >= 1, || "N must be at least 1".into())?;
    let samples = hitting_samples(reps, seed, 0, |g| match scheme {
        Scheme::Nrpt => sim_persistent_walk(n, r, g) as f64,
        Scheme::Rpt => sim_seo_walk(n, r, g) as f64,
    });
    let tmax = a
        .tmax
        .unwrap_or_else(|| samples.iter().cloned().fold(0.0, f64::max) as usize);
    let tab = HittingTailTable::compute(scheme, n, r, tmax)?;
    let grid: Vec<f64> = (0..=tmax).map(|t| t as f64).collect();
    let curve = SurvivalCurve::from_samples(&samples, &grid);
    let ks = ks_against_tail(&samples, |t| tab.tail(t), tmax);
    let dir = out_dir(&a.out)?;
    let surv_path = dir.join(format!("survival_{scheme}.csv"));
    write_csv_rows(
        &surv_path,
        &["t", "empirical", "exact", "stderr"],
        (0..=tmax).map(|t| {
            vec![
                t.to_string(),
                curve.survival[t].to_string(),
                tab.tail(t).to_string(),
                curve.stderr[t].to_string(),
            ]
        }),
    )?;
    let cutoff = a.cutoff.unwrap_or(500);
    let n_paths = a.paths.unwrap_or(100);
    let paths: Vec<Vec<usize>> = (0..n_paths as u64)
        .map(|k| {
            let mut g = seed.stream(k, 1);
            match scheme {
                Scheme::Nrpt => persistent_walk_path(n, r, cutoff, &mut g),
                Scheme::Rpt => seo_walk_path(n, r, cutoff, &mut g),
            }
        })
        .collect();
    let paths_path = dir.join(format!("paths_{scheme}.csv"));
    export_walk_paths(&paths, &paths_path)?;
    let band = ks_band_99(reps);
    Ok(json!({
        "command": "hitting",
        "scheme": scheme, "N": n, "r": r, "reps": reps,
        "ks": ks, "ks_band_99": band, "within_band": ks <= band,
        "mean_hitting_time": samples.iter().sum::<f64>() / reps as f64,
        "files": [path_str(&surv_path), path_str(&paths_path)],
    }))
}

// ---------------------------------------------------------------------------
// laplace

fn cmd_laplace(a: &LaplaceArgs) -> Result<Value> {
    let lambdas = match &a.lambda {
        Some(v) if !v.is_empty() => v.clone(),
        _ => vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0],
    };
    let grid = default_t_grid();
    let mut table = Vec::new();
    let mut curve_rows = Vec::new();
    for &l in &lambdas {
        let params = LaplaceParams::new(l)?;
        let curve = CCurve::compute(&params, &grid)?;
        let (c, t_star) = curve.supremum();
        table.push(json!({
            "lambda": l, "C": c, "t_star": t_star,
            "analytic_bound": c_analytic_bound_default(l)?,
            "tail_bound": curve.tail_bound,
        }));
        if !a.table.unwrap_or(false) {
            curve_rows.extend(
                curve
                    .t
                    .iter()
                    .zip(&curve.c)
                    .map(|(t, c)| vec![l.to_string(), t.to_string(), c.to_string()]),
            );
        }
    }
    let dir = out_dir(&a.out)?;
    let table_path = dir.join("c_table.csv");
    write_csv_rows(
        &table_path,
        &["lambda", "C", "t_star", "analytic_bound"],
        table.iter().map(|v| {
            ["lambda", "C", "t_star", "analytic_bound"]
                .iter()
                .map(|k| v[*k].to_string())
                .collect::<Vec<_>>()
        }),
    )?;
    let json_path = dir.join("c_table.json");
    write_json(&json_path, &table)?;
    let mut files = vec![path_str(&table_path), path_str(&json_path)];
    if !a.table.unwrap_or(false) {
        let p = dir.join("c_curves.csv");
        write_csv_rows(&p, &["lambda", "t", "C"], curve_rows)?;
        files.push(path_str(&p));
    }
    Ok(json!({ "command": "laplace", "table": table, "files": files }))
}

// ---------------------------------------------------------------------------
// ising-validate

fn cmd_ising(a: &IsingArgs) -> Result<Value> {
    let d = IsingTvConfig::default();
    let cfg = IsingTvConfig {
        chains: a.chains.unwrap_or(d.chains),
        iterations: a.iters.unwrap_or(d.iterations),
        replicas: a.replicas.unwrap_or(d.replicas),
        init: a.init.as_deref().map(str::parse).transpose()?.unwrap_or(d.init),
        seed: a.seed.unwrap_or(d.seed),
        tune_rounds: a.tune_rounds.unwrap_or(d.tune_rounds),
        tune_iterations: a.tune_iterations.unwrap_or(d.tune_iterations),
        tune_replicas: a.tune_replicas.unwrap_or(d.tune_replicas),
    };
    ensure(cfg.replicas >= 1 && cfg.iterations >= 1, || {
        "need at least one replica and iteration".into()
    })?;
    let report = ising_tv_experiment(&cfg)?;
    let dir = out_dir(&a.out)?;
    let path = dir.join("ising_tv.csv");
    write_csv_rows(
        &path,
        &["t", "tv", "stderr", "noise_floor", "bound"],
        report.rows.iter().map(|r| {
            vec![
                r.t.to_string(),
                r.tv.to_string(),
                r.stderr.to_string(),
                r.noise_floor.to_string(),
                r.bound.to_string(),
            ]
        }),
    )?;
    let violations = report
        .rows
        .iter()
        .filter(|r| r.t >= 2 && r.tv > r.bound + 3.0 * r.stderr)
        .count();
    Ok(json!({
        "command": "ising-validate",
        "config": cfg,
        "lambda_hat": report.lambda_hat,
        "r_bar": report.r_bar,
        "rejection": report.rejection,
        "schedule": report.schedule,
        "bound_violations": violations,
        "rows": report.rows,
        "file": path_str(&path),
    }))
}

// ---------------------------------------------------------------------------
// diagnose

fn cmd_diagnose(a: &DiagnoseArgs) -> Result<Value> {
    let path = a.trace.clone().ok_or_else(|| Error::invalid("--trace is required"))?;
    let burn = a.burn_in.unwrap_or(crate::gcb::DEFAULT_BURN_IN);
    ensure((0.0..1.0).contains(&burn), || "burn_in must lie in [0, 1)".into())?;
    let table = TraceTable::read_csv(&path)?;
    ensure(!table.rows.is_empty(), || "trace has no rows".into())?;
    let burn_rows = (burn * table.rows.len() as f64).floor() as usize;
    let chains = table.chains;
    let lag1: Vec<Value> = (0..chains)
        .map(|n| {
            let tr = EnergyTrace {
                chain: n,
                values: table.rows.iter().map(|r| r.energies[n]).collect(),
                burn_in: burn_rows,
            };
            let (value, error) = match lag1_energy_autocorr(&tr) {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.to_string())),
            };
            json!({ "chain": n, "lag1": value, "band": lag1_band(&tr), "error": error })
        })
        .collect();
    let mut proposals = vec![0u64; chains.saturating_sub(1)];
    let mut accepts = vec![0u64; chains.saturating_sub(1)];
    for row in table.rows.iter().skip(burn_rows.max(1)) {
        for (k, acc) in row.accepted.iter().enumerate() {
            if let Some(x) = acc {
                proposals[k] += 1;
                accepts[k] += *x as u64;
            }
        }
    }
    let rejection: Vec<Option<f64>> = proposals
        .iter()
        .zip(&accepts)
        .map(|(&p, &a)| (p > 0).then(|| 1.0 - a as f64 / p as f64))
        .collect();
    let mut restarts = RestartCounter::new(&table.rows[0].indices);
    table.rows.iter().skip(1).for_each(|r| restarts.observe(&r.indices));
    let value = json!({
        "command": "diagnose",
        "trace": path_str(&path),
        "chains": chains,
        "rows": table.rows.len(),
        "burn_in_rows": burn_rows,
        "lag1_energy_autocorr": lag1,
        "rejection": rejection,
        "lambda_hat": rejection.iter().copied().sum::<Option<f64>>(),
        "restarts": restarts.count,
    });
    write_json(&out_dir(&a.out)?.join("diagnose.json"), &value)?;
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        std::iter::once("ptlab".to_string())
            .chain(s.split_whitespace().map(String::from))
            .collect()
    }

    #[test]
    fn bounds_subcommand_emits_table() {
        let dir = tempfile::tempdir().unwrap();
        let cli = Cli::try_parse_from(argv(&format!(
            "bounds --scheme nrpt --N 6 --r 0.46 --tmax 20 --out {}",
            dir.path().display()
        )))
        .unwrap();
        let v = run(&cli.command).unwrap();
        let hit = v["rows"][20]["hit_by_t"].as_f64().unwrap();
        assert!((hit - 0.323).abs() < 1e-3);
    }

    #[test]
    fn config_file_merges_and_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"scheme": "rpt", "N": 6, "r": 0.46, "tmax": 10}"#).unwrap();
        let a = BoundsArgs {
            config: Some(cfg.clone()),
            tmax: Some(20),
            ..Default::default()
        };
        let merged = resolve(&a, Some(&cfg)).unwrap();
        assert_eq!(merged.tmax, Some(20));
        assert_eq!(merged.scheme, Some(Scheme::Rpt));
        std::fs::write(&cfg, r#"{"scheme": "rpt", "bogus": 1}"#).unwrap();
        assert!(resolve(&a, Some(&cfg)).unwrap_err().is_validation());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(dispatch(argv("bounds --r 1.5 --out /tmp/ptlab-test-exit")), 1);
        assert_eq!(dispatch(argv("nonsense")), 1);
        assert_eq!(
            dispatch(argv(
                "diagnose --trace /nonexistent/trace.csv --out /tmp/ptlab-test-exit"
            )),
            2
        );
    }
}
