//! End-to-end experiment recipes shared by the CLI, the examples and the
//! acceptance suite.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::anneal::{AnnealingSchedule, RngSeed, Scheme, StreamRng, TargetModel};
use crate::bounds::{tv_bound_finite, HittingTailTable};
use crate::diagnostics::{
    anderson_darling_normal, asymptotic_variance, empirical_tv_discrete, ks_band_99_two_sample, ks_two_sample,
    AndersonDarling,
};
use crate::engine::{ancestor_touched_reference, run_replicas, PtConfig, RecordFlags, SwapStats};
use crate::error::{ensure, Error, Result};
use crate::explorers::{ladder, IdealEle, IidReference, IsingGibbs, RandomWalkMetropolis};
use crate::gcb::{tune_rounds, TuningConfig};
use crate::models::{bimodal_pair, ising_exact_distribution, BimodalPair, GaussianPair, IsingModel, ALL_MINUS};
use crate::walks::{hitting_samples, persistent_walk_path, seo_walk_path};

/// Mean shift μ for which N(0,1) → N(μ,1) on the uniform N-pair grid has
/// rejection exactly r at every pair: r = erf(μ/(2N)).
pub fn mean_shift_for_rejection(n: usize, r: f64) -> Result<f64> {
    ensure(n >= 1 && (0.0..1.0).contains(&r), || {
        format!("need N >= 1 and r in [0, 1), got N={n}, r={r}")
    })?;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while libm::erf(hi) < r {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if libm::erf(mid) < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(2.0 * n as f64 * 0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexLawRow {
    pub t: usize,
    pub ks: f64,
    pub band: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AncestralRow {
    pub t: usize,
    pub survival: f64,
    pub stderr: f64,
    /// Pr(τ_N > t): the exact identity for the index walks.
    pub tail_t: f64,
    /// Pr(τ_N > t − 1): the TV bound.
    pub tail_t_minus_1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EleReport {
    pub scheme: Scheme,
    pub n: usize,
    pub r: f64,
    pub replicas: usize,
    pub index_law: Vec<IndexLawRow>,
    pub ancestral: Vec<AncestralRow>,
}

/// Runs PT with ideal exploration on an equi-rejection Gaussian problem and
/// compares (a) the law of machine 0's index at `times` with the standalone
/// walk simulator and (b) ancestral survival with the exact hitting tails.
pub fn ele_exactness(
    scheme: Scheme,
    n: usize,
    r: f64,
    replicas: usize,
    times: &[usize],
    seed: u64,
) -> Result<EleReport> {
    ensure(!times.is_empty() && times.iter().all(|&t| t >= 1), || {
        "times must be >= 1".into()
    })?;
    let t_max = *times.iter().max().expect("non-empty");
    let model = GaussianPair::mean_shift(vec![mean_shift_for_rejection(n, r)?])?;
    let ele = IdealEle::new(&model);
    let kernels = ladder(&ele, &ele, n);
    let cfg = PtConfig::new(scheme, AnnealingSchedule::uniform(n)?, t_max, replicas, seed).with_record(RecordFlags {
        states: false,
        energies: false,
        indices: true,
    });
    let per_rep = run_replicas(&cfg, &model, &kernels, &|_, _: &mut StreamRng| vec![0.0], |_, tr| {
        let path = tr.index_path(0).expect("indices recorded");
        let pos: Vec<usize> = times.iter().map(|&t| path[t]).collect();
        let touched: Vec<bool> = times
            .iter()
            .map(|&t| ancestor_touched_reference(&tr, t).expect("indices recorded"))
            .collect();
        (pos, touched)
    })?;

    let walk = |rng: &mut StreamRng| match scheme {
        Scheme::Nrpt => persistent_walk_path(n, r, t_max, rng),
        Scheme::Rpt => seo_walk_path(n, r, t_max, rng),
    };
    let walk_seed = RngSeed(seed ^ 0x5eed_0f_0a1c);
    let tab = HittingTailTable::compute(scheme, n, r, t_max)?;
    let mut index_law = Vec::new();
    let mut ancestral = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let engine: Vec<f64> = per_rep.iter().map(|p| p.0[k] as f64).collect();
        let walks = hitting_samples(replicas, walk_seed, t as u64, |rng| walk(rng)[t] as f64);
        index_law.push(IndexLawRow {
            t,
            ks: ks_two_sample(&engine, &walks),
            band: ks_band_99_two_sample(replicas, replicas),
        });
        let surv = per_rep.iter().filter(|p| !p.1[k]).count() as f64 / replicas as f64;
        ancestral.push(AncestralRow {
            t,
            survival: surv,
            stderr: (surv * (1.0 - surv) / replicas as f64).sqrt(),
            tail_t: tab.tail(t),
            tail_t_minus_1: tab.tail(t - 1),
        });
    }
    Ok(EleReport {
        scheme,
        n,
        r,
        replicas,
        index_law,
        ancestral,
    })
}

// ---------------------------------------------------------------------------
// Ising total-variation experiment

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IsingInit {
    AllMinus,
    Random,
}

impl FromStr for IsingInit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-minus" => Ok(IsingInit::AllMinus),
            "random" => Ok(IsingInit::Random),
            _ => Err(Error::invalid(format!(
                "unknown init '{s}' (expected all-minus or random)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingTvConfig {
    pub chains: usize,
    pub iterations: usize,
    pub replicas: usize,
    pub init: IsingInit,
    pub seed: u64,
    pub tune_rounds: usize,
    pub tune_iterations: usize,
    pub tune_replicas: usize,
}

impl Default for IsingTvConfig {
    fn default() -> Self {
        Self {
            chains: 6,
            iterations: 25,
            replicas: 100_000,
            init: IsingInit::AllMinus,
            seed: 1,
            tune_rounds: 3,
            tune_iterations: 100,
            tune_replicas: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingTvRow {
    pub t: usize,
    pub tv: f64,
    pub stderr: f64,
    pub noise_floor: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingTvReport {
    pub schedule: AnnealingSchedule,
    pub rejection: Vec<f64>,
    pub lambda_hat: f64,
    pub r_bar: f64,
    pub rows: Vec<IsingTvRow>,
}

/// Tunes an NRPT schedule with Gibbs exploration, then runs independent
/// replicas and compares the target-chain marginal with the exact law.
pub fn ising_tv_experiment(cfg: &IsingTvConfig) -> Result<IsingTvReport> {
    ensure(cfg.chains >= 2, || "need at least two chains".into())?;
    let n = cfg.chains - 1;
    let model = IsingModel;
    let reference = IidReference::new(&model)?;
    let gibbs = IsingGibbs::default();
    let kernels = ladder(&reference, &gibbs, n);
    let random = |_: usize, g: &mut StreamRng| model.sample_reference(g).expect("uniform reference");

    let mut tc = TuningConfig::new(
        n,
        cfg.tune_iterations,
        cfg.tune_replicas,
        cfg.seed.wrapping_add(1_000_003),
    );
    tc.rounds = cfg.tune_rounds;
    let tuned = tune_rounds(&tc, &model, &kernels, &random)?;

    let pt = PtConfig::new(
        Scheme::Nrpt,
        tuned.schedule.clone(),
        cfg.iterations,
        cfg.replicas,
        cfg.seed,
    )
    .with_record(RecordFlags {
        states: true,
        energies: false,
        indices: false,
    });
    let init = |c: usize, g: &mut StreamRng| match cfg.init {
        IsingInit::AllMinus => ALL_MINUS,
        IsingInit::Random => random(c, g),
    };
    let out = run_replicas(&pt, &model, &kernels, &init, |_, tr| {
        let target: Vec<u16> = tr
            .states
            .as_ref()
            .expect("states recorded")
            .iter()
            .map(|row| row[n])
            .collect();
        (target, tr.swap_stats())
    })?;
    let mut stats = SwapStats::default();
    out.iter().for_each(|o| stats.merge(&o.1));
    let rejection = stats.complete_rejections()?;
    let lambda_hat: f64 = rejection.iter().sum();
    let r_bar = lambda_hat / n as f64;

    let exact = ising_exact_distribution(1.0)?;
    let rows = (1..=cfg.iterations)
        .map(|t| {
            let samples: Vec<usize> = out.iter().map(|o| o.0[t] as usize).collect();
            let e = empirical_tv_discrete(&samples, &exact)?;
            Ok(IsingTvRow {
                t,
                tv: e.tv,
                stderr: e.stderr,
                noise_floor: e.noise_floor,
                bound: tv_bound_finite(Scheme::Nrpt, n, r_bar, t)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(IsingTvReport {
        schedule: tuned.schedule,
        rejection,
        lambda_hat,
        r_bar,
        rows,
    })
}

// ---------------------------------------------------------------------------
// Bimodal CLT check

/// Random-walk step size ≈ 2.4 × the within-mode scale of π_β.
pub fn bimodal_step_size(beta: f64) -> f64 {
    2.4 / (beta + (1.0 - beta) / 10001.0).sqrt()
}

pub fn bimodal_rwm(model: &BimodalPair, steps: usize) -> RandomWalkMetropolis<'_, BimodalPair> {
    RandomWalkMetropolis::with_schedule(model, bimodal_step_size, steps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltConfig {
    pub n: usize,
    pub iterations: usize,
    pub runs: usize,
    pub rwm_steps: usize,
    pub tune_rounds: usize,
    pub tune_iterations: usize,
    pub tune_replicas: usize,
    pub seed: u64,
}

impl Default for CltConfig {
    fn default() -> Self {
        Self {
            n: 12,
            iterations: 8192,
            runs: 500,
            rwm_steps: 3,
            tune_rounds: 7,
            tune_iterations: 500,
            tune_replicas: 8,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub schedule: AnnealingSchedule,
    pub lambda_hat: f64,
    pub z: Vec<f64>,
    pub anderson_darling: AndersonDarling,
    pub z_mean: f64,
    pub z_var: f64,
    pub mean_restarts: f64,
}

/// Standardized batch means √T·mean/σ̂ of sign(x) on the target chain of
/// tuned NRPT for the bimodal problem, one per independent run.
pub fn bimodal_clt(cfg: &CltConfig) -> Result<CltReport> {
    let model = bimodal_pair();
    let reference = IidReference::new(&model)?;
    let rwm = bimodal_rwm(&model, cfg.rwm_steps);
    let kernels = ladder(&reference, &rwm, cfg.n);
    let init = |_: usize, g: &mut StreamRng| model.sample_reference(g).expect("gaussian reference");
    let mut tc = TuningConfig::new(
        cfg.n,
        cfg.tune_iterations,
        cfg.tune_replicas,
        cfg.seed.wrapping_add(1_000_003),
    );
    tc.rounds = cfg.tune_rounds;
    let tuned = tune_rounds(&tc, &model, &kernels, &init)?;
    let lambda_hat = tuned.rounds.last().expect("at least one round").lambda_hat;

    let pt = PtConfig::new(Scheme::Nrpt, tuned.schedule.clone(), cfg.iterations, cfg.runs, cfg.seed).with_record(
        RecordFlags {
            states: true,
            energies: false,
            indices: false,
        },
    );
    let n = cfg.n;
    let res = run_replicas(&pt, &model, &kernels, &init, |_, tr| {
        let f: Vec<f64> = tr
            .states
            .as_ref()
            .expect("states recorded")
            .iter()
            .skip(1)
            .map(|row| row[n].signum())
            .collect();
        asymptotic_variance(&f).map(|bm| (bm.standardized(0.0), tr.restarts))
    })?;
    let res: Vec<(f64, u64)> = res.into_iter().collect::<Result<_>>()?;
    let z: Vec<f64> = res.iter().map(|r| r.0).collect();
    let k = z.len() as f64;
    let z_mean = z.iter().sum::<f64>() / k;
    let z_var = z.iter().map(|v| (v - z_mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(CltReport {
        schedule: tuned.schedule,
        lambda_hat,
        anderson_darling: anderson_darling_normal(&z)?,
        z,
        z_mean,
        z_var,
        mean_restarts: res.iter().map(|r| r.1 as f64).sum::<f64>() / k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_shift_inverts_erf() {
        let mu = mean_shift_for_rejection(6, 0.46).unwrap();
        assert!((libm::erf(mu / 12.0) - 0.46).abs() < 1e-14);
        assert!(mean_shift_for_rejection(3, 0.0).unwrap() < 1e-12);
        assert!(mean_shift_for_rejection(0, 0.5).is_err());
    }

    #[test]
    fn small_ele_exactness_run() {
        let rep = ele_exactness(Scheme::Nrpt, 3, 0.3, 4000, &[3, 8], 2).unwrap();
        for row in &rep.index_law {
            assert!(row.ks <= row.band, "{row:?}");
        }
        for row in &rep.ancestral {
            assert!((row.survival - row.tail_t).abs() <= 4.0 * row.stderr + 1e-12, "{row:?}");
        }
    }

    #[test]
    fn init_parses() {
        assert_eq!("all-minus".parse::<IsingInit>().unwrap(), IsingInit::AllMinus);
        assert!("minus".parse::<IsingInit>().is_err());
    }
}
