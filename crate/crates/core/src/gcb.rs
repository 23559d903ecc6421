//! Global communication barrier: estimation from swap statistics, the
//! cumulative barrier Λ(β), schedule tuning and closed-form upper bounds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anneal::{energy, AnnealingSchedule, RngSeed, Scheme, StreamRng, TargetModel};
use crate::engine::{rejection_rates, run_replicas, PtConfig, PtTrace, RecordFlags, SwapStats};
use crate::error::{ensure, Result};
use crate::explorers::Explorer;
use crate::models::ExactPathSampler;

/// Fraction of iterations discarded before collecting stationary statistics.
pub const DEFAULT_BURN_IN: f64 = 0.2;

/// Monotone piecewise-linear β ↦ Λ̂(β) through (β_n, Σ_{k<n} r̂_k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierFn {
    knots: Vec<(f64, f64)>,
}

impl BarrierFn {
    pub fn new(schedule: &AnnealingSchedule, rejections: &[f64]) -> Result<Self> {
        ensure(rejections.len() == schedule.n(), || {
            format!("{} rejection rates for {} pairs", rejections.len(), schedule.n())
        })?;
        ensure(rejections.iter().all(|r| (0.0..=1.0).contains(r)), || {
            "rejection rate outside [0, 1]".into()
        })?;
        let mut acc = 0.0;
        let mut knots = vec![(0.0, 0.0)];
        for (k, r) in rejections.iter().enumerate() {
            acc += r;
            knots.push((schedule.beta(k + 1), acc));
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn total(&self) -> f64 {
        self.knots.last().map_or(0.0, |k| k.1)
    }

    pub fn eval(&self, beta: f64) -> f64 {
        if self.knots.len() < 2 {
            return 0.0;
        }
        let b = beta.clamp(0.0, 1.0);
        let k = self
            .knots
            .partition_point(|&(x, _)| x < b)
            .clamp(1, self.knots.len() - 1);
        let ((x0, y0), (x1, y1)) = (self.knots[k - 1], self.knots[k]);
        y0 + (y1 - y0) * (b - x0) / (x1 - x0)
    }

    /// Smallest β with Λ̂(β) = y.
    pub fn inverse(&self, y: f64) -> f64 {
        let y = y.clamp(0.0, self.total());
        let k = self
            .knots
            .partition_point(|&(_, v)| v < y)
            .clamp(1, self.knots.len() - 1);
        let ((x0, y0), (x1, y1)) = (self.knots[k - 1], self.knots[k]);
        if y1 == y0 {
            return x0;
        }
        x0 + (x1 - x0) * (y - y0) / (y1 - y0)
    }
}

/// Λ̂ = Σ r̂ and its barrier function.
pub fn estimate_gcb(stats: &SwapStats, schedule: &AnnealingSchedule) -> Result<(f64, BarrierFn)> {
    let r = stats.complete_rejections()?;
    let barrier = BarrierFn::new(schedule, &r)?;
    Ok((barrier.total(), barrier))
}

/// β_n = Λ̂⁻¹(Λ̂·n/N); a flat barrier gives the uniform grid.
pub fn tune_schedule(barrier: &BarrierFn, n: usize) -> Result<AnnealingSchedule> {
    ensure(n >= 1, || "need at least one pair".into())?;
    let total = barrier.total();
    if !(total > 0.0) {
        return AnnealingSchedule::uniform(n);
    }
    let mut betas: Vec<f64> = (0..=n).map(|k| barrier.inverse(total * k as f64 / n as f64)).collect();
    betas[0] = 0.0;
    betas[n] = 1.0;
    AnnealingSchedule::new(betas)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningConfig {
    pub scheme: Scheme,
    pub n: usize,
    pub rounds: usize,
    /// Iterations in round 0; round r uses base·2^r.
    pub base_iterations: usize,
    pub replicas: usize,
    pub burn_in: f64,
    pub seed: u64,
}

impl TuningConfig {
    pub fn new(n: usize, base_iterations: usize, replicas: usize, seed: u64) -> Self {
        Self {
            scheme: Scheme::Nrpt,
            n,
            rounds: 3,
            base_iterations,
            replicas,
            burn_in: DEFAULT_BURN_IN,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningRound {
    pub schedule: AnnealingSchedule,
    pub iterations: usize,
    pub rejection: Vec<f64>,
    pub lambda_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub rounds: Vec<TuningRound>,
    pub schedule: AnnealingSchedule,
    pub barrier: BarrierFn,
}

impl TuningReport {
    pub fn lambda_hat(&self) -> f64 {
        self.barrier.total()
    }
}

/// Rounds of PT with doubling budget, re-tuning the schedule after each.
pub fn tune_rounds<M, I>(
    cfg: &TuningConfig,
    model: &M,
    kernels: &[&dyn Explorer<M::State>],
    init: &I,
) -> Result<TuningReport>
where
    M: TargetModel,
    I: Fn(usize, &mut StreamRng) -> M::State + Sync + ?Sized,
{
    ensure(cfg.rounds >= 1, || "need at least one tuning round".into())?;
    ensure((0.0..1.0).contains(&cfg.burn_in), || {
        "burn-in fraction outside [0, 1)".into()
    })?;
    let mut schedule = AnnealingSchedule::uniform(cfg.n)?;
    let mut rounds = Vec::with_capacity(cfg.rounds);
    let mut barrier = BarrierFn::new(&schedule, &vec![0.0; cfg.n])?;
    for r in 0..cfg.rounds {
        let iterations = cfg.base_iterations << r;
        let pt = PtConfig {
            scheme: cfg.scheme,
            schedule: schedule.clone(),
            iterations,
            replicas: cfg.replicas,
            seed: cfg.seed.wrapping_add(r as u64),
            record: RecordFlags {
                states: false,
                energies: false,
                indices: false,
            },
        };
        let burn = (cfg.burn_in * iterations as f64).floor() as usize;
        let stats = run_replicas(&pt, model, kernels, init, |_, tr| SwapStats::from_trace(&tr, burn))?;
        let mut merged = SwapStats::default();
        stats.iter().for_each(|s| merged.merge(s));
        let (lambda_hat, b) = estimate_gcb(&merged, &schedule)?;
        rounds.push(TuningRound {
            schedule: schedule.clone(),
            iterations,
            rejection: merged.complete_rejections()?,
            lambda_hat,
        });
        barrier = b;
        schedule = tune_schedule(&barrier, cfg.n)?;
    }
    Ok(TuningReport {
        rounds,
        schedule,
        barrier,
    })
}

/// Λ̂ from merged statistics of finished traces.
pub fn gcb_from_traces<S>(traces: &[PtTrace<S>], burn_in: usize) -> Result<f64> {
    let stats = rejection_rates(traces, burn_in);
    Ok(stats.complete_rejections()?.iter().sum())
}

/// 2 Σ TV_n / (1 − TV_n).
pub fn gcb_tv_bound(tv: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &d in tv {
        ensure((0.0..1.0).contains(&d), || {
            format!("total variation {d} outside [0, 1)")
        })?;
        s += d / (1.0 - d);
    }
    Ok(2.0 * s)
}

/// 2 min_dir g(KL)/(1 − g(KL)) with g(x) = 1 − ½e^{−x}.
pub fn gcb_kl_bound(kl_10: f64, kl_01: f64) -> Result<f64> {
    ensure(kl_10 >= 0.0 && kl_01 >= 0.0, || {
        "KL divergences must be non-negative".into()
    })?;
    let f = |kl: f64| {
        let e = 0.5 * (-kl).exp();
        2.0 * (1.0 - e) / e
    };
    Ok(f(kl_10.min(kl_01)))
}

pub fn gcb_product_bound(components: &[f64]) -> f64 {
    components.iter().sum()
}

/// Limit of d^{−1/2} Λ for N(0, I_d) → N(μ, Σ_ρ) with ‖μ‖²/d → m.
pub fn gcb_gaussian_submanifold_bound(rho: f64, m: f64) -> Result<f64> {
    ensure((0.0..1.0).contains(&rho), || format!("rho {rho} outside [0, 1)"))?;
    ensure(m >= 0.0, || "m must be non-negative".into())?;
    Ok((-0.5 * (1.0 - rho).ln() + 0.5 * ((1.0 + m) / (1.0 - rho) + 1.0)).sqrt())
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
}

impl McEstimate {
    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        (self.value - target).abs() <= sigmas * self.stderr
    }
}

/// Direct quadrature of Λ = ∫₀¹ ½E|V − V'| dβ with V, V' i.i.d. under π_β:
/// midpoint β-grid, `pairs` exact pairs per node.
pub fn gcb_direct_mc<M: ExactPathSampler>(model: &M, grid: usize, pairs: usize, seed: RngSeed) -> Result<McEstimate> {
    ensure(grid >= 1, || "need a non-empty grid".into())?;
    let edges: Vec<f64> = (0..=grid).map(|k| k as f64 / grid as f64).collect();
    gcb_direct_mc_on(model, &edges, pairs, seed)
}

/// Midpoint rule on arbitrary cell edges 0 = e₀ < … < e_K = 1, for barriers
/// concentrated near one end of the path.
pub fn gcb_direct_mc_on<M: ExactPathSampler>(
    model: &M,
    edges: &[f64],
    pairs: usize,
    seed: RngSeed,
) -> Result<McEstimate> {
    ensure(pairs >= 2, || "need at least two pairs per node".into())?;
    AnnealingSchedule::new(edges.to_vec())?;
    ensure(edges.len() >= 2, || "need at least one cell".into())?;
    let nodes: Vec<(f64, f64)> = edges
        .par_windows(2)
        .enumerate()
        .map(|(k, w)| {
            let beta = 0.5 * (w[0] + w[1]);
            let h = w[1] - w[0];
            let mut rng = seed.stream(k as u64, 0);
            let mut sum = 0.0;
            let mut sq = 0.0;
            for _ in 0..pairs {
                let a = energy(model, &model.sample_path(beta, &mut rng))?.value();
                let b = energy(model, &model.sample_path(beta, &mut rng))?.value();
                let d = 0.5 * (a - b).abs();
                sum += d;
                sq += d * d;
            }
            let mean = sum / pairs as f64;
            let var = (sq / pairs as f64 - mean * mean).max(0.0) / (pairs - 1) as f64;
            Ok((h * mean, h * h * var))
        })
        .collect::<Result<_>>()?;
    Ok(McEstimate {
        value: nodes.iter().map(|n| n.0).sum(),
        stderr: nodes.iter().map(|n| n.1).sum::<f64>().sqrt(),
    })
}

/// Σ_n r_n for a schedule, each r_n = 1 − E[α] estimated from i.i.d. exact
/// draws at the two neighbouring temperatures (PT under ideal exploration).
pub fn gcb_rejection_mc<M: ExactPathSampler>(
    model: &M,
    schedule: &AnnealingSchedule,
    pairs: usize,
    seed: RngSeed,
) -> Result<(McEstimate, Vec<f64>)> {
    ensure(pairs >= 2, || "need at least two pairs".into())?;
    let betas = schedule.betas();
    let per_pair: Vec<(f64, f64)> = (0..schedule.n())
        .into_par_iter()
        .map(|k| {
            let mut rng = seed.stream(k as u64, 1);
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..pairs {
                let a = energy(model, &model.sample_path(betas[k], &mut rng))?.value();
                let b = energy(model, &model.sample_path(betas[k + 1], &mut rng))?.value();
                let rej = 1.0 - crate::anneal::accept_prob(betas[k + 1] - betas[k], a, b);
                sum += rej;
                sq += rej * rej;
            }
            let mean = sum / pairs as f64;
            Ok((mean, (sq / pairs as f64 - mean * mean).max(0.0) / (pairs - 1) as f64))
        })
        .collect::<Result<_>>()?;
    let r: Vec<f64> = per_pair.iter().map(|p| p.0).collect();
    let est = McEstimate {
        value: r.iter().sum(),
        stderr: per_pair.iter().map(|p| p.1).sum::<f64>().sqrt(),
    };
    Ok((est, r))
}

/// Equi-rejection schedule for an exactly samplable model, by fixed-point
/// iteration of the rejection-sum barrier.
pub fn tune_schedule_exact<M: ExactPathSampler>(
    model: &M,
    n: usize,
    rounds: usize,
    pairs: usize,
    seed: RngSeed,
) -> Result<(AnnealingSchedule, Vec<f64>)> {
    let mut schedule = AnnealingSchedule::uniform(n)?;
    let mut r = Vec::new();
    for round in 0..rounds.max(1) {
        let (_, rr) = gcb_rejection_mc(model, &schedule, pairs, RngSeed(seed.0.wrapping_add(round as u64)))?;
        let barrier = BarrierFn::new(&schedule, &rr)?;
        r = rr;
        if round + 1 < rounds {
            schedule = tune_schedule(&barrier, n)?;
        }
    }
    Ok((schedule, r))
}

/// Λ of N(0, 1) → N(μ, 1): |μ|/√π.
pub fn gaussian_shift_gcb(mu: f64) -> f64 {
    mu.abs() / std::f64::consts::PI.sqrt()
}

/// TV between N(0, 1) and N(μ, 1).
pub fn gaussian_shift_tv(mu: f64) -> f64 {
    libm::erf(mu.abs() / (2.0 * std::f64::consts::SQRT_2))
}

pub fn gaussian_shift_kl(mu: f64) -> f64 {
    0.5 * mu * mu
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{AffinePushforward, GaussianPair};
    use proptest::prelude::*;

    #[test]
    fn barrier_basics() {
        let s = AnnealingSchedule::new(vec![0.0, 0.2, 0.7, 1.0]).unwrap();
        let b = BarrierFn::new(&s, &[0.1, 0.5, 0.3]).unwrap();
        assert!((b.total() - 0.9).abs() < 1e-15);
        assert!((b.eval(0.2) - 0.1).abs() < 1e-15);
        assert!((b.eval(0.45) - 0.35).abs() < 1e-15);
        assert!((b.inverse(0.35) - 0.45).abs() < 1e-15);
        assert!(BarrierFn::new(&s, &[0.1, 0.5]).is_err());
    }

    #[test]
    fn tune_trivial_cases() {
        let s = AnnealingSchedule::uniform(4).unwrap();
        let lin = BarrierFn::new(&s, &[0.5; 4]).unwrap();
        assert_eq!(tune_schedule(&lin, 1).unwrap().betas(), &[0.0, 1.0]);
        let t = tune_schedule(&lin, 8).unwrap();
        for (k, b) in t.betas().iter().enumerate() {
            assert!((b - k as f64 / 8.0).abs() < 1e-12);
        }
        let flat = BarrierFn::new(&s, &[0.0; 4]).unwrap();
        assert_eq!(tune_schedule(&flat, 3).unwrap(), AnnealingSchedule::uniform(3).unwrap());
        assert!(tune_schedule(&lin, 0).is_err());
    }

    proptest! {
        #[test]
        fn tuned_knots_are_equally_spaced(r in proptest::collection::vec(0.0f64..1.0, 1..12), n in 1usize..20) {
            let s = AnnealingSchedule::uniform(r.len()).unwrap();
            let b = BarrierFn::new(&s, &r).unwrap();
            prop_assume!(b.total() > 1e-6);
            let t = tune_schedule(&b, n).unwrap();
            for (k, beta) in t.betas().iter().enumerate() {
                prop_assert!((b.eval(*beta) - b.total() * k as f64 / n as f64).abs() < 1e-12);
            }
        }

        #[test]
        fn barrier_is_monotone(r in proptest::collection::vec(0.0f64..1.0, 1..10), xs in proptest::collection::vec(0.0f64..1.0, 2)) {
            let s = AnnealingSchedule::uniform(r.len()).unwrap();
            let b = BarrierFn::new(&s, &r).unwrap();
            let (lo, hi) = (xs[0].min(xs[1]), xs[0].max(xs[1]));
            prop_assert!(b.eval(lo) <= b.eval(hi) + 1e-15);
        }
    }

    #[test]
    fn closed_form_bounds() {
        assert_eq!(gcb_tv_bound(&[0.0, 0.0]).unwrap(), 0.0);
        assert!((gcb_tv_bound(&[0.5]).unwrap() - 2.0).abs() < 1e-15);
        assert!(gcb_tv_bound(&[1.0]).is_err());
        assert!((gcb_kl_bound(0.0, 0.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(
            gcb_kl_bound(f64::INFINITY, 0.1).unwrap(),
            gcb_kl_bound(0.1, 0.1).unwrap()
        );
        assert!((gcb_kl_bound(0.5, 0.5).unwrap() - 4.594).abs() < 1e-3);
        let tv = gaussian_shift_tv(1.0);
        assert!((tv - 0.38292492254802624).abs() < 1e-12);
        assert!((gcb_tv_bound(&[tv]).unwrap() - 1.241).abs() < 1e-3);
        assert_eq!(gcb_product_bound(&[0.7]), 0.7);
        assert_eq!(gcb_product_bound(&[0.5; 4]), 2.0);
        assert!((gcb_gaussian_submanifold_bound(0.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((gcb_gaussian_submanifold_bound(0.5, 0.0).unwrap() - (0.5 * 2f64.ln() + 1.5).sqrt()).abs() < 1e-15);
        assert!(gcb_gaussian_submanifold_bound(1.0, 0.0).is_err());
    }

    #[test]
    fn identical_endpoints_have_zero_barrier() {
        let p = GaussianPair::mean_shift(vec![0.0]).unwrap();
        let d = gcb_direct_mc(&p, 20, 200, RngSeed(1)).unwrap();
        assert!(d.value.abs() < 1e-12);
        let (r, _) = gcb_rejection_mc(&p, &AnnealingSchedule::uniform(5).unwrap(), 200, RngSeed(1)).unwrap();
        assert!(r.value.abs() < 1e-12);
    }

    #[test]
    fn direct_quadrature_recovers_gaussian_shift() {
        let p = GaussianPair::mean_shift(vec![2.0]).unwrap();
        let d = gcb_direct_mc(&p, 200, 2000, RngSeed(3)).unwrap();
        assert!(d.within(gaussian_shift_gcb(2.0), 4.0), "{d:?}");
    }

    #[test]
    fn rejection_sum_matches_direct_quadrature() {
        let p = GaussianPair::mean_shift(vec![2.0]).unwrap();
        let d = gcb_direct_mc(&p, 200, 10_000, RngSeed(4)).unwrap();
        let (r, _) = gcb_rejection_mc(&p, &AnnealingSchedule::uniform(30).unwrap(), 20_000, RngSeed(5)).unwrap();
        assert!((r.value / d.value - 1.0).abs() < 0.05);
    }

    #[test]
    fn affine_invariance() {
        let p = GaussianPair::mean_shift(vec![1.0]).unwrap();
        let h = AffinePushforward::new(GaussianPair::mean_shift(vec![1.0]).unwrap(), 2.0, 3.0).unwrap();
        let a = gcb_direct_mc(&p, 50, 4000, RngSeed(6)).unwrap();
        let b = gcb_direct_mc(&h, 50, 4000, RngSeed(7)).unwrap();
        assert!((a.value - b.value).abs() < 3.0 * (a.stderr.hypot(b.stderr)));
    }
}
