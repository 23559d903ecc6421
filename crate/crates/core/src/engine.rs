//! The parallel tempering loop: exploration, even/odd communication, and
//! bookkeeping of the index process, swap statistics and restarts.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anneal::{accept_prob, energy, AnnealingSchedule, Parity, RngSeed, Scheme, StreamRng, TargetModel};
use crate::error::{ensure, Error, Result};
use crate::explorers::Explorer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordFlags {
    pub states: bool,
    pub energies: bool,
    pub indices: bool,
}

impl Default for RecordFlags {
    fn default() -> Self {
        Self {
            states: false,
            energies: true,
            indices: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtConfig {
    pub scheme: Scheme,
    pub schedule: AnnealingSchedule,
    pub iterations: usize,
    pub replicas: usize,
    pub seed: u64,
    #[serde(default)]
    pub record: RecordFlags,
}

impl PtConfig {
    pub fn new(scheme: Scheme, schedule: AnnealingSchedule, iterations: usize, replicas: usize, seed: u64) -> Self {
        Self {
            scheme,
            schedule,
            iterations,
            replicas,
            seed,
            record: RecordFlags::default(),
        }
    }

    pub fn with_record(mut self, record: RecordFlags) -> Self {
        self.record = record;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.iterations >= 1, || "iterations must be at least 1".into())?;
        ensure(self.replicas >= 1, || "replicas must be at least 1".into())
    }

    /// Lane reserved for the communication uniforms of replica streams.
    fn comm_lane(&self) -> u64 {
        self.schedule.chains() as u64
    }

    fn parity_lane(&self) -> u64 {
        self.schedule.chains() as u64 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SwapOutcome {
    Idle,
    Rejected,
    Accepted,
}

impl SwapOutcome {
    pub fn proposed(self) -> bool {
        self != SwapOutcome::Idle
    }

    pub fn accepted(self) -> bool {
        self == SwapOutcome::Accepted
    }
}

/// Decision for one adjacent pair in a communication round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapDecision {
    pub outcome: SwapOutcome,
    /// Acceptance probability; NaN for idle pairs.
    pub alpha: f64,
}

/// Parity S_t for t = 1, 2, … under each scheme; entry k holds S_{k+1}.
pub fn parity_sequence(scheme: Scheme, len: usize, rng: &mut StreamRng) -> Vec<Parity> {
    match scheme {
        Scheme::Nrpt => (0..len)
            .map(|k| if k % 2 == 0 { Parity::Even } else { Parity::Odd })
            .collect(),
        Scheme::Rpt => (0..len)
            .map(|_| {
                if rng.random::<bool>() {
                    Parity::Even
                } else {
                    Parity::Odd
                }
            })
            .collect(),
    }
}

/// Swap decisions for the pairs (n, n+1) in the parity set. One uniform is
/// drawn per proposed pair, in increasing n, so the decisions are a
/// deterministic function of the energies, the parity and the uniform stream.
pub fn communication_step(energies: &[f64], betas: &[f64], parity: Parity, rng: &mut StreamRng) -> Vec<SwapDecision> {
    assert_eq!(energies.len(), betas.len());
    (0..betas.len().saturating_sub(1))
        .map(|n| {
            if !parity.contains(n) {
                return SwapDecision {
                    outcome: SwapOutcome::Idle,
                    alpha: f64::NAN,
                };
            }
            let alpha = accept_prob(betas[n + 1] - betas[n], energies[n], energies[n + 1]);
            let u: f64 = rng.random();
            let outcome = if u < alpha {
                SwapOutcome::Accepted
            } else {
                SwapOutcome::Rejected
            };
            SwapDecision { outcome, alpha }
        })
        .collect()
}

/// Direction ε of a machine at chain index i given the next parity:
/// +1 iff the pair (i, i+1) will be proposed.
pub fn direction(index: usize, n: usize, next: Parity) -> i8 {
    if index < n && next.contains(index) {
        1
    } else {
        -1
    }
}

/// Advances the index process by one communication round.
/// `index_of[m]` is I^m, `machine_at[i]` its inverse.
pub fn update_index_process(
    index_of: &mut [usize],
    machine_at: &mut [usize],
    eps: &mut [i8],
    decisions: &[SwapDecision],
    next: Parity,
) {
    let n = machine_at.len() - 1;
    for (pair, d) in decisions.iter().enumerate() {
        if d.outcome.accepted() {
            machine_at.swap(pair, pair + 1);
            index_of[machine_at[pair]] = pair;
            index_of[machine_at[pair + 1]] = pair + 1;
        }
    }
    for (m, e) in eps.iter_mut().enumerate() {
        *e = direction(index_of[m], n, next);
    }
    debug_assert!(machine_at.iter().enumerate().all(|(i, &m)| index_of[m] == i));
}

/// Everything recorded for one replica. Per-time series have T+1 rows
/// (t = 0 is the initial configuration); swap series have T rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtTrace<S> {
    pub scheme: Scheme,
    pub betas: Vec<f64>,
    /// S_1, …, S_T.
    pub parities: Vec<Parity>,
    /// S_{T+1}, which fixes ε at the last step.
    pub next_parity: Parity,
    pub outcomes: Vec<Vec<SwapOutcome>>,
    pub alphas: Vec<Vec<f64>>,
    /// energies[t][n] = V(x_t^n) after communication at t.
    pub energies: Option<Vec<Vec<f64>>>,
    /// indices[t][m] = I_t^m, the chain occupied by machine m.
    pub indices: Option<Vec<Vec<usize>>>,
    pub directions: Option<Vec<Vec<i8>>>,
    pub states: Option<Vec<Vec<S>>>,
    pub final_states: Vec<S>,
    pub restarts: u64,
}

impl<S> PtTrace<S> {
    pub fn n(&self) -> usize {
        self.betas.len() - 1
    }

    pub fn iterations(&self) -> usize {
        self.parities.len()
    }

    pub fn swap_stats(&self) -> SwapStats {
        SwapStats::from_trace(self, 0)
    }

    /// V_t of chain `n` over t = 0..=T.
    pub fn energy_series(&self, n: usize) -> Option<Vec<f64>> {
        self.energies.as_ref().map(|e| e.iter().map(|row| row[n]).collect())
    }

    /// I_t of machine `m` over t = 0..=T.
    pub fn index_path(&self, m: usize) -> Option<Vec<usize>> {
        self.indices.as_ref().map(|ix| ix.iter().map(|row| row[m]).collect())
    }
}

/// Counts completed 0 → N traversals of machine index paths.
#[derive(Debug, Clone)]
pub struct RestartCounter {
    n: usize,
    armed: Vec<bool>,
    pub count: u64,
}

impl RestartCounter {
    pub fn new(index_of: &[usize]) -> Self {
        let n = index_of.len() - 1;
        Self {
            n,
            armed: index_of.iter().map(|&i| i == 0 && n > 0).collect(),
            count: 0,
        }
    }

    pub fn observe(&mut self, index_of: &[usize]) {
        for (m, &i) in index_of.iter().enumerate() {
            if i == 0 {
                self.armed[m] = true;
            } else if i == self.n && self.armed[m] {
                self.armed[m] = false;
                self.count += 1;
            }
        }
    }
}

/// Runs replica `replica` of the configured PT algorithm. `kernels[n]`
/// explores chain n (kernels[0] should draw i.i.d. from the reference) and
/// `init(n, rng)` supplies the initial state of chain n.
pub fn run_replica<M, I>(
    config: &PtConfig,
    model: &M,
    kernels: &[&dyn Explorer<M::State>],
    init: &I,
    replica: u64,
) -> Result<PtTrace<M::State>>
where
    M: TargetModel,
    I: Fn(usize, &mut StreamRng) -> M::State + Sync + ?Sized,
{
    config.validate()?;
    let betas = config.schedule.betas().to_vec();
    let chains = betas.len();
    let n = chains - 1;
    ensure(kernels.len() == chains, || {
        format!("expected {chains} kernels for {chains} chains, got {}", kernels.len())
    })?;
    let seed = RngSeed(config.seed);
    let t_max = config.iterations;
    let mut rngs: Vec<StreamRng> = (0..chains).map(|k| seed.stream(replica, k as u64)).collect();
    let mut comm = seed.stream(replica, config.comm_lane());
    let parities = parity_sequence(
        config.scheme,
        t_max + 1,
        &mut seed.stream(replica, config.parity_lane()),
    );

    let mut states: Vec<M::State> = (0..chains).map(|k| init(k, &mut rngs[k])).collect();
    let mut energies: Vec<f64> = states
        .iter()
        .map(|x| energy(model, x).map(|e| e.value()))
        .collect::<Result<_>>()?;
    let mut index_of: Vec<usize> = (0..chains).collect();
    let mut machine_at: Vec<usize> = (0..chains).collect();
    let mut eps: Vec<i8> = (0..chains).map(|m| direction(m, n, parities[0])).collect();
    let mut restarts = RestartCounter::new(&index_of);

    let rec = config.record;
    let mut energy_rows = rec.energies.then(|| vec![energies.clone()]);
    let mut index_rows = rec.indices.then(|| vec![index_of.clone()]);
    let mut dir_rows = rec.indices.then(|| vec![eps.clone()]);
    let mut state_rows = rec.states.then(|| vec![states.clone()]);
    let mut outcomes = Vec::with_capacity(t_max);
    let mut alphas = Vec::with_capacity(t_max);

    for t in 1..=t_max {
        for k in 0..chains {
            states[k] = kernels[k].step(&states[k], betas[k], &mut rngs[k]);
            energies[k] = energy(model, &states[k])?.value();
        }
        let decisions = communication_step(&energies, &betas, parities[t - 1], &mut comm);
        for (pair, d) in decisions.iter().enumerate() {
            if d.outcome.accepted() {
                states.swap(pair, pair + 1);
                energies.swap(pair, pair + 1);
            }
        }
        update_index_process(&mut index_of, &mut machine_at, &mut eps, &decisions, parities[t]);
        restarts.observe(&index_of);

        outcomes.push(decisions.iter().map(|d| d.outcome).collect());
        alphas.push(decisions.iter().map(|d| d.alpha).collect());
        if let Some(r) = energy_rows.as_mut() {
            r.push(energies.clone());
        }
        if let Some(r) = index_rows.as_mut() {
            r.push(index_of.clone());
        }
        if let Some(r) = dir_rows.as_mut() {
            r.push(eps.clone());
        }
        if let Some(r) = state_rows.as_mut() {
            r.push(states.clone());
        }
    }

    Ok(PtTrace {
        scheme: config.scheme,
        betas,
        parities: parities[..t_max].to_vec(),
        next_parity: parities[t_max],
        outcomes,
        alphas,
        energies: energy_rows,
        indices: index_rows,
        directions: dir_rows,
        states: state_rows,
        final_states: states,
        restarts: restarts.count,
    })
}

/// Replica 0 of the configured run.
pub fn run_pt<M, I>(
    config: &PtConfig,
    model: &M,
    kernels: &[&dyn Explorer<M::State>],
    init: &I,
) -> Result<PtTrace<M::State>>
where
    M: TargetModel,
    I: Fn(usize, &mut StreamRng) -> M::State + Sync + ?Sized,
{
    run_replica(config, model, kernels, init, 0)
}

/// Runs all configured replicas in parallel and maps each trace through
/// `reduce` as soon as it completes. Output order follows replica index.
pub fn run_replicas<M, I, R, F>(
    config: &PtConfig,
    model: &M,
    kernels: &[&dyn Explorer<M::State>],
    init: &I,
    reduce: F,
) -> Result<Vec<R>>
where
    M: TargetModel,
    I: Fn(usize, &mut StreamRng) -> M::State + Sync + ?Sized,
    R: Send,
    F: Fn(u64, PtTrace<M::State>) -> R + Sync,
{
    config.validate()?;
    (0..config.replicas as u64)
        .into_par_iter()
        .map(|rep| run_replica(config, model, kernels, init, rep).map(|tr| reduce(rep, tr)))
        .collect()
}

/// Per-pair swap counts; mergeable across replicas.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SwapStats {
    pub proposals: Vec<u64>,
    pub accepts: Vec<u64>,
    pub alpha_sums: Vec<f64>,
}

impl SwapStats {
    pub fn new(pairs: usize) -> Self {
        Self {
            proposals: vec![0; pairs],
            accepts: vec![0; pairs],
            alpha_sums: vec![0.0; pairs],
        }
    }

    /// Statistics from iterations after the first `burn_in`.
    pub fn from_trace<S>(trace: &PtTrace<S>, burn_in: usize) -> Self {
        let mut s = Self::new(trace.n());
        for (row, alphas) in trace.outcomes.iter().zip(&trace.alphas).skip(burn_in) {
            for (pair, (o, a)) in row.iter().zip(alphas).enumerate() {
                if o.proposed() {
                    s.proposals[pair] += 1;
                    s.accepts[pair] += o.accepted() as u64;
                    s.alpha_sums[pair] += a;
                }
            }
        }
        s
    }

    pub fn pairs(&self) -> usize {
        self.proposals.len()
    }

    pub fn merge(&mut self, other: &SwapStats) {
        if self.pairs() == 0 {
            *self = other.clone();
            return;
        }
        assert_eq!(self.pairs(), other.pairs());
        for k in 0..self.pairs() {
            self.proposals[k] += other.proposals[k];
            self.accepts[k] += other.accepts[k];
            self.alpha_sums[k] += other.alpha_sums[k];
        }
    }

    /// r̂ = 1 − accepted/proposed, or None when the pair was never proposed.
    pub fn rejection(&self, pair: usize) -> Option<f64> {
        (self.proposals[pair] > 0).then(|| 1.0 - self.accepts[pair] as f64 / self.proposals[pair] as f64)
    }

    /// 1 − mean acceptance probability (lower-variance variant of r̂).
    pub fn rejection_rb(&self, pair: usize) -> Option<f64> {
        (self.proposals[pair] > 0).then(|| 1.0 - self.alpha_sums[pair] / self.proposals[pair] as f64)
    }

    pub fn rejections(&self) -> Vec<Option<f64>> {
        (0..self.pairs()).map(|k| self.rejection(k)).collect()
    }

    /// All r̂ values, or an error naming the first pair with no proposals.
    pub fn complete_rejections(&self) -> Result<Vec<f64>> {
        (0..self.pairs())
            .map(|k| {
                self.rejection(k)
                    .ok_or_else(|| Error::invalid(format!("pair ({k}, {}) was never proposed", k + 1)))
            })
            .collect()
    }

    pub fn complete_rejections_rb(&self) -> Result<Vec<f64>> {
        (0..self.pairs())
            .map(|k| {
                self.rejection_rb(k)
                    .ok_or_else(|| Error::invalid(format!("pair ({k}, {}) was never proposed", k + 1)))
            })
            .collect()
    }
}

/// Merged swap statistics of several traces.
pub fn rejection_rates<'a, S: 'a>(traces: impl IntoIterator<Item = &'a PtTrace<S>>, burn_in: usize) -> SwapStats {
    let mut s = SwapStats::default();
    for tr in traces {
        s.merge(&SwapStats::from_trace(tr, burn_in));
    }
    s
}

pub fn restart_count<S>(trace: &PtTrace<S>) -> u64 {
    trace.restarts
}

/// Whether the sample at the target chain at time t has an ancestral path
/// that visited chain 0 at some time s < t. Requires recorded indices.
pub fn ancestor_touched_reference<S>(trace: &PtTrace<S>, t: usize) -> Result<bool> {
    let ix = trace
        .indices
        .as_ref()
        .ok_or_else(|| Error::invalid("trace has no index process recorded"))?;
    ensure(t < ix.len(), || {
        format!("time {t} exceeds trace length {}", ix.len() - 1)
    })?;
    let n = trace.n();
    let m_star = ix[t]
        .iter()
        .position(|&i| i == n)
        .expect("index vector is a permutation");
    Ok(ix[..t].iter().any(|row| row[m_star] == 0))
}

/// Fraction of traces whose target-chain ancestral path at time t never
/// touched chain 0 strictly before t, with its binomial standard error.
pub fn ancestral_survival<S>(traces: &[PtTrace<S>], t: usize) -> Result<(f64, f64)> {
    ensure(!traces.is_empty(), || "no traces".into())?;
    let mut survived = 0usize;
    for tr in traces {
        survived += !ancestor_touched_reference(tr, t)? as usize;
    }
    let p = survived as f64 / traces.len() as f64;
    Ok((p, (p * (1.0 - p) / traces.len() as f64).sqrt()))
}

/// JSON run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scheme: Scheme,
    pub betas: Vec<f64>,
    pub iterations: usize,
    pub replicas: usize,
    pub rejection: Vec<Option<f64>>,
    pub lambda_hat: Option<f64>,
    pub restarts: u64,
}

impl RunSummary {
    pub fn from_traces<S>(traces: &[PtTrace<S>], burn_in: usize) -> Result<Self> {
        ensure(!traces.is_empty(), || "no traces".into())?;
        let stats = rejection_rates(traces, burn_in);
        let rejection = stats.rejections();
        let lambda_hat = rejection.iter().copied().sum::<Option<f64>>();
        Ok(Self {
            scheme: traces[0].scheme,
            betas: traces[0].betas.clone(),
            iterations: traces[0].iterations(),
            replicas: traces.len(),
            rejection,
            lambda_hat,
            restarts: traces.iter().map(|t| t.restarts).sum(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explorers::{IdealEle, IidReference};
    use crate::models::GaussianPair;

    struct Flat;
    impl TargetModel for Flat {
        type State = f64;
        fn log_reference(&self, _x: &f64) -> f64 {
            0.0
        }
        fn log_target_unnorm(&self, _x: &f64) -> f64 {
            0.0
        }
        fn sample_reference(&self, rng: &mut StreamRng) -> Option<f64> {
            Some(rng.random())
        }
    }

    /// Energy is −x with x on [0, 10⁶]: large gaps make every swap toward
    /// the target chain fail once the chains are ordered by energy.
    struct Steep;
    impl TargetModel for Steep {
        type State = f64;
        fn log_reference(&self, _x: &f64) -> f64 {
            0.0
        }
        fn log_target_unnorm(&self, x: &f64) -> f64 {
            *x
        }
    }

    fn keep(x: &f64, _b: f64, _r: &mut StreamRng) -> f64 {
        *x
    }

    #[test]
    fn nrpt_parities_alternate_starting_even() {
        let p = parity_sequence(Scheme::Nrpt, 4, &mut RngSeed(0).stream(0, 0));
        assert_eq!(p, vec![Parity::Even, Parity::Odd, Parity::Even, Parity::Odd]);
        let q = parity_sequence(Scheme::Rpt, 4000, &mut RngSeed(0).stream(0, 0));
        let evens = q.iter().filter(|&&x| x == Parity::Even).count() as f64;
        assert!((evens / 4000.0 - 0.5).abs() < 0.04);
    }

    #[test]
    fn communication_parity_sets_and_equal_energies() {
        let mut g = RngSeed(1).stream(0, 0);
        let betas = [0.0, 0.5, 1.0];
        let e = communication_step(&[3.0, 3.0, 3.0], &betas, Parity::Even, &mut g);
        assert_eq!(e[0].outcome, SwapOutcome::Accepted);
        assert_eq!(e[1].outcome, SwapOutcome::Idle);
        let o = communication_step(&[3.0, 3.0, 3.0], &betas, Parity::Odd, &mut g);
        assert_eq!(o[0].outcome, SwapOutcome::Idle);
        assert_eq!(o[1].outcome, SwapOutcome::Accepted);
    }

    #[test]
    fn communication_replays_bit_exactly() {
        let betas: Vec<f64> = (0..=6).map(|k| k as f64 / 6.0).collect();
        let e = [1.0, -2.0, 0.5, 3.0, -1.0, 0.0, 2.0];
        let a = communication_step(&e, &betas, Parity::Odd, &mut RngSeed(5).stream(3, 9));
        let b = communication_step(&e, &betas, Parity::Odd, &mut RngSeed(5).stream(3, 9));
        assert_eq!(
            a.iter().map(|d| d.outcome).collect::<Vec<_>>(),
            b.iter().map(|d| d.outcome).collect::<Vec<_>>()
        );
    }

    #[test]
    fn kernel_count_mismatch_is_rejected() {
        let cfg = PtConfig::new(Scheme::Nrpt, AnnealingSchedule::uniform(2).unwrap(), 3, 1, 0);
        let k: [&dyn Explorer<f64>; 2] = [&keep, &keep];
        assert!(run_pt(&cfg, &Flat, &k, &|_, _| 0.0).unwrap_err().is_validation());
    }

    #[test]
    fn conveyor_with_certain_acceptance() {
        let n = 5;
        let cfg = PtConfig::new(Scheme::Nrpt, AnnealingSchedule::uniform(n).unwrap(), 2 * n + 2, 1, 0);
        let k: Vec<&dyn Explorer<f64>> = (0..=n).map(|_| &keep as &dyn Explorer<f64>).collect();
        let tr = run_pt(&cfg, &Flat, &k, &|_, _| 0.5).unwrap();
        let path = tr.index_path(0).unwrap();
        // Machine 0 starts at (0, +1) and climbs one step per round.
        assert_eq!(path[n], n);
        assert!(restart_count(&tr) >= 1);
        assert!(tr.swap_stats().rejections().iter().all(|r| *r == Some(0.0)));
        for row in tr.indices.as_ref().unwrap() {
            let mut sorted = row.clone();
            sorted.sort();
            assert_eq!(sorted, (0..=n).collect::<Vec<_>>());
        }
        assert!(ancestor_touched_reference(&tr, 2 * n + 2).unwrap());
    }

    #[test]
    fn frozen_index_process_when_all_swaps_fail() {
        let n = 4;
        let cfg = PtConfig::new(Scheme::Rpt, AnnealingSchedule::uniform(n).unwrap(), 50, 1, 2);
        let k: Vec<&dyn Explorer<f64>> = (0..=n).map(|_| &keep as &dyn Explorer<f64>).collect();
        // Hotter chains hold much lower-energy states than colder ones: no swap can pass.
        let tr = run_pt(&cfg, &Steep, &k, &|c, _| 1e6 * c as f64).unwrap();
        for row in tr.indices.as_ref().unwrap() {
            assert_eq!(row, &(0..=n).collect::<Vec<_>>());
        }
        assert_eq!(restart_count(&tr), 0);
        assert!(tr.swap_stats().rejections().iter().all(|r| *r == Some(1.0)));
    }

    #[test]
    fn ancestral_survival_trivial_cases() {
        let n = 3;
        let cfg = PtConfig::new(Scheme::Nrpt, AnnealingSchedule::uniform(n).unwrap(), 10, 1, 0);
        let k: Vec<&dyn Explorer<f64>> = (0..=n).map(|_| &keep as &dyn Explorer<f64>).collect();
        let tr = run_pt(&cfg, &Flat, &k, &|_, _| 0.0).unwrap();
        assert_eq!(ancestral_survival(std::slice::from_ref(&tr), 1).unwrap().0, 1.0);
        assert!(ancestral_survival(std::slice::from_ref(&tr), 11).is_err());
    }

    #[test]
    fn missing_pairs_are_flagged() {
        let n = 3;
        let cfg = PtConfig::new(Scheme::Nrpt, AnnealingSchedule::uniform(n).unwrap(), 1, 1, 0);
        let k: Vec<&dyn Explorer<f64>> = (0..=n).map(|_| &keep as &dyn Explorer<f64>).collect();
        let tr = run_pt(&cfg, &Flat, &k, &|_, _| 0.0).unwrap();
        let s = tr.swap_stats();
        assert_eq!(s.rejection(1), None);
        assert!(s.complete_rejections().is_err());
    }

    #[test]
    fn single_chain_draws_from_reference() {
        let cfg = PtConfig::new(Scheme::Nrpt, AnnealingSchedule::new(vec![0.0]).unwrap(), 20_000, 1, 4).with_record(
            RecordFlags {
                states: true,
                energies: false,
                indices: false,
            },
        );
        let r = IidReference::new(&Flat).unwrap();
        let tr = run_pt(&cfg, &Flat, &[&r], &|_, _| 0.0).unwrap();
        let xs: Vec<f64> = tr.states.unwrap().iter().skip(1).map(|row| row[0]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.5).abs() < 3.0 * (1.0 / 12.0 / xs.len() as f64).sqrt());
    }

    #[test]
    fn determinism_and_replica_independence_of_thread_count() {
        let p = GaussianPair::mean_shift(vec![3.0]).unwrap();
        let n = 4;
        let cfg = PtConfig::new(Scheme::Rpt, AnnealingSchedule::uniform(n).unwrap(), 30, 8, 21);
        let ele = IdealEle::new(&p);
        let k: Vec<&dyn Explorer<Vec<f64>>> = (0..=n).map(|_| &ele as &dyn Explorer<Vec<f64>>).collect();
        let init = |_: usize, _: &mut StreamRng| vec![0.0];
        let a = run_replicas(&cfg, &p, &k, &init, |_, tr| tr).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run_replicas(&cfg, &p, &k, &init, |_, tr| tr).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(
                (&x.energies, &x.indices, &x.outcomes),
                (&y.energies, &y.indices, &y.outcomes)
            );
        }
        assert_ne!(a[0].energies, a[1].energies);
    }

    #[test]
    fn acceptance_matches_pair_sampling_oracle() {
        // Mean shift N(0,1) → N(μ,1) on a uniform grid: every pair has the
        // same rejection erf(μ/(2N)) in closed form.
        let mu = 3.0;
        let n = 3;
        let p = GaussianPair::mean_shift(vec![mu]).unwrap();
        let cfg = PtConfig::new(Scheme::Nrpt, AnnealingSchedule::uniform(n).unwrap(), 200, 200, 8);
        let ele = IdealEle::new(&p);
        let k: Vec<&dyn Explorer<Vec<f64>>> = (0..=n).map(|_| &ele as &dyn Explorer<Vec<f64>>).collect();
        let stats = run_replicas(&cfg, &p, &k, &|_, _| vec![0.0], |_, tr| tr.swap_stats()).unwrap();
        let mut s = SwapStats::default();
        stats.iter().for_each(|x| s.merge(x));
        let exact = libm::erf(mu / (2.0 * n as f64));
        for pair in 0..n {
            let r = s.rejection(pair).unwrap();
            let sd = (exact * (1.0 - exact) / s.proposals[pair] as f64).sqrt();
            assert!((r - exact).abs() < 4.0 * sd, "pair {pair}: {r} vs {exact}");
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn index_process_stays_a_permutation(seed in 0u64..10_000, n in 1usize..7, mu in 0.0f64..6.0, rpt in proptest::bool::ANY) {
            let p = GaussianPair::mean_shift(vec![mu]).unwrap();
            let scheme = if rpt { Scheme::Rpt } else { Scheme::Nrpt };
            let cfg = PtConfig::new(scheme, AnnealingSchedule::uniform(n).unwrap(), 40, 1, seed);
            let ele = IdealEle::new(&p);
            let k: Vec<&dyn Explorer<Vec<f64>>> = (0..=n).map(|_| &ele as &dyn Explorer<Vec<f64>>).collect();
            let tr = run_pt(&cfg, &p, &k, &|_, _: &mut StreamRng| vec![0.0]).unwrap();
            for row in tr.indices.as_ref().unwrap() {
                let mut seen = vec![false; n + 1];
                for &i in row {
                    proptest::prop_assert!(i <= n && !seen[i]);
                    seen[i] = true;
                }
            }
        }
    }
}
