//! Monte Carlo simulators for the index walks and their continuum limits.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anneal::{RngSeed, StreamRng};
use crate::error::{ensure, Result};

/// Persistent walk from (0, +1) until it reaches (N, +1). Each step moves in
/// the current direction with probability 1 − r and otherwise reverses; an
/// outward direction at index 0 reverses deterministically.
pub fn sim_persistent_walk(n: usize, r: f64, rng: &mut StreamRng) -> u64 {
    let (mut i, mut up) = (0usize, true);
    let mut t = 0u64;
    loop {
        t += 1;
        if !up && i == 0 {
            up = true;
        } else if rng.random::<f64>() < 1.0 - r {
            i = if up { i + 1 } else { i - 1 };
        } else {
            up = !up;
        }
        if up && i == n {
            return t;
        }
    }
}

/// Positions I_0..=I_{t_max} of the persistent walk reflected at both ends.
pub fn persistent_walk_path(n: usize, r: f64, t_max: usize, rng: &mut StreamRng) -> Vec<usize> {
    let (mut i, mut up) = (0usize, true);
    let mut path = Vec::with_capacity(t_max + 1);
    path.push(0);
    for _ in 0..t_max {
        if (!up && i == 0) || (up && i == n) {
            up = !up;
        } else if rng.random::<f64>() < 1.0 - r {
            i = if up { i + 1 } else { i - 1 };
        } else {
            up = !up;
        }
        path.push(i);
    }
    path
}

#[inline]
fn seo_step(i: usize, n: usize, r: f64, rng: &mut StreamRng) -> usize {
    let upward_round = rng.random::<bool>();
    let accept = rng.random::<f64>() < 1.0 - r;
    match (upward_round, accept) {
        (true, true) if i < n => i + 1,
        (false, true) if i > 0 => i - 1,
        _ => i,
    }
}

/// Lazy reflected walk from 0 until it first reaches N. Each step a random
/// swap round either offers the pair above or the pair below, and the offered
/// swap succeeds with probability 1 − r.
pub fn sim_seo_walk(n: usize, r: f64, rng: &mut StreamRng) -> u64 {
    let mut i = 0usize;
    let mut t = 0u64;
    while i < n {
        t += 1;
        i = seo_step(i, n, r, rng);
    }
    t
}

/// Positions I_0..=I_{t_max} of the lazy walk reflected at both ends.
pub fn seo_walk_path(n: usize, r: f64, t_max: usize, rng: &mut StreamRng) -> Vec<usize> {
    let mut i = 0usize;
    let mut path = Vec::with_capacity(t_max + 1);
    path.push(0);
    for _ in 0..t_max {
        i = seo_step(i, n, r, rng);
        path.push(i);
    }
    path
}

/// Exact event-driven simulation of the unit-speed velocity-flip process on
/// [0, 1]: flips at rate Λ, reflects at 0, absorbed on reaching 1 moving up.
pub fn sim_pdmp(lambda: f64, rng: &mut StreamRng) -> f64 {
    let clock = (lambda > 0.0).then(|| Exp::new(lambda).expect("positive rate"));
    let (mut x, mut up, mut t) = (0.0f64, true, 0.0f64);
    loop {
        let e = match &clock {
            Some(c) => c.sample(rng),
            None => f64::INFINITY,
        };
        if up {
            if e >= 1.0 - x {
                return t + (1.0 - x);
            }
            x += e;
            t += e;
            up = false;
        } else if e >= x {
            t += x;
            x = 0.0;
            up = true;
        } else {
            x -= e;
            t += e;
            up = true;
        }
    }
}

/// Reflected Brownian motion on [0, 1] from 0, first passage of 1. Euler
/// steps of size dt folded at 0, with the Brownian-bridge probability of an
/// unobserved crossing of 1 inside each step. Returns +∞ when no passage
/// happens before `horizon`.
pub fn sim_reflected_bm(dt: f64, horizon: f64, rng: &mut StreamRng) -> f64 {
    let sd = dt.sqrt();
    let (mut x, mut t) = (0.0f64, 0.0f64);
    while t < horizon {
        let z: f64 = StandardNormal.sample(rng);
        let mut y = x + sd * z;
        t += dt;
        if y < 0.0 {
            y = -y;
        }
        if y >= 1.0 {
            return t;
        }
        let exponent = 2.0 * (1.0 - x) * (1.0 - y) / dt;
        if exponent < 40.0 && rng.random::<f64>() < (-exponent).exp() {
            return t;
        }
        x = y;
    }
    f64::INFINITY
}

/// Draws `n_rep` samples, replicate k using stream (k, lane) of `seed`, so the
/// result does not depend on how rayon schedules the work.
pub fn hitting_samples<F>(n_rep: usize, seed: RngSeed, lane: u64, sim: F) -> Vec<f64>
where
    F: Fn(&mut StreamRng) -> f64 + Sync,
{
    (0..n_rep)
        .into_par_iter()
        .map(|k| sim(&mut seed.stream(k as u64, lane)))
        .collect()
}

/// Empirical Pr(τ > t) on a grid, with binomial standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub t_grid: Vec<f64>,
    pub survival: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_rep: usize,
}

impl SurvivalCurve {
    pub fn from_samples(samples: &[f64], t_grid: &[f64]) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let n = sorted.len();
        let survival: Vec<f64> = t_grid
            .iter()
            .map(|&t| {
                let at_most = sorted.partition_point(|&s| s <= t);
                (n - at_most) as f64 / n as f64
            })
            .collect();
        let stderr = survival.iter().map(|&p| (p * (1.0 - p) / n as f64).sqrt()).collect();
        Self {
            t_grid: t_grid.to_vec(),
            survival,
            stderr,
            n_rep: n,
        }
    }

    pub fn max_stderr(&self) -> f64 {
        self.stderr.iter().cloned().fold(0.0, f64::max)
    }
}

pub fn survival_curve<F>(sim: F, t_grid: &[f64], n_rep: usize, seed: RngSeed) -> Result<SurvivalCurve>
where
    F: Fn(&mut StreamRng) -> f64 + Sync,
{
    ensure(n_rep >= 100, || {
        format!("survival curve needs at least 100 replicates, got {n_rep}")
    })?;
    let samples = hitting_samples(n_rep, seed, 0, sim);
    Ok(SurvivalCurve::from_samples(&samples, t_grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anneal::Scheme;
    use crate::bounds::{rpt_infinite_bound, rpt_infinite_tail, HittingTailTable, RPT_SERIES_TERMS};

    fn seed() -> RngSeed {
        RngSeed(20240611)
    }

    #[test]
    fn conveyor_hits_in_exactly_n_steps() {
        let mut rng = seed().stream(0, 0);
        for n in 1..20 {
            assert_eq!(sim_persistent_walk(n, 0.0, &mut rng), n as u64);
        }
    }

    #[test]
    fn one_step_survival_matches_rejection() {
        let r = 0.37;
        let s = hitting_samples(200_000, seed(), 1, |g| sim_persistent_walk(1, r, g) as f64);
        let p = s.iter().filter(|&&t| t > 1.0).count() as f64 / s.len() as f64;
        let sd = (r * (1.0 - r) / s.len() as f64).sqrt();
        assert!((p - r).abs() < 3.5 * sd, "{p} vs {r}");
    }

    fn sup_diff_vs_table(samples: &[f64], tab: &HittingTailTable) -> (f64, f64) {
        let grid: Vec<f64> = (0..=tab.t_max()).map(|t| t as f64).collect();
        let curve = SurvivalCurve::from_samples(samples, &grid);
        let mut worst: f64 = 0.0;
        let mut worst_z: f64 = 0.0;
        for (t, (&p, &se)) in curve.survival.iter().zip(&curve.stderr).enumerate() {
            let exact = tab.tail(t);
            let sd = (exact * (1.0 - exact) / samples.len() as f64).sqrt().max(se).max(1e-12);
            worst = worst.max((p - exact).abs());
            worst_z = worst_z.max((p - exact).abs() / sd);
        }
        (worst, worst_z)
    }

    #[test]
    fn persistent_walk_matches_matrix_tail() {
        let tab = HittingTailTable::compute(Scheme::Nrpt, 30, 0.1, 400).unwrap();
        let s = hitting_samples(50_000, seed(), 2, |g| sim_persistent_walk(30, 0.1, g) as f64);
        let (d, _) = sup_diff_vs_table(&s, &tab);
        assert!(d < 1.63 / (s.len() as f64).sqrt(), "sup diff {d}");
    }

    #[test]
    fn seo_walk_matches_geometric_and_matrix_tail() {
        let r = 0.3;
        let s = hitting_samples(50_000, seed(), 3, |g| sim_seo_walk(1, r, g) as f64);
        let tab = HittingTailTable::compute(Scheme::Rpt, 1, r, 60).unwrap();
        let (d, _) = sup_diff_vs_table(&s, &tab);
        assert!(d < 1.63 / (s.len() as f64).sqrt());
        let s30 = hitting_samples(20_000, seed(), 4, |g| sim_seo_walk(30, 0.5, g) as f64);
        let tab30 = HittingTailTable::compute(Scheme::Rpt, 30, 0.5, 20_000).unwrap();
        let (d30, _) = sup_diff_vs_table(&s30, &tab30);
        assert!(d30 < 1.63 / (s30.len() as f64).sqrt(), "sup diff {d30}");
    }

    #[test]
    fn seo_mean_hitting_time_is_diffusive() {
        let mean = |n: usize, lane| {
            let s = hitting_samples(20_000, seed(), lane, |g| sim_seo_walk(n, 0.3, g) as f64);
            s.iter().sum::<f64>() / s.len() as f64
        };
        let ratio = mean(20, 5) / mean(10, 6);
        assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn ballistic_pdmp_takes_unit_time() {
        let mut rng = seed().stream(0, 7);
        assert_eq!(sim_pdmp(0.0, &mut rng), 1.0);
    }

    #[test]
    fn pdmp_respects_loose_bound() {
        for (lane, lambda) in [(8u64, 1.0), (9, 4.0)] {
            let s = hitting_samples(100_000, seed(), lane, |g| sim_pdmp(lambda, g));
            let curve = SurvivalCurve::from_samples(&s, &[2.0, 6.0, 10.0]);
            for (k, &t) in curve.t_grid.iter().enumerate() {
                let b = crate::bounds::pdmp_loose_bound(lambda, t).unwrap();
                assert!(curve.survival[k] <= b + 3.0 * curve.stderr[k]);
            }
        }
    }

    #[test]
    fn reflected_bm_survival_near_series() {
        let dt = 1e-4;
        let s = hitting_samples(20_000, seed(), 10, |g| sim_reflected_bm(dt, 4.0, g));
        let curve = SurvivalCurve::from_samples(&s, &[0.1, 1.0, 2.0, 4.0]);
        for (k, &t) in curve.t_grid.iter().enumerate() {
            let exact = rpt_infinite_tail(t, RPT_SERIES_TERMS).unwrap();
            let tol = 3.0 * curve.stderr[k] + 2.0 * dt.sqrt();
            assert!((curve.survival[k] - exact).abs() <= tol, "t={t}");
            if t >= 1.0 {
                assert!(curve.survival[k] <= rpt_infinite_bound(t) + 3.0 * curve.stderr[k]);
            }
        }
    }

    #[test]
    fn survival_curve_of_constant_is_a_step() {
        let c = survival_curve(|_| 2.5, &[0.0, 2.0, 2.5, 3.0], 100, seed()).unwrap();
        assert_eq!(c.survival, vec![1.0, 1.0, 0.0, 0.0]);
        assert!(survival_curve(|_| 1.0, &[0.0], 10, seed()).is_err());
    }

    #[test]
    fn survival_curve_is_reproducible() {
        let grid: Vec<f64> = (0..50).map(|t| t as f64).collect();
        let a = survival_curve(|g| sim_persistent_walk(6, 0.4, g) as f64, &grid, 5000, seed()).unwrap();
        let b = survival_curve(|g| sim_persistent_walk(6, 0.4, g) as f64, &grid, 5000, seed()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nrpt_survival_below_rpt() {
        let grid: Vec<f64> = (0..=400).step_by(10).map(|t| t as f64).collect();
        for (k, r) in [0.1, 0.5, 0.9].into_iter().enumerate() {
            let lane = 20 + 2 * k as u64;
            let nr = hitting_samples(5000, seed(), lane, |g| sim_persistent_walk(30, r, g) as f64);
            let rp = hitting_samples(5000, seed(), lane + 1, |g| sim_seo_walk(30, r, g) as f64);
            let a = SurvivalCurve::from_samples(&nr, &grid);
            let b = SurvivalCurve::from_samples(&rp, &grid);
            for i in 0..grid.len() {
                let sd = (a.stderr[i].powi(2) + b.stderr[i].powi(2)).sqrt();
                assert!(a.survival[i] <= b.survival[i] + 3.0 * sd, "r={r} t={}", grid[i]);
            }
        }
    }

    #[test]
    fn free_paths_stay_in_range() {
        let mut rng = seed().stream(1, 30);
        let p = persistent_walk_path(5, 0.3, 500, &mut rng);
        assert!(p.iter().all(|&i| i <= 5));
        assert!(p.windows(2).all(|w| w[0].abs_diff(w[1]) <= 1));
        let q = seo_walk_path(5, 0.3, 500, &mut rng);
        assert!(q.iter().all(|&i| i <= 5));
    }

    #[test]
    fn scaled_persistent_walk_approaches_pdmp() {
        use crate::diagnostics::ks_two_sample;
        let lambda = 4.0;
        let reps = 20_000;
        let pdmp = hitting_samples(reps, seed(), 50, |g| sim_pdmp(lambda, g));
        let ks: Vec<f64> = [10usize, 30, 100]
            .iter()
            .map(|&n| {
                let r = lambda / n as f64;
                let walk = hitting_samples(reps, seed(), n as u64, |g| {
                    sim_persistent_walk(n, r, g) as f64 / n as f64
                });
                ks_two_sample(&walk, &pdmp)
            })
            .collect();
        assert!(ks[0] > ks[1] && ks[1] > ks[2], "{ks:?}");
    }
}
