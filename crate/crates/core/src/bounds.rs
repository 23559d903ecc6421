//! Exact hitting tails of the index walks, coarse closed-form bounds and the
//! infinite-chain limits.

use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::anneal::Scheme;
use crate::error::{ensure, Error, Result};

/// Row-stochastic transition matrix stored as (row, col, value) triples with
/// 0-based indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseTransition {
    pub scheme: Scheme,
    pub dim: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseTransition {
    /// Index of the absorbing "reached the target" state.
    pub fn absorbing_state(&self) -> usize {
        0
    }

    /// Index of the walk's starting state.
    pub fn start_state(&self) -> usize {
        match self.scheme {
            Scheme::Nrpt => self.dim - 2,
            Scheme::Rpt => self.dim - 1,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.dim]; self.dim];
        for &(i, j, v) in &self.entries {
            m[i][j] += v;
        }
        m
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.dim];
        for &(i, _, v) in &self.entries {
            s[i] += v;
        }
        s
    }

    /// out = p·A for a row vector p.
    pub fn step_row(&self, p: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(i, j, v) in &self.entries {
            out[j] += p[i] * v;
        }
    }
}

fn check_r(r: f64) -> Result<()> {
    ensure((0.0..1.0).contains(&r), || format!("rejection rate {r} outside [0, 1)"))
}

fn check_n(n: usize) -> Result<()> {
    ensure(n >= 1, || "N must be at least 1".into())
}

pub fn build_transition(scheme: Scheme, n: usize, r: f64) -> Result<SparseTransition> {
    check_n(n)?;
    check_r(r)?;
    let mut entries = Vec::new();
    let dim = match scheme {
        Scheme::Nrpt => {
            // 1-based layout: state 1 absorbing, rows 2k and 2k+1 are the
            // two directions at one index, the last row reflects.
            let dim = 2 * n + 2;
            let mut put = |i: usize, j: usize, v: f64| {
                if v != 0.0 {
                    entries.push((i - 1, j - 1, v));
                }
            };
            put(1, 1, 1.0);
            for k in 1..=n {
                put(2 * k, 2 * k - 1, r);
                put(2 * k, 2 * k + 2, 1.0 - r);
                put(2 * k + 1, 2 * k + 2, r);
                put(2 * k + 1, 2 * k - 1, 1.0 - r);
            }
            put(2 * n + 2, 2 * n + 1, 1.0);
            dim
        }
        Scheme::Rpt => {
            let dim = n + 1;
            let half = 0.5 * (1.0 - r);
            entries.push((0, 0, 1.0));
            for i in 1..n {
                entries.push((i, i - 1, half));
                if r != 0.0 {
                    entries.push((i, i, r));
                }
                entries.push((i, i + 1, half));
            }
            entries.push((n, n - 1, half));
            entries.push((n, n, 0.5 * (1.0 + r)));
            dim
        }
    };
    Ok(SparseTransition { scheme, dim, entries })
}

/// Pr(τ_N > t) for t = 0..=t_max.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingTailTable {
    pub scheme: Scheme,
    pub n: usize,
    pub r: f64,
    pub tails: Vec<f64>,
}

impl HittingTailTable {
    pub fn compute(scheme: Scheme, n: usize, r: f64, t_max: usize) -> Result<Self> {
        let a = build_transition(scheme, n, r)?;
        let mut p = vec![0.0; a.dim];
        let mut next = vec![0.0; a.dim];
        p[a.start_state()] = 1.0;
        let mut tails = Vec::with_capacity(t_max + 1);
        tails.push(1.0);
        for _ in 0..t_max {
            a.step_row(&p, &mut next);
            std::mem::swap(&mut p, &mut next);
            let tail = (1.0 - p[a.absorbing_state()]).clamp(0.0, 1.0);
            tails.push(if tail < 1e-300 { 0.0 } else { tail });
        }
        Ok(Self { scheme, n, r, tails })
    }

    pub fn t_max(&self) -> usize {
        self.tails.len() - 1
    }

    pub fn tail(&self, t: usize) -> f64 {
        self.tails[t]
    }
}

pub fn hitting_tail(scheme: Scheme, n: usize, r: f64, t: usize) -> Result<f64> {
    Ok(HittingTailTable::compute(scheme, n, r, t)?.tail(t))
}

/// Marginal TV bound at iteration t: the hitting tail at t − 1.
pub fn tv_bound_finite(scheme: Scheme, n: usize, r: f64, t: usize) -> Result<f64> {
    ensure(t >= 1, || "TV bound needs t >= 1".into())?;
    hitting_tail(scheme, n, r, t - 1)
}

pub fn coarse_bound(scheme: Scheme, n: usize, r: f64, t: usize) -> Result<f64> {
    check_n(n)?;
    check_r(r)?;
    let (success, block) = match scheme {
        Scheme::Nrpt => ((1.0 - r).powi(2 * n as i32), 2 * n + 1),
        Scheme::Rpt => ((0.5 * (1.0 - r)).powi(n as i32), n),
    };
    Ok(powu(1.0 - success, t / block))
}

fn powu(base: f64, k: usize) -> f64 {
    if k > i32::MAX as usize {
        return if base >= 1.0 { 1.0 } else { 0.0 };
    }
    base.powi(k as i32)
}

/// (1 − e^{−2Λ})^{⌊t/2⌋}.
pub fn pdmp_loose_bound(lambda: f64, t: f64) -> Result<f64> {
    ensure(lambda >= 0.0, || format!("Lambda {lambda} must be >= 0"))?;
    ensure(t >= 0.0, || format!("t {t} must be >= 0"))?;
    let k = (t / 2.0).floor() as usize;
    Ok(powu(-(-2.0 * lambda).exp_m1(), k))
}

/// Universal constant valid for every Λ ≥ 1.
pub const UNIVERSAL_C: f64 = 106.0;

/// min(1, C·e^{−(t−1)/(Λ+2)}): tail of the infinite-chain hitting time.
pub fn nrpt_infinite_bound(lambda: f64, t: f64, c: f64) -> Result<f64> {
    ensure(lambda >= 1.0, || {
        format!("infinite-chain bound needs Lambda >= 1, got {lambda}")
    })?;
    ensure(t > 1.0, || format!("infinite-chain tail bound needs t > 1, got {t}"))?;
    ensure(c >= 0.0, || "C must be non-negative".into())?;
    Ok((c * (-(t - 1.0) / (lambda + 2.0)).exp()).min(1.0))
}

/// The TV form of [`nrpt_infinite_bound`], shifted by one more iteration.
pub fn nrpt_infinite_tv_bound(lambda: f64, t: f64, c: f64) -> Result<f64> {
    ensure(t > 2.0, || format!("infinite-chain TV bound needs t > 2, got {t}"))?;
    nrpt_infinite_bound(lambda, t - 1.0, c)
}

/// Pr(τ∞ > t) for reflected Brownian motion on [0, 1] started at 0 and
/// absorbed at 1.
///
/// Uses the Fourier series with `k_max` terms when its dropped tail is below
/// 1e-13, and the method-of-images sum otherwise (small t, where the series
/// converges slowly and the images sum converges fast).
pub fn rpt_infinite_tail(t: f64, k_max: usize) -> Result<f64> {
    ensure(t >= 0.0, || format!("t {t} must be >= 0"))?;
    let pi = std::f64::consts::PI;
    let k_next = (k_max + 1) as f64;
    let dropped = (-k_next * k_next * pi * pi * t / 8.0).exp();
    let value = if t > 0.0 && dropped < 1e-13 {
        let mut s = 0.0;
        for k in (1..=k_max).step_by(2) {
            let kf = k as f64;
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * 4.0 / (kf * pi) * (-kf * kf * pi * pi * t / 8.0).exp();
        }
        s
    } else {
        if t == 0.0 {
            return Ok(1.0);
        }
        let scale = (2.0 * t).sqrt();
        let mut hit = 0.0;
        let mut n = 0usize;
        loop {
            let arg = (2 * n + 1) as f64 / scale;
            let term = erfc(arg);
            hit += if n % 2 == 0 { term } else { -term };
            if term < 1e-18 || n > 10_000 {
                break;
            }
            n += 1;
        }
        1.0 - 2.0 * hit
    };
    Ok(value.clamp(0.0, 1.0))
}

pub const RPT_SERIES_TERMS: usize = 200;

/// 2e^{−π²t/8}, valid for t ≥ 1.
pub fn rpt_infinite_bound(t: f64) -> f64 {
    2.0 * (-std::f64::consts::PI.powi(2) * t / 8.0).exp()
}

/// ⌈max{0, (log ε − log C)/log ρ}⌉.
pub fn mixing_time_bound(c: f64, rho: f64, eps: f64) -> Result<u64> {
    ensure(rho > 0.0 && rho < 1.0, || format!("rate {rho} outside (0, 1)"))?;
    ensure(c >= 0.0, || "C must be non-negative".into())?;
    ensure(eps > 0.0, || "epsilon must be positive".into())?;
    if c == 0.0 {
        return Ok(0);
    }
    let k = ((eps.ln() - c.ln()) / rho.ln()).max(0.0);
    if !k.is_finite() {
        return Err(Error::Numerical("mixing time overflow".into()));
    }
    Ok(k.ceil() as u64)
}
