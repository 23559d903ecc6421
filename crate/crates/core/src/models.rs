//! Benchmark reference/target pairs with exact oracles.

use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::anneal::{StreamRng, TargetModel};
use crate::error::{ensure, Error, Result};

/// Models that can draw exactly from every π_β on the linear path.
pub trait ExactPathSampler: TargetModel {
    fn sample_path(&self, beta: f64, rng: &mut StreamRng) -> Self::State;
}

/// Per-β cache of immutable precomputed tables, shared across threads.
struct BetaCache<T> {
    map: RwLock<HashMap<u64, Arc<T>>>,
}

impl<T> BetaCache<T> {
    fn new() -> Self {
        Self {
            map: RwLock::new(HashMap::new()),
        }
    }

    fn get_or_build(&self, beta: f64, build: impl FnOnce() -> T) -> Arc<T> {
        let key = beta.to_bits();
        if let Some(v) = self.map.read().expect("cache lock").get(&key) {
            return v.clone();
        }
        let built = Arc::new(build());
        self.map
            .write()
            .expect("cache lock")
            .entry(key)
            .or_insert(built)
            .clone()
    }
}

fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (x - mean).powi(2) / var - 0.5 * (2.0 * PI * var).ln()
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

// ---------------------------------------------------------------------------
// Ising model on the 4×4 torus

pub const ISING_SIDE: usize = 4;
pub const ISING_SITES: usize = ISING_SIDE * ISING_SIDE;
pub const ISING_STATES: usize = 1 << ISING_SITES;

/// The 32 edges of the 4×4 torus (right and down neighbour of each site).
pub fn torus_edges() -> &'static [(usize, usize)] {
    static EDGES: OnceLock<Vec<(usize, usize)>> = OnceLock::new();
    EDGES.get_or_init(|| {
        let mut e = Vec::with_capacity(2 * ISING_SITES);
        for i in 0..ISING_SIDE {
            for j in 0..ISING_SIDE {
                let s = ISING_SIDE * i + j;
                e.push((s, ISING_SIDE * i + (j + 1) % ISING_SIDE));
                e.push((s, ISING_SIDE * ((i + 1) % ISING_SIDE) + j));
            }
        }
        e
    })
}

pub fn torus_neighbours() -> &'static [[usize; 4]; ISING_SITES] {
    static NB: OnceLock<[[usize; 4]; ISING_SITES]> = OnceLock::new();
    NB.get_or_init(|| {
        let mut nb = [[0; 4]; ISING_SITES];
        for i in 0..ISING_SIDE {
            for j in 0..ISING_SIDE {
                let n = ISING_SIDE;
                nb[n * i + j] = [
                    n * i + (j + 1) % n,
                    n * i + (j + n - 1) % n,
                    n * ((i + 1) % n) + j,
                    n * ((i + n - 1) % n) + j,
                ];
            }
        }
        nb
    })
}

/// Spin of site i in a 16-bit code: bit set means +1.
#[inline]
pub fn spin(code: u16, i: usize) -> i32 {
    if code >> i & 1 == 1 {
        1
    } else {
        -1
    }
}

pub const ALL_MINUS: u16 = 0;
pub const ALL_PLUS: u16 = u16::MAX;

/// Σ_{i∼j} x_i x_j over the torus edges.
pub fn edge_sum(code: u16) -> i32 {
    torus_edges().iter().map(|&(a, b)| spin(code, a) * spin(code, b)).sum()
}

/// Uniform reference on {−1, 1}^16, target γ₁(x) = exp(Σ x_i x_j).
#[derive(Debug, Clone, Copy, Default)]
pub struct IsingModel;

impl TargetModel for IsingModel {
    type State = u16;

    fn log_reference(&self, _x: &u16) -> f64 {
        -(ISING_SITES as f64) * LN_2
    }

    fn log_target_unnorm(&self, x: &u16) -> f64 {
        edge_sum(*x) as f64
    }

    fn sample_reference(&self, rng: &mut StreamRng) -> Option<u16> {
        Some(rng.random())
    }
}

/// States grouped by edge sum, so that exact draws from π_β only need a
/// categorical draw over the 15 distinct levels.
struct IsingLevels {
    sums: Vec<i32>,
    states: Vec<Vec<u16>>,
    level_of: Vec<u8>,
}

fn ising_levels() -> &'static IsingLevels {
    static LEVELS: OnceLock<IsingLevels> = OnceLock::new();
    LEVELS.get_or_init(|| {
        let mut by_sum: std::collections::BTreeMap<i32, Vec<u16>> = Default::default();
        for code in 0..ISING_STATES {
            by_sum.entry(edge_sum(code as u16)).or_default().push(code as u16);
        }
        let sums: Vec<i32> = by_sum.keys().copied().collect();
        let states: Vec<Vec<u16>> = by_sum.into_values().collect();
        let mut level_of = vec![0u8; ISING_STATES];
        for (k, group) in states.iter().enumerate() {
            for &s in group {
                level_of[s as usize] = k as u8;
            }
        }
        IsingLevels { sums, states, level_of }
    })
}

/// Distinct edge sums and their multiplicities.
pub fn ising_level_counts() -> Vec<(i32, usize)> {
    let l = ising_levels();
    l.sums.iter().zip(&l.states).map(|(&s, g)| (s, g.len())).collect()
}

/// Exact law of the edge sum under π_β as (sum, probability) pairs.
pub fn ising_edge_sum_law(beta: f64) -> Vec<(i32, f64)> {
    let counts = ising_level_counts();
    let top = counts
        .iter()
        .map(|&(s, _)| beta * s as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = counts
        .iter()
        .map(|&(s, c)| c as f64 * (beta * s as f64 - top).exp())
        .collect();
    let z: f64 = w.iter().sum();
    counts.iter().zip(w).map(|(&(s, _), wi)| (s, wi / z)).collect()
}

impl ExactPathSampler for IsingModel {
    fn sample_path(&self, beta: f64, rng: &mut StreamRng) -> u16 {
        let levels = ising_levels();
        let law = ising_edge_sum_law(beta);
        let mut u: f64 = rng.random();
        let mut k = law.len() - 1;
        for (i, &(_, p)) in law.iter().enumerate() {
            if u < p {
                k = i;
                break;
            }
            u -= p;
        }
        let group = &levels.states[k];
        group[rng.random_range(0..group.len())]
    }
}

/// Probability table over an enumerable state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDist {
    pub probs: Vec<f64>,
    /// log of the normalizing constant of the unnormalized weights.
    pub log_z: f64,
}

impl DiscreteDist {
    pub fn from_log_weights(log_w: &[f64]) -> Result<Self> {
        ensure(!log_w.is_empty(), || "empty distribution".into())?;
        ensure(log_w.iter().all(|w| !w.is_nan()), || "NaN log weight".into())?;
        let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        ensure(top.is_finite(), || "all weights are zero".into())?;
        let w: Vec<f64> = log_w.iter().map(|&l| (l - top).exp()).collect();
        let z: f64 = w.iter().sum();
        Ok(Self {
            probs: w.iter().map(|x| x / z).collect(),
            log_z: top + z.ln(),
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, s: usize) -> f64 {
        self.probs[s]
    }
}

/// π_β(x) ∝ exp(β Σ x_i x_j) over all 65,536 states.
pub fn ising_exact_distribution(beta: f64) -> Result<DiscreteDist> {
    ensure((0.0..=1.0).contains(&beta), || format!("beta {beta} outside [0, 1]"))?;
    let levels = ising_levels();
    let log_w: Vec<f64> = (0..ISING_STATES)
        .map(|s| beta * levels.sums[levels.level_of[s] as usize] as f64)
        .collect();
    DiscreteDist::from_log_weights(&log_w)
}

// ---------------------------------------------------------------------------
// One-dimensional targets

/// Piecewise-constant density on a uniform grid, for inverse-CDF draws.
struct GridCdf {
    lo: f64,
    dx: f64,
    cdf: Vec<f64>,
}

impl GridCdf {
    fn build(lo: f64, hi: f64, cells: usize, log_density: impl Fn(f64) -> f64) -> Self {
        let dx = (hi - lo) / cells as f64;
        let logs: Vec<f64> = (0..cells).map(|k| log_density(lo + (k as f64 + 0.5) * dx)).collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut cdf = Vec::with_capacity(cells + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for l in logs {
            acc += (l - top).exp();
            cdf.push(acc);
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        Self { lo, dx, cdf }
    }

    fn sample(&self, rng: &mut StreamRng) -> f64 {
        let u: f64 = rng.random();
        let k = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1) - 1;
        let (a, b) = (self.cdf[k], self.cdf[k + 1]);
        let frac = if b > a { (u - a) / (b - a) } else { 0.5 };
        self.lo + (k as f64 + frac) * self.dx
    }
}

/// Target 0.5 N(−m, 1) + 0.5 N(m, 1) with reference N(0, m² + 1), m = 100.
pub struct BimodalPair {
    pub mode: f64,
    pub reference_var: f64,
    grids: BetaCache<GridCdf>,
}

impl Default for BimodalPair {
    fn default() -> Self {
        Self::new(100.0)
    }
}

impl BimodalPair {
    pub fn new(mode: f64) -> Self {
        Self {
            mode,
            reference_var: mode * mode + 1.0,
            grids: BetaCache::new(),
        }
    }
}

/// The bimodal benchmark pair.
pub fn bimodal_pair() -> BimodalPair {
    BimodalPair::default()
}

impl TargetModel for BimodalPair {
    type State = f64;

    fn log_reference(&self, x: &f64) -> f64 {
        log_normal_pdf(*x, 0.0, self.reference_var)
    }

    fn log_target_unnorm(&self, x: &f64) -> f64 {
        log_sum_exp(log_normal_pdf(*x, -self.mode, 1.0), log_normal_pdf(*x, self.mode, 1.0)) - LN_2
    }

    fn sample_reference(&self, rng: &mut StreamRng) -> Option<f64> {
        Some(self.reference_var.sqrt() * rng.sample::<f64, _>(StandardNormal))
    }
}

impl ExactPathSampler for BimodalPair {
    fn sample_path(&self, beta: f64, rng: &mut StreamRng) -> f64 {
        let half_width = 6.0 * self.reference_var.sqrt();
        let grid = self.grids.get_or_build(beta, || {
            let cells = (2.0 * half_width / 0.005).ceil() as usize;
            GridCdf::build(-half_width, half_width, cells, |x| {
                (1.0 - beta) * self.log_reference(&x) + beta * self.log_target_unnorm(&x)
            })
        });
        grid.sample(rng)
    }
}

/// Truncated target on R₁ ∪ R₂ = [−15, −5] ∪ [5, 15] with a mode-local
/// exact kernel; the reference is uniform on R₁ ∪ R₂.
#[derive(Debug, Clone, Copy, Default)]
pub struct DisjointModes;

impl DisjointModes {
    pub const REGIONS: [(f64, f64); 2] = [(-15.0, -5.0), (5.0, 15.0)];
    pub const CENTRES: [f64; 2] = [-10.0, 10.0];

    pub fn region_of(x: f64) -> Option<usize> {
        Self::REGIONS.iter().position(|&(a, b)| (a..=b).contains(&x))
    }
}

impl TargetModel for DisjointModes {
    type State = f64;

    fn log_reference(&self, x: &f64) -> f64 {
        match Self::region_of(*x) {
            Some(_) => -(20f64.ln()),
            None => f64::NEG_INFINITY,
        }
    }

    fn log_target_unnorm(&self, x: &f64) -> f64 {
        match Self::region_of(*x) {
            Some(i) => (0.5f64).ln() + log_normal_pdf(*x, Self::CENTRES[i], 1.0),
            None => f64::NEG_INFINITY,
        }
    }

    fn sample_reference(&self, rng: &mut StreamRng) -> Option<f64> {
        let (a, b) = Self::REGIONS[rng.random_range(0..2)];
        Some(rng.random_range(a..=b))
    }
}

/// π₁(x₁, x₂) = N(x₂; a x₁, 1)·1(x₁ ∈ [0, 1]) with reference
/// U[0, 1] × N(a/2, 1 + a²/12).
#[derive(Debug, Clone, Copy)]
pub struct ThinShell {
    pub a: f64,
}

impl ThinShell {
    pub fn new(a: f64) -> Result<Self> {
        ensure(a > 0.0, || format!("thin-shell scale must be positive, got {a}"))?;
        Ok(Self { a })
    }

    fn reference_x2(&self) -> (f64, f64) {
        (0.5 * self.a, 1.0 + self.a * self.a / 12.0)
    }

    /// −log π₁(x) with π₁ normalized; 2(this − ½log 2π) is χ²₁ under π₁.
    pub fn neg_log_target(&self, x: &[f64; 2]) -> f64 {
        -log_normal_pdf(x[1], self.a * x[0], 1.0)
    }
}

impl TargetModel for ThinShell {
    type State = [f64; 2];

    fn log_reference(&self, x: &[f64; 2]) -> f64 {
        if !(0.0..=1.0).contains(&x[0]) {
            return f64::NEG_INFINITY;
        }
        let (m, v) = self.reference_x2();
        log_normal_pdf(x[1], m, v)
    }

    fn log_target_unnorm(&self, x: &[f64; 2]) -> f64 {
        if !(0.0..=1.0).contains(&x[0]) {
            return f64::NEG_INFINITY;
        }
        log_normal_pdf(x[1], self.a * x[0], 1.0)
    }

    fn sample_reference(&self, rng: &mut StreamRng) -> Option<[f64; 2]> {
        let (m, v) = self.reference_x2();
        let x2 = m + v.sqrt() * rng.sample::<f64, _>(StandardNormal);
        Some([rng.random(), x2])
    }
}

/// The two instructional targets with ELE-satisfying yet non-mixing kernels.
pub fn example_targets(a: f64) -> Result<(DisjointModes, ThinShell)> {
    Ok((DisjointModes, ThinShell::new(a)?))
}

/// Draw from N(mean, sd²) truncated to [lo, hi].
pub fn truncated_normal(mean: f64, sd: f64, lo: f64, hi: f64, rng: &mut StreamRng) -> f64 {
    debug_assert!(lo < hi && sd > 0.0);
    let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
    let z = if a > 0.0 {
        one_sided_tail(a, b, rng)
    } else if b < 0.0 {
        -one_sided_tail(-b, -a, rng)
    } else if b - a > 2.5 {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            if z >= a && z <= b {
                break z;
            }
        }
    } else {
        loop {
            let z = rng.random_range(a..=b);
            if rng.random::<f64>() < (-0.5 * z * z).exp() {
                break z;
            }
        }
    };
    (mean + sd * z).clamp(lo, hi)
}

/// Standard normal restricted to [a, b] with 0 ≤ a.
fn one_sided_tail(a: f64, b: f64, rng: &mut StreamRng) -> f64 {
    if b - a < 1.0 / a.max(1.0) {
        // Narrow window: uniform proposal against the density's maximum at a.
        loop {
            let z = rng.random_range(a..=b);
            if rng.random::<f64>() < (-0.5 * (z * z - a * a)).exp() {
                return z;
            }
        }
    }
    // Exponential proposal with the optimal rate for the left end.
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let z = a - rng.random::<f64>().ln() / rate;
        if z > b {
            continue;
        }
        if rng.random::<f64>() < (-0.5 * (z - rate).powi(2)).exp() {
            return z;
        }
    }
}

// ---------------------------------------------------------------------------
// Gaussian pairs in d dimensions

/// Reference N(μ₀, Σ₀) and target N(μ₁, Σ₁); every π_β is Gaussian.
pub struct GaussianPair {
    dim: usize,
    mu0: DVector<f64>,
    mu1: DVector<f64>,
    prec0: DMatrix<f64>,
    prec1: DMatrix<f64>,
    logdet0: f64,
    logdet1: f64,
    factors: BetaCache<(DVector<f64>, DMatrix<f64>)>,
}

fn precision_and_logdet(cov: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let chol = Cholesky::new(cov.clone()).ok_or_else(|| Error::invalid("covariance is not positive definite"))?;
    let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok((chol.inverse(), logdet))
}

impl GaussianPair {
    pub fn new(mu0: Vec<f64>, cov0: DMatrix<f64>, mu1: Vec<f64>, cov1: DMatrix<f64>) -> Result<Self> {
        let dim = mu0.len();
        ensure(dim > 0 && mu1.len() == dim, || "mean dimensions differ".into())?;
        ensure(cov0.shape() == (dim, dim) && cov1.shape() == (dim, dim), || {
            "covariance dimensions differ".into()
        })?;
        let (prec0, logdet0) = precision_and_logdet(&cov0)?;
        let (prec1, logdet1) = precision_and_logdet(&cov1)?;
        Ok(Self {
            dim,
            mu0: DVector::from_vec(mu0),
            mu1: DVector::from_vec(mu1),
            prec0,
            prec1,
            logdet0,
            logdet1,
            factors: BetaCache::new(),
        })
    }

    /// N(0, I) → N(μ, I).
    pub fn mean_shift(mu: Vec<f64>) -> Result<Self> {
        let d = mu.len();
        Self::new(vec![0.0; d], DMatrix::identity(d, d), mu, DMatrix::identity(d, d))
    }

    /// N(0, I_d) → N(μ, Σ) with unit variances and constant correlation ρ.
    pub fn equicorrelated(d: usize, rho: f64, mu: Vec<f64>) -> Result<Self> {
        ensure((0.0..1.0).contains(&rho), || format!("rho {rho} outside [0, 1)"))?;
        let cov = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho });
        Self::new(vec![0.0; d], DMatrix::identity(d, d), mu, cov)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn log_pdf(&self, x: &[f64], mu: &DVector<f64>, prec: &DMatrix<f64>, logdet: f64) -> f64 {
        let dx = DVector::from_column_slice(x) - mu;
        let q = (prec * &dx).dot(&dx);
        -0.5 * q - 0.5 * logdet - 0.5 * self.dim as f64 * (2.0 * PI).ln()
    }

    /// Mean and lower Cholesky factor L of the covariance of π_β.
    fn path_factor(&self, beta: f64) -> Arc<(DVector<f64>, DMatrix<f64>)> {
        self.factors.get_or_build(beta, || {
            let prec = &self.prec0 * (1.0 - beta) + &self.prec1 * beta;
            let rhs = &self.prec0 * &self.mu0 * (1.0 - beta) + &self.prec1 * &self.mu1 * beta;
            let chol = Cholesky::new(prec).expect("path precision is positive definite");
            let mean = chol.solve(&rhs);
            let cov_chol = Cholesky::new(chol.inverse()).expect("path covariance is positive definite");
            (mean, cov_chol.l())
        })
    }
}

impl TargetModel for GaussianPair {
    type State = Vec<f64>;

    fn log_reference(&self, x: &Vec<f64>) -> f64 {
        self.log_pdf(x, &self.mu0, &self.prec0, self.logdet0)
    }

    fn log_target_unnorm(&self, x: &Vec<f64>) -> f64 {
        self.log_pdf(x, &self.mu1, &self.prec1, self.logdet1)
    }

    fn sample_reference(&self, rng: &mut StreamRng) -> Option<Vec<f64>> {
        Some(self.sample_path(0.0, rng))
    }
}

impl ExactPathSampler for GaussianPair {
    fn sample_path(&self, beta: f64, rng: &mut StreamRng) -> Vec<f64> {
        let f = self.path_factor(beta);
        let z = DVector::from_fn(self.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        (&f.0 + &f.1 * z).as_slice().to_vec()
    }
}

/// Push-forward of a vector model through x ↦ scale·x + shift (coordinate-wise).
pub struct AffinePushforward<M> {
    pub inner: M,
    pub scale: f64,
    pub shift: f64,
}

impl<M> AffinePushforward<M> {
    pub fn new(inner: M, scale: f64, shift: f64) -> Result<Self> {
        ensure(scale != 0.0 && scale.is_finite(), || {
            "affine scale must be non-zero".into()
        })?;
        Ok(Self { inner, scale, shift })
    }

    fn pull(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.shift) / self.scale).collect()
    }

    fn push(&self, x: Vec<f64>) -> Vec<f64> {
        x.into_iter().map(|v| self.scale * v + self.shift).collect()
    }

    fn log_jacobian(&self, d: usize) -> f64 {
        -(d as f64) * self.scale.abs().ln()
    }
}

impl<M: TargetModel<State = Vec<f64>>> TargetModel for AffinePushforward<M> {
    type State = Vec<f64>;

    fn log_reference(&self, y: &Vec<f64>) -> f64 {
        self.inner.log_reference(&self.pull(y)) + self.log_jacobian(y.len())
    }

    fn log_target_unnorm(&self, y: &Vec<f64>) -> f64 {
        self.inner.log_target_unnorm(&self.pull(y)) + self.log_jacobian(y.len())
    }

    fn sample_reference(&self, rng: &mut StreamRng) -> Option<Vec<f64>> {
        self.inner.sample_reference(rng).map(|x| self.push(x))
    }
}

impl<M: ExactPathSampler<State = Vec<f64>>> ExactPathSampler for AffinePushforward<M> {
    fn sample_path(&self, beta: f64, rng: &mut StreamRng) -> Vec<f64> {
        self.push(self.inner.sample_path(beta, rng))
    }
}

/// N(mean, sd²) draw; exposed for examples that need plain Gaussian noise.
pub fn normal(mean: f64, sd: f64, rng: &mut StreamRng) -> f64 {
    Normal::new(mean, sd).expect("valid normal").sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anneal::{energy, RngSeed};

    fn rng(lane: u64) -> StreamRng {
        RngSeed(99).stream(0, lane)
    }

    #[test]
    fn torus_has_32_edges_and_4_neighbours() {
        assert_eq!(torus_edges().len(), 32);
        let mut degree = [0; ISING_SITES];
        for &(a, b) in torus_edges() {
            degree[a] += 1;
            degree[b] += 1;
        }
        assert!(degree.iter().all(|&d| d == 4));
        // Top-left vertex touches top-right and bottom-left.
        assert!(torus_neighbours()[0].contains(&3));
        assert!(torus_neighbours()[0].contains(&12));
    }

    #[test]
    fn ising_energy_matches_enumeration() {
        let m = IsingModel;
        let v = energy(&m, &ALL_PLUS).unwrap().value();
        assert!((v - (-16.0 * LN_2 - 32.0)).abs() < 1e-12);
        let d = ising_exact_distribution(1.0).unwrap();
        // log p(x) = −V(x) − log Z' with Z' = Σ exp(−V).
        let log_zp = (0..ISING_STATES)
            .map(|s| (-energy(&m, &(s as u16)).unwrap().value()).exp())
            .sum::<f64>()
            .ln();
        assert!((d.prob(ALL_PLUS as usize).ln() - (-v - log_zp)).abs() < 1e-10);
    }

    #[test]
    fn ising_distribution_properties() {
        let u = ising_exact_distribution(0.0).unwrap();
        assert!(u.probs.iter().all(|&p| (p - 1.0 / 65536.0).abs() < 1e-18));
        for beta in [0.0, 0.25, 0.5, 1.0] {
            let d = ising_exact_distribution(beta).unwrap();
            assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            for s in (0..ISING_STATES).step_by(97) {
                assert!((d.prob(s) - d.prob(!(s as u16) as usize)).abs() < 1e-15);
            }
        }
        let d = ising_exact_distribution(1.0).unwrap();
        let top = d.probs.iter().cloned().fold(0.0, f64::max);
        let argmax: Vec<usize> = (0..ISING_STATES).filter(|&s| d.prob(s) == top).collect();
        assert_eq!(argmax, vec![ALL_MINUS as usize, ALL_PLUS as usize]);
        assert_eq!(edge_sum(ALL_MINUS), 32);
    }

    #[test]
    fn ising_exact_sampler_reproduces_magnetization_law() {
        let m = IsingModel;
        let beta = 0.4;
        let d = ising_exact_distribution(beta).unwrap();
        let exact_m2: f64 = (0..ISING_STATES)
            .map(|s| {
                let mag: i32 = (0..ISING_SITES).map(|i| spin(s as u16, i)).sum();
                d.prob(s) * (mag * mag) as f64
            })
            .sum();
        let mut g = rng(1);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| {
                let s = m.sample_path(beta, &mut g);
                let mag: i32 = (0..ISING_SITES).map(|i| spin(s, i)).sum();
                (mag * mag) as f64
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - exact_m2).abs() < 3.0 * (var / n as f64).sqrt());
        // Site 0 magnetization is zero by symmetry.
        let s0: f64 = (0..n).map(|_| spin(m.sample_path(beta, &mut g), 0) as f64).sum::<f64>() / n as f64;
        assert!(s0.abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn bimodal_pair_basics() {
        let b = bimodal_pair();
        assert_eq!(b.reference_var, 10001.0);
        for x in [0.3, 50.0, 99.0, 140.0] {
            let v1 = energy(&b, &x).unwrap().value();
            let v2 = energy(&b, &(-x)).unwrap().value();
            assert!((v1 - v2).abs() < 1e-12);
        }
        let mut g = rng(2);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| b.sample_reference(&mut g).unwrap()).collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        assert!((var / 10001.0 - 1.0).abs() < 0.05);
        let pos = xs.iter().filter(|&&x| x > 0.0).count() as f64 / n as f64;
        assert!((pos - 0.5).abs() < 3.0 * 0.5 / (n as f64).sqrt());
    }

    #[test]
    fn bimodal_exact_sampler_at_target() {
        let b = bimodal_pair();
        let mut g = rng(3);
        let n = 50_000;
        let xs: Vec<f64> = (0..n).map(|_| b.sample_path(1.0, &mut g)).collect();
        let pos = xs.iter().filter(|&&x| x > 0.0).count() as f64 / n as f64;
        assert!((pos - 0.5).abs() < 3.0 * 0.5 / (n as f64).sqrt());
        let dev = xs.iter().map(|x| (x.abs() - 100.0).powi(2)).sum::<f64>() / n as f64;
        assert!((dev - 1.0).abs() < 0.05);
    }

    #[test]
    fn truncated_normal_stays_inside_and_has_right_mean() {
        let mut g = rng(4);
        for &(m, s, lo, hi) in &[
            (0.5, 0.01, 0.0, 1.0),
            (3.0, 1.0, -1.0, 0.0),
            (-2.0, 0.5, 0.0, 1.0),
            (0.0, 1.0, -0.1, 0.1),
        ] {
            let n = 40_000;
            let xs: Vec<f64> = (0..n).map(|_| truncated_normal(m, s, lo, hi, &mut g)).collect();
            assert!(xs.iter().all(|&x| (lo..=hi).contains(&x)));
            // Oracle: midpoint quadrature of the truncated density.
            let k = 20_000;
            let (mut z, mut mz) = (0.0, 0.0);
            for i in 0..k {
                let x = lo + (hi - lo) * (i as f64 + 0.5) / k as f64;
                let w = (-0.5 * ((x - m) / s).powi(2)).exp();
                z += w;
                mz += w * x;
            }
            let exact = mz / z;
            let mean = xs.iter().sum::<f64>() / n as f64;
            let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            assert!(
                (mean - exact).abs() < 4.0 * sd / (n as f64).sqrt() + 1e-9,
                "{m} {s} {lo} {hi}"
            );
        }
    }

    #[test]
    fn gaussian_pair_path_matches_completed_square() {
        let p = GaussianPair::mean_shift(vec![2.0]).unwrap();
        let mut g = rng(5);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| p.sample_path(0.5, &mut g)[0]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.03);
    }

    #[test]
    fn affine_pushforward_preserves_energy() {
        let p = GaussianPair::mean_shift(vec![1.0, -0.5]).unwrap();
        let h = AffinePushforward::new(GaussianPair::mean_shift(vec![1.0, -0.5]).unwrap(), 2.0, 3.0).unwrap();
        for x in [vec![0.1, 0.2], vec![-1.0, 2.0]] {
            let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
            let a = energy(&p, &x).unwrap().value();
            let b = energy(&h, &y).unwrap().value();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn thin_shell_validation() {
        assert!(ThinShell::new(0.0).is_err());
        let t = ThinShell::new(10.0).unwrap();
        assert_eq!(t.log_target_unnorm(&[1.5, 0.0]), f64::NEG_INFINITY);
        assert!(DisjointModes.log_reference(&0.0).is_infinite());
    }
}
