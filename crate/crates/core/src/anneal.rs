//! Annealing-path mathematics: energies, schedules, swap acceptance and
//! reproducible random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// The generator every simulation in the crate draws from.
pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Deterministic even/odd alternation of swap rounds.
    Nrpt,
    /// Swap round parity drawn uniformly at every iteration.
    Rpt,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nrpt" | "deo" => Ok(Scheme::Nrpt),
            "rpt" | "seo" => Ok(Scheme::Rpt),
            other => Err(Error::invalid(format!("unknown scheme `{other}`"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Nrpt => "nrpt",
            Scheme::Rpt => "rpt",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    /// Whether the pair (n, n+1) belongs to this swap round.
    pub fn contains(self, n: usize) -> bool {
        (n % 2 == 0) == (self == Parity::Even)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

/// V(x) = log π₀(x) − log γ₁(x): finite or +∞, never NaN or −∞.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Energy(f64);

impl Energy {
    pub const INFINITY: Energy = Energy(f64::INFINITY);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() {
            return Err(Error::Model("energy is NaN".into()));
        }
        if value == f64::NEG_INFINITY {
            return Err(Error::Model(
                "energy is -inf (state outside the reference support)".into(),
            ));
        }
        Ok(Energy(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// 0 = β₀ < β₁ < … < β_N = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AnnealingSchedule {
    betas: Vec<f64>,
}

impl AnnealingSchedule {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        ensure(!betas.is_empty(), || "schedule is empty".into())?;
        ensure(betas[0] == 0.0, || {
            format!("schedule must start at 0, got {}", betas[0])
        })?;
        let last = betas[betas.len() - 1];
        ensure(betas.len() == 1 || last == 1.0, || {
            format!("schedule must end at 1, got {last}")
        })?;
        ensure(betas.windows(2).all(|w| w[0] < w[1]), || {
            "schedule must be strictly increasing".into()
        })?;
        Ok(Self { betas })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Self::new(vec![0.0]);
        }
        let mut betas: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        betas[n] = 1.0;
        Self::new(betas)
    }

    /// Number of swap pairs N (one less than the number of chains).
    pub fn n(&self) -> usize {
        self.betas.len() - 1
    }

    pub fn chains(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn beta(&self, n: usize) -> f64 {
        self.betas[n]
    }
}

impl TryFrom<Vec<f64>> for AnnealingSchedule {
    type Error = Error;
    fn try_from(betas: Vec<f64>) -> Result<Self> {
        Self::new(betas)
    }
}

impl From<AnnealingSchedule> for Vec<f64> {
    fn from(s: AnnealingSchedule) -> Self {
        s.betas
    }
}

/// Master seed from which every (replica, lane) stream is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    const LANE_BITS: u32 = 24;

    /// An independent ChaCha stream for `lane` of `replica`. Lanes are chain
    /// indices, with spare lanes used for communication uniforms.
    pub fn stream(self, replica: u64, lane: u64) -> StreamRng {
        assert!(lane < (1 << Self::LANE_BITS), "lane {lane} out of range");
        assert!(
            replica < (1 << (64 - Self::LANE_BITS)),
            "replica {replica} out of range"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream((replica << Self::LANE_BITS) | lane);
        rng
    }
}

/// A reference/target pair on a common state space.
pub trait TargetModel: Sync {
    type State: Clone + Send + Sync;

    /// Normalized log-density of the reference π₀.
    fn log_reference(&self, x: &Self::State) -> f64;

    /// Unnormalized log-density of the target γ₁.
    fn log_target_unnorm(&self, x: &Self::State) -> f64;

    /// Direct draw from π₀, when the model has one.
    fn sample_reference(&self, _rng: &mut StreamRng) -> Option<Self::State> {
        None
    }
}

pub fn energy<M: TargetModel + ?Sized>(model: &M, x: &M::State) -> Result<Energy> {
    let lr = model.log_reference(x);
    let lt = model.log_target_unnorm(x);
    if lr.is_nan() || lt.is_nan() {
        return Err(Error::Model("log-density is NaN".into()));
    }
    if lr == f64::NEG_INFINITY {
        return Err(Error::Model("state outside the reference support".into()));
    }
    if lt == f64::NEG_INFINITY {
        return Ok(Energy::INFINITY);
    }
    Energy::new(lr - lt)
}

/// log π₀(x) − β V(x), unnormalized.
pub fn log_path_density<M: TargetModel + ?Sized>(model: &M, beta: f64, x: &M::State) -> Result<f64> {
    ensure((0.0..=1.0).contains(&beta), || format!("beta {beta} outside [0, 1]"))?;
    let v = energy(model, x)?;
    let lr = model.log_reference(x);
    if beta == 0.0 {
        return Ok(lr);
    }
    Ok(lr - beta * v.value())
}

pub fn swap_acceptance(beta_lo: f64, beta_hi: f64, v_lo: Energy, v_hi: Energy) -> Result<f64> {
    ensure(beta_hi > beta_lo, || {
        format!("swap needs beta_hi > beta_lo, got {beta_lo} and {beta_hi}")
    })?;
    Ok(accept_prob(beta_hi - beta_lo, v_lo.value(), v_hi.value()))
}

/// exp(min{0, gap·(v_hi − v_lo)}) for gap > 0; equal energies (including
/// both infinite) always swap.
#[inline]
pub(crate) fn accept_prob(gap: f64, v_lo: f64, v_hi: f64) -> f64 {
    if v_lo == v_hi {
        return 1.0;
    }
    let log_ratio = gap * (v_hi - v_lo);
    if log_ratio >= 0.0 {
        1.0
    } else {
        log_ratio.exp()
    }
}
