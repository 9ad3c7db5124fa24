//! Randomized player activation, bounded random delays, the strategy history
//! buffer behind delayed rival views, and the local activation counters that
//! drive inner-step and batch schedules.

use rand::{Rng, RngCore};

use crate::error::{CoreError, Result};
use crate::model::{PlayerId, StrategyProfile};

/// Categorical activation distribution with strictly positive weights.
#[derive(Clone, Debug)]
pub struct ActivationDist {
    probs: Vec<f64>,
}

impl ActivationDist {
    pub fn new(probs: Vec<f64>) -> Result<ActivationDist> {
        if probs.is_empty() || probs.iter().any(|p| !(*p > 0.0)) {
            return Err(CoreError::invalid("activation probabilities must be positive"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CoreError::invalid(format!("activation probabilities sum to {sum}, not 1")));
        }
        Ok(ActivationDist { probs })
    }

    pub fn uniform(n: usize) -> Result<ActivationDist> {
        ActivationDist::new(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, i: PlayerId) -> f64 {
        self.probs[i.0]
    }
}

/// One i.i.d. categorical draw.
pub fn draw_player(dist: &ActivationDist, rng: &mut dyn RngCore) -> PlayerId {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in dist.probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return PlayerId(i);
        }
    }
    PlayerId(dist.probs.len() - 1)
}

/// Law of the per-rival communication delays on `{0, ..., tau}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DelayLaw {
    /// Independent uniform draws on `{0, ..., tau}`.
    UniformIid,
    /// Every rival entry is exactly `tau` stale.
    Constant,
}

#[derive(Clone, Copy, Debug)]
pub struct DelayModel {
    pub tau: u32,
    pub law: DelayLaw,
}

impl DelayModel {
    pub fn uniform(tau: u32) -> DelayModel {
        DelayModel { tau, law: DelayLaw::UniformIid }
    }

    fn sample(&self, rng: &mut dyn RngCore) -> u32 {
        match self.law {
            DelayLaw::UniformIid => {
                if self.tau == 0 {
                    0
                } else {
                    rng.gen_range(0..=self.tau)
                }
            }
            DelayLaw::Constant => self.tau,
        }
    }
}

/// Ring of the last `tau + 1` profiles, indexed by iteration. Lookups before
/// iteration zero return the initial profile, which keeps delayed views
/// well-defined from the first iteration.
#[derive(Clone, Debug)]
pub struct HistoryBuffer {
    cap: usize,
    slots: Vec<Option<(u64, StrategyProfile)>>,
}

impl HistoryBuffer {
    pub fn new(tau: u32) -> HistoryBuffer {
        let cap = tau as usize + 1;
        HistoryBuffer { cap, slots: vec![None; cap] }
    }

    pub fn push(&mut self, k: u64, profile: StrategyProfile) {
        let slot = (k % self.cap as u64) as usize;
        self.slots[slot] = Some((k, profile));
    }

    /// Profile at iteration `k - d`, clamped to the initial profile for
    /// pre-history lookups. Panics if the requested iteration has already
    /// been evicted, which cannot happen for delays within `tau`.
    pub fn lookup(&self, k: u64, d: u32) -> &StrategyProfile {
        let want = k.saturating_sub(d as u64);
        let slot = (want % self.cap as u64) as usize;
        match &self.slots[slot] {
            Some((stamp, p)) if *stamp == want => p,
            _ => panic!("history buffer miss: iteration {want} not retained"),
        }
    }
}

/// A rival view stitched from stale history plus the delays that produced it.
#[derive(Clone, Debug)]
pub struct DelayedView {
    pub profile: StrategyProfile,
    pub delays: Vec<u32>,
}

/// Samples per-rival delays and stitches `(x_1(k-d_1), ..., x_N(k-d_N))`,
/// with the player's own entry always current.
pub fn assemble_view(
    buf: &HistoryBuffer,
    model: &DelayModel,
    i: PlayerId,
    k: u64,
    rng: &mut dyn RngCore,
) -> DelayedView {
    let current = buf.lookup(k, 0);
    let n = current.layout().players();
    let mut profile = current.clone();
    let mut delays = vec![0u32; n];
    for j in 0..n {
        if j == i.0 {
            continue;
        }
        let d = model.sample(rng);
        delays[j] = d;
        if d > 0 {
            let past = buf.lookup(k, d);
            profile.set_block(PlayerId(j), past.block(PlayerId(j)));
        }
    }
    DelayedView { profile, delays }
}

/// Per-player activation counters `Gamma_i(k) = 1 + #{t < k : i_t = i}` and
/// the schedule exponent `delta` they feed.
#[derive(Clone, Debug)]
pub struct LocalCounters {
    counts: Vec<u64>,
    pub delta: f64,
}

impl LocalCounters {
    pub fn new(players: usize, delta: f64) -> Result<LocalCounters> {
        if !(delta > 0.0) {
            return Err(CoreError::invalid("schedule exponent delta must be positive"));
        }
        Ok(LocalCounters { counts: vec![1; players], delta })
    }

    pub fn gamma(&self, i: PlayerId) -> u64 {
        self.counts[i.0]
    }

    /// Must be called after the activated player's update completes, so the
    /// schedule consumed the pre-activation count.
    pub fn bump(&mut self, i: PlayerId) {
        self.counts[i.0] += 1;
    }

    /// `sum_i (Gamma_i - 1)`, which equals the iteration index.
    pub fn total_activations(&self) -> u64 {
        self.counts.iter().map(|c| c - 1).sum()
    }
}

/// Inner-step / batch schedule `max(1, floor(Gamma^(2(1+delta))))`, capped.
///
/// Integer exponents (the common `delta = 1/2` gives `Gamma^3`) are powered
/// exactly so floor never suffers from `powf` round-off.
pub fn inner_step_schedule(counters: &LocalCounters, i: PlayerId, cap: u64) -> u64 {
    let gamma = counters.gamma(i);
    let exponent = 2.0 * (1.0 + counters.delta);
    let rounded = exponent.round();
    let raw = if (exponent - rounded).abs() < 1e-12 {
        exact_int_pow(gamma, rounded as u32, cap)
    } else {
        let v = (gamma as f64).powf(exponent);
        if v >= cap as f64 {
            cap
        } else {
            v.floor() as u64
        }
    };
    raw.clamp(1, cap.max(1))
}

fn exact_int_pow(base: u64, exp: u32, cap: u64) -> u64 {
    let mut acc: u64 = 1;
    for _ in 0..exp {
        acc = match acc.checked_mul(base) {
            Some(v) => v,
            None => return cap,
        };
        if acc >= cap {
            return cap;
        }
    }
    acc
}
