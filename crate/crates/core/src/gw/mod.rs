//! Continuous-time Galton–Watson process with offspring law χ.
//!
//! Individuals live an Exp(1) time and are then replaced by χ ≥ 2
//! children, so the population only grows, at rate e^{t/(α−1)} on average.

mod fenwick;
mod marked;
mod queue;

use rand_distr::{Distribution, Exp1};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use marked::{simulate_marked_gw, MarkedGWStats};
pub use queue::{simulate_queue, QueueStart, QueueTrajectory, ServiceRate};

use crate::error::{check_alpha, domain, Error, Result};
use crate::rates::ChiSampler;
use crate::rng::RngStream;

/// Population cap used when none is given.
pub const DEFAULT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub parent: Option<u32>,
    pub birth: f64,
    pub death: Option<f64>,
}

/// One reproduction: `individual` dies at `time` leaving `offspring` children.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reproduction {
    pub time: f64,
    pub individual: u32,
    pub offspring: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GWTree {
    pub alpha: f64,
    pub z0: usize,
    /// Time up to which the tree is complete.
    pub horizon: f64,
    pub individuals: Vec<Individual>,
    pub events: Vec<Reproduction>,
}

impl GWTree {
    /// ξ_t, right-continuous.
    pub fn population_at(&self, t: f64) -> u64 {
        let upto = self.events.partition_point(|e| e.time <= t);
        self.z0 as u64 + self.events[..upto].iter().map(|e| e.offspring as u64 - 1).sum::<u64>()
    }

    pub fn final_population(&self) -> u64 {
        self.population_at(self.horizon)
    }

    pub fn alive(&self) -> impl Iterator<Item = usize> + '_ {
        self.individuals.iter().enumerate().filter(|(_, i)| i.death.is_none()).map(|(k, _)| k)
    }

    pub fn offspring_counts(&self) -> impl Iterator<Item = u64> + '_ {
        self.events.iter().map(|e| e.offspring as u64)
    }

    /// Step function `t,xi` starting at time 0.
    pub fn to_csv(&self) -> String {
        let mut s = format!("t,xi\n0,{}\n", self.z0);
        let mut xi = self.z0 as u64;
        for e in &self.events {
            xi += e.offspring as u64 - 1;
            s.push_str(&format!("{},{xi}\n", e.time));
        }
        s
    }
}

/// Simulates to `horizon`, stopping early when the population exceeds
/// `cap`. The returned error, if any, is the overflow; the tree is then
/// complete up to its (shortened) horizon.
pub fn simulate_gw_partial(
    alpha: f64,
    z0: usize,
    horizon: f64,
    cap: usize,
    stream: RngStream,
) -> Result<(GWTree, Option<Error>)> {
    check_alpha(alpha)?;
    if z0 == 0 {
        return domain("initial population must be positive");
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return domain(format!("horizon must be finite and non-negative, got {horizon}"));
    }
    let chi = ChiSampler::new(alpha)?;
    let mut rng = stream.rng();
    let mut individuals: Vec<Individual> = (0..z0).map(|_| Individual { parent: None, birth: 0.0, death: None }).collect();
    let mut alive: Vec<u32> = (0..z0 as u32).collect();
    let mut events = Vec::new();
    let mut t = 0.0;
    loop {
        let e: f64 = Exp1.sample(&mut rng);
        let next = t + e / alive.len() as f64;
        if next > horizon {
            break;
        }
        t = next;
        let slot = rng.random_range(0..alive.len());
        let who = alive.swap_remove(slot);
        let k = chi.sample(&mut rng);
        if alive.len() as u64 + k > cap as u64 {
            alive.push(who);
            let tree = GWTree { alpha, z0, horizon: t, individuals, events };
            return Ok((tree, Some(Error::PopulationCap { cap, time: t })));
        }
        individuals[who as usize].death = Some(t);
        for _ in 0..k {
            alive.push(individuals.len() as u32);
            individuals.push(Individual { parent: Some(who), birth: t, death: None });
        }
        events.push(Reproduction { time: t, individual: who, offspring: k as u32 });
    }
    Ok((GWTree { alpha, z0, horizon, individuals, events }, None))
}

pub fn simulate_gw(alpha: f64, z0: usize, horizon: f64, cap: usize, stream: RngStream) -> Result<GWTree> {
    match simulate_gw_partial(alpha, z0, horizon, cap, stream)? {
        (tree, None) => Ok(tree),
        (_, Some(err)) => Err(err),
    }
}

/// e^{−t/(α−1)} ξ_t at the tree's horizon.
pub fn kesten_stigum_estimate(tree: &GWTree, alpha: f64) -> f64 {
    kesten_stigum_at(tree, alpha, tree.horizon)
}

/// The same normalisation at an earlier time on the same trajectory.
pub fn kesten_stigum_at(tree: &GWTree, alpha: f64, t: f64) -> f64 {
    (-t / (alpha - 1.0)).exp() * tree.population_at(t) as f64
}

/// Population of a GW tree from one individual, killed at an independent
/// Exp(c) time, c = (2 − α)/(α − 1), censored at `censor`.
///
/// The law has a tail of order k^{α−2}, so uncensored draws can need an
/// astronomically long run. Since the population never decreases, the run
/// stops once it reaches `censor` and reports `censor`; the law of
/// min(ξ_τ, censor) is exact.
pub fn simulate_xi_tau<R: Rng + ?Sized>(chi: &ChiSampler, censor: u64, rng: &mut R) -> u64 {
    let alpha = chi.alpha();
    let c = (2.0 - alpha) / (alpha - 1.0);
    let mut j: u64 = 1;
    loop {
        if j >= censor {
            return censor;
        }
        // next event is the kill with probability c / (j + c)
        if rng.random::<f64>() * (j as f64 + c) < c {
            return j;
        }
        j = j.saturating_add(chi.sample(rng) - 1);
    }
}
