//! Lookdown particle system driven by the jumps of a CSBP path.
//!
//! At a jump with ratio y every level participates independently with
//! probability y. Participants take the type of the lowest participant;
//! the types they displace, and everything above, shift up to the next
//! free non-participating levels in order. Levels are 0-based.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rand_distr::{Distribution, Exp1};
use statrs::function::gamma::gamma;

use super::timechange::r_constant;
use super::{drift_coefficient, simulate_csbp_streaming, CsbpPath, CsbpSpec, Horizon, PathEnd};
use crate::coalescent::{simulate_coalescent, Partition, Stop};
use crate::error::{domain, Result};
use crate::rates::LambdaMeasure;
use crate::rng::RngStream;
use crate::stats::{chi_square_two_sample, two_proportion, ChiSquareResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookdownEvent {
    pub time: f64,
    pub y: f64,
    /// Participating levels, increasing.
    pub participants: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookdownLog {
    pub n_levels: usize,
    pub initial_types: Vec<f64>,
    /// One entry per jump of the driving path, in time order.
    pub events: Vec<LookdownEvent>,
    pub final_types: Vec<f64>,
}

impl LookdownLog {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("log serializes")
    }

    /// Types at time `s`, replayed forward from the initial types.
    pub fn types_at(&self, s: f64) -> Vec<f64> {
        let mut types = self.initial_types.clone();
        for e in self.events.iter().take_while(|e| e.time <= s) {
            apply_birth(&mut types, &e.participants);
        }
        types
    }
}

/// Level whose pre-event type ends up at `level` after a birth event
/// with the given (increasing, at least two) participants.
pub fn source_level(level: u32, participants: &[u32]) -> u32 {
    let first = participants[0];
    match participants.binary_search(&level) {
        Ok(_) => first,
        Err(below) => {
            // rank among non-participants, then skip over `first`
            let rank = level - below as u32;
            if rank < first { rank } else { rank + 1 }
        }
    }
}

/// Applies one birth event to the types of the first `types.len()` levels.
/// Events with fewer than two participants change nothing.
pub fn apply_birth<T: Clone>(types: &mut [T], participants: &[u32]) {
    if participants.len() < 2 {
        return;
    }
    let old = types.to_vec();
    for (level, slot) in types.iter_mut().enumerate() {
        *slot = old[source_level(level as u32, participants) as usize].clone();
    }
}

pub fn run_lookdown(path: &CsbpPath, n_levels: usize, stream: RngStream) -> LookdownLog {
    let mut rng = stream.rng();
    let initial_types: Vec<f64> = (0..n_levels).map(|_| rng.random::<f64>()).collect();
    let mut types = initial_types.clone();
    let mut events = Vec::with_capacity(path.jumps.len());
    for j in &path.jumps {
        let participants: Vec<u32> = (0..n_levels as u32).filter(|_| rng.random::<f64>() < j.y).collect();
        apply_birth(&mut types, &participants);
        events.push(LookdownEvent { time: j.t, y: j.y, participants });
    }
    LookdownLog { n_levels, initial_types, events, final_types: types }
}

/// Partition of the levels at time `t_hi` by common ancestor level at
/// time `t_lo`.
pub fn ancestral_partition(log: &LookdownLog, t_lo: f64, t_hi: f64) -> Result<Partition> {
    if t_lo > t_hi {
        return domain(format!("lower time {t_lo} exceeds upper time {t_hi}"));
    }
    let mut ancestor: Vec<u32> = (0..log.n_levels as u32).collect();
    let lo = log.events.partition_point(|e| e.time <= t_lo);
    let hi = log.events.partition_point(|e| e.time <= t_hi);
    for e in log.events[lo..hi].iter().rev() {
        if e.participants.len() >= 2 {
            for a in ancestor.iter_mut() {
                *a = source_level(*a, &e.participants);
            }
        }
    }
    Ok(Partition::from_labels(&ancestor))
}

/// Births among the first n levels caused by the jumps below ε that a
/// truncated path leaves out.
///
/// A jump x hits at least two of n levels with probability
/// q(y) ≤ C(n,2) y², y = x/(Z+x), and ∫_0^ε x² ν(dx) is finite, so these
/// births form a Poisson process of finite rate. It is realized by
/// thinning proposals of rate C(n,2) ∫_0^ε (x/Z)² ν(dx), which is
/// proportional to 1/Z and so inverts in closed form while Z decays.
pub struct SmallJumpBirths {
    alpha: f64,
    epsilon: f64,
    n: usize,
    c: f64,
    r_const: f64,
    /// Proposal rate times Z.
    a: f64,
    rng: rand_chacha::ChaCha8Rng,
}

impl SmallJumpBirths {
    pub fn new(alpha: f64, epsilon: f64, n_levels: usize, stream: RngStream) -> Self {
        let pairs = (n_levels * (n_levels - 1) / 2) as f64;
        let c_nu = alpha * (alpha - 1.0) / gamma(2.0 - alpha);
        Self {
            alpha,
            epsilon,
            n: n_levels,
            c: drift_coefficient(alpha, epsilon),
            r_const: r_constant(alpha),
            a: pairs * c_nu * epsilon.powf(2.0 - alpha) / (2.0 - alpha),
            rng: stream.rng(),
        }
    }

    /// Appends the births in [from, to) while Z decays from `z` at `from`,
    /// where R equals `level`. Event times are R levels.
    pub fn fill(&mut self, from: f64, to: f64, z: f64, level: f64, out: &mut Vec<LookdownEvent>) {
        let (alpha, c) = (self.alpha, self.c);
        let pairs = (self.n * (self.n - 1) / 2) as f64;
        let mut u = 0.0;
        loop {
            // ∫_0^h (a/z) e^{c(u+v)} dv = E
            let e: f64 = Exp1.sample(&mut self.rng);
            u += (e * z * c * (-c * u).exp() / self.a).ln_1p() / c;
            if from + u >= to {
                return;
            }
            let zs = z * (-c * u).exp();
            let x = self.epsilon * self.rng.random::<f64>().powf(1.0 / (2.0 - alpha));
            let y = x / (zs + x);
            let weights = hit_weights(self.n, y);
            let q: f64 = weights.iter().sum();
            if self.rng.random::<f64>() * pairs * (x / zs).powi(2) >= q {
                continue;
            }
            let mut pick = self.rng.random::<f64>() * q;
            let mut k = self.n;
            for (i, w) in weights.iter().enumerate() {
                if pick < *w {
                    k = i + 2;
                    break;
                }
                pick -= w;
            }
            let mut participants: Vec<u32> =
                rand::seq::index::sample(&mut self.rng, self.n, k).into_iter().map(|i| i as u32).collect();
            participants.sort_unstable();
            let expo = c * (alpha - 1.0);
            let r = level + self.r_const * z.powf(1.0 - alpha) * (expo * u).exp_m1() / expo;
            out.push(LookdownEvent { time: r, y, participants });
        }
    }
}

/// P(exactly k of n levels participate), k = 2..=n.
fn hit_weights(n: usize, y: f64) -> Vec<f64> {
    let mut binom = 1.0;
    let mut w = Vec::with_capacity(n - 1);
    for k in 1..=n {
        binom = binom * (n - k + 1) as f64 / k as f64;
        if k >= 2 {
            w.push(binom * y.powi(k as i32) * (1.0 - y).powi((n - k) as i32));
        }
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Config {
    pub alpha: f64,
    pub z0: f64,
    pub epsilon: f64,
    /// Upper end of the coalescent-time window.
    pub t: f64,
    /// Window lengths s: levels at R^{−1}(t) are traced back to R^{−1}(t − s).
    pub s_grid: Vec<f64>,
    pub n_levels: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Also replay the births that jumps below ε cause among the levels.
    #[serde(default)]
    pub small_jump_births: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Point {
    pub s: f64,
    /// Histograms of the number of blocks, indexed by count − 1.
    pub lookdown_blocks: Vec<u64>,
    pub direct_blocks: Vec<u64>,
    pub blocks_test: ChiSquareResult,
    pub lookdown_pair: u64,
    pub direct_pair: u64,
    pub pair_p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub config: Theorem1Config,
    pub used: usize,
    pub discarded: usize,
    /// Mean over replicates of C(n,2)·Σ y² over dropped jumps (upper bound).
    pub dropped_pair_budget: f64,
    pub points: Vec<Theorem1Point>,
}

struct Replicate {
    lookdown: Option<Vec<Partition>>,
    direct: Vec<Partition>,
    budget: f64,
}

/// Compares lookdown ancestry under the time change with direct
/// Beta-coalescent simulation of the same number of levels.
pub fn crossvalidate_theorem1(cfg: &Theorem1Config) -> Result<Theorem1Report> {
    let n = cfg.n_levels;
    if n < 2 || cfg.replicates == 0 {
        return domain("need at least two levels and one replicate");
    }
    if cfg.s_grid.iter().any(|&s| !(s >= 0.0 && s <= cfg.t)) {
        return domain("every window length must lie in [0, t]");
    }
    let measure = LambdaMeasure::beta(cfg.alpha)?;
    let spec = CsbpSpec::new(cfg.alpha, cfg.z0, cfg.epsilon, Horizon::Level(cfg.t));
    let pairs = (n * (n - 1) / 2) as f64;
    let reps: Vec<Result<Replicate>> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|i| {
            let base = RngStream::new(cfg.seed, i);
            // same draws as run_lookdown, but only births are kept, stamped with R
            let mut rng = base.substream(2).rng();
            for _ in 0..n {
                rng.random::<f64>();
            }
            let mut births = Vec::new();
            let mut small = cfg.small_jump_births.then(|| SmallJumpBirths::new(cfg.alpha, cfg.epsilon, n, base.substream(100)));
            // state just after the previous jump: time, value, R
            let mut prev = (0.0, cfg.z0, 0.0);
            let summary = simulate_csbp_streaming(&spec, base.substream(1), |j, level| {
                if let Some(sm) = small.as_mut() {
                    sm.fill(prev.0, j.t, prev.1, prev.2, &mut births);
                }
                let participants: Vec<u32> = (0..n as u32).filter(|_| rng.random::<f64>() < j.y).collect();
                if participants.len() >= 2 {
                    births.push(LookdownEvent { time: level, y: j.y, participants });
                }
                prev = (j.t, j.z_pre + j.dz, level);
            })?;
            if let Some(sm) = small.as_mut() {
                sm.fill(prev.0, summary.end_time, prev.1, prev.2, &mut births);
            }
            let lookdown = match summary.end {
                PathEnd::Horizon => {
                    let log = LookdownLog { n_levels: n, initial_types: Vec::new(), events: births, final_types: Vec::new() };
                    let parts = cfg
                        .s_grid
                        .iter()
                        .map(|&s| ancestral_partition(&log, cfg.t - s, cfg.t))
                        .collect::<Result<Vec<_>>>()?;
                    Some(parts)
                }
                PathEnd::Absorbed { .. } => None,
            };
            let direct = cfg
                .s_grid
                .iter()
                .enumerate()
                .map(|(k, &s)| {
                    let tree = simulate_coalescent(n, &measure, base.substream(3 + k as u64), Stop::AtTime(s))?;
                    Ok(tree.partition_at(s))
                })
                .collect::<Result<Vec<_>>>()?;
            let budget = pairs * summary.dropped_y2_bound(cfg.alpha, cfg.epsilon);
            Ok(Replicate { lookdown, direct, budget })
        })
        .collect();
    let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;
    let used = reps.iter().filter(|r| r.lookdown.is_some()).count();
    let points = cfg
        .s_grid
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let mut lb = vec![0u64; n];
            let mut db = vec![0u64; n];
            let (mut lp, mut dp) = (0u64, 0u64);
            for r in &reps {
                if let Some(parts) = &r.lookdown {
                    lb[parts[k].num_blocks() - 1] += 1;
                    lp += parts[k].same_block(0, 1) as u64;
                }
                db[r.direct[k].num_blocks() - 1] += 1;
                dp += r.direct[k].same_block(0, 1) as u64;
            }
            Theorem1Point {
                s,
                blocks_test: chi_square_two_sample(&lb, &db),
                pair_p_value: two_proportion(lp, used as u64, dp, reps.len() as u64),
                lookdown_blocks: lb,
                direct_blocks: db,
                lookdown_pair: lp,
                direct_pair: dp,
            }
        })
        .collect();
    Ok(Theorem1Report {
        config: cfg.clone(),
        used,
        discarded: reps.len() - used,
        dropped_pair_budget: reps.iter().map(|r| r.budget).sum::<f64>() / reps.len() as f64,
        points,
    })
}
