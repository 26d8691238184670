//! ε-truncated α-stable continuous-state branching process.
//!
//! Jumps of size at least ε arrive at rate Z·ν_ε with Pareto sizes
//! ε·U^{−1/α}; between jumps Z decays as e^{−c_ε s}, which compensates
//! exactly the retained jumps. Smaller jumps are dropped.

mod lookdown;
mod timechange;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

pub use lookdown::{
    SmallJumpBirths,
    ancestral_partition, apply_birth, crossvalidate_theorem1, run_lookdown, source_level, LookdownEvent, LookdownLog,
    Theorem1Config, Theorem1Point, Theorem1Report,
};
pub use timechange::{time_change_r, TimeChange};

use crate::error::{check_alpha, domain, Result};
use crate::rates::csbp_laplace_u;
use crate::rng::RngStream;

/// ν([ε, ∞)) for the stable Lévy measure.
pub fn jump_rate(alpha: f64, epsilon: f64) -> f64 {
    (alpha - 1.0) * epsilon.powf(-alpha) / gamma(2.0 - alpha)
}

/// ∫_ε^∞ x ν(dx), the compensating drift coefficient.
pub fn drift_coefficient(alpha: f64, epsilon: f64) -> f64 {
    alpha * epsilon.powf(1.0 - alpha) / gamma(2.0 - alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub t: f64,
    pub z_pre: f64,
    pub dz: f64,
    /// ΔZ over the post-jump value, so always in (0, 1).
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Horizon {
    /// Real time.
    Time(f64),
    /// Level of the time change R.
    Level(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PathEnd {
    Horizon,
    /// Z fell below the absorption level at this time and value.
    Absorbed { time: f64, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsbpSpec {
    pub alpha: f64,
    pub z0: f64,
    pub epsilon: f64,
    pub horizon: Horizon,
    /// Stop once Z drops below this level. Past that point the exact
    /// stable semigroup (see [`CsbpPath::laplace_at`]) takes over.
    pub absorb_below: Option<f64>,
}

impl CsbpSpec {
    pub fn new(alpha: f64, z0: f64, epsilon: f64, horizon: Horizon) -> Self {
        Self { alpha, z0, epsilon, horizon, absorb_below: None }
    }

    pub fn absorbing(mut self, level: f64) -> Self {
        self.absorb_below = Some(level);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsbpPath {
    pub alpha: f64,
    pub z0: f64,
    pub epsilon: f64,
    pub nu_eps: f64,
    pub c_eps: f64,
    pub jumps: Vec<Jump>,
    /// Time up to which the path is simulated.
    pub end_time: f64,
    pub end: PathEnd,
}

impl CsbpPath {
    /// A hand-built path: jumps `(t, dz)` on top of drift `c`.
    pub fn fixture(alpha: f64, z0: f64, c: f64, jumps: &[(f64, f64)], end_time: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let mut z = z0;
        let mut last = 0.0;
        let mut out = Vec::with_capacity(jumps.len());
        for &(t, dz) in jumps {
            if t < last || t > end_time || dz <= 0.0 {
                return domain("fixture jumps must be positive, ordered and inside the path");
            }
            let pre = z * (-c * (t - last)).exp();
            out.push(Jump { t, z_pre: pre, dz, y: dz / (pre + dz) });
            z = pre + dz;
            last = t;
        }
        Ok(Self { alpha, z0, epsilon: 0.0, nu_eps: 0.0, c_eps: c, jumps: out, end_time, end: PathEnd::Horizon })
    }

    /// Z_s (right-continuous), for 0 ≤ s ≤ end_time.
    pub fn value_at(&self, s: f64) -> f64 {
        let i = self.jumps.partition_point(|j| j.t <= s);
        let (t0, z) = match i {
            0 => (0.0, self.z0),
            _ => {
                let j = &self.jumps[i - 1];
                (j.t, j.z_pre + j.dz)
            }
        };
        z * (-self.c_eps * (s - t0)).exp()
    }

    pub fn final_value(&self) -> f64 {
        self.value_at(self.end_time)
    }

    /// E[e^{−λ Z_t}] given the path: the path value itself while it is
    /// simulated, the exact stable semigroup after absorption.
    pub fn laplace_at(&self, t: f64, lambda: f64) -> f64 {
        match self.end {
            PathEnd::Absorbed { time, value } if t >= time => {
                (-value * csbp_laplace_u(t - time, lambda, self.alpha).expect("valid arguments")).exp()
            }
            _ => (-lambda * self.value_at(t.min(self.end_time))).exp(),
        }
    }

    /// Extinction time: after absorption at level z, the remaining time
    /// to extinction of the stable CSBP has
    /// P(τ ≤ s) = exp(−z ((α−1)s)^{−1/(α−1)}). `None` while unabsorbed.
    pub fn sample_extinction_time<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        match self.end {
            PathEnd::Absorbed { time, value } => {
                let e: f64 = Exp1.sample(rng);
                Some(time + (value / e).powf(self.alpha - 1.0) / (self.alpha - 1.0))
            }
            PathEnd::Horizon => None,
        }
    }

    /// Expected Σ y² of the dropped jumps up to `until`, using
    /// (x/(Z+x))² ≤ (x/Z)². Times C(n,2), it bounds the expected number of
    /// pair coalescences among n levels that the truncation misses.
    pub fn dropped_y2_bound(&self, until: f64) -> f64 {
        let a = self.alpha;
        let per_inverse_z = a * (a - 1.0) * self.epsilon.powf(2.0 - a) / ((2.0 - a) * gamma(2.0 - a));
        let until = until.min(self.end_time);
        let mut total = 0.0;
        let mut start = 0.0;
        let mut z = self.z0;
        let seg = |z: f64, h: f64| {
            if self.c_eps == 0.0 { h / z } else { ((self.c_eps * h).exp() - 1.0) / (self.c_eps * z) }
        };
        for j in &self.jumps {
            if j.t > until {
                break;
            }
            total += seg(z, j.t - start);
            start = j.t;
            z = j.z_pre + j.dz;
        }
        total += seg(z, until - start);
        total * per_inverse_z
    }

    /// Rows `t,Z_pre,dZ,y`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,Z_pre,dZ,y\n");
        for j in &self.jumps {
            s.push_str(&format!("{},{},{},{}\n", j.t, j.z_pre, j.dz, j.y));
        }
        s
    }
}

/// What remains of a path simulated without storing its jumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub nu_eps: f64,
    pub c_eps: f64,
    pub end_time: f64,
    pub end: PathEnd,
    pub jumps: u64,
    /// R at the end of the path.
    pub end_level: f64,
    /// ∫ Z_s^{−1} ds over the path.
    pub inverse_z_integral: f64,
}

impl PathSummary {
    /// See [`CsbpPath::dropped_y2_bound`].
    pub fn dropped_y2_bound(&self, alpha: f64, epsilon: f64) -> f64 {
        alpha * (alpha - 1.0) * epsilon.powf(2.0 - alpha) / ((2.0 - alpha) * gamma(2.0 - alpha)) * self.inverse_z_integral
    }
}

pub fn simulate_csbp(spec: &CsbpSpec, stream: RngStream) -> Result<CsbpPath> {
    let mut jumps = Vec::new();
    let sum = simulate_csbp_streaming(spec, stream, |j, _| jumps.push(*j))?;
    Ok(CsbpPath {
        alpha: spec.alpha,
        z0: spec.z0,
        epsilon: spec.epsilon,
        nu_eps: sum.nu_eps,
        c_eps: sum.c_eps,
        jumps,
        end_time: sum.end_time,
        end: sum.end,
    })
}

/// Same path as [`simulate_csbp`] for the same stream, handing each jump
/// and the level of R at that jump to `on_jump` instead of storing it.
pub fn simulate_csbp_streaming<F: FnMut(&Jump, f64)>(spec: &CsbpSpec, stream: RngStream, mut on_jump: F) -> Result<PathSummary> {
    let CsbpSpec { alpha, z0, epsilon, horizon, absorb_below } = *spec;
    check_alpha(alpha)?;
    if !(z0 > 0.0 && z0.is_finite()) {
        return domain(format!("initial mass must be positive, got {z0}"));
    }
    if !(epsilon > 0.0 && epsilon < z0) {
        return domain(format!("truncation level must lie in (0, z0), got {epsilon}"));
    }
    match horizon {
        Horizon::Time(t) | Horizon::Level(t) if !(t >= 0.0 && t.is_finite()) => {
            return domain(format!("horizon must be finite and non-negative, got {t}"))
        }
        _ => {}
    }
    let nu = jump_rate(alpha, epsilon);
    let c = drift_coefficient(alpha, epsilon);
    let r_const = timechange::r_constant(alpha);
    let expo = c * (alpha - 1.0);
    let mut rng = stream.rng();
    let (mut s, mut z, mut r, mut inv_z) = (0.0f64, z0, 0.0f64, 0.0f64);
    let mut count = 0u64;
    let advance = |z: &mut f64, r: &mut f64, inv_z: &mut f64, h: f64| {
        *r += r_const * z.powf(1.0 - alpha) * (expo * h).exp_m1() / expo;
        *inv_z += (c * h).exp_m1() / (c * *z);
        *z *= (-c * h).exp();
    };
    let end = loop {
        // candidate stop times measured from s
        let e: f64 = Exp1.sample(&mut rng);
        let to_jump = if c * e < z * nu { -(1.0 - c * e / (z * nu)).ln() / c } else { f64::INFINITY };
        let to_absorb = match absorb_below {
            Some(d) if z <= d => 0.0,
            Some(d) => (z / d).ln() / c,
            None => f64::INFINITY,
        };
        let to_horizon = match horizon {
            Horizon::Time(t) => t - s,
            Horizon::Level(level) => {
                // solve r + K z^{1−α}(e^{c(α−1)h} − 1)/(c(α−1)) = level
                let need = (level - r) * expo / (r_const * z.powf(1.0 - alpha));
                need.ln_1p() / expo
            }
        };
        if to_horizon <= to_jump && to_horizon <= to_absorb {
            advance(&mut z, &mut r, &mut inv_z, to_horizon);
            s += to_horizon;
            break PathEnd::Horizon;
        }
        let step = to_jump.min(to_absorb);
        advance(&mut z, &mut r, &mut inv_z, step);
        s += step;
        if step == to_absorb {
            break PathEnd::Absorbed { time: s, value: z };
        }
        let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
        let dz = epsilon * u.powf(-1.0 / alpha);
        on_jump(&Jump { t: s, z_pre: z, dz, y: dz / (z + dz) }, r);
        count += 1;
        z += dz;
    };
    Ok(PathSummary { nu_eps: nu, c_eps: c, end_time: s, end, jumps: count, end_level: r, inverse_z_integral: inv_z })
}
