//! The clock R_t = α(α−1)Γ(α) ∫_0^t Z_s^{1−α} ds along a jump skeleton.
//!
//! Between jumps Z_s^{1−α} = z^{1−α} e^{c(α−1)(s−t_i)}, so every segment
//! integrates, and inverts, in closed form.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::CsbpPath;
use crate::error::{domain, Error, Result};

pub(crate) fn r_constant(alpha: f64) -> f64 {
    alpha * (alpha - 1.0) * gamma(alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeChange {
    alpha: f64,
    c: f64,
    k: f64,
    /// Segment start times, values just after each start, and R there.
    starts: Vec<f64>,
    values: Vec<f64>,
    levels: Vec<f64>,
    end_time: f64,
    end_level: f64,
}

impl TimeChange {
    fn segment_integral(&self, z: f64, h: f64) -> f64 {
        let e = self.c * (self.alpha - 1.0);
        let base = self.k * z.powf(1.0 - self.alpha);
        if e == 0.0 { base * h } else { base * (e * h).exp_m1() / e }
    }

    fn segment_inverse(&self, z: f64, dr: f64) -> f64 {
        let e = self.c * (self.alpha - 1.0);
        let base = self.k * z.powf(1.0 - self.alpha);
        if e == 0.0 { dr / base } else { (dr * e / base).ln_1p() / e }
    }

    pub fn end_time(&self) -> f64 {
        self.end_time
    }

    /// R at the end of the simulated path.
    pub fn end_level(&self) -> f64 {
        self.end_level
    }

    /// Grid of `(s, R_s)` at segment starts and the path end.
    pub fn grid(&self) -> Vec<(f64, f64)> {
        let mut g: Vec<(f64, f64)> = self.starts.iter().copied().zip(self.levels.iter().copied()).collect();
        g.push((self.end_time, self.end_level));
        g
    }

    pub fn r_at(&self, s: f64) -> Result<f64> {
        if !(0.0..=self.end_time).contains(&s) {
            return domain(format!("time {s} outside the path [0, {}]", self.end_time));
        }
        let i = self.starts.partition_point(|&t| t <= s) - 1;
        Ok(self.levels[i] + self.segment_integral(self.values[i], s - self.starts[i]))
    }

    /// R^{−1}(level); levels past the simulated range are rejected.
    pub fn inverse(&self, level: f64) -> Result<f64> {
        // the stopping level and the re-integrated end can differ by rounding
        let slack = 1e-12 * self.end_level.max(1.0);
        if level > self.end_level + slack || level < 0.0 {
            return Err(Error::BeyondLifetime { level, max_level: self.end_level });
        }
        let level = level.min(self.end_level);
        let i = self.levels.partition_point(|&r| r <= level) - 1;
        let s = self.starts[i] + self.segment_inverse(self.values[i], level - self.levels[i]);
        Ok(s.min(self.end_time))
    }
}

pub fn time_change_r(path: &CsbpPath) -> TimeChange {
    let mut tc = TimeChange {
        alpha: path.alpha,
        c: path.c_eps,
        k: r_constant(path.alpha),
        starts: vec![0.0],
        values: vec![path.z0],
        levels: vec![0.0],
        end_time: path.end_time,
        end_level: 0.0,
    };
    for j in &path.jumps {
        let i = tc.starts.len() - 1;
        let r = tc.levels[i] + tc.segment_integral(tc.values[i], j.t - tc.starts[i]);
        tc.starts.push(j.t);
        tc.values.push(j.z_pre + j.dz);
        tc.levels.push(r);
    }
    let i = tc.starts.len() - 1;
    tc.end_level = tc.levels[i] + tc.segment_integral(tc.values[i], path.end_time - tc.starts[i]);
    tc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csbp::{simulate_csbp, CsbpSpec, Horizon};
    use crate::rng::RngStream;

    #[test]
    fn constant_path_is_linear() {
        let p = CsbpPath::fixture(1.5, 1.0, 0.0, &[], 10.0).unwrap();
        let tc = time_change_r(&p);
        assert!((tc.r_at(1.0).unwrap() - 0.664670).abs() < 1e-6);
        assert!((tc.r_at(7.5).unwrap() - 7.5 * r_constant(1.5)).abs() < 1e-12);
    }

    #[test]
    fn one_jump_by_hand() {
        // Z = 1 decaying at rate 2, jump +0.5 at t = 0.4, end at 1
        let (a, c) = (1.5f64, 2.0f64);
        let p = CsbpPath::fixture(a, 1.0, c, &[(0.4, 0.5)], 1.0).unwrap();
        let tc = time_change_r(&p);
        let k = r_constant(a);
        let e = c * (a - 1.0);
        let z1 = (-c * 0.4f64).exp() + 0.5;
        let by_hand = k * ((e * 0.4).exp() - 1.0) / e + k * z1.powf(1.0 - a) * ((e * 0.6).exp() - 1.0) / e;
        assert!((tc.r_at(1.0).unwrap() - by_hand).abs() < 1e-9);
    }

    #[test]
    fn inverse_round_trip() {
        let p = simulate_csbp(&CsbpSpec::new(1.5, 1.0, 0.01, Horizon::Time(2.0)), RngStream::new(4, 0)).unwrap();
        let tc = time_change_r(&p);
        for i in 0..=100 {
            let s = 2.0 * i as f64 / 100.0;
            let r = tc.r_at(s).unwrap();
            assert!((tc.inverse(r).unwrap() - s).abs() < 1e-9, "s = {s}");
        }
        for w in tc.grid().windows(2) {
            assert!(w[1].1 > w[0].1 || w[1].0 == w[0].0);
        }
        assert!(matches!(tc.inverse(tc.end_level() + 1.0), Err(Error::BeyondLifetime { .. })));
    }
}
