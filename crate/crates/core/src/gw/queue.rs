//! Infinite-server queue with arrivals at rate A e^{cs}.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use crate::error::{domain, Result};
use crate::rng::RngStream;

/// Per-customer service rate.
#[derive(Clone)]
pub enum ServiceRate {
    Constant(f64),
    /// λ(t) with `0 <= λ(t) <= bound`; service times come from thinning.
    Varying {
        rate: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        bound: f64,
    },
}

impl fmt::Debug for ServiceRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(l) => write!(f, "Constant({l})"),
            Self::Varying { bound, .. } => write!(f, "Varying {{ bound: {bound} }}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QueueStart {
    Empty,
    Count(u64),
    /// Poisson(A/(λ+c)) customers: with constant λ the queue length stays
    /// Poisson with mean A e^{ct}/(λ+c).
    Stationary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueTrajectory {
    pub a: f64,
    pub c: f64,
    pub horizon: f64,
    pub initial: u64,
    /// Event times, each with the queue length just after it.
    pub times: Vec<f64>,
    pub lengths: Vec<u64>,
}

impl QueueTrajectory {
    pub fn length_at(&self, t: f64) -> u64 {
        match self.times.partition_point(|&s| s <= t) {
            0 => self.initial,
            i => self.lengths[i - 1],
        }
    }

    pub fn final_length(&self) -> u64 {
        self.lengths.last().copied().unwrap_or(self.initial)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("t,Q\n0,{}\n", self.initial);
        for (t, q) in self.times.iter().zip(&self.lengths) {
            s.push_str(&format!("{t},{q}\n"));
        }
        s
    }
}

fn departure<R: Rng + ?Sized>(service: &ServiceRate, from: f64, horizon: f64, rng: &mut R) -> Option<f64> {
    match service {
        ServiceRate::Constant(l) if *l > 0.0 => {
            let e: f64 = Exp1.sample(rng);
            let d = from + e / l;
            (d <= horizon).then_some(d)
        }
        ServiceRate::Constant(_) => None,
        ServiceRate::Varying { rate, bound } => {
            if *bound <= 0.0 {
                return None;
            }
            let mut s = from;
            loop {
                let e: f64 = Exp1.sample(rng);
                s += e / bound;
                if s > horizon {
                    return None;
                }
                if rng.random::<f64>() * bound < rate(s) {
                    return Some(s);
                }
            }
        }
    }
}

pub fn simulate_queue(
    a: f64,
    c: f64,
    service: &ServiceRate,
    start: QueueStart,
    horizon: f64,
    stream: RngStream,
) -> Result<QueueTrajectory> {
    if !(a >= 0.0 && c > 0.0 && horizon >= 0.0 && horizon.is_finite()) {
        return domain(format!("need A >= 0, c > 0 and a finite horizon (A={a}, c={c}, t={horizon})"));
    }
    match service {
        ServiceRate::Constant(l) if !(*l >= 0.0) => return domain(format!("service rate must be non-negative, got {l}")),
        ServiceRate::Varying { bound, .. } if !(*bound >= 0.0 && bound.is_finite()) => {
            return domain(format!("service bound must be finite and non-negative, got {bound}"))
        }
        _ => {}
    }
    let mut rng = stream.rng();
    let initial = match (start, service) {
        (QueueStart::Empty, _) => 0,
        (QueueStart::Count(q), _) => q,
        (QueueStart::Stationary, ServiceRate::Constant(l)) => {
            let mean = a / (l + c);
            if mean > 0.0 { Poisson::new(mean).expect("positive mean").sample(&mut rng) as u64 } else { 0 }
        }
        (QueueStart::Stationary, ServiceRate::Varying { .. }) => {
            return domain("the stationary start needs a constant service rate")
        }
    };
    // (time, +1 arrival / -1 departure)
    let mut events: Vec<(f64, i8)> = Vec::new();
    for _ in 0..initial {
        if let Some(d) = departure(service, 0.0, horizon, &mut rng) {
            events.push((d, -1));
        }
    }
    if a > 0.0 {
        let mut s = 0.0f64;
        loop {
            // invert ∫_s^{s'} A e^{cu} du = E
            let e: f64 = Exp1.sample(&mut rng);
            s = ((c * s).exp() + c * e / a).ln() / c;
            if s > horizon {
                break;
            }
            events.push((s, 1));
            if let Some(d) = departure(service, s, horizon, &mut rng) {
                events.push((d, -1));
            }
        }
    }
    events.sort_by(|x, y| x.0.total_cmp(&y.0).then(y.1.cmp(&x.1)));
    let mut q = initial as i64;
    let mut times = Vec::with_capacity(events.len());
    let mut lengths = Vec::with_capacity(events.len());
    for (t, d) in events {
        q += d as i64;
        times.push(t);
        lengths.push(q as u64);
    }
    Ok(QueueTrajectory { a, c, horizon, initial, times, lengths })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_arrivals_only_drain() {
        let q = simulate_queue(0.0, 1.0, &ServiceRate::Constant(1.0), QueueStart::Count(50), 3.0, RngStream::new(1, 0)).unwrap();
        assert_eq!(q.initial, 50);
        assert!(q.lengths.windows(2).all(|w| w[1] < w[0]));
        assert!(q.final_length() <= 50);
    }

    #[test]
    fn unit_jumps() {
        let q = simulate_queue(1.0, 1.0, &ServiceRate::Constant(1.0), QueueStart::Empty, 4.0, RngStream::new(2, 0)).unwrap();
        let mut prev = q.initial as i64;
        for &l in &q.lengths {
            assert_eq!((l as i64 - prev).abs(), 1);
            prev = l as i64;
        }
        assert_eq!(q.length_at(0.0), 0);
    }

    #[test]
    fn varying_matches_constant_when_flat() {
        let flat = ServiceRate::Varying { rate: Arc::new(|_| 2.0), bound: 3.0 };
        let n = 200;
        let mean = |s: &ServiceRate, seed| {
            (0..n)
                .map(|i| simulate_queue(1.0, 1.0, s, QueueStart::Empty, 5.0, RngStream::new(seed, i)).unwrap().final_length() as f64)
                .sum::<f64>()
                / n as f64
        };
        // E[Q_t] = A (e^{ct} − e^{−λt}) / (λ + c)
        let exact = (5f64.exp() - (-10f64).exp()) / 3.0;
        for m in [mean(&flat, 3), mean(&ServiceRate::Constant(2.0), 4)] {
            assert!((m - exact).abs() / exact < 0.02, "{m} vs {exact}");
        }
    }
}
