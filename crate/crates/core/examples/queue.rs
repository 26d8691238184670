//! An infinite-server queue fed at rate A e^{ct}: e^{−ct} Q_t settles at
//! A/(λ + c).

use betacoal::gw::{simulate_queue, QueueStart, ServiceRate};
use betacoal::rng::RngStream;

fn main() -> betacoal::Result<()> {
    let (a, c, lambda, t) = (2.0, 1.0, 3.0, 10.0);
    let reps = 200;
    let mut sum = 0.0;
    for i in 0..reps {
        let q = simulate_queue(a, c, &ServiceRate::Constant(lambda), QueueStart::Empty, t, RngStream::new(9, i))?;
        sum += q.final_length() as f64;
    }
    println!("e^(-ct) E[Q_t] = {:.4}, limit A/(lambda+c) = {:.4}", (-c * t).exp() * sum / reps as f64, a / (lambda + c));

    // a varying service rate is handled by thinning
    let slow = ServiceRate::Varying { rate: std::sync::Arc::new(|s: f64| 1.0 + (s / 3.0).sin().abs()), bound: 2.0 };
    let q = simulate_queue(a, c, &slow, QueueStart::Count(5), 6.0, RngStream::new(9, 1000))?;
    println!("varying rate: {} events, final length {}", q.times.len(), q.final_length());
    Ok(())
}
