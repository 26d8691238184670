//! The lookdown particle system driven by a CSBP path. After the time
//! change R the ancestry of the first levels is a Beta-coalescent.

use betacoal::csbp::{ancestral_partition, apply_birth, run_lookdown, simulate_csbp, CsbpPath, CsbpSpec, Horizon};
use betacoal::rng::RngStream;

fn main() -> betacoal::Result<()> {
    // A single birth on levels 1, 3 and 4 of five (0-based): the lowest
    // participant's type spreads and displaced types shift upward.
    let mut types = vec!['a', 'b', 'c', 'd', 'e'];
    apply_birth(&mut types, &[1, 3, 4]);
    println!("after birth on levels 1,3,4: {types:?}");

    let fixture = CsbpPath::fixture(1.5, 1.0, 0.0, &[(0.2, 1.0), (0.6, 0.5)], 1.0)?;
    println!("fixture: Z(0.5) = {}, Z(1) = {}", fixture.value_at(0.5), fixture.final_value());

    let path = simulate_csbp(&CsbpSpec::new(1.5, 1.0, 0.002, Horizon::Level(1.0)), RngStream::new(4, 0))?;
    let log = run_lookdown(&path, 6, RngStream::new(4, 1));
    let births = log.events.iter().filter(|e| e.participants.len() >= 2).count();
    println!("{} jumps, {births} births among 6 levels", log.events.len());
    let end = path.end_time;
    for back in [0.0, 0.25 * end, 0.5 * end, end] {
        let p = ancestral_partition(&log, end - back, end)?;
        println!("  ancestry over the last {back:.4}: {:?}", p.blocks());
    }
    Ok(())
}
