//! Second-price clearing against log-normal competition.
//!
//! Run with `cargo run --example second_price_exchange`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bidpace::exchange_sim::{clear_auction, run_auction, CompetitorModel};
use bidpace::Money;

fn main() {
    let competitor = CompetitorModel::constant(1, Money::from_micros(1_000), 0.45);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    println!("{:>8} {:>9} {:>9} {:>10}", "bid", "model", "observed", "avg paid");
    for micros in [500u64, 800, 1_000, 1_500, 2_000, 4_000] {
        let bid = Money::from_micros(micros);
        let (mut wins, mut paid) = (0u64, 0u64);
        let n = 20_000;
        for _ in 0..n {
            let out = run_auction(bid, &competitor, 0, &mut rng);
            if out.won {
                wins += 1;
                paid += out.clearing_price.micros();
            }
        }
        println!(
            "{:>8} {:>9.4} {:>9.4} {:>10.1}",
            bid.to_string(),
            competitor.win_probability(bid, 0),
            wins as f64 / n as f64,
            paid as f64 / wins.max(1) as f64
        );
    }
    let tie = clear_auction(Money::from_micros(1_000), Money::from_micros(1_000), Money::ZERO);
    let floor = clear_auction(Money::from_micros(900), Money::from_micros(100), Money::from_micros(500));
    println!("tie: {tie:?}\nfloor: {floor:?}");
}
