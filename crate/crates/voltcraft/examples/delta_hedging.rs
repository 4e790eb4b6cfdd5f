//! Discrete Black-Scholes delta hedging: the hedge error shrinks like the square
//! root of the rebalancing interval.

use voltcraft::market::{MarketState, Payoff};
use voltcraft::mc::{simulate_delta_hedge, HedgeSpec};

fn main() -> voltcraft::Result<()> {
    let market = MarketState::flat(100.0, 0.02)?;
    let call = Payoff::call(100.0)?;
    for m in [4, 16, 64, 256] {
        let mut spec = HedgeSpec::new(0.2, 1.0, m, 5000, 9);
        spec.drift = Some(0.08);
        let e = simulate_delta_hedge(&market, &call, &spec)?;
        println!("{m:4} rebalances: mean {:+.4} ± {:.4}  std {:.4}", e.mean, e.mean_se, e.std);
    }
    Ok(())
}
