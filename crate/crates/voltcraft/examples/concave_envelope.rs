//! With unrestricted volatility the super-replication price is the concave
//! envelope of the payoff at the spot, hedged statically.

use voltcraft::market::{MarketState, Payoff};
use voltcraft::superrep::{superrep_unbounded_vol, Hedge};

fn main() -> voltcraft::Result<()> {
    let market = MarketState::flat(100.0, 0.0)?;
    for (name, payoff) in [
        ("call 100", Payoff::call(100.0)?),
        ("put 100", Payoff::put(100.0)?),
        ("butterfly 90/100/110", Payoff::butterfly(90.0, 100.0, 110.0)?),
        ("capped 100", Payoff::capped(100.0)?),
    ] {
        let r = superrep_unbounded_vol(&market, &payoff)?;
        if let Hedge::Static(h) = &r.hedge {
            println!("{name:22} price {:8.4}  shares {:7.4}  cash {:8.4}", r.price, h.shares, h.cash);
        }
    }
    Ok(())
}
