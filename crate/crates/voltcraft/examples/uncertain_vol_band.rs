//! Super-replication under a volatility band: a call needs only the upper bound,
//! a butterfly switches between the bounds.

use voltcraft::analytic::{bs_call_price, BsParams};
use voltcraft::market::{MarketState, Payoff};
use voltcraft::pde::{solve_backward_pricing, LocalVolSurface, PdeGrid, VolBand};
use voltcraft::superrep::{superrep_band, Hedge};

fn main() -> voltcraft::Result<()> {
    let market = MarketState::flat(100.0, 0.0)?;
    let band = VolBand::constant(0.1, 0.3)?;
    let grid = PdeGrid::new(200, 400)?;

    let call = superrep_band(&market, &band, &Payoff::call(100.0)?, 1.0, &grid)?;
    let upper = bs_call_price(&BsParams::new(100.0, 100.0, 1.0, 0.0, 0.3)?);
    println!("call: band price {:.5}, price at sigma_max {upper:.5}", call.price);

    let fly = Payoff::butterfly(90.0, 100.0, 110.0)?;
    let r = superrep_band(&market, &band, &fly, 1.0, &grid)?;
    for s in [0.1, 0.3] {
        let p = solve_backward_pricing(&market, &LocalVolSurface::flat(s)?, &fly, 1.0, &grid)?.price();
        println!("butterfly at constant vol {s}: {p:.5}");
    }
    if let Hedge::Dynamic { delta } = r.hedge {
        println!("butterfly band price {:.5}, initial delta {delta:.5}", r.price);
    }
    Ok(())
}
