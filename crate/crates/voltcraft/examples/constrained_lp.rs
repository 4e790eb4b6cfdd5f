//! Upper bound for a butterfly over all martingale measures on a finite grid that
//! reprice a strip of listed calls.

use voltcraft::analytic::{bs_call_price, BsParams};
use voltcraft::market::{MarketState, OptionQuote, Payoff, QuoteSurface};
use voltcraft::superrep::{default_support, superrep_calibration_constrained};

fn main() -> voltcraft::Result<()> {
    let market = MarketState::flat(100.0, 0.0)?;
    let support = default_support(100.0);
    let fly = Payoff::butterfly(90.0, 100.0, 110.0)?;
    let listed = [70.0, 80.0, 95.0, 105.0, 120.0, 130.0];
    for n in [0, 2, 4, 6] {
        let quotes = listed[..n]
            .iter()
            .map(|&k| Ok(OptionQuote::call(1.0, k, bs_call_price(&BsParams::new(100.0, k, 1.0, 0.0, 0.2)?))))
            .collect::<voltcraft::Result<Vec<_>>>()?;
        let r = superrep_calibration_constrained(&market, &QuoteSurface::new(market.clone(), quotes)?, &fly, &support)?;
        let report = r.lp_report().expect("lp result");
        println!(
            "{n} calls listed: bound {:.5}, {} atoms charged, gap {:.1e}",
            r.price,
            report.measure.len(),
            r.duality_gap.unwrap_or(0.0)
        );
    }
    Ok(())
}
