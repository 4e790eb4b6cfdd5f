//! Short-dated implied volatility against the harmonic mean of local volatility
//! between spot and strike.

use voltcraft::analytic::implied_volatility;
use voltcraft::calibration::implied_vol_small_time;
use voltcraft::market::{MarketState, OptionQuote, Payoff};
use voltcraft::pde::{solve_backward_pricing, LocalVolSurface, PdeGrid};

fn main() -> voltcraft::Result<()> {
    let market = MarketState::flat(100.0, 0.0)?;
    let xs: Vec<f64> = (0..201).map(|i| 20.0 * 50f64.powf(i as f64 / 200.0)).collect();
    let vol = LocalVolSurface::from_fn(vec![0.0, 1.0], xs, |_, x| 0.2 + 0.1 * ((100.0 - x) / 20.0).tanh())?;
    let maturity = 0.01;
    for k in [92.0, 96.0, 100.0, 104.0, 108.0] {
        let price = solve_backward_pricing(&market, &vol, &Payoff::call(k)?, maturity, &PdeGrid::new(400, 400)?)?.price();
        let iv = implied_volatility(&market, &OptionQuote::call(maturity, k, price))?;
        let approx = implied_vol_small_time(&vol, &market, k)?;
        println!("K={k:5.1}  pde implied {iv:.5}  harmonic mean {approx:.5}");
    }
    Ok(())
}
