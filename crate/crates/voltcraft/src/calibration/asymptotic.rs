use crate::error::{Error, Result};
use crate::market::MarketState;
use crate::numerics::adaptive_simpson;
use crate::pde::LocalVolSurface;

/// Small-time implied volatility: the harmonic mean of `σ(t0, ·)` in log-moneyness
/// between `x0` and `K`.
///
/// At `K = x0` the limit `σ(t0, x0)` is returned.
pub fn implied_vol_small_time(vol: &LocalVolSurface, market: &MarketState, strike: f64) -> Result<f64> {
    if !(strike > 0.0 && strike.is_finite()) {
        return Err(Error::invalid(format!("strike must be positive, got {strike}")));
    }
    let t0 = market.t0;
    let (a, b) = (market.x0.ln(), strike.ln());
    if (b - a).abs() < 1e-12 {
        return Ok(vol.vol(t0, market.x0));
    }
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    // The integrand has kinks at the knots; integrate piecewise between them.
    let mut cuts = vec![lo];
    cuts.extend(vol.prices().iter().map(|x| x.ln()).filter(|y| *y > lo && *y < hi));
    cuts.push(hi);
    let inverse = |y: f64| 1.0 / vol.vol_log(t0, y);
    let integral: f64 = cuts.windows(2).map(|w| adaptive_simpson(&inverse, w[0], w[1], 1e-10)).sum();
    Ok((hi - lo) / integral)
}
