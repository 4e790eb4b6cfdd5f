//! Market objects: state, rate curve, quotes, payoffs and observed price paths.

mod io;
mod path;
mod payoff;
mod quotes;

pub use io::{read_price_path, read_quotes, write_quotes};
pub use path::{historical_volatility, log_returns, realized_quadratic_variation, PricePath};
pub use payoff::{evaluate_payoff, CallDecomposition, Payoff};
pub use quotes::{OptionKind, OptionQuote, QuoteSurface, QuoteWarning};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Piecewise-constant short rate.
///
/// `rates[i]` applies on `[knots[i], knots[i+1])`; the last rate extends to infinity
/// and the first one backwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    knots: Vec<f64>,
    rates: Vec<f64>,
}

impl RateCurve {
    pub fn flat(r: f64) -> Self {
        RateCurve {
            knots: vec![0.0],
            rates: vec![r],
        }
    }

    pub fn piecewise(knots: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if knots.is_empty() || knots.len() != rates.len() {
            return Err(Error::invalid("rate curve needs one rate per knot"));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("rate knots must be strictly increasing"));
        }
        if rates.iter().chain(knots.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("rate curve values must be finite"));
        }
        Ok(RateCurve { knots, rates })
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        let idx = self.knots.partition_point(|&k| k <= t);
        self.rates[idx.saturating_sub(1)]
    }

    /// True when the curve is identically zero.
    pub fn is_zero(&self) -> bool {
        self.rates.iter().all(|&r| r == 0.0)
    }

    /// ∫ r(s) ds over `[t1, t2]`.
    pub fn integral(&self, t1: f64, t2: f64) -> f64 {
        if t2 < t1 {
            return -self.integral(t2, t1);
        }
        let mut total = 0.0;
        let mut start = t1;
        while start < t2 {
            let idx = self.knots.partition_point(|&k| k <= start);
            let end = self.knots.get(idx).copied().unwrap_or(f64::INFINITY).min(t2);
            total += self.rates[idx.saturating_sub(1)] * (end - start);
            start = end;
        }
        total
    }

    /// Discount factor from `t2` back to `t1`.
    pub fn discount(&self, t1: f64, t2: f64) -> f64 {
        (-self.integral(t1, t2)).exp()
    }
}

/// Valuation date, spot and short-rate curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub t0: f64,
    pub x0: f64,
    pub rate: RateCurve,
}

impl MarketState {
    pub fn new(t0: f64, x0: f64, rate: RateCurve) -> Result<Self> {
        if !(x0 > 0.0 && x0.is_finite()) {
            return Err(Error::invalid(format!("spot must be positive, got {x0}")));
        }
        if !(t0 >= 0.0 && t0.is_finite()) {
            return Err(Error::invalid(format!("t0 must be nonnegative, got {t0}")));
        }
        Ok(MarketState { t0, x0, rate })
    }

    /// Market at `t0 = 0` with a flat rate.
    pub fn flat(x0: f64, r: f64) -> Result<Self> {
        if !r.is_finite() {
            return Err(Error::invalid("rate must be finite"));
        }
        Self::new(0.0, x0, RateCurve::flat(r))
    }

    pub fn discount_to(&self, t: f64) -> f64 {
        self.rate.discount(self.t0, t)
    }

    /// Rate at `t0` as a flat proxy; exact when the curve is flat.
    pub fn spot_rate(&self) -> f64 {
        self.rate.rate_at(self.t0)
    }

    /// Average rate over `[t0, t]`, the flat rate reproducing the discount factor.
    pub fn average_rate(&self, t: f64) -> f64 {
        let tau = t - self.t0;
        if tau <= 0.0 {
            self.spot_rate()
        } else {
            self.rate.integral(self.t0, t) / tau
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_rate_integral() {
        let c = RateCurve::piecewise(vec![0.0, 1.0], vec![0.01, 0.03]).unwrap();
        assert!((c.integral(0.0, 2.0) - 0.04).abs() < 1e-15);
        assert!((c.integral(0.5, 1.5) - 0.02).abs() < 1e-15);
        assert_eq!(c.rate_at(1.0), 0.03);
        assert_eq!(c.rate_at(0.999), 0.01);
        assert!((c.discount(0.0, 2.0) - (-0.04f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn market_validation() {
        assert!(MarketState::flat(0.0, 0.0).is_err());
        assert!(MarketState::flat(100.0, f64::NAN).is_err());
        assert!(MarketState::new(-1.0, 100.0, RateCurve::flat(0.0)).is_err());
        let m = MarketState::flat(100.0, 0.05).unwrap();
        assert!((m.average_rate(2.0) - 0.05).abs() < 1e-15);
    }
}
