//! Closed-form Black-Scholes prices, delta and implied volatility.

use crate::error::{Error, Result};
use crate::market::{MarketState, OptionKind, OptionQuote, Payoff};
use crate::numerics::{norm_cdf, norm_pdf};

/// Inputs of the constant-coefficient Black-Scholes formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsParams {
    pub spot: f64,
    pub strike: f64,
    /// Time to maturity in years.
    pub tau: f64,
    pub rate: f64,
    pub vol: f64,
}

impl BsParams {
    pub fn new(spot: f64, strike: f64, tau: f64, rate: f64, vol: f64) -> Result<Self> {
        let p = BsParams {
            spot,
            strike,
            tau,
            rate,
            vol,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spot > 0.0 && self.spot.is_finite()) {
            return Err(Error::invalid(format!("spot must be positive, got {}", self.spot)));
        }
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(Error::invalid(format!("strike must be positive, got {}", self.strike)));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(format!("time to maturity must be nonnegative, got {}", self.tau)));
        }
        if !(self.vol >= 0.0 && self.vol.is_finite()) {
            return Err(Error::invalid(format!("volatility must be nonnegative, got {}", self.vol)));
        }
        if !self.rate.is_finite() {
            return Err(Error::invalid("rate must be finite"));
        }
        Ok(())
    }

    pub fn with_vol(self, vol: f64) -> Self {
        BsParams { vol, ..self }
    }

    pub fn with_spot(self, spot: f64) -> Self {
        BsParams { spot, ..self }
    }

    pub fn with_strike(self, strike: f64) -> Self {
        BsParams { strike, ..self }
    }

    fn discounted_strike(&self) -> f64 {
        self.strike * (-self.rate * self.tau).exp()
    }

    /// `(d0, d1)`; `d0` is the usual `d2`.
    fn d0_d1(&self) -> (f64, f64) {
        let sd = self.vol * self.tau.sqrt();
        let d0 = (self.spot / self.discounted_strike()).ln() / sd - 0.5 * sd;
        (d0, d0 + sd)
    }
}

pub fn bs_call_price(p: &BsParams) -> f64 {
    let sd = p.vol * p.tau.sqrt();
    let dk = p.discounted_strike();
    if sd == 0.0 {
        return (p.spot - dk).max(0.0);
    }
    let (d0, d1) = p.d0_d1();
    p.spot * norm_cdf(d1) - dk * norm_cdf(d0)
}

/// Put price through put-call parity.
pub fn bs_put_price(p: &BsParams) -> f64 {
    bs_call_price(p) - p.spot + p.discounted_strike()
}

/// `∂C/∂x = N(d1)`; a 0/1 step at the forward-moneyness boundary when `σ√θ = 0`.
pub fn bs_delta(p: &BsParams) -> f64 {
    let sd = p.vol * p.tau.sqrt();
    if sd == 0.0 {
        return if p.spot > p.discounted_strike() { 1.0 } else { 0.0 };
    }
    norm_cdf(p.d0_d1().1)
}

/// `∂C/∂σ`.
pub fn bs_vega(p: &BsParams) -> f64 {
    let sd = p.vol * p.tau.sqrt();
    if sd == 0.0 || p.tau == 0.0 {
        return 0.0;
    }
    p.spot * norm_pdf(p.d0_d1().1) * p.tau.sqrt()
}

/// Price of a piecewise-linear payoff as a static portfolio of cash, shares and calls.
pub fn bs_payoff_price(payoff: &Payoff, p: &BsParams) -> f64 {
    let d = payoff.call_decomposition();
    let df = (-p.rate * p.tau).exp();
    d.cash * df
        + d.shares * p.spot
        + d.calls
            .iter()
            .map(|&(k, w)| if k == 0.0 { w * p.spot } else { w * bs_call_price(&p.with_strike(k)) })
            .sum::<f64>()
}

pub fn bs_payoff_delta(payoff: &Payoff, p: &BsParams) -> f64 {
    let d = payoff.call_decomposition();
    d.shares
        + d.calls
            .iter()
            .map(|&(k, w)| if k == 0.0 { w } else { w * bs_delta(&p.with_strike(k)) })
            .sum::<f64>()
}

const VOL_LO: f64 = 1e-6;
const VOL_HI: f64 = 5.0;
const MAX_ITER: usize = 100;

/// Constant volatility reproducing the quoted price.
///
/// Safeguarded Newton on vega, falling back to bisection on `[1e-6, 5]`.
pub fn implied_volatility(market: &MarketState, quote: &OptionQuote) -> Result<f64> {
    let tau = quote.maturity - market.t0;
    if !(tau > 0.0) {
        return Err(Error::invalid("quote maturity must be after t0"));
    }
    let rate = market.average_rate(quote.maturity);
    let base = BsParams::new(market.x0, quote.strike, tau, rate, 0.0)?;
    let target = quote.call_equivalent(market);
    let lower = (market.x0 - base.discounted_strike()).max(0.0);
    let upper = market.x0;
    if !(target > lower && target < upper) {
        let kind = match quote.kind {
            OptionKind::Call => "call",
            OptionKind::Put => "put",
        };
        return Err(Error::NoSolution(format!(
            "{kind} price {} outside the open no-arbitrage interval",
            quote.price
        )));
    }

    let tol = 1e-12_f64.max(8.0 * f64::EPSILON * market.x0);
    let (mut lo, mut hi) = (VOL_LO, VOL_HI);
    // Start from the Brenner-Subrahmanyam guess, clamped into the bracket.
    let mut vol = ((2.0 * std::f64::consts::PI / tau).sqrt() * (target - lower) / market.x0).clamp(0.05, 1.0);
    let mut last_err = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let p = base.with_vol(vol);
        let err = bs_call_price(&p) - target;
        last_err = err;
        if err.abs() <= tol {
            return Ok(vol);
        }
        if err > 0.0 {
            hi = vol;
        } else {
            lo = vol;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let vega = bs_vega(&p);
        let newton = vol - err / vega;
        vol = if vega > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    if last_err.abs() <= 1e-10 {
        return Ok(vol);
    }
    Err(Error::Numeric {
        message: format!("implied volatility did not converge (residual {last_err:e})"),
        bracket: Some((lo, hi)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn atm() -> BsParams {
        BsParams::new(100.0, 100.0, 1.0, 0.0, 0.2).unwrap()
    }

    /// Gauss-Legendre quadrature of the call payoff against the log-normal density.
    fn call_by_quadrature(p: &BsParams) -> f64 {
        // Integrate over z ∈ [z*, z* + 12], X_T = x exp((r - σ²/2)τ + σ√τ z).
        let sd = p.vol * p.tau.sqrt();
        let drift = (p.rate - 0.5 * p.vol * p.vol) * p.tau;
        let z_star = ((p.strike / p.spot).ln() - drift) / sd;
        let (nodes, weights) = gauss_legendre_20();
        let panels = 200;
        let width = 12.0 / panels as f64;
        let mut total = 0.0;
        for k in 0..panels {
            let a = z_star + k as f64 * width;
            for (x, w) in nodes.iter().zip(&weights) {
                let z = a + 0.5 * width * (x + 1.0);
                let xt = p.spot * (drift + sd * z).exp();
                total += 0.5 * width * w * (xt - p.strike) * norm_pdf(z);
            }
        }
        total * (-p.rate * p.tau).exp()
    }

    fn gauss_legendre_20() -> (Vec<f64>, Vec<f64>) {
        // Newton iteration on Legendre polynomials.
        let n = 20;
        let mut xs = vec![0.0; n];
        let mut ws = vec![0.0; n];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = pk;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    let (mut q0, mut q1) = (1.0, x);
                    for k in 2..=n {
                        let qk = ((2 * k - 1) as f64 * x * q1 - (k - 1) as f64 * q0) / k as f64;
                        q0 = q1;
                        q1 = qk;
                    }
                    let dq = n as f64 * (x * q1 - q0) / (x * x - 1.0);
                    ws[i] = 2.0 / ((1.0 - x * x) * dq * dq);
                    break;
                }
            }
            xs[i] = x;
        }
        (xs, ws)
    }

    #[test]
    fn deterministic_limit() {
        let p = BsParams::new(120.0, 100.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(bs_call_price(&p), 20.0);
        let p = BsParams::new(120.0, 100.0, 0.0, 0.05, 0.3).unwrap();
        assert_eq!(bs_call_price(&p), 20.0);
    }

    #[test]
    fn zero_strike_is_stock() {
        for vol in [0.05, 0.2, 1.0] {
            let p = BsParams::new(100.0, 1e-12, 1.0, 0.0, vol).unwrap();
            assert!((bs_call_price(&p) - 100.0).abs() < 1e-10);
        }
    }

    #[test]
    fn atm_price_matches_quadrature() {
        let q = call_by_quadrature(&atm());
        assert!((q - 7.965_567_455_405_796).abs() < 1e-10, "quadrature {q}");
        assert!((bs_call_price(&atm()) - q).abs() < 1e-10);
        let p = BsParams::new(90.0, 110.0, 2.5, 0.03, 0.35).unwrap();
        assert!((bs_call_price(&p) - call_by_quadrature(&p)).abs() < 1e-10);
    }

    #[test]
    fn delta_examples() {
        let itm = BsParams::new(1000.0, 100.0, 1.0, 0.0, 0.2).unwrap();
        assert!((bs_delta(&itm) - 1.0).abs() < 1e-6);
        let otm = BsParams::new(10.0, 100.0, 1.0, 0.0, 0.2).unwrap();
        assert!(bs_delta(&otm) < 1e-6);
        let h = 1e-4;
        let p = atm();
        let fd = (bs_call_price(&p.with_spot(100.0 + h)) - bs_call_price(&p.with_spot(100.0 - h))) / (2.0 * h);
        assert!((fd - 0.539_827_837_277_029).abs() < 1e-8);
        assert!((bs_delta(&p) - fd).abs() < 1e-8);
    }

    #[test]
    fn delta_step_when_no_diffusion() {
        let p = BsParams::new(100.0, 90.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(bs_delta(&p), 1.0);
        assert_eq!(bs_delta(&p.with_strike(110.0)), 0.0);
    }

    #[test]
    fn implied_vol_examples() {
        let m = MarketState::flat(100.0, 0.0).unwrap();
        let price = bs_call_price(&atm());
        let v = implied_volatility(&m, &OptionQuote::call(1.0, 100.0, price)).unwrap();
        assert!((v - 0.2).abs() < 1e-8);
        let p = BsParams::new(100.0, 130.0, 1.0, 0.0, 0.55).unwrap();
        let v = implied_volatility(&m, &OptionQuote::call(1.0, 130.0, bs_call_price(&p))).unwrap();
        assert!((v - 0.55).abs() < 1e-8);
        let err = implied_volatility(&m, &OptionQuote::call(1.0, 90.0, 10.0)).unwrap_err();
        assert!(matches!(err, Error::NoSolution(_)));
    }

    #[test]
    fn implied_vol_from_put() {
        let m = MarketState::flat(100.0, 0.03).unwrap();
        let p = BsParams::new(100.0, 90.0, 0.5, 0.03, 0.31).unwrap();
        let v = implied_volatility(&m, &OptionQuote::put(0.5, 90.0, bs_put_price(&p))).unwrap();
        assert!((v - 0.31).abs() < 1e-8);
    }

    #[test]
    fn payoff_price_of_butterfly() {
        let p = atm();
        let b = Payoff::butterfly(90.0, 100.0, 110.0).unwrap();
        let direct = bs_call_price(&p.with_strike(90.0)) - 2.0 * bs_call_price(&p) + bs_call_price(&p.with_strike(110.0));
        assert!((bs_payoff_price(&b, &p) - direct).abs() < 1e-12);
        let put = Payoff::put(100.0).unwrap();
        assert!((bs_payoff_price(&put, &p) - bs_put_price(&p)).abs() < 1e-12);
    }

    fn params() -> impl Strategy<Value = BsParams> {
        (10.0f64..500.0, 0.5f64..2.0, 0.01f64..5.0, -0.02f64..0.1, 0.01f64..2.0)
            .prop_map(|(x, m, tau, r, vol)| BsParams::new(x, x * m, tau, r, vol).unwrap())
    }

    proptest! {
        #[test]
        fn put_call_parity(p in params()) {
            let lhs = bs_call_price(&p) - bs_put_price(&p);
            let rhs = p.spot - p.strike * (-p.rate * p.tau).exp();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * p.spot.max(p.strike));
        }

        #[test]
        fn increasing_in_vol(p in params(), bump in 0.01f64..0.5) {
            let hi = p.with_vol(p.vol + bump);
            if bs_vega(&p) > 1e-8 * p.spot {
                prop_assert!(bs_call_price(&hi) > bs_call_price(&p));
            } else {
                prop_assert!(bs_call_price(&hi) >= bs_call_price(&p));
            }
        }

        #[test]
        fn delta_matches_finite_difference(p in params()) {
            let h = 1e-3 * p.spot * (p.vol * p.tau.sqrt()).min(1.0);
            let fd = (bs_call_price(&p.with_spot(p.spot + h)) - bs_call_price(&p.with_spot(p.spot - h))) / (2.0 * h);
            prop_assert!((bs_delta(&p) - fd).abs() < 1e-6);
        }

        #[test]
        fn implied_vol_round_trip(p in params()) {
            // Only prices that carry information about σ at the 1e-8 level.
            prop_assume!(bs_vega(&p) > 1e-2);
            let m = MarketState::flat(p.spot, p.rate).unwrap();
            let q = OptionQuote::call(p.tau, p.strike, bs_call_price(&p));
            let v = implied_volatility(&m, &q).unwrap();
            prop_assert!((v - p.vol).abs() < 1e-8, "got {} want {}", v, p.vol);
        }
    }
}
