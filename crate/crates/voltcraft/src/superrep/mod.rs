//! Super-replication prices and robust hedges.

mod envelope;
mod lp;

pub use envelope::{concave_envelope, EnvelopeDomain};

use crate::error::{Error, Result};
use crate::market::{MarketState, Payoff, QuoteSurface};
use crate::pde::{solve_bsb, PdeGrid, VolBand};
use lp::{LpFailure, Row, Sense};
use serde::Serialize;

/// Finitely supported probability on terminal prices.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Weights must be nonnegative and sum to one within `1e-12`; they are renormalized exactly.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::invalid("measure needs matching, nonempty atoms and weights"));
        }
        if atoms.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || atoms.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("measure atoms must be nonnegative and strictly increasing"));
        }
        if weights.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
            return Err(Error::invalid("measure weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("measure weights sum to {total}, not 1")));
        }
        let weights = weights.into_iter().map(|q| q / total).collect();
        Ok(DiscreteMeasure { atoms, weights })
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(x, q)| q * f(*x)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expectation(|x| x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CallPosition {
    #[serde(rename = "K")]
    pub strike: f64,
    pub position: f64,
}

/// Buy-and-hold portfolio of cash, shares and calls at a single maturity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticHedge {
    pub cash: f64,
    #[serde(rename = "forward")]
    pub shares: f64,
    pub calls: Vec<CallPosition>,
}

impl StaticHedge {
    /// Terminal value when the underlying ends at `x`.
    pub fn value_at(&self, x: f64) -> f64 {
        self.cash + self.shares * x + self.calls.iter().map(|c| c.position * (x - c.strike).max(0.0)).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hedge {
    Static(StaticHedge),
    /// Initial share position of a continuously rebalanced hedge.
    Dynamic { delta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperRepResult {
    pub price: f64,
    pub hedge: Hedge,
    /// Optimal measure, when the price comes from the moment linear program.
    pub measure: Option<DiscreteMeasure>,
    /// Primal minus dual objective of the linear program.
    pub duality_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasureAtom {
    pub x: f64,
    pub q: f64,
}

/// Serialized form of a linear-program result.
#[derive(Debug, Clone, Serialize)]
pub struct LpReport {
    pub value: f64,
    pub measure: Vec<MeasureAtom>,
    pub dual_hedge: StaticHedge,
}

impl SuperRepResult {
    /// Report for LP results; atoms with zero weight are omitted.
    pub fn lp_report(&self) -> Option<LpReport> {
        let (Some(m), Hedge::Static(h)) = (&self.measure, &self.hedge) else {
            return None;
        };
        Some(LpReport {
            value: self.price,
            measure: m
                .atoms()
                .iter()
                .zip(m.weights())
                .filter(|(_, q)| **q > 0.0)
                .map(|(&x, &q)| MeasureAtom { x, q })
                .collect(),
            dual_hedge: h.clone(),
        })
    }
}

fn require_zero_rate(market: &MarketState) -> Result<()> {
    if market.rate.is_zero() {
        Ok(())
    } else {
        Err(Error::Unsupported("super-replication requires a zero interest rate".into()))
    }
}

/// Price and static hedge when volatility is unrestricted: the concave envelope at `x0`.
pub fn superrep_unbounded_vol(market: &MarketState, payoff: &Payoff) -> Result<SuperRepResult> {
    require_zero_rate(market)?;
    let env = concave_envelope(payoff, EnvelopeDomain::Unbounded)?;
    let price = env.eval(market.x0);
    let delta = env.slope_at(market.x0);
    Ok(SuperRepResult {
        price,
        hedge: Hedge::Static(StaticHedge {
            cash: price - delta * market.x0,
            shares: delta,
            calls: Vec::new(),
        }),
        measure: None,
        duality_gap: None,
    })
}

/// Price under a volatility band through the upper-volatility equation.
pub fn superrep_band(
    market: &MarketState,
    band: &VolBand,
    payoff: &Payoff,
    maturity: f64,
    grid: &PdeGrid,
) -> Result<SuperRepResult> {
    let sol = solve_bsb(market, band, payoff, maturity, grid)?;
    Ok(SuperRepResult {
        price: sol.price(),
        hedge: Hedge::Dynamic { delta: sol.spot_delta() },
        measure: None,
        duality_gap: None,
    })
}

/// How call quotes constrain the measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintMode {
    /// `E[(X − K)⁺] = C` exactly.
    Equality,
    /// `|E[(X − K)⁺] − C| ≤ ε`.
    Tolerance(f64),
    /// `E[(X − K)⁺] ≤ C`: calls may only be bought.
    AtMost,
}

impl ConstraintMode {
    pub fn default_for(market: &MarketState) -> Self {
        ConstraintMode::Tolerance(1e-6 * market.x0)
    }
}

/// Log-uniform grid of 2001 atoms on `[x0/10, 10·x0]`.
pub fn default_support(x0: f64) -> Vec<f64> {
    let n = 2001;
    (0..n)
        .map(|i| x0 / 10.0 * 100f64.powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// Largest expected target value over martingale measures on `support` that
/// reprice the quoted calls, with the default tolerance mode.
pub fn superrep_calibration_constrained(
    market: &MarketState,
    constraints: &QuoteSurface,
    target: &Payoff,
    support: &[f64],
) -> Result<SuperRepResult> {
    superrep_calibration_constrained_with(market, constraints, target, support, ConstraintMode::default_for(market))
}

pub fn superrep_calibration_constrained_with(
    market: &MarketState,
    constraints: &QuoteSurface,
    target: &Payoff,
    support: &[f64],
    mode: ConstraintMode,
) -> Result<SuperRepResult> {
    require_zero_rate(market)?;
    if let ConstraintMode::Tolerance(eps) = mode {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("constraint tolerance must be nonnegative, got {eps}")));
        }
    }
    if support.is_empty()
        || support.iter().any(|x| !(x.is_finite() && *x >= 0.0))
        || support.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::invalid("support must be nonnegative and strictly increasing"));
    }
    let quotes: Vec<_> = constraints.quotes().iter().filter(|q| q.weight > 0.0).collect();
    if let Some(q) = quotes.iter().find(|q| q.maturity != quotes[0].maturity) {
        return Err(Error::invalid(format!(
            "constraints must share one maturity, found {} and {}",
            quotes[0].maturity, q.maturity
        )));
    }
    let (lo, hi) = (support[0], support[support.len() - 1]);
    let need_lo = quotes.iter().map(|q| q.strike).fold(market.x0, f64::min);
    let need_hi = quotes.iter().map(|q| q.strike).fold(market.x0, f64::max);
    if lo > need_lo || hi < need_hi {
        return Err(Error::SupportTooSmall(format!(
            "support [{lo}, {hi}] must cover [{need_lo}, {need_hi}]"
        )));
    }

    let calls: Vec<(f64, f64)> = quotes.iter().map(|q| (q.strike, q.call_equivalent(market))).collect();
    let mut rows = vec![
        Row {
            coefs: vec![1.0; support.len()],
            sense: Sense::Eq,
            rhs: 1.0,
        },
        Row {
            coefs: support.to_vec(),
            sense: Sense::Eq,
            rhs: market.x0,
        },
    ];
    // Row indices per call constraint, for reading back positions.
    let mut owners: Vec<Vec<usize>> = Vec::with_capacity(calls.len());
    for &(k, c) in &calls {
        let coefs: Vec<f64> = support.iter().map(|x| (x - k).max(0.0)).collect();
        let mut add = |sense, rhs| {
            rows.push(Row {
                coefs: coefs.clone(),
                sense,
                rhs,
            });
            rows.len() - 1
        };
        owners.push(match mode {
            ConstraintMode::Equality => vec![add(Sense::Eq, c)],
            ConstraintMode::AtMost => vec![add(Sense::Le, c)],
            ConstraintMode::Tolerance(eps) => vec![add(Sense::Le, c + eps), add(Sense::Ge, c - eps)],
        });
    }
    let values: Vec<f64> = support.iter().map(|&x| target.eval(x)).collect();
    let sol = match lp::solve(&values, &rows)? {
        Ok(s) => s,
        Err(LpFailure::Infeasible) => {
            return Err(Error::Arbitrage(
                "no martingale measure on the support matches the quoted calls".into(),
            ))
        }
        Err(LpFailure::Unbounded) => return Err(Error::SupportTooSmall("linear program is unbounded".into())),
    };

    let hedge = StaticHedge {
        cash: sol.y[0],
        shares: sol.y[1],
        calls: calls
            .iter()
            .zip(&owners)
            .map(|(&(k, _), rows)| CallPosition {
                strike: k,
                position: rows.iter().map(|&r| sol.y[r]).sum(),
            })
            .collect(),
    };
    let scale = values.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let gap = sol.value - sol.dual_value;
    if gap.abs() > 1e-8 * scale {
        return Err(Error::numeric(format!("linear program duality gap {gap:e} exceeds tolerance")));
    }
    if let Some((x, v)) = support
        .iter()
        .zip(&values)
        .find(|(x, v)| hedge.value_at(**x) < **v - 1e-8 * scale)
    {
        return Err(Error::numeric(format!(
            "dual hedge {} falls below the target {v} at {x}",
            hedge.value_at(*x)
        )));
    }
    let total: f64 = sol.x.iter().sum();
    let measure = DiscreteMeasure::new(support.to_vec(), sol.x.iter().map(|q| q / total).collect())?;
    Ok(SuperRepResult {
        price: sol.value,
        hedge: Hedge::Static(hedge),
        measure: Some(measure),
        duality_gap: Some(gap),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{bs_call_price, BsParams};
    use crate::market::OptionQuote;

    fn market() -> MarketState {
        MarketState::flat(100.0, 0.0).unwrap()
    }

    #[test]
    fn unbounded_call_holds_one_share() {
        let r = superrep_unbounded_vol(&market(), &Payoff::call(100.0).unwrap()).unwrap();
        assert_eq!(r.price, 100.0);
        assert_eq!(
            r.hedge,
            Hedge::Static(StaticHedge {
                cash: 0.0,
                shares: 1.0,
                calls: vec![]
            })
        );
    }

    #[test]
    fn concave_payoff_prices_at_spot() {
        let r = superrep_unbounded_vol(&market(), &Payoff::capped(120.0).unwrap()).unwrap();
        assert_eq!(r.price, 100.0);
    }

    #[test]
    fn nonzero_rate_is_unsupported() {
        let mk = MarketState::flat(100.0, 0.03).unwrap();
        assert!(matches!(
            superrep_unbounded_vol(&mk, &Payoff::call(100.0).unwrap()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn static_hedge_dominates() {
        for p in [
            Payoff::call(90.0).unwrap(),
            Payoff::put(110.0).unwrap(),
            Payoff::butterfly(80.0, 100.0, 120.0).unwrap(),
        ] {
            let r = superrep_unbounded_vol(&market(), &p).unwrap();
            let Hedge::Static(h) = &r.hedge else { panic!() };
            for i in 0..10_000 {
                let x = i as f64 * 0.05;
                assert!(h.value_at(x) >= p.eval(x) - 1e-10, "x={x}");
            }
        }
    }

    #[test]
    fn unconstrained_lp_is_the_bounded_chord() {
        let support: Vec<f64> = (0..=300).map(f64::from).collect();
        let empty = QuoteSurface::empty(market());
        let r = superrep_calibration_constrained_with(&market(), &empty, &Payoff::call(100.0).unwrap(), &support, ConstraintMode::Equality)
            .unwrap();
        assert!((r.price - 200.0 / 3.0).abs() < 1e-9, "{}", r.price);
        assert!(r.duality_gap.unwrap().abs() < 1e-9);
    }

    fn lognormal(support: &[f64]) -> DiscreteMeasure {
        let (s, t) = (0.2, 1.0);
        let raw: Vec<f64> = support
            .iter()
            .map(|&x| {
                let z = ((x / 100.0).ln() + 0.5 * s * s * t) / (s * t.sqrt());
                (-0.5 * z * z).exp()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        DiscreteMeasure::new(support.to_vec(), raw.iter().map(|q| q / total).collect()).unwrap()
    }

    #[test]
    fn constrained_call_reprices_exactly() {
        let support = default_support(100.0);
        let m = lognormal(&support);
        let mk = MarketState::flat(m.mean(), 0.0).unwrap();
        let strikes = [80.0, 90.0, 100.0, 110.0, 120.0];
        let quotes: Vec<_> = strikes.iter().map(|&k| OptionQuote::call(1.0, k, m.expectation(|x| (x - k).max(0.0)))).collect();
        let surface = QuoteSurface::new(mk.clone(), quotes.clone()).unwrap();
        let r = superrep_calibration_constrained_with(&mk, &surface, &Payoff::call(100.0).unwrap(), &support, ConstraintMode::Equality)
            .unwrap();
        assert!((r.price - quotes[2].price).abs() < 1e-8);

        let fly = Payoff::butterfly(90.0, 100.0, 110.0).unwrap();
        let fly_price = superrep_calibration_constrained_with(&mk, &surface, &fly, &support, ConstraintMode::Equality)
            .unwrap()
            .price;
        assert!(fly_price >= m.expectation(|x| fly.eval(x)) - 1e-8);

        // Fewer constraints, larger value.
        let fewer = QuoteSurface::new(mk.clone(), vec![quotes[0].clone(), quotes[4].clone()]).unwrap();
        let loose = superrep_calibration_constrained_with(&mk, &fewer, &fly, &support, ConstraintMode::Equality)
            .unwrap()
            .price;
        assert!(loose >= fly_price - 1e-8);
    }

    #[test]
    fn bs_prices_are_consistent_with_default_mode() {
        let mk = market();
        let quotes: Vec<_> = [90.0, 110.0]
            .iter()
            .map(|&k| OptionQuote::call(1.0, k, bs_call_price(&BsParams::new(100.0, k, 1.0, 0.0, 0.2).unwrap())))
            .collect();
        let surface = QuoteSurface::new(mk.clone(), quotes).unwrap();
        let r = superrep_calibration_constrained(&mk, &surface, &Payoff::put(100.0).unwrap(), &default_support(100.0)).unwrap();
        let report = serde_json::to_value(r.lp_report().unwrap()).unwrap();
        assert!(report["dual_hedge"]["calls"][0]["K"].is_number());
        assert!(report["measure"][0]["q"].is_number());
    }

    #[test]
    fn arbitrage_quotes_are_infeasible() {
        let mk = market();
        // Convexity violation at 100.
        let quotes = vec![
            OptionQuote::call(1.0, 90.0, 12.0),
            OptionQuote::call(1.0, 100.0, 8.0),
            OptionQuote::call(1.0, 110.0, 2.0),
        ];
        let surface = QuoteSurface::new(mk.clone(), quotes).unwrap();
        let err = superrep_calibration_constrained_with(&mk, &surface, &Payoff::call(100.0).unwrap(), &default_support(100.0), ConstraintMode::Equality)
            .unwrap_err();
        assert!(matches!(err, Error::Arbitrage(_)), "{err}");
    }

    #[test]
    fn narrow_support_is_rejected() {
        let mk = market();
        let surface = QuoteSurface::new(mk.clone(), vec![OptionQuote::call(1.0, 150.0, 1.0)]).unwrap();
        let support: Vec<f64> = (50..=120).map(f64::from).collect();
        assert!(matches!(
            superrep_calibration_constrained(&mk, &surface, &Payoff::call(100.0).unwrap(), &support),
            Err(Error::SupportTooSmall(_))
        ));
    }
}
