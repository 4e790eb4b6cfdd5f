use super::MarketState;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OptionKind {
    Call,
    Put,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub maturity: f64,
    pub strike: f64,
    pub kind: OptionKind,
    pub price: f64,
    pub weight: f64,
}

impl OptionQuote {
    pub fn call(maturity: f64, strike: f64, price: f64) -> Self {
        OptionQuote {
            maturity,
            strike,
            kind: OptionKind::Call,
            price,
            weight: 1.0,
        }
    }

    pub fn put(maturity: f64, strike: f64, price: f64) -> Self {
        OptionQuote {
            kind: OptionKind::Put,
            ..Self::call(maturity, strike, price)
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    /// Static no-arbitrage interval `[lower, upper]` for this quote.
    pub fn arbitrage_bounds(&self, market: &MarketState) -> (f64, f64) {
        let df = market.discount_to(self.maturity);
        match self.kind {
            OptionKind::Call => ((market.x0 - self.strike * df).max(0.0), market.x0),
            OptionKind::Put => ((self.strike * df - market.x0).max(0.0), self.strike * df),
        }
    }

    /// Equivalent call price through put-call parity.
    pub fn call_equivalent(&self, market: &MarketState) -> f64 {
        match self.kind {
            OptionKind::Call => self.price,
            OptionKind::Put => self.price + market.x0 - self.strike * market.discount_to(self.maturity),
        }
    }

    fn validate(&self, market: &MarketState) -> Result<()> {
        if !(self.maturity > market.t0 && self.maturity.is_finite()) {
            return Err(Error::invalid(format!(
                "quote maturity {} must exceed t0 = {}",
                self.maturity, market.t0
            )));
        }
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(Error::invalid(format!("quote strike must be positive, got {}", self.strike)));
        }
        if !(self.price >= 0.0 && self.price.is_finite()) {
            return Err(Error::invalid(format!("quote price must be nonnegative, got {}", self.price)));
        }
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(Error::invalid(format!("quote weight must be nonnegative, got {}", self.weight)));
        }
        Ok(())
    }
}

/// A quote whose price sits outside its static no-arbitrage interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteWarning {
    pub index: usize,
    pub lower: f64,
    pub upper: f64,
    pub price: f64,
}

/// Quotes sorted by maturity, then strike, then kind.
#[derive(Debug, Clone, PartialEq)]
pub struct QuoteSurface {
    pub market: MarketState,
    quotes: Vec<OptionQuote>,
}

impl QuoteSurface {
    pub fn new(market: MarketState, mut quotes: Vec<OptionQuote>) -> Result<Self> {
        for (i, q) in quotes.iter().enumerate() {
            q.validate(&market).map_err(|e| Error::AtQuote {
                index: i,
                source: Box::new(e),
            })?;
        }
        quotes.sort_by(|a, b| {
            a.maturity
                .total_cmp(&b.maturity)
                .then(a.strike.total_cmp(&b.strike))
                .then(a.kind.cmp(&b.kind))
        });
        if let Some(w) = quotes
            .windows(2)
            .find(|w| w[0].maturity == w[1].maturity && w[0].strike == w[1].strike && w[0].kind == w[1].kind)
        {
            return Err(Error::invalid(format!(
                "duplicate quote at maturity {} strike {}",
                w[0].maturity, w[0].strike
            )));
        }
        Ok(QuoteSurface { market, quotes })
    }

    pub fn empty(market: MarketState) -> Self {
        QuoteSurface {
            market,
            quotes: Vec::new(),
        }
    }

    pub fn quotes(&self) -> &[OptionQuote] {
        &self.quotes
    }

    pub fn len(&self) -> usize {
        self.quotes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotes.is_empty()
    }

    /// Distinct maturities in increasing order.
    pub fn maturities(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for q in &self.quotes {
            if out.last() != Some(&q.maturity) {
                out.push(q.maturity);
            }
        }
        out
    }

    /// Quotes violating their static bounds. Reported, not rejected.
    pub fn check_bounds(&self) -> Vec<QuoteWarning> {
        self.quotes
            .iter()
            .enumerate()
            .filter_map(|(index, q)| {
                let (lower, upper) = q.arbitrage_bounds(&self.market);
                let slack = 1e-12 * self.market.x0;
                (q.price < lower - slack || q.price > upper + slack).then_some(QuoteWarning {
                    index,
                    lower,
                    upper,
                    price: q.price,
                })
            })
            .collect()
    }

    /// Copy with selected quote weights set to zero.
    pub fn with_zero_weights(&self, indices: &[usize]) -> Self {
        let mut out = self.clone();
        for &i in indices {
            if let Some(q) = out.quotes.get_mut(i) {
                q.weight = 0.0;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_and_rejects_duplicates() {
        let m = MarketState::flat(100.0, 0.0).unwrap();
        let qs = vec![
            OptionQuote::call(1.0, 110.0, 3.0),
            OptionQuote::call(0.5, 100.0, 5.0),
            OptionQuote::put(0.5, 100.0, 5.0),
        ];
        let s = QuoteSurface::new(m.clone(), qs).unwrap();
        assert_eq!(s.maturities(), vec![0.5, 1.0]);
        assert_eq!(s.quotes()[0].kind, OptionKind::Call);
        let dup = vec![OptionQuote::call(1.0, 100.0, 3.0), OptionQuote::call(1.0, 100.0, 4.0)];
        assert!(QuoteSurface::new(m, dup).is_err());
    }

    #[test]
    fn bound_violations_are_warnings() {
        let m = MarketState::flat(100.0, 0.0).unwrap();
        let qs = vec![
            OptionQuote::call(1.0, 80.0, 10.0),
            OptionQuote::call(1.0, 100.0, 8.0),
            OptionQuote::call(1.0, 120.0, 101.0),
        ];
        let s = QuoteSurface::new(m, qs).unwrap();
        let w = s.check_bounds();
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].index, 0);
        assert_eq!(w[1].index, 2);
    }

    #[test]
    fn invalid_quotes_carry_index() {
        let m = MarketState::flat(100.0, 0.0).unwrap();
        let err = QuoteSurface::new(m, vec![OptionQuote::call(1.0, 100.0, 1.0), OptionQuote::call(0.0, 100.0, 1.0)])
            .unwrap_err();
        assert!(matches!(err, Error::AtQuote { index: 1, .. }));
    }
}
