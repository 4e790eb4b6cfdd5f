use super::ViolationKind;
use crate::market::QuoteSurface;
use serde::Serialize;

/// A quote excluded from calibration because it creates static arbitrage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuoteViolation {
    pub index: usize,
    pub kind: ViolationKind,
    pub amount: f64,
}

/// Checks call-equivalent quote prices for bound, strike-monotonicity, butterfly and
/// (at zero rates) calendar violations.
///
/// Returns the surface with offending quotes at weight zero and the list of offenders.
/// Quotes already at weight zero are ignored.
pub fn screen_quotes(quotes: &QuoteSurface) -> (QuoteSurface, Vec<QuoteViolation>) {
    let market = &quotes.market;
    let tol = 1e-8 * market.x0.max(1.0);
    let list = quotes.quotes();
    let mut out: Vec<QuoteViolation> = Vec::new();
    let flag = |index: usize, kind: ViolationKind, amount: f64, out: &mut Vec<QuoteViolation>| {
        if !out.iter().any(|v| v.index == index) {
            out.push(QuoteViolation { index, kind, amount });
        }
    };

    for w in quotes.check_bounds() {
        let amount = (w.lower - w.price).max(w.price - w.upper);
        flag(w.index, ViolationKind::Bounds, amount, &mut out);
    }

    let maturities = quotes.maturities();
    let rows: Vec<Vec<(usize, f64, f64)>> = maturities
        .iter()
        .map(|&t| {
            let mut row: Vec<(usize, f64, f64)> = list
                .iter()
                .enumerate()
                .filter(|(i, q)| q.maturity == t && q.weight > 0.0 && !out.iter().any(|v| v.index == *i))
                .map(|(i, q)| (i, q.strike, q.call_equivalent(market)))
                .collect();
            row.sort_by(|a, b| a.1.total_cmp(&b.1));
            // One point per strike.
            row.dedup_by(|b, a| a.1 == b.1);
            row
        })
        .collect();

    for row in &rows {
        for w in row.windows(2) {
            if w[1].2 > w[0].2 + tol {
                flag(w[1].0, ViolationKind::StrikeMonotonicity, w[1].2 - w[0].2, &mut out);
            }
        }
        for w in row.windows(3) {
            let left = (w[1].2 - w[0].2) / (w[1].1 - w[0].1);
            let right = (w[2].2 - w[1].2) / (w[2].1 - w[1].1);
            if right < left - tol / (w[2].1 - w[0].1) {
                flag(w[1].0, ViolationKind::Convexity, left - right, &mut out);
            }
        }
    }

    if market.rate.is_zero() {
        for pair in rows.windows(2) {
            for &(i, k, c) in &pair[1] {
                if let Some(&(_, _, earlier)) = pair[0].iter().find(|e| e.1 == k) {
                    if c < earlier - tol {
                        flag(i, ViolationKind::Calendar, earlier - c, &mut out);
                    }
                }
            }
        }
    }
    out.sort_by_key(|v| v.index);
    let indices: Vec<usize> = out.iter().map(|v| v.index).collect();
    (quotes.with_zero_weights(&indices), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{bs_call_price, BsParams};
    use crate::market::{MarketState, OptionQuote};

    fn call(t: f64, k: f64) -> OptionQuote {
        OptionQuote::call(t, k, bs_call_price(&BsParams::new(100.0, k, t, 0.0, 0.2).unwrap()))
    }

    #[test]
    fn clean_quotes_pass() {
        let mk = MarketState::flat(100.0, 0.0).unwrap();
        let q: Vec<_> = [0.5, 1.0].iter().flat_map(|&t| [90.0, 100.0, 110.0].map(|k| call(t, k))).collect();
        let (screened, bad) = screen_quotes(&QuoteSurface::new(mk, q).unwrap());
        assert!(bad.is_empty());
        assert!(screened.quotes().iter().all(|q| q.weight == 1.0));
    }

    #[test]
    fn butterfly_and_calendar_offenders_are_zeroed() {
        let mk = MarketState::flat(100.0, 0.0).unwrap();
        let mut mid = call(1.0, 100.0);
        mid.price += 3.0;
        let mut late = call(1.0, 90.0);
        late.price = call(0.5, 90.0).price - 0.5;
        let q = vec![call(0.5, 90.0), call(0.5, 100.0), call(0.5, 110.0), late, mid, call(1.0, 110.0)];
        let surface = QuoteSurface::new(mk, q).unwrap();
        let (screened, bad) = screen_quotes(&surface);
        let kinds: Vec<_> = bad.iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&ViolationKind::Convexity));
        assert!(kinds.contains(&ViolationKind::Calendar));
        for v in &bad {
            assert_eq!(screened.quotes()[v.index].weight, 0.0);
        }
    }

    #[test]
    fn out_of_bounds_price_is_zeroed() {
        let mk = MarketState::flat(100.0, 0.0).unwrap();
        let q = vec![OptionQuote::call(1.0, 50.0, 10.0), call(1.0, 100.0)];
        let (_, bad) = screen_quotes(&QuoteSurface::new(mk, q).unwrap());
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].kind, ViolationKind::Bounds);
    }
}
