use crate::error::{Error, Result};
use crate::market::MarketState;
use serde::{Deserialize, Serialize};

/// Call prices `C(T, K)` on a maturity x strike lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSurface {
    pub market: MarketState,
    maturities: Vec<f64>,
    strikes: Vec<f64>,
    /// Row-major by maturity.
    values: Vec<f64>,
    derivatives: Option<SurfaceDerivatives>,
}

/// Exact partial derivatives supplied alongside the prices, row-major like the values.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceDerivatives {
    pub dc_dt: Vec<f64>,
    pub dc_dk: Vec<f64>,
    pub d2c_dk2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    /// Price increases with strike.
    StrikeMonotonicity,
    /// Negative butterfly.
    Convexity,
    /// Price decreases with maturity (checked at zero rates).
    Calendar,
    /// Outside `[(x0 − K)^+, x0]`.
    Bounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceViolation {
    pub kind: ViolationKind,
    pub maturity_index: usize,
    pub strike_index: usize,
    pub amount: f64,
}

impl PriceSurface {
    pub fn new(market: MarketState, maturities: Vec<f64>, strikes: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if maturities.is_empty() || strikes.is_empty() {
            return Err(Error::invalid("price surface needs at least one maturity and one strike"));
        }
        if maturities.windows(2).any(|w| !(w[1] > w[0])) || strikes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("price surface grids must be strictly increasing"));
        }
        if maturities[0] < market.t0 || strikes[0] <= 0.0 {
            return Err(Error::invalid("maturities must not precede t0 and strikes must be positive"));
        }
        if values.len() != maturities.len() || values.iter().any(|r| r.len() != strikes.len()) {
            return Err(Error::invalid("price surface values must have shape maturities x strikes"));
        }
        let values: Vec<f64> = values.into_iter().flatten().collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("price surface values must be finite"));
        }
        Ok(PriceSurface {
            market,
            maturities,
            strikes,
            values,
            derivatives: None,
        })
    }

    /// Evaluates `f(T, K)` on the lattice.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(market: MarketState, maturities: Vec<f64>, strikes: Vec<f64>, f: F) -> Result<Self> {
        let values = maturities.iter().map(|&t| strikes.iter().map(|&k| f(t, k)).collect()).collect();
        Self::new(market, maturities, strikes, values)
    }

    pub fn with_derivatives(mut self, d: SurfaceDerivatives) -> Result<Self> {
        let n = self.values.len();
        if d.dc_dt.len() != n || d.dc_dk.len() != n || d.d2c_dk2.len() != n {
            return Err(Error::invalid("derivative arrays must match the surface shape"));
        }
        self.derivatives = Some(d);
        Ok(self)
    }

    pub fn maturities(&self) -> &[f64] {
        &self.maturities
    }

    pub fn strikes(&self) -> &[f64] {
        &self.strikes
    }

    pub fn derivatives(&self) -> Option<&SurfaceDerivatives> {
        self.derivatives.as_ref()
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.strikes.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.strikes.len();
        &self.values[i * n..(i + 1) * n]
    }

    /// Call price at maturity index `i`, cubic in log-strike between lattice strikes.
    pub fn call_price_at(&self, i: usize, strike: f64) -> f64 {
        lagrange_log(&self.strikes, self.row(i), strike)
    }

    /// Call price at any `(T, K)` inside the lattice; linear in maturity between rows.
    pub fn call_price(&self, maturity: f64, strike: f64) -> f64 {
        let m = &self.maturities;
        if maturity <= m[0] {
            return self.call_price_at(0, strike);
        }
        if maturity >= m[m.len() - 1] {
            return self.call_price_at(m.len() - 1, strike);
        }
        let hi = m.partition_point(|&t| t <= maturity);
        let lo = hi - 1;
        let w = (maturity - m[lo]) / (m[hi] - m[lo]);
        let (a, b) = (self.call_price_at(lo, strike), self.call_price_at(hi, strike));
        a + w * (b - a)
    }

    /// Sub-surface with strikes in `[lo, hi]`.
    pub fn restrict_strikes(&self, lo: f64, hi: f64) -> Result<Self> {
        let keep: Vec<usize> = (0..self.strikes.len()).filter(|&j| self.strikes[j] >= lo && self.strikes[j] <= hi).collect();
        if keep.is_empty() {
            return Err(Error::invalid("no strikes inside the requested window"));
        }
        let pick = |v: &[f64]| -> Vec<f64> {
            (0..self.maturities.len())
                .flat_map(|i| keep.iter().map(move |&j| (i, j)))
                .map(|(i, j)| v[i * self.strikes.len() + j])
                .collect()
        };
        Ok(PriceSurface {
            market: self.market.clone(),
            maturities: self.maturities.clone(),
            strikes: keep.iter().map(|&j| self.strikes[j]).collect(),
            values: pick(&self.values),
            derivatives: self.derivatives.as_ref().map(|d| SurfaceDerivatives {
                dc_dt: pick(&d.dc_dt),
                dc_dk: pick(&d.dc_dk),
                d2c_dk2: pick(&d.d2c_dk2),
            }),
        })
    }

    /// Static-arbitrage diagnostics; the calendar check only runs at zero rates.
    pub fn check_invariants(&self) -> Vec<SurfaceViolation> {
        let tol = 1e-8;
        let x0 = self.market.x0;
        let mut out = Vec::new();
        let nk = self.strikes.len();
        let k = &self.strikes;
        for i in 0..self.maturities.len() {
            let row = self.row(i);
            for j in 0..nk {
                let df = self.market.discount_to(self.maturities[i]);
                let lower = (x0 - k[j] * df).max(0.0);
                if row[j] < lower - tol || row[j] > x0 + tol {
                    out.push(SurfaceViolation {
                        kind: ViolationKind::Bounds,
                        maturity_index: i,
                        strike_index: j,
                        amount: (lower - row[j]).max(row[j] - x0),
                    });
                }
                if j + 1 < nk && row[j + 1] > row[j] + tol {
                    out.push(SurfaceViolation {
                        kind: ViolationKind::StrikeMonotonicity,
                        maturity_index: i,
                        strike_index: j,
                        amount: row[j + 1] - row[j],
                    });
                }
                if j > 0 && j + 1 < nk {
                    let left = (row[j] - row[j - 1]) / (k[j] - k[j - 1]);
                    let right = (row[j + 1] - row[j]) / (k[j + 1] - k[j]);
                    let second = 2.0 * (right - left) / (k[j + 1] - k[j - 1]);
                    if second < -tol {
                        out.push(SurfaceViolation {
                            kind: ViolationKind::Convexity,
                            maturity_index: i,
                            strike_index: j,
                            amount: -second,
                        });
                    }
                }
                if i > 0 && self.market.rate.is_zero() {
                    let prev = self.value(i - 1, j);
                    if row[j] < prev - tol {
                        out.push(SurfaceViolation {
                            kind: ViolationKind::Calendar,
                            maturity_index: i,
                            strike_index: j,
                            amount: prev - row[j],
                        });
                    }
                }
            }
        }
        out
    }
}

/// Cubic Lagrange interpolation in `ln K` on a possibly non-uniform strike grid.
fn lagrange_log(strikes: &[f64], values: &[f64], strike: f64) -> f64 {
    let n = strikes.len();
    if n == 1 {
        return values[0];
    }
    if strike <= strikes[0] {
        return values[0];
    }
    if strike >= strikes[n - 1] {
        return values[n - 1];
    }
    let hi = strikes.partition_point(|&k| k <= strike);
    let v = strike.ln();
    if n < 4 {
        let lo = hi - 1;
        let w = (v - strikes[lo].ln()) / (strikes[hi].ln() - strikes[lo].ln());
        return values[lo] + w * (values[hi] - values[lo]);
    }
    let start = hi.saturating_sub(2).min(n - 4);
    let ys: Vec<f64> = strikes[start..start + 4].iter().map(|k| k.ln()).collect();
    let mut total = 0.0;
    for i in 0..4 {
        let mut w = 1.0;
        for m in 0..4 {
            if m != i {
                w *= (v - ys[m]) / (ys[i] - ys[m]);
            }
        }
        total += w * values[start + i];
    }
    total
}
