use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Continuous piecewise-linear payoff of the terminal price.
///
/// Between breakpoints the payoff is linear; left of the first breakpoint it is flat,
/// right of the last one it grows with `terminal_slope`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payoff {
    xs: Vec<f64>,
    values: Vec<f64>,
    terminal_slope: f64,
}

/// `h(x) = cash + shares * x + Σ position * (x - strike)^+` for `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CallDecomposition {
    pub cash: f64,
    pub shares: f64,
    pub calls: Vec<(f64, f64)>,
}

impl Payoff {
    pub fn from_points(xs: Vec<f64>, values: Vec<f64>, terminal_slope: f64) -> Result<Self> {
        if xs.is_empty() || xs.len() != values.len() {
            return Err(Error::invalid("payoff needs at least one breakpoint and one value per breakpoint"));
        }
        if xs[0] < 0.0 {
            return Err(Error::invalid("payoff breakpoints must be nonnegative"));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("payoff breakpoints must be strictly increasing"));
        }
        if xs.iter().chain(&values).any(|v| !v.is_finite()) || !terminal_slope.is_finite() {
            return Err(Error::invalid("payoff breakpoints and values must be finite"));
        }
        Ok(Payoff {
            xs,
            values,
            terminal_slope,
        })
    }

    pub fn call(strike: f64) -> Result<Self> {
        check_strike(strike)?;
        Self::from_points(vec![0.0, strike], vec![0.0, 0.0], 1.0)
    }

    pub fn put(strike: f64) -> Result<Self> {
        check_strike(strike)?;
        Self::from_points(vec![0.0, strike], vec![strike, 0.0], 0.0)
    }

    /// Long `K1` call, short two `K2` calls, long `K3` call. Requires equal wings.
    pub fn butterfly(k1: f64, k2: f64, k3: f64) -> Result<Self> {
        check_strike(k1)?;
        if !(k1 < k2 && k2 < k3) {
            return Err(Error::invalid("butterfly strikes must be strictly increasing"));
        }
        let peak = (k2 - k1).min(k3 - k2);
        Self::from_points(vec![0.0, k1, k2, k3], vec![0.0, 0.0, peak, 0.0], 0.0).and_then(|p| {
            if ((k2 - k1) - (k3 - k2)).abs() > 1e-12 * k3 {
                Err(Error::invalid("butterfly wings must be symmetric"))
            } else {
                Ok(p)
            }
        })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::from_points(vec![0.0], vec![c], 0.0)
    }

    /// Forward contract `x - K`.
    pub fn forward(strike: f64) -> Result<Self> {
        Self::from_points(vec![0.0], vec![-strike], 1.0)
    }

    /// `min(x, K)`, a concave payoff.
    pub fn capped(strike: f64) -> Result<Self> {
        check_strike(strike)?;
        Self::from_points(vec![0.0, strike], vec![0.0, strike], 0.0)
    }

    /// Samples an arbitrary function onto `n` uniformly spaced breakpoints on `[0, upper]`.
    pub fn sampled<F: Fn(f64) -> f64>(f: F, upper: f64, n: usize, terminal_slope: f64) -> Result<Self> {
        if n < 2 || !(upper > 0.0) {
            return Err(Error::invalid("sampling needs at least two points on a positive range"));
        }
        let xs: Vec<f64> = (0..n).map(|i| upper * i as f64 / (n - 1) as f64).collect();
        let values = xs.iter().map(|&x| f(x)).collect();
        Self::from_points(xs, values, terminal_slope)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn terminal_slope(&self) -> f64 {
        self.terminal_slope
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| *v >= 0.0) && self.terminal_slope >= 0.0
    }

    /// Evaluates the payoff; arguments left of the first breakpoint get the flat extension.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let idx = self.xs.partition_point(|&k| k <= x);
        if idx == 0 {
            self.values[0]
        } else if idx == n {
            self.values[n - 1] + self.terminal_slope * (x - self.xs[n - 1])
        } else {
            let (x0, x1) = (self.xs[idx - 1], self.xs[idx]);
            let (v0, v1) = (self.values[idx - 1], self.values[idx]);
            v0 + (v1 - v0) / (x1 - x0) * (x - x0)
        }
    }

    /// Right derivative at `x`.
    pub fn slope_at(&self, x: f64) -> f64 {
        self.linear_piece_at(x).1
    }

    /// Intercept and slope of the linear piece active just right of `x`.
    pub fn linear_piece_at(&self, x: f64) -> (f64, f64) {
        let n = self.xs.len();
        let idx = self.xs.partition_point(|&k| k <= x);
        if idx == 0 {
            (self.values[0], 0.0)
        } else if idx == n {
            let (xl, vl) = (self.xs[n - 1], self.values[n - 1]);
            (vl - self.terminal_slope * xl, self.terminal_slope)
        } else {
            let (x0, x1) = (self.xs[idx - 1], self.xs[idx]);
            let (v0, v1) = (self.values[idx - 1], self.values[idx]);
            let slope = (v1 - v0) / (x1 - x0);
            (v0 - slope * x0, slope)
        }
    }

    /// Slopes of consecutive pieces, starting with the flat left extension and ending
    /// with the terminal slope.
    pub fn slopes(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.xs.len() + 1);
        s.push(0.0);
        for i in 1..self.xs.len() {
            s.push((self.values[i] - self.values[i - 1]) / (self.xs[i] - self.xs[i - 1]));
        }
        s.push(self.terminal_slope);
        s
    }

    pub fn call_decomposition(&self) -> CallDecomposition {
        let slopes = self.slopes();
        let mut calls = Vec::new();
        let (cash, shares, first_kink) = if self.xs[0] == 0.0 {
            (self.values[0], slopes[1], 1)
        } else {
            (self.values[0], 0.0, 0)
        };
        for i in first_kink..self.xs.len() {
            let jump = slopes[i + 1] - slopes[i];
            if jump != 0.0 {
                calls.push((self.xs[i], jump));
            }
        }
        CallDecomposition { cash, shares, calls }
    }

    /// True when all slopes are non-decreasing.
    pub fn is_convex(&self) -> bool {
        self.slopes().windows(2).all(|w| w[1] >= w[0] - 1e-14)
    }

    /// True when the payoff is concave on `[0, ∞)`.
    pub fn is_concave(&self) -> bool {
        let s = self.slopes();
        let start = if self.xs[0] == 0.0 { 1 } else { 0 };
        s[start..].windows(2).all(|w| w[1] <= w[0] + 1e-14)
    }
}

fn check_strike(k: f64) -> Result<()> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("strike must be positive, got {k}")))
    }
}

/// Evaluates `p` at a nonnegative terminal price.
pub fn evaluate_payoff(p: &Payoff, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::invalid(format!("terminal price must be nonnegative, got {x}")));
    }
    Ok(p.eval(x))
}
