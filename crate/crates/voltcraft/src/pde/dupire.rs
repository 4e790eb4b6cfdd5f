use super::scheme::{Boundary, Coefs, Evolver};
use super::{LocalVolSurface, PdeGrid, SolveStats};
use crate::calibration::PriceSurface;
use crate::error::{Error, Result};
use crate::market::{MarketState, Payoff};

/// Forward (Dupire) equation in maturity and strike.
///
/// Starting from `C(t0, K) = (x0 − K)^+`, marches
/// `C_T = ½σ²(T,K) K² C_KK − r K C_K` forward and records the call prices at each
/// requested maturity on every interior strike node. A maturity equal to `t0`
/// returns the initial condition exactly.
pub fn solve_dupire_forward(
    market: &MarketState,
    vol: &LocalVolSurface,
    maturities: &[f64],
    grid: &PdeGrid,
) -> Result<PriceSurface> {
    Ok(forward_solve(market, vol, maturities, grid)?.0)
}

fn forward_solve(
    market: &MarketState,
    vol: &LocalVolSurface,
    maturities: &[f64],
    grid: &PdeGrid,
) -> Result<(PriceSurface, SolveStats)> {
    if maturities.is_empty() {
        return Err(Error::invalid("at least one maturity is required"));
    }
    if maturities.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("maturities must be strictly increasing"));
    }
    if !(maturities[0] >= market.t0) {
        return Err(Error::invalid("maturities must not precede t0"));
    }
    let t0 = market.t0;
    let x0 = market.x0;
    let horizon = maturities[maturities.len() - 1] - t0;
    let sd = vol.max_vol() * horizon.max(1e-8).sqrt();
    let lg = grid.log_grid(x0, sd, &[x0])?;
    let n = lg.len();

    // Evolution levels with every maturity on a level.
    let dt_target = horizon / grid.time_steps as f64;
    let mut levels = vec![0.0];
    let mut record_at = Vec::with_capacity(maturities.len());
    for &t in maturities {
        let target = t - t0;
        let prev = *levels.last().unwrap();
        if target > prev {
            let steps = (((target - prev) / dt_target) - 1e-9).ceil().max(1.0) as usize;
            for k in 1..=steps {
                levels.push(if k == steps { target } else { prev + (target - prev) * k as f64 / steps as f64 });
            }
        }
        record_at.push(levels.len() - 1);
    }

    // As a function of strike, (x0 − K)^+ is a put payoff with strike x0.
    let initial = Payoff::put(x0)?;
    let intrinsic: Vec<f64> = lg.x.iter().map(|&k| initial.eval(k)).collect();
    let init = super::scheme::initial_values(&lg, &initial);

    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); maturities.len()];
    let evolver = Evolver {
        grid: &lg,
        theta: grid.theta,
        rannacher: grid.rannacher,
        max_inner: 1,
        order: grid.spatial_order,
        nonnegative: true,
    };
    let stats = evolver.run(
        &levels,
        init,
        |s: f64, _state: &[f64], k: &mut Coefs| {
            let t = t0 + s;
            let r = market.rate.rate_at(t);
            for j in 0..n {
                let sigma = vol.vol_log(t, lg.y[j]);
                k.a[j] = 0.5 * sigma * sigma;
                k.b[j] = -k.a[j] - r;
                k.c[j] = 0.0;
                k.src[j] = 0.0;
            }
            false
        },
        |s| {
            let df = market.rate.discount(t0, t0 + s);
            (
                Boundary::Value(x0 - lg.x[0] * df),
                Boundary::Value((x0 - lg.x[n - 1] * df).max(0.0)),
            )
        },
        |level, u| {
            for (i, &at) in record_at.iter().enumerate() {
                if at == level {
                    rows[i] = if level == 0 { intrinsic.clone() } else { u.to_vec() };
                }
            }
        },
    )?;
    let strikes = lg.x[1..n - 1].to_vec();
    let values = rows.into_iter().map(|r| r[1..n - 1].to_vec()).collect();
    Ok((PriceSurface::new(market.clone(), maturities.to_vec(), strikes, values)?, stats))
}

/// Discretized state-price density `q(t0, x0, T, ·)` on the strike grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDensity {
    pub prices: Vec<f64>,
    /// Density per unit price; includes discounting, so it integrates to the discount factor.
    pub density: Vec<f64>,
    /// Quadrature weights `ΔK_j`.
    pub weights: Vec<f64>,
    pub warnings: Vec<String>,
}

impl StateDensity {
    pub fn total_mass(&self) -> f64 {
        self.density.iter().zip(&self.weights).map(|(q, w)| q * w).sum()
    }

    /// `Σ h(y_j) q_j Δy_j`.
    pub fn expectation<F: Fn(f64) -> f64>(&self, h: F) -> f64 {
        self.prices
            .iter()
            .zip(self.density.iter().zip(&self.weights))
            .map(|(&y, (q, w))| h(y) * q * w)
            .sum()
    }

    /// Mass carried by negative density values.
    pub fn negative_mass(&self) -> f64 {
        self.density
            .iter()
            .zip(&self.weights)
            .filter(|(q, _)| **q < 0.0)
            .map(|(q, w)| -q * w)
            .sum()
    }
}

/// State-price density by twice differentiating the Dupire forward surface in strike.
pub fn pricing_kernel(market: &MarketState, vol: &LocalVolSurface, maturity: f64, grid: &PdeGrid) -> Result<StateDensity> {
    if !(maturity > market.t0) {
        return Err(Error::invalid("pricing kernel needs a maturity after t0"));
    }
    let (surface, _) = forward_solve(market, vol, &[maturity], grid)?;
    let k = surface.strikes();
    let c = surface.row(0);
    let n = k.len();
    if n < 3 {
        return Err(Error::invalid("pricing kernel needs at least five space nodes"));
    }
    let mut prices = Vec::with_capacity(n - 2);
    let mut density = Vec::with_capacity(n - 2);
    let mut weights = Vec::with_capacity(n - 2);
    for j in 1..n - 1 {
        let dk = k[j + 1].ln() - k[j].ln();
        let c_k = (c[j + 1] - c[j - 1]) / (2.0 * dk);
        let c_kk = (c[j + 1] - 2.0 * c[j] + c[j - 1]) / (dk * dk);
        prices.push(k[j]);
        density.push((c_kk - c_k) / (k[j] * k[j]));
        weights.push(0.5 * (k[j + 1] - k[j - 1]));
    }
    let mut out = StateDensity {
        prices,
        density,
        weights,
        warnings: Vec::new(),
    };
    let neg = out.negative_mass();
    if neg > 1e-6 {
        out.warnings.push(format!("negative density mass {neg:e} exceeds 1e-6"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{bs_call_price, BsParams};

    #[test]
    fn initial_row_is_exact_intrinsic() {
        let m = MarketState::flat(100.0, 0.0).unwrap();
        let s = solve_dupire_forward(&m, &LocalVolSurface::flat(0.2).unwrap(), &[0.0, 0.5], &PdeGrid::new(50, 101).unwrap()).unwrap();
        for (k, c) in s.strikes().iter().zip(s.row(0)) {
            assert_eq!(*c, (100.0 - k).max(0.0));
        }
    }

    #[test]
    fn flat_vol_matches_closed_form() {
        let m = MarketState::flat(100.0, 0.0).unwrap();
        let s = solve_dupire_forward(&m, &LocalVolSurface::flat(0.2).unwrap(), &[0.5, 1.0], &PdeGrid::new(400, 400).unwrap())
            .unwrap();
        for (i, &t) in s.maturities().iter().enumerate() {
            for &k in &[80.0, 90.0, 100.0, 110.0, 125.0] {
                let exact = bs_call_price(&BsParams::new(100.0, k, t, 0.0, 0.2).unwrap());
                let pde = s.call_price_at(i, k);
                assert!((pde / exact - 1.0).abs() < 1e-3, "T={t} K={k}: {pde} vs {exact}");
            }
        }
    }

    #[test]
    fn rejects_unsorted_maturities() {
        let m = MarketState::flat(100.0, 0.0).unwrap();
        let v = LocalVolSurface::flat(0.2).unwrap();
        assert!(solve_dupire_forward(&m, &v, &[1.0, 0.5], &PdeGrid::new(10, 21).unwrap()).is_err());
        assert!(solve_dupire_forward(&m, &v, &[], &PdeGrid::new(10, 21).unwrap()).is_err());
    }

    #[test]
    fn kernel_integrates_to_discount() {
        let m = MarketState::flat(100.0, 0.03).unwrap();
        let q = pricing_kernel(&m, &LocalVolSurface::flat(0.25).unwrap(), 1.0, &PdeGrid::new(200, 401).unwrap()).unwrap();
        assert!((q.total_mass() - (-0.03f64).exp()).abs() < 1e-4);
        assert!(q.warnings.is_empty());
    }
}
