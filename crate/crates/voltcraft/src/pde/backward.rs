use super::scheme::{self, initial_values, log_curvature, uniform_levels, Boundary, Evolver, LogGrid, SolveStats};
use super::{LocalVolSurface, PdeGrid, VolBand};
use crate::error::{Error, Result};
use crate::market::{MarketState, Payoff};
use std::io::Write;

/// Value function `f(t, x)` on the solver lattice, earliest time first.
#[derive(Debug, Clone)]
pub struct PdeSolution {
    pub grid: PdeGrid,
    pub stats: SolveStats,
    times: Vec<f64>,
    log_prices: Vec<f64>,
    prices: Vec<f64>,
    values: Vec<Vec<f64>>,
    spot_index: usize,
}

impl PdeSolution {
    /// `f(t0, x0)`.
    pub fn price(&self) -> f64 {
        self.values[0][self.spot_index]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn spot_index(&self) -> usize {
        self.spot_index
    }

    /// Nodal values at time index `k`.
    pub fn values(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    /// Interpolated value at time index `k` and price `x`.
    pub fn value_at(&self, k: usize, x: f64) -> f64 {
        scheme::interpolate_uniform(&self.log_prices, &self.values[k], x.ln())
    }

    /// Hedge ratio `∂f/∂x` at an interior node, by central differencing.
    pub fn delta(&self, k: usize, j: usize) -> f64 {
        let j = j.clamp(1, self.prices.len() - 2);
        let u = &self.values[k];
        let dy = self.log_prices[j + 1] - self.log_prices[j - 1];
        (u[j + 1] - u[j - 1]) / dy / self.prices[j]
    }

    /// `∂f/∂x` at `(t0, x0)`.
    pub fn spot_delta(&self) -> f64 {
        self.delta(0, self.spot_index)
    }

    /// Writes `t,x,value` rows for every lattice node.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "x", "value"])?;
        for (t, row) in self.times.iter().zip(&self.values) {
            for (x, v) in self.prices.iter().zip(row) {
                w.write_record([t.to_string(), x.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn check_maturity(market: &MarketState, maturity: f64) -> Result<f64> {
    let tau = maturity - market.t0;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("maturity {maturity} must be after t0 = {}", market.t0)));
    }
    Ok(tau)
}

/// Shared backward solve; `vol(t, y, curvature)` picks the diffusion at each node.
fn backward_solve<V>(
    market: &MarketState,
    payoff: &Payoff,
    maturity: f64,
    grid: &PdeGrid,
    sigma_max: f64,
    vol: V,
    nonlinear: bool,
) -> Result<PdeSolution>
where
    V: Fn(f64, f64, f64) -> f64,
{
    let tau = check_maturity(market, maturity)?;
    let lg: LogGrid = grid.log_grid(market.x0, sigma_max * tau.sqrt(), payoff.breakpoints())?;
    let n = lg.len();
    let levels = uniform_levels(tau, grid.time_steps);
    let m = grid.time_steps;
    let mut values = vec![Vec::new(); m + 1];
    let evolver = Evolver {
        grid: &lg,
        theta: grid.theta,
        rannacher: grid.rannacher,
        max_inner: grid.max_policy_iterations,
        order: grid.spatial_order,
        nonnegative: payoff.is_nonnegative(),
    };
    let (lo_piece, hi_piece) = (payoff.linear_piece_at(lg.x[0]), payoff.linear_piece_at(lg.x[n - 1]));
    let stats = evolver.run(
        &levels,
        initial_values(&lg, payoff),
        |s, state, k| {
            let t = maturity - s;
            let r = market.rate.rate_at(t);
            // Curvatures below round-off of the stencil count as zero.
            let noise = if nonlinear {
                64.0 * f64::EPSILON * state.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / (lg.dy * lg.dy)
            } else {
                0.0
            };
            for j in 0..n {
                let curvature = if nonlinear && j > 0 && j < n - 1 {
                    let c = log_curvature(state, j, lg.dy, grid.spatial_order);
                    if c.abs() <= noise { 0.0 } else { c }
                } else {
                    0.0
                };
                let sigma = vol(t, lg.y[j], curvature);
                k.a[j] = 0.5 * sigma * sigma;
                k.b[j] = r - k.a[j];
                k.c[j] = r;
                k.src[j] = 0.0;
            }
            nonlinear
        },
        |s| {
            let t = maturity - s;
            let df = market.rate.discount(t, maturity);
            (
                Boundary::Value(lo_piece.0 * df + lo_piece.1 * lg.x[0]),
                Boundary::Value(hi_piece.0 * df + hi_piece.1 * lg.x[n - 1]),
            )
        },
        |k, u| {
            values[m - k] = if k == 0 {
                lg.x.iter().map(|&x| payoff.eval(x)).collect()
            } else {
                u.to_vec()
            }
        },
    )?;
    let times = levels.iter().rev().map(|s| maturity - s).collect();
    Ok(PdeSolution {
        grid: grid.clone(),
        stats,
        times,
        log_prices: lg.y.clone(),
        prices: lg.x.clone(),
        values,
        spot_index: lg.spot_index,
    })
}

/// Backward pricing equation under local volatility, from `f(T, x) = h(x)` to `t0`.
pub fn solve_backward_pricing(
    market: &MarketState,
    vol: &LocalVolSurface,
    payoff: &Payoff,
    maturity: f64,
    grid: &PdeGrid,
) -> Result<PdeSolution> {
    backward_solve(
        market,
        payoff,
        maturity,
        grid,
        vol.max_vol(),
        |t, y, _| vol.vol_log(t, y),
        false,
    )
}

/// Upper-volatility (Black-Scholes-Barenblatt) equation.
///
/// Each node takes the band's upper volatility where the discrete `x² f_xx` is
/// nonnegative and the lower one elsewhere; the implicit choice is iterated to a
/// fixed point within each step.
pub fn solve_bsb(
    market: &MarketState,
    band: &VolBand,
    payoff: &Payoff,
    maturity: f64,
    grid: &PdeGrid,
) -> Result<PdeSolution> {
    let (lower, upper) = (band.lower(), band.upper());
    let mut sol = backward_solve(
        market,
        payoff,
        maturity,
        grid,
        band.sigma_max(),
        |t, y, curvature| {
            if curvature >= 0.0 {
                upper.vol_log(t, y)
            } else {
                lower.vol_log(t, y)
            }
        },
        true,
    )?;
    sol.stats.scheme.push_str(", upper-volatility policy");
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{bs_call_price, BsParams};

    fn market() -> MarketState {
        MarketState::flat(100.0, 0.0).unwrap()
    }

    #[test]
    fn constant_payoff_is_preserved() {
        let vol = LocalVolSurface::from_fn(vec![0.0, 1.0], vec![50.0, 100.0, 200.0], |t, x| 0.1 + 0.1 * t + x / 1000.0).unwrap();
        let sol = solve_backward_pricing(&market(), &vol, &Payoff::constant(7.5).unwrap(), 1.0, &PdeGrid::new(50, 101).unwrap()).unwrap();
        for k in 0..sol.times().len() {
            for v in sol.values(k) {
                assert!((v - 7.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_payoff_stays_linear() {
        let vol = LocalVolSurface::flat(0.3).unwrap();
        let sol = solve_backward_pricing(&market(), &vol, &Payoff::forward(100.0).unwrap(), 1.0, &PdeGrid::new(200, 401).unwrap()).unwrap();
        assert!(sol.price().abs() < 1e-3, "{}", sol.price());
        for (x, v) in sol.prices().iter().zip(sol.values(0)) {
            assert!((v - (x - 100.0)).abs() < 1e-3 * x.max(100.0));
        }
    }

    #[test]
    fn call_matches_closed_form() {
        let vol = LocalVolSurface::flat(0.2).unwrap();
        let sol = solve_backward_pricing(&market(), &vol, &Payoff::call(100.0).unwrap(), 1.0, &PdeGrid::new(400, 400).unwrap()).unwrap();
        let exact = bs_call_price(&BsParams::new(100.0, 100.0, 1.0, 0.0, 0.2).unwrap());
        assert!((sol.price() / exact - 1.0).abs() < 1e-3);
        assert!((sol.spot_delta() - 0.539_827_837_277_029).abs() < 1e-3);
        assert_eq!(sol.times()[0], 0.0);
        assert_eq!(*sol.times().last().unwrap(), 1.0);
    }

    #[test]
    fn rejects_past_maturity() {
        let vol = LocalVolSurface::flat(0.2).unwrap();
        let err = solve_backward_pricing(&market(), &vol, &Payoff::call(100.0).unwrap(), 0.0, &PdeGrid::new(10, 11).unwrap());
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn csv_export_has_all_nodes() {
        let vol = LocalVolSurface::flat(0.2).unwrap();
        let sol = solve_backward_pricing(&market(), &vol, &Payoff::call(100.0).unwrap(), 1.0, &PdeGrid::new(4, 11).unwrap()).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x,value\n"));
        assert_eq!(text.lines().count(), 1 + 5 * 11);
    }

    #[test]
    fn degenerate_band_is_bit_identical() {
        let grid = PdeGrid::new(100, 151).unwrap();
        let payoff = Payoff::butterfly(90.0, 100.0, 110.0).unwrap();
        let a = solve_backward_pricing(&market(), &LocalVolSurface::flat(0.2).unwrap(), &payoff, 1.0, &grid).unwrap();
        let b = solve_bsb(&market(), &VolBand::constant(0.2, 0.2).unwrap(), &payoff, 1.0, &grid).unwrap();
        for k in 0..a.times().len() {
            assert_eq!(a.values(k), b.values(k));
        }
    }
}
