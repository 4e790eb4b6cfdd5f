//! Prices one call three ways: closed form, PDE and Monte Carlo.

use voltcraft::analytic::{bs_call_price, bs_delta, BsParams};
use voltcraft::market::{MarketState, Payoff};
use voltcraft::mc::{mc_price, simulate_paths, PathModel, SimulationSpec, Variance};
use voltcraft::pde::{solve_backward_pricing, LocalVolSurface, PdeGrid};

fn main() -> voltcraft::Result<()> {
    let (spot, strike, maturity, rate, vol) = (100.0, 105.0, 1.0, 0.03, 0.25);
    let market = MarketState::flat(spot, rate)?;
    let call = Payoff::call(strike)?;

    let params = BsParams::new(spot, strike, maturity, rate, vol)?;
    println!("closed form  {:.6}  delta {:.6}", bs_call_price(&params), bs_delta(&params));

    let pde = solve_backward_pricing(&market, &LocalVolSurface::flat(vol)?, &call, maturity, &PdeGrid::new(200, 400)?)?;
    println!("pde          {:.6}  delta {:.6}", pde.price(), pde.spot_delta());

    let spec = SimulationSpec::new(maturity, 200_000, 1).with_steps(1).with_antithetic(true);
    let batch = simulate_paths(&market, &PathModel::gbm(vol), &spec)?;
    let est = mc_price(&batch, &call, Variance::ControlVariate)?;
    println!("monte carlo  {:.6}  ± {:.6}", est.mean, est.se);
    Ok(())
}
