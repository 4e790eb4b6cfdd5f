//! Call delta by pathwise and likelihood-ratio estimators, digital delta by
//! likelihood ratio, and a bump delta under stochastic volatility.

use voltcraft::analytic::{bs_delta, BsParams};
use voltcraft::market::{MarketState, Payoff};
use voltcraft::mc::*;

fn main() -> voltcraft::Result<()> {
    let market = MarketState::flat(100.0, 0.0)?;
    let spec = SimulationSpec::new(1.0, 100_000, 3).with_steps(1);
    let batch = simulate_paths(&market, &PathModel::gbm(0.2), &spec)?;
    let call = TerminalClaim::from(Payoff::call(100.0)?);
    println!("closed form       {:.5}", bs_delta(&BsParams::new(100.0, 100.0, 1.0, 0.0, 0.2)?));
    for (name, m) in [("pathwise", DeltaMethod::Pathwise), ("likelihood ratio", DeltaMethod::LikelihoodRatio)] {
        let d = mc_delta(&batch, &call, m)?;
        println!("{name:17} {:.5} ± {:.5}", d.mean, d.se);
    }
    let digital = mc_delta(&batch, &TerminalClaim::Digital { strike: 100.0 }, DeltaMethod::LikelihoodRatio)?;
    println!("digital (LR)      {:.5} ± {:.5}", digital.mean, digital.se);

    let sv = PathModel::StochasticVol(StochasticVol { y0: 0.2, kappa: 2.0, theta: 0.2, nu: 0.5, rho: -0.6 });
    let d = mc_delta_bump(&market, &sv, &SimulationSpec::new(1.0, 20_000, 3).with_steps(50), &call, 0.01)?;
    println!("stoch-vol bump    {:.5} ± {:.5}", d.mean, d.se);
    Ok(())
}
