//! Regression solution of backward equations: a linear driver reproduces the
//! discounted price, and the pointwise supremum of drivers dominates each one.

use voltcraft::analytic::{bs_call_price, BsParams};
use voltcraft::market::{MarketState, Payoff};
use voltcraft::mc::*;

fn main() -> voltcraft::Result<()> {
    let market = MarketState::flat(100.0, 0.05)?;
    let batch = simulate_paths(&market, &PathModel::gbm(0.2), &SimulationSpec::new(1.0, 50_000, 5).with_steps(50))?;
    let call = Payoff::call(100.0)?;

    let linear = solve_bsde(&batch, &call, &Driver::discount(0.05), 3)?;
    let exact = bs_call_price(&BsParams::new(100.0, 100.0, 1.0, 0.05, 0.2)?);
    println!("discount driver  {:.4} ± {:.4}  (closed form {exact:.4})", linear.y0, linear.se);

    // Borrowing at 7% and lending at 3%: the seller's price uses the worse rate.
    let members = vec![Driver::discount(0.03), Driver::discount(0.07)];
    for f in &members {
        println!("{f:?}: {:.4}", solve_bsde(&batch, &call, f, 3)?.y0);
    }
    let sup = solve_bsde(&batch, &call, &Driver::Sup(members), 3)?;
    println!("sup driver       {:.4}", sup.y0);
    Ok(())
}
