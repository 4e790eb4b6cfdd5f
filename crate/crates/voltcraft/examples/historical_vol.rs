//! Historical volatility and realized quadratic variation of a simulated daily path.

use voltcraft::market::{historical_volatility, realized_quadratic_variation, MarketState, PricePath};
use voltcraft::mc::{simulate_paths, PathModel, SimulationSpec};

fn main() -> voltcraft::Result<()> {
    let spec = SimulationSpec::new(2.0, 1, 17).with_steps(500);
    let batch = simulate_paths(&MarketState::flat(100.0, 0.0)?, &PathModel::gbm(0.3), &spec)?;
    let path = PricePath::new(batch.times().to_vec(), batch.path(0).to_vec())?;
    println!("estimated vol {:.4} (true 0.3)", historical_volatility(&path, 2.0 / 500.0)?);
    println!("realized quadratic variation {:.2}", realized_quadratic_variation(&path));
    Ok(())
}
