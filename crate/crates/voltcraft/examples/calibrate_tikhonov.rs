//! Fits a 5×5 knot local-volatility surface to synthetic quotes with gradient
//! regularization, then prints the fit.

use voltcraft::calibration::{calibrate_tikhonov, model_prices, CalibrationProblem};
use voltcraft::market::{MarketState, OptionQuote, QuoteSurface};
use voltcraft::pde::{LocalVolSurface, PdeGrid};

fn main() -> voltcraft::Result<()> {
    let market = MarketState::flat(100.0, 0.0)?;
    let times = vec![0.0, 0.25, 0.5, 1.0, 1.5];
    let prices = vec![70.0, 85.0, 100.0, 115.0, 130.0];
    let truth = LocalVolSurface::from_fn(times.clone(), prices.clone(), |t, x| {
        0.2 + 0.08 * ((100.0 - x) / 25.0).tanh() + 0.03 * t
    })?;
    let initial = LocalVolSurface::from_fn(times, prices, |_, _| 0.2)?;

    let grid: Vec<OptionQuote> = [0.25, 0.5, 1.0, 1.5]
        .iter()
        .flat_map(|&t| [85.0, 95.0, 100.0, 105.0, 115.0].map(|k| OptionQuote::call(t, k, 0.0)))
        .collect();
    let probe = CalibrationProblem::new(QuoteSurface::new(market.clone(), grid.clone())?, initial.clone())?;
    let quotes = grid
        .iter()
        .zip(model_prices(&probe, &truth)?)
        .map(|(q, p)| OptionQuote::call(q.maturity, q.strike, p))
        .collect();

    let problem = CalibrationProblem::new(QuoteSurface::new(market, quotes)?, initial)?
        .with_alpha(1e-5)?
        .with_grid(PdeGrid::new(60, 120)?)
        .with_max_iterations(200);
    let report = calibrate_tikhonov(&problem)?;
    println!("iterations {}  converged {}  misfit {:.3e}", report.iterations, report.converged, report.final_g);
    for r in report.residuals.iter().step_by(4) {
        println!("T={:.2} K={:6.1}  model {:.5}  market {:.5}", r.maturity, r.strike, r.model, r.market);
    }
    Ok(())
}
