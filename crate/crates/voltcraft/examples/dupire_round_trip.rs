//! Generates call prices from a skewed local volatility with the forward equation,
//! then recovers the volatility from the prices.

use voltcraft::calibration::dupire_local_vol;
use voltcraft::market::MarketState;
use voltcraft::pde::{solve_dupire_forward, LocalVolSurface, PdeGrid};

fn skew(t: f64, x: f64) -> f64 {
    0.2 + 0.1 * ((100.0 - x) / 20.0).tanh() + 0.05 * t
}

fn main() -> voltcraft::Result<()> {
    let market = MarketState::flat(100.0, 0.0)?;
    let xs: Vec<f64> = (0..201).map(|i| 20.0 * 50f64.powf(i as f64 / 200.0)).collect();
    let truth = LocalVolSurface::from_fn(vec![0.0, 1.0, 2.0], xs, skew)?;

    let maturities: Vec<f64> = (0..=20).map(|i| 0.25 + 0.05 * i as f64).collect();
    let prices = solve_dupire_forward(&market, &truth, &maturities, &PdeGrid::new(400, 400)?)?.restrict_strikes(70.0, 140.0)?;
    let out = dupire_local_vol(&prices)?;
    println!("{} nodes flagged invalid", out.invalid_nodes.len());

    let lv = &out.surface;
    for i in (2..lv.times().len() - 2).step_by(6) {
        let t = lv.times()[i];
        for j in (4..lv.prices().len() - 4).step_by(lv.prices().len() / 6) {
            let x = lv.prices()[j];
            println!("t={t:.2} x={x:7.2}  recovered {:.4}  true {:.4}", lv.knot(i, j), skew(t, x));
        }
    }
    Ok(())
}
