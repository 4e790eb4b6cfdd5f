use crate::error::{Error, Result};
use crate::market::MarketState;
use crate::pde::scheme::{uniform_levels, Boundary, Evolver};
use crate::pde::{LocalVolSurface, PdeGrid};

/// Distance of `vol` from a prior, as the value at `(t0, x0)` of
/// `U_t + ½σ²x²U_xx + r x U_x − U + (σ − σ0)² = 0`, `U(T, ·) = 0`.
///
/// The reaction coefficient is 1 regardless of the rate.
pub fn avellaneda_penalty(
    market: &MarketState,
    vol: &LocalVolSurface,
    prior: &LocalVolSurface,
    maturity: f64,
    grid: &PdeGrid,
) -> Result<f64> {
    let tau = maturity - market.t0;
    if !(tau > 0.0) {
        return Err(Error::invalid("penalty horizon must exceed t0"));
    }
    let sd = vol.max_vol().max(prior.max_vol()) * tau.sqrt();
    let lg = grid.log_grid(market.x0, sd, &[])?;
    let n = lg.len();
    let evolver = Evolver {
        grid: &lg,
        theta: grid.theta,
        rannacher: grid.rannacher,
        max_inner: 1,
        order: grid.spatial_order,
        nonnegative: true,
    };
    let mut value = 0.0;
    evolver.run(
        &uniform_levels(tau, grid.time_steps),
        vec![0.0; n],
        |s, _, k| {
            let t = maturity - s;
            let r = market.rate.rate_at(t);
            for j in 0..n {
                let sigma = vol.vol_log(t, lg.y[j]);
                let gap = sigma - prior.vol_log(t, lg.y[j]);
                k.a[j] = 0.5 * sigma * sigma;
                k.b[j] = r - k.a[j];
                k.c[j] = 1.0;
                k.src[j] = gap * gap;
            }
            false
        },
        |_| (Boundary::Local, Boundary::Local),
        |_, u| value = u[lg.spot_index],
    )?;
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skewed(shift: f64) -> LocalVolSurface {
        let xs: Vec<f64> = (0..31).map(|i| 40.0 + 5.0 * i as f64).collect();
        LocalVolSurface::from_fn(vec![0.0, 0.5, 1.0], xs, move |t, x| 0.2 + 0.05 * ((100.0 - x) / 25.0).tanh() + 0.02 * t + shift).unwrap()
    }

    #[test]
    fn zero_at_the_prior() {
        let mk = MarketState::flat(100.0, 0.02).unwrap();
        let g = PdeGrid::new(50, 80).unwrap();
        assert_eq!(avellaneda_penalty(&mk, &skewed(0.0), &skewed(0.0), 1.0, &g).unwrap(), 0.0);
    }

    #[test]
    fn constant_gap_solves_the_ode() {
        let mk = MarketState::flat(100.0, 0.0).unwrap();
        let g = PdeGrid::new(200, 80).unwrap();
        let c: f64 = 0.07;
        let k = avellaneda_penalty(&mk, &skewed(c), &skewed(0.0), 1.5, &g).unwrap();
        let exact = c * c * (1.0 - (-1.5f64).exp());
        assert!((k / exact - 1.0).abs() < 1e-5, "{k} vs {exact}");
    }

    #[test]
    fn quadratic_in_the_gap() {
        // Moving the prior keeps the diffusion fixed, so the source alone scales by four.
        let mk = MarketState::flat(100.0, 0.01).unwrap();
        let g = PdeGrid::new(60, 90).unwrap().with_log_bounds(3.7, 5.5).unwrap();
        let vol = skewed(0.0);
        let xs = vol.prices().to_vec();
        let prior = |scale: f64| {
            let v = vol.clone();
            LocalVolSurface::from_fn(vec![0.0, 0.5, 1.0], xs.clone(), move |t, x| v.vol(t, x) - scale * (0.03 + 0.02 * (x / 100.0).ln() + 0.01 * t)).unwrap()
        };
        let one = avellaneda_penalty(&mk, &vol, &prior(1.0), 1.0, &g).unwrap();
        let two = avellaneda_penalty(&mk, &vol, &prior(2.0), 1.0, &g).unwrap();
        assert!(one > 0.0);
        assert!((two / (4.0 * one) - 1.0).abs() < 1e-8, "{one} {two}");
    }
}
