use super::paths::{simulate_paths, PathModel, SimulationSpec};
use super::McEstimate;
use crate::analytic::{bs_call_price, bs_delta, BsParams};
use crate::error::{Error, Result};
use crate::market::{MarketState, Payoff};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub struct HedgeSpec {
    pub sigma: f64,
    pub maturity: f64,
    pub rebalances: usize,
    pub paths: usize,
    pub seed: u64,
    /// Real-world drift of the simulated price; `None` uses the market rate.
    pub drift: Option<f64>,
}

impl HedgeSpec {
    pub fn new(sigma: f64, maturity: f64, rebalances: usize, paths: usize, seed: u64) -> Self {
        HedgeSpec {
            sigma,
            maturity,
            rebalances,
            paths,
            seed,
            drift: None,
        }
    }
}

/// Terminal hedging errors `V_T − h(X_T)` of a discretely rebalanced delta hedge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HedgeExperiment {
    pub rebalances: usize,
    pub initial_value: f64,
    pub mean: f64,
    pub std: f64,
    pub mean_se: f64,
    #[serde(skip)]
    pub errors: Vec<f64>,
}

/// Starts from the Black-Scholes value and holds the Black-Scholes delta between
/// rebalancing dates, with cash accruing at the market rate.
pub fn simulate_delta_hedge(market: &MarketState, payoff: &Payoff, spec: &HedgeSpec) -> Result<HedgeExperiment> {
    if spec.rebalances == 0 || spec.paths < 2 {
        return Err(Error::invalid("hedging needs at least one rebalance and two paths"));
    }
    let model = PathModel::Gbm {
        sigma: spec.sigma,
        mu: spec.drift,
    };
    let sim = SimulationSpec::new(spec.maturity, spec.paths, spec.seed).with_steps(spec.rebalances);
    let batch = simulate_paths(market, &model, &sim)?;
    let times = batch.times().to_vec();
    let horizon = *times.last().expect("nonempty time grid");
    let decomposition = payoff.call_decomposition();

    let params = |x: f64, t: f64| -> BsParams {
        let tau = horizon - t;
        let rate = if tau > 0.0 {
            market.rate.integral(t, horizon) / tau
        } else {
            market.rate.rate_at(t)
        };
        BsParams {
            spot: x,
            strike: 1.0,
            tau,
            rate,
            vol: spec.sigma,
        }
    };
    let value = |p: &BsParams| -> f64 {
        decomposition.cash * (-p.rate * p.tau).exp()
            + decomposition.shares * p.spot
            + decomposition
                .calls
                .iter()
                .map(|&(k, w)| if k == 0.0 { w * p.spot } else { w * bs_call_price(&p.with_strike(k)) })
                .sum::<f64>()
    };
    let delta = |p: &BsParams| -> f64 {
        decomposition.shares
            + decomposition
                .calls
                .iter()
                .map(|&(k, w)| if k == 0.0 { w } else { w * bs_delta(&p.with_strike(k)) })
                .sum::<f64>()
    };

    let v0 = value(&params(market.x0, times[0]));
    let growth: Vec<f64> = times.windows(2).map(|w| market.rate.integral(w[0], w[1]).exp()).collect();
    let errors: Vec<f64> = (0..batch.len())
        .into_par_iter()
        .map(|i| {
            let xs = batch.path(i);
            let mut v = v0;
            for k in 0..spec.rebalances {
                let d = delta(&params(xs[k], times[k]));
                v = (v - d * xs[k]) * growth[k] + d * xs[k + 1];
            }
            v - payoff.eval(xs[spec.rebalances])
        })
        .collect();
    let est = McEstimate::from_samples(&errors);
    let std = est.se * (errors.len() as f64).sqrt();
    Ok(HedgeExperiment {
        rebalances: spec.rebalances,
        initial_value: v0,
        mean: est.mean,
        std,
        mean_se: est.se,
        errors,
    })
}
