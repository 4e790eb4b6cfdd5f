use super::paths::{simulate_paths, PathBatch, PathModel, SimulationSpec};
use crate::error::{Error, Result};
use crate::market::{MarketState, Payoff};
use crate::numerics::norm_inv_cdf;
use serde::Serialize;

/// Sample mean with its standard error and a normal confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
    pub ci_low: f64,
    pub ci_high: f64,
    #[serde(skip)]
    pub confidence: f64,
}

impl McEstimate {
    /// Estimate from i.i.d. samples at 95% confidence.
    pub fn from_samples(samples: &[f64]) -> Self {
        Self::from_units(samples, samples.len(), 0.95)
    }

    /// `units` are the independent draws; `n` is the number of paths behind them.
    fn from_units(units: &[f64], n: usize, confidence: f64) -> Self {
        let k = units.len() as f64;
        let mean = units.iter().sum::<f64>() / k;
        let var = if units.len() > 1 {
            units.iter().map(|u| (u - mean) * (u - mean)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        let se = (var / k).sqrt();
        let z = norm_inv_cdf(0.5 + 0.5 * confidence);
        McEstimate {
            mean,
            se,
            n,
            ci_low: mean - z * se,
            ci_high: mean + z * se,
            confidence,
        }
    }

    /// Same estimate at another confidence level.
    pub fn with_confidence(self, confidence: f64) -> Self {
        let z = norm_inv_cdf(0.5 + 0.5 * confidence);
        McEstimate {
            ci_low: self.mean - z * self.se,
            ci_high: self.mean + z * self.se,
            confidence,
            ..self
        }
    }
}

/// Averages antithetic pairs so that the standard error uses independent units.
fn batch_estimate(batch: &PathBatch, samples: &[f64]) -> McEstimate {
    if batch.is_antithetic() {
        let pairs: Vec<f64> = samples.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        McEstimate::from_units(&pairs, samples.len(), 0.95)
    } else {
        McEstimate::from_units(samples, samples.len(), 0.95)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variance {
    #[default]
    Plain,
    /// Discounted terminal price as control, with known mean `x0`.
    ControlVariate,
}

fn horizon(batch: &PathBatch) -> f64 {
    *batch.times().last().expect("nonempty time grid")
}

/// Discounted mean payoff over the batch.
pub fn mc_price(batch: &PathBatch, payoff: &Payoff, variance: Variance) -> Result<McEstimate> {
    if batch.len() < 2 {
        return Err(Error::invalid("an estimate needs at least two paths"));
    }
    let df = batch.market().discount_to(horizon(batch));
    let terminals = batch.terminals();
    let y: Vec<f64> = terminals.iter().map(|&x| df * payoff.eval(x)).collect();
    match variance {
        Variance::Plain => Ok(batch_estimate(batch, &y)),
        Variance::ControlVariate => {
            if !batch.model().is_risk_neutral() {
                return Err(Error::Unsupported("control variate needs the market rate as drift".into()));
            }
            let c: Vec<f64> = terminals.iter().map(|&x| df * x).collect();
            let n = y.len() as f64;
            let (my, mc) = (y.iter().sum::<f64>() / n, c.iter().sum::<f64>() / n);
            let cov: f64 = y.iter().zip(&c).map(|(a, b)| (a - my) * (b - mc)).sum();
            let var: f64 = c.iter().map(|b| (b - mc) * (b - mc)).sum();
            let beta = if var > 0.0 { cov / var } else { 0.0 };
            let x0 = batch.market().x0;
            let adjusted: Vec<f64> = y.iter().zip(&c).map(|(a, b)| a - beta * (b - x0)).collect();
            Ok(batch_estimate(batch, &adjusted))
        }
    }
}

/// Claim paid at the batch horizon.
#[derive(Debug, Clone, PartialEq)]
pub enum TerminalClaim {
    Payoff(Payoff),
    /// Pays one when the terminal price exceeds the strike.
    Digital { strike: f64 },
}

impl TerminalClaim {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TerminalClaim::Payoff(p) => p.eval(x),
            TerminalClaim::Digital { strike } => {
                if x > *strike {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl From<Payoff> for TerminalClaim {
    fn from(p: Payoff) -> Self {
        TerminalClaim::Payoff(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaMethod {
    /// Differentiates the payoff along each path: `h'(X_T)·X_T/x0`.
    Pathwise,
    /// Weights the payoff by the score `W_T/(x0·σ·T)`.
    LikelihoodRatio,
}

/// Spot delta from a risk-neutral geometric Brownian batch.
pub fn mc_delta(batch: &PathBatch, claim: &TerminalClaim, method: DeltaMethod) -> Result<McEstimate> {
    let PathModel::Gbm { sigma, mu: None } = *batch.model() else {
        return Err(Error::Unsupported(
            "closed-form delta weights need risk-neutral geometric Brownian paths; use mc_delta_bump".into(),
        ));
    };
    if batch.len() < 2 {
        return Err(Error::invalid("an estimate needs at least two paths"));
    }
    let x0 = batch.market().x0;
    let tau = batch.spec.maturity;
    let df = batch.market().discount_to(horizon(batch));
    let samples: Vec<f64> = match method {
        DeltaMethod::Pathwise => {
            let TerminalClaim::Payoff(p) = claim else {
                return Err(Error::Unsupported(
                    "pathwise delta is biased for discontinuous payoffs; use the likelihood ratio".into(),
                ));
            };
            (0..batch.len())
                .map(|i| {
                    let x = batch.terminal(i);
                    df * p.slope_at(x) * x / x0
                })
                .collect()
        }
        DeltaMethod::LikelihoodRatio => {
            if sigma == 0.0 {
                return Err(Error::invalid("likelihood-ratio weights need positive volatility"));
            }
            (0..batch.len())
                .map(|i| {
                    let w: f64 = batch.increments(i).iter().sum();
                    df * claim.eval(batch.terminal(i)) * w / (x0 * sigma * tau)
                })
                .collect()
        }
    };
    Ok(batch_estimate(batch, &samples))
}

/// Central bump-and-revalue delta with common random numbers; works for any model.
pub fn mc_delta_bump(
    market: &MarketState,
    model: &PathModel,
    spec: &SimulationSpec,
    claim: &TerminalClaim,
    rel_bump: f64,
) -> Result<McEstimate> {
    if !(rel_bump > 0.0 && rel_bump < 1.0) {
        return Err(Error::invalid(format!("relative bump must lie in (0, 1), got {rel_bump}")));
    }
    let h = rel_bump * market.x0;
    let bumped = |x0: f64| -> Result<PathBatch> {
        let mk = MarketState::new(market.t0, x0, market.rate.clone())?;
        simulate_paths(&mk, model, spec)
    };
    let (up, down) = (bumped(market.x0 + h)?, bumped(market.x0 - h)?);
    let df = market.discount_to(horizon(&up));
    let samples: Vec<f64> = (0..up.len())
        .map(|i| df * (claim.eval(up.terminal(i)) - claim.eval(down.terminal(i))) / (2.0 * h))
        .collect();
    Ok(batch_estimate(&up, &samples))
}
