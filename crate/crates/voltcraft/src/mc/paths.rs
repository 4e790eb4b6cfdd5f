use crate::error::{Error, Result};
use crate::market::MarketState;
use crate::numerics::norm_inv_cdf;
use crate::pde::LocalVolSurface;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::Write;

/// Two-factor model `dX = X(r dt + Y dW¹)`, `dY = κ(θ − Y)dt + ν Y dW²`, `d⟨W¹, W²⟩ = ρ dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticVol {
    pub y0: f64,
    pub kappa: f64,
    pub theta: f64,
    /// Volatility of volatility, proportional to `Y` so that `Y` stays positive.
    pub nu: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathModel {
    /// Geometric Brownian motion; `mu: None` uses the market rate as drift.
    Gbm { sigma: f64, mu: Option<f64> },
    LocalVol(LocalVolSurface),
    StochasticVol(StochasticVol),
}

impl PathModel {
    pub fn gbm(sigma: f64) -> Self {
        PathModel::Gbm { sigma, mu: None }
    }

    fn validate(&self) -> Result<()> {
        match self {
            PathModel::Gbm { sigma, mu } => {
                if !(*sigma >= 0.0 && sigma.is_finite()) {
                    return Err(Error::invalid(format!("volatility must be nonnegative, got {sigma}")));
                }
                if mu.is_some_and(|m| !m.is_finite()) {
                    return Err(Error::invalid("drift must be finite"));
                }
            }
            PathModel::LocalVol(_) => {}
            PathModel::StochasticVol(p) => {
                if !(p.rho.abs() <= 1.0) {
                    return Err(Error::invalid(format!("correlation must lie in [-1, 1], got {}", p.rho)));
                }
                if !(p.y0 > 0.0 && p.theta >= 0.0 && p.kappa >= 0.0 && p.nu >= 0.0)
                    || ![p.y0, p.theta, p.kappa, p.nu].iter().all(|v| v.is_finite())
                {
                    return Err(Error::invalid("stochastic volatility needs y0 > 0 and nonnegative kappa, theta, nu"));
                }
            }
        }
        Ok(())
    }

    /// True when the drift is the market rate, so discounted prices are martingales.
    pub fn is_risk_neutral(&self) -> bool {
        !matches!(self, PathModel::Gbm { mu: Some(_), .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    /// Horizon measured from the market's `t0`.
    pub maturity: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    /// Pairs paths `2i`, `2i + 1` with opposite normal draws.
    pub antithetic: bool,
}

impl SimulationSpec {
    /// 250 steps per year, at least one.
    pub fn new(maturity: f64, paths: usize, seed: u64) -> Self {
        SimulationSpec {
            maturity,
            steps: ((250.0 * maturity).ceil() as usize).max(1),
            paths,
            seed,
            antithetic: false,
        }
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }
}

/// Simulated prices, row-major by path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub(crate) market: MarketState,
    pub(crate) model: PathModel,
    pub(crate) spec: SimulationSpec,
    times: Vec<f64>,
    prices: Vec<f64>,
    factor: Option<Vec<f64>>,
    /// Increments of the driving Brownian motion `W¹`, `steps` per path.
    increments: Vec<f64>,
}

impl PathBatch {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.spec.paths
    }

    pub fn is_empty(&self) -> bool {
        self.spec.paths == 0
    }

    pub fn steps(&self) -> usize {
        self.spec.steps
    }

    pub fn seed(&self) -> u64 {
        self.spec.seed
    }

    pub fn is_antithetic(&self) -> bool {
        self.spec.antithetic
    }

    pub fn model(&self) -> &PathModel {
        &self.model
    }

    pub fn market(&self) -> &MarketState {
        &self.market
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let w = self.spec.steps + 1;
        &self.prices[i * w..(i + 1) * w]
    }

    pub fn factor_path(&self, i: usize) -> Option<&[f64]> {
        let w = self.spec.steps + 1;
        self.factor.as_ref().map(|f| &f[i * w..(i + 1) * w])
    }

    pub fn increments(&self, i: usize) -> &[f64] {
        let m = self.spec.steps;
        &self.increments[i * m..(i + 1) * m]
    }

    pub fn terminal(&self, i: usize) -> f64 {
        self.path(i)[self.spec.steps]
    }

    pub fn terminals(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.terminal(i)).collect()
    }

    /// Prices of every path at step `k`.
    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.path(i)[k]).collect()
    }

    /// `path_id,time,price[,y]`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        if self.factor.is_some() {
            w.write_record(["path_id", "time", "price", "y"])?;
        } else {
            w.write_record(["path_id", "time", "price"])?;
        }
        for i in 0..self.len() {
            for (k, (&t, &x)) in self.times.iter().zip(self.path(i)).enumerate() {
                let mut rec = vec![i.to_string(), t.to_string(), x.to_string()];
                if let Some(y) = self.factor_path(i) {
                    rec.push(y[k].to_string());
                }
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Standard normal draws from one ChaCha stream per path (or antithetic pair).
struct Normals(ChaCha8Rng);

impl Normals {
    fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Normals(rng)
    }

    fn next(&mut self) -> f64 {
        let u = ((self.0.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        norm_inv_cdf(u)
    }
}

/// Deterministic given the seed; path `i` does not depend on the batch size.
pub fn simulate_paths(market: &MarketState, model: &PathModel, spec: &SimulationSpec) -> Result<PathBatch> {
    model.validate()?;
    if spec.paths == 0 || spec.steps == 0 {
        return Err(Error::invalid("simulation needs at least one path and one step"));
    }
    if !(spec.maturity > 0.0 && spec.maturity.is_finite()) {
        return Err(Error::invalid(format!("maturity must be positive, got {}", spec.maturity)));
    }
    if spec.antithetic && spec.paths % 2 == 1 {
        return Err(Error::invalid("antithetic sampling needs an even path count"));
    }
    let m = spec.steps;
    let dt = spec.maturity / m as f64;
    let times: Vec<f64> = (0..=m).map(|k| market.t0 + dt * k as f64).collect();
    let group = if spec.antithetic { 2 } else { 1 };
    let two_factor = matches!(model, PathModel::StochasticVol(_));
    let draws_per_step = if two_factor { 2 } else { 1 };

    let mut prices = vec![0.0; spec.paths * (m + 1)];
    let mut increments = vec![0.0; spec.paths * m];
    let mut factor = two_factor.then(|| vec![0.0; spec.paths * (m + 1)]);
    let sqdt = dt.sqrt();

    let simulate_group = |g: usize, price_rows: &mut [f64], inc_rows: &mut [f64], factor_rows: Option<&mut [f64]>| {
        let mut rng = Normals::new(spec.seed, g as u64);
        let z: Vec<f64> = (0..m * draws_per_step).map(|_| rng.next()).collect();
        let mut factor_rows = factor_rows;
        for member in 0..group {
            let sign = if member == 0 { 1.0 } else { -1.0 };
            let xs = &mut price_rows[member * (m + 1)..(member + 1) * (m + 1)];
            let dw = &mut inc_rows[member * m..(member + 1) * m];
            let mut ys = factor_rows.as_deref_mut().map(|f| &mut f[member * (m + 1)..(member + 1) * (m + 1)]);
            let mut lx = market.x0.ln();
            xs[0] = market.x0;
            let mut y = match model {
                PathModel::StochasticVol(p) => p.y0,
                _ => 0.0,
            };
            if let Some(ys) = ys.as_deref_mut() {
                ys[0] = y;
            }
            for k in 0..m {
                let z1 = sign * z[k * draws_per_step];
                dw[k] = z1 * sqdt;
                let (t0, t1) = (times[k], times[k + 1]);
                match model {
                    PathModel::Gbm { sigma, mu } => {
                        let drift = match mu {
                            Some(mu) => mu * dt,
                            None => market.rate.integral(t0, t1),
                        };
                        lx += drift - 0.5 * sigma * sigma * dt + sigma * dw[k];
                    }
                    PathModel::LocalVol(surface) => {
                        let s = surface.vol(t0, lx.exp());
                        lx += market.rate.integral(t0, t1) - 0.5 * s * s * dt + s * dw[k];
                    }
                    PathModel::StochasticVol(p) => {
                        let z2 = p.rho * z1 + (1.0 - p.rho * p.rho).sqrt() * sign * z[k * 2 + 1];
                        lx += market.rate.integral(t0, t1) - 0.5 * y * y * dt + y * dw[k];
                        y *= ((p.kappa * (p.theta - y) / y - 0.5 * p.nu * p.nu) * dt + p.nu * sqdt * z2).exp();
                    }
                }
                xs[k + 1] = lx.exp();
                if let Some(ys) = ys.as_deref_mut() {
                    ys[k + 1] = y;
                }
            }
        }
    };

    let w = m + 1;
    match factor.as_mut() {
        Some(f) => prices
            .par_chunks_mut(group * w)
            .zip(increments.par_chunks_mut(group * m))
            .zip(f.par_chunks_mut(group * w))
            .enumerate()
            .for_each(|(g, ((p, i), f))| simulate_group(g, p, i, Some(f))),
        None => prices
            .par_chunks_mut(group * w)
            .zip(increments.par_chunks_mut(group * m))
            .enumerate()
            .for_each(|(g, (p, i))| simulate_group(g, p, i, None)),
    }

    Ok(PathBatch {
        market: market.clone(),
        model: model.clone(),
        spec: spec.clone(),
        times,
        prices,
        factor,
        increments,
    })
}
