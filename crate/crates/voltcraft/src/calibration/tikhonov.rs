use super::screen::{screen_quotes, QuoteViolation};
use super::avellaneda_penalty;
use crate::analytic::implied_volatility;
use crate::error::{Error, Result};
use crate::market::{OptionKind, QuoteSurface};
use crate::pde::{solve_dupire_forward, LocalVolSurface, PdeGrid};
use rayon::prelude::*;
use serde::Serialize;

/// Hard bounds on calibrated knot values.
pub const KNOT_BOUNDS: (f64, f64) = (0.01, 2.0);

#[derive(Debug, Clone, PartialEq)]
pub enum PenaltyMode {
    /// Squared gradient of the knot surface.
    Gradient,
    /// Avellaneda distance to a prior surface.
    PriorDistance(LocalVolSurface),
}

/// Least-squares calibration of a knot lattice to option quotes.
#[derive(Debug, Clone)]
pub struct CalibrationProblem {
    pub quotes: QuoteSurface,
    /// Knot lattice and starting values.
    pub initial: LocalVolSurface,
    pub alpha: f64,
    pub penalty: PenaltyMode,
    pub grid: PdeGrid,
    pub max_iterations: usize,
    /// Relative objective decrease below which the optimizer stops.
    pub tolerance: f64,
}

impl CalibrationProblem {
    pub fn new(quotes: QuoteSurface, initial: LocalVolSurface) -> Result<Self> {
        let problem = CalibrationProblem {
            quotes,
            initial,
            alpha: 0.0,
            penalty: PenaltyMode::Gradient,
            grid: PdeGrid::new(100, 160)?,
            max_iterations: 500,
            tolerance: 1e-8,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn with_penalty(mut self, penalty: PenaltyMode) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn with_grid(mut self, grid: PdeGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("regularization weight must be nonnegative, got {}", self.alpha)));
        }
        let (lo, hi) = self.bounds();
        if self.initial.values().iter().any(|v| *v < lo || *v > hi) {
            return Err(Error::invalid(format!("initial knots must lie in [{lo}, {hi}]")));
        }
        Ok(())
    }

    fn bounds(&self) -> (f64, f64) {
        (
            KNOT_BOUNDS.0.max(self.initial.floor()),
            KNOT_BOUNDS.1.min(self.initial.cap()),
        )
    }

    /// Grid with log bounds frozen, so that perturbing knots never moves the mesh.
    fn frozen_grid(&self) -> Result<PdeGrid> {
        if self.grid.log_bounds.is_some() || self.quotes.is_empty() {
            return Ok(self.grid.clone());
        }
        let market = &self.quotes.market;
        let horizon = self.quotes.quotes().iter().map(|q| q.maturity).fold(0.0, f64::max) - market.t0;
        let implied = self
            .quotes
            .quotes()
            .iter()
            .filter_map(|q| implied_volatility(market, q).ok())
            .fold(0.0, f64::max);
        let sd = self.initial.max_vol().max(implied).max(0.1) * horizon.sqrt();
        let y0 = market.x0.ln();
        let (k_lo, k_hi) = self
            .quotes
            .quotes()
            .iter()
            .fold((y0, y0), |(a, b), q| (a.min(q.strike.ln()), b.max(q.strike.ln())));
        let n = self.grid.std_devs;
        let lo = (y0 - n * sd).min(k_lo - 0.5 * n * sd);
        let hi = (y0 + n * sd).max(k_hi + 0.5 * n * sd);
        self.grid.clone().with_log_bounds(lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuoteResidual {
    #[serde(rename = "T")]
    pub maturity: f64,
    #[serde(rename = "K")]
    pub strike: f64,
    pub model: f64,
    pub market: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub surface: LocalVolSurface,
    pub objective_history: Vec<f64>,
    #[serde(rename = "G")]
    pub final_g: f64,
    pub penalty: f64,
    pub residuals: Vec<QuoteResidual>,
    pub converged: bool,
    pub iterations: usize,
    /// Quotes set to weight zero by the static-arbitrage screen.
    pub excluded: Vec<QuoteViolation>,
}

/// Model prices for every quote from one forward solve over all quoted maturities.
pub fn model_prices(problem: &CalibrationProblem, vol: &LocalVolSurface) -> Result<Vec<f64>> {
    model_prices_on(problem, vol, &problem.frozen_grid()?)
}

fn model_prices_on(problem: &CalibrationProblem, vol: &LocalVolSurface, grid: &PdeGrid) -> Result<Vec<f64>> {
    let quotes = problem.quotes.quotes();
    if quotes.is_empty() {
        return Ok(Vec::new());
    }
    let market = &problem.quotes.market;
    let maturities = problem.quotes.maturities();
    let surface = solve_dupire_forward(market, vol, &maturities, grid).map_err(|e| Error::AtQuote {
        index: 0,
        source: Box::new(e),
    })?;
    let strikes = surface.strikes();
    let (k_min, k_max) = (strikes[0], strikes[strikes.len() - 1]);
    Ok(quotes
        .iter()
        .map(|q| {
            let i = maturities.partition_point(|&t| t < q.maturity);
            let df = market.discount_to(q.maturity);
            let call = if q.strike < k_min {
                market.x0 - q.strike * df
            } else if q.strike > k_max {
                0.0
            } else {
                surface.call_price_at(i, q.strike)
            };
            match q.kind {
                OptionKind::Call => call,
                OptionKind::Put => call - market.x0 + q.strike * df,
            }
        })
        .collect())
}

/// Weighted sum of squared pricing errors.
pub fn objective_g(problem: &CalibrationProblem, vol: &LocalVolSurface) -> Result<f64> {
    let prices = model_prices(problem, vol)?;
    Ok(weighted_squares(problem, &prices))
}

fn weighted_squares(problem: &CalibrationProblem, prices: &[f64]) -> f64 {
    problem
        .quotes
        .quotes()
        .iter()
        .zip(prices)
        .map(|(q, p)| q.weight * (p - q.price).powi(2))
        .sum()
}

/// Discrete `‖∇σ‖²`: squared forward differences in `t` and `ln x`, trapezoid-weighted.
pub fn gradient_penalty(vol: &LocalVolSurface) -> f64 {
    let ts = vol.times();
    let ys: Vec<f64> = vol.prices().iter().map(|x| x.ln()).collect();
    let wt = trapezoid(ts);
    let wy = trapezoid(&ys);
    let mut total = 0.0;
    for i in 0..ts.len() {
        for j in 0..ys.len() {
            let s = vol.knot(i, j);
            if i + 1 < ts.len() {
                let h = ts[i + 1] - ts[i];
                total += ((vol.knot(i + 1, j) - s) / h).powi(2) * h * wy[j];
            }
            if j + 1 < ys.len() {
                let h = ys[j + 1] - ys[j];
                total += ((vol.knot(i, j + 1) - s) / h).powi(2) * h * wt[i];
            }
        }
    }
    total
}

fn trapezoid(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| {
            let left = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
            let right = if i + 1 < n { x[i + 1] - x[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// `J(α, σ) = α · penalty(σ) + G(σ)`.
pub fn objective_j(problem: &CalibrationProblem, vol: &LocalVolSurface) -> Result<f64> {
    let grid = problem.frozen_grid()?;
    Ok(evaluate(problem, vol, &grid)?.0)
}

fn penalty(problem: &CalibrationProblem, vol: &LocalVolSurface, grid: &PdeGrid) -> Result<f64> {
    match &problem.penalty {
        PenaltyMode::Gradient => Ok(gradient_penalty(vol)),
        PenaltyMode::PriorDistance(prior) => {
            let market = &problem.quotes.market;
            let horizon = problem.quotes.quotes().iter().map(|q| q.maturity).fold(market.t0, f64::max);
            if horizon <= market.t0 {
                return Ok(0.0);
            }
            avellaneda_penalty(market, vol, prior, horizon, grid)
        }
    }
}

/// Returns `(J, G, penalty)`.
fn evaluate(problem: &CalibrationProblem, vol: &LocalVolSurface, grid: &PdeGrid) -> Result<(f64, f64, f64)> {
    let g = weighted_squares(problem, &model_prices_on(problem, vol, grid)?);
    let p = if problem.alpha > 0.0 { penalty(problem, vol, grid)? } else { 0.0 };
    Ok((problem.alpha * p + g, g, p))
}

/// Weighted price sensitivity `sqrt(Σ ω (∂price/∂σ_k)²)` of the quotes to each knot.
pub fn knot_sensitivity(problem: &CalibrationProblem, vol: &LocalVolSurface) -> Result<Vec<f64>> {
    let grid = problem.frozen_grid()?;
    let x = vol.values().to_vec();
    (0..x.len())
        .into_par_iter()
        .map(|k| {
            let h = 1e-4 * x[k].max(0.05);
            let bumped = |d: f64| {
                let mut v = x.clone();
                v[k] += d;
                model_prices_on(problem, &vol.with_values(v)?, &grid)
            };
            let (up, down) = (bumped(h)?, bumped(-h)?);
            Ok(problem
                .quotes
                .quotes()
                .iter()
                .zip(up.iter().zip(&down))
                .map(|(q, (u, d))| q.weight * ((u - d) / (2.0 * h)).powi(2))
                .sum::<f64>()
                .sqrt())
        })
        .collect()
}

/// Tikhonov-regularized calibration by projected BFGS with finite-difference gradients.
///
/// Quotes creating static arbitrage are screened out first (weight zero).
pub fn calibrate_tikhonov(problem: &CalibrationProblem) -> Result<CalibrationReport> {
    problem.validate()?;
    let (quotes, excluded) = screen_quotes(&problem.quotes);
    let screened = CalibrationProblem {
        quotes,
        ..problem.clone()
    };
    let problem = &screened;
    let grid = problem.frozen_grid()?;
    let (lo, hi) = problem.bounds();
    let surface_of = |x: &[f64]| problem.initial.with_values(x.to_vec());
    let eval = |x: &[f64]| -> Result<f64> { Ok(evaluate(problem, &surface_of(x)?, &grid)?.0) };

    let mut x = problem.initial.values().to_vec();
    let mut f = eval(&x)?;
    let mut history = vec![f];
    let mut converged = problem.quotes.is_empty() && problem.alpha == 0.0;
    let mut iterations = 0;
    let n = x.len();
    let mut h_inv: Option<Vec<f64>> = None;

    while !converged && iterations < problem.max_iterations {
        let g = fd_gradient(&eval, &x, lo, hi)?;
        let free: Vec<bool> = (0..n)
            .map(|k| !((x[k] <= lo && g[k] > 0.0) || (x[k] >= hi && g[k] < 0.0)))
            .collect();
        if (0..n).all(|k| !free[k] || g[k] == 0.0) {
            converged = true;
            break;
        }
        let mut step = None;
        for attempt in 0..2 {
            let d = match (&h_inv, attempt) {
                (Some(h), 0) => direction(h, &g, &free),
                _ => (0..n).map(|k| if free[k] { -g[k] } else { 0.0 }).collect(),
            };
            let slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                continue;
            }
            let t0 = if h_inv.is_some() && attempt == 0 {
                1.0
            } else {
                0.05 / d.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
            };
            if let Some(found) = armijo(&eval, &x, f, &g, &d, t0, lo, hi)? {
                step = Some(found);
                break;
            }
            h_inv = None;
        }
        let Some((x_new, f_new)) = step else {
            // No descent along the steepest direction: stationary to gradient accuracy.
            converged = true;
            break;
        };
        iterations += 1;
        let g_new = fd_gradient(&eval, &x_new, lo, hi)?;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        bfgs_update(&mut h_inv, &s, &y);
        let decrease = (f - f_new) / f.abs().max(f64::MIN_POSITIVE);
        x = x_new;
        f = f_new;
        history.push(f);
        if decrease < problem.tolerance || f == 0.0 {
            converged = true;
        }
    }

    let surface = surface_of(&x)?;
    let prices = model_prices_on(problem, &surface, &grid)?;
    let (_, final_g, final_penalty) = evaluate(problem, &surface, &grid)?;
    let residuals = problem
        .quotes
        .quotes()
        .iter()
        .zip(&prices)
        .map(|(q, &model)| QuoteResidual {
            maturity: q.maturity,
            strike: q.strike,
            model,
            market: q.price,
            weight: q.weight,
        })
        .collect();
    Ok(CalibrationReport {
        surface,
        objective_history: history,
        final_g,
        penalty: final_penalty,
        residuals,
        converged,
        iterations,
        excluded,
    })
}

/// Central differences with a relative step; one-sided at an active bound.
fn fd_gradient<F>(eval: &F, x: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    (0..x.len())
        .into_par_iter()
        .map(|k| {
            let h = 1e-4 * x[k].abs().max(1e-2);
            let at = |v: f64| {
                let mut y = x.to_vec();
                y[k] = v;
                eval(&y)
            };
            let (a, b) = ((x[k] - h).max(lo), (x[k] + h).min(hi));
            let fa = if a == x[k] { eval(x)? } else { at(a)? };
            let fb = if b == x[k] { eval(x)? } else { at(b)? };
            Ok((fb - fa) / (b - a))
        })
        .collect()
}

fn direction(h: &[f64], g: &[f64], free: &[bool]) -> Vec<f64> {
    let n = g.len();
    (0..n)
        .map(|i| {
            if !free[i] {
                return 0.0;
            }
            -(0..n).filter(|&j| free[j]).map(|j| h[i * n + j] * g[j]).sum::<f64>()
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn armijo<F>(eval: &F, x: &[f64], f: f64, g: &[f64], d: &[f64], t0: f64, lo: f64, hi: f64) -> Result<Option<(Vec<f64>, f64)>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut t = t0;
    for _ in 0..40 {
        let trial: Vec<f64> = x.iter().zip(d).map(|(a, b)| (a + t * b).clamp(lo, hi)).collect();
        let moved: f64 = trial.iter().zip(x).zip(g).map(|((a, b), gi)| (a - b) * gi).sum();
        if moved < 0.0 {
            let ft = eval(&trial)?;
            if ft <= f + 1e-4 * moved {
                return Ok(Some((trial, ft)));
            }
        }
        t *= 0.5;
    }
    Ok(None)
}

/// Inverse-Hessian BFGS update; the first update rescales the identity.
fn bfgs_update(h: &mut Option<Vec<f64>>, s: &[f64], y: &[f64]) {
    let n = s.len();
    let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let ss: f64 = s.iter().map(|v| v * v).sum();
    if !(sy > 1e-12 * (ss * yy).sqrt()) {
        return;
    }
    let h = h.get_or_insert_with(|| {
        let scale = sy / yy;
        (0..n * n).map(|k| if k % (n + 1) == 0 { scale } else { 0.0 }).collect()
    });
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum()).collect();
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{bs_call_price, BsParams};
    use crate::market::{MarketState, OptionQuote};

    fn market() -> MarketState {
        MarketState::flat(100.0, 0.0).unwrap()
    }

    fn knots(v: f64) -> LocalVolSurface {
        LocalVolSurface::from_fn(vec![0.0, 1.0], vec![70.0, 100.0, 140.0], |_, _| v).unwrap()
    }

    fn bs_quotes(vol: f64) -> QuoteSurface {
        let quotes = [80.0, 90.0, 100.0, 110.0, 120.0]
            .iter()
            .map(|&k| OptionQuote::call(1.0, k, bs_call_price(&BsParams::new(100.0, k, 1.0, 0.0, vol).unwrap())))
            .collect();
        QuoteSurface::new(market(), quotes).unwrap()
    }

    #[test]
    fn objective_matches_closed_form_gaps() {
        let problem = CalibrationProblem::new(bs_quotes(0.3), knots(0.2)).unwrap().with_grid(PdeGrid::new(200, 300).unwrap());
        let g = objective_g(&problem, &knots(0.2)).unwrap();
        let exact: f64 = problem
            .quotes
            .quotes()
            .iter()
            .map(|q| (bs_call_price(&BsParams::new(100.0, q.strike, 1.0, 0.0, 0.2).unwrap()) - q.price).powi(2))
            .sum();
        assert!((g - exact).abs() < 2e-3 * exact.max(1.0), "{g} vs {exact}");
    }

    #[test]
    fn self_generated_quotes_give_small_objective() {
        let problem = CalibrationProblem::new(bs_quotes(0.2), knots(0.2)).unwrap();
        assert!(objective_g(&problem, &knots(0.2)).unwrap() < 1e-4);
    }

    #[test]
    fn zero_weight_quote_contributes_nothing() {
        let q = OptionQuote::put(0.5, 95.0, 3.0).with_weight(0.0);
        let problem = CalibrationProblem::new(QuoteSurface::new(market(), vec![q]).unwrap(), knots(0.2)).unwrap();
        assert_eq!(objective_g(&problem, &knots(0.2)).unwrap(), 0.0);
    }

    #[test]
    fn empty_quotes_return_initial_guess() {
        let problem = CalibrationProblem::new(QuoteSurface::empty(market()), knots(0.25)).unwrap();
        let report = calibrate_tikhonov(&problem).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 0);
        assert_eq!(report.final_g, 0.0);
        assert_eq!(report.surface, knots(0.25));
    }

    #[test]
    fn flat_recovery_is_monotone() {
        let problem = CalibrationProblem::new(bs_quotes(0.27), knots(0.2))
            .unwrap()
            .with_alpha(1e-6)
            .unwrap()
            .with_grid(PdeGrid::new(60, 100).unwrap());
        let report = calibrate_tikhonov(&problem).unwrap();
        assert!(report.objective_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(report.converged);
        // A single maturity only pins the time average of the variance.
        assert!((report.surface.vol(0.5, 100.0) / 0.27 - 1.0).abs() < 0.01, "{:?}", report.surface.values());
        assert_eq!(report.residuals.len(), 5);
        assert!(report.residuals.iter().all(|r| (r.model - r.market).abs() < 2e-3));
    }

    #[test]
    fn large_alpha_flattens_the_surface() {
        let problem = CalibrationProblem::new(bs_quotes(0.27), LocalVolSurface::from_fn(vec![0.0, 1.0], vec![70.0, 100.0, 140.0], |t, x| 0.15 + 0.05 * t + x / 1000.0).unwrap())
            .unwrap()
            .with_alpha(1e6)
            .unwrap()
            .with_grid(PdeGrid::new(40, 80).unwrap());
        let report = calibrate_tikhonov(&problem).unwrap();
        assert!(report.surface.max_vol() - report.surface.min_vol() < 1e-3);
    }

    #[test]
    fn gradient_penalty_of_a_plane() {
        // σ = a t + b ln x has |∇σ|² = a² + b² everywhere.
        let ts = vec![0.0, 0.5, 1.0];
        let xs: Vec<f64> = vec![50.0, 100.0, 200.0];
        let v = LocalVolSurface::from_fn(ts, xs, |t, x| 0.2 + 0.1 * t + 0.05 * (x / 100.0).ln()).unwrap();
        let area = 1.0 * (4.0f64).ln();
        let p = gradient_penalty(&v);
        // Forward differences count each edge once with its transverse trapezoid weight.
        assert!((p - (0.01 + 0.0025) * area).abs() < 1e-12, "{p}");
    }

    #[test]
    fn rejects_negative_alpha() {
        assert!(CalibrationProblem::new(bs_quotes(0.2), knots(0.2)).unwrap().with_alpha(-1.0).is_err());
    }
}
