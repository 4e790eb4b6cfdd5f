use super::paths::PathBatch;
use crate::error::{Error, Result};
use crate::market::Payoff;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

pub type DriverFn = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;

/// Generator `f(t, y, z)` of `−dY = f dt − Z dW`.
#[derive(Clone)]
pub enum Driver {
    Zero,
    /// `f = a·y + b·z`.
    Linear { a: f64, b: f64 },
    Custom(Arc<DriverFn>),
    /// Pointwise supremum of a family.
    Sup(Vec<Driver>),
}

impl Driver {
    /// `f = −r·y`: the solution is the discounted conditional expectation.
    pub fn discount(r: f64) -> Self {
        Driver::Linear { a: -r, b: 0.0 }
    }

    pub fn eval(&self, t: f64, y: f64, z: f64) -> f64 {
        match self {
            Driver::Zero => 0.0,
            Driver::Linear { a, b } => a * y + b * z,
            Driver::Custom(f) => f(t, y, z),
            Driver::Sup(family) => family.iter().map(|f| f.eval(t, y, z)).fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

impl fmt::Debug for Driver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Driver::Zero => write!(f, "Zero"),
            Driver::Linear { a, b } => write!(f, "Linear {{ a: {a}, b: {b} }}"),
            Driver::Custom(_) => write!(f, "Custom"),
            Driver::Sup(family) => f.debug_tuple("Sup").field(family).finish(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BsdeSolution {
    pub y0: f64,
    /// Standard error of the step-zero average.
    pub se: f64,
    pub times: Vec<f64>,
    /// Coefficients of `Y_k` in the basis at each step, step 0 first.
    pub y_coefficients: Vec<Vec<f64>>,
    pub z_coefficients: Vec<Vec<f64>>,
    /// Basis description, e.g. `1, u, u^2` with `u` the standardized log-price.
    pub basis: String,
    pub warnings: Vec<String>,
}

/// Least-squares fit on `1, u, …, u^d` with `u` the standardized log-price.
struct Basis {
    center: f64,
    scale: f64,
    degree: usize,
}

impl Basis {
    fn new(xs: &[f64], degree: usize) -> Self {
        let n = xs.len() as f64;
        let logs = xs.iter().map(|x| x.ln());
        let center = logs.clone().sum::<f64>() / n;
        let var = logs.map(|l| (l - center) * (l - center)).sum::<f64>() / n;
        let scale = var.sqrt();
        // A degenerate cross-section only supports the constant.
        let degree = if scale > 1e-12 * center.abs().max(1.0) { degree } else { 0 };
        Basis {
            center,
            scale: if scale > 0.0 { scale } else { 1.0 },
            degree,
        }
    }

    fn row(&self, x: f64, out: &mut [f64]) {
        let u = (x.ln() - self.center) / self.scale;
        out[0] = 1.0;
        for p in 1..=self.degree {
            out[p] = out[p - 1] * u;
        }
    }

    /// Returns coefficients and fitted values; `None` on a singular system.
    fn fit(&self, xs: &[f64], ys: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let k = self.degree + 1;
        if k == 1 {
            let m = ys.iter().sum::<f64>() / ys.len() as f64;
            return Some((vec![m], vec![m; ys.len()]));
        }
        let mut gram = DMatrix::<f64>::zeros(k, k);
        let mut rhs = DVector::<f64>::zeros(k);
        let mut row = vec![0.0; k];
        for (&x, &y) in xs.iter().zip(ys) {
            self.row(x, &mut row);
            for a in 0..k {
                rhs[a] += row[a] * y;
                for b in 0..=a {
                    gram[(a, b)] += row[a] * row[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                gram[(b, a)] = gram[(a, b)];
            }
        }
        let diag_max = (0..k).map(|a| gram[(a, a)]).fold(0.0, f64::max);
        let chol = gram.cholesky()?;
        let l = chol.l();
        let diag_min = (0..k).map(|a| l[(a, a)] * l[(a, a)]).fold(f64::INFINITY, f64::min);
        if diag_min < 1e-12 * diag_max {
            return None;
        }
        let coef = chol.solve(&rhs);
        let fitted = xs
            .iter()
            .map(|&x| {
                self.row(x, &mut row);
                row.iter().zip(coef.iter()).map(|(a, b)| a * b).sum()
            })
            .collect();
        Some((coef.iter().copied().collect(), fitted))
    }
}

fn fit_reducing(xs: &[f64], ys: &[f64], degree: usize, step: usize, warnings: &mut Vec<String>) -> (Vec<f64>, Vec<f64>) {
    let mut basis = Basis::new(xs, degree);
    loop {
        if let Some(out) = basis.fit(xs, ys) {
            return out;
        }
        basis.degree -= 1;
        warnings.push(format!("step {step}: regression rank deficient, degree reduced to {}", basis.degree));
    }
}

/// Backward regression scheme for `−dY = f(t, Y, Z)dt − Z dW`, `Y_T = h(X_T)`.
///
/// `Z_k` regresses `Y_{k+1}·ΔW_k/Δt` and `Y_k` regresses `Y_{k+1}` on polynomials in
/// the log-price, followed by one explicit Picard correction of the driver term.
pub fn solve_bsde(batch: &PathBatch, terminal: &Payoff, driver: &Driver, degree: usize) -> Result<BsdeSolution> {
    if degree == 0 {
        return Err(Error::invalid("basis degree must be at least 1"));
    }
    if batch.len() < 2 {
        return Err(Error::invalid("a regression needs at least two paths"));
    }
    let n = batch.len();
    let m = batch.steps();
    let times = batch.times().to_vec();
    let mut warnings = Vec::new();
    let mut y: Vec<f64> = batch.terminals().iter().map(|&x| terminal.eval(x)).collect();
    let mut y_coefs = vec![Vec::new(); m];
    let mut z_coefs = vec![Vec::new(); m];
    let mut se = 0.0;

    for k in (0..m).rev() {
        let dt = times[k + 1] - times[k];
        let xs = batch.column(k);
        let zt: Vec<f64> = (0..n).map(|i| y[i] * batch.increments(i)[k] / dt).collect();
        let (zc, z) = fit_reducing(&xs, &zt, degree, k, &mut warnings);
        if k == 0 {
            // Every path starts at x0: the regression is the plain average.
            let samples: Vec<f64> = (0..n).map(|i| y[i] + driver.eval(times[0], y[i], z[i]) * dt).collect();
            let mean = samples.iter().sum::<f64>() / n as f64;
            let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1) as f64;
            se = (var / n as f64).sqrt();
        }
        let (yc, cond) = fit_reducing(&xs, &y, degree, k, &mut warnings);
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let guess = cond[i] + driver.eval(times[k], cond[i], z[i]) * dt;
                cond[i] + driver.eval(times[k], guess, z[i]) * dt
            })
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("non-finite BSDE value at step {k}")));
        }
        y = next;
        y_coefs[k] = yc;
        z_coefs[k] = zc;
    }
    let y0 = y.iter().sum::<f64>() / n as f64;
    let basis = (0..=degree)
        .map(|p| match p {
            0 => "1".to_string(),
            1 => "u".to_string(),
            p => format!("u^{p}"),
        })
        .collect::<Vec<_>>()
        .join(", ");
    Ok(BsdeSolution {
        y0,
        se,
        times,
        y_coefficients: y_coefs,
        z_coefficients: z_coefs,
        basis: format!("{basis} with u the standardized log-price"),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{bs_call_price, BsParams};
    use crate::market::MarketState;
    use crate::mc::{mc_price, simulate_paths, PathModel, SimulationSpec, Variance};

    fn batch(r: f64, n: usize) -> PathBatch {
        let spec = SimulationSpec::new(1.0, n, 4).with_steps(50);
        simulate_paths(&MarketState::flat(100.0, r).unwrap(), &PathModel::gbm(0.2), &spec).unwrap()
    }

    #[test]
    fn zero_driver_is_the_plain_average() {
        let b = batch(0.0, 20_000);
        let call = Payoff::call(100.0).unwrap();
        let s = solve_bsde(&b, &call, &Driver::Zero, 3).unwrap();
        let mc = mc_price(&b, &call, Variance::Plain).unwrap();
        assert!((s.y0 - mc.mean).abs() < 1e-10, "{} vs {}", s.y0, mc.mean);
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn discount_driver_prices_the_call() {
        let b = batch(0.05, 100_000);
        let s = solve_bsde(&b, &Payoff::call(100.0).unwrap(), &Driver::discount(0.05), 3).unwrap();
        let exact = bs_call_price(&BsParams::new(100.0, 100.0, 1.0, 0.05, 0.2).unwrap());
        assert!((s.y0 / exact - 1.0).abs() < 0.01, "{} vs {exact}", s.y0);
    }

    #[test]
    fn sup_driver_dominates_members() {
        let b = batch(0.0, 5000);
        let call = Payoff::call(100.0).unwrap();
        let members = [Driver::discount(0.01), Driver::discount(0.05)];
        let sup = solve_bsde(&b, &call, &Driver::Sup(members.to_vec()), 2).unwrap();
        for f in &members {
            let one = solve_bsde(&b, &call, f, 2).unwrap();
            assert!(sup.y0 >= one.y0 - 3.0 * one.se);
        }
    }

    #[test]
    fn custom_driver_matches_linear() {
        let b = batch(0.0, 2000);
        let call = Payoff::call(100.0).unwrap();
        let lin = solve_bsde(&b, &call, &Driver::discount(0.03), 2).unwrap();
        let custom = solve_bsde(&b, &call, &Driver::Custom(Arc::new(|_, y, _| -0.03 * y)), 2).unwrap();
        assert_eq!(lin.y0, custom.y0);
    }
}
