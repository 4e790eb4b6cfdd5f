use crate::error::{Error, Result};

/// Observed prices on an increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePath {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl PricePath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::invalid("path times and values differ in length"));
        }
        if times.len() < 2 {
            return Err(Error::invalid("path needs at least two points"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("path times must be strictly increasing"));
        }
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("path prices must be positive and finite"));
        }
        Ok(PricePath { times, values })
    }

    /// Path sampled every `step` years starting at zero.
    pub fn uniform(step: f64, values: Vec<f64>) -> Result<Self> {
        let times = (0..values.len()).map(|i| i as f64 * step).collect();
        Self::new(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `ln(x[i+1]) - ln(x[i])` for consecutive observations.
pub fn log_returns(path: &PricePath) -> Vec<f64> {
    path.values.windows(2).map(|w| w[1].ln() - w[0].ln()).collect()
}

/// Annualized volatility from log-returns sampled every `step` years.
///
/// The sample variance uses the `1/(N-1)` normalization and is divided by `step`.
pub fn historical_volatility(path: &PricePath, step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::invalid("sampling step must be positive"));
    }
    if path.len() < 3 {
        return Err(Error::invalid("historical volatility needs at least two returns"));
    }
    let tol = 1e-9 * step.max(path.times[path.len() - 1].abs());
    if path.times.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > tol) {
        return Err(Error::invalid("path is not sampled with the given uniform step"));
    }
    let returns = log_returns(path);
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
    Ok((var / step).sqrt())
}

/// Sum of squared price increments along the path.
pub fn realized_quadratic_variation(path: &PricePath) -> f64 {
    path.values.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn log_return_examples() {
        let flat = PricePath::uniform(1.0, vec![100.0; 3]).unwrap();
        assert_eq!(log_returns(&flat), vec![0.0, 0.0]);
        let one = PricePath::uniform(1.0, vec![100.0, 100.0 * 0.01f64.exp()]).unwrap();
        assert!((log_returns(&one)[0] - 0.01).abs() < 1e-15);
        let geo = PricePath::uniform(1.0, (0..4).map(|i| 100.0 * 1.1f64.powi(i)).collect()).unwrap();
        for r in log_returns(&geo) {
            assert!((r - 1.1f64.ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn short_or_invalid_paths() {
        assert!(PricePath::new(vec![0.0], vec![1.0]).is_err());
        assert!(PricePath::new(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
        assert!(PricePath::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        let two = PricePath::uniform(1.0, vec![1.0, 2.0]).unwrap();
        assert!(historical_volatility(&two, 1.0).is_err());
    }

    #[test]
    fn historical_vol_examples() {
        let geo = PricePath::uniform(0.5, (0..6).map(|i| 50.0 * 1.03f64.powi(i)).collect()).unwrap();
        assert!(historical_volatility(&geo, 0.5).unwrap() < 1e-7);
        let a: f64 = 0.05;
        let p = PricePath::uniform(1.0, vec![100.0, 100.0 * a.exp(), 100.0]).unwrap();
        let v = historical_volatility(&p, 1.0).unwrap();
        assert!((v - 2f64.sqrt() * a).abs() < 1e-12);
    }

    #[test]
    fn non_uniform_spacing_rejected() {
        let p = PricePath::new(vec![0.0, 1.0, 3.0], vec![1.0, 1.1, 1.2]).unwrap();
        assert!(historical_volatility(&p, 1.0).is_err());
    }

    #[test]
    fn quadratic_variation_examples() {
        let flat = PricePath::uniform(1.0, vec![100.0; 5]).unwrap();
        assert_eq!(realized_quadratic_variation(&flat), 0.0);
        let p = PricePath::uniform(1.0, vec![100.0, 110.0, 100.0]).unwrap();
        assert_eq!(realized_quadratic_variation(&p), 200.0);
    }

    proptest! {
        #[test]
        fn hist_vol_scale_invariant(
            prices in proptest::collection::vec(1.0f64..200.0, 3..40),
            scale in 0.01f64..100.0,
        ) {
            let a = PricePath::uniform(0.1, prices.clone()).unwrap();
            let b = PricePath::uniform(0.1, prices.iter().map(|p| p * scale).collect()).unwrap();
            let va = historical_volatility(&a, 0.1).unwrap();
            let vb = historical_volatility(&b, 0.1).unwrap();
            prop_assert!((va - vb).abs() <= 1e-9 * (1.0 + va));
        }

        #[test]
        fn qv_shift_and_time_invariant(
            prices in proptest::collection::vec(1.0f64..200.0, 2..40),
            shift in 0.0f64..50.0,
            step in 0.001f64..2.0,
        ) {
            let a = PricePath::uniform(1.0, prices.clone()).unwrap();
            let b = PricePath::uniform(step, prices.iter().map(|p| p + shift).collect()).unwrap();
            let qa = realized_quadratic_variation(&a);
            let qb = realized_quadratic_variation(&b);
            prop_assert!((qa - qb).abs() <= 1e-9 * (1.0 + qa));
        }
    }
}
