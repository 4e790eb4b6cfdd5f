use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_VOL_FLOOR: f64 = 1e-3;
pub const DEFAULT_VOL_CAP: f64 = 5.0;

/// Local volatility `σ(t, x)` on a rectangular knot grid.
///
/// Bilinear in `(t, ln x)` inside the grid, constant beyond it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SurfaceJson", into = "SurfaceJson")]
pub struct LocalVolSurface {
    times: Vec<f64>,
    prices: Vec<f64>,
    log_prices: Vec<f64>,
    /// Row-major: `vols[i * prices.len() + j] = σ(times[i], prices[j])`.
    vols: Vec<f64>,
    floor: f64,
    cap: f64,
}

#[derive(Serialize, Deserialize)]
struct SurfaceJson {
    times: Vec<f64>,
    prices: Vec<f64>,
    vols: Vec<Vec<f64>>,
}

impl TryFrom<SurfaceJson> for LocalVolSurface {
    type Error = Error;

    fn try_from(s: SurfaceJson) -> Result<Self> {
        LocalVolSurface::new(s.times, s.prices, s.vols)
    }
}

impl From<LocalVolSurface> for SurfaceJson {
    fn from(s: LocalVolSurface) -> Self {
        let vols = s.rows().map(|r| r.to_vec()).collect();
        SurfaceJson {
            times: s.times,
            prices: s.prices,
            vols,
        }
    }
}

impl LocalVolSurface {
    /// Rows of `vols` are indexed by time, columns by price.
    pub fn new(times: Vec<f64>, prices: Vec<f64>, vols: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_bounds(times, prices, vols, DEFAULT_VOL_FLOOR, DEFAULT_VOL_CAP)
    }

    pub fn with_bounds(times: Vec<f64>, prices: Vec<f64>, vols: Vec<Vec<f64>>, floor: f64, cap: f64) -> Result<Self> {
        if times.len() < 2 || prices.len() < 2 {
            return Err(Error::invalid("local volatility grid must be at least 2x2"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || prices.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("local volatility knots must be strictly increasing"));
        }
        if times.iter().any(|t| !t.is_finite()) || prices.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::invalid("local volatility knots must be finite, prices positive"));
        }
        if vols.len() != times.len() || vols.iter().any(|r| r.len() != prices.len()) {
            return Err(Error::invalid("local volatility values must have shape times x prices"));
        }
        if !(floor > 0.0 && floor <= cap) {
            return Err(Error::invalid("volatility floor must be positive and below the cap"));
        }
        let flat: Vec<f64> = vols.into_iter().flatten().collect();
        if let Some(v) = flat.iter().find(|v| !(**v >= floor && **v <= cap)) {
            return Err(Error::invalid(format!(
                "local volatility {v} outside [σ_floor = {floor}, σ_cap = {cap}]"
            )));
        }
        let log_prices = prices.iter().map(|p| p.ln()).collect();
        Ok(LocalVolSurface {
            times,
            prices,
            log_prices,
            vols: flat,
            floor,
            cap,
        })
    }

    pub fn flat(vol: f64) -> Result<Self> {
        Self::new(vec![0.0, 1.0], vec![1.0, 2.0], vec![vec![vol; 2]; 2])
    }

    /// Samples `f(t, x)` on the given knots.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(times: Vec<f64>, prices: Vec<f64>, f: F) -> Result<Self> {
        let vols = times.iter().map(|&t| prices.iter().map(|&x| f(t, x)).collect()).collect();
        Self::new(times, prices, vols)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.vols.chunks(self.prices.len())
    }

    pub fn knot(&self, i: usize, j: usize) -> f64 {
        self.vols[i * self.prices.len() + j]
    }

    /// Knot values, row-major.
    pub fn values(&self) -> &[f64] {
        &self.vols
    }

    /// Same knots, new values (row-major). Values are validated against floor and cap.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.vols.len() {
            return Err(Error::invalid("knot value count mismatch"));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= self.floor && **v <= self.cap)) {
            return Err(Error::invalid(format!(
                "local volatility {v} outside [σ_floor = {}, σ_cap = {}]",
                self.floor, self.cap
            )));
        }
        Ok(LocalVolSurface {
            vols: values,
            ..self.clone()
        })
    }

    pub fn max_vol(&self) -> f64 {
        self.vols.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn min_vol(&self) -> f64 {
        self.vols.iter().copied().fold(f64::MAX, f64::min)
    }

    pub fn vol(&self, t: f64, x: f64) -> f64 {
        self.vol_log(t, x.ln())
    }

    /// `σ` at time `t` and log-price `y`.
    pub fn vol_log(&self, t: f64, y: f64) -> f64 {
        let (i0, i1, wt) = bracket(&self.times, t);
        let (j0, j1, wx) = bracket(&self.log_prices, y);
        let n = self.prices.len();
        let lerp = |a: f64, b: f64, w: f64| a + w * (b - a);
        let lo = lerp(self.vols[i0 * n + j0], self.vols[i0 * n + j1], wx);
        let hi = lerp(self.vols[i1 * n + j0], self.vols[i1 * n + j1], wx);
        lerp(lo, hi, wt)
    }
}

/// Lower/upper knot indices and interpolation weight, clamped to the grid.
fn bracket(knots: &[f64], v: f64) -> (usize, usize, f64) {
    let n = knots.len();
    if !(v > knots[0]) {
        return (0, 0, 0.0);
    }
    if v >= knots[n - 1] {
        return (n - 1, n - 1, 0.0);
    }
    let hi = knots.partition_point(|&k| k <= v);
    let lo = hi - 1;
    (lo, hi, (v - knots[lo]) / (knots[hi] - knots[lo]))
}

/// Range of admissible volatilities for uncertain-volatility pricing.
#[derive(Debug, Clone, PartialEq)]
pub struct VolBand {
    lower: LocalVolSurface,
    upper: LocalVolSurface,
}

impl VolBand {
    pub fn constant(sigma_min: f64, sigma_max: f64) -> Result<Self> {
        if !(sigma_min > 0.0 && sigma_min <= sigma_max && sigma_max.is_finite()) {
            return Err(Error::invalid(format!(
                "volatility band needs 0 < σ_min <= σ_max < ∞, got [{sigma_min}, {sigma_max}]"
            )));
        }
        Ok(VolBand {
            lower: LocalVolSurface::flat(sigma_min)?,
            upper: LocalVolSurface::flat(sigma_max)?,
        })
    }

    /// State-dependent band; `lower <= upper` is checked on the union of both knot sets.
    pub fn state_dependent(lower: LocalVolSurface, upper: LocalVolSurface) -> Result<Self> {
        let ts: Vec<f64> = lower.times().iter().chain(upper.times()).copied().collect();
        let xs: Vec<f64> = lower.prices().iter().chain(upper.prices()).copied().collect();
        for &t in &ts {
            for &x in &xs {
                if lower.vol(t, x) > upper.vol(t, x) {
                    return Err(Error::invalid(format!("band lower bound exceeds upper bound at t={t}, x={x}")));
                }
            }
        }
        Ok(VolBand { lower, upper })
    }

    pub fn lower(&self) -> &LocalVolSurface {
        &self.lower
    }

    pub fn upper(&self) -> &LocalVolSurface {
        &self.upper
    }

    pub fn sigma_max(&self) -> f64 {
        self.upper.max_vol()
    }

    pub fn sigma_min(&self) -> f64 {
        self.lower.min_vol()
    }
}
