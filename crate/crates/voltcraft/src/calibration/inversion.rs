use super::PriceSurface;
use crate::error::{Error, Result};
use crate::pde::{LocalVolSurface, DEFAULT_VOL_CAP, DEFAULT_VOL_FLOOR};
use serde::Serialize;

/// Local volatility recovered from a call surface, with the nodes that had to be filled.
#[derive(Debug, Clone)]
pub struct DupireLocalVol {
    pub surface: LocalVolSurface,
    /// `(maturity index, strike index)` into the output lattice.
    pub invalid_nodes: Vec<(usize, usize)>,
    pub reasons: Vec<InvalidReason>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InvalidReason {
    /// `C_KK` below the convexity threshold.
    FlatCurvature,
    /// Negative radicand.
    NegativeVariance,
}

/// Local volatility `σ²(T, K) = 2 (C_T + r K C_K) / (K² C_KK)` on the interior strikes.
///
/// Derivatives come from the surface's exact derivatives when attached, otherwise from
/// non-uniform three-point differences (central in the interior, one-sided on the first
/// and last maturity). Invalid nodes take the value of the nearest valid node.
pub fn dupire_local_vol(surface: &PriceSurface) -> Result<DupireLocalVol> {
    let ts = surface.maturities();
    let ks = surface.strikes();
    let (nt, nk) = (ts.len(), ks.len());
    let market = &surface.market;
    let x0 = market.x0;
    let eps_conv = 1e-10 / x0;

    let exact = surface.derivatives();
    let (j_lo, j_hi) = if exact.is_some() { (0, nk) } else { (1, nk.saturating_sub(1)) };
    if j_hi <= j_lo || (exact.is_none() && nt < 2) {
        return Err(Error::invalid(
            "Dupire inversion needs at least three strikes and two maturities",
        ));
    }

    let mut sigma = vec![vec![f64::NAN; j_hi - j_lo]; nt];
    let mut invalid = Vec::new();
    let mut reasons = Vec::new();
    for i in 0..nt {
        let r = market.rate.rate_at(ts[i]);
        for j in j_lo..j_hi {
            let k = ks[j];
            let (c_t, k_c_k, k2_c_kk) = match exact {
                Some(d) => {
                    let at = i * nk + j;
                    (d.dc_dt[at], k * d.dc_dk[at], k * k * d.d2c_dk2[at])
                }
                None => {
                    let c = |jj: usize| surface.value(i, jj);
                    let (d1, d2) = three_point(&ks[j - 1..=j + 1], &[c(j - 1), c(j), c(j + 1)], 1);
                    let c_t = time_derivative(ts, |ii| surface.value(ii, j), i);
                    (c_t, k * d1, k * k * d2)
                }
            };
            let jj = j - j_lo;
            if k2_c_kk < eps_conv * k * k {
                invalid.push((i, jj));
                reasons.push(InvalidReason::FlatCurvature);
                continue;
            }
            let radicand = 2.0 * (c_t + r * k_c_k) / k2_c_kk;
            if !(radicand >= 0.0) {
                invalid.push((i, jj));
                reasons.push(InvalidReason::NegativeVariance);
                continue;
            }
            sigma[i][jj] = radicand.sqrt().clamp(DEFAULT_VOL_FLOOR, DEFAULT_VOL_CAP);
        }
    }
    let total = nt * (j_hi - j_lo);
    if 2 * invalid.len() > total {
        return Err(Error::IllPosed(format!(
            "{} of {} nodes have no valid local volatility; the price surface is too irregular to invert",
            invalid.len(),
            total
        )));
    }
    fill_nearest(&mut sigma, &invalid);
    let mut times = ts.to_vec();
    if nt == 1 {
        // A single row is extended flat in time to form a lattice.
        times.push(ts[0] + 1.0);
        sigma.push(sigma[0].clone());
    }
    let mut prices = ks[j_lo..j_hi].to_vec();
    if prices.len() == 1 {
        prices.push(prices[0] * 1.01);
        sigma.iter_mut().for_each(|row| row.push(row[0]));
    }
    Ok(DupireLocalVol {
        surface: LocalVolSurface::new(times, prices, sigma)?,
        invalid_nodes: invalid,
        reasons,
    })
}

/// First and second derivative at the middle (`at = 1`) or an end node of three points.
fn three_point(x: &[f64], f: &[f64], at: usize) -> (f64, f64) {
    let (h1, h2) = (x[1] - x[0], x[2] - x[1]);
    let second = 2.0 * (h1 * (f[2] - f[1]) - h2 * (f[1] - f[0])) / (h1 * h2 * (h1 + h2));
    let first = match at {
        0 => (-(2.0 * h1 + h2) * h2 * f[0] + (h1 + h2).powi(2) * f[1] - h1 * h1 * f[2]) / (h1 * h2 * (h1 + h2)),
        1 => (-h2 * h2 * f[0] + (h2 * h2 - h1 * h1) * f[1] + h1 * h1 * f[2]) / (h1 * h2 * (h1 + h2)),
        _ => (h2 * h2 * f[0] - (h1 + h2).powi(2) * f[1] + (h1 * h1 + 2.0 * h1 * h2) * f[2]) / (h1 * h2 * (h1 + h2)),
    };
    (first, second)
}

fn time_derivative(ts: &[f64], c: impl Fn(usize) -> f64, i: usize) -> f64 {
    let n = ts.len();
    if n == 2 {
        return (c(1) - c(0)) / (ts[1] - ts[0]);
    }
    let (start, at) = if i == 0 {
        (0, 0)
    } else if i == n - 1 {
        (n - 3, 2)
    } else {
        (i - 1, 1)
    };
    three_point(&ts[start..start + 3], &[c(start), c(start + 1), c(start + 2)], at).0
}

/// Replaces NaN entries by the nearest valid entry in index distance (maturity ties broken first).
fn fill_nearest(grid: &mut [Vec<f64>], invalid: &[(usize, usize)]) {
    let snapshot: Vec<Vec<f64>> = grid.to_vec();
    for &(i, j) in invalid {
        let mut best: Option<(usize, f64)> = None;
        for (ii, row) in snapshot.iter().enumerate() {
            for (jj, v) in row.iter().enumerate() {
                if v.is_nan() {
                    continue;
                }
                let d = i.abs_diff(ii).pow(2) + j.abs_diff(jj).pow(2);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, *v));
                }
            }
        }
        grid[i][j] = best.map(|b| b.1).unwrap_or(DEFAULT_VOL_FLOOR);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{bs_call_price, BsParams};
    use crate::calibration::SurfaceDerivatives;
    use crate::market::MarketState;
    use crate::numerics::{norm_cdf, norm_pdf};

    #[test]
    fn flat_vol_with_exact_derivatives() {
        let mk = MarketState::flat(100.0, 0.0).unwrap();
        let ts = vec![0.25, 0.5, 1.0];
        let ks: Vec<f64> = (0..9).map(|j| 70.0 + 7.5 * j as f64).collect();
        let s = 0.2;
        let surf = PriceSurface::from_fn(mk.clone(), ts.clone(), ks.clone(), |t, k| {
            bs_call_price(&BsParams::new(100.0, k, t, 0.0, s).unwrap())
        })
        .unwrap();
        let mut d = SurfaceDerivatives { dc_dt: vec![], dc_dk: vec![], d2c_dk2: vec![] };
        for &t in &ts {
            for &k in &ks {
                let sd = s * t.sqrt();
                let d1 = ((100.0 / k).ln() + 0.5 * sd * sd) / sd;
                let d2 = d1 - sd;
                d.dc_dt.push(100.0 * norm_pdf(d1) * s / (2.0 * t.sqrt()));
                d.dc_dk.push(-norm_cdf(d2));
                d.d2c_dk2.push(norm_pdf(d2) / (k * sd));
            }
        }
        let out = dupire_local_vol(&surf.with_derivatives(d).unwrap()).unwrap();
        assert!(out.invalid_nodes.is_empty());
        assert!(out.surface.values().iter().all(|v| (v - 0.2).abs() < 1e-6));
    }

    #[test]
    fn flat_vol_with_finite_differences() {
        let mk = MarketState::flat(100.0, 0.03).unwrap();
        let ts: Vec<f64> = (0..21).map(|i| 0.5 + 0.01 * i as f64).collect();
        let ks: Vec<f64> = (0..41).map(|j| 80.0 * (1.5f64).powf(j as f64 / 40.0)).collect();
        let surf = PriceSurface::from_fn(mk, ts, ks, |t, k| bs_call_price(&BsParams::new(100.0, k, t, 0.03, 0.25).unwrap())).unwrap();
        let out = dupire_local_vol(&surf).unwrap();
        assert!(out.surface.values().iter().all(|v| (v - 0.25).abs() < 2e-3), "{:?}", out.surface.values());
    }

    #[test]
    fn linear_region_is_flagged_and_filled() {
        let mk = MarketState::flat(100.0, 0.0).unwrap();
        let ts = vec![0.5, 0.75, 1.0];
        let ks: Vec<f64> = (0..11).map(|j| 80.0 + 4.0 * j as f64).collect();
        // Deep in-the-money strikes have essentially linear prices: splice in an exactly linear patch.
        let surf = PriceSurface::from_fn(mk, ts, ks, |t, k| {
            let c = |k: f64| bs_call_price(&BsParams::new(100.0, k, t, 0.0, 0.2).unwrap());
            if k <= 88.0 {
                c(88.0) + (88.0 - k)
            } else {
                c(k)
            }
        })
        .unwrap();
        let out = dupire_local_vol(&surf).unwrap();
        assert!(out.invalid_nodes.contains(&(1, 0)));
        let v = out.surface.knot(1, 0);
        assert!(v > 0.1 && v < 0.4);
    }

    #[test]
    fn mostly_flat_surface_is_ill_posed() {
        let mk = MarketState::flat(100.0, 0.0).unwrap();
        let surf = PriceSurface::from_fn(mk, vec![0.5, 1.0], vec![10.0, 20.0, 30.0, 40.0], |_, k| 100.0 - k).unwrap();
        let out = dupire_local_vol(&surf);
        assert!(matches!(out, Err(Error::IllPosed(_))), "{:?}", out.map(|o| o.invalid_nodes));
    }

    #[test]
    fn three_point_weights_are_exact_on_quadratics() {
        let x = [0.0, 0.3, 1.0];
        let f: Vec<f64> = x.iter().map(|v| 2.0 + 3.0 * v - 1.5 * v * v).collect();
        for at in 0..3 {
            let (d1, d2) = three_point(&x, &f, at);
            assert!((d1 - (3.0 - 3.0 * x[at])).abs() < 1e-12);
            assert!((d2 + 3.0).abs() < 1e-12);
        }
    }
}
