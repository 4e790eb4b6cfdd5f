//! θ-scheme machinery on a uniform log-price grid.
//!
//! Every solver here evolves `u_s = a·u_yy + b·u_y − c·u + src` forward in an
//! evolution variable `s` (time-to-maturity for backward problems, maturity for
//! the forward Dupire problem).

use crate::error::{Error, Result};
use crate::market::Payoff;
use crate::numerics::solve_pentadiagonal;

/// Uniform grid in `y = ln x` with one node placed on the spot.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LogGrid {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub dy: f64,
    pub spot_index: usize,
}

impl LogGrid {
    pub fn new(center: f64, lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        if !(lo < center && center < hi) {
            return Err(Error::invalid(format!(
                "log-price domain [{lo}, {hi}] must strictly contain ln x0 = {center}"
            )));
        }
        if nodes < 3 {
            return Err(Error::invalid("space grid needs at least 3 nodes"));
        }
        let dy = (hi - lo) / (nodes - 1) as f64;
        let spot_index = (((center - lo) / dy).round() as usize).clamp(1, nodes - 2);
        let start = center - spot_index as f64 * dy;
        let y: Vec<f64> = (0..nodes)
            .map(|j| if j == spot_index { center } else { start + j as f64 * dy })
            .collect();
        let x = y.iter().map(|v| v.exp()).collect();
        Ok(LogGrid { y, x, dy, spot_index })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }
}

/// Log-price bounds: `n_std` standard deviations beyond the spot and every
/// payoff kink that lies within reach of the diffusion.
pub(crate) fn log_domain(x0: f64, sd: f64, kinks: &[f64], n_std: f64) -> (f64, f64) {
    let center = x0.ln();
    let sd = sd.max(0.02);
    let reach = 2.0 * n_std * sd;
    let (mut lo, mut hi) = (center, center);
    for &k in kinks.iter().filter(|k| **k > 0.0) {
        let yk = k.ln();
        if (yk - center).abs() <= reach {
            lo = lo.min(yk);
            hi = hi.max(yk);
        }
    }
    (lo - n_std * sd, hi + n_std * sd)
}

/// Nodal payoff values.
///
/// Nodes within two cells of a kink receive the payoff smoothed with the
/// fourth-order Kreiss kernel, which keeps high-order convergence for kinked data.
pub(crate) fn initial_values(grid: &LogGrid, payoff: &Payoff) -> Vec<f64> {
    let kinks: Vec<f64> = payoff
        .breakpoints()
        .iter()
        .filter(|k| **k > 0.0)
        .map(|k| k.ln())
        .collect();
    let dy = grid.dy;
    grid.y
        .iter()
        .zip(&grid.x)
        .map(|(&y, &x)| {
            // Kink positions in cell units relative to this node.
            let mut cuts: Vec<f64> = kinks
                .iter()
                .map(|k| (k - y) / dy)
                .filter(|s| s.abs() < 2.0)
                .collect();
            if cuts.is_empty() {
                return payoff.eval(x);
            }
            cuts.extend([-2.0, -1.0, 0.0, 1.0, 2.0]);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            cuts.windows(2)
                .map(|w| gauss4(|s| kreiss_kernel(s) * payoff.eval((y + s * dy).exp()), w[0], w[1]))
                .sum()
        })
        .collect()
}

/// Four-point Gauss-Legendre rule on [a, b].
fn gauss4(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const NODES: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
    const WEIGHTS: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    NODES.iter().zip(WEIGHTS).map(|(x, w)| w * f(m + h * x)).sum::<f64>() * h
}

/// Smoothing kernel with unit mass and vanishing moments up to third order.
fn kreiss_kernel(s: f64) -> f64 {
    let a = s.abs();
    if a <= 1.0 {
        1.0 - 2.5 * a * a + 1.5 * a * a * a
    } else if a <= 2.0 {
        0.5 * (2.0 - a) * (2.0 - a) * (1.0 - a)
    } else {
        0.0
    }
}

/// Per-node coefficients of `a·u_yy + b·u_y − c·u + src`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Coefs {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub src: Vec<f64>,
}

impl Coefs {
    pub fn zeros(n: usize) -> Self {
        Coefs {
            a: vec![0.0; n],
            b: vec![0.0; n],
            c: vec![0.0; n],
            src: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Boundary {
    /// Dirichlet value.
    Value(f64),
    /// Node evolves with its reaction and source terms only.
    Local,
}

/// Weights of `u_yy` and `u_y` at offsets `-2..=2` around node `j`.
///
/// Fourth-order five-point stencils where they fit, three-point stencils next to the boundary.
fn stencil(order: usize, j: usize, n: usize, dy: f64) -> ([f64; 5], [f64; 5]) {
    if order >= 4 && j >= 2 && j + 2 < n {
        let h2 = 12.0 * dy * dy;
        let h1 = 12.0 * dy;
        (
            [-1.0 / h2, 16.0 / h2, -30.0 / h2, 16.0 / h2, -1.0 / h2],
            [1.0 / h1, -8.0 / h1, 0.0, 8.0 / h1, -1.0 / h1],
        )
    } else {
        let h2 = dy * dy;
        let h1 = 2.0 * dy;
        ([0.0, 1.0 / h2, -2.0 / h2, 1.0 / h2, 0.0], [0.0, -1.0 / h1, 0.0, 1.0 / h1, 0.0])
    }
}

fn apply_weights(u: &[f64], j: usize, w: &[f64; 5]) -> f64 {
    let mut total = 0.0;
    for (o, wo) in w.iter().enumerate() {
        if *wo != 0.0 {
            total += wo * u[j + o - 2];
        }
    }
    total
}

/// `u_yy − u_y` at interior node `j`, i.e. the discrete `x² u_xx`.
pub(crate) fn log_curvature(u: &[f64], j: usize, dy: f64, order: usize) -> f64 {
    let (w2, w1) = stencil(order, j, u.len(), dy);
    apply_weights(u, j, &w2) - apply_weights(u, j, &w1)
}

/// One θ-step from `old` (coefficients `k_old`) to the new level (coefficients `k_new`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn theta_step(
    old: &[f64],
    k_old: &Coefs,
    k_new: &Coefs,
    dt: f64,
    theta: f64,
    dy: f64,
    order: usize,
    bounds: (Boundary, Boundary),
) -> Result<Vec<f64>> {
    let n = old.len();
    let mut bands = [vec![0.0; n], vec![0.0; n], vec![1.0; n], vec![0.0; n], vec![0.0; n]];
    let mut rhs = vec![0.0; n];
    for j in 1..n - 1 {
        let (w2, w1) = stencil(order, j, n, dy);
        let mut explicit = 0.0;
        for o in 0..5 {
            if w2[o] == 0.0 && w1[o] == 0.0 && o != 2 {
                continue;
            }
            let reaction = if o == 2 { 1.0 } else { 0.0 };
            let implicit = k_new.a[j] * w2[o] + k_new.b[j] * w1[o] - k_new.c[j] * reaction;
            bands[o][j] = reaction - theta * dt * implicit;
            if theta < 1.0 {
                let op = k_old.a[j] * w2[o] + k_old.b[j] * w1[o] - k_old.c[j] * reaction;
                explicit += op * old[j + o - 2];
            }
        }
        rhs[j] = old[j]
            + (1.0 - theta) * dt * (explicit + k_old.src[j])
            + theta * dt * k_new.src[j];
    }
    for (j, bc) in [(0, bounds.0), (n - 1, bounds.1)] {
        match bc {
            Boundary::Value(v) => {
                bands[2][j] = 1.0;
                rhs[j] = v;
            }
            Boundary::Local => {
                bands[2][j] = 1.0 + theta * dt * k_new.c[j];
                rhs[j] = old[j] * (1.0 - (1.0 - theta) * dt * k_old.c[j])
                    + dt * (theta * k_new.src[j] + (1.0 - theta) * k_old.src[j]);
            }
        }
    }
    let [l2, l1, d, u1, u2] = &mut bands;
    if !solve_pentadiagonal(l2, l1, d, u1, u2, &mut rhs) {
        return Err(Error::numeric("singular system in θ-step"));
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("non-finite value in PDE solve"));
    }
    Ok(rhs)
}

/// Solver diagnostics attached to every solution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub scheme: String,
    pub steps: usize,
    /// Largest number of coefficient iterations needed within one step (1 for linear problems).
    pub max_inner_iterations: usize,
    pub warnings: Vec<String>,
}

/// Evolution driver shared by all solvers.
pub(crate) struct Evolver<'a> {
    pub grid: &'a LogGrid,
    pub theta: f64,
    pub rannacher: bool,
    /// Maximum coefficient iterations per step for state-dependent coefficients.
    pub max_inner: usize,
    /// Spatial accuracy order, 2 or 4.
    pub order: usize,
    /// Project each step onto `u ≥ 0`; only valid when the exact solution is nonnegative.
    pub nonnegative: bool,
}

impl Evolver<'_> {
    /// Evolves `u` through the levels `s[0] < s[1] < ...`, calling `record(k, u)` at each level.
    ///
    /// `coefs(s, state, out)` fills coefficients at evolution time `s`; `state` is the
    /// current iterate, which only nonlinear problems inspect. It returns `true` when the
    /// coefficients depend on the state.
    pub fn run<C, B, R>(&self, s: &[f64], init: Vec<f64>, mut coefs: C, bounds: B, mut record: R) -> Result<SolveStats>
    where
        C: FnMut(f64, &[f64], &mut Coefs) -> bool,
        B: Fn(f64) -> (Boundary, Boundary),
        R: FnMut(usize, &[f64]),
    {
        let n = self.grid.len();
        let dy = self.grid.dy;
        let mut stats = SolveStats {
            scheme: format!(
                "theta={}, order {}{}",
                self.theta,
                self.order,
                if self.rannacher { ", rannacher start" } else { "" }
            ),
            steps: 0,
            max_inner_iterations: 0,
            warnings: Vec::new(),
        };
        let mut u = init;
        record(0, &u);
        let mut k_old = Coefs::zeros(n);
        let mut k_new = Coefs::zeros(n);
        let mut warned_ratio = false;
        for level in 1..s.len() {
            let (s0, s1) = (s[level - 1], s[level]);
            // The damping half-steps use three-point stencils, which keep them monotone.
            let substeps: Vec<(f64, f64, f64, usize)> = if level == 1 && self.rannacher {
                let mid = 0.5 * (s0 + s1);
                vec![(s0, mid, 1.0, 2), (mid, s1, 1.0, 2)]
            } else {
                vec![(s0, s1, self.theta, self.order)]
            };
            for (from, to, theta, order) in substeps {
                let dt = to - from;
                coefs(from, &u, &mut k_old);
                let nonlinear = coefs(to, &u, &mut k_new);
                if !warned_ratio {
                    let a_max = k_new.a.iter().copied().fold(0.0, f64::max);
                    if a_max * dt / (dy * dy) > 500.0 {
                        stats.warnings.push(format!(
                            "diffusion ratio {:.1} is large; refine the time grid",
                            a_max * dt / (dy * dy)
                        ));
                        warned_ratio = true;
                    }
                    if (1..n - 1).any(|j| k_new.b[j].abs() * dy > 2.0 * k_new.a[j] && k_new.a[j] > 0.0) {
                        stats.warnings.push("convection-dominated cells; refine the space grid".into());
                        warned_ratio = true;
                    }
                }
                let bc = bounds(to);
                let mut next = theta_step(&u, &k_old, &k_new, dt, theta, dy, order, bc)?;
                let mut iterations = 1;
                if nonlinear {
                    let mut deltas: Vec<f64> = Vec::new();
                    loop {
                        let prev_a = k_new.a.clone();
                        coefs(to, &next, &mut k_new);
                        if k_new.a == prev_a {
                            break;
                        }
                        if iterations >= self.max_inner {
                            let flips = k_new.a.iter().zip(&prev_a).filter(|(p, q)| p != q).count();
                            let stalled = deltas.len() >= 3
                                && deltas[deltas.len() - 1] >= deltas[deltas.len() - 3];
                            if stalled {
                                return Err(Error::numeric(format!(
                                    "volatility policy oscillates at {flips} nodes near s = {to:.6}; \
                                     use a finer grid or a fully implicit scheme (theta = 1)"
                                )));
                            }
                            stats.warnings.push(format!(
                                "policy iteration capped at {} with {flips} unsettled nodes at s = {to:.6}",
                                self.max_inner
                            ));
                            break;
                        }
                        let again = theta_step(&u, &k_old, &k_new, dt, theta, dy, order, bc)?;
                        let delta = again.iter().zip(&next).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                        deltas.push(delta);
                        next = again;
                        iterations += 1;
                    }
                }
                stats.max_inner_iterations = stats.max_inner_iterations.max(iterations);
                stats.steps += 1;
                if self.nonnegative {
                    next.iter_mut().for_each(|v| *v = v.max(0.0));
                }
                u = next;
            }
            record(level, &u);
        }
        Ok(stats)
    }
}

/// Evolution levels `[0, τ]` with `m` uniform steps.
pub(crate) fn uniform_levels(tau: f64, m: usize) -> Vec<f64> {
    (0..=m).map(|k| if k == m { tau } else { tau * k as f64 / m as f64 }).collect()
}

/// Cubic Lagrange interpolation of nodal values on a uniform grid.
pub(crate) fn interpolate_uniform(y: &[f64], u: &[f64], v: f64) -> f64 {
    let n = y.len();
    let dy = y[1] - y[0];
    if v <= y[0] {
        return u[0];
    }
    if v >= y[n - 1] {
        return u[n - 1];
    }
    let j = (((v - y[0]) / dy).floor() as usize).min(n - 2);
    if n < 4 {
        let w = (v - y[j]) / (y[j + 1] - y[j]);
        return u[j] + w * (u[j + 1] - u[j]);
    }
    let start = j.saturating_sub(1).min(n - 4);
    let mut total = 0.0;
    for i in start..start + 4 {
        let mut w = 1.0;
        for m in start..start + 4 {
            if m != i {
                w *= (v - y[m]) / (y[i] - y[m]);
            }
        }
        total += w * u[i];
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_places_spot_on_node() {
        let g = LogGrid::new(100f64.ln(), 3.0, 6.0, 101).unwrap();
        assert_eq!(g.y[g.spot_index], 100f64.ln());
        assert!((g.x[g.spot_index] - 100.0).abs() < 1e-12);
        assert!(LogGrid::new(7.0, 3.0, 6.0, 101).is_err());
    }

    #[test]
    fn kernel_has_unit_mass_and_vanishing_moments() {
        for p in 0..4 {
            let m: f64 = [-2.0, -1.0, 0.0, 1.0]
                .iter()
                .map(|&a| gauss4(|s| kreiss_kernel(s) * s.powi(p), a, a + 1.0))
                .sum();
            let expected = if p == 0 { 1.0 } else { 0.0 };
            assert!((m - expected).abs() < 1e-14, "moment {p}: {m}");
        }
    }

    #[test]
    fn smoothing_only_near_kinks() {
        let g = LogGrid::new(0.0, -1.0, 1.0, 21).unwrap();
        let call = Payoff::call(1.0).unwrap();
        let init = initial_values(&g, &call);
        assert!(init[g.spot_index] > 0.0);
        assert_eq!(init[g.spot_index + 3], call.eval(g.x[g.spot_index + 3]));
        assert_eq!(init[g.spot_index - 2], 0.0);
        // smoothing a function that is linear in y leaves it unchanged
        let lin = Payoff::from_points(vec![0.0, 1.0], vec![0.0, 0.0], 0.0).unwrap();
        assert!(initial_values(&g, &lin).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cubic_interpolation_exact_on_cubics() {
        let y: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let u: Vec<f64> = y.iter().map(|v| v * v * v - v).collect();
        let v = 0.437;
        assert!((interpolate_uniform(&y, &u, v) - (v * v * v - v)).abs() < 1e-12);
    }
}
