//! Finite-difference solvers: backward pricing equation, Dupire forward equation,
//! state-price densities and the uncertain-volatility (Barenblatt) equation.
//!
//! All solvers work in `y = ln x` on a uniform grid with one node on the spot, and
//! use a θ-scheme (Crank-Nicolson by default) with a Rannacher start.

mod backward;
mod dupire;
pub(crate) mod scheme;
mod surface;

pub use backward::{solve_backward_pricing, solve_bsb, PdeSolution};
pub use dupire::{pricing_kernel, solve_dupire_forward, StateDensity};
pub use scheme::SolveStats;
pub use surface::{LocalVolSurface, VolBand, DEFAULT_VOL_CAP, DEFAULT_VOL_FLOOR};

use crate::error::{Error, Result};

/// Discretization parameters shared by every PDE solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeGrid {
    pub time_steps: usize,
    pub space_nodes: usize,
    /// 0.5 is Crank-Nicolson, 1.0 fully implicit.
    pub theta: f64,
    /// Replace the first step by two fully implicit half-steps.
    pub rannacher: bool,
    /// Half-width of the log-price domain in integrated standard deviations.
    pub std_devs: f64,
    /// Explicit `(y_min, y_max)` overriding the automatic domain.
    pub log_bounds: Option<(f64, f64)>,
    /// Cap on coefficient iterations per step for the Barenblatt equation.
    pub max_policy_iterations: usize,
    /// Spatial accuracy: 4 (five-point stencils, default) or 2 (three-point).
    pub spatial_order: usize,
}

impl PdeGrid {
    pub fn new(time_steps: usize, space_nodes: usize) -> Result<Self> {
        if time_steps < 1 {
            return Err(Error::invalid("PDE grid needs at least one time step"));
        }
        if space_nodes < 3 {
            return Err(Error::invalid("PDE grid needs at least three space nodes"));
        }
        Ok(PdeGrid {
            time_steps,
            space_nodes,
            theta: 0.5,
            rannacher: true,
            std_devs: 6.0,
            log_bounds: None,
            max_policy_iterations: 20,
            spatial_order: 4,
        })
    }

    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::invalid("scheme parameter theta must lie in [0, 1]"));
        }
        self.theta = theta;
        Ok(self)
    }

    pub fn with_spatial_order(mut self, order: usize) -> Result<Self> {
        if order != 2 && order != 4 {
            return Err(Error::invalid("spatial order must be 2 or 4"));
        }
        self.spatial_order = order;
        Ok(self)
    }

    pub fn with_rannacher(mut self, on: bool) -> Self {
        self.rannacher = on;
        self
    }

    pub fn with_log_bounds(mut self, y_min: f64, y_max: f64) -> Result<Self> {
        if !(y_min < y_max) {
            return Err(Error::invalid("log-price bounds must satisfy y_min < y_max"));
        }
        self.log_bounds = Some((y_min, y_max));
        Ok(self)
    }

    pub fn with_std_devs(mut self, n: f64) -> Result<Self> {
        if !(n > 0.0) {
            return Err(Error::invalid("domain width must be positive"));
        }
        self.std_devs = n;
        Ok(self)
    }

    pub(crate) fn log_grid(&self, x0: f64, sd: f64, kinks: &[f64]) -> Result<scheme::LogGrid> {
        let (lo, hi) = self
            .log_bounds
            .unwrap_or_else(|| scheme::log_domain(x0, sd, kinks, self.std_devs));
        scheme::LogGrid::new(x0.ln(), lo, hi, self.space_nodes)
    }
}
