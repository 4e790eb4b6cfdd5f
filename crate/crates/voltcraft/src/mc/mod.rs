//! Path simulation, Monte-Carlo prices and Greeks, hedging experiments and BSDEs.

mod bsde;
mod estimate;
mod hedge;
mod paths;

pub use bsde::{solve_bsde, BsdeSolution, Driver, DriverFn};
pub use estimate::{mc_delta, mc_delta_bump, mc_price, DeltaMethod, McEstimate, TerminalClaim, Variance};
pub use hedge::{simulate_delta_hedge, HedgeExperiment, HedgeSpec};
pub use paths::{simulate_paths, PathBatch, PathModel, SimulationSpec, StochasticVol};
