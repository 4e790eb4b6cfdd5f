//! Local-volatility calibration.

mod asymptotic;
mod avellaneda;
mod inversion;
mod screen;
mod surface;
mod tikhonov;

pub use asymptotic::implied_vol_small_time;
pub use avellaneda::avellaneda_penalty;
pub use inversion::{dupire_local_vol, DupireLocalVol, InvalidReason};
pub use screen::{screen_quotes, QuoteViolation};
pub use surface::{PriceSurface, SurfaceDerivatives, SurfaceViolation, ViolationKind};
pub use tikhonov::{
    calibrate_tikhonov, gradient_penalty, knot_sensitivity, model_prices, objective_g, objective_j, CalibrationProblem,
    CalibrationReport, PenaltyMode, QuoteResidual, KNOT_BOUNDS,
};
