//! Smile dynamics for discrete forward-variance models.
//!
//! The crate computes, at first order in vol-of-vol, the implied-volatility
//! smile, its skew, the return skewness, the implied leverage (regression of
//! ATM vol changes on returns) and the skew-stickiness ratio, for a general
//! non-linear forward-variance model and for the fully asymmetric GARCH model
//! in closed form. It also ships the empirical estimators for historical
//! return series and option surfaces, and a seeded Monte Carlo lab that
//! verifies every analytic result against simulation.
//!
//! Modules map one-to-one onto the moving parts:
//!
//! - [`bs`]: Black-Scholes in total variance, implied-variance inversion, the
//!   four derivatives used by the smile expansion.
//! - [`fv`]: the generic framework (curve + kernel + shock) and its ops.
//! - [`garch`]: the asymmetric GARCH specialization and simulator.
//! - [`estimators`]: leverage correlation, low-moment skewness, smile fits,
//!   implied-leverage regression, local SSR, GARCH calibration.
//! - [`mc`]: Monte Carlo pricing of the model smile and the MC estimates of
//!   skew, implied leverage and SSR, with errors and analytic deltas.
//! - [`io`]: CSV loaders/writers for return series and vol surfaces.

pub mod bs;
pub mod error;
pub mod estimators;
pub mod fv;
pub mod garch;
pub mod io;
pub mod mc;
pub mod normal;
pub mod quad;
mod sum;
pub mod units;

pub use error::{Error, Result};
