//! Monte Carlo engine for physically settled European swaptions whose exercise
//! decision accounts for future valuation adjustments (CVA, FVA, COLVA, KVA, MVA).
//!
//! The pipeline:
//!
//! 1. [`ratesim`] simulates a shifted two-factor LIBOR market model with a
//!    common CIR stochastic volatility under the spot-LIBOR measure.
//! 2. [`instruments`] values swaps and swaptions pathwise on the simulated
//!    curves.
//! 3. [`margin`] produces historical expected-shortfall initial margin and a
//!    simplified regulatory capital profile.
//! 4. [`xva`] turns exposure profiles into valuation-adjustment integrals via
//!    a generic (alpha, beta, gamma, delta) term family and trapezoid weights.
//! 5. [`lsm`] estimates conditional expectations by local regression and runs
//!    the two-phase Longstaff-Schwartz scheme.
//! 6. [`exercise`] applies the adjusted exercise criterion at expiry, prices
//!    single options and small option portfolios, and builds reports.
//! 7. [`smile`] inverts prices into normal / lognormal implied volatilities.

pub mod error;
pub mod exercise;
pub mod instruments;
pub mod lsm;
pub mod margin;
pub mod ratesim;
pub mod smile;
pub mod xva;

pub use error::{EngineError, Result};
