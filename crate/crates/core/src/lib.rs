//! Optimal investment for a defined-contribution pension plan whose risky
//! asset follows an Ornstein-Uhlenbeck process and whose bank charges a loan
//! rate above its deposit rate.
//!
//! - [`market`]: model constants and asset dynamics.
//! - [`policy`]: the closed-form three-regime policy and value functions.
//! - [`simulation`]: deterministic parallel Monte Carlo of price and wealth.
//! - [`verification`]: numerical oracles for the closed form.
//! - [`config`] and [`sweep`]: the command-line layer.

pub mod config;
pub mod error;
pub mod market;
pub mod policy;
pub mod simulation;
pub mod stats;
pub mod sweep;
pub mod verification;

pub use error::{Error, Result};
pub use market::{MarketParams, PriceStepper, StatePoint};
pub use policy::{optimal_policy, PolicyDecision, Regime};
pub use simulation::{PathStats, SimConfig, WealthScheme};
