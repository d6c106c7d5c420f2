//! Large-deviation most probable paths and rare-event Monte Carlo for the
//! stochastically forced viscous Burgers equation.

pub mod diagnostics;
pub mod error;
pub mod flux;
pub mod grid;
pub mod harness;
pub mod monte_carlo;
pub mod noise;
pub mod optimize;
pub mod rate;

pub use error::{Error, Result};
