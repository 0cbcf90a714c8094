//! Segmented amplitude-modulated pulse design for parallel XX gates on a
//! trapped-ion chain, analytic fidelity prediction, and a spin-level circuit
//! simulator for verification.

pub mod chain;
pub mod cli;
pub mod error;
pub mod evaluator;
pub mod io;
pub mod kernel;
pub mod optimizer;
pub mod sim;
pub mod units;

pub use error::{Error, Result};
