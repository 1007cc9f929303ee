//! Functionally generated portfolios driven by market weights and book values.

pub mod attribution;
pub mod backtest;
pub mod cli;
pub mod error;
pub mod fgp;
pub mod io;
pub mod market;
pub mod matrix;
pub mod rank;
pub mod sim;
pub mod verify;
pub mod zoo;

pub use error::{Error, Result};
pub use market::{compute_weights, MarketSeries, State, WeightPath};
pub use matrix::Matrix;
