//! Duffing oscillator system identification with single- and multi-task NARX
//! networks.
//!
//! The pipeline: [`oscillator`] simulates forcing and displacement,
//! [`noise`] adds measurement noise, [`dataset`] embeds the series into
//! lag/lead rows, [`network`] trains a one-hidden-layer tanh network,
//! [`evaluation`] scores one-step-ahead and free-run predictions, and
//! [`sweep`] runs the hyperparameter grids. [`pipeline`] ties the stages to
//! on-disk artifacts for the `narx-lab` binary.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod matrix;
pub mod network;
pub mod noise;
pub mod oscillator;
pub mod pipeline;
pub mod series;
pub mod sweep;

pub use error::{NarxError, Result};
pub use series::TimeSeries;
