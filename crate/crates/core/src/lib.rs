//! Inductive (split) conformal prediction.
//!
//! A fitted base model is turned into a set-valued predictor by scoring a
//! held-out calibration set, taking the `⌈(n+1)(1-α)⌉`-th smallest score as a
//! threshold, and using that threshold to build intervals (regression) or
//! class sets (classification) with marginal coverage of at least `1-α`.
//!
//! Modules:
//!
//! - [`dataset`]: CSV ingestion, seeded splitting and synthetic generators.
//! - [`quantile`]: the finite-sample conformal quantile.
//! - [`models`]: KNN, affine quantile regression and softmax base models.
//! - [`regression`]: naive, residual-normalized and quantile-band intervals.
//! - [`classification`]: naive, class-balanced and adaptive prediction sets.
//! - [`diagnostics`]: coverage, the Beta coverage law, KS checks and trials.
//! - [`pipeline`]: end-to-end configuration binding all of the above.

pub mod classification;
pub mod dataset;
pub mod diagnostics;
mod error;
mod exec;
pub mod models;
pub mod pipeline;
pub mod quantile;
pub mod regression;
pub mod rng;

pub use error::{Error, Result};
pub use exec::Execution;
