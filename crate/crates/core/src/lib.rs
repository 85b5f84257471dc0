//! Tail analysis of Markov-switching Ornstein-Uhlenbeck processes.
//!
//! Given `dY = a(X) Y dt + sigma(X) dW` with `X` a finite ergodic jump
//! process, the crate decides whether the stationary law of `Y` is light or
//! heavy tailed, computes the heavy-tail exponent by two spectral routes, and
//! provides exact-discretization Monte Carlo to check those predictions.

pub mod error;
pub mod jump_process;
pub mod linalg;
pub mod model;
pub mod montecarlo;
pub mod path_functionals;
pub mod rng;
pub mod samples_io;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{SwitchingModel, RawModel};
pub use rng::RngStream;
