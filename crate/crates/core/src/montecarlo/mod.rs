//! Monte Carlo estimators: stationary sampling, empirical tail statistics,
//! and the backward walk maximum.

mod stationary;
mod tail;
mod walk;

pub use stationary::*;
pub use tail::*;
pub use walk::*;
