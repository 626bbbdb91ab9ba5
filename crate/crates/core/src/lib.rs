//! Probabilistic programs as suspendable computations, with inference
//! algorithms built from small handler-interpreters.
//!
//! A model issues three kinds of request: `Sample` (answered with a unit
//! uniform), `Score` (a likelihood factor) and `Yield` (a point where
//! sequential Monte Carlo may pause it). Importance sampling, SMC, trace
//! Metropolis–Hastings, resample-move SMC and particle marginal MH are each a
//! particular stack of handlers around the same model.

pub mod cli;
pub mod dataio;
pub mod effects;
pub mod error;
pub mod handlers;
pub mod inference;
pub mod logweight;
pub mod models;
pub mod oracles;
pub mod randomness;

pub use effects::{Model, Request, Response, Resumption, Step};
pub use error::{Error, Result};
pub use inference::Histogram;
pub use logweight::LogWeight;
pub use randomness::RngState;
