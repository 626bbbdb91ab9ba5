//! Inference algorithms assembled from the handlers.
//!
//! Every algorithm takes a master [`RngState`](crate::RngState). Population
//! methods take one draw from it per generation and give particle `i` the
//! ChaCha stream `i` under that draw, so results do not depend on how many
//! worker threads advance the particles.

mod histogram;
mod importance;
mod mcmc;
mod pmmh;
mod resample;
mod smc;
mod workers;

pub use histogram::{effective_sample_size, Histogram};
pub use importance::{importance_sampling, importance_sampling_with, populate, populate_with};
pub use mcmc::{acceptance_probability, mh_step, perturb_trace, tmcmc, TmcmcOutput, TraceRecord};
pub use pmmh::{pmmh, pmmh_model, PmmhConfig};
pub use resample::{multinomial_indices, multinomial_resample};
pub use smc::{rmsmc, rmsmc_with, smc, smc_with, Particle, ParticleState, SmcConfig, SmcDiagnostics, SmcOutput};
pub use workers::Workers;
