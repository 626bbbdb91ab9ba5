use crate::effects::{score, Model};
use crate::error::{Error, Result};
use crate::handlers::{random_sampler, run, weighted, Unhandled};
use crate::logweight::LogWeight;
use crate::randomness::RngState;

use super::{Histogram, Workers};

/// Weight `1/k` of one of `k` fresh particles.
pub(crate) fn particle_share(k: usize) -> LogWeight {
    LogWeight::from_log(-(k as f64).ln())
}

/// Generator for particle `i` of a population keyed by `base`.
pub(crate) fn particle_rng(base: u64, i: usize) -> RngState {
    RngState::with_stream(base, i as u64)
}

pub(crate) fn check_particles(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::Config("particle count must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// `k` independent weighted runs of `model`, each prefixed by a `1/k` score.
/// Run `i` draws from its own stream keyed by one draw from `rng`.
pub fn populate<V>(k: usize, model: &Model<V>, rng: &mut RngState) -> Result<Histogram<V>>
where
    V: Send + Sync + 'static,
{
    populate_with(k, model, rng, &Workers::sequential())
}

pub fn populate_with<V>(k: usize, model: &Model<V>, rng: &mut RngState, workers: &Workers) -> Result<Histogram<V>>
where
    V: Send + Sync + 'static,
{
    check_particles(k)?;
    let base = rng.next_u64();
    let seeded = score(particle_share(k)).then(model.clone());
    let runs = workers.map((0..k).collect(), |_, i| {
        let mut rng = particle_rng(base, i);
        let r = random_sampler(&mut rng, &mut Unhandled, |h| {
            weighted(LogWeight::ONE, h, |h| run(seeded.start()?, h))
        })?;
        Ok((r.weight, r.value))
    })?;
    Ok(Histogram::from_entries(runs))
}

/// `normalise(populate(k, model))`.
pub fn importance_sampling<V>(model: &Model<V>, k: usize, rng: &mut RngState) -> Result<Histogram<V>>
where
    V: Send + Sync + 'static,
{
    importance_sampling_with(model, k, rng, &Workers::sequential())
}

pub fn importance_sampling_with<V>(
    model: &Model<V>,
    k: usize,
    rng: &mut RngState,
    workers: &Workers,
) -> Result<Histogram<V>>
where
    V: Send + Sync + 'static,
{
    populate_with(k, model, rng, workers)?.normalise()
}
