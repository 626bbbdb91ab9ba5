use std::sync::Arc;

use crate::effects::{pure, sample, score, Model};
use crate::error::Result;
use crate::logweight::LogWeight;
use crate::randomness::RngState;

use super::mcmc::{tmcmc, TmcmcOutput};
use super::smc::{smc_with, SmcConfig};
use super::Workers;

#[derive(Clone, Debug, PartialEq)]
pub struct PmmhConfig {
    /// Particles in each inner SMC run.
    pub particles: usize,
    /// Resampling rounds in each inner SMC run.
    pub smc_steps: usize,
    pub step_size: usize,
    /// Outer MH updates.
    pub mh_steps: usize,
    pub burnin: usize,
}

impl Default for PmmhConfig {
    fn default() -> Self {
        PmmhConfig {
            particles: 10,
            smc_steps: 10,
            step_size: 1,
            mh_steps: 10,
            burnin: 0,
        }
    }
}

/// Seed for an inner run, taken from the 53 significant bits of a uniform.
fn seed_from_unit(u: f64) -> u64 {
    (u * (1u64 << 53) as f64) as u64
}

/// The model PMMH runs trace MH over: draw parameters, draw one uniform that
/// seeds an inner unnormalised SMC on `main_model(params)`, and score the sum
/// of the inner weights. The inner run answers all of the main model's
/// requests itself, so the outer trace holds only the parameter draws and
/// the seed. An inner population that collapses scores zero.
pub fn pmmh_model<P, V, F>(parameter_model: &Model<P>, main_model: F, config: &PmmhConfig) -> Model<P>
where
    P: Clone + Send + Sync + 'static,
    V: Clone + Send + Sync + 'static,
    F: Fn(&P) -> Model<V> + Send + Sync + 'static,
{
    let main = Arc::new(main_model);
    let inner = SmcConfig::new(config.particles, config.smc_steps, config.step_size).unnormalized();
    parameter_model.clone().bind(move |theta: P| {
        let main = Arc::clone(&main);
        let inner = inner.clone();
        sample().bind(move |u| {
            let main = Arc::clone(&main);
            let inner = inner.clone();
            let theta = theta.clone();
            Model::new(move || {
                let mut rng = RngState::new(seed_from_unit(u));
                let evidence = match smc_with(&main(&theta), &inner, &mut rng, &Workers::sequential()) {
                    Ok(out) => out.histogram.total_weight(),
                    Err(e) if e.is_degeneracy() => LogWeight::ZERO,
                    Err(e) => return Err(e.in_phase("pmmh inner smc")),
                };
                score(evidence).then(pure(theta.clone())).start()
            })
        })
    })
}

/// Particle marginal Metropolis–Hastings: [`tmcmc`] over [`pmmh_model`]
/// with initial weight one.
pub fn pmmh<P, V, F>(
    parameter_model: &Model<P>,
    main_model: F,
    config: &PmmhConfig,
    rng: &mut RngState,
) -> Result<TmcmcOutput<P>>
where
    P: Clone + Send + Sync + 'static,
    V: Clone + Send + Sync + 'static,
    F: Fn(&P) -> Model<V> + Send + Sync + 'static,
{
    let model = pmmh_model(parameter_model, main_model, config);
    tmcmc(&model, config.mh_steps, LogWeight::ONE, config.burnin, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::normal;
    use crate::models::{gaussian_mean_likelihood, gaussian_mean_posterior, gaussian_mean_prior, GAUSSIAN_MEAN_DATA};

    #[test]
    fn defaults_are_ten_ten_ten() {
        let c = PmmhConfig::default();
        assert_eq!((c.particles, c.smc_steps, c.mh_steps), (10, 10, 10));
    }

    #[test]
    fn constant_parameter_gives_constant_chain() {
        let out = pmmh(
            &pure(2.5),
            |t: &f64| normal(*t, 1.0),
            &PmmhConfig::default(),
            &mut RngState::new(1),
        )
        .unwrap();
        assert_eq!(out.samples.len(), 10);
        assert!(out.samples.iter().all(|(_, v)| *v == 2.5));
        // Only the inner seed is traced.
        assert_eq!(out.last.trace.len(), 1);
    }

    #[test]
    fn gaussian_mean_posterior_recovered() {
        let config = PmmhConfig {
            mh_steps: 6000,
            burnin: 1000,
            ..PmmhConfig::default()
        };
        let out = pmmh(
            &gaussian_mean_prior(),
            |t: &f64| gaussian_mean_likelihood(*t, &GAUSSIAN_MEAN_DATA),
            &config,
            &mut RngState::new(2),
        )
        .unwrap();
        let (mean, _) = gaussian_mean_posterior(&GAUSSIAN_MEAN_DATA);
        let est = out.histogram().estimate_expectation(|x| *x).unwrap();
        assert!((est - mean).abs() <= 0.15, "{est} vs {mean}");
    }

    #[test]
    fn seed_mapping_is_injective_on_uniform_grid() {
        let a = seed_from_unit(0.5);
        let b = seed_from_unit(0.5 + f64::EPSILON / 2.0);
        assert_ne!(a, b);
    }
}
