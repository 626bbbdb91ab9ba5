use crate::effects::{Model, Request, Response, Resumption, Step};
use crate::error::{Error, Result};
use crate::handlers::{
    advance, finalize, random_sampler, weighted, yield_on_score, AdvanceOutcome, Handler, RandomSampler, Replay,
    Unhandled,
};
use crate::logweight::LogWeight;
use crate::randomness::RngState;

use super::importance::{check_particles, particle_rng, particle_share};
use super::mcmc::{mh_accept, perturb_trace};
use super::resample::{multinomial_indices, share};
use super::{effective_sample_size, Histogram, Workers};

#[derive(Clone, Debug, PartialEq)]
pub struct SmcConfig {
    pub particles: usize,
    /// Resample-and-advance rounds before the final run to completion.
    pub steps: usize,
    /// Yields each particle passes per round.
    pub step_size: usize,
    pub normalize: bool,
}

impl SmcConfig {
    pub fn new(particles: usize, steps: usize, step_size: usize) -> Self {
        SmcConfig {
            particles,
            steps,
            step_size,
            normalize: true,
        }
    }

    /// Keeps raw weights; their sum estimates the model evidence.
    pub fn unnormalized(mut self) -> Self {
        self.normalize = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_particles(self.particles)?;
        if self.step_size == 0 {
            return Err(Error::Config("step size must be at least 1".into()));
        }
        Ok(())
    }
}

pub enum ParticleState<V> {
    Finished(V),
    /// Paused on an unacknowledged `Yield`.
    Running(Resumption<V>),
}

impl<V: Clone> ParticleState<V> {
    fn fork(&self) -> Self {
        match self {
            ParticleState::Finished(v) => ParticleState::Finished(v.clone()),
            ParticleState::Running(k) => ParticleState::Running(k.fork()),
        }
    }
}

impl<V> From<AdvanceOutcome<V>> for ParticleState<V> {
    fn from(outcome: AdvanceOutcome<V>) -> Self {
        match outcome {
            AdvanceOutcome::Done(v) => ParticleState::Finished(v),
            AdvanceOutcome::Suspended(k) => ParticleState::Running(k),
        }
    }
}

impl<V> ParticleState<V> {
    fn into_step(self) -> Step<V> {
        match self {
            ParticleState::Finished(v) => Step::Done(v),
            ParticleState::Running(k) => Step::Suspended(Request::Yield, k),
        }
    }

    pub fn is_finished(&self) -> bool {
        matches!(self, ParticleState::Finished(_))
    }
}

/// A weighted partial run with its own random stream.
pub struct Particle<V> {
    pub weight: LogWeight,
    pub state: ParticleState<V>,
    rng: RngState,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SmcDiagnostics {
    pub resamples: usize,
    /// ESS of the weights entering each resample.
    pub min_ess: f64,
    pub mean_ess: f64,
    pub last_ess: f64,
    /// Log of the summed final weights before any normalisation.
    pub log_evidence: f64,
}

pub struct SmcOutput<V> {
    pub histogram: Histogram<V>,
    pub diagnostics: SmcDiagnostics,
}

/// What the shared SMC loop needs from a particle representation.
trait Population: Sync {
    type Particle: Send;
    type Value: Send;

    fn init(&self, share: LogWeight, rng: RngState) -> Result<Self::Particle>;
    fn step(&self, p: Self::Particle, n: usize) -> Result<Self::Particle>;
    fn finish(&self, p: Self::Particle) -> Result<(LogWeight, Self::Value)>;
    fn fork(&self, p: &Self::Particle, weight: LogWeight, rng: RngState) -> Self::Particle;
    fn weight(p: &Self::Particle) -> LogWeight;
}

fn run_population<P: Population>(
    pop: &P,
    config: &SmcConfig,
    rng: &mut RngState,
    workers: &Workers,
) -> Result<SmcOutput<P::Value>> {
    config.validate()?;
    let k = config.particles;
    let base = rng.next_u64();
    let mut particles = workers.map((0..k).collect(), |_, i| {
        pop.init(particle_share(k), particle_rng(base, i))
    })?;

    let mut diagnostics = SmcDiagnostics {
        min_ess: f64::INFINITY,
        ..SmcDiagnostics::default()
    };
    let mut ess_total = 0.0;
    for step in 1..=config.steps {
        let weights: Vec<LogWeight> = particles.iter().map(P::weight).collect();
        let ess = effective_sample_size(&weights);
        log::debug!("resample {step}: ess {ess:.2} of {k}");
        let indices = multinomial_indices(&weights, k, rng).map_err(|_| Error::ParticleDegeneracy { step })?;
        let each = share(LogWeight::sum(&weights), k)?;
        let base = rng.next_u64();
        let resampled: Vec<P::Particle> = indices
            .iter()
            .enumerate()
            .map(|(j, &i)| pop.fork(&particles[i], each, particle_rng(base, j)))
            .collect();
        drop(std::mem::take(&mut particles));
        particles = workers.map(resampled, |_, p| pop.step(p, config.step_size))?;

        diagnostics.resamples += 1;
        diagnostics.min_ess = diagnostics.min_ess.min(ess);
        diagnostics.last_ess = ess;
        ess_total += ess;
    }
    if diagnostics.resamples > 0 {
        diagnostics.mean_ess = ess_total / diagnostics.resamples as f64;
    } else {
        diagnostics.min_ess = f64::NAN;
        diagnostics.mean_ess = f64::NAN;
        diagnostics.last_ess = f64::NAN;
    }

    let finished = workers.map(particles, |_, p| pop.finish(p))?;
    let histogram = Histogram::from_entries(finished);
    diagnostics.log_evidence = histogram.total_weight().log_value();
    let histogram = if config.normalize {
        histogram.normalise()?
    } else {
        histogram
    };
    Ok(SmcOutput { histogram, diagnostics })
}

struct Plain<V> {
    model: Model<V>,
}

impl<V: Clone + Send + Sync + 'static> Population for Plain<V> {
    type Particle = Particle<V>;
    type Value = V;

    fn init(&self, share: LogWeight, mut rng: RngState) -> Result<Particle<V>> {
        let r = random_sampler(&mut rng, &mut Unhandled, |h| {
            weighted(share, h, |h| advance(yield_on_score(self.model.start()?), 0, h))
        })?;
        Ok(Particle {
            weight: r.weight,
            state: r.value.into(),
            rng,
        })
    }

    fn step(&self, p: Particle<V>, n: usize) -> Result<Particle<V>> {
        let Particle { weight, state, mut rng } = p;
        if state.is_finished() {
            return Ok(Particle { weight, state, rng });
        }
        let r = random_sampler(&mut rng, &mut Unhandled, |h| {
            weighted(weight, h, |h| advance(state.into_step(), n, h))
        })?;
        Ok(Particle {
            weight: r.weight,
            state: r.value.into(),
            rng,
        })
    }

    fn finish(&self, p: Particle<V>) -> Result<(LogWeight, V)> {
        let Particle { weight, state, mut rng } = p;
        let r = random_sampler(&mut rng, &mut Unhandled, |h| {
            weighted(weight, h, |h| finalize(state.into_step(), h))
        })?;
        Ok((r.weight, r.value))
    }

    fn fork(&self, p: &Particle<V>, weight: LogWeight, rng: RngState) -> Particle<V> {
        Particle {
            weight,
            state: p.state.fork(),
            rng,
        }
    }

    fn weight(p: &Particle<V>) -> LogWeight {
        p.weight
    }
}

/// Sequential Monte Carlo. Particles start as `k` runs of the model with
/// every score followed by a yield, each advanced to its first yield with
/// weight `1/k`. Each of `config.steps` rounds resamples the population and
/// advances every particle `step_size` yields; the remaining yields are then
/// acknowledged until every particle finishes. With zero steps this is
/// importance sampling over the same random streams.
pub fn smc<V>(model: &Model<V>, config: &SmcConfig, rng: &mut RngState) -> Result<Histogram<V>>
where
    V: Clone + Send + Sync + 'static,
{
    Ok(smc_with(model, config, rng, &Workers::sequential())?.histogram)
}

pub fn smc_with<V>(model: &Model<V>, config: &SmcConfig, rng: &mut RngState, workers: &Workers) -> Result<SmcOutput<V>>
where
    V: Clone + Send + Sync + 'static,
{
    let pop = Plain { model: model.clone() };
    run_population(&pop, config, rng, workers)
}

/// Multiplies each score into both the particle weight and the weight of the
/// whole prefix run so far.
struct Tally<'a> {
    weight: LogWeight,
    prefix: LogWeight,
    outer: &'a mut dyn Handler,
}

impl Handler for Tally<'_> {
    fn handle(&mut self, request: &Request) -> Result<Response> {
        match request {
            Request::Score(s) => {
                self.weight *= *s;
                self.prefix *= *s;
                Ok(Response::Ack)
            }
            other => self.outer.handle(other),
        }
    }
}

/// A particle that also remembers every uniform it consumed, the product of
/// all its scores, and how many yields it has passed, so that its prefix can
/// be re-run from a perturbed trace.
struct MovingParticle<V> {
    weight: LogWeight,
    prefix: LogWeight,
    trace: Vec<f64>,
    acked: usize,
    state: ParticleState<V>,
    rng: RngState,
}

struct ResampleMove<V> {
    model: Model<V>,
    t_steps: usize,
}

impl<V: Clone + Send + Sync + 'static> ResampleMove<V> {
    /// Runs the prefix (start up to the yield after `acked` acknowledged
    /// ones) against `trace`, drawing fresh uniforms past its end.
    fn advance_from(
        &self,
        state: ParticleState<V>,
        trace: Vec<f64>,
        weights: (LogWeight, LogWeight),
        n: usize,
        rng: &mut RngState,
    ) -> Result<(ParticleState<V>, Vec<f64>, LogWeight, LogWeight)> {
        let mut bottom = Unhandled;
        let mut sampler = RandomSampler::new(rng, &mut bottom);
        let start = trace.len();
        let mut rep = Replay::starting_at(trace, start, &mut sampler);
        let (outcome, weight, prefix) = {
            let mut tally = Tally {
                weight: weights.0,
                prefix: weights.1,
                outer: &mut rep,
            };
            let outcome = advance(state.into_step(), n, &mut tally)?;
            (outcome, tally.weight, tally.prefix)
        };
        Ok((outcome.into(), rep.into_trace(), weight, prefix))
    }

    fn rejuvenate(&self, p: &mut MovingParticle<V>) -> Result<()> {
        for _ in 0..self.t_steps {
            if p.trace.is_empty() {
                break;
            }
            let proposal = perturb_trace(&p.trace, &mut p.rng)?;
            let acked = p.acked;
            let mut bottom = Unhandled;
            let mut sampler = RandomSampler::new(&mut p.rng, &mut bottom);
            let mut rep = Replay::new(proposal, &mut sampler);
            let r = weighted(LogWeight::ONE, &mut rep, |h| {
                advance(yield_on_score(self.model.start()?), acked, h)
            })?;
            let new_trace = rep.into_trace();
            if mh_accept(p.prefix, r.weight, p.trace.len(), new_trace.len(), &mut p.rng)? {
                p.trace = new_trace;
                p.prefix = r.weight;
                p.state = r.value.into();
            }
        }
        Ok(())
    }
}

impl<V: Clone + Send + Sync + 'static> Population for ResampleMove<V> {
    type Particle = MovingParticle<V>;
    type Value = V;

    fn init(&self, share: LogWeight, mut rng: RngState) -> Result<MovingParticle<V>> {
        let step = yield_on_score(self.model.start()?);
        let (state, trace, weight, prefix) = {
            let mut bottom = Unhandled;
            let mut sampler = RandomSampler::new(&mut rng, &mut bottom);
            let mut rep = Replay::new(Vec::new(), &mut sampler);
            let (outcome, weight, prefix) = {
                let mut tally = Tally {
                    weight: share,
                    prefix: LogWeight::ONE,
                    outer: &mut rep,
                };
                let outcome = advance(step, 0, &mut tally)?;
                (outcome, tally.weight, tally.prefix)
            };
            (ParticleState::from(outcome), rep.into_trace(), weight, prefix)
        };
        Ok(MovingParticle {
            weight,
            prefix,
            trace,
            acked: 0,
            state,
            rng,
        })
    }

    fn step(&self, p: MovingParticle<V>, n: usize) -> Result<MovingParticle<V>> {
        let MovingParticle {
            weight,
            prefix,
            trace,
            acked,
            state,
            mut rng,
        } = p;
        let (state, trace, weight, prefix) = if state.is_finished() {
            (state, trace, weight, prefix)
        } else {
            self.advance_from(state, trace, (weight, prefix), n, &mut rng)?
        };
        let mut p = MovingParticle {
            weight,
            prefix,
            trace,
            acked: acked + n,
            state,
            rng,
        };
        self.rejuvenate(&mut p)?;
        Ok(p)
    }

    fn finish(&self, p: MovingParticle<V>) -> Result<(LogWeight, V)> {
        let MovingParticle {
            weight, state, mut rng, ..
        } = p;
        let r = random_sampler(&mut rng, &mut Unhandled, |h| {
            weighted(weight, h, |h| finalize(state.into_step(), h))
        })?;
        Ok((r.weight, r.value))
    }

    fn fork(&self, p: &MovingParticle<V>, weight: LogWeight, rng: RngState) -> MovingParticle<V> {
        MovingParticle {
            weight,
            prefix: p.prefix,
            trace: p.trace.clone(),
            acked: p.acked,
            state: p.state.fork(),
            rng,
        }
    }

    fn weight(p: &MovingParticle<V>) -> LogWeight {
        p.weight
    }
}

/// Resample-move SMC. Each round resamples, advances every particle
/// `step_size` yields, then applies `t_steps` trace Metropolis–Hastings
/// updates to the particle's whole run so far (its prefix up to the same
/// yield). A move changes the particle's state but not its SMC weight, since
/// the update leaves the prefix posterior invariant. With `t_steps = 0` this
/// is [`smc`] on the same random streams.
pub fn rmsmc<V>(model: &Model<V>, config: &SmcConfig, t_steps: usize, rng: &mut RngState) -> Result<Histogram<V>>
where
    V: Clone + Send + Sync + 'static,
{
    Ok(rmsmc_with(model, config, t_steps, rng, &Workers::sequential())?.histogram)
}

pub fn rmsmc_with<V>(
    model: &Model<V>,
    config: &SmcConfig,
    t_steps: usize,
    rng: &mut RngState,
    workers: &Workers,
) -> Result<SmcOutput<V>>
where
    V: Clone + Send + Sync + 'static,
{
    let pop = ResampleMove {
        model: model.clone(),
        t_steps,
    };
    run_population(&pop, config, rng, workers)
}
