use crate::effects::Model;
use crate::error::{Error, Result};
use crate::handlers::{random_sampler, replay, run, weighted, Unhandled};
use crate::logweight::LogWeight;
use crate::randomness::{self, RngState};

use super::Histogram;

/// One state of trace MH: the model, the weight of its run, the uniforms it
/// consumed and the value it returned.
pub struct TraceRecord<V> {
    pub model: Model<V>,
    pub weight: LogWeight,
    pub trace: Vec<f64>,
    pub result: V,
    w0: LogWeight,
}

impl<V: Clone> Clone for TraceRecord<V> {
    fn clone(&self) -> Self {
        TraceRecord {
            model: self.model.clone(),
            weight: self.weight,
            trace: self.trace.clone(),
            result: self.result.clone(),
            w0: self.w0,
        }
    }
}

impl<V: std::fmt::Debug> std::fmt::Debug for TraceRecord<V> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TraceRecord")
            .field("weight", &self.weight)
            .field("trace", &self.trace)
            .field("result", &self.result)
            .finish()
    }
}

impl<V: Send + Sync + 'static> TraceRecord<V> {
    /// Runs `model` against `trace` (fresh uniforms from `rng` past its end)
    /// with scores multiplied into `w0`.
    pub fn run(model: &Model<V>, trace: Vec<f64>, w0: LogWeight, rng: &mut RngState) -> Result<Self> {
        let (trace, r) = random_sampler(rng, &mut Unhandled, |h| {
            replay(trace, h, |h| weighted(w0, h, |h| run(model.start()?, h)))
        })?;
        Ok(TraceRecord {
            model: model.clone(),
            weight: r.weight,
            trace,
            result: r.value,
            w0,
        })
    }
}

/// Copy of `trace` with one uniformly chosen entry replaced by a fresh
/// uniform. Takes two uniforms: the position, then the value.
pub fn perturb_trace(trace: &[f64], rng: &mut RngState) -> Result<Vec<f64>> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let i = ((rng.next_unit_uniform() * trace.len() as f64) as usize).min(trace.len() - 1);
    let mut out = trace.to_vec();
    out[i] = rng.next_unit_uniform();
    Ok(out)
}

/// `min(1, (q |old|) / (p |new|))` from log weights. A zero proposal weight
/// gives 0; a zero current weight with a positive proposal gives 1.
pub fn acceptance_probability(p: LogWeight, q: LogWeight, old_len: usize, new_len: usize) -> f64 {
    if q.is_zero() {
        return 0.0;
    }
    if p.is_zero() {
        return 1.0;
    }
    let lengths = if old_len == new_len {
        0.0
    } else {
        (old_len as f64).ln() - (new_len as f64).ln()
    };
    (q.log_value() - p.log_value() + lengths).min(0.0).exp()
}

/// Draws the accept/reject coin (one uniform).
pub(crate) fn mh_accept(
    p: LogWeight,
    q: LogWeight,
    old_len: usize,
    new_len: usize,
    rng: &mut RngState,
) -> Result<bool> {
    randomness::bernoulli(acceptance_probability(p, q, old_len, new_len), rng)
}

/// One trace MH update: perturb one entry, re-run the model against the
/// proposed trace (with the record's initial weight), and accept with
/// [`acceptance_probability`]. Uses three uniforms from `rng` plus any fresh
/// draws the re-run needs.
pub fn mh_step<V>(t: TraceRecord<V>, rng: &mut RngState) -> Result<TraceRecord<V>>
where
    V: Send + Sync + 'static,
{
    Ok(mh_update(t, rng)?.0)
}

/// [`mh_step`], also reporting whether the proposal was accepted.
fn mh_update<V>(t: TraceRecord<V>, rng: &mut RngState) -> Result<(TraceRecord<V>, bool)>
where
    V: Send + Sync + 'static,
{
    let proposal = perturb_trace(&t.trace, rng)?;
    let candidate = TraceRecord::run(&t.model, proposal, t.w0, rng)?;
    if mh_accept(t.weight, candidate.weight, t.trace.len(), candidate.trace.len(), rng)? {
        Ok((candidate, true))
    } else {
        Ok((t, false))
    }
}

pub struct TmcmcOutput<V> {
    /// `(trace, result)` for every step after the burn-in.
    pub samples: Vec<(Vec<f64>, V)>,
    pub last: TraceRecord<V>,
    pub accepted: usize,
    pub steps: usize,
}

impl<V: Clone> TmcmcOutput<V> {
    /// Kept results with equal weights.
    pub fn histogram(&self) -> Histogram<V> {
        Histogram::uniform(self.samples.iter().map(|(_, v)| v.clone()).collect())
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.accepted as f64 / self.steps as f64
        }
    }
}

/// Trace MH. The chain starts from one run of the model on fresh uniforms
/// with initial weight `w0`, then takes `n_steps` updates and keeps those
/// after the first `burnin`. A model that consumes no randomness has nothing
/// to perturb and its chain stays put.
pub fn tmcmc<V>(
    model: &Model<V>,
    n_steps: usize,
    w0: LogWeight,
    burnin: usize,
    rng: &mut RngState,
) -> Result<TmcmcOutput<V>>
where
    V: Clone + Send + Sync + 'static,
{
    if burnin > n_steps {
        return Err(Error::Config(format!("burn-in {burnin} exceeds the {n_steps} steps")));
    }
    let mut current = TraceRecord::run(model, Vec::new(), w0, rng)?;
    let mut samples = Vec::with_capacity(n_steps - burnin);
    let mut accepted = 0;
    for step in 1..=n_steps {
        if !current.trace.is_empty() {
            let (next, moved) = mh_update(current, rng)?;
            current = next;
            accepted += usize::from(moved);
        }
        if step > burnin {
            samples.push((current.trace.clone(), current.result.clone()));
        }
    }
    Ok(TmcmcOutput {
        samples,
        last: current,
        accepted,
        steps: n_steps,
    })
}
