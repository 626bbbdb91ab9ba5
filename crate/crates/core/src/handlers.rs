//! Handler-interpreters over the [`Step`] protocol.
//!
//! There are three shapes here:
//!
//! * **Layers** ([`Weighted`], [`RandomSampler`], [`Replay`]) answer some
//!   requests and forward the rest to the enclosing handler. They nest as a
//!   stack of `&mut dyn Handler`; the scoped helpers [`weighted`],
//!   [`random_sampler`] and [`replay`] push one layer for the duration of a
//!   body and return the layer's result alongside the body's.
//! * **Drivers** ([`run`], [`advance`], [`finalize`]) pull requests out of a
//!   computation in a loop and delegate everything they do not handle to a
//!   handler stack. They never wrap the computation, so a particle advanced
//!   one yield at a time for thousands of steps holds one bare resumption.
//! * **Transformers** ([`yield_on_score`]) rewrite the request stream of a
//!   computation and return a new computation.
//!
//! A request nobody answers surfaces as [`Error::UnhandledRequest`].

use crate::effects::{Request, Response, Resumption, Step};
use crate::error::{Error, Result};
use crate::logweight::LogWeight;
use crate::randomness::RngState;

pub trait Handler {
    fn handle(&mut self, request: &Request) -> Result<Response>;
}

/// Bottom of every stack: rejects everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct Unhandled;

impl Handler for Unhandled {
    fn handle(&mut self, request: &Request) -> Result<Response> {
        Err(Error::UnhandledRequest(request.kind().name()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedResult<V> {
    pub weight: LogWeight,
    pub value: V,
}

/// Multiplies every `Score` into a running weight.
pub struct Weighted<'a> {
    weight: LogWeight,
    outer: &'a mut dyn Handler,
}

impl<'a> Weighted<'a> {
    pub fn new(initial: LogWeight, outer: &'a mut dyn Handler) -> Self {
        Weighted { weight: initial, outer }
    }

    pub fn weight(&self) -> LogWeight {
        self.weight
    }
}

impl Handler for Weighted<'_> {
    fn handle(&mut self, request: &Request) -> Result<Response> {
        match request {
            Request::Score(s) => {
                self.weight *= *s;
                Ok(Response::Ack)
            }
            other => self.outer.handle(other),
        }
    }
}

pub fn weighted<T, F>(initial: LogWeight, outer: &mut dyn Handler, body: F) -> Result<WeightedResult<T>>
where
    F: FnOnce(&mut dyn Handler) -> Result<T>,
{
    let mut layer = Weighted::new(initial, outer);
    let value = body(&mut layer)?;
    Ok(WeightedResult {
        weight: layer.weight,
        value,
    })
}

/// Answers every `Sample` with the next unit uniform.
pub struct RandomSampler<'a> {
    rng: &'a mut RngState,
    outer: &'a mut dyn Handler,
}

impl<'a> RandomSampler<'a> {
    pub fn new(rng: &'a mut RngState, outer: &'a mut dyn Handler) -> Self {
        RandomSampler { rng, outer }
    }
}

impl Handler for RandomSampler<'_> {
    fn handle(&mut self, request: &Request) -> Result<Response> {
        match request {
            Request::Sample => Ok(Response::Unit(self.rng.next_unit_uniform())),
            other => self.outer.handle(other),
        }
    }
}

pub fn random_sampler<T, F>(rng: &mut RngState, outer: &mut dyn Handler, body: F) -> Result<T>
where
    F: FnOnce(&mut dyn Handler) -> Result<T>,
{
    let mut layer = RandomSampler::new(rng, outer);
    body(&mut layer)
}

/// Answers the i-th `Sample` with `trace[i]`; past the end of the trace it
/// forwards `Sample` outward and appends the answer.
pub struct Replay<'a> {
    trace: Vec<f64>,
    index: usize,
    outer: &'a mut dyn Handler,
}

impl<'a> Replay<'a> {
    pub fn new(trace: Vec<f64>, outer: &'a mut dyn Handler) -> Self {
        Self::starting_at(trace, 0, outer)
    }

    /// Replay whose first answered `Sample` is `trace[index]`. With
    /// `index == trace.len()` every sample is fresh and gets recorded after
    /// the existing entries.
    pub fn starting_at(trace: Vec<f64>, index: usize, outer: &'a mut dyn Handler) -> Self {
        Replay { trace, index, outer }
    }

    /// Samples answered so far, counting the starting offset.
    pub fn consumed(&self) -> usize {
        self.index
    }

    /// The trace cut to the samples actually consumed.
    pub fn into_trace(mut self) -> Vec<f64> {
        self.trace.truncate(self.index);
        self.trace
    }
}

impl Handler for Replay<'_> {
    fn handle(&mut self, request: &Request) -> Result<Response> {
        match request {
            Request::Sample => {
                let u = match self.trace.get(self.index) {
                    Some(&u) => u,
                    None => {
                        let u = match self.outer.handle(&Request::Sample)? {
                            Response::Unit(u) => u,
                            Response::Ack => return Err(Error::ResponseTypeMismatch { expected: "sample" }),
                        };
                        self.trace.push(u);
                        u
                    }
                };
                self.index += 1;
                Ok(Response::Unit(u))
            }
            other => self.outer.handle(other),
        }
    }
}

/// Runs `body` under a replay of `trace`, returning the consumed prefix
/// (extended with fresh draws where the trace ran short).
pub fn replay<T, F>(trace: Vec<f64>, outer: &mut dyn Handler, body: F) -> Result<(Vec<f64>, T)>
where
    F: FnOnce(&mut dyn Handler) -> Result<T>,
{
    let mut layer = Replay::new(trace, outer);
    let value = body(&mut layer)?;
    Ok((layer.into_trace(), value))
}

/// Re-emits each `Score(w)` as `Score(w)` followed by `Yield`.
pub fn yield_on_score<V: Send + Sync + 'static>(step: Step<V>) -> Step<V> {
    match step {
        Step::Done(v) => Step::Done(v),
        Step::Suspended(Request::Score(w), k) => Step::suspend(Request::Score(w), move |_| {
            let k = k.fork();
            Ok(Step::suspend(Request::Yield, move |_| {
                Ok(yield_on_score(k.fork().resume(Response::Ack)?))
            }))
        }),
        Step::Suspended(request, k) => Step::Suspended(request, k.map_step(|s| Ok(yield_on_score(s)))),
    }
}

/// Drives a computation to its value, delegating every request.
pub fn run<V>(mut step: Step<V>, handler: &mut dyn Handler) -> Result<V> {
    loop {
        match step {
            Step::Done(v) => return Ok(v),
            Step::Suspended(request, k) => {
                let response = handler.handle(&request)?;
                step = k.resume(response)?;
            }
        }
    }
}

pub enum AdvanceOutcome<V> {
    Done(V),
    /// Paused on a `Yield` that has not been acknowledged.
    Suspended(Resumption<V>),
}

impl<V> AdvanceOutcome<V> {
    pub fn is_done(&self) -> bool {
        matches!(self, AdvanceOutcome::Done(_))
    }

    /// Back to a step; a pending resumption sits on a `Yield`.
    pub fn into_step(self) -> Step<V> {
        match self {
            AdvanceOutcome::Done(v) => Step::Done(v),
            AdvanceOutcome::Suspended(k) => Step::Suspended(Request::Yield, k),
        }
    }
}

/// Acknowledges up to `n` yields and stops at the next one. Sample and Score
/// go to `handler`. If the computation finishes first its value is returned,
/// so `n` is an upper bound on the yields consumed.
pub fn advance<V>(mut step: Step<V>, n: usize, handler: &mut dyn Handler) -> Result<AdvanceOutcome<V>> {
    let mut remaining = n;
    loop {
        match step {
            Step::Done(v) => return Ok(AdvanceOutcome::Done(v)),
            Step::Suspended(Request::Yield, k) => {
                if remaining == 0 {
                    return Ok(AdvanceOutcome::Suspended(k));
                }
                remaining -= 1;
                step = k.resume(Response::Ack)?;
            }
            Step::Suspended(request, k) => {
                let response = handler.handle(&request)?;
                step = k.resume(response)?;
            }
        }
    }
}

/// Acknowledges every yield until the computation finishes.
pub fn finalize<V>(mut step: Step<V>, handler: &mut dyn Handler) -> Result<V> {
    loop {
        match step {
            Step::Done(v) => return Ok(v),
            Step::Suspended(Request::Yield, k) => step = k.resume(Response::Ack)?,
            Step::Suspended(request, k) => {
                let response = handler.handle(&request)?;
                step = k.resume(response)?;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::{fold_n, pure, sample, score, yield_now, Model, RequestKind};
    use crate::models::markov_chain_model;

    fn lw(l: f64) -> LogWeight {
        LogWeight::from_log(l)
    }

    /// Records the kinds of every request it sees and answers Sample with a
    /// fixed value.
    #[derive(Default)]
    struct Recorder {
        seen: Vec<RequestKind>,
    }

    impl Handler for Recorder {
        fn handle(&mut self, request: &Request) -> Result<Response> {
            self.seen.push(request.kind());
            Ok(match request {
                Request::Sample => Response::Unit(0.5),
                _ => Response::Ack,
            })
        }
    }

    fn yields(n: usize) -> Model<usize> {
        fold_n(n, 0, |_, c| yield_now().then(pure(c + 1)))
    }

    #[test]
    fn weighted_multiplies_scores() {
        let m = score(lw(-1.0)).then(score(lw(-2.0))).then(pure("a"));
        let r = weighted(LogWeight::ONE, &mut Unhandled, |h| run(m.start()?, h)).unwrap();
        assert_eq!(
            r,
            WeightedResult {
                weight: lw(-3.0),
                value: "a"
            }
        );

        let r = weighted(lw(-0.5), &mut Unhandled, |h| run(pure(1).start()?, h)).unwrap();
        assert_eq!(r.weight, lw(-0.5));

        let m = score(LogWeight::ZERO).then(score(lw(3.0))).then(pure(()));
        let r = weighted(LogWeight::ONE, &mut Unhandled, |h| run(m.start()?, h)).unwrap();
        assert!(r.weight.is_zero());
    }

    #[test]
    fn weighted_forwards_other_requests() {
        let m = sample().bind(|u| score(lw(-u)).then(yield_now()).then(pure(u)));
        let mut rec = Recorder::default();
        let r = weighted(LogWeight::ONE, &mut rec, |h| run(m.start()?, h)).unwrap();
        assert_eq!(rec.seen, vec![RequestKind::Sample, RequestKind::Yield]);
        assert_eq!(r.weight, lw(-0.5));
    }

    #[test]
    fn unhandled_requests_error() {
        let e = run(sample().start().unwrap(), &mut Unhandled).unwrap_err();
        assert!(matches!(e, Error::UnhandledRequest("sample")));
    }

    #[test]
    fn random_sampler_answers_from_rng() {
        let mut rng = RngState::new(42);
        let first = RngState::new(42).next_unit_uniform();
        let v = random_sampler(&mut rng, &mut Unhandled, |h| run(sample().start()?, h)).unwrap();
        assert_eq!(v, first);

        let mut rng = RngState::new(42);
        let v = random_sampler(&mut rng, &mut Unhandled, |h| run(pure(3).start()?, h)).unwrap();
        assert_eq!(v, 3);
        assert_eq!(rng.draws(), 0);
    }

    #[test]
    fn weighted_random_sampler_on_chain_is_finite() {
        let mut rng = RngState::new(1);
        let r = random_sampler(&mut rng, &mut Unhandled, |h| {
            weighted(LogWeight::ONE, h, |h| run(markov_chain_model().start()?, h))
        })
        .unwrap();
        assert!(r.weight.log_value().is_finite());
        assert!(r.value.is_finite());
        assert_eq!(rng.draws(), 12);
    }

    fn request_stream<V: Send + Sync + 'static>(step: Step<V>) -> Vec<RequestKind> {
        let mut out = Vec::new();
        let mut step = step;
        while let Step::Suspended(r, k) = step {
            out.push(r.kind());
            let resp = if r == Request::Sample {
                Response::Unit(0.5)
            } else {
                Response::Ack
            };
            step = k.resume(resp).unwrap();
        }
        out
    }

    #[test]
    fn yield_on_score_inserts_yields() {
        use RequestKind::*;
        let m = score(lw(-1.0)).then(pure(()));
        assert_eq!(request_stream(yield_on_score(m.start().unwrap())), vec![Score, Yield]);

        let m = sample().then(yield_now()).then(pure(()));
        assert_eq!(request_stream(yield_on_score(m.start().unwrap())), vec![Sample, Yield]);

        let m = score(lw(-1.0)).then(sample()).then(score(lw(-2.0))).then(pure(()));
        assert_eq!(
            request_stream(yield_on_score(m.start().unwrap())),
            vec![Score, Yield, Sample, Score, Yield]
        );
    }

    #[test]
    fn advance_counts_yields() {
        let out = advance(yields(6).start().unwrap(), 4, &mut Unhandled).unwrap();
        let AdvanceOutcome::Suspended(k) = out else {
            panic!("expected suspension")
        };
        // the pending yield plus one more remain
        assert_eq!(finalize(k.resume(Response::Ack).unwrap(), &mut Unhandled).unwrap(), 6);
        let out = advance(yields(6).start().unwrap(), 4, &mut Unhandled).unwrap();
        let step = out.into_step();
        assert_eq!(request_stream(step).len(), 2);

        let out = advance(yields(3).start().unwrap(), 0, &mut Unhandled).unwrap();
        assert!(!out.is_done());

        let out = advance(yields(3).start().unwrap(), 10, &mut Unhandled).unwrap();
        assert!(matches!(out, AdvanceOutcome::Done(3)));
    }

    #[test]
    fn advance_composes_additively() {
        for (a, b) in [(0, 0), (1, 2), (2, 3), (4, 4)] {
            let mut seen_split = Recorder::default();
            let first = advance(yields(6).start().unwrap(), a, &mut seen_split).unwrap();
            let split = advance(first.into_step(), b, &mut seen_split).unwrap();
            let mut seen_whole = Recorder::default();
            let whole = advance(yields(6).start().unwrap(), a + b, &mut seen_whole).unwrap();
            assert_eq!(seen_split.seen, seen_whole.seen);
            let left = request_stream(split.into_step()).len();
            let right = request_stream(whole.into_step()).len();
            assert_eq!(left, right, "a={a} b={b}");
        }
    }

    #[test]
    fn finalize_runs_to_completion() {
        assert_eq!(finalize(yields(3).start().unwrap(), &mut Unhandled).unwrap(), 3);
        assert_eq!(finalize(pure(9).start().unwrap(), &mut Unhandled).unwrap(), 9);

        // weighted outside finalize over an advanced remnant
        let m = score(lw(-1.0)).then(score(lw(-2.0))).then(pure("x"));
        let out = weighted(LogWeight::ONE, &mut Unhandled, |h| {
            advance(yield_on_score(m.start()?), 0, h)
        })
        .unwrap();
        assert_eq!(out.weight, lw(-1.0));
        let r = weighted(out.weight, &mut Unhandled, |h| finalize(out.value.into_step(), h)).unwrap();
        assert_eq!(
            r,
            WeightedResult {
                weight: lw(-3.0),
                value: "x"
            }
        );
    }

    fn three_samples() -> Model<f64> {
        sample().bind(|a| score(lw(-a)).then(sample().bind(move |b| sample().map(move |c| a + 2.0 * b + 4.0 * c))))
    }

    #[test]
    fn replay_uses_and_truncates_trace() {
        let trace = vec![0.1, 0.2, 0.3, 0.9, 0.9];
        let (t, r) = replay(trace, &mut Unhandled, |h| {
            weighted(LogWeight::ONE, h, |h| run(three_samples().start()?, h))
        })
        .unwrap();
        assert_eq!(t, vec![0.1, 0.2, 0.3]);
        assert!((r.value - 1.7).abs() < 1e-12);
        assert_eq!(r.weight, lw(-0.1));
    }

    #[test]
    fn replay_extends_short_trace() {
        let mut rng = RngState::new(3);
        let mut check = RngState::new(3);
        let expected: Vec<f64> = (0..2).map(|_| check.next_unit_uniform()).collect();
        let (t, _) = random_sampler(&mut rng, &mut Unhandled, |h| {
            replay(vec![0.25], h, |h| {
                weighted(LogWeight::ONE, h, |h| run(three_samples().start()?, h))
            })
        })
        .unwrap();
        assert_eq!(t, vec![0.25, expected[0], expected[1]]);

        let mut rng = RngState::new(3);
        let (t, _) = random_sampler(&mut rng, &mut Unhandled, |h| {
            replay(Vec::new(), h, |h| {
                weighted(LogWeight::ONE, h, |h| run(three_samples().start()?, h))
            })
        })
        .unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(rng.draws(), 3);
    }

    #[test]
    fn replay_and_weighted_commute() {
        let trace: Vec<f64> = (0..12).map(|i| (0.13 + 0.07 * i as f64) % 1.0).collect();
        let (t1, a) = replay(trace.clone(), &mut Unhandled, |h| {
            weighted(LogWeight::ONE, h, |h| run(markov_chain_model().start()?, h))
        })
        .unwrap();
        let b = weighted(LogWeight::ONE, &mut Unhandled, |h| {
            replay(trace.clone(), h, |h| run(markov_chain_model().start()?, h))
        })
        .unwrap();
        assert_eq!(a.weight, b.weight);
        assert_eq!(a.value, b.value.1);
        assert_eq!(t1, b.value.0);
        assert_eq!(t1, trace);
    }
}
