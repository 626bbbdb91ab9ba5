//! Suspendable models.
//!
//! A model is a restartable thunk that, once started, produces a [`Step`]:
//! either its final value or a pending [`Request`] together with a
//! [`Resumption`] that continues the computation once the request is
//! answered. Models are written in continuation-passing style with
//! [`Model::bind`]; a loop written as tail recursion through `bind` runs in
//! constant stack and heap per step because each continuation is rebuilt
//! rather than nested.
//!
//! Continuations are immutable closures, so a resumption can be forked by
//! sharing its closure (a snapshot). Resumptions started with
//! [`Model::start_recorded`] additionally keep a persistent log of every
//! response delivered, and [`Resumption::fork_by_replay`] rebuilds the same
//! suspension point from a fresh run of the model.
//!
//! ```compile_fail
//! use inferkit::effects::{sample, Response, Step};
//! let Step::Suspended(_, k) = sample().start().unwrap() else { panic!() };
//! let _ = k.resume(Response::Unit(0.5));
//! let _ = k.resume(Response::Unit(0.5)); // a resumption is used at most once
//! ```

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::logweight::LogWeight;
use crate::randomness::{self, normal_from_uniforms};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Request {
    /// Expects a unit-interval real.
    Sample,
    /// Expects an acknowledgment.
    Score(LogWeight),
    /// Expects an acknowledgment.
    Yield,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RequestKind {
    Sample,
    Score,
    Yield,
}

impl RequestKind {
    pub fn name(self) -> &'static str {
        match self {
            RequestKind::Sample => "sample",
            RequestKind::Score => "score",
            RequestKind::Yield => "yield",
        }
    }
}

impl Request {
    pub fn kind(&self) -> RequestKind {
        match self {
            Request::Sample => RequestKind::Sample,
            Request::Score(_) => RequestKind::Score,
            Request::Yield => RequestKind::Yield,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Response {
    Unit(f64),
    Ack,
}

pub type StepResult<V> = Result<Step<V>>;

type Cont<V> = Arc<dyn Fn(Response) -> StepResult<V> + Send + Sync>;

pub enum Step<V> {
    Done(V),
    Suspended(Request, Resumption<V>),
}

impl<V> Step<V> {
    /// Suspends on `request`, continuing with `k` once answered.
    pub fn suspend<F>(request: Request, k: F) -> Step<V>
    where
        F: Fn(Response) -> StepResult<V> + Send + Sync + 'static,
    {
        Step::Suspended(
            request,
            Resumption {
                pending: request.kind(),
                cont: Arc::new(k),
                recording: None,
            },
        )
    }

    pub fn is_done(&self) -> bool {
        matches!(self, Step::Done(_))
    }

    pub fn request(&self) -> Option<&Request> {
        match self {
            Step::Done(_) => None,
            Step::Suspended(r, _) => Some(r),
        }
    }

    pub fn into_done(self) -> Option<V> {
        match self {
            Step::Done(v) => Some(v),
            Step::Suspended(..) => None,
        }
    }
}

impl<V: fmt::Debug> fmt::Debug for Step<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Done(v) => f.debug_tuple("Done").field(v).finish(),
            Step::Suspended(r, _) => f.debug_tuple("Suspended").field(r).finish(),
        }
    }
}

/// The rest of a suspended computation.
pub struct Resumption<V> {
    pending: RequestKind,
    cont: Cont<V>,
    recording: Option<Recording<V>>,
}

struct Recording<V> {
    model: Model<V>,
    pending: Request,
    log: ResponseLog,
}

impl<V> Clone for Recording<V> {
    fn clone(&self) -> Self {
        Recording {
            model: self.model.clone(),
            pending: self.pending,
            log: self.log.clone(),
        }
    }
}

/// Persistent cons list, newest entry first; appending shares the tail.
#[derive(Clone, Default)]
struct ResponseLog(Option<Arc<LogNode>>);

struct LogNode {
    request: Request,
    response: Response,
    len: usize,
    prev: ResponseLog,
}

impl ResponseLog {
    fn len(&self) -> usize {
        self.0.as_ref().map_or(0, |n| n.len)
    }

    fn push(&self, request: Request, response: Response) -> ResponseLog {
        ResponseLog(Some(Arc::new(LogNode {
            request,
            response,
            len: self.len() + 1,
            prev: self.clone(),
        })))
    }

    fn entries(&self) -> Vec<(Request, Response)> {
        let mut out = Vec::with_capacity(self.len());
        let mut cur = self.0.as_ref();
        while let Some(node) = cur {
            out.push((node.request, node.response));
            cur = node.prev.0.as_ref();
        }
        out.reverse();
        out
    }
}

impl Drop for ResponseLog {
    // Iterative drop so that very long logs do not recurse.
    fn drop(&mut self) {
        let mut cur = self.0.take();
        while let Some(node) = cur {
            match Arc::try_unwrap(node) {
                Ok(mut inner) => cur = inner.prev.0.take(),
                Err(_) => break,
            }
        }
    }
}

fn check_response(pending: RequestKind, response: Response) -> Result<()> {
    let ok = match (pending, response) {
        (RequestKind::Sample, Response::Unit(u)) => (0.0..1.0).contains(&u),
        (RequestKind::Score | RequestKind::Yield, Response::Ack) => true,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::ResponseTypeMismatch {
            expected: pending.name(),
        })
    }
}

impl<V> Resumption<V> {
    /// Kind of the request this resumption is waiting on.
    pub fn pending(&self) -> RequestKind {
        self.pending
    }

    /// Continues the computation with `response`, consuming the resumption.
    pub fn resume(self, response: Response) -> StepResult<V> {
        check_response(self.pending, response)?;
        let step = (self.cont)(response)?;
        Ok(match (self.recording, step) {
            (Some(rec), Step::Suspended(request, mut k)) => {
                k.recording = Some(Recording {
                    model: rec.model,
                    pending: request,
                    log: rec.log.push(rec.pending, response),
                });
                Step::Suspended(request, k)
            }
            (_, step) => step,
        })
    }

    /// An independent resumption at the same suspension point.
    pub fn fork(&self) -> Resumption<V> {
        Resumption {
            pending: self.pending,
            cont: Arc::clone(&self.cont),
            recording: self.recording.clone(),
        }
    }

    pub fn is_recorded(&self) -> bool {
        self.recording.is_some()
    }

    /// Responses delivered since the model started, if recorded.
    pub fn responses(&self) -> Option<Vec<Response>> {
        self.recording
            .as_ref()
            .map(|r| r.log.entries().into_iter().map(|(_, resp)| resp).collect())
    }

    pub fn response_count(&self) -> Option<usize> {
        self.recording.as_ref().map(|r| r.log.len())
    }

    /// Re-runs the model from scratch, replaying the recorded responses, and
    /// returns the resumption reached. Fails if the model does not issue the
    /// same requests it issued the first time.
    pub fn fork_by_replay(&self) -> Result<Resumption<V>> {
        let rec = self.recording.as_ref().ok_or(Error::NotRecorded)?;
        let mut step = rec.model.start()?;
        let entries = rec.log.entries();
        for (at, (request, response)) in entries.into_iter().enumerate() {
            step = match step {
                Step::Suspended(r, k) if r == request => k.resume(response)?,
                _ => return Err(Error::NondeterministicModel { at }),
            };
        }
        match step {
            Step::Suspended(r, mut k) if r == rec.pending => {
                k.recording = Some(rec.clone());
                Ok(k)
            }
            _ => Err(Error::NondeterministicModel { at: rec.log.len() }),
        }
    }

    /// Applies `f` to whatever step this resumption produces.
    pub fn map_step<W, F>(self, f: F) -> Resumption<W>
    where
        V: 'static,
        W: 'static,
        F: Fn(Step<V>) -> StepResult<W> + Send + Sync + 'static,
    {
        let pending = self.pending;
        let inner = self;
        Resumption {
            pending,
            cont: Arc::new(move |response| f(inner.fork().resume(response)?)),
            recording: None,
        }
    }
}

/// A restartable computation producing `V`.
pub struct Model<V>(Arc<dyn Fn() -> StepResult<V> + Send + Sync>);

impl<V> Clone for Model<V> {
    fn clone(&self) -> Self {
        Model(Arc::clone(&self.0))
    }
}

impl<V> Model<V> {
    /// Runs the model up to its first request or its value.
    pub fn start(&self) -> StepResult<V> {
        (self.0)()
    }
}

impl<V: Send + Sync + 'static> Model<V> {
    pub fn new<F>(thunk: F) -> Self
    where
        F: Fn() -> StepResult<V> + Send + Sync + 'static,
    {
        Model(Arc::new(thunk))
    }

    /// Like [`Model::start`], but resumptions keep a response log and
    /// support [`Resumption::fork_by_replay`].
    pub fn start_recorded(&self) -> StepResult<V> {
        Ok(match self.start()? {
            Step::Suspended(request, mut k) => {
                k.recording = Some(Recording {
                    model: self.clone(),
                    pending: request,
                    log: ResponseLog::default(),
                });
                Step::Suspended(request, k)
            }
            done => done,
        })
    }

    pub fn bind<W, F>(self, f: F) -> Model<W>
    where
        W: Send + Sync + 'static,
        F: Fn(V) -> Model<W> + Send + Sync + 'static,
    {
        let f: Arc<dyn Fn(V) -> Model<W> + Send + Sync> = Arc::new(f);
        Model::new(move || bind_step(self.start()?, Arc::clone(&f)))
    }

    pub fn map<W, F>(self, f: F) -> Model<W>
    where
        W: Send + Sync + 'static,
        F: Fn(V) -> W + Send + Sync + 'static,
    {
        let f: Arc<dyn Fn(V) -> W + Send + Sync> = Arc::new(f);
        Model::new(move || Ok(map_step(self.start()?, Arc::clone(&f))))
    }

    /// Sequences `next` after `self`, discarding this model's value.
    pub fn then<W: Send + Sync + 'static>(self, next: Model<W>) -> Model<W> {
        self.bind(move |_| next.clone())
    }
}

fn bind_step<V, W>(step: Step<V>, f: Arc<dyn Fn(V) -> Model<W> + Send + Sync>) -> StepResult<W>
where
    V: Send + Sync + 'static,
    W: Send + Sync + 'static,
{
    match step {
        Step::Done(v) => f(v).start(),
        Step::Suspended(request, k) => Ok(Step::Suspended(
            request,
            k.map_step(move |s| bind_step(s, Arc::clone(&f))),
        )),
    }
}

fn map_step<V, W>(step: Step<V>, f: Arc<dyn Fn(V) -> W + Send + Sync>) -> Step<W>
where
    V: Send + Sync + 'static,
    W: Send + Sync + 'static,
{
    match step {
        Step::Done(v) => Step::Done(f(v)),
        Step::Suspended(request, k) => Step::Suspended(request, k.map_step(move |s| Ok(map_step(s, Arc::clone(&f))))),
    }
}

pub fn pure<V: Clone + Send + Sync + 'static>(value: V) -> Model<V> {
    Model::new(move || Ok(Step::Done(value.clone())))
}

/// A model that fails with [`Error::Model`] when started.
pub fn fail<V: Send + Sync + 'static>(message: impl Into<String>) -> Model<V> {
    let message = message.into();
    Model::new(move || Err(Error::Model(message.clone())))
}

pub fn sample() -> Model<f64> {
    Model::new(|| {
        Ok(Step::suspend(Request::Sample, |response| match response {
            Response::Unit(u) => Ok(Step::Done(u)),
            Response::Ack => Err(Error::ResponseTypeMismatch { expected: "sample" }),
        }))
    })
}

pub fn score(weight: LogWeight) -> Model<()> {
    Model::new(move || Ok(Step::suspend(Request::Score(weight), |_| Ok(Step::Done(())))))
}

pub fn yield_now() -> Model<()> {
    Model::new(|| Ok(Step::suspend(Request::Yield, |_| Ok(Step::Done(())))))
}

/// `N(mu, sigma)` from exactly two `sample` requests.
pub fn normal(mu: f64, sigma: f64) -> Model<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return fail(format!("normal: {}", Error::InvalidScale(sigma)));
    }
    sample().bind(move |u1| sample().bind(move |u2| pure(normal_from_uniforms(mu, sigma, u1, u2))))
}

/// One `sample` request; true iff it falls below `p`.
pub fn bernoulli(p: f64) -> Model<bool> {
    if !(0.0..=1.0).contains(&p) {
        return fail(format!("bernoulli: {}", Error::InvalidProbability(p)));
    }
    sample().bind(move |u| pure(u < p))
}

/// One `sample` request mapped onto `[lo, hi)`.
pub fn uniform(lo: f64, hi: f64) -> Model<f64> {
    if !(lo <= hi) {
        return fail(format!("uniform: bounds out of order ({lo}, {hi})"));
    }
    sample().bind(move |u| pure(lo + (hi - lo) * u))
}

/// Scores the density of `datum` under `N(mean, sigma)`.
pub fn observe_normal(datum: f64, mean: f64, sigma: f64) -> Model<()> {
    match randomness::log_normal_pdf(datum, sigma, mean) {
        Ok(w) => score(w),
        Err(e) => fail(format!("observe_normal: {e}")),
    }
}

/// Runs `body` `n` times, threading a state through. The loop is a tail call
/// through `bind`, so it does not grow with `n`.
pub fn fold_n<S, F>(n: usize, init: S, body: F) -> Model<S>
where
    S: Clone + Send + Sync + 'static,
    F: Fn(usize, S) -> Model<S> + Send + Sync + 'static,
{
    fn go<S, F>(i: usize, n: usize, state: S, body: Arc<F>) -> Model<S>
    where
        S: Clone + Send + Sync + 'static,
        F: Fn(usize, S) -> Model<S> + Send + Sync + 'static,
    {
        if i == n {
            return pure(state);
        }
        let next = Arc::clone(&body);
        body(i, state).bind(move |s| go(i + 1, n, s, Arc::clone(&next)))
    }
    go(0, n, init, Arc::new(body))
}
