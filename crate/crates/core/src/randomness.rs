//! Seeded randomness with exact draw accounting.
//!
//! The generator is ChaCha8 (`rand_chacha`), seeded through
//! `SeedableRng::seed_from_u64` and split into independent streams with the
//! ChaCha stream counter. Its output is value-stable across platforms and
//! crate releases. A unit uniform is the top 53 bits of one `u64`, scaled into
//! `[0, 1)`.
//!
//! Samplers that feed model traces consume a fixed number of uniforms:
//! `normal` takes two (the cosine branch of Box–Muller; the sine output is
//! discarded), `bernoulli` and `uniform` take one. `gamma_sample` rejects and
//! therefore consumes a variable count; it has no model-level combinator.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::logweight::LogWeight;

const UNIT_SCALE: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Clone, Debug)]
pub struct RngState {
    seed: u64,
    stream: u64,
    draws: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent generator `stream` under `seed`. Distinct streams of one
    /// seed never overlap.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngState {
            seed,
            stream,
            draws: 0,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of 64-bit outputs taken so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn next_u64(&mut self) -> u64 {
        self.draws += 1;
        self.inner.next_u64()
    }

    pub fn next_unit_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * UNIT_SCALE
    }

    /// Child generator for `index`, keyed by one draw from `self`.
    pub fn split(&mut self, index: u64) -> RngState {
        let base = self.next_u64();
        RngState::with_stream(base, index)
    }
}

/// Standard normal from two unit uniforms. `u1` is mapped to `1 - u1` so the
/// logarithm never sees zero.
pub fn box_muller(u1: f64, u2: f64) -> f64 {
    let radius = (-2.0 * (1.0 - u1).ln()).sqrt();
    radius * (2.0 * std::f64::consts::PI * u2).cos()
}

fn check_scale(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidScale(sigma))
    }
}

fn check_prob(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

pub fn normal(mu: f64, sigma: f64, rng: &mut RngState) -> Result<f64> {
    check_scale(sigma)?;
    let u1 = rng.next_unit_uniform();
    let u2 = rng.next_unit_uniform();
    Ok(normal_from_uniforms(mu, sigma, u1, u2))
}

pub(crate) fn normal_from_uniforms(mu: f64, sigma: f64, u1: f64, u2: f64) -> f64 {
    mu + sigma * box_muller(u1, u2)
}

pub fn bernoulli(p: f64, rng: &mut RngState) -> Result<bool> {
    check_prob(p)?;
    Ok(rng.next_unit_uniform() < p)
}

pub fn uniform(lo: f64, hi: f64, rng: &mut RngState) -> Result<f64> {
    if !(lo <= hi) {
        return Err(Error::Model(format!("uniform bounds out of order: {lo} > {hi}")));
    }
    Ok(lo + (hi - lo) * rng.next_unit_uniform())
}

/// Marsaglia–Tsang. Shapes below one are boosted by `U^(1/shape)`.
pub fn gamma_sample(shape: f64, scale: f64, rng: &mut RngState) -> Result<f64> {
    check_scale(shape)?;
    check_scale(scale)?;
    if shape < 1.0 {
        let boosted = gamma_sample(shape + 1.0, 1.0, rng)?;
        let u = 1.0 - rng.next_unit_uniform();
        return Ok(scale * boosted * u.powf(1.0 / shape));
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let z = normal(0.0, 1.0, rng)?;
        let v = (1.0 + c * z).powi(3);
        if v <= 0.0 {
            continue;
        }
        let u = 1.0 - rng.next_unit_uniform();
        if u.ln() < 0.5 * z * z + d - d * v + d * v.ln() {
            return Ok(scale * d * v);
        }
    }
}

/// `log N(x; mu, sigma)` as a weight.
pub fn log_normal_pdf(x: f64, sigma: f64, mu: f64) -> Result<LogWeight> {
    check_scale(sigma)?;
    let z = (x - mu) / sigma;
    let log = -(sigma * (2.0 * std::f64::consts::PI).sqrt()).ln() - 0.5 * z * z;
    LogWeight::try_from_log(log)
}
