//! Bundled models.
//!
//! All of them draw randomness only through fixed-draw samplers (`normal` = 2
//! uniforms, `bernoulli`/`uniform` = 1), so their traces have a length that
//! depends only on control flow.

use std::sync::Arc;

use crate::effects::{bernoulli, fold_n, normal, observe_normal, pure, sample, score, Model};
use crate::error::{Error, Result};
use crate::logweight::LogWeight;
use crate::randomness::{self, RngState};

/// Number of latent blocks per month series.
pub const BLOCKS: usize = 13;

/// Six-step Gaussian random walk from 0 with unit transition noise; after
/// each step the datum 3.0 is scored under `N(x, 0.2)`. Returns the last
/// state. Issues 12 samples and 6 scores.
pub fn markov_chain_model() -> Model<f64> {
    markov_chain_model_with(1.0)
}

/// The same chain with a different transition scale.
pub fn markov_chain_model_with(transition_sd: f64) -> Model<f64> {
    fold_n(6, 0.0, move |_, x| {
        normal(x, transition_sd).bind(|x| observe_normal(3.0, x, 0.2).then(pure(x)))
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledPoint {
    pub x: f64,
    pub label: bool,
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// One-covariate logistic regression: slope and intercept ~ N(0, 1), then one
/// Bernoulli-likelihood score per datum. Returns `(slope, intercept)`.
pub fn logistic_regression_model(data: Vec<LabeledPoint>) -> Result<Model<(f64, f64)>> {
    if data.is_empty() {
        return Err(Error::Model("logistic regression needs at least one datum".into()));
    }
    let data = Arc::new(data);
    Ok(normal(0.0, 1.0).bind(move |slope| {
        let data = Arc::clone(&data);
        normal(0.0, 1.0).bind(move |intercept| {
            let data = Arc::clone(&data);
            let n = data.len();
            fold_n(n, (), move |i, ()| {
                let p = data[i];
                let z = slope * p.x + intercept;
                // log sigmoid(z) and log(1 - sigmoid(z))
                let log_lik = if p.label { -softplus(-z) } else { -softplus(z) };
                score(LogWeight::from_log(log_lik))
            })
            .then(pure((slope, intercept)))
        })
    }))
}

/// `n` points on an even grid over [-2.5, 2.5] with labels drawn from a
/// logistic curve (slope 1.5, intercept -0.5) under a fixed generator seed.
pub fn synthetic_logistic_data(n: usize, seed: u64) -> Vec<LabeledPoint> {
    let mut rng = RngState::new(seed);
    (0..n)
        .map(|i| {
            let x = if n > 1 {
                -2.5 + 5.0 * i as f64 / (n - 1) as f64
            } else {
                0.0
            };
            let p = 1.0 / (1.0 + (-(1.5 * x - 0.5)).exp());
            LabeledPoint {
                x,
                label: rng.next_unit_uniform() < p,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClimateHyperParams {
    pub a_mean: f64,
    pub a_std: f64,
    pub w_mean: f64,
    pub w_std: f64,
    pub therm_bias_mean: f64,
    pub therm_bias_std: f64,
    pub score_sigma: f64,
    pub init_lo: f64,
    pub init_hi: f64,
}

impl ClimateHyperParams {
    /// Defaults with the uniform prior on the first latent over `[lo, hi]`.
    pub fn with_bounds(init_lo: f64, init_hi: f64) -> Self {
        ClimateHyperParams {
            a_mean: 1.0,
            a_std: 0.4,
            w_mean: 0.0,
            w_std: 1.0,
            therm_bias_mean: 0.0,
            therm_bias_std: 0.05,
            score_sigma: 4.7,
            init_lo,
            init_hi,
        }
    }

    /// Defaults with prior bounds from the min and max reading of the first
    /// block.
    pub fn from_observations(obs: &MonthObservations) -> Result<Self> {
        let first = obs
            .ys
            .first()
            .filter(|b| !b.is_empty())
            .ok_or_else(|| Error::DimensionMismatch("first block has no readings".into()))?;
        let lo = first.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = first.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self::with_bounds(lo, hi))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a_std", self.a_std),
            ("w_std", self.w_std),
            ("therm_bias_std", self.therm_bias_std),
            ("score_sigma", self.score_sigma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.init_lo <= self.init_hi) {
            return Err(Error::Config(format!(
                "init_lo {} exceeds init_hi {}",
                self.init_lo, self.init_hi
            )));
        }
        Ok(())
    }
}

/// One month's readings, grouped by block.
#[derive(Clone, Debug, PartialEq)]
pub struct MonthObservations {
    pub ys: Vec<Vec<f64>>,
    pub vs: Vec<Vec<f64>>,
}

impl MonthObservations {
    pub fn validate(&self) -> Result<()> {
        if self.ys.len() != BLOCKS || self.vs.len() != BLOCKS {
            return Err(Error::DimensionMismatch(format!(
                "expected {BLOCKS} blocks, got {} readings and {} uncertainties",
                self.ys.len(),
                self.vs.len()
            )));
        }
        for (i, (y, v)) in self.ys.iter().zip(&self.vs).enumerate() {
            if y.len() != v.len() {
                return Err(Error::DimensionMismatch(format!(
                    "block {i}: {} readings but {} uncertainties",
                    y.len(),
                    v.len()
                )));
            }
            if let Some(bad) = v.iter().find(|s| !(**s > 0.0)) {
                return Err(Error::DimensionMismatch(format!(
                    "block {i}: non-positive uncertainty {bad}"
                )));
            }
        }
        Ok(())
    }

    /// Number of `sample` requests one run of the climate model issues.
    pub fn sample_count(&self) -> usize {
        1 + (BLOCKS - 1) * 4 + self.ys.iter().map(|b| 4 * b.len()).sum::<usize>()
    }

    pub fn score_count(&self) -> usize {
        self.ys.iter().map(Vec::len).sum()
    }
}

/// Draws `n` normals with per-index parameters, collecting them in order.
fn normals(n: usize, params: impl Fn(usize) -> (f64, f64) + Send + Sync + 'static) -> Model<Vec<f64>> {
    fold_n(n, Vec::with_capacity(n), move |j, acc: Vec<f64>| {
        let (mu, sd) = params(j);
        normal(mu, sd).map(move |x| {
            let mut acc = acc.clone();
            acc.push(x);
            acc
        })
    })
}

/// Linear-Gaussian latent chain over the blocks of one month. The first
/// latent is uniform on `[init_lo, init_hi]`; later ones follow
/// `x_i = a * x_{i-1} + w`. Each block draws a multiplicative thermometer
/// bias and an additive noise term per reading and scores every reading
/// under `N(prediction, score_sigma)`. Returns the block latents.
pub fn climate_month_model(obs: MonthObservations, hp: ClimateHyperParams) -> Result<Model<Vec<f64>>> {
    obs.validate()?;
    hp.validate()?;
    let obs = Arc::new(obs);
    let hp = Arc::new(hp);
    Ok(fold_n(
        BLOCKS,
        Vec::with_capacity(BLOCKS),
        move |i, latents: Vec<f64>| {
            let obs = Arc::clone(&obs);
            let hp2 = Arc::clone(&hp);
            let next_state: Model<f64> = if i == 0 {
                let (lo, hi) = (hp.init_lo, hp.init_hi);
                sample().map(move |u| u * (hi - lo) + lo)
            } else {
                let prev = latents[i - 1];
                normal(hp.a_mean, hp.a_std).bind(move |a| normal(hp2.w_mean, hp2.w_std).map(move |w| prev * a + w))
            };
            let hp = Arc::clone(&hp);
            next_state.bind(move |x| {
                let n = obs.ys[i].len();
                let bias_mean = 1.0 + hp.therm_bias_mean;
                let bias_std = hp.therm_bias_std;
                let obs_v = Arc::clone(&obs);
                let obs_s = Arc::clone(&obs);
                let sigma = hp.score_sigma;
                let mut latents = latents.clone();
                latents.push(x);
                normals(n, move |_| (bias_mean, bias_std)).bind(move |c_row| {
                    let obs_v = Arc::clone(&obs_v);
                    let obs_s = Arc::clone(&obs_s);
                    let latents = latents.clone();
                    normals(n, move |j| (0.0, obs_v.vs[i][j])).bind(move |v_row| {
                        let obs_s = Arc::clone(&obs_s);
                        let c_row = c_row.clone();
                        fold_n(n, (), move |j, ()| {
                            let prediction = x * c_row[j] + v_row[j];
                            observe_normal(obs_s.ys[i][j], prediction, sigma)
                        })
                        .then(pure(latents.clone()))
                    })
                })
            })
        },
    ))
}

/// Scalar linear-Gaussian state-space model. `x_0 ~ N(prior_mean,
/// prior_var)`; for `t >= 1`, `x_t = a[t] x_{t-1} + N(0, q)`; every `y_t` is
/// scored under `N(c[t] x_t, r[t])`. Returns the last state.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearGaussian {
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    pub q: f64,
    pub r: Vec<f64>,
    pub y: Vec<f64>,
    pub prior_mean: f64,
    pub prior_var: f64,
}

impl LinearGaussian {
    /// A five-observation instance with time-varying coefficients.
    pub fn example() -> Self {
        LinearGaussian {
            a: vec![1.0, 0.9, 1.1, 0.8, 1.0],
            c: vec![1.0, 1.2, 0.7, 1.0, 0.9],
            q: 0.5,
            r: vec![0.4, 0.6, 0.3, 0.5, 0.4],
            y: vec![0.3, 1.1, 0.4, -0.2, 0.6],
            prior_mean: 0.0,
            prior_var: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.y.len();
        if t == 0 || self.a.len() != t || self.c.len() != t || self.r.len() != t {
            return Err(Error::DimensionMismatch(format!(
                "a={}, c={}, r={}, y={}",
                self.a.len(),
                self.c.len(),
                self.r.len(),
                t
            )));
        }
        if !(self.q > 0.0 && self.prior_var > 0.0 && self.r.iter().all(|r| *r > 0.0)) {
            return Err(Error::InvalidScale(self.q.min(self.prior_var)));
        }
        Ok(())
    }
}

pub fn linear_gaussian_model(p: LinearGaussian) -> Result<Model<f64>> {
    p.validate()?;
    let p = Arc::new(p);
    let init = Arc::clone(&p);
    let steps = p.y.len() - 1;
    let first = normal(init.prior_mean, init.prior_var.sqrt())
        .bind(move |x| observe_normal(init.y[0], init.c[0] * x, init.r[0].sqrt()).then(pure(x)));
    Ok(first.bind(move |x0| {
        let p = Arc::clone(&p);
        fold_n(steps, x0, move |i, x| {
            let t = i + 1;
            let p = Arc::clone(&p);
            normal(p.a[t] * x, p.q.sqrt())
                .bind(move |x| observe_normal(p.y[t], p.c[t] * x, p.r[t].sqrt()).then(pure(x)))
        })
    }))
}

/// Two binary choices; only the first is returned. `b ~ Bernoulli(0.3)`,
/// `n ~ Bernoulli(0.5)`, likelihood table `(b, n)`: (T,T) 0.9, (T,F) 0.7,
/// (F,T) 0.2, (F,F) 0.1. Posterior P(b) = 0.24 / 0.345.
pub fn coin_model() -> Model<bool> {
    bernoulli(0.3).bind(|b| {
        bernoulli(0.5).bind(move |n| {
            let lik = match (b, n) {
                (true, true) => 0.9,
                (true, false) => 0.7,
                (false, true) => 0.2,
                (false, false) => 0.1,
            };
            score(LogWeight::from_log(f64::ln(lik))).then(pure(b))
        })
    })
}

/// Data for the Gaussian-mean toy problem.
pub const GAUSSIAN_MEAN_DATA: [f64; 5] = [0.8, 1.2, 0.5, 1.9, 1.1];

/// `theta ~ N(0, 1)`.
pub fn gaussian_mean_prior() -> Model<f64> {
    normal(0.0, 1.0)
}

/// Scores each observation under `N(theta, 1)`.
pub fn gaussian_mean_likelihood(theta: f64, data: &[f64]) -> Model<f64> {
    let data: Arc<Vec<f64>> = Arc::new(data.to_vec());
    let n = data.len();
    fold_n(n, (), move |i, ()| observe_normal(data[i], theta, 1.0)).then(pure(theta))
}

/// Prior and likelihood combined in one model.
pub fn gaussian_mean_model(data: &[f64]) -> Model<f64> {
    let data = data.to_vec();
    gaussian_mean_prior().bind(move |theta| gaussian_mean_likelihood(theta, &data))
}

/// Closed-form posterior mean and variance of the Gaussian-mean toy.
pub fn gaussian_mean_posterior(data: &[f64]) -> (f64, f64) {
    let precision = 1.0 + data.len() as f64;
    (data.iter().sum::<f64>() / precision, 1.0 / precision)
}

/// AR(1) walk with `n` score statements; used to exercise long runs.
pub fn many_scores_model(n: usize) -> Model<f64> {
    fold_n(n, 0.0, |_, x| {
        normal(0.5 * x, 1.0).bind(|x| observe_normal(0.0, x, 1.0).then(pure(x)))
    })
}

/// `N(mu, sigma)` density of `x` as a weight; re-exported for model authors.
pub fn normal_density(x: f64, sigma: f64, mu: f64) -> Result<LogWeight> {
    randomness::log_normal_pdf(x, sigma, mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::{Request, Response, Step};
    use proptest::prelude::*;

    /// Runs with a constant uniform, counting requests and summing scores.
    fn audit<V>(m: &Model<V>, u: f64) -> (usize, usize, f64, V) {
        let (mut samples, mut scores, mut logw) = (0, 0, 0.0);
        let mut step = m.start().unwrap();
        loop {
            match step {
                Step::Done(v) => return (samples, scores, logw, v),
                Step::Suspended(Request::Sample, k) => {
                    samples += 1;
                    step = k.resume(Response::Unit(u)).unwrap();
                }
                Step::Suspended(Request::Score(w), k) => {
                    scores += 1;
                    logw += w.log_value();
                    step = k.resume(Response::Ack).unwrap();
                }
                Step::Suspended(Request::Yield, k) => step = k.resume(Response::Ack).unwrap(),
            }
        }
    }

    #[test]
    fn chain_request_counts_and_golden() {
        let (samples, scores, logw, x) = audit(&markov_chain_model(), 0.5);
        assert_eq!((samples, scores), (12, 6));
        // each step adds sqrt(-2 ln 0.5) cos(pi) = -sqrt(2 ln 2)
        let step = -(2.0 * 2f64.ln()).sqrt();
        assert!((x - 6.0 * step).abs() < 1e-12);
        let norm = (0.2 * (2.0 * std::f64::consts::PI).sqrt()).ln();
        let expected: f64 = (1..=6)
            .map(|i| {
                let xi = i as f64 * step;
                -norm - (3.0 - xi).powi(2) / (2.0 * 0.04)
            })
            .sum();
        assert!((logw - expected).abs() < 1e-9);
    }

    #[test]
    fn chain_first_request_is_sample() {
        assert_eq!(markov_chain_model().start().unwrap().request(), Some(&Request::Sample));
    }

    #[test]
    fn logistic_regression_counts() {
        let data = synthetic_logistic_data(50, 7);
        let m = logistic_regression_model(data).unwrap();
        let (samples, scores, logw, _) = audit(&m, 0.3);
        assert_eq!((samples, scores), (4, 50));
        assert!(logw.is_finite() && logw < 0.0);
        assert!(logistic_regression_model(Vec::new()).is_err());
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0 && softplus(-800.0) < 1e-300);
    }

    fn climate_obs(per_block: usize) -> MonthObservations {
        MonthObservations {
            ys: (0..BLOCKS).map(|b| vec![8.0 + 0.1 * b as f64; per_block]).collect(),
            vs: (0..BLOCKS).map(|_| vec![0.3; per_block]).collect(),
        }
    }

    #[test]
    fn climate_defaults_and_shape() {
        let hp = ClimateHyperParams::with_bounds(5.0, 10.0);
        assert_eq!((hp.a_mean, hp.a_std), (1.0, 0.4));
        assert_eq!((hp.w_mean, hp.w_std), (0.0, 1.0));
        assert_eq!(hp.therm_bias_std, 0.05);
        assert_eq!(hp.score_sigma, 4.7);

        let obs = climate_obs(20);
        let m = climate_month_model(obs.clone(), hp).unwrap();
        let (samples, scores, _, latents) = audit(&m, 0.5);
        assert_eq!(latents.len(), BLOCKS);
        assert_eq!(samples, obs.sample_count());
        assert_eq!(samples, 1 + 12 * 4 + 13 * 20 * 4);
        assert_eq!(scores, 260);
        assert!((latents[0] - 7.5).abs() < 1e-12);
    }

    #[test]
    fn climate_rejects_bad_shapes() {
        let hp = ClimateHyperParams::with_bounds(0.0, 1.0);
        let mut obs = climate_obs(2);
        obs.ys.pop();
        assert!(climate_month_model(obs, hp.clone()).is_err());
        let mut obs = climate_obs(2);
        obs.vs[3].pop();
        assert!(climate_month_model(obs, hp.clone()).is_err());
        let mut bad = hp;
        bad.init_lo = 2.0;
        assert!(climate_month_model(climate_obs(2), bad).is_err());
    }

    #[test]
    fn coin_and_gaussian_counts() {
        let (s, c, _, _) = audit(&coin_model(), 0.1);
        assert_eq!((s, c), (2, 1));
        let (s, c, _, _) = audit(&gaussian_mean_model(&GAUSSIAN_MEAN_DATA), 0.4);
        assert_eq!((s, c), (2, 5));
        let (m, v) = gaussian_mean_posterior(&GAUSSIAN_MEAN_DATA);
        assert!((m - 5.5 / 6.0).abs() < 1e-12);
        assert!((v - 1.0 / 6.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn climate_counts_match_formula(sizes in proptest::collection::vec(1usize..5, BLOCKS), u in 0.0f64..1.0) {
            let obs = MonthObservations {
                ys: sizes.iter().map(|&n| vec![10.0; n]).collect(),
                vs: sizes.iter().map(|&n| vec![0.5; n]).collect(),
            };
            let m = climate_month_model(obs.clone(), ClimateHyperParams::with_bounds(9.0, 11.0)).unwrap();
            let (samples, scores, _, latents) = audit(&m, u);
            prop_assert_eq!(samples, obs.sample_count());
            prop_assert_eq!(scores, obs.score_count());
            prop_assert_eq!(latents.len(), BLOCKS);
        }

        #[test]
        fn logistic_counts_match_data(n in 1usize..40, u in 0.0f64..1.0) {
            let m = logistic_regression_model(synthetic_logistic_data(n, 3)).unwrap();
            let (samples, scores, _, _) = audit(&m, u);
            prop_assert_eq!((samples, scores), (4, n));
        }

        #[test]
        fn chain_counts_fixed(u in 0.0f64..1.0) {
            let (samples, scores, _, _) = audit(&markov_chain_model(), u);
            prop_assert_eq!((samples, scores), (12, 6));
        }
    }
}
