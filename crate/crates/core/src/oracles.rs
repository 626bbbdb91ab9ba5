//! Exact reference computations for checking the samplers.

use crate::effects::{Model, Request, Response, Step};
use crate::error::{Error, Result};
use crate::inference::Histogram;
use crate::logweight::LogWeight;

/// Filtered mean and variance of the latent state after each observation.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct KalmanPosterior {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

/// Scalar Kalman filter for `x_t = a[t] x_{t-1} + N(0, q)`,
/// `y_t = c[t] x_t + N(0, r[t])`, with `x_0 ~ N(prior_mean, prior_var)`.
/// The first observation updates the prior directly, so `a[0]` is unused.
/// Zero noise variances are allowed.
pub fn kalman_filter_exact(
    a: &[f64],
    c: &[f64],
    q: f64,
    r: &[f64],
    y: &[f64],
    prior_mean: f64,
    prior_var: f64,
) -> Result<KalmanPosterior> {
    let t = y.len();
    if a.len() != t || c.len() != t || r.len() != t {
        return Err(Error::DimensionMismatch(format!(
            "a={}, c={}, r={}, y={}",
            a.len(),
            c.len(),
            r.len(),
            t
        )));
    }
    if !(prior_var > 0.0) {
        return Err(Error::InvalidScale(prior_var));
    }
    if let Some(bad) = std::iter::once(&q).chain(r).find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidScale(*bad));
    }
    let (mut m, mut p) = (prior_mean, prior_var);
    let mut out = KalmanPosterior {
        means: Vec::with_capacity(t),
        variances: Vec::with_capacity(t),
    };
    for i in 0..t {
        if i > 0 {
            m *= a[i];
            p = a[i] * a[i] * p + q;
        }
        let s = c[i] * c[i] * p + r[i];
        if !(s > 0.0) {
            return Err(Error::InvalidScale(s));
        }
        let gain = p * c[i] / s;
        m += gain * (y[i] - c[i] * m);
        p = p * r[i] / s;
        out.means.push(m);
        out.variances.push(p);
    }
    Ok(out)
}

/// Largest number of grid points [`enumerate_discrete_posterior`] visits.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Exact posterior of `model` when every `Sample` is restricted to the grid
/// `{0, 1/n, ..., (n-1)/n}` with equal probability. Explores every path by
/// forking at each sample, multiplying `1/n` per draw and every score along
/// the way. Fails once more than [`ENUMERATION_LIMIT`] paths are pending or
/// finished.
pub fn enumerate_discrete_posterior<V>(model: &Model<V>, resolution: usize) -> Result<Histogram<V>> {
    if resolution == 0 {
        return Err(Error::Config("resolution must be at least 1".into()));
    }
    let cell = LogWeight::from_log(-(resolution as f64).ln());
    let mut out = Vec::new();
    let mut stack = vec![(model.start()?, LogWeight::ONE)];
    while let Some((step, w)) = stack.pop() {
        let paths = (out.len() + stack.len()) as u128;
        if paths > ENUMERATION_LIMIT {
            return Err(Error::GridTooLarge(paths));
        }
        match step {
            Step::Done(v) => out.push((w, v)),
            Step::Suspended(Request::Sample, k) => {
                for j in (0..resolution).rev() {
                    let u = j as f64 / resolution as f64;
                    stack.push((k.fork().resume(Response::Unit(u))?, w * cell));
                }
            }
            Step::Suspended(Request::Score(s), k) => stack.push((k.resume(Response::Ack)?, w * s)),
            Step::Suspended(Request::Yield, k) => stack.push((k.resume(Response::Ack)?, w)),
        }
    }
    Histogram::from_entries(out).normalise()
}

/// Sums the weights of equal values, keeping first-seen order.
pub fn merge_equal<V: PartialEq + Clone>(h: &Histogram<V>) -> Histogram<V> {
    let mut merged: Vec<(Vec<LogWeight>, V)> = Vec::new();
    for (w, v) in h.iter() {
        match merged.iter_mut().find(|(_, u)| u == v) {
            Some((ws, _)) => ws.push(*w),
            None => merged.push((vec![*w], v.clone())),
        }
    }
    merged.into_iter().map(|(ws, v)| (LogWeight::sum(&ws), v)).collect()
}

/// Total-variation distance between two normalised histograms over the
/// same value space.
pub fn total_variation<V: PartialEq + Clone>(a: &Histogram<V>, b: &Histogram<V>) -> f64 {
    let (a, b) = (merge_equal(a), merge_equal(b));
    let mut tv = 0.0;
    for (w, v) in a.iter() {
        let other = b.iter().find(|(_, u)| u == v).map_or(0.0, |(x, _)| x.to_prob());
        tv += (w.to_prob() - other).abs();
    }
    for (w, v) in b.iter() {
        if !a.iter().any(|(_, u)| u == v) {
            tv += w.to_prob();
        }
    }
    tv / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::{pure, sample, score};
    use crate::models::coin_model;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn noise_free_limit_returns_observation() {
        let k = kalman_filter_exact(&[1.0], &[1.0], 0.0, &[0.0], &[2.5], 0.0, 1.0).unwrap();
        assert!((k.means[0] - 2.5).abs() < 1e-12);
        assert_eq!(k.variances[0], 0.0);
        let k = kalman_filter_exact(&[1.0, 1.0], &[1.0, 1.0], 1e-9, &[1e-12, 1e-12], &[2.5, 2.5], 0.0, 1.0).unwrap();
        assert!((k.means[1] - 2.5).abs() < 1e-9);
        let k = kalman_filter_exact(&[1.0], &[1.0], 1e-12, &[1e-12], &[-4.0], 3.0, 2.0).unwrap();
        assert!((k.means[0] + 4.0).abs() < 1e-9);
    }

    #[test]
    fn single_step_conjugate() {
        let (m0, v0, r, y) = (0.7, 2.0, 0.5, 1.9);
        let k = kalman_filter_exact(&[1.0], &[1.0], 1.0, &[r], &[y], m0, v0).unwrap();
        let mean = (m0 / v0 + y / r) / (1.0 / v0 + 1.0 / r);
        assert!((k.means[0] - mean).abs() < 1e-14);
        assert!((k.variances[0] - 1.0 / (1.0 / v0 + 1.0 / r)).abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(kalman_filter_exact(&[1.0], &[1.0, 1.0], 1.0, &[1.0], &[1.0], 0.0, 1.0).is_err());
        assert!(kalman_filter_exact(&[1.0], &[1.0], -1.0, &[1.0], &[1.0], 0.0, 1.0).is_err());
    }

    /// Conditions the joint Gaussian of `(x_0..x_{T-1}, y_0..y_{T-1})` on the
    /// observations and returns the mean and variance of `x_{T-1}`.
    fn dense_gaussian_last(a: &[f64], c: &[f64], q: f64, r: &[f64], y: &[f64], m0: f64, v0: f64) -> (f64, f64) {
        let t = y.len();
        // x = L e + mean, with e ~ N(0, I) over (x_0 noise, w_1..w_{T-1}).
        let mut mean_x = DVector::zeros(t);
        let mut lx = DMatrix::zeros(t, t);
        mean_x[0] = m0;
        lx[(0, 0)] = v0.sqrt();
        for i in 1..t {
            mean_x[i] = a[i] * mean_x[i - 1];
            for j in 0..i {
                lx[(i, j)] = a[i] * lx[(i - 1, j)];
            }
            lx[(i, i)] = q.sqrt();
        }
        let cov_x = &lx * lx.transpose();
        let cm = DMatrix::from_diagonal(&DVector::from_column_slice(c));
        let cov_y = &cm * &cov_x * &cm + DMatrix::from_diagonal(&DVector::from_column_slice(r));
        let cov_xy = &cov_x * &cm;
        let mean_y = &cm * &mean_x;
        let inv = cov_y.try_inverse().unwrap();
        let resid = DVector::from_column_slice(y) - mean_y;
        let post_mean = &mean_x + &cov_xy * &inv * resid;
        let post_cov = &cov_x - &cov_xy * &inv * cov_xy.transpose();
        (post_mean[t - 1], post_cov[(t - 1, t - 1)])
    }

    #[test]
    fn matches_dense_gaussian_conditioning() {
        let mut rng = crate::randomness::RngState::new(21);
        for _ in 0..20 {
            let mut u = || rng.next_unit_uniform();
            let a: Vec<f64> = (0..5).map(|_| 0.5 + u()).collect();
            let c: Vec<f64> = (0..5).map(|_| 0.5 + u()).collect();
            let r: Vec<f64> = (0..5).map(|_| 0.1 + u()).collect();
            let y: Vec<f64> = (0..5).map(|_| 4.0 * u() - 2.0).collect();
            let (q, m0, v0) = (0.2 + u(), u() - 0.5, 0.5 + u());
            let k = kalman_filter_exact(&a, &c, q, &r, &y, m0, v0).unwrap();
            let (m, v) = dense_gaussian_last(&a, &c, q, &r, &y, m0, v0);
            assert!((k.means[4] - m).abs() < 1e-10, "{} vs {m}", k.means[4]);
            assert!((k.variances[4] - v).abs() < 1e-10);
        }
    }

    #[test]
    fn variance_shrinks_with_precision() {
        let mut last = f64::INFINITY;
        for r in [4.0, 2.0, 1.0, 0.5, 0.1] {
            let k = kalman_filter_exact(&[1.0; 3], &[1.0; 3], 0.3, &[r; 3], &[0.0; 3], 0.0, 1.0).unwrap();
            assert!(k.variances[2] <= last);
            last = k.variances[2];
        }
    }

    #[test]
    fn enumerate_hand_example() {
        let m = sample().bind(|u| score(LogWeight::from_prob(u + 0.25).unwrap()).then(pure(u)));
        let h = enumerate_discrete_posterior(&m, 2).unwrap();
        let probs: Vec<f64> = h.iter().map(|(w, _)| w.to_prob()).collect();
        assert!((probs[0] - 0.25).abs() < 1e-15 && (probs[1] - 0.75).abs() < 1e-15);
        assert_eq!(h.values().copied().collect::<Vec<_>>(), vec![0.0, 0.5]);
    }

    #[test]
    fn enumerate_deterministic_and_coin() {
        let h = enumerate_discrete_posterior(&pure('z'), 7).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h.entries()[0].0, LogWeight::ONE);

        let h = merge_equal(&enumerate_discrete_posterior(&coin_model(), 10).unwrap());
        assert!((h.total_weight().log_value()).abs() < 1e-12);
        let pb = h.iter().find(|(_, v)| *v).unwrap().0.to_prob();
        assert!((pb - 0.24 / 0.345).abs() < 1e-12);
    }

    #[test]
    fn enumerate_refuses_large_grids() {
        let m = crate::models::markov_chain_model();
        assert!(matches!(
            enumerate_discrete_posterior(&m, 10),
            Err(Error::GridTooLarge(_))
        ));
    }

    #[test]
    fn enumeration_agrees_with_importance_sampling() {
        let exact = merge_equal(&enumerate_discrete_posterior(&coin_model(), 10).unwrap());
        let est = crate::inference::importance_sampling(&coin_model(), 50_000, &mut crate::RngState::new(3)).unwrap();
        let pb_exact = exact.iter().find(|(_, v)| *v).unwrap().0.to_prob();
        let pb = est.mass_where(|b| *b).unwrap();
        let se = (pb_exact * (1.0 - pb_exact) / est.ess()).sqrt();
        assert!((pb - pb_exact).abs() < 3.0 * se, "{pb} vs {pb_exact}");
    }

    #[test]
    fn total_variation_examples() {
        let p = |x: f64| LogWeight::from_prob(x).unwrap();
        let a = Histogram::from_entries(vec![(p(0.5), 1), (p(0.5), 2)]);
        let b = Histogram::from_entries(vec![(p(1.0), 1)]);
        assert!((total_variation(&a, &b) - 0.5).abs() < 1e-15);
        assert_eq!(total_variation(&a, &a), 0.0);
    }
}
