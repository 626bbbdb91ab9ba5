use crate::error::{Error, Result};
use crate::logweight::{log_sum_exp, LogWeight};

/// A weighted multiset of values. Duplicates are kept as separate entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram<V> {
    entries: Vec<(LogWeight, V)>,
}

impl<V> Default for Histogram<V> {
    fn default() -> Self {
        Histogram { entries: Vec::new() }
    }
}

impl<V> FromIterator<(LogWeight, V)> for Histogram<V> {
    fn from_iter<I: IntoIterator<Item = (LogWeight, V)>>(iter: I) -> Self {
        Histogram {
            entries: iter.into_iter().collect(),
        }
    }
}

impl<V> Histogram<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: Vec<(LogWeight, V)>) -> Self {
        Histogram { entries }
    }

    /// Equal weights `1/n` over `values`.
    pub fn uniform(values: Vec<V>) -> Self {
        let w = LogWeight::from_log(-(values.len() as f64).ln());
        values.into_iter().map(|v| (w, v)).collect()
    }

    pub fn push(&mut self, weight: LogWeight, value: V) {
        self.entries.push((weight, value));
    }

    pub fn entries(&self) -> &[(LogWeight, V)] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<(LogWeight, V)> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, (LogWeight, V)> {
        self.entries.iter()
    }

    pub fn weights(&self) -> Vec<LogWeight> {
        self.entries.iter().map(|(w, _)| *w).collect()
    }

    pub fn values(&self) -> impl Iterator<Item = &V> {
        self.entries.iter().map(|(_, v)| v)
    }

    pub fn total_weight(&self) -> LogWeight {
        LogWeight::sum(self.entries.iter().map(|(w, _)| w))
    }

    pub fn map<W, F: FnMut(&V) -> W>(&self, mut f: F) -> Histogram<W> {
        self.entries.iter().map(|(w, v)| (*w, f(v))).collect()
    }

    /// Divides every weight by the total.
    pub fn normalise(self) -> Result<Histogram<V>> {
        let total = self.total_weight();
        if total.is_zero() {
            return Err(Error::DegenerateHistogram);
        }
        let entries = self
            .entries
            .into_iter()
            .map(|(w, v)| Ok((w.div(total)?, v)))
            .collect::<Result<_>>()?;
        Ok(Histogram { entries })
    }

    /// `(sum w)^2 / sum w^2`; zero for an all-zero histogram.
    pub fn ess(&self) -> f64 {
        effective_sample_size(&self.weights())
    }

    /// Self-normalised estimate of `E[g]`, with weights exponentiated after
    /// shifting by the largest log weight.
    pub fn estimate_expectation<G: Fn(&V) -> f64>(&self, g: G) -> Result<f64> {
        let max = self.max_log_weight()?;
        let (mut num, mut den) = (0.0, 0.0);
        for (w, v) in &self.entries {
            let p = (w.log_value() - max).exp();
            if p > 0.0 {
                num += g(v) * p;
                den += p;
            }
        }
        Ok(num / den)
    }

    /// Weighted mean and standard deviation of `g`.
    pub fn mean_and_std<G: Fn(&V) -> f64>(&self, g: G) -> Result<(f64, f64)> {
        let mean = self.estimate_expectation(&g)?;
        let var = self.estimate_expectation(|v| (g(v) - mean).powi(2))?;
        Ok((mean, var.max(0.0).sqrt()))
    }

    /// Normalised probability of the entries satisfying `pred`.
    pub fn mass_where<P: Fn(&V) -> bool>(&self, pred: P) -> Result<f64> {
        self.estimate_expectation(|v| if pred(v) { 1.0 } else { 0.0 })
    }

    fn max_log_weight(&self) -> Result<f64> {
        let max = self
            .entries
            .iter()
            .map(|(w, _)| w.log_value())
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            Err(Error::DegenerateHistogram)
        } else {
            Ok(max)
        }
    }
}

/// `(sum w)^2 / sum w^2`, computed in log space.
pub fn effective_sample_size(weights: &[LogWeight]) -> f64 {
    let logs: Vec<f64> = weights.iter().map(|w| w.log_value()).collect();
    let sum = log_sum_exp(&logs);
    if sum == f64::NEG_INFINITY {
        return 0.0;
    }
    let doubled: Vec<f64> = logs.iter().map(|l| 2.0 * l).collect();
    (2.0 * sum - log_sum_exp(&doubled)).exp()
}
