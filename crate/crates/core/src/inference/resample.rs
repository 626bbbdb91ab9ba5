use crate::error::{Error, Result};
use crate::logweight::LogWeight;
use crate::randomness::RngState;

use super::Histogram;

/// Draws `k_out` indices with replacement, index `i` with probability
/// `w_i / sum w`. One uniform per draw: a point `R` in `[0, sum w)` picks the
/// entry whose cumulative weight first exceeds it. Zero weights are never
/// picked.
pub fn multinomial_indices(weights: &[LogWeight], k_out: usize, rng: &mut RngState) -> Result<Vec<usize>> {
    let max = weights.iter().map(|w| w.log_value()).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::DegenerateHistogram);
    }
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += (w.log_value() - max).exp();
        cumulative.push(acc);
    }
    let last_positive = weights
        .iter()
        .rposition(|w| !w.is_zero())
        .expect("a positive weight exists");
    let mut out = Vec::with_capacity(k_out);
    for _ in 0..k_out {
        let r = rng.next_unit_uniform() * acc;
        let i = cumulative.partition_point(|&c| c <= r);
        out.push(i.min(last_positive));
    }
    Ok(out)
}

/// Resamples `h` to `k_out` entries. Every output entry carries `sum w /
/// k_out`, so a normalised input yields weights `1/k_out` and an
/// unnormalised one keeps its total mass.
pub fn multinomial_resample<V: Clone>(h: &Histogram<V>, k_out: usize, rng: &mut RngState) -> Result<Histogram<V>> {
    let weights = h.weights();
    let indices = multinomial_indices(&weights, k_out, rng)?;
    let each = share(h.total_weight(), k_out)?;
    Ok(indices.into_iter().map(|i| (each, h.entries()[i].1.clone())).collect())
}

pub(crate) fn share(total: LogWeight, k: usize) -> Result<LogWeight> {
    total.div(LogWeight::from_log((k as f64).ln()))
}
