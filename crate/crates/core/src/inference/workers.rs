use rayon::prelude::*;

use crate::error::{Error, Result};

/// Runs per-particle work either inline or on a fixed rayon pool. Results
/// come back in input order and the first failing index wins, so output is
/// the same for any thread count.
pub struct Workers {
    pool: Option<rayon::ThreadPool>,
}

impl Workers {
    pub fn sequential() -> Self {
        Workers { pool: None }
    }

    /// `threads <= 1` runs inline.
    pub fn new(threads: usize) -> Result<Self> {
        if threads <= 1 {
            return Ok(Self::sequential());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
        Ok(Workers { pool: Some(pool) })
    }

    pub fn threads(&self) -> usize {
        self.pool.as_ref().map_or(1, |p| p.current_num_threads())
    }

    pub fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Result<Vec<R>>
    where
        T: Send,
        R: Send,
        F: Fn(usize, T) -> Result<R> + Sync + Send,
    {
        let results: Vec<Result<R>> = match &self.pool {
            None => items.into_iter().enumerate().map(|(i, t)| f(i, t)).collect(),
            Some(pool) => pool.install(|| items.into_par_iter().enumerate().map(|(i, t)| f(i, t)).collect()),
        };
        results.into_iter().collect()
    }
}

impl Default for Workers {
    fn default() -> Self {
        Self::sequential()
    }
}
