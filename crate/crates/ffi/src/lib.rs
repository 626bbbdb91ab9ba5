//! C ABI for inferkit.
//!
//! Models and histograms cross the boundary as opaque handles created by
//! `inferkit_*_new` / `inferkit_run_*` and released with the matching
//! `_free`. Every fallible call returns an [`InferkitStatus`]; on failure
//! [`inferkit_last_error`] describes the problem for the calling thread.
//! Results are written through out-pointers only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use inferkit::dataio::{self, Format, Metadata};
use inferkit::inference::{importance_sampling, rmsmc_with, smc_with, tmcmc, Histogram, SmcConfig, Workers};
use inferkit::models::{
    climate_month_model, coin_model, gaussian_mean_model, linear_gaussian_model, logistic_regression_model,
    markov_chain_model, synthetic_logistic_data, ClimateHyperParams, LinearGaussian, GAUSSIAN_MEAN_DATA,
};
use inferkit::oracles::kalman_filter_exact;
use inferkit::{Error, LogWeight, Model, RngState};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InferkitStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Bad argument or configuration.
    InvalidArgument = 2,
    /// All weights collapsed to zero.
    Degeneracy = 3,
    /// Reading or writing a file failed.
    Io = 4,
    /// The model or the inference run failed otherwise.
    Failure = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InferkitModelKind {
    Chain = 0,
    Logreg = 1,
    Coin = 2,
    Gauss = 3,
    Lgss = 4,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InferkitFormat {
    Csv = 0,
    Json = 1,
}

/// A model whose result is a fixed-length vector of doubles.
pub struct InferkitModel {
    model: Model<Vec<f64>>,
    dim: usize,
}

/// A normalised weighted sample of result vectors.
pub struct InferkitHistogram {
    histogram: Histogram<Vec<f64>>,
    dim: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> InferkitStatus {
    match e.root() {
        Error::Config(_) | Error::GridTooLarge(_) | Error::InvalidScale(_) | Error::InvalidProbability(_) => {
            InferkitStatus::InvalidArgument
        }
        Error::DegenerateHistogram | Error::ParticleDegeneracy { .. } => InferkitStatus::Degeneracy,
        Error::Io { .. } | Error::Parse { .. } | Error::NonMonotoneDates { .. } | Error::CoverageGap(_) => {
            InferkitStatus::Io
        }
        _ => InferkitStatus::Failure,
    }
}

enum Fail {
    Null(&'static str),
    Invalid(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> InferkitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            InferkitStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_last_error(format!("{what} is null"));
            InferkitStatus::NullPointer
        }
        Ok(Err(Fail::Invalid(message))) => {
            set_last_error(message);
            InferkitStatus::InvalidArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("panic: {msg}"));
            InferkitStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn path_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| Fail::Invalid(format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn scalar(model: Model<f64>) -> InferkitModel {
    InferkitModel {
        model: model.map(|x| vec![x]),
        dim: 1,
    }
}

/// Crate version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn inferkit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null after a
/// success. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn inferkit_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a bundled model. Result dimension: 2 for logreg (slope,
/// intercept), 1 otherwise.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn inferkit_model_new(kind: InferkitModelKind, out: *mut *mut InferkitModel) -> InferkitStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let m = match kind {
            InferkitModelKind::Chain => scalar(markov_chain_model()),
            InferkitModelKind::Coin => scalar(coin_model().map(|b| if b { 1.0 } else { 0.0 })),
            InferkitModelKind::Gauss => scalar(gaussian_mean_model(&GAUSSIAN_MEAN_DATA)),
            InferkitModelKind::Lgss => scalar(linear_gaussian_model(LinearGaussian::example())?),
            InferkitModelKind::Logreg => InferkitModel {
                model: logistic_regression_model(synthetic_logistic_data(50, 50))?.map(|(s, i)| vec![s, i]),
                dim: 2,
            },
        };
        *out = Box::into_raw(Box::new(m));
        Ok(())
    })
}

/// Builds the climate model for one month (1 to 12) of a temperature CSV.
/// Result dimension 13, one latent per block.
///
/// # Safety
/// `data_path` must be null or a NUL-terminated string; `out` must be null
/// or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn inferkit_model_climate(
    data_path: *const c_char,
    month: u32,
    out: *mut *mut InferkitModel,
) -> InferkitStatus {
    guard(|| {
        let path = path_arg(data_path, "data_path")?;
        let out = out_ptr(out, "out")?;
        let obs = dataio::month_observations(path, month)?;
        let hp = ClimateHyperParams::from_observations(&obs)?;
        let model = climate_month_model(obs, hp)?;
        *out = Box::into_raw(Box::new(InferkitModel {
            model,
            dim: inferkit::models::BLOCKS,
        }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn inferkit_model_free(model: *mut InferkitModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn inferkit_model_dim(model: *const InferkitModel) -> usize {
    model.as_ref().map_or(0, |m| m.dim)
}

unsafe fn finish_run(
    model: &InferkitModel,
    out: &mut *mut InferkitHistogram,
    h: Histogram<Vec<f64>>,
) -> Result<(), Fail> {
    let histogram = h.normalise()?;
    *out = Box::into_raw(Box::new(InferkitHistogram {
        histogram,
        dim: model.dim,
    }));
    Ok(())
}

/// Importance sampling with `particles` runs.
///
/// # Safety
/// `model` must be null or a live handle; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn inferkit_run_is(
    model: *const InferkitModel,
    particles: usize,
    seed: u64,
    out: *mut *mut InferkitHistogram,
) -> InferkitStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let out = out_ptr(out, "out")?;
        let h = importance_sampling(&m.model, particles, &mut RngState::new(seed))?;
        finish_run(m, out, h)
    })
}

/// Sequential Monte Carlo; `threads` workers advance the particles without
/// changing the result.
///
/// # Safety
/// `model` must be null or a live handle; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn inferkit_run_smc(
    model: *const InferkitModel,
    particles: usize,
    steps: usize,
    step_size: usize,
    seed: u64,
    threads: usize,
    out: *mut *mut InferkitHistogram,
) -> InferkitStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let out = out_ptr(out, "out")?;
        let workers = Workers::new(threads)?;
        let r = smc_with(
            &m.model,
            &SmcConfig::new(particles, steps, step_size),
            &mut RngState::new(seed),
            &workers,
        )?;
        finish_run(m, out, r.histogram)
    })
}

/// Resample-move SMC with `t_steps` MH moves per round.
///
/// # Safety
/// `model` must be null or a live handle; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn inferkit_run_rmsmc(
    model: *const InferkitModel,
    particles: usize,
    steps: usize,
    step_size: usize,
    t_steps: usize,
    seed: u64,
    threads: usize,
    out: *mut *mut InferkitHistogram,
) -> InferkitStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let out = out_ptr(out, "out")?;
        let workers = Workers::new(threads)?;
        let config = SmcConfig::new(particles, steps, step_size);
        let r = rmsmc_with(&m.model, &config, t_steps, &mut RngState::new(seed), &workers)?;
        finish_run(m, out, r.histogram)
    })
}

/// Trace MH; keeps the `steps - burnin` states after burn-in with equal
/// weight.
///
/// # Safety
/// `model` must be null or a live handle; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn inferkit_run_tmcmc(
    model: *const InferkitModel,
    steps: usize,
    burnin: usize,
    seed: u64,
    out: *mut *mut InferkitHistogram,
) -> InferkitStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let out = out_ptr(out, "out")?;
        let r = tmcmc(&m.model, steps, LogWeight::ONE, burnin, &mut RngState::new(seed))?;
        finish_run(m, out, r.histogram())
    })
}

/// # Safety
/// `h` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn inferkit_histogram_free(h: *mut InferkitHistogram) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of entries; 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn inferkit_histogram_len(h: *const InferkitHistogram) -> usize {
    h.as_ref().map_or(0, |h| h.histogram.len())
}

/// Length of each entry's value vector; 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn inferkit_histogram_dim(h: *const InferkitHistogram) -> usize {
    h.as_ref().map_or(0, |h| h.dim)
}

/// Copies entry `index`: its normalised probability to `weight` and its
/// value vector to `values`, which must hold `dim` doubles.
///
/// # Safety
/// `h` must be null or a live handle; `weight` and `values` null or valid
/// for writes (`values` for `capacity` doubles).
#[no_mangle]
pub unsafe extern "C" fn inferkit_histogram_entry(
    h: *const InferkitHistogram,
    index: usize,
    weight: *mut f64,
    values: *mut f64,
    capacity: usize,
) -> InferkitStatus {
    guard(|| {
        let h = borrow(h, "histogram")?;
        let weight = out_ptr(weight, "weight")?;
        if values.is_null() {
            return Err(Fail::Null("values"));
        }
        let (w, v) = h
            .histogram
            .entries()
            .get(index)
            .ok_or_else(|| Fail::Invalid(format!("index {index} out of range")))?;
        if capacity < v.len() {
            return Err(Fail::Invalid(format!(
                "capacity {capacity} below dimension {}",
                v.len()
            )));
        }
        std::slice::from_raw_parts_mut(values, v.len()).copy_from_slice(v);
        *weight = w.to_prob();
        Ok(())
    })
}

/// Weighted mean and standard deviation of component `component`.
///
/// # Safety
/// `h` must be null or a live handle; `mean` and `std` null or valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn inferkit_histogram_moments(
    h: *const InferkitHistogram,
    component: usize,
    mean: *mut f64,
    std: *mut f64,
) -> InferkitStatus {
    guard(|| {
        let h = borrow(h, "histogram")?;
        let (mean, std) = (out_ptr(mean, "mean")?, out_ptr(std, "std")?);
        if component >= h.dim {
            return Err(Fail::Invalid(format!("component {component} out of range")));
        }
        let (m, s) = h.histogram.mean_and_std(|v| v[component])?;
        *mean = m;
        *std = s;
        Ok(())
    })
}

/// Writes component `component` in the CLI's histogram file format.
///
/// # Safety
/// `h` must be null or a live handle; `path` null or a NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn inferkit_histogram_write(
    h: *const InferkitHistogram,
    component: usize,
    path: *const c_char,
    format: InferkitFormat,
) -> InferkitStatus {
    guard(|| {
        let h = borrow(h, "histogram")?;
        let path = path_arg(path, "path")?;
        if component >= h.dim {
            return Err(Fail::Invalid(format!("component {component} out of range")));
        }
        let format = match format {
            InferkitFormat::Csv => Format::Csv,
            InferkitFormat::Json => Format::Json,
        };
        let mut meta = Metadata::new();
        meta.insert("component".into(), component.to_string());
        dataio::write_histogram(&h.histogram.map(|v| v[component]), path, format, &meta)?;
        Ok(())
    })
}

/// Exact filtered means and variances of the scalar linear-Gaussian model
/// with `len` observations; `a[0]` is unused. `means` and `variances` must
/// hold `len` doubles.
///
/// # Safety
/// Each input array must be null or valid for `len` reads; each output
/// array null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn inferkit_kalman_exact(
    a: *const f64,
    c: *const f64,
    q: f64,
    r: *const f64,
    y: *const f64,
    len: usize,
    prior_mean: f64,
    prior_var: f64,
    means: *mut f64,
    variances: *mut f64,
) -> InferkitStatus {
    guard(|| {
        let (a, c) = (slice_arg(a, len, "a")?, slice_arg(c, len, "c")?);
        let (r, y) = (slice_arg(r, len, "r")?, slice_arg(y, len, "y")?);
        if len > 0 && (means.is_null() || variances.is_null()) {
            return Err(Fail::Null("means or variances"));
        }
        let post = kalman_filter_exact(a, c, q, r, y, prior_mean, prior_var)?;
        if len > 0 {
            std::slice::from_raw_parts_mut(means, len).copy_from_slice(&post.means);
            std::slice::from_raw_parts_mut(variances, len).copy_from_slice(&post.variances);
        }
        Ok(())
    })
}
