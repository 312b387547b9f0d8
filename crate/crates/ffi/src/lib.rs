//! C interface to `belpm-core`.
//!
//! Every function returns a [`BelpmStatus`]; on failure a message is kept per
//! thread and can be copied out with [`belpm_last_error`]. Models live behind
//! an opaque [`BelpmModel`] handle that the caller releases with
//! [`belpm_model_free`]. Matrices are row-major `n × dim` arrays of doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use belpm_core::config::ModelConfig;
use belpm_core::error::Error;
use belpm_core::learning::{train_phase1, train_phase2};
use belpm_core::series::{generate_henon, generate_lorenz, EmbeddedDataset, HenonParams, LorenzParams};
use belpm_core::{Kernel, WknnRegressor};

#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BelpmStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    /// Divergence, degenerate weights, undefined metric or another numeric failure.
    Numeric = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// Trained model handle.
pub struct BelpmModel {
    inner: belpm_core::BelpmModel,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> BelpmStatus {
    match e {
        _ if e.is_numeric() => BelpmStatus::Numeric,
        Error::Config(_) | Error::Toml(_) | Error::UnsupportedKernel(_) => BelpmStatus::Config,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => BelpmStatus::Io,
        _ => BelpmStatus::InvalidArgument,
    }
}

struct Failure(BelpmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(BelpmStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BelpmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            BelpmStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            BelpmStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or valid for `len` reads.
unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or valid for `len` writes.
unsafe fn output<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

/// # Safety
/// `p` must be null or a NUL-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| Failure(BelpmStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn rows(flat: &[f64], n: usize, dim: usize) -> Result<Vec<Vec<f64>>, Failure> {
    if dim == 0 || flat.len() != n * dim {
        return Err(Failure(BelpmStatus::InvalidArgument, format!("bad matrix shape {n} x {dim}")));
    }
    Ok(flat.chunks(dim).map(<[f64]>::to_vec).collect())
}

fn checked_len(n: usize, dim: usize) -> Result<usize, Failure> {
    n.checked_mul(dim)
        .ok_or_else(|| Failure(BelpmStatus::InvalidArgument, format!("{n} x {dim} overflows")))
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes, excluding the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn belpm_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Writes `n` x-values of the Lorenz system sampled every `dt` seconds.
///
/// # Safety
/// `out` must be valid for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn belpm_generate_lorenz(dt: f64, n: usize, out: *mut f64) -> BelpmStatus {
    guard(|| {
        let out = output(out, n, "out")?;
        out.copy_from_slice(&generate_lorenz(&LorenzParams::default(), dt, n)?.values);
        Ok(())
    })
}

/// Writes `n` x-values of the Hénon map.
///
/// # Safety
/// `out` must be valid for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn belpm_generate_henon(n: usize, out: *mut f64) -> BelpmStatus {
    guard(|| {
        let out = output(out, n, "out")?;
        out.copy_from_slice(&generate_henon(&HenonParams::default(), n)?.values);
        Ok(())
    })
}

/// # Safety
/// `predicted` and `target` must be valid for `n` reads; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn belpm_nmse(predicted: *const f64, target: *const f64, n: usize, out: *mut f64) -> BelpmStatus {
    guard(|| {
        let v = belpm_core::nmse(input(predicted, n, "predicted")?, input(target, n, "target")?)?;
        output(out, 1, "out")?[0] = v;
        Ok(())
    })
}

/// # Safety
/// `predicted` and `target` must be valid for `n` reads; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn belpm_mse(predicted: *const f64, target: *const f64, n: usize, out: *mut f64) -> BelpmStatus {
    guard(|| {
        let v = belpm_core::mse(input(predicted, n, "predicted")?, input(target, n, "target")?)?;
        output(out, 1, "out")?[0] = v;
        Ok(())
    })
}

/// Trains a model on `n` input rows of width `dim` and their targets.
/// `config_toml` is a model configuration document, or null for defaults.
/// On success `*out` receives a handle owned by the caller.
///
/// # Safety
/// `inputs` must be valid for `n * dim` reads, `targets` for `n`, `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn belpm_model_train(
    inputs: *const f64,
    targets: *const f64,
    n: usize,
    dim: usize,
    config_toml: *const c_char,
    out: *mut *mut BelpmModel,
) -> BelpmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let x = rows(input(inputs, checked_len(n, dim)?, "inputs")?, n, dim)?;
        let y = input(targets, n, "targets")?.to_vec();
        let cfg = match text(config_toml, "config_toml")? {
            Some(t) => ModelConfig::from_toml(t)?,
            None => ModelConfig::default(),
        };
        let ds = EmbeddedDataset::new(x, y, dim, 1, 1)?;
        let mut model = belpm_core::BelpmModel::new(&ds, cfg.k_a, cfg.k_o, cfg.kernel()?)?;
        train_phase1(&mut model, None, &cfg.train_config())?;
        *out = Box::into_raw(Box::new(BelpmModel { inner: model }));
        Ok(())
    })
}

unsafe fn model_ref<'a>(model: *const BelpmModel) -> Result<&'a BelpmModel, Failure> {
    model.as_ref().ok_or_else(|| null("model"))
}

/// Predicts `n` rows of width `dim` into `out`.
///
/// # Safety
/// `model` must be a live handle; `inputs` valid for `n * dim` reads; `out` for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn belpm_model_predict(
    model: *const BelpmModel,
    inputs: *const f64,
    n: usize,
    dim: usize,
    out: *mut f64,
) -> BelpmStatus {
    guard(|| {
        let m = model_ref(model)?;
        let x = rows(input(inputs, checked_len(n, dim)?, "inputs")?, n, dim)?;
        let p = m.inner.predict_all(&x)?;
        output(out, n, "out")?.copy_from_slice(&p);
        Ok(())
    })
}

/// Online adaptation over `n` rows, `passes` times. The prediction made for each
/// row of the first pass, before the update it triggers, is written to `out`.
///
/// # Safety
/// `model` must be a live handle; `inputs` valid for `n * dim` reads; `out` for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn belpm_model_adapt(
    model: *mut BelpmModel,
    inputs: *const f64,
    n: usize,
    dim: usize,
    passes: usize,
    out: *mut f64,
) -> BelpmStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        let x = rows(input(inputs, checked_len(n, dim)?, "inputs")?, n, dim)?;
        let stream = EmbeddedDataset::new(x, vec![0.0; n], dim, 1, 1)?;
        let cfg = belpm_core::TrainConfig { phase2_epochs: passes, ..Default::default() };
        let trace = train_phase2(&mut m.inner, &stream, &cfg)?;
        if passes > 0 {
            output(out, n, "out")?.copy_from_slice(&trace.predictions);
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn belpm_model_dim(model: *const BelpmModel, out: *mut usize) -> BelpmStatus {
    guard(|| {
        let d = model_ref(model)?.inner.dim();
        *out.as_mut().ok_or_else(|| null("out"))? = d;
        Ok(())
    })
}

/// Number of learnable parameters, `k_a + k_o + 8`.
///
/// # Safety
/// `model` must be a live handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn belpm_model_parameter_count(model: *const BelpmModel, out: *mut usize) -> BelpmStatus {
    guard(|| {
        let c = model_ref(model)?.inner.parameter_count();
        *out.as_mut().ok_or_else(|| null("out"))? = c;
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn belpm_model_save(model: *const BelpmModel, path: *const c_char) -> BelpmStatus {
    guard(|| {
        let m = model_ref(model)?;
        let path = text(path, "path")?.ok_or_else(|| null("path"))?;
        m.inner.save(path)?;
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn belpm_model_load(path: *const c_char, out: *mut *mut BelpmModel) -> BelpmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = text(path, "path")?.ok_or_else(|| null("path"))?;
        let inner = belpm_core::BelpmModel::load(path)?;
        *out = Box::into_raw(Box::new(BelpmModel { inner }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn belpm_model_free(model: *mut BelpmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Weighted k-NN prediction of `m` queries from `n` training rows, with
/// per-rank kernel scales set from the training distances.
/// `kernel` is one of gaussian, inversion, rank, exponential, rational.
///
/// # Safety
/// `train_inputs` must be valid for `n * dim` reads, `train_targets` for `n`,
/// `queries` for `m * dim`, `out` for `m` writes; `kernel` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn belpm_wknn_predict(
    train_inputs: *const f64,
    train_targets: *const f64,
    n: usize,
    dim: usize,
    k: usize,
    kernel: *const c_char,
    queries: *const f64,
    m: usize,
    out: *mut f64,
) -> BelpmStatus {
    guard(|| {
        let x = rows(input(train_inputs, checked_len(n, dim)?, "train_inputs")?, n, dim)?;
        let y = input(train_targets, n, "train_targets")?.to_vec();
        let kernel: Kernel = text(kernel, "kernel")?.ok_or_else(|| null("kernel"))?.parse()?;
        let reg = WknnRegressor::with_heuristic_b(EmbeddedDataset::new(x, y, dim, 1, 1)?, k, kernel)?;
        let q = if m == 0 { Vec::new() } else { rows(input(queries, checked_len(m, dim)?, "queries")?, m, dim)? };
        output(out, m, "out")?.copy_from_slice(&reg.predict_all(&q)?);
        Ok(())
    })
}
