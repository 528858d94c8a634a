//! C ABI over `lff-core`.
//!
//! Conventions:
//! - every fallible function returns an [`LffStatus`]; on failure
//!   [`lff_last_error_message`] describes the error on the calling thread
//! - handles ([`LffFilterBank`], [`LffSpectrum`]) are opaque, created by `*_new` /
//!   `*_compute` functions and released with the matching `*_free`
//! - output arrays are caller-allocated; their lengths are passed explicitly and checked
//! - panics never cross the boundary; they surface as [`LffStatus::Internal`]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use lff_core::eval::{compute_eer, ScoreSet};
use lff_core::filterbank::{self, mel_init, project_params};
use lff_core::{AudioBuffer, Error, FilterBankParams, FilterShape, SpectrumKind, SpectrumMatrix, StftConfig, WindowKind};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LffStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed or unsupported input data.
    Format = 2,
    EmptyInput = 3,
    /// Argument outside its mathematical domain (e.g. beta below the floor).
    Domain = 4,
    TooShort = 5,
    /// Array length does not match the expected shape.
    Shape = 6,
    Config = 7,
    /// Internal invariant violation or caught panic.
    Internal = 8,
}

/// Filter shape selector: 0 triangle, 1 bell.
pub const LFF_SHAPE_TRIANGLE: u32 = 0;
pub const LFF_SHAPE_BELL: u32 = 1;

/// STFT settings. `window_kind`: 0 Hann, 1 Hamming, 2 rectangular.
/// `spectrum_kind`: 0 magnitude, 1 power.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LffStftConfig {
    pub window_len: u32,
    pub hop: u32,
    pub n_fft: u32,
    pub window_kind: u32,
    pub spectrum_kind: u32,
}

/// Filter centers and bandwidths of one filterbank.
pub struct LffFilterBank {
    params: FilterBankParams,
}

/// A `frames x bins` STFT spectrum.
pub struct LffSpectrum {
    spectrum: SpectrumMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> LffStatus {
    match err {
        Error::Format(_) | Error::UnsupportedFormat(_) | Error::Json(_) | Error::Io(_) => LffStatus::Format,
        Error::EmptyInput(_) => LffStatus::EmptyInput,
        Error::Domain(_) => LffStatus::Domain,
        Error::TooShort(_) => LffStatus::TooShort,
        Error::Shape(_) => LffStatus::Shape,
        Error::Config(_) => LffStatus::Config,
        Error::Invariant(_) => LffStatus::Internal,
    }
}

struct Failure(LffStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(LffStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LffStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LffStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside lff".into());
            LffStatus::Internal
        }
    }
}

unsafe fn input<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a, T>(ptr: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(ptr, len))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null(what))
}

fn shape_from(code: u32) -> Result<FilterShape, Failure> {
    FilterShape::from_code(code).ok_or_else(|| Failure(LffStatus::Config, format!("unknown filter shape {code}")))
}

fn expect_len(got: usize, want: usize, what: &str) -> Result<(), Failure> {
    if got == want {
        Ok(())
    } else {
        Err(Failure(LffStatus::Shape, format!("{what} has length {got}, expected {want}")))
    }
}

/// Message of the last failed call on this thread, or null if none failed yet.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lff_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Default analysis: 400-sample Hann window, hop 160, 1024-point FFT, power spectrum.
#[no_mangle]
pub extern "C" fn lff_stft_config_default() -> LffStftConfig {
    let c = StftConfig::default();
    LffStftConfig {
        window_len: c.window_len_samples as u32,
        hop: c.hop_samples as u32,
        n_fft: c.n_fft as u32,
        window_kind: c.window_kind.code(),
        spectrum_kind: c.spectrum_kind.code(),
    }
}

fn stft_config(c: &LffStftConfig) -> Result<StftConfig, Failure> {
    let config = StftConfig {
        window_len_samples: c.window_len as usize,
        hop_samples: c.hop as usize,
        n_fft: c.n_fft as usize,
        window_kind: WindowKind::from_code(c.window_kind)
            .ok_or_else(|| Failure(LffStatus::Config, format!("unknown window kind {}", c.window_kind)))?,
        spectrum_kind: SpectrumKind::from_code(c.spectrum_kind)
            .ok_or_else(|| Failure(LffStatus::Config, format!("unknown spectrum kind {}", c.spectrum_kind)))?,
    };
    config.validate()?;
    Ok(config)
}

/// Mel-initialized filterbank of `n_filters` filters over `n_bins` bins.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn lff_filterbank_mel(
    n_filters: usize,
    n_bins: usize,
    sample_rate: u32,
    shape: u32,
    out: *mut *mut LffFilterBank,
) -> LffStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params = mel_init(n_filters, n_bins, sample_rate, shape_from(shape)?)?;
        *out = Box::into_raw(Box::new(LffFilterBank { params }));
        Ok(())
    })
}

/// Filterbank from explicit centers and bandwidths (both in bins, `n_filters` each).
///
/// # Safety
/// `alphas` and `betas` must point to `n_filters` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lff_filterbank_new(
    shape: u32,
    n_bins: usize,
    alphas: *const f64,
    betas: *const f64,
    n_filters: usize,
    out: *mut *mut LffFilterBank,
) -> LffStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let a = input(alphas, n_filters, "alphas")?.to_vec();
        let b = input(betas, n_filters, "betas")?.to_vec();
        let params = FilterBankParams::new(shape_from(shape)?, n_bins, a, b)?;
        *out = Box::into_raw(Box::new(LffFilterBank { params }));
        Ok(())
    })
}

/// # Safety
/// `fb` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn lff_filterbank_free(fb: *mut LffFilterBank) {
    if !fb.is_null() {
        drop(Box::from_raw(fb));
    }
}

/// Number of filters, or 0 for a null handle.
///
/// # Safety
/// `fb` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lff_filterbank_n_filters(fb: *const LffFilterBank) -> usize {
    fb.as_ref().map_or(0, |f| f.params.n_filters())
}

/// Copies centers and bandwidths into caller arrays of length `n_filters`.
///
/// # Safety
/// `fb` must be a live handle; `alphas`/`betas` must point to `n_filters` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lff_filterbank_get(
    fb: *const LffFilterBank,
    alphas: *mut f64,
    betas: *mut f64,
    n_filters: usize,
) -> LffStatus {
    guard(|| {
        let p = &handle(fb, "filterbank")?.params;
        expect_len(n_filters, p.n_filters(), "filter arrays")?;
        output(alphas, n_filters, "alphas")?.copy_from_slice(&p.alphas);
        output(betas, n_filters, "betas")?.copy_from_slice(&p.betas);
        Ok(())
    })
}

/// Replaces centers and bandwidths, then clamps them into their valid range.
///
/// # Safety
/// `fb` must be a live handle; `alphas`/`betas` must point to `n_filters` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn lff_filterbank_set_projected(
    fb: *mut LffFilterBank,
    alphas: *const f64,
    betas: *const f64,
    n_filters: usize,
) -> LffStatus {
    guard(|| {
        let fb = fb.as_mut().ok_or_else(|| null("filterbank"))?;
        expect_len(n_filters, fb.params.n_filters(), "filter arrays")?;
        let a = input(alphas, n_filters, "alphas")?;
        let b = input(betas, n_filters, "betas")?;
        if a.iter().chain(b).any(|v| !v.is_finite()) {
            return Err(Failure(LffStatus::Domain, "non-finite filter parameter".into()));
        }
        let mut next = fb.params.clone();
        next.alphas.copy_from_slice(a);
        next.betas.copy_from_slice(b);
        fb.params = project_params(&next);
        Ok(())
    })
}

/// STFT of `n_samples` mono samples in `[-1, 1]`.
///
/// # Safety
/// `samples` must point to `n_samples` readable doubles; `config` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lff_spectrum_compute(
    samples: *const f64,
    n_samples: usize,
    sample_rate: u32,
    config: *const LffStftConfig,
    out: *mut *mut LffSpectrum,
) -> LffStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = stft_config(handle(config, "config")?)?;
        let audio = AudioBuffer::new(input(samples, n_samples, "samples")?.to_vec(), sample_rate)?;
        let spectrum = lff_core::stft::compute_spectrum(&audio, &config)?;
        *out = Box::into_raw(Box::new(LffSpectrum { spectrum }));
        Ok(())
    })
}

/// Wraps caller-provided `n_frames x n_bins` non-negative values as a spectrum.
///
/// # Safety
/// `values` must point to `n_frames * n_bins` readable doubles; `config` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lff_spectrum_from_values(
    values: *const f64,
    n_frames: usize,
    n_bins: usize,
    config: *const LffStftConfig,
    out: *mut *mut LffSpectrum,
) -> LffStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = stft_config(handle(config, "config")?)?;
        let len = n_frames
            .checked_mul(n_bins)
            .ok_or_else(|| Failure(LffStatus::Shape, "spectrum size overflows".into()))?;
        let v = input(values, len, "values")?.to_vec();
        let spectrum = SpectrumMatrix::from_values(v, n_frames, n_bins, config)?;
        *out = Box::into_raw(Box::new(LffSpectrum { spectrum }));
        Ok(())
    })
}

/// # Safety
/// `spec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lff_spectrum_free(spec: *mut LffSpectrum) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// # Safety
/// `spec` must be a live handle; `n_frames` and `n_bins` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lff_spectrum_shape(spec: *const LffSpectrum, n_frames: *mut usize, n_bins: *mut usize) -> LffStatus {
    guard(|| {
        let s = &handle(spec, "spectrum")?.spectrum;
        *n_frames.as_mut().ok_or_else(|| null("n_frames"))? = s.n_frames();
        *n_bins.as_mut().ok_or_else(|| null("n_bins"))? = s.n_bins();
        Ok(())
    })
}

/// Copies the row-major spectrum into `values` (length `n_frames * n_bins`).
///
/// # Safety
/// `spec` must be a live handle; `values` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lff_spectrum_values(spec: *const LffSpectrum, values: *mut f64, len: usize) -> LffStatus {
    guard(|| {
        let s = &handle(spec, "spectrum")?.spectrum;
        expect_len(len, s.values().len(), "values")?;
        output(values, len, "values")?.copy_from_slice(s.values());
        Ok(())
    })
}

/// Log filterbank features `10 log10(S W + epsilon)`, written row-major into
/// `features` (length `n_frames * n_filters`).
///
/// # Safety
/// Handles must be live; `features` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lff_forward(
    fb: *const LffFilterBank,
    spec: *const LffSpectrum,
    epsilon: f64,
    features: *mut f64,
    len: usize,
) -> LffStatus {
    guard(|| {
        let p = &handle(fb, "filterbank")?.params;
        let s = &handle(spec, "spectrum")?.spectrum;
        expect_len(len, s.n_frames() * p.n_filters(), "features")?;
        let out = filterbank::forward(s, p, epsilon)?;
        output(features, len, "features")?.copy_from_slice(out.values());
        Ok(())
    })
}

/// Gradients of `sum(upstream * features)` with respect to each center and bandwidth.
///
/// # Safety
/// Handles must be live; `upstream` must hold `upstream_len` doubles and the gradient
/// arrays `n_filters` writable doubles each.
#[no_mangle]
pub unsafe extern "C" fn lff_backward(
    fb: *const LffFilterBank,
    spec: *const LffSpectrum,
    upstream: *const f64,
    upstream_len: usize,
    epsilon: f64,
    d_alpha: *mut f64,
    d_beta: *mut f64,
    n_filters: usize,
) -> LffStatus {
    guard(|| {
        let p = &handle(fb, "filterbank")?.params;
        let s = &handle(spec, "spectrum")?.spectrum;
        expect_len(n_filters, p.n_filters(), "gradient arrays")?;
        let up = input(upstream, upstream_len, "upstream")?;
        let g = filterbank::backward(s, p, up, epsilon)?;
        output(d_alpha, n_filters, "d_alpha")?.copy_from_slice(&g.d_alpha);
        output(d_beta, n_filters, "d_beta")?.copy_from_slice(&g.d_beta);
        Ok(())
    })
}

/// Equal error rate of `n` scores; `is_target[i]` is nonzero for target trials.
///
/// # Safety
/// `scores` and `is_target` must point to `n` readable elements; `eer` and `threshold` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lff_compute_eer(
    scores: *const f64,
    is_target: *const u8,
    n: usize,
    eer: *mut f64,
    threshold: *mut f64,
) -> LffStatus {
    guard(|| {
        let s = input(scores, n, "scores")?;
        let t = input(is_target, n, "is_target")?;
        let set = ScoreSet::new(s.iter().zip(t).map(|(&v, &l)| (v, l != 0)).collect());
        let r = compute_eer(&set)?;
        *eer.as_mut().ok_or_else(|| null("eer"))? = r.eer;
        *threshold.as_mut().ok_or_else(|| null("threshold"))? = r.threshold;
        Ok(())
    })
}
