//! C interface to the antisense library.
//!
//! Every function returns an [`AsStatus`]. On failure a description is kept
//! per thread and can be read with [`as_last_error`]. Handles are opaque and
//! must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use antisense::defense::{run_defense, ConstraintSet, DefenseConfig};
use antisense::estimators::{
    read_mlp_params, DifferentiableEstimator, FftEstimator, HrEstimator, MlpEstimator, SoftSpecEstimator,
    SoftSpecParams,
};
use antisense::radargram::{
    read_radargram, synthesize_radargram, write_radargram, NoiseSpec, RadarConfig, Radargram, TargetSpec,
};
use antisense::schedule::{amplitude_to_displacement, displacement_to_angle, emit_schedule, ServoSpec};
use antisense::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsStatus {
    Ok = 0,
    InvalidArgument = 1,
    DataError = 2,
    NumericalError = 3,
    IoError = 4,
    Panic = 5,
}

/// Opaque radargram handle.
pub struct AsRadargram {
    inner: Radargram,
}

/// Opaque MLP estimator handle.
pub struct AsMlp {
    inner: MlpEstimator,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AsDefenseSummary {
    pub f_opt_rpm: f64,
    pub a_opt_bins: f64,
    pub final_estimate_bpm: f64,
    pub final_loss: f64,
    pub iterations: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(AsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidParameter(_) => AsStatus::InvalidArgument,
            Error::Io(_) => AsStatus::IoError,
            Error::Diverged { .. } | Error::NonFiniteLoss { .. } => AsStatus::NumericalError,
            _ => AsStatus::DataError,
        };
        Failure(status, e.to_string())
    }
}

fn bad_arg(msg: &str) -> Failure {
    Failure(AsStatus::InvalidArgument, msg.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            AsStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(bad_arg("path is null"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| bad_arg("path is not UTF-8"))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| bad_arg(&format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| bad_arg(&format!("{what} is null")))
}

fn boxed_radargram(x: Radargram) -> *mut AsRadargram {
    Box::into_raw(Box::new(AsRadargram { inner: x }))
}

/// Message of the last failed call on this thread. Valid until the next
/// failing call on the same thread; never NULL.
#[no_mangle]
pub extern "C" fn as_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Synthesizes a single sinusoidally moving target with default radar
/// parameters. Pass NaN for `snr_db` to disable noise.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn as_radargram_synthesize_single(
    offset_bin: f64,
    amplitude_bins: f64,
    freq_rpm: f64,
    snr_db: f64,
    scans: u32,
    bins: u32,
    seed: u64,
    out: *mut *mut AsRadargram,
) -> AsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let config = RadarConfig { scans: scans as usize, bins: bins as usize, ..RadarConfig::default() };
        let noise = if snr_db.is_nan() { NoiseSpec::noiseless() } else { NoiseSpec::snr_db(snr_db) };
        let target = TargetSpec::single(offset_bin, amplitude_bins, freq_rpm);
        let x = synthesize_radargram(&[target], noise, &config, seed)?;
        *out = boxed_radargram(x);
        Ok(())
    })
}

/// Reads an RGRM file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn as_radargram_read(path: *const c_char, out: *mut *mut AsRadargram) -> AsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = boxed_radargram(read_radargram(path_arg(path)?)?);
        Ok(())
    })
}

/// Writes an RGRM file.
///
/// # Safety
/// `x` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn as_radargram_write(x: *const AsRadargram, path: *const c_char) -> AsStatus {
    guard(|| {
        write_radargram(&handle(x, "radargram")?.inner, path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `x` must be a live handle; `scans` and `bins` must be writable.
#[no_mangle]
pub unsafe extern "C" fn as_radargram_dims(x: *const AsRadargram, scans: *mut usize, bins: *mut usize) -> AsStatus {
    guard(|| {
        let x = &handle(x, "radargram")?.inner;
        *out_ptr(scans, "scans")? = x.scans();
        *out_ptr(bins, "bins")? = x.bins();
        Ok(())
    })
}

/// Copies samples row by row as interleaved `(re, im)` pairs. `len` is the
/// capacity of `out` in doubles and must be at least `2 * scans * bins`.
///
/// # Safety
/// `x` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn as_radargram_samples(x: *const AsRadargram, out: *mut f64, len: usize) -> AsStatus {
    guard(|| {
        let x = &handle(x, "radargram")?.inner;
        let src = x.samples().as_slice();
        if out.is_null() {
            return Err(bad_arg("out is null"));
        }
        if len < 2 * src.len() {
            return Err(bad_arg(&format!("buffer holds {len} doubles, need {}", 2 * src.len())));
        }
        let dst = std::slice::from_raw_parts_mut(out, 2 * src.len());
        for (pair, z) in dst.chunks_exact_mut(2).zip(src) {
            pair[0] = z.re;
            pair[1] = z.im;
        }
        Ok(())
    })
}

/// # Safety
/// `x` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn as_radargram_free(x: *mut AsRadargram) {
    if !x.is_null() {
        drop(Box::from_raw(x));
    }
}

fn estimate_into(est: &dyn HrEstimator, x: *const AsRadargram, out: *mut f64) -> AsStatus {
    guard(|| {
        // SAFETY: callers pass pointers under the contract of the public wrappers
        let (x, out) = unsafe { (handle(x, "radargram")?, out_ptr(out, "out_bpm")?) };
        *out = est.estimate(&x.inner)?;
        Ok(())
    })
}

/// # Safety
/// `x` must be a live handle and `out_bpm` writable.
#[no_mangle]
pub unsafe extern "C" fn as_estimate_fft(x: *const AsRadargram, out_bpm: *mut f64) -> AsStatus {
    estimate_into(&FftEstimator::default(), x, out_bpm)
}

/// # Safety
/// `x` must be a live handle and `out_bpm` writable.
#[no_mangle]
pub unsafe extern "C" fn as_estimate_softspec(x: *const AsRadargram, temperature: f64, out_bpm: *mut f64) -> AsStatus {
    estimate_into(&SoftSpecEstimator::new(SoftSpecParams::with_temperature(temperature)), x, out_bpm)
}

/// Loads MLPW weights.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn as_mlp_read(path: *const c_char, out: *mut *mut AsMlp) -> AsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let params = read_mlp_params(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(AsMlp { inner: MlpEstimator::new(params) }));
        Ok(())
    })
}

/// # Safety
/// `m` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn as_mlp_free(m: *mut AsMlp) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` and `x` must be live handles and `out_bpm` writable.
#[no_mangle]
pub unsafe extern "C" fn as_estimate_mlp(m: *const AsMlp, x: *const AsRadargram, out_bpm: *mut f64) -> AsStatus {
    match handle(m, "mlp") {
        Ok(m) => estimate_into(&m.inner, x, out_bpm),
        Err(Failure(status, msg)) => {
            set_last_error(&msg);
            status
        }
    }
}

/// Optimizes a perturbation with default box constraints. The attack runs
/// against `mlp` when given, otherwise against the soft-argmax spectral
/// estimator. `out_perturbed` may be NULL.
///
/// # Safety
/// `x` must be a live handle, `mlp` NULL or a live handle, `summary`
/// writable, and `out_perturbed` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn as_run_defense(
    x: *const AsRadargram,
    mlp: *const AsMlp,
    target_bpm: f64,
    iterations: u32,
    alpha: f64,
    seed: u64,
    summary: *mut AsDefenseSummary,
    out_perturbed: *mut *mut AsRadargram,
) -> AsStatus {
    guard(|| {
        let x = &handle(x, "radargram")?.inner;
        let summary = out_ptr(summary, "summary")?;
        let softspec = SoftSpecEstimator::default();
        let est: &dyn DifferentiableEstimator = match mlp.as_ref() {
            Some(m) => &m.inner,
            None => &softspec,
        };
        let cfg = DefenseConfig { alpha, iterations: iterations as usize, ..DefenseConfig::new(target_bpm, seed) };
        let r = run_defense(x, est, &cfg, &ConstraintSet::default())?;
        *summary = AsDefenseSummary {
            f_opt_rpm: r.f_opt,
            a_opt_bins: r.a_opt,
            final_estimate_bpm: r.final_estimate,
            final_loss: r.loss_trace.last().copied().unwrap_or(f64::NAN),
            iterations,
        };
        if !out_perturbed.is_null() {
            *out_perturbed = boxed_radargram(r.perturbed);
        }
        Ok(())
    })
}

/// Servo schedule CSV for an SG90-class servo with a 9 mm bin scale.
/// Release the string with [`as_string_free`].
///
/// # Safety
/// `out_csv` must be writable.
#[no_mangle]
pub unsafe extern "C" fn as_schedule_csv(
    f_rpm: f64,
    a_bins: f64,
    arm_mm: f64,
    duration_s: f64,
    out_csv: *mut *mut c_char,
) -> AsStatus {
    guard(|| {
        let out = out_ptr(out_csv, "out_csv")?;
        let theta = displacement_to_angle(amplitude_to_displacement(a_bins, 0.009)?, arm_mm)?;
        let csv = emit_schedule(f_rpm, theta, duration_s, &ServoSpec::sg90(arm_mm))?.to_csv();
        *out = CString::new(csv).map_err(|_| bad_arg("schedule contains NUL"))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn as_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
