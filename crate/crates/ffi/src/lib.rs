//! C ABI over `cellfree-ris`.
//!
//! Every fallible function returns a [`CfrStatus`] and writes results through out
//! pointers. On failure a description is available from [`cfr_last_error`] on the
//! same thread. Handles are opaque and must be released with their `_free`
//! function; passing NULL to a `_free` function is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cellfree_ris::algorithms::{AlgorithmOptions, OptimizationResult};
use cellfree_ris::experiment::{self, AlgorithmSpec, ExperimentConfig};
use cellfree_ris::geometry::split_seed;
use cellfree_ris::{generate_realization, ChannelRealization, Error, ScenarioConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CfrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Solver = 4,
    ZfInfeasible = 5,
    Io = 6,
    /// A Rust panic was caught at the boundary.
    Internal = 7,
    /// The experiment ran but at least half of its trials failed.
    MostlyFailed = 8,
}

/// Scenario parameters.
pub struct CfrScenario(ScenarioConfig);

/// One channel draw.
pub struct CfrRealization(ChannelRealization);

/// Output of one optimization run.
pub struct CfrResult(OptimizationResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CfrStatus {
    match e.root() {
        Error::Domain(_) | Error::Index(_) => CfrStatus::InvalidArgument,
        Error::Config(_) => CfrStatus::Config,
        Error::Solver(_) => CfrStatus::Solver,
        Error::ZfInfeasible { .. } => CfrStatus::ZfInfeasible,
        Error::Io(_) | Error::Csv(_) => CfrStatus::Io,
        Error::Context { .. } => CfrStatus::Internal,
    }
}

struct Fail(CfrStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CfrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CfrStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            CfrStatus::Internal
        }
    }
}

unsafe fn href<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(CfrStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail(CfrStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(CfrStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(CfrStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Copies `src` into `buf` when it fits; `len` receives the required length.
unsafe fn copy_out(src: &[f64], buf: *mut f64, cap: usize, len: *mut usize) -> Result<(), Fail> {
    *out(len, "len")? = src.len();
    if buf.is_null() {
        return Ok(());
    }
    if cap < src.len() {
        return Err(Fail(
            CfrStatus::InvalidArgument,
            format!("buffer holds {cap} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Message of the last failure on this thread, or NULL. Valid until the next call
/// into this library on the same thread.
#[no_mangle]
pub extern "C" fn cfr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cfr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default scenario: 8 APs, one user, 4 RISs of 12 elements.
///
/// # Safety
/// `scenario` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn cfr_scenario_default(scenario: *mut *mut CfrScenario) -> CfrStatus {
    guard(|| {
        *out(scenario, "scenario")? = Box::into_raw(Box::new(CfrScenario(ScenarioConfig::default())));
        Ok(())
    })
}

/// Scenario from TOML text; missing keys take their defaults.
///
/// # Safety
/// `toml_text` must be NUL-terminated; `scenario` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cfr_scenario_from_toml(toml_text: *const c_char, scenario: *mut *mut CfrScenario) -> CfrStatus {
    guard(|| {
        let t = text(toml_text, "toml_text")?;
        let dst = out(scenario, "scenario")?;
        let cfg: ScenarioConfig = toml::from_str(t).map_err(|e| Fail(CfrStatus::Config, e.to_string()))?;
        cfg.validate()?;
        *dst = Box::into_raw(Box::new(CfrScenario(cfg)));
        Ok(())
    })
}

/// Sets the number of elements per RIS.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cfr_scenario_set_elements(scenario: *mut CfrScenario, elements: usize) -> CfrStatus {
    guard(|| {
        let s = out(scenario, "scenario")?;
        if elements == 0 {
            return Err(Fail(CfrStatus::InvalidArgument, "elements must be positive".into()));
        }
        s.0.elements = elements;
        s.0.ris_rows = None;
        Ok(())
    })
}

/// Normalized transmit SNR `P` of the scenario (linear).
///
/// # Safety
/// `scenario` must be a live handle and `snr` writable.
#[no_mangle]
pub unsafe extern "C" fn cfr_scenario_snr(scenario: *const CfrScenario, snr: *mut f64) -> CfrStatus {
    guard(|| {
        *out(snr, "snr")? = href(scenario, "scenario")?.0.snr_linear();
        Ok(())
    })
}

/// # Safety
/// `scenario` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cfr_scenario_free(scenario: *mut CfrScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Draws the channel realization for `seed`.
///
/// # Safety
/// `scenario` must be a live handle; `realization` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cfr_realization_generate(
    scenario: *const CfrScenario,
    seed: u64,
    realization: *mut *mut CfrRealization,
) -> CfrStatus {
    guard(|| {
        let s = href(scenario, "scenario")?;
        let dst = out(realization, "realization")?;
        *dst = Box::into_raw(Box::new(CfrRealization(generate_realization(&s.0, seed)?)));
        Ok(())
    })
}

/// Dimensions `M` (APs), `K` (users) and `I = L·N` (phases).
///
/// # Safety
/// `realization` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cfr_realization_dims(
    realization: *const CfrRealization,
    aps: *mut usize,
    users: *mut usize,
    phases: *mut usize,
) -> CfrStatus {
    guard(|| {
        let r = &href(realization, "realization")?.0;
        *out(aps, "aps")? = r.num_aps();
        *out(users, "users")? = r.num_users();
        *out(phases, "phases")? = r.num_phases();
        Ok(())
    })
}

/// Hash of every channel coefficient; equal realizations give equal values.
///
/// # Safety
/// `realization` must be a live handle and `fingerprint` writable.
#[no_mangle]
pub unsafe extern "C" fn cfr_realization_fingerprint(realization: *const CfrRealization, fingerprint: *mut u64) -> CfrStatus {
    guard(|| {
        *out(fingerprint, "fingerprint")? = href(realization, "realization")?.0.fingerprint();
        Ok(())
    })
}

/// # Safety
/// `realization` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cfr_realization_free(realization: *mut CfrRealization) {
    if !realization.is_null() {
        drop(Box::from_raw(realization));
    }
}

/// Runs one scheme with default solver options.
///
/// `algorithm` is one of `alg1`, `alg2[:b]`, `alg5`, `alg6[:b]`,
/// `random_phase[:b]`, `no_ris` (bits default to 2). `p` is the linear SNR and
/// `seed` drives randomization.
///
/// # Safety
/// `realization` must be a live handle, `algorithm` NUL-terminated and `result` writable.
#[no_mangle]
pub unsafe extern "C" fn cfr_optimize(
    realization: *const CfrRealization,
    algorithm: *const c_char,
    p: f64,
    seed: u64,
    result: *mut *mut CfrResult,
) -> CfrStatus {
    guard(|| {
        let r = &href(realization, "realization")?.0;
        let spec = AlgorithmSpec::parse(text(algorithm, "algorithm")?, 2)?;
        let dst = out(result, "result")?;
        if !(p > 0.0 && p.is_finite()) {
            return Err(Fail(CfrStatus::InvalidArgument, format!("SNR {p} must be positive")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, 0));
        let res = experiment::run_algorithm(spec, r, p, &AlgorithmOptions::default(), &mut rng)?;
        *dst = Box::into_raw(Box::new(CfrResult(res)));
        Ok(())
    })
}

/// Minimum user rate in bit/s/Hz.
///
/// # Safety
/// `result` must be a live handle and `rate` writable.
#[no_mangle]
pub unsafe extern "C" fn cfr_result_min_rate(result: *const CfrResult, rate: *mut f64) -> CfrStatus {
    guard(|| {
        *out(rate, "rate")? = href(result, "result")?.0.min_rate;
        Ok(())
    })
}

/// Iterations reported by the algorithm.
///
/// # Safety
/// `result` must be a live handle and `iterations` writable.
#[no_mangle]
pub unsafe extern "C" fn cfr_result_iterations(result: *const CfrResult, iterations: *mut usize) -> CfrStatus {
    guard(|| {
        *out(iterations, "iterations")? = href(result, "result")?.0.iterations;
        Ok(())
    })
}

/// Per-user rates. With `buf` NULL only `len` is written; otherwise `cap` must be at least `len`.
///
/// # Safety
/// `buf` must be NULL or hold `cap` doubles; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cfr_result_user_rates(
    result: *const CfrResult,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> CfrStatus {
    guard(|| copy_out(&href(result, "result")?.0.per_user_rate, buf, cap, len))
}

/// Phase angles in radians (empty for `no_ris`). Buffer protocol as for rates.
///
/// # Safety
/// `buf` must be NULL or hold `cap` doubles; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cfr_result_phases(result: *const CfrResult, buf: *mut f64, cap: usize, len: *mut usize) -> CfrStatus {
    guard(|| {
        let angles = href(result, "result")?.0.phases.as_ref().map(|p| p.angles()).unwrap_or_default();
        copy_out(&angles, buf, cap, len)
    })
}

/// # Safety
/// `result` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cfr_result_free(result: *mut CfrResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Linear-interpolation quantile of `len` values, `0 < q < 1`.
///
/// # Safety
/// `values` must point to `len` doubles and `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cfr_percentile(values: *const f64, len: usize, q: f64, value: *mut f64) -> CfrStatus {
    guard(|| {
        let dst = out(value, "value")?;
        let v: &[f64] = if len == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(href(values, "values")?, len)
        };
        *dst = experiment::percentile(v, q)?;
        Ok(())
    })
}

/// Runs an experiment described by TOML text and writes its CSV files to `out_dir`
/// (NULL uses the `out` key of the config).
///
/// # Safety
/// `toml_text` must be NUL-terminated; `out_dir` must be NULL or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cfr_run_experiment(toml_text: *const c_char, jobs: usize, out_dir: *const c_char) -> CfrStatus {
    let mut mostly_failed = false;
    let status = guard(|| {
        let mut cfg = ExperimentConfig::from_toml(text(toml_text, "toml_text")?)?;
        if !out_dir.is_null() {
            cfg.out = text(out_dir, "out_dir")?.into();
        }
        let res = experiment::run_experiment(&cfg, jobs)?;
        experiment::write_outputs(&res, Path::new(&cfg.out))?;
        mostly_failed = res.mostly_failed();
        Ok(())
    });
    if status == CfrStatus::Ok && mostly_failed {
        set_error("solver failures in at least half of the trials");
        return CfrStatus::MostlyFailed;
    }
    status
}
