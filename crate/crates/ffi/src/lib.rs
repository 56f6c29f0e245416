//! C ABI for the surface-tracing library.
//!
//! Conventions:
//! - Every fallible function returns a [`SurftraceStatus`]; results travel
//!   through out-parameters, and `SURFTRACE_STATUS_OK` is zero.
//! - Handles ([`SurftraceScenario`], [`SurftraceRun`], [`SurftraceEstimator`])
//!   are opaque. Create them with the matching constructor, destroy them with
//!   the matching `_free`; `_free` accepts null. Null where a handle or
//!   out-pointer is required yields `NULL_POINTER`, never a crash.
//! - On failure a thread-local message is recorded; fetch it with
//!   [`surftrace_last_error`]. The pointer stays valid until the next failing
//!   call on the same thread.
//! - Panics never cross the boundary: every entry point is wrapped and
//!   reports `PANIC` instead of unwinding into C.
//!
//! The matching header, `include/surftrace.h`, is regenerated by the build
//! script.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use nalgebra::Vector3;
use surftrace::error::Error;
use surftrace::estimator::{self, EstimatorConfig, EstimatorState};
use surftrace::scenario::{parse_override, KeyValue, Scenario};
use surftrace::sim::{self, RunOutput, StepRecord};

/// Result of every API call; zero means success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurftraceStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A scenario file, override, or parameter set failed validation.
    InvalidConfig = 3,
    /// A file could not be read or written.
    Io = 4,
    /// The probe never reached the surface, or the estimator was queried
    /// without a usable force signal.
    NoContact = 5,
    /// The closed loop left the sane region and was aborted.
    Diverged = 6,
    /// A (near-)singular matrix or degenerate geometry query.
    Numerical = 7,
    /// An index argument was out of range.
    OutOfRange = 8,
    /// The library panicked internally; treat the handle as poisoned.
    Panic = 9,
}

/// Opaque validated scenario. Create with [`surftrace_scenario_load`] or
/// [`surftrace_scenario_from_toml`], destroy with [`surftrace_scenario_free`].
pub struct SurftraceScenario(Scenario);

/// Opaque completed run: per-cycle records plus summary metrics. Destroy
/// with [`surftrace_run_free`].
pub struct SurftraceRun(RunOutput);

/// Opaque incremental normal/friction estimator for callers that run their
/// own control loop. Destroy with [`surftrace_estimator_free`].
pub struct SurftraceEstimator {
    config: EstimatorConfig,
    state: EstimatorState,
}

/// Headline metrics of one run. Distances are meters, angles radians,
/// forces newtons.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SurftraceSummary {
    /// RMS contact-point deviation from the desired path, settling excluded.
    pub rms_path_error: f64,
    /// Worst-case contact-point deviation, settling included.
    pub max_path_error: f64,
    /// Mean angle between the reported and true normals, settling excluded.
    pub normal_angle_error_mean: f64,
    /// Worst-case normal angle, settling included.
    pub normal_angle_error_max: f64,
    /// RMS deviation of the true normal force from its target.
    pub force_error_rms: f64,
    /// Final friction-coefficient window average.
    pub mu_final: f64,
    /// Number of recorded control cycles (approach + contact).
    pub steps: usize,
}

/// One logged control cycle; mirrors one CSV row.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SurftraceRecord {
    /// Time since the start of the run (s).
    pub t: f64,
    /// Joint angles (rad).
    pub q: [f64; 7],
    /// Probe-center position (m).
    pub x_ee: [f64; 3],
    /// Desired contact point on the path (m).
    pub x_des: [f64; 3],
    /// Raw sensed force (N).
    pub f_s: [f64; 3],
    /// Friction-compensated force estimate (N).
    pub f_n_hat: [f64; 3],
    /// Reported unit surface normal.
    pub n_surf_hat: [f64; 3],
    /// Ground-truth unit surface normal at the contact point.
    pub n_true: [f64; 3],
    /// Friction-coefficient window average.
    pub mu_bar: f64,
    /// Per-cycle friction-coefficient sample.
    pub mu_k: f64,
    /// Angle between the control normal and the negated probe axis (rad).
    pub gamma: f64,
    /// Norm of the position-tracking error (m).
    pub e_norm: f64,
}

/// Output of one estimator step.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SurftraceEstimate {
    /// Force reading with the reconstructed friction removed (N).
    pub f_n_hat: [f64; 3],
    /// Unit surface-normal estimate.
    pub n_surf_hat: [f64; 3],
    /// Reconstructed friction force that was subtracted (N).
    pub f_tau: [f64; 3],
    /// Friction-coefficient sample produced this step.
    pub mu_k: f64,
    /// True when the sliding branch ran (speed above the threshold).
    pub moving: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: SurftraceStatus, message: impl AsRef<str>) -> SurftraceStatus {
    let text = message.as_ref().replace('\0', " ");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(text).unwrap_or_default());
    status
}

fn fail_with(err: &Error) -> SurftraceStatus {
    let status = match err {
        Error::ScenarioIo(_) => SurftraceStatus::Io,
        Error::InvalidModel(_)
        | Error::InvalidSurface(_)
        | Error::PathOffSurface(_)
        | Error::ScenarioInvalid(_) => SurftraceStatus::InvalidConfig,
        Error::NoContact { .. } | Error::NoContactReached { .. } => SurftraceStatus::NoContact,
        Error::SimulationDiverged { .. } => SurftraceStatus::Diverged,
        Error::SingularJacobian { .. }
        | Error::DegenerateQuery { .. }
        | Error::ZeroVelocity { .. }
        | Error::DegenerateFrame { .. } => SurftraceStatus::Numerical,
    };
    fail(status, err.to_string())
}

fn guard(f: impl FnOnce() -> SurftraceStatus) -> SurftraceStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(SurftraceStatus::Panic, "internal panic"),
    }
}

/// # Safety
/// `ptr` must be null or point to a NUL-terminated string.
unsafe fn required_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, SurftraceStatus> {
    if ptr.is_null() {
        return Err(fail(SurftraceStatus::NullPointer, format!("{what} must not be null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(SurftraceStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// # Safety
/// `ptr` must be null or point to `len` NUL-terminated strings.
unsafe fn collect_overrides(
    ptr: *const *const c_char,
    len: usize,
) -> Result<Vec<KeyValue>, SurftraceStatus> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if ptr.is_null() {
        return Err(fail(
            SurftraceStatus::NullPointer,
            "override array is null but the override count is nonzero",
        ));
    }
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let text = required_str(*ptr.add(i), "override")?;
        out.push(parse_override(text).map_err(|e| fail(SurftraceStatus::InvalidConfig, e))?);
    }
    Ok(out)
}

fn triple(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn record_out(r: &StepRecord) -> SurftraceRecord {
    let mut q = [0.0; 7];
    q.copy_from_slice(r.q.as_slice());
    SurftraceRecord {
        t: r.t,
        q,
        x_ee: triple(&r.x_ee),
        x_des: triple(&r.x_des),
        f_s: triple(&r.f_s),
        f_n_hat: triple(&r.f_n_hat),
        n_surf_hat: triple(&r.n_surf_hat),
        n_true: triple(&r.n_true),
        mu_bar: r.mu_bar,
        mu_k: r.mu_k,
        gamma: r.gamma,
        e_norm: r.e_norm,
    }
}

/// Library version as a static NUL-terminated string; never null.
#[no_mangle]
pub extern "C" fn surftrace_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on the calling thread; the
/// empty string if nothing failed yet. Valid until the next failing call on
/// the same thread. Never null.
#[no_mangle]
pub extern "C" fn surftrace_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Loads and validates a scenario file, applying `override_count` textual
/// `key=value` overrides on top (the array may be null when the count is 0).
///
/// # Safety
/// `path` and the override entries must be NUL-terminated strings; `out`
/// must be a valid pointer. On success `*out` owns the new handle.
#[no_mangle]
pub unsafe extern "C" fn surftrace_scenario_load(
    path: *const c_char,
    overrides: *const *const c_char,
    override_count: usize,
    out: *mut *mut SurftraceScenario,
) -> SurftraceStatus {
    guard(|| {
        let Some(slot) = out.as_mut() else {
            return fail(SurftraceStatus::NullPointer, "out must not be null");
        };
        *slot = std::ptr::null_mut();
        let path = match required_str(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        let kvs = match collect_overrides(overrides, override_count) {
            Ok(kvs) => kvs,
            Err(status) => return status,
        };
        match Scenario::load(Path::new(path), &kvs) {
            Ok(scenario) => {
                *slot = Box::into_raw(Box::new(SurftraceScenario(scenario)));
                SurftraceStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Parses and validates scenario text; `name` becomes the output base name.
///
/// # Safety
/// `text`, `name`, and the override entries must be NUL-terminated strings;
/// `out` must be a valid pointer. On success `*out` owns the new handle.
#[no_mangle]
pub unsafe extern "C" fn surftrace_scenario_from_toml(
    text: *const c_char,
    name: *const c_char,
    overrides: *const *const c_char,
    override_count: usize,
    out: *mut *mut SurftraceScenario,
) -> SurftraceStatus {
    guard(|| {
        let Some(slot) = out.as_mut() else {
            return fail(SurftraceStatus::NullPointer, "out must not be null");
        };
        *slot = std::ptr::null_mut();
        let text = match required_str(text, "text") {
            Ok(t) => t,
            Err(status) => return status,
        };
        let name = match required_str(name, "name") {
            Ok(n) => n,
            Err(status) => return status,
        };
        let kvs = match collect_overrides(overrides, override_count) {
            Ok(kvs) => kvs,
            Err(status) => return status,
        };
        match Scenario::from_toml(text, name, &kvs) {
            Ok(scenario) => {
                *slot = Box::into_raw(Box::new(SurftraceScenario(scenario)));
                SurftraceStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Releases a scenario handle; null is accepted and ignored.
///
/// # Safety
/// `scenario` must be null or a handle produced by this library that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn surftrace_scenario_free(scenario: *mut SurftraceScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Copies the scenario's base name into `buf` (NUL-terminated, truncated if
/// necessary) and returns the untruncated length excluding the terminator,
/// snprintf-style. Returns 0 for a null handle; `buf` may be null when
/// `cap` is 0.
///
/// # Safety
/// `buf` must point to at least `cap` writable bytes when `cap > 0`.
#[no_mangle]
pub unsafe extern "C" fn surftrace_scenario_name(
    scenario: *const SurftraceScenario,
    buf: *mut c_char,
    cap: usize,
) -> usize {
    let Some(handle) = scenario.as_ref() else { return 0 };
    let name = handle.0.name.as_bytes();
    if cap > 0 && !buf.is_null() {
        let n = name.len().min(cap - 1);
        std::ptr::copy_nonoverlapping(name.as_ptr() as *const c_char, buf, n);
        *buf.add(n) = 0;
    }
    name.len()
}

/// Replaces the scenario's noise seed (the file-level default otherwise).
///
/// # Safety
/// `scenario` must be a live handle produced by this library.
#[no_mangle]
pub unsafe extern "C" fn surftrace_scenario_set_seed(
    scenario: *mut SurftraceScenario,
    seed: u64,
) -> SurftraceStatus {
    guard(|| {
        let Some(handle) = scenario.as_mut() else {
            return fail(SurftraceStatus::NullPointer, "scenario must not be null");
        };
        handle.0.seed = seed;
        SurftraceStatus::Ok
    })
}

/// Number of contact-phase control steps the scenario will execute
/// (duration times rate); 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or a live handle produced by this library.
#[no_mangle]
pub unsafe extern "C" fn surftrace_scenario_step_count(
    scenario: *const SurftraceScenario,
) -> usize {
    scenario.as_ref().map_or(0, |handle| handle.0.step_count())
}

/// Executes a scenario; on success `*out` owns a run handle.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surftrace_run(
    scenario: *const SurftraceScenario,
    out: *mut *mut SurftraceRun,
) -> SurftraceStatus {
    guard(|| {
        let Some(slot) = out.as_mut() else {
            return fail(SurftraceStatus::NullPointer, "out must not be null");
        };
        *slot = std::ptr::null_mut();
        let Some(handle) = scenario.as_ref() else {
            return fail(SurftraceStatus::NullPointer, "scenario must not be null");
        };
        match sim::run(&handle.0) {
            Ok(output) => {
                *slot = Box::into_raw(Box::new(SurftraceRun(output)));
                SurftraceStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Executes a scenario twice, with the estimator in the loop and with the
/// frozen-normal baseline; on success both out-pointers own run handles.
///
/// # Safety
/// `scenario` must be a live handle; `out_on` and `out_off` must be valid
/// pointers.
#[no_mangle]
pub unsafe extern "C" fn surftrace_compare(
    scenario: *const SurftraceScenario,
    out_on: *mut *mut SurftraceRun,
    out_off: *mut *mut SurftraceRun,
) -> SurftraceStatus {
    guard(|| {
        if out_on.is_null() || out_off.is_null() {
            return fail(SurftraceStatus::NullPointer, "out_on/out_off must not be null");
        }
        *out_on = std::ptr::null_mut();
        *out_off = std::ptr::null_mut();
        let Some(handle) = scenario.as_ref() else {
            return fail(SurftraceStatus::NullPointer, "scenario must not be null");
        };
        match sim::compare(&handle.0) {
            Ok(outcome) => {
                *out_on = Box::into_raw(Box::new(SurftraceRun(outcome.on)));
                *out_off = Box::into_raw(Box::new(SurftraceRun(outcome.off)));
                SurftraceStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Releases a run handle; null is accepted and ignored.
///
/// # Safety
/// `run` must be null or a handle produced by this library that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn surftrace_run_free(run: *mut SurftraceRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of recorded control cycles; 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle produced by this library.
#[no_mangle]
pub unsafe extern "C" fn surftrace_run_steps(run: *const SurftraceRun) -> usize {
    run.as_ref().map_or(0, |handle| handle.0.records.len())
}

/// Copies the run's summary metrics into `out`.
///
/// # Safety
/// `run` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surftrace_run_summary(
    run: *const SurftraceRun,
    out: *mut SurftraceSummary,
) -> SurftraceStatus {
    guard(|| {
        let Some(slot) = out.as_mut() else {
            return fail(SurftraceStatus::NullPointer, "out must not be null");
        };
        let Some(handle) = run.as_ref() else {
            return fail(SurftraceStatus::NullPointer, "run must not be null");
        };
        let s = &handle.0.summary;
        *slot = SurftraceSummary {
            rms_path_error: s.rms_path_error,
            max_path_error: s.max_path_error,
            normal_angle_error_mean: s.normal_angle_error_mean,
            normal_angle_error_max: s.normal_angle_error_max,
            force_error_rms: s.force_error_rms,
            mu_final: s.mu_final,
            steps: s.steps,
        };
        SurftraceStatus::Ok
    })
}

/// Copies record `index` into `out`; `OUT_OF_RANGE` past the end.
///
/// # Safety
/// `run` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surftrace_run_record(
    run: *const SurftraceRun,
    index: usize,
    out: *mut SurftraceRecord,
) -> SurftraceStatus {
    guard(|| {
        let Some(slot) = out.as_mut() else {
            return fail(SurftraceStatus::NullPointer, "out must not be null");
        };
        let Some(handle) = run.as_ref() else {
            return fail(SurftraceStatus::NullPointer, "run must not be null");
        };
        match handle.0.records.get(index) {
            Some(record) => {
                *slot = record_out(record);
                SurftraceStatus::Ok
            }
            None => fail(
                SurftraceStatus::OutOfRange,
                format!("record {index} of {}", handle.0.records.len()),
            ),
        }
    })
}

/// Writes the run's records as CSV (header plus one row per cycle) to
/// `path`, replacing any existing file.
///
/// # Safety
/// `run` must be a live handle; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn surftrace_run_write_csv(
    run: *const SurftraceRun,
    path: *const c_char,
) -> SurftraceStatus {
    guard(|| {
        let Some(handle) = run.as_ref() else {
            return fail(SurftraceStatus::NullPointer, "run must not be null");
        };
        let path = match required_str(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        let write = || -> std::io::Result<()> {
            let file = std::fs::File::create(path)?;
            let mut out = std::io::BufWriter::new(file);
            sim::write_csv(&mut out, &handle.0.records)?;
            use std::io::Write as _;
            out.flush()
        };
        match write() {
            Ok(()) => SurftraceStatus::Ok,
            Err(e) => fail(SurftraceStatus::Io, format!("{path}: {e}")),
        }
    })
}

/// Creates an incremental estimator with a uniformly weighted window.
/// `window` is the friction-average length, `v_epsilon` the speed below
/// which the probe counts as stationary (m/s), `mu_initial` the value the
/// window starts filled with, and `f_min` the force norm below which
/// directions are unreliable (N).
///
/// # Safety
/// `out` must be a valid pointer. On success `*out` owns the new handle.
#[no_mangle]
pub unsafe extern "C" fn surftrace_estimator_new(
    window: usize,
    v_epsilon: f64,
    mu_initial: f64,
    f_min: f64,
    out: *mut *mut SurftraceEstimator,
) -> SurftraceStatus {
    guard(|| {
        let Some(slot) = out.as_mut() else {
            return fail(SurftraceStatus::NullPointer, "out must not be null");
        };
        *slot = std::ptr::null_mut();
        let config = EstimatorConfig {
            window,
            weights: vec![1.0; window],
            v_epsilon,
            mu_initial,
            f_min,
            enabled: true,
        };
        if let Err(problems) = config.validate() {
            return fail(SurftraceStatus::InvalidConfig, problems.join("; "));
        }
        let state = EstimatorState::new(&config);
        *slot = Box::into_raw(Box::new(SurftraceEstimator { config, state }));
        SurftraceStatus::Ok
    })
}

/// Releases an estimator handle; null is accepted and ignored.
///
/// # Safety
/// `estimator` must be null or a handle produced by this library that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn surftrace_estimator_free(estimator: *mut SurftraceEstimator) {
    if !estimator.is_null() {
        drop(Box::from_raw(estimator));
    }
}

/// Advances the estimator by one cycle. `f_s` is the sensed force and
/// `v_hat` the probe-velocity estimate, both pointers to three doubles.
/// On success the estimator state advances and `out` receives the cleaned
/// force, normal estimate, and friction sample.
///
/// # Safety
/// `estimator` must be a live handle; `f_s` and `v_hat` must point to three
/// readable doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surftrace_estimator_step(
    estimator: *mut SurftraceEstimator,
    f_s: *const f64,
    v_hat: *const f64,
    out: *mut SurftraceEstimate,
) -> SurftraceStatus {
    guard(|| {
        let Some(slot) = out.as_mut() else {
            return fail(SurftraceStatus::NullPointer, "out must not be null");
        };
        let Some(handle) = estimator.as_mut() else {
            return fail(SurftraceStatus::NullPointer, "estimator must not be null");
        };
        if f_s.is_null() || v_hat.is_null() {
            return fail(SurftraceStatus::NullPointer, "f_s/v_hat must not be null");
        }
        let force = Vector3::new(*f_s, *f_s.add(1), *f_s.add(2));
        let velocity = Vector3::new(*v_hat, *v_hat.add(1), *v_hat.add(2));
        match estimator::step(&handle.config, &handle.state, &force, &velocity) {
            Ok((output, next)) => {
                handle.state = next;
                *slot = SurftraceEstimate {
                    f_n_hat: triple(&output.f_n_hat),
                    n_surf_hat: triple(&output.n_surf_hat),
                    f_tau: triple(&output.f_tau),
                    mu_k: output.mu_k,
                    moving: output.moving,
                };
                SurftraceStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Current weighted friction-coefficient average; NaN for a null handle.
///
/// # Safety
/// `estimator` must be null or a live handle produced by this library.
#[no_mangle]
pub unsafe extern "C" fn surftrace_estimator_mu(estimator: *const SurftraceEstimator) -> f64 {
    estimator
        .as_ref()
        .map_or(f64::NAN, |handle| estimator::weighted_average(&handle.config, &handle.state))
}
