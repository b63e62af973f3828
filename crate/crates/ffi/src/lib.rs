//! C ABI over the coopdrive simulator.
//!
//! Every function returns a [`CoopStatus`]; on failure a message is
//! available from [`coop_last_error`] on the same thread. Handles are
//! opaque and must be released with the matching `_free` function.
//! Strings handed out by the library are released with [`coop_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use coopdrive::costmodel::CostParams;
use coopdrive::scenario::{run, Report, ScenarioError, ScenarioSource};
use coopdrive::sor::{deployment_power, plan_placement};
use coopdrive::vehicle::Mode;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoopStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidScenario = 5,
    InvalidArgument = 6,
    NotFound = 7,
    NotNumeric = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoopMode {
    VehicleOnly = 0,
    Iaad = 1,
    Igad = 2,
    Ipad = 3,
}

impl From<CoopMode> for Mode {
    fn from(m: CoopMode) -> Self {
        match m {
            CoopMode::VehicleOnly => Mode::VehicleOnly,
            CoopMode::Iaad => Mode::Iaad,
            CoopMode::Igad => Mode::Igad,
            CoopMode::Ipad => Mode::Ipad,
        }
    }
}

/// A scenario file, editable before it is run.
pub struct CoopScenario {
    source: ScenarioSource,
}

/// Metrics of one run.
pub struct CoopReport {
    report: Report,
}

/// Inputs of the testing cost model. Fill from `coop_cost_defaults`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoopCostParams {
    pub n_v: f64,
    pub c_p: f64,
    pub s: f64,
    pub n_s: f64,
    pub c_s: f64,
    pub cap: u32,
    pub h_p: f64,
    pub h_s: f64,
    pub rtf: f64,
}

impl From<CoopCostParams> for CostParams {
    fn from(p: CoopCostParams) -> Self {
        CostParams { n_v: p.n_v, c_p: p.c_p, s: p.s, n_s: p.n_s, c_s: p.c_s, cap: p.cap, h_p: p.h_p, h_s: p.h_s, rtf: p.rtf }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoopCostReport {
    pub physical_cost_per_day: f64,
    pub sim_cost_per_day: f64,
    pub physical_km_per_day: f64,
    pub sim_km_per_day: f64,
    pub physical_cost_per_km: f64,
    pub sim_cost_per_km: f64,
    pub cost_per_km_ratio: f64,
    pub efficiency_ratio: f64,
    pub rtf_for_250x: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(CoopStatus, String);

type Res<T> = Result<T, Failure>;

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Run `f`, translating errors and panics into a status and a message.
fn guard(f: impl FnOnce() -> Res<()>) -> CoopStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CoopStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal error: {msg}"));
            CoopStatus::Panic
        }
    }
}

fn scenario_failure(e: ScenarioError) -> Failure {
    let status = match &e {
        ScenarioError::Io { .. } => CoopStatus::Io,
        ScenarioError::Parse(_) => CoopStatus::Parse,
        ScenarioError::Invalid(_) => CoopStatus::InvalidScenario,
        ScenarioError::Sweep(_) => CoopStatus::InvalidArgument,
    };
    Failure(status, e.to_string())
}

unsafe fn string_arg<'a>(p: *const c_char, name: &str) -> Res<&'a str> {
    if p.is_null() {
        return Err(Failure(CoopStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(CoopStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *mut T, name: &str) -> Res<&'a mut T> {
    p.as_mut().ok_or_else(|| Failure(CoopStatus::NullArgument, format!("{name} is null")))
}

fn out_arg<T>(p: *mut T, name: &str) -> Res<()> {
    if p.is_null() {
        Err(Failure(CoopStatus::NullArgument, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn coop_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Load a scenario file. The scenario is validated here and again by
/// `coop_run` after any edits.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coop_scenario_load(path: *const c_char, out: *mut *mut CoopScenario) -> CoopStatus {
    guard(|| {
        out_arg(out, "out")?;
        let path = string_arg(path, "path")?;
        let source = ScenarioSource::load(path).map_err(scenario_failure)?;
        source.build().map_err(scenario_failure)?;
        *out = Box::into_raw(Box::new(CoopScenario { source }));
        Ok(())
    })
}

/// Parse a scenario from TOML text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coop_scenario_parse(text: *const c_char, out: *mut *mut CoopScenario) -> CoopStatus {
    guard(|| {
        out_arg(out, "out")?;
        let text = string_arg(text, "text")?;
        let source = ScenarioSource::parse(text).map_err(scenario_failure)?;
        source.build().map_err(scenario_failure)?;
        *out = Box::into_raw(Box::new(CoopScenario { source }));
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from `coop_scenario_load` or `coop_scenario_parse`.
#[no_mangle]
pub unsafe extern "C" fn coop_scenario_set_mode(scenario: *mut CoopScenario, mode: CoopMode) -> CoopStatus {
    guard(|| {
        handle(scenario, "scenario")?.source.set_mode(mode.into());
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from `coop_scenario_load` or `coop_scenario_parse`.
#[no_mangle]
pub unsafe extern "C" fn coop_scenario_set_seed(scenario: *mut CoopScenario, seed: u64) -> CoopStatus {
    guard(|| {
        handle(scenario, "scenario")?.source.set_seed(seed);
        Ok(())
    })
}

/// Override one numeric parameter by dotted path, e.g.
/// `channels.cv2x.jitter_max_ms`. The edit is rejected, and the scenario
/// left unchanged, if the result does not validate.
///
/// # Safety
/// `scenario` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn coop_scenario_set_param(scenario: *mut CoopScenario, path: *const c_char, value: f64) -> CoopStatus {
    guard(|| {
        let sc = handle(scenario, "scenario")?;
        let path = string_arg(path, "path")?;
        let mut edited = sc.source.clone();
        edited.set_number(path, value).map_err(scenario_failure)?;
        edited.build().map_err(scenario_failure)?;
        sc.source = edited;
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn coop_scenario_free(scenario: *mut CoopScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Simulate the scenario to completion.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coop_run(scenario: *const CoopScenario, out: *mut *mut CoopReport) -> CoopStatus {
    guard(|| {
        out_arg(out, "out")?;
        let sc = scenario.as_ref().ok_or_else(|| Failure(CoopStatus::NullArgument, "scenario is null".into()))?;
        let built = sc.source.build().map_err(scenario_failure)?;
        *out = Box::into_raw(Box::new(CoopReport { report: run(&built).report }));
        Ok(())
    })
}

/// Numeric value of one metric. `NotFound` if absent, `NotNumeric` for
/// string metrics or undefined values.
///
/// # Safety
/// `report` must be a live handle, `name` a NUL-terminated string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn coop_report_metric(report: *const CoopReport, name: *const c_char, out: *mut f64) -> CoopStatus {
    guard(|| {
        out_arg(out, "out")?;
        let r = report.as_ref().ok_or_else(|| Failure(CoopStatus::NullArgument, "report is null".into()))?;
        let name = string_arg(name, "name")?;
        let v = r.report.get(name).ok_or_else(|| Failure(CoopStatus::NotFound, format!("no metric {name:?}")))?;
        *out = v.as_f64().ok_or_else(|| Failure(CoopStatus::NotNumeric, format!("metric {name:?} is {v}")))?;
        Ok(())
    })
}

/// All records as JSON lines. Release with `coop_string_free`.
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coop_report_to_json(report: *const CoopReport, out: *mut *mut c_char) -> CoopStatus {
    guard(|| {
        out_arg(out, "out")?;
        let r = report.as_ref().ok_or_else(|| Failure(CoopStatus::NullArgument, "report is null".into()))?;
        let text = CString::new(r.report.to_jsonl()).map_err(|e| Failure(CoopStatus::InvalidArgument, e.to_string()))?;
        *out = text.into_raw();
        Ok(())
    })
}

/// # Safety
/// `report` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn coop_report_free(report: *mut CoopReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn coop_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default cost-model inputs.
#[no_mangle]
pub extern "C" fn coop_cost_defaults() -> CoopCostParams {
    let d = CostParams::default();
    CoopCostParams { n_v: d.n_v, c_p: d.c_p, s: d.s, n_s: d.n_s, c_s: d.c_s, cap: d.cap, h_p: d.h_p, h_s: d.h_s, rtf: d.rtf }
}

/// # Safety
/// `params` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn coop_cost_report(params: *const CoopCostParams, out: *mut CoopCostReport) -> CoopStatus {
    guard(|| {
        out_arg(out, "out")?;
        let p = params.as_ref().ok_or_else(|| Failure(CoopStatus::NullArgument, "params is null".into()))?;
        let r = CostParams::from(*p).report().map_err(|errs| {
            Failure(CoopStatus::InvalidArgument, errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
        })?;
        *out = CoopCostReport {
            physical_cost_per_day: r.physical_cost_per_day,
            sim_cost_per_day: r.sim_cost_per_day,
            physical_km_per_day: r.physical_km_per_day,
            sim_km_per_day: r.sim_km_per_day,
            physical_cost_per_km: r.physical_cost_per_km,
            sim_cost_per_km: r.sim_cost_per_km,
            cost_per_km_ratio: r.cost_per_km_ratio,
            efficiency_ratio: r.efficiency_ratio,
            rtf_for_250x: r.rtf_for_250x,
        };
        Ok(())
    })
}

/// Roadside unit positions along a corridor. `*count` always receives the
/// number of units; positions are written only when `capacity` suffices,
/// otherwise `BufferTooSmall` is returned. `positions` may be null when
/// `capacity` is zero.
///
/// # Safety
/// `positions` must have room for `capacity` values; `count` writable.
#[no_mangle]
pub unsafe extern "C" fn coop_plan_placement(
    length_m: f64,
    coverage_each_direction_m: f64,
    positions: *mut f64,
    capacity: usize,
    count: *mut usize,
) -> CoopStatus {
    guard(|| {
        out_arg(count, "count")?;
        let units = plan_placement(length_m, coverage_each_direction_m)
            .map_err(|e| Failure(CoopStatus::InvalidArgument, e.to_string()))?;
        *count = units.len();
        if units.len() > capacity {
            return Err(Failure(CoopStatus::BufferTooSmall, format!("{} positions, room for {capacity}", units.len())));
        }
        if !units.is_empty() {
            out_arg(positions, "positions")?;
            ptr::copy_nonoverlapping(units.as_ptr(), positions, units.len());
        }
        Ok(())
    })
}

/// Total draw in watts of `sor_count` units at `power_w` each.
#[no_mangle]
pub extern "C" fn coop_deployment_power(sor_count: usize, power_w: f64) -> f64 {
    deployment_power(sor_count, power_w)
}
