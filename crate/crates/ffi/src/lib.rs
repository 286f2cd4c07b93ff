//! C ABI over `rsos-core`.
//!
//! Every entry point returns an [`RsosStatus`]. On failure the message is kept
//! per thread and can be read with [`rsos_last_error`]. Objects cross the
//! boundary as opaque handles that the caller releases with the matching
//! `*_free` function; strings returned through `out` parameters are released
//! with [`rsos_string_free`]. Panics never unwind into the caller.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rsos_core::dual::{self, DualTrajectory};
use rsos_core::experiment::{execute, run_experiment, ExperimentConfig};
use rsos_core::minpath;
use rsos_core::surface::evolve;
use rsos_core::{Boundary, Error, EventSet, HeightField, InitialCondition, LatticeBox, Model, Site};

#[repr(i32)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RsosStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    Io = 4,
    Parse = 5,
    Unsupported = 6,
    CapExceeded = 7,
    Panic = 8,
}

#[repr(i32)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RsosModelKind {
    Rsos = 0,
    KRsos = 1,
    Bd = 2,
}

/// Update rule. `kind` holds an [`RsosModelKind`]; `k` is read only for `KRsos`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct RsosModel {
    pub kind: i32,
    pub k: u32,
}

#[repr(i32)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RsosInitKind {
    Zero = 0,
    Well = 1,
    /// Heights supplied in box index order.
    Explicit = 2,
}

/// Starting heights. `kind` holds an [`RsosInitKind`]; `heights`/`len` are
/// read only for `Explicit`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct RsosInit {
    pub kind: i32,
    pub heights: *const i64,
    pub len: usize,
}

/// Clock rings of one space-time box.
pub struct RsosEventSet(EventSet);

/// Heights after an evolution.
pub struct RsosField(HeightField);

/// A dual process run.
pub struct RsosDualTrajectory(DualTrajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> RsosStatus {
    match err {
        Error::OutOfBox { .. }
        | Error::OutOfHorizon { .. }
        | Error::MissingEvent { .. }
        | Error::NotInLog => RsosStatus::OutOfRange,
        Error::EventBudgetExceeded { .. } | Error::EnumerationCap { .. } => RsosStatus::CapExceeded,
        Error::Unsupported(_) => RsosStatus::Unsupported,
        Error::Parse(_) => RsosStatus::Parse,
        Error::Io { .. } => RsosStatus::Io,
        _ => RsosStatus::InvalidArgument,
    }
}

struct Fail(RsosStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RsosStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(RsosStatus::InvalidArgument, msg.into())
}

/// Runs `f`, records any failure for [`rsos_last_error`] and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RsosStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RsosStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            RsosStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Fail(RsosStatus::Parse, format!("`{what}` is not UTF-8")))
}

unsafe fn read_site(coords: *const i32, dim: usize) -> Result<Site, Fail> {
    if dim == 0 {
        return Ok(Site(Vec::new()));
    }
    if coords.is_null() {
        return Err(null("coords"));
    }
    Ok(Site(std::slice::from_raw_parts(coords, dim).to_vec()))
}

fn model_of(m: RsosModel) -> Result<Model, Fail> {
    const RSOS: i32 = RsosModelKind::Rsos as i32;
    const KRSOS: i32 = RsosModelKind::KRsos as i32;
    const BD: i32 = RsosModelKind::Bd as i32;
    match m.kind {
        RSOS => Ok(Model::Rsos),
        BD => Ok(Model::Bd),
        KRSOS if m.k >= 1 => Ok(Model::KRsos(m.k)),
        KRSOS => Err(invalid("k must be at least 1")),
        other => Err(invalid(format!("unknown model kind {other}"))),
    }
}

unsafe fn init_of(init: RsosInit) -> Result<InitialCondition, Fail> {
    const ZERO: i32 = RsosInitKind::Zero as i32;
    const WELL: i32 = RsosInitKind::Well as i32;
    const EXPLICIT: i32 = RsosInitKind::Explicit as i32;
    match init.kind {
        ZERO => Ok(InitialCondition::Zero),
        WELL => Ok(InitialCondition::Well),
        EXPLICIT if init.len == 0 => Ok(InitialCondition::Explicit(Vec::new())),
        EXPLICIT if init.heights.is_null() => Err(null("init.heights")),
        EXPLICIT => Ok(InitialCondition::Explicit(
            std::slice::from_raw_parts(init.heights, init.len).to_vec(),
        )),
        other => Err(invalid(format!("unknown init kind {other}"))),
    }
}

fn c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| invalid("string contains a nul byte"))
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn rsos_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn rsos_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rsos_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Samples the clock rings of `[-radius, radius]^dim × (0, horizon)`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn rsos_event_set_generate(
    dim: usize,
    radius: i32,
    horizon: f64,
    rate: f64,
    periodic: bool,
    seed: u64,
    out: *mut *mut RsosEventSet,
) -> RsosStatus {
    guard(|| {
        let boundary = if periodic { Boundary::Periodic } else { Boundary::Free };
        let bx = LatticeBox::new(dim, radius, horizon, boundary)?;
        let set = EventSet::generate(&bx, rate, seed)?;
        write_out(out, Box::into_raw(Box::new(RsosEventSet(set))), "out")
    })
}

/// Samples rings on the box a dual run up to `until` needs by default.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn rsos_event_set_generate_for_dual(
    dim: usize,
    until: f64,
    seed: u64,
    out: *mut *mut RsosEventSet,
) -> RsosStatus {
    guard(|| {
        let bx = dual::default_box(dim, until)?;
        let set = EventSet::generate(&bx, 1.0, seed)?;
        write_out(out, Box::into_raw(Box::new(RsosEventSet(set))), "out")
    })
}

/// # Safety
/// `set` must be NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn rsos_event_set_free(set: *mut RsosEventSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Number of rings, or 0 for a NULL handle.
///
/// # Safety
/// `set` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rsos_event_set_len(set: *const RsosEventSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.len())
}

/// Time reversal `t -> T - t`; a new handle.
///
/// # Safety
/// `set` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rsos_event_set_reverse(
    set: *const RsosEventSet,
    out: *mut *mut RsosEventSet,
) -> RsosStatus {
    guard(|| {
        let set = deref(set, "set")?;
        write_out(out, Box::into_raw(Box::new(RsosEventSet(set.0.reverse()))), "out")
    })
}

/// Serializes the rings as JSONL into a new string.
///
/// # Safety
/// `set` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rsos_event_set_to_jsonl(
    set: *const RsosEventSet,
    out: *mut *mut c_char,
) -> RsosStatus {
    guard(|| {
        let set = deref(set, "set")?;
        write_out(out, c_string(set.0.to_jsonl_string())?, "out")
    })
}

/// # Safety
/// `text` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rsos_event_set_from_jsonl(
    text: *const c_char,
    out: *mut *mut RsosEventSet,
) -> RsosStatus {
    guard(|| {
        let text = read_str(text, "text")?;
        let set = EventSet::read_jsonl(text.as_bytes())?;
        write_out(out, Box::into_raw(Box::new(RsosEventSet(set))), "out")
    })
}

/// Runs the forward dynamics up to `until`.
///
/// # Safety
/// `set` must be a live handle, `init.heights` must point to `init.len`
/// values when the kind is explicit, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rsos_evolve(
    set: *const RsosEventSet,
    model: RsosModel,
    init: RsosInit,
    until: f64,
    out: *mut *mut RsosField,
) -> RsosStatus {
    guard(|| {
        let set = deref(set, "set")?;
        let ev = evolve(&set.0, &init_of(init)?, model_of(model)?, until)?;
        write_out(out, Box::into_raw(Box::new(RsosField(ev.field))), "out")
    })
}

/// # Safety
/// `field` must be NULL or a handle that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn rsos_field_free(field: *mut RsosField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Number of sites, or 0 for a NULL handle.
///
/// # Safety
/// `field` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rsos_field_len(field: *const RsosField) -> usize {
    field.as_ref().map_or(0, |f| f.0.heights.len())
}

/// Copies all heights in box index order. `cap` must be at least
/// [`rsos_field_len`].
///
/// # Safety
/// `field` must be a live handle and `buf` must hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn rsos_field_heights(
    field: *const RsosField,
    buf: *mut i64,
    cap: usize,
) -> RsosStatus {
    guard(|| {
        let h = &deref(field, "field")?.0.heights;
        if cap < h.len() {
            return Err(invalid(format!("buffer holds {cap} values, need {}", h.len())));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(h.as_ptr(), buf, h.len());
        Ok(())
    })
}

/// Height at the site with `dim` coordinates.
///
/// # Safety
/// `field` must be a live handle, `coords` must hold `dim` values and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn rsos_field_height_at(
    field: *const RsosField,
    coords: *const i32,
    dim: usize,
    out: *mut i64,
) -> RsosStatus {
    guard(|| {
        let f = &deref(field, "field")?.0;
        let site = read_site(coords, dim)?;
        if dim != f.bx.dim {
            return Err(invalid(format!("site has {dim} coordinates, box has {}", f.bx.dim)));
        }
        let h = f.height(&site).ok_or(Error::OutOfBox {
            site: site.0.clone(),
            radius: f.bx.radius,
        })?;
        write_out(out, h, "out")
    })
}

/// Optimal path value at `(t, x)` over paths ending at `end_time`.
/// `out_exact` receives whether the box certifies the value.
///
/// # Safety
/// `set` must be a live handle, `coords` must hold `dim` values, the init
/// must be valid as for [`rsos_evolve`] and both outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn rsos_min_weight(
    set: *const RsosEventSet,
    t: f64,
    coords: *const i32,
    dim: usize,
    init: RsosInit,
    end_time: f64,
    model: RsosModel,
    out_value: *mut i64,
    out_exact: *mut bool,
) -> RsosStatus {
    guard(|| {
        let set = deref(set, "set")?;
        let site = read_site(coords, dim)?;
        let mw = minpath::min_weight(&set.0, t, &site, &init_of(init)?, end_time, model_of(model)?)?;
        write_out(out_value, mw.value, "out_value")?;
        write_out(out_exact, mw.exact, "out_exact")
    })
}

/// Runs the dual process from the well at the origin up to `until`.
///
/// # Safety
/// `set` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rsos_dual_run(
    set: *const RsosEventSet,
    until: f64,
    out: *mut *mut RsosDualTrajectory,
) -> RsosStatus {
    guard(|| {
        let set = deref(set, "set")?;
        let traj = dual::run_dual(&set.0, until)?;
        write_out(out, Box::into_raw(Box::new(RsosDualTrajectory(traj))), "out")
    })
}

/// # Safety
/// `traj` must be NULL or a handle that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn rsos_dual_free(traj: *mut RsosDualTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Minimum of the dual surface at the end of the run.
///
/// # Safety
/// `traj` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rsos_dual_final_min(
    traj: *const RsosDualTrajectory,
    out: *mut i64,
) -> RsosStatus {
    guard(|| write_out(out, deref(traj, "traj")?.0.final_min(), "out"))
}

/// Minimum of the dual surface at time `t`.
///
/// # Safety
/// `traj` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rsos_dual_min_at(
    traj: *const RsosDualTrajectory,
    t: f64,
    out: *mut i64,
) -> RsosStatus {
    guard(|| write_out(out, deref(traj, "traj")?.0.min_at(t), "out"))
}

/// Time at which the minimum first reaches `u`. `OutOfRange` when the run
/// ended first.
///
/// # Safety
/// `traj` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rsos_dual_hitting_time(
    traj: *const RsosDualTrajectory,
    u: u64,
    out: *mut f64,
) -> RsosStatus {
    guard(|| {
        let traj = &deref(traj, "traj")?.0;
        match dual::hitting_time(traj, u) {
            Some(t) => write_out(out, t, "out"),
            None => Err(Fail(
                RsosStatus::OutOfRange,
                format!("level {u} not reached by time {}", traj.until),
            )),
        }
    })
}

/// Whether the run never touched a face of its box.
///
/// # Safety
/// `traj` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rsos_dual_exact(
    traj: *const RsosDualTrajectory,
    out: *mut bool,
) -> RsosStatus {
    guard(|| write_out(out, deref(traj, "traj")?.0.exact, "out"))
}

/// Runs an experiment from `key = value` configuration text. The text must
/// name the experiment. With `write_outputs` the report files and manifest
/// land in the configured output directory. `out_json`, when not NULL,
/// receives the report as a JSON string.
///
/// # Safety
/// `config_text` must be a nul-terminated string, `out_passed` writable and
/// `out_json` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn rsos_experiment_run(
    config_text: *const c_char,
    jobs: usize,
    write_outputs: bool,
    out_passed: *mut bool,
    out_json: *mut *mut c_char,
) -> RsosStatus {
    guard(|| {
        let config = ExperimentConfig::parse(read_str(config_text, "config_text")?, None)?;
        let report = if write_outputs {
            run_experiment(&config, jobs)?.1
        } else {
            execute(&config, jobs)?
        };
        write_out(out_passed, report.passed(), "out_passed")?;
        if !out_json.is_null() {
            let json = serde_json::to_string(&report).expect("report serializes");
            out_json.write(c_string(json)?);
        }
        Ok(())
    })
}
