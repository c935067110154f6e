//! C ABI over `ergolab`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` /
//! `*_from_*` functions and released by the matching `*_free`. Every
//! fallible call returns an [`ErgolabStatus`]; on failure the message is
//! kept per thread and can be read with [`ergolab_last_error`]. Strings are
//! returned by copying into caller buffers: the required size including the
//! terminating NUL is always written to `needed`, and a short buffer yields
//! `ERGOLAB_STATUS_BUFFER_TOO_SMALL`.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ergolab::experiments::{self, ExperimentConfig, ExperimentKind, Outcome, ResultTable};
use ergolab::limit_laws;
use ergolab::maps::{visit_times, Counters, PartitionRule};
use ergolab::transfer::transfer_apply;
use ergolab::{Error, Interval, IntervalMapSystem};

/// Result codes. Zero is success; codes from 100 up mirror library errors.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErgolabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    BufferTooSmall = 3,
    IndexOutOfBounds = 4,
    Panic = 5,
    PartitionBoundary = 100,
    OutsideDomain = 101,
    OutsideImage = 102,
    NoConvergence = 103,
    InvalidGamma = 104,
    ReturnCapExceeded = 105,
    Reducible = 106,
    AccuracyLoss = 107,
    InsufficientData = 108,
    OutOfRange = 109,
    DegenerateWindow = 110,
    TruncationTooCoarse = 111,
    EmptyCylinder = 112,
    PrecisionFloor = 113,
    InvalidArgument = 114,
    Config = 115,
    Io = 116,
}

impl From<&Error> for ErgolabStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::PointOnPartitionBoundary { .. } => ErgolabStatus::PartitionBoundary,
            Error::OutsideDomain { .. } => ErgolabStatus::OutsideDomain,
            Error::OutsideImage { .. } => ErgolabStatus::OutsideImage,
            Error::NoConvergence(_) => ErgolabStatus::NoConvergence,
            Error::InvalidGamma(_) => ErgolabStatus::InvalidGamma,
            Error::ReturnCapExceeded { .. } => ErgolabStatus::ReturnCapExceeded,
            Error::Reducible(_) => ErgolabStatus::Reducible,
            Error::NumericalAccuracyLoss { .. } => ErgolabStatus::AccuracyLoss,
            Error::InsufficientData(_) => ErgolabStatus::InsufficientData,
            Error::OutOfRange { .. } => ErgolabStatus::OutOfRange,
            Error::DegenerateWindow(_) => ErgolabStatus::DegenerateWindow,
            Error::TruncationTooCoarse { .. } => ErgolabStatus::TruncationTooCoarse,
            Error::EmptyCylinder => ErgolabStatus::EmptyCylinder,
            Error::PrecisionFloor { .. } => ErgolabStatus::PrecisionFloor,
            Error::InvalidArgument(_) => ErgolabStatus::InvalidArgument,
            Error::Config(_) => ErgolabStatus::Config,
            Error::Io(_) => ErgolabStatus::Io,
        }
    }
}

/// Verdict outcome of a result row.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErgolabOutcome {
    Pass = 0,
    Fail = 1,
    Info = 2,
    Insufficient = 3,
}

impl From<Outcome> for ErgolabOutcome {
    fn from(o: Outcome) -> Self {
        match o {
            Outcome::Pass => ErgolabOutcome::Pass,
            Outcome::Fail => ErgolabOutcome::Fail,
            Outcome::Info => ErgolabOutcome::Info,
            Outcome::Insufficient => ErgolabOutcome::Insufficient,
        }
    }
}

/// Numeric part of a result row.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgolabRow {
    pub n: u64,
    pub value: f64,
    pub se: f64,
    pub outcome: ErgolabOutcome,
}

/// Interval map handle.
pub struct ErgolabMap(IntervalMapSystem);

/// Experiment configuration handle.
pub struct ErgolabConfig(ExperimentConfig);

/// Result table of one experiment run.
pub struct ErgolabTable {
    table: ResultTable,
    kind: ExperimentKind,
    config: ExperimentConfig,
}

/// Real function callback used by the transfer operator.
pub type ErgolabRealFn = Option<extern "C" fn(x: f64, user_data: *mut c_void) -> f64>;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(ErgolabStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure((&e).into(), e.to_string())
    }
}

fn fail(status: ErgolabStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> ErgolabStatus {
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(fail(ErgolabStatus::Panic, msg))
    });
    match result {
        Ok(()) => {
            LAST_ERROR.with(|e| e.borrow_mut().clear());
            ErgolabStatus::Ok
        }
        Err(Failure(status, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = msg);
            status
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(ErgolabStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(ErgolabStatus::NullPointer, format!("{what} is null")))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(ErgolabStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(ErgolabStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(ErgolabStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(ErgolabStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Copy `s` with a NUL terminator into `buf` of `len` bytes.
unsafe fn copy_string(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), Failure> {
    let size = s.len() + 1;
    if let Some(n) = needed.as_mut() {
        *n = size;
    }
    if buf.is_null() || len < size {
        return Err(fail(ErgolabStatus::BufferTooSmall, format!("buffer of {len} bytes, {size} needed")));
    }
    std::ptr::copy_nonoverlapping(s.as_ptr() as *const c_char, buf, s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

fn into_handle<T>(value: T, dst: &mut *mut T) {
    *dst = Box::into_raw(Box::new(value));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ergolab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failed call on this thread (empty after a success).
///
/// # Safety
/// `buf` must point to `len` writable bytes or be null; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn ergolab_last_error(buf: *mut c_char, len: usize, needed: *mut usize) -> ErgolabStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    match copy_string(&msg, buf, len, needed) {
        Ok(()) => ErgolabStatus::Ok,
        Err(Failure(status, _)) => status,
    }
}

/// Build a map by family name: `boole_like`, `thaler` (uses `gamma` and the
/// midpoint partition rule), `doubling` or `identity`.
///
/// # Safety
/// `family` must be a NUL-terminated string; `map` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ergolab_map_new(family: *const c_char, gamma: f64, map: *mut *mut ErgolabMap) -> ErgolabStatus {
    guard(|| {
        let dst = out(map, "map")?;
        let system = match text(family, "family")? {
            "boole_like" => IntervalMapSystem::boole_like(),
            "thaler" => IntervalMapSystem::thaler(gamma, PartitionRule::Midpoint)?,
            "doubling" => IntervalMapSystem::doubling(),
            "identity" => IntervalMapSystem::identity(),
            other => return Err(fail(ErgolabStatus::InvalidArgument, format!("unknown map family `{other}`"))),
        };
        into_handle(ErgolabMap(system), dst);
        Ok(())
    })
}

/// # Safety
/// `map` must come from [`ergolab_map_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ergolab_map_free(map: *mut ErgolabMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// `T(x)` and the index of the branch containing `x`.
///
/// # Safety
/// `map` must be a live handle and `y`, `branch` writable.
#[no_mangle]
pub unsafe extern "C" fn ergolab_map_evaluate(
    map: *const ErgolabMap,
    x: f64,
    y: *mut f64,
    branch: *mut usize,
) -> ErgolabStatus {
    guard(|| {
        let m = deref(map, "map")?;
        let (fx, i) = m.0.evaluate(x)?;
        *out(y, "y")? = fx;
        *out(branch, "branch")? = i;
        Ok(())
    })
}

/// Reference density `h(x)` of the map.
///
/// # Safety
/// `map` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn ergolab_map_density(map: *const ErgolabMap, x: f64, value: *mut f64) -> ErgolabStatus {
    guard(|| {
        let m = deref(map, "map")?;
        *out(value, "value")? = m.0.ref_density(x);
        Ok(())
    })
}

/// Orbit `x_1, ..., x_len` of `x0` written into `orbit`.
///
/// # Safety
/// `map` must be a live handle; `orbit` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ergolab_map_orbit(map: *const ErgolabMap, x0: f64, orbit: *mut f64, len: usize) -> ErgolabStatus {
    guard(|| {
        let m = deref(map, "map")?;
        let dst = slice_mut(orbit, len, "orbit")?;
        let mut counters = Counters::default();
        let mut x = x0;
        for v in dst.iter_mut() {
            x = m.0.step(x, &mut counters)?;
            *v = x;
        }
        Ok(())
    })
}

/// Number of times `t < n` with `T^t x0` in `(lo, hi)`.
///
/// # Safety
/// `map` must be a live handle and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn ergolab_map_occupation(
    map: *const ErgolabMap,
    x0: f64,
    lo: f64,
    hi: f64,
    n: u64,
    count: *mut u64,
) -> ErgolabStatus {
    guard(|| {
        let m = deref(map, "map")?;
        let set = Interval::new(lo, hi)?;
        let (visits, _) = visit_times(&m.0, x0, set, n, true)?;
        *out(count, "count")? = visits.len() as u64;
        Ok(())
    })
}

/// Transfer operator applied to `f` at `len` points.
///
/// # Safety
/// `map` must be a live handle; `points` and `values` must hold `len`
/// doubles; `f` is called with `user_data` on the calling thread.
#[no_mangle]
pub unsafe extern "C" fn ergolab_transfer_apply(
    map: *const ErgolabMap,
    f: ErgolabRealFn,
    user_data: *mut c_void,
    points: *const f64,
    values: *mut f64,
    len: usize,
) -> ErgolabStatus {
    guard(|| {
        let m = deref(map, "map")?;
        let f = f.ok_or_else(|| fail(ErgolabStatus::NullPointer, "f is null"))?;
        let pts = slice(points, len, "points")?;
        let dst = slice_mut(values, len, "values")?;
        let res = transfer_apply(&m.0, &|x| f(x, user_data), pts)?;
        dst.copy_from_slice(&res.values);
        Ok(())
    })
}

/// `E Y^p` for the unit-mean Mittag-Leffler law of order `gamma`.
///
/// # Safety
/// `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ergolab_ml_moment(gamma: f64, p: u32, value: *mut f64) -> ErgolabStatus {
    guard(|| {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidGamma(gamma).into());
        }
        *out(value, "value")? = limit_laws::ml_moment(gamma, p);
        Ok(())
    })
}

/// Mittag-Leffler distribution function.
///
/// # Safety
/// `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ergolab_ml_cdf(gamma: f64, y: f64, value: *mut f64) -> ErgolabStatus {
    guard(|| {
        *out(value, "value")? = limit_laws::ml_cdf(gamma, y)?;
        Ok(())
    })
}

/// Positive stable distribution function.
///
/// # Safety
/// `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ergolab_stable_cdf(gamma: f64, z: f64, value: *mut f64) -> ErgolabStatus {
    guard(|| {
        *out(value, "value")? = limit_laws::stable_cdf(gamma, z)?;
        Ok(())
    })
}

/// `E exp(-t Z)` for the positive stable law.
///
/// # Safety
/// `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ergolab_stable_laplace(gamma: f64, t: f64, value: *mut f64) -> ErgolabStatus {
    guard(|| {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidGamma(gamma).into());
        }
        *out(value, "value")? = limit_laws::stable_laplace(gamma, t);
        Ok(())
    })
}

/// Constants `K` and `C = K^(-1/gamma)` of the one-sided LIL.
///
/// # Safety
/// `k` and `c` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ergolab_lil_constants(gamma: f64, k: *mut f64, c: *mut f64) -> ErgolabStatus {
    guard(|| {
        let l = limit_laws::lil_constants(gamma)?;
        *out(k, "k")? = l.k;
        *out(c, "c")? = l.c;
        Ok(())
    })
}

/// Parse and validate a TOML experiment config.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `config` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ergolab_config_from_toml(toml: *const c_char, config: *mut *mut ErgolabConfig) -> ErgolabStatus {
    guard(|| {
        let dst = out(config, "config")?;
        let cfg = ExperimentConfig::from_toml(text(toml, "toml")?)?;
        into_handle(ErgolabConfig(cfg), dst);
        Ok(())
    })
}

/// Load a TOML experiment config from a file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `config` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ergolab_config_load(path: *const c_char, config: *mut *mut ErgolabConfig) -> ErgolabStatus {
    guard(|| {
        let dst = out(config, "config")?;
        let cfg = ExperimentConfig::load(Path::new(text(path, "path")?))?;
        into_handle(ErgolabConfig(cfg), dst);
        Ok(())
    })
}

/// Override the master seed.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ergolab_config_set_seed(config: *mut ErgolabConfig, seed: u64) -> ErgolabStatus {
    guard(|| {
        out(config, "config")?.0.run.seed = seed;
        Ok(())
    })
}

/// Hex digest identifying the config.
///
/// # Safety
/// `config` must be a live handle; `buf` must hold `len` bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn ergolab_config_digest(
    config: *const ErgolabConfig,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> ErgolabStatus {
    guard(|| copy_string(&deref(config, "config")?.0.digest(), buf, len, needed))
}

/// # Safety
/// `config` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ergolab_config_free(config: *mut ErgolabConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Run the named experiment (`dk`, `stable`, ...). `threads = 0` uses the
/// global worker pool.
///
/// # Safety
/// `config` must be a live handle, `experiment` a NUL-terminated string and
/// `table` writable.
#[no_mangle]
pub unsafe extern "C" fn ergolab_run(
    config: *const ErgolabConfig,
    experiment: *const c_char,
    threads: usize,
    table: *mut *mut ErgolabTable,
) -> ErgolabStatus {
    guard(|| {
        let cfg = &deref(config, "config")?.0;
        let dst = out(table, "table")?;
        let kind: ExperimentKind = text(experiment, "experiment")?.parse()?;
        let result = if threads == 0 { experiments::run(kind, cfg)? } else { experiments::run_with_threads(kind, cfg, threads)? };
        into_handle(ErgolabTable { table: result, kind, config: cfg.clone() }, dst);
        Ok(())
    })
}

/// Number of rows.
///
/// # Safety
/// `table` must be a live handle and `len` writable.
#[no_mangle]
pub unsafe extern "C" fn ergolab_table_len(table: *const ErgolabTable, len: *mut usize) -> ErgolabStatus {
    guard(|| {
        *out(len, "len")? = deref(table, "table")?.table.rows.len();
        Ok(())
    })
}

unsafe fn row_of<'a>(table: *const ErgolabTable, index: usize) -> Result<&'a experiments::Row, Failure> {
    let t = deref(table, "table")?;
    t.table
        .rows
        .get(index)
        .ok_or_else(|| fail(ErgolabStatus::IndexOutOfBounds, format!("row {index} of {}", t.table.rows.len())))
}

/// Numeric fields of row `index`.
///
/// # Safety
/// `table` must be a live handle and `row` writable.
#[no_mangle]
pub unsafe extern "C" fn ergolab_table_row(table: *const ErgolabTable, index: usize, row: *mut ErgolabRow) -> ErgolabStatus {
    guard(|| {
        let r = row_of(table, index)?;
        *out(row, "row")? = ErgolabRow { n: r.n, value: r.value, se: r.se, outcome: r.verdict.outcome.into() };
        Ok(())
    })
}

/// Statistic name of row `index`.
///
/// # Safety
/// `table` must be a live handle; `buf` must hold `len` bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn ergolab_table_statistic(
    table: *const ErgolabTable,
    index: usize,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> ErgolabStatus {
    guard(|| copy_string(&row_of(table, index)?.statistic, buf, len, needed))
}

/// Verdict of row `index` rendered as `outcome:RULE`.
///
/// # Safety
/// `table` must be a live handle; `buf` must hold `len` bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn ergolab_table_verdict(
    table: *const ErgolabTable,
    index: usize,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> ErgolabStatus {
    guard(|| copy_string(&row_of(table, index)?.verdict.to_string(), buf, len, needed))
}

/// True iff no row failed or lacked data.
///
/// # Safety
/// `table` must be a live handle and `all_pass` writable.
#[no_mangle]
pub unsafe extern "C" fn ergolab_table_all_pass(table: *const ErgolabTable, all_pass: *mut bool) -> ErgolabStatus {
    guard(|| {
        *out(all_pass, "all_pass")? = deref(table, "table")?.table.all_pass();
        Ok(())
    })
}

/// Write one CSV per statistic and `run_metadata.toml` into `dir`.
///
/// # Safety
/// `table` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ergolab_table_write(table: *const ErgolabTable, dir: *const c_char) -> ErgolabStatus {
    guard(|| {
        let t = deref(table, "table")?;
        let meta = experiments::metadata(t.kind, &t.config, &t.table);
        t.table.write_dir(Path::new(text(dir, "dir")?), &meta)?;
        Ok(())
    })
}

/// # Safety
/// `table` must come from [`ergolab_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ergolab_table_free(table: *mut ErgolabTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}
