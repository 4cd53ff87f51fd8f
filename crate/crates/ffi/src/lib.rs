//! C ABI for the pkg-balance partitioners and simulator.
//!
//! Every entry point returns a [`PkgbStatus`]. On failure a message is kept
//! per thread and can be read with [`pkgb_last_error`]. Routers are opaque
//! handles created by [`pkgb_router_new`] and released by
//! [`pkgb_router_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pkg_balance::sim::{self, Router};
use pkg_balance::{
    imbalance, Error, Estimation, LoadVector, Message, PartitionerKind, RoutingPlan, RunConfig,
    Workload, WorkloadSpec,
};

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PkgbStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Arguments were rejected, e.g. zero workers or an unknown policy.
    InvalidArgument = 2,
    /// A workload file could not be read or parsed.
    Io = 3,
    /// The call panicked; the handle involved should be freed.
    Panic = 4,
}

/// Opaque routing state: true loads, partitioners and load estimates.
pub struct PkgbRouter {
    inner: Router,
}

/// Summary of a simulation run.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PkgbSummary {
    pub messages: u64,
    pub avg_imbalance: f64,
    pub normalized_avg: f64,
    pub final_imbalance: f64,
    pub max_load: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PkgbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PkgbStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("{what} must not be null"));
            PkgbStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_error(msg);
            PkgbStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            match e {
                Error::Usage(_) => PkgbStatus::InvalidArgument,
                Error::Io { .. } | Error::Ingest { .. } => PkgbStatus::Io,
            }
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            PkgbStatus::Panic
        }
    }
}

unsafe fn opt_str<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| Failure::Invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn req_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    opt_str(p, what)?.ok_or(Failure::Null(what))
}

fn non_null<T>(p: *const T, what: &'static str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::Null(what))
    } else {
        Ok(())
    }
}

unsafe fn parse_plan(
    partitioner: *const c_char,
    estimation: *const c_char,
    split: *const c_char,
) -> Result<RoutingPlan, Failure> {
    let kind: PartitionerKind = req_str(partitioner, "partitioner")?.parse()?;
    let estimation = opt_str(estimation, "estimation")?
        .map(str::parse::<Estimation>)
        .transpose()?;
    let split = match opt_str(split, "split")? {
        Some(s) => s.parse()?,
        None => Default::default(),
    };
    let plan = RoutingPlan {
        kind,
        estimation,
        split,
    };
    plan.validate()?;
    Ok(plan)
}

fn config(workers: usize, sources: usize, choices: usize, seed: u64) -> Result<RunConfig, Failure> {
    let c = RunConfig::new(workers, sources)
        .with_choices(choices)
        .with_seed(seed);
    c.validate()?;
    Ok(c)
}

/// Message describing the most recent failure on this thread, or null after a
/// successful call. The pointer stays valid until the next call on the same
/// thread.
#[no_mangle]
pub extern "C" fn pkgb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pkgb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a router.
///
/// `partitioner` is one of `kg`, `sg`, `potc`, `ongreedy`, `pkg`. `estimation`
/// (`global`, `local`, `probing:N`) applies to `pkg` only and may be null.
/// `split` (`shuffle`, `keyed`) may be null for shuffle.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pkgb_router_new(
    workers: usize,
    sources: usize,
    choices: usize,
    seed: u64,
    partitioner: *const c_char,
    estimation: *const c_char,
    split: *const c_char,
    out: *mut *mut PkgbRouter,
) -> PkgbStatus {
    guard(|| {
        non_null(out, "out")?;
        let plan = parse_plan(partitioner, estimation, split)?;
        let inner = Router::new(config(workers, sources, choices, seed)?, plan, None)?;
        *out = Box::into_raw(Box::new(PkgbRouter { inner }));
        Ok(())
    })
}

/// Releases a router. Null is ignored.
///
/// # Safety
/// `router` must come from [`pkgb_router_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pkgb_router_free(router: *mut PkgbRouter) {
    if !router.is_null() {
        drop(Box::from_raw(router));
    }
}

/// Routes the next message with `key`. The message's timestamp is the number
/// of messages routed so far, which picks its source under the configured
/// split. Either output pointer may be null.
///
/// # Safety
/// `router` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn pkgb_router_route(
    router: *mut PkgbRouter,
    key: u64,
    out_source: *mut usize,
    out_worker: *mut usize,
) -> PkgbStatus {
    guard(|| {
        non_null(router, "router")?;
        let r = &mut (*router).inner;
        let routed = r.route(&Message::new(r.processed(), key));
        if !out_source.is_null() {
            *out_source = routed.source;
        }
        if !out_worker.is_null() {
            *out_worker = routed.worker;
        }
        Ok(())
    })
}

/// Routes one message with `key` through an explicit `source`.
///
/// # Safety
/// `router` must be a live handle; `out_worker` may be null or writable.
#[no_mangle]
pub unsafe extern "C" fn pkgb_router_route_from(
    router: *mut PkgbRouter,
    source: usize,
    key: u64,
    out_worker: *mut usize,
) -> PkgbStatus {
    guard(|| {
        non_null(router, "router")?;
        let w = (*router).inner.route_from(source, key)?;
        if !out_worker.is_null() {
            *out_worker = w;
        }
        Ok(())
    })
}

/// Number of workers of the router.
///
/// # Safety
/// `router` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pkgb_router_workers(
    router: *const PkgbRouter,
    out: *mut usize,
) -> PkgbStatus {
    guard(|| {
        non_null(router, "router")?;
        non_null(out, "out")?;
        *out = (*router).inner.loads().workers();
        Ok(())
    })
}

/// Copies the true worker loads into `buf`, which must hold at least as many
/// entries as there are workers.
///
/// # Safety
/// `router` must be a live handle; `buf` must be writable for `len` entries.
#[no_mangle]
pub unsafe extern "C" fn pkgb_router_loads(
    router: *const PkgbRouter,
    buf: *mut u64,
    len: usize,
) -> PkgbStatus {
    guard(|| {
        non_null(router, "router")?;
        non_null(buf, "buf")?;
        let counts = (*router).inner.loads().counts();
        if len < counts.len() {
            return Err(Failure::Invalid(format!(
                "buffer of {len} entries is smaller than {} workers",
                counts.len()
            )));
        }
        ptr::copy_nonoverlapping(counts.as_ptr(), buf, counts.len());
        Ok(())
    })
}

/// Current imbalance `max - mean` of the router's true loads.
///
/// # Safety
/// `router` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pkgb_router_imbalance(
    router: *const PkgbRouter,
    out: *mut f64,
) -> PkgbStatus {
    guard(|| {
        non_null(router, "router")?;
        non_null(out, "out")?;
        *out = imbalance((*router).inner.loads())?;
        Ok(())
    })
}

/// Imbalance `max - mean` of `len` load counters.
///
/// # Safety
/// `loads` must be readable for `len` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pkgb_imbalance(
    loads: *const u64,
    len: usize,
    out: *mut f64,
) -> PkgbStatus {
    guard(|| {
        non_null(loads, "loads")?;
        non_null(out, "out")?;
        let v = LoadVector::from_counts(std::slice::from_raw_parts(loads, len).to_vec());
        *out = imbalance(&v)?;
        Ok(())
    })
}

/// Runs a whole simulation over a synthetic workload spec such as
/// `lognormal:1.789,2.366,16384,1000000`, seeded by `seed` for both the
/// workload and the hash functions.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pkgb_simulate(
    workload: *const c_char,
    workers: usize,
    sources: usize,
    choices: usize,
    seed: u64,
    partitioner: *const c_char,
    estimation: *const c_char,
    split: *const c_char,
    out: *mut PkgbSummary,
) -> PkgbStatus {
    guard(|| {
        non_null(out, "out")?;
        let spec = WorkloadSpec::parse(req_str(workload, "workload")?, seed)?;
        let plan = parse_plan(partitioner, estimation, split)?;
        let w = Workload::load(spec)?;
        let r = sim::run(&config(workers, sources, choices, seed)?, &plan, &w, false)?;
        *out = PkgbSummary {
            messages: r.messages,
            avg_imbalance: r.avg_imbalance,
            normalized_avg: r.normalized_avg,
            final_imbalance: r.final_imbalance(),
            max_load: r.final_loads.max(),
        };
        Ok(())
    })
}
