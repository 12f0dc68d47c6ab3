//! C interface to the relaycache model.
//!
//! Every function returns an [`RcStatus`]. On failure, a message describing
//! the last error on the calling thread is available from
//! [`rc_last_error_message`]. Models are opaque handles created by
//! [`rc_model_from_json`] and released with [`rc_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use relaycache::{
    oracle, sim, throughput, Error, ExperimentConfig, Node, NodeSet, Scenario, SlotSemantics,
    ThroughputReport,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcStatus {
    RcOk = 0,
    RcNullPointer = 1,
    RcInvalidConfig = 2,
    RcNumerical = 3,
    RcBufferTooSmall = 4,
    RcInvalidArgument = 5,
    RcIo = 6,
    RcPanic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcSemantics {
    /// A cache hit is not served while the relay is forwarding.
    RcBlocked = 0,
    /// A cache hit on a busy relay is fetched from the data center instead.
    RcDataCenter = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcNode {
    RcU1 = 0,
    RcR = 1,
    RcBs = 2,
    RcD = 3,
    RcU2 = 4,
}

/// Throughputs in packets per slot.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RcThroughput {
    pub t_direct: f64,
    pub t_relayed: f64,
    pub t_noncacheable: f64,
    pub t_cacheable: f64,
    pub t_network: f64,
}

impl From<ThroughputReport> for RcThroughput {
    fn from(r: ThroughputReport) -> Self {
        RcThroughput {
            t_direct: r.t_direct,
            t_relayed: r.t_relayed,
            t_noncacheable: r.t_noncacheable,
            t_cacheable: r.t_cacheable,
            t_network: r.t_network,
        }
    }
}

/// Opaque model handle.
pub struct RcModel {
    config: ExperimentConfig,
    scenario: Scenario,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> RcStatus {
    match e.exit_code() {
        3 => RcStatus::RcNumerical,
        1 => RcStatus::RcIo,
        _ => RcStatus::RcInvalidConfig,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (RcStatus, String)>) -> RcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RcStatus::RcOk
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RcStatus::RcPanic
        }
    }
}

fn lib(e: Error) -> (RcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (RcStatus, String) {
    (RcStatus::RcNullPointer, format!("{what} is null"))
}

unsafe fn handle<'a>(m: *const RcModel) -> Result<&'a RcModel, (RcStatus, String)> {
    m.as_ref().ok_or_else(|| null("model"))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (RcStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

fn slot_semantics(s: RcSemantics) -> SlotSemantics {
    match s {
        RcSemantics::RcBlocked => SlotSemantics::Blocked,
        RcSemantics::RcDataCenter => SlotSemantics::DataCenter,
    }
}

fn node(n: RcNode) -> Node {
    match n {
        RcNode::RcU1 => Node::U1,
        RcNode::RcR => Node::R,
        RcNode::RcBs => Node::BS,
        RcNode::RcD => Node::D,
        RcNode::RcU2 => Node::U2,
    }
}

/// Parses a JSON experiment configuration and stores a new model in `*out_model`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_model_from_json(
    json: *const c_char,
    out_model: *mut *mut RcModel,
) -> RcStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        *slot = ptr::null_mut();
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| (RcStatus::RcInvalidArgument, "json is not UTF-8".to_string()))?;
        let config = ExperimentConfig::from_json(text).map_err(lib)?;
        let scenario = config.resolve().map_err(lib)?;
        config.sim.validate().map_err(lib)?;
        *slot = Box::into_raw(Box::new(RcModel { config, scenario }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`rc_model_from_json`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rc_model_free(model: *mut RcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Queue capacity `B` of the model.
///
/// # Safety
/// `model` must be a live handle; `out_size` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_model_queue_size(
    model: *const RcModel,
    out_size: *mut usize,
) -> RcStatus {
    guard(|| {
        *out(out_size, "out_size")? = handle(model)?.scenario.cache.queue_size;
        Ok(())
    })
}

/// Closed-form throughputs.
///
/// # Safety
/// `model` must be a live handle; `out_report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_model_analytic(
    model: *const RcModel,
    out_report: *mut RcThroughput,
) -> RcStatus {
    guard(|| {
        let m = handle(model)?;
        let slot = out(out_report, "out_report")?;
        let s = &m.scenario;
        let a = throughput::analyze(&s.probs, &s.traffic, s.cache.queue_size).map_err(lib)?;
        *slot = a.report.into();
        Ok(())
    })
}

/// Throughputs from exact enumeration of slot events.
///
/// # Safety
/// `model` must be a live handle; `out_report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_model_oracle(
    model: *const RcModel,
    semantics: RcSemantics,
    out_report: *mut RcThroughput,
) -> RcStatus {
    guard(|| {
        let m = handle(model)?;
        let slot = out(out_report, "out_report")?;
        let s = &m.scenario;
        let r = oracle::oracle_report(&s.budget, &s.traffic, &s.cache, slot_semantics(semantics))
            .map_err(lib)?;
        *slot = r.into();
        Ok(())
    })
}

/// Simulated throughputs. `slots` and `seed` replace the configured values;
/// `out_ci` (optional) receives 99% confidence half-widths.
///
/// # Safety
/// `model` must be a live handle; `out_report` must be writable; `out_ci` may be null.
#[no_mangle]
pub unsafe extern "C" fn rc_model_simulate(
    model: *const RcModel,
    semantics: RcSemantics,
    slots: u64,
    seed: u64,
    out_report: *mut RcThroughput,
    out_ci: *mut RcThroughput,
) -> RcStatus {
    guard(|| {
        let m = handle(model)?;
        let slot = out(out_report, "out_report")?;
        let s = &m.scenario;
        let mut cfg = m.config.sim.clone();
        cfg.slots = slots;
        cfg.seed = seed;
        cfg.semantics = slot_semantics(semantics);
        if cfg.warmup.is_some_and(|w| w >= slots) {
            cfg.warmup = None;
        }
        let r = sim::run(&s.budget, &s.traffic, s.cache.queue_size, &cfg).map_err(lib)?;
        *slot = r.report.into();
        if let Some(ci) = out_ci.as_mut() {
            let [t_direct, t_relayed, t_noncacheable, t_cacheable, t_network] =
                r.ci_halfwidth.as_array();
            *ci = RcThroughput {
                t_direct,
                t_relayed,
                t_noncacheable,
                t_cacheable,
                t_network,
            };
        }
        Ok(())
    })
}

/// Closed-form stationary queue distribution. Writes `B + 1` values into `buf`
/// and the count into `*out_len`; with a short buffer, returns
/// `RC_BUFFER_TOO_SMALL` and only sets `*out_len`.
///
/// # Safety
/// `model` must be a live handle; `buf` must hold `len` doubles (may be null if `len` is 0);
/// `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_model_steady_state(
    model: *const RcModel,
    buf: *mut f64,
    len: usize,
    out_len: *mut usize,
) -> RcStatus {
    guard(|| {
        let m = handle(model)?;
        let n_out = out(out_len, "out_len")?;
        let s = &m.scenario;
        let a = throughput::analyze(&s.probs, &s.traffic, s.cache.queue_size).map_err(lib)?;
        let pi = a.steady_state.pi;
        *n_out = pi.len();
        if len < pi.len() {
            return Err((
                RcStatus::RcBufferTooSmall,
                format!("buffer holds {len} values, need {}", pi.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, pi.len()).copy_from_slice(&pi);
        Ok(())
    })
}

/// Success probability of `tx -> rx` while the nodes in `active_mask`
/// (bit `i` = node `i` of [`RcNode`]) transmit. `tx` must be active.
///
/// # Safety
/// `model` must be a live handle; `out_prob` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_success_prob(
    model: *const RcModel,
    tx: RcNode,
    rx: RcNode,
    active_mask: u8,
    out_prob: *mut f64,
) -> RcStatus {
    guard(|| {
        let m = handle(model)?;
        let slot = out(out_prob, "out_prob")?;
        if active_mask >= 1 << Node::ALL.len() {
            return Err((
                RcStatus::RcInvalidArgument,
                format!("active_mask {active_mask:#x} names unknown nodes"),
            ));
        }
        let active = NodeSet::from_bits(active_mask);
        *slot = m
            .scenario
            .budget
            .success_prob(node(tx), node(rx), active)
            .map_err(|e| (RcStatus::RcInvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Message for the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn rc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}
