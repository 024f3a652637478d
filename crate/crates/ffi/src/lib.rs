//! C ABI over the neuromimic workbench.
//!
//! Every entry point returns an [`NmStatus`]. Objects cross the boundary as
//! opaque handles created by a `*_new`/`*_from_*` function and released with
//! the matching `*_free`. On failure the message is kept per thread and can be
//! copied out with [`nm_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use neuromimic::defenses::{self, AnomalyModel, Origin, SecureLog, Update};
use neuromimic::snn::{self, NetworkState, SimConfig};
use neuromimic::telemetry::WindowMetrics;
use neuromimic::Error;

/// Status codes shared by all functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Parse = 4,
    /// A secure log failed verification.
    VerifyFailed = 5,
    Runtime = 6,
    /// The output buffer is too small; the required size was still written.
    BufferTooSmall = 7,
    Panic = 8,
}

/// Simulated network plus the configuration it was built with.
pub struct NmNetwork {
    state: NetworkState,
    config: SimConfig,
}

/// Fitted anomaly model.
pub struct NmAnomalyModel(AnomalyModel);

/// Append-only signed update log.
pub struct NmSecureLog(SecureLog);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: NmStatus, msg: impl Into<String>) -> NmStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> NmStatus {
    let status = match e {
        Error::Config { .. } => NmStatus::Config,
        Error::Parse(_) => NmStatus::Parse,
        Error::Usage(_) | Error::Structure(_) => NmStatus::InvalidArgument,
        _ => NmStatus::Runtime,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> NmStatus) -> NmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(NmStatus::Panic, "panic inside neuromimic"),
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(NmStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

/// # Safety
/// `ptr` must be null or valid for `len` reads.
unsafe fn bytes<'a>(ptr: *const u8, len: usize) -> Option<&'a [u8]> {
    if len == 0 {
        Some(&[])
    } else if ptr.is_null() {
        None
    } else {
        Some(slice::from_raw_parts(ptr, len))
    }
}

/// Copies the last error message of this thread into `buf` as a
/// NUL-terminated string, truncating if needed. Returns the untruncated
/// message length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn nm_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Derives the 32-byte session key for a root seed.
///
/// # Safety
/// `out` must be valid for 32 writes.
#[no_mangle]
pub unsafe extern "C" fn nm_session_key(root_seed: u64, out: *mut u8) -> NmStatus {
    non_null!(out);
    let key = defenses::session_key(root_seed);
    ptr::copy_nonoverlapping(key.as_ptr(), out, key.len());
    NmStatus::Ok
}

/// Builds a network of `n_neurons` with default constants and seeded weights.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn nm_network_new(n_neurons: usize, seed: u64, out: *mut *mut NmNetwork) -> NmStatus {
    non_null!(out);
    guard(|| {
        let config = SimConfig {
            n_neurons,
            seed,
            ..SimConfig::default()
        };
        match config.validate().and_then(|_| snn::init_network(&config)) {
            Ok(state) => {
                *out = Box::into_raw(Box::new(NmNetwork { state, config }));
                NmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Builds a network from a TOML `SimConfig` table.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn nm_network_from_toml(toml: *const c_char, out: *mut *mut NmNetwork) -> NmStatus {
    non_null!(toml, out);
    guard(|| {
        let text = match CStr::from_ptr(toml).to_str() {
            Ok(t) => t,
            Err(_) => return fail(NmStatus::Parse, "config is not UTF-8"),
        };
        let config: SimConfig = match ::toml::from_str(text) {
            Ok(c) => c,
            Err(e) => return fail(NmStatus::Parse, e.to_string()),
        };
        match config.validate().and_then(|_| snn::init_network(&config)) {
            Ok(state) => {
                *out = Box::into_raw(Box::new(NmNetwork { state, config }));
                NmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `net` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nm_network_free(net: *mut NmNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` must be a live handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nm_network_size(net: *const NmNetwork, out: *mut usize) -> NmStatus {
    non_null!(net, out);
    *out = (*net).state.n();
    NmStatus::Ok
}

/// Reads the weight of synapse `pre -> post`.
///
/// # Safety
/// `net` must be a live handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nm_network_weight(net: *const NmNetwork, pre: usize, post: usize, out: *mut f64) -> NmStatus {
    non_null!(net, out);
    let n = (*net).state.n();
    if pre >= n || post >= n {
        return fail(NmStatus::InvalidArgument, format!("synapse ({pre}, {post}) outside {n} neurons"));
    }
    *out = (*net).state.weight(pre, post);
    NmStatus::Ok
}

/// Advances one time step with `current[0..n]` injected. Spiking neuron ids
/// are written to `spikes` (capacity `cap`) and their count to `n_spikes`. If
/// the buffer is short the step still happens and `BufferTooSmall` is
/// returned.
///
/// # Safety
/// `net` must be a live handle; `current` valid for `n_current` reads;
/// `spikes` null or valid for `cap` writes; `n_spikes` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nm_network_step(
    net: *mut NmNetwork,
    current: *const f64,
    n_current: usize,
    spikes: *mut u32,
    cap: usize,
    n_spikes: *mut usize,
) -> NmStatus {
    non_null!(net, n_spikes);
    guard(|| {
        if current.is_null() && n_current > 0 {
            return fail(NmStatus::NullPointer, "current is null");
        }
        let current: &[f64] = if n_current == 0 { &[] } else { slice::from_raw_parts(current, n_current) };
        let net = &mut *net;
        let fired = match snn::step(&mut net.state, current, &net.config) {
            Ok(f) => f,
            Err(e) => return from_error(e),
        };
        snn::stdp_apply(&mut net.state, &fired, &net.config);
        *n_spikes = fired.len();
        if fired.len() > cap || (spikes.is_null() && !fired.is_empty()) {
            return fail(NmStatus::BufferTooSmall, format!("{} spikes, capacity {cap}", fired.len()));
        }
        if !fired.is_empty() {
            ptr::copy_nonoverlapping(fired.as_ptr(), spikes, fired.len());
        }
        NmStatus::Ok
    })
}

/// Parses an anomaly model from its JSON export.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn nm_anomaly_model_from_json(json: *const c_char, out: *mut *mut NmAnomalyModel) -> NmStatus {
    non_null!(json, out);
    guard(|| {
        let text = match CStr::from_ptr(json).to_str() {
            Ok(t) => t,
            Err(_) => return fail(NmStatus::Parse, "model is not UTF-8"),
        };
        match AnomalyModel::from_json(text) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(NmAnomalyModel(m)));
                NmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nm_anomaly_model_free(model: *mut NmAnomalyModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Scores one window. `flagged` receives 1 when the score exceeds the
/// model's threshold, else 0.
///
/// # Safety
/// `model` must be a live handle; `score` and `flagged` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nm_anomaly_model_detect(
    model: *const NmAnomalyModel,
    spike_frequency_hz: f64,
    weight_change_pct: f64,
    latency_ms: f64,
    score: *mut f64,
    flagged: *mut i32,
) -> NmStatus {
    non_null!(model, score, flagged);
    let m = WindowMetrics {
        spike_frequency_hz,
        weight_change_pct,
        latency_ms,
    };
    let (s, f) = (*model).0.detect(&m);
    *score = s;
    *flagged = i32::from(f);
    NmStatus::Ok
}

/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn nm_secure_log_new(out: *mut *mut NmSecureLog) -> NmStatus {
    non_null!(out);
    *out = Box::into_raw(Box::new(NmSecureLog(SecureLog::new())));
    NmStatus::Ok
}

/// Parses the binary log format.
///
/// # Safety
/// `data` must be valid for `len` reads; `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn nm_secure_log_from_bytes(data: *const u8, len: usize, out: *mut *mut NmSecureLog) -> NmStatus {
    non_null!(out);
    guard(|| {
        let Some(data) = (unsafe { bytes(data, len) }) else {
            return fail(NmStatus::NullPointer, "data is null");
        };
        match SecureLog::from_bytes(data) {
            Ok(l) => {
                *out = Box::into_raw(Box::new(NmSecureLog(l)));
                NmStatus::Ok
            }
            Err(e) => fail(NmStatus::Parse, e.to_string()),
        }
    })
}

/// # Safety
/// `log` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nm_secure_log_free(log: *mut NmSecureLog) {
    if !log.is_null() {
        drop(Box::from_raw(log));
    }
}

/// # Safety
/// `log` must be a live handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nm_secure_log_len(log: *const NmSecureLog, out: *mut usize) -> NmStatus {
    non_null!(log, out);
    *out = (*log).0.len();
    NmStatus::Ok
}

/// Appends a signed record. `origin` is 0 for plasticity, 1 for an external
/// write.
///
/// # Safety
/// `log` must be a live handle; `key` valid for `key_len` reads.
#[no_mangle]
pub unsafe extern "C" fn nm_secure_log_append(
    log: *mut NmSecureLog,
    pre: u32,
    post: u32,
    delta_w: f64,
    t_sim: f64,
    origin: u8,
    key: *const u8,
    key_len: usize,
) -> NmStatus {
    non_null!(log);
    let Some(key) = bytes(key, key_len) else {
        return fail(NmStatus::NullPointer, "key is null");
    };
    if key.is_empty() {
        return fail(NmStatus::InvalidArgument, "empty key");
    }
    let origin = match origin {
        0 => Origin::Stdp,
        1 => Origin::External,
        o => return fail(NmStatus::InvalidArgument, format!("unknown origin {o}")),
    };
    let update = Update {
        i: pre,
        j: post,
        delta_w,
        t_sim,
        origin,
    };
    (*log).0.append(&update, key);
    NmStatus::Ok
}

/// Serializes the log. With `buf` null or `cap` short, only `len` is
/// written and `BufferTooSmall` returned.
///
/// # Safety
/// `log` must be a live handle; `buf` null or valid for `cap` writes; `len`
/// valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nm_secure_log_to_bytes(
    log: *const NmSecureLog,
    buf: *mut u8,
    cap: usize,
    len: *mut usize,
) -> NmStatus {
    non_null!(log, len);
    let b = (*log).0.to_bytes();
    *len = b.len();
    if buf.is_null() || cap < b.len() {
        return fail(NmStatus::BufferTooSmall, format!("log needs {} bytes", b.len()));
    }
    ptr::copy_nonoverlapping(b.as_ptr(), buf, b.len());
    NmStatus::Ok
}

/// Verifies every record. Returns `VerifyFailed` with the sequence number of
/// the first rejected record in `first_bad_seq`; on success that value is
/// untouched. `n_rejected` may be null.
///
/// # Safety
/// `log` must be a live handle; `key` valid for `key_len` reads; the output
/// pointers null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nm_secure_log_verify(
    log: *const NmSecureLog,
    key: *const u8,
    key_len: usize,
    n_rejected: *mut usize,
    first_bad_seq: *mut u64,
) -> NmStatus {
    non_null!(log);
    let Some(key) = bytes(key, key_len) else {
        return fail(NmStatus::NullPointer, "key is null");
    };
    let v = defenses::verify_log(&(*log).0, key);
    if !n_rejected.is_null() {
        *n_rejected = v.rejected.len();
    }
    match v.first_rejected() {
        None => NmStatus::Ok,
        Some(r) => {
            if !first_bad_seq.is_null() {
                *first_bad_seq = r.seq;
            }
            fail(
                NmStatus::VerifyFailed,
                format!("record {} (seq {}) rejected: {:?}", r.index, r.seq, r.reason),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last_error() -> String {
        let mut buf = vec![0 as c_char; 256];
        let n = unsafe { nm_last_error(buf.as_mut_ptr(), buf.len()) };
        let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned();
        assert_eq!(s.len(), n.min(255));
        s
    }

    #[test]
    fn null_out_pointer_is_reported() {
        let st = unsafe { nm_network_new(10, 1, ptr::null_mut()) };
        assert_eq!(st, NmStatus::NullPointer);
        assert!(last_error().contains("out"));
    }

    #[test]
    fn zero_neurons_is_a_config_error() {
        let mut net = ptr::null_mut();
        let st = unsafe { nm_network_new(0, 1, &mut net) };
        assert_eq!(st, NmStatus::Config);
        assert!(net.is_null());
    }

    #[test]
    fn error_message_truncates() {
        let _ = unsafe { nm_network_new(0, 1, &mut ptr::null_mut()) };
        let mut buf = [0 as c_char; 4];
        let n = unsafe { nm_last_error(buf.as_mut_ptr(), buf.len()) };
        assert!(n > 3);
        assert_eq!(buf[3], 0);
    }
}
