//! C ABI for the `cbn` library.
//!
//! Every fallible call returns a [`CbnStatus`]; on failure the message is
//! available from [`cbn_last_error`] on the same thread. Networks are opaque
//! handles created by a load or learn call and released with
//! [`cbn_network_free`]. Panics never cross the boundary; they surface as
//! `CBN_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use cbn::bootstrap::{learn_cbn, BootstrapConfig};
use cbn::data::{infer_variables, read_table_str, DEFAULT_MISSING_TOKEN};
use cbn::eval::roc_auc;
use cbn::params::EmConfig;
use cbn::structure::SemConfig;
use cbn::{BnError, CausalBayesianNetwork, DataError, Error, PriorKnowledge};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Invalid = 4,
    ZeroProbability = 5,
    OutOfRange = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Opaque fitted network.
pub struct CbnNetwork {
    inner: CausalBayesianNetwork,
}

/// Settings for [`cbn_learn_from_files`]. Start from
/// [`cbn_learn_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CbnLearnConfig {
    pub bootstraps: u32,
    /// Records per bootstrap; 0 means the dataset size.
    pub sample_size: u32,
    pub lambda: f64,
    pub seed: u64,
    pub ess: f64,
    pub max_em_iterations: u32,
    pub tolerance: f64,
    pub max_sem_iterations: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(CbnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_numeric() {
            CbnStatus::ZeroProbability
        } else if matches!(e, Error::Data(DataError::Io { .. })) {
            CbnStatus::Io
        } else {
            CbnStatus::Invalid
        };
        Failure(status, e.to_string())
    }
}

impl From<BnError> for Failure {
    fn from(e: BnError) -> Self {
        Error::from(e).into()
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Error::from(e).into()
    }
}

impl From<cbn::GraphError> for Failure {
    fn from(e: cbn::GraphError) -> Self {
        Error::from(e).into()
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CbnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CbnStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CbnStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(CbnStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(CbnStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

fn read_file(path: &str) -> Result<String, Failure> {
    std::fs::read_to_string(Path::new(path)).map_err(|e| Failure(CbnStatus::Io, format!("{path}: {e}")))
}

unsafe fn network<'a>(net: *const CbnNetwork) -> Result<&'a CausalBayesianNetwork, Failure> {
    net.as_ref().map(|n| &n.inner).ok_or_else(|| null("network"))
}

unsafe fn hand_out(out: *mut *mut CbnNetwork, inner: CausalBayesianNetwork) {
    *out = Box::into_raw(Box::new(CbnNetwork { inner }));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cbn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cbn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a model file held in `json`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cbn_network_from_json(json: *const c_char, out: *mut *mut CbnNetwork) -> CbnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let bn = CausalBayesianNetwork::from_model_json(text(json, "json")?)?;
        hand_out(out, bn);
        Ok(())
    })
}

/// Loads a model file from `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cbn_network_load(path: *const c_char, out: *mut *mut CbnNetwork) -> CbnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let bn = CausalBayesianNetwork::from_model_json(&read_file(text(path, "path")?)?)?;
        hand_out(out, bn);
        Ok(())
    })
}

/// Writes the network as a model file.
///
/// # Safety
/// `net` must come from this library and `path` be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cbn_network_save(net: *const CbnNetwork, path: *const c_char) -> CbnStatus {
    guard(|| {
        let bn = network(net)?;
        let path = text(path, "path")?;
        std::fs::write(path, bn.to_model_json()).map_err(|e| Failure(CbnStatus::Io, format!("{path}: {e}")))
    })
}

/// Releases a network. Null is a no-op.
///
/// # Safety
/// `net` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cbn_network_free(net: *mut CbnNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Number of variables; 0 for a null handle.
///
/// # Safety
/// `net` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn cbn_network_node_count(net: *const CbnNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.inner.len())
}

/// Index of the variable called `name`.
///
/// # Safety
/// `net` must come from this library, `name` be NUL-terminated and `out`
/// valid.
#[no_mangle]
pub unsafe extern "C" fn cbn_network_node_index(
    net: *const CbnNetwork,
    name: *const c_char,
    out: *mut usize,
) -> CbnStatus {
    guard(|| {
        let bn = network(net)?;
        let name = text(name, "name")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = bn.index_of(name)?;
        Ok(())
    })
}

/// Number of states of variable `node`.
///
/// # Safety
/// `net` must come from this library and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn cbn_network_state_count(net: *const CbnNetwork, node: usize, out: *mut usize) -> CbnStatus {
    guard(|| {
        let bn = network(net)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let v = bn
            .variables()
            .get(node)
            .ok_or_else(|| Failure(CbnStatus::OutOfRange, format!("node {node} out of range")))?;
        *out = v.cardinality();
        Ok(())
    })
}

/// Posterior of `target` given `evidence`, one state index per variable with
/// -1 for unobserved. Writes `state_count(target)` probabilities to `out`.
///
/// # Safety
/// `evidence` must hold `evidence_len` values and `out` room for `out_len`.
#[no_mangle]
pub unsafe extern "C" fn cbn_network_posterior(
    net: *const CbnNetwork,
    evidence: *const i32,
    evidence_len: usize,
    target: usize,
    out: *mut f64,
    out_len: usize,
) -> CbnStatus {
    guard(|| {
        let bn = network(net)?;
        if evidence.is_null() && evidence_len > 0 {
            return Err(null("evidence"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        if evidence_len != bn.len() {
            return Err(Failure(
                CbnStatus::OutOfRange,
                format!("evidence has {evidence_len} entries for {} variables", bn.len()),
            ));
        }
        if target >= bn.len() {
            return Err(Failure(CbnStatus::OutOfRange, format!("target {target} out of range")));
        }
        let raw = if evidence_len == 0 { &[][..] } else { std::slice::from_raw_parts(evidence, evidence_len) };
        let mut ev = Vec::with_capacity(raw.len());
        for (i, &s) in raw.iter().enumerate() {
            ev.push(match s {
                -1 => None,
                s if s >= 0 && (s as usize) < bn.variables()[i].cardinality() => Some(s as usize),
                s => {
                    return Err(Failure(
                        CbnStatus::OutOfRange,
                        format!("state {s} out of range for `{}`", bn.variables()[i].name()),
                    ))
                }
            });
        }
        let card = bn.variables()[target].cardinality();
        if out_len < card {
            return Err(Failure(CbnStatus::BufferTooSmall, format!("need room for {card} probabilities")));
        }
        let p = bn.posterior(&ev, target)?;
        std::slice::from_raw_parts_mut(out, card).copy_from_slice(&p);
        Ok(())
    })
}

/// Defaults: 100 bootstraps of full size, lambda 0.5, seed 0, EM with ess 1
/// for at most 100 iterations to tolerance 1e-6, at most 20 structure
/// rounds.
#[no_mangle]
pub extern "C" fn cbn_learn_config_default() -> CbnLearnConfig {
    let em = EmConfig::default();
    CbnLearnConfig {
        bootstraps: 100,
        sample_size: 0,
        lambda: 0.5,
        seed: 0,
        ess: em.ess,
        max_em_iterations: em.max_iterations as u32,
        tolerance: em.tolerance,
        max_sem_iterations: SemConfig::default().max_sem_iterations as u32,
    }
}

/// Learns a network from a CSV file with inferred states and an optional
/// prior knowledge file (null for none).
///
/// # Safety
/// Strings must be NUL-terminated; `config` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbn_learn_from_files(
    data_path: *const c_char,
    knowledge_path: *const c_char,
    config: *const CbnLearnConfig,
    out: *mut *mut CbnNetwork,
) -> CbnStatus {
    guard(|| {
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let csv = read_file(text(data_path, "data_path")?)?;
        let variables = infer_variables(&csv, DEFAULT_MISSING_TOKEN)?;
        let data = read_table_str(&csv, &variables, DEFAULT_MISSING_TOKEN)?;
        let names = data.names();
        let knowledge = if knowledge_path.is_null() {
            PriorKnowledge::none()
        } else {
            let (mut k, contexts) = PriorKnowledge::parse(&read_file(text(knowledge_path, "knowledge_path")?)?)?;
            for c in contexts {
                k = k.with_context_variable(&c, &names)?;
            }
            k
        };
        let k = knowledge.compile(&names)?;
        if !(0.0..=1.0).contains(&cfg.lambda) {
            return Err(Failure(CbnStatus::Invalid, format!("lambda {} outside [0, 1]", cfg.lambda)));
        }
        let boot = BootstrapConfig {
            n: cfg.bootstraps as usize,
            m: (cfg.sample_size > 0).then_some(cfg.sample_size as usize),
            seed: cfg.seed,
            sem: SemConfig {
                em: EmConfig {
                    max_iterations: cfg.max_em_iterations as usize,
                    tolerance: cfg.tolerance,
                    ess: cfg.ess,
                    seed: cfg.seed,
                    ..EmConfig::default()
                },
                max_sem_iterations: cfg.max_sem_iterations as usize,
                ..SemConfig::default()
            },
        };
        let learned = learn_cbn(&data, &k, &boot, cfg.lambda)?;
        hand_out(out, learned.network);
        Ok(())
    })
}

/// Area under the ROC curve of `scores` against 0/1 `labels`.
///
/// # Safety
/// `scores` and `labels` must hold `len` values; `out_auc` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbn_roc_auc(
    scores: *const f64,
    labels: *const u8,
    len: usize,
    out_auc: *mut f64,
) -> CbnStatus {
    guard(|| {
        if scores.is_null() || labels.is_null() || out_auc.is_null() {
            return Err(null("scores, labels or out_auc"));
        }
        let s = std::slice::from_raw_parts(scores, len);
        let y: Vec<bool> = std::slice::from_raw_parts(labels, len).iter().map(|&l| l != 0).collect();
        let (_, auc) = roc_auc(s, &y)?;
        *out_auc = auc;
        Ok(())
    })
}
