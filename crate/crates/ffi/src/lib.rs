//! C interface to `ocsp-core`.
//!
//! Instances and decompositions are opaque handles released with their
//! `_free` functions. Every fallible call returns an [`OcspStatus`]; the
//! message of the most recent failure on the calling thread is available
//! from [`ocsp_last_error_message`]. Strings returned through `char **`
//! out-parameters are owned by the caller and released with
//! [`ocsp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use ocsp_core::decider::{decide_with, DecideConfig, Outcome};
use ocsp_core::efron_stein::{decompose_instance, EsDecomposition};
use ocsp_core::exact::parse_rational;
use ocsp_core::instance::{parse_instance, Instance};
use ocsp_core::report::{to_json, AnalyzeJson, DecisionJson};
use ocsp_core::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OcspStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidParameter = 4,
    CapExceeded = 5,
    BudgetExceeded = 6,
    Internal = 7,
}

/// Decision outcomes reported by [`ocsp_decide_json`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OcspOutcome {
    YesCertified = 0,
    YesKernel = 1,
    NoKernel = 2,
    Undecided = 3,
}

impl From<Outcome> for OcspOutcome {
    fn from(o: Outcome) -> Self {
        match o {
            Outcome::YesCertified => OcspOutcome::YesCertified,
            Outcome::YesKernel => OcspOutcome::YesKernel,
            Outcome::NoKernel => OcspOutcome::NoKernel,
            Outcome::Undecided => OcspOutcome::Undecided,
        }
    }
}

/// A parsed instance.
pub struct OcspInstance {
    inner: Instance,
}

/// The decomposition of an instance objective.
pub struct OcspDecomposition {
    inner: Arc<EsDecomposition>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> OcspStatus {
    match e {
        Error::Syntax { .. }
        | Error::DuplicateVariable { .. }
        | Error::VariableOutOfRange { .. }
        | Error::ArityExceeded { .. }
        | Error::DuplicatePermutation { .. }
        | Error::MismatchedPermutation { .. }
        | Error::InvalidConstraint(_) => OcspStatus::Parse,
        Error::InvalidRational(_) | Error::InvalidParameter(_) => OcspStatus::InvalidParameter,
        Error::CapExceeded { .. } => OcspStatus::CapExceeded,
        Error::BudgetExceeded { .. } => OcspStatus::BudgetExceeded,
        _ => OcspStatus::Internal,
    }
}

/// Runs `f`, recording failures and converting panics to `Internal`.
fn guard(f: impl FnOnce() -> Result<(), (OcspStatus, String)>) -> OcspStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            OcspStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            OcspStatus::Internal
        }
    }
}

fn core_error(e: Error) -> (OcspStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (OcspStatus, String) {
    (OcspStatus::NullArgument, format!("{name} is null"))
}

fn into_c_string(s: String) -> Result<*mut c_char, (OcspStatus, String)> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| (OcspStatus::Internal, "string contains a NUL byte".to_string()))
}

/// Message for the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn ocsp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ocsp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses `len` bytes of instance text into a new handle.
///
/// # Safety
/// `text` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ocsp_instance_parse(
    text: *const c_char,
    len: usize,
    out: *mut *mut OcspInstance,
) -> OcspStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let bytes = std::slice::from_raw_parts(text.cast::<u8>(), len);
        let inner = parse_instance(bytes).map_err(core_error)?;
        *out = Box::into_raw(Box::new(OcspInstance { inner }));
        Ok(())
    })
}

/// # Safety
/// `inst` must be null or a handle from [`ocsp_instance_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ocsp_instance_free(inst: *mut OcspInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// # Safety
/// `inst` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ocsp_instance_num_vars(inst: *const OcspInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.inner.num_vars())
}

/// # Safety
/// `inst` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ocsp_instance_num_constraints(inst: *const OcspInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.inner.constraints().len())
}

/// Writes `AVG` as a rational string such as `"3/2"`.
///
/// # Safety
/// `inst` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ocsp_instance_average(
    inst: *const OcspInstance,
    out: *mut *mut c_char,
) -> OcspStatus {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(|| null("inst"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = into_c_string(inst.inner.average_value().to_string())?;
        Ok(())
    })
}

/// Computes the decomposition of the instance objective.
///
/// # Safety
/// `inst` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ocsp_decompose(
    inst: *const OcspInstance,
    out: *mut *mut OcspDecomposition,
) -> OcspStatus {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(|| null("inst"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = Arc::new(decompose_instance(&inst.inner));
        *out = Box::into_raw(Box::new(OcspDecomposition { inner }));
        Ok(())
    })
}

/// # Safety
/// `dec` must be null or a handle from [`ocsp_decompose`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ocsp_decomposition_free(dec: *mut OcspDecomposition) {
    if !dec.is_null() {
        drop(Box::from_raw(dec));
    }
}

/// Number of nonzero parts on nonempty variable sets.
///
/// # Safety
/// `dec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ocsp_decomposition_num_parts(dec: *const OcspDecomposition) -> usize {
    dec.as_ref().map_or(0, |d| d.inner.num_parts())
}

/// Size of the dependency set.
///
/// # Safety
/// `dec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ocsp_decomposition_kernel_size(dec: *const OcspDecomposition) -> usize {
    dec.as_ref().map_or(0, |d| d.inner.dependency_set().len())
}

/// Writes the variance as a rational string.
///
/// # Safety
/// `dec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ocsp_decomposition_variance(
    dec: *const OcspDecomposition,
    out: *mut *mut c_char,
) -> OcspStatus {
    guard(|| {
        let dec = dec.as_ref().ok_or_else(|| null("dec"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = into_c_string(dec.inner.variance().to_string())?;
        Ok(())
    })
}

/// Writes the analysis report as JSON.
///
/// # Safety
/// `inst` and `dec` must be live handles, `dec` computed from `inst`;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ocsp_analyze_json(
    inst: *const OcspInstance,
    dec: *const OcspDecomposition,
    m4: bool,
    pieces: bool,
    out: *mut *mut c_char,
) -> OcspStatus {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(|| null("inst"))?;
        let dec = dec.as_ref().ok_or_else(|| null("dec"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = into_c_string(to_json(&AnalyzeJson::new(&inst.inner, &dec.inner, m4, pieces)))?;
        Ok(())
    })
}

/// Decides `OPT >= AVG + t` and writes the decision report as JSON.
/// `t` is a NUL-terminated rational such as `"1/2"`. `outcome` may be null.
///
/// # Safety
/// `inst` must be a live handle, `t` a valid C string, `out` writable and
/// `outcome` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ocsp_decide_json(
    inst: *const OcspInstance,
    t: *const c_char,
    cap: usize,
    budget: u64,
    seed: u64,
    witness: bool,
    out: *mut *mut c_char,
    outcome: *mut OcspOutcome,
) -> OcspStatus {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(|| null("inst"))?;
        if t.is_null() {
            return Err(null("t"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let t = CStr::from_ptr(t)
            .to_str()
            .map_err(|_| (OcspStatus::InvalidUtf8, "t is not UTF-8".to_string()))?;
        let t = parse_rational(t).map_err(core_error)?;
        let dec = Arc::new(decompose_instance(&inst.inner));
        let config = DecideConfig { cap, budget, seed, witness };
        let report = decide_with(&inst.inner, dec, &t, &config).map_err(core_error)?;
        *out = into_c_string(to_json(&DecisionJson::from(&report)))?;
        if !outcome.is_null() {
            *outcome = report.outcome.into();
        }
        Ok(())
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ocsp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
