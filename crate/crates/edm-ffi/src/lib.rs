//! C ABI over the edm-core ladder oracle and trained networks.
//!
//! Conventions: every function returns an `int` status (`EDM_OK` = 0) and
//! writes results through out-pointers; handles are opaque and must be
//! released with the matching `_free` function; the last error message is
//! kept per thread and can be copied out with [`edm_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr};
use std::ptr;

use edm_core::neural_net::{parse_network, Network};
use edm_core::rule_model::{classify, parse_ladder, DataRecord, DecisionLadder};

pub const EDM_OK: c_int = 0;
pub const EDM_ERR_ARGUMENT: c_int = 1;
pub const EDM_ERR_PARSE: c_int = 2;
pub const EDM_ERR_NUMERIC: c_int = 3;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
}

fn fail(code: c_int, message: impl Into<String>) -> c_int {
    set_error(message);
    code
}

/// Opaque parsed decision ladder.
pub struct EdmLadder(DecisionLadder);

/// Opaque parsed network.
pub struct EdmNetwork(Network);

unsafe fn str_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, String> {
    if ptr.is_null() {
        return Err(format!("{what} is null"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| format!("{what} is not valid UTF-8"))
}

/// Copy `text` into a caller-provided buffer, always NUL-terminated,
/// truncating if needed. Returns the full length (excluding the NUL).
unsafe fn copy_out(text: &str, buf: *mut c_char, len: usize) -> usize {
    if !buf.is_null() && len > 0 {
        let n = text.len().min(len - 1);
        ptr::copy_nonoverlapping(text.as_ptr() as *const c_char, buf, n);
        *buf.add(n) = 0;
    }
    text.len()
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the untruncated message length.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes, or be null.
#[no_mangle]
pub unsafe extern "C" fn edm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| copy_out(&e.borrow(), buf, len))
}

/// Parse a ladder from DSL text into a new handle.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn edm_ladder_parse(
    text: *const c_char,
    out: *mut *mut EdmLadder,
) -> c_int {
    if out.is_null() {
        return fail(EDM_ERR_ARGUMENT, "out is null");
    }
    let text = match str_arg(text, "text") {
        Ok(t) => t,
        Err(m) => return fail(EDM_ERR_ARGUMENT, m),
    };
    match parse_ladder(text) {
        Ok(ladder) => {
            *out = Box::into_raw(Box::new(EdmLadder(ladder)));
            EDM_OK
        }
        Err(e) => fail(EDM_ERR_PARSE, e.to_string()),
    }
}

/// Release a ladder handle. Null is a no-op.
///
/// # Safety
/// `ladder` must have come from [`edm_ladder_parse`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn edm_ladder_free(ladder: *mut EdmLadder) {
    if !ladder.is_null() {
        drop(Box::from_raw(ladder));
    }
}

/// Number of declared input variables.
///
/// # Safety
/// `ladder` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn edm_ladder_num_variables(ladder: *const EdmLadder) -> usize {
    if ladder.is_null() {
        return 0;
    }
    (*ladder).0.variables.len()
}

/// Number of classes the ladder can assign.
///
/// # Safety
/// `ladder` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn edm_ladder_num_classes(ladder: *const EdmLadder) -> usize {
    if ladder.is_null() {
        return 0;
    }
    (*ladder).0.num_classes
}

/// Copy the name of variable `index` (declaration order) into `buf`.
/// Returns the name's length, or 0 if the index is out of range.
///
/// # Safety
/// `ladder` must be a live handle; `buf` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn edm_ladder_variable_name(
    ladder: *const EdmLadder,
    index: usize,
    buf: *mut c_char,
    len: usize,
) -> usize {
    if ladder.is_null() {
        return 0;
    }
    match (&(*ladder).0.variables).get(index) {
        Some(v) => copy_out(&v.name, buf, len),
        None => 0,
    }
}

unsafe fn record_from_values(
    variables: &[String],
    values: *const c_double,
    n: usize,
) -> Result<DataRecord, String> {
    if values.is_null() {
        return Err("values is null".to_string());
    }
    if n != variables.len() {
        return Err(format!(
            "expected {} values (one per variable, declaration order), got {n}",
            variables.len()
        ));
    }
    let slice = std::slice::from_raw_parts(values, n);
    Ok(DataRecord::from_pairs(
        variables.iter().cloned().zip(slice.iter().copied()),
    ))
}

/// Classify one record. `values` holds one value per ladder variable in
/// declaration order; the 1-based class index is written to `out_class`.
///
/// # Safety
/// `ladder` must be a live handle; `values` must point to `num_values`
/// doubles; `out_class` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn edm_ladder_classify(
    ladder: *const EdmLadder,
    values: *const c_double,
    num_values: usize,
    out_class: *mut usize,
) -> c_int {
    if ladder.is_null() || out_class.is_null() {
        return fail(EDM_ERR_ARGUMENT, "ladder or out_class is null");
    }
    let ladder = &(*ladder).0;
    let names: Vec<String> = ladder.variables.iter().map(|v| v.name.clone()).collect();
    let record = match record_from_values(&names, values, num_values) {
        Ok(r) => r,
        Err(m) => return fail(EDM_ERR_ARGUMENT, m),
    };
    match classify(ladder, &record) {
        Ok(class) => {
            *out_class = class;
            EDM_OK
        }
        Err(e) => fail(EDM_ERR_NUMERIC, e.to_string()),
    }
}

/// Parse a serialized network (the pipeline's `network.txt` format).
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn edm_network_parse(
    text: *const c_char,
    out: *mut *mut EdmNetwork,
) -> c_int {
    if out.is_null() {
        return fail(EDM_ERR_ARGUMENT, "out is null");
    }
    let text = match str_arg(text, "text") {
        Ok(t) => t,
        Err(m) => return fail(EDM_ERR_ARGUMENT, m),
    };
    match parse_network(text) {
        Ok(net) => {
            *out = Box::into_raw(Box::new(EdmNetwork(net)));
            EDM_OK
        }
        Err(e) => fail(EDM_ERR_PARSE, e.to_string()),
    }
}

/// Release a network handle. Null is a no-op.
///
/// # Safety
/// `network` must have come from [`edm_network_parse`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn edm_network_free(network: *mut EdmNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

/// Number of input variables the network expects.
///
/// # Safety
/// `network` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn edm_network_num_inputs(network: *const EdmNetwork) -> usize {
    if network.is_null() {
        return 0;
    }
    (*network).0.variables.len()
}

/// Run the network on one record. `values` holds one raw (unnormalized)
/// value per network input in the network's variable order; the output in
/// (0,1) is written to `out_value`.
///
/// # Safety
/// `network` must be a live handle; `values` must point to `num_values`
/// doubles; `out_value` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn edm_network_forward(
    network: *const EdmNetwork,
    values: *const c_double,
    num_values: usize,
    out_value: *mut c_double,
) -> c_int {
    if network.is_null() || out_value.is_null() {
        return fail(EDM_ERR_ARGUMENT, "network or out_value is null");
    }
    let net = &(*network).0;
    let record = match record_from_values(&net.variables, values, num_values) {
        Ok(r) => r,
        Err(m) => return fail(EDM_ERR_ARGUMENT, m),
    };
    match net.forward(&record) {
        Ok(v) => {
            *out_value = v;
            EDM_OK
        }
        Err(e) => fail(EDM_ERR_NUMERIC, e.to_string()),
    }
}

/// Round a class-units value (1-based) to the nearest class in
/// `1..=num_classes`; ties round up.
///
/// # Safety
/// `out_class` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn edm_round_to_class(
    class_units: c_double,
    num_classes: usize,
    out_class: *mut usize,
) -> c_int {
    if out_class.is_null() {
        return fail(EDM_ERR_ARGUMENT, "out_class is null");
    }
    match edm_core::evaluation::round_to_class(class_units, num_classes) {
        Ok(c) => {
            *out_class = c;
            EDM_OK
        }
        Err(e) => fail(EDM_ERR_NUMERIC, e.to_string()),
    }
}
