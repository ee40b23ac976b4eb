//! C ABI over the wicklab engine.
//!
//! Conventions: every constructor writes an opaque handle through an out
//! pointer and returns a [`WicklabStatus`]; handles are freed by their
//! `_free` function exactly once; strings returned through out pointers
//! are freed with [`wicklab_string_free`]. On any failure the thread-local
//! message retrieved by [`wicklab_last_error`] describes the cause.
//! Handles are not synchronized; share them across threads only for
//! concurrent reads.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use wicklab::error::WickError;
use wicklab::integrate::{s_residual, skorokhod_elementary};
use wicklab::mcsim::{estimate_lp, eval_gep, sample_paths};
use wicklab::scenarios::{
    scenario_remark_2_6, scenario_remark_3_8_iii, scenario_theorem_2_3,
    scenario_wick_identities,
};
use wicklab::{ElementaryProcess, GepElement, Grid, StepFunction};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WicklabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    GridMismatch = 3,
    NotResolved = 4,
    BudgetExceeded = 5,
    NotAdapted = 6,
    ParseError = 7,
    InternalError = 8,
}

/// One step-function piece: `value` on the half-open interval `(lo, hi]`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct WicklabInterval {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

/// Opaque grid handle.
pub struct WicklabGrid(Grid);
/// Opaque step-function handle.
pub struct WicklabStep(StepFunction);
/// Opaque algebra-element handle.
pub struct WicklabGep(GepElement);
/// Opaque elementary-process handle (factor/weight summands on one grid).
pub struct WicklabProcess(ElementaryProcess);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let cleaned: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(cleaned).unwrap());
}

fn status_of(err: &WickError) -> WicklabStatus {
    match err {
        WickError::GridMismatch => WicklabStatus::GridMismatch,
        WickError::NotResolved | WickError::PartitionNotOnGrid => WicklabStatus::NotResolved,
        WickError::BudgetExceeded { .. } => WicklabStatus::BudgetExceeded,
        WickError::NotAdapted { .. } | WickError::FunctionalTypeViolated { .. } => {
            WicklabStatus::NotAdapted
        }
        WickError::Parse(_) | WickError::UnknownScenario(_) => WicklabStatus::ParseError,
        _ => WicklabStatus::InvalidArgument,
    }
}

fn fail(err: WickError) -> WicklabStatus {
    set_error(&err.to_string());
    status_of(&err)
}

fn guard(f: impl FnOnce() -> WicklabStatus) -> WicklabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            WicklabStatus::InternalError
        }
    }
}

unsafe fn out_handle<T>(out: *mut *mut T, value: T) -> WicklabStatus {
    if out.is_null() {
        set_error("null out pointer");
        return WicklabStatus::NullPointer;
    }
    *out = Box::into_raw(Box::new(value));
    WicklabStatus::Ok
}

macro_rules! deref {
    ($ptr:expr) => {
        match unsafe { $ptr.as_ref() } {
            Some(r) => r,
            None => {
                set_error("null handle");
                return WicklabStatus::NullPointer;
            }
        }
    };
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn wicklab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the last error message into `buf` (truncated to `len - 1` bytes,
/// NUL terminated) and returns its full length.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be NULL (query length).
#[no_mangle]
pub unsafe extern "C" fn wicklab_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len() - 1
    })
}

/// Frees a string returned through a `char**` out parameter.
///
/// # Safety
/// `s` must come from this library and not have been freed before.
#[no_mangle]
pub unsafe extern "C" fn wicklab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn string_out(out: *mut *mut c_char, s: String) -> WicklabStatus {
    if out.is_null() {
        set_error("null out pointer");
        return WicklabStatus::NullPointer;
    }
    let cleaned: String = s.chars().filter(|&c| c != '\0').collect();
    unsafe { *out = CString::new(cleaned).unwrap().into_raw() };
    WicklabStatus::Ok
}

// ---------------------------------------------------------------------- grid

/// Builds a grid from strictly increasing times starting at 0.
///
/// # Safety
/// `times` must point to `n` doubles; `out` must be a valid out pointer.
#[no_mangle]
pub unsafe extern "C" fn wicklab_grid_new(
    times: *const f64,
    n: usize,
    out: *mut *mut WicklabGrid,
) -> WicklabStatus {
    guard(|| {
        if times.is_null() {
            set_error("null times");
            return WicklabStatus::NullPointer;
        }
        let ts = unsafe { std::slice::from_raw_parts(times, n) }.to_vec();
        match Grid::new(ts) {
            Ok(g) => unsafe { out_handle(out, WicklabGrid(g)) },
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `grid` must come from `wicklab_grid_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wicklab_grid_free(grid: *mut WicklabGrid) {
    if !grid.is_null() {
        drop(unsafe { Box::from_raw(grid) });
    }
}

// -------------------------------------------------------------- step function

/// Builds the canonical step function `Σ value_j 1_{(lo_j, hi_j]}`
/// (overlapping pieces add).
///
/// # Safety
/// `pieces` must point to `n` intervals; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wicklab_step_new(
    pieces: *const WicklabInterval,
    n: usize,
    out: *mut *mut WicklabStep,
) -> WicklabStatus {
    guard(|| {
        let triples: Vec<(f64, f64, f64)> = if n == 0 {
            Vec::new()
        } else {
            if pieces.is_null() {
                set_error("null pieces");
                return WicklabStatus::NullPointer;
            }
            unsafe { std::slice::from_raw_parts(pieces, n) }
                .iter()
                .map(|p| (p.lo, p.hi, p.value))
                .collect()
        };
        match wicklab::make_step(&triples) {
            Ok(s) => unsafe { out_handle(out, WicklabStep(s)) },
            Err(e) => fail(e),
        }
    })
}

/// Parses a step function from its JSON form (array of {lo, hi, value}).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wicklab_step_from_json(
    json: *const c_char,
    out: *mut *mut WicklabStep,
) -> WicklabStatus {
    guard(|| {
        let text = match unsafe { cstr(json) } {
            Ok(t) => t,
            Err(s) => return s,
        };
        match serde_json::from_str::<StepFunction>(text) {
            Ok(s) => unsafe { out_handle(out, WicklabStep(s)) },
            Err(e) => fail(WickError::Parse(e.to_string())),
        }
    })
}

/// Writes the canonical JSON form; free with `wicklab_string_free`.
///
/// # Safety
/// `step` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wicklab_step_to_json(
    step: *const WicklabStep,
    out: *mut *mut c_char,
) -> WicklabStatus {
    guard(|| {
        let s = deref!(step);
        string_out(out, serde_json::to_string(&s.0).unwrap())
    })
}

/// # Safety
/// `step` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wicklab_step_free(step: *mut WicklabStep) {
    if !step.is_null() {
        drop(unsafe { Box::from_raw(step) });
    }
}

/// L²([0,∞)) inner product of two step functions.
///
/// # Safety
/// Handles must be valid; `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn wicklab_step_inner(
    a: *const WicklabStep,
    b: *const WicklabStep,
    out: *mut f64,
) -> WicklabStatus {
    guard(|| {
        let a = deref!(a);
        let b = deref!(b);
        if out.is_null() {
            set_error("null out pointer");
            return WicklabStatus::NullPointer;
        }
        unsafe { *out = a.0.inner(&b.0) };
        WicklabStatus::Ok
    })
}

unsafe fn cstr<'a>(p: *const c_char) -> Result<&'a str, WicklabStatus> {
    if p.is_null() {
        set_error("null string");
        return Err(WicklabStatus::NullPointer);
    }
    match unsafe { CStr::from_ptr(p) }.to_str() {
        Ok(s) => Ok(s),
        Err(_) => {
            set_error("string is not valid UTF-8");
            Err(WicklabStatus::ParseError)
        }
    }
}

// ------------------------------------------------------------------- algebra

/// Wiener integral `I(h)` of a step function resolved on the grid.
///
/// # Safety
/// Handles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wicklab_wiener(
    h: *const WicklabStep,
    grid: *const WicklabGrid,
    out: *mut *mut WicklabGep,
) -> WicklabStatus {
    guard(|| {
        let h = deref!(h);
        let grid = deref!(grid);
        match GepElement::wiener(&h.0, &grid.0) {
            Ok(x) => unsafe { out_handle(out, WicklabGep(x)) },
            Err(e) => fail(e),
        }
    })
}

/// Wick exponential `exp◇(I(g)) = exp(I(g) - ||g||²/2)`.
///
/// # Safety
/// Handles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wicklab_wick_exp(
    g: *const WicklabStep,
    grid: *const WicklabGrid,
    out: *mut *mut WicklabGep,
) -> WicklabStatus {
    guard(|| {
        let g = deref!(g);
        let grid = deref!(grid);
        match GepElement::wick_exp(&g.0, &grid.0) {
            Ok(x) => unsafe { out_handle(out, WicklabGep(x)) },
            Err(e) => fail(e),
        }
    })
}

macro_rules! binary_op {
    ($name:ident, $method:ident, $doc:literal) => {
        #[doc = $doc]
        ///
        /// # Safety
        /// Handles and `out` must be valid.
        #[no_mangle]
        pub unsafe extern "C" fn $name(
            a: *const WicklabGep,
            b: *const WicklabGep,
            out: *mut *mut WicklabGep,
        ) -> WicklabStatus {
            guard(|| {
                let a = deref!(a);
                let b = deref!(b);
                match a.0.$method(&b.0) {
                    Ok(x) => unsafe { out_handle(out, WicklabGep(x)) },
                    Err(e) => fail(e),
                }
            })
        }
    };
}

binary_op!(wicklab_gep_add, add, "Sum of two algebra elements on one grid.");
binary_op!(wicklab_gep_mul, mul, "Exact pointwise product.");
binary_op!(
    wicklab_gep_wick_mul,
    wick_mul,
    "Wick product, defined by S(X ⋄ Y)(v) = (SX)(v)(SY)(v)."
);

/// Exact expectation.
///
/// # Safety
/// Handles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wicklab_gep_expect(
    x: *const WicklabGep,
    out: *mut f64,
) -> WicklabStatus {
    guard(|| {
        let x = deref!(x);
        if out.is_null() {
            set_error("null out pointer");
            return WicklabStatus::NullPointer;
        }
        unsafe { *out = x.0.expect() };
        WicklabStatus::Ok
    })
}

/// Exact n-th moment (n >= 1).
///
/// # Safety
/// Handles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wicklab_gep_moment(
    x: *const WicklabGep,
    n: u32,
    out: *mut f64,
) -> WicklabStatus {
    guard(|| {
        let x = deref!(x);
        if out.is_null() {
            set_error("null out pointer");
            return WicklabStatus::NullPointer;
        }
        match x.0.moment(n) {
            Ok(v) => {
                unsafe { *out = v };
                WicklabStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// S-transform `(SX)(v) = E[X exp◇(I(v))]`, exact.
///
/// # Safety
/// Handles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wicklab_gep_s_transform(
    x: *const WicklabGep,
    v: *const WicklabStep,
    out: *mut f64,
) -> WicklabStatus {
    guard(|| {
        let x = deref!(x);
        let v = deref!(v);
        if out.is_null() {
            set_error("null out pointer");
            return WicklabStatus::NullPointer;
        }
        match x.0.s_transform(&v.0) {
            Ok(s) => {
                unsafe { *out = s };
                WicklabStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Serializes the element (grid times, terms with drift vectors and
/// multi-index polynomial maps); free with `wicklab_string_free`.
///
/// # Safety
/// Handles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wicklab_gep_to_json(
    x: *const WicklabGep,
    out: *mut *mut c_char,
) -> WicklabStatus {
    guard(|| {
        let x = deref!(x);
        string_out(out, serde_json::to_string(&x.0).unwrap())
    })
}

/// Parses an element from its JSON form.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wicklab_gep_from_json(
    json: *const c_char,
    out: *mut *mut WicklabGep,
) -> WicklabStatus {
    guard(|| {
        let text = match unsafe { cstr(json) } {
            Ok(t) => t,
            Err(s) => return s,
        };
        match serde_json::from_str::<GepElement>(text) {
            Ok(x) => unsafe { out_handle(out, WicklabGep(x)) },
            Err(e) => fail(WickError::Parse(e.to_string())),
        }
    })
}

/// # Safety
/// `x` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wicklab_gep_free(x: *mut WicklabGep) {
    if !x.is_null() {
        drop(unsafe { Box::from_raw(x) });
    }
}

// ------------------------------------------------------------------- process

/// Creates an empty elementary process on a grid; add summands with
/// `wicklab_process_push`.
///
/// # Safety
/// Handles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wicklab_process_new(
    grid: *const WicklabGrid,
    out: *mut *mut WicklabProcess,
) -> WicklabStatus {
    guard(|| {
        let grid = deref!(grid);
        unsafe { out_handle(out, WicklabProcess(ElementaryProcess::zero(grid.0.clone()))) }
    })
}

/// Appends the summand `factor ⊗ weight`.
///
/// # Safety
/// Handles must be valid; `process` must be exclusively borrowed.
#[no_mangle]
pub unsafe extern "C" fn wicklab_process_push(
    process: *mut WicklabProcess,
    factor: *const WicklabGep,
    weight: *const WicklabStep,
) -> WicklabStatus {
    guard(|| {
        let p = match unsafe { process.as_mut() } {
            Some(p) => p,
            None => {
                set_error("null handle");
                return WicklabStatus::NullPointer;
            }
        };
        let f = deref!(factor);
        let w = deref!(weight);
        match ElementaryProcess::single(f.0.clone(), w.0.clone()) {
            Ok(single) => match p.0.add(&single) {
                Ok(sum) => {
                    p.0 = sum;
                    WicklabStatus::Ok
                }
                Err(e) => fail(e),
            },
            Err(e) => fail(e),
        }
    })
}

/// Parses a process from its JSON form ({grid, summands}).
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wicklab_process_from_json(
    json: *const c_char,
    out: *mut *mut WicklabProcess,
) -> WicklabStatus {
    guard(|| {
        let text = match unsafe { cstr(json) } {
            Ok(t) => t,
            Err(s) => return s,
        };
        match serde_json::from_str::<ElementaryProcess>(text) {
            Ok(u) => unsafe { out_handle(out, WicklabProcess(u)) },
            Err(e) => fail(WickError::Parse(e.to_string())),
        }
    })
}

/// # Safety
/// `p` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wicklab_process_free(p: *mut WicklabProcess) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Skorokhod integral of an elementary process.
///
/// # Safety
/// Handles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wicklab_skorokhod(
    u: *const WicklabProcess,
    out: *mut *mut WicklabGep,
) -> WicklabStatus {
    guard(|| {
        let u = deref!(u);
        match skorokhod_elementary(&u.0) {
            Ok(x) => unsafe { out_handle(out, WicklabGep(x)) },
            Err(e) => fail(e),
        }
    })
}

/// Characterization residual `(SX)(v) - Σ_j (SF_j)(v) <h_j, v>`.
///
/// # Safety
/// Handles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wicklab_s_residual(
    x: *const WicklabGep,
    u: *const WicklabProcess,
    v: *const WicklabStep,
    out: *mut f64,
) -> WicklabStatus {
    guard(|| {
        let x = deref!(x);
        let u = deref!(u);
        let v = deref!(v);
        if out.is_null() {
            set_error("null out pointer");
            return WicklabStatus::NullPointer;
        }
        match s_residual(&x.0, &u.0, &v.0) {
            Ok(r) => {
                unsafe { *out = r };
                WicklabStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

// --------------------------------------------------------------- Monte Carlo

/// Evaluates the element on a fresh seeded ensemble, writing one value per
/// path. Reruns with the same seed reproduce the buffer bit-exactly.
///
/// # Safety
/// `out_buf` must point to `n_paths` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn wicklab_eval_gep(
    x: *const WicklabGep,
    n_paths: usize,
    seed: u64,
    out_buf: *mut f64,
) -> WicklabStatus {
    guard(|| {
        let x = deref!(x);
        if out_buf.is_null() {
            set_error("null out buffer");
            return WicklabStatus::NullPointer;
        }
        let paths = match sample_paths(x.0.grid(), n_paths, seed) {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        match eval_gep(&x.0, &paths) {
            Ok(vals) => {
                unsafe { ptr::copy_nonoverlapping(vals.as_ptr(), out_buf, vals.len()) };
                WicklabStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Estimates `E[|X|^p]^{1/p}` with a jackknife standard error.
///
/// # Safety
/// `samples` must point to `n` doubles; `est`/`std_err` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wicklab_estimate_lp(
    samples: *const f64,
    n: usize,
    p: f64,
    est: *mut f64,
    std_err: *mut f64,
) -> WicklabStatus {
    guard(|| {
        if samples.is_null() || est.is_null() || std_err.is_null() {
            set_error("null pointer");
            return WicklabStatus::NullPointer;
        }
        let xs = unsafe { std::slice::from_raw_parts(samples, n) };
        match estimate_lp(xs, p) {
            Ok(r) => {
                unsafe {
                    *est = r.estimate;
                    *std_err = r.std_error;
                }
                WicklabStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

// ----------------------------------------------------------------- scenarios

/// Runs a named scenario (ids: remark-2-6, remark-3-8-iii, theorem-2-3,
/// wick-identities) with an optional JSON config and returns the report as
/// JSON; free with `wicklab_string_free`.
///
/// # Safety
/// `id` must be NUL-terminated; `config_json` may be NULL; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn wicklab_run_scenario(
    id: *const c_char,
    config_json: *const c_char,
    out: *mut *mut c_char,
) -> WicklabStatus {
    guard(|| {
        let id = match unsafe { cstr(id) } {
            Ok(t) => t,
            Err(s) => return s,
        };
        let cfg_text = if config_json.is_null() {
            "{}".to_string()
        } else {
            match unsafe { cstr(config_json) } {
                Ok(t) => t.to_string(),
                Err(s) => return s,
            }
        };
        macro_rules! run {
            ($cfg:ty, $f:ident) => {{
                let cfg: $cfg = match serde_json::from_str(&cfg_text) {
                    Ok(c) => c,
                    Err(e) => return fail(WickError::Parse(e.to_string())),
                };
                match $f(&cfg) {
                    Ok(rep) => string_out(out, serde_json::to_string(&rep).unwrap()),
                    Err(e) => fail(e),
                }
            }};
        }
        match id {
            "remark-2-6" => {
                run!(wicklab::scenarios::Remark26Config, scenario_remark_2_6)
            }
            "remark-3-8-iii" => {
                run!(wicklab::scenarios::Remark38iiiConfig, scenario_remark_3_8_iii)
            }
            "theorem-2-3" => {
                run!(wicklab::scenarios::Theorem23Config, scenario_theorem_2_3)
            }
            "wick-identities" => {
                run!(wicklab::scenarios::WickIdentitiesConfig, scenario_wick_identities)
            }
            other => fail(WickError::UnknownScenario(other.into())),
        }
    })
}
