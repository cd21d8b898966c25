//! C ABI over the rule parser, cyclicity checker, augmenter and distance
//! functions.
//!
//! Every fallible function returns a [`LogaugStatus`]. On failure a message
//! describing the error can be read with [`logaug_last_error`] on the same
//! thread. Handles are opaque; release them with the matching `_free`
//! function. Strings returned through out-parameters are owned by the caller
//! and must be released with [`logaug_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use logaug::augment::{augment_pipeline, program_cyclicity, AugmentError, GroundingContext, ProbeContext};
use logaug::graph::{ComputationGraph, GraphFile};
use logaug::rules::{parse_rules, Rho, RuleProgram};
use logaug::soft_logic::{DistanceExpr, DistanceForm};
use logaug::tasks::shipped_rules;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogaugStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Rule source did not parse.
    Parse = 3,
    /// Rules are well-formed but do not fit the graph (unknown neuron, cycle, ...).
    Validation = 4,
    /// A file could not be read, or a graph file is malformed.
    Io = 5,
    /// A numeric argument is out of range.
    InvalidArgument = 6,
    /// An internal error; the library state is unaffected.
    Panic = 7,
}

/// Antecedent form of a distance function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogaugForm {
    Conjunction = 0,
    Disjunction = 1,
    NegatedDisjunction = 2,
    NegatedConjunction = 3,
}

/// A parsed rule program.
pub struct LogaugRules {
    program: RuleProgram,
}

/// A computation graph together with the grounding context from its probe section.
pub struct LogaugGraph {
    graph: ComputationGraph,
    ctx: GroundingContext,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(message).expect("NULs were replaced")));
}

struct Failure(LogaugStatus, String);

impl Failure {
    fn new(status: LogaugStatus, message: impl std::fmt::Display) -> Self {
        Failure(status, message.to_string())
    }
}

impl From<AugmentError> for Failure {
    fn from(e: AugmentError) -> Self {
        let status = match e {
            AugmentError::UnknownTable { .. } => LogaugStatus::Io,
            _ => LogaugStatus::Validation,
        };
        Failure::new(status, e)
    }
}

/// Run `f`, translating failures and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LogaugStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LogaugStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {message}"));
            LogaugStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::new(LogaugStatus::NullArgument, format!("`{what}` is null"))
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::new(LogaugStatus::InvalidUtf8, format!("`{what}`: {e}")))
}

/// # Safety
/// `p` is null or points to a live value of `T`.
unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// # Safety
/// `out` is null or valid for a write of `T`.
unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("NULs were replaced").into_raw()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn logaug_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null if none failed.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn logaug_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` is null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn logaug_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse rule source text.
///
/// # Safety
/// `source` is a NUL-terminated string; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn logaug_rules_parse(source: *const c_char, out: *mut *mut LogaugRules) -> LogaugStatus {
    guard(|| {
        let src = text(source, "source")?;
        let program = parse_rules(src).map_err(|e| Failure::new(LogaugStatus::Parse, e))?;
        put(out, Box::into_raw(Box::new(LogaugRules { program })), "out")
    })
}

/// Load rules by shipped name (for example `c1-5`) or from a file path.
///
/// # Safety
/// `spec` is a NUL-terminated string; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn logaug_rules_load(spec: *const c_char, out: *mut *mut LogaugRules) -> LogaugStatus {
    guard(|| {
        let spec = text(spec, "spec")?;
        let program = match shipped_rules(spec) {
            Some((_, p)) => p,
            None => {
                let src = std::fs::read_to_string(spec).map_err(|e| Failure::new(LogaugStatus::Io, format!("{spec}: {e}")))?;
                parse_rules(&src).map_err(|e| Failure::new(LogaugStatus::Parse, format!("{spec}: {e}")))?
            }
        };
        put(out, Box::into_raw(Box::new(LogaugRules { program })), "out")
    })
}

/// Number of statements in a program.
///
/// # Safety
/// `rules` is a live handle; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn logaug_rules_statement_count(rules: *const LogaugRules, out: *mut usize) -> LogaugStatus {
    guard(|| {
        let r = handle(rules, "rules")?;
        put(out, r.program.statements.len(), "out")
    })
}

/// Set ρ on every statement that does not pin its own. `rho` must be finite
/// and non-negative.
///
/// # Safety
/// `rules` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn logaug_rules_set_rho(rules: *mut LogaugRules, rho: f64) -> LogaugStatus {
    guard(|| {
        let r = rules.as_mut().ok_or_else(|| null("rules"))?;
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Failure::new(LogaugStatus::InvalidArgument, format!("rho {rho} must be finite and non-negative")));
        }
        r.program = std::mem::take(&mut r.program).with_rho(Rho::Value(rho));
        Ok(())
    })
}

/// Make every statement that does not pin its own ρ a hard constraint.
///
/// # Safety
/// `rules` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn logaug_rules_set_hard(rules: *mut LogaugRules) -> LogaugStatus {
    guard(|| {
        let r = rules.as_mut().ok_or_else(|| null("rules"))?;
        r.program = std::mem::take(&mut r.program).with_rho(Rho::Hard);
        Ok(())
    })
}

/// Print the program in rule syntax. Free the result with [`logaug_string_free`].
///
/// # Safety
/// `rules` is a live handle; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn logaug_rules_to_string(rules: *const LogaugRules, out: *mut *mut c_char) -> LogaugStatus {
    guard(|| {
        let r = handle(rules, "rules")?;
        put(out, owned_string(r.program.to_string()), "out")
    })
}

/// # Safety
/// `rules` is null or a live handle, which becomes invalid.
#[no_mangle]
pub unsafe extern "C" fn logaug_rules_free(rules: *mut LogaugRules) {
    if !rules.is_null() {
        drop(Box::from_raw(rules));
    }
}

fn graph_from_text(json: &str, base: &Path) -> Result<LogaugGraph, Failure> {
    let file = GraphFile::parse(json).map_err(|e| Failure::new(LogaugStatus::Io, e))?;
    let graph = file.build().map_err(|e| Failure::new(LogaugStatus::Io, e))?;
    let probe = ProbeContext::of_file(&file).map_err(|e| Failure::new(LogaugStatus::Io, format!("probe section: {e}")))?;
    let ctx = probe.load(base).map_err(|e| Failure::new(LogaugStatus::Io, e))?;
    Ok(LogaugGraph { graph, ctx })
}

/// Build a graph from JSON text. Table paths in the probe section are
/// resolved against `base_dir`, or the working directory if it is null.
///
/// # Safety
/// `json` is a NUL-terminated string, `base_dir` is null or one; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn logaug_graph_from_json(
    json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut LogaugGraph,
) -> LogaugStatus {
    guard(|| {
        let json = text(json, "json")?;
        let base = if base_dir.is_null() { "" } else { text(base_dir, "base_dir")? };
        let g = graph_from_text(json, Path::new(base))?;
        put(out, Box::into_raw(Box::new(g)), "out")
    })
}

/// Load a graph file; its tables are resolved next to it.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn logaug_graph_load(path: *const c_char, out: *mut *mut LogaugGraph) -> LogaugStatus {
    guard(|| {
        let path = Path::new(text(path, "path")?);
        let json = std::fs::read_to_string(path).map_err(|e| Failure::new(LogaugStatus::Io, format!("{}: {e}", path.display())))?;
        let g = graph_from_text(&json, path.parent().unwrap_or(Path::new("")))?;
        put(out, Box::into_raw(Box::new(g)), "out")
    })
}

/// # Safety
/// `graph` is a live handle; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn logaug_graph_node_count(graph: *const LogaugGraph, out: *mut usize) -> LogaugStatus {
    guard(|| put(out, handle(graph, "graph")?.graph.len(), "out"))
}

/// Number of scalar parameters.
///
/// # Safety
/// `graph` is a live handle; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn logaug_graph_parameter_count(graph: *const LogaugGraph, out: *mut usize) -> LogaugStatus {
    guard(|| put(out, handle(graph, "graph")?.graph.parameter_count(), "out"))
}

/// Serialize the graph (without its probe section). Free the result with [`logaug_string_free`].
///
/// # Safety
/// `graph` is a live handle; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn logaug_graph_to_json(graph: *const LogaugGraph, out: *mut *mut c_char) -> LogaugStatus {
    guard(|| put(out, owned_string(handle(graph, "graph")?.graph.to_json()), "out"))
}

/// # Safety
/// `graph` is null or a live handle, which becomes invalid.
#[no_mangle]
pub unsafe extern "C" fn logaug_graph_free(graph: *mut LogaugGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Count the cyclic single-consequent statements of `rules` against `graph`.
/// Returns `Validation` if a statement refers to something the graph lacks.
///
/// # Safety
/// `rules` and `graph` are live handles; `out_cyclic` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn logaug_check(
    rules: *const LogaugRules,
    graph: *const LogaugGraph,
    out_cyclic: *mut usize,
) -> LogaugStatus {
    guard(|| {
        let r = handle(rules, "rules")?;
        let g = handle(graph, "graph")?;
        let verdicts = program_cyclicity(&r.program, &g.graph)?;
        put(out_cyclic, verdicts.iter().filter(|(_, c)| c.is_cyclic()).count(), "out_cyclic")
    })
}

/// Compile `rules` into a new graph, grounded on the graph's probe context.
/// The input graph is unchanged.
///
/// # Safety
/// `rules` and `graph` are live handles; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn logaug_augment(
    rules: *const LogaugRules,
    graph: *const LogaugGraph,
    out: *mut *mut LogaugGraph,
) -> LogaugStatus {
    guard(|| {
        let r = handle(rules, "rules")?;
        let g = handle(graph, "graph")?;
        let augmented = augment_pipeline(&r.program, &g.graph, &g.ctx)?;
        let new = LogaugGraph {
            graph: augmented.graph,
            ctx: g.ctx.clone(),
        };
        put(out, Box::into_raw(Box::new(new)), "out")
    })
}

/// Evaluate a distance function over `n` inputs in `[0, 1]`.
///
/// `negated` may be null (no input negated). When `out_grad` is non-null it
/// receives `n` subgradient entries.
///
/// # Safety
/// `z` points to `n` doubles, `negated` is null or points to `n` bools,
/// `out_value` is valid for a write and `out_grad` is null or valid for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn logaug_distance(
    form: LogaugForm,
    negated: *const bool,
    z: *const f64,
    n: usize,
    out_value: *mut f64,
    out_grad: *mut f64,
) -> LogaugStatus {
    guard(|| {
        if z.is_null() {
            return Err(null("z"));
        }
        let z = std::slice::from_raw_parts(z, n);
        let neg: Vec<bool> = if negated.is_null() {
            vec![false; n]
        } else {
            std::slice::from_raw_parts(negated, n).to_vec()
        };
        let form = match form {
            LogaugForm::Conjunction => DistanceForm::Conj,
            LogaugForm::Disjunction => DistanceForm::Disj,
            LogaugForm::NegatedDisjunction => DistanceForm::NegDisj,
            LogaugForm::NegatedConjunction => DistanceForm::NegConj,
        };
        let bad = |e| Failure::new(LogaugStatus::InvalidArgument, e);
        let expr = DistanceExpr::new(form, neg.into_iter().map(|b| ((), b)).collect()).map_err(bad)?;
        let value = expr.eval(z).map_err(bad)?;
        if !out_grad.is_null() {
            let grad = expr.gradient(z).map_err(bad)?;
            std::slice::from_raw_parts_mut(out_grad, n).copy_from_slice(&grad);
        }
        put(out_value, value, "out_value")
    })
}
