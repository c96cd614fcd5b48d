//! C ABI for `socp-alm`.
//!
//! Problems and solve results live behind opaque handles created and freed
//! by this library. Every function returns an `int32_t` status code
//! (`SOCP_ALM_OK` on success); on failure a message is kept per thread and
//! can be copied out with [`socp_alm_last_error`]. Vectors are passed as
//! `(pointer, length)` pairs and matrices as row-major arrays. Panics never
//! cross the boundary; they are reported as `SOCP_ALM_ERR_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use socp_alm::alm::{self, AlmConfig, AlmStatus, EpsRule};
use socp_alm::model::{self, QuadraticData};
use socp_alm::variational::{self, DualQualOptions, SoscOptions};
use socp_alm::{cone, lagrangian, Error};

pub const SOCP_ALM_OK: i32 = 0;
pub const SOCP_ALM_ERR_NULL: i32 = 1;
pub const SOCP_ALM_ERR_INVALID: i32 = 2;
pub const SOCP_ALM_ERR_DIMENSION: i32 = 3;
pub const SOCP_ALM_ERR_PARSE: i32 = 4;
pub const SOCP_ALM_ERR_NO_SOLUTION: i32 = 5;
pub const SOCP_ALM_ERR_NOT_KKT: i32 = 6;
pub const SOCP_ALM_ERR_NUMERIC: i32 = 7;
pub const SOCP_ALM_ERR_PANIC: i32 = 8;

pub const SOCP_ALM_STATUS_CONVERGED: i32 = 0;
pub const SOCP_ALM_STATUS_MAX_ITERATIONS: i32 = 1;
pub const SOCP_ALM_STATUS_INNER_FAILURE: i32 = 2;

/// Opaque problem handle.
pub struct SocpAlmProblem {
    inner: socp_alm::SocpProblem,
}

/// Opaque result of [`socp_alm_solve`].
pub struct SocpAlmResult {
    x: Vec<f64>,
    lambda: Vec<f64>,
    status: AlmStatus,
    iterations: usize,
    sigma: f64,
}

/// Outer-loop settings. `eps_eta <= 0` selects exact subproblem solves.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SocpAlmOptions {
    pub rho0: f64,
    pub rho_bar: f64,
    pub rho_growth: f64,
    pub rho_max: f64,
    pub eps_eta: f64,
    pub outer_tol: f64,
    pub max_outer: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn code_for(err: &Error) -> i32 {
    match err {
        Error::DimensionMismatch { .. } => SOCP_ALM_ERR_DIMENSION,
        Error::Parse { .. } | Error::UnknownProblem(_) | Error::Io(_) => SOCP_ALM_ERR_PARSE,
        Error::NoKnownSolution => SOCP_ALM_ERR_NO_SOLUTION,
        Error::NotKkt(_) | Error::NotInCone(_) | Error::NotInNormalCone(_) => SOCP_ALM_ERR_NOT_KKT,
        Error::NonFinite(_) | Error::InnerFailure { .. } | Error::OracleMismatch(_) => SOCP_ALM_ERR_NUMERIC,
        _ => SOCP_ALM_ERR_INVALID,
    }
}

/// Runs `f`, translating `Err` and panics into status codes.
fn guard<F>(f: F) -> i32
where
    F: FnOnce() -> Result<(), (i32, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SOCP_ALM_OK
        }
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            SOCP_ALM_ERR_PANIC
        }
    }
}

fn lift(err: Error) -> (i32, String) {
    (code_for(&err), err.to_string())
}

fn null(what: &str) -> (i32, String) {
    (SOCP_ALM_ERR_NULL, format!("null pointer: {what}"))
}

unsafe fn read_vec(ptr: *const f64, len: usize, what: &str) -> Result<DVector<f64>, (i32, String)> {
    if len == 0 {
        return Ok(DVector::zeros(0));
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    let v = DVector::from_column_slice(std::slice::from_raw_parts(ptr, len));
    if v.iter().any(|x| !x.is_finite()) {
        return Err((SOCP_ALM_ERR_NUMERIC, format!("non-finite entry in {what}")));
    }
    Ok(v)
}

unsafe fn write_vec(dst: *mut f64, len: usize, src: &[f64], what: &str) -> Result<(), (i32, String)> {
    if dst.is_null() {
        return Err(null(what));
    }
    if len != src.len() {
        return Err((
            SOCP_ALM_ERR_DIMENSION,
            format!("{what}: buffer length {len}, need {}", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, len);
    Ok(())
}

unsafe fn problem_ref<'a>(p: *const SocpAlmProblem) -> Result<&'a socp_alm::SocpProblem, (i32, String)> {
    p.as_ref().map(|h| &h.inner).ok_or_else(|| null("problem"))
}

unsafe fn c_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (i32, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (SOCP_ALM_ERR_PARSE, format!("{what} is not valid UTF-8")))
}

fn publish(p: socp_alm::SocpProblem, out: *mut *mut SocpAlmProblem) {
    unsafe { *out = Box::into_raw(Box::new(SocpAlmProblem { inner: p })) };
}

/// Copies the calling thread's last error message (NUL-terminated, possibly
/// truncated) into `buf` and returns the full message length in bytes.
/// Passing `buf = NULL` only queries the length.
#[no_mangle]
pub unsafe extern "C" fn socp_alm_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Parses a problem description in the JSON format accepted by the CLI.
#[no_mangle]
pub unsafe extern "C" fn socp_alm_problem_from_json(json: *const c_char, out: *mut *mut SocpAlmProblem) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = c_str(json, "json")?;
        publish(model::parse_problem(text).map_err(lift)?, out);
        Ok(())
    })
}

/// Built-in problem by name; `params_json` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn socp_alm_problem_builtin(
    name: *const c_char,
    params_json: *const c_char,
    out: *mut *mut SocpAlmProblem,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let name = c_str(name, "name")?;
        let params = if params_json.is_null() {
            serde_json::Value::Null
        } else {
            serde_json::from_str(c_str(params_json, "params_json")?)
                .map_err(|e| (SOCP_ALM_ERR_PARSE, format!("params_json: {e}")))?
        };
        publish(model::builtin_by_name(name, &params).map_err(lift)?, out);
        Ok(())
    })
}

/// Quadratic problem `½xᵀPx + qᵀx + c` subject to `Ax + b ∈ Q`, with `P`
/// (`n×n`) and `A` (`(m+1)×n`) row-major.
#[no_mangle]
pub unsafe extern "C" fn socp_alm_problem_quadratic(
    n: usize,
    m: usize,
    p: *const f64,
    q: *const f64,
    c: f64,
    a: *const f64,
    b: *const f64,
    out: *mut *mut SocpAlmProblem,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if n == 0 || m == 0 {
            return Err((SOCP_ALM_ERR_INVALID, "n and m must be at least 1".into()));
        }
        let pm = read_vec(p, n * n, "P")?;
        let am = read_vec(a, (m + 1) * n, "A")?;
        let data = QuadraticData {
            p: DMatrix::from_row_slice(n, n, pm.as_slice()),
            q: read_vec(q, n, "q")?,
            c,
            a: DMatrix::from_row_slice(m + 1, n, am.as_slice()),
            b: read_vec(b, m + 1, "b")?,
        };
        data.validate().map_err(lift)?;
        let problem = socp_alm::SocpProblem::new("quadratic", n, m, Arc::new(data)).map_err(lift)?;
        publish(problem, out);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn socp_alm_problem_free(p: *mut SocpAlmProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Writes `n` (primal dimension) and `m` (the cone lives in `R^{m+1}`).
#[no_mangle]
pub unsafe extern "C" fn socp_alm_problem_dims(p: *const SocpAlmProblem, n: *mut usize, m: *mut usize) -> i32 {
    guard(|| {
        let prob = problem_ref(p)?;
        if n.is_null() || m.is_null() {
            return Err(null("n/m"));
        }
        *n = prob.n;
        *m = prob.m;
        Ok(())
    })
}

/// Projection of `y ∈ R^len` onto the second-order cone (`len ≥ 2`).
#[no_mangle]
pub unsafe extern "C" fn socp_alm_project_q(y: *const f64, len: usize, out: *mut f64) -> i32 {
    guard(|| {
        let v = cone::ConeVec::from_vec(read_vec(y, len, "y")?).map_err(lift)?;
        write_vec(out, len, cone::project_q(&v).as_vector().as_slice(), "out")
    })
}

/// Projection of `y` onto the polar cone `−Q`.
#[no_mangle]
pub unsafe extern "C" fn socp_alm_project_polar(y: *const f64, len: usize, out: *mut f64) -> i32 {
    guard(|| {
        let v = cone::ConeVec::from_vec(read_vec(y, len, "y")?).map_err(lift)?;
        write_vec(out, len, cone::project_polar(&v).as_vector().as_slice(), "out")
    })
}

/// KKT residual at `(x, λ)`; `x` has length `n`, `lambda` length `m+1`.
#[no_mangle]
pub unsafe extern "C" fn socp_alm_residual(
    p: *const SocpAlmProblem,
    x: *const f64,
    lambda: *const f64,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let prob = problem_ref(p)?;
        let xv = read_vec(x, prob.n, "x")?;
        let lv = read_vec(lambda, prob.m + 1, "lambda")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lagrangian::residual(prob, &xv, &lv).map_err(lift)?;
        Ok(())
    })
}

/// Augmented Lagrangian value and, when `grad_x` is non-NULL, its
/// `x`-gradient (length `n`).
#[no_mangle]
pub unsafe extern "C" fn socp_alm_aug_lagrangian(
    p: *const SocpAlmProblem,
    x: *const f64,
    lambda: *const f64,
    rho: f64,
    value: *mut f64,
    grad_x: *mut f64,
) -> i32 {
    guard(|| {
        let prob = problem_ref(p)?;
        let xv = read_vec(x, prob.n, "x")?;
        let lv = read_vec(lambda, prob.m + 1, "lambda")?;
        let eval = lagrangian::aug_lagrangian(prob, &xv, &lv, rho).map_err(lift)?;
        if value.is_null() {
            return Err(null("value"));
        }
        *value = eval.value;
        if !grad_x.is_null() {
            write_vec(grad_x, prob.n, eval.grad_x.as_slice(), "grad_x")?;
        }
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn socp_alm_options_default() -> SocpAlmOptions {
    let d = AlmConfig::default();
    let eta = match d.eps_rule {
        EpsRule::Proportional(eta) => eta,
        _ => 0.0,
    };
    SocpAlmOptions {
        rho0: d.rho0,
        rho_bar: d.rho_bar,
        rho_growth: d.rho_growth,
        rho_max: d.rho_max,
        eps_eta: eta,
        outer_tol: d.outer_tol,
        max_outer: d.max_outer as u32,
    }
}

/// Runs the method from `(x0, lambda0)`; `options` may be NULL for defaults.
/// A run that stops without converging still yields a result; inspect it
/// with [`socp_alm_result_status`].
#[no_mangle]
pub unsafe extern "C" fn socp_alm_solve(
    p: *const SocpAlmProblem,
    x0: *const f64,
    lambda0: *const f64,
    options: *const SocpAlmOptions,
    out: *mut *mut SocpAlmResult,
) -> i32 {
    guard(|| {
        let prob = problem_ref(p)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let xv = read_vec(x0, prob.n, "x0")?;
        let lv = read_vec(lambda0, prob.m + 1, "lambda0")?;
        let o = options.as_ref().copied().unwrap_or_else(|| socp_alm_options_default());
        let cfg = AlmConfig {
            rho0: o.rho0,
            rho_bar: o.rho_bar,
            rho_growth: o.rho_growth,
            rho_max: o.rho_max,
            eps_rule: if o.eps_eta > 0.0 { EpsRule::Proportional(o.eps_eta) } else { EpsRule::Exact },
            outer_tol: o.outer_tol,
            max_outer: o.max_outer as usize,
            ..AlmConfig::default()
        };
        let (sol, trace) = alm::solve(prob, &xv, &lv, &cfg).map_err(lift)?;
        let result = SocpAlmResult {
            x: sol.x.as_slice().to_vec(),
            lambda: sol.lambda.as_slice().to_vec(),
            status: trace.status,
            iterations: trace.outer_iterations(),
            sigma: trace.final_sigma(),
        };
        *out = Box::into_raw(Box::new(result));
        Ok(())
    })
}

/// One of the `SOCP_ALM_STATUS_*` values, or `-1` for a NULL handle.
#[no_mangle]
pub unsafe extern "C" fn socp_alm_result_status(r: *const SocpAlmResult) -> c_int {
    match r.as_ref().map(|r| r.status) {
        Some(AlmStatus::Converged) => SOCP_ALM_STATUS_CONVERGED,
        Some(AlmStatus::MaxIterations) => SOCP_ALM_STATUS_MAX_ITERATIONS,
        Some(AlmStatus::InnerFailure) => SOCP_ALM_STATUS_INNER_FAILURE,
        None => -1,
    }
}

/// Number of completed outer iterations (0 for a NULL handle).
#[no_mangle]
pub unsafe extern "C" fn socp_alm_result_iterations(r: *const SocpAlmResult) -> usize {
    r.as_ref().map_or(0, |r| r.iterations)
}

/// Final KKT residual (NaN for a NULL handle).
#[no_mangle]
pub unsafe extern "C" fn socp_alm_result_sigma(r: *const SocpAlmResult) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.sigma)
}

#[no_mangle]
pub unsafe extern "C" fn socp_alm_result_x(r: *const SocpAlmResult, out: *mut f64, len: usize) -> i32 {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("result"))?;
        write_vec(out, len, &r.x, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn socp_alm_result_lambda(r: *const SocpAlmResult, out: *mut f64, len: usize) -> i32 {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("result"))?;
        write_vec(out, len, &r.lambda, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn socp_alm_result_free(r: *mut SocpAlmResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

unsafe fn kkt_pair(
    prob: &socp_alm::SocpProblem,
    x: *const f64,
    lambda: *const f64,
) -> Result<(DVector<f64>, DVector<f64>), (i32, String)> {
    if x.is_null() && lambda.is_null() {
        let sol = prob.known().map_err(lift)?;
        return Ok((sol.x.clone(), sol.lambda.clone()));
    }
    Ok((read_vec(x, prob.n, "x")?, read_vec(lambda, prob.m + 1, "lambda")?))
}

/// Second-order sufficient condition at `(x, λ)`; pass both pointers NULL to
/// use the problem's known solution. `modulus` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn socp_alm_check_sosc(
    p: *const SocpAlmProblem,
    x: *const f64,
    lambda: *const f64,
    holds: *mut c_int,
    modulus: *mut f64,
) -> i32 {
    guard(|| {
        let prob = problem_ref(p)?;
        if holds.is_null() {
            return Err(null("holds"));
        }
        let (xv, lv) = kkt_pair(prob, x, lambda)?;
        let r = variational::check_sosc(prob, &xv, &lv, &SoscOptions::default()).map_err(lift)?;
        *holds = c_int::from(r.holds);
        if !modulus.is_null() {
            *modulus = r.modulus;
        }
        Ok(())
    })
}

/// Dual qualification condition at `(x, λ)` (NULL pointers as in
/// [`socp_alm_check_sosc`]). When it fails and `witness` is non-NULL, a unit
/// witness of length `m+1` is written there.
#[no_mangle]
pub unsafe extern "C" fn socp_alm_check_dual_qualification(
    p: *const SocpAlmProblem,
    x: *const f64,
    lambda: *const f64,
    holds: *mut c_int,
    witness: *mut f64,
) -> i32 {
    guard(|| {
        let prob = problem_ref(p)?;
        if holds.is_null() {
            return Err(null("holds"));
        }
        let (xv, lv) = kkt_pair(prob, x, lambda)?;
        let r = variational::check_dual_qualification(prob, &xv, &lv, &DualQualOptions::default())
            .map_err(lift)?;
        *holds = c_int::from(r.holds);
        if let (Some(w), false) = (&r.witness, witness.is_null()) {
            write_vec(witness, prob.m + 1, w, "witness")?;
        }
        Ok(())
    })
}
