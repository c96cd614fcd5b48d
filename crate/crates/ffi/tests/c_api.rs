use std::ffi::{c_int, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use socp_alm_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { socp_alm_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn builtin(name: &str, params: Option<&str>) -> *mut SocpAlmProblem {
    let name = CString::new(name).unwrap();
    let params = params.map(|p| CString::new(p).unwrap());
    let mut out = ptr::null_mut();
    let rc = unsafe {
        socp_alm_problem_builtin(name.as_ptr(), params.as_ref().map_or(ptr::null(), |p| p.as_ptr()), &mut out)
    };
    assert_eq!(rc, SOCP_ALM_OK, "{}", last_error());
    out
}

#[test]
fn projections_match_closed_form() {
    let y = [0.0, 2.0, 0.0];
    let mut out = [0.0; 3];
    unsafe {
        assert_eq!(socp_alm_project_q(y.as_ptr(), 3, out.as_mut_ptr()), SOCP_ALM_OK);
        assert_eq!(out, [1.0, 1.0, 0.0]);
        assert_eq!(socp_alm_project_polar(y.as_ptr(), 3, out.as_mut_ptr()), SOCP_ALM_OK);
        assert_eq!(out, [-1.0, 1.0, 0.0]);
        assert_eq!(socp_alm_project_q(y.as_ptr(), 1, out.as_mut_ptr()), SOCP_ALM_ERR_INVALID);
        assert_eq!(socp_alm_project_q(ptr::null(), 3, out.as_mut_ptr()), SOCP_ALM_ERR_NULL);
    }
    assert!(last_error().contains("null"));
}

#[test]
fn solve_projection_problem_through_handles() {
    let p = builtin("projection", Some(r#"{"a": [0, 2, 0]}"#));
    unsafe {
        let (mut n, mut m) = (0usize, 0usize);
        assert_eq!(socp_alm_problem_dims(p, &mut n, &mut m), SOCP_ALM_OK);
        assert_eq!((n, m), (3, 2));

        let x0 = [0.1, 0.9, 0.05];
        let l0 = [-0.9, 1.1, 0.0];
        let mut opts = socp_alm_options_default();
        opts.rho0 = 10.0;
        let mut r = ptr::null_mut();
        assert_eq!(socp_alm_solve(p, x0.as_ptr(), l0.as_ptr(), &opts, &mut r), SOCP_ALM_OK);
        assert_eq!(socp_alm_result_status(r), SOCP_ALM_STATUS_CONVERGED);
        assert!(socp_alm_result_sigma(r) <= 1e-9);
        assert!(socp_alm_result_iterations(r) <= 30);
        let mut x = [0.0; 3];
        let mut l = [0.0; 3];
        assert_eq!(socp_alm_result_x(r, x.as_mut_ptr(), 3), SOCP_ALM_OK);
        assert_eq!(socp_alm_result_lambda(r, l.as_mut_ptr(), 3), SOCP_ALM_OK);
        assert!((x[0] - 1.0).abs() < 1e-8 && (x[1] - 1.0).abs() < 1e-8 && x[2].abs() < 1e-8);
        assert!((l[0] + 1.0).abs() < 1e-8 && (l[1] - 1.0).abs() < 1e-8 && l[2].abs() < 1e-8);
        assert_eq!(socp_alm_result_x(r, x.as_mut_ptr(), 2), SOCP_ALM_ERR_DIMENSION);

        let mut sigma = -1.0;
        assert_eq!(socp_alm_residual(p, x.as_ptr(), l.as_ptr(), &mut sigma), SOCP_ALM_OK);
        assert!(sigma <= 1e-9);

        socp_alm_result_free(r);
        socp_alm_problem_free(p);
    }
}

#[test]
fn aug_lagrangian_value_and_gradient() {
    let p = builtin("projection", Some(r#"{"a": [0, 2, 0]}"#));
    unsafe {
        let x = [0.0; 3];
        let l = [0.0; 3];
        let mut v = 0.0;
        let mut g = [0.0; 3];
        assert_eq!(socp_alm_aug_lagrangian(p, x.as_ptr(), l.as_ptr(), 2.0, &mut v, g.as_mut_ptr()), SOCP_ALM_OK);
        assert!((v - 2.0).abs() < 1e-15);
        assert_eq!(g, [0.0, -2.0, 0.0]);
        assert_eq!(
            socp_alm_aug_lagrangian(p, x.as_ptr(), l.as_ptr(), 0.0, &mut v, ptr::null_mut()),
            SOCP_ALM_ERR_INVALID
        );
        socp_alm_problem_free(p);
    }
}

#[test]
fn certificates_on_the_degenerate_example() {
    let p = builtin("example_3_2", None);
    unsafe {
        let mut holds: c_int = -1;
        let mut modulus = 0.0;
        assert_eq!(socp_alm_check_sosc(p, ptr::null(), ptr::null(), &mut holds, &mut modulus), SOCP_ALM_OK);
        assert_eq!(holds, 1);
        assert!((modulus - 2.0).abs() < 1e-9);
        let mut w = [0.0; 3];
        assert_eq!(
            socp_alm_check_dual_qualification(p, ptr::null(), ptr::null(), &mut holds, w.as_mut_ptr()),
            SOCP_ALM_OK
        );
        assert_eq!(holds, 0);
        let cos = (-w[0] + w[1]) / (2f64.sqrt() * (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt());
        assert!(cos >= 0.999);
        // a non-KKT pair is rejected with a specific code
        let x = [1.0, -3.0];
        let l = [0.0, 0.0, 0.0];
        assert_eq!(socp_alm_check_sosc(p, x.as_ptr(), l.as_ptr(), &mut holds, ptr::null_mut()), SOCP_ALM_ERR_NOT_KKT);
        socp_alm_problem_free(p);
    }
}

#[test]
fn quadratic_and_json_constructors() {
    unsafe {
        let pm = [1.0, 0.0, 0.0, 1.0];
        let q = [0.0, 0.0];
        let a = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let b = [1.0, 0.0, 0.0];
        let mut p = ptr::null_mut();
        assert_eq!(
            socp_alm_problem_quadratic(2, 2, pm.as_ptr(), q.as_ptr(), 0.0, a.as_ptr(), b.as_ptr(), &mut p),
            SOCP_ALM_OK
        );
        let mut holds = 0;
        // no known solution on a hand-built problem
        assert_eq!(socp_alm_check_sosc(p, ptr::null(), ptr::null(), &mut holds, ptr::null_mut()), SOCP_ALM_ERR_NO_SOLUTION);
        socp_alm_problem_free(p);

        let bad_p = [1.0, 2.0, 0.0, 1.0];
        let mut p = ptr::null_mut();
        assert_ne!(
            socp_alm_problem_quadratic(2, 2, bad_p.as_ptr(), q.as_ptr(), 0.0, a.as_ptr(), b.as_ptr(), &mut p),
            SOCP_ALM_OK
        );
        assert!(p.is_null());

        let json = CString::new(r#"{"quadratic": {"P": [[1]], "q": [0], "A": [[0],[0]], "b": [1, 0]}}"#).unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(socp_alm_problem_from_json(json.as_ptr(), &mut p), SOCP_ALM_OK);
        socp_alm_problem_free(p);
        let json = CString::new("{not json").unwrap();
        assert_eq!(socp_alm_problem_from_json(json.as_ptr(), &mut p), SOCP_ALM_ERR_PARSE);
        let name = CString::new("no_such_problem").unwrap();
        assert_eq!(socp_alm_problem_builtin(name.as_ptr(), ptr::null(), &mut p), SOCP_ALM_ERR_PARSE);
        assert!(last_error().contains("no_such_problem"));
    }
}

#[test]
fn null_handles_are_harmless() {
    unsafe {
        socp_alm_problem_free(ptr::null_mut());
        socp_alm_result_free(ptr::null_mut());
        assert_eq!(socp_alm_result_status(ptr::null()), -1);
        assert!(socp_alm_result_sigma(ptr::null()).is_nan());
        let mut n = 0;
        let mut m = 0;
        assert_eq!(socp_alm_problem_dims(ptr::null(), &mut n, &mut m), SOCP_ALM_ERR_NULL);
    }
}

#[test]
fn header_declares_the_exported_functions() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/socp_alm.h")).unwrap();
    for f in [
        "socp_alm_last_error",
        "socp_alm_problem_from_json",
        "socp_alm_problem_builtin",
        "socp_alm_problem_quadratic",
        "socp_alm_problem_free",
        "socp_alm_solve",
        "socp_alm_result_free",
        "socp_alm_check_sosc",
        "socp_alm_check_dual_qualification",
        "typedef struct SocpAlmProblem SocpAlmProblem;",
    ] {
        assert!(header.contains(f), "header lacks {f}");
    }
}

/// Directory holding the static library built alongside this test binary.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_static_library() {
    let lib = artifact_dir().join("libsocp_alm_ffi.a");
    let Ok(cc) = which_cc() else {
        eprintln!("skipping: no C compiler found");
        return;
    };
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <math.h>
#include "socp_alm.h"
int main(void) {
    SocpAlmProblem *p = NULL;
    if (socp_alm_problem_builtin("projection", "{\"a\": [0, 2, 0]}", &p) != SOCP_ALM_OK) return 10;
    double x0[3] = {0.1, 0.9, 0.05}, l0[3] = {-0.9, 1.1, 0.0}, x[3], l[3];
    SocpAlmOptions o = socp_alm_options_default();
    SocpAlmResult *r = NULL;
    if (socp_alm_solve(p, x0, l0, &o, &r) != SOCP_ALM_OK) return 11;
    if (socp_alm_result_status(r) != SOCP_ALM_STATUS_CONVERGED) return 12;
    socp_alm_result_x(r, x, 3);
    socp_alm_result_lambda(r, l, 3);
    if (fabs(x[0] - 1.0) > 1e-8 || fabs(l[0] + 1.0) > 1e-8) return 13;
    char msg[128];
    if (socp_alm_problem_builtin("nope", NULL, &p) != SOCP_ALM_ERR_PARSE) return 14;
    socp_alm_last_error(msg, sizeof msg);
    printf("ok %s\n", msg);
    socp_alm_result_free(r);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok unknown problem"));
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc);
        }
    }
    Err(())
}
