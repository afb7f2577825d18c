use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use csapo_ffi::*;

fn last_error() -> String {
    let p = csapo_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn benchmark() -> *mut CsapoGame {
    let mut game = ptr::null_mut();
    assert_eq!(unsafe { csapo_game_generate(ptr::null(), &mut game) }, CsapoStatus::Ok);
    assert!(!game.is_null());
    game
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(csapo_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn game_json_round_trip() {
    let game = benchmark();
    unsafe {
        assert_eq!(csapo_game_horizon(game), 3);
        let mut json = ptr::null_mut();
        assert_eq!(csapo_game_to_json(game, &mut json), CsapoStatus::Ok);
        let mut copy = ptr::null_mut();
        assert_eq!(csapo_game_from_json(json, &mut copy), CsapoStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(csapo_game_to_json(copy, &mut again), CsapoStatus::Ok);
        assert_eq!(CStr::from_ptr(json), CStr::from_ptr(again));
        csapo_string_free(json);
        csapo_string_free(again);
        csapo_game_free(copy);
        csapo_game_free(game);
    }
}

#[test]
fn errors_are_reported_with_codes() {
    unsafe {
        let mut game = ptr::null_mut();
        assert_eq!(csapo_game_from_json(ptr::null(), &mut game), CsapoStatus::NullPointer);
        assert!(last_error().contains("null"));
        let bad = CString::new("{not json").unwrap();
        assert_eq!(csapo_game_from_json(bad.as_ptr(), &mut game), CsapoStatus::Parse);
        assert!(game.is_null());
        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(
            csapo_game_from_json(invalid.as_ptr().cast(), &mut game),
            CsapoStatus::InvalidUtf8
        );
        let mut params = CsapoParams {
            v: 0.0,
            eta: 0.0,
            theta: 0.0,
            delta: 0.0,
        };
        assert_eq!(csapo_default_params(0, 10, &mut params), CsapoStatus::InvalidArgument);
        assert_eq!(csapo_default_params(2, 100, &mut params), CsapoStatus::Ok);
        assert!(csapo_last_error().is_null());
        assert!((params.v - 20.0).abs() < 1e-12);
        assert!((params.eta - 1.0 / 200.0).abs() < 1e-15);
    }
}

#[test]
fn bad_parameters_are_rejected() {
    let game = benchmark();
    unsafe {
        let params = CsapoParams {
            v: -1.0,
            eta: 0.1,
            theta: 0.0,
            delta: 0.1,
        };
        let mut run = ptr::null_mut();
        let status = csapo_run(game, 8, 0, CsapoMode::Coupled, &params, &mut run);
        assert_eq!(status, CsapoStatus::InvalidArgument);
        assert!(run.is_null());
        csapo_game_free(game);
    }
}

#[test]
fn run_and_evaluate() {
    let game = benchmark();
    unsafe {
        let mut run = ptr::null_mut();
        assert_eq!(
            csapo_run(game, 64, 3, CsapoMode::Side, ptr::null(), &mut run),
            CsapoStatus::Ok
        );
        assert_eq!(csapo_run_length(run), 64);
        let mut l1 = vec![f64::NAN; 64];
        let mut l2 = vec![f64::NAN; 64];
        assert_eq!(
            csapo_run_lambda(run, l1.as_mut_ptr(), l2.as_mut_ptr(), 64),
            CsapoStatus::Ok
        );
        assert!(l1.iter().chain(&l2).all(|x| x.is_finite() && *x >= 0.0));

        let mut eval = ptr::null_mut();
        assert_eq!(csapo_evaluate(game, run, 1e-3, &mut eval), CsapoStatus::Ok);
        let mut regret = vec![f64::NAN; 80];
        assert_eq!(csapo_evaluation_regret(eval, regret.as_mut_ptr(), 80), CsapoStatus::Ok);
        assert!(regret[..64].iter().all(|x| x.is_finite()));
        assert!(regret[64..].iter().all(|x| x.is_nan()));
        let mut v = vec![0.0; 64];
        assert_eq!(csapo_evaluation_violation(eval, 1, v.as_mut_ptr(), 64), CsapoStatus::Ok);
        assert!(v.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert_eq!(
            csapo_evaluation_violation(eval, 2, v.as_mut_ptr(), 64),
            CsapoStatus::InvalidArgument
        );
        let mut json = ptr::null_mut();
        assert_eq!(csapo_evaluation_summary_json(eval, &mut json), CsapoStatus::Ok);
        let summary: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(summary["mode"], "side");
        csapo_string_free(json);
        csapo_evaluation_free(eval);
        csapo_run_free(run);
        csapo_game_free(game);
    }
}

#[test]
fn free_functions_accept_null() {
    unsafe {
        csapo_game_free(ptr::null_mut());
        csapo_run_free(ptr::null_mut());
        csapo_evaluation_free(ptr::null_mut());
        csapo_string_free(ptr::null_mut());
        assert_eq!(csapo_game_horizon(ptr::null()), 0);
        assert_eq!(csapo_run_length(ptr::null()), 0);
    }
}

fn header() -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/csapo.h");
    std::fs::read_to_string(path).expect("header generated by the build script")
}

#[test]
fn header_declares_the_api() {
    let h = header();
    assert!(h.starts_with("#ifndef CSAPO_H"));
    for symbol in [
        "typedef struct CsapoGame CsapoGame;",
        "typedef struct CsapoRun CsapoRun;",
        "typedef struct CsapoEvaluation CsapoEvaluation;",
        "CSAPO_STATUS_OK = 0",
        "CSAPO_STATUS_PANIC = 8",
        "CSAPO_MODE_SIDE = 1",
        "const char *csapo_version(void);",
        "enum CsapoStatus csapo_run(",
        "void csapo_game_free(struct CsapoGame *game);",
        "enum CsapoStatus csapo_evaluation_summary_json(",
    ] {
        assert!(h.contains(symbol), "missing `{symbol}`");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "csapo.h"

int main(void) {
    CsapoGame *game = NULL;
    if (csapo_game_generate(NULL, &game) != CSAPO_STATUS_OK) return 1;
    CsapoRun *run = NULL;
    if (csapo_run(game, 32, 1, CSAPO_MODE_COUPLED, NULL, &run) != CSAPO_STATUS_OK) return 2;
    double lambda[32];
    if (csapo_run_lambda(run, lambda, NULL, 32) != CSAPO_STATUS_OK) return 3;
    if (csapo_game_from_json("[", &game) != CSAPO_STATUS_PARSE) return 4;
    if (csapo_last_error() == NULL) return 5;
    printf("%zu %s\n", csapo_run_length(run), csapo_version());
    csapo_run_free(run);
    csapo_game_free(game);
    return 0;
}
"#;

#[test]
fn c_program_links_against_the_library() {
    let Ok(exe) = std::env::current_exe() else { return };
    let lib_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = lib_dir.join("libcsapo_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.trim(), format!("32 {}", env!("CARGO_PKG_VERSION")));
}
