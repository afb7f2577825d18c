//! C ABI for the csapo library.
//!
//! Objects cross the boundary as opaque handles created by `*_generate`,
//! `*_from_json`, `csapo_run` or `csapo_evaluate` and released with the
//! matching `*_free`. Every fallible call returns a [`CsapoStatus`]; on
//! failure `csapo_last_error` describes the problem. Strings returned
//! through out-pointers are owned by the caller and released with
//! `csapo_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use csapo::game::{generate_random_game, GameSpec, LayeredGame};
use csapo::harness::{benchmark_spec, comparator_for, summarize, RunSummary};
use csapo::hindsight::HindsightOptions;
use csapo::lagrangian::{run_ucb_csapo, EpisodeLog, Mode, Params, RunOptions};
use csapo::metrics::{evaluate, Evaluation};
use csapo::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CsapoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Infeasible = 4,
    NonConverged = 5,
    Io = 6,
    Parse = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CsapoMode {
    /// One budget on the sum of both players' utilities.
    Coupled = 0,
    /// One budget per player.
    Side = 1,
}

/// Learner parameters; see `csapo_default_params`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CsapoParams {
    pub v: f64,
    pub eta: f64,
    pub theta: f64,
    pub delta: f64,
}

/// Opaque game handle.
pub struct CsapoGame(LayeredGame);

/// Opaque handle to a finished run.
pub struct CsapoRun(EpisodeLog);

/// Opaque handle to the metrics of a run.
pub struct CsapoEvaluation {
    eval: Evaluation,
    summary: RunSummary,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(CsapoStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn status_of(e: &Error) -> CsapoStatus {
    match e {
        Error::InfeasibleSpec(_) | Error::InfeasibleBudget { .. } => CsapoStatus::Infeasible,
        Error::NonConverged { .. } | Error::ComparatorNonConverged { .. } | Error::DivergedDuals => {
            CsapoStatus::NonConverged
        }
        Error::Episode { source, .. } => status_of(source),
        Error::Io { .. } => CsapoStatus::Io,
        Error::Json(_) | Error::Csv(_) | Error::Config(_) => CsapoStatus::Parse,
        _ => CsapoStatus::InvalidArgument,
    }
}

fn null(what: &str) -> Failure {
    Failure(CsapoStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any failure (including a panic) and returns its status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CsapoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CsapoStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CsapoStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure(CsapoStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = CString::new(s)
        .map_err(|_| Failure(CsapoStatus::InvalidArgument, "string contains a nul byte".into()))?
        .into_raw();
    Ok(())
}

unsafe fn copy_series(values: &[f64], out: *mut f64, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    let n = len.min(values.len());
    ptr::copy_nonoverlapping(values.as_ptr(), out, n);
    Ok(())
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn csapo_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(s) => s,
        Err(_) => panic!("version has no interior nul"),
    };
    VERSION.as_ptr()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn csapo_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn csapo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Theorem-default parameters for horizon `L` and `T` episodes.
///
/// # Safety
/// `out` must be null or point to writable memory for one `CsapoParams`.
#[no_mangle]
pub unsafe extern "C" fn csapo_default_params(horizon: usize, episodes: u64, out: *mut CsapoParams) -> CsapoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        if horizon == 0 || episodes == 0 {
            return Err(Failure(
                CsapoStatus::InvalidArgument,
                "horizon and episodes must be positive".into(),
            ));
        }
        let p = Params::theorem_defaults(horizon, episodes as usize);
        *out = CsapoParams {
            v: p.v,
            eta: p.eta,
            theta: p.theta,
            delta: p.delta,
        };
        Ok(())
    })
}

/// Generates a random game from a JSON generator spec (null for the benchmark).
///
/// # Safety
/// `spec_json` must be null or a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn csapo_game_generate(spec_json: *const c_char, out: *mut *mut CsapoGame) -> CsapoStatus {
    guard(|| {
        let spec = if spec_json.is_null() {
            benchmark_spec()
        } else {
            serde_json::from_str::<GameSpec>(read_str(spec_json, "spec")?)
                .map_err(|e| Failure(CsapoStatus::Parse, e.to_string()))?
        };
        write_out(out, CsapoGame(generate_random_game(&spec)?))
    })
}

/// Loads a game from its JSON document.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn csapo_game_from_json(json: *const c_char, out: *mut *mut CsapoGame) -> CsapoStatus {
    guard(|| write_out(out, CsapoGame(LayeredGame::from_json(read_str(json, "json")?)?)))
}

/// Serializes a game; free the result with `csapo_string_free`.
///
/// # Safety
/// `game` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn csapo_game_to_json(game: *const CsapoGame, out: *mut *mut c_char) -> CsapoStatus {
    guard(|| {
        let game = game.as_ref().ok_or_else(|| null("game"))?;
        write_string(out, game.0.to_json()?)
    })
}

/// Number of decision layers, or 0 for a null handle.
///
/// # Safety
/// `game` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn csapo_game_horizon(game: *const CsapoGame) -> usize {
    game.as_ref().map_or(0, |g| g.0.horizon())
}

/// # Safety
/// `game` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn csapo_game_free(game: *mut CsapoGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

/// Runs the learner for `episodes` episodes. `params` may be null for the
/// theorem defaults.
///
/// # Safety
/// `game` must be a live handle, `params` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csapo_run(
    game: *const CsapoGame,
    episodes: u64,
    seed: u64,
    mode: CsapoMode,
    params: *const CsapoParams,
    out: *mut *mut CsapoRun,
) -> CsapoStatus {
    guard(|| {
        let game = &game.as_ref().ok_or_else(|| null("game"))?.0;
        let t = episodes as usize;
        let mut p = Params::theorem_defaults(game.horizon(), t.max(1));
        if let Some(c) = params.as_ref() {
            p.v = c.v;
            p.eta = c.eta;
            p.theta = c.theta;
            p.delta = c.delta;
        }
        let mode = match mode {
            CsapoMode::Coupled => Mode::Coupled,
            CsapoMode::Side => Mode::Side,
        };
        let log = run_ucb_csapo(game, &p, t, seed, mode, &RunOptions::default())?;
        write_out(out, CsapoRun(log))
    })
}

/// Number of episodes in the run, or 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn csapo_run_length(run: *const CsapoRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.len())
}

/// Copies up to `len` multipliers per episode. In the coupled mode both
/// buffers receive the shared multiplier; `lambda2` may be null.
///
/// # Safety
/// `run` must be a live handle; buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn csapo_run_lambda(
    run: *const CsapoRun,
    lambda1: *mut f64,
    lambda2: *mut f64,
    len: usize,
) -> CsapoStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        let (l1, l2): (Vec<f64>, Vec<f64>) = run.0.records.iter().map(|r| r.lambda).unzip();
        copy_series(&l1, lambda1, len)?;
        if !lambda2.is_null() {
            copy_series(&l2, lambda2, len)?;
        }
        Ok(())
    })
}

/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn csapo_run_free(run: *mut CsapoRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Solves the comparator to exploitability `tol` and computes the metrics.
///
/// # Safety
/// `game` and `run` must be live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csapo_evaluate(
    game: *const CsapoGame,
    run: *const CsapoRun,
    tol: f64,
    out: *mut *mut CsapoEvaluation,
) -> CsapoStatus {
    guard(|| {
        let game = &game.as_ref().ok_or_else(|| null("game"))?.0;
        let log = &run.as_ref().ok_or_else(|| null("run"))?.0;
        let options = HindsightOptions {
            tol,
            ..HindsightOptions::default()
        };
        let comparator = comparator_for(game, log.mode, log.episodes, &options)?;
        let eval = evaluate(log, game, &comparator)?;
        let summary = summarize(log, &eval, &comparator);
        write_out(out, CsapoEvaluation { eval, summary })
    })
}

/// Copies up to `len` values of the cumulative regret.
///
/// # Safety
/// `eval` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn csapo_evaluation_regret(
    eval: *const CsapoEvaluation,
    out: *mut f64,
    len: usize,
) -> CsapoStatus {
    guard(|| {
        let e = eval.as_ref().ok_or_else(|| null("evaluation"))?;
        copy_series(&e.eval.regret.cumulative, out, len)
    })
}

/// Copies up to `len` values of the violation of `constraint` (0 in the
/// coupled mode, 0 or 1 in the side mode).
///
/// # Safety
/// `eval` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn csapo_evaluation_violation(
    eval: *const CsapoEvaluation,
    constraint: usize,
    out: *mut f64,
    len: usize,
) -> CsapoStatus {
    guard(|| {
        let e = eval.as_ref().ok_or_else(|| null("evaluation"))?;
        if constraint >= e.eval.violation.realized.len() {
            return Err(Failure(
                CsapoStatus::InvalidArgument,
                format!("constraint {constraint} out of range"),
            ));
        }
        copy_series(&e.eval.violation.violation(constraint), out, len)
    })
}

/// Summary of the evaluation as JSON; free with `csapo_string_free`.
///
/// # Safety
/// `eval` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csapo_evaluation_summary_json(
    eval: *const CsapoEvaluation,
    out: *mut *mut c_char,
) -> CsapoStatus {
    guard(|| {
        let e = eval.as_ref().ok_or_else(|| null("evaluation"))?;
        let json = serde_json::to_string(&e.summary).map_err(|e| Failure(CsapoStatus::Parse, e.to_string()))?;
        write_string(out, json)
    })
}

/// # Safety
/// `eval` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn csapo_evaluation_free(eval: *mut CsapoEvaluation) {
    if !eval.is_null() {
        drop(Box::from_raw(eval));
    }
}
