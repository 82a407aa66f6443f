//! C ABI over the simulator.
//!
//! Every fallible call returns a [`CatsimStatus`]; on failure the message is
//! kept per thread and read back with [`catsim_last_error_message`]. Objects
//! cross the boundary as opaque pointers, each with its own `_free`.
//! Strings handed out by the library are released with [`catsim_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use catsim::config::{load_scenario, ScenarioConfig};
use catsim::env::{run_episode, EpisodeTrace, PolicySource};
use catsim::error::{ConfigError, IoError, ModelError};
use catsim::government::Intervention;
use catsim::individual::{pmax_rational, ParetoUtility};
use catsim::rl::{train_market, MarketStateId, QTable};
use catsim::{insurer, io, metrics, welfare};

/// Number of market states a q-table has rows for.
pub const CATSIM_STATES: usize = 8;
/// Number of interventions, including doing nothing.
pub const CATSIM_ACTIONS: usize = 8;

const _: () = assert!(CATSIM_STATES == MarketStateId::COUNT && CATSIM_ACTIONS == Intervention::ALL.len());

/// Result of every fallible call. Anything but `Ok` leaves a message.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CatsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Model = 4,
    Io = 5,
    FingerprintMismatch = 6,
    Panic = 7,
}

/// Who acts in a simulated episode.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CatsimPolicyMode {
    /// Market alone, no taxes or interventions.
    NoGovernment = 0,
    /// Greedy actions from a q-table.
    Greedy = 1,
    /// A fixed list of interventions, cycled.
    Sequence = 2,
}

/// Summary of one simulated step. Missing values are NaN or -1.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatsimStep {
    pub t: usize,
    pub catastrophe: bool,
    pub coverage: f64,
    pub gini: f64,
    pub mean_wealth: f64,
    pub insured: usize,
    pub unserved: usize,
    pub active_insurers: usize,
    /// Market state index, -1 without a government.
    pub state: i32,
    /// Intervention index, -1 without a government.
    pub intervention: i32,
    /// MVPF credited to this step's intervention.
    pub reward: f64,
    pub treasury: f64,
    pub debt: f64,
}

/// Scenario configuration.
pub struct CatsimScenario {
    cfg: ScenarioConfig,
}

/// One simulated episode.
pub struct CatsimTrace {
    trace: EpisodeTrace,
}

/// Learned action values.
pub struct CatsimQTable {
    table: QTable,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let mut bytes = msg.into().into_bytes();
    bytes.retain(|b| *b != 0);
    let c = CString::new(bytes).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(CatsimStatus, String);

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure(CatsimStatus::Config, e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let status = match e {
            ModelError::Config(_) => CatsimStatus::Config,
            _ => CatsimStatus::Model,
        };
        Failure(status, e.to_string())
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        let status = match e {
            IoError::FingerprintMismatch { .. } => CatsimStatus::FingerprintMismatch,
            IoError::Config(_) => CatsimStatus::Config,
            IoError::Model(_) => CatsimStatus::Model,
            _ => CatsimStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CatsimStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(CatsimStatus::InvalidArgument, msg.into())
}

/// Runs `f`, turning errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CatsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CatsimStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            CatsimStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("`{what}` is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn obj<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

fn cstring(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| invalid("string contains an interior NUL"))
}

/// Message of the last failure on this thread; empty when none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn catsim_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, statically allocated.
#[no_mangle]
pub extern "C" fn catsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn catsim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Kebab-case name of an intervention, or null for a bad index.
#[no_mangle]
pub extern "C" fn catsim_intervention_name(action: u32) -> *const c_char {
    const NAMES: [&str; CATSIM_ACTIONS] = [
        "no-action\0",
        "state-insurance\0",
        "ease-solvency\0",
        "awareness\0",
        "subsidy\0",
        "premium-regulation\0",
        "prevention\0",
        "reinsurance\0",
    ];
    NAMES.get(action as usize).map_or(ptr::null(), |n| n.as_ptr().cast())
}

// ---- scenarios ----

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn catsim_scenario_default(out: *mut *mut CatsimScenario) -> CatsimStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = boxed(CatsimScenario {
            cfg: ScenarioConfig::default(),
        });
        Ok(())
    })
}

/// Parses and validates a TOML scenario.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn catsim_scenario_from_toml(toml: *const c_char, out: *mut *mut CatsimScenario) -> CatsimStatus {
    guard(|| {
        let text = str_arg(toml, "toml")?;
        let out = out_arg(out, "out")?;
        let (cfg, _warnings) = ScenarioConfig::from_toml_str(text)?;
        *out = boxed(CatsimScenario { cfg });
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn catsim_scenario_load(path: *const c_char, out: *mut *mut CatsimScenario) -> CatsimStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let (cfg, _warnings) = load_scenario(Path::new(path))?;
        *out = boxed(CatsimScenario { cfg });
        Ok(())
    })
}

/// Sets both the environment and the training seed.
///
/// # Safety
/// `scenario` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn catsim_scenario_set_seed(scenario: *mut CatsimScenario, seed: u64) -> CatsimStatus {
    guard(|| {
        let s = out_arg(scenario, "scenario")?;
        s.cfg.environment.seed = seed;
        s.cfg.training.seed = seed;
        Ok(())
    })
}

/// Overrides the number of training episodes.
///
/// # Safety
/// `scenario` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn catsim_scenario_set_training_episodes(
    scenario: *mut CatsimScenario,
    episodes: u64,
) -> CatsimStatus {
    guard(|| {
        let s = out_arg(scenario, "scenario")?;
        if episodes == 0 {
            return Err(invalid("episodes must be positive"));
        }
        s.cfg.training.episodes = episodes;
        Ok(())
    })
}

/// Serialises the scenario; free the result with `catsim_string_free`.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn catsim_scenario_to_toml(scenario: *const CatsimScenario, out: *mut *mut c_char) -> CatsimStatus {
    guard(|| {
        let s = obj(scenario, "scenario")?;
        let out = out_arg(out, "out")?;
        *out = cstring(s.cfg.to_toml_string())?;
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn catsim_scenario_free(scenario: *mut CatsimScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

// ---- episodes ----

/// Simulates one episode.
///
/// `qtable` is read in `Greedy` mode and `actions`/`n_actions` in
/// `Sequence` mode; otherwise they may be null.
///
/// # Safety
/// Pointers must be live handles or valid arrays of the stated length.
#[no_mangle]
pub unsafe extern "C" fn catsim_run_episode(
    scenario: *const CatsimScenario,
    seed: u64,
    mode: CatsimPolicyMode,
    qtable: *const CatsimQTable,
    actions: *const u32,
    n_actions: usize,
    out: *mut *mut CatsimTrace,
) -> CatsimStatus {
    guard(|| {
        let s = obj(scenario, "scenario")?;
        let out = out_arg(out, "out")?;
        let policy = match mode {
            CatsimPolicyMode::NoGovernment => PolicySource::NoGovernment,
            CatsimPolicyMode::Greedy => PolicySource::Greedy(&obj(qtable, "qtable")?.table),
            CatsimPolicyMode::Sequence => {
                if actions.is_null() {
                    return Err(null("actions"));
                }
                if n_actions == 0 {
                    return Err(invalid("a sequence needs at least one action"));
                }
                let seq = std::slice::from_raw_parts(actions, n_actions)
                    .iter()
                    .map(|&a| {
                        Intervention::from_index(a as usize).ok_or_else(|| invalid(format!("no intervention {a}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                PolicySource::Sequence(seq)
            }
        };
        let trace = run_episode(&s.cfg, seed, &policy)?;
        *out = boxed(CatsimTrace { trace });
        Ok(())
    })
}

/// Number of recorded steps; 0 for a null handle.
///
/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn catsim_trace_len(trace: *const CatsimTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.trace.records.len())
}

/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn catsim_trace_step(trace: *const CatsimTrace, index: usize, out: *mut CatsimStep) -> CatsimStatus {
    guard(|| {
        let t = obj(trace, "trace")?;
        let out = out_arg(out, "out")?;
        let r = t
            .trace
            .records
            .get(index)
            .ok_or_else(|| invalid(format!("step {index} is past the end ({})", t.trace.records.len())))?;
        *out = CatsimStep {
            t: r.t,
            catastrophe: r.market.catastrophe,
            coverage: r.market.coverage,
            gini: r.gini,
            mean_wealth: r.mean_wealth,
            insured: r.market.insured,
            unserved: r.market.unserved,
            active_insurers: r.active_insurers,
            state: r.state.map_or(-1, |s| s.index() as i32),
            intervention: r.intervention.map_or(-1, |a| a.index() as i32),
            reward: r.reward().unwrap_or(f64::NAN),
            treasury: r.treasury,
            debt: r.debt,
        };
        Ok(())
    })
}

/// Writes the per-step trace as CSV.
///
/// # Safety
/// `trace` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn catsim_trace_write_csv(trace: *const CatsimTrace, path: *const c_char) -> CatsimStatus {
    guard(|| {
        let t = obj(trace, "trace")?;
        let path = str_arg(path, "path")?;
        io::write_trace_csv(&t.trace, Path::new(path))?;
        Ok(())
    })
}

/// # Safety
/// `trace` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn catsim_trace_free(trace: *mut CatsimTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

// ---- q-tables ----

/// Trains a policy with the scenario's training settings.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn catsim_train(scenario: *const CatsimScenario, out: *mut *mut CatsimQTable) -> CatsimStatus {
    guard(|| {
        let s = obj(scenario, "scenario")?;
        let out = out_arg(out, "out")?;
        let outcome = train_market(&s.cfg)?;
        *out = boxed(CatsimQTable { table: outcome.table });
        Ok(())
    })
}

/// Loads a saved table. When `scenario` is non-null the table must have
/// been trained on an equivalent scenario.
///
/// # Safety
/// `path` must be a NUL-terminated string; `scenario` a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn catsim_qtable_load(
    path: *const c_char,
    scenario: *const CatsimScenario,
    out: *mut *mut CatsimQTable,
) -> CatsimStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let cfg = scenario.as_ref().map(|s| &s.cfg);
        let (table, _training) = io::load_qtable(Path::new(path), cfg)?;
        *out = boxed(CatsimQTable { table });
        Ok(())
    })
}

/// # Safety
/// Handles must be live; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn catsim_qtable_save(
    qtable: *const CatsimQTable,
    scenario: *const CatsimScenario,
    path: *const c_char,
) -> CatsimStatus {
    guard(|| {
        let q = obj(qtable, "qtable")?;
        let s = obj(scenario, "scenario")?;
        let path = str_arg(path, "path")?;
        io::save_qtable(Path::new(path), &q.table, &s.cfg)?;
        Ok(())
    })
}

fn cell(q: &QTable, state: u32, action: u32) -> Result<(usize, usize), Failure> {
    let (s, a) = (state as usize, action as usize);
    if s >= q.states() || a >= q.actions() {
        return Err(invalid(format!("cell ({s}, {a}) is outside {}x{}", q.states(), q.actions())));
    }
    Ok((s, a))
}

/// # Safety
/// `qtable` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn catsim_qtable_get(qtable: *const CatsimQTable, state: u32, action: u32, out: *mut f64) -> CatsimStatus {
    guard(|| {
        let q = &obj(qtable, "qtable")?.table;
        let out = out_arg(out, "out")?;
        let (s, a) = cell(q, state, action)?;
        *out = q.q(s, a);
        Ok(())
    })
}

/// Greedy action for a state; ties go to the lower index.
///
/// # Safety
/// `qtable` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn catsim_qtable_best(qtable: *const CatsimQTable, state: u32, out: *mut u32) -> CatsimStatus {
    guard(|| {
        let q = &obj(qtable, "qtable")?.table;
        let out = out_arg(out, "out")?;
        let (s, _) = cell(q, state, 0)?;
        *out = q.best(s) as u32;
        Ok(())
    })
}

/// # Safety
/// `qtable` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn catsim_qtable_free(qtable: *mut CatsimQTable) {
    if !qtable.is_null() {
        drop(Box::from_raw(qtable));
    }
}

// ---- formulas ----

/// Gini index of `n` non-negative wealths.
///
/// # Safety
/// `wealths` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn catsim_gini(wealths: *const f64, n: usize, out: *mut f64) -> CatsimStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if wealths.is_null() {
            return Err(null("wealths"));
        }
        *out = metrics::gini_index(std::slice::from_raw_parts(wealths, n))?;
        Ok(())
    })
}

/// Largest premium a rational buyer accepts under a Pareto utility.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn catsim_pmax_rational(
    wealth: f64,
    risk_perception: f64,
    perceived_loss_rate: f64,
    utility_scale: f64,
    utility_curvature: f64,
    out: *mut f64,
) -> CatsimStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if !(wealth >= 0.0) {
            return Err(ModelError::NegativeWealth(wealth).into());
        }
        if !(0.0..=1.0).contains(&risk_perception) || !(0.0..=1.0).contains(&perceived_loss_rate) {
            return Err(invalid("probabilities must lie in [0, 1]"));
        }
        let u = ParetoUtility::new(utility_scale, utility_curvature)?;
        *out = pmax_rational(wealth, risk_perception, perceived_loss_rate, &u);
        Ok(())
    })
}

/// Capital an insurer holds per policy at a solvency percentile.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn catsim_reserve_per_policy(percentile: f64, mean: f64, sd: f64, out: *mut f64) -> CatsimStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = insurer::reserve_per_policy(percentile, mean, sd)?;
        Ok(())
    })
}

/// Loaded premium for one policy.
#[no_mangle]
pub extern "C" fn catsim_premium_quote(rate: f64, loading: f64, loss_rate: f64, wealth: f64) -> f64 {
    insurer::premium_quote(rate, loading, loss_rate, wealth)
}

/// Marginal value of public funds, `wtp / net_cost` limited to `[0, cap]`.
#[no_mangle]
pub extern "C" fn catsim_mvpf(wtp: f64, net_cost: f64, cap: f64) -> f64 {
    welfare::mvpf(wtp, net_cost, cap)
}
