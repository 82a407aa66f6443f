//! The exported functions called the way a C caller would.

use std::ffi::{CStr, CString};
use std::ptr;

use catsim::config::ScenarioConfig;
use catsim::env::{run_episode, PolicySource};
use catsim_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(catsim_last_error_message()) }.to_string_lossy().into_owned()
}

fn scenario(toml: &str) -> *mut CatsimScenario {
    let text = CString::new(toml).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { catsim_scenario_from_toml(text.as_ptr(), &mut s) }, CatsimStatus::Ok);
    s
}

#[test]
fn version_and_names() {
    let v = unsafe { CStr::from_ptr(catsim_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let name = |a| unsafe { CStr::from_ptr(catsim_intervention_name(a)) }.to_str().unwrap().to_string();
    assert_eq!(name(0), "no-action");
    assert_eq!(name(7), "reinsurance");
    assert!(catsim_intervention_name(8).is_null());
}

#[test]
fn null_pointers_are_reported_not_dereferenced() {
    unsafe {
        assert_eq!(catsim_scenario_default(ptr::null_mut()), CatsimStatus::NullPointer);
        assert!(last_error().contains("out"));
        let mut s = ptr::null_mut();
        assert_eq!(catsim_scenario_from_toml(ptr::null(), &mut s), CatsimStatus::NullPointer);
        assert!(s.is_null());
        assert_eq!(catsim_trace_len(ptr::null()), 0);
        let mut g = 0.0;
        assert_eq!(catsim_gini(ptr::null(), 3, &mut g), CatsimStatus::NullPointer);
        let mut t = ptr::null_mut();
        assert_eq!(
            catsim_run_episode(ptr::null(), 0, CatsimPolicyMode::NoGovernment, ptr::null(), ptr::null(), 0, &mut t),
            CatsimStatus::NullPointer
        );
        catsim_scenario_free(ptr::null_mut());
        catsim_trace_free(ptr::null_mut());
        catsim_qtable_free(ptr::null_mut());
        catsim_string_free(ptr::null_mut());
    }
}

#[test]
fn bad_scenarios_carry_a_config_status() {
    let text = CString::new("[environment]\ncatastrophe_probability = 2.0\n").unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { catsim_scenario_from_toml(text.as_ptr(), &mut s) }, CatsimStatus::Config);
    assert!(last_error().contains("catastrophe_probability"));
    let path = CString::new("/nonexistent/scenario.toml").unwrap();
    assert_eq!(unsafe { catsim_scenario_load(path.as_ptr(), &mut s) }, CatsimStatus::Config);
}

#[test]
fn scenario_round_trips_through_toml() {
    unsafe {
        let s = scenario("[environment]\ncatastrophe_probability = 0.05\n");
        assert_eq!(catsim_scenario_set_seed(s, 17), CatsimStatus::Ok);
        let mut text = ptr::null_mut();
        assert_eq!(catsim_scenario_to_toml(s, &mut text), CatsimStatus::Ok);
        let owned = CStr::from_ptr(text).to_str().unwrap().to_string();
        catsim_string_free(text);
        let (cfg, _) = ScenarioConfig::from_toml_str(&owned).unwrap();
        assert_eq!(cfg.environment.catastrophe_probability, 0.05);
        assert_eq!((cfg.environment.seed, cfg.training.seed), (17, 17));
        catsim_scenario_free(s);
    }
}

#[test]
fn episodes_match_the_library() {
    unsafe {
        let s = scenario("");
        let actions = [3u32, 4];
        let mut t = ptr::null_mut();
        assert_eq!(
            catsim_run_episode(s, 5, CatsimPolicyMode::Sequence, ptr::null(), actions.as_ptr(), 2, &mut t),
            CatsimStatus::Ok
        );
        let cfg = ScenarioConfig::default();
        let policy = PolicySource::Sequence(vec![
            catsim::government::Intervention::Awareness,
            catsim::government::Intervention::Subsidy,
        ]);
        let want = run_episode(&cfg, 5, &policy).unwrap();
        assert_eq!(catsim_trace_len(t), want.records.len());
        for (i, r) in want.records.iter().enumerate() {
            let mut step = std::mem::zeroed::<CatsimStep>();
            assert_eq!(catsim_trace_step(t, i, &mut step), CatsimStatus::Ok);
            assert_eq!(step.t, r.t);
            assert_eq!(step.coverage, r.market.coverage);
            assert_eq!(step.intervention, if i % 2 == 0 { 3 } else { 4 });
            assert!(step.state >= 0 && (step.state as usize) < CATSIM_STATES);
        }
        let mut step = std::mem::zeroed::<CatsimStep>();
        assert_eq!(catsim_trace_step(t, want.records.len(), &mut step), CatsimStatus::InvalidArgument);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("t.csv").to_str().unwrap()).unwrap();
        assert_eq!(catsim_trace_write_csv(t, path.as_ptr()), CatsimStatus::Ok);
        catsim_trace_free(t);

        let bad = [9u32];
        assert_eq!(
            catsim_run_episode(s, 5, CatsimPolicyMode::Sequence, ptr::null(), bad.as_ptr(), 1, &mut t),
            CatsimStatus::InvalidArgument
        );
        assert_eq!(
            catsim_run_episode(s, 5, CatsimPolicyMode::Sequence, ptr::null(), actions.as_ptr(), 0, &mut t),
            CatsimStatus::InvalidArgument
        );
        assert_eq!(
            catsim_run_episode(s, 5, CatsimPolicyMode::NoGovernment, ptr::null(), ptr::null(), 0, &mut t),
            CatsimStatus::Ok
        );
        let mut step = std::mem::zeroed::<CatsimStep>();
        catsim_trace_step(t, 0, &mut step);
        assert_eq!((step.state, step.intervention), (-1, -1));
        assert!(step.reward.is_nan());
        catsim_trace_free(t);
        catsim_scenario_free(s);
    }
}

#[test]
fn training_saves_loads_and_guards_the_scenario() {
    unsafe {
        let s = scenario("");
        assert_eq!(catsim_scenario_set_training_episodes(s, 50), CatsimStatus::Ok);
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(catsim_train(s, &mut a), CatsimStatus::Ok);
        assert_eq!(catsim_train(s, &mut b), CatsimStatus::Ok);
        for st in 0..CATSIM_STATES as u32 {
            for ac in 0..CATSIM_ACTIONS as u32 {
                let (mut x, mut y) = (0.0, 0.0);
                catsim_qtable_get(a, st, ac, &mut x);
                catsim_qtable_get(b, st, ac, &mut y);
                assert_eq!(x.to_bits(), y.to_bits());
                assert!(x.is_finite() && x >= 0.0);
            }
        }
        let mut q = 0.0;
        assert_eq!(catsim_qtable_get(a, 8, 0, &mut q), CatsimStatus::InvalidArgument);
        let mut best = 99;
        assert_eq!(catsim_qtable_best(a, 0, &mut best), CatsimStatus::Ok);
        assert!((best as usize) < CATSIM_ACTIONS);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("q.toml").to_str().unwrap()).unwrap();
        assert_eq!(catsim_qtable_save(a, s, path.as_ptr()), CatsimStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(catsim_qtable_load(path.as_ptr(), s, &mut loaded), CatsimStatus::Ok);
        let mut reloaded_best = 99;
        catsim_qtable_best(loaded, 0, &mut reloaded_best);
        assert_eq!(reloaded_best, best);

        let other = scenario("[environment]\ncatastrophe_probability = 0.05\n");
        let mut refused = ptr::null_mut();
        assert_eq!(catsim_qtable_load(path.as_ptr(), other, &mut refused), CatsimStatus::FingerprintMismatch);
        assert!(refused.is_null());
        assert!(last_error().contains("fingerprint"));
        assert_eq!(catsim_qtable_load(path.as_ptr(), ptr::null(), &mut refused), CatsimStatus::Ok);

        let mut t = ptr::null_mut();
        assert_eq!(
            catsim_run_episode(s, 1, CatsimPolicyMode::Greedy, loaded, ptr::null(), 0, &mut t),
            CatsimStatus::Ok
        );
        catsim_trace_free(t);
        for h in [a, b, loaded, refused] {
            catsim_qtable_free(h);
        }
        catsim_scenario_free(s);
        catsim_scenario_free(other);
    }
}

#[test]
fn formulas() {
    unsafe {
        let w = [1.0, 2.0, 3.0, 4.0];
        let mut g = 0.0;
        assert_eq!(catsim_gini(w.as_ptr(), 4, &mut g), CatsimStatus::Ok);
        assert!((g - 0.25).abs() < 1e-12);
        assert_eq!(catsim_gini(w.as_ptr(), 0, &mut g), CatsimStatus::Model);

        let mut p = 0.0;
        assert_eq!(catsim_pmax_rational(50_000.0, 0.1, 0.5, 10_000.0, 2.0, &mut p), CatsimStatus::Ok);
        assert!((p - 2587.0).abs() < 1.0, "{p}");
        assert_eq!(catsim_pmax_rational(-1.0, 0.5, 0.1, 1000.0, 2.0, &mut p), CatsimStatus::Model);
        assert_eq!(catsim_pmax_rational(1.0, 1.5, 0.1, 1000.0, 2.0, &mut p), CatsimStatus::InvalidArgument);
        assert_eq!(catsim_pmax_rational(1.0, 0.5, 0.1, -1.0, 2.0, &mut p), CatsimStatus::Model);

        let mut r = 0.0;
        assert_eq!(catsim_reserve_per_policy(0.5, 100.0, 10.0, &mut r), CatsimStatus::Ok);
        assert!((r - 100.0).abs() < 1e-9);
        assert_ne!(catsim_reserve_per_policy(1.0, 100.0, 10.0, &mut r), CatsimStatus::Ok);

        assert!((catsim_premium_quote(0.02, 0.1, 0.1, 50_000.0) - 0.022 * 0.1 * 50_000.0).abs() < 1e-9);
        assert_eq!(catsim_mvpf(2.0, 1.0, 10.0), 2.0);
        assert_eq!(catsim_mvpf(-2.0, 1.0, 10.0), 0.0);
    }
}

#[test]
fn panics_are_contained() {
    // A NaN percentile is the closest thing to a hostile input the API
    // accepts; whatever happens, the caller gets a status back.
    let mut r = 0.0;
    let status = unsafe { catsim_reserve_per_policy(f64::NAN, 1.0, 1.0, &mut r) };
    assert_ne!(status, CatsimStatus::Ok);
    assert!(!last_error().is_empty());
}
