use std::ffi::{CStr, CString};
use std::ptr;

use rsos_ffi::*;

fn last_error() -> String {
    let p = rsos_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

const RSOS: RsosModel = RsosModel {
    kind: RsosModelKind::Rsos as i32,
    k: 0,
};

fn zero() -> RsosInit {
    RsosInit {
        kind: RsosInitKind::Zero as i32,
        heights: ptr::null(),
        len: 0,
    }
}

fn generate(dim: usize, radius: i32, horizon: f64, seed: u64) -> *mut RsosEventSet {
    let mut set = ptr::null_mut();
    let st = unsafe { rsos_event_set_generate(dim, radius, horizon, 1.0, false, seed, &mut set) };
    assert_eq!(st, RsosStatus::Ok);
    assert!(!set.is_null());
    set
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(rsos_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn evolution_agrees_with_the_path_value() {
    let set = generate(1, 12, 4.0, 7);
    unsafe {
        assert!(rsos_event_set_len(set) > 0);
        let mut field = ptr::null_mut();
        assert_eq!(rsos_evolve(set, RSOS, zero(), 4.0, &mut field), RsosStatus::Ok);
        let n = rsos_field_len(field);
        assert_eq!(n, 25);
        let mut heights = vec![0i64; n];
        assert_eq!(rsos_field_heights(field, heights.as_mut_ptr(), n), RsosStatus::Ok);
        let origin = [0i32];
        let mut h = -1;
        assert_eq!(rsos_field_height_at(field, origin.as_ptr(), 1, &mut h), RsosStatus::Ok);
        assert_eq!(h, heights[12]);

        let (mut value, mut exact) = (-1i64, false);
        let st = rsos_min_weight(set, 4.0, origin.as_ptr(), 1, zero(), 0.0, RSOS, &mut value, &mut exact);
        assert_eq!(st, RsosStatus::Ok);
        assert!(exact);
        assert_eq!(value, h);
        rsos_field_free(field);
        rsos_event_set_free(set);
    }
}

#[test]
fn jsonl_round_trip_and_reversal() {
    let set = generate(2, 2, 1.5, 3);
    unsafe {
        let mut text = ptr::null_mut();
        assert_eq!(rsos_event_set_to_jsonl(set, &mut text), RsosStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(rsos_event_set_from_jsonl(text, &mut back), RsosStatus::Ok);
        assert_eq!(rsos_event_set_len(back), rsos_event_set_len(set));

        let mut rev = ptr::null_mut();
        let mut rev2 = ptr::null_mut();
        assert_eq!(rsos_event_set_reverse(set, &mut rev), RsosStatus::Ok);
        assert_eq!(rsos_event_set_reverse(rev, &mut rev2), RsosStatus::Ok);
        let mut text2 = ptr::null_mut();
        assert_eq!(rsos_event_set_to_jsonl(rev2, &mut text2), RsosStatus::Ok);
        assert_eq!(CStr::from_ptr(text), CStr::from_ptr(text2));

        rsos_string_free(text);
        rsos_string_free(text2);
        for s in [set, back, rev, rev2] {
            rsos_event_set_free(s);
        }
    }
}

#[test]
fn dual_run_reports_minimum_and_hitting_times() {
    let mut set = ptr::null_mut();
    unsafe {
        assert_eq!(rsos_event_set_generate_for_dual(1, 5.0, 11, &mut set), RsosStatus::Ok);
        let mut traj = ptr::null_mut();
        assert_eq!(rsos_dual_run(set, 5.0, &mut traj), RsosStatus::Ok);
        let (mut m, mut exact) = (-1i64, false);
        assert_eq!(rsos_dual_final_min(traj, &mut m), RsosStatus::Ok);
        assert_eq!(rsos_dual_exact(traj, &mut exact), RsosStatus::Ok);
        assert!(exact);
        let mut m_half = -1;
        assert_eq!(rsos_dual_min_at(traj, 2.5, &mut m_half), RsosStatus::Ok);
        assert!(0 <= m_half && m_half <= m);
        let mut t = 0.0;
        if m >= 1 {
            assert_eq!(rsos_dual_hitting_time(traj, 1, &mut t), RsosStatus::Ok);
            assert!(t > 0.0 && t <= 5.0);
        }
        let unreachable = m as u64 + 1;
        assert_eq!(rsos_dual_hitting_time(traj, unreachable, &mut t), RsosStatus::OutOfRange);
        assert!(last_error().contains("not reached"));
        rsos_dual_free(traj);
        rsos_event_set_free(set);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut set = ptr::null_mut();
        let st = rsos_event_set_generate(1, 0, 1.0, 1.0, false, 1, &mut set);
        assert_eq!(st, RsosStatus::InvalidArgument);
        assert!(set.is_null());
        assert!(!last_error().is_empty());

        let st = rsos_event_set_generate(1, 3, 1.0, -1.0, false, 1, &mut set);
        assert_eq!(st, RsosStatus::InvalidArgument);
        assert!(last_error().contains("rate"));

        assert_eq!(rsos_event_set_generate(1, 3, 1.0, 1.0, false, 1, ptr::null_mut()), RsosStatus::NullPointer);
        assert_eq!(rsos_event_set_reverse(ptr::null(), &mut set), RsosStatus::NullPointer);

        let bad = CString::new("not json").unwrap();
        assert_eq!(rsos_event_set_from_jsonl(bad.as_ptr(), &mut set), RsosStatus::Parse);

        let s = generate(1, 3, 1.0, 1);
        let mut field = ptr::null_mut();
        let model = RsosModel { kind: 99, k: 0 };
        assert_eq!(rsos_evolve(s, model, zero(), 1.0, &mut field), RsosStatus::InvalidArgument);
        let model = RsosModel {
            kind: RsosModelKind::KRsos as i32,
            k: 0,
        };
        assert_eq!(rsos_evolve(s, model, zero(), 1.0, &mut field), RsosStatus::InvalidArgument);
        let short = [0i64; 2];
        let init = RsosInit {
            kind: RsosInitKind::Explicit as i32,
            heights: short.as_ptr(),
            len: short.len(),
        };
        assert_eq!(rsos_evolve(s, RSOS, init, 1.0, &mut field), RsosStatus::InvalidArgument);

        assert_eq!(rsos_evolve(s, RSOS, zero(), 1.0, &mut field), RsosStatus::Ok);
        assert!(rsos_last_error().is_null());
        let far = [9i32];
        let mut h = 0;
        assert_eq!(rsos_field_height_at(field, far.as_ptr(), 1, &mut h), RsosStatus::OutOfRange);
        let mut buf = [0i64; 1];
        assert_eq!(rsos_field_heights(field, buf.as_mut_ptr(), 1), RsosStatus::InvalidArgument);
        rsos_field_free(field);
        rsos_event_set_free(s);
    }
}

#[test]
fn null_handles_are_tolerated_by_free_and_len() {
    unsafe {
        rsos_event_set_free(ptr::null_mut());
        rsos_field_free(ptr::null_mut());
        rsos_dual_free(ptr::null_mut());
        rsos_string_free(ptr::null_mut());
        assert_eq!(rsos_event_set_len(ptr::null()), 0);
        assert_eq!(rsos_field_len(ptr::null()), 0);
    }
}

#[test]
fn experiment_runs_from_config_text() {
    let text = CString::new("experiment = minpath-check\nreplications = 3\nT = 2\ninit = zero\n").unwrap();
    let (mut passed, mut json) = (false, ptr::null_mut());
    unsafe {
        let st = rsos_experiment_run(text.as_ptr(), 1, false, &mut passed, &mut json);
        assert_eq!(st, RsosStatus::Ok, "{}", last_error());
        assert!(passed);
        let report: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(report["tables"][0]["rows"].as_array().unwrap().len(), 3);
        rsos_string_free(json);

        let bad = CString::new("experiment = minpath-check\nbogus = 1\n").unwrap();
        let st = rsos_experiment_run(bad.as_ptr(), 1, false, &mut passed, ptr::null_mut());
        assert_eq!(st, RsosStatus::InvalidArgument);
        assert!(last_error().contains("bogus"));
    }
}
