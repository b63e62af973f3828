use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use coopdrive_ffi::*;

fn scenario_path(name: &str) -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios").join(format!("{name}.toml"));
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(coop_last_error()) }.to_string_lossy().into_owned()
}

fn load(name: &str) -> *mut CoopScenario {
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { coop_scenario_load(scenario_path(name).as_ptr(), &mut sc) }, CoopStatus::Ok, "{}", last_error());
    sc
}

fn run_metric(sc: *const CoopScenario, name: &str) -> f64 {
    let mut rep = ptr::null_mut();
    assert_eq!(unsafe { coop_run(sc, &mut rep) }, CoopStatus::Ok, "{}", last_error());
    let mut v = f64::NAN;
    let name = CString::new(name).unwrap();
    assert_eq!(unsafe { coop_report_metric(rep, name.as_ptr(), &mut v) }, CoopStatus::Ok, "{}", last_error());
    unsafe { coop_report_free(rep) };
    v
}

#[test]
fn load_run_and_read_metrics() {
    let sc = load("occlusion");
    unsafe {
        assert_eq!(coop_scenario_set_mode(sc, CoopMode::VehicleOnly), CoopStatus::Ok);
    }
    let vo = run_metric(sc, "disengagements");
    unsafe {
        assert_eq!(coop_scenario_set_mode(sc, CoopMode::Iaad), CoopStatus::Ok);
    }
    let ia = run_metric(sc, "disengagements");
    assert!(vo > ia, "{vo} vs {ia}");
    unsafe { coop_scenario_free(sc) };
}

#[test]
fn results_match_the_library() {
    let sc = load("jitter");
    let mut rep = ptr::null_mut();
    let mut json: *mut c_char = ptr::null_mut();
    unsafe {
        assert_eq!(coop_scenario_set_seed(sc, 99), CoopStatus::Ok);
        assert_eq!(coop_run(sc, &mut rep), CoopStatus::Ok);
        assert_eq!(coop_report_to_json(rep, &mut json), CoopStatus::Ok);
    }
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe {
        coop_string_free(json);
        coop_report_free(rep);
        coop_scenario_free(sc);
    }
    let direct = coopdrive::scenario::load_scenario(Path::new(scenario_path("jitter").to_str().unwrap()))
        .unwrap()
        .with_seed(99);
    assert_eq!(text, coopdrive::scenario::run(&direct).report.to_jsonl());
}

#[test]
fn param_edits_apply_and_bad_edits_are_rolled_back() {
    let sc = load("jitter");
    let low = run_metric(sc, "deadline_miss_rate");
    let path = CString::new("channels.cv2x.jitter_max_ms").unwrap();
    unsafe {
        // below jitter_min_ms: rejected, scenario unchanged
        assert_eq!(coop_scenario_set_param(sc, path.as_ptr(), 1.0), CoopStatus::InvalidScenario);
    }
    assert!(last_error().contains("jitter"));
    assert_eq!(run_metric(sc, "deadline_miss_rate"), low);
    unsafe {
        assert_eq!(coop_scenario_set_param(sc, path.as_ptr(), 100.0), CoopStatus::Ok);
    }
    assert!(run_metric(sc, "deadline_miss_rate") > low);
    let mode = CString::new("mode").unwrap();
    unsafe {
        assert_eq!(coop_scenario_set_param(sc, mode.as_ptr(), 1.0), CoopStatus::InvalidArgument);
        coop_scenario_free(sc);
    }
}

#[test]
fn metric_lookup_errors() {
    let sc = load("saturated");
    let mut rep = ptr::null_mut();
    let mut v = 0.0;
    unsafe {
        assert_eq!(coop_run(sc, &mut rep), CoopStatus::Ok);
        let missing = CString::new("nope").unwrap();
        assert_eq!(coop_report_metric(rep, missing.as_ptr(), &mut v), CoopStatus::NotFound);
        let text = CString::new("mode").unwrap();
        assert_eq!(coop_report_metric(rep, text.as_ptr(), &mut v), CoopStatus::NotNumeric);
        assert_eq!(coop_report_metric(rep, ptr::null(), &mut v), CoopStatus::NullArgument);
        coop_report_free(rep);
        coop_scenario_free(sc);
    }
}

#[test]
fn load_and_parse_failures_are_reported() {
    let mut sc = ptr::null_mut();
    let missing = CString::new("/does/not/exist.toml").unwrap();
    let garbage = CString::new("seed = [").unwrap();
    let invalid = CString::new(
        "seed = 1\nduration_ms = 10\nmode = \"iaad\"\n\
         [[nodes]]\nid = 0\nx = 0.0\ny = 0.0\n[[nodes]]\nid = 1\nx = 100.0\ny = 0.0\n\
         [[edges]]\nid = 0\nfrom = 0\nto = 1\nfree_speed_mps = -3.0\n",
    )
    .unwrap();
    let bad_utf8 = [0xffu8, 0xfe, 0];
    unsafe {
        assert_eq!(coop_scenario_load(missing.as_ptr(), &mut sc), CoopStatus::Io);
        assert_eq!(coop_scenario_parse(garbage.as_ptr(), &mut sc), CoopStatus::Parse);
        assert_eq!(coop_scenario_parse(invalid.as_ptr(), &mut sc), CoopStatus::InvalidScenario);
        assert_eq!(coop_scenario_parse(bad_utf8.as_ptr().cast(), &mut sc), CoopStatus::InvalidUtf8);
        assert_eq!(coop_scenario_parse(ptr::null(), &mut sc), CoopStatus::NullArgument);
        assert_eq!(coop_scenario_parse(invalid.as_ptr(), ptr::null_mut()), CoopStatus::NullArgument);
        assert_eq!(coop_run(ptr::null(), &mut ptr::null_mut()), CoopStatus::NullArgument);
        coop_scenario_free(ptr::null_mut());
        coop_report_free(ptr::null_mut());
        coop_string_free(ptr::null_mut());
    }
    assert!(sc.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn cost_and_placement() {
    let p = coop_cost_defaults();
    let mut r = CoopCostReport::default();
    unsafe { assert_eq!(coop_cost_report(&p, &mut r), CoopStatus::Ok) };
    // 24 h * 4 jobs over 8 h
    assert_eq!(r.efficiency_ratio, 12.0);
    assert!((r.cost_per_km_ratio - 180.0 * 4.0 / 8.5).abs() < 1e-9);
    let bad = CoopCostParams { c_s: 0.0, ..p };
    unsafe { assert_eq!(coop_cost_report(&bad, &mut r), CoopStatus::InvalidArgument) };
    assert!(last_error().contains("c_s"));

    let mut n = 0usize;
    let mut small = [0.0f64; 2];
    unsafe {
        assert_eq!(coop_plan_placement(1000.0, 125.0, small.as_mut_ptr(), 2, &mut n), CoopStatus::BufferTooSmall);
    }
    assert_eq!(n, 4);
    let mut buf = vec![0.0f64; n];
    unsafe {
        assert_eq!(coop_plan_placement(1000.0, 125.0, buf.as_mut_ptr(), buf.len(), &mut n), CoopStatus::Ok);
        assert_eq!(coop_plan_placement(-1.0, 125.0, buf.as_mut_ptr(), buf.len(), &mut n), CoopStatus::InvalidArgument);
    }
    assert_eq!(buf, vec![125.0, 375.0, 625.0, 875.0]);
    assert_eq!(coop_deployment_power(4, 800.0), 3200.0);
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/coopdrive.h")).unwrap();
    for f in [
        "coop_last_error",
        "coop_scenario_load",
        "coop_scenario_parse",
        "coop_scenario_set_mode",
        "coop_scenario_set_seed",
        "coop_scenario_set_param",
        "coop_scenario_free",
        "coop_run",
        "coop_report_metric",
        "coop_report_to_json",
        "coop_report_free",
        "coop_string_free",
        "coop_cost_defaults",
        "coop_cost_report",
        "coop_plan_placement",
        "coop_deployment_power",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
}

/// Directory holding the built static library: target/<profile>.
fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_static_library() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = profile_dir().join("libcoopdrive_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(dir.join("include"))
        .arg(dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&exe)
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success());
    let out = Command::new(&exe).arg(scenario_path("jitter").to_str().unwrap()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let line = String::from_utf8(out.stdout).unwrap();
    assert!(line.contains("units=4 power=3200 efficiency=12.0"), "{line}");
}
