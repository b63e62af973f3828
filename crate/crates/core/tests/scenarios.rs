use std::path::PathBuf;

use coopdrive::scenario::{load_scenario, parse_scenario, run, ScenarioError};
use coopdrive::vehicle::{LinkState, Mode};
use proptest::prelude::*;

fn path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

const SMALL: &str = r#"
seed = 11
duration_ms = 4000
mode = "igad"

[[nodes]]
id = 0
x = 0.0
y = 0.0

[[nodes]]
id = 1
x = 600.0
y = 0.0

[[edges]]
id = 0
from = 0
to = 1
free_speed_mps = 15.0

[[corridors]]
name = "main"
edges = [0]

[[agents]]
id = 1
class = "vehicle"
controlled = true
route = [0]
speed_mps = 12.0

[[agents]]
id = 2
class = "vehicle"
route = [0]
offset_m = 80.0
speed_mps = 8.0

[[agents]]
id = 3
class = "pedestrian"
position = [300.0, 5.0]
"#;

#[test]
fn every_reference_scenario_loads_in_every_mode() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        let sc = load_scenario(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert!(!sc.sovs.is_empty(), "{}", p.display());
        for m in Mode::ALL {
            assert_eq!(sc.clone().with_mode(m).topology_id(), sc.topology_id());
        }
        n += 1;
    }
    assert!(n >= 8);
}

#[test]
fn invalid_scenario_lists_every_problem() {
    let text = format!(
        "{}\n[control]\nbrake_decel_mps2 = -1.0\n\n[partition]\nunits = 0\n",
        SMALL.replace("route = [0]\noffset_m", "route = [7]\noffset_m")
    );
    match parse_scenario(&text) {
        Err(ScenarioError::Invalid(issues)) => {
            assert!(issues.len() >= 3, "{issues:?}");
            assert!(issues.iter().any(|i| i.field.contains("agents")));
            assert!(issues.iter().any(|i| i.field.contains("partition")));
            assert!(issues.iter().any(|i| i.field.contains("control")));
        }
        other => panic!("expected Invalid, got {other:?}"),
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let text = format!("{SMALL}\n[fusion]\ntick_period_ms = 50\nbogus = 1\n");
    assert!(matches!(parse_scenario(&text), Err(ScenarioError::Parse(_))));
}

#[test]
fn vehicle_only_never_touches_the_network() {
    let sc = parse_scenario(SMALL).unwrap().with_mode(Mode::VehicleOnly);
    let r = run(&sc).report;
    assert_eq!(r.f64("cv2x_link_bytes_per_s_max"), Some(0.0));
    assert_eq!(r.f64("itcs_frames"), Some(0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reruns_are_identical(seed in 0u64..10_000, mode in 0usize..4) {
        let sc = parse_scenario(SMALL).unwrap().with_seed(seed).with_mode(Mode::ALL[mode]);
        prop_assert_eq!(run(&sc).report.to_jsonl(), run(&sc).report.to_jsonl());
    }

    #[test]
    fn link_monitor_never_skips_fallback(seed in 0u64..10_000, fault_at in 0u64..3500, both in any::<bool>()) {
        let faults = if both {
            format!("[[faults]]\nchannel = \"cv2x\"\nfrom_ms = {fault_at}\n\n[[faults]]\nchannel = \"fiveg\"\nfrom_ms = {fault_at}\n")
        } else {
            format!("[[faults]]\nchannel = \"cv2x\"\nfrom_ms = {fault_at}\n")
        };
        let sc = parse_scenario(&format!("{SMALL}\n{faults}")).unwrap().with_seed(seed);
        let out = run(&sc);
        for ts in out.transitions.values() {
            for t in ts {
                prop_assert!(!(t.from == LinkState::Cv2xOk && t.to == LinkState::SafeStop));
                prop_assert!(t.time.ms() >= fault_at);
            }
        }
        if !both {
            prop_assert_eq!(out.report.f64("safety_stops"), Some(0.0));
        }
    }

    #[test]
    fn rates_stay_in_range(seed in 0u64..10_000, jitter in 0u64..120) {
        let text = format!("{SMALL}\n[channels.cv2x]\njitter_min_ms = 0\njitter_max_ms = {jitter}\n");
        let r = run(&parse_scenario(&text).unwrap().with_seed(seed).with_mode(Mode::Iaad)).report;
        let miss = r.f64("deadline_miss_rate").unwrap();
        prop_assert!((0.0..=1.0).contains(&miss));
        let p50 = r.f64("e2e_latency_p50_ms").unwrap();
        let p99 = r.f64("e2e_latency_p99_ms").unwrap();
        prop_assert!(p50 <= p99);
    }
}

#[test]
fn reference_failover_scenario_reaches_fallback() {
    let r = run(&load_scenario(path("failover")).unwrap()).report;
    assert!(r.get("fallback_entered_ms").unwrap().is_u64());
}
