//! The System-on-Vehicle: occlusion-limited local sensing, the deadline-driven
//! fusion engine, disengagement detection, link failover and trajectory
//! following.

mod failover;
mod fusion;
mod ipad;
mod ttc;

pub use failover::{FailoverParams, LinkMonitor, LinkState, LinkTransition};
pub use fusion::{
    DisengagementEvent, FirstDetection, FusedObject, FusionEngine, FusionParams, LocalMap, Provenance, Received,
    TrustPolicy,
};
pub use ipad::{ControlAction, PlanFollower, HANDOFF_GAP_M};
pub use ttc::{time_to_collision, DEFAULT_CONFLICT_HALF_WIDTH_M};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simcore::RngStream;
use crate::sor::{observe, SemanticFrame, SourceRef};
use crate::world::{line_of_sight, AgentId, GroundTruthSnapshot, Occluder, Vec2};

pub const DEFAULT_LOCAL_RANGE_M: f64 = 70.0;
pub const DEFAULT_LOCAL_RATE_HZ: f64 = 10.0;
pub const DEFAULT_LOCAL_NOISE_SIGMA_M: f64 = 0.1;
/// Near-field range kept on board when proactive perception is offloaded.
pub const DEFAULT_REACTIVE_RANGE_M: f64 = 20.0;

/// Operating stage of the cooperative system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[serde(alias = "VEHICLE_ONLY")]
    VehicleOnly,
    #[serde(alias = "IAAD")]
    Iaad,
    #[serde(alias = "IGAD")]
    Igad,
    #[serde(alias = "IPAD")]
    Ipad,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::VehicleOnly, Mode::Iaad, Mode::Igad, Mode::Ipad];

    pub fn name(self) -> &'static str {
        match self {
            Mode::VehicleOnly => "vehicle_only",
            Mode::Iaad => "iaad",
            Mode::Igad => "igad",
            Mode::Ipad => "ipad",
        }
    }

    pub fn uses_roadside(self) -> bool {
        self != Mode::VehicleOnly
    }

    pub fn failover_enabled(self) -> bool {
        matches!(self, Mode::Igad | Mode::Ipad)
    }

    pub fn plans(self) -> bool {
        self == Mode::Ipad
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let k = s.to_ascii_lowercase().replace('-', "_");
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == k)
            .ok_or_else(|| format!("unknown mode {s:?}; expected one of vehicle_only, iaad, igad, ipad"))
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VehicleError {
    #[error("SoV {id}: {what}")]
    Invalid { id: u64, what: String },
}

/// On-board sensing parameters of one SoV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SovNode {
    pub agent: AgentId,
    pub local_range_m: f64,
    pub local_rate_hz: f64,
    pub noise_sigma_m: f64,
}

impl SovNode {
    pub fn new(agent: AgentId) -> Self {
        Self {
            agent,
            local_range_m: DEFAULT_LOCAL_RANGE_M,
            local_rate_hz: DEFAULT_LOCAL_RATE_HZ,
            noise_sigma_m: DEFAULT_LOCAL_NOISE_SIGMA_M,
        }
    }

    pub fn validate(&self) -> Result<(), VehicleError> {
        let bad = |what: &str| Err(VehicleError::Invalid { id: self.agent.0, what: what.into() });
        if !(self.local_range_m > 0.0) {
            return bad("local_range_m must be > 0");
        }
        if !(self.local_rate_hz > 0.0) {
            return bad("local_rate_hz must be > 0");
        }
        if !(self.noise_sigma_m >= 0.0) {
            return bad("noise_sigma_m must be >= 0");
        }
        Ok(())
    }
}

/// What the vehicle's own sensors see: agents within `range_m` with a clear
/// line of sight, the vehicle itself excluded. Returns an empty frame if the
/// vehicle is not in the snapshot.
pub fn local_sense(
    sov: &SovNode,
    range_m: f64,
    snapshot: &GroundTruthSnapshot,
    occluders: &[Occluder],
    rng: &mut RngStream,
) -> SemanticFrame {
    let source = SourceRef::sov(sov.agent.0);
    let Some(me) = snapshot.get(sov.agent) else {
        return SemanticFrame::new(source, snapshot.time, Vec::new());
    };
    let noise = (sov.noise_sigma_m > 0.0).then(|| Normal::new(0.0, sov.noise_sigma_m).expect("sigma > 0"));
    let objects = snapshot
        .agents
        .iter()
        .filter(|a| a.id != sov.agent)
        .filter(|a| me.position.distance(a.position) <= range_m)
        .filter(|a| line_of_sight(me.position, a.position, occluders))
        .map(|a| {
            let mut obj = observe(a, snapshot.time);
            if let Some(n) = &noise {
                obj.location = obj.location + Vec2::new(n.sample(rng), n.sample(rng));
            }
            obj
        })
        .collect();
    SemanticFrame::new(source, snapshot.time, objects)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcore::SimTime;
    use crate::sor::SorNode;
    use crate::world::{AgentClass, AgentState, Corridor, Footprint};

    fn st(id: u64, x: f64, y: f64) -> AgentState {
        AgentState {
            id: AgentId(id),
            class: AgentClass::Pedestrian,
            position: Vec2::new(x, y),
            speed: 0.0,
            heading: 0.0,
            footprint: Footprint::default_for(AgentClass::Pedestrian),
            controlled: id == 0,
            edge: None,
        }
    }

    fn exact(id: u64) -> SovNode {
        SovNode { noise_sigma_m: 0.0, ..SovNode::new(AgentId(id)) }
    }

    #[test]
    fn range_and_occlusion() {
        let snap = GroundTruthSnapshot {
            time: SimTime(0),
            agents: vec![st(0, 0.0, 0.0), st(1, 50.0, 0.0), st(2, 50.0, 10.0), st(3, 80.0, 0.0)],
        };
        let wall = Occluder::new(Vec2::new(40.0, 5.0), Vec2::new(40.0, 15.0)).unwrap();
        let f = local_sense(&exact(0), 70.0, &snap, &[wall], &mut RngStream::derive(0, "l"));
        let ids: Vec<u64> = f.objects.iter().map(|o| o.object_id).collect();
        assert_eq!(ids, vec![1]);
        assert_eq!(f.source, SourceRef::sov(0));
    }

    #[test]
    fn roadside_sees_what_the_vehicle_cannot() {
        let corridor = Corridor::from_points(vec![Vec2::new(0.0, 0.0), Vec2::new(1000.0, 0.0)]).unwrap();
        let snap = GroundTruthSnapshot { time: SimTime(0), agents: vec![st(0, 0.0, 0.0), st(1, 50.0, 4.0)] };
        let wall = Occluder::new(Vec2::new(20.0, 3.0), Vec2::new(60.0, 3.0)).unwrap();
        let mut rng = RngStream::derive(0, "l");
        assert!(local_sense(&exact(0), 70.0, &snap, &[wall], &mut rng).objects.is_empty());
        let sor = SorNode::at(1, &corridor, 125.0);
        let seen = sor.sense(&corridor, &snap, &mut rng);
        assert!(seen.objects.iter().any(|o| o.object_id == 1));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("IAAD".parse::<Mode>().unwrap(), Mode::Iaad);
        assert_eq!("vehicle-only".parse::<Mode>().unwrap(), Mode::VehicleOnly);
        assert!("fast".parse::<Mode>().is_err());
        assert!(!Mode::Iaad.failover_enabled());
        assert!(Mode::Ipad.failover_enabled() && Mode::Ipad.plans());
    }
}
