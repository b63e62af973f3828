//! Roadside perception units: sensing within along-corridor reach, the
//! semantic frame model, placement along a corridor and power draw.

mod frame;

pub use frame::{
    FrameError, ObjectType, SemanticFrame, SemanticObject, SourceKind, SourceRef, FRAME_HEADER_BYTES,
    OBJECT_BYTES,
};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simcore::{RngStream, SimTime};
use crate::world::{geometry::normalize_heading, AgentState, Corridor, GroundTruthSnapshot, Vec2};

pub const DEFAULT_COVERAGE_EACH_DIRECTION_M: f64 = 125.0;
pub const DEFAULT_UPDATE_RATE_HZ: f64 = 20.0;
pub const DEFAULT_PROCESSING_LATENCY_MS: u64 = 50;
pub const DEFAULT_POWER_W: f64 = 800.0;
pub const DEFAULT_NOISE_SIGMA_M: f64 = 0.2;
/// Agents farther than this from the corridor line are not sensed.
pub const DEFAULT_LATERAL_REACH_M: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SorError {
    #[error("corridor length must be positive, got {0}")]
    NonPositiveCorridor(f64),
    #[error("coverage must be positive, got {0}")]
    NonPositiveCoverage(f64),
    #[error("SoR {id}: {what}")]
    InvalidNode { id: u32, what: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SorNode {
    pub id: u32,
    /// Arc-length position on the node's corridor.
    pub corridor_s_m: f64,
    pub position: Vec2,
    pub coverage_each_direction_m: f64,
    pub update_rate_hz: f64,
    pub processing_latency_ms: u64,
    pub power_w: f64,
    pub noise_sigma_m: f64,
    pub lateral_reach_m: f64,
}

impl SorNode {
    pub fn at(id: u32, corridor: &Corridor, s: f64) -> Self {
        Self {
            id,
            corridor_s_m: s,
            position: corridor.point_at(s),
            coverage_each_direction_m: DEFAULT_COVERAGE_EACH_DIRECTION_M,
            update_rate_hz: DEFAULT_UPDATE_RATE_HZ,
            processing_latency_ms: DEFAULT_PROCESSING_LATENCY_MS,
            power_w: DEFAULT_POWER_W,
            noise_sigma_m: DEFAULT_NOISE_SIGMA_M,
            lateral_reach_m: DEFAULT_LATERAL_REACH_M,
        }
    }

    pub fn validate(&self) -> Result<(), SorError> {
        let bad = |what: &str| Err(SorError::InvalidNode { id: self.id, what: what.into() });
        if !(self.coverage_each_direction_m > 0.0) {
            return bad("coverage_each_direction_m must be > 0");
        }
        if !(self.update_rate_hz > 0.0) {
            return bad("update_rate_hz must be > 0");
        }
        if !(self.noise_sigma_m >= 0.0) {
            return bad("noise_sigma_m must be >= 0");
        }
        if !(self.power_w >= 0.0) {
            return bad("power_w must be >= 0");
        }
        Ok(())
    }

    /// Emission period in whole milliseconds.
    pub fn period_ms(&self) -> u64 {
        ((1000.0 / self.update_rate_hz).round() as u64).max(1)
    }

    /// Whether `agent` lies within this node's along-corridor reach.
    pub fn covers(&self, corridor: &Corridor, p: Vec2) -> bool {
        let (s, lateral) = corridor.project(p);
        (s - self.corridor_s_m).abs() <= self.coverage_each_direction_m && lateral <= self.lateral_reach_m
    }

    /// Sense every agent in reach. Occluders are ignored: the unit is
    /// mounted high enough to see over ground-level obstructions.
    pub fn sense(&self, corridor: &Corridor, snapshot: &GroundTruthSnapshot, rng: &mut RngStream) -> SemanticFrame {
        let noise = (self.noise_sigma_m > 0.0).then(|| Normal::new(0.0, self.noise_sigma_m).expect("sigma > 0"));
        let objects = snapshot
            .agents
            .iter()
            .filter(|a| self.covers(corridor, a.position))
            .map(|a| {
                let mut obj = observe(a, snapshot.time);
                if let Some(n) = &noise {
                    obj.location = obj.location + Vec2::new(n.sample(rng), n.sample(rng));
                }
                obj
            })
            .collect();
        SemanticFrame::new(SourceRef::sor(self.id), snapshot.time, objects)
    }

    /// When a frame of a snapshot taken at `t` is ready to send.
    pub fn available_at(&self, snapshot_time: SimTime) -> SimTime {
        snapshot_time + self.processing_latency_ms
    }
}

/// Noise-free semantic view of a ground-truth agent.
pub fn observe(a: &AgentState, t: SimTime) -> SemanticObject {
    SemanticObject {
        object_id: a.id.0,
        timestamp: t,
        object_type: a.class.into(),
        shape: a.footprint,
        location: a.position,
        speed: a.speed,
        heading: normalize_heading(a.heading),
    }
}

/// Arc positions covering `[0, corridor_length_m]` with units spaced twice
/// their one-sided reach apart, the first one reach in. The last unit is
/// pulled back onto the corridor when the length is not a whole multiple.
pub fn plan_placement(corridor_length_m: f64, coverage_each_direction_m: f64) -> Result<Vec<f64>, SorError> {
    if !(corridor_length_m > 0.0) {
        return Err(SorError::NonPositiveCorridor(corridor_length_m));
    }
    if !(coverage_each_direction_m > 0.0) {
        return Err(SorError::NonPositiveCoverage(coverage_each_direction_m));
    }
    let spacing = 2.0 * coverage_each_direction_m;
    let count = (corridor_length_m / spacing).ceil() as usize;
    Ok((0..count)
        .map(|i| ((2 * i + 1) as f64 * coverage_each_direction_m).min(corridor_length_m))
        .collect())
}

/// Total draw of `sor_count` units at `power_w` each.
pub fn deployment_power(sor_count: usize, power_w: f64) -> f64 {
    sor_count as f64 * power_w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{AgentClass, AgentId, Footprint};
    use proptest::prelude::*;

    fn corridor() -> Corridor {
        Corridor::from_points(vec![Vec2::new(0.0, 0.0), Vec2::new(1000.0, 0.0)]).unwrap()
    }

    fn agent(id: u64, x: f64, y: f64) -> AgentState {
        AgentState {
            id: AgentId(id),
            class: AgentClass::Vehicle,
            position: Vec2::new(x, y),
            speed: 5.0,
            heading: 0.0,
            footprint: Footprint::default_for(AgentClass::Vehicle),
            controlled: false,
            edge: None,
        }
    }

    #[test]
    fn reach_boundary() {
        let c = corridor();
        let mut node = SorNode::at(1, &c, 500.0);
        node.noise_sigma_m = 0.0;
        let snap = GroundTruthSnapshot {
            time: SimTime(0),
            agents: vec![agent(1, 620.0, 0.0), agent(2, 626.0, 0.0), agent(3, 375.0, 3.0)],
        };
        let f = node.sense(&c, &snap, &mut RngStream::derive(0, "s"));
        let ids: Vec<u64> = f.objects.iter().map(|o| o.object_id).collect();
        assert_eq!(ids, vec![1, 3]);
    }

    #[test]
    fn zero_noise_is_exact() {
        let c = corridor();
        let mut node = SorNode::at(1, &c, 125.0);
        node.noise_sigma_m = 0.0;
        let snap = GroundTruthSnapshot { time: SimTime(40), agents: vec![agent(1, 50.5, 1.25)] };
        let f = node.sense(&c, &snap, &mut RngStream::derive(0, "s"));
        assert_eq!(f.objects[0].location, Vec2::new(50.5, 1.25));
        assert_eq!(f.frame_time, SimTime(40));
        assert_eq!(f.objects[0].timestamp, SimTime(40));
    }

    #[test]
    fn placement_examples() {
        assert_eq!(plan_placement(1000.0, 125.0).unwrap(), vec![125.0, 375.0, 625.0, 875.0]);
        assert_eq!(plan_placement(250.0, 125.0).unwrap(), vec![125.0]);
        assert_eq!(plan_placement(1001.0, 125.0).unwrap().len(), 5);
        assert!(plan_placement(0.0, 125.0).is_err());
    }

    #[test]
    fn power_examples() {
        assert_eq!(deployment_power(4, DEFAULT_POWER_W), 3200.0);
        assert_eq!(deployment_power(0, DEFAULT_POWER_W), 0.0);
        assert_eq!(deployment_power(10, DEFAULT_POWER_W), 8000.0);
    }

    #[test]
    fn frame_ready_after_processing_latency() {
        let node = SorNode::at(1, &corridor(), 125.0);
        assert_eq!(node.available_at(SimTime(1000)), SimTime(1050));
        assert_eq!(node.period_ms(), 50);
    }

    proptest! {
        #[test]
        fn placement_covers_every_meter(len in 1.0..6000.0f64) {
            let pos = plan_placement(len, 125.0).unwrap();
            prop_assert_eq!(pos.len(), (len / 250.0).ceil() as usize);
            let mut s = 0.0;
            while s <= len {
                prop_assert!(pos.iter().any(|p| (s - p).abs() <= 125.0), "gap at {}", s);
                s += 1.0;
            }
        }
    }
}
