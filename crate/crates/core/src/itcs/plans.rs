use serde::{Deserialize, Serialize};

use crate::simcore::SimTime;
use crate::world::{AgentId, EdgeId, RoadGraph, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub time: SimTime,
    pub position: Vec2,
    pub speed: f64,
}

/// Piecewise-linear interpolation over waypoints ordered by time. Clamps to
/// the end points outside the covered span.
fn interpolate(wps: &[Waypoint], t: SimTime) -> Option<(Vec2, f64)> {
    let first = wps.first()?;
    if t <= first.time {
        return Some((first.position, first.speed));
    }
    for w in wps.windows(2) {
        let (a, b) = (w[0], w[1]);
        if t <= b.time {
            let f = (t.ms() - a.time.ms()) as f64 / (b.time.ms() - a.time.ms()) as f64;
            return Some((a.position + (b.position - a.position) * f, a.speed + (b.speed - a.speed) * f));
        }
    }
    let last = wps.last()?;
    Some((last.position, last.speed))
}

fn strictly_increasing(wps: &[Waypoint]) -> bool {
    wps.windows(2).all(|w| w[0].time < w[1].time)
}

/// Predicted motion of one global track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub track_id: u64,
    pub waypoints: Vec<Waypoint>,
}

impl Trajectory {
    pub fn is_well_formed(&self) -> bool {
        strictly_increasing(&self.waypoints)
    }
}

/// Edge sequence assigned by the cloud to a controlled vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutePlan {
    pub vehicle: AgentId,
    pub edges: Vec<EdgeId>,
    pub issued_at: SimTime,
}

impl RoutePlan {
    pub fn is_valid(&self, graph: &RoadGraph) -> bool {
        !self.edges.is_empty() && graph.is_contiguous(&self.edges)
    }
}

/// Short-horizon timed path issued by a roadside unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPlan {
    pub vehicle: AgentId,
    pub issuer: u32,
    pub issued_at: SimTime,
    pub valid_from: SimTime,
    pub valid_until: SimTime,
    pub waypoints: Vec<Waypoint>,
}

/// Waypoint spacing of issued trajectory plans.
pub const PLAN_STEP_MS: u64 = 100;
pub const PLAN_HORIZON_MS: u64 = 2000;

impl TrajectoryPlan {
    /// Straight-line plan along `heading` from `start` at `start_time`,
    /// moving from `speed` toward `target_speed` at `accel` (or braking at
    /// `decel` when slower).
    #[allow(clippy::too_many_arguments)]
    pub fn straight(
        vehicle: AgentId,
        issuer: u32,
        issued_at: SimTime,
        start_time: SimTime,
        start: Vec2,
        heading: f64,
        speed: f64,
        target_speed: f64,
        accel: f64,
        decel: f64,
    ) -> Self {
        let dir = Vec2::from_polar(1.0, heading);
        let dt = PLAN_STEP_MS as f64 / 1000.0;
        let mut pos = start;
        let mut v = speed;
        let mut waypoints = vec![Waypoint { time: start_time, position: pos, speed: v }];
        for k in 1..=(PLAN_HORIZON_MS / PLAN_STEP_MS) {
            // closed form so the target is hit exactly
            let elapsed = k as f64 * dt;
            let nv = if target_speed < speed {
                (speed - decel * elapsed).max(target_speed)
            } else {
                (speed + accel * elapsed).min(target_speed)
            };
            pos = pos + dir * ((v + nv) / 2.0 * dt);
            v = nv;
            waypoints.push(Waypoint { time: start_time + k * PLAN_STEP_MS, position: pos, speed: v });
        }
        Self {
            vehicle,
            issuer,
            issued_at,
            valid_from: issued_at,
            valid_until: start_time + PLAN_HORIZON_MS,
            waypoints,
        }
    }

    pub fn covers(&self, t: SimTime) -> bool {
        self.valid_from <= t && t <= self.valid_until
    }

    pub fn is_valid(&self) -> bool {
        self.valid_from < self.valid_until && !self.waypoints.is_empty() && strictly_increasing(&self.waypoints)
    }

    pub fn state_at(&self, t: SimTime) -> Option<(Vec2, f64)> {
        interpolate(&self.waypoints, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_plan_shape() {
        let p = TrajectoryPlan::straight(AgentId(1), 2, SimTime(1000), SimTime(950), Vec2::ZERO, 0.0, 10.0, 10.0, 2.0, 6.0);
        assert!(p.is_valid());
        assert_eq!(p.waypoints.len(), 21);
        let (pos, v) = p.state_at(SimTime(1950)).unwrap();
        assert!((pos.x - 10.0).abs() < 1e-9);
        assert_eq!(v, 10.0);
        assert!(p.covers(SimTime(2950)) && !p.covers(SimTime(2951)) && !p.covers(SimTime(999)));
    }

    #[test]
    fn stop_plan_comes_to_rest() {
        let p = TrajectoryPlan::straight(AgentId(1), 2, SimTime(0), SimTime(0), Vec2::ZERO, 0.0, 12.0, 0.0, 2.0, 6.0);
        assert_eq!(p.waypoints.last().unwrap().speed, 0.0);
        // 12²/(2·6) = 12 m
        assert!((p.waypoints.last().unwrap().position.x - 12.0).abs() < 1e-9);
    }
}
