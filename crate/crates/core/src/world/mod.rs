//! Ground-truth corridor: road graph, moving agents, static occluders and
//! line-of-sight queries.

pub mod geometry;
pub mod road;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simcore::SimTime;
pub use geometry::Vec2;
pub use road::{Corridor, Edge, EdgeId, EdgeSpec, Node, NodeId, RoadGraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("invalid road graph: {0}")]
    InvalidGraph(String),
    #[error("invalid agent {id}: {reason}")]
    InvalidAgent { id: u64, reason: String },
    #[error("step size must be positive")]
    ZeroStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentClass {
    Vehicle,
    Pedestrian,
    Cyclist,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub length: f64,
    pub width: f64,
}

impl Footprint {
    pub fn default_for(class: AgentClass) -> Self {
        match class {
            AgentClass::Vehicle => Footprint { length: 4.5, width: 1.9 },
            AgentClass::Pedestrian => Footprint { length: 0.5, width: 0.5 },
            AgentClass::Cyclist => Footprint { length: 1.8, width: 0.6 },
        }
    }
}

/// What starts a scripted crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingTrigger {
    /// Start at a fixed time.
    AtTime(SimTime),
    /// Start once the given vehicle is within `distance_m`.
    VehicleWithin { vehicle: AgentId, distance_m: f64 },
    /// Start once the given vehicle, approaching, would arrive within `seconds`.
    VehicleEta { vehicle: AgentId, seconds: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Motion {
    /// Follows a contiguous edge sequence; `s` is the offset on the current edge.
    Route {
        route: Vec<EdgeId>,
        edge_idx: usize,
        s: f64,
    },
    /// Never moves, never retires.
    Parked,
    /// Walks straight from its start to `target` once triggered, then retires.
    Crossing {
        target: Vec2,
        walk_speed: f64,
        trigger: CrossingTrigger,
        started: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lifecycle {
    Pending,
    Active,
    Retired,
}

/// Speed request from a vehicle controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedCommand {
    pub target_mps: f64,
    /// Deceleration used when slowing toward the target (m/s²).
    pub decel_mps2: f64,
}

pub const DEFAULT_ACCEL_MPS2: f64 = 2.0;
pub const DEFAULT_DECEL_MPS2: f64 = 4.0;
/// Time headway under which a follower matches its leader's speed.
pub const HEADWAY_S: f64 = 2.0;
const MIN_GAP_M: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: AgentId,
    pub class: AgentClass,
    pub position: Vec2,
    pub speed: f64,
    pub heading: f64,
    pub footprint: Footprint,
    /// Preferred speed; the edge free-flow speed still caps it.
    pub cruise_speed: f64,
    pub controlled: bool,
    pub depart: SimTime,
    pub motion: Motion,
    lifecycle: Lifecycle,
    command: Option<SpeedCommand>,
}

impl Agent {
    pub fn new(
        id: AgentId,
        class: AgentClass,
        position: Vec2,
        heading: f64,
        speed: f64,
        motion: Motion,
    ) -> Self {
        Self {
            id,
            class,
            position,
            speed,
            heading: geometry::normalize_heading(heading),
            footprint: Footprint::default_for(class),
            cruise_speed: speed,
            controlled: false,
            depart: SimTime::ZERO,
            motion,
            lifecycle: Lifecycle::Pending,
            command: None,
        }
    }

    /// Route-following agent placed at the start of `route`.
    pub fn on_route(graph: &RoadGraph, id: AgentId, class: AgentClass, route: Vec<EdgeId>, speed: f64) -> Result<Self, WorldError> {
        if route.is_empty() || !graph.is_contiguous(&route) {
            return Err(WorldError::InvalidAgent {
                id: id.0,
                reason: "route must be a non-empty contiguous edge sequence".into(),
            });
        }
        if !(speed >= 0.0) {
            return Err(WorldError::InvalidAgent { id: id.0, reason: "speed must be >= 0".into() });
        }
        let pos = graph.point_on(route[0], 0.0);
        let heading = graph.heading_of(route[0]);
        Ok(Self::new(
            id,
            class,
            pos,
            heading,
            speed,
            Motion::Route { route, edge_idx: 0, s: 0.0 },
        ))
    }

    /// Place a route agent `s` metres into its first edge.
    pub fn at_offset(mut self, graph: &RoadGraph, offset: f64) -> Self {
        if let Motion::Route { route, s, .. } = &mut self.motion {
            *s = offset;
            self.position = graph.point_on(route[0], offset);
        }
        self
    }

    pub fn with_footprint(mut self, f: Footprint) -> Self {
        self.footprint = f;
        self
    }

    pub fn controlled(mut self, yes: bool) -> Self {
        self.controlled = yes;
        self
    }

    pub fn departing_at(mut self, t: SimTime) -> Self {
        self.depart = t;
        self
    }

    pub fn is_active(&self) -> bool {
        self.lifecycle == Lifecycle::Active
    }

    pub fn is_retired(&self) -> bool {
        self.lifecycle == Lifecycle::Retired
    }

    pub fn current_edge(&self) -> Option<EdgeId> {
        match &self.motion {
            Motion::Route { route, edge_idx, .. } => route.get(*edge_idx).copied(),
            _ => None,
        }
    }

    pub fn route(&self) -> Option<&[EdgeId]> {
        match &self.motion {
            Motion::Route { route, .. } => Some(route),
            _ => None,
        }
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::from_polar(self.speed, self.heading)
    }

    fn state(&self) -> AgentState {
        AgentState {
            id: self.id,
            class: self.class,
            position: self.position,
            speed: self.speed,
            heading: self.heading,
            footprint: self.footprint,
            controlled: self.controlled,
            edge: self.current_edge(),
        }
    }
}

/// Immutable per-agent entry of a [`GroundTruthSnapshot`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: AgentId,
    pub class: AgentClass,
    pub position: Vec2,
    pub speed: f64,
    pub heading: f64,
    pub footprint: Footprint,
    pub controlled: bool,
    pub edge: Option<EdgeId>,
}

impl AgentState {
    pub fn velocity(&self) -> Vec2 {
        Vec2::from_polar(self.speed, self.heading)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSnapshot {
    pub time: SimTime,
    /// Live agents in id order.
    pub agents: Vec<AgentState>,
}

impl GroundTruthSnapshot {
    pub fn get(&self, id: AgentId) -> Option<&AgentState> {
        self.agents
            .binary_search_by_key(&id, |a| a.id)
            .ok()
            .map(|i| &self.agents[i])
    }
}

/// A ground-level segment that blocks on-vehicle line of sight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occluder {
    pub a: Vec2,
    pub b: Vec2,
}

impl Occluder {
    pub fn new(a: Vec2, b: Vec2) -> Result<Self, WorldError> {
        if a == b {
            return Err(WorldError::InvalidGraph("occluder endpoints must be distinct".into()));
        }
        Ok(Self { a, b })
    }
}

/// False iff segment `a–b` strictly crosses any occluder.
pub fn line_of_sight(a: Vec2, b: Vec2, occluders: &[Occluder]) -> bool {
    !occluders
        .iter()
        .any(|o| geometry::segments_cross_strictly(a, b, o.a, o.b))
}

/// An agent leaving the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Retirement {
    pub id: AgentId,
    pub time: SimTime,
    pub controlled: bool,
    pub completed_route: bool,
}

#[derive(Debug, Clone)]
pub struct World {
    graph: RoadGraph,
    agents: BTreeMap<AgentId, Agent>,
    occluders: Vec<Occluder>,
    time: SimTime,
    step_ms: u64,
    odometer: BTreeMap<AgentId, f64>,
    active_ms: BTreeMap<AgentId, u64>,
    retirements: Vec<Retirement>,
}

impl World {
    pub fn new(graph: RoadGraph, occluders: Vec<Occluder>, step_ms: u64) -> Result<Self, WorldError> {
        if step_ms == 0 {
            return Err(WorldError::ZeroStep);
        }
        Ok(Self {
            graph,
            agents: BTreeMap::new(),
            occluders,
            time: SimTime::ZERO,
            step_ms,
            odometer: BTreeMap::new(),
            active_ms: BTreeMap::new(),
            retirements: Vec::new(),
        })
    }

    pub fn add_agent(&mut self, mut agent: Agent) -> Result<(), WorldError> {
        if self.agents.contains_key(&agent.id) {
            return Err(WorldError::InvalidAgent { id: agent.id.0, reason: "duplicate id".into() });
        }
        if !(agent.speed >= 0.0) || !agent.position.is_finite() {
            return Err(WorldError::InvalidAgent { id: agent.id.0, reason: "speed must be >= 0 and position finite".into() });
        }
        agent.lifecycle = Lifecycle::Pending;
        self.agents.insert(agent.id, agent);
        self.activate_departures();
        Ok(())
    }

    pub fn graph(&self) -> &RoadGraph {
        &self.graph
    }

    pub fn occluders(&self) -> &[Occluder] {
        &self.occluders
    }

    pub fn time(&self) -> SimTime {
        self.time
    }

    pub fn agent(&self, id: AgentId) -> Option<&Agent> {
        self.agents.get(&id)
    }

    pub fn agents(&self) -> impl Iterator<Item = &Agent> {
        self.agents.values()
    }

    pub fn retirements(&self) -> &[Retirement] {
        &self.retirements
    }

    /// Meters traveled by `id` so far.
    pub fn odometer(&self, id: AgentId) -> f64 {
        self.odometer.get(&id).copied().unwrap_or(0.0)
    }

    /// Milliseconds `id` has been active.
    pub fn active_time_ms(&self, id: AgentId) -> u64 {
        self.active_ms.get(&id).copied().unwrap_or(0)
    }

    pub fn set_command(&mut self, id: AgentId, cmd: Option<SpeedCommand>) {
        if let Some(a) = self.agents.get_mut(&id) {
            a.command = cmd;
        }
    }

    /// Swap the remaining route of a pending agent, or of an active one whose
    /// current edge appears in `route`. Returns whether the route was applied.
    pub fn reroute(&mut self, id: AgentId, route: Vec<EdgeId>) -> bool {
        if route.is_empty() || !self.graph.is_contiguous(&route) {
            return false;
        }
        let graph = &self.graph;
        let Some(agent) = self.agents.get_mut(&id) else {
            return false;
        };
        match (&mut agent.motion, agent.lifecycle) {
            (Motion::Route { route: r, edge_idx, s }, Lifecycle::Pending) => {
                if graph.edge(route[0]).map(|e| e.from) != graph.edge(r[0]).map(|e| e.from) {
                    return false;
                }
                *r = route;
                *edge_idx = 0;
                *s = 0.0;
                agent.position = graph.point_on(r[0], 0.0);
                agent.heading = graph.heading_of(r[0]);
                true
            }
            (Motion::Route { route: r, edge_idx, .. }, Lifecycle::Active) => {
                let cur = r[*edge_idx];
                match route.iter().position(|e| *e == cur) {
                    Some(i) => {
                        *r = route[i..].to_vec();
                        *edge_idx = 0;
                        true
                    }
                    None => false,
                }
            }
            _ => false,
        }
    }

    pub fn snapshot(&self) -> GroundTruthSnapshot {
        GroundTruthSnapshot {
            time: self.time,
            agents: self
                .agents
                .values()
                .filter(|a| a.is_active())
                .map(Agent::state)
                .collect(),
        }
    }

    fn activate_departures(&mut self) {
        let now = self.time;
        for a in self.agents.values_mut() {
            if a.lifecycle == Lifecycle::Pending && a.depart <= now {
                a.lifecycle = Lifecycle::Active;
            }
        }
    }

    /// Step in increments of at most `step_ms` until the world clock reaches `t`.
    pub fn advance_to(&mut self, t: SimTime) {
        while self.time < t {
            let dt = self.step_ms.min(t.since(self.time));
            self.step_agents(dt);
        }
    }

    /// Advance every live agent by `dt_ms`.
    pub fn step_agents(&mut self, dt_ms: u64) {
        assert!(dt_ms > 0, "step size must be positive");
        let dt = dt_ms as f64 / 1000.0;
        self.activate_departures();
        self.fire_triggers();

        // vehicles per edge, sorted by offset, for density and leader lookup
        let mut on_edge: BTreeMap<EdgeId, Vec<(f64, AgentId)>> = BTreeMap::new();
        for a in self.agents.values().filter(|a| a.is_active()) {
            if let Motion::Route { route, edge_idx, s } = &a.motion {
                on_edge.entry(route[*edge_idx]).or_default().push((*s, a.id));
            }
        }
        for v in on_edge.values_mut() {
            v.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        }
        let density = |edge: EdgeId, agents: &BTreeMap<AgentId, Agent>| -> f64 {
            let n = on_edge
                .get(&edge)
                .map(|v| v.iter().filter(|(_, id)| agents[id].class == AgentClass::Vehicle).count())
                .unwrap_or(0);
            n as f64 / self.graph.edge(edge).unwrap().length_m
        };

        // synchronous update: every new speed is computed from the old states
        let mut new_speed: BTreeMap<AgentId, f64> = BTreeMap::new();
        let mut leader_limit: BTreeMap<AgentId, f64> = BTreeMap::new();
        for a in self.agents.values().filter(|a| a.is_active()) {
            let Motion::Route { route, edge_idx, s } = &a.motion else { continue };
            let edge = route[*edge_idx];
            let e = self.graph.edge(edge).unwrap();
            let v_des = a.cruise_speed.min(e.free_speed_mps * e.congestion_factor(density(edge, &self.agents)));
            let (target, decel) = match a.command {
                Some(c) => (c.target_mps.min(v_des), c.decel_mps2),
                None => (v_des, DEFAULT_DECEL_MPS2),
            };
            let mut v = if target < a.speed {
                (a.speed - decel * dt).max(target)
            } else {
                (a.speed + DEFAULT_ACCEL_MPS2 * dt).min(target)
            };
            if let Some((gap, leader)) = self.leader(a, route, *edge_idx, *s, &on_edge) {
                let lv = self.agents[&leader].speed;
                if v > 0.0 && gap / v < HEADWAY_S {
                    v = v.min(lv);
                }
                leader_limit.insert(a.id, (gap - MIN_GAP_M).max(0.0) + lv * dt);
            }
            new_speed.insert(a.id, v.max(0.0));
        }

        let mut retire = Vec::new();
        for a in self.agents.values_mut().filter(|a| a.is_active()) {
            let before = a.position;
            match &mut a.motion {
                Motion::Route { route, edge_idx, s } => {
                    a.speed = new_speed[&a.id];
                    let mut adv = a.speed * dt;
                    if let Some(limit) = leader_limit.get(&a.id) {
                        adv = adv.min(*limit);
                    }
                    *s += adv;
                    loop {
                        let len = self.graph.edge(route[*edge_idx]).unwrap().length_m;
                        if *s < len {
                            break;
                        }
                        if *edge_idx + 1 >= route.len() {
                            *s = len;
                            retire.push((a.id, true));
                            break;
                        }
                        *s -= len;
                        *edge_idx += 1;
                    }
                    let edge = route[*edge_idx];
                    a.position = self.graph.point_on(edge, *s);
                    a.heading = self.graph.heading_of(edge);
                }
                Motion::Parked => {
                    a.speed = 0.0;
                }
                Motion::Crossing { target, walk_speed, started, .. } => {
                    if *started {
                        let to_go = *target - a.position;
                        let step = *walk_speed * dt;
                        a.speed = *walk_speed;
                        if to_go.norm() <= step {
                            a.position = *target;
                            retire.push((a.id, true));
                        } else {
                            a.heading = to_go.angle();
                            a.position = a.position + to_go * (step / to_go.norm());
                        }
                    } else {
                        a.speed = 0.0;
                    }
                }
            }
            *self.odometer.entry(a.id).or_default() += before.distance(a.position);
            *self.active_ms.entry(a.id).or_default() += dt_ms;
        }

        self.time = self.time + dt_ms;
        for (id, completed) in retire {
            let a = self.agents.get_mut(&id).unwrap();
            a.lifecycle = Lifecycle::Retired;
            self.retirements.push(Retirement {
                id,
                time: self.time,
                controlled: a.controlled,
                completed_route: completed,
            });
        }
        self.activate_departures();
    }

    fn leader(
        &self,
        me: &Agent,
        route: &[EdgeId],
        edge_idx: usize,
        s: f64,
        on_edge: &BTreeMap<EdgeId, Vec<(f64, AgentId)>>,
    ) -> Option<(f64, AgentId)> {
        let here = &on_edge[&route[edge_idx]];
        if let Some((ls, lid)) = here
            .iter()
            .find(|(os, oid)| *oid != me.id && (*os > s || (*os == s && *oid > me.id)))
        {
            return Some((ls - s, *lid));
        }
        let next = route.get(edge_idx + 1)?;
        let remaining = self.graph.edge(route[edge_idx]).unwrap().length_m - s;
        on_edge
            .get(next)
            .and_then(|v| v.first())
            .map(|(os, oid)| (remaining + os, *oid))
    }

    fn fire_triggers(&mut self) {
        let now = self.time;
        let mut to_start = Vec::new();
        for a in self.agents.values().filter(|a| a.is_active()) {
            let Motion::Crossing { trigger, started: false, .. } = &a.motion else { continue };
            let go = match *trigger {
                CrossingTrigger::AtTime(t) => now >= t,
                CrossingTrigger::VehicleWithin { vehicle, distance_m } => self
                    .agents
                    .get(&vehicle)
                    .filter(|v| v.is_active())
                    .is_some_and(|v| v.position.distance(a.position) <= distance_m),
                CrossingTrigger::VehicleEta { vehicle, seconds } => {
                    self.agents.get(&vehicle).filter(|v| v.is_active()).is_some_and(|v| {
                        let rel = a.position - v.position;
                        let ahead = rel.dot(Vec2::from_polar(1.0, v.heading));
                        ahead > 0.0 && ahead <= seconds * v.speed.max(0.1)
                    })
                }
            };
            if go {
                to_start.push(a.id);
            }
        }
        for id in to_start {
            if let Some(Agent { motion: Motion::Crossing { started, .. }, .. }) = self.agents.get_mut(&id) {
                *started = true;
            }
        }
    }
}
