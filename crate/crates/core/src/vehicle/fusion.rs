use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ttc::{time_to_collision, DEFAULT_CONFLICT_HALF_WIDTH_M};
use super::Mode;
use crate::assoc::{cluster, Candidate, Gate};
use crate::network::ChannelKind;
use crate::simcore::SimTime;
use crate::sor::{SemanticFrame, SemanticObject, SourceKind, SourceRef};
use crate::world::{AgentId, AgentState};

/// How attribute conflicts between on-board and roadside observations of the
/// same object are settled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrustPolicy {
    /// The vehicle's own sensors win.
    #[default]
    SovWins,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionParams {
    pub tick_period_ms: u64,
    pub freshness_budget_ms: u64,
    pub gate_m: f64,
    pub conflict_position_m: f64,
    pub conflict_speed_mps: f64,
    pub ttc_threshold_s: f64,
    /// An object unseen for more than this many ticks counts as new again.
    pub memory_ticks: u64,
    pub conflict_half_width_m: f64,
    /// Extrapolate roadside objects to the tick time before association.
    pub motion_compensation: bool,
    pub trust: TrustPolicy,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            tick_period_ms: 100,
            freshness_budget_ms: 100,
            gate_m: 2.0,
            conflict_position_m: 0.5,
            conflict_speed_mps: 1.0,
            ttc_threshold_s: 2.0,
            memory_ticks: 50,
            conflict_half_width_m: DEFAULT_CONFLICT_HALF_WIDTH_M,
            motion_compensation: true,
            trust: TrustPolicy::SovWins,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.tick_period_ms == 0 || self.tick_period_ms > 100 {
            return Err(format!("tick_period_ms must be in 1..=100, got {}", self.tick_period_ms));
        }
        if !(self.gate_m > 0.0) {
            return Err(format!("gate_m must be > 0, got {}", self.gate_m));
        }
        if !(self.ttc_threshold_s > 0.0) {
            return Err(format!("ttc_threshold_s must be > 0, got {}", self.ttc_threshold_s));
        }
        Ok(())
    }
}

/// A frame as held by the vehicle, with when and how it arrived.
#[derive(Debug, Clone, PartialEq)]
pub struct Received {
    pub frame: SemanticFrame,
    pub received_at: SimTime,
    pub via: ChannelKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    Local,
    Roadside,
    Merged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FusedObject {
    pub object: SemanticObject,
    /// Source of the kept attributes.
    pub source: SourceRef,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalMap {
    pub time: SimTime,
    pub vehicle: AgentId,
    pub tick: u64,
    pub objects: Vec<FusedObject>,
    /// One entry per roadside source expected at this tick.
    pub deadline_missed: BTreeMap<SourceRef, bool>,
    pub sources_used: Vec<SourceRef>,
    /// Components where on-board and roadside attributes disagreed.
    pub conflicts: u32,
    /// Frames that arrived since the previous tick, per channel.
    pub arrivals: BTreeMap<ChannelKind, u32>,
}

impl LocalMap {
    pub fn object(&self, id: u64) -> Option<&FusedObject> {
        self.objects.iter().find(|o| o.object.object_id == id)
    }

    pub fn misses(&self) -> usize {
        self.deadline_missed.values().filter(|m| **m).count()
    }

    pub fn heard(&self, ch: ChannelKind) -> bool {
        self.arrivals.get(&ch).is_some_and(|n| *n > 0)
    }

    /// Smallest time to collision over all objects.
    pub fn min_ttc(&self, ego: &AgentState, half_width_m: f64) -> f64 {
        self.most_critical(ego, half_width_m).map_or(f64::INFINITY, |(t, _)| t)
    }

    /// The object with the smallest finite time to collision, ties to the
    /// earlier object in map order.
    pub fn most_critical(&self, ego: &AgentState, half_width_m: f64) -> Option<(f64, &FusedObject)> {
        self.objects
            .iter()
            .map(|o| (ttc_to(ego, &o.object, half_width_m), o))
            .filter(|(t, _)| t.is_finite())
            .fold(None, |best: Option<(f64, &FusedObject)>, (t, o)| match best {
                Some((bt, _)) if bt <= t => best,
                _ => Some((t, o)),
            })
    }
}

pub(crate) fn ttc_to(ego: &AgentState, o: &SemanticObject, half_width_m: f64) -> f64 {
    time_to_collision(ego.position, ego.velocity(), ego.heading, o.location, o.velocity(), half_width_m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DisengagementEvent {
    pub time: SimTime,
    pub vehicle: AgentId,
    pub cause_object: u64,
    pub first_detection_ttc_s: f64,
}

/// The first time the vehicle ever perceives an object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstDetection {
    pub time: SimTime,
    pub object_id: u64,
    /// From the ego to the perceived location.
    pub distance_m: f64,
}

/// Per-vehicle deadline-driven fusion engine.
#[derive(Debug, Clone)]
pub struct FusionEngine {
    pub vehicle: AgentId,
    pub params: FusionParams,
    pub mode: Mode,
    in_flight: Vec<Received>,
    latest: BTreeMap<SourceRef, Received>,
    last_seen: BTreeMap<u64, u64>,
    ever_seen: BTreeSet<u64>,
    ticks: u64,
}

impl FusionEngine {
    pub fn new(vehicle: AgentId, mode: Mode, params: FusionParams) -> Self {
        Self {
            vehicle,
            params,
            mode,
            in_flight: Vec::new(),
            latest: BTreeMap::new(),
            last_seen: BTreeMap::new(),
            ever_seen: BTreeSet::new(),
            ticks: 0,
        }
    }

    /// Hand a frame to the vehicle. It becomes visible to the first tick at
    /// or after `received_at`, so callers may enqueue at send time.
    pub fn receive(&mut self, frame: SemanticFrame, received_at: SimTime, via: ChannelKind) {
        self.in_flight.push(Received { frame, received_at, via });
    }

    pub fn latest(&self, source: SourceRef) -> Option<&Received> {
        self.latest.get(&source)
    }

    fn collect_arrivals(&mut self, t: SimTime) -> BTreeMap<ChannelKind, u32> {
        let mut arrivals = BTreeMap::new();
        let mut keep = Vec::with_capacity(self.in_flight.len());
        for r in self.in_flight.drain(..) {
            if r.received_at > t {
                keep.push(r);
                continue;
            }
            *arrivals.entry(r.via).or_insert(0) += 1;
            let newer = self.latest.get(&r.frame.source).is_none_or(|cur| {
                (r.frame.frame_time, Reverse(r.received_at)) > (cur.frame.frame_time, Reverse(cur.received_at))
            });
            if newer {
                self.latest.insert(r.frame.source, r);
            }
        }
        self.in_flight = keep;
        arrivals
    }

    /// Build the local map for tick `t` from the on-board frame and whatever
    /// roadside frames are fresh. `expected` lists the roadside sources that
    /// should be reachable now; stale or absent ones are marked missed.
    pub fn fuse_tick(&mut self, t: SimTime, local: &SemanticFrame, expected: &[SourceRef]) -> LocalMap {
        self.ticks += 1;
        let arrivals = self.collect_arrivals(t);
        let budget = self.params.freshness_budget_ms;
        let fresh = |r: &Received| r.frame.frame_time <= t && t.since(r.frame.frame_time) <= budget;

        let mut deadline_missed = BTreeMap::new();
        let mut sources_used = Vec::new();
        let mut obs: Vec<(SourceRef, SimTime, SemanticObject)> = Vec::new();
        for o in &local.objects {
            obs.push((local.source, local.frame_time, *o));
        }
        if self.mode.uses_roadside() {
            for src in expected {
                deadline_missed.insert(*src, !self.latest.get(src).is_some_and(fresh));
            }
            for (src, r) in &self.latest {
                if !fresh(r) {
                    continue;
                }
                sources_used.push(*src);
                for o in r.frame.objects.iter().filter(|o| o.object_id != self.vehicle.0) {
                    let mut o = *o;
                    if self.params.motion_compensation {
                        o.location = o.location_at(t);
                        o.timestamp = t;
                    }
                    obs.push((*src, r.frame.frame_time, o));
                }
            }
        }

        let candidates: Vec<Candidate> = obs
            .iter()
            .map(|(_, _, o)| Candidate { object_type: o.object_type, location: o.location, heading: o.heading })
            .collect();
        let comps = cluster(&candidates, Gate { distance_m: self.params.gate_m, heading_rad: None });
        let is_local = |s: &SourceRef| s.kind == SourceKind::Sov;
        let mut conflicts = 0;
        let mut objects = Vec::with_capacity(comps.len());
        for comp in comps {
            let best = *comp
                .iter()
                .min_by_key(|&&i| {
                    let (s, ft, o) = &obs[i];
                    (!is_local(s), Reverse(*ft), s.id, o.object_id)
                })
                .expect("components are nonempty");
            let any_local = comp.iter().any(|&i| is_local(&obs[i].0));
            let any_roadside = comp.iter().any(|&i| !is_local(&obs[i].0));
            let provenance = match (any_local, any_roadside) {
                (true, true) => Provenance::Merged,
                (true, false) => Provenance::Local,
                _ => Provenance::Roadside,
            };
            let (src, _, kept) = obs[best];
            if provenance == Provenance::Merged {
                let disagrees = comp.iter().any(|&i| {
                    let o = &obs[i].2;
                    !is_local(&obs[i].0)
                        && (o.location.distance(kept.location) > self.params.conflict_position_m
                            || (o.speed - kept.speed).abs() > self.params.conflict_speed_mps)
                });
                conflicts += disagrees as u32;
            }
            objects.push(FusedObject { object: kept, source: src, provenance });
        }
        objects.sort_by(|a, b| {
            (a.object.object_type, a.object.object_id, a.source).cmp(&(b.object.object_type, b.object.object_id, b.source))
        });

        LocalMap {
            time: t,
            vehicle: self.vehicle,
            tick: self.ticks,
            objects,
            deadline_missed,
            sources_used,
            conflicts,
            arrivals,
        }
    }

    /// Flag objects that are new this tick and already too close to react to.
    /// Also returns the objects perceived for the first time ever.
    pub fn check_disengagement(
        &mut self,
        map: &LocalMap,
        ego: &AgentState,
    ) -> (Vec<DisengagementEvent>, Vec<FirstDetection>) {
        let mut events = Vec::new();
        let mut firsts = Vec::new();
        for fo in &map.objects {
            let id = fo.object.object_id;
            let is_new = self
                .last_seen
                .get(&id)
                .is_none_or(|&k| map.tick.saturating_sub(k) > self.params.memory_ticks);
            self.last_seen.insert(id, map.tick);
            if self.ever_seen.insert(id) {
                firsts.push(FirstDetection {
                    time: map.time,
                    object_id: id,
                    distance_m: ego.position.distance(fo.object.location),
                });
            }
            if is_new {
                let ttc = ttc_to(ego, &fo.object, self.params.conflict_half_width_m);
                if ttc < self.params.ttc_threshold_s {
                    events.push(DisengagementEvent {
                        time: map.time,
                        vehicle: self.vehicle,
                        cause_object: id,
                        first_detection_ttc_s: ttc,
                    });
                }
            }
        }
        (events, firsts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sor::ObjectType;
    use crate::world::{AgentClass, Footprint, Vec2};

    fn ped(id: u64, t: u64, x: f64, y: f64) -> SemanticObject {
        SemanticObject {
            object_id: id,
            timestamp: SimTime(t),
            object_type: ObjectType::Pedestrian,
            shape: Footprint::default_for(AgentClass::Pedestrian),
            location: Vec2::new(x, y),
            speed: 0.0,
            heading: 0.0,
        }
    }

    fn ego(x: f64, speed: f64) -> AgentState {
        AgentState {
            id: AgentId(100),
            class: AgentClass::Vehicle,
            position: Vec2::new(x, 0.0),
            speed,
            heading: 0.0,
            footprint: Footprint::default_for(AgentClass::Vehicle),
            controlled: true,
            edge: None,
        }
    }

    fn engine(mode: Mode) -> FusionEngine {
        FusionEngine::new(AgentId(100), mode, FusionParams::default())
    }

    fn local(t: u64, objs: Vec<SemanticObject>) -> SemanticFrame {
        SemanticFrame::new(SourceRef::sov(100), SimTime(t), objs)
    }

    #[test]
    fn fresh_frame_is_used_and_stale_one_missed() {
        let mut e = engine(Mode::Iaad);
        let s1 = SourceRef::sor(1);
        let s2 = SourceRef::sor(2);
        e.receive(SemanticFrame::new(s1, SimTime(940), vec![ped(1, 940, 30.0, 0.0)]), SimTime(980), ChannelKind::Cv2x);
        e.receive(SemanticFrame::new(s2, SimTime(860), vec![ped(2, 860, 60.0, 0.0)]), SimTime(990), ChannelKind::Cv2x);
        let m = e.fuse_tick(SimTime(1000), &local(1000, vec![]), &[s1, s2]);
        assert!(!m.deadline_missed[&s1]);
        assert!(m.deadline_missed[&s2]);
        assert_eq!(m.sources_used, vec![s1]);
        assert_eq!(m.objects.len(), 1);
        assert_eq!(m.objects[0].object.object_id, 1);
        assert_eq!(m.arrivals[&ChannelKind::Cv2x], 2);
    }

    #[test]
    fn frame_not_yet_arrived_is_invisible() {
        let mut e = engine(Mode::Iaad);
        let s1 = SourceRef::sor(1);
        e.receive(SemanticFrame::new(s1, SimTime(950), vec![ped(1, 950, 30.0, 0.0)]), SimTime(1001), ChannelKind::Cv2x);
        let m = e.fuse_tick(SimTime(1000), &local(1000, vec![]), &[s1]);
        assert!(m.deadline_missed[&s1]);
        assert!(m.objects.is_empty());
        let m = e.fuse_tick(SimTime(1100), &local(1100, vec![]), &[s1]);
        assert!(m.deadline_missed[&s1], "arrived but 150 ms old");
    }

    #[test]
    fn vehicle_wins_on_conflict() {
        let mut e = engine(Mode::Iaad);
        let s1 = SourceRef::sor(1);
        e.receive(SemanticFrame::new(s1, SimTime(1000), vec![ped(7, 1000, 10.8, 2.0)]), SimTime(1000), ChannelKind::Cv2x);
        let m = e.fuse_tick(SimTime(1000), &local(1000, vec![ped(7, 1000, 10.0, 2.0)]), &[s1]);
        assert_eq!(m.objects.len(), 1);
        assert_eq!(m.objects[0].object.location, Vec2::new(10.0, 2.0));
        assert_eq!(m.objects[0].provenance, Provenance::Merged);
        assert_eq!(m.conflicts, 1);
    }

    #[test]
    fn vehicle_only_ignores_roadside() {
        let mut e = engine(Mode::VehicleOnly);
        let s1 = SourceRef::sor(1);
        e.receive(SemanticFrame::new(s1, SimTime(1000), vec![ped(7, 1000, 50.0, 2.0)]), SimTime(1000), ChannelKind::Cv2x);
        let m = e.fuse_tick(SimTime(1000), &local(1000, vec![]), &[s1]);
        assert!(m.objects.is_empty());
        assert!(m.deadline_missed.is_empty());
    }

    #[test]
    fn ego_reported_by_roadside_is_dropped() {
        let mut e = engine(Mode::Iaad);
        let s1 = SourceRef::sor(1);
        let mut me = ped(100, 1000, 0.0, 0.0);
        me.object_type = ObjectType::Vehicle;
        e.receive(SemanticFrame::new(s1, SimTime(1000), vec![me]), SimTime(1000), ChannelKind::Cv2x);
        assert!(e.fuse_tick(SimTime(1000), &local(1000, vec![]), &[s1]).objects.is_empty());
    }

    #[test]
    fn disengagement_on_late_first_detection_only() {
        let mut e = engine(Mode::VehicleOnly);
        let m = e.fuse_tick(SimTime(100), &local(100, vec![ped(1, 100, 8.0, 0.0)]), &[]);
        let (ev, first) = e.check_disengagement(&m, &ego(0.0, 8.0));
        assert_eq!(ev.len(), 1);
        assert!((ev[0].first_detection_ttc_s - 1.0).abs() < 1e-12);
        assert_eq!(first[0].distance_m, 8.0);
        // seen again next tick: not new
        let m = e.fuse_tick(SimTime(200), &local(200, vec![ped(1, 200, 7.0, 0.0)]), &[]);
        assert!(e.check_disengagement(&m, &ego(0.0, 8.0)).0.is_empty());

        let mut e = engine(Mode::VehicleOnly);
        let m = e.fuse_tick(SimTime(100), &local(100, vec![ped(1, 100, 60.0, 0.0)]), &[]);
        assert!(e.check_disengagement(&m, &ego(0.0, 8.0)).0.is_empty());
    }

    #[test]
    fn object_forgotten_after_memory_window_is_new_again() {
        let mut e = engine(Mode::VehicleOnly);
        let m = e.fuse_tick(SimTime(100), &local(100, vec![ped(1, 100, 60.0, 0.0)]), &[]);
        e.check_disengagement(&m, &ego(0.0, 8.0));
        for k in 2..=52 {
            let m = e.fuse_tick(SimTime(100 * k), &local(100 * k, vec![]), &[]);
            e.check_disengagement(&m, &ego(0.0, 8.0));
        }
        let m = e.fuse_tick(SimTime(5300), &local(5300, vec![ped(1, 5300, 8.0, 0.0)]), &[]);
        let (ev, first) = e.check_disengagement(&m, &ego(0.0, 8.0));
        assert_eq!(ev.len(), 1);
        assert!(first.is_empty());
    }

    #[test]
    fn roadside_objects_are_extrapolated_to_tick_time() {
        let mut e = engine(Mode::Iaad);
        let s1 = SourceRef::sor(1);
        let mut o = ped(3, 950, 40.0, 0.0);
        o.speed = 2.0;
        e.receive(SemanticFrame::new(s1, SimTime(950), vec![o]), SimTime(990), ChannelKind::Cv2x);
        let m = e.fuse_tick(SimTime(1000), &local(1000, vec![]), &[s1]);
        assert!((m.objects[0].object.location.x - 40.1).abs() < 1e-12);
    }
}
