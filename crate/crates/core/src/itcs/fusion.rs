use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::plans::{Trajectory, Waypoint};
use crate::assoc::{cluster, Candidate, Gate};
use crate::simcore::SimTime;
use crate::sor::{FrameError, SemanticFrame, SemanticObject, SourceKind, SourceRef};
use crate::world::{Corridor, Vec2};

/// Length of the corridor segment that forms one cloud area.
pub const AREA_LENGTH_M: f64 = 250.0;
/// Area ids of successive corridors are offset by this much.
const AREAS_PER_CORRIDOR: u32 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ItcsParams {
    pub gate_m: f64,
    pub heading_gate_deg: f64,
    pub staleness_ms: u64,
    pub fusion_period_ms: u64,
    pub prediction_horizon_ms: u64,
    pub prediction_step_ms: u64,
}

impl Default for ItcsParams {
    fn default() -> Self {
        Self {
            gate_m: 3.0,
            heading_gate_deg: 45.0,
            staleness_ms: 1000,
            fusion_period_ms: 100,
            prediction_horizon_ms: 3000,
            prediction_step_ms: 100,
        }
    }
}

impl ItcsParams {
    pub fn gate(&self) -> Gate {
        Gate { distance_m: self.gate_m, heading_rad: Some(self.heading_gate_deg.to_radians()) }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.gate_m > 0.0) {
            return Err(format!("gate_m must be > 0, got {}", self.gate_m));
        }
        if !(self.heading_gate_deg > 0.0) {
            return Err(format!("heading_gate_deg must be > 0, got {}", self.heading_gate_deg));
        }
        if self.fusion_period_ms == 0 || self.prediction_step_ms == 0 {
            return Err("fusion_period_ms and prediction_step_ms must be > 0".into());
        }
        Ok(())
    }
}

/// One object as buffered for cloud fusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observation {
    pub source: SourceRef,
    pub frame_time: SimTime,
    pub object: SemanticObject,
    pub area: u32,
}

impl Observation {
    fn sort_key(&self) -> (u32, SourceRef, SimTime, u64) {
        (self.area, self.source, self.frame_time, self.object.object_id)
    }

    pub(crate) fn candidate(&self) -> Candidate {
        Candidate {
            object_type: self.object.object_type,
            location: self.object.location,
            heading: self.object.heading,
        }
    }
}

/// Per-area buffers of observations waiting for the next fusion cycle.
#[derive(Debug, Clone, Default)]
pub struct Inbox {
    areas: BTreeMap<u32, Vec<Observation>>,
    pub rejected: u64,
    pub accepted_frames: u64,
    pub bytes: u64,
}

impl Inbox {
    pub fn len(&self) -> usize {
        self.areas.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn area_counts(&self) -> BTreeMap<u32, usize> {
        self.areas.iter().map(|(a, v)| (*a, v.len())).collect()
    }

    pub fn push(&mut self, obs: Observation) {
        self.areas.entry(obs.area).or_default().push(obs);
    }

    /// Empty the buffers, returning observations in canonical order so the
    /// result does not depend on arrival order.
    pub fn drain(&mut self) -> Vec<Observation> {
        let mut all: Vec<Observation> = std::mem::take(&mut self.areas).into_values().flatten().collect();
        all.sort_by_key(Observation::sort_key);
        all
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Track {
    pub id: u64,
    pub object: SemanticObject,
    pub sources: BTreeSet<SourceRef>,
    pub last_update: SimTime,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct GlobalPerceptionMap {
    pub time: SimTime,
    pub tracks: BTreeMap<u64, Track>,
    /// Areas that contributed observations in the last cycle.
    pub areas: BTreeSet<u32>,
}

impl GlobalPerceptionMap {
    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }
}

/// The cloud service.
#[derive(Debug, Clone)]
pub struct Itcs {
    pub params: ItcsParams,
    corridors: Vec<Corridor>,
    inbox: Inbox,
    map: GlobalPerceptionMap,
    next_id: u64,
}

impl Itcs {
    pub fn new(params: ItcsParams, corridors: Vec<Corridor>) -> Self {
        Self { params, corridors, inbox: Inbox::default(), map: GlobalPerceptionMap::default(), next_id: 1 }
    }

    pub fn map(&self) -> &GlobalPerceptionMap {
        &self.map
    }

    pub fn inbox(&self) -> &Inbox {
        &self.inbox
    }

    /// Area of a point: its 250 m segment along the nearest corridor.
    pub fn area_of(&self, p: Vec2) -> u32 {
        let best = self
            .corridors
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.project(p)))
            .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(a.0.cmp(&b.0)));
        match best {
            Some((i, (s, _))) => i as u32 * AREAS_PER_CORRIDOR + (s / AREA_LENGTH_M).floor().max(0.0) as u32,
            None => 0,
        }
    }

    /// Every area id [`Itcs::area_of`] can return.
    pub fn areas(&self) -> BTreeSet<u32> {
        if self.corridors.is_empty() {
            return BTreeSet::from([0]);
        }
        self.corridors
            .iter()
            .enumerate()
            .flat_map(|(i, c)| {
                let last = (c.length() / AREA_LENGTH_M).floor() as u32;
                (0..=last).map(move |k| i as u32 * AREAS_PER_CORRIDOR + k)
            })
            .collect()
    }

    /// Buffer a frame's objects by area. Malformed frames are counted and
    /// dropped whole.
    pub fn ingest(&mut self, frame: &SemanticFrame) -> Result<usize, FrameError> {
        if let Err(e) = frame.validate() {
            self.inbox.rejected += 1;
            return Err(e);
        }
        self.inbox.accepted_frames += 1;
        self.inbox.bytes += frame.size_bytes;
        for o in &frame.objects {
            let area = self.area_of(o.location);
            self.inbox.push(Observation { source: frame.source, frame_time: frame.frame_time, object: *o, area });
        }
        Ok(frame.objects.len())
    }

    /// Drain the inbox, extrapolating every observation to `t`.
    pub(crate) fn take_workload(&mut self, t: SimTime) -> Vec<Observation> {
        let mut obs = self.inbox.drain();
        for o in &mut obs {
            o.object.location = o.object.location_at(t);
            o.object.timestamp = t;
        }
        obs
    }

    /// One fusion cycle over everything buffered.
    pub fn fuse_global(&mut self, t: SimTime) -> &GlobalPerceptionMap {
        let obs = self.take_workload(t);
        let cands: Vec<Candidate> = obs.iter().map(Observation::candidate).collect();
        let comps = cluster(&cands, self.params.gate());
        self.apply_components(t, &obs, &comps);
        &self.map
    }

    /// Merge each component into the track set, then evict and dedup.
    pub(crate) fn apply_components(&mut self, t: SimTime, obs: &[Observation], comps: &[Vec<usize>]) {
        let gate = self.params.gate();
        let mut matched: BTreeSet<u64> = BTreeSet::new();
        for comp in comps {
            let best = *comp
                .iter()
                .min_by_key(|&&i| {
                    let o = &obs[i];
                    (Reverse(o.frame_time), o.source.kind != SourceKind::Sov, o.source.id, o.object.object_id)
                })
                .expect("components are nonempty");
            let rep = obs[best].object;
            let sources: BTreeSet<SourceRef> = comp.iter().map(|&i| obs[i].source).collect();
            let rep_c = Candidate { object_type: rep.object_type, location: rep.location, heading: rep.heading };
            let existing = self
                .map
                .tracks
                .values()
                .filter(|tr| !matched.contains(&tr.id))
                .filter_map(|tr| {
                    let c = Candidate {
                        object_type: tr.object.object_type,
                        location: tr.object.location_at(t),
                        heading: tr.object.heading,
                    };
                    gate.links(&rep_c, &c).then(|| (c.location.distance(rep.location), tr.id))
                })
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|(_, id)| id);
            let id = existing.unwrap_or_else(|| {
                self.next_id += 1;
                self.next_id - 1
            });
            matched.insert(id);
            self.map.tracks.insert(id, Track { id, object: rep, sources, last_update: t });
        }

        let horizon = self.params.staleness_ms;
        self.map.tracks.retain(|_, tr| t.since(tr.last_update) <= horizon);
        self.merge_close_tracks(t);
        self.map.time = t;
        self.map.areas = obs.iter().map(|o| o.area).collect();
    }

    /// Enforce the map invariant: no two same-type tracks within the gate.
    fn merge_close_tracks(&mut self, t: SimTime) {
        loop {
            let ids: Vec<u64> = self.map.tracks.keys().copied().collect();
            let mut pair = None;
            'outer: for (k, a) in ids.iter().enumerate() {
                for b in &ids[k + 1..] {
                    let (ta, tb) = (&self.map.tracks[a], &self.map.tracks[b]);
                    if ta.object.object_type == tb.object.object_type
                        && ta.object.location_at(t).distance(tb.object.location_at(t)) <= self.params.gate_m
                    {
                        pair = Some((*a, *b));
                        break 'outer;
                    }
                }
            }
            let Some((a, b)) = pair else { break };
            let (keep, drop) = if self.map.tracks[&b].last_update > self.map.tracks[&a].last_update { (b, a) } else { (a, b) };
            let gone = self.map.tracks.remove(&drop).expect("present");
            self.map.tracks.get_mut(&keep).expect("present").sources.extend(gone.sources);
        }
    }

    /// Constant-velocity prediction of a track.
    pub fn predict(&self, track: &Track) -> Trajectory {
        predict(track, self.map.time, self.params.prediction_horizon_ms, self.params.prediction_step_ms)
    }
}

pub(crate) fn predict(track: &Track, now: SimTime, horizon_ms: u64, step_ms: u64) -> Trajectory {
    let o = &track.object;
    let waypoints = (1..=horizon_ms / step_ms)
        .map(|k| {
            let time = now + k * step_ms;
            Waypoint { time, position: o.location_at(time), speed: o.speed }
        })
        .collect();
    Trajectory { track_id: track.id, waypoints }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sor::ObjectType;
    use crate::world::{AgentClass, Footprint};

    fn obj(id: u64, t: u64, kind: ObjectType, x: f64, y: f64) -> SemanticObject {
        SemanticObject {
            object_id: id,
            timestamp: SimTime(t),
            object_type: kind,
            shape: Footprint::default_for(AgentClass::Vehicle),
            location: Vec2::new(x, y),
            speed: 0.0,
            heading: 0.0,
        }
    }

    fn itcs() -> Itcs {
        let c = Corridor::from_points(vec![Vec2::new(0.0, 0.0), Vec2::new(1000.0, 0.0)]).unwrap();
        Itcs::new(ItcsParams::default(), vec![c])
    }

    #[test]
    fn two_roadside_reports_of_one_vehicle_make_one_track() {
        let mut c = itcs();
        c.ingest(&SemanticFrame::new(SourceRef::sor(1), SimTime(0), vec![obj(5, 0, ObjectType::Vehicle, 249.0, 0.0)]))
            .unwrap();
        c.ingest(&SemanticFrame::new(SourceRef::sor(2), SimTime(0), vec![obj(5, 0, ObjectType::Vehicle, 250.5, 0.0)]))
            .unwrap();
        assert_eq!(c.inbox().area_counts().len(), 2);
        let m = c.fuse_global(SimTime(0));
        assert_eq!(m.len(), 1);
        assert_eq!(m.tracks.values().next().unwrap().sources.len(), 2);
    }

    #[test]
    fn distant_pedestrians_stay_apart() {
        let mut c = itcs();
        let f = SemanticFrame::new(
            SourceRef::sor(1),
            SimTime(0),
            vec![obj(1, 0, ObjectType::Pedestrian, 10.0, 0.0), obj(2, 0, ObjectType::Pedestrian, 15.0, 0.0)],
        );
        c.ingest(&f).unwrap();
        assert_eq!(c.fuse_global(SimTime(0)).len(), 2);
    }

    #[test]
    fn newer_vehicle_report_wins() {
        let mut c = itcs();
        c.ingest(&SemanticFrame::new(SourceRef::sor(1), SimTime(40), vec![obj(5, 40, ObjectType::Vehicle, 100.0, 0.0)]))
            .unwrap();
        c.ingest(&SemanticFrame::new(SourceRef::sov(9), SimTime(60), vec![obj(5, 60, ObjectType::Vehicle, 101.0, 0.0)]))
            .unwrap();
        let m = c.fuse_global(SimTime(100));
        let tr = m.tracks.values().next().unwrap();
        assert_eq!(tr.object.location, Vec2::new(101.0, 0.0));
    }

    #[test]
    fn same_time_prefers_vehicle_then_low_source_id() {
        let mut c = itcs();
        c.ingest(&SemanticFrame::new(SourceRef::sor(1), SimTime(60), vec![obj(5, 60, ObjectType::Vehicle, 100.0, 0.0)]))
            .unwrap();
        c.ingest(&SemanticFrame::new(SourceRef::sov(9), SimTime(60), vec![obj(5, 60, ObjectType::Vehicle, 101.0, 0.0)]))
            .unwrap();
        let m = c.fuse_global(SimTime(100));
        assert_eq!(m.tracks.values().next().unwrap().object.location, Vec2::new(101.0, 0.0));
    }

    #[test]
    fn malformed_frame_is_rejected_and_counted() {
        let mut c = itcs();
        let mut bad = obj(1, 0, ObjectType::Vehicle, 0.0, 0.0);
        bad.speed = -1.0;
        assert!(c.ingest(&SemanticFrame::new(SourceRef::sor(1), SimTime(0), vec![bad])).is_err());
        assert_eq!(c.inbox().rejected, 1);
        assert!(c.inbox().is_empty());
    }

    #[test]
    fn ten_objects_buffered() {
        let mut c = itcs();
        let objs = (0..10).map(|i| obj(i, 0, ObjectType::Vehicle, 10.0 * i as f64, 0.0)).collect();
        assert_eq!(c.ingest(&SemanticFrame::new(SourceRef::sor(1), SimTime(0), objs)).unwrap(), 10);
        assert_eq!(c.inbox().len(), 10);
        assert_eq!(c.inbox().bytes, 1200);
    }

    #[test]
    fn tracks_keep_ids_and_go_stale() {
        let mut c = itcs();
        let mut moving = obj(5, 0, ObjectType::Vehicle, 100.0, 0.0);
        moving.speed = 10.0;
        c.ingest(&SemanticFrame::new(SourceRef::sor(1), SimTime(0), vec![moving])).unwrap();
        let id = *c.fuse_global(SimTime(0)).tracks.keys().next().unwrap();
        moving.location = Vec2::new(101.0, 0.0);
        moving.timestamp = SimTime(100);
        c.ingest(&SemanticFrame::new(SourceRef::sor(1), SimTime(100), vec![moving])).unwrap();
        assert_eq!(*c.fuse_global(SimTime(100)).tracks.keys().next().unwrap(), id);
        assert_eq!(c.fuse_global(SimTime(1100)).len(), 1);
        assert!(c.fuse_global(SimTime(1101)).is_empty());
    }

    #[test]
    fn fusing_the_same_inbox_twice_is_idempotent() {
        let frame = SemanticFrame::new(
            SourceRef::sor(1),
            SimTime(0),
            (0..6).map(|i| obj(i, 0, ObjectType::Vehicle, 7.0 * i as f64, 0.0)).collect(),
        );
        let mut c = itcs();
        c.ingest(&frame).unwrap();
        let first = c.fuse_global(SimTime(0)).clone();
        c.ingest(&frame).unwrap();
        assert_eq!(c.fuse_global(SimTime(0)), &first);
    }

    #[test]
    fn prediction_is_constant_velocity() {
        let mut o = obj(1, 0, ObjectType::Vehicle, 0.0, 0.0);
        o.speed = 10.0;
        let tr = Track { id: 1, object: o, sources: BTreeSet::new(), last_update: SimTime(0) };
        let p = predict(&tr, SimTime(0), 3000, 100);
        assert_eq!(p.waypoints.len(), 30);
        assert!(p.is_well_formed());
        assert!((p.waypoints[9].position.x - 10.0).abs() < 1e-12);
        o.speed = 0.0;
        let still = predict(&Track { object: o, ..tr }, SimTime(0), 3000, 100);
        assert!(still.waypoints.iter().all(|w| w.position == Vec2::ZERO));
    }
}
