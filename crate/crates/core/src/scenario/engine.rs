//! Wires world, roadside units, channels, vehicles and the cloud into one
//! discrete-event run and aggregates the metrics.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use super::config::Scenario;
use super::report::Report;
use crate::costmodel::deployment_cost;
use crate::itcs::{monitor_lanes, plan_routes, Itcs, Origin, RouteRequest, RoutePlan, TrajectoryPlan};
use crate::network::{Channel, ChannelKind, Delivery, Message, NodeRef};
use crate::simcore::{RngForks, RngStream, Scheduler, SimTime};
use crate::sor::{SemanticFrame, SemanticObject, SourceRef};
use crate::vehicle::{
    local_sense, time_to_collision, ControlAction, DisengagementEvent, FirstDetection, FusionEngine, LinkMonitor,
    LinkState, LinkTransition, Mode, PlanFollower, SovNode,
};
use crate::world::{AgentId, AgentState, SpeedCommand, Vec2, World, DEFAULT_ACCEL_MPS2};

#[derive(Debug, Clone, Copy)]
enum Ev {
    SorSense(usize),
    FusionTick,
    CloudCycle,
    PlanRoutes,
}

/// One vehicle's fusion tick, kept when the fusion log is enabled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusionLogEntry {
    pub time: SimTime,
    pub vehicle: AgentId,
    pub objects: usize,
    pub roadside_sources: usize,
    pub deadline_misses: usize,
    pub conflicts: u32,
    pub link_state: Option<LinkState>,
    pub min_ttc_s: Option<f64>,
    pub command_mps: Option<f64>,
}

/// Report plus the event-level detail behind it.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Report,
    pub transitions: BTreeMap<AgentId, Vec<LinkTransition>>,
    pub disengagements: Vec<DisengagementEvent>,
    pub first_detections: Vec<(AgentId, FirstDetection)>,
    pub final_speeds: BTreeMap<AgentId, f64>,
    pub fusion_log: Vec<FusionLogEntry>,
}

struct Sov {
    node: SovNode,
    fusion: FusionEngine,
    monitor: Option<LinkMonitor>,
    follower: PlanFollower,
    noise: RngStream,
    routes: Vec<(SimTime, RoutePlan)>,
    plans: Vec<(SimTime, TrajectoryPlan)>,
    safe_stop: bool,
}

#[derive(Default)]
struct Tally {
    expected: u64,
    missed: u64,
    latencies: Vec<u64>,
    firsts: Vec<(AgentId, FirstDetection)>,
    disengagements: Vec<DisengagementEvent>,
    conflicts: u64,
    /// (channel, src, dst, second) → bytes arriving in that second.
    link_bytes: BTreeMap<(ChannelKind, NodeRef, NodeRef, u64), u64>,
    sor_bytes: BTreeMap<u32, u64>,
    cloud_cycles: u64,
    partition_objects: u64,
    makespan_sum_ms: f64,
    makespan_max_ms: f64,
    partition_errors: u64,
    route_plans: u64,
    routes_applied: u64,
    plans_issued: u64,
    log: Vec<FusionLogEntry>,
}

impl Tally {
    fn arrival(&mut self, ch: ChannelKind, src: NodeRef, dst: NodeRef, at: SimTime, bytes: u64) {
        *self.link_bytes.entry((ch, src, dst, at.ms() / 1000)).or_default() += bytes;
    }
}

struct Engine<'a> {
    sc: &'a Scenario,
    mode: Mode,
    world: World,
    sovs: BTreeMap<AgentId, Sov>,
    cv2x: Channel,
    fiveg: Channel,
    cv2x_rng: RngStream,
    fiveg_rng: RngStream,
    sor_noise: Vec<RngStream>,
    itcs: Itcs,
    cloud_inbox: Vec<(SimTime, SemanticFrame)>,
    tally: Tally,
}

/// Simulate `scenario` to its end and report.
pub fn run(scenario: &Scenario) -> RunOutcome {
    let cfg = &scenario.config;
    let mode = cfg.mode;
    let mut forks = RngForks::new(cfg.seed);
    let mut fork = |label: String| forks.fork(&label).expect("labels are unique");

    let mut world =
        World::new(scenario.graph.clone(), scenario.occluders.clone(), cfg.world_step_ms).expect("validated world");
    for a in &scenario.agents {
        world.add_agent(a.clone()).expect("validated agent");
    }
    let sovs = scenario
        .sovs
        .iter()
        .map(|n| {
            let sov = Sov {
                node: *n,
                fusion: FusionEngine::new(n.agent, mode, cfg.fusion),
                monitor: mode.failover_enabled().then(|| LinkMonitor::new(cfg.failover, SimTime::ZERO)),
                follower: PlanFollower::new(),
                noise: fork(format!("sov/{}/noise", n.agent.0)),
                routes: Vec::new(),
                plans: Vec::new(),
                safe_stop: false,
            };
            (n.agent, sov)
        })
        .collect();
    let sor_noise = scenario.sors.iter().map(|s| fork(format!("sor/{}/noise", s.node.id))).collect();
    let mut eng = Engine {
        sc: scenario,
        mode,
        world,
        sovs,
        cv2x: Channel::new(scenario.cv2x).with_outages(scenario.cv2x_outages.clone()),
        fiveg: Channel::new(scenario.fiveg).with_outages(scenario.fiveg_outages.clone()),
        cv2x_rng: fork("net/cv2x".into()),
        fiveg_rng: fork("net/fiveg".into()),
        sor_noise,
        itcs: Itcs::new(cfg.itcs, scenario.corridors.clone()),
        cloud_inbox: Vec::new(),
        tally: Tally::default(),
    };

    let end = SimTime(cfg.duration_ms);
    let mut sched: Scheduler<Ev> = Scheduler::new();
    if mode.plans() {
        sched.schedule(SimTime::ZERO, Ev::PlanRoutes).expect("future");
    }
    if mode.uses_roadside() {
        for i in 0..scenario.sors.len() {
            sched.schedule(SimTime::ZERO, Ev::SorSense(i)).expect("future");
        }
        sched.schedule(SimTime(cfg.itcs.fusion_period_ms), Ev::CloudCycle).expect("future");
    }
    sched.schedule(SimTime(cfg.fusion.tick_period_ms), Ev::FusionTick).expect("future");

    sched
        .run_until(end, |s, ev| {
            let t = ev.fire_at;
            eng.world.advance_to(t);
            match ev.payload {
                Ev::SorSense(i) => {
                    eng.sor_sense(i, t);
                    s.schedule_in(scenario.sors[i].node.period_ms(), ev.payload);
                }
                Ev::FusionTick => {
                    eng.fusion_tick(t);
                    s.schedule_in(cfg.fusion.tick_period_ms, ev.payload);
                }
                Ev::CloudCycle => {
                    eng.cloud_cycle(t);
                    s.schedule_in(cfg.itcs.fusion_period_ms, ev.payload);
                }
                Ev::PlanRoutes => eng.plan_routes(t),
            }
        })
        .expect("clock moves forward");
    eng.world.advance_to(end);
    eng.finish(end)
}

/// Target speed when braking for `obj`: its speed along the ego heading,
/// never negative.
fn yield_speed(ego: &AgentState, obj: &SemanticObject) -> f64 {
    obj.velocity().dot(Vec2::from_polar(1.0, ego.heading)).max(0.0)
}

impl Engine<'_> {
    #[allow(clippy::too_many_arguments)]
    fn send(
        &mut self,
        ch: ChannelKind,
        src: NodeRef,
        dst: NodeRef,
        t_send: SimTime,
        bytes: u64,
        from: Vec2,
        to: Vec2,
    ) -> Option<SimTime> {
        let msg = Message { src, dst, t_send, size_bytes: bytes, payload: () };
        let d = match ch {
            ChannelKind::Cv2x => self.cv2x.deliver(&msg, from, to, &mut self.cv2x_rng),
            ChannelKind::FiveG => self.fiveg.deliver(&msg, from, to, &mut self.fiveg_rng),
        };
        match d {
            Delivery::Arrives(at) => {
                self.tally.arrival(ch, src, dst, at, bytes);
                Some(at)
            }
            Delivery::Dropped | Delivery::OutOfCoverage => None,
        }
    }

    fn sor_sense(&mut self, i: usize, t: SimTime) {
        let sc = self.sc;
        let placed = &sc.sors[i];
        let sor = &placed.node;
        let corridor = &sc.corridors[placed.corridor];
        let snap = self.world.snapshot();
        let frame = sor.sense(corridor, &snap, &mut self.sor_noise[i]);
        let ready = sor.available_at(t);
        *self.tally.sor_bytes.entry(sor.id).or_default() += frame.size_bytes;
        let src = NodeRef::Sor(sor.id);

        let ids: Vec<AgentId> = self.sovs.keys().copied().collect();
        for id in ids {
            let Some(ego) = snap.get(id) else { continue };
            let dst = NodeRef::Sov(id.0);
            let mut delivered = Vec::new();
            if let Some(at) = self.send(ChannelKind::Cv2x, src, dst, ready, frame.size_bytes, sor.position, ego.position) {
                delivered.push((at, ChannelKind::Cv2x));
            }
            let degraded = self.sovs[&id].monitor.as_ref().is_some_and(|m| m.state() != LinkState::Cv2xOk);
            if degraded && sor.position.distance(ego.position) <= self.sc.cv2x.coverage_m {
                if let Some(at) =
                    self.send(ChannelKind::FiveG, src, dst, ready, frame.size_bytes, sor.position, ego.position)
                {
                    delivered.push((at, ChannelKind::FiveG));
                }
            }
            for (at, via) in delivered {
                self.tally.latencies.push(at.since(frame.frame_time));
                self.sovs.get_mut(&id).expect("known").fusion.receive(frame.clone(), at, via);
            }

            if self.mode.plans() {
                if let Some(plan) = self.trajectory_plan(sor.id, ready, &frame, ego) {
                    self.tally.plans_issued += 1;
                    let bytes = 200 + 24 * plan.waypoints.len() as u64;
                    if let Some(at) = self.send(ChannelKind::Cv2x, src, dst, ready, bytes, sor.position, ego.position) {
                        self.sovs.get_mut(&id).expect("known").plans.push((at, plan));
                    }
                }
            }
        }

        if let Some(at) = self.send(ChannelKind::FiveG, src, NodeRef::Cloud, ready, frame.size_bytes, sor.position, sor.position)
        {
            self.cloud_inbox.push((at, frame));
        }
    }

    /// Short-horizon plan for a vehicle this unit can see: stop or yield
    /// behind the most urgent object in its frame, otherwise cruise at the
    /// edge's free speed.
    fn trajectory_plan(&self, sor: u32, ready: SimTime, frame: &SemanticFrame, truth: &AgentState) -> Option<TrajectoryPlan> {
        let me = frame.objects.iter().find(|o| o.object_id == truth.id.0)?;
        let ego = AgentState { position: me.location, speed: me.speed, heading: me.heading, ..*truth };
        let hw = self.sc.config.fusion.conflict_half_width_m;
        let critical = frame
            .objects
            .iter()
            .filter(|o| o.object_id != me.object_id)
            .map(|o| (time_to_collision(ego.position, ego.velocity(), ego.heading, o.location, o.velocity(), hw), o))
            .filter(|(ttc, _)| *ttc < self.sc.config.control.hazard_ttc_s)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.object_id.cmp(&b.1.object_id)));
        let cruise = truth.edge.and_then(|e| self.sc.graph.edge(e)).map_or(me.speed, |e| e.free_speed_mps);
        let target = critical.map_or(cruise, |(_, o)| yield_speed(&ego, o));
        Some(TrajectoryPlan::straight(
            truth.id,
            sor,
            ready,
            frame.frame_time,
            me.location,
            me.heading,
            me.speed,
            target,
            DEFAULT_ACCEL_MPS2,
            self.sc.config.control.brake_decel_mps2,
        ))
    }

    fn fusion_tick(&mut self, t: SimTime) {
        let sc = self.sc;
        let cfg = &sc.config;
        let snap = self.world.snapshot();
        let reactive = matches!(self.mode, Mode::Igad | Mode::Ipad);
        let ids: Vec<AgentId> = self.sovs.keys().copied().collect();
        for id in ids {
            let sov = self.sovs.get_mut(&id).expect("known");
            // routes also reach vehicles that have not departed yet
            let (arrived, pending): (Vec<_>, Vec<_>) = sov.routes.drain(..).partition(|(at, _)| *at <= t);
            sov.routes = pending;
            for (_, plan) in arrived {
                if self.world.reroute(id, plan.edges) {
                    self.tally.routes_applied += 1;
                }
            }
            let Some(ego) = snap.get(id).copied() else { continue };
            let (arrived, pending): (Vec<_>, Vec<_>) = sov.plans.drain(..).partition(|(at, _)| *at <= t);
            sov.plans = pending;
            for (_, plan) in arrived {
                sov.follower.offer(plan);
            }

            let range = if reactive { cfg.sov.reactive_range_m } else { sov.node.local_range_m };
            let local = local_sense(&sov.node, range, &snap, &self.sc.occluders, &mut sov.noise);
            let expected: Vec<SourceRef> = if self.mode.uses_roadside() {
                self.sc
                    .sors
                    .iter()
                    .filter(|s| s.node.position.distance(ego.position) <= self.sc.cv2x.coverage_m)
                    .map(|s| SourceRef::sor(s.node.id))
                    .collect()
            } else {
                Vec::new()
            };
            let map = sov.fusion.fuse_tick(t, &local, &expected);
            self.tally.expected += map.deadline_missed.len() as u64;
            self.tally.missed += map.misses() as u64;
            self.tally.conflicts += map.conflicts as u64;
            let (events, firsts) = sov.fusion.check_disengagement(&map, &ego);
            self.tally.disengagements.extend(events);
            self.tally.firsts.extend(firsts.into_iter().map(|f| (id, f)));

            if let Some(m) = sov.monitor.as_mut() {
                m.step(t, map.heard(ChannelKind::Cv2x), map.heard(ChannelKind::FiveG));
                if m.state() == LinkState::SafeStop {
                    sov.safe_stop = true;
                }
            }
            let action = if self.mode.plans() { sov.follower.follow(t) } else { ControlAction::OnBoard };

            let critical = map.most_critical(&ego, cfg.fusion.conflict_half_width_m);
            let cmd = if sov.monitor.as_ref().is_some_and(|m| m.state() == LinkState::SafeStop) {
                Some(SpeedCommand { target_mps: 0.0, decel_mps2: cfg.failover.stop_decel_mps2 })
            } else if let Some((_, o)) = critical.filter(|(ttc, _)| *ttc < cfg.control.hazard_ttc_s) {
                Some(SpeedCommand { target_mps: yield_speed(&ego, &o.object), decel_mps2: cfg.control.brake_decel_mps2 })
            } else if let ControlAction::FollowPlan { target_speed_mps, .. } = action {
                Some(SpeedCommand { target_mps: target_speed_mps, decel_mps2: cfg.control.brake_decel_mps2 })
            } else {
                None
            };
            self.world.set_command(id, cmd);

            if cfg.fusion_log {
                self.tally.log.push(FusionLogEntry {
                    time: t,
                    vehicle: id,
                    objects: map.objects.len(),
                    roadside_sources: map.sources_used.len(),
                    deadline_misses: map.misses(),
                    conflicts: map.conflicts,
                    link_state: sov.monitor.as_ref().map(LinkMonitor::state),
                    min_ttc_s: critical.map(|(ttc, _)| ttc),
                    command_mps: cmd.map(|c| c.target_mps),
                });
            }

            if self.mode.uses_roadside() {
                let dst = NodeRef::Cloud;
                if let Some(at) =
                    self.send(ChannelKind::FiveG, NodeRef::Sov(id.0), dst, t, local.size_bytes, ego.position, ego.position)
                {
                    self.cloud_inbox.push((at, local));
                }
            }
        }
    }

    fn cloud_cycle(&mut self, t: SimTime) {
        let (arrived, pending): (Vec<_>, Vec<_>) = self.cloud_inbox.drain(..).partition(|(at, _)| *at <= t);
        self.cloud_inbox = pending;
        for (_, frame) in &arrived {
            // malformed frames are tallied by the inbox
            let _ = self.itcs.ingest(frame);
        }
        self.tally.cloud_cycles += 1;
        match self.sc.config.partition.plan(&self.itcs.areas()) {
            Ok(plan) => match self.itcs.run_partitioned(&plan, t) {
                Ok((_, m)) => {
                    self.tally.partition_objects += m.objects as u64;
                    self.tally.makespan_sum_ms += m.makespan_ms;
                    self.tally.makespan_max_ms = self.tally.makespan_max_ms.max(m.makespan_ms);
                }
                Err(_) => {
                    self.tally.partition_errors += 1;
                    self.itcs.fuse_global(t);
                }
            },
            Err(_) => {
                self.tally.partition_errors += 1;
                self.itcs.fuse_global(t);
            }
        }
    }

    /// Load-aware routes for every vehicle, sent over the cellular link.
    fn plan_routes(&mut self, t: SimTime) {
        let graph = self.world.graph();
        let stats = monitor_lanes(self.itcs.map(), graph);
        let requests: Vec<RouteRequest> = self
            .sovs
            .keys()
            .filter_map(|id| {
                let a = self.world.agent(*id)?;
                if a.is_retired() {
                    return None;
                }
                let route = a.route()?;
                let last = graph.edge(*route.last()?)?.to;
                let origin = if a.is_active() {
                    Origin::OnEdge(a.current_edge()?)
                } else {
                    Origin::Node(graph.edge(route[0])?.from)
                };
                Some(RouteRequest { vehicle: *id, origin, destination: last })
            })
            .collect();
        for (id, plan) in plan_routes(graph, &requests, &stats, t) {
            let Ok(plan) = plan else { continue };
            self.tally.route_plans += 1;
            let pos = self.world.agent(id).map_or(Vec2::ZERO, |a| a.position);
            let bytes = 100 + 8 * plan.edges.len() as u64;
            if let Some(at) = self.send(ChannelKind::FiveG, NodeRef::Cloud, NodeRef::Sov(id.0), t, bytes, pos, pos) {
                self.sovs.get_mut(&id).expect("known").routes.push((at, plan));
            }
        }
    }

    fn finish(self, end: SimTime) -> RunOutcome {
        let sc = self.sc;
        let cfg = &sc.config;
        let tally = self.tally;
        let secs = end.as_secs_f64();
        let mut r = Report::default();
        r.push("topology_id", Value::from(sc.topology_id()), "sha256");
        r.push("mode", Value::from(self.mode.name()), "");
        r.push_u64("seed", cfg.seed, "");
        r.push_u64("duration_ms", cfg.duration_ms, "ms");
        r.push_u64("sov_count", self.sovs.len() as u64, "");
        r.push_u64("sor_count", sc.sors.len() as u64, "");

        let km: f64 = self.sovs.keys().map(|id| self.world.odometer(*id)).sum::<f64>() / 1000.0;
        let active_s: f64 = self.sovs.keys().map(|id| self.world.active_time_ms(*id) as f64).sum::<f64>() / 1000.0;
        let n_dis = tally.disengagements.len() as u64;
        r.push_u64("disengagements", n_dis, "");
        r.push_f64("disengagements_per_1000km", if km > 0.0 { n_dis as f64 / km * 1000.0 } else { 0.0 }, "1/1000km");
        r.push_f64("sov_distance_km", km, "km");
        r.push_f64(
            "deadline_miss_rate",
            if tally.expected > 0 { tally.missed as f64 / tally.expected as f64 } else { 0.0 },
            "fraction",
        );
        r.push_u64("deadline_checks", tally.expected, "");
        r.push_f64("mean_first_detection_distance_m", mean(tally.firsts.iter().map(|(_, f)| f.distance_m)), "m");
        r.push_u64("objects_detected", tally.firsts.len() as u64, "");

        let mut lat = tally.latencies.clone();
        lat.sort_unstable();
        r.push_f64("e2e_latency_mean_ms", mean(lat.iter().map(|x| *x as f64)), "ms");
        for p in [50, 95, 99] {
            r.push_f64(&format!("e2e_latency_p{p}_ms"), percentile(&lat, p), "ms");
        }

        r.push_f64("mean_sov_speed_mps", if active_s > 0.0 { km * 1000.0 / active_s } else { 0.0 }, "m/s");
        let trips = self.world.retirements().iter().filter(|x| x.controlled && x.completed_route).count();
        r.push_u64("completed_trips", trips as u64, "");

        let mut dwell: BTreeMap<LinkState, u64> = BTreeMap::new();
        let mut transitions = BTreeMap::new();
        for (id, sov) in &self.sovs {
            if let Some(m) = &sov.monitor {
                for (s, ms) in m.dwell_ms(end) {
                    *dwell.entry(s).or_default() += ms;
                }
                transitions.insert(*id, m.transitions().to_vec());
            }
        }
        for s in [LinkState::Cv2xOk, LinkState::Fallback5g, LinkState::SafeStop] {
            r.push_u64(&format!("link_dwell_{}_ms", s.name()), dwell.get(&s).copied().unwrap_or(0), "ms");
        }
        let first_entry = |to: LinkState| {
            transitions.values().flatten().filter(|x: &&LinkTransition| x.to == to).map(|x| x.time.ms()).min()
        };
        r.push("fallback_entered_ms", first_entry(LinkState::Fallback5g).map_or(Value::Null, Value::from), "ms");
        r.push("safe_stop_entered_ms", first_entry(LinkState::SafeStop).map_or(Value::Null, Value::from), "ms");
        r.push_u64("safety_stops", self.sovs.values().filter(|s| s.safe_stop).count() as u64, "");
        let final_speeds: BTreeMap<AgentId, f64> = self
            .sovs
            .keys()
            .filter_map(|id| self.world.agent(*id).map(|a| (*id, a.speed)))
            .collect();
        r.push_f64("final_speed_max_mps", final_speeds.values().copied().fold(0.0, f64::max), "m/s");

        r.push_u64("plan_handoffs", self.sovs.values().map(|s| s.follower.handoffs as u64).sum(), "");
        r.push_u64("plan_discontinuities", self.sovs.values().map(|s| s.follower.discontinuities as u64).sum(), "");
        r.push_u64("trajectory_plans_issued", tally.plans_issued, "");
        r.push_u64("route_plans_issued", tally.route_plans, "");
        r.push_u64("route_plans_applied", tally.routes_applied, "");
        r.push_u64("fusion_conflicts", tally.conflicts, "");

        let inbox = self.itcs.inbox();
        r.push_u64("itcs_rejected_frames", inbox.rejected, "");
        r.push_u64("itcs_frames", inbox.accepted_frames, "");
        r.push_f64("itcs_ingest_bytes_per_s", inbox.bytes as f64 / secs, "B/s");
        r.push_u64("itcs_tracks", self.itcs.map().len() as u64, "");

        let sor_rates: Vec<f64> = sc
            .sors
            .iter()
            .map(|s| tally.sor_bytes.get(&s.node.id).copied().unwrap_or(0) as f64 / secs)
            .collect();
        r.push_f64("sor_output_bytes_per_s", mean(sor_rates.iter().copied()), "B/s");
        r.push_f64("sor_output_bytes_per_s_max", sor_rates.iter().copied().fold(0.0, f64::max), "B/s");
        let link_max = |ch: ChannelKind| {
            tally.link_bytes.iter().filter(|(k, _)| k.0 == ch).map(|(_, b)| *b).max().unwrap_or(0)
        };
        r.push_u64("cv2x_link_bytes_per_s_max", link_max(ChannelKind::Cv2x), "B/s");
        r.push_u64("fiveg_link_bytes_per_s_max", link_max(ChannelKind::FiveG), "B/s");

        r.push("partition_scheme", serde_json::to_value(cfg.partition.scheme).expect("enum"), "");
        r.push_u64("partition_units", cfg.partition.units as u64, "");
        r.push_u64("cloud_cycles", tally.cloud_cycles, "");
        r.push_u64("partition_errors", tally.partition_errors, "");
        r.push_f64(
            "partition_makespan_mean_ms",
            if tally.cloud_cycles > 0 { tally.makespan_sum_ms / tally.cloud_cycles as f64 } else { 0.0 },
            "ms",
        );
        r.push_f64("partition_makespan_max_ms", tally.makespan_max_ms, "ms");
        r.push_f64(
            "partition_throughput_objects_per_s",
            if tally.makespan_sum_ms > 0.0 { tally.partition_objects as f64 / (tally.makespan_sum_ms / 1000.0) } else { 0.0 },
            "1/s",
        );

        let power: f64 = sc.sors.iter().map(|s| s.node.power_w).sum();
        r.push_f64("sor_power_w", power, "W");
        let corridor_km: f64 = sc.corridors.iter().map(|c| c.length()).sum::<f64>() / 1000.0;
        if let Ok(d) = deployment_cost(corridor_km, 0.0, 0.0) {
            r.push_f64("corridor_power_budget_w", d.power_w, "W");
        }
        r.push_f64("cost_efficiency_ratio", cfg.cost.efficiency_ratio(), "x");
        r.push_f64("cost_per_km_ratio", cfg.cost.cost_per_km_ratio(), "x");

        RunOutcome {
            report: r,
            transitions,
            disengagements: tally.disengagements,
            first_detections: tally.firsts,
            final_speeds,
            fusion_log: tally.log,
        }
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[u64], p: u32) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (p as usize * sorted.len()).div_ceil(100).max(1);
    sorted[rank - 1] as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let xs: Vec<u64> = (1..=100).collect();
        assert_eq!(percentile(&xs, 50), 50.0);
        assert_eq!(percentile(&xs, 95), 95.0);
        assert_eq!(percentile(&[7], 99), 7.0);
        assert_eq!(percentile(&[], 50), 0.0);
        assert_eq!(percentile(&[1, 2, 3], 50), 2.0);
    }

    #[test]
    fn mean_of_nothing_is_zero() {
        assert_eq!(mean(std::iter::empty()), 0.0);
        assert_eq!(mean([1.0, 2.0].into_iter()), 1.5);
    }
}
