//! Scenario files: strict TOML parsing, defaults and validation into a
//! ready-to-run [`Scenario`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::costmodel::CostParams;
use crate::itcs::{ComputeUnit, ItcsParams, PartitionPlan, Scheme, ServiceTimes};
use crate::network::{ChannelKind, ChannelSpec, Outage};
use crate::simcore::SimTime;
use crate::sor::{plan_placement, SorNode};
use crate::vehicle::{FailoverParams, FusionParams, Mode, SovNode, DEFAULT_REACTIVE_RANGE_M};
use crate::world::road::DEFAULT_LANE_CAPACITY_VPH;
use crate::world::{
    Agent, AgentClass, AgentId, Corridor, CrossingTrigger, EdgeId, EdgeSpec, Motion, Node, NodeId, Occluder, RoadGraph,
    Vec2,
};

/// One violated constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub field: String,
    pub constraint: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.constraint)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario:\n{}", .0.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Issue>),
    #[error("sweep: {0}")]
    Sweep(String),
}

fn default_world_step() -> u64 {
    10
}

fn default_capacity() -> f64 {
    DEFAULT_LANE_CAPACITY_VPH
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub id: u32,
    pub from: u32,
    pub to: u32,
    pub free_speed_mps: f64,
    #[serde(default = "default_capacity")]
    pub capacity_vph: f64,
}

/// Named edge sequence along which roadside units are placed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorridorConfig {
    pub name: String,
    pub edges: Vec<u32>,
    /// Place units automatically to cover the whole corridor.
    #[serde(default = "yes")]
    pub auto_sors: bool,
}

/// Optional per-unit settings; unset fields take the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SorSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage_each_direction_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub update_rate_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub processing_latency_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_sigma_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lateral_reach_m: Option<f64>,
}

impl SorSettings {
    fn apply(&self, n: &mut SorNode) {
        if let Some(v) = self.coverage_each_direction_m {
            n.coverage_each_direction_m = v;
        }
        if let Some(v) = self.update_rate_hz {
            n.update_rate_hz = v;
        }
        if let Some(v) = self.processing_latency_ms {
            n.processing_latency_ms = v;
        }
        if let Some(v) = self.power_w {
            n.power_w = v;
        }
        if let Some(v) = self.noise_sigma_m {
            n.noise_sigma_m = v;
        }
        if let Some(v) = self.lateral_reach_m {
            n.lateral_reach_m = v;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SorConfig {
    pub id: u32,
    pub corridor: String,
    pub s_m: f64,
    #[serde(default)]
    pub settings: SorSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossingConfig {
    pub to: [f64; 2],
    pub walk_speed_mps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at_ms: Option<u64>,
    /// Vehicle whose approach triggers the crossing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vehicle: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub within_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub id: u64,
    pub class: AgentClass,
    #[serde(default)]
    pub controlled: bool,
    /// Edge ids; mutually exclusive with `position`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 2]>,
    #[serde(default)]
    pub heading: f64,
    #[serde(default)]
    pub speed_mps: f64,
    #[serde(default)]
    pub depart_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crossing: Option<CrossingConfig>,
    /// Per-vehicle sensing overrides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_range_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_noise_sigma_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccluderConfig {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

/// Channel overrides on top of the built-in defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_latency_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter_min_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter_max_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_bps: Option<u64>,
}

impl ChannelConfig {
    fn build(&self, mut spec: ChannelSpec) -> ChannelSpec {
        if let Some(v) = self.base_latency_ms {
            spec.base_latency_ms = v;
        }
        if let Some(v) = self.jitter_min_ms {
            spec.jitter_min_ms = v;
        }
        if let Some(v) = self.jitter_max_ms {
            spec.jitter_max_ms = v;
        }
        if let Some(v) = self.loss_prob {
            spec.loss_prob = v;
        }
        if let Some(v) = self.coverage_m {
            spec.coverage_m = v;
        }
        if let Some(v) = self.bandwidth_bps {
            spec.bandwidth_bps = v;
        }
        spec
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelsConfig {
    #[serde(default)]
    pub cv2x: ChannelConfig,
    #[serde(default)]
    pub fiveg: ChannelConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultConfig {
    pub channel: ChannelKind,
    pub from_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SovConfig {
    pub local_range_m: f64,
    pub local_noise_sigma_m: f64,
    /// On-board range once proactive perception is offloaded.
    pub reactive_range_m: f64,
}

impl Default for SovConfig {
    fn default() -> Self {
        let d = SovNode::new(AgentId(0));
        Self {
            local_range_m: d.local_range_m,
            local_noise_sigma_m: d.noise_sigma_m,
            reactive_range_m: DEFAULT_REACTIVE_RANGE_M,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlParams {
    /// Brake for any perceived object closer than this in time.
    pub hazard_ttc_s: f64,
    pub brake_decel_mps2: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self { hazard_ttc_s: 3.0, brake_decel_mps2: 6.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionConfig {
    pub scheme: Scheme,
    pub units: u32,
    pub service_us: ServiceTimes,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self { scheme: Scheme::Vertical, units: 4, service_us: ServiceTimes::default() }
    }
}

impl PartitionConfig {
    pub fn plan(&self, areas: &BTreeSet<u32>) -> Result<PartitionPlan, crate::itcs::PartitionError> {
        let units = (0..self.units).map(|id| ComputeUnit { id, service: self.service_us }).collect();
        match self.scheme {
            Scheme::Vertical => PartitionPlan::vertical(units, areas),
            Scheme::Horizontal => PartitionPlan::horizontal(units),
        }
    }
}

/// Raw file contents, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub seed: u64,
    pub duration_ms: u64,
    pub mode: Mode,
    #[serde(default = "default_world_step")]
    pub world_step_ms: u64,
    /// Keep a per-tick fusion log in the run outcome.
    #[serde(default)]
    pub fusion_log: bool,
    pub nodes: Vec<NodeConfig>,
    pub edges: Vec<EdgeConfig>,
    #[serde(default)]
    pub corridors: Vec<CorridorConfig>,
    #[serde(default)]
    pub sor_defaults: SorSettings,
    #[serde(default)]
    pub sors: Vec<SorConfig>,
    #[serde(default)]
    pub agents: Vec<AgentConfig>,
    #[serde(default)]
    pub occluders: Vec<OccluderConfig>,
    #[serde(default)]
    pub channels: ChannelsConfig,
    #[serde(default)]
    pub faults: Vec<FaultConfig>,
    #[serde(default)]
    pub sov: SovConfig,
    #[serde(default)]
    pub fusion: FusionParams,
    #[serde(default)]
    pub failover: FailoverParams,
    #[serde(default)]
    pub control: ControlParams,
    #[serde(default)]
    pub itcs: ItcsParams,
    #[serde(default)]
    pub partition: PartitionConfig,
    #[serde(default)]
    pub cost: CostParams,
}

/// A roadside unit together with the corridor it measures along.
#[derive(Debug, Clone)]
pub struct PlacedSor {
    pub node: SorNode,
    pub corridor: usize,
}

/// Validated scenario with every object built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub graph: RoadGraph,
    pub corridors: Vec<Corridor>,
    pub sors: Vec<PlacedSor>,
    pub agents: Vec<Agent>,
    pub sovs: Vec<SovNode>,
    pub occluders: Vec<Occluder>,
    pub cv2x: ChannelSpec,
    pub fiveg: ChannelSpec,
    pub cv2x_outages: Vec<Outage>,
    pub fiveg_outages: Vec<Outage>,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let p = path.as_ref();
    let text = std::fs::read_to_string(p).map_err(|source| ScenarioError::Io { path: p.display().to_string(), source })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    Scenario::build(cfg)
}

struct Issues(Vec<Issue>);

impl Issues {
    fn push(&mut self, field: impl Into<String>, constraint: impl Into<String>) {
        self.0.push(Issue { field: field.into(), constraint: constraint.into() });
    }
}

fn v2(p: [f64; 2]) -> Vec2 {
    Vec2::new(p[0], p[1])
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> Result<Self, ScenarioError> {
        let mut iss = Issues(Vec::new());
        let c = &config;
        if c.duration_ms == 0 {
            iss.push("duration_ms", "must be > 0");
        }
        if c.world_step_ms == 0 {
            iss.push("world_step_ms", "must be > 0");
        }

        let mut ids = BTreeSet::new();
        for n in &c.nodes {
            if !ids.insert(n.id) {
                iss.push(format!("nodes[id={}]", n.id), "duplicate id");
            }
        }
        let mut eids = BTreeSet::new();
        for e in &c.edges {
            if !eids.insert(e.id) {
                iss.push(format!("edges[id={}]", e.id), "duplicate id");
            }
            if !ids.contains(&e.from) || !ids.contains(&e.to) {
                iss.push(format!("edges[id={}]", e.id), "from/to must reference existing nodes");
            }
            if !(e.free_speed_mps > 0.0) {
                iss.push(format!("edges[id={}].free_speed_mps", e.id), "must be > 0");
            }
            if !(e.capacity_vph > 0.0) {
                iss.push(format!("edges[id={}].capacity_vph", e.id), "must be > 0");
            }
        }
        if !iss.0.is_empty() {
            return Err(ScenarioError::Invalid(iss.0));
        }
        let graph = RoadGraph::new(
            c.nodes.iter().map(|n| Node { id: NodeId(n.id), pos: Vec2::new(n.x, n.y) }).collect(),
            c.edges
                .iter()
                .map(|e| EdgeSpec {
                    id: EdgeId(e.id),
                    from: NodeId(e.from),
                    to: NodeId(e.to),
                    free_speed_mps: e.free_speed_mps,
                    capacity_vph: e.capacity_vph,
                })
                .collect(),
        )
        .map_err(|e| ScenarioError::Invalid(vec![Issue { field: "edges".into(), constraint: e.to_string() }]))?;

        let route_of = |ids: &[u32]| -> Vec<EdgeId> { ids.iter().map(|e| EdgeId(*e)).collect() };
        let mut corridors = Vec::new();
        let mut corridor_idx: BTreeMap<String, usize> = BTreeMap::new();
        for cc in &c.corridors {
            let field = format!("corridors[{}]", cc.name);
            if corridor_idx.contains_key(&cc.name) {
                iss.push(&field, "duplicate name");
                continue;
            }
            match Corridor::from_route(&graph, &route_of(&cc.edges)) {
                Ok(cor) => {
                    corridor_idx.insert(cc.name.clone(), corridors.len());
                    corridors.push(cor);
                }
                Err(e) => iss.push(format!("{field}.edges"), e.to_string()),
            }
        }

        let mut sors = Vec::new();
        let mut sor_ids = BTreeSet::new();
        let mut next_auto = 1u32;
        let explicit: BTreeSet<u32> = c.sors.iter().map(|s| s.id).collect();
        for (cc, idx) in c.corridors.iter().filter_map(|cc| corridor_idx.get(&cc.name).map(|i| (cc, *i))) {
            if !cc.auto_sors {
                continue;
            }
            let cor = &corridors[idx];
            let mut proto = SorNode::at(0, cor, 0.0);
            c.sor_defaults.apply(&mut proto);
            match plan_placement(cor.length(), proto.coverage_each_direction_m) {
                Ok(positions) => {
                    for s in positions {
                        while explicit.contains(&next_auto) {
                            next_auto += 1;
                        }
                        let mut n = SorNode::at(next_auto, cor, s);
                        c.sor_defaults.apply(&mut n);
                        sor_ids.insert(n.id);
                        sors.push(PlacedSor { node: n, corridor: idx });
                        next_auto += 1;
                    }
                }
                Err(e) => iss.push(format!("corridors[{}]", cc.name), e.to_string()),
            }
        }
        for sc in &c.sors {
            let field = format!("sors[id={}]", sc.id);
            if !sor_ids.insert(sc.id) {
                iss.push(&field, "duplicate id");
            }
            let Some(&idx) = corridor_idx.get(&sc.corridor) else {
                iss.push(format!("{field}.corridor"), format!("unknown corridor {:?}", sc.corridor));
                continue;
            };
            if !(0.0..=corridors[idx].length()).contains(&sc.s_m) {
                iss.push(format!("{field}.s_m"), format!("must be within [0, {}]", corridors[idx].length()));
            }
            let mut n = SorNode::at(sc.id, &corridors[idx], sc.s_m);
            c.sor_defaults.apply(&mut n);
            sc.settings.apply(&mut n);
            sors.push(PlacedSor { node: n, corridor: idx });
        }
        for s in &sors {
            if let Err(e) = s.node.validate() {
                iss.push(format!("sors[id={}]", s.node.id), e.to_string());
            }
        }
        sors.sort_by_key(|s| s.node.id);

        let mut agents = Vec::new();
        let mut sovs = Vec::new();
        let mut agent_ids = BTreeSet::new();
        for a in &c.agents {
            if !agent_ids.insert(a.id) {
                iss.push(format!("agents[id={}]", a.id), "duplicate id");
            }
        }
        for a in &c.agents {
            let field = format!("agents[id={}]", a.id);
            if !(a.speed_mps >= 0.0) {
                iss.push(format!("{field}.speed_mps"), "must be >= 0");
            }
            let built = match (&a.route, a.position) {
                (Some(r), None) => {
                    if a.crossing.is_some() {
                        iss.push(format!("{field}.crossing"), "only for agents given a position");
                    }
                    let route = route_of(r);
                    match Agent::on_route(&graph, AgentId(a.id), a.class, route.clone(), a.speed_mps) {
                        Ok(ag) => {
                            let off = a.offset_m.unwrap_or(0.0);
                            let first = graph.edge(route[0]).map(|e| e.length_m).unwrap_or(0.0);
                            if !(0.0..first).contains(&off) {
                                iss.push(format!("{field}.offset_m"), format!("must be within [0, {first})"));
                            }
                            Some(ag.at_offset(&graph, off))
                        }
                        Err(e) => {
                            iss.push(format!("{field}.route"), e.to_string());
                            None
                        }
                    }
                }
                (None, Some(p)) => {
                    if a.controlled {
                        iss.push(format!("{field}.controlled"), "controlled agents need a route");
                    }
                    let motion = match &a.crossing {
                        None => Some(Motion::Parked),
                        Some(cr) => {
                            let trigger = match (cr.at_ms, cr.vehicle, cr.within_m, cr.eta_s) {
                                (Some(t), None, None, None) => Some(CrossingTrigger::AtTime(SimTime(t))),
                                (None, Some(v), Some(d), None) => {
                                    Some(CrossingTrigger::VehicleWithin { vehicle: AgentId(v), distance_m: d })
                                }
                                (None, Some(v), None, Some(s)) => {
                                    Some(CrossingTrigger::VehicleEta { vehicle: AgentId(v), seconds: s })
                                }
                                _ => {
                                    iss.push(
                                        format!("{field}.crossing"),
                                        "give exactly one trigger: at_ms, or vehicle with within_m, or vehicle with eta_s",
                                    );
                                    None
                                }
                            };
                            if let Some(v) = cr.vehicle {
                                if !agent_ids.contains(&v) {
                                    iss.push(format!("{field}.crossing.vehicle"), format!("unknown agent {v}"));
                                }
                            }
                            if !(cr.walk_speed_mps > 0.0) {
                                iss.push(format!("{field}.crossing.walk_speed_mps"), "must be > 0");
                            }
                            trigger.map(|trigger| Motion::Crossing {
                                target: v2(cr.to),
                                walk_speed: cr.walk_speed_mps,
                                trigger,
                                started: false,
                            })
                        }
                    };
                    motion.map(|m| Agent::new(AgentId(a.id), a.class, v2(p), a.heading, 0.0, m))
                }
                _ => {
                    iss.push(&field, "give exactly one of route or position");
                    None
                }
            };
            let Some(ag) = built else { continue };
            let ag = ag.controlled(a.controlled).departing_at(SimTime(a.depart_ms));
            if a.controlled {
                let sov = SovNode {
                    agent: ag.id,
                    local_range_m: a.local_range_m.unwrap_or(c.sov.local_range_m),
                    noise_sigma_m: a.local_noise_sigma_m.unwrap_or(c.sov.local_noise_sigma_m),
                    ..SovNode::new(ag.id)
                };
                if let Err(e) = sov.validate() {
                    iss.push(&field, e.to_string());
                }
                sovs.push(sov);
            }
            agents.push(ag);
        }

        let mut occluders = Vec::new();
        for (i, o) in c.occluders.iter().enumerate() {
            match Occluder::new(v2(o.a), v2(o.b)) {
                Ok(occ) => occluders.push(occ),
                Err(e) => iss.push(format!("occluders[{i}]"), e.to_string()),
            }
        }

        let cv2x = c.channels.cv2x.build(ChannelSpec::cv2x_default());
        let fiveg = c.channels.fiveg.build(ChannelSpec::fiveg_default());
        for (name, spec) in [("channels.cv2x", &cv2x), ("channels.fiveg", &fiveg)] {
            if let Err(errs) = spec.validate() {
                for e in errs {
                    iss.push(name, e.to_string());
                }
            }
        }
        let mut cv2x_outages = Vec::new();
        let mut fiveg_outages = Vec::new();
        for (i, f) in c.faults.iter().enumerate() {
            if f.to_ms.is_some_and(|t| t <= f.from_ms) {
                iss.push(format!("faults[{i}]"), "to_ms must be greater than from_ms");
            }
            let o = Outage { from: SimTime(f.from_ms), until: f.to_ms.map(SimTime) };
            match f.channel {
                ChannelKind::Cv2x => cv2x_outages.push(o),
                ChannelKind::FiveG => fiveg_outages.push(o),
            }
        }

        if let Err(e) = c.fusion.validate() {
            iss.push("fusion", e);
        }
        if let Err(e) = c.itcs.validate() {
            iss.push("itcs", e);
        }
        if !(c.sov.reactive_range_m > 0.0) {
            iss.push("sov.reactive_range_m", "must be > 0");
        }
        if c.failover.silent_ticks_to_fallback == 0 || c.failover.silent_ticks_to_stop == 0 {
            iss.push("failover", "silent tick thresholds must be >= 1");
        }
        if !(c.failover.stop_decel_mps2 > 0.0) {
            iss.push("failover.stop_decel_mps2", "must be > 0");
        }
        if !(c.control.hazard_ttc_s >= 0.0) || !(c.control.brake_decel_mps2 > 0.0) {
            iss.push("control", "hazard_ttc_s must be >= 0 and brake_decel_mps2 > 0");
        }
        let min_units = match c.partition.scheme {
            Scheme::Vertical => 1,
            Scheme::Horizontal => 3,
        };
        if c.partition.units < min_units {
            iss.push("partition.units", format!("must be >= {min_units} for the {:?} scheme", c.partition.scheme));
        }
        if let Err(errs) = c.cost.validate() {
            for e in errs {
                iss.push("cost", e.to_string());
            }
        }

        if !iss.0.is_empty() {
            return Err(ScenarioError::Invalid(iss.0));
        }
        Ok(Self {
            config,
            graph,
            corridors,
            sors,
            agents,
            sovs,
            occluders,
            cv2x,
            fiveg,
            cv2x_outages,
            fiveg_outages,
        })
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.config.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.config.seed = seed;
        self
    }

    /// Hash of everything that defines the physical setting: roads,
    /// corridors, roadside units, agents and occluders. Mode, seed, channels
    /// and tuning parameters are excluded so runs of one setting compare.
    pub fn topology_id(&self) -> String {
        #[derive(Serialize)]
        struct Topology<'a> {
            nodes: &'a [NodeConfig],
            edges: &'a [EdgeConfig],
            corridors: &'a [CorridorConfig],
            sors: Vec<(u32, f64, f64, f64)>,
            agents: &'a [AgentConfig],
            occluders: &'a [OccluderConfig],
        }
        let t = Topology {
            nodes: &self.config.nodes,
            edges: &self.config.edges,
            corridors: &self.config.corridors,
            sors: self
                .sors
                .iter()
                .map(|s| (s.node.id, s.node.position.x, s.node.position.y, s.node.coverage_each_direction_m))
                .collect(),
            agents: &self.config.agents,
            occluders: &self.config.occluders,
        };
        let bytes = serde_json::to_vec(&t).expect("topology serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
