use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::Serialize;
use thiserror::Error;

use super::fusion::GlobalPerceptionMap;
use super::plans::RoutePlan;
use crate::simcore::SimTime;
use crate::sor::ObjectType;
use crate::world::{AgentId, EdgeId, NodeId, RoadGraph};

/// Max distance from an edge centreline for a track to count on that edge.
const LANE_SNAP_M: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaneStats {
    pub edge: EdgeId,
    pub density_veh_per_km: f64,
    pub flow_veh_per_h: f64,
    pub mean_speed_mps: f64,
}

/// Per-edge density, mean speed and flow from the vehicle tracks in `map`.
/// Empty edges report the free-flow speed.
pub fn monitor_lanes(map: &GlobalPerceptionMap, graph: &RoadGraph) -> BTreeMap<EdgeId, LaneStats> {
    let mut on_edge: BTreeMap<EdgeId, Vec<f64>> = BTreeMap::new();
    for tr in map.tracks.values().filter(|t| t.object.object_type == ObjectType::Vehicle) {
        if let Some((e, _)) = graph.locate(tr.object.location, tr.object.heading, LANE_SNAP_M) {
            on_edge.entry(e).or_default().push(tr.object.speed);
        }
    }
    graph
        .edges()
        .map(|e| {
            let speeds = on_edge.get(&e.id).map(Vec::as_slice).unwrap_or(&[]);
            let density = speeds.len() as f64 / e.length_m * 1000.0;
            let mean_speed = if speeds.is_empty() {
                e.free_speed_mps
            } else {
                speeds.iter().sum::<f64>() / speeds.len() as f64
            };
            let stats = LaneStats {
                edge: e.id,
                density_veh_per_km: density,
                flow_veh_per_h: density * mean_speed * 3.6,
                mean_speed_mps: mean_speed,
            };
            (e.id, stats)
        })
        .collect()
}

/// Congestion-aware travel time of an edge at `density_per_m`.
pub fn route_weight(graph: &RoadGraph, edge: EdgeId, density_per_m: f64) -> f64 {
    let e = graph.edge(edge).expect("edge exists");
    e.length_m / (e.free_speed_mps * e.congestion_factor(density_per_m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    /// Not yet departed: route starts at this node.
    Node(NodeId),
    /// Already driving this edge; the plan keeps it as the first edge.
    OnEdge(EdgeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouteRequest {
    pub vehicle: AgentId,
    pub origin: Origin,
    pub destination: NodeId,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoutingError {
    #[error("vehicle {vehicle}: no path to node {destination}")]
    Unreachable { vehicle: u64, destination: u32 },
    #[error("vehicle {vehicle}: unknown edge or node in request")]
    UnknownElement { vehicle: u64 },
}

#[derive(PartialEq)]
struct QItem {
    cost: f64,
    node: NodeId,
}

impl Eq for QItem {}

impl Ord for QItem {
    fn cmp(&self, o: &Self) -> Ordering {
        // min-heap on cost, then node id
        o.cost.total_cmp(&self.cost).then(o.node.cmp(&self.node))
    }
}

impl PartialOrd for QItem {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

fn shortest_path(
    graph: &RoadGraph,
    from: NodeId,
    to: NodeId,
    density: &BTreeMap<EdgeId, f64>,
) -> Option<Vec<EdgeId>> {
    let mut dist: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut via: BTreeMap<NodeId, EdgeId> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(from, 0.0);
    heap.push(QItem { cost: 0.0, node: from });
    while let Some(QItem { cost, node }) = heap.pop() {
        if node == to {
            break;
        }
        if cost > dist[&node] {
            continue;
        }
        for &eid in graph.outgoing(node) {
            let e = graph.edge(eid).expect("outgoing edges exist");
            let c = cost + route_weight(graph, eid, density.get(&eid).copied().unwrap_or(0.0));
            if dist.get(&e.to).is_none_or(|d| c < *d) {
                dist.insert(e.to, c);
                via.insert(e.to, eid);
                heap.push(QItem { cost: c, node: e.to });
            }
        }
    }
    if !dist.contains_key(&to) {
        return None;
    }
    let mut path = Vec::new();
    let mut n = to;
    while n != from {
        let eid = via[&n];
        path.push(eid);
        n = graph.edge(eid).expect("edge exists").from;
    }
    path.reverse();
    Some(path)
}

/// Greedy load-aware routing. Vehicles are served in id order; each chosen
/// route adds one vehicle's worth of density to its edges before the next
/// vehicle is planned.
pub fn plan_routes(
    graph: &RoadGraph,
    requests: &[RouteRequest],
    stats: &BTreeMap<EdgeId, LaneStats>,
    now: SimTime,
) -> Vec<(AgentId, Result<RoutePlan, RoutingError>)> {
    let mut density: BTreeMap<EdgeId, f64> =
        stats.iter().map(|(e, s)| (*e, s.density_veh_per_km / 1000.0)).collect();
    let mut reqs = requests.to_vec();
    reqs.sort_by_key(|r| r.vehicle);
    let mut out = Vec::with_capacity(reqs.len());
    for r in reqs {
        let unknown = || RoutingError::UnknownElement { vehicle: r.vehicle.0 };
        let (prefix, start) = match r.origin {
            Origin::Node(n) => match graph.node(n) {
                Some(_) => (Vec::new(), n),
                None => {
                    out.push((r.vehicle, Err(unknown())));
                    continue;
                }
            },
            Origin::OnEdge(e) => match graph.edge(e) {
                Some(edge) => (vec![e], edge.to),
                None => {
                    out.push((r.vehicle, Err(unknown())));
                    continue;
                }
            },
        };
        if graph.node(r.destination).is_none() {
            out.push((r.vehicle, Err(unknown())));
            continue;
        }
        let Some(tail) = shortest_path(graph, start, r.destination, &density) else {
            out.push((r.vehicle, Err(RoutingError::Unreachable { vehicle: r.vehicle.0, destination: r.destination.0 })));
            continue;
        };
        let mut edges = prefix;
        edges.extend(tail);
        if edges.is_empty() {
            out.push((r.vehicle, Err(RoutingError::Unreachable { vehicle: r.vehicle.0, destination: r.destination.0 })));
            continue;
        }
        for e in &edges {
            *density.entry(*e).or_insert(0.0) += 1.0 / graph.edge(*e).expect("edge exists").length_m;
        }
        out.push((r.vehicle, Ok(RoutePlan { vehicle: r.vehicle, edges, issued_at: now })));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::itcs::Track;
    use crate::sor::SemanticObject;
    use crate::world::road::DEFAULT_LANE_CAPACITY_VPH;
    use crate::world::{AgentClass, EdgeSpec, Footprint, Node, Vec2};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn node(id: u32, x: f64, y: f64) -> Node {
        Node { id: NodeId(id), pos: Vec2::new(x, y) }
    }

    fn edge(id: u32, from: u32, to: u32) -> EdgeSpec {
        EdgeSpec {
            id: EdgeId(id),
            from: NodeId(from),
            to: NodeId(to),
            free_speed_mps: 15.0,
            capacity_vph: DEFAULT_LANE_CAPACITY_VPH,
        }
    }

    /// Two equal-length routes from 0 to 3 via 1 or 2.
    fn diamond() -> RoadGraph {
        RoadGraph::new(
            vec![node(0, 0.0, 0.0), node(1, 300.0, 400.0), node(2, 300.0, -400.0), node(3, 600.0, 0.0)],
            vec![edge(0, 0, 1), edge(1, 1, 3), edge(2, 0, 2), edge(3, 2, 3)],
        )
        .unwrap()
    }

    fn vehicle_track(id: u64, x: f64, speed: f64) -> Track {
        Track {
            id,
            object: SemanticObject {
                object_id: id,
                timestamp: SimTime(0),
                object_type: ObjectType::Vehicle,
                shape: Footprint::default_for(AgentClass::Vehicle),
                location: Vec2::new(x, 0.0),
                speed,
                heading: 0.0,
            },
            sources: BTreeSet::new(),
            last_update: SimTime(0),
        }
    }

    fn line(len: f64) -> RoadGraph {
        RoadGraph::new(vec![node(0, 0.0, 0.0), node(1, len, 0.0)], vec![edge(0, 0, 1)]).unwrap()
    }

    #[test]
    fn density_and_flow() {
        let g = line(500.0);
        let mut map = GlobalPerceptionMap::default();
        for i in 0..5 {
            map.tracks.insert(i, vehicle_track(i, 50.0 + 90.0 * i as f64, 10.0));
        }
        let s = monitor_lanes(&map, &g)[&EdgeId(0)];
        assert!((s.density_veh_per_km - 10.0).abs() < 1e-12);
        assert!((s.flow_veh_per_h - 360.0).abs() < 1e-9);
        let empty = monitor_lanes(&GlobalPerceptionMap::default(), &g)[&EdgeId(0)];
        assert_eq!(empty.density_veh_per_km, 0.0);
        assert_eq!(empty.mean_speed_mps, 15.0);
        assert_eq!(empty.flow_veh_per_h, 0.0);
    }

    fn requests(n: u64, dest: u32) -> Vec<RouteRequest> {
        (0..n).map(|i| RouteRequest { vehicle: AgentId(i), origin: Origin::Node(NodeId(0)), destination: NodeId(dest) }).collect()
    }

    #[test]
    fn equal_routes_split_evenly() {
        let g = diamond();
        let plans = plan_routes(&g, &requests(10, 3), &BTreeMap::new(), SimTime(0));
        let via_top = plans.iter().filter(|(_, p)| p.as_ref().unwrap().edges[0] == EdgeId(0)).count();
        assert_eq!(via_top, 5);
        // alternating
        assert_eq!(plans[0].1.as_ref().unwrap().edges, vec![EdgeId(0), EdgeId(1)]);
        assert_eq!(plans[1].1.as_ref().unwrap().edges, vec![EdgeId(2), EdgeId(3)]);
    }

    #[test]
    fn congested_route_is_avoided_when_alternative_is_cheaper() {
        let g = diamond();
        let jam = g.edge(EdgeId(0)).unwrap().jam_density_per_m();
        let mut stats = BTreeMap::new();
        stats.insert(
            EdgeId(0),
            LaneStats { edge: EdgeId(0), density_veh_per_km: 0.9 * jam * 1000.0, flow_veh_per_h: 0.0, mean_speed_mps: 1.5 },
        );
        assert!(route_weight(&g, EdgeId(0), 0.9 * jam) > route_weight(&g, EdgeId(2), 0.0));
        let plans = plan_routes(&g, &requests(1, 3), &stats, SimTime(0));
        assert_eq!(plans[0].1.as_ref().unwrap().edges, vec![EdgeId(2), EdgeId(3)]);
    }

    #[test]
    fn single_route_takes_everyone() {
        let g = line(1000.0);
        let plans = plan_routes(&g, &requests(30, 1), &BTreeMap::new(), SimTime(0));
        assert!(plans.iter().all(|(_, p)| p.as_ref().unwrap().edges == vec![EdgeId(0)]));
    }

    #[test]
    fn unreachable_destination_only_fails_that_vehicle() {
        let g = diamond();
        let mut reqs = requests(2, 3);
        reqs[0].destination = NodeId(0);
        reqs[0].origin = Origin::Node(NodeId(3));
        let plans = plan_routes(&g, &reqs, &BTreeMap::new(), SimTime(0));
        assert!(matches!(plans[0].1, Err(RoutingError::Unreachable { .. })));
        assert!(plans[1].1.is_ok());
    }

    #[test]
    fn on_edge_origin_keeps_current_edge() {
        let g = diamond();
        let reqs = [RouteRequest { vehicle: AgentId(1), origin: Origin::OnEdge(EdgeId(2)), destination: NodeId(3) }];
        let plans = plan_routes(&g, &reqs, &BTreeMap::new(), SimTime(0));
        let p = plans[0].1.as_ref().unwrap();
        assert_eq!(p.edges, vec![EdgeId(2), EdgeId(3)]);
        assert!(p.is_valid(&g));
    }

    /// Every simple path from `from` to `to`.
    fn all_paths(g: &RoadGraph, from: NodeId, to: NodeId) -> Vec<Vec<EdgeId>> {
        fn go(g: &RoadGraph, n: NodeId, to: NodeId, seen: &mut Vec<NodeId>, cur: &mut Vec<EdgeId>, out: &mut Vec<Vec<EdgeId>>) {
            if n == to {
                out.push(cur.clone());
                return;
            }
            for &e in g.outgoing(n) {
                let next = g.edge(e).unwrap().to;
                if seen.contains(&next) {
                    continue;
                }
                seen.push(next);
                cur.push(e);
                go(g, next, to, seen, cur, out);
                cur.pop();
                seen.pop();
            }
        }
        let mut out = Vec::new();
        go(g, from, to, &mut vec![from], &mut Vec::new(), &mut out);
        out
    }

    proptest! {
        #[test]
        fn chosen_routes_stay_within_congestion_bound(
            pts in proptest::collection::vec((0.0..1000.0f64, 0.0..1000.0f64), 5),
            links in proptest::collection::vec((0u32..5, 0u32..5), 4..12),
            n in 1u64..15,
        ) {
            let nodes: Vec<Node> = pts.iter().enumerate().map(|(i, (x, y))| node(i as u32, *x, *y)).collect();
            let mut specs = Vec::new();
            for (a, b) in links {
                if a != b && nodes[a as usize].pos.distance(nodes[b as usize].pos) > 1.0 {
                    specs.push(edge(specs.len() as u32, a, b));
                }
            }
            let Ok(g) = RoadGraph::new(nodes, specs) else { return Ok(()) };
            let paths = all_paths(&g, NodeId(0), NodeId(4));
            let free_cost = |p: &[EdgeId]| p.iter().map(|e| route_weight(&g, *e, 0.0)).sum::<f64>();
            let plans = plan_routes(&g, &requests(n, 4), &BTreeMap::new(), SimTime(0));
            for (_, p) in plans {
                if paths.is_empty() {
                    prop_assert!(p.is_err());
                    continue;
                }
                let best = paths.iter().map(|p| free_cost(p)).fold(f64::INFINITY, f64::min);
                let p = p.unwrap();
                prop_assert!(p.is_valid(&g));
                prop_assert!(free_cost(&p.edges) <= best / crate::world::road::MIN_CONGESTION_FACTOR * (1.0 + 1e-9));
            }
        }
    }
}
