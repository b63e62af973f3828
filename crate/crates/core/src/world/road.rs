use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::geometry::{project_on_segment, Vec2};
use super::WorldError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u32);

/// Lane capacity used when a scenario does not give one (vehicles/hour/lane).
pub const DEFAULT_LANE_CAPACITY_VPH: f64 = 1900.0;

/// Floor on the congestion speed factor; keeps jammed edges traversable.
pub const MIN_CONGESTION_FACTOR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub pos: Vec2,
}

/// A directed, straight lane between two nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub from: NodeId,
    pub to: NodeId,
    pub length_m: f64,
    pub free_speed_mps: f64,
    pub capacity_vph: f64,
}

impl Edge {
    /// Jam density in vehicles per meter, from the parabolic speed-density
    /// relation where capacity = free_speed · jam_density / 4.
    pub fn jam_density_per_m(&self) -> f64 {
        4.0 * (self.capacity_vph / 3600.0) / self.free_speed_mps
    }

    /// Speed multiplier at `density_per_m`, floored at [`MIN_CONGESTION_FACTOR`].
    pub fn congestion_factor(&self, density_per_m: f64) -> f64 {
        (1.0 - density_per_m / self.jam_density_per_m()).max(MIN_CONGESTION_FACTOR)
    }
}

/// Built only through [`RoadGraph::new`], which derives the adjacency index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoadGraph {
    nodes: BTreeMap<NodeId, Node>,
    edges: BTreeMap<EdgeId, Edge>,
    #[serde(skip)]
    outgoing: BTreeMap<NodeId, Vec<EdgeId>>,
}

/// Input description of one edge; length comes from node geometry.
#[derive(Debug, Clone, Copy)]
pub struct EdgeSpec {
    pub id: EdgeId,
    pub from: NodeId,
    pub to: NodeId,
    pub free_speed_mps: f64,
    pub capacity_vph: f64,
}

impl RoadGraph {
    pub fn new(nodes: Vec<Node>, edges: Vec<EdgeSpec>) -> Result<Self, WorldError> {
        let mut node_map = BTreeMap::new();
        for n in nodes {
            if !n.pos.is_finite() {
                return Err(WorldError::InvalidGraph(format!("node {} has non-finite position", n.id.0)));
            }
            if node_map.insert(n.id, n.clone()).is_some() {
                return Err(WorldError::InvalidGraph(format!("duplicate node id {}", n.id.0)));
            }
        }
        let mut edge_map = BTreeMap::new();
        let mut outgoing: BTreeMap<NodeId, Vec<EdgeId>> = BTreeMap::new();
        for e in edges {
            let (Some(a), Some(b)) = (node_map.get(&e.from), node_map.get(&e.to)) else {
                return Err(WorldError::InvalidGraph(format!(
                    "edge {} references unknown node",
                    e.id.0
                )));
            };
            let length_m = a.pos.distance(b.pos);
            if length_m <= 0.0 {
                return Err(WorldError::InvalidGraph(format!("edge {} has zero length", e.id.0)));
            }
            if !(e.capacity_vph > 0.0) {
                return Err(WorldError::InvalidGraph(format!("edge {} capacity must be > 0", e.id.0)));
            }
            if !(e.free_speed_mps > 0.0) {
                return Err(WorldError::InvalidGraph(format!("edge {} free speed must be > 0", e.id.0)));
            }
            let edge = Edge {
                id: e.id,
                from: e.from,
                to: e.to,
                length_m,
                free_speed_mps: e.free_speed_mps,
                capacity_vph: e.capacity_vph,
            };
            if edge_map.insert(e.id, edge).is_some() {
                return Err(WorldError::InvalidGraph(format!("duplicate edge id {}", e.id.0)));
            }
            outgoing.entry(e.from).or_default().push(e.id);
        }
        Ok(Self {
            nodes: node_map,
            edges: edge_map,
            outgoing,
        })
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edges.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    /// Outgoing edges of `node` in id order.
    pub fn outgoing(&self, node: NodeId) -> &[EdgeId] {
        self.outgoing.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    fn endpoints(&self, e: &Edge) -> (Vec2, Vec2) {
        (self.nodes[&e.from].pos, self.nodes[&e.to].pos)
    }

    /// Point `s` meters along `edge`.
    pub fn point_on(&self, edge: EdgeId, s: f64) -> Vec2 {
        let e = &self.edges[&edge];
        let (a, b) = self.endpoints(e);
        a + (b - a) * (s / e.length_m)
    }

    pub fn heading_of(&self, edge: EdgeId) -> f64 {
        let e = &self.edges[&edge];
        let (a, b) = self.endpoints(e);
        (b - a).angle()
    }

    /// True if every consecutive pair shares a node and all ids exist.
    pub fn is_contiguous(&self, route: &[EdgeId]) -> bool {
        if route.iter().any(|e| !self.edges.contains_key(e)) {
            return false;
        }
        route
            .windows(2)
            .all(|w| self.edges[&w[0]].to == self.edges[&w[1]].from)
    }

    pub fn route_length(&self, route: &[EdgeId]) -> f64 {
        route.iter().map(|e| self.edges[e].length_m).sum()
    }

    /// Best matching edge for a position and heading: nearest edge within
    /// `max_offset_m`, preferring edges whose direction agrees with `heading`.
    pub fn locate(&self, pos: Vec2, heading: f64, max_offset_m: f64) -> Option<(EdgeId, f64)> {
        let mut best: Option<(f64, EdgeId, f64)> = None;
        for e in self.edges.values() {
            let (a, b) = self.endpoints(e);
            let (t, d) = project_on_segment(pos, a, b);
            if d > max_offset_m {
                continue;
            }
            let along = super::geometry::heading_gap((b - a).angle(), heading);
            // opposing lanes share geometry; penalise direction mismatch
            let score = d + if along > std::f64::consts::FRAC_PI_2 { max_offset_m } else { 0.0 };
            if best.is_none_or(|(bs, _, _)| score < bs) {
                best = Some((score, e.id, t * e.length_m));
            }
        }
        best.map(|(_, id, s)| (id, s))
    }
}

/// A polyline along which roadside units measure their reach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    points: Vec<Vec2>,
    cumulative: Vec<f64>,
}

impl Corridor {
    pub fn from_points(points: Vec<Vec2>) -> Result<Self, WorldError> {
        if points.len() < 2 {
            return Err(WorldError::InvalidGraph("corridor needs at least two points".into()));
        }
        let mut cumulative = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in points.windows(2) {
            acc += w[0].distance(w[1]);
            cumulative.push(acc);
        }
        Ok(Self { points, cumulative })
    }

    pub fn from_route(graph: &RoadGraph, route: &[EdgeId]) -> Result<Self, WorldError> {
        if route.is_empty() || !graph.is_contiguous(route) {
            return Err(WorldError::InvalidGraph("corridor route must be contiguous and non-empty".into()));
        }
        let mut pts = vec![graph.node(graph.edge(route[0]).unwrap().from).unwrap().pos];
        for e in route {
            pts.push(graph.node(graph.edge(*e).unwrap().to).unwrap().pos);
        }
        Self::from_points(pts)
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.length());
        for i in 0..self.points.len() - 1 {
            let (s0, s1) = (self.cumulative[i], self.cumulative[i + 1]);
            if s <= s1 || i == self.points.len() - 2 {
                let seg = s1 - s0;
                let t = if seg > 0.0 { (s - s0) / seg } else { 0.0 };
                return self.points[i] + (self.points[i + 1] - self.points[i]) * t;
            }
        }
        unreachable!()
    }

    /// Arc-length coordinate of the closest corridor point and the lateral
    /// distance to it.
    pub fn project(&self, p: Vec2) -> (f64, f64) {
        let mut best = (0.0, f64::INFINITY);
        for i in 0..self.points.len() - 1 {
            let (a, b) = (self.points[i], self.points[i + 1]);
            let (t, d) = project_on_segment(p, a, b);
            if d < best.1 {
                best = (self.cumulative[i] + t * a.distance(b), d);
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight() -> RoadGraph {
        RoadGraph::new(
            vec![
                Node { id: NodeId(0), pos: Vec2::new(0.0, 0.0) },
                Node { id: NodeId(1), pos: Vec2::new(300.0, 400.0) },
            ],
            vec![EdgeSpec {
                id: EdgeId(0),
                from: NodeId(0),
                to: NodeId(1),
                free_speed_mps: 15.0,
                capacity_vph: DEFAULT_LANE_CAPACITY_VPH,
            }],
        )
        .unwrap()
    }

    #[test]
    fn edge_length_matches_node_distance() {
        let g = straight();
        assert!((g.edge(EdgeId(0)).unwrap().length_m - 500.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_zero_capacity() {
        let err = RoadGraph::new(
            vec![
                Node { id: NodeId(0), pos: Vec2::new(0.0, 0.0) },
                Node { id: NodeId(1), pos: Vec2::new(1.0, 0.0) },
            ],
            vec![EdgeSpec {
                id: EdgeId(0),
                from: NodeId(0),
                to: NodeId(1),
                free_speed_mps: 15.0,
                capacity_vph: 0.0,
            }],
        );
        assert!(err.is_err());
    }

    #[test]
    fn jam_density_from_capacity() {
        let g = straight();
        let e = g.edge(EdgeId(0)).unwrap();
        // 4 * (1900/3600) / 15
        assert!((e.jam_density_per_m() - 0.140740740740).abs() < 1e-9);
        assert_eq!(e.congestion_factor(1.0), MIN_CONGESTION_FACTOR);
        assert_eq!(e.congestion_factor(0.0), 1.0);
    }

    #[test]
    fn corridor_projection() {
        let c = Corridor::from_points(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(100.0, 0.0),
            Vec2::new(100.0, 50.0),
        ])
        .unwrap();
        assert_eq!(c.length(), 150.0);
        let (s, d) = c.project(Vec2::new(103.0, 20.0));
        assert!((s - 120.0).abs() < 1e-9 && (d - 3.0).abs() < 1e-9);
        assert_eq!(c.point_at(125.0), Vec2::new(100.0, 25.0));
    }
}
