//! Gated single-linkage association of object observations.
//!
//! Two observations are linked when they share an object type, lie within the
//! position gate and (optionally) within the heading gate. Clusters are the
//! connected components of that relation, which makes the result independent
//! of input order and lets spatial shards be stitched back together exactly.

use std::collections::BTreeMap;

use crate::sor::ObjectType;
use crate::world::geometry::heading_gap;
use crate::world::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate {
    pub distance_m: f64,
    /// Max heading difference in radians, exclusive. `None` disables it.
    pub heading_rad: Option<f64>,
}

/// What the clustering needs to know about one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub object_type: ObjectType,
    pub location: Vec2,
    pub heading: f64,
}

impl Gate {
    pub fn links(&self, a: &Candidate, b: &Candidate) -> bool {
        a.object_type == b.object_type
            && a.location.distance(b.location) <= self.distance_m
            && self.heading_rad.is_none_or(|h| heading_gap(a.heading, b.heading) < h)
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller index wins so roots are canonical
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

fn cell_of(p: Vec2, size: f64) -> (i64, i64) {
    ((p.x / size).floor() as i64, (p.y / size).floor() as i64)
}

/// Connected components under `gate`. Each component lists member indices
/// ascending; components are ordered by their smallest member.
pub fn cluster(items: &[Candidate], gate: Gate) -> Vec<Vec<usize>> {
    let n = items.len();
    let mut uf = UnionFind::new(n);
    let size = gate.distance_m.max(1e-6);
    let mut grid: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, it) in items.iter().enumerate() {
        grid.entry(cell_of(it.location, size)).or_default().push(i);
    }
    for (i, it) in items.iter().enumerate() {
        let (cx, cy) = cell_of(it.location, size);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(bucket) = grid.get(&(cx + dx, cy + dy)) else { continue };
                for &j in bucket {
                    if j > i && gate.links(it, &items[j]) {
                        uf.union(i, j);
                    }
                }
            }
        }
    }
    let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = uf.find(i);
        comps.entry(r).or_default().push(i);
    }
    comps.into_values().collect()
}

/// Merge pre-computed components of disjoint shards into global components,
/// adding links between members of different shards. `shards[k]` holds the
/// global indices covered by shard `k` and `local[k]` its components
/// expressed in those global indices.
pub fn stitch(items: &[Candidate], gate: Gate, shard_of: &[usize], local: &[Vec<Vec<usize>>]) -> Vec<Vec<usize>> {
    let n = items.len();
    let mut uf = UnionFind::new(n);
    for comps in local {
        for c in comps {
            for w in c.windows(2) {
                uf.union(w[0], w[1]);
            }
        }
    }
    let size = gate.distance_m.max(1e-6);
    let mut grid: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, it) in items.iter().enumerate() {
        grid.entry(cell_of(it.location, size)).or_default().push(i);
    }
    for (i, it) in items.iter().enumerate() {
        let (cx, cy) = cell_of(it.location, size);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(bucket) = grid.get(&(cx + dx, cy + dy)) else { continue };
                for &j in bucket {
                    if j > i && shard_of[i] != shard_of[j] && gate.links(it, &items[j]) {
                        uf.union(i, j);
                    }
                }
            }
        }
    }
    let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = uf.find(i);
        comps.entry(r).or_default().push(i);
    }
    comps.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(x: f64, y: f64) -> Candidate {
        Candidate { object_type: ObjectType::Vehicle, location: Vec2::new(x, y), heading: 0.0 }
    }

    /// O(n²) reference: repeated relaxation of component labels.
    fn brute(items: &[Candidate], gate: Gate) -> Vec<Vec<usize>> {
        let n = items.len();
        let mut label: Vec<usize> = (0..n).collect();
        loop {
            let mut changed = false;
            for i in 0..n {
                for j in 0..n {
                    if gate.links(&items[i], &items[j]) && label[j] < label[i] {
                        label[i] = label[j];
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, l) in label.iter().enumerate() {
            comps.entry(*l).or_default().push(i);
        }
        comps.into_values().collect()
    }

    #[test]
    fn gate_and_type() {
        let gate = Gate { distance_m: 3.0, heading_rad: None };
        let mut items = vec![c(0.0, 0.0), c(1.5, 0.0), c(10.0, 0.0)];
        items.push(Candidate { object_type: ObjectType::Pedestrian, ..c(0.5, 0.0) });
        assert_eq!(cluster(&items, gate), vec![vec![0, 1], vec![2], vec![3]]);
    }

    #[test]
    fn heading_gate_splits() {
        let gate = Gate { distance_m: 3.0, heading_rad: Some(std::f64::consts::FRAC_PI_4) };
        let a = c(0.0, 0.0);
        let b = Candidate { heading: std::f64::consts::PI, ..c(1.0, 0.0) };
        assert_eq!(cluster(&[a, b], gate).len(), 2);
    }

    proptest! {
        #[test]
        fn matches_brute_force(pts in proptest::collection::vec((0.0..40.0f64, 0.0..10.0f64, 0u8..2), 0..40)) {
            let items: Vec<Candidate> = pts.iter().map(|(x, y, t)| Candidate {
                object_type: if *t == 0 { ObjectType::Vehicle } else { ObjectType::Pedestrian },
                ..c(*x, *y)
            }).collect();
            let gate = Gate { distance_m: 2.5, heading_rad: None };
            prop_assert_eq!(cluster(&items, gate), brute(&items, gate));
        }

        #[test]
        fn sharded_stitch_matches_global(pts in proptest::collection::vec((0.0..100.0f64, 0.0..5.0f64), 0..50)) {
            let items: Vec<Candidate> = pts.iter().map(|(x, y)| c(*x, *y)).collect();
            let gate = Gate { distance_m: 3.0, heading_rad: None };
            let shard_of: Vec<usize> = items.iter().map(|it| (it.location.x / 25.0).floor() as usize).collect();
            let mut local = Vec::new();
            for k in 0..4 {
                let idx: Vec<usize> = (0..items.len()).filter(|i| shard_of[*i] == k).collect();
                let sub: Vec<Candidate> = idx.iter().map(|i| items[*i]).collect();
                local.push(cluster(&sub, gate).into_iter().map(|comp| comp.into_iter().map(|j| idx[j]).collect()).collect());
            }
            prop_assert_eq!(stitch(&items, gate, &shard_of, &local), cluster(&items, gate));
        }
    }
}
