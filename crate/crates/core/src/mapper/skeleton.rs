//! GV ridge cells to sparse GV nodes: thinning, spur pruning, branch tracing.

use super::gvd::DistanceField;
use crate::grid::{Cell, OccupancyGrid, N8};
use crate::topo_graph::{Certainty, HybridTopoGraph, NodeId, NodeKind, TopoNode, GV_OWNER};
use std::collections::BTreeSet;

#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonParams {
    /// Distance between consecutive nodes along a ridge, meters.
    pub node_spacing: f64,
    /// Dangling branches shorter than this many cells are dropped.
    pub prune_len: usize,
    /// Dangling branches ending closer than this to an obstacle are dropped, meters.
    pub prune_clearance: f64,
}

impl Default for SkeletonParams {
    fn default() -> Self {
        Self {
            node_spacing: 1.0,
            prune_len: 5,
            prune_clearance: 0.25,
        }
    }
}

/// Node and edge changes that turn one graph's GV layer into another.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GraphDelta {
    pub added_nodes: Vec<TopoNode>,
    pub removed_nodes: Vec<NodeId>,
    pub added_edges: Vec<(NodeId, NodeId, Certainty)>,
    pub removed_edges: Vec<(NodeId, NodeId)>,
}

impl GraphDelta {
    pub fn is_empty(&self) -> bool {
        self.added_nodes.is_empty()
            && self.removed_nodes.is_empty()
            && self.added_edges.is_empty()
            && self.removed_edges.is_empty()
    }

    pub fn apply(&self, g: &mut HybridTopoGraph) {
        for &(a, b) in &self.removed_edges {
            g.remove_edge(a, b);
        }
        for &id in &self.removed_nodes {
            g.remove_node(id);
        }
        for n in &self.added_nodes {
            let _ = g.add_node(*n);
        }
        for &(a, b, c) in &self.added_edges {
            let _ = g.add_edge(a, b, c);
        }
    }
}

pub fn gv_node_id(cell: usize) -> NodeId {
    NodeId::compose(GV_OWNER, cell as u32)
}

struct Mask<'a> {
    grid: &'a OccupancyGrid,
    on: Vec<bool>,
}

impl Mask<'_> {
    fn get(&self, x: i64, y: i64) -> bool {
        self.grid.in_bounds(x, y) && self.on[self.grid.idx(x as usize, y as usize)]
    }

    fn nbrs(&self, i: usize) -> Vec<usize> {
        let (x, y) = self.grid.xy(i);
        N8.iter()
            .filter_map(|&(dx, dy)| {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                self.get(nx, ny)
                    .then(|| self.grid.idx(nx as usize, ny as usize))
            })
            .collect()
    }

    fn degree(&self, i: usize) -> usize {
        self.nbrs(i).len()
    }

    /// Zhang-Suen thinning.
    fn thin(&mut self) {
        loop {
            let mut changed = false;
            for step in 0..2 {
                let mut kill = Vec::new();
                for i in 0..self.on.len() {
                    if !self.on[i] {
                        continue;
                    }
                    let (x, y) = self.grid.xy(i);
                    let (x, y) = (x as i64, y as i64);
                    // p2..p9 clockwise from north
                    let p = [
                        self.get(x, y + 1),
                        self.get(x + 1, y + 1),
                        self.get(x + 1, y),
                        self.get(x + 1, y - 1),
                        self.get(x, y - 1),
                        self.get(x - 1, y - 1),
                        self.get(x - 1, y),
                        self.get(x - 1, y + 1),
                    ];
                    let b = p.iter().filter(|&&v| v).count();
                    let a = (0..8).filter(|&k| !p[k] && p[(k + 1) % 8]).count();
                    let (n, e, s, w) = (p[0], p[2], p[4], p[6]);
                    let ok = if step == 0 {
                        !(n && e && s) && !(e && s && w)
                    } else {
                        !(n && e && w) && !(n && s && w)
                    };
                    if (2..=6).contains(&b) && a == 1 && ok {
                        kill.push(i);
                    }
                }
                changed |= !kill.is_empty();
                for i in kill {
                    self.on[i] = false;
                }
            }
            if !changed {
                break;
            }
        }
    }

    /// Drops dangling branches that are short or end close to an obstacle.
    fn prune(&mut self, field: &DistanceField, params: &SkeletonParams) {
        let ends: Vec<usize> = (0..self.on.len())
            .filter(|&i| self.on[i] && self.degree(i) == 1)
            .collect();
        let mut kill = Vec::new();
        for e in ends {
            let mut path = vec![e];
            let mut prev = usize::MAX;
            let mut cur = e;
            let reached_junction = loop {
                let next: Vec<usize> = self.nbrs(cur).into_iter().filter(|&n| n != prev).collect();
                if next.len() != 1 {
                    break next.len() > 1;
                }
                let n = next[0];
                if self.degree(n) != 2 {
                    break self.degree(n) > 2;
                }
                prev = cur;
                cur = n;
                path.push(cur);
            };
            if reached_junction
                && (path.len() < params.prune_len || field.dist[e] < params.prune_clearance)
            {
                kill.extend(path);
            }
        }
        for i in kill {
            self.on[i] = false;
        }
    }
}

/// Builds the GV layer (GV nodes and deterministic edges) from ridge cells.
pub fn gv_layer(
    gv_cells: &[usize],
    belief: &OccupancyGrid,
    field: &DistanceField,
    params: &SkeletonParams,
) -> HybridTopoGraph {
    let mut m = Mask {
        grid: belief,
        on: vec![false; belief.len()],
    };
    // close one-cell gaps before thinning
    for &i in gv_cells {
        m.on[i] = true;
        for n in belief.neighbors8(i) {
            if belief.at(n) == Cell::Free {
                m.on[n] = true;
            }
        }
    }
    m.thin();
    m.prune(field, params);

    let n = belief.len();
    let deg: Vec<usize> = (0..n)
        .map(|i| if m.on[i] { m.degree(i) } else { 0 })
        .collect();
    let is_key = |i: usize| m.on[i] && deg[i] != 2;

    // junction pixels that touch each other share one node
    let mut rep: Vec<usize> = (0..n).collect();
    for i in 0..n {
        if m.on[i] && deg[i] >= 3 && rep[i] == i {
            let mut stack = vec![i];
            while let Some(c) = stack.pop() {
                for nb in m.nbrs(c) {
                    if deg[nb] >= 3 && rep[nb] == nb && nb != i {
                        rep[nb] = i;
                        stack.push(nb);
                    }
                }
            }
        }
    }

    let mut g = HybridTopoGraph::new();
    let ensure = |g: &mut HybridTopoGraph, cell: usize| {
        let id = gv_node_id(cell);
        if !g.contains(id) {
            g.add_node(TopoNode::new(id, NodeKind::Gv, belief.center_of(cell)))
                .expect("fresh id");
        }
        id
    };
    let link = |g: &mut HybridTopoGraph, a: NodeId, b: NodeId| {
        if a != b {
            let _ = g.add_edge(a, b, Certainty::Deterministic);
        }
    };
    let los =
        |a: usize, b: usize| belief.segment_all_free(belief.center_of(a), belief.center_of(b));
    let step = |a: usize, b: usize| belief.center_of(a).dist(belief.center_of(b));

    let mut visited = vec![false; n];
    let mut starts: Vec<usize> = (0..n).filter(|&i| is_key(i)).collect();
    let mut k = 0;
    loop {
        if k == starts.len() {
            // rings without any key pixel: seed one at their lowest cell
            match (0..n).find(|&i| m.on[i] && !visited[i] && !is_key(i)) {
                Some(i) => starts.push(i),
                None => break,
            }
        }
        let s = starts[k];
        k += 1;
        let s_node = rep[s];
        visited[s] = true;
        ensure(&mut g, s_node);
        for nb in m.nbrs(s) {
            if is_key(nb) {
                if rep[nb] != rep[s] && los(rep[s], rep[nb]) {
                    let (a, b) = (ensure(&mut g, rep[s]), ensure(&mut g, rep[nb]));
                    link(&mut g, a, b);
                }
                continue;
            }
            if visited[nb] {
                continue;
            }
            let mut last = s_node;
            let mut arc = step(s, nb);
            let mut prev = s;
            let mut cur = nb;
            loop {
                visited[cur] = true;
                if !los(last, cur) && prev != last {
                    let (a, b) = (ensure(&mut g, last), ensure(&mut g, prev));
                    link(&mut g, a, b);
                    last = prev;
                    arc = step(prev, cur);
                }
                let next = m
                    .nbrs(cur)
                    .into_iter()
                    .find(|&x| x != prev && (!visited[x] || is_key(x) || x == s));
                let end = match next {
                    Some(x) if is_key(x) || x == s => Some(rep[x]),
                    None => Some(cur),
                    _ => None,
                };
                if let Some(e) = end {
                    if e != cur && !los(last, e) && last != cur {
                        let (a, b) = (ensure(&mut g, last), ensure(&mut g, cur));
                        link(&mut g, a, b);
                        last = cur;
                    }
                    let (a, b) = (ensure(&mut g, last), ensure(&mut g, e));
                    link(&mut g, a, b);
                    break;
                }
                if arc >= params.node_spacing {
                    let (a, b) = (ensure(&mut g, last), ensure(&mut g, cur));
                    link(&mut g, a, b);
                    last = cur;
                    arc = 0.0;
                }
                let x = next.expect("checked above");
                arc += step(cur, x);
                prev = cur;
                cur = x;
            }
        }
    }
    g
}

/// Changes needed to turn the GV layer of `existing` into the layer built
/// from `gv_cells`. Empty when nothing changed.
pub fn extract_gv_nodes(
    gv_cells: &[usize],
    belief: &OccupancyGrid,
    field: &DistanceField,
    params: &SkeletonParams,
    existing: &HybridTopoGraph,
) -> GraphDelta {
    diff_gv_layer(existing, &gv_layer(gv_cells, belief, field, params))
}

fn diff_gv_layer(existing: &HybridTopoGraph, layer: &HybridTopoGraph) -> GraphDelta {
    let mut d = GraphDelta::default();
    let old: BTreeSet<NodeId> = existing
        .nodes()
        .filter(|n| n.kind == NodeKind::Gv)
        .map(|n| n.id)
        .collect();
    for n in existing.nodes().filter(|n| n.kind == NodeKind::Gv) {
        match layer.node(n.id) {
            Some(m) if m == n => {}
            Some(_) => {
                d.removed_nodes.push(n.id);
                d.added_nodes.push(*layer.node(n.id).expect("present"));
            }
            None => d.removed_nodes.push(n.id),
        }
    }
    d.added_nodes
        .extend(layer.nodes().filter(|n| !old.contains(&n.id)).copied());
    for e in existing
        .edges()
        .filter(|e| e.certainty == Certainty::Deterministic)
    {
        if layer.edge(e.a, e.b).is_none() && layer.contains(e.a) && layer.contains(e.b) {
            d.removed_edges.push((e.a, e.b));
        }
    }
    let replaced: BTreeSet<NodeId> = d.added_nodes.iter().map(|n| n.id).collect();
    for e in layer.edges() {
        let fresh = replaced.contains(&e.a) || replaced.contains(&e.b);
        if fresh || existing.edge(e.a, e.b).map(|x| x.certainty) != Some(Certainty::Deterministic) {
            d.added_edges.push((e.a, e.b, e.certainty));
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::super::gvd::DistanceField;
    use super::*;

    fn layer_of(belief: &OccupancyGrid, spacing: f64) -> HybridTopoGraph {
        let f = DistanceField::compute(belief, 2.0);
        let p = SkeletonParams {
            node_spacing: spacing,
            ..Default::default()
        };
        gv_layer(&f.gv_cells(), belief, &f, &p)
    }

    /// Horizontal corridor `len` cells long, `w` free cells wide, open at both ends.
    fn corridor(len: usize, w: usize) -> OccupancyGrid {
        let mut g = OccupancyGrid::filled(len, w + 2, 0.1, Cell::Free);
        for x in 0..len {
            g.set(x, 0, Cell::Occupied);
            g.set(x, w + 1, Cell::Occupied);
        }
        g
    }

    #[test]
    fn straight_corridor_is_a_chain() {
        let b = corridor(100, 9);
        let g = layer_of(&b, 2.0);
        assert!((5..=7).contains(&g.node_count()), "{}", g.node_count());
        assert_eq!(g.edge_count(), g.node_count() - 1);
        let ys: BTreeSet<u64> = g.nodes().map(|n| n.pos.y.to_bits()).collect();
        assert_eq!(ys.len(), 1);
        assert!(g.edges().all(|e| e.certainty == Certainty::Deterministic));
        g.validate().unwrap();
    }

    #[test]
    fn t_junction_has_one_branch_node() {
        // bar along x, stem going down from the middle; all ends open
        let (w, h) = (61, 41);
        let mut b = OccupancyGrid::filled(w, h, 0.1, Cell::Occupied);
        for x in 0..w {
            for y in 30..39 {
                b.set(x, y, Cell::Free);
            }
        }
        for x in 26..35 {
            for y in 0..30 {
                b.set(x, y, Cell::Free);
            }
        }
        let g = layer_of(&b, 1.0);
        let junctions: Vec<_> = g.nodes().filter(|n| g.degree(n.id) >= 3).collect();
        assert_eq!(junctions.len(), 1, "{:?}", junctions);
        assert_eq!(g.degree(junctions[0].id), 3);
        for e in g.edges() {
            let (a, c) = (g.node(e.a).unwrap().pos, g.node(e.b).unwrap().pos);
            assert!(b.segment_all_free(a, c));
        }
    }

    #[test]
    fn unchanged_input_gives_empty_delta() {
        let b = corridor(60, 9);
        let f = DistanceField::compute(&b, 2.0);
        let p = SkeletonParams::default();
        let mut g = HybridTopoGraph::new();
        let first = extract_gv_nodes(&f.gv_cells(), &b, &f, &p, &g);
        assert!(!first.is_empty());
        first.apply(&mut g);
        assert_eq!(g, gv_layer(&f.gv_cells(), &b, &f, &p));
        assert!(extract_gv_nodes(&f.gv_cells(), &b, &f, &p, &g).is_empty());
    }
}
