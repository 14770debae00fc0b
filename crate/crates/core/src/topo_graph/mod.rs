//! Hybrid topological map: typed nodes (GV / frontier / coverage), typed edges
//! (deterministic / uncertain), graph distances and map merging.

mod merge;
mod snapshot;

pub use merge::{merge_graphs, merge_with_map, DEFAULT_MERGE_RADIUS};
pub use snapshot::{parse_snapshot, write_snapshot, Snapshot};

use crate::error::GraphError;
use crate::geom::Point2;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;

/// Globally unique node id built from an `(owner, local counter)` pair.
///
/// Owners below [`RESERVED_OWNER_BASE`] are robot ids. Map-derived nodes
/// (GV, frontier) use reserved owners and the grid cell index as the local
/// part, so every robot that extracts them from the same belief agrees on ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u64);

pub const RESERVED_OWNER_BASE: u32 = 0xFFFF_0000;
pub const GV_OWNER: u32 = RESERVED_OWNER_BASE + 1;
pub const FRONTIER_OWNER: u32 = RESERVED_OWNER_BASE + 2;

impl NodeId {
    pub const fn compose(owner: u32, local: u32) -> Self {
        NodeId(((owner as u64) << 32) | local as u64)
    }

    pub const fn owner(self) -> u32 {
        (self.0 >> 32) as u32
    }

    pub const fn local(self) -> u32 {
        self.0 as u32
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Hands out fresh ids for nodes created by one robot.
#[derive(Clone, Debug)]
pub struct IdAllocator {
    owner: u32,
    next: u32,
}

impl IdAllocator {
    pub fn new(owner: u32) -> Self {
        Self { owner, next: 0 }
    }

    pub fn next_id(&mut self) -> NodeId {
        let id = NodeId::compose(self.owner, self.next);
        self.next += 1;
        id
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Gv,
    Frontier,
    Coverage,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Certainty {
    Deterministic,
    Uncertain,
}

impl Certainty {
    /// Indicator used by the online load metric: 1 for uncertain edges.
    pub fn delta(self) -> f64 {
        match self {
            Certainty::Deterministic => 0.0,
            Certainty::Uncertain => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopoNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub pos: Point2,
    /// Set on nodes sampled beside an overloaded node to split its load.
    pub dual: bool,
}

impl TopoNode {
    pub fn new(id: NodeId, kind: NodeKind, pos: Point2) -> Self {
        Self {
            id,
            kind,
            pos,
            dual: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeAttr {
    pub length: f64,
    pub certainty: Certainty,
}

/// An undirected edge, stored with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TopoEdge {
    pub a: NodeId,
    pub b: NodeId,
    pub length: f64,
    pub certainty: Certainty,
}

/// Undirected graph with typed nodes and edges. Edge length is always the
/// Euclidean distance between the endpoint positions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HybridTopoGraph {
    nodes: BTreeMap<NodeId, TopoNode>,
    adj: BTreeMap<NodeId, BTreeMap<NodeId, EdgeAttr>>,
}

impl HybridTopoGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(|m| m.len()).sum::<usize>() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn node(&self, id: NodeId) -> Option<&TopoNode> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &TopoNode> {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn add_node(&mut self, node: TopoNode) -> Result<(), GraphError> {
        if self.nodes.contains_key(&node.id) {
            return Err(GraphError::DuplicateNode(node.id));
        }
        self.nodes.insert(node.id, node);
        self.adj.insert(node.id, BTreeMap::new());
        Ok(())
    }

    /// Removes a node and all incident edges. Returns the removed node.
    pub fn remove_node(&mut self, id: NodeId) -> Option<TopoNode> {
        let node = self.nodes.remove(&id)?;
        if let Some(nbrs) = self.adj.remove(&id) {
            for n in nbrs.keys() {
                if let Some(m) = self.adj.get_mut(n) {
                    m.remove(&id);
                }
            }
        }
        Some(node)
    }

    /// Adds (or replaces) the edge `a-b`; length comes from node positions.
    pub fn add_edge(
        &mut self,
        a: NodeId,
        b: NodeId,
        certainty: Certainty,
    ) -> Result<(), GraphError> {
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        let na = *self.nodes.get(&a).ok_or(GraphError::UnknownNode(a))?;
        let nb = *self.nodes.get(&b).ok_or(GraphError::UnknownNode(b))?;
        if certainty == Certainty::Deterministic
            && (na.kind != NodeKind::Gv || nb.kind != NodeKind::Gv)
        {
            return Err(GraphError::DeterministicNonGv(a, b));
        }
        let certainty = if na.kind != NodeKind::Gv || nb.kind != NodeKind::Gv {
            Certainty::Uncertain
        } else {
            certainty
        };
        let length = na.pos.dist(nb.pos);
        if !(length > 0.0) {
            return Err(GraphError::DegenerateEdge(a, b));
        }
        let attr = EdgeAttr { length, certainty };
        self.adj.entry(a).or_default().insert(b, attr);
        self.adj.entry(b).or_default().insert(a, attr);
        Ok(())
    }

    pub fn remove_edge(&mut self, a: NodeId, b: NodeId) -> bool {
        let removed = self
            .adj
            .get_mut(&a)
            .map(|m| m.remove(&b).is_some())
            .unwrap_or(false);
        if let Some(m) = self.adj.get_mut(&b) {
            m.remove(&a);
        }
        removed
    }

    pub fn edge(&self, a: NodeId, b: NodeId) -> Option<EdgeAttr> {
        self.adj.get(&a).and_then(|m| m.get(&b)).copied()
    }

    pub fn neighbors(&self, id: NodeId) -> impl Iterator<Item = (NodeId, EdgeAttr)> + '_ {
        self.adj
            .get(&id)
            .into_iter()
            .flat_map(|m| m.iter().map(|(k, v)| (*k, *v)))
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.adj.get(&id).map_or(0, |m| m.len())
    }

    /// All edges once each, ordered by `(a, b)` with `a < b`.
    pub fn edges(&self) -> impl Iterator<Item = TopoEdge> + '_ {
        self.adj.iter().flat_map(|(a, m)| {
            m.iter()
                .filter(move |(b, _)| a < *b)
                .map(move |(b, e)| TopoEdge {
                    a: *a,
                    b: *b,
                    length: e.length,
                    certainty: e.certainty,
                })
        })
    }

    /// Nearest node to `p` among those accepted by `filter`, ties by id.
    pub fn nearest_node(
        &self,
        p: Point2,
        mut filter: impl FnMut(&TopoNode) -> bool,
    ) -> Option<NodeId> {
        let mut best: Option<(f64, NodeId)> = None;
        for n in self.nodes.values() {
            if !filter(n) {
                continue;
            }
            let d = n.pos.dist_sq(p);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, n.id));
            }
        }
        best.map(|(_, id)| id)
    }

    /// Checks every structural invariant; used by tests and after merges.
    pub fn validate(&self) -> Result<(), GraphError> {
        for (a, m) in &self.adj {
            let na = self.nodes.get(a).ok_or(GraphError::UnknownNode(*a))?;
            for (b, e) in m {
                if a == b {
                    return Err(GraphError::SelfLoop(*a));
                }
                let nb = self.nodes.get(b).ok_or(GraphError::UnknownNode(*b))?;
                let back = self
                    .adj
                    .get(b)
                    .and_then(|mb| mb.get(a))
                    .ok_or(GraphError::UnknownNode(*a))?;
                if back != e {
                    return Err(GraphError::Parse {
                        line: 0,
                        msg: format!("asymmetric edge {a}-{b}"),
                    });
                }
                if e.certainty == Certainty::Deterministic
                    && (na.kind != NodeKind::Gv || nb.kind != NodeKind::Gv)
                {
                    return Err(GraphError::DeterministicNonGv(*a, *b));
                }
                if (na.pos.dist(nb.pos) - e.length).abs() > 1e-9 {
                    return Err(GraphError::DegenerateEdge(*a, *b));
                }
            }
        }
        Ok(())
    }

    /// Dense, index-based view for the shortest-path kernels.
    pub fn index(&self) -> GraphIndex {
        let ids: Vec<NodeId> = self.nodes.keys().copied().collect();
        let adj = ids
            .iter()
            .map(|id| {
                self.adj[id]
                    .iter()
                    .map(|(n, e)| {
                        (
                            ids.binary_search(n).expect("edge endpoint indexed"),
                            e.length,
                            e.certainty,
                        )
                    })
                    .collect()
            })
            .collect();
        GraphIndex { ids, adj }
    }
}

/// Index-addressed adjacency lists, neighbors sorted by node id.
#[derive(Clone, Debug)]
pub struct GraphIndex {
    pub ids: Vec<NodeId>,
    pub adj: Vec<Vec<(usize, f64, Certainty)>>,
}

impl GraphIndex {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn idx(&self, id: NodeId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    /// Single-source Dijkstra. Equal-cost ties go to the lowest predecessor id.
    pub fn dijkstra(&self, src: usize) -> (Vec<f64>, Vec<Option<usize>>) {
        let n = self.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred: Vec<Option<usize>> = vec![None; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(MinKey::new(0.0, [0, src as u64, 0]));
        while let Some(k) = heap.pop() {
            let v = k.tie[1] as usize;
            if done[v] {
                continue;
            }
            done[v] = true;
            if v != src {
                pred[v] = Some(k.tie[0] as usize);
            }
            for &(u, len, _) in &self.adj[v] {
                if done[u] {
                    continue;
                }
                let nd = k.d + len;
                if nd <= dist[u] {
                    dist[u] = nd;
                    heap.push(MinKey::new(nd, [v as u64, u as u64, 0]));
                }
            }
        }
        (dist, pred)
    }
}

/// Min-heap key: distance first, then a lexicographic integer tie-break.
#[derive(Clone, Copy, Debug)]
pub(crate) struct MinKey {
    pub d: f64,
    pub tie: [u64; 3],
}

impl MinKey {
    pub fn new(d: f64, tie: [u64; 3]) -> Self {
        Self { d, tie }
    }
}

impl PartialEq for MinKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for MinKey {}
impl PartialOrd for MinKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for MinKey {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        other
            .d
            .total_cmp(&self.d)
            .then_with(|| other.tie.cmp(&self.tie))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShortestPath {
    pub distance: f64,
    /// Edges from source to destination, each as `(from, to)`.
    pub edges: Vec<(NodeId, NodeId)>,
}

/// Shortest path between two nodes; `Ok(None)` when `dst` is unreachable.
///
/// Ties between equal-cost routes resolve lexicographically on
/// (distance, predecessor id, node id), so the returned path is stable.
pub fn shortest_path(
    g: &HybridTopoGraph,
    src: NodeId,
    dst: NodeId,
) -> Result<Option<ShortestPath>, GraphError> {
    let index = g.index();
    let s = index.idx(src).ok_or(GraphError::UnknownNode(src))?;
    let t = index.idx(dst).ok_or(GraphError::UnknownNode(dst))?;
    let (dist, pred) = index.dijkstra(s);
    if !dist[t].is_finite() {
        return Ok(None);
    }
    let mut edges = Vec::new();
    let mut cur = t;
    while cur != s {
        let p = pred[cur].expect("reachable node has a predecessor");
        edges.push((index.ids[p], index.ids[cur]));
        cur = p;
    }
    edges.reverse();
    Ok(Some(ShortestPath {
        distance: dist[t],
        edges,
    }))
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn path_graph_shortest_path() {
        let g = path_graph(5);
        let p = shortest_path(&g, id(0), id(4)).unwrap().unwrap();
        assert_eq!(p.distance, 4.0);
        assert_eq!(
            p.edges,
            vec![
                (id(0), id(1)),
                (id(1), id(2)),
                (id(2), id(3)),
                (id(3), id(4))
            ]
        );
    }

    #[test]
    fn identity_path_is_empty() {
        let g = path_graph(5);
        let p = shortest_path(&g, id(0), id(0)).unwrap().unwrap();
        assert_eq!(p.distance, 0.0);
        assert!(p.edges.is_empty());
    }

    /// Rhombus a-b-c-d with unit sides and a 0.5 chord a-c.
    fn rhombus() -> HybridTopoGraph {
        let h = (1.0f64 - 0.0625).sqrt();
        let mut g = HybridTopoGraph::new();
        let pts = [(0.0, 0.0), (0.25, h), (0.5, 0.0), (0.25, -h)];
        for (i, (x, y)) in pts.iter().enumerate() {
            g.add_node(TopoNode::new(
                id(i as u32),
                NodeKind::Gv,
                Point2::new(*x, *y),
            ))
            .unwrap();
        }
        for (a, b) in [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)] {
            g.add_edge(id(a), id(b), Certainty::Deterministic).unwrap();
        }
        g
    }

    /// Enumerates every simple path between two nodes and returns the cheapest length.
    fn brute_force_distance(g: &HybridTopoGraph, s: NodeId, t: NodeId) -> Option<f64> {
        fn walk(
            g: &HybridTopoGraph,
            cur: NodeId,
            t: NodeId,
            seen: &mut Vec<NodeId>,
            acc: f64,
            best: &mut Option<f64>,
        ) {
            if cur == t {
                *best = Some(best.map_or(acc, |b: f64| b.min(acc)));
                return;
            }
            for (n, e) in g.neighbors(cur) {
                if !seen.contains(&n) {
                    seen.push(n);
                    walk(g, n, t, seen, acc + e.length, best);
                    seen.pop();
                }
            }
        }
        let mut best = None;
        walk(g, s, t, &mut vec![s], 0.0, &mut best);
        best
    }

    #[test]
    fn chord_beats_two_edge_route() {
        let g = rhombus();
        let oracle = brute_force_distance(&g, id(0), id(2)).unwrap();
        assert!((oracle - 0.5).abs() < 1e-12);
        let p = shortest_path(&g, id(0), id(2)).unwrap().unwrap();
        assert!((p.distance - 0.5).abs() < 1e-12);
        assert_eq!(p.edges, vec![(id(0), id(2))]);
    }

    #[test]
    fn unreachable_is_none() {
        let mut g = path_graph(2);
        g.add_node(TopoNode::new(id(9), NodeKind::Gv, Point2::new(5.0, 5.0)))
            .unwrap();
        assert_eq!(shortest_path(&g, id(0), id(9)).unwrap(), None);
        assert_eq!(
            shortest_path(&g, id(0), id(77)),
            Err(GraphError::UnknownNode(id(77)))
        );
    }

    #[test]
    fn equal_cost_ties_pick_lowest_predecessor() {
        // square 0-1-3 and 0-2-3, both length 2
        let mut g = HybridTopoGraph::new();
        for (i, (x, y)) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
            .iter()
            .enumerate()
        {
            g.add_node(TopoNode::new(
                id(i as u32),
                NodeKind::Gv,
                Point2::new(*x, *y),
            ))
            .unwrap();
        }
        for (a, b) in [(0, 1), (0, 2), (1, 3), (2, 3)] {
            g.add_edge(id(a), id(b), Certainty::Deterministic).unwrap();
        }
        let p = shortest_path(&g, id(0), id(3)).unwrap().unwrap();
        assert_eq!(p.edges, vec![(id(0), id(1)), (id(1), id(3))]);
    }

    #[test]
    fn edge_rules() {
        let mut g = HybridTopoGraph::new();
        g.add_node(TopoNode::new(id(0), NodeKind::Gv, Point2::new(0.0, 0.0)))
            .unwrap();
        g.add_node(TopoNode::new(
            id(1),
            NodeKind::Frontier,
            Point2::new(1.0, 0.0),
        ))
        .unwrap();
        assert_eq!(
            g.add_edge(id(0), id(0), Certainty::Uncertain),
            Err(GraphError::SelfLoop(id(0)))
        );
        assert_eq!(
            g.add_edge(id(0), id(1), Certainty::Deterministic),
            Err(GraphError::DeterministicNonGv(id(0), id(1)))
        );
        g.add_edge(id(0), id(1), Certainty::Uncertain).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(g
            .add_node(TopoNode::new(id(0), NodeKind::Gv, Point2::default()))
            .is_err());
        g.remove_node(id(1));
        assert_eq!(g.edge_count(), 0);
        g.validate().unwrap();
    }

    fn arb_graph() -> impl Strategy<Value = HybridTopoGraph> {
        (3usize..12, any::<u64>()).prop_map(|(n, seed)| {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut g = HybridTopoGraph::new();
            for i in 0..n {
                let p = Point2::new(rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0));
                g.add_node(TopoNode::new(id(i as u32), NodeKind::Gv, p))
                    .unwrap();
            }
            for _ in 0..(2 * n) {
                let a = rng.gen_range(0..n) as u32;
                let b = rng.gen_range(0..n) as u32;
                if a != b {
                    g.add_edge(id(a), id(b), Certainty::Deterministic).unwrap();
                }
            }
            g
        })
    }

    proptest! {
        #[test]
        fn triangle_inequality(g in arb_graph()) {
            let index = g.index();
            let all: Vec<Vec<f64>> = (0..index.len()).map(|s| index.dijkstra(s).0).collect();
            for u in 0..index.len() {
                for v in 0..index.len() {
                    for w in 0..index.len() {
                        if all[u][v].is_finite() && all[v][w].is_finite() {
                            prop_assert!(all[u][w] <= all[u][v] + all[v][w] + 1e-9);
                        }
                    }
                }
            }
        }

        #[test]
        fn edge_lengths_match_positions(g in arb_graph()) {
            for e in g.edges() {
                let d = g.node(e.a).unwrap().pos.dist(g.node(e.b).unwrap().pos);
                prop_assert!((d - e.length).abs() <= 1e-9);
            }
        }

        #[test]
        fn path_length_is_sum_of_edges(g in arb_graph()) {
            let ids: Vec<NodeId> = g.node_ids().collect();
            for &t in &ids {
                if let Some(p) = shortest_path(&g, ids[0], t).unwrap() {
                    let s: f64 = p.edges.iter().map(|(a, b)| g.edge(*a, *b).unwrap().length).sum();
                    prop_assert!((s - p.distance).abs() < 1e-9);
                }
            }
        }
    }
}
