//! Weighted graph Voronoi partition via a parallel multi-source Dijkstra, and
//! the exploration-load metrics derived from the per-center trees.

use crate::error::PartitionError;
use crate::topo_graph::{Certainty, GraphIndex, HybridTopoGraph, MinKey, NodeId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

/// Slack used when clamping a weight below the center-to-center distance.
pub const FEASIBILITY_MARGIN: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    /// Every tree edge counts its full length.
    #[default]
    Plain,
    /// Only uncertain edges count.
    Online,
}

impl Metric {
    pub fn edge_weight(self, length: f64, certainty: Certainty) -> f64 {
        match self {
            Metric::Plain => length,
            Metric::Online => certainty.delta() * length,
        }
    }
}

/// Voronoi centers with an antisymmetric weight table.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerPointSet {
    /// `(robot id, center node)` per partition, in index order.
    pub centers: Vec<(u32, NodeId)>,
    weights: Vec<Vec<f64>>,
}

impl PowerPointSet {
    /// All weights zero.
    pub fn new(centers: Vec<(u32, NodeId)>) -> Self {
        let n = centers.len();
        Self {
            centers,
            weights: vec![vec![0.0; n]; n],
        }
    }

    pub fn with_weights(
        centers: Vec<(u32, NodeId)>,
        weights: Vec<Vec<f64>>,
    ) -> Result<Self, PartitionError> {
        let n = centers.len();
        if weights.len() != n || weights.iter().any(|r| r.len() != n) {
            return Err(PartitionError::WeightShape {
                rows: weights.len(),
                cols: weights.first().map_or(0, |r| r.len()),
                n,
            });
        }
        for i in 0..n {
            for j in i..n {
                if weights[i][j] != -weights[j][i] {
                    return Err(PartitionError::NotAntisymmetric(i, j));
                }
            }
        }
        Ok(Self { centers, weights })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn center(&self, i: usize) -> NodeId {
        self.centers[i].1
    }

    pub fn center_nodes(&self) -> Vec<NodeId> {
        self.centers.iter().map(|c| c.1).collect()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i][j]
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// Sets `w[i][j] = w` and `w[j][i] = -w`.
    pub fn set_weight(&mut self, i: usize, j: usize, w: f64) {
        if i == j {
            return;
        }
        self.weights[i][j] = w;
        self.weights[j][i] = -w;
    }

    pub fn reset_weights(&mut self) {
        for row in &mut self.weights {
            row.iter_mut().for_each(|w| *w = 0.0);
        }
    }

    /// Pulls every weight strictly below the graph distance between the two
    /// centers. Pairs in different components are left alone.
    pub fn clamp_feasible(&mut self, center_distances: &[Vec<f64>]) {
        let n = self.len();
        for i in 0..n {
            for j in 0..n {
                let d = center_distances[i][j];
                if i != j && d.is_finite() && self.weights[i][j] >= d {
                    self.set_weight(i, j, d - FEASIBILITY_MARGIN);
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeEdge {
    pub parent: NodeId,
    pub child: NodeId,
    pub length: f64,
    pub certainty: Certainty,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionResult {
    pub centers: Vec<NodeId>,
    pub metric: Metric,
    /// Center index owning each reachable node.
    pub label: BTreeMap<NodeId, usize>,
    /// Graph distance from each labeled node to its own center.
    pub dist: BTreeMap<NodeId, f64>,
    pub partition: Vec<BTreeSet<NodeId>>,
    /// Per center: the union of shortest-path-tree root paths over its
    /// partition, sorted by child id.
    pub tree: Vec<Vec<TreeEdge>>,
    /// Per-center load, summed over `tree` in child-id order.
    pub load: Vec<f64>,
    /// The same load, as accumulated by the add / subtract bookkeeping of the sweep.
    pub accumulated_load: Vec<f64>,
    /// Nodes no center can reach.
    pub orphans: BTreeSet<NodeId>,
    /// `center_distances[i][j]` is the graph distance between centers i and j.
    pub center_distances: Vec<Vec<f64>>,
    /// Number of relabel events during the sweep.
    pub relabels: usize,
}

impl PartitionResult {
    /// Tree parent of `node` in the tree of `center`, if any.
    pub fn parent(&self, center: usize, node: NodeId) -> Option<NodeId> {
        let t = &self.tree[center];
        t.binary_search_by(|e| e.child.cmp(&node))
            .ok()
            .map(|i| t[i].parent)
    }

    fn children(&self, center: usize) -> BTreeMap<NodeId, Vec<&TreeEdge>> {
        let mut ch: BTreeMap<NodeId, Vec<&TreeEdge>> = BTreeMap::new();
        for e in &self.tree[center] {
            ch.entry(e.parent).or_default().push(e);
        }
        ch
    }
}

/// Partitions `g` among the centers of `pp`.
pub fn graph_voronoi(
    g: &HybridTopoGraph,
    pp: &PowerPointSet,
    metric: Metric,
) -> Result<PartitionResult, PartitionError> {
    graph_voronoi_indexed(&g.index(), pp, metric)
}

/// [`graph_voronoi`] on a prebuilt index, for callers that partition the same graph repeatedly.
pub fn graph_voronoi_indexed(
    index: &GraphIndex,
    pp: &PowerPointSet,
    metric: Metric,
) -> Result<PartitionResult, PartitionError> {
    let k = pp.len();
    let n = index.len();
    let mut roots = Vec::with_capacity(k);
    for (i, &(_, c)) in pp.centers.iter().enumerate() {
        let r = index.idx(c).ok_or(PartitionError::MissingCenter(c))?;
        if pp.centers[..i].iter().any(|&(_, o)| o == c) {
            return Err(PartitionError::DuplicateCenter(c));
        }
        roots.push(r);
    }

    let edge = |v: usize, u: usize| -> (f64, Certainty) {
        let a = &index.adj[v];
        let pos = a
            .binary_search_by(|e| e.0.cmp(&u))
            .expect("tree edge exists");
        (a[pos].1, a[pos].2)
    };

    let mut dist = vec![vec![f64::INFINITY; n]; k];
    let mut pred: Vec<Vec<Option<usize>>> = vec![vec![None; n]; k];
    let mut done = vec![vec![false; n]; k];
    let mut refs = vec![vec![0u32; n]; k];
    let mut acc = vec![0.0; k];
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut relabels = 0;

    // refcount each node by the number of partition members whose root path uses it
    let attach = |c: usize,
                  v: usize,
                  refs: &mut Vec<Vec<u32>>,
                  acc: &mut Vec<f64>,
                  pred: &Vec<Vec<Option<usize>>>| {
        let mut u = v;
        loop {
            refs[c][u] += 1;
            if refs[c][u] > 1 {
                break;
            }
            match pred[c][u] {
                Some(p) => {
                    let (len, cert) = edge(u, p);
                    acc[c] += metric.edge_weight(len, cert);
                    u = p;
                }
                None => break,
            }
        }
    };
    let detach = |c: usize,
                  v: usize,
                  refs: &mut Vec<Vec<u32>>,
                  acc: &mut Vec<f64>,
                  pred: &Vec<Vec<Option<usize>>>| {
        let mut u = v;
        loop {
            refs[c][u] -= 1;
            if refs[c][u] > 0 {
                break;
            }
            match pred[c][u] {
                Some(p) => {
                    let (len, cert) = edge(u, p);
                    acc[c] -= metric.edge_weight(len, cert);
                    u = p;
                }
                None => break,
            }
        }
    };

    let mut heap = BinaryHeap::new();
    for (c, &r) in roots.iter().enumerate() {
        dist[c][r] = 0.0;
        heap.push(MinKey::new(0.0, [c as u64, r as u64, u64::MAX]));
    }
    while let Some(key) = heap.pop() {
        let c = key.tie[0] as usize;
        let v = key.tie[1] as usize;
        if done[c][v] {
            continue;
        }
        done[c][v] = true;
        if v != roots[c] {
            pred[c][v] = Some(key.tie[2] as usize);
        }
        match label[v] {
            None => {
                label[v] = Some(c);
                attach(c, v, &mut refs, &mut acc, &pred);
            }
            Some(l) => {
                if key.d - pp.weight(c, l) < dist[l][v] {
                    detach(l, v, &mut refs, &mut acc, &pred);
                    label[v] = Some(c);
                    attach(c, v, &mut refs, &mut acc, &pred);
                    relabels += 1;
                }
            }
        }
        for &(u, len, _) in &index.adj[v] {
            if done[c][u] {
                continue;
            }
            let nd = key.d + len;
            if nd <= dist[c][u] {
                dist[c][u] = nd;
                heap.push(MinKey::new(nd, [c as u64, u as u64, v as u64]));
            }
        }
    }

    let mut tree = vec![Vec::new(); k];
    let mut load = vec![0.0; k];
    for c in 0..k {
        for v in 0..n {
            if refs[c][v] == 0 {
                continue;
            }
            if let Some(p) = pred[c][v] {
                let (length, certainty) = edge(v, p);
                load[c] += metric.edge_weight(length, certainty);
                tree[c].push(TreeEdge {
                    parent: index.ids[p],
                    child: index.ids[v],
                    length,
                    certainty,
                });
            }
        }
    }

    let mut res = PartitionResult {
        centers: pp.center_nodes(),
        metric,
        label: BTreeMap::new(),
        dist: BTreeMap::new(),
        partition: vec![BTreeSet::new(); k],
        tree,
        load,
        accumulated_load: acc,
        orphans: BTreeSet::new(),
        center_distances: (0..k)
            .map(|i| roots.iter().map(|&r| dist[i][r]).collect())
            .collect(),
        relabels,
    };
    for v in 0..n {
        let id = index.ids[v];
        match label[v] {
            Some(c) => {
                res.label.insert(id, c);
                res.dist.insert(id, dist[c][v]);
                res.partition[c].insert(id);
            }
            None => {
                res.orphans.insert(id);
            }
        }
    }
    Ok(res)
}

/// Load of one center, recounted from its tree.
///
/// # Panics
/// If `center` is out of range.
pub fn load_metric(res: &PartitionResult, center: usize) -> f64 {
    res.tree[center]
        .iter()
        .map(|e| res.metric.edge_weight(e.length, e.certainty))
        .sum()
}

/// Load of `center` after dropping `node` from its partition, with the tree
/// rebuilt as the union of the remaining root paths.
pub fn load_without(
    res: &PartitionResult,
    center: usize,
    node: NodeId,
) -> Result<f64, PartitionError> {
    let part = res
        .partition
        .get(center)
        .ok_or(PartitionError::BadCenter(center))?;
    if !part.contains(&node) {
        return Err(PartitionError::NotInPartition(node, center));
    }
    let mut keep: BTreeSet<NodeId> = BTreeSet::new();
    for &v in part.iter().filter(|&&v| v != node) {
        let mut u = v;
        while keep.insert(u) {
            match res.parent(center, u) {
                Some(p) => u = p,
                None => break,
            }
        }
    }
    Ok(res.tree[center]
        .iter()
        .filter(|e| keep.contains(&e.child))
        .map(|e| res.metric.edge_weight(e.length, e.certainty))
        .sum())
}

/// Checks that removing a tree leaf from the partition does not raise the load.
pub fn leaf_removal_decreases(
    res: &PartitionResult,
    center: usize,
    leaf: NodeId,
) -> Result<bool, PartitionError> {
    if center >= res.centers.len() {
        return Err(PartitionError::BadCenter(center));
    }
    if !res.partition[center].contains(&leaf) {
        return Err(PartitionError::NotInPartition(leaf, center));
    }
    let is_root = res.centers[center] == leaf;
    let has_child = res.tree[center].iter().any(|e| e.parent == leaf);
    if is_root || has_child {
        return Err(PartitionError::NotALeaf(leaf, center));
    }
    Ok(load_without(res, center, leaf)? <= res.load[center])
}

/// Load each partition node carries: its parent edge plus everything routed
/// through it in the tree. The center's own entry is the whole load.
pub fn node_contributions(res: &PartitionResult, center: usize) -> BTreeMap<NodeId, f64> {
    let children = res.children(center);
    let mut sub: BTreeMap<NodeId, f64> = BTreeMap::new();
    fn walk(
        v: NodeId,
        children: &BTreeMap<NodeId, Vec<&TreeEdge>>,
        metric: Metric,
        sub: &mut BTreeMap<NodeId, f64>,
    ) -> f64 {
        let mut total = 0.0;
        if let Some(ch) = children.get(&v) {
            for e in ch {
                total += walk(e.child, children, metric, sub)
                    + metric.edge_weight(e.length, e.certainty);
            }
        }
        sub.insert(v, total);
        total
    }
    let root = res.centers[center];
    walk(root, &children, res.metric, &mut sub);
    res.partition[center]
        .iter()
        .map(|&v| {
            let own = res.tree[center]
                .binary_search_by(|e| e.child.cmp(&v))
                .map(|i| {
                    let e = &res.tree[center][i];
                    res.metric.edge_weight(e.length, e.certainty)
                })
                .unwrap_or(0.0);
            (v, sub.get(&v).copied().unwrap_or(0.0) + own)
        })
        .collect()
}

/// Open depth-first walk over the center's tree, children in id order.
///
/// Returns the visited node sequence (with the backtracking steps, minus the
/// final return) and its length in meters. The walk crosses each tree edge at
/// most twice, so the length is at most twice the plain tree weight.
pub fn tour_upper_bound(res: &PartitionResult, center: usize) -> (Vec<NodeId>, f64) {
    let children = res.children(center);
    let root = res.centers[center];
    let mut walk = vec![root];
    let mut steps = vec![0.0];
    let mut stack: Vec<(NodeId, usize)> = vec![(root, 0)];
    while let Some(&mut (v, ref mut next)) = stack.last_mut() {
        let ch = children.get(&v).map_or(&[][..], |c| &c[..]);
        if *next < ch.len() {
            let e = ch[*next];
            *next += 1;
            walk.push(e.child);
            steps.push(e.length);
            stack.push((e.child, 0));
        } else {
            stack.pop();
            if let Some(&(p, _)) = stack.last() {
                walk.push(p);
                steps.push(
                    res.tree[center][res.tree[center]
                        .binary_search_by(|x| x.child.cmp(&v))
                        .unwrap()]
                    .length,
                );
            }
        }
    }
    // drop the trailing return toward the root
    let mut seen = BTreeSet::new();
    let mut last_new = 0;
    for (i, v) in walk.iter().enumerate() {
        if seen.insert(*v) {
            last_new = i;
        }
    }
    walk.truncate(last_new + 1);
    let length = steps[..=last_new].iter().sum();
    (walk, length)
}

/// Online load plus the scaled ATSP tour estimate.
pub fn feedback_load(lambda_online: f64, atsp_distance: f64, gamma_d: f64) -> f64 {
    lambda_online + gamma_d * atsp_distance
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point2;
    use crate::topo_graph::fixtures::*;
    use crate::topo_graph::{NodeKind, TopoNode};
    use proptest::prelude::*;

    fn pp(centers: &[u32]) -> PowerPointSet {
        PowerPointSet::new(
            centers
                .iter()
                .enumerate()
                .map(|(i, &c)| (i as u32, id(c)))
                .collect(),
        )
    }

    #[test]
    fn path_two_centers_tie_goes_to_lower_index() {
        let g = path_graph(5);
        let r = graph_voronoi(&g, &pp(&[0, 4]), Metric::Plain).unwrap();
        for v in 0..3 {
            assert_eq!(r.label[&id(v)], 0);
        }
        for v in 3..5 {
            assert_eq!(r.label[&id(v)], 1);
        }
        assert_eq!(r.load, vec![2.0, 1.0]);
        assert_eq!(r.accumulated_load, r.load);
    }

    #[test]
    fn weight_moves_the_boundary() {
        let g = path_graph(5);
        let mut p = pp(&[0, 4]);
        p.set_weight(1, 0, 0.5);
        assert_eq!(p.weight(0, 1), -0.5);
        let r = graph_voronoi(&g, &p, Metric::Plain).unwrap();
        assert_eq!(r.label[&id(2)], 1);
        assert_eq!(r.load, vec![1.0, 2.0]);
        assert_eq!(r.accumulated_load, r.load);
        assert_eq!(r.relabels, 1);
    }

    #[test]
    fn single_center_takes_everything() {
        let g = path_graph(6);
        let r = graph_voronoi(&g, &pp(&[2]), Metric::Plain).unwrap();
        assert!(r.label.values().all(|&l| l == 0));
        assert_eq!(r.load, vec![5.0]);
        assert!(r.orphans.is_empty());
    }

    #[test]
    fn star_plain_and_online() {
        let g = star_graph();
        let r = graph_voronoi(&g, &pp(&[0]), Metric::Plain).unwrap();
        assert_eq!(r.load, vec![3.0]);
        let r = graph_voronoi(&g, &pp(&[0]), Metric::Online).unwrap();
        assert_eq!(r.load, vec![0.0]);
    }

    #[test]
    fn orphans_reported() {
        let mut g = path_graph(3);
        g.add_node(TopoNode::new(id(9), NodeKind::Gv, Point2::new(9.0, 9.0)))
            .unwrap();
        let r = graph_voronoi(&g, &pp(&[0]), Metric::Plain).unwrap();
        assert_eq!(r.orphans.iter().copied().collect::<Vec<_>>(), vec![id(9)]);
        assert!(!r.label.contains_key(&id(9)));
    }

    #[test]
    fn bad_centers_rejected() {
        let g = path_graph(3);
        assert_eq!(
            graph_voronoi(&g, &pp(&[7]), Metric::Plain),
            Err(PartitionError::MissingCenter(id(7)))
        );
        assert_eq!(
            graph_voronoi(&g, &pp(&[1, 1]), Metric::Plain),
            Err(PartitionError::DuplicateCenter(id(1)))
        );
        let bad = PowerPointSet::with_weights(
            vec![(0, id(0)), (1, id(1))],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        );
        assert_eq!(bad, Err(PartitionError::NotAntisymmetric(0, 1)));
    }

    #[test]
    fn load_metric_examples() {
        let g = path_graph(5);
        let r = graph_voronoi(&g, &pp(&[0, 4]), Metric::Plain).unwrap();
        assert_eq!(load_metric(&r, 0), 2.0);
        let g = path_graph(2);
        let r = graph_voronoi(&g, &pp(&[0, 1]), Metric::Plain).unwrap();
        assert_eq!(load_metric(&r, 0), 0.0);
    }

    #[test]
    fn leaf_removal_examples() {
        let g = path_graph(5);
        let r = graph_voronoi(&g, &pp(&[0, 4]), Metric::Plain).unwrap();
        assert_eq!(load_without(&r, 0, id(2)).unwrap(), 1.0);
        assert!(leaf_removal_decreases(&r, 0, id(2)).unwrap());
        assert_eq!(
            leaf_removal_decreases(&r, 0, id(1)),
            Err(PartitionError::NotALeaf(id(1), 0))
        );
        assert_eq!(
            leaf_removal_decreases(&r, 0, id(4)),
            Err(PartitionError::NotInPartition(id(4), 0))
        );

        let r = graph_voronoi(&star_graph(), &pp(&[0]), Metric::Plain).unwrap();
        for leaf in 1..=3 {
            assert_eq!(load_without(&r, 0, id(leaf)).unwrap(), 2.0);
            assert!(leaf_removal_decreases(&r, 0, id(leaf)).unwrap());
        }
    }

    #[test]
    fn contributions_of_star() {
        let r = graph_voronoi(&star_graph(), &pp(&[0]), Metric::Plain).unwrap();
        let c = node_contributions(&r, 0);
        assert_eq!(c[&id(0)], 3.0);
        assert_eq!(c[&id(1)], 1.0);
    }

    #[test]
    fn tour_examples() {
        let g = path_graph(5);
        let r = graph_voronoi(&g, &pp(&[0, 4]), Metric::Plain).unwrap();
        assert_eq!(tour_upper_bound(&r, 0), (vec![id(0), id(1), id(2)], 2.0));

        let r = graph_voronoi(&star_graph(), &pp(&[0]), Metric::Plain).unwrap();
        let (tour, len) = tour_upper_bound(&r, 0);
        assert_eq!(tour, vec![id(0), id(1), id(0), id(2), id(0), id(3)]);
        assert_eq!(len, 5.0);
        assert!(len <= 2.0 * r.load[0]);

        let g = path_graph(2);
        let r = graph_voronoi(&g, &pp(&[0, 1]), Metric::Plain).unwrap();
        assert_eq!(tour_upper_bound(&r, 1), (vec![id(1)], 0.0));
    }

    #[test]
    fn feedback_examples() {
        assert_eq!(feedback_load(10.0, 4.0, 1.0), 14.0);
        assert_eq!(feedback_load(3.5, 0.0, 7.0), 3.5);
        assert_eq!(feedback_load(0.0, 5.0, 0.5), 2.5);
    }

    #[test]
    fn clamp_keeps_weights_feasible() {
        let g = path_graph(5);
        let mut p = pp(&[0, 4]);
        p.set_weight(0, 1, 10.0);
        let r = graph_voronoi(&g, &p, Metric::Plain).unwrap();
        p.clamp_feasible(&r.center_distances);
        assert!(p.weight(0, 1) < 4.0);
        assert_eq!(p.weight(1, 0), -p.weight(0, 1));
    }

    /// Random connected graph with mixed certainty and random feasible weights.
    fn arb_instance() -> impl Strategy<Value = (HybridTopoGraph, PowerPointSet)> {
        (4usize..20, 1usize..5, any::<u64>()).prop_map(|(n, k, seed)| {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut g = HybridTopoGraph::new();
            for i in 0..n {
                let kind = if rng.gen_bool(0.7) {
                    NodeKind::Gv
                } else {
                    NodeKind::Frontier
                };
                let p = Point2::new(rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0));
                g.add_node(TopoNode::new(id(i as u32), kind, p)).unwrap();
            }
            for i in 1..n {
                let j = rng.gen_range(0..i);
                let _ = g
                    .add_edge(id(i as u32), id(j as u32), Certainty::Deterministic)
                    .or_else(|_| g.add_edge(id(i as u32), id(j as u32), Certainty::Uncertain));
            }
            for _ in 0..n {
                let a = rng.gen_range(0..n) as u32;
                let b = rng.gen_range(0..n) as u32;
                if a != b {
                    let _ = g.add_edge(id(a), id(b), Certainty::Uncertain);
                }
            }
            let k = k.min(n);
            let mut centers: Vec<u32> = (0..n as u32).collect();
            for i in 0..k {
                let j = rng.gen_range(i..n);
                centers.swap(i, j);
            }
            let mut p = pp(&centers[..k]);
            let base = graph_voronoi(&g, &p, Metric::Plain).unwrap();
            for i in 0..k {
                for j in (i + 1)..k {
                    let d = base.center_distances[i][j];
                    p.set_weight(i, j, rng.gen_range(-0.9..0.9) * d);
                }
            }
            (g, p)
        })
    }

    proptest! {
        #[test]
        fn accumulated_load_matches_recount((g, p) in arb_instance()) {
            for metric in [Metric::Plain, Metric::Online] {
                let r = graph_voronoi(&g, &p, metric).unwrap();
                for c in 0..p.len() {
                    prop_assert_eq!(load_metric(&r, c), r.load[c]);
                    prop_assert!((r.accumulated_load[c] - r.load[c]).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn trees_are_rooted_and_cover_partitions((g, p) in arb_instance()) {
            let r = graph_voronoi(&g, &p, Metric::Plain).unwrap();
            prop_assert!(r.orphans.is_empty());
            for c in 0..p.len() {
                prop_assert_eq!(r.label[&p.center(c)], c);
                prop_assert_eq!(r.dist[&p.center(c)], 0.0);
                for &v in &r.partition[c] {
                    let mut u = v;
                    let mut hops = 0;
                    while let Some(q) = r.parent(c, u) {
                        u = q;
                        hops += 1;
                        prop_assert!(hops <= g.node_count());
                    }
                    prop_assert_eq!(u, p.center(c));
                }
            }
        }

        #[test]
        fn two_center_labels_satisfy_weighted_condition((g, p) in arb_instance()) {
            prop_assume!(p.len() == 2);
            let r = graph_voronoi(&g, &p, Metric::Plain).unwrap();
            let index = g.index();
            let d: Vec<Vec<f64>> = (0..2).map(|c| index.dijkstra(index.idx(p.center(c)).unwrap()).0).collect();
            for (v, &i) in &r.label {
                let j = 1 - i;
                let x = index.idx(*v).unwrap();
                prop_assert!(d[i][x] - p.weight(i, j) <= d[j][x] + 1e-9);
            }
        }

        #[test]
        fn leaves_never_raise_load((g, p) in arb_instance()) {
            let r = graph_voronoi(&g, &p, Metric::Plain).unwrap();
            for c in 0..p.len() {
                for &v in &r.partition[c] {
                    if let Ok(ok) = leaf_removal_decreases(&r, c, v) {
                        prop_assert!(ok);
                    }
                }
            }
        }

        #[test]
        fn tour_within_twice_load((g, p) in arb_instance()) {
            let r = graph_voronoi(&g, &p, Metric::Plain).unwrap();
            for c in 0..p.len() {
                let (tour, len) = tour_upper_bound(&r, c);
                prop_assert!(len <= 2.0 * r.load[c] + 1e-9);
                for v in &r.partition[c] {
                    prop_assert!(tour.contains(v));
                }
            }
        }
    }
}
