//! Random instances and brute-force references shared by the integration tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};
use topovor_core::{
    Certainty, HybridTopoGraph, Metric, NodeId, NodeKind, Point2, PowerPointSet, TopoNode,
};

/// Connected random subgraph of a lattice with integer row and column
/// spacings, so every path length is an exact small integer.
/// `p_uncertain` is the chance an edge is uncertain.
pub fn lattice_graph(rng: &mut impl Rng, max_nodes: usize, p_uncertain: f64) -> HybridTopoGraph {
    let n = rng.gen_range(4..=max_nodes);
    let w = rng.gen_range(2..=n.min(8));
    let h = n.div_ceil(w);
    let xs: Vec<f64> = (0..w)
        .scan(0.0, |s, _| {
            *s += rng.gen_range(1..=3) as f64;
            Some(*s)
        })
        .collect();
    let ys: Vec<f64> = (0..h)
        .scan(0.0, |s, _| {
            *s += rng.gen_range(1..=3) as f64;
            Some(*s)
        })
        .collect();
    let mut g = HybridTopoGraph::new();
    let id = |k: usize| NodeId(k as u64);
    for k in 0..n {
        g.add_node(TopoNode::new(
            id(k),
            NodeKind::Gv,
            Point2::new(xs[k % w], ys[k / w]),
        ))
        .unwrap();
    }
    let mut cand = Vec::new();
    for k in 0..n {
        if k % w + 1 < w && k + 1 < n {
            cand.push((k, k + 1));
        }
        if k + w < n {
            cand.push((k, k + w));
        }
    }
    cand.shuffle(rng);
    // Kruskal keeps it connected; the rest are added with probability 0.3
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    for (a, b) in cand {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        let keep = ra != rb || rng.gen_bool(0.3);
        if ra != rb {
            parent[ra] = rb;
        }
        if keep {
            let c = if rng.gen_bool(p_uncertain) {
                Certainty::Uncertain
            } else {
                Certainty::Deterministic
            };
            g.add_edge(id(a), id(b), c).unwrap();
        }
    }
    g
}

/// Random tree over `n` nodes with integer-length edges along the x or y axis.
pub fn lattice_tree(rng: &mut impl Rng, n: usize) -> HybridTopoGraph {
    let mut g = HybridTopoGraph::new();
    let mut used: BTreeSet<(i64, i64)> = BTreeSet::new();
    let mut pos = vec![(0i64, 0i64)];
    used.insert((0, 0));
    g.add_node(TopoNode::new(
        NodeId(0),
        NodeKind::Gv,
        Point2::new(0.0, 0.0),
    ))
    .unwrap();
    while pos.len() < n {
        let p = rng.gen_range(0..pos.len());
        let (dx, dy) = [(1, 0), (-1, 0), (0, 1), (0, -1)][rng.gen_range(0..4)];
        let len = rng.gen_range(1..=3);
        let q = (pos[p].0 + dx * len, pos[p].1 + dy * len);
        if used.contains(&q) {
            continue;
        }
        used.insert(q);
        let k = pos.len() as u64;
        pos.push(q);
        g.add_node(TopoNode::new(
            NodeId(k),
            NodeKind::Gv,
            Point2::new(q.0 as f64, q.1 as f64),
        ))
        .unwrap();
        let c = if rng.gen_bool(0.5) {
            Certainty::Uncertain
        } else {
            Certainty::Deterministic
        };
        g.add_edge(NodeId(p as u64), NodeId(k), c).unwrap();
    }
    g
}

/// All-pairs distances by Floyd-Warshall, indexed in node-id order.
pub fn floyd_warshall(g: &HybridTopoGraph) -> (Vec<NodeId>, Vec<Vec<f64>>) {
    let ids: Vec<NodeId> = g.nodes().map(|n| n.id).collect();
    let at: BTreeMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let n = ids.len();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for e in g.edges() {
        let (a, b) = (at[&e.a], at[&e.b]);
        d[a][b] = d[a][b].min(e.length);
        d[b][a] = d[b][a].min(e.length);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    (ids, d)
}

/// Reference partition: every node folds the centers that reach it in
/// (distance, index) order, switching to a later center only when
/// `D_c - w[c][current] < D_current`. Each center's tree is the union of the
/// root paths of its members, with the lowest-id predecessor on ties.
pub fn oracle_partition(
    g: &HybridTopoGraph,
    pp: &PowerPointSet,
    metric: Metric,
) -> (BTreeMap<NodeId, usize>, Vec<f64>) {
    let (ids, d) = floyd_warshall(g);
    let at: BTreeMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let roots: Vec<usize> = pp.center_nodes().iter().map(|c| at[c]).collect();
    let k = roots.len();
    let mut labels = BTreeMap::new();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for v in 0..ids.len() {
        let mut order: Vec<usize> = (0..k).filter(|&c| d[roots[c]][v].is_finite()).collect();
        order.sort_by(|&a, &b| d[roots[a]][v].total_cmp(&d[roots[b]][v]).then(a.cmp(&b)));
        let Some((&first, rest)) = order.split_first() else {
            continue;
        };
        let mut l = first;
        for &c in rest {
            if d[roots[c]][v] - pp.weight(c, l) < d[roots[l]][v] {
                l = c;
            }
        }
        labels.insert(ids[v], l);
        members[l].push(v);
    }
    let mut loads = vec![0.0; k];
    for c in 0..k {
        let r = roots[c];
        let pred = |u: usize| -> usize {
            g.neighbors(ids[u])
                .map(|(p, e)| (at[&p], e))
                .filter(|&(p, e)| d[r][p] + e.length == d[r][u])
                .map(|(p, _)| p)
                .min()
                .expect("shortest-path predecessor")
        };
        let mut edges: BTreeMap<usize, usize> = BTreeMap::new();
        for &v in &members[c] {
            let mut u = v;
            while u != r && !edges.contains_key(&u) {
                let p = pred(u);
                edges.insert(u, p);
                u = p;
            }
        }
        for (&child, &p) in &edges {
            let e = g.edge(ids[child], ids[p]).unwrap();
            loads[c] += metric.edge_weight(e.length, e.certainty);
        }
    }
    (labels, loads)
}

/// `k` distinct random centers with robot ids 0..k.
pub fn random_centers(rng: &mut impl Rng, g: &HybridTopoGraph, k: usize) -> Vec<(u32, NodeId)> {
    let ids: Vec<NodeId> = g.nodes().map(|n| n.id).collect();
    ids.choose_multiple(rng, k)
        .enumerate()
        .map(|(i, &v)| (i as u32, v))
        .collect()
}

/// Antisymmetric weights in quarter-meter steps, strictly inside the
/// feasibility bound of each center pair.
pub fn random_feasible_weights(
    rng: &mut impl Rng,
    g: &HybridTopoGraph,
    centers: &[(u32, NodeId)],
) -> Vec<Vec<f64>> {
    let (ids, d) = floyd_warshall(g);
    let at: BTreeMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let k = centers.len();
    let mut w = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let bound = d[at[&centers[i].1]][at[&centers[j].1]];
            let steps = ((bound * 4.0).ceil() as i64 - 1).max(0);
            let v = rng.gen_range(-steps..=steps) as f64 / 4.0;
            w[i][j] = v;
            w[j][i] = -v;
        }
    }
    w
}

/// Brute-force open-path ATSP from row 0.
pub fn brute_force_atsp(m: &[Vec<f64>]) -> f64 {
    fn rec(m: &[Vec<f64>], cur: usize, left: &mut Vec<usize>, acc: f64, best: &mut f64) {
        if left.is_empty() {
            *best = best.min(acc);
            return;
        }
        for k in 0..left.len() {
            let v = left.remove(k);
            rec(m, v, left, acc + m[cur][v], best);
            left.insert(k, v);
        }
    }
    if m.len() <= 1 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    let mut left: Vec<usize> = (1..m.len()).collect();
    rec(m, 0, &mut left, 0.0, &mut best);
    best
}

/// Integer-valued asymmetric matrix so sums are exact.
pub fn random_matrix(rng: &mut impl Rng, n: usize) -> Vec<Vec<f64>> {
    (0..=n)
        .map(|i| {
            (0..=n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        rng.gen_range(1..100) as f64
                    }
                })
                .collect()
        })
        .collect()
}
