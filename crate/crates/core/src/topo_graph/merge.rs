use super::{Certainty, HybridTopoGraph, NodeId, NodeKind, TopoNode};
use std::collections::BTreeMap;

/// Default proximity threshold for collapsing frontier / coverage nodes (3 cells at 0.1 m).
pub const DEFAULT_MERGE_RADIUS: f64 = 0.3;

/// Fuses `mine` with the neighbors' graphs in the shared world frame.
///
/// Deterministic edges survive verbatim. GV nodes only coincide when they sit
/// at the exact same position; frontier and coverage nodes closer than
/// `merge_radius` collapse onto the lowest-id node of the group, which keeps
/// its position and inherits the union of adjacencies. The output is
/// independent of the order of `theirs`. With no neighbor graphs the result
/// is a plain copy of `mine`.
pub fn merge_graphs(
    mine: &HybridTopoGraph,
    theirs: &[HybridTopoGraph],
    merge_radius: f64,
) -> HybridTopoGraph {
    if theirs.is_empty() {
        return mine.clone();
    }
    merge_with_map(mine, theirs, merge_radius).0
}

/// Same as [`merge_graphs`] but also returns, for every input node id, the id
/// of the output node that absorbed it.
pub fn merge_with_map(
    mine: &HybridTopoGraph,
    theirs: &[HybridTopoGraph],
    merge_radius: f64,
) -> (HybridTopoGraph, BTreeMap<NodeId, NodeId>) {
    // id-level union; `mine` wins on conflicting payloads, then lowest-index neighbor
    let mut nodes: BTreeMap<NodeId, TopoNode> = BTreeMap::new();
    for g in std::iter::once(mine).chain(theirs.iter()) {
        for n in g.nodes() {
            nodes.entry(n.id).or_insert(*n);
        }
    }

    let mut rep: BTreeMap<NodeId, NodeId> = BTreeMap::new();

    let mut gv_at: BTreeMap<(u64, u64), NodeId> = BTreeMap::new();
    for n in nodes.values().filter(|n| n.kind == NodeKind::Gv) {
        let key = (n.pos.x.to_bits(), n.pos.y.to_bits());
        let r = *gv_at.entry(key).or_insert(n.id);
        rep.insert(n.id, r);
    }

    // greedy in id order: representatives end up pairwise farther than the radius
    let r2 = merge_radius * merge_radius;
    let cell = merge_radius.max(1e-6);
    let mut buckets: BTreeMap<(i64, i64), Vec<NodeId>> = BTreeMap::new();
    for n in nodes.values().filter(|n| n.kind != NodeKind::Gv) {
        let bx = (n.pos.x / cell).floor() as i64;
        let by = (n.pos.y / cell).floor() as i64;
        let mut found: Option<NodeId> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = buckets.get(&(bx + dx, by + dy)) {
                    for &c in list {
                        if nodes[&c].pos.dist_sq(n.pos) <= r2 && found.map_or(true, |f| c < f) {
                            found = Some(c);
                        }
                    }
                }
            }
        }
        match found {
            Some(c) => {
                rep.insert(n.id, c);
            }
            None => {
                rep.insert(n.id, n.id);
                buckets.entry((bx, by)).or_default().push(n.id);
            }
        }
    }

    let mut out = HybridTopoGraph::new();
    for (id, r) in &rep {
        if id == r {
            out.add_node(nodes[id]).expect("representatives are unique");
        }
    }
    for g in std::iter::once(mine).chain(theirs.iter()) {
        for e in g.edges() {
            let a = rep[&e.a];
            let b = rep[&e.b];
            if a == b {
                continue;
            }
            let certainty = match (out.edge(a, b), e.certainty) {
                (Some(prev), Certainty::Uncertain) => prev.certainty,
                (_, c) => c,
            };
            let both_gv = out.node(a).map(|n| n.kind) == Some(NodeKind::Gv)
                && out.node(b).map(|n| n.kind) == Some(NodeKind::Gv);
            let certainty = if both_gv {
                certainty
            } else {
                Certainty::Uncertain
            };
            // a non-GV node placed exactly on a GV node would give a zero-length
            // edge; the mapper never emits such pairs, so they are dropped here
            let _ = out.add_edge(a, b, certainty);
        }
    }
    (out, rep)
}
