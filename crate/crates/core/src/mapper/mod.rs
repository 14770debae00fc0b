//! Builds the hybrid topological graph from a robot's belief grid.

mod coverage;
mod frontier;
mod gvd;
mod skeleton;

pub use coverage::{retire, sample_coverage, sample_seed, CoverageParams, CoverageSample};
pub use frontier::{
    detect_frontiers, is_frontier, nearest_traversable, update_frontiers, FrontierCluster,
    FrontierParams,
};
pub use gvd::{update_gvd, DistanceField, NO_OBSTACLE};
pub use skeleton::{extract_gv_nodes, gv_layer, gv_node_id, GraphDelta, SkeletonParams};

use crate::grid::OccupancyGrid;
use crate::topo_graph::{Certainty, HybridTopoGraph, NodeId, NodeKind, TopoNode, FRONTIER_OWNER};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq)]
pub struct MapperConfig {
    /// Distance field cap, meters.
    pub max_range: f64,
    pub skeleton: SkeletonParams,
    pub frontier: FrontierParams,
    pub coverage: CoverageParams,
    /// Longest uncertain edge used to join separate graph pieces, meters.
    pub bridge_len: f64,
    /// Frontier nodes link to at most this many GV nodes.
    pub frontier_links: usize,
}

impl Default for MapperConfig {
    fn default() -> Self {
        Self {
            max_range: 2.0,
            skeleton: SkeletonParams::default(),
            frontier: FrontierParams::default(),
            coverage: CoverageParams::default(),
            bridge_len: 2.0,
            frontier_links: 2,
        }
    }
}

pub fn frontier_node_id(cluster: &FrontierCluster) -> NodeId {
    NodeId::compose(FRONTIER_OWNER, cluster.key() as u32)
}

/// Belief-derived layers, kept up to date incrementally.
#[derive(Clone, Debug)]
pub struct Mapper {
    pub cfg: MapperConfig,
    pub field: DistanceField,
    pub gv: HybridTopoGraph,
    pub frontiers: Vec<FrontierCluster>,
}

impl Mapper {
    pub fn new(belief: &OccupancyGrid, cfg: MapperConfig) -> Self {
        let field = DistanceField::compute(belief, cfg.max_range);
        let gv = gv_layer(&field.gv_cells(), belief, &field, &cfg.skeleton);
        let frontiers = detect_frontiers(belief, &field, &cfg.frontier);
        Self {
            cfg,
            field,
            gv,
            frontiers,
        }
    }

    /// Folds in the cells that changed since the last call. Returns the GV
    /// layer delta.
    pub fn update(&mut self, belief: &OccupancyGrid, changed: &[usize]) -> GraphDelta {
        if changed.is_empty() {
            return GraphDelta::default();
        }
        let touched = update_gvd(belief, &mut self.field, changed);
        let delta = if touched.is_empty() {
            GraphDelta::default()
        } else {
            extract_gv_nodes(
                &self.field.gv_cells(),
                belief,
                &self.field,
                &self.cfg.skeleton,
                &self.gv,
            )
        };
        delta.apply(&mut self.gv);
        self.frontiers = update_frontiers(
            belief,
            &self.field,
            changed,
            &self.frontiers,
            &self.cfg.frontier,
        );
        delta
    }

    /// GV layer plus frontier and coverage nodes, with uncertain bridges
    /// between pieces that can see each other.
    pub fn build_graph(
        &self,
        belief: &OccupancyGrid,
        samples: &[CoverageSample],
    ) -> HybridTopoGraph {
        let mut g = self.gv.clone();
        let gv_nodes: Vec<TopoNode> = g.nodes().copied().collect();
        let occupied_pos: BTreeMap<(u64, u64), ()> = gv_nodes
            .iter()
            .map(|n| ((n.pos.x.to_bits(), n.pos.y.to_bits()), ()))
            .collect();

        for c in &self.frontiers {
            let Some(mut vp) = c.viewpoint else { continue };
            if occupied_pos.contains_key(&(vp.x.to_bits(), vp.y.to_bits())) {
                let Some(cell) = belief.index_of(vp) else {
                    continue;
                };
                match belief
                    .neighbors4(cell)
                    .find(|&n| belief.at(n) == crate::grid::Cell::Free)
                {
                    Some(n) => vp = belief.center_of(n),
                    None => continue,
                }
            }
            let id = frontier_node_id(c);
            g.add_node(TopoNode::new(id, NodeKind::Frontier, vp))
                .expect("frontier ids are unique");
            let mut near: Vec<(f64, NodeId)> = gv_nodes
                .iter()
                .filter(|n| belief.segment_all_free(n.pos, vp))
                .map(|n| (n.pos.dist(vp), n.id))
                .collect();
            near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, u) in near.iter().take(self.cfg.frontier_links) {
                let _ = g.add_edge(id, u, Certainty::Uncertain);
            }
        }

        let known: Vec<TopoNode> = g.nodes().copied().collect();
        for s in samples {
            if g.contains(s.id) {
                continue;
            }
            g.add_node(TopoNode::new(s.id, NodeKind::Coverage, s.pos))
                .expect("sample ids are unique");
            let best = known
                .iter()
                .filter(|n| belief.segment_avoids_occupied(n.pos, s.pos))
                .min_by(|a, b| {
                    a.pos
                        .dist(s.pos)
                        .total_cmp(&b.pos.dist(s.pos))
                        .then(a.id.cmp(&b.id))
                });
            if let Some(n) = best {
                let _ = g.add_edge(s.id, n.id, Certainty::Uncertain);
            }
        }
        bridge_components(&mut g, belief, self.cfg.bridge_len);
        g
    }
}

/// Joins connected components with the shortest uncertain edges that stay
/// clear of known obstacles, Kruskal style, up to `max_len`.
pub fn bridge_components(g: &mut HybridTopoGraph, belief: &OccupancyGrid, max_len: f64) {
    let nodes: Vec<TopoNode> = g.nodes().copied().collect();
    let index = g.index();
    let n = nodes.len();
    let mut comp: Vec<usize> = vec![usize::MAX; n];
    let mut ncomp = 0;
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        comp[s] = ncomp;
        while let Some(v) = stack.pop() {
            for &(u, _, _) in &index.adj[v] {
                if comp[u] == usize::MAX {
                    comp[u] = ncomp;
                    stack.push(u);
                }
            }
        }
        ncomp += 1;
    }
    if ncomp <= 1 {
        return;
    }
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if comp[i] == comp[j] {
                continue;
            }
            let d = nodes[i].pos.dist(nodes[j].pos);
            if d > 0.0 && d <= max_len {
                cand.push((d, i, j));
            }
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut uf: Vec<usize> = (0..ncomp).collect();
    fn find(uf: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while uf[r] != r {
            r = uf[r];
        }
        uf[x] = r;
        r
    }
    for (_, i, j) in cand {
        let (a, b) = (find(&mut uf, comp[i]), find(&mut uf, comp[j]));
        if a == b || !belief.segment_avoids_occupied(nodes[i].pos, nodes[j].pos) {
            continue;
        }
        uf[a.max(b)] = a.min(b);
        let _ = g.add_edge(nodes[i].id, nodes[j].id, Certainty::Uncertain);
    }
}
