//! Distributed weight iteration that equalizes exploration load across
//! neighboring partitions, plus virtual-center selection and dual nodes.

use crate::error::{ConfigError, PartitionError};
use crate::geom::Point2;
use crate::partition::{
    graph_voronoi_indexed, node_contributions, Metric, PartitionResult, PowerPointSet,
};
use crate::topo_graph::{Certainty, HybridTopoGraph, IdAllocator, NodeId, NodeKind, TopoNode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

#[derive(Clone, Debug, PartialEq)]
pub struct BalanceConfig {
    /// Weight step, meters.
    pub gamma: f64,
    /// Balance tolerance, meters.
    pub b_lambda: f64,
    pub max_iters: usize,
    /// A node whose removal changes the load by at least this much is overloaded.
    pub overload_threshold: f64,
    /// Dual nodes are sampled within this radius of the overloaded node, meters.
    pub dual_radius: f64,
    pub dual_attempts: usize,
    pub seed: u64,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            b_lambda: 10.0,
            max_iters: 200,
            overload_threshold: 20.0,
            dual_radius: 0.5,
            dual_attempts: 32,
            seed: 0,
        }
    }
}

impl BalanceConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |name, msg: &str| {
            Err(ConfigError::Invalid {
                name,
                msg: msg.into(),
            })
        };
        if !(self.gamma > 0.0) {
            return bad("gamma", "must be > 0");
        }
        if !(self.b_lambda > 0.0) {
            return bad("b_lambda", "must be > 0");
        }
        if self.max_iters == 0 {
            return bad("max_iters", "must be >= 1");
        }
        if !(self.overload_threshold > 0.0) {
            return bad("overload_threshold", "must be > 0");
        }
        if !(self.dual_radius > 0.0) {
            return bad("dual_radius", "must be > 0");
        }
        Ok(())
    }
}

/// One row of the convergence trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub max_load: f64,
    pub min_load: f64,
    pub spread: f64,
    /// Largest change of any single load since the previous iteration.
    pub max_step: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BalanceOutcome {
    pub converged: bool,
    pub iterations: usize,
    pub final_partition: PartitionResult,
    pub final_weights: PowerPointSet,
    pub load_trace: Vec<TraceRow>,
    /// Effective loads (load plus bias) of the final partition.
    pub final_loads: Vec<f64>,
    /// Nodes whose label was the same in every iteration of the run.
    pub stable_nodes: BTreeSet<NodeId>,
}

/// Symmetric neighbor lists over center indices.
pub type Neighbors = [Vec<usize>];

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// True when every neighbor pair is within tolerance.
pub fn within_tolerance(loads: &[f64], neighbors: &Neighbors, b_lambda: f64) -> bool {
    neighbors
        .iter()
        .enumerate()
        .all(|(i, ns)| ns.iter().all(|&j| (loads[j] - loads[i]).abs() <= b_lambda))
}

/// One synchronous round of weight updates.
///
/// For each neighbor pair whose load gap exceeds `b_lambda`, `w[i][j]` moves
/// by `gamma` toward the less loaded side. `center_distances`, when given,
/// caps the result below the center-to-center graph distance.
pub fn weight_step(
    loads: &[f64],
    neighbors: &Neighbors,
    weights: &PowerPointSet,
    cfg: &BalanceConfig,
    center_distances: Option<&[Vec<f64>]>,
) -> PowerPointSet {
    let mut out = weights.clone();
    for (i, ns) in neighbors.iter().enumerate() {
        for &j in ns.iter().filter(|&&j| j > i) {
            let delta = loads[j] - loads[i];
            if delta.abs() > cfg.b_lambda {
                out.set_weight(i, j, weights.weight(i, j) + cfg.gamma * sign(delta));
            }
        }
    }
    if let Some(d) = center_distances {
        out.clamp_feasible(d);
    }
    out
}

fn trace_row(iter: usize, loads: &[f64], prev: Option<&[f64]>) -> TraceRow {
    let max_load = loads.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_load = loads.iter().copied().fold(f64::INFINITY, f64::min);
    let max_step = prev.map_or(0.0, |p| {
        p.iter()
            .zip(loads)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    });
    let (max_load, min_load) = if loads.is_empty() {
        (0.0, 0.0)
    } else {
        (max_load, min_load)
    };
    TraceRow {
        iter,
        max_load,
        min_load,
        spread: max_load - min_load,
        max_step,
    }
}

/// Alternates partitioning and weight updates until every neighbor pair is
/// within `b_lambda` or `max_iters` rounds have run. Centers stay fixed.
///
/// `load_bias`, when given, is added to each robot's load before comparing
/// (used for the motion feedback term).
pub fn balance(
    g: &HybridTopoGraph,
    centers: &PowerPointSet,
    cfg: &BalanceConfig,
    metric: Metric,
    neighbors: &Neighbors,
    load_bias: Option<&[f64]>,
) -> Result<BalanceOutcome, PartitionError> {
    let index = g.index();
    let mut weights = centers.clone();
    let mut trace = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    let mut first_labels: Option<BTreeMap<NodeId, usize>> = None;
    let mut unstable: BTreeSet<NodeId> = BTreeSet::new();
    let mut iter = 0;
    loop {
        let res = graph_voronoi_indexed(&index, &weights, metric)?;
        let loads: Vec<f64> = match load_bias {
            Some(b) => res.load.iter().zip(b).map(|(l, b)| l + b).collect(),
            None => res.load.clone(),
        };
        trace.push(trace_row(iter, &loads, prev.as_deref()));
        match &first_labels {
            None => first_labels = Some(res.label.clone()),
            Some(f) => {
                for (v, l) in &res.label {
                    if f.get(v) != Some(l) {
                        unstable.insert(*v);
                    }
                }
            }
        }
        let converged = within_tolerance(&loads, neighbors, cfg.b_lambda);
        if converged || iter >= cfg.max_iters {
            let stable_nodes = res
                .label
                .keys()
                .filter(|v| !unstable.contains(v))
                .copied()
                .collect();
            return Ok(BalanceOutcome {
                converged,
                iterations: iter,
                final_partition: res,
                final_weights: weights,
                load_trace: trace,
                final_loads: loads,
                stable_nodes,
            });
        }
        weights = weight_step(
            &loads,
            neighbors,
            &weights,
            cfg,
            Some(&res.center_distances),
        );
        prev = Some(loads);
        iter += 1;
    }
}

/// CSV rows `iter,M_lambda,m_lambda,D_lambda` with a header line.
pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("iter,M_lambda,m_lambda,D_lambda\n");
    for r in trace {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6}",
            r.iter, r.max_load, r.min_load, r.spread
        );
    }
    out
}

/// Node of `my_partition` farthest (summed graph distance) from the
/// neighbors' centers. Ties go to the node nearest `robot_pos`, then the
/// lowest id. With no reachable neighbor centers, the node nearest
/// `robot_pos` is returned. `None` for an empty partition.
pub fn virtual_center(
    g: &HybridTopoGraph,
    my_partition: &BTreeSet<NodeId>,
    neighbor_centers: &[NodeId],
    robot_pos: Point2,
) -> Option<NodeId> {
    let index = g.index();
    let members: Vec<(NodeId, usize)> = my_partition
        .iter()
        .filter_map(|&v| index.idx(v).map(|i| (v, i)))
        .collect();
    if members.is_empty() {
        return None;
    }
    let mut score = vec![0.0; members.len()];
    for &c in neighbor_centers {
        let Some(ci) = index.idx(c) else { continue };
        let (d, _) = index.dijkstra(ci);
        if members.iter().any(|&(_, i)| !d[i].is_finite()) {
            continue;
        }
        for (s, &(_, i)) in score.iter_mut().zip(&members) {
            *s += d[i];
        }
    }
    let best = score.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    members
        .iter()
        .zip(&score)
        .filter(|(_, &s)| s >= best - 1e-9)
        .map(|(&(v, _), _)| (g.node(v).expect("indexed").pos.dist(robot_pos), v))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, v)| v)
}

/// Free-space queries against known space.
pub trait FreeSpace {
    fn is_free(&self, p: Point2) -> bool;
    fn segment_free(&self, a: Point2, b: Point2) -> bool;
}

/// Samples one dual node beside every overloaded partition node and wires it
/// to that node's neighbors. `only`, when given, restricts the candidates.
pub fn insert_dual_nodes(
    g: &HybridTopoGraph,
    res: &PartitionResult,
    cfg: &BalanceConfig,
    free_space: &dyn FreeSpace,
    ids: &mut IdAllocator,
    only: Option<&BTreeSet<NodeId>>,
) -> HybridTopoGraph {
    let mut out = g.clone();
    for c in 0..res.centers.len() {
        for (v, contrib) in node_contributions(res, c) {
            if contrib < cfg.overload_threshold || only.is_some_and(|s| !s.contains(&v)) {
                continue;
            }
            let Some(node) = g.node(v).copied() else {
                continue;
            };
            if node.dual {
                continue;
            }
            let crowded = out
                .nodes()
                .any(|n| n.dual && n.pos.dist(node.pos) <= cfg.dual_radius);
            if crowded {
                continue;
            }
            let nbrs: Vec<TopoNode> = g
                .neighbors(v)
                .map(|(u, _)| *g.node(u).expect("edge endpoint"))
                .collect();
            let mut rng =
                ChaCha8Rng::seed_from_u64(cfg.seed ^ v.0.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut placed = false;
            for _ in 0..cfg.dual_attempts {
                let a = rng.gen_range(0.0..std::f64::consts::TAU);
                let r = rng.gen_range(0.2 * cfg.dual_radius..=cfg.dual_radius);
                let p = node.pos + Point2::new(a.cos(), a.sin()) * r;
                if !free_space.is_free(p) {
                    continue;
                }
                let links: Vec<NodeId> = nbrs
                    .iter()
                    .filter(|u| u.pos.dist(p) > 0.0 && free_space.segment_free(p, u.pos))
                    .map(|u| u.id)
                    .collect();
                if links.is_empty() {
                    continue;
                }
                let mut dual = TopoNode::new(ids.next_id(), NodeKind::Coverage, p);
                dual.dual = true;
                out.add_node(dual).expect("fresh id");
                for u in links {
                    out.add_edge(dual.id, u, Certainty::Uncertain)
                        .expect("valid edge");
                }
                placed = true;
                break;
            }
            if !placed {
                log::debug!("no dual node placed beside {v}");
            }
        }
    }
    out
}
