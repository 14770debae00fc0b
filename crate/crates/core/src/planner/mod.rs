//! Per-robot target ranking, visiting order and waypoints.

mod atsp;
mod grid_path;

pub use atsp::{path_cost, solve_atsp, solve_exact, solve_heuristic, AtspSolution, EXACT_LIMIT};
pub use grid_path::{shortcut, CostField, GridParams};

use crate::error::ConfigError;
use crate::geom::Point2;
use crate::grid::{Cell, OccupancyGrid};
use crate::mapper::DistanceField;
use crate::topo_graph::{
    Certainty, GraphIndex, HybridTopoGraph, MinKey, NodeId, NodeKind, TopoNode,
};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

#[derive(Clone, Debug, PartialEq)]
pub struct PriorityParams {
    pub beta_c: f64,
    pub beta_s: f64,
    /// Targets sequenced per cycle.
    pub horizon: usize,
    pub gamma_d: f64,
}

impl Default for PriorityParams {
    fn default() -> Self {
        Self {
            beta_c: 0.3,
            beta_s: 0.1,
            horizon: 5,
            gamma_d: 1.0,
        }
    }
}

impl PriorityParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit = |name, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    name,
                    msg: format!("{v} not in [0, 1)"),
                })
            }
        };
        unit("beta_c", self.beta_c)?;
        unit("beta_s", self.beta_s)?;
        if self.horizon == 0 {
            return Err(ConfigError::Invalid {
                name: "horizon",
                msg: "must be at least 1".into(),
            });
        }
        if !(self.gamma_d >= 0.0) {
            return Err(ConfigError::Invalid {
                name: "gamma_d",
                msg: format!("{} is negative", self.gamma_d),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlannerConfig {
    pub priority: PriorityParams,
    pub grid: GridParams,
    pub sensor_range: f64,
    /// Graph nodes this close to the start seed the graph search, meters.
    pub graph_seed_radius: f64,
    /// Unknown-space targets are observed from a known cell within this
    /// fraction of the sensor range.
    pub goal_reach_ratio: f64,
    /// Nodes within this many hops of another robot's node are boundary nodes.
    pub boundary_hops: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            priority: PriorityParams::default(),
            grid: GridParams::default(),
            sensor_range: 3.0,
            graph_seed_radius: 3.0,
            goal_reach_ratio: 0.7,
            boundary_hops: 2,
        }
    }
}

pub fn priority(gain: f64, cost: f64, self_flag: bool, p: &PriorityParams) -> f64 {
    gain - p.beta_c * cost + p.beta_s * if self_flag { 1.0 } else { 0.0 }
}

/// Min-max scaling to [0, 1]; all-equal input maps to `degenerate`.
pub fn min_max(values: &[f64], degenerate: f64) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![degenerate; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Unknown cells within `range` of `p`.
pub fn information_gain(belief: &OccupancyGrid, p: Point2, range: f64) -> f64 {
    let r = (range / belief.resolution).ceil() as i64;
    let cx = (p.x / belief.resolution).floor() as i64;
    let cy = (p.y / belief.resolution).floor() as i64;
    let mut n = 0usize;
    for y in (cy - r).max(0)..=(cy + r).min(belief.height as i64 - 1) {
        for x in (cx - r).max(0)..=(cx + r).min(belief.width as i64 - 1) {
            let i = belief.idx(x as usize, y as usize);
            if belief.at(i) == Cell::Unknown && belief.center_of(i).dist(p) <= range {
                n += 1;
            }
        }
    }
    n as f64
}

/// Nodes labeled `me` whose label held through the last balance run and that
/// are more than `margin` hops from any node labeled otherwise.
pub fn self_flags(
    g: &HybridTopoGraph,
    labels: &BTreeMap<NodeId, usize>,
    stable: &BTreeSet<NodeId>,
    me: usize,
    margin: usize,
) -> BTreeSet<NodeId> {
    let mut hops: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut q = VecDeque::new();
    for (&v, &l) in labels {
        if l != me {
            hops.insert(v, 0);
            q.push_back(v);
        }
    }
    while let Some(v) = q.pop_front() {
        let h = hops[&v];
        if h >= margin {
            continue;
        }
        for (u, _) in g.neighbors(v) {
            if !hops.contains_key(&u) {
                hops.insert(u, h + 1);
                q.push_back(u);
            }
        }
    }
    labels
        .iter()
        .filter(|&(v, &l)| l == me && stable.contains(v) && !hops.contains_key(v))
        .map(|(&v, _)| v)
        .collect()
}

/// Exploration targets: frontier and coverage nodes (not dual nodes).
pub fn is_target(n: &TopoNode) -> bool {
    n.kind != NodeKind::Gv && !n.dual
}

/// Known free cell the robot drives to for observing `node`. Nodes on a
/// reachable free cell are their own goal; otherwise the cheapest reachable
/// cell within `reach` whose segment to the node avoids known obstacles.
pub fn goal_cell(
    node: &TopoNode,
    belief: &OccupancyGrid,
    grid: &CostField,
    reach: f64,
) -> Option<usize> {
    let own = belief.index_of(node.pos)?;
    if grid.reachable(own) {
        return Some(own);
    }
    let r = (reach / belief.resolution).ceil() as i64;
    let (cx, cy) = belief.xy(own);
    let mut best: Option<(f64, usize)> = None;
    for y in (cy as i64 - r).max(0)..=(cy as i64 + r).min(belief.height as i64 - 1) {
        for x in (cx as i64 - r).max(0)..=(cx as i64 + r).min(belief.width as i64 - 1) {
            let i = belief.idx(x as usize, y as usize);
            let c = grid.cost[i];
            if !c.is_finite() || belief.center_of(i).dist(node.pos) > reach {
                continue;
            }
            if best.is_some_and(|(bc, bi)| (bc, bi) <= (c, i)) {
                continue;
            }
            if belief.segment_avoids_occupied(belief.center_of(i), node.pos) {
                best = Some((c, i));
            }
        }
    }
    best.map(|(_, i)| i)
}

/// Grid costs to nearby graph nodes continued over the graph.
#[derive(Clone, Debug)]
pub struct DualLayer {
    pub from: Point2,
    graph_cost: Vec<f64>,
}

impl DualLayer {
    pub fn new(
        index: &GraphIndex,
        graph: &HybridTopoGraph,
        belief: &OccupancyGrid,
        grid: &CostField,
        from: Point2,
        seed_radius: f64,
    ) -> Self {
        let mut cost = vec![f64::INFINITY; index.len()];
        let mut heap = BinaryHeap::new();
        for (i, &id) in index.ids.iter().enumerate() {
            let n = graph.node(id).expect("indexed");
            if n.pos.dist(from) > seed_radius {
                continue;
            }
            if let Some(c) = belief
                .index_of(n.pos)
                .map(|c| grid.cost[c])
                .filter(|c| c.is_finite())
            {
                cost[i] = c;
                heap.push(MinKey::new(c, [i as u64, 0, 0]));
            }
        }
        while let Some(k) = heap.pop() {
            let v = k.tie[0] as usize;
            if k.d > cost[v] {
                continue;
            }
            for &(u, w, _) in &index.adj[v] {
                let nd = k.d + w;
                if nd < cost[u] {
                    cost[u] = nd;
                    heap.push(MinKey::new(nd, [u as u64, 0, 0]));
                }
            }
        }
        Self {
            from,
            graph_cost: cost,
        }
    }

    /// Graph route when there is one, else the grid cost to `goal`; never
    /// below the straight-line distance. `None` when neither exists.
    pub fn cost(
        &self,
        index: &GraphIndex,
        node: &TopoNode,
        goal: Option<usize>,
        grid: &CostField,
    ) -> Option<f64> {
        let via_graph = index
            .idx(node.id)
            .map(|i| self.graph_cost[i])
            .filter(|c| c.is_finite());
        let via_grid = goal.map(|g| grid.cost[g]).filter(|c| c.is_finite());
        via_graph
            .or(via_grid)
            .map(|c| c.max(self.from.dist(node.pos)))
    }
}

/// Cost from `from` to node `to`; infinite when unreachable.
pub fn dual_layer_cost(
    from: Point2,
    to: NodeId,
    graph: &HybridTopoGraph,
    belief: &OccupancyGrid,
    field: &DistanceField,
    cfg: &PlannerConfig,
) -> f64 {
    let (Some(node), Some(grid)) = (
        graph.node(to),
        CostField::compute(belief, field, from, &cfg.grid),
    ) else {
        return f64::INFINITY;
    };
    let index = graph.index();
    let layer = DualLayer::new(&index, graph, belief, &grid, from, cfg.graph_seed_radius);
    let goal = goal_cell(node, belief, &grid, cfg.goal_reach_ratio * cfg.sensor_range);
    layer
        .cost(&index, node, goal, &grid)
        .unwrap_or(f64::INFINITY)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanStatus {
    /// Targets in the robot's own partition were sequenced.
    Planned,
    /// Nothing reachable in the own partition; heading to the nearest target elsewhere.
    Fallback,
    /// Targets exist but none is reachable.
    Stuck,
    /// No targets anywhere.
    Complete,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub status: PlanStatus,
    pub waypoints: Vec<Point2>,
    /// Selected targets in visiting order.
    pub tour: Vec<NodeId>,
    /// First target and the cell the robot drives to for it.
    pub goal: Option<(NodeId, usize)>,
    /// Open tour length over the selected targets.
    pub tour_distance: f64,
    pub self_flags: BTreeSet<NodeId>,
    /// Reachable targets in the own partition.
    pub candidates: usize,
}

pub struct PlanRequest<'a> {
    pub pos: Point2,
    pub graph: &'a HybridTopoGraph,
    pub labels: &'a BTreeMap<NodeId, usize>,
    /// Partition index of this robot, if it has one.
    pub me: Option<usize>,
    pub stable: &'a BTreeSet<NodeId>,
    pub belief: &'a OccupancyGrid,
    pub field: &'a DistanceField,
    pub blacklist: &'a BTreeSet<NodeId>,
}

struct Candidate {
    node: TopoNode,
    goal: usize,
    cost: f64,
}

fn waypoints_to(req: &PlanRequest, grid: &CostField, goal: usize) -> Vec<Point2> {
    let path = grid.path_to(goal).expect("goal is reachable");
    let mut pts = shortcut(req.belief, req.field, &path);
    if pts.len() > 1 {
        pts.remove(0);
    }
    pts
}

pub fn plan_cycle(req: &PlanRequest, cfg: &PlannerConfig) -> Plan {
    let mut plan = Plan {
        status: PlanStatus::Complete,
        waypoints: Vec::new(),
        tour: Vec::new(),
        goal: None,
        tour_distance: 0.0,
        self_flags: BTreeSet::new(),
        candidates: 0,
    };
    let all: Vec<TopoNode> = req
        .graph
        .nodes()
        .filter(|n| is_target(n))
        .copied()
        .collect();
    if all.is_empty() {
        return plan;
    }
    plan.status = PlanStatus::Stuck;
    let Some(grid) = CostField::compute(req.belief, req.field, req.pos, &cfg.grid) else {
        return plan;
    };
    let index = req.graph.index();
    let layer = DualLayer::new(
        &index,
        req.graph,
        req.belief,
        &grid,
        req.pos,
        cfg.graph_seed_radius,
    );
    let reach = cfg.goal_reach_ratio * cfg.sensor_range;
    let candidate = |n: &TopoNode| -> Option<Candidate> {
        if req.blacklist.contains(&n.id) {
            return None;
        }
        let goal = goal_cell(n, req.belief, &grid, reach)?;
        let cost = layer.cost(&index, n, Some(goal), &grid)?;
        Some(Candidate {
            node: *n,
            goal,
            cost,
        })
    };

    let mine: Vec<Candidate> = match req.me {
        Some(me) => all
            .iter()
            .filter(|n| req.labels.get(&n.id) == Some(&me))
            .filter(|n| {
                req.graph
                    .neighbors(n.id)
                    .any(|(_, e)| e.certainty == Certainty::Uncertain)
            })
            .filter_map(candidate)
            .collect(),
        None => Vec::new(),
    };
    if let Some(me) = req.me {
        plan.self_flags = self_flags(req.graph, req.labels, req.stable, me, cfg.boundary_hops);
    }
    plan.candidates = mine.len();

    if mine.is_empty() {
        let nearest = all
            .iter()
            .filter_map(candidate)
            .min_by(|a, b| a.cost.total_cmp(&b.cost).then(a.node.id.cmp(&b.node.id)));
        if let Some(c) = nearest {
            plan.status = PlanStatus::Fallback;
            plan.waypoints = waypoints_to(req, &grid, c.goal);
            plan.tour = vec![c.node.id];
            plan.goal = Some((c.node.id, c.goal));
            plan.tour_distance = c.cost;
        }
        return plan;
    }

    let gains: Vec<f64> = mine
        .iter()
        .map(|c| information_gain(req.belief, c.node.pos, cfg.sensor_range))
        .collect();
    let costs: Vec<f64> = mine.iter().map(|c| c.cost).collect();
    let gn = min_max(&gains, 1.0);
    let cn = min_max(&costs, 0.0);
    let mut ranked: Vec<(f64, usize)> = (0..mine.len())
        .map(|k| {
            (
                priority(
                    gn[k],
                    cn[k],
                    plan.self_flags.contains(&mine[k].node.id),
                    &cfg.priority,
                ),
                k,
            )
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(mine[a.1].node.id.cmp(&mine[b.1].node.id))
    });
    let chosen: Vec<&Candidate> = ranked
        .iter()
        .take(cfg.priority.horizon)
        .map(|&(_, k)| &mine[k])
        .collect();

    let n = chosen.len();
    let mut m = vec![vec![0.0; n + 1]; n + 1];
    for (j, c) in chosen.iter().enumerate() {
        m[0][j + 1] = c.cost;
    }
    for (i, a) in chosen.iter().enumerate() {
        let from = req.belief.center_of(a.goal);
        let g = CostField::compute(req.belief, req.field, from, &cfg.grid)
            .expect("goal is on the grid");
        let l = DualLayer::new(
            &index,
            req.graph,
            req.belief,
            &g,
            from,
            cfg.graph_seed_radius,
        );
        for (j, b) in chosen.iter().enumerate() {
            if i != j {
                // goals are mutually reachable through the robot's cell, so this stays finite
                m[i + 1][j + 1] = l
                    .cost(&index, &b.node, Some(b.goal), &g)
                    .unwrap_or(a.cost + b.cost);
            }
        }
    }
    let sol = solve_atsp(&m);
    let first = chosen[sol.order[0] - 1];
    plan.status = PlanStatus::Planned;
    plan.tour = sol.order.iter().map(|&k| chosen[k - 1].node.id).collect();
    plan.tour_distance = sol.cost;
    plan.goal = Some((first.node.id, first.goal));
    plan.waypoints = waypoints_to(req, &grid, first.goal);
    plan
}
