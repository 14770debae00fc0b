//! Multi-robot exploration episode: sense, exchange, balance, plan, move.

use super::{sense, step_robot, RobotState, Scenario, SimClock, DEFAULT_RAYS};
use crate::balancer::{balance, insert_dual_nodes, virtual_center, BalanceConfig, TraceRow};
use crate::error::ConfigError;
use crate::geom::Point2;
use crate::grid::{Cell, OccupancyGrid};
use crate::mapper::{retire, sample_coverage, sample_seed, CoverageSample, Mapper, MapperConfig};
use crate::network::{exchange_and_fuse, neighbors, CommGraph, ExchangeConfig, RobotShare};
use crate::partition::{graph_voronoi, Metric, PartitionResult, PowerPointSet};
use crate::planner::{plan_cycle, PlanRequest, PlanStatus, PlannerConfig};
use crate::topo_graph::{
    merge_graphs, Certainty, HybridTopoGraph, IdAllocator, NodeId, NodeKind, TopoNode,
    RESERVED_OWNER_BASE,
};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Variant {
    /// Virtual centers, balanced weights, tour feedback.
    Full,
    /// Weights pinned to zero.
    NoWeight,
    /// Centers at the node nearest each robot.
    PosVor,
    /// No tour feedback in the load.
    NoFB,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::NoWeight,
        Variant::PosVor,
        Variant::NoFB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoWeight => "noweight",
            Variant::PosVor => "posvor",
            Variant::NoFB => "nofb",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                format!("unknown variant `{s}` (expected full, noweight, posvor or nofb)")
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimParams {
    pub seed: u64,
    /// Use only the first `robots` starts; all of them when `None`.
    pub robots: Option<usize>,
    pub dt: f64,
    pub replan_period: f64,
    pub comm_period: f64,
    /// Simulated-time cap, seconds.
    pub max_time: f64,
    pub v_max: f64,
    pub omega_max: f64,
    /// Overrides the scenario's sensor range when set, meters.
    pub sensor_range: Option<f64>,
    pub n_rays: usize,
    pub comm_range: f64,
    pub multi_hop: bool,
    pub coverage_target: f64,
    pub merge_radius: f64,
    pub balance: BalanceConfig,
    pub planner: PlannerConfig,
    pub mapper: MapperConfig,
    /// Replans without any motion plan, for every robot, before the episode is declared stuck.
    pub trapped_replans: usize,
    /// Replans spent chasing one target before it is given up.
    pub stale_replans: usize,
    pub record_trajectory: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            seed: 0,
            robots: None,
            dt: 0.1,
            replan_period: 1.0,
            comm_period: 1.0,
            max_time: 600.0,
            v_max: 1.2,
            omega_max: 1.57,
            sensor_range: None,
            n_rays: DEFAULT_RAYS,
            comm_range: 15.0,
            multi_hop: false,
            coverage_target: 0.98,
            merge_radius: crate::topo_graph::DEFAULT_MERGE_RADIUS,
            balance: BalanceConfig::default(),
            planner: PlannerConfig::default(),
            mapper: MapperConfig::default(),
            trapped_replans: 30,
            stale_replans: 15,
            record_trajectory: false,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let pos = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    name,
                    msg: format!("{v} must be positive"),
                })
            }
        };
        pos("max_time", self.max_time)?;
        pos("v_max", self.v_max)?;
        pos("omega_max", self.omega_max)?;
        if let Some(r) = self.sensor_range {
            pos("sensor_range", r)?;
        }
        if self.comm_range < 0.0 {
            return Err(ConfigError::Invalid {
                name: "comm_range",
                msg: "must be >= 0".into(),
            });
        }
        if !(self.coverage_target > 0.0 && self.coverage_target <= 1.0) {
            return Err(ConfigError::Invalid {
                name: "coverage_target",
                msg: "must be in (0, 1]".into(),
            });
        }
        if self.n_rays == 0 {
            return Err(ConfigError::Invalid {
                name: "n_rays",
                msg: "must be >= 1".into(),
            });
        }
        self.balance.validate()?;
        self.planner.priority.validate()?;
        SimClock::new(self.dt, self.replan_period, self.comm_period).map(|_| ())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleRecord {
    pub t: f64,
    pub robot: u32,
    pub status: String,
    pub candidates: usize,
    pub goal: Option<u64>,
    /// Effective load used in the last balance run.
    pub load: f64,
    /// Open tour estimate over the selected targets.
    pub tour_estimate: f64,
    pub center: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BalanceRecord {
    pub t: f64,
    /// Lowest robot id of the communicating group.
    pub group: u32,
    pub iter: usize,
    pub max_load: f64,
    pub min_load: f64,
    pub spread: f64,
    pub max_step: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoveragePoint {
    pub t: f64,
    /// Explored reachable area, square meters.
    pub explored: f64,
    pub fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PoseRecord {
    pub t: f64,
    pub robot: u32,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeMetrics {
    pub variant: Variant,
    pub seed: u64,
    /// Coverage target reached.
    pub completed: bool,
    /// Every robot went without a plan for too long while coverage was short.
    pub trapped: bool,
    /// Time the target was reached, or the time the episode stopped.
    pub time: f64,
    pub coverage: f64,
    pub reachable_cells: usize,
    /// Per robot, in id order.
    pub tour_distances: Vec<(u32, f64)>,
    pub coverage_curve: Vec<CoveragePoint>,
    pub balance_trace: Vec<BalanceRecord>,
    pub cycles: Vec<CycleRecord>,
    pub trajectory: Vec<PoseRecord>,
    pub collisions: usize,
    pub bytes_sent: usize,
    pub final_graph: HybridTopoGraph,
    pub final_labels: BTreeMap<NodeId, usize>,
}

impl EpisodeMetrics {
    /// Largest minus smallest per-robot tour distance.
    pub fn tour_gap(&self) -> f64 {
        let d = self.tour_distances.iter().map(|&(_, d)| d);
        d.clone().fold(f64::NEG_INFINITY, f64::max) - d.fold(f64::INFINITY, f64::min)
    }
}

/// Owner id for dual nodes created while `robot` leads a group.
fn dual_owner(robot: u32) -> u32 {
    robot | 0x8000_0000
}

/// Free cells 4-connected to any start.
pub fn reachable_cells(world: &OccupancyGrid, starts: &[Point2]) -> Vec<bool> {
    let mut seen = vec![false; world.len()];
    let mut q = VecDeque::new();
    for &s in starts {
        if let Some(i) = world.index_of(s) {
            if world.at(i) == Cell::Free && !seen[i] {
                seen[i] = true;
                q.push_back(i);
            }
        }
    }
    while let Some(c) = q.pop_front() {
        for n in world.neighbors4(c) {
            if !seen[n] && world.at(n) == Cell::Free {
                seen[n] = true;
                q.push_back(n);
            }
        }
    }
    seen
}

struct Robot {
    state: RobotState,
    belief: OccupancyGrid,
    mapper: Mapper,
    pending: BTreeSet<usize>,
    own_samples: Vec<CoverageSample>,
    heard_samples: BTreeMap<NodeId, CoverageSample>,
    sample_ids: IdAllocator,
    dual_ids: IdAllocator,
    duals: Vec<TopoNode>,
    graph: HybridTopoGraph,
    waypoints: Vec<Point2>,
    goal: Option<(NodeId, usize)>,
    goal_age: usize,
    blacklist: BTreeSet<NodeId>,
    idle: usize,
    last_tour: f64,
    last_load: f64,
    center: Option<NodeId>,
}

impl Robot {
    fn samples(&self) -> Vec<CoverageSample> {
        let mut all: BTreeMap<NodeId, CoverageSample> = self.heard_samples.clone();
        for s in &self.own_samples {
            all.insert(s.id, *s);
        }
        all.into_values().collect()
    }

    /// Belief-derived graph plus the duals this robot holds, each linked to
    /// nearby nodes it can see.
    fn rebuild_graph(&mut self, link_radius: f64) {
        let mut g = self.mapper.build_graph(&self.belief, &self.samples());
        let base: Vec<TopoNode> = g.nodes().copied().collect();
        for d in &self.duals {
            if g.add_node(*d).is_err() {
                continue;
            }
            for n in &base {
                if n.pos.dist(d.pos) <= link_radius
                    && n.pos != d.pos
                    && self.belief.segment_all_free(n.pos, d.pos)
                {
                    let _ = g.add_edge(d.id, n.id, Certainty::Uncertain);
                }
            }
        }
        self.graph = g;
    }
}

/// Node used as a robot's center when it has no usable partition: the
/// nearest node it can see, else the nearest node.
fn nearest_center(
    g: &HybridTopoGraph,
    belief: &OccupancyGrid,
    pos: Point2,
    taken: &BTreeSet<NodeId>,
) -> Option<NodeId> {
    g.nearest_node(pos, |n| {
        !taken.contains(&n.id) && belief.segment_avoids_occupied(pos, n.pos)
    })
    .or_else(|| g.nearest_node(pos, |n| !taken.contains(&n.id)))
}

struct GroupResult {
    graph: HybridTopoGraph,
    partition: Option<PartitionResult>,
    stable: BTreeSet<NodeId>,
    /// Center index per robot id.
    index_of: BTreeMap<u32, usize>,
    loads: Vec<f64>,
    trace: Vec<TraceRow>,
    converged: bool,
}

pub fn run_episode(
    scenario: &Scenario,
    params: &SimParams,
    variant: Variant,
) -> Result<EpisodeMetrics, ConfigError> {
    params.validate()?;
    let n_robots = params.robots.unwrap_or(scenario.starts.len());
    if n_robots == 0 || n_robots > scenario.starts.len() {
        return Err(ConfigError::Invalid {
            name: "robots",
            msg: format!(
                "{n_robots} requested, scenario has {} starts",
                scenario.starts.len()
            ),
        });
    }
    let world = &scenario.world;
    let range = params.sensor_range.or(scenario.sensor_range).unwrap_or(3.0);
    let mut planner_cfg = params.planner.clone();
    planner_cfg.sensor_range = range;
    let mut mapper_cfg = params.mapper.clone();
    mapper_cfg.frontier.sensor_range = range;
    let mut bcfg = params.balance.clone();
    bcfg.seed ^= params.seed;
    let link_radius = 2.0 * bcfg.dual_radius;

    let starts = &scenario.starts[..n_robots];
    let reach = reachable_cells(world, &starts.iter().map(|s| s.pos).collect::<Vec<_>>());
    let reachable = reach.iter().filter(|&&r| r).count().max(1);
    let cell_area = world.resolution * world.resolution;

    let mut robots: Vec<Robot> = starts
        .iter()
        .map(|s| {
            let belief = OccupancyGrid::unknown(world.width, world.height, world.resolution);
            let mapper = Mapper::new(&belief, mapper_cfg.clone());
            Robot {
                state: RobotState::new(s.id, s.pos, s.heading, params.v_max, params.omega_max),
                belief,
                mapper,
                pending: BTreeSet::new(),
                own_samples: Vec::new(),
                heard_samples: BTreeMap::new(),
                sample_ids: IdAllocator::new(s.id),
                dual_ids: IdAllocator::new(dual_owner(s.id)),
                duals: Vec::new(),
                graph: HybridTopoGraph::new(),
                waypoints: Vec::new(),
                goal: None,
                goal_age: 0,
                blacklist: BTreeSet::new(),
                idle: 0,
                last_tour: 0.0,
                last_load: 0.0,
                center: None,
            }
        })
        .collect();

    let mut clock = SimClock::new(params.dt, params.replan_period, params.comm_period)?;
    let mut explored = vec![false; world.len()];
    let mut explored_count = 0usize;
    let mut weights: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    let mut met: BTreeSet<(u32, u32)> = BTreeSet::new();
    let mut prev_labels: BTreeMap<NodeId, u32> = BTreeMap::new();
    let xcfg = ExchangeConfig {
        merge_radius: params.merge_radius,
        drop_probability: 0.0,
        seed: params.seed,
    };

    let mut m = EpisodeMetrics {
        variant,
        seed: params.seed,
        completed: false,
        trapped: false,
        time: 0.0,
        coverage: 0.0,
        reachable_cells: reachable,
        tour_distances: Vec::new(),
        coverage_curve: Vec::new(),
        balance_trace: Vec::new(),
        cycles: Vec::new(),
        trajectory: Vec::new(),
        collisions: 0,
        bytes_sent: 0,
        final_graph: HybridTopoGraph::new(),
        final_labels: BTreeMap::new(),
    };

    loop {
        let t = clock.t();
        for r in robots.iter_mut() {
            let changed = sense(world, &mut r.belief, r.state.pos, range, params.n_rays);
            for &c in &changed {
                if reach[c] && r.belief.at(c) == Cell::Free && !explored[c] {
                    explored[c] = true;
                    explored_count += 1;
                }
            }
            r.pending.extend(changed);
        }
        let coverage = explored_count as f64 / reachable as f64;
        m.coverage = coverage;
        if clock.is_replan() {
            m.coverage_curve.push(CoveragePoint {
                t,
                explored: explored_count as f64 * cell_area,
                fraction: coverage,
            });
        }
        if coverage >= params.coverage_target {
            m.completed = true;
            m.time = t;
            break;
        }
        if t >= params.max_time {
            m.time = t;
            break;
        }

        let poses: Vec<(u32, Point2)> = robots.iter().map(|r| (r.state.id, r.state.pos)).collect();
        let comm = neighbors(&poses, params.comm_range, params.multi_hop);

        if clock.is_comm() {
            let shares: Vec<RobotShare> = robots
                .iter()
                .map(|r| RobotShare {
                    id: r.state.id,
                    belief: r.belief.clone(),
                    graph: r.graph.clone(),
                    power_points: None,
                    load: r.last_load,
                })
                .collect();
            let (fused, bytes) = exchange_and_fuse(&shares, &comm, clock.tick, &xcfg);
            m.bytes_sent += bytes;
            for (r, f) in robots.iter_mut().zip(fused) {
                r.belief = f.belief;
                r.pending.extend(f.changed);
                for n in f.graph.nodes() {
                    let owner = n.id.owner();
                    if n.kind != NodeKind::Coverage
                        || owner >= RESERVED_OWNER_BASE
                        || owner == r.state.id
                    {
                        continue;
                    }
                    if n.dual {
                        if !r.duals.iter().any(|d| d.id == n.id) {
                            r.duals.push(*n);
                        }
                    } else if let Some(cell) = r.belief.index_of(n.pos) {
                        r.heard_samples.insert(
                            n.id,
                            CoverageSample {
                                id: n.id,
                                pos: n.pos,
                                cell,
                            },
                        );
                    }
                }
            }
        }

        if clock.is_replan() {
            for r in robots.iter_mut() {
                let changed: Vec<usize> = std::mem::take(&mut r.pending).into_iter().collect();
                r.mapper.update(&r.belief, &changed);
                retire(&mut r.own_samples, &r.belief);
                let belief = &r.belief;
                r.heard_samples
                    .retain(|_, s| belief.at(s.cell) == Cell::Unknown);
                let existing = r.samples();
                let seed = sample_seed(params.seed, r.state.id, clock.tick);
                let fresh = sample_coverage(
                    &r.belief,
                    r.state.pos,
                    &existing,
                    &mapper_cfg.coverage,
                    &mut r.sample_ids,
                    seed,
                );
                r.own_samples.extend(fresh);
                r.rebuild_graph(link_radius);
            }

            let mut results: BTreeMap<u32, (usize, u32)> = BTreeMap::new();
            let mut groups: Vec<GroupResult> = Vec::new();
            for comp in comm.components() {
                let gr = balance_group(
                    &comp,
                    &comm,
                    &mut robots,
                    variant,
                    &bcfg,
                    &planner_cfg,
                    params.merge_radius,
                    &mut weights,
                    &mut met,
                    &prev_labels,
                );
                m.balance_trace.extend(group_trace(t, comp[0], &gr));
                for &id in &comp {
                    results.insert(id, (groups.len(), comp[0]));
                }
                groups.push(gr);
            }

            prev_labels.clear();
            for gr in &groups {
                if let Some(p) = &gr.partition {
                    let robot_of: BTreeMap<usize, u32> =
                        gr.index_of.iter().map(|(&r, &i)| (i, r)).collect();
                    for (&v, &l) in &p.label {
                        prev_labels.insert(v, robot_of[&l]);
                    }
                }
            }

            for r in robots.iter_mut() {
                let (gi, _) = results[&r.state.id];
                let gr = &groups[gi];
                let me = gr.index_of.get(&r.state.id).copied();
                let labels = gr
                    .partition
                    .as_ref()
                    .map(|p| p.label.clone())
                    .unwrap_or_default();
                let req = PlanRequest {
                    pos: r.state.pos,
                    graph: &gr.graph,
                    labels: &labels,
                    me,
                    stable: &gr.stable,
                    belief: &r.belief,
                    field: &r.mapper.field,
                    blacklist: &r.blacklist,
                };
                let plan = plan_cycle(&req, &planner_cfg);
                match plan.goal {
                    Some((id, cell)) if r.goal.map(|g| g.0) == Some(id) => {
                        r.goal_age += 1;
                        let at_goal = r.belief.index_of(r.state.pos) == Some(cell);
                        if at_goal || r.goal_age >= params.stale_replans {
                            log::debug!("robot {} gives up target {id}", r.state.id);
                            r.blacklist.insert(id);
                        }
                    }
                    other => {
                        r.goal = other;
                        r.goal_age = 0;
                    }
                }
                r.waypoints = plan.waypoints.clone();
                r.last_tour = plan.tour_distance;
                r.last_load = me.and_then(|i| gr.loads.get(i).copied()).unwrap_or(0.0);
                if r.waypoints.is_empty() && plan.status != PlanStatus::Complete {
                    r.idle += 1;
                } else {
                    r.idle = 0;
                }
                m.cycles.push(CycleRecord {
                    t,
                    robot: r.state.id,
                    status: format!("{:?}", plan.status).to_lowercase(),
                    candidates: plan.candidates,
                    goal: plan.goal.map(|g| g.0 .0),
                    load: r.last_load,
                    tour_estimate: plan.tour_distance,
                    center: r.center.map(|c| c.0),
                });
            }
            if let Some(&(gi, _)) = results.get(&robots[0].state.id) {
                m.final_graph = groups[gi].graph.clone();
                m.final_labels = groups[gi]
                    .partition
                    .as_ref()
                    .map(|p| p.label.clone())
                    .unwrap_or_default();
            }
            if robots.iter().all(|r| r.idle >= params.trapped_replans) {
                m.trapped = true;
                m.time = t;
                break;
            }
        }

        for r in robots.iter_mut() {
            let res = step_robot(&r.state, &r.waypoints, params.dt, world);
            r.state = res.state;
            r.waypoints.drain(..res.consumed);
            if res.collided {
                m.collisions += 1;
                r.waypoints.clear();
            }
            if params.record_trajectory {
                m.trajectory.push(PoseRecord {
                    t: t + params.dt,
                    robot: r.state.id,
                    x: r.state.pos.x,
                    y: r.state.pos.y,
                    heading: r.state.heading,
                });
            }
        }
        clock.advance();
    }
    m.tour_distances = robots
        .iter()
        .map(|r| (r.state.id, r.state.tour_distance))
        .collect();
    Ok(m)
}

fn group_trace(t: f64, group: u32, gr: &GroupResult) -> Vec<BalanceRecord> {
    gr.trace
        .iter()
        .map(|r| BalanceRecord {
            t,
            group,
            iter: r.iter,
            max_load: r.max_load,
            min_load: r.min_load,
            spread: r.spread,
            max_step: r.max_step,
            converged: gr.converged,
        })
        .collect()
}

fn slot(robots: &[Robot], id: u32) -> usize {
    robots
        .iter()
        .position(|r| r.state.id == id)
        .expect("robot in group")
}

fn pair(a: u32, b: u32) -> (u32, u32) {
    (a.min(b), a.max(b))
}

/// Central stand-in for one synchronous balancing round of a communicating
/// group: merge the members' graphs, choose centers, balance, add duals.
#[allow(clippy::too_many_arguments)]
fn balance_group(
    comp: &[u32],
    comm: &CommGraph,
    robots: &mut [Robot],
    variant: Variant,
    bcfg: &BalanceConfig,
    pcfg: &PlannerConfig,
    merge_radius: f64,
    weights: &mut BTreeMap<(u32, u32), f64>,
    met: &mut BTreeSet<(u32, u32)>,
    prev_labels: &BTreeMap<NodeId, u32>,
) -> GroupResult {
    let leader = slot(robots, comp[0]);
    let others: Vec<HybridTopoGraph> = comp[1..]
        .iter()
        .map(|&id| robots[slot(robots, id)].graph.clone())
        .collect();
    let graph = merge_graphs(&robots[leader].graph, &others, merge_radius);
    let mut out = GroupResult {
        graph,
        partition: None,
        stable: BTreeSet::new(),
        index_of: BTreeMap::new(),
        loads: Vec::new(),
        trace: Vec::new(),
        converged: true,
    };
    if out.graph.is_empty() {
        return out;
    }

    // centers, in robot id order; duplicates move to the next free node
    let mut taken: BTreeSet<NodeId> = BTreeSet::new();
    let mut centers: Vec<(u32, NodeId)> = Vec::new();
    for &id in comp {
        let r = &robots[slot(robots, id)];
        let pick = match variant {
            Variant::PosVor => None,
            _ => {
                let mine: BTreeSet<NodeId> = prev_labels
                    .iter()
                    .filter(|&(v, &o)| o == id && out.graph.contains(*v))
                    .map(|(&v, _)| v)
                    .collect();
                let theirs: Vec<NodeId> = comp
                    .iter()
                    .filter(|&&o| o != id)
                    .filter_map(|&o| robots[slot(robots, o)].center)
                    .filter(|c| out.graph.contains(*c))
                    .collect();
                virtual_center(&out.graph, &mine, &theirs, r.state.pos)
                    .filter(|c| !taken.contains(c))
            }
        };
        let c = pick.or_else(|| nearest_center(&out.graph, &r.belief, r.state.pos, &taken));
        if let Some(c) = c {
            taken.insert(c);
            centers.push((id, c));
        }
    }
    for (k, &(id, _)) in centers.iter().enumerate() {
        out.index_of.insert(id, k);
    }
    for &id in comp {
        let c = centers.iter().find(|&&(r, _)| r == id).map(|&(_, c)| c);
        robots[slot(robots, id)].center = c;
    }
    if centers.is_empty() {
        return out;
    }

    let n = centers.len();
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &(a, _)) in centers.iter().enumerate() {
        for (j, &(b, _)) in centers.iter().enumerate() {
            if i != j && comm.connected(a, b) {
                nbrs[i].push(j);
                if met.insert(pair(a, b)) {
                    weights.insert(pair(a, b), 0.0);
                }
            }
        }
    }
    let mut w = vec![vec![0.0; n]; n];
    if variant != Variant::NoWeight {
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (centers[i].0, centers[j].0);
                let v = weights.get(&pair(a, b)).copied().unwrap_or(0.0);
                w[i][j] = if a < b { v } else { -v };
                w[j][i] = -w[i][j];
            }
        }
    }
    let mut pp =
        PowerPointSet::with_weights(centers.clone(), w).expect("antisymmetric by construction");
    let bias: Vec<f64> = centers
        .iter()
        .map(|&(id, _)| match variant {
            Variant::NoFB => 0.0,
            _ => pcfg.priority.gamma_d * robots[slot(robots, id)].last_tour,
        })
        .collect();

    let (res, stable, loads) = if variant == Variant::NoWeight {
        let res = graph_voronoi(&out.graph, &pp, Metric::Online).expect("centers are graph nodes");
        let loads: Vec<f64> = res.load.iter().zip(&bias).map(|(l, b)| l + b).collect();
        let stable = res.label.keys().copied().collect();
        (res, stable, loads)
    } else {
        let o = balance(&out.graph, &pp, bcfg, Metric::Online, &nbrs, Some(&bias))
            .expect("centers are graph nodes");
        pp = o.final_weights.clone();
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (centers[i].0, centers[j].0);
                let v = pp.weight(i, j);
                weights.insert(pair(a, b), if a < b { v } else { -v });
            }
        }
        out.trace = o.load_trace.clone();
        out.converged = o.converged;
        (o.final_partition, o.stable_nodes, o.final_loads)
    };

    // duals sampled beside overloaded nodes that changed hands
    let moved: BTreeSet<NodeId> = res
        .label
        .iter()
        .filter(|&(v, &l)| prev_labels.get(v).is_some_and(|&o| o != centers[l].0))
        .map(|(&v, _)| v)
        .collect();
    if !moved.is_empty() {
        let lead = &mut robots[leader];
        let before: BTreeSet<NodeId> = out.graph.node_ids().collect();
        let with = insert_dual_nodes(
            &out.graph,
            &res,
            bcfg,
            &lead.belief,
            &mut lead.dual_ids,
            Some(&moved),
        );
        for d in with.nodes().filter(|n| !before.contains(&n.id)) {
            lead.duals.push(*d);
        }
    }

    out.partition = Some(res);
    out.stable = stable;
    out.loads = loads;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world_sim::parse_scenario;

    fn room(w: usize, h: usize, starts: &[(f64, f64)]) -> Scenario {
        let mut text = format!("resolution 0.1\nrobots {}\n", starts.len());
        for (i, (x, y)) in starts.iter().enumerate() {
            text += &format!("start {i} {x} {y} 0\n");
        }
        for row in 0..h {
            let line: String = (0..w)
                .map(|c| {
                    if row == 0 || row == h - 1 || c == 0 || c == w - 1 {
                        '#'
                    } else {
                        '.'
                    }
                })
                .collect();
            text += &line;
            text.push('\n');
        }
        parse_scenario(&text).unwrap()
    }

    fn quick() -> SimParams {
        SimParams {
            max_time: 120.0,
            ..SimParams::default()
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert_eq!("NoFB".parse::<Variant>().unwrap(), Variant::NoFB);
        assert!("voronoi".parse::<Variant>().is_err());
    }

    #[test]
    fn reachable_ignores_sealed_pockets() {
        let mut sc = room(20, 20, &[(0.5, 0.5)]);
        for x in 10..15 {
            sc.world.set(x, 10, Cell::Occupied);
            sc.world.set(x, 14, Cell::Occupied);
        }
        for y in 10..15 {
            sc.world.set(10, y, Cell::Occupied);
            sc.world.set(14, y, Cell::Occupied);
        }
        let r = reachable_cells(&sc.world, &[Point2::new(0.5, 0.5)]);
        assert!(!r[sc.world.idx(12, 12)]);
        assert!(r[sc.world.idx(5, 5)]);
        assert!(!r[sc.world.idx(0, 0)]);
    }

    #[test]
    fn single_robot_covers_an_empty_room() {
        let sc = room(50, 50, &[(2.5, 2.5)]);
        let m = run_episode(&sc, &quick(), Variant::Full).unwrap();
        assert!(m.completed, "coverage {}", m.coverage);
        assert!(m.coverage >= 0.98);
        assert_eq!(m.collisions, 0);
        assert_eq!(m.tour_distances.len(), 1);
        assert_eq!(m.tour_gap(), 0.0);
    }

    #[test]
    fn episodes_are_deterministic() {
        let sc = room(40, 30, &[(0.5, 0.5), (0.9, 0.5)]);
        let a = run_episode(&sc, &quick(), Variant::Full).unwrap();
        let b = run_episode(&sc, &quick(), Variant::Full).unwrap();
        assert_eq!(a.time, b.time);
        assert_eq!(a.tour_distances, b.tour_distances);
        assert_eq!(a.cycles, b.cycles);
        assert_eq!(a.balance_trace, b.balance_trace);
    }

    #[test]
    fn two_robots_split_the_work() {
        let sc = room(60, 30, &[(0.5, 1.5), (0.9, 1.5)]);
        let m = run_episode(&sc, &quick(), Variant::Full).unwrap();
        assert!(m.completed);
        assert!(m.tour_distances.iter().all(|&(_, d)| d > 0.0));
        assert!(m.bytes_sent > 0);
        assert!(!m.coverage_curve.is_empty());
        assert!(m
            .coverage_curve
            .windows(2)
            .all(|w| w[0].explored <= w[1].explored));
    }

    #[test]
    fn noweight_never_moves_weights() {
        let sc = room(60, 30, &[(0.5, 1.5), (0.9, 1.5)]);
        let m = run_episode(&sc, &quick(), Variant::NoWeight).unwrap();
        assert!(m
            .balance_trace
            .iter()
            .all(|r| r.iter == 0 && r.max_step == 0.0));
    }

    #[test]
    fn robot_count_is_checked() {
        let sc = room(20, 20, &[(0.5, 0.5)]);
        let p = SimParams {
            robots: Some(2),
            ..quick()
        };
        assert!(run_episode(&sc, &p, Variant::Full).is_err());
    }
}
