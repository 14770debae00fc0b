//! Weighted topological graph Voronoi partitioning for balanced multi-robot
//! exploration, plus a deterministic grid-world simulator to drive it.

pub mod balancer;
pub mod error;
pub mod geom;
pub mod grid;
pub mod mapper;
pub mod network;
pub mod partition;
pub mod planner;
pub mod topo_graph;
pub mod world_sim;

pub use balancer::{balance, BalanceConfig, BalanceOutcome, FreeSpace};
pub use error::{CodecError, ConfigError, GraphError, PartitionError, ScenarioError};
pub use geom::Point2;
pub use grid::{Cell, OccupancyGrid};
pub use mapper::{Mapper, MapperConfig};
pub use network::{exchange_and_fuse, neighbors, CommGraph, ExchangeConfig, Message, Payload};
pub use partition::{graph_voronoi, Metric, PartitionResult, PowerPointSet};
pub use planner::{
    plan_cycle, solve_atsp, Plan, PlanRequest, PlanStatus, PlannerConfig, PriorityParams,
};
pub use topo_graph::{
    merge_graphs, shortest_path, Certainty, HybridTopoGraph, NodeId, NodeKind, TopoEdge, TopoNode,
};
pub use world_sim::{parse_scenario, run_episode, EpisodeMetrics, Scenario, SimParams, Variant};
