//! Ground-truth world, range sensing, unicycle kinematics and the episode loop.

mod episode;
mod report;
mod scenario;

pub use episode::{
    reachable_cells, run_episode, BalanceRecord, CoveragePoint, CycleRecord, EpisodeMetrics,
    PoseRecord, SimParams, Variant,
};
pub use report::{summary_csv, TourStats};
pub use scenario::{parse_scenario, Scenario, StartPose};

use crate::error::ConfigError;
use crate::geom::{wrap_angle, Point2};
use crate::grid::{Cell, OccupancyGrid};
use serde::{Deserialize, Serialize};

pub const DEFAULT_RAYS: usize = 360;
/// Forward motion is allowed only below this heading error.
pub const HEADING_GATE: f64 = std::f64::consts::PI / 6.0;

/// Casts `n_rays` rays at bearings `2*pi*k/n` from `pos` and copies what they
/// see from `world` into `belief`. Returns the indices of cells that changed.
pub fn sense(
    world: &OccupancyGrid,
    belief: &mut OccupancyGrid,
    pos: Point2,
    range: f64,
    n_rays: usize,
) -> Vec<usize> {
    let mut changed = Vec::new();
    for k in 0..n_rays {
        let a = std::f64::consts::TAU * k as f64 / n_rays as f64;
        let end = pos + Point2::new(a.cos(), a.sin()) * range;
        world.walk_segment(pos, end, |x, y| {
            if !world.in_bounds(x, y) {
                return false;
            }
            let i = world.idx(x as usize, y as usize);
            let truth = world.at(i);
            if belief.at(i) == Cell::Unknown {
                belief.set_at(i, truth);
                changed.push(i);
            }
            truth != Cell::Occupied
        });
    }
    changed.sort_unstable();
    changed.dedup();
    changed
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub id: u32,
    pub pos: Point2,
    pub heading: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub tour_distance: f64,
}

impl RobotState {
    pub fn new(id: u32, pos: Point2, heading: f64, v_max: f64, omega_max: f64) -> Self {
        Self {
            id,
            pos,
            heading,
            v_max,
            omega_max,
            tour_distance: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub state: RobotState,
    /// Number of leading waypoints reached during the step.
    pub consumed: usize,
    /// Motion was cut short by a ground-truth obstacle.
    pub collided: bool,
}

const REACHED: f64 = 1e-3;
const COLLISION_PROBE: f64 = 0.01;

/// Moves `from` toward `to` unless a ground-truth obstacle is in the way;
/// returns the reached point and whether contact happened.
fn move_checked(world: &OccupancyGrid, from: Point2, to: Point2) -> (Point2, bool) {
    let len = from.dist(to);
    let n = (len / COLLISION_PROBE).ceil().max(1.0) as usize;
    let mut last = from;
    for k in 1..=n {
        let p = from + (to - from) * (k as f64 / n as f64);
        match world.cell_of(p) {
            Some((x, y)) if world.get(x, y) != Cell::Occupied => last = p,
            _ => return (last, true),
        }
    }
    (to, false)
}

/// Unicycle waypoint follower: turns toward the next waypoint at up to
/// `omega_max`, and once the heading error is under 30 degrees advances along
/// the segment to it at `v_max * cos(error)`. Several waypoints can be passed
/// in one step.
pub fn step_robot(
    state: &RobotState,
    waypoints: &[Point2],
    dt: f64,
    world: &OccupancyGrid,
) -> StepResult {
    let mut s = state.clone();
    let mut consumed = 0;
    let mut collided = false;
    let mut rot_left = s.omega_max * dt;
    let mut lin_left = s.v_max * dt;
    if dt <= 0.0 {
        return StepResult {
            state: s,
            consumed,
            collided,
        };
    }
    while let Some(&wp) = waypoints.get(consumed) {
        let d = s.pos.dist(wp);
        if d < REACHED {
            consumed += 1;
            continue;
        }
        let err = wrap_angle((wp.y - s.pos.y).atan2(wp.x - s.pos.x) - s.heading);
        let rot = err.clamp(-rot_left, rot_left);
        s.heading = wrap_angle(s.heading + rot);
        rot_left -= rot.abs();
        let rest = err - rot;
        if rest.abs() >= HEADING_GATE || lin_left <= 0.0 {
            break;
        }
        let step = (lin_left * rest.cos()).min(d);
        let target = s.pos + (wp - s.pos) * (step / d);
        let reaches = step >= d;
        let (reached, hit) = move_checked(world, s.pos, target);
        let moved = s.pos.dist(reached);
        s.tour_distance += moved;
        s.pos = reached;
        lin_left -= moved;
        if hit {
            collided = true;
            break;
        }
        if reaches {
            s.pos = wp;
            consumed += 1;
        } else {
            break;
        }
    }
    StepResult {
        state: s,
        consumed,
        collided,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimClock {
    pub tick: u64,
    pub dt: f64,
    pub replan_period: f64,
    pub comm_period: f64,
    replan_every: u64,
    comm_every: u64,
}

impl SimClock {
    pub fn new(dt: f64, replan_period: f64, comm_period: f64) -> Result<Self, ConfigError> {
        if !(dt > 0.0) {
            return Err(ConfigError::Invalid {
                name: "dt",
                msg: "must be > 0".into(),
            });
        }
        let ratio = |p: f64, name| {
            let r = p / dt;
            if r < 1.0 - 1e-9 || (r - r.round()).abs() > 1e-9 {
                Err(ConfigError::Invalid {
                    name,
                    msg: format!("{p} is not a multiple of dt {dt}"),
                })
            } else {
                Ok(r.round() as u64)
            }
        };
        Ok(Self {
            tick: 0,
            dt,
            replan_period,
            comm_period,
            replan_every: ratio(replan_period, "replan_period")?,
            comm_every: ratio(comm_period, "comm_period")?,
        })
    }

    pub fn t(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn is_replan(&self) -> bool {
        self.tick % self.replan_every == 0
    }

    pub fn is_comm(&self) -> bool {
        self.tick % self.comm_every == 0
    }

    pub fn advance(&mut self) {
        self.tick += 1;
    }
}
