//! 8-connected Dijkstra over known free cells, with a clearance penalty.

use crate::geom::Point2;
use crate::grid::{Cell, OccupancyGrid, N8};
use crate::mapper::DistanceField;
use crate::topo_graph::MinKey;
use std::collections::BinaryHeap;

#[derive(Clone, Debug, PartialEq)]
pub struct GridParams {
    /// Cells closer than this to an obstacle cost `tight_factor` per meter, meters.
    pub robot_radius: f64,
    pub tight_factor: f64,
    /// Cells closer than this cost `near_factor` per meter, meters.
    pub safe_distance: f64,
    pub near_factor: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            robot_radius: 0.2,
            tight_factor: 20.0,
            safe_distance: 0.5,
            near_factor: 4.0,
        }
    }
}

impl GridParams {
    pub fn cell_factor(&self, clearance: f64) -> f64 {
        if clearance < self.robot_radius {
            self.tight_factor
        } else if clearance < self.safe_distance {
            self.near_factor
        } else {
            1.0
        }
    }
}

/// Costs from one source cell to every known free cell it can reach.
#[derive(Clone, Debug)]
pub struct CostField {
    pub source: usize,
    pub cost: Vec<f64>,
    pred: Vec<u32>,
}

const NONE: u32 = u32::MAX;

impl CostField {
    /// Dijkstra from the cell containing `from`. The source cell is always
    /// usable; every other cell must be known free. Diagonal moves need both
    /// side cells free. `None` when `from` is off the grid.
    pub fn compute(
        belief: &OccupancyGrid,
        field: &DistanceField,
        from: Point2,
        params: &GridParams,
    ) -> Option<Self> {
        let source = belief.index_of(from)?;
        let n = belief.len();
        let mut cost = vec![f64::INFINITY; n];
        let mut pred = vec![NONE; n];
        let free = |i: usize| belief.at(i) == Cell::Free;
        cost[source] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(MinKey::new(0.0, [source as u64, 0, 0]));
        let r = belief.resolution;
        while let Some(k) = heap.pop() {
            let c = k.tie[0] as usize;
            if k.d > cost[c] {
                continue;
            }
            let (x, y) = belief.xy(c);
            for (dx, dy) in N8 {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if !belief.in_bounds(nx, ny) {
                    continue;
                }
                let nb = belief.idx(nx as usize, ny as usize);
                if !free(nb) {
                    continue;
                }
                if dx != 0 && dy != 0 {
                    let a = belief.idx(nx as usize, y);
                    let b = belief.idx(x, ny as usize);
                    if !free(a) || !free(b) {
                        continue;
                    }
                }
                let len = if dx != 0 && dy != 0 {
                    r * std::f64::consts::SQRT_2
                } else {
                    r
                };
                let f =
                    0.5 * (params.cell_factor(field.dist[c]) + params.cell_factor(field.dist[nb]));
                let nd = k.d + len * f;
                if nd < cost[nb] {
                    cost[nb] = nd;
                    pred[nb] = c as u32;
                    heap.push(MinKey::new(nd, [nb as u64, 0, 0]));
                }
            }
        }
        Some(Self { source, cost, pred })
    }

    pub fn reachable(&self, i: usize) -> bool {
        self.cost[i].is_finite()
    }

    /// Cells from the source to `target`, inclusive. `None` if unreachable.
    pub fn path_to(&self, target: usize) -> Option<Vec<usize>> {
        if !self.reachable(target) {
            return None;
        }
        let mut out = vec![target];
        let mut c = target;
        while c != self.source {
            c = self.pred[c] as usize;
            out.push(c);
        }
        out.reverse();
        Some(out)
    }
}

/// Greedy string pulling: extends each straight piece while the segment stays
/// on free cells at least as clear as the worst cell of the part it replaces.
pub fn shortcut(belief: &OccupancyGrid, field: &DistanceField, path: &[usize]) -> Vec<Point2> {
    if path.is_empty() {
        return Vec::new();
    }
    let mut out = vec![belief.center_of(path[0])];
    let mut i = 0;
    while i + 1 < path.len() {
        let mut best = i + 1;
        let mut worst = field.dist[path[i]].min(field.dist[path[i + 1]]);
        let mut j = i + 2;
        while j < path.len() {
            worst = worst.min(field.dist[path[j]]);
            let (a, b) = (belief.center_of(path[i]), belief.center_of(path[j]));
            let ok = belief.walk_segment(a, b, |x, y| {
                belief.get_i(x, y) == Cell::Free
                    && field.dist[belief.idx(x as usize, y as usize)] >= worst
            });
            if !ok {
                break;
            }
            best = j;
            j += 1;
        }
        out.push(belief.center_of(path[best]));
        i = best;
    }
    out
}
