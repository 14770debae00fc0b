//! Bounded obstacle distance field and GVD cells over the belief grid.

use crate::grid::{Cell, OccupancyGrid};

/// Two obstacle cells count as distinct obstacles when farther apart than
/// this (squared, in cells).
const DISTINCT_SQ: i64 = 4;
pub const NO_OBSTACLE: u32 = u32::MAX;

/// Per-cell distance to the nearest known obstacle, capped at `max_range`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub max_range: f64,
    /// Meters; 0 on occupied cells, `max_range` when nothing is in range or
    /// the cell is unknown.
    pub dist: Vec<f64>,
    /// Index of the nearest obstacle cell, or [`NO_OBSTACLE`].
    pub nearest: Vec<u32>,
    pub gv: Vec<bool>,
    offsets: Vec<(i64, i64, i64)>,
}

impl DistanceField {
    pub fn new(width: usize, height: usize, resolution: f64, max_range: f64) -> Self {
        let r = (max_range / resolution).floor() as i64;
        let mut offsets = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                let d2 = dx * dx + dy * dy;
                if d2 <= r * r {
                    offsets.push((d2, dy, dx));
                }
            }
        }
        offsets.sort_unstable();
        let n = width * height;
        Self {
            width,
            height,
            resolution,
            max_range,
            dist: vec![max_range; n],
            nearest: vec![NO_OBSTACLE; n],
            gv: vec![false; n],
            offsets,
        }
    }

    /// Full computation from scratch.
    pub fn compute(belief: &OccupancyGrid, max_range: f64) -> Self {
        let mut f = Self::new(belief.width, belief.height, belief.resolution, max_range);
        let all: Vec<usize> = (0..belief.len()).collect();
        f.refresh(belief, &all);
        f
    }

    fn range_cells(&self) -> i64 {
        (self.max_range / self.resolution).floor() as i64
    }

    fn cell_distance(&mut self, belief: &OccupancyGrid, i: usize) {
        let (x, y) = belief.xy(i);
        match belief.at(i) {
            Cell::Occupied => {
                self.dist[i] = 0.0;
                self.nearest[i] = i as u32;
            }
            Cell::Unknown => {
                self.dist[i] = self.max_range;
                self.nearest[i] = NO_OBSTACLE;
            }
            Cell::Free => {
                self.dist[i] = self.max_range;
                self.nearest[i] = NO_OBSTACLE;
                for &(d2, dy, dx) in &self.offsets {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if belief.in_bounds(nx, ny)
                        && belief.get(nx as usize, ny as usize) == Cell::Occupied
                    {
                        self.dist[i] = (d2 as f64).sqrt() * self.resolution;
                        self.nearest[i] = belief.idx(nx as usize, ny as usize) as u32;
                        break;
                    }
                }
            }
        }
    }

    fn distinct(&self, a: u32, b: u32) -> bool {
        let (ax, ay) = (
            (a as usize % self.width) as i64,
            (a as usize / self.width) as i64,
        );
        let (bx, by) = (
            (b as usize % self.width) as i64,
            (b as usize / self.width) as i64,
        );
        (ax - bx).pow(2) + (ay - by).pow(2) > DISTINCT_SQ
    }

    fn cell_gv(&self, belief: &OccupancyGrid, i: usize) -> bool {
        let d = self.dist[i];
        if belief.at(i) != Cell::Free
            || self.nearest[i] == NO_OBSTACLE
            || !(d > 0.0 && d < self.max_range)
        {
            return false;
        }
        belief.neighbors4(i).any(|n| {
            belief.at(n) == Cell::Free
                && self.nearest[n] != NO_OBSTACLE
                && self.distinct(self.nearest[i], self.nearest[n])
                && (d > self.dist[n] || (d == self.dist[n] && i < n))
        })
    }

    /// Recomputes distances for `cells`, then GV membership around them.
    fn refresh(&mut self, belief: &OccupancyGrid, cells: &[usize]) {
        for &i in cells {
            self.cell_distance(belief, i);
        }
        let mut touched = vec![false; belief.len()];
        for &i in cells {
            touched[i] = true;
            for n in belief.neighbors4(i) {
                touched[n] = true;
            }
        }
        for (i, t) in touched.iter().enumerate() {
            if *t {
                self.gv[i] = self.cell_gv(belief, i);
            }
        }
    }

    pub fn gv_cells(&self) -> Vec<usize> {
        self.gv
            .iter()
            .enumerate()
            .filter(|(_, &g)| g)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Brings `field` up to date after the cells in `changed` changed in
/// `belief`. Only a box around the changes, grown by the propagation range,
/// is recomputed; the result is identical to [`DistanceField::compute`].
pub fn update_gvd(
    belief: &OccupancyGrid,
    field: &mut DistanceField,
    changed: &[usize],
) -> Vec<usize> {
    if !changed.is_empty() {
        let r = field.range_cells() + 1;
        let (mut x0, mut y0, mut x1, mut y1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
        for &i in changed {
            let (x, y) = belief.xy(i);
            x0 = x0.min(x as i64);
            y0 = y0.min(y as i64);
            x1 = x1.max(x as i64);
            y1 = y1.max(y as i64);
        }
        let x0 = (x0 - r).max(0) as usize;
        let y0 = (y0 - r).max(0) as usize;
        let x1 = ((x1 + r) as usize).min(belief.width - 1);
        let y1 = ((y1 + r) as usize).min(belief.height - 1);
        let mut cells = Vec::with_capacity((x1 - x0 + 1) * (y1 - y0 + 1));
        for y in y0..=y1 {
            for x in x0..=x1 {
                cells.push(belief.idx(x, y));
            }
        }
        field.refresh(belief, &cells);
    }
    field.gv_cells()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Known strip: obstacle columns at x = 0 and x = `w`, free in between.
    fn strip(w: usize, h: usize) -> OccupancyGrid {
        let mut g = OccupancyGrid::filled(w + 1, h, 0.1, Cell::Free);
        for y in 0..h {
            g.set(0, y, Cell::Occupied);
            g.set(w, y, Cell::Occupied);
        }
        g
    }

    #[test]
    fn corridor_ridge_in_the_middle() {
        let g = strip(4, 9);
        let f = DistanceField::compute(&g, 2.0);
        let xs: std::collections::BTreeSet<usize> =
            f.gv_cells().iter().map(|&i| g.xy(i).0).collect();
        assert_eq!(xs.into_iter().collect::<Vec<_>>(), vec![2]);
        assert_eq!(f.gv_cells().len(), 9);
    }

    #[test]
    fn single_obstacle_has_no_ridge() {
        let mut g = OccupancyGrid::filled(20, 20, 0.1, Cell::Free);
        g.set(10, 10, Cell::Occupied);
        assert!(DistanceField::compute(&g, 2.0).gv_cells().is_empty());
    }

    #[test]
    fn distances_are_zero_on_obstacles_and_capped() {
        let g = strip(30, 3);
        let f = DistanceField::compute(&g, 1.0);
        assert_eq!(f.dist[g.idx(0, 1)], 0.0);
        assert!(f.dist.iter().all(|&d| d <= 1.0));
        assert_eq!(f.dist[g.idx(15, 1)], 1.0);
        assert_eq!(f.nearest[g.idx(15, 1)], NO_OBSTACLE);
    }

    #[test]
    fn incremental_matches_full_after_new_obstacle() {
        let mut g = strip(12, 30);
        let mut f = DistanceField::compute(&g, 2.0);
        g.set(6, 15, Cell::Occupied);
        let gv = update_gvd(&g, &mut f, &[g.idx(6, 15)]);
        let full = DistanceField::compute(&g, 2.0);
        assert_eq!(f, full);
        assert_eq!(gv, full.gv_cells());
    }
}
