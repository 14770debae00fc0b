//! Ternary occupancy grids and cell traversal.

use crate::balancer::FreeSpace;
use crate::geom::Point2;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Free,
    Occupied,
    Unknown,
}

impl Cell {
    pub fn is_known(self) -> bool {
        self != Cell::Unknown
    }
}

/// Row-major grid; cell `(x, y)` covers `[x*res, (x+1)*res) x [y*res, (y+1)*res)`
/// in world meters, `y` growing upward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    cells: Vec<Cell>,
}

pub const N4: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
pub const N8: [(i64, i64); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (-1, 1),
    (1, -1),
    (-1, -1),
];

impl OccupancyGrid {
    pub fn filled(width: usize, height: usize, resolution: f64, cell: Cell) -> Self {
        Self {
            width,
            height,
            resolution,
            cells: vec![cell; width * height],
        }
    }

    pub fn unknown(width: usize, height: usize, resolution: f64) -> Self {
        Self::filled(width, height, resolution, Cell::Unknown)
    }

    /// `None` when `cells` does not hold `width * height` entries.
    pub fn from_cells(
        width: usize,
        height: usize,
        resolution: f64,
        cells: Vec<Cell>,
    ) -> Option<Self> {
        (cells.len() == width * height).then_some(Self {
            width,
            height,
            resolution,
            cells,
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn xy(&self, i: usize) -> (usize, usize) {
        (i % self.width, i / self.width)
    }

    pub fn get(&self, x: usize, y: usize) -> Cell {
        self.cells[y * self.width + x]
    }

    /// Out-of-bounds reads as occupied.
    pub fn get_i(&self, x: i64, y: i64) -> Cell {
        if self.in_bounds(x, y) {
            self.cells[y as usize * self.width + x as usize]
        } else {
            Cell::Occupied
        }
    }

    pub fn at(&self, i: usize) -> Cell {
        self.cells[i]
    }

    pub fn set(&mut self, x: usize, y: usize, c: Cell) {
        let w = self.width;
        self.cells[y * w + x] = c;
    }

    pub fn set_at(&mut self, i: usize, c: Cell) {
        self.cells[i] = c;
    }

    pub fn count(&self, c: Cell) -> usize {
        self.cells.iter().filter(|&&x| x == c).count()
    }

    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        let x = (p.x / self.resolution).floor();
        let y = (p.y / self.resolution).floor();
        if x < 0.0 || y < 0.0 || x >= self.width as f64 || y >= self.height as f64 {
            return None;
        }
        Some((x as usize, y as usize))
    }

    pub fn index_of(&self, p: Point2) -> Option<usize> {
        self.cell_of(p).map(|(x, y)| self.idx(x, y))
    }

    pub fn center(&self, x: usize, y: usize) -> Point2 {
        Point2::new(
            (x as f64 + 0.5) * self.resolution,
            (y as f64 + 0.5) * self.resolution,
        )
    }

    pub fn center_of(&self, i: usize) -> Point2 {
        let (x, y) = self.xy(i);
        self.center(x, y)
    }

    /// In-bounds 4-neighbors of cell `i`.
    pub fn neighbors4(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let (x, y) = self.xy(i);
        N4.iter().filter_map(move |&(dx, dy)| {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            self.in_bounds(nx, ny)
                .then(|| self.idx(nx as usize, ny as usize))
        })
    }

    pub fn neighbors8(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let (x, y) = self.xy(i);
        N8.iter().filter_map(move |&(dx, dy)| {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            self.in_bounds(nx, ny)
                .then(|| self.idx(nx as usize, ny as usize))
        })
    }

    /// Visits the cells a segment passes through, in order. Where the segment
    /// crosses a cell corner exactly, both side cells are visited too. `f`
    /// returns `false` to stop early; the return value says whether the walk
    /// reached the end.
    pub fn walk_segment(&self, a: Point2, b: Point2, mut f: impl FnMut(i64, i64) -> bool) -> bool {
        let r = self.resolution;
        let (ax, ay) = (a.x / r, a.y / r);
        let (bx, by) = (b.x / r, b.y / r);
        let (mut x, mut y) = (ax.floor() as i64, ay.floor() as i64);
        let (ex, ey) = (bx.floor() as i64, by.floor() as i64);
        let dx = bx - ax;
        let dy = by - ay;
        let sx: i64 = if dx > 0.0 { 1 } else { -1 };
        let sy: i64 = if dy > 0.0 { 1 } else { -1 };
        let tdx = if dx != 0.0 {
            (1.0 / dx).abs()
        } else {
            f64::INFINITY
        };
        let tdy = if dy != 0.0 {
            (1.0 / dy).abs()
        } else {
            f64::INFINITY
        };
        let mut tmx = if dx > 0.0 {
            (ax.floor() + 1.0 - ax) * tdx
        } else if dx < 0.0 {
            (ax - ax.floor()) * tdx
        } else {
            f64::INFINITY
        };
        let mut tmy = if dy > 0.0 {
            (ay.floor() + 1.0 - ay) * tdy
        } else if dy < 0.0 {
            (ay - ay.floor()) * tdy
        } else {
            f64::INFINITY
        };
        if !f(x, y) {
            return false;
        }
        // step counts keep the walk on the end cell despite float roundoff
        while (x, y) != (ex, ey) {
            let (mx, my) = (x != ex, y != ey);
            if mx && (!my || tmx < tmy) {
                x += sx;
                tmx += tdx;
            } else if my && (!mx || tmy < tmx) {
                y += sy;
                tmy += tdy;
            } else {
                if !f(x + sx, y) || !f(x, y + sy) {
                    return false;
                }
                x += sx;
                y += sy;
                tmx += tdx;
                tmy += tdy;
            }
            if !f(x, y) {
                return false;
            }
        }
        true
    }

    /// True when every cell on the segment is known free.
    pub fn segment_all_free(&self, a: Point2, b: Point2) -> bool {
        self.walk_segment(a, b, |x, y| self.get_i(x, y) == Cell::Free)
    }

    /// True when the segment touches no known occupied cell (unknown is fine).
    pub fn segment_avoids_occupied(&self, a: Point2, b: Point2) -> bool {
        self.walk_segment(a, b, |x, y| {
            self.in_bounds(x, y) && self.get_i(x, y) != Cell::Occupied
        })
    }

    /// Render as `#` / `.` / `?` rows, top row first.
    pub fn to_ascii(&self) -> String {
        let mut s = String::with_capacity((self.width + 1) * self.height);
        for y in (0..self.height).rev() {
            for x in 0..self.width {
                s.push(match self.get(x, y) {
                    Cell::Free => '.',
                    Cell::Occupied => '#',
                    Cell::Unknown => '?',
                });
            }
            s.push('\n');
        }
        s
    }
}

impl FreeSpace for OccupancyGrid {
    fn is_free(&self, p: Point2) -> bool {
        self.cell_of(p)
            .is_some_and(|(x, y)| self.get(x, y) == Cell::Free)
    }

    fn segment_free(&self, a: Point2, b: Point2) -> bool {
        self.segment_all_free(a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells_on(g: &OccupancyGrid, a: Point2, b: Point2) -> Vec<(i64, i64)> {
        let mut v = Vec::new();
        g.walk_segment(a, b, |x, y| {
            v.push((x, y));
            true
        });
        v
    }

    #[test]
    fn horizontal_walk() {
        let g = OccupancyGrid::unknown(10, 10, 1.0);
        assert_eq!(
            cells_on(&g, Point2::new(0.5, 0.5), Point2::new(3.5, 0.5)),
            vec![(0, 0), (1, 0), (2, 0), (3, 0)]
        );
        assert_eq!(
            cells_on(&g, Point2::new(3.5, 2.5), Point2::new(3.5, 0.5)),
            vec![(3, 2), (3, 1), (3, 0)]
        );
    }

    #[test]
    fn diagonal_through_corners_is_supercover() {
        let g = OccupancyGrid::unknown(10, 10, 1.0);
        let c = cells_on(&g, Point2::new(0.5, 0.5), Point2::new(2.5, 2.5));
        assert_eq!(
            c,
            vec![(0, 0), (1, 0), (0, 1), (1, 1), (2, 1), (1, 2), (2, 2)]
        );
    }

    #[test]
    fn walk_is_connected_and_ends_at_target() {
        let g = OccupancyGrid::unknown(50, 50, 0.1);
        let pts = [
            (0.05, 0.05, 4.93, 1.27),
            (3.3, 4.1, 0.2, 0.7),
            (2.0, 2.0, 2.0, 2.0),
            (1.11, 4.0, 1.13, 0.1),
        ];
        for (ax, ay, bx, by) in pts {
            let c = cells_on(&g, Point2::new(ax, ay), Point2::new(bx, by));
            assert_eq!(
                *c.last().unwrap(),
                ((bx / 0.1f64).floor() as i64, (by / 0.1f64).floor() as i64)
            );
            for w in c.windows(2) {
                assert!((w[0].0 - w[1].0).abs() + (w[0].1 - w[1].1).abs() <= 2);
            }
        }
    }

    #[test]
    fn free_space_queries() {
        let mut g = OccupancyGrid::filled(5, 5, 1.0, Cell::Free);
        g.set(2, 2, Cell::Occupied);
        assert!(!g.is_free(Point2::new(2.5, 2.5)));
        assert!(g.is_free(Point2::new(0.5, 0.5)));
        assert!(!g.segment_free(Point2::new(0.5, 2.5), Point2::new(4.5, 2.5)));
        assert!(g.segment_free(Point2::new(0.5, 0.5), Point2::new(4.5, 0.5)));
        assert!(!g.is_free(Point2::new(-1.0, 0.5)));
    }
}
