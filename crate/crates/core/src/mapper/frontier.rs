//! Frontier cells grouped into size-bounded clusters, maintained incrementally.

use super::gvd::DistanceField;
use crate::geom::Point2;
use crate::grid::{Cell, OccupancyGrid};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

#[derive(Clone, Debug, PartialEq)]
pub struct FrontierCluster {
    /// Sorted cell indices.
    pub cells: Vec<usize>,
    pub centroid: Point2,
    /// Known-free, traversable cell center near the centroid, if any is in sensor range.
    pub viewpoint: Option<Point2>,
    /// Inclusive cell box `(x0, y0, x1, y1)`.
    pub bbox: (usize, usize, usize, usize),
    /// Lowest cell of the 8-connected frontier component this cluster was split from.
    pub family: usize,
}

impl FrontierCluster {
    pub fn key(&self) -> usize {
        self.cells[0]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrontierParams {
    /// Clusters are split until both bbox sides are at most this long, meters.
    pub cluster_max_size: f64,
    pub sensor_range: f64,
    /// Minimum obstacle clearance of a viewpoint, meters.
    pub min_clearance: f64,
}

impl Default for FrontierParams {
    fn default() -> Self {
        Self {
            cluster_max_size: 2.0,
            sensor_range: 3.0,
            min_clearance: 0.2,
        }
    }
}

pub fn is_frontier(belief: &OccupancyGrid, i: usize) -> bool {
    belief.at(i) == Cell::Free && belief.neighbors4(i).any(|n| belief.at(n) == Cell::Unknown)
}

fn component(belief: &OccupancyGrid, seed: usize, seen: &mut BTreeSet<usize>) -> Vec<usize> {
    let mut out = vec![seed];
    let mut q = VecDeque::from([seed]);
    seen.insert(seed);
    while let Some(c) = q.pop_front() {
        for n in belief.neighbors8(c) {
            if !seen.contains(&n) && is_frontier(belief, n) {
                seen.insert(n);
                out.push(n);
                q.push_back(n);
            }
        }
    }
    out.sort_unstable();
    out
}

fn bbox(belief: &OccupancyGrid, cells: &[usize]) -> (usize, usize, usize, usize) {
    let mut b = (usize::MAX, usize::MAX, 0, 0);
    for &c in cells {
        let (x, y) = belief.xy(c);
        b = (b.0.min(x), b.1.min(y), b.2.max(x), b.3.max(y));
    }
    b
}

/// Splits at the middle of the longer bbox side until clusters are small enough,
/// keeping each piece 8-connected.
fn split(belief: &OccupancyGrid, cells: Vec<usize>, max_cells: usize, out: &mut Vec<Vec<usize>>) {
    let (x0, y0, x1, y1) = bbox(belief, &cells);
    let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
    if w <= max_cells && h <= max_cells {
        out.push(cells);
        return;
    }
    let (lo, hi): (Vec<usize>, Vec<usize>) = if w >= h {
        let mid = x0 + w / 2;
        cells.iter().partition(|&&c| belief.xy(c).0 < mid)
    } else {
        let mid = y0 + h / 2;
        cells.iter().partition(|&&c| belief.xy(c).1 < mid)
    };
    for half in [lo, hi] {
        let set: BTreeSet<usize> = half.iter().copied().collect();
        let mut seen = BTreeSet::new();
        for &c in &half {
            if seen.contains(&c) {
                continue;
            }
            let mut part = vec![c];
            let mut q = VecDeque::from([c]);
            seen.insert(c);
            while let Some(p) = q.pop_front() {
                for n in belief.neighbors8(p) {
                    if set.contains(&n) && seen.insert(n) {
                        part.push(n);
                        q.push_back(n);
                    }
                }
            }
            part.sort_unstable();
            split(belief, part, max_cells, out);
        }
    }
}

fn build_clusters(
    belief: &OccupancyGrid,
    comp: Vec<usize>,
    params: &FrontierParams,
) -> Vec<FrontierCluster> {
    let family = comp[0];
    let max_cells = ((params.cluster_max_size / belief.resolution).round() as usize).max(1);
    let mut parts = Vec::new();
    split(belief, comp, max_cells, &mut parts);
    parts
        .into_iter()
        .map(|cells| {
            let sum = cells
                .iter()
                .fold(Point2::default(), |s, &c| s + belief.center_of(c));
            let centroid = sum * (1.0 / cells.len() as f64);
            FrontierCluster {
                bbox: bbox(belief, &cells),
                cells,
                centroid,
                viewpoint: None,
                family,
            }
        })
        .collect()
}

/// Nearest known-free cell to `p` with at least `min_clearance` to known
/// obstacles, within `range`. Ties go to the lower cell index.
pub fn nearest_traversable(
    belief: &OccupancyGrid,
    field: &DistanceField,
    p: Point2,
    range: f64,
    min_clearance: f64,
) -> Option<usize> {
    let r = (range / belief.resolution).ceil() as i64;
    let cx = (p.x / belief.resolution).floor() as i64;
    let cy = (p.y / belief.resolution).floor() as i64;
    let mut best: Option<(f64, usize)> = None;
    for y in (cy - r).max(0)..=(cy + r).min(belief.height as i64 - 1) {
        for x in (cx - r).max(0)..=(cx + r).min(belief.width as i64 - 1) {
            let i = belief.idx(x as usize, y as usize);
            if belief.at(i) != Cell::Free || field.dist[i] < min_clearance {
                continue;
            }
            let d = belief.center_of(i).dist(p);
            if d <= range && best.map_or(true, |(bd, bi)| d < bd || (d == bd && i < bi)) {
                best = Some((d, i));
            }
        }
    }
    best.map(|(_, i)| i)
}

fn assign_viewpoints(
    belief: &OccupancyGrid,
    field: &DistanceField,
    params: &FrontierParams,
    cs: &mut [FrontierCluster],
) {
    for c in cs {
        c.viewpoint = nearest_traversable(
            belief,
            field,
            c.centroid,
            params.sensor_range,
            params.min_clearance,
        )
        .map(|i| belief.center_of(i));
    }
}

/// All frontier clusters of `belief`, from scratch, sorted by lowest cell.
pub fn detect_frontiers(
    belief: &OccupancyGrid,
    field: &DistanceField,
    params: &FrontierParams,
) -> Vec<FrontierCluster> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for i in 0..belief.len() {
        if !seen.contains(&i) && is_frontier(belief, i) {
            out.extend(build_clusters(
                belief,
                component(belief, i, &mut seen),
                params,
            ));
        }
    }
    out.sort_by_key(|c| c.key());
    assign_viewpoints(belief, field, params, &mut out);
    out
}

/// Re-detects only the frontier components near `changed`; other clusters
/// are kept. Produces exactly what [`detect_frontiers`] would.
pub fn update_frontiers(
    belief: &OccupancyGrid,
    field: &DistanceField,
    changed: &[usize],
    fis: &[FrontierCluster],
    params: &FrontierParams,
) -> Vec<FrontierCluster> {
    let mut near: BTreeSet<usize> = BTreeSet::new();
    for &c in changed {
        let (x, y) = belief.xy(c);
        for dy in -2i64..=2 {
            for dx in -2i64..=2 {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if belief.in_bounds(nx, ny) {
                    near.insert(belief.idx(nx as usize, ny as usize));
                }
            }
        }
    }
    let mut by_family: BTreeMap<usize, Vec<&FrontierCluster>> = BTreeMap::new();
    let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
    for c in fis {
        by_family.entry(c.family).or_default().push(c);
        for &cell in &c.cells {
            owner.insert(cell, c.family);
        }
    }
    let mut dirty: BTreeSet<usize> = near.iter().filter_map(|c| owner.get(c).copied()).collect();
    let mut seen = BTreeSet::new();
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut seeds: Vec<usize> = near
        .iter()
        .copied()
        .filter(|&c| is_frontier(belief, c))
        .collect();
    loop {
        for f in &dirty {
            for c in by_family.get(f).into_iter().flatten() {
                seeds.extend(c.cells.iter().copied().filter(|&x| is_frontier(belief, x)));
            }
        }
        for s in std::mem::take(&mut seeds) {
            if !seen.contains(&s) {
                comps.push(component(belief, s, &mut seen));
            }
        }
        let more: BTreeSet<usize> = comps
            .iter()
            .flatten()
            .filter_map(|c| owner.get(c).copied())
            .filter(|f| !dirty.contains(f))
            .collect();
        if more.is_empty() {
            break;
        }
        dirty.extend(more);
    }
    let mut out: Vec<FrontierCluster> = fis
        .iter()
        .filter(|c| !dirty.contains(&c.family))
        .cloned()
        .collect();
    for comp in comps {
        out.extend(build_clusters(belief, comp, params));
    }
    out.sort_by_key(|c| c.key());
    assign_viewpoints(belief, field, params, &mut out);
    out
}
