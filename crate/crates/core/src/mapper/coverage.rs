//! Coverage samples: points in unknown space near a robot, kept until seen.

use crate::geom::Point2;
use crate::grid::{Cell, OccupancyGrid};
use crate::topo_graph::{IdAllocator, NodeId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverageSample {
    pub id: NodeId,
    pub pos: Point2,
    pub cell: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageParams {
    /// Sampling radius around the robot, meters.
    pub radius: f64,
    /// Minimum distance between samples, meters.
    pub spacing: f64,
    pub attempts: usize,
}

impl Default for CoverageParams {
    fn default() -> Self {
        Self {
            radius: 5.0,
            spacing: 1.0,
            attempts: 64,
        }
    }
}

pub fn sample_seed(seed: u64, robot: u32, tick: u64) -> u64 {
    seed ^ (u64::from(robot) + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ tick.wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

/// Rejection-samples unknown cells within `params.radius` of `pos`, keeping
/// new samples at least `params.spacing` from each other and from `existing`.
pub fn sample_coverage(
    belief: &OccupancyGrid,
    pos: Point2,
    existing: &[CoverageSample],
    params: &CoverageParams,
    ids: &mut IdAllocator,
    seed: u64,
) -> Vec<CoverageSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<CoverageSample> = Vec::new();
    for _ in 0..params.attempts {
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        let r = params.radius * rng.gen::<f64>().sqrt();
        let p = pos + Point2::new(a.cos(), a.sin()) * r;
        let Some(cell) = belief.index_of(p) else {
            continue;
        };
        if belief.at(cell) != Cell::Unknown {
            continue;
        }
        let p = belief.center_of(cell);
        let close = existing
            .iter()
            .chain(&out)
            .any(|s| s.pos.dist(p) < params.spacing);
        if !close {
            out.push(CoverageSample {
                id: ids.next_id(),
                pos: p,
                cell,
            });
        }
    }
    out
}

/// Drops samples whose cell is no longer unknown.
pub fn retire(samples: &mut Vec<CoverageSample>, belief: &OccupancyGrid) {
    samples.retain(|s| belief.at(s.cell) == Cell::Unknown);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_are_unknown_spaced_and_in_range() {
        let mut b = OccupancyGrid::unknown(100, 100, 0.1);
        for x in 40..60 {
            for y in 40..60 {
                b.set(x, y, Cell::Free);
            }
        }
        let mut ids = IdAllocator::new(3);
        let pos = Point2::new(5.0, 5.0);
        let s = sample_coverage(&b, pos, &[], &CoverageParams::default(), &mut ids, 7);
        assert!(!s.is_empty());
        for (i, a) in s.iter().enumerate() {
            assert_eq!(b.at(a.cell), Cell::Unknown);
            assert!(a.pos.dist(pos) <= 5.0 + 0.1);
            assert_eq!(a.id.owner(), 3);
            for c in &s[i + 1..] {
                assert!(a.pos.dist(c.pos) >= 1.0);
            }
        }
        let again = sample_coverage(
            &b,
            pos,
            &[],
            &CoverageParams::default(),
            &mut IdAllocator::new(3),
            7,
        );
        assert_eq!(s, again);
    }

    #[test]
    fn retire_drops_seen_samples() {
        let mut b = OccupancyGrid::unknown(10, 10, 0.1);
        let mut ids = IdAllocator::new(0);
        let mut s = sample_coverage(
            &b,
            Point2::new(0.5, 0.5),
            &[],
            &CoverageParams {
                radius: 0.5,
                spacing: 0.1,
                ..Default::default()
            },
            &mut ids,
            1,
        );
        let n = s.len();
        assert!(n > 1);
        let c = s[0].cell;
        b.set_at(c, Cell::Free);
        retire(&mut s, &b);
        assert_eq!(s.len(), n - 1);
        assert!(s.iter().all(|x| x.cell != c));
    }
}
