//! Inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topovor_core::{Certainty, HybridTopoGraph, NodeId, NodeKind, Point2, TopoNode};

/// `w x h` lattice with unit spacing; every third edge is uncertain.
pub fn lattice(w: usize, h: usize) -> HybridTopoGraph {
    let mut g = HybridTopoGraph::new();
    let id = |x: usize, y: usize| NodeId((y * w + x) as u64);
    for y in 0..h {
        for x in 0..w {
            g.add_node(TopoNode::new(
                id(x, y),
                NodeKind::Gv,
                Point2::new(x as f64, y as f64),
            ))
            .unwrap();
        }
    }
    let mut k = 0;
    let mut cert = || {
        k += 1;
        if k % 3 == 0 {
            Certainty::Uncertain
        } else {
            Certainty::Deterministic
        }
    };
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                g.add_edge(id(x, y), id(x + 1, y), cert()).unwrap();
            }
            if y + 1 < h {
                g.add_edge(id(x, y), id(x, y + 1), cert()).unwrap();
            }
        }
    }
    g
}

/// Random asymmetric cost matrix with row/column 0 as the start.
pub fn atsp_matrix(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..=n)
        .map(|i| {
            (0..=n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        rng.gen_range(1.0..50.0)
                    }
                })
                .collect()
        })
        .collect()
}
