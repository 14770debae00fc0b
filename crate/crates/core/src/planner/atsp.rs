//! Open-path asymmetric TSP from a fixed start (index 0).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exact up to this many targets.
pub const EXACT_LIMIT: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct AtspSolution {
    /// Target indices (1-based rows of the matrix) in visiting order.
    pub order: Vec<usize>,
    pub cost: f64,
}

pub fn path_cost(m: &[Vec<f64>], order: &[usize]) -> f64 {
    let mut c = 0.0;
    let mut prev = 0;
    for &v in order {
        c += m[prev][v];
        prev = v;
    }
    c
}

/// Exact for small instances, local search beyond. `m` is square with row
/// and column 0 standing for the start.
pub fn solve_atsp(m: &[Vec<f64>]) -> AtspSolution {
    if m.len() <= EXACT_LIMIT + 1 {
        solve_exact(m)
    } else {
        solve_heuristic(m)
    }
}

/// Held-Karp over subsets of targets.
pub fn solve_exact(m: &[Vec<f64>]) -> AtspSolution {
    let n = m.len().saturating_sub(1);
    if n == 0 {
        return AtspSolution {
            order: Vec::new(),
            cost: 0.0,
        };
    }
    let full = (1usize << n) - 1;
    let mut dp = vec![f64::INFINITY; (full + 1) * n];
    let mut par = vec![usize::MAX; (full + 1) * n];
    for j in 0..n {
        dp[(1 << j) * n + j] = m[0][j + 1];
    }
    for mask in 1..=full {
        for j in 0..n {
            let cur = dp[mask * n + j];
            if mask & (1 << j) == 0 || !cur.is_finite() {
                continue;
            }
            for k in 0..n {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let nm = mask | (1 << k);
                let c = cur + m[j + 1][k + 1];
                if c < dp[nm * n + k] {
                    dp[nm * n + k] = c;
                    par[nm * n + k] = j;
                }
            }
        }
    }
    let mut end = 0;
    for j in 1..n {
        if dp[full * n + j] < dp[full * n + end] {
            end = j;
        }
    }
    let mut order = Vec::with_capacity(n);
    let (mut mask, mut j) = (full, end);
    loop {
        order.push(j + 1);
        let p = par[mask * n + j];
        mask &= !(1 << j);
        if p == usize::MAX {
            break;
        }
        j = p;
    }
    order.reverse();
    let cost = path_cost(m, &order);
    AtspSolution { order, cost }
}

fn nearest_neighbor(m: &[Vec<f64>], first: usize) -> Vec<usize> {
    let n = m.len() - 1;
    let mut used = vec![false; n + 1];
    used[0] = true;
    used[first] = true;
    let mut order = vec![first];
    let mut cur = first;
    while order.len() < n {
        let next = (1..=n)
            .filter(|&v| !used[v])
            .min_by(|&a, &b| m[cur][a].total_cmp(&m[cur][b]).then(a.cmp(&b)))
            .expect("unvisited target remains");
        used[next] = true;
        order.push(next);
        cur = next;
    }
    order
}

/// First-improvement local search with segment reversal, swaps, and moves of
/// up to three targets (optionally reversed).
fn improve(m: &[Vec<f64>], order: &mut Vec<usize>) {
    let n = order.len();
    let mut best = path_cost(m, order);
    loop {
        let mut improved = false;
        'outer: for i in 0..n {
            for j in i + 1..n {
                let mut cand = order.clone();
                cand[i..=j].reverse();
                let c = path_cost(m, &cand);
                if c < best - 1e-12 {
                    *order = cand;
                    best = c;
                    improved = true;
                    break 'outer;
                }
                let mut cand = order.clone();
                cand.swap(i, j);
                let c = path_cost(m, &cand);
                if c < best - 1e-12 {
                    *order = cand;
                    best = c;
                    improved = true;
                    break 'outer;
                }
            }
            for len in 1..=3.min(n - i) {
                for to in 0..=n - len {
                    if to == i {
                        continue;
                    }
                    for flip in [false, true] {
                        if flip && len == 1 {
                            continue;
                        }
                        let mut cand = order.clone();
                        let mut seg: Vec<usize> = cand.drain(i..i + len).collect();
                        if flip {
                            seg.reverse();
                        }
                        cand.splice(to..to, seg);
                        let c = path_cost(m, &cand);
                        if c < best - 1e-12 {
                            *order = cand;
                            best = c;
                            improved = true;
                            break 'outer;
                        }
                    }
                }
            }
        }
        if !improved {
            return;
        }
    }
}

/// Double-bridge move: cuts the order into four runs and swaps the middle two.
fn kick(order: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = order.len();
    let mut cuts = [
        rng.gen_range(0..n),
        rng.gen_range(0..=n),
        rng.gen_range(0..=n),
    ];
    cuts.sort_unstable();
    let [a, b, c] = cuts;
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&order[..a]);
    out.extend_from_slice(&order[b..c]);
    out.extend_from_slice(&order[a..b]);
    out.extend_from_slice(&order[c..]);
    out
}

/// Kicks tried after local search stalls.
const KICKS: usize = 40;

/// Nearest-neighbor construction from every first target, polished by
/// iterated local search that alternates double-bridge kicks with random
/// restarts (fixed seed); the cheapest result wins.
pub fn solve_heuristic(m: &[Vec<f64>]) -> AtspSolution {
    let n = m.len().saturating_sub(1);
    if n == 0 {
        return AtspSolution {
            order: Vec::new(),
            cost: 0.0,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    let mut best: Option<AtspSolution> = None;
    for first in 1..=n {
        let mut order = nearest_neighbor(m, first);
        improve(m, &mut order);
        let mut cost = path_cost(m, &order);
        if n >= 4 {
            for k in 0..KICKS {
                let mut cand = if k % 2 == 0 {
                    kick(&order, &mut rng)
                } else {
                    let mut r = order.clone();
                    r.shuffle(&mut rng);
                    r
                };
                improve(m, &mut cand);
                let c = path_cost(m, &cand);
                if c < cost - 1e-12 {
                    order = cand;
                    cost = c;
                }
            }
        }
        if best.as_ref().map_or(true, |b| cost < b.cost) {
            best = Some(AtspSolution { order, cost });
        }
    }
    best.expect("n > 0")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(m: &[Vec<f64>]) -> f64 {
        fn rec(m: &[Vec<f64>], cur: usize, left: &mut Vec<usize>, acc: f64, best: &mut f64) {
            if left.is_empty() {
                *best = best.min(acc);
                return;
            }
            for k in 0..left.len() {
                let v = left.remove(k);
                rec(m, v, left, acc + m[cur][v], best);
                left.insert(k, v);
            }
        }
        let mut best = f64::INFINITY;
        let mut left: Vec<usize> = (1..m.len()).collect();
        rec(m, 0, &mut left, 0.0, &mut best);
        if m.len() <= 1 {
            0.0
        } else {
            best
        }
    }

    fn random_matrix(rng: &mut impl Rng, n: usize) -> Vec<Vec<f64>> {
        (0..=n)
            .map(|i| {
                (0..=n)
                    .map(|j| {
                        if i == j {
                            0.0
                        } else {
                            rng.gen_range(1.0..100.0)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn empty_and_single() {
        assert_eq!(
            solve_atsp(&[vec![0.0]]),
            AtspSolution {
                order: vec![],
                cost: 0.0
            }
        );
        let m = vec![vec![0.0, 3.5], vec![1.0, 0.0]];
        assert_eq!(
            solve_atsp(&m),
            AtspSolution {
                order: vec![1],
                cost: 3.5
            }
        );
    }

    #[test]
    fn exact_beats_greedy() {
        // greedy: 0->1 (1), 1->2 (10), 2->3 (1) = 12; best: 0->2->3->1 = 2+1+1 = 4
        let m = vec![
            vec![0.0, 1.0, 2.0, 50.0],
            vec![9.0, 0.0, 10.0, 10.0],
            vec![9.0, 50.0, 0.0, 1.0],
            vec![9.0, 1.0, 50.0, 0.0],
        ];
        let greedy = path_cost(&m, &nearest_neighbor(&m, 1));
        let ex = solve_exact(&m);
        assert_eq!(ex.cost, brute_force(&m));
        assert_eq!(ex.order, vec![2, 3, 1]);
        assert!(ex.cost < greedy);
    }

    #[test]
    fn symmetric_reversal_differs_only_by_endpoints() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (2.0, 1.0), (0.0, 3.0), (4.0, 4.0)];
        let m: Vec<Vec<f64>> = pts
            .iter()
            .map(|a: &(f64, f64)| pts.iter().map(|b| (a.0 - b.0).hypot(a.1 - b.1)).collect())
            .collect();
        let s = solve_exact(&m);
        let inner: f64 = s.order.windows(2).map(|w| m[w[0]][w[1]]).sum();
        let mut rev = s.order.clone();
        rev.reverse();
        let inner_rev: f64 = rev.windows(2).map(|w| m[w[0]][w[1]]).sum();
        assert!((inner - inner_rev).abs() < 1e-12);
        assert!((s.cost - m[0][s.order[0]] - inner).abs() < 1e-12);
    }

    #[test]
    fn exact_matches_brute_force_and_heuristic_is_close() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let n = rng.gen_range(1..=8);
            let m = random_matrix(&mut rng, n);
            let ex = solve_exact(&m);
            if n <= 7 {
                assert!((ex.cost - brute_force(&m)).abs() < 1e-9);
            }
            assert!(solve_heuristic(&m).cost <= ex.cost * 1.05 + 1e-9);
        }
    }

    #[test]
    fn large_instances_visit_everything_once() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(&mut rng, 16);
        let s = solve_atsp(&m);
        let mut o = s.order.clone();
        o.sort_unstable();
        assert_eq!(o, (1..=16).collect::<Vec<_>>());
        assert!((s.cost - path_cost(&m, &s.order)).abs() < 1e-9);
    }
}
