//! Deterministic graph generators and seeded random edge lengths.
//!
//! Randomness always comes from ChaCha8 keyed by the caller's seed, so a
//! fixed seed reproduces the same graph and lengths on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{CombinatorialGraph, GraphError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    /// `n` vertices: center `0` joined to `n - 1` leaves.
    Star { n: usize },
    /// `n` vertices in a row.
    Path { n: usize },
    /// Cycle on `n >= 3` vertices.
    Cycle { n: usize },
    /// Complete graph on four vertices minus one edge (n = 4, m = 5).
    Diamond,
    /// Preferential attachment: `k` initial isolated vertices, every later
    /// vertex attaches `k` distinct edges, giving `m = (n - k) * k`.
    BarabasiAlbert { n: usize, k: usize },
}

/// Builds a graph of the requested family. Only `BarabasiAlbert` consumes
/// the seed; the other families are fully determined by their parameters.
pub fn generate(kind: GraphKind, seed: u64) -> Result<CombinatorialGraph, GraphError> {
    match kind {
        GraphKind::Star { n } => {
            if n < 2 {
                return Err(GraphError::InvalidParams("star needs n >= 2".into()));
            }
            let edges: Vec<_> = (1..n).map(|v| (0, v)).collect();
            CombinatorialGraph::new(n, &edges)
        }
        GraphKind::Path { n } => {
            if n < 2 {
                return Err(GraphError::InvalidParams("path needs n >= 2".into()));
            }
            let edges: Vec<_> = (0..n - 1).map(|v| (v, v + 1)).collect();
            CombinatorialGraph::new(n, &edges)
        }
        GraphKind::Cycle { n } => {
            if n < 3 {
                return Err(GraphError::InvalidParams("cycle needs n >= 3".into()));
            }
            let edges: Vec<_> = (0..n).map(|v| (v, (v + 1) % n)).collect();
            CombinatorialGraph::new(n, &edges)
        }
        GraphKind::Diamond => CombinatorialGraph::new(4, &[(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]),
        GraphKind::BarabasiAlbert { n, k } => barabasi_albert(n, k, seed),
    }
}

/// Preferential attachment with a deterministic bootstrap: vertices
/// `0..k` start isolated, vertex `k` connects to all of them, and each
/// later vertex draws `k` distinct targets without replacement with
/// probability proportional to the degrees at the start of its turn.
fn barabasi_albert(n: usize, k: usize, seed: u64) -> Result<CombinatorialGraph, GraphError> {
    if k == 0 || k + 1 > n {
        return Err(GraphError::InvalidParams(
            "barabasi-albert needs 1 <= k < n".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degree = vec![0u64; n];
    let mut edges = Vec::with_capacity((n - k) * k);
    for target in 0..k {
        edges.push((target, k));
        degree[target] += 1;
        degree[k] += 1;
    }
    for v in k + 1..n {
        let snapshot = degree[..v].to_vec();
        let mut chosen = vec![false; v];
        let mut remaining: u64 = snapshot.iter().sum();
        for _ in 0..k {
            let mut r = rng.random_range(0..remaining);
            let mut target = usize::MAX;
            for (u, &d) in snapshot.iter().enumerate() {
                if chosen[u] || d == 0 {
                    continue;
                }
                if r < d {
                    target = u;
                    break;
                }
                r -= d;
            }
            debug_assert!(target != usize::MAX);
            chosen[target] = true;
            remaining -= snapshot[target];
            edges.push((target, v));
            degree[target] += 1;
            degree[v] += 1;
        }
    }
    CombinatorialGraph::new(n, &edges)
}

/// Uniform lengths in `[lo, hi]` rounded to `decimals` digits, one per
/// edge, in edge order.
pub fn random_lengths(
    count: usize,
    lo: f64,
    hi: f64,
    decimals: u32,
    seed: u64,
) -> Result<Vec<f64>, GraphError> {
    if !lo.is_finite() || lo <= 0.0 || hi < lo {
        return Err(GraphError::InvalidParams(
            "length interval must satisfy 0 < lo <= hi".into(),
        ));
    }
    let scale = 10f64.powi(decimals as i32);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let u: f64 = rng.random();
            let x = lo + u * (hi - lo);
            (x * scale).round() / scale
        })
        .collect())
}
