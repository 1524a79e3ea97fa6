//! Seeded random graphs and functions for identity and oracle suites.
//!
//! Trial `i` of a suite with seed `s` draws from a ChaCha8 stream keyed by
//! `(s, i)`, so any single trial can be replayed on its own and batches give
//! the same results in parallel and sequential mode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::forms::VertexFunction;
use crate::graph::{GraphBuilder, WeightedGraph};

pub const EXTRA_EDGE_PROBABILITY: f64 = 0.3;

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Uniform on the half-open interval `(0, hi]`.
pub fn positive_upto(rng: &mut impl Rng, hi: f64) -> f64 {
    hi * (1.0 - rng.random::<f64>())
}

/// Connected graph on `n` vertices: a random spanning tree plus each other
/// pair independently with probability 0.3; `w ∈ (0, 4]`, `μ ∈ (0, 2]`.
pub fn random_graph(rng: &mut impl Rng, n: usize) -> WeightedGraph {
    let mut b = GraphBuilder::new(n);
    for x in 0..n {
        b.measure(x, positive_upto(rng, 2.0));
    }
    let mut adj = vec![vec![false; n]; n];
    for y in 1..n {
        let x = rng.random_range(0..y);
        adj[x][y] = true;
        b.edge(x, y, positive_upto(rng, 4.0));
    }
    for x in 0..n {
        for y in x + 1..n {
            if !adj[x][y] && rng.random_bool(EXTRA_EDGE_PROBABILITY) {
                b.edge(x, y, positive_upto(rng, 4.0));
            }
        }
    }
    b.build().expect("random graph is valid")
}

/// Random graph with a vertex count drawn from `lo..=hi`.
pub fn random_graph_between(rng: &mut impl Rng, lo: usize, hi: usize) -> WeightedGraph {
    let n = rng.random_range(lo..=hi);
    random_graph(rng, n)
}

/// Values uniform in `[-amp, amp]`; vertices where `allowed` is false get 0.
pub fn random_function(
    rng: &mut impl Rng,
    g: &WeightedGraph,
    amp: f64,
    allowed: impl Fn(usize) -> bool,
) -> VertexFunction {
    VertexFunction::from_fn(g, |x| {
        if allowed(x) {
            rng.random_range(-amp..=amp)
        } else {
            0.0
        }
    })
}
