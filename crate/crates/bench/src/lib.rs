//! Shared input builders for the kernel benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mobprof_core::features::Matrix;
use mobprof_core::geo::GridSpec;
use mobprof_core::ingest::{CleanTrajectory, SnappedPoint};
use mobprof_core::spatial::MotifGraph;

/// A random directed graph with no self-loops.
pub fn random_graph(n: usize, edge_prob: f64, seed: u64) -> MotifGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (0..n).map(move |v| (u, v)))
        .filter(|&(u, v)| u != v && rng.random_range(0.0..1.0) < edge_prob)
        .collect();
    MotifGraph::from_edges(n, &edges)
}

/// A day-long trajectory hopping between a handful of cells.
pub fn day_trajectory(cells: usize, seed: u64) -> CleanTrajectory {
    let grid = GridSpec::new(150.0, 113.75, 22.45);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..288)
        .map(|i| {
            let ix = rng.random_range(0..cells as i64);
            SnappedPoint { cell: grid.cell(ix, 0), t: i * 300 }
        })
        .collect();
    CleanTrajectory { user_id: "bench".into(), points }
}

/// Random row-major matrix with values in [0, 1).
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<Vec<f64>> =
        (0..rows).map(|_| (0..cols).map(|_| rng.random::<f64>()).collect()).collect();
    Matrix::from_rows(&data)
}

/// A corpus of short tag sequences drawn from `vocab` tags.
pub fn random_corpus(sequences: usize, len: usize, vocab: usize, seed: u64) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sequences)
        .map(|_| (0..len).map(|_| format!("tag{}", rng.random_range(0..vocab))).collect())
        .collect()
}
