//! Deterministic parallel reduction.
//!
//! Quadrature sums and flow updates must produce bitwise-identical results
//! regardless of the number of worker threads. The strategy is fixed-shape
//! tiling: the index range is cut into constant-size tiles, each tile is
//! accumulated sequentially in index order, and the per-tile partial sums are
//! combined by a pairwise tree whose shape depends only on the tile count.
//! Threads only decide *who* computes a tile, never *how* results combine.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Tile width for all reductions. Large enough to amortize scheduling,
/// small enough to parallelize mid-sized grids.
const TILE: usize = 8192;

/// Sum `f(i)` over `0..len` with a thread-count-independent result.
pub fn tiled_sum<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let tiles = len.div_ceil(TILE);
    let partial = |ti: usize| {
        let lo = ti * TILE;
        let hi = (lo + TILE).min(len);
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i);
        }
        acc
    };
    let partials: Vec<f64> = map_indices(tiles, partial);
    pairwise(&partials)
}

/// Sum a small fixed number of accumulators per index, e.g. one per radius.
/// Returns one thread-count-independent total per accumulator slot.
pub fn tiled_sum_multi<F>(len: usize, slots: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let tiles = len.div_ceil(TILE);
    let partial = |ti: usize| {
        let lo = ti * TILE;
        let hi = (lo + TILE).min(len);
        let mut acc = vec![0.0; slots];
        for i in lo..hi {
            f(i, &mut acc);
        }
        acc
    };
    let partials: Vec<Vec<f64>> = map_indices(tiles, partial);
    (0..slots)
        .map(|s| {
            let column: Vec<f64> = partials.iter().map(|p| p[s]).collect();
            pairwise(&column)
        })
        .collect()
}

/// Map `f` over `0..len`, collecting results in index order.
/// Used for embarrassingly parallel per-node updates (flow steps).
pub fn map_indices<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Run `job` on a dedicated thread pool of `threads` workers.
/// With the `parallel` feature disabled the job simply runs inline; results
/// are identical either way by construction.
pub fn with_thread_count<T, F>(threads: usize, job: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool construction")
            .install(job)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        job()
    }
}

/// Fixed-shape pairwise sum; the association tree depends only on `xs.len()`.
fn pairwise(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise(&xs[..mid]) + pairwise(&xs[mid..])
}
