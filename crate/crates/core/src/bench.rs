//! Wall-time scaling of the greedy colorer against neural inference.
//!
//! Instances come from one family: `F = 8` packets, `Z = 4` cached per user
//! under the cyclic placement, so every user has degree 4 and `K = |E| / 4`.

use std::io::Write;
use std::time::{Duration, Instant};

use crate::graph::{greedy_strong_color, EdgeOrder};
use crate::neural::{rollout, DecodeMode, ModelConfig, ModelParams, NeuralError};
use crate::seqcodec::{cyclic_star_pattern, placement_to_adjacency, AdjacencyMatrix, SeqError};

pub const BENCH_F: usize = 8;
pub const BENCH_Z: usize = 4;
pub const BENCH_DEGREE: usize = BENCH_F - BENCH_Z;

/// Bench instance with `edges` edges, rounded up to a multiple of 4.
pub fn bench_adjacency(edges: usize) -> Result<AdjacencyMatrix, SeqError> {
    if edges == 0 {
        return placement_to_adjacency(BENCH_F, BENCH_F, 1, &[(0..BENCH_F).collect()]);
    }
    let k = edges.div_ceil(BENCH_DEGREE);
    placement_to_adjacency(BENCH_Z, BENCH_F, k, &cyclic_star_pattern(BENCH_F, k, BENCH_Z))
}

/// Model shaped for the bench family; `hidden` and `embed` may come from a
/// trained checkpoint.
pub fn bench_model(hidden: usize, embed: usize, window: usize, max_edges: usize, seed: u64) -> ModelParams {
    ModelParams::new(ModelConfig {
        hidden,
        embed,
        f_max: BENCH_F,
        k_max: max_edges.div_ceil(BENCH_DEGREE).max(1),
        window: Some(window),
        seed,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub edges: usize,
    pub greedy_ms: f64,
    pub neural_ms: f64,
    /// Colors used by each colorer.
    pub greedy_colors: usize,
    pub neural_colors: usize,
}

fn fastest<T>(reps: usize, mut f: impl FnMut() -> T) -> (Duration, T) {
    let start = Instant::now();
    let mut out = f();
    let mut best = start.elapsed();
    for _ in 1..reps {
        let start = Instant::now();
        out = f();
        best = best.min(start.elapsed());
    }
    (best, out)
}

/// Times both colorers at every size, keeping the fastest of `reps` runs.
/// Neural inference is a greedy, masked rollout.
pub fn run_bench(sizes: &[usize], reps: usize, params: &ModelParams) -> Result<Vec<BenchRow>, NeuralError> {
    let reps = reps.max(1);
    sizes
        .iter()
        .map(|&n| {
            let a = bench_adjacency(n)?;
            let g = a.to_graph();
            let (gt, colored) = fastest(reps, || greedy_strong_color(&g, EdgeOrder::Lexicographic));
            let (nt, ep) = fastest(reps, || rollout(&a, params, DecodeMode::Greedy, true, 0));
            let ep = ep?;
            Ok(BenchRow {
                edges: a.edge_count(),
                greedy_ms: gt.as_secs_f64() * 1e3,
                neural_ms: nt.as_secs_f64() * 1e3,
                greedy_colors: colored.color_count(),
                neural_colors: ep.grid.distinct_colors(),
            })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`; points with a
/// non-positive coordinate are ignored.
pub fn fit_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Scaling exponents `(greedy, neural)` over the rows.
pub fn exponents(rows: &[BenchRow]) -> (Option<f64>, Option<f64>) {
    let pts = |f: fn(&BenchRow) -> f64| rows.iter().map(|r| (r.edges as f64, f(r))).collect::<Vec<_>>();
    (fit_exponent(&pts(|r| r.greedy_ms)), fit_exponent(&pts(|r| r.neural_ms)))
}

/// CSV `edges,greedy_ms,neural_ms,greedy_colors,neural_colors`.
pub fn write_bench_csv<W: Write>(mut out: W, comment: Option<&str>, rows: &[BenchRow]) -> std::io::Result<()> {
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "edges,greedy_ms,neural_ms,greedy_colors,neural_colors")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.6},{:.6},{},{}",
            r.edges, r.greedy_ms, r.neural_ms, r.greedy_colors, r.neural_colors
        )?;
    }
    Ok(())
}
