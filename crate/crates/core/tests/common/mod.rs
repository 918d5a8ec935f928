//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use pdaseq::seqcodec::AdjacencyMatrix;
use pdaseq::{construct_mn_pda, Entry, Grid, Pda};
use rand::Rng;

pub type Cell = (usize, usize);

/// Verdict of the literal pair-enumeration checker.
#[derive(Debug, PartialEq, Eq)]
pub struct Verdict {
    pub valid: bool,
    pub bad_columns: BTreeSet<usize>,
    pub bad_pairs: BTreeSet<(Cell, Cell)>,
}

/// Checks every column against the star count of the first column, then
/// every ordered pair of distinct cells holding the same integer.
pub fn brute_force(rows: &[Vec<Option<u32>>]) -> Verdict {
    let f = rows.len();
    let k = if f == 0 { 0 } else { rows[0].len() };
    let stars_in = |c: usize| (0..f).filter(|&r| rows[r][c].is_none()).count();
    let z = if k == 0 { 0 } else { stars_in(0) };
    let bad_columns: BTreeSet<usize> = (0..k).filter(|&c| stars_in(c) != z).collect();
    let mut bad_pairs = BTreeSet::new();
    for r1 in 0..f {
        for c1 in 0..k {
            for r2 in 0..f {
                for c2 in 0..k {
                    if (r1, c1) >= (r2, c2) {
                        continue;
                    }
                    let (Some(a), Some(b)) = (rows[r1][c1], rows[r2][c2]) else { continue };
                    if a != b {
                        continue;
                    }
                    let distinct_lines = r1 != r2 && c1 != c2;
                    let crosses_are_stars = distinct_lines && rows[r1][c2].is_none() && rows[r2][c1].is_none();
                    if !crosses_are_stars {
                        bad_pairs.insert(((r1, c1), (r2, c2)));
                    }
                }
            }
        }
    }
    Verdict { valid: bad_columns.is_empty() && bad_pairs.is_empty(), bad_columns, bad_pairs }
}

pub fn to_rows(grid: &Grid) -> Vec<Vec<Option<u32>>> {
    (0..grid.rows()).map(|r| grid.row(r).iter().map(|e| e.color()).collect()).collect()
}

pub fn from_rows(rows: &[Vec<Option<u32>>]) -> Grid {
    Grid::from_rows(
        rows.iter()
            .map(|r| r.iter().map(|c| c.map_or(Entry::Star, Entry::Color)).collect())
            .collect(),
    )
    .unwrap()
}

/// Uniformly random stars and small integers.
pub fn random_rows<R: Rng>(rng: &mut R, f: usize, k: usize) -> Vec<Vec<Option<u32>>> {
    let star_p: f64 = rng.gen_range(0.2..0.8);
    let colors = rng.gen_range(1..=(f * k).max(1) as u32);
    (0..f)
        .map(|_| (0..k).map(|_| (!rng.gen_bool(star_p)).then(|| rng.gen_range(1..=colors))).collect())
        .collect()
}

/// A valid array: random equal-size star columns colored greedily by
/// first fit against the pair conditions.
pub fn random_valid_rows<R: Rng>(rng: &mut R, f: usize, k: usize) -> Vec<Vec<Option<u32>>> {
    let z = rng.gen_range(0..=f);
    let mut star = vec![vec![false; k]; f];
    for c in 0..k {
        for r in rand::seq::index::sample(rng, f, z) {
            star[r][c] = true;
        }
    }
    let mut rows: Vec<Vec<Option<u32>>> = vec![vec![None; k]; f];
    let mut cells: Vec<Cell> = (0..f).flat_map(|r| (0..k).map(move |c| (r, c))).filter(|&(r, c)| !star[r][c]).collect();
    use rand::seq::SliceRandom;
    cells.shuffle(rng);
    let mut classes: Vec<Vec<Cell>> = Vec::new();
    for (r, c) in cells {
        let fits = |class: &Vec<Cell>| {
            class.iter().all(|&(r2, c2)| r != r2 && c != c2 && star[r][c2] && star[r2][c])
        };
        let mut options: Vec<usize> = (0..classes.len()).filter(|&i| fits(&classes[i])).collect();
        options.push(classes.len());
        let pick = options[rng.gen_range(0..options.len())];
        if pick == classes.len() {
            classes.push(Vec::new());
        }
        classes[pick].push((r, c));
        rows[r][c] = Some(pick as u32 + 1);
    }
    rows
}

/// Whether some coloring of the adjacency's edges is a PDA, by backtracking
/// over colors in edge order without any pruning beyond the pair rules.
pub fn feasible_completion_exists(a: &AdjacencyMatrix) -> bool {
    let edges: Vec<Cell> = (0..a.cols()).flat_map(|c| (0..a.rows()).map(move |r| (r, c))).filter(|&(r, c)| a.is_edge(r, c)).collect();
    fn go(a: &AdjacencyMatrix, edges: &[Cell], t: usize, colors: &mut Vec<u32>, used: u32) -> bool {
        if t == edges.len() {
            let mut rows = vec![vec![None; a.cols()]; a.rows()];
            for (&(r, c), &col) in edges.iter().zip(colors.iter()) {
                rows[r][c] = Some(col);
            }
            return brute_force(&rows).valid;
        }
        for col in 1..=used + 1 {
            colors.push(col);
            if go(a, edges, t + 1, colors, used.max(col)) {
                return true;
            }
            colors.pop();
        }
        false
    }
    go(a, &edges, 0, &mut Vec::new(), 0)
}

/// Every MN PDA with `2 ≤ K ≤ max_k`.
pub fn mn_pdas(max_k: usize) -> Vec<Pda> {
    (2..=max_k).flat_map(|k| (1..k).map(move |t| construct_mn_pda(k, t).unwrap())).collect()
}
