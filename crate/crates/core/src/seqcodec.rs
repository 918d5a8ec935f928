//! Sequence view of a PDA for the learned colorer.
//!
//! A placement gives an F×K adjacency matrix (`One` where a user still needs
//! a packet, `Inf` where it is cached). Its `One` cells, read in a fixed
//! order, form the edge sequence; a color per edge rebuilds a candidate array.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::BipartiteColoredGraph;
use crate::pda::{Entry, Grid, Pda, PdaError};

#[derive(Debug, Error)]
pub enum SeqError {
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),
    #[error("{edges} edges but {colors} colors")]
    LengthMismatch { edges: usize, colors: usize },
    #[error("edge {0:?} is not a One cell of the adjacency matrix")]
    EdgeMismatch((usize, usize)),
    #[error("bad training pair: {0}")]
    BadPair(String),
    #[error(transparent)]
    Pda(#[from] PdaError),
    #[error("corpus line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AdjEntry {
    /// The user needs this packet: an edge.
    One,
    /// The packet is cached: no edge.
    Inf,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AdjacencyMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<AdjEntry>,
}

impl AdjacencyMatrix {
    pub fn from_grid(grid: &Grid) -> Self {
        let cells = grid
            .cells()
            .iter()
            .map(|e| if e.is_star() { AdjEntry::Inf } else { AdjEntry::One })
            .collect();
        AdjacencyMatrix { rows: grid.rows(), cols: grid.cols(), cells }
    }

    /// Rows F.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Columns K.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> AdjEntry {
        self.cells[row * self.cols + col]
    }

    pub fn is_edge(&self, row: usize, col: usize) -> bool {
        self.get(row, col) == AdjEntry::One
    }

    pub fn edge_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == AdjEntry::One).count()
    }

    /// Stars in the first column.
    pub fn z(&self) -> usize {
        (0..self.rows).filter(|&r| !self.is_edge(r, 0)).count()
    }

    /// Uncolored bipartite graph with one edge per `One` cell.
    pub fn to_graph(&self) -> BipartiteColoredGraph {
        let pairs = (0..self.cols).flat_map(|c| (0..self.rows).filter(move |&r| self.is_edge(r, c)).map(move |r| (c, r)));
        BipartiteColoredGraph::uncolored(self.cols, self.rows, pairs).expect("pairs are in range and unique")
    }
}

/// Balanced cyclic placement: column `k` caches rows `kZ, kZ+1, …, kZ+Z-1`
/// modulo `F`.
pub fn cyclic_star_pattern(f: usize, k: usize, z: usize) -> Vec<Vec<usize>> {
    (0..k).map(|col| (0..z).map(|i| (col * z + i) % f.max(1)).collect()).collect()
}

/// Adjacency matrix of a placement given as the star rows of every column.
pub fn placement_to_adjacency(
    z: usize,
    f: usize,
    k: usize,
    star_pattern: &[Vec<usize>],
) -> Result<AdjacencyMatrix, SeqError> {
    if f == 0 || k == 0 || z > f {
        return Err(SeqError::InvalidPlacement(format!("need F >= Z and F, K >= 1, got F={f} K={k} Z={z}")));
    }
    if star_pattern.len() != k {
        return Err(SeqError::InvalidPlacement(format!(
            "{} star columns for K={k}",
            star_pattern.len()
        )));
    }
    let mut cells = vec![AdjEntry::One; f * k];
    for (col, stars) in star_pattern.iter().enumerate() {
        if stars.len() != z {
            return Err(SeqError::InvalidPlacement(format!(
                "column {} has {} stars, expected Z={z}",
                col + 1,
                stars.len()
            )));
        }
        for &row in stars {
            if row >= f {
                return Err(SeqError::InvalidPlacement(format!("star row {} beyond F={f}", row + 1)));
            }
            let cell = &mut cells[row * k + col];
            if *cell == AdjEntry::Inf {
                return Err(SeqError::InvalidPlacement(format!(
                    "column {} lists row {} twice",
                    col + 1,
                    row + 1
                )));
            }
            *cell = AdjEntry::Inf;
        }
    }
    Ok(AdjacencyMatrix { rows: f, cols: k, cells })
}

/// Traversal order of the `One` cells.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SequenceOrder {
    /// By column (user), then row. The stable contract.
    #[default]
    ColumnMajor,
    /// By row, then column. Experiments only.
    RowMajor,
}

/// Ordered edges `(row, col)`, 0-based.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct EdgeSequence(pub Vec<(usize, usize)>);

impl EdgeSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.0.iter()
    }
}

/// Colors of an edge sequence, one per edge.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct ColorSequence(pub Vec<u32>);

impl ColorSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Renumbers 1..S by first occurrence along the sequence.
    pub fn canonicalize(&self) -> Self {
        let mut map: HashMap<u32, u32> = HashMap::new();
        ColorSequence(
            self.0
                .iter()
                .map(|&c| {
                    let next = map.len() as u32 + 1;
                    *map.entry(c).or_insert(next)
                })
                .collect(),
        )
    }

    /// Each color is either a repeat or exactly one more than the largest so far.
    pub fn is_canonical(&self) -> bool {
        let mut max = 0;
        for &c in &self.0 {
            if c == 0 || c > max + 1 {
                return false;
            }
            max = max.max(c);
        }
        true
    }
}

pub fn extract_edge_sequence(a: &AdjacencyMatrix) -> EdgeSequence {
    extract_edge_sequence_with(a, SequenceOrder::ColumnMajor)
}

pub fn extract_edge_sequence_with(a: &AdjacencyMatrix, order: SequenceOrder) -> EdgeSequence {
    let mut edges = Vec::with_capacity(a.edge_count());
    match order {
        SequenceOrder::ColumnMajor => {
            for c in 0..a.cols {
                edges.extend((0..a.rows).filter(|&r| a.is_edge(r, c)).map(|r| (r, c)));
            }
        }
        SequenceOrder::RowMajor => {
            for r in 0..a.rows {
                edges.extend((0..a.cols).filter(|&c| a.is_edge(r, c)).map(|c| (r, c)));
            }
        }
    }
    EdgeSequence(edges)
}

/// Reads the colors of `grid` along `edges`, canonicalized along the sequence.
pub fn colors_of(grid: &Grid, edges: &EdgeSequence) -> Result<ColorSequence, SeqError> {
    let colors = edges
        .iter()
        .map(|&(r, c)| grid.get(r, c).color().ok_or(SeqError::EdgeMismatch((r, c))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ColorSequence(colors).canonicalize())
}

/// Writes each color onto its edge and stars elsewhere. The result is in
/// canonical (row-major) color form and is not checked for validity.
pub fn assemble_array(a: &AdjacencyMatrix, e: &EdgeSequence, c: &ColorSequence) -> Result<Grid, SeqError> {
    if e.len() != c.len() {
        return Err(SeqError::LengthMismatch { edges: e.len(), colors: c.len() });
    }
    if e.len() != a.edge_count() {
        return Err(SeqError::BadPair(format!(
            "sequence has {} edges, matrix has {}",
            e.len(),
            a.edge_count()
        )));
    }
    let mut grid = Grid::all_stars(a.rows, a.cols)?;
    for (&(r, col), &color) in e.iter().zip(&c.0) {
        if r >= a.rows || col >= a.cols || !a.is_edge(r, col) || !grid.get(r, col).is_star() {
            return Err(SeqError::EdgeMismatch((r, col)));
        }
        if color == 0 {
            return Err(SeqError::BadPair("colors must be positive".into()));
        }
        grid.set(r, col, Entry::Color(color));
    }
    Ok(grid.canonicalize())
}

/// One supervised example: the edges of a PDA and their colors.
///
/// On disk this is one JSON object per line with 1-based `[row, col]` edges:
/// `{"K":2,"F":2,"Z":1,"edges":[[2,1],[1,2]],"colors":[1,1]}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingPair {
    pub k: usize,
    pub f: usize,
    pub z: usize,
    pub edges: EdgeSequence,
    pub colors: ColorSequence,
}

#[derive(Serialize, Deserialize)]
struct PairJson {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "F")]
    f: usize,
    #[serde(rename = "Z")]
    z: usize,
    edges: Vec<(usize, usize)>,
    colors: Vec<u32>,
}

impl TrainingPair {
    pub fn from_pda(p: &Pda) -> Self {
        let a = AdjacencyMatrix::from_grid(p.grid());
        let edges = extract_edge_sequence(&a);
        let colors = colors_of(p.grid(), &edges).expect("edges come from the same grid");
        TrainingPair { k: p.k(), f: p.f(), z: p.z(), edges, colors }
    }

    /// Rebuilds the adjacency matrix from the edge list.
    pub fn adjacency(&self) -> Result<AdjacencyMatrix, SeqError> {
        let mut cells = vec![AdjEntry::Inf; self.f * self.k];
        for &(r, c) in self.edges.iter() {
            if r >= self.f || c >= self.k {
                return Err(SeqError::EdgeMismatch((r, c)));
            }
            cells[r * self.k + c] = AdjEntry::One;
        }
        Ok(AdjacencyMatrix { rows: self.f, cols: self.k, cells })
    }

    /// Checks shape, edge order, and color form; returns the assembled array.
    pub fn check(&self) -> Result<Grid, SeqError> {
        if self.k == 0 || self.f == 0 || self.z > self.f {
            return Err(SeqError::BadPair(format!("bad sizes K={} F={} Z={}", self.k, self.f, self.z)));
        }
        let a = self.adjacency()?;
        if extract_edge_sequence(&a) != self.edges {
            return Err(SeqError::BadPair("edges are not unique and in column-major order".into()));
        }
        if let Some(c) = (0..self.k).find(|&c| (0..self.f).filter(|&r| a.is_edge(r, c)).count() != self.f - self.z) {
            return Err(SeqError::BadPair(format!("column {} does not have F-Z edges", c + 1)));
        }
        if !self.colors.is_canonical() {
            return Err(SeqError::BadPair("colors are not in canonical first-occurrence form".into()));
        }
        assemble_array(&a, &self.edges, &self.colors)
    }

    pub fn to_json(&self) -> String {
        let raw = PairJson {
            k: self.k,
            f: self.f,
            z: self.z,
            edges: self.edges.iter().map(|&(r, c)| (r + 1, c + 1)).collect(),
            colors: self.colors.0.clone(),
        };
        serde_json::to_string(&raw).expect("pair serializes")
    }

    pub fn from_json(line: &str) -> Result<Self, serde_json::Error> {
        let raw: PairJson = serde_json::from_str(line)?;
        let edges = raw
            .edges
            .into_iter()
            .map(|(r, c)| {
                if r == 0 || c == 0 {
                    Err(serde::de::Error::custom("edge indices are 1-based"))
                } else {
                    Ok((r - 1, c - 1))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TrainingPair {
            k: raw.k,
            f: raw.f,
            z: raw.z,
            edges: EdgeSequence(edges),
            colors: ColorSequence(raw.colors),
        })
    }
}

/// Writes one pair per line.
pub fn write_jsonl<W: Write>(mut out: W, pairs: &[TrainingPair]) -> std::io::Result<()> {
    for p in pairs {
        writeln!(out, "{}", p.to_json())?;
    }
    Ok(())
}

/// Reads and checks a corpus, skipping blank lines.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<TrainingPair>, SeqError> {
    let mut pairs = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pair = TrainingPair::from_json(&line).map_err(|source| SeqError::Json { line: i + 1, source })?;
        pair.check()?;
        pairs.push(pair);
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pda::{construct_mn_pda, verify, Condition};

    fn two_user() -> AdjacencyMatrix {
        placement_to_adjacency(1, 2, 2, &[vec![0], vec![1]]).unwrap()
    }

    #[test]
    fn placement_examples() {
        let a = two_user();
        assert_eq!(a.get(0, 0), AdjEntry::Inf);
        assert_eq!(a.get(0, 1), AdjEntry::One);
        assert_eq!(a.get(1, 0), AdjEntry::One);
        assert_eq!(a.get(1, 1), AdjEntry::Inf);
        let full = placement_to_adjacency(2, 2, 1, &[vec![0, 1]]).unwrap();
        assert_eq!(full.edge_count(), 0);
        let none = placement_to_adjacency(0, 2, 2, &[vec![], vec![]]).unwrap();
        assert_eq!(none.edge_count(), 4);
        assert!(matches!(
            placement_to_adjacency(1, 2, 2, &[vec![0], vec![]]),
            Err(SeqError::InvalidPlacement(_))
        ));
        assert!(matches!(
            placement_to_adjacency(2, 2, 1, &[vec![0, 0]]),
            Err(SeqError::InvalidPlacement(_))
        ));
    }

    #[test]
    fn edge_order_is_column_major() {
        assert_eq!(extract_edge_sequence(&two_user()).0, vec![(1, 0), (0, 1)]);
        let full = placement_to_adjacency(1, 1, 1, &[vec![0]]).unwrap();
        assert!(extract_edge_sequence(&full).is_empty());
        let single = placement_to_adjacency(0, 1, 1, &[vec![]]).unwrap();
        assert_eq!(extract_edge_sequence(&single).0, vec![(0, 0)]);
        assert_eq!(
            extract_edge_sequence_with(&two_user(), SequenceOrder::RowMajor).0,
            vec![(0, 1), (1, 0)]
        );
    }

    #[test]
    fn assemble_examples() {
        let a = two_user();
        let e = extract_edge_sequence(&a);
        let g = assemble_array(&a, &e, &ColorSequence(vec![1, 1])).unwrap();
        assert_eq!(g, "* 1; 1 *".parse().unwrap());
        assert!(verify(&g).valid);
        let g = assemble_array(&a, &e, &ColorSequence(vec![1, 2])).unwrap();
        assert_eq!(g, "* 1; 2 *".parse().unwrap());
        let r = verify(&g);
        assert!(r.valid);
        assert_eq!(r.s, 2);

        let row = placement_to_adjacency(0, 1, 2, &[vec![], vec![]]).unwrap();
        let g = assemble_array(&row, &extract_edge_sequence(&row), &ColorSequence(vec![1, 1])).unwrap();
        assert_eq!(verify(&g).violations[0].condition(), Condition::C2a);

        assert!(matches!(
            assemble_array(&a, &e, &ColorSequence(vec![1])),
            Err(SeqError::LengthMismatch { edges: 2, colors: 1 })
        ));
    }

    #[test]
    fn pda_round_trips_through_sequences() {
        for k in 2..=6 {
            for t in 1..k {
                let p = construct_mn_pda(k, t).unwrap();
                let pair = TrainingPair::from_pda(&p);
                assert_eq!(pair.edges.len(), p.k() * (p.f() - p.z()));
                assert!(pair.colors.is_canonical());
                let a = AdjacencyMatrix::from_grid(p.grid());
                assert_eq!(&assemble_array(&a, &pair.edges, &pair.colors).unwrap(), p.grid());
            }
        }
    }

    #[test]
    fn canonical_color_form() {
        assert!(ColorSequence(vec![1, 2, 1, 3]).is_canonical());
        assert!(!ColorSequence(vec![2, 1]).is_canonical());
        assert!(!ColorSequence(vec![1, 3]).is_canonical());
        assert_eq!(ColorSequence(vec![5, 2, 5, 9]).canonicalize().0, vec![1, 2, 1, 3]);
    }

    #[test]
    fn jsonl_format() {
        let pair = TrainingPair::from_pda(&construct_mn_pda(2, 1).unwrap());
        assert_eq!(pair.to_json(), r#"{"K":2,"F":2,"Z":1,"edges":[[2,1],[1,2]],"colors":[1,1]}"#);
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &[pair.clone(), pair.clone()]).unwrap();
        let back = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, vec![pair.clone(), pair]);
    }

    #[test]
    fn corpus_rejects_bad_pairs() {
        let bad_order = r#"{"K":2,"F":2,"Z":1,"edges":[[1,2],[2,1]],"colors":[1,1]}"#;
        assert!(matches!(read_jsonl(bad_order.as_bytes()), Err(SeqError::BadPair(_))));
        let bad_colors = r#"{"K":2,"F":2,"Z":1,"edges":[[2,1],[1,2]],"colors":[2,1]}"#;
        assert!(matches!(read_jsonl(bad_colors.as_bytes()), Err(SeqError::BadPair(_))));
        assert!(matches!(read_jsonl("{".as_bytes()), Err(SeqError::Json { line: 1, .. })));
    }
}
