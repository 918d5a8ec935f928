//! The colored bipartite graph view of a PDA.
//!
//! User vertices `0..k` sit on one side and packet vertices `0..f` on the
//! other; every integer cell `p[f][k] = s` becomes an edge `(k, f)` colored
//! `s`. A grid is a PDA exactly when user degrees are constant and the
//! coloring is strong, so this module doubles as a second verifier.

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

use crate::pda::{verify, Entry, Grid, Pda, PdaError, VerifyReport};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("not a placement delivery array ({} violation(s))", .0.violations.len())]
    InvalidPda(Box<VerifyReport>),
    #[error("user vertices have unequal degrees {0:?}")]
    DegreeViolation(Vec<usize>),
    #[error("edges {first:?} and {second:?} share color {color} but are within distance two")]
    ColoringViolation { color: u32, first: (usize, usize), second: (usize, usize) },
    #[error("edge {0:?} has no color")]
    IncompleteColoring((usize, usize)),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed graph: {0}")]
    Malformed(String),
    #[error(transparent)]
    Pda(#[from] PdaError),
    #[error("graph json: {0}")]
    Json(#[from] serde_json::Error),
}

/// An edge between user `user` and packet `packet`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ColoredEdge {
    pub user: usize,
    pub packet: usize,
    pub color: Option<u32>,
}

/// Bipartite graph with user side of size `k` and packet side of size `f`.
///
/// Edges are kept sorted by `(user, packet)` and are unique.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartiteColoredGraph {
    k: usize,
    f: usize,
    edges: Vec<ColoredEdge>,
}

impl BipartiteColoredGraph {
    pub fn new(k: usize, f: usize, mut edges: Vec<ColoredEdge>) -> Result<Self, GraphError> {
        if let Some(e) = edges.iter().find(|e| e.user >= k || e.packet >= f) {
            return Err(GraphError::Malformed(format!(
                "edge ({}, {}) outside a {k}x{f} graph",
                e.user, e.packet
            )));
        }
        if edges.iter().any(|e| e.color == Some(0)) {
            return Err(GraphError::Malformed("colors must be positive".into()));
        }
        edges.sort_by_key(|e| (e.user, e.packet));
        if let Some(w) = edges.windows(2).find(|w| (w[0].user, w[0].packet) == (w[1].user, w[1].packet)) {
            return Err(GraphError::Malformed(format!(
                "duplicate edge ({}, {})",
                w[0].user, w[0].packet
            )));
        }
        Ok(BipartiteColoredGraph { k, f, edges })
    }

    /// Uncolored graph on the given `(user, packet)` pairs.
    pub fn uncolored(k: usize, f: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GraphError> {
        let edges = pairs
            .into_iter()
            .map(|(user, packet)| ColoredEdge { user, packet, color: None })
            .collect();
        Self::new(k, f, edges)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn f(&self) -> usize {
        self.f
    }

    pub fn edges(&self) -> &[ColoredEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn user_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.k];
        for e in &self.edges {
            deg[e.user] += 1;
        }
        deg
    }

    /// The common user degree, if all user vertices share one.
    pub fn constant_degree(&self) -> Option<usize> {
        let deg = self.user_degrees();
        let first = *deg.first()?;
        deg.iter().all(|&d| d == first).then_some(first)
    }

    /// Number of distinct colors in use.
    pub fn color_count(&self) -> usize {
        let mut colors: Vec<u32> = self.edges.iter().filter_map(|e| e.color).collect();
        colors.sort_unstable();
        colors.dedup();
        colors.len()
    }

    /// Drops all colors.
    pub fn without_colors(&self) -> Self {
        let edges = self.edges.iter().map(|e| ColoredEdge { color: None, ..*e }).collect();
        BipartiteColoredGraph { k: self.k, f: self.f, edges }
    }

    /// Renumbers colors 1..S by first occurrence scanning packets then users,
    /// which is the row-major order of the corresponding array.
    pub fn canonicalize(&self) -> Self {
        let mut order: Vec<usize> = (0..self.edges.len()).collect();
        order.sort_by_key(|&i| (self.edges[i].packet, self.edges[i].user));
        let mut map: HashMap<u32, u32> = HashMap::new();
        for &i in &order {
            if let Some(c) = self.edges[i].color {
                let next = map.len() as u32 + 1;
                map.entry(c).or_insert(next);
            }
        }
        let edges = self
            .edges
            .iter()
            .map(|e| ColoredEdge { color: e.color.map(|c| map[&c]), ..*e })
            .collect();
        BipartiteColoredGraph { k: self.k, f: self.f, edges }
    }

    fn adjacency(&self) -> Vec<bool> {
        let mut adj = vec![false; self.k * self.f];
        for e in &self.edges {
            adj[e.user * self.f + e.packet] = true;
        }
        adj
    }

    fn require_colors(&self) -> Result<(), GraphError> {
        match self.edges.iter().find(|e| e.color.is_none()) {
            Some(e) => Err(GraphError::IncompleteColoring((e.user, e.packet))),
            None => Ok(()),
        }
    }

    /// First same-colored pair of edges at distance at most two.
    fn strong_conflict(&self) -> Result<Option<(u32, (usize, usize), (usize, usize))>, GraphError> {
        self.require_colors()?;
        let adj = self.adjacency();
        let mut classes: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
        for e in &self.edges {
            classes.entry(e.color.unwrap()).or_default().push((e.user, e.packet));
        }
        for (&color, class) in &classes {
            for (i, &(k1, f1)) in class.iter().enumerate() {
                for &(k2, f2) in &class[i + 1..] {
                    let joined = k1 == k2 || f1 == f2 || adj[k1 * self.f + f2] || adj[k2 * self.f + f1];
                    if joined {
                        return Ok(Some((color, (k1, f1), (k2, f2))));
                    }
                }
            }
        }
        Ok(None)
    }

    /// Whether every color class is an induced matching.
    pub fn is_strong_coloring(&self) -> Result<bool, GraphError> {
        Ok(self.strong_conflict()?.is_none())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GraphJson::from(self)).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let raw: GraphJson = serde_json::from_str(text)?;
        let edges = raw
            .edges
            .into_iter()
            .map(|(k, f, color)| {
                if k == 0 || f == 0 {
                    return Err(GraphError::Malformed("vertex indices are 1-based".into()));
                }
                Ok(ColoredEdge { user: k - 1, packet: f - 1, color })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(raw.k, raw.f, edges)
    }
}

/// On-disk shape: `{"k":..,"f":..,"edges":[[k,f,color|null],..]}`, 1-based.
#[derive(Serialize, Deserialize)]
struct GraphJson {
    k: usize,
    f: usize,
    edges: Vec<(usize, usize, Option<u32>)>,
}

impl From<&BipartiteColoredGraph> for GraphJson {
    fn from(g: &BipartiteColoredGraph) -> Self {
        GraphJson {
            k: g.k,
            f: g.f,
            edges: g.edges.iter().map(|e| (e.user + 1, e.packet + 1, e.color)).collect(),
        }
    }
}

impl From<&Pda> for BipartiteColoredGraph {
    fn from(p: &Pda) -> Self {
        graph_of_grid(p.grid())
    }
}

fn graph_of_grid(grid: &Grid) -> BipartiteColoredGraph {
    let mut edges = Vec::new();
    for user in 0..grid.cols() {
        for packet in 0..grid.rows() {
            if let Entry::Color(c) = grid.get(packet, user) {
                edges.push(ColoredEdge { user, packet, color: Some(c) });
            }
        }
    }
    BipartiteColoredGraph { k: grid.cols(), f: grid.rows(), edges }
}

/// Maps a PDA to its colored bipartite graph, rejecting non-PDAs.
pub fn pda_to_graph(grid: &Grid) -> Result<BipartiteColoredGraph, GraphError> {
    let report = verify(grid);
    if !report.valid {
        return Err(GraphError::InvalidPda(Box::new(report)));
    }
    Ok(graph_of_grid(grid))
}

/// Inverse of [`pda_to_graph`]: constant user degree plus a strong coloring
/// yields a PDA.
pub fn graph_to_pda(g: &BipartiteColoredGraph) -> Result<Pda, GraphError> {
    g.require_colors()?;
    if g.constant_degree().is_none() {
        return Err(GraphError::DegreeViolation(g.user_degrees()));
    }
    if let Some((color, first, second)) = g.strong_conflict()? {
        return Err(GraphError::ColoringViolation { color, first, second });
    }
    let mut grid = Grid::all_stars(g.f, g.k)?;
    for e in &g.edges {
        grid.set(e.packet, e.user, Entry::Color(e.color.unwrap()));
    }
    Ok(Pda::new(grid)?)
}

/// Order in which the greedy colorer visits edges.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EdgeOrder {
    /// By user, then packet.
    #[default]
    Lexicographic,
    /// Uniform shuffle from the given seed.
    Shuffled { seed: u64 },
}

/// Greedy strong edge coloring: each edge, in order, gets the smallest color
/// not used within distance two.
///
/// Forbidden colors are gathered from the per-vertex color lists of both
/// endpoints and of every neighbor of those endpoints, so one edge costs the
/// size of its 2-neighborhood.
pub fn greedy_strong_color(g: &BipartiteColoredGraph, order: EdgeOrder) -> BipartiteColoredGraph {
    let mut user_nbrs: Vec<Vec<usize>> = vec![Vec::new(); g.k];
    let mut packet_nbrs: Vec<Vec<usize>> = vec![Vec::new(); g.f];
    for e in &g.edges {
        user_nbrs[e.user].push(e.packet);
        packet_nbrs[e.packet].push(e.user);
    }

    let mut visit: Vec<usize> = (0..g.edges.len()).collect();
    if let EdgeOrder::Shuffled { seed } = order {
        visit.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }

    let mut user_colors: Vec<Vec<u32>> = vec![Vec::new(); g.k];
    let mut packet_colors: Vec<Vec<u32>> = vec![Vec::new(); g.f];
    // stamp[c] == current edge number marks color c as forbidden
    let mut stamp: Vec<usize> = vec![usize::MAX; g.edges.len() + 2];
    let mut colors = vec![0u32; g.edges.len()];

    for (n, &i) in visit.iter().enumerate() {
        let ColoredEdge { user, packet, .. } = g.edges[i];
        let mut forbid = |cs: &[u32]| {
            for &c in cs {
                stamp[c as usize] = n;
            }
        };
        forbid(&user_colors[user]);
        forbid(&packet_colors[packet]);
        for &p in &user_nbrs[user] {
            forbid(&packet_colors[p]);
        }
        for &u in &packet_nbrs[packet] {
            forbid(&user_colors[u]);
        }
        let c = (1..).find(|&c| stamp[c] != n).unwrap() as u32;
        colors[i] = c;
        user_colors[user].push(c);
        packet_colors[packet].push(c);
    }

    let edges = g
        .edges
        .iter()
        .zip(&colors)
        .map(|(e, &c)| ColoredEdge { color: Some(c), ..*e })
        .collect();
    BipartiteColoredGraph { k: g.k, f: g.f, edges }.canonicalize()
}

/// Keeps `delta` uniformly chosen edges at every user vertex of a strongly
/// colored, constant-degree graph. The result is again a PDA graph.
pub fn subsample(g: &BipartiteColoredGraph, delta: usize, seed: u64) -> Result<BipartiteColoredGraph, GraphError> {
    g.require_colors()?;
    let degree = g.constant_degree().ok_or_else(|| GraphError::DegreeViolation(g.user_degrees()))?;
    if delta == 0 || delta >= degree {
        return Err(GraphError::InvalidParameter(format!(
            "need 0 < delta < {degree}, got {delta}"
        )));
    }
    if let Some((color, first, second)) = g.strong_conflict()? {
        return Err(GraphError::ColoringViolation { color, first, second });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = Vec::with_capacity(g.k * delta);
    // edges are sorted by user, so each user's edges form one block
    for block in g.edges.chunks(degree) {
        let mut picks = index::sample(&mut rng, degree, delta).into_vec();
        picks.sort_unstable();
        kept.extend(picks.into_iter().map(|i| block[i]));
    }
    Ok(BipartiteColoredGraph { k: g.k, f: g.f, edges: kept }.canonicalize())
}

/// How many edges per user [`augment`] keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeltaPolicy {
    /// The same δ for every sample; sources with degree ≤ δ are skipped.
    Fixed(usize),
    /// δ uniform in `1..Δ`, limited so that `K·δ ≤ max_edges` when given.
    Random { max_edges: Option<usize> },
}

impl DeltaPolicy {
    fn range(self, k: usize, degree: usize) -> Option<(usize, usize)> {
        match self {
            DeltaPolicy::Fixed(d) => (d >= 1 && d < degree).then_some((d, d)),
            DeltaPolicy::Random { max_edges } => {
                let hi = match max_edges {
                    Some(m) => (degree - 1).min(m / k.max(1)),
                    None => degree.saturating_sub(1),
                };
                (hi >= 1).then_some((1, hi))
            }
        }
    }
}

/// Result of [`augment`].
#[derive(Clone, Debug, PartialEq)]
pub struct Augmented {
    pub pdas: Vec<Pda>,
    /// Indices of sources that admit no legal δ under the policy.
    pub skipped: Vec<usize>,
}

/// Mints `count` PDAs by subsampling the sources in turn.
pub fn augment(sources: &[Pda], policy: DeltaPolicy, count: usize, seed: u64) -> Result<Augmented, GraphError> {
    let mut usable = Vec::new();
    let mut skipped = Vec::new();
    for (i, p) in sources.iter().enumerate() {
        let g = BipartiteColoredGraph::from(p);
        let degree = p.f() - p.z();
        match policy.range(p.k(), degree) {
            Some(r) if !g.is_empty() => usable.push((g, r)),
            _ => skipped.push(i),
        }
    }
    let mut pdas = Vec::with_capacity(count);
    if usable.is_empty() {
        if count > 0 {
            return Err(GraphError::InvalidParameter("no source admits a legal delta".into()));
        }
        return Ok(Augmented { pdas, skipped });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for n in 0..count {
        let (g, (lo, hi)) = &usable[n % usable.len()];
        let delta = rng.gen_range(*lo..=*hi);
        let sub = subsample(g, delta, rng.gen())?;
        pdas.push(graph_to_pda(&sub)?);
    }
    Ok(Augmented { pdas, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pda::construct_mn_pda;

    fn edge(user: usize, packet: usize, color: u32) -> ColoredEdge {
        ColoredEdge { user, packet, color: Some(color) }
    }

    #[test]
    fn two_user_pda_maps_to_two_edges() {
        let p = construct_mn_pda(2, 1).unwrap();
        let g = BipartiteColoredGraph::from(&p);
        assert_eq!(g.edges(), &[edge(0, 1, 1), edge(1, 0, 1)]);
    }

    #[test]
    fn all_star_grid_has_no_edges() {
        let g = pda_to_graph(&Grid::all_stars(3, 2).unwrap()).unwrap();
        assert!(g.is_empty());
        assert_eq!(graph_to_pda(&g).unwrap().grid(), &Grid::all_stars(3, 2).unwrap());
    }

    #[test]
    fn mn_3_1_degrees() {
        let g = BipartiteColoredGraph::from(&construct_mn_pda(3, 1).unwrap());
        assert_eq!(g.len(), 6);
        assert_eq!(g.user_degrees(), vec![2, 2, 2]);
    }

    #[test]
    fn invalid_grid_is_rejected() {
        let grid: Grid = "1 1".parse().unwrap();
        assert!(matches!(pda_to_graph(&grid), Err(GraphError::InvalidPda(_))));
    }

    #[test]
    fn unequal_degrees() {
        let g = BipartiteColoredGraph::new(2, 2, vec![edge(0, 0, 1), edge(0, 1, 2), edge(1, 0, 3)]).unwrap();
        assert!(matches!(graph_to_pda(&g), Err(GraphError::DegreeViolation(d)) if d == vec![2, 1]));
    }

    #[test]
    fn third_edge_breaks_strong_coloring() {
        // (1,2) and (2,1) share a color and edge (1,1) joins them
        let g = BipartiteColoredGraph::new(2, 2, vec![edge(0, 1, 1), edge(1, 0, 1), edge(0, 0, 2), edge(1, 1, 3)]).unwrap();
        assert!(!g.is_strong_coloring().unwrap());
        assert!(matches!(graph_to_pda(&g), Err(GraphError::ColoringViolation { .. })));
    }

    #[test]
    fn strong_coloring_small_cases() {
        // path k0-f0-k1-f1: edges (0,0),(1,0),(1,1); endpoints share a color
        let path = BipartiteColoredGraph::new(2, 2, vec![edge(0, 0, 1), edge(1, 0, 2), edge(1, 1, 1)]).unwrap();
        assert!(!path.is_strong_coloring().unwrap());
        let single = BipartiteColoredGraph::new(1, 1, vec![edge(0, 0, 7)]).unwrap();
        assert!(single.is_strong_coloring().unwrap());
        let partial = BipartiteColoredGraph::uncolored(1, 1, [(0, 0)]).unwrap();
        assert!(matches!(partial.is_strong_coloring(), Err(GraphError::IncompleteColoring((0, 0)))));
    }

    #[test]
    fn round_trip_mn() {
        for k in 2..=6 {
            for t in 1..k {
                let p = construct_mn_pda(k, t).unwrap();
                let g = BipartiteColoredGraph::from(&p);
                assert!(g.is_strong_coloring().unwrap());
                assert_eq!(graph_to_pda(&g).unwrap(), p);
            }
        }
    }

    /// Minimum number of colors of a strong edge coloring, by exhaustive search.
    fn brute_force_min_colors(g: &BipartiteColoredGraph) -> usize {
        let n = g.len();
        (1..=n)
            .find(|&budget| {
                let mut assign = vec![0u32; n];
                loop {
                    let edges = g
                        .edges()
                        .iter()
                        .zip(&assign)
                        .map(|(e, &c)| ColoredEdge { color: Some(c + 1), ..*e })
                        .collect();
                    if BipartiteColoredGraph::new(g.k(), g.f(), edges).unwrap().is_strong_coloring().unwrap() {
                        return true;
                    }
                    let mut i = 0;
                    while i < n {
                        assign[i] += 1;
                        if (assign[i] as usize) < budget {
                            break;
                        }
                        assign[i] = 0;
                        i += 1;
                    }
                    if i == n {
                        return false;
                    }
                }
            })
            .unwrap_or(0)
    }

    #[test]
    fn greedy_on_mn_3_1() {
        let g = BipartiteColoredGraph::from(&construct_mn_pda(3, 1).unwrap()).without_colors();
        let colored = greedy_strong_color(&g, EdgeOrder::Lexicographic);
        assert!(colored.is_strong_coloring().unwrap());
        let min = brute_force_min_colors(&g);
        assert_eq!(min, 3);
        assert!(colored.color_count() >= min);
        assert!(graph_to_pda(&colored).is_ok());
    }

    #[test]
    fn greedy_trivial_graphs() {
        let empty = BipartiteColoredGraph::uncolored(2, 2, []).unwrap();
        assert_eq!(greedy_strong_color(&empty, EdgeOrder::default()).color_count(), 0);
        let one = BipartiteColoredGraph::uncolored(1, 1, [(0, 0)]).unwrap();
        let c = greedy_strong_color(&one, EdgeOrder::default());
        assert_eq!(c.edges(), &[edge(0, 0, 1)]);
    }

    #[test]
    fn greedy_shuffled_orders_stay_strong() {
        let g = BipartiteColoredGraph::from(&construct_mn_pda(5, 2).unwrap()).without_colors();
        for seed in 0..20 {
            let c = greedy_strong_color(&g, EdgeOrder::Shuffled { seed });
            assert!(c.is_strong_coloring().unwrap());
        }
    }

    #[test]
    fn subsample_mn_4_1() {
        let g = BipartiteColoredGraph::from(&construct_mn_pda(4, 1).unwrap());
        for seed in 0..10 {
            let s = subsample(&g, 2, seed).unwrap();
            assert_eq!(s.user_degrees(), vec![2; 4]);
            let p = graph_to_pda(&s).unwrap();
            assert_eq!((p.k(), p.f(), p.z()), (4, 4, 2));
            assert!(verify(p.grid()).valid);
        }
    }

    #[test]
    fn subsample_needs_room() {
        let g = BipartiteColoredGraph::from(&construct_mn_pda(2, 1).unwrap());
        assert!(matches!(subsample(&g, 0, 1), Err(GraphError::InvalidParameter(_))));
        assert!(matches!(subsample(&g, 1, 1), Err(GraphError::InvalidParameter(_))));
    }

    #[test]
    fn subsample_is_seeded() {
        let g = BipartiteColoredGraph::from(&construct_mn_pda(5, 1).unwrap());
        assert_eq!(subsample(&g, 2, 42).unwrap(), subsample(&g, 2, 42).unwrap());
    }

    #[test]
    fn json_format() {
        let g = BipartiteColoredGraph::from(&construct_mn_pda(2, 1).unwrap());
        let text = g.to_json();
        assert_eq!(text, r#"{"k":2,"f":2,"edges":[[1,2,1],[2,1,1]]}"#);
        assert_eq!(BipartiteColoredGraph::from_json(&text).unwrap(), g);
        let unc = BipartiteColoredGraph::from_json(r#"{"k":1,"f":1,"edges":[[1,1,null]]}"#).unwrap();
        assert_eq!(unc.edges()[0].color, None);
    }
}
